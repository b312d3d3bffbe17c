//! Choice-probability kernels.
//!
//! Conditional on risk aversion, a household picks the best alternative in
//! its (random) consideration set, so the chance alternative `j` is chosen
//! equals the chance that `j` is considered while everything currently
//! better than `j` is not. That inner quantity is piecewise constant in risk
//! aversion with breakpoints at the pairwise indifference cutoffs, which
//! makes the integral over the risk-aversion distribution a short weighted
//! sum. Three kernels are provided:
//!
//! * **breakpoint** — exact CDF-mass sum over cutoff panels; requires the
//!   mechanism's set probabilities to be piecewise constant in risk aversion;
//! * **Riemann** — midpoint rule over an equal grid, supporting mechanisms
//!   whose inclusion probabilities vary smoothly with risk aversion, with an
//!   optional exact-mass variant that replaces the density weight with CDF
//!   differences;
//! * **brute force** — subset enumeration, used as an oracle in tests.
//!
//! A mixed-logit kernel (additive taste shocks, no limited consideration) is
//! included as the rival model.

use crate::consider::{mask_contains, Consideration, MechContext, SetMask};
use crate::context::HouseholdContext;
use crate::cutoffs::{alternative_cutoff, Cutoff, BREAKPOINT_MERGE_RTOL};
use crate::data::Observation;
use crate::dist::RiskDistribution;
use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre, pairwise_sum};
use crate::utility::UtilityFamily;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default interval count for the Riemann kernel.
pub const DEFAULT_RIEMANN_INTERVALS: usize = 4096;
/// Default quadrature order for the mixed-logit integral.
pub const DEFAULT_MIXED_LOGIT_ORDER: usize = 64;
/// Menus larger than this are refused by the brute-force kernel.
pub const BRUTE_FORCE_MAX_ALTERNATIVES: usize = 12;

/// Complete model: preferences, their population distribution, and the
/// consideration mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceModel {
    pub family: UtilityFamily,
    pub dist: RiskDistribution,
    pub mechanism: Consideration,
}

/// Which integration strategy to use for choice probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Breakpoint,
    Riemann { intervals: usize, exact_mass: bool },
    BruteForce,
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Riemann { intervals: DEFAULT_RIEMANN_INTERVALS, exact_mass: false }
    }
}

/// Probability that `j` is considered and nothing preferred to it is,
/// conditional on risk aversion `nu`.
pub fn conditional_choice_probability(
    family: &UtilityFamily,
    mech: &Consideration,
    ctx: &HouseholdContext,
    j: usize,
    nu: f64,
) -> Result<f64> {
    let blockers = crate::cutoffs::preferred_set(family, ctx, nu, j)?;
    let premiums: Vec<f64> = ctx.alternatives.iter().map(|a| a.total_premium()).collect();
    let mctx = MechContext { premiums: &premiums, demographics: &ctx.demographics };
    mech.marginal(1 << j, blockers, nu, &mctx)
}

impl ChoiceModel {
    pub fn choice_probability(&self, ctx: &HouseholdContext, j: usize, kernel: Kernel) -> Result<f64> {
        match kernel {
            Kernel::BruteForce => choice_prob_bruteforce(self, ctx, j),
            _ => {
                let prepared =
                    PreparedHousehold::new(&self.family, ctx, j, self.dist.nu_bar())?;
                prepared.choice_probability(&self.mechanism, &self.dist, kernel)
            }
        }
    }

    pub fn choice_probabilities(&self, ctx: &HouseholdContext, kernel: Kernel) -> Result<Vec<f64>> {
        (0..ctx.n_alternatives()).map(|j| self.choice_probability(ctx, j, kernel)).collect()
    }
}

/// Interior toggle event: at `nu`, alternative `k` enters or leaves the set
/// of alternatives preferred to the target.
#[derive(Debug, Clone, Copy)]
struct ToggleEvent {
    nu: f64,
    k: usize,
}

/// A household with its cutoff geometry precomputed for one target
/// alternative (the observed choice, for likelihood work). Cutoffs depend
/// only on the menu and the utility family, not on the mechanism or the
/// risk-aversion distribution, so one preparation serves an entire
/// estimation run.
#[derive(Debug, Clone)]
pub struct PreparedHousehold {
    pub choice: usize,
    premiums: Vec<f64>,
    demographics: Vec<f64>,
    initial_blockers: SetMask,
    events: Vec<ToggleEvent>,
    nu_bar: f64,
}

impl PreparedHousehold {
    pub fn new(
        family: &UtilityFamily,
        ctx: &HouseholdContext,
        choice: usize,
        nu_bar: f64,
    ) -> Result<Self> {
        let d = ctx.n_alternatives();
        if choice >= d {
            return Err(Error::DataValidation(format!(
                "chosen index {choice} out of range for a menu of {d}"
            )));
        }
        let mut initial_blockers: SetMask = 0;
        let mut events = Vec::new();
        for k in 0..d {
            if k == choice {
                continue;
            }
            // The riskier member of the pair goes first.
            let (cut, k_is_safer) = if k > choice {
                (
                    alternative_cutoff(family, &ctx.alternatives[choice], &ctx.alternatives[k], nu_bar, choice, k)?,
                    true,
                )
            } else {
                (
                    alternative_cutoff(family, &ctx.alternatives[k], &ctx.alternatives[choice], nu_bar, k, choice)?,
                    false,
                )
            };
            // A safer k is preferred above the cutoff; a riskier k below it.
            let (in_at_zero, event_nu) = match cut {
                Cutoff::NegInf => (k_is_safer, None),
                Cutoff::PosInf => (!k_is_safer, None),
                Cutoff::Finite(c) => {
                    if c <= 0.0 {
                        (k_is_safer, None)
                    } else if c >= nu_bar {
                        (!k_is_safer, None)
                    } else {
                        (!k_is_safer, Some(c))
                    }
                }
            };
            if in_at_zero {
                initial_blockers |= 1 << k;
            }
            if let Some(nu) = event_nu {
                events.push(ToggleEvent { nu, k });
            }
        }
        events.sort_by(|a, b| a.nu.partial_cmp(&b.nu).expect("finite cutoffs"));
        Ok(Self {
            choice,
            premiums: ctx.alternatives.iter().map(|a| a.total_premium()).collect(),
            demographics: ctx.demographics.clone(),
            initial_blockers,
            events,
            nu_bar,
        })
    }

    pub fn from_observation(family: &UtilityFamily, obs: &Observation, nu_bar: f64) -> Result<Self> {
        Self::new(family, &obs.context, obs.choice, nu_bar)
    }

    pub fn choice_probability(
        &self,
        mech: &Consideration,
        dist: &RiskDistribution,
        kernel: Kernel,
    ) -> Result<f64> {
        self.choice_probability_src(mech, dist, kernel, &CdfSource::Exact(dist))
    }

    fn choice_probability_src(
        &self,
        mech: &Consideration,
        dist: &RiskDistribution,
        kernel: Kernel,
        src: &CdfSource,
    ) -> Result<f64> {
        if (dist.nu_bar() - self.nu_bar).abs() > 1e-15 * self.nu_bar {
            return Err(Error::InvalidConfig(
                "distribution support does not match the range this household was prepared for"
                    .into(),
            ));
        }
        match kernel {
            Kernel::Breakpoint => self.breakpoint_probability(mech, src),
            Kernel::Riemann { intervals, exact_mass } => {
                self.riemann_probability(mech, dist, intervals, exact_mass, src)
            }
            Kernel::BruteForce => Err(Error::InvalidConfig(
                "brute-force kernel needs the full menu; call it through ChoiceModel".into(),
            )),
        }
    }

    fn breakpoint_probability(&self, mech: &Consideration, src: &CdfSource) -> Result<f64> {
        let bps = mech.piecewise_breakpoints().ok_or_else(|| {
            Error::InvalidConfig(
                "mechanism varies smoothly with risk aversion; use the Riemann kernel".into(),
            )
        })?;
        let nu_bar = self.nu_bar;
        let tol = BREAKPOINT_MERGE_RTOL * nu_bar;

        // One sorted edge list: preference toggles plus mechanism regime
        // switches (None marks a regime switch).
        let mut edges: Vec<(f64, Option<usize>)> =
            self.events.iter().map(|e| (e.nu, Some(e.k))).collect();
        for bp in bps {
            if bp > tol && bp < nu_bar - tol {
                edges.push((bp, None));
            }
        }
        edges.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite edges"));

        let d = self.premiums.len();
        let mctx = MechContext { premiums: &self.premiums, demographics: &self.demographics };
        let product_form = mech.is_product_form();
        let mut alphas = vec![0.0; d];
        let mut blockers = self.initial_blockers;
        // Product over blockers of (1 - alpha), kept in log space; exact
        // alpha = 1 factors are tracked as a zero count instead.
        let mut log_prod = 0.0;
        let mut zero_cnt = 0usize;
        let mut need_refresh = true;

        let mut total = 0.0;
        let mut lo = 0.0;
        let mut f_lo = 0.0;
        let mut idx = 0;
        loop {
            let hi = if idx == edges.len() { nu_bar } else { edges[idx].0 };
            if hi > lo + tol || (idx == edges.len() && hi > lo) {
                let f_hi = if idx == edges.len() { 1.0 } else { src.cdf(hi) };
                let mass = (f_hi - f_lo).max(0.0);
                if mass > 0.0 {
                    let mid = 0.5 * (lo + hi);
                    let p = if product_form {
                        if need_refresh {
                            mech.product_alphas(mid, &mctx, &mut alphas)?;
                            log_prod = 0.0;
                            zero_cnt = 0;
                            for k in BitIter(blockers) {
                                if alphas[k] == 1.0 {
                                    zero_cnt += 1;
                                } else {
                                    log_prod += (1.0 - alphas[k]).ln();
                                }
                            }
                            need_refresh = false;
                        }
                        if zero_cnt > 0 {
                            0.0
                        } else {
                            alphas[self.choice] * log_prod.exp()
                        }
                    } else {
                        mech.marginal(1 << self.choice, blockers, mid, &mctx)?
                    };
                    total += mass * p;
                }
                f_lo = f_hi;
                lo = hi;
            }
            if idx == edges.len() {
                break;
            }
            match edges[idx].1 {
                Some(k) => {
                    let entering = !mask_contains(blockers, k);
                    blockers ^= 1 << k;
                    if product_form && !need_refresh {
                        if alphas[k] == 1.0 {
                            if entering {
                                zero_cnt += 1;
                            } else {
                                zero_cnt -= 1;
                            }
                        } else {
                            let term = (1.0 - alphas[k]).ln();
                            if entering {
                                log_prod += term;
                            } else {
                                log_prod -= term;
                            }
                        }
                    }
                }
                None => need_refresh = true,
            }
            idx += 1;
        }
        Ok(total)
    }

    fn riemann_probability(
        &self,
        mech: &Consideration,
        dist: &RiskDistribution,
        intervals: usize,
        exact_mass: bool,
        src: &CdfSource,
    ) -> Result<f64> {
        if intervals == 0 {
            return Err(Error::InvalidConfig("Riemann kernel needs at least one interval".into()));
        }
        let nu_bar = self.nu_bar;
        let step = nu_bar / intervals as f64;
        let d = self.premiums.len();
        let mctx = MechContext { premiums: &self.premiums, demographics: &self.demographics };
        let product_form = mech.is_product_form();
        let mut alphas = vec![0.0; d];

        let mut blockers = self.initial_blockers;
        let mut ev = 0;
        let mut total = 0.0;
        let mut f_prev = 0.0;
        for i in 0..intervals {
            let mid = (i as f64 + 0.5) * step;
            while ev < self.events.len() && self.events[ev].nu <= mid {
                blockers ^= 1 << self.events[ev].k;
                ev += 1;
            }
            let w = if exact_mass {
                let f_hi = if i + 1 == intervals { 1.0 } else { src.cdf((i + 1) as f64 * step) };
                let w = f_hi - f_prev;
                f_prev = f_hi;
                w
            } else {
                dist.pdf(mid) * step
            };
            if w == 0.0 {
                continue;
            }
            let p = if product_form {
                mech.product_alphas(mid, &mctx, &mut alphas)?;
                let mut prod = alphas[self.choice];
                for k in BitIter(blockers) {
                    prod *= 1.0 - alphas[k];
                }
                prod
            } else {
                mech.marginal(1 << self.choice, blockers, mid, &mctx)?
            };
            total += w * p;
        }
        Ok(total)
    }
}

/// Tabulated distribution function for repeated panel-mass queries.
///
/// Estimation evaluates the likelihood hundreds of times, and each
/// evaluation needs the distribution function at a handful of fixed points
/// per household; the special-function calls dominate the run time. This
/// table is rebuilt once per likelihood evaluation (so results stay
/// deterministic) and interpolates with cubic Hermite segments using exact
/// values and slopes at the nodes. Nodes are graded toward the support ends,
/// where beta shapes below 2 lose smoothness; interior accuracy is far below
/// 1e-12 and the graded end cells are bounded by their own (tiny) mass.
struct CdfTable {
    xs: Vec<f64>,
    fs: Vec<f64>,
    ds: Vec<f64>,
}

impl CdfTable {
    const UNIFORM_CELLS: usize = 2048;
    const GRADED_LEVELS: i32 = 40;

    fn new(dist: &RiskDistribution) -> Self {
        let nu_bar = dist.nu_bar();
        let levels = Self::GRADED_LEVELS as usize;
        let mut xs: Vec<f64> = Vec::with_capacity(Self::UNIFORM_CELLS + 2 * levels + 2);
        for i in 0..=Self::UNIFORM_CELLS {
            xs.push(nu_bar * i as f64 / Self::UNIFORM_CELLS as f64);
        }
        // First graded node sits inside the first/last uniform cell.
        for k in 12..=Self::GRADED_LEVELS {
            xs.push(nu_bar * 0.5f64.powi(k));
            xs.push(nu_bar * (1.0 - 0.5f64.powi(k)));
        }
        xs.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));
        xs.dedup();
        let fs: Vec<f64> = xs.iter().map(|&x| dist.cdf(x)).collect();
        // Densities with a pole at a support end get a zero slope there; the
        // affected cell is 2^-40 of the support, so the mass at stake is
        // negligible for every shape the estimator can reach.
        let ds: Vec<f64> =
            xs.iter().map(|&x| { let d = dist.pdf(x); if d.is_finite() { d } else { 0.0 } }).collect();
        Self { xs, fs, ds }
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.fs[0];
        }
        if x >= self.xs[n - 1] {
            return self.fs[n - 1];
        }
        let i = self.xs.partition_point(|&v| v <= x) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let t2 = t * t;
        let omt = 1.0 - t;
        let h00 = (1.0 + 2.0 * t) * omt * omt;
        let h10 = t * omt * omt;
        let h01 = t2 * (3.0 - 2.0 * t);
        let h11 = t2 * (t - 1.0);
        h00 * self.fs[i] + h * (h10 * self.ds[i] + h11 * self.ds[i + 1]) + h01 * self.fs[i + 1]
    }
}

/// Distribution-function source for the kernels: exact special-function
/// calls, or the per-evaluation table above.
enum CdfSource<'a> {
    Exact(&'a RiskDistribution),
    Table(&'a CdfTable),
}

impl CdfSource<'_> {
    #[inline]
    fn cdf(&self, x: f64) -> f64 {
        match self {
            CdfSource::Exact(dist) => dist.cdf(x),
            CdfSource::Table(table) => table.eval(x),
        }
    }
}

/// Iterator over the set bit indices of a mask.
struct BitIter(SetMask);

impl Iterator for BitIter {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            let k = self.0.trailing_zeros() as usize;
            self.0 &= self.0 - 1;
            Some(k)
        }
    }
}

/// Subset-enumeration oracle: integrates, over every consideration set, the
/// probability that the set is realized and `j` is its best member.
/// Subdivision of `[lo, hi]` geometrically refined toward both ends.
fn graded_panel_edges(lo: f64, hi: f64) -> Vec<f64> {
    const LEVELS: i32 = 12;
    let h = hi - lo;
    let mut edges = Vec::with_capacity(2 * LEVELS as usize + 1);
    edges.push(lo);
    for k in (1..=LEVELS).rev() {
        edges.push(lo + h * 0.5f64.powi(k));
    }
    for k in 2..=LEVELS {
        edges.push(hi - h * 0.5f64.powi(k));
    }
    edges.push(hi);
    edges
}

pub fn choice_prob_bruteforce(model: &ChoiceModel, ctx: &HouseholdContext, j: usize) -> Result<f64> {
    let d = ctx.n_alternatives();
    if d > BRUTE_FORCE_MAX_ALTERNATIVES {
        return Err(Error::InvalidConfig(format!(
            "brute-force kernel refuses menus beyond {BRUTE_FORCE_MAX_ALTERNATIVES} alternatives"
        )));
    }
    if j >= d {
        return Err(Error::InvalidConfig(format!("alternative {j} out of range")));
    }
    let nu_bar = model.dist.nu_bar();
    let tol = BREAKPOINT_MERGE_RTOL * nu_bar;
    let premiums: Vec<f64> = ctx.alternatives.iter().map(|a| a.total_premium()).collect();
    let mctx = MechContext { premiums: &premiums, demographics: &ctx.demographics };
    let piecewise = model.mechanism.piecewise_breakpoints();

    // Panel edges: every finite pairwise cutoff inside the support, plus any
    // mechanism regime switches.
    let mut edges = vec![0.0, nu_bar];
    for a in 0..d {
        for b in (a + 1)..d {
            let cut = alternative_cutoff(
                &model.family,
                &ctx.alternatives[a],
                &ctx.alternatives[b],
                nu_bar,
                a,
                b,
            )?;
            if let Cutoff::Finite(c) = cut {
                if c > tol && c < nu_bar - tol {
                    edges.push(c);
                }
            }
        }
    }
    if let Some(bps) = &piecewise {
        for &bp in bps {
            if bp > tol && bp < nu_bar - tol {
                edges.push(bp);
            }
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite edges"));
    edges.dedup_by(|a, b| (*a - *b).abs() < tol);

    let (nodes, weights) = gauss_legendre(24);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        // Score ordering is constant within the panel.
        let mut order: Vec<usize> = (0..d).collect();
        let scores: Vec<f64> = ctx
            .alternatives
            .iter()
            .map(|alt| model.family.preference_score(mid, alt))
            .collect::<Result<_>>()?;
        order.sort_by(|&a, &b| {
            scores[b].partial_cmp(&scores[a]).expect("finite scores").then(a.cmp(&b))
        });
        let mass = model.dist.mass_between(lo, hi);
        for set in 1u32..(1 << d) {
            let set = set as SetMask;
            let argmax = order.iter().copied().find(|&k| mask_contains(set, k));
            if argmax != Some(j) {
                continue;
            }
            if piecewise.is_some() {
                if mass > 0.0 {
                    total += mass * model.mechanism.set_probability(set, mid, &mctx)?;
                }
            } else {
                // Set probability varies smoothly inside the panel:
                // integrate it against the density. The mesh is graded
                // toward the panel ends because the density itself can have
                // algebraic endpoint singularities (beta shapes below 2)
                // that a single fixed-order rule resolves poorly.
                for sub in graded_panel_edges(lo, hi).windows(2) {
                    let half = 0.5 * (sub[1] - sub[0]);
                    let center = 0.5 * (sub[0] + sub[1]);
                    for (&x, &gw) in nodes.iter().zip(&weights) {
                        let nu = center + half * x;
                        total += gw
                            * half
                            * model.dist.pdf(nu)
                            * model.mechanism.set_probability(set, nu, &mctx)?;
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Soft-max choice probability conditional on risk aversion: every
/// alternative is considered, and utilities carry additive extreme-value
/// taste shocks with scale `sigma`.
pub fn mixed_logit_conditional(
    family: &UtilityFamily,
    ctx: &HouseholdContext,
    j: usize,
    nu: f64,
    sigma: f64,
) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("logit scale must be positive, got {sigma}")));
    }
    let z: Vec<f64> = ctx
        .alternatives
        .iter()
        .map(|alt| Ok(family.alternative_expected_utility(nu, alt)? / sigma))
        .collect::<Result<_>>()?;
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = z.iter().map(|&v| (v - m).exp()).sum();
    Ok((z[j] - m).exp() / denom)
}

/// Mixed-logit choice probability integrated over the risk-aversion
/// distribution with Gauss-Legendre quadrature. The quadrature's own density
/// mass is divided out so the probabilities sum to one exactly.
pub fn mixed_logit_choice_prob(
    family: &UtilityFamily,
    dist: &RiskDistribution,
    ctx: &HouseholdContext,
    j: usize,
    sigma: f64,
    order: usize,
) -> Result<f64> {
    let nu_bar = dist.nu_bar();
    let (nodes, weights) = gauss_legendre(order);
    let half = 0.5 * nu_bar;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &w) in nodes.iter().zip(&weights) {
        let nu = half * (1.0 + x);
        let f = dist.pdf(nu);
        if f == 0.0 {
            continue;
        }
        num += w * f * mixed_logit_conditional(family, ctx, j, nu, sigma)?;
        den += w * f;
    }
    if den <= 0.0 {
        return Err(Error::Numeric("risk distribution has no quadrature mass".into()));
    }
    Ok(num / den)
}

/// Log-likelihood with per-household terms (needed for model comparison
/// tests) and a list of households the model assigns zero probability.
#[derive(Debug, Clone)]
pub struct LogLikelihood {
    pub total: f64,
    pub per_household: Vec<f64>,
    pub zero_probability: Vec<usize>,
}

/// Prepares every household in parallel for repeated likelihood evaluation.
pub fn prepare_households(
    family: &UtilityFamily,
    data: &[Observation],
    nu_bar: f64,
) -> Result<Vec<PreparedHousehold>> {
    data.par_iter().map(|obs| PreparedHousehold::from_observation(family, obs, nu_bar)).collect()
}

/// Likelihood over prepared households. Households are mapped in parallel;
/// the reduction is a fixed-order pairwise tree, so the total is
/// bit-identical regardless of thread count.
pub fn log_likelihood_prepared(
    prepared: &[PreparedHousehold],
    mech: &Consideration,
    dist: &RiskDistribution,
    kernel: Kernel,
) -> Result<LogLikelihood> {
    if prepared.is_empty() {
        return Err(Error::DataValidation("empty dataset".into()));
    }
    // One table per evaluation: the same distribution is queried at a few
    // fixed points for each of tens of thousands of households, so the
    // special-function calls are hoisted out of the household loop.
    let table = CdfTable::new(dist);
    let src = CdfSource::Table(&table);
    let probs: Vec<f64> = prepared
        .par_iter()
        .map(|h| h.choice_probability_src(mech, dist, kernel, &src))
        .collect::<Result<_>>()?;
    let mut per_household = Vec::with_capacity(probs.len());
    let mut zero_probability = Vec::new();
    for (i, p) in probs.into_iter().enumerate() {
        if p > 0.0 {
            per_household.push(p.ln());
        } else {
            per_household.push(f64::NEG_INFINITY);
            zero_probability.push(i);
        }
    }
    Ok(LogLikelihood { total: pairwise_sum(&per_household), per_household, zero_probability })
}

/// One-call likelihood from raw observations.
pub fn log_likelihood(
    model: &ChoiceModel,
    data: &[Observation],
    kernel: Kernel,
) -> Result<LogLikelihood> {
    if data.is_empty() {
        return Err(Error::DataValidation("empty dataset".into()));
    }
    match kernel {
        Kernel::BruteForce => {
            let probs: Vec<f64> = data
                .par_iter()
                .map(|obs| choice_prob_bruteforce(model, &obs.context, obs.choice))
                .collect::<Result<_>>()?;
            let mut per_household = Vec::with_capacity(probs.len());
            let mut zero_probability = Vec::new();
            for (i, p) in probs.into_iter().enumerate() {
                if p > 0.0 {
                    per_household.push(p.ln());
                } else {
                    per_household.push(f64::NEG_INFINITY);
                    zero_probability.push(i);
                }
            }
            Ok(LogLikelihood {
                total: pairwise_sum(&per_household),
                per_household,
                zero_probability,
            })
        }
        _ => {
            let prepared = prepare_households(&model.family, data, model.dist.nu_bar())?;
            log_likelihood_prepared(&prepared, &model.mechanism, &model.dist, kernel)
        }
    }
}
