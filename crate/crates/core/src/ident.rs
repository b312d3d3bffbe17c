//! Identification laboratory: recovery constructions and model audits that
//! operate on observable market-share curves rather than on samples.
//!
//! The central object is a [`ChoiceProbabilityField`]: choice probabilities
//! `x -> Pr(j | x)` along a one-dimensional path through menu space, bundled
//! with the indifference-cutoff geometry of that path. Downstream routines —
//! preference-density recovery, consideration-probability recovery, the
//! limited-consideration test, breakpoint scans for two-type populations, and
//! the dominance/monotonicity audits — consume only the field interface, so
//! exact kernel-backed fields and kernel-smoothed empirical fields plug in
//! interchangeably.
//!
//! Index conventions match the rest of the crate: alternative 0 is the
//! riskiest (largest deductible), and the "anchor" cutoffs are the
//! indifference points of each safer alternative against alternative 0.

use std::cell::RefCell;

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::choice::{
    conditional_choice_probability, mixed_logit_choice_prob, mixed_logit_conditional, ChoiceModel,
    Kernel,
};
use crate::consider::{BasicArc, BinaryTypes, Consideration};
use crate::context::HouseholdContext;
use crate::cutoffs::CutoffMatrix;
use crate::dist::RiskDistribution;
use crate::error::{Error, Result};
use crate::numeric::{brent_root, richardson_deriv, DerivSide};
use crate::utility::UtilityFamily;

/// Relative step (as a share of the menu-path span) for finite-difference
/// derivatives when a field carries no closed-form derivative.
const FD_STEP_SHARE: f64 = 1e-4;

/// Number of shrinking offsets used for Richardson-extrapolated derivatives
/// and one-sided limits.
const DERIV_LEVELS: usize = 4;

/// Probe tolerance for the "probabilities sum to one" field diagnostic.
const FIELD_MASS_TOL: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Menu paths
// ---------------------------------------------------------------------------

/// A single-line deductible menu whose premiums move linearly along a scalar
/// path parameter `x`, so every pairwise indifference cutoff of the
/// mean–variance family is an affine function of `x`.
#[derive(Debug, Clone, Serialize)]
pub struct LinearMenuMap {
    pub claim_prob: f64,
    /// Strictly decreasing, riskiest first.
    pub deductibles: Vec<f64>,
    /// Premium of alternative `j` at `x = 0`.
    pub base_premiums: Vec<f64>,
    /// Premium slope of alternative `j` in `x`.
    pub premium_slopes: Vec<f64>,
    /// Closed path interval `[x_lo, x_hi]`.
    pub x_support: (f64, f64),
}

impl LinearMenuMap {
    pub fn new(
        claim_prob: f64,
        deductibles: Vec<f64>,
        base_premiums: Vec<f64>,
        premium_slopes: Vec<f64>,
        x_support: (f64, f64),
    ) -> Result<Self> {
        let n = deductibles.len();
        if n < 2 {
            return Err(Error::InvalidConfig("a menu path needs at least two alternatives".into()));
        }
        if base_premiums.len() != n || premium_slopes.len() != n {
            return Err(Error::InvalidConfig(
                "premium intercepts and slopes must match the number of deductibles".into(),
            ));
        }
        if !(x_support.0.is_finite() && x_support.1.is_finite() && x_support.0 < x_support.1) {
            return Err(Error::InvalidConfig(format!(
                "menu path interval must be finite and non-empty, got ({}, {})",
                x_support.0, x_support.1
            )));
        }
        let map = Self { claim_prob, deductibles, base_premiums, premium_slopes, x_support };
        // Surface bad geometry immediately: the endpoints bound every linear
        // premium, so validity there means validity on the whole path.
        map.context_at(x_support.0)?;
        map.context_at(x_support.1)?;
        Ok(map)
    }

    /// Builds the premium schedule that realizes prescribed anchor-cutoff
    /// lines `c_{0,j}(x) = offset_j + slope_j * x` (for `j >= 1`) under the
    /// mean–variance preference family, holding the riskiest alternative's
    /// premium fixed at `base_premium`.
    pub fn from_anchored_cutoffs(
        claim_prob: f64,
        deductibles: Vec<f64>,
        base_premium: f64,
        offsets: &[f64],
        slopes: &[f64],
        x_support: (f64, f64),
    ) -> Result<Self> {
        let n = deductibles.len();
        if offsets.len() + 1 != n || slopes.len() + 1 != n {
            return Err(Error::InvalidConfig(
                "need one cutoff offset and slope per alternative beyond the riskiest".into(),
            ));
        }
        let d0 = deductibles[0];
        let mut base = vec![base_premium];
        let mut slope = vec![0.0];
        for (j, &dj) in deductibles.iter().enumerate().skip(1) {
            // Half the cost-variance gap against the riskiest alternative:
            // the rate at which a cutoff shift converts into a premium shift.
            let gj = claim_prob * (1.0 - claim_prob) * (d0 * d0 - dj * dj) / 2.0;
            base.push(base_premium + claim_prob * (d0 - dj) + offsets[j - 1] * gj);
            slope.push(slopes[j - 1] * gj);
        }
        Self::new(claim_prob, deductibles, base, slope, x_support)
    }

    /// A well-conditioned default path: deductibles 500, 400, ... with the
    /// anchor cutoffs sweeping the whole preference support at staggered
    /// offsets `0.3 * nu_bar * (j - 1)` and slopes `1 - 0.1 * (j - 1)`.
    pub fn standard(n_alternatives: usize, nu_bar: f64) -> Result<Self> {
        const DEDUCTIBLES: [f64; 5] = [500.0, 400.0, 300.0, 200.0, 100.0];
        if !(2..=DEDUCTIBLES.len()).contains(&n_alternatives) {
            return Err(Error::InvalidConfig(format!(
                "standard menu path supports 2..=5 alternatives, got {n_alternatives}"
            )));
        }
        let offsets: Vec<f64> =
            (1..n_alternatives).map(|j| 0.3 * nu_bar * (j - 1) as f64).collect();
        let slopes: Vec<f64> = (1..n_alternatives).map(|j| 1.0 - 0.1 * (j - 1) as f64).collect();
        Self::from_anchored_cutoffs(
            0.1,
            DEDUCTIBLES[..n_alternatives].to_vec(),
            100.0,
            &offsets,
            &slopes,
            (-0.1 * nu_bar, 1.5 * nu_bar),
        )
    }

    pub fn n_alternatives(&self) -> usize {
        self.deductibles.len()
    }

    pub fn premium(&self, x: f64, j: usize) -> f64 {
        self.base_premiums[j] + self.premium_slopes[j] * x
    }

    /// The menu at path position `x`.
    pub fn context_at(&self, x: f64) -> Result<HouseholdContext> {
        let premiums: Vec<f64> = (0..self.n_alternatives()).map(|j| self.premium(x, j)).collect();
        HouseholdContext::single_line(self.claim_prob, &premiums, &self.deductibles, vec![])
    }

    /// Intercept and slope of the mean–variance indifference cutoff between
    /// alternatives `j < k`: `c_{j,k}(x) = intercept + slope * x`.
    pub fn cutoff_line(&self, j: usize, k: usize) -> (f64, f64) {
        assert!(j < k && k < self.n_alternatives(), "cutoff line needs j < k < n");
        let mu = self.claim_prob;
        let (dj, dk) = (self.deductibles[j], self.deductibles[k]);
        let denom = mu * (1.0 - mu) * (dj * dj - dk * dk);
        let mean_gap_0 = (self.base_premiums[k] + mu * dk) - (self.base_premiums[j] + mu * dj);
        let mean_gap_slope = self.premium_slopes[k] - self.premium_slopes[j];
        (2.0 * mean_gap_0 / denom, 2.0 * mean_gap_slope / denom)
    }
}

// ---------------------------------------------------------------------------
// Choice probability fields
// ---------------------------------------------------------------------------

type ProbFn = Box<dyn Fn(f64, usize) -> Result<f64> + Send + Sync>;

/// Market-share curves along a [`LinearMenuMap`], optionally with closed-form
/// derivatives in the path parameter.
///
/// Exact fields built from a consideration model carry analytic derivatives;
/// smoothed empirical fields fall back to Richardson finite differences with
/// step [`FD_STEP_SHARE`] of the path span (and correspondingly looser
/// accuracy — qualitative rather than quantitative).
pub struct ChoiceProbabilityField {
    menu: LinearMenuMap,
    nu_bar: f64,
    prob: ProbFn,
    dprob: Option<ProbFn>,
    fd_step: f64,
}

impl std::fmt::Debug for ChoiceProbabilityField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChoiceProbabilityField")
            .field("menu", &self.menu)
            .field("nu_bar", &self.nu_bar)
            .field("analytic_derivative", &self.dprob.is_some())
            .field("fd_step", &self.fd_step)
            .finish_non_exhaustive()
    }
}

impl ChoiceProbabilityField {
    fn assemble(
        menu: LinearMenuMap,
        nu_bar: f64,
        prob: ProbFn,
        dprob: Option<ProbFn>,
        fd_step: f64,
    ) -> Result<Self> {
        if !(nu_bar.is_finite() && nu_bar > 0.0) {
            return Err(Error::InvalidConfig(format!("nu_bar must be positive, got {nu_bar}")));
        }
        let field = Self { menu, nu_bar, prob, dprob, fd_step };
        field.validate_probes(9)?;
        Ok(field)
    }

    /// Checks that probabilities are in `[0, 1]` and sum to one (within
    /// [`FIELD_MASS_TOL`]) on an interior probe grid.
    fn validate_probes(&self, probes: usize) -> Result<()> {
        let (lo, hi) = self.menu.x_support;
        for i in 0..probes {
            let x = lo + (hi - lo) * (i as f64 + 0.5) / probes as f64;
            let mut total = 0.0;
            for j in 0..self.n_alternatives() {
                let p = self.prob(x, j)?;
                if !(-1e-12..=1.0 + 1e-12).contains(&p) {
                    return Err(Error::DataValidation(format!(
                        "field probability out of range at x = {x:.6e}, alternative {j}: {p}"
                    )));
                }
                total += p;
            }
            if (total - 1.0).abs() > FIELD_MASS_TOL {
                return Err(Error::DataValidation(format!(
                    "field probabilities sum to {total} at x = {x:.6e}; expected 1"
                )));
            }
        }
        Ok(())
    }

    pub fn n_alternatives(&self) -> usize {
        self.menu.n_alternatives()
    }

    pub fn x_support(&self) -> (f64, f64) {
        self.menu.x_support
    }

    pub fn nu_bar(&self) -> f64 {
        self.nu_bar
    }

    pub fn menu(&self) -> &LinearMenuMap {
        &self.menu
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.dprob.is_some()
    }

    /// Finite-difference step in path units (relevant to smoothed fields).
    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn prob(&self, x: f64, j: usize) -> Result<f64> {
        if j >= self.n_alternatives() {
            return Err(Error::InvalidConfig(format!("alternative index {j} out of range")));
        }
        (self.prob)(x, j)
    }

    /// Two-sided derivative of `Pr(j | x)` in the path parameter.
    pub fn dprob_dx(&self, x: f64, j: usize) -> Result<f64> {
        self.dprob_limit(x, j, DerivSide::Central)
    }

    /// Derivative of `Pr(j | x)`, optionally as the limit from one side of
    /// `x` (derivatives of the share curves jump where a cutoff line crosses
    /// the edge of the preference support or a type threshold).
    pub fn dprob_limit(&self, x: f64, j: usize, side: DerivSide) -> Result<f64> {
        if j >= self.n_alternatives() {
            return Err(Error::InvalidConfig(format!("alternative index {j} out of range")));
        }
        match (&self.dprob, side) {
            (Some(d), DerivSide::Central) => d(x, j),
            (Some(d), _) => {
                // The closed form is the almost-everywhere derivative; its
                // one-sided limit is extrapolated from values on that side.
                let sign = if side == DerivSide::Below { -1.0 } else { 1.0 };
                let mut hs = Vec::with_capacity(DERIV_LEVELS);
                let mut vs = Vec::with_capacity(DERIV_LEVELS);
                for k in 0..DERIV_LEVELS {
                    let h = self.fd_step / 2f64.powi(k as i32);
                    hs.push(h);
                    vs.push(d(x + sign * h, j)?);
                }
                Ok(extrapolate_to_zero(&hs, &vs))
            }
            (None, side) => result_deriv(|t| self.prob(t, j), x, self.fd_step, side),
        }
    }

    /// Cutoff `c_{j,k}(x)` of the pair `j < k` along the path.
    pub fn cutoff_value(&self, x: f64, j: usize, k: usize) -> f64 {
        let (a, b) = self.menu.cutoff_line(j, k);
        a + b * x
    }

    /// Path-derivative of the cutoff of the pair `j < k` (constant here).
    pub fn dcutoff_dx(&self, _x: f64, j: usize, k: usize) -> f64 {
        self.menu.cutoff_line(j, k).1
    }

    /// First-best alternative at `(x, nu)` under the mean–variance family.
    pub fn first_best_at(&self, x: f64, nu: f64) -> Result<usize> {
        let ctx = self.menu.context_at(x)?;
        Ok(crate::cutoffs::first_best(&UtilityFamily::Ntd, &ctx, nu)?.index)
    }

    /// Inverts the anchor cutoff `c_{0,j}(x) = target` over the path.
    pub fn x_at_anchor_cutoff(&self, j: usize, target: f64) -> Result<f64> {
        self.x_at_pair_cutoff(0, j, target)
    }

    /// Inverts a pairwise cutoff `c_{j,k}(x) = target` over the path
    /// (requires the target to be bracketed by the endpoint values).
    pub fn x_at_pair_cutoff(&self, j: usize, k: usize, target: f64) -> Result<f64> {
        let (lo, hi) = self.menu.x_support;
        let f = |x: f64| self.cutoff_value(x, j, k) - target;
        let (fa, fb) = (f(lo), f(hi));
        if fa == 0.0 {
            return Ok(lo);
        }
        if fb == 0.0 {
            return Ok(hi);
        }
        if fa * fb > 0.0 {
            return Err(Error::Numeric(format!(
                "cutoff of pair ({j}, {k}) never reaches {target:.6e} on the menu path \
                 (endpoint values {:.6e} and {:.6e})",
                fa + target,
                fb + target
            )));
        }
        brent_root(f, lo, hi, fa, fb, 1e-13 * (hi - lo), 4.0 * f64::EPSILON, 200)
    }
}

/// Richardson derivative of a fallible function, propagating the first error
/// hit by the stencil.
fn result_deriv<F: Fn(f64) -> Result<f64>>(f: F, x: f64, h0: f64, side: DerivSide) -> Result<f64> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let value = richardson_deriv(
        |t| match f(t) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        x,
        h0,
        DERIV_LEVELS,
        side,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Neville polynomial extrapolation of `(h_i, v_i)` samples to `h = 0`.
fn extrapolate_to_zero(hs: &[f64], vs: &[f64]) -> f64 {
    debug_assert_eq!(hs.len(), vs.len());
    let mut tab = vs.to_vec();
    let n = tab.len();
    for level in 1..n {
        for i in 0..(n - level) {
            tab[i] = (hs[i] * tab[i + 1] - hs[i + level] * tab[i]) / (hs[i] - hs[i + level]);
        }
    }
    tab[0]
}

/// Inclusion probabilities as a function of risk aversion: either one profile
/// for everyone, or a two-type population split at a threshold.
#[derive(Debug, Clone)]
enum AlphaProfile {
    Constant(Vec<f64>),
    Step { low: Vec<f64>, high: Vec<f64>, nu_star: f64 },
}

impl AlphaProfile {
    fn at(&self, nu: f64) -> &[f64] {
        match self {
            Self::Constant(a) => a,
            Self::Step { low, high, nu_star } => {
                if nu < *nu_star {
                    low
                } else {
                    high
                }
            }
        }
    }
}

/// Closed-form path derivative of `Pr(j | x)` for an independent-inclusion
/// consideration model over a linear menu path.
///
/// Each pairwise cutoff line involving `j` sweeps an infinitesimal strip of
/// types as `x` moves; the derivative adds up, over those lines, the jump of
/// the conditional choice probability across the line times the preference
/// density on it times the line's slope.
fn arc_path_derivative(
    menu: &LinearMenuMap,
    profile: &AlphaProfile,
    dist: &RiskDistribution,
    x: f64,
    j: usize,
) -> f64 {
    let n = menu.n_alternatives();
    let cut = |a: usize, b: usize| {
        let (intercept, slope) = menu.cutoff_line(a, b);
        (intercept + slope * x, slope)
    };
    let mut total = 0.0;
    for i in 0..n {
        if i == j {
            continue;
        }
        let (c, c_slope) = if i < j { cut(i, j) } else { cut(j, i) };
        let density = dist.pdf(c);
        if density == 0.0 {
            continue;
        }
        let alphas = profile.at(c);
        // Survival factor: j is included, and every remaining alternative
        // that beats j at the strip either goes unconsidered or is absent.
        let mut survive = alphas[j];
        for k in 0..n {
            if k == i || k == j {
                continue;
            }
            let beats = if k < j { c < cut(k, j).0 } else { c > cut(j, k).0 };
            if beats {
                survive *= 1.0 - alphas[k];
            }
        }
        // A riskier partner blocks j below the cutoff (the strip leaves j's
        // market as x rises); a safer partner blocks above it (the strip
        // joins). Hence the sign.
        let sign = if i < j { -1.0 } else { 1.0 };
        total += sign * alphas[i] * survive * density * c_slope;
    }
    total
}

/// Exact field for an independent-inclusion consideration model with fixed
/// inclusion probabilities, over a linear menu path.
pub fn basic_arc_ntd_field(
    menu: LinearMenuMap,
    alphas: Vec<f64>,
    default_alt: usize,
    dist: RiskDistribution,
) -> Result<ChoiceProbabilityField> {
    if alphas.len() != menu.n_alternatives() {
        return Err(Error::InvalidConfig(
            "inclusion probabilities must match the menu path size".into(),
        ));
    }
    let mechanism = Consideration::Basic(BasicArc::new(alphas.clone(), default_alt)?);
    let model =
        ChoiceModel { family: UtilityFamily::Ntd, dist: dist.clone(), mechanism };
    let nu_bar = dist.nu_bar();
    let span = menu.x_support.1 - menu.x_support.0;
    let prob_menu = menu.clone();
    let prob: ProbFn = Box::new(move |x, j| {
        let ctx = prob_menu.context_at(x)?;
        model.choice_probability(&ctx, j, Kernel::Breakpoint)
    });
    let deriv_menu = menu.clone();
    let profile = AlphaProfile::Constant(alphas);
    let dprob: ProbFn =
        Box::new(move |x, j| Ok(arc_path_derivative(&deriv_menu, &profile, &dist, x, j)));
    ChoiceProbabilityField::assemble(menu, nu_bar, prob, Some(dprob), FD_STEP_SHARE * span)
}

/// Exact field for a two-type independent-inclusion population split at a
/// risk-aversion threshold, over a linear menu path.
pub fn binary_types_ntd_field(
    menu: LinearMenuMap,
    low: Vec<f64>,
    high: Vec<f64>,
    nu_star: f64,
    default_alt: usize,
    dist: RiskDistribution,
) -> Result<ChoiceProbabilityField> {
    if low.len() != menu.n_alternatives() {
        return Err(Error::InvalidConfig(
            "inclusion probabilities must match the menu path size".into(),
        ));
    }
    let mechanism = Consideration::BinaryTypes(BinaryTypes::new(
        low.clone(),
        high.clone(),
        default_alt,
        nu_star,
    )?);
    let model =
        ChoiceModel { family: UtilityFamily::Ntd, dist: dist.clone(), mechanism };
    let nu_bar = dist.nu_bar();
    let span = menu.x_support.1 - menu.x_support.0;
    let prob_menu = menu.clone();
    let prob: ProbFn = Box::new(move |x, j| {
        let ctx = prob_menu.context_at(x)?;
        model.choice_probability(&ctx, j, Kernel::Breakpoint)
    });
    let deriv_menu = menu.clone();
    let profile = AlphaProfile::Step { low, high, nu_star };
    let dprob: ProbFn =
        Box::new(move |x, j| Ok(arc_path_derivative(&deriv_menu, &profile, &dist, x, j)));
    ChoiceProbabilityField::assemble(menu, nu_bar, prob, Some(dprob), FD_STEP_SHARE * span)
}

/// Nadaraya–Watson smoothed field from observed `(x, choice)` samples along a
/// menu path, with a Gaussian kernel of the given bandwidth (path units).
///
/// Derivatives come from finite differences of the smoothed shares, so this
/// mode supports qualitative diagnostics (scans, audits, the shape of a
/// recovered density) rather than the tight tolerances of exact fields.
pub fn smoothed_field_from_samples(
    menu: LinearMenuMap,
    nu_bar: f64,
    xs: &[f64],
    choices: &[usize],
    bandwidth: f64,
) -> Result<ChoiceProbabilityField> {
    if xs.is_empty() || xs.len() != choices.len() {
        return Err(Error::DataValidation(
            "need matching, non-empty sample positions and choices".into(),
        ));
    }
    let n = menu.n_alternatives();
    if let Some(&bad) = choices.iter().find(|&&c| c >= n) {
        return Err(Error::DataValidation(format!(
            "sample chooses alternative {bad}, but the menu has {n}"
        )));
    }
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let xs = xs.to_vec();
    let choices = choices.to_vec();
    let prob: ProbFn = Box::new(move |x, j| {
        let mut num = 0.0;
        let mut den = 0.0;
        for (&xi, &ci) in xs.iter().zip(&choices) {
            let t = (x - xi) / bandwidth;
            let w = (-0.5 * t * t).exp();
            den += w;
            if ci == j {
                num += w;
            }
        }
        if den <= 0.0 {
            return Err(Error::Numeric(format!(
                "no effective sample mass near x = {x:.6e}; widen the bandwidth"
            )));
        }
        Ok(num / den)
    });
    // Stencil narrower than the bandwidth: differentiates the smooth
    // estimate rather than the sampling noise it has already averaged out.
    ChoiceProbabilityField::assemble(menu, nu_bar, prob, None, 0.5 * bandwidth)
}

// ---------------------------------------------------------------------------
// Sequential density recovery
// ---------------------------------------------------------------------------

/// Tuning knobs for [`recover_density_sequential`].
#[derive(Debug, Clone)]
pub struct RecoveryOptions {
    /// Nodes of the uniform recovery grid on `[0, nu_bar]`.
    pub grid_points: usize,
    /// Cap on backward-induction blocks before aborting.
    pub max_steps: usize,
    /// Probe count for the numeric precondition checks.
    pub probe_points: usize,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { grid_points: 400, max_steps: 10_000, probe_points: 201 }
    }
}

/// Output of [`recover_density_sequential`].
#[derive(Debug, Clone, Serialize)]
pub struct DensityRecovery {
    /// Uniform grid on `[0, nu_bar]`.
    pub grid: Vec<f64>,
    /// Recovered preference density on the grid (integrates to one).
    pub density: Vec<f64>,
    /// Recovered density scaled by `top_pair_mass` (the directly measurable
    /// object before normalization).
    pub unnormalized_density: Vec<f64>,
    /// Probability that the two riskiest alternatives are considered
    /// jointly: the integral of the unnormalized density.
    pub top_pair_mass: f64,
    /// Inclusion probability of the riskiest alternative, read off the
    /// plateau where it is everyone's first best.
    pub riskiest_alpha: f64,
    /// For each alternative `j >= 2`: the probability that `{0, j}` is
    /// considered with `1..j-1` all unconsidered, relative to
    /// `top_pair_mass`.
    pub relative_masses: Vec<f64>,
    /// Risk-aversion level at which the relative masses were measured.
    pub pairing_nu: Option<f64>,
    /// Backward-induction blocks walked by the recursion.
    pub induction_steps: usize,
    /// Human-readable record of every numeric precondition that was checked.
    pub preconditions: Vec<String>,
}

/// Recovers the preference density (up to the jointly-considered mass of the
/// two riskiest alternatives), the riskiest alternative's inclusion
/// probability, and the relative considered-together masses of the remaining
/// alternatives, from the share curves alone.
///
/// The construction reads the density near the top of its support where only
/// the first anchor cutoff is interior, measures each remaining
/// alternative's mass ratio at a common risk-aversion level (choosing path
/// positions where every other cutoff is clear of the support), then walks
/// the support downward in blocks, subtracting the already-recovered
/// contributions of the higher anchor cutoffs from the share derivative.
pub fn recover_density_sequential(
    field: &ChoiceProbabilityField,
    opts: &RecoveryOptions,
) -> Result<DensityRecovery> {
    let d = field.n_alternatives();
    let nu_bar = field.nu_bar();
    let (x_lo, x_hi) = field.x_support();
    if opts.grid_points < 16 {
        return Err(Error::InvalidConfig("recovery grid needs at least 16 nodes".into()));
    }
    if opts.probe_points < 8 {
        return Err(Error::InvalidConfig("precondition probing needs at least 8 points".into()));
    }
    let mut preconditions = Vec::new();

    // --- Precondition 1: the anchor cutoff rises along the path. ---
    let probes: Vec<f64> = (0..opts.probe_points)
        .map(|i| x_lo + (x_hi - x_lo) * i as f64 / (opts.probe_points - 1) as f64)
        .collect();
    let anchor_slope = field.dcutoff_dx(0.0, 0, 1);
    if anchor_slope <= 0.0 {
        return Err(Error::DataValidation(format!(
            "the anchor cutoff must be strictly increasing along the path; its slope is {anchor_slope:.6e}"
        )));
    }
    preconditions
        .push(format!("anchor cutoff strictly increasing (path slope {anchor_slope:.6e})"));

    // --- Precondition 2: it sweeps the entire preference support. ---
    let (c_lo, c_hi) = (field.cutoff_value(x_lo, 0, 1), field.cutoff_value(x_hi, 0, 1));
    if !(c_lo <= 0.0 && c_hi >= nu_bar) {
        return Err(Error::DataValidation(format!(
            "the anchor cutoff must sweep the full preference support: it covers \
             [{c_lo:.6e}, {c_hi:.6e}] but needs to reach both 0 and {nu_bar:.6e}"
        )));
    }
    preconditions.push(format!(
        "anchor cutoff sweeps the support: range [{c_lo:.4e}, {c_hi:.4e}] covers [0, {nu_bar:.4e}]"
    ));

    // --- Precondition 3: anchored cutoffs stay strictly ordered. ---
    for j in 2..d {
        let slope_j = field.dcutoff_dx(0.0, 0, j);
        if slope_j <= 0.0 {
            return Err(Error::DataValidation(format!(
                "anchored cutoff {j} must be strictly increasing along the path; its slope is {slope_j:.6e}"
            )));
        }
        for &x in &probes {
            let (lower, upper) = (field.cutoff_value(x, 0, j - 1), field.cutoff_value(x, 0, j));
            if upper <= lower {
                return Err(Error::DataValidation(format!(
                    "anchored cutoffs are not strictly ordered at x = {x:.6e}: \
                     c(0,{}) = {lower:.6e} >= c(0,{j}) = {upper:.6e}",
                    j - 1
                )));
            }
        }
    }
    if d > 2 {
        preconditions
            .push(format!("anchored cutoffs strictly ordered at all {} probes", probes.len()));
    }

    // --- Precondition 4: enough separation for the recursion grid. ---
    let cell = nu_bar / (opts.grid_points - 1) as f64;
    if d > 2 {
        let min_gap = probes
            .iter()
            .map(|&x| field.cutoff_value(x, 0, 2) - field.cutoff_value(x, 0, 1))
            .fold(f64::INFINITY, f64::min);
        if min_gap <= 2.0 * cell {
            return Err(Error::DataValidation(format!(
                "the gap between the first two anchored cutoffs (minimum {min_gap:.6e}) must \
                 exceed two recovery-grid cells ({:.6e}); the recursion cannot look up \
                 already-recovered values otherwise",
                2.0 * cell
            )));
        }
        preconditions.push(format!(
            "anchored-cutoff separation {min_gap:.4e} exceeds two grid cells ({:.4e})",
            2.0 * cell
        ));
    }

    // --- Precondition 5: shares behave like probabilities. ---
    field.validate_probes(9)?;
    preconditions.push("choice probabilities sum to one across probes".into());

    // --- Ratio measurements near the top of the support. ---
    let margin = if field.has_analytic_derivative() {
        1e-6 * nu_bar
    } else {
        let max_slope = (1..d)
            .map(|j| field.dcutoff_dx(0.0, 0, j).abs())
            .fold(0.0f64, f64::max)
            .max(anchor_slope.abs());
        3.0 * field.fd_step() * max_slope + 1e-6 * nu_bar
    };
    // Lowest level at which the density can be read directly: above it, every
    // higher anchor cutoff must already sit beyond the support.
    let window_lo = if d == 2 {
        0.0
    } else if field.cutoff_value(x_lo, 0, 2) >= nu_bar + margin {
        0.0
    } else {
        let x_exit = field.x_at_anchor_cutoff(2, nu_bar + margin)?;
        field.cutoff_value(x_exit, 0, 1).max(0.0)
    };
    if window_lo >= nu_bar {
        return Err(Error::DataValidation(
            "no part of the support has the higher anchored cutoffs clear of it; the density \
             cannot be read anywhere directly"
                .into(),
        ));
    }

    let density_reading = |nu: f64| -> Result<f64> {
        let x = field.x_at_anchor_cutoff(1, nu)?;
        Ok(field.dprob_dx(x, 0)? / field.dcutoff_dx(x, 0, 1))
    };

    let mut pairing_nu = None;
    let mut relative_masses = vec![0.0; d.saturating_sub(2)];
    if d > 2 {
        let mut best: Option<(f64, f64, Vec<f64>)> = None; // (|reading|, nu, per-j x)
        'candidates: for t in [0.98, 0.93, 0.88, 0.8, 0.7, 0.6, 0.5] {
            let nu_c = window_lo + t * (nu_bar - window_lo);
            if nu_c <= 0.0 || nu_c >= nu_bar {
                continue;
            }
            // The direct reading needs every higher anchor cutoff beyond the
            // support at the anchor position.
            let x0 = field.x_at_anchor_cutoff(1, nu_c)?;
            for m in 2..d {
                if field.cutoff_value(x0, 0, m) <= nu_bar + margin {
                    continue 'candidates;
                }
            }
            // Each pairing position must isolate the (0, j) cutoff: every
            // other pair involving j has to be clear of the support there.
            let mut xs = Vec::with_capacity(d - 2);
            for j in 2..d {
                let xj = match field.x_at_anchor_cutoff(j, nu_c) {
                    Ok(x) => x,
                    Err(_) => continue 'candidates,
                };
                for k in 1..d {
                    if k == j {
                        continue;
                    }
                    let (a, b) = if k < j { (k, j) } else { (j, k) };
                    let c = field.cutoff_value(xj, a, b);
                    if (-margin..=nu_bar + margin).contains(&c) {
                        continue 'candidates;
                    }
                }
                xs.push(xj);
            }
            let reading = density_reading(nu_c)?;
            if best.as_ref().is_none_or(|(r, _, _)| reading.abs() > *r) {
                best = Some((reading.abs(), nu_c, xs));
            }
        }
        let (reading_abs, nu_c, xs) = best.ok_or_else(|| {
            Error::DataValidation(
                "no risk-aversion level near the top of the support isolates every anchored \
                 cutoff; the mass ratios cannot be measured on this path"
                    .into(),
            )
        })?;
        if reading_abs < 1e-14 {
            return Err(Error::Numeric(
                "the preference density is numerically zero everywhere the mass ratios could \
                 be measured; nothing to normalize against"
                    .into(),
            ));
        }
        let base = density_reading(nu_c)?;
        for (j, &xj) in (2..d).zip(&xs) {
            let slope_j = field.dprob_dx(xj, j)?;
            relative_masses[j - 2] = -slope_j / field.dcutoff_dx(xj, 0, j) / base;
        }
        pairing_nu = Some(nu_c);
        preconditions.push(format!(
            "mass ratios measured at nu = {nu_c:.6e} with all partner cutoffs clear of the \
             support by more than {margin:.2e}"
        ));
    }

    // --- Backward induction over the support. ---
    let g = opts.grid_points;
    let grid: Vec<f64> = (0..g).map(|i| nu_bar * i as f64 / (g - 1) as f64).collect();
    let mut unnorm = vec![f64::NAN; g];
    let mut idx = g as isize - 1;
    let mut blocks = 0usize;
    let mut nu_top = nu_bar;
    let analytic = field.has_analytic_derivative();
    while idx >= 0 {
        blocks += 1;
        if blocks > opts.max_steps {
            return Err(Error::NonConvergence(format!(
                "density recursion exceeded {} induction blocks",
                opts.max_steps
            )));
        }
        let nu_bot = if d == 2 || field.cutoff_value(x_lo, 0, 2) >= nu_top {
            0.0
        } else {
            let x_star = field.x_at_anchor_cutoff(2, nu_top)?;
            field.cutoff_value(x_star, 0, 1).max(0.0)
        };
        if nu_bot > 0.0 && nu_top - nu_bot <= 1e-9 * nu_bar {
            return Err(Error::Numeric(format!(
                "density recursion stalled at nu = {nu_top:.6e}: the next block boundary \
                 {nu_bot:.6e} is not meaningfully lower, so the anchor cutoff cannot catch \
                 up with the one above it"
            )));
        }
        while idx >= 0 && grid[idx as usize] >= nu_bot {
            let i = idx as usize;
            let nu = grid[i];
            let x = field.x_at_anchor_cutoff(1, nu)?;
            // At the support edges the share derivative jumps; finite
            // differences must stay on the interior side (the closed form
            // already evaluates as the interior limit).
            let side = if analytic {
                DerivSide::Central
            } else if i + 1 == g {
                DerivSide::Below
            } else if i == 0 {
                DerivSide::Above
            } else {
                DerivSide::Central
            };
            let mut value = field.dprob_limit(x, 0, side)?;
            for m in 2..d {
                let c = field.cutoff_value(x, 0, m);
                if c < nu_bar {
                    let fh = lookup_filled(&grid, &unnorm, c, nu_bar)?;
                    value -= relative_masses[m - 2] * fh * field.dcutoff_dx(x, 0, m);
                }
            }
            unnorm[i] = value / field.dcutoff_dx(x, 0, 1);
            idx -= 1;
        }
        nu_top = nu_bot;
    }

    let top_pair_mass = integrate_uniform(&unnorm, cell);
    if !(top_pair_mass.is_finite() && top_pair_mass > 0.0) {
        return Err(Error::Numeric(format!(
            "recovered unnormalized density integrates to {top_pair_mass}; expected a positive mass"
        )));
    }
    let density: Vec<f64> = unnorm.iter().map(|&v| v / top_pair_mass).collect();

    // --- Riskiest alternative's inclusion probability from its plateau. ---
    let x_exit = field.x_at_anchor_cutoff(1, nu_bar)?;
    let x_plateau = if x_exit < x_hi { x_exit + 0.25 * (x_hi - x_exit) } else { x_hi };
    let riskiest_alpha = field.prob(x_plateau, 0)?;
    preconditions.push(format!(
        "riskiest alternative's share read on its plateau at x = {x_plateau:.6e}"
    ));

    Ok(DensityRecovery {
        grid,
        density,
        unnormalized_density: unnorm,
        top_pair_mass,
        riskiest_alpha,
        relative_masses,
        pairing_nu,
        induction_steps: blocks,
        preconditions,
    })
}

/// Linear interpolation into the partially recovered grid; zero beyond the
/// support top, error if the recursion consults a region not yet recovered.
fn lookup_filled(grid: &[f64], values: &[f64], c: f64, nu_bar: f64) -> Result<f64> {
    if c >= nu_bar {
        return Ok(0.0);
    }
    if c <= 0.0 {
        return Ok(0.0);
    }
    let g1 = grid.len() - 1;
    let pos = c / nu_bar * g1 as f64;
    let i0 = (pos.floor() as usize).min(g1 - 1);
    let t = pos - i0 as f64;
    let (a, b) = (values[i0], values[i0 + 1]);
    if a.is_nan() || b.is_nan() {
        return Err(Error::Numeric(format!(
            "density recursion consulted an unrecovered region at nu = {c:.6e}"
        )));
    }
    Ok(a + t * (b - a))
}

/// Composite integral of uniformly spaced samples: Simpson's rule, with a
/// 3/8 block absorbing an odd interval count.
fn integrate_uniform(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let intervals = n - 1;
            let (simpson_end, tail38) =
                if intervals % 2 == 0 { (n - 1, false) } else { (n - 4, true) };
            let mut total = 0.0;
            if simpson_end > 0 {
                let mut s = values[0] + values[simpson_end];
                for (i, &v) in values.iter().enumerate().take(simpson_end).skip(1) {
                    s += v * if i % 2 == 1 { 4.0 } else { 2.0 };
                }
                total += s * h / 3.0;
            }
            if tail38 {
                let b = n - 4;
                total += 3.0 * h / 8.0
                    * (values[b] + 3.0 * values[b + 1] + 3.0 * values[b + 2] + values[b + 3]);
            }
            total
        }
    }
}

// ---------------------------------------------------------------------------
// Consideration-probability recovery
// ---------------------------------------------------------------------------

/// Output of [`recover_arc_parameters`].
#[derive(Debug, Clone, Serialize)]
pub struct ArcRecovery {
    /// Recovered inclusion probabilities, indexed like the menu. Flagged
    /// alternatives (zero measured mass) report zero.
    pub alphas: Vec<f64>,
    /// Alternatives whose inclusion probability is not identified because
    /// their measured mass is zero.
    pub unidentified: Vec<usize>,
    /// Damped fixed-point sweeps used.
    pub iterations: usize,
    /// Largest residual of the mass equations at the solution.
    pub max_residual: f64,
}

/// Solves the recovered joint-consideration masses for the per-alternative
/// inclusion probabilities of an independent-inclusion model.
///
/// The mass of alternative `j` (considered with the riskiest while everything
/// between goes unconsidered) is `a_0 * a_j * prod_{0<k<j} (1 - a_k)`; with
/// `a_0` read from its plateau, the system is solved by a damped fixed point
/// on the remaining probabilities. Alternatives with zero measured mass are
/// reported as unidentified and set to zero.
pub fn recover_arc_parameters(recovery: &DensityRecovery) -> Result<ArcRecovery> {
    let d = recovery.relative_masses.len() + 2;
    let a0 = recovery.riskiest_alpha;
    if !(a0.is_finite() && a0 > 0.0 && a0 <= 1.0 + 1e-6) {
        return Err(Error::Numeric(format!(
            "riskiest alternative's inclusion probability must lie in (0, 1]; measured {a0}"
        )));
    }
    let a0 = a0.min(1.0);
    if !(recovery.top_pair_mass > 0.0) {
        return Err(Error::Numeric(format!(
            "joint mass of the two riskiest alternatives must be positive; measured {}",
            recovery.top_pair_mass
        )));
    }

    // Target masses divided by a0: t_i = a_i * prod_{0<k<i} (1 - a_k).
    let mut targets = Vec::with_capacity(d - 1);
    targets.push(recovery.top_pair_mass / a0);
    for &ratio in &recovery.relative_masses {
        targets.push(ratio * recovery.top_pair_mass / a0);
    }
    const ZERO_MASS: f64 = 1e-10;
    let identified: Vec<bool> = targets.iter().map(|&t| t > ZERO_MASS).collect();
    let unidentified: Vec<usize> = identified
        .iter()
        .enumerate()
        .filter_map(|(i, ok)| (!ok).then_some(i + 1))
        .collect();

    let mut alphas: Vec<f64> = targets
        .iter()
        .zip(&identified)
        .map(|(&t, &ok)| if ok { t.clamp(1e-9, 0.999_999) } else { 0.0 })
        .collect();
    let mut iterations = 0;
    let mut max_residual = f64::INFINITY;
    const TOL: f64 = 1e-12;
    const DAMPING: f64 = 0.5;
    for sweep in 1..=10_000 {
        iterations = sweep;
        max_residual = 0.0;
        let mut prefix = 1.0;
        for i in 0..(d - 1) {
            if identified[i] {
                if prefix <= 0.0 {
                    return Err(Error::Numeric(format!(
                        "inclusion probabilities upstream of alternative {} absorb all \
                         consideration mass; its probability is not recoverable",
                        i + 1
                    )));
                }
                let proposed = (targets[i] / prefix).min(1.0);
                let updated = alphas[i] + DAMPING * (proposed - alphas[i]);
                alphas[i] = updated.clamp(1e-12, 1.0);
                max_residual = max_residual.max((alphas[i] * prefix - targets[i]).abs());
            }
            prefix *= 1.0 - alphas[i];
        }
        if max_residual <= TOL {
            break;
        }
    }
    if max_residual > TOL {
        // Re-derive per-alternative residuals for the diagnostic.
        let mut report = String::new();
        let mut prefix = 1.0;
        for i in 0..(d - 1) {
            if identified[i] {
                let r = alphas[i] * prefix - targets[i];
                report.push_str(&format!(" alt {}: residual {r:.3e};", i + 1));
            }
            prefix *= 1.0 - alphas[i];
        }
        return Err(Error::NonConvergence(format!(
            "inclusion-probability fixed point stalled after {iterations} sweeps \
             (max residual {max_residual:.3e}):{report}"
        )));
    }
    // Consistency: a target only reachable with a probability above one means
    // the measured masses are incompatible with independent inclusion.
    let mut prefix = 1.0;
    for i in 0..(d - 1) {
        if identified[i] && targets[i] > prefix * (1.0 + 1e-6) {
            return Err(Error::Numeric(format!(
                "measured mass for alternative {} implies an inclusion probability above one",
                i + 1
            )));
        }
        prefix *= 1.0 - alphas[i];
    }

    let mut full = Vec::with_capacity(d);
    full.push(a0);
    full.extend(alphas);
    Ok(ArcRecovery { alphas: full, unidentified, iterations, max_residual })
}

// ---------------------------------------------------------------------------
// Limited-consideration test
// ---------------------------------------------------------------------------

/// Verdict of [`limited_consideration_test`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum TestVerdict {
    /// The two aggregated shares differ: no full-consideration model with
    /// any preference distribution can produce these curves.
    LimitedConsideration { gap: f64 },
    /// The shares agree within tolerance; the test has no objection to full
    /// consideration.
    ConsistentWithFullConsideration { gap: f64 },
    /// The menu pair does not satisfy the test's first-best conditions, so
    /// the comparison is uninformative.
    Inapplicable { reason: String },
}

/// Tests full consideration against two path positions and two alternative
/// sets that partition preferences at the same threshold.
///
/// Requirements, verified numerically on a probe grid: below `nu_star` the
/// first best at `x` lies in `set_l` and at `x_prime` in `set_l_prime`;
/// above it, the first best leaves the respective set. Under full
/// consideration both aggregated shares then equal the population mass below
/// `nu_star`, so a gap larger than `tol` rejects full consideration for
/// every preference distribution at once.
#[allow(clippy::too_many_arguments)]
pub fn limited_consideration_test(
    field: &ChoiceProbabilityField,
    x: f64,
    x_prime: f64,
    set_l: &[usize],
    set_l_prime: &[usize],
    nu_star: f64,
    tol: f64,
    probes: usize,
) -> Result<TestVerdict> {
    let d = field.n_alternatives();
    let nu_bar = field.nu_bar();
    if !(nu_star > 0.0 && nu_star < nu_bar) {
        return Err(Error::InvalidConfig(format!(
            "threshold must lie strictly inside the preference support, got {nu_star}"
        )));
    }
    if probes < 3 {
        return Err(Error::InvalidConfig("need at least three probes per side".into()));
    }
    let membership = |set: &[usize]| -> Result<Vec<bool>> {
        if set.is_empty() || set.len() >= d {
            return Err(Error::InvalidConfig(
                "alternative sets must be non-empty, proper subsets of the menu".into(),
            ));
        }
        let mut m = vec![false; d];
        for &j in set {
            if j >= d {
                return Err(Error::InvalidConfig(format!("alternative index {j} out of range")));
            }
            if m[j] {
                return Err(Error::InvalidConfig(format!("alternative {j} listed twice")));
            }
            m[j] = true;
        }
        Ok(m)
    };
    let in_l = membership(set_l)?;
    let in_lp = membership(set_l_prime)?;

    for (pos, members, label) in [(x, &in_l, "first"), (x_prime, &in_lp, "second")] {
        for i in 0..probes {
            let below = nu_star * (i as f64 + 0.5) / probes as f64;
            let fb = field.first_best_at(pos, below)?;
            if !members[fb] {
                return Ok(TestVerdict::Inapplicable {
                    reason: format!(
                        "at the {label} position the first best below the threshold \
                         (alternative {fb} at nu = {below:.6e}) lies outside the set"
                    ),
                });
            }
            let above = nu_star + (nu_bar - nu_star) * (i as f64 + 0.5) / probes as f64;
            let fb = field.first_best_at(pos, above)?;
            if members[fb] {
                return Ok(TestVerdict::Inapplicable {
                    reason: format!(
                        "at the {label} position the first best above the threshold \
                         (alternative {fb} at nu = {above:.6e}) stays inside the set"
                    ),
                });
            }
        }
    }

    let mass = |pos: f64, members: &[bool]| -> Result<f64> {
        let mut total = 0.0;
        for (j, &is_in) in members.iter().enumerate() {
            if is_in {
                total += field.prob(pos, j)?;
            }
        }
        Ok(total)
    };
    let gap = (mass(x, &in_l)? - mass(x_prime, &in_lp)?).abs();
    if gap > tol {
        Ok(TestVerdict::LimitedConsideration { gap })
    } else {
        Ok(TestVerdict::ConsistentWithFullConsideration { gap })
    }
}

// ---------------------------------------------------------------------------
// Two-type breakpoint scan
// ---------------------------------------------------------------------------

/// Tuning knobs for [`binary_type_breakpoint_scan`].
#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// Nodes of the scan grid over the interior of the support.
    pub grid_points: usize,
    /// A jump must exceed this multiple of the median grid-to-grid change to
    /// count as a discontinuity.
    pub jump_factor: f64,
    /// Bisection refinements of the detected jump location.
    pub refine_iters: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { grid_points: 801, jump_factor: 25.0, refine_iters: 60 }
    }
}

/// Outcome of [`binary_type_breakpoint_scan`].
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum BreakpointScan {
    /// The density reading varies smoothly: no detectable two-type split,
    /// reported with the largest jump-to-background ratio seen.
    NotDetected { max_jump_ratio: f64 },
    /// A discontinuity in the density reading, with everything the jump
    /// identifies: the threshold, the below/above ratio of the riskiest
    /// alternative's inclusion probability, the population share below the
    /// threshold, and the two inclusion probabilities themselves.
    Detected {
        nu_star: f64,
        derivative_ratio: f64,
        cdf_at_break: f64,
        alpha_low: f64,
        alpha_high: f64,
    },
}

/// Scans the density reading `dPr(0|x)/dx / c'(x)` along the anchor cutoff
/// for a discontinuity, the signature of a population whose riskiest-
/// alternative inclusion probability switches at a risk-aversion threshold.
///
/// A detected jump is refined by bisection; one-sided limits of the reading
/// give the inclusion-probability ratio, and two share levels (at the jump
/// and at the point where the anchor cutoff exits the support) disentangle
/// the population split from the two probabilities. Two-type populations
/// whose profiles differ only at alternatives whose cutoffs sit outside the
/// support leave the reading smooth and are correctly not detected.
pub fn binary_type_breakpoint_scan(
    field: &ChoiceProbabilityField,
    opts: &ScanOptions,
) -> Result<BreakpointScan> {
    let nu_bar = field.nu_bar();
    let (x_lo, x_hi) = field.x_support();
    if opts.grid_points < 32 {
        return Err(Error::InvalidConfig("scan grid needs at least 32 nodes".into()));
    }
    let anchor_slope = field.dcutoff_dx(0.0, 0, 1);
    if anchor_slope <= 0.0 {
        return Err(Error::DataValidation(
            "the anchor cutoff must be strictly increasing along the path to scan it".into(),
        ));
    }
    let (c_lo, c_hi) = (field.cutoff_value(x_lo, 0, 1), field.cutoff_value(x_hi, 0, 1));
    if !(c_lo <= 0.0 && c_hi >= nu_bar) {
        return Err(Error::DataValidation(format!(
            "the anchor cutoff must sweep the full preference support to scan it; it covers \
             [{c_lo:.6e}, {c_hi:.6e}]"
        )));
    }

    let reading = |nu: f64| -> Result<f64> {
        let x = field.x_at_anchor_cutoff(1, nu)?;
        Ok(field.dprob_dx(x, 0)? / field.dcutoff_dx(x, 0, 1))
    };

    // Interior window: the support edges are genuine kinks of the share
    // curves and would masquerade as jumps.
    let (w_lo, w_hi) = (0.02 * nu_bar, 0.98 * nu_bar);
    let g = opts.grid_points;
    let mut values = Vec::with_capacity(g);
    let mut nodes = Vec::with_capacity(g);
    for i in 0..g {
        let nu = w_lo + (w_hi - w_lo) * i as f64 / (g - 1) as f64;
        nodes.push(nu);
        values.push(reading(nu)?);
    }
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let (mut max_diff, mut max_at) = (0.0, 0);
    for (i, &dv) in diffs.iter().enumerate() {
        if dv > max_diff {
            max_diff = dv;
            max_at = i;
        }
    }
    diffs.sort_by(|a, b| a.partial_cmp(b).expect("finite differences"));
    let background = crate::numeric::percentile_sorted(&diffs, 0.5) + 1e-14 * scale.max(1e-300);
    let ratio = max_diff / background;
    if ratio < opts.jump_factor {
        return Ok(BreakpointScan::NotDetected { max_jump_ratio: ratio });
    }

    // Refine the jump bracket: keep whichever half contains the larger move.
    let (mut lo, mut hi) = (nodes[max_at], nodes[max_at + 1]);
    let (mut f_lo, mut f_hi) = (values[max_at], values[max_at + 1]);
    for _ in 0..opts.refine_iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = reading(mid)?;
        if (f_mid - f_lo).abs() >= (f_hi - f_mid).abs() {
            hi = mid;
            f_hi = f_mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    let nu_star = 0.5 * (lo + hi);

    // One-sided limits of the reading at the detected threshold.
    let delta0 = if field.has_analytic_derivative() {
        1e-6 * nu_bar
    } else {
        25.0 * field.fd_step() * anchor_slope.abs()
    };
    let side_limit = |sign: f64| -> Result<f64> {
        let mut hs = Vec::with_capacity(DERIV_LEVELS);
        let mut vs = Vec::with_capacity(DERIV_LEVELS);
        for k in 0..DERIV_LEVELS {
            let h = delta0 / 2f64.powi(k as i32);
            hs.push(h);
            vs.push(reading(nu_star + sign * h)?);
        }
        Ok(extrapolate_to_zero(&hs, &vs))
    };
    let g_left = side_limit(-1.0)?;
    let g_right = side_limit(1.0)?;
    let floor = 1e-12 * scale.max(1e-300);
    if g_left.abs() <= floor || g_right.abs() <= floor {
        return Err(Error::Numeric(format!(
            "the density reading vanishes on one side of the detected threshold \
             (left {g_left:.3e}, right {g_right:.3e}); the type ratio is not measurable there"
        )));
    }
    let derivative_ratio = g_left / g_right;

    // Share levels: at the threshold and where the cutoff exits the support.
    let x_star = field.x_at_anchor_cutoff(1, nu_star)?;
    let x_exit = field.x_at_anchor_cutoff(1, nu_bar)?;
    let share_star = field.prob(x_star, 0)?;
    let share_exit = field.prob(x_exit, 0)?;
    let above = share_exit - share_star;
    if above <= 0.0 {
        return Err(Error::Numeric(format!(
            "the riskiest alternative's share does not grow past the threshold \
             ({share_star:.6e} -> {share_exit:.6e}); the split is not measurable"
        )));
    }
    // share_star = alpha_low F, above = alpha_high (1 - F), and the limits
    // give alpha_low / alpha_high; solve for F.
    let odds = share_star / above / derivative_ratio;
    let cdf_at_break = odds / (1.0 + odds);
    if !(cdf_at_break > 0.0 && cdf_at_break < 1.0) {
        return Err(Error::Numeric(format!(
            "implied population share below the threshold is {cdf_at_break}; must be in (0, 1)"
        )));
    }
    let alpha_low = share_star / cdf_at_break;
    let alpha_high = above / (1.0 - cdf_at_break);
    Ok(BreakpointScan::Detected { nu_star, derivative_ratio, cdf_at_break, alpha_low, alpha_high })
}

// ---------------------------------------------------------------------------
// Dominance and monotonicity audits
// ---------------------------------------------------------------------------

/// A model under audit: either a consideration model evaluated through a
/// kernel, or a mixed logit mixing the same preference families over an
/// additive choice shock.
pub enum AuditModel {
    Consideration { model: ChoiceModel, kernel: Kernel },
    MixedLogit { family: UtilityFamily, dist: RiskDistribution, sigma: f64, order: usize },
}

impl AuditModel {
    fn family(&self) -> &UtilityFamily {
        match self {
            Self::Consideration { model, .. } => &model.family,
            Self::MixedLogit { family, .. } => family,
        }
    }

    fn nu_bar(&self) -> f64 {
        match self {
            Self::Consideration { model, .. } => model.dist.nu_bar(),
            Self::MixedLogit { dist, .. } => dist.nu_bar(),
        }
    }

    fn probabilities(&self, ctx: &HouseholdContext) -> Result<Vec<f64>> {
        match self {
            Self::Consideration { model, kernel } => model.choice_probabilities(ctx, *kernel),
            Self::MixedLogit { family, dist, sigma, order } => (0..ctx.n_alternatives())
                .map(|j| mixed_logit_choice_prob(family, dist, ctx, j, *sigma, *order))
                .collect(),
        }
    }

    fn conditional(&self, ctx: &HouseholdContext, j: usize, nu: f64) -> Result<f64> {
        match self {
            Self::Consideration { model, .. } => {
                conditional_choice_probability(&model.family, &model.mechanism, ctx, j, nu)
            }
            Self::MixedLogit { family, sigma, .. } => {
                mixed_logit_conditional(family, ctx, j, nu, *sigma)
            }
        }
    }
}

/// A choice pattern incompatible with ranking-based choice from full menus:
/// an alternative that is never anyone's first best within a small set is
/// chosen at least as often as the rest of the set combined.
#[derive(Debug, Clone, Serialize)]
pub struct DominanceWitness {
    pub context: usize,
    pub alternative: usize,
    pub cover: Vec<usize>,
    pub chosen_prob: f64,
    pub cover_prob: f64,
}

/// A violation of conditional preference monotonicity: the cumulative
/// probability of the riskiest alternatives rising in risk aversion.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityWitness {
    pub context: usize,
    /// Cumulative block `0..=cumulative_through`.
    pub cumulative_through: usize,
    pub nu_lower: f64,
    pub nu_upper: f64,
    pub prob_lower: f64,
    pub prob_upper: f64,
}

/// Outcome of [`dominance_and_monotonicity_audit`].
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub contexts: usize,
    pub dominance_checks: usize,
    pub dominance_violations: Vec<DominanceWitness>,
    pub monotonicity_checks: usize,
    pub monotonicity_violations: Vec<MonotonicityWitness>,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.dominance_violations.is_empty() && self.monotonicity_violations.is_empty()
    }
}

/// Audits a model against two behavioral properties of full-menu,
/// ranking-based choice.
///
/// Dominance: for every pair and triple of alternatives, a member that is
/// never the first best within that set (for any supported risk aversion)
/// must be chosen strictly less often than the rest of the set combined.
/// Monotonicity: conditional on risk aversion, the cumulative choice
/// probability of the `J` riskiest alternatives must be non-increasing in
/// risk aversion, for every `J`. Mixed logit satisfies the first and can
/// violate the second; consideration models with preference-independent
/// menus satisfy the second and can violate the first. Menus with fewer than
/// three alternatives make the dominance audit vacuous.
pub fn dominance_and_monotonicity_audit(
    model: &AuditModel,
    contexts: &[HouseholdContext],
    nu_grid_points: usize,
    tol: f64,
) -> Result<AuditReport> {
    if nu_grid_points < 2 {
        return Err(Error::InvalidConfig("monotonicity grid needs at least two points".into()));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be non-negative, got {tol}")));
    }
    let parts: Result<Vec<_>> = contexts
        .par_iter()
        .enumerate()
        .map(|(ci, ctx)| audit_one_context(model, ci, ctx, nu_grid_points, tol))
        .collect();
    let mut report = AuditReport {
        contexts: contexts.len(),
        dominance_checks: 0,
        dominance_violations: Vec::new(),
        monotonicity_checks: 0,
        monotonicity_violations: Vec::new(),
    };
    for part in parts? {
        report.dominance_checks += part.0;
        report.dominance_violations.extend(part.1);
        report.monotonicity_checks += part.2;
        report.monotonicity_violations.extend(part.3);
    }
    Ok(report)
}

type ContextAudit = (usize, Vec<DominanceWitness>, usize, Vec<MonotonicityWitness>);

fn audit_one_context(
    model: &AuditModel,
    ci: usize,
    ctx: &HouseholdContext,
    nu_grid_points: usize,
    tol: f64,
) -> Result<ContextAudit> {
    let d = ctx.n_alternatives();
    let family = model.family();
    let nu_bar = model.nu_bar();
    let probs = model.probabilities(ctx)?;

    let mut dom_checks = 0usize;
    let mut dom_viol = Vec::new();
    for size in [2usize, 3] {
        if d < size {
            continue;
        }
        for combo in (0..d).combinations(size) {
            let sub = HouseholdContext {
                alternatives: combo.iter().map(|&i| ctx.alternatives[i].clone()).collect(),
                demographics: ctx.demographics.clone(),
                pbar: ctx.pbar,
            };
            let matrix = CutoffMatrix::compute(family, &sub, nu_bar)?;
            // Who is first best somewhere strictly inside the support?
            let mut seen = vec![false; size];
            for &(lo, hi, idx) in &matrix.first_best_panels {
                if hi > 1e-12 * nu_bar && lo < nu_bar * (1.0 - 1e-12) {
                    seen[idx] = true;
                }
            }
            for (s, &orig) in combo.iter().enumerate() {
                if seen[s] {
                    continue;
                }
                dom_checks += 1;
                let cover: Vec<usize> = combo.iter().copied().filter(|&o| o != orig).collect();
                let cover_prob: f64 = cover.iter().map(|&o| probs[o]).sum();
                if probs[orig] > cover_prob + tol {
                    dom_viol.push(DominanceWitness {
                        context: ci,
                        alternative: orig,
                        cover,
                        chosen_prob: probs[orig],
                        cover_prob,
                    });
                }
            }
        }
    }

    let mut mono_checks = 0usize;
    let mut mono_viol = Vec::new();
    let step = nu_bar / nu_grid_points as f64;
    for top in 0..d.saturating_sub(1) {
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..nu_grid_points {
            let nu = (i as f64 + 0.5) * step;
            let mut cumulative = 0.0;
            for j in 0..=top {
                cumulative += model.conditional(ctx, j, nu)?;
            }
            if let Some((prev_nu, prev_prob)) = prev {
                mono_checks += 1;
                if cumulative > prev_prob + tol {
                    mono_viol.push(MonotonicityWitness {
                        context: ci,
                        cumulative_through: top,
                        nu_lower: prev_nu,
                        nu_upper: nu,
                        prob_lower: prev_prob,
                        prob_upper: cumulative,
                    });
                }
            }
            prev = Some((nu, cumulative));
        }
    }
    Ok((dom_checks, dom_viol, mono_checks, mono_viol))
}

// ---------------------------------------------------------------------------
