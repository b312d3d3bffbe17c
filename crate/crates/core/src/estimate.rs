//! Maximum-likelihood fitting of choice models.
//!
//! Parameters are optimized on an unconstrained scale (logit for inclusion
//! probabilities, log for positive quantities) with a multi-start
//! Nelder-Mead simplex. Also provides never-chosen-alternative pruning,
//! default-alternative selection, non-nested model comparison, and
//! household-resampling bootstrap confidence intervals.

use crate::choice::{
    log_likelihood_prepared, mixed_logit_choice_prob, prepare_households, Kernel, LogLikelihood,
    DEFAULT_MIXED_LOGIT_ORDER,
};
use crate::consider::{AltSpecificArc, AltSpecificCoef, BasicArc, Consideration, ProportionalArc};
use crate::context::HouseholdContext;
use crate::data::Observation;
use crate::dist::RiskDistribution;
use crate::error::{Error, Result};
use crate::numeric::{logistic, pairwise_mean, pairwise_sum, percentile_sorted, population_sd};
use crate::optim::{nelder_mead, NelderMeadOptions, NelderMeadResult};
use crate::utility::UtilityFamily;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Bijection between a parameter's natural scale and the unconstrained
/// scale the optimizer works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    /// (0, 1) <-> R via log-odds.
    Logit,
    /// (0, inf) <-> R via log.
    Log,
    /// Unrestricted.
    Identity,
}

impl Transform {
    pub fn unconstrain(self, v: f64) -> f64 {
        match self {
            Transform::Logit => v.ln() - (1.0 - v).ln(),
            Transform::Log => v.ln(),
            Transform::Identity => v,
        }
    }

    pub fn constrain(self, u: f64) -> f64 {
        match self {
            Transform::Logit => logistic(u),
            Transform::Log => u.exp(),
            Transform::Identity => u,
        }
    }
}

/// Which model to fit. Every variant estimates the two shape parameters of
/// the scaled-Beta risk-aversion distribution alongside its own parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum FitModel {
    /// Constant inclusion probability per alternative.
    Basic { default_alt: Option<usize> },
    /// Inclusion probabilities shifted toward or away from the default by a
    /// demographic index that decays in risk aversion.
    Proportional { default_alt: Option<usize> },
    /// Inclusion probabilities driven by premium and risk aversion.
    AltSpecific { default_alt: Option<usize> },
    /// Full-consideration benchmark with extreme-value taste shocks.
    MixedLogit,
}

/// Settings shared by every fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    /// Upper bound of the risk-aversion support.
    pub nu_bar: f64,
    pub kernel: Kernel,
    /// Number of independent optimizer starts (the first uses neutral
    /// initial values, the rest are seeded perturbations).
    pub starts: usize,
    pub seed: u64,
    /// Drop never-chosen alternatives from the menus before fitting.
    pub prune: bool,
    pub optimizer: NelderMeadOptions,
    /// Quadrature order for the mixed-logit integral.
    pub mixed_logit_order: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            nu_bar: 0.02,
            kernel: Kernel::Breakpoint,
            starts: 8,
            seed: 0,
            prune: true,
            optimizer: NelderMeadOptions::default(),
            mixed_logit_order: DEFAULT_MIXED_LOGIT_ORDER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedParameter {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInterval {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// A completed fit. `parameters` reports every model quantity on the
/// original menu indexing (1-based names), including values held fixed:
/// the default alternative's inclusion probability (1) and pruned
/// alternatives' (0). `free_names` lists the subset that was estimated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationResult {
    pub parameters: Vec<NamedParameter>,
    pub free_names: Vec<String>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_households: usize,
    pub n_free_parameters: usize,
    /// False when no optimizer start met the tolerance within its iteration
    /// budget; the best point found is still reported.
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub best_start: usize,
    pub start_log_likelihoods: Vec<f64>,
    /// Original indices of alternatives removed because nobody chose them.
    pub pruned_alternatives: Vec<usize>,
    /// Original index of the always-considered alternative (none for the
    /// mixed-logit benchmark).
    pub default_alternative: Option<usize>,
    pub kernel: Kernel,
    pub seed: u64,
    /// Per-household log-probabilities at the optimum, in dataset order
    /// (input to model-comparison tests).
    pub per_household_loglik: Vec<f64>,
    /// Households assigned zero probability at the optimum.
    pub zero_probability_households: Vec<usize>,
    /// Filled in by the bootstrap, when run.
    pub confidence_intervals: Option<Vec<ParameterInterval>>,
}

impl EstimationResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.value)
    }
}

/// Outcome of dropping never-chosen alternatives. `kept` and `pruned` hold
/// original menu indices; observations are rewritten on the reduced menu
/// with choices remapped.
#[derive(Debug, Clone)]
pub struct PrunedData {
    pub observations: Vec<Observation>,
    pub kept: Vec<usize>,
    pub pruned: Vec<usize>,
}

fn common_menu_size(data: &[Observation]) -> Result<usize> {
    let Some(first) = data.first() else {
        return Err(Error::DataValidation("empty dataset".into()));
    };
    let d = first.context.n_alternatives();
    for (i, obs) in data.iter().enumerate() {
        if obs.context.n_alternatives() != d {
            return Err(Error::DataValidation(format!(
                "household {i} has {} alternatives but the first has {d}; menus must share a size",
                obs.context.n_alternatives()
            )));
        }
    }
    Ok(d)
}

fn prune_impl(data: &[Observation], force_keep: Option<usize>) -> Result<PrunedData> {
    let d = common_menu_size(data)?;
    if let Some(k) = force_keep {
        if k >= d {
            return Err(Error::InvalidConfig(format!(
                "default alternative {k} out of range for a menu of {d}"
            )));
        }
    }
    let mut chosen = vec![false; d];
    for obs in data {
        chosen[obs.choice] = true;
    }
    let kept: Vec<usize> =
        (0..d).filter(|&j| chosen[j] || force_keep == Some(j)).collect();
    let pruned: Vec<usize> = (0..d).filter(|&j| !kept.contains(&j)).collect();
    if pruned.is_empty() {
        return Ok(PrunedData { observations: data.to_vec(), kept, pruned });
    }
    let observations = data
        .iter()
        .map(|obs| {
            let context = HouseholdContext {
                alternatives: kept.iter().map(|&j| obs.context.alternatives[j].clone()).collect(),
                demographics: obs.context.demographics.clone(),
                pbar: obs.context.pbar,
            };
            let choice = kept
                .binary_search(&obs.choice)
                .expect("every chosen alternative is kept");
            Observation { household_id: obs.household_id, context, choice }
        })
        .collect();
    Ok(PrunedData { observations, kept, pruned })
}

/// Removes alternatives nobody in the sample chose. A removed alternative
/// can never block the chosen one (its inclusion is irrelevant once it is
/// out of every realized consideration set's argmax), so the maximized
/// likelihood is unchanged; the fit simply has fewer inclusion parameters.
pub fn prune_zero_shares(data: &[Observation]) -> Result<PrunedData> {
    prune_impl(data, None)
}

/// Picks the always-considered alternative: the one chosen most often among
/// households in the top decile of the price level (their base price when
/// recorded, otherwise the menu's mean premium). At high price levels the
/// cheapest-relevant region of the parameter space pins this alternative
/// down, which is why the rule conditions on expensive menus. Ties go to
/// the lowest index.
pub fn select_default_alternative(data: &[Observation]) -> Result<usize> {
    let d = common_menu_size(data)?;
    let levels: Vec<f64> = data
        .iter()
        .map(|obs| {
            obs.context.pbar.unwrap_or_else(|| {
                let ps: Vec<f64> =
                    obs.context.alternatives.iter().map(|a| a.total_premium()).collect();
                pairwise_mean(&ps)
            })
        })
        .collect();
    let mut sorted = levels.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite price levels"));
    let threshold = percentile_sorted(&sorted, 0.9);
    let mut counts = vec![0usize; d];
    for (obs, &lev) in data.iter().zip(&levels) {
        if lev >= threshold {
            counts[obs.choice] += 1;
        }
    }
    let best = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(j, _)| j)
        .expect("non-empty menu");
    Ok(best)
}

/// Per-household log-likelihood of the mixed-logit benchmark.
pub fn mixed_logit_log_likelihood(
    family: &UtilityFamily,
    dist: &RiskDistribution,
    data: &[Observation],
    sigma: f64,
    order: usize,
) -> Result<LogLikelihood> {
    if data.is_empty() {
        return Err(Error::DataValidation("empty dataset".into()));
    }
    let probs: Vec<f64> = data
        .par_iter()
        .map(|obs| mixed_logit_choice_prob(family, dist, &obs.context, obs.choice, sigma, order))
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

#[derive(Debug, Clone)]
struct ParamSpec {
    name: String,
    transform: Transform,
    /// Initial value on the natural scale.
    init: f64,
    /// Initial simplex step on the unconstrained scale.
    step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ArcKind {
    Basic,
    Proportional,
    AltSpecific,
}

/// Index bookkeeping for an ARC fit on a (possibly pruned) menu.
#[derive(Debug, Clone)]
struct ArcLayout {
    kind: ArcKind,
    /// Reduced menu size.
    d: usize,
    /// Default alternative, reduced index.
    default_alt: usize,
    /// Alternatives with a free inclusion parameter (reduced indices).
    free: Vec<usize>,
    /// Number of shift coefficients (proportional only): intercept + one
    /// per demographic column.
    n_rho: usize,
    nu_bar: f64,
}

impl ArcLayout {
    fn specs(&self, labels: &[usize]) -> Vec<ParamSpec> {
        let mut specs = Vec::new();
        let orig = |j: usize| labels[j] + 1;
        match self.kind {
            ArcKind::Basic | ArcKind::Proportional => {
                for &j in &self.free {
                    specs.push(ParamSpec {
                        name: format!("alpha_{}", orig(j)),
                        transform: Transform::Logit,
                        init: 0.5,
                        step: 1.0,
                    });
                }
            }
            ArcKind::AltSpecific => {
                for &j in &self.free {
                    specs.push(ParamSpec {
                        name: format!("a_{}", orig(j)),
                        transform: Transform::Identity,
                        init: 0.0,
                        step: 1.0,
                    });
                    specs.push(ParamSpec {
                        name: format!("b_{}", orig(j)),
                        transform: Transform::Identity,
                        init: 0.0,
                        step: 0.005,
                    });
                    specs.push(ParamSpec {
                        name: format!("c_{}", orig(j)),
                        transform: Transform::Identity,
                        init: 0.0,
                        step: 25.0,
                    });
                }
            }
        }
        if self.kind == ArcKind::Proportional {
            for r in 0..self.n_rho {
                specs.push(ParamSpec {
                    name: format!("rho_{r}"),
                    transform: Transform::Identity,
                    init: 0.0,
                    step: 0.5,
                });
            }
            specs.push(ParamSpec {
                name: "xi2".into(),
                transform: Transform::Log,
                init: 5.0,
                step: 1.0,
            });
        }
        specs.push(ParamSpec {
            name: "beta1".into(),
            transform: Transform::Log,
            init: 1.5,
            step: 0.7,
        });
        specs.push(ParamSpec {
            name: "beta2".into(),
            transform: Transform::Log,
            init: 5.0,
            step: 0.7,
        });
        specs
    }

    /// Number of leading coordinates that parameterize the mechanism.
    fn mech_len(&self) -> usize {
        match self.kind {
            ArcKind::Basic => self.free.len(),
            ArcKind::Proportional => self.free.len() + self.n_rho + 1,
            ArcKind::AltSpecific => 3 * self.free.len(),
        }
    }

    fn mechanism(&self, theta: &[f64]) -> Result<Consideration> {
        match self.kind {
            ArcKind::Basic | ArcKind::Proportional => {
                let mut alphas = vec![1.0; self.d];
                for (i, &j) in self.free.iter().enumerate() {
                    alphas[j] = logistic(theta[i]);
                }
                if self.kind == ArcKind::Basic {
                    Ok(Consideration::Basic(BasicArc::new(alphas, self.default_alt)?))
                } else {
                    let nf = self.free.len();
                    let rho = theta[nf..nf + self.n_rho].to_vec();
                    let xi2 = theta[nf + self.n_rho].exp();
                    Ok(Consideration::Proportional(ProportionalArc::new(
                        alphas,
                        self.default_alt,
                        rho,
                        xi2,
                        self.nu_bar,
                    )?))
                }
            }
            ArcKind::AltSpecific => {
                let mut coefs = vec![AltSpecificCoef { a: 0.0, b: 0.0, c: 0.0 }; self.d];
                for (i, &j) in self.free.iter().enumerate() {
                    coefs[j] =
                        AltSpecificCoef { a: theta[3 * i], b: theta[3 * i + 1], c: theta[3 * i + 2] };
                }
                Ok(Consideration::AltSpecific(AltSpecificArc::new(coefs, self.default_alt)?))
            }
        }
    }
}

fn beta_from_theta(theta: &[f64], nu_bar: f64) -> Result<RiskDistribution> {
    let n = theta.len();
    RiskDistribution::scaled_beta(theta[n - 2].exp(), theta[n - 1].exp(), nu_bar)
}

/// Runs every optimizer start (in parallel) and picks the winner: lowest
/// objective, ties to the lowest start index.
fn multi_start<F>(
    objective: F,
    specs: &[ParamSpec],
    opts: &FitOptions,
) -> (usize, NelderMeadResult, Vec<f64>, usize)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let theta0: Vec<f64> = specs.iter().map(|s| s.transform.unconstrain(s.init)).collect();
    let steps: Vec<f64> = specs.iter().map(|s| s.step).collect();
    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1))
        .map(|s| {
            if s == 0 {
                theta0.clone()
            } else {
                let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
                rng.set_stream(1_000 + s as u64);
                theta0
                    .iter()
                    .zip(&steps)
                    .map(|(&t, &st)| t + st * rng.random_range(-2.0..2.0))
                    .collect()
            }
        })
        .collect();
    let results: Vec<NelderMeadResult> = starts
        .par_iter()
        .map(|x0| nelder_mead(|th| objective(th), x0, &steps, &opts.optimizer))
        .collect();
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.fx < results[best].fx {
            best = i;
        }
    }
    let start_lls: Vec<f64> = results.iter().map(|r| -r.fx).collect();
    let evaluations: usize = results.iter().map(|r| r.evaluations).sum();
    let winner = results.into_iter().nth(best).expect("at least one start");
    (best, winner, start_lls, evaluations)
}

/// Fits `model` to `data` by maximum likelihood.
///
/// For the consideration models this prunes never-chosen alternatives
/// (unless disabled), selects the default alternative when not supplied,
/// precomputes each household's preference geometry once, and reuses it for
/// every likelihood evaluation across all starts.
pub fn fit(
    model: &FitModel,
    family: &UtilityFamily,
    data: &[Observation],
    opts: &FitOptions,
) -> Result<EstimationResult> {
    match model {
        FitModel::MixedLogit => fit_mixed_logit(family, data, opts),
        FitModel::Basic { default_alt } => {
            fit_arc(ArcKind::Basic, *default_alt, family, data, opts)
        }
        FitModel::Proportional { default_alt } => {
            fit_arc(ArcKind::Proportional, *default_alt, family, data, opts)
        }
        FitModel::AltSpecific { default_alt } => {
            fit_arc(ArcKind::AltSpecific, *default_alt, family, data, opts)
        }
    }
}

fn fit_arc(
    kind: ArcKind,
    default_alt: Option<usize>,
    family: &UtilityFamily,
    data: &[Observation],
    opts: &FitOptions,
) -> Result<EstimationResult> {
    let d_full = common_menu_size(data)?;
    let pruned = if opts.prune {
        prune_impl(data, default_alt)?
    } else {
        PrunedData { observations: data.to_vec(), kept: (0..d_full).collect(), pruned: vec![] }
    };
    let d = pruned.kept.len();
    let default_reduced = match default_alt {
        Some(orig) => pruned
            .kept
            .binary_search(&orig)
            .map_err(|_| Error::InvalidConfig(format!("default alternative {orig} was pruned")))?,
        None => select_default_alternative(&pruned.observations)?,
    };
    let n_demo = pruned.observations[0].context.demographics.len();
    let layout = ArcLayout {
        kind,
        d,
        default_alt: default_reduced,
        free: (0..d).filter(|&j| j != default_reduced).collect(),
        n_rho: 1 + n_demo,
        nu_bar: opts.nu_bar,
    };
    let specs = layout.specs(&pruned.kept);

    // Surface structural problems (menu shape restrictions, degenerate
    // support) now rather than as an all-infinite likelihood later.
    let theta0: Vec<f64> = specs.iter().map(|s| s.transform.unconstrain(s.init)).collect();
    layout.mechanism(&theta0[..layout.mech_len()])?;
    beta_from_theta(&theta0, opts.nu_bar)?;

    let prepared = prepare_households(family, &pruned.observations, opts.nu_bar)?;
    let kernel = opts.kernel;
    let objective = |theta: &[f64]| -> f64 {
        let Ok(mech) = layout.mechanism(&theta[..layout.mech_len()]) else {
            return f64::INFINITY;
        };
        let Ok(dist) = beta_from_theta(theta, opts.nu_bar) else {
            return f64::INFINITY;
        };
        match log_likelihood_prepared(&prepared, &mech, &dist, kernel) {
            Ok(ll) => -ll.total,
            Err(_) => f64::INFINITY,
        }
    };
    let (best_start, winner, start_lls, evaluations) = multi_start(objective, &specs, opts);

    let mech = layout.mechanism(&winner.x[..layout.mech_len()])?;
    let dist = beta_from_theta(&winner.x, opts.nu_bar)?;
    let ll = log_likelihood_prepared(&prepared, &mech, &dist, kernel)?;

    // Report on the original indexing: pruned inclusion probabilities are 0,
    // the default's is 1.
    let mut parameters = Vec::new();
    if matches!(kind, ArcKind::Basic | ArcKind::Proportional) {
        let reduced_alphas = match &mech {
            Consideration::Basic(m) => &m.alphas,
            Consideration::Proportional(m) => &m.alphas,
            _ => unreachable!("arc kind constructs a matching mechanism"),
        };
        for orig in 0..d_full {
            let value = match pruned.kept.binary_search(&orig) {
                Ok(r) => reduced_alphas[r],
                Err(_) => 0.0,
            };
            parameters.push(NamedParameter { name: format!("alpha_{}", orig + 1), value });
        }
    }
    for (spec, &u) in specs.iter().zip(&winner.x) {
        let natural = spec.transform.constrain(u);
        match parameters.iter_mut().find(|p| p.name == spec.name) {
            Some(p) => p.value = natural,
            None => parameters.push(NamedParameter { name: spec.name.clone(), value: natural }),
        }
    }

    let k = specs.len();
    let n = data.len();
    Ok(EstimationResult {
        free_names: specs.iter().map(|s| s.name.clone()).collect(),
        parameters,
        log_likelihood: ll.total,
        aic: 2.0 * k as f64 - 2.0 * ll.total,
        bic: k as f64 * (n as f64).ln() - 2.0 * ll.total,
        n_households: n,
        n_free_parameters: k,
        converged: winner.converged,
        iterations: winner.iterations,
        evaluations,
        best_start,
        start_log_likelihoods: start_lls,
        pruned_alternatives: pruned.pruned.clone(),
        default_alternative: Some(pruned.kept[default_reduced]),
        kernel,
        seed: opts.seed,
        per_household_loglik: ll.per_household,
        zero_probability_households: ll.zero_probability,
        confidence_intervals: None,
    })
}

fn fit_mixed_logit(
    family: &UtilityFamily,
    data: &[Observation],
    opts: &FitOptions,
) -> Result<EstimationResult> {
    common_menu_size(data)?;
    // Scale shocks to the typical premium spread so the first simplex is
    // in the right order of magnitude.
    let spreads: Vec<f64> = data
        .iter()
        .map(|obs| {
            let ps: Vec<f64> = obs.context.alternatives.iter().map(|a| a.total_premium()).collect();
            let mx = ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mn = ps.iter().cloned().fold(f64::INFINITY, f64::min);
            mx - mn
        })
        .collect();
    let sigma_init = (pairwise_mean(&spreads) / 4.0).max(1e-3);
    let specs = vec![
        ParamSpec { name: "beta1".into(), transform: Transform::Log, init: 1.5, step: 0.7 },
        ParamSpec { name: "beta2".into(), transform: Transform::Log, init: 5.0, step: 0.7 },
        ParamSpec { name: "sigma".into(), transform: Transform::Log, init: sigma_init, step: 0.7 },
    ];
    let order = opts.mixed_logit_order;
    let objective = |theta: &[f64]| -> f64 {
        let Ok(dist) =
            RiskDistribution::scaled_beta(theta[0].exp(), theta[1].exp(), opts.nu_bar)
        else {
            return f64::INFINITY;
        };
        match mixed_logit_log_likelihood(family, &dist, data, theta[2].exp(), order) {
            Ok(ll) => -ll.total,
            Err(_) => f64::INFINITY,
        }
    };
    let (best_start, winner, start_lls, evaluations) = multi_start(objective, &specs, opts);
    let dist = RiskDistribution::scaled_beta(winner.x[0].exp(), winner.x[1].exp(), opts.nu_bar)?;
    let sigma = winner.x[2].exp();
    let ll = mixed_logit_log_likelihood(family, &dist, data, sigma, order)?;
    let parameters: Vec<NamedParameter> = specs
        .iter()
        .zip(&winner.x)
        .map(|(s, &u)| NamedParameter { name: s.name.clone(), value: s.transform.constrain(u) })
        .collect();
    let k = specs.len();
    let n = data.len();
    Ok(EstimationResult {
        free_names: specs.iter().map(|s| s.name.clone()).collect(),
        parameters,
        log_likelihood: ll.total,
        aic: 2.0 * k as f64 - 2.0 * ll.total,
        bic: k as f64 * (n as f64).ln() - 2.0 * ll.total,
        n_households: n,
        n_free_parameters: k,
        converged: winner.converged,
        iterations: winner.iterations,
        evaluations,
        best_start,
        start_log_likelihoods: start_lls,
        pruned_alternatives: vec![],
        default_alternative: None,
        kernel: opts.kernel,
        seed: opts.seed,
        per_household_loglik: ll.per_household,
        zero_probability_households: ll.zero_probability,
        confidence_intervals: None,
    })
}

/// Non-nested model comparison from matched per-household log-likelihood
/// terms: `z = sqrt(n) * mean(d) / sd(d)` with population (ddof = 0)
/// standard deviation, two-sided normal p-value. Identical term vectors
/// give `z = 0, p = 1`; otherwise zero variance is an error because the
/// statistic is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VuongTest {
    pub z: f64,
    pub p_value: f64,
    pub n: usize,
    pub mean_difference: f64,
}

pub fn vuong_test(ll_a: &[f64], ll_b: &[f64]) -> Result<VuongTest> {
    if ll_a.is_empty() || ll_a.len() != ll_b.len() {
        return Err(Error::DataValidation(format!(
            "model comparison needs matched non-empty per-household terms ({} vs {})",
            ll_a.len(),
            ll_b.len()
        )));
    }
    let diffs: Vec<f64> = ll_a.iter().zip(ll_b).map(|(&a, &b)| a - b).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::DataValidation(
            "per-household log-likelihood differences must be finite (a model assigns \
             zero probability to some household)"
                .into(),
        ));
    }
    let n = diffs.len();
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(VuongTest { z: 0.0, p_value: 1.0, n, mean_difference: 0.0 });
    }
    let mean = pairwise_mean(&diffs);
    let sd = population_sd(&diffs);
    // Constant differences carry rounding jitter, so degeneracy is judged
    // relative to the difference scale rather than against exact zero.
    let scale = diffs.iter().fold(mean.abs(), |m, d| m.max(d.abs()));
    if sd <= 1e-12 * scale {
        return Err(Error::Numeric(
            "model comparison is degenerate: per-household differences have zero variance".into(),
        ));
    }
    let z = (n as f64).sqrt() * mean / sd;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p_value = 2.0 * (1.0 - normal.cdf(z.abs()));
    Ok(VuongTest { z, p_value, n, mean_difference: mean })
}

/// Percentile bootstrap over household resamples. `stat` maps a resample
/// (given as indices into the original dataset, with replacement) to a
/// statistic vector; returns one `(lower, upper)` interval per coordinate.
/// Fully deterministic given `seed` (replicate `r` uses its own RNG stream).
pub fn bootstrap_percentile_ci<F>(
    n_households: usize,
    replicates: usize,
    level: f64,
    seed: u64,
    stat: F,
) -> Result<Vec<(f64, f64)>>
where
    F: Fn(&[usize]) -> Result<Vec<f64>> + Sync,
{
    if n_households == 0 {
        return Err(Error::DataValidation("empty dataset".into()));
    }
    if replicates < 10 {
        return Err(Error::InvalidConfig(format!(
            "bootstrap needs at least 10 replicates, got {replicates}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let draws: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let idx: Vec<usize> =
                (0..n_households).map(|_| rng.random_range(0..n_households)).collect();
            stat(&idx)
        })
        .collect::<Result<_>>()?;
    let width = draws[0].len();
    if draws.iter().any(|v| v.len() != width) {
        return Err(Error::Numeric(
            "bootstrap statistic changed dimension across replicates".into(),
        ));
    }
    let q_lo = (1.0 - level) / 2.0;
    let q_hi = 1.0 - q_lo;
    let mut out = Vec::with_capacity(width);
    for c in 0..width {
        let mut col: Vec<f64> = draws.iter().map(|v| v[c]).collect();
        col.sort_by(|a, b| a.partial_cmp(b).expect("finite bootstrap draws"));
        out.push((percentile_sorted(&col, q_lo), percentile_sorted(&col, q_hi)));
    }
    Ok(out)
}

/// Bootstrap confidence intervals for a fitted model, refitting on each
/// household resample. Intervals are named after the base fit's parameters;
/// a parameter absent from a replicate (its alternative got pruned there)
/// contributes its excluded value, zero.
pub fn bootstrap_ci(
    model: &FitModel,
    family: &UtilityFamily,
    data: &[Observation],
    opts: &FitOptions,
    base: &EstimationResult,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<Vec<ParameterInterval>> {
    let names: Vec<String> = base.parameters.iter().map(|p| p.name.clone()).collect();
    let intervals = bootstrap_percentile_ci(data.len(), replicates, level, seed, |idx| {
        let resampled: Vec<Observation> = idx.iter().map(|&i| data[i].clone()).collect();
        let refit = fit(model, family, &resampled, opts)?;
        Ok(names.iter().map(|n| refit.value(n).unwrap_or(0.0)).collect())
    })?;
    Ok(names
        .into_iter()
        .zip(intervals)
        .map(|(name, (lower, upper))| ParameterInterval { name, lower, upper })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::{log_likelihood, ChoiceModel};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const NU_BAR: f64 = 0.02;

    #[test]
    fn transforms_round_trip() {
        for &v in &[1e-6, 0.01, 0.3, 0.5, 0.97, 1.0 - 1e-6] {
            let u = Transform::Logit.unconstrain(v);
            assert_relative_eq!(Transform::Logit.constrain(u), v, max_relative = 1e-12);
        }
        for &v in &[1e-8, 0.5, 1.0, 42.0, 1e8] {
            let u = Transform::Log.unconstrain(v);
            assert_relative_eq!(Transform::Log.constrain(u), v, max_relative = 1e-12);
        }
        for &v in &[-5.0, 0.0, 17.25] {
            assert_eq!(Transform::Identity.constrain(Transform::Identity.unconstrain(v)), v);
        }
    }

    #[test]
    fn vuong_matches_hand_computation() {
        let a = [-1.0, -2.0, -1.5, -1.0];
        let b = [-1.2, -1.9, -1.8, -1.4];
        let t = vuong_test(&a, &b).unwrap();
        assert_relative_eq!(t.z, 2.1380899352993943, max_relative = 1e-13);
        assert_relative_eq!(t.p_value, 0.0325094446457196, max_relative = 1e-10);
        assert_eq!(t.n, 4);
    }

    #[test]
    fn vuong_identical_terms_give_unit_p() {
        let a = [-1.0, -2.0, -0.5];
        let t = vuong_test(&a, &a).unwrap();
        assert_eq!(t.z, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn vuong_zero_variance_is_degenerate() {
        let a = [-1.0, -2.0, -0.5];
        let b = [-1.1, -2.1, -0.6];
        assert!(matches!(vuong_test(&a, &b), Err(Error::Numeric(_))));
    }

    #[test]
    fn vuong_rejects_infinite_terms() {
        let a = [-1.0, f64::NEG_INFINITY];
        let b = [-1.1, -2.0];
        assert!(matches!(vuong_test(&a, &b), Err(Error::DataValidation(_))));
    }

    fn menu(premiums: &[f64], deductibles: &[f64]) -> HouseholdContext {
        HouseholdContext::single_line(0.1, premiums, deductibles, vec![]).unwrap()
    }

    fn obs(id: u64, ctx: HouseholdContext, choice: usize) -> Observation {
        Observation { household_id: id, context: ctx, choice }
    }

    #[test]
    fn pruning_drops_never_chosen_and_remaps_choices() {
        let data = vec![
            obs(0, menu(&[100.0, 140.0, 180.0], &[500.0, 250.0, 100.0]), 0),
            obs(1, menu(&[100.0, 140.0, 180.0], &[500.0, 250.0, 100.0]), 2),
            obs(2, menu(&[100.0, 141.0, 181.0], &[500.0, 250.0, 100.0]), 2),
        ];
        let pruned = prune_zero_shares(&data).unwrap();
        assert_eq!(pruned.kept, vec![0, 2]);
        assert_eq!(pruned.pruned, vec![1]);
        assert_eq!(pruned.observations[0].choice, 0);
        assert_eq!(pruned.observations[1].choice, 1);
        assert_eq!(pruned.observations[1].context.n_alternatives(), 2);
        assert_eq!(pruned.observations[1].context.deductible(1), 100.0);
    }

    #[test]
    fn pruning_leaves_the_likelihood_unchanged() {
        // A never-considered alternative can't block anything: fixing its
        // inclusion probability at (effectively) zero on the full menu must
        // give the same likelihood as removing it outright.
        let data = vec![
            obs(0, menu(&[100.0, 140.0, 180.0], &[500.0, 250.0, 100.0]), 0),
            obs(1, menu(&[100.0, 140.0, 180.0], &[500.0, 250.0, 100.0]), 2),
            obs(2, menu(&[100.0, 141.0, 181.0], &[500.0, 250.0, 100.0]), 2),
        ];
        let dist = RiskDistribution::scaled_beta(1.7, 7.45, NU_BAR).unwrap();
        let full = ChoiceModel {
            family: UtilityFamily::Ntd,
            dist: dist.clone(),
            mechanism: Consideration::Basic(
                BasicArc::new(vec![1.0, 1e-300, 0.7], 0).unwrap(),
            ),
        };
        let ll_full = log_likelihood(&full, &data, Kernel::Breakpoint).unwrap();

        let pruned = prune_zero_shares(&data).unwrap();
        let reduced = ChoiceModel {
            family: UtilityFamily::Ntd,
            dist,
            mechanism: Consideration::Basic(BasicArc::new(vec![1.0, 0.7], 0).unwrap()),
        };
        let ll_reduced = log_likelihood(&reduced, &pruned.observations, Kernel::Breakpoint).unwrap();
        assert_relative_eq!(ll_full.total, ll_reduced.total, max_relative = 1e-12);
    }

    #[test]
    fn default_selection_votes_among_expensive_menus() {
        let mut data = Vec::new();
        for i in 0..20u64 {
            let mut ctx = menu(&[100.0, 140.0, 180.0], &[500.0, 250.0, 100.0]);
            ctx.pbar = Some(100.0 + i as f64);
            // The two most expensive households choose alternative 2;
            // everyone else chooses 0.
            let choice = if i >= 18 { 2 } else { 0 };
            data.push(obs(i, ctx, choice));
        }
        assert_eq!(select_default_alternative(&data).unwrap(), 2);
    }

    #[test]
    fn mismatched_menu_sizes_are_rejected() {
        let data = vec![
            obs(0, menu(&[100.0, 140.0], &[500.0, 250.0]), 0),
            obs(1, menu(&[100.0, 140.0, 180.0], &[500.0, 250.0, 100.0]), 0),
        ];
        assert!(matches!(common_menu_size(&data), Err(Error::DataValidation(_))));
    }

    /// Draws a small dataset directly from model probabilities, fits it,
    /// and checks the maximum-likelihood property: the fitted likelihood is
    /// at least the truth's likelihood on the same data.
    #[test]
    fn basic_fit_attains_at_least_the_truth_likelihood() {
        use rand::Rng;
        let family = UtilityFamily::Ntd;
        let dist = RiskDistribution::scaled_beta(2.0, 5.0, NU_BAR).unwrap();
        let truth =
            Consideration::Basic(BasicArc::new(vec![1.0, 0.55], 0).unwrap());
        let model = ChoiceModel { family: family.clone(), dist, mechanism: truth };
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut data = Vec::new();
        for i in 0..400u64 {
            // Menu variation across households identifies the inclusion
            // probability separately from the risk distribution; the premium
            // sweep pushes the indifference cutoff across the whole support.
            let p2 = 118.0 + (i % 170) as f64;
            let ctx = menu(&[100.0, p2], &[500.0, 250.0]);
            let p1 = model.choice_probability(&ctx, 1, Kernel::Breakpoint).unwrap();
            let choice = usize::from(rng.random::<f64>() < p1);
            data.push(obs(i, ctx, choice));
        }
        let opts = FitOptions {
            starts: 3,
            optimizer: NelderMeadOptions { max_iters: 600, ftol_abs: 1e-9, ftol_rel: 1e-9 },
            ..Default::default()
        };
        let fit_res = fit(&FitModel::Basic { default_alt: Some(0) }, &family, &data, &opts).unwrap();
        let ll_truth = log_likelihood(&model, &data, Kernel::Breakpoint).unwrap().total;
        assert!(fit_res.converged, "multi-start simplex should converge on a 3-parameter fit");
        assert!(
            fit_res.log_likelihood >= ll_truth - 1e-6,
            "MLE {} fell below the truth's likelihood {}",
            fit_res.log_likelihood,
            ll_truth
        );
        let alpha = fit_res.value("alpha_2").unwrap();
        assert_abs_diff_eq!(alpha, 0.55, epsilon = 0.15);
        assert_eq!(fit_res.value("alpha_1").unwrap(), 1.0);
        assert_eq!(fit_res.default_alternative, Some(0));
        assert_eq!(fit_res.n_free_parameters, 3);
    }

    #[test]
    fn single_alternative_fit_is_degenerate_with_zero_loglik() {
        let data: Vec<Observation> = (0..5)
            .map(|i| {
                obs(i, HouseholdContext::single_line(0.1, &[100.0], &[500.0], vec![]).unwrap(), 0)
            })
            .collect();
        let opts = FitOptions { starts: 1, ..Default::default() };
        let res = fit(&FitModel::Basic { default_alt: None }, &UtilityFamily::Ntd, &data, &opts)
            .unwrap();
        assert_eq!(res.log_likelihood, 0.0);
        assert!(res.converged);
        assert_eq!(res.value("alpha_1").unwrap(), 1.0);
        assert_eq!(res.default_alternative, Some(0));
    }

    #[test]
    fn bootstrap_interval_brackets_the_plug_in_mean() {
        let values: Vec<f64> = (0..50).map(|i| (i as f64) * 0.1).collect();
        let plug_in = pairwise_mean(&values);
        let cis = bootstrap_percentile_ci(values.len(), 200, 0.95, 42, |idx| {
            let resampled: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
            Ok(vec![pairwise_mean(&resampled)])
        })
        .unwrap();
        assert_eq!(cis.len(), 1);
        let (lo, hi) = cis[0];
        assert!(lo < plug_in && plug_in < hi, "({lo}, {hi}) should bracket {plug_in}");
        assert!(hi - lo < 1.5, "interval implausibly wide: ({lo}, {hi})");
    }

    #[test]
    fn bootstrap_rejects_too_few_replicates() {
        assert!(matches!(
            bootstrap_percentile_ci(10, 5, 0.95, 0, |_| Ok(vec![0.0])),
            Err(Error::InvalidConfig(_))
        ));
    }
}
