//! Monetary cost of limited consideration.
//!
//! A household that fails to consider its first-best alternative settles for
//! something with a higher certainty-equivalent cost; the difference between
//! the two certainty equivalents is the money it would pay to escape the
//! friction. This module integrates that gap over risk aversion and over
//! consideration sets (exactly, via closed-form set marginals and
//! discontinuity-aware quadrature), cross-checks it by Monte Carlo, and
//! aggregates it over datasets.
//!
//! Certainty equivalents are evaluated at the household's own risk aversion:
//! welfare is measured against true preferences, not against the noisy
//! choice.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::choice::ChoiceModel;
use crate::consider::{Consideration, MechContext};
use crate::context::HouseholdContext;
use crate::cutoffs::CutoffMatrix;
use crate::data::Dataset;
use crate::dist::RiskDistribution;
use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre, pairwise_sum, percentile_sorted, population_sd};
use crate::simulate::simulate_household;
use crate::utility::UtilityFamily;

/// Gauss–Legendre order used inside each smooth panel of the risk-aversion
/// integral.
const PANEL_GL_ORDER: usize = 24;

/// What to average over when pricing the friction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossMode {
    /// Expectation over both risk aversion and the consideration set.
    Expected,
    /// A known risk aversion; expectation over consideration sets only.
    AtNu(f64),
}

/// Certainty-equivalent losses, conditional on risk aversion: the expected
/// excess certainty-equivalent cost of the chosen alternative over the first
/// best, where "chosen" means highest preference score within the drawn set.
fn conditional_loss(
    family: &UtilityFamily,
    ctx: &HouseholdContext,
    mech: &Consideration,
    mctx: &MechContext,
    nu: f64,
) -> Result<f64> {
    let d = ctx.n_alternatives();
    let mut scores = Vec::with_capacity(d);
    let mut ces = Vec::with_capacity(d);
    for alt in &ctx.alternatives {
        scores.push(family.preference_score(nu, alt)?);
        ces.push(family.alternative_certainty_equivalent(nu, alt)?);
    }
    let mut fb = 0usize;
    for j in 1..d {
        if scores[j] > scores[fb] {
            fb = j;
        }
    }
    let ce_fb = ces[fb];
    let mut total = 0.0;
    for m in 0..d {
        let gap = ces[m] - ce_fb;
        if gap <= 0.0 {
            continue; // the first best (or an exact tie with it) costs nothing
        }
        let mut blockers: u128 = 0;
        for (k, &s) in scores.iter().enumerate() {
            if s > scores[m] {
                blockers |= 1 << k;
            }
        }
        // Chosen iff included while everything preferred to it is not.
        total += mech.marginal(1 << m, blockers, nu, mctx)? * gap;
    }
    Ok(total)
}

/// Expected certainty-equivalent loss of one household.
///
/// The risk-aversion integral is split at every pairwise indifference cutoff
/// and every mechanism breakpoint inside the support, leaving only smooth
/// panels for the quadrature; within a panel, set probabilities come from the
/// mechanism's closed-form marginals. Nonnegative by construction. Smoothly
/// risk-aversion-dependent mechanisms are integrated directly (no breakpoint
/// list needed).
pub fn household_loss(
    family: &UtilityFamily,
    ctx: &HouseholdContext,
    dist: &RiskDistribution,
    mech: &Consideration,
    mode: LossMode,
) -> Result<f64> {
    let d = ctx.n_alternatives();
    let mech_size = mech.n_alternatives();
    if mech_size != 0 && mech_size != d {
        return Err(Error::InvalidConfig(format!(
            "mechanism covers {mech_size} alternatives but the menu has {d}"
        )));
    }
    let premiums: Vec<f64> = ctx.alternatives.iter().map(|a| a.total_premium()).collect();
    let mctx = MechContext { premiums: &premiums, demographics: &ctx.demographics };
    match mode {
        LossMode::AtNu(nu) => {
            if !(nu.is_finite() && nu >= 0.0) {
                return Err(Error::Domain(format!(
                    "risk aversion must be finite and non-negative, got {nu}"
                )));
            }
            conditional_loss(family, ctx, mech, &mctx, nu)
        }
        LossMode::Expected => {
            let nu_bar = dist.nu_bar();
            let matrix = CutoffMatrix::compute(family, ctx, nu_bar)?;
            let mut edges = vec![0.0, nu_bar];
            for j in 0..d {
                for k in (j + 1)..d {
                    if let Some(c) = matrix.get(j, k).finite() {
                        if c > 0.0 && c < nu_bar {
                            edges.push(c);
                        }
                    }
                }
            }
            if let Some(breaks) = mech.piecewise_breakpoints() {
                for b in breaks {
                    if b > 0.0 && b < nu_bar {
                        edges.push(b);
                    }
                }
            }
            edges.sort_by(|a, b| a.partial_cmp(b).expect("finite cutoffs"));
            edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * nu_bar);
            let (nodes, weights) = gauss_legendre(PANEL_GL_ORDER);
            let panel_losses: Result<Vec<f64>> = edges
                .par_windows(2)
                .map(|panel| {
                    let (a, b) = (panel[0], panel[1]);
                    let half = 0.5 * (b - a);
                    let mid = 0.5 * (a + b);
                    let mut acc = 0.0;
                    for (x, w) in nodes.iter().zip(&weights) {
                        let nu = mid + half * x;
                        acc += w * dist.pdf(nu) * conditional_loss(family, ctx, mech, &mctx, nu)?;
                    }
                    Ok(acc * half)
                })
                .collect();
            Ok(pairwise_sum(&panel_losses?))
        }
    }
}

/// Loss actually incurred at a known risk aversion and realized choice:
/// the chosen alternative's certainty-equivalent cost over the first best's.
pub fn realized_loss(
    family: &UtilityFamily,
    ctx: &HouseholdContext,
    nu: f64,
    chosen: usize,
) -> Result<f64> {
    let d = ctx.n_alternatives();
    if chosen >= d {
        return Err(Error::InvalidConfig(format!(
            "chosen alternative {chosen} out of range for a menu of {d}"
        )));
    }
    let mut fb = 0usize;
    let mut best = family.preference_score(nu, &ctx.alternatives[0])?;
    for j in 1..d {
        let s = family.preference_score(nu, &ctx.alternatives[j])?;
        if s > best {
            fb = j;
            best = s;
        }
    }
    Ok(family.alternative_certainty_equivalent(nu, &ctx.alternatives[chosen])?
        - family.alternative_certainty_equivalent(nu, &ctx.alternatives[fb])?)
}

/// Monte Carlo estimate of the expected loss: simulate risk aversion, set,
/// and choice, then average the realized losses. Returns the mean and its
/// standard error.
pub fn monte_carlo_loss(
    model: &ChoiceModel,
    ctx: &HouseholdContext,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if draws == 0 {
        return Err(Error::InvalidConfig("need at least one draw".into()));
    }
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut losses = Vec::with_capacity(draws);
    for _ in 0..draws {
        let sim = simulate_household(model, ctx, &mut rng)?;
        losses.push(realized_loss(&model.family, ctx, sim.nu, sim.choice)?);
    }
    let mean = pairwise_sum(&losses) / draws as f64;
    let se = population_sd(&losses) / (draws as f64).sqrt();
    Ok((mean, se))
}

/// One row of a loss table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossRow {
    /// `"all"` or `"<column>=<value>"`.
    pub group: String,
    pub households: usize,
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
}

/// Per-group expected-loss summaries over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossTable {
    pub rows: Vec<LossRow>,
}

fn summarize(group: String, losses: &mut Vec<f64>) -> LossRow {
    let mean = pairwise_sum(losses) / losses.len() as f64;
    losses.sort_by(|a, b| a.partial_cmp(b).expect("finite losses"));
    LossRow {
        group,
        households: losses.len(),
        mean,
        p10: percentile_sorted(losses, 0.10),
        p90: percentile_sorted(losses, 0.90),
    }
}

/// Expected loss per household, aggregated overall (first row, `"all"`) and
/// by each requested demographic column (one row per distinct value, in
/// value order). Grouping columns must be demographics of the dataset;
/// grouping is by exact value, so it suits categorical columns.
pub fn aggregate_loss(
    dataset: &Dataset,
    model: &ChoiceModel,
    group_by: &[String],
) -> Result<LossTable> {
    if dataset.observations.is_empty() {
        return Err(Error::DataValidation("cannot aggregate an empty dataset".into()));
    }
    let mut columns = Vec::with_capacity(group_by.len());
    for name in group_by {
        let idx = dataset
            .demographic_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| {
                Error::DataValidation(format!(
                    "grouping column `{name}` is not a demographic of this dataset \
                     (available: [{}])",
                    dataset.demographic_names.join(", ")
                ))
            })?;
        columns.push((name.as_str(), idx));
    }
    let losses: Result<Vec<f64>> = dataset
        .observations
        .par_iter()
        .map(|obs| {
            household_loss(
                &model.family,
                &obs.context,
                &model.dist,
                &model.mechanism,
                LossMode::Expected,
            )
        })
        .collect();
    let losses = losses?;
    let mut rows = vec![summarize("all".into(), &mut losses.clone())];
    for (name, idx) in columns {
        // Total order on values via the IEEE bit trick (demographics are
        // validated finite upstream; negatives sort before positives).
        let mut groups: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        for (obs, &loss) in dataset.observations.iter().zip(&losses) {
            let v = obs.context.demographics[idx];
            let bits = v.to_bits() as i64;
            let key = if bits < 0 { i64::MIN ^ bits } else { bits };
            groups.entry(key).or_default().push(loss);
        }
        for (key, mut member_losses) in groups {
            let bits = if key < 0 { (key ^ i64::MIN) as u64 } else { key as u64 };
            let value = f64::from_bits(bits);
            rows.push(summarize(format!("{name}={value}"), &mut member_losses));
        }
    }
    Ok(LossTable { rows })
}
