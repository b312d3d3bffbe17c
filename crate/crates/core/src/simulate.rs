//! Synthetic populations and forward simulation of choice panels.
//!
//! Both generation stages are data-parallel and deterministic: household `i`
//! draws from fixed counter-based RNG streams (`2 i` for its menu and
//! demographics, `2 i + 1` for its risk aversion, consideration set, and
//! choice), so thread scheduling can never change the output and the two
//! stages never share a stream even under the same seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::choice::ChoiceModel;
use crate::consider::MechContext;
use crate::context::{HouseholdContext, LineMenu};
use crate::data::{Dataset, Observation, PortfolioObservation, TruthRecord};
use crate::error::{Error, Result};

/// Premium and deductible template of one coverage line. Alternative `j`
/// costs `multipliers[j] * (price_share * pbar) + markup` for a household
/// with base price `pbar`, and the line's claim probability is the
/// household's base claim probability times `claim_scale` (clipped with the
/// population's claim-probability bounds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineTemplate {
    /// Strictly decreasing, riskiest first.
    pub deductibles: Vec<f64>,
    /// One positive premium multiplier per deductible.
    pub multipliers: Vec<f64>,
    /// Additive markup shared by the line's alternatives.
    pub markup: f64,
    /// Share of the household base price attributed to this line.
    pub price_share: f64,
    /// Scale on the household base claim probability for this line.
    pub claim_scale: f64,
}

impl LineTemplate {
    fn validate(&self) -> Result<()> {
        if self.deductibles.len() < 2 {
            return Err(Error::InvalidConfig(
                "each coverage line needs at least two alternatives".into(),
            ));
        }
        if self.multipliers.len() != self.deductibles.len() {
            return Err(Error::InvalidConfig(
                "premium multipliers must match the deductibles one-to-one".into(),
            ));
        }
        if self.multipliers.iter().any(|&g| !(g.is_finite() && g > 0.0)) {
            return Err(Error::InvalidConfig("premium multipliers must be positive".into()));
        }
        if !self.markup.is_finite() {
            return Err(Error::InvalidConfig("premium markup must be finite".into()));
        }
        if !(self.price_share.is_finite() && self.price_share > 0.0) {
            return Err(Error::InvalidConfig("price share must be positive".into()));
        }
        if !(self.claim_scale.is_finite() && self.claim_scale > 0.0) {
            return Err(Error::InvalidConfig("claim scale must be positive".into()));
        }
        Ok(())
    }
}

/// One observed household covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DemographicSpec {
    /// Normal draw `mean + sd * z`.
    Continuous { name: String, mean: f64, sd: f64 },
    /// Discrete draw over `(value, probability)` levels.
    Categorical { name: String, levels: Vec<(f64, f64)> },
}

impl DemographicSpec {
    pub fn name(&self) -> &str {
        match self {
            Self::Continuous { name, .. } | Self::Categorical { name, .. } => name,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.name().is_empty() {
            return Err(Error::InvalidConfig("demographic names must be non-empty".into()));
        }
        match self {
            Self::Continuous { sd, mean, .. } => {
                if !(sd.is_finite() && *sd >= 0.0 && mean.is_finite()) {
                    return Err(Error::InvalidConfig(
                        "continuous demographics need a finite mean and non-negative sd".into(),
                    ));
                }
            }
            Self::Categorical { levels, .. } => {
                if levels.is_empty() {
                    return Err(Error::InvalidConfig(
                        "categorical demographics need at least one level".into(),
                    ));
                }
                let mass: f64 = levels.iter().map(|&(_, p)| p).sum();
                if levels.iter().any(|&(v, p)| !v.is_finite() || !(0.0..=1.0).contains(&p))
                    || (mass - 1.0).abs() > 1e-9
                {
                    return Err(Error::InvalidConfig(format!(
                        "categorical level probabilities must be in [0, 1] and sum to one \
                         (sum {mass})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha12Rng) -> f64 {
        match self {
            Self::Continuous { mean, sd, .. } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Self::Categorical { levels, .. } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(v, p) in levels {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                levels.last().expect("validated non-empty").0
            }
        }
    }
}

/// Data-generating design for a synthetic market: household heterogeneity
/// (claim probability, base price, demographics) plus the menu templates of
/// one or three coverage lines.
///
/// Claim probabilities and base prices are log-normal; their underlying
/// normals share the copula correlation `mu_pbar_correlation`, and claim
/// probabilities are clipped into `mu_clip` (a sub-interval of `(0, 1)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub n_households: usize,
    /// Log-scale location of the claim probability.
    pub log_mu_mean: f64,
    /// Log-scale spread of the claim probability.
    pub log_mu_sd: f64,
    /// Clip interval for claim probabilities, strictly inside `(0, 1)`.
    pub mu_clip: (f64, f64),
    /// Log-scale location of the base price.
    pub log_pbar_mean: f64,
    /// Log-scale spread of the base price.
    pub log_pbar_sd: f64,
    /// Correlation of the underlying normals of claim probability and base
    /// price (the level-scale correlation is slightly smaller).
    pub mu_pbar_correlation: f64,
    /// One or three coverage lines.
    pub lines: Vec<LineTemplate>,
    pub demographics: Vec<DemographicSpec>,
}

/// Log-normal sigma such that the 99th-to-1st percentile ratio equals 4.3;
/// the two quantiles sit `2 z(0.99) = 4.6527` standard normal units apart.
const CLAIM_RATIO_SIGMA: f64 = 1.4586150226995167 / 4.652695747698567; // ln(4.3) / (2 z_.99)

/// Log-scale base-price spread of the default calibration.
const PRICE_SIGMA: f64 = 0.35;

impl PopulationSpec {
    /// Single five-deductible line calibrated to published market moments:
    /// mean premiums (145, 187, 243, 285, 321) across the ladder, a
    /// 99th-to-1st percentile ratio of claim probabilities of about 4.3, and
    /// a claim-probability/base-price correlation of about 0.38.
    pub fn collision_default(n_households: usize) -> Self {
        Self {
            n_households,
            // Mean claim probability 0.069 with the calibrated ratio.
            log_mu_mean: 0.069f64.ln() - CLAIM_RATIO_SIGMA * CLAIM_RATIO_SIGMA / 2.0,
            log_mu_sd: CLAIM_RATIO_SIGMA,
            mu_clip: (1e-4, 0.5),
            // Mean base price 243 (the premium of the unit-multiplier step).
            log_pbar_mean: 243f64.ln() - PRICE_SIGMA * PRICE_SIGMA / 2.0,
            log_pbar_sd: PRICE_SIGMA,
            // Log-scale copula correlation that puts the level-scale
            // correlation of (claim probability, base price) at 0.38.
            mu_pbar_correlation: 0.3932,
            lines: vec![LineTemplate {
                deductibles: vec![1000.0, 500.0, 250.0, 200.0, 100.0],
                multipliers: vec![145.0 / 243.0, 187.0 / 243.0, 1.0, 285.0 / 243.0, 321.0 / 243.0],
                markup: 0.0,
                price_share: 1.0,
                claim_scale: 1.0,
            }],
            demographics: Vec::new(),
        }
    }

    /// Three coverage lines whose product menu has `5 * 4 * 6 = 120`
    /// alternatives, sharing one household risk aversion across lines.
    pub fn triplet_default(n_households: usize) -> Self {
        let mut spec = Self::collision_default(n_households);
        spec.lines = vec![
            LineTemplate {
                deductibles: vec![1000.0, 500.0, 250.0, 200.0, 100.0],
                multipliers: vec![145.0 / 243.0, 187.0 / 243.0, 1.0, 285.0 / 243.0, 321.0 / 243.0],
                markup: 0.0,
                price_share: 0.5,
                claim_scale: 1.0,
            },
            LineTemplate {
                deductibles: vec![500.0, 250.0, 100.0, 50.0],
                multipliers: vec![0.8, 1.0, 1.15, 1.25],
                markup: 0.0,
                price_share: 0.3,
                claim_scale: 0.6,
            },
            LineTemplate {
                deductibles: vec![1000.0, 500.0, 250.0, 200.0, 100.0, 50.0],
                multipliers: vec![0.7, 0.85, 1.0, 1.1, 1.2, 1.28],
                markup: 0.0,
                price_share: 0.2,
                claim_scale: 1.5,
            },
        ];
        spec
    }

    /// Product-menu size across lines.
    pub fn menu_size(&self) -> usize {
        self.lines.iter().map(|l| l.deductibles.len()).product()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lines.len() == 1 || self.lines.len() == 3) {
            return Err(Error::InvalidConfig(format!(
                "populations use one or three coverage lines, got {}",
                self.lines.len()
            )));
        }
        for line in &self.lines {
            line.validate()?;
        }
        if !(self.log_mu_mean.is_finite()
            && self.log_pbar_mean.is_finite()
            && self.log_mu_sd.is_finite()
            && self.log_mu_sd >= 0.0
            && self.log_pbar_sd.is_finite()
            && self.log_pbar_sd >= 0.0)
        {
            return Err(Error::InvalidConfig(
                "log-scale locations must be finite and spreads non-negative".into(),
            ));
        }
        let (lo, hi) = self.mu_clip;
        if !(lo > 0.0 && lo < hi && hi < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "claim-probability clip must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"
            )));
        }
        if !(self.mu_pbar_correlation.is_finite() && self.mu_pbar_correlation.abs() <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "correlation must lie in [-1, 1], got {}",
                self.mu_pbar_correlation
            )));
        }
        for demo in &self.demographics {
            demo.validate()?;
        }
        let mut names: Vec<&str> = self.demographics.iter().map(|d| d.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("demographic names must be unique".into()));
        }
        Ok(())
    }
}

/// A generated market: one context per household, plus the per-line menus
/// when the design has several coverage lines (needed to persist portfolio
/// datasets, since the product context discards the line structure).
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub contexts: Vec<HouseholdContext>,
    pub demographic_names: Vec<String>,
    pub line_menus: Option<Vec<Vec<LineMenu>>>,
}

/// Draws a population from the design. Household `i` uses RNG stream `2 i`
/// of the seed; the output is independent of thread scheduling.
pub fn generate_population(spec: &PopulationSpec, seed: u64) -> Result<Population> {
    spec.validate()?;
    let rho = spec.mu_pbar_correlation;
    let per: Result<Vec<(HouseholdContext, Vec<LineMenu>)>> = (0..spec.n_households)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(2 * i as u64);
            let z_mu: f64 = rng.sample(StandardNormal);
            let z_indep: f64 = rng.sample(StandardNormal);
            let z_pbar = rho * z_mu + (1.0 - rho * rho).sqrt() * z_indep;
            let mu = (spec.log_mu_mean + spec.log_mu_sd * z_mu)
                .exp()
                .clamp(spec.mu_clip.0, spec.mu_clip.1);
            let pbar = (spec.log_pbar_mean + spec.log_pbar_sd * z_pbar).exp();
            let demographics: Vec<f64> =
                spec.demographics.iter().map(|d| d.draw(&mut rng)).collect();
            let lines: Vec<LineMenu> = spec
                .lines
                .iter()
                .map(|t| LineMenu {
                    claim_prob: (t.claim_scale * mu).clamp(spec.mu_clip.0, spec.mu_clip.1),
                    premiums: t
                        .multipliers
                        .iter()
                        .map(|&g| g * t.price_share * pbar + t.markup)
                        .collect(),
                    deductibles: t.deductibles.clone(),
                })
                .collect();
            let mut ctx = if lines.len() == 1 {
                HouseholdContext::single_line(
                    lines[0].claim_prob,
                    &lines[0].premiums,
                    &lines[0].deductibles,
                    demographics,
                )?
            } else {
                HouseholdContext::from_lines(&lines, demographics)?.0
            };
            ctx.pbar = Some(pbar);
            Ok((ctx, lines))
        })
        .collect();
    let per = per?;
    let multi_line = spec.lines.len() > 1;
    let (contexts, line_menus): (Vec<_>, Vec<_>) = per.into_iter().unzip();
    Ok(Population {
        contexts,
        demographic_names: spec.demographics.iter().map(|d| d.name().to_string()).collect(),
        line_menus: multi_line.then_some(line_menus),
    })
}

/// One simulated household outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatedChoice {
    pub choice: usize,
    pub nu: f64,
    pub consideration_set: u128,
}

/// Draws risk aversion, then a consideration set, then picks the highest
/// preference score within the set (lowest index on exact ties, matching the
/// first-best convention).
pub fn simulate_household(
    model: &ChoiceModel,
    ctx: &HouseholdContext,
    rng: &mut ChaCha12Rng,
) -> Result<SimulatedChoice> {
    let d = ctx.n_alternatives();
    let mech_size = model.mechanism.n_alternatives();
    if mech_size != 0 && mech_size != d {
        return Err(Error::InvalidConfig(format!(
            "mechanism covers {mech_size} alternatives but the menu has {d}"
        )));
    }
    let nu = model.dist.sample(rng);
    let premiums: Vec<f64> = ctx.alternatives.iter().map(|a| a.total_premium()).collect();
    let mctx = MechContext { premiums: &premiums, demographics: &ctx.demographics };
    let mask = model.mechanism.sample(nu, &mctx, rng)?;
    assert!(mask != 0, "consideration mechanism produced an empty set");
    let mut best: Option<(usize, f64)> = None;
    for j in 0..d {
        if mask & (1 << j) != 0 {
            let s = model.family.preference_score(nu, &ctx.alternatives[j])?;
            if best.map_or(true, |(_, bs)| s > bs) {
                best = Some((j, s));
            }
        }
    }
    let (choice, _) = best.expect("non-empty consideration set");
    Ok(SimulatedChoice { choice, nu, consideration_set: mask })
}

/// A simulated panel: the estimable dataset plus the sidecar truth that
/// estimation code must never see.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub dataset: Dataset,
    pub truth: Vec<TruthRecord>,
}

/// Simulates one choice per household. Household `i` uses RNG stream
/// `2 i + 1` of the seed (disjoint from the population streams), so the
/// panel is deterministic and independent of thread scheduling.
pub fn simulate_choices(
    model: &ChoiceModel,
    population: &Population,
    seed: u64,
) -> Result<SimulatedPanel> {
    let sims: Result<Vec<SimulatedChoice>> = population
        .contexts
        .par_iter()
        .enumerate()
        .map(|(i, ctx)| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(2 * i as u64 + 1);
            simulate_household(model, ctx, &mut rng)
        })
        .collect();
    let sims = sims?;
    let mut observations = Vec::with_capacity(sims.len());
    let mut truth = Vec::with_capacity(sims.len());
    for (i, (sim, ctx)) in sims.iter().zip(&population.contexts).enumerate() {
        let household_id = i as u64 + 1;
        observations.push(Observation {
            household_id,
            context: ctx.clone(),
            choice: sim.choice,
        });
        truth.push(TruthRecord {
            household_id,
            nu: sim.nu,
            consideration_set: sim.consideration_set,
        });
    }
    Ok(SimulatedPanel {
        dataset: Dataset {
            observations,
            demographic_names: population.demographic_names.clone(),
        },
        truth,
    })
}

impl Population {
    /// Rebuilds per-line portfolio rows for a dataset simulated from this
    /// population (only defined for multi-line designs).
    pub fn portfolio_observations(&self, dataset: &Dataset) -> Result<Vec<PortfolioObservation>> {
        let menus = self.line_menus.as_ref().ok_or_else(|| {
            Error::InvalidConfig(
                "single-line populations have no portfolio structure; write the standard CSV"
                    .into(),
            )
        })?;
        if dataset.observations.len() != menus.len() {
            return Err(Error::DataValidation(format!(
                "dataset has {} rows but the population has {} households",
                dataset.observations.len(),
                menus.len()
            )));
        }
        dataset
            .observations
            .iter()
            .zip(menus)
            .map(|(obs, lines)| {
                Ok(PortfolioObservation {
                    household_id: obs.household_id,
                    lines: lines.clone(),
                    demographics: obs.context.demographics.clone(),
                    choice: obs.choice,
                })
            })
            .collect()
    }
}

/// Pearson chi-square goodness of fit of observed counts against model
/// probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Tests observed choice counts against expected probabilities. Bins with
/// expected counts below five are pooled (a pooled bin still below five is
/// merged into the smallest remaining bin); at least two effective bins must
/// survive.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> Result<ChiSquareTest> {
    if counts.len() != probs.len() || counts.len() < 2 {
        return Err(Error::InvalidConfig(
            "need matching counts and probabilities over at least two bins".into(),
        ));
    }
    let mass: f64 = probs.iter().sum();
    if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (mass - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidConfig(format!(
            "bin probabilities must be in [0, 1] and sum to one (sum {mass})"
        )));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::InvalidConfig("cannot test an empty sample".into()));
    }
    const MIN_EXPECTED: f64 = 5.0;
    let mut cells: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut pooled = (0.0f64, 0.0f64);
    for (&c, &p) in counts.iter().zip(probs) {
        let expected = p * n as f64;
        if expected < MIN_EXPECTED {
            pooled.0 += c as f64;
            pooled.1 += expected;
        } else {
            cells.push((c as f64, expected));
        }
    }
    if pooled.1 > 0.0 {
        if pooled.1 >= MIN_EXPECTED {
            cells.push(pooled);
        } else if let Some(smallest) = cells
            .iter_mut()
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite expected counts"))
        {
            smallest.0 += pooled.0;
            smallest.1 += pooled.1;
        }
    }
    if cells.len() < 2 {
        return Err(Error::InvalidConfig(
            "fewer than two bins have usable expected counts; the test is degenerate".into(),
        ));
    }
    let statistic: f64 =
        cells.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len() - 1;
    let chi = ChiSquared::new(dof as f64)
        .map_err(|e| Error::Numeric(format!("chi-square distribution: {e}")))?;
    let p_value = 1.0 - chi.cdf(statistic);
    Ok(ChiSquareTest { statistic, dof, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consider::{BasicArc, Consideration};
    use crate::cutoffs::first_best;
    use crate::dist::RiskDistribution;
    use crate::utility::UtilityFamily;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
        for (&x, &y) in a.iter().zip(b) {
            cov += (x - ma) * (y - mb);
            va += (x - ma) * (x - ma);
            vb += (y - mb) * (y - mb);
        }
        cov / (va * vb).sqrt()
    }

    #[test]
    fn empty_population_is_allowed() {
        let pop = generate_population(&PopulationSpec::collision_default(0), 7).unwrap();
        assert!(pop.contexts.is_empty());
        assert!(pop.line_menus.is_none());
    }

    #[test]
    fn generation_is_deterministic_and_varies_across_households() {
        let spec = PopulationSpec::collision_default(50);
        let a = generate_population(&spec, 11).unwrap();
        let b = generate_population(&spec, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_population(&spec, 12).unwrap();
        assert_ne!(a, c);
        assert_ne!(a.contexts[0], a.contexts[1], "households must draw distinct menus");
    }

    #[test]
    fn correlation_knob_zero_means_independent_draws() {
        let mut spec = PopulationSpec::collision_default(100_000);
        spec.mu_pbar_correlation = 0.0;
        let pop = generate_population(&spec, 31).unwrap();
        let mus: Vec<f64> = pop.contexts.iter().map(|c| c.claim_prob()).collect();
        let pbars: Vec<f64> = pop.contexts.iter().map(|c| c.pbar.unwrap()).collect();
        let r = pearson(&mus, &pbars);
        assert!(r.abs() < 0.02, "sample correlation {r}");
    }

    #[test]
    fn default_calibration_matches_published_moments() {
        let pop = generate_population(&PopulationSpec::collision_default(100_000), 5).unwrap();
        let mus: Vec<f64> = pop.contexts.iter().map(|c| c.claim_prob()).collect();
        let pbars: Vec<f64> = pop.contexts.iter().map(|c| c.pbar.unwrap()).collect();
        let r = pearson(&mus, &pbars);
        assert!((r - 0.38).abs() < 0.02, "claim/price correlation {r}");

        // Premium ladder means.
        let n = pop.contexts.len() as f64;
        for (j, want) in [145.0, 187.0, 243.0, 285.0, 321.0].into_iter().enumerate() {
            let mean: f64 = pop.contexts.iter().map(|c| c.premium(j)).sum::<f64>() / n;
            assert!(
                (mean - want).abs() / want < 0.02,
                "alternative {j}: mean premium {mean}, target {want}"
            );
        }

        // Claim-probability dispersion: 99th over 1st percentile near 4.3.
        let mut sorted = mus.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ratio = crate::numeric::percentile_sorted(&sorted, 0.99)
            / crate::numeric::percentile_sorted(&sorted, 0.01);
        assert!((3.9..=4.75).contains(&ratio), "99/1 claim ratio {ratio}");
    }

    #[test]
    fn demographic_mix_draws_both_kinds() {
        let mut spec = PopulationSpec::collision_default(20_000);
        spec.demographics = vec![
            DemographicSpec::Continuous { name: "age".into(), mean: 45.0, sd: 12.0 },
            DemographicSpec::Categorical {
                name: "urban".into(),
                levels: vec![(0.0, 0.3), (1.0, 0.7)],
            },
        ];
        let pop = generate_population(&spec, 13).unwrap();
        assert_eq!(pop.demographic_names, vec!["age".to_string(), "urban".into()]);
        let n = pop.contexts.len() as f64;
        let age_mean: f64 = pop.contexts.iter().map(|c| c.demographics[0]).sum::<f64>() / n;
        assert!((age_mean - 45.0).abs() < 0.5, "age mean {age_mean}");
        let urban_share: f64 = pop.contexts.iter().map(|c| c.demographics[1]).sum::<f64>() / n;
        assert!((urban_share - 0.7).abs() < 0.02, "urban share {urban_share}");
        assert!(pop.contexts.iter().all(|c| c.demographics[1] == 0.0 || c.demographics[1] == 1.0));
    }

    #[test]
    fn bad_designs_are_rejected() {
        let mut two_lines = PopulationSpec::triplet_default(10);
        two_lines.lines.pop();
        assert!(generate_population(&two_lines, 0).is_err());

        let mut bad_clip = PopulationSpec::collision_default(10);
        bad_clip.mu_clip = (0.0, 0.5);
        assert!(generate_population(&bad_clip, 0).is_err());

        let mut bad_rho = PopulationSpec::collision_default(10);
        bad_rho.mu_pbar_correlation = 1.5;
        assert!(generate_population(&bad_rho, 0).is_err());

        let mut bad_cat = PopulationSpec::collision_default(10);
        bad_cat.demographics = vec![DemographicSpec::Categorical {
            name: "broken".into(),
            levels: vec![(0.0, 0.4), (1.0, 0.4)],
        }];
        assert!(generate_population(&bad_cat, 0).is_err());
    }

    fn table_model(nu_bar: f64) -> ChoiceModel {
        ChoiceModel {
            family: UtilityFamily::Ntd,
            dist: RiskDistribution::scaled_beta(1.70, 7.45, nu_bar).unwrap(),
            mechanism: Consideration::Basic(
                BasicArc::new(vec![1.0, 0.92, 0.206, 0.412, 0.059], 0).unwrap(),
            ),
        }
    }

    #[test]
    fn full_consideration_reproduces_the_first_best() {
        let spec = PopulationSpec::collision_default(500);
        let pop = generate_population(&spec, 3).unwrap();
        let model = ChoiceModel {
            family: UtilityFamily::Ntd,
            dist: RiskDistribution::scaled_beta(2.0, 5.0, 0.02).unwrap(),
            mechanism: Consideration::Basic(BasicArc::full_consideration(5).unwrap()),
        };
        let panel = simulate_choices(&model, &pop, 17).unwrap();
        for (obs, truth) in panel.dataset.observations.iter().zip(&panel.truth) {
            assert_eq!(truth.consideration_set, 0b11111);
            let fb = first_best(&model.family, &obs.context, truth.nu).unwrap().index;
            assert_eq!(obs.choice, fb);
        }
    }

    #[test]
    fn panels_are_deterministic_under_a_seed() {
        let pop = generate_population(&PopulationSpec::collision_default(300), 19).unwrap();
        let model = table_model(0.02);
        let a = simulate_choices(&model, &pop, 23).unwrap();
        let b = simulate_choices(&model, &pop, 23).unwrap();
        assert_eq!(a, b);
        let c = simulate_choices(&model, &pop, 24).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn simulated_frequencies_match_kernel_probabilities() {
        let nu_bar = 0.02;
        let model = table_model(nu_bar);
        let ctx = HouseholdContext::from_multipliers(
            0.08,
            243.0,
            &[145.0 / 243.0, 187.0 / 243.0, 1.0, 285.0 / 243.0, 321.0 / 243.0],
            0.0,
            &[1000.0, 500.0, 250.0, 200.0, 100.0],
            vec![],
        )
        .unwrap();
        let probs = model.choice_probabilities(&ctx, crate::choice::Kernel::Breakpoint).unwrap();
        let mut counts = vec![0u64; 5];
        for i in 0..200_000usize {
            let mut rng = ChaCha12Rng::seed_from_u64(99);
            rng.set_stream(2 * i as u64 + 1);
            let sim = simulate_household(&model, &ctx, &mut rng).unwrap();
            counts[sim.choice] += 1;
        }
        let test = chi_square_gof(&counts, &probs).unwrap();
        assert!(
            test.p_value > 1e-3,
            "chi-square {} (dof {}) has p = {}",
            test.statistic,
            test.dof,
            test.p_value
        );
    }

    #[test]
    fn choosing_within_the_set_equals_utility_with_knockout_shocks() {
        // The consideration route (argmax within a sampled set) and the
        // random-utility route (argmax of score plus a shock that is zero
        // for included alternatives and minus infinity otherwise) consume
        // the same draws, so they must agree household by household.
        let nu_bar = 0.02;
        let model = table_model(nu_bar);
        let alphas = [1.0, 0.92, 0.206, 0.412, 0.059];
        let pop = generate_population(&PopulationSpec::collision_default(2_000), 41).unwrap();
        for (i, ctx) in pop.contexts.iter().enumerate() {
            let mut rng = ChaCha12Rng::seed_from_u64(77);
            rng.set_stream(2 * i as u64 + 1);
            let sim = simulate_household(&model, ctx, &mut rng).unwrap();

            let mut rng = ChaCha12Rng::seed_from_u64(77);
            rng.set_stream(2 * i as u64 + 1);
            let nu = model.dist.sample(&mut rng);
            let mut best: Option<(usize, f64)> = None;
            for (j, &alpha) in alphas.iter().enumerate() {
                let included = alpha == 1.0 || rng.random::<f64>() < alpha;
                if !included {
                    continue; // utility score + (-inf) can never win
                }
                let s = model.family.preference_score(nu, &ctx.alternatives[j]).unwrap();
                if best.map_or(true, |(_, bs)| s > bs) {
                    best = Some((j, s));
                }
            }
            assert_eq!(sim.choice, best.unwrap().0, "household {i}");
            assert_eq!(sim.nu, nu, "household {i}");
        }
    }

    #[test]
    fn triplet_design_runs_end_to_end() {
        let spec = PopulationSpec::triplet_default(300);
        assert_eq!(spec.menu_size(), 120);
        let pop = generate_population(&spec, 29).unwrap();
        assert_eq!(pop.contexts[0].n_alternatives(), 120);
        assert!(pop.line_menus.is_some());

        let mut alphas = vec![0.35; 120];
        alphas[0] = 1.0;
        let model = ChoiceModel {
            family: UtilityFamily::Ntd,
            dist: RiskDistribution::scaled_beta(1.70, 7.45, 0.02).unwrap(),
            mechanism: Consideration::Basic(BasicArc::new(alphas, 0).unwrap()),
        };
        let panel = simulate_choices(&model, &pop, 31).unwrap();
        assert!(panel.dataset.observations.iter().all(|o| o.choice < 120));
        assert!(panel.truth.iter().all(|t| t.consideration_set & 1 == 1));

        // Portfolio rows rebuild the exact product contexts.
        let rows = pop.portfolio_observations(&panel.dataset).unwrap();
        for (row, obs) in rows.iter().zip(&panel.dataset.observations).take(10) {
            let rebuilt = row.to_observation().unwrap();
            assert_eq!(rebuilt.choice, obs.choice);
            assert_eq!(rebuilt.context.alternatives, obs.context.alternatives);
        }
    }

    #[test]
    fn chi_square_helper_handles_pooling_and_extremes() {
        // Perfect agreement: statistic zero, p-value one.
        let t = chi_square_gof(&[250, 250, 500], &[0.25, 0.25, 0.5]).unwrap();
        assert!(t.statistic < 1e-12 && (t.p_value - 1.0).abs() < 1e-12);
        assert_eq!(t.dof, 2);

        // Gross mismatch: essentially zero p-value.
        let t = chi_square_gof(&[900, 50, 50], &[0.1, 0.1, 0.8]).unwrap();
        assert!(t.p_value < 1e-10, "p = {}", t.p_value);

        // A negligible-probability bin is pooled away, reducing the dof.
        let t = chi_square_gof(&[500, 499, 1], &[0.5, 0.5 - 1e-9, 1e-9]).unwrap();
        assert_eq!(t.dof, 1);

        // Degenerate setups are refused.
        assert!(chi_square_gof(&[1, 1], &[1e-9, 1.0 - 1e-9]).is_err());
        assert!(chi_square_gof(&[0, 0], &[0.5, 0.5]).is_err());
    }
}
