//! Menu and household primitives: deductible lotteries, alternatives
//! (possibly spanning several coverage lines), and per-household contexts.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A binary deductible lottery: pay `premium` for sure; with the claim
/// probability attached at the usage site, additionally pay `deductible`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeductibleLottery {
    pub premium: f64,
    pub deductible: f64,
}

impl DeductibleLottery {
    pub fn new(premium: f64, deductible: f64) -> Result<Self> {
        if !premium.is_finite() || !deductible.is_finite() || deductible < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lottery requires finite premium and non-negative deductible, got p = {premium}, d = {deductible}"
            )));
        }
        Ok(Self { premium, deductible })
    }
}

/// One coverage line of an alternative: a deductible lottery together with
/// the claim probability governing its bad outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LotteryLeg {
    pub lottery: DeductibleLottery,
    pub claim_prob: f64,
}

impl LotteryLeg {
    pub fn new(premium: f64, deductible: f64, claim_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&claim_prob) {
            return Err(Error::InvalidConfig(format!(
                "claim probability must lie in [0, 1], got {claim_prob}"
            )));
        }
        Ok(Self { lottery: DeductibleLottery::new(premium, deductible)?, claim_prob })
    }

    /// Expected out-of-pocket cost `p + mu * d`.
    pub fn expected_cost(&self) -> f64 {
        self.lottery.premium + self.claim_prob * self.lottery.deductible
    }

    /// Cost variance `mu (1 - mu) d^2`.
    pub fn cost_variance(&self) -> f64 {
        self.claim_prob * (1.0 - self.claim_prob) * self.lottery.deductible * self.lottery.deductible
    }
}

/// A menu alternative. Single-line menus have one leg; bundled (e.g.
/// three-coverage) menus carry one leg per line, with independent claims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub legs: Vec<LotteryLeg>,
}

impl Alternative {
    pub fn single(premium: f64, deductible: f64, claim_prob: f64) -> Result<Self> {
        Ok(Self { legs: vec![LotteryLeg::new(premium, deductible, claim_prob)?] })
    }

    pub fn total_premium(&self) -> f64 {
        self.legs.iter().map(|l| l.lottery.premium).sum()
    }

    /// Total expected out-of-pocket cost across legs.
    pub fn expected_cost(&self) -> f64 {
        self.legs.iter().map(LotteryLeg::expected_cost).sum()
    }

    /// Total cost variance across (independent) legs; the menu is enumerated
    /// in decreasing order of this quantity, riskiest first.
    pub fn risk_mass(&self) -> f64 {
        self.legs.iter().map(LotteryLeg::cost_variance).sum()
    }
}

/// Everything the model needs to know about one household: its menu (in
/// riskiest-first order) and its demographic covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HouseholdContext {
    pub alternatives: Vec<Alternative>,
    /// Covariates entering demographic indices (an intercept is implicit in
    /// every index; do not include a constant column).
    pub demographics: Vec<f64>,
    /// Base price level, retained when premiums came from multipliers.
    pub pbar: Option<f64>,
}

impl HouseholdContext {
    /// Builds a single-line context from explicit premiums.
    ///
    /// Deductibles must be strictly decreasing (riskiest alternative first)
    /// and the claim probability strictly inside (0, 1).
    pub fn single_line(
        claim_prob: f64,
        premiums: &[f64],
        deductibles: &[f64],
        demographics: Vec<f64>,
    ) -> Result<Self> {
        if premiums.len() != deductibles.len() || premiums.is_empty() {
            return Err(Error::InvalidConfig(
                "premiums and deductibles must be non-empty and of equal length".into(),
            ));
        }
        if !(claim_prob > 0.0 && claim_prob < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "claim probability must lie strictly inside (0, 1), got {claim_prob}"
            )));
        }
        if deductibles.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidConfig(
                "deductibles must be strictly decreasing (riskiest alternative first)".into(),
            ));
        }
        let alternatives = premiums
            .iter()
            .zip(deductibles)
            .map(|(&p, &d)| Alternative::single(p, d, claim_prob))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { alternatives, demographics, pbar: None })
    }

    /// Builds a single-line context with premiums `g_j * pbar + delta`.
    pub fn from_multipliers(
        claim_prob: f64,
        pbar: f64,
        multipliers: &[f64],
        delta: f64,
        deductibles: &[f64],
        demographics: Vec<f64>,
    ) -> Result<Self> {
        if pbar <= 0.0 || !pbar.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "base price must be positive and finite, got {pbar}"
            )));
        }
        let premiums: Vec<f64> = multipliers.iter().map(|&g| g * pbar + delta).collect();
        let mut ctx = Self::single_line(claim_prob, &premiums, deductibles, demographics)?;
        ctx.pbar = Some(pbar);
        Ok(ctx)
    }

    /// Builds a context from pre-assembled (possibly multi-leg) alternatives.
    ///
    /// Alternatives must already be enumerated riskiest first: non-increasing
    /// `risk_mass`, ties broken by non-decreasing expected cost.
    pub fn portfolio(alternatives: Vec<Alternative>, demographics: Vec<f64>) -> Result<Self> {
        if alternatives.is_empty() {
            return Err(Error::InvalidConfig("menu must contain at least one alternative".into()));
        }
        for pair in alternatives.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let ordered = a.risk_mass() > b.risk_mass()
                || (a.risk_mass() == b.risk_mass() && a.expected_cost() <= b.expected_cost());
            if !ordered {
                return Err(Error::InvalidConfig(
                    "alternatives must be sorted riskiest first (decreasing cost variance)".into(),
                ));
            }
        }
        Ok(Self { alternatives, demographics, pbar: None })
    }

    /// Builds a product menu over several coverage lines: one alternative
    /// per combination of per-line choices, with one leg per line.
    /// Combinations are enumerated riskiest first (decreasing total cost
    /// variance, ties by increasing expected cost, then by combination
    /// order), and the mapping from product index to per-line indices is
    /// returned alongside.
    pub fn from_lines(
        lines: &[LineMenu],
        demographics: Vec<f64>,
    ) -> Result<(Self, Vec<Vec<usize>>)> {
        if lines.is_empty() {
            return Err(Error::InvalidConfig("need at least one coverage line".into()));
        }
        let mut size = 1usize;
        for line in lines {
            line.validate()?;
            size = size.saturating_mul(line.premiums.len());
        }
        if size > 128 {
            return Err(Error::InvalidConfig(format!(
                "product menu has {size} alternatives; at most 128 are supported"
            )));
        }
        let mut combos: Vec<Vec<usize>> = vec![vec![]];
        for line in lines {
            let mut next = Vec::with_capacity(combos.len() * line.premiums.len());
            for combo in &combos {
                for j in 0..line.premiums.len() {
                    let mut c = combo.clone();
                    c.push(j);
                    next.push(c);
                }
            }
            combos = next;
        }
        let mut entries: Vec<(Alternative, Vec<usize>)> = combos
            .into_iter()
            .map(|combo| {
                let legs = combo
                    .iter()
                    .zip(lines)
                    .map(|(&j, line)| {
                        LotteryLeg::new(line.premiums[j], line.deductibles[j], line.claim_prob)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((Alternative { legs }, combo))
            })
            .collect::<Result<Vec<_>>>()?;
        entries.sort_by(|a, b| {
            b.0.risk_mass()
                .partial_cmp(&a.0.risk_mass())
                .expect("finite risk mass")
                .then(
                    a.0.expected_cost()
                        .partial_cmp(&b.0.expected_cost())
                        .expect("finite expected cost"),
                )
                .then(a.1.cmp(&b.1))
        });
        let (alternatives, mapping): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let ctx = Self::portfolio(alternatives, demographics)?;
        Ok((ctx, mapping))
    }

    pub fn n_alternatives(&self) -> usize {
        self.alternatives.len()
    }

    /// Total premium of alternative `j`.
    pub fn premium(&self, j: usize) -> f64 {
        self.alternatives[j].total_premium()
    }

    /// Deductible of alternative `j` (single-line contexts).
    pub fn deductible(&self, j: usize) -> f64 {
        self.alternatives[j].legs[0].lottery.deductible
    }

    /// Claim probability (single-line contexts).
    pub fn claim_prob(&self) -> f64 {
        self.alternatives[0].legs[0].claim_prob
    }
}

/// One coverage line of a multi-line menu.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineMenu {
    pub claim_prob: f64,
    pub premiums: Vec<f64>,
    pub deductibles: Vec<f64>,
}

impl LineMenu {
    fn validate(&self) -> Result<()> {
        // Reuse the single-line checks (ordering, claim probability, sizes).
        HouseholdContext::single_line(self.claim_prob, &self.premiums, &self.deductibles, vec![])
            .map(|_| ())
    }
}
