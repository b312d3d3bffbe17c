//! Risk preferences: CARA, CRRA, and a quadratic mean–variance family
//! ("negligible third derivative", NTD), plus expected utilities, ordinal
//! preference scores, and certainty equivalents for deductible lotteries.

use crate::context::{Alternative, DeductibleLottery};
use crate::error::{Error, Result};
use crate::numeric::logsumexp2;
use serde::{Deserialize, Serialize};

/// A one-parameter utility family indexed by the risk-aversion parameter
/// `nu`. `nu = 0` is risk neutrality; larger `nu` is more risk averse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum UtilityFamily {
    /// Constant absolute risk aversion, `u(y) = (1 - exp(-nu y)) / nu`.
    /// Choices are invariant to `wealth`; it only shifts cardinal levels
    /// (which matter for additive-noise models).
    Cara {
        #[serde(default)]
        wealth: f64,
    },
    /// Constant relative risk aversion, `u(y) = y^(1 - nu) / (1 - nu)`
    /// (`ln y` at `nu = 1`). Requires positive final wealth in every state.
    Crra { wealth: f64 },
    /// Mean–variance valuation of out-of-pocket cost: a lottery with cost
    /// mean `m` and variance `v` is worth `-(m + nu v / 2)`. Defined directly
    /// at the lottery level; exact for quadratic utility up to terms the
    /// family by construction neglects.
    Ntd,
}

impl UtilityFamily {
    /// CARA with wealth normalized to zero.
    pub fn cara() -> Self {
        UtilityFamily::Cara { wealth: 0.0 }
    }

    /// Utility of a deterministic money amount `y`.
    ///
    /// Strictly increasing in `y` on each family's domain (for NTD, on
    /// `y <= 0` when `nu >= 0`, the cost side it is built for).
    pub fn bernoulli_utility(&self, nu: f64, y: f64) -> Result<f64> {
        match *self {
            UtilityFamily::Cara { .. } => {
                if nu == 0.0 {
                    Ok(y)
                } else {
                    Ok(-(-nu * y).exp_m1() / nu)
                }
            }
            UtilityFamily::Crra { .. } => {
                if y <= 0.0 {
                    return Err(Error::Domain(format!(
                        "CRRA utility requires positive final wealth, got y = {y}"
                    )));
                }
                if nu == 1.0 {
                    Ok(y.ln())
                } else {
                    Ok(y.powf(1.0 - nu) / (1.0 - nu))
                }
            }
            UtilityFamily::Ntd => Ok(y - 0.5 * nu * y * y),
        }
    }

    /// Expected utility of a deductible lottery with claim probability `mu`.
    ///
    /// CARA and CRRA integrate `bernoulli_utility` over final wealth; NTD is
    /// its defining mean–variance form (for the example lottery p = 100,
    /// d = 500, mu = 0.1, nu = 0.002 this gives -172.5).
    pub fn expected_utility(&self, nu: f64, lottery: &DeductibleLottery, mu: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidConfig(format!("claim probability {mu} outside [0, 1]")));
        }
        let (p, d) = (lottery.premium, lottery.deductible);
        match *self {
            UtilityFamily::Cara { wealth } | UtilityFamily::Crra { wealth } => {
                let u_good = self.bernoulli_utility(nu, wealth - p)?;
                let u_bad = self.bernoulli_utility(nu, wealth - p - d)?;
                Ok((1.0 - mu) * u_good + mu * u_bad)
            }
            UtilityFamily::Ntd => {
                let mean = p + mu * d;
                let var = mu * (1.0 - mu) * d * d;
                Ok(-(mean + 0.5 * nu * var))
            }
        }
    }

    /// Expected utility of a (possibly multi-leg) alternative, valuing legs
    /// additively. Exact for NTD with independent legs; for CARA the
    /// additive value ranks alternatives identically to the exact joint
    /// valuation (log moment-generating functions add across independent
    /// legs), though cardinal levels differ.
    pub fn alternative_expected_utility(&self, nu: f64, alt: &Alternative) -> Result<f64> {
        let mut total = 0.0;
        for leg in &alt.legs {
            total += self.expected_utility(nu, &leg.lottery, leg.claim_prob)?;
        }
        Ok(total)
    }

    /// Certainty equivalent: the sure payment `ce` a decision maker with
    /// risk aversion `nu` finds exactly as bad as facing the lottery.
    /// Lies in `[p, p + d]`, increases with `nu`, and tends to `p + mu d`
    /// as `nu -> 0`.
    pub fn certainty_equivalent(&self, nu: f64, lottery: &DeductibleLottery, mu: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::InvalidConfig(format!("claim probability {mu} outside [0, 1]")));
        }
        let (p, d) = (lottery.premium, lottery.deductible);
        match *self {
            UtilityFamily::Cara { .. } => Ok(p + bernoulli_cgf_over_t(nu, d, mu)),
            UtilityFamily::Ntd => Ok(p + mu * d + 0.5 * nu * mu * (1.0 - mu) * d * d),
            UtilityFamily::Crra { wealth } => {
                if d == 0.0 {
                    return Ok(p);
                }
                let y_good = wealth - p;
                let y_bad = y_good - d;
                if y_bad <= 0.0 {
                    return Err(Error::Domain(format!(
                        "CRRA requires wealth above the worst-case outlay; wealth = {wealth} \
                         cannot absorb p + d = {}",
                        p + d
                    )));
                }
                // ce = wealth - exp(ln E[y^t] / t) with t = 1 - nu, evaluated
                // in log space so large |t| neither overflows nor underflows,
                // with a cumulant series across the t = 0 (log-utility)
                // singularity.
                let (a, b) = (y_good.ln(), y_bad.ln());
                let t = 1.0 - nu;
                let log_certain = if t.abs() * (a - b) < 1e-3 {
                    let mean = (1.0 - mu) * a + mu * b;
                    let k2 = mu * (1.0 - mu) * (a - b) * (a - b);
                    let k3 = mu * (1.0 - mu) * (1.0 - 2.0 * mu) * (b - a) * (b - a) * (b - a);
                    mean + 0.5 * t * k2 + t * t * k3 / 6.0
                } else {
                    logsumexp2((1.0 - mu).ln() + t * a, mu.ln() + t * b) / t
                };
                Ok(wealth - log_certain.exp())
            }
        }
    }

    /// Certainty equivalent of an alternative, summing legs (exact for NTD,
    /// and for CARA under independent legs). Multi-leg CRRA alternatives are
    /// rejected: relative risk aversion does not separate across lines.
    pub fn alternative_certainty_equivalent(&self, nu: f64, alt: &Alternative) -> Result<f64> {
        if matches!(self, UtilityFamily::Crra { .. }) && alt.legs.len() > 1 {
            return Err(Error::InvalidConfig(
                "CRRA certainty equivalents are only defined for single-line alternatives".into(),
            ));
        }
        let mut total = 0.0;
        for leg in &alt.legs {
            total += self.certainty_equivalent(nu, &leg.lottery, leg.claim_prob)?;
        }
        Ok(total)
    }

    /// Ordinal preference score: for a fixed `nu`, `score(a) > score(b)` iff
    /// the decision maker strictly prefers `a` to `b`.
    ///
    /// Evaluated in a normalized form that stays finite and continuous
    /// across the whole sweep range (including `nu = 0` for CARA/NTD and
    /// `nu = 1` for CRRA, where raw expected utility is singular or
    /// overflow-prone), which is what the cutoff solver differences.
    pub fn preference_score(&self, nu: f64, alt: &Alternative) -> Result<f64> {
        match *self {
            UtilityFamily::Cara { .. } => {
                // EU = (1 - exp(-nu w) exp(a)) / nu with
                // a = sum_legs [nu p + K_leg(nu)]; -a / nu is monotone in EU
                // for every sign of nu.
                let mut s = 0.0;
                for leg in &alt.legs {
                    s -= leg.lottery.premium
                        + bernoulli_cgf_over_t(nu, leg.lottery.deductible, leg.claim_prob);
                }
                Ok(s)
            }
            UtilityFamily::Ntd => {
                Ok(-(alt.expected_cost() + 0.5 * nu * alt.risk_mass()))
            }
            UtilityFamily::Crra { wealth } => crra_score(wealth, nu, alt),
        }
    }
}

/// `K(t) / t` where `K` is the cumulant generating function of a Bernoulli
/// cost (0 with prob `1 - mu`, `d` with prob `mu`) at `t = nu`.
///
/// This is the certainty-equivalent excess over the premium for CARA, and
/// the building block of the CARA preference score. A three-term cumulant
/// series takes over for small `|nu d|`, where the direct log expression
/// loses precision to cancellation.
fn bernoulli_cgf_over_t(nu: f64, d: f64, mu: f64) -> f64 {
    let t = nu * d;
    if t.abs() < 1e-3 {
        let k2 = mu * (1.0 - mu) * d * d;
        let k3 = mu * (1.0 - mu) * (1.0 - 2.0 * mu) * d * d * d;
        mu * d + 0.5 * nu * k2 + nu * nu * k3 / 6.0
    } else {
        logsumexp2((1.0 - mu).ln(), mu.ln() + t) / nu
    }
}

/// CRRA ordinal score `(ln sum_legs E[y^(1-nu)] - ln L) / (1 - nu)`,
/// computed in log space so extreme `nu` neither overflows nor flips sign,
/// with a series expansion across the `nu = 1` singularity.
fn crra_score(wealth: f64, nu: f64, alt: &Alternative) -> Result<f64> {
    let t = 1.0 - nu;
    let n_legs = alt.legs.len() as f64;
    let mut log_terms = Vec::with_capacity(2 * alt.legs.len());
    let mut s1 = 0.0; // sum of per-leg means of ln(final wealth)
    let mut s2 = 0.0; // sum of per-leg (variance + mean^2) of ln(final wealth)
    for leg in &alt.legs {
        let y_good = wealth - leg.lottery.premium;
        let y_bad = y_good - leg.lottery.deductible;
        if y_bad <= 0.0 {
            return Err(Error::Domain(format!(
                "CRRA requires wealth above the worst-case outlay; wealth = {wealth} cannot absorb p + d = {}",
                leg.lottery.premium + leg.lottery.deductible
            )));
        }
        let (a, b) = (y_good.ln(), y_bad.ln());
        let mu = leg.claim_prob;
        let mean = (1.0 - mu) * a + mu * b;
        let var = mu * (1.0 - mu) * (a - b) * (a - b);
        s1 += mean;
        s2 += var + mean * mean;
        log_terms.push((1.0 - mu).ln() + t * a);
        log_terms.push(mu.ln() + t * b);
    }
    if t.abs() < 1e-4 {
        // (LSE - ln L) / t -> S1/L + t (S2 / 2L - S1^2 / 2L^2) near nu = 1.
        Ok(s1 / n_legs + t * (s2 / (2.0 * n_legs) - s1 * s1 / (2.0 * n_legs * n_legs)))
    } else {
        Ok((crate::numeric::logsumexp(&log_terms) - n_legs.ln()) / t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::LotteryLeg;
    use approx::assert_relative_eq;

    fn lot(p: f64, d: f64) -> DeductibleLottery {
        DeductibleLottery::new(p, d).unwrap()
    }

    #[test]
    fn cara_bernoulli_matches_closed_form() {
        let fam = UtilityFamily::cara();
        // (1 - e^{-1}) / 0.01
        assert_relative_eq!(
            fam.bernoulli_utility(0.01, 100.0).unwrap(),
            (1.0 - (-1.0f64).exp()) / 0.01,
            max_relative = 1e-14
        );
        assert_eq!(fam.bernoulli_utility(0.0, 42.5).unwrap(), 42.5);
    }

    #[test]
    fn crra_bernoulli_matches_closed_form() {
        let fam = UtilityFamily::Crra { wealth: 0.0 };
        assert_relative_eq!(fam.bernoulli_utility(2.0, 4.0).unwrap(), -0.25);
        assert_relative_eq!(fam.bernoulli_utility(1.0, std::f64::consts::E).unwrap(), 1.0);
        assert!(fam.bernoulli_utility(2.0, 0.0).is_err());
        assert!(fam.bernoulli_utility(2.0, -3.0).is_err());
    }

    #[test]
    fn ntd_expected_utility_matches_mean_variance() {
        // -(100 + 0.1*500) - 0.001 * 0.1*0.9*500^2 = -172.5
        let eu = UtilityFamily::Ntd.expected_utility(0.002, &lot(100.0, 500.0), 0.1).unwrap();
        assert_relative_eq!(eu, -172.5, max_relative = 1e-14);
    }

    #[test]
    fn expected_utility_integrates_bernoulli_for_cara_and_crra() {
        for fam in [UtilityFamily::Cara { wealth: 2_000.0 }, UtilityFamily::Crra { wealth: 30_000.0 }] {
            for nu in [0.0, 0.003, 0.9, 1.0, 2.5] {
                // CRRA at CARA-scale nu and vice versa both stay in domain here.
                let eu = fam.expected_utility(nu, &lot(120.0, 400.0), 0.07).unwrap();
                let w = match fam {
                    UtilityFamily::Cara { wealth } | UtilityFamily::Crra { wealth } => wealth,
                    UtilityFamily::Ntd => unreachable!(),
                };
                let by_hand = 0.93 * fam.bernoulli_utility(nu, w - 120.0).unwrap()
                    + 0.07 * fam.bernoulli_utility(nu, w - 520.0).unwrap();
                assert_relative_eq!(eu, by_hand, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn cara_certainty_equivalent_matches_log_expression() {
        let fam = UtilityFamily::cara();
        let ce = fam.certainty_equivalent(0.005, &lot(100.0, 500.0), 0.1).unwrap();
        let oracle = (0.9 * 0.5f64.exp() + 0.1 * 3.0f64.exp()).ln() / 0.005;
        assert_relative_eq!(ce, oracle, max_relative = 1e-12);
    }

    #[test]
    fn certainty_equivalent_limits_and_bounds() {
        let l = lot(100.0, 500.0);
        for fam in [
            UtilityFamily::cara(),
            UtilityFamily::Ntd,
            UtilityFamily::Crra { wealth: 50_000.0 },
        ] {
            // Risk-neutral limit p + mu d.
            let ce0 = fam.certainty_equivalent(1e-12, &l, 0.1).unwrap();
            assert_relative_eq!(ce0, 150.0, max_relative = 1e-6);
            // Monotone in nu and inside [p, p + d].
            let mut prev = ce0;
            for nu in [1e-4, 1e-3, 5e-3, 2e-2] {
                // CRRA at these tiny relative-risk-aversion values is nearly
                // risk neutral; scale its sweep up to keep the test sharp.
                let nu_eff = if matches!(fam, UtilityFamily::Crra { .. }) { nu * 1e4 } else { nu };
                let ce = fam.certainty_equivalent(nu_eff, &l, 0.1).unwrap();
                assert!(ce > prev, "{fam:?}: ce not increasing in nu");
                assert!(ce >= 100.0 && ce <= 600.0);
                prev = ce;
            }
            // Zero deductible: ce is exactly the premium.
            assert_eq!(fam.certainty_equivalent(0.01, &lot(80.0, 0.0), 0.1).unwrap(), 80.0);
        }
    }

    #[test]
    fn certainty_equivalent_is_consistent_with_expected_utility() {
        // Facing the sure payment `ce` must give the same expected utility
        // as facing the lottery.
        let l = lot(130.0, 350.0);
        let cases = [
            (UtilityFamily::Cara { wealth: 0.0 }, 0.008),
            (UtilityFamily::Cara { wealth: 4_000.0 }, 0.008),
            (UtilityFamily::Ntd, 0.015),
            (UtilityFamily::Crra { wealth: 20_000.0 }, 3.0),
        ];
        for (fam, nu) in cases {
            let ce = fam.certainty_equivalent(nu, &l, 0.2).unwrap();
            let eu_lottery = fam.expected_utility(nu, &l, 0.2).unwrap();
            let eu_sure = fam.expected_utility(nu, &lot(ce, 0.0), 0.2).unwrap();
            assert_relative_eq!(eu_sure, eu_lottery, max_relative = 1e-9);
        }
    }

    #[test]
    fn bernoulli_utilities_are_strictly_increasing() {
        // Grids keep |nu y| <= 20 so CARA increments stay representable in
        // f64 (beyond that the exponential saturates and neighbors collide).
        let grids: [(UtilityFamily, Vec<f64>, Vec<f64>); 3] = [
            (UtilityFamily::cara(), vec![-0.005, 0.0, 0.004, 0.01], (-20..=20).map(|i| i as f64 * 100.0).collect()),
            (UtilityFamily::Crra { wealth: 0.0 }, vec![0.0, 0.5, 1.0, 2.0, 4.0], (1..=40).map(|i| i as f64 * 50.0).collect()),
            (UtilityFamily::Ntd, vec![0.0, 0.005, 0.02, 0.04], (-40..=0).map(|i| i as f64 * 50.0).collect()),
        ];
        for (fam, nus, ys) in grids {
            for &nu in &nus {
                for w in ys.windows(2) {
                    let lo = fam.bernoulli_utility(nu, w[0]).unwrap();
                    let hi = fam.bernoulli_utility(nu, w[1]).unwrap();
                    assert!(hi > lo, "{fam:?} not increasing at nu = {nu}, y = {}", w[0]);
                }
            }
        }
    }

    #[test]
    fn preference_score_ranks_like_expected_utility() {
        let alts = [
            Alternative::single(100.0, 500.0, 0.1).unwrap(),
            Alternative::single(140.0, 250.0, 0.1).unwrap(),
            Alternative::single(180.0, 100.0, 0.1).unwrap(),
        ];
        let cases = [
            (UtilityFamily::cara(), vec![0.0, 1e-9, 0.0004, 0.002, 0.01, -0.004]),
            (UtilityFamily::Ntd, vec![0.0, 0.001, 0.0178, -0.002]),
            (UtilityFamily::Crra { wealth: 40_000.0 }, vec![0.0, 0.999, 1.0, 1.001, 8.0, 60.0]),
        ];
        for (fam, nus) in cases {
            for &nu in &nus {
                for a in &alts {
                    for b in &alts {
                        let su = fam.preference_score(nu, a).unwrap()
                            - fam.preference_score(nu, b).unwrap();
                        let eu = fam.alternative_expected_utility(nu, a).unwrap()
                            - fam.alternative_expected_utility(nu, b).unwrap();
                        assert_eq!(
                            su > 0.0,
                            eu > 0.0,
                            "{fam:?} score/eu ranking mismatch at nu = {nu}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn cara_score_is_continuous_through_zero() {
        let fam = UtilityFamily::cara();
        let alt = Alternative::single(100.0, 500.0, 0.1).unwrap();
        // The series/direct switchover sits at |nu d| = 1e-3; probing a hair
        // on each side of it isolates branch disagreement from the score's
        // own (steep) slope in nu.
        let boundary = 1e-3 / 500.0;
        for sign in [-1.0, 1.0] {
            let below = fam.preference_score(sign * boundary * (1.0 - 1e-9), &alt).unwrap();
            let above = fam.preference_score(sign * boundary * (1.0 + 1e-9), &alt).unwrap();
            assert!(
                (below - above).abs() < 1e-6,
                "jump across series boundary at sign {sign}: {below} vs {above}"
            );
        }
        // At nu = 0 the score is minus the expected cost, and nearby values
        // approach it with the mean-variance slope.
        assert_relative_eq!(fam.preference_score(0.0, &alt).unwrap(), -150.0, max_relative = 1e-12);
        let k2 = 0.1 * 0.9 * 500.0 * 500.0;
        let k3 = 0.1 * 0.9 * 0.8 * 500.0 * 500.0 * 500.0;
        for nu in [-1e-7, 1e-7] {
            let s = fam.preference_score(nu, &alt).unwrap();
            assert_relative_eq!(s, -(150.0 + 0.5 * nu * k2 + nu * nu * k3 / 6.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn crra_score_is_continuous_through_one() {
        let fam = UtilityFamily::Crra { wealth: 25_000.0 };
        let alt = Alternative::single(100.0, 500.0, 0.1).unwrap();
        let base = fam.preference_score(1.0, &alt).unwrap();
        for dn in [1e-7, 1e-5, 9e-5, 1.1e-4, 1e-3] {
            for sign in [-1.0, 1.0] {
                let s = fam.preference_score(1.0 + sign * dn, &alt).unwrap();
                assert!((s - base).abs() < 1e-2 * dn.max(1e-6) / 1e-6, "discontinuity near nu=1");
                assert!((s - base).abs() < 1.0);
            }
        }
    }

    #[test]
    fn multi_leg_scores_add_up_consistently() {
        let joint = Alternative {
            legs: vec![
                LotteryLeg::new(100.0, 500.0, 0.1).unwrap(),
                LotteryLeg::new(60.0, 250.0, 0.05).unwrap(),
            ],
        };
        // NTD: additive valuation is exact.
        let score = UtilityFamily::Ntd.preference_score(0.004, &joint).unwrap();
        let eu = UtilityFamily::Ntd.alternative_expected_utility(0.004, &joint).unwrap();
        assert_relative_eq!(score, eu, max_relative = 1e-12);
        // CARA: additive certainty equivalents.
        let fam = UtilityFamily::cara();
        let ce = fam.alternative_certainty_equivalent(0.006, &joint).unwrap();
        let by_legs: f64 = joint
            .legs
            .iter()
            .map(|l| fam.certainty_equivalent(0.006, &l.lottery, l.claim_prob).unwrap())
            .sum();
        assert_relative_eq!(ce, by_legs, max_relative = 1e-13);
        // CRRA refuses multi-leg certainty equivalents.
        assert!(UtilityFamily::Crra { wealth: 1e5 }.alternative_certainty_equivalent(2.0, &joint).is_err());
    }
}
