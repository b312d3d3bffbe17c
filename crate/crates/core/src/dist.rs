//! Population distribution of the risk-aversion parameter.
//!
//! Risk aversion lives on a bounded interval `[0, nu_bar]`. The workhorse
//! family is a Beta distribution rescaled to that interval; the uniform
//! special case gets its own closed forms.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, Continuous, ContinuousCDF};

/// Distribution of risk aversion over `[0, nu_bar]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RiskDistribution {
    /// `nu / nu_bar ~ Beta(alpha, beta)`.
    ScaledBeta { alpha: f64, beta: f64, nu_bar: f64 },
    /// Uniform on `[0, nu_bar]`.
    Uniform { nu_bar: f64 },
}

impl RiskDistribution {
    pub fn scaled_beta(alpha: f64, beta: f64, nu_bar: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "Beta shape parameters must be positive, got ({alpha}, {beta})"
            )));
        }
        check_nu_bar(nu_bar)?;
        Ok(Self::ScaledBeta { alpha, beta, nu_bar })
    }

    pub fn uniform(nu_bar: f64) -> Result<Self> {
        check_nu_bar(nu_bar)?;
        Ok(Self::Uniform { nu_bar })
    }

    pub fn nu_bar(&self) -> f64 {
        match self {
            Self::ScaledBeta { nu_bar, .. } | Self::Uniform { nu_bar } => *nu_bar,
        }
    }

    /// CDF, with all mass inside `[0, nu_bar]` (so 0 below and 1 above).
    pub fn cdf(&self, nu: f64) -> f64 {
        let nu_bar = self.nu_bar();
        if nu <= 0.0 {
            return 0.0;
        }
        if nu >= nu_bar {
            return 1.0;
        }
        match self {
            Self::Uniform { .. } => nu / nu_bar,
            Self::ScaledBeta { alpha, beta, .. } => {
                Beta::new(*alpha, *beta).expect("validated at construction").cdf(nu / nu_bar)
            }
        }
    }

    /// Probability mass on the interval `[lo, hi]` (empty if `hi <= lo`).
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    /// Density on `[0, nu_bar]`; zero outside.
    pub fn pdf(&self, nu: f64) -> f64 {
        let nu_bar = self.nu_bar();
        if !(0.0..=nu_bar).contains(&nu) {
            return 0.0;
        }
        match self {
            Self::Uniform { .. } => 1.0 / nu_bar,
            Self::ScaledBeta { alpha, beta, .. } => {
                Beta::new(*alpha, *beta).expect("validated at construction").pdf(nu / nu_bar)
                    / nu_bar
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Uniform { nu_bar } => 0.5 * nu_bar,
            Self::ScaledBeta { alpha, beta, nu_bar } => nu_bar * alpha / (alpha + beta),
        }
    }

    pub fn sd(&self) -> f64 {
        match self {
            Self::Uniform { nu_bar } => nu_bar / 12.0f64.sqrt(),
            Self::ScaledBeta { alpha, beta, nu_bar } => {
                let s = alpha + beta;
                nu_bar * (alpha * beta / (s * s * (s + 1.0))).sqrt()
            }
        }
    }

    /// Inverse CDF for `p` in [0, 1].
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("quantile level must be in [0, 1], got {p}")));
        }
        let nu_bar = self.nu_bar();
        Ok(match self {
            Self::Uniform { .. } => p * nu_bar,
            Self::ScaledBeta { alpha, beta, .. } => {
                Beta::new(*alpha, *beta).expect("validated at construction").inverse_cdf(p)
                    * nu_bar
            }
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Uniform { nu_bar } => rng.random::<f64>() * nu_bar,
            Self::ScaledBeta { alpha, beta, nu_bar } => {
                let b = rand_distr::Beta::new(*alpha, *beta).expect("validated at construction");
                nu_bar * rng.sample(b)
            }
        }
    }
}

fn check_nu_bar(nu_bar: f64) -> Result<()> {
    if !(nu_bar.is_finite() && nu_bar > 0.0) {
        return Err(Error::InvalidConfig(format!("nu_bar must be positive, got {nu_bar}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate_gl;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn scaled_beta_moments_match_closed_forms() {
        let d = RiskDistribution::scaled_beta(1.70, 7.45, 0.02).unwrap();
        assert_relative_eq!(d.mean(), 0.02 * 1.70 / 9.15, max_relative = 1e-14);
        let var = 1.70 * 7.45 / (9.15f64.powi(2) * 10.15);
        assert_relative_eq!(d.sd(), 0.02 * var.sqrt(), max_relative = 1e-14);
        // Sanity against the headline magnitudes: mean ~ 0.0037, sd ~ 0.0024.
        assert!((d.mean() - 0.0037).abs() < 1e-4);
        assert!((d.sd() - 0.0024).abs() < 1e-4);
    }

    #[test]
    fn cdf_clamps_and_is_monotone() {
        let d = RiskDistribution::scaled_beta(1.8, 1.0, 0.02).unwrap();
        assert_eq!(d.cdf(-1.0), 0.0);
        assert_eq!(d.cdf(0.0), 0.0);
        assert_eq!(d.cdf(0.02), 1.0);
        assert_eq!(d.cdf(1.0), 1.0);
        let mut prev = 0.0;
        for i in 1..=100 {
            let c = d.cdf(0.02 * i as f64 / 100.0);
            assert!(c >= prev);
            prev = c;
        }
        // Beta(1.8, 1) has cdf x^1.8 on the unit scale.
        assert_relative_eq!(d.cdf(0.01), 0.5f64.powf(1.8), max_relative = 1e-12);
        // Its density is strictly positive at the upper endpoint.
        assert_relative_eq!(d.pdf(0.02), 1.8 / 0.02, max_relative = 1e-12);
    }

    #[test]
    fn pdf_integrates_to_one() {
        // The nu^(alpha-1) factor is singular (or merely non-smooth) at
        // zero, so the quadrature runs in nu = nu_bar * t^(2/alpha), which
        // turns that factor times the Jacobian into an exact power of t.
        for (alpha, beta, nu_bar) in [(1.70, 7.45, 0.02), (0.7, 2.0, 0.05), (3.0, 1.0, 0.01)] {
            let d = RiskDistribution::scaled_beta(alpha, beta, nu_bar).unwrap();
            let c = 2.0 / alpha;
            let total = integrate_gl(
                |t| {
                    let nu = nu_bar * t.powf(c);
                    d.pdf(nu) * nu_bar * c * t.powf(c - 1.0)
                },
                0.0,
                1.0,
                128,
            );
            assert_relative_eq!(total, 1.0, max_relative = 1e-6);
        }
        let u = RiskDistribution::uniform(0.02).unwrap();
        let total = integrate_gl(|nu| u.pdf(nu), 0.0, 0.02, 128);
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = RiskDistribution::scaled_beta(1.70, 7.45, 0.02).unwrap();
        for p in [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
            let q = d.quantile(p).unwrap();
            assert_relative_eq!(d.cdf(q), p, max_relative = 1e-8);
        }
        assert!(d.quantile(1.5).is_err());
    }

    #[test]
    fn mass_between_handles_unordered_and_outside_edges() {
        let d = RiskDistribution::uniform(0.02).unwrap();
        assert_eq!(d.mass_between(0.01, 0.005), 0.0);
        assert_relative_eq!(d.mass_between(f64::NEG_INFINITY, f64::INFINITY), 1.0);
        assert_relative_eq!(d.mass_between(0.005, 0.015), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn sampling_matches_the_cdf() {
        let d = RiskDistribution::scaled_beta(1.70, 7.45, 0.02).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!((mean - d.mean()).abs() < 4.0 * d.sd() / (n as f64).sqrt());
        for p in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let q = d.quantile(p).unwrap();
            let emp = draws.iter().filter(|&&x| x <= q).count() as f64 / n as f64;
            assert!((emp - p).abs() < 0.01, "p = {p}, empirical = {emp}");
        }
        assert!(draws.iter().all(|&x| (0.0..=0.02).contains(&x)));
    }
}
