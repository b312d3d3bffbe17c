//! Run configuration: one TOML file with `[model]`, `[distribution]`,
//! `[mechanism]`, `[optimizer]`, and `[io]` sections. Every field has a
//! default, and the fully resolved configuration (defaults included) is
//! embedded in the run manifest so a run can be reproduced from the manifest
//! alone.

use std::path::Path;

use arcchoice::choice::Kernel;
use arcchoice::consider::{
    AltSpecificArc, AltSpecificCoef, BasicArc, BinaryTypes, Consideration, LooseVariant,
    LooselyOrdered, ProportionalArc, SetTable,
};
use arcchoice::dist::RiskDistribution;
use arcchoice::estimate::{FitModel, FitOptions};
use arcchoice::optim::NelderMeadOptions;
use arcchoice::UtilityFamily;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub distribution: DistributionSection,
    #[serde(default)]
    pub mechanism: MechanismSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub io: IoSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Utility family: "ntd", "cara", or "crra".
    pub family: String,
    /// Initial wealth; required to be positive for "crra", ignored by "ntd".
    pub wealth: f64,
    /// Always-considered alternative (0-based). When absent, estimation
    /// falls back to the modal choice.
    pub default_alternative: Option<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { family: "ntd".into(), wealth: 0.0, default_alternative: Some(0) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSection {
    /// "beta" (scaled to the support) or "uniform".
    pub kind: String,
    pub alpha: f64,
    pub beta: f64,
    /// Upper end of the risk-aversion support.
    pub nu_bar: f64,
}

impl Default for DistributionSection {
    fn default() -> Self {
        Self { kind: "beta".into(), alpha: 1.70, beta: 7.45, nu_bar: 0.02 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSection {
    /// "full", "basic", "proportional", "alt_specific", "binary_types",
    /// "loosely_ordered", or "table".
    pub kind: String,
    /// Per-alternative inclusion rates (basic/proportional) in menu order.
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Always-considered alternative for the mechanism (defaults to the
    /// model section's choice, then 0).
    pub default_alternative: Option<usize>,
    /// Demographic shift coefficients (proportional): intercept followed by
    /// one weight per demographic column.
    #[serde(default)]
    pub rho: Vec<f64>,
    /// Attention-decay exponent (proportional).
    pub xi2: f64,
    /// Per-alternative logistic coefficients `[a, b, c]` (alt_specific).
    #[serde(default)]
    pub coefficients: Vec<[f64; 3]>,
    /// Low/high-type inclusion rates and the type threshold (binary_types).
    #[serde(default)]
    pub low: Vec<f64>,
    #[serde(default)]
    pub high: Vec<f64>,
    pub nu_star: f64,
    /// Variant name for loosely_ordered: "bottom_up", "top_down",
    /// "center_to_edges", or "trimmed_from_edges".
    pub variant: String,
    /// Variant payload: marginals, or `[q_low, q_high]` for trimming.
    #[serde(default)]
    pub probs: Vec<f64>,
    /// Anchor alternative for "center_to_edges".
    pub anchor: usize,
    /// Explicit set-probability table (table), indexed by bitmask.
    #[serde(default)]
    pub table: Vec<f64>,
}

impl Default for MechanismSection {
    fn default() -> Self {
        Self {
            kind: "full".into(),
            alphas: Vec::new(),
            default_alternative: None,
            rho: Vec::new(),
            xi2: 1.0,
            coefficients: Vec::new(),
            low: Vec::new(),
            high: Vec::new(),
            nu_star: 0.01,
            variant: "bottom_up".into(),
            probs: Vec::new(),
            anchor: 0,
            table: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub starts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub ftol_abs: f64,
    pub ftol_rel: f64,
    /// "breakpoint", "riemann", or "bruteforce".
    pub kernel: String,
    pub riemann_intervals: usize,
    pub riemann_exact_mass: bool,
    /// Drop never-chosen alternatives before fitting.
    pub prune: bool,
    /// Quadrature order for the additive-noise benchmark integral.
    pub mixed_logit_order: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let nm = NelderMeadOptions::default();
        let fo = FitOptions::default();
        Self {
            starts: fo.starts,
            seed: fo.seed,
            max_iters: nm.max_iters,
            ftol_abs: nm.ftol_abs,
            ftol_rel: nm.ftol_rel,
            kernel: "breakpoint".into(),
            riemann_intervals: 4096,
            riemann_exact_mass: true,
            prune: fo.prune,
            mixed_logit_order: fo.mixed_logit_order,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    /// Output directory; the `--out` flag overrides it.
    pub output_dir: String,
    /// Worker threads; 0 means hardware parallelism.
    pub threads: usize,
}

impl Default for IoSection {
    fn default() -> Self {
        Self { output_dir: "arcchoice-out".into(), threads: 0 }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| {
            CliError::Io(format!("cannot read config {}: {e}", path.display()))
        })?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Validation(format!("config is not UTF-8: {e}")))?;
        let config: Config = toml::from_str(text)
            .map_err(|e| CliError::Validation(format!("config parse error: {e}")))?;
        Ok((config, bytes))
    }

    pub fn family(&self) -> Result<UtilityFamily, CliError> {
        match self.model.family.as_str() {
            "ntd" => Ok(UtilityFamily::Ntd),
            "cara" => Ok(UtilityFamily::Cara { wealth: self.model.wealth }),
            "crra" => Ok(UtilityFamily::Crra { wealth: self.model.wealth }),
            other => Err(CliError::Validation(format!(
                "unknown utility family {other:?} (expected ntd, cara, or crra)"
            ))),
        }
    }

    pub fn distribution(&self) -> Result<RiskDistribution, CliError> {
        let d = &self.distribution;
        match d.kind.as_str() {
            "beta" => Ok(RiskDistribution::scaled_beta(d.alpha, d.beta, d.nu_bar)?),
            "uniform" => Ok(RiskDistribution::uniform(d.nu_bar)?),
            other => Err(CliError::Validation(format!(
                "unknown distribution kind {other:?} (expected beta or uniform)"
            ))),
        }
    }

    /// Builds the configured mechanism for a menu of `d` alternatives.
    pub fn mechanism(&self, d: usize) -> Result<Consideration, CliError> {
        let m = &self.mechanism;
        let default_alt = m.default_alternative.or(self.model.default_alternative).unwrap_or(0);
        let mech = match m.kind.as_str() {
            "full" => Consideration::Basic(BasicArc::full_consideration(d)?),
            "basic" => Consideration::Basic(BasicArc::new(m.alphas.clone(), default_alt)?),
            "proportional" => Consideration::Proportional(ProportionalArc::new(
                m.alphas.clone(),
                default_alt,
                m.rho.clone(),
                m.xi2,
                self.distribution.nu_bar,
            )?),
            "alt_specific" => {
                let coefs = m
                    .coefficients
                    .iter()
                    .map(|&[a, b, c]| AltSpecificCoef { a, b, c })
                    .collect();
                Consideration::AltSpecific(AltSpecificArc::new(coefs, default_alt)?)
            }
            "binary_types" => Consideration::BinaryTypes(BinaryTypes::new(
                m.low.clone(),
                m.high.clone(),
                default_alt,
                m.nu_star,
            )?),
            "loosely_ordered" => {
                let variant = match m.variant.as_str() {
                    "bottom_up" => LooseVariant::BottomUp,
                    "top_down" => LooseVariant::TopDown,
                    "center_to_edges" => LooseVariant::CenterToEdges { anchor: m.anchor },
                    "trimmed_from_edges" => LooseVariant::TrimmedFromEdges { len: d },
                    other => {
                        return Err(CliError::Validation(format!(
                            "unknown loosely_ordered variant {other:?}"
                        )))
                    }
                };
                Consideration::LooselyOrdered(LooselyOrdered::new(variant, m.probs.clone())?)
            }
            "table" => Consideration::Table(SetTable::new(m.table.clone())?),
            other => Err(CliError::Validation(format!("unknown mechanism kind {other:?}")))?,
        };
        let built = mech.n_alternatives();
        if built != d {
            return Err(CliError::Validation(format!(
                "mechanism is sized for {built} alternatives but the menu has {d}"
            )));
        }
        Ok(mech)
    }

    pub fn kernel(&self) -> Result<Kernel, CliError> {
        let o = &self.optimizer;
        match o.kernel.as_str() {
            "breakpoint" => Ok(Kernel::Breakpoint),
            "riemann" => Ok(Kernel::Riemann {
                intervals: o.riemann_intervals,
                exact_mass: o.riemann_exact_mass,
            }),
            "bruteforce" => Ok(Kernel::BruteForce),
            other => Err(CliError::Validation(format!(
                "unknown kernel {other:?} (expected breakpoint, riemann, or bruteforce)"
            ))),
        }
    }

    pub fn fit_options(&self) -> Result<FitOptions, CliError> {
        let o = &self.optimizer;
        Ok(FitOptions {
            nu_bar: self.distribution.nu_bar,
            kernel: self.kernel()?,
            starts: o.starts,
            seed: o.seed,
            prune: o.prune,
            optimizer: NelderMeadOptions {
                max_iters: o.max_iters,
                ftol_abs: o.ftol_abs,
                ftol_rel: o.ftol_rel,
            },
            mixed_logit_order: o.mixed_logit_order,
        })
    }

    pub fn fit_model(&self, name: &str) -> Result<FitModel, CliError> {
        let default_alt = self.model.default_alternative;
        match name {
            "basic" => Ok(FitModel::Basic { default_alt }),
            "proportional" => Ok(FitModel::Proportional { default_alt }),
            "alt-specific" => Ok(FitModel::AltSpecific { default_alt }),
            "mixed-logit" => Ok(FitModel::MixedLogit),
            other => Err(CliError::Validation(format!(
                "unknown fit model {other:?} (expected basic, proportional, alt-specific, or mixed-logit)"
            ))),
        }
    }
}
