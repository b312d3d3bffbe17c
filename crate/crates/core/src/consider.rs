//! Consideration-set mechanisms.
//!
//! A mechanism assigns probabilities to subsets of the menu (the sets a
//! household actually evaluates). The central quantity for choice kernels is
//! the marginal `Pr(A ⊆ K and K ∩ B = ∅)`: the chance that everything in `A`
//! is considered while everything in `B` is overlooked. For product-form
//! mechanisms that marginal factorizes into per-alternative inclusion
//! probabilities and never requires subset enumeration.
//!
//! Sets are bitmasks (`u128`), so menus up to 128 alternatives are supported.

use crate::error::{Error, Result};
use crate::numeric::logistic;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Bitmask representation of a consideration set; bit `j` = alternative `j`.
pub type SetMask = u128;

/// Hard cap implied by the `u128` mask representation.
pub const MAX_ALTERNATIVES: usize = 128;

/// Builds a mask from alternative indices.
pub fn mask_of(indices: &[usize]) -> SetMask {
    let mut m = 0;
    for &i in indices {
        assert!(i < MAX_ALTERNATIVES);
        m |= 1 << i;
    }
    m
}

pub fn mask_contains(mask: SetMask, j: usize) -> bool {
    mask & (1 << j) != 0
}

/// Per-household data a mechanism may condition on: one attribute per
/// alternative (the premium) and household demographics.
#[derive(Debug, Clone, Copy, Default)]
pub struct MechContext<'a> {
    pub premiums: &'a [f64],
    pub demographics: &'a [f64],
}

impl<'a> MechContext<'a> {
    pub const EMPTY: MechContext<'static> = MechContext { premiums: &[], demographics: &[] };
}

/// Independent inclusion with a guaranteed default alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicArc {
    /// Inclusion probability per alternative, each in (0, 1].
    pub alphas: Vec<f64>,
    /// Index always considered; `alphas[default_alt]` must be exactly 1.
    pub default_alt: usize,
}

/// Independent inclusion whose probabilities shift with risk aversion:
/// alternatives riskier than the default are scaled by `1 - s(nu, z)` and
/// safer ones by `1 + s(nu, z)`, where
/// `s = logistic(rho'z) * (1 - nu/nu_bar)^xi2` vanishes at `nu = nu_bar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionalArc {
    pub alphas: Vec<f64>,
    pub default_alt: usize,
    /// Index coefficients for the shift magnitude: `rho[0]` is the intercept,
    /// the rest multiply the demographics.
    pub rho: Vec<f64>,
    /// Decay exponent of the shift in `nu`; must be positive.
    pub xi2: f64,
    pub nu_bar: f64,
}

/// Independent inclusion driven by an alternative attribute and risk
/// aversion: `alpha_j = logistic(a_j + b_j * premium_j + c_j * nu)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltSpecificArc {
    pub coefs: Vec<AltSpecificCoef>,
    pub default_alt: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltSpecificCoef {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Two independent-inclusion profiles split by a risk-aversion threshold:
/// households below `nu_star` use `low`, the rest use `high`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryTypes {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub default_alt: usize,
    pub nu_star: f64,
}

/// Mechanisms whose realizable sets are contiguous index runs, so
/// consideration respects the menu ordering loosely: whenever two
/// alternatives are considered, so is everything between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooselyOrdered {
    pub variant: LooseVariant,
    /// Variant-specific probabilities; see each variant's docs.
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LooseVariant {
    /// Realizable sets are prefixes `{0..=m}`. `probs[j]` is the marginal
    /// inclusion probability of alternative `j`: `probs[0] = 1`,
    /// non-increasing; the prefix ending at `m` has mass
    /// `probs[m] - probs[m+1]`.
    BottomUp,
    /// Mirror image: realizable sets are suffixes, `probs` non-decreasing
    /// with `probs[D-1] = 1`.
    TopDown,
    /// Realizable sets are runs containing `anchor`; the left and right
    /// endpoints extend independently. `probs[j]` is the marginal inclusion
    /// probability (1 at the anchor, non-decreasing before, non-increasing
    /// after).
    CenterToEdges { anchor: usize },
    /// Independent geometric trims from both ends of a `len`-alternative
    /// menu, conditioned on a nonempty run: `probs = [q_low, q_high]` are
    /// the per-step continuation probabilities of trimming one more
    /// alternative.
    TrimmedFromEdges { len: usize },
}

/// Explicit set-probability table (testing backend; menus up to 6).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetTable {
    /// `probs[mask]` for every subset mask; length `2^D`.
    pub probs: Vec<f64>,
}

/// Two explicit tables split at a risk-aversion threshold (testing backend).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryTypesTable {
    pub low: SetTable,
    pub high: SetTable,
    pub nu_star: f64,
}

/// Any supported consideration mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "kebab-case")]
pub enum Consideration {
    Basic(BasicArc),
    Proportional(ProportionalArc),
    AltSpecific(AltSpecificArc),
    BinaryTypes(BinaryTypes),
    LooselyOrdered(LooselyOrdered),
    Table(SetTable),
    BinaryTypesTable(BinaryTypesTable),
}

fn check_alphas(alphas: &[f64], default_alt: usize, label: &str) -> Result<()> {
    if alphas.is_empty() || alphas.len() > MAX_ALTERNATIVES {
        return Err(Error::InvalidConfig(format!(
            "{label}: need between 1 and {MAX_ALTERNATIVES} alternatives"
        )));
    }
    if default_alt >= alphas.len() {
        return Err(Error::InvalidConfig(format!(
            "{label}: default index {default_alt} out of range"
        )));
    }
    if alphas[default_alt] != 1.0 {
        return Err(Error::InvalidConfig(format!(
            "{label}: the default alternative must have inclusion probability exactly 1"
        )));
    }
    for (j, &a) in alphas.iter().enumerate() {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "{label}: inclusion probability for alternative {j} must lie in (0, 1], got {a}"
            )));
        }
    }
    Ok(())
}

impl BasicArc {
    pub fn new(alphas: Vec<f64>, default_alt: usize) -> Result<Self> {
        check_alphas(&alphas, default_alt, "basic mechanism")?;
        Ok(Self { alphas, default_alt })
    }

    /// Everything always considered (all inclusion probabilities 1).
    pub fn full_consideration(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n], 0)
    }
}

impl ProportionalArc {
    pub fn new(
        alphas: Vec<f64>,
        default_alt: usize,
        rho: Vec<f64>,
        xi2: f64,
        nu_bar: f64,
    ) -> Result<Self> {
        check_alphas(&alphas, default_alt, "proportional mechanism")?;
        let d = alphas.len();
        let valid_shape = d >= 4 || (d == 3 && default_alt == 1);
        if !valid_shape {
            return Err(Error::InvalidConfig(
                "proportional consideration requires at least four alternatives, \
                 or exactly three with the default in the middle"
                    .into(),
            ));
        }
        if rho.is_empty() {
            return Err(Error::InvalidConfig(
                "proportional mechanism needs at least an intercept coefficient".into(),
            ));
        }
        if !(xi2.is_finite() && xi2 > 0.0) {
            return Err(Error::InvalidConfig(format!("decay exponent must be positive, got {xi2}")));
        }
        if !(nu_bar.is_finite() && nu_bar > 0.0) {
            return Err(Error::InvalidConfig(format!("nu_bar must be positive, got {nu_bar}")));
        }
        Ok(Self { alphas, default_alt, rho, xi2, nu_bar })
    }

    /// Shift magnitude `s(nu, z) in [0, 1)`.
    pub fn shift(&self, nu: f64, z: &[f64]) -> Result<f64> {
        if z.len() + 1 != self.rho.len() {
            return Err(Error::InvalidConfig(format!(
                "demographics length {} does not match {} shift coefficients (intercept + one per column)",
                z.len(),
                self.rho.len()
            )));
        }
        let index = self.rho[0] + self.rho[1..].iter().zip(z).map(|(r, x)| r * x).sum::<f64>();
        let base = (1.0 - nu / self.nu_bar).clamp(0.0, 1.0);
        Ok(logistic(index) * base.powf(self.xi2))
    }
}

impl AltSpecificArc {
    pub fn new(coefs: Vec<AltSpecificCoef>, default_alt: usize) -> Result<Self> {
        if coefs.is_empty() || coefs.len() > MAX_ALTERNATIVES {
            return Err(Error::InvalidConfig(format!(
                "attribute-driven mechanism: need between 1 and {MAX_ALTERNATIVES} alternatives"
            )));
        }
        if default_alt >= coefs.len() {
            return Err(Error::InvalidConfig(format!(
                "attribute-driven mechanism: default index {default_alt} out of range"
            )));
        }
        Ok(Self { coefs, default_alt })
    }
}

impl BinaryTypes {
    pub fn new(low: Vec<f64>, high: Vec<f64>, default_alt: usize, nu_star: f64) -> Result<Self> {
        check_alphas(&low, default_alt, "binary-types mechanism (low type)")?;
        check_alphas(&high, default_alt, "binary-types mechanism (high type)")?;
        if low.len() != high.len() {
            return Err(Error::InvalidConfig(
                "binary-types mechanism: the two profiles must cover the same menu".into(),
            ));
        }
        if !(nu_star.is_finite() && nu_star > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "type threshold must be positive and finite, got {nu_star}"
            )));
        }
        Ok(Self { low, high, default_alt, nu_star })
    }

    fn profile(&self, nu: f64) -> &[f64] {
        if nu < self.nu_star {
            &self.low
        } else {
            &self.high
        }
    }
}

impl LooselyOrdered {
    pub fn new(variant: LooseVariant, probs: Vec<f64>) -> Result<Self> {
        let mech = Self { variant, probs };
        mech.validate()?;
        Ok(mech)
    }

    fn validate(&self) -> Result<()> {
        let p = &self.probs;
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("loosely-ordered mechanism: {msg}")));
        match self.variant {
            LooseVariant::BottomUp => {
                if p.is_empty() || p[0] != 1.0 {
                    return bad("bottom-up inclusion probabilities must start at exactly 1");
                }
                if p.windows(2).any(|w| w[1] > w[0]) || p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                    return bad("bottom-up inclusion probabilities must be non-increasing within [0, 1]");
                }
            }
            LooseVariant::TopDown => {
                if p.is_empty() || *p.last().unwrap() != 1.0 {
                    return bad("top-down inclusion probabilities must end at exactly 1");
                }
                if p.windows(2).any(|w| w[1] < w[0]) || p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                    return bad("top-down inclusion probabilities must be non-decreasing within [0, 1]");
                }
            }
            LooseVariant::CenterToEdges { anchor } => {
                if anchor >= p.len() {
                    return bad("anchor out of range");
                }
                if p[anchor] != 1.0 {
                    return bad("the anchor's inclusion probability must be exactly 1");
                }
                if p[..=anchor].windows(2).any(|w| w[1] < w[0])
                    || p[anchor..].windows(2).any(|w| w[1] > w[0])
                    || p.iter().any(|&x| !(0.0..=1.0).contains(&x))
                {
                    return bad(
                        "inclusion probabilities must rise to 1 at the anchor and fall after it",
                    );
                }
            }
            LooseVariant::TrimmedFromEdges { len } => {
                if len == 0 || len > MAX_ALTERNATIVES {
                    return bad("menu size must be between 1 and 128");
                }
                if p.len() != 2 || p.iter().any(|&q| !(0.0..1.0).contains(&q)) {
                    return bad("trimming needs two continuation probabilities in [0, 1)");
                }
            }
        }
        Ok(())
    }

    fn n(&self) -> usize {
        match self.variant {
            LooseVariant::TrimmedFromEdges { len } => len,
            _ => self.probs.len(),
        }
    }

    /// Distribution over realizable contiguous runs `(lo, hi, prob)`,
    /// inclusive on both ends, for a menu of `d` alternatives.
    pub fn run_distribution_for(&self, d: usize) -> Result<Vec<(usize, usize, f64)>> {
        if self.n() != d {
            return Err(Error::InvalidConfig(format!(
                "loosely-ordered mechanism covers {} alternatives, not {d}",
                self.n()
            )));
        }
        let mut runs = Vec::new();
        match self.variant {
            LooseVariant::BottomUp => {
                for m in 0..d {
                    let next = if m + 1 < d { self.probs[m + 1] } else { 0.0 };
                    let mass = self.probs[m] - next;
                    if mass > 0.0 {
                        runs.push((0, m, mass));
                    }
                }
            }
            LooseVariant::TopDown => {
                for m in 0..d {
                    let prev = if m > 0 { self.probs[m - 1] } else { 0.0 };
                    let mass = self.probs[m] - prev;
                    if mass > 0.0 {
                        runs.push((m, d - 1, mass));
                    }
                }
            }
            LooseVariant::CenterToEdges { anchor } => {
                for lo in 0..=anchor {
                    let left = self.probs[lo] - if lo > 0 { self.probs[lo - 1] } else { 0.0 };
                    if left <= 0.0 {
                        continue;
                    }
                    for hi in anchor..d {
                        let right =
                            self.probs[hi] - if hi + 1 < d { self.probs[hi + 1] } else { 0.0 };
                        if right > 0.0 {
                            runs.push((lo, hi, left * right));
                        }
                    }
                }
            }
            LooseVariant::TrimmedFromEdges { .. } => {
                let (ql, qh) = (self.probs[0], self.probs[1]);
                let mut total = 0.0;
                let mut raw = Vec::new();
                for tl in 0..d {
                    for tr in 0..(d - tl) {
                        let w = (1.0 - ql) * ql.powi(tl as i32) * (1.0 - qh) * qh.powi(tr as i32);
                        raw.push((tl, d - 1 - tr, w));
                        total += w;
                    }
                }
                for (lo, hi, w) in raw {
                    runs.push((lo, hi, w / total));
                }
            }
        }
        Ok(runs)
    }
}

impl SetTable {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let len = probs.len();
        if !len.is_power_of_two() || len < 2 || len > 64 {
            return Err(Error::InvalidConfig(
                "set table length must be 2^D with D between 1 and 6".into(),
            ));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidConfig("set table entries must be probabilities".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "set table must sum to 1 (got {total})"
            )));
        }
        if probs[0] > 0.0 {
            return Err(Error::InvalidConfig(
                "set table assigns positive probability to the empty set".into(),
            ));
        }
        Ok(Self { probs })
    }

    pub fn n_alternatives(&self) -> usize {
        self.probs.len().trailing_zeros() as usize
    }

    /// Table matching an independent-inclusion profile (for cross-checks).
    pub fn from_alphas(alphas: &[f64]) -> Result<Self> {
        let d = alphas.len();
        let mut probs = vec![0.0; 1 << d];
        for (mask, slot) in probs.iter_mut().enumerate() {
            let mut p = 1.0;
            for (j, &a) in alphas.iter().enumerate() {
                p *= if mask & (1 << j) != 0 { a } else { 1.0 - a };
            }
            *slot = p;
        }
        Self::new(probs)
    }
}

impl BinaryTypesTable {
    pub fn new(low: SetTable, high: SetTable, nu_star: f64) -> Result<Self> {
        if low.probs.len() != high.probs.len() {
            return Err(Error::InvalidConfig(
                "binary-types tables must cover the same menu".into(),
            ));
        }
        if !(nu_star.is_finite() && nu_star > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "type threshold must be positive and finite, got {nu_star}"
            )));
        }
        Ok(Self { low, high, nu_star })
    }

    fn table(&self, nu: f64) -> &SetTable {
        if nu < self.nu_star {
            &self.low
        } else {
            &self.high
        }
    }
}

impl Consideration {
    pub fn n_alternatives(&self) -> usize {
        match self {
            Self::Basic(m) => m.alphas.len(),
            Self::Proportional(m) => m.alphas.len(),
            Self::AltSpecific(m) => m.coefs.len(),
            Self::BinaryTypes(m) => m.low.len(),
            Self::LooselyOrdered(m) => m.n(),
            Self::Table(t) => t.n_alternatives(),
            Self::BinaryTypesTable(t) => t.low.n_alternatives(),
        }
    }

    /// The alternative guaranteed to be considered, when one exists.
    pub fn default_alternative(&self) -> Option<usize> {
        match self {
            Self::Basic(m) => Some(m.default_alt),
            Self::Proportional(m) => Some(m.default_alt),
            Self::AltSpecific(m) => Some(m.default_alt),
            Self::BinaryTypes(m) => Some(m.default_alt),
            Self::LooselyOrdered(m) => match m.variant {
                LooseVariant::BottomUp => Some(0),
                LooseVariant::TopDown => Some(m.probs.len() - 1),
                LooseVariant::CenterToEdges { anchor } => Some(anchor),
                LooseVariant::TrimmedFromEdges { .. } => None,
            },
            Self::Table(_) | Self::BinaryTypesTable(_) => None,
        }
    }

    /// True when inclusions are independent across alternatives at any fixed
    /// `nu`, so marginals factor into per-alternative probabilities.
    pub fn is_product_form(&self) -> bool {
        matches!(
            self,
            Self::Basic(_) | Self::Proportional(_) | Self::AltSpecific(_) | Self::BinaryTypes(_)
        )
    }

    /// For product-form mechanisms, fills `out[j] = Pr(j considered)`.
    pub fn product_alphas(&self, nu: f64, ctx: &MechContext, out: &mut [f64]) -> Result<()> {
        let d = self.n_alternatives();
        assert_eq!(out.len(), d, "output buffer size mismatch");
        match self {
            Self::Basic(m) => out.copy_from_slice(&m.alphas),
            Self::Proportional(m) => {
                let s = m.shift(nu, ctx.demographics)?;
                for j in 0..d {
                    out[j] = match j.cmp(&m.default_alt) {
                        std::cmp::Ordering::Less => m.alphas[j] * (1.0 - s),
                        std::cmp::Ordering::Equal => 1.0,
                        std::cmp::Ordering::Greater => m.alphas[j] * (1.0 + s),
                    };
                    if j != m.default_alt && !(out[j] > 0.0 && out[j] < 1.0) {
                        return Err(Error::Domain(format!(
                            "proportional shift pushes alternative {j}'s inclusion probability to {} (outside (0, 1))",
                            out[j]
                        )));
                    }
                }
            }
            Self::AltSpecific(m) => {
                if ctx.premiums.len() != d {
                    return Err(Error::InvalidConfig(format!(
                        "attribute-driven mechanism needs one premium per alternative ({} != {d})",
                        ctx.premiums.len()
                    )));
                }
                for j in 0..d {
                    out[j] = if j == m.default_alt {
                        1.0
                    } else {
                        let c = m.coefs[j];
                        logistic(c.a + c.b * ctx.premiums[j] + c.c * nu)
                    };
                }
            }
            Self::BinaryTypes(m) => out.copy_from_slice(m.profile(nu)),
            _ => {
                return Err(Error::InvalidConfig(
                    "mechanism is not product-form; marginals require set summation".into(),
                ))
            }
        }
        Ok(())
    }

    /// Marginal inclusion probability of a single alternative.
    pub fn inclusion_probability(&self, j: usize, nu: f64, ctx: &MechContext) -> Result<f64> {
        self.marginal(1 << j, 0, nu, ctx)
    }

    /// `Pr(K = set)` at risk aversion `nu`.
    pub fn set_probability(&self, set: SetMask, nu: f64, ctx: &MechContext) -> Result<f64> {
        let d = self.n_alternatives();
        match self {
            Self::Basic(_) | Self::Proportional(_) | Self::AltSpecific(_) | Self::BinaryTypes(_) => {
                let mut alphas = vec![0.0; d];
                self.product_alphas(nu, ctx, &mut alphas)?;
                let mut p = 1.0;
                for (j, &a) in alphas.iter().enumerate() {
                    p *= if mask_contains(set, j) { a } else { 1.0 - a };
                }
                Ok(p)
            }
            Self::LooselyOrdered(m) => {
                if set == 0 {
                    return Ok(0.0);
                }
                let lo = set.trailing_zeros() as usize;
                let hi = (127 - set.leading_zeros()) as usize;
                let run_mask: SetMask = run_mask(lo, hi);
                if set != run_mask {
                    return Ok(0.0); // non-contiguous sets are never realized
                }
                Ok(m.run_distribution_for(d)?
                    .iter()
                    .filter(|&&(l, h, _)| l == lo && h == hi)
                    .map(|&(_, _, p)| p)
                    .sum())
            }
            Self::Table(t) => table_set_prob(t, set),
            Self::BinaryTypesTable(t) => table_set_prob(t.table(nu), set),
        }
    }

    /// `Pr(A ⊆ K and K ∩ B = ∅)`; `A` and `B` must be disjoint.
    pub fn marginal(&self, a: SetMask, b: SetMask, nu: f64, ctx: &MechContext) -> Result<f64> {
        if a & b != 0 {
            return Err(Error::InvalidConfig(
                "marginal requires disjoint included/excluded sets".into(),
            ));
        }
        let d = self.n_alternatives();
        match self {
            Self::Basic(_) | Self::Proportional(_) | Self::AltSpecific(_) | Self::BinaryTypes(_) => {
                let mut alphas = vec![0.0; d];
                self.product_alphas(nu, ctx, &mut alphas)?;
                let mut p = 1.0;
                for (j, &alpha) in alphas.iter().enumerate() {
                    if mask_contains(a, j) {
                        p *= alpha;
                    } else if mask_contains(b, j) {
                        p *= 1.0 - alpha;
                    }
                }
                Ok(p)
            }
            Self::LooselyOrdered(m) => {
                let mut p = 0.0;
                for (lo, hi, w) in m.run_distribution_for(d)? {
                    let mask = run_mask(lo, hi);
                    if a & mask == a && b & mask == 0 {
                        p += w;
                    }
                }
                Ok(p)
            }
            Self::Table(t) => table_marginal(t, a, b),
            Self::BinaryTypesTable(t) => table_marginal(t.table(nu), a, b),
        }
    }

    /// Risk-aversion levels at which set probabilities jump. `Some(vec![])`
    /// means ν-independent; `None` means smoothly ν-varying (the breakpoint
    /// kernel cannot be used).
    pub fn piecewise_breakpoints(&self) -> Option<Vec<f64>> {
        match self {
            Self::Basic(_) | Self::LooselyOrdered(_) | Self::Table(_) => Some(vec![]),
            Self::BinaryTypes(m) => Some(vec![m.nu_star]),
            Self::BinaryTypesTable(t) => Some(vec![t.nu_star]),
            Self::Proportional(_) => None,
            Self::AltSpecific(m) => {
                if m.coefs.iter().enumerate().all(|(j, c)| j == m.default_alt || c.c == 0.0) {
                    Some(vec![])
                } else {
                    None
                }
            }
        }
    }

    /// Draws one consideration set.
    pub fn sample<R: Rng + ?Sized>(&self, nu: f64, ctx: &MechContext, rng: &mut R) -> Result<SetMask> {
        let d = self.n_alternatives();
        match self {
            Self::Basic(_) | Self::Proportional(_) | Self::AltSpecific(_) | Self::BinaryTypes(_) => {
                let mut alphas = vec![0.0; d];
                self.product_alphas(nu, ctx, &mut alphas)?;
                let mut mask = 0;
                for (j, &a) in alphas.iter().enumerate() {
                    if a == 1.0 || rng.random::<f64>() < a {
                        mask |= 1 << j;
                    }
                }
                Ok(mask)
            }
            Self::LooselyOrdered(m) => {
                let runs = m.run_distribution_for(d)?;
                Ok(sample_discrete(&runs, rng))
            }
            Self::Table(t) => sample_table(t, rng),
            Self::BinaryTypesTable(t) => sample_table(t.table(nu), rng),
        }
    }
}

fn run_mask(lo: usize, hi: usize) -> SetMask {
    debug_assert!(lo <= hi && hi < MAX_ALTERNATIVES);
    if hi - lo + 1 == MAX_ALTERNATIVES {
        SetMask::MAX
    } else {
        (((1 as SetMask) << (hi - lo + 1)) - 1) << lo
    }
}

fn table_set_prob(t: &SetTable, set: SetMask) -> Result<f64> {
    let idx = set as usize;
    if idx >= t.probs.len() {
        return Err(Error::InvalidConfig("set outside the table's menu".into()));
    }
    Ok(t.probs[idx])
}

fn table_marginal(t: &SetTable, a: SetMask, b: SetMask) -> Result<f64> {
    let mut p = 0.0;
    for (mask, &q) in t.probs.iter().enumerate() {
        let mask = mask as SetMask;
        if a & mask == a && b & mask == 0 {
            p += q;
        }
    }
    Ok(p)
}

fn sample_discrete<R: Rng + ?Sized>(runs: &[(usize, usize, f64)], rng: &mut R) -> SetMask {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(lo, hi, p) in runs {
        acc += p;
        if u < acc {
            return run_mask(lo, hi);
        }
    }
    let &(lo, hi, _) = runs.last().expect("run distribution nonempty");
    run_mask(lo, hi)
}

fn sample_table<R: Rng + ?Sized>(t: &SetTable, rng: &mut R) -> Result<SetMask> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (mask, &p) in t.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(mask as SetMask);
        }
    }
    Ok((t.probs.len() - 1) as SetMask)
}
