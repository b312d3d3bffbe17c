//! Pairwise indifference cutoffs and menu-level preference diagnostics.
//!
//! With a riskiest-first menu and a utility family satisfying the
//! single-crossing property, each pair (j, k) with j < k has at most one
//! risk-aversion level at which the decision maker is indifferent; below it
//! the riskier alternative j is preferred, above it the safer k. Cutoffs are
//! searched over `[-50 nu_bar, 50 nu_bar]`; a pair whose preference never
//! flips on that range is reported as dominated (`±∞` cutoff).

use crate::context::{Alternative, DeductibleLottery, HouseholdContext};
use crate::error::{Error, Result};
use crate::numeric::brent_root;
use crate::utility::UtilityFamily;
use serde::{Deserialize, Serialize};

/// Half-width of the cutoff search range, as a multiple of `nu_bar`.
pub const SEARCH_HALF_WIDTH: f64 = 50.0;
/// Number of scan cells used to bracket sign changes of the preference gap.
const SCAN_CELLS: usize = 64;
/// Relative tolerance (on `nu`) of the root refinement.
const NU_RTOL: f64 = 1e-12;
/// Root-refinement iteration budget.
const ROOT_MAX_ITER: usize = 200;
/// Cutoffs of a triple closer than this (times `nu_bar`) are a three-way tie.
pub const THREE_WAY_TIE_RTOL: f64 = 1e-9;
/// Breakpoints closer than this (times `nu_bar`) are merged into one.
pub const BREAKPOINT_MERGE_RTOL: f64 = 1e-12;

/// An extended-real indifference point between a riskier and a safer
/// alternative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cutoff {
    /// The safer alternative is preferred over the whole search range.
    NegInf,
    /// The riskier alternative is preferred below, the safer above.
    Finite(f64),
    /// The riskier alternative is preferred over the whole search range.
    PosInf,
}

impl Cutoff {
    pub fn is_finite(&self) -> bool {
        matches!(self, Cutoff::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Cutoff::Finite(v) => Some(*v),
            _ => None,
        }
    }

    /// Extended-real value (`±INFINITY` for the dominance cases).
    pub fn as_f64(&self) -> f64 {
        match self {
            Cutoff::NegInf => f64::NEG_INFINITY,
            Cutoff::Finite(v) => *v,
            Cutoff::PosInf => f64::INFINITY,
        }
    }
}

/// Signed preference gap `score(j) - score(k)` at risk aversion `nu`:
/// positive iff `j` is strictly preferred to `k`.
pub fn preference_gap(
    family: &UtilityFamily,
    j: &Alternative,
    k: &Alternative,
    nu: f64,
) -> Result<f64> {
    Ok(family.preference_score(nu, j)? - family.preference_score(nu, k)?)
}

/// Indifference cutoff between two single-line lotteries sharing claim
/// probability `mu`. Requires the natural order `d_j > d_k`.
pub fn indifference_cutoff(
    family: &UtilityFamily,
    lottery_j: &DeductibleLottery,
    lottery_k: &DeductibleLottery,
    mu: f64,
    nu_bar: f64,
) -> Result<Cutoff> {
    if lottery_j.deductible <= lottery_k.deductible {
        return Err(Error::InvalidConfig(format!(
            "pair not in natural order: d_j = {} must exceed d_k = {}",
            lottery_j.deductible, lottery_k.deductible
        )));
    }
    let alt_j = Alternative::single(lottery_j.premium, lottery_j.deductible, mu)?;
    let alt_k = Alternative::single(lottery_k.premium, lottery_k.deductible, mu)?;
    alternative_cutoff(family, &alt_j, &alt_k, nu_bar, 0, 1)
}

/// Indifference cutoff between two (possibly multi-leg) alternatives, with
/// `j` the riskier one. `j_idx`/`k_idx` only label error messages.
pub fn alternative_cutoff(
    family: &UtilityFamily,
    alt_j: &Alternative,
    alt_k: &Alternative,
    nu_bar: f64,
    j_idx: usize,
    k_idx: usize,
) -> Result<Cutoff> {
    if !(nu_bar.is_finite() && nu_bar > 0.0) {
        return Err(Error::InvalidConfig(format!("nu_bar must be positive, got {nu_bar}")));
    }
    if alt_j == alt_k {
        return Err(Error::DegeneratePair { j: j_idx, k: k_idx });
    }
    let width = SEARCH_HALF_WIDTH * nu_bar;

    // NTD gaps are exactly linear in nu: solve in closed form.
    if matches!(family, UtilityFamily::Ntd) {
        let intercept = alt_k.expected_cost() - alt_j.expected_cost();
        let slope = 0.5 * (alt_k.risk_mass() - alt_j.risk_mass());
        if slope > 0.0 {
            return Err(Error::InvalidConfig(format!(
                "pair ({j_idx}, {k_idx}) not in natural order: the first alternative must carry more risk"
            )));
        }
        if slope == 0.0 {
            return Ok(match intercept.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => Cutoff::PosInf,
                Some(std::cmp::Ordering::Less) => Cutoff::NegInf,
                _ => return Err(Error::DegeneratePair { j: j_idx, k: k_idx }),
            });
        }
        let root = -intercept / slope;
        return Ok(if root > width {
            Cutoff::PosInf
        } else if root < -width {
            Cutoff::NegInf
        } else {
            Cutoff::Finite(root)
        });
    }

    // Other families: scan for sign changes of the gap, then refine.
    let mut grid = Vec::with_capacity(SCAN_CELLS + 1);
    let mut gaps = Vec::with_capacity(SCAN_CELLS + 1);
    for i in 0..=SCAN_CELLS {
        let nu = -width + 2.0 * width * i as f64 / SCAN_CELLS as f64;
        grid.push(nu);
        gaps.push(preference_gap(family, alt_j, alt_k, nu)?);
    }
    if gaps.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!(
            "preference gap not finite over the search range for pair ({j_idx}, {k_idx})"
        )));
    }

    // Gaps can underflow to exactly zero where a family saturates (e.g. two
    // equal-premium CARA alternatives deep in the risk-loving tail), so a
    // zero node only marks a crossing when the flanking signs actually flip.
    let nonzero: Vec<usize> = (0..=SCAN_CELLS).filter(|&i| gaps[i] != 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::DegeneratePair { j: j_idx, k: k_idx });
    }
    let mut roots: Vec<f64> = Vec::new();
    for w in nonzero.windows(2) {
        let (a, b) = (w[0], w[1]);
        if gaps[a].signum() != gaps[b].signum() {
            roots.push(brent_root(
                |nu| preference_gap(family, alt_j, alt_k, nu).expect("gap finite inside scanned bracket"),
                grid[a],
                grid[b],
                gaps[a],
                gaps[b],
                NU_RTOL * nu_bar,
                NU_RTOL,
                ROOT_MAX_ITER,
            )?);
        }
    }

    match roots.len() {
        0 => Ok(if gaps[nonzero[0]] > 0.0 { Cutoff::PosInf } else { Cutoff::NegInf }),
        1 => {
            // A proper cutoff must be a downward crossing (riskier preferred
            // below), which is what natural ordering guarantees.
            if gaps[nonzero[0]] < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "pair ({j_idx}, {k_idx}) not in natural order: the safer alternative wins at low risk aversion"
                )));
            }
            Ok(Cutoff::Finite(roots[0]))
        }
        n => Err(Error::SingleCrossingViolation { j: j_idx, k: k_idx, crossings: n }),
    }
}

/// Set (bitmask) of alternatives strictly preferred to `j` at risk
/// aversion `nu`.
pub fn preferred_set(
    family: &UtilityFamily,
    ctx: &HouseholdContext,
    nu: f64,
    j: usize,
) -> Result<u128> {
    let d = ctx.n_alternatives();
    assert!(d <= 128, "menus larger than 128 alternatives are not supported");
    let score_j = family.preference_score(nu, &ctx.alternatives[j])?;
    let mut mask = 0u128;
    for (k, alt) in ctx.alternatives.iter().enumerate() {
        if k != j && family.preference_score(nu, alt)? > score_j {
            mask |= 1 << k;
        }
    }
    Ok(mask)
}

/// The first-best alternative at `nu`: highest preference score, lowest
/// index on exact ties (all tied indices are reported).
#[derive(Debug, Clone, PartialEq)]
pub struct FirstBest {
    pub index: usize,
    pub tied: Vec<usize>,
}

pub fn first_best(family: &UtilityFamily, ctx: &HouseholdContext, nu: f64) -> Result<FirstBest> {
    let mut best = 0usize;
    let mut best_score = family.preference_score(nu, &ctx.alternatives[0])?;
    let mut tied = vec![0usize];
    for (k, alt) in ctx.alternatives.iter().enumerate().skip(1) {
        let s = family.preference_score(nu, alt)?;
        if s > best_score {
            best = k;
            best_score = s;
            tied.clear();
            tied.push(k);
        } else if s == best_score {
            tied.push(k);
        }
    }
    Ok(FirstBest { index: best, tied })
}

/// Piecewise-constant map `nu -> argmax` over the search range, as panels
/// `(lo, hi, argmax)` whose edges are indifference cutoffs.
pub fn first_best_map(
    family: &UtilityFamily,
    ctx: &HouseholdContext,
    nu_bar: f64,
) -> Result<Vec<(f64, f64, usize)>> {
    let matrix = CutoffMatrix::compute(family, ctx, nu_bar)?;
    Ok(matrix.first_best_panels.clone())
}

/// Fact-style classification of a triple of alternatives (j < k < l).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TripleOrder {
    /// Cutoffs increase (`c_jk <= c_jl <= c_kl`): the middle alternative is
    /// first best on the interior interval.
    MiddleOnInterval,
    /// Cutoffs decrease (`c_jk >= c_jl >= c_kl`): the middle alternative is
    /// never first best within the triple.
    MiddleNeverFirstBest,
    /// All three cutoffs coincide (within `THREE_WAY_TIE_RTOL * nu_bar`).
    ThreeWayTie,
    /// No single-crossing-consistent pattern (signals a numerical or menu
    /// problem; unreachable for well-posed natural menus).
    Unordered,
}

/// All pairwise cutoffs of a menu plus derived diagnostics.
#[derive(Debug, Clone)]
pub struct CutoffMatrix {
    pub nu_bar: f64,
    n: usize,
    /// Upper triangle, row-major: entry for (j, k), j < k.
    pairs: Vec<Cutoff>,
    /// Alternative is pairwise dominated somewhere in the menu.
    pub dominated: Vec<bool>,
    /// Alternative is never the first best anywhere on the search range.
    pub never_first_best: Vec<bool>,
    /// Triples whose three cutoffs coincide within tolerance.
    pub three_way_ties: Vec<(usize, usize, usize)>,
    /// First-best panels over the search range.
    pub first_best_panels: Vec<(f64, f64, usize)>,
}

impl CutoffMatrix {
    pub fn compute(family: &UtilityFamily, ctx: &HouseholdContext, nu_bar: f64) -> Result<Self> {
        let n = ctx.n_alternatives();
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for j in 0..n {
            for k in (j + 1)..n {
                pairs.push(alternative_cutoff(
                    family,
                    &ctx.alternatives[j],
                    &ctx.alternatives[k],
                    nu_bar,
                    j,
                    k,
                )?);
            }
        }
        let mut matrix = Self {
            nu_bar,
            n,
            pairs,
            dominated: vec![false; n],
            never_first_best: vec![false; n],
            three_way_ties: Vec::new(),
            first_best_panels: Vec::new(),
        };

        for j in 0..n {
            for k in (j + 1)..n {
                match matrix.get(j, k) {
                    Cutoff::NegInf => matrix.dominated[j] = true,
                    Cutoff::PosInf => matrix.dominated[k] = true,
                    Cutoff::Finite(_) => {}
                }
            }
        }

        matrix.first_best_panels = compute_first_best_panels(family, ctx, nu_bar, &matrix)?;
        let mut seen = vec![false; n];
        for &(_, _, idx) in &matrix.first_best_panels {
            seen[idx] = true;
        }
        for j in 0..n {
            matrix.never_first_best[j] = !seen[j];
        }

        let tie_tol = THREE_WAY_TIE_RTOL * nu_bar;
        for j in 0..n {
            for k in (j + 1)..n {
                for l in (k + 1)..n {
                    let c = [matrix.get(j, k), matrix.get(j, l), matrix.get(k, l)];
                    if let (Some(a), Some(b), Some(cc)) = (c[0].finite(), c[1].finite(), c[2].finite()) {
                        let lo = a.min(b).min(cc);
                        let hi = a.max(b).max(cc);
                        if hi - lo < tie_tol {
                            matrix.three_way_ties.push((j, k, l));
                        }
                    }
                }
            }
        }
        Ok(matrix)
    }

    /// Cutoff for the pair (j, k); requires j < k.
    pub fn get(&self, j: usize, k: usize) -> Cutoff {
        assert!(j < k && k < self.n, "cutoff matrix indices must satisfy j < k < n");
        // Row-major offset into the upper triangle.
        let offset = j * self.n - j * (j + 1) / 2 + (k - j - 1);
        self.pairs[offset]
    }

    /// Classifies the cutoff pattern of a triple (j < k < l).
    pub fn triple_case(&self, j: usize, k: usize, l: usize) -> TripleOrder {
        let (a, b, c) = (self.get(j, k).as_f64(), self.get(j, l).as_f64(), self.get(k, l).as_f64());
        let tol = THREE_WAY_TIE_RTOL * self.nu_bar;
        let close = |x: f64, y: f64| (x - y).abs() < tol || (x == y);
        if close(a, b) && close(b, c) && close(a, c) {
            return TripleOrder::ThreeWayTie;
        }
        if a <= b && b <= c {
            return TripleOrder::MiddleOnInterval;
        }
        if a >= b && b >= c {
            return TripleOrder::MiddleNeverFirstBest;
        }
        TripleOrder::Unordered
    }
}

fn compute_first_best_panels(
    family: &UtilityFamily,
    ctx: &HouseholdContext,
    nu_bar: f64,
    matrix: &CutoffMatrix,
) -> Result<Vec<(f64, f64, usize)>> {
    let width = SEARCH_HALF_WIDTH * nu_bar;
    let mut edges: Vec<f64> = matrix.pairs.iter().filter_map(Cutoff::finite).collect();
    edges.push(-width);
    edges.push(width);
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite cutoffs"));
    edges.dedup_by(|a, b| (*a - *b).abs() < BREAKPOINT_MERGE_RTOL * nu_bar);

    let mut panels: Vec<(f64, f64, usize)> = Vec::new();
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let fb = first_best(family, ctx, mid)?.index;
        match panels.last_mut() {
            Some(last) if last.2 == fb => last.1 = w[1],
            _ => panels.push((w[0], w[1], fb)),
        }
    }
    Ok(panels)
}

/// Report from checking the anchored cutoff ordering `c_{1,j} < c_{1,j+1}`
/// and the price/coverage ratio condition that guarantees it.
#[derive(Debug, Clone, Serialize)]
pub struct OrderConditionReport {
    /// Cutoffs of every alternative against the riskiest one (j = 2..D).
    pub anchored_cutoffs: Vec<Cutoff>,
    /// Whether the finite anchored cutoffs are strictly increasing (and any
    /// infinite ones only appear as a trailing run).
    pub cutoffs_increasing: bool,
    /// Per adjacent pair (j, j+1), whether
    /// `(p_1 - p_j)/(p_1 - p_{j+1}) < (d_1 - d_j)/(d_1 - d_{j+1})` holds.
    pub ratio_condition: Vec<bool>,
}

/// Verifies the anchored cutoff ordering for a single-line menu and reports
/// the sufficient price/coverage ratio condition alongside it.
pub fn verify_order_condition(
    family: &UtilityFamily,
    ctx: &HouseholdContext,
    nu_bar: f64,
) -> Result<OrderConditionReport> {
    let n = ctx.n_alternatives();
    if ctx.alternatives.iter().any(|a| a.legs.len() != 1) {
        return Err(Error::InvalidConfig(
            "order-condition check is defined for single-line menus".into(),
        ));
    }
    if n < 2 {
        return Err(Error::InvalidConfig("need at least two alternatives".into()));
    }
    let mut anchored = Vec::with_capacity(n - 1);
    for j in 1..n {
        anchored.push(alternative_cutoff(
            family,
            &ctx.alternatives[0],
            &ctx.alternatives[j],
            nu_bar,
            0,
            j,
        )?);
    }
    let mut increasing = true;
    for w in anchored.windows(2) {
        let (a, b) = (w[0].as_f64(), w[1].as_f64());
        let ok = if a.is_infinite() && b.is_infinite() && a == b { true } else { a < b };
        if !ok {
            increasing = false;
        }
    }
    let mut ratio = Vec::with_capacity(n.saturating_sub(2));
    let (p1, d1) = (ctx.premium(0), ctx.deductible(0));
    for j in 1..(n - 1) {
        let lhs = (p1 - ctx.premium(j)) / (p1 - ctx.premium(j + 1));
        let rhs = (d1 - ctx.deductible(j)) / (d1 - ctx.deductible(j + 1));
        ratio.push(lhs < rhs);
    }
    Ok(OrderConditionReport { anchored_cutoffs: anchored, cutoffs_increasing: increasing, ratio_condition: ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const NU_BAR: f64 = 0.02;

    fn fam_set() -> [UtilityFamily; 3] {
        [UtilityFamily::cara(), UtilityFamily::Ntd, UtilityFamily::Crra { wealth: 30_000.0 }]
    }

    #[test]
    fn ntd_cutoff_matches_closed_form() {
        let lj = DeductibleLottery::new(100.0, 500.0).unwrap();
        let lk = DeductibleLottery::new(140.0, 250.0).unwrap();
        let c = indifference_cutoff(&UtilityFamily::Ntd, &lj, &lk, 0.1, NU_BAR).unwrap();
        // 2 * ((140 - 100) + 0.1 * (250 - 500)) / (0.1 * 0.9 * (500^2 - 250^2))
        let oracle = 2.0 * ((140.0 - 100.0) + 0.1 * (250.0 - 500.0))
            / (0.1 * 0.9 * (500.0f64.powi(2) - 250.0f64.powi(2)));
        assert_relative_eq!(c.finite().unwrap(), oracle, max_relative = 1e-14);
        assert_relative_eq!(oracle, 0.001_777_777_8, max_relative = 1e-7);
    }

    /// CRRA's risk aversion is relative, so its cutoffs for a given menu sit
    /// near the absolute families' cutoffs times wealth; searches must use a
    /// correspondingly scaled range.
    fn family_nu_bar(fam: &UtilityFamily) -> f64 {
        match fam {
            UtilityFamily::Crra { wealth } => NU_BAR * wealth,
            _ => NU_BAR,
        }
    }

    #[test]
    fn cutoff_root_satisfies_indifference() {
        let lj = DeductibleLottery::new(100.0, 500.0).unwrap();
        let lk = DeductibleLottery::new(140.0, 250.0).unwrap();
        for fam in fam_set() {
            let c = indifference_cutoff(&fam, &lj, &lk, 0.1, family_nu_bar(&fam)).unwrap();
            let nu = c.finite().expect("this pair crosses");
            let eu_j = fam.expected_utility(nu, &lj, 0.1).unwrap();
            let eu_k = fam.expected_utility(nu, &lk, 0.1).unwrap();
            let scale = eu_j.abs().max(eu_k.abs());
            assert!(
                (eu_j - eu_k).abs() <= 1e-10 * scale,
                "{fam:?}: residual {} at cutoff {nu}",
                (eu_j - eu_k).abs() / scale
            );
        }
    }

    #[test]
    fn cara_cutoff_satisfies_the_ratio_fixed_point() {
        // At the CARA cutoff, with wealth normalized away:
        // (e^{nu(p_k+d_k)} - e^{nu(p_j+d_j)}) / (e^{nu p_j} - e^{nu p_k})
        //   = (1 - mu) / mu.
        let (pj, dj, pk, dk, mu) = (120.0, 450.0, 155.0, 200.0, 0.08);
        let lj = DeductibleLottery::new(pj, dj).unwrap();
        let lk = DeductibleLottery::new(pk, dk).unwrap();
        let nu = indifference_cutoff(&UtilityFamily::cara(), &lj, &lk, mu, NU_BAR)
            .unwrap()
            .finite()
            .unwrap();
        let lhs = ((nu * (pk + dk)).exp() - (nu * (pj + dj)).exp())
            / ((nu * pj).exp() - (nu * pk).exp());
        assert_relative_eq!(lhs, (1.0 - mu) / mu, max_relative = 1e-8);
    }

    #[test]
    fn same_premium_more_coverage_dominates() {
        let lj = DeductibleLottery::new(100.0, 500.0).unwrap();
        let lk = DeductibleLottery::new(100.0, 250.0).unwrap();
        for fam in [UtilityFamily::cara(), UtilityFamily::Crra { wealth: 30_000.0 }] {
            let c = indifference_cutoff(&fam, &lj, &lk, 0.1, NU_BAR).unwrap();
            assert_eq!(c, Cutoff::NegInf, "{fam:?}");
        }
        // The mean-variance family lets a variance-loving type pick the
        // riskier option: the crossing sits at 2 * (125 - 150) / 16875 < 0,
        // below the support, so dominance still holds on [0, nu_bar].
        let c = indifference_cutoff(&UtilityFamily::Ntd, &lj, &lk, 0.1, NU_BAR).unwrap();
        let oracle = 2.0 * (125.0 - 150.0) / (0.09 * (500.0f64.powi(2) - 250.0f64.powi(2)));
        assert_relative_eq!(c.finite().unwrap(), oracle, max_relative = 1e-13);
        assert!(c.finite().unwrap() < 0.0);
    }

    #[test]
    fn overpriced_coverage_is_dominated() {
        // Safer alternative costs more than the riskier one's worst case:
        // under expected utility nobody buys it at any risk aversion.
        let lj = DeductibleLottery::new(100.0, 500.0).unwrap();
        let lk = DeductibleLottery::new(601.0, 250.0).unwrap();
        for fam in [UtilityFamily::cara(), UtilityFamily::Crra { wealth: 30_000.0 }] {
            let c = indifference_cutoff(&fam, &lj, &lk, 0.1, family_nu_bar(&fam)).unwrap();
            assert_eq!(c, Cutoff::PosInf, "{fam:?}");
        }
        // The mean-variance family trades variance against mean globally, so
        // it admits a crossing; it lands far outside the [0, nu_bar] support
        // at 2 * (626 - 150) / (0.09 * (500^2 - 250^2)).
        let c = indifference_cutoff(&UtilityFamily::Ntd, &lj, &lk, 0.1, NU_BAR).unwrap();
        let oracle = 2.0 * (626.0 - 150.0) / (0.09 * (500.0f64.powi(2) - 250.0f64.powi(2)));
        assert_relative_eq!(c.finite().unwrap(), oracle, max_relative = 1e-13);
        assert!(c.finite().unwrap() > NU_BAR);
    }

    #[test]
    fn degenerate_and_misordered_pairs_are_rejected() {
        let l = DeductibleLottery::new(100.0, 500.0).unwrap();
        let safer = DeductibleLottery::new(140.0, 250.0).unwrap();
        for fam in fam_set() {
            assert!(matches!(
                indifference_cutoff(&fam, &l, &l.clone(), 0.1, NU_BAR),
                Err(Error::InvalidConfig(_)) | Err(Error::DegeneratePair { .. })
            ));
            assert!(indifference_cutoff(&fam, &safer, &l, 0.1, NU_BAR).is_err());
        }
    }

    /// Three-alternative NTD menu with closed-form cutoffs
    /// c12 ~ 0.001058, c13 ~ 0.003704, c23 ~ 0.022222 (case "increasing").
    fn increasing_menu() -> HouseholdContext {
        HouseholdContext::single_line(0.1, &[100.0, 140.0, 180.0], &[500.0, 200.0, 100.0], vec![])
            .unwrap()
    }

    /// Equal price increments but doubling coverage increments around the
    /// middle alternative make it never first best (case "decreasing").
    fn decreasing_menu() -> HouseholdContext {
        HouseholdContext::single_line(0.1, &[100.0, 142.0, 184.0], &[250.0, 200.0, 100.0], vec![])
            .unwrap()
    }

    #[test]
    fn preferred_set_tracks_cutoffs() {
        let ctx = increasing_menu();
        let fam = UtilityFamily::Ntd;
        let m = CutoffMatrix::compute(&fam, &ctx, NU_BAR).unwrap();
        let (c12, c13) = (m.get(0, 1).finite().unwrap(), m.get(0, 2).finite().unwrap());
        assert!(c12 < c13);
        // Between c12 and c13 only alternative 2 beats alternative 1.
        let nu = 0.5 * (c12 + c13);
        assert_eq!(preferred_set(&fam, &ctx, nu, 0).unwrap(), 0b010);
        // Below c12 nothing beats it.
        assert_eq!(preferred_set(&fam, &ctx, 0.5 * c12, 0).unwrap(), 0);
        // Safest alternative is beaten by both at low nu.
        assert_eq!(preferred_set(&fam, &ctx, 0.5 * c12, 2).unwrap(), 0b011);
    }

    #[test]
    fn first_best_map_walks_riskiest_to_safest() {
        let ctx = increasing_menu();
        let m = CutoffMatrix::compute(&UtilityFamily::Ntd, &ctx, NU_BAR).unwrap();
        let order: Vec<usize> = m.first_best_panels.iter().map(|p| p.2).collect();
        assert_eq!(order, vec![0, 1, 2]);
        // Panel edges are the cutoffs.
        assert_relative_eq!(m.first_best_panels[0].1, m.get(0, 1).finite().unwrap(), max_relative = 1e-12);
        assert_relative_eq!(m.first_best_panels[1].1, m.get(1, 2).finite().unwrap(), max_relative = 1e-12);
        assert!(m.never_first_best.iter().all(|&b| !b));
        assert_eq!(m.triple_case(0, 1, 2), TripleOrder::MiddleOnInterval);
    }

    #[test]
    fn never_first_best_is_flagged_and_matches_a_grid_scan() {
        let ctx = decreasing_menu();
        for fam in [UtilityFamily::Ntd, UtilityFamily::cara()] {
            let m = CutoffMatrix::compute(&fam, &ctx, NU_BAR).unwrap();
            assert_eq!(m.never_first_best, vec![false, true, false], "{fam:?}");
            assert_eq!(m.triple_case(0, 1, 2), TripleOrder::MiddleNeverFirstBest, "{fam:?}");
            // Independent oracle: argmax of expected utility over a dense grid.
            for i in 0..=400 {
                let nu = -1.0 + 2.0 * i as f64 / 400.0;
                let fb = first_best(&fam, &ctx, nu).unwrap();
                assert_ne!(fb.index, 1, "{fam:?}: middle won at nu = {nu}");
            }
        }
    }

    #[test]
    fn constructed_three_way_tie_is_flagged() {
        // Premiums chosen so all pairwise cutoffs equal 0.002 exactly.
        let ctx = HouseholdContext::single_line(
            0.1,
            &[100.0, 141.875, 161.6],
            &[500.0, 250.0, 100.0],
            vec![],
        )
        .unwrap();
        let m = CutoffMatrix::compute(&UtilityFamily::Ntd, &ctx, NU_BAR).unwrap();
        assert_eq!(m.three_way_ties, vec![(0, 1, 2)]);
        assert_eq!(m.triple_case(0, 1, 2), TripleOrder::ThreeWayTie);
        for (j, k) in [(0, 1), (0, 2), (1, 2)] {
            assert_relative_eq!(m.get(j, k).finite().unwrap(), 0.002, max_relative = 1e-12);
        }
    }

    #[test]
    fn dominated_flags_follow_infinite_cutoffs() {
        let ctx = HouseholdContext::single_line(
            0.1,
            &[100.0, 100.0, 650.0],
            &[500.0, 250.0, 100.0],
            vec![],
        )
        .unwrap();
        let m = CutoffMatrix::compute(&UtilityFamily::cara(), &ctx, NU_BAR).unwrap();
        // Alternative 0 shares its premium with the better-covered 1; it is
        // dominated. Alternative 2 costs more than anyone's worst case.
        assert_eq!(m.dominated, vec![true, false, true]);
        assert!(m.never_first_best[0] && m.never_first_best[2]);
    }

    #[test]
    fn order_condition_report_on_a_multiplication_rule_menu() {
        // Multiplier pricing with gently convex coverage steps keeps the
        // anchored cutoffs increasing.
        let ctx = HouseholdContext::from_multipliers(
            0.1,
            187.0,
            &[0.776, 1.0, 1.3, 1.524, 1.717],
            0.0,
            &[1000.0, 500.0, 250.0, 200.0, 100.0],
            vec![],
        )
        .unwrap();
        for fam in [UtilityFamily::cara(), UtilityFamily::Crra { wealth: 50_000.0 }] {
            let rep = verify_order_condition(&fam, &ctx, NU_BAR).unwrap();
            assert!(rep.cutoffs_increasing, "{fam:?}: {:?}", rep.anchored_cutoffs);
            assert!(rep.ratio_condition.iter().all(|&b| b), "{fam:?}: {:?}", rep.ratio_condition);
        }
    }

    #[test]
    fn cutoffs_clip_to_the_search_range() {
        // The mean-variance crossing for this pair sits at
        // 2 * (10025 - 150) / (0.09 * (500^2 - 250^2)) ~ 1.17, beyond
        // 50 * nu_bar = 1; it is reported as dominance of the riskier option.
        let lj = DeductibleLottery::new(100.0, 500.0).unwrap();
        let lk = DeductibleLottery::new(10_000.0, 250.0).unwrap();
        let c = indifference_cutoff(&UtilityFamily::Ntd, &lj, &lk, 0.1, NU_BAR).unwrap();
        assert_eq!(c, Cutoff::PosInf);
    }
}
