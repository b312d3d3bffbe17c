//! Shared numerical primitives: bracketed root finding, Gauss–Legendre
//! quadrature, Richardson-extrapolated derivatives, and reproducible
//! floating-point reductions.

use crate::error::{Error, Result};
use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::sync::Mutex;

/// Machine epsilon shorthand.
pub const EPS: f64 = f64::EPSILON;

/// Logistic function `1 / (1 + exp(-x))`, evaluated without overflow.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(exp(a) + exp(b))` computed stably.
#[inline]
pub fn logsumexp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(sum_i exp(x_i))` over a slice, stably.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !hi.is_finite() {
        return hi;
    }
    let sum: f64 = xs.iter().map(|&x| (x - hi).exp()).sum();
    hi + sum.ln()
}

/// Sums a slice with a fixed-order pairwise tree.
///
/// The reduction order depends only on the slice length, never on thread
/// scheduling, so results are bit-reproducible across runs and worker counts.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BASE: usize = 32;
    if xs.len() <= BASE {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Sample mean via the pairwise tree. Empty input returns NaN.
pub fn pairwise_mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Population (ddof = 0) standard deviation via the pairwise tree.
pub fn population_sd(xs: &[f64]) -> f64 {
    let m = pairwise_mean(xs);
    let sq: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    (pairwise_sum(&sq) / xs.len() as f64).sqrt()
}

/// Linearly interpolated percentile of a pre-sorted slice, `q` in [0, 1].
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Brent's method for a root of `f` bracketed by `[a, b]`.
///
/// `fa` and `fb` must be the (already computed) endpoint values with opposite
/// signs. Converges to `xtol + rtol * |x|`; errs if the bracket is invalid or
/// the iteration budget is exhausted.
pub fn brent_root<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    xtol: f64,
    rtol: f64,
    max_iter: usize,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return Err(Error::Numeric(format!(
            "brent_root: invalid bracket f({a}) = {fa}, f({b}) = {fb}"
        )));
    }
    let (mut xa, mut xb, mut fa, mut fb) = (a, b, fa, fb);
    let (mut xc, mut fc) = (xa, fa);
    let (mut d, mut e) = (xb - xa, xb - xa);

    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            xc = xa;
            fc = fa;
            d = xb - xa;
            e = d;
        }
        if fc.abs() < fb.abs() {
            xa = xb;
            xb = xc;
            xc = xa;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * EPS * xb.abs() + 0.5 * (xtol + rtol * xb.abs());
        let xm = 0.5 * (xc - xb);
        if xm.abs() <= tol || fb == 0.0 {
            return Ok(xb);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation (secant when only two points).
            let s = fb / fa;
            let (mut p, mut q) = if xa == xc {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * xm * q * (q - r) - (xb - xa) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        xa = xb;
        fa = fb;
        xb += if d.abs() > tol { d } else { tol * xm.signum() };
        fb = f(xb);
        if fb == 0.0 {
            return Ok(xb);
        }
    }
    Err(Error::NonConvergence(format!(
        "brent_root: no convergence within {max_iter} iterations"
    )))
}

/// Bisection for a root of a monotone function on `[lo, hi]`.
///
/// Runs until the bracket width falls below `xtol`; does not require
/// smoothness. `f(lo)` and `f(hi)` must differ in sign.
pub fn bisect_root<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Numeric(format!(
            "bisect_root: invalid bracket f({lo}) = {flo}, f({hi}) = {fhi}"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol {
            return Ok(mid);
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

static GL_CACHE: Lazy<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Gauss–Legendre nodes and weights on `[-1, 1]`, cached per order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut cache = GL_CACHE.lock().expect("quadrature cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| compute_gauss_legendre(n))
        .clone()
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, p_deriv) = legendre_and_deriv(n, x);
            dp = p_deriv;
            let dx = p / p_deriv;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let deriv = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, deriv)
}

/// `∫_a^b f(x) dx` by fixed-order Gauss–Legendre quadrature.
pub fn integrate_gl<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, order: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let (nodes, weights) = gauss_legendre(order);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut terms = Vec::with_capacity(order);
    for (x, w) in nodes.iter().zip(weights.iter()) {
        terms.push(w * f(mid + half * x));
    }
    half * pairwise_sum(&terms)
}

/// Side from which a one-sided derivative is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivSide {
    /// Two-sided central differences.
    Central,
    /// Approach `x` from below (stencil uses `x - h`).
    Below,
    /// Approach `x` from above (stencil uses `x + h`).
    Above,
}

/// Richardson-extrapolated numerical derivative of `f` at `x`.
///
/// Starts from step `h0` and halves it `levels - 1` times (four shrinking
/// offsets by default), extrapolating the difference quotients to `h -> 0`.
pub fn richardson_deriv<F: FnMut(f64) -> f64>(
    mut f: F,
    x: f64,
    h0: f64,
    levels: usize,
    side: DerivSide,
) -> f64 {
    assert!(levels >= 1 && h0 > 0.0);
    // Error order of the base quotient: 2 for central, 1 for one-sided.
    let base_order = if side == DerivSide::Central { 2.0 } else { 1.0 };
    let mut table = vec![vec![0.0; levels]; levels];
    for i in 0..levels {
        let h = h0 / 2f64.powi(i as i32);
        table[i][0] = match side {
            DerivSide::Central => (f(x + h) - f(x - h)) / (2.0 * h),
            DerivSide::Below => (f(x) - f(x - h)) / h,
            DerivSide::Above => (f(x + h) - f(x)) / h,
        };
        for j in 1..=i {
            let factor = 2f64.powf(base_order + (j as f64 - 1.0) * if side == DerivSide::Central { 2.0 } else { 1.0 });
            table[i][j] = (factor * table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1.0);
        }
    }
    table[levels - 1][levels - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn brent_finds_cubic_root() {
        let f = |x: f64| x * x * x - 2.0 * x - 5.0;
        let root = brent_root(f, 2.0, 3.0, f(2.0), f(3.0), 1e-14, 1e-14, 100).unwrap();
        assert_relative_eq!(root, 2.094_551_481_542_326_4, max_relative = 1e-12);
    }

    #[test]
    fn brent_rejects_unbracketed_interval() {
        let f = |x: f64| x * x + 1.0;
        assert!(brent_root(f, -1.0, 1.0, 2.0, 2.0, 1e-12, 1e-12, 100).is_err());
    }

    #[test]
    fn bisection_matches_closed_form() {
        let root = bisect_root(|x| x.exp() - 3.0, 0.0, 2.0, 1e-13, 200).unwrap();
        assert_relative_eq!(root, 3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // Order-n GL is exact for polynomials of degree 2n - 1.
        let val = integrate_gl(|x| x.powi(7) + 3.0 * x * x - 1.0, -1.0, 2.0, 8);
        let exact = (2f64.powi(8) - 1.0) / 8.0 + (8.0 + 1.0) - 3.0;
        assert_relative_eq!(val, exact, max_relative = 1e-13);
    }

    #[test]
    fn gauss_legendre_weights_sum_to_interval_length() {
        for n in [4, 16, 64] {
            let (_, w) = gauss_legendre(n);
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn pairwise_sum_matches_sequential_on_benign_input() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let seq: f64 = xs.iter().sum();
        assert_relative_eq!(pairwise_sum(&xs), seq, max_relative = 1e-12);
    }

    #[test]
    fn percentile_interpolates() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_relative_eq!(percentile_sorted(&xs, 0.5), 2.5);
        assert_relative_eq!(percentile_sorted(&xs, 0.0), 1.0);
        assert_relative_eq!(percentile_sorted(&xs, 1.0), 4.0);
    }

    #[test]
    fn richardson_central_derivative_is_accurate() {
        let d = richardson_deriv(|x| x.sin(), 0.7, 1e-2, 4, DerivSide::Central);
        assert_relative_eq!(d, 0.7f64.cos(), epsilon = 1e-11);
    }

    #[test]
    fn richardson_one_sided_derivative_is_accurate() {
        let d = richardson_deriv(|x| x.exp(), 0.3, 1e-2, 4, DerivSide::Below);
        assert_relative_eq!(d, 0.3f64.exp(), epsilon = 1e-8);
        let d = richardson_deriv(|x| x.exp(), 0.3, 1e-2, 4, DerivSide::Above);
        assert_relative_eq!(d, 0.3f64.exp(), epsilon = 1e-8);
    }

    #[test]
    fn logsumexp_handles_extremes() {
        assert_relative_eq!(logsumexp2(1000.0, 1000.0), 1000.0 + 2f64.ln());
        assert_eq!(logsumexp2(f64::NEG_INFINITY, 3.0), 3.0);
        assert_relative_eq!(logsumexp(&[0.0, 0.0, 0.0]), 3f64.ln());
    }
}
