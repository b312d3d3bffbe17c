//! Derivative-free minimization: an adaptive Nelder-Mead simplex.
//!
//! The likelihood surfaces fitted here are piecewise-smooth in distribution
//! parameters but only directionally smooth in inclusion probabilities near
//! their bounds, which rules out plain gradient methods; the simplex method
//! with dimension-adaptive coefficients is robust to both.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_iters: usize,
    /// Converged when the simplex's objective spread falls below
    /// `ftol_abs + ftol_rel * max(|f_best|, 1)`.
    pub ftol_abs: f64,
    pub ftol_rel: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_iters: 2000, ftol_abs: 1e-10, ftol_rel: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration (non-increasing).
    pub best_trace: Vec<f64>,
}

/// Minimizes `f` starting from `x0` with per-coordinate initial steps.
/// Non-finite objective values are treated as +infinity.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    initial_step: &[f64],
    opts: &NelderMeadOptions,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(initial_step.len(), n, "one initial step per coordinate");
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    if n == 0 {
        let fx = eval(x0, &mut evaluations);
        return NelderMeadResult {
            x: vec![],
            fx,
            iterations: 0,
            evaluations,
            converged: true,
            best_trace: vec![fx],
        };
    }

    // Dimension-adaptive coefficients.
    let nf = n as f64;
    let reflect = 1.0;
    let expand = 1.0 + 2.0 / nf;
    let contract = 0.75 - 1.0 / (2.0 * nf);
    let shrink = 1.0 - 1.0 / nf;

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if initial_step[i] != 0.0 { initial_step[i] } else { 0.1 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();

    let mut best_trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        iterations += 1;
        // Sort vertices by objective (stable order keeps runs deterministic).
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN after mapping"));
        let reorder =
            |xs: &mut Vec<Vec<f64>>, vs: &mut Vec<f64>, order: &[usize]| {
                let new_xs: Vec<Vec<f64>> = order.iter().map(|&i| xs[i].clone()).collect();
                let new_vs: Vec<f64> = order.iter().map(|&i| vs[i]).collect();
                *xs = new_xs;
                *vs = new_vs;
            };
        reorder(&mut simplex, &mut values, &order);
        best_trace.push(values[0]);

        let spread = values[n] - values[0];
        if spread <= opts.ftol_abs + opts.ftol_rel * values[0].abs().max(1.0) {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, &x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= nf;
        }

        let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(&ai, &bi)| ai + t * (bi - ai)).collect()
        };
        // Reflection through the centroid away from the worst vertex.
        let xr = lerp(&centroid, &simplex[n], -reflect);
        let fr = eval(&xr, &mut evaluations);
        if fr < values[0] {
            let xe = lerp(&centroid, &simplex[n], -expand);
            let fe = eval(&xe, &mut evaluations);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            // Contraction (outside if the reflected point improved on the
            // worst vertex, inside otherwise).
            let (xc, fc) = if fr < values[n] {
                let xc = lerp(&centroid, &xr, contract);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc)
            } else {
                let xc = lerp(&centroid, &simplex[n], contract);
                let fc = eval(&xc, &mut evaluations);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                // Shrink toward the best vertex.
                for i in 1..=n {
                    simplex[i] = lerp(&simplex[0], &simplex[i], shrink);
                    values[i] = eval(&simplex[i], &mut evaluations);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if values[i] < values[best] {
            best = i;
        }
    }
    best_trace.push(values[best]);
    NelderMeadResult {
        x: simplex[best].clone(),
        fx: values[best],
        iterations,
        evaluations,
        converged,
        best_trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn minimizes_a_quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.5).powi(2) + 7.0;
        let r = nelder_mead(f, &[0.0, 0.0], &[1.0, 1.0], &NelderMeadOptions::default());
        assert!(r.converged);
        assert_relative_eq!(r.x[0], 3.0, epsilon = 1e-4);
        assert_relative_eq!(r.x[1], -1.5, epsilon = 1e-4);
        assert_relative_eq!(r.fx, 7.0, epsilon = 1e-8);
    }

    #[test]
    fn handles_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            100.0 * (b - a * a).powi(2) + (1.0 - a).powi(2)
        };
        let opts = NelderMeadOptions { max_iters: 5000, ..Default::default() };
        let r = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], &opts);
        assert!(r.converged);
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-3);
        assert_relative_eq!(r.x[1], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn best_value_never_increases() {
        let f = |x: &[f64]| x.iter().map(|v| v.abs().sqrt()).sum::<f64>();
        let r = nelder_mead(f, &[2.0, -3.0, 0.5], &[1.0, 1.0, 1.0], &NelderMeadOptions::default());
        for w in r.best_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn infinite_regions_are_avoided() {
        // Objective is +inf on half the plane; the optimum sits at x = 1.
        let f = |x: &[f64]| if x[0] <= 0.0 { f64::INFINITY } else { (x[0].ln()).powi(2) };
        let r = nelder_mead(f, &[3.0], &[1.0], &NelderMeadOptions::default());
        assert!(r.converged);
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn flat_objectives_converge_immediately() {
        let f = |_: &[f64]| 4.2;
        let r = nelder_mead(f, &[0.0, 0.0], &[1.0, 1.0], &NelderMeadOptions::default());
        assert!(r.converged);
        assert_eq!(r.fx, 4.2);
        assert!(r.iterations <= 2);
    }

    #[test]
    fn zero_dimensional_problems_are_degenerate() {
        let r = nelder_mead(|_: &[f64]| 1.0, &[], &[], &NelderMeadOptions::default());
        assert!(r.converged);
        assert_eq!(r.fx, 1.0);
    }
}
