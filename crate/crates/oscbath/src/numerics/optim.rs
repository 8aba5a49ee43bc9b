//! Small dense optimizers: Levenberg–Marquardt least squares and Nelder–Mead.
//!
//! Problem sizes here are tiny (≤ ~20 parameters), so plain dense linear
//! algebra with forward-difference Jacobians is the right tool.

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;

/// Levenberg–Marquardt minimization of ½‖r(x)‖².
///
/// Returns (x, final residual 2-norm). `max_nfev` bounds residual evaluations.
pub fn levenberg_marquardt<F>(
    residual: F,
    x0: &[f64],
    max_nfev: usize,
    xtol: f64,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let m = r.len();
    let mut nfev = 1usize;
    let mut cost = norm2(&r);
    let mut lambda = 1e-3f64;

    while nfev + n + 2 < max_nfev {
        // forward-difference Jacobian
        let mut jac = Array2::<f64>::zeros((m, n));
        for j in 0..n {
            let h = 1e-7 * x[j].abs().max(1e-7);
            let mut xp = x.clone();
            xp[j] += h;
            let rp = residual(&xp);
            nfev += 1;
            for i in 0..m {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let jt = jac.t();
        let jtj = jt.dot(&jac);
        let jtr = jt.dot(&Array1::from_vec(r.clone()));
        if jtr.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-15 * (1.0 + cost) {
            break;
        }

        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for j in 0..n {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-12);
            }
            let step = match a.solve(&jtr) {
                Ok(s) => s,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let xn: Vec<f64> = (0..n).map(|j| x[j] - step[j]).collect();
            let rn = residual(&xn);
            nfev += 1;
            let cn = norm2(&rn);
            if cn < cost {
                let dx = (0..n).map(|j| (xn[j] - x[j]).powi(2)).sum::<f64>().sqrt();
                let xscale = (0..n).map(|j| x[j] * x[j]).sum::<f64>().sqrt();
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if dx < xtol * (1.0 + xscale) {
                    return (x, cost);
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    (x, cost)
}

/// Nelder–Mead simplex minimization.
///
/// Returns (x, f(x)). The objective may return +∞ to mark infeasible points.
pub fn nelder_mead<F>(f: F, x0: &[f64], scale: f64, max_fev: usize, ftol: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for j in 0..n {
        let mut p = x0.to_vec();
        let d = if p[j].abs() > 1e-12 { 0.1 * p[j].abs() } else { scale * 0.1 };
        p[j] += d.max(scale * 0.02);
        simplex.push(p);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    let mut nfev = n + 1;

    while nfev < max_fev {
        // order
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fv[a].partial_cmp(&fv[b]).unwrap_or(std::cmp::Ordering::Equal));
        let ordered: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let ordered_f: Vec<f64> = idx.iter().map(|&i| fv[i]).collect();
        simplex = ordered;
        fv = ordered_f;

        if (fv[n] - fv[0]).abs() <= ftol * (1.0 + fv[0].abs()) && fv[n].is_finite() {
            break;
        }

        // centroid of the best n
        let mut cen = vec![0.0; n];
        for p in simplex.iter().take(n) {
            for j in 0..n {
                cen[j] += p[j] / n as f64;
            }
        }
        let xr: Vec<f64> = (0..n).map(|j| cen[j] + (cen[j] - simplex[n][j])).collect();
        let fr = f(&xr);
        nfev += 1;
        if fr < fv[0] {
            let xe: Vec<f64> = (0..n).map(|j| cen[j] + 2.0 * (cen[j] - simplex[n][j])).collect();
            let fe = f(&xe);
            nfev += 1;
            if fe < fr {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
        } else if fr < fv[n - 1] {
            simplex[n] = xr;
            fv[n] = fr;
        } else {
            let xc: Vec<f64> = (0..n).map(|j| cen[j] + 0.5 * (simplex[n][j] - cen[j])).collect();
            let fc = f(&xc);
            nfev += 1;
            if fc < fv[n] {
                simplex[n] = xc;
                fv[n] = fc;
            } else {
                // shrink toward the best point
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    fv[i] = f(&simplex[i]);
                }
                nfev += n;
            }
        }
    }
    let best = fv
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    (simplex[best].clone(), fv[best])
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lm_solves_rosenbrock_least_squares() {
        let r = |x: &[f64]| vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]];
        let (x, cost) = levenberg_marquardt(r, &[-1.2, 1.0], 2000, 1e-14);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(x[1], 1.0, epsilon = 1e-6);
        assert!(cost < 1e-8);
    }

    #[test]
    fn nm_finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 2.0).powi(2) + 3.0 * (x[1] + 1.0).powi(2) + 5.0;
        let (x, fx) = nelder_mead(f, &[0.0, 0.0], 1.0, 500, 1e-12);
        assert_relative_eq!(x[0], 2.0, epsilon = 1e-4);
        assert_relative_eq!(x[1], -1.0, epsilon = 1e-4);
        assert_relative_eq!(fx, 5.0, epsilon = 1e-8);
    }
}
