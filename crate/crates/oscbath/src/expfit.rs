//! Fitting a sampled correlation function with damped complex exponentials.
//!
//! C(t) ≈ Σ_n w̃_n e^{λ̃_n t} with Re λ̃_n < 0. Rates come from an
//! SVD-truncated Hankel matrix pencil, weights from linear least squares;
//! a variable-projection polish refines the rates with the weights re-solved
//! (sum-constrained) at every iterate.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Solve, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::optim;
use crate::spectral::CorrelationSeries;

/// Damped-exponential fit of a correlation function.
#[derive(Debug, Clone)]
pub struct ExponentialFit {
    /// Decay rates λ̃_n, Re λ̃_n < 0.
    pub rates: Vec<Complex64>,
    /// Complex weights w̃_n.
    pub weights: Vec<Complex64>,
    /// L2 norm of the residual on the source grid, relative to ‖C‖.
    pub residual: f64,
    /// Source grid step.
    pub grid_dt: f64,
    /// Source grid length.
    pub grid_len: usize,
    /// Requested order when the pencil had lower numerical rank.
    pub reduced_from: Option<usize>,
    /// Set when the nonlinear polish could not improve the seed.
    pub refine_stagnated: bool,
}

impl ExponentialFit {
    pub fn n_terms(&self) -> usize {
        self.rates.len()
    }

    /// Σ_n w̃_n e^{λ̃_n t}.
    pub fn evaluate(&self, t: f64) -> Complex64 {
        self.rates
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * (l * t).exp())
            .sum()
    }

    pub fn weight_sum(&self) -> Complex64 {
        self.weights.iter().sum()
    }

    /// Relative L2 residual against a series on the fit's own grid.
    pub fn residual_on(&self, series: &CorrelationSeries) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, y) in series.values.iter().enumerate() {
            let t = k as f64 * series.dt;
            num += (self.evaluate(t) - y).norm_sqr();
            den += y.norm_sqr();
        }
        (num / den).sqrt()
    }

    fn validate(&self) -> Result<()> {
        if self.rates.iter().any(|l| l.re >= 0.0) {
            return Err(Error::Contract("all fitted rates must decay (Re λ̃ < 0)".into()));
        }
        let s = self.weight_sum();
        if s.im.abs() > 1e-10 * self.weights.iter().map(|w| w.norm()).sum::<f64>() {
            return Err(Error::Contract(format!(
                "sum of weights must be real, got imaginary part {:.3e}",
                s.im
            )));
        }
        Ok(())
    }
}

/// Matrix-pencil (SVD-truncated Hankel) estimate of rates and weights.
pub fn prony_fit(series: &CorrelationSeries, n_terms: usize) -> Result<ExponentialFit> {
    let n = series.len();
    if n_terms == 0 {
        return Err(Error::Contract("n_terms must be at least 1".into()));
    }
    if n < 2 * n_terms + 1 {
        return Err(Error::Contract(format!(
            "series of length {n} cannot support {n_terms} terms (need ≥ {})",
            2 * n_terms + 1
        )));
    }
    let dt = series.dt;
    let y = &series.values;
    let pencil = n / 2;

    // Hankel data matrix Y[i][j] = y[i + j], split into shifted halves.
    let rows = n - pencil;
    let mut y0 = Array2::<Complex64>::zeros((rows, pencil));
    let mut y1 = Array2::<Complex64>::zeros((rows, pencil));
    for i in 0..rows {
        for j in 0..pencil {
            y0[(i, j)] = y[i + j];
            y1[(i, j)] = y[i + j + 1];
        }
    }

    let (u, s, vt) = y0
        .svd(true, true)
        .map_err(|e| Error::Numerics(format!("pencil SVD failed: {e}")))?;
    let u = u.unwrap();
    let vt = vt.unwrap();

    // numerical rank at a relative floor; below it the series is explainable
    // by fewer exponentials
    let s0 = s[0].max(1e-300);
    let mut k = n_terms.min(s.len());
    let mut reduced_from = None;
    while k > 1 && s[k - 1] < 1e-12 * s0 {
        k -= 1;
        reduced_from = Some(n_terms);
    }

    // poles from the truncated pencil: eig of diag(1/s_k) U_k^H Y1 V_k^H
    let uk = u.slice(ndarray::s![.., ..k]).to_owned();
    let vk = vt.slice(ndarray::s![..k, ..]).to_owned();
    let uh_y1 = uk.map(|z| z.conj()).t().dot(&y1);
    let mut a = uh_y1.dot(&vk.map(|z| z.conj()).t());
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] /= Complex64::new(s[i], 0.0);
        }
    }
    let (z, _) = a
        .eig()
        .map_err(|e| Error::Numerics(format!("pencil eigensolve failed: {e}")))?;

    let nyquist = std::f64::consts::PI / dt;
    let rates: Vec<Complex64> = z
        .iter()
        .map(|zi| {
            let l = zi.ln() / dt;
            if l.re >= 0.0 {
                // reflect to the stable side, keeping the oscillation frequency
                Complex64::new(-1e-6 * nyquist, l.im)
            } else {
                l
            }
        })
        .collect();

    let weights = solve_weights(&rates, y, dt, None)?;
    let mut fit = ExponentialFit {
        rates,
        weights,
        residual: 0.0,
        grid_dt: dt,
        grid_len: n,
        reduced_from,
        refine_stagnated: false,
    };
    fit.residual = fit.residual_on(series);
    Ok(fit)
}

/// Weights by linear least squares given rates; with `sum` the solution is
/// constrained so Σw equals it exactly (KKT system).
fn solve_weights(
    rates: &[Complex64],
    y: &[Complex64],
    dt: f64,
    sum: Option<f64>,
) -> Result<Vec<Complex64>> {
    let n = y.len();
    let k = rates.len();
    let mut v = Array2::<Complex64>::zeros((n, k));
    for i in 0..n {
        let t = i as f64 * dt;
        for j in 0..k {
            v[(i, j)] = (rates[j] * t).exp();
        }
    }
    let vh = v.map(|z| z.conj()).t().to_owned();
    let a = vh.dot(&v);
    let b = vh.dot(&Array1::from_vec(y.to_vec()));
    match sum {
        None => {
            let w = a
                .solve(&b)
                .map_err(|e| Error::Numerics(format!("weight solve failed: {e}")))?;
            Ok(w.to_vec())
        }
        Some(c0) => {
            // minimize ‖Vw − y‖² subject to Σw = c0
            let mut kkt = Array2::<Complex64>::zeros((k + 1, k + 1));
            let mut rhs = Array1::<Complex64>::zeros(k + 1);
            for i in 0..k {
                for j in 0..k {
                    kkt[(i, j)] = 2.0 * a[(i, j)];
                }
                kkt[(i, k)] = Complex64::new(1.0, 0.0);
                kkt[(k, i)] = Complex64::new(1.0, 0.0);
                rhs[i] = 2.0 * b[i];
            }
            rhs[k] = Complex64::new(c0, 0.0);
            let sol = kkt
                .solve(&rhs)
                .map_err(|e| Error::Numerics(format!("constrained weight solve failed: {e}")))?;
            Ok(sol.to_vec()[..k].to_vec())
        }
    }
}

/// Variable-projection polish: nonlinear least squares over the rates with
/// weights re-solved (sum-constrained to C(0)) at every iterate. The
/// residual never increases; on stagnation the input fit is returned with a
/// flag set.
pub fn refine_fit(fit: &ExponentialFit, series: &CorrelationSeries) -> Result<ExponentialFit> {
    let k = fit.n_terms();
    let y = &series.values;
    let dt = series.dt;
    let c0 = series.values[0].re;
    let nyquist = std::f64::consts::PI / dt;

    let residual_of = |x: &[f64]| -> Vec<f64> {
        let rates: Vec<Complex64> =
            (0..k).map(|j| Complex64::new(x[j].min(-1e-9 * nyquist), x[k + j])).collect();
        match solve_weights(&rates, y, dt, Some(c0)) {
            Ok(w) => {
                let mut r = Vec::with_capacity(2 * y.len());
                for (i, yi) in y.iter().enumerate() {
                    let t = i as f64 * dt;
                    let model: Complex64 =
                        rates.iter().zip(&w).map(|(l, wi)| wi * (l * t).exp()).sum();
                    r.push(model.re - yi.re);
                    r.push(model.im - yi.im);
                }
                r
            }
            Err(_) => vec![1e6; 2 * y.len()],
        }
    };

    let mut x0 = Vec::with_capacity(2 * k);
    x0.extend(fit.rates.iter().map(|l| l.re));
    x0.extend(fit.rates.iter().map(|l| l.im));
    let (x, _) = optim::levenberg_marquardt(residual_of, &x0, 6000, 1e-14);

    let mut rates: Vec<Complex64> =
        (0..k).map(|j| Complex64::new(x[j].min(-1e-9 * nyquist), x[k + j])).collect();

    // merge near-degenerate rates and refit with one term fewer
    let scale = rates.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let mut merged = true;
    while merged {
        merged = false;
        'outer: for i in 0..rates.len() {
            for j in (i + 1)..rates.len() {
                if (rates[i] - rates[j]).norm() < 1e-6 * scale {
                    rates.remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
    }

    let weights = solve_weights(&rates, y, dt, Some(c0))?;
    let mut refined = ExponentialFit {
        rates,
        weights,
        residual: 0.0,
        grid_dt: dt,
        grid_len: y.len(),
        reduced_from: fit.reduced_from,
        refine_stagnated: false,
    };
    refined.residual = refined.residual_on(series);

    if refined.residual <= fit.residual || (refined.residual - fit.residual) < 1e-12 {
        Ok(refined)
    } else {
        // polish failed to help; keep the seed and flag it
        let mut out = fit.clone();
        out.refine_stagnated = true;
        Ok(out)
    }
}

/// Minimal least-squares projection so Σw̃ = c0 exactly: the deficit is
/// spread equally across the weights. Unstable rates are reflected.
pub fn enforce_constraints(fit: &ExponentialFit, c0: f64) -> Result<ExponentialFit> {
    if !(c0 > 0.0) {
        return Err(Error::Domain("C(0) must be positive".into()));
    }
    let k = fit.n_terms() as f64;
    let deficit = Complex64::new(c0, 0.0) - fit.weight_sum();
    let weights: Vec<Complex64> = fit.weights.iter().map(|w| w + deficit / k).collect();
    let rates: Vec<Complex64> = fit
        .rates
        .iter()
        .map(|l| if l.re >= 0.0 { Complex64::new(-1e-12, l.im) } else { *l })
        .collect();
    let out = ExponentialFit { rates, weights, ..fit.clone() };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::CorrelationSeries;

    fn synthetic(terms: &[(Complex64, Complex64)], n: usize, dt: f64) -> CorrelationSeries {
        let vals: Vec<Complex64> = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                terms.iter().map(|(w, l)| w * (l * t).exp()).sum()
            })
            .collect();
        CorrelationSeries::new(dt, vals).unwrap()
    }

    #[test]
    fn single_term_roundtrip() {
        let w = Complex64::new(1.0, 0.0);
        let l = Complex64::new(-0.5, -2.0);
        let s = synthetic(&[(w, l)], 64, 0.1);
        let fit = prony_fit(&s, 1).unwrap();
        assert!((fit.rates[0] - l).norm() < 1e-10);
        assert!((fit.weights[0] - w).norm() < 1e-10);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn two_term_roundtrip() {
        let t1 = (Complex64::new(0.8, 0.3), Complex64::new(-0.4, 1.7));
        let t2 = (Complex64::new(0.2, -0.3), Complex64::new(-1.1, -0.6));
        let s = synthetic(&[t1, t2], 128, 0.08);
        let fit = prony_fit(&s, 2).unwrap();
        let mut rates = fit.rates.clone();
        rates.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((rates[0] - t2.1).norm() < 1e-8);
        assert!((rates[1] - t1.1).norm() < 1e-8);
        assert!(fit.residual < 1e-8);
    }

    #[test]
    fn rank_deficient_series_reduces_order() {
        let t1 = (Complex64::new(1.0, 0.0), Complex64::new(-0.5, 1.0));
        let s = synthetic(&[t1], 96, 0.1);
        let fit = prony_fit(&s, 3).unwrap();
        assert!(fit.n_terms() < 3);
        assert_eq!(fit.reduced_from, Some(3));
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn refine_is_fixed_point_on_exact_fit() {
        let t1 = (Complex64::new(0.9, 0.1), Complex64::new(-0.6, 2.2));
        let t2 = (Complex64::new(0.1, -0.1), Complex64::new(-1.4, -0.9));
        let s = synthetic(&[t1, t2], 128, 0.07);
        let fit = prony_fit(&s, 2).unwrap();
        let refined = refine_fit(&fit, &s).unwrap();
        assert!(refined.residual <= fit.residual + 1e-12);
        for (a, b) in fit.rates.iter().zip(&refined.rates) {
            assert!((a - b).norm() < 1e-6, "rates moved: {a} vs {b}");
        }
    }

    #[test]
    fn refine_recovers_from_perturbed_rates() {
        let t1 = (Complex64::new(0.7, 0.2), Complex64::new(-0.5, 1.9));
        let t2 = (Complex64::new(0.3, -0.2), Complex64::new(-1.2, -0.4));
        let s = synthetic(&[t1, t2], 128, 0.07);
        let mut fit = prony_fit(&s, 2).unwrap();
        // perturb the rates and recompute residual
        for l in fit.rates.iter_mut() {
            *l += Complex64::new(1e-3, -1e-3);
        }
        fit.residual = fit.residual_on(&s);
        let seed_residual = fit.residual;
        let refined = refine_fit(&fit, &s).unwrap();
        assert!(
            refined.residual < seed_residual / 10.0,
            "residual {} not reduced 10x from {}",
            refined.residual,
            seed_residual
        );
    }

    #[test]
    fn enforce_constraints_projects_sum() {
        let t1 = (Complex64::new(0.6, 0.0), Complex64::new(-0.5, 1.0));
        let s = synthetic(&[t1], 64, 0.1);
        let fit = prony_fit(&s, 1).unwrap();
        // already exact: identity
        let same = enforce_constraints(&fit, 0.6).unwrap();
        assert!((same.weights[0] - fit.weights[0]).norm() < 1e-12);
        // single term is forced to c0
        let forced = enforce_constraints(&fit, 0.8).unwrap();
        assert!((forced.weights[0] - Complex64::new(0.8, 0.0)).norm() < 1e-12);
        // perturbed sum is projected with |Δw| ≤ |deficit|/N per term
        let c0 = 0.6;
        let mut noisy = fit.clone();
        noisy.weights[0] *= Complex64::new(1.0, 1e-3);
        let fixed = enforce_constraints(&noisy, c0).unwrap();
        assert!((fixed.weight_sum() - Complex64::new(c0, 0.0)).norm() < 1e-14);
        assert!((fixed.weights[0] - noisy.weights[0]).norm() <= 1e-3 * c0 + 1e-12);
    }

    #[test]
    fn conjugate_closure_on_real_series() {
        // real series: conjugate pair of terms
        let w = Complex64::new(0.5, 0.2);
        let l = Complex64::new(-0.3, 1.4);
        let vals: Vec<Complex64> = (0..128)
            .map(|k| {
                let t = k as f64 * 0.08;
                let v = w * (l * t).exp();
                Complex64::new(2.0 * v.re, 0.0)
            })
            .collect();
        let s = CorrelationSeries::new(0.08, vals).unwrap();
        let fit = prony_fit(&s, 2).unwrap();
        let (a, b) = (fit.rates[0], fit.rates[1]);
        assert!((a - b.conj()).norm() < 1e-8, "rates not conjugate: {a} {b}");
        let (wa, wb) = (fit.weights[0], fit.weights[1]);
        assert!((wa - wb.conj()).norm() < 1e-8, "weights not conjugate: {wa} {wb}");
    }

    #[test]
    fn reconstruction_residual_matches_stored() {
        let t1 = (Complex64::new(0.9, 0.4), Complex64::new(-0.7, 1.1));
        let t2 = (Complex64::new(0.4, -0.4), Complex64::new(-0.2, -0.8));
        let s = synthetic(&[t1, t2], 160, 0.09);
        let fit = prony_fit(&s, 2).unwrap();
        assert!((fit.residual - fit.residual_on(&s)).abs() < 1e-12);
    }
}
