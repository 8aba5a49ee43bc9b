//! Matching the mode weights w_n(c) = (u^n·c)(v^n·c̄) to fitted targets w̃_n
//! by varying the coupling coefficients c (with Im c_N = 0 fixing the global
//! phase).
//!
//! The N = 2 case reduces to a 2×2 real linear system in the invariants
//! P = |c₁|² − c₂² and Q = Re(c₁)c₂ and solves in closed form when a real
//! solution exists; the general case runs multistart least squares followed
//! by a Nelder–Mead polish of the Manhattan distance Σ|w_n − w̃_n|.

use num_complex::Complex64;
use rand::Rng;

use crate::error::Result;
use crate::numerics::optim;

use super::DynamicalMatrix;

/// Packs the free real parameters (Re c_1..N, Im c_1..N−1) into coefficients.
fn unpack(x: &[f64], n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| Complex64::new(x[i], if i + 1 < n { x[n + i] } else { 0.0 }))
        .collect()
}

fn pack(c: &[Complex64]) -> Vec<f64> {
    let n = c.len();
    let mut x = Vec::with_capacity(2 * n - 1);
    x.extend(c.iter().map(|z| z.re));
    x.extend(c.iter().take(n - 1).map(|z| z.im));
    x
}

/// Σ_n |w_n(c) − w̃_n|.
pub fn manhattan_distance(dynm: &DynamicalMatrix, coeffs: &[Complex64], target: &[Complex64]) -> f64 {
    dynm.weights(coeffs)
        .iter()
        .zip(target)
        .map(|(w, t)| (w - t).norm())
        .sum()
}

/// Canonical phase: rotate so the last coefficient is real and nonnegative.
/// Already-real inputs are handled exactly (sign flip only), so repeated
/// gauge fixing is idempotent to the bit.
pub fn gauge_fix(coeffs: &mut [Complex64]) {
    let Some(last) = coeffs.last().copied() else { return };
    if last.norm() == 0.0 {
        return;
    }
    if last.im == 0.0 {
        if last.re < 0.0 {
            for c in coeffs.iter_mut() {
                *c = -*c;
            }
        }
        return;
    }
    let phase = last.conj() / last.norm();
    for c in coeffs.iter_mut() {
        *c *= phase;
    }
    let n = coeffs.len();
    coeffs[n - 1] = Complex64::new(coeffs[n - 1].re, 0.0);
}

/// Minimizes the Manhattan distance between achievable and target weights.
///
/// Returns the best coefficients (gauge-fixed) and the achieved distance.
/// Best-effort: an imperfect match is reported through the distance, never
/// as an error.
pub fn match_weights<R: Rng>(
    dynm: &DynamicalMatrix,
    target: &[Complex64],
    n_starts: usize,
    rng: &mut R,
) -> Result<(Vec<Complex64>, f64)> {
    let n = dynm.n();
    debug_assert_eq!(target.len(), n);
    let sum: Complex64 = target.iter().sum();
    let scale = sum.re.abs().max(target.iter().map(|w| w.norm()).sum::<f64>() / n as f64);

    if n == 1 {
        // w = c² with c real: exact when the target is real positive
        let c = if sum.re > 0.0 { sum.re.sqrt() } else { 0.0 };
        let coeffs = vec![Complex64::new(c, 0.0)];
        let d = manhattan_distance(dynm, &coeffs, target);
        return Ok((coeffs, d));
    }

    let mut best: Option<(Vec<Complex64>, f64)> = None;
    let consider = |coeffs: Vec<Complex64>, d: f64, best: &mut Option<(Vec<Complex64>, f64)>| {
        if best.as_ref().map(|b| d < b.1).unwrap_or(true) {
            *best = Some((coeffs, d));
        }
    };

    if n == 2 {
        if let Some(c) = two_mode_exact_match(dynm, target) {
            let d = manhattan_distance(dynm, &c, target);
            consider(c, d, &mut best);
        }
    }

    // least-squares stage: smooth objective Σ|Δw|²
    let residual = |x: &[f64]| -> Vec<f64> {
        let c = unpack(x, n);
        let w = dynm.weights(&c);
        let mut r = Vec::with_capacity(2 * n);
        for (wi, ti) in w.iter().zip(target) {
            r.push(wi.re - ti.re);
            r.push(wi.im - ti.im);
        }
        r
    };
    let amp = scale.max(1e-12).sqrt();
    for _ in 0..n_starts.max(1) {
        let x0: Vec<f64> = (0..2 * n - 1).map(|_| amp * rng.random_range(-1.0..1.0)).collect();
        let (x, _) = optim::levenberg_marquardt(&residual, &x0, 1200, 1e-13);
        let c = unpack(&x, n);
        let d = manhattan_distance(dynm, &c, target);
        consider(c, d, &mut best);
        if best.as_ref().map(|b| b.1 < 1e-12 * scale.max(1.0)).unwrap_or(false) {
            break;
        }
    }

    // Manhattan polish of the best least-squares point (the ranking metric
    // is L¹, which the smooth stage only approximates)
    let (c_best, d_best) = best.unwrap();
    let obj = |x: &[f64]| -> f64 {
        let c = unpack(x, n);
        manhattan_distance(dynm, &c, target)
    };
    let (x_pol, d_pol) = optim::nelder_mead(obj, &pack(&c_best), amp, 400, 1e-12);
    let (mut coeffs, dist) = if d_pol < d_best {
        (unpack(&x_pol, n), d_pol)
    } else {
        (c_best, d_best)
    };
    gauge_fix(&mut coeffs);
    Ok((coeffs, dist))
}

/// Closed-form two-mode weight match.
///
/// With the pairing fixed by the decomposition, w₁ − w₂ is linear in the
/// real invariants P = |c₁|² − c₂², Q = Re(c₁)c₂; together with
/// s = w̃₁ + w̃₂ = |c₁|² + c₂², a real solution exists iff |P| ≤ s and
/// 4Q² ≤ s² − P².
pub fn two_mode_exact_match(dynm: &DynamicalMatrix, target: &[Complex64]) -> Option<Vec<Complex64>> {
    let s = (target[0] + target[1]).re;
    if s <= 0.0 {
        return None;
    }
    // probe the linear map: c=(1,0) has (P,Q)=(1,0); c=(1,1) has (P,Q)=(0,1)
    let dw = |c: &[Complex64]| {
        let w = dynm.weights(c);
        w[0] - w[1]
    };
    let a = dw(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    let b = dw(&[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
    let delta = target[0] - target[1];
    let det = a.re * b.im - a.im * b.re;
    if det.abs() < 1e-14 * (a.norm() * b.norm()).max(1e-300) {
        return None;
    }
    let p = (delta.re * b.im - delta.im * b.re) / det;
    let q = (a.re * delta.im - a.im * delta.re) / det;

    if p.abs() > s {
        return None;
    }
    let c2_sq = 0.5 * (s - p);
    let c1_sq = 0.5 * (s + p); // |c₁|²
    if 4.0 * q * q > s * s - p * p + 1e-14 * s * s {
        return None;
    }
    let (x, y, z);
    if c2_sq > 1e-30 * s {
        z = c2_sq.sqrt();
        x = q / z;
        y = (c1_sq - x * x).max(0.0).sqrt();
    } else {
        // c₂ ≈ 0: Q must vanish too
        if q.abs() > 1e-12 * s {
            return None;
        }
        z = 0.0;
        x = c1_sq.sqrt();
        y = 0.0;
    }
    // two sign choices for Im c₁; keep the better one
    let cand1 = vec![Complex64::new(x, y), Complex64::new(z, 0.0)];
    let cand2 = vec![Complex64::new(x, -y), Complex64::new(z, 0.0)];
    let d1 = manhattan_distance(dynm, &cand1, target);
    let d2 = manhattan_distance(dynm, &cand2, target);
    Some(if d1 <= d2 { cand1 } else { cand2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Unit;
    use crate::surrogate::{dynamical_matrix, SurrogateBath};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_bath(n: usize) -> SurrogateBath {
        let freqs: Vec<f64> = (0..n).map(|i| 0.8 + 0.7 * i as f64).collect();
        let coup: Vec<f64> = (0..n - 1).map(|i| 0.5 + 0.2 * i as f64).collect();
        let rates: Vec<f64> = (0..n).map(|i| 0.3 + 0.4 * i as f64).collect();
        let coeffs: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(0.6 - 0.1 * i as f64, if i + 1 < n { 0.2 * i as f64 } else { 0.0 }))
            .collect();
        SurrogateBath::new(freqs, coup, rates, coeffs, vec![4; n], Unit::OmegaC).unwrap()
    }

    #[test]
    fn scalar_case_square_root() {
        let bath = toy_bath(1);
        let d = dynamical_matrix(&bath).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let target = vec![Complex64::new(0.49, 0.0)];
        let (c, dist) = match_weights(&d, &target, 4, &mut rng).unwrap();
        assert!((c[0] - Complex64::new(0.7, 0.0)).norm() < 1e-12);
        assert!(dist < 1e-12);
    }

    #[test]
    fn two_mode_forward_targets_recovered() {
        let bath = toy_bath(2);
        let d = dynamical_matrix(&bath).unwrap();
        let target = d.weights(&bath.coeffs);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (c, dist) = match_weights(&d, &target, 8, &mut rng).unwrap();
        assert!(dist < 1e-8, "distance {dist}");
        // recovered up to global sign
        let same = c
            .iter()
            .zip(&bath.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let flipped = c
            .iter()
            .zip(&bath.coeffs)
            .map(|(a, b)| (a + b).norm())
            .fold(0.0, f64::max);
        assert!(same < 1e-6 || flipped < 1e-6, "c = {c:?} vs {:?}", bath.coeffs);
    }

    #[test]
    fn four_mode_forward_targets_matched() {
        let bath = toy_bath(4);
        let d = dynamical_matrix(&bath).unwrap();
        let target = d.weights(&bath.coeffs);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (_, dist) = match_weights(&d, &target, 12, &mut rng).unwrap();
        let scale: f64 = target.iter().map(|w| w.norm()).sum();
        assert!(dist < 1e-7 * scale, "distance {dist} vs scale {scale}");
    }

    #[test]
    fn gauge_fix_makes_last_real() {
        let mut c = vec![Complex64::new(0.3, -0.4), Complex64::new(0.1, 0.9)];
        gauge_fix(&mut c);
        assert!(c[1].im.abs() < 1e-15);
        assert!(c[1].re >= 0.0);
    }
}
