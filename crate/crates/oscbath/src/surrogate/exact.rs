//! Exact inversions for one, two and three modes.
//!
//! With c₂ = 0 (two modes) or c₂ = c₃ = 0 (three modes) the inversion
//! overdetermines and admits closed forms; a solution exists only when the
//! residual imaginary parts vanish and the sign constraints (Re g² > 0,
//! Γ_n > 0) hold. The violated constraint is reported on infeasibility.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::expfit::ExponentialFit;
use crate::numerics::optim;
use crate::spectral::Unit;

use super::inverse::poly_from_roots;
use super::weights::{gauge_fix, two_mode_exact_match};
use super::{build_matrix, decompose, SurrogateBath};

/// Outcome of an exact inversion attempt.
#[derive(Debug, Clone)]
pub enum ExactInversion {
    Feasible(SurrogateBath),
    /// No valid parameters; carries the first violated constraint.
    Infeasible { violated: String },
}

impl ExactInversion {
    pub fn bath(self) -> Option<SurrogateBath> {
        match self {
            ExactInversion::Feasible(b) => Some(b),
            ExactInversion::Infeasible { .. } => None,
        }
    }
}

/// Relative tolerance for "vanishing" imaginary parts of g².
const IM_TOL: f64 = 1e-8;

fn check_targets(fit: &ExponentialFit, n: usize) -> Result<()> {
    if fit.n_terms() != n {
        return Err(Error::Contract(format!(
            "expected a {n}-term fit, got {}",
            fit.n_terms()
        )));
    }
    let s = fit.weight_sum();
    if !(s.re > 0.0) || s.im.abs() > 1e-8 * s.norm() {
        return Err(Error::Contract(format!("Σw̃ must be real positive, got {s}")));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (fit.rates[i] - fit.rates[j]).norm() < 1e-12 {
                return Err(Error::Degenerate("target rates must be distinct".into()));
            }
        }
    }
    Ok(())
}

/// Two modes with only the first coupled (c₂ = 0):
///
///   |c₁|² = w̃₁ + w̃₂,
///   α₁ = (w̃₁λ̃₁ + w̃₂λ̃₂)/(w̃₁ + w̃₂),   α₂ = (w̃₁λ̃₂ + w̃₂λ̃₁)/(w̃₁ + w̃₂),
///   g²  = ((λ̃₁−λ̃₂)/2)² (((w̃₁−w̃₂)/(w̃₁+w̃₂))² − 1).
pub fn exact_two_mode(fit: &ExponentialFit) -> Result<ExactInversion> {
    check_targets(fit, 2)?;
    let (l1, l2) = (fit.rates[0], fit.rates[1]);
    let (w1, w2) = (fit.weights[0], fit.weights[1]);
    let s = w1 + w2;

    let a1 = (w1 * l1 + w2 * l2) / s;
    let a2 = (w1 * l2 + w2 * l1) / s;
    let ratio = (w1 - w2) / s;
    let g2 = (0.5 * (l1 - l2)).powu(2) * (ratio * ratio - 1.0);

    let scale = l1.norm().max(l2.norm()).powi(2);
    if g2.im.abs() > IM_TOL * (g2.norm() + scale) {
        return Ok(ExactInversion::Infeasible {
            violated: format!("Im(g²) = {:.3e} does not vanish", g2.im),
        });
    }
    if g2.re <= 0.0 {
        return Ok(ExactInversion::Infeasible { violated: format!("Re(g²) = {:.3e} ≤ 0", g2.re) });
    }
    for (k, a) in [a1, a2].iter().enumerate() {
        if a.re >= 0.0 {
            return Ok(ExactInversion::Infeasible {
                violated: format!("Γ_{} = {:.3e} ≤ 0", k + 1, -2.0 * a.re),
            });
        }
    }
    let c1 = s.re.sqrt();
    let bath = SurrogateBath::new(
        vec![-a1.im, -a2.im],
        vec![g2.re.sqrt()],
        vec![-2.0 * a1.re, -2.0 * a2.re],
        vec![Complex64::new(c1, 0.0), Complex64::new(0.0, 0.0)],
        vec![],
        Unit::OmegaC,
    )?;
    Ok(ExactInversion::Feasible(bath))
}

/// Three modes with only the first coupled (c₂ = c₃ = 0): fully explicit,
/// subject to two residual reality constraints (both Im g² must vanish).
pub fn exact_three_mode_decoupled(fit: &ExponentialFit) -> Result<ExactInversion> {
    check_targets(fit, 3)?;
    let l = &fit.rates;
    let w = &fit.weights;
    let s: Complex64 = w.iter().sum();

    let den = w[1] * w[2] * (l[1] - l[2]).powu(2)
        + w[2] * w[0] * (l[2] - l[0]).powu(2)
        + w[0] * w[1] * (l[0] - l[1]).powu(2);
    if den.norm() < 1e-300 {
        return Ok(ExactInversion::Infeasible { violated: "degenerate weight combination".into() });
    }
    let num = w[1] * w[2] * (l[1] - l[2]).powu(2) * l[0]
        + w[2] * w[0] * (l[2] - l[0]).powu(2) * l[1]
        + w[0] * w[1] * (l[0] - l[1]).powu(2) * l[2];

    let a1 = (w[0] * l[0] + w[1] * l[1] + w[2] * l[2]) / s;
    let a3 = num / den;
    let a2 = ((w[1] + w[2]) * l[0] + (w[2] + w[0]) * l[1] + (w[0] + w[1]) * l[2]) / s - a3;
    let g1_sq = -den / (s * s);
    let g2_sq = -(w[0] * w[1] * w[2]
        * (l[1] - l[2]).powu(2)
        * (l[2] - l[0]).powu(2)
        * (l[0] - l[1]).powu(2)
        * s)
        / (den * den);

    let scale = l.iter().map(|z| z.norm()).fold(0.0, f64::max).powi(2);
    for (name, g2) in [("g₁²", g1_sq), ("g₂²", g2_sq)] {
        if g2.im.abs() > IM_TOL * (g2.norm() + scale) {
            return Ok(ExactInversion::Infeasible {
                violated: format!("Im({name}) = {:.3e} does not vanish", g2.im),
            });
        }
        if g2.re <= 0.0 {
            return Ok(ExactInversion::Infeasible {
                violated: format!("Re({name}) = {:.3e} ≤ 0", g2.re),
            });
        }
    }
    for (k, a) in [a1, a2, a3].iter().enumerate() {
        if a.re >= 0.0 {
            return Ok(ExactInversion::Infeasible {
                violated: format!("Γ_{} = {:.3e} ≤ 0", k + 1, -2.0 * a.re),
            });
        }
    }
    let bath = SurrogateBath::new(
        vec![-a1.im, -a2.im, -a3.im],
        vec![g1_sq.re.sqrt(), g2_sq.re.sqrt()],
        vec![-2.0 * a1.re, -2.0 * a2.re, -2.0 * a3.re],
        vec![
            Complex64::new(s.re.sqrt(), 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ],
        vec![],
        Unit::OmegaC,
    )?;
    Ok(ExactInversion::Feasible(bath))
}

/// Three modes, c₂ = 0 with c₃ free: five real unknowns
/// (g₁, g₂, Re c₁, Im c₁, c₃) determined numerically by matching both the
/// characteristic polynomial and the paired weights.
pub fn exact_three_mode_c2_zero<R: Rng>(
    fit: &ExponentialFit,
    n_starts: usize,
    rng: &mut R,
) -> Result<ExactInversion> {
    check_targets(fit, 3)?;
    let targets = fit.rates.clone();
    let t_coeffs = poly_from_roots(&targets);
    let scale_l = targets.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scale_w = fit.weight_sum().re;

    // unknowns x = [Re α (3), Im α (3), g₁, g₂, Re c₁, Im c₁, c₃]
    let residual = |x: &[f64]| -> Vec<f64> {
        let alphas = [
            Complex64::new(x[0], x[3]),
            Complex64::new(x[1], x[4]),
            Complex64::new(x[2], x[5]),
        ];
        let g = [x[6].abs(), x[7].abs()];
        let coeffs = [Complex64::new(x[8], x[9]), Complex64::default(), Complex64::new(x[10], 0.0)];
        let mut r = Vec::with_capacity(12);
        let cp = super::inverse::charpoly(&alphas, &g);
        for k in 0..3 {
            let d = cp[k] - t_coeffs[k];
            r.push(d.re / (1.0 + scale_l.powi(3 - k as i32)));
            r.push(d.im / (1.0 + scale_l.powi(3 - k as i32)));
        }
        let m = build_matrix(&alphas, &g);
        match decompose(&m) {
            Ok(dynm) => {
                let w = dynm.weights(&coeffs);
                // pair computed eigenvalues to targets by best permutation
                let perm = best_pairing(&dynm.eigenvalues, &targets);
                for (k, &p) in perm.iter().enumerate() {
                    let d = w[k] - fit.weights[p];
                    r.push(d.re / scale_w);
                    r.push(d.im / scale_w);
                }
            }
            Err(_) => r.extend(std::iter::repeat(1e3).take(6)),
        }
        r
    };

    for _ in 0..n_starts {
        let mut x0 = Vec::with_capacity(11);
        // seed alphas near a random permutation of the targets
        let mut perm: Vec<usize> = (0..3).collect();
        for i in (1..3).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        for &p in &perm {
            x0.push(targets[p].re * rng.random_range(0.5..1.5));
        }
        for &p in &perm {
            x0.push(targets[p].im + 0.2 * scale_l * rng.random_range(-1.0..1.0));
        }
        x0.push(scale_l * rng.random_range(0.05..1.0));
        x0.push(scale_l * rng.random_range(0.05..1.0));
        let amp = scale_w.sqrt();
        x0.push(amp * rng.random_range(-1.0..1.0));
        x0.push(amp * rng.random_range(-1.0..1.0));
        x0.push(amp * rng.random_range(-1.0..1.0));

        let (x, cost) = optim::levenberg_marquardt(&residual, &x0, 4000, 1e-14);
        if cost < 1e-8 {
            let alphas = [
                Complex64::new(x[0], x[3]),
                Complex64::new(x[1], x[4]),
                Complex64::new(x[2], x[5]),
            ];
            if alphas.iter().any(|a| a.re >= 0.0) {
                continue;
            }
            let g = [x[6].abs(), x[7].abs()];
            if g.iter().any(|gi| *gi < 1e-12 * scale_l) {
                continue;
            }
            let mut coeffs =
                vec![Complex64::new(x[8], x[9]), Complex64::default(), Complex64::new(x[10], 0.0)];
            gauge_fix(&mut coeffs);
            let bath = SurrogateBath::new(
                alphas.iter().map(|a| -a.im).collect(),
                g.to_vec(),
                alphas.iter().map(|a| -2.0 * a.re).collect(),
                coeffs,
                vec![],
                Unit::OmegaC,
            )?;
            return Ok(ExactInversion::Feasible(bath));
        }
    }
    Ok(ExactInversion::Infeasible {
        violated: "no converged solution with Γ > 0 within the start budget".into(),
    })
}

/// Exact three-mode inversion: the fully explicit c₂ = c₃ = 0 form first,
/// then the five-unknown c₂ = 0 path.
pub fn exact_three_mode<R: Rng>(
    fit: &ExponentialFit,
    n_starts: usize,
    rng: &mut R,
) -> Result<ExactInversion> {
    match exact_three_mode_decoupled(fit)? {
        ExactInversion::Feasible(b) => Ok(ExactInversion::Feasible(b)),
        ExactInversion::Infeasible { .. } => exact_three_mode_c2_zero(fit, n_starts, rng),
    }
}

/// Best assignment of computed eigenvalues to targets (N ≤ 6: enumerate).
pub fn best_pairing(eigs: &[Complex64], targets: &[Complex64]) -> Vec<usize> {
    let n = eigs.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        let cost: f64 = (0..n).map(|k| (eigs[k] - targets[perm[k]]).norm()).sum();
        if best.as_ref().map(|b| cost < b.0).unwrap_or(true) {
            best = Some((cost, perm.clone()));
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best.unwrap().1
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Exact two-mode weight coefficients for externally supplied α and g; used
/// by the feasibility-window scan. Returns None when no real solution exists
/// or the chain is unphysical.
pub fn two_mode_exact_coeffs(
    targets: &[Complex64; 2],
    target_weights: &[Complex64; 2],
    g: f64,
) -> Result<Option<SurrogateBath>> {
    // α from the closed-form parametric inversion
    let half = 0.5 * (targets[0] - targets[1]);
    let rt = (half * half + Complex64::new(g * g, 0.0)).sqrt();
    let a1 = 0.5 * (targets[0] + targets[1]) + rt;
    let a2 = 0.5 * (targets[0] + targets[1]) - rt;
    if a1.re >= 0.0 || a2.re >= 0.0 {
        return Ok(None);
    }
    let m = build_matrix(&[a1, a2], &[g]);
    let dynm = match decompose(&m) {
        Ok(d) => d,
        Err(_) => return Ok(None),
    };
    // permute targets into the decomposition's eigenvalue order
    let perm = best_pairing(&dynm.eigenvalues, targets);
    let paired = [target_weights[perm[0]], target_weights[perm[1]]];
    match two_mode_exact_match(&dynm, &paired) {
        Some(mut coeffs) => {
            // accept only true solutions of the weight equations
            let d = super::weights::manhattan_distance(&dynm, &coeffs, &paired);
            let scale = (paired[0] + paired[1]).re;
            if d > 1e-6 * scale {
                return Ok(None);
            }
            gauge_fix(&mut coeffs);
            Ok(Some(SurrogateBath::new(
                vec![-a1.im, -a2.im],
                vec![g],
                vec![-2.0 * a1.re, -2.0 * a2.re],
                coeffs,
                vec![],
                Unit::OmegaC,
            )?))
        }
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::dynamical_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn forward_fit(bath: &SurrogateBath) -> ExponentialFit {
        let d = dynamical_matrix(bath).unwrap();
        ExponentialFit {
            rates: d.eigenvalues.clone(),
            weights: d.weights(&bath.coeffs),
            residual: 0.0,
            grid_dt: 0.1,
            grid_len: 0,
            reduced_from: None,
            refine_stagnated: false,
        }
    }

    fn close(a: &SurrogateBath, b: &SurrogateBath, tol: f64) -> bool {
        let d1 = dynamical_matrix(a).unwrap();
        let d2 = dynamical_matrix(b).unwrap();
        for t in [0.0, 0.3, 1.1, 2.7] {
            let ca = d1.correlation(&a.coeffs, t);
            let cb = d2.correlation(&b.coeffs, t);
            if (ca - cb).norm() > tol * ca.norm().max(1.0) {
                return false;
            }
        }
        true
    }

    #[test]
    fn two_mode_roundtrip() {
        let truth = SurrogateBath::new(
            vec![1.3, 0.4],
            vec![0.7],
            vec![0.5, 1.1],
            vec![Complex64::new(0.9, 0.0), Complex64::new(0.0, 0.0)],
            vec![],
            Unit::OmegaC,
        )
        .unwrap();
        let fit = forward_fit(&truth);
        match exact_two_mode(&fit).unwrap() {
            ExactInversion::Feasible(bath) => {
                assert!(close(&bath, &truth, 1e-10), "correlation mismatch");
            }
            ExactInversion::Infeasible { violated } => panic!("should be feasible: {violated}"),
        }
    }

    #[test]
    fn two_mode_conjugate_targets_branch() {
        // w̃₁ = w̃₂ real, λ̃₂ = conj(λ̃₁): ratio = 0 so g² = −((λ₁−λ₂)/2)².
        // λ₁−λ₂ = −2iΩ is purely imaginary, so g² = Ω² > 0 is feasible;
        // the constraints instead bite through Γ positivity when Re λ ≥ 0.
        let om = 1.4;
        let fit = ExponentialFit {
            rates: vec![Complex64::new(-0.2, -om), Complex64::new(-0.2, om)],
            weights: vec![Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)],
            residual: 0.0,
            grid_dt: 0.1,
            grid_len: 0,
            reduced_from: None,
            refine_stagnated: false,
        };
        match exact_two_mode(&fit).unwrap() {
            ExactInversion::Feasible(bath) => {
                assert!((bath.couplings[0] - om).abs() < 1e-12);
                // this is the equal-weight thermal-like pair: α₁ = α₂ = −Γ/2
                assert!((bath.frequencies[0]).abs() < 1e-12);
            }
            ExactInversion::Infeasible { violated } => panic!("unexpected: {violated}"),
        }
    }

    #[test]
    fn three_mode_decoupled_roundtrip() {
        let truth = SurrogateBath::new(
            vec![1.0, 0.3, 0.5],
            vec![0.6, 0.45],
            vec![0.8, 1.8, 0.5],
            vec![
                Complex64::new(1.3, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
            vec![],
            Unit::OmegaC,
        )
        .unwrap();
        let fit = forward_fit(&truth);
        match exact_three_mode_decoupled(&fit).unwrap() {
            ExactInversion::Feasible(bath) => {
                assert!(close(&bath, &truth, 1e-8), "correlation mismatch");
            }
            ExactInversion::Infeasible { violated } => panic!("should be feasible: {violated}"),
        }
    }

    #[test]
    fn three_mode_c2_zero_roundtrip() {
        let truth = SurrogateBath::new(
            vec![0.9, 0.2, 1.6],
            vec![0.5, 0.7],
            vec![0.6, 1.2, 0.4],
            vec![
                Complex64::new(0.8, 0.3),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.6, 0.0),
            ],
            vec![],
            Unit::OmegaC,
        )
        .unwrap();
        let fit = forward_fit(&truth);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        match exact_three_mode(&fit, 40, &mut rng).unwrap() {
            ExactInversion::Feasible(bath) => {
                assert!(close(&bath, &truth, 1e-6), "correlation mismatch");
            }
            ExactInversion::Infeasible { violated } => panic!("should be feasible: {violated}"),
        }
    }

    #[test]
    fn generic_targets_are_infeasible() {
        // random complex targets almost surely violate the reality constraints
        let fit = ExponentialFit {
            rates: vec![
                Complex64::new(-0.4, -1.1),
                Complex64::new(-0.8, 0.5),
                Complex64::new(-1.5, -0.2),
            ],
            weights: vec![
                Complex64::new(0.3, 0.8),
                Complex64::new(0.5, -0.4),
                Complex64::new(0.2, -0.4),
            ],
            residual: 0.0,
            grid_dt: 0.1,
            grid_len: 0,
            reduced_from: None,
            refine_stagnated: false,
        };
        match exact_three_mode_decoupled(&fit).unwrap() {
            ExactInversion::Infeasible { violated } => {
                assert!(!violated.is_empty());
            }
            ExactInversion::Feasible(_) => panic!("generic targets should be infeasible"),
        }
    }
}
