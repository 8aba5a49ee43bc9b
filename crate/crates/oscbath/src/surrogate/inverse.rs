//! Inverse eigenvalue problem: find diagonals α of the tridiagonal dynamical
//! matrix such that its spectrum equals a set of target rates λ̃, at fixed
//! couplings g.
//!
//! The N complex equations equate the characteristic-polynomial coefficients
//! of M(α; g) with those of Π_n (λ − λ̃_n) — the invariance of the sums of
//! principal minors order by order. They are solved by damped Newton from
//! many starts: permutations of the targets (exact in the decoupled limit),
//! perturbed permutations, and uniform random points.

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// One solution of the inversion at fixed couplings.
#[derive(Debug, Clone)]
pub struct InverseCandidate {
    pub alphas: Vec<Complex64>,
    /// All Γ_n = −2 Re α_n positive.
    pub physical: bool,
}

/// Characteristic polynomial det(λI − M) of the tridiagonal chain matrix,
/// as ascending coefficients (length N+1, leading coefficient 1), via the
/// continuant recurrence D_k = (λ − α_k) D_{k−1} + g_{k−1}² D_{k−2}.
pub fn charpoly(alphas: &[Complex64], couplings: &[f64]) -> Vec<Complex64> {
    let n = alphas.len();
    let mut dm2 = vec![Complex64::new(1.0, 0.0)];
    let mut dm1 = vec![-alphas[0], Complex64::new(1.0, 0.0)];
    for k in 1..n {
        let next = poly_shift_scale(&dm1, alphas[k], couplings[k - 1], &dm2);
        dm2 = dm1;
        dm1 = next;
    }
    dm1
}

// (λ − a)·p + g²·q with q two degrees lower
fn poly_shift_scale(p: &[Complex64], a: Complex64, g: f64, q: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); p.len() + 1];
    for (i, c) in p.iter().enumerate() {
        out[i + 1] += c;
        out[i] -= a * c;
    }
    let g2 = Complex64::new(g * g, 0.0);
    for (i, c) in q.iter().enumerate() {
        out[i] += g2 * c;
    }
    out
}

/// Π_n (λ − r_n) as ascending coefficients (leading 1).
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::default(); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= r * ci;
        }
        c = next;
    }
    c
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Analytic Jacobian ∂coeffs/∂α_j = −coeffs(D_{1..j−1} · E_{j+1..N}):
/// products of leading and trailing continuants.
fn charpoly_jacobian(alphas: &[Complex64], couplings: &[f64]) -> Vec<Vec<Complex64>> {
    let n = alphas.len();
    // leading continuants D_0..D_n (D_k covers rows 1..k)
    let mut lead: Vec<Vec<Complex64>> = Vec::with_capacity(n + 1);
    lead.push(vec![Complex64::new(1.0, 0.0)]);
    lead.push(vec![-alphas[0], Complex64::new(1.0, 0.0)]);
    for k in 1..n {
        let next = poly_shift_scale(&lead[k], alphas[k], couplings[k - 1], &lead[k - 1]);
        lead.push(next);
    }
    // trailing continuants E_k covering rows k..n (1-based); E_{n+1} = 1
    let mut trail: Vec<Vec<Complex64>> = vec![Vec::new(); n + 2];
    trail[n + 1] = vec![Complex64::new(1.0, 0.0)];
    trail[n] = vec![-alphas[n - 1], Complex64::new(1.0, 0.0)];
    for k in (1..n).rev() {
        // E_k = (λ − α_k) E_{k+1} + g_k² E_{k+2}, 1-based rows
        let next = poly_shift_scale(&trail[k + 1], alphas[k - 1], couplings[k - 1], &trail[k + 2]);
        trail[k] = next;
    }
    (0..n)
        .map(|j| {
            // cofactor: D_{j} (rows 1..j, 1-based j) times E_{j+2}
            let prod = poly_mul(&lead[j], &trail[j + 2]);
            prod.iter().map(|z| -z).collect()
        })
        .collect()
}

/// Solves the coefficient-matching system for one coupling tuple.
///
/// Seeds: all permutations of the targets (capped), perturbed permutations,
/// and `n_starts` uniform random points. Converged roots are deduplicated
/// after sorting and tagged physical when all Γ_n > 0. No convergent start
/// is an empty result, not an error.
pub fn solve_inverse_eigenvalue<R: Rng>(
    couplings: &[f64],
    targets: &[Complex64],
    n_starts: usize,
    rng: &mut R,
) -> Result<Vec<InverseCandidate>> {
    let n = targets.len();
    if couplings.len() + 1 != n {
        return Err(Error::Contract(format!(
            "{} couplings incompatible with {} target rates",
            couplings.len(),
            n
        )));
    }
    if couplings.iter().any(|g| *g <= 0.0) && n > 1 {
        return Err(Error::Contract("couplings must be positive for the inversion".into()));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (targets[i] - targets[j]).norm() < 1e-12 {
                return Err(Error::Degenerate("target rates must be pairwise distinct".into()));
            }
        }
    }
    if n == 1 {
        // trace equation only: α₁ = λ̃₁ exactly
        return Ok(vec![InverseCandidate { alphas: vec![targets[0]], physical: targets[0].re < 0.0 }]);
    }

    let target_coeffs: Vec<Complex64> = poly_from_roots(targets)[..n].to_vec();
    let scale = targets.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let tol = 1e-10 * (1.0 + scale.powi(n as i32));
    let g_mean = couplings.iter().sum::<f64>() / couplings.len() as f64;

    let mut seeds: Vec<Vec<Complex64>> = permutations(targets, 720);
    let n_perm = seeds.len();
    for k in 0..n_starts {
        if k % 2 == 0 {
            // perturbed permutation: the decoupled-limit guess plus O(g) noise
            let base = &seeds[k % n_perm];
            let s: Vec<Complex64> = base
                .iter()
                .map(|a| {
                    a + g_mean
                        * Complex64::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        )
                })
                .collect();
            seeds.push(s);
        } else {
            let s: Vec<Complex64> = (0..n)
                .map(|_| {
                    Complex64::new(
                        -rng.random_range(0.0..2.0 * scale),
                        rng.random_range(-2.0 * scale..2.0 * scale),
                    )
                })
                .collect();
            seeds.push(s);
        }
    }

    let mut unique: Vec<Vec<Complex64>> = Vec::new();
    for seed in &seeds {
        if let Some(sol) = newton(seed, couplings, &target_coeffs, tol) {
            let mut key = sol.clone();
            key.sort_by(|a, b| {
                (a.re, a.im)
                    .partial_cmp(&(b.re, b.im))
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let dup = unique.iter().any(|u| {
                u.iter()
                    .zip(&key)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
                    < 1e-8 * (1.0 + scale)
            });
            if !dup {
                unique.push(key);
            }
        }
    }

    Ok(unique
        .into_iter()
        .map(|alphas| {
            let physical = alphas.iter().all(|a| a.re < 0.0);
            InverseCandidate { alphas, physical }
        })
        .collect())
}

fn permutations(items: &[Complex64], cap: usize) -> Vec<Vec<Complex64>> {
    let mut out = Vec::new();
    let mut work = items.to_vec();
    permute_heap(&mut work, items.len(), &mut out, cap);
    out
}

fn permute_heap(work: &mut Vec<Complex64>, k: usize, out: &mut Vec<Vec<Complex64>>, cap: usize) {
    if out.len() >= cap {
        return;
    }
    if k <= 1 {
        out.push(work.clone());
        return;
    }
    for i in 0..k {
        permute_heap(work, k - 1, out, cap);
        if k % 2 == 0 {
            work.swap(i, k - 1);
        } else {
            work.swap(0, k - 1);
        }
    }
}

fn newton(
    seed: &[Complex64],
    couplings: &[f64],
    target_coeffs: &[Complex64],
    tol: f64,
) -> Option<Vec<Complex64>> {
    let n = seed.len();
    let mut al = seed.to_vec();
    let residual = |al: &[Complex64]| -> Vec<Complex64> {
        charpoly(al, couplings)[..n]
            .iter()
            .zip(target_coeffs)
            .map(|(a, b)| a - b)
            .collect()
    };
    let mut f = residual(&al);
    for _ in 0..120 {
        let fmax = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if fmax < tol {
            return Some(al);
        }
        let jac_cols = charpoly_jacobian(&al, couplings);
        let mut jac = Array2::<Complex64>::zeros((n, n));
        for (j, col) in jac_cols.iter().enumerate() {
            for i in 0..n {
                jac[(i, j)] = col[i];
            }
        }
        let rhs = Array1::from_vec(f.iter().map(|z| -z).collect());
        let delta = jac.solve(&rhs).ok()?;
        // damped update: halve until the residual norm decreases
        let f0: f64 = f.iter().map(|z| z.norm_sqr()).sum();
        let mut lam = 1.0f64;
        let mut moved = false;
        for _ in 0..40 {
            let cand: Vec<Complex64> =
                al.iter().zip(delta.iter()).map(|(a, d)| a + lam * d).collect();
            let fc = residual(&cand);
            if fc.iter().map(|z| z.norm_sqr()).sum::<f64>() < f0 {
                al = cand;
                f = fc;
                moved = true;
                break;
            }
            lam *= 0.5;
        }
        if !moved {
            return None;
        }
    }
    let fmax = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if fmax < tol {
        Some(al)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::surrogate::{build_matrix, decompose};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn charpoly_matches_eigendecomposition() {
        let alphas = vec![
            Complex64::new(-0.3, -1.2),
            Complex64::new(-0.9, 0.4),
            Complex64::new(-0.1, -0.5),
        ];
        let g = vec![0.7, 0.4];
        let m = build_matrix(&alphas, &g);
        let d = decompose(&m).unwrap();
        let from_roots = poly_from_roots(&d.eigenvalues);
        let direct = charpoly(&alphas, &g);
        for (a, b) in direct.iter().zip(&from_roots) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let alphas = vec![Complex64::new(-0.5, -1.0), Complex64::new(-1.1, 0.6), Complex64::new(-0.2, 0.1)];
        let g = vec![0.9, 0.3];
        let jac = charpoly_jacobian(&alphas, &g);
        let h = 1e-7;
        for j in 0..3 {
            let mut ap = alphas.clone();
            ap[j] += Complex64::new(h, 0.0);
            let fp = charpoly(&ap, &g);
            let f0 = charpoly(&alphas, &g);
            for i in 0..3 {
                let fd = (fp[i] - f0[i]) / h;
                assert!(
                    (fd - jac[j][i]).norm() < 1e-5 * (1.0 + jac[j][i].norm()),
                    "entry ({i},{j}): fd {fd} vs analytic {}",
                    jac[j][i]
                );
            }
        }
    }

    #[test]
    fn single_mode_is_trace_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = vec![Complex64::new(-0.4, -2.0)];
        let sols = solve_inverse_eigenvalue(&[], &t, 4, &mut rng).unwrap();
        assert_eq!(sols.len(), 1);
        assert!((sols[0].alphas[0] - t[0]).norm() < 1e-14);
        assert!(sols[0].physical);
    }

    #[test]
    fn two_mode_closed_form_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lt = vec![Complex64::new(-0.3, -1.5), Complex64::new(-0.9, 0.8)];
        let g = 0.6;
        let sols = solve_inverse_eigenvalue(&[g], &lt, 32, &mut rng).unwrap();
        // closed form: α = (λ̃₁+λ̃₂)/2 ± √(((λ̃₁−λ̃₂)/2)² + g²)
        let half = 0.5 * (lt[0] - lt[1]);
        let rt = (half * half + Complex64::new(g * g, 0.0)).sqrt();
        let a1 = 0.5 * (lt[0] + lt[1]) + rt;
        let a2 = 0.5 * (lt[0] + lt[1]) - rt;
        let found = sols.iter().any(|s| {
            ((s.alphas[0] - a1).norm() < 1e-8 && (s.alphas[1] - a2).norm() < 1e-8)
                || ((s.alphas[0] - a2).norm() < 1e-8 && (s.alphas[1] - a1).norm() < 1e-8)
        });
        assert!(found, "closed-form branch missing from {sols:?}");
    }

    #[test]
    fn roundtrip_from_forward_construction() {
        // build M from known physical parameters, feed its spectrum back
        let bath = fixtures::ohmic_t1();
        let m = build_matrix(&bath.alphas(), &bath.couplings);
        let d = decompose(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sols =
            solve_inverse_eigenvalue(&bath.couplings, &d.eigenvalues, 64, &mut rng).unwrap();
        let mut expect = bath.alphas();
        expect.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        let found = sols.iter().any(|s| {
            s.physical
                && s.alphas
                    .iter()
                    .zip(&expect)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
                    < 1e-7
        });
        assert!(found, "true alphas not recovered; {} candidates", sols.len());
    }
}
