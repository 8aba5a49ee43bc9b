//! Randomized search for surrogate-bath parameters matching a fitted
//! correlation function.
//!
//! Coupling tuples are sampled uniformly in boxes (0, g_max/4^s)^{N−1} on a
//! shrinking ladder of scales (the physically admissible region can sit at
//! couplings much smaller than the spectral spread of the fit). Every
//! physical inverse-eigenvalue candidate gets its weights matched, a direct
//! least-squares polish of the coefficients against the target series, and a
//! figure-of-merit rank. The best distinct couplings are then refined by a
//! Nelder–Mead descent of the merit over g.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfit::ExponentialFit;
use crate::numerics::optim;
use crate::spectral::{CorrelationSeries, Unit};

use super::exact::best_pairing;
use super::inverse::solve_inverse_eigenvalue;
use super::weights::{gauge_fix, manhattan_distance, match_weights};
use super::{build_matrix, decompose, figure_of_merit_grid, SurrogateBath};

/// Which figure of merit ranks candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum MeritKind {
    /// Double time integral ∫(t_max − τ)|ΔC(τ)|dτ on the sample grid.
    I1,
    /// Grid sum Δt Σ|ΔC(nΔt)|.
    #[default]
    I2,
}

/// Search configuration. Defaults follow the working values for chains of
/// up to ~5 modes; everything is overridable per job.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TsoConfig {
    /// Box edge for the coupling samples; default 5·max|Im λ̃|.
    pub g_max: Option<f64>,
    /// Total coupling samples across the ladder stages.
    pub samples: usize,
    /// Random Newton starts per sample (permutation seeds are always added).
    pub newton_starts: usize,
    /// Shrinking-box stages; stage s samples (0, g_max/4^s)^{N−1}.
    pub ladder_stages: usize,
    /// Weight-match least-squares starts per candidate.
    pub weight_starts: usize,
    /// Nelder–Mead merit evaluations per polished start.
    pub polish_evals: usize,
    /// How many distinct top couplings to polish.
    pub polish_top: usize,
    /// Ranked baths to keep.
    pub keep: usize,
    pub merit: MeritKind,
    pub seed: u64,
    /// Unit tag stamped on produced baths.
    #[serde(default)]
    pub unit: Unit,
}

impl Default for TsoConfig {
    fn default() -> Self {
        Self {
            g_max: None,
            samples: 512,
            newton_starts: 64,
            ladder_stages: 4,
            weight_starts: 6,
            polish_evals: 120,
            polish_top: 4,
            keep: 16,
            merit: MeritKind::I2,
            seed: 0,
            unit: Unit::OmegaC,
        }
    }
}

/// One ranked search result.
#[derive(Debug, Clone)]
pub struct RankedBath {
    pub bath: SurrogateBath,
    pub merit: f64,
    pub weight_distance: f64,
    /// Stage/sample the candidate came from (polished results keep their seed sample).
    pub sample_index: usize,
}

/// Search statistics for infeasibility reporting.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TsoDiagnostics {
    pub samples_total: usize,
    pub samples_with_solution: usize,
    pub samples_with_physical: usize,
    pub candidates_ranked: usize,
    /// Largest min_n Γ_n among unphysical candidates (how close the best
    /// rejected chain came to physicality).
    pub best_unphysical_gamma: Option<f64>,
    pub best_merit: Option<f64>,
}

/// Runs the full search against a target correlation series and its
/// exponential fit. Deterministic for a fixed seed; an empty result is not
/// an error (diagnostics tell how close the search came).
pub fn run_tso(
    target: &CorrelationSeries,
    fit: &ExponentialFit,
    cfg: &TsoConfig,
) -> Result<(Vec<RankedBath>, TsoDiagnostics)> {
    let n = fit.n_terms();
    if n == 0 {
        return Err(Error::Contract("fit has no terms".into()));
    }
    let g_max = cfg
        .g_max
        .unwrap_or_else(|| 5.0 * fit.rates.iter().map(|l| l.im.abs()).fold(0.0, f64::max))
        .max(1e-12);

    let mut diag = TsoDiagnostics::default();
    let mut results: Vec<RankedBath> = Vec::new();

    if n == 1 {
        // closed form: Ω = −Im λ̃, Γ = −2 Re λ̃, c = √w̃ (real branch)
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        if let Some(out) = evaluate_g(&[], fit, target, cfg, &mut rng) {
            diag.samples_total = 1;
            diag.samples_with_solution = 1;
            diag.samples_with_physical = usize::from(out.physical_found);
            if let Some((bath, merit, dist)) = out.best {
                results.push(RankedBath { bath, merit, weight_distance: dist, sample_index: 0 });
            }
        }
        finish(&mut results, &mut diag, cfg);
        return Ok((results, diag));
    }

    // --- ladder sampling ---
    let stages = cfg.ladder_stages.max(1);
    let per_stage = (cfg.samples / stages).max(1);
    let mut sample_points: Vec<(usize, Vec<f64>)> = Vec::new();
    for s in 0..stages {
        let edge = g_max / 4f64.powi(s as i32);
        for k in 0..per_stage {
            let id = s * per_stage + k;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(1 + id as u64);
            let g: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.0..edge).max(1e-9 * edge)).collect();
            sample_points.push((id, g));
        }
    }
    diag.samples_total = sample_points.len();

    let evals: Vec<(usize, Option<EvalOutcome>)> = sample_points
        .par_iter()
        .map(|(id, g)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(0x1000_0000 + *id as u64);
            (*id, evaluate_g(g, fit, target, cfg, &mut rng))
        })
        .collect();

    for (id, out) in evals {
        if let Some(out) = out {
            if out.any_solution {
                diag.samples_with_solution += 1;
            }
            if out.physical_found {
                diag.samples_with_physical += 1;
            }
            if let Some(gm) = out.best_unphysical_gamma {
                diag.best_unphysical_gamma =
                    Some(diag.best_unphysical_gamma.map_or(gm, |b: f64| b.max(gm)));
            }
            if let Some((bath, merit, dist)) = out.best {
                results.push(RankedBath { bath, merit, weight_distance: dist, sample_index: id });
            }
        }
    }

    // --- Nelder–Mead polish over g around the best distinct couplings ---
    sort_ranked(&mut results);
    let mut polish_seeds: Vec<(usize, Vec<f64>)> = Vec::new();
    for r in &results {
        let g = r.bath.couplings.clone();
        let distinct = polish_seeds
            .iter()
            .all(|(_, s)| rel_distance(s, &g) > 0.2);
        if distinct {
            polish_seeds.push((r.sample_index, g));
        }
        if polish_seeds.len() >= cfg.polish_top {
            break;
        }
    }
    let polished: Vec<Option<RankedBath>> = polish_seeds
        .par_iter()
        .map(|(id, g0)| {
            let objective = |g: &[f64]| -> f64 {
                if g.iter().any(|x| *x <= 0.0 || !x.is_finite()) {
                    return f64::INFINITY;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ hash_g(g));
                match evaluate_g(g, fit, target, cfg, &mut rng) {
                    Some(out) => out.best.map(|(_, m, _)| m).unwrap_or(f64::INFINITY),
                    None => f64::INFINITY,
                }
            };
            let scale = g0.iter().cloned().fold(0.0, f64::max).max(1e-6);
            let (g_best, merit) = optim::nelder_mead(objective, g0, scale, cfg.polish_evals, 1e-10);
            if !merit.is_finite() {
                return None;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ hash_g(&g_best));
            evaluate_g(&g_best, fit, target, cfg, &mut rng).and_then(|out| {
                out.best.map(|(bath, merit, dist)| RankedBath {
                    bath,
                    merit,
                    weight_distance: dist,
                    sample_index: *id,
                })
            })
        })
        .collect();
    results.extend(polished.into_iter().flatten());

    finish(&mut results, &mut diag, cfg);
    Ok((results, diag))
}

fn finish(results: &mut Vec<RankedBath>, diag: &mut TsoDiagnostics, cfg: &TsoConfig) {
    sort_ranked(results);
    // drop near-duplicates (same basin reached from different samples)
    let mut kept: Vec<RankedBath> = Vec::new();
    for r in results.drain(..) {
        let dup = kept.iter().any(|k| {
            rel_distance(&k.bath.couplings, &r.bath.couplings) < 1e-4
                && (k.merit - r.merit).abs() < 1e-8 * (1.0 + k.merit.abs())
        });
        if !dup {
            kept.push(r);
        }
        if kept.len() >= cfg.keep {
            break;
        }
    }
    *results = kept;
    diag.candidates_ranked = results.len();
    diag.best_merit = results.first().map(|r| r.merit);
}

fn sort_ranked(results: &mut [RankedBath]) {
    results.sort_by(|a, b| {
        a.merit
            .partial_cmp(&b.merit)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.sample_index.cmp(&b.sample_index))
    });
}

fn rel_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let scale = a
        .iter()
        .chain(b.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1e-12);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

fn hash_g(g: &[f64]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for x in g {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
    }
    h
}

struct EvalOutcome {
    any_solution: bool,
    physical_found: bool,
    best_unphysical_gamma: Option<f64>,
    best: Option<(SurrogateBath, f64, f64)>,
}

/// Evaluates one coupling tuple: inverse-eigenvalue solve, weight match,
/// direct coefficient polish against the target series, merit.
fn evaluate_g<R: Rng>(
    g: &[f64],
    fit: &ExponentialFit,
    target: &CorrelationSeries,
    cfg: &TsoConfig,
    rng: &mut R,
) -> Option<EvalOutcome> {
    let candidates = solve_inverse_eigenvalue(g, &fit.rates, cfg.newton_starts, rng).ok()?;
    let mut out = EvalOutcome {
        any_solution: !candidates.is_empty(),
        physical_found: false,
        best_unphysical_gamma: None,
        best: None,
    };
    for cand in candidates {
        if !cand.physical {
            let min_gamma = cand
                .alphas
                .iter()
                .map(|a| -2.0 * a.re)
                .fold(f64::INFINITY, f64::min);
            out.best_unphysical_gamma =
                Some(out.best_unphysical_gamma.map_or(min_gamma, |b: f64| b.max(min_gamma)));
            continue;
        }
        out.physical_found = true;
        let m = build_matrix(&cand.alphas, g);
        let dynm = match decompose(&m) {
            Ok(d) => d,
            Err(_) => continue,
        };
        let perm = best_pairing(&dynm.eigenvalues, &fit.rates);
        let paired_w: Vec<Complex64> = perm.iter().map(|&p| fit.weights[p]).collect();

        let (c0, dist0) = match match_weights(&dynm, &paired_w, cfg.weight_starts, rng) {
            Ok(v) => v,
            Err(_) => continue,
        };

        // direct polish of c against the target series (the merit metric)
        let n = dynm.n();
        let grid: Vec<f64> = target.times();
        let modes: Vec<Vec<Complex64>> = grid
            .iter()
            .map(|&t| dynm.eigenvalues.iter().map(|l| (l * t).exp()).collect())
            .collect();
        let resid = |x: &[f64]| -> Vec<f64> {
            let c: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(x[i], if i + 1 < n { x[n + i] } else { 0.0 }))
                .collect();
            let w = dynm.weights(&c);
            let mut r = Vec::with_capacity(2 * grid.len());
            for (k, row) in modes.iter().enumerate() {
                let model: Complex64 = row.iter().zip(&w).map(|(e, wi)| e * wi).sum();
                let d = model - target.values[k];
                r.push(d.re);
                r.push(d.im);
            }
            r
        };
        let mut x0 = Vec::with_capacity(2 * n - 1);
        x0.extend(c0.iter().map(|z| z.re));
        x0.extend(c0.iter().take(n - 1).map(|z| z.im));
        let (x, _) = optim::levenberg_marquardt(&resid, &x0, 1500, 1e-13);
        let mut c_pol: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(x[i], if i + 1 < n { x[n + i] } else { 0.0 }))
            .collect();
        gauge_fix(&mut c_pol);

        for c in [c0, c_pol] {
            let w = dynm.weights(&c);
            let trial: Vec<Complex64> = modes
                .iter()
                .map(|row| w.iter().zip(row).map(|(wi, e)| wi * e).sum::<Complex64>())
                .collect();
            let merit = match cfg.merit {
                MeritKind::I2 => figure_of_merit_grid(&trial, &target.values, target.dt).ok()?,
                MeritKind::I1 => {
                    // (t_max − τ)-weighted grid sum: trapezoid of the reduced I₁ integrand
                    let t_max = target.t_max();
                    target.dt
                        * trial
                            .iter()
                            .zip(&target.values)
                            .enumerate()
                            .map(|(k, (a, b))| (t_max - k as f64 * target.dt) * (a - b).norm())
                            .sum::<f64>()
                }
            };
            let dist = manhattan_distance(&dynm, &c, &paired_w);
            let bath = match SurrogateBath::new(
                cand.alphas.iter().map(|a| -a.im).collect(),
                g.to_vec(),
                cand.alphas.iter().map(|a| -2.0 * a.re).collect(),
                c,
                vec![],
                cfg.unit,
            ) {
                Ok(b) => b,
                Err(_) => continue,
            };
            if out.best.as_ref().map(|b| merit < b.1).unwrap_or(true) {
                out.best = Some((bath, merit, dist.min(dist0)));
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Unit;
    use crate::surrogate::{correlation_from_params, dynamical_matrix};

    fn series_from_bath(bath: &SurrogateBath, t_max: f64, n: usize) -> CorrelationSeries {
        let dt = t_max / (n - 1) as f64;
        let d = dynamical_matrix(bath).unwrap();
        let vals: Vec<Complex64> = (0..n).map(|k| d.correlation(&bath.coeffs, k as f64 * dt)).collect();
        CorrelationSeries::new(dt, vals).unwrap()
    }

    #[test]
    fn single_mode_target_is_exact() {
        let truth = SurrogateBath::new(
            vec![1.5],
            vec![],
            vec![0.6],
            vec![Complex64::new(0.8, 0.0)],
            vec![],
            Unit::OmegaC,
        )
        .unwrap();
        let series = series_from_bath(&truth, 12.0, 256);
        let fit = ExponentialFit {
            rates: vec![Complex64::new(-0.3, -1.5)],
            weights: vec![Complex64::new(0.64, 0.0)],
            residual: 0.0,
            grid_dt: series.dt,
            grid_len: series.len(),
            reduced_from: None,
            refine_stagnated: false,
        };
        let cfg = TsoConfig { samples: 4, newton_starts: 4, ..Default::default() };
        let (ranked, diag) = run_tso(&series, &fit, &cfg).unwrap();
        assert_eq!(diag.samples_with_physical, 1);
        let best = &ranked[0];
        assert!((best.bath.frequencies[0] - 1.5).abs() < 1e-10);
        assert!((best.bath.rates[0] - 0.6).abs() < 1e-10);
        assert!((best.bath.coeffs[0].re - 0.8).abs() < 1e-10);
        assert!(best.merit < 1e-9, "merit {}", best.merit);
    }

    #[test]
    fn reruns_are_deterministic() {
        let truth = SurrogateBath::new(
            vec![0.9, 1.8],
            vec![0.7],
            vec![0.5, 1.2],
            vec![Complex64::new(0.7, 0.2), Complex64::new(0.5, 0.0)],
            vec![],
            Unit::OmegaC,
        )
        .unwrap();
        let series = series_from_bath(&truth, 10.0, 128);
        let d = dynamical_matrix(&truth).unwrap();
        let fit = ExponentialFit {
            rates: d.eigenvalues.clone(),
            weights: d.weights(&truth.coeffs),
            residual: 0.0,
            grid_dt: series.dt,
            grid_len: series.len(),
            reduced_from: None,
            refine_stagnated: false,
        };
        let cfg = TsoConfig {
            samples: 24,
            newton_starts: 16,
            polish_evals: 20,
            polish_top: 2,
            seed: 42,
            ..Default::default()
        };
        let (r1, _) = run_tso(&series, &fit, &cfg).unwrap();
        let (r2, _) = run_tso(&series, &fit, &cfg).unwrap();
        assert_eq!(r1.len(), r2.len());
        for (a, b) in r1.iter().zip(&r2) {
            assert_eq!(a.merit, b.merit);
            assert_eq!(a.bath, b.bath);
        }
    }

    #[test]
    fn ranking_is_sorted_and_physical() {
        let truth = SurrogateBath::new(
            vec![0.9, 1.8],
            vec![0.7],
            vec![0.5, 1.2],
            vec![Complex64::new(0.7, 0.2), Complex64::new(0.5, 0.0)],
            vec![],
            Unit::OmegaC,
        )
        .unwrap();
        let series = series_from_bath(&truth, 10.0, 128);
        let d = dynamical_matrix(&truth).unwrap();
        let fit = ExponentialFit {
            rates: d.eigenvalues.clone(),
            weights: d.weights(&truth.coeffs),
            residual: 0.0,
            grid_dt: series.dt,
            grid_len: series.len(),
            reduced_from: None,
            refine_stagnated: false,
        };
        let cfg = TsoConfig {
            samples: 32,
            newton_starts: 24,
            polish_evals: 30,
            seed: 7,
            ..Default::default()
        };
        let (ranked, diag) = run_tso(&series, &fit, &cfg).unwrap();
        assert!(!ranked.is_empty());
        assert!(diag.samples_with_physical > 0);
        for pair in ranked.windows(2) {
            assert!(pair[0].merit <= pair[1].merit);
        }
        let g_max = 5.0 * fit.rates.iter().map(|l| l.im.abs()).fold(0.0, f64::max);
        for r in &ranked {
            assert!(r.bath.rates.iter().all(|g| *g > 0.0));
            assert!(r.bath.couplings.iter().all(|g| *g > 0.0 && *g < g_max));
            // the found baths really reproduce the target shape
            let c0 = correlation_from_params(&r.bath, 0.0).unwrap();
            assert!(c0.re > 0.0);
        }
    }
}
