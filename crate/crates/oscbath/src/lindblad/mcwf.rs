//! Monte Carlo wave function (quantum jump) unraveling of the master
//! equation.
//!
//! Between jumps the unnormalized state follows dψ/dt = Aψ with the same
//! drift A = −iH′ − ½Σγ L†L as the master integrator; a jump fires when the
//! squared norm crosses a pre-drawn uniform threshold, with the jump time
//! located by bisection and the channel drawn with probability ∝ γ‖Lψ‖².
//! Per-trajectory RNG streams are derived from (seed, trajectory index), so
//! results are bitwise independent of the thread schedule.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::ode::DpCore;

use super::{LindbladModel, RunDiagnostics, Trajectory};

/// Relative tolerance (in step fraction) for locating jump times.
const JUMP_TIME_TOL: f64 = 1e-10;

/// Averaged trajectories plus per-point Monte Carlo error estimates.
#[derive(Debug, Clone)]
pub struct McwfResult {
    pub trajectory: Trajectory,
    /// Standard error of the mean for each observable, (Re, Im) per grid point.
    pub std_error: Vec<(String, Vec<(f64, f64)>)>,
    pub total_jumps: usize,
    pub restarts: usize,
}

struct SingleRun {
    reduced: Vec<Array2<Complex64>>,
    observables: Vec<Vec<Complex64>>,
    jumps: usize,
    restarts: usize,
    steps: usize,
    rhs_evals: usize,
}

/// Averages `n_traj` quantum-jump trajectories from a pure initial state.
pub fn evolve_mcwf(
    model: &LindbladModel,
    psi0: &[Complex64],
    grid: &[f64],
    n_traj: usize,
    seed: u64,
    tol: f64,
) -> Result<McwfResult> {
    let d = model.dim();
    if psi0.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "state length {} vs model dimension {d}",
            psi0.len()
        )));
    }
    let norm: f64 = psi0.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Contract("initial state must be normalized".into()));
    }
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
        return Err(Error::Contract("grid must be strictly increasing from t ≥ 0".into()));
    }
    if n_traj == 0 {
        return Err(Error::Contract("need at least one trajectory".into()));
    }

    let runs: Result<Vec<SingleRun>> = (0..n_traj)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            run_trajectory(model, psi0, grid, tol, &mut rng)
        })
        .collect();
    let runs = runs?;

    // deterministic reduction in trajectory order
    let sys = model.layout.system_dim();
    let ng = grid.len();
    let nobs = model.observables.len();
    let mut reduced = vec![Array2::<Complex64>::zeros((sys, sys)); ng];
    let mut obs_mean = vec![vec![Complex64::default(); ng]; nobs];
    let mut obs_m2 = vec![vec![(0.0f64, 0.0f64); ng]; nobs];
    let mut total_jumps = 0;
    let mut restarts = 0;
    let mut steps = 0;
    let mut rhs_evals = 0;
    let inv_n = 1.0 / n_traj as f64;
    for run in &runs {
        for (acc, r) in reduced.iter_mut().zip(&run.reduced) {
            *acc += &(r * Complex64::new(inv_n, 0.0));
        }
        total_jumps += run.jumps;
        restarts += run.restarts;
        steps += run.steps;
        rhs_evals += run.rhs_evals;
    }
    for o in 0..nobs {
        for run in &runs {
            for (g, v) in run.observables[o].iter().enumerate() {
                obs_mean[o][g] += v * inv_n;
            }
        }
        for run in &runs {
            for (g, v) in run.observables[o].iter().enumerate() {
                let dre = v.re - obs_mean[o][g].re;
                let dim = v.im - obs_mean[o][g].im;
                obs_m2[o][g].0 += dre * dre;
                obs_m2[o][g].1 += dim * dim;
            }
        }
    }
    let denom = if n_traj > 1 { (n_traj * (n_traj - 1)) as f64 } else { 1.0 };
    let std_error: Vec<(String, Vec<(f64, f64)>)> = model
        .observables
        .iter()
        .enumerate()
        .map(|(o, (name, _))| {
            let se: Vec<(f64, f64)> = obs_m2[o]
                .iter()
                .map(|(s_re, s_im)| ((s_re / denom).sqrt(), (s_im / denom).sqrt()))
                .collect();
            (name.clone(), se)
        })
        .collect();

    let observables: Vec<(String, Vec<Complex64>)> = model
        .observables
        .iter()
        .zip(obs_mean)
        .map(|((name, _), mean)| (name.clone(), mean))
        .collect();

    Ok(McwfResult {
        trajectory: Trajectory {
            times: grid.to_vec(),
            reduced,
            observables,
            diagnostics: RunDiagnostics {
                steps,
                rhs_evals,
                trace_drift: 0.0,
                hermiticity_drift: 0.0,
                tolerance: tol,
                stationarity_warning: false,
            },
        },
        std_error,
        total_jumps,
        restarts,
    })
}

fn run_trajectory<RNG: Rng>(
    model: &LindbladModel,
    psi0: &[Complex64],
    grid: &[f64],
    tol: f64,
    rng: &mut RNG,
) -> Result<SingleRun> {
    let d = model.dim();
    let drift = model.drift();
    let mut rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| drift.matvec_serial(y, dy);

    let mut psi = psi0.to_vec();
    let mut core = DpCore::new(d, tol, tol * 1e-2);
    let mut t = 0.0f64;
    let mut h: f64 = 1e-4;
    let mut threshold: f64 = rng.random();
    let mut jumps = 0usize;
    let mut restarts = 0usize;
    let mut steps = 0usize;
    let mut rhs_evals = 0usize;

    let mut reduced = Vec::with_capacity(grid.len());
    let mut observables = vec![Vec::with_capacity(grid.len()); model.observables.len()];
    let mut jump_buf = vec![Complex64::default(); d];
    let record = |psi: &[Complex64],
                      reduced: &mut Vec<Array2<Complex64>>,
                      observables: &mut Vec<Vec<Complex64>>| {
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let inv = 1.0 / n2;
        // reduced ρ_S[i,j] = Σ_env ψ[i,e] ψ̄[j,e] / ‖ψ‖²
        let sys = model.layout.system_dim();
        let env = d / sys;
        let mut r = Array2::<Complex64>::zeros((sys, sys));
        for i in 0..sys {
            for j in 0..sys {
                let mut acc = Complex64::default();
                for e in 0..env {
                    acc += psi[i * env + e] * psi[j * env + e].conj();
                }
                r[(i, j)] = acc * inv;
            }
        }
        reduced.push(r);
        for ((_, op), series) in model.observables.iter().zip(observables.iter_mut()) {
            series.push(op.expectation(psi) * inv);
        }
    };

    let mut grid_iter = grid.iter().copied().peekable();
    while let Some(&tg) = grid_iter.peek() {
        if tg <= 1e-300 {
            record(&psi, &mut reduced, &mut observables);
            grid_iter.next();
        } else {
            break;
        }
    }

    let t_end = *grid.last().unwrap();
    let mut guard = 0usize;
    while t < t_end {
        guard += 1;
        if guard > 100_000_000 {
            return Err(Error::Numerics("trajectory exceeded the step budget".into()));
        }
        let mut hs = h.min(t_end - t);
        if let Some(&tg) = grid_iter.peek() {
            if tg > t && tg < t + hs {
                hs = tg - t;
            }
        }
        let t_before = t;
        let psi_before = psi.clone();
        let (accepted, err) = core.try_step(&mut rhs, &mut t, &mut psi, hs, &mut rhs_evals);
        if accepted {
            steps += 1;
            let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            if n2 < threshold {
                // jump inside (t_before, t]: bisect on the step fraction,
                // re-integrating from the pre-step state each probe
                let (tau, psi_tau) = locate_jump(
                    model,
                    &psi_before,
                    t_before,
                    t,
                    threshold,
                    tol,
                )?;
                t = tau;
                psi = psi_tau;
                apply_jump(model, &mut psi, rng, &mut jump_buf)?;
                jumps += 1;
                let n2_post: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
                if n2_post < 1e-280 {
                    // numerical underflow: restart this trajectory from t = 0
                    restarts += 1;
                    psi = psi0.to_vec();
                    t = 0.0;
                    reduced.clear();
                    observables.iter_mut().for_each(|s| s.clear());
                    grid_iter = grid.iter().copied().peekable();
                    while let Some(&tg) = grid_iter.peek() {
                        if tg <= 1e-300 {
                            record(&psi, &mut reduced, &mut observables);
                            grid_iter.next();
                        } else {
                            break;
                        }
                    }
                }
                threshold = rng.random();
                core.invalidate();
                h = (hs * 0.5).max(1e-12);
                continue;
            }
            while let Some(&tg) = grid_iter.peek() {
                if tg <= t + 1e-12 * (1.0 + t.abs()) {
                    record(&psi, &mut reduced, &mut observables);
                    grid_iter.next();
                } else {
                    break;
                }
            }
        }
        h = hs * DpCore::factor(err);
        if h < 1e-15 * (1.0 + t.abs()) {
            return Err(Error::Numerics(format!("MCWF step collapse at t = {t:.3e}")));
        }
    }

    Ok(SingleRun { reduced, observables, jumps, restarts, steps, rhs_evals })
}

/// Bisection for the jump time: finds τ ∈ (t0, t1] where ‖ψ(τ)‖² = threshold
/// to relative tolerance in the step fraction, re-integrating from ψ(t0).
fn locate_jump(
    model: &LindbladModel,
    psi0: &[Complex64],
    t0: f64,
    t1: f64,
    threshold: f64,
    tol: f64,
) -> Result<(f64, Vec<Complex64>)> {
    let drift = model.drift();
    let solver = crate::numerics::ode::DormandPrince::new(tol * 1e-2, tol * 1e-4);
    let span = t1 - t0;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut best = psi0.to_vec();
    // norm² is monotone nonincreasing under the drift
    for _ in 0..64 {
        if hi - lo <= JUMP_TIME_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let mut psi = psi0.to_vec();
        solver.integrate(
            |_t, y, dy| drift.matvec_serial(y, dy),
            &mut psi,
            t0,
            t0 + mid * span,
            &[],
            |_, _| {},
        )?;
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if n2 < threshold {
            hi = mid;
        } else {
            lo = mid;
            best = psi;
        }
    }
    let tau = t0 + hi * span;
    // state at the located time (from the last bracketing integration)
    let mut psi = best;
    let solver2 = crate::numerics::ode::DormandPrince::new(tol * 1e-2, tol * 1e-4);
    solver2.integrate(
        |_t, y, dy| drift.matvec_serial(y, dy),
        &mut psi,
        t0 + lo * span,
        tau,
        &[],
        |_, _| {},
    )?;
    Ok((tau, psi))
}

fn apply_jump<RNG: Rng>(
    model: &LindbladModel,
    psi: &mut Vec<Complex64>,
    rng: &mut RNG,
    scratch: &mut [Complex64],
) -> Result<()> {
    let mut probs = Vec::with_capacity(model.jumps.len());
    let mut total = 0.0f64;
    for (rate, l) in &model.jumps {
        l.matvec_serial(psi, scratch);
        let p = rate * scratch.iter().map(|z| z.norm_sqr()).sum::<f64>();
        probs.push(p);
        total += p;
    }
    if total <= 0.0 {
        return Err(Error::Numerics("no jump channel has weight".into()));
    }
    let draw: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw <= acc {
            chosen = i;
            break;
        }
    }
    let (_, l) = &model.jumps[chosen];
    l.matvec_serial(psi, scratch);
    let n2: f64 = scratch.iter().map(|z| z.norm_sqr()).sum();
    let inv = if n2 > 0.0 { 1.0 / n2.sqrt() } else { 0.0 };
    for (o, s) in psi.iter_mut().zip(scratch.iter()) {
        *o = s * inv;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{build_oscillator_ops, evolve_master, Layout, SparseMatrix, StateMatrix};
    use crate::spectral::Unit;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn no_jumps_equals_unitary() {
        let omega = 1.1;
        let h = SparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, c(0.5 * omega, 0.0)), (1, 1, c(-0.5 * omega, 0.0))],
        );
        let model = LindbladModel::new(
            Layout { dims: vec![2], system_factors: 1 },
            h,
            vec![],
            Unit::OmegaC,
        )
        .unwrap()
        .with_observable(
            "coherence",
            SparseMatrix::from_triplets(2, 2, vec![(1, 0, c(1.0, 0.0))]),
        );
        let psi0 = [c(std::f64::consts::FRAC_1_SQRT_2, 0.0), c(std::f64::consts::FRAC_1_SQRT_2, 0.0)];
        let grid: Vec<f64> = (0..=8).map(|k| k as f64 * 0.25).collect();
        let res = evolve_mcwf(&model, &psi0, &grid, 3, 1, 1e-10).unwrap();
        assert_eq!(res.total_jumps, 0);
        for (k, t) in grid.iter().enumerate() {
            let coh = res.trajectory.reduced[k][(0, 1)];
            let expect = 0.5 * (c(0.0, -omega * t)).exp();
            assert!((coh - expect).norm() < 1e-7);
            // all trajectories identical → zero spread
            let (se_re, se_im) = res.std_error[0].1[k];
            assert!(se_re < 1e-12 && se_im < 1e-12);
        }
    }

    #[test]
    fn damped_qubit_population_decay() {
        // analytic p₁(t) = e^{−γt}; MCWF mean within 3σ binomial error
        let gamma = 0.8;
        let ops = build_oscillator_ops(&[2]).unwrap();
        let model = LindbladModel::new(
            Layout { dims: vec![2], system_factors: 1 },
            SparseMatrix::zeros(2, 2),
            vec![(gamma, ops[0].clone())],
            Unit::OmegaC,
        )
        .unwrap();
        let psi0 = [c(0.0, 0.0), c(1.0, 0.0)]; // excited state |1⟩
        let grid: Vec<f64> = (0..=6).map(|k| k as f64 * 0.3).collect();
        let n_traj = 1000;
        let res = evolve_mcwf(&model, &psi0, &grid, n_traj, 7, 1e-9).unwrap();
        for (k, t) in grid.iter().enumerate() {
            let p1 = res.trajectory.reduced[k][(1, 1)].re;
            let p = (-gamma * t).exp();
            let sigma = (p * (1.0 - p) / n_traj as f64).sqrt();
            assert!(
                (p1 - p).abs() <= 3.0 * sigma + 1e-9,
                "t={t}: p1={p1} expect={p} (3σ={})",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn matches_master_equation_within_mc_error() {
        // damped driven qubit with both decay and dephasing channels
        let ops = build_oscillator_ops(&[2]).unwrap();
        let sx = SparseMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))]);
        let h = sx.scale(c(0.7, 0.0));
        let sz = SparseMatrix::from_triplets(2, 2, vec![(0, 0, c(1.0, 0.0)), (1, 1, c(-1.0, 0.0))]);
        let model = LindbladModel::new(
            Layout { dims: vec![2], system_factors: 1 },
            h,
            vec![(0.35, ops[0].clone()), (0.15, sz.clone())],
            Unit::OmegaC,
        )
        .unwrap()
        .with_observable("sz", sz);
        let psi0 = [c(0.0, 0.0), c(1.0, 0.0)];
        let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.2).collect();
        let res = evolve_mcwf(&model, &psi0, &grid, 600, 11, 1e-9).unwrap();
        let rho0 = StateMatrix::pure(&psi0).unwrap();
        let exact = evolve_master(&model, &rho0, &grid, 1e-10).unwrap();
        for k in 0..grid.len() {
            let mc = res.trajectory.observables[0].1[k].re;
            let ex = exact.observables[0].1[k].re;
            let (se, _) = res.std_error[0].1[k];
            assert!(
                (mc - ex).abs() <= 4.0 * se + 1e-6,
                "t={}: mc={mc} exact={ex} 4σ={}",
                grid[k],
                4.0 * se
            );
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let ops = build_oscillator_ops(&[2]).unwrap();
        let model = LindbladModel::new(
            Layout { dims: vec![2], system_factors: 1 },
            SparseMatrix::zeros(2, 2),
            vec![(0.5, ops[0].clone())],
            Unit::OmegaC,
        )
        .unwrap();
        let psi0 = [c(0.0, 0.0), c(1.0, 0.0)];
        let grid = vec![0.5, 1.0];
        let a = evolve_mcwf(&model, &psi0, &grid, 40, 3, 1e-9).unwrap();
        let b = evolve_mcwf(&model, &psi0, &grid, 40, 3, 1e-9).unwrap();
        for k in 0..grid.len() {
            assert_eq!(a.trajectory.reduced[k], b.trajectory.reduced[k]);
        }
        assert_eq!(a.total_jumps, b.total_jumps);
    }
}
