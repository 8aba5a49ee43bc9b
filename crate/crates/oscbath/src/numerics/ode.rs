//! Embedded Dormand–Prince 5(4) integrator on flat complex state vectors.
//!
//! The right-hand side is an arbitrary closure, so the same stepper drives
//! vectorized density matrices, pseudo-states and pure-state drifts. A
//! reusable single-step core is exposed for callers that need step-level
//! control (quantum-jump trajectories).

use num_complex::Complex64;

use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// 5th-order solution weights (also the last stage row)
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// embedded 4th-order weights
const E1: f64 = 5179.0 / 57600.0;
const E3: f64 = 7571.0 / 16695.0;
const E4: f64 = 393.0 / 640.0;
const E5: f64 = -92097.0 / 339200.0;
const E6: f64 = 187.0 / 2100.0;
const E7: f64 = 1.0 / 40.0;

/// Integration statistics carried into trajectory diagnostics.
#[derive(Debug, Clone, Default)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Single-step Dormand–Prince core with reusable stage buffers.
pub struct DpCore {
    pub rtol: f64,
    pub atol: f64,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    k5: Vec<Complex64>,
    k6: Vec<Complex64>,
    k7: Vec<Complex64>,
    ytmp: Vec<Complex64>,
    ynew: Vec<Complex64>,
    k1_valid: bool,
}

impl DpCore {
    pub fn new(n: usize, rtol: f64, atol: f64) -> Self {
        let z = vec![Complex64::default(); n];
        Self {
            rtol,
            atol,
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            k5: z.clone(),
            k6: z.clone(),
            k7: z.clone(),
            ytmp: z.clone(),
            ynew: z,
            k1_valid: false,
        }
    }

    /// Invalidate the FSAL cache (the state was changed externally).
    pub fn invalidate(&mut self) {
        self.k1_valid = false;
    }

    /// Attempt one step of size `h`. On acceptance, `y` and `t` advance and
    /// the return is (true, error estimate); on rejection only the error is
    /// returned. `rhs_evals` is incremented accordingly.
    pub fn try_step<R>(
        &mut self,
        rhs: &mut R,
        t: &mut f64,
        y: &mut [Complex64],
        h: f64,
        rhs_evals: &mut usize,
    ) -> (bool, f64)
    where
        R: FnMut(f64, &[Complex64], &mut [Complex64]),
    {
        let n = y.len();
        if !self.k1_valid {
            rhs(*t, y, &mut self.k1);
            *rhs_evals += 1;
            self.k1_valid = true;
        }
        stage(&mut self.ytmp, y, h, &[(A21, &self.k1)]);
        rhs(*t + h / 5.0, &self.ytmp, &mut self.k2);
        stage(&mut self.ytmp, y, h, &[(A31, &self.k1), (A32, &self.k2)]);
        rhs(*t + 0.3 * h, &self.ytmp, &mut self.k3);
        stage(&mut self.ytmp, y, h, &[(A41, &self.k1), (A42, &self.k2), (A43, &self.k3)]);
        rhs(*t + 0.8 * h, &self.ytmp, &mut self.k4);
        stage(
            &mut self.ytmp,
            y,
            h,
            &[(A51, &self.k1), (A52, &self.k2), (A53, &self.k3), (A54, &self.k4)],
        );
        rhs(*t + 8.0 / 9.0 * h, &self.ytmp, &mut self.k5);
        stage(
            &mut self.ytmp,
            y,
            h,
            &[(A61, &self.k1), (A62, &self.k2), (A63, &self.k3), (A64, &self.k4), (A65, &self.k5)],
        );
        rhs(*t + h, &self.ytmp, &mut self.k6);
        stage(
            &mut self.ynew,
            y,
            h,
            &[(B1, &self.k1), (B3, &self.k3), (B4, &self.k4), (B5, &self.k5), (B6, &self.k6)],
        );
        rhs(*t + h, &self.ynew, &mut self.k7);
        *rhs_evals += 6;

        let mut err_sq = 0.0f64;
        for i in 0..n {
            let y4 = y[i]
                + h * (E1 * self.k1[i]
                    + E3 * self.k3[i]
                    + E4 * self.k4[i]
                    + E5 * self.k5[i]
                    + E6 * self.k6[i]
                    + E7 * self.k7[i]);
            let e = self.ynew[i] - y4;
            let sc = self.atol + self.rtol * y[i].norm().max(self.ynew[i].norm());
            err_sq += (e.norm() / sc).powi(2);
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            *t += h;
            y.copy_from_slice(&self.ynew);
            std::mem::swap(&mut self.k1, &mut self.k7); // FSAL
            (true, err)
        } else {
            (false, err)
        }
    }

    /// Step-size update factor from the last error estimate.
    pub fn factor(err: f64) -> f64 {
        let fac = if err > 1e-30 { 0.9 * err.powf(-0.2) } else { 5.0 };
        fac.clamp(0.2, 5.0)
    }
}

pub struct DormandPrince {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for DormandPrince {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, max_steps: 50_000_000 }
    }
}

impl DormandPrince {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    /// Integrate dy/dt = rhs(t, y) from `t0` to `t1` in place.
    ///
    /// `observer` is called exactly at every time in `emit` (strictly
    /// increasing, within [t0, t1]); steps are clipped to land on them.
    pub fn integrate<R, O>(
        &self,
        mut rhs: R,
        y: &mut [Complex64],
        t0: f64,
        t1: f64,
        emit: &[f64],
        mut observer: O,
    ) -> Result<OdeStats>
    where
        R: FnMut(f64, &[Complex64], &mut [Complex64]),
        O: FnMut(f64, &[Complex64]),
    {
        let n = y.len();
        let mut stats = OdeStats::default();
        let mut t = t0;
        let mut emit_iter = emit.iter().copied().peekable();

        while let Some(&te) = emit_iter.peek() {
            if te <= t0 + 1e-300 {
                observer(te, y);
                emit_iter.next();
            } else {
                break;
            }
        }
        if t1 <= t0 {
            return Ok(stats);
        }

        let mut core = DpCore::new(n, self.rtol, self.atol);
        let mut k0 = vec![Complex64::default(); n];
        rhs(t, y, &mut k0);
        stats.rhs_evals += 1;
        let ynorm = rms(y);
        let fnorm = rms(&k0);
        let mut h = if fnorm > 1e-30 {
            (0.01 * (ynorm + self.atol) / fnorm).min(t1 - t0)
        } else {
            (t1 - t0) * 1e-3
        };
        h = h.max((t1 - t0) * 1e-12);

        while t < t1 {
            if stats.steps + stats.rejected > self.max_steps {
                return Err(Error::Numerics(format!(
                    "integrator exceeded {} steps at t = {t:.6e}",
                    self.max_steps
                )));
            }
            let mut hs = h.min(t1 - t);
            if let Some(&te) = emit_iter.peek() {
                if te > t && te < t + hs {
                    hs = te - t;
                }
            }
            let (accepted, err) = core.try_step(&mut rhs, &mut t, y, hs, &mut stats.rhs_evals);
            if accepted {
                stats.steps += 1;
                while let Some(&te) = emit_iter.peek() {
                    if te <= t + 1e-12 * (1.0 + t.abs()) {
                        observer(te, y);
                        emit_iter.next();
                    } else {
                        break;
                    }
                }
            } else {
                stats.rejected += 1;
            }
            h = hs * DpCore::factor(err);
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::Numerics(format!(
                    "step size collapsed at t = {t:.6e} (h = {h:.3e})"
                )));
            }
        }
        Ok(stats)
    }
}

#[inline]
fn stage(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &Vec<Complex64>)]) {
    for i in 0..y.len() {
        let mut acc = Complex64::default();
        for (a, k) in terms {
            acc += *a * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

fn rms(v: &[Complex64]) -> f64 {
    (v.iter().map(|z| z.norm_sqr()).sum::<f64>() / v.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay() {
        let solver = DormandPrince::new(1e-10, 1e-12);
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let lam = Complex64::new(-0.7, 2.0);
        solver
            .integrate(|_t, y, dy| dy[0] = lam * y[0], &mut y, 0.0, 3.0, &[], |_, _| {})
            .unwrap();
        let exact = (lam * 3.0).exp();
        assert_relative_eq!(y[0].re, exact.re, epsilon = 1e-8);
        assert_relative_eq!(y[0].im, exact.im, epsilon = 1e-8);
    }

    #[test]
    fn emits_on_grid() {
        let solver = DormandPrince::new(1e-9, 1e-12);
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.2).collect();
        let mut seen = Vec::new();
        solver
            .integrate(
                |_t, y, dy| dy[0] = -y[0],
                &mut y,
                0.0,
                2.0,
                &grid,
                |t, y| seen.push((t, y[0].re)),
            )
            .unwrap();
        assert_eq!(seen.len(), grid.len());
        for (t, v) in seen {
            assert_relative_eq!(v, (-t).exp(), epsilon = 1e-7);
        }
    }

    #[test]
    fn single_step_core_accepts_and_rejects() {
        let mut core = DpCore::new(1, 1e-10, 1e-12);
        let mut rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| dy[0] = -50.0 * y[0];
        let mut t = 0.0;
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let mut evals = 0;
        // an absurdly large step must be rejected
        let (ok, err) = core.try_step(&mut rhs, &mut t, &mut y, 1.0, &mut evals);
        assert!(!ok);
        assert!(err > 1.0);
        assert_eq!(t, 0.0);
        let (ok2, _) = core.try_step(&mut rhs, &mut t, &mut y, 1e-4, &mut evals);
        assert!(ok2);
        assert!(t > 0.0);
    }
}
