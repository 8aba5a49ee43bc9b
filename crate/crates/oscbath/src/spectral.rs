//! Spectral densities and exact environmental correlation functions.
//!
//! A bath is specified by a spectral density J(ω) (a sum of named
//! components) and an inverse temperature β. The two-time correlation
//! function of the bath coupling operator,
//!
//!   C_β(t) = ∫_0^∞ (dω/π) J(ω) (coth(βω/2) cos ωt − i sin ωt),
//!
//! is evaluated by adaptive oscillatory quadrature, or in closed form for a
//! single Ohmic component (via the complex trigamma function). Its Fourier
//! transform is C_β(ω) = (1 + coth(βω/2)) (J(ω)θ(ω) − J(−ω)θ(−ω)).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quad;

/// Factorial 9! appearing in the super-Ohmic background normalization.
const FACT9: f64 = 362_880.0;

/// Frequency unit tag. All numbers in a spec are expressed in this unit
/// (ħ = 1, k_B = 1); the tag only travels through I/O for bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Unit {
    /// Natural units with the Ohmic cutoff as the scale, Ω_c = 1.
    #[serde(rename = "omega_c")]
    #[default]
    OmegaC,
    /// Wavenumbers.
    #[serde(rename = "cm-1")]
    InvCm,
}

/// Inverse temperature. β = ∞ (T = 0) is a distinguished variant so that
/// coth(βω/2) → 1 is exact rather than an overflowing float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    /// β = ∞, i.e. zero temperature.
    Infinite,
    Finite(f64),
}

impl Beta {
    pub fn from_temperature(t: f64) -> Result<Self> {
        if t < 0.0 {
            return Err(Error::Domain(format!("negative temperature {t}")));
        }
        if t == 0.0 {
            Ok(Beta::Infinite)
        } else {
            Ok(Beta::Finite(1.0 / t))
        }
    }

    pub fn is_zero_temperature(&self) -> bool {
        matches!(self, Beta::Infinite)
    }

    /// coth(βω/2), with the T = 0 limit handled exactly.
    pub fn coth_half(&self, omega: f64) -> f64 {
        match self {
            Beta::Infinite => {
                if omega >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Beta::Finite(b) => 1.0 / (0.5 * b * omega).tanh(),
        }
    }

    /// Bose–Einstein occupation n(ω) = 1/(e^{βω} − 1).
    pub fn occupation(&self, omega: f64) -> f64 {
        match self {
            Beta::Infinite => 0.0,
            Beta::Finite(b) => 1.0 / (b * omega).exp_m1(),
        }
    }
}

/// One additive component of a spectral density.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpectralComponent {
    /// J(ω) = π κ ω e^{−ω/Ω_c}
    Ohmic { cutoff: f64, scale: f64 },
    /// J(ω) = (1/(2·9!)) Σ_a ρ_a (ω^5/Ω_a^4) e^{−√(ω/Ω_a)}
    AdolphsRenger { cutoffs: [f64; 2], weights: [f64; 2] },
    /// J(ω) = S · 8ΓΩ(4Ω² + Γ²) ω / ((4(ω−Ω)² + Γ²)(4(ω+Ω)² + Γ²))
    AntisymLorentzian { center: f64, width: f64, huang_rhys: f64 },
    /// Linear interpolation between sorted (ω, J) samples; no extrapolation.
    Tabulated { points: Vec<(f64, f64)> },
}

impl SpectralComponent {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralComponent::Ohmic { cutoff, scale } => {
                if *cutoff <= 0.0 {
                    return Err(Error::Domain("ohmic cutoff must be positive".into()));
                }
                if *scale < 0.0 {
                    return Err(Error::Domain("ohmic scale must be nonnegative".into()));
                }
            }
            SpectralComponent::AdolphsRenger { cutoffs, weights } => {
                if cutoffs.iter().any(|c| *c <= 0.0) {
                    return Err(Error::Domain("adolphs_renger cutoffs must be positive".into()));
                }
                if weights.iter().any(|w| *w < 0.0) {
                    return Err(Error::Domain("adolphs_renger weights must be nonnegative".into()));
                }
            }
            SpectralComponent::AntisymLorentzian { center, width, huang_rhys } => {
                if *center <= 0.0 || *width <= 0.0 {
                    return Err(Error::Domain(
                        "antisym_lorentzian center and width must be positive".into(),
                    ));
                }
                if *huang_rhys < 0.0 {
                    return Err(Error::Domain("huang_rhys must be nonnegative".into()));
                }
            }
            SpectralComponent::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::Domain("tabulated component needs at least 2 points".into()));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::Domain("tabulated frequencies must be strictly increasing".into()));
                }
                if points.iter().any(|p| p.1 < 0.0 || p.0 < 0.0) {
                    return Err(Error::Domain("tabulated points must be nonnegative".into()));
                }
            }
        }
        Ok(())
    }

    /// Pointwise J(ω), ω ≥ 0.
    pub fn evaluate_j(&self, omega: f64) -> Result<f64> {
        if omega < 0.0 {
            return Err(Error::Domain(format!("J(ω) requested at negative ω = {omega}")));
        }
        Ok(match self {
            SpectralComponent::Ohmic { cutoff, scale } => {
                std::f64::consts::PI * scale * omega * (-omega / cutoff).exp()
            }
            SpectralComponent::AdolphsRenger { cutoffs, weights } => {
                let mut j = 0.0;
                for a in 0..2 {
                    j += weights[a] * omega.powi(5) / cutoffs[a].powi(4)
                        * (-(omega / cutoffs[a]).sqrt()).exp();
                }
                j / (2.0 * FACT9)
            }
            SpectralComponent::AntisymLorentzian { center, width, huang_rhys } => {
                let (om, ga, s) = (*center, *width, *huang_rhys);
                s * 8.0 * ga * om * (4.0 * om * om + ga * ga) * omega
                    / ((4.0 * (omega - om).powi(2) + ga * ga)
                        * (4.0 * (omega + om).powi(2) + ga * ga))
            }
            SpectralComponent::Tabulated { points } => {
                if omega < points[0].0 || omega > points.last().unwrap().0 {
                    // J(0) = 0 is implied below the first sample only when it starts at 0
                    if omega == 0.0 {
                        return Ok(0.0);
                    }
                    return Err(Error::Domain(format!(
                        "tabulated J has no data at ω = {omega} (range {}..{})",
                        points[0].0,
                        points.last().unwrap().0
                    )));
                }
                let idx = points.partition_point(|p| p.0 <= omega).min(points.len() - 1);
                let (x0, y0) = points[idx - 1];
                let (x1, y1) = points[idx];
                y0 + (y1 - y0) * (omega - x0) / (x1 - x0)
            }
        })
    }

    /// J(ω)/ω with the removable singularity at ω = 0 made explicit.
    pub fn j_over_omega(&self, omega: f64) -> Result<f64> {
        if omega < 0.0 {
            return Err(Error::Domain("J(ω)/ω requested at negative ω".into()));
        }
        Ok(match self {
            SpectralComponent::Ohmic { cutoff, scale } => {
                std::f64::consts::PI * scale * (-omega / cutoff).exp()
            }
            SpectralComponent::AdolphsRenger { cutoffs, weights } => {
                let mut j = 0.0;
                for a in 0..2 {
                    j += weights[a] * omega.powi(4) / cutoffs[a].powi(4)
                        * (-(omega / cutoffs[a]).sqrt()).exp();
                }
                j / (2.0 * FACT9)
            }
            SpectralComponent::AntisymLorentzian { center, width, huang_rhys } => {
                let (om, ga, s) = (*center, *width, *huang_rhys);
                s * 8.0 * ga * om * (4.0 * om * om + ga * ga)
                    / ((4.0 * (omega - om).powi(2) + ga * ga)
                        * (4.0 * (omega + om).powi(2) + ga * ga))
            }
            SpectralComponent::Tabulated { points } => {
                if omega == 0.0 {
                    // slope of the first segment, taking J(0) = 0
                    let (x0, y0) = points[0];
                    if x0 == 0.0 {
                        let (x1, y1) = points[1];
                        (y1 - y0) / (x1 - x0)
                    } else {
                        y0 / x0
                    }
                } else {
                    self.evaluate_j(omega)? / omega
                }
            }
        })
    }

    /// Frequency beyond which the component is negligible at relative level `eps`.
    fn tail_cutoff(&self, eps: f64) -> f64 {
        let logs = -eps.ln(); // e.g. 36.8 for 1e-16
        match self {
            SpectralComponent::Ohmic { cutoff, .. } => cutoff * (logs + 10.0),
            SpectralComponent::AdolphsRenger { cutoffs, .. } => {
                // e^{-sqrt(w/W)} w^5: sqrt(w/W) ~ logs + margin
                let w = cutoffs[0].max(cutoffs[1]);
                w * (logs + 25.0).powi(2)
            }
            SpectralComponent::AntisymLorentzian { center, width, .. } => {
                // polynomial 1/ω³ tail of J/ω: cube-root growth of the bound
                let base = center + 10.0 * width;
                let poly = (2.0 * width * center * center / (3.0 * eps).max(1e-300)).cbrt();
                base.max(poly)
            }
            SpectralComponent::Tabulated { points } => points.last().unwrap().0,
        }
    }

    /// Characteristic frequency resolution the quadrature must resolve.
    fn char_scale(&self) -> f64 {
        match self {
            SpectralComponent::Ohmic { cutoff, .. } => *cutoff,
            SpectralComponent::AdolphsRenger { cutoffs, .. } => 50.0 * cutoffs[0].min(cutoffs[1]),
            SpectralComponent::AntisymLorentzian { width, .. } => *width,
            SpectralComponent::Tabulated { points } => {
                let span = points.last().unwrap().0 - points[0].0;
                (span / points.len() as f64).max(span * 1e-3)
            }
        }
    }
}

/// Full bath description: spectral density components plus temperature.
#[derive(Debug, Clone)]
pub struct BathSpec {
    pub components: Vec<SpectralComponent>,
    pub beta: Beta,
    pub unit: Unit,
}

impl BathSpec {
    pub fn new(components: Vec<SpectralComponent>, beta: Beta, unit: Unit) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Domain("bath needs at least one spectral component".into()));
        }
        for c in &components {
            c.validate()?;
        }
        if let Beta::Finite(b) = beta {
            if b <= 0.0 {
                return Err(Error::Domain(format!("inverse temperature must be positive, got {b}")));
            }
        }
        Ok(Self { components, beta, unit })
    }

    /// Total J(ω): pointwise sum over components.
    pub fn evaluate_j(&self, omega: f64) -> Result<f64> {
        let mut j = 0.0;
        for c in &self.components {
            j += c.evaluate_j(omega)?;
        }
        Ok(j)
    }

    pub fn j_over_omega(&self, omega: f64) -> Result<f64> {
        let mut j = 0.0;
        for c in &self.components {
            j += c.j_over_omega(omega)?;
        }
        Ok(j)
    }

    /// Reorganization energy λ = ∫_0^∞ dω J(ω)/(πω), adaptive quadrature.
    pub fn reorganization_energy(&self) -> Result<f64> {
        let mut lambda = 0.0;
        for c in &self.components {
            let hi = c.tail_cutoff(1e-12);
            let val = quad::integrate_real(
                |w| c.j_over_omega(w).unwrap_or(0.0) / std::f64::consts::PI,
                0.0,
                hi,
                1e-9,
                1e-13,
            )?;
            lambda += val;
        }
        Ok(lambda)
    }

    /// Thermal correlation function C_β(t), t ≥ 0.
    ///
    /// Single pure-Ohmic specs use the closed trigamma form; everything else
    /// goes through oscillatory quadrature.
    pub fn thermal_correlation(&self, t: f64) -> Result<Complex64> {
        if t < 0.0 {
            return Err(Error::Domain(
                "thermal_correlation defined for t ≥ 0; use extend_negative_time".into(),
            ));
        }
        if self.components.len() == 1 {
            if let SpectralComponent::Ohmic { cutoff, scale } = self.components[0] {
                return Ok(ohmic_correlation_closed(cutoff, scale, self.beta, t));
            }
        }
        self.correlation_by_quadrature(t)
    }

    /// Eq.-defining quadrature for C_β(t); also the oracle for the closed form.
    pub fn correlation_by_quadrature(&self, t: f64) -> Result<Complex64> {
        let mut total = Complex64::new(0.0, 0.0);
        for c in &self.components {
            total += component_correlation_quad(c, self.beta, t)?;
        }
        Ok(total)
    }

    /// Fourier transform C_β(ω) = (1 + coth(βω/2))(J(ω)θ(ω) − J(−ω)θ(−ω)).
    ///
    /// The removable singularity at ω = 0 is evaluated through the series
    /// coth(x) = 1/x + x/3 + O(x³).
    pub fn correlation_fourier(&self, omega: f64) -> Result<f64> {
        match self.beta {
            Beta::Infinite => {
                if omega > 0.0 {
                    Ok(2.0 * self.evaluate_j(omega)?)
                } else {
                    Ok(0.0)
                }
            }
            Beta::Finite(b) => {
                let x = 0.5 * b * omega;
                if x.abs() < 1e-6 {
                    // (1 + coth x) = 1 + 1/x + x/3 + O(x³); the 1/x term combines
                    // with the signed J into (2/β)·J(|ω|)/|ω|, removing the pole
                    let jo = self.j_over_omega(omega.abs())?;
                    let j = self.evaluate_j(omega.abs())?;
                    let sgn = if omega >= 0.0 { 1.0 } else { -1.0 };
                    Ok(2.0 / b * jo + sgn * j * (1.0 + x / 3.0))
                } else {
                    let f = 1.0 + 1.0 / x.tanh();
                    let j_signed = if omega >= 0.0 {
                        self.evaluate_j(omega)?
                    } else {
                        -self.evaluate_j(-omega)?
                    };
                    Ok(f * j_signed)
                }
            }
        }
    }

    /// Uniform-grid sample of the correlation function on [0, t_max].
    pub fn sample_correlation(&self, t_max: f64, n: usize) -> Result<CorrelationSeries> {
        if !(t_max > 0.0) {
            return Err(Error::Domain("t_max must be positive".into()));
        }
        if n < 2 {
            return Err(Error::Domain("need at least 2 samples".into()));
        }
        let dt = t_max / (n - 1) as f64;
        let values: Result<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|k| self.thermal_correlation(k as f64 * dt))
            .collect();
        CorrelationSeries::new(dt, values?)
    }
}

fn component_correlation_quad(c: &SpectralComponent, beta: Beta, t: f64) -> Result<Complex64> {
    let eps = 1e-12;
    let tail = c.tail_cutoff(eps);
    let char_scale = c.char_scale();
    let mut panel = char_scale;
    if t > 0.0 {
        panel = panel.min(std::f64::consts::PI / (4.0 * t));
    }
    panel = panel.max(tail * 1e-6);
    let pi = std::f64::consts::PI;
    let f = |w: f64| -> Complex64 {
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let j = c.evaluate_j(w).unwrap_or(0.0);
        let cos = (w * t).cos();
        let sin = (w * t).sin();
        let re = match beta {
            Beta::Infinite => j * cos,
            Beta::Finite(b) => {
                let x = 0.5 * b * w;
                if x < 0.35 {
                    // coth x = 1/x + r(x); r from its Laurent series
                    let r = x / 3.0 - x.powi(3) / 45.0 + 2.0 * x.powi(5) / 945.0
                        - x.powi(7) / 4725.0;
                    let jo = c.j_over_omega(w).unwrap_or(0.0);
                    (jo * 2.0 / b + j * r) * cos
                } else {
                    j * cos / x.tanh()
                }
            }
        };
        Complex64::new(re / pi, -j * sin / pi)
    };
    quad::integrate_semi_infinite_capped(f, panel, tail, 1e-10, 1e-12)
}

/// Closed form for a single Ohmic component at inverse temperature β:
///
///   C_β(t) = κ [ Ω_c²/(1 + iΩ_c t)² + β⁻²(ψ′(1 + (1/Ω_c − it)/β)
///                                      + ψ′(1 + (1/Ω_c + it)/β)) ]
pub fn ohmic_correlation_closed(cutoff: f64, scale: f64, beta: Beta, t: f64) -> Complex64 {
    let first = cutoff * cutoff
        / ((Complex64::new(1.0, cutoff * t)) * (Complex64::new(1.0, cutoff * t)));
    match beta {
        Beta::Infinite => scale * first,
        Beta::Finite(b) => {
            let z1 = Complex64::new(1.0 + 1.0 / (cutoff * b), -t / b);
            let z2 = Complex64::new(1.0 + 1.0 / (cutoff * b), t / b);
            scale * (first + (trigamma(z1) + trigamma(z2)) / (b * b))
        }
    }
}

/// Complex trigamma ψ′(z): recurrence to push Re z above 10, then the
/// asymptotic series 1/z + 1/(2z²) + Σ B_{2k}/z^{2k+1} truncated at k = 6.
pub fn trigamma(mut z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Complex64::new(f64::NAN, f64::NAN);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    while z.re < 10.0 {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // Bernoulli numbers B_2..B_12
    const B: [f64; 6] = [
        1.0 / 6.0,
        -1.0 / 30.0,
        1.0 / 42.0,
        -1.0 / 30.0,
        5.0 / 66.0,
        -691.0 / 2730.0,
    ];
    let mut series = inv + 0.5 * inv2;
    let mut p = inv * inv2; // 1/z^3
    for b2k in B {
        series += b2k * p;
        p *= inv2;
    }
    acc + series
}

/// One-sided correlation samples on a uniform grid starting at t = 0.
#[derive(Debug, Clone)]
pub struct CorrelationSeries {
    pub dt: f64,
    pub values: Vec<Complex64>,
}

impl CorrelationSeries {
    pub fn new(dt: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(dt > 0.0) || values.len() < 2 {
            return Err(Error::Contract("series needs dt > 0 and ≥ 2 samples".into()));
        }
        let c0 = values[0];
        if !(c0.re > 0.0) || c0.im.abs() > 1e-10 * c0.norm() {
            return Err(Error::Contract(format!(
                "C(0) must be real and positive, got {c0}"
            )));
        }
        Ok(Self { dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| k as f64 * self.dt).collect()
    }

    /// Hermitian extension C(−t) := C*(t); returns times and values over
    /// [−t_max, t_max] with the same grid step.
    pub fn extend_negative_time(&self) -> TwoSidedSeries {
        let n = self.values.len();
        let mut values = Vec::with_capacity(2 * n - 1);
        for k in (1..n).rev() {
            values.push(self.values[k].conj());
        }
        values.extend_from_slice(&self.values);
        TwoSidedSeries { dt: self.dt, t_min: -self.t_max(), values }
    }
}

/// Two-sided series produced by the Hermitian extension.
#[derive(Debug, Clone)]
pub struct TwoSidedSeries {
    pub dt: f64,
    pub t_min: f64,
    pub values: Vec<Complex64>,
}

impl TwoSidedSeries {
    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.t_min + k as f64 * self.dt).collect()
    }

    /// Trapezoidal Fourier transform ∫ C(t) e^{iωt} dt over the sampled window.
    pub fn fourier(&self, omega: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let n = self.values.len();
        for (k, v) in self.values.iter().enumerate() {
            let t = self.t_min + k as f64 * self.dt;
            let weight = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            acc += weight * v * Complex64::new(0.0, omega * t).exp();
        }
        acc * self.dt
    }
}
