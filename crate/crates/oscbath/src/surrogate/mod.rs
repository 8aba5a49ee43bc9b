//! Transformation to Surrogate Oscillators.
//!
//! An effective environment is a chain of N damped harmonic oscillators with
//! frequencies Ω_n, nearest-neighbor hopping g_n, local zero-temperature
//! damping Γ_n and coupling coefficients c_n entering the interaction
//! operator F = Σ_n (c_n b_n + c_n* b_n†). Its correlation function is
//!
//!   C(t) = Σ_n w_n e^{λ_n t},   w_n = Σ_{l,m} c_l c_m* u_l^n v_m^n,
//!
//! where λ_n, u^n, v^n are the eigenvalues and biorthonormal eigenvectors of
//! the tridiagonal dynamical matrix M with diagonal α_n = −Γ_n/2 − iΩ_n and
//! off-diagonal −i g_n. Fitting a target correlation function therefore
//! splits into an inverse eigenvalue problem (α from λ̃ at fixed g) and a
//! weight-matching problem (c from w̃).

mod exact;
mod inverse;
mod search;
mod weights;

pub use exact::{exact_three_mode, exact_two_mode, two_mode_exact_coeffs, ExactInversion};
pub use inverse::{solve_inverse_eigenvalue, InverseCandidate};
pub use search::{run_tso, MeritKind, RankedBath, TsoConfig, TsoDiagnostics};
pub use weights::match_weights;

use ndarray::Array2;
use ndarray_linalg::{Eig, Inverse};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quad;
use crate::spectral::{Beta, Unit};

/// Chain parameters of an effective damped-oscillator environment.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateBath {
    /// Mode frequencies Ω_n (may come out negative from the inversion).
    pub frequencies: Vec<f64>,
    /// Nearest-neighbor couplings g_n ≥ 0, length N−1.
    pub couplings: Vec<f64>,
    /// Local damping rates Γ_n > 0.
    pub rates: Vec<f64>,
    /// Coupling coefficients c_n; the overall phase is fixed so Im c_N = 0.
    pub coeffs: Vec<Complex64>,
    /// Local truncation dimensions (simulation hint).
    pub local_dims: Vec<usize>,
    pub unit: Unit,
}

impl SurrogateBath {
    /// Builds a bath, gauge-fixing the global phase so that c_N is real
    /// (and nonnegative).
    pub fn new(
        frequencies: Vec<f64>,
        couplings: Vec<f64>,
        rates: Vec<f64>,
        mut coeffs: Vec<Complex64>,
        local_dims: Vec<usize>,
        unit: Unit,
    ) -> Result<Self> {
        let n = frequencies.len();
        if n == 0 {
            return Err(Error::Contract("bath needs at least one mode".into()));
        }
        if couplings.len() != n - 1 || rates.len() != n || coeffs.len() != n {
            return Err(Error::Contract(format!(
                "inconsistent lengths: {} frequencies, {} couplings, {} rates, {} coefficients",
                n,
                couplings.len(),
                rates.len(),
                coeffs.len()
            )));
        }
        if rates.iter().any(|g| *g <= 0.0) {
            return Err(Error::Contract("all damping rates must be positive".into()));
        }
        if couplings.iter().any(|g| *g < 0.0) {
            return Err(Error::Contract("couplings must be nonnegative (gauge-fixed)".into()));
        }
        weights::gauge_fix(&mut coeffs);
        let dims = if local_dims.is_empty() { vec![4; n] } else { local_dims };
        if dims.len() != n {
            return Err(Error::Contract("local_dims length must match mode count".into()));
        }
        Ok(Self { frequencies, couplings, rates, coeffs, local_dims: dims, unit })
    }

    pub fn n_modes(&self) -> usize {
        self.frequencies.len()
    }

    /// Diagonal entries α_n = −Γ_n/2 − iΩ_n of the dynamical matrix.
    pub fn alphas(&self) -> Vec<Complex64> {
        self.frequencies
            .iter()
            .zip(&self.rates)
            .map(|(om, ga)| Complex64::new(-0.5 * ga, -om))
            .collect()
    }

    /// C(0) = Σ_n |c_n|².
    pub fn coeff_norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// C(t) at a single time through the eigendecomposition.
    pub fn correlation(&self, t: f64) -> Result<Complex64> {
        let dynm = dynamical_matrix(self)?;
        Ok(dynm.correlation(&self.coeffs, t))
    }
}

/// Eigendecomposition of the chain's dynamical matrix.
#[derive(Debug, Clone)]
pub struct DynamicalMatrix {
    pub matrix: Array2<Complex64>,
    pub eigenvalues: Vec<Complex64>,
    /// Columns are right eigenvectors u^n.
    pub right: Array2<Complex64>,
    /// Rows are left eigenvectors v^n, normalized so that V U = I.
    pub left: Array2<Complex64>,
}

/// Assembles the tridiagonal M from diagonal α and couplings g.
pub fn build_matrix(alphas: &[Complex64], couplings: &[f64]) -> Array2<Complex64> {
    let n = alphas.len();
    let mut m = Array2::<Complex64>::zeros((n, n));
    for (i, a) in alphas.iter().enumerate() {
        m[(i, i)] = *a;
    }
    for (i, g) in couplings.iter().enumerate() {
        m[(i, i + 1)] = Complex64::new(0.0, -g);
        m[(i + 1, i)] = Complex64::new(0.0, -g);
    }
    m
}

/// Eigendecomposition with biorthonormal left/right eigenvectors; rejects
/// degenerate spectra.
pub fn dynamical_matrix(bath: &SurrogateBath) -> Result<DynamicalMatrix> {
    decompose(&build_matrix(&bath.alphas(), &bath.couplings))
}

pub fn decompose(m: &Array2<Complex64>) -> Result<DynamicalMatrix> {
    let n = m.nrows();
    if n == 1 {
        return Ok(DynamicalMatrix {
            matrix: m.clone(),
            eigenvalues: vec![m[(0, 0)]],
            right: Array2::from_elem((1, 1), Complex64::new(1.0, 0.0)),
            left: Array2::from_elem((1, 1), Complex64::new(1.0, 0.0)),
        });
    }
    let (vals, vecs) = m
        .eig()
        .map_err(|e| Error::Numerics(format!("eigendecomposition failed: {e}")))?;
    let norm_m = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for i in 0..n {
        for j in (i + 1)..n {
            if (vals[i] - vals[j]).norm() < 1e-10 * norm_m.max(1.0) {
                return Err(Error::Degenerate(format!(
                    "eigenvalue gap below tolerance: λ_{i} = {}, λ_{j} = {}",
                    vals[i], vals[j]
                )));
            }
        }
    }
    let left = vecs
        .inv()
        .map_err(|e| Error::Numerics(format!("eigenvector inversion failed: {e}")))?;
    // biorthogonality residual ‖VU − I‖
    let mut resid = 0.0f64;
    let prod = left.dot(&vecs);
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { 1.0 } else { 0.0 };
            resid = resid.max((prod[(i, j)] - expect).norm());
        }
    }
    if resid > 1e-10 {
        return Err(Error::Numerics(format!("biorthogonality residual {resid:.3e}")));
    }
    Ok(DynamicalMatrix { matrix: m.clone(), eigenvalues: vals.to_vec(), right: vecs, left })
}

impl DynamicalMatrix {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Mode weights w_n = (u^n · c)(v^n · c̄) for coefficients c.
    pub fn weights(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let n = self.n();
        (0..n)
            .map(|k| {
                let mut p = Complex64::default();
                let mut q = Complex64::default();
                for l in 0..n {
                    p += self.right[(l, k)] * coeffs[l];
                    q += self.left[(k, l)] * coeffs[l].conj();
                }
                p * q
            })
            .collect()
    }

    /// C(t) = Σ_n w_n e^{λ_n t}.
    pub fn correlation(&self, coeffs: &[Complex64], t: f64) -> Complex64 {
        self.weights(coeffs)
            .iter()
            .zip(&self.eigenvalues)
            .map(|(w, l)| w * (l * t).exp())
            .sum()
    }
}

/// Surrogate correlation function C(t) = Σ w_n e^{λ_n t} for t ≥ 0.
pub fn correlation_from_params(bath: &SurrogateBath, t: f64) -> Result<Complex64> {
    if t < 0.0 {
        return Err(Error::Domain("correlation defined for t ≥ 0".into()));
    }
    bath.correlation(t)
}

/// Fourier transform of the Hermitian-extended surrogate correlation:
///
///   C(ω) = −2 Σ_n (Re w_n Re λ_n + Im w_n (ω + Im λ_n))
///               / (Re λ_n² + (ω + Im λ_n)²).
pub fn correlation_fourier_from_params(bath: &SurrogateBath, omega: f64) -> Result<f64> {
    let dynm = dynamical_matrix(bath)?;
    let w = dynm.weights(&bath.coeffs);
    Ok(fourier_from_modes(&dynm.eigenvalues, &w, omega))
}

pub fn fourier_from_modes(lambdas: &[Complex64], weights: &[Complex64], omega: f64) -> f64 {
    lambdas
        .iter()
        .zip(weights)
        .map(|(l, w)| {
            -2.0 * (w.re * l.re + w.im * (omega + l.im)) / (l.re * l.re + (omega + l.im).powi(2))
        })
        .sum()
}

/// Figure-of-merit kind: continuous double integral or grid sum.
pub use search::MeritKind as Merit;

/// I₁(t_max) = ∫_0^{t_max} (t_max − τ) |ΔC(τ)| dτ (the double time integral
/// reduced by a change of variables).
pub fn figure_of_merit_integral<F, G>(c_trial: F, c_target: G, t_max: f64) -> Result<f64>
where
    F: Fn(f64) -> Complex64,
    G: Fn(f64) -> Complex64,
{
    quad::integrate_real(
        |tau| (t_max - tau) * (c_trial(tau) - c_target(tau)).norm(),
        0.0,
        t_max,
        1e-8,
        1e-12,
    )
}

/// I₂ = Δt Σ_{k=1}^{N} |ΔC(kΔt)| on a uniform grid.
pub fn figure_of_merit_grid(
    trial: &[Complex64],
    target: &[Complex64],
    dt: f64,
) -> Result<f64> {
    if trial.len() != target.len() {
        return Err(Error::Contract("merit grids differ in length".into()));
    }
    Ok(dt * trial
        .iter()
        .zip(target)
        .skip(1)
        .map(|(a, b)| (a - b).norm())
        .sum::<f64>())
}

/// A single thermalized surrogate mode: damped oscillator with emission and
/// absorption rates obeying detailed balance, standing in for a narrow
/// high-frequency peak at temperature β.
#[derive(Debug, Clone)]
pub struct ThermalMode {
    pub omega: f64,
    pub gamma: f64,
    pub coeff: f64,
    pub beta: Beta,
    pub local_dim: usize,
}

impl ThermalMode {
    pub fn new(omega: f64, gamma: f64, beta: Beta, coeff: f64) -> Result<Self> {
        if omega <= 0.0 || gamma <= 0.0 {
            return Err(Error::Domain("thermal mode needs Ω > 0 and Γ > 0".into()));
        }
        Ok(Self { omega, gamma, coeff, beta, local_dim: 8 })
    }

    /// Bose–Einstein occupation n_Ω(β).
    pub fn occupation(&self) -> f64 {
        self.beta.occupation(self.omega)
    }

    /// (Γ↑, Γ↓) = (Γ n, Γ (n+1)).
    pub fn rates(&self) -> (f64, f64) {
        let n = self.occupation();
        (self.gamma * n, self.gamma * (n + 1.0))
    }

    /// C(t) = c²((n+1) e^{−Γ|t|/2 − iΩt} + n e^{−Γ|t|/2 + iΩt}).
    pub fn correlation(&self, t: f64) -> Complex64 {
        let n = self.occupation();
        let c2 = self.coeff * self.coeff;
        let damp = (-0.5 * self.gamma * t.abs()).exp();
        let osc = Complex64::new(0.0, -self.omega * t).exp();
        c2 * damp * ((n + 1.0) * osc + n * osc.conj())
    }

    /// Two Lorentzians at ±Ω weighted by Γ↓ and Γ↑.
    pub fn correlation_fourier(&self, omega: f64) -> f64 {
        let (up, down) = self.rates();
        let c2 = self.coeff * self.coeff;
        let hw = 0.5 * self.gamma;
        c2 * (down / (hw * hw + (omega - self.omega).powi(2))
            + up / (hw * hw + (omega + self.omega).powi(2)))
    }
}

// ---------------------------------------------------------------------------
// Serialization: per-mode parameter tables (CSV and JSON-compatible tree).
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BathParamsDoc {
    pub unit: Unit,
    pub modes: Vec<ModeRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeRow {
    pub mode: usize,
    pub omega: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_to_next: Option<f64>,
    pub gamma: f64,
    pub re_c: f64,
    pub im_c: f64,
    pub d_loc: usize,
}

impl SurrogateBath {
    pub fn to_doc(&self) -> BathParamsDoc {
        let n = self.n_modes();
        let modes = (0..n)
            .map(|i| ModeRow {
                mode: i + 1,
                omega: self.frequencies[i],
                g_to_next: if i + 1 < n { Some(self.couplings[i]) } else { None },
                gamma: self.rates[i],
                re_c: self.coeffs[i].re,
                im_c: self.coeffs[i].im,
                d_loc: self.local_dims[i],
            })
            .collect();
        BathParamsDoc { unit: self.unit, modes }
    }

    pub fn from_doc(doc: &BathParamsDoc) -> Result<Self> {
        let n = doc.modes.len();
        let mut frequencies = Vec::with_capacity(n);
        let mut couplings = Vec::with_capacity(n.saturating_sub(1));
        let mut rates = Vec::with_capacity(n);
        let mut coeffs = Vec::with_capacity(n);
        let mut dims = Vec::with_capacity(n);
        for (i, row) in doc.modes.iter().enumerate() {
            frequencies.push(row.omega);
            rates.push(row.gamma);
            coeffs.push(Complex64::new(row.re_c, row.im_c));
            dims.push(row.d_loc);
            match row.g_to_next {
                Some(g) if i + 1 < n => couplings.push(g),
                None if i + 1 == n => {}
                _ => {
                    return Err(Error::Config(format!(
                        "g_to_next must be present on all but the last mode (row {})",
                        i + 1
                    )))
                }
            }
        }
        SurrogateBath::new(frequencies, couplings, rates, coeffs, dims, doc.unit)
    }

    /// Appendix-style CSV: `# unit:` header line, then one row per mode.
    pub fn to_csv_string(&self) -> String {
        let unit = match self.unit {
            Unit::OmegaC => "omega_c",
            Unit::InvCm => "cm-1",
        };
        let mut out = format!("# unit: {unit}\nmode,Omega,g_to_next,Gamma,re_c,im_c,d_loc\n");
        let n = self.n_modes();
        for i in 0..n {
            let g = if i + 1 < n { format!("{}", self.couplings[i]) } else { String::new() };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                i + 1,
                self.frequencies[i],
                g,
                self.rates[i],
                self.coeffs[i].re,
                self.coeffs[i].im,
                self.local_dims[i]
            ));
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut unit = Unit::OmegaC;
        let mut rows = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# unit:") {
                unit = match rest.trim() {
                    "omega_c" => Unit::OmegaC,
                    "cm-1" => Unit::InvCm,
                    other => return Err(Error::Config(format!("unknown unit tag {other:?}"))),
                };
                continue;
            }
            if line.starts_with("mode,") || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::Config(format!("expected 7 columns, got {}", fields.len())));
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad {what} value {s:?}")))
            };
            rows.push(ModeRow {
                mode: fields[0]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad mode index {:?}", fields[0])))?,
                omega: parse(fields[1], "Omega")?,
                g_to_next: if fields[2].is_empty() { None } else { Some(parse(fields[2], "g")?) },
                gamma: parse(fields[3], "Gamma")?,
                re_c: parse(fields[4], "re_c")?,
                im_c: parse(fields[5], "im_c")?,
                d_loc: fields[6]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad d_loc {:?}", fields[6])))?,
            });
        }
        if rows.is_empty() {
            return Err(Error::Config("no parameter rows found".into()));
        }
        Self::from_doc(&BathParamsDoc { unit, modes: rows })
    }
}
