//! The worked physical models: purely dephasing spin-boson (with its exact
//! solution), the vibronic dimer with absorption spectra, and the polymer
//! chain.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lindblad::{
    assemble_model, BathAttachment, LindbladModel, SparseMatrix, StateKind, StateMatrix,
    ThermalAttachment,
};
use crate::numerics::ode::DormandPrince;
use crate::numerics::quad;
use crate::spectral::{BathSpec, Beta, SpectralComponent};
use crate::surrogate::{SurrogateBath, ThermalMode};

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sigma_z() -> SparseMatrix {
    SparseMatrix::from_triplets(2, 2, vec![(0, 0, c64(1.0, 0.0)), (1, 1, c64(-1.0, 0.0))])
}

// ---------------------------------------------------------------------------
// Purely dephasing spin-boson model
// ---------------------------------------------------------------------------

/// Qubit with σ_z coupling to a bath: H = (ω₀/2)σ_z + (k/2)σ_z ⊗ G.
#[derive(Debug, Clone)]
pub struct SpinBosonSpec {
    pub omega0: f64,
    pub coupling: f64,
    pub bath: BathSpec,
}

/// Assembles the dephasing qubit coupled to a surrogate chain.
pub fn spin_boson_model(spec: &SpinBosonSpec, bath: &SurrogateBath) -> Result<LindbladModel> {
    let h_s = sigma_z().scale(c64(0.5 * spec.omega0, 0.0));
    let a = sigma_z().scale(c64(0.5 * spec.coupling, 0.0));
    let model = assemble_model(
        2,
        &h_s,
        &[a],
        &[BathAttachment { bath, coupling: 0, dims: vec![] }],
        &[],
        bath.unit,
    )?;
    Ok(model)
}

/// Dephasing exponent Γ(t) = ∫_0^∞ (dω/π) J(ω) coth(βω/2) (cos ωt − 1)/ω².
pub fn dephasing_exponent(bath: &BathSpec, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for comp in &bath.components {
        total += dephasing_component(comp, bath.beta, t)?;
    }
    Ok(total)
}

fn dephasing_component(comp: &SpectralComponent, beta: Beta, t: f64) -> Result<f64> {
    let tail = component_tail(comp);
    let mut panel = component_scale(comp);
    panel = panel.min(std::f64::consts::PI / (4.0 * t)).max(tail * 1e-6);
    let pi = std::f64::consts::PI;
    let f = |w: f64| -> Complex64 {
        if w == 0.0 {
            return Complex64::default();
        }
        let u = comp.j_over_omega(w).unwrap_or(0.0);
        // (cos ωt − 1)/ω² = −(t²/2)·sinc²(ωt/2)
        let half = 0.5 * w * t;
        let sinc = if half.abs() < 1e-8 { 1.0 - half * half / 6.0 } else { half.sin() / half };
        let cosm1_over_w2 = -0.5 * t * t * sinc * sinc;
        let val = match beta {
            Beta::Infinite => u * w * cosm1_over_w2,
            Beta::Finite(b) => {
                let x = 0.5 * b * w;
                if x < 0.35 {
                    // coth x = 1/x + x/3 − x³/45 + ...
                    let r_over_x = 1.0 / 3.0 - x * x / 45.0 + 2.0 * x.powi(4) / 945.0;
                    u * (2.0 / b) * cosm1_over_w2 + u * (0.5 * b) * r_over_x * (w * cosm1_over_w2) * w
                } else {
                    u * w / x.tanh() * cosm1_over_w2
                }
            }
        };
        Complex64::new(val / pi, 0.0)
    };
    quad::integrate_semi_infinite_capped(f, panel, tail, 1e-10, 1e-13).map(|v| v.re)
}

fn component_tail(comp: &SpectralComponent) -> f64 {
    match comp {
        SpectralComponent::Ohmic { cutoff, .. } => cutoff * 45.0,
        SpectralComponent::AdolphsRenger { cutoffs, .. } => cutoffs[0].max(cutoffs[1]) * 3600.0,
        SpectralComponent::AntisymLorentzian { center, width, .. } => {
            (center + 10.0 * width).max(center * 40.0)
        }
        SpectralComponent::Tabulated { points } => points.last().map(|p| p.0).unwrap_or(1.0),
    }
}

fn component_scale(comp: &SpectralComponent) -> f64 {
    match comp {
        SpectralComponent::Ohmic { cutoff, .. } => *cutoff,
        SpectralComponent::AdolphsRenger { cutoffs, .. } => 50.0 * cutoffs[0].min(cutoffs[1]),
        SpectralComponent::AntisymLorentzian { width, .. } => *width,
        SpectralComponent::Tabulated { points } => {
            let span = points.last().unwrap().0 - points[0].0;
            (span / points.len() as f64).max(span * 1e-3)
        }
    }
}

/// Exact dephasing evolution: populations frozen, coherence damped as
/// ρ₀₁(t) = e^{−iω₀ t + k²Γ(t)} ρ₀₁(0).
pub fn spin_boson_exact(
    spec: &SpinBosonSpec,
    rho0: &Array2<Complex64>,
    t: f64,
) -> Result<Array2<Complex64>> {
    let gamma = dephasing_exponent(&spec.bath, t)?;
    let factor = (c64(0.0, -spec.omega0 * t) + c64(spec.coupling * spec.coupling * gamma, 0.0)).exp();
    let mut out = rho0.clone();
    out[(0, 1)] = rho0[(0, 1)] * factor;
    out[(1, 0)] = rho0[(1, 0)] * factor.conj();
    Ok(out)
}

/// Relative accuracy figure E_f(t) = |f − f_num| / (|f| + |f_num|); zero when
/// both vanish.
pub fn error_figure(exact: &[Complex64], numeric: &[Complex64]) -> Result<Vec<f64>> {
    if exact.len() != numeric.len() {
        return Err(Error::Contract("error figure needs a common grid".into()));
    }
    Ok(exact
        .iter()
        .zip(numeric)
        .map(|(a, b)| {
            let den = a.norm() + b.norm();
            if den == 0.0 {
                0.0
            } else {
                (a - b).norm() / den
            }
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Vibronic dimer
// ---------------------------------------------------------------------------

/// Two-monomer model: site energies, hopping and identical local baths.
/// The doubly excited configuration is outside the treated state space.
#[derive(Debug, Clone)]
pub struct DimerSpec {
    pub e1: f64,
    pub e2: f64,
    pub hopping: f64,
    pub bath: BathSpec,
}

impl DimerSpec {
    /// Model parameters of the reference dimer (cm⁻¹).
    pub fn reference(bath: BathSpec) -> Self {
        Self { e1: 12_328.0, e2: 12_472.0, hopping: 70.7, bath }
    }

    /// Single-excitation gap Δ = √((E₂−E₁)² + 4J²).
    pub fn gap(&self) -> f64 {
        ((self.e2 - self.e1).powi(2) + 4.0 * self.hopping * self.hopping).sqrt()
    }

    /// Eigenenergies ε_{1,2} of the single-excitation Hamiltonian.
    pub fn eigenenergies(&self) -> (f64, f64) {
        let mid = 0.5 * (self.e1 + self.e2);
        (mid - 0.5 * self.gap(), mid + 0.5 * self.gap())
    }

    /// Midpoint (E₁+E₂)/2 used to center optical spectra.
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.e1 + self.e2)
    }
}

/// Single-excitation dynamics with the common-mode environment dropped: the
/// two-level system couples through (|E₁⟩⟨E₁| − |E₂⟩⟨E₂|)/√2 to one chain
/// fitted to the site spectral density (the √2 lives in the system operator,
/// keeping the bath reusable).
pub fn dimer_relative_model(spec: &DimerSpec, bath: &SurrogateBath) -> Result<LindbladModel> {
    let h = SparseMatrix::from_triplets(
        2,
        2,
        vec![
            (0, 0, c64(spec.e1, 0.0)),
            (1, 1, c64(spec.e2, 0.0)),
            (0, 1, c64(spec.hopping, 0.0)),
            (1, 0, c64(spec.hopping, 0.0)),
        ],
    );
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let a = SparseMatrix::from_triplets(
        2,
        2,
        vec![(0, 0, c64(inv_sqrt2, 0.0)), (1, 1, c64(-inv_sqrt2, 0.0))],
    );
    assemble_model(
        2,
        &h,
        &[a],
        &[BathAttachment { bath, coupling: 0, dims: vec![] }],
        &[],
        bath.unit,
    )
}

/// Three-level optical model {|g⟩, |E₁⟩, |E₂⟩} with two independent copies
/// of the site bath, each coupled to its site projector. `energy_shift`
/// moves the single-excitation energies into a rotating bookkeeping frame
/// (spectra map ω ↦ ω − shift); the ground state stays at zero and uncoupled.
pub fn dimer_absorption_model(
    spec: &DimerSpec,
    bath: &SurrogateBath,
    dims_override: Option<Vec<usize>>,
    energy_shift: f64,
    thermal: Option<&ThermalMode>,
) -> Result<LindbladModel> {
    let h = SparseMatrix::from_triplets(
        3,
        3,
        vec![
            (1, 1, c64(spec.e1 - energy_shift, 0.0)),
            (2, 2, c64(spec.e2 - energy_shift, 0.0)),
            (1, 2, c64(spec.hopping, 0.0)),
            (2, 1, c64(spec.hopping, 0.0)),
        ],
    );
    let p1 = SparseMatrix::from_triplets(3, 3, vec![(1, 1, c64(1.0, 0.0))]);
    let p2 = SparseMatrix::from_triplets(3, 3, vec![(2, 2, c64(1.0, 0.0))]);
    let dims = dims_override.unwrap_or_default();
    let baths = [
        BathAttachment { bath, coupling: 0, dims: dims.clone() },
        BathAttachment { bath, coupling: 1, dims },
    ];
    let mut thermals = Vec::new();
    if let Some(mode) = thermal {
        thermals.push(ThermalAttachment { mode: mode.clone(), coupling: 0 });
        thermals.push(ThermalAttachment { mode: mode.clone(), coupling: 1 });
    }
    let model = assemble_model(3, &h, &[p1, p2], &baths, &thermals, bath.unit)?;
    Ok(model.with_frame_shift(energy_shift))
}

/// Dipole correlation C_μ(t) = Tr[|g⟩(⟨E₁|+⟨E₂|) e^{Lt}[ρ̃₀]] with the
/// pseudo-state ρ̃₀ = (|E₁⟩+|E₂⟩)⟨g| ⊗ ρ_bath. In |d|² units, C_μ(0) = 2.
///
/// When every bath factor is stationary in the vacuum, ρ̃₀ is rank-1 and
/// stays of the form |ψ(t)⟩⟨g, vac| for all t (the ground-state row is both
/// H-invariant and annihilated by every jump), so the evolution reduces to
/// the drift dψ/dt = (−iH′ − ½Σγ L†L)ψ. Models with thermally occupied
/// modes fall back to the full pseudo-state master integrator.
pub fn dipole_correlation(
    model: &LindbladModel,
    grid: &[f64],
    tol: f64,
) -> Result<Vec<Complex64>> {
    let d = model.dim();
    let sys = model.layout.system_dim();
    if sys != 3 {
        return Err(Error::Contract("dipole correlation expects the 3-level optical model".into()));
    }
    let env = d / sys;
    if vacuum_row_is_invariant(model) {
        // rank-1 reduction: ψ₀ = (|E₁⟩ + |E₂⟩) ⊗ |vac⟩ (unnormalized)
        let mut psi = vec![Complex64::default(); d];
        psi[env] = c64(1.0, 0.0);
        psi[2 * env] = c64(1.0, 0.0);
        let drift = model.drift().clone();
        let solver = DormandPrince::new(tol, tol * 1e-2);
        let mut out = Vec::with_capacity(grid.len());
        solver.integrate(
            |_t, y, dy| drift.matvec(y, dy),
            &mut psi,
            0.0,
            *grid.last().ok_or_else(|| Error::Contract("empty grid".into()))?,
            grid,
            |_t, y| out.push(y[env] + y[2 * env]),
        )?;
        Ok(out)
    } else {
        dipole_correlation_pseudo(model, grid, tol)
    }
}

/// Full pseudo-state evolution of ρ̃₀ (used for small models and as the
/// oracle for the rank-1 path). The bath steady state is the vacuum for
/// chains and the truncated Gibbs state for thermally damped modes.
pub fn dipole_correlation_pseudo(
    model: &LindbladModel,
    grid: &[f64],
    tol: f64,
) -> Result<Vec<Complex64>> {
    let d = model.dim();
    let sys = model.layout.system_dim();
    let env = d / sys;
    let rho_env = bath_steady_state(model)?;

    let mut x0 = Array2::<Complex64>::zeros((d, d));
    for e1 in 0..env {
        for e2 in 0..env {
            let w = rho_env[(e1, e2)];
            if w.norm_sqr() == 0.0 {
                continue;
            }
            // (|E₁⟩ + |E₂⟩)⟨g| ⊗ ρ_env
            x0[(env + e1, e2)] += w;
            x0[(2 * env + e1, e2)] += w;
        }
    }
    let pseudo = StateMatrix::pseudo(x0);
    // observable μ⁻ = |g⟩(⟨E₁| + ⟨E₂|) ⊗ I
    let mut trip = Vec::with_capacity(2 * env);
    for e in 0..env {
        trip.push((e, env + e, c64(1.0, 0.0)));
        trip.push((e, 2 * env + e, c64(1.0, 0.0)));
    }
    let mu_minus = SparseMatrix::from_triplets(d, d, trip);
    let mut probe = model.clone();
    probe.observables = vec![("dipole".into(), mu_minus)];
    let traj = crate::lindblad::evolve_master(&probe, &pseudo, grid, tol)?;
    Ok(traj.observables.into_iter().next().unwrap().1)
}

/// Checks that ⟨g, vac| is a left-invariant row: H annihilates the ground
/// column and every jump annihilates the vacuum ket.
fn vacuum_row_is_invariant(model: &LindbladModel) -> bool {
    let d = model.dim();
    let sys = model.layout.system_dim();
    let env = d / sys;
    let gvac = 0 * env; // system index 0 (ground), environment vacuum
    // column gvac of H must vanish
    let mut h_col = 0.0f64;
    for (_, col, v) in model.hamiltonian.triplets() {
        if col == gvac {
            h_col += v.norm();
        }
    }
    if h_col > 1e-12 {
        return false;
    }
    // every jump must annihilate the vacuum: column gvac of L zero, i.e.
    // creation-type jumps (thermal occupation) disable the fast path
    for (_, l) in &model.jumps {
        for (_, col, v) in l.triplets() {
            if col == gvac && v.norm() > 0.0 {
                return false;
            }
        }
    }
    true
}

/// Stationary environment state: vacuum for zero-temperature chains, the
/// truncated (renormalized) Gibbs factor for thermally damped single modes.
fn bath_steady_state(model: &LindbladModel) -> Result<Array2<Complex64>> {
    let env_dims = &model.layout.dims[model.layout.system_factors..];
    let env: usize = env_dims.iter().product();
    // Build per-factor occupation ratios by probing the jump operators: a
    // creation-type jump with rate Γ↑ against the matching annihilation Γ↓
    // gives x = Γ↑/Γ↓ on that factor; chain modes have x = 0.
    let mut ratios = vec![0.0f64; env_dims.len()];
    let ops = crate::lindblad::build_oscillator_ops(env_dims)?;
    let sys_id = SparseMatrix::identity(model.layout.system_dim());
    for (f, op) in ops.iter().enumerate() {
        let b_full = sys_id.kron(op);
        let bd_full = b_full.adjoint();
        let mut down = 0.0;
        let mut up = 0.0;
        for (rate, l) in &model.jumps {
            if same_pattern(l, &b_full) {
                down = *rate;
            }
            if same_pattern(l, &bd_full) {
                up = *rate;
            }
        }
        if down > 0.0 && up > 0.0 {
            ratios[f] = up / down;
        }
    }
    let mut rho = Array2::<Complex64>::zeros((env, env));
    // product of geometric thermal factors
    let mut strides = vec![1usize; env_dims.len()];
    for k in (0..env_dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * env_dims[k + 1];
    }
    let mut norm = 0.0f64;
    for e in 0..env {
        let mut p = 1.0f64;
        for (f, &dim) in env_dims.iter().enumerate() {
            let occ = (e / strides[f]) % dim;
            p *= ratios[f].powi(occ as i32);
        }
        rho[(e, e)] = c64(p, 0.0);
        norm += p;
    }
    for e in 0..env {
        rho[(e, e)] /= c64(norm, 0.0);
    }
    Ok(rho)
}

/// Structural comparison: both operators have the same nonzero pattern and
/// proportional values (used to recognize b vs b† jumps).
fn same_pattern(a: &SparseMatrix, b: &SparseMatrix) -> bool {
    if a.nnz() != b.nnz() || a.nnz() == 0 {
        return false;
    }
    let ta: Vec<_> = a.triplets().collect();
    let tb: Vec<_> = b.triplets().collect();
    let ratio = ta[0].2 / tb[0].2;
    ta.iter().zip(&tb).all(|((r1, c1, v1), (r2, c2, v2))| {
        r1 == r2 && c1 == c2 && (v1 - ratio * v2).norm() < 1e-12 * v1.norm().max(1e-300)
    })
}

/// One-sided transform S(ω) = ω · Im ∫_0^{t_max} i C_μ(t) e^{iωt} dt by
/// trapezoidal quadrature on the sample grid. `frame_shift` undoes the
/// rotating bookkeeping: the transform is taken at ω − shift while the
/// prefactor uses the physical ω. Returns (spectrum, decay_warning).
pub fn absorption_spectrum(
    c_mu: &[Complex64],
    dt: f64,
    omegas: &[f64],
    frame_shift: f64,
) -> Result<(Vec<f64>, bool)> {
    if c_mu.len() < 2 || !(dt > 0.0) {
        return Err(Error::Contract("need a sampled dipole correlation".into()));
    }
    let warn = c_mu.last().unwrap().norm() > 1e-3 * c_mu[0].norm();
    let n = c_mu.len();
    let spectrum = omegas
        .iter()
        .map(|&omega| {
            let om_frame = omega - frame_shift;
            let mut acc = Complex64::default();
            for (k, v) in c_mu.iter().enumerate() {
                let t = k as f64 * dt;
                let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                acc += w * v * (c64(0.0, om_frame * t)).exp();
            }
            omega * (Complex64::i() * acc * dt).im
        })
        .collect();
    Ok((spectrum, warn))
}

// ---------------------------------------------------------------------------
// Polymer chain
// ---------------------------------------------------------------------------

/// Homogeneous K-site chain in the single-excitation basis with identical
/// local baths on every site.
#[derive(Debug, Clone)]
pub struct PolymerSpec {
    pub sites: usize,
    pub hopping: f64,
    pub bath: BathSpec,
}

/// K-site hopping Hamiltonian with per-site bath copies coupled to the site
/// projectors; a thermal single mode per site optionally stands in for a
/// strongly coupled sharp peak.
pub fn polymer_model(
    spec: &PolymerSpec,
    bath: &SurrogateBath,
    dims_override: Option<Vec<usize>>,
    thermal: Option<&ThermalMode>,
) -> Result<LindbladModel> {
    let k = spec.sites;
    if k < 2 {
        return Err(Error::Contract("polymer needs at least 2 sites".into()));
    }
    let mut trip = Vec::with_capacity(2 * (k - 1));
    for n in 0..k - 1 {
        trip.push((n, n + 1, c64(spec.hopping, 0.0)));
        trip.push((n + 1, n, c64(spec.hopping, 0.0)));
    }
    let h = SparseMatrix::from_triplets(k, k, trip);
    let projectors: Vec<SparseMatrix> = (0..k)
        .map(|n| SparseMatrix::from_triplets(k, k, vec![(n, n, c64(1.0, 0.0))]))
        .collect();
    let dims = dims_override.unwrap_or_default();
    let baths: Vec<BathAttachment> = (0..k)
        .map(|n| BathAttachment { bath, coupling: n, dims: dims.clone() })
        .collect();
    let thermals: Vec<ThermalAttachment> = match thermal {
        Some(mode) => (0..k)
            .map(|n| ThermalAttachment { mode: mode.clone(), coupling: n })
            .collect(),
        None => Vec::new(),
    };
    let mut model = assemble_model(k, &h, &projectors, &baths, &thermals, bath.unit)?;
    // site populations as standard observables
    for n in 0..k {
        let p = crate::lindblad::embed_system_op(&model.layout, &projectors[n])?;
        model = model.with_observable(&format!("p{}", n + 1), p);
    }
    Ok(model)
}
