//! Truncated system ⊗ chain Lindblad models and their integration.
//!
//! dρ/dt = −i[H′, ρ] + Σ_i γ_i (L_i ρ L_i† − ½{L_i†L_i, ρ})
//!
//! The master equation is integrated in matrix form
//! dρ = Aρ + ρA† + Σ γ LρL† with A = −iH′ − ½Σγ L†L, using sparse products
//! against the dense state; the explicit vectorized superoperator is also
//! available for small models. Quantum-jump (MCWF) trajectories share the
//! same drift A.

pub mod mcwf;
pub mod sparse;

pub use mcwf::{evolve_mcwf, McwfResult};
pub use sparse::SparseMatrix;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::ode::DormandPrince;
use crate::spectral::Unit;
use crate::surrogate::{SurrogateBath, ThermalMode};

/// Factor layout of the tensor-product space: the first `system_factors`
/// entries are system degrees of freedom, the rest are oscillator modes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub dims: Vec<usize>,
    pub system_factors: usize,
}

impl Layout {
    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn system_dim(&self) -> usize {
        self.dims[..self.system_factors].iter().product()
    }
}

/// Assembled model: Hamiltonian, jump operators with rates, labeled
/// observables, and the factor layout.
#[derive(Clone)]
pub struct LindbladModel {
    pub layout: Layout,
    pub hamiltonian: SparseMatrix,
    /// (rate γ_i, operator L_i); all rates strictly positive.
    pub jumps: Vec<(f64, SparseMatrix)>,
    pub observables: Vec<(String, SparseMatrix)>,
    pub unit: Unit,
    /// Energy shift folded into H′ (rotating bookkeeping for optical runs):
    /// physical results at frequency ω correspond to ω − frame_shift here.
    pub frame_shift: f64,
    drift: SparseMatrix,
    drift_adj: SparseMatrix,
    jump_adjoints: Vec<SparseMatrix>,
}

impl LindbladModel {
    pub fn new(
        layout: Layout,
        hamiltonian: SparseMatrix,
        jumps: Vec<(f64, SparseMatrix)>,
        unit: Unit,
    ) -> Result<Self> {
        let dim = layout.total_dim();
        if hamiltonian.nrows != dim || hamiltonian.ncols != dim {
            return Err(Error::DimensionMismatch(format!(
                "hamiltonian is {}×{}, layout dimension is {dim}",
                hamiltonian.nrows, hamiltonian.ncols
            )));
        }
        let defect = hamiltonian.hermiticity_defect();
        if defect > 1e-12 * hamiltonian.frobenius_norm().max(1.0) {
            return Err(Error::Contract(format!("H′ not Hermitian: defect {defect:.3e}")));
        }
        for (rate, l) in &jumps {
            if *rate <= 0.0 {
                return Err(Error::Contract(format!("jump rate {rate} must be positive")));
            }
            if l.nrows != dim || l.ncols != dim {
                return Err(Error::DimensionMismatch("jump operator dimension".into()));
            }
        }
        let mut drift = hamiltonian.scale(Complex64::new(0.0, -1.0));
        for (rate, l) in &jumps {
            let ldl = l.adjoint().matmul(l)?;
            drift = drift.add(&ldl.scale(Complex64::new(-0.5 * rate, 0.0)))?;
        }
        let drift_adj = drift.adjoint();
        let jump_adjoints = jumps.iter().map(|(_, l)| l.adjoint()).collect();
        Ok(Self {
            layout,
            hamiltonian,
            jumps,
            observables: Vec::new(),
            unit,
            frame_shift: 0.0,
            drift,
            drift_adj,
            jump_adjoints,
        })
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn with_observable(mut self, name: &str, op: SparseMatrix) -> Self {
        self.observables.push((name.to_string(), op));
        self
    }

    pub fn with_frame_shift(mut self, shift: f64) -> Self {
        self.frame_shift = shift;
        self
    }

    /// Drift A = −iH′ − ½ Σ γ L†L shared by master and trajectory evolution.
    pub fn drift(&self) -> &SparseMatrix {
        &self.drift
    }

    /// In-place right-hand side of the master equation in matrix form:
    /// out = Aρ + ρA† + Σ γ LρL†.
    pub fn apply_generator(&self, rho: &[Complex64], out: &mut [Complex64], scratch: &mut Scratch) {
        let d = self.dim();
        scratch.ensure(d);
        self.drift.left_mul_dense(rho, d, out);
        self.drift_adj.right_mul_dense(rho, d, &mut scratch.a);
        for (o, s) in out.iter_mut().zip(&scratch.a) {
            *o += s;
        }
        for ((rate, l), ladj) in self.jumps.iter().zip(&self.jump_adjoints) {
            l.left_mul_dense(rho, d, &mut scratch.a);
            ladj.right_mul_dense(&scratch.a, d, &mut scratch.b);
            let g = Complex64::new(*rate, 0.0);
            for (o, s) in out.iter_mut().zip(&scratch.b) {
                *o += g * s;
            }
        }
    }
}

/// Reusable dense scratch buffers for the generator application.
pub struct Scratch {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl Scratch {
    pub fn new() -> Self {
        Self { a: Vec::new(), b: Vec::new() }
    }

    fn ensure(&mut self, d: usize) {
        if self.a.len() != d * d {
            self.a = vec![Complex64::default(); d * d];
            self.b = vec![Complex64::default(); d * d];
        }
    }
}

impl Default for Scratch {
    fn default() -> Self {
        Self::new()
    }
}

/// Density matrix or pseudo-state on the model space.
#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    HermitianDensity,
    PseudoState,
}

#[derive(Debug, Clone)]
pub struct StateMatrix {
    pub data: Array2<Complex64>,
    pub kind: StateKind,
}

impl StateMatrix {
    /// Validated density matrix: unit trace, Hermitian.
    pub fn density(data: Array2<Complex64>) -> Result<Self> {
        let tr: Complex64 = (0..data.nrows()).map(|i| data[(i, i)]).sum();
        if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
            return Err(Error::Contract(format!("density trace is {tr}, expected 1")));
        }
        let mut defect = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..data.nrows() {
            for j in 0..data.ncols() {
                defect = defect.max((data[(i, j)] - data[(j, i)].conj()).norm());
                scale = scale.max(data[(i, j)].norm());
            }
        }
        if defect > 1e-10 * scale.max(1.0) {
            return Err(Error::Contract(format!("density not Hermitian: defect {defect:.3e}")));
        }
        Ok(Self { data, kind: StateKind::HermitianDensity })
    }

    /// Non-Hermitian operator evolved under the same generator (dipole
    /// correlations); no trace or positivity constraints.
    pub fn pseudo(data: Array2<Complex64>) -> Self {
        Self { data, kind: StateKind::PseudoState }
    }

    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (n2 - 1.0).abs() > 1e-8 {
            return Err(Error::Contract("pure state must be normalized".into()));
        }
        let d = psi.len();
        let mut rho = Array2::<Complex64>::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                rho[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        Self::density(rho)
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.data[(i, i)]).sum()
    }
}

/// Time series of reduced states and observables plus integrator diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Reduced system density matrices at the grid times (environment traced out).
    pub reduced: Vec<Array2<Complex64>>,
    pub observables: Vec<(String, Vec<Complex64>)>,
    pub diagnostics: RunDiagnostics,
}

#[derive(Debug, Clone, Default)]
pub struct RunDiagnostics {
    pub steps: usize,
    pub rhs_evals: usize,
    pub trace_drift: f64,
    pub hermiticity_drift: f64,
    pub tolerance: f64,
    pub stationarity_warning: bool,
}

/// Truncated annihilation operators b_n acting on factor n of the product
/// space spanned by `dims` (identity elsewhere).
pub fn build_oscillator_ops(dims: &[usize]) -> Result<Vec<SparseMatrix>> {
    if dims.iter().any(|d| *d < 2) {
        return Err(Error::Contract("every local dimension must be at least 2".into()));
    }
    let total: usize = dims.iter().product();
    let mut ops = Vec::with_capacity(dims.len());
    for (pos, &d) in dims.iter().enumerate() {
        let before: usize = dims[..pos].iter().product();
        let after: usize = dims[pos + 1..].iter().product();
        let mut trip = Vec::with_capacity(total / d * (d - 1));
        for b in 0..before {
            for k in 1..d {
                for a in 0..after {
                    let row = (b * d + (k - 1)) * after + a;
                    let col = (b * d + k) * after + a;
                    trip.push((row, col, Complex64::new((k as f64).sqrt(), 0.0)));
                }
            }
        }
        ops.push(SparseMatrix::from_triplets(total, total, trip));
    }
    Ok(ops)
}

/// Embeds an operator acting on the system factor into the full space.
pub fn embed_system_op(layout: &Layout, op: &SparseMatrix) -> Result<SparseMatrix> {
    let sys = layout.system_dim();
    if op.nrows != sys || op.ncols != sys {
        return Err(Error::DimensionMismatch(format!(
            "system operator {}×{} vs system dimension {sys}",
            op.nrows, op.ncols
        )));
    }
    let env: usize = layout.dims[layout.system_factors..].iter().product();
    Ok(op.kron(&SparseMatrix::identity(env)))
}

/// A surrogate bath wired to one system coupling operator.
pub struct BathAttachment<'a> {
    pub bath: &'a SurrogateBath,
    /// Index into the system coupling operators.
    pub coupling: usize,
    /// Overrides the bath's stored local dimensions when nonempty.
    pub dims: Vec<usize>,
}

pub struct ThermalAttachment {
    pub mode: ThermalMode,
    pub coupling: usize,
}

/// Assembles H′ = H_S ⊗ I + I ⊗ Σ H_R + Σ_k A_k ⊗ F_k with per-mode jumps
/// √Γ_n b_n (chains) and the two detailed-balance jumps of thermal modes.
pub fn assemble_model(
    system_dim: usize,
    system_h: &SparseMatrix,
    couplings: &[SparseMatrix],
    baths: &[BathAttachment],
    thermal: &[ThermalAttachment],
    unit: Unit,
) -> Result<LindbladModel> {
    if system_h.nrows != system_dim || system_h.ncols != system_dim {
        return Err(Error::DimensionMismatch("system Hamiltonian".into()));
    }
    for a in couplings {
        if a.nrows != system_dim || a.ncols != system_dim {
            return Err(Error::DimensionMismatch("coupling operator".into()));
        }
        let defect = a.hermiticity_defect();
        if defect > 1e-12 * a.frobenius_norm().max(1.0) {
            return Err(Error::Contract(format!(
                "coupling operator not Hermitian (defect {defect:.3e})"
            )));
        }
    }
    for b in baths {
        if b.coupling >= couplings.len() {
            return Err(Error::Contract("bath coupling index out of range".into()));
        }
        if !b.dims.is_empty() && b.dims.len() != b.bath.n_modes() {
            return Err(Error::Contract("dims override must match the bath mode count".into()));
        }
    }
    for t in thermal {
        if t.coupling >= couplings.len() {
            return Err(Error::Contract("thermal coupling index out of range".into()));
        }
    }

    let mut dims = vec![system_dim];
    for b in baths {
        dims.extend(if b.dims.is_empty() { b.bath.local_dims.clone() } else { b.dims.clone() });
    }
    for t in thermal {
        dims.push(t.mode.local_dim);
    }
    let layout = Layout { dims, system_factors: 1 };

    let env_dims = &layout.dims[1..];
    let env_total: usize = env_dims.iter().product();
    let env_ops = build_oscillator_ops(env_dims)?;
    let sys_id = SparseMatrix::identity(system_dim);
    let b_full: Vec<SparseMatrix> = env_ops.iter().map(|b| sys_id.kron(b)).collect();

    let mut h = system_h.kron(&SparseMatrix::identity(env_total));
    let mut jumps: Vec<(f64, SparseMatrix)> = Vec::new();
    let mut mode_offset = 0usize;

    for att in baths {
        let bath = att.bath;
        let n = bath.n_modes();
        for m in 0..n {
            let b = &b_full[mode_offset + m];
            let bd = b.adjoint();
            h = h.add(&bd.matmul(b)?.scale(Complex64::new(bath.frequencies[m], 0.0)))?;
            jumps.push((bath.rates[m], b.clone()));
        }
        for m in 0..n - 1 {
            let b1 = &b_full[mode_offset + m];
            let b2 = &b_full[mode_offset + m + 1];
            let hop = b1.matmul(&b2.adjoint())?;
            let g = Complex64::new(bath.couplings[m], 0.0);
            h = h.add(&hop.scale(g))?;
            h = h.add(&hop.adjoint().scale(g))?;
        }
        let mut f = SparseMatrix::zeros(h.nrows, h.ncols);
        for m in 0..n {
            let b = &b_full[mode_offset + m];
            f = f.add(&b.scale(bath.coeffs[m]))?;
            f = f.add(&b.adjoint().scale(bath.coeffs[m].conj()))?;
        }
        let a_full = couplings[att.coupling].kron(&SparseMatrix::identity(env_total));
        h = h.add(&a_full.matmul(&f)?)?;
        mode_offset += n;
    }

    for att in thermal {
        let b = &b_full[mode_offset];
        let bd = b.adjoint();
        h = h.add(&bd.matmul(b)?.scale(Complex64::new(att.mode.omega, 0.0)))?;
        let f = b
            .scale(Complex64::new(att.mode.coeff, 0.0))
            .add(&bd.scale(Complex64::new(att.mode.coeff, 0.0)))?;
        let a_full = couplings[att.coupling].kron(&SparseMatrix::identity(env_total));
        h = h.add(&a_full.matmul(&f)?)?;
        let (up, down) = att.mode.rates();
        jumps.push((down, b.clone()));
        if up > 0.0 {
            jumps.push((up, bd));
        }
        mode_offset += 1;
    }

    LindbladModel::new(layout, h, jumps, unit)
}

/// Explicit sparse superoperator on the column-stacked state:
/// L = −i(I⊗H − Hᵀ⊗I) + Σγ (L̄⊗L − ½ I⊗L†L − ½ (L†L)ᵀ⊗I).
pub fn liouvillian(model: &LindbladModel, nnz_cap: usize) -> Result<SparseMatrix> {
    let d = model.dim();
    let h = &model.hamiltonian;
    let mut estimate = 2 * d * h.nnz();
    for (_, l) in &model.jumps {
        estimate += l.nnz() * l.nnz() + 2 * d * l.nnz();
    }
    if estimate > nnz_cap {
        return Err(Error::MemoryCap(format!(
            "liouvillian would hold ≈{estimate} nonzeros (cap {nnz_cap}); \
             use the matrix-form integrator or trajectories instead"
        )));
    }
    let id = SparseMatrix::identity(d);
    let mut sup = id
        .kron(h)
        .scale(Complex64::new(0.0, -1.0))
        .add(&h.transpose().kron(&id).scale(Complex64::new(0.0, 1.0)))?;
    for (rate, l) in &model.jumps {
        let g = Complex64::new(*rate, 0.0);
        let ldl = l.adjoint().matmul(l)?;
        sup = sup.add(&l.conj().kron(l).scale(g))?;
        sup = sup.add(&id.kron(&ldl).scale(-0.5 * g))?;
        sup = sup.add(&ldl.transpose().kron(&id).scale(-0.5 * g))?;
    }
    Ok(sup)
}

/// Integrates the master equation, emitting reduced system states and
/// observable expectations at the grid times. Works identically for
/// pseudo-states (no Hermiticity projection anywhere).
pub fn evolve_master(
    model: &LindbladModel,
    rho0: &StateMatrix,
    grid: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    let d = model.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "state is {}×{}, model dimension {d}",
            rho0.dim(),
            rho0.dim()
        )));
    }
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 {
        return Err(Error::Contract("grid must be strictly increasing from t ≥ 0".into()));
    }
    let hermitian = rho0.kind == StateKind::HermitianDensity;

    let mut y: Vec<Complex64> = rho0.data.iter().copied().collect();
    let mut scratch = Scratch::new();
    let solver = DormandPrince::new(tol, tol * 1e-2);

    let mut reduced: Vec<Array2<Complex64>> = Vec::with_capacity(grid.len());
    let mut obs: Vec<(String, Vec<Complex64>)> = model
        .observables
        .iter()
        .map(|(n, _)| (n.clone(), Vec::with_capacity(grid.len())))
        .collect();
    let mut trace_drift = 0.0f64;
    let mut herm_drift = 0.0f64;

    let t_end = *grid.last().unwrap();
    let stats = solver.integrate(
        |_t, y, dy| model.apply_generator(y, dy, &mut scratch),
        &mut y,
        0.0,
        t_end,
        grid,
        |_t, y| {
            reduced.push(reduce_to_system(y, &model.layout));
            for ((_, op), (_, series)) in model.observables.iter().zip(obs.iter_mut()) {
                series.push(op.trace_product(y, d));
            }
            if hermitian {
                let mut tr = Complex64::default();
                for i in 0..d {
                    tr += y[i * d + i];
                }
                trace_drift = trace_drift.max((tr.re - 1.0).abs().max(tr.im.abs()));
                let mut defect = 0.0f64;
                let mut scale = 0.0f64;
                for i in 0..d {
                    for j in (i + 1)..d {
                        defect = defect.max((y[i * d + j] - y[j * d + i].conj()).norm());
                        scale = scale.max(y[i * d + j].norm());
                    }
                }
                herm_drift = herm_drift.max(defect / scale.max(1.0));
            }
        },
    )?;

    Ok(Trajectory {
        times: grid.to_vec(),
        reduced,
        observables: obs,
        diagnostics: RunDiagnostics {
            steps: stats.steps,
            rhs_evals: stats.rhs_evals,
            trace_drift,
            hermiticity_drift: herm_drift,
            tolerance: tol,
            stationarity_warning: false,
        },
    })
}

/// Two-time correlation C(t) = Tr[F e^{Lt}[F ρ₀]] via the regression
/// structure: F ρ₀ is evolved as a pseudo-state and F is read out.
///
/// A non-stationary ρ₀ sets a warning flag in the diagnostics.
pub fn two_time_correlation(
    model: &LindbladModel,
    f_op: &SparseMatrix,
    rho0: &StateMatrix,
    grid: &[f64],
    tol: f64,
) -> Result<(Vec<Complex64>, RunDiagnostics)> {
    let d = model.dim();
    let rho_flat: Vec<Complex64> = rho0.data.iter().copied().collect();
    let mut scratch = Scratch::new();
    let mut lrho = vec![Complex64::default(); d * d];
    model.apply_generator(&rho_flat, &mut lrho, &mut scratch);
    let res: f64 = lrho.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let scale: f64 = rho_flat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let warned = res > 1e-8 * scale;

    let mut x0 = vec![Complex64::default(); d * d];
    f_op.left_mul_dense(&rho_flat, d, &mut x0);
    let pseudo = StateMatrix::pseudo(
        Array2::from_shape_vec((d, d), x0).expect("square shape"),
    );

    let mut probe = model.clone();
    probe.observables = vec![("two_time_f".into(), f_op.clone())];
    let mut traj = evolve_master(&probe, &pseudo, grid, tol)?;
    let values = traj.observables.remove(0).1;
    let mut diags = traj.diagnostics;
    diags.stationarity_warning = warned;
    Ok((values, diags))
}

/// Partial trace onto the system factor (flat row-major input).
pub fn reduce_to_system(rho_flat: &[Complex64], layout: &Layout) -> Array2<Complex64> {
    let d = layout.total_dim();
    let sys = layout.system_dim();
    let env = d / sys;
    let mut out = Array2::<Complex64>::zeros((sys, sys));
    for i in 0..sys {
        for j in 0..sys {
            let mut acc = Complex64::default();
            for e in 0..env {
                acc += rho_flat[(i * env + e) * d + (j * env + e)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Partial trace keeping an arbitrary subset of factors.
pub fn reduced_state(full: &StateMatrix, layout: &Layout, keep: &[usize]) -> Result<StateMatrix> {
    let n_f = layout.dims.len();
    if keep.is_empty() || keep.iter().any(|k| *k >= n_f) {
        return Err(Error::Contract("keep set must name existing factors".into()));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    let d = layout.total_dim();
    if full.dim() != d {
        return Err(Error::DimensionMismatch("state vs layout".into()));
    }
    let kept_dim: usize = keep_sorted.iter().map(|&k| layout.dims[k]).product();

    let mut strides = vec![1usize; n_f];
    for k in (0..n_f - 1).rev() {
        strides[k] = strides[k + 1] * layout.dims[k + 1];
    }
    let kept_index = |full_idx: usize| -> (usize, usize) {
        let mut kept = 0usize;
        let mut traced = 0usize;
        for f in 0..n_f {
            let x = (full_idx / strides[f]) % layout.dims[f];
            if keep_sorted.binary_search(&f).is_ok() {
                kept = kept * layout.dims[f] + x;
            } else {
                traced = traced * layout.dims[f] + x;
            }
        }
        (kept, traced)
    };

    let mut out = Array2::<Complex64>::zeros((kept_dim, kept_dim));
    for i in 0..d {
        let (ki, ti) = kept_index(i);
        for j in 0..d {
            let (kj, tj) = kept_index(j);
            if ti == tj {
                out[(ki, kj)] += full.data[(i, j)];
            }
        }
    }
    Ok(StateMatrix { data: out, kind: full.kind.clone() })
}

/// Vacuum (all factors in their ground state) density matrix.
pub fn vacuum_density(dim: usize) -> StateMatrix {
    let mut rho = Array2::<Complex64>::zeros((dim, dim));
    rho[(0, 0)] = Complex64::new(1.0, 0.0);
    StateMatrix { data: rho, kind: StateKind::HermitianDensity }
}

impl LindbladModel {
    /// Builds a bath-only model (trivial one-dimensional system) for the
    /// regression-identity checks.
    pub fn bath_only(bath: &SurrogateBath, dims: Option<Vec<usize>>, unit: Unit) -> Result<Self> {
        let zero_h = SparseMatrix::zeros(1, 1);
        let att =
            BathAttachment { bath, coupling: 0, dims: dims.unwrap_or_default() };
        assemble_model(1, &zero_h, &[SparseMatrix::zeros(1, 1)], &[att], &[], unit)
    }

    /// The bath interaction operator F = Σ (c_n b_n + c_n* b_n†) on the full
    /// space, assuming the bath's modes are the first environment factors.
    pub fn bath_coupling_operator(&self, bath: &SurrogateBath) -> Result<SparseMatrix> {
        let env_dims = &self.layout.dims[self.layout.system_factors..];
        let env_ops = build_oscillator_ops(env_dims)?;
        let sys_id = SparseMatrix::identity(self.layout.system_dim());
        let total = self.dim();
        let mut f = SparseMatrix::zeros(total, total);
        for (m, c) in bath.coeffs.iter().enumerate() {
            let b = sys_id.kron(&env_ops[m]);
            f = f.add(&b.scale(*c))?;
            f = f.add(&b.adjoint().scale(c.conj()))?;
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Beta;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn damped_mode_model(dim: usize, omega: f64, gamma: f64) -> LindbladModel {
        let ops = build_oscillator_ops(&[dim]).unwrap();
        let b = &ops[0];
        let h = b.adjoint().matmul(b).unwrap().scale(c(omega, 0.0));
        LindbladModel::new(
            Layout { dims: vec![dim], system_factors: 1 },
            h,
            vec![(gamma, b.clone())],
            Unit::OmegaC,
        )
        .unwrap()
    }

    #[test]
    fn ladder_operator_structure() {
        let ops = build_oscillator_ops(&[2]).unwrap();
        let b: Vec<_> = ops[0].triplets().collect();
        assert_eq!(b, vec![(0, 1, c(1.0, 0.0))]);

        // [b, b†] = I − d |d−1⟩⟨d−1| on a d-level truncation
        let d = 5;
        let ops = build_oscillator_ops(&[d]).unwrap();
        let bb = &ops[0];
        let comm = bb
            .matmul(&bb.adjoint())
            .unwrap()
            .add(&bb.adjoint().matmul(bb).unwrap().scale(c(-1.0, 0.0)))
            .unwrap();
        for (r, col, v) in comm.triplets() {
            assert_eq!(r, col);
            let expect = if r == d - 1 { 1.0 - d as f64 } else { 1.0 };
            assert_relative_eq!(v.re, expect, epsilon = 1e-12);
        }

        // number operator spectrum {0..d−1}
        let n_op = bb.adjoint().matmul(bb).unwrap();
        for (r, col, v) in n_op.triplets() {
            assert_eq!(r, col);
            assert_relative_eq!(v.re, r as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn amplitude_damping_rhs() {
        // H = 0, single jump b on dim 2, ρ = |1⟩⟨1| → dρ/dt = γ(|0⟩⟨0| − |1⟩⟨1|)
        let gamma = 0.37;
        let ops = build_oscillator_ops(&[2]).unwrap();
        let model = LindbladModel::new(
            Layout { dims: vec![2], system_factors: 1 },
            SparseMatrix::zeros(2, 2),
            vec![(gamma, ops[0].clone())],
            Unit::OmegaC,
        )
        .unwrap();
        let rho = vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let mut out = vec![Complex64::default(); 4];
        model.apply_generator(&rho, &mut out, &mut Scratch::new());
        assert_relative_eq!(out[0].re, gamma, epsilon = 1e-14);
        assert_relative_eq!(out[3].re, -gamma, epsilon = 1e-14);
        assert!(out[1].norm() < 1e-14 && out[2].norm() < 1e-14);
    }

    #[test]
    fn liouvillian_preserves_trace_functional() {
        let model = damped_mode_model(3, 1.2, 0.4);
        let sup = liouvillian(&model, 10_000_000).unwrap();
        let d = model.dim();
        // vec(I)ᵀ L = 0 (column-stacked identity functional)
        let mut vec_id = vec![Complex64::default(); d * d];
        for i in 0..d {
            vec_id[i * d + i] = c(1.0, 0.0); // column-stacking: (i,i) ↦ i*d+i either way
        }
        let lt = sup.transpose();
        let mut out = vec![Complex64::default(); d * d];
        lt.matvec(&vec_id, &mut out);
        let norm: f64 = out.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(norm < 1e-12, "trace functional residual {norm}");
    }

    #[test]
    fn liouvillian_matches_matrix_form() {
        let model = damped_mode_model(4, 0.9, 0.6);
        let d = model.dim();
        let sup = liouvillian(&model, 10_000_000).unwrap();
        // random-ish state, both paths
        let mut rho = vec![Complex64::default(); d * d];
        for i in 0..d {
            for j in 0..d {
                rho[i * d + j] = c((i + 1) as f64 * 0.1, (j as f64) * 0.05 - 0.1);
            }
        }
        let mut direct = vec![Complex64::default(); d * d];
        model.apply_generator(&rho, &mut direct, &mut Scratch::new());
        // column-stacked vec: vec(ρ)[j*d + i] = ρ[i,j]
        let mut v = vec![Complex64::default(); d * d];
        for i in 0..d {
            for j in 0..d {
                v[j * d + i] = rho[i * d + j];
            }
        }
        let mut lv = vec![Complex64::default(); d * d];
        sup.matvec(&v, &mut lv);
        for i in 0..d {
            for j in 0..d {
                assert!(
                    (lv[j * d + i] - direct[i * d + j]).norm() < 1e-11,
                    "mismatch at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn damped_chain_vacuum_is_steady() {
        let bath = crate::fixtures::ohmic_t1();
        let model =
            LindbladModel::bath_only(&bath, Some(vec![2, 2, 2, 2]), Unit::OmegaC).unwrap();
        let d = model.dim();
        let rho = vacuum_density(d);
        let flat: Vec<Complex64> = rho.data.iter().copied().collect();
        let mut out = vec![Complex64::default(); d * d];
        model.apply_generator(&flat, &mut out, &mut Scratch::new());
        let norm: f64 = out.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(norm < 1e-12, "vacuum not steady: {norm}");
    }

    #[test]
    fn closed_qubit_precession() {
        // H = (ω₀/2)σ_z, ρ₀ = |+⟩⟨+| → ρ₀₁(t) = ½ e^{−iω₀ t}...
        // basis |0⟩, |1⟩ with σ_z = diag(1, −1): ρ₀₁(t) = ½ e^{−iω₀ t}
        let omega0 = 1.7;
        let h = SparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, c(0.5 * omega0, 0.0)), (1, 1, c(-0.5 * omega0, 0.0))],
        );
        let model = LindbladModel::new(
            Layout { dims: vec![2], system_factors: 1 },
            h,
            vec![],
            Unit::OmegaC,
        )
        .unwrap();
        let psi = [c(std::f64::consts::FRAC_1_SQRT_2, 0.0), c(std::f64::consts::FRAC_1_SQRT_2, 0.0)];
        let rho0 = StateMatrix::pure(&psi).unwrap();
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let traj = evolve_master(&model, &rho0, &grid, 1e-10).unwrap();
        for (k, t) in grid.iter().enumerate() {
            let coh = traj.reduced[k][(0, 1)];
            let expect = 0.5 * (c(0.0, -omega0 * t)).exp();
            assert!((coh - expect).norm() < 1e-8, "t={t}: {coh} vs {expect}");
        }
        assert!(traj.diagnostics.trace_drift < 1e-9);
    }

    #[test]
    fn damped_mode_stays_vacuum() {
        let model = damped_mode_model(4, 1.0, 0.8);
        let rho0 = vacuum_density(4);
        let grid = vec![0.5, 1.0, 2.0];
        let traj = evolve_master(&model, &rho0, &grid, 1e-10).unwrap();
        for r in &traj.reduced {
            assert_relative_eq!(r[(0, 0)].re, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_time_single_mode_closed_form() {
        // F = c(b + b†) on a zero-T damped mode: C(t) = c² e^{−Γt/2 − iΩt}
        let (om, ga, cc) = (1.3, 0.5, 0.8);
        let model = damped_mode_model(6, om, ga);
        let ops = build_oscillator_ops(&[6]).unwrap();
        let f = ops[0]
            .scale(c(cc, 0.0))
            .add(&ops[0].adjoint().scale(c(cc, 0.0)))
            .unwrap();
        let rho0 = vacuum_density(6);
        let grid: Vec<f64> = (0..=30).map(|k| k as f64 * 0.15).collect();
        let (vals, diags) = two_time_correlation(&model, &f, &rho0, &grid, 1e-10).unwrap();
        assert!(!diags.stationarity_warning);
        for (k, t) in grid.iter().enumerate() {
            let expect = cc * cc * (-0.5 * ga * t).exp() * (c(0.0, -om * t)).exp();
            assert!(
                (vals[k] - expect).norm() < 1e-8,
                "t={t}: {} vs {expect}",
                vals[k]
            );
        }
    }

    #[test]
    fn two_time_thermal_mode_matches_closed_form() {
        // thermal single mode: C(t) = c²((n+1)e^{−Γ|t|/2−iΩt} + n e^{−Γ|t|/2+iΩt})
        let beta = Beta::Finite(1.0);
        let mode = ThermalMode::new(1.0, 0.4, beta, 0.7).unwrap();
        let dim = 30usize;
        let ops = build_oscillator_ops(&[dim]).unwrap();
        let b = &ops[0];
        let h = b.adjoint().matmul(b).unwrap().scale(c(mode.omega, 0.0));
        let (up, down) = mode.rates();
        let model = LindbladModel::new(
            Layout { dims: vec![dim], system_factors: 1 },
            h,
            vec![(down, b.clone()), (up, b.adjoint())],
            Unit::OmegaC,
        )
        .unwrap();
        // Gibbs initial state (truncated, renormalized): exactly stationary
        let n_occ = mode.occupation();
        let x = n_occ / (n_occ + 1.0);
        let mut rho = Array2::<Complex64>::zeros((dim, dim));
        let mut norm = 0.0;
        for k in 0..dim {
            let p = x.powi(k as i32);
            rho[(k, k)] = c(p, 0.0);
            norm += p;
        }
        for k in 0..dim {
            rho[(k, k)] /= c(norm, 0.0);
        }
        let rho0 = StateMatrix::density(rho).unwrap();
        let f = b.scale(c(mode.coeff, 0.0)).add(&b.adjoint().scale(c(mode.coeff, 0.0))).unwrap();
        let grid: Vec<f64> = (0..=25).map(|k| k as f64 * 0.2).collect();
        let (vals, diags) = two_time_correlation(&model, &f, &rho0, &grid, 1e-10).unwrap();
        assert!(!diags.stationarity_warning, "Gibbs state should be stationary");
        for (k, t) in grid.iter().enumerate() {
            let expect = mode.correlation(*t);
            assert!(
                (vals[k] - expect).norm() < 1e-6 * expect.norm().max(0.1),
                "t={t}: {} vs {expect}",
                vals[k]
            );
        }
    }

    #[test]
    fn partial_trace_properties() {
        // product state → marginal factor exactly
        let layout = Layout { dims: vec![2, 3], system_factors: 1 };
        let pa = [0.3, 0.7];
        let pb = [0.5, 0.25, 0.25];
        let mut rho = Array2::<Complex64>::zeros((6, 6));
        for i in 0..2 {
            for j in 0..3 {
                rho[(i * 3 + j, i * 3 + j)] = c(pa[i] * pb[j], 0.0);
            }
        }
        let full = StateMatrix::density(rho).unwrap();
        let ra = reduced_state(&full, &layout, &[0]).unwrap();
        for i in 0..2 {
            assert_relative_eq!(ra.data[(i, i)].re, pa[i], epsilon = 1e-14);
        }
        assert_relative_eq!(ra.trace().re, full.trace().re, epsilon = 1e-14);

        // maximally entangled pair → maximally mixed marginal
        let layout2 = Layout { dims: vec![2, 2], system_factors: 1 };
        let psi = [
            c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        ];
        let bell = StateMatrix::pure(&psi).unwrap();
        let rb = reduced_state(&bell, &layout2, &[1]).unwrap();
        for i in 0..2 {
            assert_relative_eq!(rb.data[(i, i)].re, 0.5, epsilon = 1e-14);
        }
        assert!(rb.data[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn spin_boson_structure_check() {
        // one bath, N = 1, qubit with A = σ_z/2: dims 2·d₁, one jump
        let bath = SurrogateBath::new(
            vec![1.0],
            vec![],
            vec![0.5],
            vec![c(0.6, 0.0)],
            vec![4],
            Unit::OmegaC,
        )
        .unwrap();
        let sz = SparseMatrix::from_triplets(2, 2, vec![(0, 0, c(1.0, 0.0)), (1, 1, c(-1.0, 0.0))]);
        let h_s = sz.scale(c(0.85, 0.0)); // (ω₀/2)σ_z with ω₀ = 1.7
        let a = sz.scale(c(0.5, 0.0));
        let model = assemble_model(
            2,
            &h_s,
            &[a],
            &[BathAttachment { bath: &bath, coupling: 0, dims: vec![] }],
            &[],
            Unit::OmegaC,
        )
        .unwrap();
        assert_eq!(model.dim(), 8);
        assert_eq!(model.jumps.len(), 1);
        assert_eq!(model.layout.dims, vec![2, 4]);
    }

    #[test]
    fn memory_cap_refusal() {
        let model = damped_mode_model(8, 1.0, 0.3);
        match liouvillian(&model, 10) {
            Err(Error::MemoryCap(_)) => {}
            other => panic!("expected memory-cap refusal, got {other:?}"),
        }
    }
}
