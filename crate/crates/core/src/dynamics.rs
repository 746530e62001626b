//! Lindblad master-equation integration with a time-dependent gate detuning.
//!
//! `ρ̇ = −i[H(t), ρ] + CρC† − ½{C†C, ρ}` with `C = √κ_qW a_W†a_q`.
//! Only the ε_q diagonal of H moves with Δ_q(t), so the integrator keeps the
//! static part as a sparse list and adds `Δ_q(t)·P_q` on the fly, where `P_q`
//! projects on the excited gate atom.
//!
//! The right-hand side is assembled as `M + M†` with `M = −iH_eff ρ + ½CρC†`
//! and `H_eff = H − (i/2)C†C`, so every RK stage is Hermitian bit for bit.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::hilbert::{BareLabel, BasisIndex, ComplexOperator};
use crate::linalg::{hermitian_eigenvalues, hermiticity_error};
use crate::model::{build_collapse_operator, build_hamiltonian, Detunings, SystemParams};

/// Largest allowed `dt · max frequency`.
pub const STEP_BOUND: f64 = 0.05;
/// Target number of stored samples when no stride is given.
pub const DEFAULT_SAMPLES: usize = 2000;

const STATE_HERMITICITY_TOL: f64 = 1e-10;
const STATE_TRACE_TOL: f64 = 1e-9;
const STATE_NEGATIVITY_TOL: f64 = -1e-8;
const QUALITY_TRACE_TOL: f64 = 1e-6;
const QUALITY_NEGATIVITY_TOL: f64 = -1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid sweep schedule: {0}")]
    InvalidSchedule(String),
    #[error("time step {dt} exceeds the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },
    #[error("sample stride must be at least 1")]
    ZeroStride,
    #[error("integration quality lost at t = {time}: trace error {trace_error:e}, min eigenvalue {min_eigenvalue:e}")]
    Quality { time: f64, trace_error: f64, min_eigenvalue: f64 },
    #[error("label {0} is not in the basis")]
    UnknownLabel(BareLabel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
    basis: Arc<BasisIndex>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(basis: Arc<BasisIndex>, matrix: DMatrix<Complex64>) -> Result<Self, DynamicsError> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(DynamicsError::DimensionMismatch { expected: basis.dim(), actual: matrix.nrows() });
        }
        let rho = DensityMatrix { matrix, basis };
        let herm = rho.hermiticity_error();
        if herm > STATE_HERMITICITY_TOL {
            return Err(DynamicsError::InvalidState(format!("not Hermitian ({herm:e})")));
        }
        let trace_err = rho.trace_error();
        if !(trace_err <= STATE_TRACE_TOL) {
            return Err(DynamicsError::InvalidState(format!("trace off by {trace_err:e}")));
        }
        let min = rho.min_eigenvalue();
        if !(min > STATE_NEGATIVITY_TOL) {
            return Err(DynamicsError::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(rho)
    }

    /// `|ψ⟩⟨ψ|` for a normalised amplitude vector.
    pub fn pure(basis: Arc<BasisIndex>, amplitudes: &[(BareLabel, Complex64)]) -> Result<Self, DynamicsError> {
        let mut psi = vec![Complex64::new(0.0, 0.0); basis.dim()];
        for (label, amp) in amplitudes {
            let i = basis.index_of(label).ok_or(DynamicsError::UnknownLabel(*label))?;
            psi[i] += amp;
        }
        let n = psi.len();
        let matrix = DMatrix::from_fn(n, n, |r, c| psi[r] * psi[c].conj());
        DensityMatrix::new(basis, matrix)
    }

    pub fn basis_state(basis: Arc<BasisIndex>, label: BareLabel) -> Result<Self, DynamicsError> {
        DensityMatrix::pure(basis, &[(label, Complex64::new(1.0, 0.0))])
    }

    pub fn maximally_mixed(basis: Arc<BasisIndex>) -> Self {
        let n = basis.dim();
        let matrix = DMatrix::from_diagonal_element(n, n, Complex64::new(1.0 / n as f64, 0.0));
        DensityMatrix { matrix, basis }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn basis(&self) -> &Arc<BasisIndex> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace_error(&self) -> f64 {
        (self.matrix.trace() - Complex64::new(1.0, 0.0)).norm()
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix).and_then(|v| v.first().copied()).unwrap_or(f64::NAN)
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn population(&self, label: &BareLabel) -> Result<f64, DynamicsError> {
        let i = self.basis.index_of(label).ok_or(DynamicsError::UnknownLabel(*label))?;
        Ok(self.matrix[(i, i)].re)
    }

    /// `⟨N̂⟩`, the expected total number of quanta.
    pub fn mean_quanta(&self) -> f64 {
        mean_quanta(&self.basis, &self.populations())
    }
}

fn mean_quanta(basis: &BasisIndex, populations: &[f64]) -> f64 {
    basis.labels().iter().zip(populations).map(|(l, p)| f64::from(l.total_quanta()) * p).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Constant,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub duration: f64,
    pub delta_q_start: f64,
    pub delta_q_end: f64,
    pub profile: Profile,
}

impl Segment {
    pub fn hold(duration: f64, delta_q: f64) -> Self {
        Segment { duration, delta_q_start: delta_q, delta_q_end: delta_q, profile: Profile::Constant }
    }

    pub fn ramp(duration: f64, from: f64, to: f64) -> Self {
        Segment { duration, delta_q_start: from, delta_q_end: to, profile: Profile::Linear }
    }

    fn at(&self, tau: f64) -> f64 {
        match self.profile {
            Profile::Constant => self.delta_q_start,
            Profile::Linear => {
                let s = (tau / self.duration).clamp(0.0, 1.0);
                self.delta_q_start + (self.delta_q_end - self.delta_q_start) * s
            }
        }
    }
}

/// Piecewise Δ_q(t) with a constant Δ_c.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSchedule {
    delta_c: f64,
    segments: Vec<Segment>,
}

impl SweepSchedule {
    pub fn new(delta_c: f64, segments: Vec<Segment>) -> Result<Self, DynamicsError> {
        if segments.is_empty() {
            return Err(DynamicsError::InvalidSchedule("no segments".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.duration > 0.0) || !s.duration.is_finite() {
                return Err(DynamicsError::InvalidSchedule(format!("segment {i} has duration {}", s.duration)));
            }
            if !s.delta_q_start.is_finite() || !s.delta_q_end.is_finite() {
                return Err(DynamicsError::InvalidSchedule(format!("segment {i} has a non-finite detuning")));
            }
            if s.profile == Profile::Constant && s.delta_q_start != s.delta_q_end {
                return Err(DynamicsError::InvalidSchedule(format!("constant segment {i} changes detuning")));
            }
        }
        for (i, w) in segments.windows(2).enumerate() {
            let jump = (w[1].delta_q_start - w[0].delta_q_end).abs();
            let scale = w[0].delta_q_end.abs().max(w[1].delta_q_start.abs()).max(1.0);
            if jump > 1e-12 * scale {
                return Err(DynamicsError::InvalidSchedule(format!(
                    "detuning jumps by {jump} between segments {i} and {}",
                    i + 1
                )));
            }
        }
        Ok(SweepSchedule { delta_c, segments })
    }

    /// Fixed Δ_q for `duration`.
    pub fn constant(delta_c: f64, delta_q: f64, duration: f64) -> Result<Self, DynamicsError> {
        SweepSchedule::new(delta_c, vec![Segment::hold(duration, delta_q)])
    }

    pub fn delta_c(&self) -> f64 {
        self.delta_c
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn delta_q_at(&self, t: f64) -> f64 {
        let mut start = 0.0;
        for s in &self.segments {
            if t < start + s.duration {
                return s.at(t - start);
            }
            start += s.duration;
        }
        self.segments.last().map_or(0.0, |s| s.delta_q_end)
    }

    /// Smallest and largest Δ_q reached.
    pub fn delta_q_range(&self) -> (f64, f64) {
        self.segments.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.delta_q_start).min(s.delta_q_end), hi.max(s.delta_q_start).max(s.delta_q_end))
        })
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub basis: Arc<BasisIndex>,
    pub times: Vec<f64>,
    pub delta_q: Vec<f64>,
    /// Diagonal of ρ per sample, ordered like the basis.
    pub populations: Vec<Vec<f64>>,
    /// Diagonal of ρ̇ per sample (exact right-hand side, not a finite difference).
    pub population_rates: Vec<Vec<f64>>,
    pub trace_error: Vec<f64>,
    pub herm_error: Vec<f64>,
    pub min_eigenvalue: Vec<f64>,
    pub mean_quanta: Vec<f64>,
    pub final_state: DensityMatrix,
    pub dt: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Population series of one bare label.
pub fn population(traj: &Trajectory, label: &BareLabel) -> Result<Vec<f64>, DynamicsError> {
    let i = traj.basis.index_of(label).ok_or(DynamicsError::UnknownLabel(*label))?;
    Ok(traj.populations.iter().map(|p| p[i]).collect())
}

/// Rate series `dρ_ll/dt` of one bare label.
pub fn population_rate(traj: &Trajectory, label: &BareLabel) -> Result<Vec<f64>, DynamicsError> {
    let i = traj.basis.index_of(label).ok_or(DynamicsError::UnknownLabel(*label))?;
    Ok(traj.population_rates.iter().map(|p| p[i]).collect())
}

/// `−i[H,ρ] + CρC† − ½{C†C,ρ}` on dense matrices.
pub fn lindblad_rhs(
    rho: &DensityMatrix,
    h: &ComplexOperator,
    c: &ComplexOperator,
) -> Result<DMatrix<Complex64>, DynamicsError> {
    let n = rho.dim();
    for op in [h, c] {
        if op.dim() != n {
            return Err(DynamicsError::DimensionMismatch { expected: n, actual: op.dim() });
        }
    }
    let generator = Generator::new(h.matrix(), c.matrix(), &[]);
    let flat = to_row_major(rho.matrix());
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); n * n];
    generator.apply(&flat, 0.0, &mut out, &mut scratch);
    Ok(from_row_major(n, &out))
}

/// Sparse form of the generator: `H_eff = H − (i/2)C†C` plus a diagonal
/// term `Δ_q · P` on the listed indices, and the jump operator C.
struct Generator {
    n: usize,
    heff: Vec<(usize, usize, Complex64)>,
    jump: Vec<(usize, usize, Complex64)>,
    moving: Vec<usize>,
}

fn triplets(m: &DMatrix<Complex64>) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            if v != Complex64::new(0.0, 0.0) {
                out.push((r, c, v));
            }
        }
    }
    out
}

impl Generator {
    fn new(h: &DMatrix<Complex64>, c: &DMatrix<Complex64>, moving: &[usize]) -> Self {
        let ctc = c.adjoint() * c;
        let heff = h - ctc * Complex64::new(0.0, 0.5);
        Generator { n: h.nrows(), heff: triplets(&heff), jump: triplets(c), moving: moving.to_vec() }
    }

    /// `out = M + M†` with `M = −i(H_eff + Δ_q P)ρ + ½CρC†`; all matrices row-major.
    fn apply(&self, rho: &[Complex64], delta_q: f64, out: &mut [Complex64], scratch: &mut [Complex64]) {
        let n = self.n;
        let zero = Complex64::new(0.0, 0.0);
        let minus_i = Complex64::new(0.0, -1.0);
        out.fill(zero);
        for &(r, c, v) in &self.heff {
            let f = minus_i * v;
            let (dst, src) = (r * n, c * n);
            for k in 0..n {
                out[dst + k] += f * rho[src + k];
            }
        }
        if delta_q != 0.0 {
            let f = minus_i * delta_q;
            for &r in &self.moving {
                for k in 0..n {
                    out[r * n + k] += f * rho[r * n + k];
                }
            }
        }
        if !self.jump.is_empty() {
            // scratch = Cρ, then out += ½ (Cρ) C†
            scratch.fill(zero);
            for &(r, c, v) in &self.jump {
                for k in 0..n {
                    scratch[r * n + k] += v * rho[c * n + k];
                }
            }
            for &(r2, c2, v) in &self.jump {
                let f = v.conj() * 0.5;
                for r1 in 0..n {
                    out[r1 * n + r2] += scratch[r1 * n + c2] * f;
                }
            }
        }
        for r in 0..n {
            out[r * n + r] = Complex64::new(2.0 * out[r * n + r].re, 0.0);
            for c in (r + 1)..n {
                let s = out[r * n + c] + out[c * n + r].conj();
                out[r * n + c] = s;
                out[c * n + r] = s.conj();
            }
        }
    }
}

fn to_row_major(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            v.push(m[(r, c)]);
        }
    }
    v
}

fn from_row_major(n: usize, v: &[Complex64]) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |r, c| v[r * n + c])
}

/// Largest frequency in the problem: photon and atomic frequencies over the
/// whole schedule, couplings and the outcoupling rate.
pub fn max_frequency(params: &SystemParams, schedule: &SweepSchedule) -> f64 {
    let (lo, hi) = schedule.delta_q_range();
    let det = Detunings::new(schedule.delta_c(), 0.0);
    [
        params.omega_c,
        params.omega_q,
        det.epsilon_c(params),
        params.omega_q + lo,
        params.omega_q + hi,
        params.rabi_c,
        params.rabi_q,
        params.kappa_cq,
        params.kappa_qw,
    ]
    .iter()
    .fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Largest step accepted by [`evolve`].
pub fn max_stable_dt(params: &SystemParams, schedule: &SweepSchedule) -> f64 {
    STEP_BOUND / max_frequency(params, schedule)
}

/// Stride that leaves about `samples` stored points for `steps` steps.
pub fn stride_for(steps: usize, samples: usize) -> usize {
    (steps / samples.max(1)).max(1)
}

/// Number of fixed steps covering `duration` with step at most `dt`.
pub fn step_count(duration: f64, dt: f64) -> usize {
    // tolerate dt values that divide the duration up to rounding
    ((duration / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Fixed-step RK4 integration over the whole schedule.
///
/// The step is shrunk to `T / ceil(T / dt)` so the last step lands on the
/// schedule's end. Samples are stored every `sample_stride` steps and at the
/// final time.
pub fn evolve(
    rho0: &DensityMatrix,
    params: &SystemParams,
    schedule: &SweepSchedule,
    dt: f64,
    sample_stride: usize,
) -> Result<Trajectory, DynamicsError> {
    if sample_stride == 0 {
        return Err(DynamicsError::ZeroStride);
    }
    let bound = max_stable_dt(params, schedule);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(DynamicsError::StepTooLarge { dt, bound });
    }
    let basis = rho0.basis().clone();
    let n = basis.dim();
    let total = schedule.total_duration();
    let steps = step_count(total, dt);
    let h = total / steps as f64;

    let h0 = build_hamiltonian(params, &Detunings::new(schedule.delta_c(), 0.0), &basis);
    let c = build_collapse_operator(params, &basis);
    let moving: Vec<usize> =
        basis.labels().iter().enumerate().filter(|(_, l)| l.atom_q.is_excited()).map(|(i, _)| i).collect();
    let generator = Generator::new(h0.matrix(), c.matrix(), &moving);

    let zero = Complex64::new(0.0, 0.0);
    let mut rho = to_row_major(rho0.matrix());
    let mut k1 = vec![zero; n * n];
    let mut k2 = vec![zero; n * n];
    let mut k3 = vec![zero; n * n];
    let mut k4 = vec![zero; n * n];
    let mut stage = vec![zero; n * n];
    let mut scratch = vec![zero; n * n];

    let expected_samples = steps / sample_stride + 2;
    let mut traj = Trajectory {
        basis: basis.clone(),
        times: Vec::with_capacity(expected_samples),
        delta_q: Vec::with_capacity(expected_samples),
        populations: Vec::with_capacity(expected_samples),
        population_rates: Vec::with_capacity(expected_samples),
        trace_error: Vec::with_capacity(expected_samples),
        herm_error: Vec::with_capacity(expected_samples),
        min_eigenvalue: Vec::with_capacity(expected_samples),
        mean_quanta: Vec::with_capacity(expected_samples),
        final_state: rho0.clone(),
        dt: h,
        steps,
    };

    let record = |traj: &mut Trajectory, rho: &[Complex64], t: f64, scratch: &mut [Complex64], rate: &mut [Complex64]| {
        let dq = schedule.delta_q_at(t);
        generator.apply(rho, dq, rate, scratch);
        let m = from_row_major(n, rho);
        let pops: Vec<f64> = (0..n).map(|i| rho[i * n + i].re).collect();
        let trace_error = (m.trace() - Complex64::new(1.0, 0.0)).norm();
        let min_eigenvalue = hermitian_eigenvalues(&m).and_then(|v| v.first().copied()).unwrap_or(f64::NAN);
        traj.times.push(t);
        traj.delta_q.push(dq);
        traj.mean_quanta.push(mean_quanta(&basis, &pops));
        traj.populations.push(pops);
        traj.population_rates.push((0..n).map(|i| rate[i * n + i].re).collect());
        traj.trace_error.push(trace_error);
        traj.herm_error.push(hermiticity_error(&m));
        traj.min_eigenvalue.push(min_eigenvalue);
        if !(trace_error <= QUALITY_TRACE_TOL) || !(min_eigenvalue >= QUALITY_NEGATIVITY_TOL) {
            return Err(DynamicsError::Quality { time: t, trace_error, min_eigenvalue });
        }
        Ok(())
    };

    record(&mut traj, &rho, 0.0, &mut scratch, &mut k1)?;
    for step in 0..steps {
        let t = step as f64 * h;
        let d0 = schedule.delta_q_at(t);
        let dm = schedule.delta_q_at(t + 0.5 * h);
        let d1 = schedule.delta_q_at(t + h);

        generator.apply(&rho, d0, &mut k1, &mut scratch);
        for i in 0..n * n {
            stage[i] = rho[i] + k1[i] * (0.5 * h);
        }
        generator.apply(&stage, dm, &mut k2, &mut scratch);
        for i in 0..n * n {
            stage[i] = rho[i] + k2[i] * (0.5 * h);
        }
        generator.apply(&stage, dm, &mut k3, &mut scratch);
        for i in 0..n * n {
            stage[i] = rho[i] + k3[i] * h;
        }
        generator.apply(&stage, d1, &mut k4, &mut scratch);
        let w = h / 6.0;
        for i in 0..n * n {
            rho[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
        }

        let done = step + 1;
        if done % sample_stride == 0 || done == steps {
            // reuse k1 as the rate buffer; it is rebuilt at the next step
            record(&mut traj, &rho, done as f64 * h, &mut scratch, &mut k1)?;
        }
    }
    traj.final_state = DensityMatrix { matrix: from_row_major(n, &rho), basis };
    Ok(traj)
}
