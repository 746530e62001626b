//! Closed-form single-excitation physics: dressed states and energies, the
//! gate-induced effective coupling, quiescent survival and the device-scale
//! estimates. These serve as analytic oracles for the numerics.
//!
//! All energies are relative to the cavity photon frequency ω_c. Detunings
//! follow `Δ = ε − ω` (see [`crate::model`]), for which the single-cavity
//! block in the ordered basis `(|g 1⟩, |e 0⟩)` reads `[[0, Ω], [Ω, Δ]]`, with
//! eigenvalues `Δ/2 ± χ`, `χ = √((Δ/2)² + Ω²)`.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{Detunings, SystemParams};

/// Reduced Planck constant, J·s (CODATA 2018, exact by SI definition).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity, F/m (CODATA 2018).
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DressedError {
    #[error("degenerate dressing: coupling and detuning are both zero")]
    Degenerate,
    #[error("coupling must be finite and non-negative, got {0}")]
    InvalidCoupling(f64),
    #[error("cavity-gate detuning must be positive for the dispersive formula, got {0}")]
    NonDispersive(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("loss rate is zero: quality factor is infinite")]
    InfiniteQ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// One dressed eigenstate `a|g 1⟩ + b|e 0⟩` of a single atom-cavity pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedBranch {
    pub branch: Branch,
    pub amplitude_g1: Complex64,
    pub amplitude_e0: Complex64,
    /// Energy relative to the photon frequency of the pair.
    pub energy: f64,
}

/// Generalised Rabi frequency χ = √((Δ/2)² + Ω²).
pub fn generalized_rabi(rabi: f64, detuning: f64) -> f64 {
    (0.5 * detuning).hypot(rabi)
}

/// `Δ/2 ± χ`, rearranged on the cancelling side as `±Ω²/(χ ∓ Δ/2)`.
pub fn dressed_energy(rabi: f64, detuning: f64, branch: Branch) -> f64 {
    let chi = generalized_rabi(rabi, detuning);
    let half = 0.5 * detuning;
    match branch {
        Branch::Plus if half < 0.0 => rabi * rabi / (chi - half),
        Branch::Plus => half + chi,
        Branch::Minus if half > 0.0 => -rabi * rabi / (chi + half),
        Branch::Minus => half - chi,
    }
}

/// Dressed state `(−Δ/2 ± χ)|g 1⟩ + Ω|e 0⟩`, normalised.
///
/// When `−Δ/2 ± χ` would cancel, the vector is rescaled by `1/Ω` and the
/// small component written as `Ω/(χ ± Δ/2)`, which stays accurate for
/// `|Δ|/Ω` far beyond 10⁶ and also covers `Ω = 0` with `Δ ≠ 0`.
pub fn dressed_state(rabi: f64, detuning: f64, branch: Branch) -> Result<DressedBranch, DressedError> {
    if !rabi.is_finite() || rabi < 0.0 {
        return Err(DressedError::InvalidCoupling(rabi));
    }
    if rabi == 0.0 && detuning == 0.0 {
        return Err(DressedError::Degenerate);
    }
    let chi = generalized_rabi(rabi, detuning);
    let half = 0.5 * detuning;
    let (g1, e0) = match branch {
        Branch::Plus if half > 0.0 => (rabi / (chi + half), 1.0),
        Branch::Plus => (chi - half, rabi),
        Branch::Minus if half < 0.0 => (-rabi / (chi - half), 1.0),
        Branch::Minus => (-chi - half, rabi),
    };
    let norm = g1.hypot(e0);
    Ok(DressedBranch {
        branch,
        amplitude_g1: Complex64::new(g1 / norm, 0.0),
        amplitude_e0: Complex64::new(e0 / norm, 0.0),
        energy: dressed_energy(rabi, detuning, branch),
    })
}

/// The four one-quantum dressed energies, relative to ω_c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceEnergies {
    pub cavity_plus: f64,
    pub cavity_minus: f64,
    pub gate_plus: f64,
    pub gate_minus: f64,
}

impl ResonanceEnergies {
    pub fn as_array(&self) -> [f64; 4] {
        [self.cavity_plus, self.cavity_minus, self.gate_plus, self.gate_minus]
    }
}

/// Zeroth-order (κ_cq ignored) energies of `|±_c g_q 0_q⟩` and `|g_c 0_c ±_q⟩`.
pub fn gate_resonance_energies(params: &SystemParams, det: &Detunings) -> ResonanceEnergies {
    let delta = params.delta();
    ResonanceEnergies {
        cavity_plus: dressed_energy(params.rabi_c, det.delta_c, Branch::Plus),
        cavity_minus: dressed_energy(params.rabi_c, det.delta_c, Branch::Minus),
        gate_plus: delta + dressed_energy(params.rabi_q, det.delta_q, Branch::Plus),
        gate_minus: delta + dressed_energy(params.rabi_q, det.delta_q, Branch::Minus),
    }
}

/// Gate detuning at which the lower gate branch `δ + Δ_q/2 − χ_q` meets the
/// cavity dressed level of the given branch (κ_cq ignored).
///
/// Solving `Δ/2 + a = χ` with `a = δ − E_c` gives `Δ = (Ω_q² − a²)/a`. For
/// `δ ≫ Ω` this tends to `−δ ± Ω_c`. Returns `None` when the levels never meet.
pub fn resonant_gate_detuning(params: &SystemParams, delta_c: f64, cavity: Branch) -> Option<f64> {
    let a = params.delta() - dressed_energy(params.rabi_c, delta_c, cavity);
    if !(a > 0.0) {
        return None;
    }
    Some((params.rabi_q * params.rabi_q - a * a) / a)
}

/// Effective cavity-gate coupling at the gate-defined resonance,
/// `J = κ_cq Ω_q / (√2 δ)`. Sweeps must be slow on the scale `1/J`.
pub fn effective_coupling(params: &SystemParams) -> Result<f64, DressedError> {
    let delta = params.delta();
    if !(delta > 0.0) {
        return Err(DressedError::NonDispersive(delta));
    }
    Ok(params.kappa_cq * params.rabi_q / (std::f64::consts::SQRT_2 * delta))
}

/// Survival of `|+_c g_q 0_q⟩` with the switch off,
/// `exp(−κ_cq² κ_qW t / (2δ²))`. Requires δ > 0 and t ≥ 0.
pub fn quiescent_population(params: &SystemParams, t: f64) -> f64 {
    let ratio = params.kappa_cq / params.delta();
    (-0.5 * ratio * ratio * params.kappa_qw * t).exp()
}

/// Atom-cavity coupling `Ω = μ √(ω / (2ħ ε₀ V))` in SI units.
pub fn estimate_coupling(dipole_moment: f64, transition_frequency: f64, mode_volume: f64) -> Result<f64, DressedError> {
    for (name, value) in [
        ("dipole_moment", dipole_moment),
        ("transition_frequency", transition_frequency),
        ("mode_volume", mode_volume),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(DressedError::NonPositive { name, value });
        }
    }
    Ok(dipole_moment * (transition_frequency / (2.0 * HBAR * EPSILON_0 * mode_volume)).sqrt())
}

/// `Q = ω / κ`.
pub fn quality_factor(omega: f64, kappa: f64) -> Result<f64, DressedError> {
    if kappa == 0.0 {
        return Err(DressedError::InfiniteQ);
    }
    if !(kappa > 0.0) {
        return Err(DressedError::NonPositive { name: "kappa", value: kappa });
    }
    Ok(omega / kappa)
}
