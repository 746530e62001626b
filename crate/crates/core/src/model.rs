//! System parameters, the cavity-gate Hamiltonian and the gate→waveguide
//! collapse operator.
//!
//! Units: ħ = 1 and every frequency or rate is expressed in one shared unit
//! (usually the atom-cavity coupling). The waveguide mode carries no bare
//! energy: it only couples through the quanta-conserving dissipator, so a
//! diagonal offset on it cannot change any population.
//!
//! Detuning sign: `Δ_α = ε_α − ω_α`, atomic transition minus photon frequency.
//! With this sign the gate-induced cavity resonances sit at `Δ_q ≈ −δ ± Ω_c`
//! and the dressed state `(−Δ/2 ± χ)|g 1⟩ + Ω|e 0⟩` is an exact eigenvector
//! of the single-cavity block.

use std::sync::Arc;

use num_complex::Complex64;

use crate::hilbert::{BareLabel, BasisIndex, ComplexOperator, Ladder, Subsystem};

/// Static model frequencies and couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Cavity photon frequency ω_c.
    pub omega_c: f64,
    /// Gate photon frequency ω_q.
    pub omega_q: f64,
    /// Atom-cavity coupling Ω_c (one-photon Rabi frequency) in the cavity.
    pub rabi_c: f64,
    /// Atom-cavity coupling Ω_q in the gate.
    pub rabi_q: f64,
    /// Cavity-gate photon hopping κ_cq.
    pub kappa_cq: f64,
    /// Gate-waveguide outcoupling rate κ_qW.
    pub kappa_qw: f64,
}

impl SystemParams {
    /// Cavity-gate photon detuning δ = ω_q − ω_c.
    pub fn delta(&self) -> f64 {
        self.omega_q - self.omega_c
    }

    /// Eigenspectrum parameters: Ω_c = Ω_q = κ_cq = 0.1, ω_c = 2, ω_q = 2.5.
    /// The outcoupling rate plays no role in the spectrum and is left at 0.
    pub fn fig2() -> Self {
        SystemParams { omega_c: 2.0, omega_q: 2.5, rabi_c: 0.1, rabi_q: 0.1, kappa_cq: 0.1, kappa_qw: 0.0 }
    }

    /// Transient-map parameters: Ω_c = Ω_q = 0.5, κ_cq = κ_qW = 0.1, δ = 2.
    /// ω_c is not fixed by the experiment; 2 is used.
    pub fn fig3() -> Self {
        SystemParams { omega_c: 2.0, omega_q: 4.0, rabi_c: 0.5, rabi_q: 0.5, kappa_cq: 0.1, kappa_qw: 0.1 }
    }

    /// Adiabatic-switch parameters in units of Ω: δ = 4, κ_cq = 0.01,
    /// κ_qW = 0.1. ω_c is a global offset inside a fixed-quanta manifold and
    /// is set to 1.
    pub fn fig5() -> Self {
        SystemParams { omega_c: 1.0, omega_q: 5.0, rabi_c: 1.0, rabi_q: 1.0, kappa_cq: 0.01, kappa_qw: 0.1 }
    }

    /// Nominal NV-centre device parameters (Hz).
    pub fn table1() -> Self {
        SystemParams {
            omega_c: 2.95e15,
            omega_q: 2.95e15 + 1e12,
            rabi_c: 1e10,
            rabi_q: 1e10,
            kappa_cq: 1e10,
            kappa_qw: 1e11,
        }
    }
}

/// Atom-cavity detunings `Δ_α = ε_α − ω_α`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Detunings {
    pub delta_c: f64,
    pub delta_q: f64,
}

impl Detunings {
    pub fn new(delta_c: f64, delta_q: f64) -> Self {
        Detunings { delta_c, delta_q }
    }

    /// Atomic transition frequency ε_c.
    pub fn epsilon_c(&self, params: &SystemParams) -> f64 {
        params.omega_c + self.delta_c
    }

    /// Atomic transition frequency ε_q.
    pub fn epsilon_q(&self, params: &SystemParams) -> f64 {
        params.omega_q + self.delta_q
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Ratio δ / max(Ω_c, Ω_q, κ_cq) below which the closed-form dressed-state
/// results are only approximate.
pub const PERTURBATIVE_RATIO: f64 = 5.0;

pub fn validate_params(params: &SystemParams) -> Diagnostics {
    let mut diag = Diagnostics::default();
    let fields = [
        ("omega_c", params.omega_c),
        ("omega_q", params.omega_q),
        ("rabi_c", params.rabi_c),
        ("rabi_q", params.rabi_q),
        ("kappa_cq", params.kappa_cq),
        ("kappa_qw", params.kappa_qw),
    ];
    for (name, value) in fields {
        if !value.is_finite() {
            diag.violations.push(format!("{name} is not finite ({value})"));
        }
    }
    for (name, value) in &fields[2..] {
        if *value < 0.0 {
            diag.violations.push(format!("{name} must be non-negative, got {value}"));
        }
    }
    let delta = params.delta();
    if delta < 0.0 {
        diag.violations
            .push(format!("omega_q must not be below omega_c (delta = {delta})"));
    }
    let scale = params.rabi_c.max(params.rabi_q).max(params.kappa_cq);
    if delta.is_finite() && scale > 0.0 && delta <= PERTURBATIVE_RATIO * scale {
        diag.warnings.push(format!(
            "delta / max(rabi_c, rabi_q, kappa_cq) = {:.4} <= {PERTURBATIVE_RATIO}: \
             closed-form effective coupling and quiescent leakage are approximate",
            delta / scale
        ));
    }
    diag
}

const JC_CAVITY: [[Ladder; 2]; 2] = [
    [Ladder::Raise(Subsystem::AtomC), Ladder::Lower(Subsystem::PhotonC)],
    [Ladder::Lower(Subsystem::AtomC), Ladder::Raise(Subsystem::PhotonC)],
];
const JC_GATE: [[Ladder; 2]; 2] = [
    [Ladder::Raise(Subsystem::AtomQ), Ladder::Lower(Subsystem::PhotonQ)],
    [Ladder::Lower(Subsystem::AtomQ), Ladder::Raise(Subsystem::PhotonQ)],
];
const HOPPING: [[Ladder; 2]; 2] = [
    [Ladder::Raise(Subsystem::PhotonQ), Ladder::Lower(Subsystem::PhotonC)],
    [Ladder::Lower(Subsystem::PhotonQ), Ladder::Raise(Subsystem::PhotonC)],
];

/// `H = Σ_α [ε_α |e⟩⟨e|_α + ω_α a_α†a_α + Ω_α(σ_α⁺a_α + σ_α⁻a_α†)] + κ_cq(a_q†a_c + a_q a_c†)`.
///
/// Each Hermitian pair of terms is generated from the same square roots in the
/// same order, so the result is Hermitian bit for bit.
pub fn build_hamiltonian(params: &SystemParams, det: &Detunings, basis: &Arc<BasisIndex>) -> ComplexOperator {
    let n_max = basis.n_max();
    let eps_c = det.epsilon_c(params);
    let eps_q = det.epsilon_q(params);
    let couplings = [(params.rabi_c, &JC_CAVITY), (params.rabi_q, &JC_GATE), (params.kappa_cq, &HOPPING)];
    let h = ComplexOperator::from_action(basis, |label| {
        let mut out = Vec::with_capacity(7);
        out.push((Complex64::new(bare_energy(params, eps_c, eps_q, label), 0.0), *label));
        for (strength, words) in couplings {
            if strength == 0.0 {
                continue;
            }
            for word in words.iter() {
                if let Some((c, target)) = label.apply_word(word, n_max) {
                    out.push((Complex64::new(strength * c, 0.0), target));
                }
            }
        }
        out
    });
    debug_assert!(h.is_hermitian());
    h
}

fn bare_energy(params: &SystemParams, eps_c: f64, eps_q: f64, label: &BareLabel) -> f64 {
    let mut e = params.omega_c * f64::from(label.n_c) + params.omega_q * f64::from(label.n_q);
    if label.atom_c.is_excited() {
        e += eps_c;
    }
    if label.atom_q.is_excited() {
        e += eps_q;
    }
    e
}

/// Photon-hopping operator `a_q†a_c + a_q a_c†` without its rate.
pub fn hopping_operator(basis: &Arc<BasisIndex>) -> ComplexOperator {
    &ComplexOperator::from_word(basis, &HOPPING[0]) + &ComplexOperator::from_word(basis, &HOPPING[1])
}

/// Projector onto the excited gate atom; the only part of H that moves with Δ_q.
pub fn gate_atom_projector(basis: &Arc<BasisIndex>) -> ComplexOperator {
    ComplexOperator::from_action(basis, |label| {
        if label.atom_q.is_excited() {
            vec![(Complex64::new(1.0, 0.0), *label)]
        } else {
            Vec::new()
        }
    })
}

/// `C = √κ_qW · a_W† a_q`, the gate→waveguide jump operator with its rate folded in.
pub fn build_collapse_operator(params: &SystemParams, basis: &Arc<BasisIndex>) -> ComplexOperator {
    ComplexOperator::from_word(basis, &[Ladder::Raise(Subsystem::PhotonW), Ladder::Lower(Subsystem::PhotonQ)])
        .scale(params.kappa_qw.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{build_basis, total_quanta_operator};
    use nalgebra::{DMatrix, SymmetricEigen};

    fn re(z: Complex64) -> f64 {
        assert_eq!(z.im, 0.0);
        z.re
    }

    #[test]
    fn one_quantum_block_matches_hand_expansion() {
        let p = SystemParams { omega_c: 2.0, omega_q: 2.7, rabi_c: 0.11, rabi_q: 0.13, kappa_cq: 0.07, kappa_qw: 0.3 };
        let det = Detunings::new(0.05, -0.4);
        let basis = build_basis(1, Some(1)).unwrap();
        let h = build_hamiltonian(&p, &det, &basis);
        let (ec, eq) = (det.epsilon_c(&p), det.epsilon_q(&p));
        let order = [
            BareLabel::CAVITY_ATOM,
            BareLabel::CAVITY_PHOTON,
            BareLabel::GATE_ATOM,
            BareLabel::GATE_PHOTON,
            BareLabel::WAVEGUIDE_PHOTON,
        ];
        let expected = [
            [ec, p.rabi_c, 0.0, 0.0, 0.0],
            [p.rabi_c, p.omega_c, 0.0, p.kappa_cq, 0.0],
            [0.0, 0.0, eq, p.rabi_q, 0.0],
            [0.0, p.kappa_cq, p.rabi_q, p.omega_q, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0],
        ];
        for (i, bra) in order.iter().enumerate() {
            for (j, ket) in order.iter().enumerate() {
                assert_eq!(re(h.element(bra, ket)), expected[i][j], "{bra} {ket}");
            }
        }
    }

    #[test]
    fn cavity_block_splits_by_twice_the_coupling() {
        let p = SystemParams { kappa_cq: 0.0, ..SystemParams::fig2() };
        let basis = build_basis(1, Some(1)).unwrap();
        let h = build_hamiltonian(&p, &Detunings::new(0.0, -0.5), &basis);
        let idx = [
            basis.index_of(&BareLabel::CAVITY_PHOTON).unwrap(),
            basis.index_of(&BareLabel::CAVITY_ATOM).unwrap(),
        ];
        let block = DMatrix::from_fn(2, 2, |i, j| re(h.get(idx[i], idx[j])));
        let mut ev: Vec<f64> = SymmetricEigen::new(block).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] - 1.9).abs() < 1e-12 && (ev[1] - 2.1).abs() < 1e-12, "{ev:?}");
    }

    #[test]
    fn no_couplings_gives_bare_diagonal() {
        let p = SystemParams { rabi_c: 0.0, rabi_q: 0.0, kappa_cq: 0.0, ..SystemParams::fig3() };
        let det = Detunings::new(0.3, -1.0);
        let basis = build_basis(2, None).unwrap();
        let h = build_hamiltonian(&p, &det, &basis);
        for (i, l) in basis.labels().iter().enumerate() {
            for j in 0..basis.dim() {
                if i != j {
                    assert_eq!(h.get(i, j).norm(), 0.0);
                }
            }
            let e = bare_energy(&p, det.epsilon_c(&p), det.epsilon_q(&p), l);
            assert_eq!(re(h.get(i, i)), e);
        }
    }

    #[test]
    fn hamiltonian_is_exactly_hermitian_and_conserves_quanta() {
        let basis = build_basis(2, None).unwrap();
        let h = build_hamiltonian(&SystemParams::fig2(), &Detunings::new(0.01, -0.43), &basis);
        assert!(h.is_hermitian());
        let n = total_quanta_operator(&basis);
        assert!(h.commutator(&n).max_abs() < 1e-12);
    }

    #[test]
    fn hopping_enters_linearly() {
        let basis = build_basis(2, None).unwrap();
        let det = Detunings::new(0.0, -0.5);
        let x = 0.37;
        let with = build_hamiltonian(&SystemParams { kappa_cq: x, ..SystemParams::fig2() }, &det, &basis);
        let without = build_hamiltonian(&SystemParams { kappa_cq: 0.0, ..SystemParams::fig2() }, &det, &basis);
        let diff = &with - &without;
        assert_eq!(diff, hopping_operator(&basis).scale(x));
    }

    #[test]
    fn collapse_operator_elements() {
        let p = SystemParams::fig3();
        let basis = build_basis(1, None).unwrap();
        let c = build_collapse_operator(&p, &basis);
        let v = c.element(&BareLabel::WAVEGUIDE_PHOTON, &BareLabel::GATE_PHOTON);
        assert_eq!(v, Complex64::new(p.kappa_qw.sqrt(), 0.0));
        for (j, l) in basis.labels().iter().enumerate() {
            if l.n_q == 0 {
                assert!(c.matrix().column(j).iter().all(|z| z.norm() == 0.0));
            }
        }
        let n = total_quanta_operator(&basis);
        assert_eq!(c.commutator(&n).max_abs(), 0.0);
    }

    #[test]
    fn validation_rules() {
        let fig5 = validate_params(&SystemParams::fig5());
        assert!(fig5.is_valid());
        assert_eq!(fig5.warnings.len(), 1);
        assert!(fig5.warnings[0].contains("= 4.0000"));

        let table = validate_params(&SystemParams::table1());
        assert!(table.is_valid() && table.warnings.is_empty());

        let bad = validate_params(&SystemParams { kappa_cq: -1.0, ..SystemParams::fig5() });
        assert_eq!(bad.violations.len(), 1);
        assert!(bad.violations[0].contains("kappa_cq"));

        let inverted = validate_params(&SystemParams { omega_q: 0.5, ..SystemParams::fig5() });
        assert!(!inverted.is_valid());
    }
}
