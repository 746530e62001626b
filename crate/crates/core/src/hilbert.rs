//! Truncated tensor-product bases and the elementary ladder operators.
//!
//! The bare basis is `atom_c ⊗ photon_c ⊗ atom_q ⊗ photon_q ⊗ photon_W`,
//! each photon mode truncated at `n_max` quanta. Labels are kept in
//! lexicographic order of `(atom_c, n_c, atom_q, n_q, n_W)` with `g < e`, so a
//! basis built twice from the same arguments has the same ordering.
//!
//! Operators on a quanta-filtered basis are the projection of the full-space
//! operator: any matrix element leading outside the filtered labels is dropped.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HilbertError {
    #[error("invalid truncation: n_max must be at least 1, got {0}")]
    InvalidTruncation(u32),
    #[error("quanta filter {filter} exceeds the largest reachable total {max} for n_max = {n_max}")]
    FilterOutOfRange { filter: u32, max: u32, n_max: u32 },
    #[error("unknown subsystem `{0}` (expected photon_c, photon_q, photon_W, atom_c or atom_q)")]
    UnknownSubsystem(String),
    #[error("malformed state label `{0}`")]
    MalformedLabel(String),
    #[error("matrix is {rows}x{cols} but the basis has {dim} labels")]
    DimensionMismatch { rows: usize, cols: usize, dim: usize },
}

/// State of a two-level atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Ground,
    Excited,
}

impl Atom {
    pub fn is_excited(self) -> bool {
        self == Atom::Excited
    }

    fn letter(self) -> char {
        match self {
            Atom::Ground => 'g',
            Atom::Excited => 'e',
        }
    }

    fn from_letter(c: char) -> Option<Atom> {
        match c {
            'g' => Some(Atom::Ground),
            'e' => Some(Atom::Excited),
            _ => None,
        }
    }
}

/// One bare product state `|atom_c n_c atom_q n_q n_W⟩`.
///
/// Field order matters: the derived `Ord` is the basis ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BareLabel {
    pub atom_c: Atom,
    pub n_c: u32,
    pub atom_q: Atom,
    pub n_q: u32,
    pub n_w: u32,
}

impl BareLabel {
    pub const fn new(atom_c: Atom, n_c: u32, atom_q: Atom, n_q: u32, n_w: u32) -> Self {
        BareLabel { atom_c, n_c, atom_q, n_q, n_w }
    }

    /// Global ground state `|g 0 g 0 0⟩`.
    pub const GROUND: BareLabel = BareLabel::new(Atom::Ground, 0, Atom::Ground, 0, 0);
    /// `|g_c 1_c g_q 0_q 0_W⟩`, one photon stored in the cavity.
    pub const CAVITY_PHOTON: BareLabel = BareLabel::new(Atom::Ground, 1, Atom::Ground, 0, 0);
    /// `|e_c 0_c g_q 0_q 0_W⟩`.
    pub const CAVITY_ATOM: BareLabel = BareLabel::new(Atom::Excited, 0, Atom::Ground, 0, 0);
    /// `|g_c 0_c g_q 1_q 0_W⟩`.
    pub const GATE_PHOTON: BareLabel = BareLabel::new(Atom::Ground, 0, Atom::Ground, 1, 0);
    /// `|g_c 0_c e_q 0_q 0_W⟩`.
    pub const GATE_ATOM: BareLabel = BareLabel::new(Atom::Ground, 0, Atom::Excited, 0, 0);
    /// `|g_c 0_c g_q 0_q 1_W⟩`, the photon emitted into the waveguide.
    pub const WAVEGUIDE_PHOTON: BareLabel = BareLabel::new(Atom::Ground, 0, Atom::Ground, 0, 1);

    pub fn total_quanta(&self) -> u32 {
        u32::from(self.atom_c.is_excited())
            + self.n_c
            + u32::from(self.atom_q.is_excited())
            + self.n_q
            + self.n_w
    }

    /// Column-friendly name, e.g. `gc1_gq0_0W` for `|g_c 1_c g_q 0_q 0_W⟩`.
    pub fn name(&self) -> String {
        format!(
            "{}c{}_{}q{}_{}W",
            self.atom_c.letter(),
            self.n_c,
            self.atom_q.letter(),
            self.n_q,
            self.n_w
        )
    }

    /// Apply a single ladder operator. Raising past `n_max` leaves the
    /// truncated space and yields `None`, as does annihilating a vacuum.
    pub fn apply(&self, ladder: Ladder, n_max: u32) -> Option<(f64, BareLabel)> {
        let mut out = *self;
        let coeff = match ladder {
            Ladder::Lower(sub) => match sub {
                Subsystem::PhotonC => lower_count(&mut out.n_c)?,
                Subsystem::PhotonQ => lower_count(&mut out.n_q)?,
                Subsystem::PhotonW => lower_count(&mut out.n_w)?,
                Subsystem::AtomC => lower_atom(&mut out.atom_c)?,
                Subsystem::AtomQ => lower_atom(&mut out.atom_q)?,
            },
            Ladder::Raise(sub) => match sub {
                Subsystem::PhotonC => raise_count(&mut out.n_c, n_max)?,
                Subsystem::PhotonQ => raise_count(&mut out.n_q, n_max)?,
                Subsystem::PhotonW => raise_count(&mut out.n_w, n_max)?,
                Subsystem::AtomC => raise_atom(&mut out.atom_c)?,
                Subsystem::AtomQ => raise_atom(&mut out.atom_q)?,
            },
        };
        Some((coeff, out))
    }

    /// Apply an operator word such as `[Raise(PhotonW), Lower(PhotonQ)]`
    /// (that is, `a_W† a_q`). The rightmost factor acts first.
    pub fn apply_word(&self, word: &[Ladder], n_max: u32) -> Option<(f64, BareLabel)> {
        let mut coeff = 1.0;
        let mut label = *self;
        for &ladder in word.iter().rev() {
            let (c, next) = label.apply(ladder, n_max)?;
            coeff *= c;
            label = next;
        }
        Some((coeff, label))
    }
}

fn lower_count(n: &mut u32) -> Option<f64> {
    if *n == 0 {
        return None;
    }
    let c = f64::from(*n).sqrt();
    *n -= 1;
    Some(c)
}

fn raise_count(n: &mut u32, n_max: u32) -> Option<f64> {
    if *n >= n_max {
        return None;
    }
    *n += 1;
    Some(f64::from(*n).sqrt())
}

fn lower_atom(a: &mut Atom) -> Option<f64> {
    match a {
        Atom::Excited => {
            *a = Atom::Ground;
            Some(1.0)
        }
        Atom::Ground => None,
    }
}

fn raise_atom(a: &mut Atom) -> Option<f64> {
    match a {
        Atom::Ground => {
            *a = Atom::Excited;
            Some(1.0)
        }
        Atom::Excited => None,
    }
}

impl fmt::Display for BareLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for BareLabel {
    type Err = HilbertError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HilbertError::MalformedLabel(s.to_string());
        let parts: Vec<&str> = s.split('_').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let factor = |part: &str, tag: char| -> Option<(Atom, u32)> {
            let mut chars = part.chars();
            let atom = Atom::from_letter(chars.next()?)?;
            if chars.next()? != tag {
                return None;
            }
            Some((atom, chars.as_str().parse().ok()?))
        };
        let (atom_c, n_c) = factor(parts[0], 'c').ok_or_else(bad)?;
        let (atom_q, n_q) = factor(parts[1], 'q').ok_or_else(bad)?;
        let n_w = parts[2].strip_suffix('W').and_then(|n| n.parse().ok()).ok_or_else(bad)?;
        Ok(BareLabel::new(atom_c, n_c, atom_q, n_q, n_w))
    }
}

/// Tensor factor an elementary operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subsystem {
    PhotonC,
    PhotonQ,
    PhotonW,
    AtomC,
    AtomQ,
}

impl FromStr for Subsystem {
    type Err = HilbertError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "photon_c" => Ok(Subsystem::PhotonC),
            "photon_q" => Ok(Subsystem::PhotonQ),
            "photon_W" | "photon_w" => Ok(Subsystem::PhotonW),
            "atom_c" => Ok(Subsystem::AtomC),
            "atom_q" => Ok(Subsystem::AtomQ),
            other => Err(HilbertError::UnknownSubsystem(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Lower(Subsystem),
    Raise(Subsystem),
}

/// Ordered, duplicate-free list of bare labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisIndex {
    labels: Vec<BareLabel>,
    n_max: u32,
    quanta_filter: Option<u32>,
}

impl BasisIndex {
    pub fn new(n_max: u32, quanta_filter: Option<u32>) -> Result<Self, HilbertError> {
        if n_max == 0 {
            return Err(HilbertError::InvalidTruncation(n_max));
        }
        let max_quanta = 2 + 3 * n_max;
        if let Some(filter) = quanta_filter {
            if filter > max_quanta {
                return Err(HilbertError::FilterOutOfRange { filter, max: max_quanta, n_max });
            }
        }
        let atoms = [Atom::Ground, Atom::Excited];
        let mut labels = Vec::new();
        // Nested loops in field order produce lexicographic order directly.
        for &atom_c in &atoms {
            for n_c in 0..=n_max {
                for &atom_q in &atoms {
                    for n_q in 0..=n_max {
                        for n_w in 0..=n_max {
                            let label = BareLabel { atom_c, n_c, atom_q, n_q, n_w };
                            if quanta_filter.is_none_or(|n| label.total_quanta() == n) {
                                labels.push(label);
                            }
                        }
                    }
                }
            }
        }
        debug_assert!(labels.windows(2).all(|w| w[0] < w[1]));
        Ok(BasisIndex { labels, n_max, quanta_filter })
    }

    pub fn labels(&self) -> &[BareLabel] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn quanta_filter(&self) -> Option<u32> {
        self.quanta_filter
    }

    pub fn index_of(&self, label: &BareLabel) -> Option<usize> {
        self.labels.binary_search(label).ok()
    }

    pub fn contains(&self, label: &BareLabel) -> bool {
        self.index_of(label).is_some()
    }
}

/// Build a shareable basis. `quanta_filter = Some(N)` keeps only labels with
/// exactly `N` total quanta.
pub fn build_basis(n_max: u32, quanta_filter: Option<u32>) -> Result<Arc<BasisIndex>, HilbertError> {
    BasisIndex::new(n_max, quanta_filter).map(Arc::new)
}

/// Dense complex matrix tied to the basis it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexOperator {
    matrix: DMatrix<Complex64>,
    basis: Arc<BasisIndex>,
}

impl ComplexOperator {
    pub fn new(basis: Arc<BasisIndex>, matrix: DMatrix<Complex64>) -> Result<Self, HilbertError> {
        let dim = basis.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(HilbertError::DimensionMismatch {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                dim,
            });
        }
        Ok(ComplexOperator { matrix, basis })
    }

    pub fn zeros(basis: &Arc<BasisIndex>) -> Self {
        let dim = basis.dim();
        ComplexOperator { matrix: DMatrix::zeros(dim, dim), basis: Arc::clone(basis) }
    }

    pub fn identity(basis: &Arc<BasisIndex>) -> Self {
        let dim = basis.dim();
        ComplexOperator { matrix: DMatrix::identity(dim, dim), basis: Arc::clone(basis) }
    }

    /// Build an operator from its action on each basis label. Targets that are
    /// not part of the basis are dropped, which realises the projection onto a
    /// quanta-filtered subspace.
    pub fn from_action<F>(basis: &Arc<BasisIndex>, mut action: F) -> Self
    where
        F: FnMut(&BareLabel) -> Vec<(Complex64, BareLabel)>,
    {
        let mut op = ComplexOperator::zeros(basis);
        for (col, label) in basis.labels().iter().enumerate() {
            for (coeff, target) in action(label) {
                if let Some(row) = basis.index_of(&target) {
                    op.matrix[(row, col)] += coeff;
                }
            }
        }
        op
    }

    /// Operator for a single ladder word, e.g. `a_W† a_q`.
    pub fn from_word(basis: &Arc<BasisIndex>, word: &[Ladder]) -> Self {
        let n_max = basis.n_max();
        ComplexOperator::from_action(basis, |label| {
            label
                .apply_word(word, n_max)
                .map(|(c, l)| vec![(Complex64::new(c, 0.0), l)])
                .unwrap_or_default()
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &Arc<BasisIndex> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    /// Matrix element `⟨bra| O |ket⟩`; zero when either label is outside the basis.
    pub fn element(&self, bra: &BareLabel, ket: &BareLabel) -> Complex64 {
        match (self.basis.index_of(bra), self.basis.index_of(ket)) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn dagger(&self) -> Self {
        ComplexOperator { matrix: self.matrix.adjoint(), basis: Arc::clone(&self.basis) }
    }

    pub fn scale(&self, factor: f64) -> Self {
        ComplexOperator { matrix: &self.matrix * Complex64::new(factor, 0.0), basis: Arc::clone(&self.basis) }
    }

    pub fn commutator(&self, other: &ComplexOperator) -> Self {
        &(self * other) - &(other * self)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Exact (bitwise) Hermiticity.
    pub fn is_hermitian(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (i..n).all(|j| self.matrix[(i, j)] == self.matrix[(j, i)].conj()))
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    fn check_same_basis(&self, other: &ComplexOperator) {
        assert!(
            Arc::ptr_eq(&self.basis, &other.basis) || self.basis == other.basis,
            "operators act on different bases"
        );
    }
}

impl Add for &ComplexOperator {
    type Output = ComplexOperator;
    fn add(self, rhs: &ComplexOperator) -> ComplexOperator {
        self.check_same_basis(rhs);
        ComplexOperator { matrix: &self.matrix + &rhs.matrix, basis: Arc::clone(&self.basis) }
    }
}

impl Sub for &ComplexOperator {
    type Output = ComplexOperator;
    fn sub(self, rhs: &ComplexOperator) -> ComplexOperator {
        self.check_same_basis(rhs);
        ComplexOperator { matrix: &self.matrix - &rhs.matrix, basis: Arc::clone(&self.basis) }
    }
}

impl Mul for &ComplexOperator {
    type Output = ComplexOperator;
    fn mul(self, rhs: &ComplexOperator) -> ComplexOperator {
        self.check_same_basis(rhs);
        ComplexOperator { matrix: &self.matrix * &rhs.matrix, basis: Arc::clone(&self.basis) }
    }
}

pub fn lowering_operator(basis: &Arc<BasisIndex>, subsystem: Subsystem) -> ComplexOperator {
    ComplexOperator::from_word(basis, &[Ladder::Lower(subsystem)])
}

pub fn raising_operator(basis: &Arc<BasisIndex>, subsystem: Subsystem) -> ComplexOperator {
    ComplexOperator::from_word(basis, &[Ladder::Raise(subsystem)])
}

/// Diagonal operator counting atomic excitations plus photons.
pub fn total_quanta_operator(basis: &Arc<BasisIndex>) -> ComplexOperator {
    ComplexOperator::from_action(basis, |label| {
        vec![(Complex64::new(f64::from(label.total_quanta()), 0.0), *label)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn full_space_sizes() {
        assert_eq!(build_basis(1, None).unwrap().dim(), 32);
        assert_eq!(build_basis(2, None).unwrap().dim(), 4 * 27);
        assert_eq!(build_basis(3, None).unwrap().dim(), 4 * 64);
    }

    #[test]
    fn one_quantum_manifold_has_five_labels() {
        let basis = build_basis(1, Some(1)).unwrap();
        let expected = [
            BareLabel::CAVITY_ATOM,
            BareLabel::CAVITY_PHOTON,
            BareLabel::GATE_ATOM,
            BareLabel::GATE_PHOTON,
            BareLabel::WAVEGUIDE_PHOTON,
        ];
        assert_eq!(basis.dim(), 5);
        for label in &expected {
            assert!(basis.contains(label), "missing {label}");
        }
        // lexicographic with g < e
        assert_eq!(basis.labels()[0], BareLabel::WAVEGUIDE_PHOTON);
        assert_eq!(basis.labels()[4], BareLabel::CAVITY_ATOM);
    }

    #[test]
    fn zero_quantum_manifold_is_ground_state() {
        let basis = build_basis(2, Some(0)).unwrap();
        assert_eq!(basis.labels(), &[BareLabel::GROUND]);
    }

    #[test]
    fn invalid_truncation_and_filter() {
        assert_eq!(build_basis(0, None).unwrap_err(), HilbertError::InvalidTruncation(0));
        assert!(build_basis(1, Some(5)).is_ok());
        assert!(matches!(build_basis(1, Some(6)), Err(HilbertError::FilterOutOfRange { .. })));
    }

    #[test]
    fn basis_is_deterministic() {
        assert_eq!(build_basis(2, Some(2)).unwrap(), build_basis(2, Some(2)).unwrap());
    }

    #[test]
    fn photon_ladder_elements() {
        let b1 = build_basis(1, None).unwrap();
        let a = lowering_operator(&b1, Subsystem::PhotonC);
        let bra = BareLabel::GROUND;
        let ket = BareLabel::CAVITY_PHOTON;
        assert_eq!(a.element(&bra, &ket), c(1.0));

        let b2 = build_basis(2, None).unwrap();
        let a = lowering_operator(&b2, Subsystem::PhotonC);
        let two = BareLabel::new(Atom::Excited, 2, Atom::Ground, 1, 2);
        let one = BareLabel { n_c: 1, ..two };
        assert_eq!(a.element(&one, &two), c(2f64.sqrt()));
    }

    #[test]
    fn atomic_lowering_is_nilpotent() {
        for (n_max, filter) in [(1, None), (2, None), (2, Some(2))] {
            let basis = build_basis(n_max, filter).unwrap();
            for sub in [Subsystem::AtomC, Subsystem::AtomQ] {
                let s = lowering_operator(&basis, sub);
                assert_eq!((&s * &s).max_abs(), 0.0);
            }
        }
    }

    #[test]
    fn atomic_lowering_action() {
        let basis = build_basis(1, None).unwrap();
        let s = lowering_operator(&basis, Subsystem::AtomQ);
        assert_eq!(s.element(&BareLabel::GROUND, &BareLabel::GATE_ATOM), c(1.0));
        // σ⁻|g⟩ = 0: no column of a ground-state label has an entry
        let col = basis.index_of(&BareLabel::GROUND).unwrap();
        assert!(s.matrix().column(col).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn raising_is_exact_adjoint_of_lowering() {
        for (n_max, filter) in [(1, None), (2, None), (2, Some(1)), (3, Some(3))] {
            let basis = build_basis(n_max, filter).unwrap();
            for sub in [
                Subsystem::PhotonC,
                Subsystem::PhotonQ,
                Subsystem::PhotonW,
                Subsystem::AtomC,
                Subsystem::AtomQ,
            ] {
                assert_eq!(raising_operator(&basis, sub), lowering_operator(&basis, sub).dagger());
            }
        }
    }

    #[test]
    fn truncated_commutator_is_identity_below_cutoff() {
        let n_max = 3;
        let basis = build_basis(n_max, None).unwrap();
        for sub in [Subsystem::PhotonC, Subsystem::PhotonQ, Subsystem::PhotonW] {
            let a = lowering_operator(&basis, sub);
            let comm = a.commutator(&a.dagger());
            for (i, li) in basis.labels().iter().enumerate() {
                for (j, lj) in basis.labels().iter().enumerate() {
                    let count = |l: &BareLabel| match sub {
                        Subsystem::PhotonC => l.n_c,
                        Subsystem::PhotonQ => l.n_q,
                        _ => l.n_w,
                    };
                    if count(li) < n_max && count(lj) < n_max {
                        let expected = if i == j { 1.0 } else { 0.0 };
                        assert!((comm.get(i, j) - c(expected)).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn filtered_operator_is_projection_of_full() {
        let full = build_basis(2, None).unwrap();
        let word = [Ladder::Raise(Subsystem::PhotonW), Ladder::Lower(Subsystem::PhotonQ)];
        let op_full = ComplexOperator::from_word(&full, &word);
        for n in 0..=4 {
            let sub = build_basis(2, Some(n)).unwrap();
            let op_sub = ComplexOperator::from_word(&sub, &word);
            for (i, li) in sub.labels().iter().enumerate() {
                for (j, lj) in sub.labels().iter().enumerate() {
                    assert_eq!(op_sub.get(i, j), op_full.element(li, lj));
                }
            }
        }
    }

    #[test]
    fn total_quanta_diagonal() {
        let manifold = build_basis(1, Some(1)).unwrap();
        assert_eq!(total_quanta_operator(&manifold), ComplexOperator::identity(&manifold));
        let full = build_basis(1, None).unwrap();
        let n = total_quanta_operator(&full);
        let top = BareLabel::new(Atom::Excited, 1, Atom::Excited, 1, 1);
        assert_eq!(n.element(&top, &top), c(5.0));
    }

    #[test]
    fn subsystem_and_label_parsing() {
        assert_eq!("photon_q".parse::<Subsystem>().unwrap(), Subsystem::PhotonQ);
        assert!(matches!("photon_x".parse::<Subsystem>(), Err(HilbertError::UnknownSubsystem(_))));
        let label = BareLabel::CAVITY_PHOTON;
        assert_eq!(label.name(), "gc1_gq0_0W");
        assert_eq!(label.name().parse::<BareLabel>().unwrap(), label);
        assert!("gc1_gq0".parse::<BareLabel>().is_err());
    }
}
