//! Numerical model of a photonic Q-switch: a cavity-QED storage cavity
//! tunnel-coupled to a gate cavity whose atom detuning switches leakage
//! into a waveguide.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dressed;
pub mod dynamics;
pub mod hilbert;
mod linalg;
pub mod model;
pub mod protocol;
pub mod spectra;

pub use hilbert::{build_basis, Atom, BareLabel, BasisIndex, ComplexOperator, HilbertError, Ladder, Subsystem};
pub use model::{build_collapse_operator, build_hamiltonian, validate_params, Detunings, Diagnostics, SystemParams};
