//! Orbital-optimized variational quantum eigensolver on an exact statevector
//! backend.
//!
//! The pipeline reads FCIDUMP integrals, maps them to qubits with the
//! Jordan-Wigner encoding, optimizes a hardware-efficient Ry/CNOT ansatz and
//! alternates that with trust-region optimization of symmetry-restricted
//! orbital rotations evaluated on cached reduced density matrices.

pub mod analysis;
pub mod error;
pub mod integrals;
pub mod lbfgs;
pub mod pauli;
pub mod rotation;
pub mod simulator;
pub mod sparse;
pub mod vqe;
pub mod wahtor;

pub use error::{Error, Result};
