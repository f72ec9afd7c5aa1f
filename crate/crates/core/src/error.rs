use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: orbital index {index} outside 0..={norb}")]
    Index {
        line: usize,
        index: i64,
        norb: usize,
    },

    #[error("line {line}: integral {indices:?} conflicts with an earlier value ({previous} vs {value})")]
    Consistency {
        line: usize,
        indices: [usize; 4],
        previous: f64,
        value: f64,
    },

    #[error("invalid symmetry groups: {0}")]
    Group(String),

    #[error("Jordan-Wigner encoding left an imaginary residue of {0:e}")]
    Encoding(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("index error: {0}")]
    BadIndex(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{n_qubits} qubits exceeds the exact-diagonalization limit of {limit}")]
    Scale { n_qubits: usize, limit: usize },

    #[error("correlation fraction undefined: FCI and HF energies coincide")]
    Degenerate,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
