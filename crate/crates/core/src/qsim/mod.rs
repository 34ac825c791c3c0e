//! Dense linear algebra and measurement primitives for m-qubit blocks.
//!
//! States are stored densely (dimension `D = 2^m`, at most [`MAX_QUBITS`]
//! qubits). Qubit 0 is the most significant bit of a basis index, so the
//! bit string `s = s_0 s_1 ... s_{m-1}` labels basis vector `|s>`.
//!
//! A multi-block token is never formed as one state vector: blocks are
//! prepared independently and every implemented measurement acts on one
//! block at a time, so the product structure is kept exactly.

mod linalg;
mod measure;
mod povm;
mod state;

use serde::{Deserialize, Serialize};

pub use linalg::{
    fidelity_rank1, hermitian_deviation, hermitian_eigen, min_eigenvalue, projector,
    psd_inverse_sqrt, psd_sqrt, random_ginibre, trace_norm,
};
pub use measure::{
    measure_in_basis, sample_from_probs, sample_measurement, sample_measurement_with,
    SubsystemMeasurement,
};
pub use povm::{povm_outcome_probs, Povm};
pub use state::{hadamard_all, wiesner_encode, DensityOperator, PureState};

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = nalgebra::DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;

pub const MAX_QUBITS: usize = 10;

/// Tolerances used by the validity checks.
pub const STATE_NORM_TOL: f64 = 1e-10;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;
pub const POVM_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-10;

/// One of the two conjugate bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BasisLabel {
    /// Hadamard basis, `|psi_x> = H^{(x)m} |x>`.
    X,
    /// Computational basis.
    Z,
}

impl BasisLabel {
    pub fn conjugate(self) -> Self {
        match self {
            BasisLabel::X => BasisLabel::Z,
            BasisLabel::Z => BasisLabel::X,
        }
    }
}

impl std::fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisLabel::X => f.write_str("X"),
            BasisLabel::Z => f.write_str("Z"),
        }
    }
}

impl std::str::FromStr for BasisLabel {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "X" | "x" => Ok(BasisLabel::X),
            "Z" | "z" => Ok(BasisLabel::Z),
            other => Err(crate::error::invalid(format!("unknown basis {other:?}"))),
        }
    }
}

pub(crate) fn check_num_qubits(m: usize) -> crate::Result<usize> {
    if m == 0 || m > MAX_QUBITS {
        return Err(crate::error::invalid(format!(
            "number of qubits must be in 1..={MAX_QUBITS}, got {m}"
        )));
    }
    Ok(1usize << m)
}
