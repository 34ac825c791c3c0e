use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    check_num_qubits, hermitian_deviation, min_eigenvalue, BasisLabel, CMatrix, CVector, C64,
    HERMITIAN_TOL, PSD_TOL, STATE_NORM_TOL, TRACE_TOL,
};
use crate::error::{invalid, Result};

/// Normalized state vector of an m-qubit block.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
    num_qubits: usize,
}

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(invalid(format!(
                "state dimension {dim} is not a power of two >= 2"
            )));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        check_num_qubits(num_qubits)?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(invalid(format!("state norm {norm} differs from 1")));
        }
        Ok(Self {
            amplitudes,
            num_qubits,
        })
    }

    /// Normalizes `amplitudes` before validating.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        Self::new(amplitudes / C64::new(norm, 0.0))
    }

    /// Computational basis state `|index>`.
    pub fn basis(index: usize, num_qubits: usize) -> Result<Self> {
        let dim = check_num_qubits(num_qubits)?;
        if index >= dim {
            return Err(invalid(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amps = CVector::zeros(dim);
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self {
            amplitudes: amps,
            num_qubits,
        })
    }

    /// Haar-random state.
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Result<Self> {
        let dim = check_num_qubits(num_qubits)?;
        let v = CVector::from_fn(dim, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        Self::normalized(v)
    }

    pub(crate) fn from_raw(amplitudes: CVector, num_qubits: usize) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << num_qubits);
        Self {
            amplitudes,
            num_qubits,
        }
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `<self| a |self>` (real part).
    pub fn expectation(&self, a: &CMatrix) -> f64 {
        let av = a * &self.amplitudes;
        self.amplitudes.dotc(&av).re
    }

    pub fn density(&self) -> DensityOperator {
        DensityOperator {
            matrix: super::projector(&self.amplitudes),
            num_qubits: self.num_qubits,
        }
    }
}

/// Density operator of an m-qubit block.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
    num_qubits: usize,
}

impl DensityOperator {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("density operator must be square"));
        }
        let dim = matrix.nrows();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(invalid(format!(
                "density dimension {dim} is not a power of two >= 2"
            )));
        }
        let num_qubits = dim.trailing_zeros() as usize;
        check_num_qubits(num_qubits)?;
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(invalid(format!(
                "density operator not Hermitian (deviation {dev:e})"
            )));
        }
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(invalid(format!(
                "density operator trace {tr} differs from 1"
            )));
        }
        let min = min_eigenvalue(&matrix);
        if min < -PSD_TOL {
            return Err(invalid(format!(
                "density operator not PSD (min eigenvalue {min:e})"
            )));
        }
        Ok(Self { matrix, num_qubits })
    }

    pub fn maximally_mixed(num_qubits: usize) -> Result<Self> {
        let dim = check_num_qubits(num_qubits)?;
        Ok(Self {
            matrix: CMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0),
            num_qubits,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Wiesner state `|s>_theta`: `|s>` for `Z`, `H^{(x)m}|s>` for `X`.
///
/// `secret` holds the bit string `s` as an integer whose most significant of
/// `num_qubits` bits is the first qubit.
pub fn wiesner_encode(secret: u64, num_qubits: usize, theta: BasisLabel) -> Result<PureState> {
    if num_qubits == 0 {
        return Err(invalid("empty bit string"));
    }
    check_num_qubits(num_qubits)?;
    if num_qubits < 64 && secret >> num_qubits != 0 {
        return Err(invalid(format!(
            "secret {secret} has more than {num_qubits} bits"
        )));
    }
    let z = PureState::basis(secret as usize, num_qubits)?;
    Ok(match theta {
        BasisLabel::Z => z,
        BasisLabel::X => hadamard_all(&z),
    })
}

/// Apply a Hadamard gate to every qubit (normalized fast Walsh-Hadamard transform).
pub fn hadamard_all(state: &PureState) -> PureState {
    let mut a = state.amplitudes.clone();
    let dim = a.len();
    let mut half = 1;
    while half < dim {
        for start in (0..dim).step_by(2 * half) {
            for k in start..start + half {
                let (u, v) = (a[k], a[k + half]);
                a[k] = u + v;
                a[k + half] = u - v;
            }
        }
        half *= 2;
    }
    let scale = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
    a *= scale;
    PureState::from_raw(a, state.num_qubits)
}
