use rand::Rng;

use super::{
    check_num_qubits, hadamard_all, povm_outcome_probs, psd_sqrt, BasisLabel, CMatrix, CVector,
    DensityOperator, Povm, PureState, C64,
};
use crate::error::{invalid, Error, Result};

/// Inverse-CDF draw from a probability vector.
pub fn sample_from_probs<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    if probs.is_empty() {
        return Err(invalid("empty probability vector"));
    }
    let total: f64 = probs.iter().sum();
    if !total.is_finite() || probs.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-8 {
        return Err(Error::Numeric(format!(
            "not a probability vector (sum {total})"
        )));
    }
    let r: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if r < acc {
            return Ok(i);
        }
    }
    Ok(last_positive)
}

/// Draws one outcome of `povm` on `state`, seeded.
pub fn sample_measurement(povm: &Povm, state: &DensityOperator, seed: u64) -> Result<usize> {
    let mut rng = crate::rng::from_seed(seed);
    sample_measurement_with(povm, state, &mut rng)
}

pub fn sample_measurement_with<R: Rng + ?Sized>(
    povm: &Povm,
    state: &DensityOperator,
    rng: &mut R,
) -> Result<usize> {
    let probs = povm_outcome_probs(povm, state)?;
    sample_from_probs(&probs, rng)
}

/// Projective measurement of every qubit in `basis`. Returns the outcome
/// string and the post-measurement state (the matching basis vector).
pub fn measure_in_basis<R: Rng + ?Sized>(
    state: &PureState,
    basis: BasisLabel,
    rng: &mut R,
) -> Result<(usize, PureState)> {
    let m = state.num_qubits();
    // In the X basis, <psi_x|phi> = <x|H phi> since H is real and self-inverse.
    let rotated = match basis {
        BasisLabel::Z => state.clone(),
        BasisLabel::X => hadamard_all(state),
    };
    let probs: Vec<f64> = rotated.amplitudes().iter().map(|a| a.norm_sqr()).collect();
    let total: f64 = probs.iter().sum();
    let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
    let outcome = sample_from_probs(&probs, rng)?;
    let z = PureState::basis(outcome, m)?;
    let post = match basis {
        BasisLabel::Z => z,
        BasisLabel::X => hadamard_all(&z),
    };
    Ok((outcome, post))
}

/// A POVM on a contiguous group of qubits inside a larger register,
/// applied through the Kraus operators `sqrt(M_o)`.
#[derive(Debug, Clone)]
pub struct SubsystemMeasurement {
    povm: Povm,
    kraus: Vec<CMatrix>,
}

impl SubsystemMeasurement {
    pub fn new(povm: Povm) -> Self {
        let kraus = povm.elements().iter().map(psd_sqrt).collect();
        Self { povm, kraus }
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    /// Measures qubits `offset..offset + k` of `state` (k = POVM qubits) and
    /// returns the outcome together with the normalized post-measurement state.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        state: &PureState,
        offset: usize,
        rng: &mut R,
    ) -> Result<(usize, PureState)> {
        let m = state.num_qubits();
        let k = self.povm.num_qubits();
        if offset + k > m {
            return Err(invalid(format!(
                "sub-register {offset}..{} exceeds {m} qubits",
                offset + k
            )));
        }
        check_num_qubits(m)?;
        let branches: Vec<CVector> = self
            .kraus
            .iter()
            .map(|kr| apply_local(kr, state.amplitudes(), m, offset, k))
            .collect();
        let probs: Vec<f64> = branches.iter().map(|v| v.norm_squared()).collect();
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::Numeric(format!(
                "Kraus branches carry total weight {total}"
            )));
        }
        let outcome = sample_from_probs(&probs, rng)?;
        let mut post = branches[outcome].clone();
        let norm = probs[outcome].sqrt();
        post.unscale_mut(norm);
        Ok((outcome, PureState::from_raw(post, m)))
    }
}

/// Applies `op` (acting on `k` qubits starting at `offset`) to an `m`-qubit vector.
fn apply_local(op: &CMatrix, amps: &CVector, m: usize, offset: usize, k: usize) -> CVector {
    let low_bits = m - offset - k;
    let low = 1usize << low_bits;
    let sub = 1usize << k;
    let high = 1usize << offset;
    let mut out = CVector::zeros(amps.len());
    for h in 0..high {
        for l in 0..low {
            for s_out in 0..sub {
                let mut acc = C64::new(0.0, 0.0);
                for s_in in 0..sub {
                    acc += op[(s_out, s_in)] * amps[(h * sub + s_in) * low + l];
                }
                out[(h * sub + s_out) * low + l] = acc;
            }
        }
    }
    out
}
