use rand::Rng;

use super::{
    check_num_qubits, hermitian_deviation, min_eigenvalue, psd_inverse_sqrt, random_ginibre,
    CMatrix, CVector, DensityOperator, PureState, C64, POVM_TOL,
};
use crate::error::{invalid, Error, Result};

/// Complete family of PSD operators on a `2^m`-dimensional space, one per
/// outcome `z in {0,1}^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    elements: Vec<CMatrix>,
    num_qubits: usize,
}

impl Povm {
    /// Validates Hermiticity, positivity and completeness within 1e-9.
    pub fn new(elements: Vec<CMatrix>) -> Result<Self> {
        let povm = Self::new_unchecked(elements)?;
        povm.validate()?;
        Ok(povm)
    }

    fn new_unchecked(elements: Vec<CMatrix>) -> Result<Self> {
        let count = elements.len();
        if count < 2 || !count.is_power_of_two() {
            return Err(invalid(format!("POVM needs 2^m outcomes, got {count}")));
        }
        let num_qubits = count.trailing_zeros() as usize;
        check_num_qubits(num_qubits)?;
        if elements
            .iter()
            .any(|e| e.nrows() != count || e.ncols() != count)
        {
            return Err(invalid(
                "POVM element dimension does not match the outcome count",
            ));
        }
        Ok(Self {
            elements,
            num_qubits,
        })
    }

    /// Checks every element is Hermitian PSD and that they sum to the identity.
    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        let mut sum = CMatrix::zeros(d, d);
        for (k, e) in self.elements.iter().enumerate() {
            let dev = hermitian_deviation(e);
            if dev > POVM_TOL {
                return Err(invalid(format!(
                    "POVM element {k} not Hermitian (deviation {dev:e})"
                )));
            }
            let min = min_eigenvalue(e);
            if min < -POVM_TOL {
                return Err(invalid(format!(
                    "POVM element {k} not PSD (min eigenvalue {min:e})"
                )));
            }
            sum += e;
        }
        let id = CMatrix::identity(d, d);
        let worst = (sum - id).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if worst > POVM_TOL {
            return Err(invalid(format!(
                "POVM elements do not sum to identity (deviation {worst:e})"
            )));
        }
        Ok(())
    }

    pub fn computational_basis(num_qubits: usize) -> Result<Self> {
        let d = check_num_qubits(num_qubits)?;
        Self::from_orthonormal_columns(&CMatrix::identity(d, d))
    }

    /// Projectors onto the Hadamard basis states `|psi_x>`.
    pub fn hadamard_basis(num_qubits: usize) -> Result<Self> {
        let d = check_num_qubits(num_qubits)?;
        let mut cols = CMatrix::zeros(d, d);
        for x in 0..d {
            let psi = super::hadamard_all(&PureState::basis(x, num_qubits)?);
            cols.set_column(x, psi.amplitudes());
        }
        Self::from_orthonormal_columns(&cols)
    }

    /// Every element equal to `I/D`.
    pub fn uniform(num_qubits: usize) -> Result<Self> {
        let d = check_num_qubits(num_qubits)?;
        let e = CMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0);
        Self::new(vec![e; d])
    }

    /// Projective measurement onto the columns of a unitary; column `o` is outcome `o`.
    pub fn from_orthonormal_columns(basis: &CMatrix) -> Result<Self> {
        let elements = (0..basis.ncols())
            .map(|o| {
                let v: CVector = basis.column(o).into_owned();
                super::projector(&v)
            })
            .collect();
        Self::new(elements)
    }

    /// Normalize PSD operators `A_k` into a POVM: `S^{-1/2} A_k S^{-1/2}`, `S = sum A_k`.
    pub fn from_unnormalized(parts: Vec<CMatrix>) -> Result<Self> {
        let povm = Self::new_unchecked(parts)?;
        let d = povm.dim();
        let mut s = CMatrix::zeros(d, d);
        for a in &povm.elements {
            s += a;
        }
        let s_inv = psd_inverse_sqrt(&s)?;
        let half = C64::new(0.5, 0.0);
        let elements = povm
            .elements
            .iter()
            .map(|a| {
                let m = &s_inv * a * &s_inv;
                (&m + m.adjoint()) * half
            })
            .collect();
        Self::new(elements)
    }

    /// Random POVM: Ginibre `G_k`, `A_k = G_k G_k^dagger`, then normalized.
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Result<Self> {
        let d = check_num_qubits(num_qubits)?;
        let parts = (0..d)
            .map(|_| {
                let g = random_ginibre(d, rng);
                &g * g.adjoint()
            })
            .collect();
        Self::from_unnormalized(parts)
    }

    /// Product measurement; outcome `(a, b)` has index `a * D_b + b`.
    pub fn tensor(&self, other: &Povm) -> Result<Self> {
        let mut elements = Vec::with_capacity(self.len() * other.len());
        for a in &self.elements {
            for b in &other.elements {
                elements.push(a.kronecker(b));
            }
        }
        Self::new(elements)
    }

    /// `k`-fold tensor power.
    pub fn tensor_power(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("tensor power must be at least 1"));
        }
        let mut out = self.clone();
        for _ in 1..k {
            out = out.tensor(self)?;
        }
        Ok(out)
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn element(&self, outcome: usize) -> &CMatrix {
        &self.elements[outcome]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Outcome distribution on a pure state, `<psi|M_i|psi>`.
    pub fn probs_pure(&self, state: &PureState) -> Result<Vec<f64>> {
        if state.dim() != self.dim() {
            return Err(invalid(format!(
                "state dimension {} does not match POVM dimension {}",
                state.dim(),
                self.dim()
            )));
        }
        let raw = self.elements.iter().map(|m| state.expectation(m)).collect();
        finish_probs(raw)
    }
}

/// `Tr(M_i rho)` for every outcome, clipped to `[0, 1]`.
pub fn povm_outcome_probs(povm: &Povm, state: &DensityOperator) -> Result<Vec<f64>> {
    if state.dim() != povm.dim() {
        return Err(invalid(format!(
            "state dimension {} does not match POVM dimension {}",
            state.dim(),
            povm.dim()
        )));
    }
    let rho = state.matrix();
    let raw = povm
        .elements()
        .iter()
        .map(|m| {
            // Tr(M rho) = sum_ij M_ij rho_ji
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..rho.nrows() {
                for j in 0..rho.ncols() {
                    acc += m[(i, j)] * rho[(j, i)];
                }
            }
            acc.re
        })
        .collect();
    finish_probs(raw)
}

fn finish_probs(raw: Vec<f64>) -> Result<Vec<f64>> {
    let probs: Vec<f64> = raw.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Numeric(format!(
            "outcome probabilities sum to {total}"
        )));
    }
    Ok(probs)
}
