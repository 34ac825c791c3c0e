//! The conjugate-basis guessing bound and attacks against it.
//!
//! For a POVM `{M_o}` on `m` qubits (`D = 2^m`), `z_success` is the average
//! probability of reading a computational basis string correctly and
//! `x_guess` is the probability of guessing a Hadamard string `x` when the
//! guess for `x` is scored on outcome `f(x)`:
//! `x_guess = (1/D) sum_x <psi_x| M_{f(x)} |psi_x>`. Whenever
//! `z_success >= 1 - eps`, the bound `x_guess <= 1/D + 4 eps^(1/4)` applies.
//! This module evaluates both sides, the good/bad outcome split behind the
//! bound, and searches for attacks that trade `z_success` for `x_guess`.

mod brute;
mod optimize;
mod sweep;

use serde::{Deserialize, Serialize};

pub use brute::{brute_force_attack_m1, projective_search, ProjectiveSearchConfig};
pub use optimize::{
    analytic_gradient, finite_difference_gradient, optimize_attack, optimize_attack_with,
    penalized_objective, GradientMode, OptimizerConfig, Penalty,
};
pub use sweep::{
    default_epsilon_grid, run_sweep, write_sweep_csv, SweepConfig, SweepRow, SWEEP_HEADER,
};

use crate::error::{invalid, Error, Result};
use crate::qsim::{hadamard_all, CMatrix, Povm, PureState, C64};

/// Tolerance on the good-element threshold `M_i[i,i] >= 1 - sqrt(eps)`.
pub const GOOD_TOL: f64 = 1e-10;
/// Ties in `best_guess_for_povm` closer than this go to the smaller index.
pub const TIE_TOL: f64 = 1e-12;
/// Slack for declaring `x_guess > bound` a falsification.
pub const FALSIFICATION_TOL: f64 = 1e-6;

/// `1/2^m + 4 eps^(1/4)`; exceeds 1 (and is vacuous) for moderate `eps`.
pub fn theorem_bound(epsilon: f64, m: usize) -> f64 {
    1.0 / (1u64 << m) as f64 + 4.0 * epsilon.max(0.0).powf(0.25)
}

/// Part of the bound covering outcomes in the good set, `1/D + 2 eps^(1/4)`.
pub fn good_mass_bound(epsilon: f64, m: usize) -> f64 {
    1.0 / (1u64 << m) as f64 + 2.0 * epsilon.max(0.0).powf(0.25)
}

/// Part of the bound covering outcomes in the bad set, `2 sqrt(eps)`.
pub fn bad_mass_bound(epsilon: f64) -> f64 {
    2.0 * epsilon.max(0.0).sqrt()
}

/// Hadamard basis states `|psi_x>` as the columns of a `D x D` matrix.
pub fn hadamard_states(m: usize) -> Result<CMatrix> {
    let d = 1usize << m;
    let mut out = CMatrix::zeros(d, d);
    for x in 0..d {
        let psi = hadamard_all(&PureState::basis(x, m)?);
        out.set_column(x, psi.amplitudes());
    }
    Ok(out)
}

/// `(1/D) sum_z M_z[z, z]`.
pub fn z_success_probability(povm: &Povm) -> f64 {
    let d = povm.dim();
    povm.elements()
        .iter()
        .enumerate()
        .map(|(z, e)| e[(z, z)].re)
        .sum::<f64>()
        / d as f64
}

/// `table[o][x] = <psi_x| M_o |psi_x>`.
pub fn hadamard_overlaps(povm: &Povm) -> Vec<Vec<f64>> {
    let h = hadamard_states(povm.num_qubits()).expect("valid POVM size");
    povm.elements()
        .iter()
        .map(|e| {
            let rotated = h.adjoint() * e * &h;
            (0..povm.dim()).map(|x| rotated[(x, x)].re).collect()
        })
        .collect()
}

/// Map from a Hadamard string `x` to the outcome `f(x)` its guess is scored on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuessingFunction {
    table: Vec<usize>,
}

impl GuessingFunction {
    pub fn new(table: Vec<usize>) -> Result<Self> {
        let d = table.len();
        if d < 2 || !d.is_power_of_two() {
            return Err(invalid(format!(
                "guessing table must have 2^m entries, got {d}"
            )));
        }
        if let Some(bad) = table.iter().find(|&&o| o >= d) {
            return Err(invalid(format!("guessing table entry {bad} out of range")));
        }
        Ok(Self { table })
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::new((0..d).collect())
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn get(&self, x: usize) -> usize {
        self.table[x]
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.table.len()];
        self.table
            .iter()
            .all(|&o| !std::mem::replace(&mut seen[o], true))
    }
}

pub fn x_guessing_probability(povm: &Povm, guess: &GuessingFunction) -> Result<f64> {
    if guess.len() != povm.len() {
        return Err(invalid(format!(
            "guessing table has {} entries, POVM has {} outcomes",
            guess.len(),
            povm.len()
        )));
    }
    let overlaps = hadamard_overlaps(povm);
    Ok(x_guess_from_overlaps(&overlaps, guess.table()))
}

fn x_guess_from_overlaps(overlaps: &[Vec<f64>], table: &[usize]) -> f64 {
    let d = table.len();
    table
        .iter()
        .enumerate()
        .map(|(x, &o)| overlaps[o][x])
        .sum::<f64>()
        / d as f64
}

/// `f(x) = argmax_o <psi_x| M_o |psi_x>` independently for every `x`, which
/// maximizes `x_guess` exactly. Ties go to the smallest outcome.
pub fn best_guess_for_povm(povm: &Povm) -> GuessingFunction {
    let overlaps = hadamard_overlaps(povm);
    GuessingFunction {
        table: best_table_from_overlaps(&overlaps),
    }
}

fn best_table_from_overlaps(overlaps: &[Vec<f64>]) -> Vec<usize> {
    let d = overlaps.len();
    (0..d)
        .map(|x| {
            let mut best = 0;
            for o in 1..d {
                if overlaps[o][x] > overlaps[best][x] + TIE_TOL {
                    best = o;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodBadPartition {
    pub good: Vec<usize>,
    pub bad: Vec<usize>,
    pub epsilon: f64,
}

impl GoodBadPartition {
    pub fn is_good(&self, outcome: usize) -> bool {
        self.good.binary_search(&outcome).is_ok()
    }
}

/// Splits outcomes by `M_i[i,i] >= 1 - sqrt(eps)`. When the POVM meets
/// `z_success >= 1 - eps`, Markov's inequality forces `|bad| / D <= sqrt(eps)`;
/// a violation is reported as an internal-consistency error.
pub fn partition_good_bad(povm: &Povm, epsilon: f64) -> Result<GoodBadPartition> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(invalid(format!("epsilon must be in [0, 1], got {epsilon}")));
    }
    let threshold = 1.0 - epsilon.sqrt();
    let (good, bad): (Vec<usize>, Vec<usize>) =
        (0..povm.len()).partition(|&i| povm.element(i)[(i, i)].re >= threshold - GOOD_TOL);
    if z_success_probability(povm) >= 1.0 - epsilon {
        let frac = bad.len() as f64 / povm.len() as f64;
        if frac > epsilon.sqrt() + 1e-12 {
            return Err(Error::InternalConsistency(format!(
                "Markov bound violated: |B|/D = {frac} > sqrt(eps) = {}",
                epsilon.sqrt()
            )));
        }
    }
    Ok(GoodBadPartition { good, bad, epsilon })
}

/// The two partial sums of `x_guess`: over `x` with `f(x)` good and with `f(x)` bad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassSplit {
    pub good: f64,
    pub bad: f64,
}

pub fn good_bad_masses(
    povm: &Povm,
    guess: &GuessingFunction,
    partition: &GoodBadPartition,
) -> Result<MassSplit> {
    if guess.len() != povm.len() {
        return Err(invalid("guessing table and POVM sizes differ"));
    }
    let overlaps = hadamard_overlaps(povm);
    let d = povm.len() as f64;
    let mut split = MassSplit {
        good: 0.0,
        bad: 0.0,
    };
    for (x, &o) in guess.table().iter().enumerate() {
        let term = overlaps[o][x] / d;
        if partition.is_good(o) {
            split.good += term;
        } else {
            split.bad += term;
        }
    }
    Ok(split)
}

/// Product of single-qubit Breidbart measurements: each qubit is measured in
/// the basis `cos(pi/8)|0> + sin(pi/8)|1>`, `-sin(pi/8)|0> + cos(pi/8)|1>`,
/// halfway between Z and X.
pub fn breidbart_povm(m: usize) -> Result<Povm> {
    let (c, s) = (
        (std::f64::consts::PI / 8.0).cos(),
        (std::f64::consts::PI / 8.0).sin(),
    );
    let basis = CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(c, 0.0),
            C64::new(-s, 0.0),
            C64::new(s, 0.0),
            C64::new(c, 0.0),
        ],
    );
    Povm::from_orthonormal_columns(&basis)?.tensor_power(m)
}

/// The best attack found for one `(m, eps)`.
#[derive(Debug, Clone)]
pub struct AttackResult {
    pub m: usize,
    pub epsilon: f64,
    pub povm: Povm,
    pub guess: GuessingFunction,
    pub z_success: f64,
    pub x_guess: f64,
    pub bound: f64,
    pub converged: bool,
    /// Restart that produced the winner (0 for closed-form results).
    pub restart: usize,
    /// Markov checks run on visited POVMs that met the success premise.
    pub markov_checks: usize,
}

impl AttackResult {
    /// Builds a result from a POVM, choosing the optimal guessing table.
    pub fn from_povm(povm: Povm, epsilon: f64) -> Self {
        let guess = best_guess_for_povm(&povm);
        let overlaps = hadamard_overlaps(&povm);
        let x_guess = x_guess_from_overlaps(&overlaps, guess.table());
        let m = povm.num_qubits();
        AttackResult {
            m,
            epsilon,
            z_success: z_success_probability(&povm),
            x_guess,
            bound: theorem_bound(epsilon, m),
            guess,
            povm,
            converged: true,
            restart: 0,
            markov_checks: 0,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.z_success >= 1.0 - self.epsilon - 1e-9
    }

    /// A feasible attack beating the bound by more than [`FALSIFICATION_TOL`].
    pub fn falsifies_bound(&self) -> bool {
        self.is_feasible() && self.x_guess > self.bound + FALSIFICATION_TOL
    }

    /// Outcome-to-guess map for a party that sees the outcome and wants `x`:
    /// the inverse of `f` when `f` is a bijection, otherwise the `x`
    /// maximizing `<psi_x|M_o|psi_x>` per outcome.
    pub fn outcome_to_guess(&self) -> Vec<usize> {
        let d = self.povm.len();
        if self.guess.is_bijection() {
            let mut inv = vec![0; d];
            for (x, &o) in self.guess.table().iter().enumerate() {
                inv[o] = x;
            }
            return inv;
        }
        let overlaps = hadamard_overlaps(&self.povm);
        (0..d)
            .map(|o| {
                let mut best = 0;
                for x in 1..d {
                    if overlaps[o][x] > overlaps[o][best] + TIE_TOL {
                        best = x;
                    }
                }
                best
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const BREIDBART: f64 = 0.853_553_390_593_273_8; // cos^2(pi/8)

    #[test]
    fn theorem_bound_values() {
        assert_abs_diff_eq!(theorem_bound(0.0, 1), 0.5);
        assert_abs_diff_eq!(theorem_bound(0.0001, 2), 0.65, epsilon = 1e-12);
        assert_abs_diff_eq!(theorem_bound(1.0, 1), 4.5);
    }

    #[test]
    fn basis_povm_values() {
        for m in 1..=3 {
            let cb = Povm::computational_basis(m).unwrap();
            assert_abs_diff_eq!(z_success_probability(&cb), 1.0, epsilon = 1e-14);
            let f = best_guess_for_povm(&cb);
            assert!(f.table().iter().all(|&o| o == 0));
            let d = (1 << m) as f64;
            assert_abs_diff_eq!(
                x_guessing_probability(&cb, &f).unwrap(),
                1.0 / d,
                epsilon = 1e-14
            );
            let other = GuessingFunction::new((0..1 << m).rev().collect()).unwrap();
            assert_abs_diff_eq!(
                x_guessing_probability(&cb, &other).unwrap(),
                1.0 / d,
                epsilon = 1e-14
            );
            let uni = Povm::uniform(m).unwrap();
            assert_abs_diff_eq!(z_success_probability(&uni), 1.0 / d, epsilon = 1e-14);
            assert_abs_diff_eq!(
                x_guessing_probability(&uni, &f).unwrap(),
                1.0 / d,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn breidbart_single_qubit() {
        let b = breidbart_povm(1).unwrap();
        assert_abs_diff_eq!(z_success_probability(&b), BREIDBART, epsilon = 1e-12);
        let f = best_guess_for_povm(&b);
        assert_eq!(f.table(), &[0, 1]);
        assert_abs_diff_eq!(
            x_guessing_probability(&b, &f).unwrap(),
            BREIDBART,
            epsilon = 1e-12
        );
        let swapped = GuessingFunction::new(vec![1, 0]).unwrap();
        assert!(x_guessing_probability(&b, &swapped).unwrap() < 0.2);
    }

    #[test]
    fn hadamard_povm_guesses_perfectly() {
        let h = Povm::hadamard_basis(2).unwrap();
        let f = best_guess_for_povm(&h);
        assert_eq!(f.table(), &[0, 1, 2, 3]);
        assert_abs_diff_eq!(
            x_guessing_probability(&h, &f).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn partition_edge_cases() {
        let cb = Povm::computational_basis(2).unwrap();
        for eps in [0.0, 0.04, 0.5] {
            assert!(partition_good_bad(&cb, eps).unwrap().bad.is_empty());
        }
        let h = Povm::hadamard_basis(2).unwrap();
        assert_eq!(partition_good_bad(&h, 1.0).unwrap().good.len(), 4);
        assert_eq!(partition_good_bad(&h, 0.04).unwrap().bad.len(), 4);
        assert!(partition_good_bad(&h, 1.5).is_err());
    }

    #[test]
    fn outcome_guess_inverts_bijections() {
        let r = AttackResult::from_povm(breidbart_povm(2).unwrap(), 0.3);
        assert!(r.guess.is_bijection());
        assert_eq!(r.outcome_to_guess(), vec![0, 1, 2, 3]);
    }
}
