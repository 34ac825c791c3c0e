//! Independent reference searches over projective measurements.
//!
//! Used to cross-check the gradient optimizer: an exhaustive Bloch-sphere
//! grid for one qubit, and a derivative-free random search over orthonormal
//! bases for larger blocks. Both allow the same classical post-processing
//! the optimizer gets (mixing with the computational basis measurement, and
//! for one qubit, mixing two grid measurements).

use rand::Rng;
use rand_distr::StandardNormal;

use super::{
    best_table_from_overlaps, hadamard_overlaps, x_guess_from_overlaps, z_success_probability,
    AttackResult,
};
use crate::error::{invalid, Result};
use crate::qsim::{hermitian_eigen, CMatrix, Povm, C64};
use crate::rng::{derive_seed, from_seed};

/// Smallest accepted grid for [`brute_force_attack_m1`].
pub const MIN_GRID_POINTS: usize = 1000;

struct Candidate {
    povm: Povm,
    z: f64,
    x: f64,
}

impl Candidate {
    fn new(povm: Povm) -> Self {
        let overlaps = hadamard_overlaps(&povm);
        let x = x_guess_from_overlaps(&overlaps, &best_table_from_overlaps(&overlaps));
        Self {
            z: z_success_probability(&povm),
            x,
            povm,
        }
    }
}

fn mix(a: &Povm, b: &Povm, q: f64) -> Result<Povm> {
    let elements = a
        .elements()
        .iter()
        .zip(b.elements())
        .map(|(x, y)| x * C64::new(q, 0.0) + y * C64::new(1.0 - q, 0.0))
        .collect();
    Povm::new(elements)
}

/// Single-qubit projective measurements on a `(theta, phi)` Bloch grid, the
/// trivial measurements, and two-measurement mixtures on the constraint
/// boundary. Returns the best attack with `z_success >= 1 - eps`.
pub fn brute_force_attack_m1(epsilon: f64, grid_points: usize) -> Result<AttackResult> {
    if grid_points < MIN_GRID_POINTS {
        return Err(invalid(format!(
            "grid needs at least {MIN_GRID_POINTS} points"
        )));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(invalid(format!("epsilon must be in [0, 1], got {epsilon}")));
    }
    let side = (grid_points as f64).sqrt().ceil() as usize;
    let mut candidates = Vec::with_capacity(side * side + 3);
    for a in 0..side {
        let theta = std::f64::consts::PI * a as f64 / (side - 1) as f64;
        for b in 0..side {
            let phi = 2.0 * std::f64::consts::PI * b as f64 / side as f64;
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            let e = C64::from_polar(1.0, phi);
            let basis = CMatrix::from_row_slice(
                2,
                2,
                &[C64::new(c, 0.0), -e.conj() * s, e * s, C64::new(c, 0.0)],
            );
            candidates.push(Candidate::new(Povm::from_orthonormal_columns(&basis)?));
        }
    }
    let id = CMatrix::identity(2, 2);
    let zero = CMatrix::zeros(2, 2);
    for pair in [[id.clone(), zero.clone()], [zero, id.clone()]] {
        candidates.push(Candidate::new(Povm::new(pair.to_vec())?));
    }
    candidates.push(Candidate::new(Povm::uniform(1)?));

    let target = 1.0 - epsilon;
    let mut best: Option<(f64, Povm)> = None;
    let mut consider = |x: f64, povm: &Povm| {
        if best.as_ref().is_none_or(|(bx, _)| x > *bx) {
            best = Some((x, povm.clone()));
        }
    };
    for c in candidates.iter().filter(|c| c.z >= target) {
        consider(c.x, &c.povm);
    }
    // Mixtures only help across the boundary; restrict to the upper frontier.
    let frontier = pareto_frontier(&candidates);
    let (feasible, infeasible): (Vec<&Candidate>, Vec<&Candidate>) =
        frontier.into_iter().partition(|c| c.z >= target);
    for f in &feasible {
        for i in &infeasible {
            let q = (target - i.z) / (f.z - i.z);
            let mixed = Candidate::new(mix(&f.povm, &i.povm, q)?);
            if mixed.z >= target - 1e-12 {
                consider(mixed.x, &mixed.povm);
            }
        }
    }
    let (_, povm) = best.ok_or_else(|| invalid("no feasible measurement on the grid"))?;
    Ok(AttackResult::from_povm(povm, epsilon))
}

/// Candidates not dominated in both `z` and `x`.
fn pareto_frontier(cands: &[Candidate]) -> Vec<&Candidate> {
    let mut sorted: Vec<&Candidate> = cands.iter().collect();
    sorted.sort_by(|a, b| b.z.total_cmp(&a.z).then(b.x.total_cmp(&a.x)));
    let mut out = Vec::new();
    let mut best_x = f64::NEG_INFINITY;
    for c in sorted {
        if c.x > best_x + 1e-12 {
            best_x = c.x;
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveSearchConfig {
    pub restarts: usize,
    pub iterations: usize,
}

impl Default for ProjectiveSearchConfig {
    fn default() -> Self {
        Self {
            restarts: 16,
            iterations: 3000,
        }
    }
}

/// Random-walk search over orthonormal bases `U = exp(iH)`, scoring each
/// basis by its feasible value after mixing with the computational basis.
pub fn projective_search(
    m: usize,
    epsilon: f64,
    config: &ProjectiveSearchConfig,
    seed: u64,
) -> Result<AttackResult> {
    if m == 0 || m > 4 {
        return Err(invalid(format!(
            "projective search supports 1..=4 qubits, got {m}"
        )));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(invalid(format!("epsilon must be in [0, 1], got {epsilon}")));
    }
    let d = 1usize << m;
    let runs = crate::par::map_indexed(config.restarts.max(1), |r| -> Result<(f64, Povm)> {
        let mut rng = from_seed(derive_seed(seed, r as u64));
        let scale = if r == 0 {
            0.0
        } else {
            10f64.powf(rng.random_range(-1.5..0.5))
        };
        let mut params: Vec<f64> = (0..d * d)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut current = score(&params, d, epsilon)?;
        let mut step = 0.3;
        for _ in 0..config.iterations {
            let trial: Vec<f64> = params
                .iter()
                .map(|p| p + step * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let value = score(&trial, d, epsilon)?;
            if value.0 > current.0 {
                params = trial;
                current = value;
                step = (step * 1.5).min(1.0);
            } else {
                step = (step * 0.95).max(1e-5);
            }
        }
        Ok(current)
    });
    let mut best: Option<(f64, Povm)> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.0 > b.0) {
            best = Some(run);
        }
    }
    let (_, povm) = best.expect("at least one restart");
    Ok(AttackResult::from_povm(povm, epsilon))
}

fn unitary_from_params(params: &[f64], d: usize) -> CMatrix {
    let mut h = CMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        h[(i, i)] = C64::new(params[k], 0.0);
        k += 1;
        for j in i + 1..d {
            let v = C64::new(params[k], params[k + 1]);
            k += 2;
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
    }
    let (vals, vecs) = hermitian_eigen(&h);
    let phases = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        d,
        vals.iter().map(|&l| C64::from_polar(1.0, l)),
    ));
    &vecs * phases * vecs.adjoint()
}

/// Feasible value of the basis given by `params`, with the repaired POVM.
fn score(params: &[f64], d: usize, epsilon: f64) -> Result<(f64, Povm)> {
    let u = unitary_from_params(params, d);
    let povm = Povm::from_orthonormal_columns(&u)?;
    let z = z_success_probability(&povm);
    let target = 1.0 - epsilon;
    let povm = if z >= target {
        povm
    } else {
        let p = (target - z) / (1.0 - z);
        mix(
            &Povm::computational_basis(d.trailing_zeros() as usize)?,
            &povm,
            p,
        )?
    };
    let c = Candidate::new(povm);
    Ok((c.x, c.povm))
}
