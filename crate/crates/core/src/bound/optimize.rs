//! Constrained search for the strongest blockwise attack.
//!
//! Maximizes `x_guess` subject to `z_success >= 1 - eps` over POVMs written
//! as `M_o = A_o^dagger A_o`. Each iteration takes a gradient step on
//! `x_guess` minus an augmented-Lagrangian penalty on `v = 1 - eps - z_success`,
//! `(max(0, mu + 2 lambda v)^2 - mu^2) / (4 lambda)`, which is the plain
//! hinge `lambda * max(0, v)^2` at `mu = 0`. `lambda` rises geometrically and
//! `mu` is refreshed every few iterations. After each step completeness is
//! restored with `A_o <- A_o S^{-1/2}`, `S = sum_o A_o^dagger A_o`, and
//! the guessing table is re-solved exactly.
//! Infeasible iterates are made feasible by mixing in the computational
//! basis measurement, which raises `z_success` linearly.

use rand::Rng;

use super::{
    best_table_from_overlaps, hadamard_states, partition_good_bad, theorem_bound, AttackResult,
};
use crate::error::{invalid, Error, Result};
use crate::qsim::{psd_inverse_sqrt, random_ginibre, CMatrix, Povm, C64};
use crate::rng::{derive_seed, from_seed};

pub const MAX_OPTIMIZER_QUBITS: usize = 4;
/// Iterations between multiplier updates.
const MULTIPLIER_PERIOD: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    Analytic,
    /// Central differences over every real parameter; slow, for checking.
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub iterations: usize,
    pub restarts: usize,
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub gradient: GradientMode,
    pub fd_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            restarts: 8,
            lambda_start: 0.1,
            lambda_end: 1e4,
            gradient: GradientMode::Analytic,
            fd_step: 1e-6,
        }
    }
}

pub fn optimize_attack(
    m: usize,
    epsilon: f64,
    iterations: usize,
    restarts: usize,
    seed: u64,
) -> Result<AttackResult> {
    let config = OptimizerConfig {
        iterations,
        restarts,
        ..OptimizerConfig::default()
    };
    optimize_attack_with(m, epsilon, &config, seed)
}

pub fn optimize_attack_with(
    m: usize,
    epsilon: f64,
    config: &OptimizerConfig,
    seed: u64,
) -> Result<AttackResult> {
    if m == 0 || m > MAX_OPTIMIZER_QUBITS {
        return Err(invalid(format!(
            "optimizer supports 1..={MAX_OPTIMIZER_QUBITS} qubits, got {m}"
        )));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(invalid(format!("epsilon must be in [0, 1], got {epsilon}")));
    }
    if config.restarts == 0 || config.iterations == 0 {
        return Err(invalid(
            "optimizer needs at least one restart and one iteration",
        ));
    }
    if epsilon == 0.0 {
        // z_success = 1 forces M_z[z,z] = 1 for every z, and completeness
        // then leaves only the computational basis measurement.
        let mut r = AttackResult::from_povm(Povm::computational_basis(m)?, 0.0);
        r.markov_checks = 1;
        partition_good_bad(&r.povm, 0.0)?;
        return Ok(r);
    }
    let runs = crate::par::map_indexed(config.restarts, |r| {
        run_restart(m, epsilon, config, derive_seed(seed, r as u64), r)
    });
    let mut best: Option<AttackResult> = None;
    let mut checks = 0;
    for run in runs {
        let run = run?;
        checks += run.markov_checks;
        if best.as_ref().is_none_or(|b| run.x_guess > b.x_guess) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    best.markov_checks = checks;
    Ok(best)
}

/// Objective data fixed for one problem size.
struct Problem {
    d: usize,
    epsilon: f64,
    /// `|psi_x><psi_x|`
    hadamard_projectors: Vec<CMatrix>,
    hadamard: CMatrix,
}

impl Problem {
    fn new(m: usize, epsilon: f64) -> Result<Self> {
        let hadamard = hadamard_states(m)?;
        let d = 1 << m;
        let hadamard_projectors = (0..d)
            .map(|x| {
                let v = hadamard.column(x);
                v * v.adjoint()
            })
            .collect();
        Ok(Self {
            d,
            epsilon,
            hadamard_projectors,
            hadamard,
        })
    }

    /// `overlaps[o][x] = <psi_x|M_o|psi_x>`
    fn overlaps(&self, ms: &[CMatrix]) -> Vec<Vec<f64>> {
        ms.iter()
            .map(|e| {
                let r = self.hadamard.adjoint() * e * &self.hadamard;
                (0..self.d).map(|x| r[(x, x)].re).collect()
            })
            .collect()
    }

    fn z_success(&self, ms: &[CMatrix]) -> f64 {
        ms.iter()
            .enumerate()
            .map(|(z, e)| e[(z, z)].re)
            .sum::<f64>()
            / self.d as f64
    }

    fn x_guess(&self, overlaps: &[Vec<f64>], table: &[usize]) -> f64 {
        table
            .iter()
            .enumerate()
            .map(|(x, &o)| overlaps[o][x])
            .sum::<f64>()
            / self.d as f64
    }

    /// Signed constraint violation `1 - eps - z`; positive when infeasible.
    fn violation(&self, z: f64) -> f64 {
        1.0 - self.epsilon - z
    }

    /// `W_o` with `d/dA_o [sum_o Tr(A_o^dag A_o W_o)] = 2 A_o W_o`.
    fn weights(&self, table: &[usize], z: f64, penalty: Penalty) -> Vec<CMatrix> {
        let inv_d = 1.0 / self.d as f64;
        let pull = penalty.derivative(self.violation(z)) * inv_d;
        let mut w: Vec<CMatrix> = (0..self.d)
            .map(|o| {
                let mut m = CMatrix::zeros(self.d, self.d);
                m[(o, o)] = C64::new(pull, 0.0);
                m
            })
            .collect();
        for (x, &o) in table.iter().enumerate() {
            w[o] += &self.hadamard_projectors[x] * C64::new(inv_d, 0.0);
        }
        w
    }
}

fn gram(a: &[CMatrix]) -> Vec<CMatrix> {
    a.iter().map(|a| a.adjoint() * a).collect()
}

/// `A_o <- A_o S^{-1/2}`; returns the renormalized factors and their POVM.
fn renormalize(a: &[CMatrix]) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    let d = a[0].nrows();
    let mut s = CMatrix::zeros(d, d);
    for m in gram(a) {
        s += m;
    }
    let s_inv = psd_inverse_sqrt(&s)?;
    let a: Vec<CMatrix> = a.iter().map(|a| a * &s_inv).collect();
    let half = C64::new(0.5, 0.0);
    let ms = gram(&a)
        .into_iter()
        .map(|m| (&m + m.adjoint()) * half)
        .collect();
    Ok((a, ms))
}

/// Constraint penalty on the signed violation `v = 1 - eps - z_success`:
/// `(max(0, mu + 2 lambda v)^2 - mu^2) / (4 lambda)`. With `mu = 0` this is
/// the hinge penalty `lambda * max(0, v)^2`; `mu` is a multiplier estimate
/// that lets the iterates settle on the constraint instead of just outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub lambda: f64,
    pub mu: f64,
}

impl Penalty {
    pub fn hinge(lambda: f64) -> Self {
        Self { lambda, mu: 0.0 }
    }

    pub fn value(&self, violation: f64) -> f64 {
        let t = (self.mu + 2.0 * self.lambda * violation).max(0.0);
        (t * t - self.mu * self.mu) / (4.0 * self.lambda)
    }

    pub fn derivative(&self, violation: f64) -> f64 {
        (self.mu + 2.0 * self.lambda * violation).max(0.0)
    }

    /// First-order multiplier update.
    pub fn updated(&self, violation: f64) -> Self {
        Self {
            lambda: self.lambda,
            mu: self.derivative(violation),
        }
    }
}

/// `x_guess - penalty(1 - eps - z_success)` evaluated on the unnormalized
/// `M_o = A_o^dag A_o` with a fixed guessing table.
pub fn penalized_objective(
    a: &[CMatrix],
    table: &[usize],
    epsilon: f64,
    penalty: Penalty,
) -> Result<f64> {
    let m = checked_qubits(a)?;
    let p = Problem::new(m, epsilon)?;
    let ms = gram(a);
    let z = p.z_success(&ms);
    Ok(p.x_guess(&p.overlaps(&ms), table) - penalty.value(p.violation(z)))
}

/// Gradient of [`penalized_objective`] as complex matrices
/// `dJ/dRe(A) + i dJ/dIm(A)`.
pub fn analytic_gradient(
    a: &[CMatrix],
    table: &[usize],
    epsilon: f64,
    penalty: Penalty,
) -> Result<Vec<CMatrix>> {
    let m = checked_qubits(a)?;
    let p = Problem::new(m, epsilon)?;
    let z = p.z_success(&gram(a));
    let w = p.weights(table, z, penalty);
    Ok(a.iter()
        .zip(&w)
        .map(|(a, w)| a * w * C64::new(2.0, 0.0))
        .collect())
}

pub fn finite_difference_gradient(
    a: &[CMatrix],
    table: &[usize],
    epsilon: f64,
    penalty: Penalty,
    step: f64,
) -> Result<Vec<CMatrix>> {
    checked_qubits(a)?;
    let mut work: Vec<CMatrix> = a.to_vec();
    let mut grad: Vec<CMatrix> = a
        .iter()
        .map(|m| CMatrix::zeros(m.nrows(), m.ncols()))
        .collect();
    let d = a[0].nrows();
    for o in 0..a.len() {
        for i in 0..d {
            for j in 0..d {
                for (k, dir) in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)]
                    .into_iter()
                    .enumerate()
                {
                    let orig = work[o][(i, j)];
                    work[o][(i, j)] = orig + dir * step;
                    let plus = penalized_objective(&work, table, epsilon, penalty)?;
                    work[o][(i, j)] = orig - dir * step;
                    let minus = penalized_objective(&work, table, epsilon, penalty)?;
                    work[o][(i, j)] = orig;
                    let g = (plus - minus) / (2.0 * step);
                    if k == 0 {
                        grad[o][(i, j)].re = g;
                    } else {
                        grad[o][(i, j)].im = g;
                    }
                }
            }
        }
    }
    Ok(grad)
}

fn checked_qubits(a: &[CMatrix]) -> Result<usize> {
    let d = a.len();
    if d < 2 || !d.is_power_of_two() || a.iter().any(|m| m.nrows() != d || m.ncols() != d) {
        return Err(invalid("need 2^m square factors of size 2^m"));
    }
    Ok(d.trailing_zeros() as usize)
}

/// Removes the part of `grad` that only rescales the stacked isometry
/// `[A_0; A_1; ...]`, which renormalization would undo:
/// `G - A sym(sum_o A_o^dagger G_o)`.
fn project_tangent(a: &[CMatrix], grad: Vec<CMatrix>) -> Vec<CMatrix> {
    let d = a[0].nrows();
    let mut inner = CMatrix::zeros(d, d);
    for (a, g) in a.iter().zip(&grad) {
        inner += a.adjoint() * g;
    }
    let sym = (&inner + inner.adjoint()) * C64::new(0.5, 0.0);
    grad.into_iter().zip(a).map(|(g, a)| g - a * &sym).collect()
}

/// Feasible value reached by mixing `(z, x)` with the computational basis
/// measurement, and the mixing weight used.
fn repair(z: f64, x: f64, epsilon: f64, d: usize) -> (f64, f64) {
    if z >= 1.0 - epsilon {
        return (x, 0.0);
    }
    let p = (1.0 - epsilon - z) / (1.0 - z);
    ((1.0 - p) * x + p / d as f64, p)
}

fn mix_with_basis(ms: &[CMatrix], p: f64) -> Vec<CMatrix> {
    ms.iter()
        .enumerate()
        .map(|(o, m)| {
            let mut out = m * C64::new(1.0 - p, 0.0);
            out[(o, o)] += C64::new(p, 0.0);
            out
        })
        .collect()
}

fn run_restart(
    m: usize,
    epsilon: f64,
    config: &OptimizerConfig,
    seed: u64,
    restart: usize,
) -> Result<AttackResult> {
    let p = Problem::new(m, epsilon)?;
    let d = p.d;
    let mut rng = from_seed(seed);

    // Start near the basis measurement with a random amount of noise.
    let noise = 10f64.powf(rng.random_range(-2.0..0.0));
    let init: Vec<CMatrix> = (0..d)
        .map(|o| {
            let mut a = random_ginibre(d, &mut rng) * C64::new(noise, 0.0);
            a[(o, o)] += C64::new(1.0, 0.0);
            a
        })
        .collect();
    let (mut a, mut ms) = renormalize(&init)?;
    let mut overlaps = p.overlaps(&ms);
    let mut table = best_table_from_overlaps(&overlaps);

    let mut best_value = f64::NEG_INFINITY;
    let mut best_povm: Option<Vec<CMatrix>> = None;
    let mut best_at = 0;
    let mut markov_checks = 0;
    let mut step = 0.05;
    let ratio = config.lambda_end / config.lambda_start;
    let mut penalty = Penalty::hinge(config.lambda_start);

    let mut record =
        |ms: &[CMatrix], overlaps: &[Vec<f64>], table: &[usize], it: usize| -> Result<()> {
            let povm = Povm::new(ms.to_vec())?;
            let z = p.z_success(ms);
            let x = p.x_guess(overlaps, table);
            if z >= 1.0 - epsilon {
                partition_good_bad(&povm, epsilon)?;
                markov_checks += 1;
            }
            let (value, _) = repair(z, x, epsilon, d);
            if value > best_value + 1e-12 {
                best_value = value;
                best_povm = Some(ms.to_vec());
                best_at = it;
            }
            Ok(())
        };
    record(&ms, &overlaps, &table, 0)?;

    let iters = config.iterations;
    for it in 0..iters {
        let frac = if iters > 1 {
            it as f64 / (iters - 1) as f64
        } else {
            1.0
        };
        penalty.lambda = config.lambda_start * ratio.powf(frac);
        let z = p.z_success(&ms);
        if it > 0 && it % MULTIPLIER_PERIOD == 0 {
            penalty = penalty.updated(p.violation(z));
        }
        let current = p.x_guess(&overlaps, &table) - penalty.value(p.violation(z));
        let grad = match config.gradient {
            GradientMode::Analytic => {
                let w = p.weights(&table, z, penalty);
                a.iter()
                    .zip(&w)
                    .map(|(a, w)| a * w * C64::new(2.0, 0.0))
                    .collect::<Vec<_>>()
            }
            GradientMode::FiniteDifference => {
                // The factors are renormalized, so gram(a) == ms here.
                finite_difference_gradient(&a, &table, epsilon, penalty, config.fd_step)?
            }
        };
        let grad = project_tangent(&a, grad);
        let norm = grad.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt();
        if norm < 1e-14 {
            break;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let scale = C64::new(step / norm, 0.0);
            let trial: Vec<CMatrix> = a.iter().zip(&grad).map(|(a, g)| a + g * scale).collect();
            let (ta, tms) = renormalize(&trial)?;
            let toverlaps = p.overlaps(&tms);
            let ttable = best_table_from_overlaps(&toverlaps);
            let tz = p.z_success(&tms);
            let value = p.x_guess(&toverlaps, &ttable) - penalty.value(p.violation(tz));
            if value >= current {
                a = ta;
                ms = tms;
                overlaps = toverlaps;
                table = ttable;
                step = (step * 1.5).min(1.0);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Stalled at the current penalty; the next lambda may move us.
            step = 0.05;
            continue;
        }
        record(&ms, &overlaps, &table, it + 1)?;
    }

    let best = best_povm.ok_or_else(|| Error::Numeric("optimizer produced no iterate".into()))?;
    let z = p.z_success(&best);
    let mix = repair(z, 0.0, epsilon, d).1;
    let povm = Povm::new(mix_with_basis(&best, mix))?;
    let mut result = AttackResult::from_povm(povm, epsilon);
    if !result.is_feasible() {
        return Err(Error::Numeric(format!(
            "repaired attack still infeasible (z = {}, eps = {epsilon})",
            result.z_success
        )));
    }
    partition_good_bad(&result.povm, epsilon)?;
    result.markov_checks = markov_checks + 1;
    // Converged when the best value stopped moving over the final quarter.
    result.converged = best_at <= iters - iters / 4 || iters < 4;
    result.restart = restart;
    result.bound = theorem_bound(epsilon, m);
    Ok(result)
}
