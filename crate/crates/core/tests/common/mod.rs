//! Helpers shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use wiesner_otm::bound::z_success_probability;
use wiesner_otm::qsim::{random_ginibre, CMatrix, Povm, C64};
use wiesner_otm::rng::from_seed;

/// Optimizer values at the default sweep grid, m = 1 then m = 2, computed
/// by `tools/sdp_oracle.py` (a semidefinite program per guessing table,
/// maximized over all tables).
pub const SDP_OPTIMUM: [[f64; 9]; 2] = [
    [
        0.599498748,
        0.695959180,
        0.755147017,
        0.800000001,
        0.836303435,
        0.866606056,
        0.892300905,
        0.914246304,
        0.933012694,
    ],
    [
        0.341168441,
        0.439705632,
        0.505963798,
        0.559807622,
        0.606247318,
        0.647490157,
        0.684742550,
        0.718747822,
        0.750000000,
    ],
];

/// Closed-form m = 1 optimum: `1/2 + sqrt(1/4 - (1/2 - eps)^2)` for eps <= 1/2.
pub fn m1_optimum(eps: f64) -> f64 {
    0.5 + (0.25 - (0.5 - eps).powi(2)).sqrt()
}

/// Near-basis random POVM: `A_k = |k><k| + t W_k` with `t = 10^U(-4, 0)`
/// and `W_k = G_k G_k^dagger / 2D` (Ginibre `G_k`, so `E[W_k] = I`),
/// normalized to sum to the identity.
pub fn near_basis_povm<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Povm {
    let d = 1usize << m;
    let t = 10f64.powf(rng.random_range(-4.0..0.0));
    let parts = (0..d)
        .map(|k| {
            let g = random_ginibre(d, rng);
            let mut a = &g * g.adjoint() * C64::new(t / (2 * d) as f64, 0.0);
            a[(k, k)] += C64::new(1.0, 0.0);
            a
        })
        .collect();
    Povm::from_unnormalized(parts).expect("positive definite sum")
}

/// `count` good elements `(M_i, i)` drawn from near-basis POVMs that meet
/// `z_success >= 1 - eps`.
pub fn conforming_elements(m: usize, eps: f64, count: usize, seed: u64) -> Vec<(CMatrix, usize)> {
    let mut rng = from_seed(seed);
    let threshold = 1.0 - eps.sqrt();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let povm = near_basis_povm(m, &mut rng);
        if z_success_probability(&povm) < 1.0 - eps {
            continue;
        }
        for (i, e) in povm.elements().iter().enumerate() {
            if e[(i, i)].re >= threshold && out.len() < count {
                out.push((e.clone(), i));
            }
        }
    }
    out
}

/// Pearson chi-square p-value of `counts` against `probs`.
pub fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        let expected = p * total as f64;
        if expected > 0.0 {
            stat += (c as f64 - expected).powi(2) / expected;
            cells += 1;
        } else {
            assert_eq!(c, 0, "observed count in a zero-probability cell");
        }
    }
    if cells < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

/// Number of standard deviations between an observed binomial rate and `p`.
pub fn binomial_z(successes: usize, trials: usize, p: f64) -> f64 {
    let n = trials as f64;
    let sd = (p * (1.0 - p) / n).sqrt();
    (successes as f64 / n - p) / sd
}
