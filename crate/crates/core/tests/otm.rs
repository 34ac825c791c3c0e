mod common;

use proptest::prelude::*;
use wiesner_otm::bits::xor_bytes;
use wiesner_otm::oracle::{transcript_positions_covered, OracleInstance};
use wiesner_otm::otm::{otm_eval, otm_prep, ClassicalToken, Params};
use wiesner_otm::qsim::{measure_in_basis, BasisLabel};
use wiesner_otm::rng::from_seed;
use wiesner_otm::Error;

use common::binomial_z;

fn small() -> Params {
    Params {
        lambda: 32,
        n: 4,
        m: 2,
        m_prime: 16,
    }
}

fn other(alpha: BasisLabel) -> BasisLabel {
    match alpha {
        BasisLabel::X => BasisLabel::Z,
        BasisLabel::Z => BasisLabel::X,
    }
}

/// `P[wrong-basis reuse opens]`: every block of the other basis must
/// re-measure to its secret, each independently with probability `2^-m`,
/// averaged over basis strings with both bases present.
fn predicted_reuse_rate(n: usize, m: usize) -> f64 {
    let q = 0.5f64.powi(m as i32);
    let all = (1.0 + q).powi(n as i32) - 1.0 - q.powi(n as i32);
    all / (2f64.powi(n as i32) - 2.0)
}

#[test]
fn params_validation() {
    assert!(Params::default().validate().is_ok());
    assert_eq!(
        Params::default(),
        Params {
            lambda: 128,
            n: 8,
            m: 6,
            m_prime: 64
        }
    );
    for bad in [
        Params { n: 1, ..small() },
        Params { m: 0, ..small() },
        Params {
            m_prime: 12,
            ..small()
        },
        Params {
            lambda: 8,
            ..small()
        },
        Params {
            lambda: 36,
            ..small()
        },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
}

#[test]
fn honest_evaluation_recovers_each_message() {
    let p = Params::default();
    let (m_x, m_z) = (vec![0x11; 16], vec![0x22; 16]);
    for t in 0..50 {
        for alpha in [BasisLabel::X, BasisLabel::Z] {
            let mut oracle = OracleInstance::lazy(p.n, p.m, p.m_prime, 1000 + t).unwrap();
            let (mut token, secret) = otm_prep(&p, &m_x, &m_z, &mut oracle, t).unwrap();
            let expected = if alpha == BasisLabel::X { &m_x } else { &m_z };
            assert_eq!(
                xor_bytes(secret.key(alpha), token.classical().ciphertext(alpha)).unwrap(),
                *expected
            );
            let mark = oracle.transcript().len();
            let got = otm_eval(&mut token, alpha, &mut oracle, t + 1).unwrap();
            assert_eq!(got.as_ref(), Some(expected));
            let covered = transcript_positions_covered(
                &oracle.transcript().since(mark),
                secret.theta(alpha),
                &secret.secret_map(),
            );
            assert_eq!(&covered, secret.theta(alpha));
        }
    }
}

#[test]
fn token_secret_is_consistent() {
    let p = Params::default();
    let mut oracle = OracleInstance::lazy(p.n, p.m, p.m_prime, 1).unwrap();
    for seed in 0..30 {
        let (token, secret) = otm_prep(&p, &[0; 16], &[0; 16], &mut oracle, seed).unwrap();
        assert_eq!(secret.theta_x.len() + secret.theta_z.len(), p.n);
        assert!(secret.theta_x.is_disjoint(&secret.theta_z));
        assert!(!secret.theta_x.is_empty() && !secret.theta_z.is_empty());
        for (i, b) in secret.bases.iter().enumerate() {
            assert!(secret.theta(*b).contains(&(i + 1)));
        }
        assert!(secret.secrets.iter().all(|&s| s < 1 << p.m));
        for alpha in [BasisLabel::X, BasisLabel::Z] {
            assert_eq!(token.classical().ciphertext(alpha), secret.key(alpha));
            let obf = token.classical().obfuscation(alpha);
            assert_eq!(obf.len(), p.n * p.m_prime);
            assert_eq!(obf.lambda(), p.lambda);
        }
        assert_eq!(token.blocks().len(), p.n);
    }
}

#[test]
fn preparation_is_deterministic() {
    let p = small();
    let run = |seed| {
        let mut oracle = OracleInstance::concrete(p.n, p.m, p.m_prime, [4; 16]).unwrap();
        let (token, secret) = otm_prep(&p, b"abcd", b"wxyz", &mut oracle, seed).unwrap();
        (token.classical().to_json().unwrap(), secret)
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3).0, run(4).0);
}

#[test]
fn classical_token_json_round_trip_and_reuse() {
    let p = Params::default();
    let mut oracle = OracleInstance::concrete(p.n, p.m, p.m_prime, [8; 16]).unwrap();
    let (mut token, _) = otm_prep(&p, &[1; 16], &[2; 16], &mut oracle, 5).unwrap();
    let json = token.classical().to_json().unwrap();
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    for key in ["params", "obf_x", "obf_z", "c_x", "c_z", "oracle_salt"] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
    assert_eq!(value["oracle_salt"], "08".repeat(16));
    let back = ClassicalToken::from_json(&json).unwrap();
    assert_eq!(&back, token.classical());
    // The decoded token still opens with a fresh oracle on the same salt.
    *token.classical_mut() = back;
    let mut fresh = OracleInstance::concrete(p.n, p.m, p.m_prime, [8; 16]).unwrap();
    assert_eq!(
        otm_eval(&mut token, BasisLabel::Z, &mut fresh, 0).unwrap(),
        Some(vec![2; 16])
    );

    let mut broken = value.clone();
    broken["c_x"] = serde_json::Value::String("00".into());
    assert!(ClassicalToken::from_json(&broken.to_string()).is_err());
}

#[test]
fn token_is_single_use() {
    let p = small();
    let mut oracle = OracleInstance::lazy(p.n, p.m, p.m_prime, 1).unwrap();
    let (mut token, _) = otm_prep(&p, b"abcd", b"wxyz", &mut oracle, 1).unwrap();
    otm_eval(&mut token, BasisLabel::X, &mut oracle, 1).unwrap();
    assert!(token.is_consumed());
    assert!(matches!(
        otm_eval(&mut token, BasisLabel::Z, &mut oracle, 1),
        Err(Error::TokenConsumed)
    ));
}

#[test]
fn collapse_makes_same_basis_remeasurement_deterministic() {
    let p = Params::default();
    let mut oracle = OracleInstance::lazy(p.n, p.m, p.m_prime, 2).unwrap();
    let (token, _) = otm_prep(&p, &[0; 16], &[0; 16], &mut oracle, 2).unwrap();
    let mut rng = from_seed(3);
    for alpha in [BasisLabel::X, BasisLabel::Z] {
        let mut first = token.clone_state();
        let outcomes = first
            .measure_blocks(|_, s| measure_in_basis(s, alpha, &mut rng))
            .unwrap();
        for _ in 0..5 {
            let mut again = first.clone_state();
            let repeat = again
                .measure_blocks(|_, s| measure_in_basis(s, alpha, &mut rng))
                .unwrap();
            assert_eq!(repeat, outcomes);
        }
    }
}

/// Counterfactual reuse: after an honest alpha evaluation, the collapsed
/// state is evaluated again in the other basis.
fn reuse_trial(p: &Params, alpha: BasisLabel, t: u64) -> (bool, bool, usize, usize) {
    let mut oracle = OracleInstance::lazy(p.n, p.m, p.m_prime, 10_000 + t).unwrap();
    let m_x = vec![0xA5; p.message_bytes()];
    let m_z = vec![0x5A; p.message_bytes()];
    let (mut token, secret) = otm_prep(p, &m_x, &m_z, &mut oracle, t).unwrap();
    let first = otm_eval(&mut token, alpha, &mut oracle, 20_000 + t).unwrap();
    let mut reused = token.clone_state();
    let mark = oracle.transcript().len();
    let beta = other(alpha);
    let second = otm_eval(&mut reused, beta, &mut oracle, 30_000 + t).unwrap();
    let expected = if beta == BasisLabel::X { &m_x } else { &m_z };
    let hits = transcript_positions_covered(
        &oracle.transcript().since(mark),
        secret.theta(beta),
        &secret.secret_map(),
    );
    let both_honest = first.is_some() && second.as_ref().is_none_or(|m| m == expected);
    (
        both_honest,
        second.is_some(),
        hits.len(),
        secret.theta(beta).len(),
    )
}

#[test]
fn wrong_basis_reuse_matches_the_collapse_prediction() {
    let p = small();
    let trials = 10_000;
    for alpha in [BasisLabel::X, BasisLabel::Z] {
        let mut opened = 0;
        let (mut hits, mut blocks) = (0, 0);
        for t in 0..trials {
            let (ok, second, h, b) = reuse_trial(&p, alpha, t as u64);
            assert!(ok);
            opened += second as usize;
            hits += h;
            blocks += b;
        }
        let predicted = predicted_reuse_rate(p.n, p.m);
        let z = binomial_z(opened, trials, predicted);
        assert!(z.abs() < 4.0, "{alpha:?}: {opened}/{trials} vs {predicted}");
        let z = binomial_z(hits, blocks, 0.25);
        assert!(z.abs() < 4.0, "{alpha:?}: per-block {hits}/{blocks}");
    }
}

#[test]
fn wrong_basis_reuse_at_desk_defaults_is_rare() {
    let p = Params::default();
    let trials = 1000;
    let opened = (0..trials)
        .filter(|&t| reuse_trial(&p, BasisLabel::X, t as u64).1)
        .count();
    // About 5e-4 per trial; 6 or more in 1000 would be a 1e-5 event.
    assert!(opened <= 5, "{opened} of {trials}");
    assert!((predicted_reuse_rate(8, 6) - 5.2e-4).abs() < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn honest_round_trip(
        n in 2usize..6,
        m in 1usize..5,
        m_prime_bytes in 1usize..5,
        seed in any::<u64>(),
        x_basis in any::<bool>(),
        msgs in prop::collection::vec(any::<u8>(), 8),
    ) {
        let p = Params { lambda: 32, n, m, m_prime: 8 * m_prime_bytes };
        let (m_x, m_z) = (&msgs[..4], &msgs[4..]);
        let alpha = if x_basis { BasisLabel::X } else { BasisLabel::Z };
        let mut oracle = OracleInstance::lazy(n, m, p.m_prime, seed ^ 1).unwrap();
        let (mut token, secret) = otm_prep(&p, m_x, m_z, &mut oracle, seed).unwrap();
        prop_assert_eq!(xor_bytes(secret.key(BasisLabel::X), &token.classical().c_x).unwrap(), m_x.to_vec());
        prop_assert_eq!(xor_bytes(secret.key(BasisLabel::Z), &token.classical().c_z).unwrap(), m_z.to_vec());
        let got = otm_eval(&mut token, alpha, &mut oracle, seed ^ 2).unwrap();
        prop_assert_eq!(got.as_deref(), Some(if x_basis { m_x } else { m_z }));
    }
}
