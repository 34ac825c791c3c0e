use std::collections::{BTreeMap, BTreeSet, HashSet};

use proptest::prelude::*;
use sha2::{Digest, Sha256};
use wiesner_otm::oracle::{
    transcript_positions_covered, OracleInstance, OracleMode, OracleTranscript,
};
use wiesner_otm::Error;

#[test]
fn repeated_queries_agree() {
    for mut o in [
        OracleInstance::lazy(5, 8, 64, 3).unwrap(),
        OracleInstance::concrete(5, 8, 64, [1; 16]).unwrap(),
    ] {
        let a = o.query(4, 200).unwrap();
        assert_eq!(a.len(), 8);
        assert_eq!(o.query(4, 200).unwrap(), a);
        assert_ne!(o.query(4, 201).unwrap(), a);
        assert_ne!(o.query(3, 200).unwrap(), a);
        assert_eq!(o.transcript().len(), 4);
    }
}

#[test]
fn shape_and_range_checks() {
    let mut o = OracleInstance::lazy(3, 4, 16, 0).unwrap();
    assert!(matches!(o.query(0, 1), Err(Error::InvalidArgument(_))));
    assert!(matches!(o.query(4, 1), Err(Error::InvalidArgument(_))));
    assert!(matches!(o.query(1, 16), Err(Error::InvalidArgument(_))));
    assert!(o.transcript().is_empty());
    assert!(OracleInstance::lazy(0, 4, 16, 0).is_err());
    assert!(OracleInstance::lazy(3, 0, 16, 0).is_err());
    assert!(OracleInstance::lazy(3, 4, 12, 0).is_err());
    assert!(OracleInstance::concrete(3, 4, 264, [0; 16]).is_err());
    assert_eq!(o.mode(), OracleMode::Lazy);
    assert_eq!(o.salt(), None);
}

#[test]
fn concrete_mode_is_salted_sha256() {
    let salt: [u8; 16] = *b"0123456789abcdef";
    let mut o = OracleInstance::concrete(300, 20, 128, salt).unwrap();
    assert_eq!(o.mode(), OracleMode::Concrete);
    let got = o.query(258, 0xABCDE).unwrap();
    let mut expected = Sha256::new();
    expected.update(salt);
    expected.update([0x02, 0x01, 0x00, 0x00]);
    expected.update([0x0A, 0xBC, 0xDE]);
    assert_eq!(got, expected.finalize()[..16].to_vec());

    let mut same = OracleInstance::concrete(300, 20, 128, salt).unwrap();
    assert_eq!(same.query(258, 0xABCDE).unwrap(), got);
    let mut other = OracleInstance::concrete(300, 20, 128, [0; 16]).unwrap();
    assert_ne!(other.query(258, 0xABCDE).unwrap(), got);
}

#[test]
fn changing_the_salt_rerandomizes_every_answer() {
    let mut a = OracleInstance::concrete(4, 6, 64, [5; 16]).unwrap();
    let mut b = OracleInstance::concrete(4, 6, 64, [6; 16]).unwrap();
    for i in 1..=4 {
        for s in 0..64 {
            assert_ne!(a.query(i, s).unwrap(), b.query(i, s).unwrap());
        }
    }
}

#[test]
fn lazy_mode_is_seeded() {
    let mut a = OracleInstance::lazy(4, 6, 64, 9).unwrap();
    let mut b = OracleInstance::lazy(4, 6, 64, 9).unwrap();
    let mut c = OracleInstance::lazy(4, 6, 64, 10).unwrap();
    let qa: Vec<_> = (0..20)
        .map(|s| a.query(1 + s % 4, s as u64).unwrap())
        .collect();
    let qb: Vec<_> = (0..20)
        .map(|s| b.query(1 + s % 4, s as u64).unwrap())
        .collect();
    let qc: Vec<_> = (0..20)
        .map(|s| c.query(1 + s % 4, s as u64).unwrap())
        .collect();
    assert_eq!(qa, qb);
    assert_ne!(qa, qc);
}

/// Each output bit over 10^5 fresh inputs is within 4 sigma of 1/2.
#[test]
fn output_bits_are_balanced() {
    let samples = 100_000u64;
    for mut o in [
        OracleInstance::lazy(8, 20, 64, 21).unwrap(),
        OracleInstance::concrete(8, 20, 64, [21; 16]).unwrap(),
    ] {
        let mut ones = [0u64; 64];
        for q in 0..samples {
            let answer = o.query(1 + (q % 8) as usize, q / 8).unwrap();
            let word = u64::from_be_bytes(answer.try_into().unwrap());
            for (b, count) in ones.iter_mut().enumerate() {
                *count += word >> b & 1;
            }
        }
        let sd = (samples as f64 * 0.25).sqrt();
        for (b, &count) in ones.iter().enumerate() {
            let z = (count as f64 - samples as f64 / 2.0) / sd;
            assert!(z.abs() < 4.0, "{:?} bit {b}: z = {z}", o.mode());
        }
    }
}

#[test]
fn no_collisions_among_distinct_queries() {
    // Expected collisions: C(10^5, 2) / 2^64, about 3e-10.
    for mut o in [
        OracleInstance::lazy(10, 20, 64, 22).unwrap(),
        OracleInstance::concrete(10, 20, 64, [22; 16]).unwrap(),
    ] {
        let mut seen = HashSet::new();
        for q in 0..100_000u64 {
            assert!(seen.insert(o.query(1 + (q % 10) as usize, q / 10).unwrap()));
        }
    }
}

#[test]
fn transcript_is_an_ordered_log() {
    let mut o = OracleInstance::lazy(3, 4, 16, 1).unwrap();
    let calls = [(1, 3), (2, 3), (1, 3), (3, 15), (2, 0)];
    for (i, s) in calls {
        o.query(i, s).unwrap();
    }
    let t = o.transcript();
    assert_eq!(t.len(), calls.len());
    for (r, (i, s)) in t.records().iter().zip(calls) {
        assert_eq!((r.position, r.input), (i, s));
    }
    assert!(t.records().windows(2).all(|w| w[0].seq < w[1].seq));
    assert_eq!(t.records()[0].answer, t.records()[2].answer);
    let tail = t.since(3);
    assert_eq!(tail.len(), 2);
    assert_eq!(tail.records()[0].position, 3);
    assert!(t.since(99).is_empty());
}

#[test]
fn coverage_needs_the_exact_pair() {
    let mut o = OracleInstance::lazy(4, 4, 16, 1).unwrap();
    let theta: BTreeSet<usize> = [1, 3, 4].into();
    let expected: BTreeMap<usize, u64> = [(1, 5), (2, 6), (3, 7), (4, 8)].into();
    assert!(
        transcript_positions_covered(&OracleTranscript::default(), &theta, &expected).is_empty()
    );
    o.query(1, 5).unwrap();
    o.query(2, 6).unwrap();
    o.query(3, 6).unwrap();
    o.query(4, 8).unwrap();
    let covered = transcript_positions_covered(o.transcript(), &theta, &expected);
    assert_eq!(covered, [1, 4].into());
}

proptest! {
    #[test]
    fn lazy_answers_are_consistent(queries in prop::collection::vec((1usize..=6, 0u64..32), 1..60), seed in any::<u64>()) {
        let mut o = OracleInstance::lazy(6, 5, 32, seed).unwrap();
        let mut first = BTreeMap::new();
        for (i, s) in queries.iter().copied() {
            let a = o.query(i, s).unwrap();
            prop_assert_eq!(a.len(), 4);
            prop_assert_eq!(first.entry((i, s)).or_insert_with(|| a.clone()).clone(), a);
        }
        prop_assert_eq!(o.transcript().len(), queries.len());
    }
}
