mod common;

use proptest::prelude::*;
use rand::{Rng, RngCore};
use wiesner_otm::gf::{find_irreducible, is_irreducible, Field};
use wiesner_otm::obf::{
    eval_conj, evaluation_point, functionality_check, min_field_width, obf_conj, obf_conj_with,
    random_pattern, Obfuscation, Pattern, PatternEntry,
};
use wiesner_otm::rng::from_seed;
use wiesner_otm::Error;

use common::chi_square_p;

/// Shift-and-add multiplication, one bit at a time.
fn reference_mul(width: u32, low: u64, a: u64, b: u64) -> u64 {
    let top = 1u64 << (width - 1);
    let mask = if width == 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    };
    let (mut a, mut b, mut r) = (a, b, 0u64);
    while b != 0 {
        if b & 1 == 1 {
            r ^= a;
        }
        let carry = a & top != 0;
        a = (a << 1) & mask;
        if carry {
            a ^= low;
        }
        b >>= 1;
    }
    r
}

#[test]
fn fixed_moduli() {
    assert_eq!(
        Field::new(32).unwrap().modulus_low(),
        (1 << 7) | (1 << 3) | (1 << 2) | 1
    );
    assert_eq!(
        Field::new(64).unwrap().modulus_low(),
        (1 << 4) | (1 << 3) | (1 << 1) | 1
    );
    for w in [8, 13, 16, 24, 32, 40, 63, 64] {
        let f = Field::new(w).unwrap();
        assert!(is_irreducible(w, f.modulus_low()), "w = {w}");
    }
    // x^8 + x^4 + x^3 + x + 1 is the smallest degree-8 irreducible above x^8 + 1.
    assert_eq!(find_irreducible(8), 0x1B);
    assert!(!is_irreducible(8, 0x01));
    assert!(Field::new(7).is_err());
    assert!(Field::new(65).is_err());
}

#[test]
fn multiplication_matches_shift_and_add() {
    let mut rng = from_seed(11);
    for w in [8, 16, 20, 32, 48, 64] {
        let f = Field::new(w).unwrap();
        for _ in 0..2000 {
            let (a, b) = (f.random(&mut rng), f.random(&mut rng));
            assert_eq!(
                f.mul(a, b),
                reference_mul(w, f.modulus_low(), a, b),
                "w = {w}"
            );
        }
    }
}

#[test]
fn inverses() {
    let mut rng = from_seed(12);
    for w in [8, 32, 64] {
        let f = Field::new(w).unwrap();
        let mut values = Vec::new();
        for _ in 0..10_000 {
            let a = f.random(&mut rng);
            if a == 0 {
                continue;
            }
            assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            values.push(a);
        }
        let batch = f.batch_inv(&values).unwrap();
        for (a, ia) in values.iter().zip(batch) {
            assert_eq!(f.mul(*a, ia), 1);
        }
        assert!(matches!(f.inv(0), Err(Error::InvalidArgument(_))));
        assert!(f.batch_inv(&[3, 0, 5]).is_err());
    }
}

#[test]
fn frobenius_fixes_the_field() {
    let f = Field::new(16).unwrap();
    let mut rng = from_seed(13);
    for _ in 0..100 {
        let a = f.random(&mut rng);
        assert_eq!(f.pow(a, 1 << 16), a);
    }
}

#[test]
fn interpolation_round_trips() {
    let mut rng = from_seed(14);
    for w in [32, 64] {
        let f = Field::new(w).unwrap();
        for n in [1, 2, 5, 17, 64] {
            let coeffs: Vec<u64> = (0..n).map(|_| f.random(&mut rng)).collect();
            let xs: Vec<u64> = (0..n).map(|j| evaluation_point(j, rng.random())).collect();
            let ys: Vec<u64> = xs.iter().map(|&x| f.eval_poly(&coeffs, x)).collect();
            assert_eq!(f.eval_poly_many(&coeffs, &xs).unwrap(), ys);
            assert_eq!(f.interpolate_at_zero(&xs, &ys).unwrap(), coeffs[0]);
            let points: Vec<(u64, u64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
            assert_eq!(f.lagrange_interpolate(&points).unwrap(), coeffs);
        }
        // Arbitrary points, not just share points.
        let points: Vec<(u64, u64)> = (0..12)
            .map(|k| (f.random(&mut rng) | 1 << k, f.random(&mut rng)))
            .collect();
        let coeffs = f.lagrange_interpolate(&points).unwrap();
        for &(x, y) in &points {
            assert_eq!(f.eval_poly(&coeffs, x), y);
        }
    }
}

#[test]
fn interpolation_rejects_repeated_points() {
    let f = Field::new(32).unwrap();
    assert!(f.interpolate_at_zero(&[2, 2], &[1, 1]).is_err());
    assert!(f.interpolate_at_zero(&[0, 3], &[1, 1]).is_err());
    assert!(f.interpolate_at_zero(&[], &[]).is_err());
}

#[test]
fn all_wildcard_pattern_rejected() {
    assert!(Pattern::parse("****").is_err());
    assert!(Pattern::new(vec![PatternEntry::Wildcard; 3]).is_err());
}

#[test]
fn all_fixed_pattern_releases_key() {
    let pattern = Pattern::parse("1011001110001111").unwrap();
    let input: Vec<bool> = "1011001110001111".chars().map(|c| c == '1').collect();
    let key = b"sixteen byte key".to_vec();
    let obf = obf_conj(&pattern, &key, 32, 1).unwrap();
    assert_eq!(eval_conj(&obf, &input).unwrap(), Some(key));
}

#[test]
fn wildcard_positions_are_ignored_and_fixed_ones_checked() {
    let pattern = Pattern::parse("1*0**1").unwrap();
    let key = [0xAB, 0xCD];
    let obf = obf_conj(&pattern, &key, 32, 2).unwrap();
    for bits in 0u32..64 {
        let input: Vec<bool> = (0..6).map(|j| bits >> (5 - j) & 1 == 1).collect();
        let got = eval_conj(&obf, &input).unwrap();
        if pattern.matches(&input).unwrap() {
            assert_eq!(got.as_deref(), Some(&key[..]));
        } else {
            assert_eq!(got, None, "input {bits:06b}");
        }
    }
    assert!(matches!(
        eval_conj(&obf, &[true; 5]),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn different_seeds_give_different_shares() {
    let pattern = Pattern::parse("10**1").unwrap();
    let a = obf_conj(&pattern, &[1, 2], 32, 7).unwrap();
    let b = obf_conj(&pattern, &[1, 2], 32, 8).unwrap();
    assert_ne!(a.shares(), b.shares());
    assert_eq!(obf_conj(&pattern, &[1, 2], 32, 7).unwrap(), a);
}

#[test]
fn field_width_and_key_length_checked() {
    let pattern = Pattern::parse("1").unwrap();
    assert!(obf_conj(&pattern, &[1], 32, 0).is_err());
    assert_eq!(min_field_width(512), 26);
    let long = Pattern::new(vec![PatternEntry::One; 512]).unwrap();
    assert!(obf_conj(&long, &[0; 2], 25, 0).is_err());
    assert!(obf_conj(&long, &[0; 2], 26, 0).is_ok());
}

#[test]
fn serialization_round_trips() {
    let mut rng = from_seed(15);
    for (len, w) in [(8, 32), (300, 64), (40, 24)] {
        let pattern = random_pattern(len, &mut rng).unwrap();
        let mut key = vec![0u8; 16];
        rng.fill_bytes(&mut key);
        let obf = obf_conj_with(&pattern, &key, w, &mut rng).unwrap();
        let bytes = obf.to_bytes();
        assert_eq!(bytes[0] as u32, w);
        assert_eq!(
            u32::from_le_bytes(bytes[1..5].try_into().unwrap()) as usize,
            len
        );
        assert_eq!(u16::from_le_bytes(bytes[5..7].try_into().unwrap()), 128);
        assert_eq!(Obfuscation::from_bytes(&bytes).unwrap(), obf);
        assert!(Obfuscation::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}

#[test]
fn size_is_linear_in_length_width_and_key() {
    let mut rng = from_seed(16);
    for (len, w, lambda) in [
        (64, 32, 128),
        (512, 64, 128),
        (512, 64, 256),
        (1000, 48, 64),
    ] {
        let pattern = random_pattern(len, &mut rng).unwrap();
        let obf = obf_conj_with(&pattern, &vec![7u8; lambda / 8], w, &mut rng).unwrap();
        assert_eq!(obf.tag().len() * 8, lambda);
        assert_eq!(obf.wrapped_key().len() * 8, lambda);
        // header, two shares per position, tag and wrapped key
        assert_eq!(obf.size_bits(), 56 + 2 * len * w as usize + 2 * lambda);
        assert!(obf.size_bits() <= 2 * (len * w as usize + lambda) + 56);
    }
}

#[test]
fn functionality_on_random_triples() {
    let report = functionality_check(128, 128, 64, 2000, 17).unwrap();
    assert!(report.all_passed(), "{report:?}");
}

/// Each share, binned by its low 4 bits across independent obfuscations of
/// one pattern, looks uniform whether or not its position is a wildcard.
#[test]
fn share_marginals_look_uniform() {
    let pattern = Pattern::parse("10**0*1*11*0***01").unwrap();
    let n = pattern.len();
    let obfs = 1000;
    let bins = 16;
    let mut counts = vec![[vec![0u64; bins], vec![0u64; bins]]; n];
    let mut rng = from_seed(18);
    for _ in 0..obfs {
        let obf = obf_conj_with(&pattern, &[9u8; 16], 64, &mut rng).unwrap();
        for (j, pair) in obf.shares().iter().enumerate() {
            for b in 0..2 {
                counts[j][b][(pair[b] & 0xF) as usize] += 1;
            }
        }
    }
    let probs = vec![1.0 / bins as f64; bins];
    // Family-wise level 0.01 over all 2n shares.
    let threshold = 0.01 / (2 * n) as f64;
    for (j, pair) in counts.iter().enumerate() {
        for (b, c) in pair.iter().enumerate() {
            let p = chi_square_p(c, &probs);
            assert!(
                p > threshold,
                "share ({j}, {b}) of {:?}: p = {p}",
                pattern.entries()[j]
            );
        }
    }
}

fn arb_pattern() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..3, 1..80)
        .prop_filter("needs a fixed entry", |v| v.iter().any(|&e| e < 2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matching_inputs_open_and_flipped_inputs_do_not(
        entries in arb_pattern(),
        free in prop::collection::vec(any::<bool>(), 80),
        key in prop::collection::vec(any::<u8>(), 2..20),
        flip in any::<prop::sample::Index>(),
        seed in any::<u64>(),
    ) {
        let entries: Vec<PatternEntry> = entries
            .iter()
            .map(|&e| match e { 0 => PatternEntry::Zero, 1 => PatternEntry::One, _ => PatternEntry::Wildcard })
            .collect();
        let pattern = Pattern::new(entries.clone()).unwrap();
        let input: Vec<bool> = entries
            .iter()
            .zip(&free)
            .map(|(e, &r)| match e { PatternEntry::Zero => false, PatternEntry::One => true, PatternEntry::Wildcard => r })
            .collect();
        let obf = obf_conj(&pattern, &key, 32, seed).unwrap();
        prop_assert_eq!(eval_conj(&obf, &input).unwrap(), Some(key.clone()));

        let fixed: Vec<usize> = (0..entries.len()).filter(|&j| entries[j].is_fixed()).collect();
        let mut wrong = input.clone();
        let j = fixed[flip.index(fixed.len())];
        wrong[j] = !wrong[j];
        prop_assert_eq!(eval_conj(&obf, &wrong).unwrap(), None);
    }

    #[test]
    fn field_axioms(a in any::<u64>(), b in any::<u64>(), c in any::<u64>(), w in 8u32..=64) {
        let f = Field::new(w).unwrap();
        let (a, b, c) = (a & f.mask(), b & f.mask(), c & f.mask());
        prop_assert_eq!(f.mul(a, b), f.mul(b, a));
        prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.mul(a, 1), a);
        prop_assert!(f.contains(f.mul(a, b)));
        prop_assert_eq!(f.square(a), f.mul(a, a));
    }
}
