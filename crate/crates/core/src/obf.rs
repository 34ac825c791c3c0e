//! Conjunction obfuscation: a pattern over `{0, 1, *}` is hidden so that the
//! obfuscation only reveals whether an input matches, releasing a key on a
//! match.
//!
//! Backend: a random polynomial `p` of degree `N - 1` over GF(2^w). Position
//! `j` owns two evaluation points `e_{j,b} = 2(j + 1) + b`. A fixed bit `b`
//! publishes `p(e_{j,b})` next to a uniform decoy; a wildcard publishes both
//! true evaluations. Picking one share per position by the input bits and
//! interpolating at zero recovers `p(0)` exactly when every fixed bit agrees;
//! `p(0)` then opens a hash tag and unwraps the key.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gf::Field;
use crate::oracle::hash_expand;

pub const DEFAULT_FIELD_WIDTH: u32 = 64;
/// Smallest accepted key length in bits.
pub const MIN_LAMBDA: usize = 16;

const TAG_DOMAIN: &[u8] = b"obf-tag";
const KDF_DOMAIN: &[u8] = b"obf-kdf";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternEntry {
    Zero,
    One,
    Wildcard,
}

impl PatternEntry {
    pub fn fixed(bit: bool) -> Self {
        if bit {
            PatternEntry::One
        } else {
            PatternEntry::Zero
        }
    }

    pub fn is_fixed(self) -> bool {
        self != PatternEntry::Wildcard
    }

    pub fn accepts(self, bit: bool) -> bool {
        match self {
            PatternEntry::Zero => !bit,
            PatternEntry::One => bit,
            PatternEntry::Wildcard => true,
        }
    }
}

/// A conjunction: bit string with wildcards and at least one fixed position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pattern {
    entries: Vec<PatternEntry>,
}

impl Pattern {
    pub fn new(entries: Vec<PatternEntry>) -> Result<Self> {
        if !entries.iter().any(|e| e.is_fixed()) {
            return Err(invalid("pattern must have at least one fixed position"));
        }
        Ok(Self { entries })
    }

    /// Parses `0`, `1` and `*` characters.
    pub fn parse(s: &str) -> Result<Self> {
        let entries = s
            .chars()
            .map(|c| match c {
                '0' => Ok(PatternEntry::Zero),
                '1' => Ok(PatternEntry::One),
                '*' => Ok(PatternEntry::Wildcard),
                other => Err(invalid(format!("unexpected pattern character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn entries(&self) -> &[PatternEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_fixed(&self) -> usize {
        self.entries.iter().filter(|e| e.is_fixed()).count()
    }

    pub fn matches(&self, input: &[bool]) -> Result<bool> {
        if input.len() != self.len() {
            return Err(invalid(format!(
                "input has {} bits, pattern has {}",
                input.len(),
                self.len()
            )));
        }
        Ok(self.entries.iter().zip(input).all(|(e, &b)| e.accepts(b)))
    }
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.entries {
            let c = match e {
                PatternEntry::Zero => '0',
                PatternEntry::One => '1',
                PatternEntry::Wildcard => '*',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obfuscation {
    field: Field,
    lambda: usize,
    shares: Vec<[u64; 2]>,
    tag: Vec<u8>,
    wrapped_key: Vec<u8>,
}

/// Evaluation point of share `b` at position `j`.
pub fn evaluation_point(j: usize, bit: bool) -> u64 {
    2 * (j as u64 + 1) + bit as u64
}

/// Smallest field width accepted for a pattern of length `n`.
pub fn min_field_width(n: usize) -> u32 {
    let two_n = 2 * n.max(1) as u64;
    // ceil(log2(2N))
    let bits = 64 - (two_n - 1).leading_zeros();
    bits + 16
}

pub fn obf_conj(pattern: &Pattern, key: &[u8], field_width: u32, seed: u64) -> Result<Obfuscation> {
    let mut rng = crate::rng::from_seed(seed);
    obf_conj_with(pattern, key, field_width, &mut rng)
}

pub fn obf_conj_with<R: Rng + ?Sized>(
    pattern: &Pattern,
    key: &[u8],
    field_width: u32,
    rng: &mut R,
) -> Result<Obfuscation> {
    if pattern.num_fixed() == 0 {
        return Err(invalid("pattern must have at least one fixed position"));
    }
    let lambda = key.len() * 8;
    if lambda < MIN_LAMBDA || lambda > u16::MAX as usize {
        return Err(invalid(format!(
            "key length {lambda} bits outside {MIN_LAMBDA}..=65535"
        )));
    }
    let n = pattern.len();
    if n > u32::MAX as usize {
        return Err(invalid("pattern too long"));
    }
    let need = min_field_width(n);
    if field_width < need {
        return Err(invalid(format!(
            "field width {field_width} too small for pattern length {n} (need {need})"
        )));
    }
    let field = Field::new(field_width)?;

    let coeffs: Vec<u64> = (0..n).map(|_| field.random(rng)).collect();
    let mut points = Vec::with_capacity(2 * n);
    for (j, e) in pattern.entries().iter().enumerate() {
        match e {
            PatternEntry::Zero => points.push(evaluation_point(j, false)),
            PatternEntry::One => points.push(evaluation_point(j, true)),
            PatternEntry::Wildcard => {
                points.push(evaluation_point(j, false));
                points.push(evaluation_point(j, true));
            }
        }
    }
    let mut values = field.eval_poly_many(&coeffs, &points)?.into_iter();
    let mut next = || values.next().expect("one value per point");
    let mut shares = Vec::with_capacity(n);
    for e in pattern.entries() {
        let pair = match e {
            PatternEntry::Zero => [next(), field.random(rng)],
            PatternEntry::One => {
                let decoy = field.random(rng);
                [decoy, next()]
            }
            PatternEntry::Wildcard => {
                let v0 = next();
                [v0, next()]
            }
        };
        shares.push(pair);
    }

    let secret = field_bytes(&field, coeffs[0]);
    let tag = hash_expand(&[TAG_DOMAIN, &secret], key.len());
    let pad = hash_expand(&[KDF_DOMAIN, &secret], key.len());
    let wrapped_key = key.iter().zip(pad).map(|(k, p)| k ^ p).collect();
    Ok(Obfuscation {
        field,
        lambda,
        shares,
        tag,
        wrapped_key,
    })
}

/// Runs the obfuscated program: the key if `input` matches, `None` otherwise.
pub fn eval_conj(obf: &Obfuscation, input: &[bool]) -> Result<Option<Vec<u8>>> {
    if input.len() != obf.len() {
        return Err(invalid(format!(
            "input has {} bits, obfuscation expects {}",
            input.len(),
            obf.len()
        )));
    }
    let xs: Vec<u64> = input
        .iter()
        .enumerate()
        .map(|(j, &b)| evaluation_point(j, b))
        .collect();
    let ys: Vec<u64> = obf
        .shares
        .iter()
        .zip(input)
        .map(|(pair, &b)| pair[b as usize])
        .collect();
    let p0 = obf.field.interpolate_at_zero(&xs, &ys)?;
    let secret = field_bytes(&obf.field, p0);
    let tag = hash_expand(&[TAG_DOMAIN, &secret], obf.tag.len());
    if tag != obf.tag {
        return Ok(None);
    }
    let pad = hash_expand(&[KDF_DOMAIN, &secret], obf.wrapped_key.len());
    Ok(Some(
        obf.wrapped_key
            .iter()
            .zip(pad)
            .map(|(k, p)| k ^ p)
            .collect(),
    ))
}

fn field_bytes(field: &Field, a: u64) -> Vec<u8> {
    a.to_le_bytes()[..element_bytes(field.width())].to_vec()
}

fn element_bytes(width: u32) -> usize {
    width.div_ceil(8) as usize
}

impl Obfuscation {
    pub fn len(&self) -> usize {
        self.shares.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shares.is_empty()
    }

    pub fn field_width(&self) -> u32 {
        self.field.width()
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn shares(&self) -> &[[u64; 2]] {
        &self.shares
    }

    pub fn tag(&self) -> &[u8] {
        &self.tag
    }

    pub fn wrapped_key(&self) -> &[u8] {
        &self.wrapped_key
    }

    /// Size of the serialized form in bits.
    pub fn size_bits(&self) -> usize {
        self.to_bytes().len() * 8
    }

    /// `w: u8 | N: u32 | lambda: u16 | shares | tag | wrapped_key`, little-endian,
    /// each share in `ceil(w/8)` bytes, row-major `(sigma_{j,0}, sigma_{j,1})`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let eb = element_bytes(self.field.width());
        let mut out = Vec::with_capacity(7 + 2 * eb * self.len() + 2 * self.tag.len());
        out.push(self.field.width() as u8);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.lambda as u16).to_le_bytes());
        for pair in &self.shares {
            for v in pair {
                out.extend_from_slice(&v.to_le_bytes()[..eb]);
            }
        }
        out.extend_from_slice(&self.tag);
        out.extend_from_slice(&self.wrapped_key);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |msg: &str| Error::Decode(format!("obfuscation: {msg}"));
        if bytes.len() < 7 {
            return Err(err("truncated header"));
        }
        let width = bytes[0] as u32;
        let n = u32::from_le_bytes(bytes[1..5].try_into().expect("4 bytes")) as usize;
        let lambda = u16::from_le_bytes(bytes[5..7].try_into().expect("2 bytes")) as usize;
        if lambda < MIN_LAMBDA || lambda % 8 != 0 {
            return Err(err("bad key length"));
        }
        let field = Field::new(width).map_err(|_| err("bad field width"))?;
        let eb = element_bytes(width);
        let key_bytes = lambda / 8;
        let expected = n
            .checked_mul(2 * eb)
            .and_then(|s| s.checked_add(7 + 2 * key_bytes))
            .ok_or_else(|| err("length overflow"))?;
        if bytes.len() != expected {
            return Err(err("length does not match header"));
        }
        let mut shares = Vec::with_capacity(n);
        let mut at = 7;
        for _ in 0..n {
            let mut pair = [0u64; 2];
            for v in &mut pair {
                let mut buf = [0u8; 8];
                buf[..eb].copy_from_slice(&bytes[at..at + eb]);
                *v = u64::from_le_bytes(buf);
                if !field.contains(*v) {
                    return Err(err("share outside the field"));
                }
                at += eb;
            }
            shares.push(pair);
        }
        let tag = bytes[at..at + key_bytes].to_vec();
        let wrapped_key = bytes[at + key_bytes..].to_vec();
        Ok(Self {
            field,
            lambda,
            shares,
            tag,
            wrapped_key,
        })
    }
}

/// Counts from [`functionality_check`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FunctionalityReport {
    pub trials: usize,
    /// Matching inputs that returned the original key.
    pub match_ok: usize,
    /// Inputs with one fixed bit flipped that returned `None`.
    pub mismatch_rejected: usize,
    /// Mismatching inputs that returned any key.
    pub false_accepts: usize,
}

impl FunctionalityReport {
    pub fn all_passed(&self) -> bool {
        self.match_ok == self.trials
            && self.mismatch_rejected == self.trials
            && self.false_accepts == 0
    }
}

/// Random pattern of length `len`: each position is a wildcard with
/// probability 1/2, otherwise a uniform fixed bit; at least one is fixed.
pub fn random_pattern<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Pattern> {
    if len == 0 {
        return Err(invalid("pattern length must be positive"));
    }
    let mut entries: Vec<PatternEntry> = (0..len)
        .map(|_| {
            if rng.random::<bool>() {
                PatternEntry::Wildcard
            } else {
                PatternEntry::fixed(rng.random())
            }
        })
        .collect();
    if entries.iter().all(|e| !e.is_fixed()) {
        let j = rng.random_range(0..len);
        entries[j] = PatternEntry::fixed(rng.random());
    }
    Pattern::new(entries)
}

/// Obfuscates `trials` random (pattern, key) pairs and evaluates each on a
/// random matching input and on the same input with one fixed bit flipped.
pub fn functionality_check(
    len: usize,
    lambda: usize,
    field_width: u32,
    trials: usize,
    seed: u64,
) -> Result<FunctionalityReport> {
    if lambda % 8 != 0 {
        return Err(invalid(format!(
            "key length {lambda} must be a multiple of 8"
        )));
    }
    let runs = crate::par::map_indexed(trials, |t| -> Result<FunctionalityReport> {
        let mut rng = crate::rng::from_seed(crate::rng::derive_seed(seed, t as u64));
        let pattern = random_pattern(len, &mut rng)?;
        let mut key = vec![0u8; lambda / 8];
        rng.fill_bytes(&mut key);
        let input: Vec<bool> = pattern
            .entries()
            .iter()
            .map(|e| match e {
                PatternEntry::Zero => false,
                PatternEntry::One => true,
                PatternEntry::Wildcard => rng.random(),
            })
            .collect();
        let fixed: Vec<usize> = (0..len)
            .filter(|&j| pattern.entries()[j].is_fixed())
            .collect();
        let mut wrong = input.clone();
        let j = fixed[rng.random_range(0..fixed.len())];
        wrong[j] = !wrong[j];
        let obf = obf_conj_with(&pattern, &key, field_width, &mut rng)?;
        let good = eval_conj(&obf, &input)?;
        let bad = eval_conj(&obf, &wrong)?;
        Ok(FunctionalityReport {
            trials: 1,
            match_ok: (good.as_deref() == Some(&key[..])) as usize,
            mismatch_rejected: bad.is_none() as usize,
            false_accepts: bad.is_some() as usize,
        })
    });
    let mut total = FunctionalityReport::default();
    for r in runs {
        let r = r?;
        total.trials += r.trials;
        total.match_ok += r.match_ok;
        total.mismatch_rejected += r.mismatch_rejected;
        total.false_accepts += r.false_accepts;
    }
    Ok(total)
}
