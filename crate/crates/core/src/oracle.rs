//! The random oracle `H : [n] x {0,1}^m -> {0,1}^{m'}`.
//!
//! Two interchangeable modes: lazily sampled true randomness (answers drawn
//! from a seeded stream on first use and cached) and a concrete SHA-256
//! instantiation keyed by a 16-byte salt. Both log every query.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::rng::{self, Rng};

pub const SALT_LEN: usize = 16;

/// SHA-256 in counter mode: `SHA-256(part_0 || ... || ctr_le32)` blocks,
/// truncated to `out_len` bytes. With a single block and `ctr` omitted this
/// is plain truncated SHA-256, which is what the oracle uses.
pub fn hash_expand(parts: &[&[u8]], out_len: usize) -> Vec<u8> {
    if out_len <= 32 {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        return h.finalize()[..out_len].to_vec();
    }
    let mut out = Vec::with_capacity(out_len);
    let mut ctr = 0u32;
    while out.len() < out_len {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        h.update(ctr.to_le_bytes());
        out.extend_from_slice(&h.finalize());
        ctr += 1;
    }
    out.truncate(out_len);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMode {
    Lazy,
    Concrete,
}

/// One logged query. Positions are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub seq: u64,
    pub position: usize,
    pub input: u64,
    pub answer: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleTranscript {
    records: Vec<QueryRecord>,
}

impl OracleTranscript {
    pub fn records(&self) -> &[QueryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records appended after the first `mark` entries.
    pub fn since(&self, mark: usize) -> OracleTranscript {
        OracleTranscript {
            records: self.records[mark.min(self.records.len())..].to_vec(),
        }
    }

    pub fn contains(&self, position: usize, input: u64) -> bool {
        self.records
            .iter()
            .any(|r| r.position == position && r.input == input)
    }

    fn push(&mut self, position: usize, input: u64, answer: Vec<u8>) {
        let seq = self.records.last().map_or(0, |r| r.seq + 1);
        self.records.push(QueryRecord {
            seq,
            position,
            input,
            answer,
        });
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Lazy {
        rng: Box<Rng>,
        table: HashMap<(usize, u64), Vec<u8>>,
    },
    Concrete {
        salt: [u8; SALT_LEN],
    },
}

#[derive(Debug, Clone)]
pub struct OracleInstance {
    n: usize,
    m: usize,
    m_prime: usize,
    backend: Backend,
    transcript: OracleTranscript,
}

impl OracleInstance {
    pub fn lazy(n: usize, m: usize, m_prime: usize, seed: u64) -> Result<Self> {
        check_shape(n, m, m_prime)?;
        let backend = Backend::Lazy {
            rng: Box::new(rng::from_seed(seed)),
            table: HashMap::new(),
        };
        Ok(Self {
            n,
            m,
            m_prime,
            backend,
            transcript: OracleTranscript::default(),
        })
    }

    pub fn concrete(n: usize, m: usize, m_prime: usize, salt: [u8; SALT_LEN]) -> Result<Self> {
        check_shape(n, m, m_prime)?;
        if m_prime > 256 {
            return Err(invalid("concrete oracle output is at most 256 bits"));
        }
        let backend = Backend::Concrete { salt };
        Ok(Self {
            n,
            m,
            m_prime,
            backend,
            transcript: OracleTranscript::default(),
        })
    }

    pub fn mode(&self) -> OracleMode {
        match self.backend {
            Backend::Lazy { .. } => OracleMode::Lazy,
            Backend::Concrete { .. } => OracleMode::Concrete,
        }
    }

    pub fn salt(&self) -> Option<[u8; SALT_LEN]> {
        match &self.backend {
            Backend::Concrete { salt } => Some(*salt),
            Backend::Lazy { .. } => None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn m_prime(&self) -> usize {
        self.m_prime
    }

    pub fn output_bytes(&self) -> usize {
        self.m_prime / 8
    }

    /// `H(i, s)` for `1 <= i <= n` and an `m`-bit `s`; logged in the transcript.
    pub fn query(&mut self, position: usize, input: u64) -> Result<Vec<u8>> {
        if position == 0 || position > self.n {
            return Err(invalid(format!(
                "oracle position {position} outside 1..={}",
                self.n
            )));
        }
        if self.m < 64 && input >> self.m != 0 {
            return Err(invalid(format!(
                "oracle input {input} exceeds {} bits",
                self.m
            )));
        }
        let out_len = self.output_bytes();
        let answer = match &mut self.backend {
            Backend::Lazy { rng, table } => table
                .entry((position, input))
                .or_insert_with(|| {
                    let mut buf = vec![0u8; out_len];
                    rng.fill_bytes(&mut buf);
                    buf
                })
                .clone(),
            Backend::Concrete { salt } => {
                let s_bytes = input.to_be_bytes();
                let s_len = self.m.div_ceil(8);
                let encoded_s = &s_bytes[8 - s_len..];
                let pos = u32::try_from(position).map_err(|_| invalid("position exceeds u32"))?;
                hash_expand(&[salt, &pos.to_le_bytes(), encoded_s], out_len)
            }
        };
        self.transcript.push(position, input, answer.clone());
        Ok(answer)
    }

    pub fn transcript(&self) -> &OracleTranscript {
        &self.transcript
    }
}

fn check_shape(n: usize, m: usize, m_prime: usize) -> Result<()> {
    if n == 0 || n > u32::MAX as usize {
        return Err(invalid("oracle needs at least one position"));
    }
    if m == 0 || m > 64 {
        return Err(invalid(format!(
            "oracle input width must be in 1..=64, got {m}"
        )));
    }
    if m_prime == 0 || m_prime % 8 != 0 {
        return Err(invalid(format!(
            "oracle output width must be a positive multiple of 8, got {m_prime}"
        )));
    }
    Ok(())
}

/// Positions `i` in `theta` whose exact pair `(i, expected[i])` was queried.
pub fn transcript_positions_covered(
    transcript: &OracleTranscript,
    theta: &BTreeSet<usize>,
    expected: &BTreeMap<usize, u64>,
) -> BTreeSet<usize> {
    theta
        .iter()
        .copied()
        .filter(|i| expected.get(i).is_some_and(|&s| transcript.contains(*i, s)))
        .collect()
}
