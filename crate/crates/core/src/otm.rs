//! Token preparation and honest evaluation.
//!
//! A token for messages `(m_X, m_Z)` holds `n` Wiesner blocks of `m` qubits
//! with random bases `theta_i` and secrets `s_i`, two conjunction
//! obfuscations and two ciphertexts. The obfuscation for basis `alpha`
//! checks `H(i, x_i) = H(i, s_i)` on exactly the blocks prepared in `alpha`
//! and releases the key `k_alpha`, so measuring every block in `alpha`
//! opens `c_alpha = k_alpha ^ m_alpha`.

use std::collections::{BTreeMap, BTreeSet};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bits::{bytes_to_bits, xor_bytes};
use crate::error::{invalid, Error, Result};
use crate::obf::{
    eval_conj, obf_conj_with, Obfuscation, Pattern, PatternEntry, DEFAULT_FIELD_WIDTH,
};
use crate::oracle::{OracleInstance, SALT_LEN};
use crate::qsim::{measure_in_basis, wiesner_encode, BasisLabel, PureState, MAX_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Params {
    pub lambda: usize,
    pub n: usize,
    pub m: usize,
    pub m_prime: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            lambda: 128,
            n: 8,
            m: 6,
            m_prime: 64,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid(format!(
                "need at least 2 blocks, got n = {}",
                self.n
            )));
        }
        if self.m == 0 || self.m > MAX_QUBITS {
            return Err(invalid(format!(
                "m must be in 1..={MAX_QUBITS}, got {}",
                self.m
            )));
        }
        if self.m_prime == 0 || self.m_prime % 8 != 0 || self.m_prime > 256 {
            return Err(invalid(format!(
                "m' must be a multiple of 8 in 8..=256, got {}",
                self.m_prime
            )));
        }
        if self.lambda < crate::obf::MIN_LAMBDA
            || self.lambda % 8 != 0
            || self.lambda > u16::MAX as usize
        {
            return Err(invalid(format!(
                "lambda must be a multiple of 8 of at least {}, got {}",
                crate::obf::MIN_LAMBDA,
                self.lambda
            )));
        }
        if crate::obf::min_field_width(self.pattern_len()) > DEFAULT_FIELD_WIDTH {
            return Err(invalid("pattern too long for the obfuscator field"));
        }
        Ok(())
    }

    pub fn message_bytes(&self) -> usize {
        self.lambda / 8
    }

    /// Length in bits of the conjunction each obfuscation checks, `n * m'`.
    pub fn pattern_len(&self) -> usize {
        self.n * self.m_prime
    }
}

/// Preparation-time secrets, returned for instrumentation only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSecret {
    pub secrets: Vec<u64>,
    pub bases: Vec<BasisLabel>,
    /// 1-based block positions prepared in X.
    pub theta_x: BTreeSet<usize>,
    /// 1-based block positions prepared in Z.
    pub theta_z: BTreeSet<usize>,
    pub key_x: Vec<u8>,
    pub key_z: Vec<u8>,
    /// Number of basis draws rejected because one basis was empty.
    pub basis_resamples: usize,
}

impl TokenSecret {
    pub fn theta(&self, alpha: BasisLabel) -> &BTreeSet<usize> {
        match alpha {
            BasisLabel::X => &self.theta_x,
            BasisLabel::Z => &self.theta_z,
        }
    }

    pub fn key(&self, alpha: BasisLabel) -> &[u8] {
        match alpha {
            BasisLabel::X => &self.key_x,
            BasisLabel::Z => &self.key_z,
        }
    }

    /// Map from 1-based position to `s_i`.
    pub fn secret_map(&self) -> BTreeMap<usize, u64> {
        self.secrets
            .iter()
            .enumerate()
            .map(|(i, &s)| (i + 1, s))
            .collect()
    }
}

/// The classical part of a token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassicalToken {
    pub params: Params,
    pub obf_x: Obfuscation,
    pub obf_z: Obfuscation,
    pub c_x: Vec<u8>,
    pub c_z: Vec<u8>,
    pub oracle_salt: Option<[u8; SALT_LEN]>,
}

#[derive(Serialize, Deserialize)]
struct TokenJson {
    params: Params,
    obf_x: String,
    obf_z: String,
    c_x: String,
    c_z: String,
    oracle_salt: Option<String>,
}

impl ClassicalToken {
    pub fn obfuscation(&self, alpha: BasisLabel) -> &Obfuscation {
        match alpha {
            BasisLabel::X => &self.obf_x,
            BasisLabel::Z => &self.obf_z,
        }
    }

    pub fn ciphertext(&self, alpha: BasisLabel) -> &[u8] {
        match alpha {
            BasisLabel::X => &self.c_x,
            BasisLabel::Z => &self.c_z,
        }
    }

    pub fn set_ciphertext(&mut self, alpha: BasisLabel, c: Vec<u8>) {
        match alpha {
            BasisLabel::X => self.c_x = c,
            BasisLabel::Z => self.c_z = c,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let j = TokenJson {
            params: self.params,
            obf_x: BASE64.encode(self.obf_x.to_bytes()),
            obf_z: BASE64.encode(self.obf_z.to_bytes()),
            c_x: hex::encode(&self.c_x),
            c_z: hex::encode(&self.c_z),
            oracle_salt: self.oracle_salt.map(hex::encode),
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: TokenJson = serde_json::from_str(s)?;
        j.params.validate()?;
        let decode_b64 = |v: &str| BASE64.decode(v).map_err(|e| Error::Decode(e.to_string()));
        let decode_hex = |v: &str| hex::decode(v).map_err(|e| Error::Decode(e.to_string()));
        let oracle_salt = match j.oracle_salt {
            Some(h) => Some(
                <[u8; SALT_LEN]>::try_from(decode_hex(&h)?)
                    .map_err(|_| Error::Decode("salt must be 16 bytes".into()))?,
            ),
            None => None,
        };
        let token = Self {
            params: j.params,
            obf_x: Obfuscation::from_bytes(&decode_b64(&j.obf_x)?)?,
            obf_z: Obfuscation::from_bytes(&decode_b64(&j.obf_z)?)?,
            c_x: decode_hex(&j.c_x)?,
            c_z: decode_hex(&j.c_z)?,
            oracle_salt,
        };
        let mb = token.params.message_bytes();
        let n_bits = token.params.pattern_len();
        if token.c_x.len() != mb
            || token.c_z.len() != mb
            || token.obf_x.len() != n_bits
            || token.obf_z.len() != n_bits
        {
            return Err(Error::Decode(
                "token fields inconsistent with params".into(),
            ));
        }
        Ok(token)
    }
}

/// A token: simulated quantum blocks plus the classical part.
///
/// The blocks can be measured once; measurement replaces each block by its
/// post-measurement state and marks the token consumed.
#[derive(Debug, Clone)]
pub struct Token {
    classical: ClassicalToken,
    blocks: Vec<PureState>,
    consumed: bool,
}

impl Token {
    pub fn classical(&self) -> &ClassicalToken {
        &self.classical
    }

    pub fn classical_mut(&mut self) -> &mut ClassicalToken {
        &mut self.classical
    }

    pub fn params(&self) -> &Params {
        &self.classical.params
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// Current block states (post-measurement once consumed).
    pub fn blocks(&self) -> &[PureState] {
        &self.blocks
    }

    /// Measures every block with `measure(block_index, state)`, which returns
    /// an outcome and the post-measurement state. Fails on a consumed token.
    pub fn measure_blocks<F>(&mut self, mut measure: F) -> Result<Vec<u64>>
    where
        F: FnMut(usize, &PureState) -> Result<(usize, PureState)>,
    {
        if self.consumed {
            return Err(Error::TokenConsumed);
        }
        self.consumed = true;
        let mut outcomes = Vec::with_capacity(self.blocks.len());
        for (i, block) in self.blocks.iter_mut().enumerate() {
            let (outcome, post) = measure(i, block)?;
            *block = post;
            outcomes.push(outcome as u64);
        }
        Ok(outcomes)
    }

    /// Copies the current (possibly collapsed) block states into a fresh,
    /// unconsumed token.
    ///
    /// Physically impossible; exists only for counterfactual experiments
    /// such as evaluating the same state in a second basis.
    pub fn clone_state(&self) -> Token {
        Token {
            classical: self.classical.clone(),
            blocks: self.blocks.clone(),
            consumed: false,
        }
    }
}

fn check_oracle(params: &Params, oracle: &OracleInstance) -> Result<()> {
    if oracle.n() != params.n || oracle.m() != params.m || oracle.m_prime() != params.m_prime {
        return Err(invalid(format!(
            "oracle shape (n={}, m={}, m'={}) does not match params (n={}, m={}, m'={})",
            oracle.n(),
            oracle.m(),
            oracle.m_prime(),
            params.n,
            params.m,
            params.m_prime
        )));
    }
    Ok(())
}

/// Conjunction for basis `alpha`: the bits of `h_i` (most significant first)
/// on blocks prepared in `alpha`, wildcards elsewhere.
pub fn basis_pattern(
    bases: &[BasisLabel],
    hashes: &[Vec<u8>],
    alpha: BasisLabel,
    m_prime: usize,
) -> Result<Pattern> {
    let mut entries = Vec::with_capacity(bases.len() * m_prime);
    for (theta, h) in bases.iter().zip(hashes) {
        if *theta == alpha {
            entries.extend(bytes_to_bits(h).into_iter().map(PatternEntry::fixed));
        } else {
            entries.extend(std::iter::repeat_n(PatternEntry::Wildcard, m_prime));
        }
    }
    Pattern::new(entries)
}

pub fn otm_prep(
    params: &Params,
    m_x: &[u8],
    m_z: &[u8],
    oracle: &mut OracleInstance,
    seed: u64,
) -> Result<(Token, TokenSecret)> {
    params.validate()?;
    check_oracle(params, oracle)?;
    let mb = params.message_bytes();
    if m_x.len() != mb || m_z.len() != mb {
        return Err(invalid(format!("messages must be {} bits", params.lambda)));
    }
    let mut rng = crate::rng::from_seed(seed);

    let mut basis_resamples = 0;
    let bases = loop {
        let bases: Vec<BasisLabel> = (0..params.n)
            .map(|_| {
                if rng.random::<bool>() {
                    BasisLabel::X
                } else {
                    BasisLabel::Z
                }
            })
            .collect();
        if bases.contains(&BasisLabel::X) && bases.contains(&BasisLabel::Z) {
            break bases;
        }
        basis_resamples += 1;
    };
    let secret_mask = (1u64 << params.m) - 1;
    let secrets: Vec<u64> = (0..params.n)
        .map(|_| rng.random::<u64>() & secret_mask)
        .collect();
    let blocks = secrets
        .iter()
        .zip(&bases)
        .map(|(&s, &theta)| wiesner_encode(s, params.m, theta))
        .collect::<Result<Vec<_>>>()?;
    let hashes = secrets
        .iter()
        .enumerate()
        .map(|(i, &s)| oracle.query(i + 1, s))
        .collect::<Result<Vec<_>>>()?;

    let mut key_x = vec![0u8; mb];
    let mut key_z = vec![0u8; mb];
    rng.fill_bytes(&mut key_x);
    rng.fill_bytes(&mut key_z);
    let c_x = xor_bytes(&key_x, m_x)?;
    let c_z = xor_bytes(&key_z, m_z)?;

    let pattern_x = basis_pattern(&bases, &hashes, BasisLabel::X, params.m_prime)?;
    let pattern_z = basis_pattern(&bases, &hashes, BasisLabel::Z, params.m_prime)?;
    let obf_x = obf_conj_with(&pattern_x, &key_x, DEFAULT_FIELD_WIDTH, &mut rng)?;
    let obf_z = obf_conj_with(&pattern_z, &key_z, DEFAULT_FIELD_WIDTH, &mut rng)?;

    let positions = |alpha| {
        bases
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == alpha)
            .map(|(i, _)| i + 1)
            .collect()
    };
    let secret = TokenSecret {
        theta_x: positions(BasisLabel::X),
        theta_z: positions(BasisLabel::Z),
        secrets,
        bases,
        key_x,
        key_z,
        basis_resamples,
    };
    let classical = ClassicalToken {
        params: *params,
        obf_x,
        obf_z,
        c_x,
        c_z,
        oracle_salt: oracle.salt(),
    };
    Ok((
        Token {
            classical,
            blocks,
            consumed: false,
        },
        secret,
    ))
}

/// Queries `H(i, x_i)` for every block, runs the basis-`alpha` obfuscation
/// on the concatenated answers and unmasks `c_alpha` on success.
pub fn open_with_outcomes(
    token: &ClassicalToken,
    alpha: BasisLabel,
    outcomes: &[u64],
    oracle: &mut OracleInstance,
) -> Result<Option<Vec<u8>>> {
    check_oracle(&token.params, oracle)?;
    if outcomes.len() != token.params.n {
        return Err(invalid(format!(
            "expected {} outcomes, got {}",
            token.params.n,
            outcomes.len()
        )));
    }
    let mut input = Vec::with_capacity(token.params.pattern_len());
    for (i, &x) in outcomes.iter().enumerate() {
        input.extend(bytes_to_bits(&oracle.query(i + 1, x)?));
    }
    match eval_conj(token.obfuscation(alpha), &input)? {
        Some(key) => Ok(Some(xor_bytes(&key, token.ciphertext(alpha))?)),
        None => Ok(None),
    }
}

/// Honest evaluation: measure every block in `alpha`, then open `c_alpha`.
pub fn otm_eval(
    token: &mut Token,
    alpha: BasisLabel,
    oracle: &mut OracleInstance,
    seed: u64,
) -> Result<Option<Vec<u8>>> {
    check_oracle(token.params(), oracle)?;
    let mut rng = crate::rng::from_seed(seed);
    let outcomes = token.measure_blocks(|_, state| measure_in_basis(state, alpha, &mut rng))?;
    open_with_outcomes(&token.classical, alpha, &outcomes, oracle)
}
