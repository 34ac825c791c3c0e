//! Classical-query attackers and the one-time security game.
//!
//! A trial prepares a fresh token under a fresh lazily-sampled oracle, lets
//! a [`Strategy`] measure the blocks and query `H(i, x_i)` for its candidate
//! strings, and then tries to open both conjunctions. The referee keeps the
//! preparation secrets and scores the trial as a [`GameRecord`].
//!
//! The simulator view ([`run_simulator`]) is the real view with `c_abar`
//! replaced by fresh uniform bytes, where the message for `alpha` comes from
//! a one-shot [`MessageOracle`]. [`distinguishing_experiment`] runs real and
//! simulated views on matched seeds and compares a fixed classical statistic
//! of the outcome.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};

use crate::bound::{
    breidbart_povm, hadamard_overlaps, optimize_attack_with, AttackResult, OptimizerConfig,
};
use crate::error::{invalid, Error, Result};
use crate::oracle::{transcript_positions_covered, OracleInstance, OracleTranscript};
use crate::otm::{open_with_outcomes, otm_prep, Params, Token, TokenSecret};
use crate::qsim::{measure_in_basis, BasisLabel, Povm, SubsystemMeasurement};
use crate::rng::{derive_labeled, derive_seed, from_seed};

/// Header of the attack CSV.
pub const ATTACK_HEADER: [&str; 10] = [
    "strategy",
    "n",
    "m",
    "trials",
    "p_mx",
    "p_mz",
    "p_both",
    "mean_cov_conj",
    "tv_estimate",
    "seed",
];

/// Default design tolerance for [`Behavior::PerBlockOptimal`].
pub const DEFAULT_OPTIMAL_EPSILON: f64 = 0.1;
/// Bootstrap resamples behind the TV confidence interval.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Basis-vote ties within this margin go to X.
const VOTE_TOL: f64 = 1e-12;

const LABEL_ORACLE: u64 = 1;
const LABEL_PREP: u64 = 2;
const LABEL_ADVERSARY: u64 = 3;
const LABEL_SIMULATOR: u64 = 4;
const LABEL_MESSAGES: u64 = 5;
const LABEL_BOOTSTRAP: u64 = 6;

/// A blockwise measurement with a guess for each basis per outcome.
///
/// The full-block POVM is a tensor power of a measurement on `group_qubits`
/// qubits, applied group by group so the simulation stays cheap.
#[derive(Debug, Clone)]
pub struct BlockAttack {
    result: AttackResult,
    group: SubsystemMeasurement,
    group_qubits: usize,
    x_guess: Vec<u64>,
    votes: Vec<BasisLabel>,
}

impl BlockAttack {
    /// Builds the attack from a measurement on `group.num_qubits()` qubits
    /// repeated across an `m`-qubit block.
    pub fn from_group_povm(group: Povm, m: usize) -> Result<Self> {
        let k = group.num_qubits();
        if k == 0 || m % k != 0 {
            return Err(invalid(format!(
                "group of {k} qubits does not tile a {m}-qubit block"
            )));
        }
        let full = group.tensor_power(m / k)?;
        let z = crate::bound::z_success_probability(&full);
        let result = AttackResult::from_povm(full, (1.0 - z).max(0.0));
        let x_guess = result
            .outcome_to_guess()
            .into_iter()
            .map(|x| x as u64)
            .collect();
        let overlaps = hadamard_overlaps(&result.povm);
        let votes = result
            .povm
            .elements()
            .iter()
            .zip(&overlaps)
            .map(|(e, ov)| {
                let z_conf = (0..e.nrows())
                    .map(|i| e[(i, i)].re)
                    .fold(f64::MIN, f64::max);
                let x_conf = ov.iter().copied().fold(f64::MIN, f64::max);
                if x_conf >= z_conf - VOTE_TOL {
                    BasisLabel::X
                } else {
                    BasisLabel::Z
                }
            })
            .collect();
        Ok(Self {
            result,
            group: SubsystemMeasurement::new(group),
            group_qubits: k,
            x_guess,
            votes,
        })
    }

    /// The per-qubit Breidbart measurement on every qubit.
    pub fn breidbart(m: usize) -> Result<Self> {
        Self::from_group_povm(breidbart_povm(1)?, m)
    }

    /// Optimizes a `group_qubits`-qubit attack at `epsilon` and tiles it.
    pub fn optimal(
        m: usize,
        group_qubits: usize,
        epsilon: f64,
        config: &OptimizerConfig,
        seed: u64,
    ) -> Result<Self> {
        let group = optimize_attack_with(group_qubits, epsilon, config, seed)?;
        Self::from_group_povm(group.povm, m)
    }

    /// Full-block attack statistics (the `epsilon` field is `1 - z_success`).
    pub fn result(&self) -> &AttackResult {
        &self.result
    }

    pub fn group_qubits(&self) -> usize {
        self.group_qubits
    }

    /// The guess for `basis` given full-block outcome `o`.
    pub fn guess(&self, basis: BasisLabel, o: u64) -> u64 {
        match basis {
            BasisLabel::Z => o,
            BasisLabel::X => self.x_guess[o as usize],
        }
    }

    /// Basis under which outcome `o` identifies the secret more confidently.
    pub fn vote(&self, o: u64) -> BasisLabel {
        self.votes[o as usize]
    }

    /// Probability that the `basis` guess is right on a block prepared in
    /// `basis` with a uniform secret.
    pub fn predicted_hit_rate(&self, basis: BasisLabel) -> f64 {
        let d = self.result.povm.dim() as f64;
        match basis {
            BasisLabel::Z => self.result.z_success,
            BasisLabel::X => {
                let ov = hadamard_overlaps(&self.result.povm);
                ov.iter()
                    .enumerate()
                    .map(|(o, row)| row[self.x_guess[o] as usize])
                    .sum::<f64>()
                    / d
            }
        }
    }

    fn measure<R: Rng + ?Sized>(&self, token: &mut Token, rng: &mut R) -> Result<Vec<u64>> {
        let m = token.params().m;
        let k = self.group_qubits;
        token.measure_blocks(|_, state| {
            let mut state = state.clone();
            let mut outcome = 0usize;
            for offset in (0..m).step_by(k) {
                let (o, post) = self.group.measure(&state, offset, rng)?;
                outcome = (outcome << k) | o;
                state = post;
            }
            Ok((outcome, state))
        })
    }
}

#[derive(Debug, Clone)]
pub enum Behavior {
    /// Measure every block in X, use the outcomes as both candidate strings.
    HonestX,
    /// Measure every block in Z, use the outcomes as both candidate strings.
    HonestZ,
    BreidbartAll(Box<BlockAttack>),
    /// A tiled optimizer attack designed at the given tolerance.
    PerBlockOptimal {
        epsilon: f64,
        attack: Box<BlockAttack>,
    },
    /// No measurement; uniform candidate strings.
    RandomGuess,
    /// Reads `c_X`, `c_Z` and stops. No measurement, no queries.
    CiphertextReader,
    /// Outputs nothing and never touches the token or the oracle.
    Constant,
}

#[derive(Debug, Clone)]
pub struct Strategy {
    pub name: String,
    pub behavior: Behavior,
}

/// Names accepted by [`Strategy::from_name`].
pub const STRATEGY_NAMES: [&str; 7] = [
    "honest-x",
    "honest-z",
    "breidbart",
    "optimal",
    "random",
    "reader",
    "constant",
];

impl Strategy {
    pub fn honest(alpha: BasisLabel) -> Self {
        match alpha {
            BasisLabel::X => Self {
                name: "honest-x".into(),
                behavior: Behavior::HonestX,
            },
            BasisLabel::Z => Self {
                name: "honest-z".into(),
                behavior: Behavior::HonestZ,
            },
        }
    }

    pub fn breidbart(m: usize) -> Result<Self> {
        Ok(Self {
            name: "breidbart".into(),
            behavior: Behavior::BreidbartAll(Box::new(BlockAttack::breidbart(m)?)),
        })
    }

    /// Optimizer attack on groups of `group_qubits` qubits, tiled over `m`.
    pub fn per_block_optimal(
        m: usize,
        group_qubits: usize,
        epsilon: f64,
        config: &OptimizerConfig,
        seed: u64,
    ) -> Result<Self> {
        let attack = BlockAttack::optimal(m, group_qubits, epsilon, config, seed)?;
        Ok(Self {
            name: "optimal".into(),
            behavior: Behavior::PerBlockOptimal {
                epsilon,
                attack: Box::new(attack),
            },
        })
    }

    pub fn random_guess() -> Self {
        Self {
            name: "random".into(),
            behavior: Behavior::RandomGuess,
        }
    }

    pub fn ciphertext_reader() -> Self {
        Self {
            name: "reader".into(),
            behavior: Behavior::CiphertextReader,
        }
    }

    pub fn constant() -> Self {
        Self {
            name: "constant".into(),
            behavior: Behavior::Constant,
        }
    }

    /// Builds a strategy by CLI name. `optimal` tiles a group of
    /// [`default_group_qubits`] qubits designed at `epsilon`.
    pub fn from_name(
        name: &str,
        params: &Params,
        epsilon: f64,
        config: &OptimizerConfig,
        seed: u64,
    ) -> Result<Self> {
        match name {
            "honest-x" => Ok(Self::honest(BasisLabel::X)),
            "honest-z" => Ok(Self::honest(BasisLabel::Z)),
            "breidbart" => Self::breidbart(params.m),
            "optimal" => Self::per_block_optimal(
                params.m,
                default_group_qubits(params.m),
                epsilon,
                config,
                seed,
            ),
            "random" => Ok(Self::random_guess()),
            "reader" => Ok(Self::ciphertext_reader()),
            "constant" => Ok(Self::constant()),
            other => Err(invalid(format!(
                "unknown strategy {other:?}; expected one of {}",
                STRATEGY_NAMES.join(", ")
            ))),
        }
    }

    fn block_attack(&self) -> Option<&BlockAttack> {
        match &self.behavior {
            Behavior::BreidbartAll(a) | Behavior::PerBlockOptimal { attack: a, .. } => Some(a),
            _ => None,
        }
    }

    /// Block size the strategy was built for, if it depends on one.
    pub fn block_qubits(&self) -> Option<usize> {
        self.block_attack().map(|a| a.result.m)
    }

    fn check(&self, params: &Params) -> Result<()> {
        match self.block_qubits() {
            Some(m) if m != params.m => Err(invalid(format!(
                "strategy {} was built for m={m}, token has m={}",
                self.name, params.m
            ))),
            _ => Ok(()),
        }
    }
}

/// Largest optimizer-sized group (at most 2 qubits) that tiles `m`.
pub fn default_group_qubits(m: usize) -> usize {
    if m % 2 == 0 {
        2
    } else {
        1
    }
}

/// The message functionality `b -> m_b`, answerable once.
#[derive(Debug, Clone)]
pub struct MessageOracle {
    m_x: Vec<u8>,
    m_z: Vec<u8>,
    query_count: usize,
}

impl MessageOracle {
    pub fn new(m_x: Vec<u8>, m_z: Vec<u8>) -> Self {
        Self {
            m_x,
            m_z,
            query_count: 0,
        }
    }

    pub fn query(&mut self, alpha: BasisLabel) -> Result<Vec<u8>> {
        if self.query_count >= 1 {
            return Err(Error::ContractViolation(
                "message oracle already queried".into(),
            ));
        }
        self.query_count += 1;
        Ok(match alpha {
            BasisLabel::X => self.m_x.clone(),
            BasisLabel::Z => self.m_z.clone(),
        })
    }

    pub fn query_count(&self) -> usize {
        self.query_count
    }
}

/// What the adversary is handed: the token and oracle access. The
/// preparation secrets stay with the referee.
#[derive(Debug)]
pub struct View {
    pub token: Token,
    pub oracle: OracleInstance,
    secret: TokenSecret,
}

impl View {
    pub fn secret(&self) -> &TokenSecret {
        &self.secret
    }
}

struct TrialSeeds {
    oracle: u64,
    prep: u64,
    adversary: u64,
    simulator: u64,
}

impl TrialSeeds {
    fn new(seed: u64) -> Self {
        Self {
            oracle: derive_labeled(seed, 0, LABEL_ORACLE),
            prep: derive_labeled(seed, 0, LABEL_PREP),
            adversary: derive_labeled(seed, 0, LABEL_ADVERSARY),
            simulator: derive_labeled(seed, 0, LABEL_SIMULATOR),
        }
    }
}

/// Honest token preparation under a fresh lazily-sampled oracle.
pub fn real_view(params: &Params, m_x: &[u8], m_z: &[u8], rng_seed: u64) -> Result<View> {
    let seeds = TrialSeeds::new(rng_seed);
    let mut oracle = OracleInstance::lazy(params.n, params.m, params.m_prime, seeds.oracle)?;
    let (token, secret) = otm_prep(params, m_x, m_z, &mut oracle, seeds.prep)?;
    Ok(View {
        token,
        oracle,
        secret,
    })
}

/// The simulator: one query `m_alpha <- g(alpha)`, preparation exactly as in
/// [`real_view`] (same seeds, placeholder for the unknown message), then
/// `c_abar` replaced by fresh uniform bytes.
pub fn run_simulator(
    params: &Params,
    msg_oracle: &mut MessageOracle,
    alpha: BasisLabel,
    rng_seed: u64,
) -> Result<View> {
    let m_alpha = msg_oracle.query(alpha)?;
    let placeholder = vec![0u8; params.message_bytes()];
    let (m_x, m_z) = match alpha {
        BasisLabel::X => (&m_alpha, &placeholder),
        BasisLabel::Z => (&placeholder, &m_alpha),
    };
    let mut view = real_view(params, m_x, m_z, rng_seed)?;
    let mut c = vec![0u8; params.message_bytes()];
    from_seed(TrialSeeds::new(rng_seed).simulator).fill_bytes(&mut c);
    view.token
        .classical_mut()
        .set_ciphertext(alpha.conjugate(), c);
    Ok(view)
}

/// Outcome of one game, scored by the referee.
#[derive(Debug, Clone)]
pub struct GameRecord {
    pub recovered_x: Option<Vec<u8>>,
    pub recovered_z: Option<Vec<u8>>,
    pub both_success: bool,
    /// Queries issued by the adversary (preparation queries excluded).
    pub transcript: OracleTranscript,
    /// Basis attributed to the adversary.
    pub alpha: BasisLabel,
    pub covered_alpha: usize,
    pub covered_conjugate: usize,
    /// Blocks of `Theta_abar` where the adversary's `abar` guess was right.
    pub conjugate_hits: usize,
    pub conjugate_blocks: usize,
    /// Some obfuscation released a key without full transcript coverage of
    /// its position set.
    pub soundness_violation: bool,
}

impl GameRecord {
    pub fn statistic(&self, m_x: &[u8], m_z: &[u8]) -> TrialStatistic {
        TrialStatistic {
            recovered_x: self.recovered_x.as_deref() == Some(m_x),
            recovered_z: self.recovered_z.as_deref() == Some(m_z),
            covered_alpha: self.covered_alpha,
            covered_conjugate: self.covered_conjugate,
        }
    }
}

/// The fixed classical statistic compared between real and simulated views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrialStatistic {
    pub recovered_x: bool,
    pub recovered_z: bool,
    pub covered_alpha: usize,
    pub covered_conjugate: usize,
}

struct Play {
    guesses: Option<[Vec<u64>; 2]>,
    alpha: BasisLabel,
    recovered_x: Option<Vec<u8>>,
    recovered_z: Option<Vec<u8>>,
}

fn basis_index(b: BasisLabel) -> usize {
    match b {
        BasisLabel::X => 0,
        BasisLabel::Z => 1,
    }
}

/// Majority of per-block votes; ties go to X.
fn majority(votes: impl Iterator<Item = BasisLabel>) -> BasisLabel {
    let (mut x, mut z) = (0usize, 0usize);
    for v in votes {
        match v {
            BasisLabel::X => x += 1,
            BasisLabel::Z => z += 1,
        }
    }
    if z > x {
        BasisLabel::Z
    } else {
        BasisLabel::X
    }
}

fn play(strategy: &Strategy, view: &mut View, seed: u64) -> Result<Play> {
    let mut rng = from_seed(seed);
    let n = view.token.params().n;
    let m = view.token.params().m;
    let (guesses, alpha) = match &strategy.behavior {
        Behavior::HonestX | Behavior::HonestZ => {
            let alpha = if matches!(strategy.behavior, Behavior::HonestX) {
                BasisLabel::X
            } else {
                BasisLabel::Z
            };
            let out = view
                .token
                .measure_blocks(|_, s| measure_in_basis(s, alpha, &mut rng))?;
            (Some([out.clone(), out]), alpha)
        }
        Behavior::BreidbartAll(attack) | Behavior::PerBlockOptimal { attack, .. } => {
            let out = attack.measure(&mut view.token, &mut rng)?;
            let gx = out
                .iter()
                .map(|&o| attack.guess(BasisLabel::X, o))
                .collect();
            let gz = out
                .iter()
                .map(|&o| attack.guess(BasisLabel::Z, o))
                .collect();
            (
                Some([gx, gz]),
                majority(out.iter().map(|&o| attack.vote(o))),
            )
        }
        Behavior::RandomGuess => {
            let mask = (1u64 << m) - 1;
            let gx = (0..n).map(|_| rng.random::<u64>() & mask).collect();
            let gz = (0..n).map(|_| rng.random::<u64>() & mask).collect();
            (Some([gx, gz]), BasisLabel::X)
        }
        Behavior::CiphertextReader => {
            let _ = (
                view.token.classical().ciphertext(BasisLabel::X),
                view.token.classical().ciphertext(BasisLabel::Z),
            );
            (None, BasisLabel::X)
        }
        Behavior::Constant => (None, BasisLabel::X),
    };
    let (mut recovered_x, mut recovered_z) = (None, None);
    if let Some(g) = &guesses {
        let classical = view.token.classical().clone();
        recovered_x = open_with_outcomes(&classical, BasisLabel::X, &g[0], &mut view.oracle)?;
        recovered_z = open_with_outcomes(&classical, BasisLabel::Z, &g[1], &mut view.oracle)?;
    }
    Ok(Play {
        guesses,
        alpha,
        recovered_x,
        recovered_z,
    })
}

/// Plays `strategy` against `view` and scores the result against the
/// messages the referee expects.
pub fn play_game(
    strategy: &Strategy,
    view: &mut View,
    m_x: &[u8],
    m_z: &[u8],
    adversary_seed: u64,
) -> Result<GameRecord> {
    strategy.check(view.token.params())?;
    let mark = view.oracle.transcript().len();
    let p = play(strategy, view, adversary_seed)?;
    let transcript = view.oracle.transcript().since(mark);
    let secret = &view.secret;
    let secrets = secret.secret_map();
    let covered =
        |b: BasisLabel| transcript_positions_covered(&transcript, secret.theta(b), &secrets);
    let conj = p.alpha.conjugate();
    let conjugate_hits = match &p.guesses {
        Some(g) => secret
            .theta(conj)
            .iter()
            .filter(|&&i| g[basis_index(conj)][i - 1] == secret.secrets[i - 1])
            .count(),
        None => 0,
    };
    let unsound = |b: BasisLabel, rec: &Option<Vec<u8>>| {
        rec.is_some() && covered(b).len() != secret.theta(b).len()
    };
    let soundness_violation =
        unsound(BasisLabel::X, &p.recovered_x) || unsound(BasisLabel::Z, &p.recovered_z);
    let both_success =
        p.recovered_x.as_deref() == Some(m_x) && p.recovered_z.as_deref() == Some(m_z);
    Ok(GameRecord {
        both_success,
        covered_alpha: covered(p.alpha).len(),
        covered_conjugate: covered(conj).len(),
        conjugate_hits,
        conjugate_blocks: secret.theta(conj).len(),
        soundness_violation,
        alpha: p.alpha,
        recovered_x: p.recovered_x,
        recovered_z: p.recovered_z,
        transcript,
    })
}

/// Aggregate counts over trials.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttackStats {
    pub strategy: String,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub recovered_x: usize,
    pub recovered_z: usize,
    pub both: usize,
    /// Trials in which some obfuscation released a key.
    pub key_returning: usize,
    pub soundness_violations: usize,
    pub covered_alpha: usize,
    pub covered_conjugate: usize,
    pub conjugate_hits: usize,
    pub conjugate_blocks: usize,
    pub alpha_x: usize,
}

impl AttackStats {
    fn new(strategy: &Strategy, params: &Params) -> Self {
        Self {
            strategy: strategy.name.clone(),
            n: params.n,
            m: params.m,
            ..Self::default()
        }
    }

    fn add(&mut self, r: &GameRecord, m_x: &[u8], m_z: &[u8]) {
        let s = r.statistic(m_x, m_z);
        self.trials += 1;
        self.recovered_x += s.recovered_x as usize;
        self.recovered_z += s.recovered_z as usize;
        self.both += r.both_success as usize;
        self.key_returning += (r.recovered_x.is_some() || r.recovered_z.is_some()) as usize;
        self.soundness_violations += r.soundness_violation as usize;
        self.covered_alpha += r.covered_alpha;
        self.covered_conjugate += r.covered_conjugate;
        self.conjugate_hits += r.conjugate_hits;
        self.conjugate_blocks += r.conjugate_blocks;
        self.alpha_x += (r.alpha == BasisLabel::X) as usize;
    }

    fn merge(&mut self, o: &AttackStats) {
        self.trials += o.trials;
        self.recovered_x += o.recovered_x;
        self.recovered_z += o.recovered_z;
        self.both += o.both;
        self.key_returning += o.key_returning;
        self.soundness_violations += o.soundness_violations;
        self.covered_alpha += o.covered_alpha;
        self.covered_conjugate += o.covered_conjugate;
        self.conjugate_hits += o.conjugate_hits;
        self.conjugate_blocks += o.conjugate_blocks;
        self.alpha_x += o.alpha_x;
    }

    fn rate(count: usize, total: usize) -> f64 {
        if total == 0 {
            0.0
        } else {
            count as f64 / total as f64
        }
    }

    pub fn p_mx(&self) -> f64 {
        Self::rate(self.recovered_x, self.trials)
    }

    pub fn p_mz(&self) -> f64 {
        Self::rate(self.recovered_z, self.trials)
    }

    pub fn p_both(&self) -> f64 {
        Self::rate(self.both, self.trials)
    }

    pub fn mean_covered_conjugate(&self) -> f64 {
        Self::rate(self.covered_conjugate, self.trials)
    }

    /// Per-block hit rate of the conjugate-basis guess.
    pub fn conjugate_hit_rate(&self) -> f64 {
        Self::rate(self.conjugate_hits, self.conjugate_blocks)
    }
}

fn real_trial(
    strategy: &Strategy,
    params: &Params,
    m_x: &[u8],
    m_z: &[u8],
    trial_seed: u64,
) -> Result<GameRecord> {
    let mut view = real_view(params, m_x, m_z, trial_seed)?;
    play_game(
        strategy,
        &mut view,
        m_x,
        m_z,
        TrialSeeds::new(trial_seed).adversary,
    )
}

fn fixed_alpha(strategy: &Strategy) -> Option<BasisLabel> {
    match strategy.behavior {
        Behavior::HonestX => Some(BasisLabel::X),
        Behavior::HonestZ => Some(BasisLabel::Z),
        _ => None,
    }
}

/// Runs `trials` independent games against real tokens. Trial `t` uses the
/// seed `derive_seed(rng_seed, t)`.
pub fn run_attack(
    strategy: &Strategy,
    params: &Params,
    m_x: &[u8],
    m_z: &[u8],
    trials: usize,
    rng_seed: u64,
) -> Result<AttackStats> {
    params.validate()?;
    strategy.check(params)?;
    let records = crate::par::map_indexed(trials, |t| {
        real_trial(strategy, params, m_x, m_z, derive_seed(rng_seed, t as u64)).map(|r| {
            let mut s = AttackStats::new(strategy, params);
            s.add(&r, m_x, m_z);
            s
        })
    });
    let mut total = AttackStats::new(strategy, params);
    for r in records {
        total.merge(&r?);
    }
    Ok(total)
}

/// Messages used by [`distinguishing_experiment`] for a given seed.
pub fn experiment_messages(params: &Params, rng_seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = from_seed(derive_labeled(rng_seed, u64::MAX, LABEL_MESSAGES));
    let mut m_x = vec![0u8; params.message_bytes()];
    let mut m_z = vec![0u8; params.message_bytes()];
    rng.fill_bytes(&mut m_x);
    rng.fill_bytes(&mut m_z);
    (m_x, m_z)
}

#[derive(Debug, Clone)]
pub struct Distinguishing {
    /// Same numbers [`run_attack`] reports for these messages and seed.
    pub real: AttackStats,
    pub simulated: AttackStats,
    pub tv: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub real_statistics: Vec<TrialStatistic>,
    pub simulated_statistics: Vec<TrialStatistic>,
}

/// Total-variation distance between the empirical distributions of two samples.
pub fn empirical_tv<T: Ord + Copy>(a: &[T], b: &[T]) -> f64 {
    let mut counts: BTreeMap<T, (usize, usize)> = BTreeMap::new();
    for x in a {
        counts.entry(*x).or_default().0 += 1;
    }
    for x in b {
        counts.entry(*x).or_default().1 += 1;
    }
    let (na, nb) = (a.len().max(1) as f64, b.len().max(1) as f64);
    0.5 * counts
        .values()
        .map(|&(ca, cb)| (ca as f64 / na - cb as f64 / nb).abs())
        .sum::<f64>()
}

/// Real versus simulated views on matched seeds.
///
/// Trial `t` prepares the real token exactly as [`run_attack`] does. The
/// simulator gets the adversary's basis: the fixed one for honest
/// strategies, otherwise the majority vote recorded in the real trial (the
/// measurement and its votes are identical in both views, since the quantum
/// part and the adversary's randomness are shared). The TV interval is a
/// percentile bootstrap over paired trials.
pub fn distinguishing_experiment(
    strategy: &Strategy,
    params: &Params,
    trials: usize,
    rng_seed: u64,
) -> Result<Distinguishing> {
    params.validate()?;
    strategy.check(params)?;
    let (m_x, m_z) = experiment_messages(params, rng_seed);
    let pairs = crate::par::map_indexed(trials, |t| -> Result<(GameRecord, GameRecord)> {
        let seed = derive_seed(rng_seed, t as u64);
        let real = real_trial(strategy, params, &m_x, &m_z, seed)?;
        let alpha = fixed_alpha(strategy).unwrap_or(real.alpha);
        let mut g = MessageOracle::new(m_x.clone(), m_z.clone());
        let mut view = run_simulator(params, &mut g, alpha, seed)?;
        let sim = play_game(
            strategy,
            &mut view,
            &m_x,
            &m_z,
            TrialSeeds::new(seed).adversary,
        )?;
        Ok((real, sim))
    });
    let mut real = AttackStats::new(strategy, params);
    let mut simulated = AttackStats::new(strategy, params);
    let mut rs = Vec::with_capacity(trials);
    let mut ss = Vec::with_capacity(trials);
    for p in pairs {
        let (r, s) = p?;
        real.add(&r, &m_x, &m_z);
        simulated.add(&s, &m_x, &m_z);
        rs.push(r.statistic(&m_x, &m_z));
        ss.push(s.statistic(&m_x, &m_z));
    }
    let tv = empirical_tv(&rs, &ss);
    let (ci_low, ci_high) = bootstrap_tv(
        &rs,
        &ss,
        derive_labeled(rng_seed, u64::MAX, LABEL_BOOTSTRAP),
    );
    Ok(Distinguishing {
        real,
        simulated,
        tv,
        ci_low,
        ci_high,
        real_statistics: rs,
        simulated_statistics: ss,
    })
}

fn bootstrap_tv(a: &[TrialStatistic], b: &[TrialStatistic], seed: u64) -> (f64, f64) {
    let n = a.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mut rng = from_seed(seed);
    let mut tvs: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let ra: Vec<_> = idx.iter().map(|&i| a[i]).collect();
            let rb: Vec<_> = idx.iter().map(|&i| b[i]).collect();
            empirical_tv(&ra, &rb)
        })
        .collect();
    tvs.sort_by(f64::total_cmp);
    let q = |p: f64| tvs[((p * (tvs.len() - 1) as f64).round() as usize).min(tvs.len() - 1)];
    (q(0.025), q(0.975))
}

/// One attack CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackRow {
    pub strategy: String,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub p_mx: f64,
    pub p_mz: f64,
    pub p_both: f64,
    pub mean_cov_conj: f64,
    pub tv_estimate: f64,
    pub seed: u64,
}

impl AttackRow {
    pub fn from_experiment(d: &Distinguishing, seed: u64) -> Self {
        let r = &d.real;
        Self {
            strategy: r.strategy.clone(),
            n: r.n,
            m: r.m,
            trials: r.trials,
            p_mx: r.p_mx(),
            p_mz: r.p_mz(),
            p_both: r.p_both(),
            mean_cov_conj: r.mean_covered_conjugate(),
            tv_estimate: d.tv,
            seed,
        }
    }
}

/// Writes rows sorted by strategy name, then seed.
pub fn write_attack_csv<W: std::io::Write>(rows: &[AttackRow], out: W) -> Result<()> {
    let mut rows: Vec<&AttackRow> = rows.iter().collect();
    rows.sort_by(|a, b| a.strategy.cmp(&b.strategy).then(a.seed.cmp(&b.seed)));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ATTACK_HEADER)?;
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            r.n.to_string(),
            r.m.to_string(),
            r.trials.to_string(),
            format!("{:.6}", r.p_mx),
            format!("{:.6}", r.p_mz),
            format!("{:.6}", r.p_both),
            format!("{:.6}", r.mean_cov_conj),
            format!("{:.6}", r.tv_estimate),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
