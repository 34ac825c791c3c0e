use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use wiesner_otm::adversary::{
    distinguishing_experiment, experiment_messages, write_attack_csv, AttackRow, Strategy,
    DEFAULT_OPTIMAL_EPSILON, STRATEGY_NAMES,
};
use wiesner_otm::bound::{
    default_epsilon_grid, run_sweep, write_sweep_csv, OptimizerConfig, SweepConfig,
};
use wiesner_otm::obf::{functionality_check, DEFAULT_FIELD_WIDTH};
use wiesner_otm::oracle::OracleInstance;
use wiesner_otm::otm::{otm_eval, otm_prep, Params};
use wiesner_otm::qsim::BasisLabel;
use wiesner_otm::rng::derive_labeled;

#[derive(Parser)]
#[command(
    name = "otm",
    version,
    about = "One-time memories from conjugate coding: experiments"
)]
struct Cli {
    /// Worker threads for trials and optimizer restarts.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prepare a token, evaluate it in one basis and print the message.
    Demo(DemoArgs),
    /// Optimize blockwise attacks over an (m, eps) grid and write a CSV.
    BoundSweep(SweepArgs),
    /// Play attack strategies against real and simulated tokens.
    Attack(AttackArgs),
    /// Check obfuscator functionality on random patterns.
    ObfTest(ObfArgs),
}

#[derive(Args, Clone, Copy)]
struct ParamArgs {
    /// Number of blocks.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Qubits per block.
    #[arg(long, default_value_t = 6)]
    m: usize,
    /// Oracle output bits per block.
    #[arg(long = "m-prime", default_value_t = 64)]
    m_prime: usize,
    /// Message and key length in bits.
    #[arg(long, default_value_t = 128)]
    lambda: usize,
}

impl ParamArgs {
    fn params(&self) -> Params {
        Params {
            lambda: self.lambda,
            n: self.n,
            m: self.m,
            m_prime: self.m_prime,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    X,
    Z,
}

impl From<BasisArg> for BasisLabel {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::X => BasisLabel::X,
            BasisArg::Z => BasisLabel::Z,
        }
    }
}

#[derive(Args)]
struct DemoArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "x")]
    basis: BasisArg,
    /// After the honest evaluation, reuse the collapsed state in the other basis.
    #[arg(long)]
    reuse: bool,
    #[arg(long)]
    seed: u64,
    /// Write a JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Block sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    m: Vec<usize>,
    /// `start:stop:step` or a comma-separated list. Default 0.01:0.25:0.03.
    #[arg(long = "epsilon-grid")]
    epsilon_grid: Option<String>,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long)]
    seed: u64,
    /// CSV destination (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Strategy names, comma separated, or `all`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    strategy: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Design tolerance of the `optimal` strategy.
    #[arg(long, default_value_t = DEFAULT_OPTIMAL_EPSILON)]
    epsilon: f64,
    /// Optimizer restarts for the `optimal` strategy.
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long)]
    seed: u64,
    /// CSV destination (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ObfArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    /// CSV destination (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        wiesner_otm::par::configure_jobs(jobs);
    }
    let result = match cli.command {
        Command::Demo(a) => cmd_demo(a),
        Command::BoundSweep(a) => cmd_bound_sweep(a),
        Command::Attack(a) => cmd_attack(a),
        Command::ObfTest(a) => cmd_obf_test(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type CmdResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn describe(path: &Path) -> String {
    path.display().to_string()
}

#[derive(Serialize)]
struct DemoReport {
    params: Params,
    seed: u64,
    basis: BasisLabel,
    expected_hex: String,
    recovered_hex: Option<String>,
    success: bool,
    reuse: Option<ReuseReport>,
    token: serde_json::Value,
}

#[derive(Serialize)]
struct ReuseReport {
    basis: BasisLabel,
    recovered_hex: Option<String>,
}

fn cmd_demo(a: DemoArgs) -> CmdResult {
    let params = a.params.params();
    params.validate()?;
    let alpha: BasisLabel = a.basis.into();
    let (m_x, m_z) = experiment_messages(&params, a.seed);
    let mut oracle = OracleInstance::lazy(
        params.n,
        params.m,
        params.m_prime,
        derive_labeled(a.seed, 0, 2),
    )?;
    let (mut token, secret) = otm_prep(
        &params,
        &m_x,
        &m_z,
        &mut oracle,
        derive_labeled(a.seed, 0, 3),
    )?;
    let token_json: serde_json::Value = serde_json::from_str(&token.classical().to_json()?)?;
    let recovered = otm_eval(&mut token, alpha, &mut oracle, derive_labeled(a.seed, 0, 4))?;
    let expected = if alpha == BasisLabel::X { &m_x } else { &m_z };
    let success = recovered.as_ref() == Some(expected);

    println!(
        "params: n={} m={} m'={} lambda={}",
        params.n, params.m, params.m_prime, params.lambda
    );
    println!(
        "bases: {}",
        secret
            .bases
            .iter()
            .map(|b| b.to_string())
            .collect::<String>()
    );
    println!("evaluating in basis {alpha}");
    println!("expected  m_{alpha} = {}", hex::encode(expected));
    match &recovered {
        Some(m) => println!("recovered m_{alpha} = {}", hex::encode(m)),
        None => println!("recovered m_{alpha} = \u{22a5}"),
    }

    let reuse = if a.reuse {
        let other = alpha.conjugate();
        let mut again = token.clone_state();
        let r = otm_eval(&mut again, other, &mut oracle, derive_labeled(a.seed, 0, 5))?;
        match &r {
            Some(m) => println!("reuse in basis {other}: recovered {}", hex::encode(m)),
            None => println!("reuse in basis {other}: \u{22a5}"),
        }
        Some(ReuseReport {
            basis: other,
            recovered_hex: r.as_deref().map(hex::encode),
        })
    } else {
        None
    };

    if let Some(path) = &a.out {
        let report = DemoReport {
            params,
            seed: a.seed,
            basis: alpha,
            expected_hex: hex::encode(expected),
            recovered_hex: recovered.as_deref().map(hex::encode),
            success,
            reuse,
            token: token_json,
        };
        let mut w = output(&a.out)?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
        w.flush()?;
        println!("report written to {}", describe(path));
    }
    Ok(if success {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad number {s:?}: {e}"))
    };
    match parts.len() {
        1 => spec.split(',').map(num).collect(),
        3 => {
            let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if step <= 0.0 || stop < start {
                return Err(format!("empty grid {spec:?}"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            // Rounded to 12 decimals so 0.01 + 8 * 0.03 prints as 0.25.
            Ok((0..count)
                .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                .collect())
        }
        _ => Err(format!(
            "grid must be start:stop:step or a comma list, got {spec:?}"
        )),
    }
}

fn cmd_bound_sweep(a: SweepArgs) -> CmdResult {
    let epsilons = match &a.epsilon_grid {
        Some(s) => parse_grid(s)?,
        None => default_epsilon_grid(),
    };
    let config = SweepConfig {
        ms: a.m.clone(),
        epsilons,
        optimizer: OptimizerConfig {
            iterations: a.iterations,
            restarts: a.restarts,
            ..OptimizerConfig::default()
        },
        seed: a.seed,
    };
    let rows = run_sweep(&config)?;
    write_sweep_csv(&rows, output(&a.out)?)?;
    let falsified: Vec<_> = rows.iter().filter(|r| r.falsified).collect();
    let unconverged = rows.iter().filter(|r| !r.converged).count();
    let checks: usize = rows.iter().map(|r| r.markov_checks).sum();
    eprintln!(
        "{} rows, {unconverged} not converged, {checks} partition checks passed",
        rows.len()
    );
    if !falsified.is_empty() {
        for r in &falsified {
            eprintln!(
                "FALSIFIED: m={} eps={} x_guess={} bound={}",
                r.m, r.epsilon, r.x_guess, r.bound
            );
        }
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_attack(a: AttackArgs) -> CmdResult {
    let params = a.params.params();
    params.validate()?;
    let names: Vec<String> = if a.strategy.iter().any(|s| s == "all") {
        STRATEGY_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        a.strategy.clone()
    };
    let config = OptimizerConfig {
        iterations: a.iterations,
        restarts: a.restarts,
        ..OptimizerConfig::default()
    };
    let mut strategies = Vec::with_capacity(names.len());
    for name in &names {
        match Strategy::from_name(name, &params, a.epsilon, &config, a.seed) {
            Ok(s) => strategies.push(s),
            Err(e) => {
                eprintln!("error: {e}");
                return Ok(ExitCode::from(2));
            }
        }
    }
    let mut rows = Vec::with_capacity(strategies.len());
    for s in &strategies {
        let d = distinguishing_experiment(s, &params, a.trials, a.seed)?;
        eprintln!(
            "{}: p_mx={:.4} p_mz={:.4} both={} tv={:.4} [{:.4}, {:.4}] extraction violations={}",
            s.name,
            d.real.p_mx(),
            d.real.p_mz(),
            d.real.both,
            d.tv,
            d.ci_low,
            d.ci_high,
            d.real.soundness_violations
        );
        rows.push(AttackRow::from_experiment(&d, a.seed));
    }
    write_attack_csv(&rows, output(&a.out)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_obf_test(a: ObfArgs) -> CmdResult {
    let params = a.params.params();
    params.validate()?;
    let len = params.pattern_len();
    let r = functionality_check(len, params.lambda, DEFAULT_FIELD_WIDTH, a.trials, a.seed)?;
    let mut w = csv::Writer::from_writer(output(&a.out)?);
    w.write_record([
        "length",
        "lambda",
        "field_width",
        "trials",
        "match_ok",
        "mismatch_rejected",
        "false_accepts",
        "seed",
    ])?;
    w.write_record([
        len.to_string(),
        params.lambda.to_string(),
        DEFAULT_FIELD_WIDTH.to_string(),
        r.trials.to_string(),
        r.match_ok.to_string(),
        r.mismatch_rejected.to_string(),
        r.false_accepts.to_string(),
        a.seed.to_string(),
    ])?;
    w.flush()?;
    eprintln!(
        "{} trials: {} keys recovered, {} mismatches rejected, {} false accepts",
        r.trials, r.match_ok, r.mismatch_rejected, r.false_accepts
    );
    Ok(if r.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_matches_library() {
        assert_eq!(
            parse_grid("0.01:0.25:0.03").unwrap(),
            default_epsilon_grid()
        );
        assert_eq!(parse_grid("0,0.5").unwrap(), vec![0.0, 0.5]);
        assert!(parse_grid("1:0:0.1").is_err());
    }
}
