//! Command-line front end.
//!
//! Exit codes: 0 when every check passes, 2 when any check fails, 1 on a
//! configuration or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use adacov::bounds::{
    distribution_tail, gaussian_sample_size, laplace_sample_size, log_grid, mechanism_tails,
    splitting_sample_size, CalibrationInputs, DistTailSpec, NoiseKind, Regime, TailValue,
};
use adacov::config::{parse_experiment, parse_instance};
use adacov::harness::{compare_bound, run_experiment, to_csv, verify_instance};

#[derive(Parser)]
#[command(name = "adacov", version, about = "Adaptive data analysis simulator and bound checker")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Laplace,
    Gaussian,
}

impl From<Kind> for NoiseKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Laplace => NoiseKind::Laplace,
            Kind::Gaussian => NoiseKind::Gaussian,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CalKind {
    Laplace,
    Gaussian,
    Splitting,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Bounded,
    SubGaussian,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Bounded => Regime::Bounded,
            RegimeArg::SubGaussian => Regime::SubGaussian,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and compare its tails with the bounds.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; defaults to the config's output_path, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the covariance identity and TV dominance on a small instance.
    OracleVerify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tabulate the sample, posterior and distribution tail bounds.
    Bounds {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        eta: f64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_enum, default_value = "bounded")]
        regime: RegimeArg,
        /// Query range Δ; defaults to 1.
        #[arg(long, default_value_t = 1.0)]
        range: f64,
        /// Per-query slack of the Gaussian mechanism; defaults to delta-prime.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 1e-4)]
        delta_prime: f64,
        #[arg(long)]
        alpha_min: Option<f64>,
        #[arg(long)]
        alpha_max: Option<f64>,
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample size and noise scale for a distribution-accuracy target.
    Calibrate {
        #[arg(long, value_enum)]
        mechanism: CalKind,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        delta_range: f64,
        #[arg(long, value_enum, default_value = "bounded")]
        regime: RegimeArg,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn verdict(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Simulate { config, out } => {
            let cfg = parse_experiment(&read(&config)?)?;
            let result = run_experiment(&cfg)?;
            let out = out.or_else(|| cfg.output_path.as_ref().map(PathBuf::from));
            emit(out.as_deref(), &to_csv(&result))?;
            let v = compare_bound(&result);
            for r in &v.rows {
                let tag = |c: &adacov::harness::Check| match (c.valid, c.pass) {
                    (false, _) => "n/a",
                    (true, true) => "PASS",
                    (true, false) => "FAIL",
                };
                eprintln!(
                    "alpha={} sample={} dist={}{}",
                    r.alpha,
                    tag(&r.sample),
                    tag(&r.dist),
                    r.posterior.map_or(String::new(), |c| format!(" posterior={}", tag(&c))),
                );
            }
            eprintln!("overall: {}", if v.pass { "PASS" } else { "FAIL" });
            Ok(verdict(v.pass))
        }
        Command::OracleVerify { config } => {
            let cfg = parse_instance(&read(&config)?)?;
            let report = verify_instance(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(verdict(report.pass))
        }
        Command::Bounds {
            kind,
            k,
            eta,
            n,
            sigma,
            regime,
            range,
            delta,
            delta_prime,
            alpha_min,
            alpha_max,
            points,
            out,
        } => {
            let kind = NoiseKind::from(kind);
            let (phi, post) = mechanism_tails(kind, k, eta)?;
            let spec = DistTailSpec {
                kind,
                regime: regime.into(),
                n,
                eta,
                k,
                d: 1,
                sigma,
                range,
                delta: delta.unwrap_or(delta_prime),
                delta_prime,
            };
            // A δ′ outside its admissible window leaves only the vacuous bound.
            let dist = match distribution_tail(&spec) {
                Ok(t) => Some(t),
                Err(adacov::Error::Validity { .. } | adacov::Error::Infeasible(_)) => None,
                Err(e) => return Err(e.into()),
            };
            let lo = alpha_min.unwrap_or(eta);
            let hi = alpha_max.unwrap_or((20.0 * eta).max(2.0 * sigma));
            anyhow::ensure!(lo > 0.0 && hi > lo && points >= 2, "need 0 < alpha-min < alpha-max and points >= 2");
            let mut csv = String::from("alpha,phi,Phi_post,Phi_dist,validity_flag\n");
            for a in log_grid(lo, hi, points) {
                let (p, q) = (phi.eval(a), post.eval(a));
                let d = dist.as_ref().map_or(TailValue { value: 1.0, valid: false }, |t| t.eval(a));
                let valid = p.valid && q.valid && d.valid;
                csv.push_str(&format!("{a},{},{},{},{}\n", p.value, q.value, d.value, u8::from(valid)));
            }
            emit(out.as_deref(), &csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Calibrate {
            mechanism,
            alpha,
            beta,
            k,
            sigma,
            delta_range,
            regime,
        } => {
            let inputs = CalibrationInputs {
                alpha,
                beta,
                k,
                sigma,
                range: delta_range,
                regime: regime.into(),
            };
            let cal = match mechanism {
                CalKind::Laplace => laplace_sample_size(inputs),
                CalKind::Gaussian => gaussian_sample_size(inputs),
                CalKind::Splitting => splitting_sample_size(inputs),
            }?;
            let json = serde_json::json!({
                "n": cal.n,
                "eta": cal.eta,
                "method": cal.method,
                "inputs": cal.inputs,
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
