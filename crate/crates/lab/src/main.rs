use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snls_lab::commands::{self, Command};
use snls_lab::config::{self, phi_overrides};
use snls_lab::error::{exit, LabError, LabResult};
use snls_lab::presets::u0_flag;
use snls_lab::runner::{resolve_threads, Pool};

#[derive(Parser)]
#[command(name = "snls", version, about = "Stochastic NLS experiments on a periodic box")]
struct Cli {
    /// TOML configuration file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Raw override `section.key=value`, repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads (default: SNLS_THREADS, else all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory
    #[arg(long, global = true, default_value = "runs/latest")]
    out: PathBuf,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Sample the stochastic convolution on a time grid
    SampleNoise(Flags),
    /// Wiener-randomize initial data
    Randomize(Flags),
    /// Solve for the residual by Picard iteration
    Solve(Flags),
    /// Estimate the local existence time over many noise paths
    ProbeExistence(Flags),
    /// Fit the time decay of the free flow
    VerifyDispersive(Flags),
    /// Fit the moment scaling of the stochastic convolution in T
    #[command(name = "verify-lemma21")]
    VerifyScaling(Flags),
    /// Check stability of randomized space-time norms under refinement
    VerifyPstrichartz(Flags),
    /// Fit the first Picard contraction ratio against T
    VerifyContraction(Flags),
    /// Verify manifests of every run under --out and summarize them
    Report,
}

#[derive(Args, Default)]
struct Flags {
    #[arg(long)]
    seed: Option<u64>,
    /// Solver case: ia, ib or ii
    #[arg(long)]
    case: Option<String>,
    /// Initial data preset (gaussian, rough, zero) or a solver case name
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    /// Grid points per axis
    #[arg(long)]
    n: Option<usize>,
    /// Box side length
    #[arg(long = "L")]
    length: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    s0: Option<f64>,
    /// Regularity: the noise regularity for solver commands, the norm regularity otherwise
    #[arg(long)]
    s: Option<f64>,
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Smoothing operator, e.g. `cutoff:K=8` or `power-law:alpha=1.5,s=0`
    #[arg(long)]
    phi: Option<String>,
    /// Initial data preset or field file path
    #[arg(long)]
    u0: Option<String>,
    /// Spatial Lebesgue exponent (a number or inf)
    #[arg(long)]
    r: Option<String>,
    /// Temporal Lebesgue exponent (a number or inf)
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    /// Monte Carlo sample or path count
    #[arg(long)]
    samples: Option<usize>,
}

impl Flags {
    fn overrides(&self, cmd: Command) -> LabResult<Vec<(String, String)>> {
        let mut o: Vec<(String, String)> = Vec::new();
        let mut push = |k: &str, v: String| o.push((k.to_string(), v));
        let solver_cmd = matches!(
            cmd,
            Command::Solve | Command::ProbeExistence | Command::VerifyContraction
        );
        if let Some(v) = self.seed {
            push("run.seed", v.to_string());
        }
        if let Some(v) = &self.case {
            push("solver.case", format!("{v:?}"));
        }
        if let Some(v) = &self.preset {
            match v.as_str() {
                "ia" | "ib" | "ii" => push("solver.case", format!("{v:?}")),
                _ => push("u0.preset", format!("{v:?}")),
            }
        }
        if let Some(v) = self.d {
            push("grid.d", v.to_string());
        }
        if let Some(v) = self.n {
            push("grid.n", v.to_string());
        }
        if let Some(v) = self.length {
            push("grid.length", real(v));
        }
        if let Some(v) = self.p {
            push("solver.p", real(v));
        }
        if let Some(v) = self.s0 {
            push("solver.s0", real(v));
        }
        if let Some(v) = self.s {
            push(if solver_cmd { "solver.s" } else { "norm.s" }, real(v));
        }
        if let Some(v) = self.horizon {
            push("time.horizon", real(v));
        }
        if let Some(v) = self.steps {
            push("time.steps", v.to_string());
        }
        if let Some(v) = self.tol {
            push("solver.tol", real(v));
        }
        if let Some(v) = &self.r {
            push("norm.r", format!("{v:?}"));
        }
        if let Some(v) = &self.q {
            push("norm.q", format!("{v:?}"));
        }
        if let Some(v) = self.rho {
            push("norm.rho", real(v));
        }
        if let Some(v) = self.samples {
            push("mc.n_samples", v.to_string());
        }
        if let Some(v) = &self.u0 {
            o.extend(u0_flag(v));
        }
        if let Some(v) = &self.phi {
            o.extend(phi_overrides(v)?);
        }
        Ok(o)
    }
}

/// TOML spelling of a flag value; infinities become the string `"inf"`.
fn real(v: f64) -> String {
    if v.is_infinite() {
        "\"inf\"".into()
    } else {
        format!("{v:?}")
    }
}

fn parse_set(raw: &str) -> LabResult<(String, String)> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| LabError::config(raw, "expected --set section.key=value"))
}

fn execute(cli: Cli) -> LabResult<i32> {
    let (cmd, flags) = match cli.command {
        Sub::Report => {
            let (lines, ok) = commands::report(&cli.out)?;
            for l in lines {
                println!("{l}");
            }
            return Ok(if ok { exit::OK } else { exit::FAILURE });
        }
        Sub::SampleNoise(f) => (Command::SampleNoise, f),
        Sub::Randomize(f) => (Command::Randomize, f),
        Sub::Solve(f) => (Command::Solve, f),
        Sub::ProbeExistence(f) => (Command::ProbeExistence, f),
        Sub::VerifyDispersive(f) => (Command::VerifyDispersive, f),
        Sub::VerifyScaling(f) => (Command::VerifyScaling, f),
        Sub::VerifyPstrichartz(f) => (Command::VerifyPstrichartz, f),
        Sub::VerifyContraction(f) => (Command::VerifyContraction, f),
    };
    // file values first, then --set, then dedicated flags
    let mut overrides = cli
        .set
        .iter()
        .map(|s| parse_set(s))
        .collect::<LabResult<Vec<_>>>()?;
    overrides.extend(flags.overrides(cmd)?);
    let cfg = config::load(cli.config.as_deref(), &overrides)?;
    let pool = Pool::new(resolve_threads(cli.threads)?)?;
    for line in commands::run(cmd, cfg, &pool, &cli.out)? {
        println!("{line}");
    }
    println!("artifacts written to {}", cli.out.display());
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
