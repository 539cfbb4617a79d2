//! `resalg`: command-line driver for resonance-algebra experiments.

mod commands;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use resonance_core::io::{write_atomic, OutputFormat, ResultEnvelope, RunConfig};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "resalg", version, about = "Resonance algebras of commensurable oscillators")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every random sample drawn by the run.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Override of the residual tolerance of the subcommand.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Shorthand for --format json.
    #[arg(long, global = true)]
    pub json: bool,
    #[arg(long, global = true, default_value = "fast", value_parser = ["fast", "full"])]
    pub profile: String,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(untagged)]
enum Command {
    /// Split a frequency list such as "2/3:a, 1:a, 5:b" into commensurable components.
    Decompose(commands::DecomposeArgs),
    /// Minimal resonance elements of a prime system.
    HilbertBasis(commands::WeightsArgs),
    /// Poisson bracket table, constraints and Casimirs.
    Brackets(commands::BracketsArgs),
    /// Jacobi residual of the bracket table at random points.
    VerifyJacobi(commands::JacobiArgs),
    /// 1:2 algebra on a Fock block and on the polynomial model: relations, Casimirs, kernel.
    Represent(commands::RepresentArgs),
    /// Operator averaging of H0 + eps*H1 (+ eps^2*V2) to second order.
    Average(commands::AverageArgs),
    /// Oracle eigenvalues of the 1:2 Schrodinger operator with cluster labels.
    Spectrum(commands::SpectrumArgs),
    /// Eigenvalues of the model operator on one level.
    ModelSpectrum(commands::ModelArgs),
    /// EBK ladder against the model spectrum.
    Ebk(commands::EbkArgs),
    /// Block evolution of the reduced 1:2 equation.
    Evolve(commands::EvolveArgs),
    /// Precession flow of a Hamiltonian on a resonance algebra.
    Precess(commands::PrecessArgs),
    /// Closed-form reduced 1:1 orbit of an averaged quartic potential.
    Reduce11(commands::Reduce11Args),
    /// Resonance data of the magneto-atom for a given (omega_L/omega_0)^2.
    Magneto(commands::MagnetoArgs),
    /// Acceptance criteria A1-A9.
    Accept(commands::AcceptArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Decompose(_) => "decompose",
            Command::HilbertBasis(_) => "hilbert-basis",
            Command::Brackets(_) => "brackets",
            Command::VerifyJacobi(_) => "verify-jacobi",
            Command::Represent(_) => "represent",
            Command::Average(_) => "average",
            Command::Spectrum(_) => "spectrum",
            Command::ModelSpectrum(_) => "model-spectrum",
            Command::Ebk(_) => "ebk",
            Command::Evolve(_) => "evolve",
            Command::Precess(_) => "precess",
            Command::Reduce11(_) => "reduce11",
            Command::Magneto(_) => "magneto",
            Command::Accept(_) => "accept",
        }
    }

    fn run(&self, cfg: &RunConfig) -> anyhow::Result<commands::Outcome> {
        match self {
            Command::Decompose(a) => commands::decompose(a, cfg),
            Command::HilbertBasis(a) => commands::hilbert_basis(a, cfg),
            Command::Brackets(a) => commands::brackets(a, cfg),
            Command::VerifyJacobi(a) => commands::verify_jacobi(a, cfg),
            Command::Represent(a) => commands::represent(a, cfg),
            Command::Average(a) => commands::average(a, cfg),
            Command::Spectrum(a) => commands::spectrum(a, cfg),
            Command::ModelSpectrum(a) => commands::model_spectrum(a, cfg),
            Command::Ebk(a) => commands::ebk(a, cfg),
            Command::Evolve(a) => commands::evolve(a, cfg),
            Command::Precess(a) => commands::precess(a, cfg),
            Command::Reduce11(a) => commands::reduce11(a, cfg),
            Command::Magneto(a) => commands::magneto(a, cfg),
            Command::Accept(a) => commands::accept(a, cfg),
        }
    }
}

const EXIT_RESIDUAL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn is_usage(e: &anyhow::Error) -> bool {
    use resonance_core::Error as E;
    match e.downcast_ref::<E>() {
        Some(E::InvalidInput(_) | E::Parse(_) | E::NotPrime(_) | E::ZeroFrequency(_)) => true,
        Some(_) => false,
        None => e.downcast_ref::<commands::UsageError>().is_some(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_RESIDUAL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { EXIT_USAGE } else { EXIT_RESIDUAL })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let g = &cli.global;
    let format = if g.json || g.format == Format::Json { OutputFormat::Json } else { OutputFormat::Csv };
    let parameters: BTreeMap<String, serde_json::Value> = match serde_json::to_value(&cli.command)? {
        serde_json::Value::Object(m) => m.into_iter().collect(),
        _ => BTreeMap::new(),
    };
    let cfg = RunConfig {
        subcommand: cli.command.name().into(),
        parameters,
        seed: g.seed,
        tol: g.tol,
        out: g.out.clone(),
        format,
        profile: g.profile.clone(),
    };
    cfg.validate()?;
    let started = chrono::Utc::now().to_rfc3339();
    let outcome = cli.command.run(&cfg)?;
    let passed = outcome.residuals.passed;
    let mut env = ResultEnvelope::new(cfg.clone(), outcome.payload, outcome.residuals, outcome.provenance);
    env.started = started;
    env.finished = chrono::Utc::now().to_rfc3339();
    let json = env.to_json()? + "\n";
    match format {
        OutputFormat::Json => emit(&cfg.out, json.as_bytes())?,
        OutputFormat::Csv => {
            let csv = commands::to_csv(&outcome.table)?;
            emit(&cfg.out, csv.as_bytes())?;
            if let Some(p) = &cfg.out {
                let mut side = p.clone().into_os_string();
                side.push(".envelope.json");
                write_atomic(&PathBuf::from(side), json.as_bytes())?;
            }
        }
    }
    if !passed {
        for c in env.residuals.checks.iter().filter(|c| !c.passed) {
            eprintln!("residual check failed: {} = {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
        }
    }
    Ok(passed)
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => Ok(write_atomic(p, bytes)?),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}
