use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Parser, Subcommand, ValueEnum};

use gridforge::auth::{self, DEFAULT_KEY_BITS};
use gridforge::pipeline::{self, Algorithm, RunReport};
use gridforge::registry::is_valid_name;
use gridforge::report;
use gridforge::scenario::{self, Scenario};
use gridforge::{AuthError, PipelineError};

const EXIT_USAGE: u8 = 1;
const EXIT_SCENARIO: u8 = 2;
const EXIT_AUTH_REJECTION: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "gridforge",
    version,
    about = "Secure grouping-based grid job scheduler"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register, authenticate, group, dispatch and simulate one scenario.
    Run(RunArgs),
    /// Compare SRJM and DJG over generated workloads of several sizes.
    Compare(CompareArgs),
    /// Generate an RSA key pair as <name>.priv and <name>.pub.
    Keygen(KeygenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Srjm,
    Djg,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Srjm => Algorithm::Srjm,
            AlgorithmArg::Djg => Algorithm::Djg,
        }
    }
}

#[derive(clap::Args)]
struct ScenarioArgs {
    /// Scenario file, or builtin:paper-r16.
    #[arg(long)]
    scenario: String,
    /// Directory for relative key paths (defaults to the scenario's directory).
    #[arg(long, env = "GRIDFORGE_KEYDIR")]
    keydir: Option<PathBuf>,
    /// Scheduling granularity in seconds.
    #[arg(long)]
    granularity: Option<f64>,
    /// Communication window in seconds (defaults to the granularity).
    #[arg(long)]
    tcomm: Option<f64>,
    /// Per-group dispatch overhead in seconds.
    #[arg(long)]
    overhead: Option<f64>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct RunArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    #[arg(long, value_enum, default_value = "srjm")]
    algorithm: AlgorithmArg,
    /// Replace the scenario's jobs with N generated jobs.
    #[arg(long, value_name = "N")]
    synthetic_jobs: Option<usize>,
    /// Save the registry state after the run.
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CompareArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    #[arg(long, value_delimiter = ',', default_value = "3,5,8,10,14")]
    job_counts: Vec<usize>,
}

#[derive(clap::Args)]
struct KeygenArgs {
    name: String,
    #[arg(long, default_value_t = DEFAULT_KEY_BITS,
          value_parser = PossibleValuesParser::new(["1024", "2048", "3072"])
              .map(|s| s.parse::<usize>().unwrap()))]
    bits: usize,
    #[arg(long, env = "GRIDFORGE_KEYDIR", default_value = ".")]
    keydir: PathBuf,
    /// Overwrite existing key files.
    #[arg(long)]
    force: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let code = match e {
            PipelineError::Scenario(_)
            | PipelineError::Model(_)
            | PipelineError::MissingKey { .. }
            | PipelineError::NoKey(_)
            | PipelineError::Registration { .. } => EXIT_SCENARIO,
            PipelineError::Auth(_) | PipelineError::Dispatch(_) | PipelineError::Report(_) => {
                EXIT_INTERNAL
            }
        };
        Failure::new(code, e.to_string())
    }
}

fn load(args: &ScenarioArgs) -> Result<(Scenario, pipeline::Keyring), Failure> {
    let mut sc = scenario::load_scenario(&args.scenario)
        .map_err(|e| Failure::new(EXIT_SCENARIO, e.to_string()))?;
    if let Some(g) = args.granularity {
        sc.granularity_s = g;
    }
    if let Some(t) = args.tcomm {
        sc.tcomm_s = Some(t);
    }
    if let Some(o) = args.overhead {
        sc.overhead_s = o;
    }
    sc.validate()
        .map_err(|e| Failure::new(EXIT_SCENARIO, e.to_string()))?;
    let keys = pipeline::load_keys(&sc, args.keydir.as_deref())?;
    Ok((sc, keys))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    let res = match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| e.to_string()),
    };
    res.map_err(|m| Failure::new(EXIT_INTERNAL, m))
}

fn summarize(r: &RunReport) {
    eprintln!(
        "{}: {} jobs, {} groups, {} rejected, total {} s, makespan {} s",
        r.algorithm,
        r.jobs.len(),
        r.groups.len(),
        r.rejected.len(),
        r.metrics.total_processing_s,
        r.metrics.makespan_s
    );
    for j in &r.rejected {
        eprintln!("rejected {} ({}): {}", j.job_id, j.user, j.reason);
    }
}

fn cmd_run(args: RunArgs) -> Result<u8, Failure> {
    let (mut sc, keys) = load(&args.common)?;
    if let Some(n) = args.synthetic_jobs {
        sc = sc.with_generated_jobs(n);
    }
    let report = pipeline::run_pipeline(&sc, &keys, args.algorithm.into())?;
    emit(
        args.common.out.as_deref(),
        &report::run_report_csv(&report)?,
    )?;
    if let Some(path) = &args.snapshot {
        report
            .registry
            .save(path)
            .map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?;
    }
    summarize(&report);
    Ok(if report.has_auth_rejections() {
        EXIT_AUTH_REJECTION
    } else {
        0
    })
}

fn cmd_compare(args: CompareArgs) -> Result<u8, Failure> {
    let (sc, keys) = load(&args.common)?;
    let levels = pipeline::compare_job_counts(&sc, &keys, &args.job_counts)?;
    emit(
        args.common.out.as_deref(),
        &report::comparison_csv(&levels)?,
    )?;
    Ok(0)
}

fn cmd_keygen(args: KeygenArgs) -> Result<u8, Failure> {
    if !is_valid_name(&args.name) {
        return Err(Failure::new(
            EXIT_USAGE,
            format!("invalid key name {:?}: use [A-Za-z0-9_-]", args.name),
        ));
    }
    fs::create_dir_all(&args.keydir)
        .map_err(|e| Failure::new(EXIT_INTERNAL, format!("{}: {e}", args.keydir.display())))?;
    let keys = auth::generate_keypair(args.bits)
        .map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?;
    auth::write_keypair_files(&args.keydir, &args.name, &keys, args.force).map_err(
        |e| match e {
            AuthError::KeyExists(_) => Failure::new(EXIT_USAGE, e.to_string()),
            _ => Failure::new(EXIT_INTERNAL, e.to_string()),
        },
    )?;
    eprintln!(
        "wrote {0}.priv and {0}.pub ({1} bits) in {2}",
        args.name,
        args.bits,
        args.keydir.display()
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Keygen(a) => cmd_keygen(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("gridforge: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
