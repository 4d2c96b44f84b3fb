use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ksgns_core::equivariant::{check_dilation, check_equivariant, dilate, gns_example};
use ksgns_core::harness::{self, parse_suites, Caps, Format, Report, Suite, SuiteConfig};
use ksgns_core::numkernel::{CMatrix, Tolerance};

/// Generates KSGNS verification instances and checks them.
#[derive(Parser)]
#[command(name = "verify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a deterministic instance set to a directory.
    Gen {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// `all` or a comma-separated list of suite names.
        #[arg(long, default_value = "all")]
        suites: String,
        /// Comma-separated `key=value` size caps.
        #[arg(long, default_value = "")]
        caps: String,
    },
    /// Check a stored instance set, or generate one in memory from a seed.
    Run {
        #[arg(long = "in", conflicts_with = "seed")]
        input: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        suites: Option<String>,
        #[arg(long, default_value = "")]
        caps: String,
        /// Check tolerance; thresholds scale as tol·(1 + instance scale).
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run a worked example end to end.
    Demo {
        #[arg(value_enum)]
        example: Example,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Example {
    /// Z₂ acting on M₂ by Ad diag(1, −1), dilating an invariant faithful state.
    Gns,
}

/// Usage and IO problems, reported with exit code 2.
struct Usage(String);

impl<E: std::fmt::Display> From<E> for Usage {
    fn from(e: E) -> Self {
        Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// `VERIFY_SEED` wins over the command-line seed.
fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>, Usage> {
    match std::env::var("VERIFY_SEED") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Usage(format!("VERIFY_SEED={v} is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

fn execute(command: Command) -> Result<bool, Usage> {
    match command {
        Command::Gen { seed, out, suites, caps } => {
            let seed = resolve_seed(seed)?.ok_or_else(|| Usage("gen needs --seed or VERIFY_SEED".into()))?;
            let config = SuiteConfig { seed, caps: Caps::parse(&caps)?, suites: parse_suites(&suites)?, ..SuiteConfig::default() };
            for path in harness::generate(&config, &out)? {
                println!("{}", path.display());
            }
            Ok(true)
        }
        Command::Run { input, seed, suites, caps, tol, format, jobs } => {
            let suites = suites.as_deref().map(parse_suites).transpose()?;
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let report = match input {
                Some(dir) => run_stored(&dir, suites, tol, jobs)?,
                None => {
                    let seed = resolve_seed(seed)?.ok_or_else(|| Usage("run needs --in, --seed or VERIFY_SEED".into()))?;
                    let mut config = SuiteConfig { seed, caps: Caps::parse(&caps)?, ..SuiteConfig::default() };
                    if let Some(s) = suites {
                        config.suites = s;
                    }
                    if let Some(t) = tol {
                        config.tolerance = Tolerance::new(config.tolerance.rtol, t)?;
                    }
                    harness::run(&config, jobs)?
                }
            };
            let format = match format {
                OutputFormat::Json => Format::Json,
                OutputFormat::Text => Format::Text,
            };
            println!("{}", harness::report_emit(&report, format)?);
            Ok(report.passes())
        }
        Command::Demo { example: Example::Gns } => demo_gns(),
    }
}

fn run_stored(dir: &std::path::Path, suites: Option<Vec<Suite>>, tol: Option<f64>, jobs: usize) -> Result<Report, Usage> {
    let (config, mut instances) = harness::load(dir)?;
    if let Some(s) = suites {
        instances.retain(|i| s.contains(&i.data.suite()));
    }
    let tolerance = match tol {
        Some(t) => Tolerance::new(config.tolerance.rtol, t)?,
        None => config.tolerance,
    };
    Ok(harness::run_instances(&instances, &tolerance, jobs)?)
}

fn print_matrix(name: &str, m: &CMatrix) {
    println!("{name} =");
    for row in m.row_iter() {
        let cells: Vec<String> =
            row.iter().map(|z| if z.im.abs() < 1e-12 { format!("{:>8.4}", z.re) } else { format!("{:>8.4}{:+.4}i", z.re, z.im) }).collect();
        println!("  [{}]", cells.join(" "));
    }
}

fn demo_gns() -> Result<bool, Usage> {
    let tol = Tolerance::default();
    let cor = gns_example()?;
    println!("A = M_2, B = C, group Z_2 acting on A by Ad diag(1, -1) and trivially on B");
    println!("phi(a) = 0.7 a_00 + 0.3 a_11, an invariant faithful state; U_g = 1 on E = C");
    let input = check_equivariant(&cor, &tol)?;
    println!("input equivariance residual: {:.3e}", input.max());
    let q = dilate(&cor, &tol)?;
    println!("dilation space dimension: {}", q.triple.dim());
    print_matrix("V", &q.triple.embedding);
    print_matrix("dilated unitary for the generator", &q.unitaries[1]);
    let rep = check_dilation(&cor, &q, &tol)?;
    println!("spanning rank: {} of {}", rep.spanning_rank, rep.dim);
    println!("reconstruction residual: {:.3e}", rep.reconstruction);
    println!("covariance residual: {:.3e}", rep.equivariance.covariance);
    println!("embedding covariance residual: {:.3e}", rep.embedding_covariance);
    println!("direct vs categorical residual: {:.3e}", rep.direct_vs_categorical);
    let nontrivial = q.unitaries[1].iter().zip(CMatrix::identity(q.triple.dim(), q.triple.dim()).iter()).any(|(x, y)| (x - y).norm() > 0.5);
    println!("dilated unitary is {}", if nontrivial { "nontrivial although U_g = 1" } else { "trivial" });
    let pass = input.passes() && rep.passes() && nontrivial;
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}
