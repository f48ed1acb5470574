mod commands;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::Failure;

#[derive(Parser, Debug)]
#[command(
    name = "pauli-selftest",
    version,
    about = "Run self-testing and certification experiments and emit a report"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct Output {
    /// Seed for every randomized step
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Report format (robust-curve defaults to csv, everything else to json)
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Triple-CHSH self-test of a single pair, ideal or with Bell-value deficit epsilon
    Selftest {
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Parallel self-test of n pairs, including the Bell-state-measurement alignment check
    ParallelSelftest {
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// One-based sites whose observables are transposed, e.g. `--flip-sites 2,3`
        #[arg(long, value_delimiter = ',')]
        flip_sites: Vec<usize>,
        /// Transpose every observable of the strategy
        #[arg(long)]
        transpose: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Certify an isotropic target through the four-party network
    Certify {
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Weight of the maximally entangled component of the target
        #[arg(long, default_value_t = 0.6)]
        p: f64,
        /// Visibility of each auxiliary pair
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Witness JSON; defaults to 2(I - d|Phi><Phi|)
        #[arg(long)]
        witness_file: Option<PathBuf>,
        /// Also write the witness used to this path
        #[arg(long)]
        emit_witness: Option<PathBuf>,
        /// Also write the full correlation table to this path
        #[arg(long)]
        correlations_out: Option<PathBuf>,
        /// Random product states sampled by the separable search
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Critical self-testing radius against auxiliary visibility for a Werner target
    RobustCurve {
        #[arg(long, default_value_t = 0.6)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        eta_min: f64,
        #[arg(long, default_value_t = 1.0)]
        eta_max: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[command(flatten)]
        output: Output,
    },
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::Usage(format!("stdout: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let (text, passed, out) = match cli.command {
        Command::Selftest { epsilon, output } => {
            let r = commands::selftest(epsilon, &output)?;
            (
                render(&r, output.format.unwrap_or(Format::Json)),
                r.passed(),
                output.out,
            )
        }
        Command::ParallelSelftest {
            n,
            flip_sites,
            transpose,
            output,
        } => {
            let r = commands::parallel_selftest(n, &flip_sites, transpose, &output)?;
            (
                render(&r, output.format.unwrap_or(Format::Json)),
                r.passed(),
                output.out,
            )
        }
        Command::Certify {
            n,
            p,
            eta,
            witness_file,
            emit_witness,
            correlations_out,
            samples,
            output,
        } => {
            let extra = commands::CertifyFiles {
                witness_file,
                emit_witness,
                correlations_out,
            };
            let r = commands::certify(n, p, eta, samples, &extra, &output)?;
            (
                render(&r, output.format.unwrap_or(Format::Json)),
                r.passed(),
                output.out,
            )
        }
        Command::RobustCurve {
            p,
            eta_min,
            eta_max,
            steps,
            output,
        } => {
            let (r, csv) = commands::robust_curve(p, eta_min, eta_max, steps, &output)?;
            let text = match output.format.unwrap_or(Format::Csv) {
                Format::Csv => csv,
                Format::Json => r.to_json(),
            };
            (text, r.passed(), output.out)
        }
    };
    emit(&text, &out)?;
    Ok(passed)
}

fn render(r: &report::RunReport, format: Format) -> String {
    match format {
        Format::Json => r.to_json(),
        Format::Csv => r.to_csv(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = run(cli);
    eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
