use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use taucopula::elementary::{estimate_elementary, mu_elementary};
use taucopula::harness::{self, ExperimentConfig};
use taucopula::io::{read_matrix_csv, write_matrix_csv, Header};
use taucopula::kendall::{kendall_tau_matrix, SampleMatrix};
use taucopula::refined::{mu_refined, solve_refined, SolverOptions};
use taucopula::simulate::{sample, CopulaSpec};
use taucopula::transform::{arcsine_transform, operator_norm, project_psd, sine_transform};
use taucopula::{bound_report, CorrelationMatrix, Error, Provenance};

/// Kendall's tau based correlation estimation for elliptical copulas.
#[derive(Parser)]
#[command(name = "taucopula", version)]
struct Cli {
    /// Master seed; overrides the seed in simulate specs and experiment configs.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kendall's tau matrix of a sample CSV (rows = observations).
    Tau(MatrixIo),
    /// Plug-in correlation estimate sin(pi/2 * tau) of a sample CSV.
    Plugin {
        #[command(flatten)]
        io: MatrixIo,
        /// Project the estimate onto the PSD correlation matrices.
        #[arg(long)]
        psd_project: bool,
    },
    /// Deviation scale, concentration bounds and penalty levels as JSON.
    Bounds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        alpha: f64,
        /// Operator norm of the empirical tau matrix.
        #[arg(long)]
        that_norm: Option<f64>,
        /// Operator norm of the population tau matrix.
        #[arg(long)]
        t_norm: Option<f64>,
        /// Use the effective-rank deviation scale in the population bound.
        #[arg(long, requires = "t_norm")]
        effective_rank: bool,
    },
    /// Elementary factor-model estimate from a plug-in correlation CSV.
    Elementary {
        #[command(flatten)]
        fit: FitArgs,
        /// JSON output path (default: stdout).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Nuclear-norm refined estimate from a plug-in correlation CSV.
    Refine {
        #[command(flatten)]
        fit: FitArgs,
        /// Convergence tolerance of the KKT residuals.
        #[arg(long, default_value_t = taucopula::refined::solver::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = taucopula::refined::solver::DEFAULT_MAX_ITER)]
        max_iter: usize,
        /// CSV path for the refined correlation matrix (default: stdout).
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// JSON path for the solver diagnostics (default: stderr).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Draw a sample CSV from a copula spec JSON.
    Simulate {
        /// Copula spec JSON: {"sigma": {"values": [[...]]}, "generator": ..., "marginals": [...], "seed": ...}.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        /// CSV output path (default: stdout).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment; exits 0 only if every check passes.
    Experiment {
        /// Experiment config JSON.
        #[arg(long)]
        config: PathBuf,
        /// JSON result path; overrides output_path in the config. The
        /// replicate table is written next to it with a .csv extension.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MatrixIo {
    /// Input CSV; "-" or omitted reads stdin.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Output CSV (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Plug-in correlation matrix CSV; "-" or omitted reads stdin.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Sample size behind the estimate.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    /// Penalty level; defaults to the data-driven choice.
    #[arg(long)]
    mu: Option<f64>,
}

fn open_input(path: Option<&Path>) -> anyhow::Result<Box<dyn Read>> {
    Ok(match path {
        None => Box::new(io::stdin().lock()),
        Some(p) if p == Path::new("-") => Box::new(io::stdin().lock()),
        Some(p) => Box::new(BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?)),
    })
}

fn open_output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        None => Box::new(io::stdout().lock()),
        Some(p) => Box::new(io::BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
    })
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> anyhow::Result<()> {
    let mut w = open_output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(Error::from)
        .with_context(|| format!("reading {}", path.display()))
}

fn read_sample(path: Option<&Path>) -> anyhow::Result<SampleMatrix> {
    Ok(SampleMatrix::new(read_matrix_csv(open_input(path)?, Header::Optional)?)?)
}

fn read_plugin(path: Option<&Path>) -> anyhow::Result<CorrelationMatrix> {
    Ok(CorrelationMatrix::new(read_matrix_csv(open_input(path)?, Header::Forbidden)?, Provenance::Plugin)?)
}

/// `‖T̂‖₂` recovered from the plug-in estimate.
fn that_norm(sigma_hat: &CorrelationMatrix) -> anyhow::Result<f64> {
    Ok(operator_norm(arcsine_transform(sigma_hat)?.values())?)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Tau(io) => {
            let t = kendall_tau_matrix(&read_sample(io.input.as_deref())?);
            write_matrix_csv(open_output(io.output.as_deref())?, t.values())?;
        }
        Command::Plugin { io, psd_project } => {
            let t = kendall_tau_matrix(&read_sample(io.input.as_deref())?);
            let mut s = sine_transform(&t)?;
            if psd_project {
                s = project_psd(&s)?;
            }
            write_matrix_csv(open_output(io.output.as_deref())?, s.values())?;
        }
        Command::Bounds { n, d, alpha, that_norm, t_norm, effective_rank } => {
            let report = bound_report(n, d, alpha, t_norm, that_norm, effective_rank)?;
            write_json(None, &report)?;
        }
        Command::Elementary { fit, output } => {
            let s = read_plugin(fit.input.as_deref())?;
            let mu = match fit.mu {
                Some(mu) => mu,
                None => mu_elementary(that_norm(&s)?, fit.n, s.dim(), fit.alpha)?,
            };
            write_json(output.as_deref(), &estimate_elementary(s.values(), mu)?)?;
        }
        Command::Refine { fit, tol, max_iter, output, report } => {
            let s = read_plugin(fit.input.as_deref())?;
            let mu = match fit.mu {
                Some(mu) => mu,
                None => mu_refined(that_norm(&s)?, fit.n, s.dim(), fit.alpha)?,
            };
            let res = solve_refined(s.values(), mu, SolverOptions { tol, max_iter })?;
            write_matrix_csv(open_output(output.as_deref())?, res.sigma_tilde.values())?;
            match report {
                Some(p) => write_json(Some(&p), &res)?,
                None => {
                    let mut e = io::stderr().lock();
                    serde_json::to_writer_pretty(&mut e, &res)?;
                    writeln!(e)?;
                }
            }
            if !res.converged {
                eprintln!("warning: solver stopped after {} iterations without meeting the KKT tolerance", res.iterations);
            }
        }
        Command::Simulate { spec, n, output } => {
            let mut spec: CopulaSpec = read_json(&spec)?;
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            let x = sample(&spec, n)?;
            write_matrix_csv(open_output(output.as_deref())?, x.data())?;
        }
        Command::Experiment { config, output } => {
            let mut cfg: ExperimentConfig = read_json(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if output.is_some() {
                cfg.output_path = output;
            }
            let res = harness::run(&cfg)?;
            match &cfg.output_path {
                Some(p) => {
                    let csv = res.write(p)?;
                    eprintln!("wrote {} and {}", p.display(), csv.display());
                }
                None => write_json(None, &res)?,
            }
            for c in &res.summary.coverage {
                eprintln!(
                    "{}: {}/{} = {:.4} (floor {:.4}, 99% lower bound {:.4}) {}",
                    c.event,
                    c.successes,
                    c.replicates,
                    c.frequency,
                    c.floor,
                    c.lower_confidence,
                    if c.pass { "pass" } else { "FAIL" }
                );
            }
            eprintln!("status: {:?}", res.summary.status);
            if !res.passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Malformed CSV or JSON input exits with 2; every other failure with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    let malformed = err
        .chain()
        .any(|e| matches!(e.downcast_ref::<Error>(), Some(Error::Parse { .. } | Error::Json(_))));
    if malformed {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
