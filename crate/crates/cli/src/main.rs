use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robust_huber::experiments::{self, Dataset, Estimate, ExperimentSpec, Scenario};
use robust_huber::{DenseMatrix, DenseVector, Error};

#[derive(Parser)]
#[command(name = "robust-huber", version, about = "Huber-loss estimators under oblivious outliers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the first instance of a config as CSV files into a directory.
    Gen(Common),
    /// Solve the first instance of a config and print its error metrics.
    Solve(Common),
    /// Build the condition certificate for the first instance of a config.
    Verify(Common),
    /// Run every grid point and trial of a config.
    Sweep(Common),
    /// Run a lower-bound phase config.
    Phase(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Assertion(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Assertion(_) => 1,
            Failure::Lib(Error::Config(_) | Error::Precondition(_) | Error::Domain(_) | Error::Io { .. } | Error::Csv { .. }) => 2,
            Failure::Lib(Error::Numeric(_) | Error::Diverged { .. } | Error::Sampling(_)) => 3,
        }
    }
}

fn load(c: &Common) -> Result<ExperimentSpec, Failure> {
    let mut spec = ExperimentSpec::from_path(&c.config)?;
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    if c.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()).into());
    }
    Ok(spec)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(io_err(path))?;
    Ok(())
}

fn matrix_csv(m: &DenseMatrix) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

fn vector_csv(v: &DenseVector) -> String {
    v.iter().map(|x| format!("{x:.16e}\n")).collect()
}

fn gen(c: &Common) -> Result<(), Failure> {
    let spec = load(c)?;
    let (_, ds) = experiments::generate_job(&spec, 0, 0)?;
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("data"));
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let files: Vec<(&str, String)> = match &ds {
        Dataset::Regression { problem, sigma } => {
            let truth = problem.truth()?;
            vec![
                ("X.csv", matrix_csv(&problem.x)),
                ("y.csv", vector_csv(&problem.y)),
                ("beta.csv", vector_csv(&truth.beta)),
                ("sigma.csv", matrix_csv(sigma)),
            ]
        }
        Dataset::Pca { problem, observed } => {
            let mut f = vec![("Y.csv", matrix_csv(&problem.y)), ("L.csv", matrix_csv(&problem.truth()?.l))];
            if let Some(obs) = observed {
                let n = problem.n();
                let mask = DenseMatrix::from_fn(n, n, |i, j| if obs[j * n + i] { 1.0 } else { 0.0 });
                f.push(("observed.csv", matrix_csv(&mask)));
            }
            f
        }
    };
    for (name, text) in files {
        write_text(&dir.join(name), &text)?;
        println!("wrote {}", dir.join(name).display());
    }
    Ok(())
}

fn solve(c: &Common) -> Result<(), Failure> {
    let spec = load(c)?;
    let (_, ds) = experiments::generate_job(&spec, 0, 0)?;
    let (est, res) = experiments::solve_dataset(&spec, &ds)?;
    println!("iterations = {}", res.iterations);
    println!("converged = {}", res.converged);
    println!("objective = {:.16e}", res.objective);
    println!("reference_dominated = {}", res.reference_dominated == Some(true));
    let text = match (&ds, &est) {
        (Dataset::Regression { problem, .. }, Estimate::Vector(b)) => {
            println!("prediction_error = {:.16e}", robust_huber::estimators::prediction_error(problem, b)?);
            println!("parameter_error = {:.16e}", robust_huber::estimators::parameter_error(problem, b)?);
            vector_csv(b)
        }
        (Dataset::Pca { problem, .. }, Estimate::Matrix(l)) => {
            println!("frobenius_error = {:.16e}", robust_huber::estimators::frobenius_error(problem, l)?);
            matrix_csv(l)
        }
        _ => unreachable!("solve_dataset keeps the dataset kind"),
    };
    if let Some(out) = &c.out {
        write_text(out, &text)?;
    }
    if !res.converged {
        return Err(Error::Diverged { iterations: res.iterations, reason: "iteration limit reached".into() }.into());
    }
    Ok(())
}

fn verify(c: &Common) -> Result<(), Failure> {
    let spec = load(c)?;
    let (m, ds) = experiments::generate_job(&spec, 0, 0)?;
    let (est, _) = experiments::solve_dataset(&spec, &ds)?;
    let cert = experiments::certify_dataset(&spec, &m, &ds, &est, spec.seed().derive(0xCE27))?;
    let report = cert.to_report();
    print!("{report}");
    if let Some(out) = &c.out {
        write_text(out, &report)?;
    }
    if cert.implication_violated() {
        return Err(Failure::Assertion("all conditions hold but the error exceeds the radius".into()));
    }
    Ok(())
}

fn sweep(c: &Common, require_phase: bool) -> Result<(), Failure> {
    let spec = load(c)?;
    if require_phase && spec.scenario != Scenario::LowerboundPhase {
        return Err(Error::Config(format!("phase needs scenario lowerbound_phase, got {}", spec.scenario.as_str())).into());
    }
    let rows = match c.threads {
        Some(t) => experiments::run_experiment_with_threads(&spec, t)?,
        None => experiments::run_experiment(&spec)?,
    };
    let csv = c.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", spec.scenario.as_str())));
    experiments::emit_csv(&rows, &csv)?;
    let report = csv.with_extension("report.txt");
    let checks = experiments::emit_report(&spec, &rows, &report, &csv)?;
    let text = std::fs::read_to_string(&report).map_err(io_err(&report))?;
    print!("{text}");
    let _ = std::io::stdout().flush();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.description.as_str()).collect();
    if !failed.is_empty() {
        return Err(Failure::Assertion(failed.join("; ")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(c) => gen(c),
        Command::Solve(c) => solve(c),
        Command::Verify(c) => verify(c),
        Command::Sweep(c) => sweep(c, false),
        Command::Phase(c) => sweep(c, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Assertion(m) => eprintln!("assertion failed: {m}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
