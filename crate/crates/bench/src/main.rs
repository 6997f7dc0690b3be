use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kronsense::rip::{bound_report, DEFAULT_ENUMERATION_CAP};
use kronsense::{kron, BlockLayout, Matrix, NoiseMode, SolverConfig, Sparsity, SparsityModel, StepRule};
use kronsense_bench::config::{AlgorithmSpec, ExperimentConfig};
use kronsense_bench::harness::{run_algorithm, run_experiment, summarize};
use kronsense_bench::output::write_outputs;
use kronsense_bench::{BenchError, Result};

#[derive(Parser)]
#[command(name = "kronsense", version, about = "Kronecker-structured sparse recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment described by a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the number of trials per SNR.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Recover x from y = (H1 ⊗ H2)x + n and print it as a CSV column.
    Solve {
        #[arg(long)]
        h1: PathBuf,
        #[arg(long)]
        h2: PathBuf,
        /// Measurements: a single row or column of M1·M2 values, or the M2 x M1 matrix Y.
        #[arg(long)]
        y: PathBuf,
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long, value_enum)]
        algo: Algo,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        s1: Option<usize>,
        #[arg(long)]
        s2: Option<usize>,
        /// Known noise variance for SBL; estimated when omitted.
        #[arg(long)]
        noise_var: Option<f64>,
        #[arg(long, value_enum, default_value_t = Step::ColumnNormalized)]
        step: Step,
        #[arg(long, default_value_t = 300)]
        max_iter: usize,
    },
    /// Exact restricted isometry constant of H1 ⊗ H2 and its bounds, as JSON.
    Ric {
        #[arg(long)]
        h1: PathBuf,
        #[arg(long)]
        h2: PathBuf,
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long)]
        s1: Option<usize>,
        #[arg(long)]
        s2: Option<usize>,
        /// Largest number of supports to enumerate.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Standard,
    Hier,
    Kron,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    TsrSbl,
    TsrOmp,
    TsrHtp,
    Sbl,
    Omp,
    Htp,
    Hihtp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Step {
    Unit,
    ColumnNormalized,
    InverseSpectral,
}

impl From<Step> for StepRule {
    fn from(s: Step) -> Self {
        match s {
            Step::Unit => StepRule::Unit,
            Step::ColumnNormalized => StepRule::ColumnNormalized,
            Step::InverseSpectral => StepRule::InverseSpectral,
        }
    }
}

fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    Matrix::from_csv(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}

fn sparsity_model(
    kind: ModelKind,
    s: Option<usize>,
    s1: Option<usize>,
    s2: Option<usize>,
    layout: BlockLayout,
) -> Result<SparsityModel> {
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| BenchError::Config(format!("--{flag} is required")));
    let sparsity = match kind {
        ModelKind::Standard => Sparsity::Standard { s: need(s, "s")? },
        ModelKind::Hier => Sparsity::Hierarchical { s1: need(s1, "s1")?, s2: need(s2, "s2")? },
        ModelKind::Kron => Sparsity::KroneckerSupported { s1: need(s1, "s1")?, s2: need(s2, "s2")? },
    };
    Ok(SparsityModel::new(sparsity, layout)?)
}

fn measurement_vector(y: Matrix, m1: usize, m2: usize) -> Result<Vec<f64>> {
    let (r, c) = y.shape();
    if r * c != m1 * m2 {
        return Err(BenchError::Config(format!("y has {} entries, expected M1·M2 = {}", r * c, m1 * m2)));
    }
    if r == 1 || c == 1 {
        Ok(y.into_vec())
    } else if (r, c) == (m2, m1) {
        Ok(y.vec().into_vec())
    } else {
        Err(BenchError::Config(format!("y is {r}x{c}; expected a vector or the {m2}x{m1} matrix Y")))
    }
}

fn bench(config: &Path, out: &Path, trials: Option<usize>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    let output = run_experiment(&cfg)?;
    let written = write_outputs(out, &cfg, &output)?;
    println!("{:<12} {:>8} {:>7} {:>12} {:>12} {:>7}", "algorithm", "snr_db", "trials", "mean_nmse", "runtime_s", "exact");
    for row in summarize(&output.records) {
        println!(
            "{:<12} {:>8} {:>7} {:>12.4e} {:>12.4e} {:>7.3}",
            row.algorithm, row.snr_db, row.trials, row.mean_nmse, row.mean_runtime_s, row.exact_rate
        );
    }
    if !output.failures.is_empty() {
        eprintln!("{} solver runs failed; see failures.csv", output.failures.len());
    }
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve(
    h1: &Path,
    h2: &Path,
    y: &Path,
    model: ModelKind,
    algo: Algo,
    (s, s1, s2): (Option<usize>, Option<usize>, Option<usize>),
    noise_var: Option<f64>,
    step: Step,
    max_iter: usize,
) -> Result<()> {
    let (h1, h2) = (read_matrix(h1)?, read_matrix(h2)?);
    let y = measurement_vector(read_matrix(y)?, h1.rows(), h2.rows())?;
    let layout = BlockLayout::new(h1.cols(), h2.cols())?;
    let model = sparsity_model(model, s, s1, s2, layout)?;
    let spec = match algo {
        Algo::TsrSbl => AlgorithmSpec::TsrSbl,
        Algo::TsrOmp => AlgorithmSpec::TsrOmp,
        Algo::TsrHtp => AlgorithmSpec::TsrHtp,
        Algo::Sbl => AlgorithmSpec::Sbl,
        Algo::Omp => AlgorithmSpec::Omp,
        Algo::Htp => AlgorithmSpec::Htp,
        Algo::Hihtp => AlgorithmSpec::Hihtp { s1: None, s2: None, overestimate: 1.0, label: None },
    };
    let cfg = SolverConfig { max_iter, ..SolverConfig::default() }.with_step(step.into());
    cfg.validate()?;
    let noise = noise_var.map_or(NoiseMode::Estimated, |sigma2| NoiseMode::Fixed { sigma2 });
    let direct = spec.is_direct().then(|| kron(&h1, &h2));
    let x_hat = run_algorithm(&spec, &h1, &h2, &y, &model, &cfg, noise, direct.as_ref())?;
    print!("{}", x_hat.to_column().to_csv());
    Ok(())
}

fn ric(
    h1: &Path,
    h2: &Path,
    model: ModelKind,
    (s, s1, s2): (Option<usize>, Option<usize>, Option<usize>),
    cap: u64,
) -> Result<()> {
    let (h1, h2) = (read_matrix(h1)?, read_matrix(h2)?);
    let layout = BlockLayout::new(h1.cols(), h2.cols())?;
    let model = sparsity_model(model, s, s1, s2, layout)?;
    let report = bound_report(&h1, &h2, &model, cap)?;
    let text = serde_json::to_string_pretty(&report)
        .map_err(|source| BenchError::Json { path: PathBuf::from("<stdout>"), source })?;
    println!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench { config, out, trials } => bench(&config, &out, trials),
        Command::Solve { h1, h2, y, model, algo, s, s1, s2, noise_var, step, max_iter } => {
            solve(&h1, &h2, &y, model, algo, (s, s1, s2), noise_var, step, max_iter)
        }
        Command::Ric { h1, h2, model, s, s1, s2, cap } => ric(&h1, &h2, model, (s, s1, s2), cap),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
