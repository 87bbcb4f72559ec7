mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use mimlearn::learner::{DatasetSource, GeneratorSource};
use mimlearn::rng::derive_seed;
use mimlearn::sq::{self, MomentMethod};
use mimlearn::{
    learn, opt_of_rcn, zero_one_error, Concept, LabeledDataset, NoiseSpec, PiecewiseConstantClassifier,
    TrainTrace,
};
use rayon::prelude::*;
use serde::Serialize;

use config::{ExperimentConfig, SweepGrid};

const METRICS_HEADER: &str = "trial,seed,K,d,noise_kind,noise_rate,opt_est,test_error,k_final,iters";
const TEST_TAG: u64 = 0x7E57;

#[derive(Parser)]
#[command(name = "mimlearn", version, about = "Multi-index model learning experiments")]
struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (a file path for `sq-build`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one dataset CSV per trial.
    Gen,
    /// Learn a classifier; writes model.json and trace.csv.
    Train,
    /// Error and confusion of a model on a dataset.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Train and test over a grid of noise rates, label counts and dimensions.
    Sweep,
    /// Write a circulant confusion matrix.
    SqBuild {
        #[arg(long, value_enum)]
        kind: ChannelKind,
        #[arg(long)]
        k: usize,
    },
    /// Max low-degree moment deviation of a channel on the rotational instance.
    SqVerify {
        #[arg(long)]
        h: PathBuf,
        #[arg(long)]
        degree: u32,
        #[arg(long, value_enum, default_value_t = Method::Quad)]
        method: Method,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelKind {
    Rcn,
    Contrastive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Quad,
    Mc,
}

/// Failures split by exit code.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn config_err(e: anyhow::Error) -> Failure {
    Failure::Config(e)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| config_err(anyhow!("--config is required")))?;
    ExperimentConfig::load(path).map_err(config_err)
}

fn out_dir(cli: &Cli) -> anyhow::Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Gen => {
            let cfg = load_config(cli)?;
            cmd_gen(cli, &cfg)?;
        }
        Command::Train => {
            let cfg = load_config(cli)?;
            cmd_train(cli, &cfg)?;
        }
        Command::Eval { model, data } => cmd_eval(cli, model, data)?,
        Command::Sweep => {
            let cfg = load_config(cli)?;
            let grid = cfg.grid.clone().ok_or_else(|| config_err(anyhow!("sweep needs a `grid` field")))?;
            let cells = expand_grid(&cfg, &grid).map_err(config_err)?;
            cmd_sweep(cli, &cfg, &cells)?;
        }
        Command::SqBuild { kind, k } => {
            let h = match kind {
                ChannelKind::Rcn => sq::build_rcn_confusion_matrix(*k),
                ChannelKind::Contrastive => sq::build_contrastive_confusion_matrix(*k),
            }
            .map_err(|e| config_err(e.into()))?;
            let json = serde_json::to_string_pretty(&h).map_err(anyhow::Error::from)?;
            match &cli.out {
                Some(path) => fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
                None => println!("{json}"),
            }
        }
        Command::SqVerify { h, degree, method, n } => {
            let matrix = config::read_matrix(h).map_err(config_err)?;
            let method = match method {
                Method::Quad => MomentMethod::Quadrature,
                Method::Mc => MomentMethod::MonteCarlo { n: *n, seed: cli.seed },
            };
            let dev = sq::verify_moment_matching(&matrix, matrix.size(), *degree, method).map_err(anyhow::Error::from)?;
            println!("{dev:e}");
        }
    }
    Ok(())
}

fn cmd_gen(cli: &Cli, cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let dir = out_dir(cli)?;
    for trial in 0..cfg.trials {
        let seed = cfg.trial_seed(cli.seed, trial);
        let concept = cfg.concept.build(seed)?;
        let noise = cfg.noise.build(concept.label_count())?;
        let ds = mimlearn::sample_dataset(&concept, &noise, cfg.n, seed)?;
        ds.save_csv(dir.join(format!("trial_{trial}.csv")))?;
        fs::write(dir.join(format!("concept_{trial}.json")), serde_json::to_string_pretty(&concept)? + "\n")?;
    }
    Ok(())
}

fn train_once(
    cfg: &ExperimentConfig,
    concept: &Concept,
    noise: &NoiseSpec,
    seed: u64,
) -> anyhow::Result<(PiecewiseConstantClassifier, TrainTrace)> {
    let mut learner = cfg.learner.clone();
    learner.seed = seed;
    let result = match &cfg.dataset {
        Some(path) => {
            let data = LabeledDataset::load_csv(path, concept.label_count())?;
            let mut src = DatasetSource::new(data).with_truth(concept.relevant_subspace());
            learn(&mut src, &learner)
        }
        None => {
            let mut src = GeneratorSource::new(concept.clone(), noise.clone(), seed)?;
            learn(&mut src, &learner)
        }
    };
    result.map_err(|e| match e {
        mimlearn::Error::BasisCapExceeded { dim, cap, trace } => anyhow!(
            "basis dimension {dim} exceeds cap {cap}\n{}",
            trace.to_csv_string().unwrap_or_default()
        ),
        other => other.into(),
    })
}

#[derive(Serialize)]
struct TrainSummary {
    seed: u64,
    k_final: usize,
    iters: usize,
    productive_iters: usize,
}

fn cmd_train(cli: &Cli, cfg: &ExperimentConfig) -> anyhow::Result<()> {
    let dir = out_dir(cli)?;
    let seed = cfg.trial_seed(cli.seed, 0);
    let concept = cfg.concept.build(seed)?;
    let noise = cfg.noise.build(concept.label_count())?;
    let (model, trace) = train_once(cfg, &concept, &noise, seed)?;
    model.save(dir.join("model.json"))?;
    let mut f = fs::File::create(dir.join("trace.csv"))?;
    trace.write_csv(&mut f)?;
    f.flush()?;
    let summary = TrainSummary {
        seed,
        k_final: trace.final_dim(),
        iters: trace.iterations(),
        productive_iters: trace.productive_iterations(),
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    n: usize,
    error: f64,
    /// `confusion[i][j]`: fraction of samples with label `i` predicted as `j`.
    confusion: Vec<Vec<f64>>,
}

fn evaluate(model: &PiecewiseConstantClassifier, data: &LabeledDataset) -> EvalReport {
    let k = data.label_count();
    let mut counts = vec![vec![0usize; k]; k];
    for (x, y) in data.iter() {
        counts[y][model.classify(x)] += 1;
    }
    let n = data.len().max(1) as f64;
    EvalReport {
        n: data.len(),
        error: zero_one_error(model, data),
        confusion: counts.into_iter().map(|r| r.into_iter().map(|c| c as f64 / n).collect()).collect(),
    }
}

fn cmd_eval(cli: &Cli, model: &Path, data: &Path) -> Result<(), Failure> {
    let model = PiecewiseConstantClassifier::load(model)
        .with_context(|| format!("loading model {}", model.display()))
        .map_err(config_err)?;
    let data = LabeledDataset::load_csv(data, model.label_count())
        .with_context(|| format!("loading dataset {}", data.display()))
        .map_err(config_err)?;
    let report = evaluate(&model, &data);
    let json = serde_json::to_string(&report).map_err(anyhow::Error::from)?;
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).map_err(anyhow::Error::from)?;
        fs::write(dir.join("metrics.json"), format!("{json}\n")).map_err(anyhow::Error::from)?;
    }
    println!("{json}");
    Ok(())
}

/// One grid cell: the concept family and noise at fixed `(K, d, rate)`.
struct Cell {
    concept: config::ConceptSpec,
    noise: config::NoiseConfig,
    rate: Option<f64>,
}

/// Cartesian product over the listed axes in (rate, K, d) order. Axes left
/// out stay at the base config; a grid that lists no axis, or an empty
/// list, has no cells.
fn expand_grid(cfg: &ExperimentConfig, grid: &SweepGrid) -> anyhow::Result<Vec<Cell>> {
    if grid.noise_rates.is_none() && grid.label_counts.is_none() && grid.dims.is_none() {
        return Ok(Vec::new());
    }
    let axis = |v: &Option<Vec<usize>>| v.as_ref().map_or(vec![None], |v| v.iter().map(|&x| Some(x)).collect());
    let rates: Vec<Option<f64>> = grid.noise_rates.as_ref().map_or(vec![None], |v| v.iter().map(|&r| Some(r)).collect());
    let mut cells = Vec::new();
    for rate in &rates {
        for k in axis(&grid.label_counts) {
            for d in axis(&grid.dims) {
                let noise = match rate {
                    Some(r) => cfg.noise.with_rate(*r)?,
                    None => cfg.noise.clone(),
                };
                cells.push(Cell { concept: cfg.concept.with_shape(k, d)?, noise, rate: *rate });
            }
        }
    }
    Ok(cells)
}

struct TrialRow {
    trial: usize,
    seed: u64,
    k: usize,
    d: usize,
    noise_kind: &'static str,
    noise_rate: f64,
    opt_est: f64,
    test_error: f64,
    k_final: usize,
    iters: usize,
}

fn optimum(concept: &Concept, noise: &NoiseSpec, n: usize, seed: u64) -> anyhow::Result<f64> {
    Ok(match noise {
        NoiseSpec::None => 0.0,
        NoiseSpec::Adversarial { rate, .. } => (rate * n as f64).floor() / n as f64,
        NoiseSpec::Rcn { matrix } | NoiseSpec::Contrastive { matrix } => opt_of_rcn(concept, matrix, n, seed)?.0,
    })
}

fn run_cell_trial(cfg: &ExperimentConfig, cell: &Cell, trial: usize, seed: u64) -> anyhow::Result<TrialRow> {
    let concept = cell.concept.build(seed)?;
    let noise = cell.noise.build(concept.label_count())?;
    let (model, trace) = train_once(cfg, &concept, &noise, seed)?;
    let test_seed = derive_seed(seed, TEST_TAG);
    let test = mimlearn::sample_dataset(&concept, &noise, cfg.n_test, test_seed)?;
    let opt_n = if matches!(noise, NoiseSpec::Adversarial { .. }) { cfg.n_test } else { cfg.n_opt };
    Ok(TrialRow {
        trial,
        seed,
        k: concept.label_count(),
        d: concept.dim(),
        noise_kind: cell.noise.kind_name(),
        noise_rate: cell.rate.unwrap_or_else(|| match &noise {
            NoiseSpec::Rcn { matrix } | NoiseSpec::Contrastive { matrix } => 1.0 - matrix.get(0, 0),
            other => other.rate(),
        }),
        opt_est: optimum(&concept, &noise, opt_n, test_seed)?,
        test_error: evaluate(&model, &test).error,
        k_final: trace.final_dim(),
        iters: trace.iterations(),
    })
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn cmd_sweep(cli: &Cli, cfg: &ExperimentConfig, cells: &[Cell]) -> anyhow::Result<()> {
    let dir = out_dir(cli)?;
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..cfg.trials).map(move |t| (c, t))).collect();
    let rows: Vec<anyhow::Result<TrialRow>> = jobs
        .par_iter()
        .map(|&(c, t)| run_cell_trial(cfg, &cells[c], t, cfg.trial_seed(cli.seed, t)))
        .collect();
    let rows = rows.into_iter().collect::<anyhow::Result<Vec<_>>>()?;

    let mut metrics = format!("{METRICS_HEADER}\n");
    for r in &rows {
        metrics.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.trial, r.seed, r.k, r.d, r.noise_kind, r.noise_rate, r.opt_est, r.test_error, r.k_final, r.iters
        ));
    }
    fs::write(dir.join("metrics.csv"), &metrics)?;

    let mut summary = String::from("K,d,noise_kind,noise_rate,trials,mean_opt,mean_error,stderr_error\n");
    for chunk in rows.chunks(cfg.trials.max(1)) {
        let Some(first) = chunk.first() else { continue };
        let errors: Vec<f64> = chunk.iter().map(|r| r.test_error).collect();
        let opts: Vec<f64> = chunk.iter().map(|r| r.opt_est).collect();
        let (mean, se) = mean_stderr(&errors);
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            first.k,
            first.d,
            first.noise_kind,
            first.noise_rate,
            chunk.len(),
            mean_stderr(&opts).0,
            mean,
            se
        ));
    }
    fs::write(dir.join("summary.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}
