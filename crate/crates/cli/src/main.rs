use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use pilotlab::hqcnn::{LossMode, ModelKind, Readout};
use pilotlab::lab::{
    generate_dataset, run_benchmark, run_gradcheck, run_noise_sweep, train_checkpoint, BenchmarkOptions, Checkpoint,
    Dataset, LabConfig, Method, DEFAULT_ZNE_SCALES,
};
use pilotlab::qsim::ShiftRule;

/// Pilot assignment experiments for cell-free massive MIMO.
#[derive(Parser)]
#[command(name = "pilotlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sup,
    Unsup,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Hqcnn,
    HqcnnHur,
    Mlp,
    CnnLight,
    CnnHeavy,
}

impl ModelArg {
    fn kind(self) -> ModelKind {
        match self {
            ModelArg::Hqcnn => ModelKind::Hqcnn,
            ModelArg::HqcnnHur => ModelKind::HqcnnHur,
            ModelArg::Mlp => ModelKind::Mlp,
            ModelArg::CnnLight => ModelKind::CnnLight,
            ModelArg::CnnHeavy => ModelKind::CnnHeavy,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset of fading realizations.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Sample count; defaults to the config's train or test size.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_enum, default_value = "train")]
        split: Split,
    },
    /// Attach master-AP labels to a dataset.
    Label {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint plus its history.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "hqcnn")]
        model: ModelArg,
        /// Overrides the config's loss mode.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Overrides the config's training seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from this checkpoint instead of a fresh initialization.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Checkpoint path; the history goes next to it as `<out>.history.json`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Score assigners on one dataset and write a CSV report.
    Benchmark {
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated: random,greedy,location,master-ap,epas,hqcnn,hqcnn-hur,mlp,cnn-light,cnn-heavy
        #[arg(long, default_value = "random,greedy,location,master-ap,epas")]
        methods: String,
        /// Checkpoint for a learned method (repeatable).
        #[arg(long = "checkpoint")]
        checkpoints: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Depolarizing rate applied to hybrid models.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        zne: bool,
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Compare every gradient against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the wrong-sign shift rule (the run is expected to fail).
        #[arg(long)]
        mutate: bool,
    },
    /// Evaluate a hybrid checkpoint under depolarizing noise.
    NoiseSweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated depolarizing rates.
        #[arg(long, default_value = "0.1")]
        noise: String,
        #[arg(long)]
        zne: bool,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> anyhow::Result<LabConfig> {
    match path {
        Some(p) => LabConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(LabConfig::default()),
    }
}

fn load_dataset(path: &Path) -> anyhow::Result<Dataset> {
    Dataset::load(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn write(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => write(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_rates(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("bad noise rate `{t}`")))
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Generate { config, seed, out, samples, split } => {
            let cfg = load_config(config.as_deref())?;
            let count = samples.unwrap_or(match split {
                Split::Train => cfg.dataset.train_samples,
                Split::Test => cfg.dataset.test_samples,
            });
            let ds = generate_dataset(&cfg.system, count, seed, cfg.dataset.fixed_aps)?;
            ds.save(&out).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("wrote {} samples to {}", ds.len(), out.display());
        }
        Command::Label { dataset, out } => {
            let mut ds = load_dataset(&dataset)?;
            ds.label()?;
            ds.save(&out).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("labeled {} samples", ds.len());
        }
        Command::Train { config, dataset, model, mode, seed, epochs, init, out, quiet } => {
            let cfg = load_config(config.as_deref())?;
            let ds = load_dataset(&dataset)?;
            let mut training = cfg.training.clone();
            if let Some(m) = mode {
                training.mode = match m {
                    Mode::Sup => LossMode::Supervised,
                    Mode::Unsup => LossMode::Unsupervised,
                };
            }
            if let Some(s) = seed {
                training.seed = s;
            }
            if let Some(e) = epochs {
                training.epochs = e;
            }
            let mut report = |epoch: usize, loss: f64| {
                if !quiet {
                    eprintln!("epoch {epoch:>4}  loss {loss:.6}");
                }
            };
            let init = match &init {
                Some(p) => Some(Checkpoint::load(p).with_context(|| format!("reading checkpoint {}", p.display()))?),
                None => None,
            };
            let outcome = train_checkpoint(&cfg, &training, model.kind(), &ds, init.as_ref(), &mut report)?;
            outcome.checkpoint.save(&out).with_context(|| format!("writing {}", out.display()))?;
            let history = outcome.result?;
            let history_path = PathBuf::from(format!("{}.history.json", out.display()));
            let record = serde_json::json!({
                "model": model.kind().name(),
                "config_hash": cfg.hash(),
                "training": training,
                "history": history,
            });
            write(&history_path, serde_json::to_string_pretty(&record)?.as_bytes())?;
            eprintln!("checkpoint {} ({} parameters)", out.display(), outcome.checkpoint.model.params().len());
        }
        Command::Benchmark { dataset, methods, checkpoints, out, seed, noise, zne, shots } => {
            let ds = load_dataset(&dataset)?;
            let methods = Method::parse_list(&methods)?;
            let mut loaded = BTreeMap::new();
            for path in &checkpoints {
                let ck = Checkpoint::load(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
                loaded.insert(ck.model.kind(), ck);
            }
            let readout = Readout {
                noise,
                zne_scales: zne.then(|| DEFAULT_ZNE_SCALES.to_vec()),
                shots,
                shot_seed: seed,
            };
            let options = BenchmarkOptions { seed, readout, ..BenchmarkOptions::default() };
            let report = run_benchmark(&ds, &methods, &loaded, &options)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            eprint!("{}", report.to_table());
            emit(out.as_deref(), &report.to_csv())?;
        }
        Command::Gradcheck { seed, mutate } => {
            let rule = if mutate { ShiftRule::Sum } else { ShiftRule::Difference };
            let report = run_gradcheck(seed, rule)?;
            print!("{}", report.to_text());
            return Ok(report.passed());
        }
        Command::NoiseSweep { checkpoint, dataset, noise, zne, shots, seed, out } => {
            let ck = Checkpoint::load(&checkpoint).with_context(|| format!("reading checkpoint {}", checkpoint.display()))?;
            let ds = load_dataset(&dataset)?;
            let rates = parse_rates(&noise)?;
            if rates.is_empty() {
                bail!("no noise rates given");
            }
            let scales = zne.then_some(&DEFAULT_ZNE_SCALES[..]);
            let sweep = run_noise_sweep(&ck, &ds, &rates, scales, shots, seed)?;
            emit(out.as_deref(), &sweep.to_csv())?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let internal = e.chain().any(|c| matches!(c.downcast_ref::<pilotlab::Error>(), Some(pilotlab::Error::Invariant(_))));
            ExitCode::from(if internal { 2 } else { 1 })
        }
    }
}
