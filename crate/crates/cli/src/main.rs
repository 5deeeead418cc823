//! `qlam` command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qlam::trainer::{self, ModelKind, SplitMode, TrainConfig};
use qlam::{DatasetKind, ErrorKind, QlamError};

#[derive(Parser)]
#[command(
    name = "qlam",
    version,
    about = "Quantum long-attention memory sequence classifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write metrics and a checkpoint.
    Train(Overrides),
    /// Test-split accuracy of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Train every fold and report mean and standard deviation.
    Folds(Overrides),
}

/// Config file plus per-field overrides; flags win over the file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_dataset)]
    dataset: Option<DatasetKind>,
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    fold: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, value_parser = parse_split)]
    split: Option<SplitMode>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    qubits: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    /// Shots per Pauli term for test readouts.
    #[arg(long)]
    shots: Option<u32>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Dataset root; otherwise the config value, then $QLAM_DATA_DIR, then ./data.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Record elapsed seconds in the metrics file.
    #[arg(long)]
    wall_time: bool,
}

fn parse_dataset(s: &str) -> Result<DatasetKind, String> {
    s.parse().map_err(|e: QlamError| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    match s {
        "qlam" => Ok(ModelKind::Qlam),
        "elman" => Ok(ModelKind::Elman),
        _ => Err(format!("unknown model {s:?} (qlam, elman)")),
    }
}

fn parse_split(s: &str) -> Result<SplitMode, String> {
    match s {
        "holdout" => Ok(SplitMode::Holdout),
        "kfold" => Ok(SplitMode::Kfold),
        _ => Err(format!("unknown split mode {s:?} (holdout, kfold)")),
    }
}

impl Overrides {
    fn resolve(&self) -> qlam::Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => TrainConfig::from_file(p)?,
            None => TrainConfig::default(),
        };
        macro_rules! set {
            ($field:ident, $target:expr) => {
                if let Some(v) = self.$field.clone() {
                    $target = v;
                }
            };
        }
        set!(dataset, cfg.dataset);
        set!(model, cfg.model);
        set!(seed, cfg.seed);
        set!(fold, cfg.fold);
        set!(folds, cfg.n_folds);
        set!(split, cfg.split_mode);
        set!(qubits, cfg.n_qubits);
        set!(heads, cfg.n_heads);
        set!(layers, cfg.n_layers);
        set!(batch_size, cfg.batch_size);
        set!(lr, cfg.base_lr);
        set!(out_dir, cfg.out_dir);
        set!(workers, cfg.workers);
        if self.epochs.is_some() {
            cfg.epochs = self.epochs;
        }
        if self.shots.is_some() {
            cfg.shots = self.shots;
        }
        if self.train_size.is_some() {
            cfg.train_size = self.train_size;
        }
        if self.test_size.is_some() {
            cfg.test_size = self.test_size;
        }
        if self.data_dir.is_some() {
            cfg.data_dir = self.data_dir.clone();
        }
        cfg.record_wall_time |= self.wall_time;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Input => 3,
        ErrorKind::Parse => 4,
        ErrorKind::Io => 5,
        ErrorKind::Numeric => 6,
        ErrorKind::Shape | ErrorKind::Index => 7,
    }
}

fn category(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Config => "config",
        ErrorKind::Input => "input",
        ErrorKind::Parse => "parse",
        ErrorKind::Io => "io",
        ErrorKind::Numeric => "numeric",
        ErrorKind::Shape => "shape",
        ErrorKind::Index => "index",
    }
}

fn run(cli: Cli) -> qlam::Result<()> {
    match cli.command {
        Command::Train(o) => {
            let cfg = o.resolve()?;
            let out = trainer::train(&cfg)?;
            println!("parameters: {}", out.n_params);
            println!(
                "final train: loss {:.6} accuracy {:.4}",
                out.final_train.loss, out.final_train.accuracy
            );
            println!(
                "final test: loss {:.6} accuracy {:.4}",
                out.final_test.loss, out.final_test.accuracy
            );
            println!("metrics: {}", out.metrics_path.display());
            println!("checkpoint: {}", out.checkpoint_path.display());
        }
        Command::Eval {
            checkpoint,
            overrides,
        } => {
            let cfg = overrides.resolve()?;
            let acc = trainer::evaluate(&checkpoint, &cfg)?;
            println!("accuracy: {acc:.4}");
        }
        Command::Folds(o) => {
            let cfg = o.resolve()?;
            let summary = trainer::run_folds(&cfg)?;
            for (k, a) in summary.accuracies.iter().enumerate() {
                println!("fold {k}: accuracy {a:.4}");
            }
            println!("mean {:.4} std {:.4}", summary.mean, summary.std);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            eprintln!("error [{}]: {e}", category(kind));
            ExitCode::from(exit_code(kind))
        }
    }
}
