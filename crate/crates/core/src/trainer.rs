//! Training loop, evaluation and fold orchestration.
//!
//! A run is fully determined by its [`TrainConfig`]: initialisation, data
//! subsampling and mini-batch order all draw from seeded streams, and
//! per-sample gradients are reduced in sample order whatever the worker count.
//!
//! Each run writes `metrics_seed{S}_fold{F}.csv` with the columns of
//! [`MetricsRow`] in declaration order, one `train` and one `test` row per
//! epoch, and `checkpoint_seed{S}_fold{F}.qlam` after the last epoch.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::circuits::Entangler;
use crate::data::{self, DatasetKind, SequenceSample, Split};
use crate::error::{QlamError, Result};
use crate::gradients;
use crate::model::{QlamConfig, QlamModel};
use crate::nn::{
    argmax, clip_global_norm, cosine_lr, softmax_cross_entropy, AdamState, ElmanBaseline, ParamSet,
    ParamView,
};
use crate::observables::ShotConfig;
use crate::rng::{self, Domain};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Qlam,
    Elman,
}

/// How a fold index selects its data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Official train/test files; each fold reseeds subsampling, init and order.
    #[default]
    Holdout,
    /// Train and test files are pooled and cut into `n_folds` seeded folds.
    Kfold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: DatasetKind,
    pub model: ModelKind,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub entangler: Entangler,
    pub n_heads: usize,
    pub d_q: usize,
    pub decoder_hidden: usize,
    /// Readout steps fed to the classifier; the whole sequence when unset.
    pub t_keep: Option<usize>,
    pub elman_hidden: usize,
    /// 30 for the MNIST family and 50 for CIFAR when unset.
    pub epochs: Option<usize>,
    pub batch_size: usize,
    pub base_lr: f64,
    pub clip_norm: f64,
    pub seed: u64,
    pub fold: usize,
    pub n_folds: usize,
    pub split_mode: SplitMode,
    /// Shots per Pauli term for test-set readouts; exact when unset.
    pub shots: Option<u32>,
    pub train_size: Option<usize>,
    pub test_size: Option<usize>,
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Gradient worker threads; 0 uses every available core.
    pub workers: usize,
    /// Fill the `wall_seconds` column; off keeps metrics files bitwise stable.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let q = QlamConfig::default();
        Self {
            dataset: DatasetKind::Smnist8,
            model: ModelKind::Qlam,
            n_qubits: q.n_qubits,
            n_layers: q.n_layers,
            entangler: q.entangler,
            n_heads: q.n_heads,
            d_q: q.d_q,
            decoder_hidden: q.decoder_hidden,
            t_keep: None,
            elman_hidden: 64,
            epochs: None,
            batch_size: 128,
            base_lr: 1e-3,
            clip_norm: 1.0,
            seed: 0,
            fold: 0,
            n_folds: data::DEFAULT_FOLDS,
            split_mode: SplitMode::Holdout,
            shots: None,
            train_size: None,
            test_size: None,
            data_dir: None,
            out_dir: PathBuf::from("runs"),
            workers: 0,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(s).map_err(|e| QlamError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| QlamError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            QlamError::Config(m) => QlamError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn epochs(&self) -> usize {
        self.epochs
            .unwrap_or(if self.dataset.is_cifar() { 50 } else { 30 })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("batch_size", self.batch_size),
            ("n_qubits", self.n_qubits),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("d_q", self.d_q),
            ("decoder_hidden", self.decoder_hidden),
            ("elman_hidden", self.elman_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(QlamError::Config(format!("{name} must be positive")));
            }
        }
        if self.epochs() == 0 {
            return Err(QlamError::Config("epochs must be at least 1".into()));
        }
        if self.t_keep == Some(0) || self.train_size == Some(0) || self.test_size == Some(0) {
            return Err(QlamError::Config(
                "t_keep, train_size and test_size must be positive".into(),
            ));
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return Err(QlamError::Config(format!(
                "base_lr {} must be positive",
                self.base_lr
            )));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return Err(QlamError::Config(format!(
                "clip_norm {} must be positive",
                self.clip_norm
            )));
        }
        if self.shots == Some(0) {
            return Err(QlamError::Config("shots must be positive".into()));
        }
        if self.split_mode == SplitMode::Kfold && self.n_folds < 2 {
            return Err(QlamError::Config("k-fold needs at least 2 folds".into()));
        }
        if self.fold >= self.n_folds {
            return Err(QlamError::Config(format!(
                "fold {} of {}",
                self.fold, self.n_folds
            )));
        }
        Ok(())
    }

    pub fn qlam_config(&self, seq_len: usize) -> QlamConfig {
        QlamConfig {
            n_qubits: self.n_qubits,
            n_layers: self.n_layers,
            entangler: self.entangler,
            d_q: self.d_q,
            n_heads: self.n_heads,
            decoder_hidden: self.decoder_hidden,
            n_classes: data::N_CLASSES,
            t_keep: self.t_keep.unwrap_or(seq_len),
            clamp_tokens: false,
        }
    }

    pub fn shot_config(&self) -> ShotConfig {
        match self.shots {
            Some(m) => ShotConfig::sampled(m, self.seed),
            None => ShotConfig::exact(),
        }
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.out_dir
            .join(format!("metrics_seed{}_fold{}.csv", self.seed, self.fold))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join(format!(
            "checkpoint_seed{}_fold{}.qlam",
            self.seed, self.fold
        ))
    }
}

/// Architecture of a stored network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Qlam(QlamConfig),
    Elman { hidden_dim: usize, n_classes: usize },
}

/// A trainable classifier: the quantum-memory model or the recurrent baseline.
#[derive(Clone, Debug)]
pub enum Network {
    Qlam(QlamModel),
    Elman(ElmanBaseline),
}

impl Network {
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        Ok(match spec {
            ModelSpec::Qlam(cfg) => {
                Network::Qlam(QlamModel::new(*cfg, crate::model::QlamParams::zeros(cfg))?)
            }
            ModelSpec::Elman {
                hidden_dim,
                n_classes,
            } => Network::Elman(ElmanBaseline::zeros(*hidden_dim, *n_classes)),
        })
    }

    pub fn init(spec: &ModelSpec, seed: u64, fold: usize) -> Result<Self> {
        let mut rng = rng::stream(Domain::Init, seed, fold as u64, 0, 0);
        Ok(match spec {
            ModelSpec::Qlam(cfg) => Network::Qlam(QlamModel::init(*cfg, &mut rng)?),
            ModelSpec::Elman {
                hidden_dim,
                n_classes,
            } => Network::Elman(ElmanBaseline::init(*hidden_dim, *n_classes, &mut rng)),
        })
    }

    pub fn spec(&self) -> ModelSpec {
        match self {
            Network::Qlam(m) => ModelSpec::Qlam(*m.config()),
            Network::Elman(e) => ModelSpec::Elman {
                hidden_dim: e.hidden_dim,
                n_classes: e.readout.out_dim,
            },
        }
    }

    /// Loss, logits and flattened gradient for one sample.
    pub fn loss_and_grad(&self, tokens: &[f64], label: usize) -> Result<SampleGrad> {
        match self {
            Network::Qlam(m) => {
                let b = gradients::loss_and_grad(m, tokens, label)?;
                Ok((b.loss, b.logits, b.grads.flatten()))
            }
            Network::Elman(e) => {
                let (loss, g) = e.loss_and_grad(tokens, label)?;
                Ok((loss, e.forward(tokens)?, g.flatten()))
            }
        }
    }

    pub fn logits(&self, tokens: &[f64], shot: &ShotConfig, sample_index: u64) -> Result<Vec<f64>> {
        match self {
            Network::Qlam(m) => Ok(m.forward(tokens, shot, sample_index)?.logits),
            Network::Elman(e) => e.forward(tokens),
        }
    }
}

impl ParamSet for Network {
    fn arrays(&self) -> Vec<ParamView<'_>> {
        match self {
            Network::Qlam(m) => m.params.arrays(),
            Network::Elman(e) => e.arrays(),
        }
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Network::Qlam(m) => m.params.arrays_mut(),
            Network::Elman(e) => e.arrays_mut(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    config: TrainConfig,
    model: ModelSpec,
}

pub fn save_checkpoint(path: &Path, config: &TrainConfig, net: &Network) -> Result<()> {
    let meta = CheckpointMeta {
        config: config.clone(),
        model: net.spec(),
    };
    let json = serde_json::to_string(&meta).expect("metadata serializes");
    Checkpoint::from_views(json, &net.arrays()).save(path)
}

/// Rebuilds a network and the config it was trained with.
pub fn load_checkpoint(path: &Path) -> Result<(TrainConfig, Network)> {
    let ck = Checkpoint::load(path)?;
    let meta: CheckpointMeta = serde_json::from_str(&ck.metadata)
        .map_err(|e| QlamError::parse(path.display().to_string(), 16, format!("metadata: {e}")))?;
    let mut net = Network::zeros(&meta.model)?;
    let mut flat = Vec::new();
    ck.restore_into(&net.arrays(), &mut flat)?;
    net.assign(&flat)?;
    Ok((meta.config, net))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
    pub lr: f64,
    pub wall_seconds: f64,
    pub seed: u64,
    pub fold: usize,
}

pub const METRICS_HEADER: [&str; 8] = [
    "epoch",
    "split",
    "loss",
    "accuracy",
    "lr",
    "wall_seconds",
    "seed",
    "fold",
];

struct MetricsWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| QlamError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner: csv::Writer::from_writer(file),
        })
    }

    fn append(&mut self, row: &MetricsRow) -> Result<()> {
        let to_io = |e: csv::Error| QlamError::io(&self.path, std::io::Error::other(e));
        self.inner.serialize(row).map_err(to_io)?;
        self.inner.flush().map_err(|e| QlamError::io(&self.path, e))
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let name = path.display().to_string();
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| QlamError::io(path, std::io::Error::other(e)))?;
    let header = reader
        .headers()
        .map_err(|e| QlamError::parse(&name, 0, e.to_string()))?
        .clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(QlamError::parse(
            &name,
            0,
            format!("unexpected header {header:?}"),
        ));
    }
    reader
        .deserialize()
        .map(|r| {
            r.map_err(|e: csv::Error| {
                let offset = e.position().map_or(0, |p| p.byte());
                QlamError::parse(&name, offset, e.to_string())
            })
        })
        .collect()
}

/// Train and test sequences for one fold.
#[derive(Clone, Debug)]
pub struct FoldData {
    pub train: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
}

/// Loads the configured dataset and applies the fold and subsampling plan.
pub fn load_fold_data(config: &TrainConfig) -> Result<FoldData> {
    let root = data::data_root(config.data_dir.as_deref());
    let kind = config.dataset;
    let train_set = data::load_images(kind, &root, Split::Train)?;
    let test_set = data::load_images(kind, &root, Split::Test)?;
    let f = config.fold as u64;
    match config.split_mode {
        SplitMode::Holdout => {
            let tr = pick(train_set.len(), config.train_size, config.seed, 2 * f);
            let te = pick(test_set.len(), config.test_size, config.seed, 2 * f + 1);
            Ok(FoldData {
                train: data::to_samples(kind, &train_set, &tr)?,
                test: data::to_samples(kind, &test_set, &te)?,
            })
        }
        SplitMode::Kfold => {
            let mut pool =
                data::to_samples(kind, &train_set, &(0..train_set.len()).collect::<Vec<_>>())?;
            pool.extend(data::to_samples(
                kind,
                &test_set,
                &(0..test_set.len()).collect::<Vec<_>>(),
            )?);
            kfold_split(&pool, config)
        }
    }
}

fn pick(n: usize, size: Option<usize>, seed: u64, salt: u64) -> Vec<usize> {
    data::subsample(n, size.unwrap_or(n), seed, salt)
}

/// Cuts an in-memory pool into the configured fold, then subsamples.
pub fn kfold_split(pool: &[SequenceSample], config: &TrainConfig) -> Result<FoldData> {
    let plan = data::make_k_folds(pool.len(), config.n_folds, config.seed)?;
    let test_idx = plan.test(config.fold)?;
    let train_idx = plan.train(config.fold)?;
    let f = config.fold as u64;
    let tr = pick(train_idx.len(), config.train_size, config.seed, 2 * f);
    let te = pick(test_idx.len(), config.test_size, config.seed, 2 * f + 1);
    Ok(FoldData {
        train: tr.iter().map(|&i| pool[train_idx[i]].clone()).collect(),
        test: te.iter().map(|&i| pool[test_idx[i]].clone()).collect(),
    })
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub rows: Vec<MetricsRow>,
    pub final_train: MetricsRow,
    pub final_test: MetricsRow,
    pub n_params: usize,
    pub metrics_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub network: Network,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| QlamError::Config(format!("cannot start {workers} workers: {e}")))
}

pub fn model_spec(config: &TrainConfig, seq_len: usize) -> ModelSpec {
    match config.model {
        ModelKind::Qlam => ModelSpec::Qlam(config.qlam_config(seq_len)),
        ModelKind::Elman => ModelSpec::Elman {
            hidden_dim: config.elman_hidden,
            n_classes: data::N_CLASSES,
        },
    }
}

/// Mean loss and accuracy of `net` on `samples`.
pub fn evaluate_on(
    net: &Network,
    samples: &[SequenceSample],
    shot: &ShotConfig,
    pool: &rayon::ThreadPool,
) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(QlamError::Input("no samples to evaluate".into()));
    }
    let results: Vec<Result<(f64, bool)>> = pool.install(|| {
        samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let logits = net.logits(&s.tokens, shot, i as u64)?;
                let (loss, _) = softmax_cross_entropy(&logits, s.label)?;
                Ok((loss, argmax(&logits) == s.label))
            })
            .collect()
    });
    let mut loss = 0.0;
    let mut correct = 0usize;
    for r in results {
        let (l, ok) = r?;
        loss += l;
        correct += usize::from(ok);
    }
    let n = samples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains on the configured dataset, writing metrics and a checkpoint.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let data = load_fold_data(config)?;
    train_with_data(config, &data)
}

/// Loss, logits and flattened gradient of one sample.
type SampleGrad = (f64, Vec<f64>, Vec<f64>);

/// Trains on explicitly supplied data.
pub fn train_with_data(config: &TrainConfig, data: &FoldData) -> Result<TrainOutcome> {
    config.validate()?;
    let first = data
        .train
        .first()
        .ok_or_else(|| QlamError::Input("empty training set".into()))?;
    let seq_len = first.tokens.len();
    if let Some(bad) = data
        .train
        .iter()
        .chain(&data.test)
        .find(|s| s.tokens.len() != seq_len)
    {
        return Err(QlamError::Input(format!(
            "mixed sequence lengths {seq_len} and {}",
            bad.tokens.len()
        )));
    }
    let spec = model_spec(config, seq_len);
    let mut net = Network::init(&spec, config.seed, config.fold)?;
    let n_params = net.n_params();
    log::info!(
        "{} on {}: {n_params} parameters, {} train / {} test, T = {seq_len}",
        match config.model {
            ModelKind::Qlam => "qlam",
            ModelKind::Elman => "elman",
        },
        config.dataset,
        data.train.len(),
        data.test.len()
    );

    fs::create_dir_all(&config.out_dir).map_err(|e| QlamError::io(&config.out_dir, e))?;
    let metrics_path = config.metrics_path();
    let checkpoint_path = config.checkpoint_path();
    let mut writer = MetricsWriter::create(&metrics_path)?;
    let pool = thread_pool(config.workers)?;
    let shot = config.shot_config();
    let epochs = config.epochs();
    let mut adam = AdamState::new(n_params, config.base_lr);
    let mut params = net.flatten();
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut rows = Vec::with_capacity(2 * epochs);
    let start = Instant::now();
    let wall = |t: &Instant| {
        if config.record_wall_time {
            t.elapsed().as_secs_f64()
        } else {
            0.0
        }
    };

    for epoch in 0..epochs {
        let lr = cosine_lr(epoch, epochs, config.base_lr);
        order.shuffle(&mut rng::stream(
            Domain::Shuffle,
            config.seed,
            config.fold as u64,
            epoch as u64,
            0,
        ));
        let mut epoch_loss = 0.0;
        let mut correct = 0usize;
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let results: Vec<Result<SampleGrad>> = pool.install(|| {
                batch
                    .par_iter()
                    .map(|&i| net.loss_and_grad(&data.train[i].tokens, data.train[i].label))
                    .collect()
            });
            let mut grad = vec![0.0; n_params];
            for (r, &i) in results.into_iter().zip(batch) {
                let (loss, logits, g) = r.map_err(|e| with_context(e, epoch, step))?;
                epoch_loss += loss;
                correct += usize::from(argmax(&logits) == data.train[i].label);
                for (acc, v) in grad.iter_mut().zip(&g) {
                    *acc += v;
                }
            }
            let scale = batch.len() as f64;
            grad.iter_mut().for_each(|v| *v /= scale);
            clip_global_norm(&mut grad, config.clip_norm);
            adam.step(&mut params, &grad, lr)?;
            net.assign(&params)?;
        }
        let n = data.train.len() as f64;
        let train_row = MetricsRow {
            epoch,
            split: "train".into(),
            loss: epoch_loss / n,
            accuracy: correct as f64 / n,
            lr,
            wall_seconds: wall(&start),
            seed: config.seed,
            fold: config.fold,
        };
        let (test_loss, test_acc) = evaluate_on(&net, &data.test, &shot, &pool)?;
        let test_row = MetricsRow {
            epoch,
            split: "test".into(),
            loss: test_loss,
            accuracy: test_acc,
            lr,
            wall_seconds: wall(&start),
            seed: config.seed,
            fold: config.fold,
        };
        log::info!(
            "epoch {epoch}: train loss {:.4} acc {:.3}, test loss {:.4} acc {:.3}",
            train_row.loss,
            train_row.accuracy,
            test_row.loss,
            test_row.accuracy
        );
        writer.append(&train_row)?;
        writer.append(&test_row)?;
        rows.push(train_row);
        rows.push(test_row);
    }
    save_checkpoint(&checkpoint_path, config, &net)?;
    let final_test = rows.last().expect("at least one epoch").clone();
    let final_train = rows[rows.len() - 2].clone();
    Ok(TrainOutcome {
        rows,
        final_train,
        final_test,
        n_params,
        metrics_path,
        checkpoint_path,
        network: net,
    })
}

fn with_context(err: QlamError, epoch: usize, step: usize) -> QlamError {
    match err {
        QlamError::NonFinite { timestep, what } => QlamError::NonFinite {
            timestep,
            what: format!("{what} (epoch {epoch}, step {step})"),
        },
        other => other,
    }
}

/// Test-split accuracy of a stored network under `config`'s data plan and
/// readout mode.
pub fn evaluate(checkpoint: &Path, config: &TrainConfig) -> Result<f64> {
    config.validate()?;
    let (_, net) = load_checkpoint(checkpoint)?;
    let data = load_fold_data(config)?;
    let pool = thread_pool(config.workers)?;
    Ok(evaluate_on(&net, &data.test, &config.shot_config(), &pool)?.1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldSummary {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single fold.
    pub std: f64,
}

impl FoldSummary {
    pub fn from_accuracies(accuracies: Vec<f64>) -> Self {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let std = if accuracies.len() < 2 {
            0.0
        } else {
            (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self {
            accuracies,
            mean,
            std,
        }
    }

    /// `fold,accuracy` rows followed by `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fold,accuracy\n");
        for (k, a) in self.accuracies.iter().enumerate() {
            s += &format!("{k},{a}\n");
        }
        s += &format!("mean,{}\nstd,{}\n", self.mean, self.std);
        s
    }
}

/// Trains every fold in turn with data from `provider` and writes
/// `folds_seed{S}.csv` next to the per-run files.
pub fn run_folds_with<F>(config: &TrainConfig, mut provider: F) -> Result<FoldSummary>
where
    F: FnMut(&TrainConfig) -> Result<FoldData>,
{
    config.validate()?;
    let mut accuracies = Vec::with_capacity(config.n_folds);
    for fold in 0..config.n_folds {
        let cfg = TrainConfig {
            fold,
            ..config.clone()
        };
        let data = provider(&cfg)?;
        let out = train_with_data(&cfg, &data)?;
        log::info!("fold {fold}: test accuracy {:.4}", out.final_test.accuracy);
        accuracies.push(out.final_test.accuracy);
    }
    let summary = FoldSummary::from_accuracies(accuracies);
    let path = config
        .out_dir
        .join(format!("folds_seed{}.csv", config.seed));
    let mut f = File::create(&path).map_err(|e| QlamError::io(&path, e))?;
    f.write_all(summary.to_csv().as_bytes())
        .map_err(|e| QlamError::io(&path, e))?;
    Ok(summary)
}

pub fn run_folds(config: &TrainConfig) -> Result<FoldSummary> {
    run_folds_with(config, load_fold_data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.epochs(), 30);
        let cifar = TrainConfig {
            dataset: DatasetKind::Scifar10,
            ..Default::default()
        };
        assert_eq!(cifar.epochs(), 50);
        let zero = TrainConfig {
            epochs: Some(0),
            ..Default::default()
        };
        assert!(zero.validate().is_err());
        assert!(TrainConfig {
            batch_size: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            fold: 10,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = TrainConfig {
            dataset: DatasetKind::Smnist16,
            epochs: Some(3),
            shots: Some(100),
            train_size: Some(64),
            ..Default::default()
        };
        let back = TrainConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        let partial = TrainConfig::from_toml_str("dataset = \"smnist\"\nseed = 4\n").unwrap();
        assert_eq!(partial.seed, 4);
        assert_eq!(partial.batch_size, 128);
        assert!(TrainConfig::from_toml_str("bogus = 1").is_err());
        assert!(TrainConfig::from_toml_str("epochs = 0").is_err());
    }

    #[test]
    fn fold_summary_statistics() {
        let s = FoldSummary::from_accuracies(vec![0.5, 0.5, 0.5]);
        assert_eq!(s.std, 0.0);
        assert_eq!(s.mean, 0.5);
        let s = FoldSummary::from_accuracies(vec![0.2, 0.4]);
        assert!((s.mean - 0.3).abs() < 1e-15);
        assert!((s.std - 0.02f64.sqrt()).abs() < 1e-12);
        assert!(s.to_csv().starts_with("fold,accuracy\n0,0.2\n1,0.4\nmean,"));
    }
}
