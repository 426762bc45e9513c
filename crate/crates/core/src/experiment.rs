//! Reproducible experiments wiring the library together, one per CLI
//! subcommand. Every run is fully determined by an [`ExperimentConfig`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::detector::{
    build_profile, estimate_rates, predict_rates_from_accuracy, BinaryDetector, MaxScoreDetector, RateEstimate,
};
use crate::error::{Error, Result};
use crate::ewc::{
    history_csv, incremental_train, FisherSource, IncrementalConfig, IncrementalEpoch, Strategy, STABILITY_HEADER,
};
use crate::nn::{accuracy, train, EpochStats, HeadKind, Network, TrainConfig, DEFAULT_HIDDEN};
use crate::seqdetect::{sweep, sweep_csv, worst_case, SweepGrid, SweepRow};
use crate::signal::{make_dataset_with, Dataset, DatasetParams, RecordView, FEATURE_LEN};
use crate::zerobias::{network_coverage_ratio, variance};

/// Every knob of every experiment, as one flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds the dataset, network initialization, training and simulation.
    pub seed: u64,

    pub n_known: usize,
    pub n_abnormal: usize,
    pub bursts_per_emitter: usize,
    pub snr_db: f64,
    pub train_fraction: f64,

    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_dense: f64,
    pub l2_zero_bias: f64,

    pub cutoff_quantile: f64,

    pub sweep_tprs: Vec<f64>,
    pub sweep_fpr: f64,
    pub cusum_h: Vec<f64>,
    pub ewma_lambda: f64,
    pub ewma_l: Vec<f64>,
    pub window_lengths: Vec<usize>,
    pub window_threshold: f64,
    pub change_point: usize,
    pub max_len: Option<usize>,
    pub n_trials: usize,

    /// Known emitters held out of task 1 and learned incrementally.
    pub task2_classes: usize,
    pub inc_epochs: usize,
    pub inc_learning_rate: f64,
    pub inc_batch_size: usize,
    pub lambda1: f64,
    pub inc_l2_dense: f64,
    pub inc_l2_zero_bias: f64,
    pub fisher_source: FisherSource,

    pub coverage_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let data = DatasetParams::default();
        let grid = SweepGrid::default();
        let inc = IncrementalConfig::default();
        Self {
            seed: data.seed,
            n_known: data.n_known,
            n_abnormal: data.n_abnormal,
            bursts_per_emitter: data.bursts_per_emitter,
            snr_db: data.snr_db,
            train_fraction: data.train_fraction,
            hidden: DEFAULT_HIDDEN.to_vec(),
            learning_rate: 0.05,
            epochs: 20,
            batch_size: 32,
            l2_dense: 0.0,
            l2_zero_bias: 0.025,
            cutoff_quantile: 1.0,
            sweep_tprs: grid.tprs,
            sweep_fpr: grid.fpr,
            cusum_h: grid.cusum_h,
            ewma_lambda: grid.ewma_lambda,
            ewma_l: grid.ewma_l,
            window_lengths: grid.window_lengths,
            window_threshold: grid.window_threshold,
            change_point: grid.change_point,
            max_len: grid.max_len,
            n_trials: grid.n_trials,
            task2_classes: 2,
            inc_epochs: inc.epochs,
            inc_learning_rate: inc.learning_rate,
            inc_batch_size: inc.batch_size,
            lambda1: inc.lambda1,
            inc_l2_dense: 0.0,
            inc_l2_zero_bias: 0.025,
            fisher_source: inc.fisher_source,
            coverage_samples: 100_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config(HeadKind::Dense).validate()?;
        self.train_config(HeadKind::ZeroBias).validate()?;
        self.incremental_config(Strategy::GlobalEwc, true).validate()?;
        if self.hidden.contains(&0) {
            return Err(Error::InvalidArgument("hidden widths must be positive".into()));
        }
        if !(self.cutoff_quantile > 0.0 && self.cutoff_quantile <= 1.0) {
            return Err(Error::InvalidArgument("cutoff_quantile must lie in (0, 1]".into()));
        }
        if self.task2_classes == 0 || self.task2_classes + 2 > self.n_known {
            return Err(Error::InvalidArgument(format!(
                "task2_classes must lie in [1, n_known - 2], got {}",
                self.task2_classes
            )));
        }
        if self.coverage_samples < 1000 {
            return Err(Error::InvalidArgument("coverage_samples must be at least 1000".into()));
        }
        Ok(())
    }

    pub fn dataset_params(&self) -> DatasetParams {
        DatasetParams {
            n_known: self.n_known,
            n_abnormal: self.n_abnormal,
            bursts_per_emitter: self.bursts_per_emitter,
            snr_db: self.snr_db,
            train_fraction: self.train_fraction,
            seed: self.seed,
        }
    }

    pub fn train_config(&self, kind: HeadKind) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            l2: match kind {
                HeadKind::Dense => self.l2_dense,
                HeadKind::ZeroBias => self.l2_zero_bias,
            },
            seed: self.seed,
        }
    }

    pub fn sweep_grid(&self) -> SweepGrid {
        SweepGrid {
            tprs: self.sweep_tprs.clone(),
            fpr: self.sweep_fpr,
            cusum_h: self.cusum_h.clone(),
            ewma_lambda: self.ewma_lambda,
            ewma_l: self.ewma_l.clone(),
            window_lengths: self.window_lengths.clone(),
            window_threshold: self.window_threshold,
            change_point: self.change_point,
            max_len: self.max_len,
            n_trials: self.n_trials,
        }
    }

    pub fn incremental_config(&self, strategy: Strategy, stabilize: bool) -> IncrementalConfig {
        IncrementalConfig {
            lambda1: self.lambda1,
            strategy,
            epochs: self.inc_epochs,
            learning_rate: self.inc_learning_rate,
            batch_size: self.inc_batch_size,
            l2: None,
            stabilize,
            fisher_source: self.fisher_source,
            seed: self.seed,
        }
    }

    fn inc_l2(&self, kind: HeadKind) -> f64 {
        match kind {
            HeadKind::Dense => self.inc_l2_dense,
            HeadKind::ZeroBias => self.inc_l2_zero_bias,
        }
    }
}

pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    make_dataset_with(&cfg.dataset_params())
}

/// Both head types trained from identical hidden-layer initializations.
#[derive(Debug, Clone)]
pub struct TrainedPair {
    pub dense: Network,
    pub zero_bias: Network,
    pub dense_history: Vec<EpochStats>,
    pub zero_bias_history: Vec<EpochStats>,
    pub dense_accuracy: f64,
    pub zero_bias_accuracy: f64,
}

pub fn train_heads(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<TrainedPair> {
    let train_set = dataset.train();
    let test_set = dataset.test();
    let n_classes = dataset.known_classes.len();
    let mut dense = Network::new(HeadKind::Dense, FEATURE_LEN, &cfg.hidden, n_classes, cfg.seed);
    let mut zero_bias = Network::new(HeadKind::ZeroBias, FEATURE_LEN, &cfg.hidden, n_classes, cfg.seed);
    let dense_history = train(&mut dense, &train_set, &cfg.train_config(HeadKind::Dense))?;
    let zero_bias_history = train(&mut zero_bias, &train_set, &cfg.train_config(HeadKind::ZeroBias))?;
    Ok(TrainedPair {
        dense_accuracy: accuracy(&dense, &test_set)?,
        zero_bias_accuracy: accuracy(&zero_bias, &test_set)?,
        dense,
        zero_bias,
        dense_history,
        zero_bias_history,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectorComparison {
    pub zero_bias: RateEstimate,
    pub baseline: RateEstimate,
    pub baseline_threshold: f64,
    pub train_accuracy: f64,
    pub predicted_fpr: f64,
    pub predicted_tpr: f64,
}

/// Rates of the converted zero-bias detector on the test and abnormal
/// splits, with the accuracy-based predictions alongside.
pub fn convert_zero_bias(
    net: &Network,
    dataset: &Dataset,
    quantile: f64,
) -> Result<(BinaryDetector, RateEstimate, f64)> {
    let train_set = dataset.train();
    let profile = build_profile(net, &train_set, quantile)?;
    let detector = BinaryDetector::new(net.clone(), profile)?;
    let rates = estimate_rates(&detector, &dataset.test(), &dataset.abnormal())?;
    Ok((detector, rates, accuracy(net, &train_set)?))
}

/// Abnormal emitters split into a calibration half (lower ids) and an
/// evaluation half.
pub fn split_abnormal<'a>(dataset: &'a Dataset) -> (Vec<RecordView<'a>>, Vec<RecordView<'a>>) {
    let ids: Vec<usize> = dataset.abnormal_classes.iter().copied().collect();
    let cut = ids.get(ids.len() / 2).copied().unwrap_or(usize::MAX);
    dataset.abnormal().into_iter().partition(|r| r.label < cut)
}

/// Zero-bias detector against the dense-head max-score baseline. The
/// baseline threshold is fitted by maximum margin on the training split
/// and the calibration half of the abnormal emitters; both detectors are
/// scored on the test split and the evaluation half.
pub fn compare_detectors(
    dense: &Network,
    zero_bias: &Network,
    dataset: &Dataset,
    quantile: f64,
) -> Result<DetectorComparison> {
    let train_set = dataset.train();
    let known = dataset.test();
    let (calibration, evaluation) = split_abnormal(dataset);
    let profile = build_profile(zero_bias, &train_set, quantile)?;
    let detector = BinaryDetector::new(zero_bias.clone(), profile)?;
    let zb_rates = estimate_rates(&detector, &known, &evaluation)?;
    let train_accuracy = accuracy(zero_bias, &train_set)?;
    let baseline = MaxScoreDetector::fit(dense.clone(), &train_set, &calibration)?;
    let baseline_rates = estimate_rates(&baseline, &known, &evaluation)?;
    let predicted = predict_rates_from_accuracy(train_accuracy)?;
    Ok(DetectorComparison {
        zero_bias: zb_rates,
        baseline: baseline_rates,
        baseline_threshold: baseline.threshold,
        train_accuracy,
        predicted_fpr: predicted.fpr,
        predicted_tpr: predicted.tpr,
    })
}

#[derive(Debug, Clone)]
pub struct IncrementalRun {
    pub head: HeadKind,
    pub strategy: Strategy,
    pub stabilized: bool,
    pub task1_accuracy_before: f64,
    pub history: Vec<IncrementalEpoch>,
}

impl IncrementalRun {
    pub fn final_task1(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |h| h.task1_acc)
    }

    /// Final task-1 accuracy relative to the accuracy before task 2.
    pub fn retention(&self) -> f64 {
        self.final_task1() / self.task1_accuracy_before
    }
}

fn relabeled<'a>(records: Vec<RecordView<'a>>, keep: impl Fn(usize) -> bool) -> Vec<RecordView<'a>> {
    records.into_iter().filter(|r| keep(r.label)).collect()
}

/// Trains a task-1 network of each head type on the first
/// `n_known − task2_classes` known emitters, then runs every strategy on
/// the remaining ones. Each strategy runs stabilized; GlobalEWC also runs
/// unstabilized for the stability comparison.
pub fn run_incremental(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<Vec<IncrementalRun>> {
    let n_task1 = cfg.n_known - cfg.task2_classes;
    let task1_train = relabeled(dataset.train(), |l| l < n_task1);
    let task1_val = relabeled(dataset.test(), |l| l < n_task1);
    let task2_train = relabeled(dataset.train(), |l| l >= n_task1);
    let mut runs = Vec::new();
    for kind in [HeadKind::Dense, HeadKind::ZeroBias] {
        let mut net = Network::new(kind, FEATURE_LEN, &cfg.hidden, n_task1, cfg.seed);
        train(&mut net, &task1_train, &cfg.train_config(kind))?;
        let before = accuracy(&net, &task1_val)?;
        let mut settings: Vec<(Strategy, bool)> = Strategy::ALL.iter().map(|&s| (s, true)).collect();
        settings.push((Strategy::GlobalEwc, false));
        for (strategy, stabilized) in settings {
            let mut inc = cfg.incremental_config(strategy, stabilized);
            inc.l2 = Some(cfg.inc_l2(kind));
            let out = incremental_train(&net, &task2_train, &task1_val, &inc)?;
            runs.push(IncrementalRun {
                head: kind,
                strategy,
                stabilized,
                task1_accuracy_before: before,
                history: out.history,
            });
        }
    }
    Ok(runs)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageSummary {
    pub head: HeadKind,
    pub fractions: Vec<f64>,
    pub variance: f64,
}

pub fn coverage_summary(net: &Network, n_samples: usize, seed: u64) -> Result<CoverageSummary> {
    let fractions = network_coverage_ratio(net, n_samples, seed)?;
    Ok(CoverageSummary {
        head: net.head_kind(),
        variance: variance(&fractions),
        fractions,
    })
}

/// One output file and the sha256 of its content.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub command: String,
    pub config: ExperimentConfig,
    pub metrics: serde_json::Value,
    pub outputs: Vec<OutputFile>,
    /// Seconds per stage.
    pub timings: Vec<(String, f64)>,
}

/// Files written by one command. Dropped without [`Artifacts::commit`],
/// it deletes everything it wrote.
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
    outputs: Vec<OutputFile>,
    committed: bool,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            outputs: Vec::new(),
            committed: false,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, content: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        self.written.push(path.clone());
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        self.outputs.push(OutputFile {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(content)),
        });
        Ok(path)
    }

    pub fn outputs(&self) -> &[OutputFile] {
        &self.outputs
    }

    /// Writes `report.json` and keeps every file.
    pub fn commit(mut self, mut report: ExperimentReport) -> Result<ExperimentReport> {
        report.outputs = self.outputs.clone();
        let text = serde_json::to_string_pretty(&report)?;
        let path = self.path("report.json");
        self.written.push(path.clone());
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.committed = true;
        Ok(report)
    }
}

impl Drop for Artifacts {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

struct Clock {
    start: Instant,
    stages: Vec<(String, f64)>,
}

impl Clock {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            stages: Vec::new(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push((stage.to_string(), (now - self.start).as_secs_f64()));
        self.start = now;
    }
}

fn report(command: &str, cfg: &ExperimentConfig, metrics: serde_json::Value, clock: Clock) -> ExperimentReport {
    ExperimentReport {
        command: command.to_string(),
        config: cfg.clone(),
        metrics,
        outputs: Vec::new(),
        timings: clock.stages,
    }
}

fn model_json(net: &Network) -> Result<Vec<u8>> {
    Ok(net.to_json()?.into_bytes())
}

fn training_history_csv(pair: &TrainedPair) -> String {
    let mut out = String::from("head,epoch,loss,accuracy\n");
    for (kind, history) in [(HeadKind::Dense, &pair.dense_history), (HeadKind::ZeroBias, &pair.zero_bias_history)] {
        for e in history {
            let _ = writeln!(out, "{kind},{},{},{}", e.epoch, e.loss, e.accuracy);
        }
    }
    out
}

/// Trains both heads; writes `model_dense.json`, `model_zero_bias.json` and
/// `train_history.csv`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut files = Artifacts::new(out)?;
    let mut clock = Clock::new();
    let dataset = build_dataset(cfg)?;
    clock.lap("dataset");
    let pair = train_heads(cfg, &dataset)?;
    clock.lap("training");
    files.write("model_dense.json", &model_json(&pair.dense)?)?;
    files.write("model_zero_bias.json", &model_json(&pair.zero_bias)?)?;
    files.write("train_history.csv", training_history_csv(&pair).as_bytes())?;
    let metrics = json!({
        "dense_test_accuracy": pair.dense_accuracy,
        "zero_bias_test_accuracy": pair.zero_bias_accuracy,
        "accuracy_gap": (pair.dense_accuracy - pair.zero_bias_accuracy).abs(),
    });
    files.commit(report("train", cfg, metrics, clock))
}

/// Builds the cut-off profile of a zero-bias model; writes `profile.json`
/// and `rates.csv` with measured and accuracy-predicted rates.
pub fn cmd_convert(cfg: &ExperimentConfig, model: &Path, out: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    let net = Network::load(model)?;
    if net.head_kind() != HeadKind::ZeroBias {
        return Err(Error::HeadMismatch(format!(
            "{} holds a {} head; conversion needs a zero_bias head",
            model.display(),
            net.head_kind()
        )));
    }
    let mut files = Artifacts::new(out)?;
    let mut clock = Clock::new();
    let dataset = build_dataset(cfg)?;
    clock.lap("dataset");
    let (detector, rates, train_accuracy) = convert_zero_bias(&net, &dataset, cfg.cutoff_quantile)?;
    let predicted = predict_rates_from_accuracy(train_accuracy)?;
    clock.lap("conversion");
    files.write("profile.json", detector.profile().to_json()?.as_bytes())?;
    let csv = format!(
        "source,fpr,tpr,fnr\nmeasured,{},{},{}\npredicted,{},{},{}\n",
        rates.fpr,
        rates.tpr,
        rates.fnr,
        predicted.fpr,
        predicted.tpr,
        predicted.fnr()
    );
    files.write("rates.csv", csv.as_bytes())?;
    let metrics = json!({
        "train_accuracy": train_accuracy,
        "measured": rates,
        "predicted": predicted,
    });
    files.commit(report("convert", cfg, metrics, clock))
}

pub fn sweep_summary(rows: &[SweepRow], tprs: &[f64]) -> Vec<serde_json::Value> {
    tprs.iter()
        .map(|&tpr| {
            let worst = |alg: &str| worst_case(rows, alg, tpr).map(|w| if w.is_finite() { json!(w) } else { json!("inf") });
            json!({
                "tpr": tpr,
                "worst_cusum": worst("cusum"),
                "worst_ewma": worst("ewma"),
                "worst_window": worst("window"),
            })
        })
        .collect()
}

/// Runs the delay sweep; writes `sweep.csv`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut files = Artifacts::new(out)?;
    let mut clock = Clock::new();
    let grid = cfg.sweep_grid();
    let rows = sweep(&grid, cfg.seed)?;
    clock.lap("sweep");
    files.write("sweep.csv", sweep_csv(&rows).as_bytes())?;
    let metrics = json!({ "rows": rows.len(), "worst_case": sweep_summary(&rows, &grid.tprs) });
    files.commit(report("simulate", cfg, metrics, clock))
}

/// Runs every strategy for both heads; writes one history CSV per run,
/// `strategies.csv` with all runs and `stability.csv` with the penalty
/// weight trajectories.
pub fn cmd_incremental(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut files = Artifacts::new(out)?;
    let mut clock = Clock::new();
    let dataset = build_dataset(cfg)?;
    clock.lap("dataset");
    let runs = run_incremental(cfg, &dataset)?;
    clock.lap("incremental");

    let mut combined = String::from("head,stabilized,epoch,strategy,task1_acc,task2_acc,fisher_loss\n");
    let mut stability = format!("head,{STABILITY_HEADER}\n");
    let mut summary = Vec::new();
    for run in &runs {
        let suffix = if run.stabilized { "" } else { "_unstabilized" };
        let name = format!("history_{}_{}{suffix}.csv", run.head, run.strategy);
        files.write(&name, history_csv(&run.history).as_bytes())?;
        for h in &run.history {
            let _ = writeln!(
                combined,
                "{},{},{},{},{},{},{}",
                run.head, run.stabilized, h.epoch, h.strategy, h.task1_acc, h.task2_acc, h.fisher_loss
            );
            let _ = writeln!(
                stability,
                "{},{},{},{},{},{},{}",
                run.head, h.epoch, h.strategy, run.stabilized, h.weight_mean, h.weight_min, h.fisher_loss
            );
        }
        summary.push(json!({
            "head": run.head,
            "strategy": run.strategy,
            "stabilized": run.stabilized,
            "task1_before": run.task1_accuracy_before,
            "task1_final": run.final_task1(),
            "task2_final": run.history.last().map(|h| h.task2_acc),
        }));
    }
    files.write("strategies.csv", combined.as_bytes())?;
    files.write("stability.csv", stability.as_bytes())?;
    files.commit(report("incremental", cfg, json!({ "runs": summary }), clock))
}

/// Coverage fractions of the given models, or of a freshly trained pair
/// when none are given; writes `coverage.csv`.
pub fn cmd_coverage(cfg: &ExperimentConfig, models: &[PathBuf], out: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    let nets = if models.is_empty() {
        let pair = train_heads(cfg, &build_dataset(cfg)?)?;
        vec![pair.dense, pair.zero_bias]
    } else {
        models.iter().map(|m| Network::load(m)).collect::<Result<Vec<_>>>()?
    };
    let mut files = Artifacts::new(out)?;
    let mut clock = Clock::new();
    let mut csv = String::from("head,class,fraction\n");
    let mut summary = Vec::new();
    for net in &nets {
        let s = coverage_summary(net, cfg.coverage_samples, cfg.seed)?;
        for (k, f) in s.fractions.iter().enumerate() {
            let _ = writeln!(csv, "{},{k},{f}", s.head);
        }
        summary.push(s);
    }
    clock.lap("coverage");
    files.write("coverage.csv", csv.as_bytes())?;
    files.commit(report("coverage", cfg, json!({ "heads": summary }), clock))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_defaults() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        let partial = ExperimentConfig::from_json(r#"{"seed": 3, "epochs": 5}"#).unwrap();
        assert_eq!(partial.seed, 3);
        assert_eq!(partial.epochs, 5);
        assert_eq!(partial.n_known, 8);
        assert!(ExperimentConfig::from_json(r#"{"sed": 3}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"task2_classes": 7}"#).is_err());
    }

    #[test]
    fn artifacts_are_removed_unless_committed() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut a = Artifacts::new(dir.path()).unwrap();
            a.write("x.csv", b"1\n").unwrap();
            assert!(dir.path().join("x.csv").exists());
        }
        assert!(!dir.path().join("x.csv").exists());
        let mut a = Artifacts::new(dir.path()).unwrap();
        a.write("y.csv", b"abc").unwrap();
        assert_eq!(
            a.outputs()[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let cfg = ExperimentConfig::default();
        a.commit(report("t", &cfg, json!({}), Clock::new())).unwrap();
        assert!(dir.path().join("y.csv").exists());
        assert!(dir.path().join("report.json").exists());
    }
}
