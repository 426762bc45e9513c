//! Incremental learning of new classes with Elastic Weight Consolidation.
//!
//! New classes get one row each in the classifier head (a fingerprint for
//! the zero-bias head, a weight row plus bias for the dense head),
//! initialized from the mean latent vector of their records. Training on
//! the new task then combines a per-parameter lock mask with a quadratic
//! penalty `λ1/2 · Σ w·(ω − ω*)²` that pulls old parameters back toward
//! their task-1 values, where `w` is the (optionally exponentiated)
//! diagonal Fisher information.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    accuracy, batch_matrix, norm, run_epoch, softmax, Head, HeadKind, Matrix, Network, ParamRole, ParamSegment, StepControl,
    TrainConfig,
};
use crate::signal::RecordView;

const CHUNK: usize = 256;

/// Largest Fisher entry fed to `exp`.
pub const STABILIZE_CLAMP: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot {
    pub omega_star: Vec<f64>,
}

impl ParamSnapshot {
    pub fn of(net: &Network) -> Self {
        Self {
            omega_star: net.params(),
        }
    }
}

/// Diagonal Fisher information in parameter layout order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherInfo {
    pub f: Vec<f64>,
}

/// Per-parameter lock mask: `1` trainable, `0` frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskMatrix {
    pub g_m: Vec<f64>,
}

impl MaskMatrix {
    pub fn new(g_m: Vec<f64>) -> Result<Self> {
        if let Some(v) = g_m.iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidArgument(format!("mask entries must be 0 or 1, got {v}")));
        }
        Ok(Self { g_m })
    }

    pub fn ones(len: usize) -> Self {
        Self { g_m: vec![1.0; len] }
    }

    pub fn trainable(&self) -> usize {
        self.g_m.iter().filter(|&&v| v == 1.0).count()
    }
}

/// Squared gradient of `ln(mean_n softmax_n[y_n])` with respect to every
/// parameter. The softmax outputs are averaged before the log.
pub fn fisher_information(net: &Network, records: &[RecordView<'_>]) -> Result<FisherInfo> {
    if records.is_empty() {
        return Err(Error::EmptySet("Fisher validation set"));
    }
    let n_classes = net.n_classes();
    if let Some(r) = records.iter().find(|r| r.label >= n_classes) {
        return Err(Error::InvalidArgument(format!("label {} outside [0, {n_classes})", r.label)));
    }
    let idx: Vec<usize> = (0..records.len()).collect();

    let mut total = 0.0;
    for chunk in idx.chunks(CHUNK) {
        let probs = softmax(&net.logits(&batch_matrix(records, chunk)?)?);
        total += chunk.iter().enumerate().map(|(r, &i)| probs.get(r, records[i].label)).sum::<f64>();
    }
    let mean = total / records.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::DegeneratePosterior);
    }

    // d ln(P̄) / d logit_{n,j} = p_{n,y}·(δ_{jy} − p_{n,j}) / (N·P̄)
    let scale = 1.0 / (records.len() as f64 * mean);
    let mut grad = vec![0.0; net.param_count()];
    for chunk in idx.chunks(CHUNK) {
        let (logits, cache) = net.forward(&batch_matrix(records, chunk)?)?;
        let probs = softmax(&logits);
        let mut dlogits = Matrix::zeros(logits.rows, logits.cols);
        for (r, &i) in chunk.iter().enumerate() {
            let y = records[i].label;
            let py = probs.get(r, y);
            for (j, d) in dlogits.row_mut(r).iter_mut().enumerate() {
                let onehot = if j == y { 1.0 } else { 0.0 };
                *d = scale * py * (onehot - probs.get(r, j));
            }
        }
        for (g, c) in grad.iter_mut().zip(net.backward(&cache, &dlogits)?) {
            *g += c;
        }
    }
    Ok(FisherInfo {
        f: grad.into_iter().map(|g| g * g).collect(),
    })
}

/// Entrywise `exp`, with inputs above [`STABILIZE_CLAMP`] clamped.
pub fn stabilize(fisher: &FisherInfo) -> Result<FisherInfo> {
    if let Some(v) = fisher.f.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("Fisher entries must be non-negative, got {v}")));
    }
    let clamped = fisher.f.iter().filter(|&&v| v > STABILIZE_CLAMP).count();
    if clamped > 0 {
        log::warn!("clamped {clamped} Fisher entries at {STABILIZE_CLAMP} before exponentiation");
    }
    Ok(FisherInfo {
        f: fisher.f.iter().map(|&v| v.min(STABILIZE_CLAMP).exp()).collect(),
    })
}

fn check_layout(omega: &[f64], snapshot: &ParamSnapshot, fisher: &FisherInfo) -> Result<()> {
    for len in [snapshot.omega_star.len(), fisher.f.len()] {
        if len != omega.len() {
            return Err(Error::LayoutMismatch {
                expected: omega.len(),
                actual: len,
            });
        }
    }
    Ok(())
}

/// `λ1/2 · Σ f·(ω − ω*)²`.
pub fn ewc_penalty(omega: &[f64], snapshot: &ParamSnapshot, fisher: &FisherInfo, lambda1: f64) -> Result<f64> {
    check_layout(omega, snapshot, fisher)?;
    Ok(0.5
        * lambda1
        * omega
            .iter()
            .zip(&snapshot.omega_star)
            .zip(&fisher.f)
            .map(|((w, s), f)| f * (w - s) * (w - s))
            .sum::<f64>())
}

/// Base loss plus the EWC penalty.
pub fn ewc_loss(
    omega: &[f64],
    snapshot: &ParamSnapshot,
    fisher: &FisherInfo,
    lambda1: f64,
    base_loss: f64,
) -> Result<f64> {
    Ok(base_loss + ewc_penalty(omega, snapshot, fisher, lambda1)?)
}

/// Adds the penalty gradient `λ1·f·(ω − ω*)` to `grad`, then zeroes every
/// entry whose mask is 0.
pub fn ewc_gradient(
    omega: &[f64],
    snapshot: &ParamSnapshot,
    fisher: &FisherInfo,
    lambda1: f64,
    mask: &MaskMatrix,
    grad: &mut [f64],
) -> Result<()> {
    check_layout(omega, snapshot, fisher)?;
    for len in [mask.g_m.len(), grad.len()] {
        if len != omega.len() {
            return Err(Error::LayoutMismatch {
                expected: omega.len(),
                actual: len,
            });
        }
    }
    for (k, g) in grad.iter_mut().enumerate() {
        *g = (*g + lambda1 * fisher.f[k] * (omega[k] - snapshot.omega_star[k])) * mask.g_m[k];
    }
    Ok(())
}

/// Mean latent vector of a new class: the zero-bias embedding, or the dense
/// head's input.
pub fn init_fingerprint(net: &Network, records: &[RecordView<'_>]) -> Result<Vec<f64>> {
    if records.is_empty() {
        return Err(Error::EmptySet("new-class records"));
    }
    let idx: Vec<usize> = (0..records.len()).collect();
    let mut sum: Vec<f64> = Vec::new();
    for chunk in idx.chunks(CHUNK) {
        let latent = net.latent(&batch_matrix(records, chunk)?)?;
        if sum.is_empty() {
            sum = vec![0.0; latent.cols];
        }
        for r in 0..latent.rows {
            for (s, v) in sum.iter_mut().zip(latent.row(r)) {
                *s += v;
            }
        }
    }
    Ok(sum.into_iter().map(|s| s / records.len() as f64).collect())
}

/// Appends one class row per entry of `rows` to the head.
///
/// Dense logits depend on row magnitude, so a new dense row keeps only the
/// direction of its entry, rescaled to the mean norm of the existing rows,
/// and takes the mean existing bias. Zero-bias fingerprints are appended
/// unchanged.
pub fn concat_class_rows(net: &mut Network, rows: &[Vec<f64>]) -> Result<()> {
    match &mut net.head {
        Head::ZeroBias(h) => h.concat_fingerprints(rows),
        Head::Dense(layer) => {
            let cols = layer.inputs();
            if let Some(r) = rows.iter().find(|r| r.len() != cols) {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    actual: r.len(),
                });
            }
            let k = layer.outputs() as f64;
            let target = (0..layer.outputs()).map(|r| norm(layer.weights.row(r))).sum::<f64>() / k;
            let bias = layer.bias.iter().sum::<f64>() / k;
            for r in rows {
                let n = norm(r);
                if n == 0.0 {
                    return Err(Error::DegenerateDirection("new class row is zero".into()));
                }
                layer.weights.data.extend(r.iter().map(|v| v * target / n));
                layer.weights.rows += 1;
                layer.bias.push(bias);
            }
            Ok(())
        }
    }
}

/// Maps values laid out as `old` onto `new`: each segment's old content
/// becomes the prefix of the matching new segment and the rest is `fill`.
pub fn expand_to_layout(values: &[f64], old: &[ParamSegment], new: &[ParamSegment], fill: f64) -> Result<Vec<f64>> {
    let old_total: usize = old.iter().map(ParamSegment::len).sum();
    if values.len() != old_total {
        return Err(Error::LayoutMismatch {
            expected: old_total,
            actual: values.len(),
        });
    }
    if old.len() != new.len() || old.iter().zip(new).any(|(a, b)| a.role != b.role || a.len() > b.len()) {
        return Err(Error::InvalidArgument("layouts are not prefix-compatible".into()));
    }
    let mut out = Vec::with_capacity(new.iter().map(ParamSegment::len).sum());
    for (o, n) in old.iter().zip(new) {
        out.extend_from_slice(&values[o.range()]);
        out.extend(std::iter::repeat(fill).take(n.len() - o.len()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Nothing locked; EWC on every old parameter.
    GlobalEwc,
    /// Only new class rows train; no EWC.
    TrainNewFingerprintsOnly,
    /// Old class rows locked; EWC on the prior layers, which stay trainable.
    ProtectOldFingerprints,
    /// Prior layers locked; EWC on the old class rows; new rows free.
    EwcLastLayerOnly,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::GlobalEwc,
        Strategy::TrainNewFingerprintsOnly,
        Strategy::ProtectOldFingerprints,
        Strategy::EwcLastLayerOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::GlobalEwc => "global_ewc",
            Strategy::TrainNewFingerprintsOnly => "train_new_fingerprints_only",
            Strategy::ProtectOldFingerprints => "protect_old_fingerprints",
            Strategy::EwcLastLayerOnly => "ewc_last_layer_only",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::parse("strategy", format!("unknown strategy {s:?}")))
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    /// Hidden layers and the zero-bias embedding.
    Prior,
    OldClass,
    NewClass,
}

/// Region of every parameter after concatenation. `old` is the layout
/// before new rows were added.
fn regions(old: &[ParamSegment], new: &[ParamSegment]) -> Vec<Region> {
    let mut out = Vec::new();
    for (o, n) in old.iter().zip(new) {
        let class_rows = matches!(n.role, ParamRole::Fingerprints | ParamRole::HeadWeight | ParamRole::HeadBias);
        if class_rows {
            out.extend(std::iter::repeat(Region::OldClass).take(o.len()));
            out.extend(std::iter::repeat(Region::NewClass).take(n.len() - o.len()));
        } else {
            out.extend(std::iter::repeat(Region::Prior).take(n.len()));
        }
    }
    out
}

/// `(trainable, penalized)` per region.
fn strategy_table(strategy: Strategy, region: Region) -> (bool, bool) {
    use Region::*;
    use Strategy::*;
    match (strategy, region) {
        (GlobalEwc, NewClass) => (true, false),
        (GlobalEwc, _) => (true, true),
        (TrainNewFingerprintsOnly, r) => (r == NewClass, false),
        (ProtectOldFingerprints, Prior) => (true, true),
        (ProtectOldFingerprints, OldClass) => (false, false),
        (ProtectOldFingerprints, NewClass) => (true, false),
        (EwcLastLayerOnly, Prior) => (false, false),
        (EwcLastLayerOnly, OldClass) => (true, true),
        (EwcLastLayerOnly, NewClass) => (true, false),
    }
}

/// Lock mask and EWC scope (1 where the penalty applies) of a strategy.
pub fn strategy_masks(strategy: Strategy, old: &[ParamSegment], new: &[ParamSegment]) -> (MaskMatrix, Vec<f64>) {
    let (mask, scope) = regions(old, new)
        .into_iter()
        .map(|r| {
            let (t, p) = strategy_table(strategy, r);
            (f64::from(u8::from(t)), f64::from(u8::from(p)))
        })
        .unzip();
    (MaskMatrix { g_m: mask }, scope)
}

/// Data the per-epoch Fisher refresh is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherSource {
    /// The task-2 training records.
    CurrentTask,
    /// The retained task-1 validation records.
    Task1Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IncrementalConfig {
    pub lambda1: f64,
    pub strategy: Strategy,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Defaults to 0 for a dense head and 0.025 for a zero-bias head.
    pub l2: Option<f64>,
    pub stabilize: bool,
    pub fisher_source: FisherSource,
    pub seed: u64,
}

impl Default for IncrementalConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            strategy: Strategy::EwcLastLayerOnly,
            epochs: 30,
            learning_rate: 0.02,
            batch_size: 32,
            l2: None,
            stabilize: true,
            fisher_source: FisherSource::CurrentTask,
            seed: 1,
        }
    }
}

impl IncrementalConfig {
    pub fn l2_for(&self, kind: HeadKind) -> f64 {
        self.l2.unwrap_or(match kind {
            HeadKind::Dense => 0.0,
            HeadKind::ZeroBias => 0.025,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda1 must be non-negative, got {}", self.lambda1)));
        }
        if self.l2.is_some_and(|l| !(l >= 0.0)) {
            return Err(Error::InvalidArgument("l2 must be non-negative".into()));
        }
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            l2: 0.0,
            seed: self.seed,
        }
        .validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementalEpoch {
    pub epoch: usize,
    pub strategy: Strategy,
    pub task1_acc: f64,
    pub task2_acc: f64,
    /// Penalty value at the end of the epoch, with that epoch's weights.
    pub fisher_loss: f64,
    /// Mean and minimum penalty weight over the EWC scope; NaN when the
    /// strategy penalizes nothing.
    pub weight_mean: f64,
    pub weight_min: f64,
}

#[derive(Debug, Clone)]
pub struct IncrementalOutcome {
    pub network: Network,
    pub history: Vec<IncrementalEpoch>,
    /// `(original label, network class)` for every task-2 class.
    pub label_map: Vec<(usize, usize)>,
    pub snapshot: ParamSnapshot,
}

/// Runs the incremental procedure: snapshot the task-1 parameters, append
/// one initialized row per task-2 class, then train on task-2 under the
/// strategy's lock mask and EWC penalty. The penalty weights are refreshed
/// at the start of every epoch from [`IncrementalConfig::fisher_source`];
/// new class rows always have weight 0.
///
/// Task-2 labels are original class ids and must not collide with the
/// network's existing classes; they are renumbered after them in ascending
/// order. Task-1 validation records are only read for the Fisher source and
/// the accuracy probe.
pub fn incremental_train(
    net: &Network,
    task2: &[RecordView<'_>],
    task1_validation: &[RecordView<'_>],
    cfg: &IncrementalConfig,
) -> Result<IncrementalOutcome> {
    cfg.validate()?;
    if task2.is_empty() {
        return Err(Error::EmptySet("task-2 training set"));
    }
    if task1_validation.is_empty() {
        return Err(Error::EmptySet("task-1 validation set"));
    }
    let k = net.n_classes();
    if let Some(r) = task1_validation.iter().find(|r| r.label >= k) {
        return Err(Error::InvalidArgument(format!("task-1 label {} outside [0, {k})", r.label)));
    }
    let mut new_classes: Vec<usize> = task2.iter().map(|r| r.label).collect();
    new_classes.sort_unstable();
    new_classes.dedup();
    let overlap: Vec<usize> = new_classes.iter().copied().filter(|&c| c < k).collect();
    if !overlap.is_empty() {
        return Err(Error::OverlappingClasses(overlap));
    }
    let label_map: Vec<(usize, usize)> = new_classes.iter().enumerate().map(|(i, &c)| (c, k + i)).collect();
    let relabel = |c: usize| k + new_classes.binary_search(&c).expect("collected above");

    // Step 1
    let snapshot_old = ParamSnapshot::of(net);
    let old_layout = net.layout();

    // Steps 2-3
    let mut rows = Vec::with_capacity(new_classes.len());
    for &c in &new_classes {
        let members: Vec<RecordView> = task2.iter().copied().filter(|r| r.label == c).collect();
        rows.push(init_fingerprint(net, &members)?);
    }
    let mut net = net.clone();
    concat_class_rows(&mut net, &rows)?;
    let new_layout = net.layout();
    let snapshot = ParamSnapshot {
        omega_star: expand_to_layout(&snapshot_old.omega_star, &old_layout, &new_layout, 0.0)?,
    };
    // new rows start at their initial values
    let params = net.params();
    let snapshot = ParamSnapshot {
        omega_star: snapshot
            .omega_star
            .iter()
            .zip(regions(&old_layout, &new_layout))
            .zip(&params)
            .map(|((&s, r), &p)| if r == Region::NewClass { p } else { s })
            .collect(),
    };

    // Step 4
    let (mask, scope) = strategy_masks(cfg.strategy, &old_layout, &new_layout);
    let penalized = scope.iter().any(|&s| s != 0.0);

    let task2_features: Vec<RecordView> = task2
        .iter()
        .map(|r| RecordView {
            features: r.features,
            label: relabel(r.label),
        })
        .collect();
    let labels: Vec<usize> = task2_features.iter().map(|r| r.label).collect();
    let train_cfg = TrainConfig {
        learning_rate: cfg.learning_rate,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        l2: cfg.l2_for(net.head_kind()),
        seed: cfg.seed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs);

    // Step 5
    for epoch in 1..=cfg.epochs {
        let weights = if penalized {
            let source = match cfg.fisher_source {
                FisherSource::CurrentTask => &task2_features[..],
                FisherSource::Task1Validation => task1_validation,
            };
            let raw = fisher_information(&net, source)?;
            let raw = if cfg.stabilize { stabilize(&raw)? } else { raw };
            FisherInfo {
                f: raw.f.iter().zip(&scope).map(|(f, s)| f * s).collect(),
            }
        } else {
            FisherInfo {
                f: vec![0.0; scope.len()],
            }
        };
        let penalty = |omega: &[f64], grad: &mut [f64]| -> f64 {
            for (k, g) in grad.iter_mut().enumerate() {
                *g += cfg.lambda1 * weights.f[k] * (omega[k] - snapshot.omega_star[k]);
            }
            ewc_penalty(omega, &snapshot, &weights, cfg.lambda1).unwrap_or(f64::NAN)
        };
        let control = StepControl {
            mask: Some(&mask.g_m),
            penalty: penalized.then_some(&penalty as &dyn Fn(&[f64], &mut [f64]) -> f64),
        };
        run_epoch(&mut net, &task2_features, &labels, &train_cfg, &mut rng, epoch, &control)?;

        let in_scope: Vec<f64> = weights.f.iter().zip(&scope).filter(|(_, &s)| s != 0.0).map(|(w, _)| *w).collect();
        let (weight_mean, weight_min) = if in_scope.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (
                in_scope.iter().sum::<f64>() / in_scope.len() as f64,
                in_scope.iter().copied().fold(f64::INFINITY, f64::min),
            )
        };
        let entry = IncrementalEpoch {
            epoch,
            strategy: cfg.strategy,
            task1_acc: accuracy(&net, task1_validation)?,
            task2_acc: accuracy(&net, &task2_features)?,
            fisher_loss: ewc_penalty(&net.params(), &snapshot, &weights, cfg.lambda1)?,
            weight_mean,
            weight_min,
        };
        log::debug!(
            "{} epoch {epoch}: task1 {:.4} task2 {:.4} fisher {:.4e}",
            cfg.strategy,
            entry.task1_acc,
            entry.task2_acc,
            entry.fisher_loss
        );
        history.push(entry);
    }
    Ok(IncrementalOutcome {
        network: net,
        history,
        label_map,
        snapshot,
    })
}

pub const HISTORY_HEADER: &str = "epoch,strategy,task1_acc,task2_acc,fisher_loss";
pub const STABILITY_HEADER: &str = "epoch,strategy,stabilized,weight_mean,weight_min,fisher_loss";

pub fn history_csv(history: &[IncrementalEpoch]) -> String {
    let mut out = format!("{HISTORY_HEADER}\n");
    for h in history {
        let _ = writeln!(out, "{},{},{},{},{}", h.epoch, h.strategy, h.task1_acc, h.task2_acc, h.fisher_loss);
    }
    out
}

pub fn write_history_csv(history: &[IncrementalEpoch], path: &Path) -> Result<()> {
    std::fs::write(path, history_csv(history)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{gradient_check_fn, train};
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    /// Gaussian blobs around class-specific centers in `dim` dimensions.
    fn blobs(classes: &[usize], per_class: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &c in classes {
            let mut center_rng = ChaCha8Rng::seed_from_u64(1000 + c as u64);
            let center: Vec<f64> = (0..dim).map(|_| center_rng.gen_range(-2.0..2.0)).collect();
            for _ in 0..per_class {
                xs.push(center.iter().map(|m| m + noise.sample(&mut rng)).collect());
                ys.push(c);
            }
        }
        (xs, ys)
    }

    fn views<'a>(xs: &'a [Vec<f64>], ys: &[usize]) -> Vec<RecordView<'a>> {
        xs.iter().zip(ys).map(|(x, &label)| RecordView { features: x, label }).collect()
    }

    fn trained(kind: HeadKind, seed: u64) -> (Network, Vec<Vec<f64>>, Vec<usize>) {
        let (xs, ys) = blobs(&[0, 1, 2], 40, 6, seed);
        let mut net = Network::new(kind, 6, &[16], 3, seed);
        let cfg = TrainConfig {
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 16,
            l2: 0.0,
            seed,
        };
        train(&mut net, &views(&xs, &ys), &cfg).unwrap();
        (net, xs, ys)
    }

    #[test]
    fn stabilize_values() {
        let f = FisherInfo {
            f: vec![0.0, 2f64.ln(), 100.0],
        };
        let s = stabilize(&f).unwrap();
        assert_eq!(s.f[0], 1.0);
        assert!((s.f[1] - 2.0).abs() < 1e-12);
        assert_eq!(s.f[2], STABILIZE_CLAMP.exp());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..10.0)).collect();
        let s = stabilize(&FisherInfo { f: r.clone() }).unwrap();
        for (a, b) in s.f.iter().zip(&r) {
            assert_eq!(*a, b.exp());
            assert!(*a >= 1.0);
        }
        assert!(stabilize(&FisherInfo { f: vec![-1.0] }).is_err());
    }

    #[test]
    fn penalty_values() {
        let snap = ParamSnapshot {
            omega_star: vec![1.0, 2.0, 3.0],
        };
        let ones = FisherInfo { f: vec![1.0; 3] };
        assert_eq!(ewc_loss(&[1.0, 2.0, 3.0], &snap, &ones, 1.0, 0.7).unwrap(), 0.7);
        let delta = 0.3;
        let p = ewc_penalty(&[1.0, 2.0 + delta, 3.0], &snap, &ones, 2.0).unwrap();
        assert!((p - delta * delta).abs() < 1e-15);
        assert!(ewc_penalty(&[1.0], &snap, &ones, 1.0).is_err());
    }

    #[test]
    fn penalty_gradient_and_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let omega: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let snap = ParamSnapshot {
            omega_star: (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let fisher = FisherInfo {
            f: (0..8).map(|_| rng.gen_range(0.0..3.0)).collect(),
        };
        let mut grad = vec![0.0; 8];
        ewc_gradient(&omega, &snap, &fisher, 1.5, &MaskMatrix::ones(8), &mut grad).unwrap();
        let err = gradient_check_fn(&omega, 1e-6, |p| {
            let value = ewc_penalty(p, &snap, &fisher, 1.5).unwrap();
            let mut g = vec![0.0; 8];
            ewc_gradient(p, &snap, &fisher, 1.5, &MaskMatrix::ones(8), &mut g).unwrap();
            Ok((value, g))
        })
        .unwrap();
        assert!(err < 1e-6, "{err}");

        let mut grad = vec![1.0; 8];
        ewc_gradient(&omega, &snap, &fisher, 1.5, &MaskMatrix::new(vec![0.0; 8]).unwrap(), &mut grad).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
        assert!(MaskMatrix::new(vec![0.5]).is_err());
    }

    #[test]
    fn fisher_matches_finite_differences() {
        for kind in [HeadKind::Dense, HeadKind::ZeroBias] {
            let (net, xs, ys) = trained(kind, 3);
            let records = views(&xs[..20], &ys[..20]);
            let fisher = fisher_information(&net, &records).unwrap();
            let log_mean = |p: &[f64]| {
                let mut probe = net.clone();
                probe.set_params(p).unwrap();
                let probs = softmax(&probe.logits(&batch_matrix(&records, &(0..20).collect::<Vec<_>>()).unwrap()).unwrap());
                ((0..20).map(|r| probs.get(r, ys[r])).sum::<f64>() / 20.0).ln()
            };
            let params = net.params();
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            for _ in 0..40 {
                let k = rng.gen_range(0..params.len());
                let h = 1e-5;
                let mut plus = params.clone();
                plus[k] += h;
                let mut minus = params.clone();
                minus[k] -= h;
                let g = (log_mean(&plus) - log_mean(&minus)) / (2.0 * h);
                let expected = g * g;
                assert!(
                    (fisher.f[k] - expected).abs() <= 1e-6 * expected.max(1e-4),
                    "{kind} param {k}: {} vs {expected}",
                    fisher.f[k]
                );
            }
        }
    }

    #[test]
    fn fisher_is_invariant_to_duplication() {
        let (net, xs, ys) = trained(HeadKind::ZeroBias, 5);
        let once = fisher_information(&net, &views(&xs, &ys)).unwrap();
        let xs2: Vec<Vec<f64>> = xs.iter().chain(&xs).cloned().collect();
        let ys2: Vec<usize> = ys.iter().chain(&ys).copied().collect();
        let twice = fisher_information(&net, &views(&xs2, &ys2)).unwrap();
        for (a, b) in once.f.iter().zip(&twice.f) {
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-12), "{a} {b}");
        }
        assert!(fisher_information(&net, &[]).is_err());
    }

    #[test]
    fn unused_parameters_have_zero_fisher() {
        // a dead hidden unit has zero gradient everywhere
        let (mut net, xs, ys) = trained(HeadKind::Dense, 6);
        let first = &mut net.hidden[0];
        let cols = first.inputs();
        first.weights.row_mut(0).iter_mut().for_each(|w| *w = 0.0);
        first.bias[0] = -1.0;
        let fisher = fisher_information(&net, &views(&xs, &ys)).unwrap();
        assert!(fisher.f[..cols].iter().all(|&f| f == 0.0));
    }

    #[test]
    fn fingerprint_init() {
        let (net, xs, ys) = trained(HeadKind::ZeroBias, 7);
        let single = init_fingerprint(&net, &views(&xs[..1], &ys[..1])).unwrap();
        let embed = net.latent(&Matrix::from_rows(&xs[..1]).unwrap()).unwrap();
        assert_eq!(single, embed.row(0));
        let all = init_fingerprint(&net, &views(&xs, &ys)).unwrap();
        let latent = net.latent(&Matrix::from_rows(&xs).unwrap()).unwrap();
        for d in 0..latent.cols {
            let mean = (0..latent.rows).map(|r| latent.get(r, d)).sum::<f64>() / latent.rows as f64;
            assert!((all[d] - mean).abs() < 1e-12);
        }
        assert!(init_fingerprint(&net, &[]).is_err());
    }

    #[test]
    fn concat_keeps_old_rows() {
        for kind in [HeadKind::Dense, HeadKind::ZeroBias] {
            let (mut net, _, _) = trained(kind, 8);
            let before = net.params();
            let old_layout = net.layout();
            let width = match &net.head {
                Head::Dense(l) => l.inputs(),
                Head::ZeroBias(h) => h.latent_dim(),
            };
            concat_class_rows(&mut net, &[]).unwrap();
            assert_eq!(net.params(), before);
            concat_class_rows(&mut net, &[vec![0.5; width]]).unwrap();
            assert_eq!(net.n_classes(), 4);
            let expanded = expand_to_layout(&before, &old_layout, &net.layout(), f64::NAN).unwrap();
            for (a, b) in expanded.iter().zip(net.params()) {
                assert!(a.is_nan() || *a == b);
            }
            assert!(concat_class_rows(&mut net, &[vec![0.5; width + 1]]).is_err());
        }
    }

    #[test]
    fn mask_table() {
        let (mut net, _, _) = trained(HeadKind::ZeroBias, 9);
        let old = net.layout();
        let c = net.zero_bias_head().unwrap().latent_dim();
        concat_class_rows(&mut net, &[vec![1.0; c]]).unwrap();
        let new = net.layout();
        let fp = new.iter().find(|s| s.role == ParamRole::Fingerprints).unwrap();
        let new_rows = fp.offset + 3 * c..fp.offset + 4 * c;
        let (m, s) = strategy_masks(Strategy::TrainNewFingerprintsOnly, &old, &new);
        assert_eq!(m.trainable(), c);
        assert!(m.g_m[new_rows.clone()].iter().all(|&v| v == 1.0));
        assert!(s.iter().all(|&v| v == 0.0));
        let (m, s) = strategy_masks(Strategy::GlobalEwc, &old, &new);
        assert_eq!(m.trainable(), net.param_count());
        assert!(s[new_rows.clone()].iter().all(|&v| v == 0.0));
        let (m, s) = strategy_masks(Strategy::EwcLastLayerOnly, &old, &new);
        assert_eq!(m.trainable(), fp.len());
        assert_eq!(s.iter().filter(|&&v| v == 1.0).count(), 3 * c);
        let (m, _) = strategy_masks(Strategy::ProtectOldFingerprints, &old, &new);
        assert!(m.g_m[fp.offset..fp.offset + 3 * c].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn incremental_lock_semantics_and_history() {
        for kind in [HeadKind::Dense, HeadKind::ZeroBias] {
            let (net, xs, ys) = trained(kind, 10);
            let (x2, y2) = blobs(&[7, 9], 30, 6, 11);
            let cfg = IncrementalConfig {
                strategy: Strategy::TrainNewFingerprintsOnly,
                epochs: 5,
                ..IncrementalConfig::default()
            };
            let out = incremental_train(&net, &views(&x2, &y2), &views(&xs, &ys), &cfg).unwrap();
            assert_eq!(out.label_map, vec![(7, 3), (9, 4)]);
            assert_eq!(out.history.len(), 5);
            let before = net.params();
            let after = expand_to_layout(&before, &net.layout(), &out.network.layout(), f64::NAN).unwrap();
            let (mask, _) = strategy_masks(cfg.strategy, &net.layout(), &out.network.layout());
            for ((a, b), m) in after.iter().zip(out.network.params()).zip(&mask.g_m) {
                if *m == 0.0 {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
            assert!(out.history.last().unwrap().task2_acc > 0.6, "{kind}: {:?}", out.history.last());
            let csv = history_csv(&out.history);
            assert_eq!(csv.lines().next().unwrap(), HISTORY_HEADER);
            assert_eq!(csv.lines().count(), 6);
        }
    }

    #[test]
    fn stabilized_weights_stay_above_one() {
        let (net, xs, ys) = trained(HeadKind::ZeroBias, 12);
        let (x2, y2) = blobs(&[3], 30, 6, 13);
        for strategy in [Strategy::GlobalEwc, Strategy::EwcLastLayerOnly, Strategy::ProtectOldFingerprints] {
            let cfg = IncrementalConfig {
                strategy,
                epochs: 4,
                ..IncrementalConfig::default()
            };
            let out = incremental_train(&net, &views(&x2, &y2), &views(&xs, &ys), &cfg).unwrap();
            assert!(out.history.iter().all(|h| h.weight_min >= 1.0));
        }
    }

    #[test]
    fn incremental_preconditions() {
        let (net, xs, ys) = trained(HeadKind::ZeroBias, 14);
        let (x2, y2) = blobs(&[1, 5], 10, 6, 15);
        let cfg = IncrementalConfig::default();
        assert!(matches!(
            incremental_train(&net, &views(&x2, &y2), &views(&xs, &ys), &cfg),
            Err(Error::OverlappingClasses(v)) if v == vec![1]
        ));
        assert!(incremental_train(&net, &[], &views(&xs, &ys), &cfg).is_err());
        let (x3, y3) = blobs(&[5], 10, 6, 15);
        assert!(incremental_train(&net, &views(&x3, &y3), &[], &cfg).is_err());
        assert_eq!(Strategy::parse("global_ewc").unwrap(), Strategy::GlobalEwc);
        assert!(Strategy::parse("nope").is_err());
    }
}
