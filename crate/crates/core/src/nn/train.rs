use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::network::{argmax, Network};
use crate::error::{Error, Result};
use crate::signal::RecordView;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.02,
            epochs: 20,
            batch_size: 32,
            l2: 0.0,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("l2 must be >= 0, got {}", self.l2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch.
    pub loss: f64,
    /// Fraction of argmax-correct predictions seen during the epoch.
    pub accuracy: f64,
}

/// Per-step hooks used by incremental training: a parameter mask and an
/// extra penalty `(params, grad) -> value` that adds its gradient in place.
pub(crate) struct StepControl<'a> {
    pub mask: Option<&'a [f64]>,
    pub penalty: Option<&'a dyn Fn(&[f64], &mut [f64]) -> f64>,
}

pub(crate) fn batch_matrix(records: &[RecordView<'_>], idx: &[usize]) -> Result<Matrix> {
    let cols = records.first().map_or(0, |r| r.features.len());
    let mut data = Vec::with_capacity(idx.len() * cols);
    for &i in idx {
        let f = records[i].features;
        if f.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                actual: f.len(),
            });
        }
        data.extend_from_slice(f);
    }
    Matrix::from_vec(idx.len(), cols, data)
}

pub(crate) fn run_epoch(
    net: &mut Network,
    records: &[RecordView<'_>],
    labels: &[usize],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    epoch: usize,
    control: &StepControl<'_>,
) -> Result<EpochStats> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(rng);
    let mut loss_sum = 0.0;
    let mut batches = 0usize;
    let mut correct = 0usize;
    for chunk in order.chunks(cfg.batch_size) {
        let x = batch_matrix(records, chunk)?;
        let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
        let (mut loss, mut grad, logits) = net.loss_and_gradient(&x, &y, cfg.l2)?;
        if let Some(penalty) = control.penalty {
            loss += penalty(&net.params(), &mut grad);
        }
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        correct += (0..logits.rows)
            .filter(|&r| argmax(logits.row(r)) == y[r])
            .count();
        net.apply_update(&grad, cfg.learning_rate, control.mask)?;
        loss_sum += loss;
        batches += 1;
    }
    Ok(EpochStats {
        epoch,
        loss: loss_sum / batches.max(1) as f64,
        accuracy: correct as f64 / records.len().max(1) as f64,
    })
}

fn check_labels(net: &Network, records: &[RecordView<'_>]) -> Result<Vec<usize>> {
    records
        .iter()
        .map(|r| {
            if r.label < net.n_classes() {
                Ok(r.label)
            } else {
                Err(Error::InvalidArgument(format!(
                    "label {} outside [0, {})",
                    r.label,
                    net.n_classes()
                )))
            }
        })
        .collect()
}

/// Mini-batch SGD on softmax cross-entropy. Deterministic for a fixed seed.
pub fn train(net: &mut Network, records: &[RecordView<'_>], cfg: &TrainConfig) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::EmptySet("training set"));
    }
    let labels = check_labels(net, records)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let control = StepControl {
        mask: None,
        penalty: None,
    };
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let stats = run_epoch(net, records, &labels, cfg, &mut rng, epoch, &control)?;
        log::debug!("epoch {epoch}: loss {:.5} acc {:.4}", stats.loss, stats.accuracy);
        history.push(stats);
    }
    Ok(history)
}

const EVAL_CHUNK: usize = 256;

/// Predicted class of every record (ties go to the lowest index).
pub fn predict(net: &Network, records: &[RecordView<'_>]) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(records.len());
    let idx: Vec<usize> = (0..records.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let logits = net.logits(&batch_matrix(records, chunk)?)?;
        out.extend((0..logits.rows).map(|r| argmax(logits.row(r))));
    }
    Ok(out)
}

pub fn accuracy(net: &Network, records: &[RecordView<'_>]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptySet("accuracy set"));
    }
    let predicted = predict(net, records)?;
    let correct = predicted
        .iter()
        .zip(records)
        .filter(|(p, r)| **p == r.label)
        .count();
    Ok(correct as f64 / records.len() as f64)
}

/// Largest relative error between an analytic gradient and central finite
/// differences of `f`, over every coordinate. `f` returns `(value, grad)`.
pub fn gradient_check_fn<F>(params: &[f64], epsilon: f64, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if !(epsilon > 0.0 && epsilon <= 1e-2) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1e-2], got {epsilon}"
        )));
    }
    let (_, analytic) = f(params)?;
    if analytic.len() != params.len() {
        return Err(Error::LayoutMismatch {
            expected: params.len(),
            actual: analytic.len(),
        });
    }
    let mut probe = params.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        probe[i] = params[i] + epsilon;
        let plus = f(&probe)?.0;
        probe[i] = params[i] - epsilon;
        let minus = f(&probe)?.0;
        probe[i] = params[i];
        let numeric = (plus - minus) / (2.0 * epsilon);
        let err = relative_error(analytic[i], numeric);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// `|a − b| / max(|a| + |b|, 1e-7)`; the floor keeps both-near-zero pairs
/// from reporting spurious relative error.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-7)
}

/// Finite-difference check of the network's loss gradient on one batch.
pub fn gradient_check(net: &Network, batch: &Matrix, labels: &[usize], l2: f64, epsilon: f64) -> Result<f64> {
    gradient_check_fn(&net.params(), epsilon, |p| {
        let mut local = net.clone();
        local.set_params(p)?;
        let (loss, grad, _) = local.loss_and_gradient(batch, labels, l2)?;
        Ok((loss, grad))
    })
}
