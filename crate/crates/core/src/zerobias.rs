//! Zero-bias head: a latent embedding `y1 = W0·x + b` matched against class
//! fingerprints (rows of `W1`) by cosine similarity, with no per-class bias
//! or scale. Also the hypersphere coverage analysis and latent export.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{argmax, batch_matrix, dot, glorot, norm, DenseLayer, Head, Matrix, Network};
use crate::signal::{Dataset, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroBiasHead {
    /// W0, latent_dim × inputs
    pub embedding: Matrix,
    /// b, latent_dim
    pub bias: Vec<f64>,
    /// W1, one fingerprint row of latent_dim values per class
    pub fingerprints: Matrix,
    /// Similarities are multiplied by this before the softmax.
    pub scale: f64,
}

impl ZeroBiasHead {
    pub const DEFAULT_SCALE: f64 = 16.0;

    pub fn new(inputs: usize, latent_dim: usize, n_classes: usize, rng: &mut impl Rng) -> Self {
        Self {
            embedding: glorot(latent_dim, inputs, rng),
            bias: vec![0.0; latent_dim],
            fingerprints: glorot(n_classes, latent_dim, rng),
            scale: Self::DEFAULT_SCALE,
        }
    }

    pub fn inputs(&self) -> usize {
        self.embedding.cols
    }

    pub fn latent_dim(&self) -> usize {
        self.embedding.rows
    }

    pub fn n_classes(&self) -> usize {
        self.fingerprints.rows
    }

    pub fn validate(&self) -> Result<()> {
        if self.bias.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                actual: self.bias.len(),
            });
        }
        if self.fingerprints.cols != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                actual: self.fingerprints.cols,
            });
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }

    pub fn embed_batch(&self, x: &Matrix) -> Result<Matrix> {
        let mut y = x.mul_transposed(&self.embedding)?;
        for row in y.data.chunks_mut(self.bias.len().max(1)) {
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(y)
    }

    pub fn embed(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.embed_batch(&Matrix::from_rows(&[x])?)?.data)
    }

    /// Cosine similarity of `y1` to every fingerprint.
    pub fn match_scores(&self, y1: &[f64]) -> Result<Vec<f64>> {
        if y1.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                actual: y1.len(),
            });
        }
        (0..self.n_classes())
            .map(|k| cosine_similarity(y1, self.fingerprints.row(k)))
            .collect()
    }

    pub fn predict_latent(&self, y1: &[f64]) -> Result<usize> {
        Ok(argmax(&self.match_scores(y1)?))
    }

    /// Appends one fingerprint row per new class; existing rows are untouched.
    pub fn concat_fingerprints(&mut self, new_fingerprints: &[Vec<f64>]) -> Result<()> {
        for fp in new_fingerprints {
            if fp.len() != self.latent_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.latent_dim(),
                    actual: fp.len(),
                });
            }
        }
        for fp in new_fingerprints {
            self.fingerprints.data.extend_from_slice(fp);
            self.fingerprints.rows += 1;
        }
        Ok(())
    }
}

/// `a·b / (‖a‖‖b‖)`, clamped to [-1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateDirection("zero-norm vector in cosine similarity".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 − cosine_similarity`, in [0, 2].
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

/// Replaces a regular dense head with a zero-bias head that reproduces its
/// decisions: the old weights and biases become the embedding `W0`, `b`, and
/// the fingerprints start as the identity so class `k` matches latent axis
/// `k`. The result still needs retraining before accuracy is compared.
pub fn convert_head(net: &Network) -> Result<Network> {
    let layer: &DenseLayer = match &net.head {
        Head::Dense(l) => l,
        Head::ZeroBias(_) => {
            return Err(Error::HeadMismatch("network already has a zero-bias head".into()))
        }
    };
    let classes = layer.outputs();
    Ok(Network {
        hidden: net.hidden.clone(),
        head: Head::ZeroBias(ZeroBiasHead {
            embedding: layer.weights.clone(),
            bias: layer.bias.clone(),
            fingerprints: Matrix::identity(classes),
            scale: ZeroBiasHead::DEFAULT_SCALE,
        }),
    })
}

const COVERAGE_CHUNK: usize = 8192;

fn coverage_counts<F>(dim: usize, classes: usize, n_samples: usize, seed: u64, assign: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> usize + Sync,
{
    let n_chunks = n_samples.div_ceil(COVERAGE_CHUNK);
    let partial: Vec<Vec<u64>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = COVERAGE_CHUNK.min(n_samples - chunk * COVERAGE_CHUNK);
            let mut counts = vec![0u64; classes];
            let mut u = vec![0.0; dim];
            for _ in 0..count {
                loop {
                    u.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                    let n = norm(&u);
                    if n > 0.0 {
                        u.iter_mut().for_each(|v| *v /= n);
                        break;
                    }
                }
                counts[assign(&u)] += 1;
            }
            counts
        })
        .collect();
    let mut totals = vec![0u64; classes];
    for counts in partial {
        for (t, c) in totals.iter_mut().zip(counts) {
            *t += c;
        }
    }
    totals
        .into_iter()
        .map(|c| c as f64 / n_samples as f64)
        .collect()
}

/// Fraction of uniformly random latent directions whose best cosine match
/// is each class.
pub fn coverage_ratio(head: &ZeroBiasHead, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    if n_samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "coverage needs at least 1000 samples, got {n_samples}"
        )));
    }
    let unit: Vec<Vec<f64>> = (0..head.n_classes())
        .map(|k| {
            let row = head.fingerprints.row(k);
            let n = norm(row);
            if n == 0.0 {
                Err(Error::DegenerateDirection(format!("fingerprint row {k} is zero")))
            } else {
                Ok(row.iter().map(|v| v / n).collect())
            }
        })
        .collect::<Result<_>>()?;
    Ok(coverage_counts(head.latent_dim(), head.n_classes(), n_samples, seed, |u| {
        let scores: Vec<f64> = unit.iter().map(|w| dot(u, w)).collect();
        argmax(&scores)
    }))
}

/// Coverage of a regular dense head: unit directions in its input space are
/// assigned to `argmax(W·u + b)`, so per-class weight norms and biases
/// take part in the decision.
pub fn dense_coverage_ratio(layer: &DenseLayer, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    if n_samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "coverage needs at least 1000 samples, got {n_samples}"
        )));
    }
    Ok(coverage_counts(layer.inputs(), layer.outputs(), n_samples, seed, |u| {
        let scores: Vec<f64> = (0..layer.outputs())
            .map(|k| dot(u, layer.weights.row(k)) + layer.bias[k])
            .collect();
        argmax(&scores)
    }))
}

pub fn network_coverage_ratio(net: &Network, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    match &net.head {
        Head::Dense(l) => dense_coverage_ratio(l, n_samples, seed),
        Head::ZeroBias(h) => coverage_ratio(h, n_samples, seed),
    }
}

/// Population variance of a set of fractions.
pub fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// Writes `label,y1_0..` rows for every record (label is the class index, or
/// `abnormal`), then one `fingerprint:<class>` row per class. Returns the
/// number of data rows written, excluding the header.
pub fn export_latent(net: &Network, dataset: &Dataset, path: &Path) -> Result<usize> {
    let (dim, fingerprints): (usize, &Matrix) = match &net.head {
        Head::ZeroBias(h) => (h.latent_dim(), &h.fingerprints),
        Head::Dense(l) => (l.inputs(), &l.weights),
    };
    let records = dataset.all();
    let mut text = String::from("label");
    for k in 0..dim {
        write!(text, ",y1_{k}").unwrap();
    }
    text.push('\n');
    let idx: Vec<usize> = (0..records.len()).collect();
    let mut rows = 0;
    for chunk in idx.chunks(256) {
        let latent = net.latent(&batch_matrix(&records, chunk)?)?;
        for (r, &i) in chunk.iter().enumerate() {
            if dataset.split[i] == Split::Abnormal {
                text.push_str("abnormal");
            } else {
                write!(text, "{}", records[i].label).unwrap();
            }
            for v in latent.row(r) {
                write!(text, ",{v}").unwrap();
            }
            text.push('\n');
            rows += 1;
        }
    }
    for k in 0..fingerprints.rows {
        write!(text, "fingerprint:{k}").unwrap();
        for v in fingerprints.row(k) {
            write!(text, ",{v}").unwrap();
        }
        text.push('\n');
        rows += 1;
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(rows)
}
