use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{axpy, dot, norm, Matrix};
use crate::error::{Error, Result};
use crate::zerobias::ZeroBiasHead;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// outputs × inputs
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

pub(crate) fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-limit..=limit))
        .collect();
    Matrix {
        rows,
        cols,
        data,
    }
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        Self {
            weights: glorot(outputs, inputs, rng),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows
    }

    /// Returns (pre-activation, activation).
    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let mut pre = x.mul_transposed(&self.weights)?;
        for row in pre.data.chunks_mut(self.bias.len().max(1)) {
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        let out = match self.activation {
            Activation::Linear => pre.clone(),
            Activation::Relu => Matrix {
                rows: pre.rows,
                cols: pre.cols,
                data: pre.data.iter().map(|&v| v.max(0.0)).collect(),
            },
        };
        Ok((pre, out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Dense(DenseLayer),
    ZeroBias(ZeroBiasHead),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Dense,
    ZeroBias,
}

impl HeadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Dense => "dense",
            HeadKind::ZeroBias => "zero_bias",
        }
    }
}

impl std::fmt::Display for HeadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Head {
    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Dense(_) => HeadKind::Dense,
            Head::ZeroBias(_) => HeadKind::ZeroBias,
        }
    }

    pub fn inputs(&self) -> usize {
        match self {
            Head::Dense(l) => l.inputs(),
            Head::ZeroBias(h) => h.inputs(),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Head::Dense(l) => l.outputs(),
            Head::ZeroBias(h) => h.n_classes(),
        }
    }
}

/// Where a parameter block sits in the flattened parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    HiddenWeight(usize),
    HiddenBias(usize),
    HeadWeight,
    HeadBias,
    Embedding,
    EmbeddingBias,
    Fingerprints,
}

impl ParamRole {
    pub fn is_hidden(self) -> bool {
        matches!(self, ParamRole::HiddenWeight(_) | ParamRole::HiddenBias(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSegment {
    pub role: ParamRole,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl ParamSegment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub hidden: Vec<DenseLayer>,
    pub head: Head,
}

#[derive(Debug, Clone)]
enum HeadCache {
    Dense,
    ZeroBias {
        latent: Matrix,
        latent_norms: Vec<f64>,
        fingerprint_norms: Vec<f64>,
        cos: Matrix,
    },
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of every hidden layer followed by the head input.
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    head: HeadCache,
}

impl ForwardCache {
    /// Input to the head (penultimate activations).
    pub fn head_input(&self) -> &Matrix {
        self.inputs.last().expect("cache holds at least the input batch")
    }

    /// Zero-bias latent vectors `W0·x + b`, when the head is zero-bias.
    pub fn latent(&self) -> Option<&Matrix> {
        match &self.head {
            HeadCache::ZeroBias { latent, .. } => Some(latent),
            HeadCache::Dense => None,
        }
    }
}

impl Network {
    fn hidden_stack(input_dim: usize, hidden: &[usize], rng: &mut ChaCha8Rng) -> Vec<DenseLayer> {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut width = input_dim;
        for &h in hidden {
            layers.push(DenseLayer::new(width, h, Activation::Relu, rng));
            width = h;
        }
        layers
    }

    /// Hidden ReLU layers followed by a regular dense softmax head.
    pub fn new_dense(input_dim: usize, hidden: &[usize], n_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = Self::hidden_stack(input_dim, hidden, &mut rng);
        let width = hidden.last().copied().unwrap_or(input_dim);
        Self {
            hidden: layers,
            head: Head::Dense(DenseLayer::new(width, n_classes, Activation::Linear, &mut rng)),
        }
    }

    /// Same hidden stack (identical initial weights for the same seed) with a
    /// zero-bias head whose latent dimension equals the class count.
    pub fn new_zero_bias(input_dim: usize, hidden: &[usize], n_classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = Self::hidden_stack(input_dim, hidden, &mut rng);
        let width = hidden.last().copied().unwrap_or(input_dim);
        Self {
            hidden: layers,
            head: Head::ZeroBias(ZeroBiasHead::new(width, n_classes, n_classes, &mut rng)),
        }
    }

    pub fn new(kind: HeadKind, input_dim: usize, hidden: &[usize], n_classes: usize, seed: u64) -> Self {
        match kind {
            HeadKind::Dense => Self::new_dense(input_dim, hidden, n_classes, seed),
            HeadKind::ZeroBias => Self::new_zero_bias(input_dim, hidden, n_classes, seed),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.hidden
            .first()
            .map_or_else(|| self.head.inputs(), |l| l.inputs())
    }

    pub fn n_classes(&self) -> usize {
        self.head.n_classes()
    }

    pub fn head_kind(&self) -> HeadKind {
        self.head.kind()
    }

    pub fn zero_bias_head(&self) -> Option<&ZeroBiasHead> {
        match &self.head {
            Head::ZeroBias(h) => Some(h),
            Head::Dense(_) => None,
        }
    }

    /// Checks that adjacent layer dimensions chain and parameters are finite.
    pub fn validate(&self) -> Result<()> {
        let mut width = self.input_dim();
        for layer in &self.hidden {
            if layer.inputs() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    actual: layer.inputs(),
                });
            }
            if layer.bias.len() != layer.outputs() {
                return Err(Error::DimensionMismatch {
                    expected: layer.outputs(),
                    actual: layer.bias.len(),
                });
            }
            width = layer.outputs();
        }
        if self.head.inputs() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                actual: self.head.inputs(),
            });
        }
        match &self.head {
            Head::Dense(l) if l.bias.len() != l.outputs() => {
                return Err(Error::DimensionMismatch {
                    expected: l.outputs(),
                    actual: l.bias.len(),
                })
            }
            Head::ZeroBias(h) => h.validate()?,
            _ => {}
        }
        if self.param_slices().iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("non-finite network parameter".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> Vec<ParamSegment> {
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |role, rows, cols| {
            segments.push(ParamSegment {
                role,
                offset,
                rows,
                cols,
            });
            offset += rows * cols;
        };
        for (i, layer) in self.hidden.iter().enumerate() {
            push(ParamRole::HiddenWeight(i), layer.weights.rows, layer.weights.cols);
            push(ParamRole::HiddenBias(i), layer.bias.len(), 1);
        }
        match &self.head {
            Head::Dense(l) => {
                push(ParamRole::HeadWeight, l.weights.rows, l.weights.cols);
                push(ParamRole::HeadBias, l.bias.len(), 1);
            }
            Head::ZeroBias(h) => {
                push(ParamRole::Embedding, h.embedding.rows, h.embedding.cols);
                push(ParamRole::EmbeddingBias, h.bias.len(), 1);
                push(ParamRole::Fingerprints, h.fingerprints.rows, h.fingerprints.cols);
            }
        }
        segments
    }

    /// Parameter blocks in layout order.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in &self.hidden {
            out.push(&layer.weights.data);
            out.push(&layer.bias);
        }
        match &self.head {
            Head::Dense(l) => {
                out.push(&l.weights.data);
                out.push(&l.bias);
            }
            Head::ZeroBias(h) => {
                out.push(&h.embedding.data);
                out.push(&h.bias);
                out.push(&h.fingerprints.data);
            }
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in &mut self.hidden {
            out.push(&mut layer.weights.data);
            out.push(&mut layer.bias);
        }
        match &mut self.head {
            Head::Dense(l) => {
                out.push(&mut l.weights.data);
                out.push(&mut l.bias);
            }
            Head::ZeroBias(h) => {
                out.push(&mut h.embedding.data);
                out.push(&mut h.bias);
                out.push(&mut h.fingerprints.data);
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if values.len() != expected {
            return Err(Error::LayoutMismatch {
                expected,
                actual: values.len(),
            });
        }
        let mut offset = 0;
        for slice in self.param_slices_mut() {
            slice.copy_from_slice(&values[offset..offset + slice.len()]);
            offset += slice.len();
        }
        Ok(())
    }

    /// `params -= learning_rate * grad` on every entry whose mask is nonzero.
    pub fn apply_update(&mut self, grad: &[f64], learning_rate: f64, mask: Option<&[f64]>) -> Result<()> {
        let expected = self.param_count();
        if grad.len() != expected {
            return Err(Error::LayoutMismatch {
                expected,
                actual: grad.len(),
            });
        }
        if let Some(m) = mask {
            if m.len() != expected {
                return Err(Error::LayoutMismatch {
                    expected,
                    actual: m.len(),
                });
            }
        }
        let mut offset = 0;
        for slice in self.param_slices_mut() {
            for (k, p) in slice.iter_mut().enumerate() {
                let idx = offset + k;
                if mask.map_or(true, |m| m[idx] != 0.0) {
                    *p -= learning_rate * grad[idx];
                }
            }
            offset += slice.len();
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
        if batch.cols != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: batch.cols,
            });
        }
        let mut inputs = Vec::with_capacity(self.hidden.len() + 1);
        let mut pre = Vec::with_capacity(self.hidden.len());
        let mut current = batch.clone();
        for layer in &self.hidden {
            let (z, a) = layer.forward(&current)?;
            inputs.push(std::mem::replace(&mut current, a));
            pre.push(z);
        }
        let (logits, head) = match &self.head {
            Head::Dense(layer) => (layer.forward(&current)?.0, HeadCache::Dense),
            Head::ZeroBias(h) => {
                let latent = h.embed_batch(&current)?;
                let latent_norms: Vec<f64> = (0..latent.rows).map(|r| norm(latent.row(r))).collect();
                let fingerprint_norms: Vec<f64> = (0..h.fingerprints.rows)
                    .map(|r| norm(h.fingerprints.row(r)))
                    .collect();
                if let Some(r) = fingerprint_norms.iter().position(|&n| n == 0.0) {
                    return Err(Error::DegenerateDirection(format!("fingerprint row {r} is zero")));
                }
                let mut cos = Matrix::zeros(latent.rows, h.fingerprints.rows);
                // A zero latent vector has no direction: it matches every
                // class with similarity 0 and passes no gradient back.
                for n in (0..latent.rows).filter(|&n| latent_norms[n] > 0.0) {
                    for k in 0..h.fingerprints.rows {
                        cos.data[n * cos.cols + k] = dot(latent.row(n), h.fingerprints.row(k))
                            / (latent_norms[n] * fingerprint_norms[k]);
                    }
                }
                let logits = Matrix {
                    rows: cos.rows,
                    cols: cos.cols,
                    data: cos.data.iter().map(|c| c * h.scale).collect(),
                };
                (
                    logits,
                    HeadCache::ZeroBias {
                        latent,
                        latent_norms,
                        fingerprint_norms,
                        cos,
                    },
                )
            }
        };
        inputs.push(current);
        Ok((logits, ForwardCache { inputs, pre, head }))
    }

    pub fn logits(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward(batch)?.0)
    }

    /// The vectors the head matches against fingerprints: the zero-bias
    /// latent `W0·x + b`, or for a dense head its input activations.
    pub fn latent(&self, batch: &Matrix) -> Result<Matrix> {
        let (_, cache) = self.forward(batch)?;
        Ok(match cache.head {
            HeadCache::ZeroBias { latent, .. } => latent,
            HeadCache::Dense => cache.inputs.last().cloned().expect("head input"),
        })
    }

    /// Gradient of `Σ dlogits ⊙ logits` with respect to every parameter, in
    /// layout order.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Matrix) -> Result<Vec<f64>> {
        let head_input = cache.head_input();
        if dlogits.rows != head_input.rows || dlogits.cols != self.n_classes() {
            return Err(Error::DimensionMismatch {
                expected: head_input.rows * self.n_classes(),
                actual: dlogits.rows * dlogits.cols,
            });
        }
        let mut head_grads: Vec<Vec<f64>> = Vec::new();
        let mut upstream = match (&self.head, &cache.head) {
            (Head::Dense(layer), HeadCache::Dense) => {
                let dw = dlogits.transposed_mul(head_input)?;
                head_grads.push(dw.data);
                head_grads.push(column_sums(dlogits));
                dlogits.mul(&layer.weights)?
            }
            (
                Head::ZeroBias(h),
                HeadCache::ZeroBias {
                    latent,
                    latent_norms,
                    fingerprint_norms,
                    cos,
                },
            ) => {
                let (d_latent, d_fp) =
                    zero_bias_backward(h, latent, latent_norms, fingerprint_norms, cos, dlogits);
                let d_embed = d_latent.transposed_mul(head_input)?;
                head_grads.push(d_embed.data);
                head_grads.push(column_sums(&d_latent));
                head_grads.push(d_fp.data);
                d_latent.mul(&h.embedding)?
            }
            _ => unreachable!("forward cache built by a different head"),
        };

        let mut hidden_grads: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(self.hidden.len());
        for (i, layer) in self.hidden.iter().enumerate().rev() {
            let mut dz = upstream;
            if layer.activation == Activation::Relu {
                for (g, z) in dz.data.iter_mut().zip(&cache.pre[i].data) {
                    if *z <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let dw = dz.transposed_mul(&cache.inputs[i])?;
            let db = column_sums(&dz);
            upstream = if i > 0 { dz.mul(&layer.weights)? } else { Matrix::zeros(0, 0) };
            hidden_grads.push((dw.data, db));
        }
        hidden_grads.reverse();

        let mut grad = Vec::with_capacity(self.param_count());
        for (dw, db) in hidden_grads {
            grad.extend(dw);
            grad.extend(db);
        }
        for g in head_grads {
            grad.extend(g);
        }
        Ok(grad)
    }

    /// Mean softmax cross-entropy plus `l2/2·‖θ‖²`, and its gradient.
    pub fn loss_and_gradient(&self, batch: &Matrix, labels: &[usize], l2: f64) -> Result<(f64, Vec<f64>, Matrix)> {
        let (logits, cache) = self.forward(batch)?;
        let (data_loss, dlogits) = cross_entropy(&logits, labels)?;
        let mut grad = self.backward(&cache, &dlogits)?;
        let mut loss = data_loss;
        if l2 > 0.0 {
            let params = self.params();
            loss += 0.5 * l2 * dot(&params, &params);
            axpy(l2, &params, &mut grad);
        }
        Ok((loss, grad, logits))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from_network(self, None))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_network()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        ModelFile::from_network(self, None).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ModelFile::load(path)?.into_network()
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols];
    for r in 0..m.rows {
        axpy(1.0, m.row(r), &mut out);
    }
    out
}

/// Backpropagates through `logit_k = s·cos(y, w_k)`:
/// `∂cos/∂y = (v_k − cos·u)/‖y‖` and `∂cos/∂w_k = (u − cos·v_k)/‖w_k‖`
/// with `u`, `v_k` the unit directions.
fn zero_bias_backward(
    head: &ZeroBiasHead,
    latent: &Matrix,
    latent_norms: &[f64],
    fingerprint_norms: &[f64],
    cos: &Matrix,
    dlogits: &Matrix,
) -> (Matrix, Matrix) {
    let classes = head.fingerprints.rows;
    let dim = head.fingerprints.cols;
    let mut d_latent = Matrix::zeros(latent.rows, dim);
    let mut d_fp = Matrix::zeros(classes, dim);
    for n in (0..latent.rows).filter(|&n| latent_norms[n] > 0.0) {
        let y = latent.row(n);
        let ny = latent_norms[n];
        let mut weighted_cos = 0.0;
        let out = d_latent.row_mut(n);
        for k in 0..classes {
            let g = head.scale * dlogits.get(n, k);
            if g == 0.0 {
                continue;
            }
            let c = cos.get(n, k);
            let nw = fingerprint_norms[k];
            axpy(g / (ny * nw), head.fingerprints.row(k), out);
            weighted_cos += g * c;
        }
        axpy(-weighted_cos / (ny * ny), y, out);
    }
    for k in 0..classes {
        let w = head.fingerprints.row(k).to_vec();
        let nw = fingerprint_norms[k];
        let out = d_fp.row_mut(k);
        let mut weighted_cos = 0.0;
        for n in (0..latent.rows).filter(|&n| latent_norms[n] > 0.0) {
            let g = head.scale * dlogits.get(n, k);
            if g == 0.0 {
                continue;
            }
            axpy(g / (latent_norms[n] * nw), latent.row(n), out);
            weighted_cos += g * cos.get(n, k);
        }
        axpy(-weighted_cos / (nw * nw), &w, out);
    }
    (d_latent, d_fp)
}

pub fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(logits.rows, logits.cols);
    for r in 0..logits.rows {
        out.row_mut(r).copy_from_slice(&softmax_row(logits.row(r)));
    }
    out
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy and its gradient with respect to the logits.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    if labels.len() != logits.rows {
        return Err(Error::DimensionMismatch {
            expected: logits.rows,
            actual: labels.len(),
        });
    }
    if logits.rows == 0 {
        return Err(Error::EmptySet("cross-entropy batch"));
    }
    let n = logits.rows as f64;
    let mut grad = Matrix::zeros(logits.rows, logits.cols);
    let mut loss = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= logits.cols {
            return Err(Error::InvalidArgument(format!(
                "label {label} outside [0, {})",
                logits.cols
            )));
        }
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_total = row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
        loss += log_total - row[label];
        let g = grad.row_mut(r);
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = (row[k] - log_total).exp() / n;
        }
        g[label] -= 1.0 / n;
    }
    Ok((loss / n, grad))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct LayerFile {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerFile {
    fn from_layer(l: &DenseLayer) -> Self {
        Self {
            inputs: l.inputs(),
            outputs: l.outputs(),
            activation: l.activation,
            weights: l.weights.data.clone(),
            bias: l.bias.clone(),
        }
    }

    fn into_layer(self) -> Result<DenseLayer> {
        if self.bias.len() != self.outputs {
            return Err(Error::DimensionMismatch {
                expected: self.outputs,
                actual: self.bias.len(),
            });
        }
        Ok(DenseLayer {
            weights: Matrix::from_vec(self.outputs, self.inputs, self.weights)?,
            bias: self.bias,
            activation: self.activation,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub(crate) enum HeadFile {
    Dense(LayerFile),
    ZeroBias {
        inputs: usize,
        latent_dim: usize,
        n_classes: usize,
        scale: f64,
        embedding: Vec<f64>,
        bias: Vec<f64>,
        fingerprints: Vec<f64>,
    },
}

/// Optional EWC state carried alongside a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSection {
    pub omega_star: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher: Option<Vec<f64>>,
}

/// On-disk model document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub input_dim: usize,
    pub n_classes: usize,
    pub head_type: HeadKind,
    layers: Vec<LayerFile>,
    head: HeadFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<SnapshotSection>,
}

impl ModelFile {
    pub fn from_network(net: &Network, snapshot: Option<SnapshotSection>) -> Self {
        let head = match &net.head {
            Head::Dense(l) => HeadFile::Dense(LayerFile::from_layer(l)),
            Head::ZeroBias(h) => HeadFile::ZeroBias {
                inputs: h.inputs(),
                latent_dim: h.latent_dim(),
                n_classes: h.n_classes(),
                scale: h.scale,
                embedding: h.embedding.data.clone(),
                bias: h.bias.clone(),
                fingerprints: h.fingerprints.data.clone(),
            },
        };
        Self {
            format_version: MODEL_FORMAT_VERSION,
            input_dim: net.input_dim(),
            n_classes: net.n_classes(),
            head_type: net.head_kind(),
            layers: net.hidden.iter().map(LayerFile::from_layer).collect(),
            head,
            snapshot,
        }
    }

    pub fn into_network(self) -> Result<Network> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::FormatVersion(self.format_version));
        }
        let hidden = self
            .layers
            .into_iter()
            .map(LayerFile::into_layer)
            .collect::<Result<Vec<_>>>()?;
        let head = match self.head {
            HeadFile::Dense(l) => Head::Dense(l.into_layer()?),
            HeadFile::ZeroBias {
                inputs,
                latent_dim,
                n_classes,
                scale,
                embedding,
                bias,
                fingerprints,
            } => Head::ZeroBias(ZeroBiasHead {
                embedding: Matrix::from_vec(latent_dim, inputs, embedding)?,
                bias,
                fingerprints: Matrix::from_vec(n_classes, latent_dim, fingerprints)?,
                scale,
            }),
        };
        if head.kind() != self.head_type {
            return Err(Error::parse("model", "head_type does not match head section"));
        }
        let net = Network { hidden, head };
        net.validate()?;
        if net.input_dim() != self.input_dim || net.n_classes() != self.n_classes {
            return Err(Error::parse("model", "declared dimensions do not match layers"));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
