//! Binary abnormality detection from a trained zero-bias network.
//!
//! For every known class the profile keeps the centroid of the latent
//! vectors of correctly classified training records and the largest cosine
//! distance from that centroid to any of them. An input is known when it
//! falls inside at least one class's cut-off.
//!
//! Output polarity: `1` is an abnormality alarm and `0` means known, so a
//! stream of outputs is Bernoulli(fpr) under normal traffic and
//! Bernoulli(tpr) under abnormal traffic.

use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::nn::{argmax, batch_matrix, norm, softmax_row, Network};
use crate::signal::RecordView;
use crate::zerobias::cosine_distance;

const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    /// Class index of each entry, `0..n_classes`.
    pub classes: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Cosine distances in [0, 2].
    pub cutoffs: Vec<f64>,
    /// Quantile of the training distances used as cut-off (1.0 = maximum).
    pub quantile: f64,
}

impl CutoffProfile {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centroids.len() != self.classes.len() || self.cutoffs.len() != self.classes.len() {
            return Err(Error::InvalidArgument(
                "profile needs one centroid and one cut-off per class".into(),
            ));
        }
        for (k, (c, &co)) in self.centroids.iter().zip(&self.cutoffs).enumerate() {
            if !(0.0..=2.0).contains(&co) {
                return Err(Error::InvalidArgument(format!("cut-off {co} of class {k} outside [0, 2]")));
            }
            if norm(c) == 0.0 || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::DegenerateDirection(format!("centroid of class {k}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Latent vectors and predicted classes for a set of records.
fn latent_and_predictions(net: &Network, records: &[RecordView<'_>]) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut latents = Vec::with_capacity(records.len());
    let mut predicted = Vec::with_capacity(records.len());
    let idx: Vec<usize> = (0..records.len()).collect();
    for chunk in idx.chunks(CHUNK) {
        let (logits, cache) = net.forward(&batch_matrix(records, chunk)?)?;
        let latent = cache
            .latent()
            .ok_or_else(|| Error::HeadMismatch("detector requires a zero-bias head".into()))?;
        for r in 0..logits.rows {
            latents.push(latent.row(r).to_vec());
            predicted.push(argmax(logits.row(r)));
        }
    }
    Ok((latents, predicted))
}

/// Nearest-rank quantile of unsorted values; `q = 1` is the maximum.
fn nearest_rank(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    values[rank - 1]
}

/// Cut-off profile from the training split. Only records the network
/// classifies correctly contribute.
pub fn build_profile(net: &Network, train_set: &[RecordView<'_>], quantile: f64) -> Result<CutoffProfile> {
    if net.zero_bias_head().is_none() {
        return Err(Error::HeadMismatch("detector requires a zero-bias head".into()));
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::InvalidArgument(format!("quantile must lie in (0, 1], got {quantile}")));
    }
    let n_classes = net.n_classes();
    if let Some(r) = train_set.iter().find(|r| r.label >= n_classes) {
        return Err(Error::InvalidArgument(format!(
            "label {} outside [0, {n_classes})",
            r.label
        )));
    }
    let (latents, predicted) = latent_and_predictions(net, train_set)?;

    let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); n_classes];
    for ((record, latent), &p) in train_set.iter().zip(&latents).zip(&predicted) {
        if p == record.label {
            members[record.label].push(latent);
        }
    }

    let mut centroids = Vec::with_capacity(n_classes);
    let mut cutoffs = Vec::with_capacity(n_classes);
    for (class, vectors) in members.iter().enumerate() {
        if vectors.is_empty() {
            return Err(Error::EmptyClass(class));
        }
        let dim = vectors[0].len();
        let mut centroid = vec![0.0; dim];
        for v in vectors {
            for (c, x) in centroid.iter_mut().zip(v.iter()) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= vectors.len() as f64);
        if norm(&centroid) == 0.0 {
            return Err(Error::DegenerateDirection(format!("centroid of class {class} is zero")));
        }
        let mut distances = vectors
            .iter()
            .map(|v| cosine_distance(v, &centroid))
            .collect::<Result<Vec<f64>>>()?;
        cutoffs.push(nearest_rank(&mut distances, quantile));
        centroids.push(centroid);
    }
    Ok(CutoffProfile {
        classes: (0..n_classes).collect(),
        centroids,
        cutoffs,
        quantile,
    })
}

/// Anything producing one alarm bit per record.
pub trait AbnormalityDetector {
    fn alarms(&self, records: &[RecordView<'_>]) -> Result<Vec<u8>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDetector {
    network: Network,
    profile: CutoffProfile,
}

impl BinaryDetector {
    pub fn new(network: Network, profile: CutoffProfile) -> Result<Self> {
        let head = network
            .zero_bias_head()
            .ok_or_else(|| Error::HeadMismatch("detector requires a zero-bias head".into()))?;
        profile.validate()?;
        if profile.classes != (0..network.n_classes()).collect::<Vec<_>>() {
            return Err(Error::InvalidArgument(format!(
                "profile classes {:?} do not match the network's {} classes",
                profile.classes,
                network.n_classes()
            )));
        }
        if let Some(c) = profile.centroids.iter().find(|c| c.len() != head.latent_dim()) {
            return Err(Error::DimensionMismatch {
                expected: head.latent_dim(),
                actual: c.len(),
            });
        }
        Ok(Self { network, profile })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn profile(&self) -> &CutoffProfile {
        &self.profile
    }

    /// Alarm bit for a latent vector.
    pub fn detect_latent(&self, y1: &[f64]) -> Result<u8> {
        if norm(y1) == 0.0 {
            return Err(Error::DegenerateDirection("latent vector is zero".into()));
        }
        for (centroid, &cutoff) in self.profile.centroids.iter().zip(&self.profile.cutoffs) {
            if cosine_distance(y1, centroid)? <= cutoff {
                return Ok(0);
            }
        }
        Ok(1)
    }

    pub fn detect(&self, x: &[f64]) -> Result<u8> {
        let records = [RecordView { features: x, label: 0 }];
        let latent = self.network.latent(&batch_matrix(&records, &[0])?)?;
        self.detect_latent(latent.row(0))
    }
}

impl AbnormalityDetector for BinaryDetector {
    fn alarms(&self, records: &[RecordView<'_>]) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(records.len());
        let idx: Vec<usize> = (0..records.len()).collect();
        for chunk in idx.chunks(CHUNK) {
            let latent = self.network.latent(&batch_matrix(records, chunk)?)?;
            for r in 0..latent.rows {
                out.push(self.detect_latent(latent.row(r))?);
            }
        }
        Ok(out)
    }
}

/// Baseline for a regular head: alarm when the top softmax probability is
/// below a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxScoreDetector {
    network: Network,
    pub threshold: f64,
}

pub fn max_scores(net: &Network, records: &[RecordView<'_>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(records.len());
    let idx: Vec<usize> = (0..records.len()).collect();
    for chunk in idx.chunks(CHUNK) {
        let logits = net.logits(&batch_matrix(records, chunk)?)?;
        for r in 0..logits.rows {
            out.push(softmax_row(logits.row(r)).into_iter().fold(0.0, f64::max));
        }
    }
    Ok(out)
}

/// Threshold with the widest separation between the two score populations:
/// it maximizes `TPR − FPR` for the rule `alarm ⇔ score < threshold`. Ties
/// keep the lowest threshold.
pub fn max_margin_threshold(known: &[f64], abnormal: &[f64]) -> Result<f64> {
    if known.is_empty() {
        return Err(Error::EmptySet("known scores"));
    }
    if abnormal.is_empty() {
        return Err(Error::EmptySet("abnormal scores"));
    }
    let mut all: Vec<f64> = known.iter().chain(abnormal).copied().collect();
    all.sort_by(|a, b| a.total_cmp(b));
    all.dedup();
    let mut candidates = vec![all[0]];
    candidates.extend(all.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(all[all.len() - 1] + 1e-12);

    let mut known_sorted = known.to_vec();
    known_sorted.sort_by(|a, b| a.total_cmp(b));
    let mut abnormal_sorted = abnormal.to_vec();
    abnormal_sorted.sort_by(|a, b| a.total_cmp(b));
    let below = |sorted: &[f64], t: f64| sorted.partition_point(|&s| s < t) as f64 / sorted.len() as f64;

    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for &t in &candidates {
        let j = below(&abnormal_sorted, t) - below(&known_sorted, t);
        if j > best.0 {
            best = (j, t);
        }
    }
    Ok(best.1)
}

impl MaxScoreDetector {
    pub fn new(network: Network, threshold: f64) -> Self {
        Self { network, threshold }
    }

    /// Fits the threshold by [`max_margin_threshold`] on calibration data.
    pub fn fit(network: Network, known: &[RecordView<'_>], abnormal: &[RecordView<'_>]) -> Result<Self> {
        let threshold = max_margin_threshold(&max_scores(&network, known)?, &max_scores(&network, abnormal)?)?;
        Ok(Self { network, threshold })
    }
}

impl AbnormalityDetector for MaxScoreDetector {
    fn alarms(&self, records: &[RecordView<'_>]) -> Result<Vec<u8>> {
        Ok(max_scores(&self.network, records)?
            .into_iter()
            .map(|s| u8::from(s < self.threshold))
            .collect())
    }
}

/// Output model of a binary detector: alarms are Bernoulli(fpr) under
/// normal traffic and Bernoulli(tpr) under abnormal traffic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BernoulliModel {
    pub fpr: f64,
    pub tpr: f64,
}

impl BernoulliModel {
    pub fn new(fpr: f64, tpr: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fpr) || !(0.0..=1.0).contains(&tpr) {
            return Err(Error::InvalidArgument(format!(
                "rates must lie in [0, 1], got fpr={fpr} tpr={tpr}"
            )));
        }
        Ok(Self { fpr, tpr })
    }

    /// `tpr / fpr`.
    pub fn quality(&self) -> f64 {
        self.tpr / self.fpr
    }

    pub fn fnr(&self) -> f64 {
        1.0 - self.tpr
    }

    /// A detector is useful for sequential detection only if alarms are
    /// more likely under the abnormal state.
    pub fn is_usable(&self) -> bool {
        0.0 <= self.fpr && self.fpr < self.tpr && self.tpr <= 1.0
    }
}

/// Linear predictors of the converted detector's rates from the network's
/// training accuracy: `fpr = 1 − acc`, `tpr = 0.2 + 0.77·acc`.
pub fn predict_rates_from_accuracy(acc: f64) -> Result<BernoulliModel> {
    if !(0.0..=1.0).contains(&acc) {
        return Err(Error::InvalidArgument(format!("accuracy must lie in [0, 1], got {acc}")));
    }
    BernoulliModel::new(1.0 - acc, (0.2 + 0.77 * acc).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub fpr: f64,
    pub tpr: f64,
    pub fnr: f64,
    pub n_normal: usize,
    pub n_abnormal: usize,
}

impl RateEstimate {
    pub fn model(&self) -> BernoulliModel {
        BernoulliModel {
            fpr: self.fpr,
            tpr: self.tpr,
        }
    }
}

pub fn estimate_rates(
    detector: &dyn AbnormalityDetector,
    normal: &[RecordView<'_>],
    abnormal: &[RecordView<'_>],
) -> Result<RateEstimate> {
    if normal.is_empty() {
        return Err(Error::EmptySet("normal set"));
    }
    if abnormal.is_empty() {
        return Err(Error::EmptySet("abnormal set"));
    }
    let rate = |bits: Vec<u8>| bits.iter().map(|&b| b as usize).sum::<usize>() as f64 / bits.len() as f64;
    let fpr = rate(detector.alarms(normal)?);
    let tpr = rate(detector.alarms(abnormal)?);
    Ok(RateEstimate {
        fpr,
        tpr,
        fnr: 1.0 - tpr,
        n_normal: normal.len(),
        n_abnormal: abnormal.len(),
    })
}

/// Equal-tailed interval `[lo, hi]` holding at least `confidence` of the
/// Binomial(n, p) mass.
pub fn binomial_interval(n: u64, p: f64, confidence: f64) -> Result<(u64, u64)> {
    if !(0.0..=1.0).contains(&p) || !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need p in [0, 1] and confidence in (0, 1), got p={p} confidence={confidence}"
        )));
    }
    let dist = Binomial::new(p, n).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let tail = (1.0 - confidence) / 2.0;
    // smallest k with P(X <= k) >= target
    let quantile = |target: f64| {
        let (mut lo, mut hi) = (0u64, n);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if dist.cdf(mid) >= target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    };
    Ok((quantile(tail), quantile(1.0 - tail)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Head, Matrix};
    use crate::zerobias::ZeroBiasHead;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Identity-embedding zero-bias net: the latent vector is the input.
    fn identity_net(fingerprints: Vec<Vec<f64>>) -> Network {
        let dim = fingerprints[0].len();
        Network {
            hidden: vec![],
            head: Head::ZeroBias(ZeroBiasHead {
                embedding: Matrix::identity(dim),
                bias: vec![0.0; dim],
                fingerprints: Matrix::from_rows(&fingerprints).unwrap(),
                scale: ZeroBiasHead::DEFAULT_SCALE,
            }),
        }
    }

    fn views<'a>(xs: &'a [Vec<f64>], ys: &[usize]) -> Vec<RecordView<'a>> {
        xs.iter()
            .zip(ys)
            .map(|(x, &label)| RecordView { features: x, label })
            .collect()
    }

    fn axes3() -> Network {
        identity_net(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]])
    }

    #[test]
    fn single_record_class_has_zero_cutoff() {
        let net = axes3();
        let xs = vec![vec![2.0, 0.1, 0.0], vec![0.1, 1.0, 0.0], vec![0.0, 0.2, 3.0]];
        let profile = build_profile(&net, &views(&xs, &[0, 1, 2]), 1.0).unwrap();
        for (c, x) in profile.centroids.iter().zip(&xs) {
            assert_eq!(c, x);
        }
        assert!(profile.cutoffs.iter().all(|&c| c.abs() < 1e-15));
    }

    #[test]
    fn colinear_class_has_zero_cutoff() {
        let net = axes3();
        let xs = vec![
            vec![1.0, 0.2, 0.1],
            vec![3.0, 0.6, 0.3],
            vec![0.5, 0.1, 0.05],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let profile = build_profile(&net, &views(&xs, &[0, 0, 0, 1, 2]), 1.0).unwrap();
        assert!(profile.cutoffs[0] < 1e-12);
    }

    #[test]
    fn cutoff_matches_exhaustive_oracle() {
        let net = axes3();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..90 {
            let c = i % 3;
            let mut v: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..0.4)).collect();
            v[c] += 1.0;
            xs.push(v);
            ys.push(c);
        }
        // one deliberately misclassified record for class 0
        xs.push(vec![0.1, 0.9, 0.0]);
        ys.push(0);
        let records = views(&xs, &ys);
        let profile = build_profile(&net, &records, 1.0).unwrap();
        for class in 0..3 {
            let members: Vec<&Vec<f64>> = xs
                .iter()
                .zip(&ys)
                .filter(|(x, &y)| y == class && argmax(x) == class)
                .map(|(x, _)| x)
                .collect();
            let mean: Vec<f64> = (0..3)
                .map(|d| members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64)
                .collect();
            let dist = |a: &[f64], b: &[f64]| {
                let dot: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
                let na: f64 = a.iter().map(|p| p * p).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|p| p * p).sum::<f64>().sqrt();
                1.0 - dot / (na * nb)
            };
            let oracle = members.iter().map(|m| dist(m, &mean)).fold(0.0, f64::max);
            assert!((profile.cutoffs[class] - oracle).abs() < 1e-12);
            for (a, b) in profile.centroids[class].iter().zip(&mean) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_class_is_an_error() {
        let net = axes3();
        let xs = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        assert!(matches!(
            build_profile(&net, &views(&xs, &[0, 1]), 1.0),
            Err(Error::EmptyClass(2))
        ));
    }

    #[test]
    fn regular_head_is_rejected() {
        let net = Network::new_dense(3, &[], 3, 0);
        let xs = vec![vec![1.0, 0.0, 0.0]];
        assert!(matches!(build_profile(&net, &views(&xs, &[0]), 1.0), Err(Error::HeadMismatch(_))));
    }

    fn random_profile_setup(seed: u64) -> (Network, Vec<Vec<f64>>, Vec<usize>) {
        let net = axes3();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..60 {
            let c = i % 3;
            let mut v: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.3..0.3)).collect();
            v[c] += 1.0;
            xs.push(v);
            ys.push(c);
        }
        (net, xs, ys)
    }

    #[test]
    fn training_records_are_inside_their_cutoff() {
        let (net, xs, ys) = random_profile_setup(5);
        let records = views(&xs, &ys);
        let profile = build_profile(&net, &records, 1.0).unwrap();
        let detector = BinaryDetector::new(net, profile).unwrap();
        for r in &records {
            if argmax(r.features) == r.label {
                assert_eq!(detector.detect(r.features).unwrap(), 0);
            }
        }
    }

    #[test]
    fn antipodal_input_alarms() {
        let (net, xs, ys) = random_profile_setup(6);
        let profile = build_profile(&net, &views(&xs, &ys), 1.0).unwrap();
        assert!(profile.cutoffs.iter().all(|&c| c < 2.0));
        let detector = BinaryDetector::new(net, profile.clone()).unwrap();
        // a direction opposite to the mean of all centroids
        let mut opposite = vec![0.0; 3];
        for c in &profile.centroids {
            for (o, v) in opposite.iter_mut().zip(c) {
                *o -= v;
            }
        }
        assert_eq!(detector.detect_latent(&opposite).unwrap(), 1);
        assert!(detector.detect_latent(&[0.0; 3]).is_err());
    }

    #[test]
    fn stream_matches_brute_force() {
        let (net, xs, ys) = random_profile_setup(7);
        let profile = build_profile(&net, &views(&xs, &ys), 1.0).unwrap();
        let detector = BinaryDetector::new(net, profile.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let stream: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels = vec![0; stream.len()];
        let bits = detector.alarms(&views(&stream, &labels)).unwrap();
        for (x, bit) in stream.iter().zip(bits) {
            let known = profile.centroids.iter().zip(&profile.cutoffs).any(|(c, &co)| {
                let dot: f64 = x.iter().zip(c).map(|(p, q)| p * q).sum();
                let nx: f64 = x.iter().map(|p| p * p).sum::<f64>().sqrt();
                let nc: f64 = c.iter().map(|p| p * p).sum::<f64>().sqrt();
                1.0 - dot / (nx * nc) <= co
            });
            assert_eq!(bit, u8::from(!known));
        }
    }

    #[test]
    fn shrinking_cutoffs_never_removes_alarms() {
        let (net, xs, ys) = random_profile_setup(9);
        let profile = build_profile(&net, &views(&xs, &ys), 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let stream: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels = vec![0; stream.len()];
        let wide = BinaryDetector::new(net.clone(), profile.clone()).unwrap();
        let mut narrow_profile = profile;
        narrow_profile.cutoffs[1] *= 0.5;
        let narrow = BinaryDetector::new(net, narrow_profile).unwrap();
        let a = wide.alarms(&views(&stream, &labels)).unwrap();
        let b = narrow.alarms(&views(&stream, &labels)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(y >= x);
        }
    }

    #[test]
    fn quantile_shrinks_cutoffs() {
        let (net, xs, ys) = random_profile_setup(11);
        let full = build_profile(&net, &views(&xs, &ys), 1.0).unwrap();
        let q = build_profile(&net, &views(&xs, &ys), 0.5).unwrap();
        for (a, b) in full.cutoffs.iter().zip(&q.cutoffs) {
            assert!(b <= a);
        }
        assert!(build_profile(&net, &views(&xs, &ys), 0.0).is_err());
    }

    struct Always(u8);
    impl AbnormalityDetector for Always {
        fn alarms(&self, records: &[RecordView<'_>]) -> Result<Vec<u8>> {
            Ok(vec![self.0; records.len()])
        }
    }

    #[test]
    fn rate_estimation() {
        let xs = vec![vec![0.0]; 4];
        let r = views(&xs, &[0, 0, 0, 0]);
        let est = estimate_rates(&Always(1), &r, &r).unwrap();
        assert_eq!((est.fpr, est.tpr, est.fnr), (1.0, 1.0, 0.0));
        assert!(estimate_rates(&Always(1), &[], &r).is_err());
        assert!(estimate_rates(&Always(1), &r, &[]).is_err());

        let (net, xs, ys) = random_profile_setup(12);
        let records = views(&xs, &ys);
        let profile = build_profile(&net, &records, 1.0).unwrap();
        let detector = BinaryDetector::new(net, profile).unwrap();
        let correct: Vec<RecordView> = records
            .iter()
            .copied()
            .filter(|r| argmax(r.features) == r.label)
            .collect();
        let est = estimate_rates(&detector, &correct, &correct).unwrap();
        assert_eq!(est.fpr, 0.0);
    }

    #[test]
    fn rate_predictor_values() {
        let m = predict_rates_from_accuracy(1.0).unwrap();
        assert_eq!(m.fpr, 0.0);
        assert!((m.tpr - 0.97).abs() < 1e-12);
        let m = predict_rates_from_accuracy(0.0).unwrap();
        assert_eq!((m.fpr, m.tpr), (1.0, 0.2));
        let m = predict_rates_from_accuracy(0.9).unwrap();
        assert!((m.fpr - 0.1).abs() < 1e-12);
        assert!((m.tpr - 0.893).abs() < 1e-12);
        assert!(predict_rates_from_accuracy(1.1).is_err());
    }

    #[test]
    fn bernoulli_model_quality() {
        let m = BernoulliModel::new(0.4, 0.9).unwrap();
        assert!((m.quality() - 2.25).abs() < 1e-12);
        assert!(m.is_usable());
        assert!(!BernoulliModel::new(0.5, 0.5).unwrap().is_usable());
        assert!(BernoulliModel::new(-0.1, 0.5).is_err());
    }

    #[test]
    fn max_margin_separates_disjoint_scores() {
        let known = [0.9, 0.95, 0.99, 0.97];
        let abnormal = [0.4, 0.5, 0.6];
        let t = max_margin_threshold(&known, &abnormal).unwrap();
        assert!(t > 0.6 && t < 0.9);
        assert!(max_margin_threshold(&[], &abnormal).is_err());
    }

    #[test]
    fn binomial_interval_brackets_mean() {
        let (lo, hi) = binomial_interval(5000, 0.05, 0.99).unwrap();
        assert!(lo < 250 && hi > 250);
        // normal approximation: 250 ± 2.576·sqrt(237.5) ≈ [210, 290]
        assert!((lo as i64 - 210).abs() <= 3, "{lo}");
        assert!((hi as i64 - 290).abs() <= 3, "{hi}");
        assert_eq!(binomial_interval(100, 0.0, 0.99).unwrap(), (0, 0));
    }

    #[test]
    fn profile_json_round_trip() {
        let (net, xs, ys) = random_profile_setup(13);
        let profile = build_profile(&net, &views(&xs, &ys), 1.0).unwrap();
        let back = CutoffProfile::from_json(&profile.to_json().unwrap()).unwrap();
        assert_eq!(back, profile);
    }
}
