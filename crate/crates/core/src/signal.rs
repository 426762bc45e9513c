//! Synthetic RF emitter bursts and their 32×32×3 feature tensors.
//!
//! Each emitter is a set of transmitter impairments (carrier frequency
//! offset, I/Q gain and phase imbalance, phase noise, amplitude) applied to a
//! pseudo-random BPSK payload. Bursts are 1024 complex samples; the features
//! are three 1024-long channels reshaped to 32×32 and stored channel-last.
//!
//! The "pseudo-noise" channel is a stand-in: the residual of the sample
//! magnitudes after subtracting a trailing 8-sample moving average.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BURST_LEN: usize = 1024;
pub const GRID: usize = 32;
pub const CHANNELS: usize = 3;
pub const FEATURE_LEN: usize = GRID * GRID * CHANNELS;

pub const SAMPLES_PER_SYMBOL: usize = 8;
pub const SMOOTHING_WINDOW: usize = 8;
pub const MIN_SNR_DB: f64 = -20.0;
pub const MAX_SNR_DB: f64 = 60.0;

/// Fixed synchronisation header prepended to every payload.
const PREAMBLE: [f64; 16] = [
    1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0, -1.0,
];

/// Minimum carrier-offset spacing enforced between known emitters, shrunk
/// when many known emitters must share the offset range.
const KNOWN_CFO_GAP: f64 = 0.004;
const CFO_RANGE: f64 = 0.03;

fn known_cfo_gap(n_known: usize) -> f64 {
    KNOWN_CFO_GAP.min(CFO_RANGE / n_known.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitterProfile {
    pub emitter_id: usize,
    /// Carrier frequency offset as a fraction of the sample rate.
    pub cfo: f64,
    pub iq_gain_imbalance: f64,
    /// Quadrature skew in radians.
    pub iq_phase_imbalance: f64,
    /// Standard deviation of the per-sample phase random walk, radians.
    pub phase_noise_std: f64,
    /// Linear amplitude scale.
    pub power: f64,
}

impl EmitterProfile {
    /// A profile with every impairment disabled.
    pub fn ideal(emitter_id: usize) -> Self {
        Self {
            emitter_id,
            cfo: 0.0,
            iq_gain_imbalance: 1.0,
            iq_phase_imbalance: 0.0,
            phase_noise_std: 0.0,
            power: 1.0,
        }
    }

    pub fn random<R: Rng + ?Sized>(emitter_id: usize, rng: &mut R) -> Self {
        Self {
            emitter_id,
            cfo: rng.gen_range(-CFO_RANGE..CFO_RANGE),
            iq_gain_imbalance: rng.gen_range(0.85..1.15),
            iq_phase_imbalance: rng.gen_range(-0.15..0.15),
            phase_noise_std: rng.gen_range(0.0..0.005),
            power: rng.gen_range(0.5..2.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.cfo,
            self.iq_gain_imbalance,
            self.iq_phase_imbalance,
            self.phase_noise_std,
            self.power,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(format!(
                "emitter {} has non-finite impairments",
                self.emitter_id
            )));
        }
        if self.iq_gain_imbalance <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "iq_gain_imbalance must be > 0, got {}",
                self.iq_gain_imbalance
            )));
        }
        if self.phase_noise_std < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "phase_noise_std must be >= 0, got {}",
                self.phase_noise_std
            )));
        }
        if self.power <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "power must be > 0, got {}",
                self.power
            )));
        }
        Ok(())
    }

    fn same_impairments(&self, other: &Self) -> bool {
        self.cfo == other.cfo
            && self.iq_gain_imbalance == other.iq_gain_imbalance
            && self.iq_phase_imbalance == other.iq_phase_imbalance
            && self.phase_noise_std == other.phase_noise_std
            && self.power == other.power
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Burst {
    pub samples: Vec<Complex64>,
    pub emitter_id: usize,
    /// `f64::INFINITY` when the noise path was disabled.
    pub snr_db: f64,
}

/// Clean baseband payload: the fixed preamble followed by pseudo-random
/// antipodal symbols, rectangular pulses of [`SAMPLES_PER_SYMBOL`] samples.
pub fn payload_waveform(payload_seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(payload_seed);
    rng.set_stream(0);
    let n_symbols = BURST_LEN / SAMPLES_PER_SYMBOL;
    let mut out = Vec::with_capacity(BURST_LEN);
    for k in 0..n_symbols {
        let symbol = if k < PREAMBLE.len() {
            PREAMBLE[k]
        } else if rng.gen::<bool>() {
            1.0
        } else {
            -1.0
        };
        out.extend(std::iter::repeat(symbol).take(SAMPLES_PER_SYMBOL));
    }
    out
}

/// Synthesizes one burst. `snr_db = f64::INFINITY` disables the noise path.
pub fn synth_burst(profile: &EmitterProfile, payload_seed: u64, snr_db: f64) -> Result<Burst> {
    profile.validate()?;
    let noiseless = snr_db == f64::INFINITY;
    if !noiseless && !(MIN_SNR_DB..=MAX_SNR_DB).contains(&snr_db) {
        return Err(Error::InvalidArgument(format!(
            "snr_db {snr_db} outside [{MIN_SNR_DB}, {MAX_SNR_DB}]"
        )));
    }

    let payload = payload_waveform(payload_seed);

    let mut phase = vec![0.0; BURST_LEN];
    if profile.phase_noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(payload_seed);
        rng.set_stream(1);
        let step = Normal::new(0.0, profile.phase_noise_std)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut acc = 0.0;
        for p in phase.iter_mut().skip(1) {
            acc += step.sample(&mut rng);
            *p = acc;
        }
    }

    let (sin_skew, cos_skew) = profile.iq_phase_imbalance.sin_cos();
    let mut samples: Vec<Complex64> = payload
        .iter()
        .zip(&phase)
        .enumerate()
        .map(|(n, (&p, &theta))| {
            let angle = 2.0 * std::f64::consts::PI * profile.cfo * n as f64 + theta;
            let z = Complex64::from_polar(1.0, angle) * p;
            let i = z.re;
            let q = profile.iq_gain_imbalance * (z.im * cos_skew - z.re * sin_skew);
            Complex64::new(i, q) * profile.power
        })
        .collect();

    if !noiseless {
        let signal_power =
            samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64;
        let noise_power = signal_power / 10f64.powf(snr_db / 10.0);
        let component = Normal::new(0.0, (noise_power / 2.0).sqrt())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(payload_seed);
        rng.set_stream(2);
        for s in samples.iter_mut() {
            let re = component.sample(&mut rng);
            let im = component.sample(&mut rng);
            *s += Complex64::new(re, im);
        }
    }

    Ok(Burst {
        samples,
        emitter_id: profile.emitter_id,
        snr_db,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    /// 32×32×3 values, channel-last: index `(row * 32 + col) * 3 + channel`.
    pub data: Vec<f64>,
    pub emitter_id: usize,
}

impl FeatureTensor {
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * GRID + col) * CHANNELS + channel]
    }

    /// One channel in sequence order (length 1024).
    pub fn channel(&self, channel: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(channel)
            .step_by(CHANNELS)
            .copied()
            .collect()
    }
}

/// The three feature channels before normalization, each in sequence order.
pub fn raw_channels(burst: &Burst) -> Result<[Vec<f64>; 3]> {
    if burst.samples.len() != BURST_LEN {
        return Err(Error::DimensionMismatch {
            expected: BURST_LEN,
            actual: burst.samples.len(),
        });
    }
    if burst.samples.iter().all(|s| s.re == 0.0 && s.im == 0.0) {
        return Err(Error::DegenerateBurst);
    }

    let magnitude: Vec<f64> = burst.samples.iter().map(|s| s.norm()).collect();
    let mut residual = Vec::with_capacity(BURST_LEN);
    let mut window_sum = 0.0;
    for k in 0..BURST_LEN {
        window_sum += magnitude[k];
        if k >= SMOOTHING_WINDOW {
            window_sum -= magnitude[k - SMOOTHING_WINDOW];
        }
        let width = (k + 1).min(SMOOTHING_WINDOW);
        residual.push(magnitude[k] - window_sum / width as f64);
    }

    let mut spectrum = burst.samples.clone();
    FftPlanner::new()
        .plan_fft_forward(BURST_LEN)
        .process(&mut spectrum);
    let spectral_magnitude: Vec<f64> = spectrum.iter().map(|s| s.norm()).collect();
    let phase = unwrap_phase(&spectrum.iter().map(|s| s.arg()).collect::<Vec<_>>());

    Ok([residual, spectral_magnitude, phase])
}

/// Removes 2π jumps between consecutive phase values.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    use std::f64::consts::PI;
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    for (k, &p) in phase.iter().enumerate() {
        if k > 0 {
            let delta = p - phase[k - 1];
            if delta > PI {
                offset -= 2.0 * PI * ((delta + PI) / (2.0 * PI)).floor();
            } else if delta < -PI {
                offset += 2.0 * PI * ((-delta + PI) / (2.0 * PI)).floor();
            }
        }
        out.push(p + offset);
    }
    out
}

fn z_normalize(values: &mut [f64], reference_scale: f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    // Rounding residue of an otherwise constant channel is not signal.
    if std <= 1e-12 * reference_scale.max(f64::MIN_POSITIVE) {
        values.iter_mut().for_each(|v| *v = 0.0);
    } else {
        values.iter_mut().for_each(|v| *v = (*v - mean) / std);
    }
}

pub fn extract_features(burst: &Burst) -> Result<FeatureTensor> {
    let channels = raw_channels(burst)?;
    let mean_magnitude =
        burst.samples.iter().map(|s| s.norm()).sum::<f64>() / BURST_LEN as f64;
    let mut data = vec![0.0; FEATURE_LEN];
    for (c, mut values) in channels.into_iter().enumerate() {
        let scale = match c {
            0 => mean_magnitude,
            _ => values.iter().map(|v| v.abs()).fold(0.0, f64::max),
        };
        z_normalize(&mut values, scale);
        for (k, v) in values.into_iter().enumerate() {
            data[k * CHANNELS + c] = v;
        }
    }
    Ok(FeatureTensor {
        data,
        emitter_id: burst.emitter_id,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    Abnormal,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Abnormal => "abnormal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "abnormal" => Ok(Split::Abnormal),
            other => Err(Error::parse("dataset split", format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub n_known: usize,
    pub n_abnormal: usize,
    pub bursts_per_emitter: usize,
    pub snr_db: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            n_known: 8,
            n_abnormal: 10,
            bursts_per_emitter: 200,
            snr_db: 25.0,
            train_fraction: 0.6,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<FeatureTensor>,
    pub split: Vec<Split>,
    pub known_classes: BTreeSet<usize>,
    pub abnormal_classes: BTreeSet<usize>,
    /// Generating profiles, indexed by emitter id. Empty for imported data.
    pub profiles: Vec<EmitterProfile>,
    pub snr_db: f64,
}

/// Labeled records borrowed from a dataset.
#[derive(Debug, Clone, Copy)]
pub struct RecordView<'a> {
    pub features: &'a [f64],
    pub label: usize,
}

pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a simple combination
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_profiles(n_known: usize, n_abnormal: usize, seed: u64) -> Vec<EmitterProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = known_cfo_gap(n_known);
    let mut profiles: Vec<EmitterProfile> = Vec::with_capacity(n_known + n_abnormal);
    for id in 0..n_known + n_abnormal {
        let mut candidate = EmitterProfile::random(id, &mut rng);
        for _ in 0..1000 {
            let clash = profiles.iter().any(|p| {
                p.same_impairments(&candidate)
                    || (id < n_known && (p.cfo - candidate.cfo).abs() < gap)
            });
            if !clash {
                break;
            }
            candidate = EmitterProfile::random(id, &mut rng);
        }
        profiles.push(candidate);
    }
    profiles
}

/// Features for `count` bursts of one emitter. Burst `k` uses the payload
/// seed derived from `(seed, emitter_id, first_index + k)`.
pub fn emitter_records(
    profile: &EmitterProfile,
    first_index: usize,
    count: usize,
    snr_db: f64,
    seed: u64,
) -> Result<Vec<FeatureTensor>> {
    (first_index..first_index + count)
        .into_par_iter()
        .map(|k| {
            let payload_seed = mix_seed(seed, profile.emitter_id as u64, k as u64);
            extract_features(&synth_burst(profile, payload_seed, snr_db)?)
        })
        .collect()
}

pub fn make_dataset(
    n_known: usize,
    n_abnormal: usize,
    bursts_per_emitter: usize,
    seed: u64,
) -> Result<Dataset> {
    make_dataset_with(&DatasetParams {
        n_known,
        n_abnormal,
        bursts_per_emitter,
        seed,
        ..DatasetParams::default()
    })
}

pub fn make_dataset_with(params: &DatasetParams) -> Result<Dataset> {
    if params.n_known < 2 {
        return Err(Error::InvalidArgument(format!(
            "n_known must be >= 2, got {}",
            params.n_known
        )));
    }
    if params.bursts_per_emitter < 10 {
        return Err(Error::InvalidArgument(format!(
            "bursts_per_emitter must be >= 10, got {}",
            params.bursts_per_emitter
        )));
    }
    if !(params.train_fraction > 0.0 && params.train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_fraction must lie in (0, 1), got {}",
            params.train_fraction
        )));
    }

    let profiles = random_profiles(params.n_known, params.n_abnormal, params.seed);
    let n_train = ((params.bursts_per_emitter as f64) * params.train_fraction).round() as usize;

    let mut records = Vec::new();
    let mut split = Vec::new();
    for profile in &profiles {
        let mut tensors = emitter_records(
            profile,
            0,
            params.bursts_per_emitter,
            params.snr_db,
            params.seed,
        )?;
        let known = profile.emitter_id < params.n_known;
        if known {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
                params.seed,
                profile.emitter_id as u64,
                u64::MAX,
            ));
            let mut order: Vec<usize> = (0..tensors.len()).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let mut is_train = vec![false; tensors.len()];
            for &k in &order[..n_train] {
                is_train[k] = true;
            }
            split.extend(is_train.into_iter().map(|t| if t { Split::Train } else { Split::Test }));
        } else {
            split.extend(std::iter::repeat(Split::Abnormal).take(tensors.len()));
        }
        records.append(&mut tensors);
    }

    Ok(Dataset {
        records,
        split,
        known_classes: (0..params.n_known).collect(),
        abnormal_classes: (params.n_known..params.n_known + params.n_abnormal).collect(),
        profiles,
        snr_db: params.snr_db,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn subset(&self, which: Split) -> Vec<RecordView<'_>> {
        self.records
            .iter()
            .zip(&self.split)
            .filter(|(_, s)| **s == which)
            .map(|(r, _)| RecordView {
                features: &r.data,
                label: r.emitter_id,
            })
            .collect()
    }

    pub fn train(&self) -> Vec<RecordView<'_>> {
        self.subset(Split::Train)
    }

    pub fn test(&self) -> Vec<RecordView<'_>> {
        self.subset(Split::Test)
    }

    pub fn abnormal(&self) -> Vec<RecordView<'_>> {
        self.subset(Split::Abnormal)
    }

    pub fn all(&self) -> Vec<RecordView<'_>> {
        self.records
            .iter()
            .map(|r| RecordView {
                features: &r.data,
                label: r.emitter_id,
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut line = String::from("emitter_id,split");
        for k in 0..FEATURE_LEN {
            write!(line, ",f{k}").unwrap();
        }
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        for (record, split) in self.records.iter().zip(&self.split) {
            line.clear();
            write!(line, "{},{}", record.emitter_id, split.as_str()).unwrap();
            for v in &record.data {
                write!(line, ",{v}").unwrap();
            }
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("dataset csv", "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let columns: Vec<&str> = header.trim_end().split(',').collect();
        if columns.len() != FEATURE_LEN + 2
            || columns[0] != "emitter_id"
            || columns[1] != "split"
            || columns[2..]
                .iter()
                .enumerate()
                .any(|(k, c)| *c != format!("f{k}"))
        {
            return Err(Error::parse("dataset csv", "unexpected header"));
        }

        let mut records = Vec::new();
        let mut split = Vec::new();
        let mut known_classes = BTreeSet::new();
        let mut abnormal_classes = BTreeSet::new();
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let context = format!("dataset csv row {}", row + 2);
            let mut fields = line.trim_end().split(',');
            let emitter_id: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(context.as_str(), "bad emitter_id"))?;
            let s = Split::parse(fields.next().unwrap_or(""))?;
            let data: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(context.as_str(), e.to_string()))?;
            if data.len() != FEATURE_LEN {
                return Err(Error::parse(
                    context,
                    format!("expected {FEATURE_LEN} features, got {}", data.len()),
                ));
            }
            if s == Split::Abnormal {
                abnormal_classes.insert(emitter_id);
            } else {
                known_classes.insert(emitter_id);
            }
            records.push(FeatureTensor { data, emitter_id });
            split.push(s);
        }
        if let Some(c) = known_classes.intersection(&abnormal_classes).next() {
            return Err(Error::parse(
                "dataset csv",
                format!("emitter {c} is both known and abnormal"),
            ));
        }
        Ok(Self {
            records,
            split,
            known_classes,
            abnormal_classes,
            profiles: Vec::new(),
            snr_db: f64::NAN,
        })
    }
}
