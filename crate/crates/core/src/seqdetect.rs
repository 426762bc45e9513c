//! Sequential change detection over binary detector streams.
//!
//! Every engine consumes one alarm bit per step and reports whether it
//! raises an alarm. After a change point the bits switch from
//! Bernoulli(fpr) to Bernoulli(tpr); the Monte-Carlo helpers measure how
//! many post-change samples each engine needs to notice.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::BernoulliModel;
use crate::error::{Error, Result};

/// Log-likelihood ratio `ln(P1(i) / P0(i))` of one detector output, where
/// `P1` is the abnormal-state model (`tpr`) and `P0` the normal one (`fpr`).
pub fn llr(i: u8, model: &BernoulliModel) -> Result<f64> {
    let inside = |p: f64| p > 0.0 && p < 1.0;
    if !inside(model.fpr) || !inside(model.tpr) {
        return Err(Error::DegenerateLikelihood {
            fpr: model.fpr,
            tpr: model.tpr,
        });
    }
    Ok(match i {
        0 => ((1.0 - model.tpr) / (1.0 - model.fpr)).ln(),
        _ => (model.tpr / model.fpr).ln(),
    })
}

/// Single-stream change detector. Bits other than 0 count as 1.
pub trait SequentialDetector {
    fn step(&mut self, i: u8) -> bool;
    fn reset(&mut self);
}

/// Index of the first alarm in `stream`, if any.
pub fn first_alarm(detector: &mut dyn SequentialDetector, stream: &[u8]) -> Option<usize> {
    stream.iter().position(|&i| detector.step(i))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CusumDetector {
    pub model: BernoulliModel,
    pub h: f64,
    /// Clamped cumulative statistic; never negative.
    pub s: f64,
    g: [f64; 2],
}

impl CusumDetector {
    pub fn new(model: BernoulliModel, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("CUSUM threshold must be positive, got {h}")));
        }
        Ok(Self {
            model,
            h,
            s: 0.0,
            g: [llr(0, &model)?, llr(1, &model)?],
        })
    }

    /// `s' = max(0, s + g)` and the alarm flag `s' > h`, without mutating.
    pub fn peek(&self, i: u8) -> (f64, bool) {
        let s = (self.s + self.g[usize::from(i != 0)]).max(0.0);
        (s, s > self.h)
    }
}

impl SequentialDetector for CusumDetector {
    fn step(&mut self, i: u8) -> bool {
        let (s, alarm) = self.peek(i);
        self.s = s;
        alarm
    }

    fn reset(&mut self) {
        self.s = 0.0;
    }
}

/// EWMA control chart for Bernoulli observations.
///
/// `z_k = λ·i_k + (1 − λ)·z_{k−1}` starting from `z_0 = μ0 = fpr`, with an
/// alarm when `z_k > μ0 + L·σ_k` and
/// `σ_k = sqrt(fpr·(1 − fpr)) · sqrt(λ / (2 − λ) · (1 − (1 − λ)^{2k}))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EwmaDetector {
    pub lambda: f64,
    pub l: f64,
    pub z: f64,
    pub in_control_mean: f64,
    sigma: f64,
    k: u32,
}

impl EwmaDetector {
    pub const DEFAULT_LAMBDA: f64 = 0.15;

    pub fn new(model: BernoulliModel, lambda: f64, l: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidArgument(format!("EWMA lambda must lie in (0, 1], got {lambda}")));
        }
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidArgument(format!("EWMA limit multiplier must be positive, got {l}")));
        }
        Ok(Self {
            lambda,
            l,
            z: model.fpr,
            in_control_mean: model.fpr,
            sigma: (model.fpr * (1.0 - model.fpr)).sqrt(),
            k: 0,
        })
    }

    /// Control limit after `k` observations.
    pub fn limit(&self, k: u32) -> f64 {
        let decay = (1.0 - self.lambda).powi(2 * k as i32);
        let spread = (self.lambda / (2.0 - self.lambda) * (1.0 - decay)).sqrt();
        self.in_control_mean + self.l * self.sigma * spread
    }
}

impl SequentialDetector for EwmaDetector {
    fn step(&mut self, i: u8) -> bool {
        let x = f64::from(u8::from(i != 0));
        self.z = self.lambda * x + (1.0 - self.lambda) * self.z;
        self.k = self.k.saturating_add(1);
        self.z > self.limit(self.k)
    }

    fn reset(&mut self) {
        self.z = self.in_control_mean;
        self.k = 0;
    }
}

/// Sliding-window vote: alarms once the window is full and its mean exceeds
/// the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowDetector {
    pub length: usize,
    pub threshold: f64,
    buffer: VecDeque<u8>,
    ones: usize,
}

impl WindowDetector {
    pub const DEFAULT_THRESHOLD: f64 = 0.7;

    pub fn new(length: usize, threshold: f64) -> Result<Self> {
        if length == 0 {
            return Err(Error::InvalidArgument("window length must be positive".into()));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidArgument(format!("window threshold must lie in [0, 1], got {threshold}")));
        }
        Ok(Self {
            length,
            threshold,
            buffer: VecDeque::with_capacity(length),
            ones: 0,
        })
    }

    pub fn is_full(&self) -> bool {
        self.buffer.len() == self.length
    }
}

impl SequentialDetector for WindowDetector {
    fn step(&mut self, i: u8) -> bool {
        let bit = u8::from(i != 0);
        if self.is_full() {
            self.ones -= usize::from(self.buffer.pop_front().unwrap_or(0));
        }
        self.buffer.push_back(bit);
        self.ones += usize::from(bit);
        self.is_full() && self.ones as f64 / self.length as f64 > self.threshold
    }

    fn reset(&mut self) {
        self.buffer.clear();
        self.ones = 0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Algorithm {
    Cusum { h: f64 },
    Ewma { lambda: f64, l: f64 },
    Window { length: usize, threshold: f64 },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Cusum { .. } => "cusum",
            Algorithm::Ewma { .. } => "ewma",
            Algorithm::Window { .. } => "window",
        }
    }

    /// The swept parameter: `h`, `L`, or the window length.
    pub fn param(&self) -> f64 {
        match *self {
            Algorithm::Cusum { h } => h,
            Algorithm::Ewma { l, .. } => l,
            Algorithm::Window { length, .. } => length as f64,
        }
    }

    pub fn build(&self, model: BernoulliModel) -> Result<Box<dyn SequentialDetector + Send>> {
        Ok(match *self {
            Algorithm::Cusum { h } => Box::new(CusumDetector::new(model, h)?),
            Algorithm::Ewma { lambda, l } => Box::new(EwmaDetector::new(model, lambda, l)?),
            Algorithm::Window { length, threshold } => Box::new(WindowDetector::new(length, threshold)?),
        })
    }
}

/// Detection delays over Monte-Carlo trials, in samples. A trial alarming
/// at the first post-change sample has delay 1. Delay statistics cover
/// detected trials only; they are NaN when no trial detected the change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
    pub n_trials: usize,
    pub detected: usize,
    pub false_alarms: usize,
    pub censored: usize,
    pub false_alarm_rate: f64,
}

impl DelayStats {
    /// Largest delay over trials that did not false-alarm; `+∞` when any
    /// such trial ran to the end without alarming.
    pub fn worst_case(&self) -> f64 {
        if self.censored > 0 || self.detected == 0 {
            f64::INFINITY
        } else {
            self.max
        }
    }

    /// Smallest observed delay; `+∞` when nothing was detected.
    pub fn best_case(&self) -> f64 {
        if self.detected == 0 {
            f64::INFINITY
        } else {
            self.min
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    FalseAlarm,
    Delay(usize),
    Censored,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn run_trial(
    detector: &mut dyn SequentialDetector,
    model: &BernoulliModel,
    change_point: usize,
    max_len: usize,
    rng: &mut ChaCha8Rng,
) -> Outcome {
    for n in 0..max_len {
        let p = if n < change_point { model.fpr } else { model.tpr };
        let bit = u8::from(rng.gen::<f64>() < p);
        if detector.step(bit) {
            return if n < change_point {
                Outcome::FalseAlarm
            } else {
                Outcome::Delay(n - change_point + 1)
            };
        }
    }
    Outcome::Censored
}

/// Monte-Carlo detection delay. Trial `t` draws its bits from a ChaCha8
/// stream `t` of `seed`, so equal seeds give common random numbers across
/// algorithms and models.
pub fn simulate_delay(
    algorithm: &Algorithm,
    model: &BernoulliModel,
    change_point: usize,
    n_trials: usize,
    max_len: usize,
    seed: u64,
) -> Result<DelayStats> {
    if change_point >= max_len {
        return Err(Error::InvalidArgument(format!(
            "change point {change_point} must precede max_len {max_len}"
        )));
    }
    if n_trials < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 trials, got {n_trials}")));
    }
    algorithm.build(*model)?;
    let outcomes: Vec<Outcome> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut detector = algorithm.build(*model).expect("validated above");
            run_trial(detector.as_mut(), model, change_point, max_len, &mut trial_rng(seed, t))
        })
        .collect();

    let delays: Vec<usize> = outcomes
        .iter()
        .filter_map(|o| match o {
            Outcome::Delay(d) => Some(*d),
            _ => None,
        })
        .collect();
    let false_alarms = outcomes.iter().filter(|o| **o == Outcome::FalseAlarm).count();
    let censored = outcomes.iter().filter(|o| **o == Outcome::Censored).count();
    let (mean, min, max) = if delays.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let sum: usize = delays.iter().sum();
        (
            sum as f64 / delays.len() as f64,
            *delays.iter().min().unwrap_or(&0) as f64,
            *delays.iter().max().unwrap_or(&0) as f64,
        )
    };
    Ok(DelayStats {
        mean,
        min,
        max,
        range: max - min,
        n_trials,
        detected: delays.len(),
        false_alarms,
        censored,
        false_alarm_rate: false_alarms as f64 / n_trials as f64,
    })
}

/// Average run length to the first false alarm on a change-free
/// Bernoulli(fpr) stream. Trials without an alarm contribute `max_len`, so
/// the estimate is a lower bound when `censored > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLength {
    pub mean: f64,
    pub censored: usize,
}

pub fn average_run_length(
    algorithm: &Algorithm,
    model: &BernoulliModel,
    n_trials: usize,
    max_len: usize,
    seed: u64,
) -> Result<RunLength> {
    if n_trials == 0 || max_len == 0 {
        return Err(Error::InvalidArgument("need at least one trial and one sample".into()));
    }
    algorithm.build(*model)?;
    let lengths: Vec<Option<usize>> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut detector = algorithm.build(*model).expect("validated above");
            let mut rng = trial_rng(seed, t);
            (0..max_len).find(|_| detector.step(u8::from(rng.gen::<f64>() < model.fpr))).map(|n| n + 1)
        })
        .collect();
    let censored = lengths.iter().filter(|l| l.is_none()).count();
    let total: usize = lengths.iter().map(|l| l.unwrap_or(max_len)).sum();
    Ok(RunLength {
        mean: total as f64 / n_trials as f64,
        censored,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub tprs: Vec<f64>,
    pub fpr: f64,
    pub cusum_h: Vec<f64>,
    pub ewma_lambda: f64,
    pub ewma_l: Vec<f64>,
    pub window_lengths: Vec<usize>,
    pub window_threshold: f64,
    pub change_point: usize,
    /// Defaults to `change_point + 2000`.
    pub max_len: Option<usize>,
    pub n_trials: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            tprs: vec![0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 0.99],
            fpr: 0.4,
            cusum_h: vec![2.0, 5.0, 10.0, 15.0, 20.0],
            ewma_lambda: EwmaDetector::DEFAULT_LAMBDA,
            ewma_l: vec![3.0, 3.5, 4.0],
            window_lengths: vec![50, 100, 200, 300],
            window_threshold: WindowDetector::DEFAULT_THRESHOLD,
            change_point: 100,
            max_len: None,
            n_trials: 10_000,
        }
    }
}

impl SweepGrid {
    pub fn max_len(&self) -> usize {
        self.max_len.unwrap_or(self.change_point + 2000)
    }

    pub fn algorithms(&self) -> Vec<Algorithm> {
        let mut out: Vec<Algorithm> = self.cusum_h.iter().map(|&h| Algorithm::Cusum { h }).collect();
        out.extend(self.ewma_l.iter().map(|&l| Algorithm::Ewma {
            lambda: self.ewma_lambda,
            l,
        }));
        out.extend(self.window_lengths.iter().map(|&length| Algorithm::Window {
            length,
            threshold: self.window_threshold,
        }));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: String,
    pub tpr: f64,
    pub fpr: f64,
    pub q: f64,
    pub param: f64,
    pub stats: DelayStats,
}

/// One row per tpr value and algorithm setting. All points share `seed`.
pub fn sweep(grid: &SweepGrid, seed: u64) -> Result<Vec<SweepRow>> {
    let algorithms = grid.algorithms();
    if grid.tprs.is_empty() || algorithms.is_empty() {
        return Err(Error::EmptySet("sweep grid"));
    }
    let mut rows = Vec::with_capacity(grid.tprs.len() * algorithms.len());
    for &tpr in &grid.tprs {
        let model = BernoulliModel::new(grid.fpr, tpr)?;
        for algorithm in &algorithms {
            let stats = simulate_delay(algorithm, &model, grid.change_point, grid.n_trials, grid.max_len(), seed)?;
            rows.push(SweepRow {
                algorithm: algorithm.name().to_string(),
                tpr,
                fpr: grid.fpr,
                q: model.quality(),
                param: algorithm.param(),
                stats,
            });
        }
    }
    Ok(rows)
}

/// Largest [`DelayStats::worst_case`] over one algorithm's settings at a
/// given tpr.
pub fn worst_case(rows: &[SweepRow], algorithm: &str, tpr: f64) -> Option<f64> {
    rows.iter()
        .filter(|r| r.algorithm == algorithm && r.tpr == tpr)
        .map(|r| r.stats.worst_case())
        .reduce(f64::max)
}

pub const SWEEP_HEADER: &str =
    "algorithm,tpr,fpr,q,param,mean_delay,min_delay,max_delay,range,false_alarm_rate,censored";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let s = &r.stats;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.algorithm, r.tpr, r.fpr, r.q, r.param, s.mean, s.min, s.max, s.range, s.false_alarm_rate, s.censored
        );
    }
    out
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    std::fs::write(path, sweep_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn write_stream(stream: &[u8], path: &Path) -> Result<()> {
    let mut out = String::with_capacity(stream.len() * 2);
    for &b in stream {
        out.push(if b != 0 { '1' } else { '0' });
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn parse_stream(text: &str) -> Result<Vec<u8>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| match l.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(Error::parse(format!("stream line {}", n + 1), format!("expected 0 or 1, got {other:?}"))),
        })
        .collect()
}

pub fn read_stream(path: &Path) -> Result<Vec<u8>> {
    parse_stream(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(fpr: f64, tpr: f64) -> BernoulliModel {
        BernoulliModel::new(fpr, tpr).unwrap()
    }

    fn random_stream(seed: u64, n: usize, p: f64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| u8::from(rng.gen::<f64>() < p)).collect()
    }

    #[test]
    fn llr_values() {
        let m = model(0.2, 0.9);
        assert!((llr(1, &m).unwrap() - 4.5f64.ln()).abs() < 1e-12);
        assert!((llr(1, &m).unwrap() - 1.5041).abs() < 1e-4);
        assert!((llr(0, &m).unwrap() + 2.0794).abs() < 1e-4);
        let same = model(0.3, 0.3);
        assert_eq!(llr(0, &same).unwrap(), 0.0);
        assert_eq!(llr(1, &same).unwrap(), 0.0);
        for bad in [model(0.0, 0.5), model(0.5, 1.0), model(1.0, 0.5)] {
            assert!(matches!(llr(1, &bad), Err(Error::DegenerateLikelihood { .. })));
        }
    }

    #[test]
    fn cusum_clamps_and_alarms() {
        let mut d = CusumDetector::new(model(0.2, 0.9), 5.0).unwrap();
        for _ in 0..1000 {
            assert!(!d.step(0));
            assert_eq!(d.s, 0.0);
        }
        let mut d = CusumDetector::new(model(0.4, 0.6), 5.0).unwrap();
        d.s = 4.9;
        d.g = [-0.2, 0.2];
        assert!(d.step(1));
        assert!((d.s - 5.1).abs() < 1e-12);
        assert!(CusumDetector::new(model(0.4, 0.6), 0.0).is_err());
    }

    #[test]
    fn cusum_matches_recursion() {
        let m = model(0.4, 0.8);
        let stream = random_stream(1, 200, 0.6);
        let mut d = CusumDetector::new(m, 1e9).unwrap();
        for &i in &stream {
            d.step(i);
        }
        let g1 = (0.8f64 / 0.4).ln();
        let g0 = ((1.0f64 - 0.8) / (1.0 - 0.4)).ln();
        let mut s = 0.0f64;
        for &i in &stream {
            s = (s + if i == 1 { g1 } else { g0 }).max(0.0);
        }
        assert_eq!(d.s, s);
    }

    #[test]
    fn ewma_recurrence() {
        let m = model(0.3, 0.8);
        let mut d = EwmaDetector::new(m, 1.0, 3.0).unwrap();
        for &i in &random_stream(2, 50, 0.5) {
            d.step(i);
            assert_eq!(d.z, f64::from(i));
        }

        let mut d = EwmaDetector::new(m, 0.15, 3.0).unwrap();
        let stream = random_stream(3, 500, 0.5);
        let mut z = 0.3;
        let sigma = (0.3f64 * 0.7).sqrt();
        for (k, &i) in stream.iter().enumerate() {
            let alarm = d.step(i);
            z = 0.15 * f64::from(i) + 0.85 * z;
            let limit = 0.3 + 3.0 * sigma * (0.15 / 1.85 * (1.0 - 0.85f64.powi(2 * (k as i32 + 1)))).sqrt();
            assert!((d.z - z).abs() < 1e-12);
            assert_eq!(alarm, z > limit);
        }
    }

    #[test]
    fn ewma_quiet_stream_never_alarms() {
        let mut d = EwmaDetector::new(model(0.2, 0.8), 0.15, 3.0).unwrap();
        d.z = 0.0;
        for _ in 0..1000 {
            assert!(!d.step(0));
            assert!(d.z >= 0.0 && d.z <= 1.0);
        }
        assert!(EwmaDetector::new(model(0.2, 0.8), 0.0, 3.0).is_err());
    }

    #[test]
    fn window_warm_up_and_vote() {
        let mut d = WindowDetector::new(4, 0.7).unwrap();
        assert!(!d.step(1));
        assert!(!d.step(1));
        assert!(!d.step(1));
        assert!(d.step(0));
        let mut d = WindowDetector::new(10, 0.0).unwrap();
        for _ in 0..9 {
            assert!(!d.step(1));
        }
        assert!(WindowDetector::new(0, 0.5).is_err());
    }

    #[test]
    fn window_matches_brute_force() {
        let stream = random_stream(4, 400, 0.65);
        let mut d = WindowDetector::new(20, 0.7).unwrap();
        for (n, &i) in stream.iter().enumerate() {
            let alarm = d.step(i);
            let expected = n + 1 >= 20 && {
                let ones: usize = stream[n + 1 - 20..=n].iter().map(|&b| b as usize).sum();
                ones as f64 / 20.0 > 0.7
            };
            assert_eq!(alarm, expected, "step {n}");
        }
    }

    #[test]
    fn certain_detection_has_unit_delay() {
        let m = model(1e-9, 1.0 - 1e-12);
        let stats = simulate_delay(&Algorithm::Cusum { h: 2.0 }, &m, 50, 500, 300, 1).unwrap();
        assert_eq!(stats.detected, 500);
        assert_eq!((stats.min, stats.max, stats.mean), (1.0, 1.0, 1.0));
        assert_eq!(stats.range, 0.0);
    }

    #[test]
    fn indistinguishable_states_are_censored() {
        let m = model(0.4, 0.4);
        let alg = Algorithm::Window { length: 100, threshold: 0.7 };
        let stats = simulate_delay(&alg, &m, 100, 200, 1100, 2).unwrap();
        assert!(stats.censored >= 198, "{stats:?}");
        assert_eq!(stats.worst_case(), f64::INFINITY);
    }

    #[test]
    fn simulation_is_deterministic_and_ordered() {
        let m = model(0.4, 0.8);
        let alg = Algorithm::Ewma { lambda: 0.15, l: 3.0 };
        let a = simulate_delay(&alg, &m, 100, 300, 2100, 9).unwrap();
        let b = simulate_delay(&alg, &m, 100, 300, 2100, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.min <= a.mean && a.mean <= a.max);
        assert_eq!(a.range, a.max - a.min);
        assert_eq!(a.detected + a.false_alarms + a.censored, a.n_trials);
    }

    #[test]
    fn simulation_preconditions() {
        let m = model(0.4, 0.8);
        let alg = Algorithm::Cusum { h: 5.0 };
        assert!(simulate_delay(&alg, &m, 100, 300, 100, 1).is_err());
        assert!(simulate_delay(&alg, &m, 10, 99, 100, 1).is_err());
        assert!(simulate_delay(&alg, &model(0.0, 0.8), 10, 100, 100, 1).is_err());
    }

    #[test]
    fn arl_grows_with_threshold() {
        let m = model(0.4, 0.8);
        let low = average_run_length(&Algorithm::Cusum { h: 2.0 }, &m, 2000, 20_000, 3).unwrap();
        let high = average_run_length(&Algorithm::Cusum { h: 5.0 }, &m, 2000, 20_000, 3).unwrap();
        assert!(high.mean > low.mean, "{low:?} {high:?}");
    }

    #[test]
    fn one_point_grid_has_three_rows() {
        let grid = SweepGrid {
            tprs: vec![0.9],
            cusum_h: vec![5.0],
            ewma_l: vec![3.0],
            window_lengths: vec![50],
            n_trials: 100,
            ..SweepGrid::default()
        };
        let rows = sweep(&grid, 1).unwrap();
        assert_eq!(rows.len(), 3);
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().next().unwrap(), SWEEP_HEADER);
        assert_eq!(csv.lines().count(), 4);
        assert!(worst_case(&rows, "cusum", 0.9).is_some());
        assert!(worst_case(&rows, "cusum", 0.5).is_none());
    }

    #[test]
    fn stream_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        let stream = random_stream(5, 100, 0.5);
        write_stream(&stream, &path).unwrap();
        assert_eq!(read_stream(&path).unwrap(), stream);
        assert!(parse_stream("0\n2\n").is_err());
        assert_eq!(parse_stream("1\n0\n\n").unwrap(), vec![1, 0]);
    }
}
