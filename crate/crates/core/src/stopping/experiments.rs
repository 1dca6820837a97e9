//! Monte Carlo synchronization experiments.
//!
//! Both experiments fan independent trials out through [`crate::exec`], one
//! ChaCha stream per trial index, and reduce in trial order, so a `(config,
//! seed)` pair always produces the same report.

use super::{
    round_up_to, simulate_path_stream, GapRule, PairOutcome, PathModel, StoppingError, StoppingPair,
};
use crate::exec;
use std::fmt::Write as _;

/// 95% two-sided normal quantile for the binomial confidence intervals.
const Z95: f64 = 1.959963984540054;

fn binomial_ci(p: f64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    Z95 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Continuous test functions applied to the path values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    Identity,
    Constant(f64),
    Abs,
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TestFunction::Identity => x,
            TestFunction::Constant(c) => *c,
            TestFunction::Abs => x.abs(),
        }
    }
}

/// Which per-trial statistic the convergence experiment thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrendStatistic {
    /// `|f(X_T(n)) - f(X_U(n))|` for the hitting time `T` of `level` and its
    /// gap-rounded partner `U`.
    PathFunction(TestFunction),
    /// Distance between two counting processes adjunct to the same path,
    /// evaluated at mid-horizon: the first counts successive `level`-wide
    /// moves, the second counts the same events rounded up to the `1/n`
    /// grid.
    CountingSync,
}

#[derive(Debug, Clone)]
pub struct BaxterChaconConfig {
    pub model: PathModel,
    pub horizon: f64,
    /// Spatial increment; the time grid spacing is `step * step`.
    pub step: f64,
    /// Hitting level for [`TrendStatistic::PathFunction`]; crossing width for
    /// [`TrendStatistic::CountingSync`].
    pub level: f64,
    pub statistic: TrendStatistic,
    pub epsilon: f64,
    pub n_list: Vec<u32>,
    pub n_trials: u64,
    pub seed: u64,
}

impl Default for BaxterChaconConfig {
    fn default() -> Self {
        Self {
            model: PathModel::SimpleRandomWalk { start: 0.0 },
            horizon: 8.0,
            step: 1.0 / 16.0,
            level: 0.5,
            statistic: TrendStatistic::PathFunction(TestFunction::Identity),
            epsilon: 0.5,
            n_list: vec![4, 16, 64],
            n_trials: 10_000,
            seed: crate::DEFAULT_SEED,
        }
    }
}

impl BaxterChaconConfig {
    fn validate(&self) -> Result<(), StoppingError> {
        if !(self.epsilon > 0.0) {
            return Err(StoppingError::InvalidEpsilon(self.epsilon));
        }
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(StoppingError::InvalidNList);
        }
        if self.n_trials < 100 {
            return Err(StoppingError::TooFewTrials(self.n_trials));
        }
        if matches!(self.statistic, TrendStatistic::CountingSync) && !(self.level > 0.0) {
            return Err(StoppingError::InvalidWidth(self.level));
        }
        Ok(())
    }

    /// Applies `key=value` lines (blank lines and `#` comments ignored) on
    /// top of the current configuration. Recognized keys: `horizon`, `step`,
    /// `level`, `epsilon`, `n_list` (comma-separated), `trials`, `seed`,
    /// `start`, `flip_prob` (switches the model to the two-state chain).
    pub fn apply_kv(&mut self, text: &str) -> Result<(), StoppingError> {
        for (key, value) in parse_kv(text)? {
            let bad = |k: &str, v: &str| StoppingError::InvalidConfigValue {
                key: k.to_string(),
                value: v.to_string(),
            };
            match key.as_str() {
                "horizon" => self.horizon = value.parse().map_err(|_| bad(&key, &value))?,
                "step" => self.step = value.parse().map_err(|_| bad(&key, &value))?,
                "level" => self.level = value.parse().map_err(|_| bad(&key, &value))?,
                "epsilon" => self.epsilon = value.parse().map_err(|_| bad(&key, &value))?,
                "trials" => self.n_trials = value.parse().map_err(|_| bad(&key, &value))?,
                "seed" => self.seed = value.parse().map_err(|_| bad(&key, &value))?,
                "n_list" => {
                    let ns: Result<Vec<u32>, _> =
                        value.split(',').map(|s| s.trim().parse()).collect();
                    self.n_list = ns.map_err(|_| bad(&key, &value))?;
                }
                "start" => {
                    let s: f64 = value.parse().map_err(|_| bad(&key, &value))?;
                    self.model = PathModel::SimpleRandomWalk { start: s };
                }
                "flip_prob" => {
                    let p: f64 = value.parse().map_err(|_| bad(&key, &value))?;
                    self.model = PathModel::TwoStateMarkov { flip_prob: p };
                }
                _ => return Err(StoppingError::UnknownConfigKey(key)),
            }
        }
        Ok(())
    }
}

pub(crate) fn parse_kv(text: &str) -> Result<Vec<(String, String)>, StoppingError> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(StoppingError::MalformedConfigLine(line.to_string()));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Estimated exceedance probabilities per sequence index, with 95% binomial
/// half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub n_values: Vec<u32>,
    pub exceedance_probs: Vec<f64>,
    pub ci_halfwidth: Vec<f64>,
    /// Trials that produced a usable statistic (horizon truncations are
    /// excluded and reported through the difference from `n_trials`).
    pub valid_trials: Vec<u64>,
    pub epsilon: f64,
    pub n_trials: u64,
}

impl ConvergenceReport {
    pub fn write_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# epsilon={}", self.epsilon);
        let _ = writeln!(out, "# requested_trials={}", self.n_trials);
        out.push_str("n,exceedance,ci_halfwidth,trials\n");
        for i in 0..self.n_values.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.n_values[i],
                self.exceedance_probs[i],
                self.ci_halfwidth[i],
                self.valid_trials[i]
            );
        }
        out
    }
}

/// Runs the paired-stopping-time convergence experiment: for each `n`, the
/// probability that the trial statistic exceeds `epsilon`, over independent
/// paths. With the shipped constructions the gap between the paired times is
/// at most `1/n`, so the exceedance must trend to zero as `n` grows.
pub fn baxter_chacon_experiment(
    config: &BaxterChaconConfig,
) -> Result<ConvergenceReport, StoppingError> {
    config.validate()?;
    // Probe the path arguments once so bad configs fail before the fan-out.
    simulate_path_stream(config.model, config.horizon, config.step, config.seed, 0)?;

    let pairs: Vec<StoppingPair> = config
        .n_list
        .iter()
        .map(|&n| StoppingPair::new(config.level, n, GapRule::ReciprocalN))
        .collect();
    let statistic = config.statistic;
    let (model, horizon, step, seed) = (config.model, config.horizon, config.step, config.seed);
    let epsilon = config.epsilon;
    let n_list = config.n_list.clone();

    let per_trial: Vec<Vec<Option<bool>>> = exec::indexed_map(config.n_trials as usize, |trial| {
        let path = simulate_path_stream(model, horizon, step, seed, trial as u64)
            .expect("validated arguments");
        match statistic {
            TrendStatistic::PathFunction(f) => pairs
                .iter()
                .map(|pair| match pair.evaluate(&path) {
                    PairOutcome::Hit { x_t, x_u, .. } => {
                        Some((f.eval(x_t) - f.eval(x_u)).abs() > epsilon)
                    }
                    PairOutcome::Truncated => None,
                })
                .collect(),
            TrendStatistic::CountingSync => {
                let events = path.crossing_times(pairs[0].level);
                let s = horizon / 2.0;
                let primary = events.iter().filter(|&&t| t <= s).count() as i64;
                n_list
                    .iter()
                    .map(|&n| {
                        let gap = 1.0 / n as f64;
                        let delayed =
                            events.iter().filter(|&&t| round_up_to(t, gap) <= s).count() as i64;
                        Some((primary - delayed).abs() as f64 > epsilon)
                    })
                    .collect()
            }
        }
    });

    let mut exceedance_probs = Vec::with_capacity(n_list.len());
    let mut ci_halfwidth = Vec::with_capacity(n_list.len());
    let mut valid_trials = Vec::with_capacity(n_list.len());
    for k in 0..n_list.len() {
        let mut valid = 0u64;
        let mut exceed = 0u64;
        for row in &per_trial {
            if let Some(flag) = row[k] {
                valid += 1;
                exceed += flag as u64;
            }
        }
        let p = if valid == 0 {
            0.0
        } else {
            exceed as f64 / valid as f64
        };
        exceedance_probs.push(p);
        ci_halfwidth.push(binomial_ci(p, valid));
        valid_trials.push(valid);
    }
    Ok(ConvergenceReport {
        n_values: n_list,
        exceedance_probs,
        ci_halfwidth,
        valid_trials,
        epsilon,
        n_trials: config.n_trials,
    })
}

/// A deterministic reading of the path value at a stopping time, over the
/// two-letter alphabet `{0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviceMap {
    /// Reads 1 when the value exceeds the threshold, else 0.
    Above { threshold: f64 },
    /// The same indicator with the two labels swapped.
    Below { threshold: f64 },
}

impl DeviceMap {
    pub fn read(&self, x: f64) -> u8 {
        match self {
            DeviceMap::Above { threshold } => (x > *threshold) as u8,
            DeviceMap::Below { threshold } => (x <= *threshold) as u8,
        }
    }
}

/// One device's record along a path: the state it read at each of its
/// reading times (one reading per time by construction). Times past the
/// path's grid are dropped together with everything after them.
#[derive(Debug, Clone)]
pub struct DeviceChain {
    map: DeviceMap,
    times: Vec<f64>,
    readings: Vec<u8>,
}

impl DeviceChain {
    pub fn record(map: DeviceMap, path: &super::SamplePath, times: &[f64]) -> Self {
        let mut kept = Vec::with_capacity(times.len());
        let mut readings = Vec::with_capacity(times.len());
        for &t in times {
            let Some(x) = path.value_at(t) else { break };
            kept.push(t);
            readings.push(map.read(x));
        }
        Self {
            map,
            times: kept,
            readings,
        }
    }

    pub fn map(&self) -> DeviceMap {
        self.map
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn readings(&self) -> &[u8] {
        &self.readings
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }
}

/// Offset between the two devices' reading schedules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyncGap {
    /// Both devices read at exactly the same stopping times.
    Exact,
    /// The second device reads at the first device's times rounded up to
    /// the `1/n` grid.
    ReciprocalN(u32),
}

impl SyncGap {
    pub fn width(&self) -> f64 {
        match self {
            SyncGap::Exact => 0.0,
            SyncGap::ReciprocalN(n) => 1.0 / (*n).max(1) as f64,
        }
    }

    pub fn index(&self) -> u32 {
        match self {
            SyncGap::Exact => 0,
            SyncGap::ReciprocalN(n) => *n,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeviceSyncConfig {
    pub model: PathModel,
    pub horizon: f64,
    pub step: f64,
    /// Width of the path moves that generate the reading times.
    pub event_width: f64,
    pub device_a: DeviceMap,
    pub device_b: DeviceMap,
    pub gaps: Vec<SyncGap>,
    pub n_trials: u64,
    pub seed: u64,
}

impl Default for DeviceSyncConfig {
    fn default() -> Self {
        Self {
            model: PathModel::SimpleRandomWalk { start: 0.0 },
            horizon: 8.0,
            // Finer than the smallest default gap (1/64) so even that gap
            // spans many ticks of genuine path motion.
            step: 1.0 / 64.0,
            event_width: 0.5,
            // The default threshold sits between the lattice of reading
            // values so a reading is never exactly at the decision boundary.
            device_a: DeviceMap::Above { threshold: 0.25 },
            device_b: DeviceMap::Above { threshold: 0.25 },
            gaps: vec![
                SyncGap::Exact,
                SyncGap::ReciprocalN(4),
                SyncGap::ReciprocalN(64),
            ],
            n_trials: 10_000,
            seed: crate::DEFAULT_SEED,
        }
    }
}

impl DeviceSyncConfig {
    fn validate(&self) -> Result<(), StoppingError> {
        if !(self.event_width > 0.0) {
            return Err(StoppingError::InvalidWidth(self.event_width));
        }
        if self.gaps.is_empty() {
            return Err(StoppingError::InvalidNList);
        }
        if self.n_trials < 100 {
            return Err(StoppingError::TooFewTrials(self.n_trials));
        }
        Ok(())
    }

    /// Applies `key=value` lines. Recognized keys: `horizon`, `step`,
    /// `event_width`, `threshold` (both devices), `trials`, `seed`, `start`,
    /// `flip_prob`, `n_list` (comma-separated gap indices, 0 = exact sync).
    pub fn apply_kv(&mut self, text: &str) -> Result<(), StoppingError> {
        for (key, value) in parse_kv(text)? {
            let bad = |k: &str, v: &str| StoppingError::InvalidConfigValue {
                key: k.to_string(),
                value: v.to_string(),
            };
            match key.as_str() {
                "horizon" => self.horizon = value.parse().map_err(|_| bad(&key, &value))?,
                "step" => self.step = value.parse().map_err(|_| bad(&key, &value))?,
                "event_width" => self.event_width = value.parse().map_err(|_| bad(&key, &value))?,
                "trials" => self.n_trials = value.parse().map_err(|_| bad(&key, &value))?,
                "seed" => self.seed = value.parse().map_err(|_| bad(&key, &value))?,
                "threshold" => {
                    let t: f64 = value.parse().map_err(|_| bad(&key, &value))?;
                    self.device_a = DeviceMap::Above { threshold: t };
                    self.device_b = DeviceMap::Above { threshold: t };
                }
                "n_list" => {
                    let ns: Result<Vec<u32>, _> =
                        value.split(',').map(|s| s.trim().parse()).collect();
                    let ns = ns.map_err(|_| bad(&key, &value))?;
                    self.gaps = ns
                        .into_iter()
                        .map(|n| {
                            if n == 0 {
                                SyncGap::Exact
                            } else {
                                SyncGap::ReciprocalN(n)
                            }
                        })
                        .collect();
                }
                "start" => {
                    let s: f64 = value.parse().map_err(|_| bad(&key, &value))?;
                    self.model = PathModel::SimpleRandomWalk { start: s };
                }
                "flip_prob" => {
                    let p: f64 = value.parse().map_err(|_| bad(&key, &value))?;
                    self.model = PathModel::TwoStateMarkov { flip_prob: p };
                }
                _ => return Err(StoppingError::UnknownConfigKey(key)),
            }
        }
        Ok(())
    }
}

/// Empirical joint transition frequencies: entry `(i, k, j, l)` is the
/// relative frequency of device A moving `i -> k` while device B moves
/// `j -> l` between consecutive reading times.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTensor {
    counts: [u64; 16],
    total: u64,
}

impl TransitionTensor {
    fn from_counts(counts: [u64; 16]) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    fn flat(i: u8, k: u8, j: u8, l: u8) -> usize {
        ((i as usize) << 3) | ((k as usize) << 2) | ((j as usize) << 1) | (l as usize)
    }

    pub fn count(&self, i: u8, k: u8, j: u8, l: u8) -> u64 {
        self.counts[Self::flat(i, k, j, l)]
    }

    pub fn frequency(&self, i: u8, k: u8, j: u8, l: u8) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(i, k, j, l) as f64 / self.total as f64
        }
    }

    pub fn transitions(&self) -> u64 {
        self.total
    }

    fn disagreement_under(&self, relabel: [u8; 2]) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let mut off = 0u64;
        for i in 0..2u8 {
            for k in 0..2u8 {
                for j in 0..2u8 {
                    for l in 0..2u8 {
                        if relabel[j as usize] != i || relabel[l as usize] != k {
                            off += self.count(i, k, j, l);
                        }
                    }
                }
            }
        }
        off as f64 / self.total as f64
    }

    /// Mass off the synchronized diagonal with device B's labels as
    /// recorded.
    pub fn disagreement_raw(&self) -> f64 {
        self.disagreement_under([0, 1])
    }

    /// Mass off the synchronized diagonal after the canonical relabeling of
    /// device B's alphabet (the bijection that minimizes the mass), so a
    /// device that reports inverted labels still counts as synchronized.
    pub fn disagreement_mass(&self) -> f64 {
        self.disagreement_under([0, 1])
            .min(self.disagreement_under([1, 0]))
    }
}

#[derive(Debug, Clone)]
pub struct DeviceSyncRow {
    pub gap: SyncGap,
    pub tensor: TransitionTensor,
    /// Canonical (relabeling-minimized) disagreement mass.
    pub disagreement: f64,
    pub ci_halfwidth: f64,
}

#[derive(Debug, Clone)]
pub struct DeviceSyncReport {
    pub rows: Vec<DeviceSyncRow>,
    /// Trials with fewer than two reading times, excluded from every row.
    pub discarded_trials: u64,
    pub n_trials: u64,
}

impl DeviceSyncReport {
    pub fn write_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# requested_trials={}", self.n_trials);
        let _ = writeln!(out, "# discarded_trials={}", self.discarded_trials);
        out.push_str("n,gap,disagreement,ci_halfwidth,transitions");
        for i in 0..2u8 {
            for k in 0..2u8 {
                for j in 0..2u8 {
                    for l in 0..2u8 {
                        let _ = write!(out, ",f{i}{k}_{j}{l}");
                    }
                }
            }
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                row.gap.index(),
                row.gap.width(),
                row.disagreement,
                row.ci_halfwidth,
                row.tensor.transitions()
            );
            for i in 0..2u8 {
                for k in 0..2u8 {
                    for j in 0..2u8 {
                        for l in 0..2u8 {
                            let _ = write!(out, ",{}", row.tensor.frequency(i, k, j, l));
                        }
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Estimates the joint transition tensor of two reading devices across
/// consecutive stopping times, one row per configured gap. With exactly
/// synchronized readings and matching devices the off-diagonal mass is zero;
/// with offset readings it shrinks as the offset does.
pub fn device_sync_experiment(
    config: &DeviceSyncConfig,
) -> Result<DeviceSyncReport, StoppingError> {
    config.validate()?;
    simulate_path_stream(config.model, config.horizon, config.step, config.seed, 0)?;

    let gaps = config.gaps.clone();
    let (model, horizon, step, seed) = (config.model, config.horizon, config.step, config.seed);
    let (device_a, device_b, width) = (config.device_a, config.device_b, config.event_width);

    struct TrialOut {
        counts: Vec<[u64; 16]>,
        discarded: bool,
    }

    let per_trial: Vec<TrialOut> = exec::indexed_map(config.n_trials as usize, |trial| {
        let path = simulate_path_stream(model, horizon, step, seed, trial as u64)
            .expect("validated arguments");
        let events = path.crossing_times(width);
        let mut counts = vec![[0u64; 16]; gaps.len()];
        if events.len() < 2 {
            return TrialOut {
                counts,
                discarded: true,
            };
        }
        let primary = DeviceChain::record(device_a, &path, &events);
        for (g, gap) in gaps.iter().enumerate() {
            let delayed_times: Vec<f64> = events
                .iter()
                .map(|&tau| round_up_to(tau, gap.width()))
                .collect();
            let delayed = DeviceChain::record(device_b, &path, &delayed_times);
            let paired = primary.len().min(delayed.len());
            for idx in 1..paired {
                let (i, k) = (primary.readings()[idx - 1], primary.readings()[idx]);
                let (j, l) = (delayed.readings()[idx - 1], delayed.readings()[idx]);
                counts[g][TransitionTensor::flat(i, k, j, l)] += 1;
            }
        }
        TrialOut {
            counts,
            discarded: false,
        }
    });

    let mut discarded = 0u64;
    let mut totals = vec![[0u64; 16]; gaps.len()];
    for t in &per_trial {
        discarded += t.discarded as u64;
        for (g, c) in t.counts.iter().enumerate() {
            for (acc, &x) in totals[g].iter_mut().zip(c.iter()) {
                *acc += x;
            }
        }
    }

    let rows = gaps
        .iter()
        .zip(totals)
        .map(|(&gap, counts)| {
            let tensor = TransitionTensor::from_counts(counts);
            let disagreement = tensor.disagreement_mass();
            let ci_halfwidth = binomial_ci(disagreement, tensor.transitions());
            DeviceSyncRow {
                gap,
                tensor,
                disagreement,
                ci_halfwidth,
            }
        })
        .collect();

    Ok(DeviceSyncReport {
        rows,
        discarded_trials: discarded,
        n_trials: config.n_trials,
    })
}
