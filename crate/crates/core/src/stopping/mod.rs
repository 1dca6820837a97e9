//! Classical stochastic engine: discrete sample paths, stopping times, the
//! counting process they generate, and the Monte Carlo synchronization
//! experiments built on top of them.
//!
//! Paths live on a uniform time grid of spacing `step * step` and move by
//! `±step` per tick, so the random walk has unit variance per unit time for
//! every resolution; refining `step` refines the grid without rescaling the
//! process. Stopping-time constructions only ever look backward along the
//! path, which is what makes them stopping times.

// `!(x > 0.0)` guards reject NaN arguments along with the out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiments;

pub use experiments::{
    baxter_chacon_experiment, device_sync_experiment, BaxterChaconConfig, ConvergenceReport,
    DeviceChain, DeviceMap, DeviceSyncConfig, DeviceSyncReport, DeviceSyncRow, SyncGap,
    TestFunction, TransitionTensor, TrendStatistic,
};

use crate::SimRng;
use rand::Rng;
use rand::SeedableRng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoppingError {
    #[error("horizon must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("flip probability must lie in [0, 1], got {0}")]
    InvalidFlipProb(f64),
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("n list must be non-empty and strictly increasing")]
    InvalidNList,
    #[error("need at least 100 trials, got {0}")]
    TooFewTrials(u64),
    #[error("crossing width must be positive, got {0}")]
    InvalidWidth(f64),
    #[error("stopping times must be non-negative, non-decreasing and below the horizon")]
    InvalidStoppingTimes,
    #[error("invalid config line '{0}': expected key=value")]
    MalformedConfigLine(String),
    #[error("unknown config key '{0}'")]
    UnknownConfigKey(String),
    #[error("invalid value '{value}' for config key '{key}'")]
    InvalidConfigValue { key: String, value: String },
}

/// Path models. Each variant carries everything needed to regenerate its
/// paths, so `(model, seed, stream, horizon, step)` pins a path exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathModel {
    /// `±step` increments with probability 1/2 each, from `start`.
    SimpleRandomWalk { start: f64 },
    /// Two-state chain on `{+1, -1}` starting at `+1`, flipping with the
    /// given probability at each tick.
    TwoStateMarkov { flip_prob: f64 },
}

/// A realized trajectory on its discrete grid, right-continuous between
/// ticks.
#[derive(Debug, Clone)]
pub struct SamplePath {
    model: PathModel,
    seed: u64,
    stream: u64,
    step: f64,
    horizon: f64,
    times: Vec<f64>,
    values: Vec<f64>,
}

/// Simulates one path; see [`simulate_path_stream`] for the stream-split
/// variant used by multi-trial experiments.
pub fn simulate_path(
    model: PathModel,
    horizon: f64,
    step: f64,
    seed: u64,
) -> Result<SamplePath, StoppingError> {
    simulate_path_stream(model, horizon, step, seed, 0)
}

/// Simulates the path for one `(seed, stream)` pair. Streams are independent
/// ChaCha streams, so experiments can draw one path per trial index without
/// overlap.
pub fn simulate_path_stream(
    model: PathModel,
    horizon: f64,
    step: f64,
    seed: u64,
    stream: u64,
) -> Result<SamplePath, StoppingError> {
    if !(horizon > 0.0) {
        return Err(StoppingError::NonPositiveHorizon(horizon));
    }
    if !(step > 0.0) {
        return Err(StoppingError::NonPositiveStep(step));
    }
    if let PathModel::TwoStateMarkov { flip_prob } = model {
        if !(0.0..=1.0).contains(&flip_prob) {
            return Err(StoppingError::InvalidFlipProb(flip_prob));
        }
    }
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);

    let dt = step * step;
    let ticks = (horizon / dt).floor() as usize;
    let mut times = Vec::with_capacity(ticks + 1);
    let mut values = Vec::with_capacity(ticks + 1);
    match model {
        PathModel::SimpleRandomWalk { start } => {
            let mut x = start;
            for k in 0..=ticks {
                times.push(k as f64 * dt);
                values.push(x);
                if rng.gen::<bool>() {
                    x += step;
                } else {
                    x -= step;
                }
            }
        }
        PathModel::TwoStateMarkov { flip_prob } => {
            let mut x = 1.0f64;
            for k in 0..=ticks {
                times.push(k as f64 * dt);
                values.push(x);
                if rng.gen::<f64>() < flip_prob {
                    x = -x;
                }
            }
        }
    }
    Ok(SamplePath {
        model,
        seed,
        stream,
        step,
        horizon,
        times,
        values,
    })
}

impl SamplePath {
    pub fn model(&self) -> PathModel {
        self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Grid spacing, `step * step`.
    pub fn dt(&self) -> f64 {
        self.step * self.step
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Right-continuous lookup: the value at the last grid tick `<= t`.
    /// `None` outside `[0, last_time]`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if t < 0.0 {
            return None;
        }
        let dt = self.dt();
        // Relative guard so a tick time reconstructed with roundoff still
        // lands on its own tick.
        let idx = (t / dt * (1.0 + 1e-12) + 1e-12).floor() as usize;
        if idx >= self.values.len() {
            if t <= self.last_time() {
                return Some(*self.values.last().unwrap());
            }
            return None;
        }
        Some(self.values[idx])
    }

    /// First grid time at which the path reaches `level` from its starting
    /// side, together with its tick index. `None` when the level is not
    /// reached before the horizon.
    pub fn first_hitting_time(&self, level: f64) -> Option<(usize, f64)> {
        let upward = level >= self.values[0];
        for (k, &v) in self.values.iter().enumerate() {
            let hit = if upward { v >= level } else { v <= level };
            if hit {
                return Some((k, self.times[k]));
            }
        }
        None
    }

    /// Successive stopping times at which the path has moved by at least
    /// `width` since the previous event (the first event is measured from
    /// the start value).
    pub fn crossing_times(&self, width: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let mut reference = self.values[0];
        for (k, &v) in self.values.iter().enumerate().skip(1) {
            if (v - reference).abs() >= width {
                out.push(self.times[k]);
                reference = v;
            }
        }
        out
    }
}

/// An ordered sequence of event times, all strictly below the horizon.
#[derive(Debug, Clone)]
pub struct StoppingTimeSequence {
    taus: Vec<f64>,
    horizon: f64,
}

impl StoppingTimeSequence {
    pub fn new(taus: Vec<f64>, horizon: f64) -> Result<Self, StoppingError> {
        let ordered = taus.windows(2).all(|w| w[0] <= w[1]);
        let in_range = taus
            .iter()
            .all(|&t| t >= 0.0 && t < horizon && t.is_finite());
        if !ordered || !in_range || !(horizon > 0.0) {
            return Err(StoppingError::InvalidStoppingTimes);
        }
        Ok(Self { taus, horizon })
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// The counting process `I(t)`: how many events have occurred by `t`,
    /// with an event at exactly `t` included (right-closed convention).
    pub fn count_at(&self, t: f64) -> usize {
        self.taus.iter().take_while(|&&tau| tau <= t).count()
    }
}

/// Free-function form of [`StoppingTimeSequence::count_at`].
pub fn counting_process(taus: &StoppingTimeSequence, t: f64) -> usize {
    taus.count_at(t)
}

/// How the delayed reading time is derived from the primary one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapRule {
    /// Round up to the next multiple of `1/n`; the offset is at most `1/n`.
    ReciprocalN,
    /// Round up to the next multiple of a fixed width.
    Fixed(f64),
}

/// Rounds `t` up to the next multiple of `gap` (values already on the gap
/// grid stay put).
pub fn round_up_to(t: f64, gap: f64) -> f64 {
    if gap <= 0.0 {
        return t;
    }
    let scaled = t / gap;
    let nearest = scaled.round();
    let k = if (scaled - nearest).abs() < 1e-9 {
        nearest
    } else {
        scaled.ceil()
    };
    k * gap
}

/// One `(T(n), U(n))` generator: `T` is the first hitting time of `level`,
/// `U` is `T` rounded up by the gap rule at index `n`.
#[derive(Debug, Clone, Copy)]
pub struct StoppingPair {
    pub n: u32,
    pub level: f64,
    pub gap: f64,
}

/// Outcome of evaluating a stopping pair on one path.
#[derive(Debug, Clone, Copy)]
pub enum PairOutcome {
    Hit {
        t: f64,
        u: f64,
        x_t: f64,
        x_u: f64,
    },
    /// The level was not reached (or the rounded time fell past the grid);
    /// excluded from statistics.
    Truncated,
}

impl StoppingPair {
    pub fn new(level: f64, n: u32, rule: GapRule) -> Self {
        let gap = match rule {
            GapRule::ReciprocalN => 1.0 / n.max(1) as f64,
            GapRule::Fixed(w) => w,
        };
        Self { n, level, gap }
    }

    pub fn evaluate(&self, path: &SamplePath) -> PairOutcome {
        let Some((_, t)) = path.first_hitting_time(self.level) else {
            return PairOutcome::Truncated;
        };
        let u = round_up_to(t, self.gap);
        let (Some(x_t), Some(x_u)) = (path.value_at(t), path.value_at(u)) else {
            return PairOutcome::Truncated;
        };
        PairOutcome::Hit { t, u, x_t, x_u }
    }
}

/// Builds the paired hitting-time generators for `n = 1..=n_max`. The gap
/// shrinks with `n`, and both times are bounded by the horizon by
/// construction, so the pairs satisfy the tightness needed for the
/// convergence experiments.
pub fn make_stopping_pairs(
    level: f64,
    n_max: u32,
    rule: GapRule,
) -> Result<Vec<StoppingPair>, StoppingError> {
    if n_max == 0 {
        return Err(StoppingError::InvalidNList);
    }
    if let GapRule::Fixed(w) = rule {
        if !(w > 0.0) {
            return Err(StoppingError::InvalidWidth(w));
        }
    }
    Ok((1..=n_max)
        .map(|n| StoppingPair::new(level, n, rule))
        .collect())
}
