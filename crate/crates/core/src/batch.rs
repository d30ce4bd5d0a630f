//! Many independent runs in parallel, and β tuning toward a target R0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RunSummary;
use crate::scenario::ScenarioConfig;
use crate::sim::{run_with, RunOptions};
use crate::transmission::ChannelKind;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Self {
        let xs: Vec<f64> = xs.into_iter().collect();
        let n = xs.len();
        if n == 0 {
            return Stat { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, std, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeededSummary {
    pub seed: u64,
    #[serde(flatten)]
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub attack_rate: Stat,
    pub peak_prevalence: Stat,
    pub peak_tick: Stat,
    pub deaths: Stat,
    pub duration: Stat,
    /// Over runs where it is defined.
    pub r0_first_generation: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub scenario: String,
    pub runs: Vec<SeededSummary>,
    pub aggregate: Aggregate,
    pub epidemic_fraction: f64,
}

pub fn aggregate(runs: &[SeededSummary]) -> Aggregate {
    let stat = |f: fn(&RunSummary) -> f64| Stat::of(runs.iter().map(|r| f(&r.summary)));
    Aggregate {
        attack_rate: stat(|s| s.attack_rate),
        peak_prevalence: stat(|s| s.peak_prevalence),
        peak_tick: stat(|s| s.peak_tick as f64),
        deaths: stat(|s| s.deaths as f64),
        duration: stat(|s| s.duration as f64),
        r0_first_generation: Stat::of(runs.iter().filter_map(|r| r.summary.r0_first_generation)),
    }
}

/// Runs every seed independently on the thread pool. Summaries come back in
/// the order of `seeds`.
pub fn run_batch(config: &ScenarioConfig, seeds: &[u64]) -> Result<BatchSummary> {
    if seeds.is_empty() {
        return Err(Error::Invalid("batch needs at least one seed".into()));
    }
    config.validate()?;
    let runs = seeds
        .par_iter()
        .map(|&seed| run_with(config, seed, RunOptions::default()).map(|r| SeededSummary { seed, summary: r.summary }))
        .collect::<Result<Vec<_>>>()?;
    let epidemic_fraction = runs.iter().filter(|r| r.summary.epidemic_occurred).count() as f64 / runs.len() as f64;
    Ok(BatchSummary { scenario: config.name.clone(), aggregate: aggregate(&runs), runs, epidemic_fraction })
}

/// Mean first-generation R0 over `runs` seeds starting at the scenario's seed.
/// Runs stop once their index cases end. Runs without a completed index case
/// are left out; with none at all the result is 0.
pub fn mean_first_generation_r0(config: &ScenarioConfig, runs: usize) -> Result<f64> {
    let base = config.run.seed;
    let opts = RunOptions { record_events: false, stop_after_index_cases: true };
    let values = (0..runs as u64)
        .into_par_iter()
        .map(|k| run_with(config, base.wrapping_add(k), opts).map(|r| r.summary.r0_first_generation))
        .collect::<Result<Vec<_>>>()?;
    let defined: Vec<f64> = values.into_iter().flatten().collect();
    Ok(if defined.is_empty() { 0.0 } else { defined.iter().sum::<f64>() / defined.len() as f64 })
}

pub const MAX_TUNE_ITERATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub channel: ChannelKind,
    pub beta: f64,
    pub achieved: f64,
    pub converged: bool,
    pub iterations: usize,
    /// (β, mean R0) for every evaluation, in order.
    pub history: Vec<(f64, f64)>,
}

/// Bisection on the channel's β over [0, 1]. Every evaluation reuses the same
/// seeds, so the objective is a fixed function of β.
pub fn tune_beta_for_target_r0(
    config: &ScenarioConfig,
    channel: ChannelKind,
    target: f64,
    tolerance: f64,
    runs_per_eval: usize,
) -> Result<TuneResult> {
    if !config.disease.uses_channel(channel) {
        return Err(Error::UnusableChannel(channel.to_string(), "the disease does not use it".into()));
    }
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::Invalid(format!("target R0 must be a nonnegative number, got {target}")));
    }
    if !(tolerance >= 0.0) || runs_per_eval == 0 {
        return Err(Error::Invalid("tolerance must be nonnegative and runs_per_eval positive".into()));
    }
    config.validate()?;
    let eval = |beta: f64| {
        let mut cfg = config.clone();
        cfg.disease.beta_by_channel.insert(channel, beta);
        mean_first_generation_r0(&cfg, runs_per_eval)
    };
    let mut history = Vec::new();
    if target == 0.0 {
        let r = eval(0.0)?;
        history.push((0.0, r));
        return Ok(TuneResult { channel, beta: 0.0, achieved: r, converged: r.abs() <= tolerance, iterations: 0, history });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = (f64::NAN, f64::NAN);
    for it in 1..=MAX_TUNE_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let r = eval(mid)?;
        history.push((mid, r));
        if best.0.is_nan() || (r - target).abs() < (best.1 - target).abs() {
            best = (mid, r);
        }
        if (r - target).abs() <= tolerance {
            return Ok(TuneResult { channel, beta: mid, achieved: r, converged: true, iterations: it, history });
        }
        if r < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(TuneResult {
        channel,
        beta: best.0,
        achieved: best.1,
        converged: false,
        iterations: MAX_TUNE_ITERATIONS,
        history,
    })
}
