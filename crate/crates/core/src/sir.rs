//! The SIR compartment baseline and its comparison against micro runs.
//!
//! Frequency-dependent form: dS/dt = -βSI/N, dI/dt = βSI/N - γI, dR/dt = γI,
//! integrated with fixed-step classical Runge-Kutta.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::TickSnapshot;
use crate::scenario::ScenarioConfig;
use crate::transmission::ChannelKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirParams {
    /// Effective contact rate per day.
    pub beta_macro: f64,
    /// Recovery rate per day.
    pub gamma: f64,
    pub population_n: f64,
    pub s0: f64,
    pub i0: f64,
    pub r0_count: f64,
}

impl SirParams {
    /// Everyone susceptible except `i0` infected.
    pub fn seeded(beta_macro: f64, gamma: f64, population_n: f64, i0: f64) -> Self {
        Self { beta_macro, gamma, population_n, s0: population_n - i0, i0, r0_count: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            errors.push("gamma must be positive".to_string());
        }
        if !(self.beta_macro >= 0.0) || !self.beta_macro.is_finite() {
            errors.push("beta_macro must be nonnegative".to_string());
        }
        if !(self.population_n > 0.0) || !self.population_n.is_finite() {
            errors.push("population_n must be positive".to_string());
        }
        if [self.s0, self.i0, self.r0_count].iter().any(|&x| !(x >= 0.0)) {
            errors.push("initial compartments must be nonnegative".to_string());
        }
        let sum = self.s0 + self.i0 + self.r0_count;
        if (sum - self.population_n).abs() > 1e-9 * self.population_n.max(1.0) {
            errors.push(format!("s0 + i0 + r0_count = {sum} differs from population_n = {}", self.population_n));
        }
        crate::error::ValidationError::check(errors).map_err(Error::from)
    }
}

/// β/γ.
pub fn macro_r0(params: &SirParams) -> f64 {
    params.beta_macro / params.gamma
}

/// SIR parameters matched to a homogeneous micro scenario: one zone, one
/// stage, proximity only. β_macro = β·multiplier·N per day and γ = 1 / mean
/// stage length in days; the index cases seed I.
pub fn matched_params(config: &ScenarioConfig) -> Result<SirParams> {
    let mut why = Vec::new();
    if config.world.zones.len() != 1 {
        why.push(format!("needs exactly one zone, found {}", config.world.zones.len()));
    }
    if config.disease.stages.len() != 1 {
        why.push(format!("needs exactly one stage, found {}", config.disease.stages.len()));
    }
    if config.disease.beta_by_channel.iter().any(|(c, &b)| *c != ChannelKind::Proximity && b > 0.0) {
        why.push("only the proximity channel may have a positive beta".into());
    }
    if !why.is_empty() {
        return Err(Error::Invalid(format!("scenario `{}` has no matched SIR: {}", config.name, why.join("; "))));
    }
    let stage = &config.disease.stages[0];
    let days = config.run.tick_length_days;
    let mean_ticks = stage
        .mean_duration_days
        .unwrap_or((stage.duration_min_days + stage.duration_max_days) as f64 / 2.0);
    let beta = config.disease.beta_by_channel.get(&ChannelKind::Proximity).copied().unwrap_or(0.0);
    let n = config.population.count as f64;
    let params = SirParams::seeded(
        beta * stage.infectiousness_multiplier * n / days,
        1.0 / (mean_ticks * days),
        n,
        config.run.index_cases.count as f64,
    );
    params.validate()?;
    Ok(params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SirTrajectory {
    pub population_n: f64,
    pub time: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
}

impl SirTrajectory {
    pub fn horizon(&self) -> f64 {
        *self.time.last().expect("trajectory has a start point")
    }

    /// Linear interpolation of (S, I, R) at time `t` within the grid.
    pub fn at(&self, t: f64) -> (f64, f64, f64) {
        let k = self.time.partition_point(|&x| x < t);
        if k == 0 {
            return (self.s[0], self.i[0], self.r[0]);
        }
        if k >= self.time.len() {
            let n = self.time.len() - 1;
            return (self.s[n], self.i[n], self.r[n]);
        }
        let (t0, t1) = (self.time[k - 1], self.time[k]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
        let lerp = |v: &[f64]| v[k - 1] + w * (v[k] - v[k - 1]);
        (lerp(&self.s), lerp(&self.i), lerp(&self.r))
    }

    /// Grid time of maximal I (earliest on ties).
    pub fn peak_time(&self) -> f64 {
        let mut best = 0;
        for k in 1..self.i.len() {
            if self.i[k] > self.i[best] {
                best = k;
            }
        }
        self.time[best]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,S,I,R")?;
        for k in 0..self.time.len() {
            writeln!(w, "{},{},{},{}", self.time[k], self.s[k], self.i[k], self.r[k])?;
        }
        Ok(())
    }
}

fn derivative(p: &SirParams, s: f64, i: f64) -> (f64, f64, f64) {
    let force = p.beta_macro * s * i / p.population_n;
    let rec = p.gamma * i;
    (-force, force - rec, rec)
}

/// Fixed-step RK4 from 0 to `horizon`; the last step is shortened to land on
/// the horizon exactly.
pub fn integrate_sir(params: &SirParams, dt: f64, horizon: f64) -> Result<SirTrajectory> {
    params.validate()?;
    if !(dt > 0.0) || !(horizon > 0.0) || dt > horizon || !horizon.is_finite() {
        return Err(Error::Invalid(format!("need 0 < dt <= horizon, got dt = {dt}, horizon = {horizon}")));
    }
    let steps = (horizon / dt - 1e-9).ceil() as usize;
    let mut tr = SirTrajectory {
        population_n: params.population_n,
        time: Vec::with_capacity(steps + 1),
        s: Vec::with_capacity(steps + 1),
        i: Vec::with_capacity(steps + 1),
        r: Vec::with_capacity(steps + 1),
    };
    let (mut s, mut i, mut r) = (params.s0, params.i0, params.r0_count);
    tr.time.push(0.0);
    tr.s.push(s);
    tr.i.push(i);
    tr.r.push(r);
    for step in 1..=steps {
        let t0 = (step - 1) as f64 * dt;
        let h = if step == steps { horizon - t0 } else { dt };
        let k1 = derivative(params, s, i);
        let k2 = derivative(params, s + 0.5 * h * k1.0, i + 0.5 * h * k1.1);
        let k3 = derivative(params, s + 0.5 * h * k2.0, i + 0.5 * h * k2.1);
        let k4 = derivative(params, s + h * k3.0, i + h * k3.1);
        s += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        i += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        r += h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2);
        let t = if step == steps { horizon } else { step as f64 * dt };
        if !(s.is_finite() && i.is_finite() && r.is_finite()) {
            return Err(Error::NonFinite { step, time: t });
        }
        tr.time.push(t);
        tr.s.push(s);
        tr.i.push(i);
        tr.r.push(r);
    }
    Ok(tr)
}

/// Compartment counts of a micro run on its own time grid (days).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroSeries {
    pub time: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
}

impl MicroSeries {
    /// S = susceptible, I = infected, R = everyone else. A run that stopped
    /// early is held constant up to `horizon_ticks`.
    pub fn from_snapshots(snapshots: &[TickSnapshot], tick_length_days: f64, horizon_ticks: u64) -> Self {
        let mut out = MicroSeries { time: Vec::new(), s: Vec::new(), i: Vec::new(), r: Vec::new() };
        let Some(last) = snapshots.last() else {
            return out;
        };
        let mut push = |tick: u64, snap: &TickSnapshot| {
            let (s, i) = (snap.susceptible() as f64, snap.infected() as f64);
            out.time.push(tick as f64 * tick_length_days);
            out.s.push(s);
            out.i.push(i);
            out.r.push(snap.population() as f64 - s - i);
        };
        for snap in snapshots {
            push(snap.tick, snap);
        }
        for tick in last.tick + 1..=horizon_ticks {
            push(tick, last);
        }
        out
    }

    /// Pointwise mean of series on a common grid.
    pub fn mean(series: &[MicroSeries]) -> Result<MicroSeries> {
        let first = series.first().ok_or_else(|| Error::Invalid("no series to average".into()))?;
        if series.iter().any(|s| s.time != first.time) {
            return Err(Error::MismatchedHorizons("series to average have different grids".into()));
        }
        let n = series.len() as f64;
        let avg = |f: fn(&MicroSeries) -> &Vec<f64>| -> Vec<f64> {
            (0..first.time.len()).map(|k| series.iter().map(|s| f(s)[k]).sum::<f64>() / n).collect()
        };
        Ok(MicroSeries { time: first.time.clone(), s: avg(|s| &s.s), i: avg(|s| &s.i), r: avg(|s| &s.r) })
    }

    /// Earliest time of maximal I.
    pub fn peak_time(&self) -> f64 {
        let mut best = 0;
        for k in 1..self.i.len() {
            if self.i[k] > self.i[best] {
                best = k;
            }
        }
        self.time.get(best).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    /// |I_macro - I_micro| at each micro time point.
    pub i_gap: Vec<f64>,
    pub mean_i_gap: f64,
    pub max_i_gap: f64,
    pub peak_time_macro: f64,
    pub peak_time_micro: f64,
    /// Micro minus macro.
    pub peak_time_gap: f64,
    /// N - S at the horizon.
    pub final_size_macro: f64,
    pub final_size_micro: f64,
    /// Micro minus macro.
    pub final_size_gap: f64,
}

/// Gaps between a trajectory and a micro series covering the same horizon.
/// Macro values are interpolated at the micro time points.
pub fn compare_macro_micro(trajectory: &SirTrajectory, micro: &MicroSeries) -> Result<DivergenceReport> {
    let Some(&micro_end) = micro.time.last() else {
        return Err(Error::MismatchedHorizons("micro series is empty".into()));
    };
    let horizon = trajectory.horizon();
    if (micro_end - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::MismatchedHorizons(format!("micro series ends at {micro_end}, trajectory at {horizon}")));
    }
    if micro.time.windows(2).any(|w| w[1] <= w[0]) || micro.time[0] < 0.0 {
        return Err(Error::MismatchedHorizons("micro time grid must start at or after 0 and increase".into()));
    }
    let i_gap: Vec<f64> = micro.time.iter().zip(&micro.i).map(|(&t, &i)| (trajectory.at(t).1 - i).abs()).collect();
    let mean_i_gap = i_gap.iter().sum::<f64>() / i_gap.len() as f64;
    let max_i_gap = i_gap.iter().copied().fold(0.0, f64::max);
    let (peak_time_macro, peak_time_micro) = (trajectory.peak_time(), micro.peak_time());
    let n = trajectory.population_n;
    let final_size_macro = n - trajectory.s.last().expect("nonempty");
    let micro_n = micro.s[0] + micro.i[0] + micro.r[0];
    let final_size_micro = micro_n - micro.s.last().expect("nonempty");
    Ok(DivergenceReport {
        i_gap,
        mean_i_gap,
        max_i_gap,
        peak_time_macro,
        peak_time_micro,
        peak_time_gap: peak_time_micro - peak_time_macro,
        final_size_macro,
        final_size_micro,
        final_size_gap: final_size_micro - final_size_macro,
    })
}
