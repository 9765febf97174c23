//! Transient scores over time windows of a simulated run.

use serde::{Deserialize, Serialize};

use super::SimResult;

/// Slack when matching window edges to sample times, s.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("window [{start}, {end}] s is outside the series span [{first}, {last}] s")]
    WindowOutOfRange {
        start: f64,
        end: f64,
        first: f64,
        last: f64,
    },
    #[error("series is empty")]
    Empty,
    #[error("time and value series differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Trapezoidal `∫ (t − t0)·|e(t)| dt` over `[t0, t0 + T]`.
pub fn itae(time: &[f64], error: &[f64], window_start: f64, window: f64) -> Result<f64, MetricError> {
    let (lo, hi) = window_indices(time, error, window_start, window_start + window)?;
    let mut acc = 0.0;
    for k in lo..hi {
        let (ta, tb) = (time[k] - window_start, time[k + 1] - window_start);
        acc += 0.5 * (tb - ta) * (ta * error[k].abs() + tb * error[k + 1].abs());
    }
    Ok(acc)
}

fn window_indices(time: &[f64], values: &[f64], start: f64, end: f64) -> Result<(usize, usize), MetricError> {
    if time.len() != values.len() {
        return Err(MetricError::LengthMismatch(time.len(), values.len()));
    }
    let (Some(&first), Some(&last)) = (time.first(), time.last()) else {
        return Err(MetricError::Empty);
    };
    if start < first - TIME_EPS || end > last + TIME_EPS || end < start {
        return Err(MetricError::WindowOutOfRange {
            start,
            end,
            first,
            last,
        });
    }
    let lo = time.partition_point(|&t| t < start - TIME_EPS);
    let hi = time.partition_point(|&t| t <= end + TIME_EPS) - 1;
    Ok((lo, hi.max(lo)))
}

/// Width of the tolerance band around the target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    /// Percent of the largest deviation from target inside the window.
    PercentOfPeak(f64),
    /// Fixed half-width in signal units.
    Absolute(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Settling {
    /// Seconds after the window start.
    Settled(f64),
    NotSettled,
}

impl Settling {
    pub fn seconds(&self) -> Option<f64> {
        match self {
            Settling::Settled(t) => Some(*t),
            Settling::NotSettled => None,
        }
    }
}

/// Largest `|value − target|` in `[start, end]`.
pub fn peak_deviation(time: &[f64], values: &[f64], target: f64, start: f64, end: f64) -> Result<f64, MetricError> {
    let (lo, hi) = window_indices(time, values, start, end)?;
    Ok(values[lo..=hi].iter().map(|v| (v - target).abs()).fold(0.0, f64::max))
}

/// Time, measured from `start`, at which the signal last leaves the band
/// around `target` within `[start, end]`; the exit is linearly interpolated
/// between samples. Still outside at `end` means not settled.
pub fn settling_time(
    time: &[f64],
    values: &[f64],
    target: f64,
    band: Band,
    start: f64,
    end: f64,
) -> Result<Settling, MetricError> {
    let (lo, hi) = window_indices(time, values, start, end)?;
    let half = match band {
        Band::PercentOfPeak(p) => p / 100.0 * peak_deviation(time, values, target, start, end)?,
        Band::Absolute(a) => a,
    };
    let dev = |k: usize| (values[k] - target).abs();
    let Some(last_out) = (lo..=hi).rev().find(|&k| dev(k) > half) else {
        return Ok(Settling::Settled(0.0));
    };
    if last_out == hi {
        return Ok(Settling::NotSettled);
    }
    let (da, db) = (dev(last_out), dev(last_out + 1));
    let frac = if da > db { (da - half) / (da - db) } else { 0.0 };
    let t = time[last_out] + frac * (time[last_out + 1] - time[last_out]);
    Ok(Settling::Settled(t - start))
}

/// Voltage and current ITAE over one event window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItaeReport {
    /// V·s²
    pub itae_v: f64,
    /// A·s²
    pub itae_i: f64,
    pub window_start: f64,
    pub window_t: f64,
}

/// Deviation of the mean terminal voltage from its reference.
pub fn itae_voltage(result: &SimResult, window_start: f64, window: f64) -> Result<f64, MetricError> {
    let err: Vec<f64> = result.v_mean.iter().map(|v| -v).collect();
    itae(&result.time, &err, window_start, window)
}

/// `Σ |w_i·I_tot − I_i|` against the rated-power sharing target.
pub fn itae_current(result: &SimResult, window_start: f64, window: f64) -> Result<f64, MetricError> {
    itae(&result.time, &result.sharing_error(), window_start, window)
}

pub fn itae_report(result: &SimResult, window_start: f64, window: f64) -> Result<ItaeReport, MetricError> {
    Ok(ItaeReport {
        itae_v: itae_voltage(result, window_start, window)?,
        itae_i: itae_current(result, window_start, window)?,
        window_start,
        window_t: window,
    })
}
