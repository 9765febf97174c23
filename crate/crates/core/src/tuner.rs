//! PI design by crossover-frequency and phase-margin placement.

use serde::{Deserialize, Serialize};

use crate::control::PiGains;
use crate::tf::{margins, TfError, TransferFunction};

/// Slack on the PI phase range so that a spec landing exactly on 0° (pure P)
/// is not rejected because of rounding in `arg G`.
const PHASE_EPS_DEG: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSpec {
    /// rad/s
    pub crossover_omega: f64,
    /// degrees
    pub phase_margin: f64,
}

impl TuningSpec {
    pub fn new(crossover_omega: f64, phase_margin: f64) -> Self {
        Self {
            crossover_omega,
            phase_margin,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunedController {
    pub gains: PiGains,
    pub achieved_margin: f64,
    pub achieved_crossover: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TuneError {
    #[error("invalid tuning spec: crossover must be > 0 and margin in (0, 180), got ({omega} rad/s, {margin} deg)")]
    InvalidSpec { omega: f64, margin: f64 },
    #[error("plant response at {omega} rad/s is zero or not finite")]
    DegeneratePlant { omega: f64 },
    #[error(
        "a PI controller cannot give {requested} deg of margin at {omega} rad/s; achievable margins lie in ({lo:.3}, {hi:.3}] deg"
    )]
    Infeasible {
        omega: f64,
        requested: f64,
        lo: f64,
        hi: f64,
    },
    #[error("designed loop could not be verified: {0}")]
    Verification(#[from] TfError),
}

/// Margins reachable by a PI with nonnegative gains at `omega`:
/// `(90 + arg G, 180 + arg G]` degrees.
pub fn achievable_margins(plant: &TransferFunction, omega: f64) -> (f64, f64) {
    let arg = plant.response_at(omega).arg().to_degrees();
    (90.0 + arg, 180.0 + arg)
}

/// Places `|C G| = 1` and `∠C G = −180° + margin` at the requested
/// crossover with `C(s) = kp + ki/s`.
pub fn design_pi(plant: &TransferFunction, spec: &TuningSpec) -> Result<TunedController, TuneError> {
    let w = spec.crossover_omega;
    if !(w > 0.0 && w.is_finite()) || !(spec.phase_margin > 0.0 && spec.phase_margin < 180.0) {
        return Err(TuneError::InvalidSpec {
            omega: w,
            margin: spec.phase_margin,
        });
    }
    let g = plant.response_at(w);
    let mag = g.norm();
    if !(mag > 0.0 && mag.is_finite()) {
        return Err(TuneError::DegeneratePlant { omega: w });
    }
    let arg = g.arg().to_degrees();
    let theta = ((-180.0 + spec.phase_margin) - arg + 180.0).rem_euclid(360.0) - 180.0;
    if !(theta > -90.0 && theta <= PHASE_EPS_DEG) {
        let (lo, hi) = achievable_margins(plant, w);
        return Err(TuneError::Infeasible {
            omega: w,
            requested: spec.phase_margin,
            lo,
            hi,
        });
    }
    let theta = theta.min(0.0).to_radians();
    let c = 1.0 / mag;
    let gains = PiGains::new(c * theta.cos(), (-c * theta.sin() * w).max(0.0));
    let report = verify_design(plant, &gains, spec);
    match (report.crossover, report.phase_margin) {
        (Some(achieved_crossover), Some(achieved_margin)) => Ok(TunedController {
            gains,
            achieved_margin,
            achieved_crossover,
        }),
        _ => Err(TuneError::Verification(TfError::NoCrossover {
            lo: crate::tf::freq::SEARCH_OMEGA_MIN,
            hi: crate::tf::freq::SEARCH_OMEGA_MAX,
        })),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub gains: PiGains,
    pub spec: TuningSpec,
    pub crossover: Option<f64>,
    pub phase_margin: Option<f64>,
    pub crossover_delta: Option<f64>,
    pub margin_delta: Option<f64>,
    pub failure: Option<String>,
}

impl DesignReport {
    pub fn ok(&self) -> bool {
        self.failure.is_none()
    }

    /// Whether the achieved loop is within the given absolute tolerances.
    pub fn within(&self, crossover_tol: f64, margin_tol: f64) -> bool {
        matches!((self.crossover_delta, self.margin_delta), (Some(c), Some(m)) if c.abs() <= crossover_tol && m.abs() <= margin_tol)
    }
}

/// Recomputes crossover and margin of `C·G` and reports the deltas to the
/// spec. A loop without a crossover is a failed report, not an error.
pub fn verify_design(plant: &TransferFunction, gains: &PiGains, spec: &TuningSpec) -> DesignReport {
    loop_report(&gains.transfer_function().series(plant), gains, spec)
}

/// Margin report for an already-assembled open loop built with `gains`.
pub fn loop_report(open_loop: &TransferFunction, gains: &PiGains, spec: &TuningSpec) -> DesignReport {
    match margins(open_loop) {
        Ok(m) => DesignReport {
            gains: *gains,
            spec: *spec,
            crossover: Some(m.crossover),
            phase_margin: Some(m.phase_margin),
            crossover_delta: Some(m.crossover - spec.crossover_omega),
            margin_delta: Some(m.phase_margin - spec.phase_margin),
            failure: None,
        },
        Err(e) => DesignReport {
            gains: *gains,
            spec: *spec,
            crossover: None,
            phase_margin: None,
            crossover_delta: None,
            margin_delta: None,
            failure: Some(e.to_string()),
        },
    }
}
