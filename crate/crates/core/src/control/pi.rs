use serde::{Deserialize, Serialize};

use crate::tf::{Polynomial, TransferFunction};

/// Proportional-integral gains. `ki` is per second.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
}

impl PiGains {
    pub const fn new(kp: f64, ki: f64) -> Self {
        Self { kp, ki }
    }

    pub fn is_valid(&self) -> bool {
        self.kp.is_finite() && self.ki.is_finite() && self.ki >= 0.0
    }

    /// `(kp s + ki) / s`
    pub fn transfer_function(&self) -> TransferFunction {
        TransferFunction::new(Polynomial::linear(self.ki, self.kp), Polynomial::s())
            .expect("s is a nonzero denominator")
    }

    /// Same gains scaled by `k` (used to change the units of the error).
    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.kp * k, self.ki * k)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PiState {
    pub integrator: f64,
    pub last_output: f64,
    /// Error at the previous step; `None` right after a reset.
    pub last_error: Option<f64>,
}

impl PiState {
    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// One unclamped trapezoidal PI update.
pub fn pi_step(gains: &PiGains, state: &PiState, error: f64, dt: f64) -> (f64, PiState) {
    let prev = state.last_error.unwrap_or(error);
    let integrator = state.integrator + gains.ki * 0.5 * (error + prev) * dt;
    let output = gains.kp * error + integrator;
    (
        output,
        PiState {
            integrator,
            last_output: output,
            last_error: Some(error),
        },
    )
}

/// Trapezoidal PI with output clamp and conditional integration.
///
/// The integrator only advances when doing so does not push a saturated
/// output further into saturation; it is also kept inside the clamp.
#[derive(Clone, Debug, PartialEq)]
pub struct PiController {
    pub gains: PiGains,
    pub limit: f64,
    pub state: PiState,
}

impl PiController {
    pub fn new(gains: PiGains, limit: f64) -> Self {
        Self {
            gains,
            limit: limit.abs(),
            state: PiState::default(),
        }
    }

    pub fn unlimited(gains: PiGains) -> Self {
        Self::new(gains, f64::INFINITY)
    }

    pub fn reset(&mut self) {
        self.state.reset();
    }

    pub fn step(&mut self, error: f64, dt: f64) -> f64 {
        let (raw, next) = pi_step(&self.gains, &self.state, error, dt);
        let lim = self.limit;
        let old = self.state.integrator;
        let headroom = lim - self.gains.kp * error;
        let footroom = -lim - self.gains.kp * error;
        let integrator = if raw > lim && error > 0.0 {
            next.integrator.min(headroom).max(old)
        } else if raw < -lim && error < 0.0 {
            next.integrator.max(footroom).min(old)
        } else {
            next.integrator
        }
        .clamp(-lim, lim);
        let output = (self.gains.kp * error + integrator).clamp(-lim, lim);
        self.state = PiState {
            integrator,
            last_output: output,
            last_error: Some(error),
        };
        output
    }

    pub fn output(&self) -> f64 {
        self.state.last_output
    }

    pub fn integrator(&self) -> f64 {
        self.state.integrator
    }
}
