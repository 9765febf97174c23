//! Secondary control laws: the conventional parallel voltage/current
//! compensation on top of droop, and the cascade power/bus-voltage scheme.

use serde::{Deserialize, Serialize};

use super::pi::{PiController, PiGains};

/// What one converter's controller knows at a sampling instant.
///
/// For the cascade scheme `own` and `total` are powers (W); for the
/// conventional scheme they are currents (A). `total` combines the local
/// value with what arrived from the neighbours.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConverterView {
    pub own: f64,
    pub total: f64,
    pub bus_voltage: f64,
}

impl ConverterView {
    /// View built from a shared, undelayed measurement vector.
    pub fn from_global(own: &[f64], bus_voltage: &[f64], index: usize) -> Self {
        Self {
            own: own[index],
            total: own.iter().sum(),
            bus_voltage: bus_voltage[index],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConventionalScheme {
    /// Ω, one per converter.
    pub droop: Vec<f64>,
    pub voltage_pi: PiGains,
    pub current_pi: PiGains,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CascadeScheme {
    pub power_pi: Vec<PiGains>,
    pub bus_voltage_pi: Vec<PiGains>,
    pub weights: Vec<f64>,
}

impl CascadeScheme {
    /// Same gains on every converter.
    pub fn uniform(power_pi: PiGains, bus_voltage_pi: PiGains, weights: Vec<f64>) -> Self {
        let n = weights.len();
        Self {
            power_pi: vec![power_pi; n],
            bus_voltage_pi: vec![bus_voltage_pi; n],
            weights,
        }
    }
}

/// References for the conventional scheme: per-converter primary set points
/// `V_i*` and the bus-voltage reference.
#[derive(Clone, Debug, PartialEq)]
pub struct ConventionalRefs {
    pub v_star: Vec<f64>,
    pub bus_voltage: f64,
}

impl ConventionalRefs {
    /// All-zero references, as used by the deviation model.
    pub fn deviation(n: usize) -> Self {
        Self {
            v_star: vec![0.0; n],
            bus_voltage: 0.0,
        }
    }
}

/// Clamps for the secondary PI outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondaryLimits {
    /// V, on every voltage-valued correction.
    pub voltage: f64,
    /// W, per converter, on the bus-voltage PI output of the cascade.
    pub power: Vec<f64>,
}

impl SecondaryLimits {
    pub fn unlimited(n: usize) -> Self {
        Self {
            voltage: f64::INFINITY,
            power: vec![f64::INFINITY; n],
        }
    }

    /// `±fraction·V_gn` on voltages and `±factor·P_r` on powers.
    pub fn from_ratings(nominal_voltage: f64, rated_power: &[f64], voltage_fraction: f64, power_factor: f64) -> Self {
        Self {
            voltage: voltage_fraction * nominal_voltage,
            power: rated_power.iter().map(|p| power_factor * p).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConventionalController {
    scheme: ConventionalScheme,
    weights: Vec<f64>,
    voltage: Vec<PiController>,
    current: Vec<PiController>,
    active: bool,
}

impl ConventionalController {
    pub fn new(scheme: ConventionalScheme, weights: Vec<f64>, limits: &SecondaryLimits) -> Self {
        let n = weights.len();
        Self {
            voltage: vec![PiController::new(scheme.voltage_pi, limits.voltage); n],
            current: vec![PiController::new(scheme.current_pi, limits.voltage); n],
            scheme,
            weights,
            active: true,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Switches the secondary corrections on or off. Integrators restart
    /// from zero either way.
    pub fn set_active(&mut self, active: bool) {
        if active != self.active {
            self.voltage
                .iter_mut()
                .chain(self.current.iter_mut())
                .for_each(PiController::reset);
        }
        self.active = active;
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// `V_i^ref = V_i* − R_di I_i + PI_V(V_ref − V_gi) + PI_I(w_i ΣI − I_i)`.
    pub fn step(&mut self, views: &[ConverterView], refs: &ConventionalRefs, dt: f64) -> Vec<f64> {
        assert_eq!(views.len(), self.len(), "one view per converter");
        (0..self.len())
            .map(|i| {
                let v = views[i];
                let primary = refs.v_star[i] - self.scheme.droop[i] * v.own;
                if !self.active {
                    return primary;
                }
                let dv = self.voltage[i].step(refs.bus_voltage - v.bus_voltage, dt);
                let di = self.current[i].step(self.weights[i] * v.total - v.own, dt);
                primary + dv + di
            })
            .collect()
    }

    pub fn integrators(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.voltage
            .iter()
            .chain(self.current.iter())
            .map(|c| (c.integrator(), c.limit))
    }
}

#[derive(Clone, Debug)]
pub struct CascadeController {
    weights: Vec<f64>,
    power: Vec<PiController>,
    bus_voltage: Vec<PiController>,
    power_refs: Vec<f64>,
    active: bool,
}

impl CascadeController {
    pub fn new(scheme: CascadeScheme, limits: &SecondaryLimits) -> Self {
        let n = scheme.weights.len();
        assert_eq!(scheme.power_pi.len(), n);
        assert_eq!(scheme.bus_voltage_pi.len(), n);
        Self {
            power: scheme
                .power_pi
                .iter()
                .map(|g| PiController::new(*g, limits.voltage))
                .collect(),
            bus_voltage: scheme
                .bus_voltage_pi
                .iter()
                .zip(&limits.power)
                .map(|(g, l)| PiController::new(*g, *l))
                .collect(),
            weights: scheme.weights,
            power_refs: vec![0.0; n],
            active: true,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn set_active(&mut self, active: bool) {
        if active != self.active {
            self.power
                .iter_mut()
                .chain(self.bus_voltage.iter_mut())
                .for_each(PiController::reset);
            self.power_refs.iter_mut().for_each(|p| *p = 0.0);
        }
        self.active = active;
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Outer loop `ΔP*_Vi = PI_V(−ΔV_gi)`, shared reference
    /// `ΔP_i* = w_i(ΣΔP_k + demand + ΔP*_Vi)`, inner loop
    /// `ΔV_i* = PI_P(ΔP_i* − ΔP_i)`.
    pub fn step(&mut self, views: &[ConverterView], demand: f64, dt: f64) -> Vec<f64> {
        assert_eq!(views.len(), self.len(), "one view per converter");
        if !self.active {
            return vec![0.0; self.len()];
        }
        (0..self.len())
            .map(|i| {
                let v = views[i];
                let p_v = self.bus_voltage[i].step(-v.bus_voltage, dt);
                let p_ref = self.weights[i] * (v.total + demand + p_v);
                self.power_refs[i] = p_ref;
                self.power[i].step(p_ref - v.own, dt)
            })
            .collect()
    }

    /// Power references from the last step.
    pub fn power_refs(&self) -> &[f64] {
        &self.power_refs
    }

    pub fn integrators(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.power
            .iter()
            .chain(self.bus_voltage.iter())
            .map(|c| (c.integrator(), c.limit))
    }
}
