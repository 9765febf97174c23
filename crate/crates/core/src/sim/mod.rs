//! Fixed-step simulation of the two-source grid under a secondary scheme.

pub mod metrics;
pub mod plant;

use serde::{Deserialize, Serialize};

use crate::control::{
    CascadeController, CascadeScheme, CommChannel, ConventionalController, ConventionalRefs, ConventionalScheme,
    ConverterView, SecondaryLimits,
};
use crate::exec::Execution;
use crate::grid::{GridConfig, GridError};

pub use metrics::{
    itae, itae_current, itae_report, itae_voltage, peak_deviation, settling_time, Band, ItaeReport, MetricError,
    Settling,
};
pub use plant::{GridPlant, PlantOutputs};

/// Beyond this magnitude a state is treated as diverged.
const DIVERGENCE_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("simulation diverged at t = {time} s (state {state:?})")]
    Diverged { time: f64, state: [f64; 3] },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadEvent {
    /// s
    pub time: f64,
    /// W, total load from this time on.
    pub power: f64,
}

/// Piecewise-constant total load. Zero before the first event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoadProfile {
    pub events: Vec<LoadEvent>,
}

impl LoadProfile {
    pub fn new(events: Vec<LoadEvent>) -> Self {
        Self { events }
    }

    pub fn steps(pairs: &[(f64, f64)]) -> Self {
        Self::new(pairs.iter().map(|&(time, power)| LoadEvent { time, power }).collect())
    }

    /// 2 kW from the start, 6 kW from 20 s.
    pub fn laboratory_default() -> Self {
        Self::steps(&[(0.0, 2000.0), (20.0, 6000.0)])
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (k, e) in self.events.iter().enumerate() {
            if !(e.time.is_finite() && e.time >= 0.0) {
                return Err(SimError::Invalid(format!(
                    "load event {k}: time must be finite and >= 0"
                )));
            }
            if !(e.power.is_finite() && e.power >= 0.0) {
                return Err(SimError::Invalid(format!(
                    "load event {k}: power must be finite and >= 0"
                )));
            }
        }
        if self.events.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(SimError::Invalid("load event times must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Total load power at `t`.
    pub fn power_at(&self, t: f64) -> f64 {
        self.events
            .iter()
            .take_while(|e| e.time <= t)
            .last()
            .map_or(0.0, |e| e.power)
    }

    pub fn last_time(&self) -> Option<f64> {
        self.events.last().map(|e| e.time)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(
            self.events
                .iter()
                .map(|e| LoadEvent {
                    time: e.time,
                    power: e.power * k,
                })
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ControlSetup {
    /// No primary or secondary action; sources hold their set points.
    Off,
    Conventional(ConventionalScheme),
    Cascade {
        #[serde(flatten)]
        scheme: CascadeScheme,
        /// W, extra power demanded by the energy manager.
        demand: f64,
    },
}

impl ControlSetup {
    pub fn label(&self) -> &'static str {
        match self {
            ControlSetup::Off => "off",
            ControlSetup::Conventional(_) => "conventional",
            ControlSetup::Cascade { .. } => "cascade",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClampSettings {
    /// Voltage corrections are held within `±fraction·V_gn`.
    pub voltage_fraction: f64,
    /// Power references from the bus-voltage PI within `±factor·P_r`.
    pub power_factor: f64,
}

impl Default for ClampSettings {
    fn default() -> Self {
        Self {
            voltage_fraction: 0.1,
            power_factor: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub grid: GridConfig,
    pub control: ControlSetup,
    pub load: LoadProfile,
    /// s
    pub activation_time: f64,
    /// s
    pub duration: f64,
    /// s
    pub plant_dt: f64,
    /// s
    pub control_dt: f64,
    /// Communication delay in controller periods.
    pub comm_delay: usize,
    pub clamps: ClampSettings,
}

impl Scenario {
    pub fn laboratory_default(control: ControlSetup) -> Self {
        Self {
            grid: GridConfig::default(),
            control,
            load: LoadProfile::laboratory_default(),
            activation_time: 5.0,
            duration: 25.0,
            plant_dt: 1e-4,
            control_dt: 1e-3,
            comm_delay: 1,
            clamps: ClampSettings::default(),
        }
    }

    /// Plant steps per controller period.
    pub fn control_ratio(&self) -> usize {
        (self.control_dt / self.plant_dt).round() as usize
    }

    pub fn plant_steps(&self) -> usize {
        (self.duration / self.plant_dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.grid.validate()?;
        self.grid.pair()?;
        self.load.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(SimError::Invalid(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        if !(self.plant_dt > 0.0) || !(self.control_dt > 0.0) {
            return Err(SimError::Invalid("plant_dt and control_dt must be > 0".into()));
        }
        if self.plant_dt > self.control_dt {
            return Err(SimError::Invalid(format!(
                "plant_dt ({}) must not exceed control_dt ({})",
                self.plant_dt, self.control_dt
            )));
        }
        let ratio = self.control_dt / self.plant_dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(SimError::Invalid(
                "control_dt must be an integer multiple of plant_dt".into(),
            ));
        }
        if self.plant_steps() < 1 {
            return Err(SimError::Invalid("duration is shorter than one plant step".into()));
        }
        if let Some(t) = self.load.last_time() {
            if t >= self.duration {
                return Err(SimError::Invalid(format!(
                    "duration ({}) must exceed the last load event time ({t})",
                    self.duration
                )));
            }
        }
        if !(self.activation_time >= 0.0) {
            return Err(SimError::Invalid("activation_time must be >= 0".into()));
        }
        match &self.control {
            ControlSetup::Off => {}
            ControlSetup::Conventional(s) => {
                if s.droop.len() != 2 || s.droop.iter().any(|r| !(*r >= 0.0)) {
                    return Err(SimError::Invalid("droop needs two values >= 0".into()));
                }
                if !s.voltage_pi.is_valid() || !s.current_pi.is_valid() {
                    return Err(SimError::Invalid(
                        "conventional PI gains must be finite with ki >= 0".into(),
                    ));
                }
            }
            ControlSetup::Cascade { scheme, demand } => {
                if scheme.weights.len() != 2 || scheme.power_pi.len() != 2 || scheme.bus_voltage_pi.len() != 2 {
                    return Err(SimError::Invalid(
                        "cascade scheme needs settings for two converters".into(),
                    ));
                }
                if scheme.weights.iter().any(|w| !(*w > 0.0)) || (scheme.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
                {
                    return Err(SimError::Invalid(
                        "cascade weights must be positive and sum to 1".into(),
                    ));
                }
                if !scheme
                    .power_pi
                    .iter()
                    .chain(&scheme.bus_voltage_pi)
                    .all(|g| g.is_valid())
                {
                    return Err(SimError::Invalid("cascade PI gains must be finite with ki >= 0".into()));
                }
                if !demand.is_finite() {
                    return Err(SimError::Invalid("demand must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// Sampled signals of one run, one entry per plant step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimResult {
    pub time: Vec<f64>,
    /// Source terminal voltage deviations, V.
    pub v: [Vec<f64>; 2],
    /// Mean of the two terminal voltages, V.
    pub v_mean: Vec<f64>,
    /// Bus-node voltage deviation, V.
    pub bus: Vec<f64>,
    /// Cable currents, A.
    pub i: [Vec<f64>; 2],
    /// `V_gn · I_i`, W.
    pub p: [Vec<f64>; 2],
    /// Total load power, W.
    pub load_power: Vec<f64>,
    /// Voltage set points sent to the sources, V.
    pub v_ref: [Vec<f64>; 2],
    /// Sharing targets `w_i · (I1 + I2)`, A.
    pub i_ref: [Vec<f64>; 2],
    /// Cascade power references, W (zero for other schemes).
    pub p_ref: [Vec<f64>; 2],
    pub weights: [f64; 2],
    pub nominal_voltage: f64,
    /// Largest `|integrator| / clamp` seen over the run.
    pub integrator_peak_ratio: f64,
}

impl SimResult {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// `|I_ref1 − I1| + |I_ref2 − I2|` per sample.
    pub fn sharing_error(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| (self.i_ref[0][k] - self.i[0][k]).abs() + (self.i_ref[1][k] - self.i[1][k]).abs())
            .collect()
    }

    /// Index of the last sample at or before `t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.time.partition_point(|&x| x <= t + 1e-9).saturating_sub(1)
    }

    pub fn all_finite(&self) -> bool {
        let cols = [&self.v_mean, &self.bus, &self.load_power];
        cols.iter().all(|c| c.iter().all(|x| x.is_finite()))
            && [&self.v, &self.i, &self.p, &self.v_ref, &self.i_ref, &self.p_ref]
                .iter()
                .all(|pair| pair.iter().all(|c| c.iter().all(|x| x.is_finite())))
    }
}

enum Controller {
    Off,
    Conventional(ConventionalController),
    Cascade(CascadeController, f64),
}

impl Controller {
    fn set_active(&mut self, active: bool) {
        match self {
            Controller::Off => {}
            Controller::Conventional(c) => c.set_active(active),
            Controller::Cascade(c, _) => c.set_active(active),
        }
    }

    fn integrator_ratio(&self) -> f64 {
        let ratio = |(i, l): (f64, f64)| if l.is_finite() && l > 0.0 { i.abs() / l } else { 0.0 };
        match self {
            Controller::Off => 0.0,
            Controller::Conventional(c) => c.integrators().map(ratio).fold(0.0, f64::max),
            Controller::Cascade(c, _) => c.integrators().map(ratio).fold(0.0, f64::max),
        }
    }
}

/// Runs one scenario. Identical scenarios give bit-identical results.
pub fn run(scenario: &Scenario) -> Result<SimResult, SimError> {
    scenario.validate()?;
    let grid = &scenario.grid;
    let vgn = grid.nominal_bus_voltage;
    let w = grid.weights();
    let weights = [w[0], w[1]];
    let ratings: Vec<f64> = grid.converters.iter().map(|c| c.rated_power).collect();
    let limits = SecondaryLimits::from_ratings(
        vgn,
        &ratings,
        scenario.clamps.voltage_fraction,
        scenario.clamps.power_factor,
    );

    let mut controller = match &scenario.control {
        ControlSetup::Off => Controller::Off,
        ControlSetup::Conventional(s) => {
            Controller::Conventional(ConventionalController::new(s.clone(), w.clone(), &limits))
        }
        ControlSetup::Cascade { scheme, demand } => {
            Controller::Cascade(CascadeController::new(scheme.clone(), &limits), *demand)
        }
    };
    let mut plant = GridPlant::new(grid, scenario.plant_dt)?;
    let mut links: [CommChannel<(f64, f64)>; 2] = [
        CommChannel::new(scenario.comm_delay),
        CommChannel::new(scenario.comm_delay),
    ];
    let refs = ConventionalRefs::deviation(2);

    let n = scenario.plant_steps();
    let ratio = scenario.control_ratio();
    let dt_c = scenario.control_dt;
    let mut out = SimResult {
        weights,
        nominal_voltage: vgn,
        ..Default::default()
    };
    let reserve = |v: &mut Vec<f64>| v.reserve_exact(n + 1);
    for col in [&mut out.time, &mut out.v_mean, &mut out.bus, &mut out.load_power] {
        reserve(col);
    }

    let mut v_ref = [0.0; 2];
    let mut p_ref = [0.0; 2];
    let mut active = None;
    for k in 0..=n {
        let t = k as f64 * scenario.plant_dt;
        let load = scenario.load.power_at(t);
        plant.set_load_current(load / vgn);

        if k % ratio == 0 {
            let o = plant.outputs(v_ref);
            let now_active = t >= scenario.activation_time - 1e-9;
            if active != Some(now_active) {
                controller.set_active(now_active);
                active = Some(now_active);
            }
            let seen = [links[0].exchange((o.v[0], o.i[0])), links[1].exchange((o.v[1], o.i[1]))];
            let view = |i: usize, scale: f64| {
                let (vj, ij) = seen[1 - i];
                ConverterView {
                    own: scale * o.i[i],
                    total: scale * (o.i[i] + ij),
                    bus_voltage: 0.5 * (o.v[i] + vj),
                }
            };
            match &mut controller {
                Controller::Off => {}
                Controller::Conventional(c) => {
                    let r = c.step(&[view(0, 1.0), view(1, 1.0)], &refs, dt_c);
                    v_ref = [r[0], r[1]];
                }
                Controller::Cascade(c, demand) => {
                    let r = c.step(&[view(0, vgn), view(1, vgn)], *demand, dt_c);
                    v_ref = [r[0], r[1]];
                    p_ref = [c.power_refs()[0], c.power_refs()[1]];
                }
            }
            out.integrator_peak_ratio = out.integrator_peak_ratio.max(controller.integrator_ratio());
        }

        let o = plant.outputs(v_ref);
        let total = o.i[0] + o.i[1];
        out.time.push(t);
        out.v_mean.push(0.5 * (o.v[0] + o.v[1]));
        out.bus.push(o.bus);
        out.load_power.push(load);
        for i in 0..2 {
            out.v[i].push(o.v[i]);
            out.i[i].push(o.i[i]);
            out.p[i].push(vgn * o.i[i]);
            out.v_ref[i].push(v_ref[i]);
            out.i_ref[i].push(weights[i] * total);
            out.p_ref[i].push(p_ref[i]);
        }

        if k < n {
            plant.advance(v_ref);
            let state = plant.state();
            if !plant.is_finite() || state.iter().any(|x| x.abs() > DIVERGENCE_LIMIT) {
                return Err(SimError::Diverged {
                    time: t + scenario.plant_dt,
                    state,
                });
            }
        }
    }
    Ok(out)
}

/// Runs independent scenarios, in parallel when `exec` allows.
pub fn run_many(scenarios: &[Scenario], exec: Execution) -> Vec<Result<SimResult, SimError>> {
    exec.map(scenarios.len(), |k| run(&scenarios[k]))
}
