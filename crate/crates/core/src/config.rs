//! Laboratory configuration file. Every section and key is optional and
//! defaults to the 400 V two-source laboratory; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{CascadeScheme, ConventionalScheme, PiGains};
use crate::grid::{CableParams, ConverterParams, GridConfig, VoltagePlantMode};
use crate::sim::{ClampSettings, ControlSetup, LoadProfile, Scenario};
use crate::stability::{max_resistance_bound, ImpedanceSweep};
use crate::tuner::TuningSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config value `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub grid: GridSection,
    pub scheme: SchemeSection,
    pub tuning: TuningSection,
    pub scenario: ScenarioSection,
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub nominal_bus_voltage: f64,
    pub fixed_voltage_reference: f64,
    pub rated_power: Vec<f64>,
    pub voltage_loop_tau: Vec<f64>,
    pub cable_resistance: Vec<f64>,
    pub cable_inductance: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            nominal_bus_voltage: 400.0,
            fixed_voltage_reference: 400.0,
            rated_power: vec![4000.0, 2000.0],
            voltage_loop_tau: vec![0.005, 0.005],
            cable_resistance: vec![0.5, 0.5],
            cable_inductance: vec![0.003, 0.003],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    #[default]
    Cascade,
    Conventional,
    Off,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConventionalVariant {
    #[default]
    Low,
    High,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: SchemeKind,
    /// W
    pub demand: f64,
    pub power_pi: PiGains,
    pub bus_voltage_pi: PiGains,
    /// Ω
    pub droop: f64,
    pub conventional_current_pi: PiGains,
    pub conventional_low_voltage_pi: PiGains,
    pub conventional_high_voltage_pi: PiGains,
    /// Which conventional voltage PI `simulate` uses.
    pub conventional_variant: ConventionalVariant,
    pub voltage_clamp_fraction: f64,
    pub power_clamp_factor: f64,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            kind: SchemeKind::Cascade,
            demand: 0.0,
            power_pi: PiGains::new(0.001, 0.130),
            bus_voltage_pi: PiGains::new(142.9, 563.8),
            droop: 0.5,
            conventional_current_pi: PiGains::new(0.4, 52.0),
            conventional_low_voltage_pi: PiGains::new(0.2, 1.0),
            conventional_high_voltage_pi: PiGains::new(1.0, 20.0),
            conventional_variant: ConventionalVariant::Low,
            voltage_clamp_fraction: 0.1,
            power_clamp_factor: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodePlant {
    /// Converter plus cable, from voltage set point to power.
    #[default]
    Power,
    /// Plant seen by the bus-voltage PI.
    Voltage,
    /// Configured power PI times the power plant.
    PowerLoop,
    /// Configured bus-voltage PI times the voltage plant.
    VoltageLoop,
    /// Constant 1, for checking the export path.
    Unity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSection {
    pub mode: VoltagePlantMode,
    /// 1-based converter number.
    pub converter: usize,
    pub power_crossover: f64,
    pub power_margin: f64,
    pub voltage_crossover: f64,
    pub voltage_margin: f64,
    pub bode_plant: BodePlant,
    pub bode_omega_min: f64,
    pub bode_omega_max: f64,
    pub bode_points: usize,
}

impl Default for TuningSection {
    fn default() -> Self {
        Self {
            mode: VoltagePlantMode::AsWritten,
            converter: 1,
            power_crossover: 100.0,
            power_margin: 70.0,
            voltage_crossover: 10.0,
            voltage_margin: 70.0,
            bode_plant: BodePlant::Power,
            bode_omega_min: 1e-2,
            bode_omega_max: 1e5,
            bode_points: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub activation_time: f64,
    pub duration: f64,
    pub plant_dt: f64,
    pub control_dt: f64,
    pub comm_delay_periods: usize,
    /// `[time s, total load W]` steps.
    pub load: Vec<[f64; 2]>,
    /// ITAE window length, s.
    pub itae_window: f64,
    pub settling_band_percent: f64,
    /// Write every n-th plant sample to the time-series file.
    pub csv_stride: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            activation_time: 5.0,
            duration: 25.0,
            plant_dt: 1e-4,
            control_dt: 1e-3,
            comm_delay_periods: 1,
            load: vec![[0.0, 2000.0], [20.0, 6000.0]],
            itae_window: 2.0,
            settling_band_percent: 2.0,
            csv_stride: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub r_min: f64,
    /// Ω; when absent, `regulation_ratio · V_gn / rated_current`.
    pub r_max: Option<f64>,
    pub ratio_r_over_l: f64,
    pub steps: usize,
    pub regulation_ratio: f64,
    pub rated_current: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            r_min: 0.1,
            r_max: None,
            ratio_r_over_l: 0.5 / 0.003,
            steps: 50,
            regulation_ratio: 0.05,
            rated_current: 10.0,
        }
    }
}

/// One transient event scored by the scenario tools.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub label: String,
    pub time: f64,
    /// End of the window in which settling is judged.
    pub settle_until: f64,
}

impl LabConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    /// Effective configuration with every default spelled out.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid_config()?;
        self.power_spec()?;
        self.voltage_spec()?;
        self.converter_index()?;
        self.sweep()?;
        self.scenario(self.control_setup()?)?;
        let t = &self.tuning;
        if !(t.bode_omega_min > 0.0 && t.bode_omega_min < t.bode_omega_max && t.bode_omega_max.is_finite()) {
            return Err(invalid(
                "tuning.bode_omega_min",
                "need 0 < bode_omega_min < bode_omega_max",
            ));
        }
        if t.bode_points < 2 {
            return Err(invalid("tuning.bode_points", "must be >= 2"));
        }
        Ok(())
    }

    pub fn grid_config(&self) -> Result<GridConfig, ConfigError> {
        let g = &self.grid;
        let n = g.rated_power.len();
        if n != 2 {
            return Err(invalid(
                "grid.rated_power",
                format!("exactly two converters are supported, got {n}"),
            ));
        }
        for (name, v) in [
            ("grid.voltage_loop_tau", &g.voltage_loop_tau),
            ("grid.cable_resistance", &g.cable_resistance),
            ("grid.cable_inductance", &g.cable_inductance),
        ] {
            if v.len() != n {
                return Err(invalid(name, format!("needs {n} values, got {}", v.len())));
            }
        }
        let checks = [
            ("grid.nominal_bus_voltage", vec![g.nominal_bus_voltage]),
            ("grid.fixed_voltage_reference", vec![g.fixed_voltage_reference]),
            ("grid.rated_power", g.rated_power.clone()),
            ("grid.voltage_loop_tau", g.voltage_loop_tau.clone()),
            ("grid.cable_resistance", g.cable_resistance.clone()),
            ("grid.cable_inductance", g.cable_inductance.clone()),
        ];
        for (name, vals) in checks {
            if let Some(bad) = vals.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(invalid(name, format!("must be finite and > 0, got {bad}")));
            }
        }
        Ok(GridConfig {
            converters: (0..n)
                .map(|i| ConverterParams {
                    rated_power: g.rated_power[i],
                    voltage_loop_tau: g.voltage_loop_tau[i],
                    cable: CableParams {
                        resistance: g.cable_resistance[i],
                        inductance: g.cable_inductance[i],
                    },
                })
                .collect(),
            nominal_bus_voltage: g.nominal_bus_voltage,
            fixed_voltage_reference: g.fixed_voltage_reference,
        })
    }

    /// Zero-based index of the converter used for tuning and Bode export.
    pub fn converter_index(&self) -> Result<usize, ConfigError> {
        match self.tuning.converter {
            c @ 1..=2 => Ok(c - 1),
            c => Err(invalid("tuning.converter", format!("must be 1 or 2, got {c}"))),
        }
    }

    fn spec(field: &str, omega: f64, margin: f64) -> Result<TuningSpec, ConfigError> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid(
                &format!("tuning.{field}_crossover"),
                format!("must be > 0, got {omega}"),
            ));
        }
        if !(margin > 0.0 && margin < 180.0) {
            return Err(invalid(
                &format!("tuning.{field}_margin"),
                format!("must lie in (0, 180), got {margin}"),
            ));
        }
        Ok(TuningSpec::new(omega, margin))
    }

    pub fn power_spec(&self) -> Result<TuningSpec, ConfigError> {
        Self::spec("power", self.tuning.power_crossover, self.tuning.power_margin)
    }

    pub fn voltage_spec(&self) -> Result<TuningSpec, ConfigError> {
        Self::spec("voltage", self.tuning.voltage_crossover, self.tuning.voltage_margin)
    }

    fn check_gains(field: &str, g: &PiGains) -> Result<(), ConfigError> {
        if g.is_valid() {
            Ok(())
        } else {
            Err(invalid(field, format!("gains must be finite with ki >= 0, got {g:?}")))
        }
    }

    pub fn conventional_scheme(&self, variant: ConventionalVariant) -> Result<ControlSetup, ConfigError> {
        let s = &self.scheme;
        if !(s.droop >= 0.0 && s.droop.is_finite()) {
            return Err(invalid(
                "scheme.droop",
                format!("must be finite and >= 0, got {}", s.droop),
            ));
        }
        Self::check_gains("scheme.conventional_current_pi", &s.conventional_current_pi)?;
        let (field, voltage_pi) = match variant {
            ConventionalVariant::Low => ("scheme.conventional_low_voltage_pi", s.conventional_low_voltage_pi),
            ConventionalVariant::High => ("scheme.conventional_high_voltage_pi", s.conventional_high_voltage_pi),
        };
        Self::check_gains(field, &voltage_pi)?;
        Ok(ControlSetup::Conventional(ConventionalScheme {
            droop: vec![s.droop; 2],
            voltage_pi,
            current_pi: s.conventional_current_pi,
        }))
    }

    pub fn cascade_scheme(&self) -> Result<ControlSetup, ConfigError> {
        let s = &self.scheme;
        Self::check_gains("scheme.power_pi", &s.power_pi)?;
        Self::check_gains("scheme.bus_voltage_pi", &s.bus_voltage_pi)?;
        if !s.demand.is_finite() {
            return Err(invalid("scheme.demand", "must be finite"));
        }
        Ok(ControlSetup::Cascade {
            scheme: CascadeScheme::uniform(s.power_pi, s.bus_voltage_pi, self.grid_config()?.weights()),
            demand: s.demand,
        })
    }

    /// Control setup selected by `scheme.kind`.
    pub fn control_setup(&self) -> Result<ControlSetup, ConfigError> {
        match self.scheme.kind {
            SchemeKind::Cascade => self.cascade_scheme(),
            SchemeKind::Conventional => self.conventional_scheme(self.scheme.conventional_variant),
            SchemeKind::Off => Ok(ControlSetup::Off),
        }
    }

    pub fn scenario(&self, control: ControlSetup) -> Result<Scenario, ConfigError> {
        let s = &self.scenario;
        let sc = &self.scheme;
        if !(sc.voltage_clamp_fraction > 0.0) {
            return Err(invalid("scheme.voltage_clamp_fraction", "must be > 0"));
        }
        if !(sc.power_clamp_factor > 0.0) {
            return Err(invalid("scheme.power_clamp_factor", "must be > 0"));
        }
        if !(s.itae_window > 0.0 && s.itae_window.is_finite()) {
            return Err(invalid("scenario.itae_window", "must be > 0"));
        }
        if !(s.settling_band_percent > 0.0 && s.settling_band_percent < 100.0) {
            return Err(invalid("scenario.settling_band_percent", "must lie in (0, 100)"));
        }
        if s.csv_stride == 0 {
            return Err(invalid("scenario.csv_stride", "must be >= 1"));
        }
        let load = LoadProfile::steps(&s.load.iter().map(|e| (e[0], e[1])).collect::<Vec<_>>());
        let scenario = Scenario {
            grid: self.grid_config()?,
            control,
            load,
            activation_time: s.activation_time,
            duration: s.duration,
            plant_dt: s.plant_dt,
            control_dt: s.control_dt,
            comm_delay: s.comm_delay_periods,
            clamps: ClampSettings {
                voltage_fraction: sc.voltage_clamp_fraction,
                power_factor: sc.power_clamp_factor,
            },
        };
        scenario.validate().map_err(|e| invalid("scenario", e.to_string()))?;
        for ev in self.events() {
            if ev.time + s.itae_window > s.duration + 1e-9 {
                return Err(invalid(
                    "scenario.itae_window",
                    format!(
                        "window after the {} event at {} s runs past the duration",
                        ev.label, ev.time
                    ),
                ));
            }
        }
        Ok(scenario)
    }

    /// Activation, then every load change after it.
    pub fn events(&self) -> Vec<ScenarioEvent> {
        let s = &self.scenario;
        let mut times = vec![("activation".to_string(), s.activation_time)];
        let mut prev = None;
        for e in &s.load {
            if e[0] > s.activation_time && prev.is_some_and(|p| p != e[1]) {
                times.push((format!("load-step@{}s", e[0]), e[0]));
            }
            prev = Some(e[1]);
        }
        let ends: Vec<f64> = times
            .iter()
            .skip(1)
            .map(|t| t.1)
            .chain(std::iter::once(s.duration))
            .collect();
        times
            .into_iter()
            .zip(ends)
            .filter(|((_, t), _)| *t < s.duration)
            .map(|((label, time), settle_until)| ScenarioEvent {
                label,
                time,
                settle_until,
            })
            .collect()
    }

    pub fn sweep(&self) -> Result<ImpedanceSweep, ConfigError> {
        let w = &self.sweep;
        if !(w.rated_current > 0.0) {
            return Err(invalid("sweep.rated_current", "must be > 0"));
        }
        let sweep = ImpedanceSweep {
            r_min: w.r_min,
            r_max: w.r_max.unwrap_or_else(|| self.resistance_bound()),
            ratio_r_over_l: w.ratio_r_over_l,
            steps: w.steps,
        };
        sweep.validate().map_err(|e| invalid("sweep", e.to_string()))?;
        Ok(sweep)
    }

    pub fn resistance_bound(&self) -> f64 {
        max_resistance_bound(
            self.sweep.regulation_ratio,
            self.grid.nominal_bus_voltage,
            self.sweep.rated_current,
        )
    }
}
