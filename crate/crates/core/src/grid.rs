//! Small-signal model of a two-source DC microgrid.
//!
//! Each source is a converter whose closed voltage loop is a first-order lag,
//! connected to a common bus through an R-L cable. Loads enter only as a
//! power disturbance mapped through the nominal bus voltage.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::PiGains;
use crate::tf::{Polynomial, TransferFunction};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("the grid model supports exactly two sources, got {0}")]
    TwoSourceOnly(usize),
    #[error("converter index {index} out of range for {count} converters")]
    BadIndex { index: usize, count: usize },
    #[error("invalid grid parameter: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CableParams {
    /// Ω
    pub resistance: f64,
    /// H
    pub inductance: f64,
}

impl CableParams {
    /// `R + L s`
    pub fn impedance(&self) -> Polynomial {
        Polynomial::linear(self.resistance, self.inductance)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConverterParams {
    /// W
    pub rated_power: f64,
    /// s
    pub voltage_loop_tau: f64,
    pub cable: CableParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub converters: Vec<ConverterParams>,
    /// V
    pub nominal_bus_voltage: f64,
    /// V
    pub fixed_voltage_reference: f64,
}

impl Default for GridConfig {
    /// The 400 V laboratory grid: 4 kW and 2 kW converters, 0.5 Ω / 3 mH
    /// cables, 5 ms voltage loops.
    fn default() -> Self {
        let cable = CableParams {
            resistance: 0.5,
            inductance: 0.003,
        };
        Self {
            converters: vec![
                ConverterParams {
                    rated_power: 4000.0,
                    voltage_loop_tau: 0.005,
                    cable,
                },
                ConverterParams {
                    rated_power: 2000.0,
                    voltage_loop_tau: 0.005,
                    cable,
                },
            ],
            nominal_bus_voltage: 400.0,
            fixed_voltage_reference: 400.0,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.nominal_bus_voltage > 0.0) {
            return Err(GridError::Invalid(format!(
                "nominal_bus_voltage must be > 0, got {}",
                self.nominal_bus_voltage
            )));
        }
        if self.converters.len() < 2 {
            return Err(GridError::TwoSourceOnly(self.converters.len()));
        }
        for (i, c) in self.converters.iter().enumerate() {
            if !(c.rated_power > 0.0) {
                return Err(GridError::Invalid(format!("converters[{i}].rated_power must be > 0")));
            }
            if !(c.voltage_loop_tau > 0.0) {
                return Err(GridError::Invalid(format!(
                    "converters[{i}].voltage_loop_tau must be > 0"
                )));
            }
            if !(c.cable.resistance > 0.0) || !(c.cable.inductance > 0.0) {
                return Err(GridError::Invalid(format!(
                    "converters[{i}] cable resistance and inductance must be > 0"
                )));
            }
        }
        Ok(())
    }

    /// Both sources, or an error if the grid is not a two-source grid.
    pub fn pair(&self) -> Result<(&ConverterParams, &ConverterParams), GridError> {
        match self.converters.as_slice() {
            [a, b] => Ok((a, b)),
            other => Err(GridError::TwoSourceOnly(other.len())),
        }
    }

    pub fn converter(&self, index: usize) -> Result<&ConverterParams, GridError> {
        self.converters.get(index).ok_or(GridError::BadIndex {
            index,
            count: self.converters.len(),
        })
    }

    /// Rated-power sharing weights `P_ir / Σ P_kr`.
    pub fn weights(&self) -> Vec<f64> {
        compute_weights(&self.converters.iter().map(|c| c.rated_power).collect::<Vec<_>>())
    }

    /// Copy of the grid with converter `index`'s cable replaced.
    pub fn with_cable(&self, index: usize, cable: CableParams) -> Self {
        let mut g = self.clone();
        g.converters[index].cable = cable;
        g
    }
}

/// `w_i = P_ir / Σ P_kr`.
pub fn compute_weights(ratings: &[f64]) -> Vec<f64> {
    let total: f64 = ratings.iter().sum();
    ratings.iter().map(|p| p / total).collect()
}

/// How the bus-voltage tuning plant treats the inner power loop.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoltagePlantMode {
    /// Power PI, converter lag and cable divider in open-loop series.
    #[default]
    AsWritten,
    /// Inner power loop closed through the local cable before the divider.
    ClosedInner,
}

impl VoltagePlantMode {
    pub fn label(&self) -> &'static str {
        match self {
            Self::AsWritten => "as-written",
            Self::ClosedInner => "closed-inner",
        }
    }
}

impl std::str::FromStr for VoltagePlantMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "as-written" => Ok(Self::AsWritten),
            "closed-inner" => Ok(Self::ClosedInner),
            other => Err(format!(
                "unknown plant mode `{other}` (expected as-written | closed-inner)"
            )),
        }
    }
}

/// `1 / (1 + τ s)`
pub fn converter_voltage_tf(c: &ConverterParams) -> TransferFunction {
    TransferFunction::first_order_lag(c.voltage_loop_tau)
}

/// `ΔP_i/ΔV_i* = G_vi(s) · V_gn / (R_i + L_i s)`
pub fn power_plant_tf(grid: &GridConfig, index: usize) -> Result<TransferFunction, GridError> {
    let c = grid.converter(index)?;
    let cable = TransferFunction::new(Polynomial::constant(grid.nominal_bus_voltage), c.cable.impedance())
        .map_err(|e| GridError::Invalid(e.to_string()))?;
    Ok(converter_voltage_tf(c).series(&cable))
}

/// Weights `(W1, W2)` with `ΔVg = W1·ΔV1 + W2·ΔV2`:
/// `W1 = Z2/(Z1+Z2)`, `W2 = Z1/(Z1+Z2)`.
pub fn bus_voltage_from_source_voltages(grid: &GridConfig) -> Result<(TransferFunction, TransferFunction), GridError> {
    let (a, b) = grid.pair()?;
    let z1 = a.cable.impedance();
    let z2 = b.cable.impedance();
    let sum = &z1 + &z2;
    let w1 = TransferFunction::new(z2, sum.clone()).map_err(|e| GridError::Invalid(e.to_string()))?;
    let w2 = TransferFunction::new(z1, sum).map_err(|e| GridError::Invalid(e.to_string()))?;
    Ok((w1.reduced(), w2.reduced()))
}

/// `ΔVg/ΔP = −(1/V_gn) · Z1 Z2 / (Z1 + Z2)`. Improper by one degree.
pub fn bus_voltage_from_load_change(grid: &GridConfig) -> Result<TransferFunction, GridError> {
    let (a, b) = grid.pair()?;
    let z1 = a.cable.impedance();
    let z2 = b.cable.impedance();
    let num = (&z1 * &z2).scale(-1.0 / grid.nominal_bus_voltage);
    TransferFunction::new(num, &z1 + &z2)
        .map(TransferFunction::reduced)
        .map_err(|e| GridError::Invalid(e.to_string()))
}

/// Three-input linear block `(ΔV1, ΔV2, ΔP) → ΔVg` built by superposition.
#[derive(Clone, Debug, PartialEq)]
pub struct BusVoltageRelation {
    pub from_v1: TransferFunction,
    pub from_v2: TransferFunction,
    pub from_load: TransferFunction,
}

impl BusVoltageRelation {
    /// `ΔVg(s)` for input phasors at `s`.
    pub fn eval(&self, s: Complex64, dv1: Complex64, dv2: Complex64, dp: Complex64) -> Complex64 {
        self.from_v1.eval(s) * dv1 + self.from_v2.eval(s) * dv2 + self.from_load.eval(s) * dp
    }

    /// Steady-state `ΔVg` for constant inputs.
    pub fn dc(&self, dv1: f64, dv2: f64, dp: f64) -> f64 {
        self.eval(Complex64::new(0.0, 0.0), dv1.into(), dv2.into(), dp.into())
            .re
    }
}

pub fn total_bus_voltage(grid: &GridConfig) -> Result<BusVoltageRelation, GridError> {
    let (from_v1, from_v2) = bus_voltage_from_source_voltages(grid)?;
    Ok(BusVoltageRelation {
        from_v1,
        from_v2,
        from_load: bus_voltage_from_load_change(grid)?,
    })
}

/// `ΔP_i = (ΔV_i − ΔVg) · V_gn / (R_i + L_i s)` for each source.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerExchange {
    pub admittance: [TransferFunction; 2],
}

impl PowerExchange {
    pub fn eval(&self, index: usize, s: Complex64, dv: Complex64, dvg: Complex64) -> Complex64 {
        self.admittance[index].eval(s) * (dv - dvg)
    }

    pub fn dc(&self, index: usize, dv: f64, dvg: f64) -> f64 {
        self.eval(index, Complex64::new(0.0, 0.0), dv.into(), dvg.into()).re
    }
}

pub fn power_exchange(grid: &GridConfig) -> Result<PowerExchange, GridError> {
    let (a, b) = grid.pair()?;
    let y = |c: &ConverterParams| {
        TransferFunction::new(Polynomial::constant(grid.nominal_bus_voltage), c.cable.impedance())
            .map_err(|e| GridError::Invalid(e.to_string()))
    };
    Ok(PowerExchange {
        admittance: [y(a)?, y(b)?],
    })
}

/// Open-loop plant seen by the bus-voltage PI of converter `index`:
/// `(K_pP + K_iP/s) · G_vi(s) · Z_j / (Z_1 + Z_2)`, with `j` the other source.
pub fn voltage_loop_plant_tf(
    grid: &GridConfig,
    index: usize,
    power_pi: &PiGains,
    mode: VoltagePlantMode,
) -> Result<TransferFunction, GridError> {
    let (a, b) = grid.pair()?;
    let (own, other) = match index {
        0 => (a, b),
        1 => (b, a),
        _ => return Err(GridError::BadIndex { index, count: 2 }),
    };
    let divider = TransferFunction::new(other.cable.impedance(), &a.cable.impedance() + &b.cable.impedance())
        .map_err(|e| GridError::Invalid(e.to_string()))?
        .reduced();
    let pi = power_pi.transfer_function();
    let gv = converter_voltage_tf(own);
    let forward = pi.series(&gv);
    let inner = match mode {
        VoltagePlantMode::AsWritten => forward,
        VoltagePlantMode::ClosedInner => {
            let cable = TransferFunction::new(Polynomial::constant(grid.nominal_bus_voltage), own.cable.impedance())
                .map_err(|e| GridError::Invalid(e.to_string()))?;
            forward
                .feedback(&cable)
                .map_err(|e| GridError::Invalid(e.to_string()))?
        }
    };
    Ok(inner.series(&divider))
}
