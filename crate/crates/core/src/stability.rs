//! Closed-loop pole trajectories under cable-impedance variation.
//!
//! Only the first source's cable changes; its R/L ratio is held fixed and the
//! controller gains stay at their nominal design.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::PiGains;
use crate::exec::Execution;
use crate::grid::{power_plant_tf, voltage_loop_plant_tf, CableParams, GridConfig, GridError, VoltagePlantMode};
use crate::tf::{logspace, RootError, TransferFunction};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StabilityError {
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("root finding failed at R1 = {r1} Ω: {source}")]
    Roots { r1: f64, source: RootError },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpedanceSweep {
    /// Ω
    pub r_min: f64,
    /// Ω
    pub r_max: f64,
    /// Ω/H, held constant along the sweep.
    pub ratio_r_over_l: f64,
    pub steps: usize,
}

impl Default for ImpedanceSweep {
    fn default() -> Self {
        Self {
            r_min: 0.1,
            r_max: 2.0,
            ratio_r_over_l: 0.5 / 0.003,
            steps: 50,
        }
    }
}

impl ImpedanceSweep {
    pub fn validate(&self) -> Result<(), StabilityError> {
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(StabilityError::InvalidSweep(format!(
                "need 0 < r_min < r_max, got r_min = {}, r_max = {}",
                self.r_min, self.r_max
            )));
        }
        if !(self.ratio_r_over_l > 0.0 && self.ratio_r_over_l.is_finite()) {
            return Err(StabilityError::InvalidSweep(format!(
                "ratio_r_over_l must be > 0, got {}",
                self.ratio_r_over_l
            )));
        }
        if self.steps < 2 {
            return Err(StabilityError::InvalidSweep(format!(
                "steps must be >= 2, got {}",
                self.steps
            )));
        }
        Ok(())
    }

    /// Log-spaced cable parameters from `r_min` to `r_max` inclusive.
    pub fn cables(&self) -> Vec<CableParams> {
        logspace(self.r_min, self.r_max, self.steps)
            .into_iter()
            .map(|r| CableParams {
                resistance: r,
                inductance: r / self.ratio_r_over_l,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocusStep {
    pub r1: f64,
    pub l1: f64,
    pub poles: Vec<Complex64>,
    pub stable: bool,
}

impl LocusStep {
    /// Pole with the largest real part; the upper one of a conjugate pair.
    pub fn dominant_pole(&self) -> Option<Complex64> {
        dominant(&self.poles)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocusResult {
    pub steps: Vec<LocusStep>,
    /// `trajectories[k][s]` is pole `k` at sweep step `s`.
    pub trajectories: Vec<Vec<Complex64>>,
    /// Steps where nearest-neighbour pairing was ambiguous.
    pub crossings: Vec<usize>,
}

impl LocusResult {
    pub fn all_stable(&self) -> bool {
        self.steps.iter().all(|s| s.stable)
    }

    pub fn unstable_steps(&self) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.stable)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn terminal_dominant_pole(&self) -> Option<Complex64> {
        self.steps.last().and_then(LocusStep::dominant_pole)
    }
}

fn dominant(poles: &[Complex64]) -> Option<Complex64> {
    poles
        .iter()
        .copied()
        .max_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)))
}

/// Poles of the unity-feedback loop around `C·G`, from `den + num` of the
/// open loop without any cancellation.
pub fn closed_loop_poles(controller: &PiGains, plant: &TransferFunction) -> Result<Vec<Complex64>, RootError> {
    let c = controller.transfer_function();
    let num = c.num() * plant.num();
    let den = c.den() * plant.den();
    crate::tf::roots(&(&den + &num))
}

fn locus_step(
    r1: f64,
    l1: f64,
    open_loop: Result<(PiGains, TransferFunction), GridError>,
) -> Result<LocusStep, StabilityError> {
    let (gains, plant) = open_loop?;
    let poles = closed_loop_poles(&gains, &plant).map_err(|source| StabilityError::Roots { r1, source })?;
    let stable = poles.iter().all(|p| p.re < 0.0);
    if !stable {
        log::warn!("unstable closed loop at R1 = {r1} Ω");
    }
    Ok(LocusStep { r1, l1, poles, stable })
}

fn sweep<F>(grid: &GridConfig, sweep: &ImpedanceSweep, exec: Execution, build: F) -> Result<LocusResult, StabilityError>
where
    F: Fn(&GridConfig) -> Result<(PiGains, TransferFunction), GridError> + Sync + Send,
{
    sweep.validate()?;
    grid.pair()?;
    let cables = sweep.cables();
    let steps = exec
        .map(cables.len(), |k| {
            let cable = cables[k];
            let g = grid.with_cable(0, cable);
            locus_step(cable.resistance, cable.inductance, build(&g))
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let (trajectories, crossings) = pair_poles(&steps);
    Ok(LocusResult {
        steps,
        trajectories,
        crossings,
    })
}

/// Power loop: PI around the converter-plus-cable plant.
pub fn sweep_power_loop(
    grid: &GridConfig,
    gains: &PiGains,
    sweep_spec: &ImpedanceSweep,
    exec: Execution,
) -> Result<LocusResult, StabilityError> {
    sweep(grid, sweep_spec, exec, |g| Ok((*gains, power_plant_tf(g, 0)?)))
}

/// Bus-voltage loop: outer PI around the voltage-loop plant of source 1.
pub fn sweep_voltage_loop(
    grid: &GridConfig,
    power_gains: &PiGains,
    voltage_gains: &PiGains,
    mode: VoltagePlantMode,
    sweep_spec: &ImpedanceSweep,
    exec: Execution,
) -> Result<LocusResult, StabilityError> {
    sweep(grid, sweep_spec, exec, |g| {
        Ok((*voltage_gains, voltage_loop_plant_tf(g, 0, power_gains, mode)?))
    })
}

/// Greedy nearest-neighbour continuation of poles across steps. A step is
/// flagged when some pole was not matched to its own nearest successor.
fn pair_poles(steps: &[LocusStep]) -> (Vec<Vec<Complex64>>, Vec<usize>) {
    let Some(first) = steps.first() else {
        return (Vec::new(), Vec::new());
    };
    let mut traj: Vec<Vec<Complex64>> = first.poles.iter().map(|p| vec![*p]).collect();
    let mut crossings = Vec::new();
    for (s, step) in steps.iter().enumerate().skip(1) {
        let n = traj.len().min(step.poles.len());
        let ends: Vec<Complex64> = traj.iter().map(|t| *t.last().expect("nonempty")).collect();
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(ends.len() * step.poles.len());
        for (a, e) in ends.iter().enumerate() {
            for (b, p) in step.poles.iter().enumerate() {
                pairs.push(((e - p).norm(), a, b));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut used_a = vec![false; ends.len()];
        let mut used_b = vec![false; step.poles.len()];
        let mut matched = 0;
        let mut ambiguous = false;
        for (_, a, b) in pairs {
            if matched == n {
                break;
            }
            if used_a[a] || used_b[b] {
                continue;
            }
            let nearest = step
                .poles
                .iter()
                .enumerate()
                .min_by(|x, y| (ends[a] - x.1).norm().total_cmp(&(ends[a] - y.1).norm()))
                .map(|(i, _)| i);
            if nearest != Some(b) {
                ambiguous = true;
            }
            used_a[a] = true;
            used_b[b] = true;
            traj[a].push(step.poles[b]);
            matched += 1;
        }
        if ambiguous {
            crossings.push(s);
        }
    }
    (traj, crossings)
}

/// `R_max = regulation_ratio · V_gn / rated_current`.
pub fn max_resistance_bound(regulation_ratio: f64, nominal_voltage: f64, rated_current: f64) -> f64 {
    regulation_ratio * nominal_voltage / rated_current
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tuner::{design_pi, TuningSpec};

    const POWER: PiGains = PiGains::new(0.001, 0.130);
    const VOLTAGE: PiGains = PiGains::new(142.9, 563.8);

    #[test]
    fn resistance_bound() {
        assert!((max_resistance_bound(0.05, 400.0, 10.0) - 2.0).abs() < 1e-12);
        assert_eq!(max_resistance_bound(0.0, 400.0, 10.0), 0.0);
        assert!((max_resistance_bound(0.10, 400.0, 20.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_validation() {
        let s = ImpedanceSweep {
            steps: 1,
            ..ImpedanceSweep::default()
        };
        assert!(s.validate().is_err());
        let s = ImpedanceSweep {
            r_min: 3.0,
            ..ImpedanceSweep::default()
        };
        assert!(s.validate().is_err());
        ImpedanceSweep::default().validate().unwrap();
    }

    #[test]
    fn sweep_endpoints_and_ratio() {
        let c = ImpedanceSweep::default().cables();
        assert_eq!(c.len(), 50);
        assert!((c[0].resistance - 0.1).abs() < 1e-12);
        assert!((c[49].resistance - 2.0).abs() < 1e-12);
        for k in &c {
            assert!((k.resistance / k.inductance - 0.5 / 0.003).abs() < 1e-9);
        }
    }

    #[test]
    fn power_loop_stays_stable() {
        let r = sweep_power_loop(
            &GridConfig::default(),
            &POWER,
            &ImpedanceSweep::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert!(r.all_stable());
        assert_eq!(r.trajectories.len(), 3);
        assert!(r.trajectories.iter().all(|t| t.len() == 50));
    }

    #[test]
    fn nominal_step_matches_direct_closed_loop() {
        let grid = GridConfig::default();
        let sweep = ImpedanceSweep {
            r_min: 0.5,
            r_max: 0.6,
            ..Default::default()
        };
        let r = sweep_power_loop(&grid, &POWER, &sweep, Execution::Sequential).unwrap();
        let direct = POWER
            .transfer_function()
            .series(&power_plant_tf(&grid, 0).unwrap())
            .feedback(&TransferFunction::constant(1.0))
            .unwrap()
            .poles()
            .unwrap();
        for (a, b) in r.steps[0].poles.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-6 * b.norm().max(1.0));
        }
    }

    #[test]
    fn voltage_loop_stays_stable_with_conjugate_sets() {
        let r = sweep_voltage_loop(
            &GridConfig::default(),
            &POWER,
            &VOLTAGE,
            VoltagePlantMode::AsWritten,
            &ImpedanceSweep::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert!(r.all_stable());
        for s in &r.steps {
            let mut re: Vec<_> = s.poles.iter().map(|p| (p.re, p.im)).collect();
            let mut conj: Vec<_> = s.poles.iter().map(|p| (p.re, -p.im)).collect();
            re.sort_by(|a, b| a.partial_cmp(b).unwrap());
            conj.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (a, b) in re.iter().zip(&conj) {
                assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dominant_pair_reproduced_at_four_ohms() {
        let sweep = ImpedanceSweep {
            r_min: 2.0,
            r_max: 4.0,
            steps: 2,
            ..Default::default()
        };
        let grid = GridConfig::default();
        let p = sweep_power_loop(&grid, &POWER, &sweep, Execution::Sequential).unwrap();
        let d = p.terminal_dominant_pole().unwrap();
        assert!((d.re + 13.65).abs() < 0.05 * 13.65, "{d}");
        let v = sweep_voltage_loop(
            &grid,
            &POWER,
            &VOLTAGE,
            VoltagePlantMode::AsWritten,
            &sweep,
            Execution::Sequential,
        )
        .unwrap();
        let d = v.terminal_dominant_pole().unwrap();
        assert!(d.re < 0.0 && (d.norm() - 2.847).abs() < 0.1 * 2.847, "{d}");
    }

    #[test]
    fn execution_modes_agree() {
        let grid = GridConfig::default();
        let s = ImpedanceSweep::default();
        let a = sweep_power_loop(&grid, &POWER, &s, Execution::Sequential).unwrap();
        let b = sweep_power_loop(&grid, &POWER, &s, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn redesigned_gains_are_also_stable() {
        let grid = GridConfig::default();
        let t = design_pi(&power_plant_tf(&grid, 0).unwrap(), &TuningSpec::new(100.0, 70.0)).unwrap();
        let r = sweep_power_loop(&grid, &t.gains, &ImpedanceSweep::default(), Execution::Sequential).unwrap();
        assert!(r.all_stable());
    }

    #[test]
    fn unstable_steps_are_flagged_and_sweep_continues() {
        // a large integral gain destabilizes the power loop
        let r = sweep_power_loop(
            &GridConfig::default(),
            &PiGains::new(0.001, 500.0),
            &ImpedanceSweep::default(),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(r.steps.len(), 50);
        assert!(!r.all_stable());
    }

    #[test]
    fn pairing_follows_smooth_motion() {
        let steps: Vec<LocusStep> = (0..5)
            .map(|k| {
                let t = k as f64;
                LocusStep {
                    r1: t,
                    l1: t,
                    poles: vec![Complex64::new(-10.0 + t, 0.0), Complex64::new(-1.0 - 0.1 * t, 0.0)],
                    stable: true,
                }
            })
            .collect();
        let (traj, crossings) = pair_poles(&steps);
        assert!(crossings.is_empty());
        assert_eq!(traj[0][4], Complex64::new(-6.0, 0.0));
        assert_eq!(traj[1][4], Complex64::new(-1.4, 0.0));
    }
}
