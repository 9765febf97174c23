use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use super::{num, CommandOutput, LabError, OutputDir};
use crate::config::{BodePlant, LabConfig};
use crate::control::PiGains;
use crate::exec::Execution;
use crate::grid::{power_plant_tf, voltage_loop_plant_tf, GridConfig, VoltagePlantMode};
use crate::sim::{self, Band, ItaeReport, SimError, SimResult};
use crate::stability::{sweep_power_loop, sweep_voltage_loop, ImpedanceSweep, LocusResult, StabilityError};
use crate::tf::{freq_response, logspace, FrequencyPoint, TransferFunction};
use crate::tuner::{design_pi, loop_report, verify_design, DesignReport, TuneError, TunedController, TuningSpec};

pub(crate) fn tune_error(e: TuneError) -> LabError {
    match e {
        TuneError::InvalidSpec { .. } | TuneError::Infeasible { .. } => LabError::Validation(e.to_string()),
        TuneError::DegeneratePlant { .. } | TuneError::Verification(_) => LabError::Numerical(e.to_string()),
    }
}

pub(crate) fn sim_error(e: SimError) -> LabError {
    match e {
        SimError::Invalid(_) | SimError::Grid(_) => LabError::Validation(e.to_string()),
        SimError::Diverged { .. } => LabError::Numerical(e.to_string()),
    }
}

fn stability_error(e: StabilityError) -> LabError {
    match e {
        StabilityError::InvalidSweep(_) | StabilityError::Grid(_) => LabError::Validation(e.to_string()),
        StabilityError::Roots { .. } => LabError::Numerical(e.to_string()),
    }
}

fn grid_error(e: crate::grid::GridError) -> LabError {
    LabError::Validation(e.to_string())
}

fn bode_rows(points: &[FrequencyPoint]) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| vec![num(p.omega), num(p.magnitude_db), num(p.phase_deg)])
        .collect()
}

fn bode_grid(cfg: &LabConfig) -> Vec<f64> {
    logspace(
        cfg.tuning.bode_omega_min,
        cfg.tuning.bode_omega_max,
        cfg.tuning.bode_points,
    )
}

fn margin_comment(r: &DesignReport) -> String {
    match (r.crossover, r.phase_margin) {
        (Some(c), Some(m)) => format!("crossover_rad_s={} phase_margin_deg={}", num(c), num(m)),
        _ => format!("no_crossover: {}", r.failure.clone().unwrap_or_default()),
    }
}

#[derive(Serialize)]
struct ModeResult {
    mode: &'static str,
    tuned: Option<TunedController>,
    error: Option<String>,
}

#[derive(Serialize)]
struct LoopTuning {
    spec: TuningSpec,
    tuned: TunedController,
    /// Gains from `[scheme]` checked against the same spec.
    configured: DesignReport,
}

#[derive(Serialize)]
struct TuneReport {
    converter: usize,
    mode: &'static str,
    power: LoopTuning,
    voltage: LoopTuning,
    voltage_by_mode: Vec<ModeResult>,
}

/// Designs the power PI, then the bus-voltage PI on the plant built with
/// the freshly designed power PI.
pub fn cmd_tune(cfg: &LabConfig, mut out: OutputDir) -> Result<CommandOutput, LabError> {
    let grid = cfg.grid_config()?;
    let idx = cfg.converter_index()?;
    let mode = cfg.tuning.mode;
    let (pspec, vspec) = (cfg.power_spec()?, cfg.voltage_spec()?);

    let power_plant = power_plant_tf(&grid, idx).map_err(grid_error)?;
    let power = design_pi(&power_plant, &pspec).map_err(tune_error)?;
    let power_configured = verify_design(&power_plant, &cfg.scheme.power_pi, &pspec);

    let voltage_plant =
        |gains: &PiGains, m: VoltagePlantMode| voltage_loop_plant_tf(&grid, idx, gains, m).map_err(grid_error);
    let mut by_mode = Vec::new();
    let mut selected = None;
    for m in [VoltagePlantMode::AsWritten, VoltagePlantMode::ClosedInner] {
        let result = design_pi(&voltage_plant(&power.gains, m)?, &vspec);
        if m == mode {
            selected = Some(result.clone());
        }
        by_mode.push(match result {
            Ok(t) => ModeResult {
                mode: m.label(),
                tuned: Some(t),
                error: None,
            },
            Err(e) => ModeResult {
                mode: m.label(),
                tuned: None,
                error: Some(e.to_string()),
            },
        });
    }
    let voltage = selected.expect("selected mode is one of the two").map_err(tune_error)?;
    let voltage_configured = verify_design(
        &voltage_plant(&cfg.scheme.power_pi, mode)?,
        &cfg.scheme.bus_voltage_pi,
        &vspec,
    );

    let mut rows = vec![gain_row("power", "-", &power)];
    rows.extend(
        by_mode
            .iter()
            .filter_map(|r| r.tuned.as_ref().map(|t| gain_row("voltage", r.mode, t))),
    );
    out.write_csv(
        "tune_gains.csv",
        &[],
        &["loop", "mode", "kp", "ki", "crossover_rad_s", "phase_margin_deg"],
        rows,
    )?;

    let omegas = bode_grid(cfg);
    let power_loop = power.gains.transfer_function().series(&power_plant);
    let voltage_loop = voltage
        .gains
        .transfer_function()
        .series(&voltage_plant(&power.gains, mode)?);
    for (name, g, gains, spec) in [
        ("tune_bode_power.csv", &power_loop, &power.gains, &pspec),
        ("tune_bode_voltage.csv", &voltage_loop, &voltage.gains, &vspec),
    ] {
        let pts = freq_response(g, &omegas).map_err(|e| LabError::Numerical(e.to_string()))?;
        let check = loop_report(g, gains, spec);
        out.write_csv(
            name,
            &[margin_comment(&check)],
            &["omega", "mag_db", "phase_deg"],
            bode_rows(&pts),
        )?;
    }

    let report = TuneReport {
        converter: idx + 1,
        mode: mode.label(),
        power: LoopTuning {
            spec: pspec,
            tuned: power,
            configured: power_configured,
        },
        voltage: LoopTuning {
            spec: vspec,
            tuned: voltage,
            configured: voltage_configured,
        },
        voltage_by_mode: by_mode,
    };
    out.write_json("tune.json", &report)?;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "power loop   ({} rad/s, {} deg): kp = {:.6}, ki = {:.6}",
        pspec.crossover_omega, pspec.phase_margin, report.power.tuned.gains.kp, report.power.tuned.gains.ki
    );
    let _ = writeln!(
        s,
        "voltage loop ({} rad/s, {} deg, {}): kp = {:.4}, ki = {:.4}",
        vspec.crossover_omega,
        vspec.phase_margin,
        mode.label(),
        report.voltage.tuned.gains.kp,
        report.voltage.tuned.gains.ki
    );
    for r in &report.voltage_by_mode {
        match (&r.tuned, &r.error) {
            (Some(t), _) => {
                let _ = writeln!(
                    s,
                    "  voltage [{}]: kp = {:.4}, ki = {:.4}",
                    r.mode, t.gains.kp, t.gains.ki
                );
            }
            (None, Some(e)) => {
                let _ = writeln!(s, "  voltage [{}]: {e}", r.mode);
            }
            _ => {}
        }
    }
    for (name, c) in [
        ("power", &report.power.configured),
        ("voltage", &report.voltage.configured),
    ] {
        let text = match (c.crossover, c.phase_margin) {
            (Some(w), Some(m)) => format!("crossover {w:.3} rad/s, margin {m:.3} deg"),
            _ => c.failure.clone().unwrap_or_default(),
        };
        let _ = writeln!(s, "configured {name} gains ({}, {}): {text}", c.gains.kp, c.gains.ki);
    }
    Ok(out.finish(s, None))
}

fn gain_row(name: &str, mode: &str, t: &TunedController) -> Vec<String> {
    vec![
        name.into(),
        mode.into(),
        num(t.gains.kp),
        num(t.gains.ki),
        num(t.achieved_crossover),
        num(t.achieved_margin),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub(crate) struct EventScore {
    pub label: String,
    pub time: f64,
    pub itae: ItaeReport,
    /// Largest `|mean terminal voltage deviation|` until the next event, V.
    pub peak_v: f64,
    /// Settling of the mean terminal voltage into a band of the given
    /// percent of its own peak, s after the event.
    pub settling_v: Option<f64>,
}

pub(crate) fn score_events(cfg: &LabConfig, r: &SimResult) -> Result<Vec<EventScore>, LabError> {
    let numerical = |e: sim::MetricError| LabError::Numerical(e.to_string());
    cfg.events()
        .into_iter()
        .map(|ev| {
            let itae = sim::itae_report(r, ev.time, cfg.scenario.itae_window).map_err(numerical)?;
            let peak_v = sim::peak_deviation(&r.time, &r.v_mean, 0.0, ev.time, ev.settle_until).map_err(numerical)?;
            let settling_v = sim::settling_time(
                &r.time,
                &r.v_mean,
                0.0,
                Band::PercentOfPeak(cfg.scenario.settling_band_percent),
                ev.time,
                ev.settle_until,
            )
            .map_err(numerical)?
            .seconds();
            Ok(EventScore {
                label: ev.label,
                time: ev.time,
                itae,
                peak_v,
                settling_v,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct FinalState {
    time: f64,
    v_mean: f64,
    v_bus: f64,
    p1: f64,
    p2: f64,
    sharing_ratio: f64,
    load_power: f64,
}

#[derive(Serialize)]
struct SimulateReport {
    scheme: &'static str,
    events: Vec<EventScore>,
    final_state: FinalState,
    integrator_peak_ratio: f64,
    samples: usize,
}

pub fn cmd_simulate(cfg: &LabConfig, mut out: OutputDir) -> Result<CommandOutput, LabError> {
    let control = cfg.control_setup()?;
    let scheme = control.label();
    let scenario = cfg.scenario(control)?;
    let r = sim::run(&scenario).map_err(sim_error)?;

    let stride = cfg.scenario.csv_stride;
    let rows = (0..r.len()).step_by(stride).map(|k| {
        vec![
            num(r.time[k]),
            num(r.v[0][k]),
            num(r.v[1][k]),
            num(r.v_mean[k]),
            num(r.bus[k]),
            num(r.i[0][k]),
            num(r.i[1][k]),
            num(r.p[0][k]),
            num(r.p[1][k]),
            num(r.load_power[k]),
            num(r.v_ref[0][k]),
            num(r.v_ref[1][k]),
            num(r.i_ref[0][k]),
            num(r.i_ref[1][k]),
            num(r.p_ref[0][k]),
            num(r.p_ref[1][k]),
        ]
    });
    out.write_csv(
        "timeseries.csv",
        &[],
        &[
            "t",
            "v1",
            "v2",
            "v_mean",
            "v_bus",
            "i1",
            "i2",
            "p1",
            "p2",
            "load_power",
            "v_ref1",
            "v_ref2",
            "i_ref1",
            "i_ref2",
            "p_ref1",
            "p_ref2",
        ],
        rows,
    )?;

    let events = score_events(cfg, &r)?;
    let k = r.len() - 1;
    let report = SimulateReport {
        scheme,
        final_state: FinalState {
            time: r.time[k],
            v_mean: r.v_mean[k],
            v_bus: r.bus[k],
            p1: r.p[0][k],
            p2: r.p[1][k],
            sharing_ratio: r.p[0][k] / r.p[1][k],
            load_power: r.load_power[k],
        },
        integrator_peak_ratio: r.integrator_peak_ratio,
        samples: r.len(),
        events,
    };
    out.write_json("itae.json", &report)?;

    let mut s = format!("scheme: {scheme}\n");
    for e in &report.events {
        let settle = e.settling_v.map_or("not settled".to_string(), |t| format!("{t:.4} s"));
        let _ = writeln!(
            s,
            "{:<16} t = {:>6} s  ITAE_V = {:.6e}  ITAE_I = {:.6e}  settling ({}% of peak {:.4} V) = {settle}",
            e.label, e.time, e.itae.itae_v, e.itae.itae_i, cfg.scenario.settling_band_percent, e.peak_v
        );
    }
    let f = &report.final_state;
    let _ = writeln!(
        s,
        "final: mean terminal deviation {:.3e} V, bus node {:.4} V, P1/P2 = {:.5}",
        f.v_mean, f.v_bus, f.sharing_ratio
    );
    Ok(out.finish(s, None))
}

#[derive(Serialize)]
struct PoleOut {
    re: f64,
    im: f64,
    magnitude: f64,
}

impl From<Complex64> for PoleOut {
    fn from(p: Complex64) -> Self {
        Self {
            re: p.re,
            im: p.im,
            magnitude: p.norm(),
        }
    }
}

#[derive(Serialize)]
struct LocusSummary {
    all_stable: bool,
    unstable_steps: Vec<usize>,
    terminal_r1: f64,
    terminal_dominant_pole: Option<PoleOut>,
    pairing_crossings: Vec<usize>,
}

impl From<&LocusResult> for LocusSummary {
    fn from(r: &LocusResult) -> Self {
        Self {
            all_stable: r.all_stable(),
            unstable_steps: r.unstable_steps(),
            terminal_r1: r.steps.last().map_or(f64::NAN, |s| s.r1),
            terminal_dominant_pole: r.terminal_dominant_pole().map(PoleOut::from),
            pairing_crossings: r.crossings.clone(),
        }
    }
}

#[derive(Serialize)]
struct RootLocusReport {
    r1_max_bound: f64,
    sweep: ImpedanceSweep,
    mode: &'static str,
    power: LocusSummary,
    voltage: LocusSummary,
}

fn locus_rows(r: &LocusResult) -> Vec<Vec<String>> {
    r.steps
        .iter()
        .flat_map(|s| {
            s.poles
                .iter()
                .map(move |p| vec![num(s.r1), num(s.l1), num(p.re), num(p.im), s.stable.to_string()])
        })
        .collect()
}

pub fn cmd_rootlocus(cfg: &LabConfig, mut out: OutputDir, exec: Execution) -> Result<CommandOutput, LabError> {
    let grid: GridConfig = cfg.grid_config()?;
    let sweep = cfg.sweep()?;
    let mode = cfg.tuning.mode;
    let power = sweep_power_loop(&grid, &cfg.scheme.power_pi, &sweep, exec).map_err(stability_error)?;
    let voltage = sweep_voltage_loop(
        &grid,
        &cfg.scheme.power_pi,
        &cfg.scheme.bus_voltage_pi,
        mode,
        &sweep,
        exec,
    )
    .map_err(stability_error)?;
    let header = ["R1", "L1", "pole_re", "pole_im", "stable"];
    out.write_csv("rootlocus_power.csv", &[], &header, locus_rows(&power))?;
    out.write_csv("rootlocus_voltage.csv", &[], &header, locus_rows(&voltage))?;
    let report = RootLocusReport {
        r1_max_bound: cfg.resistance_bound(),
        sweep,
        mode: mode.label(),
        power: (&power).into(),
        voltage: (&voltage).into(),
    };
    out.write_json("rootlocus.json", &report)?;

    let mut s = format!(
        "R1 sweep [{}, {}] Ohm, {} steps, R/L = {:.4} (bound R1max = {} Ohm)\n",
        sweep.r_min, sweep.r_max, sweep.steps, sweep.ratio_r_over_l, report.r1_max_bound
    );
    for (name, l) in [("power", &report.power), ("voltage", &report.voltage)] {
        let verdict = if l.all_stable {
            "all stable"
        } else {
            "UNSTABLE steps present"
        };
        let pole = l.terminal_dominant_pole.as_ref().map_or("-".into(), |p| {
            format!("{:.4} {:+.4}i (|p| = {:.4})", p.re, p.im, p.magnitude)
        });
        let _ = writeln!(
            s,
            "{name:<8} loop: {verdict}; terminal dominant pole at R1 = {}: {pole}",
            l.terminal_r1
        );
    }
    Ok(out.finish(s, None))
}

#[derive(Serialize)]
struct BodeReport {
    plant: BodePlant,
    converter: usize,
    mode: &'static str,
    points: usize,
    margins: Option<DesignReport>,
}

/// Transfer function for a Bode selector, plus the spec to annotate
/// margins against when the selection is a loop.
pub fn bode_target(cfg: &LabConfig) -> Result<(TransferFunction, Option<(PiGains, TuningSpec)>), LabError> {
    let grid = cfg.grid_config()?;
    let idx = cfg.converter_index()?;
    let mode = cfg.tuning.mode;
    let s = &cfg.scheme;
    Ok(match cfg.tuning.bode_plant {
        BodePlant::Power => (power_plant_tf(&grid, idx).map_err(grid_error)?, None),
        BodePlant::Voltage => (
            voltage_loop_plant_tf(&grid, idx, &s.power_pi, mode).map_err(grid_error)?,
            None,
        ),
        BodePlant::PowerLoop => (
            s.power_pi
                .transfer_function()
                .series(&power_plant_tf(&grid, idx).map_err(grid_error)?),
            Some((s.power_pi, cfg.power_spec()?)),
        ),
        BodePlant::VoltageLoop => (
            s.bus_voltage_pi
                .transfer_function()
                .series(&voltage_loop_plant_tf(&grid, idx, &s.power_pi, mode).map_err(grid_error)?),
            Some((s.bus_voltage_pi, cfg.voltage_spec()?)),
        ),
        BodePlant::Unity => (TransferFunction::constant(1.0), None),
    })
}

pub fn cmd_bode(cfg: &LabConfig, mut out: OutputDir) -> Result<CommandOutput, LabError> {
    let (g, spec) = bode_target(cfg)?;
    let pts = freq_response(&g, &bode_grid(cfg)).map_err(|e| LabError::Numerical(e.to_string()))?;
    let margins = spec.map(|(gains, sp)| loop_report(&g, &gains, &sp));
    let comments: Vec<String> = margins.iter().map(margin_comment).collect();
    out.write_csv(
        "bode.csv",
        &comments,
        &["omega", "mag_db", "phase_deg"],
        bode_rows(&pts),
    )?;
    let report = BodeReport {
        plant: cfg.tuning.bode_plant,
        converter: cfg.converter_index()? + 1,
        mode: cfg.tuning.mode.label(),
        points: pts.len(),
        margins,
    };
    out.write_json("bode.json", &report)?;
    let mut s = format!("{:?} response, {} points\n", report.plant, report.points);
    if let Some(m) = &report.margins {
        let _ = writeln!(s, "{}", margin_comment(m));
    }
    Ok(out.finish(s, None))
}
