//! Strategies and property checks shared by the proptest suite and the
//! acceptance harness.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use dcgrid_core::control::PiGains;
use dcgrid_core::grid::{
    bus_voltage_from_load_change, bus_voltage_from_source_voltages, power_plant_tf, total_bus_voltage, CableParams,
    ConverterParams, GridConfig,
};
use dcgrid_core::sim::{self, itae, ControlSetup, LoadProfile, Scenario};
use dcgrid_core::tf::{logspace, realize, Polynomial, TransferFunction};
use dcgrid_core::tuner::{design_pi, verify_design, TuningSpec};

pub type Check = Result<(), TestCaseError>;

pub fn rel_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn min_separation(roots: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in roots.iter().enumerate() {
        for b in &roots[i + 1..] {
            best = best.min((a - b).norm());
        }
    }
    best
}

/// Left-half-plane root sets closed under conjugation, degree 1..=`max_degree`,
/// with roots at least 0.5 apart.
pub fn stable_roots(max_degree: usize, max_mag: f64) -> impl Strategy<Value = Vec<Complex64>> {
    let pairs = max_degree / 2;
    (
        prop::collection::vec(-max_mag..-0.2f64, 0..=max_degree),
        prop::collection::vec((-max_mag..-0.2f64, 0.2..max_mag), 0..=pairs),
    )
        .prop_map(move |(reals, cplx)| {
            let mut r: Vec<Complex64> = Vec::new();
            for (re, im) in cplx {
                if r.len() + 2 <= max_degree {
                    r.push(Complex64::new(re, im));
                    r.push(Complex64::new(re, -im));
                }
            }
            for re in reals {
                if r.len() < max_degree {
                    r.push(Complex64::new(re, 0.0));
                }
            }
            r
        })
        .prop_filter("degree >= 1 and separated roots", |r| {
            !r.is_empty() && min_separation(r) > 0.5
        })
}

/// Random proper transfer function with a stable denominator of degree <= 4.
pub fn proper_tf() -> impl Strategy<Value = TransferFunction> {
    (
        stable_roots(4, 30.0),
        0.1..10.0f64,
        prop::collection::vec(-5.0..5.0f64, 1..=5),
    )
        .prop_map(|(roots, k, num)| {
            let den = Polynomial::from_roots(&roots).scale(k);
            let n = num.len().min(den.degree() + 1);
            TransferFunction::new(Polynomial::new(num[..n].to_vec()), den).unwrap()
        })
}

pub fn cable() -> impl Strategy<Value = CableParams> {
    (0.05..5.0f64, 1e-4..5e-2f64).prop_map(|(resistance, inductance)| CableParams { resistance, inductance })
}

pub fn grid() -> impl Strategy<Value = GridConfig> {
    (cable(), cable(), 100.0..1000.0f64, 1e-3..2e-2f64).prop_map(|(c1, c2, v, tau)| GridConfig {
        converters: vec![
            ConverterParams {
                rated_power: 4000.0,
                voltage_loop_tau: tau,
                cable: c1,
            },
            ConverterParams {
                rated_power: 2000.0,
                voltage_loop_tau: tau,
                cable: c2,
            },
        ],
        nominal_bus_voltage: v,
        fixed_voltage_reference: v,
    })
}

pub fn omegas() -> Vec<f64> {
    logspace(1e-2, 1e4, 37)
}

pub fn series_product(g1: &TransferFunction, g2: &TransferFunction) -> Check {
    let s = g1.series(g2);
    for w in omegas() {
        let expect = g1.response_at(w) * g2.response_at(w);
        if expect.norm() < 1e-200 {
            continue;
        }
        let e = rel_err(s.response_at(w), expect);
        prop_assert!(e < 1e-9, "series response off by {e:e} at {w} rad/s");
    }
    Ok(())
}

/// Companion-matrix eigenvalues from nalgebra as an independent root oracle.
pub fn companion_eigenvalues(p: &Polynomial) -> Vec<Complex64> {
    let c = p.coeffs();
    let n = c.len() - 1;
    let lead = c[n];
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == 0 {
            -c[n - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn poles_match_oracle(roots: &[Complex64]) -> Check {
    let p = Polynomial::from_roots(roots);
    let g = TransferFunction::new(Polynomial::one(), p.clone()).unwrap();
    let ours = g.poles().map_err(|e| TestCaseError::fail(e.to_string()))?;
    let mut oracle = companion_eigenvalues(&p);
    prop_assert_eq!(ours.len(), oracle.len());
    for q in &ours {
        let (k, d) = oracle
            .iter()
            .enumerate()
            .map(|(k, o)| (k, (o - q).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        prop_assert!(
            d <= 1e-6 * q.norm().max(1.0),
            "pole {q} vs oracle {} ({d:e})",
            oracle[k]
        );
        oracle.swap_remove(k);
    }
    Ok(())
}

pub fn realization_round_trip(g: &TransferFunction) -> Check {
    let ss = realize(g).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(ss.order(), g.den().degree());
    let peak = omegas()
        .into_iter()
        .map(|w| g.response_at(w).norm())
        .fold(0.0, f64::max);
    for w in omegas() {
        let expect = g.response_at(w);
        // deep in the roll-off the companion solve loses digits to cancellation
        let e = (ss.response_at(w) - expect).norm() / expect.norm().max(1e-6 * peak);
        prop_assert!(e < 1e-9, "realization off by {e:e} at {w} rad/s");
    }
    Ok(())
}

/// Step response simulated for twenty of the slowest time constants settles
/// at `num(0)/den(0)`.
pub fn step_reaches_dc_gain(roots: &[Complex64], k: f64) -> Check {
    let g = TransferFunction::new(Polynomial::constant(k), Polynomial::from_roots(roots)).unwrap();
    let slow = roots.iter().map(|r| -r.re).fold(f64::INFINITY, f64::min);
    let fast = roots.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let dt = 0.1 / fast;
    let steps = (20.0 / slow / dt).ceil() as usize;
    let y = realize(&g).unwrap().discretize(dt).step_response(steps);
    let last = *y.last().unwrap();
    let dc = g.dc_gain();
    prop_assert!((last - dc).abs() <= 1e-3 * dc.abs(), "final {last} vs DC {dc}");
    Ok(())
}

pub fn superposition_identity(grid: &GridConfig) -> Check {
    let rel = total_bus_voltage(grid).unwrap();
    let (w1, w2) = bus_voltage_from_source_voltages(grid).unwrap();
    let zl = bus_voltage_from_load_change(grid).unwrap();
    let (a, b, p) = (
        Complex64::new(0.7, -0.2),
        Complex64::new(-1.1, 0.4),
        Complex64::new(900.0, 0.0),
    );
    for w in omegas() {
        let s = Complex64::new(0.0, w);
        let parts = w1.eval(s) * a + w2.eval(s) * b + zl.eval(s) * p;
        let e = rel_err(rel.eval(s, a, b, p), parts);
        prop_assert!(e <= 1e-12, "superposition off by {e:e} at {w} rad/s");
    }
    Ok(())
}

pub fn divider_weights_sum_to_one(grid: &GridConfig) -> Check {
    let (w1, w2) = bus_voltage_from_source_voltages(grid).unwrap();
    for w in omegas() {
        let sum = w1.response_at(w) + w2.response_at(w);
        prop_assert!(
            (sum - Complex64::new(1.0, 0.0)).norm() <= 1e-12,
            "weights sum to {sum} at {w} rad/s"
        );
    }
    Ok(())
}

pub fn load_gain_negative_and_scales(grid: &GridConfig) -> Check {
    let zl = bus_voltage_from_load_change(grid).unwrap();
    prop_assert!(zl.dc_gain() < 0.0);
    let mut g2 = grid.clone();
    g2.nominal_bus_voltage *= 2.0;
    let (p1, p2) = (power_plant_tf(grid, 0).unwrap(), power_plant_tf(&g2, 0).unwrap());
    let zl2 = bus_voltage_from_load_change(&g2).unwrap();
    for w in omegas() {
        prop_assert!((p2.response_at(w).norm() / p1.response_at(w).norm() - 2.0).abs() < 1e-12);
        prop_assert!((zl2.response_at(w).norm() / zl.response_at(w).norm() - 0.5).abs() < 1e-12);
    }
    Ok(())
}

/// Stable second-order plant `k / (s² + a s + b)` and a feasible spec.
pub fn tuner_case() -> impl Strategy<Value = (TransferFunction, TuningSpec)> {
    (stable_roots(2, 50.0), 0.5..50.0f64, 0.05..0.95f64, 0.1..20.0f64).prop_filter_map(
        "feasible spec",
        |(roots, k, frac, w)| {
            let g = TransferFunction::new(Polynomial::constant(k), Polynomial::from_roots(&roots)).unwrap();
            let (lo, hi) = dcgrid_core::tuner::achievable_margins(&g, w);
            let (lo, hi) = (lo.max(1.0), hi.min(179.0));
            if hi - lo < 1.0 {
                return None;
            }
            Some((g, TuningSpec::new(w, lo + frac * (hi - lo))))
        },
    )
}

pub fn tuner_round_trip(g: &TransferFunction, spec: &TuningSpec) -> Check {
    let t = design_pi(g, spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let at = t.gains.transfer_function().series(g).response_at(spec.crossover_omega);
    prop_assert!((at.norm() - 1.0).abs() < 1e-6, "|L(jω_c)| = {}", at.norm());
    let margin = (180.0 + at.arg().to_degrees()).rem_euclid(360.0);
    prop_assert!(
        (margin - spec.phase_margin).abs() < 1e-6,
        "margin {margin} vs {}",
        spec.phase_margin
    );
    // the numerical crossover search may land on an earlier 0 dB crossing
    let r = verify_design(g, &t.gains, spec);
    if let (Some(dc), Some(dm)) = (r.crossover_delta, r.margin_delta) {
        if dc.abs() / spec.crossover_omega < 1e-6 {
            prop_assert!(dm.abs() < 1e-4, "searched margin off by {dm}");
        }
    }
    Ok(())
}

pub fn off_scenario(load: f64) -> Scenario {
    Scenario {
        load: LoadProfile::steps(&[(0.0, 0.0), (0.2, load)]),
        activation_time: 0.0,
        duration: 1.0,
        ..Scenario::laboratory_default(ControlSetup::Off)
    }
}

/// Doubling the load doubles every plant signal with controllers off.
pub fn plant_linearity(load: f64, grid: &GridConfig) -> Check {
    let mut a = off_scenario(load);
    a.grid = grid.clone();
    let mut b = a.clone();
    b.load = a.load.scaled(2.0);
    let (ra, rb) = (sim::run(&a).unwrap(), sim::run(&b).unwrap());
    let cols = |r: &sim::SimResult| [r.bus.clone(), r.i[0].clone(), r.i[1].clone(), r.v_mean.clone()];
    for (ca, cb) in cols(&ra).iter().zip(cols(&rb).iter()) {
        for (x, y) in ca.iter().zip(cb) {
            prop_assert!((y - 2.0 * x).abs() <= 1e-9 * (2.0 * x).abs().max(1e-9), "{y} vs 2×{x}");
        }
    }
    Ok(())
}

/// ITAE of `e^{-a(t - t0)}` over a 2 s window at 1 ms and 0.5 ms sampling:
/// the finer grid is closer to the exact integral and within 0.5% of the
/// coarse one.
pub fn itae_dt_halving(a: f64, t0: f64) -> Check {
    let window = 2.0;
    let exact = (1.0 - (1.0 + a * window) * (-a * window).exp()) / (a * a);
    let sample = |dt: f64| {
        let n = ((t0 + window) / dt).ceil() as usize + 2;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let e: Vec<f64> = t
            .iter()
            .map(|&x| if x < t0 { 0.0 } else { (-a * (x - t0)).exp() })
            .collect();
        itae(&t, &e, t0, window).unwrap()
    };
    let (coarse, fine) = (sample(1e-3), sample(5e-4));
    prop_assert!((fine - exact).abs() <= (coarse - exact).abs() + 1e-12);
    prop_assert!((fine - coarse).abs() / exact < 5e-3, "{coarse} vs {fine}");
    Ok(())
}

/// Two runs of the same scenario are bit-identical.
pub fn run_is_deterministic(scenario: &Scenario) -> Check {
    let (a, b) = (sim::run(scenario).unwrap(), sim::run(scenario).unwrap());
    prop_assert!(a == b, "runs differ");
    Ok(())
}

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

pub fn reference_power_pi() -> PiGains {
    PiGains::new(0.001, 0.130)
}

pub fn reference_voltage_pi() -> PiGains {
    PiGains::new(142.9, 563.8)
}
