//! Frequency response, gain crossover and phase margin.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::transfer::TransferFunction;
use super::TfError;

/// Lower edge of the default crossover search grid, rad/s.
pub const SEARCH_OMEGA_MIN: f64 = 1e-2;
/// Upper edge of the default crossover search grid, rad/s.
pub const SEARCH_OMEGA_MAX: f64 = 1e5;
/// Points in the default log-spaced search grid.
pub const SEARCH_POINTS: usize = 400;
/// Gain drop used by [`bandwidth`].
pub const BANDWIDTH_DROP_DB: f64 = 3.0;

const CROSSOVER_TOLERANCE_DB: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub omega: f64,
    pub magnitude_db: f64,
    pub phase_deg: f64,
    /// `true` when `ω` sits on a pole of the transfer function.
    pub singular: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopMargins {
    pub crossover: f64,
    pub phase_margin: f64,
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|k| {
                    if k == n - 1 {
                        hi
                    } else {
                        10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)
                    }
                })
                .collect()
        }
    }
}

fn arg_deg(z: Complex64) -> f64 {
    z.im.atan2(z.re).to_degrees()
}

fn wrap_180(mut d: f64) -> f64 {
    while d > 180.0 {
        d -= 360.0;
    }
    while d <= -180.0 {
        d += 360.0;
    }
    d
}

/// Continuous phase of `g(jω)` built from its factored form:
/// the sum of zero angles minus the sum of pole angles, plus −180° for a
/// negative gain. This is the anchor for unwrapping.
pub fn analytic_phase_deg(g: &TransferFunction, omega: f64) -> Result<f64, TfError> {
    let s = Complex64::new(0.0, omega);
    let mut phase = 0.0;
    for z in g.zeros()? {
        phase += arg_deg(s - z);
    }
    for p in g.poles()? {
        phase -= arg_deg(s - p);
    }
    if g.num().leading() / g.den().leading() < 0.0 {
        phase -= 180.0;
    }
    Ok(phase)
}

/// Bode samples of `g` on a strictly ascending grid of positive frequencies.
///
/// Phase is unwrapped cumulatively and anchored at the lowest frequency.
/// A frequency that lands on an imaginary-axis pole is returned with
/// `singular = true` and infinite magnitude instead of failing.
pub fn freq_response(g: &TransferFunction, omegas: &[f64]) -> Result<Vec<FrequencyPoint>, TfError> {
    if omegas.iter().any(|w| !(*w > 0.0) || !w.is_finite()) || omegas.windows(2).any(|p| p[1] <= p[0]) {
        return Err(TfError::InvalidFrequencyGrid);
    }
    let Some(&first) = omegas.first() else {
        return Ok(Vec::new());
    };
    let anchor = analytic_phase_deg(g, first)?;
    let den_scale = g.den().norm();

    let mut out = Vec::with_capacity(omegas.len());
    let mut prev_raw: Option<f64> = None;
    let mut phase = anchor;
    for &omega in omegas {
        let s = Complex64::new(0.0, omega);
        let d = g.den().eval(s);
        let scale = den_scale * omega.max(1.0).powi(g.den().degree() as i32);
        if d.norm() <= 1e-14 * scale {
            out.push(FrequencyPoint {
                omega,
                magnitude_db: f64::INFINITY,
                phase_deg: phase,
                singular: true,
            });
            prev_raw = None;
            continue;
        }
        let value = g.num().eval(s) / d;
        let raw = arg_deg(value);
        phase = match prev_raw {
            None if out.is_empty() => anchor,
            None => phase + wrap_180(raw - wrap_180(phase)),
            Some(p) => phase + wrap_180(raw - p),
        };
        prev_raw = Some(raw);
        out.push(FrequencyPoint {
            omega,
            magnitude_db: 20.0 * value.norm().log10(),
            phase_deg: phase,
            singular: false,
        });
    }
    Ok(out)
}

/// Lowest frequency in `[lo, hi]` where `|g(jω)|` crosses 0 dB.
pub fn gain_crossover_in(g: &TransferFunction, lo: f64, hi: f64, points: usize) -> Result<f64, TfError> {
    let db = |w: f64| 20.0 * g.response_at(w).norm().log10();
    let grid = logspace(lo, hi, points.max(2));
    let mut prev: Option<(f64, f64)> = None;
    for &w in &grid {
        let f = db(w);
        if !f.is_finite() {
            prev = None;
            continue;
        }
        if f == 0.0 {
            return Ok(w);
        }
        if let Some((wp, fp)) = prev {
            if fp.signum() != f.signum() {
                return Ok(bisect_log(&db, wp, w, fp));
            }
        }
        prev = Some((w, f));
    }
    Err(TfError::NoCrossover { lo, hi })
}

fn bisect_log(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    let mut mid = (a * b).sqrt();
    for _ in 0..200 {
        mid = (a * b).sqrt();
        let fm = f(mid);
        if fm.abs() < CROSSOVER_TOLERANCE_DB {
            break;
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    mid
}

/// Gain crossover on the default 400-point grid over `[1e-2, 1e5]` rad/s.
pub fn gain_crossover(g: &TransferFunction) -> Result<f64, TfError> {
    gain_crossover_in(g, SEARCH_OMEGA_MIN, SEARCH_OMEGA_MAX, SEARCH_POINTS)
}

/// `180° + ∠g(jω_c)` at the gain crossover, using the unwrapped phase.
pub fn phase_margin(g: &TransferFunction) -> Result<f64, TfError> {
    Ok(margins(g)?.phase_margin)
}

pub fn margins(g: &TransferFunction) -> Result<LoopMargins, TfError> {
    let crossover = gain_crossover(g)?;
    let phase = analytic_phase_deg(g, crossover)?;
    Ok(LoopMargins {
        crossover,
        phase_margin: 180.0 + phase,
    })
}

/// Frequency at which `|g|` has fallen [`BANDWIDTH_DROP_DB`] below its DC value.
pub fn bandwidth(g: &TransferFunction) -> Result<f64, TfError> {
    bandwidth_with_drop(g, BANDWIDTH_DROP_DB)
}

pub fn bandwidth_with_drop(g: &TransferFunction, drop_db: f64) -> Result<f64, TfError> {
    let dc = g.dc_gain().abs();
    if !dc.is_finite() || dc == 0.0 {
        return Err(TfError::NoFiniteDcGain);
    }
    let normalized = g.scale(10f64.powf(drop_db / 20.0) / dc);
    gain_crossover(&normalized)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plant() -> TransferFunction {
        TransferFunction::from_coeffs(&[400.0], &[1.0])
            .unwrap()
            .series(&TransferFunction::first_order_lag(0.005))
            .series(&TransferFunction::from_coeffs(&[1.0], &[0.5, 0.003]).unwrap())
    }

    #[test]
    fn unity_is_flat() {
        let pts = freq_response(&TransferFunction::constant(1.0), &logspace(0.1, 100.0, 5)).unwrap();
        for p in pts {
            assert_eq!(p.magnitude_db, 0.0);
            assert_eq!(p.phase_deg, 0.0);
        }
    }

    #[test]
    fn integrator_at_one_rad_per_second() {
        let p = freq_response(&TransferFunction::integrator(1.0), &[1.0]).unwrap()[0];
        assert!(p.magnitude_db.abs() < 1e-12);
        assert!((p.phase_deg + 90.0).abs() < 1e-12);
    }

    #[test]
    fn phase_is_unwrapped_past_minus_180() {
        // three poles at -1: phase runs to -270°
        let g = TransferFunction::from_coeffs(&[1.0], &[1.0, 3.0, 3.0, 1.0]).unwrap();
        let pts = freq_response(&g, &logspace(0.01, 1000.0, 200)).unwrap();
        let last = pts.last().unwrap().phase_deg;
        assert!((last + 270.0).abs() < 1.0, "{last}");
        for w in pts.windows(2) {
            assert!((w[1].phase_deg - w[0].phase_deg).abs() < 180.0);
        }
    }

    #[test]
    fn double_integrator_anchors_at_minus_180() {
        let g = TransferFunction::from_coeffs(&[100.0], &[0.0, 0.0, 1.0]).unwrap();
        let pts = freq_response(&g, &[1.0, 10.0]).unwrap();
        assert!((pts[0].phase_deg + 180.0).abs() < 1e-12);
        assert!((phase_margin(&g).unwrap()).abs() < 1e-9);
        assert!((gain_crossover(&g).unwrap() - 10.0).abs() < 1e-6);
    }

    #[test]
    fn pole_on_axis_is_flagged() {
        let g = TransferFunction::from_coeffs(&[1.0], &[4.0, 0.0, 1.0]).unwrap();
        let pts = freq_response(&g, &[1.0, 2.0, 3.0]).unwrap();
        assert!(pts[1].singular);
        assert!(!pts[0].singular && !pts[2].singular);
    }

    #[test]
    fn rejects_bad_grid() {
        let g = TransferFunction::constant(1.0);
        assert_eq!(freq_response(&g, &[1.0, 1.0]), Err(TfError::InvalidFrequencyGrid));
        assert_eq!(freq_response(&g, &[0.0, 1.0]), Err(TfError::InvalidFrequencyGrid));
    }

    #[test]
    fn crossover_of_scaled_integrator() {
        let g = TransferFunction::integrator(10.0);
        let wc = gain_crossover(&g).unwrap();
        assert!((wc - 10.0).abs() < 1e-6);
        assert!((20.0 * g.response_at(wc).norm().log10()).abs() < 1e-6);
        assert!((phase_margin(&g).unwrap() - 90.0).abs() < 1e-9);
    }

    #[test]
    fn bounded_gain_has_no_crossover() {
        let g = TransferFunction::first_order_lag(1.0);
        assert!(matches!(gain_crossover(&g), Err(TfError::NoCrossover { .. })));
    }

    #[test]
    fn power_plant_unity_gain_and_bandwidth() {
        // |G| = 1 where (1 + (0.005w)^2)(0.25 + (0.003w)^2) = 400^2, solved
        // as a quadratic in w^2 by hand.
        let (a, b, c) = (
            0.005f64.powi(2) * 0.003f64.powi(2),
            0.005f64.powi(2) * 0.25 + 0.003f64.powi(2),
            0.25 - 160000.0,
        );
        let w2 = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        let wc = gain_crossover(&plant()).unwrap();
        assert!((wc - w2.sqrt()).abs() < 1e-6 * wc, "{wc} vs {}", w2.sqrt());

        // -3 dB point of the same plant, same quadratic with the DC gain removed
        let k = 10f64.powf(0.3);
        let (a, b, c) = (
            0.005f64.powi(2) * 0.006f64.powi(2),
            0.005f64.powi(2) + 0.006f64.powi(2),
            1.0 - k,
        );
        let w2 = (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        let bw = bandwidth(&plant()).unwrap();
        assert!((bw - w2.sqrt()).abs() < 1e-6 * bw);
        assert!((bw - 116.6).abs() < 0.5);
    }

    #[test]
    fn bandwidth_needs_finite_dc_gain() {
        assert_eq!(
            bandwidth(&TransferFunction::integrator(1.0)),
            Err(TfError::NoFiniteDcGain)
        );
    }

    #[test]
    fn logspace_endpoints() {
        let g = logspace(1e-2, 1e5, 400);
        assert_eq!(g.len(), 400);
        assert_eq!(g[0], 1e-2);
        assert_eq!(g[399], 1e5);
    }
}
