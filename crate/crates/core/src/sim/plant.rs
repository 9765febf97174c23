//! Two sources feeding a current-sink load through R-L cables.
//!
//! States `[V1, V2, I1]` with `I2 = I_load − I1`, inputs `[V1*, V2*, I_load]`.
//! The load current is a forced split, so a step in it moves `I1` by
//! `L2/(L1+L2)` of the step at the same instant (flux through the loop is
//! conserved). Between steps the system is LTI and is advanced with its
//! exact zero-order-hold discretization.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::grid::{GridConfig, GridError};
use crate::tf::zoh;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlantOutputs {
    /// Source terminal voltages, V.
    pub v: [f64; 2],
    /// Cable currents, A.
    pub i: [f64; 2],
    /// Bus-node voltage, V.
    pub bus: f64,
}

#[derive(Clone, Debug)]
pub struct GridPlant {
    r: [f64; 2],
    l: [f64; 2],
    a: Matrix3<f64>,
    b: Matrix3<f64>,
    phi: Matrix3<f64>,
    gamma: Matrix3<f64>,
    x: Vector3<f64>,
    load_current: f64,
}

impl GridPlant {
    pub fn new(grid: &GridConfig, dt: f64) -> Result<Self, GridError> {
        let (c1, c2) = grid.pair()?;
        let r = [c1.cable.resistance, c2.cable.resistance];
        let l = [c1.cable.inductance, c2.cable.inductance];
        let (t1, t2) = (c1.voltage_loop_tau, c2.voltage_loop_tau);
        let ls = l[0] + l[1];
        #[rustfmt::skip]
        let a = Matrix3::new(
            -1.0 / t1, 0.0, 0.0,
            0.0, -1.0 / t2, 0.0,
            1.0 / ls, -1.0 / ls, -(r[0] + r[1]) / ls,
        );
        #[rustfmt::skip]
        let b = Matrix3::new(
            1.0 / t1, 0.0, 0.0,
            0.0, 1.0 / t2, 0.0,
            0.0, 0.0, r[1] / ls,
        );
        let (phi, gamma) = zoh(
            &DMatrix::from_iterator(3, 3, a.iter().copied()),
            &DMatrix::from_iterator(3, 3, b.iter().copied()),
            dt,
        );
        Ok(Self {
            r,
            l,
            a,
            b,
            phi: Matrix3::from_iterator(phi.iter().copied()),
            gamma: Matrix3::from_iterator(gamma.iter().copied()),
            x: Vector3::zeros(),
            load_current: 0.0,
        })
    }

    /// Applies a new load current, moving `I1` by its inductive share of the
    /// change.
    pub fn set_load_current(&mut self, current: f64) {
        let delta = current - self.load_current;
        if delta != 0.0 {
            self.x[2] += delta * self.l[1] / (self.l[0] + self.l[1]);
            self.load_current = current;
        }
    }

    pub fn load_current(&self) -> f64 {
        self.load_current
    }

    pub fn outputs(&self, v_ref: [f64; 2]) -> PlantOutputs {
        let u = Vector3::new(v_ref[0], v_ref[1], self.load_current);
        let di1 = (self.a.row(2) * self.x)[0] + (self.b.row(2) * u)[0];
        let i1 = self.x[2];
        PlantOutputs {
            v: [self.x[0], self.x[1]],
            i: [i1, self.load_current - i1],
            bus: self.x[0] - self.r[0] * i1 - self.l[0] * di1,
        }
    }

    /// One plant step with `v_ref` and the load held.
    pub fn advance(&mut self, v_ref: [f64; 2]) {
        let u = Vector3::new(v_ref[0], v_ref[1], self.load_current);
        self.x = self.phi * self.x + self.gamma * u;
    }

    pub fn state(&self) -> [f64; 3] {
        [self.x[0], self.x[1], self.x[2]]
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CableParams;

    #[test]
    fn load_step_settles_at_resistive_split() {
        let grid = GridConfig::default().with_cable(
            0,
            CableParams {
                resistance: 2.0,
                inductance: 0.012,
            },
        );
        let mut p = GridPlant::new(&grid, 1e-4).unwrap();
        p.set_load_current(10.0);
        // equal time constants: the split holds from the first instant
        assert!((p.outputs([0.0; 2]).i[0] - 2.0).abs() < 1e-12);
        for _ in 0..2000 {
            p.advance([0.0; 2]);
        }
        let o = p.outputs([0.0; 2]);
        assert!((o.i[0] - 2.0).abs() < 1e-9);
        assert!((o.bus + 4.0).abs() < 1e-9);
    }

    #[test]
    fn bus_node_is_consistent_from_both_sides() {
        let grid = GridConfig::default().with_cable(
            1,
            CableParams {
                resistance: 1.0,
                inductance: 0.001,
            },
        );
        let mut p = GridPlant::new(&grid, 1e-4).unwrap();
        p.set_load_current(5.0);
        let v_ref = [3.0, -1.0];
        for _ in 0..37 {
            p.advance(v_ref);
        }
        let o = p.outputs(v_ref);
        let di1 = (o.v[0] - o.v[1] - 0.5 * o.i[0] + 1.0 * o.i[1]) / 0.004;
        let from_2 = o.v[1] - 1.0 * o.i[1] - 0.001 * (-di1);
        assert!((o.bus - from_2).abs() < 1e-9);
    }

    #[test]
    fn sources_track_references_with_their_lag() {
        let mut p = GridPlant::new(&GridConfig::default(), 1e-4).unwrap();
        for _ in 0..50 {
            p.advance([1.0, 0.0]);
        }
        // 5 ms of a 5 ms lag
        let v1 = p.state()[0];
        assert!((v1 - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }
}
