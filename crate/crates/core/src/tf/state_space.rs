//! Controllable-canonical state-space realization and exact zero-order-hold
//! discretization.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use super::transfer::TransferFunction;
use super::TfError;

/// `x' = A x + B u`, `y = C x + D u` for a single input and output.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

/// Exact ZOH discretization of a [`StateSpace`] at a fixed step.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteStateSpace {
    pub phi: DMatrix<f64>,
    pub gamma: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
    pub dt: f64,
}

impl StateSpace {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (jωI − A)^-1 B + D`
    pub fn response_at(&self, omega: f64) -> Complex64 {
        let n = self.order();
        if n == 0 {
            return Complex64::new(self.d, 0.0);
        }
        let s = Complex64::new(0.0, omega);
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.a[(i, j)], 0.0)
        });
        let rhs = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(self.b[i], 0.0));
        let Some(x) = m.lu().solve(&rhs) else {
            return Complex64::new(f64::INFINITY, 0.0);
        };
        let mut y = Complex64::new(self.d, 0.0);
        for i in 0..n {
            y += x[i] * self.c[i];
        }
        y
    }

    pub fn discretize(&self, dt: f64) -> DiscreteStateSpace {
        let (phi, gamma) = zoh(
            &self.a,
            &DMatrix::from_column_slice(self.order(), 1, self.b.as_slice()),
            dt,
        );
        DiscreteStateSpace {
            phi,
            gamma: gamma.column(0).into_owned(),
            c: self.c.clone(),
            d: self.d,
            dt,
        }
    }
}

impl DiscreteStateSpace {
    /// Advance one step with input `u` held constant; returns the output at
    /// the start of the step.
    pub fn step(&self, x: &mut DVector<f64>, u: f64) -> f64 {
        let y = (&self.c * &*x)[0] + self.d * u;
        let next = &self.phi * &*x + &self.gamma * u;
        *x = next;
        y
    }

    /// Response to a unit step applied at t = 0, sampled at `steps + 1` points.
    pub fn step_response(&self, steps: usize) -> Vec<f64> {
        let mut x = DVector::zeros(self.phi.nrows());
        let mut out = Vec::with_capacity(steps + 1);
        for _ in 0..steps {
            out.push(self.step(&mut x, 1.0));
        }
        out.push((&self.c * &x)[0] + self.d);
        out
    }
}

/// Exact ZOH discretization of `(A, B)` at step `dt`, via the exponential of
/// the augmented matrix `[[A, B], [0, 0]]·dt`.
pub fn zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let m = b.ncols();
    if n == 0 {
        return (DMatrix::zeros(0, 0), DMatrix::zeros(0, m));
    }
    let mut aug = DMatrix::<f64>::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = aug.exp();
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned())
}

/// Controllable-canonical realization of a proper transfer function.
pub fn realize(g: &TransferFunction) -> Result<StateSpace, TfError> {
    if !g.is_proper() {
        return Err(TfError::Improper {
            num_degree: g.num().degree(),
            den_degree: g.den().degree(),
        });
    }
    let lead = g.den().leading();
    let den: Vec<f64> = g.den().coeffs().iter().map(|c| c / lead).collect();
    let n = den.len() - 1;
    let mut num: Vec<f64> = g.num().coeffs().iter().map(|c| c / lead).collect();
    num.resize(n + 1, 0.0);

    let d = num[n];
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == n {
            -den[j]
        } else if j == i + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mut b = DVector::zeros(n);
    if n > 0 {
        b[n - 1] = 1.0;
    }
    let c = RowDVector::from_fn(n, |_, j| num[j] - d * den[j]);
    Ok(StateSpace { a, b, c, d })
}
