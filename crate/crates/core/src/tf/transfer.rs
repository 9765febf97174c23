use std::fmt;

use num_complex::Complex64;

use super::poly::Polynomial;
use super::roots::{roots, RootError};
use super::TfError;

/// Relative tolerance under which a numerator root and a denominator root
/// are considered the same factor and cancelled.
pub const CANCELLATION_TOLERANCE: f64 = 1e-9;

/// A SISO rational transfer function `num(s) / den(s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferFunction {
    num: Polynomial,
    den: Polynomial,
}

impl TransferFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self, TfError> {
        if den.is_zero() {
            return Err(TfError::ZeroDenominator);
        }
        Ok(Self { num, den })
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self, TfError> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn constant(k: f64) -> Self {
        Self {
            num: Polynomial::constant(k),
            den: Polynomial::one(),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// `k / s`
    pub fn integrator(k: f64) -> Self {
        Self {
            num: Polynomial::constant(k),
            den: Polynomial::s(),
        }
    }

    /// `1 / (1 + tau s)`
    pub fn first_order_lag(tau: f64) -> Self {
        Self {
            num: Polynomial::one(),
            den: Polynomial::linear(1.0, tau),
        }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_proper(&self) -> bool {
        self.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval(s) / self.den.eval(s)
    }

    /// `g(jω)`
    pub fn response_at(&self, omega: f64) -> Complex64 {
        self.eval(Complex64::new(0.0, omega))
    }

    /// `num(0)/den(0)`; infinite when the denominator has a root at the origin.
    pub fn dc_gain(&self) -> f64 {
        self.num.eval_real(0.0) / self.den.eval_real(0.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    pub fn series(&self, other: &TransferFunction) -> Self {
        Self {
            num: &self.num * &other.num,
            den: &self.den * &other.den,
        }
        .reduced()
    }

    /// Sum of two transfer functions (parallel connection).
    pub fn parallel(&self, other: &TransferFunction) -> Self {
        if self.den == other.den {
            return Self {
                num: &self.num + &other.num,
                den: self.den.clone(),
            }
            .reduced();
        }
        Self {
            num: &(&self.num * &other.den) + &(&other.num * &self.den),
            den: &self.den * &other.den,
        }
        .reduced()
    }

    /// Negative-feedback closure `self / (1 + self·feedback)`.
    pub fn feedback(&self, feedback: &TransferFunction) -> Result<Self, TfError> {
        let num = &self.num * &feedback.den;
        let den = &(&self.den * &feedback.den) + &(&self.num * &feedback.num);
        if den.is_zero() {
            return Err(TfError::AlgebraicLoop);
        }
        Ok(Self { num, den }.reduced())
    }

    pub fn poles(&self) -> Result<Vec<Complex64>, RootError> {
        roots(&self.den)
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>, RootError> {
        if self.num.is_zero() {
            return Ok(Vec::new());
        }
        roots(&self.num)
    }

    /// Cancel numerator/denominator factors whose roots coincide within
    /// [`CANCELLATION_TOLERANCE`] (relative). Anything looser is kept.
    pub fn reduced(self) -> Self {
        if self.num.is_zero() {
            return Self {
                num: Polynomial::zero(),
                den: Polynomial::one(),
            };
        }
        if self.num.degree() == 0 || self.den.degree() == 0 {
            return self;
        }
        let (Ok(zs), Ok(ps)) = (roots(&self.num), roots(&self.den)) else {
            return self;
        };
        let common = common_roots(&zs, &ps);
        if common.is_empty() {
            return self;
        }
        let factor = Polynomial::from_roots(&common);
        let (num, _) = self.num.div_rem(&factor);
        let (den, _) = self.den.div_rem(&factor);
        Self { num, den }
    }
}

fn same_root(a: Complex64, b: Complex64) -> bool {
    (a - b).norm() <= CANCELLATION_TOLERANCE * a.norm().max(b.norm())
}

/// Multiset intersection of two root lists. Conjugate pairs are matched as a
/// unit so the cancelled factor stays real.
fn common_roots(zeros: &[Complex64], poles: &[Complex64]) -> Vec<Complex64> {
    let mut taken = vec![false; poles.len()];
    let mut out = Vec::new();
    for &z in zeros.iter().filter(|z| z.im >= 0.0) {
        let hit = poles
            .iter()
            .enumerate()
            .find(|&(k, &p)| !taken[k] && p.im >= 0.0 && same_root(z, p));
        let Some((k, &p)) = hit else { continue };
        if p.im == 0.0 && z.im == 0.0 {
            taken[k] = true;
            out.push(Complex64::new(0.5 * (z.re + p.re), 0.0));
        } else {
            let conj = poles
                .iter()
                .enumerate()
                .find(|&(j, &q)| !taken[j] && j != k && q.im < 0.0 && same_root(q, p.conj()));
            if let Some((j, _)) = conj {
                taken[k] = true;
                taken[j] = true;
                let mid = 0.5 * (z + p);
                out.push(mid);
                out.push(mid.conj());
            }
        }
    }
    out
}

/// Series connection `g1·g2` with exact common-factor cleanup.
pub fn tf_series(g1: &TransferFunction, g2: &TransferFunction) -> TransferFunction {
    g1.series(g2)
}

/// Negative-feedback loop `forward / (1 + forward·feedback)`.
pub fn tf_feedback(forward: &TransferFunction, feedback: &TransferFunction) -> Result<TransferFunction, TfError> {
    forward.feedback(feedback)
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}
