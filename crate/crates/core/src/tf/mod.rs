//! Rational transfer-function algebra over real polynomials in `s`.

pub mod freq;
pub mod poly;
pub mod roots;
pub mod state_space;
pub mod transfer;

pub use freq::{
    analytic_phase_deg, bandwidth, freq_response, gain_crossover, logspace, margins, phase_margin, FrequencyPoint,
    LoopMargins,
};
pub use poly::{poly_mul, Polynomial};
pub use roots::{roots, RootError};
pub use state_space::{realize, zoh, DiscreteStateSpace, StateSpace};
pub use transfer::{tf_feedback, tf_series, TransferFunction};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TfError {
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("closed-loop denominator is identically zero (degenerate algebraic loop)")]
    AlgebraicLoop,
    #[error("transfer function is improper (numerator degree {num_degree} > denominator degree {den_degree})")]
    Improper { num_degree: usize, den_degree: usize },
    #[error("no 0 dB crossing in [{lo}, {hi}] rad/s")]
    NoCrossover { lo: f64, hi: f64 },
    #[error("frequencies must be positive, finite and strictly ascending")]
    InvalidFrequencyGrid,
    #[error("DC gain is zero or infinite")]
    NoFiniteDcGain,
    #[error(transparent)]
    Roots(#[from] RootError),
}

/// Poles of `g`: every root of its denominator.
pub fn poles(g: &TransferFunction) -> Result<Vec<num_complex::Complex64>, TfError> {
    Ok(g.poles()?)
}
