//! Discrete secondary controllers and the inter-controller link.

pub mod comm;
pub mod pi;
pub mod schemes;

pub use comm::CommChannel;
pub use pi::{pi_step, PiController, PiGains, PiState};
pub use schemes::{
    CascadeController, CascadeScheme, ConventionalController, ConventionalRefs, ConventionalScheme, ConverterView,
    SecondaryLimits,
};
