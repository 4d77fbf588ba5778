pub mod adjoint;
pub mod analysis;
pub mod cli;
pub mod config;
pub mod domain;
pub mod dtn;
pub mod error;
pub mod linalg;
pub mod numerics;
pub mod objective;
pub mod optimize;
pub mod scalar;
pub mod solver;
pub mod source;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real};

/// Double-precision instances of the generic types.
pub mod f64 {
    pub type Complex = crate::Cplx<f64>;
    pub type Grid = crate::domain::Grid<f64>;
    pub type AdmissibleBounds = crate::domain::AdmissibleBounds<f64>;
    pub type DesignField = crate::domain::DesignField<f64>;
    pub type ModalTrace = crate::source::ModalTrace<f64>;
    pub type DtnMatrix = crate::dtn::DtnMatrix<f64>;
    pub type FloquetSolution = crate::solver::FloquetSolution<f64>;
    pub type GradientField = crate::adjoint::GradientField<f64>;
    pub type AlphaQuadrature = crate::objective::AlphaQuadrature<f64>;
    pub type FocusingProblem = crate::objective::FocusingProblem<f64>;
    pub type OptimizerConfig = crate::optimize::OptimizerConfig<f64>;
    pub type OptimizerState = crate::optimize::OptimizerState<f64>;
    pub type EnergyBalance = crate::analysis::EnergyBalance<f64>;
    pub type ImageMetrics = crate::analysis::ImageMetrics<f64>;
    pub type ExperimentConfig = crate::config::ExperimentConfig<f64>;
}
