//! Design-based analysis of completely randomized experiments.
//!
//! Point estimators of the average treatment effect (difference in means,
//! pooled OLS adjustment, fully interacted adjustment and its weighted
//! variants), sandwich and Neyman variance estimators, finite-population
//! asymptotic variances and bias terms, and a deterministic randomization
//! simulator. Numeric code is generic over [`Real`]; the aliases below fix
//! the scalar to `f64`.

pub mod asymptotics;
pub mod combinatorics;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod sampling;
pub mod scalar;
pub mod simulate;
pub mod variance;

pub use error::{Error, Result};
pub use estimators::{AteEstimate, Contrast, EstimatorKind, ObservedData};
pub use linalg::{least_squares, DesignMatrix, FitResult, Matrix};
pub use scalar::Real;
pub use variance::{CiMethod, ConfidenceInterval, VarianceFlavor};

pub type Matrix64 = Matrix<f64>;
pub type FitResult64 = FitResult<f64>;
pub type ObservedData64 = ObservedData<f64>;
pub type AteEstimate64 = AteEstimate<f64>;
pub type ConfidenceInterval64 = ConfidenceInterval<f64>;

pub type Population64 = asymptotics::Population<f64>;
pub type FinitePopulation1D64 = sampling::FinitePopulation1D<f64>;
