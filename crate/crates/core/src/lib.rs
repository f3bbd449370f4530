//! Random walks in random environments on `Z^d`.
//!
//! The crate covers environment models (i.i.d., finite-range dependent,
//! Gibbsian and the deterministic north-east example), quenched and annealed
//! walk simulation, exact occupancy solves on finite volumes, Kalikow-type
//! drift diagnostics, estimators for the environment seen from the particle,
//! and numerical checks of Gibbs mixing inequalities.
//!
//! Exact kernels are generic over [`Scalar`], so they run in `f64`, `f32` or
//! exact rationals. Monte Carlo code works in `f64`.
//!
//! ```
//! use rwre::{EnvironmentModel, TransitionVector, FiniteVolume, Occupancy, occupancy, Site, Direction};
//!
//! let model = EnvironmentModel::constant(TransitionVector::nearest_1d(0.7)?, 0)?;
//! let env = model.realize(0)?;
//! let u = FiniteVolume::interval(-2, 2, 1)?;
//! let table: Occupancy = occupancy(&env, &u, Site::d1(0), &Direction::axis(1))?;
//! assert!((table.exit_mass() - 1.0).abs() < 1e-12);
//! # Ok::<(), rwre::Error>(())
//! ```

pub mod environment;
pub mod error;
pub mod experiment;
pub mod gibbs;
pub mod green;
pub mod kalikow;
pub mod lattice;
pub mod linalg;
pub mod pov;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod walk;

use num_rational::BigRational;

pub use environment::{
    check_ellipticity, marginal_draws, EllipticityReport, Environment, EnvironmentModel, Law, Quenched, Shifted,
    TableEnvironment, TransitionVector,
};
pub use error::{Error, Result};
pub use green::{
    exponential_moment, green_1d, green_column_1d, hitting_probability, occupancy, occupancy_with, FiniteVolume,
    GreenColumn, OccupancyOptions, OccupancyTable,
};
pub use kalikow::{
    ballisticity_check, effective_condition, kalikow_epsilon, kalikow_ratio, slab_occupancy_check,
    EffectiveConditionParams, KalikowReport,
};
pub use lattice::{Direction, LatticeBox, Site};
pub use scalar::{Real, Scalar};
pub use stats::{MeanEstimate, RatioEstimate};
pub use walk::{
    path_stats, run_annealed, run_quenched, velocity_estimate, EnsembleSpec, MixingConstants, Path, PathStats,
    StopRule,
};

/// Occupancy table in double precision.
pub type Occupancy = OccupancyTable<f64>;
/// Occupancy table in single precision.
pub type Occupancy32 = OccupancyTable<f32>;
/// Occupancy table in exact rational arithmetic.
pub type ExactOccupancy = OccupancyTable<BigRational>;
/// Conditional law table in double precision.
pub type ProbTable = gibbs::ProbTable<f64>;
/// Conditional law table in exact rational arithmetic.
pub type ExactProbTable = gibbs::ProbTable<BigRational>;
