//! Transfer operators, holonomic measures, entropy and pressure for
//! weighted iterated function systems on `[0,1]`.
//!
//! The crate is generic over the scalar type through [`scalar::Real`]
//! (implemented for `f32` and `f64`); the aliases below fix `f64`, which all
//! default tolerances are calibrated for.

pub mod error;
pub mod expr;
pub mod grid;
pub mod holonomic;
pub mod operator;
pub mod scalar;
pub mod sim;
pub mod thermo;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default grid resolution (cells; `n + 1` nodes).
pub const DEFAULT_GRID_N: usize = 1024;
/// Default power-iteration tolerance.
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-10;
/// Default power-iteration cap.
pub const DEFAULT_SPECTRAL_MAX_ITER: usize = 100_000;
/// Default descent tolerance for the entropy objective.
pub const DEFAULT_DESCENT_TOL: f64 = 1e-8;
/// Default descent iteration cap.
pub const DEFAULT_DESCENT_MAX_ITER: usize = 5000;

/// `f64` grid function.
pub type GridFunction = grid::GridFunction<f64>;
/// `f64` node measure.
pub type GridMeasure = grid::GridMeasure<f64>;
/// `f64` weighted system.
pub type WeightedSystem = operator::WeightedSystem<f64>;
/// `f64` weight scheme.
pub type Weights = operator::Weights<f64>;
/// `f64` transfer matrix.
pub type TransferMatrix = operator::TransferMatrix<f64>;
/// `f64` spectral triple.
pub type SpectralTriple = operator::SpectralTriple<f64>;
/// `f64` orbit measure.
pub type OrbitMeasure = holonomic::OrbitMeasure<f64>;
/// `f64` lifted measure.
pub type LiftedMeasure = holonomic::LiftedMeasure<f64>;
/// `f64` holonomic measure.
pub type HolonomicMeasure = holonomic::HolonomicMeasure<f64>;
/// `f64` entropy reference function.
pub type Psi = thermo::Psi<f64>;
/// `f64` descent options.
pub type DescentOptions = thermo::DescentOptions<f64>;
/// `f64` entropy report.
pub type EntropyReport = thermo::EntropyReport<f64>;
/// `f64` pressure report.
pub type PressureReport = thermo::PressureReport<f64>;
/// `f64` equilibrium report.
pub type EquilibriumReport = thermo::EquilibriumReport<f64>;
/// `f64` chaos-game trajectory.
pub type Trajectory = sim::Trajectory<f64>;
