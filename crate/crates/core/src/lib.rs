pub mod chebyshev;
pub mod error;
pub mod fit;
pub mod model;
pub mod nojump;
pub mod ode;
pub mod poly;
pub mod propagator;
pub mod quadrature;
pub mod series;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{Case, CoherenceVector, EigenSystem, InitialState, Kind, ModeParams, RampProtocol, Supermatrix};
pub use nojump::{GridCoefficient, NoJumpState, ScalingCollapse};
pub use propagator::{DefectRecord, Trajectory};
pub use series::{ConvergenceReport, PMState, SeriesCoefficient};
pub use sweep::{DensityRecord, ExponentFit, SweepPlan};
