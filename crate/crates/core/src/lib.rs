//! Camera-LiDAR extrinsic calibration as a bi-objective search over alignment error
//! and evaluation cost.

pub mod analysis;
pub mod baselines;
pub mod data;
pub mod error;
pub mod evolution;
pub mod features;
pub mod geometry;
pub mod kdtree;
pub mod objectives;
pub mod problem;

pub use error::{Error, Result};
pub use evolution::{evolve, EvolutionConfig, EvolutionResult, ParetoArchive, Problem};
pub use geometry::{CameraIntrinsics, PointCloud, RigidTransform};
pub use objectives::{ChamferNormalization, CostMode, ObjectiveVector, WeightPair};
pub use problem::{CalibrationBounds, CalibrationProblem, CalibrationScene, CalibrationVector};
