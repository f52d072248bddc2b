//! Domain adaptation of raw inertial sequences for pedestrian dead reckoning.
//!
//! A shared encoder maps IMU windows from any sensor placement into a common
//! latent sequence; per-domain generators translate between placements, and a
//! polar-vector predictor trained on one labelled placement is reused on
//! unlabelled ones. Predicted `(dl, dpsi)` steps are chained into planar
//! trajectories.

pub mod angle;
pub mod dataio;
pub mod error;
pub mod imu;
pub mod kv;
pub mod losses;
pub mod models;
pub mod nn;
pub mod synth;
pub mod tracking;
pub mod training;

pub use dataio::{DomainTag, LabelledWindow, NormStats, PolarVector, PoseSample, Window};
pub use error::{Error, Result};
pub use imu::{ImuSample, ImuSequence, NavState, UnitQuaternion, Vec3};
