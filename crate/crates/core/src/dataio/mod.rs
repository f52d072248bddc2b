//! Ingestion, windowing, labelling and normalization of IMU recordings.

mod csvio;
mod manifest;
mod norm;
mod split;
mod window;

pub use csvio::{load_imu_csv, load_pose_csv, write_imu_csv, write_pose_csv};
pub use manifest::DatasetManifest;
pub use norm::{fit_norm_stats, NormStats, STD_FLOOR};
pub use split::{split_dataset, SplitRatios};
pub use window::{label_window, make_windows, pose_at, polar_from_poses};

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::error::{Error, Result};

/// Number of channels per frame: three accelerations then three angular rates.
pub const CHANNELS: usize = 6;

/// Displacement magnitude and heading change over one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarVector {
    /// Planar displacement, m.
    pub dl: f64,
    /// Heading change, rad, in (-π, π].
    pub dpsi: f64,
}

impl PolarVector {
    /// Wraps the heading change; `dl` is taken as given.
    pub fn new(dl: f64, dpsi: f64) -> Self {
        Self {
            dl,
            dpsi: angle::wrap(dpsi),
        }
    }
}

/// Ground-truth planar pose at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

/// Name of a sensor placement context.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DomainTag(String);

impl DomainTag {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::usage("domain name must be non-empty"));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for DomainTag {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        Self::new(value)
    }
}

impl From<DomainTag> for String {
    fn from(tag: DomainTag) -> Self {
        tag.0
    }
}

impl std::fmt::Display for DomainTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Fixed-length run of frames cut from one recording.
///
/// Frames are stored row-major, `CHANNELS` values per frame, ordered
/// `ax, ay, az, wx, wy, wz`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    frames: Vec<f64>,
    pub domain: DomainTag,
    pub t_start: f64,
    /// Sample spacing, s.
    pub dt: f64,
}

impl Window {
    pub fn new(frames: Vec<f64>, domain: DomainTag, t_start: f64, dt: f64) -> Result<Self> {
        if frames.is_empty() || frames.len() % CHANNELS != 0 {
            return Err(Error::usage(format!(
                "window buffer of {} values is not a whole number of {CHANNELS}-channel frames",
                frames.len()
            )));
        }
        if let Some(i) = frames.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite value in frame {}", i / CHANNELS)));
        }
        Ok(Self {
            frames,
            domain,
            t_start,
            dt,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len() / CHANNELS
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[f64] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.frames[i * CHANNELS..(i + 1) * CHANNELS]
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.len() as f64 * self.dt
    }

    pub(crate) fn with_frames(&self, frames: Vec<f64>) -> Self {
        debug_assert_eq!(frames.len(), self.frames.len());
        Self {
            frames,
            domain: self.domain.clone(),
            t_start: self.t_start,
            dt: self.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelledWindow {
    pub window: Window,
    pub label: PolarVector,
}
