use serde::{Deserialize, Serialize};

use crate::dataio::{Window, CHANNELS};
use crate::error::{Error, Result};

/// Lower bound on a fitted channel standard deviation.
pub const STD_FLOOR: f64 = 1e-6;

/// Per-channel z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; CHANNELS],
    pub std: [f64; CHANNELS],
}

/// Fit statistics over every frame of the given windows. Use source-domain
/// training windows only; the same statistics are then applied to all
/// domains.
pub fn fit_norm_stats(windows: &[Window]) -> Result<NormStats> {
    if windows.len() < 2 {
        return Err(Error::usage(format!(
            "need at least 2 windows to fit normalization, got {}",
            windows.len()
        )));
    }
    let mut mean = [0.0; CHANNELS];
    let mut count = 0usize;
    for w in windows {
        for frame in w.frames().chunks_exact(CHANNELS) {
            for (m, v) in mean.iter_mut().zip(frame) {
                *m += v;
            }
            count += 1;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let mut var = [0.0; CHANNELS];
    for w in windows {
        for frame in w.frames().chunks_exact(CHANNELS) {
            for c in 0..CHANNELS {
                let d = frame[c] - mean[c];
                var[c] += d * d;
            }
        }
    }
    let std = var.map(|v| (v / count as f64).sqrt().max(STD_FLOOR));
    Ok(NormStats { mean, std })
}

impl NormStats {
    pub fn apply(&self, window: &Window) -> Window {
        let frames = window
            .frames()
            .chunks_exact(CHANNELS)
            .flat_map(|f| (0..CHANNELS).map(move |c| (f[c] - self.mean[c]) / self.std[c]))
            .collect();
        window.with_frames(frames)
    }

    pub fn invert(&self, window: &Window) -> Window {
        let frames = window
            .frames()
            .chunks_exact(CHANNELS)
            .flat_map(|f| (0..CHANNELS).map(move |c| f[c] * self.std[c] + self.mean[c]))
            .collect();
        window.with_frames(frames)
    }
}
