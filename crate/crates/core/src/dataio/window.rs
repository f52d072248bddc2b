use crate::angle;
use crate::dataio::{DomainTag, PolarVector, PoseSample, Window, CHANNELS};
use crate::error::{Error, Result};
use crate::imu::ImuSequence;

/// Cut a stream into windows of `n` frames every `stride` frames.
///
/// Yields `floor((len - n) / stride) + 1` windows when `len >= n`, none
/// otherwise.
pub fn make_windows(
    seq: &ImuSequence,
    n: usize,
    stride: usize,
    domain: &DomainTag,
) -> Result<Vec<Window>> {
    if n == 0 || stride == 0 {
        return Err(Error::usage(format!(
            "window length and stride must be at least 1 (got {n}, {stride})"
        )));
    }
    let samples = seq.samples();
    if samples.len() < n {
        return Ok(Vec::new());
    }
    let count = (samples.len() - n) / stride + 1;
    (0..count)
        .map(|k| {
            let start = k * stride;
            let mut frames = Vec::with_capacity(n * CHANNELS);
            for s in &samples[start..start + n] {
                frames.extend(s.accel.iter());
                frames.extend(s.gyro.iter());
            }
            Window::new(frames, domain.clone(), samples[start].t, seq.dt())
        })
        .collect()
}

/// Ground-truth pose at time `t`, linearly interpolated between the
/// bracketing samples; heading follows the shorter arc.
pub fn pose_at(poses: &[PoseSample], t: f64) -> Result<PoseSample> {
    const SLACK: f64 = 1e-9;
    let (first, last) = match (poses.first(), poses.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::data("no poses to look up")),
    };
    if t < first.t - SLACK || t > last.t + SLACK {
        return Err(Error::data(format!(
            "time {t} outside pose coverage [{}, {}]",
            first.t, last.t
        )));
    }
    let hi = poses.partition_point(|p| p.t < t);
    if hi == 0 {
        return Ok(*first);
    }
    if hi == poses.len() {
        return Ok(*last);
    }
    let (a, b) = (&poses[hi - 1], &poses[hi]);
    if b.t == t {
        return Ok(*b);
    }
    let frac = (t - a.t) / (b.t - a.t);
    Ok(PoseSample {
        t,
        x: a.x + frac * (b.x - a.x),
        y: a.y + frac * (b.y - a.y),
        psi: angle::lerp(a.psi, b.psi, frac),
    })
}

/// Polar displacement between two poses.
pub fn polar_from_poses(start: &PoseSample, end: &PoseSample) -> PolarVector {
    PolarVector::new(
        (end.x - start.x).hypot(end.y - start.y),
        angle::diff(end.psi, start.psi),
    )
}

/// Label a window with the ground-truth displacement between its start time
/// and one sample interval past its last frame.
pub fn label_window(window: &Window, poses: &[PoseSample]) -> Result<PolarVector> {
    let start = pose_at(poses, window.t_start)?;
    let end = pose_at(poses, window.t_end())?;
    Ok(polar_from_poses(&start, &end))
}
