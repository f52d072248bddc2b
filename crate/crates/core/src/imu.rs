//! Strapdown inertial model: gyro integration into attitude, rotation of
//! specific force into the navigation frame, gravity removal and double
//! integration to a planar displacement.
//!
//! Conventions used throughout the crate:
//!
//! * The navigation frame is z-up. The accelerometer measures specific force,
//!   so a device at rest reads `+g` once rotated into the navigation frame.
//! * A gyro sample is the mean angular rate over the interval that starts at
//!   its timestamp (delta-angle semantics), so integrating a single-axis rate
//!   with one exponential-map step per sample is exact.
//! * Quaternions map sensor-frame vectors into the navigation frame.

use nalgebra::{UnitQuaternion as NaUnitQuaternion, Vector3};

use crate::angle;
use crate::dataio::PolarVector;
use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type UnitQuaternion = NaUnitQuaternion<f64>;

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

/// Gravity reaction as seen by a resting accelerometer in the navigation frame.
pub fn standard_gravity() -> Vec3 {
    Vec3::new(0.0, 0.0, STANDARD_GRAVITY)
}

/// One timestamped reading of a six-axis IMU, sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    /// Angular rate, rad/s.
    pub gyro: Vec3,
    /// Specific force, m/s².
    pub accel: Vec3,
}

impl ImuSample {
    pub fn new(t: f64, gyro: Vec3, accel: Vec3) -> Self {
        Self { t, gyro, accel }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.gyro.iter().all(|v| v.is_finite())
            && self.accel.iter().all(|v| v.is_finite())
    }
}

/// Attitude, velocity and position of the sensor in the navigation frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub q: UnitQuaternion,
    pub v: Vec3,
    pub p: Vec3,
}

/// Ordered IMU stream with a nominal sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuSequence {
    samples: Vec<ImuSample>,
    rate_hz: f64,
}

impl ImuSequence {
    /// Validates finiteness, strictly increasing timestamps and that the
    /// median sample spacing is within 10% of `1 / rate_hz`.
    pub fn new(samples: Vec<ImuSample>, rate_hz: f64) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::usage(format!("sample rate must be positive, got {rate_hz}")));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.is_finite() || s.t < 0.0 {
                return Err(Error::data(format!("sample {i} has a non-finite or negative field")));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::data(format!(
                    "timestamps not strictly increasing at sample {i} ({} after {})",
                    s.t,
                    samples[i - 1].t
                )));
            }
        }
        if samples.len() >= 2 {
            let mut gaps: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
            gaps.sort_by(f64::total_cmp);
            let median = gaps[gaps.len() / 2];
            let nominal = 1.0 / rate_hz;
            if (median - nominal).abs() >= 0.1 * nominal {
                return Err(Error::data(format!(
                    "median sample spacing {median} s does not match nominal rate {rate_hz} Hz"
                )));
            }
        }
        Ok(Self { samples, rate_hz })
    }

    pub fn samples(&self) -> &[ImuSample] {
        &self.samples
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Contiguous sub-sequence; panics if the range is out of bounds.
    pub fn slice(&self, range: std::ops::Range<usize>) -> ImuSequence {
        ImuSequence {
            samples: self.samples[range].to_vec(),
            rate_hz: self.rate_hz,
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::usage(format!("time step must be positive, got {dt}")))
    }
}

fn check_finite(seq: &[Vec3], what: &str) -> Result<()> {
    match seq.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
        Some(i) => Err(Error::data(format!("non-finite {what} at sample {i}"))),
        None => Ok(()),
    }
}

/// Integrate body angular rates into attitude.
///
/// Returns one quaternion per rate sample: entry `k` is the attitude after
/// applying samples `0..=k` to `q0`. Each step is the exponential map of
/// `rate * dt`, followed by renormalization.
pub fn integrate_orientation(
    rates: &[Vec3],
    dt: f64,
    q0: UnitQuaternion,
) -> Result<Vec<UnitQuaternion>> {
    check_dt(dt)?;
    check_finite(rates, "angular rate")?;
    let mut q = q0;
    let mut out = Vec::with_capacity(rates.len());
    for w in rates {
        q *= UnitQuaternion::from_scaled_axis(w * dt);
        q.renormalize();
        out.push(q);
    }
    Ok(out)
}

/// Rotate each sensor-frame vector into the navigation frame using the
/// matching attitude.
pub fn transform_to_nav(accels: &[Vec3], attitudes: &[UnitQuaternion]) -> Result<Vec<Vec3>> {
    if accels.len() != attitudes.len() {
        return Err(Error::usage(format!(
            "transform_to_nav: {} vectors but {} attitudes",
            accels.len(),
            attitudes.len()
        )));
    }
    Ok(accels.iter().zip(attitudes).map(|(a, q)| q * a).collect())
}

/// Subtract the gravity reaction from navigation-frame specific force.
pub fn remove_gravity(nav_accels: &[Vec3], gravity: Vec3) -> Vec<Vec3> {
    nav_accels.iter().map(|a| a - gravity).collect()
}

/// Trapezoidal double integration of accelerations sampled every `dt`.
///
/// `v[0] = v0` and `p[0] = p0` are the state at the first sample; entry `k`
/// is the state at sample `k`.
pub fn double_integrate(
    accels: &[Vec3],
    dt: f64,
    v0: Vec3,
    p0: Vec3,
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    check_dt(dt)?;
    check_finite(accels, "acceleration")?;
    let mut vs = Vec::with_capacity(accels.len());
    let mut ps = Vec::with_capacity(accels.len());
    if accels.is_empty() {
        return Ok((vs, ps));
    }
    let (mut v, mut p) = (v0, p0);
    vs.push(v);
    ps.push(p);
    for pair in accels.windows(2) {
        let v_next = v + (pair[0] + pair[1]) * (0.5 * dt);
        p += (v + v_next) * (0.5 * dt);
        v = v_next;
        vs.push(v);
        ps.push(p);
    }
    Ok((vs, ps))
}

/// Heading of an attitude: azimuth of the sensor x axis projected onto the
/// navigation x-y plane.
pub fn yaw(q: &UnitQuaternion) -> f64 {
    let x_axis = q * Vec3::x();
    x_axis.y.atan2(x_axis.x)
}

/// Planar displacement and heading change over one window, by direct
/// integration of the physical model from a known initial attitude and
/// velocity.
///
/// The window spans `len` sample intervals, so the displacement is reported
/// at the timestamp one interval past the last sample. The last acceleration
/// is held over that final interval.
pub fn strapdown_displacement(
    window: &ImuSequence,
    q0: UnitQuaternion,
    v0: Vec3,
) -> Result<PolarVector> {
    strapdown_with_gravity(window, q0, v0, standard_gravity())
}

pub fn strapdown_with_gravity(
    window: &ImuSequence,
    q0: UnitQuaternion,
    v0: Vec3,
    gravity: Vec3,
) -> Result<PolarVector> {
    if window.is_empty() {
        return Err(Error::usage("strapdown over an empty window"));
    }
    let dt = window.dt();
    let rates: Vec<Vec3> = window.samples().iter().map(|s| s.gyro).collect();
    let accels: Vec<Vec3> = window.samples().iter().map(|s| s.accel).collect();

    let after = integrate_orientation(&rates, dt, q0)?;
    // Attitude at each sample's own timestamp.
    let at_sample: Vec<UnitQuaternion> = std::iter::once(q0)
        .chain(after[..after.len() - 1].iter().copied())
        .collect();

    let nav = transform_to_nav(&accels, &at_sample)?;
    let mut linear = remove_gravity(&nav, gravity);
    linear.push(*linear.last().expect("non-empty"));

    let (_, ps) = double_integrate(&linear, dt, v0, Vec3::zeros())?;
    let end = ps.last().expect("non-empty");
    let q_end = after.last().expect("non-empty");
    Ok(PolarVector::new(
        end.x.hypot(end.y),
        angle::diff(yaw(q_end), yaw(&q0)),
    ))
}
