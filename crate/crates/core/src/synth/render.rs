use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imu::{ImuSample, ImuSequence, UnitQuaternion, Vec3};
use crate::synth::WalkTrace;

/// How a device is carried: a mounting rotation relative to the walker's
/// body (x forward, y left, z up), optionally swaying, plus sensor errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainTransform {
    /// Fixed body-to-device rotation.
    pub mount: UnitQuaternion,
    /// Sway axis in the body frame; the sway rotation is applied before the
    /// fixed mount.
    pub sway_axis: Vec3,
    /// Sway amplitude, rad.
    pub sway_amp: f64,
    /// Sway frequency, Hz.
    pub sway_freq: f64,
    /// Gain on the vertical step bounce felt by the device.
    pub bounce_gain: f64,
    pub gyro_bias: Vec3,
    pub acc_bias: Vec3,
    /// White gyro noise standard deviation, rad/s.
    pub noise_gyro: f64,
    /// White accelerometer noise standard deviation, m/s².
    pub noise_acc: f64,
}

impl Default for DomainTransform {
    /// Rigidly body-aligned, error-free sensor.
    fn default() -> Self {
        Self {
            mount: UnitQuaternion::identity(),
            sway_axis: Vec3::y(),
            sway_amp: 0.0,
            sway_freq: 1.0,
            bounce_gain: 1.0,
            gyro_bias: Vec3::zeros(),
            acc_bias: Vec3::zeros(),
            noise_gyro: 0.0,
            noise_acc: 0.0,
        }
    }
}

impl DomainTransform {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_gyro >= 0.0 && self.noise_acc >= 0.0) {
            return Err(Error::usage("sensor noise levels must be non-negative"));
        }
        if !(self.sway_amp.is_finite() && self.sway_freq.is_finite() && self.bounce_gain.is_finite()) {
            return Err(Error::usage("sway and bounce parameters must be finite"));
        }
        if self.sway_amp != 0.0 && self.sway_axis.norm() == 0.0 {
            return Err(Error::usage("sway axis must be non-zero"));
        }
        Ok(())
    }

    fn sway_angle(&self, t: f64) -> f64 {
        self.sway_amp * (std::f64::consts::TAU * self.sway_freq * t).sin()
    }

    /// Body-to-device rotation at time `t`.
    pub fn mount_at(&self, t: f64) -> UnitQuaternion {
        if self.sway_amp == 0.0 {
            return self.mount;
        }
        let axis = nalgebra::Unit::new_normalize(self.sway_axis);
        UnitQuaternion::from_axis_angle(&axis, self.sway_angle(t)) * self.mount
    }

    /// Device attitude (device to navigation frame) for a walker heading.
    pub fn attitude(&self, t: f64, heading: f64) -> UnitQuaternion {
        UnitQuaternion::from_axis_angle(&Vec3::z_axis(), heading) * self.mount_at(t)
    }
}

/// Render what a device carried according to `transform` would measure
/// during the walk.
///
/// Specific force is the navigation acceleration plus the gravity reaction,
/// rotated into the device frame; the angular rate is the walker's turn rate
/// plus the sway rate, both as interval means. Bias and white noise drawn
/// from `seed` are added last.
pub fn render_imu(
    trace: &WalkTrace,
    transform: &DomainTransform,
    gravity: Vec3,
    seed: u64,
) -> Result<ImuSequence> {
    transform.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gyro_noise = Normal::new(0.0, transform.noise_gyro).map_err(|e| Error::usage(e.to_string()))?;
    let acc_noise = Normal::new(0.0, transform.noise_acc).map_err(|e| Error::usage(e.to_string()))?;
    let mut noise3 = |dist: &Normal<f64>| {
        Vec3::new(dist.sample(&mut rng), dist.sample(&mut rng), dist.sample(&mut rng))
    };
    let dt = trace.dt();
    let sway_dir = if transform.sway_amp == 0.0 {
        Vec3::zeros()
    } else {
        transform.mount.inverse() * transform.sway_axis.normalize()
    };

    let samples = (0..trace.len())
        .map(|k| {
            let t = trace.time(k);
            let attitude = transform.attitude(t, trace.poses[k].psi);
            let to_device = attitude.inverse();

            let mut nav_acc = trace.accel[k];
            nav_acc.z *= transform.bounce_gain;
            let accel = to_device * (nav_acc + gravity);

            let mount = transform.mount_at(t);
            let sway_rate = (transform.sway_angle(t + dt) - transform.sway_angle(t)) / dt;
            let gyro = mount.inverse() * trace.gyro[k] + sway_dir * sway_rate;

            let gyro = gyro + transform.gyro_bias + noise3(&gyro_noise);
            let accel = accel + transform.acc_bias + noise3(&acc_noise);
            ImuSample::new(t, gyro, accel)
        })
        .collect();
    ImuSequence::new(samples, trace.rate_hz)
}
