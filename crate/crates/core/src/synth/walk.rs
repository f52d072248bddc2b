use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::PoseSample;
use crate::error::{Error, Result};
use crate::imu::Vec3;

/// Statistics of a simulated pedestrian walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    /// Recording length, s. The default gives at least 1000 two-second
    /// windows per domain after holding out a fifth for evaluation.
    pub duration: f64,
    /// Sample rate of the rendered streams, Hz.
    pub rate_hz: f64,
    /// m/s
    pub speed_mean: f64,
    /// Bound on the speed deviation from the mean, m/s.
    pub speed_jitter: f64,
    /// Stationary standard deviation of the turn rate, rad/s.
    pub turn_rate_std: f64,
    /// Mean turn rate, rad/s. With `heading_tau = 0` a non-zero value walks
    /// circles; otherwise it offsets the mean heading by
    /// `turn_rate_mean * heading_tau`.
    pub turn_rate_mean: f64,
    /// Correlation time of the turn-rate process, s.
    pub turn_tau: f64,
    /// Relaxation time of the heading towards `heading0`, s; 0 disables
    /// the pull and lets the heading wander without bound.
    pub heading_tau: f64,
    /// Correlation time of the speed process, s.
    pub speed_tau: f64,
    /// Step cadence, Hz.
    pub step_freq: f64,
    /// Vertical bounce amplitude at mean speed, m/s²; scales with speed.
    pub step_amp: f64,
    /// Duration of the smooth start from rest, s.
    pub ramp: f64,
    /// Initial heading, rad.
    pub heading0: f64,
    pub seed: u64,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            duration: 2500.0,
            rate_hz: 100.0,
            speed_mean: 1.4,
            speed_jitter: 0.3,
            turn_rate_std: 0.35,
            turn_rate_mean: 0.0,
            turn_tau: 2.0,
            heading_tau: 2.0,
            speed_tau: 3.0,
            step_freq: 1.8,
            step_amp: 1.5,
            ramp: 1.0,
            heading0: 0.0,
            seed: 0,
        }
    }
}

impl WalkParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("duration", self.duration),
            ("rate_hz", self.rate_hz),
            ("speed_mean", self.speed_mean),
            ("turn_tau", self.turn_tau),
            ("speed_tau", self.speed_tau),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::usage(format!("walk parameter {name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("speed_jitter", self.speed_jitter),
            ("turn_rate_std", self.turn_rate_std),
            ("step_amp", self.step_amp),
            ("ramp", self.ramp),
            ("heading_tau", self.heading_tau),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::usage(format!("walk parameter {name} must be non-negative, got {v}")));
            }
        }
        if !(1.0..=3.0).contains(&self.step_freq) {
            return Err(Error::usage(format!("step_freq must lie in [1, 3] Hz, got {}", self.step_freq)));
        }
        if self.speed_jitter >= self.speed_mean {
            return Err(Error::usage("speed_jitter must be smaller than speed_mean"));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.rate_hz).round() as usize
    }
}

/// Navigation-frame ground truth of one walk.
///
/// `poses` and `velocity` hold `N + 1` entries at times `k / rate` so the
/// final window can be labelled at its end; `accel` and `gyro` hold `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkTrace {
    pub rate_hz: f64,
    pub poses: Vec<PoseSample>,
    /// Horizontal velocity, m/s.
    pub velocity: Vec<Vec3>,
    /// Kinematic acceleration (gravity excluded), m/s².
    pub accel: Vec<Vec3>,
    /// Mean angular rate of the walker's body over each sample interval.
    pub gyro: Vec<Vec3>,
}

impl WalkTrace {
    pub fn len(&self) -> usize {
        self.accel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accel.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.rate_hz
    }
}

/// Ornstein-Uhlenbeck samples on a uniform knot grid, interpolated with a
/// Catmull-Rom spline so the resulting signal is continuously differentiable.
struct SmoothProcess {
    knots: Vec<f64>,
    spacing: f64,
}

impl SmoothProcess {
    const KNOT_SPACING: f64 = 0.25;

    fn new(rng: &mut ChaCha8Rng, duration: f64, mean: f64, std: f64, tau: f64) -> Self {
        let spacing = Self::KNOT_SPACING;
        let count = (duration / spacing).ceil() as usize + 4;
        let decay = (-spacing / tau).exp();
        let kick = std * (1.0 - decay * decay).sqrt();
        let first: f64 = StandardNormal.sample(rng);
        let mut value = mean + std * first;
        let mut knots = Vec::with_capacity(count);
        for _ in 0..count {
            knots.push(value);
            let xi: f64 = StandardNormal.sample(rng);
            value = mean + (value - mean) * decay + kick * xi;
        }
        Self { knots, spacing }
    }

    fn at(&self, t: f64) -> f64 {
        // Knot j + 1 sits at time j * spacing.
        let s = t / self.spacing;
        let j = (s.floor().max(0.0) as usize).min(self.knots.len() - 4);
        let u = s - j as f64;
        let [p0, p1, p2, p3] = [self.knots[j], self.knots[j + 1], self.knots[j + 2], self.knots[j + 3]];
        0.5 * (2.0 * p1
            + (p2 - p0) * u
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u
            + (3.0 * p1 - p0 - 3.0 * p2 + p3) * u * u * u)
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

struct Motion {
    turn: SmoothProcess,
    speed_noise: SmoothProcess,
    params: WalkParams,
}

impl Motion {
    fn speed(&self, t: f64) -> f64 {
        let p = &self.params;
        let ramp = if p.ramp > 0.0 { smoothstep(t / p.ramp) } else { 1.0 };
        ramp * (p.speed_mean + p.speed_jitter * self.speed_noise.at(t).tanh())
    }

    fn turn_rate(&self, t: f64) -> f64 {
        let p = &self.params;
        if p.turn_rate_std == 0.0 {
            p.turn_rate_mean
        } else {
            self.turn.at(t)
        }
    }

    /// d/dt of (heading, x, y).
    fn derivative(&self, t: f64, state: [f64; 3]) -> [f64; 3] {
        let p = &self.params;
        let s = self.speed(t);
        let pull = if p.heading_tau > 0.0 {
            (state[0] - p.heading0) / p.heading_tau
        } else {
            0.0
        };
        [self.turn_rate(t) - pull, s * state[0].cos(), s * state[0].sin()]
    }

    fn rk4(&self, t: f64, h: f64, y: [f64; 3]) -> [f64; 3] {
        let add = |a: [f64; 3], b: [f64; 3], k: f64| [a[0] + k * b[0], a[1] + k * b[1], a[2] + k * b[2]];
        let k1 = self.derivative(t, y);
        let k2 = self.derivative(t + h / 2.0, add(y, k1, h / 2.0));
        let k3 = self.derivative(t + h / 2.0, add(y, k2, h / 2.0));
        let k4 = self.derivative(t + h, add(y, k3, h));
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            y[2] + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        ]
    }
}

/// Simulate a planar walk and its navigation-frame kinematics.
///
/// Heading integrates a smoothed mean-reverting turn-rate process; speed is
/// the mean plus a bounded smooth jitter, ramped up from rest. The trajectory
/// is integrated with RK4 on a grid eight times finer than the output rate.
/// Horizontal accelerations are the central second differences of the
/// sampled positions, and velocities the central first differences, so the
/// streams are exactly consistent with trapezoidal integration. Vertical
/// acceleration is a step-frequency sinusoid whose amplitude scales with
/// speed.
pub fn simulate_walk(params: &WalkParams) -> Result<WalkTrace> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    // One sample interval of margin on either side for the central differences.
    let span = params.duration + 2.0 / params.rate_hz;
    let motion = Motion {
        turn: SmoothProcess::new(&mut rng, span, params.turn_rate_mean, params.turn_rate_std, params.turn_tau),
        speed_noise: SmoothProcess::new(&mut rng, span, 0.0, 1.0, params.speed_tau),
        params: params.clone(),
    };

    let n = params.sample_count();
    let dt = 1.0 / params.rate_hz;
    const SUBSTEPS: usize = 8;
    let h = dt / SUBSTEPS as f64;

    // States at k = 0 ..= n + 1 with time k * dt.
    let mut states = Vec::with_capacity(n + 2);
    let mut y = [params.heading0, 0.0, 0.0];
    states.push(y);
    for k in 0..=n {
        let t0 = k as f64 * dt;
        for s in 0..SUBSTEPS {
            y = motion.rk4(t0 + s as f64 * h, h, y);
        }
        states.push(y);
    }
    // Position one interval before the start, from the time-reversed motion
    // (the walker is at rest then when a ramp is configured).
    let before = {
        let mut y = [params.heading0, 0.0, 0.0];
        for s in 0..SUBSTEPS {
            y = motion.rk4(-(s as f64) * h, -h, y);
        }
        y
    };

    let pos = |k: isize| -> [f64; 3] {
        if k < 0 {
            before
        } else {
            states[k as usize]
        }
    };

    let poses: Vec<PoseSample> = (0..=n)
        .map(|k| {
            let s = states[k];
            PoseSample {
                t: k as f64 / params.rate_hz,
                x: s[1],
                y: s[2],
                psi: crate::angle::wrap(s[0]),
            }
        })
        .collect();

    let velocity = (0..=n as isize)
        .map(|k| {
            let (a, b) = (pos(k - 1), pos(k + 1));
            Vec3::new((b[1] - a[1]) / (2.0 * dt), (b[2] - a[2]) / (2.0 * dt), 0.0)
        })
        .collect();

    let accel = (0..n as isize)
        .map(|k| {
            let (a, b, c) = (pos(k - 1), pos(k), pos(k + 1));
            let t = k as f64 * dt;
            let bounce = params.step_amp * motion.speed(t) / params.speed_mean
                * (2.0 * std::f64::consts::PI * params.step_freq * t).sin();
            Vec3::new(
                (a[1] - 2.0 * b[1] + c[1]) / (dt * dt),
                (a[2] - 2.0 * b[2] + c[2]) / (dt * dt),
                bounce,
            )
        })
        .collect();

    let gyro = (0..n)
        .map(|k| Vec3::new(0.0, 0.0, (states[k + 1][0] - states[k][0]) / dt))
        .collect();

    Ok(WalkTrace {
        rate_hz: params.rate_hz,
        poses,
        velocity,
        accel,
        gyro,
    })
}
