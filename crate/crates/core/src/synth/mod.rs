//! Synthetic pedestrian walks rendered through configurable sensor
//! placements, with exact ground truth.

mod render;
mod walk;

pub use render::{render_imu, DomainTransform};
pub use walk::{simulate_walk, WalkParams, WalkTrace};

use serde::{Deserialize, Serialize};

use crate::dataio::{label_window, make_windows, DomainTag, LabelledWindow, PolarVector, PoseSample, Window};
use crate::error::{Error, Result};
use crate::imu::{standard_gravity, ImuSequence, UnitQuaternion, Vec3};

pub const PRESET_NAMES: [&str; 3] = ["synthetic-handheld", "synthetic-pocket", "synthetic-trolley"];

/// Built-in placements.
///
/// * `synthetic-handheld`: phone held in front, slightly pitched, small sway
///   at the step frequency, low noise.
/// * `synthetic-pocket`: long axis near vertical with a large fixed tilt,
///   doubled step bounce, noticeable bias and noise.
/// * `synthetic-trolley`: lying flat at an arbitrary yaw, no sway or bounce,
///   very low noise.
pub fn preset(name: &str) -> Option<DomainTransform> {
    let euler = UnitQuaternion::from_euler_angles;
    match name {
        "synthetic-handheld" => Some(DomainTransform {
            mount: euler(0.0, -0.35, 0.0),
            sway_axis: Vec3::x(),
            sway_amp: 0.03,
            sway_freq: 1.8,
            bounce_gain: 1.0,
            gyro_bias: Vec3::new(0.002, -0.001, 0.001),
            acc_bias: Vec3::new(0.02, 0.01, -0.02),
            noise_gyro: 0.005,
            noise_acc: 0.05,
        }),
        "synthetic-pocket" => Some(DomainTransform {
            mount: euler(0.4, 1.3, 0.7),
            sway_axis: Vec3::y(),
            sway_amp: 0.0,
            sway_freq: 1.0,
            bounce_gain: 2.0,
            gyro_bias: Vec3::new(0.01, -0.02, 0.015),
            acc_bias: Vec3::new(0.15, -0.1, 0.05),
            noise_gyro: 0.02,
            noise_acc: 0.15,
        }),
        "synthetic-trolley" => Some(DomainTransform {
            mount: euler(0.0, 0.0, 1.2),
            sway_axis: Vec3::y(),
            sway_amp: 0.0,
            sway_freq: 1.0,
            bounce_gain: 0.0,
            gyro_bias: Vec3::new(0.001, 0.001, -0.002),
            acc_bias: Vec3::new(0.01, -0.01, 0.0),
            noise_gyro: 0.003,
            noise_acc: 0.03,
        }),
        _ => None,
    }
}

/// Seed of the sensor-noise stream paired with a walk seed.
pub fn noise_seed(walk_seed: u64) -> u64 {
    walk_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03
}

/// Sensor stream and ground truth of one simulated recording.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBundle {
    pub imu: ImuSequence,
    /// One more pose than IMU samples; the last closes the final interval.
    pub poses: Vec<PoseSample>,
    pub domain: DomainTag,
}

pub fn generate_bundle(
    walk: &WalkParams,
    transform: &DomainTransform,
    domain: DomainTag,
) -> Result<GroundTruthBundle> {
    let trace = simulate_walk(walk)?;
    let imu = render_imu(&trace, transform, standard_gravity(), noise_seed(walk.seed))?;
    Ok(GroundTruthBundle {
        imu,
        poses: trace.poses,
        domain,
    })
}

/// One placement in a generated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub domain: DomainTag,
    pub walk: WalkParams,
    pub transform: DomainTransform,
}

impl DomainSpec {
    pub fn preset(name: &str, seed: u64, duration: f64) -> Result<Self> {
        let transform = preset(name).ok_or_else(|| Error::usage(format!("unknown preset `{name}`")))?;
        Ok(Self {
            domain: DomainTag::new(name)?,
            walk: WalkParams {
                duration,
                seed,
                ..WalkParams::default()
            },
            transform,
        })
    }

    pub fn generate(&self) -> Result<GroundTruthBundle> {
        generate_bundle(&self.walk, &self.transform, self.domain.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Windowing {
    pub n: usize,
    pub stride: usize,
    /// Trailing fraction of the target recording held out, with labels, for
    /// evaluation.
    pub eval_fraction: f64,
}

impl Default for Windowing {
    fn default() -> Self {
        Self {
            n: 200,
            stride: 200,
            eval_fraction: 0.2,
        }
    }
}

/// Unpaired source/target data for one adaptation experiment.
#[derive(Debug, Clone)]
pub struct DomainPair {
    pub source: Vec<LabelledWindow>,
    pub target_train: Vec<Window>,
    pub target_eval: Vec<LabelledWindow>,
    target_train_labels: Vec<PolarVector>,
}

impl DomainPair {
    /// Target training windows with their ground truth. Only the fully
    /// supervised target baseline may use these.
    pub fn target_train_labelled(&self) -> Vec<LabelledWindow> {
        self.target_train
            .iter()
            .zip(&self.target_train_labels)
            .map(|(window, label)| LabelledWindow {
                window: window.clone(),
                label: *label,
            })
            .collect()
    }
}

fn labelled(bundle: &GroundTruthBundle, windows: Vec<Window>) -> Result<Vec<LabelledWindow>> {
    windows
        .into_iter()
        .map(|window| {
            let label = label_window(&window, &bundle.poses)?;
            Ok(LabelledWindow { window, label })
        })
        .collect()
}

/// Generate source and target recordings from independent walks and window
/// them. Source windows carry labels; target windows are split in time into
/// an unlabelled training block and a trailing labelled evaluation block.
pub fn make_domain_pair(source: &DomainSpec, target: &DomainSpec, windowing: Windowing) -> Result<DomainPair> {
    if source.walk.seed == target.walk.seed {
        return Err(Error::usage(
            "source and target walks share a seed; the domains would be paired",
        ));
    }
    if source.domain == target.domain {
        return Err(Error::usage("source and target need distinct domain names"));
    }
    if !(0.0..1.0).contains(&windowing.eval_fraction) {
        return Err(Error::usage("eval_fraction must lie in [0, 1)"));
    }
    let src = source.generate()?;
    let tgt = target.generate()?;

    let source_windows = make_windows(&src.imu, windowing.n, windowing.stride, &src.domain)?;
    let source = labelled(&src, source_windows)?;

    let all = make_windows(&tgt.imu, windowing.n, windowing.stride, &tgt.domain)?;
    let t_total = tgt.imu.len() as f64 * tgt.imu.dt();
    let boundary = t_total * (1.0 - windowing.eval_fraction);
    let tol = 1e-9;
    let (train, eval): (Vec<Window>, Vec<Window>) = all.into_iter().partition(|w| w.t_start < boundary - tol);
    // Windows straddling the boundary would leak evaluation samples.
    let train: Vec<Window> = train.into_iter().filter(|w| w.t_end() <= boundary + tol).collect();
    let eval: Vec<Window> = eval;

    let train_labelled = labelled(&tgt, train)?;
    let target_eval = labelled(&tgt, eval)?;
    let (target_train, target_train_labels) = train_labelled.into_iter().map(|lw| (lw.window, lw.label)).unzip();
    Ok(DomainPair {
        source,
        target_train,
        target_eval,
        target_train_labels,
    })
}
