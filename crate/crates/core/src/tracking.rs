//! Dead reckoning from polar displacement sequences and trajectory metrics.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::angle;
use crate::dataio::{pose_at, PolarVector, PoseSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Heading in (-π, π].
    pub psi: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, psi: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && psi.is_finite()) {
            return Err(Error::usage("pose components must be finite"));
        }
        Ok(Self {
            x,
            y,
            psi: angle::wrap(psi),
        })
    }

    pub fn origin() -> Self {
        Self { x: 0.0, y: 0.0, psi: 0.0 }
    }

    fn sample(&self, t: f64) -> PoseSample {
        PoseSample {
            t,
            x: self.x,
            y: self.y,
            psi: self.psi,
        }
    }
}

/// Poses at consecutive window boundaries, starting at `t0` and spaced
/// `dt_window` seconds apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub poses: Vec<Pose2D>,
    pub t0: f64,
    pub dt_window: f64,
}

pub const TRAJECTORY_CSV_HEADER: &str = "k,t,x,y,psi";

impl Trajectory {
    pub fn new(poses: Vec<Pose2D>, t0: f64, dt_window: f64) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::usage("a trajectory needs at least one pose"));
        }
        if !(t0.is_finite() && dt_window.is_finite() && dt_window >= 0.0) {
            return Err(Error::usage("trajectory timing must be finite and non-negative"));
        }
        Ok(Self { poses, t0, dt_window })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt_window
    }

    pub fn last(&self) -> Pose2D {
        self.poses[self.poses.len() - 1]
    }

    /// Sum of straight-line segment lengths.
    pub fn path_length(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y))
            .sum()
    }

    /// Polar steps between consecutive poses.
    pub fn polars(&self) -> Vec<PolarVector> {
        self.poses
            .windows(2)
            .map(|w| crate::dataio::polar_from_poses(&w[0].sample(0.0), &w[1].sample(0.0)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{TRAJECTORY_CSV_HEADER}\n");
        for (k, p) in self.poses.iter().enumerate() {
            let _ = writeln!(out, "{k},{},{},{},{}", self.time(k), p.x, p.y, p.psi);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::data(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.join(",") != TRAJECTORY_CSV_HEADER {
            return Err(Error::data(format!(
                "{}: expected header `{TRAJECTORY_CSV_HEADER}`",
                path.display()
            )));
        }
        let mut poses = Vec::new();
        let mut times = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
            let field = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::data(format!("{}: row {}: bad value `{}`", path.display(), row + 1, &rec[i])))
            };
            times.push(field(1)?);
            poses.push(Pose2D {
                x: field(2)?,
                y: field(3)?,
                psi: angle::wrap(field(4)?),
            });
        }
        if poses.is_empty() {
            return Err(Error::data(format!("{}: no poses", path.display())));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Trajectory::new(poses, times[0], dt)
    }
}

/// Chain polar steps from `p0`: the heading turns by `dpsi` first, then the
/// position advances `dl` along the new heading.
pub fn dead_reckon(p0: Pose2D, polars: &[PolarVector], dt_window: f64) -> Result<Trajectory> {
    let mut poses = Vec::with_capacity(polars.len() + 1);
    poses.push(p0);
    let mut p = p0;
    for (k, step) in polars.iter().enumerate() {
        if step.dl < 0.0 || !step.dl.is_finite() || !step.dpsi.is_finite() {
            return Err(Error::usage(format!(
                "step {k}: invalid polar vector ({}, {})",
                step.dl, step.dpsi
            )));
        }
        let psi = angle::wrap(p.psi + step.dpsi);
        p = Pose2D {
            x: p.x + step.dl * psi.cos(),
            y: p.y + step.dl * psi.sin(),
            psi,
        };
        poses.push(p);
    }
    Trajectory::new(poses, 0.0, dt_window)
}

/// Root-mean-square planar position error between corresponding poses.
/// Both trajectories are expected to share their start pose; no alignment
/// transform is fitted.
pub fn ate(traj: &Trajectory, gt: &Trajectory) -> Result<f64> {
    if traj.len() != gt.len() {
        return Err(Error::usage(format!(
            "trajectory has {} poses, ground truth {}",
            traj.len(),
            gt.len()
        )));
    }
    let sum: f64 = traj
        .poses
        .iter()
        .zip(&gt.poses)
        .map(|(a, b)| (a.x - b.x).powi(2) + (a.y - b.y).powi(2))
        .sum();
    Ok((sum / traj.len() as f64).sqrt())
}

/// Ground-truth poses interpolated at evenly spaced window boundary times.
pub fn resample_gt(poses: &[PoseSample], boundaries: &[f64]) -> Result<Trajectory> {
    if boundaries.is_empty() {
        return Err(Error::usage("no window boundaries"));
    }
    let dt = if boundaries.len() > 1 {
        boundaries[1] - boundaries[0]
    } else {
        0.0
    };
    for (k, t) in boundaries.iter().enumerate() {
        let want = boundaries[0] + k as f64 * dt;
        if (t - want).abs() > 1e-6 * dt.abs().max(1.0) {
            return Err(Error::usage("window boundaries must be evenly spaced"));
        }
    }
    let out = boundaries
        .iter()
        .map(|&t| {
            let p = pose_at(poses, t)?;
            Ok(Pose2D {
                x: p.x,
                y: p.y,
                psi: p.psi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(out, boundaries[0], dt)
}

/// Render an estimated trajectory, optionally over ground truth, as a
/// standalone SVG.
///
/// Estimate: solid blue (#1f77b4). Ground truth: dashed black. The start pose
/// is a green dot, the estimate's end a red dot. Axes share one scale (equal
/// aspect) and a 1 m scale bar is drawn bottom left; north (+y) is up.
pub fn render_svg(traj: &Trajectory, gt: Option<&Trajectory>) -> String {
    const SIZE: f64 = 600.0;
    const MARGIN: f64 = 40.0;
    let all = traj.poses.iter().chain(gt.into_iter().flat_map(|g| g.poses.iter()));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1.0);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let px = |p: &Pose2D| (MARGIN + (p.x - x0) * scale, SIZE - MARGIN - (p.y - y0) * scale);
    let polyline = |t: &Trajectory| {
        t.poses
            .iter()
            .map(|p| {
                let (u, v) = px(p);
                format!("{u:.2},{v:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if let Some(g) = gt {
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>",
            polyline(g)
        );
    }
    let _ = writeln!(
        svg,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>",
        polyline(traj)
    );
    let (sx, sy) = px(&traj.poses[0]);
    let (ex, ey) = px(&traj.last());
    let _ = writeln!(svg, "<circle cx=\"{sx:.2}\" cy=\"{sy:.2}\" r=\"4\" fill=\"green\"/>");
    let _ = writeln!(svg, "<circle cx=\"{ex:.2}\" cy=\"{ey:.2}\" r=\"4\" fill=\"red\"/>");
    let bar = scale;
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN}\" y1=\"{y:.2}\" x2=\"{x2:.2}\" y2=\"{y:.2}\" stroke=\"black\" stroke-width=\"2\"/>\n\
         <text x=\"{MARGIN}\" y=\"{ty:.2}\" font-family=\"sans-serif\" font-size=\"12\">1 m</text>",
        y = SIZE - MARGIN / 2.0,
        x2 = MARGIN + bar,
        ty = SIZE - MARGIN / 2.0 - 4.0,
    );
    svg.push_str("</svg>\n");
    svg
}
