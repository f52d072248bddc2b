use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use motran_core::dataio::{
    fit_norm_stats, label_window, load_imu_csv, load_pose_csv, make_windows, write_imu_csv, write_pose_csv,
    DatasetManifest,
};
use motran_core::losses::{LossReport, TermMask, LOSS_CSV_HEADER};
use motran_core::models::ModelBundle;
use motran_core::synth::{DomainSpec, PRESET_NAMES};
use motran_core::tracking::{ate, dead_reckon, render_svg, resample_gt, Pose2D};
use motran_core::training::{
    evaluate, predict, train_adapt_with, train_supervised_with, Checkpoint, TrainConfig, TrainMode,
};
use motran_core::{DomainTag, Error, ImuSequence, LabelledWindow, NormStats, PoseSample, Result, Window};

use crate::manifest::RunManifest;
use crate::{Cli, EvalArgs, SynthGenArgs, TrackArgs, TrainArgs};

const CHECKPOINT: &str = "checkpoint.json";
const HISTORY: &str = "history.csv";
const EVAL_REPORT: &str = "eval_report.txt";
const TRAJECTORY_CSV: &str = "trajectory.csv";
const TRAJECTORY_SVG: &str = "trajectory.svg";
const TRACK_SUMMARY: &str = "track_summary.txt";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn reject_config(cli: &Cli, command: &str) -> Result<()> {
    if cli.config.is_some() {
        return Err(Error::usage(format!("--config is not used by `{command}`")));
    }
    Ok(())
}

pub fn synth_gen(cli: &Cli, args: &SynthGenArgs) -> Result<()> {
    reject_config(cli, "synth-gen")?;
    let seed = cli.seed.unwrap_or(0);
    let presets: Vec<String> = if args.presets.is_empty() {
        PRESET_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        args.presets.clone()
    };
    let mut specs = Vec::new();
    for (k, name) in presets.iter().enumerate() {
        // Each domain walks its own path.
        let mut spec = DomainSpec::preset(name, seed.wrapping_add(k as u64), args.duration)?;
        spec.walk.rate_hz = args.rate;
        spec.walk.validate()?;
        specs.push(spec);
    }
    let outputs: Vec<String> = presets
        .iter()
        .flat_map(|p| ["imu.csv", "pose.csv", DatasetManifest::FILE_NAME].map(|f| format!("{p}/{f}")))
        .collect();
    let config = format!("duration = {}\nrate = {}\npresets = {}\n", args.duration, args.rate, presets.join(" "));
    create_dir(&cli.out)?;
    let refs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    RunManifest::new("synth-gen", seed, config, &[], &refs)?.write(&cli.out)?;

    for spec in &specs {
        let dir = cli.out.join(spec.domain.as_str());
        create_dir(&dir)?;
        let bundle = spec.generate()?;
        write_imu_csv(dir.join("imu.csv"), &bundle.imu)?;
        write_pose_csv(dir.join("pose.csv"), &bundle.poses)?;
        let manifest = DatasetManifest {
            imu: dir.join("imu.csv"),
            pose: Some(dir.join("pose.csv")),
            domain: spec.domain.clone(),
            rate_hz: args.rate,
        };
        write(&dir.join(DatasetManifest::FILE_NAME), &manifest.render(&dir))?;
        eprintln!("{}: {} samples", spec.domain, bundle.imu.len());
    }
    Ok(())
}

struct Dataset {
    manifest: DatasetManifest,
    imu: ImuSequence,
    poses: Option<Vec<PoseSample>>,
}

impl Dataset {
    fn load(dir: &Path) -> Result<Self> {
        let manifest = DatasetManifest::load_dir(dir)?;
        let imu = load_imu_csv(&manifest.imu, manifest.rate_hz)?;
        let poses = manifest.pose.as_ref().map(load_pose_csv).transpose()?;
        Ok(Self { manifest, imu, poses })
    }

    fn files(&self) -> Vec<PathBuf> {
        let mut f = vec![self.manifest.imu.clone()];
        f.extend(self.manifest.pose.clone());
        f
    }

    fn domain(&self) -> &DomainTag {
        &self.manifest.domain
    }

    fn windows(&self, n: usize, stride: usize) -> Result<Vec<Window>> {
        let w = make_windows(&self.imu, n, stride, self.domain())?;
        if w.is_empty() {
            return Err(Error::usage(format!(
                "{}: {} samples is shorter than one window of {n}",
                self.manifest.imu.display(),
                self.imu.len()
            )));
        }
        Ok(w)
    }

    fn labelled(&self, n: usize, stride: usize) -> Result<Vec<LabelledWindow>> {
        let poses = self.poses.as_ref().ok_or_else(|| {
            Error::data(format!("dataset `{}` has no pose file for labels", self.domain()))
        })?;
        self.windows(n, stride)?
            .into_iter()
            .map(|window| {
                let label = label_window(&window, poses)?;
                Ok(LabelledWindow { window, label })
            })
            .collect()
    }
}

pub fn train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let source = Dataset::load(&args.source)?;
    let target = Dataset::load(&args.target)?;
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            TrainConfig::parse(&text).map_err(|e| match e {
                Error::Usage(m) => Error::usage(format!("{}: {m}", path.display())),
                other => other,
            })?
        }
        None => TrainConfig::new(source.domain().clone(), target.domain().clone()),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(steps) = args.steps {
        config.steps = steps;
    }
    config.validate()?;
    if &config.source != source.domain() || &config.target != target.domain() {
        return Err(Error::usage(format!(
            "config pairs `{}` -> `{}` but the datasets are `{}` -> `{}`",
            config.source,
            config.target,
            source.domain(),
            target.domain()
        )));
    }
    let n = config.model.n;
    let stride = args.stride.unwrap_or(n);

    let mut inputs = source.files();
    inputs.extend(target.files());
    inputs.extend(cli.config.clone());
    create_dir(&cli.out)?;
    let snapshot = format!("mode = {}\nstride = {stride}\n{}", args.mode, config.render());
    RunManifest::new("train", config.seed, snapshot, &inputs, &[CHECKPOINT, HISTORY])?.write(&cli.out)?;

    // Data is prepared, and its normalization fitted the same way training
    // does, before the loop so intermediate checkpoints are usable.
    let (src, tgt) = match args.mode {
        TrainMode::Adapted => (source.labelled(n, stride)?, target.windows(n, stride)?),
        TrainMode::SourceOnly => (source.labelled(n, stride)?, Vec::new()),
        TrainMode::TargetOnly => (target.labelled(n, stride)?, Vec::new()),
    };
    let mut norms = BTreeMap::new();
    norms.insert(src[0].window.domain.clone(), fit_raw(src.iter().map(|l| &l.window))?);
    if !tgt.is_empty() {
        norms.insert(target.domain().clone(), fit_norm_stats(&tgt)?);
    }

    let ck_path = cli.out.join(CHECKPOINT);
    let every = config.checkpoint_every;
    let steps = config.steps;
    let log_every = (steps / 20).max(1);
    let mode = args.mode;
    let mut hook = |k: usize, bundle: &ModelBundle, r: &LossReport| {
        if k % log_every == 0 || k == steps {
            eprintln!("step {k}/{steps} total {:.5} pred {:.5} gan {:.4}", r.total, r.pred, r.gan);
        }
        if every > 0 && k % every == 0 {
            Checkpoint::new(mode, bundle, &norms).save(&ck_path)?;
        }
        Ok(())
    };
    let trained = match args.mode {
        TrainMode::Adapted => train_adapt_with(&src, &tgt, &config, TermMask::ALL, &mut hook)?,
        _ => train_supervised_with(&src, &config, &mut hook)?,
    };

    let mut history = format!("{LOSS_CSV_HEADER}\n");
    for (k, r) in trained.history.iter().enumerate() {
        history.push_str(&r.csv_row(k + 1));
        history.push('\n');
    }
    write(&cli.out.join(HISTORY), &history)?;
    Checkpoint::new(args.mode, &trained.bundle, &trained.norms).save(&ck_path)?;
    eprintln!("wrote {}", ck_path.display());
    Ok(())
}

fn fit_raw<'a>(windows: impl Iterator<Item = &'a Window>) -> Result<NormStats> {
    let w: Vec<Window> = windows.cloned().collect();
    fit_norm_stats(&w)
}

/// Normalization for `domain`, or the checkpoint's only one for baselines
/// applied outside their training domain.
fn pick_norm<'a>(ck: &'a Checkpoint, domain: Option<&DomainTag>) -> Result<&'a NormStats> {
    if let Some(d) = domain {
        if let Some(n) = ck.norms.get(d) {
            return Ok(n);
        }
    }
    if ck.norms.len() == 1 {
        return Ok(ck.norms.values().next().expect("one entry"));
    }
    let known: Vec<&str> = ck.norms.keys().map(DomainTag::as_str).collect();
    Err(Error::usage(format!(
        "choose a normalization domain with --domain; the checkpoint has {}",
        known.join(", ")
    )))
}

fn check_window(ck: &Checkpoint, window: Option<usize>) -> Result<()> {
    match window {
        Some(w) if w != ck.model.n => Err(Error::usage(format!(
            "window length {w} does not match the checkpoint's {}",
            ck.model.n
        ))),
        _ => Ok(()),
    }
}

pub fn eval(cli: &Cli, args: &EvalArgs) -> Result<()> {
    reject_config(cli, "eval")?;
    let ck = Checkpoint::load(&args.checkpoint)?;
    if ck.mode != args.mode {
        return Err(Error::usage(format!(
            "checkpoint was trained as {}, not {}",
            ck.mode, args.mode
        )));
    }
    check_window(&ck, args.window)?;
    let data = Dataset::load(&args.data)?;
    let mut inputs = vec![args.checkpoint.clone()];
    inputs.extend(data.files());
    create_dir(&cli.out)?;
    let snapshot = format!("mode = {}\ndomain = {}\n", args.mode, data.domain());
    RunManifest::new("eval", cli.seed.unwrap_or(0), snapshot, &inputs, &[EVAL_REPORT])?.write(&cli.out)?;

    let n = ck.model.n;
    let set = data.labelled(n, n)?;
    let bundle = ck.bundle()?;
    let report = evaluate(&bundle, pick_norm(&ck, Some(data.domain()))?, &set)?;
    let text = report.render();
    write(&cli.out.join(EVAL_REPORT), &text)?;
    print!("{text}");
    Ok(())
}

fn parse_pose(text: &str) -> Result<Pose2D> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::usage(format!("--p0 expects `x,y,psi`, got `{text}`")))?;
    match parts[..] {
        [x, y, psi] => Pose2D::new(x, y, psi),
        _ => Err(Error::usage(format!("--p0 expects `x,y,psi`, got `{text}`"))),
    }
}

pub fn track(cli: &Cli, args: &TrackArgs) -> Result<()> {
    reject_config(cli, "track")?;
    let ck = match (&args.checkpoint, args.oracle_labels) {
        (_, true) => None,
        (Some(p), false) => Some(Checkpoint::load(p)?),
        (None, false) => return Err(Error::usage("track needs --checkpoint unless --oracle-labels is given")),
    };
    if args.oracle_labels && args.pose.is_none() {
        return Err(Error::usage("--oracle-labels needs --pose"));
    }
    let n = match &ck {
        Some(c) => {
            check_window(c, args.window)?;
            c.model.n
        }
        None => args.window.unwrap_or(200),
    };
    let domain = args.domain.as_deref().map(DomainTag::new).transpose()?;
    let imu = load_imu_csv(&args.imu, args.rate)?;
    let poses = args.pose.as_ref().map(load_pose_csv).transpose()?;

    let mut inputs = vec![args.imu.clone()];
    inputs.extend(args.pose.clone());
    inputs.extend(args.checkpoint.clone());
    create_dir(&cli.out)?;
    let snapshot = format!(
        "window = {n}\noracle_labels = {}\np0 = {}\ndomain = {}\n",
        args.oracle_labels,
        args.p0.as_deref().unwrap_or(""),
        domain.as_ref().map(DomainTag::as_str).unwrap_or("")
    );
    RunManifest::new(
        "track",
        cli.seed.unwrap_or(0),
        snapshot,
        &inputs,
        &[TRAJECTORY_CSV, TRAJECTORY_SVG, TRACK_SUMMARY],
    )?
    .write(&cli.out)?;

    let tag = domain.clone().unwrap_or(DomainTag::new("recording")?);
    let windows = make_windows(&imu, n, n, &tag)?;
    if windows.is_empty() {
        return Err(Error::usage(format!(
            "{}: {} samples is shorter than one window of {n}",
            args.imu.display(),
            imu.len()
        )));
    }
    let polars = match (&ck, &poses) {
        (None, Some(p)) => windows.iter().map(|w| label_window(w, p)).collect::<Result<Vec<_>>>()?,
        (Some(c), _) => predict(&c.bundle()?, pick_norm(c, domain.as_ref())?, &windows)?,
        (None, None) => unreachable!("checked above"),
    };
    let mut boundaries: Vec<f64> = windows.iter().map(|w| w.t_start).collect();
    boundaries.push(windows[windows.len() - 1].t_end());
    let gt = poses.as_ref().map(|p| resample_gt(p, &boundaries)).transpose()?;
    let p0 = match (&args.p0, &gt) {
        (Some(text), _) => parse_pose(text)?,
        (None, Some(g)) => g.poses[0],
        (None, None) => Pose2D::origin(),
    };
    let mut traj = dead_reckon(p0, &polars, n as f64 * imu.dt())?;
    traj.t0 = boundaries[0];
    traj.write_csv(cli.out.join(TRAJECTORY_CSV))?;
    write(&cli.out.join(TRAJECTORY_SVG), &render_svg(&traj, gt.as_ref()))?;

    let mut summary = format!("windows = {}\npath_length = {}\n", polars.len(), traj.path_length());
    if let Some(g) = &gt {
        let end = traj.last();
        let want = g.last();
        summary.push_str(&format!(
            "gt_path_length = {}\nate = {}\nfinal_error = {}\n",
            g.path_length(),
            ate(&traj, g)?,
            (end.x - want.x).hypot(end.y - want.y)
        ));
    }
    write(&cli.out.join(TRACK_SUMMARY), &summary)?;
    print!("{summary}");
    Ok(())
}
