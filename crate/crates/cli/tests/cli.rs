use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use motran_core::training::EvalReport;

fn motran(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motran")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn digest(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

/// Two short recordings in `dir`: handheld (seed 1) and pocket (seed 2).
fn generate(dir: &Path, duration: &str) -> (PathBuf, PathBuf) {
    let o = motran(&[
        "--seed", "1", "--out", s(dir), "synth-gen", "--duration", duration,
        "--preset", "synthetic-handheld", "--preset", "synthetic-pocket",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    (dir.join("synthetic-handheld"), dir.join("synthetic-pocket"))
}

const SMALL_CONFIG: &str = "\
lambda1 = 0.01
lambda2 = 100
lambda3 = 0.1
lambda4 = 1
lr = 0.003
batch_size = 4
steps = 50
disc_steps_per_gen_step = 1
seed = 0
window = 200
d_z = 4
enc_hidden = 4
gen_hidden = 4
pred_hidden = 4
disc_channels = 2
disc_hidden = 2
source = synthetic-handheld
target = synthetic-pocket
checkpoint_every = 0
";

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("train.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn synth_gen_defaults_write_all_presets() {
    let dir = tempfile::tempdir().unwrap();
    let o = motran(&["--out", s(dir.path()), "synth-gen", "--duration", "60", "--rate", "100"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for preset in ["synthetic-handheld", "synthetic-pocket", "synthetic-trolley"] {
        let d = dir.path().join(preset);
        let imu = std::fs::read_to_string(d.join("imu.csv")).unwrap();
        assert_eq!(imu.lines().next(), Some("t,wx,wy,wz,ax,ay,az"));
        assert_eq!(imu.lines().count() - 1, 6000, "{preset}");
        assert!(d.join("pose.csv").exists());
        let m = motran_core::dataio::DatasetManifest::load_dir(&d).unwrap();
        assert_eq!(m.domain.as_str(), preset);
    }
    assert!(dir.path().join("run_manifest.json").exists());
}

#[test]
fn synth_gen_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    generate(a.path(), "30");
    generate(b.path(), "30");
    let o = motran(&["--seed", "2", "--out", s(c.path()), "synth-gen", "--duration", "30", "--preset", "synthetic-handheld"]);
    assert_eq!(code(&o), 0);
    for f in ["synthetic-handheld/imu.csv", "synthetic-pocket/pose.csv", "run_manifest.json"] {
        assert_eq!(digest(&a.path().join(f)), digest(&b.path().join(f)), "{f}");
    }
    let f = "synthetic-handheld/imu.csv";
    assert_ne!(digest(&a.path().join(f)), digest(&c.path().join(f)));
}

#[test]
fn unknown_preset_and_bad_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&motran(&["--out", s(dir.path()), "synth-gen", "--preset", "backpack"])), 2);
    assert_eq!(code(&motran(&["synth-gen", "--bogus"])), 2);
    assert_eq!(code(&motran(&["fly"])), 2);
}

#[test]
fn missing_dataset_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = motran(&[
        "--out", s(dir.path()), "train", "--source", s(&dir.path().join("nope")), "--target", s(dir.path()),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn missing_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = generate(dir.path(), "20");
    let text: String = SMALL_CONFIG.lines().filter(|l| !l.starts_with("d_z")).map(|l| format!("{l}\n")).collect();
    let cfg = write_config(dir.path(), &text);
    let o = motran(&[
        "--config", s(&cfg), "--out", s(&dir.path().join("run")), "train", "--source", s(&src), "--target", s(&tgt),
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing config key `d_z`"), "{}", stderr(&o));
}

#[test]
fn train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = generate(dir.path(), "40");
    let cfg = write_config(dir.path(), SMALL_CONFIG);
    let run = dir.path().join("run");
    let o = motran(&[
        "--config", s(&cfg), "--out", s(&run), "train", "--source", s(&src), "--target", s(&tgt), "--steps", "10",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let history = std::fs::read_to_string(run.join("history.csv")).unwrap();
    assert_eq!(history.lines().next(), Some("step,gan,ae,pred,cycle,percep,total"));
    assert_eq!(history.lines().count() - 1, 10);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("run_manifest.json")).unwrap()).unwrap();
    for input in manifest["inputs"].as_array().unwrap() {
        let path = PathBuf::from(input["path"].as_str().unwrap());
        assert_eq!(input["sha256"].as_str().unwrap(), digest(&path));
    }
    assert!(manifest["config"].as_str().unwrap().contains("steps = 10"));

    let ck = run.join("checkpoint.json");
    let ev = dir.path().join("eval");
    let o = motran(&["--out", s(&ev), "eval", "--checkpoint", s(&ck), "--data", s(&tgt), "--mode", "adapted"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(ev.join("eval_report.txt")).unwrap();
    let report = EvalReport::parse(&text).unwrap();
    assert_eq!(report.n_windows, 20);
    assert_eq!(report.render(), text);
    assert_eq!(String::from_utf8_lossy(&o.stdout), text);

    let o = motran(&["--out", s(&ev), "eval", "--checkpoint", s(&ck), "--data", s(&tgt), "--mode", "source-only"]);
    assert_eq!(code(&o), 2);
    let o = motran(&[
        "--out", s(&ev), "eval", "--checkpoint", s(&ck), "--data", s(&tgt), "--mode", "adapted", "--window", "100",
    ]);
    assert_eq!(code(&o), 2);

    // Same inputs, same outputs.
    let again = dir.path().join("again");
    let o = motran(&[
        "--config", s(&cfg), "--out", s(&again), "train", "--source", s(&src), "--target", s(&tgt), "--steps", "10",
    ]);
    assert_eq!(code(&o), 0);
    for f in ["checkpoint.json", "history.csv", "run_manifest.json"] {
        assert_eq!(digest(&run.join(f)), digest(&again.join(f)), "{f}");
    }

    let tr = dir.path().join("track");
    let o = motran(&[
        "--out", s(&tr), "track", "--checkpoint", s(&ck), "--imu", s(&tgt.join("imu.csv")),
        "--domain", "synthetic-pocket", "--pose", s(&tgt.join("pose.csv")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = std::fs::read_to_string(tr.join("trajectory.csv")).unwrap();
    assert_eq!(rows.lines().count() - 1, 20 + 1);
}

#[test]
fn baseline_modes_train() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = generate(dir.path(), "20");
    let cfg = write_config(dir.path(), SMALL_CONFIG);
    for mode in ["source-only", "target-only"] {
        let run = dir.path().join(mode);
        let o = motran(&[
            "--config", s(&cfg), "--out", s(&run), "train", "--source", s(&src), "--target", s(&tgt),
            "--steps", "3", "--mode", mode,
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let o = motran(&[
            "--out", s(&run), "eval", "--checkpoint", s(&run.join("checkpoint.json")), "--data", s(&tgt),
            "--mode", mode,
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
}

#[test]
fn diverging_training_exits_with_numeric_code() {
    let dir = tempfile::tempdir().unwrap();
    let (src, tgt) = generate(dir.path(), "20");
    let cfg = write_config(dir.path(), &SMALL_CONFIG.replace("lr = 0.003", "lr = 1e200"));
    let o = motran(&[
        "--config", s(&cfg), "--out", s(&dir.path().join("run")), "train", "--source", s(&src), "--target", s(&tgt),
    ]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn oracle_track_replays_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let (src, _) = generate(dir.path(), "60");
    let out = dir.path().join("track");
    let o = motran(&[
        "--out", s(&out), "track", "--oracle-labels", "--imu", s(&src.join("imu.csv")), "--pose", s(&src.join("pose.csv")),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = motran_core::kv::KeyValues::parse(&std::fs::read_to_string(out.join("track_summary.txt")).unwrap()).unwrap();
    let err: f64 = summary.get("final_error").unwrap();
    let path: f64 = summary.get("gt_path_length").unwrap();
    assert!(err <= 0.02 * path, "{err} {path}");
    let windows: usize = summary.get("windows").unwrap();
    assert_eq!(windows, 30);
    let rows = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(rows.lines().count() - 1, windows + 1);
    let svg = std::fs::read_to_string(out.join("trajectory.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn track_rejects_short_stream_and_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (src, _) = generate(dir.path(), "1");
    let out = dir.path().join("t");
    let o = motran(&[
        "--out", s(&out), "track", "--oracle-labels", "--imu", s(&src.join("imu.csv")), "--pose", s(&src.join("pose.csv")),
    ]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = motran(&["--out", s(&out), "track", "--imu", s(&src.join("imu.csv"))]);
    assert_eq!(code(&o), 2);
    let o = motran(&["--out", s(&out), "track", "--oracle-labels", "--imu", s(&src.join("imu.csv"))]);
    assert_eq!(code(&o), 2);
    let o = motran(&[
        "--out", s(&out), "track", "--oracle-labels", "--imu", s(&src.join("imu.csv")), "--pose",
        s(&src.join("pose.csv")), "--p0", "1,2",
    ]);
    assert_eq!(code(&o), 2);
}
