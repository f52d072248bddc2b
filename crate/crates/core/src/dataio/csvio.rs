use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::angle;
use crate::dataio::PoseSample;
use crate::error::{Error, Result};
use crate::imu::{ImuSample, ImuSequence, Vec3};

const IMU_HEADER: [&str; 7] = ["t", "wx", "wy", "wz", "ax", "ay", "az"];
const POSE_HEADER: [&str; 4] = ["t", "x", "y", "psi"];

/// Reads a CSV with a fixed header and returns the numeric rows. Row numbers
/// in errors count data rows from 1.
fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| Error::data(format!("{}: unreadable header: {e}", path.display())))?
        .clone();
    let found: Vec<&str> = found.iter().map(str::trim).collect();
    if found.len() == 1 && found[0].is_empty() {
        return Err(Error::data(format!("{}: file is empty", path.display())));
    }
    for col in header {
        if !found.contains(col) {
            return Err(Error::data(format!("{}: missing column `{col}`", path.display())));
        }
    }
    let index: Vec<usize> = header
        .iter()
        .map(|col| found.iter().position(|f| f == col).expect("checked above"))
        .collect();

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::data(format!("{}: row {row}: {e}", path.display())))?;
        let mut values = Vec::with_capacity(header.len());
        for (&col, name) in index.iter().zip(header) {
            let raw = record.get(col).ok_or_else(|| {
                Error::data(format!("{}: row {row}: missing `{name}`", path.display()))
            })?;
            let v: f64 = raw.trim().parse().map_err(|_| {
                Error::data(format!("{}: row {row}: `{name}` = {raw:?} is not a number", path.display()))
            })?;
            if !v.is_finite() {
                return Err(Error::data(format!(
                    "{}: row {row}: `{name}` is not finite",
                    path.display()
                )));
            }
            values.push(v);
        }
        if let Some(prev) = rows.last().map(|r: &Vec<f64>| r[0]) {
            if values[0] <= prev {
                return Err(Error::data(format!(
                    "{}: row {row}: timestamp {} does not increase (previous {prev})",
                    path.display(),
                    values[0]
                )));
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::data(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

/// Load an IMU stream with header `t,wx,wy,wz,ax,ay,az`.
pub fn load_imu_csv(path: impl AsRef<Path>, rate_hz: f64) -> Result<ImuSequence> {
    let path = path.as_ref();
    let rows = read_table(path, &IMU_HEADER)?;
    let samples = rows
        .into_iter()
        .map(|r| ImuSample::new(r[0], Vec3::new(r[1], r[2], r[3]), Vec3::new(r[4], r[5], r[6])))
        .collect();
    ImuSequence::new(samples, rate_hz)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

/// Load ground-truth poses with header `t,x,y,psi`; headings are wrapped
/// into (-π, π].
pub fn load_pose_csv(path: impl AsRef<Path>) -> Result<Vec<PoseSample>> {
    let rows = read_table(path.as_ref(), &POSE_HEADER)?;
    Ok(rows
        .into_iter()
        .map(|r| PoseSample {
            t: r[0],
            x: r[1],
            y: r[2],
            psi: angle::wrap(r[3]),
        })
        .collect())
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

// Values are written with Rust's shortest round-trip float formatting, so a
// write/read cycle is lossless.
pub fn write_imu_csv(path: impl AsRef<Path>, seq: &ImuSequence) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", IMU_HEADER.join(",")).map_err(io)?;
    for s in seq.samples() {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.t, s.gyro.x, s.gyro.y, s.gyro.z, s.accel.x, s.accel.y, s.accel.z
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_pose_csv(path: impl AsRef<Path>, poses: &[PoseSample]) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", POSE_HEADER.join(",")).map_err(io)?;
    for p in poses {
        writeln!(out, "{},{},{},{}", p.t, p.x, p.y, p.psi).map_err(io)?;
    }
    out.flush().map_err(io)
}
