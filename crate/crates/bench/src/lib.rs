//! Fixtures shared by the benchmarks.

use motran_core::dataio::{label_window, make_windows};
use motran_core::synth::DomainSpec;
use motran_core::training::TrainConfig;
use motran_core::{DomainTag, ImuSequence, LabelledWindow, PolarVector, Result, Window};

pub const WINDOW: usize = 200;

/// A simulated recording and its labelled windows.
pub fn recording(preset: &str, seed: u64, duration: f64) -> Result<(ImuSequence, Vec<LabelledWindow>)> {
    let bundle = DomainSpec::preset(preset, seed, duration)?.generate()?;
    let windows = make_windows(&bundle.imu, WINDOW, WINDOW, &bundle.domain)?;
    let labelled = windows
        .into_iter()
        .map(|window| {
            let label = label_window(&window, &bundle.poses)?;
            Ok(LabelledWindow { window, label })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((bundle.imu, labelled))
}

pub fn split(labelled: &[LabelledWindow]) -> (Vec<&Window>, Vec<PolarVector>) {
    labelled.iter().map(|lw| (&lw.window, lw.label)).unzip()
}

/// The default training configuration between two presets.
pub fn train_config(source: &str, target: &str, batch_size: usize) -> Result<TrainConfig> {
    let mut config = TrainConfig::new(DomainTag::new(source)?, DomainTag::new(target)?);
    config.batch_size = batch_size;
    Ok(config)
}
