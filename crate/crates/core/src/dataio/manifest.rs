use std::path::{Path, PathBuf};

use crate::dataio::DomainTag;
use crate::error::{Error, Result};
use crate::kv::KeyValues;

/// Describes one recorded domain on disk:
///
/// ```text
/// imu = imu.csv
/// pose = pose.csv      # optional, absent for unlabelled domains
/// domain = pocket
/// rate = 100
/// ```
///
/// Relative file paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub imu: PathBuf,
    pub pose: Option<PathBuf>,
    pub domain: DomainTag,
    pub rate_hz: f64,
}

impl DatasetManifest {
    pub const FILE_NAME: &'static str = "manifest.txt";

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let rate_hz: f64 = kv.get("rate")?;
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::data(format!("manifest rate must be positive, got {rate_hz}")));
        }
        Ok(Self {
            imu: resolve(kv.get("imu")?),
            pose: kv.get_opt::<String>("pose")?.map(resolve),
            domain: DomainTag::new(kv.get::<String>("domain")?)?,
            rate_hz,
        })
    }

    /// Load `manifest.txt` from a dataset directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(Self::FILE_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::parse(&text, dir)
    }

    /// Render with file names relative to `base` where possible.
    pub fn render(&self, base: &Path) -> String {
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).display().to_string();
        let mut kv = KeyValues::default();
        kv.insert("imu", rel(&self.imu));
        if let Some(pose) = &self.pose {
            kv.insert("pose", rel(pose));
        }
        kv.insert("domain", &self.domain);
        kv.insert("rate", self.rate_hz);
        kv.render()
    }
}
