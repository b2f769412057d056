use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One prediction / ground-truth pairing. Paths are relative to the
/// manifest's directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_path: Option<PathBuf>,
    pub gt_path: PathBuf,
    /// Intrinsics text file.
    pub intrinsics_ref: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleManifest {
    pub dataset_name: String,
    /// Overrides the configured PNG depth scale for this dataset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub png_depth_scale: Option<u32>,
    pub entries: Vec<ManifestEntry>,
}

impl SampleManifest {
    /// Loads a manifest, resolves every path against its directory and
    /// checks that sample ids are unique and all referenced files exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: SampleManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for e in &mut manifest.entries {
            e.gt_path = base.join(&e.gt_path);
            e.intrinsics_ref = base.join(&e.intrinsics_ref);
            e.pred_path = e.pred_path.as_ref().map(|p| base.join(p));
        }
        manifest
            .validate()
            .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        Ok(manifest)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.entries.is_empty() {
            return Err("no entries".into());
        }
        if self.png_depth_scale == Some(0) {
            return Err("png_depth_scale must be non-zero".into());
        }
        let mut ids = HashSet::new();
        for e in &self.entries {
            if !ids.insert(e.sample_id.as_str()) {
                return Err(format!("duplicate sample_id {:?}", e.sample_id));
            }
            let paths = [Some(&e.gt_path), Some(&e.intrinsics_ref), e.pred_path.as_ref()];
            for p in paths.into_iter().flatten() {
                if !p.is_file() {
                    return Err(format!(
                        "sample {:?}: file not found: {}",
                        e.sample_id,
                        p.display()
                    ));
                }
            }
        }
        Ok(())
    }

    /// Fails unless every entry names a prediction.
    pub fn require_predictions(&self) -> Result<()> {
        match self.entries.iter().find(|e| e.pred_path.is_none()) {
            Some(e) => Err(Error::Manifest(format!(
                "sample {:?} has no pred_path",
                e.sample_id
            ))),
            None => Ok(()),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
