//! Line-oriented JSON dataset manifests.
//!
//! One object per line: `{"path", "label", "bbox": [x, y, w, h]}` with
//! optional `"split"` (`"train"` / `"test"`), `"landmarks"` and
//! `"distractors"` (patch centers in original image pixels). Relative paths
//! resolve against the manifest's directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use triplet_core::imaging::{GrayImage, Rect};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    pub label: String,
    pub bbox: [usize; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distractors: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl ManifestEntry {
    pub fn rect(&self) -> Rect {
        let [x, y, w, h] = self.bbox;
        Rect::new(x, y, w, h)
    }

    fn check(&self, line: usize) -> Result<()> {
        if self.label.is_empty() {
            return Err(CliError::Data(format!("line {line}: empty label")));
        }
        if self.bbox[2] == 0 || self.bbox[3] == 0 {
            return Err(CliError::Data(format!("line {line}: bbox has zero area")));
        }
        Ok(())
    }

    /// Whether the entry belongs to `split`; entries without a tag belong to every split.
    pub fn in_split(&self, split: Split) -> bool {
        self.split.map_or(true, |s| s == split)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(line)
                .map_err(|e| CliError::Data(format!("manifest line {}: {e}", i + 1)))?;
            entry.check(i + 1)?;
            entries.push(entry);
        }
        Ok(Self {
            root: root.into(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, root)
    }

    /// Verifies every referenced file exists.
    pub fn check_paths(&self) -> Result<()> {
        for e in &self.entries {
            let p = self.resolve(e);
            if !p.is_file() {
                return Err(CliError::Data(format!("missing image {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("manifest entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()).map_err(|e| CliError::io(path, e))
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        let p = Path::new(&entry.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn split(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.in_split(split)).collect()
    }

    /// Sorted distinct labels.
    pub fn labels(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| e.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Decodes PNG or JPEG into a grayscale image in `[0, 1]`.
pub fn load_gray(path: &Path) -> Result<GrayImage<f64>> {
    let img = image::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let gray = if img.color().has_color() {
        let rgb = img.to_rgb8();
        GrayImage::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())?
    } else {
        let luma = img.to_luma8();
        GrayImage::from_luma8(luma.width() as usize, luma.height() as usize, luma.as_raw())?
    };
    Ok(gray)
}

pub fn save_gray(image: &GrayImage<f64>, path: &Path) -> Result<()> {
    let buf = image::GrayImage::from_raw(image.width() as u32, image.height() as u32, image.to_luma8())
        .expect("buffer matches dimensions");
    buf.save(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
