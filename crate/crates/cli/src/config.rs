//! Pipeline configuration. Defaults follow the published settings: 64 px
//! patches every 8 px on crops resized to 500 px wide, neighborhoods of 20,
//! the top 6 locations per neighborhood, 300 triplets per class, and
//! `eta_o = 0.5`, `eta_s = 1`.

use serde::{Deserialize, Serialize};
use triplet_core::detector::DetectionParams;
use triplet_core::geometry::GeometryConfig;
use triplet_core::imaging::{HogConfig, PatchGrid, MIN_SIDE};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub patch_side: usize,
    pub stride: usize,
    /// Width crops are resized to before feature extraction.
    pub target_width: usize,
    /// Square frame neighborhood members are resampled to for discriminative maps.
    pub canonical_side: usize,
    /// Square frame for whole-image retrieval descriptors.
    pub descriptor_side: usize,
    pub neighborhood_size: usize,
    pub top_locations: usize,
    pub triplets_per_class: usize,
    pub k_top: usize,
    pub eta_o: f64,
    pub eta_s: f64,
    pub overlap_max: f64,
    /// Top detections used for the entropy; `None` means `min(50, n / 4)`.
    pub top_m: Option<usize>,
    pub svm_c: f64,
    pub svm_max_epochs: usize,
    pub svm_tolerance: f64,
    pub rng_seed: u64,
    /// Restrict each neighborhood to the seed class plus this many random classes.
    pub negative_class_subsample: Option<usize>,
    /// Restrict the entropy evaluation pool to the candidate class plus this many random classes.
    pub eval_negative_classes: Option<usize>,
    /// Covariance ridge as a fraction of `trace / dim`.
    pub ridge_fraction: f64,
    /// Cap on patches fed to the background statistics (evenly subsampled).
    pub max_background_patches: usize,
    pub discriminative_eps: f64,
    pub hog: HogConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            patch_side: 64,
            stride: 8,
            target_width: 500,
            canonical_side: 256,
            descriptor_side: 128,
            neighborhood_size: 20,
            top_locations: 6,
            triplets_per_class: 300,
            k_top: 5,
            eta_o: 0.5,
            eta_s: 1.0,
            overlap_max: 0.25,
            top_m: None,
            svm_c: 1.0,
            svm_max_epochs: 1000,
            svm_tolerance: 1e-4,
            rng_seed: 0,
            negative_class_subsample: None,
            eval_negative_classes: None,
            ridge_fraction: 0.01,
            max_background_patches: 20_000,
            discriminative_eps: 1e-6,
            hog: HogConfig::default(),
        }
    }
}

fn bad(msg: String) -> CliError {
    CliError::Config(msg)
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.hog.validate().map_err(|e| bad(e.to_string()))?;
        let cell = self.hog.cell_size;
        if self.patch_side == 0 || self.patch_side % cell != 0 || self.hog.patch_dim(self.patch_side) == 0 {
            return Err(bad(format!(
                "patch_side {} must be a positive multiple of the {cell} px cell holding one block",
                self.patch_side
            )));
        }
        if self.stride == 0 || self.stride % (cell * self.hog.block_stride) != 0 {
            return Err(bad(format!(
                "stride {} must be a positive multiple of {} px",
                self.stride,
                cell * self.hog.block_stride
            )));
        }
        if self.target_width < MIN_SIDE.max(self.patch_side) {
            return Err(bad(format!("target_width {} is below {}", self.target_width, MIN_SIDE.max(self.patch_side))));
        }
        if self.canonical_side < self.patch_side || self.canonical_side % cell != 0 {
            return Err(bad(format!(
                "canonical_side {} must hold a patch and be a multiple of {cell}",
                self.canonical_side
            )));
        }
        if self.descriptor_side < 2 * cell || self.descriptor_side % cell != 0 {
            return Err(bad(format!("descriptor_side {} must be a multiple of {cell} of at least two cells", self.descriptor_side)));
        }
        if self.neighborhood_size < 2 {
            return Err(bad("neighborhood_size must be at least 2".into()));
        }
        if self.top_locations < 3 {
            return Err(bad("top_locations must be at least 3".into()));
        }
        if self.triplets_per_class == 0 || self.k_top == 0 {
            return Err(bad("triplets_per_class and k_top must be positive".into()));
        }
        for (name, v) in [("eta_o", self.eta_o), ("eta_s", self.eta_s), ("overlap_max", self.overlap_max)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(format!("{name}={v} must lie in [0, 1]")));
            }
        }
        if self.top_m == Some(0) {
            return Err(bad("top_m must be positive".into()));
        }
        if !(self.svm_c > 0.0) || !(self.svm_tolerance > 0.0) || self.svm_max_epochs == 0 {
            return Err(bad("svm_c, svm_tolerance and svm_max_epochs must be positive".into()));
        }
        if !(self.ridge_fraction > 0.0) || !(self.discriminative_eps >= 0.0) {
            return Err(bad("ridge_fraction must be positive and discriminative_eps non-negative".into()));
        }
        if self.max_background_patches < 2 {
            return Err(bad("max_background_patches must be at least 2".into()));
        }
        Ok(())
    }

    pub fn patch_grid(&self) -> PatchGrid {
        PatchGrid::new(self.patch_side, self.stride)
    }

    pub fn detection_params(&self) -> DetectionParams {
        DetectionParams {
            grid: self.patch_grid(),
            k: self.k_top,
            overlap_max: self.overlap_max,
        }
    }

    pub fn geometry(&self) -> GeometryConfig<f64> {
        GeometryConfig {
            eta_o: self.eta_o,
            eta_s: self.eta_s,
            ..GeometryConfig::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| bad(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn out_of_range_values_are_config_errors() {
        let cfg = PipelineConfig {
            eta_o: 1.5,
            ..PipelineConfig::default()
        };
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        let cfg = PipelineConfig {
            stride: 12,
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig {
            top_locations: 2,
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg = PipelineConfig::from_json(r#"{"patch_side": 32, "rng_seed": 7}"#).unwrap();
        assert_eq!(cfg.patch_side, 32);
        assert_eq!(cfg.neighborhood_size, 20);
        assert!(PipelineConfig::from_json(r#"{"nope": 1}"#).is_err());
    }
}
