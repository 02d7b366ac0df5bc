//! Model container: magic, `u32` format version, `u64` header length, a JSON
//! header, then every float as a little-endian `f64` in a fixed order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use triplet_core::classify::{LinearModel, SvmConfig};
use triplet_core::detector::{BackgroundStats, Matrix, TripletDetector};
use triplet_core::geometry::{AngleCosines, GeometryConfig, OrderSign, TriangleSignature};
use triplet_core::imaging::{FeatureVector, PatchLocation};
use triplet_core::mining::{CandidateId, MinedTriplet};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"TRIPLETM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub config: PipelineConfig,
    /// Class names indexed by class id.
    pub labels: Vec<String>,
    pub background: Option<BackgroundStats<f64>>,
    pub triplets: Vec<MinedTriplet<f64>>,
    pub classifier: Option<LinearModel<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: PipelineConfig,
    labels: Vec<String>,
    feature_dim: usize,
    background_count: Option<usize>,
    triplets: Vec<TripletHeader>,
    classifier: Option<ClassifierHeader>,
    floats: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TripletHeader {
    id: CandidateId,
    class_label: usize,
    order: i8,
    locations: [PatchLocation; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifierHeader {
    config: SvmConfig,
    classes: usize,
    dim: usize,
    epochs: Vec<usize>,
}

impl ModelFile {
    pub fn new(config: PipelineConfig, labels: Vec<String>) -> Self {
        Self {
            config,
            labels,
            background: None,
            triplets: Vec::new(),
            classifier: None,
        }
    }

    /// Feature dimension of the detectors (0 when none are stored).
    pub fn feature_dim(&self) -> usize {
        self.triplets
            .first()
            .map(|t| t.detector.dim())
            .or_else(|| self.background.as_ref().map(|b| b.dim()))
            .unwrap_or(0)
    }

    pub fn detectors(&self) -> Vec<TripletDetector<f64>> {
        self.triplets.iter().map(|t| t.detector.clone()).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let dim = self.feature_dim();
        let mut floats: Vec<f64> = Vec::new();
        if let Some(bg) = &self.background {
            check(bg.dim() == dim, "background dimension differs from the detectors")?;
            floats.extend_from_slice(&bg.mean);
            floats.extend_from_slice(bg.sigma.as_slice());
            floats.push(bg.lambda);
        }
        let mut triplets = Vec::with_capacity(self.triplets.len());
        for t in &self.triplets {
            let d = &t.detector;
            check(d.dim() == dim, "detectors differ in dimension")?;
            for w in &d.weights {
                floats.extend_from_slice(w);
            }
            floats.extend_from_slice(&d.signature.angles.0);
            floats.extend([d.geometry.eta_o, d.geometry.eta_s, d.geometry.degeneracy_eps]);
            floats.extend([t.entropy, t.mean_top_score]);
            triplets.push(TripletHeader {
                id: t.id,
                class_label: d.class_label,
                order: d.signature.order.as_i8(),
                locations: t.locations,
            });
        }
        let classifier = self.classifier.as_ref().map(|m| {
            for w in &m.weights {
                floats.extend_from_slice(w);
            }
            floats.extend_from_slice(&m.biases);
            ClassifierHeader {
                config: m.config,
                classes: m.num_classes(),
                dim: m.dim(),
                epochs: m.epochs.clone(),
            }
        });
        let header = Header {
            config: self.config.clone(),
            labels: self.labels.clone(),
            feature_dim: dim,
            background_count: self.background.as_ref().map(|b| b.count),
            triplets,
            classifier,
            floats: floats.len(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| CliError::Data(format!("model header: {e}")))?;
        let mut out = Vec::with_capacity(20 + json.len() + 8 * floats.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for f in floats {
            out.extend_from_slice(&f.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(CliError::Data("not a triplet model file".into()));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(CliError::Data(format!(
                "model format version {version} is not supported (expected {FORMAT_VERSION})"
            )));
        }
        let len = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
        let len = usize::try_from(len).map_err(|_| CliError::Data("model header too large".into()))?;
        let header: Header =
            serde_json::from_slice(r.take(len)?).map_err(|e| CliError::Data(format!("model header: {e}")))?;
        let body = r.take(header.floats.checked_mul(8).ok_or_else(|| corrupt("float count"))?)?;
        if r.pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        let mut f = Floats {
            values: body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))),
        };
        let dim = header.feature_dim;

        let background = match header.background_count {
            Some(count) => {
                let mean = FeatureVector::new(f.take(dim)?);
                let sigma = Matrix::from_rows(dim, f.take(dim * dim)?)?;
                let lambda = f.one()?;
                Some(BackgroundStats {
                    mean,
                    sigma,
                    lambda,
                    count,
                })
            }
            None => None,
        };
        let mut triplets = Vec::with_capacity(header.triplets.len());
        for th in header.triplets {
            let weights = [
                FeatureVector::new(f.take(dim)?),
                FeatureVector::new(f.take(dim)?),
                FeatureVector::new(f.take(dim)?),
            ];
            let angles = AngleCosines([f.one()?, f.one()?, f.one()?]);
            let geometry = GeometryConfig {
                eta_o: f.one()?,
                eta_s: f.one()?,
                degeneracy_eps: f.one()?,
            };
            let (entropy, mean_top_score) = (f.one()?, f.one()?);
            let order = OrderSign::from_i8(th.order).ok_or_else(|| corrupt("order sign"))?;
            let detector = TripletDetector::new(weights, TriangleSignature { order, angles }, th.class_label, geometry)?;
            triplets.push(MinedTriplet {
                id: th.id,
                detector,
                locations: th.locations,
                entropy,
                mean_top_score,
            });
        }
        let classifier = match header.classifier {
            Some(ch) => {
                let mut weights = Vec::with_capacity(ch.classes);
                for _ in 0..ch.classes {
                    weights.push(f.take(ch.dim)?);
                }
                Some(LinearModel {
                    weights,
                    biases: f.take(ch.classes)?,
                    config: ch.config,
                    epochs: ch.epochs,
                })
            }
            None => None,
        };
        if f.values.next().is_some() {
            return Err(corrupt("unread floats"));
        }
        Ok(Self {
            config: header.config,
            labels: header.labels,
            background,
            triplets,
            classifier,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn corrupt(what: &str) -> CliError {
    CliError::Data(format!("corrupt model file: {what}"))
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Data(msg.into()))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

struct Floats<I> {
    values: I,
}

impl<I: Iterator<Item = f64>> Floats<I> {
    fn one(&mut self) -> Result<f64> {
        self.values.next().ok_or_else(|| corrupt("float section too short"))
    }

    fn take(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.one()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use triplet_core::detector::{fit_background, Ridge};
    use triplet_core::imaging::PatchLocation;

    fn sample() -> ModelFile {
        let dim = 4;
        let locs = [
            PatchLocation::new(0, 0, 8),
            PatchLocation::new(16, 0, 8),
            PatchLocation::new(0, 16, 8),
        ];
        let w = |s: f64| FeatureVector::new((0..dim).map(|i| s * (i as f64 + 0.1).sin()).collect());
        let det = TripletDetector::from_locations([w(1.0), w(-2.0), w(1.0 / 3.0)], locs, 1, GeometryConfig::default())
            .unwrap();
        let patches: Vec<Vec<f64>> = (0..6).map(|k| (0..dim).map(|i| ((k * 7 + i) as f64).cos()).collect()).collect();
        let mut m = ModelFile::new(PipelineConfig::default(), vec!["a".into(), "b".into()]);
        m.background = Some(fit_background(&patches, Ridge::TraceFraction(0.01)).unwrap());
        m.triplets.push(MinedTriplet {
            id: CandidateId {
                neighborhood: 3,
                combination: 7,
            },
            detector: det,
            locations: locs,
            entropy: 0.1 + 0.2,
            mean_top_score: -1e-300,
        });
        m.classifier = Some(LinearModel {
            weights: vec![vec![std::f64::consts::PI], vec![-0.0]],
            biases: vec![f64::MIN_POSITIVE, 1e308],
            config: SvmConfig::default(),
            epochs: vec![3, 4],
        });
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = sample();
        let bytes = m.to_bytes().unwrap();
        let back = ModelFile::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        let c = back.classifier.unwrap();
        assert!(c.weights[1][0].is_sign_negative());
    }

    #[test]
    fn version_mismatch_fails() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        let err = ModelFile::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn truncation_and_garbage_fail() {
        let bytes = sample().to_bytes().unwrap();
        assert!(ModelFile::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(ModelFile::from_bytes(&extra).is_err());
        assert!(ModelFile::from_bytes(b"nonsense").is_err());
    }

    #[test]
    fn empty_model_round_trips() {
        let m = ModelFile::new(PipelineConfig::default(), vec![]);
        assert_eq!(ModelFile::from_bytes(&m.to_bytes().unwrap()).unwrap(), m);
    }
}
