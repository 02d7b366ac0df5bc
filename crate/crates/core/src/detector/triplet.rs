//! Triplet detectors: three LDA appearance models scored jointly with the
//! order and shape penalties.

use serde::{Deserialize, Serialize};

use super::nms::{score_hog_grid, top_k_nms, Detection, ScoreMap};
use crate::error::{Error, Result};
use crate::geometry::{order_sign, triangle_angles, GeometryConfig, OrderSign, Point, TriangleSignature};
use crate::imaging::{mirror, FeatureVector, GrayImage, HogConfig, HogGrid, PatchGrid, PatchLocation};
use crate::scalar::Scalar;

/// `{w_A, w_B, w_C, G_ABC, Theta_ABC}` plus the class it was mined for.
#[derive(Clone, Debug, PartialEq)]
pub struct TripletDetector<T> {
    pub weights: [FeatureVector<T>; 3],
    pub signature: TriangleSignature<T>,
    pub class_label: usize,
    pub geometry: GeometryConfig<T>,
}

impl<T: Scalar> TripletDetector<T> {
    pub fn new(
        weights: [FeatureVector<T>; 3],
        signature: TriangleSignature<T>,
        class_label: usize,
        geometry: GeometryConfig<T>,
    ) -> Result<Self> {
        geometry.validate()?;
        let dim = weights[0].dim();
        for w in &weights[1..] {
            if w.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: w.dim(),
                });
            }
        }
        if signature.order == OrderSign::Degenerate {
            return Err(Error::DegenerateTriangle("detector signature is degenerate".into()));
        }
        Ok(Self {
            weights,
            signature,
            class_label,
            geometry,
        })
    }

    /// Detector whose signature is taken from three reference patch locations.
    pub fn from_locations(
        weights: [FeatureVector<T>; 3],
        locations: [PatchLocation; 3],
        class_label: usize,
        geometry: GeometryConfig<T>,
    ) -> Result<Self> {
        let [a, b, c] = locations.map(|l| l.center::<T>());
        let signature = TriangleSignature::from_points(a, b, c, geometry.degeneracy_eps)?;
        Self::new(weights, signature, class_label, geometry)
    }

    pub fn dim(&self) -> usize {
        self.weights[0].dim()
    }

    /// Same detector with different penalty weights.
    pub fn with_geometry(&self, geometry: GeometryConfig<T>) -> Self {
        Self {
            geometry,
            ..self.clone()
        }
    }
}

/// Search parameters shared by every detection call.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    pub grid: PatchGrid,
    /// Detections kept per appearance model before the joint search.
    pub k: usize,
    /// IoU above which two patches count as overlapping.
    pub overlap_max: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            grid: PatchGrid::default(),
            k: 5,
            overlap_max: 0.25,
        }
    }
}

/// Best geometrically penalized triplet in one image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripletDetection<T> {
    /// Patches for roles A', B', C' in the frame that was searched.
    pub locations: [PatchLocation; 3],
    pub appearance: [T; 3],
    pub order_penalty: T,
    pub shape_penalty: T,
    pub total: T,
    /// Whether the winning orientation was the horizontal mirror.
    pub mirrored: bool,
}

impl<T: Scalar> TripletDetection<T> {
    /// Locations in the unflipped image of the given width.
    pub fn locations_in_original(&self, width: usize) -> [PatchLocation; 3] {
        if self.mirrored {
            self.locations.map(|l| l.mirrored(width))
        } else {
            self.locations
        }
    }
}

/// Score of a missing detection: below every real score and distinct from zero.
pub fn response<T: Scalar>(detection: &Option<TripletDetection<T>>) -> T {
    detection.map_or(T::neg_infinity(), |d| d.total)
}

/// One scored candidate for a role.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoleCandidate<T> {
    pub center: Point<T>,
    pub score: T,
}

/// How a combination with collinear or coincident centers is treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegeneratePolicy {
    /// Drop the combination.
    Skip,
    /// Keep it with the largest penalty each constraint can apply.
    MaxPenalty,
}

/// Winning role assignment `(i, j, l)` and its score terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Combination<T> {
    pub indices: [usize; 3],
    pub appearance: [T; 3],
    pub order_penalty: T,
    pub shape_penalty: T,
    pub total: T,
}

/// Evaluates every role-assigned combination and returns the argmax of
/// `(S_A + S_B + S_C) * p_o * p_s`. Ties keep the first combination in
/// lexicographic `(i, j, l)` order.
pub fn best_combination<T: Scalar>(
    signature: &TriangleSignature<T>,
    geometry: &GeometryConfig<T>,
    roles: [&[RoleCandidate<T>]; 3],
    mut admissible: impl FnMut([usize; 3]) -> bool,
    degenerate: DegeneratePolicy,
) -> Option<Combination<T>> {
    let mut best: Option<Combination<T>> = None;
    for (i, a) in roles[0].iter().enumerate() {
        for (j, b) in roles[1].iter().enumerate() {
            for (l, c) in roles[2].iter().enumerate() {
                let indices = [i, j, l];
                if !admissible(indices) {
                    continue;
                }
                let sign = order_sign(a.center, b.center, c.center, geometry.degeneracy_eps);
                let angles = triangle_angles(a.center, b.center, c.center);
                let (po, ps) = match (sign, angles) {
                    (OrderSign::Degenerate, _) | (_, Err(_)) => match degenerate {
                        DegeneratePolicy::Skip => continue,
                        DegeneratePolicy::MaxPenalty => {
                            let po = if signature.order == OrderSign::Degenerate {
                                T::one()
                            } else {
                                T::one() - geometry.eta_o
                            };
                            (po, T::one() - geometry.eta_s)
                        }
                    },
                    (sign, Ok(angles)) => signature.penalties(&TriangleSignature { order: sign, angles }, geometry),
                };
                let total = (a.score + b.score + c.score) * po * ps;
                if best.map_or(true, |bst| total > bst.total) {
                    best = Some(Combination {
                        indices,
                        appearance: [a.score, b.score, c.score],
                        order_penalty: po,
                        shape_penalty: ps,
                        total,
                    });
                }
            }
        }
    }
    best
}

/// Joint search over per-role detections; overlapping or degenerate combinations are skipped.
pub fn search_detections<T: Scalar>(
    det: &TripletDetector<T>,
    per_role: [&[Detection<T>]; 3],
    overlap_max: f64,
) -> Option<TripletDetection<T>> {
    let roles = per_role.map(|dets| {
        dets.iter()
            .map(|d| RoleCandidate {
                center: d.loc.center(),
                score: d.score,
            })
            .collect::<Vec<_>>()
    });
    let combo = best_combination(
        &det.signature,
        &det.geometry,
        [&roles[0], &roles[1], &roles[2]],
        |[i, j, l]| {
            let (a, b, c) = (per_role[0][i].loc, per_role[1][j].loc, per_role[2][l].loc);
            a.iou(&b) <= overlap_max && a.iou(&c) <= overlap_max && b.iou(&c) <= overlap_max
        },
        DegeneratePolicy::Skip,
    )?;
    let [i, j, l] = combo.indices;
    Some(TripletDetection {
        locations: [per_role[0][i].loc, per_role[1][j].loc, per_role[2][l].loc],
        appearance: combo.appearance,
        order_penalty: combo.order_penalty,
        shape_penalty: combo.shape_penalty,
        total: combo.total,
        mirrored: false,
    })
}

/// Greedy detection from precomputed appearance score maps: top-`k` NMS per role, then `k^3` combinations.
pub fn detect_triplet_in_maps<T: Scalar>(
    det: &TripletDetector<T>,
    maps: [&ScoreMap<T>; 3],
    k: usize,
    overlap_max: f64,
) -> Option<TripletDetection<T>> {
    let tops = maps.map(|m| top_k_nms(m, k, overlap_max));
    search_detections(det, [&tops[0], &tops[1], &tops[2]], overlap_max)
}

/// Greedy detection on one orientation of an image.
pub fn detect_on_grid<T: Scalar>(
    hog: &HogGrid<T>,
    det: &TripletDetector<T>,
    params: &DetectionParams,
) -> Result<Option<TripletDetection<T>>> {
    let maps = [
        score_hog_grid(hog, &det.weights[0], params.grid)?,
        score_hog_grid(hog, &det.weights[1], params.grid)?,
        score_hog_grid(hog, &det.weights[2], params.grid)?,
    ];
    Ok(detect_triplet_in_maps(det, [&maps[0], &maps[1], &maps[2]], params.k, params.overlap_max))
}

pub fn detect_triplet<T: Scalar>(
    image: &GrayImage<T>,
    det: &TripletDetector<T>,
    params: &DetectionParams,
    hog: &HogConfig,
) -> Result<Option<TripletDetection<T>>> {
    detect_on_grid(&HogGrid::new(image, hog)?, det, params)
}

/// HOG grids of an image and of its horizontal mirror.
#[derive(Clone, Debug)]
pub struct ImageFeatures<T> {
    pub upright: HogGrid<T>,
    pub mirrored: HogGrid<T>,
}

impl<T: Scalar> ImageFeatures<T> {
    pub fn new(image: &GrayImage<T>, hog: &HogConfig) -> Result<Self> {
        Ok(Self {
            upright: HogGrid::new(image, hog)?,
            mirrored: HogGrid::new(&mirror(image), hog)?,
        })
    }

    /// Features of the mirrored image, reusing both grids.
    pub fn swapped(&self) -> Self {
        Self {
            upright: self.mirrored.clone(),
            mirrored: self.upright.clone(),
        }
    }
}

/// Larger of the upright and mirrored detections; ties keep the upright one.
pub fn detect_with_mirror<T: Scalar>(
    features: &ImageFeatures<T>,
    det: &TripletDetector<T>,
    params: &DetectionParams,
) -> Result<Option<TripletDetection<T>>> {
    let upright = detect_on_grid(&features.upright, det, params)?;
    let flipped = detect_on_grid(&features.mirrored, det, params)?.map(|d| TripletDetection {
        mirrored: true,
        ..d
    });
    Ok(match (upright, flipped) {
        (Some(u), Some(f)) if f.total > u.total => Some(f),
        (Some(u), _) => Some(u),
        (None, f) => f,
    })
}

pub fn detect_with_mirror_image<T: Scalar>(
    image: &GrayImage<T>,
    det: &TripletDetector<T>,
    params: &DetectionParams,
    hog: &HogConfig,
) -> Result<Option<TripletDetection<T>>> {
    detect_with_mirror(&ImageFeatures::new(image, hog)?, det, params)
}
