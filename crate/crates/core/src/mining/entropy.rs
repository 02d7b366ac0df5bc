//! Entropy of the class distribution among a detector's top detections, and
//! per-class selection of the lowest-entropy detectors.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::proposal::CandidateId;
use crate::detector::{detect_with_mirror, rank_desc, DetectionParams, ImageFeatures, TripletDetector};
use crate::error::{Error, Result};
use crate::imaging::PatchLocation;
use crate::scalar::Scalar;

/// A labeled image prepared for detection.
#[derive(Clone, Copy, Debug)]
pub struct EvalImage<'a, T> {
    pub label: usize,
    pub features: &'a ImageFeatures<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyScore<T> {
    /// Shannon entropy (natural log) of the class distribution.
    pub entropy: T,
    /// Mean total score of the top detections.
    pub mean_top_score: T,
}

/// `-sum_c p_c ln p_c` of the empirical label distribution.
pub fn label_entropy<T: Scalar>(labels: &[usize]) -> T {
    if labels.is_empty() {
        return T::zero();
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let n = T::from_count(labels.len());
    let h = counts.values().fold(T::zero(), |h, &c| {
        let p = T::from_count(c) / n;
        h - p * p.ln()
    });
    h.max(T::zero())
}

/// Default number of top detections: `min(50, n / 4)`, at least 1.
pub fn default_top_m(eval_len: usize) -> usize {
    (eval_len / 4).clamp(1, 50)
}

/// Runs the detector (with mirroring) on every evaluation image and scores the
/// class purity of the `top_m` strongest detections. Images without any valid
/// triplet are ranked below all detections and never enter the top set.
pub fn entropy_score<T: Scalar>(
    det: &TripletDetector<T>,
    eval: &[EvalImage<'_, T>],
    top_m: usize,
    params: &DetectionParams,
) -> Result<EntropyScore<T>> {
    if top_m == 0 || top_m > eval.len() {
        return Err(Error::InvalidConfig(format!(
            "top_m={top_m} must lie in 1..={}",
            eval.len()
        )));
    }
    let mut scored = Vec::with_capacity(eval.len());
    for (i, img) in eval.iter().enumerate() {
        if let Some(d) = detect_with_mirror(img.features, det, params)? {
            scored.push((i, d.total));
        }
    }
    if scored.is_empty() {
        return Err(Error::DegenerateDetector("no valid detection in any evaluation image".into()));
    }
    Ok(entropy_from_scores(&scored, eval, top_m))
}

fn entropy_from_scores<T: Scalar>(scored: &[(usize, T)], eval: &[EvalImage<'_, T>], top_m: usize) -> EntropyScore<T> {
    let mut ranked = scored.to_vec();
    ranked.sort_by(|&a, &b| rank_desc(a, b));
    ranked.truncate(top_m);
    let labels: Vec<usize> = ranked.iter().map(|&(i, _)| eval[i].label).collect();
    let mean = ranked.iter().fold(T::zero(), |s, &(_, v)| s + v) / T::from_count(ranked.len());
    EntropyScore {
        entropy: label_entropy(&labels),
        mean_top_score: mean,
    }
}

/// A scored candidate detector.
#[derive(Clone, Debug, PartialEq)]
pub struct MinedTriplet<T> {
    pub id: CandidateId,
    pub detector: TripletDetector<T>,
    /// Reference patch locations the detector was built from.
    pub locations: [PatchLocation; 3],
    pub entropy: T,
    pub mean_top_score: T,
}

/// Scores many detectors in parallel; results keep the input order.
/// Detectors that never fire come back as `None`.
pub fn score_candidates<T: Scalar>(
    detectors: &[TripletDetector<T>],
    eval: &[EvalImage<'_, T>],
    top_m: usize,
    params: &DetectionParams,
) -> Result<Vec<Option<EntropyScore<T>>>> {
    detectors
        .par_iter()
        .map(|det| match entropy_score(det, eval, top_m, params) {
            Ok(s) => Ok(Some(s)),
            Err(Error::DegenerateDetector(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Per class: ascending entropy, then descending mean top score, then id;
/// keeps `per_class`. Output is grouped by ascending class label.
pub fn select_triplets<T: Scalar>(candidates: Vec<MinedTriplet<T>>, per_class: usize) -> Vec<MinedTriplet<T>> {
    let mut by_class: BTreeMap<usize, Vec<MinedTriplet<T>>> = BTreeMap::new();
    for c in candidates {
        by_class.entry(c.detector.class_label).or_default().push(c);
    }
    let mut out = Vec::new();
    for (class, mut pool) in by_class {
        pool.sort_by(|a, b| {
            a.entropy
                .partial_cmp(&b.entropy)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(
                    b.mean_top_score
                        .partial_cmp(&a.mean_top_score)
                        .unwrap_or(std::cmp::Ordering::Equal),
                )
                .then(a.id.cmp(&b.id))
        });
        if pool.len() < per_class {
            log::warn!(
                "class {class}: only {} candidate triplets for {per_class} requested; keeping all",
                pool.len()
            );
        }
        pool.truncate(per_class);
        out.extend(pool);
    }
    out
}
