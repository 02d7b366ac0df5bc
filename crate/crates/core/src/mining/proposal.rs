use serde::{Deserialize, Serialize};

use super::discriminative::DiscriminativeMap;
use super::neighborhood::Neighborhood;
use crate::detector::top_k_nms;
use crate::error::{Error, Result};
use crate::geometry::{order_sign, OrderSign};
use crate::imaging::{FeatureVector, HogGrid, PatchLocation};
use crate::scalar::Scalar;

/// Stable identity of a candidate: the seed that proposed it and its combination index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CandidateId {
    pub neighborhood: usize,
    pub combination: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateTriplet<T> {
    pub id: CandidateId,
    pub class_label: usize,
    /// Ordered by descending discriminative score.
    pub locations: [PatchLocation; 3],
    /// Features averaged over the positive members at each location.
    pub templates: [FeatureVector<T>; 3],
    pub discriminative: [T; 3],
}

/// Top `top_n` NMS-filtered locations of the map, then every 3-combination of them.
///
/// `members` are the HOG grids of the neighborhood members in neighborhood
/// order; templates average the members carrying the seed label.
/// Combinations with collinear centers are dropped. Fewer than three
/// surviving locations give an empty list.
pub fn propose_candidates<T: Scalar>(
    neighborhood_index: usize,
    nbhd: &Neighborhood,
    members: &[&HogGrid<T>],
    dmap: &DiscriminativeMap<T>,
    top_n: usize,
    overlap_max: f64,
    degeneracy_eps: T,
) -> Result<Vec<CandidateTriplet<T>>> {
    if members.len() != nbhd.len() {
        return Err(Error::InvalidConfig(format!(
            "{} feature grids for a neighborhood of {}",
            members.len(),
            nbhd.len()
        )));
    }
    let positives = nbhd.positive_positions();
    if positives.is_empty() {
        return Err(Error::InsufficientData("neighborhood has no positive members".into()));
    }
    let top = top_k_nms(&dmap.scores, top_n, overlap_max);
    if top.len() < 3 {
        log::debug!(
            "neighborhood {neighborhood_index}: only {} locations survive NMS, skipped",
            top.len()
        );
        return Ok(Vec::new());
    }
    let templates = top
        .iter()
        .map(|d| {
            let feats = positives
                .iter()
                .map(|&p| members[p].window_feature(d.loc))
                .collect::<Result<Vec<_>>>()?;
            Ok(FeatureVector::mean(feats.iter()).expect("at least one positive"))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::new();
    let mut combination = 0;
    for i in 0..top.len() {
        for j in i + 1..top.len() {
            for l in j + 1..top.len() {
                let idx = combination;
                combination += 1;
                let locs = [top[i].loc, top[j].loc, top[l].loc];
                let [a, b, c] = locs.map(|p| p.center::<T>());
                if order_sign(a, b, c, degeneracy_eps) == OrderSign::Degenerate {
                    continue;
                }
                out.push(CandidateTriplet {
                    id: CandidateId {
                        neighborhood: neighborhood_index,
                        combination: idx,
                    },
                    class_label: nbhd.seed_label,
                    locations: locs,
                    templates: [templates[i].clone(), templates[j].clone(), templates[l].clone()],
                    discriminative: [top[i].score, top[j].score, top[l].score],
                });
            }
        }
    }
    Ok(out)
}

/// Drops exact duplicates (same class, locations and templates), keeping the lowest id.
pub fn dedup_candidates<T: Scalar>(mut candidates: Vec<CandidateTriplet<T>>) -> Vec<CandidateTriplet<T>> {
    candidates.sort_by_key(|c| c.id);
    let mut kept: Vec<CandidateTriplet<T>> = Vec::with_capacity(candidates.len());
    for c in candidates {
        let dup = kept.iter().any(|k| {
            k.class_label == c.class_label && k.locations == c.locations && k.templates == c.templates
        });
        if !dup {
            kept.push(c);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::ScoreMap;
    use crate::imaging::{GrayImage, HogConfig, PatchGrid};

    fn textured(seed: u64) -> GrayImage<f64> {
        GrayImage::from_fn(96, 96, |x, y| {
            let v = (seed ^ ((x as u64) << 20 | y as u64)).wrapping_mul(0x9E3779B97F4A7C15);
            (v >> 40) as f64 / (1u64 << 24) as f64
        })
    }

    fn setup(labels: Vec<usize>) -> (Neighborhood, Vec<HogGrid<f64>>, DiscriminativeMap<f64>) {
        let hog = HogConfig::default();
        let grids: Vec<_> = (0..labels.len())
            .map(|i| HogGrid::new(&textured(i as u64 + 1), &hog).unwrap())
            .collect();
        let grid = PatchGrid::new(32, 8);
        let (cols, rows) = grid.dims(96, 96).unwrap();
        // Peaks at well separated windows.
        let mut values = vec![0.0; cols * rows];
        for (rank, &(c, r)) in [(0, 0), (8, 0), (0, 8), (8, 8), (4, 4), (4, 0)].iter().enumerate() {
            values[r * cols + c] = 10.0 - rank as f64;
        }
        let dmap = DiscriminativeMap {
            scores: ScoreMap::new(grid, cols, rows, values).unwrap(),
        };
        let nbhd = Neighborhood {
            seed_id: 0,
            seed_label: labels[0],
            member_ids: (0..labels.len()).collect(),
            member_labels: labels,
        };
        (nbhd, grids, dmap)
    }

    #[test]
    fn six_locations_give_twenty_candidates() {
        let (nbhd, grids, dmap) = setup(vec![0, 1, 0, 1]);
        let refs: Vec<_> = grids.iter().collect();
        let cands = propose_candidates(0, &nbhd, &refs, &dmap, 6, 0.25, 1e-6).unwrap();
        // The top row, the diagonal and the anti-diagonal are collinear.
        let collinear = 3;
        assert_eq!(cands.len() + collinear, 20);
        for c in &cands {
            assert!(c.discriminative[0] > c.discriminative[1] && c.discriminative[1] > c.discriminative[2]);
        }
        let ids: Vec<_> = cands.iter().map(|c| c.id.combination).collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]) && *ids.last().unwrap() < 20);
    }

    #[test]
    fn three_locations_give_one_candidate() {
        let (nbhd, grids, dmap) = setup(vec![0, 1, 0, 1]);
        let refs: Vec<_> = grids.iter().collect();
        let cands = propose_candidates(0, &nbhd, &refs, &dmap, 3, 0.25, 1e-6).unwrap();
        assert_eq!(cands.len(), 1);
    }

    #[test]
    fn single_positive_templates_are_its_features() {
        let (nbhd, grids, dmap) = setup(vec![3, 1, 2, 1]);
        let refs: Vec<_> = grids.iter().collect();
        let cands = propose_candidates(0, &nbhd, &refs, &dmap, 3, 0.25, 1e-6).unwrap();
        for (t, loc) in cands[0].templates.iter().zip(cands[0].locations) {
            assert_eq!(*t, grids[0].window_feature(loc).unwrap());
        }
    }

    #[test]
    fn too_few_locations_is_empty() {
        let (nbhd, grids, dmap) = setup(vec![0, 1]);
        let refs: Vec<_> = grids.iter().collect();
        assert!(propose_candidates(0, &nbhd, &refs, &dmap, 2, 0.25, 1e-6).unwrap().is_empty());
    }

    #[test]
    fn exact_duplicates_are_removed() {
        let (nbhd, grids, dmap) = setup(vec![0, 1, 0, 1]);
        let refs: Vec<_> = grids.iter().collect();
        let a = propose_candidates(0, &nbhd, &refs, &dmap, 6, 0.25, 1e-6).unwrap();
        let b = propose_candidates(1, &nbhd, &refs, &dmap, 6, 0.25, 1e-6).unwrap();
        let n = a.len();
        let merged = dedup_candidates(a.into_iter().chain(b).collect());
        assert_eq!(merged.len(), n);
        assert!(merged.iter().all(|c| c.id.neighborhood == 0));
    }
}
