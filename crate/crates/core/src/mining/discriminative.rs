//! Between-class over within-class scatter at aligned patch locations.

use crate::detector::ScoreMap;
use crate::error::{Error, Result};
use crate::imaging::{HogGrid, PatchGrid};
use crate::scalar::{squared_distance, Scalar};

/// `sum_c |mean_c - mean|^2 / max(sum_c sum_{i in c} |f_i - mean_c|^2, eps)`.
///
/// Class means are unweighted by class size in the numerator. A zero
/// denominator with `eps == 0` yields 0.
pub fn discriminative_score<T: Scalar>(labels: &[usize], features: &[&[T]], eps: T) -> T {
    assert_eq!(labels.len(), features.len(), "one label per feature");
    if features.is_empty() {
        return T::zero();
    }
    let dim = features[0].len();
    let overall = mean_of(features.iter().copied(), dim);
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut between = T::zero();
    let mut within = T::zero();
    for &c in &classes {
        let members: Vec<&[T]> = labels
            .iter()
            .zip(features)
            .filter(|(&l, _)| l == c)
            .map(|(_, f)| *f)
            .collect();
        let class_mean = mean_of(members.iter().copied(), dim);
        between = between + squared_distance(&class_mean, &overall);
        for f in &members {
            within = within + squared_distance(f, &class_mean);
        }
    }
    let denom = within.max(eps);
    if denom > T::zero() {
        between / denom
    } else {
        T::zero()
    }
}

fn mean_of<'a, T: Scalar>(rows: impl Iterator<Item = &'a [T]>, dim: usize) -> Vec<T> {
    let mut acc = vec![T::zero(); dim];
    let mut n = 0usize;
    for r in rows {
        for (a, &v) in acc.iter_mut().zip(r) {
            *a = *a + v;
        }
        n += 1;
    }
    let inv = T::one() / T::from_count(n.max(1));
    acc.iter_mut().for_each(|a| *a = *a * inv);
    acc
}

/// Discriminative scores on the sliding-window lattice of the canonical frame.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminativeMap<T> {
    pub scores: ScoreMap<T>,
}

/// Scores every window of `grid` across neighborhood members that share one frame size.
pub fn discriminative_map<T: Scalar>(
    labels: &[usize],
    members: &[&HogGrid<T>],
    grid: PatchGrid,
    eps: T,
) -> Result<DiscriminativeMap<T>> {
    if labels.len() != members.len() || members.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{} labels for {} neighborhood members",
            labels.len(),
            members.len()
        )));
    }
    let (w, h) = (members[0].width(), members[0].height());
    if members.iter().any(|m| m.width() != w || m.height() != h) {
        return Err(Error::InvalidConfig(
            "neighborhood members must share the canonical frame".into(),
        ));
    }
    let (cols, rows) = grid
        .dims(w, h)
        .ok_or_else(|| Error::TooSmall(format!("{w}x{h} frame cannot hold a {} px patch", grid.side)))?;
    let mut values = Vec::with_capacity(cols * rows);
    for row in 0..rows {
        for col in 0..cols {
            let loc = grid.location(col, row);
            let feats = members
                .iter()
                .map(|m| m.window_feature(loc))
                .collect::<Result<Vec<_>>>()?;
            let slices: Vec<&[T]> = feats.iter().map(|f| f.as_slice()).collect();
            values.push(discriminative_score(labels, &slices, eps));
        }
    }
    Ok(DiscriminativeMap {
        scores: ScoreMap::new(grid, cols, rows, values)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_features_score_zero() {
        let f = [1.0, 2.0];
        assert_eq!(discriminative_score(&[0, 1, 1], &[&f, &f, &f], 1e-6), 0.0);
    }

    #[test]
    fn separated_classes_without_scatter() {
        let (a, b) = ([0.0f64, 0.0], [2.0, 0.0]);
        let d = discriminative_score(&[0, 0, 1, 1], &[&a, &a, &b, &b], 1e-6);
        assert!((d - 2e6).abs() < 1e-3);
    }

    #[test]
    fn single_class_has_zero_numerator() {
        let (a, b) = ([0.0, 1.0], [3.0, 0.0]);
        assert_eq!(discriminative_score(&[2, 2], &[&a, &b], 1e-6), 0.0);
    }

    #[test]
    fn singleton_classes_add_no_scatter() {
        // Class 1 has one member; only class 0 scatter counts: 2 * 0.5^2.
        let (a, b, c) = ([0.0], [1.0], [4.0]);
        let d = discriminative_score(&[0, 0, 1], &[&a, &b, &c], 1e-6);
        // means: class0 0.5, class1 4, overall 5/3
        let overall = 5.0 / 3.0;
        let between = (0.5f64 - overall).powi(2) + (4.0f64 - overall).powi(2);
        assert!((d - between / 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn scale_invariant(values in prop::collection::vec(-10.0f64..10.0, 12), scale in 0.1f64..10.0) {
            let labels = [0, 0, 1, 1, 2, 2];
            let rows: Vec<&[f64]> = values.chunks(2).collect();
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let srows: Vec<&[f64]> = scaled.chunks(2).collect();
            let a = discriminative_score(&labels, &rows, 0.0);
            let b = discriminative_score(&labels, &srows, 0.0);
            prop_assert!(a >= 0.0 && a.is_finite());
            prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0));
        }
    }
}
