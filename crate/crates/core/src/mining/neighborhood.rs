use crate::error::{Error, Result};
use crate::imaging::FeatureVector;
use crate::scalar::{squared_distance, Scalar};

/// Whole-image descriptors of the training split, searched by linear scan.
#[derive(Clone, Debug, Default)]
pub struct DescriptorIndex<T> {
    ids: Vec<usize>,
    labels: Vec<usize>,
    descriptors: Vec<FeatureVector<T>>,
}

impl<T: Scalar> DescriptorIndex<T> {
    pub fn new() -> Self {
        Self {
            ids: Vec::new(),
            labels: Vec::new(),
            descriptors: Vec::new(),
        }
    }

    pub fn insert(&mut self, id: usize, label: usize, descriptor: FeatureVector<T>) -> Result<()> {
        if let Some(first) = self.descriptors.first() {
            if first.dim() != descriptor.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    actual: descriptor.dim(),
                });
            }
        }
        if self.ids.contains(&id) {
            return Err(Error::InvalidConfig(format!("duplicate image id {id}")));
        }
        self.ids.push(id);
        self.labels.push(label);
        self.descriptors.push(descriptor);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn label_of(&self, id: usize) -> Option<usize> {
        self.position(id).map(|p| self.labels[p])
    }

    fn position(&self, id: usize) -> Option<usize> {
        self.ids.iter().position(|&i| i == id)
    }

    /// Every other entry as `(distance^2, id, label)`, nearest first, ties by id.
    pub fn ranked_from(&self, seed_id: usize) -> Result<Vec<(T, usize, usize)>> {
        let seed = self
            .position(seed_id)
            .ok_or_else(|| Error::InvalidConfig(format!("seed {seed_id} is not indexed")))?;
        let query = &self.descriptors[seed];
        let mut ranked: Vec<(T, usize, usize)> = (0..self.len())
            .filter(|&p| p != seed)
            .map(|p| (squared_distance(query, &self.descriptors[p]), self.ids[p], self.labels[p]))
            .collect();
        ranked.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        Ok(ranked)
    }
}

/// A seed training image and its nearest neighbors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    pub seed_id: usize,
    pub seed_label: usize,
    /// Seed first, then neighbors by increasing distance.
    pub member_ids: Vec<usize>,
    pub member_labels: Vec<usize>,
}

impl Neighborhood {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }

    /// Positions of members sharing the seed label.
    pub fn positive_positions(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&p| self.member_labels[p] == self.seed_label)
            .collect()
    }
}

/// Seed plus its `size - 1` nearest neighbors by Euclidean descriptor distance.
pub fn build_neighborhood<T: Scalar>(
    seed_id: usize,
    index: &DescriptorIndex<T>,
    size: usize,
) -> Result<Neighborhood> {
    build_neighborhood_among(seed_id, index, size, |_| true)
}

/// As [`build_neighborhood`], restricted to neighbors whose label passes `allow`.
pub fn build_neighborhood_among<T: Scalar>(
    seed_id: usize,
    index: &DescriptorIndex<T>,
    size: usize,
    mut allow: impl FnMut(usize) -> bool,
) -> Result<Neighborhood> {
    if size == 0 {
        return Err(Error::InvalidConfig("neighborhood size must be positive".into()));
    }
    let seed_label = index
        .label_of(seed_id)
        .ok_or_else(|| Error::InvalidConfig(format!("seed {seed_id} is not indexed")))?;
    let ranked: Vec<_> = index
        .ranked_from(seed_id)?
        .into_iter()
        .filter(|&(_, _, label)| allow(label))
        .collect();
    if ranked.len() + 1 < size {
        return Err(Error::InsufficientData(format!(
            "neighborhood of {size} requested from {} eligible images",
            ranked.len() + 1
        )));
    }
    let mut member_ids = vec![seed_id];
    let mut member_labels = vec![seed_label];
    for &(_, id, label) in ranked.iter().take(size - 1) {
        member_ids.push(id);
        member_labels.push(label);
    }
    Ok(Neighborhood {
        seed_id,
        seed_label,
        member_ids,
        member_labels,
    })
}
