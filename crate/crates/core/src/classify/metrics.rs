use serde::{Deserialize, Serialize};

/// Accuracy summary over a labeled test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Recall per true class; `None` for classes absent from the test set.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub total: usize,
}

impl Metrics {
    pub fn from_predictions(num_classes: usize, pairs: &[(usize, usize)]) -> Self {
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for &(truth, predicted) in pairs {
            confusion[truth][predicted] += 1;
        }
        let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
        let per_class_accuracy = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let n: usize = row.iter().sum();
                (n > 0).then(|| row[c] as f64 / n as f64)
            })
            .collect();
        Self {
            accuracy: if pairs.is_empty() { 0.0 } else { correct as f64 / pairs.len() as f64 },
            per_class_accuracy,
            confusion,
            total: pairs.len(),
        }
    }
}
