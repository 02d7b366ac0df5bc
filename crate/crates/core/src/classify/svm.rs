//! One-vs-rest L2-regularized L1-hinge linear SVM trained by dual coordinate descent.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Hinge-loss weight.
    pub c: f64,
    pub max_epochs: usize,
    /// Stop once the relative change of the dual objective falls below this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_epochs: 1000,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

/// Per-class weights and biases over descriptor space.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<T>,
    pub config: SvmConfig,
    /// Epochs run for each one-vs-rest problem.
    pub epochs: Vec<usize>,
}

impl<T: Scalar> LinearModel<T> {
    pub fn num_classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn decision_values(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, &b)| dot(w, x) + b)
            .collect())
    }
}

/// Dual objective trace of one binary problem.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryTrace {
    pub objective: Vec<f64>,
}

/// Trains `num_classes` one-vs-rest classifiers. Labels must be below `num_classes`.
pub fn train_svm<T: Scalar>(
    samples: &[(usize, &[T])],
    num_classes: usize,
    config: &SvmConfig,
) -> Result<LinearModel<T>> {
    train_svm_traced(samples, num_classes, config).map(|(m, _)| m)
}

/// As [`train_svm`], also returning the dual objective after each epoch.
pub fn train_svm_traced<T: Scalar>(
    samples: &[(usize, &[T])],
    num_classes: usize,
    config: &SvmConfig,
) -> Result<(LinearModel<T>, Vec<BinaryTrace>)> {
    if !(config.c > 0.0) {
        return Err(Error::InvalidConfig(format!("SVM C must be positive, got {}", config.c)));
    }
    let Some(&(_, first)) = samples.first() else {
        return Err(Error::DegenerateTraining("no training samples".into()));
    };
    let dim = first.len();
    for &(label, x) in samples {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: x.len(),
            });
        }
        if label >= num_classes {
            return Err(Error::InvalidConfig(format!("label {label} >= {num_classes} classes")));
        }
    }
    let mut present: Vec<usize> = samples.iter().map(|s| s.0).collect();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::DegenerateTraining(format!(
            "need at least 2 classes, found {}",
            present.len()
        )));
    }
    let mut weights = Vec::with_capacity(num_classes);
    let mut biases = Vec::with_capacity(num_classes);
    let mut epochs = Vec::with_capacity(num_classes);
    let mut traces = Vec::with_capacity(num_classes);
    for class in 0..num_classes {
        let labels: Vec<f64> = samples
            .iter()
            .map(|s| if s.0 == class { 1.0 } else { -1.0 })
            .collect();
        let (w, b, trace) = train_binary(samples, &labels, dim, config, class as u64);
        weights.push(w.iter().map(|&v| T::lit(v)).collect());
        biases.push(T::lit(b));
        epochs.push(trace.objective.len());
        traces.push(trace);
    }
    Ok((
        LinearModel {
            weights,
            biases,
            config: *config,
            epochs,
        },
        traces,
    ))
}

/// Dual coordinate descent on `min_a 1/2 a^T Q a - e^T a, 0 <= a <= C`,
/// with the bias folded in as a constant feature 1.
fn train_binary<T: Scalar>(
    samples: &[(usize, &[T])],
    y: &[f64],
    dim: usize,
    config: &SvmConfig,
    stream: u64,
) -> (Vec<f64>, f64, BinaryTrace) {
    let n = samples.len();
    let xs: Vec<Vec<f64>> = samples
        .iter()
        .map(|(_, x)| x.iter().map(|v| v.to_f64_lossy()).collect())
        .collect();
    let qdiag: Vec<f64> = xs.iter().map(|x| dot(x, x) + 1.0).collect();
    let mut alpha = vec![0.0f64; n];
    let mut w = vec![0.0f64; dim];
    let mut b = 0.0f64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let c = config.c;
    let mut objective = Vec::new();
    let mut previous = 0.0f64;
    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let g = y[i] * (dot(&w, &xs[i]) + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            if pg == 0.0 {
                continue;
            }
            let old = alpha[i];
            alpha[i] = (old - g / qdiag[i]).clamp(0.0, c);
            let step = (alpha[i] - old) * y[i];
            if step != 0.0 {
                for (wj, &xj) in w.iter_mut().zip(&xs[i]) {
                    *wj += step * xj;
                }
                b += step;
            }
        }
        let value = 0.5 * (dot(&w, &w) + b * b) - alpha.iter().sum::<f64>();
        if let Some(&last) = objective.last() {
            let last: f64 = last;
            debug_assert!(
                value <= last + 1e-9 * last.abs().max(1.0),
                "dual objective increased: {last} -> {value}"
            );
        }
        objective.push(value);
        let scale = previous.abs().max(value.abs()).max(f64::MIN_POSITIVE);
        if (previous - value).abs() <= config.tolerance * scale {
            break;
        }
        previous = value;
    }
    (w, b, BinaryTrace { objective })
}

/// Highest decision value; ties go to the lowest class id.
pub fn predict<T: Scalar>(model: &LinearModel<T>, x: &[T]) -> Result<(usize, Vec<T>)> {
    let values = model.decision_values(x)?;
    let mut best = 0;
    for (c, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = c;
        }
    }
    Ok((best, values))
}
