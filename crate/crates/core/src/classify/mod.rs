//! Bag-of-Triplets descriptors, linear SVM and accuracy metrics.

mod bot;
mod metrics;
mod svm;

pub use bot::{bot_descriptor, bot_descriptors, BotDescriptor};
pub use metrics::Metrics;
pub use svm::{predict, train_svm, train_svm_traced, BinaryTrace, LinearModel, SvmConfig};

use crate::scalar::Scalar;
use crate::error::Result;

/// Predicts every sample and tallies accuracy and the confusion matrix.
pub fn evaluate<T: Scalar>(model: &LinearModel<T>, samples: &[(usize, &[T])]) -> Result<Metrics> {
    let pairs = samples
        .iter()
        .map(|&(label, x)| Ok((label, predict(model, x)?.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Metrics::from_predictions(model.num_classes(), &pairs))
}
