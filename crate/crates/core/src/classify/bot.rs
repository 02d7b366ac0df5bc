use rayon::prelude::*;

use crate::detector::{detect_with_mirror, DetectionParams, ImageFeatures, TripletDetector};
use crate::error::Result;
use crate::imaging::FeatureVector;
use crate::scalar::Scalar;

/// Bag-of-Triplets descriptor: one maximum response per mined detector.
pub type BotDescriptor<T> = FeatureVector<T>;

/// Entry `t` is the mirror-maximized total of detector `t`; images where a
/// detector finds no valid triplet get 0.
pub fn bot_descriptor<'a, T, I>(features: &ImageFeatures<T>, detectors: I, params: &DetectionParams) -> Result<BotDescriptor<T>>
where
    T: Scalar,
    I: IntoIterator<Item = &'a TripletDetector<T>>,
{
    let values = detectors
        .into_iter()
        .map(|det| Ok(detect_with_mirror(features, det, params)?.map_or(T::zero(), |d| d.total)))
        .collect::<Result<Vec<T>>>()?;
    Ok(FeatureVector::new(values))
}

/// Descriptors for many images in parallel, in input order.
pub fn bot_descriptors<T: Scalar>(
    images: &[ImageFeatures<T>],
    detectors: &[TripletDetector<T>],
    params: &DetectionParams,
) -> Result<Vec<BotDescriptor<T>>> {
    images
        .par_iter()
        .map(|f| bot_descriptor(f, detectors, params))
        .collect()
}
