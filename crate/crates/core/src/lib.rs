//! Mining discriminative, geometrically constrained triplets of patches for
//! fine-grained classification.
//!
//! The pipeline, bottom up:
//!
//! * [`imaging`]: crop/resize, mirroring and HOG patch features.
//! * [`geometry`]: order (side test) and shape (angle cosine) penalties.
//! * [`detector`]: LDA appearance weights, dense scoring, NMS and the
//!   greedy top-K triplet search, with mirror handling.
//! * [`mining`]: nearest-neighbor neighborhoods, discriminative maps,
//!   candidate proposal and entropy-based selection.
//! * [`classify`]: Bag-of-Triplets descriptors and a one-vs-rest linear SVM.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases below fix the scalar for callers that do not care.

pub mod classify;
pub mod detector;
mod error;
pub mod geometry;
pub mod imaging;
pub mod mining;
mod scalar;

pub use error::{Error, Result};
pub use scalar::{dot, norm, squared_distance, Scalar};

pub type GrayImage64 = imaging::GrayImage<f64>;
pub type GrayImage32 = imaging::GrayImage<f32>;
pub type FeatureVector64 = imaging::FeatureVector<f64>;
pub type FeatureVector32 = imaging::FeatureVector<f32>;
pub type Point64 = geometry::Point<f64>;
pub type GeometryConfig64 = geometry::GeometryConfig<f64>;
pub type TriangleSignature64 = geometry::TriangleSignature<f64>;
pub type BackgroundStats64 = detector::BackgroundStats<f64>;
pub type BackgroundStats32 = detector::BackgroundStats<f32>;
pub type TripletDetector64 = detector::TripletDetector<f64>;
pub type TripletDetector32 = detector::TripletDetector<f32>;
pub type TripletDetection64 = detector::TripletDetection<f64>;
pub type ImageFeatures64 = detector::ImageFeatures<f64>;
pub type ImageFeatures32 = detector::ImageFeatures<f32>;
pub type MinedTriplet64 = mining::MinedTriplet<f64>;
pub type LinearModel64 = classify::LinearModel<f64>;
