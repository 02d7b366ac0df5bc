//! LDA appearance models, dense scoring, NMS and triplet detection.

mod background;
pub mod linalg;
mod nms;
mod triplet;

pub use background::{
    fit_background, fit_background_par, lda_weights, BackgroundStats, CovarianceAccumulator,
    LdaWhitener, Ridge,
};
pub use linalg::{Cholesky, Matrix};
pub use nms::{score_grid, score_hog_grid, top_k_nms, Detection, ScoreMap};
pub use triplet::{
    best_combination, detect_on_grid, detect_triplet, detect_triplet_in_maps, detect_with_mirror,
    detect_with_mirror_image, response, search_detections, Combination, DegeneratePolicy,
    DetectionParams, ImageFeatures, RoleCandidate, TripletDetection, TripletDetector,
};
pub(crate) use nms::rank_desc;
