//! Neighborhoods, discriminative maps, candidate proposal and entropy-based selection.

mod discriminative;
mod entropy;
mod neighborhood;
mod proposal;

pub use discriminative::{discriminative_map, discriminative_score, DiscriminativeMap};
pub use entropy::{
    default_top_m, entropy_score, label_entropy, score_candidates, select_triplets, EntropyScore,
    EvalImage, MinedTriplet,
};
pub use neighborhood::{build_neighborhood, build_neighborhood_among, DescriptorIndex, Neighborhood};
pub use proposal::{dedup_candidates, propose_candidates, CandidateId, CandidateTriplet};
