//! Ensemble attribution of a probe-defined concept back to training points.

mod check;
mod io;
mod loo;
mod projection;
mod rank;
mod trak;

pub use check::{oracle_check, OracleReport};
pub use io::{decode_attribution, encode_attribution, load_attribution, save_attribution};
pub use loo::{
    fit_logistic, logistic_fixture, loo_oracle, LogisticFit, LogisticFixture, LooConfig, LooResult, MAX_LOO_TRAIN,
};
pub use projection::{Projection, ProjectionDistribution, ProjectionMode, ProjectionSpec};
pub use rank::{rank_training_points, sorted_scores, top_ids};
pub use trak::{
    aggregate_ensemble, expected_attribution, featurize_model, projected_gradients, score_features, score_model,
    AttributionMatrix, ConceptAttribution, FeaturizedModel, Provenance, RIDGE_SCALE,
};
