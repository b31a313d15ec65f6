//! Agreement between ensemble attribution and leave-one-out retraining on a
//! probe-only fixture (the subnetwork is the identity).

use serde::{Deserialize, Serialize};

use super::loo::{loo_oracle, LogisticFixture, LooConfig};
use super::projection::ProjectionSpec;
use super::trak::{aggregate_ensemble, expected_attribution, featurize_model, score_model, ConceptAttribution, Provenance};
use crate::error::Result;
use crate::probes::{train_probe, ProbeConfig};
use crate::stats::spearman;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub members: usize,
    pub spearman: f64,
    pub tau_c: Vec<f64>,
    pub loo_means: Vec<f64>,
    pub flagged: usize,
}

/// Trains `members` probes (seeds `0..members`) on the fixture, attributes
/// with exact-identity projection, and compares `τ_c` with the oracle's
/// column means.
pub fn oracle_check(
    fx: &LogisticFixture<f64>,
    members: usize,
    probe_cfg: &ProbeConfig,
    loo_cfg: &LooConfig,
) -> Result<OracleReport> {
    let probes = (0..members)
        .map(|j| train_probe(&fx.acts_train, &fx.labels, "fixture", &probe_cfg.clone().with_seed(j as u64)))
        .collect::<Result<Vec<_>>>()?;
    let first = probes.first().ok_or(crate::Error::Empty("oracle check needs members"))?;
    // The fixture carries ground truth, so attribution uses the labels the
    // probes and the oracle were trained and evaluated with.
    let (train_labels, val_labels) = (&fx.labels, &fx.val_labels);
    let spec = ProjectionSpec::exact(first.dim() + 1);
    let scores = probes
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let fm = featurize_model(j, p, &fx.acts_train, train_labels, &spec)?;
            score_model(&fm, p, &fx.acts_val, val_labels, &spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let n_tr = fx.acts_train.rows();
    let am = aggregate_ensemble(
        &scores,
        (0..fx.acts_val.rows() as u64).collect(),
        (0..n_tr as u64).collect(),
        Provenance {
            concept: "fixture".into(),
            tap: "fixture".into(),
            members,
            seeds: (0..members as u64).collect(),
        },
    )?;
    let ConceptAttribution { tau_c, .. } = expected_attribution(&am)?;
    let loo = loo_oracle(&fx.acts_train, &fx.labels, &fx.acts_val, &fx.val_labels, loo_cfg)?;
    let loo_means = loo.column_means();
    Ok(OracleReport {
        members,
        spearman: spearman(&tau_c, &loo_means),
        tau_c,
        loo_means,
        flagged: loo.flagged.iter().filter(|&&f| f).count(),
    })
}
