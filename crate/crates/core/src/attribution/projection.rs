use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionDistribution {
    #[default]
    Gaussian,
    /// Rademacher entries.
    Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMode {
    #[default]
    Random,
    /// No projection: features are the raw gradients (requires `dim` equal
    /// to the parameter count).
    ExactIdentity,
}

/// Random projection of per-example gradients to `dim` coordinates, with
/// entries scaled by `1/√dim`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionSpec {
    pub dim: usize,
    #[serde(default)]
    pub distribution: ProjectionDistribution,
    pub seed: u64,
    #[serde(default)]
    pub mode: ProjectionMode,
}

impl ProjectionSpec {
    /// Random Gaussian projection to `min(512, n_params)` coordinates.
    pub fn default_for(n_params: usize, seed: u64) -> Self {
        Self {
            dim: n_params.min(512),
            distribution: ProjectionDistribution::Gaussian,
            seed,
            mode: ProjectionMode::Random,
        }
    }

    pub fn exact(n_params: usize) -> Self {
        Self {
            dim: n_params,
            distribution: ProjectionDistribution::Gaussian,
            seed: 0,
            mode: ProjectionMode::ExactIdentity,
        }
    }

    pub fn validate(&self, n_params: usize) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("projection dimension must be at least 1".into()));
        }
        if self.mode == ProjectionMode::ExactIdentity && self.dim != n_params {
            return Err(Error::InvalidConfig(format!(
                "exact-identity projection needs dim = n_params = {n_params}, got {}",
                self.dim
            )));
        }
        Ok(())
    }
}

/// A materialized `n_params × dim` projection matrix for one ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<T> {
    pub spec: ProjectionSpec,
    pub member: usize,
    n_params: usize,
    /// Row-major `n_params × dim`; empty for the identity.
    matrix: Vec<T>,
}

impl<T: Scalar> Projection<T> {
    /// Entries are drawn row-major from `stream(spec.seed, member, "proj")`.
    pub fn build(spec: &ProjectionSpec, member: usize, n_params: usize) -> Result<Self> {
        spec.validate(n_params)?;
        let matrix = match spec.mode {
            ProjectionMode::ExactIdentity => Vec::new(),
            ProjectionMode::Random => {
                let mut r = rng::stream(spec.seed, member as u64, "proj");
                let scale = 1.0 / (spec.dim as f64).sqrt();
                (0..n_params * spec.dim)
                    .map(|_| {
                        let v = match spec.distribution {
                            ProjectionDistribution::Gaussian => rng::gaussian(&mut r),
                            ProjectionDistribution::Sign => {
                                if rand::Rng::random::<bool>(&mut r) {
                                    1.0
                                } else {
                                    -1.0
                                }
                            }
                        };
                        T::lit(v * scale)
                    })
                    .collect()
            }
        };
        Ok(Self {
            spec: spec.clone(),
            member,
            n_params,
            matrix,
        })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Returns the projection with every entry negated.
    pub fn negated(&self) -> Self {
        let mut p = self.clone();
        p.matrix.iter_mut().for_each(|v| *v = -*v);
        p
    }

    /// `Pᵀ g`.
    pub fn apply(&self, g: &[T]) -> Vec<T> {
        if self.spec.mode == ProjectionMode::ExactIdentity {
            return g.to_vec();
        }
        let m = self.spec.dim;
        let mut out = vec![T::zero(); m];
        for (i, &gi) in g.iter().enumerate() {
            if gi == T::zero() {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(&self.matrix[i * m..(i + 1) * m]) {
                *o += gi * p;
            }
        }
        out
    }
}
