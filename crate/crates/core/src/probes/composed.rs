use serde::{Deserialize, Serialize};

use super::probe::Probe;
use crate::error::{check_dim, Result};
use crate::nn::{Model, Network, Trace};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Which parameters margin gradients are taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamSet {
    /// Subnetwork parameters up to the tap, followed by `(w, b)`.
    #[default]
    Full,
    /// `(w, b)` only.
    ProbeOnly,
}

/// Subnetwork plus probe: `x ↦ g(f≤i(x))`, a single-logit model.
#[derive(Debug, Clone, Copy)]
pub struct ComposedModel<'a, T> {
    net: &'a Network<T>,
    probe: &'a Probe<T>,
    stage: usize,
    params: ParamSet,
}

impl<'a, T: Scalar> ComposedModel<'a, T> {
    pub fn new(net: &'a Network<T>, probe: &'a Probe<T>, params: ParamSet) -> Result<Self> {
        let stage = net.spec().tap_stage(&probe.tap)?;
        check_dim("probe weights", 0, net.spec().tap_dim(&probe.tap)?, probe.dim())?;
        Ok(Self {
            net,
            probe,
            stage,
            params,
        })
    }

    pub fn network(&self) -> &Network<T> {
        self.net
    }

    pub fn probe(&self) -> &Probe<T> {
        self.probe
    }

    pub fn tap(&self) -> &str {
        &self.probe.tap
    }

    pub fn param_set(&self) -> ParamSet {
        self.params
    }

    fn prefix(&self) -> usize {
        match self.params {
            ParamSet::Full => self.net.spec().prefix_params(self.stage),
            ParamSet::ProbeOnly => 0,
        }
    }

    /// Pre-sigmoid probe logits for a batch of images.
    pub fn margins(&self, images: &Tensor<T>) -> Result<Vec<T>> {
        let acts = self.net.forward_to_layer(images, &self.probe.tap)?;
        Ok(acts.iter_rows().map(|phi| self.probe.logit(phi)).collect())
    }
}

impl<T: Scalar> Model<T> for ComposedModel<'_, T> {
    fn n_params(&self) -> usize {
        self.prefix() + self.probe.dim() + 1
    }

    fn n_outputs(&self) -> usize {
        1
    }

    fn input_len(&self) -> usize {
        self.net.spec().input_len()
    }

    fn outputs_one(&self, x: &[T]) -> Vec<T> {
        vec![self.probe.logit(&self.net.run_example(x, self.stage, None))]
    }

    fn backprop_one(&self, x: &[T], dloss: &mut dyn FnMut(&[T]) -> Vec<T>, grad: &mut [T]) -> Vec<T> {
        let prefix = self.prefix();
        let mut trace = Trace::default();
        let traced = matches!(self.params, ParamSet::Full);
        let phi = self.net.run_example(x, self.stage, traced.then_some(&mut trace));
        let z = self.probe.logit(&phi);
        let g = dloss(&[z])[0];
        let d = self.probe.dim();
        let (sub, head) = grad.split_at_mut(prefix);
        for (gw, &p) in head[..d].iter_mut().zip(&phi) {
            *gw += g * p;
        }
        head[d] += g;
        if traced {
            let dphi: Vec<T> = self.probe.weights.iter().map(|&w| g * w).collect();
            self.net.backprop_example(&trace, self.stage, &dphi, sub);
        }
        vec![z]
    }
}

/// Pseudo-labels: 1 iff the probe logit at the tap is `>= 0`.
pub fn assign_concept_labels<T: Scalar>(composed: &ComposedModel<'_, T>, images: &Tensor<T>) -> Result<Vec<usize>> {
    Ok(composed
        .margins(images)?
        .into_iter()
        .map(|z| usize::from(z >= T::zero()))
        .collect())
}
