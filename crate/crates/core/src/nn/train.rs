use serde::{Deserialize, Serialize};

use super::model::{accumulate, Loss};
use super::network::{EpochRecord, Network};
use super::spec::NetworkSpec;
use crate::error::{check_dim, Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Mini-batch Adam schedule. Weight decay is an L2 term added to the gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            learning_rate: 1e-3,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig("weight decay must be non-negative".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Adam state. Entries whose `frozen` flag is set are never touched.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    weight_decay: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: &TrainConfig, n: usize) -> Self {
        Self {
            lr: T::lit(cfg.learning_rate),
            beta1: T::lit(cfg.beta1),
            beta2: T::lit(cfg.beta2),
            eps: T::lit(cfg.eps),
            weight_decay: T::lit(cfg.weight_decay),
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T], frozen: Option<&[bool]>) {
        self.t += 1;
        let one = T::one();
        let bc1 = one - self.beta1.powi(self.t);
        let bc2 = one - self.beta2.powi(self.t);
        for i in 0..params.len() {
            if frozen.is_some_and(|f| f[i]) {
                continue;
            }
            let g = grad[i] + self.weight_decay * params[i];
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Trains a network with softmax cross-entropy. Initialization and batch
/// order are drawn from streams keyed by `cfg.seed`; the loop is sequential,
/// so the result is bit-identical for identical inputs.
pub fn train_network<T: Scalar>(
    spec: &NetworkSpec,
    images: &Tensor<T>,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<Network<T>> {
    cfg.validate()?;
    let mut net = Network::init(spec.clone(), cfg.seed)?;
    let n = images.rows();
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    check_dim("labels", 0, n, labels.len())?;
    check_dim("network input", 1, spec.input_len(), images.row_len())?;
    Loss::CrossEntropy.check(spec.n_classes, labels)?;

    let mut opt = Adam::new(cfg, net.n_params());
    let mut grad = vec![T::zero(); net.n_params()];
    for epoch in 1..=cfg.epochs {
        let order = rng::permutation(&mut rng::stream(cfg.seed, epoch as u64, "shuffle"), n);
        let mut loss_sum = T::zero();
        let mut correct = 0;
        for chunk in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let stats = accumulate(&net, images, labels, chunk, Loss::CrossEntropy, &mut grad);
            if !stats.loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += stats.loss;
            correct += stats.correct;
            let inv = T::one() / T::of_usize(chunk.len());
            grad.iter_mut().for_each(|g| *g *= inv);
            opt.step(net.params_mut(), &grad, None);
        }
        if net.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        net.train_log.push(EpochRecord {
            epoch,
            loss: loss_sum.as_f64() / n as f64,
            accuracy: correct as f64 / n as f64,
        });
    }
    Ok(net)
}

/// Fraction of examples whose argmax prediction equals the label.
pub fn evaluate_accuracy<T: Scalar>(net: &Network<T>, images: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let n = images.rows();
    if n == 0 || images.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    check_dim("labels", 0, n, labels.len())?;
    let preds = net.predict(images)?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / n as f64)
}
