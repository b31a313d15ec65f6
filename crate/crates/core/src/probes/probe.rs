use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::nn::{Adam, EpochRecord, Model, TrainConfig};
use crate::rng;
use crate::scalar::{dot, softplus, Scalar};
use crate::tensor::Tensor;

/// Probe optimizer settings. Defaults: Adam, learning rate 5e-5, batch 64,
/// weight decay 1e-5, 20 epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            learning_rate: 5e-5,
            weight_decay: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl ProbeConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    fn as_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 2 {
            return Err(Error::InvalidConfig(format!(
                "probe training needs at least 2 epochs, got {}",
                self.epochs
            )));
        }
        self.as_train_config().validate()
    }

    /// Epoch after which the sparse probe is hard-thresholded: `⌈E / 2⌉`.
    pub fn threshold_epoch(&self) -> usize {
        self.epochs.div_ceil(2)
    }
}

/// Affine binary concept classifier `logit = w·φ + b` on activations taken at
/// `tap`. The weight vector is the concept activation vector (up to sign).
#[derive(Debug, Clone, PartialEq)]
pub struct Probe<T> {
    pub tap: String,
    pub weights: Vec<T>,
    pub bias: T,
    /// Maximum number of nonzero weights (bias not counted).
    pub sparsity: Option<usize>,
    pub config: ProbeConfig,
    pub train_log: Vec<EpochRecord>,
}

impl<T: Scalar> Probe<T> {
    pub fn new(tap: impl Into<String>, weights: Vec<T>, bias: T) -> Self {
        Self {
            tap: tap.into(),
            weights,
            bias,
            sparsity: None,
            config: ProbeConfig::default(),
            train_log: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn nonzeros(&self) -> usize {
        self.weights.iter().filter(|w| **w != T::zero()).count()
    }

    #[inline]
    pub fn logit(&self, phi: &[T]) -> T {
        dot(&self.weights, phi) + self.bias
    }

    /// The probe with `(w, b)` negated.
    pub fn negated(&self) -> Self {
        let mut p = self.clone();
        p.weights.iter_mut().for_each(|w| *w = -*w);
        p.bias = -p.bias;
        p
    }
}

/// Treats the probe as a model over activation vectors; its parameters are
/// `(w, b)`, so the margin gradient is `(φ, 1)`.
impl<T: Scalar> Model<T> for Probe<T> {
    fn n_params(&self) -> usize {
        self.weights.len() + 1
    }

    fn n_outputs(&self) -> usize {
        1
    }

    fn input_len(&self) -> usize {
        self.weights.len()
    }

    fn outputs_one(&self, x: &[T]) -> Vec<T> {
        vec![self.logit(x)]
    }

    fn backprop_one(&self, x: &[T], dloss: &mut dyn FnMut(&[T]) -> Vec<T>, grad: &mut [T]) -> Vec<T> {
        let z = self.logit(x);
        let g = dloss(&[z])[0];
        let d = self.weights.len();
        for (gw, &xi) in grad[..d].iter_mut().zip(x) {
            *gw += g * xi;
        }
        grad[d] += g;
        vec![z]
    }
}

fn check_acts<T: Scalar>(acts: &Tensor<T>, labels: &[usize]) -> Result<(usize, usize)> {
    if acts.shape().len() != 2 {
        return Err(Error::InvalidConfig(format!(
            "activations must be n × d, got {:?}",
            acts.shape()
        )));
    }
    let (n, d) = (acts.shape()[0], acts.shape()[1]);
    if n == 0 {
        return Err(Error::Empty("probe training set"));
    }
    check_dim("probe labels", 0, n, labels.len())?;
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidConfig("probe labels must be 0 or 1".into()));
    }
    Ok((n, d))
}

/// Indices of the `k` largest `|w|`; on equal magnitude the lower index wins.
pub fn top_k_magnitude<T: Scalar>(w: &[T], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&a, &b| w[b].abs().partial_cmp(&w[a].abs()).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

fn fit<T: Scalar>(
    acts: &Tensor<T>,
    labels: &[usize],
    tap: &str,
    cfg: &ProbeConfig,
    sparsity: Option<usize>,
) -> Result<Probe<T>> {
    cfg.validate()?;
    let (n, d) = check_acts(acts, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if 2 * pos != n {
        return Err(Error::InvalidConfig(format!(
            "probe labels must be balanced, got {pos} positives of {n}"
        )));
    }
    if let Some(k) = sparsity {
        if k == 0 || k > d {
            return Err(Error::InvalidConfig(format!("sparsity k = {k} must be in 1..={d}")));
        }
    }

    let mut params = vec![T::zero(); d + 1];
    let mut opt = Adam::new(&cfg.as_train_config(), d + 1);
    let mut frozen: Option<Vec<bool>> = None;
    let mut grad = vec![T::zero(); d + 1];
    let mut log = Vec::with_capacity(cfg.epochs);
    let threshold_at = cfg.threshold_epoch();
    for epoch in 1..=cfg.epochs {
        let order = rng::permutation(&mut rng::stream(cfg.seed, epoch as u64, "probe-shuffle"), n);
        let mut loss_sum = T::zero();
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let (w, b) = params.split_at(d);
            for &r in chunk {
                let phi = acts.row(r);
                let z = dot(w, phi) + b[0];
                let y = labels[r];
                let yt = if y == 1 { T::one() } else { T::zero() };
                loss_sum += softplus(z) - yt * z;
                if usize::from(z >= T::zero()) == y {
                    correct += 1;
                }
                let g = z.sigmoid() - yt;
                for (gw, &p) in grad[..d].iter_mut().zip(phi) {
                    *gw += g * p;
                }
                grad[d] += g;
            }
            let inv = T::one() / T::of_usize(chunk.len());
            grad.iter_mut().for_each(|g| *g *= inv);
            opt.step(&mut params, &grad, frozen.as_deref());
        }
        if !loss_sum.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        log.push(EpochRecord {
            epoch,
            loss: loss_sum.as_f64() / n as f64,
            accuracy: correct as f64 / n as f64,
        });
        if let (Some(k), true) = (sparsity, epoch == threshold_at) {
            let keep = top_k_magnitude(&params[..d], k);
            let mut mask = vec![true; d + 1];
            mask[d] = false;
            for &i in &keep {
                mask[i] = false;
            }
            for (p, &f) in params.iter_mut().zip(&mask) {
                if f {
                    *p = T::zero();
                }
            }
            frozen = Some(mask);
        }
    }
    let bias = params[d];
    params.truncate(d);
    Ok(Probe {
        tap: tap.to_string(),
        weights: params,
        bias,
        sparsity,
        config: cfg.clone(),
        train_log: log,
    })
}

/// Dense probe trained with binary cross-entropy and Adam from a zero start;
/// the batch order is the only randomness.
pub fn train_probe<T: Scalar>(acts: &Tensor<T>, labels: &[usize], tap: &str, cfg: &ProbeConfig) -> Result<Probe<T>> {
    fit(acts, labels, tap, cfg, None)
}

/// Iterative hard thresholding: trains densely for `⌈E/2⌉` epochs, then
/// zeroes every weight outside the `k` largest magnitudes, freezes them, and
/// finishes training the survivors and the bias.
pub fn train_sparse_probe<T: Scalar>(
    acts: &Tensor<T>,
    labels: &[usize],
    tap: &str,
    cfg: &ProbeConfig,
    k: usize,
) -> Result<Probe<T>> {
    fit(acts, labels, tap, cfg, Some(k))
}

pub fn probe_logits<T: Scalar>(probe: &Probe<T>, acts: &Tensor<T>) -> Result<Vec<T>> {
    if acts.shape().len() != 2 {
        return Err(Error::InvalidConfig(format!(
            "activations must be n × d, got {:?}",
            acts.shape()
        )));
    }
    check_dim("probe input", 1, probe.dim(), acts.shape()[1])?;
    Ok(acts.iter_rows().map(|phi| probe.logit(phi)).collect())
}

/// Predictions use `logit >= 0` as the positive class.
pub fn probe_predictions<T: Scalar>(probe: &Probe<T>, acts: &Tensor<T>) -> Result<Vec<usize>> {
    Ok(probe_logits(probe, acts)?
        .into_iter()
        .map(|z| usize::from(z >= T::zero()))
        .collect())
}

pub fn probe_accuracy<T: Scalar>(probe: &Probe<T>, acts: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let preds = probe_predictions(probe, acts)?;
    check_dim("probe labels", 0, preds.len(), labels.len())?;
    if preds.is_empty() {
        return Err(Error::Empty("probe evaluation set"));
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}
