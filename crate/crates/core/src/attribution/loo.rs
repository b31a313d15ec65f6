//! Brute-force leave-one-out retraining of an L2-regularized logistic probe:
//! the ground truth the attribution scores are validated against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
use crate::scalar::{dot, softplus, Scalar};
use crate::tensor::Tensor;

pub const MAX_LOO_TRAIN: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LooConfig {
    /// L2 penalty `(l2 / 2)‖w‖²` on the weights (bias unpenalized).
    pub l2: f64,
    /// Newton iterations per fit.
    pub steps: usize,
    /// Gradient-norm bound a fit must reach to count as converged.
    pub tol: f64,
    /// Fit an (unpenalized) intercept.
    pub fit_bias: bool,
}

impl Default for LooConfig {
    fn default() -> Self {
        Self {
            l2: 1e-1,
            steps: 500,
            tol: 1e-3,
            fit_bias: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFit<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub grad_norm: f64,
}

impl<T: Scalar> LogisticFit<T> {
    pub fn loss(&self, phi: &[T], label: usize) -> T {
        let z = dot(&self.weights, phi) + self.bias;
        let y = if label == 1 { T::one() } else { T::zero() };
        softplus(z) - y * z
    }
}

/// `(1/n) Σ_{r ∈ rows} ℓ_r + (l2/2)‖w‖²` with `n` the full training size, so
/// dropping a row that contributes no gradient leaves the optimum unchanged.
fn objective<T: Scalar>(theta: &[T], acts: &Tensor<T>, labels: &[usize], rows: &[usize], l2: T) -> T {
    let d = theta.len() - 1;
    let mut s = T::zero();
    for &r in rows {
        let z = dot(&theta[..d], acts.row(r)) + theta[d];
        let y = if labels[r] == 1 { T::one() } else { T::zero() };
        s += softplus(z) - y * z;
    }
    s / T::of_usize(acts.rows()) + T::lit(0.5) * l2 * dot(&theta[..d], &theta[..d])
}

/// Newton's method with backtracking from a zero start, fitting rows `rows`
/// of `acts`. Iteration stops early once a step no longer lowers the
/// objective.
pub fn fit_logistic<T: Scalar>(
    acts: &Tensor<T>,
    labels: &[usize],
    rows: &[usize],
    cfg: &LooConfig,
) -> LogisticFit<T> {
    let d = acts.row_len();
    let p = d + 1;
    let l2 = T::lit(cfg.l2);
    let fit_bias = cfg.fit_bias;
    let inv_n = T::one() / T::of_usize(acts.rows());
    let mut theta = vec![T::zero(); p];
    let mut grad = vec![T::zero(); p];
    let gradient = |theta: &[T], grad: &mut [T], hess: Option<&mut [T]>| {
        grad.iter_mut().for_each(|g| *g = T::zero());
        let mut h = hess;
        if let Some(h) = h.as_deref_mut() {
            h.iter_mut().for_each(|v| *v = T::zero());
        }
        for &r in rows {
            let phi = acts.row(r);
            let z = dot(&theta[..d], phi) + theta[d];
            let s = z.sigmoid();
            let y = if labels[r] == 1 { T::one() } else { T::zero() };
            let e = (s - y) * inv_n;
            for j in 0..d {
                grad[j] += e * phi[j];
            }
            grad[d] += e;
            if let Some(h) = h.as_deref_mut() {
                let w = s * (T::one() - s) * inv_n;
                for i in 0..p {
                    let xi = if i < d { phi[i] } else { T::one() };
                    for j in 0..=i {
                        let xj = if j < d { phi[j] } else { T::one() };
                        h[i * p + j] += w * xi * xj;
                    }
                }
            }
        }
        for j in 0..d {
            grad[j] += l2 * theta[j];
        }
        if let Some(h) = h {
            for i in 0..p {
                for j in 0..i {
                    h[j * p + i] = h[i * p + j];
                }
                if i < d {
                    h[i * p + i] += l2;
                }
            }
            if fit_bias {
                // Keeps the bias pivot positive when every probability saturates.
                h[p * p - 1] += T::lit(1e-12);
            } else {
                for j in 0..p {
                    h[j * p + d] = T::zero();
                    h[d * p + j] = T::zero();
                }
                h[p * p - 1] = T::one();
            }
        }
        if !fit_bias {
            grad[d] = T::zero();
        }
    };
    let mut hess = vec![T::zero(); p * p];
    let mut f = objective(&theta, acts, labels, rows, l2);
    for _ in 0..cfg.steps {
        gradient(&theta, &mut grad, Some(&mut hess));
        let Some(l) = cholesky(&hess, p) else { break };
        let mut step = grad.clone();
        cholesky_solve(&l, p, &mut step);
        let slope = dot(&grad, &step);
        let mut t = T::one();
        let mut moved = false;
        for _ in 0..40 {
            let cand: Vec<T> = theta.iter().zip(&step).map(|(&a, &s)| a - t * s).collect();
            let fc = objective(&cand, acts, labels, rows, l2);
            if fc <= f - T::lit(1e-4) * t * slope {
                moved = fc < f;
                theta = cand;
                f = fc;
                break;
            }
            t *= T::lit(0.5);
        }
        if !moved {
            break;
        }
    }
    gradient(&theta, &mut grad, None);
    let grad_norm = dot(&grad, &grad).sqrt().as_f64();
    let bias = theta[d];
    theta.truncate(d);
    LogisticFit {
        weights: theta,
        bias,
        grad_norm,
    }
}

#[derive(Debug, Clone)]
pub struct LooResult<T> {
    /// `(v, t)`: validation loss with `t` removed minus loss on the full set.
    pub delta: Tensor<T>,
    /// Per training point: the retrained fit did not reach `tol`.
    pub flagged: Vec<bool>,
    pub full_fit: LogisticFit<T>,
}

impl<T: Scalar> LooResult<T> {
    /// Mean over validation rows per training column.
    pub fn column_means(&self) -> Vec<f64> {
        let n_val = self.delta.rows();
        let n_tr = self.delta.row_len();
        let mut out = vec![0.0; n_tr];
        for row in self.delta.iter_rows() {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v.as_f64();
            }
        }
        out.iter_mut().for_each(|v| *v /= n_val as f64);
        out
    }
}

/// Retrains once per removed training point (in parallel over the removed
/// index; each fit is deterministic, so scheduling does not affect results).
pub fn loo_oracle<T: Scalar>(
    acts_train: &Tensor<T>,
    labels: &[usize],
    acts_val: &Tensor<T>,
    val_labels: &[usize],
    cfg: &LooConfig,
) -> Result<LooResult<T>> {
    let n = acts_train.rows();
    if n < 2 {
        return Err(Error::Empty("leave-one-out needs at least two training points"));
    }
    if n > MAX_LOO_TRAIN {
        return Err(Error::InvalidConfig(format!(
            "leave-one-out is brute force; n_train = {n} exceeds {MAX_LOO_TRAIN}"
        )));
    }
    check_dim("loo labels", 0, n, labels.len())?;
    check_dim("loo validation labels", 0, acts_val.rows(), val_labels.len())?;
    check_dim("loo activations", 1, acts_train.row_len(), acts_val.row_len())?;
    let all: Vec<usize> = (0..n).collect();
    let full = fit_logistic(acts_train, labels, &all, cfg);
    let base: Vec<T> = (0..acts_val.rows())
        .map(|v| full.loss(acts_val.row(v), val_labels[v]))
        .collect();
    let columns: Vec<(Vec<T>, bool)> = (0..n)
        .into_par_iter()
        .map(|t| {
            let rows: Vec<usize> = (0..n).filter(|&r| r != t).collect();
            let fit = fit_logistic(acts_train, labels, &rows, cfg);
            let col = (0..acts_val.rows())
                .map(|v| fit.loss(acts_val.row(v), val_labels[v]) - base[v])
                .collect();
            (col, !(fit.grad_norm <= cfg.tol))
        })
        .collect();
    let n_val = acts_val.rows();
    let mut delta = vec![T::zero(); n_val * n];
    for (t, (col, _)) in columns.iter().enumerate() {
        for v in 0..n_val {
            delta[v * n + t] = col[v];
        }
    }
    Ok(LooResult {
        delta: Tensor::new(vec![n_val, n], delta)?,
        flagged: columns.iter().map(|c| c.1).collect(),
        full_fit: full,
    })
}

/// Two overlapping Gaussian classes in `d` dimensions (means `±separation / 2`
/// on the first axis, unit variance), balanced in both splits. Training row `n_train - 2` duplicates row 0 so
/// redundancy properties can be checked.
#[derive(Debug, Clone)]
pub struct LogisticFixture<T> {
    pub acts_train: Tensor<T>,
    pub labels: Vec<usize>,
    pub acts_val: Tensor<T>,
    pub val_labels: Vec<usize>,
}

pub fn logistic_fixture<T: Scalar>(
    n_train: usize,
    n_val: usize,
    d: usize,
    separation: f64,
    seed: u64,
) -> Result<LogisticFixture<T>> {
    if n_train < 4 || !n_train.is_multiple_of(2) || n_val < 2 || !n_val.is_multiple_of(2) || d == 0 {
        return Err(Error::InvalidConfig(format!(
            "fixture needs even n_train ≥ 4 and n_val ≥ 2, d ≥ 1; got {n_train}, {n_val}, {d}"
        )));
    }
    let mut r = crate::rng::stream(seed, 0, "logistic-fixture");
    let mut draw = |n: usize| {
        let mut data = Vec::with_capacity(n * d);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        for &l in &labels {
            for j in 0..d {
                let shift = match (j, l) {
                    (0, 1) => separation / 2.0,
                    (0, _) => -separation / 2.0,
                    _ => 0.0,
                };
                data.push(T::lit(shift + crate::rng::gaussian(&mut r)));
            }
        }
        (data, labels)
    };
    let (mut tr, mut labels) = draw(n_train - 2);
    // A duplicate pair keeps the split balanced: row 0 repeated, plus one
    // fresh point of the opposite label.
    tr.extend_from_within(..d);
    labels.push(labels[0]);
    let (extra, extra_l) = draw(2);
    let pick = if extra_l[0] != labels[0] { 0 } else { 1 };
    tr.extend_from_slice(&extra[pick * d..(pick + 1) * d]);
    labels.push(extra_l[pick]);
    let (va, val_labels) = draw(n_val);
    Ok(LogisticFixture {
        acts_train: Tensor::new(vec![n_train, d], tr)?,
        labels,
        acts_val: Tensor::new(vec![n_val, d], va)?,
        val_labels,
    })
}
