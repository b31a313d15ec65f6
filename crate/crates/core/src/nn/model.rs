use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{softplus, Scalar};
use crate::tensor::Tensor;

/// A differentiable map from one flattened example to a vector of outputs.
pub trait Model<T: Scalar> {
    fn n_params(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn input_len(&self) -> usize;

    fn outputs_one(&self, x: &[T]) -> Vec<T>;

    /// Forward pass, then backpropagates `dloss(outputs)` and accumulates the
    /// parameter gradient into `grad`. Returns the outputs.
    fn backprop_one(&self, x: &[T], dloss: &mut dyn FnMut(&[T]) -> Vec<T>, grad: &mut [T]) -> Vec<T>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// Softmax cross-entropy over `n_outputs ≥ 2` class logits.
    CrossEntropy,
    /// Sigmoid cross-entropy on a single logit with labels in `{0, 1}`.
    BinaryCrossEntropy,
}

impl Loss {
    pub(crate) fn check(self, k: usize, labels: &[usize]) -> Result<()> {
        match self {
            Loss::CrossEntropy if k < 2 => Err(Error::InvalidConfig(format!(
                "cross-entropy needs at least 2 outputs, model has {k}"
            ))),
            Loss::BinaryCrossEntropy if k != 1 => Err(Error::InvalidConfig(format!(
                "binary cross-entropy needs a single-output model, model has {k}"
            ))),
            _ => {
                let bound = if self == Loss::CrossEntropy { k } else { 2 };
                match labels.iter().position(|&l| l >= bound) {
                    Some(i) => Err(Error::InvalidConfig(format!(
                        "label {} at example {i} out of range for {self:?}",
                        labels[i]
                    ))),
                    None => Ok(()),
                }
            }
        }
    }

    /// Loss value and its gradient with respect to the outputs.
    pub(crate) fn value_and_grad<T: Scalar>(self, outputs: &[T], label: usize) -> (T, Vec<T>) {
        match self {
            Loss::CrossEntropy => {
                let m = outputs.iter().copied().fold(T::neg_infinity(), T::max);
                let s: T = outputs.iter().map(|&z| (z - m).exp()).sum();
                let lse = m + s.ln();
                let grad = outputs
                    .iter()
                    .enumerate()
                    .map(|(j, &z)| (z - lse).exp() - if j == label { T::one() } else { T::zero() })
                    .collect();
                (lse - outputs[label], grad)
            }
            Loss::BinaryCrossEntropy => {
                let z = outputs[0];
                let y = if label == 1 { T::one() } else { T::zero() };
                (softplus(z) - y * z, vec![z.sigmoid() - y])
            }
        }
    }
}

fn check_examples<T: Scalar, M: Model<T> + ?Sized>(model: &M, batch: &Tensor<T>) -> Result<usize> {
    let n = batch.rows();
    if batch.is_empty() || n == 0 {
        return Err(Error::Empty("batch"));
    }
    crate::error::check_dim("model input", 1, model.input_len(), batch.row_len())?;
    Ok(n)
}

/// Mean loss over a batch and its gradient with respect to all parameters.
pub fn loss_and_grad<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    batch: &Tensor<T>,
    labels: &[usize],
    loss: Loss,
) -> Result<(T, Vec<T>)> {
    let n = check_examples(model, batch)?;
    crate::error::check_dim("labels", 0, n, labels.len())?;
    loss.check(model.n_outputs(), labels)?;
    let rows: Vec<usize> = (0..n).collect();
    let mut grad = vec![T::zero(); model.n_params()];
    let stats = accumulate(model, batch, labels, &rows, loss, &mut grad);
    if !stats.loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    let inv = T::one() / T::of_usize(n);
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok((stats.loss * inv, grad))
}

pub(crate) struct BatchStats<T> {
    pub loss: T,
    pub correct: usize,
}

/// Sums loss and gradient over `rows` without normalizing. Inputs must
/// already be validated.
pub(crate) fn accumulate<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    batch: &Tensor<T>,
    labels: &[usize],
    rows: &[usize],
    loss: Loss,
    grad: &mut [T],
) -> BatchStats<T> {
    let mut total = T::zero();
    let mut correct = 0;
    for &r in rows {
        let y = labels[r];
        model.backprop_one(
            batch.row(r),
            &mut |out| {
                let (l, g) = loss.value_and_grad(out, y);
                total += l;
                if predicted_label(loss, out) == y {
                    correct += 1;
                }
                g
            },
            grad,
        );
    }
    BatchStats { loss: total, correct }
}

/// Argmax for class logits; `logit >= 0` for a single binary logit.
pub(crate) fn predicted_label<T: Scalar>(loss: Loss, out: &[T]) -> usize {
    match loss {
        Loss::CrossEntropy => crate::scalar::argmax(out),
        Loss::BinaryCrossEntropy => usize::from(out[0] >= T::zero()),
    }
}

/// Row `r` is the gradient of output 0 (the margin) of example `r` with
/// respect to the model's parameters.
pub fn per_example_grads<T: Scalar, M: Model<T> + ?Sized>(model: &M, examples: &Tensor<T>) -> Result<Tensor<T>> {
    let n = check_examples(model, examples)?;
    if model.n_outputs() != 1 {
        return Err(Error::InvalidConfig(format!(
            "margin gradients need a single-output model, model has {}",
            model.n_outputs()
        )));
    }
    let p = model.n_params();
    let mut data = vec![T::zero(); n * p];
    for (r, row) in data.chunks_mut(p).enumerate() {
        model.backprop_one(examples.row(r), &mut |_| vec![T::one()], row);
    }
    Tensor::new(vec![n, p], data)
}
