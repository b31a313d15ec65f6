use serde::{Deserialize, Serialize};

use super::layers::{
    avgpool_backward, avgpool_forward, conv_backward, conv_forward, dense_backward, dense_forward,
    relu_backward, relu_inplace,
};
use super::model::Model;
use super::spec::{NetworkSpec, ParamEntry};
use crate::error::{check_dim, Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

/// A layered classifier with its flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    spec: NetworkSpec,
    layout: Vec<ParamEntry>,
    params: Vec<T>,
    seed: u64,
    pub train_log: Vec<EpochRecord>,
}

/// Intermediate values of one example's forward pass.
#[derive(Debug, Default)]
pub(crate) struct Trace<T> {
    block_inputs: Vec<Vec<T>>,
    pre_activations: Vec<Vec<T>>,
    head_input: Vec<T>,
}

impl<T: Scalar> Network<T> {
    /// He-normal convolution weights, scaled-normal head, zero biases, all
    /// drawn from `stream(seed, 0, "init")`.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = spec.layout();
        let mut params = vec![T::zero(); spec.n_params()];
        let mut rng = rng::stream(seed, 0, "init");
        for e in &layout {
            if e.name.ends_with(".bias") {
                continue;
            }
            let fan_in: usize = e.shape[1..].iter().product();
            let std = if e.name.starts_with("head") {
                (1.0 / fan_in as f64).sqrt()
            } else {
                (2.0 / fan_in as f64).sqrt()
            };
            for p in &mut params[e.range()] {
                *p = T::lit(std * rng::gaussian(&mut rng));
            }
        }
        Ok(Self {
            spec,
            layout,
            params,
            seed,
            train_log: Vec::new(),
        })
    }

    pub fn from_params(spec: NetworkSpec, params: Vec<T>, seed: u64) -> Result<Self> {
        spec.validate()?;
        check_dim("network parameters", 0, spec.n_params(), params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        Ok(Self {
            layout: spec.layout(),
            spec,
            params,
            seed,
            train_log: Vec::new(),
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &[ParamEntry] {
        &self.layout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn entry(&self, name: &str) -> Option<&ParamEntry> {
        self.layout.iter().find(|e| e.name == name)
    }

    fn block_params(&self, i: usize) -> (&[T], &[T]) {
        let w = &self.layout[2 * i];
        let b = &self.layout[2 * i + 1];
        (&self.params[w.range()], &self.params[b.range()])
    }

    fn head_params(&self) -> (&[T], &[T]) {
        let n = self.layout.len();
        (
            &self.params[self.layout[n - 2].range()],
            &self.params[self.layout[n - 1].range()],
        )
    }

    /// Runs one example up to `stage` (see [`NetworkSpec::tap_stage`]).
    pub(crate) fn run_example(&self, x: &[T], stage: usize, mut trace: Option<&mut Trace<T>>) -> Vec<T> {
        let [mut c, mut h, mut w] = self.spec.input;
        let mut cur = x.to_vec();
        for (i, b) in self.spec.blocks.iter().enumerate().take(stage) {
            let (wt, bias) = self.block_params(i);
            let mut z = conv_forward(&cur, c, h, w, wt, bias, b.out_channels, b.window);
            if let Some(t) = trace.as_deref_mut() {
                t.block_inputs.push(std::mem::take(&mut cur));
                t.pre_activations.push(z.clone());
            }
            relu_inplace(&mut z);
            c = b.out_channels;
            cur = if b.pool {
                let p = avgpool_forward(&z, c, h, w);
                h /= 2;
                w /= 2;
                p
            } else {
                z
            };
        }
        if stage > self.spec.blocks.len() {
            let (wt, bias) = self.head_params();
            let logits = dense_forward(&cur, wt, bias);
            if let Some(t) = trace {
                t.head_input = cur;
            }
            logits
        } else {
            cur
        }
    }

    /// Backpropagates `dout` (gradient at `stage`'s output) through a traced
    /// pass, accumulating parameter gradients into `grad` (full length).
    pub(crate) fn backprop_example(&self, trace: &Trace<T>, stage: usize, dout: &[T], grad: &mut [T]) {
        let nb = self.spec.blocks.len();
        let mut g = dout.to_vec();
        if stage > nb {
            let n = self.layout.len();
            let (wt, _) = self.head_params();
            let (hw, hb) = (self.layout[n - 2].range(), self.layout[n - 1].range());
            let (gw, gb) = split_two(grad, hw, hb);
            g = dense_backward(&trace.head_input, wt, &g, gw, gb, true).unwrap();
        }
        let shapes = self.spec.block_shapes();
        for i in (0..stage.min(nb)).rev() {
            let b = &self.spec.blocks[i];
            let [cin, h, w] = if i == 0 { self.spec.input } else { shapes[i - 1] };
            let ch = b.out_channels;
            if b.pool {
                g = avgpool_backward(&g, ch, h, w);
            }
            relu_backward(&trace.pre_activations[i], &mut g);
            let (wr, br) = (self.layout[2 * i].range(), self.layout[2 * i + 1].range());
            let (wt, _) = self.block_params(i);
            let (gw, gb) = split_two(grad, wr, br);
            match conv_backward(&trace.block_inputs[i], cin, h, w, wt, ch, b.window, &g, gw, gb, i > 0) {
                Some(dx) => g = dx,
                None => break,
            }
        }
    }

    fn check_batch(&self, batch: &Tensor<T>) -> Result<usize> {
        let shape = batch.shape();
        if shape.len() != 4 {
            return Err(Error::InvalidConfig(format!(
                "batch must be 4-D (n, c, h, w), got shape {shape:?}"
            )));
        }
        for d in 0..3 {
            check_dim("network input", d + 1, self.spec.input[d], shape[d + 1])?;
        }
        Ok(shape[0])
    }

    /// Pre-softmax outputs, `(n, n_classes)`.
    pub fn logits(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward_to_layer(batch, super::spec::LOGITS_TAP)
    }

    /// Class probabilities, `(n, n_classes)`.
    pub fn forward(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let mut out = self.logits(batch)?;
        let k = self.spec.n_classes;
        for row in out.data_mut().chunks_mut(k) {
            softmax_inplace(row);
        }
        Ok(out)
    }

    /// Flattened activations at `tap`, `(n, tap_dim)`.
    pub fn forward_to_layer(&self, batch: &Tensor<T>, tap: &str) -> Result<Tensor<T>> {
        let stage = self.spec.tap_stage(tap)?;
        let n = self.check_batch(batch)?;
        let d = self.spec.tap_dim(tap)?;
        let mut data = Vec::with_capacity(n * d);
        for r in 0..n {
            data.extend(self.run_example(batch.row(r), stage, None));
        }
        Tensor::new(vec![n, d], data)
    }

    /// Predicted class per example, ties to the lowest index.
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Vec<usize>> {
        let logits = self.logits(batch)?;
        Ok(logits.iter_rows().map(crate::scalar::argmax).collect())
    }
}

/// Two disjoint mutable sub-slices, `a` before `b`.
fn split_two<T>(
    v: &mut [T],
    a: std::ops::Range<usize>,
    b: std::ops::Range<usize>,
) -> (&mut [T], &mut [T]) {
    debug_assert!(a.end <= b.start);
    let (lo, hi) = v.split_at_mut(b.start);
    (&mut lo[a], &mut hi[..b.end - b.start])
}

pub(crate) fn softmax_inplace<T: Scalar>(row: &mut [T]) {
    let m = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut s = T::zero();
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in row.iter_mut() {
        *v /= s;
    }
}

impl<T: Scalar> Model<T> for Network<T> {
    fn n_params(&self) -> usize {
        self.params.len()
    }

    fn n_outputs(&self) -> usize {
        self.spec.n_classes
    }

    fn input_len(&self) -> usize {
        self.spec.input_len()
    }

    fn outputs_one(&self, x: &[T]) -> Vec<T> {
        self.run_example(x, self.spec.blocks.len() + 1, None)
    }

    fn backprop_one(&self, x: &[T], dloss: &mut dyn FnMut(&[T]) -> Vec<T>, grad: &mut [T]) -> Vec<T> {
        let stage = self.spec.blocks.len() + 1;
        let mut trace = Trace::default();
        let out = self.run_example(x, stage, Some(&mut trace));
        let g = dloss(&out);
        self.backprop_example(&trace, stage, &g, grad);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::spec::BlockSpec;

    #[test]
    fn zero_head_gives_uniform_probabilities() {
        let spec = NetworkSpec::desk_default(5);
        let mut net = Network::<f64>::init(spec, 3).unwrap();
        let n = net.layout().len();
        let (a, b) = (net.layout()[n - 2].range(), net.layout()[n - 1].range());
        net.params_mut()[a.start..b.end].iter_mut().for_each(|p| *p = 0.0);
        let x = Tensor::filled(vec![3, 1, 32, 32], 0.7);
        let p = net.forward(&x).unwrap();
        assert!(p.data().iter().all(|&v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn identity_head_passes_features_through() {
        // 1×4×4 input, one unpooled 1×1 block, head with identity weights.
        let spec = NetworkSpec {
            input: [1, 4, 4],
            blocks: vec![BlockSpec { window: 1, out_channels: 1, pool: false }],
            n_classes: 16,
        };
        let mut params = vec![0.0f64; spec.n_params()];
        params[0] = 1.0;
        for i in 0..16 {
            params[2 + i * 16 + i] = 1.0;
        }
        let net = Network::from_params(spec, params, 0).unwrap();
        let x: Vec<f64> = (0..32).map(|i| i as f64 / 32.0).collect();
        let batch = Tensor::new(vec![2, 1, 4, 4], x.clone()).unwrap();
        assert_eq!(net.forward_to_layer(&batch, "layer1").unwrap().data(), &x[..]);
        assert_eq!(net.logits(&batch).unwrap().data(), &x[..]);
    }

    #[test]
    fn probabilities_are_normalized() {
        let net = Network::<f64>::init(NetworkSpec::desk_default(10), 9).unwrap();
        let x: Vec<f64> = (0..2 * 1024).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let p = net.forward(&Tensor::new(vec![2, 1, 32, 32], x).unwrap()).unwrap();
        for row in p.iter_rows() {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() <= 1e-12);
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn shape_mismatch_names_dimension() {
        let net = Network::<f64>::init(NetworkSpec::desk_default(10), 1).unwrap();
        let err = net.forward(&Tensor::zeros(vec![1, 1, 32, 30])).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { dim: 3, expected: 32, got: 30, .. }), "{err}");
        let err = net.forward_to_layer(&Tensor::zeros(vec![1, 1, 32, 32]), "conv9").unwrap_err();
        assert!(err.to_string().contains("layer1, layer2, layer3, logits"));
    }

    #[test]
    fn f32_network_tracks_f64() {
        let a = Network::<f64>::init(NetworkSpec::desk_default(4), 5).unwrap();
        let b = Network::<f32>::from_params(
            a.spec().clone(),
            a.params().iter().map(|&p| p as f32).collect(),
            5,
        )
        .unwrap();
        let x = Tensor::<f64>::filled(vec![1, 1, 32, 32], 0.5);
        let la = a.logits(&x).unwrap();
        let lb = b.logits(&x.cast()).unwrap();
        for (p, q) in la.data().iter().zip(lb.data()) {
            assert!((p - *q as f64).abs() < 1e-4);
        }
    }
}
