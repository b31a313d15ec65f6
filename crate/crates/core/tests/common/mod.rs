#![allow(dead_code)]

use cattr_core::nn::{Network, NetworkSpec};

/// Loop-based forward pass that reads parameters by name and handles one
/// example at a time; shares no code with the library's kernels.
pub fn scalar_reference_forward(net: &Network<f64>, x: &[f64], upto_block: Option<usize>) -> Vec<f64> {
    let spec = net.spec();
    let p = net.params();
    let [mut c, mut h, mut w] = spec.input;
    let mut cur: Vec<f64> = x.to_vec();
    let nb = upto_block.unwrap_or(spec.blocks.len());
    for (i, b) in spec.blocks.iter().enumerate().take(nb) {
        let we = net.entry(&format!("layer{}.weight", i + 1)).unwrap();
        let be = net.entry(&format!("layer{}.bias", i + 1)).unwrap();
        let k = b.window as isize;
        let pad = k / 2;
        let co = b.out_channels;
        let mut z = vec![0.0; co * h * w];
        for o in 0..co {
            for y in 0..h as isize {
                for xx in 0..w as isize {
                    let mut acc = p[be.offset + o];
                    for ci in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = y + ky - pad;
                                let ix = xx + kx - pad;
                                if iy >= 0 && ix >= 0 && iy < h as isize && ix < w as isize {
                                    let wi = ((o * c + ci) * b.window + ky as usize) * b.window + kx as usize;
                                    acc += p[we.offset + wi] * cur[(ci * h + iy as usize) * w + ix as usize];
                                }
                            }
                        }
                    }
                    z[(o * h + y as usize) * w + xx as usize] = if acc > 0.0 { acc } else { 0.0 };
                }
            }
        }
        c = co;
        if b.pool {
            let (ho, wo) = (h / 2, w / 2);
            let mut pooled = vec![0.0; c * ho * wo];
            for ch in 0..c {
                for y in 0..ho {
                    for xx in 0..wo {
                        let mut s = 0.0;
                        for dy in 0..2 {
                            for dx in 0..2 {
                                s += z[(ch * h + 2 * y + dy) * w + 2 * xx + dx];
                            }
                        }
                        pooled[(ch * ho + y) * wo + xx] = s / 4.0;
                    }
                }
            }
            h = ho;
            w = wo;
            cur = pooled;
        } else {
            cur = z;
        }
    }
    if upto_block.is_some() {
        return cur;
    }
    let hw = net.entry("head.weight").unwrap();
    let hb = net.entry("head.bias").unwrap();
    let d = cur.len();
    (0..spec.n_classes)
        .map(|o| {
            let mut acc = p[hb.offset + o];
            for j in 0..d {
                acc += p[hw.offset + o * d + j] * cur[j];
            }
            acc
        })
        .collect()
}

pub fn reference_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn reference_ce(z: &[f64], y: usize) -> f64 {
    -reference_softmax(z)[y].ln()
}

/// 1×8×8 input, two pooled blocks, three classes.
pub fn golden_spec() -> NetworkSpec {
    use cattr_core::nn::BlockSpec;
    NetworkSpec {
        input: [1, 8, 8],
        blocks: vec![BlockSpec::conv3(2), BlockSpec::conv3(3)],
        n_classes: 3,
    }
}

/// Deterministic pseudo-random fixture values in [0, 1).
pub fn fixture_values(n: usize, salt: u64) -> Vec<f64> {
    let mut s = salt.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

/// Central differences of `f` at `x`.
pub fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + step;
            let fp = f(&xp);
            xp[i] = orig - step;
            let fm = f(&xp);
            xp[i] = orig;
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// Largest componentwise relative error; denominators are floored at 1e-4 so
/// components that are numerically zero are compared absolutely.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-4))
        .fold(0.0, f64::max)
}
