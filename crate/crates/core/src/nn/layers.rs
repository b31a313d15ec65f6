//! Per-example layer kernels. Feature maps are `[channels, height, width]`
//! row-major slices.

use crate::scalar::{dot, Scalar};

/// Copies `c` planes of `h × w` into zero-padded planes of width
/// `w + k − 1` with `k / 2` leading rows/columns, plus one spare row so every
/// tap can read a full `h × (w + k − 1)` window as one contiguous slice.
fn pad_planes<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, k: usize) -> Vec<T> {
    let (wp, hp, p) = (w + k - 1, h + k, k / 2);
    let mut out = vec![T::zero(); c * hp * wp];
    for ch in 0..c {
        for y in 0..h {
            let dst = ch * hp * wp + (y + p) * wp + p;
            out[dst..dst + w].copy_from_slice(&x[(ch * h + y) * w..(ch * h + y + 1) * w]);
        }
    }
    out
}

#[inline]
fn axpy<T: Scalar>(dst: &mut [T], a: T, src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

/// Same-padded convolution. `weight` is `[cout, cin, k, k]`.
///
/// Works on "wide" rows of the padded width: output position `(y, x)` lives
/// at `y · (w + k − 1) + x`, so each tap is a single contiguous multiply-add
/// over the plane; the `k − 1` trailing columns of each wide row are
/// discarded.
#[allow(clippy::too_many_arguments)]
pub fn conv_forward<T: Scalar>(
    x: &[T],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[T],
    bias: &[T],
    cout: usize,
    k: usize,
) -> Vec<T> {
    let (wp, hp) = (w + k - 1, h + k);
    let len = h * wp;
    let xp = pad_planes(x, cin, h, w, k);
    let mut out = vec![T::zero(); cout * h * w];
    let mut wide = vec![T::zero(); len];
    for o in 0..cout {
        wide.iter_mut().for_each(|v| *v = bias[o]);
        for c in 0..cin {
            let src = &xp[c * hp * wp..(c + 1) * hp * wp];
            for ky in 0..k {
                for kx in 0..k {
                    let wt = weight[((o * cin + c) * k + ky) * k + kx];
                    axpy(&mut wide, wt, &src[ky * wp + kx..ky * wp + kx + len]);
                }
            }
        }
        for y in 0..h {
            out[(o * h + y) * w..(o * h + y + 1) * w].copy_from_slice(&wide[y * wp..y * wp + w]);
        }
    }
    out
}

/// Gradients of a same-padded convolution. Accumulates into `dweight` and
/// `dbias`; returns the input gradient when `want_dx`.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Scalar>(
    x: &[T],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[T],
    cout: usize,
    k: usize,
    dout: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
    want_dx: bool,
) -> Option<Vec<T>> {
    let (wp, hp, p) = (w + k - 1, h + k, k / 2);
    let (plane, padded, len) = (h * w, hp * wp, h * wp);
    let xp = pad_planes(x, cin, h, w, k);
    let mut dxp = if want_dx {
        Some(vec![T::zero(); cin * padded])
    } else {
        None
    };
    // Output gradient on wide rows; the discarded columns stay zero.
    let mut g = vec![T::zero(); len];
    for o in 0..cout {
        let go = &dout[o * plane..(o + 1) * plane];
        dbias[o] += go.iter().copied().sum::<T>();
        for y in 0..h {
            g[y * wp..y * wp + w].copy_from_slice(&go[y * w..(y + 1) * w]);
        }
        for c in 0..cin {
            let src = &xp[c * padded..(c + 1) * padded];
            for ky in 0..k {
                for kx in 0..k {
                    let widx = ((o * cin + c) * k + ky) * k + kx;
                    let off = ky * wp + kx;
                    dweight[widx] += dot(&g, &src[off..off + len]);
                    if let Some(dxp) = dxp.as_mut() {
                        let plane_c = &mut dxp[c * padded..(c + 1) * padded];
                        axpy(&mut plane_c[off..off + len], weight[widx], &g);
                    }
                }
            }
        }
    }
    dxp.map(|dxp| {
        let mut dx = vec![T::zero(); cin * plane];
        for c in 0..cin {
            for y in 0..h {
                let s = c * padded + (y + p) * wp + p;
                dx[(c * h + y) * w..(c * h + y + 1) * w].copy_from_slice(&dxp[s..s + w]);
            }
        }
        dx
    })
}

pub fn relu_inplace<T: Scalar>(x: &mut [T]) {
    for v in x.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Masks `grad` by the rectifier's pre-activation sign.
pub fn relu_backward<T: Scalar>(pre: &[T], grad: &mut [T]) {
    for (g, &z) in grad.iter_mut().zip(pre) {
        if z <= T::zero() {
            *g = T::zero();
        }
    }
}

/// 2×2 average pooling with stride 2; odd trailing rows/cols are dropped.
pub fn avgpool_forward<T: Scalar>(x: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (ho, wo) = (h / 2, w / 2);
    let quarter = T::lit(0.25);
    let mut out = vec![T::zero(); c * ho * wo];
    for ch in 0..c {
        let src = &x[ch * h * w..(ch + 1) * h * w];
        for y in 0..ho {
            for xx in 0..wo {
                let i = 2 * y * w + 2 * xx;
                out[(ch * ho + y) * wo + xx] =
                    (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]) * quarter;
            }
        }
    }
    out
}

pub fn avgpool_backward<T: Scalar>(dout: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (ho, wo) = (h / 2, w / 2);
    let quarter = T::lit(0.25);
    let mut dx = vec![T::zero(); c * h * w];
    for ch in 0..c {
        let dst = &mut dx[ch * h * w..(ch + 1) * h * w];
        for y in 0..ho {
            for xx in 0..wo {
                let g = dout[(ch * ho + y) * wo + xx] * quarter;
                let i = 2 * y * w + 2 * xx;
                dst[i] = g;
                dst[i + 1] = g;
                dst[i + w] = g;
                dst[i + w + 1] = g;
            }
        }
    }
    dx
}

/// `y = W x + b` with `W` shaped `[out, in]`.
pub fn dense_forward<T: Scalar>(x: &[T], weight: &[T], bias: &[T]) -> Vec<T> {
    let d = x.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| b + crate::scalar::dot(&weight[o * d..(o + 1) * d], x))
        .collect()
}

pub fn dense_backward<T: Scalar>(
    x: &[T],
    weight: &[T],
    dout: &[T],
    dweight: &mut [T],
    dbias: &mut [T],
    want_dx: bool,
) -> Option<Vec<T>> {
    let d = x.len();
    for (o, &g) in dout.iter().enumerate() {
        dbias[o] += g;
        if g == T::zero() {
            continue;
        }
        for (dw, &xi) in dweight[o * d..(o + 1) * d].iter_mut().zip(x) {
            *dw += g * xi;
        }
    }
    want_dx.then(|| {
        let mut dx = vec![T::zero(); d];
        for (o, &g) in dout.iter().enumerate() {
            for (v, &wt) in dx.iter_mut().zip(&weight[o * d..(o + 1) * d]) {
                *v += g * wt;
            }
        }
        dx
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct quadruple loop with explicit bounds checks.
    #[allow(clippy::too_many_arguments)]
    fn conv_reference(
        x: &[f64],
        cin: usize,
        h: usize,
        w: usize,
        wt: &[f64],
        b: &[f64],
        cout: usize,
        k: usize,
    ) -> Vec<f64> {
        let pad = (k / 2) as isize;
        let mut out = vec![0.0; cout * h * w];
        for o in 0..cout {
            for y in 0..h as isize {
                for xx in 0..w as isize {
                    let mut acc = b[o];
                    for c in 0..cin {
                        for ky in 0..k as isize {
                            for kx in 0..k as isize {
                                let (iy, ix) = (y + ky - pad, xx + kx - pad);
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += wt[((o * cin + c) * k + ky as usize) * k + kx as usize]
                                    * x[(c * h + iy as usize) * w + ix as usize];
                            }
                        }
                    }
                    out[(o * h + y as usize) * w + xx as usize] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_reference() {
        let (cin, h, w, cout, k) = (2, 5, 6, 3, 3);
        let x: Vec<f64> = (0..cin * h * w).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let wt: Vec<f64> = (0..cout * cin * k * k).map(|i| ((i * 3) % 5) as f64 * 0.1 - 0.2).collect();
        let b = vec![0.5, -1.0, 0.25];
        let fast = conv_forward(&x, cin, h, w, &wt, &b, cout, k);
        let slow = conv_reference(&x, cin, h, w, &wt, &b, cout, k);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
        let k5: Vec<f64> = (0..cout * cin * 25).map(|i| (i % 7) as f64 * 0.05).collect();
        let fast = conv_forward(&x, cin, h, w, &k5, &b, cout, 5);
        let slow = conv_reference(&x, cin, h, w, &k5, &b, cout, 5);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pool_averages_quads() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        assert_eq!(avgpool_forward(&x, 1, 2, 4), vec![3.5, 5.5]);
        assert_eq!(avgpool_backward(&[4.0, 8.0], 1, 2, 4), vec![1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
    }
}
