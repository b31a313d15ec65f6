use crate::error::{check_dim, Error, Result};
use crate::linalg::orthogonality_defect;
use crate::scalar::{dot, Scalar};
use crate::tensor::Tensor;

use super::probe::Probe;

/// Tolerance on `max |UᵀU − I|` for `U` to count as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

fn apply<T: Scalar>(u: &[T], d: usize, v: &[T]) -> Vec<T> {
    (0..d).map(|i| dot(&u[i * d..(i + 1) * d], v)).collect()
}

/// Rotates the probe direction and every activation by the row-major `d × d`
/// matrix `u` and returns `max |(Ua)·(Uφ) − a·φ|` over examples. The bias is
/// left out of both sides.
pub fn rotation_invariance_check<T: Scalar>(probe: &Probe<T>, acts: &Tensor<T>, u: &[T]) -> Result<f64> {
    let d = probe.dim();
    check_dim("rotation matrix", 0, d * d, u.len())?;
    check_dim("activations", 1, d, acts.row_len())?;
    let defect = orthogonality_defect(u, d);
    if !(defect <= ORTHOGONALITY_TOL) {
        return Err(Error::NotOrthogonal { max_dev: defect });
    }
    let ua = apply(u, d, &probe.weights);
    let mut worst: f64 = 0.0;
    for phi in acts.iter_rows() {
        let rotated = dot(&ua, &apply(u, d, phi));
        let plain = dot(&probe.weights, phi);
        worst = worst.max((rotated - plain).abs().as_f64());
    }
    Ok(worst)
}
