//! Small dense linear algebra on row-major square matrices.

use crate::scalar::Scalar;

/// Lower Cholesky factor of a symmetric positive-definite `n × n` matrix;
/// `None` if a pivot is not strictly positive.
pub fn cholesky<T: Scalar>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` in place.
pub fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &mut [T]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Inverse of a symmetric positive-definite matrix, symmetrized.
pub fn spd_inverse<T: Scalar>(a: &[T], n: usize) -> Option<Vec<T>> {
    let l = cholesky(a, n)?;
    let mut inv = vec![T::zero(); n * n];
    let mut col = vec![T::zero(); n];
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = T::zero());
        col[j] = T::one();
        cholesky_solve(&l, n, &mut col);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    let half = T::lit(0.5);
    for i in 0..n {
        for j in 0..i {
            let s = (inv[i * n + j] + inv[j * n + i]) * half;
            inv[i * n + j] = s;
            inv[j * n + i] = s;
        }
    }
    Some(inv)
}

/// `AᵀA` for a row-major `n × m` matrix.
pub fn gram<T: Scalar>(a: &[T], n: usize, m: usize) -> Vec<T> {
    let mut g = vec![T::zero(); m * m];
    for r in 0..n {
        let row = &a[r * m..(r + 1) * m];
        for i in 0..m {
            let ri = row[i];
            if ri == T::zero() {
                continue;
            }
            let gi = &mut g[i * m..(i + 1) * m];
            for j in i..m {
                gi[j] += ri * row[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            g[i * m + j] = g[j * m + i];
        }
    }
    g
}

/// Orthonormalizes the rows of an `n × n` matrix by modified Gram–Schmidt.
pub fn orthonormalize_rows<T: Scalar>(a: &mut [T], n: usize) {
    for i in 0..n {
        for j in 0..i {
            let (head, tail) = a.split_at_mut(i * n);
            let rj = &head[j * n..(j + 1) * n];
            let ri = &mut tail[..n];
            let p = crate::scalar::dot(ri, rj);
            for (x, &y) in ri.iter_mut().zip(rj) {
                *x -= p * y;
            }
        }
        let ri = &mut a[i * n..(i + 1) * n];
        let norm = crate::scalar::dot(ri, ri).sqrt();
        ri.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Random orthogonal `n × n` matrix: Gram–Schmidt on a Gaussian draw.
pub fn random_orthogonal<T: Scalar, R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    let mut a: Vec<T> = (0..n * n).map(|_| T::lit(crate::rng::gaussian(rng))).collect();
    orthonormalize_rows(&mut a, n);
    a
}

/// `max |AᵀA − I|`.
pub fn orthogonality_defect<T: Scalar>(a: &[T], n: usize) -> f64 {
    let g = gram(a, n, n);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[i * n + j].as_f64() - target).abs());
        }
    }
    worst
}
