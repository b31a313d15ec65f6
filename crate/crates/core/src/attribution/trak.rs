use serde::{Deserialize, Serialize};

use super::projection::{Projection, ProjectionSpec};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{gram, spd_inverse};
use crate::nn::{per_example_grads, Model};
use crate::scalar::{dot, Scalar};
use crate::tensor::Tensor;

/// Relative ridge: `λ = RIDGE_SCALE · trace(ΦᵀΦ) / m`.
pub const RIDGE_SCALE: f64 = 1e-8;

/// Training-set features of one ensemble member.
#[derive(Debug, Clone)]
pub struct FeaturizedModel<T> {
    pub member: usize,
    /// `n_train × m` projected margin gradients.
    pub phi: Tensor<T>,
    /// `1 − p(assigned label)` per training example.
    pub q: Vec<T>,
    /// `+1` for label 1, `−1` for label 0: the sign that turns the logit into
    /// the margin of the assigned label.
    pub label_sign: Vec<T>,
    /// `(ΦᵀΦ + λI)⁻¹`, row-major `m × m`.
    pub kernel_inv: Vec<T>,
    pub ridge: T,
    pub projection: Projection<T>,
}

fn label_sign<T: Scalar>(label: usize) -> T {
    if label == 1 {
        T::one()
    } else {
        -T::one()
    }
}

fn check_labels(n: usize, labels: &[usize]) -> Result<()> {
    check_dim("attribution labels", 0, n, labels.len())?;
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidConfig("attribution labels must be 0 or 1".into()));
    }
    Ok(())
}

/// Projected margin gradients `Pᵀ∇θ margin(x)` for each row of `examples`.
pub fn projected_gradients<T: Scalar, M: Model<T> + ?Sized>(
    model: &M,
    examples: &Tensor<T>,
    projection: &Projection<T>,
) -> Result<Tensor<T>> {
    check_dim("projection", 0, projection.n_params(), model.n_params())?;
    let grads = per_example_grads(model, examples)?;
    let m = projection.dim();
    let mut data = Vec::with_capacity(grads.rows() * m);
    for g in grads.iter_rows() {
        data.extend(projection.apply(g));
    }
    Tensor::new(vec![grads.rows(), m], data)
}

/// Featurizes the training set for ensemble member `member`.
pub fn featurize_model<T: Scalar, M: Model<T> + ?Sized>(
    member: usize,
    model: &M,
    x_train: &Tensor<T>,
    labels: &[usize],
    spec: &ProjectionSpec,
) -> Result<FeaturizedModel<T>> {
    let n = x_train.rows();
    check_labels(n, labels)?;
    let projection = Projection::build(spec, member, model.n_params())?;
    let phi = projected_gradients(model, x_train, &projection)?;
    let q: Vec<T> = (0..n)
        .map(|r| {
            let p1 = model.outputs_one(x_train.row(r))[0].sigmoid();
            if labels[r] == 1 {
                T::one() - p1
            } else {
                p1
            }
        })
        .collect();
    let m = projection.dim();
    let mut k = gram(phi.data(), n, m);
    let trace: T = (0..m).map(|i| k[i * m + i]).sum();
    let ridge = T::lit(RIDGE_SCALE) * trace / T::of_usize(m);
    for i in 0..m {
        k[i * m + i] += ridge;
    }
    let kernel_inv = spd_inverse(&k, m).ok_or(Error::SingularKernel { member })?;
    if phi.data().iter().chain(&q).chain(&kernel_inv).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("featurization of member {member}")));
    }
    Ok(FeaturizedModel {
        member,
        phi,
        q,
        label_sign: labels.iter().map(|&l| label_sign(l)).collect(),
        kernel_inv,
        ridge,
        projection,
    })
}

/// Member scores, `n_val × n_train`:
/// `score(v, t) = s_v φ(x_v)ᵀ (ΦᵀΦ + λI)⁻¹ Φ[t] q[t] s_t`, where `s` is the
/// assigned-label sign so both gradients are taken of the label's margin.
pub fn score_model<T: Scalar, M: Model<T> + ?Sized>(
    fm: &FeaturizedModel<T>,
    model: &M,
    x_val: &Tensor<T>,
    val_labels: &[usize],
    spec: &ProjectionSpec,
) -> Result<Tensor<T>> {
    if spec != &fm.projection.spec {
        return Err(Error::ProjectionMismatch {
            expected: fm.projection.spec.seed,
            got: spec.seed,
        });
    }
    check_labels(x_val.rows(), val_labels)?;
    let phi_val = projected_gradients(model, x_val, &fm.projection)?;
    Ok(score_features(fm, &phi_val, val_labels))
}

/// Scores precomputed validation features against a featurized member.
pub fn score_features<T: Scalar>(fm: &FeaturizedModel<T>, phi_val: &Tensor<T>, val_labels: &[usize]) -> Tensor<T> {
    let m = fm.projection.dim();
    let n_tr = fm.phi.rows();
    // weighted[t] = K⁻¹ Φ[t] · q[t] · s[t]
    let mut weighted = vec![T::zero(); n_tr * m];
    for t in 0..n_tr {
        let phi_t = fm.phi.row(t);
        let c = fm.q[t] * fm.label_sign[t];
        let row = &mut weighted[t * m..(t + 1) * m];
        for (i, r) in row.iter_mut().enumerate() {
            *r = dot(&fm.kernel_inv[i * m..(i + 1) * m], phi_t) * c;
        }
    }
    let n_val = phi_val.rows();
    let mut scores = vec![T::zero(); n_val * n_tr];
    for v in 0..n_val {
        let s_v = label_sign::<T>(val_labels[v]);
        let fv = phi_val.row(v);
        for t in 0..n_tr {
            scores[v * n_tr + t] = s_v * dot(fv, &weighted[t * m..(t + 1) * m]);
        }
    }
    Tensor::new(vec![n_val, n_tr], scores).expect("score shape")
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub concept: String,
    pub tap: String,
    pub members: usize,
    pub seeds: Vec<u64>,
}

/// Ensemble-aggregated attribution scores, `|X_val| × |X_train|`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionMatrix<T> {
    pub scores: Tensor<T>,
    pub members: usize,
    pub val_ids: Vec<u64>,
    pub train_ids: Vec<u64>,
    pub provenance: Provenance,
}

/// Validation-averaged attribution per training example.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptAttribution<T> {
    pub ids: Vec<u64>,
    pub tau_c: Vec<T>,
    pub provenance: Provenance,
}

/// Elementwise mean of the member score matrices.
pub fn aggregate_ensemble<T: Scalar>(
    member_scores: &[Tensor<T>],
    val_ids: Vec<u64>,
    train_ids: Vec<u64>,
    provenance: Provenance,
) -> Result<AttributionMatrix<T>> {
    let first = member_scores.first().ok_or(Error::Empty("ensemble has no members"))?;
    check_dim("attribution validation axis", 0, val_ids.len(), first.rows())?;
    check_dim("attribution training axis", 1, train_ids.len(), first.row_len())?;
    let mut sum = vec![T::zero(); first.len()];
    for s in member_scores {
        check_dim("member scores", 0, first.rows(), s.rows())?;
        check_dim("member scores", 1, first.row_len(), s.row_len())?;
        for (a, &b) in sum.iter_mut().zip(s.data()) {
            *a += b;
        }
    }
    let inv = T::one() / T::of_usize(member_scores.len());
    sum.iter_mut().for_each(|v| *v *= inv);
    Ok(AttributionMatrix {
        scores: Tensor::new(first.shape().to_vec(), sum)?,
        members: member_scores.len(),
        val_ids,
        train_ids,
        provenance,
    })
}

/// `τ_c[t]` = mean over validation rows of `scores[·, t]`.
pub fn expected_attribution<T: Scalar>(am: &AttributionMatrix<T>) -> Result<ConceptAttribution<T>> {
    let n_val = am.scores.rows();
    let n_tr = am.scores.row_len();
    if n_val == 0 || am.scores.is_empty() {
        return Err(Error::Empty("attribution matrix"));
    }
    let mut tau = vec![T::zero(); n_tr];
    for row in am.scores.iter_rows() {
        for (t, &v) in tau.iter_mut().zip(row) {
            *t += v;
        }
    }
    let inv = T::one() / T::of_usize(n_val);
    tau.iter_mut().for_each(|v| *v *= inv);
    Ok(ConceptAttribution {
        ids: am.train_ids.clone(),
        tau_c: tau,
        provenance: am.provenance.clone(),
    })
}
