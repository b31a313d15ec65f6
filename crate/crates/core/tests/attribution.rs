mod common;

use cattr_core::attribution::*;
use cattr_core::linalg::gram;
use cattr_core::nn::{per_example_grads, BlockSpec, Network, NetworkSpec};
use cattr_core::probes::{train_probe, ComposedModel, ParamSet, Probe, ProbeConfig};
use cattr_core::rng;
use cattr_core::tensor::Tensor;
use common::fixture_values;

fn provenance(members: usize) -> Provenance {
    Provenance {
        concept: "test".into(),
        tap: "t".into(),
        members,
        seeds: (0..members as u64).collect(),
    }
}

fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> AttributionMatrix<f64> {
    aggregate_ensemble(
        &[Tensor::new(vec![rows, cols], data).unwrap()],
        (0..rows as u64).collect(),
        (100..100 + cols as u64).collect(),
        provenance(1),
    )
    .unwrap()
}

/// Gaussian elimination with partial pivoting; independent of the library's
/// Cholesky path.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Vec<f64> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap();
        for k in 0..n {
            a.swap(col * n + k, piv * n + k);
        }
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    x
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn trained_probe(fx: &LogisticFixture<f64>, seed: u64) -> Probe<f64> {
    let cfg = ProbeConfig { learning_rate: 1e-2, ..ProbeConfig::default() }.with_seed(seed);
    train_probe(&fx.acts_train, &fx.labels, "fixture", &cfg).unwrap()
}

#[test]
fn exact_projection_of_probe_gradients_is_activation_plus_one() {
    let fx = logistic_fixture::<f64>(40, 20, 3, 1.0, 0).unwrap();
    let probe = trained_probe(&fx, 0);
    let spec = ProjectionSpec::exact(4);
    let fm = featurize_model(0, &probe, &fx.acts_train, &fx.labels, &spec).unwrap();
    for r in 0..40 {
        assert_eq!(&fm.phi.row(r)[..3], fx.acts_train.row(r));
        assert_eq!(fm.phi.row(r)[3], 1.0);
        let p = sigmoid(probe.logit(fx.acts_train.row(r)));
        let q = if fx.labels[r] == 1 { 1.0 - p } else { p };
        assert!((fm.q[r] - q).abs() < 1e-12);
    }
    let n = 4;
    for i in 0..n {
        for j in 0..n {
            assert!((fm.kernel_inv[i * n + j] - fm.kernel_inv[j * n + i]).abs() <= 1e-8);
        }
    }
    assert!(ProjectionSpec { dim: 3, ..spec.clone() }.validate(4).is_err());
}

#[test]
fn sign_flipped_projection_leaves_the_gram_matrix_unchanged() {
    let g = Tensor::new(vec![10, 30], fixture_values(300, 3)).unwrap();
    let spec = ProjectionSpec::default_for(30, 5);
    for distribution in [ProjectionDistribution::Gaussian, ProjectionDistribution::Sign] {
        let spec = ProjectionSpec { dim: 8, distribution, ..spec.clone() };
        let p = Projection::<f64>::build(&spec, 2, 30).unwrap();
        let flipped = p.negated();
        let a: Vec<f64> = g.iter_rows().flat_map(|r| p.apply(r)).collect();
        let b: Vec<f64> = g.iter_rows().flat_map(|r| flipped.apply(r)).collect();
        assert_ne!(a, b);
        let (ga, gb) = (gram(&a, 10, 8), gram(&b, 10, 8));
        for (x, y) in ga.iter().zip(&gb) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}

#[test]
fn random_projection_preserves_gradient_inner_products() {
    let spec = NetworkSpec {
        input: [1, 12, 12],
        blocks: vec![BlockSpec::conv3(8), BlockSpec::conv3(16)],
        n_classes: 2,
    };
    let net = Network::<f64>::init(spec.clone(), 3).unwrap();
    let d = spec.tap_dim("layer2").unwrap();
    let probe = Probe::new("layer2", fixture_values(d, 4).iter().map(|v| v - 0.5).collect(), 0.0);
    let model = ComposedModel::new(&net, &probe, ParamSet::Full).unwrap();
    let x = Tensor::new(vec![50, 1, 12, 12], fixture_values(50 * 144, 5)).unwrap();
    let exact = per_example_grads(&model, &x).unwrap();
    let p = exact.row_len();
    assert!(p > 1000, "{p} parameters");
    let proj = Projection::<f64>::build(&ProjectionSpec::default_for(p, 11), 0, p).unwrap();
    assert_eq!(proj.dim(), 512);
    let projected: Vec<Vec<f64>> = exact.iter_rows().map(|g| proj.apply(g)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (mut ok, mut total) = (0, 0);
    for i in 0..50 {
        for j in i + 1..50 {
            let truth = dot(exact.row(i), exact.row(j));
            let approx = dot(&projected[i], &projected[j]);
            total += 1;
            if (approx - truth).abs() <= 0.2 * truth.abs() {
                ok += 1;
            }
        }
    }
    let frac = ok as f64 / total as f64;
    assert!(frac >= 0.95, "only {frac} of pairs within 20%");
}

#[test]
fn single_training_point_follows_kernel_algebra() {
    let acts = Tensor::new(vec![2, 2], vec![0.6, -1.2, 1.5, 0.3]).unwrap();
    let probe = Probe::new("t", vec![0.4, -0.7], 0.1);
    let spec = ProjectionSpec::exact(3);
    let train = acts.select_rows(&[0]);
    let fm = featurize_model(0, &probe, &train, &[1], &spec).unwrap();
    let phi_t = [0.6, -1.2, 1.0];
    let norm2: f64 = phi_t.iter().map(|v| v * v).sum();
    let lambda = 1e-8 * norm2 / 3.0;
    assert!((fm.ridge - lambda).abs() < 1e-24);
    let scores = score_model(&fm, &probe, &acts, &[1, 0], &spec).unwrap();
    let q = 1.0 - sigmoid(probe.logit(&[0.6, -1.2]));
    for (v, s_v) in [(0usize, 1.0), (1, -1.0)] {
        let phi_v = [acts.row(v)[0], acts.row(v)[1], 1.0];
        let ip: f64 = phi_v.iter().zip(&phi_t).map(|(a, b)| a * b).sum();
        let expected = s_v * ip * q / (norm2 + lambda);
        let got = scores.row(v)[0];
        // Rank-one kernel plus a 1e-8 relative ridge: condition number ~1e8,
        // so agreement is limited to about eight digits.
        assert!((got - expected).abs() <= 1e-6 * expected.abs(), "{got} vs {expected}");
    }
}

#[test]
fn duplicated_training_points_score_identically() {
    let fx = logistic_fixture::<f64>(40, 20, 3, 1.0, 1).unwrap();
    assert_eq!(fx.acts_train.row(0), fx.acts_train.row(38));
    assert_eq!(fx.labels[0], fx.labels[38]);
    let probe = trained_probe(&fx, 1);
    for spec in [ProjectionSpec::exact(4), ProjectionSpec { dim: 3, ..ProjectionSpec::default_for(4, 2) }] {
        let fm = featurize_model(0, &probe, &fx.acts_train, &fx.labels, &spec).unwrap();
        let scores = score_model(&fm, &probe, &fx.acts_val, &fx.val_labels, &spec).unwrap();
        for row in scores.iter_rows() {
            assert!((row[0] - row[38]).abs() <= 1e-10);
        }
    }
}

#[test]
fn scores_match_a_dense_reimplementation() {
    let fx = logistic_fixture::<f64>(40, 20, 3, 1.0, 2).unwrap();
    let probe = trained_probe(&fx, 2);
    let spec = ProjectionSpec::exact(4);
    let fm = featurize_model(0, &probe, &fx.acts_train, &fx.labels, &spec).unwrap();
    let scores = score_model(&fm, &probe, &fx.acts_val, &fx.val_labels, &spec).unwrap();

    let aug = |r: &[f64]| vec![r[0], r[1], r[2], 1.0];
    let phi: Vec<Vec<f64>> = fx.acts_train.iter_rows().map(aug).collect();
    let mut k = vec![0.0; 16];
    for row in &phi {
        for i in 0..4 {
            for j in 0..4 {
                k[i * 4 + j] += row[i] * row[j];
            }
        }
    }
    let lambda = 1e-8 * (0..4).map(|i| k[i * 4 + i]).sum::<f64>() / 4.0;
    (0..4).for_each(|i| k[i * 4 + i] += lambda);
    let sign = |l: usize| if l == 1 { 1.0 } else { -1.0 };
    for (v, row) in fx.acts_val.iter_rows().enumerate() {
        let phi_v = aug(row);
        let solved = solve_dense(k.clone(), phi_v.clone(), 4);
        for (t, phi_t) in phi.iter().enumerate() {
            let p = sigmoid(probe.logit(fx.acts_train.row(t)));
            let q = if fx.labels[t] == 1 { 1.0 - p } else { p };
            let ip: f64 = solved.iter().zip(phi_t).map(|(a, b)| a * b).sum();
            let expected = sign(fx.val_labels[v]) * sign(fx.labels[t]) * ip * q;
            let got = scores.row(v)[t];
            assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1e-3), "({v},{t}) {got} vs {expected}");
        }
    }
}

#[test]
fn scoring_with_a_different_projection_is_rejected() {
    let fx = logistic_fixture::<f64>(10, 4, 2, 1.0, 3).unwrap();
    let probe = Probe::new("t", vec![0.1, 0.2], 0.0);
    let spec = ProjectionSpec { dim: 2, ..ProjectionSpec::default_for(3, 1) };
    let fm = featurize_model(0, &probe, &fx.acts_train, &fx.labels, &spec).unwrap();
    let other = ProjectionSpec { seed: 2, ..spec.clone() };
    assert!(matches!(
        score_model(&fm, &probe, &fx.acts_val, &fx.val_labels, &other),
        Err(cattr_core::Error::ProjectionMismatch { .. })
    ));
    assert!(featurize_model(0, &probe, &fx.acts_train, &fx.labels[..3], &spec).is_err());
}

#[test]
fn ensemble_aggregation_is_a_plain_mean() {
    let a = Tensor::new(vec![1, 1], vec![2.0]).unwrap();
    let b = Tensor::new(vec![1, 1], vec![4.0]).unwrap();
    let m = aggregate_ensemble(&[a.clone(), b.clone()], vec![0], vec![0], provenance(2)).unwrap();
    assert_eq!(m.scores.data(), &[3.0]);
    assert_eq!(m.members, 2);
    let single = aggregate_ensemble(std::slice::from_ref(&a), vec![0], vec![0], provenance(1)).unwrap();
    assert_eq!(single.scores, a);
    assert!(aggregate_ensemble::<f64>(&[], vec![], vec![], provenance(0)).is_err());

    let members: Vec<Tensor<f64>> = (0..5)
        .map(|j| Tensor::new(vec![3, 4], fixture_values(12, j)).unwrap())
        .collect();
    let forward = aggregate_ensemble(&members, vec![0, 1, 2], vec![0, 1, 2, 3], provenance(5)).unwrap();
    let reversed: Vec<_> = members.iter().rev().cloned().collect();
    let backward = aggregate_ensemble(&reversed, vec![0, 1, 2], vec![0, 1, 2, 3], provenance(5)).unwrap();
    for (x, y) in forward.scores.data().iter().zip(backward.scores.data()) {
        assert!((x - y).abs() <= 1e-15);
    }
    let wrong = Tensor::new(vec![2, 4], vec![0.0; 8]).unwrap();
    assert!(aggregate_ensemble(&[members[0].clone(), wrong], vec![0, 1, 2], vec![0, 1, 2, 3], provenance(2)).is_err());
}

#[test]
fn expected_attribution_examples() {
    let one = matrix(1, 3, vec![1.0, -2.0, 0.5]);
    assert_eq!(expected_attribution(&one).unwrap().tau_c, vec![1.0, -2.0, 0.5]);
    let two = matrix(2, 1, vec![1.0, 3.0]);
    let tc = expected_attribution(&two).unwrap();
    assert_eq!(tc.tau_c, vec![2.0]);
    assert_eq!(tc.ids, vec![100]);
    assert_eq!(tc.provenance, two.provenance);
}

/// Two-pass mean: a naive sum, then the mean of residuals as a correction.
fn two_pass_column_means(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    (0..cols)
        .map(|c| {
            let first = (0..rows).map(|r| data[r * cols + c]).sum::<f64>() / rows as f64;
            let correction = (0..rows).map(|r| data[r * cols + c] - first).sum::<f64>() / rows as f64;
            first + correction
        })
        .collect()
}

#[test]
fn expected_attribution_matches_two_pass_row_mean() {
    let mut r = rng::stream(42, 0, "eq1");
    let data: Vec<f64> = (0..50 * 200).map(|_| rng::gaussian(&mut r) * 10.0).collect();
    let am = matrix(50, 200, data.clone());
    let tc = expected_attribution(&am).unwrap();
    let oracle = two_pass_column_means(&data, 50, 200);
    for (a, b) in tc.tau_c.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn ranking_breaks_ties_by_lower_id() {
    let tc = ConceptAttribution {
        ids: vec![7, 3, 9, 1],
        tau_c: vec![0.0; 4],
        provenance: provenance(1),
    };
    let (top, bottom) = rank_training_points(&tc, 2).unwrap();
    assert_eq!(top, vec![1, 3]);
    assert_eq!(bottom, vec![1, 3]);

    let tc = ConceptAttribution {
        ids: vec![10, 11, 12, 13, 14],
        tau_c: vec![0.5, 2.0, 0.5, -1.0, 2.0],
        provenance: provenance(1),
    };
    let (top, bottom) = rank_training_points(&tc, 5).unwrap();
    assert_eq!(top, vec![11, 14, 10, 12, 13]);
    assert_eq!(bottom, vec![13, 10, 12, 11, 14]);
    assert_eq!(sorted_scores(&tc), vec![2.0, 2.0, 0.5, 0.5, -1.0]);
    assert!(rank_training_points(&tc, 6).is_err());
    for t in 0..5 {
        let small = top_ids(&tc.ids, &tc.tau_c, t);
        let big = top_ids(&tc.ids, &tc.tau_c, t + 1);
        assert_eq!(small[..], big[..t]);
    }
}

#[test]
fn attribution_matrix_file_round_trip() {
    let am = matrix(3, 4, fixture_values(12, 8));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.attr");
    save_attribution(&am, &path).unwrap();
    assert_eq!(load_attribution::<f64>(&path).unwrap(), am);
    let bytes = std::fs::read(&path).unwrap();
    assert!(decode_attribution::<f64>(&bytes[..bytes.len() - 8]).is_err());
}

#[test]
fn removing_an_irrelevant_duplicate_barely_changes_the_oracle() {
    let mut fx = logistic_fixture::<f64>(40, 20, 2, 1.0, 4).unwrap();
    // Replace the duplicated pair with one far on its correct side.
    let far = if fx.labels[0] == 1 { 30.0 } else { -30.0 };
    let mut data = fx.acts_train.data().to_vec();
    for r in [0, 38] {
        data[r * 2] = far;
        data[r * 2 + 1] = 0.0;
    }
    fx.acts_train = Tensor::new(vec![40, 2], data).unwrap();
    let loo = loo_oracle(&fx.acts_train, &fx.labels, &fx.acts_val, &fx.val_labels, &LooConfig::default()).unwrap();
    assert!(loo.flagged.iter().all(|&f| !f));
    for v in 0..20 {
        assert!(loo.delta.row(v)[0].abs() <= 1e-4);
        assert!(loo.delta.row(v)[38].abs() <= 1e-4);
    }
    // Points near the boundary do matter.
    let biggest = loo.delta.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(biggest > 1e-3);
}

/// Root of a strictly increasing function by bisection.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn two_point_oracle_matches_hand_solution() {
    // No intercept; points (x=1, y=1) and (x=0.5, y=0), objective
    // (1/2) Σ ℓ + (λ/2) w². Stationarity conditions solved by bisection.
    let lambda = 0.1;
    let cfg = LooConfig { l2: lambda, fit_bias: false, ..LooConfig::default() };
    let train = Tensor::new(vec![2, 1], vec![1.0, 0.5]).unwrap();
    let labels = [1, 0];
    let val = Tensor::new(vec![1, 1], vec![0.8]).unwrap();
    let full = bisect(|w| 0.5 * (-sigmoid(-w) + 0.5 * sigmoid(0.5 * w)) + lambda * w, -50.0, 50.0);
    let without0 = bisect(|w| 0.5 * 0.5 * sigmoid(0.5 * w) + lambda * w, -50.0, 50.0);
    let without1 = bisect(|w| -0.5 * sigmoid(-w) + lambda * w, -50.0, 50.0);
    let loss = |w: f64| (1.0 + (-0.8 * w).exp()).ln();
    let loo = loo_oracle(&train, &labels, &val, &[1], &cfg).unwrap();
    assert!((loo.full_fit.weights[0] - full).abs() < 1e-10);
    assert_eq!(loo.full_fit.bias, 0.0);
    assert!((loo.delta.row(0)[0] - (loss(without0) - loss(full))).abs() < 1e-10);
    assert!((loo.delta.row(0)[1] - (loss(without1) - loss(full))).abs() < 1e-10);
    assert!(loo.delta.row(0)[0] > 0.0 && loo.delta.row(0)[1] < 0.0);
}

#[test]
fn oracle_rejects_oversized_or_mismatched_inputs() {
    let fx = logistic_fixture::<f64>(202, 4, 1, 1.0, 5).unwrap();
    assert!(loo_oracle(&fx.acts_train, &fx.labels, &fx.acts_val, &fx.val_labels, &LooConfig::default()).is_err());
    let fx = logistic_fixture::<f64>(10, 4, 1, 1.0, 5).unwrap();
    assert!(loo_oracle(&fx.acts_train, &fx.labels[..9], &fx.acts_val, &fx.val_labels, &LooConfig::default()).is_err());
}

#[test]
fn attribution_agrees_with_leave_one_out() {
    let fx = logistic_fixture::<f64>(40, 20, 3, 1.0, 0).unwrap();
    let cfg = ProbeConfig { learning_rate: 1e-2, epochs: 50, ..ProbeConfig::default() };
    let report = oracle_check(&fx, 10, &cfg, &LooConfig::default()).unwrap();
    assert_eq!(report.flagged, 0);
    assert!((report.tau_c[0] - report.tau_c[38]).abs() <= 1e-10);
    assert!(report.spearman >= 0.4, "spearman {}", report.spearman);
}
