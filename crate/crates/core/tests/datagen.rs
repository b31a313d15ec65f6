use cattr_core::attribution::{ConceptAttribution, Provenance};
use cattr_core::datagen::*;
use proptest::prelude::*;

fn small_base() -> (ImageDataset<f64>, ImageDataset<f64>) {
    generate_base_dataset(&BaseConfig::default()).unwrap()
}

fn ranking(ids: Vec<u64>, tau_c: Vec<f64>) -> ConceptAttribution<f64> {
    ConceptAttribution {
        ids,
        tau_c,
        provenance: Provenance::default(),
    }
}

#[test]
fn base_dataset_counts_and_range() {
    let (tr, va) = small_base();
    assert_eq!((tr.len(), va.len()), (900, 100));
    assert!(tr.class_counts().iter().all(|&c| c == 90));
    assert!(va.class_counts().iter().all(|&c| c == 10));
    assert_eq!(tr.images.shape(), &[900, 1, 32, 32]);
    assert!(tr.images.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(tr.metadata.as_ref().unwrap().len() == 900);
}

#[test]
fn base_dataset_is_deterministic_per_seed() {
    let cfg = BaseConfig { per_class_count: 20, ..BaseConfig::default() };
    let a = encode_image_dataset(&generate_base_dataset::<f64>(&cfg).unwrap().0).unwrap();
    let b = encode_image_dataset(&generate_base_dataset::<f64>(&cfg).unwrap().0).unwrap();
    assert_eq!(a, b);
    let other = BaseConfig { seed: 1, ..cfg };
    let c = encode_image_dataset(&generate_base_dataset::<f64>(&other).unwrap().0).unwrap();
    assert_ne!(a, c);
}

#[test]
fn texture_concept_counts_and_leak_freedom() {
    let (tr, va) = small_base();
    let (ct, cv) = build_texture_concept(&tr, &va, TextureKind::Stripes, 0).unwrap();
    assert_eq!((ct.positives(), ct.len()), (270, 540));
    assert_eq!((cv.positives(), cv.len()), (30, 60));
    let train_ids: std::collections::HashSet<_> = ct.source_ids.iter().collect();
    assert!(cv.source_ids.iter().all(|id| !train_ids.contains(id)));
    // Positives are exactly the stripes classes.
    for (i, &l) in ct.labels.iter().enumerate() {
        let texture = ct.metadata.as_ref().unwrap()[i].texture().unwrap();
        assert_eq!(l == 1, texture == TextureKind::Stripes);
    }
    let again = build_texture_concept(&tr, &va, TextureKind::Stripes, 0).unwrap().0;
    assert_eq!(again.source_ids, ct.source_ids);
}

#[test]
fn texture_spanning_every_class_is_rejected() {
    // Restricting the base set to flat-textured classes makes the texture
    // span every remaining class.
    let (tr, va) = small_base();
    let flat_only = |ds: &ImageDataset<f64>| {
        let idx: Vec<usize> = (0..ds.len())
            .filter(|&i| ds.metadata.as_ref().unwrap()[i].texture() == Some(TextureKind::Flat))
            .collect();
        ds.select(&idx)
    };
    let err = build_texture_concept(&flat_only(&tr), &flat_only(&va), TextureKind::Flat, 0).unwrap_err();
    assert!(err.to_string().contains("non-concept"), "{err}");
}

fn side_laplacians(img: &[f64], size: usize, meta: &GeneratorMeta) -> (f64, f64) {
    let GeneratorMeta::HighLow { boundary: Some(b), high_side_positive, .. } = meta else {
        panic!("positive without boundary")
    };
    // Stay two pixels away from the boundary so the stencil sees one side only.
    let on = |want: bool| {
        move |x: usize, y: usize| {
            let s = b.side(x as f64 + 0.5, y as f64 + 0.5);
            s.abs() > 2.0 && (s > 0.0) == want
        }
    };
    let high = mean_abs_laplacian(img, size, on(*high_side_positive)).unwrap();
    let low = mean_abs_laplacian(img, size, on(!*high_side_positive)).unwrap();
    (high, low)
}

#[test]
fn highlow_positives_have_strong_frequency_contrast() {
    let cfg = FrequencyConfig::default();
    let (tr, va) = generate_highlow_concept::<f64>(&cfg).unwrap();
    assert_eq!(tr.len() + va.len(), cfg.count);
    assert_eq!(2 * tr.positives(), tr.len());
    for ds in [&tr, &va] {
        let meta = ds.metadata.as_ref().unwrap();
        for (i, row) in ds.images.iter_rows().enumerate() {
            if ds.labels[i] == 1 {
                assert!(meta[i].boundary().is_some());
                let (high, low) = side_laplacians(row, cfg.image_size, &meta[i]);
                assert!(high >= 5.0 * low, "example {i}: {high} vs {low}");
                assert!(!is_uniform_frequency(row, cfg.image_size), "positive {i} looks uniform");
            } else {
                assert!(meta[i].boundary().is_none());
                assert!(is_uniform_frequency(row, cfg.image_size), "negative {i} not uniform");
            }
        }
    }
}

#[test]
fn boundary_positives_have_a_luminance_step_within_one_band() {
    let cfg = FrequencyConfig::default();
    let (tr, _) = generate_boundary_concept::<f64>(&cfg).unwrap();
    let meta = tr.metadata.as_ref().unwrap();
    let size = cfg.image_size;
    let mut bands = std::collections::HashSet::new();
    for (i, row) in tr.images.iter_rows().enumerate() {
        let GeneratorMeta::Boundary { boundary, band, step } = &meta[i] else { panic!() };
        if tr.labels[i] == 0 {
            assert!(boundary.is_none());
            continue;
        }
        bands.insert(*band);
        assert!(*step >= 0.4);
        let b = boundary.unwrap();
        let mean_side = |want: bool| {
            let v: Vec<f64> = (0..size * size)
                .filter(|&p| {
                    let s = b.side((p % size) as f64 + 0.5, (p / size) as f64 + 0.5);
                    s.abs() > 1.0 && (s > 0.0) == want
                })
                .map(|p| row[p])
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!((mean_side(true) - mean_side(false)).abs() >= 0.4, "example {i}");
        let lap = |want: bool| {
            mean_abs_laplacian(row, size, |x, y| {
                let s = b.side(x as f64 + 0.5, y as f64 + 0.5);
                s.abs() > 2.0 && (s > 0.0) == want
            })
            .unwrap()
        };
        let (a, c) = (lap(true), lap(false));
        assert!(a.max(c) < 3.0 * a.min(c) + 0.05, "example {i}: bands differ {a} vs {c}");
    }
    assert_eq!(bands.len(), 2);
}

#[test]
fn relative_split_is_balanced_with_offset_ids() {
    let cfg = FrequencyConfig { count: 200, ..FrequencyConfig::default() };
    let h = generate_highlow_concept::<f64>(&cfg).unwrap();
    let b = generate_boundary_concept::<f64>(&FrequencyConfig { count: 120, ..cfg }).unwrap();
    let (rt, rv) = relative_split((&h.0, &h.1), (&b.0, &b.1), 0).unwrap();
    assert_eq!(rt.len(), 2 * 54);
    assert_eq!(2 * rt.positives(), rt.len());
    assert_eq!(2 * rv.positives(), rv.len());
    for (i, &id) in rt.source_ids.iter().enumerate() {
        assert_eq!(rt.labels[i] == 0, id >= RELATIVE_ID_OFFSET);
    }
}

#[test]
fn remove_top_t_examples() {
    let (tr, _) = generate_base_dataset::<f64>(&BaseConfig { n_classes: 5, per_class_count: 10, ..BaseConfig::default() })
        .unwrap();
    let ds = tr.select(&[0, 1, 2, 3, 4]);
    let ids = ds.ids.clone();
    let r = ranking(ids.clone(), vec![5.0, 4.0, 4.0, 2.0, 1.0]);
    assert_eq!(remove_top_t(&ds, &r, 0).unwrap(), ds);
    let kept = remove_top_t(&ds, &r, 2).unwrap();
    assert_eq!(kept.ids, ids[2..].to_vec());
    assert!(remove_top_t(&ds, &r, 5).is_err());
    let partial = ranking(ids[..4].to_vec(), vec![1.0; 4]);
    assert!(remove_top_t(&ds, &partial, 1).is_err());
}

proptest! {
    #[test]
    fn removal_sets_are_nested(scores in prop::collection::vec(-3i32..3, 12), t1 in 0usize..12, t2 in 0usize..12) {
        let (tr, _) = generate_base_dataset::<f64>(&BaseConfig { n_classes: 4, per_class_count: 10, ..BaseConfig::default() }).unwrap();
        let ds = tr.select(&(0..12).collect::<Vec<_>>());
        let r = ranking(ds.ids.clone(), scores.iter().map(|&s| s as f64).collect());
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let a: std::collections::HashSet<u64> = remove_top_t(&ds, &r, lo).unwrap().ids.into_iter().collect();
        let b = remove_top_t(&ds, &r, hi).unwrap();
        prop_assert!(b.ids.iter().all(|id| a.contains(id)));
        prop_assert_eq!(b.len(), 12 - hi);
        // Order preserved.
        let pos: Vec<usize> = b.ids.iter().map(|id| ds.ids.iter().position(|x| x == id).unwrap()).collect();
        prop_assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn dataset_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let (tr, _) = generate_base_dataset::<f64>(&BaseConfig { per_class_count: 10, ..BaseConfig::default() }).unwrap();
    let path = dir.path().join("base.ds");
    save_image_dataset(&tr, &path).unwrap();
    let back: ImageDataset<f64> = load_image_dataset(&path).unwrap();
    assert_eq!(back, tr);
    assert_eq!(encode_image_dataset(&back).unwrap(), std::fs::read(&path).unwrap());

    let bytes = std::fs::read(&path).unwrap();
    let manifest_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    assert_eq!(bytes.len(), 12 + manifest_len + tr.len() * 32 * 32 * 8);

    let mut bad = bytes.clone();
    bad[0] ^= 0xff;
    std::fs::write(&path, &bad).unwrap();
    assert!(load_image_dataset::<f64>(&path).is_err());
    let err = decode_image_dataset::<f64>(&bytes[..bytes.len() - 3]).unwrap_err();
    assert!(err.to_string().contains("offset"), "{err}");

    let (ct, _) = generate_highlow_concept::<f64>(&FrequencyConfig { count: 40, ..FrequencyConfig::default() }).unwrap();
    let cp = dir.path().join("hl.ds");
    save_concept_dataset(&ct, &cp).unwrap();
    assert_eq!(load_concept_dataset::<f64>(&cp).unwrap(), ct);
}

#[test]
fn pgm_export_scales_to_bytes() {
    let img = [0.0, 0.5, 1.0, 0.25];
    let pgm = to_pgm(&img, 1, 2, 2);
    let header = b"P5\n2 2\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert_eq!(&pgm[header.len()..], &[0, 128, 255, 64]);
}
