use std::collections::BTreeMap;
use std::path::Path;

use cattr_core::datagen::TextureKind;
use cattr_harness::cli::main_with;
use cattr_harness::config::{ConceptSpec, ExperimentConfig, RemovalSize};
use cattr_harness::csv::parse;
use cattr_harness::stages::{self, Context, BUNDLE_DIR};
use cattr_harness::HarnessError;

fn tiny() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.base.n_classes = 4;
    cfg.base.per_class_count = 20;
    cfg.base.image_size = 16;
    cfg.network.channels = vec![2, 4];
    cfg.network.epochs = 2;
    cfg.members = 2;
    cfg.taps = vec!["layer1".into(), "layer2".into(), "logits".into()];
    cfg.concepts = vec![
        ConceptSpec::Texture { texture: TextureKind::Stripes },
        ConceptSpec::Highlow,
        ConceptSpec::Relative,
    ];
    cfg.frequency_count = 40;
    cfg.probe.epochs = Some(3);
    cfg.probe.sparsity = vec![1, 4];
    cfg.attribution.projection_dim = Some(16);
    cfg.leaveout.tap = "layer2".into();
    cfg.leaveout.removals = vec![RemovalSize::Count(3), RemovalSize::Fraction(0.05)];
    cfg.oracle.members = 3;
    cfg
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    parse(&read(path))
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn go(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                go(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    go(dir, dir, &mut out);
    out
}

fn run_all(ctx: &Context) {
    stages::gen_data(ctx).unwrap();
    stages::train_ensemble(ctx).unwrap();
    stages::probe_sweep(ctx).unwrap();
    stages::sparsity_sweep(ctx).unwrap();
    stages::attribute(ctx).unwrap();
    stages::leaveout(ctx).unwrap();
}

#[test]
fn defaults_validate_and_round_trip() {
    let cfg = ExperimentConfig::default();
    cfg.validate().unwrap();
    assert_eq!(cfg.members, 20);
    assert_eq!(cfg.probe.sparsity, vec![1, 4, 16, 64]);
    assert_eq!(cfg.removal_counts(), vec![0, 9, 45, 90]);
    let back: ExperimentConfig = serde_json::from_str(&cfg.to_json()).unwrap();
    assert_eq!(back, cfg);
    let mut moved = cfg.clone();
    moved.out = Some("elsewhere".into());
    assert_eq!(moved.hash(), cfg.hash());
    let partial: ExperimentConfig = serde_json::from_str(r#"{"members": 5, "leaveout": {"removals": [3, 0.5]}}"#).unwrap();
    assert_eq!(partial.members, 5);
    assert_eq!(partial.leaveout.removals, vec![RemovalSize::Count(3), RemovalSize::Fraction(0.5)]);
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"membrs": 5}"#).is_err());
    type Mutate = Box<dyn Fn(&mut ExperimentConfig)>;
    let cases: Vec<(&str, Mutate)> = vec![
        ("removal", Box::new(|c| c.leaveout.removals = vec![RemovalSize::Count(900)])),
        ("fraction", Box::new(|c| c.leaveout.removals = vec![RemovalSize::Fraction(1.5)])),
        ("tap", Box::new(|c| c.taps.push("layer9".into()))),
        ("attributed tap", Box::new(|c| c.attribution.taps = vec!["layer1".into()])),
        ("concept", Box::new(|c| c.attribution.concept = "texture-plaid".into())),
        ("members", Box::new(|c| c.members = 0)),
        ("sparsity", Box::new(|c| c.probe.sparsity = vec![0])),
        ("duplicate", Box::new(|c| c.concepts.push(ConceptSpec::Highlow))),
        ("lr", Box::new(|c| c.network.learning_rate = -1.0)),
    ];
    for (what, mutate) in cases {
        let mut cfg = ExperimentConfig::default();
        mutate(&mut cfg);
        let err = cfg.validate().expect_err(what);
        assert_eq!(err.exit_code(), 1, "{what}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    assert_eq!(main_with(["cattr", "--help"]), 0);
    assert_eq!(main_with(["cattr", "frobnicate"]), 1);
    assert_eq!(main_with(["cattr", "gen-data", "--threads", "many"]), 1);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"members": 0}"#).unwrap();
    assert_eq!(main_with(["cattr", "--config", bad.to_str().unwrap(), "--out", out, "gen-data"]), 1);
    std::fs::write(&bad, "{not json").unwrap();
    assert_eq!(main_with(["cattr", "--config", bad.to_str().unwrap(), "--out", out, "gen-data"]), 1);

    let good = dir.path().join("tiny.json");
    std::fs::write(&good, tiny().to_json()).unwrap();
    let good = good.to_str().unwrap();
    // Stage inputs missing: rejected before any work.
    assert_eq!(main_with(["cattr", "--config", good, "--out", out, "train-ensemble"]), 1);
    assert_eq!(main_with(["cattr", "--config", good, "--out", out, "gen-data"]), 0);
    // The directory now belongs to this configuration.
    assert_eq!(main_with(["cattr", "--config", good, "--out", out, "--seed", "7", "gen-data"]), 1);
    // Config is picked up from the run directory.
    assert_eq!(main_with(["cattr", "--out", out, "report"]), 0);
    let index: serde_json::Value =
        serde_json::from_str(&read(&Path::new(out).join(BUNDLE_DIR).join("index.json"))).unwrap();
    assert_eq!(index["complete"], false);
}

#[test]
fn diverging_member_is_reported_with_its_id() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny();
    cfg.network.learning_rate = 1e200;
    let ctx = Context::new(cfg, dir.path(), 1).unwrap();
    stages::gen_data(&ctx).unwrap();
    let err = stages::train_ensemble(&ctx).unwrap_err();
    assert!(matches!(err, HarnessError::Member { .. }), "{err}");
    assert!(err.to_string().starts_with("member "), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn end_to_end_reports_and_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let ctx = Context::new(cfg.clone(), dir.path(), 2).unwrap();

    // A partial run yields an incomplete bundle naming the missing stages.
    stages::gen_data(&ctx).unwrap();
    let partial = stages::emit_reports(&ctx).unwrap();
    assert!(!partial.complete);
    assert_eq!(partial.missing_stages.len(), 5);
    assert_eq!(partial.missing_stages[0], "train-ensemble");

    run_all(&ctx);
    let run = dir.path();
    let m = cfg.members;

    let (h, sweep) = rows(&run.join("reports/layer_sweep.csv"));
    assert_eq!(sweep.len(), cfg.concepts.len() * cfg.taps.len());
    assert!(sweep.iter().all(|r| r[col(&h, "members")] == m.to_string()));
    let (mh, members) = rows(&run.join("reports/layer_sweep_members.csv"));
    assert_eq!(members.len(), sweep.len() * m);
    for r in &sweep {
        let vals: Vec<f64> = members
            .iter()
            .filter(|x| x[0] == r[0] && x[1] == r[1])
            .map(|x| x[col(&mh, "val_accuracy")].parse().unwrap())
            .collect();
        let mean: f64 = r[col(&h, "mean")].parse().unwrap();
        assert_eq!(mean, cattr_core::stats::mean(&vals));
    }

    let (sh, sparse) = rows(&run.join("reports/sparsity_sweep.csv"));
    assert_eq!(sparse.len(), cfg.concepts.len() * cfg.taps.len() * (cfg.probe.sparsity.len() + 1));
    for r in &sparse {
        let (d, ke) = (&r[col(&sh, "dim")], &r[col(&sh, "k_effective")]);
        if d == ke {
            assert_eq!(r[col(&sh, "equals_dense")], "true", "{r:?}");
            assert_eq!(r[col(&sh, "mean")], r[col(&sh, "dense_mean")]);
        }
        assert_eq!(r.len(), sh.len());
    }

    let (ih, index) = rows(&run.join("reports/attribution_index.csv"));
    let taps = cfg.attribution_taps();
    let main = index.iter().filter(|r| r[col(&ih, "set")] != "top10").count();
    assert_eq!(main, taps.len() * 6);
    assert_eq!(index.len(), taps.len() * 16);
    for r in &index {
        assert!(run.join(&r[col(&ih, "file")]).exists());
    }
    for tap in &taps {
        let (_, sorted) = rows(&run.join(format!("reports/tau_texture-stripes_{tap}.csv")));
        assert_eq!(sorted.len(), cfg.n_train());
        let taus: Vec<f64> = sorted.iter().map(|r| r[5].parse().unwrap()).collect();
        assert!(taus.windows(2).all(|w| w[0] >= w[1]));
    }

    // T = 0 reproduces the baseline numbers exactly.
    let (lh, leave) = rows(&run.join("reports/leaveout.csv"));
    let t0 = leave
        .iter()
        .find(|r| r[col(&lh, "T")] == "0" && r[col(&lh, "probe")] == "dense")
        .unwrap();
    let base = sweep
        .iter()
        .find(|r| r[0] == "texture-stripes" && r[1] == cfg.leaveout.tap)
        .unwrap();
    assert_eq!(t0[col(&lh, "mean")], base[col(&h, "mean")]);
    assert_eq!(leave.len(), cfg.removal_counts().len() * (1 + cfg.probe.sparsity.len()));
    let ts: Vec<&str> = leave.iter().map(|r| r[0].as_str()).collect();
    assert!(ts.contains(&"3") && ts.contains(&"4"));

    // Bundle: complete, every file indexed with its digest, idempotent.
    let idx = stages::emit_reports(&ctx).unwrap();
    assert!(idx.complete, "{:?}", idx.missing_stages);
    let bundle = run.join(BUNDLE_DIR);
    for f in &idx.files {
        let bytes = std::fs::read(bundle.join(&f.path)).unwrap();
        assert_eq!(bytes.len() as u64, f.bytes);
        assert_eq!(cattr_harness::run::file_digest(&bundle.join(&f.path)).unwrap(), f.sha256);
    }
    assert!(idx.files.iter().any(|f| f.path == "manifest.json"));
    assert!(idx.files.iter().any(|f| f.path.ends_with(".pgm")));
    assert!(idx.files.iter().any(|f| f.path.ends_with(".svg")));
    let first = snapshot(&bundle);
    stages::emit_reports(&ctx).unwrap();
    assert_eq!(first, snapshot(&bundle));

    // Re-running a deterministic stage reproduces its artifact digests.
    let manifest = cattr_harness::run::load_manifest(&ctx.run).unwrap();
    let before = manifest.stages["attribute"].artifacts.clone();
    assert!(!before.is_empty());
    stages::attribute(&ctx).unwrap();
    let after = cattr_harness::run::load_manifest(&ctx.run).unwrap().stages["attribute"]
        .artifacts
        .clone();
    assert_eq!(before, after);
}

#[test]
fn csv_reports_do_not_depend_on_thread_count() {
    let reports = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let ctx = Context::new(tiny(), dir.path(), threads).unwrap();
        run_all(&ctx);
        stages::oracle_check(&ctx).unwrap();
        snapshot(&dir.path().join("reports"))
            .into_iter()
            .filter(|(k, _)| k.ends_with(".csv"))
            .collect::<BTreeMap<_, _>>()
    };
    let a = reports(1);
    let b = reports(3);
    assert!(a.len() >= 10);
    assert_eq!(a, b);
}
