use std::collections::BTreeMap;

use rayon::prelude::*;

use cattr_core::probes::{encode_probe, load_probe, probe_accuracy, train_probe, train_sparse_probe};
use cattr_core::stats::{mean, std_dev};
use cattr_core::{ConceptDataset, Network, Probe};

use super::{concept_acts, member_columns, Context, BAND_MEMBERS};
use crate::config::ConceptSpec;
use crate::csv::{float, Csv};
use crate::error::{HarnessError, Result};
use crate::run::StageLog;
use crate::svg::{Chart, Series};

/// Slack below which a decrease of the class-linked concept with depth is
/// still read as "non-decreasing".
pub const TREND_SLACK: f64 = 0.02;

pub(crate) struct ConceptData {
    pub spec: ConceptSpec,
    pub train: ConceptDataset,
    pub val: ConceptDataset,
    pub train_digest: String,
    pub val_digest: String,
}

pub(crate) fn load_concepts(ctx: &Context) -> Result<Vec<ConceptData>> {
    ctx.cfg
        .concepts
        .iter()
        .map(|spec| {
            let (train, val) = ctx.load_concept(&spec.name())?;
            Ok(ConceptData {
                spec: *spec,
                train_digest: train.content_digest(),
                val_digest: val.content_digest(),
                train,
                val,
            })
        })
        .collect()
}

/// One `(concept, tap, member)` unit of work.
#[derive(Debug, Clone, Copy)]
struct Task {
    concept: usize,
    tap: usize,
    member: usize,
}

fn tasks(ctx: &Context, n_concepts: usize) -> Vec<Task> {
    let mut out = Vec::new();
    for concept in 0..n_concepts {
        for tap in 0..ctx.cfg.taps.len() {
            for member in 0..ctx.cfg.members {
                out.push(Task { concept, tap, member });
            }
        }
    }
    out
}

pub(crate) struct Fitted {
    pub train_acc: f64,
    pub val_acc: f64,
    pub probe: Probe,
}

/// Trains one probe for `(concept, tap, member)` (dense when `k` is `None`) and scores it.
pub(crate) fn fit_probe(
    ctx: &Context,
    c: &ConceptData,
    net: &Network,
    tap: &str,
    member: usize,
    k: Option<usize>,
) -> cattr_core::Result<Fitted> {
    let cache = ctx.cache();
    let xa = concept_acts(&cache, net, &c.train, &c.train_digest, tap)?;
    let xb = concept_acts(&cache, net, &c.val, &c.val_digest, tap)?;
    let cfg = ctx.cfg.probe_config(member, &c.spec, tap);
    let probe = match k {
        None => train_probe(&xa, &c.train.labels, tap, &cfg)?,
        Some(k) => train_sparse_probe(&xa, &c.train.labels, tap, &cfg, k)?,
    };
    Ok(Fitted {
        train_acc: probe_accuracy(&probe, &xa, &c.train.labels)?,
        val_acc: probe_accuracy(&probe, &xb, &c.val.labels)?,
        probe,
    })
}

pub fn probe_sweep(ctx: &Context) -> Result<()> {
    let mut log = StageLog::start(&ctx.run, "probe-sweep");
    let nets = ctx.load_members()?;
    let concepts = load_concepts(ctx)?;
    let taps = &ctx.cfg.taps;
    let work = tasks(ctx, concepts.len());
    let fitted = ctx.install(|| {
        work.par_iter()
            .map(|t| {
                let c = &concepts[t.concept];
                let tap = &taps[t.tap];
                let f = fit_probe(ctx, c, &nets[t.member], tap, t.member, None).map_err(HarnessError::member(t.member))?;
                let path = ctx.run.probe(&c.spec.name(), tap, t.member, None);
                ctx.run.write(&path, &encode_probe(&f.probe)?)?;
                Ok((f, path))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let m = ctx.cfg.members;
    let band = m.min(BAND_MEMBERS);
    let mut members_csv = Csv::new(&["concept", "tap", "member", "seed", "dim", "train_accuracy", "val_accuracy"]);
    let mut sweep = Csv::new(&["concept", "tap", "dim", "members", "mean", "std", "band_members", "band_std"]);
    let mut trends = Csv::new(&[
        "concept",
        "best_tap",
        "best_mean",
        "shallowest_mean",
        "deepest_mean",
        "non_decreasing",
    ]);
    let mut series = Vec::new();
    for (ci, c) in concepts.iter().enumerate() {
        let name = c.spec.name();
        let mut means = Vec::new();
        let mut bands = Vec::new();
        for (ti, tap) in taps.iter().enumerate() {
            let accs: Vec<f64> = (0..m)
                .map(|j| fitted[(ci * taps.len() + ti) * m + j].0.val_acc)
                .collect();
            let dim = fitted[(ci * taps.len() + ti) * m].0.probe.dim();
            for (j, acc) in accs.iter().enumerate() {
                let f = &fitted[(ci * taps.len() + ti) * m + j].0;
                members_csv.row(vec![
                    name.clone(),
                    tap.clone(),
                    j.to_string(),
                    f.probe.seed().to_string(),
                    dim.to_string(),
                    float(f.train_acc),
                    float(*acc),
                ]);
            }
            let band_std = std_dev(&accs[..band]);
            sweep.row(vec![
                name.clone(),
                tap.clone(),
                dim.to_string(),
                m.to_string(),
                float(mean(&accs)),
                float(std_dev(&accs)),
                band.to_string(),
                float(band_std),
            ]);
            means.push(mean(&accs));
            bands.push(band_std);
        }
        let (best, best_mean) = means
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let non_decreasing = means.windows(2).all(|w| w[1] >= w[0] - TREND_SLACK);
        trends.row(vec![
            name.clone(),
            taps[best].clone(),
            float(best_mean),
            float(means[0]),
            float(*means.last().expect("taps nonempty")),
            non_decreasing.to_string(),
        ]);
        eprintln!("probe-sweep: {name} best at {} ({best_mean:.3})", taps[best]);
        series.push(Series {
            label: name,
            y: means,
            band: Some(bands),
        });
    }
    log.wrote_all(fitted.into_iter().map(|(_, p)| p));
    let chart = Chart {
        title: "Concept probe accuracy by layer".into(),
        x_label: "tap".into(),
        y_label: format!("validation accuracy (band: ±1 std over {band} members)"),
        x_ticks: taps.clone(),
        series,
    };
    for (file, text) in [
        ("layer_sweep.csv", sweep.finish()),
        ("layer_sweep_members.csv", members_csv.finish()),
        ("layer_trends.csv", trends.finish()),
        ("layer_sweep.svg", chart.render()),
    ] {
        let path = ctx.run.report(file);
        ctx.run.write(&path, text.as_bytes())?;
        log.wrote(path);
    }
    log.finish(ctx.threads)
}

/// Nominal sparsity levels: the configured list (sorted, deduplicated).
pub(crate) fn sparsity_levels(ctx: &Context) -> Vec<usize> {
    let mut ks = ctx.cfg.probe.sparsity.clone();
    ks.sort_unstable();
    ks.dedup();
    ks
}

fn same_probe(a: &Probe, b: &Probe) -> bool {
    a.bias.to_bits() == b.bias.to_bits()
        && a.weights.len() == b.weights.len()
        && a.weights.iter().zip(&b.weights).all(|(x, y)| x.to_bits() == y.to_bits())
}

pub fn sparsity_sweep(ctx: &Context) -> Result<()> {
    let mut log = StageLog::start(&ctx.run, "sparsity-sweep");
    let nets = ctx.load_members()?;
    let concepts = load_concepts(ctx)?;
    let taps = &ctx.cfg.taps;
    let levels = sparsity_levels(ctx);
    let work = tasks(ctx, concepts.len());
    let spec = ctx.cfg.network_spec();

    // Per task: dense accuracy, then one result per effective k (the
    // configured levels clamped to d, plus d itself).
    type TaskOut = (f64, BTreeMap<usize, (f64, bool)>, Vec<std::path::PathBuf>);
    let out: Vec<TaskOut> = ctx.install(|| {
        work.par_iter()
            .map(|t| {
                let c = &concepts[t.concept];
                let tap = &taps[t.tap];
                let name = c.spec.name();
                let dense_path = ctx.run.require(ctx.run.probe(&name, tap, t.member, None), "probe-sweep")?;
                let dense = load_probe::<f64>(&dense_path)?;
                let d = spec.tap_dim(tap)?;
                let mut ks: Vec<usize> = levels.iter().map(|&k| k.min(d)).collect();
                ks.push(d);
                ks.dedup();
                let mut res = BTreeMap::new();
                let mut paths = Vec::new();
                let mut dense_acc = None;
                for k in ks {
                    if res.contains_key(&k) {
                        continue;
                    }
                    let f = fit_probe(ctx, c, &nets[t.member], tap, t.member, Some(k))
                        .map_err(HarnessError::member(t.member))?;
                    if dense_acc.is_none() {
                        let cache = ctx.cache();
                        let xb = concept_acts(&cache, &nets[t.member], &c.val, &c.val_digest, tap)?;
                        dense_acc = Some(probe_accuracy(&dense, &xb, &c.val.labels)?);
                    }
                    let path = ctx.run.probe(&name, tap, t.member, Some(k));
                    ctx.run.write(&path, &encode_probe(&f.probe)?)?;
                    paths.push(path);
                    res.insert(k, (f.val_acc, same_probe(&f.probe, &dense)));
                }
                Ok((dense_acc.expect("at least one level"), res, paths))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let m = ctx.cfg.members;
    let mut header: Vec<String> = [
        "concept",
        "tap",
        "dim",
        "k",
        "k_effective",
        "members",
        "mean",
        "std",
        "dense_mean",
        "equals_dense",
        "flag",
    ]
    .map(String::from)
    .to_vec();
    header.extend(member_columns(m));
    let mut csv = Csv::new(&header);
    let mut charts = Vec::new();
    for (ci, c) in concepts.iter().enumerate() {
        let name = c.spec.name();
        let mut series = Vec::new();
        for (ti, tap) in taps.iter().enumerate() {
            let d = spec.tap_dim(tap)?;
            let rows = &out[(ci * taps.len() + ti) * m..(ci * taps.len() + ti + 1) * m];
            let dense: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let dense_mean = mean(&dense);
            let mut nominal: Vec<usize> = levels.clone();
            nominal.push(d);
            let (mut ys, mut bands) = (Vec::new(), Vec::new());
            for (li, &k) in nominal.iter().enumerate() {
                let ke = k.min(d);
                let accs: Vec<f64> = rows.iter().map(|r| r.1[&ke].0).collect();
                let equal = rows.iter().all(|r| r.1[&ke].1);
                let mu = mean(&accs);
                let flag = if li == 0 && mu > dense_mean {
                    "endpoint-above-dense"
                } else {
                    ""
                };
                let mut row = vec![
                    name.clone(),
                    tap.clone(),
                    d.to_string(),
                    k.to_string(),
                    ke.to_string(),
                    m.to_string(),
                    float(mu),
                    float(std_dev(&accs)),
                    float(dense_mean),
                    if ke == d { equal.to_string() } else { "-".into() },
                    flag.into(),
                ];
                row.extend(accs.iter().map(|&a| float(a)));
                csv.row(row);
                ys.push(mu);
                bands.push(std_dev(&accs));
            }
            series.push(Series {
                label: tap.clone(),
                y: ys,
                band: Some(bands),
            });
        }
        let mut ticks: Vec<String> = levels.iter().map(|k| k.to_string()).collect();
        ticks.push("d".into());
        charts.push((
            format!("sparsity_sweep_{name}.svg"),
            Chart {
                title: format!("{name}: probe accuracy vs. sparsity"),
                x_label: "k (nonzero weights; d = dense width)".into(),
                y_label: "validation accuracy".into(),
                x_ticks: ticks,
                series,
            }
            .render(),
        ));
    }
    log.wrote_all(out.into_iter().flat_map(|o| o.2));
    let path = ctx.run.report("sparsity_sweep.csv");
    ctx.run.write(&path, csv.finish().as_bytes())?;
    log.wrote(path);
    for (file, text) in charts {
        let path = ctx.run.report(&file);
        ctx.run.write(&path, text.as_bytes())?;
        log.wrote(path);
    }
    eprintln!("sparsity-sweep: {} probes per member", levels.len() + 1);
    log.finish(ctx.threads)
}
