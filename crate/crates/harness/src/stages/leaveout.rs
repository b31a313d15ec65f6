use rayon::prelude::*;

use cattr_core::attribution::{expected_attribution, load_attribution};
use cattr_core::datagen::remove_top_t;
use cattr_core::nn::evaluate_accuracy;
use cattr_core::stats::{mean, std_dev};
use cattr_core::Network;

use super::ensemble::train_members;
use super::sweeps::{fit_probe, load_concepts, sparsity_levels};
use super::{member_columns, Context};
use crate::csv::{float, Csv};
use crate::error::{HarnessError, Result};
use crate::run::StageLog;
use crate::svg::{Chart, Series};

/// For each removal size `T`: drop the `T` highest-τ_c training images,
/// retrain the ensemble with the baseline seeds, and retrain dense and
/// sparse probes on the unchanged concept splits. `T = 0` uses the baseline
/// checkpoints, which the deterministic trainer would reproduce anyway.
pub fn leaveout(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut log = StageLog::start(&ctx.run, "leaveout");
    let concept = cfg.concept(&cfg.leaveout.concept)?;
    let name = concept.name();
    let tap = cfg.leaveout.tap.clone();
    let attr_path = ctx.run.require(ctx.run.attribution(&name, &tap), "attribute")?;
    let tau = expected_attribution(&load_attribution::<f64>(&attr_path)?)?;
    let (train, val) = ctx.load_base()?;
    let data = load_concepts(ctx)?
        .into_iter()
        .find(|c| c.spec == concept)
        .expect("validated concept");
    let d = cfg.network_spec().tap_dim(&tap)?;
    let mut ks: Vec<usize> = sparsity_levels(ctx).into_iter().map(|k| k.min(d)).collect();
    ks.dedup();
    let probes: Vec<Option<usize>> = std::iter::once(None).chain(ks.iter().copied().map(Some)).collect();
    let probe_label = |p: &Option<usize>| p.map_or("dense".to_string(), |k| format!("k={k}"));

    let m = cfg.members;
    let mut header: Vec<String> = [
        "T",
        "fraction",
        "n_train",
        "probe",
        "k_effective",
        "members",
        "mean",
        "std",
        "delta_vs_t0",
    ]
    .map(String::from)
    .to_vec();
    header.extend(member_columns(m));
    let mut csv = Csv::new(&header);
    let mut models = Csv::new(&["T", "member", "val_accuracy"]);
    let ts = cfg.removal_counts();
    let mut curves: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); probes.len()];
    let mut baseline: Vec<f64> = Vec::new();
    for &t in &ts {
        let nets: Vec<Network> = if t == 0 {
            ctx.load_members()?
        } else {
            let kept = remove_top_t(&train, &tau, t)?;
            let paths: Vec<_> = (0..m).map(|j| ctx.run.leaveout_member(t, j)).collect();
            let nets = train_members(ctx, &kept, &paths)?;
            log.wrote_all(paths);
            nets
        };
        for (j, net) in nets.iter().enumerate() {
            models.row(vec![
                t.to_string(),
                j.to_string(),
                float(evaluate_accuracy(net, &val.images, &val.class_labels)?),
            ]);
        }
        let work: Vec<(usize, usize)> = (0..m).flat_map(|j| (0..probes.len()).map(move |p| (j, p))).collect();
        let accs = ctx.install(|| {
            work.par_iter()
                .map(|&(j, p)| {
                    fit_probe(ctx, &data, &nets[j], &tap, j, probes[p])
                        .map(|f| f.val_acc)
                        .map_err(HarnessError::member(j))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (p, probe) in probes.iter().enumerate() {
            let values: Vec<f64> = (0..m).map(|j| accs[j * probes.len() + p]).collect();
            let mu = mean(&values);
            if t == 0 {
                baseline.push(mu);
            }
            let mut row = vec![
                t.to_string(),
                float(t as f64 / train.len() as f64),
                (train.len() - t).to_string(),
                probe_label(probe),
                probe.unwrap_or(d).to_string(),
                m.to_string(),
                float(mu),
                float(std_dev(&values)),
                float(mu - baseline[p]),
            ];
            row.extend(values.iter().map(|&a| float(a)));
            csv.row(row);
            curves[p].0.push(mu);
            curves[p].1.push(std_dev(&values));
        }
        eprintln!("leaveout: T = {t} dense accuracy {:.3}", curves[0].0.last().expect("row pushed"));
    }
    let chart = Chart {
        title: format!("{name} at {tap} after removing the top-T attributed images"),
        x_label: "T (removed training images)".into(),
        y_label: "concept validation accuracy".into(),
        x_ticks: ts.iter().map(|t| t.to_string()).collect(),
        series: probes
            .iter()
            .zip(curves)
            .map(|(p, (y, band))| Series {
                label: probe_label(p),
                y,
                band: Some(band),
            })
            .collect(),
    };
    for (file, text) in [
        ("leaveout.csv", csv.finish()),
        ("leaveout_models.csv", models.finish()),
        ("leaveout.svg", chart.render()),
    ] {
        let path = ctx.run.report(file);
        ctx.run.write(&path, text.as_bytes())?;
        log.wrote(path);
    }
    log.finish(ctx.threads)
}
