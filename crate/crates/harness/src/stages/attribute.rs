use std::collections::HashMap;

use rayon::prelude::*;

use cattr_core::attribution::{
    aggregate_ensemble, encode_attribution, expected_attribution, featurize_model, rank_training_points,
    score_model, top_ids, Provenance,
};
use cattr_core::datagen::{to_pgm, GeneratorMeta};
use cattr_core::nn::Model;
use cattr_core::probes::{assign_concept_labels, load_probe, ComposedModel};
use cattr_core::{ImageDataset, Probe};

use super::Context;
use crate::csv::{float, Csv};
use crate::error::{HarnessError, Result};
use crate::run::StageLog;
use crate::svg::{Chart, Series};

/// Highest / lowest attributed images dumped per tap for the main figure.
pub const MAIN_TOP: usize = 4;
pub const MAIN_BOTTOM: usize = 2;
pub const TOP_EXTENDED: usize = 10;

fn factors(ds: &ImageDataset, i: usize) -> (String, String) {
    match ds.metadata.as_ref().map(|m| &m[i]) {
        Some(GeneratorMeta::Base { shape, texture, .. }) => {
            (format!("{shape:?}").to_lowercase(), texture.name().to_string())
        }
        _ => ("-".into(), "-".into()),
    }
}

pub fn attribute(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut log = StageLog::start(&ctx.run, "attribute");
    let (train, val) = ctx.load_base()?;
    let nets = ctx.load_members()?;
    let concept = cfg.concept(&cfg.attribution.concept)?.name();
    let row_of: HashMap<u64, usize> = train.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let [c, h, w] = cfg.network_spec().input;

    let mut index = Csv::new(&[
        "concept", "tap", "set", "rank", "id", "class", "shape", "texture", "tau_c", "file",
    ]);
    let mut labels_csv = Csv::new(&[
        "tap",
        "n_train",
        "train_positives",
        "n_val",
        "val_positives",
        "member1_train_disagreements",
    ]);
    for tap in cfg.attribution_taps() {
        let probes: Vec<Probe> = (0..cfg.members)
            .map(|j| {
                let path = ctx.run.require(ctx.run.probe(&concept, &tap, j, None), "probe-sweep")?;
                Ok(load_probe(&path)?)
            })
            .collect::<Result<_>>()?;
        // Every member is attributed against the same assignment: member 0's
        // subnetwork + probe predictions on the base splits.
        let lead = ComposedModel::new(&nets[0], &probes[0], cfg.attribution.params)?;
        let y_train = assign_concept_labels(&lead, &train.images)?;
        let y_val = assign_concept_labels(&lead, &val.images)?;
        let disagreements = match nets.len() {
            1 => "-".to_string(),
            _ => {
                let other = ComposedModel::new(&nets[1], &probes[1], cfg.attribution.params)?;
                let y1 = assign_concept_labels(&other, &train.images)?;
                y1.iter().zip(&y_train).filter(|(a, b)| a != b).count().to_string()
            }
        };
        labels_csv.row(vec![
            tap.clone(),
            y_train.len().to_string(),
            y_train.iter().sum::<usize>().to_string(),
            y_val.len().to_string(),
            y_val.iter().sum::<usize>().to_string(),
            disagreements,
        ]);

        let scores = ctx.install(|| {
            (0..cfg.members)
                .into_par_iter()
                .map(|j| {
                    let model = ComposedModel::new(&nets[j], &probes[j], cfg.attribution.params)
                        .map_err(HarnessError::member(j))?;
                    let spec = cfg.projection_spec(model.n_params());
                    let fm = featurize_model(j, &model, &train.images, &y_train, &spec).map_err(HarnessError::member(j))?;
                    score_model(&fm, &model, &val.images, &y_val, &spec).map_err(HarnessError::member(j))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let am = aggregate_ensemble(
            &scores,
            val.ids.clone(),
            train.ids.clone(),
            Provenance {
                concept: concept.clone(),
                tap: tap.clone(),
                members: cfg.members,
                seeds: nets.iter().map(|n| n.seed()).collect(),
            },
        )?;
        let path = ctx.run.attribution(&concept, &tap);
        ctx.run.write(&path, &encode_attribution(&am)?)?;
        log.wrote(path);
        let tau = expected_attribution(&am)?;

        let order = top_ids(&tau.ids, &tau.tau_c, tau.ids.len());
        let tau_of: HashMap<u64, f64> = tau.ids.iter().copied().zip(tau.tau_c.iter().copied()).collect();
        let mut sorted = Csv::new(&["rank", "id", "class", "shape", "texture", "tau_c"]);
        for (r, id) in order.iter().enumerate() {
            let i = row_of[id];
            let (shape, texture) = factors(&train, i);
            sorted.row(vec![
                (r + 1).to_string(),
                id.to_string(),
                train.class_labels[i].to_string(),
                shape,
                texture,
                float(tau_of[id]),
            ]);
        }
        let chart = Chart {
            title: format!("Sorted concept attribution: {concept} at {tap}"),
            x_label: "training example rank".into(),
            y_label: "τ_c".into(),
            x_ticks: (1..=order.len()).map(|r| r.to_string()).collect(),
            series: vec![Series {
                label: tap.clone(),
                y: order.iter().map(|id| tau_of[id]).collect(),
                band: None,
            }],
        };
        for (file, text) in [
            (format!("tau_{concept}_{tap}.csv"), sorted.finish()),
            (format!("tau_{concept}_{tap}.svg"), chart.render()),
        ] {
            let path = ctx.run.report(&file);
            ctx.run.write(&path, text.as_bytes())?;
            log.wrote(path);
        }

        let (top, bottom) = rank_training_points(&tau, TOP_EXTENDED.max(MAIN_TOP).max(MAIN_BOTTOM))?;
        let mut dumps: Vec<(&str, usize, u64, String)> = Vec::new();
        for (r, &id) in top.iter().take(MAIN_TOP).enumerate() {
            dumps.push(("top", r + 1, id, format!("top_{}.pgm", r + 1)));
        }
        for (r, &id) in bottom.iter().take(MAIN_BOTTOM).enumerate() {
            dumps.push(("bottom", r + 1, id, format!("bottom_{}.pgm", r + 1)));
        }
        for (r, &id) in top.iter().take(TOP_EXTENDED).enumerate() {
            dumps.push(("top10", r + 1, id, format!("top10/rank_{:02}.pgm", r + 1)));
        }
        for (set, rank, id, file) in dumps {
            let i = row_of[&id];
            let path = ctx.run.path(&format!("images/{concept}/{tap}/{file}"));
            ctx.run.write(&path, &to_pgm(train.images.row(i), c, h, w))?;
            let (shape, texture) = factors(&train, i);
            index.row(vec![
                concept.clone(),
                tap.clone(),
                set.into(),
                rank.to_string(),
                id.to_string(),
                train.class_labels[i].to_string(),
                shape,
                texture,
                float(tau_of[&id]),
                ctx.run.relative(&path),
            ]);
            log.wrote(path);
        }
        eprintln!("attribute: {concept} at {tap} done");
    }
    for (file, text) in [
        ("attribution_labels.csv", labels_csv.finish()),
        ("attribution_index.csv", index.finish()),
    ] {
        let path = ctx.run.report(file);
        ctx.run.write(&path, text.as_bytes())?;
        log.wrote(path);
    }
    log.finish(ctx.threads)
}
