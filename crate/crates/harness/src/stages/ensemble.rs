use std::path::PathBuf;

use rayon::prelude::*;

use cattr_core::nn::{encode_network, evaluate_accuracy, train_network};
use cattr_core::{ImageDataset, Network};

use super::Context;
use crate::csv::{float, Csv};
use crate::error::{HarnessError, Result};
use crate::run::StageLog;

/// Trains member `j` for every entry of `paths` on `train` (seeds depend
/// only on `j`), saving each checkpoint. Members train concurrently; the
/// first failure aborts with its member id.
pub(crate) fn train_members(ctx: &Context, train: &ImageDataset, paths: &[PathBuf]) -> Result<Vec<Network>> {
    let spec = ctx.cfg.network_spec();
    let nets = ctx.install(|| {
        paths
            .par_iter()
            .enumerate()
            .map(|(j, path)| {
                let net = train_network(&spec, &train.images, &train.class_labels, &ctx.cfg.train_config(j))
                    .map_err(HarnessError::member(j))?;
                ctx.run.write(path, &encode_network(&net).map_err(HarnessError::member(j))?)?;
                Ok(net)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(nets)
}

pub fn train_ensemble(ctx: &Context) -> Result<()> {
    let mut log = StageLog::start(&ctx.run, "train-ensemble");
    let (train, val) = ctx.load_base()?;
    let paths: Vec<PathBuf> = (0..ctx.cfg.members).map(|j| ctx.run.member(j)).collect();
    let nets = train_members(ctx, &train, &paths)?;
    let mut csv = Csv::new(&["member", "seed", "params", "train_loss", "train_accuracy", "val_accuracy"]);
    for (j, net) in nets.iter().enumerate() {
        let last = net.train_log.last().expect("at least one epoch");
        let val_acc = evaluate_accuracy(net, &val.images, &val.class_labels)?;
        csv.row(vec![
            j.to_string(),
            net.seed().to_string(),
            net.n_params().to_string(),
            float(last.loss),
            float(last.accuracy),
            float(val_acc),
        ]);
        eprintln!("train-ensemble: member {j} val accuracy {val_acc:.3}");
    }
    log.wrote_all(paths);
    let path = ctx.run.report("ensemble.csv");
    ctx.run.write(&path, csv.finish().as_bytes())?;
    log.wrote(path);
    log.finish(ctx.threads)
}
