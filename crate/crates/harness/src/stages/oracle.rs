use cattr_core::attribution::{self, logistic_fixture, LooConfig, OracleReport};
use cattr_core::probes::ProbeConfig;
use cattr_core::rng::derive_seed;

use super::Context;
use crate::csv::{float, Csv};
use crate::error::Result;

/// Runs the leave-one-out agreement check on a logistic fixture drawn from
/// the master seed and writes the per-example comparison plus a summary.
pub fn oracle_check(ctx: &Context) -> Result<OracleReport> {
    let o = &ctx.cfg.oracle;
    let seed = derive_seed(ctx.cfg.seed, 0, "oracle-fixture");
    let fx = logistic_fixture::<f64>(o.n_train, o.n_val, o.dim, o.separation, seed)?;
    let probe_cfg = ProbeConfig {
        learning_rate: o.learning_rate,
        ..ProbeConfig::default()
    }
    .with_epochs(o.epochs);
    let loo_cfg = LooConfig {
        l2: o.l2,
        ..LooConfig::default()
    };
    let report = ctx.install(|| attribution::oracle_check(&fx, o.members, &probe_cfg, &loo_cfg))?;

    let mut csv = Csv::new(&["train_index", "label", "tau_c", "loo_mean"]);
    for (i, (t, l)) in report.tau_c.iter().zip(&report.loo_means).enumerate() {
        csv.row(vec![i.to_string(), fx.labels[i].to_string(), float(*t), float(*l)]);
    }
    let mut summary = Csv::new(&["fixture_seed", "n_train", "n_val", "members", "spearman", "flagged"]);
    summary.row(vec![
        seed.to_string(),
        o.n_train.to_string(),
        o.n_val.to_string(),
        report.members.to_string(),
        float(report.spearman),
        report.flagged.to_string(),
    ]);
    ctx.run.write(&ctx.run.report("oracle_check.csv"), csv.finish().as_bytes())?;
    ctx.run.write(&ctx.run.report("oracle_summary.csv"), summary.finish().as_bytes())?;
    eprintln!("oracle-check: spearman {:.3}", report.spearman);
    Ok(report)
}
