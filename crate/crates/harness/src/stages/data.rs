use cattr_core::datagen::{
    build_texture_concept, encode_concept_dataset, encode_image_dataset, generate_base_dataset,
    generate_boundary_concept, generate_highlow_concept, relative_split, BOUNDARY, HIGHLOW,
};
use cattr_core::rng::derive_seed;
use cattr_core::ConceptDataset;

use super::Context;
use crate::config::ConceptSpec;
use crate::csv::Csv;
use crate::error::Result;
use crate::run::StageLog;

/// Generates the base set and every configured concept split.
pub fn gen_data(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let mut log = StageLog::start(&ctx.run, "gen-data");
    let (train, val) = ctx.install(|| generate_base_dataset::<f64>(&cfg.base_config()))?;
    for (split, ds) in [("train", &train), ("val", &val)] {
        let path = ctx.run.base(split);
        ctx.run.write(&path, &encode_image_dataset(ds)?)?;
        log.wrote(path);
    }

    let needs_highlow = cfg
        .concepts
        .iter()
        .any(|c| matches!(c, ConceptSpec::Highlow | ConceptSpec::Relative));
    let highlow = match needs_highlow {
        true => Some(generate_highlow_concept::<f64>(&cfg.frequency_config(HIGHLOW))?),
        false => None,
    };

    let mut summary = Csv::new(&["concept", "split", "examples", "positives", "digest"]);
    for spec in &cfg.concepts {
        let (tr, va): (ConceptDataset, ConceptDataset) = match spec {
            ConceptSpec::Texture { texture } => {
                build_texture_concept(&train, &val, *texture, derive_seed(cfg.seed, 0, "texture-concept"))?
            }
            ConceptSpec::Highlow => highlow.clone().expect("generated above"),
            ConceptSpec::Relative => {
                let (ht, hv) = highlow.as_ref().expect("generated above");
                let (bt, bv) = generate_boundary_concept::<f64>(&cfg.frequency_config(BOUNDARY))?;
                relative_split((ht, hv), (&bt, &bv), derive_seed(cfg.seed, 0, "relative-concept"))?
            }
        };
        let name = spec.name();
        for (split, ds) in [("train", &tr), ("val", &va)] {
            let path = ctx.run.concept(&name, split);
            ctx.run.write(&path, &encode_concept_dataset(ds)?)?;
            log.wrote(path);
            summary.row(vec![
                name.clone(),
                split.into(),
                ds.len().to_string(),
                ds.positives().to_string(),
                ds.content_digest(),
            ]);
        }
    }
    let path = ctx.run.report("datasets.csv");
    ctx.run.write(&path, summary.finish().as_bytes())?;
    log.wrote(path);
    eprintln!("gen-data: {} train / {} val base images", train.len(), val.len());
    log.finish(ctx.threads)
}
