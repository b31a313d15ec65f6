use rand::Rng;
use serde::{Deserialize, Serialize};

use super::draw::{clamp01, Boundary, HighFreq, LowFreq, TextureKind};
use super::{Band, ConceptDataset, FrequencyLayout, GeneratorMeta, ImageDataset, Split, SplitParts};
use crate::error::{Error, Result};
use crate::rng::{self, uniform};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Offset applied to the second concept's source ids in a relative split so
/// the two generators' id spaces never collide.
pub const RELATIVE_ID_OFFSET: u64 = 1 << 40;

fn texture_split<T: Scalar>(ds: &ImageDataset<T>, texture: TextureKind, split: Split, seed: u64) -> Result<ConceptDataset<T>> {
    let meta = ds
        .metadata
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("texture concept needs generator metadata".into()))?;
    let (pos, rest): (Vec<usize>, Vec<usize>) =
        (0..ds.len()).partition(|&i| meta[i].texture() == Some(texture));
    if pos.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "texture `{}` names no example in the {split:?} split",
            texture.name()
        )));
    }
    if rest.len() < pos.len() {
        return Err(Error::InvalidConfig(format!(
            "texture `{}`: {} positives but only {} non-concept examples",
            texture.name(),
            pos.len(),
            rest.len()
        )));
    }
    let mut r = rng::stream(seed, split as u64, "texture-negatives");
    let perm = rng::permutation(&mut r, rest.len());
    let mut chosen: Vec<(usize, usize)> = pos.iter().map(|&i| (i, 1)).collect();
    chosen.extend(perm[..pos.len()].iter().map(|&k| (rest[k], 0)));
    chosen.sort_unstable();
    let idx: Vec<usize> = chosen.iter().map(|c| c.0).collect();
    let sub = ds.select(&idx);
    ConceptDataset::new(
        format!("texture:{}", texture.name()),
        split,
        sub.images,
        chosen.iter().map(|c| c.1).collect(),
        sub.ids,
        sub.metadata,
    )
}

/// Positives are every example whose generator texture matches; negatives an
/// equal number drawn without replacement from the remaining examples.
pub fn build_texture_concept<T: Scalar>(
    base_train: &ImageDataset<T>,
    base_val: &ImageDataset<T>,
    texture: TextureKind,
    seed: u64,
) -> Result<(ConceptDataset<T>, ConceptDataset<T>)> {
    Ok((
        texture_split(base_train, texture, Split::Train, seed)?,
        texture_split(base_val, texture, Split::Val, seed)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrequencyConfig {
    /// Total images; half positives, half negatives.
    pub count: usize,
    pub image_size: usize,
    pub seed: u64,
}

impl Default for FrequencyConfig {
    fn default() -> Self {
        Self {
            count: 2000,
            image_size: 32,
            seed: 0,
        }
    }
}

impl FrequencyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count < 40 {
            return Err(Error::InvalidConfig(format!("count must be at least 40, got {}", self.count)));
        }
        if self.image_size < 16 {
            return Err(Error::InvalidConfig(format!(
                "image_size must be at least 16, got {}",
                self.image_size
            )));
        }
        Ok(())
    }
}

type Renderer = fn(usize, bool, &mut rng::StreamRng) -> (Vec<f64>, GeneratorMeta);

/// Renders `count / 2` positives and as many negatives, each from its own
/// stream, and splits each label 90/10 into train/val.
fn generate_pairs<T: Scalar>(
    name: &str,
    cfg: &FrequencyConfig,
    render: Renderer,
) -> Result<(ConceptDataset<T>, ConceptDataset<T>)> {
    cfg.validate()?;
    let half = cfg.count / 2;
    let n_val = (half / 10).max(1);
    let n_train = half - n_val;
    let size = cfg.image_size;
    let mut parts: [SplitParts<T>; 2] = Default::default();
    for label in [1usize, 0] {
        for i in 0..half {
            let id = if label == 1 { i } else { half + i } as u64;
            let mut r = rng::stream(cfg.seed, id, name);
            let (img, meta) = render(size, label == 1, &mut r);
            let part = &mut parts[usize::from(i >= n_train)];
            part.0.extend(img.into_iter().map(T::lit));
            part.1.push(label);
            part.2.push(id);
            part.3.push(meta);
        }
    }
    let [train, val] = parts;
    let build = |(data, labels, ids, meta): (Vec<T>, Vec<usize>, Vec<u64>, Vec<GeneratorMeta>), split| {
        let n = labels.len();
        ConceptDataset::new(name, split, Tensor::new(vec![n, 1, size, size], data)?, labels, ids, Some(meta))
    };
    Ok((build(train, Split::Train)?, build(val, Split::Val)?))
}

fn render_highlow(size: usize, positive: bool, r: &mut rng::StreamRng) -> (Vec<f64>, GeneratorMeta) {
    let high = HighFreq::draw(r);
    let low = LowFreq::draw(size, r);
    let mut img = vec![0.0; size * size];
    let (layout, boundary, high_side_positive) = if positive {
        let b = Boundary::draw(size, r);
        let hs: bool = r.random();
        for y in 0..size {
            for x in 0..size {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                img[y * size + x] = if (b.side(px, py) > 0.0) == hs {
                    high.sample(px, py, r)
                } else {
                    low.sample(px, py)
                };
            }
        }
        (FrequencyLayout::Transition, Some(b), hs)
    } else {
        let all_high: bool = r.random();
        for y in 0..size {
            for x in 0..size {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                img[y * size + x] = if all_high {
                    high.sample(px, py, r)
                } else {
                    low.sample(px, py)
                };
            }
        }
        let layout = if all_high {
            FrequencyLayout::UniformHigh
        } else {
            FrequencyLayout::UniformLow
        };
        (layout, None, false)
    };
    img.iter_mut().for_each(|v| *v = clamp01(*v));
    (
        img,
        GeneratorMeta::HighLow {
            layout,
            boundary,
            high_side_positive,
        },
    )
}

/// Positives: an oriented boundary with high spatial frequency (noise or a
/// sinusoid of period ≤ 4 px) on one side and a smooth field (period ≥ the
/// image size) on the other. Negatives: uniformly high or uniformly low
/// frequency images.
pub fn generate_highlow_concept<T: Scalar>(cfg: &FrequencyConfig) -> Result<(ConceptDataset<T>, ConceptDataset<T>)> {
    generate_pairs(HIGHLOW, cfg, render_highlow)
}

pub const HIGHLOW: &str = "highlow";
pub const BOUNDARY: &str = "boundary";

fn render_boundary(size: usize, positive: bool, r: &mut rng::StreamRng) -> (Vec<f64>, GeneratorMeta) {
    let mut img = vec![0.0; size * size];
    let meta = if positive {
        let b = Boundary::draw(size, r);
        let band = if r.random::<bool>() { Band::High } else { Band::Low };
        let dark = uniform(r, 0.1, 0.25);
        let step = uniform(r, 0.5, 0.65);
        let mut shared = LowFreq::draw(size, r);
        shared.mean = 0.0;
        shared.amplitude = 0.03;
        let noise = uniform(r, 0.05, 0.08);
        let bright_positive: bool = r.random();
        for y in 0..size {
            for x in 0..size {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let lum = if (b.side(px, py) > 0.0) == bright_positive { dark + step } else { dark };
                let tex = match band {
                    Band::High => noise * (2.0 * r.random::<f64>() - 1.0),
                    _ => shared.sample(px, py),
                };
                img[y * size + x] = clamp01(lum + tex);
            }
        }
        GeneratorMeta::Boundary {
            boundary: Some(b),
            band,
            step,
        }
    } else if r.random::<bool>() {
        let low = LowFreq::draw(size, r);
        for y in 0..size {
            for x in 0..size {
                img[y * size + x] = clamp01(low.sample(x as f64 + 0.5, y as f64 + 0.5));
            }
        }
        GeneratorMeta::Boundary {
            boundary: None,
            band: Band::Low,
            step: 0.0,
        }
    } else {
        let level = uniform(r, 0.1, 0.9);
        img.iter_mut().for_each(|v| *v = level);
        GeneratorMeta::Boundary {
            boundary: None,
            band: Band::Flat,
            step: 0.0,
        }
    };
    (img, meta)
}

/// Positives: a sharp luminance edge between two regions sharing one
/// frequency band. Negatives: smooth or constant images.
pub fn generate_boundary_concept<T: Scalar>(cfg: &FrequencyConfig) -> Result<(ConceptDataset<T>, ConceptDataset<T>)> {
    generate_pairs(BOUNDARY, cfg, render_boundary)
}

fn relative_one<T: Scalar>(
    a: &ConceptDataset<T>,
    b: &ConceptDataset<T>,
    name: &str,
    seed: u64,
) -> Result<ConceptDataset<T>> {
    let pos_a: Vec<usize> = (0..a.len()).filter(|&i| a.labels[i] == 1).collect();
    let pos_b: Vec<usize> = (0..b.len()).filter(|&i| b.labels[i] == 1).collect();
    let n = pos_a.len().min(pos_b.len());
    if n == 0 {
        return Err(Error::Empty("relative split needs positives on both sides"));
    }
    let mut r = rng::stream(seed, a.split as u64, "relative-downsample");
    let mut take = |v: Vec<usize>| -> Vec<usize> {
        if v.len() == n {
            return v;
        }
        let perm = rng::permutation(&mut r, v.len());
        let mut kept: Vec<usize> = perm[..n].iter().map(|&k| v[k]).collect();
        kept.sort_unstable();
        kept
    };
    let ka = take(pos_a);
    let kb = take(pos_b);
    let ia = a.images.select_rows(&ka);
    let ib = b.images.select_rows(&kb);
    let mut shape = ia.shape().to_vec();
    shape[0] = 2 * n;
    let images = Tensor::new(shape, [ia.into_data(), ib.into_data()].concat())?;
    let mut labels = vec![1; n];
    labels.extend(std::iter::repeat_n(0, n));
    let mut ids: Vec<u64> = ka.iter().map(|&i| a.source_ids[i]).collect();
    ids.extend(kb.iter().map(|&i| b.source_ids[i] + RELATIVE_ID_OFFSET));
    let metadata = match (&a.metadata, &b.metadata) {
        (Some(ma), Some(mb)) => Some(
            ka.iter()
                .map(|&i| ma[i].clone())
                .chain(kb.iter().map(|&i| mb[i].clone()))
                .collect(),
        ),
        _ => None,
    };
    ConceptDataset::new(name, a.split, images, labels, ids, metadata)
}

/// Concept-vs-concept split: positives of `a` labelled 1, positives of `b`
/// labelled 0, the larger side down-sampled to balance. Source ids of `b` are
/// shifted by [`RELATIVE_ID_OFFSET`].
pub fn relative_split<T: Scalar>(
    a: (&ConceptDataset<T>, &ConceptDataset<T>),
    b: (&ConceptDataset<T>, &ConceptDataset<T>),
    seed: u64,
) -> Result<(ConceptDataset<T>, ConceptDataset<T>)> {
    let name = format!("{}-vs-{}", a.0.concept, b.0.concept);
    Ok((relative_one(a.0, b.0, &name, seed)?, relative_one(a.1, b.1, &name, seed)?))
}
