use serde::{Deserialize, Serialize};

use super::draw::{clamp01, ShapeKind, Texture, TextureKind};
use super::{GeneratorMeta, ImageDataset, SplitParts};
use crate::error::{Error, Result};
use crate::rng::{self, uniform};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseConfig {
    pub n_classes: usize,
    pub per_class_count: usize,
    pub image_size: usize,
    pub seed: u64,
}

impl Default for BaseConfig {
    fn default() -> Self {
        Self {
            n_classes: 10,
            per_class_count: 100,
            image_size: 32,
            seed: 0,
        }
    }
}

impl BaseConfig {
    pub fn validate(&self) -> Result<()> {
        let max = ShapeKind::ALL.len() * TextureKind::ALL.len();
        if !(4..=max).contains(&self.n_classes) {
            return Err(Error::InvalidConfig(format!(
                "n_classes must be in 4..={max}, got {}",
                self.n_classes
            )));
        }
        if self.image_size < 16 {
            return Err(Error::InvalidConfig(format!(
                "image_size must be at least 16, got {}",
                self.image_size
            )));
        }
        if self.per_class_count < 10 {
            return Err(Error::InvalidConfig(format!(
                "per_class_count must be at least 10 for a 90/10 split, got {}",
                self.per_class_count
            )));
        }
        Ok(())
    }

    /// Shape and texture of class `c`. Shape cycles with period 5 and texture
    /// with period 4, so classes `0..20` enumerate every pair once and each
    /// texture spans several classes.
    pub fn class_factors(c: usize) -> (ShapeKind, TextureKind) {
        (ShapeKind::ALL[c % 5], TextureKind::ALL[c % 4])
    }

    /// Classes carrying `texture`.
    pub fn classes_with_texture(&self, texture: TextureKind) -> Vec<usize> {
        (0..self.n_classes)
            .filter(|&c| Self::class_factors(c).1 == texture)
            .collect()
    }

    pub fn val_per_class(&self) -> usize {
        self.per_class_count / 10
    }
}

fn render(size: usize, shape: ShapeKind, texture: TextureKind, seed: u64, id: u64) -> (Vec<f64>, GeneratorMeta) {
    let mut rng = rng::stream(seed, id, "base-image");
    let s = size as f64;
    let center = [
        s / 2.0 + uniform(&mut rng, -s / 8.0, s / 8.0),
        s / 2.0 + uniform(&mut rng, -s / 8.0, s / 8.0),
    ];
    let radius = uniform(&mut rng, 0.28 * s, 0.4 * s);
    let rotation = uniform(&mut rng, 0.0, 2.0 * std::f64::consts::PI);
    let bg = uniform(&mut rng, 0.0, 0.3);
    let bg_slope = uniform(&mut rng, -0.1, 0.1) / s;
    let fg = uniform(&mut rng, 0.65, 1.0);
    let tex = Texture::draw(texture, &mut rng);
    let (sin, cos) = rotation.sin_cos();

    let mut img = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let (dx, dy) = (px - center[0], py - center[1]);
            let u = (dx * cos + dy * sin) / radius;
            let v = (-dx * sin + dy * cos) / radius;
            let back = bg + bg_slope * (px - s / 2.0);
            img[y * size + x] = if shape.contains(u, v) {
                let p = tex.sample(px, py, &mut rng);
                clamp01(back + (fg - back) * (0.15 + 0.85 * p))
            } else {
                clamp01(back)
            };
        }
    }
    let meta = GeneratorMeta::Base {
        shape,
        texture,
        center,
        radius,
        rotation,
    };
    (img, meta)
}

/// Generates the base classification set; returns `(train, val)`.
///
/// Example `i` of class `c` gets id `c * per_class_count + i`; the last tenth
/// of each class goes to the validation split.
pub fn generate_base_dataset<T: Scalar>(cfg: &BaseConfig) -> Result<(ImageDataset<T>, ImageDataset<T>)> {
    cfg.validate()?;
    let size = cfg.image_size;
    let n_val = cfg.val_per_class();
    let n_train = cfg.per_class_count - n_val;
    let mut parts: [SplitParts<T>; 2] = Default::default();
    for c in 0..cfg.n_classes {
        let (shape, texture) = BaseConfig::class_factors(c);
        for i in 0..cfg.per_class_count {
            let id = (c * cfg.per_class_count + i) as u64;
            let (img, meta) = render(size, shape, texture, cfg.seed, id);
            let part = &mut parts[usize::from(i >= n_train)];
            part.0.extend(img.into_iter().map(T::lit));
            part.1.push(c);
            part.2.push(id);
            part.3.push(meta);
        }
    }
    let [train, val] = parts;
    let build = |(data, labels, ids, meta): (Vec<T>, Vec<usize>, Vec<u64>, Vec<GeneratorMeta>)| {
        let n = labels.len();
        ImageDataset::new(
            Tensor::new(vec![n, 1, size, size], data)?,
            labels,
            ids,
            cfg.n_classes,
            Some(meta),
        )
    };
    Ok((build(train)?, build(val)?))
}
