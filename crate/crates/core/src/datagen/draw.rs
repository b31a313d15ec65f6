//! Pixel-level rasterization helpers. All routines write values in `[0, 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::uniform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Disk,
    Square,
    Triangle,
    Annulus,
    Cross,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] = [
        ShapeKind::Disk,
        ShapeKind::Square,
        ShapeKind::Triangle,
        ShapeKind::Annulus,
        ShapeKind::Cross,
    ];

    /// Membership test in shape-local coordinates scaled to unit radius.
    pub fn contains(self, u: f64, v: f64) -> bool {
        match self {
            ShapeKind::Disk => u * u + v * v <= 1.0,
            ShapeKind::Square => u.abs().max(v.abs()) <= 0.8,
            ShapeKind::Triangle => [270.0f64, 30.0, 150.0].iter().all(|deg| {
                let a = deg.to_radians();
                u * a.cos() + v * a.sin() <= 0.5
            }),
            ShapeKind::Annulus => {
                let r2 = u * u + v * v;
                (0.55 * 0.55..=1.0).contains(&r2)
            }
            ShapeKind::Cross => (u.abs() <= 0.3 && v.abs() <= 1.0) || (v.abs() <= 0.3 && u.abs() <= 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextureKind {
    Flat,
    Stripes,
    Checker,
    Noise,
}

impl TextureKind {
    pub const ALL: [TextureKind; 4] = [
        TextureKind::Flat,
        TextureKind::Stripes,
        TextureKind::Checker,
        TextureKind::Noise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TextureKind::Flat => "flat",
            TextureKind::Stripes => "stripes",
            TextureKind::Checker => "checker",
            TextureKind::Noise => "noise",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }
}

/// A texture with its sampled parameters; `sample` returns a pattern value
/// in `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct Texture {
    pub kind: TextureKind,
    period: f64,
    angle: f64,
    phase: f64,
}

impl Texture {
    pub fn draw<R: Rng + ?Sized>(kind: TextureKind, rng: &mut R) -> Self {
        let (period, angle) = match kind {
            TextureKind::Stripes => (uniform(rng, 4.0, 6.0), uniform(rng, 0.0, std::f64::consts::PI)),
            TextureKind::Checker => (rng.random_range(2..=4) as f64, 0.0),
            _ => (1.0, 0.0),
        };
        Self {
            kind,
            period,
            angle,
            phase: uniform(rng, 0.0, 1.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: f64, y: f64, rng: &mut R) -> f64 {
        match self.kind {
            TextureKind::Flat => 1.0,
            TextureKind::Stripes => {
                let t = (x * self.angle.cos() + y * self.angle.sin()) / self.period + self.phase;
                if t.rem_euclid(1.0) < 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            TextureKind::Checker => {
                let off = (self.phase * self.period).floor();
                let cx = ((x + off) / self.period).floor() as i64;
                let cy = ((y + off) / self.period).floor() as i64;
                if (cx + cy).rem_euclid(2) == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            TextureKind::Noise => rng.random::<f64>(),
        }
    }
}

/// Oriented straight boundary: `side(x, y) > 0` on the positive half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub angle: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Boundary {
    pub fn draw<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Self {
        let c = size as f64 / 2.0;
        let j = size as f64 / 8.0;
        Self {
            angle: uniform(rng, 0.0, 2.0 * std::f64::consts::PI),
            cx: c + uniform(rng, -j, j),
            cy: c + uniform(rng, -j, j),
        }
    }

    /// Signed distance of pixel centre `(x, y)` from the boundary line.
    pub fn side(&self, x: f64, y: f64) -> f64 {
        (x - self.cx) * self.angle.cos() + (y - self.cy) * self.angle.sin()
    }
}

/// Per-pixel i.i.d. noise or a fine sinusoid (period ≤ 4 px).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HighFreq {
    Noise { mean: f64, amplitude: f64 },
    Sinusoid { mean: f64, amplitude: f64, period: f64, angle: f64 },
}

impl HighFreq {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mean = uniform(rng, 0.35, 0.65);
        if rng.random::<bool>() {
            HighFreq::Noise {
                mean,
                amplitude: uniform(rng, 0.2, 0.3),
            }
        } else {
            HighFreq::Sinusoid {
                mean,
                amplitude: uniform(rng, 0.2, 0.3),
                period: uniform(rng, 2.5, 4.0),
                angle: uniform(rng, 0.0, std::f64::consts::PI),
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: f64, y: f64, rng: &mut R) -> f64 {
        match *self {
            HighFreq::Noise { mean, amplitude } => mean + amplitude * (2.0 * rng.random::<f64>() - 1.0),
            HighFreq::Sinusoid { mean, amplitude, period, angle } => {
                let t = (x * angle.cos() + y * angle.sin()) / period;
                mean + amplitude * (2.0 * std::f64::consts::PI * t).sin()
            }
        }
    }
}

/// Smooth field: a sinusoidal ramp whose period is at least the image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowFreq {
    pub mean: f64,
    pub amplitude: f64,
    pub period: f64,
    pub angle: f64,
    pub phase: f64,
}

impl LowFreq {
    pub fn draw<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Self {
        Self {
            mean: uniform(rng, 0.3, 0.7),
            amplitude: uniform(rng, 0.1, 0.25),
            period: uniform(rng, size as f64, 2.0 * size as f64),
            angle: uniform(rng, 0.0, 2.0 * std::f64::consts::PI),
            phase: uniform(rng, 0.0, 1.0),
        }
    }

    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let t = (x * self.angle.cos() + y * self.angle.sin()) / self.period + self.phase;
        self.mean + self.amplitude * (2.0 * std::f64::consts::PI * t).sin()
    }
}

#[inline]
pub fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Mean |discrete 4-neighbour Laplacian| over interior pixels where `keep`
/// holds; `None` if no pixel qualifies.
pub fn mean_abs_laplacian(img: &[f64], size: usize, keep: impl Fn(usize, usize) -> bool) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for y in 1..size - 1 {
        for x in 1..size - 1 {
            if !keep(x, y) {
                continue;
            }
            let c = img[y * size + x];
            let lap = img[(y - 1) * size + x] + img[(y + 1) * size + x] + img[y * size + x - 1]
                + img[y * size + x + 1]
                - 4.0 * c;
            sum += lap.abs();
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Ratio threshold of [`is_uniform_frequency`].
pub const UNIFORM_RATIO: f64 = 3.0;
const PATCH_FLOOR: f64 = 0.05;

/// Whether local high-frequency energy is roughly constant across the image:
/// the image is tiled into 8×8 patches and the ratio between the largest and
/// smallest floored patch Laplacian energy must stay below [`UNIFORM_RATIO`].
pub fn is_uniform_frequency(img: &[f64], size: usize) -> bool {
    let p = 8.min(size);
    let tiles = size / p;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for ty in 0..tiles {
        for tx in 0..tiles {
            let e = mean_abs_laplacian(img, size, |x, y| {
                x / p == tx && y / p == ty && x % p != 0 && y % p != 0 && x % p != p - 1 && y % p != p - 1
            })
            .unwrap_or(0.0)
                + PATCH_FLOOR;
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    hi / lo < UNIFORM_RATIO
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_have_distinct_footprints() {
        let area = |s: ShapeKind| {
            let mut n = 0;
            for i in -50..=50 {
                for j in -50..=50 {
                    if s.contains(i as f64 / 50.0, j as f64 / 50.0) {
                        n += 1;
                    }
                }
            }
            n
        };
        let areas: Vec<usize> = ShapeKind::ALL.iter().map(|&s| area(s)).collect();
        for i in 0..5 {
            assert!(areas[i] > 1000, "{:?}", ShapeKind::ALL[i]);
            for j in 0..i {
                assert_ne!(areas[i], areas[j]);
            }
        }
        assert!(!ShapeKind::Annulus.contains(0.0, 0.0));
        assert!(ShapeKind::Disk.contains(0.0, 0.0));
    }

    #[test]
    fn texture_names_roundtrip() {
        for t in TextureKind::ALL {
            assert_eq!(TextureKind::parse(t.name()), Some(t));
        }
        assert_eq!(TextureKind::parse("plaid"), None);
    }
}
