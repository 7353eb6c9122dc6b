//! Seeded synthetic scenes: a few flat-intensity shapes on a contrasting
//! background, with optional uniform noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::map::{Image, SaliencyMap};

/// Accepted range of the foreground area fraction.
pub const AREA_FRACTION_RANGE: (f64, f64) = (0.05, 0.60);
const MAX_ATTEMPTS: usize = 10_000;
const CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rect {
        top: usize,
        left: usize,
        bottom: usize,
        right: usize,
    },
    Ellipse {
        center_r: f64,
        center_c: f64,
        radius_r: f64,
        radius_c: f64,
    },
}

impl Shape {
    fn contains(&self, r: usize, c: usize) -> bool {
        match *self {
            Shape::Rect {
                top,
                left,
                bottom,
                right,
            } => (top..=bottom).contains(&r) && (left..=right).contains(&c),
            Shape::Ellipse {
                center_r,
                center_c,
                radius_r,
                radius_c,
            } => {
                let dr = (r as f64 - center_r) / radius_r;
                let dc = (c as f64 - center_c) / radius_c;
                dr * dr + dc * dc <= 1.0
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDescriptor {
    pub shapes: Vec<Shape>,
    pub object_level: f64,
    pub background_level: f64,
    pub contrast: f64,
    pub noise: f64,
    pub area_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub image: Image,
    pub ground_truth: SaliencyMap,
    pub descriptor: SceneDescriptor,
}

fn random_shape(rng: &mut ChaCha8Rng, width: usize, height: usize) -> Shape {
    let (w, h) = (width as f64, height as f64);
    let center_r = rng.gen_range(0.15..0.85) * h;
    let center_c = rng.gen_range(0.15..0.85) * w;
    let radius_r = (rng.gen_range(0.08..0.30) * h).max(1.5);
    let radius_c = (rng.gen_range(0.08..0.30) * w).max(1.5);
    if rng.gen_bool(0.5) {
        let clampi = |v: f64, hi: usize| v.round().clamp(0.0, (hi - 1) as f64) as usize;
        Shape::Rect {
            top: clampi(center_r - radius_r, height),
            bottom: clampi(center_r + radius_r, height),
            left: clampi(center_c - radius_c, width),
            right: clampi(center_c + radius_c, width),
        }
    } else {
        Shape::Ellipse {
            center_r,
            center_c,
            radius_r,
            radius_c,
        }
    }
}

/// Generates a scene deterministically from `seed`.
pub fn generate_scene(
    seed: u64,
    width: usize,
    height: usize,
    contrast: f64,
    noise: f64,
) -> Result<SyntheticScene> {
    if width < 16 || height < 16 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "scenes must be at least 16x16",
        });
    }
    if !(contrast > 0.0 && contrast <= 1.0) {
        return Err(Error::param(
            "contrast",
            format!("{contrast} outside (0, 1]"),
        ));
    }
    if !(0.0..=0.3).contains(&noise) {
        return Err(Error::param("noise", format!("{noise} outside [0, 0.3]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let object_brighter = rng.gen_bool(0.5);
    let low = if contrast < 1.0 {
        rng.gen_range(0.0..=1.0 - contrast)
    } else {
        0.0
    };
    let high = (low + contrast).min(1.0);
    let (object_level, background_level) = if object_brighter {
        (high, low)
    } else {
        (low, high)
    };

    let n = width * height;
    let (shapes, mask) = (0..MAX_ATTEMPTS)
        .find_map(|_| {
            let count = rng.gen_range(1..=3);
            let shapes: Vec<Shape> = (0..count)
                .map(|_| random_shape(&mut rng, width, height))
                .collect();
            let mask: Vec<bool> = (0..n)
                .map(|i| shapes.iter().any(|s| s.contains(i / width, i % width)))
                .collect();
            let frac = mask.iter().filter(|&&b| b).count() as f64 / n as f64;
            (AREA_FRACTION_RANGE.0..=AREA_FRACTION_RANGE.1)
                .contains(&frac)
                .then_some((shapes, mask))
        })
        .ok_or(Error::Undefined("no admissible shape layout found"))?;
    let area = mask.iter().filter(|&&b| b).count();

    let mut values = Vec::with_capacity(n * CHANNELS);
    for &fg in &mask {
        let level = if fg { object_level } else { background_level };
        for _ in 0..CHANNELS {
            let jitter = if noise > 0.0 {
                rng.gen_range(-noise..=noise)
            } else {
                0.0
            };
            values.push((level + jitter).clamp(0.0, 1.0));
        }
    }
    let gt = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    Ok(SyntheticScene {
        image: Image::new(width, height, CHANNELS, values)?,
        ground_truth: SaliencyMap::new(width, height, gt)?,
        descriptor: SceneDescriptor {
            shapes,
            object_level,
            background_level,
            contrast,
            noise,
            area_fraction: area as f64 / n as f64,
        },
    })
}
