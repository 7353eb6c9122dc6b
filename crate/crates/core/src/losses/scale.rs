//! Random rescaling used by the structural-consistency objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::map::{Image, SaliencyMap};

pub const MIN_SCALE: f64 = 0.5;
pub const MAX_SCALE: f64 = 2.0;

/// Bilinear resampling with half-pixel centres and edge clamping.
pub fn resample_bilinear(
    values: &[f64],
    channels: usize,
    (src_w, src_h): (usize, usize),
    (dst_w, dst_h): (usize, usize),
) -> Vec<f64> {
    if (src_w, src_h) == (dst_w, dst_h) {
        return values.to_vec();
    }
    let taps = |dst: usize, src: usize| -> Vec<(usize, usize, f64)> {
        let ratio = src as f64 / dst as f64;
        (0..dst)
            .map(|d| {
                let x = ((d as f64 + 0.5) * ratio - 0.5).clamp(0.0, (src - 1) as f64);
                let x0 = x.floor() as usize;
                let x1 = (x0 + 1).min(src - 1);
                (x0, x1, x - x0 as f64)
            })
            .collect()
    };
    let xs = taps(dst_w, src_w);
    let ys = taps(dst_h, src_h);
    let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
    let at = |r: usize, c: usize, ch: usize| values[(r * src_w + c) * channels + ch];
    let mut out = Vec::with_capacity(dst_w * dst_h * channels);
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            for ch in 0..channels {
                let top = lerp(at(y0, x0, ch), at(y0, x1, ch), tx);
                let bottom = lerp(at(y1, x0, ch), at(y1, x1, ch), tx);
                out.push(lerp(top, bottom, ty).clamp(0.0, 1.0));
            }
        }
    }
    out
}

/// A rescale of an `src` grid to `round(s * W) x round(s * H)` and back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleTransform {
    scale: f64,
    src: (usize, usize),
    dst: (usize, usize),
}

impl ScaleTransform {
    pub fn new(width: usize, height: usize, scale: f64) -> Result<Self> {
        if !(MIN_SCALE..=MAX_SCALE).contains(&scale) {
            return Err(Error::param(
                "scale",
                format!("{scale} outside [{MIN_SCALE}, {MAX_SCALE}]"),
            ));
        }
        let dst_w = (scale * width as f64).round() as usize;
        let dst_h = (scale * height as f64).round() as usize;
        if dst_w < 3 || dst_h < 3 {
            return Err(Error::InvalidDimensions {
                width: dst_w,
                height: dst_h,
                reason: "rescaled field must be at least 3x3",
            });
        }
        Ok(Self {
            scale,
            src: (width, height),
            dst: (dst_w, dst_h),
        })
    }

    /// Draws a factor uniformly from `range` using `seed`.
    pub fn random(width: usize, height: usize, range: (f64, f64), seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::draw(width, height, range, &mut rng)
    }

    pub fn draw(
        width: usize,
        height: usize,
        range: (f64, f64),
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let (lo, hi) = range;
        if !(MIN_SCALE <= lo && lo <= hi && hi <= MAX_SCALE) {
            return Err(Error::param(
                "scale_range",
                format!("[{lo}, {hi}] not within [{MIN_SCALE}, {MAX_SCALE}]"),
            ));
        }
        let s = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        Self::new(width, height, s)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn scaled_shape(&self) -> (usize, usize) {
        self.dst
    }

    pub fn apply_map(&self, map: &SaliencyMap) -> Result<SaliencyMap> {
        map.ensure_same_shape(self.src)?;
        let v = resample_bilinear(map.values(), 1, self.src, self.dst);
        SaliencyMap::new(self.dst.0, self.dst.1, v)
    }

    pub fn apply_image(&self, img: &Image) -> Result<Image> {
        if img.shape() != self.src {
            return Err(Error::ShapeMismatch {
                left: img.shape(),
                right: self.src,
            });
        }
        let v = resample_bilinear(img.values(), img.channels(), self.src, self.dst);
        Image::new(self.dst.0, self.dst.1, img.channels(), v)
    }

    /// Resamples a map on the scaled grid back to the original grid.
    pub fn invert_map(&self, map: &SaliencyMap) -> Result<SaliencyMap> {
        map.ensure_same_shape(self.dst)?;
        let v = resample_bilinear(map.values(), 1, self.dst, self.src);
        SaliencyMap::new(self.src.0, self.src.1, v)
    }

    /// Rescales `map` and brings it back: the per-pixel stand-in for a
    /// prediction made on the transformed input.
    pub fn round_trip(&self, map: &SaliencyMap) -> Result<SaliencyMap> {
        self.invert_map(&self.apply_map(map)?)
    }
}
