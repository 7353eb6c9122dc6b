//! Training objectives with analytic gradients with respect to the prediction.
//!
//! The cue-extractor objective combines masked saliency distilling, boundary
//! texture matching and structural consistency; the detector objective is IoU
//! plus structural consistency. Every loss returns its value together with
//! `dL/dS` per pixel.

mod scale;
mod texture;

pub use scale::{resample_bilinear, ScaleTransform, MAX_SCALE, MIN_SCALE};
pub use texture::{
    boundary_mask, image_texture, texture_vector, TextureField, DEFAULT_BOUNDARY_THRESHOLD,
    TEXTURE_NORM_FLOOR,
};

use crate::curriculum::{pcl_sd_loss, sign, LossResult};
use crate::error::{Error, Result};
use crate::map::{neighbor_index, BinaryMask, Gradient, Image, SaliencyMap, NEIGHBOR_OFFSETS};

/// Clamp margin for the cross-entropy logarithms.
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of the boundary texture term.
    pub gamma: f64,
    /// Neighbour difference above which a pixel counts as boundary.
    pub boundary_threshold: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            boundary_threshold: DEFAULT_BOUNDARY_THRESHOLD,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::param(
                "gamma",
                format!("{} must be >= 0", self.gamma),
            ));
        }
        if !(self.boundary_threshold >= 0.0 && self.boundary_threshold.is_finite()) {
            return Err(Error::param("boundary_threshold", "must be >= 0"));
        }
        Ok(())
    }
}

/// Boundary texture matching against a precomputed image texture.
///
/// Value is the mean over boundary pixels of `<T_s(i), T_a(i)>`; the boundary
/// mask is treated as a constant selector.
pub fn btm_loss_with_texture(
    s: &SaliencyMap,
    image_tex: &TextureField,
    threshold: f64,
) -> Result<LossResult> {
    s.ensure_same_shape(image_tex.shape())?;
    let (w, h) = s.shape();
    if w < 3 || h < 3 {
        return Err(Error::InvalidDimensions {
            width: w,
            height: h,
            reason: "texture matching needs at least 3x3 pixels",
        });
    }
    let mask = boundary_mask(s, threshold);
    let count = mask.count_ones();
    if count == 0 {
        return Ok(LossResult::zero(w, h));
    }
    let raw = texture::raw_texture(w, h, s.values());
    let b = count as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; s.len()];
    for (i, &on) in mask.bits().iter().enumerate() {
        let n = raw.norms[i];
        if !on || n <= TEXTURE_NORM_FLOOR {
            continue;
        }
        let d = &raw.diffs[i];
        let a = &image_tex.vectors()[i];
        let dot: f64 = d.iter().zip(a).map(|(x, y)| x * y).sum::<f64>() / n;
        total += dot;
        // d/du of <u/|u|, a> is (a - t <t, a>) / |u| with t = u/|u|
        let (r, c) = (i / w, i % w);
        for (k, &off) in NEIGHBOR_OFFSETS.iter().enumerate() {
            if let Some(j) = neighbor_index(w, h, r, c, off) {
                let g = (a[k] - d[k] / n * dot) / (n * b);
                grad[i] += g;
                grad[j] -= g;
            }
        }
    }
    Ok(LossResult {
        value: total / b,
        gradient: Gradient::from_values(w, h, grad)?,
    })
}

/// Boundary texture matching between a prediction and its input image.
pub fn btm_loss(s: &SaliencyMap, img: &Image) -> Result<LossResult> {
    s.ensure_same_shape(img.shape())?;
    btm_loss_with_texture(s, &image_texture(img)?, DEFAULT_BOUNDARY_THRESHOLD)
}

/// Structural consistency: mean absolute deviation between the prediction
/// and the prediction on the transformed input (held constant).
pub fn sc_loss(s: &SaliencyMap, s_hat: &SaliencyMap) -> Result<LossResult> {
    s.ensure_same_shape(s_hat.shape())?;
    let n = s.len() as f64;
    let mut total = 0.0;
    let grad = s
        .values()
        .iter()
        .zip(s_hat.values())
        .map(|(&a, &b)| {
            total += (a - b).abs();
            sign(a - b) / n
        })
        .collect();
    Ok(LossResult {
        value: total / n,
        gradient: Gradient::from_values(s.width(), s.height(), grad)?,
    })
}

/// Soft IoU loss `1 - sum(SG) / sum(S + G - SG)`.
pub fn iou_loss(s: &SaliencyMap, g: &SaliencyMap) -> Result<LossResult> {
    s.ensure_same_shape(g.shape())?;
    let (mut inter, mut union) = (0.0, 0.0);
    for (&a, &b) in s.values().iter().zip(g.values()) {
        inter += a * b;
        union += a + b - a * b;
    }
    if union <= 0.0 {
        return Err(Error::Undefined("IoU of two all-zero maps"));
    }
    let u2 = union * union;
    let grad = g
        .values()
        .iter()
        .map(|&b| -(b * union - (1.0 - b) * inter) / u2)
        .collect();
    Ok(LossResult {
        value: 1.0 - inter / union,
        gradient: Gradient::from_values(s.width(), s.height(), grad)?,
    })
}

/// Mean binary cross-entropy of `S` against `G`, with `S` clamped to
/// `[BCE_EPSILON, 1 - BCE_EPSILON]`.
pub fn bce_loss(s: &SaliencyMap, g: &SaliencyMap) -> Result<LossResult> {
    s.ensure_same_shape(g.shape())?;
    let n = s.len() as f64;
    let mut total = 0.0;
    let grad = s
        .values()
        .iter()
        .zip(g.values())
        .map(|(&p, &t)| {
            let q = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            total -= t * q.ln() + (1.0 - t) * (1.0 - q).ln();
            if p == q {
                -(t / q - (1.0 - t) / (1.0 - q)) / n
            } else {
                0.0
            }
        })
        .collect();
    Ok(LossResult {
        value: total / n,
        gradient: Gradient::from_values(s.width(), s.height(), grad)?,
    })
}

/// Cue-extractor objective with a precomputed image texture.
pub fn sce_total_with_texture(
    s: &SaliencyMap,
    s_hat: &SaliencyMap,
    image_tex: &TextureField,
    w: &LossWeights,
    mask: &BinaryMask,
) -> Result<LossResult> {
    let pcl = pcl_sd_loss(s, mask)?;
    let sc = sc_loss(s, s_hat)?;
    let total = if w.gamma == 0.0 {
        pcl
    } else {
        let btm = btm_loss_with_texture(s, image_tex, w.boundary_threshold)?;
        pcl.add_scaled(&btm, w.gamma)
    };
    Ok(total.add_scaled(&sc, 1.0))
}

/// `pcl_sd(S, mask) + gamma * btm(S, img) + sc(S, S_hat)`.
pub fn sce_total(
    s: &SaliencyMap,
    s_hat: &SaliencyMap,
    img: &Image,
    w: &LossWeights,
    mask: &BinaryMask,
) -> Result<LossResult> {
    w.validate()?;
    s.ensure_same_shape(img.shape())?;
    sce_total_with_texture(s, s_hat, &image_texture(img)?, w, mask)
}

/// `iou(S, G) + sc(S, S_hat)`.
pub fn sd_total(s: &SaliencyMap, s_hat: &SaliencyMap, g: &SaliencyMap) -> Result<LossResult> {
    let iou = iou_loss(s, g)?;
    let sc = sc_loss(s, s_hat)?;
    Ok(iou.add_scaled(&sc, 1.0))
}
