//! Real-time pixel refiner: an image-driven 8-neighbour affinity used to
//! rectify saliency maps without dense CRF inference.
//!
//! For each pixel the kernel mixes two softmaxes over its existing neighbours,
//! one over negative feature distances and one over negative position
//! distances, and renormalises the mix so the weights form a convex
//! combination. Refinement repeatedly replaces every pixel by the weighted
//! average of its neighbours.

use crate::error::{Error, Result};
use crate::map::{neighbor_index, Image, SaliencyMap, NEIGHBOR_OFFSETS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinerConfig {
    /// Feature smoothness.
    pub omega1: f64,
    /// Position smoothness.
    pub omega2: f64,
    /// Weight of the position branch relative to the feature branch.
    pub omega3: f64,
    pub iterations: usize,
    /// Lower bound applied to both standard deviations.
    pub sigma_floor: f64,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self {
            omega1: 1.0,
            omega2: 1.0,
            omega3: 0.01,
            iterations: 10,
            sigma_floor: 1e-6,
        }
    }
}

impl RefinerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega1 > 0.0 && self.omega1.is_finite()) {
            return Err(Error::param(
                "omega1",
                format!("{} must be > 0", self.omega1),
            ));
        }
        if !(self.omega2 > 0.0 && self.omega2.is_finite()) {
            return Err(Error::param(
                "omega2",
                format!("{} must be > 0", self.omega2),
            ));
        }
        if !(self.omega3 >= 0.0 && self.omega3.is_finite()) {
            return Err(Error::param(
                "omega3",
                format!("{} must be >= 0", self.omega3),
            ));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations", "must be at least 1"));
        }
        if !(self.sigma_floor > 0.0 && self.sigma_floor.is_finite()) {
            return Err(Error::param("sigma_floor", "must be > 0"));
        }
        Ok(())
    }
}

/// Normalised neighbour weights for every pixel.
///
/// `weights[i][k]` is the weight of the neighbour at `NEIGHBOR_OFFSETS[k]`;
/// entries for neighbours outside the grid are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityField {
    width: usize,
    height: usize,
    weights: Vec<[f64; 8]>,
}

impl AffinityField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Raw weight table, one row of eight per pixel.
    pub fn weights(&self) -> &[[f64; 8]] {
        &self.weights
    }

    /// `(neighbour index, weight)` pairs of pixel `i` that lie inside the grid.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (r, c) = (i / self.width, i % self.width);
        NEIGHBOR_OFFSETS
            .iter()
            .zip(self.weights[i].iter())
            .filter_map(move |(&off, &w)| {
                neighbor_index(self.width, self.height, r, c, off).map(|j| (j, w))
            })
    }
}

/// Population standard deviation.
fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values
        .clone()
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    var.sqrt()
}

/// Standard deviation of the neighbour distance multiset `{1 x 4, sqrt(2) x 4}`.
pub fn position_sigma() -> f64 {
    std_dev(
        NEIGHBOR_OFFSETS
            .iter()
            .map(|&(dr, dc)| ((dr * dr + dc * dc) as f64).sqrt()),
    )
}

/// Global standard deviation of all channel values.
pub fn feature_sigma(img: &Image) -> f64 {
    std_dev(img.values().iter().copied())
}

fn softmax_into(logits: &[f64; 8], present: &[bool; 8], out: &mut [f64; 8]) {
    let max = logits
        .iter()
        .zip(present)
        .filter(|(_, &p)| p)
        .map(|(&l, _)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for k in 0..8 {
        out[k] = if present[k] {
            (logits[k] - max).exp()
        } else {
            0.0
        };
        total += out[k];
    }
    for v in out.iter_mut() {
        *v /= total;
    }
}

/// Builds the normalised refiner kernel from the input image.
pub fn affinity_kernel(img: &Image, cfg: &RefinerConfig) -> Result<AffinityField> {
    cfg.validate()?;
    let (width, height) = img.shape();
    if img.pixel_count() < 2 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "the refiner needs at least 2 pixels",
        });
    }
    let sigma_f = feature_sigma(img).max(cfg.sigma_floor);
    let sigma_p = position_sigma().max(cfg.sigma_floor);
    let feat_scale = cfg.omega1 * sigma_f;
    let pos_scale = cfg.omega2 * sigma_p;
    let mix = 1.0 + cfg.omega3;

    let mut weights = Vec::with_capacity(img.pixel_count());
    let mut d_f = [0.0; 8];
    let mut d_p = [0.0; 8];
    let mut present = [false; 8];
    let mut soft_f = [0.0; 8];
    let mut soft_p = [0.0; 8];
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            let center = img.pixel(i);
            for (k, &(dr, dc)) in NEIGHBOR_OFFSETS.iter().enumerate() {
                match neighbor_index(width, height, r, c, (dr, dc)) {
                    Some(j) => {
                        let feat: f64 = center
                            .iter()
                            .zip(img.pixel(j))
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        let pos = ((dr * dr + dc * dc) as f64).sqrt();
                        d_f[k] = -feat / feat_scale;
                        d_p[k] = -pos / pos_scale;
                        present[k] = true;
                    }
                    None => present[k] = false,
                }
            }
            softmax_into(&d_f, &present, &mut soft_f);
            softmax_into(&d_p, &present, &mut soft_p);
            let mut row = [0.0; 8];
            for k in 0..8 {
                row[k] = (soft_f[k] + cfg.omega3 * soft_p[k]) / mix;
            }
            weights.push(row);
        }
    }
    Ok(AffinityField {
        width,
        height,
        weights,
    })
}

fn refine_pass(values: &[f64], aff: &AffinityField, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (j, w) in aff.neighbors(i) {
            let v = values[j];
            acc += w * v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        // the weights sum to 1 only up to rounding; keep the result in the hull
        *o = acc.clamp(lo, hi);
    }
}

/// Applies `iterations` neighbourhood-averaging passes of `aff` to `s`.
pub fn refine(s: &SaliencyMap, aff: &AffinityField, iterations: usize) -> Result<SaliencyMap> {
    s.ensure_same_shape(aff.shape())?;
    if iterations == 0 {
        return Err(Error::param("iterations", "must be at least 1"));
    }
    let mut cur = s.values().to_vec();
    let mut next = vec![0.0; cur.len()];
    for _ in 0..iterations {
        refine_pass(&cur, aff, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    SaliencyMap::new(s.width(), s.height(), cur)
}

/// Prior rectification: builds the kernel from `img` and refines `s` with it.
pub fn prior_rectify(s: &SaliencyMap, img: &Image, cfg: &RefinerConfig) -> Result<SaliencyMap> {
    s.ensure_same_shape(img.shape())?;
    let aff = affinity_kernel(img, cfg)?;
    refine(s, &aff, cfg.iterations)
}
