//! Texture vectors and boundary masks over the 8-neighbourhood.

use crate::error::{Error, Result};
use crate::map::{neighbor_index, BinaryMask, Image, SaliencyMap, NEIGHBOR_OFFSETS};

/// Raw difference vectors with norms below this are left as zero.
pub const TEXTURE_NORM_FLOOR: f64 = 1e-8;

/// Default neighbour-difference threshold for [`boundary_mask`].
pub const DEFAULT_BOUNDARY_THRESHOLD: f64 = 0.1;

/// Per-pixel unit vectors of `center - neighbour` differences in the order
/// N, NE, E, SE, S, SW, W, NW. Missing neighbours contribute 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureField {
    width: usize,
    height: usize,
    vectors: Vec<[f64; 8]>,
}

impl TextureField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn vectors(&self) -> &[[f64; 8]] {
        &self.vectors
    }
}

/// Unnormalised differences and their norms.
pub(crate) struct RawTexture {
    pub diffs: Vec<[f64; 8]>,
    pub norms: Vec<f64>,
}

fn check_size(width: usize, height: usize) -> Result<()> {
    if width < 3 || height < 3 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "texture extraction needs at least 3x3 pixels",
        });
    }
    Ok(())
}

pub(crate) fn raw_texture(width: usize, height: usize, values: &[f64]) -> RawTexture {
    let mut diffs = Vec::with_capacity(values.len());
    let mut norms = Vec::with_capacity(values.len());
    for r in 0..height {
        for c in 0..width {
            let center = values[r * width + c];
            let mut d = [0.0; 8];
            for (k, &off) in NEIGHBOR_OFFSETS.iter().enumerate() {
                if let Some(j) = neighbor_index(width, height, r, c, off) {
                    d[k] = center - values[j];
                }
            }
            norms.push(d.iter().map(|x| x * x).sum::<f64>().sqrt());
            diffs.push(d);
        }
    }
    RawTexture { diffs, norms }
}

fn normalise(width: usize, height: usize, raw: RawTexture) -> TextureField {
    let vectors = raw
        .diffs
        .into_iter()
        .zip(raw.norms)
        .map(|(mut d, n)| {
            if n > TEXTURE_NORM_FLOOR {
                d.iter_mut().for_each(|x| *x /= n);
            } else {
                d = [0.0; 8];
            }
            d
        })
        .collect();
    TextureField {
        width,
        height,
        vectors,
    }
}

/// Texture vectors of a saliency map.
pub fn texture_vector(field: &SaliencyMap) -> Result<TextureField> {
    let (w, h) = field.shape();
    check_size(w, h)?;
    Ok(normalise(w, h, raw_texture(w, h, field.values())))
}

/// Texture vectors of the channel-averaged image.
pub fn image_texture(img: &Image) -> Result<TextureField> {
    let (w, h) = img.shape();
    check_size(w, h)?;
    Ok(normalise(w, h, raw_texture(w, h, &img.channel_mean())))
}

/// Bit `i` is set iff some neighbour differs from `S(i)` by more than `threshold`.
pub fn boundary_mask(s: &SaliencyMap, threshold: f64) -> BinaryMask {
    let (w, h) = s.shape();
    let v = s.values();
    let mut bits = Vec::with_capacity(v.len());
    for r in 0..h {
        for c in 0..w {
            let center = v[r * w + c];
            let edge = NEIGHBOR_OFFSETS.iter().any(|&off| {
                neighbor_index(w, h, r, c, off).is_some_and(|j| (center - v[j]).abs() > threshold)
            });
            bits.push(edge);
        }
    }
    BinaryMask::new(w, h, bits).expect("shape taken from a valid map")
}
