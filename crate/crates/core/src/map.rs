//! Dense per-pixel fields shared by every other module.
//!
//! All fields are row-major: pixel `(r, c)` lives at index `r * width + c`.

use crate::error::{Error, Result};

/// Neighbor offsets `(dr, dc)` in the fixed order N, NE, E, SE, S, SW, W, NW.
pub const NEIGHBOR_OFFSETS: [(isize, isize); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

/// Index of the neighbor of `(r, c)` at `offset`, if it lies inside the grid.
#[inline]
pub fn neighbor_index(
    width: usize,
    height: usize,
    r: usize,
    c: usize,
    offset: (isize, isize),
) -> Option<usize> {
    let nr = r as isize + offset.0;
    let nc = c as isize + offset.1;
    if nr < 0 || nc < 0 || nr >= height as isize || nc >= width as isize {
        None
    } else {
        Some(nr as usize * width + nc as usize)
    }
}

fn check_dims(width: usize, height: usize) -> Result<usize> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "width and height must be at least 1",
        });
    }
    width.checked_mul(height).ok_or(Error::InvalidDimensions {
        width,
        height,
        reason: "pixel count overflows",
    })
}

fn check_unit_range(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(index) => Err(Error::OutOfRange {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// A saliency field with every value in `[0, 1]`.
///
/// Predictions, pseudo-labels and ground-truth masks all use this type.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let n = check_dims(width, height)?;
        if values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: values.len(),
            });
        }
        check_unit_range(&values)?;
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        let n = check_dims(width, height)?;
        Self::new(width, height, vec![value; n])
    }

    /// Builds a map from a closure over `(row, col)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(width, height, values)
    }

    /// Averages the channels of `img` into a single saliency field.
    pub fn from_image(img: &Image) -> Self {
        if img.channels() == 1 {
            return Self {
                width: img.width(),
                height: img.height(),
                values: img.values().to_vec(),
            };
        }
        Self {
            width: img.width(),
            height: img.height(),
            values: img.channel_mean(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.width + c]
    }

    /// Errors unless `other` has the same width and height.
    pub fn ensure_same_shape(&self, other: (usize, usize)) -> Result<()> {
        if self.shape() != other {
            return Err(Error::ShapeMismatch {
                left: self.shape(),
                right: other,
            });
        }
        Ok(())
    }

    /// `1 - v` at every pixel.
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| 1.0 - v).collect(),
        }
    }

    /// Mirror left-right.
    pub fn flipped_horizontal(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for row in self.values.chunks(self.width) {
            values.extend(row.iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            values,
        }
    }

    /// Thresholds at `t` (`v >= t` is foreground).
    pub fn binarize(&self, t: f64) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.values.iter().map(|&v| v >= t).collect(),
        }
    }

    /// True when every value is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// A multi-channel image with interleaved channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        let n = check_dims(width, height)?;
        if channels == 0 {
            return Err(Error::param("channels", "must be at least 1"));
        }
        let expected = n * channels;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: values.len(),
            });
        }
        check_unit_range(&values)?;
        Ok(Self {
            width,
            height,
            channels,
            values,
        })
    }

    /// Single-channel image carrying the same values as `map`.
    pub fn from_map(map: &SaliencyMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            channels: 1,
            values: map.values().to_vec(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Channel values of pixel `i`.
    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.values[i * self.channels..(i + 1) * self.channels]
    }

    /// Per-pixel mean over channels.
    pub fn channel_mean(&self) -> Vec<f64> {
        let c = self.channels as f64;
        self.values
            .chunks(self.channels)
            .map(|px| px.iter().sum::<f64>() / c)
            .collect()
    }
}

/// A row-major boolean field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        let n = check_dims(width, height)?;
        if bits.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn ones(width: usize, height: usize) -> Result<Self> {
        let n = check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            bits: vec![true; n],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// 1.0 for set bits, 0.0 otherwise.
    pub fn to_map(&self) -> SaliencyMap {
        SaliencyMap {
            width: self.width,
            height: self.height,
            values: self
                .bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Derivative of a scalar loss with respect to each pixel of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Gradient {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let n = check_dims(width, height)?;
        if values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradient, scale: f64) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }
}

/// Per-pixel `(row, col)` coordinates in row-major order.
pub fn position_grid(width: usize, height: usize) -> Result<Vec<(f64, f64)>> {
    check_dims(width, height)?;
    Ok((0..height)
        .flat_map(|r| (0..width).map(move |c| (r as f64, c as f64)))
        .collect())
}
