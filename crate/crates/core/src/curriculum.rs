//! Progressive curriculum for saliency distilling.
//!
//! Pixels whose prediction sits within `p` of 0.5 are treated as hard and
//! removed from back-propagation. The threshold `p` starts at `p0` and decays
//! linearly with the epoch until every pixel participates.

use crate::error::{Error, Result};
use crate::map::{BinaryMask, Gradient, SaliencyMap};

/// Linear-decay threshold schedule `max(0, p0 - slope * epoch / total_epochs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumSchedule {
    p0: f64,
    slope: f64,
    total_epochs: usize,
}

impl CurriculumSchedule {
    pub const DEFAULT_P0: f64 = 0.2;
    pub const DEFAULT_SLOPE: f64 = 0.6;

    pub fn new(p0: f64, slope: f64, total_epochs: usize) -> Result<Self> {
        if !(0.0..=0.5).contains(&p0) {
            return Err(Error::param("p0", format!("{p0} is outside [0, 0.5]")));
        }
        if !(slope >= 0.0 && slope.is_finite()) {
            return Err(Error::param(
                "slope",
                format!("{slope} must be finite and >= 0"),
            ));
        }
        if total_epochs == 0 {
            return Err(Error::param("total_epochs", "must be at least 1"));
        }
        Ok(Self {
            p0,
            slope,
            total_epochs,
        })
    }

    /// Default `p0` and slope over `total_epochs`.
    pub fn with_total_epochs(total_epochs: usize) -> Result<Self> {
        Self::new(Self::DEFAULT_P0, Self::DEFAULT_SLOPE, total_epochs)
    }

    /// A schedule whose threshold is zero at every epoch.
    pub fn disabled(total_epochs: usize) -> Result<Self> {
        Self::new(0.0, 0.0, total_epochs)
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn total_epochs(&self) -> usize {
        self.total_epochs
    }

    /// Hard-sample threshold at `epoch`.
    ///
    /// The product `slope * epoch / total_epochs` is rounded, so a result
    /// within a few ulps of zero is snapped to exactly zero; otherwise the
    /// schedule would linger at ~1e-17 at the epoch where it should vanish.
    pub fn threshold_at(&self, epoch: usize) -> f64 {
        let decay = self.slope * epoch as f64 / self.total_epochs as f64;
        let p = self.p0 - decay;
        if p <= 4.0 * f64::EPSILON * self.p0 {
            0.0
        } else {
            p
        }
    }

    /// First epoch at which the threshold is zero, if the schedule decays.
    pub fn zero_epoch(&self) -> Option<usize> {
        (0..=self.total_epochs * 8 + 1).find(|&e| self.threshold_at(e) == 0.0)
    }
}

/// Easy-sample mask: bit `i` is cleared iff `|S(i) - 0.5| < p`.
pub fn hard_sample_mask(s: &SaliencyMap, p: f64) -> Result<BinaryMask> {
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::param("p", format!("{p} is outside [0, 0.5]")));
    }
    let bits = s.values().iter().map(|&v| (v - 0.5).abs() >= p).collect();
    BinaryMask::new(s.width(), s.height(), bits)
}

/// Value and gradient of a loss with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub gradient: Gradient,
}

impl LossResult {
    pub fn zero(width: usize, height: usize) -> Self {
        Self {
            value: 0.0,
            gradient: Gradient::zeros(width, height),
        }
    }

    /// `self + scale * other`, value and gradient alike.
    pub fn add_scaled(mut self, other: &LossResult, scale: f64) -> Self {
        self.value += scale * other.value;
        self.gradient.add_scaled(&other.gradient, scale);
        self
    }
}

#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Masked saliency-distilling loss `0.5 - mean |M(i) S(i) - 0.5|`.
///
/// Masked pixels contribute `|0 - 0.5|` to the sum and nothing to the
/// gradient. With an all-ones mask this is the plain distilling loss.
pub fn pcl_sd_loss(s: &SaliencyMap, mask: &BinaryMask) -> Result<LossResult> {
    s.ensure_same_shape(mask.shape())?;
    let n = s.len() as f64;
    let mut sum = 0.0;
    let mut grad = Vec::with_capacity(s.len());
    for (&v, &keep) in s.values().iter().zip(mask.bits()) {
        if keep {
            let d = v - 0.5;
            sum += d.abs();
            grad.push(-sign(d) / n);
        } else {
            sum += 0.5;
            grad.push(0.0);
        }
    }
    Ok(LossResult {
        value: 0.5 - sum / n,
        gradient: Gradient::from_values(s.width(), s.height(), grad)?,
    })
}

/// Unmasked distilling loss `0.5 - mean |S(i) - 0.5|`.
pub fn saliency_distilling_loss(s: &SaliencyMap) -> Result<LossResult> {
    pcl_sd_loss(s, &BinaryMask::ones(s.width(), s.height())?)
}
