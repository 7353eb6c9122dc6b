//! Self-rectifying pseudo-label refinement: a convex fusion of the prior
//! rectification, the model's own prediction and the previous label.

use crate::error::{Error, Result};
use crate::map::SaliencyMap;

/// Fusion weights `(prior, posterior, previous)`; they must sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprWeights {
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
}

impl Default for SprWeights {
    fn default() -> Self {
        Self {
            lambda1: 0.2,
            lambda2: 0.6,
            lambda3: 0.2,
        }
    }
}

impl SprWeights {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    /// Validates non-negativity and the unit sum. Weights are never renormalised.
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        for (name, v) in [
            ("lambda1", lambda1),
            ("lambda2", lambda2),
            ("lambda3", lambda3),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be finite and >= 0")));
            }
        }
        let sum = lambda1 + lambda2 + lambda3;
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::param(
                "spr weights",
                format!("sum to {sum}, expected 1"),
            ));
        }
        Ok(Self {
            lambda1,
            lambda2,
            lambda3,
        })
    }

    pub fn lambdas(&self) -> (f64, f64, f64) {
        (self.lambda1, self.lambda2, self.lambda3)
    }
}

/// The model's own prediction used as the posterior correction signal.
pub fn posterior_rectify(prediction: &SaliencyMap) -> SaliencyMap {
    prediction.clone()
}

/// Pixelwise `l1 * r_pri + l2 * r_post + l3 * g_pre`.
pub fn spr_update(
    r_pri: &SaliencyMap,
    r_post: &SaliencyMap,
    g_pre: &SaliencyMap,
    w: &SprWeights,
) -> Result<SaliencyMap> {
    r_pri.ensure_same_shape(r_post.shape())?;
    r_pri.ensure_same_shape(g_pre.shape())?;
    let (l1, l2, l3) = w.lambdas();
    let values = r_pri
        .values()
        .iter()
        .zip(r_post.values())
        .zip(g_pre.values())
        .map(|((&a, &b), &c)| {
            if a == b && b == c {
                return a;
            }
            let lo = a.min(b).min(c);
            let hi = a.max(b).max(c);
            (l1 * a + l2 * b + l3 * c).clamp(lo, hi)
        })
        .collect();
    SaliencyMap::new(r_pri.width(), r_pri.height(), values)
}
