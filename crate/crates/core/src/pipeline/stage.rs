//! The two optimisation stages, run directly on per-pixel logits.
//!
//! Stage 1 distils a saliency cue under the cue-extractor objective while
//! the curriculum hides hard pixels. Stage 2 trains a fresh prediction on
//! pseudo-labels that are re-fused after every epoch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::curriculum::hard_sample_mask;
use crate::error::{Error, Result};
use crate::losses::{image_texture, sce_total_with_texture, sd_total, ScaleTransform};
use crate::map::{Image, SaliencyMap};
use crate::metrics::mae;
use crate::refiner::{affinity_kernel, refine};
use crate::spr::{posterior_rectify, spr_update};

use super::config::PipelineConfig;

/// Logits are kept within this magnitude so `sigmoid` stays strictly inside (0, 1).
pub const LOGIT_LIMIT: f64 = 30.0;

/// Fraction of pixels on one side of 0.5 above which a map counts as collapsed.
pub const COLLAPSE_FRACTION: f64 = 0.95;

const CUE_PERCENTILES: (f64, f64) = (0.01, 0.99);
const CUE_SPREAD_FLOOR: f64 = 1e-6;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Per-pixel optimisation state.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    width: usize,
    height: usize,
    logits: Vec<f64>,
    pub epoch: usize,
    pub loss_trace: Vec<f64>,
}

impl OptimState {
    pub fn from_logits(width: usize, height: usize, logits: Vec<f64>) -> Result<Self> {
        if logits.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: logits.len(),
            });
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::param("logits", "must be finite"));
        }
        Ok(Self {
            width,
            height,
            logits: logits
                .into_iter()
                .map(|z| z.clamp(-LOGIT_LIMIT, LOGIT_LIMIT))
                .collect(),
            epoch: 0,
            loss_trace: Vec::new(),
        })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn saliency(&self) -> SaliencyMap {
        let values = self.logits.iter().map(|&z| sigmoid(z)).collect();
        SaliencyMap::new(self.width, self.height, values).expect("sigmoid stays in (0, 1)")
    }

    /// One descent step given `dL/dS` at `s`; `lr` is per pixel, so the mean
    /// losses' `1/N` is undone by scaling with the pixel count.
    fn step(&mut self, s: &SaliencyMap, grad: &[f64], lr: f64) {
        let scale = lr * self.logits.len() as f64;
        for ((z, &p), &g) in self.logits.iter_mut().zip(s.values()).zip(grad) {
            *z = (*z - scale * g * p * (1.0 - p)).clamp(-LOGIT_LIMIT, LOGIT_LIMIT);
        }
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Image-contrast activation: channel-mean intensity centred between its 1st
/// and 99th percentiles and scaled by half their spread.
///
/// Positive where the pixel is brighter than the midpoint. A constant image
/// gives an all-zero cue.
///
/// The boundary term is minimised when map texture opposes image texture, so
/// the default configuration starts from the negated cue.
pub fn activation_cue(img: &Image) -> Vec<f64> {
    let gray = img.channel_mean();
    let mut sorted = gray.clone();
    sorted.sort_by(f64::total_cmp);
    let lo = percentile(&sorted, CUE_PERCENTILES.0);
    let hi = percentile(&sorted, CUE_PERCENTILES.1);
    let half = (hi - lo) / 2.0;
    if half < CUE_SPREAD_FLOOR {
        return vec![0.0; gray.len()];
    }
    let mid = (hi + lo) / 2.0;
    gray.iter().map(|g| (g - mid) / half).collect()
}

fn check_finite(value: f64, stage: &'static str, epoch: usize, step: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { stage, epoch, step })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Result {
    pub cue: SaliencyMap,
    pub state: OptimState,
}

/// Stage 1 starting from explicit logits.
pub fn stage1_from_logits(
    image: &Image,
    cfg: &PipelineConfig,
    logits: Vec<f64>,
) -> Result<Stage1Result> {
    cfg.validate()?;
    let (w, h) = image.shape();
    let mut state = OptimState::from_logits(w, h, logits)?;
    let texture = image_texture(image)?;
    let schedule = cfg.effective_schedule();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    for epoch in 0..cfg.stage1_epochs {
        state.epoch = epoch;
        let p = schedule.threshold_at(epoch);
        let mask = hard_sample_mask(&state.saliency(), p)?;
        let transform = ScaleTransform::draw(w, h, cfg.scale_range, &mut rng)?;
        let mut epoch_loss = 0.0;
        for step in 0..cfg.steps_per_epoch {
            let s = state.saliency();
            let s_hat = transform.round_trip(&s)?;
            let loss = sce_total_with_texture(&s, &s_hat, &texture, &cfg.loss, &mask)?;
            check_finite(loss.value, "stage1", epoch, step)?;
            epoch_loss += loss.value;
            state.step(&s, loss.gradient.values(), cfg.lr1);
        }
        state
            .loss_trace
            .push(epoch_loss / cfg.steps_per_epoch as f64);
    }
    state.epoch = cfg.stage1_epochs;
    Ok(Stage1Result {
        cue: state.saliency(),
        state,
    })
}

/// Stage 1: distils a saliency cue from `image`, starting from
/// `init_gain * activation_cue(image)` logits.
pub fn stage1_optimize(image: &Image, cfg: &PipelineConfig) -> Result<Stage1Result> {
    let logits = activation_cue(image)
        .into_iter()
        .map(|a| cfg.init_gain * a)
        .collect();
    stage1_from_logits(image, cfg, logits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Result {
    pub prediction: SaliencyMap,
    pub pseudo_label: SaliencyMap,
    /// Label before training, then after every epoch.
    pub labels: Vec<SaliencyMap>,
    pub loss_trace: Vec<f64>,
}

impl Stage2Result {
    /// MAE of every recorded label against `gt`, using the polarity that fits
    /// the initial label best.
    pub fn label_mae_trace(&self, gt: &SaliencyMap) -> Result<Vec<f64>> {
        let (_, polarity) = polarity_mae(&self.labels[0], gt)?;
        let gt = polarity.orient(gt);
        self.labels.iter().map(|g| mae(g, &gt)).collect()
    }
}

/// Stage 2: trains on pseudo-labels initialised from the refined `cue`.
/// With `use_spr` false the initial label is kept fixed.
pub fn stage2_refine(
    image: &Image,
    cue: &SaliencyMap,
    cfg: &PipelineConfig,
    use_spr: bool,
) -> Result<Stage2Result> {
    cfg.validate()?;
    cue.ensure_same_shape(image.shape())?;
    let (w, h) = image.shape();
    let affinity = affinity_kernel(image, &cfg.refiner)?;
    let mut label = refine(cue, &affinity, cfg.refiner.iterations)?;
    let logits = cue
        .values()
        .iter()
        .map(|&c| logit(c.clamp(cfg.label_eps, 1.0 - cfg.label_eps)))
        .collect();
    let mut state = OptimState::from_logits(w, h, logits)?;
    // a separate stream from stage 1 so the two stages draw independent scales
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut labels = vec![label.clone()];

    for epoch in 0..cfg.stage2_epochs {
        state.epoch = epoch;
        let transform = ScaleTransform::draw(w, h, cfg.scale_range, &mut rng)?;
        let mut epoch_loss = 0.0;
        for step in 0..cfg.steps_per_epoch {
            let s = state.saliency();
            let s_hat = transform.round_trip(&s)?;
            let loss = sd_total(&s, &s_hat, &label)?;
            check_finite(loss.value, "stage2", epoch, step)?;
            epoch_loss += loss.value;
            state.step(&s, loss.gradient.values(), cfg.lr2);
        }
        state
            .loss_trace
            .push(epoch_loss / cfg.steps_per_epoch as f64);
        if use_spr {
            let s = state.saliency();
            let prior = refine(&s, &affinity, cfg.refiner.iterations)?;
            label = spr_update(&prior, &posterior_rectify(&s), &label, &cfg.spr)?;
        }
        labels.push(label.clone());
    }
    state.epoch = cfg.stage2_epochs;
    Ok(Stage2Result {
        prediction: state.saliency(),
        pseudo_label: label,
        labels,
        loss_trace: state.loss_trace,
    })
}

/// Which orientation of a map was scored against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Direct,
    Inverted,
}

impl Polarity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Polarity::Direct => "direct",
            Polarity::Inverted => "inverted",
        }
    }

    pub fn orient(&self, map: &SaliencyMap) -> SaliencyMap {
        match self {
            Polarity::Direct => map.clone(),
            Polarity::Inverted => map.inverted(),
        }
    }
}

/// IoU of two masks given as 0/1 maps; 1 when both are empty.
fn binary_iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Best IoU of `S >= 0.5` (or its complement) against a binary ground truth.
pub fn polarity_iou(s: &SaliencyMap, gt: &SaliencyMap) -> Result<(f64, Polarity)> {
    s.ensure_same_shape(gt.shape())?;
    let pred = s.binarize(0.5);
    let truth = gt.binarize(0.5);
    let direct = binary_iou(pred.bits(), truth.bits());
    let flipped: Vec<bool> = pred.bits().iter().map(|b| !b).collect();
    let inverted = binary_iou(&flipped, truth.bits());
    Ok(if inverted > direct {
        (inverted, Polarity::Inverted)
    } else {
        (direct, Polarity::Direct)
    })
}

/// Smaller of `mae(s, gt)` and `mae(1 - s, gt)`.
pub fn polarity_mae(s: &SaliencyMap, gt: &SaliencyMap) -> Result<(f64, Polarity)> {
    let direct = mae(s, gt)?;
    let inverted = mae(&s.inverted(), gt)?;
    Ok(if inverted < direct {
        (inverted, Polarity::Inverted)
    } else {
        (direct, Polarity::Direct)
    })
}

/// True when more than 95% of pixels fall on one side of 0.5.
pub fn is_collapsed(s: &SaliencyMap) -> bool {
    let above = s.values().iter().filter(|&&v| v >= 0.5).count() as f64;
    let n = s.len() as f64;
    above > COLLAPSE_FRACTION * n || (n - above) > COLLAPSE_FRACTION * n
}
