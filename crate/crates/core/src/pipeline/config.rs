//! Pipeline configuration and its `key = value` text format.

use std::fmt::Write as _;

use crate::curriculum::CurriculumSchedule;
use crate::error::{Error, Result};
use crate::losses::{LossWeights, MAX_SCALE, MIN_SCALE};
use crate::refiner::RefinerConfig;
use crate::spr::SprWeights;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Hard-sample schedule; its total epoch count is `stage1_epochs`.
    pub schedule: CurriculumSchedule,
    /// When false the hard-sample threshold is held at zero.
    pub curriculum: bool,
    pub refiner: RefinerConfig,
    pub spr: SprWeights,
    pub loss: LossWeights,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    pub steps_per_epoch: usize,
    pub lr1: f64,
    pub lr2: f64,
    pub scale_range: (f64, f64),
    pub seed: u64,
    /// Logit gain applied to the normalised image-contrast cue at stage-1 start.
    /// Negative values start with darker-than-midpoint pixels salient.
    pub init_gain: f64,
    /// Stage-2 logits start at `logit(clamp(cue, label_eps, 1 - label_eps))`.
    pub label_eps: f64,
    /// Synthetic scene parameters used by the demo.
    pub scene_size: usize,
    pub scene_contrast: f64,
    pub scene_noise: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let stage1_epochs = 20;
        Self {
            schedule: CurriculumSchedule::with_total_epochs(stage1_epochs)
                .expect("default schedule"),
            curriculum: true,
            refiner: RefinerConfig::default(),
            spr: SprWeights::default(),
            loss: LossWeights::default(),
            stage1_epochs,
            stage2_epochs: 10,
            steps_per_epoch: 50,
            lr1: 0.5,
            lr2: 0.5,
            scale_range: (0.75, 1.25),
            seed: 0,
            init_gain: -1.0,
            label_eps: 1e-3,
            scene_size: 64,
            scene_contrast: 0.4,
            scene_noise: 0.3,
        }
    }
}

const KEYS: &[&str] = &[
    "p0",
    "slope",
    "curriculum",
    "omega1",
    "omega2",
    "omega3",
    "refiner_iterations",
    "sigma_floor",
    "spr_weights",
    "gamma",
    "boundary_threshold",
    "stage1_epochs",
    "stage2_epochs",
    "steps_per_epoch",
    "lr1",
    "lr2",
    "scale_min",
    "scale_max",
    "seed",
    "init_gain",
    "label_eps",
    "scene_size",
    "scene_contrast",
    "scene_noise",
];

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("{v} must be > 0")))
    }
}

impl PipelineConfig {
    /// The active schedule: the configured one, or an all-zero one when the
    /// curriculum is off.
    pub fn effective_schedule(&self) -> CurriculumSchedule {
        if self.curriculum {
            self.schedule
        } else {
            CurriculumSchedule::disabled(self.stage1_epochs).expect("stage1_epochs validated")
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage1_epochs == 0 {
            return Err(Error::param("stage1_epochs", "must be at least 1"));
        }
        if self.stage2_epochs == 0 {
            return Err(Error::param("stage2_epochs", "must be at least 1"));
        }
        if self.steps_per_epoch == 0 {
            return Err(Error::param("steps_per_epoch", "must be at least 1"));
        }
        if self.schedule.total_epochs() != self.stage1_epochs {
            return Err(Error::param(
                "schedule",
                format!(
                    "total epochs {} differ from stage1_epochs {}",
                    self.schedule.total_epochs(),
                    self.stage1_epochs
                ),
            ));
        }
        positive("lr1", self.lr1)?;
        positive("lr2", self.lr2)?;
        let (lo, hi) = self.scale_range;
        if !(MIN_SCALE <= lo && lo <= hi && hi <= MAX_SCALE) {
            return Err(Error::param(
                "scale_range",
                format!("[{lo}, {hi}] must lie within [{MIN_SCALE}, {MAX_SCALE}]"),
            ));
        }
        if !self.init_gain.is_finite() {
            return Err(Error::param("init_gain", "must be finite"));
        }
        if !(self.label_eps > 0.0 && self.label_eps < 0.5) {
            return Err(Error::param("label_eps", "must lie in (0, 0.5)"));
        }
        if self.scene_size < 16 {
            return Err(Error::param("scene_size", "must be at least 16"));
        }
        if !(self.scene_contrast > 0.0 && self.scene_contrast <= 1.0) {
            return Err(Error::param("scene_contrast", "must lie in (0, 1]"));
        }
        if !(0.0..=0.3).contains(&self.scene_noise) {
            return Err(Error::param("scene_noise", "must lie in [0, 0.3]"));
        }
        self.refiner.validate()?;
        self.loss.validate()
    }

    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut p0 = cfg.schedule.p0();
        let mut slope = cfg.schedule.slope();
        let mut spr = cfg.spr.lambdas();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config {
                line: line_no,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let float = || {
                value
                    .parse::<f64>()
                    .map_err(|_| err(format!("`{key}` expects a number, found {value:?}")))
            };
            let int = || {
                value.parse::<usize>().map_err(|_| {
                    err(format!(
                        "`{key}` expects a non-negative integer, found {value:?}"
                    ))
                })
            };
            match key {
                "p0" => p0 = float()?,
                "slope" => slope = float()?,
                "curriculum" => {
                    cfg.curriculum = value.parse().map_err(|_| {
                        err(format!(
                            "`curriculum` expects true or false, found {value:?}"
                        ))
                    })?
                }
                "omega1" => cfg.refiner.omega1 = float()?,
                "omega2" => cfg.refiner.omega2 = float()?,
                "omega3" => cfg.refiner.omega3 = float()?,
                "refiner_iterations" => cfg.refiner.iterations = int()?,
                "sigma_floor" => cfg.refiner.sigma_floor = float()?,
                "spr_weights" => spr = parse_weights(value).map_err(err)?,
                "gamma" => cfg.loss.gamma = float()?,
                "boundary_threshold" => cfg.loss.boundary_threshold = float()?,
                "stage1_epochs" => cfg.stage1_epochs = int()?,
                "stage2_epochs" => cfg.stage2_epochs = int()?,
                "steps_per_epoch" => cfg.steps_per_epoch = int()?,
                "lr1" => cfg.lr1 = float()?,
                "lr2" => cfg.lr2 = float()?,
                "scale_min" => cfg.scale_range.0 = float()?,
                "scale_max" => cfg.scale_range.1 = float()?,
                "seed" => {
                    cfg.seed = value.parse().map_err(|_| {
                        err(format!(
                            "`seed` expects an unsigned integer, found {value:?}"
                        ))
                    })?
                }
                "init_gain" => cfg.init_gain = float()?,
                "label_eps" => cfg.label_eps = float()?,
                "scene_size" => cfg.scene_size = int()?,
                "scene_contrast" => cfg.scene_contrast = float()?,
                "scene_noise" => cfg.scene_noise = float()?,
                other => {
                    return Err(err(format!(
                        "unknown key `{other}`; known keys: {}",
                        KEYS.join(", ")
                    )))
                }
            }
        }
        if cfg.stage1_epochs == 0 {
            return Err(Error::param("stage1_epochs", "must be at least 1"));
        }
        cfg.schedule = CurriculumSchedule::new(p0, slope, cfg.stage1_epochs)?;
        cfg.spr = SprWeights::new(spr.0, spr.1, spr.2)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Renders every key in the format accepted by [`PipelineConfig::parse`].
    pub fn to_text(&self) -> String {
        let (l1, l2, l3) = self.spr.lambdas();
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("p0", self.schedule.p0().to_string());
        kv("slope", self.schedule.slope().to_string());
        kv("curriculum", self.curriculum.to_string());
        kv("omega1", self.refiner.omega1.to_string());
        kv("omega2", self.refiner.omega2.to_string());
        kv("omega3", self.refiner.omega3.to_string());
        kv("refiner_iterations", self.refiner.iterations.to_string());
        kv("sigma_floor", self.refiner.sigma_floor.to_string());
        kv("spr_weights", format!("{l1},{l2},{l3}"));
        kv("gamma", self.loss.gamma.to_string());
        kv(
            "boundary_threshold",
            self.loss.boundary_threshold.to_string(),
        );
        kv("stage1_epochs", self.stage1_epochs.to_string());
        kv("stage2_epochs", self.stage2_epochs.to_string());
        kv("steps_per_epoch", self.steps_per_epoch.to_string());
        kv("lr1", self.lr1.to_string());
        kv("lr2", self.lr2.to_string());
        kv("scale_min", self.scale_range.0.to_string());
        kv("scale_max", self.scale_range.1.to_string());
        kv("seed", self.seed.to_string());
        kv("init_gain", self.init_gain.to_string());
        kv("label_eps", self.label_eps.to_string());
        kv("scene_size", self.scene_size.to_string());
        kv("scene_contrast", self.scene_contrast.to_string());
        kv("scene_noise", self.scene_noise.to_string());
        out
    }
}

/// Parses `a,b,c` into three weights.
pub fn parse_weights(value: &str) -> std::result::Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!(
            "expected three comma-separated weights, found {value:?}"
        ));
    }
    let mut w = [0.0; 3];
    for (slot, p) in w.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| format!("bad weight {p:?}"))?;
    }
    Ok((w[0], w[1], w[2]))
}
