//! Two-stage per-pixel pipeline, synthetic scenes and the demo report.

pub mod config;
pub mod demo;
pub mod scene;
pub mod stage;

pub use config::{parse_weights, PipelineConfig};
pub use demo::{run_demo, scene_seed, DemoReport, DemoRow, DemoScene};
pub use scene::{generate_scene, SceneDescriptor, Shape, SyntheticScene, AREA_FRACTION_RANGE};
pub use stage::{
    activation_cue, is_collapsed, logit, polarity_iou, polarity_mae, sigmoid, stage1_from_logits,
    stage1_optimize, stage2_refine, OptimState, Polarity, Stage1Result, Stage2Result,
    COLLAPSE_FRACTION, LOGIT_LIMIT,
};
