//! Saliency-map algorithms: curriculum distilling losses, the affinity
//! refiner, pseudo-label fusion, adapter tuning and evaluation metrics.

pub mod adapter;
pub mod curriculum;
pub mod error;
pub mod gradcheck;
pub mod io;
pub mod losses;
pub mod map;
pub mod metrics;
pub mod pipeline;
pub mod refiner;
pub mod spr;

pub use curriculum::{CurriculumSchedule, LossResult};
pub use error::{Error, Result};
pub use losses::LossWeights;
pub use map::{BinaryMask, Gradient, Image, SaliencyMap};
pub use metrics::MetricsReport;
pub use pipeline::PipelineConfig;
pub use refiner::{AffinityField, RefinerConfig};
pub use spr::SprWeights;
