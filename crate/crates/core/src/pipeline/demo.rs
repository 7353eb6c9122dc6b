//! Curriculum on/off by SPR on/off comparison over seeded synthetic scenes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::save_map;
use crate::map::SaliencyMap;

use super::config::PipelineConfig;
use super::scene::{generate_scene, SyntheticScene};
use super::stage::{is_collapsed, polarity_iou, stage1_optimize, stage2_refine, Polarity};

/// Seed of scene `index` under `master`. Each scene reads its own ChaCha
/// stream, so results do not depend on scheduling.
pub fn scene_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64 + 1);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoRow {
    pub scene: usize,
    pub curriculum: bool,
    pub spr: bool,
    pub stage1_iou: f64,
    pub stage1_collapsed: bool,
    pub iou: f64,
    pub polarity: Polarity,
    pub mae: f64,
    pub label_mae_initial: f64,
    pub label_mae_final: f64,
    pub collapsed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoScene {
    pub index: usize,
    pub seed: u64,
    pub scene: SyntheticScene,
    /// Final predictions in row order (curriculum on/off, SPR on/off).
    pub predictions: Vec<SaliencyMap>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub rows: Vec<DemoRow>,
    pub scenes: Vec<DemoScene>,
}

const CONFIGURATIONS: [(bool, bool); 4] =
    [(true, true), (true, false), (false, true), (false, false)];

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn run_scene(cfg: &PipelineConfig, index: usize) -> Result<(Vec<DemoRow>, DemoScene)> {
    let seed = scene_seed(cfg.seed, index);
    let scene = generate_scene(
        seed,
        cfg.scene_size,
        cfg.scene_size,
        cfg.scene_contrast,
        cfg.scene_noise,
    )?;
    let mut scene_cfg = cfg.clone();
    scene_cfg.seed = seed;
    let gt = &scene.ground_truth;

    let mut rows = Vec::with_capacity(4);
    let mut predictions = Vec::with_capacity(4);
    for curriculum in [true, false] {
        scene_cfg.curriculum = curriculum;
        let stage1 = stage1_optimize(&scene.image, &scene_cfg)?;
        let (stage1_iou, _) = polarity_iou(&stage1.cue, gt)?;
        for use_spr in [true, false] {
            let stage2 = stage2_refine(&scene.image, &stage1.cue, &scene_cfg, use_spr)?;
            let (iou, polarity) = polarity_iou(&stage2.prediction, gt)?;
            let label_trace = stage2.label_mae_trace(gt)?;
            rows.push(DemoRow {
                scene: index,
                curriculum,
                spr: use_spr,
                stage1_iou,
                stage1_collapsed: is_collapsed(&stage1.cue),
                iou,
                polarity,
                mae: crate::metrics::mae(&polarity.orient(&stage2.prediction), gt)?,
                label_mae_initial: label_trace[0],
                label_mae_final: *label_trace.last().expect("at least one label"),
                collapsed: is_collapsed(&stage2.prediction),
            });
            predictions.push(stage2.prediction);
        }
    }
    Ok((
        rows,
        DemoScene {
            index,
            seed,
            scene,
            predictions,
        },
    ))
}

/// Runs every configuration on `scene_count` scenes derived from `cfg.seed`.
pub fn run_demo(cfg: &PipelineConfig, scene_count: usize) -> Result<DemoReport> {
    if scene_count < 2 {
        return Err(Error::param("scene_count", "must be at least 2"));
    }
    cfg.validate()?;
    let per_scene: Vec<(Vec<DemoRow>, DemoScene)> = (0..scene_count)
        .into_par_iter()
        .map(|i| run_scene(cfg, i))
        .collect::<Result<_>>()?;
    let mut report = DemoReport {
        rows: Vec::with_capacity(4 * scene_count),
        scenes: Vec::with_capacity(scene_count),
    };
    for (rows, scene) in per_scene {
        report.rows.extend(rows);
        report.scenes.push(scene);
    }
    Ok(report)
}

impl DemoReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scene,curriculum,spr,stage1_iou,stage1_collapsed,iou,polarity,mae,label_mae_initial,label_mae_final,collapsed\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{},{:.6},{},{:.6},{:.6},{:.6},{}",
                r.scene,
                on_off(r.curriculum),
                on_off(r.spr),
                r.stage1_iou,
                r.stage1_collapsed,
                r.iou,
                r.polarity.as_str(),
                r.mae,
                r.label_mae_initial,
                r.label_mae_final,
                r.collapsed
            );
        }
        out
    }

    /// Per-configuration means and collapse counts.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "curriculum,spr,scenes,mean_iou,mean_mae,stage1_collapses,collapses,label_improved\n",
        );
        for (curriculum, spr) in CONFIGURATIONS {
            let rows: Vec<&DemoRow> = self
                .rows
                .iter()
                .filter(|r| r.curriculum == curriculum && r.spr == spr)
                .collect();
            let n = rows.len() as f64;
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{},{},{}",
                on_off(curriculum),
                on_off(spr),
                rows.len(),
                rows.iter().map(|r| r.iou).sum::<f64>() / n,
                rows.iter().map(|r| r.mae).sum::<f64>() / n,
                rows.iter().filter(|r| r.stage1_collapsed).count(),
                rows.iter().filter(|r| r.collapsed).count(),
                rows.iter()
                    .filter(|r| r.label_mae_final <= r.label_mae_initial)
                    .count()
            );
        }
        out
    }

    /// Stage-1 collapse counts `(with curriculum, without)`.
    pub fn stage1_collapses(&self) -> (usize, usize) {
        let count = |c: bool| {
            self.rows
                .iter()
                .filter(|r| r.curriculum == c && r.spr && r.stage1_collapsed)
                .count()
        };
        (count(true), count(false))
    }

    /// Writes `report.csv`, `summary.csv`, the ground truths and every final map as PGM.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.csv"), self.to_csv())?;
        fs::write(dir.join("summary.csv"), self.summary_csv())?;
        for s in &self.scenes {
            save_map(
                &s.scene.ground_truth,
                dir.join(format!("scene{:03}_gt.pgm", s.index)),
            )?;
            for ((curriculum, spr), map) in CONFIGURATIONS.iter().zip(&s.predictions) {
                let name = format!(
                    "scene{:03}_curriculum-{}_spr-{}.pgm",
                    s.index,
                    on_off(*curriculum),
                    on_off(*spr)
                );
                save_map(map, dir.join(name))?;
            }
        }
        Ok(())
    }
}
