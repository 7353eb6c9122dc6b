use salient_core::io::{load_map_raw, save_map_raw};
use salient_core::pipeline::*;
use salient_core::SaliencyMap;

fn quick() -> PipelineConfig {
    PipelineConfig::parse(
        "stage1_epochs = 6\nstage2_epochs = 3\nsteps_per_epoch = 10\nscene_size = 32\n",
    )
    .unwrap()
}

#[test]
fn scene_area_fraction_stays_in_bounds() {
    for seed in 0..100 {
        let s = generate_scene(seed, 48, 40, 0.5, 0.1).unwrap();
        let frac = s.descriptor.area_fraction;
        assert!(
            (AREA_FRACTION_RANGE.0..=AREA_FRACTION_RANGE.1).contains(&frac),
            "seed {seed}: {frac}"
        );
        let ones = s
            .ground_truth
            .values()
            .iter()
            .filter(|&&v| v == 1.0)
            .count();
        assert!(ones > 0 && ones < s.ground_truth.len());
        assert!(s.ground_truth.is_binary());
    }
}

#[test]
fn zero_logits_are_stationary() {
    // a flat 0.5 map has no boundary, no consistency error and only hard pixels
    let scene = generate_scene(1, 24, 24, 1.0, 0.0).unwrap();
    let cfg = PipelineConfig::parse("stage1_epochs = 3\nsteps_per_epoch = 5\n").unwrap();
    let out = stage1_from_logits(&scene.image, &cfg, vec![0.0; 24 * 24]).unwrap();
    assert!(out.cue.values().iter().all(|&v| v == 0.5));
    // hard pixels count as 0.5 away from the midpoint, so the masked loss reads 0
    assert_eq!(out.state.loss_trace[0], 0.0);
}

#[test]
fn stage1_loss_trace_is_bounded_without_curriculum() {
    let mut cfg = quick();
    cfg.curriculum = false;
    let scene = generate_scene(4, 32, 32, 0.6, 0.2).unwrap();
    let out = stage1_optimize(&scene.image, &cfg).unwrap();
    let g = cfg.loss.gamma;
    assert_eq!(out.state.loss_trace.len(), cfg.stage1_epochs);
    // the boundary term lies in [-1, 1]
    for &l in &out.state.loss_trace {
        assert!(l.is_finite() && (-g..=0.5 + g + 1.0).contains(&l), "{l}");
    }
}

#[test]
fn stage1_is_deterministic_and_inside_unit_interval() {
    let cfg = quick();
    let scene = generate_scene(9, 32, 32, 0.4, 0.3).unwrap();
    let a = stage1_optimize(&scene.image, &cfg).unwrap();
    let b = stage1_optimize(&scene.image, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.cue.values().iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn consensus_cue_keeps_label_quality() {
    let cfg = PipelineConfig::default();
    for seed in 0..3 {
        let scene = generate_scene(seed, 64, 64, 1.0, 0.0).unwrap();
        let out = stage2_refine(&scene.image, &scene.ground_truth, &cfg, true).unwrap();
        let trace = out.label_mae_trace(&scene.ground_truth).unwrap();
        assert_eq!(trace.len(), cfg.stage2_epochs + 1);
        assert!(trace.iter().all(|&m| m <= 0.02), "seed {seed}: {trace:?}");
    }
}

#[test]
fn labels_stay_in_unit_interval() {
    let cfg = quick();
    let scene = generate_scene(5, 32, 32, 0.4, 0.3).unwrap();
    let cue = stage1_optimize(&scene.image, &cfg).unwrap().cue;
    let out = stage2_refine(&scene.image, &cue, &cfg, true).unwrap();
    for g in &out.labels {
        assert!(g.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn without_spr_the_label_is_fixed() {
    let cfg = quick();
    let scene = generate_scene(6, 32, 32, 0.4, 0.3).unwrap();
    let cue = stage1_optimize(&scene.image, &cfg).unwrap().cue;
    let out = stage2_refine(&scene.image, &cue, &cfg, false).unwrap();
    assert!(out.labels.iter().all(|g| g == &out.labels[0]));
}

#[test]
fn raw_handoff_matches_in_memory() {
    let cfg = quick();
    let scene = generate_scene(8, 32, 32, 0.4, 0.3).unwrap();
    let cue = stage1_optimize(&scene.image, &cfg).unwrap().cue;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cue.raw");
    save_map_raw(&cue, &path).unwrap();
    let reloaded = load_map_raw(&path).unwrap();
    assert_eq!(
        stage2_refine(&scene.image, &reloaded, &cfg, true).unwrap(),
        stage2_refine(&scene.image, &cue, &cfg, true).unwrap()
    );
}

#[test]
fn stage2_rejects_shape_mismatch() {
    let cfg = quick();
    let scene = generate_scene(8, 32, 32, 0.4, 0.3).unwrap();
    let cue = SaliencyMap::filled(31, 32, 0.5).unwrap();
    assert!(stage2_refine(&scene.image, &cue, &cfg, true).is_err());
}

#[test]
fn demo_is_deterministic_and_complete() {
    let cfg = quick();
    let a = run_demo(&cfg, 3).unwrap();
    let b = run_demo(&cfg, 3).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.rows.len(), 12);
    for scene in 0..3 {
        assert_eq!(a.rows.iter().filter(|r| r.scene == scene).count(), 4);
    }
    let dir = tempfile::tempdir().unwrap();
    a.write_to(dir.path()).unwrap();
    let pgms = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "pgm")
        })
        .count();
    assert_eq!(pgms, 3 * 5);
}
