//! Brute-force reference implementations and random instance generators.
//!
//! Everything here is written from the definitions, without calling the
//! library routine it is compared against.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use salient_core::{Image, RefinerConfig, SaliencyMap};

/// (dr, dc) in N, NE, E, SE, S, SW, W, NW order.
pub const OFFSETS: [(i64, i64); 8] = [
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
];

fn inside(w: usize, h: usize, r: i64, c: i64) -> bool {
    r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w
}

pub fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize) -> SaliencyMap {
    SaliencyMap::new(w, h, (0..w * h).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, channels: usize) -> Image {
    Image::new(
        w,
        h,
        channels,
        (0..w * h * channels).map(|_| rng.gen::<f64>()).collect(),
    )
    .unwrap()
}

pub fn random_binary(rng: &mut ChaCha8Rng, w: usize, h: usize) -> SaliencyMap {
    loop {
        let v: Vec<f64> = (0..w * h)
            .map(|_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 })
            .collect();
        let ones = v.iter().filter(|&&x| x == 1.0).count();
        if ones > 0 && ones < v.len() {
            return SaliencyMap::new(w, h, v).unwrap();
        }
    }
}

// ---------- refiner ----------

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Dense row-stochastic refiner matrix built pixel by pixel.
pub fn oracle_affinity_matrix(img: &Image, cfg: &RefinerConfig) -> Vec<Vec<f64>> {
    let (w, h) = img.shape();
    let ch = img.channels();
    let n = w * h;
    let sigma_f = population_std(img.values()).max(cfg.sigma_floor);
    let dists: Vec<f64> = OFFSETS
        .iter()
        .map(|&(dr, dc)| ((dr * dr + dc * dc) as f64).sqrt())
        .collect();
    let sigma_p = population_std(&dists).max(cfg.sigma_floor);
    let px = |r: usize, c: usize| &img.values()[(r * w + c) * ch..(r * w + c + 1) * ch];

    let mut m = vec![vec![0.0; n]; n];
    for r in 0..h {
        for c in 0..w {
            let mut feat = Vec::new();
            let mut pos = Vec::new();
            let mut idx = Vec::new();
            for &(dr, dc) in &OFFSETS {
                let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                if !inside(w, h, rr, cc) {
                    continue;
                }
                let (rr, cc) = (rr as usize, cc as usize);
                let d: f64 = px(r, c)
                    .iter()
                    .zip(px(rr, cc))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                feat.push((-d / (cfg.omega1 * sigma_f)).exp());
                pos.push((-((dr * dr + dc * dc) as f64).sqrt() / (cfg.omega2 * sigma_p)).exp());
                idx.push(rr * w + cc);
            }
            let zf: f64 = feat.iter().sum();
            let zp: f64 = pos.iter().sum();
            for k in 0..idx.len() {
                m[r * w + c][idx[k]] +=
                    (feat[k] / zf + cfg.omega3 * pos[k] / zp) / (1.0 + cfg.omega3);
            }
        }
    }
    m
}

/// `iterations` dense matrix-vector products.
pub fn oracle_refine(matrix: &[Vec<f64>], s: &[f64], iterations: usize) -> Vec<f64> {
    let mut cur = s.to_vec();
    for _ in 0..iterations {
        cur = matrix
            .iter()
            .map(|row| row.iter().zip(&cur).map(|(a, b)| a * b).sum())
            .collect();
    }
    cur
}

// ---------- metrics ----------

pub fn oracle_mae(p: &[f64], g: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..p.len() {
        total += (p[i] - g[i]).abs();
    }
    total / p.len() as f64
}

/// Confusion matrix at every one of the 256 thresholds.
pub fn oracle_f_measure(p: &[f64], g: &[f64]) -> f64 {
    let beta2 = 0.3;
    let mut sum = 0.0;
    for k in 0..256 {
        let t = k as f64 / 255.0;
        let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
        for i in 0..p.len() {
            let pred = p[i] >= t;
            let truth = g[i] == 1.0;
            match (pred, truth) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fneg += 1.0,
                _ => {}
            }
        }
        if tp + fp == 0.0 {
            continue;
        }
        let precision = tp / (tp + fp);
        let recall = tp / (tp + fneg);
        let denom = beta2 * precision + recall;
        if denom > 0.0 {
            sum += (1.0 + beta2) * precision * recall / denom;
        }
    }
    sum / 256.0
}

pub fn oracle_e_measure(p: &[f64], g: &[f64]) -> f64 {
    let n = p.len() as f64;
    let t = (2.0 * p.iter().sum::<f64>() / n).min(1.0);
    let bin: Vec<f64> = p.iter().map(|&v| if v >= t { 1.0 } else { 0.0 }).collect();
    let mb = bin.iter().sum::<f64>() / n;
    let mg = g.iter().sum::<f64>() / n;
    let mut total = 0.0;
    for i in 0..p.len() {
        let fp = bin[i] - mb;
        let fg = g[i] - mg;
        let xi = if mg == 0.0 || mg == 1.0 {
            if fp == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            2.0 * fg * fp / (fg * fg + fp * fp + 1e-8)
        };
        total += (xi + 1.0).powi(2) / 4.0;
    }
    total / n
}

// ---------- boundary texture matching ----------

fn oracle_texture(values: &[f64], w: usize, h: usize, r: usize, c: usize) -> [f64; 8] {
    let mut d = [0.0; 8];
    for (k, &(dr, dc)) in OFFSETS.iter().enumerate() {
        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
        if inside(w, h, rr, cc) {
            d[k] = values[r * w + c] - values[rr as usize * w + cc as usize];
        }
    }
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-8 {
        for x in &mut d {
            *x /= norm;
        }
    } else {
        d = [0.0; 8];
    }
    d
}

/// Mean over boundary pixels of the texture inner product.
pub fn oracle_btm(s: &SaliencyMap, img: &Image, threshold: f64) -> f64 {
    let (w, h) = s.shape();
    let gray: Vec<f64> = (0..w * h)
        .map(|i| img.pixel(i).iter().sum::<f64>() / img.channels() as f64)
        .collect();
    let v = s.values();
    let (mut total, mut count) = (0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            let mut edge = false;
            for &(dr, dc) in &OFFSETS {
                let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                if inside(w, h, rr, cc)
                    && (v[r * w + c] - v[rr as usize * w + cc as usize]).abs() > threshold
                {
                    edge = true;
                }
            }
            if edge {
                count += 1.0;
                let ts = oracle_texture(v, w, h, r, c);
                let ta = oracle_texture(&gray, w, h, r, c);
                total += ts.iter().zip(&ta).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
    if count == 0.0 {
        0.0
    } else {
        total / count
    }
}

/// A map in [0.01, 0.99] whose boundary mask and texture normalisation are locally constant:
/// every neighbour difference is at least `margin` away from `threshold`,
/// and every texture norm exceeds `margin`.
pub fn smooth_btm_point(
    rng: &mut ChaCha8Rng,
    w: usize,
    h: usize,
    threshold: f64,
    margin: f64,
) -> SaliencyMap {
    loop {
        let s = interior_map(rng, w, h, |_, _| true);
        let v = s.values();
        let mut ok = true;
        for r in 0..h {
            for c in 0..w {
                let mut norm2 = 0.0;
                for &(dr, dc) in &OFFSETS {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    if inside(w, h, rr, cc) {
                        let d = v[r * w + c] - v[rr as usize * w + cc as usize];
                        norm2 += d * d;
                        if (d.abs() - threshold).abs() < margin {
                            ok = false;
                        }
                    }
                }
                if norm2.sqrt() < margin {
                    ok = false;
                }
            }
        }
        if ok {
            return s;
        }
    }
}

// ---------- finite differences ----------

pub const FD_STEP: f64 = 1e-6;
/// Per-coordinate relative error tolerance for analytic gradients.
pub const FD_TOLERANCE: f64 = 1e-5;
/// Magnitude below which a gradient entry is compared absolutely; central
/// differences at step 1e-6 carry ~1e-11 rounding noise.
pub const FD_FLOOR: f64 = 1e-4;

pub fn fd_max_error(x: &[f64], analytic: &[f64], f: impl FnMut(&[f64]) -> f64) -> f64 {
    let numeric = salient_core::gradcheck::central_differences(x, FD_STEP, f);
    salient_core::gradcheck::max_relative_error(analytic, &numeric, FD_FLOOR)
}

// ---------- gradient suite ----------

pub const GRADIENT_POINTS: usize = 100;

pub fn interior_map(
    rng: &mut ChaCha8Rng,
    w: usize,
    h: usize,
    keep: impl Fn(usize, f64) -> bool,
) -> SaliencyMap {
    let values = (0..w * h)
        .map(|i| loop {
            let v = 0.01 + 0.98 * rng.gen::<f64>();
            if keep(i, v) {
                break v;
            }
        })
        .collect();
    SaliencyMap::new(w, h, values).unwrap()
}

fn dims(rng: &mut ChaCha8Rng, min: usize) -> (usize, usize) {
    (rng.gen_range(min..=min + 3), rng.gen_range(min..=min + 3))
}

fn with_values(like: &SaliencyMap, x: &[f64]) -> SaliencyMap {
    SaliencyMap::new(like.width(), like.height(), x.to_vec()).unwrap()
}

/// Worst per-coordinate relative error of `loss` over [`GRADIENT_POINTS`] points
/// produced by `point`.
fn worst<P>(
    rng: &mut ChaCha8Rng,
    mut point: impl FnMut(&mut ChaCha8Rng) -> (SaliencyMap, P),
    loss: impl Fn(&SaliencyMap, &P) -> salient_core::LossResult,
) -> f64 {
    let mut worst: f64 = 0.0;
    for _ in 0..GRADIENT_POINTS {
        let (s, extra) = point(rng);
        let analytic = loss(&s, &extra).gradient.values().to_vec();
        let err = fd_max_error(s.values(), &analytic, |x| {
            loss(&with_values(&s, x), &extra).value
        });
        worst = worst.max(err);
    }
    worst
}

pub fn gradient_pcl_sd(rng: &mut ChaCha8Rng) -> f64 {
    use salient_core::curriculum::pcl_sd_loss;
    use salient_core::BinaryMask;
    worst(
        rng,
        |rng| {
            let (w, h) = dims(rng, 3);
            let s = interior_map(rng, w, h, |_, v| (v - 0.5).abs() > 1e-3);
            let mask =
                BinaryMask::new(w, h, (0..w * h).map(|_| rng.gen_bool(0.7)).collect()).unwrap();
            (s, mask)
        },
        |s, m| pcl_sd_loss(s, m).unwrap(),
    )
}

pub fn gradient_btm(rng: &mut ChaCha8Rng) -> f64 {
    use salient_core::losses::btm_loss;
    worst(
        rng,
        |rng| {
            let (w, h) = dims(rng, 4);
            (
                smooth_btm_point(rng, w, h, 0.1, 1e-3),
                random_image(rng, w, h, 3),
            )
        },
        |s, img| btm_loss(s, img).unwrap(),
    )
}

pub fn gradient_sc(rng: &mut ChaCha8Rng) -> f64 {
    use salient_core::losses::sc_loss;
    worst(
        rng,
        |rng| {
            let (w, h) = dims(rng, 3);
            let s_hat = interior_map(rng, w, h, |_, _| true);
            let s = interior_map(rng, w, h, |i, v| (v - s_hat.values()[i]).abs() > 1e-3);
            (s, s_hat)
        },
        |s, s_hat| sc_loss(s, s_hat).unwrap(),
    )
}

pub fn gradient_iou(rng: &mut ChaCha8Rng) -> f64 {
    use salient_core::losses::iou_loss;
    worst(
        rng,
        |rng| {
            let (w, h) = dims(rng, 3);
            (
                interior_map(rng, w, h, |_, _| true),
                interior_map(rng, w, h, |_, _| true),
            )
        },
        |s, g| iou_loss(s, g).unwrap(),
    )
}

pub fn gradient_bce(rng: &mut ChaCha8Rng) -> f64 {
    use salient_core::losses::bce_loss;
    worst(
        rng,
        |rng| {
            let (w, h) = dims(rng, 3);
            (
                interior_map(rng, w, h, |_, _| true),
                interior_map(rng, w, h, |_, _| true),
            )
        },
        |s, g| bce_loss(s, g).unwrap(),
    )
}

pub fn gradient_sce_total(rng: &mut ChaCha8Rng) -> f64 {
    use salient_core::curriculum::hard_sample_mask;
    use salient_core::losses::sce_total;
    use salient_core::LossWeights;
    worst(
        rng,
        |rng| {
            let (w, h) = dims(rng, 4);
            let s_hat = interior_map(rng, w, h, |_, _| true);
            let s = loop {
                let s = smooth_btm_point(rng, w, h, 0.1, 1e-3);
                let ok = s
                    .values()
                    .iter()
                    .zip(s_hat.values())
                    .all(|(&a, &b)| (a - 0.5).abs() > 1e-3 && (a - b).abs() > 1e-3);
                if ok {
                    break s;
                }
            };
            let mask = hard_sample_mask(&s, rng.gen_range(0.0..0.2)).unwrap();
            (s, (s_hat, random_image(rng, w, h, 3), mask))
        },
        |s, (s_hat, img, mask)| sce_total(s, s_hat, img, &LossWeights::default(), mask).unwrap(),
    )
}

pub fn gradient_sd_total(rng: &mut ChaCha8Rng) -> f64 {
    use salient_core::losses::sd_total;
    worst(
        rng,
        |rng| {
            let (w, h) = dims(rng, 3);
            let s_hat = interior_map(rng, w, h, |_, _| true);
            let s = interior_map(rng, w, h, |i, v| (v - s_hat.values()[i]).abs() > 1e-3);
            (s, (s_hat, interior_map(rng, w, h, |_, _| true)))
        },
        |s, (s_hat, g)| sd_total(s, s_hat, g).unwrap(),
    )
}

/// Adapter parameter gradients from `backward`, checked on `<u, forward(f)>`.
pub fn gradient_adapter(rng: &mut ChaCha8Rng) -> f64 {
    use salient_core::adapter::{AdapterBlock, FeatureVector, Linear};
    let mut worst: f64 = 0.0;
    let normal = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };
    for _ in 0..GRADIENT_POINTS {
        let d = rng.gen_range(1..=5);
        let base = Linear::new(d, normal(rng, d * d), normal(rng, d)).unwrap();
        let theta: Vec<f64> = normal(rng, d * d + d);
        let f = FeatureVector::new(normal(rng, d)).unwrap();
        let u = FeatureVector::new(normal(rng, d)).unwrap();
        let block = |t: &[f64]| {
            AdapterBlock::with_adapter(
                base.clone(),
                Linear::new(d, t[..d * d].to_vec(), t[d * d..].to_vec()).unwrap(),
            )
            .unwrap()
        };
        let grads = block(&theta).backward(&f, &u).unwrap();
        let analytic: Vec<f64> = grads
            .adapter
            .weight
            .iter()
            .chain(&grads.adapter.bias)
            .copied()
            .collect();
        let err = fd_max_error(&theta, &analytic, |t| {
            let out = block(t).forward(&f).unwrap();
            out.values()
                .iter()
                .zip(u.values())
                .map(|(a, b)| a * b)
                .sum()
        });
        worst = worst.max(err);
    }
    worst
}
