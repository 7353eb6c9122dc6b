use criterion::{black_box, criterion_group, criterion_main, Criterion};
use salient_bench::{disc_image, ramp_map};
use salient_core::curriculum::hard_sample_mask;
use salient_core::losses::{
    image_texture, sce_total_with_texture, sd_total, LossWeights, ScaleTransform,
};

fn bench_losses(c: &mut Criterion) {
    let img = disc_image(64, 64, 3);
    let s = ramp_map(64, 64);
    let texture = image_texture(&img).unwrap();
    let transform = ScaleTransform::new(64, 64, 0.75).unwrap();
    let s_hat = transform.round_trip(&s).unwrap();
    let mask = hard_sample_mask(&s, 0.1).unwrap();
    let weights = LossWeights::default();
    c.bench_function("sce_total 64x64", |b| {
        b.iter(|| sce_total_with_texture(black_box(&s), &s_hat, &texture, &weights, &mask).unwrap())
    });
    let g = s.binarize(0.5).to_map();
    c.bench_function("sd_total 64x64", |b| {
        b.iter(|| sd_total(black_box(&s), &s_hat, &g).unwrap())
    });
    c.bench_function("scale round trip 64x64", |b| {
        b.iter(|| transform.round_trip(black_box(&s)).unwrap())
    });
}

criterion_group!(benches, bench_losses);
criterion_main!(benches);
