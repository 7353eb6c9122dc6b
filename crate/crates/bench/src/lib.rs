//! Fixtures shared by the benchmarks.

use salient_core::{Image, SaliencyMap};

/// Deterministic smooth image with a bright disc, `channels` channels.
pub fn disc_image(width: usize, height: usize, channels: usize) -> Image {
    let (cr, cc) = (height as f64 / 2.0, width as f64 / 2.0);
    let radius = width.min(height) as f64 / 3.0;
    let mut values = Vec::with_capacity(width * height * channels);
    for r in 0..height {
        for c in 0..width {
            let d = ((r as f64 - cr).powi(2) + (c as f64 - cc).powi(2)).sqrt();
            let base = if d < radius { 0.8 } else { 0.2 };
            for k in 0..channels {
                values.push(base + 0.05 * ((r * 7 + c * 3 + k) % 5) as f64 / 5.0);
            }
        }
    }
    Image::new(width, height, channels, values).expect("valid fixture")
}

/// Diagonal ramp in (0, 1).
pub fn ramp_map(width: usize, height: usize) -> SaliencyMap {
    let span = (width + height) as f64;
    SaliencyMap::from_fn(width, height, |r, c| (r + c) as f64 / span * 0.98 + 0.01)
        .expect("valid fixture")
}
