//! Benchmark helpers: deterministic synthetic inputs shared by the
//! criterion benches.

use kernelboost_core::imagecore::GrayImage;

/// Synthetic textured image with reproducible content.
pub fn synthetic_image(side: usize, phase: usize) -> GrayImage {
    let mut pixels = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let v = ((x * 7 + y * 13 + phase * 31) % 23) as f64 / 23.0;
            pixels.push(v);
        }
    }
    GrayImage::new(side, side, pixels).unwrap()
}
