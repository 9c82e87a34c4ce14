//! Descriptor channels and their distance functions.
//!
//! Two histogram channels (PHOG over a spatial pyramid, dense SIFT-lite
//! quantized against a k-means codebook) plus a tiny-image raster channel.
//! Histogram channels are L1-normalized and compared with the chi-square
//! distance by default; the tiny-image channel uses plain L2.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::imagecore::{resize_bilinear, GrayImage};
use crate::rng::Lcg;

pub const SIFT_LOCAL_LEN: usize = 128;
const CHI2_EPS: f64 = 1e-10;
const KMEANS_MOVE_TOL: f64 = 1e-6;
const KMEANS_MAX_ITERS: usize = 100;

/// Descriptor channel identity; kernel construction and distance checks key
/// off this tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Phog,
    SiftBow,
    TinyImage,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Channel::Phog => "phog",
            Channel::SiftBow => "siftbow",
            Channel::TinyImage => "tinyimage",
        };
        f.write_str(name)
    }
}

impl Channel {
    pub fn parse(s: &str) -> Option<Channel> {
        match s {
            "phog" => Some(Channel::Phog),
            "siftbow" => Some(Channel::SiftBow),
            "tinyimage" => Some(Channel::TinyImage),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    L2,
    Chi2,
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::L2 => "l2",
            DistanceKind::Chi2 => "chi2",
        })
    }
}

impl DistanceKind {
    pub fn parse(s: &str) -> Option<DistanceKind> {
        match s {
            "l2" => Some(DistanceKind::L2),
            "chi2" => Some(DistanceKind::Chi2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DescriptorSpec {
    Phog {
        levels: usize,
        bins: usize,
        signed: bool,
    },
    SiftBow {
        step: usize,
        patch: usize,
        words: usize,
        seed: u64,
    },
    TinyImage {
        side: usize,
    },
}

impl DescriptorSpec {
    pub fn channel(&self) -> Channel {
        match self {
            DescriptorSpec::Phog { .. } => Channel::Phog,
            DescriptorSpec::SiftBow { .. } => Channel::SiftBow,
            DescriptorSpec::TinyImage { .. } => Channel::TinyImage,
        }
    }

    /// Output vector length; `bins * sum_{l=0..levels} 4^l` for PHOG.
    pub fn output_len(&self) -> usize {
        match self {
            DescriptorSpec::Phog { levels, bins, .. } => {
                bins * (0..=*levels).map(|l| 4usize.pow(l as u32)).sum::<usize>()
            }
            DescriptorSpec::SiftBow { words, .. } => *words,
            DescriptorSpec::TinyImage { side } => side * side,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorVector {
    pub channel: Channel,
    pub values: Vec<f64>,
}

/// K-means codebook over 128-length local descriptors; reproducible
/// bit-for-bit from (inputs, seed).
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub words: Vec<Vec<f64>>,
    pub seed: u64,
    pub inertia: f64,
}

#[derive(Debug, Error)]
pub enum DescriptorError {
    #[error("image {0}x{1} smaller than the 3x3 gradient stencil")]
    ImageTooSmall(usize, usize),
    #[error("pyramid level {level} yields cells smaller than 2x2 pixels")]
    CellTooSmall { level: usize },
    #[error("patch grid produced zero patches for {width}x{height} image, patch {patch}")]
    NoPatches {
        width: usize,
        height: usize,
        patch: usize,
    },
    #[error("codebook requested {k} words but only {distinct} distinct vectors supplied")]
    TooFewDistinct { k: usize, distinct: usize },
    #[error("distance between mismatched channels {0} and {1}")]
    ChannelMismatch(Channel, Channel),
    #[error("distance between vectors of length {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("PHOG bins must be >= 2, got {0}")]
    BadBins(usize),
}

/// Gradient rasters from the 3x3 Sobel stencils, borders by clamped
/// replication. Orientation in degrees: [0,360) signed, [0,180) unsigned.
pub fn sobel_gradients(
    img: &GrayImage,
    signed: bool,
) -> Result<(Vec<f64>, Vec<f64>), DescriptorError> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(DescriptorError::ImageTooSmall(w, h));
    }
    let mut magnitude = vec![0.0; w * h];
    let mut orientation = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy);
            // Paired differences so constant regions cancel exactly.
            let gx = (p(1, -1) - p(-1, -1)) + 2.0 * (p(1, 0) - p(-1, 0)) + (p(1, 1) - p(-1, 1));
            let gy = (p(-1, 1) - p(-1, -1)) + 2.0 * (p(0, 1) - p(0, -1)) + (p(1, 1) - p(1, -1));
            let idx = y as usize * w + x as usize;
            magnitude[idx] = (gx * gx + gy * gy).sqrt();
            let mut theta = gy.atan2(gx).to_degrees();
            if theta < 0.0 {
                theta += 360.0;
            }
            if !signed {
                theta %= 180.0;
            }
            if theta >= if signed { 360.0 } else { 180.0 } {
                theta = 0.0;
            }
            orientation[idx] = theta;
        }
    }
    Ok((magnitude, orientation))
}

/// Soft-assign `weight` at `theta` into a circular histogram whose bin i
/// covers [i*width, (i+1)*width). Mass splits linearly between the bin and
/// its successor; an angle on a bin's left edge lands wholly in that bin.
fn vote(hist: &mut [f64], theta: f64, weight: f64, range: f64) {
    let bins = hist.len();
    let bin_width = range / bins as f64;
    let pos = theta / bin_width;
    let b0 = (pos.floor() as usize) % bins;
    let frac = pos - pos.floor();
    hist[b0] += weight * (1.0 - frac);
    hist[(b0 + 1) % bins] += weight * frac;
}

/// Pyramid histogram of oriented gradients. Level l splits the image into a
/// 2^l x 2^l cell grid; cells concatenate level-major, row-major, and the
/// full vector is L1-normalized once. A zero-gradient image yields the
/// all-zero vector.
pub fn phog(
    img: &GrayImage,
    levels: usize,
    bins: usize,
    signed: bool,
) -> Result<DescriptorVector, DescriptorError> {
    if bins < 2 {
        return Err(DescriptorError::BadBins(bins));
    }
    let (w, h) = (img.width(), img.height());
    let deepest_div = 1usize << levels;
    if w / deepest_div < 2 || h / deepest_div < 2 {
        return Err(DescriptorError::CellTooSmall { level: levels });
    }
    let (magnitude, orientation) = sobel_gradients(img, signed)?;
    let range = if signed { 360.0 } else { 180.0 };
    let mut values = Vec::new();
    for level in 0..=levels {
        let div = 1usize << level;
        for cy in 0..div {
            for cx in 0..div {
                let x0 = cx * w / div;
                let x1 = (cx + 1) * w / div;
                let y0 = cy * h / div;
                let y1 = (cy + 1) * h / div;
                let mut hist = vec![0.0; bins];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let idx = y * w + x;
                        if magnitude[idx] > 0.0 {
                            vote(&mut hist, orientation[idx], magnitude[idx], range);
                        }
                    }
                }
                values.extend_from_slice(&hist);
            }
        }
    }
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        for v in &mut values {
            *v /= total;
        }
    }
    Ok(DescriptorVector {
        channel: Channel::Phog,
        values,
    })
}

/// Dense grid of SIFT-style 128-length patch descriptors: 4x4 spatial cells
/// with 8 signed orientation bins each, magnitude- and Gaussian-weighted
/// (sigma = patch/2), L2-normalized, clipped at 0.2 and renormalized.
/// Patches with zero gradient energy are dropped.
pub fn dense_sift_lite(
    img: &GrayImage,
    step: usize,
    patch: usize,
) -> Result<Vec<Vec<f64>>, DescriptorError> {
    let (w, h) = (img.width(), img.height());
    if patch > w || patch > h || step == 0 || patch < 4 {
        return Err(DescriptorError::NoPatches {
            width: w,
            height: h,
            patch,
        });
    }
    let (magnitude, orientation) = sobel_gradients(img, true)?;
    let sigma = patch as f64 / 2.0;
    let center = (patch as f64 - 1.0) / 2.0;
    let cell = patch as f64 / 4.0;
    let mut descriptors = Vec::new();
    let mut y0 = 0;
    while y0 + patch <= h {
        let mut x0 = 0;
        while x0 + patch <= w {
            let mut desc = vec![0.0; SIFT_LOCAL_LEN];
            for dy in 0..patch {
                for dx in 0..patch {
                    let idx = (y0 + dy) * w + (x0 + dx);
                    let m = magnitude[idx];
                    if m == 0.0 {
                        continue;
                    }
                    let rx = dx as f64 - center;
                    let ry = dy as f64 - center;
                    let g = (-(rx * rx + ry * ry) / (2.0 * sigma * sigma)).exp();
                    let cx = ((dx as f64 / cell) as usize).min(3);
                    let cy = ((dy as f64 / cell) as usize).min(3);
                    let base = (cy * 4 + cx) * 8;
                    vote(&mut desc[base..base + 8], orientation[idx], m * g, 360.0);
                }
            }
            let norm = desc.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut desc {
                    *v = (*v / norm).min(0.2);
                }
                let norm2 = desc.iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in &mut desc {
                    *v /= norm2;
                }
                descriptors.push(desc);
            }
            x0 += step;
        }
        y0 += step;
    }
    Ok(descriptors)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
}

fn nearest_word(point: &[f64], words: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, word) in words.iter().enumerate() {
        let d = sq_dist(point, word);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

/// K-means with k-means++ seeding from the deterministic generator. Lloyd
/// iterations stop when the largest centroid movement drops below 1e-6 or
/// after 100 rounds; empty clusters are re-seeded to the point farthest
/// from its current centroid.
pub fn build_codebook(
    locals: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<Codebook, DescriptorError> {
    let distinct: HashSet<Vec<u64>> = locals
        .iter()
        .map(|v| v.iter().map(|x| x.to_bits()).collect())
        .collect();
    if distinct.len() < k || k == 0 {
        return Err(DescriptorError::TooFewDistinct {
            k,
            distinct: distinct.len(),
        });
    }
    let mut rng = Lcg::new(seed);
    // k-means++ seeding.
    let mut words: Vec<Vec<f64>> = vec![locals[rng.next_index(locals.len())].clone()];
    let mut d2: Vec<f64> = locals.iter().map(|p| sq_dist(p, &words[0])).collect();
    while words.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All mass on existing centers; take the first unused distinct point.
            locals
                .iter()
                .position(|p| words.iter().all(|w| w != p))
                .unwrap()
        } else {
            let mut target = rng.next_f64() * total;
            let mut chosen = locals.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        };
        let center = locals[next].clone();
        for (i, p) in locals.iter().enumerate() {
            let d = sq_dist(p, &center);
            if d < d2[i] {
                d2[i] = d;
            }
        }
        words.push(center);
    }
    let dim = locals[0].len();
    let mut assignment = vec![0usize; locals.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        for (i, p) in locals.iter().enumerate() {
            let (w, _) = nearest_word(p, &words);
            assignment[i] = w;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in locals.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed to the point farthest from its assigned centroid.
                let far = (0..locals.len())
                    .max_by(|&a, &b| {
                        let da = sq_dist(&locals[a], &words[assignment[a]]);
                        let db = sq_dist(&locals[b], &words[assignment[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                sums[c] = locals[far].clone();
                counts[c] = 1;
                assignment[far] = c;
            }
        }
        let mut max_move: f64 = 0.0;
        for c in 0..k {
            let mut new_word = sums[c].clone();
            for v in &mut new_word {
                *v /= counts[c] as f64;
            }
            max_move = max_move.max(sq_dist(&new_word, &words[c]).sqrt());
            words[c] = new_word;
        }
        if max_move < KMEANS_MOVE_TOL {
            break;
        }
    }
    // Final objective against the converged centroids.
    let inertia = locals.iter().map(|p| nearest_word(p, &words).1).sum();
    Ok(Codebook {
        words,
        seed,
        inertia,
    })
}

/// Word-frequency histogram: nearest centroid by L2 (ties to the lowest
/// index), counts L1-normalized. An empty local set maps to the uniform
/// histogram.
pub fn bow_histogram(locals: &[Vec<f64>], codebook: &Codebook) -> DescriptorVector {
    let k = codebook.words.len();
    let mut values = vec![0.0; k];
    if locals.is_empty() {
        let uniform = 1.0 / k as f64;
        values.fill(uniform);
    } else {
        for p in locals {
            let (w, _) = nearest_word(p, &codebook.words);
            values[w] += 1.0;
        }
        let total = locals.len() as f64;
        for v in &mut values {
            *v /= total;
        }
    }
    DescriptorVector {
        channel: Channel::SiftBow,
        values,
    }
}

/// Downsampled raster channel; values stay in [0,1], compared with L2.
pub fn tiny_image(img: &GrayImage, side: usize) -> Result<DescriptorVector, DescriptorError> {
    let resized = resize_bilinear(img, side, side)
        .map_err(|_| DescriptorError::ImageTooSmall(side, side))?;
    Ok(DescriptorVector {
        channel: Channel::TinyImage,
        values: resized.pixels().to_vec(),
    })
}

/// Compute the descriptor for one image. `codebook` is required for the
/// bag-of-words channel and ignored otherwise.
pub fn compute_descriptor(
    img: &GrayImage,
    spec: &DescriptorSpec,
    codebook: Option<&Codebook>,
) -> Result<DescriptorVector, DescriptorError> {
    match spec {
        DescriptorSpec::Phog {
            levels,
            bins,
            signed,
        } => phog(img, *levels, *bins, *signed),
        DescriptorSpec::SiftBow { step, patch, .. } => {
            let cb = codebook.expect("bag-of-words channel requires a codebook");
            let locals = dense_sift_lite(img, *step, *patch)?;
            Ok(bow_histogram(&locals, cb))
        }
        DescriptorSpec::TinyImage { side } => tiny_image(img, *side),
    }
}

/// Distance between two descriptors of the same channel and length.
/// Chi-square: 0.5 * sum (a-b)^2 / (a+b+eps), eps = 1e-10.
pub fn distance(
    a: &DescriptorVector,
    b: &DescriptorVector,
    kind: DistanceKind,
) -> Result<f64, DescriptorError> {
    if a.channel != b.channel {
        return Err(DescriptorError::ChannelMismatch(a.channel, b.channel));
    }
    if a.values.len() != b.values.len() {
        return Err(DescriptorError::LengthMismatch(
            a.values.len(),
            b.values.len(),
        ));
    }
    Ok(raw_distance(&a.values, &b.values, kind))
}

/// Distance on bare value slices; callers guarantee matching lengths.
pub fn raw_distance(a: &[f64], b: &[f64], kind: DistanceKind) -> f64 {
    match kind {
        DistanceKind::L2 => sq_dist(a, b).sqrt(),
        DistanceKind::Chi2 => {
            let mut acc = 0.0;
            for (&x, &y) in a.iter().zip(b) {
                let diff = x - y;
                acc += diff * diff / (x + y + CHI2_EPS);
            }
            0.5 * acc
        }
    }
}
