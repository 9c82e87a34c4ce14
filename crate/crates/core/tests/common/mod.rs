//! Shared helpers for the integration suites: an independent brute-force
//! QP solver used as an oracle for the SMO implementation, and a synthetic
//! four-class image set whose class pairs are separable by different
//! descriptor channels.

use kernelboost_core::imagecore::{Dataset, GrayImage};
use kernelboost_core::kernels::KernelMatrix;
use kernelboost_core::rng::Lcg;

/// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij.
pub fn dual_objective(gram: &KernelMatrix, labels: &[f64], alpha: &[f64]) -> f64 {
    let n = labels.len();
    let mut obj: f64 = alpha.iter().sum();
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if alpha[j] == 0.0 {
                continue;
            }
            obj -= 0.5 * alpha[i] * alpha[j] * labels[i] * labels[j] * gram.get(i, j);
        }
    }
    obj
}

/// Project `z` onto {0 <= x_i <= c_i, sum y_i x_i = 0} by bisecting on the
/// Lagrange multiplier of the equality constraint. With y_i = +-1 the
/// residual sum y_i clip(z_i - nu y_i, 0, c_i) is nonincreasing in nu.
fn project(z: &[f64], labels: &[f64], costs: &[f64]) -> Vec<f64> {
    let residual = |nu: f64| -> f64 {
        z.iter()
            .zip(labels)
            .zip(costs)
            .map(|((&zi, &yi), &ci)| yi * (zi - nu * yi).clamp(0.0, ci))
            .sum()
    };
    let bound = z
        .iter()
        .map(|v| v.abs())
        .fold(0.0f64, f64::max)
        .max(costs.iter().fold(0.0f64, |a, &c| a.max(c)))
        + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    z.iter()
        .zip(labels)
        .zip(costs)
        .map(|((&zi, &yi), &ci)| (zi - nu * yi).clamp(0.0, ci))
        .collect()
}

/// Brute-force projected-gradient ascent on the SVM dual. Slow but simple
/// and entirely independent from the SMO code path; intended for tiny
/// problems only.
pub fn qp_oracle(gram: &KernelMatrix, labels: &[f64], costs: &[f64]) -> (Vec<f64>, f64) {
    let n = labels.len();
    // Step size from a Gershgorin-style bound on the Hessian spectrum.
    let lipschitz = (0..n)
        .map(|i| (0..n).map(|j| gram.get(i, j).abs()).sum::<f64>())
        .fold(1.0f64, f64::max);
    let step = 1.0 / lipschitz;

    let mut alpha = project(&vec![0.0; n], labels, costs);
    let mut best = dual_objective(gram, labels, &alpha);
    let mut stale = 0usize;
    for _ in 0..500_000 {
        let mut z = alpha.clone();
        for i in 0..n {
            let mut grad = 1.0;
            for j in 0..n {
                grad -= labels[i] * labels[j] * gram.get(i, j) * alpha[j];
            }
            z[i] += step * grad;
        }
        alpha = project(&z, labels, costs);
        let obj = dual_objective(gram, labels, &alpha);
        if obj > best + 1e-14 {
            best = obj;
            stale = 0;
        } else {
            stale += 1;
            if stale > 500 {
                break;
            }
        }
    }
    (alpha, best)
}

const STRIPE_PERIOD: f64 = 16.0;
const MOTIF_PERIOD: f64 = 8.0;
const TILE: usize = 16;

fn grating(x: usize, y: usize, along_sum: bool, period: f64, phase: f64) -> f64 {
    let t = if along_sum {
        (x + y) as f64
    } else {
        x as f64 - y as f64
    };
    (std::f64::consts::TAU * t / period + phase).sin()
}

/// Smooth 2D window over a w x h region, zero on the border, so windowed
/// gratings meet their neighbors without edge artifacts.
fn window(u: usize, v: usize, w: usize, h: usize) -> f64 {
    let su = (std::f64::consts::PI * (u as f64 + 0.5) / w as f64).sin();
    let sv = (std::f64::consts::PI * (v as f64 + 0.5) / h as f64).sin();
    (su * sv).powi(2)
}

/// One synthetic sample. Classes:
///   0: left half 45-degree stripes, right half 135-degree stripes
///   1: the mirror image of class 0 (same patch statistics, layout swapped)
///   2: checkerboard of 16px tiles, each one windowed single-orientation
///      motif (alternating 45/135 degrees)
///   3: every 16px tile split into two 8px bands, 45 degrees on top and
///      135 degrees below
/// Classes 0/1 share local-patch statistics and differ only in layout;
/// classes 2/3 share global and cell-level orientation mass (half 45, half
/// 135 everywhere) and differ only in whether a single local patch mixes
/// the two orientations.
pub fn synthetic_image(class: usize, size: usize, rng: &mut Lcg) -> GrayImage {
    let phase_a = rng.next_f64() * std::f64::consts::TAU;
    let phase_b = rng.next_f64() * std::f64::consts::TAU;
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let signal = match class {
                0 | 1 => {
                    let left = x < size / 2;
                    let use_sum = (class == 0) == left;
                    let phase = if use_sum { phase_a } else { phase_b };
                    0.4 * grating(x, y, use_sum, STRIPE_PERIOD, phase)
                }
                2 | 3 => {
                    // Both classes are built from identical windowed 16x8
                    // bands; class 2 pairs equal orientations inside a tile
                    // (checkerboard across tiles), class 3 mixes them in
                    // every tile.
                    let use_sum = if class == 2 {
                        (x / TILE + y / TILE).is_multiple_of(2)
                    } else {
                        y % TILE < TILE / 2
                    };
                    let phase = if use_sum { phase_a } else { phase_b };
                    let w = window(x % TILE, y % (TILE / 2), TILE, TILE / 2);
                    0.8 * w * grating(x, y, use_sum, MOTIF_PERIOD, phase)
                }
                _ => panic!("class out of range"),
            };
            let noise = 0.02 * (rng.next_f64() - 0.5);
            pixels.push((0.5 + signal + noise).clamp(0.0, 1.0));
        }
    }
    GrayImage::new(size, size, pixels).unwrap()
}

/// Four-class synthetic dataset with `per_class` samples per class.
pub fn synthetic_dataset(per_class: usize, size: usize, seed: u64) -> Dataset {
    let mut rng = Lcg::new(seed);
    let classes: Vec<String> = (0..4).map(|c| format!("class{c}")).collect();
    let mut samples = Vec::with_capacity(4 * per_class);
    for c in 0..4 {
        for _ in 0..per_class {
            samples.push((synthetic_image(c, size, &mut rng), c));
        }
    }
    Dataset { classes, samples }
}
