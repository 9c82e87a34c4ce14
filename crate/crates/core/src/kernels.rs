//! Per-descriptor base kernels K(x,y) = exp(-gamma * f(x,y)) built from a
//! distance function, Gram matrix assembly with PSD repair by diagonal
//! jitter, and the local-weight / local-target-kernel constructions.

use thiserror::Error;

use crate::descriptors::{raw_distance, Channel, DescriptorVector, DistanceKind};

const JITTER_BASE: f64 = 1e-10;
const JITTER_MAX: f64 = 1.0;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("distance argument must be nonnegative, got {0}")]
    NegativeDistance(f64),
    #[error("gamma must be positive, got {0}")]
    BadGamma(f64),
    #[error("all pairwise distances are zero; gamma is undefined")]
    AllZeroDistances,
    #[error("descriptor channel {0} does not match kernel channel {1}")]
    ChannelMismatch(Channel, Channel),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("jitter exceeded {JITTER_MAX}; matrix is pathologically indefinite")]
    JitterOverflow,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm matrix in alignment score")]
    ZeroNorm,
    #[error("local weights require at least one channel")]
    NoChannels,
}

/// A distance-substitution kernel over one descriptor channel.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseKernel {
    pub id: String,
    pub channel: Channel,
    pub distance_kind: DistanceKind,
    pub gamma: f64,
}

impl BaseKernel {
    pub fn new(
        id: impl Into<String>,
        channel: Channel,
        distance_kind: DistanceKind,
        gamma: f64,
    ) -> Result<Self, KernelError> {
        if gamma.is_nan() || gamma <= 0.0 {
            return Err(KernelError::BadGamma(gamma));
        }
        Ok(BaseKernel {
            id: id.into(),
            channel,
            distance_kind,
            gamma,
        })
    }

    /// Kernel evaluation between two raw descriptor value slices.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        kernel_value(raw_distance(a, b, self.distance_kind), self.gamma).unwrap()
    }
}

/// Symmetric Gram matrix over n samples; `jitter` is the lambda added by
/// PSD repair (0 when the raw matrix already factorizes).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    entries: Vec<f64>,
    jitter: f64,
}

impl KernelMatrix {
    pub fn from_entries(n: usize, entries: Vec<f64>, jitter: f64) -> Self {
        assert_eq!(entries.len(), n * n);
        KernelMatrix { n, entries, jitter }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Submatrix over the given sample indices; jitter carries over.
    pub fn restrict(&self, indices: &[usize]) -> KernelMatrix {
        let m = indices.len();
        let mut entries = Vec::with_capacity(m * m);
        for &i in indices {
            for &j in indices {
                entries.push(self.get(i, j));
            }
        }
        KernelMatrix {
            n: m,
            entries,
            jitter: self.jitter,
        }
    }
}

/// exp(-gamma * f) for a nonnegative distance f.
pub fn kernel_value(f: f64, gamma: f64) -> Result<f64, KernelError> {
    if f < 0.0 || !f.is_finite() {
        return Err(KernelError::NegativeDistance(f));
    }
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(KernelError::BadGamma(gamma));
    }
    Ok((-gamma * f).exp())
}

/// Default bandwidth: reciprocal of the mean strictly positive distance.
pub fn default_gamma(distances: &[f64]) -> Result<f64, KernelError> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for &d in distances {
        if d > 0.0 {
            sum += d;
            count += 1;
        }
    }
    if count == 0 {
        return Err(KernelError::AllZeroDistances);
    }
    Ok(count as f64 / sum)
}

/// In-place Cholesky attempt; returns false on a non-positive pivot.
fn cholesky_ok(n: usize, m: &[f64]) -> bool {
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    true
}

/// Repair an indefinite symmetric matrix by adding lambda*I, with lambda the
/// smallest 1e-10 * 2^k for which Cholesky succeeds. Returns (entries, lambda).
pub fn psd_repair(n: usize, entries: &[f64]) -> Result<(Vec<f64>, f64), KernelError> {
    assert_eq!(entries.len(), n * n);
    for i in 0..n {
        for j in 0..i {
            if entries[i * n + j] != entries[j * n + i] {
                return Err(KernelError::NotSymmetric);
            }
        }
    }
    if cholesky_ok(n, entries) {
        return Ok((entries.to_vec(), 0.0));
    }
    let mut jitter = JITTER_BASE;
    while jitter <= JITTER_MAX {
        let mut m = entries.to_vec();
        for i in 0..n {
            m[i * n + i] += jitter;
        }
        if cholesky_ok(n, &m) {
            return Ok((m, jitter));
        }
        jitter *= 2.0;
    }
    Err(KernelError::JitterOverflow)
}

/// Gram matrix of the base kernel over the given descriptor vectors, with
/// PSD repair applied.
pub fn build_kernel_matrix(
    vectors: &[DescriptorVector],
    bk: &BaseKernel,
) -> Result<KernelMatrix, KernelError> {
    for v in vectors {
        if v.channel != bk.channel {
            return Err(KernelError::ChannelMismatch(v.channel, bk.channel));
        }
    }
    let n = vectors.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0;
        for j in 0..i {
            let d = raw_distance(&vectors[i].values, &vectors[j].values, bk.distance_kind);
            let v = kernel_value(d, bk.gamma)?;
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    let (repaired, jitter) = psd_repair(n, &entries)?;
    Ok(KernelMatrix::from_entries(n, repaired, jitter))
}

/// Neighborhood weights of one anchor sample: w_j averages
/// exp(-d_r(anchor, x_j)^2) over the M descriptor channels.
#[derive(Debug, Clone)]
pub struct LocalWeights {
    pub anchor: usize,
    pub w: Vec<f64>,
}

pub fn local_weights(
    anchor: usize,
    distances_per_channel: &[Vec<f64>],
) -> Result<LocalWeights, KernelError> {
    let m = distances_per_channel.len();
    if m == 0 {
        return Err(KernelError::NoChannels);
    }
    let n = distances_per_channel[0].len();
    for d in distances_per_channel {
        if d.len() != n {
            return Err(KernelError::DimensionMismatch(d.len(), n));
        }
    }
    let mut w = vec![0.0; n];
    for channel in distances_per_channel {
        for (acc, &d) in w.iter_mut().zip(channel) {
            *acc += (-d * d).exp();
        }
    }
    for v in &mut w {
        *v /= m as f64;
    }
    Ok(LocalWeights { anchor, w })
}

/// Local target kernel: G_i(p,q) = w_p * w_q * G(p,q). Diagonal scaling of
/// a PSD matrix, so positive semidefiniteness is preserved.
pub fn local_target_kernel(
    weights: &LocalWeights,
    gram: &KernelMatrix,
) -> Result<Vec<f64>, KernelError> {
    let n = gram.n();
    if weights.w.len() != n {
        return Err(KernelError::DimensionMismatch(weights.w.len(), n));
    }
    let mut out = vec![0.0; n * n];
    for p in 0..n {
        for q in 0..n {
            out[p * n + q] = weights.w[p] * weights.w[q] * gram.get(p, q);
        }
    }
    Ok(out)
}

/// Frobenius alignment <K1,K2> / (|K1| |K2|), in [-1, 1].
pub fn alignment_score(k1: &[f64], k2: &[f64]) -> Result<f64, KernelError> {
    if k1.len() != k2.len() {
        return Err(KernelError::DimensionMismatch(k1.len(), k2.len()));
    }
    let mut dot = 0.0;
    let mut n1 = 0.0;
    let mut n2 = 0.0;
    for (&a, &b) in k1.iter().zip(k2) {
        dot += a * b;
        n1 += a * a;
        n2 += b * b;
    }
    if n1 == 0.0 || n2 == 0.0 {
        return Err(KernelError::ZeroNorm);
    }
    Ok(dot / (n1.sqrt() * n2.sqrt()))
}
