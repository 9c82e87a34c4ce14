//! Nearest-neighbor classifiers and SVM-KNN local learning: a multiclass
//! SVM trained on the query's neighborhood only, skipped entirely when the
//! neighborhood is label-pure. The two-stage variant ranks with a cheap
//! distance first and spends the costly distance on a shortlist.

use thiserror::Error;

use crate::descriptors::{raw_distance, DescriptorVector, DistanceKind};
use crate::kernels::{kernel_value, psd_repair, BaseKernel, KernelError, KernelMatrix};
use crate::svm::{train_multiclass, MulticlassStrategy, SvmError};

#[derive(Debug, Error)]
pub enum NeighborError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("k={0} exceeds training size {1}")]
    KTooLarge(usize, usize),
    #[error("svm-knn requires k >= 2, got {0}")]
    KTooSmall(usize),
    #[error("shortlist {0} smaller than k {1}")]
    ShortlistTooSmall(usize, usize),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Svm(#[from] SvmError),
}

/// Per-query instrumentation counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NeighborQueryStats {
    pub cheap_evals: usize,
    pub costly_evals: usize,
    pub svm_invocations: usize,
}

/// Indices of the `k` nearest training samples under `dist(i)`, distance
/// ties broken by the lower training index. `candidates` must be sorted
/// when tie-break order matters.
fn rank_neighbors(candidates: &[usize], dist: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        dist[a]
            .partial_cmp(&dist[b])
            .unwrap()
            .then(candidates[a].cmp(&candidates[b]))
    });
    order.truncate(k);
    order.iter().map(|&i| candidates[i]).collect()
}

/// Majority label among the k nearest neighbors; a label tie falls back to
/// the single nearest neighbor.
pub fn knn_classify(
    query: &DescriptorVector,
    train: &[DescriptorVector],
    labels: &[usize],
    k: usize,
    kind: DistanceKind,
) -> Result<(usize, NeighborQueryStats), NeighborError> {
    let n = train.len();
    if n == 0 {
        return Err(NeighborError::EmptyTrainingSet);
    }
    if k == 0 || k > n {
        return Err(NeighborError::KTooLarge(k, n));
    }
    let dist: Vec<f64> = train
        .iter()
        .map(|t| raw_distance(&query.values, &t.values, kind))
        .collect();
    let candidates: Vec<usize> = (0..n).collect();
    let nearest = rank_neighbors(&candidates, &dist, k);
    let max_label = nearest.iter().map(|&i| labels[i]).max().unwrap();
    let mut counts = vec![0usize; max_label + 1];
    for &i in &nearest {
        counts[labels[i]] += 1;
    }
    let top = *counts.iter().max().unwrap();
    let winners: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] == top).collect();
    let label = if winners.len() == 1 {
        winners[0]
    } else {
        labels[nearest[0]]
    };
    let stats = NeighborQueryStats {
        cheap_evals: n,
        costly_evals: 0,
        svm_invocations: 0,
    };
    Ok((label, stats))
}

/// Train a multiclass SVM on the neighborhood and classify the query.
/// Classes are compacted to those present in the neighborhood.
#[allow(clippy::too_many_arguments)]
fn neighborhood_svm(
    neighbors: &[usize],
    query_dist: &[f64],
    train: &[DescriptorVector],
    labels: &[usize],
    bk: &BaseKernel,
    costly_kind: DistanceKind,
    c: f64,
    tol: f64,
    strategy: MulticlassStrategy,
    stats: &mut NeighborQueryStats,
) -> Result<usize, NeighborError> {
    let k = neighbors.len();
    // Compact class ids: the neighborhood may not contain every class.
    let mut present: Vec<usize> = neighbors.iter().map(|&i| labels[i]).collect();
    present.sort();
    present.dedup();
    let local_labels: Vec<usize> = neighbors
        .iter()
        .map(|&i| present.iter().position(|&c| c == labels[i]).unwrap())
        .collect();

    let mut entries = vec![0.0; k * k];
    for a in 0..k {
        entries[a * k + a] = 1.0;
        for b in 0..a {
            let d = raw_distance(
                &train[neighbors[a]].values,
                &train[neighbors[b]].values,
                costly_kind,
            );
            let v = kernel_value(d, bk.gamma)?;
            entries[a * k + b] = v;
            entries[b * k + a] = v;
        }
    }
    stats.costly_evals += k * (k - 1) / 2;
    let (repaired, jitter) = psd_repair(k, &entries)?;
    let gram = KernelMatrix::from_entries(k, repaired, jitter);
    let model = train_multiclass(&gram, &local_labels, &vec![c; k], present.len(), tol, strategy)?;
    stats.svm_invocations += 1;

    let k_row: Vec<f64> = neighbors
        .iter()
        .map(|&i| kernel_value(query_dist[i], bk.gamma))
        .collect::<Result<_, _>>()?;
    // The pairwise models index the neighborhood sample space directly.
    let local = model.predict(&k_row)?;
    Ok(present[local])
}

/// SVM-KNN, naive form: rank all training samples by the base kernel's
/// distance, return the shared label of a pure neighborhood without any SVM
/// work, otherwise train on the k x k neighborhood kernel.
#[allow(clippy::too_many_arguments)]
pub fn svm_knn_naive(
    query: &DescriptorVector,
    train: &[DescriptorVector],
    labels: &[usize],
    k: usize,
    bk: &BaseKernel,
    c: f64,
    tol: f64,
    strategy: MulticlassStrategy,
) -> Result<(usize, NeighborQueryStats), NeighborError> {
    let n = train.len();
    if n == 0 {
        return Err(NeighborError::EmptyTrainingSet);
    }
    if k < 2 {
        return Err(NeighborError::KTooSmall(k));
    }
    if k > n {
        return Err(NeighborError::KTooLarge(k, n));
    }
    let mut stats = NeighborQueryStats::default();
    let dist: Vec<f64> = train
        .iter()
        .map(|t| raw_distance(&query.values, &t.values, bk.distance_kind))
        .collect();
    stats.costly_evals += n;
    let candidates: Vec<usize> = (0..n).collect();
    let neighbors = rank_neighbors(&candidates, &dist, k);
    let first = labels[neighbors[0]];
    if neighbors.iter().all(|&i| labels[i] == first) {
        return Ok((first, stats));
    }
    let label = neighborhood_svm(
        &neighbors,
        &dist,
        train,
        labels,
        bk,
        bk.distance_kind,
        c,
        tol,
        strategy,
        &mut stats,
    )?;
    Ok((label, stats))
}

/// SVM-KNN, two-stage form: the cheap distance ranks all n samples and
/// keeps `shortlist`; the costly distance re-ranks the shortlist and keeps
/// k. Costly evaluations are bounded by shortlist + k(k-1)/2.
#[allow(clippy::too_many_arguments)]
pub fn svm_knn_two_stage(
    query: &DescriptorVector,
    train: &[DescriptorVector],
    labels: &[usize],
    shortlist: usize,
    k: usize,
    cheap_kind: DistanceKind,
    costly_kind: DistanceKind,
    bk: &BaseKernel,
    c: f64,
    tol: f64,
    strategy: MulticlassStrategy,
) -> Result<(usize, NeighborQueryStats), NeighborError> {
    let n = train.len();
    if n == 0 {
        return Err(NeighborError::EmptyTrainingSet);
    }
    if k < 2 {
        return Err(NeighborError::KTooSmall(k));
    }
    if shortlist < k {
        return Err(NeighborError::ShortlistTooSmall(shortlist, k));
    }
    if shortlist > n {
        return Err(NeighborError::KTooLarge(shortlist, n));
    }
    let mut stats = NeighborQueryStats::default();

    let cheap: Vec<f64> = train
        .iter()
        .map(|t| raw_distance(&query.values, &t.values, cheap_kind))
        .collect();
    stats.cheap_evals += n;
    let all: Vec<usize> = (0..n).collect();
    let shortlisted = rank_neighbors(&all, &cheap, shortlist);

    let costly: Vec<f64> = shortlisted
        .iter()
        .map(|&i| raw_distance(&query.values, &train[i].values, costly_kind))
        .collect();
    stats.costly_evals += shortlist;
    let mut order: Vec<usize> = (0..shortlist).collect();
    order.sort_by(|&a, &b| {
        costly[a]
            .partial_cmp(&costly[b])
            .unwrap()
            .then(shortlisted[a].cmp(&shortlisted[b]))
    });
    let neighbors: Vec<usize> = order[..k].iter().map(|&i| shortlisted[i]).collect();

    let first = labels[neighbors[0]];
    if neighbors.iter().all(|&i| labels[i] == first) {
        return Ok((first, stats));
    }
    // Query-to-neighbor costly distances are already on hand from stage 2.
    let mut query_dist = vec![0.0; n];
    for (pos, &i) in shortlisted.iter().enumerate() {
        query_dist[i] = costly[pos];
    }
    let label = neighborhood_svm(
        &neighbors,
        &query_dist,
        train,
        labels,
        bk,
        costly_kind,
        c,
        tol,
        strategy,
        &mut stats,
    )?;
    Ok((label, stats))
}
