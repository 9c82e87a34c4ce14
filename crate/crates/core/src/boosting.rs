//! Multiclass AdaBoost (SAMME form) whose weak-learner pool holds one
//! multiclass SVM per base descriptor kernel. Sample weights enter each
//! weak learner through per-sample costs C_i = C * n * w_i, so uniform
//! weights reduce to a plain cost C.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::kernels::KernelMatrix;
use crate::svm::{train_multiclass, MulticlassStrategy, MulticlassSvmModel, SvmError};

const EPS_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("weak-learner pool is empty")]
    EmptyPool,
    #[error("round count must be >= 1, got {0}")]
    BadRounds(usize),
    #[error("pool references unknown kernel id {0}")]
    UnknownKernel(String),
    #[error("first round already at chance level (best error {0:.6}); ensemble would be empty")]
    NoUsefulLearner(f64),
    #[error("sample weights must sum to 1, got {0}")]
    BadWeights(f64),
    #[error("alpha must be finite, got {0}")]
    BadAlpha(f64),
    #[error("prediction is missing a kernel row for {0}")]
    MissingKernelRow(String),
    #[error(transparent)]
    Svm(#[from] SvmError),
}

/// One weak-learner candidate: an SVM of cost `c` over the named kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakLearnerSpec {
    pub kernel_id: String,
    pub c: f64,
}

/// A completed boosting round.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostRound {
    pub kernel_id: String,
    pub alpha: f64,
    pub model: MulticlassSvmModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostedEnsemble {
    pub n_classes: usize,
    pub rounds: Vec<BoostRound>,
}

/// Boosting distribution over training samples; sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWeights {
    pub w: Vec<f64>,
}

impl SampleWeights {
    pub fn uniform(n: usize) -> Self {
        SampleWeights {
            w: vec![1.0 / n as f64; n],
        }
    }

    pub fn sum(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// Multiply misclassified weights by e^alpha and renormalize.
pub fn update_weights(
    weights: &SampleWeights,
    misclassified: &[usize],
    alpha: f64,
) -> Result<SampleWeights, BoostError> {
    if !alpha.is_finite() {
        return Err(BoostError::BadAlpha(alpha));
    }
    let sum = weights.sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(BoostError::BadWeights(sum));
    }
    let mut w = weights.w.clone();
    let factor = alpha.exp();
    for &i in misclassified {
        w[i] *= factor;
    }
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    Ok(SampleWeights { w })
}

/// SAMME weak-learner weight for weighted error `eps` over `n_classes`
/// classes, with the error floored at 1e-10 so perfect learners keep a
/// finite alpha.
pub fn samme_alpha(eps: f64, n_classes: usize) -> f64 {
    let eps_f = eps.max(EPS_FLOOR);
    ((1.0 - eps_f) / eps_f).ln() + ((n_classes - 1) as f64).ln()
}

pub struct AdaboostConfig {
    pub rounds: usize,
    pub tol: f64,
    pub strategy: MulticlassStrategy,
}

/// Train the boosted ensemble. Every round retrains every pool candidate
/// with costs C_i = C * n * w_i, keeps the one with minimal weighted error,
/// and stops when the best candidate is no better than chance
/// (eps >= 1 - 1/C) or classifies the weighted set perfectly.
pub fn adaboost_train(
    labels: &[usize],
    n_classes: usize,
    kernels: &BTreeMap<String, KernelMatrix>,
    pool: &[WeakLearnerSpec],
    config: &AdaboostConfig,
) -> Result<BoostedEnsemble, BoostError> {
    if pool.is_empty() {
        return Err(BoostError::EmptyPool);
    }
    if config.rounds < 1 {
        return Err(BoostError::BadRounds(config.rounds));
    }
    for spec in pool {
        if !kernels.contains_key(&spec.kernel_id) {
            return Err(BoostError::UnknownKernel(spec.kernel_id.clone()));
        }
    }
    let n = labels.len();
    let chance = 1.0 - 1.0 / n_classes as f64;
    let mut weights = SampleWeights::uniform(n);
    let mut rounds = Vec::new();

    for _ in 0..config.rounds {
        debug_assert!((weights.sum() - 1.0).abs() < 1e-9);
        let mut best: Option<(f64, Vec<usize>, MulticlassSvmModel, &WeakLearnerSpec)> = None;
        for spec in pool {
            let gram = &kernels[&spec.kernel_id];
            let costs: Vec<f64> = weights.w.iter().map(|&w| spec.c * n as f64 * w).collect();
            // Weights can underflow to zero cost; keep the solver's
            // positivity precondition intact.
            let costs: Vec<f64> = costs.into_iter().map(|c| c.max(1e-12)).collect();
            let model = train_multiclass(gram, labels, &costs, n_classes, config.tol, config.strategy)?;
            let mut eps = 0.0;
            let mut misclassified = Vec::new();
            for (i, &label) in labels.iter().enumerate() {
                let predicted = model.predict(gram.row(i))?;
                if predicted != label {
                    eps += weights.w[i];
                    misclassified.push(i);
                }
            }
            if best.as_ref().is_none_or(|(e, ..)| eps < *e) {
                best = Some((eps, misclassified, model, spec));
            }
        }
        let (eps, misclassified, model, spec) = best.unwrap();
        if eps >= chance {
            if rounds.is_empty() {
                return Err(BoostError::NoUsefulLearner(eps));
            }
            break;
        }
        let alpha = samme_alpha(eps, n_classes);
        weights = update_weights(&weights, &misclassified, alpha)?;
        rounds.push(BoostRound {
            kernel_id: spec.kernel_id.clone(),
            alpha,
            model,
        });
        if eps <= EPS_FLOOR {
            break;
        }
    }
    Ok(BoostedEnsemble { n_classes, rounds })
}

impl BoostedEnsemble {
    /// Weighted vote over rounds: argmax_c sum_t alpha_t [h_t = c], ties to
    /// the lowest class index. `per_kernel_rows` maps kernel id to the
    /// query's kernel row against the training samples.
    pub fn predict(&self, per_kernel_rows: &BTreeMap<String, Vec<f64>>) -> Result<usize, BoostError> {
        let mut scores = vec![0.0f64; self.n_classes];
        for round in &self.rounds {
            let row = per_kernel_rows
                .get(&round.kernel_id)
                .ok_or_else(|| BoostError::MissingKernelRow(round.kernel_id.clone()))?;
            let predicted = round.model.predict(row)?;
            scores[predicted] += round.alpha;
        }
        let mut best = 0;
        for c in 1..self.n_classes {
            if scores[c] > scores[best] {
                best = c;
            }
        }
        Ok(best)
    }
}
