//! Kernel SVM dual solver (sequential minimal optimization with
//! maximal-violating-pair working-set selection) and one-vs-one multiclass
//! composition with vote and decision-DAG evaluation.
//!
//! Per-sample costs C_i are first-class so boosting can reweight samples
//! through the cost vector.

use thiserror::Error;

use crate::kernels::KernelMatrix;

const TAU: f64 = 1e-12;
const MAX_PAIR_UPDATES: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("degenerate labels: both classes must be present")]
    DegenerateLabels,
    #[error("non-finite kernel entry at ({0},{1})")]
    NonFiniteKernel(usize, usize),
    #[error("cost must be positive, got {0} at sample {1}")]
    BadCost(f64, usize),
    #[error("label at sample {0} must be +1 or -1")]
    BadLabel(usize),
    #[error("input length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("iteration limit of {MAX_PAIR_UPDATES} pair updates reached")]
    IterationLimit,
    #[error("multiclass training needs >= 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("class {0} has no samples")]
    EmptyClass(usize),
}

/// Dual-form binary SVM solution. `indices` address the sample space the
/// caller trained on; `coef` holds the signed coefficients alpha_i * y_i.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvmModel {
    pub indices: Vec<usize>,
    pub coef: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub tol: f64,
}

impl BinarySvmModel {
    /// Decision functional: sum of coef_i * k_row_i plus bias. `k_row` must
    /// align with `indices`.
    pub fn decision_value(&self, k_row: &[f64]) -> Result<f64, SvmError> {
        if k_row.len() != self.indices.len() {
            return Err(SvmError::LengthMismatch(k_row.len(), self.indices.len()));
        }
        Ok(self
            .coef
            .iter()
            .zip(k_row)
            .map(|(c, k)| c * k)
            .sum::<f64>()
            + self.bias)
    }
}

/// Outcome of one SMO run, including the dual objective for diagnostics.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub model: BinarySvmModel,
    pub alpha: Vec<f64>,
    pub dual_objective: f64,
    pub pair_updates: u64,
}

/// Solve the dual
///   max  sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
///   s.t. 0 <= alpha_i <= C_i,  sum alpha_i y_i = 0
/// stopping when the maximal KKT violation drops to `tol`.
pub fn smo_train(
    gram: &KernelMatrix,
    labels: &[f64],
    costs: &[f64],
    tol: f64,
) -> Result<SmoSolution, SvmError> {
    let n = gram.n();
    if labels.len() != n {
        return Err(SvmError::LengthMismatch(labels.len(), n));
    }
    if costs.len() != n {
        return Err(SvmError::LengthMismatch(costs.len(), n));
    }
    for (i, &y) in labels.iter().enumerate() {
        if y != 1.0 && y != -1.0 {
            return Err(SvmError::BadLabel(i));
        }
    }
    for (i, &c) in costs.iter().enumerate() {
        if !c.is_finite() || c <= 0.0 {
            return Err(SvmError::BadCost(c, i));
        }
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(SvmError::DegenerateLabels);
    }
    for i in 0..n {
        for j in 0..n {
            if !gram.get(i, j).is_finite() {
                return Err(SvmError::NonFiniteKernel(i, j));
            }
        }
    }

    let mut alpha = vec![0.0f64; n];
    // Gradient of 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij; starts at -1.
    let mut grad = vec![-1.0f64; n];
    let q = |i: usize, j: usize| labels[i] * labels[j] * gram.get(i, j);
    let mut updates: u64 = 0;

    loop {
        // Maximal violating pair: i maximizes -y_t G_t over I_up, j
        // minimizes it over I_low.
        let mut m_up = f64::NEG_INFINITY;
        let mut m_low = f64::INFINITY;
        let mut i_sel = usize::MAX;
        let mut j_sel = usize::MAX;
        for t in 0..n {
            let v = -labels[t] * grad[t];
            let in_up = (labels[t] > 0.0 && alpha[t] < costs[t])
                || (labels[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (labels[t] > 0.0 && alpha[t] > 0.0)
                || (labels[t] < 0.0 && alpha[t] < costs[t]);
            if in_up && v > m_up {
                m_up = v;
                i_sel = t;
            }
            if in_low && v < m_low {
                m_low = v;
                j_sel = t;
            }
        }
        if m_up - m_low <= tol || i_sel == usize::MAX || j_sel == usize::MAX {
            break;
        }
        let (i, j) = (i_sel, j_sel);
        let old_i = alpha[i];
        let old_j = alpha[j];
        let (ci, cj) = (costs[i], costs[j]);
        // Curvature along the feasible direction is |phi_i - phi_j|^2 in
        // both branches: the label product flips the sign of the cross term
        // in Q space but not in kernel space.
        if labels[i] != labels[j] {
            let mut quad = gram.get(i, i) + gram.get(j, j) - 2.0 * gram.get(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let mut quad = gram.get(i, i) + gram.get(j, j) - 2.0 * gram.get(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        if di != 0.0 || dj != 0.0 {
            for (t, g) in grad.iter_mut().enumerate() {
                *g += q(t, i) * di + q(t, j) * dj;
            }
        }
        updates += 1;
        if updates >= MAX_PAIR_UPDATES {
            return Err(SvmError::IterationLimit);
        }
    }

    // Bias: average -y_t G_t over free support vectors; midpoint of the
    // feasible interval when no multiplier is strictly inside its box.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut m_up = f64::NEG_INFINITY;
    let mut m_low = f64::INFINITY;
    for t in 0..n {
        let v = -labels[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < costs[t] {
            free_sum += v;
            free_count += 1;
        }
        let in_up =
            (labels[t] > 0.0 && alpha[t] < costs[t]) || (labels[t] < 0.0 && alpha[t] > 0.0);
        let in_low =
            (labels[t] > 0.0 && alpha[t] > 0.0) || (labels[t] < 0.0 && alpha[t] < costs[t]);
        if in_up {
            m_up = m_up.max(v);
        }
        if in_low {
            m_low = m_low.min(v);
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (m_up + m_low) / 2.0
    };

    // Dual objective: sum(alpha) - 1/2 a'Qa = sum(alpha) - 1/2 a'(G + e)
    // since G = Qa - e.
    let dual_objective = alpha.iter().sum::<f64>()
        - 0.5
            * alpha
                .iter()
                .zip(&grad)
                .map(|(a, g)| a * (g + 1.0))
                .sum::<f64>();

    let mut indices = Vec::new();
    let mut coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            indices.push(t);
            coef.push(alpha[t] * labels[t]);
        }
    }
    let c_max = costs.iter().cloned().fold(0.0f64, f64::max);
    Ok(SmoSolution {
        model: BinarySvmModel {
            indices,
            coef,
            bias,
            c: c_max,
            tol,
        },
        alpha,
        dual_objective,
        pair_updates: updates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MulticlassStrategy {
    Vote,
    Dag,
}

impl MulticlassStrategy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vote" => Some(MulticlassStrategy::Vote),
            "dag" => Some(MulticlassStrategy::Dag),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MulticlassStrategy::Vote => "vote",
            MulticlassStrategy::Dag => "dag",
        }
    }
}

/// One binary machine of the one-vs-one decomposition. A positive decision
/// value votes for `class_pos`. The embedded model's `indices` are global
/// training-sample indices so a full kernel row can be shared by all pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseModel {
    pub class_pos: usize,
    pub class_neg: usize,
    pub model: BinarySvmModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassSvmModel {
    pub n_classes: usize,
    pub pairwise: Vec<PairwiseModel>,
    pub strategy: MulticlassStrategy,
}

/// Train one binary SVM per unordered class pair on that pair's samples
/// only. `costs` are per-sample and pass straight through to the solver.
pub fn train_multiclass(
    gram: &KernelMatrix,
    labels: &[usize],
    costs: &[f64],
    n_classes: usize,
    tol: f64,
    strategy: MulticlassStrategy,
) -> Result<MulticlassSvmModel, SvmError> {
    if n_classes < 2 {
        return Err(SvmError::TooFewClasses(n_classes));
    }
    if labels.len() != gram.n() {
        return Err(SvmError::LengthMismatch(labels.len(), gram.n()));
    }
    for c in 0..n_classes {
        if !labels.contains(&c) {
            return Err(SvmError::EmptyClass(c));
        }
    }
    let mut pairwise = Vec::with_capacity(n_classes * (n_classes - 1) / 2);
    for a in 0..n_classes {
        for b in a + 1..n_classes {
            let sub_idx: Vec<usize> = (0..labels.len())
                .filter(|&i| labels[i] == a || labels[i] == b)
                .collect();
            let sub_labels: Vec<f64> = sub_idx
                .iter()
                .map(|&i| if labels[i] == a { 1.0 } else { -1.0 })
                .collect();
            let sub_costs: Vec<f64> = sub_idx.iter().map(|&i| costs[i]).collect();
            let sub_gram = gram.restrict(&sub_idx);
            let solution = smo_train(&sub_gram, &sub_labels, &sub_costs, tol)?;
            let mut model = solution.model;
            // Lift support indices back to the global sample space.
            model.indices = model.indices.iter().map(|&i| sub_idx[i]).collect();
            pairwise.push(PairwiseModel {
                class_pos: a,
                class_neg: b,
                model,
            });
        }
    }
    Ok(MulticlassSvmModel {
        n_classes,
        pairwise,
        strategy,
    })
}

impl MulticlassSvmModel {
    fn pair(&self, a: usize, b: usize) -> &PairwiseModel {
        self.pairwise
            .iter()
            .find(|p| p.class_pos == a.min(b) && p.class_neg == a.max(b))
            .expect("pairwise model missing")
    }

    fn pair_winner(&self, a: usize, b: usize, k_row: &[f64]) -> Result<usize, SvmError> {
        let p = self.pair(a, b);
        let support: Vec<f64> = p
            .model
            .indices
            .iter()
            .map(|&i| {
                k_row
                    .get(i)
                    .copied()
                    .ok_or(SvmError::LengthMismatch(k_row.len(), i + 1))
            })
            .collect::<Result<_, _>>()?;
        let d = p.model.decision_value(&support)?;
        Ok(if d >= 0.0 { p.class_pos } else { p.class_neg })
    }

    /// Predict from a full kernel row (query vs every training sample).
    /// Returns the class and the number of binary evaluations performed.
    pub fn predict_with_stats(&self, k_row: &[f64]) -> Result<(usize, usize), SvmError> {
        match self.strategy {
            MulticlassStrategy::Vote => {
                let mut votes = vec![0usize; self.n_classes];
                for p in &self.pairwise {
                    let w = self.pair_winner(p.class_pos, p.class_neg, k_row)?;
                    votes[w] += 1;
                }
                let best = (0..self.n_classes)
                    .max_by_key(|&c| (votes[c], std::cmp::Reverse(c)))
                    .unwrap();
                Ok((best, self.pairwise.len()))
            }
            MulticlassStrategy::Dag => {
                // Standard decision-DAG elimination over classes sorted by
                // index: exactly C-1 binary evaluations.
                let mut lo = 0usize;
                let mut hi = self.n_classes - 1;
                let mut evals = 0usize;
                while lo < hi {
                    let w = self.pair_winner(lo, hi, k_row)?;
                    evals += 1;
                    if w == lo {
                        hi -= 1;
                    } else {
                        lo += 1;
                    }
                }
                Ok((lo, evals))
            }
        }
    }

    pub fn predict(&self, k_row: &[f64]) -> Result<usize, SvmError> {
        Ok(self.predict_with_stats(k_row)?.0)
    }
}
