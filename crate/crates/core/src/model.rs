//! Domain types shared by every solver: the ensemble prediction matrix,
//! weight vectors over hypotheses, vote profiles and strategy vectors.
//!
//! Two orderings of the test examples are used throughout. The primary
//! ordering sorts by vote margin `|a_i|` descending; the abstain ordering
//! sorts by `|a_i| / (1 - p_i)` descending. Both break ties by ascending
//! original index so that every output is reproducible.

use std::ops::Deref;

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::numeric::{self, INPUT_TOL};

/// `n x H` matrix of base-classifier predictions, entries in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnsembleMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
}

impl EnsembleMatrix {
    pub fn from_rows(rows: Vec<Vec<i8>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("ensemble matrix has no rows".into()));
        }
        let h = rows[0].len();
        if h == 0 {
            return Err(Error::InvalidInput("ensemble matrix has no columns".into()));
        }
        let mut entries = Vec::with_capacity(n * h);
        for (i, row) in rows.into_iter().enumerate() {
            check_len("ensemble matrix row width", h, row.len())?;
            for (j, &x) in row.iter().enumerate() {
                if x != 1 && x != -1 {
                    return Err(Error::InvalidInput(format!(
                        "entry ({i}, {j}) is {x}; predictions must be -1 or 1"
                    )));
                }
            }
            entries.extend(row);
        }
        Ok(Self {
            rows: n,
            cols: h,
            entries,
        })
    }

    /// Number of examples (rows).
    pub fn n(&self) -> usize {
        self.rows
    }

    /// Number of hypotheses (columns).
    pub fn h(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.entries.chunks_exact(self.cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightRole {
    Posterior,
    Prior,
}

/// Probability distribution over the `H` hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    role: WeightRole,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, role: WeightRole) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("weight vector is empty".into()));
        }
        if let Some((j, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "weight {j} is {w}; weights must be finite and nonnegative"
            )));
        }
        let total = numeric::sum(weights.iter().copied());
        if (total - 1.0).abs() > INPUT_TOL {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { weights, role })
    }

    pub fn uniform(h: usize, role: WeightRole) -> Self {
        assert!(h > 0, "uniform weights need at least one hypothesis");
        Self {
            weights: vec![1.0 / h as f64; h],
            role,
        }
    }

    pub fn point_mass(h: usize, j: usize, role: WeightRole) -> Self {
        assert!(j < h);
        let mut weights = vec![0.0; h];
        weights[j] = 1.0;
        Self { weights, role }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn role(&self) -> WeightRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Vote vector `a` with its margin ordering and the correlation bound `lambda`.
///
/// Construction enforces `|a_i| <= 1`, `lambda > 0` and the feasibility
/// condition `mean |a_i| >= lambda`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoteProfile {
    votes: Vec<f64>,
    order: Vec<usize>,
    lambda: f64,
    #[serde(skip)]
    sorted_abs: Vec<f64>,
    #[serde(skip)]
    prefix: Vec<f64>,
}

/// Sorts `a` by margin and validates `lambda` against it.
pub fn sort_profile(votes: &[f64], lambda: f64) -> Result<VoteProfile> {
    VoteProfile::new(votes.to_vec(), lambda)
}

impl VoteProfile {
    pub fn new(mut votes: Vec<f64>, lambda: f64) -> Result<Self> {
        if votes.is_empty() {
            return Err(Error::InvalidInput("vote vector is empty".into()));
        }
        for (i, a) in votes.iter_mut().enumerate() {
            if !a.is_finite() || a.abs() > 1.0 + INPUT_TOL {
                return Err(Error::InvalidInput(format!(
                    "vote {i} is {a}; votes must lie in [-1, 1]"
                )));
            }
            *a = a.clamp(-1.0, 1.0);
        }
        if lambda.is_nan() {
            return Err(Error::InvalidInput("lambda is NaN".into()));
        }
        if lambda <= 0.0 {
            return Err(Error::DegenerateBound { lambda });
        }
        let order = margin_order(&votes);
        let sorted_abs: Vec<f64> = order.iter().map(|&i| votes[i].abs()).collect();
        let prefix = numeric::prefix_sums(&sorted_abs);
        let n = votes.len() as f64;
        let mean_abs_vote = prefix[votes.len()] / n;
        if mean_abs_vote < lambda - INPUT_TOL {
            return Err(Error::InfeasibleConstraint {
                mean_abs_vote,
                lambda,
            });
        }
        Ok(Self {
            votes,
            order,
            lambda,
            sorted_abs,
            prefix,
        })
    }

    pub fn n(&self) -> usize {
        self.votes.len()
    }

    /// Votes in original example order.
    pub fn votes(&self) -> &[f64] {
        &self.votes
    }

    /// `order[k]` is the original index of the k-th largest margin.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `|a|` in margin order.
    pub fn sorted_abs(&self) -> &[f64] {
        &self.sorted_abs
    }

    /// Compensated prefix sums of [`sorted_abs`](Self::sorted_abs); length `n + 1`.
    pub fn prefix_abs(&self) -> &[f64] {
        &self.prefix
    }

    pub fn abs_sum(&self) -> f64 {
        self.prefix[self.n()]
    }

    pub fn mean_abs(&self) -> f64 {
        self.abs_sum() / self.n() as f64
    }

    /// Vote of the k-th example in margin order (0-based).
    pub fn sorted_vote(&self, k: usize) -> f64 {
        self.votes[self.order[k]]
    }

    /// Same votes with a different correlation bound.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.votes.clone(), lambda)
    }

    /// Maps a vector given in margin order back to original order.
    pub fn unsort(&self, sorted: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; sorted.len()];
        for (k, &i) in self.order.iter().enumerate() {
            out[i] = sorted[k];
        }
        out
    }
}

fn margin_order(votes: &[f64]) -> Vec<usize> {
    descending_order(&votes.iter().map(|a| a.abs()).collect::<Vec<_>>())
}

/// Indices sorting `keys` descending; stable, so ties keep ascending index.
fn descending_order(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&i, &j| keys[j].total_cmp(&keys[i]));
    order
}

macro_rules! box_vector {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Result<Self> {
                for (i, x) in values.iter().enumerate() {
                    if !x.is_finite() || x.abs() > 1.0 {
                        return Err(Error::InvalidInput(format!(
                            concat!($what, " {} is {}; must lie in [-1, 1]"),
                            i, x
                        )));
                    }
                }
                Ok(Self(values))
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

box_vector!(
    /// Nature's (possibly stochastic) labels `z` in `[-1, 1]^n`.
    LabelVector,
    "label"
);

box_vector!(
    /// Confidence-rated predictions `g` in `[-1, 1]^n`.
    PredictionVector,
    "prediction"
);

/// Per-example abstain probabilities together with the abstain cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstainStrategy {
    probs: Vec<f64>,
    alpha: f64,
}

impl AbstainStrategy {
    pub fn new(probs: Vec<f64>, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidCost { alpha });
        }
        for (i, p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidInput(format!(
                    "abstain probability {i} is {p}; must lie in [0, 1]"
                )));
            }
        }
        Ok(Self { probs, alpha })
    }

    pub fn never(n: usize, alpha: f64) -> Result<Self> {
        Self::new(vec![0.0; n], alpha)
    }

    pub fn always(n: usize, alpha: f64) -> Result<Self> {
        Self::new(vec![1.0; n], alpha)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Expected fraction of abstentions.
    pub fn abstain_fraction(&self) -> f64 {
        numeric::sum(self.probs.iter().copied()) / self.probs.len() as f64
    }
}

/// Labeled training sample: `m x H` predictions and `m` labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabeledSample {
    predictions: EnsembleMatrix,
    labels: Vec<i8>,
}

impl LabeledSample {
    pub fn new(predictions: EnsembleMatrix, labels: Vec<i8>) -> Result<Self> {
        check_len("training labels", predictions.n(), labels.len())?;
        if let Some((i, y)) = labels
            .iter()
            .enumerate()
            .find(|(_, y)| **y != 1 && **y != -1)
        {
            return Err(Error::InvalidInput(format!(
                "label {i} is {y}; labels must be -1 or 1"
            )));
        }
        Ok(Self {
            predictions,
            labels,
        })
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn h(&self) -> usize {
        self.predictions.h()
    }

    pub fn predictions(&self) -> &EnsembleMatrix {
        &self.predictions
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }
}

/// `a = F q`: the Gibbs classifier's expected prediction on each example.
pub fn compute_votes(f: &EnsembleMatrix, q: &WeightVector) -> Result<Vec<f64>> {
    check_len("posterior length", f.h(), q.len())?;
    Ok(f.rows()
        .map(|row| {
            let a = numeric::sum(row.iter().zip(q.weights()).map(|(&x, &w)| x as f64 * w));
            a.clamp(-1.0, 1.0)
        })
        .collect())
}

/// Average correlation `(1/n) g.z`.
pub fn payoff(g: &[f64], z: &[f64]) -> Result<f64> {
    check_len("payoff vectors", g.len(), z.len())?;
    if g.is_empty() {
        return Err(Error::InvalidInput("payoff of empty vectors".into()));
    }
    Ok(numeric::sum(g.iter().zip(z).map(|(x, y)| x * y)) / g.len() as f64)
}

/// Abstain-ordering keys `|a_i| / (1 - p_i)` and their descending order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstainOrdering {
    pub keys: Vec<f64>,
    pub order: Vec<usize>,
}

/// Largest abstain probability accepted by the abstain ordering.
pub const MAX_ORDERED_ABSTAIN: f64 = 1.0 - 1e-9;

pub fn ordering2_keys(votes: &[f64], p: &AbstainStrategy) -> Result<AbstainOrdering> {
    check_len("abstain strategy", votes.len(), p.len())?;
    let mut keys = Vec::with_capacity(votes.len());
    for (i, (a, &prob)) in votes.iter().zip(p.probs()).enumerate() {
        if prob > MAX_ORDERED_ABSTAIN {
            return Err(Error::DegenerateAbstain { index: i, prob });
        }
        keys.push(a.abs() / (1.0 - prob));
    }
    let order = descending_order(&keys);
    Ok(AbstainOrdering { keys, order })
}
