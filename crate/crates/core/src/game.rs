//! The confidence-rated prediction game without abstention.
//!
//! The predictor picks `g` in `[-1, 1]^n`, nature picks labels `z` in
//! `[-1, 1]^n` subject to `(1/n) z.a >= lambda`, and the payoff is the
//! average correlation `(1/n) z.g`. Everything is solved in closed form
//! from the margin ordering of the votes; results are reported in the
//! original example order.

use serde::Serialize;

use crate::model::VoteProfile;
use crate::numeric::{sgn, INPUT_TOL};

/// Optimal play and value of the game for one vote profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameSolution {
    /// 1-based threshold index in margin order.
    pub v: usize,
    pub value: f64,
    pub lower_bound: f64,
    pub g_star: Vec<f64>,
    pub z_star: Vec<f64>,
}

/// True once a margin-ordered prefix sum covers the correlation budget.
#[inline]
pub(crate) fn reaches(prefix_sum: f64, n: usize, lambda: f64) -> bool {
    prefix_sum / n as f64 >= lambda - INPUT_TOL
}

/// Minimal 1-based `v` with `(1/n) sum_{j <= v} |a_j| >= lambda` in margin order.
pub fn find_threshold(profile: &VoteProfile) -> usize {
    let n = profile.n();
    let prefix = profile.prefix_abs();
    (1..=n)
        .find(|&i| reaches(prefix[i], n, profile.lambda()))
        .unwrap_or(n)
}

/// Remaining correlation `lambda - (1/n) sum_{i < v} |a_i|`.
fn residual(profile: &VoteProfile, v: usize) -> f64 {
    profile.lambda() - profile.prefix_abs()[v - 1] / profile.n() as f64
}

/// Value of the game.
pub fn game_value(profile: &VoteProfile) -> f64 {
    let v = find_threshold(profile);
    let n = profile.n() as f64;
    let margin_v = profile.sorted_abs()[v - 1];
    (v - 1) as f64 / n + residual(profile, v) / margin_v
}

/// Optimal predictor: the majority vote on the `v` largest margins, the
/// vote rescaled by `1/|a_v|` elsewhere.
pub fn optimal_predictor(profile: &VoteProfile) -> Vec<f64> {
    let v = find_threshold(profile);
    let margin_v = profile.sorted_abs()[v - 1];
    let sorted: Vec<f64> = (0..profile.n())
        .map(|k| {
            let a = profile.sorted_vote(k);
            if k < v {
                sgn(a)
            } else {
                (a / margin_v).clamp(-1.0, 1.0)
            }
        })
        .collect();
    profile.unsort(&sorted)
}

/// Optimal labels for nature: saturate the first `v - 1` margins, spend the
/// rest of the budget on index `v`, zero beyond. This is the canonical
/// choice; coordinates after `v` do not affect the payoff against `g*`.
pub fn optimal_nature(profile: &VoteProfile) -> Vec<f64> {
    let v = find_threshold(profile);
    let n = profile.n() as f64;
    let margin_v = profile.sorted_abs()[v - 1];
    let sorted: Vec<f64> = (0..profile.n())
        .map(|k| {
            let a = profile.sorted_vote(k);
            if k + 1 < v {
                sgn(a)
            } else if k + 1 == v {
                (sgn(a) * n * residual(profile, v) / margin_v).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    profile.unsort(&sorted)
}

/// Nature's labels built by the sequential greedy procedure: repeatedly take
/// the unselected example with the largest margin, saturate it while the
/// running correlation stays below `lambda`, and finish with a fractional
/// step on the example that crosses it.
pub fn nature_greedy(profile: &VoteProfile) -> Vec<f64> {
    let n = profile.n();
    let votes = profile.votes();
    let lambda = profile.lambda();
    let mut z = vec![0.0; n];
    let mut selected = vec![false; n];
    let mut covered = crate::numeric::KahanSum::new();
    for _ in 0..n {
        // argmax of |a_j| over the unselected set, lowest index on ties
        let i = (0..n)
            .filter(|&j| !selected[j])
            .fold(None::<usize>, |best, j| match best {
                Some(b) if votes[b].abs() >= votes[j].abs() => Some(b),
                _ => Some(j),
            })
            .expect("unselected example available");
        selected[i] = true;
        covered.add(votes[i].abs());
        if !reaches(covered.value(), n, lambda) {
            z[i] = sgn(votes[i]);
        } else {
            let excess = covered.value() - n as f64 * lambda;
            z[i] = (sgn(votes[i]) - excess / votes[i]).clamp(-1.0, 1.0);
            break;
        }
    }
    z
}

/// `lambda + (1/n) sum_{i < v} (1 - |a_i|)`, a lower bound on the value.
pub fn value_lower_bound(profile: &VoteProfile) -> f64 {
    let v = find_threshold(profile);
    let n = profile.n() as f64;
    let disagreement: f64 =
        crate::numeric::sum(profile.sorted_abs()[..v - 1].iter().map(|m| 1.0 - m));
    profile.lambda() + disagreement / n
}

/// Solves the game for `profile`.
pub fn solve(profile: &VoteProfile) -> GameSolution {
    GameSolution {
        v: find_threshold(profile),
        value: game_value(profile),
        lower_bound: value_lower_bound(profile),
        g_star: optimal_predictor(profile),
        z_star: optimal_nature(profile),
    }
}
