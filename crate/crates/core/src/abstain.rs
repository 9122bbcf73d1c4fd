//! The prediction game extended with a reject option.
//!
//! On each example the predictor abstains with probability `p_i` at a fixed
//! cost `alpha`, otherwise it predicts `g_i` and pays `(1 - g_i z_i) / 2`.
//! Nature maximizes the average loss under the same correlation constraint
//! as the plain game.
//!
//! The exact value comes from nature's budget argument in the dual: start
//! every label at margin `1 - 2 alpha` (which costs the predictor nothing
//! beyond `alpha`), then buy the missing correlation by raising `|z_i|` to 1
//! in margin order. The predictor side uses the near-optimal strategy
//! `p = 1 - |g*|`, which does not depend on `alpha` below 1/2.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::game::{self, reaches};
use crate::model::{ordering2_keys, AbstainStrategy, VoteProfile};
use crate::numeric::{self, sgn, INPUT_TOL, SOLVER_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstainRegime {
    /// Abstaining everywhere is optimal and the value is `alpha`.
    Trivial,
    /// `alpha < 1/2` and the correlation constraint binds.
    Nontrivial,
    /// `alpha >= 1/2`: abstention never helps; solved by reduction to the
    /// plain game. This regime extends the published result.
    NoAbstainExtension,
}

/// Value of the abstain game with its bracketing bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstainValue {
    pub regime: AbstainRegime,
    pub value_exact: f64,
    pub value_lower: f64,
    pub value_upper: f64,
    /// Index where nature's budget runs out (1-based, margin order).
    pub w: Option<usize>,
    /// Correlation deficit `lambda - (1 - 2 alpha) mean|a|`.
    pub budget: f64,
}

/// Losses of the plain and abstaining predictors, and their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbstainBenefit {
    pub loss_no_abstain: f64,
    pub loss_abstain: f64,
    pub difference: f64,
}

/// Everything computed for one `(profile, alpha)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstainSolution {
    pub alpha: f64,
    pub regime: AbstainRegime,
    pub trivial: bool,
    pub v: usize,
    pub w: Option<usize>,
    pub budget: f64,
    pub value_exact: f64,
    pub value_lower: f64,
    pub value_upper: f64,
    /// The closed form that accompanies the budget argument. It disagrees
    /// with `value_exact` on generic instances; kept for comparison only.
    pub value_closed_form: Option<f64>,
    pub p_alg: Vec<f64>,
    pub loss_formula: f64,
    /// Loss of `(g*, p_alg)` against nature's `z*` from the plain game.
    pub loss_against_z_star: f64,
    pub loss_no_abstain: f64,
    pub loss_abstain: f64,
    pub benefit: f64,
    /// Threshold under the abstain ordering induced by `p_alg`.
    pub v2: Option<usize>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidCost { alpha })
    }
}

/// Whether `alpha <= (1/2)(1 - n lambda / sum|a_i|)`, i.e. nature can meet
/// the constraint with every `|z_i| <= 1 - 2 alpha`.
pub fn trivial_check(profile: &VoteProfile, alpha: f64) -> Result<bool> {
    check_alpha(alpha)?;
    let threshold = 0.5 * (1.0 - profile.n() as f64 * profile.lambda() / profile.abs_sum());
    Ok(alpha <= threshold)
}

/// `lambda - ((1 - 2 alpha)/n) sum|a_i|`.
pub fn budget(profile: &VoteProfile, alpha: f64) -> f64 {
    profile.lambda() - (1.0 - 2.0 * alpha) * profile.mean_abs()
}

/// Minimal 1-based `w` with `(2 alpha / n) sum_{j <= w} |a_j| >= c`.
///
/// Meaningful in the nontrivial regime; as `alpha -> 1/2` it recovers the
/// plain game's threshold.
pub fn find_w(profile: &VoteProfile, alpha: f64) -> usize {
    let n = profile.n();
    let c = budget(profile, alpha);
    let prefix = profile.prefix_abs();
    (1..=n)
        .find(|&i| 2.0 * alpha * prefix[i] / n as f64 >= c - INPUT_TOL)
        .unwrap_or(n)
}

/// Nature's labels from the budget greedy, in original order.
///
/// Trivial regime: `(1 - 2 alpha) sgn(a)`. Nontrivial: saturated before `w`,
/// fractional at `w`, `(1 - 2 alpha) sgn(a)` after. For `alpha >= 1/2` this
/// falls back to the plain game's `z*`.
pub fn budget_greedy_labels(profile: &VoteProfile, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if alpha >= 0.5 {
        return Ok(game::optimal_nature(profile));
    }
    let base = 1.0 - 2.0 * alpha;
    if trivial_check(profile, alpha)? {
        return Ok(profile.votes().iter().map(|&a| base * sgn(a)).collect());
    }
    let n = profile.n();
    let w = find_w(profile, alpha);
    let c = budget(profile, alpha);
    let spent = 2.0 * alpha * profile.prefix_abs()[w - 1] / n as f64;
    let margin_w = profile.sorted_abs()[w - 1];
    let level_w = (base + (c - spent) * n as f64 / margin_w).clamp(base, 1.0);
    let sorted: Vec<f64> = (0..n)
        .map(|k| {
            let s = sgn(profile.sorted_vote(k));
            match (k + 1).cmp(&w) {
                std::cmp::Ordering::Less => s,
                std::cmp::Ordering::Equal => s * level_w,
                std::cmp::Ordering::Greater => s * base,
            }
        })
        .collect();
    Ok(profile.unsort(&sorted))
}

/// Nature's dual objective `(1/n) sum min(alpha, (1 - |z_i|)/2)`.
pub fn dual_objective(z: &[f64], alpha: f64) -> f64 {
    numeric::sum(z.iter().map(|zi| alpha.min(0.5 * (1.0 - zi.abs())))) / z.len() as f64
}

/// Exact value of the abstain game and the bracketing bounds.
pub fn abstain_value(profile: &VoteProfile, alpha: f64) -> Result<AbstainValue> {
    check_alpha(alpha)?;
    let c = budget(profile, alpha);
    if alpha >= 0.5 {
        let value = 0.5 * (1.0 - game::game_value(profile));
        return Ok(AbstainValue {
            regime: AbstainRegime::NoAbstainExtension,
            value_exact: value,
            value_lower: value,
            value_upper: value,
            w: None,
            budget: c,
        });
    }
    if trivial_check(profile, alpha)? {
        return Ok(AbstainValue {
            regime: AbstainRegime::Trivial,
            value_exact: alpha,
            value_lower: alpha,
            value_upper: alpha,
            w: None,
            budget: c,
        });
    }
    let n = profile.n() as f64;
    let w = find_w(profile, alpha);
    let z = budget_greedy_labels(profile, alpha)?;
    let value_exact = dual_objective(&z, alpha);
    let value_lower = alpha * (1.0 - w as f64 / n);
    let value_upper = alpha * (1.0 - (w - 1) as f64 / n);
    debug_assert!(
        value_lower - SOLVER_TOL <= value_exact && value_exact <= value_upper + SOLVER_TOL,
        "abstain value {value_exact} outside [{value_lower}, {value_upper}]"
    );
    Ok(AbstainValue {
        regime: AbstainRegime::Nontrivial,
        value_exact,
        value_lower,
        value_upper,
        w: Some(w),
        budget: c,
    })
}

/// `alpha (1 - w/n) + (c n - 2 alpha sum_{j < w} |a_j|) / (2 n |a_w|)`.
///
/// Returns `None` outside the nontrivial regime.
pub fn value_closed_form(profile: &VoteProfile, alpha: f64) -> Result<Option<f64>> {
    if alpha >= 0.5 || trivial_check(profile, alpha)? {
        return Ok(None);
    }
    let n = profile.n() as f64;
    let w = find_w(profile, alpha);
    let c = budget(profile, alpha);
    let margin_w = profile.sorted_abs()[w - 1];
    let head = profile.prefix_abs()[w - 1];
    Ok(Some(
        alpha * (1.0 - w as f64 / n) + (c * n - 2.0 * alpha * head) / (2.0 * n * margin_w),
    ))
}

/// Near-optimal abstain probabilities: `1 - |g*_i|` for `alpha < 1/2`,
/// zero otherwise.
pub fn p_alg(profile: &VoteProfile, alpha: f64) -> Result<AbstainStrategy> {
    check_alpha(alpha)?;
    if alpha >= 0.5 {
        return AbstainStrategy::never(profile.n(), alpha);
    }
    let g = game::optimal_predictor(profile);
    let probs = g
        .iter()
        .map(|gi| (1.0 - gi.abs()).clamp(0.0, 1.0))
        .collect();
    AbstainStrategy::new(probs, alpha)
}

/// Expected loss `(1/n) sum [p_i alpha + (1/2)(1 - p_i)(1 - g_i z_i)]`.
pub fn abstain_loss(g: &[f64], p: &AbstainStrategy, z: &[f64]) -> Result<f64> {
    check_len("abstain strategy", g.len(), p.len())?;
    check_len("labels", g.len(), z.len())?;
    let alpha = p.alpha();
    let total = numeric::sum(
        g.iter()
            .zip(p.probs())
            .zip(z)
            .map(|((gi, pi), zi)| pi * alpha + 0.5 * (1.0 - pi) * (1.0 - gi * zi)),
    );
    Ok(total / g.len() as f64)
}

/// Worst-case loss stated for `(g*, p_alg)`:
/// `(1/2)(1 - v/n)` for `alpha >= 1/2`, otherwise
/// `alpha (1 - v/n) + (1/2 - alpha)(1/n) sum_{i > v} |a_i| / |a_v|`.
pub fn loss_formula(profile: &VoteProfile, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let n = profile.n() as f64;
    let v = game::find_threshold(profile);
    if alpha >= 0.5 {
        return Ok(0.5 * (1.0 - v as f64 / n));
    }
    Ok(alpha * (1.0 - v as f64 / n) + (0.5 - alpha) * tail_ratio_sum(profile, v) / n)
}

/// `sum_{i > v} |a_i| / |a_v|` in margin order.
pub(crate) fn tail_ratio_sum(profile: &VoteProfile, v: usize) -> f64 {
    let margins = profile.sorted_abs();
    let margin_v = margins[v - 1];
    numeric::sum(margins[v..].iter().map(|m| m / margin_v))
}

/// Loss of the plain minimax rule, `L_n = (1/2)(1 - (v-1)/n)`, against the
/// abstaining rule's bound
/// `L_a = (1/2)(1 - v/n) - (1/n) sum_{i > v} (1/2 - alpha)(1 - |a_i|/|a_v|)`.
///
/// For `alpha >= 1/2` the abstaining rule never abstains and
/// `L_a = (1/2)(1 - v/n)`.
pub fn benefit_of_abstention(profile: &VoteProfile, alpha: f64) -> Result<AbstainBenefit> {
    check_alpha(alpha)?;
    let n = profile.n() as f64;
    let v = game::find_threshold(profile);
    let margins = profile.sorted_abs();
    let margin_v = margins[v - 1];
    let loss_no_abstain = 0.5 * (1.0 - (v - 1) as f64 / n);
    let weight = (0.5 - alpha).max(0.0);
    let gain = numeric::sum(margins[v..].iter().map(|m| weight * (1.0 - m / margin_v))) / n;
    let loss_abstain = 0.5 * (1.0 - v as f64 / n) - gain;
    Ok(AbstainBenefit {
        loss_no_abstain,
        loss_abstain,
        difference: loss_no_abstain - loss_abstain,
    })
}

/// Value of the inner max-min game for a fixed abstain strategy `p`,
/// `max_g min_z (1/n) sum z_i (1 - p_i) g_i`, with its threshold `v2`
/// under the abstain ordering.
pub fn inner_game_value(profile: &VoteProfile, p: &AbstainStrategy) -> Result<(usize, f64)> {
    let votes = profile.votes();
    let ordering = ordering2_keys(votes, p)?;
    let n = profile.n();
    let lambda = profile.lambda();
    let margins: Vec<f64> = ordering.order.iter().map(|&i| votes[i].abs()).collect();
    let prefix = numeric::prefix_sums(&margins);
    let v2 = (1..=n)
        .find(|&i| reaches(prefix[i], n, lambda))
        .unwrap_or(n);
    let keep = |k: usize| 1.0 - p.probs()[ordering.order[k]];
    let head = numeric::sum((0..v2 - 1).map(keep)) / n as f64;
    let residual = lambda - prefix[v2 - 1] / n as f64;
    Ok((v2, head + keep(v2 - 1) / margins[v2 - 1] * residual))
}

/// Solves the abstain game and evaluates the near-optimal strategy.
pub fn solve(profile: &VoteProfile, alpha: f64) -> Result<AbstainSolution> {
    let value = abstain_value(profile, alpha)?;
    let plain = game::solve(profile);
    // abstaining everywhere is minimax optimal in the trivial regime
    let p = if value.regime == AbstainRegime::Trivial {
        AbstainStrategy::always(profile.n(), alpha)?
    } else {
        p_alg(profile, alpha)?
    };
    let loss_against_z_star = abstain_loss(&plain.g_star, &p, &plain.z_star)?;
    let benefit = benefit_of_abstention(profile, alpha)?;
    let v2 = match inner_game_value(profile, &p) {
        Ok((v2, _)) => Some(v2),
        Err(Error::DegenerateAbstain { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(AbstainSolution {
        alpha,
        regime: value.regime,
        trivial: value.regime == AbstainRegime::Trivial,
        v: plain.v,
        w: value.w,
        budget: value.budget,
        value_exact: value.value_exact,
        value_lower: value.value_lower,
        value_upper: value.value_upper,
        value_closed_form: value_closed_form(profile, alpha)?,
        p_alg: p.probs().to_vec(),
        loss_formula: loss_formula(profile, alpha)?,
        loss_against_z_star,
        loss_no_abstain: benefit.loss_no_abstain,
        loss_abstain: benefit.loss_abstain,
        benefit: benefit.difference,
        v2,
    })
}
