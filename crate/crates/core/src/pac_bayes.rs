//! PAC-Bayes quantities that turn a labeled sample into a certified
//! correlation bound `lambda_hat` for the game solvers, plus the error,
//! abstain and mistake probability bounds of the resulting predictors.
//!
//! All logarithms are natural.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::game;
use crate::model::{LabeledSample, VoteProfile, WeightRole, WeightVector};
use crate::numeric;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PacBayesParams {
    pub m: usize,
    pub delta: f64,
    pub eta: f64,
}

impl PacBayesParams {
    pub fn new(m: usize, delta: f64, eta: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("training size must be positive".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidInput(format!(
                "delta = {delta} must lie in (0, 1)"
            )));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "eta = {eta} must be finite and >= 0"
            )));
        }
        Ok(Self { m, delta, eta })
    }
}

/// Bound quantities for one posterior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub m: usize,
    pub delta: f64,
    pub gibbs_train_error: f64,
    pub kl_posterior_prior: f64,
    pub epsilon: f64,
    pub lambda_hat: f64,
    /// Right-hand side of the KL-form bound on the training sample.
    pub kl_budget: f64,
    pub degenerate: bool,
    /// Error probability bound clipped to `[0, 1]`.
    pub error_bound: Option<f64>,
    pub error_bound_raw: Option<f64>,
    pub abstain_bound: Option<f64>,
    pub mistake_bound: Option<f64>,
}

/// Binary KL divergence `p ln(p/q) + (1-p) ln((1-p)/(1-q))`, with `0 ln 0 = 0`.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidInput(format!(
            "Bernoulli parameters ({p}, {q}) must lie in [0, 1]"
        )));
    }
    let term = |x: f64, y: f64| -> Result<f64> {
        if x == 0.0 {
            Ok(0.0)
        } else if y == 0.0 {
            Err(Error::InfiniteDivergence(format!(
                "KL({p} || {q}) is infinite"
            )))
        } else {
            Ok(x * (x / y).ln())
        }
    };
    Ok((term(p, q)? + term(1.0 - p, 1.0 - q)?).max(0.0))
}

/// `KL(q || q0) = sum q_j ln(q_j / q0_j)`.
pub fn kl_discrete(q: &WeightVector, q0: &WeightVector) -> Result<f64> {
    check_len("prior length", q.len(), q0.len())?;
    let mut acc = numeric::KahanSum::new();
    for (j, (&qj, &q0j)) in q.weights().iter().zip(q0.weights()).enumerate() {
        if qj == 0.0 {
            continue;
        }
        if q0j == 0.0 {
            return Err(Error::InfiniteDivergence(format!(
                "posterior puts mass {qj} on hypothesis {j} where the prior is zero"
            )));
        }
        acc.add(qj * (qj / q0j).ln());
    }
    Ok(acc.value().max(0.0))
}

/// `sqrt((2/m)(kl + ln(2(m+1)/delta)))`.
pub fn epsilon_from_kl(m: usize, kl: f64, delta: f64) -> f64 {
    let m = m as f64;
    ((2.0 / m) * (kl + (2.0 * (m + 1.0) / delta).ln())).sqrt()
}

/// Deviation term between the Gibbs error on the training sample and on the
/// test set.
pub fn epsilon(params: &PacBayesParams, q: &WeightVector, q0: &WeightVector) -> Result<f64> {
    Ok(epsilon_from_kl(params.m, kl_discrete(q, q0)?, params.delta))
}

/// Empirical error of every hypothesis on the sample.
pub fn hypothesis_errors(sample: &LabeledSample) -> Vec<f64> {
    let f = sample.predictions();
    let m = sample.m() as f64;
    let mut mistakes = vec![0usize; sample.h()];
    for (row, &y) in f.rows().zip(sample.labels()) {
        for (count, &x) in mistakes.iter_mut().zip(row) {
            if x != y {
                *count += 1;
            }
        }
    }
    mistakes.into_iter().map(|c| c as f64 / m).collect()
}

/// Expected empirical error of a hypothesis drawn from `q`.
pub fn gibbs_train_error(sample: &LabeledSample, q: &WeightVector) -> Result<f64> {
    check_len("posterior length", sample.h(), q.len())?;
    let errors = hypothesis_errors(sample);
    let e = numeric::sum(errors.iter().zip(q.weights()).map(|(e, w)| e * w));
    Ok(e.clamp(0.0, 1.0))
}

/// `1 - 2 E_q[err_S] - 2 epsilon`. Values `<= 0` are degenerate.
pub fn lambda_hat(gibbs_train_error: f64, epsilon: f64) -> f64 {
    1.0 - 2.0 * gibbs_train_error - 2.0 * epsilon
}

/// Right-hand side of the KL-form bound on the training sample,
/// `(1/m)(KL(q || q0) + ln((m+1)/delta))`.
pub fn kl_bound_train(
    sample: &LabeledSample,
    q: &WeightVector,
    q0: &WeightVector,
    delta: f64,
) -> Result<f64> {
    let m = sample.m() as f64;
    Ok((kl_discrete(q, q0)? + ((m + 1.0) / delta).ln()) / m)
}

/// Exponential-weights posterior `q(h) ~ exp(-eta err(h, S))`.
pub fn exp_weights_posterior(sample: &LabeledSample, eta: f64) -> Result<WeightVector> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "eta = {eta} must be finite and >= 0"
        )));
    }
    let errors = hypothesis_errors(sample);
    if eta == 0.0 {
        return Ok(WeightVector::uniform(errors.len(), WeightRole::Posterior));
    }
    let best = errors.iter().copied().fold(f64::INFINITY, f64::min);
    let unnormalized: Vec<f64> = errors.iter().map(|e| (-eta * (e - best)).exp()).collect();
    let total = numeric::sum(unnormalized.iter().copied());
    let weights = unnormalized.iter().map(|w| w / total).collect();
    WeightVector::new(weights, WeightRole::Posterior)
}

/// Computes the sample-only part of the report (no vote profile needed).
pub fn bound_report(
    sample: &LabeledSample,
    q: &WeightVector,
    q0: &WeightVector,
    delta: f64,
) -> Result<BoundReport> {
    let params = PacBayesParams::new(sample.m(), delta, 0.0)?;
    let gibbs = gibbs_train_error(sample, q)?;
    let kl = kl_discrete(q, q0)?;
    let eps = epsilon_from_kl(params.m, kl, delta);
    let lam = lambda_hat(gibbs, eps);
    Ok(BoundReport {
        m: params.m,
        delta,
        gibbs_train_error: gibbs,
        kl_posterior_prior: kl,
        epsilon: eps,
        lambda_hat: lam,
        kl_budget: kl_bound_train(sample, q, q0, delta)?,
        degenerate: lam <= 0.0,
        error_bound: None,
        error_bound_raw: None,
        abstain_bound: None,
        mistake_bound: None,
    })
}

fn require_nondegenerate(report: &BoundReport) -> Result<()> {
    if report.lambda_hat <= 0.0 {
        Err(Error::DegenerateBound {
            lambda: report.lambda_hat,
        })
    } else {
        Ok(())
    }
}

/// Error probability of the minimax predictor,
/// `E_q[err_S] - (1/2n) sum_{i < v} (1 - |a_i|) + epsilon + delta`.
///
/// Returns `(raw, clipped to [0, 1])`.
pub fn error_probability_bound(
    profile: &VoteProfile,
    report: &BoundReport,
    delta: f64,
) -> Result<(f64, f64)> {
    require_nondegenerate(report)?;
    let v = game::find_threshold(profile);
    let n = profile.n() as f64;
    let disagreement = numeric::sum(profile.sorted_abs()[..v - 1].iter().map(|m| 1.0 - m));
    let raw = report.gibbs_train_error - disagreement / (2.0 * n) + report.epsilon + delta;
    Ok((raw, raw.clamp(0.0, 1.0)))
}

/// Abstain and mistake probability bounds of the abstaining predictor:
///
/// - abstain: `2 E + 2 epsilon + delta - (1/n) sum_{i > v} |a_i| / |a_v|`
/// - mistake: `E + epsilon + delta - (1/2n) sum_{i <= v} (1 - |a_i|)`
pub fn abstain_mistake_bounds(
    profile: &VoteProfile,
    report: &BoundReport,
    delta: f64,
) -> Result<(f64, f64)> {
    require_nondegenerate(report)?;
    let v = game::find_threshold(profile);
    let n = profile.n() as f64;
    let e = report.gibbs_train_error;
    let eps = report.epsilon;
    let ratios = crate::abstain::tail_ratio_sum(profile, v);
    let disagreement = numeric::sum(profile.sorted_abs()[..v].iter().map(|m| 1.0 - m));
    let abstain = 2.0 * e + 2.0 * eps + delta - ratios / n;
    let mistake = e + eps + delta - disagreement / (2.0 * n);
    Ok((abstain, mistake))
}

/// Fills in the profile-dependent bounds of a non-degenerate report.
pub fn attach_profile_bounds(report: &mut BoundReport, profile: &VoteProfile) -> Result<()> {
    let (raw, clipped) = error_probability_bound(profile, report, report.delta)?;
    let (abstain, mistake) = abstain_mistake_bounds(profile, report, report.delta)?;
    report.error_bound_raw = Some(raw);
    report.error_bound = Some(clipped);
    report.abstain_bound = Some(abstain);
    report.mistake_bound = Some(mistake);
    Ok(())
}
