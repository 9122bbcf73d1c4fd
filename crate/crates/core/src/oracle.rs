//! Independent solvers used to certify the closed-form results.
//!
//! The oracles only share the input types with the closed-form solvers:
//! an exact greedy for single-constraint box LPs, brute-force vertex
//! enumeration, an exhaustive grid search for the abstain dual, and seeded
//! batch certification that runs all of them over random instances.
//!
//! Everything here is exponential in `n` and meant for `n <= 8`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::abstain::{self, AbstainRegime};
use crate::error::{check_len, Error, Result};
use crate::game::{self, GameSolution};
use crate::model::{ordering2_keys, sort_profile, AbstainStrategy, VoteProfile};
use crate::numeric::{self, sgn, INPUT_TOL, SOLVER_TOL};

/// Largest instance size accepted by the enumeration oracles.
pub const MAX_ORACLE_N: usize = 8;

/// Largest instance size accepted by the grid oracle.
pub const MAX_GRID_N: usize = 4;

/// `minimize c.z` subject to `z in [-1, 1]^n` and `a.z >= b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxLpProblem {
    pub costs: Vec<f64>,
    pub constraint_coeffs: Vec<f64>,
    pub constraint_rhs: f64,
}

impl BoxLpProblem {
    pub fn new(costs: Vec<f64>, constraint_coeffs: Vec<f64>, constraint_rhs: f64) -> Result<Self> {
        check_len(
            "constraint coefficients",
            costs.len(),
            constraint_coeffs.len(),
        )?;
        if costs.is_empty() {
            return Err(Error::InvalidInput(
                "box LP needs at least one variable".into(),
            ));
        }
        let finite = costs
            .iter()
            .chain(&constraint_coeffs)
            .chain(std::iter::once(&constraint_rhs))
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidInput("box LP entries must be finite".into()));
        }
        Ok(Self {
            costs,
            constraint_coeffs,
            constraint_rhs,
        })
    }

    fn n(&self) -> usize {
        self.costs.len()
    }

    fn lhs(&self, z: &[f64]) -> f64 {
        numeric::sum(self.constraint_coeffs.iter().zip(z).map(|(a, x)| a * x))
    }

    fn objective(&self, z: &[f64]) -> f64 {
        numeric::sum(self.costs.iter().zip(z).map(|(c, x)| c * x))
    }

    fn check_feasible(&self) -> Result<()> {
        let max_lhs = numeric::sum(self.constraint_coeffs.iter().map(|a| a.abs()));
        if max_lhs < self.constraint_rhs - INPUT_TOL {
            Err(Error::Infeasible {
                max_lhs,
                rhs: self.constraint_rhs,
            })
        } else {
            Ok(())
        }
    }
}

/// Exact optimum of a [`BoxLpProblem`] by the exchange argument.
///
/// Every coordinate starts at its unconstrained optimum `-sgn(c_i)` (or
/// `sgn(a_i)` when it is free). If the constraint is violated, coordinates
/// are pushed toward `sgn(a_i)` in ascending order of cost per unit of
/// constraint progress, the last one fractionally.
pub fn lp_best_response(problem: &BoxLpProblem) -> Result<(Vec<f64>, f64)> {
    problem.check_feasible()?;
    let a = &problem.constraint_coeffs;
    let mut z: Vec<f64> = problem
        .costs
        .iter()
        .zip(a)
        .map(|(&c, &ai)| if c == 0.0 { sgn(ai) } else { -sgn(c) })
        .collect();
    let mut lhs = problem.lhs(&z);
    if lhs < problem.constraint_rhs {
        let mut movable: Vec<usize> = (0..problem.n())
            .filter(|&i| a[i] != 0.0 && z[i] != sgn(a[i]))
            .collect();
        let ratio = |i: usize| problem.costs[i] * sgn(a[i]) / a[i].abs();
        movable.sort_by(|&i, &j| ratio(i).total_cmp(&ratio(j)));
        for i in movable {
            let need = problem.constraint_rhs - lhs;
            if need <= 0.0 {
                break;
            }
            let room = a[i].abs() * (1.0 - sgn(a[i]) * z[i]);
            if room >= need {
                z[i] = (z[i] + sgn(a[i]) * need / a[i].abs()).clamp(-1.0, 1.0);
                lhs = problem.constraint_rhs;
            } else {
                z[i] = sgn(a[i]);
                lhs += room;
            }
        }
    }
    let objective = problem.objective(&z);
    Ok((z, objective))
}

fn check_oracle_size(n: usize, max: usize) -> Result<()> {
    if n == 0 || n > max {
        Err(Error::InvalidInput(format!(
            "oracle supports 1 <= n <= {max}, got n = {n}"
        )))
    } else {
        Ok(())
    }
}

/// Calls `visit` with every assignment of `levels` to `len` slots.
fn for_each_assignment(len: usize, levels: &[f64], mut visit: impl FnMut(&[f64])) {
    let mut digits = vec![0usize; len];
    let mut values = vec![levels[0]; len];
    loop {
        visit(&values);
        let mut pos = 0;
        loop {
            if pos == len {
                return;
            }
            digits[pos] += 1;
            if digits[pos] < levels.len() {
                values[pos] = levels[digits[pos]];
                break;
            }
            digits[pos] = 0;
            values[pos] = levels[0];
            pos += 1;
        }
    }
}

/// Candidate points with all coordinates but one drawn from `levels` and
/// the remaining one solved from the binding constraint, plus every point
/// with all coordinates drawn from `levels` that satisfies the constraint.
fn for_each_candidate(a: &[f64], rhs: f64, levels: &[f64], mut visit: impl FnMut(&[f64])) {
    let n = a.len();
    let mut z = vec![0.0; n];
    for_each_assignment(n, levels, |pt| {
        let lhs = numeric::sum(a.iter().zip(pt).map(|(x, y)| x * y));
        if lhs >= rhs - INPUT_TOL {
            visit(pt);
        }
    });
    for k in 0..n {
        if a[k] == 0.0 {
            continue;
        }
        for_each_assignment(n - 1, levels, |rest| {
            let mut r = 0;
            for (i, zi) in z.iter_mut().enumerate() {
                if i != k {
                    *zi = rest[r];
                    r += 1;
                }
            }
            let others = numeric::sum((0..n).filter(|&i| i != k).map(|i| a[i] * z[i]));
            let zk = (rhs - others) / a[k];
            if zk.abs() <= 1.0 + INPUT_TOL {
                z[k] = zk.clamp(-1.0, 1.0);
                visit(&z);
            }
        });
    }
}

/// Box LP optimum by vertex enumeration.
pub fn enumerate_box_lp(problem: &BoxLpProblem) -> Result<(Vec<f64>, f64)> {
    check_oracle_size(problem.n(), MAX_ORACLE_N)?;
    problem.check_feasible()?;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for_each_candidate(
        &problem.constraint_coeffs,
        problem.constraint_rhs,
        &[-1.0, 1.0],
        |z| {
            let obj = problem.objective(z);
            if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                best = Some((z.to_vec(), obj));
            }
        },
    );
    best.ok_or(Error::Infeasible {
        max_lhs: numeric::sum(problem.constraint_coeffs.iter().map(|a| a.abs())),
        rhs: problem.constraint_rhs,
    })
}

/// `min (1/n) sum w_i |z_i|` over `z in [-1, 1]^n` with `(1/n) z.a >= lambda`,
/// by enumerating candidates with at most one coordinate outside `{-1, 0, 1}`.
pub fn enumerate_weighted_abs_min(
    weights: &[f64],
    a: &[f64],
    lambda: f64,
) -> Result<(Vec<f64>, f64)> {
    check_len("weights", a.len(), weights.len())?;
    let n = a.len();
    check_oracle_size(n, MAX_ORACLE_N)?;
    let rhs = n as f64 * lambda;
    let max_lhs = numeric::sum(a.iter().map(|x| x.abs()));
    if max_lhs < rhs - INPUT_TOL {
        return Err(Error::Infeasible { max_lhs, rhs });
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for_each_candidate(a, rhs, &[-1.0, 0.0, 1.0], |z| {
        let obj = numeric::sum(weights.iter().zip(z).map(|(w, x)| w * x.abs())) / n as f64;
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((z.to_vec(), obj));
        }
    });
    best.ok_or(Error::Infeasible { max_lhs, rhs })
}

/// Value of the dual game, `min (1/n) sum |z_i|` over nature's feasible set;
/// the predictor's best response to any `z` is `sgn(z)`.
pub fn enumerate_game_value(a: &[f64], lambda: f64) -> Result<f64> {
    enumerate_weighted_abs_min(&vec![1.0; a.len()], a, lambda).map(|(_, v)| v)
}

/// Grid points `0, step, 2 step, ..., 1` (1 always included).
fn grid_levels(step: f64) -> Vec<f64> {
    let mut levels = Vec::new();
    let mut k = 0u32;
    loop {
        let t = k as f64 * step;
        if t >= 1.0 - 1e-12 {
            levels.push(1.0);
            return levels;
        }
        levels.push(t);
        k += 1;
    }
}

/// Default grid step for the abstain grid oracle at size `n`.
pub fn default_grid_step(n: usize) -> f64 {
    if n <= 3 {
        0.005
    } else {
        0.02
    }
}

/// Maximizes nature's abstain dual `(1/n) sum min(alpha, (1 - t_i)/2)` over
/// `t_i` on a grid, with `z_i = t_i sgn(a_i)` and `(1/n) sum t_i |a_i| >= lambda`.
///
/// The objective only depends on `|z_i|` and the constraint is loosest with
/// matching signs, so the sign restriction loses nothing. The result is
/// within `n step / 2` of the true maximum.
pub fn grid_abstain_value(a: &[f64], lambda: f64, alpha: f64, step: f64) -> Result<f64> {
    let n = a.len();
    check_oracle_size(n, MAX_GRID_N)?;
    if !(step > 0.0 && step <= 0.1) {
        return Err(Error::InvalidInput(format!(
            "grid step {step} must lie in (0, 0.1]"
        )));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidCost { alpha });
    }
    let margins: Vec<f64> = a.iter().map(|x| x.abs()).collect();
    let rhs = n as f64 * lambda;
    let max_lhs = numeric::sum(margins.iter().copied());
    if max_lhs < rhs - INPUT_TOL {
        return Err(Error::Infeasible { max_lhs, rhs });
    }
    let levels = grid_levels(step);
    let gain = |t: f64| alpha.min(0.5 * (1.0 - t));

    // the largest margin is solved for directly: the objective is
    // nonincreasing in each t_i, so its best grid value is the smallest
    // feasible one
    let pivot = (0..n).fold(0, |b, i| if margins[i] > margins[b] { i } else { b });
    let free: Vec<usize> = (0..n).filter(|&i| i != pivot && margins[i] > 0.0).collect();
    let fixed_gain = (n - 1 - free.len()) as f64 * gain(0.0);

    let mut best = f64::NEG_INFINITY;
    for_each_assignment(free.len(), &levels, |ts| {
        let covered: f64 = free.iter().zip(ts).map(|(&i, t)| t * margins[i]).sum();
        let need = rhs - covered;
        let t_pivot = if need <= INPUT_TOL {
            Some(0.0)
        } else {
            levels
                .iter()
                .copied()
                .find(|t| t * margins[pivot] >= need - INPUT_TOL)
        };
        if let Some(tp) = t_pivot {
            let total = fixed_gain + gain(tp) + ts.iter().map(|&t| gain(t)).sum::<f64>();
            best = best.max(total / n as f64);
        }
    });
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Infeasible { max_lhs, rhs })
    }
}

/// Result of comparing closed-form values against an oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub check: String,
    pub closed_form_value: f64,
    pub oracle_value: f64,
    /// Largest absolute deviation seen.
    pub max_deviation: f64,
    /// Tolerance that applied to the worst instance.
    pub tolerance: f64,
    /// Largest `deviation - tolerance` over all instances; `<= 0` passes.
    pub max_excess: f64,
    pub instances_checked: usize,
    pub passed: bool,
    pub worst_instance: Option<Instance>,
}

/// One certification instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Instance {
    pub index: usize,
    pub votes: Vec<f64>,
    pub lambda: f64,
    pub alpha: Option<f64>,
}

/// Checks the saddle point from both sides: nature's exact LP best response
/// to `g*`, and the predictor's best response `sgn(z*)` to `z*`. Both must
/// attain the game value.
pub fn certify_saddle(profile: &VoteProfile, solution: &GameSolution) -> CertificationReport {
    let n = profile.n() as f64;
    let rhs = n * profile.lambda();
    let nature_side = BoxLpProblem::new(solution.g_star.clone(), profile.votes().to_vec(), rhs)
        .and_then(|p| lp_best_response(&p))
        .map(|(_, obj)| obj / n)
        .unwrap_or(f64::NAN);
    let predictor_side = numeric::sum(solution.z_star.iter().map(|z| z.abs())) / n;
    let deviation = (nature_side - solution.value)
        .abs()
        .max((predictor_side - solution.value).abs());
    let deviation = if deviation.is_nan() {
        f64::INFINITY
    } else {
        deviation
    };
    CertificationReport {
        check: "saddle".into(),
        closed_form_value: solution.value,
        oracle_value: nature_side,
        max_deviation: deviation,
        tolerance: SOLVER_TOL,
        max_excess: deviation - SOLVER_TOL,
        instances_checked: 1,
        passed: deviation <= SOLVER_TOL,
        worst_instance: Some(Instance {
            index: 0,
            votes: profile.votes().to_vec(),
            lambda: profile.lambda(),
            alpha: None,
        }),
    }
}

/// Nature's exact best response against a fixed abstaining predictor
/// `(g, p)`: maximizes the expected abstain loss over feasible labels.
pub fn worst_case_abstain_loss(
    profile: &VoteProfile,
    g: &[f64],
    p: &AbstainStrategy,
) -> Result<(Vec<f64>, f64)> {
    check_len("predictions", profile.n(), g.len())?;
    check_len("abstain strategy", profile.n(), p.len())?;
    // loss = 1/2 + (1/n) sum p_i (alpha - 1/2) - (1/2n) sum (1 - p_i) g_i z_i
    let costs = g
        .iter()
        .zip(p.probs())
        .map(|(gi, pi)| (1.0 - pi) * gi)
        .collect();
    let problem = BoxLpProblem::new(
        costs,
        profile.votes().to_vec(),
        profile.n() as f64 * profile.lambda(),
    )?;
    let (z, _) = lp_best_response(&problem)?;
    let loss = abstain::abstain_loss(g, p, &z)?;
    Ok((z, loss))
}

/// Draws a random feasible instance: `n` uniform in `1..=nmax`, votes
/// uniform in `[-1, 1]`, `lambda` uniform in `(0.1 mean|a|, mean|a|]`,
/// `alpha` uniform in `(0.05, 0.45)`.
pub fn random_instance<R: Rng>(rng: &mut R, index: usize, nmax: usize) -> Instance {
    loop {
        let n = rng.random_range(1..=nmax);
        let votes: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mean_abs = votes.iter().map(|a: &f64| a.abs()).sum::<f64>() / n as f64;
        if mean_abs <= 1e-6 {
            continue;
        }
        let u: f64 = rng.random();
        let lambda = mean_abs * (1.0 - 0.9 * u);
        let mut alpha: f64 = rng.random_range(0.05..0.45);
        while alpha <= 0.05 {
            alpha = rng.random_range(0.05..0.45);
        }
        return Instance {
            index,
            votes,
            lambda,
            alpha: Some(alpha),
        };
    }
}

/// Variant of an instance on which the margin prefix sum binds exactly:
/// votes rounded to multiples of 1/64 (so prefix sums are exact) and
/// `lambda` set to a prefix mean.
pub fn integral_binding_variant<R: Rng>(rng: &mut R, instance: &Instance) -> Option<Instance> {
    let votes: Vec<f64> = instance
        .votes
        .iter()
        .map(|a| (a * 64.0).round() / 64.0)
        .collect();
    let mut margins: Vec<f64> = votes.iter().map(|a| a.abs()).filter(|m| *m > 0.0).collect();
    if margins.is_empty() {
        return None;
    }
    margins.sort_by(|x, y| y.total_cmp(x));
    let k = rng.random_range(1..=margins.len());
    let lambda = margins[..k].iter().sum::<f64>() / votes.len() as f64;
    Some(Instance {
        index: instance.index,
        votes,
        lambda,
        alpha: instance.alpha,
    })
}

/// Check names, in report order.
pub const CHECKS: [&str; 13] = [
    "game_value_vs_enumeration",
    "saddle_nature_best_response",
    "saddle_predictor_best_response",
    "nature_greedy_vs_closed_form",
    "lp_greedy_vs_vertex_enumeration",
    "value_lower_bound_and_gap",
    "abstain_value_bounds",
    "abstain_value_vs_grid",
    "abstain_worst_case_dominates_value",
    "p_alg_structure",
    "abstain_fraction_bound",
    "integral_binding_loss_identity",
    "inner_value_vs_enumeration",
];

/// Name of the only check whose tolerance comes from the grid resolution.
pub const GRID_CHECK: &str = "abstain_value_vs_grid";

#[derive(Debug, Clone)]
struct Observation {
    check: usize,
    closed: f64,
    oracle: f64,
    deviation: f64,
    tolerance: f64,
    instance: Instance,
}

fn observe(
    out: &mut Vec<Observation>,
    name: &str,
    closed: f64,
    oracle: f64,
    deviation: f64,
    tolerance: f64,
    instance: &Instance,
) {
    let check = CHECKS.iter().position(|c| *c == name).expect("known check");
    let deviation = if deviation.is_nan() {
        f64::INFINITY
    } else {
        deviation
    };
    out.push(Observation {
        check,
        closed,
        oracle,
        deviation,
        tolerance,
        instance: instance.clone(),
    });
}

fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Runs every certification on one instance.
fn certify_instance(
    instance: &Instance,
    binding: Option<&Instance>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Observation>> {
    let mut out = Vec::new();
    let profile = sort_profile(&instance.votes, instance.lambda)?;
    let n = profile.n();
    let nf = n as f64;
    let sol = game::solve(&profile);
    let tol = SOLVER_TOL;

    if n <= MAX_ORACLE_N {
        let oracle = enumerate_game_value(&instance.votes, instance.lambda)?;
        observe(
            &mut out,
            "game_value_vs_enumeration",
            sol.value,
            oracle,
            (sol.value - oracle).abs(),
            tol,
            instance,
        );
    }

    let saddle = certify_saddle(&profile, &sol);
    observe(
        &mut out,
        "saddle_nature_best_response",
        sol.value,
        saddle.oracle_value,
        (saddle.oracle_value - sol.value).abs(),
        tol,
        instance,
    );
    let predictor = numeric::sum(sol.z_star.iter().map(|z| z.abs())) / nf;
    observe(
        &mut out,
        "saddle_predictor_best_response",
        sol.value,
        predictor,
        (predictor - sol.value).abs(),
        tol,
        instance,
    );

    let greedy = game::nature_greedy(&profile);
    observe(
        &mut out,
        "nature_greedy_vs_closed_form",
        0.0,
        0.0,
        max_abs_diff(&greedy, &sol.z_star),
        tol,
        instance,
    );

    if n <= MAX_ORACLE_N {
        let rhs = nf * instance.lambda;
        let random_costs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        for costs in [sol.g_star.clone(), random_costs] {
            let problem = BoxLpProblem::new(costs, instance.votes.clone(), rhs)?;
            let (_, fast) = lp_best_response(&problem)?;
            let (_, brute) = enumerate_box_lp(&problem)?;
            observe(
                &mut out,
                "lp_greedy_vs_vertex_enumeration",
                fast,
                brute,
                (fast - brute).abs(),
                tol,
                instance,
            );
        }
    }

    let v = sol.v;
    let margins = profile.sorted_abs();
    let head = profile.prefix_abs()[v - 1] / nf;
    let gap_formula = (1.0 / margins[v - 1] - 1.0) * (instance.lambda - head);
    let gap = sol.value - sol.lower_bound;
    let lb_violation = (sol.lower_bound - sol.value).max(0.0);
    observe(
        &mut out,
        "value_lower_bound_and_gap",
        gap_formula,
        gap,
        (gap - gap_formula).abs().max(lb_violation),
        tol,
        instance,
    );

    if let Some(alpha) = instance.alpha {
        let value = abstain::abstain_value(&profile, alpha)?;
        let bound_dev = match value.regime {
            AbstainRegime::Trivial => (value.value_exact - alpha).abs(),
            _ => (value.value_lower - value.value_exact)
                .max(value.value_exact - value.value_upper)
                .max(value.value_exact - alpha)
                .max(0.0),
        };
        observe(
            &mut out,
            "abstain_value_bounds",
            value.value_exact,
            value.value_lower,
            bound_dev,
            tol,
            instance,
        );

        if n <= MAX_GRID_N {
            let step = default_grid_step(n);
            let grid = grid_abstain_value(&instance.votes, instance.lambda, alpha, step)?;
            observe(
                &mut out,
                GRID_CHECK,
                value.value_exact,
                grid,
                (value.value_exact - grid).abs(),
                nf * step / 2.0 + tol,
                instance,
            );
        }

        let p = abstain::p_alg(&profile, alpha)?;
        let (_, worst) = worst_case_abstain_loss(&profile, &sol.g_star, &p)?;
        observe(
            &mut out,
            "abstain_worst_case_dominates_value",
            value.value_exact,
            worst,
            (value.value_exact - worst).max(0.0),
            tol,
            instance,
        );

        // zero abstention on the v most confident examples; equal abstain
        // keys |a_i| / (1 - p_i) = |a_v| from v on
        let mut structure_dev: f64 = 0.0;
        for k in 0..v {
            structure_dev = structure_dev.max(p.probs()[profile.order()[k]]);
        }
        if let Ok(keys) = ordering2_keys(profile.votes(), &p) {
            for k in v - 1..n {
                let i = profile.order()[k];
                if margins[k] > 0.0 {
                    structure_dev = structure_dev.max((keys.keys[i] - margins[v - 1]).abs());
                }
            }
        }
        observe(
            &mut out,
            "p_alg_structure",
            0.0,
            0.0,
            structure_dev,
            tol,
            instance,
        );

        let fraction = p.abstain_fraction();
        let bound = 1.0 - instance.lambda - abstain::tail_ratio_sum(&profile, v) / nf;
        observe(
            &mut out,
            "abstain_fraction_bound",
            bound,
            fraction,
            (fraction - bound).max(0.0),
            tol,
            instance,
        );

        if n <= MAX_ORACLE_N {
            if let Ok((_, inner)) = abstain::inner_game_value(&profile, &p) {
                let weights: Vec<f64> = p.probs().iter().map(|pi| 1.0 - pi).collect();
                let (_, brute) =
                    enumerate_weighted_abs_min(&weights, &instance.votes, instance.lambda)?;
                observe(
                    &mut out,
                    "inner_value_vs_enumeration",
                    inner,
                    brute,
                    (inner - brute).abs(),
                    tol,
                    instance,
                );
            }
        }
    }

    if let Some(b) = binding {
        let alpha = b.alpha.unwrap_or(0.25);
        let bp = sort_profile(&b.votes, b.lambda)?;
        let bs = game::solve(&bp);
        let p = abstain::p_alg(&bp, alpha)?;
        let direct = abstain::abstain_loss(&bs.g_star, &p, &bs.z_star)?;
        let formula = abstain::loss_formula(&bp, alpha)?;
        let integral_value = bs.v as f64 / bp.n() as f64;
        let dev = (direct - formula)
            .abs()
            .max((bs.value - integral_value).abs());
        observe(
            &mut out,
            "integral_binding_loss_identity",
            formula,
            direct,
            dev,
            tol,
            b,
        );
    }
    Ok(out)
}

/// Aggregate of a batch certification run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchCertification {
    pub seed: u64,
    pub count: usize,
    pub nmax: usize,
    pub instances_checked: usize,
    /// Closed-form vs oracle game value for the worst instance of that check.
    pub closed_form_value: f64,
    pub oracle_value: f64,
    /// Largest deviation over the exact (1e-9) checks; the grid check is
    /// reported separately under its own tolerance.
    pub max_deviation: f64,
    pub passed: bool,
    pub checks: Vec<CertificationReport>,
}

fn aggregate(
    seed: u64,
    count: usize,
    nmax: usize,
    per_instance: Vec<Vec<Observation>>,
) -> BatchCertification {
    let mut checks: Vec<Option<CertificationReport>> = vec![None; CHECKS.len()];
    for obs in per_instance.into_iter().flatten() {
        let excess = obs.deviation - obs.tolerance;
        let entry = checks[obs.check].get_or_insert_with(|| CertificationReport {
            check: CHECKS[obs.check].into(),
            closed_form_value: obs.closed,
            oracle_value: obs.oracle,
            max_deviation: obs.deviation,
            tolerance: obs.tolerance,
            max_excess: excess,
            instances_checked: 0,
            passed: true,
            worst_instance: Some(obs.instance.clone()),
        });
        entry.instances_checked += 1;
        entry.max_deviation = entry.max_deviation.max(obs.deviation);
        if excess > entry.max_excess {
            entry.max_excess = excess;
            entry.tolerance = obs.tolerance;
            entry.closed_form_value = obs.closed;
            entry.oracle_value = obs.oracle;
            entry.worst_instance = Some(obs.instance.clone());
        }
        entry.passed = entry.max_excess <= 0.0;
    }
    let checks: Vec<CertificationReport> = checks.into_iter().flatten().collect();
    let exact = checks.iter().filter(|c| c.check != GRID_CHECK);
    let max_deviation = exact.map(|c| c.max_deviation).fold(0.0, f64::max);
    let (closed_form_value, oracle_value) = checks
        .iter()
        .find(|c| c.check == CHECKS[0])
        .map(|c| (c.closed_form_value, c.oracle_value))
        .unwrap_or((f64::NAN, f64::NAN));
    BatchCertification {
        seed,
        count,
        nmax,
        instances_checked: count,
        closed_form_value,
        oracle_value,
        max_deviation,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Certifies `count` seeded random instances with `n <= nmax`.
///
/// Instances are evaluated in parallel; each draws from its own RNG stream,
/// so the report does not depend on scheduling.
pub fn certify_batch(count: usize, seed: u64, nmax: usize) -> Result<BatchCertification> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be at least 1".into()));
    }
    check_oracle_size(nmax, MAX_ORACLE_N)?;
    let per_instance = (0..count)
        .into_par_iter()
        .map(|index| {
            let mut rng = instance_rng(seed, index);
            let instance = random_instance(&mut rng, index, nmax);
            let binding = integral_binding_variant(&mut rng, &instance);
            certify_instance(&instance, binding.as_ref(), &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(seed, count, nmax, per_instance))
}

/// Certifies a single user-supplied instance.
pub fn certify_single(
    votes: &[f64],
    lambda: f64,
    alpha: Option<f64>,
    seed: u64,
) -> Result<BatchCertification> {
    check_oracle_size(votes.len(), MAX_ORACLE_N)?;
    let instance = Instance {
        index: 0,
        votes: votes.to_vec(),
        lambda,
        alpha,
    };
    let mut rng = instance_rng(seed, 0);
    let obs = certify_instance(&instance, None, &mut rng)?;
    Ok(aggregate(seed, 1, votes.len(), vec![obs]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fix1() -> VoteProfile {
        sort_profile(&[1.0, 0.8, 0.5, 0.2], 0.5).unwrap()
    }
    fn fix2() -> VoteProfile {
        sort_profile(&[1.0, 0.8, 0.6, 0.2], 0.6).unwrap()
    }

    #[test]
    fn best_response_against_fixture_predictor() {
        let p = BoxLpProblem::new(vec![1.0, 1.0, 1.0, 0.4], vec![1.0, 0.8, 0.5, 0.2], 2.0).unwrap();
        let (z, obj) = lp_best_response(&p).unwrap();
        assert!((obj - 2.4).abs() < 1e-12);
        assert!((obj / 4.0 - 0.6).abs() < 1e-12);
        assert!(p.lhs(&z) >= 2.0 - 1e-12);
        // negated costs: maximize z.g*
        let neg =
            BoxLpProblem::new(vec![-1.0, -1.0, -1.0, -0.4], vec![1.0, 0.8, 0.5, 0.2], 2.0).unwrap();
        let (_, obj) = lp_best_response(&neg).unwrap();
        assert!((obj + 3.4).abs() < 1e-12);
    }

    #[test]
    fn best_response_inactive_constraint() {
        let p = BoxLpProblem::new(vec![0.5, -0.3], vec![0.4, 0.6], -1.0).unwrap();
        let (z, obj) = lp_best_response(&p).unwrap();
        assert_eq!(z, vec![-1.0, 1.0]);
        assert!((obj + 0.8).abs() < 1e-15);
    }

    #[test]
    fn best_response_zero_cost() {
        let p = BoxLpProblem::new(vec![0.0; 3], vec![0.4, -0.6, 0.1], 0.9).unwrap();
        let (z, obj) = lp_best_response(&p).unwrap();
        assert_eq!(obj, 0.0);
        assert!(p.lhs(&z) >= 0.9 - 1e-12);
    }

    #[test]
    fn best_response_infeasible() {
        let p = BoxLpProblem::new(vec![1.0], vec![0.5], 0.6).unwrap();
        assert!(matches!(
            lp_best_response(&p),
            Err(Error::Infeasible { .. })
        ));
        assert!(matches!(
            enumerate_box_lp(&p),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn enumeration_fixture_values() {
        assert!((enumerate_game_value(&[1.0, 0.8, 0.5, 0.2], 0.5).unwrap() - 0.6).abs() < 1e-12);
        assert!((enumerate_game_value(&[-0.9, 0.6], 0.6).unwrap() - 0.75).abs() < 1e-12);
        assert!((enumerate_game_value(&[0.3, -0.7, 0.5], 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!(enumerate_game_value(&[0.5; 9], 0.1).is_err());
    }

    #[test]
    fn grid_fixture_values() {
        let a = [1.0, 0.8, 0.5, 0.2];
        let g = grid_abstain_value(&a, 0.5, 0.25, 0.02).unwrap();
        assert!((g - 0.1484375).abs() <= 0.01);
        assert!(g <= 0.1484375 + 1e-12);
        let g = grid_abstain_value(&a, 0.5, 0.05, 0.02).unwrap();
        assert!((g - 0.05).abs() <= 0.04);
        let g = grid_abstain_value(&a, 0.5, 0.6, 0.02).unwrap();
        let reduced = (1.0 - enumerate_game_value(&a, 0.5).unwrap()) / 2.0;
        assert!((g - reduced).abs() <= 4.0 * 0.02 / 2.0);
        assert!(grid_abstain_value(&a, 0.5, 0.25, 0.2).is_err());
        assert!(grid_abstain_value(&[0.5; 5], 0.1, 0.25, 0.05).is_err());
    }

    #[test]
    fn grid_levels_cover_unit_interval() {
        let l = grid_levels(0.02);
        assert_eq!(l.len(), 51);
        assert_eq!(*l.last().unwrap(), 1.0);
        let l = grid_levels(0.03);
        assert_eq!(*l.last().unwrap(), 1.0);
        assert!(l.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn saddle_certificates() {
        for p in [fix1(), fix2()] {
            let r = certify_saddle(&p, &game::solve(&p));
            assert!(r.passed, "{r:?}");
            assert!(r.max_deviation < 1e-9);
        }
    }

    #[test]
    fn worst_case_examples() {
        let p = fix1();
        let s = game::solve(&p);
        let pa = abstain::p_alg(&p, 0.25).unwrap();
        let (z, loss) = worst_case_abstain_loss(&p, &s.g_star, &pa).unwrap();
        assert!((loss - 0.1925).abs() < 1e-12);
        for (zi, e) in z.iter().zip([1.0, 1.0, 0.0, 1.0]) {
            assert!((zi - e).abs() < 1e-12);
        }

        let p = fix2();
        let s = game::solve(&p);
        let pa = abstain::p_alg(&p, 0.25).unwrap();
        let (z, loss) = worst_case_abstain_loss(&p, &s.g_star, &pa).unwrap();
        assert!((loss - 1.0 / 9.0).abs() < 1e-12);
        for (zi, e) in z.iter().zip([1.0, 1.0, 2.0 / 3.0, 1.0]) {
            assert!((zi - e).abs() < 1e-12);
        }

        let always = AbstainStrategy::always(4, 0.3).unwrap();
        let (_, loss) = worst_case_abstain_loss(&p, &s.g_star, &always).unwrap();
        assert!((loss - 0.3).abs() < 1e-12);
    }

    #[test]
    fn batch_is_deterministic_and_passes() {
        let a = certify_batch(40, 3, 6).unwrap();
        let b = certify_batch(40, 3, 6).unwrap();
        assert_eq!(a, b);
        assert!(
            a.passed,
            "{:#?}",
            a.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>()
        );
        assert_eq!(a.checks.len(), CHECKS.len());
    }

    #[test]
    fn single_instance_echoes_value() {
        let r = certify_single(&[1.0, 0.8, 0.5, 0.2], 0.5, Some(0.25), 1).unwrap();
        assert!((r.closed_form_value - 0.6).abs() < 1e-12);
        assert!((r.oracle_value - 0.6).abs() < 1e-12);
        assert!(r.passed);
    }

    #[test]
    fn batch_rejects_large_n() {
        assert!(certify_batch(1, 1, 9).is_err());
        assert!(certify_batch(0, 1, 4).is_err());
    }
}
