//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs the release-facing binary where a criterion is about the
//! command line and the library directly elsewhere.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ensemble_minimax::oracle::{
    certify_saddle, enumerate_box_lp, enumerate_game_value, grid_abstain_value, random_instance,
    BoxLpProblem,
};
use ensemble_minimax::pac_bayes::{epsilon_from_kl, kl_bernoulli, lambda_hat};
use ensemble_minimax::{abstain, game, sort_profile, AbstainRegime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_ensemble-minimax");
const TOL: f64 = 1e-9;

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

struct Run {
    code: i32,
    stdout: String,
    elapsed: Duration,
}

fn run(args: &[&str]) -> Run {
    let start = Instant::now();
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).expect("utf-8 output"),
        elapsed: start.elapsed(),
    }
}

fn json(run: &Run) -> Value {
    serde_json::from_str(&run.stdout).expect("json output")
}

fn num(v: &Value, key: &str) -> f64 {
    v[key]
        .as_f64()
        .unwrap_or_else(|| panic!("missing number {key}"))
}

fn vec_of(v: &Value, key: &str) -> Vec<f64> {
    v[key]
        .as_array()
        .unwrap_or_else(|| panic!("missing array {key}"))
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn close_vec(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y, tol))
}

/// Collects failures for one criterion.
#[derive(Default)]
struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn expect(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }
    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn check_named(batch: &Value, name: &str) -> Value {
    batch["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["check"] == name)
        .unwrap_or_else(|| panic!("check {name} missing"))
        .clone()
}

fn batch_check(c: &mut Check, batch: &Value, name: &str, count: usize) {
    let r = check_named(batch, name);
    let dev = num(&r, "max_deviation");
    c.expect(r["passed"] == true, format!("{name} failed: {r}"));
    c.expect(
        r["instances_checked"].as_u64() == Some(count as u64),
        format!("{name} checked {} instances", r["instances_checked"]),
    );
    c.note(format!("{name} max dev {dev:.1e}"));
}

fn criterion_1(batch: &Value, elapsed: Duration) -> Check {
    let mut c = Check::default();
    let r = check_named(batch, "game_value_vs_enumeration");
    c.expect(
        num(&r, "max_deviation") <= TOL,
        format!("deviation {}", r["max_deviation"]),
    );
    c.expect(r["instances_checked"] == 200, "instance count");
    c.expect(batch["nmax"] == 6, "nmax");
    c.expect(
        elapsed < Duration::from_secs(10),
        format!("runtime {elapsed:?}"),
    );
    c.note(format!(
        "max dev {:.1e}, {elapsed:.2?}",
        num(&r, "max_deviation")
    ));
    c
}

fn criterion_2(batch: &Value) -> Check {
    let mut c = Check::default();
    for name in [
        "saddle_nature_best_response",
        "saddle_predictor_best_response",
    ] {
        let r = check_named(batch, name);
        c.expect(
            num(&r, "max_deviation") <= TOL,
            format!("{name}: {}", r["max_deviation"]),
        );
        c.note(format!("{name} {:.1e}", num(&r, "max_deviation")));
    }
    c
}

/// Re-verifies a fixture with the oracles, then compares the CLI output to
/// its golden file byte for byte.
fn fixture(c: &mut Check, file: &str, votes: &[f64], lambda: f64, golden_name: &str) -> Value {
    let profile = sort_profile(votes, lambda).unwrap();
    let sol = game::solve(&profile);
    let oracle_value = enumerate_game_value(votes, lambda).unwrap();
    c.expect(
        close(oracle_value, sol.value, TOL),
        format!("{file}: oracle {oracle_value} vs {}", sol.value),
    );
    c.expect(
        certify_saddle(&profile, &sol).passed,
        format!("{file}: saddle certificate"),
    );
    let input = golden(&format!("inputs/{file}"));
    let r = run(&[
        "--canonical",
        "solve",
        "--votes",
        input.to_str().unwrap(),
        "--lambda",
        &lambda.to_string(),
    ]);
    c.expect(r.code == 0, format!("{file}: exit {}", r.code));
    let expected = std::fs::read_to_string(golden(golden_name)).unwrap();
    c.expect(
        r.stdout == expected,
        format!("{file}: output differs from {golden_name}"),
    );
    let v = json(&r);
    c.expect(
        close(num(&v, "value"), oracle_value, 1e-11),
        format!("{file}: reported value vs oracle"),
    );
    v
}

fn criterion_3() -> Check {
    let mut c = Check::default();
    let f1 = fixture(
        &mut c,
        "fix1.csv",
        &[1.0, 0.8, 0.5, 0.2],
        0.5,
        "fix1_solve.json",
    );
    c.expect(f1["v"] == 3, "FIX-1 v");
    c.expect(close(num(&f1, "value"), 0.6, 1e-12), "FIX-1 V");
    c.expect(
        close_vec(&vec_of(&f1, "g_star"), &[1.0, 1.0, 1.0, 0.4], 1e-12),
        "FIX-1 g*",
    );
    c.expect(
        close_vec(&vec_of(&f1, "z_star"), &[1.0, 1.0, 0.4, 0.0], 1e-12),
        "FIX-1 z*",
    );
    let f2 = fixture(
        &mut c,
        "fix2.csv",
        &[1.0, 0.8, 0.6, 0.2],
        0.6,
        "fix2_solve.json",
    );
    c.expect(f2["v"] == 3, "FIX-2 v");
    c.expect(close(num(&f2, "value"), 0.75, 1e-12), "FIX-2 V");
    c.expect(
        close_vec(&vec_of(&f2, "z_star"), &[1.0, 1.0, 1.0, 0.0], 1e-12),
        "FIX-2 z*",
    );
    let f3 = fixture(&mut c, "fix3.csv", &[-0.9, 0.6], 0.6, "fix3_solve.json");
    c.expect(close(num(&f3, "value"), 0.75, 1e-12), "FIX-3 V");
    c.expect(
        close_vec(&vec_of(&f3, "g_star"), &[-1.0, 1.0], 1e-12),
        "FIX-3 g*",
    );
    c.note("3 fixtures, oracle-verified, golden match");
    c
}

fn criterion_4(batch: &Value) -> Check {
    let mut c = Check::default();
    batch_check(&mut c, batch, "value_lower_bound_and_gap", 200);
    let p = sort_profile(&[1.0, 0.8, 0.5, 0.2], 0.5).unwrap();
    let s = game::solve(&p);
    c.expect(close(s.lower_bound, 0.55, 1e-12), "FIX-1 lower bound");
    c.expect(
        close(
            s.value - s.lower_bound,
            (1.0 / 0.5 - 1.0) * (0.5 - 1.8 / 4.0),
            TOL,
        ),
        "FIX-1 gap",
    );
    c
}

fn criterion_5() -> Check {
    let mut c = Check::default();
    let start = Instant::now();
    let p = sort_profile(&[1.0, 0.8, 0.5, 0.2], 0.5).unwrap();
    let trivial = abstain::abstain_value(&p, 0.05).unwrap();
    c.expect(
        trivial.regime == AbstainRegime::Trivial && trivial.value_exact == 0.05,
        "FIX-1 alpha 0.05 trivial value",
    );

    let step = 0.02;
    let (mut worst_bracket, mut worst_grid, mut grid_count, mut trivial_count) =
        (0.0f64, 0.0f64, 0, 0);
    for i in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        rng.set_stream(i as u64);
        let inst = random_instance(&mut rng, i, 6);
        let alpha = inst.alpha.unwrap();
        let prof = sort_profile(&inst.votes, inst.lambda).unwrap();
        let val = abstain::abstain_value(&prof, alpha).unwrap();
        let n = inst.votes.len();
        match val.regime {
            AbstainRegime::Trivial => {
                trivial_count += 1;
                c.expect(
                    val.value_exact == alpha,
                    format!("instance {i}: trivial value {} != alpha", val.value_exact),
                );
            }
            _ => {
                let w = val.w.unwrap() as f64;
                let lo = alpha * (1.0 - w / n as f64);
                let hi = alpha * (1.0 - (w - 1.0) / n as f64);
                let excess = (lo - val.value_exact).max(val.value_exact - hi);
                worst_bracket = worst_bracket.max(excess);
                c.expect(
                    excess <= TOL,
                    format!("instance {i}: {} outside [{lo}, {hi}]", val.value_exact),
                );
            }
        }
        if n <= 4 {
            grid_count += 1;
            let grid = grid_abstain_value(&inst.votes, inst.lambda, alpha, step).unwrap();
            let dev = (grid - val.value_exact).abs();
            let tol = n as f64 * step / 2.0 + TOL;
            worst_grid = worst_grid.max(dev / tol);
            c.expect(
                dev <= tol,
                format!("instance {i}: grid {grid} vs {}", val.value_exact),
            );
        }
    }
    let elapsed = start.elapsed();
    c.expect(
        elapsed < Duration::from_secs(60),
        format!("runtime {elapsed:?}"),
    );
    c.note(format!(
        "200 instances ({trivial_count} trivial), {grid_count} grid checks, worst grid dev {:.0}% of tolerance, {elapsed:.2?}",
        worst_grid * 100.0
    ));
    c
}

fn criterion_6(batch: &Value) -> Check {
    let mut c = Check::default();
    batch_check(&mut c, batch, "p_alg_structure", 200);
    batch_check(&mut c, batch, "integral_binding_loss_identity", 200);
    let input = golden("inputs/fix2.csv");
    let r = run(&[
        "--canonical",
        "abstain",
        "--votes",
        input.to_str().unwrap(),
        "--lambda",
        "0.6",
        "--alpha",
        "0.25",
    ]);
    c.expect(r.code == 0, "FIX-2 abstain exit");
    c.expect(
        r.stdout == std::fs::read_to_string(golden("fix2_abstain_alpha_0.25.json")).unwrap(),
        "FIX-2 golden",
    );
    let v = json(&r);
    c.expect(
        close(num(&v, "loss_formula"), 1.0 / 12.0, TOL),
        "FIX-2 loss formula",
    );
    c.expect(
        close(num(&v, "loss_against_z_star"), 1.0 / 12.0, TOL),
        "FIX-2 loss against z*",
    );
    c.expect(
        close_vec(&vec_of(&v, "p_alg")[..3], &[0.0; 3], 0.0),
        "FIX-2 no abstention before v",
    );
    c.note("FIX-2 both sides 0.0833333");
    c
}

fn criterion_7(batch: &Value) -> Check {
    let mut c = Check::default();
    batch_check(&mut c, batch, "abstain_fraction_bound", 200);
    c
}

fn criterion_8() -> Check {
    let mut c = Check::default();
    let eps = epsilon_from_kl(2000, 0.0, 0.05);
    c.expect(close(eps, 0.106254, 1e-5), format!("epsilon {eps}"));
    let lh = lambda_hat(0.1, eps);
    c.expect(close(lh, 0.587492, 1e-5), format!("lambda_hat {lh}"));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut pinsker_ok = true;
    for _ in 0..10_000 {
        let p: f64 = rng.random();
        let q: f64 = rng.random_range(1e-9..1.0 - 1e-9);
        pinsker_ok &= kl_bernoulli(p, q).unwrap() >= 2.0 * (p - q).powi(2) - 1e-12;
    }
    c.expect(pinsker_ok, "Pinsker");
    let ms = [10, 100, 1000, 2000, 10_000];
    let kls = [0.0, 0.1, 1.0, 5.0];
    let deltas = [0.01, 0.05, 0.1];
    let mut mono = true;
    for &kl in &kls {
        for &d in &deltas {
            mono &= ms
                .windows(2)
                .all(|w| epsilon_from_kl(w[1], kl, d) < epsilon_from_kl(w[0], kl, d));
        }
    }
    for &m in &ms {
        for &d in &deltas {
            mono &= kls
                .windows(2)
                .all(|w| epsilon_from_kl(m, w[1], d) > epsilon_from_kl(m, w[0], d));
        }
        for &kl in &kls {
            mono &= deltas
                .windows(2)
                .all(|w| epsilon_from_kl(m, kl, w[1]) < epsilon_from_kl(m, kl, w[0]));
        }
    }
    c.expect(mono, "epsilon monotonicity grid");
    c.note(format!("epsilon {eps:.6}, lambda_hat {lh:.6}"));
    c
}

fn validate_schema(c: &mut Check, report: &Value) {
    let schema_path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/pipeline_report.schema.json");
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(report)
        .map(|e| e.to_string())
        .collect();
    c.expect(errors.is_empty(), format!("schema errors: {errors:?}"));
}

fn pipeline_run(dir: &Path, extra: &[&str]) -> Run {
    let f = |name: &str| dir.join(name).to_str().unwrap().to_owned();
    let (tp, tl, te) = (
        f("train_pred.csv"),
        f("train_labels.csv"),
        f("test_pred.csv"),
    );
    let mut args = vec![
        "--canonical",
        "pipeline",
        "--train-pred",
        &tp,
        "--train-labels",
        &tl,
        "--test-pred",
        &te,
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn criterion_9() -> Check {
    let mut c = Check::default();
    let tmp = tempfile::tempdir().unwrap();
    let big = tmp.path().join("m2000");
    let small = tmp.path().join("m100");
    for (dir, m) in [(&big, "2000"), (&small, "100")] {
        let r = run(&[
            "gen",
            "--seed",
            "7",
            "--m",
            m,
            "--n",
            "64",
            "--hypotheses",
            "16",
            "--base-error",
            "0.1",
            "--out",
            dir.to_str().unwrap(),
        ]);
        c.expect(r.code == 0, format!("gen m={m} exit {}", r.code));
    }
    let first = pipeline_run(&big, &["--seed", "7"]);
    let second = pipeline_run(&big, &["--seed", "7"]);
    c.expect(first.code == 0, format!("pipeline exit {}", first.code));
    c.expect(first.stdout == second.stdout, "reruns differ");
    c.expect(
        first.stdout == std::fs::read_to_string(golden("pipeline_seed7_m2000.json")).unwrap(),
        "m=2000 report differs from golden",
    );
    let report = json(&first);
    validate_schema(&mut c, &report);
    let lh = num(&report["bound_report"], "lambda_hat");
    c.expect(
        report["fallback"] == false && report["bound_report"]["degenerate"] == false,
        "m=2000 degenerate",
    );
    c.expect(
        (0.45..=0.65).contains(&lh),
        format!("lambda_hat {lh} outside [0.45, 0.65]"),
    );
    c.expect(
        report["records"].as_array().unwrap().len() == 64,
        "record count",
    );

    let fallback = pipeline_run(&small, &[]);
    c.expect(fallback.code == 0, format!("m=100 exit {}", fallback.code));
    let fb = json(&fallback);
    validate_schema(&mut c, &fb);
    let lh_small = num(&fb["bound_report"], "lambda_hat");
    c.expect(
        fb["fallback"] == true && lh_small <= 0.0,
        format!("m=100 not degenerate: {lh_small}"),
    );
    c.expect(
        fb.get("game_solution").is_none(),
        "m=100 has a game solution",
    );
    let gibbs = fb["records"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["prediction"] == r["vote"]);
    c.expect(gibbs, "m=100 predictions differ from votes");
    c.note(format!(
        "lambda_hat {lh:.4} (m=2000), {lh_small:.2e} (m=100)"
    ));
    c
}

fn criterion_10() -> Check {
    let mut c = Check::default();
    let input = golden("inputs/fix1.csv");
    let r = run(&[
        "--canonical",
        "abstain",
        "--votes",
        input.to_str().unwrap(),
        "--lambda",
        "0.5",
        "--alpha",
        "0.25",
    ]);
    c.expect(r.code == 0, "exit");
    c.expect(
        r.stdout == std::fs::read_to_string(golden("fix1_abstain_alpha_0.25.json")).unwrap(),
        "golden",
    );
    let v = json(&r);
    let formula = num(&v, "loss_formula");
    let against = num(&v, "loss_against_z_star");
    let worst = num(&v, "oracle_worst_case_loss");
    let value = num(&v, "value_exact");
    c.expect(
        close(formula, 0.0875, TOL),
        format!("loss formula {formula}"),
    );
    c.expect(
        close(against, 0.1625, TOL),
        format!("loss against z* {against}"),
    );
    c.expect(
        close(worst, 0.1925, TOL),
        format!("oracle worst case {worst}"),
    );
    c.expect(close(value, 0.1484375, TOL), format!("value {value}"));
    c.expect(worst >= value - TOL, "worst case below value");

    // independent re-derivation: brute-force vertex enumeration of nature's LP
    let (a, g, p, alpha, n) = (
        [1.0, 0.8, 0.5, 0.2],
        [1.0, 1.0, 1.0, 0.4],
        [0.0, 0.0, 0.0, 0.6],
        0.25,
        4.0,
    );
    let costs: Vec<f64> = g.iter().zip(&p).map(|(gi, pi)| (1.0 - pi) * gi).collect();
    let (_, min_cz) =
        enumerate_box_lp(&BoxLpProblem::new(costs, a.to_vec(), 2.0).unwrap()).unwrap();
    let brute = 0.5 + p.iter().map(|pi| pi * (alpha - 0.5)).sum::<f64>() / n - min_cz / (2.0 * n);
    c.expect(
        close(brute, worst, TOL),
        format!("vertex enumeration {brute}"),
    );
    let z_star = [1.0, 1.0, 0.4, 0.0];
    let direct: f64 = (0..4)
        .map(|i| p[i] * alpha + 0.5 * (1.0 - p[i]) * (1.0 - g[i] * z_star[i]))
        .sum::<f64>()
        / n;
    c.expect(
        close(direct, against, TOL),
        format!("direct loss against z* {direct}"),
    );
    c.note(format!(
        "formula {formula}, vs z* {against}, worst case {worst} >= value {value}"
    ));
    c
}

fn main() {
    let start = Instant::now();
    let verify = run(&[
        "--canonical",
        "verify",
        "--count",
        "200",
        "--seed",
        "1",
        "--nmax",
        "6",
    ]);
    let batch = json(&verify);
    let verify_ok = verify.code == 0;

    let results: Vec<(&str, Check)> = vec![
        (
            "1 game value vs enumeration (200 instances, n <= 6)",
            criterion_1(&batch, verify.elapsed),
        ),
        (
            "2 saddle certification both directions",
            criterion_2(&batch),
        ),
        ("3 fixtures FIX-1/2/3", criterion_3()),
        ("4 value lower bound and gap", criterion_4(&batch)),
        ("5 abstain value regimes, bracket and grid", criterion_5()),
        ("6 near-optimal abstain strategy", criterion_6(&batch)),
        ("7 abstain fraction bound", criterion_7(&batch)),
        ("8 PAC-Bayes numerics", criterion_8()),
        ("9 end-to-end pipeline", criterion_9()),
        ("10 abstain loss discrepancy report", criterion_10()),
    ];

    let mut failed = !verify_ok;
    if !verify_ok {
        println!("FAIL verify run exited with {}", verify.code);
    }
    for (name, check) in &results {
        let ok = check.failures.is_empty();
        failed |= !ok;
        let status = if ok { "PASS" } else { "FAIL" };
        println!("{status} criterion {name} [{}]", check.notes.join("; "));
        for f in &check.failures {
            println!("    - {f}");
        }
    }
    println!("acceptance finished in {:.2?}", start.elapsed());
    if failed {
        std::process::exit(1);
    }
}
