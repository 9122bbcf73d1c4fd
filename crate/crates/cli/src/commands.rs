//! The subcommands. Each returns a serializable value; printing and exit
//! codes are left to the binary.

use std::fs;
use std::path::{Path, PathBuf};

use ensemble_minimax::oracle::{self, BatchCertification, MAX_ORACLE_N};
use ensemble_minimax::pac_bayes;
use ensemble_minimax::{
    abstain, game, AbstainSolution, AbstainStrategy, GameSolution, LabeledSample, VoteProfile,
    WeightRole, WeightVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io;
use crate::report::{ExampleRecord, PipelineReport, PosteriorSummary, TOOL_VERSION};

fn check_lambda(lambda: f64) -> CliResult<()> {
    if lambda > 1.0 {
        return Err(CliError::invalid(format!(
            "lambda = {lambda} must lie in (0, 1]"
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(ensemble_minimax::Error::InvalidCost { alpha }.into());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SolveOutput {
    pub n: usize,
    pub lambda: f64,
    #[serde(flatten)]
    pub solution: GameSolution,
}

pub fn solve(votes_path: &Path, lambda: f64) -> CliResult<SolveOutput> {
    check_lambda(lambda)?;
    let votes = io::read_votes(votes_path)?;
    let profile = VoteProfile::new(votes, lambda)?;
    Ok(SolveOutput {
        n: profile.n(),
        lambda,
        solution: game::solve(&profile),
    })
}

#[derive(Debug, Serialize)]
pub struct AbstainOutput {
    pub n: usize,
    pub lambda: f64,
    #[serde(flatten)]
    pub solution: AbstainSolution,
    pub g_star: Vec<f64>,
    pub z_star: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_worst_case_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_worst_case_labels: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_worst_case_omitted: Option<String>,
}

pub fn abstain(votes_path: &Path, lambda: f64, alpha: f64) -> CliResult<AbstainOutput> {
    check_lambda(lambda)?;
    check_alpha(alpha)?;
    let votes = io::read_votes(votes_path)?;
    let profile = VoteProfile::new(votes, lambda)?;
    let plain = game::solve(&profile);
    let solution = abstain::solve(&profile, alpha)?;
    let (mut loss, mut labels, mut omitted) = (None, None, None);
    if profile.n() <= MAX_ORACLE_N {
        let p = AbstainStrategy::new(solution.p_alg.clone(), alpha)?;
        let (z, worst) = oracle::worst_case_abstain_loss(&profile, &plain.g_star, &p)?;
        loss = Some(worst);
        labels = Some(z);
    } else {
        omitted = Some(format!(
            "oracle worst case is only computed for n <= {MAX_ORACLE_N}; n = {}",
            profile.n()
        ));
    }
    Ok(AbstainOutput {
        n: profile.n(),
        lambda,
        solution,
        g_star: plain.g_star,
        z_star: plain.z_star,
        oracle_worst_case_loss: loss,
        oracle_worst_case_labels: labels,
        oracle_worst_case_omitted: omitted,
    })
}

/// How the pipeline picks its posterior.
#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorSpec {
    Uniform,
    ExpWeights(f64),
    File(PathBuf),
}

impl PosteriorSpec {
    /// `uniform`, `exp:<eta>`, or a path to a weights file.
    pub fn parse(s: &str) -> CliResult<Self> {
        if s == "uniform" {
            return Ok(Self::Uniform);
        }
        if let Some(eta) = s.strip_prefix("exp:") {
            let eta: f64 = eta
                .parse()
                .map_err(|_| CliError::invalid(format!("bad temperature in posterior {s:?}")))?;
            if !(eta.is_finite() && eta >= 0.0) {
                return Err(CliError::invalid(format!(
                    "posterior temperature {eta} must be >= 0"
                )));
            }
            // temperature zero is the uniform posterior
            return Ok(if eta == 0.0 {
                Self::Uniform
            } else {
                Self::ExpWeights(eta)
            });
        }
        Ok(Self::File(PathBuf::from(s)))
    }

    fn label(&self) -> String {
        match self {
            Self::Uniform => "uniform".into(),
            Self::ExpWeights(eta) => format!("exp:{eta}"),
            Self::File(p) => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineArgs {
    pub train_pred: PathBuf,
    pub train_labels: PathBuf,
    pub test_pred: PathBuf,
    pub posterior: PosteriorSpec,
    pub delta: f64,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
}

pub fn pipeline(args: &PipelineArgs) -> CliResult<PipelineReport> {
    if !(args.delta > 0.0 && args.delta < 1.0) {
        return Err(CliError::invalid(format!(
            "delta = {} must lie in (0, 1)",
            args.delta
        )));
    }
    if let Some(alpha) = args.alpha {
        check_alpha(alpha)?;
    }
    let train = io::read_predictions(&args.train_pred)?;
    let labels = io::read_labels(&args.train_labels)?;
    let test = io::read_predictions(&args.test_pred)?;
    if labels.len() != train.n() {
        return Err(CliError::Dimension(format!(
            "{} training rows but {} labels",
            train.n(),
            labels.len()
        )));
    }
    if test.h() != train.h() {
        return Err(CliError::Dimension(format!(
            "training set has {} hypotheses, test set has {}",
            train.h(),
            test.h()
        )));
    }
    let h = train.h();
    let sample = LabeledSample::new(train, labels)?;
    let (q, q0) = match &args.posterior {
        PosteriorSpec::Uniform => (WeightVector::uniform(h, WeightRole::Posterior), None),
        PosteriorSpec::ExpWeights(eta) => (pac_bayes::exp_weights_posterior(&sample, *eta)?, None),
        PosteriorSpec::File(path) => io::read_weights(path, h)?,
    };
    let q0 = q0.unwrap_or_else(|| WeightVector::uniform(h, WeightRole::Prior));
    let mut bound = pac_bayes::bound_report(&sample, &q, &q0, args.delta)?;
    let votes = ensemble_minimax::compute_votes(&test, &q)?;
    let n = votes.len();

    let mut warnings = Vec::new();
    let (game_solution, abstain_solution, predictions, abstain_probs) = if bound.degenerate {
        warnings.push(format!(
            "lambda_hat = {} <= 0: no correlation guarantee, predicting with the Gibbs votes",
            crate::report::round_sig(bound.lambda_hat)
        ));
        (None, None, votes.clone(), vec![0.0; n])
    } else {
        let profile = VoteProfile::new(votes.clone(), bound.lambda_hat)?;
        pac_bayes::attach_profile_bounds(&mut bound, &profile)?;
        let plain = game::solve(&profile);
        let g = plain.g_star.clone();
        match args.alpha {
            Some(alpha) => {
                let sol = abstain::solve(&profile, alpha)?;
                let p = sol.p_alg.clone();
                (Some(plain), Some(sol), g, p)
            }
            None => {
                bound.abstain_bound = None;
                bound.mistake_bound = None;
                (Some(plain), None, g, vec![0.0; n])
            }
        }
    };

    let records = (0..n)
        .map(|i| ExampleRecord {
            index: i,
            vote: votes[i],
            prediction: predictions[i],
            abstain_prob: abstain_probs[i],
            hard_label: ensemble_minimax::numeric::sgn(predictions[i]) as i8,
        })
        .collect();
    Ok(PipelineReport {
        tool_version: TOOL_VERSION,
        seed: args.seed,
        fallback: bound.degenerate,
        m: sample.m(),
        n,
        h,
        posterior: PosteriorSummary {
            spec: args.posterior.label(),
            weights: q.weights().to_vec(),
            prior: q0.weights().to_vec(),
        },
        bound_report: bound,
        game_solution,
        abstain_solution,
        records,
        warnings,
    })
}

/// Single-instance certification input for `verify`.
#[derive(Debug, Clone)]
pub struct VerifyInstance {
    pub votes: PathBuf,
    pub lambda: f64,
    pub alpha: Option<f64>,
}

pub fn verify(
    count: usize,
    seed: u64,
    nmax: usize,
    instance: Option<&VerifyInstance>,
) -> CliResult<BatchCertification> {
    if nmax > MAX_ORACLE_N {
        return Err(CliError::invalid(format!(
            "nmax = {nmax} exceeds the oracle limit {MAX_ORACLE_N}"
        )));
    }
    match instance {
        Some(inst) => {
            check_lambda(inst.lambda)?;
            if let Some(alpha) = inst.alpha {
                check_alpha(alpha)?;
            }
            let votes = io::read_votes(&inst.votes)?;
            VoteProfile::new(votes.clone(), inst.lambda)?;
            if votes.len() > MAX_ORACLE_N {
                return Err(CliError::invalid(format!(
                    "n = {} exceeds the oracle limit {MAX_ORACLE_N}",
                    votes.len()
                )));
            }
            Ok(oracle::certify_single(
                &votes,
                inst.lambda,
                inst.alpha,
                seed,
            )?)
        }
        None => {
            if count == 0 {
                return Err(CliError::invalid("count must be at least 1"));
            }
            Ok(oracle::certify_batch(count, seed, nmax)?)
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenArgs {
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub hypotheses: usize,
    pub base_error: f64,
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct GenSummary {
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub hypotheses: usize,
    pub base_error: f64,
    pub hypothesis_error_rates: Vec<f64>,
    pub files: Vec<String>,
}

pub const TRAIN_PRED: &str = "train_pred.csv";
pub const TRAIN_LABELS: &str = "train_labels.csv";
pub const TEST_PRED: &str = "test_pred.csv";

/// Labels uniform on {-1, 1}; hypothesis `j` flips each label independently
/// with a rate drawn once from `[0.8, 1.2] * base_error`.
pub fn generate(args: &GenArgs) -> CliResult<GenSummary> {
    if args.m == 0 || args.n == 0 || args.hypotheses == 0 {
        return Err(CliError::invalid("m, n and hypotheses must be positive"));
    }
    if !(args.base_error > 0.0 && args.base_error < 0.5) {
        return Err(CliError::invalid(format!(
            "base error {} must lie in (0, 0.5)",
            args.base_error
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let rates: Vec<f64> = (0..args.hypotheses)
        .map(|_| args.base_error * rng.random_range(0.8..=1.2))
        .collect();
    let mut draw = |count: usize| -> (Vec<Vec<i8>>, Vec<i8>) {
        let mut rows = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            let y: i8 = if rng.random::<bool>() { 1 } else { -1 };
            rows.push(
                rates
                    .iter()
                    .map(|&r| if rng.random_bool(r) { -y } else { y })
                    .collect(),
            );
            labels.push(y);
        }
        (rows, labels)
    };
    let (train_rows, train_labels) = draw(args.m);
    let (test_rows, _) = draw(args.n);

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let header: Vec<String> = (1..=args.hypotheses).map(|j| format!("h{j}")).collect();
    let write_matrix = |name: &str, rows: &[Vec<i8>]| -> CliResult<()> {
        let path = args.out.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_io(&path, e))?;
        w.write_record(&header).map_err(|e| csv_io(&path, e))?;
        for row in rows {
            w.write_record(row.iter().map(|x| x.to_string()))
                .map_err(|e| csv_io(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    };
    write_matrix(TRAIN_PRED, &train_rows)?;
    write_matrix(TEST_PRED, &test_rows)?;
    let path = args.out.join(TRAIN_LABELS);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_io(&path, e))?;
    w.write_record(["label"]).map_err(|e| csv_io(&path, e))?;
    for y in &train_labels {
        w.write_record([y.to_string()])
            .map_err(|e| csv_io(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    Ok(GenSummary {
        seed: args.seed,
        m: args.m,
        n: args.n,
        hypotheses: args.hypotheses,
        base_error: args.base_error,
        hypothesis_error_rates: rates,
        files: [TRAIN_PRED, TRAIN_LABELS, TEST_PRED]
            .iter()
            .map(|f| f.to_string())
            .collect(),
    })
}

fn csv_io(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}
