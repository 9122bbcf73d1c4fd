//! Input files: prediction and label CSVs, vote files, weight files.

use std::fs;
use std::path::Path;

use ensemble_minimax::{EnsembleMatrix, WeightRole, WeightVector};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Header and records of a CSV file; empty lines are skipped.
fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<csv::StringRecord>)> {
    let text = read_to_string(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::parse(path, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let records = reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::parse(path, e.to_string()))?;
    Ok((header, records))
}

fn parse_sign(path: &Path, row: usize, cell: &str) -> CliResult<i8> {
    match cell {
        "1" => Ok(1),
        "-1" => Ok(-1),
        other => Err(CliError::parse(
            path,
            format!("row {row}: cell {other:?} is not -1 or 1"),
        )),
    }
}

/// Predictions CSV with header `h1,...,hH` and one row per example.
pub fn read_predictions(path: &Path) -> CliResult<EnsembleMatrix> {
    let (header, records) = read_csv(path)?;
    let expected: Vec<String> = (1..=header.len()).map(|j| format!("h{j}")).collect();
    if header.is_empty() || header != expected {
        return Err(CliError::parse(
            path,
            format!("header must be h1,...,hH, got {}", header.join(",")),
        ));
    }
    if records.is_empty() {
        return Err(CliError::parse(path, "no examples"));
    }
    let rows = records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            rec.iter()
                .map(|cell| parse_sign(path, i + 1, cell))
                .collect::<CliResult<Vec<i8>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    EnsembleMatrix::from_rows(rows).map_err(|e| CliError::parse(path, e.to_string()))
}

/// Labels CSV with the single column `label`.
pub fn read_labels(path: &Path) -> CliResult<Vec<i8>> {
    let (header, records) = read_csv(path)?;
    if header != ["label"] {
        return Err(CliError::parse(
            path,
            "header must be the single column label",
        ));
    }
    records
        .iter()
        .enumerate()
        .map(|(i, rec)| parse_sign(path, i + 1, &rec[0]))
        .collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VotesJson {
    votes: Vec<f64>,
}

/// Votes from `{"votes": [...]}` (`.json`) or a CSV with the column `vote`.
pub fn read_votes(path: &Path) -> CliResult<Vec<f64>> {
    let votes = if path.extension().is_some_and(|e| e == "json") {
        let text = read_to_string(path)?;
        serde_json::from_str::<VotesJson>(&text)
            .map_err(|e| CliError::parse(path, e.to_string()))?
            .votes
    } else {
        let (header, records) = read_csv(path)?;
        if header != ["vote"] {
            return Err(CliError::parse(
                path,
                "header must be the single column vote",
            ));
        }
        records
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                rec[0].parse::<f64>().map_err(|e| {
                    CliError::parse(path, format!("row {}: {:?}: {e}", i + 1, &rec[0]))
                })
            })
            .collect::<CliResult<Vec<f64>>>()?
    };
    if votes.is_empty() {
        return Err(CliError::parse(path, "no votes"));
    }
    if votes.iter().any(|v| !v.is_finite()) {
        return Err(CliError::parse(path, "votes must be finite numbers"));
    }
    Ok(votes)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsJson {
    weights: Vec<f64>,
    #[serde(default)]
    prior: Option<Vec<f64>>,
}

/// Posterior weights and optional prior from `{"weights": [...], "prior": [...]}`.
pub fn read_weights(path: &Path, h: usize) -> CliResult<(WeightVector, Option<WeightVector>)> {
    let text = read_to_string(path)?;
    let parsed: WeightsJson =
        serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.to_string()))?;
    let check = |w: &[f64], what: &str| {
        if w.len() == h {
            Ok(())
        } else {
            Err(CliError::Dimension(format!(
                "{what} in {} has {} entries, ensemble has {h} hypotheses",
                path.display(),
                w.len()
            )))
        }
    };
    check(&parsed.weights, "weights")?;
    let q = WeightVector::new(parsed.weights, WeightRole::Posterior)?;
    let q0 = match parsed.prior {
        Some(p) => {
            check(&p, "prior")?;
            Some(WeightVector::new(p, WeightRole::Prior)?)
        }
        None => None,
    };
    Ok((q, q0))
}
