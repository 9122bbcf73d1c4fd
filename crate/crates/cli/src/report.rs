//! Report types and JSON rendering.

use ensemble_minimax::{AbstainSolution, BoundReport, GameSolution};
use serde::Serialize;
use serde_json::{Map, Value};

/// Significant digits kept for every real in the output.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    s.parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                let r = round_sig(x);
                // -0 would render as "-0.0"
                let r = if r == 0.0 { 0.0 } else { r };
                *v = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes `report` with rounded reals. Outside canonical mode an
/// `environment` object is added at the top level.
pub fn render<T: Serialize>(report: &T, canonical: bool) -> String {
    let mut value = serde_json::to_value(report).expect("reports serialize");
    round_value(&mut value);
    if !canonical {
        if let Value::Object(map) = &mut value {
            map.insert("environment".into(), environment());
        }
    }
    let mut out = serde_json::to_string_pretty(&value).expect("json values serialize");
    out.push('\n');
    out
}

fn environment() -> Value {
    let mut env = Map::new();
    env.insert("os".into(), std::env::consts::OS.into());
    env.insert("arch".into(), std::env::consts::ARCH.into());
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    env.insert("generated_unix".into(), now.into());
    Value::Object(env)
}

pub const TOOL_VERSION: &str = concat!("ensemble-minimax ", env!("CARGO_PKG_VERSION"));

/// One test example in the pipeline output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleRecord {
    pub index: usize,
    pub vote: f64,
    pub prediction: f64,
    pub abstain_prob: f64,
    pub hard_label: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub spec: String,
    pub weights: Vec<f64>,
    pub prior: Vec<f64>,
}

/// Output of the end-to-end pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub tool_version: &'static str,
    pub seed: Option<u64>,
    pub fallback: bool,
    pub m: usize,
    pub n: usize,
    pub h: usize,
    pub posterior: PosteriorSummary,
    pub bound_report: BoundReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub game_solution: Option<GameSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abstain_solution: Option<AbstainSolution>,
    pub records: Vec<ExampleRecord>,
    pub warnings: Vec<String>,
}
