use serde::{Deserialize, Serialize};
use sketchrank_core::rank::Round;
use sketchrank_core::{RankReport, RankStatus};

/// Bumped on any incompatible change to [`Report`]; see `schema/report.schema.json`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub eps: f64,
    pub r1: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<usize>,
    pub seed: u64,
    pub right_sketch: String,
    pub left_sketch: String,
    pub oversample_frac: f64,
    pub r2_factor: usize,
    pub max_doublings: usize,
    pub adaptive: bool,
    pub sv_method: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorFiles {
    pub q: String,
    pub b: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub input: String,
    pub shape: [usize; 2],
    pub config: ConfigEcho,
    pub r_hat: usize,
    pub sv_estimates: Vec<f64>,
    pub oversample_estimates: Vec<f64>,
    pub rounds: Vec<Round>,
    pub status: RankStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub achieved_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub factor_rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub factors: Option<FactorFiles>,
    pub wall_time_ms: f64,
}

impl Report {
    pub fn from_rank(
        command: &str,
        input: String,
        shape: (usize, usize),
        config: ConfigEcho,
        rep: &RankReport,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            input,
            shape: [shape.0, shape.1],
            config,
            r_hat: rep.r_hat,
            sv_estimates: rep.sv_estimates.to_vec(),
            oversample_estimates: rep.oversample_estimates.clone(),
            rounds: rep.rounds.clone(),
            status: rep.status,
            achieved_residual: None,
            factor_rank: None,
            factors: None,
            wall_time_ms: 0.0,
        }
    }
}
