//! Human-readable TOML run reports and the CSV writers.

use std::fmt::Write as _;

use mgamsgd::elasticity::{LoadCase, LossBreakdown, END_LOAD};
use mgamsgd::network::forward;
use mgamsgd::reference::{analytic_uniaxial, cube_grid, mse_u};
use mgamsgd::trainer::{TrainConfig, TrainOutcome};
use serde::Serialize;

use crate::config::ConfigFile;
use crate::CliError;

/// Grid resolution of the reported displacement error.
pub const MSE_U_GRID: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct TraceSummary {
    pub mse_i: f64,
    pub mse_after_mga: f64,
    pub mse_min: f64,
    pub generations: usize,
    pub accepted: usize,
    pub mga_time: f64,
    pub fsgd_time: f64,
    pub total_time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LossSummary {
    pub mse_e: f64,
    pub mse_d: f64,
    pub mse_n: f64,
    pub mse_uq: f64,
    pub mse: f64,
}

impl From<LossBreakdown> for LossSummary {
    fn from(b: LossBreakdown) -> Self {
        Self {
            mse_e: b.mse_e,
            mse_d: b.mse_d,
            mse_n: b.mse_n,
            mse_uq: b.mse_uq,
            mse: b.mse,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerationRow {
    pub iteration: usize,
    pub candidate_msec: f64,
    pub accepted: bool,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub seed: u64,
    /// Displacement error against the closed-form field on a 10^3 grid;
    /// only for load case A.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_u: Option<f64>,
    pub config: ConfigFile,
    pub trace: TraceSummary,
    pub loss: LossSummary,
    pub generations: Vec<GenerationRow>,
}

impl RunReport {
    pub fn new(cfg: &TrainConfig, out: &TrainOutcome) -> Result<Self, CliError> {
        let t = &out.trace;
        let mse_u = match cfg.case {
            LoadCase::A => {
                let exact = analytic_uniaxial(cfg.material()?, END_LOAD[0]);
                Some(mse_u(
                    |x| forward(&out.params, x),
                    |x| exact.displacement(x),
                    &cube_grid(MSE_U_GRID),
                )?)
            }
            LoadCase::B => None,
        };
        Ok(Self {
            seed: cfg.seed,
            mse_u,
            config: ConfigFile::from_train_config(cfg),
            trace: TraceSummary {
                mse_i: t.mse_i,
                mse_after_mga: t.mse_after_mga,
                mse_min: t.mse_min,
                generations: t.generations.len(),
                accepted: t.accepted_count(),
                mga_time: t.mga_time,
                fsgd_time: t.fsgd_time,
                total_time: t.total_time,
            },
            loss: out.loss.into(),
            generations: t
                .generations
                .iter()
                .map(|g| GenerationRow {
                    iteration: g.iteration,
                    candidate_msec: g.candidate_msec,
                    accepted: g.accepted,
                    wall_time: g.wall_time,
                })
                .collect(),
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Output(e.to_string()))
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Builds a CSV from a header and rows of already formatted cells.
pub fn csv<I, R>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut s = String::new();
    s.push_str(header);
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}
