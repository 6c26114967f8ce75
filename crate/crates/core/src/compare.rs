//! Equal-wall-clock comparison of the hybrid pipeline against plain SGD and
//! Adam started from the same initial parameters.

use std::time::Duration;

use crate::elasticity::{Material, ProblemSpec};
use crate::error::{Error, Result};
use crate::trainer::{
    train_baseline_budgeted, train_mga_msgd_budgeted, BaselineKind, TrainConfig, TrainOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    MgaMsgd,
    Sgd,
    Adam,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::MgaMsgd, Method::Sgd, Method::Adam];

    pub fn name(self) -> &'static str {
        match self {
            Method::MgaMsgd => "mga-msgd",
            Method::Sgd => "sgd",
            Method::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    /// Wall-clock budget per method and seed.
    pub budget: Duration,
    pub seeds: Vec<u64>,
    pub sgd_lr: f64,
    pub adam_lr: f64,
}

impl CompareConfig {
    /// Baselines at the coarse rate (SGD) and the usual Adam default.
    pub fn new(train: &TrainConfig, budget: Duration, seeds: Vec<u64>) -> Self {
        Self {
            budget,
            seeds,
            sgd_lr: train.lr_c,
            adam_lr: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget.is_zero() {
            return Err(Error::Config("comparison budget must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("comparison needs at least one seed".into()));
        }
        for (name, lr) in [("sgd_lr", self.sgd_lr), ("adam_lr", self.adam_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {lr}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub mse_i: f64,
    pub final_loss: f64,
    pub total_time: f64,
    /// `(seconds, best loss so far)`.
    pub timeline: Vec<(f64, f64)>,
}

impl From<&TrainOutcome> for RunSummary {
    fn from(out: &TrainOutcome) -> Self {
        Self {
            mse_i: out.trace.mse_i,
            final_loss: out.loss.mse,
            total_time: out.trace.total_time,
            timeline: out.trace.timeline.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub method: Method,
    pub seed: u64,
    /// The failure message when the run aborted.
    pub result: std::result::Result<RunSummary, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub runs: Vec<MethodRun>,
}

impl ComparisonReport {
    pub fn runs_of(&self, method: Method) -> impl Iterator<Item = &MethodRun> {
        self.runs.iter().filter(move |r| r.method == method)
    }

    /// Median final loss over the completed runs of `method`.
    pub fn median_final_loss(&self, method: Method) -> Option<f64> {
        let losses: Vec<f64> = self
            .runs_of(method)
            .filter_map(|r| r.result.as_ref().ok())
            .map(|s| s.final_loss)
            .collect();
        median(&losses)
    }

    pub fn failures(&self, method: Method) -> usize {
        self.runs_of(method).filter(|r| r.result.is_err()).count()
    }

    /// A method is failed when none of its runs completed.
    pub fn failed(&self, method: Method) -> bool {
        self.runs_of(method).all(|r| r.result.is_err())
    }
}

/// Median with the mean of the two central values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Runs every method for every seed, one after another so that each run
/// has the machine to itself.
pub fn compare(
    train: &TrainConfig,
    problem: &ProblemSpec,
    material: &Material,
    cfg: &CompareConfig,
) -> Result<ComparisonReport> {
    cfg.validate()?;
    train.validate()?;
    let mut report = ComparisonReport::default();
    for &seed in &cfg.seeds {
        let train = TrainConfig {
            seed,
            ..train.clone()
        };
        for method in Method::ALL {
            let out = match method {
                Method::MgaMsgd => train_mga_msgd_budgeted(&train, problem, material, cfg.budget),
                Method::Sgd => train_baseline_budgeted(
                    BaselineKind::Sgd,
                    cfg.sgd_lr,
                    &train,
                    problem,
                    material,
                    cfg.budget,
                ),
                Method::Adam => train_baseline_budgeted(
                    BaselineKind::Adam,
                    cfg.adam_lr,
                    &train,
                    problem,
                    material,
                    cfg.budget,
                ),
            };
            let result = match &out {
                Ok(o) => Ok(RunSummary::from(o)),
                Err(e) => {
                    log::warn!("{} seed {seed} failed: {e}", method.name());
                    Err(e.to_string())
                }
            };
            if let Ok(s) = &result {
                log::info!(
                    "{} seed {seed}: final loss {:.6e} after {:.1} s",
                    method.name(),
                    s.final_loss,
                    s.total_time
                );
            }
            report.runs.push(MethodRun {
                method,
                seed,
                result,
            });
        }
    }
    Ok(report)
}
