//! One-at-a-time (Morris-style) screening of the training hyperparameters.
//!
//! Each parameter is swept over equispaced levels of its range while all
//! others stay at their base values. At every level a few seeded training
//! runs give four metrics (average and minimum final loss, average and
//! minimum wall time), and each metric's spread across levels is summarized
//! by [`mu`] and [`sigma`].
//!
//! `mu` here is the mean absolute deviation about the sample mean with an
//! `n - 1` denominator, not the classical mean elementary effect.

use std::fmt;

use crate::elasticity::{Material, ProblemSpec};
use crate::error::{Error, Result};
use crate::trainer::{train_mga_msgd, TrainConfig};

/// `sqrt(sum (x - mean)^2 / (n - 1))`.
pub fn sigma(values: &[f64]) -> Result<f64> {
    let m = mean_of(values)?;
    let ss: f64 = values.iter().map(|x| (x - m) * (x - m)).sum();
    Ok((ss / (values.len() - 1) as f64).sqrt())
}

/// `sum |x - mean| / (n - 1)`.
pub fn mu(values: &[f64]) -> Result<f64> {
    let m = mean_of(values)?;
    let s: f64 = values.iter().map(|x| (x - m).abs()).sum();
    Ok(s / (values.len() - 1) as f64)
}

fn mean_of(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Domain(format!(
            "spread statistics need at least 2 values, got {}",
            values.len()
        )));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    LrC,
    NGai,
    NH,
    NNh,
    Psf,
    Nx,
    NxMinusNy,
    Beta,
    Mg,
    Mm,
    Ml,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::LrC => "lr_c",
            SweepParam::NGai => "N_GAi",
            SweepParam::NH => "N_h",
            SweepParam::NNh => "N_nh",
            SweepParam::Psf => "P_sf",
            SweepParam::Nx => "N_x",
            SweepParam::NxMinusNy => "N_x-N_y",
            SweepParam::Beta => "beta_i",
            SweepParam::Mg => "M_g",
            SweepParam::Mm => "M_m",
            SweepParam::Ml => "M_l",
        }
    }

    /// Writes `value` into `cfg`. `N_x - N_y` sets both `N_y` and `N_z` to
    /// `N_x - value`; `N_x` keeps that offset.
    pub fn apply(self, cfg: &mut TrainConfig, value: f64) {
        let int = || value.round().max(0.0) as usize;
        match self {
            SweepParam::LrC => cfg.lr_c = value,
            SweepParam::NGai => cfg.n_gai = int(),
            SweepParam::NH => cfg.n_h = int(),
            SweepParam::NNh => cfg.n_nh = int(),
            SweepParam::Psf => cfg.p_sf = value,
            SweepParam::Nx => {
                let offset = cfg.nx as isize - cfg.ny as isize;
                cfg.nx = int();
                cfg.ny = (cfg.nx as isize - offset).max(0) as usize;
                cfg.nz = cfg.ny;
            }
            SweepParam::NxMinusNy => {
                cfg.ny = cfg.nx.saturating_sub(int());
                cfg.nz = cfg.ny;
            }
            SweepParam::Beta => cfg.beta_i = value,
            SweepParam::Mg => cfg.m_g = value,
            SweepParam::Mm => cfg.m_m = value,
            SweepParam::Ml => cfg.m_l = value,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A uniform range with a base value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRange {
    pub param: SweepParam,
    pub lo: f64,
    pub hi: f64,
    pub base: f64,
    pub integer: bool,
}

impl ParamRange {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo <= self.base && self.base <= self.hi) {
            return Err(Error::Config(format!(
                "{}: base {} outside [{}, {}]",
                self.param, self.base, self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// `count` equispaced points from `lo` to `hi`; integer parameters are
    /// rounded and repeated levels dropped.
    pub fn levels(&self, count: usize) -> Vec<f64> {
        let raw: Vec<f64> = if count == 1 {
            vec![self.lo]
        } else {
            (0..count)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (count - 1) as f64)
                .collect()
        };
        if !self.integer {
            return raw;
        }
        let mut out: Vec<f64> = Vec::with_capacity(raw.len());
        for v in raw.into_iter().map(f64::round) {
            if out.last() != Some(&v) {
                out.push(v);
            }
        }
        out
    }
}

/// The eleven screened parameters with their ranges and base values. The
/// open upper end of `P_sf` is taken as 0.99.
pub fn table1() -> Vec<ParamRange> {
    use SweepParam::*;
    let r = |param, lo, hi, base, integer| ParamRange {
        param,
        lo,
        hi,
        base,
        integer,
    };
    vec![
        r(LrC, 0.5, 1.0, 0.7, false),
        r(NGai, 10.0, 60.0, 30.0, true),
        r(NH, 2.0, 6.0, 3.0, true),
        r(NNh, 3.0, 20.0, 10.0, true),
        r(Psf, 0.9, 0.99, 0.98, false),
        r(Nx, 5.0, 14.0, 10.0, true),
        r(NxMinusNy, 0.0, 8.0, 0.0, true),
        r(Beta, 0.0, 2.0, 0.0, false),
        r(Mg, 0.1, 0.5, 0.1, false),
        r(Mm, 0.1, 0.5, 0.1, false),
        r(Ml, 0.1, 0.5, 0.1, false),
    ]
}

/// `template` with every range at its base value. `N_x` is applied before
/// `N_x - N_y` so the offset acts on the base `N_x`.
pub fn base_config(template: &TrainConfig, ranges: &[ParamRange]) -> TrainConfig {
    let mut cfg = template.clone();
    let mut ordered: Vec<&ParamRange> = ranges.iter().collect();
    ordered.sort_by_key(|r| r.param == SweepParam::NxMinusNy);
    for r in ordered {
        r.param.apply(&mut cfg, r.base);
    }
    cfg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    AvgMse,
    MinMse,
    AvgTime,
    MinTime,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::AvgMse,
        Metric::MinMse,
        Metric::AvgTime,
        Metric::MinTime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::AvgMse => "avg_mse",
            Metric::MinMse => "min_mse",
            Metric::AvgTime => "avg_time",
            Metric::MinTime => "min_time",
        }
    }

    fn of(self, samples: &[RunSample]) -> f64 {
        let n = samples.len() as f64;
        match self {
            Metric::AvgMse => samples.iter().map(|s| s.mse).sum::<f64>() / n,
            Metric::MinMse => samples.iter().map(|s| s.mse).fold(f64::INFINITY, f64::min),
            Metric::AvgTime => samples.iter().map(|s| s.time).sum::<f64>() / n,
            Metric::MinTime => samples.iter().map(|s| s.time).fold(f64::INFINITY, f64::min),
        }
    }
}

/// Final loss and wall time of one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSample {
    pub mse: f64,
    pub time: f64,
}

/// One run request handed to the evaluator.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub param: SweepParam,
    pub value: f64,
    pub rep: usize,
    /// Base configuration with `param = value` and the run's seed applied.
    pub config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub samples: Vec<RunSample>,
    pub failures: usize,
}

impl SweepPoint {
    pub fn metric(&self, m: Metric) -> Option<f64> {
        (!self.samples.is_empty()).then(|| m.of(&self.samples))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSweep {
    pub range: ParamRange,
    pub points: Vec<SweepPoint>,
}

impl ParamSweep {
    /// Metric values at the levels that produced at least one sample.
    pub fn metric_values(&self, m: Metric) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.metric(m)).collect()
    }

    /// `(mu, sigma)` of a metric across levels; `None` with fewer than two
    /// usable levels.
    pub fn stats(&self, m: Metric) -> Option<(f64, f64)> {
        let v = self.metric_values(m);
        Some((mu(&v).ok()?, sigma(&v).ok()?))
    }

    pub fn failures(&self) -> usize {
        self.points.iter().map(|p| p.failures).sum()
    }

    /// True when no run at any level completed.
    pub fn totally_failed(&self) -> bool {
        self.points.iter().all(|p| p.samples.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub sweeps: Vec<ParamSweep>,
    pub reps: usize,
}

impl SensitivityResult {
    pub fn failures(&self) -> usize {
        self.sweeps.iter().map(ParamSweep::failures).sum()
    }

    /// One `(param, metric, mu, sigma)` row per parameter and metric; NaN
    /// where the statistics are undefined.
    pub fn rows(&self) -> Vec<(SweepParam, Metric, f64, f64)> {
        let mut rows = Vec::with_capacity(self.sweeps.len() * Metric::ALL.len());
        for s in &self.sweeps {
            for m in Metric::ALL {
                let (mu, sigma) = s.stats(m).unwrap_or((f64::NAN, f64::NAN));
                rows.push((s.range.param, m, mu, sigma));
            }
        }
        rows
    }
}

/// Sweeps every range in turn. Rep `r` of every level uses seed
/// `seed + r`, so levels of a parameter share their random initializations.
/// Evaluator errors are counted and the run left out.
pub fn morris_oat<F>(
    template: &TrainConfig,
    ranges: &[ParamRange],
    levels: usize,
    reps: usize,
    seed: u64,
    mut evaluate: F,
) -> Result<SensitivityResult>
where
    F: FnMut(&SweepRun) -> Result<RunSample>,
{
    if levels < 2 {
        return Err(Error::Config(format!(
            "need at least 2 levels, got {levels}"
        )));
    }
    if reps < 1 {
        return Err(Error::Config("need at least 1 repetition".into()));
    }
    for r in ranges {
        r.validate()?;
    }
    let base = base_config(template, ranges);
    let mut sweeps = Vec::with_capacity(ranges.len());
    for range in ranges {
        let mut points = Vec::new();
        for value in range.levels(levels) {
            let mut point = SweepPoint {
                value,
                samples: Vec::with_capacity(reps),
                failures: 0,
            };
            for rep in 0..reps {
                let mut config = base.clone();
                range.param.apply(&mut config, value);
                config.seed = seed.wrapping_add(rep as u64);
                let run = SweepRun {
                    param: range.param,
                    value,
                    rep,
                    config,
                };
                match evaluate(&run) {
                    Ok(s) => point.samples.push(s),
                    Err(e) => {
                        log::warn!("{} = {value} rep {rep} failed: {e}", range.param);
                        point.failures += 1;
                    }
                }
            }
            points.push(point);
        }
        sweeps.push(ParamSweep {
            range: *range,
            points,
        });
    }
    let result = SensitivityResult { sweeps, reps };
    if result.failures() > 0 {
        log::warn!("{} sweep runs failed and were excluded", result.failures());
    }
    Ok(result)
}

/// Evaluator that trains the full pipeline and reports its final loss and
/// wall time.
pub fn training_evaluator(
    problem: impl Fn(&TrainConfig) -> ProblemSpec,
) -> impl FnMut(&SweepRun) -> Result<RunSample> {
    move |run| {
        let cfg = &run.config;
        let material: Material = cfg.material()?;
        let out = train_mga_msgd(cfg, &problem(cfg), &material).map_err(|a| a.error)?;
        Ok(RunSample {
            mse: out.loss.mse,
            time: out.trace.total_time,
        })
    }
}
