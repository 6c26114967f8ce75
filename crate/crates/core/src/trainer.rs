//! Training pipelines: the hybrid mutation / coarse-descent loop followed by
//! fine descent, and the plain SGD and Adam baselines.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::elasticity::{ElasticityLoss, LoadCase, LossBreakdown, Material, ProblemSpec};
use crate::error::{Error, Result};
use crate::exec::ExecMode;
use crate::mga::{mga_iteration, MgaConfig, MutationConfig, SelectionState};
use crate::network::{init_params_bounded, unflatten, Architecture, NetworkParams};
use crate::optim::{descend, DescentOptions, DescentStatus, DivergenceGuard, Stepper};
use crate::sampling::{generate_grid, GridSpec, SampleSet};

/// Every knob of a training run. Defaults are the tuned setting for the
/// end-loaded cube.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr_c: f64,
    pub lr_f: f64,
    pub n_gai: usize,
    pub n_h: usize,
    pub n_nh: usize,
    pub p_sf: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub beta_i: f64,
    pub m_g: f64,
    pub m_m: f64,
    pub m_l: f64,
    /// Dirichlet weight; `None` means `0.05 * N_x N_y N_z`.
    pub gamma: Option<f64>,
    pub fsgd_iters: usize,
    pub csgd_iters: usize,
    pub tournament_size: usize,
    pub case: LoadCase,
    pub e: f64,
    pub nu: f64,
    pub normalize_stress: bool,
    /// Initial parameters are drawn from U[-init_bound, init_bound].
    pub init_bound: f64,
    pub seed: u64,
    pub guard: DivergenceGuard,
    pub exec: ExecMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_c: 0.6,
            lr_f: 1e-5,
            n_gai: 30,
            n_h: 2,
            n_nh: 10,
            p_sf: 0.97,
            nx: 5,
            ny: 5,
            nz: 5,
            beta_i: 0.0,
            m_g: 0.3,
            m_m: 0.3,
            m_l: 0.3,
            gamma: None,
            fsgd_iters: 2000,
            csgd_iters: 200,
            tournament_size: 3,
            case: LoadCase::A,
            e: 1.0,
            nu: 0.3,
            normalize_stress: true,
            init_bound: 0.1,
            seed: 0,
            guard: DivergenceGuard::default(),
            exec: ExecMode::default(),
        }
    }
}

impl TrainConfig {
    pub fn arch(&self) -> Result<Architecture> {
        Architecture::new(self.n_h, self.n_nh)
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            beta: self.beta_i,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
            .unwrap_or(0.05 * (self.nx * self.ny * self.nz) as f64)
    }

    pub fn problem(&self) -> ProblemSpec {
        ProblemSpec::new(self.case, self.gamma(), self.normalize_stress)
    }

    pub fn material(&self) -> Result<Material> {
        Material::new(self.e, self.nu)
    }

    pub fn mga(&self) -> MgaConfig {
        MgaConfig {
            p_sf: self.p_sf,
            n_gai: self.n_gai,
            mutation: MutationConfig {
                m_g: self.m_g,
                m_m: self.m_m,
                m_l: self.m_l,
            },
            tournament_size: self.tournament_size,
            csgd_iters: self.csgd_iters,
            lr_c: self.lr_c,
            guard: self.guard,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arch()?;
        self.grid().validate()?;
        self.material()?;
        self.problem().validate()?;
        self.mga().validate()?;
        if !(self.init_bound > 0.0 && self.init_bound.is_finite()) {
            return Err(Error::Config(format!(
                "init_bound must be positive, got {}",
                self.init_bound
            )));
        }
        if !(self.lr_f > 0.0) {
            return Err(Error::Config(format!(
                "lr_f must be positive, got {}",
                self.lr_f
            )));
        }
        Ok(())
    }

    pub fn samples(&self) -> Result<SampleSet> {
        generate_grid(&self.grid())
    }

    /// Loss of this configuration's grid for an explicit problem.
    pub fn loss(&self, problem: &ProblemSpec, material: &Material) -> Result<ElasticityLoss> {
        Ok(
            ElasticityLoss::new(self.arch()?, self.samples()?, *problem, *material)?
                .with_exec(self.exec),
        )
    }
}

/// One MGA iteration as seen by the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub iteration: usize,
    /// `MSE_c` of the candidate (infinite if its coarse descent diverged).
    pub candidate_msec: f64,
    pub accepted: bool,
    /// Seconds since the start of the run.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    pub mse_i: f64,
    pub generations: Vec<GenerationRecord>,
    /// Last accepted `MSE_c`; infinite when nothing was accepted.
    pub mse_after_mga: f64,
    pub fsgd_curve: Vec<f64>,
    pub fsgd_status: Option<DescentStatus>,
    pub mse_min: f64,
    pub mga_time: f64,
    pub fsgd_time: f64,
    pub total_time: f64,
    /// `(seconds, best loss so far)` samples for loss-vs-time plots.
    pub timeline: Vec<(f64, f64)>,
}

impl TrainingTrace {
    pub fn accepted_count(&self) -> usize {
        self.generations.iter().filter(|g| g.accepted).count()
    }

    /// Accepted `MSE_c` values in order.
    pub fn accepted_msec(&self) -> Vec<f64> {
        self.generations
            .iter()
            .filter(|g| g.accepted)
            .map(|g| g.candidate_msec)
            .collect()
    }

    fn note(&mut self, t: f64, loss: f64) {
        if loss < self.mse_min {
            self.mse_min = loss;
        }
        self.timeline.push((t, self.mse_min));
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Lowest-loss parameters of the run.
    pub params: NetworkParams,
    pub trace: TrainingTrace,
    pub loss: LossBreakdown,
}

/// A run that stopped on an evaluation failure, with what it recorded.
#[derive(Debug, Clone)]
pub struct TrainAbort {
    pub error: Error,
    pub trace: TrainingTrace,
}

impl std::fmt::Display for TrainAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)
    }
}

impl std::error::Error for TrainAbort {}

impl From<Error> for TrainAbort {
    fn from(error: Error) -> Self {
        Self {
            error,
            trace: TrainingTrace::default(),
        }
    }
}

struct Best {
    loss: f64,
    params: Vec<f64>,
}

impl Best {
    fn offer(&mut self, loss: f64, params: &[f64]) {
        if loss < self.loss {
            self.loss = loss;
            self.params = params.to_vec();
        }
    }
}

/// Full hybrid pipeline: random init, `N_GAi` mutation / coarse-descent
/// iterations, then fine descent at `lr_f`.
pub fn train_mga_msgd(
    cfg: &TrainConfig,
    problem: &ProblemSpec,
    material: &Material,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    run_hybrid(cfg, problem, material, None)
}

/// Hybrid pipeline under a wall-clock budget. Mutation iterations stop when
/// the budget runs out; otherwise fine descent continues until it does.
pub fn train_mga_msgd_budgeted(
    cfg: &TrainConfig,
    problem: &ProblemSpec,
    material: &Material,
    budget: Duration,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    run_hybrid(cfg, problem, material, Some(budget))
}

fn run_hybrid(
    cfg: &TrainConfig,
    problem: &ProblemSpec,
    material: &Material,
    budget: Option<Duration>,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    cfg.validate()?;
    let start = Instant::now();
    let deadline = budget.map(|b| start + b);
    let expired = || deadline.is_some_and(|d| Instant::now() >= d);
    let arch = cfg.arch()?;
    let loss = cfg.loss(problem, material)?;
    let mga = cfg.mga();

    let init = init_params_bounded(arch, cfg.seed, cfg.init_bound);
    let mut trace = TrainingTrace {
        mse_after_mga: f64::INFINITY,
        mse_min: f64::INFINITY,
        ..TrainingTrace::default()
    };
    let abort = |error: Error, mut trace: TrainingTrace| {
        trace.total_time = start.elapsed().as_secs_f64();
        TrainAbort { error, trace }
    };

    trace.mse_i = match loss.breakdown(&init) {
        Ok(b) => b.mse,
        Err(e) => return Err(abort(e, trace)),
    };
    trace.note(start.elapsed().as_secs_f64(), trace.mse_i);
    let mut best = Best {
        loss: trace.mse_i,
        params: init.as_slice().to_vec(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut generation = init.as_slice().to_vec();
    let mut msec = f64::INFINITY;
    let mut selection = SelectionState::new(generation.len());
    for iteration in 0..mga.n_gai {
        if expired() {
            break;
        }
        let out = match mga_iteration(&generation, msec, &mut selection, &loss, &mga, &mut rng) {
            Ok(o) => o,
            Err(e) => return Err(abort(e, trace)),
        };
        let t = start.elapsed().as_secs_f64();
        trace.generations.push(GenerationRecord {
            iteration,
            candidate_msec: out.candidate_msec,
            accepted: out.accepted,
            wall_time: t,
        });
        if out.accepted {
            log::debug!("generation {iteration}: accepted MSE_c = {:.6e}", out.msec);
            best.offer(out.msec, &out.generation);
            generation = out.generation;
            msec = out.msec;
        }
        trace.note(t, msec);
    }
    trace.mse_after_mga = msec;
    trace.mga_time = start.elapsed().as_secs_f64();

    let fsgd_iters = if deadline.is_some() {
        usize::MAX
    } else {
        cfg.fsgd_iters
    };
    if fsgd_iters > 0 && !expired() {
        let opts = DescentOptions {
            max_iters: fsgd_iters,
            guard: cfg.guard,
            deadline,
            clock_origin: start,
        };
        let fsgd = match descend(
            &generation,
            &loss,
            &mut Stepper::Sgd { lr: cfg.lr_f },
            &opts,
        ) {
            Ok(o) => o,
            Err(e) => return Err(abort(e, trace)),
        };
        for (&t, &l) in fsgd.times.iter().zip(&fsgd.trace) {
            trace.note(t, l);
        }
        best.offer(fsgd.best_loss, &fsgd.best_params);
        trace.fsgd_curve = fsgd.trace;
        trace.fsgd_status = Some(fsgd.status);
    }
    trace.total_time = start.elapsed().as_secs_f64();
    trace.fsgd_time = trace.total_time - trace.mga_time;

    finish(best, trace, &loss, arch)
}

fn finish(
    best: Best,
    trace: TrainingTrace,
    loss: &ElasticityLoss,
    arch: Architecture,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    let params = unflatten(best.params, arch)?;
    let breakdown = match loss.breakdown(&params) {
        Ok(b) => b,
        Err(error) => return Err(TrainAbort { error, trace }),
    };
    Ok(TrainOutcome {
        params,
        trace,
        loss: breakdown,
    })
}

/// Optimizer used by a baseline run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Sgd,
    Adam,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Sgd => "sgd",
            BaselineKind::Adam => "adam",
        }
    }
}

/// Plain descent from the same initialization as the hybrid pipeline.
/// The trace's FSGD fields hold the baseline's descent.
pub fn train_baseline(
    kind: BaselineKind,
    lr: f64,
    iters: usize,
    cfg: &TrainConfig,
    problem: &ProblemSpec,
    material: &Material,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    run_baseline(kind, lr, iters, cfg, problem, material, None)
}

pub fn train_baseline_budgeted(
    kind: BaselineKind,
    lr: f64,
    cfg: &TrainConfig,
    problem: &ProblemSpec,
    material: &Material,
    budget: Duration,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    run_baseline(kind, lr, usize::MAX, cfg, problem, material, Some(budget))
}

fn run_baseline(
    kind: BaselineKind,
    lr: f64,
    iters: usize,
    cfg: &TrainConfig,
    problem: &ProblemSpec,
    material: &Material,
    budget: Option<Duration>,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    cfg.validate()?;
    let start = Instant::now();
    let arch = cfg.arch()?;
    let loss = cfg.loss(problem, material)?;
    let init = init_params_bounded(arch, cfg.seed, cfg.init_bound);
    let mut trace = TrainingTrace {
        mse_after_mga: f64::INFINITY,
        mse_min: f64::INFINITY,
        ..TrainingTrace::default()
    };
    trace.mse_i = loss.breakdown(&init)?.mse;
    trace.note(0.0, trace.mse_i);
    let mut best = Best {
        loss: trace.mse_i,
        params: init.as_slice().to_vec(),
    };
    let mut stepper = match kind {
        BaselineKind::Sgd => Stepper::Sgd { lr },
        BaselineKind::Adam => Stepper::adam(lr, arch.param_count()),
    };
    if kind == BaselineKind::Sgd && !(lr > 0.0) {
        return Err(Error::Config(format!("SGD learning rate must be positive, got {lr}")).into());
    }
    let opts = DescentOptions {
        max_iters: iters,
        guard: cfg.guard,
        deadline: budget.map(|b| start + b),
        clock_origin: start,
    };
    let out = descend(init.as_slice(), &loss, &mut stepper, &opts)?;
    for (&t, &l) in out.times.iter().zip(&out.trace) {
        trace.note(t, l);
    }
    best.offer(out.best_loss, &out.best_params);
    trace.fsgd_curve = out.trace;
    trace.fsgd_status = Some(out.status);
    trace.total_time = start.elapsed().as_secs_f64();
    trace.fsgd_time = trace.total_time;
    finish(best, trace, &loss, arch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TrainConfig {
        TrainConfig {
            n_gai: 3,
            csgd_iters: 5,
            fsgd_iters: 10,
            nx: 3,
            ny: 3,
            nz: 3,
            n_nh: 5,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    fn run(cfg: &TrainConfig) -> TrainOutcome {
        train_mga_msgd(cfg, &cfg.problem(), &cfg.material().unwrap()).unwrap()
    }

    #[test]
    fn defaults_match_tuned_setting() {
        let c = TrainConfig::default();
        assert_eq!(
            (c.lr_c, c.lr_f, c.n_gai, c.n_h, c.n_nh, c.p_sf),
            (0.6, 1e-5, 30, 2, 10, 0.97)
        );
        assert_eq!((c.nx, c.ny, c.nz, c.beta_i), (5, 5, 5, 0.0));
        assert_eq!((c.m_g, c.m_m, c.m_l), (0.3, 0.3, 0.3));
        assert_eq!(c.gamma(), 6.25);
        assert_eq!(c.fsgd_iters, 2000);
    }

    #[test]
    fn seed_repeat_is_deterministic() {
        let a = run(&small());
        let b = run(&small());
        assert_eq!(a.params, b.params);
        assert_eq!(a.trace.mse_i, b.trace.mse_i);
        assert_eq!(a.trace.fsgd_curve, b.trace.fsgd_curve);
        let msec = |t: &TrainingTrace| {
            t.generations
                .iter()
                .map(|g| (g.candidate_msec, g.accepted))
                .collect::<Vec<_>>()
        };
        assert_eq!(msec(&a.trace), msec(&b.trace));
    }

    #[test]
    fn no_mga_iterations_is_fine_descent_only() {
        let cfg = TrainConfig {
            n_gai: 0,
            ..small()
        };
        let out = run(&cfg);
        assert!(out.trace.generations.is_empty());
        assert_eq!(out.trace.fsgd_curve[0], out.trace.mse_i);
        assert_eq!(out.trace.fsgd_curve.len(), cfg.fsgd_iters + 1);
    }

    #[test]
    fn returned_params_achieve_trace_minimum() {
        let out = run(&small());
        assert_eq!(out.loss.mse, out.trace.mse_min);
        for &l in out
            .trace
            .fsgd_curve
            .iter()
            .chain(&out.trace.accepted_msec())
        {
            assert!(out.trace.mse_min <= l);
        }
        let accepted = out.trace.accepted_msec();
        for w in accepted.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn baselines_share_init() {
        let cfg = small();
        let (p, m) = (cfg.problem(), cfg.material().unwrap());
        let hybrid = run(&cfg);
        let sgd = train_baseline(BaselineKind::Sgd, 0.01, 5, &cfg, &p, &m).unwrap();
        let adam = train_baseline(BaselineKind::Adam, 1e-3, 5, &cfg, &p, &m).unwrap();
        assert_eq!(hybrid.trace.mse_i, sgd.trace.mse_i);
        assert_eq!(sgd.trace.mse_i, adam.trace.mse_i);
    }

    #[test]
    fn adam_with_zero_rate_keeps_params() {
        let cfg = small();
        let out = train_baseline(
            BaselineKind::Adam,
            0.0,
            5,
            &cfg,
            &cfg.problem(),
            &cfg.material().unwrap(),
        )
        .unwrap();
        assert_eq!(
            out.params,
            init_params_bounded(cfg.arch().unwrap(), cfg.seed, cfg.init_bound)
        );
        assert!(out.trace.fsgd_curve.iter().all(|&l| l == out.trace.mse_i));
    }

    #[test]
    fn diverging_sgd_is_reported() {
        let cfg = small();
        let out = train_baseline(
            BaselineKind::Sgd,
            1e3,
            50,
            &cfg,
            &cfg.problem(),
            &cfg.material().unwrap(),
        )
        .unwrap();
        assert_eq!(out.trace.fsgd_status, Some(DescentStatus::Diverged));
        assert!(out.loss.mse <= out.trace.mse_i);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let cfg = TrainConfig {
            p_sf: 1.5,
            ..small()
        };
        assert!(train_mga_msgd(&cfg, &cfg.problem(), &cfg.material().unwrap()).is_err());
    }
}
