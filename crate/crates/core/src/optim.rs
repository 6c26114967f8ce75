//! Full-batch gradient descent: plain SGD and Adam steps, and the guarded
//! descent loop used for the coarse and fine phases and the baselines.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::jet::Objective;

fn check_step_inputs(params: &[f64], grad: &[f64]) -> Result<()> {
    if params.len() != grad.len() {
        return Err(Error::Dimension {
            expected: params.len(),
            got: grad.len(),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite { term: "gradient" });
    }
    Ok(())
}

/// `theta -= lr * grad`.
pub fn sgd_step(params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    if !(lr > 0.0) {
        return Err(Error::Domain(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    check_step_inputs(params, grad)?;
    for (p, g) in params.iter_mut().zip(grad) {
        *p -= lr * g;
    }
    Ok(())
}

/// Moment estimates of Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_bar: f64,
}

impl AdamState {
    /// Zero moments with `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(dim: usize) -> Self {
        Self::with_rates(dim, 0.9, 0.999, 1e-8)
    }

    pub fn with_rates(dim: usize, beta1: f64, beta2: f64, eps_bar: f64) -> Self {
        Self {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            beta1,
            beta2,
            eps_bar,
        }
    }
}

pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    check_step_inputs(params, grad)?;
    if state.m.len() != params.len() {
        return Err(Error::Dimension {
            expected: params.len(),
            got: state.m.len(),
        });
    }
    state.t += 1;
    let c1 = 1.0 - state.beta1.powf(state.t as f64);
    let c2 = 1.0 - state.beta2.powf(state.t as f64);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps_bar);
    }
    Ok(())
}

/// Stops a descent once the loss blows up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceGuard {
    pub blowup_factor: f64,
    pub patience: usize,
}

impl Default for DivergenceGuard {
    fn default() -> Self {
        Self {
            blowup_factor: 10.0,
            patience: 3,
        }
    }
}

/// Tracks consecutive over-threshold iterations against the phase-start
/// loss.
#[derive(Debug, Clone)]
struct GuardState {
    guard: DivergenceGuard,
    start: Option<f64>,
    over: usize,
}

impl GuardState {
    fn new(guard: DivergenceGuard) -> Self {
        Self {
            guard,
            start: None,
            over: 0,
        }
    }

    /// `true` when the guard fires.
    fn observe(&mut self, loss: f64) -> bool {
        if !loss.is_finite() {
            return true;
        }
        let start = *self.start.get_or_insert(loss);
        if loss > self.guard.blowup_factor * start {
            self.over += 1;
        } else {
            self.over = 0;
        }
        self.over >= self.guard.patience
    }
}

/// Update rule applied by [`descend`].
#[derive(Debug, Clone)]
pub enum Stepper {
    Sgd { lr: f64 },
    Adam { lr: f64, state: AdamState },
}

impl Stepper {
    pub fn adam(lr: f64, dim: usize) -> Self {
        Stepper::Adam {
            lr,
            state: AdamState::new(dim),
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        match self {
            Stepper::Sgd { lr } => sgd_step(params, grad, *lr),
            Stepper::Adam { lr, state } => adam_step(params, grad, state, *lr),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescentStatus {
    Completed,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct DescentOptions {
    pub max_iters: usize,
    pub guard: DivergenceGuard,
    /// Stop (as completed) once this instant has passed.
    pub deadline: Option<Instant>,
    /// Origin of the timestamps in [`DescentOutcome::times`].
    pub clock_origin: Instant,
}

impl DescentOptions {
    pub fn new(max_iters: usize, guard: DivergenceGuard) -> Self {
        Self {
            max_iters,
            guard,
            deadline: None,
            clock_origin: Instant::now(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub params: Vec<f64>,
    /// Loss of `params`.
    pub loss: f64,
    /// Loss at every visited iterate, starting with the input parameters.
    pub trace: Vec<f64>,
    /// Seconds since the clock origin at which each trace entry was taken.
    pub times: Vec<f64>,
    pub status: DescentStatus,
    /// Lowest-loss iterate seen, with its loss.
    pub best_params: Vec<f64>,
    pub best_loss: f64,
}

/// Guarded full-batch descent.
///
/// On completion the final iterate is returned; when the guard fires (or an
/// evaluation fails) the lowest-loss iterate seen so far is returned instead.
pub fn descend<O: Objective + ?Sized>(
    params: &[f64],
    objective: &O,
    stepper: &mut Stepper,
    opts: &DescentOptions,
) -> Result<DescentOutcome> {
    if opts.max_iters == 0 {
        return Err(Error::Config("descent needs at least one iteration".into()));
    }
    let mut theta = params.to_vec();
    let mut guard = GuardState::new(opts.guard);
    let cap = opts.max_iters.min(1 << 14) + 1;
    let mut trace = Vec::with_capacity(cap);
    let mut times = Vec::with_capacity(cap);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let stamp = || opts.clock_origin.elapsed().as_secs_f64();

    let diverged = |best: Option<(f64, Vec<f64>)>, trace, times| {
        let (loss, params) = best.unwrap_or((f64::INFINITY, params.to_vec()));
        Ok(DescentOutcome {
            best_params: params.clone(),
            best_loss: loss,
            params,
            loss,
            trace,
            times,
            status: DescentStatus::Diverged,
        })
    };

    for _ in 0..opts.max_iters {
        if opts.deadline.is_some_and(|d| Instant::now() >= d) && best.is_some() {
            break;
        }
        let (loss, grad) = match objective.value_and_gradient(&theta) {
            Ok(v) => v,
            Err(e) => {
                log::debug!("descent stopped: {e}");
                return diverged(best, trace, times);
            }
        };
        trace.push(loss);
        times.push(stamp());
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, theta.clone()));
        }
        if guard.observe(loss) {
            return diverged(best, trace, times);
        }
        if stepper.step(&mut theta, &grad).is_err() {
            return diverged(best, trace, times);
        }
    }

    let loss = match objective.value(&theta) {
        Ok(l) => l,
        Err(_) => return diverged(best, trace, times),
    };
    trace.push(loss);
    times.push(stamp());
    if guard.observe(loss) {
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, theta));
        }
        return diverged(best, trace, times);
    }
    let (best_loss, best_params) = match best {
        Some((b, p)) if b <= loss => (b, p),
        _ => (loss, theta.clone()),
    };
    Ok(DescentOutcome {
        params: theta,
        loss,
        trace,
        times,
        status: DescentStatus::Completed,
        best_params,
        best_loss,
    })
}

/// Guarded SGD for `max_iters` iterations.
pub fn run_descent<O: Objective + ?Sized>(
    params: &[f64],
    objective: &O,
    lr: f64,
    max_iters: usize,
    guard: DivergenceGuard,
) -> Result<DescentOutcome> {
    descend(
        params,
        objective,
        &mut Stepper::Sgd { lr },
        &DescentOptions::new(max_iters, guard),
    )
}
