//! Modified genetic algorithm over the individual learnable parameters.
//!
//! The population is the parameter vector of a single network; each
//! parameter is an individual encoded as a signed fixed-point chromosome.
//! Parameters are chosen for mutation by tournaments on their importance
//! (absolute loss gradient), and a mutated arrangement is only kept when a
//! short coarse descent from it beats the previous generation.
//!
//! Random draws per iteration, all from the one generator passed in: every
//! tournament in selection order, then for each selected parameter (in
//! selection order) the global, medium and local mutation trials.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::jet::Objective;
use crate::optim::{run_descent, DescentStatus, DivergenceGuard};

/// Magnitude bits per chromosome.
pub const MAGNITUDE_BITS: usize = 25;
/// Exponent of the most significant magnitude bit.
const MSB_EXPONENT: i32 = 3;
/// Value of the least significant bit, `2^-21`.
pub const RESOLUTION: f64 = 1.0 / (1u64 << 21) as f64;
/// Largest encodable magnitude, `16 - 2^-21`.
pub const MAX_MAGNITUDE: f64 = ((1u64 << MAGNITUDE_BITS) - 1) as f64 * RESOLUTION;

/// Gene positions, in the order used by [`Chromosome::flip`]:
/// `0` is the sign, `1 + b` is magnitude bit `b` (bit 0 worth `2^3`).
pub const GENE_COUNT: usize = 1 + MAGNITUDE_BITS;

/// Genes touched by global mutation: the sign and bits worth `2^3 .. 2^-1`.
pub const GLOBAL_GENES: std::ops::Range<usize> = 0..6;
/// Medium mutation: bits worth `2^-2 .. 2^-9`.
pub const MEDIUM_GENES: std::ops::Range<usize> = 6..14;
/// Local mutation: bits worth `2^-10 .. 2^-21`.
pub const LOCAL_GENES: std::ops::Range<usize> = 14..26;

/// Sign gene plus fixed-point magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Chromosome {
    pub negative: bool,
    /// Magnitude in units of [`RESOLUTION`]; bit `MAGNITUDE_BITS - 1 - b`
    /// of this integer is magnitude bit `b`.
    pub magnitude: u32,
}

impl Chromosome {
    /// Weight of magnitude bit `b` (0-based, most significant first).
    pub fn bit_weight(b: usize) -> f64 {
        2f64.powi(MSB_EXPONENT - b as i32)
    }

    pub fn bit(&self, b: usize) -> bool {
        (self.magnitude >> (MAGNITUDE_BITS - 1 - b)) & 1 == 1
    }

    /// Flips gene `gene` (see [`GENE_COUNT`]).
    pub fn flip(&mut self, gene: usize) {
        assert!(gene < GENE_COUNT, "gene index {gene} out of range");
        if gene == 0 {
            self.negative = !self.negative;
        } else {
            self.magnitude ^= 1 << (MAGNITUDE_BITS - gene);
        }
    }

    /// Number of differing genes.
    pub fn distance(&self, other: &Chromosome) -> u32 {
        (self.negative != other.negative) as u32 + (self.magnitude ^ other.magnitude).count_ones()
    }
}

/// Round-to-nearest fixed-point encoding, saturating at [`MAX_MAGNITUDE`].
pub fn encode(value: f64) -> Chromosome {
    let negative = value.is_sign_negative() && value != 0.0;
    let mag = value.abs();
    let units = if mag.is_nan() {
        0.0
    } else {
        (mag / RESOLUTION)
            .round()
            .min(((1u64 << MAGNITUDE_BITS) - 1) as f64)
    };
    Chromosome {
        negative,
        magnitude: units as u32,
    }
}

pub fn decode(ch: &Chromosome) -> f64 {
    let mag = ch.magnitude as f64 * RESOLUTION;
    if ch.negative {
        -mag
    } else {
        mag
    }
}

/// Absolute value of the loss gradient, per parameter.
pub fn importance(grad: &[f64]) -> Vec<f64> {
    grad.iter().map(|g| g.abs()).collect()
}

/// Times a parameter may be picked before the history is cleared.
pub const PICK_LIMIT: u32 = 2;

/// Selection history shared across iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionState {
    pub pick_counts: Vec<u32>,
    /// Number of history clears so far.
    pub clears: u64,
}

impl SelectionState {
    pub fn new(n: usize) -> Self {
        Self {
            pick_counts: vec![0; n],
            clears: 0,
        }
    }

    fn clear(&mut self) {
        self.pick_counts.iter_mut().for_each(|c| *c = 0);
        self.clears += 1;
    }
}

/// Picks `count` distinct parameters by repeated tournaments.
///
/// A parameter is eligible while it has been picked fewer than
/// [`PICK_LIMIT`] times since the last clear and has not already been picked
/// in this call. When no parameter is eligible the history is cleared.
pub fn tournament_select<R: Rng + ?Sized>(
    importance: &[f64],
    count: usize,
    tournament_size: usize,
    state: &mut SelectionState,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = importance.len();
    if count < 1 {
        return Err(Error::Config("selection count must be at least 1".into()));
    }
    if count > n {
        return Err(Error::Config(format!(
            "cannot select {count} of {n} parameters"
        )));
    }
    if tournament_size < 2 {
        return Err(Error::Config("tournament size must be at least 2".into()));
    }
    if state.pick_counts.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: state.pick_counts.len(),
        });
    }
    let mut this_round = vec![false; n];
    let mut picked = Vec::with_capacity(count);
    while picked.len() < count {
        let mut eligible: Vec<usize> = (0..n)
            .filter(|&i| !this_round[i] && state.pick_counts[i] < PICK_LIMIT)
            .collect();
        if eligible.is_empty() {
            state.clear();
            eligible = (0..n).filter(|&i| !this_round[i]).collect();
        }
        let k = tournament_size.min(eligible.len());
        let winner = sample(rng, eligible.len(), k)
            .into_iter()
            .map(|j| eligible[j])
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if importance[b] > importance[i] => Some(b),
                Some(b) if importance[b] == importance[i] && b < i => Some(b),
                _ => Some(i),
            })
            .expect("tournament has at least one entrant");
        this_round[winner] = true;
        state.pick_counts[winner] += 1;
        picked.push(winner);
    }
    Ok(picked)
}

/// Probabilities of the three mutation scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationConfig {
    pub m_g: f64,
    pub m_m: f64,
    pub m_l: f64,
}

/// Three independent trials; each that fires flips one gene drawn uniformly
/// from its group.
pub fn mutate<R: Rng + ?Sized>(ch: &Chromosome, cfg: &MutationConfig, rng: &mut R) -> Chromosome {
    let mut out = *ch;
    for (p, genes) in [
        (cfg.m_g, GLOBAL_GENES),
        (cfg.m_m, MEDIUM_GENES),
        (cfg.m_l, LOCAL_GENES),
    ] {
        if rng.gen::<f64>() < p {
            out.flip(rng.gen_range(genes));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgaConfig {
    /// Surviving population fraction `P_sf`.
    pub p_sf: f64,
    /// `N_GAi`.
    pub n_gai: usize,
    pub mutation: MutationConfig,
    pub tournament_size: usize,
    pub csgd_iters: usize,
    /// Coarse learning rate `lr_c`.
    pub lr_c: f64,
    pub guard: DivergenceGuard,
}

impl Default for MgaConfig {
    fn default() -> Self {
        Self {
            p_sf: 0.97,
            n_gai: 30,
            mutation: MutationConfig {
                m_g: 0.3,
                m_m: 0.3,
                m_l: 0.3,
            },
            tournament_size: 3,
            csgd_iters: 200,
            lr_c: 0.6,
            guard: DivergenceGuard::default(),
        }
    }
}

impl MgaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_sf > 0.0 && self.p_sf < 1.0) {
            return Err(Error::Config(format!(
                "P_sf must lie in (0, 1), got {}",
                self.p_sf
            )));
        }
        let m = self.mutation;
        for (name, p) in [("M_g", m.m_g), ("M_m", m.m_m), ("M_l", m.m_l)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.tournament_size < 2 {
            return Err(Error::Config("tournament size must be at least 2".into()));
        }
        if self.csgd_iters < 1 {
            return Err(Error::Config(
                "coarse descent needs at least one iteration".into(),
            ));
        }
        if !(self.lr_c > 0.0) {
            return Err(Error::Config(format!(
                "lr_c must be positive, got {}",
                self.lr_c
            )));
        }
        Ok(())
    }

    /// Parameters replaced per iteration.
    pub fn selected_count(&self, param_count: usize) -> usize {
        (((1.0 - self.p_sf) * param_count as f64).round() as usize).clamp(1, param_count.max(1))
    }
}

#[derive(Debug, Clone)]
pub struct Qualification {
    pub accepted: bool,
    /// Coarse-descended parameters (meaningful when accepted).
    pub params: Vec<f64>,
    /// `MSE_c` of the candidate; infinite when its descent diverged.
    pub msec: f64,
    pub status: DescentStatus,
}

/// Coarse descent from `candidate`; accepted iff it ends strictly below
/// `prev_msec` without diverging.
pub fn qualify<O: Objective + ?Sized>(
    candidate: &[f64],
    prev_msec: f64,
    objective: &O,
    cfg: &MgaConfig,
) -> Result<Qualification> {
    if prev_msec.is_nan() {
        return Err(Error::Domain("previous MSE_c is NaN".into()));
    }
    let out = run_descent(candidate, objective, cfg.lr_c, cfg.csgd_iters, cfg.guard)?;
    let msec = match out.status {
        DescentStatus::Completed => out.loss,
        DescentStatus::Diverged => f64::INFINITY,
    };
    Ok(Qualification {
        accepted: out.status == DescentStatus::Completed && msec < prev_msec,
        params: out.params,
        msec,
        status: out.status,
    })
}

/// Result of one MGA iteration.
#[derive(Debug, Clone)]
pub struct IterationOutcome {
    pub generation: Vec<f64>,
    pub msec: f64,
    pub accepted: bool,
    /// `MSE_c` of this iteration's candidate.
    pub candidate_msec: f64,
    pub selected: Vec<usize>,
}

/// Mutates the selected parameters of `generation` in place of a copy.
/// Unselected entries are left bitwise unchanged.
pub fn make_offspring<R: Rng + ?Sized>(
    generation: &[f64],
    selected: &[usize],
    mutation: &MutationConfig,
    rng: &mut R,
) -> Vec<f64> {
    let mut candidate = generation.to_vec();
    for &i in selected {
        candidate[i] = decode(&mutate(&encode(generation[i]), mutation, rng));
    }
    candidate
}

pub fn mga_iteration<O: Objective + ?Sized, R: Rng + ?Sized>(
    generation: &[f64],
    msec: f64,
    selection: &mut SelectionState,
    objective: &O,
    cfg: &MgaConfig,
    rng: &mut R,
) -> Result<IterationOutcome> {
    let (_, grad) = objective.value_and_gradient(generation)?;
    let imp = importance(&grad);
    let count = cfg.selected_count(generation.len());
    let selected = tournament_select(&imp, count, cfg.tournament_size, selection, rng)?;
    let candidate = make_offspring(generation, &selected, &cfg.mutation, rng);
    let q = qualify(&candidate, msec, objective, cfg)?;
    Ok(if q.accepted {
        IterationOutcome {
            generation: q.params,
            msec: q.msec,
            accepted: true,
            candidate_msec: q.msec,
            selected,
        }
    } else {
        IterationOutcome {
            generation: generation.to_vec(),
            msec,
            accepted: false,
            candidate_msec: q.msec,
            selected,
        }
    })
}
