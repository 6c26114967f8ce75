//! Exact second-order spatial jets through the network, and exact parameter
//! gradients of losses built from them.
//!
//! The forward pass carries, for every neuron, a 10-channel jet: the value,
//! three first derivatives and six unique second derivatives with respect to
//! `(x, y, z)`. Linear layers act on all channels alike (biases only touch
//! the value channel); the ELU acts through the second-order chain rule. The
//! reverse pass is the hand-derived adjoint of that forward pass, which needs
//! ELU derivatives up to third order.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::network::{elu, elu_d1, elu_d2, elu_d3, Architecture, NetworkParams, N_OUTPUTS};

/// Number of jet channels: value, gradient (3), unique Hessian entries (6).
pub const CHANNELS: usize = 10;

/// Storage slot of Hessian entry `(i, j)` among the six unique entries,
/// ordered `xx, xy, xz, yy, yz, zz`.
#[inline]
pub const fn sym_index(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    match (a, b) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

/// Index pairs of the six unique Hessian slots.
pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Value, spatial gradient and spatial Hessian of a scalar field at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SecondOrderJet {
    pub value: f64,
    pub grad: [f64; 3],
    hess: [f64; 6],
}

impl SecondOrderJet {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            ..Self::default()
        }
    }

    /// The coordinate function `x_axis` evaluated at `point`.
    pub fn coordinate(point: [f64; 3], axis: usize) -> Self {
        let mut grad = [0.0; 3];
        grad[axis] = 1.0;
        Self {
            value: point[axis],
            grad,
            hess: [0.0; 6],
        }
    }

    pub fn from_parts(value: f64, grad: [f64; 3], hess: [[f64; 3]; 3]) -> Self {
        Self {
            value,
            grad,
            hess: SYM_PAIRS.map(|(i, j)| 0.5 * (hess[i][j] + hess[j][i])),
        }
    }

    fn from_channels(c: &[f64; CHANNELS]) -> Self {
        Self {
            value: c[0],
            grad: [c[1], c[2], c[3]],
            hess: [c[4], c[5], c[6], c[7], c[8], c[9]],
        }
    }

    #[inline]
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[sym_index(i, j)]
    }

    pub fn hess_matrix(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.hess(i, j)))
    }

    pub fn laplacian(&self) -> f64 {
        self.hess[0] + self.hess[3] + self.hess[5]
    }

    /// `f(self)` given `f, f', f''` at `self.value`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let g = self.grad;
        Self {
            value: f0,
            grad: g.map(|gi| f1 * gi),
            hess: std::array::from_fn(|s| {
                let (i, j) = SYM_PAIRS[s];
                f2 * g[i] * g[j] + f1 * self.hess[s]
            }),
        }
    }

    pub fn elu(&self) -> Self {
        let x = self.value;
        self.chain(elu(x), elu_d1(x), elu_d2(x))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            value: c * self.value,
            grad: self.grad.map(|g| c * g),
            hess: self.hess.map(|h| c * h),
        }
    }
}

impl Add for SecondOrderJet {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            value: self.value + rhs.value,
            grad: std::array::from_fn(|i| self.grad[i] + rhs.grad[i]),
            hess: std::array::from_fn(|s| self.hess[s] + rhs.hess[s]),
        }
    }
}

impl Sub for SecondOrderJet {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for SecondOrderJet {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for SecondOrderJet {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (a, b) = (self, rhs);
        Self {
            value: a.value * b.value,
            grad: std::array::from_fn(|i| a.grad[i] * b.value + a.value * b.grad[i]),
            hess: std::array::from_fn(|s| {
                let (i, j) = SYM_PAIRS[s];
                a.hess[s] * b.value
                    + a.grad[i] * b.grad[j]
                    + a.grad[j] * b.grad[i]
                    + a.value * b.hess[s]
            }),
        }
    }
}

/// Jets of the three displacement components at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisplacementJet {
    pub components: [SecondOrderJet; 3],
}

impl DisplacementJet {
    pub fn value(&self) -> [f64; 3] {
        self.components.map(|c| c.value)
    }

    /// `grad_u[k][i] = d u_k / d x_i`.
    pub fn grad_u(&self) -> [[f64; 3]; 3] {
        self.components.map(|c| c.grad)
    }

    /// Jet of an analytic field given as component jets.
    pub fn from_components(components: [SecondOrderJet; 3]) -> Self {
        Self { components }
    }
}

/// Adjoint of a [`DisplacementJet`]: sensitivity of a scalar to each of the
/// 30 stored channels (value, gradient, six unique Hessian slots per
/// component).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JetAdjoint {
    pub channels: [[f64; CHANNELS]; N_OUTPUTS],
}

impl JetAdjoint {
    pub fn value_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.channels[k][0]
    }

    pub fn grad_mut(&mut self, k: usize, i: usize) -> &mut f64 {
        &mut self.channels[k][1 + i]
    }

    /// Slot for the Hessian entry `(i, j)` of component `k`; both orderings
    /// address the same slot.
    pub fn hess_mut(&mut self, k: usize, i: usize, j: usize) -> &mut f64 {
        &mut self.channels[k][4 + sym_index(i, j)]
    }

    pub fn is_zero(&self) -> bool {
        self.channels.iter().flatten().all(|&c| c == 0.0)
    }
}

/// Intermediate jets of one forward pass, kept for the reverse sweep.
#[derive(Debug, Clone)]
pub struct JetTape {
    input: [[f64; CHANNELS]; 3],
    /// Per hidden layer: pre-activation jets.
    pre: Vec<Vec<[f64; CHANNELS]>>,
    /// Per hidden layer: activation jets.
    post: Vec<Vec<[f64; CHANNELS]>>,
}

fn check_arch(params: &NetworkParams, arch: &Architecture) -> Result<()> {
    if params.arch() != arch || params.len() != arch.param_count() {
        return Err(Error::Dimension {
            expected: arch.param_count(),
            got: params.len(),
        });
    }
    Ok(())
}

/// `out[k] = sum_j w[k, j] * inp[j]` on every channel.
fn linear_channels(w: &[f64], inp: &[[f64; CHANNELS]], n_out: usize) -> Vec<[f64; CHANNELS]> {
    let fan_in = inp.len();
    (0..n_out)
        .map(|k| {
            let row = &w[k * fan_in..(k + 1) * fan_in];
            let mut acc = [0.0; CHANNELS];
            for (wkj, a) in row.iter().zip(inp) {
                for c in 0..CHANNELS {
                    acc[c] += wkj * a[c];
                }
            }
            acc
        })
        .collect()
}

fn elu_channels(psi: &[f64; CHANNELS]) -> [f64; CHANNELS] {
    let x = psi[0];
    let (e0, e1, e2) = (elu(x), elu_d1(x), elu_d2(x));
    let mut out = [0.0; CHANNELS];
    out[0] = e0;
    for d in 0..3 {
        out[1 + d] = e1 * psi[1 + d];
    }
    for (s, &(i, j)) in SYM_PAIRS.iter().enumerate() {
        out[4 + s] = e2 * psi[1 + i] * psi[1 + j] + e1 * psi[4 + s];
    }
    out
}

/// Adjoint of [`elu_channels`]: maps the activation adjoint back onto the
/// pre-activation channels.
fn elu_channels_adjoint(psi: &[f64; CHANNELS], bar: &[f64; CHANNELS]) -> [f64; CHANNELS] {
    let x = psi[0];
    let (e1, e2, e3) = (elu_d1(x), elu_d2(x), elu_d3(x));
    let g = [psi[1], psi[2], psi[3]];
    // Symmetric matrix A with sum_s bar_h[s] g_i g_j = g^T A g.
    let mut a = [[0.0; 3]; 3];
    for (s, &(i, j)) in SYM_PAIRS.iter().enumerate() {
        if i == j {
            a[i][i] = bar[4 + s];
        } else {
            a[i][j] = 0.5 * bar[4 + s];
            a[j][i] = 0.5 * bar[4 + s];
        }
    }
    let ag: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| a[i][j] * g[j]).sum());
    let gag: f64 = (0..3).map(|i| g[i] * ag[i]).sum();

    let mut out = [0.0; CHANNELS];
    let mut dot_g = 0.0;
    for d in 0..3 {
        dot_g += bar[1 + d] * g[d];
        out[1 + d] = e1 * bar[1 + d] + 2.0 * e2 * ag[d];
    }
    let mut dot_h = 0.0;
    for s in 0..6 {
        dot_h += bar[4 + s] * psi[4 + s];
        out[4 + s] = e1 * bar[4 + s];
    }
    out[0] = e1 * bar[0] + e2 * (dot_g + dot_h) + e3 * gag;
    out
}

impl JetTape {
    /// Forward pass at `point`, keeping every intermediate jet.
    pub fn record(params: &NetworkParams, point: [f64; 3]) -> (DisplacementJet, Self) {
        let arch = *params.arch();
        let input: [[f64; CHANNELS]; 3] = std::array::from_fn(|i| {
            let mut c = [0.0; CHANNELS];
            c[0] = point[i];
            c[1 + i] = 1.0;
            c
        });
        let mut pre = Vec::with_capacity(arch.n_hidden);
        let mut post: Vec<Vec<[f64; CHANNELS]>> = Vec::with_capacity(arch.n_hidden);
        for layer in 0..arch.n_hidden {
            let inp: &[[f64; CHANNELS]] = if layer == 0 { &input } else { &post[layer - 1] };
            let mut psi = linear_channels(params.hidden_weights(layer), inp, arch.n_neurons);
            for (p, b) in psi.iter_mut().zip(params.hidden_biases(layer)) {
                p[0] += b;
            }
            let act = psi.iter().map(elu_channels).collect();
            pre.push(psi);
            post.push(act);
        }
        let last: &[[f64; CHANNELS]] = post.last().map(|v| v.as_slice()).unwrap_or(&input);
        let out = linear_channels(params.output_weights(), last, N_OUTPUTS);
        let jet = DisplacementJet {
            components: std::array::from_fn(|k| SecondOrderJet::from_channels(&out[k])),
        };
        (jet, Self { input, pre, post })
    }

    /// Accumulates `d(scalar)/d(theta)` into `grad` given the scalar's
    /// adjoint with respect to the output jet.
    pub fn backprop(&self, params: &NetworkParams, adjoint: &JetAdjoint, grad: &mut [f64]) {
        let arch = *params.arch();
        debug_assert_eq!(grad.len(), arch.param_count());
        let n = arch.n_neurons;
        let n_hidden = arch.n_hidden;

        // Output layer.
        let last = &self.post[n_hidden - 1];
        let wo = params.output_weights();
        let off = arch.output_offset();
        let mut bar_act = vec![[0.0; CHANNELS]; n];
        for k in 0..N_OUTPUTS {
            let ub = &adjoint.channels[k];
            for j in 0..n {
                let a = &last[j];
                let mut s = 0.0;
                for c in 0..CHANNELS {
                    s += ub[c] * a[c];
                    bar_act[j][c] += wo[k * n + j] * ub[c];
                }
                grad[off + k * n + j] += s;
            }
        }

        for layer in (0..n_hidden).rev() {
            let bar_pre: Vec<[f64; CHANNELS]> = self.pre[layer]
                .iter()
                .zip(&bar_act)
                .map(|(psi, bar)| elu_channels_adjoint(psi, bar))
                .collect();
            let inp: &[[f64; CHANNELS]] = if layer == 0 {
                &self.input
            } else {
                &self.post[layer - 1]
            };
            let fan_in = inp.len();
            let w = params.hidden_weights(layer);
            let woff = arch.hidden_offset(layer);
            let boff = woff + n * fan_in;
            let mut next_bar = vec![[0.0; CHANNELS]; if layer == 0 { 0 } else { fan_in }];
            for k in 0..n {
                let pb = &bar_pre[k];
                grad[boff + k] += pb[0];
                for j in 0..fan_in {
                    let a = &inp[j];
                    let mut s = 0.0;
                    for c in 0..CHANNELS {
                        s += pb[c] * a[c];
                    }
                    grad[woff + k * fan_in + j] += s;
                    if layer > 0 {
                        let wkj = w[k * fan_in + j];
                        for c in 0..CHANNELS {
                            next_bar[j][c] += wkj * pb[c];
                        }
                    }
                }
            }
            bar_act = next_bar;
        }
    }
}

/// Displacement jet of the network at `point`.
pub fn jet_evaluate(
    params: &NetworkParams,
    arch: &Architecture,
    point: [f64; 3],
) -> Result<DisplacementJet> {
    check_arch(params, arch)?;
    if point.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite evaluation point {point:?}"
        )));
    }
    Ok(JetTape::record(params, point).0)
}

/// A scalar objective over a flat parameter vector.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn value(&self, theta: &[f64]) -> Result<f64>;

    /// Exact value and gradient.
    fn value_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// Exact gradient of `loss` at `theta`.
pub fn loss_gradient<O: Objective + ?Sized>(theta: &[f64], loss: &O) -> Result<Vec<f64>> {
    check_len(theta, loss)?;
    loss.value_and_gradient(theta).map(|(_, g)| g)
}

/// Central finite differences. Test oracle only.
pub fn fd_gradient<O: Objective + ?Sized>(theta: &[f64], loss: &O, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    check_len(theta, loss)?;
    let mut probe = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            probe[i] = theta[i] + step;
            let up = loss.value(&probe)?;
            probe[i] = theta[i] - step;
            let down = loss.value(&probe)?;
            probe[i] = theta[i];
            Ok((up - down) / (2.0 * step))
        })
        .collect()
}

fn check_len<O: Objective + ?Sized>(theta: &[f64], loss: &O) -> Result<()> {
    if theta.len() != loss.dim() {
        return Err(Error::Dimension {
            expected: loss.dim(),
            got: theta.len(),
        });
    }
    Ok(())
}

/// Wraps a pair of closures as an [`Objective`].
pub struct FnObjective<F, G> {
    pub dim: usize,
    pub value: F,
    pub gradient: G,
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        let v = (self.value)(theta);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { term: "objective" })
        }
    }

    fn value_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(theta)?, (self.gradient)(theta)))
    }
}
