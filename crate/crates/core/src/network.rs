//! Fully connected ELU network mapping coordinates `(x, y, z)` to
//! displacements `(u_x, u_y, u_z)`.
//!
//! Parameters live in a single flat vector in canonical order: layer by
//! layer, weights row-major then biases. The output layer has weights only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Number of spatial inputs.
pub const N_INPUTS: usize = 3;
/// Number of displacement outputs.
pub const N_OUTPUTS: usize = 3;

/// Shape of the network: `n_hidden` layers of `n_neurons` ELU units each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Architecture {
    pub n_hidden: usize,
    pub n_neurons: usize,
    /// ELU coefficient. Always 1 here.
    pub alpha: f64,
}

impl Architecture {
    pub fn new(n_hidden: usize, n_neurons: usize) -> Result<Self> {
        let arch = Self {
            n_hidden,
            n_neurons,
            alpha: 1.0,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_hidden == 0 || self.n_neurons == 0 {
            return Err(Error::Config(format!(
                "architecture needs at least one hidden layer and one neuron, got N_h={} N_nh={}",
                self.n_hidden, self.n_neurons
            )));
        }
        if self.alpha != 1.0 {
            return Err(Error::Config(format!(
                "ELU coefficient must be 1, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// Fan-in of hidden layer `layer` (0-based).
    pub fn layer_inputs(&self, layer: usize) -> usize {
        if layer == 0 {
            N_INPUTS
        } else {
            self.n_neurons
        }
    }

    /// Offset of hidden layer `layer`'s weight block in the flat vector.
    /// The bias block follows immediately after the weights.
    pub fn hidden_offset(&self, layer: usize) -> usize {
        (0..layer)
            .map(|l| self.n_neurons * self.layer_inputs(l) + self.n_neurons)
            .sum()
    }

    pub fn output_offset(&self) -> usize {
        self.hidden_offset(self.n_hidden)
    }

    pub fn param_count(&self) -> usize {
        self.output_offset() + N_OUTPUTS * self.n_neurons
    }
}

/// Learnable parameters of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    arch: Architecture,
    values: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(arch: Architecture) -> Self {
        Self {
            arch,
            values: vec![0.0; arch.param_count()],
        }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row-major `n_neurons x fan_in` weight matrix of hidden layer `layer`.
    pub fn hidden_weights(&self, layer: usize) -> &[f64] {
        let off = self.arch.hidden_offset(layer);
        &self.values[off..off + self.arch.n_neurons * self.arch.layer_inputs(layer)]
    }

    pub fn hidden_weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let off = self.arch.hidden_offset(layer);
        let len = self.arch.n_neurons * self.arch.layer_inputs(layer);
        &mut self.values[off..off + len]
    }

    pub fn hidden_biases(&self, layer: usize) -> &[f64] {
        let off =
            self.arch.hidden_offset(layer) + self.arch.n_neurons * self.arch.layer_inputs(layer);
        &self.values[off..off + self.arch.n_neurons]
    }

    pub fn hidden_biases_mut(&mut self, layer: usize) -> &mut [f64] {
        let off =
            self.arch.hidden_offset(layer) + self.arch.n_neurons * self.arch.layer_inputs(layer);
        let n = self.arch.n_neurons;
        &mut self.values[off..off + n]
    }

    /// Row-major `3 x n_neurons` output matrix.
    pub fn output_weights(&self) -> &[f64] {
        &self.values[self.arch.output_offset()..]
    }

    pub fn output_weights_mut(&mut self) -> &mut [f64] {
        let off = self.arch.output_offset();
        &mut self.values[off..]
    }
}

/// Canonical flat copy of the parameters.
pub fn flatten(params: &NetworkParams) -> Vec<f64> {
    params.values.clone()
}

pub fn unflatten(values: Vec<f64>, arch: Architecture) -> Result<NetworkParams> {
    arch.validate()?;
    if values.len() != arch.param_count() {
        return Err(Error::Dimension {
            expected: arch.param_count(),
            got: values.len(),
        });
    }
    Ok(NetworkParams { arch, values })
}

/// Every weight and bias drawn independently from U[-1, 1].
pub fn init_params(arch: Architecture, seed: u64) -> NetworkParams {
    init_params_bounded(arch, seed, 1.0)
}

/// Every weight and bias drawn independently from U[-bound, bound].
///
/// Training defaults to a bound of 0.1: at U[-1, 1] the loss curvature is
/// far too high for coarse learning rates around 0.6.
pub fn init_params_bounded(arch: Architecture, seed: u64, bound: f64) -> NetworkParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..arch.param_count())
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    NetworkParams { arch, values }
}

#[inline]
pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// First derivative; 1 at the origin.
#[inline]
pub fn elu_d1(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Second derivative; the right limit 0 is used at the origin.
#[inline]
pub fn elu_d2(x: f64) -> f64 {
    if x >= 0.0 {
        0.0
    } else {
        x.exp()
    }
}

/// Third derivative, same convention as [`elu_d2`].
#[inline]
pub fn elu_d3(x: f64) -> f64 {
    elu_d2(x)
}

/// Plain forward pass.
pub fn forward(params: &NetworkParams, point: [f64; 3]) -> [f64; 3] {
    let arch = params.arch;
    let mut act: Vec<f64> = point.to_vec();
    for layer in 0..arch.n_hidden {
        let w = params.hidden_weights(layer);
        let b = params.hidden_biases(layer);
        let fan_in = act.len();
        act = (0..arch.n_neurons)
            .map(|k| {
                let row = &w[k * fan_in..(k + 1) * fan_in];
                let psi = row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>() + b[k];
                elu(psi)
            })
            .collect();
    }
    let wo = params.output_weights();
    let n = arch.n_neurons;
    std::array::from_fn(|k| {
        wo[k * n..(k + 1) * n]
            .iter()
            .zip(&act)
            .map(|(w, a)| w * a)
            .sum()
    })
}
