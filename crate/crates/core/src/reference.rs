//! Closed-form uniaxial solution of the end-loaded cube and the pointwise
//! displacement error metric.

use crate::elasticity::Material;
use crate::error::{Error, Result};
use crate::jet::{DisplacementJet, SecondOrderJet};
use crate::network::{Architecture, NetworkParams};

/// Uniaxial stress state `sigma = diag(p, 0, 0)`, pinned by `u_x(0) = 0` and
/// zero transverse displacement on the centre line `y = y_c, z = z_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticUniaxial {
    pub material: Material,
    pub p: f64,
    pub centroid: [f64; 2],
}

pub fn analytic_uniaxial(mat: Material, p: f64) -> AnalyticUniaxial {
    AnalyticUniaxial {
        material: mat,
        p,
        centroid: [0.5, 0.5],
    }
}

impl AnalyticUniaxial {
    /// Axial strain `p / E`.
    pub fn axial_strain(&self) -> f64 {
        self.p / self.material.e
    }

    pub fn displacement(&self, x: [f64; 3]) -> [f64; 3] {
        let ex = self.axial_strain();
        let et = -self.material.nu * ex;
        [
            ex * x[0],
            et * (x[1] - self.centroid[0]),
            et * (x[2] - self.centroid[1]),
        ]
    }

    pub fn jet(&self, x: [f64; 3]) -> DisplacementJet {
        let ex = self.axial_strain();
        let et = -self.material.nu * ex;
        let c = |i| SecondOrderJet::coordinate(x, i);
        DisplacementJet::from_components([
            c(0).scale(ex),
            (c(1) - SecondOrderJet::constant(self.centroid[0])).scale(et),
            (c(2) - SecondOrderJet::constant(self.centroid[1])).scale(et),
        ])
    }

    /// Network parameters reproducing this field exactly on the unit cube.
    ///
    /// The first hidden layer copies `x, y, z` (non-negative on the cube, so
    /// the ELU acts as the identity) and one neuron carries the constant 1;
    /// deeper layers pass those four neurons through unchanged.
    pub fn network_params(&self, arch: Architecture) -> Result<NetworkParams> {
        if arch.n_neurons < 4 {
            return Err(Error::Config(format!(
                "exact realization needs at least 4 neurons per layer, got {}",
                arch.n_neurons
            )));
        }
        let n = arch.n_neurons;
        let mut params = NetworkParams::zeros(arch);
        {
            let w = params.hidden_weights_mut(0);
            for i in 0..3 {
                w[i * 3 + i] = 1.0;
            }
        }
        params.hidden_biases_mut(0)[3] = 1.0;
        for layer in 1..arch.n_hidden {
            let w = params.hidden_weights_mut(layer);
            for i in 0..4 {
                w[i * n + i] = 1.0;
            }
        }
        let ex = self.axial_strain();
        let et = -self.material.nu * ex;
        let wo = params.output_weights_mut();
        wo[0] = ex;
        wo[n + 1] = et;
        wo[n + 3] = -et * self.centroid[0];
        wo[2 * n + 2] = et;
        wo[2 * n + 3] = -et * self.centroid[1];
        Ok(params)
    }
}

/// `(1/n) sum |u - u_ref|^2` over `points`.
pub fn mse_u<F, G>(predicted: F, reference: G, points: &[[f64; 3]]) -> Result<f64>
where
    F: Fn([f64; 3]) -> [f64; 3],
    G: Fn([f64; 3]) -> [f64; 3],
{
    if points.is_empty() {
        return Err(Error::Config(
            "displacement error needs at least one point".into(),
        ));
    }
    let sum: f64 = points
        .iter()
        .map(|&x| {
            let (u, r) = (predicted(x), reference(x));
            (0..3).map(|k| (u[k] - r[k]) * (u[k] - r[k])).sum::<f64>()
        })
        .sum();
    Ok(sum / points.len() as f64)
}

/// Nodes of the uniform `n^3` grid on the unit cube, `x` slowest.
pub fn cube_grid(n: usize) -> Vec<[f64; 3]> {
    let c = |i: usize| {
        if n > 1 {
            i as f64 / (n - 1) as f64
        } else {
            0.0
        }
    };
    let mut pts = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                pts.push([c(i), c(j), c(k)]);
            }
        }
    }
    pts
}
