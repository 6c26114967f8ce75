//! Isotropic linear elasticity: constitutive law, strong-form residuals and
//! the collocation loss.
//!
//! The loss is assembled from three residuals evaluated at collocation
//! points:
//!
//! * equilibrium `r2 = (lambda + G) grad(div u) + G lap(u) - f` at every grid node,
//! * Dirichlet `r5 = u - u0` (prescribed components only) on `x = 0`,
//! * Neumann `r6 = sigma n - t0` on the other five faces,
//!
//! each weighted by itself, so every contribution is a squared norm. With
//! stress normalization on, `r2` and `r6` are divided by `lambda + 2G`.

use crate::error::{Error, Result};
use crate::exec::{ordered_map, ordered_map_range, ExecMode};
use crate::jet::{DisplacementJet, JetAdjoint, JetTape, Objective};
use crate::network::{unflatten, Architecture, NetworkParams};
use crate::sampling::{Face, SampleSet};

pub type Mat3 = [[f64; 3]; 3];

/// Homogeneous isotropic material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub e: f64,
    pub nu: f64,
    pub lambda: f64,
    pub g: f64,
}

impl Material {
    pub fn new(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::Domain(format!(
                "elasticity modulus must be positive, got {e}"
            )));
        }
        let (lambda, g) = lame_constants(e, nu)?;
        Ok(Self { e, nu, lambda, g })
    }

    /// P-wave modulus `lambda + 2G`, the stress normalization divisor.
    pub fn p_modulus(&self) -> f64 {
        self.lambda + 2.0 * self.g
    }
}

impl Default for Material {
    fn default() -> Self {
        Self::new(1.0, 0.3).expect("default material is valid")
    }
}

pub fn lame_constants(e: f64, nu: f64) -> Result<(f64, f64)> {
    if !(nu > 0.0 && nu < 0.5) {
        return Err(Error::Domain(format!(
            "Poisson's ratio must lie in (0, 0.5), got {nu}"
        )));
    }
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let g = e / (2.0 * (1.0 + nu));
    Ok((lambda, g))
}

/// Small-strain tensor `(grad u + grad u^T) / 2`.
pub fn strain_from_grad(grad_u: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (grad_u[i][j] + grad_u[j][i])))
}

/// `sigma = lambda tr(eps) I + 2G eps`.
pub fn stress(eps: &Mat3, mat: &Material) -> Mat3 {
    let tr = eps[0][0] + eps[1][1] + eps[2][2];
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let iso = if i == j { mat.lambda * tr } else { 0.0 };
            iso + 2.0 * mat.g * eps[i][j]
        })
    })
}

pub fn normalize_stress(sigma: &Mat3, mat: &Material) -> Mat3 {
    let d = mat.p_modulus();
    sigma.map(|row| row.map(|s| s / d))
}

/// Cauchy traction `sigma n` on a surface with unit normal `n`.
pub fn traction(sigma: &Mat3, n: [f64; 3]) -> Result<[f64; 3]> {
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("normal {n:?} is not a unit vector")));
    }
    Ok(mat_vec(sigma, n))
}

fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

/// Navier form of `div sigma - f` for constant isotropic stiffness.
pub fn equilibrium_residual(jet: &DisplacementJet, mat: &Material, f: [f64; 3]) -> [f64; 3] {
    let c = &jet.components;
    std::array::from_fn(|k| {
        let grad_div = c[0].hess(k, 0) + c[1].hess(k, 1) + c[2].hess(k, 2);
        (mat.lambda + mat.g) * grad_div + mat.g * c[k].laplacian() - f[k]
    })
}

/// Displacement prescription on the face `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletCondition {
    /// `Some(value)` for constrained components.
    pub prescribed: [Option<f64>; 3],
}

impl DirichletCondition {
    pub fn is_full_vector(&self) -> bool {
        self.prescribed.iter().all(Option::is_some)
    }
}

/// Which benchmark boundary value problem to solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadCase {
    /// `u_x = 0` on `x = 0`, zero-mean `u_y`, `u_z` enforced by penalty.
    #[default]
    A,
    /// Fully clamped `x = 0` face.
    B,
}

/// Boundary value problem on the unit cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub dirichlet: DirichletCondition,
    /// Prescribed traction per face, indexed by [`Face::index`]. The `x = 0`
    /// entry is unused.
    pub neumann_tractions: [[f64; 3]; 6],
    pub body_force: [f64; 3],
    pub uniqueness_penalty: bool,
    pub gamma: f64,
    pub normalize_stress: bool,
}

/// Uniform load on the `x = 1` face of the benchmark.
pub const END_LOAD: [f64; 3] = [-0.1, 0.0, 0.0];

impl ProblemSpec {
    pub fn new(case: LoadCase, gamma: f64, normalize_stress: bool) -> Self {
        let mut neumann_tractions = [[0.0; 3]; 6];
        neumann_tractions[Face::XMax.index()] = END_LOAD;
        let (dirichlet, uniqueness_penalty) = match case {
            LoadCase::A => (
                DirichletCondition {
                    prescribed: [Some(0.0), None, None],
                },
                true,
            ),
            LoadCase::B => (
                DirichletCondition {
                    prescribed: [Some(0.0); 3],
                },
                false,
            ),
        };
        Self {
            dirichlet,
            neumann_tractions,
            body_force: [0.0; 3],
            uniqueness_penalty,
            gamma,
            normalize_stress,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if self.dirichlet.is_full_vector() && self.uniqueness_penalty {
            return Err(Error::Config(
                "uniqueness penalty is redundant with a fully clamped Dirichlet face".into(),
            ));
        }
        Ok(())
    }
}

/// Individual loss terms and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub mse_e: f64,
    pub mse_d: f64,
    pub mse_n: f64,
    pub mse_uq: f64,
    pub mse: f64,
}

/// The collocation loss of a fixed problem, as a function of the flat
/// parameter vector.
#[derive(Debug, Clone)]
pub struct ElasticityLoss {
    pub arch: Architecture,
    pub samples: SampleSet,
    pub problem: ProblemSpec,
    pub material: Material,
    pub exec: ExecMode,
}

fn finite(x: f64, term: &'static str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite { term })
    }
}

impl ElasticityLoss {
    pub fn new(
        arch: Architecture,
        samples: SampleSet,
        problem: ProblemSpec,
        material: Material,
    ) -> Result<Self> {
        arch.validate()?;
        problem.validate()?;
        if samples.interior.is_empty() {
            return Err(Error::Config("empty volume sample set".into()));
        }
        if samples.dirichlet.is_empty() {
            return Err(Error::Config("empty Dirichlet sample set".into()));
        }
        if samples.neumann.is_empty() {
            return Err(Error::Config("empty Neumann sample set".into()));
        }
        Ok(Self {
            arch,
            samples,
            problem,
            material,
            exec: ExecMode::default(),
        })
    }

    pub fn with_exec(mut self, exec: ExecMode) -> Self {
        self.exec = exec;
        self
    }

    pub fn breakdown(&self, params: &NetworkParams) -> Result<LossBreakdown> {
        self.check(params)?;
        let jets = ordered_map(self.exec, &self.samples.interior, |p| {
            JetTape::record(params, p.point).0
        });
        self.assemble(&jets, false).map(|(b, _)| b)
    }

    pub fn breakdown_and_gradient(
        &self,
        params: &NetworkParams,
    ) -> Result<(LossBreakdown, Vec<f64>)> {
        self.check(params)?;
        let taped = ordered_map(self.exec, &self.samples.interior, |p| {
            JetTape::record(params, p.point)
        });
        let jets: Vec<DisplacementJet> = taped.iter().map(|(j, _)| *j).collect();
        let (breakdown, adjoints) = self.assemble(&jets, true)?;
        let per_node = ordered_map_range(self.exec, taped.len(), |node| {
            let adj = &adjoints[node];
            if adj.is_zero() {
                return None;
            }
            let mut g = vec![0.0; self.arch.param_count()];
            taped[node].1.backprop(params, adj, &mut g);
            Some(g)
        });
        let mut grad = vec![0.0; self.arch.param_count()];
        for g in per_node.into_iter().flatten() {
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += gi;
            }
        }
        if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
            log::debug!("non-finite gradient entry {bad}");
            return Err(Error::NonFinite { term: "gradient" });
        }
        Ok((breakdown, grad))
    }

    fn check(&self, params: &NetworkParams) -> Result<()> {
        if params.arch() != &self.arch {
            return Err(Error::Dimension {
                expected: self.arch.param_count(),
                got: params.len(),
            });
        }
        Ok(())
    }

    /// Sums the loss terms in the fixed order volume, Dirichlet, Neumann,
    /// uniqueness, and optionally fills per-node jet adjoints.
    fn assemble(
        &self,
        jets: &[DisplacementJet],
        want_adjoint: bool,
    ) -> Result<(LossBreakdown, Vec<JetAdjoint>)> {
        let mat = &self.material;
        let prob = &self.problem;
        let scale = if prob.normalize_stress {
            1.0 / mat.p_modulus()
        } else {
            1.0
        };
        let mut adj = if want_adjoint {
            vec![JetAdjoint::default(); jets.len()]
        } else {
            Vec::new()
        };
        let mut out = LossBreakdown::default();

        // Equilibrium.
        let total_w = self.samples.total_weight();
        let c_div = scale * (mat.lambda + mat.g);
        let c_lap = scale * mat.g;
        for (node, (pt, jet)) in self.samples.interior.iter().zip(jets).enumerate() {
            let r = equilibrium_residual(jet, mat, prob.body_force).map(|v| v * scale);
            let sq = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
            out.mse_e += pt.weight * sq / total_w;
            if want_adjoint {
                let a = &mut adj[node];
                for k in 0..3 {
                    let rb = 2.0 * pt.weight * r[k] / total_w;
                    for i in 0..3 {
                        *a.hess_mut(i, k, i) += rb * c_div;
                        *a.hess_mut(k, i, i) += rb * c_lap;
                    }
                }
            }
        }
        finite(out.mse_e, "mse_e")?;

        // Dirichlet.
        let nd = self.samples.dirichlet.len() as f64;
        for dp in &self.samples.dirichlet {
            let u = jets[dp.node].value();
            for (c, target) in prob.dirichlet.prescribed.iter().enumerate() {
                if let Some(u0) = target {
                    let r = u[c] - u0;
                    out.mse_d += prob.gamma * r * r / nd;
                    if want_adjoint {
                        *adj[dp.node].value_mut(c) += 2.0 * prob.gamma * r / nd;
                    }
                }
            }
        }
        finite(out.mse_d, "mse_d")?;

        // Neumann.
        let nn = self.samples.neumann.len() as f64;
        for np in &self.samples.neumann {
            let n = np.normal;
            let sigma = stress(&strain_from_grad(&jets[np.node].grad_u()), mat);
            let t = mat_vec(&sigma, n);
            let t0 = prob.neumann_tractions[np.face.index()];
            let r: [f64; 3] = std::array::from_fn(|k| scale * (t[k] - t0[k]));
            out.mse_n += (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]) / nn;
            if want_adjoint {
                let tb = r.map(|v| 2.0 * scale * v / nn);
                let tb_n = tb[0] * n[0] + tb[1] * n[1] + tb[2] * n[2];
                let a = &mut adj[np.node];
                for m in 0..3 {
                    for j in 0..3 {
                        let iso = if m == j { mat.lambda * tb_n } else { 0.0 };
                        *a.grad_mut(m, j) += iso + mat.g * (tb[m] * n[j] + tb[j] * n[m]);
                    }
                }
            }
        }
        finite(out.mse_n, "mse_n")?;

        // Zero-mean transverse displacement.
        if prob.uniqueness_penalty {
            let n = jets.len() as f64;
            let mean_y = jets.iter().map(|j| j.components[1].value).sum::<f64>() / n;
            let mean_z = jets.iter().map(|j| j.components[2].value).sum::<f64>() / n;
            out.mse_uq = mean_y * mean_y + mean_z * mean_z;
            if want_adjoint {
                for a in adj.iter_mut() {
                    *a.value_mut(1) += 2.0 * mean_y / n;
                    *a.value_mut(2) += 2.0 * mean_z / n;
                }
            }
            finite(out.mse_uq, "mse_uq")?;
        }

        out.mse = out.mse_d + out.mse_n + out.mse_e + out.mse_uq;
        finite(out.mse, "mse")?;
        Ok((out, adj))
    }
}

impl Objective for ElasticityLoss {
    fn dim(&self) -> usize {
        self.arch.param_count()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        let p = unflatten(theta.to_vec(), self.arch)?;
        Ok(self.breakdown(&p)?.mse)
    }

    fn value_and_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = unflatten(theta.to_vec(), self.arch)?;
        let (b, g) = self.breakdown_and_gradient(&p)?;
        Ok((b.mse, g))
    }
}

/// Loss terms of `params` on `samples`.
pub fn total_loss(
    params: &NetworkParams,
    arch: &Architecture,
    samples: &SampleSet,
    problem: &ProblemSpec,
    mat: &Material,
) -> Result<LossBreakdown> {
    ElasticityLoss::new(*arch, samples.clone(), *problem, *mat)?.breakdown(params)
}
