//! Structured collocation grids on the unit cube.

use crate::error::{Error, Result};

/// Faces of the unit cube, in the priority order used to assign edge and
/// corner points to a single face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::XMin,
        Face::XMax,
        Face::YMin,
        Face::YMax,
        Face::ZMin,
        Face::ZMax,
    ];

    pub fn outward_normal(self) -> [f64; 3] {
        match self {
            Face::XMin => [-1.0, 0.0, 0.0],
            Face::XMax => [1.0, 0.0, 0.0],
            Face::YMin => [0.0, -1.0, 0.0],
            Face::YMax => [0.0, 1.0, 0.0],
            Face::ZMin => [0.0, 0.0, -1.0],
            Face::ZMax => [0.0, 0.0, 1.0],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn contains(self, idx: [usize; 3], n: [usize; 3]) -> bool {
        match self {
            Face::XMin => idx[0] == 0,
            Face::XMax => idx[0] == n[0] - 1,
            Face::YMin => idx[1] == 0,
            Face::YMax => idx[1] == n[1] - 1,
            Face::ZMin => idx[2] == 0,
            Face::ZMax => idx[2] == n[2] - 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Extra loss weight on boundary points (`beta_i`).
    pub beta: f64,
}

impl GridSpec {
    pub fn uniform(n: usize) -> Self {
        Self {
            nx: n,
            ny: n,
            nz: n,
            beta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 || self.nz < 2 {
            return Err(Error::Config(format!(
                "grid needs at least 2 points per axis, got ({}, {}, {})",
                self.nx, self.ny, self.nz
            )));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!(
                "beta_i must be >= 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// `N_Vu`: points of the plain uniform grid.
    pub fn volume_count(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// `N_bu`: points of the plain grid lying on the boundary.
    pub fn boundary_count(&self) -> usize {
        self.volume_count() - (self.nx - 2) * (self.ny - 2) * (self.nz - 2)
    }
}

/// A grid node used in the volume (equilibrium) term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorPoint {
    pub point: [f64; 3],
    /// `1 + beta_i` on boundary nodes, 1 inside.
    pub weight: f64,
    pub on_boundary: bool,
}

/// A node on the Dirichlet face `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletPoint {
    /// Index into [`SampleSet::interior`].
    pub node: usize,
    pub point: [f64; 3],
}

/// A node on one of the five traction faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannPoint {
    pub node: usize,
    pub point: [f64; 3],
    pub face: Face,
    pub normal: [f64; 3],
}

/// Collocation points: every grid node is a volume point; boundary nodes are
/// additionally listed once in either the Dirichlet or the Neumann set.
/// Prescribed boundary values live in the problem definition, keyed by face.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub interior: Vec<InteriorPoint>,
    pub dirichlet: Vec<DirichletPoint>,
    pub neumann: Vec<NeumannPoint>,
}

impl SampleSet {
    pub fn total_weight(&self) -> f64 {
        self.interior.iter().map(|p| p.weight).sum()
    }

    /// Weighted share of boundary nodes in the volume set.
    pub fn realized_boundary_ratio(&self) -> f64 {
        let boundary: f64 = self
            .interior
            .iter()
            .filter(|p| p.on_boundary)
            .map(|p| p.weight)
            .sum();
        boundary / self.total_weight()
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.interior.iter().map(|p| p.point)
    }
}

/// Uniform tensor grid with nodes at `i / (n - 1)` along each axis, ordered
/// with `x` slowest and `z` fastest.
pub fn generate_grid(spec: &GridSpec) -> Result<SampleSet> {
    spec.validate()?;
    let n = [spec.nx, spec.ny, spec.nz];
    let coord = |i: usize, len: usize| i as f64 / (len - 1) as f64;
    let mut set = SampleSet {
        interior: Vec::with_capacity(spec.volume_count()),
        dirichlet: Vec::new(),
        neumann: Vec::new(),
    };
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let idx = [i, j, k];
                let point = [coord(i, n[0]), coord(j, n[1]), coord(k, n[2])];
                let node = set.interior.len();
                let face = Face::ALL.into_iter().find(|f| f.contains(idx, n));
                set.interior.push(InteriorPoint {
                    point,
                    weight: if face.is_some() { 1.0 + spec.beta } else { 1.0 },
                    on_boundary: face.is_some(),
                });
                match face {
                    Some(Face::XMin) => set.dirichlet.push(DirichletPoint { node, point }),
                    Some(face) => set.neumann.push(NeumannPoint {
                        node,
                        point,
                        face,
                        normal: face.outward_normal(),
                    }),
                    None => {}
                }
            }
        }
    }
    Ok(set)
}

/// `N_b / N_V = (N_bu + beta N_bu) / (N_Vu + beta N_bu)`.
pub fn boundary_ratio(spec: &GridSpec) -> f64 {
    let nb = spec.boundary_count() as f64;
    let nv = spec.volume_count() as f64;
    (nb + spec.beta * nb) / (nv + spec.beta * nb)
}
