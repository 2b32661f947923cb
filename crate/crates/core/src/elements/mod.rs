//! Inf-sup stable velocity–pressure pairs with homogeneous velocity traces.

pub mod basis;
mod fields;
mod matrices;
mod projector;

pub use fields::{FnField, VectorField};
pub use matrices::ConstrainedSolver;
pub(crate) use matrices::per_cell;
pub use projector::{CellField, CellScalar, ProjectorPair, StabilityReport};

use std::sync::Arc;

use basis::{gn_candidates, scalar_basis, ScalarSpace};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dense_solve, Mat3, Vec3, ZERO3, ZERO33};
use crate::mesh::{local_edges, Triangulation};
use crate::quadrature::{gauss_legendre, SimplexRule};

/// Marks a velocity degree of freedom removed by the zero boundary condition.
pub const CONSTRAINED: usize = usize::MAX;
/// Upper bound on the number of local velocity basis functions.
pub const MAX_LOCAL: usize = 32;
/// Points per direction of the graded rule used with rational bubbles.
const GN_RULE_POINTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    /// P1 + element bubble / continuous P1.
    Mini,
    /// P2 / piecewise constants.
    P2P0,
    /// P2 + element bubble / discontinuous P1.
    CrouzeixRaviartConforming,
    /// P2 / continuous P1. Stability is assumed, not established here.
    TaylorHood,
    /// P1 + curls of cubic and rational bubbles / piecewise constants.
    GuzmanNeilan,
}

impl PairKind {
    pub const ALL: [PairKind; 5] = [
        PairKind::Mini,
        PairKind::P2P0,
        PairKind::CrouzeixRaviartConforming,
        PairKind::TaylorHood,
        PairKind::GuzmanNeilan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PairKind::Mini => "mini",
            PairKind::P2P0 => "p2-p0",
            PairKind::CrouzeixRaviartConforming => "crouzeix-raviart-conforming",
            PairKind::TaylorHood => "taylor-hood",
            PairKind::GuzmanNeilan => "guzman-neilan",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "taylor-hood-1" => Ok(PairKind::TaylorHood),
            _ => Self::ALL
                .into_iter()
                .find(|k| k.name() == name)
                .ok_or_else(|| Error::invalid(format!("unknown pair `{name}`"))),
        }
    }

    /// `div V ⊂ Q` holds exactly.
    pub fn divergence_free(self) -> bool {
        self == PairKind::GuzmanNeilan
    }

    pub fn supported(self, dim: usize) -> bool {
        match dim {
            2 => true,
            3 => matches!(self, PairKind::Mini | PairKind::TaylorHood),
            _ => false,
        }
    }

    /// Stability of the pair is not covered by the verified constructions.
    pub fn unverified(self) -> bool {
        self == PairKind::TaylorHood
    }

    fn scalar_space(self) -> Option<ScalarSpace> {
        match self {
            PairKind::Mini => Some(ScalarSpace::P1Bubble),
            PairKind::P2P0 | PairKind::TaylorHood => Some(ScalarSpace::P2),
            PairKind::CrouzeixRaviartConforming => Some(ScalarSpace::P2Bubble),
            PairKind::GuzmanNeilan => None,
        }
    }

    fn pressure_space(self) -> PressureSpace {
        match self {
            PairKind::Mini | PairKind::TaylorHood => PressureSpace::P1Continuous,
            PairKind::P2P0 | PairKind::GuzmanNeilan => PressureSpace::P0,
            PairKind::CrouzeixRaviartConforming => PressureSpace::P1Discontinuous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureSpace {
    P0,
    P1Continuous,
    P1Discontinuous,
}

/// Velocity and pressure spaces on one triangulation with their DOF maps.
///
/// Velocity layout: free vertex nodes, then free edge nodes, then cell
/// bubbles; each node carries `d` consecutive components. Pressure layout:
/// one value per cell (P0), per vertex (continuous P1) or per cell vertex
/// (discontinuous P1, `(d+1)·cell + i`).
#[derive(Debug, Clone)]
pub struct SpacePair {
    kind: PairKind,
    tri: Arc<Triangulation>,
    scalar: Option<ScalarSpace>,
    pressure: PressureSpace,
    vel_local: usize,
    vel_dofs: Vec<usize>,
    n_vel: usize,
    pre_local: usize,
    pre_dofs: Vec<usize>,
    n_pre: usize,
    vertex_node: Vec<usize>,
    edge_node: Vec<usize>,
    cell_node: Vec<usize>,
    /// Per-cell nodal coefficients of the divergence-free-compatible basis.
    gn_coeffs: Vec<[[f64; 12]; 12]>,
}

fn number_nodes(free: impl Iterator<Item = bool>, next: &mut usize) -> Vec<usize> {
    free.map(|f| {
        if f {
            *next += 1;
            *next - 1
        } else {
            CONSTRAINED
        }
    })
    .collect()
}

impl SpacePair {
    pub fn new(tri: Arc<Triangulation>, kind: PairKind) -> Result<Self> {
        let dim = tri.dim();
        if !kind.supported(dim) {
            return Err(Error::Unsupported(format!(
                "pair `{}` is not available in dimension {dim}",
                kind.name()
            )));
        }
        let scalar = kind.scalar_space();
        let has_edges = scalar.map_or(true, |s| s.has_edges());
        let has_bubble = scalar.is_some_and(|s| s.has_bubble());
        let mut next = 0;
        let vertex_node = number_nodes(
            (0..tri.num_vertices()).map(|v| !tri.is_boundary_vertex(v)),
            &mut next,
        );
        let edge_node = number_nodes(
            (0..tri.num_edges()).map(|e| has_edges && !tri.is_boundary_edge(e)),
            &mut next,
        );
        let cell_node = number_nodes((0..tri.num_cells()).map(|_| has_bubble), &mut next);
        let n_vel = next * dim;
        let dof = |node: usize, comp: usize| {
            if node == CONSTRAINED {
                CONSTRAINED
            } else {
                node * dim + comp
            }
        };

        let ncells = tri.num_cells();
        let (vel_local, vel_dofs) = match scalar {
            Some(s) => {
                let ns = s.len(dim);
                let mut dofs = Vec::with_capacity(ncells * ns * dim);
                for c in 0..ncells {
                    let mut nodes: Vec<usize> = tri.cell(c).iter().map(|&v| vertex_node[v]).collect();
                    if s.has_edges() {
                        nodes.extend(tri.cell_edges(c).iter().map(|&e| edge_node[e]));
                    }
                    if s.has_bubble() {
                        nodes.push(cell_node[c]);
                    }
                    for comp in 0..dim {
                        dofs.extend(nodes.iter().map(|&n| dof(n, comp)));
                    }
                }
                (ns * dim, dofs)
            }
            None => {
                let mut dofs = Vec::with_capacity(ncells * 12);
                for c in 0..ncells {
                    for &v in tri.cell(c) {
                        dofs.extend([dof(vertex_node[v], 0), dof(vertex_node[v], 1)]);
                    }
                    for &e in tri.cell_edges(c) {
                        dofs.extend([dof(edge_node[e], 0), dof(edge_node[e], 1)]);
                    }
                }
                (12, dofs)
            }
        };

        let pressure = kind.pressure_space();
        let (pre_local, pre_dofs, n_pre) = match pressure {
            PressureSpace::P0 => (1, (0..ncells).collect(), ncells),
            PressureSpace::P1Continuous => (dim + 1, tri.cell_list().to_vec(), tri.num_vertices()),
            PressureSpace::P1Discontinuous => {
                let n = ncells * (dim + 1);
                (dim + 1, (0..n).collect(), n)
            }
        };

        let gn_coeffs = if kind == PairKind::GuzmanNeilan {
            (0..ncells).map(|c| gn_nodal_coefficients(&tri, c)).collect::<Result<_>>()?
        } else {
            Vec::new()
        };

        Ok(Self {
            kind,
            tri,
            scalar,
            pressure,
            vel_local,
            vel_dofs,
            n_vel,
            pre_local,
            pre_dofs,
            n_pre,
            vertex_node,
            edge_node,
            cell_node,
            gn_coeffs,
        })
    }

    pub fn kind(&self) -> PairKind {
        self.kind
    }

    pub fn mesh(&self) -> &Triangulation {
        &self.tri
    }

    pub fn mesh_arc(&self) -> &Arc<Triangulation> {
        &self.tri
    }

    pub fn dim(&self) -> usize {
        self.tri.dim()
    }

    pub fn num_velocity(&self) -> usize {
        self.n_vel
    }

    pub fn num_pressure(&self) -> usize {
        self.n_pre
    }

    pub fn pressure_space(&self) -> PressureSpace {
        self.pressure
    }

    pub fn velocity_local(&self) -> usize {
        self.vel_local
    }

    pub fn pressure_local(&self) -> usize {
        self.pre_local
    }

    /// Global velocity DOFs of a cell in local basis order
    /// ([`CONSTRAINED`] for boundary DOFs).
    pub fn velocity_dofs(&self, c: usize) -> &[usize] {
        &self.vel_dofs[c * self.vel_local..(c + 1) * self.vel_local]
    }

    pub fn pressure_dofs(&self, c: usize) -> &[usize] {
        &self.pre_dofs[c * self.pre_local..(c + 1) * self.pre_local]
    }

    /// Velocity DOF of component `comp` at vertex `v`.
    pub fn vertex_dof(&self, v: usize, comp: usize) -> Option<usize> {
        let n = self.vertex_node[v];
        (n != CONSTRAINED).then(|| n * self.dim() + comp)
    }

    pub fn edge_dof(&self, e: usize, comp: usize) -> Option<usize> {
        let n = self.edge_node[e];
        (n != CONSTRAINED).then(|| n * self.dim() + comp)
    }

    pub fn cell_dof(&self, c: usize, comp: usize) -> Option<usize> {
        let n = self.cell_node[c];
        (n != CONSTRAINED).then(|| n * self.dim() + comp)
    }

    /// Polynomial degree of the velocity space (rational bubbles count as 3).
    pub fn velocity_degree(&self) -> usize {
        match self.scalar {
            Some(s) => s.degree(self.dim()),
            None => 3,
        }
    }

    /// Default cell quadrature: exact for products of two velocity
    /// gradients plus two extra degrees for nonlinear stress terms. The
    /// rational bubbles are only smooth away from the vertices and use a
    /// vertex-graded composite rule instead.
    pub fn default_rule(&self) -> SimplexRule {
        match self.kind {
            PairKind::GuzmanNeilan => SimplexRule::vertex_graded(GN_RULE_POINTS),
            _ => SimplexRule::for_degree(self.dim(), 2 * self.velocity_degree() + 2),
        }
    }

    /// Values and physical gradients (`grad[i][j] = ∂_j u_i`) of the local
    /// velocity basis of cell `c` at barycentric point `lam`.
    pub fn eval_velocity(&self, c: usize, lam: &[f64; 4], vals: &mut [Vec3], grads: &mut [Mat3]) {
        let dim = self.dim();
        let glam = self.tri.map(c).bary_gradients(dim);
        match self.scalar {
            Some(s) => {
                let ns = s.len(dim);
                let mut sv = [0.0; 16];
                let mut sg = [ZERO3; 16];
                scalar_basis(s, dim, lam, &glam, &mut sv, &mut sg);
                for comp in 0..dim {
                    for k in 0..ns {
                        let a = comp * ns + k;
                        let mut v = ZERO3;
                        v[comp] = sv[k];
                        vals[a] = v;
                        let mut g = ZERO33;
                        g[comp] = sg[k];
                        grads[a] = g;
                    }
                }
            }
            None => {
                let mut cv = [ZERO3; 12];
                let mut cg = [ZERO33; 12];
                gn_candidates(lam, &glam, &mut cv, &mut cg);
                let coef = &self.gn_coeffs[c];
                for a in 0..12 {
                    let mut v = ZERO3;
                    let mut g = ZERO33;
                    for f in 0..12 {
                        let w = coef[f][a];
                        if w == 0.0 {
                            continue;
                        }
                        for i in 0..2 {
                            v[i] += w * cv[f][i];
                            for j in 0..2 {
                                g[i][j] += w * cg[f][i][j];
                            }
                        }
                    }
                    vals[a] = v;
                    grads[a] = g;
                }
            }
        }
    }

    /// Local pressure basis values at barycentric point `lam`.
    pub fn eval_pressure(&self, lam: &[f64; 4], vals: &mut [f64]) {
        match self.pressure {
            PressureSpace::P0 => vals[0] = 1.0,
            _ => vals[..=self.dim()].copy_from_slice(&lam[..=self.dim()]),
        }
    }

    /// Local basis at a point of the reference simplex given by its
    /// reference coordinates `ξ` (so `λ_i = ξ_i`, `λ_0 = 1 − Σξ`).
    pub fn eval_basis(&self, c: usize, xi: &Vec3) -> Result<LocalBasis> {
        if c >= self.tri.num_cells() {
            return Err(Error::invalid(format!("cell id {c} out of range")));
        }
        let dim = self.dim();
        let mut lam = [0.0; 4];
        lam[1..=dim].copy_from_slice(&xi[..dim]);
        lam[0] = 1.0 - xi[..dim].iter().sum::<f64>();
        if lam[..=dim].iter().any(|&l| l < -1e-14) {
            return Err(Error::invalid(format!("point {xi:?} outside the reference simplex")));
        }
        let mut b = LocalBasis {
            velocity_values: vec![ZERO3; self.vel_local],
            velocity_gradients: vec![ZERO33; self.vel_local],
            pressure_values: vec![0.0; self.pre_local],
        };
        self.eval_velocity(c, &lam, &mut b.velocity_values, &mut b.velocity_gradients);
        self.eval_pressure(&lam, &mut b.pressure_values);
        Ok(b)
    }

    /// Velocity value and gradient of coefficient vector `u` at a point.
    pub fn velocity_at(&self, u: &[f64], c: usize, lam: &[f64; 4]) -> (Vec3, Mat3) {
        let mut vals = [ZERO3; MAX_LOCAL];
        let mut grads = [ZERO33; MAX_LOCAL];
        self.eval_velocity(c, lam, &mut vals, &mut grads);
        let mut v = ZERO3;
        let mut g = ZERO33;
        for (a, &d) in self.velocity_dofs(c).iter().enumerate() {
            if d == CONSTRAINED {
                continue;
            }
            let w = u[d];
            for i in 0..3 {
                v[i] += w * vals[a][i];
                for j in 0..3 {
                    g[i][j] += w * grads[a][i][j];
                }
            }
        }
        (v, g)
    }

    pub fn pressure_at(&self, p: &[f64], c: usize, lam: &[f64; 4]) -> f64 {
        let mut vals = [0.0; 4];
        self.eval_pressure(lam, &mut vals);
        self.pressure_dofs(c)
            .iter()
            .zip(vals.iter())
            .map(|(&d, &v)| p[d] * v)
            .sum()
    }
}

/// Local basis data returned by [`SpacePair::eval_basis`].
#[derive(Debug, Clone)]
pub struct LocalBasis {
    pub velocity_values: Vec<Vec3>,
    pub velocity_gradients: Vec<Mat3>,
    pub pressure_values: Vec<f64>,
}

/// Gauss rule on an edge, as barycentric pairs `(1 − s, s)` and weights.
pub(crate) fn edge_rule(k: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_legendre(k)
}

/// Barycentric coordinates of the point at parameter `s` on local edge `e`.
pub(crate) fn edge_point(dim: usize, e: usize, s: f64) -> [f64; 4] {
    let [a, b] = local_edges(dim)[e];
    let mut lam = [0.0; 4];
    lam[a] = 1.0 - s;
    lam[b] = s;
    lam
}

/// Inverse of the DOF matrix (vertex values, edge means) of the twelve
/// spanning functions on cell `c`.
fn gn_nodal_coefficients(tri: &Triangulation, c: usize) -> Result<[[f64; 12]; 12]> {
    let glam = tri.map(c).bary_gradients(2);
    let mut m = vec![0.0; 144];
    let mut cv = [ZERO3; 12];
    let mut cg = [ZERO33; 12];
    for j in 0..3 {
        let mut lam = [0.0; 4];
        lam[j] = 1.0;
        gn_candidates(&lam, &glam, &mut cv, &mut cg);
        for f in 0..12 {
            for k in 0..2 {
                m[(2 * j + k) * 12 + f] = cv[f][k];
            }
        }
    }
    let (s, w) = edge_rule(4);
    for e in 0..3 {
        for q in 0..s.len() {
            gn_candidates(&edge_point(2, e, s[q]), &glam, &mut cv, &mut cg);
            for f in 0..12 {
                for k in 0..2 {
                    m[(6 + 2 * e + k) * 12 + f] += w[q] * cv[f][k];
                }
            }
        }
    }
    let mut inv = vec![0.0; 144];
    for i in 0..12 {
        inv[i * 12 + i] = 1.0;
    }
    dense_solve(&mut m, 12, &mut inv, 12)?;
    let mut out = [[0.0; 12]; 12];
    for f in 0..12 {
        for a in 0..12 {
            out[f][a] = inv[f * 12 + a];
        }
    }
    Ok(out)
}
