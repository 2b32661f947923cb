//! Conforming simplicial triangulations in two and three dimensions.

mod io;
mod refine;

pub use io::{read_ascii, read_vtk_mesh, write_ascii, write_vtk, VtkField};
pub(crate) use io::write_file;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{det, inverse, mat_vec, norm, sub, Mat3, Vec3, ZERO3, ZERO33};

/// Local edges of a triangle: edge `i` is opposite vertex `i`.
pub const EDGES_2D: [[usize; 2]; 3] = [[1, 2], [0, 2], [0, 1]];
/// Local edges of a tetrahedron.
pub const EDGES_3D: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

pub fn local_edges(dim: usize) -> &'static [[usize; 2]] {
    if dim == 2 {
        &EDGES_2D
    } else {
        &EDGES_3D
    }
}

/// Axis-aligned box `[lo, hi]` (only the first `dim` components matter).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub dim: usize,
    pub lo: Vec3,
    pub hi: Vec3,
}

impl BoxDomain {
    pub fn unit(dim: usize) -> Self {
        let mut hi = ZERO3;
        hi[..dim].fill(1.0);
        Self { dim, lo: ZERO3, hi }
    }

    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self {
            dim: 2,
            lo: [x0, y0, 0.0],
            hi: [x1, y1, 0.0],
        }
    }

    pub fn measure(&self) -> f64 {
        (0..self.dim).map(|i| self.hi[i] - self.lo[i]).product()
    }

    fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::invalid(format!("dimension {} not in {{2, 3}}", self.dim)));
        }
        for i in 0..self.dim {
            if !(self.hi[i] > self.lo[i]) || !self.lo[i].is_finite() || !self.hi[i].is_finite() {
                return Err(Error::invalid("degenerate box"));
            }
        }
        Ok(())
    }

    fn contains(&self, x: &Vec3) -> bool {
        (0..self.dim).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }
}

/// Affine map `x = A ξ + b` from the reference simplex onto a cell.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub a: Mat3,
    pub b: Vec3,
    pub a_inv: Mat3,
    pub det: f64,
}

impl AffineMap {
    pub fn apply(&self, xi: &Vec3) -> Vec3 {
        let mut x = mat_vec(&self.a, xi);
        for i in 0..3 {
            x[i] += self.b[i];
        }
        x
    }

    pub fn pull_back(&self, x: &Vec3) -> Vec3 {
        mat_vec(&self.a_inv, &sub(x, &self.b))
    }

    /// Physical gradients of the barycentric coordinates `λ_0..λ_d`.
    pub fn bary_gradients(&self, dim: usize) -> [Vec3; 4] {
        let mut g = [ZERO3; 4];
        // ∇λ_i = row i-1 of A^{-1}; ∇λ_0 = −Σ
        for i in 1..=dim {
            g[i] = self.a_inv[i - 1];
            for k in 0..3 {
                g[0][k] -= self.a_inv[i - 1][k];
            }
        }
        g
    }
}

/// A (d−1)-face of the triangulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Sorted global vertex ids (third entry unused in 2D).
    pub vertices: [usize; 3],
    /// Adjacent cells; `cells[1]` is `None` on the boundary.
    pub cells: [Option<usize>; 2],
    /// 0 for interior facets, 1 for boundary facets.
    pub tag: u32,
}

/// The cells sharing at least one vertex with a given cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub center: usize,
    pub members: Vec<usize>,
    pub measure: f64,
}

/// Immutable conforming simplicial mesh with precomputed geometry.
#[derive(Debug, Clone)]
pub struct Triangulation {
    dim: usize,
    vertices: Vec<Vec3>,
    cells: Vec<usize>,
    maps: Vec<AffineMap>,
    measures: Vec<f64>,
    facets: Vec<Facet>,
    cell_facets: Vec<usize>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<usize>,
    vertex_cells_ptr: Vec<usize>,
    vertex_cells: Vec<usize>,
    boundary_vertex: Vec<bool>,
    boundary_edge: Vec<bool>,
    shape_constant: f64,
    lo: Vec3,
    hi: Vec3,
    buckets: BucketGrid,
}

#[derive(Debug, Clone)]
struct BucketGrid {
    n: [usize; 3],
    lo: Vec3,
    inv_width: Vec3,
    ptr: Vec<usize>,
    items: Vec<usize>,
}

const LOCATE_TOL: f64 = 1e-12;

impl Triangulation {
    /// Builds a triangulation from raw vertex and cell lists, computing all
    /// derived data and validating invertibility and conformity.
    pub fn from_cells(dim: usize, vertices: Vec<Vec3>, cells: Vec<usize>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::invalid(format!("dimension {dim} not in {{2, 3}}")));
        }
        let nv = dim + 1;
        if cells.is_empty() || cells.len() % nv != 0 {
            return Err(Error::invalid("cell list length is not a multiple of d+1"));
        }
        if let Some(&bad) = cells.iter().find(|&&v| v >= vertices.len()) {
            return Err(Error::invalid(format!("cell references missing vertex {bad}")));
        }
        let ncells = cells.len() / nv;
        let mut maps = Vec::with_capacity(ncells);
        let mut measures = Vec::with_capacity(ncells);
        let fact = if dim == 2 { 2.0 } else { 6.0 };
        for c in 0..ncells {
            let vs = &cells[c * nv..(c + 1) * nv];
            let x0 = vertices[vs[0]];
            let mut a = ZERO33;
            for j in 1..=dim {
                let e = sub(&vertices[vs[j]], &x0);
                for i in 0..dim {
                    a[i][j - 1] = e[i];
                }
            }
            let d = det(&a, dim);
            let scale = (1..=dim)
                .map(|j| norm(&sub(&vertices[vs[j]], &x0)))
                .fold(0.0, f64::max)
                .powi(dim as i32);
            if d.abs() <= 1e-13 * scale || !d.is_finite() {
                return Err(Error::Validation(format!("cell {c} is degenerate (det {d:.3e})")));
            }
            let a_inv = inverse(&a, dim).expect("nonzero determinant");
            maps.push(AffineMap { a, b: x0, a_inv, det: d });
            measures.push(d.abs() / fact);
        }

        // facets: local facet i is opposite local vertex i
        let mut facet_map: HashMap<[usize; 3], usize> = HashMap::new();
        let mut facets: Vec<Facet> = Vec::new();
        let mut cell_facets = vec![0usize; ncells * nv];
        for c in 0..ncells {
            let vs = &cells[c * nv..(c + 1) * nv];
            for i in 0..nv {
                let mut key = [usize::MAX; 3];
                let mut k = 0;
                for (j, &v) in vs.iter().enumerate() {
                    if j != i {
                        key[k] = v;
                        k += 1;
                    }
                }
                key[..dim].sort_unstable();
                let id = *facet_map.entry(key).or_insert_with(|| {
                    facets.push(Facet {
                        vertices: key,
                        cells: [None, None],
                        tag: 1,
                    });
                    facets.len() - 1
                });
                let f = &mut facets[id];
                if f.cells[0].is_none() {
                    f.cells[0] = Some(c);
                } else if f.cells[1].is_none() {
                    f.cells[1] = Some(c);
                    f.tag = 0;
                } else {
                    return Err(Error::Validation(format!(
                        "facet {key:?} shared by more than two cells"
                    )));
                }
                cell_facets[c * nv + i] = id;
            }
        }

        // edges
        let le = local_edges(dim);
        let mut edge_map: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut cell_edges = vec![0usize; ncells * le.len()];
        for c in 0..ncells {
            let vs = &cells[c * nv..(c + 1) * nv];
            for (k, e) in le.iter().enumerate() {
                let (a, b) = (vs[e[0]], vs[e[1]]);
                let key = [a.min(b), a.max(b)];
                let id = *edge_map.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() - 1
                });
                cell_edges[c * le.len() + k] = id;
            }
        }

        // vertex -> cells
        let mut counts = vec![0usize; vertices.len() + 1];
        for &v in &cells {
            counts[v + 1] += 1;
        }
        for i in 0..vertices.len() {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut vertex_cells = vec![0usize; cells.len()];
        for c in 0..ncells {
            for &v in &cells[c * nv..(c + 1) * nv] {
                vertex_cells[fill[v]] = c;
                fill[v] += 1;
            }
        }

        let mut boundary_vertex = vec![false; vertices.len()];
        let mut boundary_edge = vec![false; edges.len()];
        for f in facets.iter().filter(|f| f.tag != 0) {
            for &v in &f.vertices[..dim] {
                boundary_vertex[v] = true;
            }
            for a in 0..dim {
                for b in (a + 1)..dim {
                    let key = [f.vertices[a], f.vertices[b]];
                    boundary_edge[edge_map[&key]] = true;
                }
            }
        }

        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for x in &vertices {
            for i in 0..3 {
                lo[i] = lo[i].min(x[i]);
                hi[i] = hi[i].max(x[i]);
            }
        }

        let mut tri = Self {
            dim,
            vertices,
            cells,
            maps,
            measures,
            facets,
            cell_facets,
            edges,
            cell_edges,
            vertex_cells_ptr: counts,
            vertex_cells,
            boundary_vertex,
            boundary_edge,
            shape_constant: 0.0,
            lo,
            hi,
            buckets: BucketGrid {
                n: [1; 3],
                lo,
                inv_width: ZERO3,
                ptr: vec![],
                items: vec![],
            },
        };
        tri.shape_constant = (0..ncells)
            .map(|c| tri.shape_ratio(c))
            .fold(0.0, f64::max);
        tri.buckets = tri.build_buckets();
        tri.check_conformity()?;
        Ok(tri)
    }

    fn build_buckets(&self) -> BucketGrid {
        let ncells = self.num_cells();
        let per_axis = ((ncells as f64).powf(1.0 / self.dim as f64).ceil() as usize).max(1);
        let mut n = [1usize; 3];
        let mut inv_width = ZERO3;
        for i in 0..self.dim {
            n[i] = per_axis;
            let w = (self.hi[i] - self.lo[i]).max(f64::MIN_POSITIVE);
            inv_width[i] = per_axis as f64 / w;
        }
        let total = n[0] * n[1] * n[2];
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); total];
        for c in 0..ncells {
            let mut blo = [0usize; 3];
            let mut bhi = [0usize; 3];
            for i in 0..self.dim {
                let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
                for &v in self.cell(c) {
                    a = a.min(self.vertices[v][i]);
                    b = b.max(self.vertices[v][i]);
                }
                let tol = 1e-10 * (self.hi[i] - self.lo[i]);
                blo[i] = bucket_index(a - tol, self.lo[i], inv_width[i], n[i]);
                bhi[i] = bucket_index(b + tol, self.lo[i], inv_width[i], n[i]);
            }
            for i in blo[0]..=bhi[0] {
                for j in blo[1]..=bhi[1] {
                    for k in blo[2]..=bhi[2] {
                        lists[(i * n[1] + j) * n[2] + k].push(c);
                    }
                }
            }
        }
        let mut ptr = vec![0];
        let mut items = Vec::new();
        for l in lists {
            items.extend(l);
            ptr.push(items.len());
        }
        BucketGrid {
            n,
            lo: self.lo,
            inv_width,
            ptr,
            items,
        }
    }

    fn bucket_candidates(&self, x: &Vec3) -> &[usize] {
        let g = &self.buckets;
        let mut idx = [0usize; 3];
        for i in 0..self.dim {
            idx[i] = bucket_index(x[i], g.lo[i], g.inv_width[i], g.n[i]);
        }
        let b = (idx[0] * g.n[1] + idx[1]) * g.n[2] + idx[2];
        &g.items[g.ptr[b]..g.ptr[b + 1]]
    }

    /// Uniform mesh of a box with `n` subdivisions per axis: diagonal split of
    /// each square into two triangles, or Kuhn split of each cube into six
    /// tetrahedra.
    pub fn build_uniform(domain: &BoxDomain, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("number of subdivisions must be at least 1"));
        }
        domain.validate()?;
        let mask = |_: &[usize; 3]| true;
        Self::build_grid(domain, [n; 3], &mask)
    }

    /// Uniform mesh of a union of axis-aligned boxes, all of whose faces lie on
    /// the grid with spacing `h`.
    pub fn build_union(boxes: &[BoxDomain], h: f64) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::invalid("empty union of boxes"));
        }
        if !(h > 0.0) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        let dim = boxes[0].dim;
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for b in boxes {
            b.validate()?;
            if b.dim != dim {
                return Err(Error::invalid("boxes of mixed dimension"));
            }
            for i in 0..dim {
                lo[i] = lo[i].min(b.lo[i]);
                hi[i] = hi[i].max(b.hi[i]);
            }
        }
        let mut counts = [1usize; 3];
        for i in 0..dim {
            let c = (hi[i] - lo[i]) / h;
            if (c - c.round()).abs() > 1e-9 {
                return Err(Error::invalid("box extents are not multiples of the grid spacing"));
            }
            counts[i] = c.round() as usize;
            for b in boxes {
                for v in [b.lo[i], b.hi[i]] {
                    let o = (v - lo[i]) / h;
                    if (o - o.round()).abs() > 1e-9 {
                        return Err(Error::invalid("box faces do not lie on the grid"));
                    }
                }
            }
        }
        for i in dim..3 {
            lo[i] = 0.0;
            hi[i] = 0.0;
        }
        let bbox = BoxDomain { dim, lo, hi };
        let mask = |ijk: &[usize; 3]| {
            let mut c = ZERO3;
            for i in 0..dim {
                c[i] = lo[i] + (ijk[i] as f64 + 0.5) * h;
            }
            boxes.iter().any(|b| b.contains(&c))
        };
        Self::build_grid(&bbox, counts, &mask)
    }

    fn build_grid(domain: &BoxDomain, n: [usize; 3], mask: &dyn Fn(&[usize; 3]) -> bool) -> Result<Self> {
        let dim = domain.dim;
        let nz = if dim == 3 { n[2] } else { 0 };
        let vid = |i: usize, j: usize, k: usize| (k * (n[1] + 1) + j) * (n[0] + 1) + i;
        let mut used = vec![usize::MAX; (n[0] + 1) * (n[1] + 1) * (nz + 1)];
        let mut vertices = Vec::new();
        let mut cells = Vec::new();
        let mut get = |i: usize, j: usize, k: usize, vertices: &mut Vec<Vec3>| {
            let g = vid(i, j, k);
            if used[g] == usize::MAX {
                used[g] = vertices.len();
                let mut x = ZERO3;
                let ijk = [i, j, k];
                for a in 0..dim {
                    let t = ijk[a] as f64 / n[a] as f64;
                    x[a] = if ijk[a] == n[a] {
                        domain.hi[a]
                    } else {
                        domain.lo[a] + t * (domain.hi[a] - domain.lo[a])
                    };
                }
                vertices.push(x);
            }
            used[g]
        };
        // Cells are enumerated square by square; vertices are numbered on first
        // use, which keeps ids compact for masked domains.
        for k in 0..nz.max(1) {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    if !mask(&[i, j, k]) {
                        continue;
                    }
                    if dim == 2 {
                        let v00 = get(i, j, 0, &mut vertices);
                        let v10 = get(i + 1, j, 0, &mut vertices);
                        let v01 = get(i, j + 1, 0, &mut vertices);
                        let v11 = get(i + 1, j + 1, 0, &mut vertices);
                        cells.extend([v00, v10, v11, v00, v11, v01]);
                    } else {
                        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
                        for p in perms {
                            let mut ijk = [i, j, k];
                            let mut tet = [get(ijk[0], ijk[1], ijk[2], &mut vertices); 4];
                            for (s, &axis) in p.iter().enumerate() {
                                ijk[axis] += 1;
                                tet[s + 1] = get(ijk[0], ijk[1], ijk[2], &mut vertices);
                            }
                            cells.extend(tet);
                        }
                    }
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::invalid("no cells selected"));
        }
        Self::from_cells(dim, vertices, cells)
    }

    /// Red refinement: every simplex is split into `2^d` children.
    pub fn refine_uniform(&self) -> Self {
        refine::red_refine(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.measures.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> &Vec3 {
        &self.vertices[v]
    }

    /// Flat cell list with stride `d + 1`.
    pub fn cell_list(&self) -> &[usize] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cells[c * nv..(c + 1) * nv]
    }

    pub fn map(&self, c: usize) -> &AffineMap {
        &self.maps[c]
    }

    pub fn measure(&self, c: usize) -> f64 {
        self.measures[c]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Local mesh size `|E|^{1/d}`.
    pub fn h(&self, c: usize) -> f64 {
        self.measures[c].powf(1.0 / self.dim as f64)
    }

    pub fn h_max(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.h(c)).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.h(c)).fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self, c: usize) -> f64 {
        let vs = self.cell(c);
        let mut d: f64 = 0.0;
        for a in 0..vs.len() {
            for b in (a + 1)..vs.len() {
                d = d.max(norm(&sub(&self.vertices[vs[a]], &self.vertices[vs[b]])));
            }
        }
        d
    }

    /// Inradius from `r = d |E| / |∂E|`.
    pub fn inradius(&self, c: usize) -> f64 {
        let boundary: f64 = (0..=self.dim)
            .map(|i| self.facet_measure(self.cell_facets[c * (self.dim + 1) + i]))
            .sum();
        self.dim as f64 * self.measures[c] / boundary
    }

    /// `diam(E) / (2 inradius(E))`.
    pub fn shape_ratio(&self, c: usize) -> f64 {
        self.diameter(c) / (2.0 * self.inradius(c))
    }

    /// Maximum shape ratio over all cells.
    pub fn shape_constant(&self) -> f64 {
        self.shape_constant
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// Global facet id of local facet `i` (opposite local vertex `i`).
    pub fn cell_facet(&self, c: usize, i: usize) -> usize {
        self.cell_facets[c * (self.dim + 1) + i]
    }

    pub fn facet_measure(&self, f: usize) -> f64 {
        let v = &self.facets[f].vertices;
        let a = sub(&self.vertices[v[1]], &self.vertices[v[0]]);
        if self.dim == 2 {
            norm(&a)
        } else {
            let b = sub(&self.vertices[v[2]], &self.vertices[v[0]]);
            let cr = [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ];
            0.5 * norm(&cr)
        }
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge ids of a cell in local edge order (see [`local_edges`]).
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        let ne = local_edges(self.dim).len();
        &self.cell_edges[c * ne..(c + 1) * ne]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        norm(&sub(&self.vertices[a], &self.vertices[b]))
    }

    /// Cells incident to vertex `v`, ascending.
    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[self.vertex_cells_ptr[v]..self.vertex_cells_ptr[v + 1]]
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        (self.lo, self.hi)
    }

    pub fn barycenter(&self, c: usize) -> Vec3 {
        let mut x = ZERO3;
        let vs = self.cell(c);
        for &v in vs {
            for i in 0..3 {
                x[i] += self.vertices[v][i];
            }
        }
        x.map(|t| t / vs.len() as f64)
    }

    /// Physical point with barycentric coordinates `bary` in cell `c`.
    pub fn point(&self, c: usize, bary: &[f64]) -> Vec3 {
        let mut x = ZERO3;
        for (k, &v) in self.cell(c).iter().enumerate() {
            for i in 0..3 {
                x[i] += bary[k] * self.vertices[v][i];
            }
        }
        x
    }

    /// Barycentric coordinates of `x` with respect to cell `c` (unclamped).
    pub fn barycentric(&self, c: usize, x: &Vec3) -> [f64; 4] {
        let xi = self.maps[c].pull_back(x);
        let mut b = [0.0; 4];
        b[0] = 1.0 - xi[..self.dim].iter().sum::<f64>();
        b[1..=self.dim].copy_from_slice(&xi[..self.dim]);
        b
    }

    pub fn patch_of(&self, c: usize) -> Result<Patch> {
        if c >= self.num_cells() {
            return Err(Error::invalid(format!("cell id {c} out of range")));
        }
        let mut members: Vec<usize> = self
            .cell(c)
            .iter()
            .flat_map(|&v| self.vertex_cells(v).iter().copied())
            .collect();
        members.sort_unstable();
        members.dedup();
        let measure = members.iter().map(|&m| self.measures[m]).sum();
        Ok(Patch {
            center: c,
            members,
            measure,
        })
    }

    /// Finds the lowest-id cell containing `x` and its barycentric coordinates.
    pub fn locate(&self, x: &Vec3) -> Result<(usize, [f64; 4])> {
        for i in 0..self.dim {
            let tol = 1e-10 * (self.hi[i] - self.lo[i]);
            if x[i] < self.lo[i] - tol || x[i] > self.hi[i] + tol || !x[i].is_finite() {
                return Err(Error::NotFound(format!("point {x:?} outside the domain")));
            }
        }
        for &c in self.bucket_candidates(x) {
            let mut b = self.barycentric(c, x);
            if b[..=self.dim].iter().all(|&l| l >= -LOCATE_TOL) {
                for l in b[..=self.dim].iter_mut() {
                    *l = l.clamp(0.0, 1.0);
                }
                return Ok((c, b));
            }
        }
        Err(Error::NotFound(format!("point {x:?} outside the domain")))
    }

    /// Facet pairing plus a hanging-vertex scan.
    pub fn check_conformity(&self) -> Result<()> {
        for (v, x) in self.vertices.iter().enumerate() {
            if self.vertex_cells(v).is_empty() {
                return Err(Error::Validation(format!("vertex {v} belongs to no cell")));
            }
            for &c in self.bucket_candidates(x) {
                if self.cell(c).contains(&v) {
                    continue;
                }
                let b = self.barycentric(c, x);
                if b[..=self.dim].iter().all(|&l| l >= -1e-10) {
                    return Err(Error::Validation(format!(
                        "vertex {v} lies on cell {c} without being one of its vertices"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn bucket_index(x: f64, lo: f64, inv_width: f64, n: usize) -> usize {
    let t = ((x - lo) * inv_width).floor();
    if t < 0.0 {
        0
    } else {
        (t as usize).min(n - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let t = Triangulation::build_uniform(&BoxDomain::unit(2), 2).unwrap();
        assert_eq!((t.num_cells(), t.num_vertices()), (8, 9));
        let t1 = Triangulation::build_uniform(&BoxDomain::unit(2), 1).unwrap();
        assert_eq!(t1.num_cells(), 2);
        assert!((t1.total_measure() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(matches!(
            Triangulation::build_uniform(&BoxDomain::unit(2), 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn l_shape_union() {
        let boxes = [BoxDomain::rect(0.0, 1.0, 0.0, 0.5), BoxDomain::rect(0.0, 0.5, 0.5, 1.0)];
        let t = Triangulation::build_union(&boxes, 0.25).unwrap();
        assert!((t.total_measure() - 0.75).abs() < 1e-14);
        assert_eq!(t.num_cells(), 24);
    }

    #[test]
    fn kuhn_cube() {
        let t = Triangulation::build_uniform(&BoxDomain::unit(3), 2).unwrap();
        assert_eq!(t.num_cells(), 48);
        assert!((t.total_measure() - 1.0).abs() < 1e-14);
        assert_eq!(t.facets().iter().filter(|f| f.tag != 0).count(), 6 * 8);
    }
}
