use super::Triangulation;
use crate::linalg::Vec3;

/// Red refinement with edge midpoints numbered after the old vertices.
pub(super) fn red_refine(t: &Triangulation) -> Triangulation {
    let dim = t.dim();
    let nv = t.num_vertices();
    let mut vertices: Vec<Vec3> = t.vertices().to_vec();
    for &[a, b] in t.edges() {
        let (xa, xb) = (t.vertex(a), t.vertex(b));
        vertices.push([
            0.5 * (xa[0] + xb[0]),
            0.5 * (xa[1] + xb[1]),
            0.5 * (xa[2] + xb[2]),
        ]);
    }
    let mut cells = Vec::with_capacity(t.cell_list().len() << dim);
    for c in 0..t.num_cells() {
        let v = t.cell(c);
        let e = t.cell_edges(c);
        if dim == 2 {
            // local edge i is opposite vertex i: e0 = (1,2), e1 = (0,2), e2 = (0,1)
            let (m12, m02, m01) = (nv + e[0], nv + e[1], nv + e[2]);
            cells.extend([v[0], m01, m02]);
            cells.extend([m01, v[1], m12]);
            cells.extend([m02, m12, v[2]]);
            cells.extend([m01, m12, m02]);
        } else {
            // local edges (01,02,03,12,13,23)
            let (x0, x1, x2, x3) = (v[0], v[1], v[2], v[3]);
            let m = |k: usize| nv + e[k];
            let (x01, x02, x03, x12, x13, x23) = (m(0), m(1), m(2), m(3), m(4), m(5));
            cells.extend([x0, x01, x02, x03]);
            cells.extend([x01, x1, x12, x13]);
            cells.extend([x02, x12, x2, x23]);
            cells.extend([x03, x13, x23, x3]);
            cells.extend([x01, x02, x03, x13]);
            cells.extend([x01, x02, x12, x13]);
            cells.extend([x02, x03, x13, x23]);
            cells.extend([x02, x12, x13, x23]);
        }
    }
    Triangulation::from_cells(dim, vertices, cells).expect("red refinement preserves validity")
}
