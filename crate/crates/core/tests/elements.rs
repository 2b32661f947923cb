use std::sync::Arc;

use monoflow_core::elements::{FnField, PairKind, ProjectorPair, SpacePair, VectorField};
use monoflow_core::linalg::{Mat3, Vec3, ZERO33};
use monoflow_core::mesh::{BoxDomain, Triangulation};

fn square(n: usize) -> Arc<Triangulation> {
    Arc::new(Triangulation::build_uniform(&BoxDomain::unit(2), n).unwrap())
}

/// `(a·x(1−x)y(1−y)·x^i y^j, b·…)` with exact gradient.
fn bubble_field(i: i32, j: i32, a: f64, b: f64) -> impl VectorField {
    let val = move |x: &Vec3| {
        let s = x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]) * x[0].powi(i) * x[1].powi(j);
        [a * s, b * s, 0.0]
    };
    let grad = move |x: &Vec3| -> Mat3 {
        let (px, py) = (x[0], x[1]);
        let fx = px * (1.0 - px) * px.powi(i);
        let fy = py * (1.0 - py) * py.powi(j);
        let dfx = (1.0 - 2.0 * px) * px.powi(i) + if i > 0 { (i as f64) * px.powi(i - 1) * px * (1.0 - px) } else { 0.0 };
        let dfy = (1.0 - 2.0 * py) * py.powi(j) + if j > 0 { (j as f64) * py.powi(j - 1) * py * (1.0 - py) } else { 0.0 };
        let mut g = ZERO33;
        g[0] = [a * dfx * fy, a * fx * dfy, 0.0];
        g[1] = [b * dfx * fy, b * fx * dfy, 0.0];
        g
    };
    FnField::new(val, grad)
}

#[test]
fn projector_contracts_all_pairs() {
    let tri = square(4);
    let fields: Vec<Box<dyn VectorField>> = (0..4)
        .map(|k| Box::new(bubble_field(k % 2, k / 2, 1.0 + k as f64, 0.5 - k as f64)) as Box<dyn VectorField>)
        .collect();
    let refs: Vec<&dyn VectorField> = fields.iter().map(|f| f.as_ref()).collect();
    for kind in PairKind::ALL {
        let pair = SpacePair::new(tri.clone(), kind).unwrap();
        let proj = ProjectorPair::new(&pair).unwrap();
        let rep = proj.check(&pair, &refs, 7).unwrap();
        println!("{rep:?}");
        assert!(rep.identity_residual < 1e-12, "{rep:?}");
        assert!(rep.idempotence_residual < 1e-12, "{rep:?}");
        assert!(rep.divergence_residual < 1e-10, "{rep:?}");
    }
}
