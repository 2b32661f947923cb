use crate::linalg::{Mat3, Vec3};

/// A vector field evaluable at physical points, with its gradient
/// (`grad[i][j] = ∂_j v_i`).
pub trait VectorField: Sync {
    fn value(&self, x: &Vec3) -> Vec3;
    fn gradient(&self, x: &Vec3) -> Mat3;
}

/// Vector field from a pair of closures.
pub struct FnField<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> FnField<F, G>
where
    F: Fn(&Vec3) -> Vec3 + Sync,
    G: Fn(&Vec3) -> Mat3 + Sync,
{
    pub fn new(value: F, gradient: G) -> Self {
        Self { value, gradient }
    }
}

impl<F, G> VectorField for FnField<F, G>
where
    F: Fn(&Vec3) -> Vec3 + Sync,
    G: Fn(&Vec3) -> Mat3 + Sync,
{
    fn value(&self, x: &Vec3) -> Vec3 {
        (self.value)(x)
    }

    fn gradient(&self, x: &Vec3) -> Mat3 {
        (self.gradient)(x)
    }
}
