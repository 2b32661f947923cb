//! Lipschitz truncation: maximal function, Whitney decomposition, partition
//! of unity, continuous and discrete truncation, and level selection.
//! Planar meshes only.

mod lattice;
mod levels;
mod maximal;
mod truncate;
mod whitney;

pub use lattice::Lattice;
pub use levels::{gradient_norm, select_levels, LevelChoice, LevelInput};
pub use maximal::{maximal_at, maximal_function, LevelSet, MaximalField, RadiusGrid, Raster};
pub use truncate::{
    cube_bump, discrete_level_region, discrete_truncate, lipschitz_truncate, DiscreteTruncationReport,
    DiscreteVelocity, MeshField, PartitionTerm, TruncField, Truncation, TruncationReport, AVERAGE_DILATION, INNER_DILATION,
    SUPPORT_DILATION,
};
pub use whitney::{CubeGeometry, DyadicCube, WhitneyCover, WhitneyReport};

use crate::elements::SpacePair;
use crate::error::Result;

/// Lattice of spacing `≤ h_min / 2` around the mesh, the raster of `|∇u|`
/// and its maximal function on the default radius grid.
pub fn velocity_maximal(pair: &SpacePair, u: &[f64]) -> Result<MaximalField> {
    let tri = pair.mesh();
    let lattice = Lattice::around(tri, 0.5 * tri.h_min())?;
    let raster = Raster::gradient_norm(&lattice, pair, u)?;
    let radii = RadiusGrid::for_mesh(tri)?;
    Ok(maximal_function(&raster, &radii))
}
