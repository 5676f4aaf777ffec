//! Ground-truth training targets: center heatmap, density-aware weights,
//! motion offsets, relationship offsets, and the weighted focal loss.

mod grid;
mod heatmap;
mod loss;
mod offsets;

pub use grid::DenseGrid2D;
pub use heatmap::{make_daw, make_daw_with, make_heatmap, make_heatmap_with, HeatmapCombine};
pub use loss::{focal_daw_loss, focal_loss, LossParams, PROB_EPS};
pub use offsets::{
    make_motion_offsets, make_relationship_offsets, MotionOffset, MotionTarget,
    RelationshipOffset, NEIGHBOR_RADIUS,
};

use crate::geometry::Box3D;

/// One annotated object in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtObject<T> {
    pub instance_id: u64,
    pub frame: usize,
    pub bbox: Box3D<T>,
}
