//! Offline 3D multi-object tracking workbench for crowded pedestrians.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! bottom of this file pin the common instantiations. The simulator works in
//! `f64` only.

pub mod assignment;
pub mod error;
pub mod evaluator;
pub mod geometry;
pub mod scalar;
pub mod simulator;
pub mod sparsegrid;
pub mod targets;
pub mod tracker;

pub use error::{Error, Result};
pub use evaluator::{
    density_stats, evaluate_sequence, gt_frames, match_frame, mota, mtr_mlr, trajectory_frames, EvalCounts,
    MatchConfig, SequenceEval,
};
pub use geometry::{bev_iou, normalize_yaw, Box3D, BoxBev, CellAnchor, GridSpec};
pub use scalar::Real;
pub use simulator::{corrupt, density_sweep, gen_scene, Area, NoiseConfig, SceneSequence, SimConfig};
pub use sparsegrid::{
    downsample, fuse_hr, fuse_ms, run_encoder, voxelize, ChannelMap, EncoderConfig, PointCloud, SparseGrid, Topology,
    VoxelSpec,
};
pub use targets::{
    focal_daw_loss, focal_loss, make_daw, make_heatmap, make_motion_offsets, make_relationship_offsets, DenseGrid2D,
    GtObject, LossParams,
};
pub use tracker::{associate, run_sequence, Detection, Tracker, TrackerConfig, Trajectory};

pub type GridSpec64 = GridSpec<f64>;
pub type GridSpec32 = GridSpec<f32>;
pub type Box3D64 = Box3D<f64>;
pub type Box3D32 = Box3D<f32>;
pub type BoxBev64 = BoxBev<f64>;
pub type BoxBev32 = BoxBev<f32>;
pub type DenseGrid64 = DenseGrid2D<f64>;
pub type DenseGrid32 = DenseGrid2D<f32>;
pub type GtObject64 = GtObject<f64>;
pub type GtObject32 = GtObject<f32>;
pub type Detection64 = Detection<f64>;
pub type Detection32 = Detection<f32>;
pub type Trajectory64 = Trajectory<f64>;
pub type TrackerConfig64 = TrackerConfig<f64>;
pub type LossParams64 = LossParams<f64>;
pub type LossParams32 = LossParams<f32>;
pub type SparseGrid64 = SparseGrid<f64>;
pub type SparseGrid32 = SparseGrid<f32>;
pub type VoxelSpec64 = VoxelSpec<f64>;
pub type VoxelSpec32 = VoxelSpec<f32>;
