//! Monocular motion estimation for single tracked points in dynamic scenes.
//!
//! Every tracked point is described by its *collision plane*: the plane that
//! contains the point and has the relative motion vector `v_g = v_i - v_c` as
//! its normal. From pixel data alone the toolkit recovers
//!
//! * the epipole of the relative motion (the image of the motion direction),
//! * `k`, the number of frames until the collision plane sweeps through the
//!   focal point, and
//! * `H`, the lateral miss distance, expressed in units of the per-frame
//!   relative displacement.
//!
//! A synthetic pinhole scene simulator in [`simulator`] supplies analytic
//! ground truth for every estimator, collision maps over ego-velocity changes,
//! and a comparison against binocular stereo error propagation.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod clustering;
pub mod epipole;
mod error;
pub mod formats;
pub mod simulator;
pub mod ttc;

pub use camera::{
    angle_from_pixel, angular_separation, project, ray_angle, Angle, Axis, CameraIntrinsics, PixelPoint, ScenePoint,
    ViewingLine,
};
pub use clustering::{cluster_flows, line_epipole_distance, Clustering, ClusteringConfig, MotionCluster, TtcTolerance};
pub use epipole::{
    calibrate_horizon, epipole_least_squares, epipole_offset_three_frames, planar_epipole, Epipole, EpipoleMethod,
    FlowVector, HorizonLine,
};
pub use error::{Error, Result};
pub use ttc::{
    classify_motion, collision_estimate, estimate_between, ttc_from_angles, ttc_three_frame_consistency,
    CollisionEstimate, MotionClass, Tolerances, TrackObservation,
};
