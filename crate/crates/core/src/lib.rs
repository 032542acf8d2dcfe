//! Geometry and attention-steering toolkit for layout-anchored panoramic
//! scene completion.
//!
//! The crate covers the full path from panoramic imagery to steered
//! attention states:
//!
//! * [`erp`]: equirectangular (ERP) pixel/ray mappings and cubemap
//!   conversion with seam-aware resampling.
//! * [`planes`]: unbounded plane primitives, ray intersection, RANSAC
//!   fitting, merging, and plane-constrained depth refinement.
//! * [`classify`]: plane labeling through a vision-language client with a
//!   fixed prompt, keyword parsing, and cross-view majority voting.
//! * [`assign`]: latent-token grids and per-hole-token plane assignment by
//!   geometric reprojection and boundary proximity, fused into confidences.
//! * [`steering`]: additive query/key steering of attention states toward
//!   per-plane key centroids, plus diagnostics for plane affinity.
//! * [`select`]: candidate panorama scoring from voxel visibility, hole
//!   ratio, and plane diversity.
//! * [`metrics`]: L1/SSIM/PSNR image metrics and the training loss surface.
//! * [`synth`]: self-contained synthetic room scenes that double as test
//!   oracles for the geometric pipeline.
//!
//! Pixel conventions: ERP images are row-major, row 0 at the top
//! (latitude +90 deg), column 0 at longitude -180 deg, and pixel centers at
//! half-integer offsets. World frame is right-handed, y up. All geometry is
//! computed in f64; image payloads are f32 RGBA.

pub mod assign;
pub mod classify;
pub mod erp;
pub mod img;
pub mod io;
pub mod metrics;
pub mod par;
pub mod planes;
pub mod seeds;
pub mod select;
pub mod spatial;
pub mod steering;
pub mod synth;

pub use assign::{Assignment, AssignmentRecord, LatentTokenGrid, MethodAssignment, TokenStatus};
pub use erp::{CameraPose, CubemapFaceSet, ErpImage, Face};
pub use img::Image;
pub use planes::{Plane, PlaneLabel, PointCloud};
pub use steering::{AttentionState, PlaneTokenSets, SteerMode, SteeringConfig};
pub use synth::{RoomKind, SyntheticRoom};
