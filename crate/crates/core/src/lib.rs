//! Closed-form near-light photometric stereo with symmetric light pairs.
//!
//! Lights come in point-symmetric pairs on a plane facing the scene. Per pixel,
//! pair differences and sums give a homogeneous linear system in the per-light
//! scaled distances `e`; approximating the light fall-off by the first power of
//! distance adds enough constraints to pin `e` down to scale with one SVD. The
//! surface point, normal, and albedo then follow in closed form.
//!
//! Modules:
//! - [`geometry`]: rigs, cameras, and arrangement classification
//! - [`render`]: synthetic Lambertian data with ground truth
//! - [`constraints`]: per-pixel constraint assembly
//! - [`solver`]: the per-pixel pipeline and image-level driver
//! - [`oracle`]: brute-force depth search used as a reference
//! - [`metrics`]: angular and depth errors, depth alignment
//! - [`io`]: PFM images, JSON configs, and manifests

pub mod constraints;
mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod parallel;
pub mod probe;
pub mod render;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::{
    classify_arrangement, ArrangementClass, ArrangementKind, CameraIntrinsics, OffsetMode, Sign,
    SymmetricPair, SymmetricRig, Vec3,
};
pub use parallel::Execution;
pub use render::{render, Falloff, RenderedStack, Scene};
pub use solver::{solve_image, SolveOptions, Surfel, SurfelMap, SurfelStatus};
