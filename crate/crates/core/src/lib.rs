//! Spherical motion conditioning for omnidirectional (equirectangular) video.
//!
//! The crate covers the geometry of ERP frames on the unit sphere, HEALPix
//! seeding, point tracking, trajectory selection and drag-to-trajectory
//! estimation, speed-map conditioning with cross-normalized injection,
//! viewport rendering, and spherical motion metrics.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default).

pub mod controller;
pub mod erp_ops;
pub mod error;
pub mod healpix;
pub mod metrics;
pub mod par;
pub mod sme;
pub mod sphere;
pub mod synth;
pub mod tracking;

pub use error::{Error, ErrorKind, Mismatch, FormatError, Result};
pub use sphere::{ErpPoint, FrameGeometry, SpherePoint};
pub use tracking::{Trajectory, TrajectorySet};

/// Version string embedded in output metadata.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
