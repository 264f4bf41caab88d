//! CPU simulator for vision-based tactile sensors (DIGIT / GelSight style).
//!
//! The pipeline turns a contact height map into a tactile RGB image and a
//! marker motion field:
//!
//! 1. [`scene`] synthesizes height maps from parametric indenters (or they are
//!    read from disk, see [`config::raster_io`]).
//! 2. [`optics`] smooths the map, takes surface gradients and maps them to RGB
//!    with a small batch-normalized MLP.
//! 3. [`shadow`] casts planar shadows for point and directional lights and
//!    composites them onto the shaded image.
//! 4. [`marker`] computes dilate, shear and twist marker displacements and
//!    stamps the markers onto the image.
//!
//! Each stage has a calibration routine driven by sphere-indenter captures,
//! and [`metrics`] provides the image and marker error measures used to
//! evaluate the result.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod error;
pub mod marker;
pub mod metrics;
pub mod optics;
pub mod pipeline;
pub mod raster;
pub mod scene;
pub mod shadow;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};
pub use raster::{HeightMap, TactileImage, WeightMap};
pub use scene::{ContactPose, ContactState, IndenterShape, SensorGeometry};
