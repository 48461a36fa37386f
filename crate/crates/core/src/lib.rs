//! Parametric Pythagorean fractal trees.
//!
//! A tree `T(e, b, angle, v)` starts from a `1 × e` trunk and recursively
//! hangs two scaled, rotated copies of each branch on its top corners. The
//! crate derives the branching constants, grows the geometry (optionally on
//! a rayon pool), audits the branching rules, renders SVG/PNG images and
//! drives parameter sweeps.

pub mod error;
pub mod format;
pub mod generator;
pub mod geometry;
pub mod math;
pub mod metrics;
pub mod render;
pub mod sweep;

pub use error::{FormatError, GrowError, ParamError, RenderError, StructureError};
pub use generator::{
    flip_decision, grow, grow_streaming, grow_streaming_parallel, grow_with, quad_count, Execution,
    FlipStream, GrowConfig, NodePath, StreamSummary, TreeGeometry,
};
pub use geometry::{BBox, Mat2, Point, Quad, Sense};
pub use math::{
    davinci_factor, derive_transforms, golden_scales, BranchTransforms, GoldenConstants,
    TreeParams, GOLDEN_RATIO,
};
