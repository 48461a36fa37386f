use std::io;

use thiserror::Error;

/// Invalid tree parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{name}` is not finite ({value})")]
    NonFinite { name: &'static str, value: f64 },
    #[error("parameter `{name}` = {value} out of range, expected {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("degenerate branching triangle for b = {b}, apex = {apex} rad")]
    DegenerateTriangle { b: f64, apex: f64 },
}

#[derive(Debug, Error)]
pub enum GrowError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("depth {depth} exceeds the depth cap {cap}")]
    DepthCap { depth: u32, cap: u32 },
    #[error("quad sink failed: {0}")]
    Sink(Box<dyn std::error::Error + Send + Sync>),
}

/// Geometry that does not have the shape of a full binary tree.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StructureError {
    #[error("expected {expected} quads for depth {depth}, found {found}")]
    Count {
        depth: u32,
        expected: u64,
        found: u64,
    },
    #[error("quad {index} at depth {depth} has no parent in preorder")]
    Orphan { index: usize, depth: u32 },
    #[error("junction at quad {index} has {children} children")]
    Arity { index: usize, children: usize },
    #[error("quad {index} has depth {depth} beyond the tree depth {max}")]
    TooDeep { index: usize, depth: u32, max: u32 },
    #[error("level {level} out of range for a depth-{depth} tree")]
    Level { level: u32, depth: u32 },
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic bytes")]
    Magic,
    #[error("unsupported format version {0}")]
    Version(u16),
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Params(#[from] ParamError),
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("invalid render config: {0}")]
    Config(String),
    #[error("nothing to render")]
    Empty,
    #[error(transparent)]
    Image(#[from] image::ImageError),
}
