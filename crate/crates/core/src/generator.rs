//! Recursive tree growth.
//!
//! Every junction scales the parent about one of its bottom corners, shifts
//! the copy up by the parent's side edge and rotates it about the same
//! corner. Whether a junction mirrors its branching triangle is decided by
//! hashing the seed with the node's root-to-node path, so the tree is the
//! same no matter which order (or how many threads) builds it.

use serde::{Deserialize, Serialize};

use crate::error::GrowError;
use crate::geometry::{BBox, Mat2, Quad};
use crate::math::{derive_transforms, BranchTransforms, TreeParams};

pub const GENERATOR_VERSION: &str = concat!("ptree-core/", env!("CARGO_PKG_VERSION"));

/// Default guard on tree depth: 2^29 - 1 quads at depth 28.
pub const DEFAULT_DEPTH_CAP: u32 = 28;

/// Subtrees smaller than this are built on the current thread.
#[cfg(feature = "parallel")]
const PAR_CUTOFF: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrowConfig {
    pub depth_cap: u32,
    /// `Parallel` falls back to serial when built without the `parallel` feature.
    pub execution: Execution,
}

impl Default for GrowConfig {
    fn default() -> Self {
        Self {
            depth_cap: DEFAULT_DEPTH_CAP,
            execution: Execution::default(),
        }
    }
}

impl GrowConfig {
    pub fn serial() -> Self {
        Self {
            execution: Execution::Serial,
            ..Self::default()
        }
    }

    fn parallel(&self) -> bool {
        cfg!(feature = "parallel") && self.execution == Execution::Parallel
    }
}

/// Number of quads in a full tree of the given depth.
pub fn quad_count(depth: u32) -> u64 {
    (1u64 << (depth + 1)) - 1
}

/// Position of a node: the turns (0 = left, 1 = right) taken from the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct NodePath {
    bits: u64,
    len: u32,
}

impl NodePath {
    pub const ROOT: NodePath = NodePath { bits: 0, len: 0 };

    pub fn new(bits: u64, len: u32) -> Self {
        assert!(len < 64, "path too long");
        Self {
            bits: bits & ((1u64 << len) - 1),
            len,
        }
    }

    pub fn left(self) -> Self {
        Self {
            bits: self.bits << 1,
            len: self.len + 1,
        }
    }

    pub fn right(self) -> Self {
        Self {
            bits: (self.bits << 1) | 1,
            len: self.len + 1,
        }
    }

    pub fn depth(&self) -> u32 {
        self.len
    }

    pub fn is_root(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Unique integer per path: the bits behind a leading sentinel 1.
    fn key(&self) -> u64 {
        (1u64 << self.len) | self.bits
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes several words into one well-distributed 64-bit value.
pub fn hash_words(words: &[u64]) -> u64 {
    words.iter().fold(0x5851_f42d_4c95_7f2d, |acc, &w| {
        splitmix64(acc ^ splitmix64(w))
    })
}

/// Seeded, order-independent source of junction flips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipStream {
    pub seed: u64,
    pub probability: f64,
}

impl FlipStream {
    pub fn new(seed: u64, probability: f64) -> Self {
        Self { seed, probability }
    }

    /// Uniform value in `[0, 1)` attached to a node.
    #[inline]
    pub fn uniform(&self, path: NodePath) -> f64 {
        let h = splitmix64(self.seed ^ splitmix64(path.key()));
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn flips(&self, path: NodePath) -> bool {
        self.uniform(path) < self.probability
    }
}

/// Fair flip for the junction at `path`.
pub fn flip_decision(seed: u64, path: NodePath) -> bool {
    FlipStream::new(seed, 0.5).flips(path)
}

/// A grown tree: quads in preorder (parent, left subtree, right subtree).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeGeometry {
    pub quads: Vec<Quad>,
    pub params: TreeParams,
    pub transform_constants: BranchTransforms,
    pub generator_version: String,
}

impl TreeGeometry {
    pub fn depth(&self) -> u32 {
        self.params.depth
    }

    pub fn len(&self) -> usize {
        self.quads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quads.is_empty()
    }

    pub fn bbox(&self) -> BBox {
        self.quads
            .iter()
            .fold(BBox::EMPTY, |acc, q| acc.union(&q.bbox()))
    }

    /// Regrows the tree from its recorded parameters.
    pub fn regrow(&self) -> Result<TreeGeometry, GrowError> {
        grow(&self.params)
    }
}

/// Per-tree constants laid out for the inner loop.
#[derive(Debug, Clone, Copy)]
struct Junction {
    scale_l: f64,
    scale_r: f64,
    /// Counterclockwise by gamma.
    ccw_gamma: Mat2,
    /// Counterclockwise by beta.
    ccw_beta: Mat2,
    /// Clockwise by gamma.
    cw_gamma: Mat2,
    /// Clockwise by beta.
    cw_beta: Mat2,
    flips: FlipStream,
    max_depth: u32,
}

impl Junction {
    fn new(params: &TreeParams, t: &BranchTransforms) -> Self {
        Self {
            scale_l: t.scale_l(),
            scale_r: t.scale_r(),
            ccw_gamma: t.rot_l,
            ccw_beta: t.rot_r,
            cw_gamma: t.rot_l.transpose(),
            cw_beta: t.rot_r.transpose(),
            flips: FlipStream::new(params.seed, params.flip_probability),
            max_depth: params.depth,
        }
    }

    /// The two children of `parent`.
    #[inline]
    fn children(&self, parent: &Quad, path: NodePath) -> (Quad, Quad) {
        let (sl, rl, sr, rr) = if self.flips.flips(path) {
            (self.scale_r, &self.ccw_beta, self.scale_l, &self.cw_gamma)
        } else {
            (self.scale_l, &self.ccw_gamma, self.scale_r, &self.cw_beta)
        };
        let v = &parent.vertices;
        let dx = v[3] - v[0];
        let depth = parent.depth + 1;

        // Left child hangs from the parent's top-left corner.
        let a = v[3];
        let left = Quad::new(
            [
                a,
                a + rl.apply_row((v[1] - v[0]) * sl),
                a + rl.apply_row((v[2] - v[0]) * sl),
                a + rl.apply_row((v[3] - v[0]) * sl),
            ],
            depth,
        );
        // Right child hangs from the parent's top-right corner.
        let a = v[1] + dx;
        let right = Quad::new(
            [
                a + rr.apply_row((v[0] - v[1]) * sr),
                a,
                a + rr.apply_row((v[2] - v[1]) * sr),
                a + rr.apply_row((v[3] - v[1]) * sr),
            ],
            depth,
        );
        (left, right)
    }
}

fn prepare(
    params: &TreeParams,
    cfg: &GrowConfig,
) -> Result<(BranchTransforms, Junction), GrowError> {
    let t = derive_transforms(params)?;
    if params.depth > cfg.depth_cap {
        return Err(GrowError::DepthCap {
            depth: params.depth,
            cap: cfg.depth_cap,
        });
    }
    Ok((t, Junction::new(params, &t)))
}

/// Grows the full tree with the default configuration.
pub fn grow(params: &TreeParams) -> Result<TreeGeometry, GrowError> {
    grow_with(params, &GrowConfig::default())
}

/// Grows the full tree. The output order is the same preorder whatever the
/// execution mode.
pub fn grow_with(params: &TreeParams, cfg: &GrowConfig) -> Result<TreeGeometry, GrowError> {
    let (transforms, junction) = prepare(params, cfg)?;
    let n = quad_count(params.depth) as usize;
    let root = Quad::root(params.e);
    let mut quads = vec![root; n];
    if cfg.parallel() {
        #[cfg(feature = "parallel")]
        fill_par(&mut quads, root, NodePath::ROOT, &junction);
    } else {
        fill(&mut quads, root, NodePath::ROOT, &junction);
    }
    Ok(TreeGeometry {
        quads,
        params: *params,
        transform_constants: transforms,
        generator_version: GENERATOR_VERSION.to_string(),
    })
}

// `out` holds exactly the subtree rooted at `node` in preorder.
fn fill(out: &mut [Quad], node: Quad, path: NodePath, j: &Junction) {
    out[0] = node;
    if out.len() == 1 {
        return;
    }
    let half = out.len() / 2;
    let (l, r) = out[1..].split_at_mut(half);
    let (lq, rq) = j.children(&node, path);
    fill(l, lq, path.left(), j);
    fill(r, rq, path.right(), j);
}

#[cfg(feature = "parallel")]
fn fill_par(out: &mut [Quad], node: Quad, path: NodePath, j: &Junction) {
    if out.len() < PAR_CUTOFF {
        return fill(out, node, path, j);
    }
    out[0] = node;
    let half = out.len() / 2;
    let (l, r) = out[1..].split_at_mut(half);
    let (lq, rq) = j.children(&node, path);
    rayon::join(
        || fill_par(l, lq, path.left(), j),
        || fill_par(r, rq, path.right(), j),
    );
}

/// Count and extent of a streamed tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub count: u64,
    pub bbox: BBox,
}

impl StreamSummary {
    const EMPTY: StreamSummary = StreamSummary {
        count: 0,
        bbox: BBox::EMPTY,
    };

    #[cfg(feature = "parallel")]
    fn merge(self, other: StreamSummary) -> StreamSummary {
        StreamSummary {
            count: self.count + other.count,
            bbox: self.bbox.union(&other.bbox),
        }
    }
}

type SinkResult<E> = Result<(), E>;

/// Emits every quad to `sink` in preorder without materializing the tree.
pub fn grow_streaming<F, E>(
    params: &TreeParams,
    cfg: &GrowConfig,
    mut sink: F,
) -> Result<StreamSummary, GrowError>
where
    F: FnMut(&Quad) -> SinkResult<E>,
    E: Into<Box<dyn std::error::Error + Send + Sync>>,
{
    let (_, junction) = prepare(params, cfg)?;
    let mut summary = StreamSummary::EMPTY;
    stream(
        Quad::root(params.e),
        NodePath::ROOT,
        &junction,
        &mut |q: &Quad| {
            summary.count += 1;
            summary.bbox = summary.bbox.union(&q.bbox());
            sink(q)
        },
    )
    .map_err(|e| GrowError::Sink(e.into()))?;
    Ok(summary)
}

fn stream<F, E>(node: Quad, path: NodePath, j: &Junction, sink: &mut F) -> SinkResult<E>
where
    F: FnMut(&Quad) -> SinkResult<E>,
{
    sink(&node)?;
    if node.depth == j.max_depth {
        return Ok(());
    }
    let (l, r) = j.children(&node, path);
    stream(l, path.left(), j, sink)?;
    stream(r, path.right(), j, sink)
}

/// Streams subtrees across worker threads. The sink sees every quad exactly
/// once in an unspecified interleaving; `Execution::Serial` restores preorder.
pub fn grow_streaming_parallel<F, E>(
    params: &TreeParams,
    cfg: &GrowConfig,
    sink: F,
) -> Result<StreamSummary, GrowError>
where
    F: Fn(&Quad) -> SinkResult<E> + Sync,
    E: Into<Box<dyn std::error::Error + Send + Sync>> + Send,
{
    if !cfg.parallel() {
        return grow_streaming(params, cfg, &sink);
    }
    #[cfg(feature = "parallel")]
    {
        let (_, junction) = prepare(params, cfg)?;
        stream_par(Quad::root(params.e), NodePath::ROOT, &junction, &sink)
            .map_err(|e| GrowError::Sink(e.into()))
    }
    #[cfg(not(feature = "parallel"))]
    unreachable!()
}

#[cfg(feature = "parallel")]
fn stream_par<F, E>(node: Quad, path: NodePath, j: &Junction, sink: &F) -> Result<StreamSummary, E>
where
    F: Fn(&Quad) -> SinkResult<E> + Sync,
    E: Send,
{
    let remaining = j.max_depth - node.depth;
    if quad_count(remaining) < PAR_CUTOFF as u64 {
        let mut summary = StreamSummary::EMPTY;
        stream(node, path, j, &mut |q: &Quad| {
            summary.count += 1;
            summary.bbox = summary.bbox.union(&q.bbox());
            sink(q)
        })?;
        return Ok(summary);
    }
    sink(&node)?;
    let own = StreamSummary {
        count: 1,
        bbox: node.bbox(),
    };
    let (l, r) = j.children(&node, path);
    let (ls, rs) = rayon::join(
        || stream_par(l, path.left(), j, sink),
        || stream_par(r, path.right(), j, sink),
    );
    Ok(own.merge(ls?).merge(rs?))
}
