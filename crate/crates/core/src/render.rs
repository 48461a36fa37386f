//! SVG and PNG output.
//!
//! Quads are painted in emission order, so deeper branches cover their
//! ancestors. Fill colour ramps linearly with depth from the colormap's
//! start colour at the trunk to its end colour at the tips.

use std::fmt::{self, Write as _};
use std::io::Cursor;
use std::path::Path;
use std::str::FromStr;

use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::RenderError;
use crate::generator::{Execution, TreeGeometry};
use crate::geometry::{BBox, Point, Quad};

/// Side length of classifier-ready exports.
pub const EXPORT_SIZE: u32 = 224;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const BLACK: Rgb = Rgb([0, 0, 0]);
    pub const WHITE: Rgb = Rgb([255, 255, 255]);
    pub const GREEN: Rgb = Rgb([0, 255, 0]);

    pub fn hex(&self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0[0], self.0[1], self.0[2])
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

impl FromStr for Rgb {
    type Err = String;

    /// Parses `#rrggbb` or `rrggbb`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let h = s.strip_prefix('#').unwrap_or(s);
        if h.len() != 6 || !h.is_ascii() {
            return Err(format!("expected #rrggbb, got {s:?}"));
        }
        let c = |i: usize| u8::from_str_radix(&h[i..i + 2], 16).map_err(|e| format!("{s:?}: {e}"));
        Ok(Rgb([c(0)?, c(2)?, c(4)?]))
    }
}

/// Linear depth colour ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorMap {
    pub start: Rgb,
    pub end: Rgb,
}

impl Default for ColorMap {
    fn default() -> Self {
        Self {
            start: Rgb::BLACK,
            end: Rgb::GREEN,
        }
    }
}

impl ColorMap {
    /// Colour at `t ∈ [0, 1]`.
    pub fn at(&self, t: f64) -> Rgb {
        let t = t.clamp(0.0, 1.0);
        let mut out = [0u8; 3];
        for (o, (s, e)) in out
            .iter_mut()
            .zip(self.start.0.iter().zip(self.end.0.iter()))
        {
            let (s, e) = (*s as f64, *e as f64);
            *o = (s + (e - s) * t).round() as u8;
        }
        Rgb(out)
    }

    /// Colour of a quad at `depth` in a tree of depth `max_depth`.
    pub fn for_depth(&self, depth: u32, max_depth: u32) -> Rgb {
        if max_depth == 0 {
            self.start
        } else {
            self.at(depth as f64 / max_depth as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FitMode {
    /// Fit the bounding box, preserving aspect ratio, centred.
    #[default]
    Contain,
    /// Fill the canvas, distorting aspect ratio.
    Stretch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    /// Fraction of each canvas dimension kept clear on every side, in `[0, 0.5)`.
    pub margin: f64,
    /// `None` leaves SVG backgrounds transparent; PNGs then use white.
    pub background: Option<Rgb>,
    pub colormap: ColorMap,
    pub fit: FitMode,
    /// Samples per pixel along each axis for PNG output.
    pub supersample: u32,
    pub execution: Execution,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 1024,
            height: 1024,
            margin: 0.02,
            background: Some(Rgb::WHITE),
            colormap: ColorMap::default(),
            fit: FitMode::Contain,
            supersample: 1,
            execution: Execution::default(),
        }
    }
}

impl RenderConfig {
    /// 224×224 letterboxed on white, supersampled.
    pub fn export_224() -> Self {
        Self {
            width: EXPORT_SIZE,
            height: EXPORT_SIZE,
            margin: 0.0,
            background: Some(Rgb::WHITE),
            supersample: 4,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::Config(format!(
                "canvas must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        if !(0.0..0.5).contains(&self.margin) {
            return Err(RenderError::Config(format!(
                "margin {} not in [0, 0.5)",
                self.margin
            )));
        }
        if self.supersample == 0 || self.supersample > 16 {
            return Err(RenderError::Config(format!(
                "supersample {} not in 1..=16",
                self.supersample
            )));
        }
        Ok(())
    }

    fn background_or_white(&self) -> Rgb {
        self.background.unwrap_or(Rgb::WHITE)
    }
}

/// Maps geometry coordinates (y up) to pixel coordinates (y down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub scale_x: f64,
    pub scale_y: f64,
    pub offset_x: f64,
    pub offset_y: f64,
    /// Bounding box grown by the margin; this is the SVG viewBox region.
    pub padded: BBox,
}

impl Viewport {
    pub fn fit(bbox: &BBox, width: f64, height: f64, margin: f64, fit: FitMode) -> Self {
        // Degenerate extents still get a non-zero box.
        let bw = bbox.width().max(1e-12);
        let bh = bbox.height().max(1e-12);
        let grow = 1.0 / (1.0 - 2.0 * margin);
        let (pw, ph) = (bw * grow, bh * grow);
        let cx = 0.5 * (bbox.min_x + bbox.max_x);
        let cy = 0.5 * (bbox.min_y + bbox.max_y);
        let padded = BBox {
            min_x: cx - 0.5 * pw,
            max_x: cx + 0.5 * pw,
            min_y: cy - 0.5 * ph,
            max_y: cy + 0.5 * ph,
        };
        let (sx, sy) = match fit {
            FitMode::Contain => {
                let s = (width / pw).min(height / ph);
                (s, s)
            }
            FitMode::Stretch => (width / pw, height / ph),
        };
        Self {
            scale_x: sx,
            scale_y: sy,
            offset_x: 0.5 * width - cx * sx,
            offset_y: 0.5 * height + cy * sy,
            padded,
        }
    }

    #[inline]
    pub fn to_pixel(&self, p: Point) -> Point {
        Point::new(
            self.offset_x + p.x * self.scale_x,
            self.offset_y - p.y * self.scale_y,
        )
    }
}

fn check_geometry(geometry: &TreeGeometry) -> Result<BBox, RenderError> {
    let bbox = geometry.bbox();
    if geometry.is_empty() || bbox.is_empty() {
        return Err(RenderError::Empty);
    }
    Ok(bbox)
}

/// One `<polygon>` per quad in painter's order. The viewBox is the padded
/// bounding box with y negated so the tree stands upright.
pub fn render_svg(geometry: &TreeGeometry, cfg: &RenderConfig) -> Result<String, RenderError> {
    cfg.validate()?;
    let bbox = check_geometry(geometry)?;
    let vp = Viewport::fit(
        &bbox,
        cfg.width as f64,
        cfg.height as f64,
        cfg.margin,
        cfg.fit,
    );
    let pb = vp.padded;
    let aspect = match cfg.fit {
        FitMode::Contain => "xMidYMid meet",
        FitMode::Stretch => "none",
    };
    let mut s = String::with_capacity(256 + geometry.len() * 120);
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" \
         viewBox=\"{} {} {} {}\" preserveAspectRatio=\"{}\">",
        cfg.width,
        cfg.height,
        pb.min_x,
        -pb.max_y,
        pb.width(),
        pb.height(),
        aspect
    )
    .unwrap();
    let p = &geometry.params;
    writeln!(
        s,
        "<title>T({}, {}, {}, {}) depth {} seed {}</title>",
        p.e,
        p.b,
        p.branching_angle_deg(),
        p.v,
        p.depth,
        p.seed
    )
    .unwrap();
    if let Some(bg) = cfg.background {
        writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
            pb.min_x,
            -pb.max_y,
            pb.width(),
            pb.height(),
            bg
        )
        .unwrap();
    }
    let max_depth = geometry.depth();
    for q in &geometry.quads {
        let v = &q.vertices;
        writeln!(
            s,
            "<polygon points=\"{},{} {},{} {},{} {},{}\" fill=\"{}\"/>",
            v[0].x,
            -v[0].y,
            v[1].x,
            -v[1].y,
            v[2].x,
            -v[2].y,
            v[3].x,
            -v[3].y,
            cfg.colormap.for_depth(q.depth, max_depth)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_svg(
    geometry: &TreeGeometry,
    cfg: &RenderConfig,
    path: &Path,
) -> Result<(), RenderError> {
    std::fs::write(path, render_svg(geometry, cfg)?)?;
    Ok(())
}

/// A quad already mapped to pixel space.
#[derive(Debug, Clone, Copy)]
struct PixelQuad {
    pts: [Point; 4],
    min_y: f64,
    max_y: f64,
    color: Rgb,
}

impl PixelQuad {
    /// Pixel-centre span `[x0, x1)` covered on the row sampled at `yc`.
    #[inline]
    fn span(&self, yc: f64, width: usize) -> Option<(usize, usize)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..4 {
            let (p, q) = (self.pts[i], self.pts[(i + 1) % 4]);
            // Half-open in y so a shared vertex is counted once.
            if (p.y <= yc && yc < q.y) || (q.y <= yc && yc < p.y) {
                let x = p.x + (yc - p.y) * (q.x - p.x) / (q.y - p.y);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if lo > hi {
            return None;
        }
        // Pixel px is covered when its centre px + 0.5 lies in [lo, hi).
        let x0 = (lo - 0.5).ceil().max(0.0);
        let x1 = (hi - 0.5).ceil().min(width as f64);
        (x0 < x1).then_some((x0 as usize, x1 as usize))
    }
}

/// Rasterizes rows `row0..row0 + band.len() / (3 * width)` into `band`.
fn raster_band(band: &mut [u8], row0: usize, width: usize, quads: &[PixelQuad]) {
    let rows = band.len() / (3 * width);
    let (top, bottom) = (row0 as f64, (row0 + rows) as f64);
    for q in quads {
        if q.max_y < top + 0.5 || q.min_y > bottom {
            continue;
        }
        let r0 = ((q.min_y - 0.5).ceil().max(top)) as usize;
        let r1 = ((q.max_y - 0.5).floor().min(bottom - 1.0)) as isize;
        if (r1 as f64) < r0 as f64 {
            continue;
        }
        for row in r0..=(r1 as usize) {
            if let Some((x0, x1)) = q.span(row as f64 + 0.5, width) {
                let off = (row - row0) * width * 3;
                for px in band[off + 3 * x0..off + 3 * x1].chunks_exact_mut(3) {
                    px.copy_from_slice(&q.color.0);
                }
            }
        }
    }
}

const BAND_ROWS: usize = 16;

fn rasterize(
    geometry: &TreeGeometry,
    bbox: &BBox,
    cfg: &RenderConfig,
    width: usize,
    height: usize,
) -> Vec<u8> {
    let vp = Viewport::fit(bbox, width as f64, height as f64, cfg.margin, cfg.fit);
    let max_depth = geometry.depth();
    let prep = |q: &Quad| {
        let pts = q.vertices.map(|p| vp.to_pixel(p));
        let min_y = pts.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let max_y = pts.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        PixelQuad {
            pts,
            min_y,
            max_y,
            color: cfg.colormap.for_depth(q.depth, max_depth),
        }
    };
    let bg = cfg.background_or_white().0;
    let mut buf: Vec<u8> = bg
        .iter()
        .copied()
        .cycle()
        .take(width * height * 3)
        .collect();
    let band_len = BAND_ROWS * width * 3;

    #[cfg(feature = "parallel")]
    if cfg.execution == Execution::Parallel {
        use rayon::prelude::*;
        let quads: Vec<PixelQuad> = geometry.quads.par_iter().map(prep).collect();
        buf.par_chunks_mut(band_len)
            .enumerate()
            .for_each(|(i, band)| raster_band(band, i * BAND_ROWS, width, &quads));
        return buf;
    }

    let quads: Vec<PixelQuad> = geometry.quads.iter().map(prep).collect();
    for (i, band) in buf.chunks_mut(band_len).enumerate() {
        raster_band(band, i * BAND_ROWS, width, &quads);
    }
    buf
}

/// Box-filters an `ss`-times larger RGB buffer down to `width × height`.
fn downsample(src: &[u8], width: usize, height: usize, ss: usize) -> Vec<u8> {
    let sw = width * ss;
    let n = (ss * ss) as u32;
    let mut out = vec![0u8; width * height * 3];
    for y in 0..height {
        for x in 0..width {
            let mut acc = [0u32; 3];
            for dy in 0..ss {
                let row = (y * ss + dy) * sw;
                for dx in 0..ss {
                    let i = 3 * (row + x * ss + dx);
                    for c in 0..3 {
                        acc[c] += src[i + c] as u32;
                    }
                }
            }
            let o = 3 * (y * width + x);
            for c in 0..3 {
                out[o + c] = ((acc[c] + n / 2) / n) as u8;
            }
        }
    }
    out
}

/// Scanline rasterization sampled at pixel centres.
pub fn render_png(geometry: &TreeGeometry, cfg: &RenderConfig) -> Result<RgbImage, RenderError> {
    cfg.validate()?;
    let bbox = check_geometry(geometry)?;
    let (w, h) = (cfg.width as usize, cfg.height as usize);
    let ss = cfg.supersample as usize;
    let pixels = if ss == 1 {
        rasterize(geometry, &bbox, cfg, w, h)
    } else {
        let big = rasterize(geometry, &bbox, cfg, w * ss, h * ss);
        downsample(&big, w, h, ss)
    };
    Ok(RgbImage::from_raw(cfg.width, cfg.height, pixels).expect("buffer matches canvas"))
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>, RenderError> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn write_png(
    geometry: &TreeGeometry,
    cfg: &RenderConfig,
    path: &Path,
) -> Result<(), RenderError> {
    std::fs::write(path, encode_png(&render_png(geometry, cfg)?)?)?;
    Ok(())
}

fn fmt_num(x: f64) -> String {
    // Trim float noise such as 67.00000000000001 from degree conversions.
    let r = (x * 1e9).round() / 1e9;
    format!("{r}")
}

/// `T_e{e}_b{b}_a{deg}_v{v}_d{depth}_s{seed}.{ext}`
pub fn file_name(params: &crate::math::TreeParams, ext: &str) -> String {
    let b = if params.golden_mode {
        "g".to_string()
    } else {
        fmt_num(params.b)
    };
    format!(
        "T_e{}_b{}_a{}_v{}_d{}_s{}.{}",
        fmt_num(params.e),
        b,
        fmt_num(params.branching_angle_deg()),
        fmt_num(params.v),
        params.depth,
        params.seed,
        ext
    )
}
