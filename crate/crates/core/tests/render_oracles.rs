use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ptree_core::render::{render_png, render_svg, ColorMap, RenderConfig, Rgb, Viewport};
use ptree_core::{grow, Point, TreeParams};

#[test]
fn raster_coverage_agrees_with_point_in_quad() {
    let g = grow(&TreeParams::new(3.0, 1.5, 75.0, 1.1, 9).with_seed(17)).unwrap();
    let cfg = RenderConfig {
        width: 640,
        height: 480,
        ..RenderConfig::default()
    };
    let img = render_png(&g, &cfg).unwrap();
    let vp = Viewport::fit(&g.bbox(), 640.0, 480.0, cfg.margin, cfg.fit);
    let quads: Vec<[Point; 4]> = g
        .quads
        .iter()
        .map(|q| q.vertices.map(|p| vp.to_pixel(p)))
        .collect();

    let inside = |c: Point, pts: &[Point; 4]| {
        let mut pos = false;
        let mut neg = false;
        for i in 0..4 {
            let x = (pts[(i + 1) % 4] - pts[i]).cross(c - pts[i]);
            pos |= x > 0.0;
            neg |= x < 0.0;
        }
        !(pos && neg)
    };
    // Distance from a point to a polygon edge, to exempt pixels straddling edges.
    let near_edge = |c: Point, pts: &[Point; 4]| {
        (0..4).any(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % 4]);
            let ab = b - a;
            let t = ((c - a).x * ab.x + (c - a).y * ab.y) / (ab.x * ab.x + ab.y * ab.y).max(1e-300);
            let proj = a + ab * t.clamp(0.0, 1.0);
            c.dist(proj) < 0.75
        })
    };

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut agree) = (0, 0);
    while checked < 10_000 {
        let (x, y) = (rng.gen_range(0..640u32), rng.gen_range(0..480u32));
        let c = Point::new(x as f64 + 0.5, y as f64 + 0.5);
        if quads.iter().any(|q| near_edge(c, q)) {
            continue;
        }
        checked += 1;
        let filled = img.get_pixel(x, y).0 != [255, 255, 255];
        let expected = quads.iter().any(|q| inside(c, q));
        agree += (filled == expected) as u32;
    }
    let rate = agree as f64 / checked as f64;
    assert!(rate >= 0.999, "agreement {rate}");
}

/// Coverage-thresholded overlap between our PNG and an independent SVG
/// rasterization of the same document. Polygons are drawn black so a pixel's
/// darkness is its coverage; a pixel counts as filled at 50% coverage.
fn svg_png_iou(depth: u32, supersample: u32) -> f64 {
    let g = grow(&TreeParams::new(3.0, 1.6, 67.0, 1.0, depth).with_seed(8)).unwrap();
    let cfg = RenderConfig {
        colormap: ColorMap {
            start: Rgb::BLACK,
            end: Rgb::BLACK,
        },
        supersample,
        ..RenderConfig::default()
    };
    let png = render_png(&g, &cfg).unwrap();
    let svg = render_svg(&g, &cfg).unwrap();

    let tree = resvg::usvg::Tree::from_str(&svg, &resvg::usvg::Options::default()).unwrap();
    let mut pixmap = resvg::tiny_skia::Pixmap::new(cfg.width, cfg.height).unwrap();
    resvg::render(
        &tree,
        resvg::tiny_skia::Transform::default(),
        &mut pixmap.as_mut(),
    );

    let (mut inter, mut union) = (0u64, 0u64);
    for (i, px) in png.pixels().enumerate() {
        let a = px.0[0] < 128;
        let s = &pixmap.data()[4 * i..4 * i + 4];
        // The letterbox outside the viewBox stays transparent.
        let b = s[3] == 255 && s[0] < 128;
        inter += (a && b) as u64;
        union += (a || b) as u64;
    }
    inter as f64 / union as f64
}

#[test]
fn svg_and_png_overlap() {
    // Deeper trees have sub-pixel twigs, where per-polygon alpha compositing
    // in the reference renderer under-counts coverage of abutting slivers.
    for depth in [4, 8, 10] {
        let iou = svg_png_iou(depth, 1);
        assert!(iou >= 0.98, "depth {depth}: IoU {iou}");
    }
}
