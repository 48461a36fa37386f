//! Points, 2×2 matrices and branch quads.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Row-major 2×2 matrix `[[a, b], [c, d]]`.
///
/// Points are treated as row vectors and multiplied on the left, so
/// [`Mat2::rotation`] turns points counterclockwise and its transpose turns
/// them clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// `[[cos θ, sin θ], [-sin θ, cos θ]]`.
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            a: c,
            b: s,
            c: -s,
            d: c,
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            a: self.a,
            b: self.c,
            c: self.b,
            d: self.d,
        }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    /// Row vector times matrix: `p * M`.
    #[inline]
    pub fn apply_row(&self, p: Point) -> Point {
        Point::new(p.x * self.a + p.y * self.c, p.x * self.b + p.y * self.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Ccw,
    Cw,
}

/// One branch rectangle.
///
/// Vertices are ordered bottom-left, bottom-right, top-right, top-left in the
/// branch's own frame; the edge `v[0] → v[1]` is the branch base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub vertices: [Point; 4],
    pub depth: u32,
}

impl Quad {
    pub fn new(vertices: [Point; 4], depth: u32) -> Self {
        Self { vertices, depth }
    }

    /// Axis-aligned trunk of width 1 and height `e` standing on the origin.
    pub fn root(e: f64) -> Self {
        Self::new(
            [
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, e),
                Point::new(0.0, e),
            ],
            0,
        )
    }

    pub fn unit_square() -> Self {
        Self::root(1.0)
    }

    fn map(&self, f: impl Fn(Point) -> Point) -> Self {
        let v = &self.vertices;
        Self::new([f(v[0]), f(v[1]), f(v[2]), f(v[3])], self.depth)
    }

    pub fn scale_about(&self, anchor: Point, s: f64) -> Self {
        self.map(|p| anchor + (p - anchor) * s)
    }

    pub fn translate(&self, delta: Point) -> Self {
        self.map(|p| p + delta)
    }

    pub fn rotate_about(&self, anchor: Point, angle: f64, sense: Sense) -> Self {
        let m = match sense {
            Sense::Ccw => Mat2::rotation(angle),
            Sense::Cw => Mat2::rotation(angle).transpose(),
        };
        self.rotate_about_with(anchor, &m)
    }

    /// Rotation about `anchor` with a precomputed matrix.
    #[inline]
    pub fn rotate_about_with(&self, anchor: Point, m: &Mat2) -> Self {
        self.map(|p| anchor + m.apply_row(p - anchor))
    }

    /// The side edge `v4 - v1`, i.e. the branch's "up" vector.
    pub fn side(&self) -> Point {
        self.vertices[3] - self.vertices[0]
    }

    /// Base width `|v2 - v1|`.
    pub fn width(&self) -> f64 {
        self.vertices[1].dist(self.vertices[0])
    }

    pub fn height(&self) -> f64 {
        self.vertices[3].dist(self.vertices[0])
    }

    /// Signed shoelace area (positive for counterclockwise vertices).
    pub fn signed_area(&self) -> f64 {
        let v = &self.vertices;
        0.5 * (v[0].cross(v[1]) + v[1].cross(v[2]) + v[2].cross(v[3]) + v[3].cross(v[0]))
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Point {
        let v = &self.vertices;
        (v[0] + v[1] + v[2] + v[3]) * 0.25
    }

    pub fn bbox(&self) -> BBox {
        let mut b = BBox::EMPTY;
        for p in &self.vertices {
            b.include(*p);
        }
        b
    }

    /// Whether `p` lies inside the quad (boundary counts as inside).
    pub fn contains(&self, p: Point) -> bool {
        let v = &self.vertices;
        let mut pos = false;
        let mut neg = false;
        for i in 0..4 {
            let c = (v[(i + 1) % 4] - v[i]).cross(p - v[i]);
            pos |= c > 0.0;
            neg |= c < 0.0;
        }
        !(pos && neg)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub const EMPTY: BBox = BBox {
        min_x: f64::INFINITY,
        min_y: f64::INFINITY,
        max_x: f64::NEG_INFINITY,
        max_y: f64::NEG_INFINITY,
    };

    pub fn is_empty(&self) -> bool {
        self.min_x > self.max_x || self.min_y > self.max_y
    }

    pub fn include(&mut self, p: Point) {
        self.min_x = self.min_x.min(p.x);
        self.min_y = self.min_y.min(p.y);
        self.max_x = self.max_x.max(p.x);
        self.max_y = self.max_y.max(p.y);
    }

    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains_box(&self, other: &BBox) -> bool {
        self.min_x <= other.min_x
            && self.min_y <= other.min_y
            && self.max_x >= other.max_x
            && self.max_y >= other.max_y
    }
}
