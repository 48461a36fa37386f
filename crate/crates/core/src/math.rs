//! Tree parameters and the transform constants derived from them.
//!
//! A tree is described by four shape parameters: trunk elongation `e`,
//! branch imbalance `b`, the angle between the two child branches, and the
//! da Vinci factor `v`. From these the branching triangle resting on a
//! parent's top edge is solved with the law of cosines, giving the child
//! scales and rotations used by every junction of the tree.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::geometry::Mat2;

/// The golden ratio `(1 + √5) / 2`.
pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

/// Default probability that a junction mirrors its branching triangle.
pub const DEFAULT_FLIP_PROBABILITY: f64 = 0.5;

/// Golden-ratio constants used by the golden tree family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenConstants {
    pub g: f64,
}

impl GoldenConstants {
    pub fn new() -> Self {
        Self {
            g: (1.0 + 5f64.sqrt()) / 2.0,
        }
    }
}

impl Default for GoldenConstants {
    fn default() -> Self {
        Self::new()
    }
}

/// Parameters of one tree `T(e, b, angle, v)` plus growth settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Trunk height / width.
    pub e: f64,
    /// Larger / smaller child width. Values below 1 are inverted.
    pub b: f64,
    /// Angle between the two child branches, radians in `(0, π)`.
    pub branching_angle: f64,
    /// Children-to-parent squared width ratio.
    pub v: f64,
    pub depth: u32,
    pub seed: u64,
    pub golden_mode: bool,
    /// Probability that a junction swaps its larger and smaller child.
    #[serde(default = "default_flip_probability")]
    pub flip_probability: f64,
}

fn default_flip_probability() -> f64 {
    DEFAULT_FLIP_PROBABILITY
}

impl TreeParams {
    /// Builds parameters with the angle given in degrees.
    pub fn new(e: f64, b: f64, angle_deg: f64, v: f64, depth: u32) -> Self {
        Self {
            e,
            b,
            branching_angle: angle_deg.to_radians(),
            v,
            depth,
            seed: 0,
            golden_mode: false,
            flip_probability: DEFAULT_FLIP_PROBABILITY,
        }
    }

    /// A golden tree: `b = g`, rotation angles locked at ratio `g`.
    pub fn golden(e: f64, angle_deg: f64, v: f64, depth: u32) -> Self {
        Self {
            golden_mode: true,
            ..Self::new(e, GOLDEN_RATIO, angle_deg, v, depth)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_flip_probability(mut self, p: f64) -> Self {
        self.flip_probability = p;
        self
    }

    pub fn branching_angle_deg(&self) -> f64 {
        self.branching_angle.to_degrees()
    }

    /// Imbalance actually used for construction: `b ≥ 1`, and `g` in golden mode.
    pub fn effective_b(&self) -> f64 {
        if self.golden_mode {
            GoldenConstants::new().g
        } else if self.b < 1.0 {
            1.0 / self.b
        } else {
            self.b
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let fields = [
            ("e", self.e),
            ("b", self.b),
            ("branching_angle", self.branching_angle),
            ("v", self.v),
            ("flip_probability", self.flip_probability),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(ParamError::NonFinite { name, value });
            }
        }
        if self.e <= 0.0 {
            return Err(ParamError::OutOfRange {
                name: "e",
                value: self.e,
                expected: "e > 0",
            });
        }
        // b < 1 is accepted and inverted; only golden mode ignores b entirely.
        if !self.golden_mode && self.b <= 0.0 {
            return Err(ParamError::OutOfRange {
                name: "b",
                value: self.b,
                expected: "b > 0 (values below 1 are inverted)",
            });
        }
        if self.branching_angle <= 0.0 || self.branching_angle >= PI {
            return Err(ParamError::OutOfRange {
                name: "branching_angle",
                value: self.branching_angle.to_degrees(),
                expected: "0 < angle < 180 degrees",
            });
        }
        if self.v <= 0.0 {
            return Err(ParamError::OutOfRange {
                name: "v",
                value: self.v,
                expected: "v > 0",
            });
        }
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(ParamError::OutOfRange {
                name: "flip_probability",
                value: self.flip_probability,
                expected: "0 <= p <= 1",
            });
        }
        Ok(())
    }
}

/// Constants applied at every junction of a tree.
///
/// `s_l` and `s_r` are the raw triangle-side scales; the scales actually
/// applied to children are `f * s_l` and `f * s_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchTransforms {
    pub s_l: f64,
    pub s_r: f64,
    pub f: f64,
    /// Counterclockwise rotation of the larger child, radians.
    pub gamma: f64,
    /// Clockwise rotation of the smaller child, radians.
    pub beta: f64,
    pub rot_l: Mat2,
    pub rot_r: Mat2,
}

impl BranchTransforms {
    /// Scale applied to the larger child.
    pub fn scale_l(&self) -> f64 {
        self.f * self.s_l
    }

    /// Scale applied to the smaller child.
    pub fn scale_r(&self) -> f64 {
        self.f * self.s_r
    }

    pub fn gamma_deg(&self) -> f64 {
        self.gamma.to_degrees()
    }

    pub fn beta_deg(&self) -> f64 {
        self.beta.to_degrees()
    }
}

/// Solves the branching triangle for `params`.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the check
pub fn derive_transforms(params: &TreeParams) -> Result<BranchTransforms, ParamError> {
    params.validate()?;
    let b = params.effective_b();
    let branching = params.branching_angle;

    let (s_l, s_r, gamma, beta) = if params.golden_mode {
        let g = GoldenConstants::new().g;
        let (s_l, s_r) = golden_scales();
        (s_l, s_r, branching / (g * g), branching / g)
    } else {
        // The triangle angle opposite the parent's top edge.
        let apex = PI - branching;
        let denom = 1.0 + b * b - 2.0 * b * apex.cos();
        if !(denom > 0.0) {
            return Err(ParamError::DegenerateTriangle { b, apex });
        }
        let s_r = 1.0 / denom.sqrt();
        let s_l = b * s_r;
        let cos_gamma = ((s_l * s_l - s_r * s_r + 1.0) / (2.0 * s_l)).clamp(-1.0, 1.0);
        let gamma = cos_gamma.acos();
        (s_l, s_r, gamma, PI - apex - gamma)
    };

    let f = davinci_factor(s_l, s_r, params.v)?;
    Ok(BranchTransforms {
        s_l,
        s_r,
        f,
        gamma,
        beta,
        rot_l: Mat2::rotation(gamma),
        rot_r: Mat2::rotation(beta),
    })
}

/// Factor `f` making `(f·s_l)² + (f·s_r)² = v`.
pub fn davinci_factor(s_l: f64, s_r: f64, v: f64) -> Result<f64, ParamError> {
    for (name, value) in [("s_l", s_l), ("s_r", s_r), ("v", v)] {
        if !value.is_finite() {
            return Err(ParamError::NonFinite { name, value });
        }
        if value <= 0.0 {
            return Err(ParamError::OutOfRange {
                name,
                value,
                expected: "> 0",
            });
        }
    }
    Ok((v / (s_l * s_l + s_r * s_r)).sqrt())
}

/// Child scales when both the da Vinci rule and a golden imbalance hold.
/// They do not depend on the branching angle.
pub fn golden_scales() -> (f64, f64) {
    let g = GoldenConstants::new().g;
    let s_r = 1.0 / (g * g + 1.0).sqrt();
    (g * s_r, s_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn golden_ratio_identity() {
        let g = GoldenConstants::new().g;
        assert_abs_diff_eq!(g * g, g + 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g, GOLDEN_RATIO, epsilon = 1e-15);
    }

    #[test]
    fn golden_tree_constants() {
        let p = TreeParams::new(5.0, 1.618034, 67.0, 1.0, 0);
        let t = derive_transforms(&p).unwrap();
        assert_abs_diff_eq!(t.s_l, 0.7323, epsilon = 5e-4);
        assert_abs_diff_eq!(t.s_r, 0.4526, epsilon = 5e-4);
        assert_abs_diff_eq!(t.scale_l(), 0.8507, epsilon = 5e-4);
        assert_abs_diff_eq!(t.scale_r(), 0.5257, epsilon = 5e-4);
        assert_abs_diff_eq!(t.gamma_deg(), 24.62, epsilon = 5e-3);
        assert_abs_diff_eq!(t.beta_deg(), 42.38, epsilon = 5e-3);
    }

    #[test]
    fn classic_pythagorean() {
        let t = derive_transforms(&TreeParams::new(1.0, 1.0, 90.0, 1.0, 0)).unwrap();
        assert_abs_diff_eq!(t.s_l, 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.s_r, 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.f, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.gamma_deg(), 45.0, epsilon = 1e-9);
        assert_abs_diff_eq!(t.beta_deg(), 45.0, epsilon = 1e-9);
    }

    #[test]
    fn imbalanced_right_triangle() {
        let t = derive_transforms(&TreeParams::new(5.0, 2.0, 90.0, 1.0, 0)).unwrap();
        assert_abs_diff_eq!(t.s_r, 1.0 / 5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.s_l, 2.0 / 5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.f, 1.0, epsilon = 1e-12);
        // Independent check: the triangle (1, s_l, s_r) closes.
        let apex_x = t.s_l * t.gamma.cos();
        let apex_y = t.s_l * t.gamma.sin();
        let back = ((1.0 - apex_x).powi(2) + apex_y.powi(2)).sqrt();
        assert_abs_diff_eq!(back, t.s_r, epsilon = 1e-12);
        assert_abs_diff_eq!(t.gamma_deg(), 26.565_051_177, epsilon = 1e-6);
        assert_abs_diff_eq!(t.beta_deg(), 63.434_948_823, epsilon = 1e-6);
    }

    #[test]
    fn golden_mode_angles() {
        let g = GoldenConstants::new().g;
        let t = derive_transforms(&TreeParams::golden(2.0 * g, 67.0, 1.0, 0)).unwrap();
        assert_abs_diff_eq!(t.gamma_deg(), 67.0 / (g * g), epsilon = 1e-9);
        assert_abs_diff_eq!(t.beta_deg(), 67.0 / g, epsilon = 1e-9);
        assert_abs_diff_eq!(t.gamma_deg(), 25.5917, epsilon = 1e-4);
        assert_abs_diff_eq!(t.beta_deg(), 41.4083, epsilon = 1e-4);
        assert_abs_diff_eq!(t.beta / t.gamma, g, epsilon = 1e-12);
        assert_abs_diff_eq!(t.beta + t.gamma, 67f64.to_radians(), epsilon = 1e-12);
    }

    #[test]
    fn davinci_examples() {
        let h = 0.5f64.sqrt();
        assert_abs_diff_eq!(davinci_factor(h, h, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        let f = davinci_factor(0.7323, 0.4526, 1.0).unwrap();
        assert_abs_diff_eq!(f, 1.1617, epsilon = 1e-3);
        assert_abs_diff_eq!(f * 0.7323, 0.8507, epsilon = 5e-4);
        assert_abs_diff_eq!(f * 0.4526, 0.5257, epsilon = 5e-4);
        let f = davinci_factor(0.8, 0.6, 1.25).unwrap();
        assert_abs_diff_eq!(f, 1.25f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!((f * 0.8).powi(2) + (f * 0.6).powi(2), 1.25, epsilon = 1e-14);
    }

    #[test]
    fn golden_scales_identity() {
        let (l, r) = golden_scales();
        assert_abs_diff_eq!(l, 0.85065, epsilon = 1e-5);
        assert_abs_diff_eq!(r, 0.52573, epsilon = 1e-5);
        assert_abs_diff_eq!(l / r, GOLDEN_RATIO, epsilon = 1e-14);
        assert_abs_diff_eq!(l * l + r * r, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn small_b_is_inverted() {
        let a = derive_transforms(&TreeParams::new(2.0, 0.5, 70.0, 1.0, 0)).unwrap();
        let b = derive_transforms(&TreeParams::new(2.0, 2.0, 70.0, 1.0, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(matches!(
            derive_transforms(&TreeParams::new(0.0, 1.0, 90.0, 1.0, 0)),
            Err(ParamError::OutOfRange { name: "e", .. })
        ));
        assert!(matches!(
            derive_transforms(&TreeParams::new(1.0, 1.0, 180.0, 1.0, 0)),
            Err(ParamError::OutOfRange {
                name: "branching_angle",
                ..
            })
        ));
        assert!(matches!(
            derive_transforms(&TreeParams::new(1.0, f64::NAN, 90.0, 1.0, 0)),
            Err(ParamError::NonFinite { name: "b", .. })
        ));
        assert!(derive_transforms(&TreeParams::new(1.0, 1.0, 90.0, -1.0, 0)).is_err());
        assert!(davinci_factor(0.0, 1.0, 1.0).is_err());
    }
}
