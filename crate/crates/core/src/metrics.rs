//! Junction and level audits of grown geometry.
//!
//! A branch's width is its base edge `|v2 - v1|`. At every junction the
//! children's squared widths should sum to `v` times the parent's, and the
//! shoelace areas of each level should form a geometric sequence with
//! ratio `v`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::StructureError;
use crate::generator::{quad_count, TreeGeometry};
use crate::geometry::{BBox, Quad};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditOptions {
    /// Junction ratio to check against; defaults to the tree's own `v`.
    pub expected_v: Option<f64>,
    pub tolerance: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            expected_v: None,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionRecord {
    /// Index of the parent quad.
    pub parent: usize,
    pub left: usize,
    pub right: usize,
    pub depth: u32,
    pub parent_width: f64,
    pub left_width: f64,
    pub right_width: f64,
    /// `(w_l² + w_r²) / w_p²`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: u32,
    pub count: u64,
    pub area: f64,
    pub expected_area: f64,
    /// Largest `|ratio - v|` over junctions whose children sit on this level.
    pub max_ratio_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionAudit {
    pub expected_v: f64,
    pub tolerance: f64,
    pub junctions: Vec<JunctionRecord>,
    pub levels: Vec<LevelStats>,
    /// Indices into `junctions` whose ratio misses `expected_v`.
    pub violations: Vec<usize>,
    pub bbox: BBox,
    /// Horizontal offset of the area centroid from the trunk axis, over tree height.
    pub lean: f64,
}

impl JunctionAudit {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_ratio_deviation(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| l.max_ratio_deviation)
            .fold(0.0, f64::max)
    }

    pub fn report(&self) -> AuditReport {
        AuditReport {
            levels: self.levels.clone(),
            summary: AuditSummary {
                quads: self.levels.iter().map(|l| l.count).sum(),
                junctions: self.junctions.len() as u64,
                violations: self.violations.len() as u64,
                expected_v: self.expected_v,
                tolerance: self.tolerance,
                max_ratio_deviation: self.max_ratio_deviation(),
                bbox: self.bbox,
                lean: self.lean,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub quads: u64,
    pub junctions: u64,
    pub violations: u64,
    pub expected_v: f64,
    pub tolerance: f64,
    pub max_ratio_deviation: f64,
    pub bbox: BBox,
    pub lean: f64,
}

/// Per-level rows plus a summary block, as written to CSV/JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub levels: Vec<LevelStats>,
    pub summary: AuditSummary,
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,count,area,expected_area,max_ratio_deviation\n");
        for l in &self.levels {
            writeln!(
                s,
                "{},{},{},{},{}",
                l.level, l.count, l.area, l.expected_area, l.max_ratio_deviation
            )
            .unwrap();
        }
        let m = &self.summary;
        s.push_str("\nkey,value\n");
        for (k, v) in [
            ("quads", m.quads.to_string()),
            ("junctions", m.junctions.to_string()),
            ("violations", m.violations.to_string()),
            ("expected_v", m.expected_v.to_string()),
            ("tolerance", m.tolerance.to_string()),
            ("max_ratio_deviation", m.max_ratio_deviation.to_string()),
            ("bbox_min_x", m.bbox.min_x.to_string()),
            ("bbox_min_y", m.bbox.min_y.to_string()),
            ("bbox_max_x", m.bbox.max_x.to_string()),
            ("bbox_max_y", m.bbox.max_y.to_string()),
            ("lean", m.lean.to_string()),
        ] {
            writeln!(s, "{k},{v}").unwrap();
        }
        s
    }
}

/// Parent index of every quad (root maps to `None`), rebuilt from preorder.
pub fn parent_indices(geometry: &TreeGeometry) -> Result<Vec<Option<usize>>, StructureError> {
    let depth = geometry.depth();
    let expected = quad_count(depth);
    let found = geometry.quads.len() as u64;
    if found != expected {
        return Err(StructureError::Count {
            depth,
            expected,
            found,
        });
    }
    let mut parents = Vec::with_capacity(geometry.quads.len());
    // Most recent quad seen at each depth.
    let mut last: Vec<usize> = Vec::with_capacity(depth as usize + 1);
    let mut children = vec![0u8; geometry.quads.len()];
    for (i, q) in geometry.quads.iter().enumerate() {
        if q.depth > depth {
            return Err(StructureError::TooDeep {
                index: i,
                depth: q.depth,
                max: depth,
            });
        }
        let d = q.depth as usize;
        if d == 0 {
            if i != 0 {
                return Err(StructureError::Orphan { index: i, depth: 0 });
            }
            parents.push(None);
        } else {
            if last.len() < d {
                return Err(StructureError::Orphan {
                    index: i,
                    depth: q.depth,
                });
            }
            let p = last[d - 1];
            children[p] += 1;
            if children[p] > 2 {
                return Err(StructureError::Arity {
                    index: p,
                    children: children[p] as usize,
                });
            }
            parents.push(Some(p));
        }
        last.truncate(d);
        last.push(i);
    }
    for (i, q) in geometry.quads.iter().enumerate() {
        let want = if q.depth < depth { 2 } else { 0 };
        if children[i] != want {
            return Err(StructureError::Arity {
                index: i,
                children: children[i] as usize,
            });
        }
    }
    Ok(parents)
}

pub fn audit(geometry: &TreeGeometry) -> Result<JunctionAudit, StructureError> {
    audit_with(geometry, &AuditOptions::default())
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the check
pub fn audit_with(
    geometry: &TreeGeometry,
    opts: &AuditOptions,
) -> Result<JunctionAudit, StructureError> {
    let parents = parent_indices(geometry)?;
    let quads = &geometry.quads;
    let depth = geometry.depth();
    let expected_v = opts.expected_v.unwrap_or(geometry.params.v);

    let mut kids: Vec<[usize; 2]> = vec![[usize::MAX; 2]; quads.len()];
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            let slot = if kids[p][0] == usize::MAX { 0 } else { 1 };
            kids[p][slot] = i;
        }
    }

    let junctions: Vec<JunctionRecord> = quads
        .iter()
        .enumerate()
        .filter(|(_, q)| q.depth < depth)
        .map(|(i, q)| {
            let [l, r] = kids[i];
            let (wp, wl, wr) = (q.width(), quads[l].width(), quads[r].width());
            JunctionRecord {
                parent: i,
                left: l,
                right: r,
                depth: q.depth,
                parent_width: wp,
                left_width: wl,
                right_width: wr,
                ratio: (wl * wl + wr * wr) / (wp * wp),
            }
        })
        .collect();

    let root_area = quads[0].area();
    let mut levels: Vec<LevelStats> = (0..=depth)
        .map(|k| LevelStats {
            level: k,
            count: 0,
            area: 0.0,
            expected_area: root_area * expected_v.powi(k as i32),
            max_ratio_deviation: 0.0,
        })
        .collect();
    let mut bbox = BBox::EMPTY;
    let mut weighted_x = 0.0;
    let mut total_area = 0.0;
    for q in quads {
        let a = q.area();
        let l = &mut levels[q.depth as usize];
        l.count += 1;
        l.area += a;
        bbox = bbox.union(&q.bbox());
        weighted_x += a * q.centroid().x;
        total_area += a;
    }

    let mut violations = Vec::new();
    for (n, j) in junctions.iter().enumerate() {
        let dev = (j.ratio - expected_v).abs();
        let l = &mut levels[j.depth as usize + 1];
        l.max_ratio_deviation = l.max_ratio_deviation.max(dev);
        if !(dev <= opts.tolerance) {
            violations.push(n);
        }
    }

    let root = &quads[0];
    let axis = 0.5 * (root.vertices[0].x + root.vertices[1].x);
    let lean = if total_area > 0.0 && bbox.height() > 0.0 {
        (weighted_x / total_area - axis) / bbox.height()
    } else {
        0.0
    };

    Ok(JunctionAudit {
        expected_v,
        tolerance: opts.tolerance,
        junctions,
        levels,
        violations,
        bbox,
        lean,
    })
}

/// Total shoelace area of the quads on level `k`.
pub fn level_area(geometry: &TreeGeometry, k: u32) -> Result<f64, StructureError> {
    let depth = geometry.depth();
    if k > depth {
        return Err(StructureError::Level { level: k, depth });
    }
    Ok(geometry
        .quads
        .iter()
        .filter(|q| q.depth == k)
        .map(Quad::area)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::grow;
    use crate::math::TreeParams;
    use approx::assert_relative_eq;

    #[test]
    fn pythagorean_ratios_are_one() {
        for depth in [1, 6, 12] {
            let g =
                grow(&TreeParams::new(1.0, 1.0, 90.0, 1.0, depth).with_seed(depth as u64)).unwrap();
            let a = audit(&g).unwrap();
            assert!(a.is_clean());
            assert_eq!(a.junctions.len() as u64, quad_count(depth - 1));
            for j in &a.junctions {
                assert!((j.ratio - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn excess_davinci_factor() {
        let g = grow(&TreeParams::new(3.0, 1.5, 75.0, 1.25, 8).with_seed(11)).unwrap();
        let a = audit(&g).unwrap();
        assert!(a.is_clean());
        for l in &a.levels {
            // Independent oracle: e * v^k straight from the parameters.
            let analytic = 3.0 * 1.25f64.powi(l.level as i32);
            assert_relative_eq!(l.area, analytic, max_relative = 1e-9);
            assert_relative_eq!(
                level_area(&g, l.level).unwrap(),
                analytic,
                max_relative = 1e-9
            );
            assert_eq!(l.count, 1 << l.level);
        }
    }

    #[test]
    fn depth_zero_tree() {
        let g = grow(&TreeParams::new(5.0, 1.0, 90.0, 1.0, 0)).unwrap();
        let a = audit(&g).unwrap();
        assert!(a.junctions.is_empty());
        assert_eq!(a.levels.len(), 1);
        assert_relative_eq!(a.levels[0].area, 5.0);
        assert_relative_eq!(level_area(&g, 0).unwrap(), 5.0);
        assert_eq!(a.lean, 0.0);
    }

    #[test]
    fn level_area_examples() {
        let g = grow(&TreeParams::new(2.0, 1.7, 100.0, 1.0, 10)).unwrap();
        for k in 0..=10 {
            assert_relative_eq!(level_area(&g, k).unwrap(), 2.0, max_relative = 1e-9);
        }
        let g = grow(&TreeParams::new(2.0, 1.7, 100.0, 0.9, 10)).unwrap();
        assert_relative_eq!(
            level_area(&g, 10).unwrap(),
            2.0 * 0.9f64.powi(10),
            max_relative = 1e-9
        );
        assert!(matches!(
            level_area(&g, 11),
            Err(StructureError::Level {
                level: 11,
                depth: 10
            })
        ));
    }

    #[test]
    fn mismatched_expectation_flags_everything() {
        let g = grow(&TreeParams::new(5.0, 1.25, 90.0, 1.1, 7)).unwrap();
        let a = audit_with(
            &g,
            &AuditOptions {
                expected_v: Some(1.0),
                ..AuditOptions::default()
            },
        )
        .unwrap();
        assert_eq!(a.violations.len(), a.junctions.len());
        assert_eq!(a.report().summary.violations, quad_count(6));
    }

    #[test]
    fn structural_errors() {
        let mut g = grow(&TreeParams::new(1.0, 1.0, 90.0, 1.0, 4)).unwrap();
        let mut short = g.clone();
        short.quads.pop();
        assert!(matches!(
            audit(&short),
            Err(StructureError::Count { found: 30, .. })
        ));

        // A leaf re-labelled one level too shallow leaves its parent with one child.
        let last = g.quads.len() - 1;
        g.quads[last].depth = 3;
        assert!(audit(&g).is_err());
    }

    #[test]
    fn report_formats() {
        let g = grow(&TreeParams::new(2.0, 1.5, 80.0, 1.0, 3)).unwrap();
        let r = audit(&g).unwrap().report();
        let csv = r.to_csv();
        assert!(csv.starts_with("level,count,area,expected_area,max_ratio_deviation\n0,1,2,2,0\n"));
        assert!(csv.contains("\nviolations,0\n"));
        let back: AuditReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
