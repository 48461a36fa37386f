//! Sweep configuration files.
//!
//! A TOML file with any subset of these keys:
//!
//! ```toml
//! preset = "pythagorean"      # pythagorean | generalized | refined | golden
//! e = [2.0, 3.0]
//! b = [1.5, 2.0]
//! angle = [70.0, 90.0]        # degrees between branches
//! v = [1.0]
//! depth = 12
//! repetitions = 5
//! seed = 42
//! golden = false
//! out_dir = "runs/grid"
//! formats = ["png", "svg"]
//! montage = true
//! montage_rows = "e"
//! montage_cols = "b"
//! montage_tile = 192
//! width = 1024
//! height = 1024
//! margin = 0.02
//! background = "#ffffff"
//! color_start = "#000000"
//! color_end = "#00ff00"
//! ```
//!
//! Precedence: defaults, then the preset, then the file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ptree_core::render::Rgb;
use ptree_core::sweep::{Axis, ImageFormat, SweepSpec};
use serde::Deserialize;

#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub preset: Option<String>,
    pub e: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub angle: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub depth: Option<u32>,
    pub repetitions: Option<u32>,
    pub seed: Option<u64>,
    pub golden: Option<bool>,
    pub out_dir: Option<PathBuf>,
    pub formats: Option<Vec<ImageFormat>>,
    pub montage: Option<bool>,
    pub montage_rows: Option<Axis>,
    pub montage_cols: Option<Axis>,
    pub montage_tile: Option<u32>,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub margin: Option<f64>,
    pub background: Option<String>,
    pub color_start: Option<String>,
    pub color_end: Option<String>,
}

impl SweepFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Layers this file over `spec`.
    pub fn apply(&self, spec: &mut SweepSpec) -> Result<()> {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(x) = &self.$field { $target = x.clone(); })*
            };
        }
        set! {
            e => spec.e,
            b => spec.b,
            angle => spec.angle,
            v => spec.v,
            depth => spec.depth,
            repetitions => spec.repetitions,
            seed => spec.base_seed,
            golden => spec.golden,
            out_dir => spec.out_dir,
            formats => spec.formats,
            montage => spec.montage,
            montage_rows => spec.montage_rows,
            montage_cols => spec.montage_cols,
            montage_tile => spec.montage_tile,
            width => spec.render.width,
            height => spec.render.height,
            margin => spec.render.margin,
        }
        if let Some(c) = &self.background {
            spec.render.background = Some(parse_rgb("background", c)?);
        }
        if let Some(c) = &self.color_start {
            spec.render.colormap.start = parse_rgb("color_start", c)?;
        }
        if let Some(c) = &self.color_end {
            spec.render.colormap.end = parse_rgb("color_end", c)?;
        }
        Ok(())
    }
}

fn parse_rgb(key: &str, s: &str) -> Result<Rgb> {
    match s.parse() {
        Ok(c) => Ok(c),
        Err(e) => bail!("config key `{key}`: {e}"),
    }
}

/// Starting spec for a named preset, or the plain default.
pub fn base_spec(preset: Option<&str>) -> Result<SweepSpec> {
    match preset {
        None => Ok(SweepSpec::default()),
        Some(name) => match SweepSpec::preset(name) {
            Some(s) => Ok(s),
            None => bail!(
                "unknown preset {name:?} (expected pythagorean, generalized, refined or golden)"
            ),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_preset() {
        let f: SweepFile = toml::from_str(
            r##"
            preset = "pythagorean"
            e = [2.0, 3.0]
            depth = 6
            formats = ["svg", "png"]
            montage_rows = "v"
            color_end = "#00aa00"
            "##,
        )
        .unwrap();
        let mut spec = base_spec(f.preset.as_deref()).unwrap();
        f.apply(&mut spec).unwrap();
        assert_eq!(spec.e, vec![2.0, 3.0]);
        assert_eq!(spec.b, vec![1.0, 1.5, 2.0, 5.0, 10.0]);
        assert_eq!(spec.depth, 6);
        assert_eq!(spec.formats, vec![ImageFormat::Svg, ImageFormat::Png]);
        assert_eq!(spec.montage_rows, Axis::V);
        assert_eq!(spec.render.colormap.end, Rgb([0, 0xaa, 0]));
    }

    #[test]
    fn rejects_unknown_keys_and_presets() {
        assert!(toml::from_str::<SweepFile>("elongation = [1.0]").is_err());
        assert!(base_spec(Some("forest")).is_err());
        let f: SweepFile = toml::from_str("background = \"blue\"").unwrap();
        assert!(f.apply(&mut SweepSpec::default()).is_err());
    }
}
