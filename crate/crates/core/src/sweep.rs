//! Parameter-grid sweeps and classifier dataset export.
//!
//! A sweep grows one tree per (cell, repetition), where cells are the
//! Cartesian product of the `e`, `b`, angle and `v` lists in that nesting
//! order. Every tree gets its own seed derived from the base seed, the cell
//! index and the repetition index, so results do not depend on which worker
//! ran which cell. A JSON manifest listing every written file is saved last.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{grow, hash_words, GENERATOR_VERSION};
use crate::math::TreeParams;
use crate::render::{self, RenderConfig, Rgb};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.csv";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    E,
    B,
    Angle,
    V,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::E, Axis::B, Axis::Angle, Axis::V];

    fn of(self, cell: &Cell) -> f64 {
        match self {
            Axis::E => cell.e,
            Axis::B => cell.b,
            Axis::Angle => cell.angle_deg,
            Axis::V => cell.v,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::E => "e",
            Axis::B => "b",
            Axis::Angle => "angle",
            Axis::V => "v",
        })
    }
}

impl std::str::FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "e" => Ok(Axis::E),
            "b" => Ok(Axis::B),
            "angle" | "a" | "alpha" => Ok(Axis::Angle),
            "v" => Ok(Axis::V),
            _ => Err(format!("unknown axis {s:?}, expected e, b, angle or v")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Png,
    Svg,
}

impl ImageFormat {
    pub fn ext(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Svg => "svg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub e: Vec<f64>,
    pub b: Vec<f64>,
    /// Branching angles in degrees.
    pub angle: Vec<f64>,
    pub v: Vec<f64>,
    pub depth: u32,
    pub repetitions: u32,
    pub base_seed: u64,
    pub golden: bool,
    pub out_dir: PathBuf,
    pub formats: Vec<ImageFormat>,
    pub render: RenderConfig,
    pub montage: bool,
    pub montage_rows: Axis,
    pub montage_cols: Axis,
    /// Side of one montage tile in pixels.
    pub montage_tile: u32,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            e: vec![5.0],
            b: vec![1.5],
            angle: vec![90.0],
            v: vec![1.0],
            depth: 12,
            repetitions: 1,
            base_seed: 0,
            golden: false,
            out_dir: PathBuf::from("out"),
            formats: vec![ImageFormat::Png],
            render: RenderConfig::default(),
            montage: false,
            montage_rows: Axis::E,
            montage_cols: Axis::B,
            montage_tile: 192,
        }
    }
}

impl SweepSpec {
    /// 7 elongations × 5 imbalances of right-angled, da Vinci-preserving trees.
    pub fn pythagorean() -> Self {
        Self {
            e: vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0],
            b: vec![1.0, 1.5, 2.0, 5.0, 10.0],
            angle: vec![90.0],
            v: vec![1.0],
            montage: true,
            ..Self::default()
        }
    }

    /// Fixed `e = 5` over a 4×4×4 grid of imbalance, angle and da Vinci factor.
    /// The montage has one page per imbalance, rows `v`, columns angle.
    pub fn generalized() -> Self {
        Self {
            e: vec![5.0],
            b: vec![1.0, 1.25, 1.5, 2.0],
            angle: vec![60.0, 90.0, 120.0, 150.0],
            v: vec![0.9, 1.0, 1.1, 1.25],
            montage: true,
            montage_rows: Axis::V,
            montage_cols: Axis::Angle,
            ..Self::default()
        }
    }

    /// The refined 5×5×5 grid around the realism plateau, 5 repetitions each.
    pub fn refined() -> Self {
        Self {
            e: vec![2.0, 3.0, 4.0, 5.0, 6.0],
            b: vec![1.5, 1.75, 2.0, 2.25, 2.5],
            angle: vec![70.0, 80.0, 90.0, 100.0, 110.0],
            v: vec![1.0],
            repetitions: 5,
            ..Self::default()
        }
    }

    /// Golden trees `T(2g, g, angle, 1)` for angles 35° to 80°.
    pub fn golden_angles() -> Self {
        Self {
            e: vec![2.0 * crate::math::GOLDEN_RATIO],
            b: vec![crate::math::GOLDEN_RATIO],
            angle: (0..10).map(|i| 35.0 + 5.0 * i as f64).collect(),
            v: vec![1.0],
            golden: true,
            montage: true,
            montage_rows: Axis::E,
            montage_cols: Axis::Angle,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "pythagorean" => Some(Self::pythagorean()),
            "generalized" => Some(Self::generalized()),
            "refined" => Some(Self::refined()),
            "golden" => Some(Self::golden_angles()),
            _ => None,
        }
    }

    pub fn axis_values(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::E => &self.e,
            Axis::B => &self.b,
            Axis::Angle => &self.angle,
            Axis::V => &self.v,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        for axis in Axis::ALL {
            let values = self.axis_values(axis);
            if values.is_empty() {
                return Err(SweepError::Invalid(format!(
                    "value list for `{axis}` is empty"
                )));
            }
            if let Some(x) = values.iter().find(|x| !x.is_finite()) {
                return Err(SweepError::Invalid(format!(
                    "non-finite `{axis}` value {x}"
                )));
            }
        }
        if self.repetitions == 0 {
            return Err(SweepError::Invalid("repetitions must be at least 1".into()));
        }
        if self.formats.is_empty() {
            return Err(SweepError::Invalid("no output format selected".into()));
        }
        if self.montage && self.montage_rows == self.montage_cols {
            return Err(SweepError::Invalid(
                "montage rows and columns must differ".into(),
            ));
        }
        if self.montage && self.montage_tile < 16 {
            return Err(SweepError::Invalid(
                "montage tile must be at least 16 px".into(),
            ));
        }
        self.render
            .validate()
            .map_err(|e| SweepError::Invalid(e.to_string()))
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &e in &self.e {
            for &b in &self.b {
                for &angle_deg in &self.angle {
                    for &v in &self.v {
                        out.push(Cell {
                            index: out.len(),
                            e,
                            b,
                            angle_deg,
                            v,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn tree_count(&self) -> usize {
        self.e.len() * self.b.len() * self.angle.len() * self.v.len() * self.repetitions as usize
    }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub e: f64,
    pub b: f64,
    pub angle_deg: f64,
    pub v: f64,
}

impl Cell {
    pub fn params(&self, spec: &SweepSpec, repetition: u32) -> TreeParams {
        let mut p = TreeParams::new(self.e, self.b, self.angle_deg, self.v, spec.depth)
            .with_seed(cell_seed(spec.base_seed, self.index, repetition));
        p.golden_mode = spec.golden;
        p
    }

    /// `T(e,b,angle,v)` caption.
    pub fn label(&self, golden: bool) -> String {
        let b = if golden {
            "g".to_string()
        } else {
            trim(self.b)
        };
        format!(
            "T({},{},{},{})",
            trim(self.e),
            b,
            trim(self.angle_deg),
            trim(self.v)
        )
    }
}

fn trim(x: f64) -> String {
    let r = (x * 1e4).round() / 1e4;
    format!("{r}")
}

pub fn cell_seed(base_seed: u64, cell_index: usize, repetition: u32) -> u64 {
    hash_words(&[base_seed, cell_index as u64, repetition as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub cell: usize,
    pub repetition: u32,
    pub e: f64,
    pub b: f64,
    pub angle: f64,
    pub v: f64,
    pub depth: u32,
    pub golden: bool,
    pub seed: u64,
    pub files: Vec<String>,
    /// `None` on success.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MontageRecord {
    pub file: String,
    pub rows: Axis,
    pub cols: Axis,
    pub row_values: Vec<f64>,
    pub col_values: Vec<f64>,
    /// Values of the remaining axes on this page.
    pub fixed: Vec<(Axis, f64)>,
    /// Cell index shown at `[row][col]`.
    pub grid: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub generator_version: String,
    pub spec: SweepSpec,
    pub entries: Vec<ManifestEntry>,
    pub montages: Vec<MontageRecord>,
    /// Other files written next to the images, e.g. the labels CSV.
    pub extra_files: Vec<String>,
    pub failures: usize,
}

impl Manifest {
    pub fn is_success(&self) -> bool {
        self.failures == 0
    }

    /// Every file the run wrote, excluding the manifest itself.
    pub fn files(&self) -> BTreeSet<String> {
        self.entries
            .iter()
            .flat_map(|e| e.files.iter().cloned())
            .chain(self.montages.iter().map(|m| m.file.clone()))
            .chain(self.extra_files.iter().cloned())
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self, SweepError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

struct JobResult {
    entry: ManifestEntry,
    thumbnail: Option<RgbImage>,
}

fn run_job(spec: &SweepSpec, cell: &Cell, rep: u32, want_thumb: bool) -> JobResult {
    let params = cell.params(spec, rep);
    let mut entry = ManifestEntry {
        cell: cell.index,
        repetition: rep,
        e: cell.e,
        b: params.effective_b(),
        angle: cell.angle_deg,
        v: cell.v,
        depth: spec.depth,
        golden: spec.golden,
        seed: params.seed,
        files: Vec::new(),
        error: None,
    };
    let mut thumbnail = None;
    let result = (|| -> Result<(), String> {
        let geometry = grow(&params).map_err(|e| e.to_string())?;
        for fmt in &spec.formats {
            let name = render::file_name(&params, fmt.ext());
            let path = spec.out_dir.join(&name);
            match fmt {
                ImageFormat::Png => render::write_png(&geometry, &spec.render, &path),
                ImageFormat::Svg => render::write_svg(&geometry, &spec.render, &path),
            }
            .map_err(|e| format!("{}: {e}", path.display()))?;
            entry.files.push(name);
        }
        if want_thumb {
            let cfg = RenderConfig {
                width: spec.montage_tile,
                height: spec.montage_tile,
                supersample: 2,
                ..spec.render
            };
            thumbnail = Some(render::render_png(&geometry, &cfg).map_err(|e| e.to_string())?);
        }
        Ok(())
    })();
    if let Err(e) = result {
        entry.error = Some(e);
    }
    JobResult { entry, thumbnail }
}

fn run_jobs(spec: &SweepSpec) -> Vec<JobResult> {
    let cells = spec.cells();
    let jobs: Vec<(Cell, u32)> = cells
        .iter()
        .flat_map(|c| (0..spec.repetitions).map(move |r| (*c, r)))
        .collect();
    let work = |(cell, rep): &(Cell, u32)| run_job(spec, cell, *rep, spec.montage && *rep == 0);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(work).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(work).collect()
    }
}

/// Runs the sweep and writes `manifest.json`. Per-tree failures are recorded
/// in the manifest rather than aborting the run.
pub fn run_sweep(spec: &SweepSpec) -> Result<Manifest, SweepError> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir).map_err(io_err(&spec.out_dir))?;
    let results = run_jobs(spec);
    let montages = if spec.montage {
        write_montages(spec, &results)?
    } else {
        Vec::new()
    };
    finish(spec, results, montages, Vec::new())
}

/// Renders every tree as a 224×224 letterboxed PNG and writes a labels CSV
/// with columns `file,e,b,angle,v,seed`.
pub fn export_dataset(spec: &SweepSpec) -> Result<Manifest, SweepError> {
    let spec = SweepSpec {
        formats: vec![ImageFormat::Png],
        render: RenderConfig {
            execution: spec.render.execution,
            colormap: spec.render.colormap,
            ..RenderConfig::export_224()
        },
        montage: false,
        ..spec.clone()
    };
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir).map_err(io_err(&spec.out_dir))?;
    let results = run_jobs(&spec);
    let mut csv = String::from("file,e,b,angle,v,seed\n");
    for r in &results {
        let e = &r.entry;
        if let (None, Some(file)) = (&e.error, e.files.first()) {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                file, e.e, e.b, e.angle, e.v, e.seed
            ));
        }
    }
    let path = spec.out_dir.join(LABELS_FILE);
    fs::write(&path, csv).map_err(io_err(&path))?;
    finish(&spec, results, Vec::new(), vec![LABELS_FILE.to_string()])
}

fn finish(
    spec: &SweepSpec,
    results: Vec<JobResult>,
    montages: Vec<MontageRecord>,
    extra_files: Vec<String>,
) -> Result<Manifest, SweepError> {
    let entries: Vec<ManifestEntry> = results.into_iter().map(|r| r.entry).collect();
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        generator_version: GENERATOR_VERSION.to_string(),
        spec: spec.clone(),
        failures: entries.iter().filter(|e| e.error.is_some()).count(),
        entries,
        montages,
        extra_files,
    };
    let path = spec.out_dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(io_err(&path))?;
    Ok(manifest)
}

const LABEL_HEIGHT: u32 = 16;

fn write_montages(
    spec: &SweepSpec,
    results: &[JobResult],
) -> Result<Vec<MontageRecord>, SweepError> {
    let cells = spec.cells();
    let (rows, cols) = (spec.montage_rows, spec.montage_cols);
    let others: Vec<Axis> = Axis::ALL
        .into_iter()
        .filter(|a| *a != rows && *a != cols)
        .collect();
    let thumb = |cell: usize| {
        results
            .iter()
            .find(|r| r.entry.cell == cell && r.entry.repetition == 0)
            .and_then(|r| r.thumbnail.as_ref())
    };

    // One page per combination of the remaining two axes.
    let mut pages: Vec<Vec<(Axis, f64)>> = vec![Vec::new()];
    for axis in &others {
        pages = pages
            .into_iter()
            .flat_map(|p| {
                spec.axis_values(*axis).iter().map(move |&x| {
                    let mut p = p.clone();
                    p.push((*axis, x));
                    p
                })
            })
            .collect();
    }

    let row_values = spec.axis_values(rows).to_vec();
    let col_values = spec.axis_values(cols).to_vec();
    let tile = spec.montage_tile;
    let mut records = Vec::new();
    for (page_no, fixed) in pages.into_iter().enumerate() {
        let mut grid = vec![vec![usize::MAX; col_values.len()]; row_values.len()];
        for c in &cells {
            if fixed.iter().all(|(a, x)| a.of(c) == *x) {
                let r = row_values.iter().position(|x| *x == rows.of(c)).unwrap();
                let k = col_values.iter().position(|x| *x == cols.of(c)).unwrap();
                if grid[r][k] == usize::MAX {
                    grid[r][k] = c.index;
                }
            }
        }
        let mut img = RgbImage::from_pixel(
            tile * col_values.len() as u32,
            (tile + LABEL_HEIGHT) * row_values.len() as u32,
            image::Rgb(Rgb::WHITE.0),
        );
        for (r, row) in grid.iter().enumerate() {
            for (k, &cell) in row.iter().enumerate() {
                let (x0, y0) = (k as u32 * tile, r as u32 * (tile + LABEL_HEIGHT));
                if let Some(t) = thumb(cell) {
                    image::imageops::replace(&mut img, t, x0 as i64, y0 as i64);
                }
                draw_label(
                    &mut img,
                    x0 + 4,
                    y0 + tile + 3,
                    &cells[cell].label(spec.golden),
                );
            }
        }
        let file = format!("montage_{}x{}_{:02}.png", rows, cols, page_no);
        let path = spec.out_dir.join(&file);
        img.save(&path).map_err(|e| SweepError::Io {
            path: path.clone(),
            source: io::Error::other(e),
        })?;
        records.push(MontageRecord {
            file,
            rows,
            cols,
            row_values: row_values.clone(),
            col_values: col_values.clone(),
            fixed,
            grid,
        });
    }
    Ok(records)
}

/// 3×5 glyphs, one row per byte, most significant of the low three bits first.
fn glyph(c: char) -> [u8; 5] {
    match c {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b001, 0b001, 0b001],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        ',' => [0b000, 0b000, 0b000, 0b010, 0b100],
        '(' => [0b001, 0b010, 0b010, 0b010, 0b001],
        ')' => [0b100, 0b010, 0b010, 0b010, 0b100],
        'T' => [0b111, 0b010, 0b010, 0b010, 0b010],
        'g' => [0b011, 0b101, 0b011, 0b001, 0b110],
        '-' => [0b000, 0b000, 0b111, 0b000, 0b000],
        _ => [0; 5],
    }
}

fn draw_label(img: &mut RgbImage, x: u32, y: u32, text: &str) {
    const SCALE: u32 = 2;
    for (i, c) in text.chars().enumerate() {
        let gx = x + i as u32 * 4 * SCALE;
        for (row, bits) in glyph(c).iter().enumerate() {
            for col in 0..3 {
                if bits & (0b100 >> col) == 0 {
                    continue;
                }
                for dy in 0..SCALE {
                    for dx in 0..SCALE {
                        let (px, py) = (gx + col * SCALE + dx, y + row as u32 * SCALE + dy);
                        if px < img.width() && py < img.height() {
                            img.put_pixel(px, py, image::Rgb([0, 0, 0]));
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_sizes() {
        assert_eq!(SweepSpec::pythagorean().tree_count(), 35);
        assert_eq!(SweepSpec::generalized().tree_count(), 64);
        assert_eq!(SweepSpec::refined().tree_count(), 625);
        assert_eq!(SweepSpec::golden_angles().tree_count(), 10);
        assert!(SweepSpec::preset("nope").is_none());
    }

    #[test]
    fn cells_nest_e_outermost() {
        let s = SweepSpec::pythagorean();
        let cells = s.cells();
        assert_eq!(cells[0].e, 0.1);
        assert_eq!(cells[1].b, 1.5);
        assert_eq!(cells[5].e, 0.2);
        assert!(cells.iter().enumerate().all(|(i, c)| c.index == i));
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = BTreeSet::new();
        for cell in 0..125 {
            for rep in 0..5 {
                assert!(seen.insert(cell_seed(7, cell, rep)));
            }
        }
        assert_eq!(cell_seed(7, 3, 1), cell_seed(7, 3, 1));
        assert_ne!(cell_seed(7, 3, 1), cell_seed(8, 3, 1));
    }

    #[test]
    fn validation() {
        let mut s = SweepSpec::default();
        s.v.clear();
        assert!(matches!(s.validate(), Err(SweepError::Invalid(m)) if m.contains("`v`")));
        let s = SweepSpec {
            repetitions: 0,
            ..SweepSpec::default()
        };
        assert!(s.validate().is_err());
        let s = SweepSpec {
            montage: true,
            montage_rows: Axis::B,
            montage_cols: Axis::B,
            ..SweepSpec::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn labels() {
        let c = Cell {
            index: 0,
            e: 5.0,
            b: 1.25,
            angle_deg: 60.0,
            v: 1.1,
        };
        assert_eq!(c.label(false), "T(5,1.25,60,1.1)");
        assert_eq!(c.label(true), "T(5,g,60,1.1)");
        assert!("T(),.-g0123456789".chars().all(|ch| glyph(ch) != [0; 5]));
    }

    #[test]
    fn axis_parsing() {
        assert_eq!("angle".parse::<Axis>().unwrap(), Axis::Angle);
        assert!("z".parse::<Axis>().is_err());
    }
}
