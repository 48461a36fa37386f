//! `ptree`: grow, render, audit and sweep parametric Pythagorean trees.
//!
//! Exit codes: 0 success, 1 runtime failure (including partially failed
//! sweeps), 2 usage error, 3 unreadable or structurally broken geometry,
//! 4 audit found junction violations.

mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ptree_core::format::{self, BinaryWriter};
use ptree_core::generator::GENERATOR_VERSION;
use ptree_core::metrics::{audit_with, AuditOptions, DEFAULT_TOLERANCE};
use ptree_core::render::{self, FitMode, RenderConfig, Rgb};
use ptree_core::sweep::{self, Axis, ImageFormat, Manifest, SweepSpec};
use ptree_core::{
    derive_transforms, grow_streaming, grow_with, quad_count, BranchTransforms, GrowConfig,
    GrowError, ParamError, TreeParams, GOLDEN_RATIO,
};

use crate::config::{base_spec, SweepFile};

const OUT_DIR_ENV: &str = "PTREE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "ptree",
    version,
    about = "Parametric Pythagorean fractal trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Grow one tree T(e, b, angle, v) and write geometry and/or images.
    Grow(GrowArgs),
    /// Render a saved geometry file to SVG or PNG.
    Render(RenderArgs),
    /// Check junction ratios and level areas of a saved geometry file.
    Audit(AuditArgs),
    /// Grow and render every cell of a parameter grid.
    Sweep(SweepArgs),
    /// Export a grid as 224x224 PNGs plus a labels CSV.
    ExportDataset(SweepArgs),
}

#[derive(Args, Debug, Clone)]
struct TreeArgs {
    /// Trunk elongation (height / width) [default: 5, or 2g with --golden]
    #[arg(long)]
    e: Option<f64>,
    /// Branch imbalance, larger / smaller child width
    #[arg(long, default_value_t = 1.5)]
    b: f64,
    /// Angle between child branches, degrees
    #[arg(long, default_value_t = 90.0)]
    angle: f64,
    /// da Vinci factor: children / parent squared widths
    #[arg(long, default_value_t = 1.0)]
    v: f64,
    #[arg(long, default_value_t = 12)]
    depth: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Golden tree: b = g and rotation angles in ratio g
    #[arg(long)]
    golden: bool,
    /// Probability that a junction swaps its children
    #[arg(long, default_value_t = 0.5)]
    flip_probability: f64,
    #[arg(long, default_value_t = ptree_core::generator::DEFAULT_DEPTH_CAP)]
    depth_cap: u32,
    /// Build on one thread in the defined emission order
    #[arg(long)]
    serial: bool,
}

impl TreeArgs {
    fn params(&self) -> TreeParams {
        let e = self
            .e
            .unwrap_or(if self.golden { 2.0 * GOLDEN_RATIO } else { 5.0 });
        let mut p = TreeParams::new(e, self.b, self.angle, self.v, self.depth)
            .with_seed(self.seed)
            .with_flip_probability(self.flip_probability);
        p.golden_mode = self.golden;
        p
    }

    fn grow_config(&self) -> GrowConfig {
        GrowConfig {
            depth_cap: self.depth_cap,
            execution: if self.serial {
                ptree_core::Execution::Serial
            } else {
                ptree_core::Execution::Parallel
            },
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ImageArgs {
    #[arg(long, default_value_t = 1024)]
    width: u32,
    #[arg(long, default_value_t = 1024)]
    height: u32,
    /// Fraction of the canvas kept clear on each side
    #[arg(long, default_value_t = 0.02)]
    margin: f64,
    /// Background colour (#rrggbb) or "none" for transparent SVG
    #[arg(long, default_value = "#ffffff")]
    background: String,
    #[arg(long, default_value = "#000000")]
    color_start: String,
    #[arg(long, default_value = "#00ff00")]
    color_end: String,
    /// Stretch to the canvas instead of preserving aspect ratio
    #[arg(long)]
    stretch: bool,
    /// PNG samples per pixel along each axis
    #[arg(long, default_value_t = 1)]
    supersample: u32,
    /// 224x224 letterboxed on white, overriding size and margin
    #[arg(long)]
    export_224: bool,
}

impl ImageArgs {
    fn config(&self) -> Result<RenderConfig, UsageError> {
        let color =
            |flag: &'static str, s: &str| s.parse::<Rgb>().map_err(|e| UsageError::new(flag, e));
        let background = if self.background == "none" {
            None
        } else {
            Some(color("--background", &self.background)?)
        };
        let mut cfg = RenderConfig {
            width: self.width,
            height: self.height,
            margin: self.margin,
            background,
            colormap: render::ColorMap {
                start: color("--color-start", &self.color_start)?,
                end: color("--color-end", &self.color_end)?,
            },
            fit: if self.stretch {
                FitMode::Stretch
            } else {
                FitMode::Contain
            },
            supersample: self.supersample,
            ..RenderConfig::default()
        };
        if self.export_224 {
            cfg = RenderConfig {
                colormap: cfg.colormap,
                ..RenderConfig::export_224()
            };
        }
        cfg.validate()
            .map_err(|e| UsageError::new("--width/--height/--margin/--supersample", e))?;
        Ok(cfg)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum OutFormat {
    Png,
    Svg,
    Bin,
    Jsonl,
}

#[derive(Args, Debug)]
struct GrowArgs {
    #[command(flatten)]
    tree: TreeArgs,
    #[command(flatten)]
    image: ImageArgs,
    /// Output formats
    #[arg(long, value_enum, value_delimiter = ',', default_value = "png")]
    formats: Vec<OutFormat>,
    /// Output directory
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    out_dir: PathBuf,
    /// Stream quads straight to a binary geometry file without holding the tree
    #[arg(long)]
    stream: bool,
}

#[derive(Args, Debug)]
struct RenderArgs {
    /// Geometry file (binary or JSON lines)
    input: PathBuf,
    /// Output image; the extension (.svg or .png) picks the format
    #[arg(long, short)]
    output: PathBuf,
    #[command(flatten)]
    image: ImageArgs,
}

#[derive(Args, Debug)]
struct AuditArgs {
    /// Geometry file (binary or JSON lines)
    input: PathBuf,
    /// Junction ratio to expect instead of the tree's own v
    #[arg(long)]
    expect_v: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Write the per-level report as CSV
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the report as JSON
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct SweepArgs {
    /// TOML sweep configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a named grid: pythagorean, generalized, refined, golden
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_delimiter = ',')]
    e: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    b: Option<Vec<f64>>,
    /// Branching angles, degrees
    #[arg(long, value_delimiter = ',')]
    angle: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    v: Option<Vec<f64>>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    repetitions: Option<u32>,
    /// Base seed for per-cell seeds
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    golden: bool,
    #[arg(long, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    formats: Option<Vec<SweepFormat>>,
    /// Also write labelled montage pages
    #[arg(long)]
    montage: bool,
    #[arg(long)]
    rows: Option<Axis>,
    #[arg(long)]
    cols: Option<Axis>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SweepFormat {
    Png,
    Svg,
}

impl SweepArgs {
    fn spec(&self) -> Result<SweepSpec> {
        let file = match &self.config {
            Some(path) => SweepFile::load(path)?,
            None => SweepFile::default(),
        };
        let preset = self.preset.as_deref().or(file.preset.as_deref());
        let mut spec = base_spec(preset)?;
        file.apply(&mut spec)?;

        macro_rules! flag {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(x) = &self.$field { $target = x.clone(); })*
            };
        }
        flag! {
            e => spec.e,
            b => spec.b,
            angle => spec.angle,
            v => spec.v,
            depth => spec.depth,
            repetitions => spec.repetitions,
            seed => spec.base_seed,
            out_dir => spec.out_dir,
            rows => spec.montage_rows,
            cols => spec.montage_cols,
            width => spec.render.width,
            height => spec.render.height,
        }
        if let Some(f) = &self.formats {
            spec.formats = f
                .iter()
                .map(|f| match f {
                    SweepFormat::Png => ImageFormat::Png,
                    SweepFormat::Svg => ImageFormat::Svg,
                })
                .collect();
        }
        spec.golden |= self.golden;
        spec.montage |= self.montage;
        Ok(spec)
    }
}

/// A bad argument, reported with the flag it came from.
#[derive(Debug)]
struct UsageError {
    flag: String,
    message: String,
}

impl std::error::Error for UsageError {}

impl UsageError {
    fn new(flag: impl Into<String>, message: impl ToString) -> Self {
        Self {
            flag: flag.into(),
            message: message.to_string(),
        }
    }
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid value for {}: {}", self.flag, self.message)
    }
}

/// Maps a parameter error back to the command-line flag that set it.
fn param_usage(e: &ParamError) -> UsageError {
    let name = match e {
        ParamError::NonFinite { name, .. } | ParamError::OutOfRange { name, .. } => *name,
        ParamError::DegenerateTriangle { .. } => "angle",
    };
    let flag = match name {
        "branching_angle" => "--angle".to_string(),
        "flip_probability" => "--flip-probability".to_string(),
        other => format!("--{other}"),
    };
    UsageError::new(flag, e)
}

/// Geometry that could not be read or does not form a valid tree.
struct StructuralError(anyhow::Error);

fn print_transforms(p: &TreeParams, t: &BranchTransforms) {
    println!(
        "T(e={}, b={}, angle={}°, v={}) depth {} seed {}{}",
        p.e,
        p.effective_b(),
        p.branching_angle_deg(),
        p.v,
        p.depth,
        p.seed,
        if p.golden_mode { " [golden]" } else { "" }
    );
    println!("  triangle scales  s_l = {:.4}  s_r = {:.4}", t.s_l, t.s_r);
    println!("  da Vinci factor  f   = {:.4}", t.f);
    println!(
        "  applied scales   s_l = {:.4}  s_r = {:.4}",
        t.scale_l(),
        t.scale_r()
    );
    println!(
        "  rotations        gamma = {:.2}°  beta = {:.2}°",
        t.gamma_deg(),
        t.beta_deg()
    );
}

fn cmd_grow(args: &GrowArgs) -> Result<()> {
    let params = args.tree.params();
    let transforms = derive_transforms(&params).map_err(|e| param_usage(&e))?;
    let cfg_render = args.image.config()?;
    let cfg = args.tree.grow_config();
    if params.depth > cfg.depth_cap {
        return Err(grow_error(GrowError::DepthCap {
            depth: params.depth,
            cap: cfg.depth_cap,
        }));
    }
    print_transforms(&params, &transforms);
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    if args.stream {
        if args.formats.iter().any(|f| *f != OutFormat::Bin) {
            return Err(UsageError::new("--stream", "streaming writes only the bin format").into());
        }
        let path = args.out_dir.join(render::file_name(&params, "bin"));
        let file = BufWriter::new(File::create(&path).with_context(|| path.display().to_string())?);
        let mut writer =
            BinaryWriter::new(file, &params, GENERATOR_VERSION, quad_count(params.depth))?;
        let summary = grow_streaming(&params, &cfg, |q| writer.push(q)).map_err(grow_error)?;
        writer.finish()?;
        println!(
            "{} quads, extent [{:.4}, {:.4}] x [{:.4}, {:.4}]",
            summary.count,
            summary.bbox.min_x,
            summary.bbox.max_x,
            summary.bbox.min_y,
            summary.bbox.max_y
        );
        println!("wrote {}", path.display());
        return Ok(());
    }

    let geometry = grow_with(&params, &cfg).map_err(grow_error)?;
    println!("{} quads", geometry.len());
    for fmt in &args.formats {
        let ext = match fmt {
            OutFormat::Png => "png",
            OutFormat::Svg => "svg",
            OutFormat::Bin => "bin",
            OutFormat::Jsonl => "jsonl",
        };
        let path = args.out_dir.join(render::file_name(&params, ext));
        match fmt {
            OutFormat::Png => render::write_png(&geometry, &cfg_render, &path)?,
            OutFormat::Svg => render::write_svg(&geometry, &cfg_render, &path)?,
            OutFormat::Bin => {
                format::write_binary(&geometry, BufWriter::new(File::create(&path)?))?;
            }
            OutFormat::Jsonl => {
                format::write_jsonl(&geometry, BufWriter::new(File::create(&path)?))?;
            }
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn grow_error(e: GrowError) -> anyhow::Error {
    match e {
        GrowError::Params(p) => param_usage(&p).into(),
        GrowError::DepthCap { depth, cap } => UsageError::new(
            "--depth",
            format!("{depth} exceeds the depth cap {cap} (see --depth-cap)"),
        )
        .into(),
        other => other.into(),
    }
}

fn load_geometry(path: &Path) -> Result<ptree_core::TreeGeometry> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    format::read_any(BufReader::new(file))
        .map_err(|e| StructuralError(anyhow::anyhow!("{}: {e}", path.display())).into())
}

impl std::fmt::Debug for StructuralError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl std::fmt::Display for StructuralError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for StructuralError {}

fn cmd_render(args: &RenderArgs) -> Result<()> {
    let cfg = args.image.config()?;
    let geometry = load_geometry(&args.input)?;
    match args.output.extension().and_then(|e| e.to_str()) {
        Some("svg") => render::write_svg(&geometry, &cfg, &args.output)?,
        Some("png") => render::write_png(&geometry, &cfg, &args.output)?,
        _ => return Err(UsageError::new("--output", "extension must be .svg or .png").into()),
    }
    println!("wrote {}", args.output.display());
    Ok(())
}

fn cmd_audit(args: &AuditArgs) -> Result<()> {
    let geometry = load_geometry(&args.input)?;
    let opts = AuditOptions {
        expected_v: args.expect_v,
        tolerance: args.tolerance,
    };
    let audit = audit_with(&geometry, &opts).map_err(|e| StructuralError(e.into()))?;
    let report = audit.report();
    print!("{}", report.to_csv());
    if let Some(path) = &args.csv {
        fs::write(path, report.to_csv())?;
    }
    if let Some(path) = &args.json {
        fs::write(path, report.to_json())?;
    }
    let n = report.summary.violations;
    println!("{n} violations");
    if n > 0 {
        return Err(Violations {
            count: n,
            expected_v: audit.expected_v,
        }
        .into());
    }
    Ok(())
}

#[derive(Debug)]
struct Violations {
    count: u64,
    expected_v: f64,
}

impl std::fmt::Display for Violations {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} junction(s) deviate from v = {}",
            self.count, self.expected_v
        )
    }
}

impl std::error::Error for Violations {}

fn report_manifest(m: &Manifest, out_dir: &Path) -> Result<()> {
    let files = m.files().len();
    println!(
        "{} trees, {} files, {} montage page(s) in {}",
        m.entries.len(),
        files,
        m.montages.len(),
        out_dir.display()
    );
    for e in m.entries.iter().filter(|e| e.error.is_some()) {
        eprintln!(
            "cell {} rep {}: {}",
            e.cell,
            e.repetition,
            e.error.as_deref().unwrap_or_default()
        );
    }
    if !m.is_success() {
        anyhow::bail!("{} of {} trees failed", m.failures, m.entries.len());
    }
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let spec = args.spec()?;
    let m = sweep::run_sweep(&spec)?;
    report_manifest(&m, &spec.out_dir)
}

fn cmd_export(args: &SweepArgs) -> Result<()> {
    let spec = args.spec()?;
    let m = sweep::export_dataset(&spec)?;
    report_manifest(&m, &spec.out_dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Grow(a) => cmd_grow(a),
        Command::Render(a) => cmd_render(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::ExportDataset(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else if e.downcast_ref::<StructuralError>().is_some() {
                ExitCode::from(3)
            } else if e.downcast_ref::<Violations>().is_some() {
                ExitCode::from(4)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
