//! `xrm3d`: stage-per-command front end. Each command reads the previous
//! stage's files and writes its own; failures map to exit codes 2
//! (malformed input), 3 (I/O) and 4 (empty result).

mod error;
mod evaluate;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use xrm3d::components::Connectivity;
use xrm3d::detect::{self, DetectorConfig, ScoreMode};
use xrm3d::fuse::{self, FuserConfig};
use xrm3d::io::{self, Detections2D, Detections3D};
use xrm3d::metrology::{self, MetrologyConfig, MetrologyError};
use xrm3d::segment::{self, SegmenterConfig, View};
use xrm3d::synthgen::{self, SceneSpec};
use xrm3d::threshold::ThresholdMode;
use xrm3d::{Axis, Microns};

use error::CliError;
use manifest::{SegmentationManifest, SegmentedRoi};

#[derive(Parser)]
#[command(name = "xrm3d", version, about = "3D X-ray volume detection, segmentation and metrology")]
struct Cli {
    /// Worker threads; 0 picks the machine default. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a phantom scene spec into a volume, ground truth and masks.
    Generate(GenerateArgs),
    /// Per-slice 2D detection on a volume.
    Detect(DetectArgs),
    /// Fuse per-slice boxes into 3D cuboids.
    Fuse(FuseArgs),
    /// Segment every fused cuboid.
    Segment(SegmentArgs),
    /// Measure segmented ROIs.
    Measure(MeasureArgs),
    /// Score a stage against ground truth.
    Evaluate(evaluate::EvaluateArgs),
    /// Print a metrology report as a table.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Scene spec JSON.
    #[arg(long)]
    input: PathBuf,
    /// Output prefix; writes `<prefix>.meta/.raw`, `<prefix>.gt.json` and `<prefix>.mask<k>`.
    #[arg(long)]
    output: PathBuf,
    /// Overrides the spec's `rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the spec's voxel pitch.
    #[arg(long)]
    voxel_size_um: Option<Microns>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    X,
    Y,
    Z,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Axis {
        match a {
            AxisArg::X => Axis::X,
            AxisArg::Y => Axis::Y,
            AxisArg::Z => Axis::Z,
        }
    }
}

/// `otsu`, `global-otsu` or a fixed number.
fn parse_threshold(s: &str) -> Result<ThresholdMode, String> {
    match s {
        "otsu" => Ok(ThresholdMode::Otsu),
        "global-otsu" => Ok(ThresholdMode::GlobalOtsu),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .map(ThresholdMode::Fixed)
            .ok_or_else(|| format!("expected otsu, global-otsu or a number, got {other:?}")),
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    Contrast,
    One,
}

#[derive(Args)]
struct DetectArgs {
    /// Volume container.
    #[arg(long)]
    input: PathBuf,
    /// Detections JSON.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "z")]
    axis: AxisArg,
    #[arg(long, value_parser = parse_threshold, default_value = "global-otsu")]
    threshold: ThresholdMode,
    #[arg(long, default_value_t = 1)]
    min_area: usize,
    /// 4 or 8.
    #[arg(long, default_value_t = 8)]
    connectivity: u8,
    /// In-plane box filter radius applied before thresholding.
    #[arg(long, default_value_t = 1)]
    smoothing: usize,
    #[arg(long, value_enum, default_value = "contrast")]
    score: ScoreArg,
    /// Class index assigned to every box.
    #[arg(long = "class", default_value_t = 0)]
    class_index: usize,
    /// Comma-separated class names.
    #[arg(long, value_delimiter = ',', default_value = "structure")]
    classes: Vec<String>,
}

#[derive(Args)]
struct FuseArgs {
    /// 2D detections JSON.
    #[arg(long)]
    input: PathBuf,
    /// 3D detections JSON.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    link_iou: f64,
    #[arg(long, default_value_t = 1)]
    gap_tolerance: usize,
    #[arg(long, default_value_t = 2)]
    min_depth: usize,
    /// Volume the cuboids must fit in.
    #[arg(long)]
    volume: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    /// Volume container.
    #[arg(long)]
    input: PathBuf,
    /// 3D detections JSON from `fuse`.
    #[arg(long)]
    rois: PathBuf,
    /// Manifest JSON; ROI masks are written beside it.
    #[arg(long)]
    output: PathBuf,
    /// Segment along all three views and fuse.
    #[arg(long)]
    three_views: bool,
    #[arg(long, value_parser = parse_threshold, default_value = "global-otsu")]
    threshold: ThresholdMode,
    /// Structuring element half-size.
    #[arg(long, default_value_t = 1)]
    radius: usize,
    /// Voxels added around each cuboid.
    #[arg(long, default_value_t = 3)]
    margin: usize,
    /// External f32 score volumes, one per view; all three replace the reference segmenter.
    #[arg(long, requires_all = ["scores_sagittal", "scores_coronal"])]
    scores_axial: Option<PathBuf>,
    #[arg(long, requires_all = ["scores_axial", "scores_coronal"])]
    scores_sagittal: Option<PathBuf>,
    #[arg(long, requires_all = ["scores_axial", "scores_sagittal"])]
    scores_coronal: Option<PathBuf>,
}

#[derive(Args)]
struct MeasureArgs {
    /// Segmentation manifest from `segment`.
    #[arg(long)]
    input: PathBuf,
    /// Report JSON; the table goes to the same path with a `.txt` extension.
    #[arg(long)]
    output: PathBuf,
    /// Ground-truth JSON to compare against.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Overrides the manifest's voxel pitch.
    #[arg(long)]
    voxel_size_um: Option<Microns>,
    #[arg(long, default_value_t = 1)]
    radius: usize,
}

#[derive(Args)]
struct ReportArgs {
    /// Metrology report JSON.
    #[arg(long)]
    input: PathBuf,
    /// Write the table here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Name of a container given as `<name>`, `<name>.meta` or `<name>.raw`.
fn volume_id(path: &Path) -> String {
    let (meta, _) = io::container_paths(path);
    meta.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("volume")
        .to_string()
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let mut spec: SceneSpec = io::load_json(&a.input)?;
    if let Some(seed) = a.seed {
        spec.rng_seed = seed;
    }
    if let Some(v) = a.voxel_size_um {
        spec.voxel_size_um = v;
    }
    let scene = synthgen::generate_scene(&spec)?;
    synthgen::write_scene(&scene, &a.output)?;
    Ok(())
}

fn detect(a: DetectArgs) -> Result<(), CliError> {
    let cfg = DetectorConfig {
        threshold: a.threshold,
        connectivity: Connectivity::try_from(a.connectivity).map_err(|e| CliError::malformed(e.to_string()))?,
        min_area: a.min_area,
        score_mode: match a.score {
            ScoreArg::Contrast => ScoreMode::Contrast,
            ScoreArg::One => ScoreMode::ConstantOne,
        },
        class_index: a.class_index,
        smoothing_radius: a.smoothing,
    };
    if a.class_index >= a.classes.len() {
        return Err(CliError::malformed(format!(
            "class {} but only {} classes named",
            a.class_index,
            a.classes.len()
        )));
    }
    let v = io::load_volume(&a.input)?;
    let boxes = detect::detect_volume(&v, a.axis.into(), &cfg)?;
    let doc = Detections2D {
        volume_id: volume_id(&a.input),
        classes: a.classes,
        boxes,
    };
    detect::export_detections(&doc, &a.output)?;
    Ok(())
}

fn fuse(a: FuseArgs) -> Result<(), CliError> {
    let dets = detect::import_detections(&a.input)?;
    let cfg = FuserConfig {
        link_iou: a.link_iou,
        gap_tolerance: a.gap_tolerance,
        min_depth: a.min_depth,
    };
    let mut cuboids = fuse::fuse_tracks(&dets.boxes, &cfg)?;
    if let Some(path) = &a.volume {
        cuboids = fuse::bind_volume(&cuboids, &io::load_volume(path)?)?;
    }
    let doc = Detections3D {
        volume_id: dets.volume_id,
        classes: dets.classes,
        boxes: cuboids,
        mask_refs: Vec::new(),
    };
    io::save_detections_3d(&doc, &a.output)?;
    Ok(())
}

fn segment(a: SegmentArgs) -> Result<(), CliError> {
    let v = io::load_volume(&a.input)?;
    let rois = io::load_detections_3d(&a.rois)?;
    let dims = v.dims();
    if let Some(i) = rois.boxes.iter().position(|c| !c.fits_in(dims)) {
        return Err(CliError::malformed(format!("ROI {i} does not fit in volume {dims}")));
    }
    let external = match (&a.scores_axial, &a.scores_sagittal, &a.scores_coronal) {
        (Some(ax), Some(sa), Some(co)) => {
            let s = [
                segment::import_scores(ax, View::Axial)?,
                segment::import_scores(sa, View::Sagittal)?,
                segment::import_scores(co, View::Coronal)?,
            ];
            if s[0].dims() != dims {
                return Err(CliError::malformed(format!(
                    "score volumes are {} but the volume is {dims}",
                    s[0].dims()
                )));
            }
            Some(segment::fuse_views(&s[0], &s[1], &s[2])?)
        }
        _ => None,
    };
    let cfg = SegmenterConfig {
        threshold: a.threshold,
        radius: a.radius,
        ..Default::default()
    };

    let stem = a
        .output
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::malformed(format!("bad output path {}", a.output.display())))?
        .to_string();
    let dir = a.output.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::with_capacity(rois.boxes.len());
    for (i, c) in rois.boxes.iter().enumerate() {
        let frame = c.expanded(a.margin, dims);
        let mask = match &external {
            Some(full) => full.reframe(&frame),
            None => {
                let roi = v.crop(&frame)?;
                if a.three_views {
                    segment::segment_roi_three_views(&roi, &cfg)
                } else {
                    segment::segment_roi(&roi, &cfg)
                }
            }
        };
        let file = format!("{stem}.roi{i}");
        segment::save_mask(&mask, v.voxel_size(), dir.join(&file))?;
        entries.push(SegmentedRoi {
            detection: *c,
            frame,
            mask: file,
        });
    }
    let doc = SegmentationManifest {
        volume_id: rois.volume_id,
        classes: rois.classes,
        voxel_size_um: v.voxel_size(),
        dims: dims.as_array(),
        rois: entries,
    };
    io::save_json(&doc, &a.output)?;
    Ok(())
}

fn measure(a: MeasureArgs) -> Result<(), CliError> {
    let doc: SegmentationManifest = io::load_json(&a.input)?;
    let gt = match &a.gt {
        Some(p) => Some(io::load_ground_truth(p)?.cuboids()),
        None => None,
    };
    let voxel_size = a.voxel_size_um.unwrap_or(doc.voxel_size_um);
    let cfg = MetrologyConfig { radius: a.radius };
    let mut measurements = Vec::new();
    for (i, roi) in doc.rois.iter().enumerate() {
        let mask = doc.load_mask(&a.input, roi)?;
        match metrology::measure_roi(&mask, &cfg) {
            Ok(mut m) => {
                m.cuboid.class_index = roi.detection.class_index;
                m.cuboid.score = roi.detection.score;
                measurements.push(m);
            }
            Err(e @ (MetrologyError::EmptyMask | MetrologyError::EmptyAfterCleanup | MetrologyError::EmptyContour)) => {
                eprintln!("warning: ROI {i} skipped: {e}");
            }
        }
    }
    if measurements.is_empty() && !doc.rois.is_empty() {
        return Err(CliError::Empty(format!(
            "none of the {} ROIs could be measured",
            doc.rois.len()
        )));
    }
    let report = metrology::build_report(&doc.volume_id, &doc.classes, &measurements, voxel_size, gt.as_deref());
    io::save_json(&report, &a.output)?;
    write_text(&a.output.with_extension("txt"), &metrology::report_table(&report))
}

fn report(a: ReportArgs) -> Result<(), CliError> {
    let report: metrology::MetrologyReport = io::load_json(&a.input)?;
    let table = metrology::report_table(&report);
    match &a.output {
        Some(p) => write_text(p, &table),
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Detect(a) => detect(a),
        Command::Fuse(a) => fuse(a),
        Command::Segment(a) => segment(a),
        Command::Measure(a) => measure(a),
        Command::Evaluate(a) => evaluate::evaluate(a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(3);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
