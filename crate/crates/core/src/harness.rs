//! Command implementations behind the `segmin` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{ControllerConfig, HeadingController};
use crate::evaluation::{self, EpisodeMetrics, EvalError, SummaryRow};
use crate::experiment::{EpisodePlan, ExperimentSpec, SpecError};
use crate::grid::{DepthMap, Grid, VegetationMask};
use crate::oracle::{self, Mismatch};
use crate::perception::{perceive, MaskBuffer, PerceptionConfig, RowEstimate, Variant};
use crate::pgm::{self, PgmError};
use crate::sim::camera::{camera_pose, CameraModel};
use crate::sim::episode::{run_episode_observed, EpisodeError, EpisodeObserver, Outcome, StageCounts};
use crate::sim::kinematics::RobotPose;
use crate::sim::render::{FrameObservation, Renderer};
use crate::sim::world::{generate_world, ground_truth_centerline, Crop, WorldConfig, WorldError};

/// Environment variable that relocates every relative output directory.
pub const OUTPUT_ROOT_VAR: &str = "SEGMIN_OUTPUT_ROOT";
/// Perception p99 budget at 20 Hz, milliseconds.
pub const PERCEIVE_BUDGET_MS: f64 = 50.0;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Spec { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("fixtures: {0}")]
    Fixture(String),
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error("episode {id}: {source}")]
    Episode { id: String, source: EpisodeError },
    #[error("world: {0}")]
    World(#[from] WorldError),
    #[error("episode {id}: {source}")]
    Metrics { id: String, source: EvalError },
    #[error("summary: {0}")]
    Summary(EvalError),
}

impl HarnessError {
    /// 2 for unusable input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Spec { .. } | HarnessError::Fixture(_) | HarnessError::Pgm(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes through a temporary sibling and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn resolve_output_dir(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Spec {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ExperimentSpec::parse(&text).map_err(|e: SpecError| HarnessError::Spec {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub id: String,
    pub experiment: String,
    pub variant: Variant,
    pub seed: u64,
    pub outcome: Outcome,
    pub counts: StageCounts,
    pub metrics: EpisodeMetrics,
}

/// Dumps the mask history and depth map on every `stride`-th perception
/// update, named so that `oracle` can replay them.
struct FrameDumper {
    dir: PathBuf,
    stride: u64,
    seen: u64,
    error: Option<HarnessError>,
}

impl EpisodeObserver for FrameDumper {
    fn on_perception(&mut self, tick: u64, buffer: &MaskBuffer, depth: &DepthMap, _: RowEstimate) {
        self.seen += 1;
        if self.error.is_some() || (self.seen - 1) % self.stride != 0 {
            return;
        }
        if let Err(e) = dump_frame(&self.dir, &format!("t{tick:06}"), buffer, depth) {
            self.error = Some(e);
        }
    }
}

/// Writes `<stem>.depth.pgm`, `<stem>.mask.pgm` (newest) and
/// `<stem>.mask.<k>.pgm` for the k-th older mask.
pub fn dump_frame(dir: &Path, stem: &str, buffer: &MaskBuffer, depth: &DepthMap) -> Result<(), HarnessError> {
    pgm::write_depth(&dir.join(format!("{stem}.depth.pgm")), depth)?;
    let masks: Vec<&VegetationMask> = buffer.iter().collect();
    for (age, mask) in masks.iter().rev().enumerate() {
        let name = if age == 0 {
            format!("{stem}.mask.pgm")
        } else {
            format!("{stem}.mask.{age}.pgm")
        };
        pgm::write_mask(&dir.join(name), mask)?;
    }
    Ok(())
}

/// Runs one planned episode and writes its directory under `episodes_dir`.
pub fn run_plan(plan: &EpisodePlan, episodes_dir: &Path, debug_frames: bool) -> Result<EpisodeRecord, HarnessError> {
    let id = plan.id();
    let final_dir = episodes_dir.join(&id);
    let work = episodes_dir.join(format!(".{id}.tmp"));
    if work.exists() {
        fs::remove_dir_all(&work).map_err(io_err(&work))?;
    }
    fs::create_dir_all(&work).map_err(io_err(&work))?;
    fs::write(work.join("config.toml"), plan.to_toml()).map_err(io_err(&work))?;

    let world = generate_world(&plan.world)?;
    let frames_dir = work.join("frames");
    let mut dumper = FrameDumper {
        dir: frames_dir.clone(),
        stride: u64::from(plan.episode.rates.perception_hz / plan.episode.rates.control_hz).max(1),
        seen: 0,
        error: None,
    };
    if debug_frames {
        fs::create_dir_all(&frames_dir).map_err(io_err(&frames_dir))?;
    }
    let result = if debug_frames {
        run_episode_observed(&world, &plan.perception, &plan.controller, &plan.episode, &mut dumper)
    } else {
        crate::sim::episode::run_episode(&world, &plan.perception, &plan.controller, &plan.episode)
    }
    .map_err(|source| HarnessError::Episode { id: id.clone(), source })?;
    if let Some(e) = dumper.error {
        return Err(e);
    }

    let centerline = ground_truth_centerline(&world);
    let metrics = evaluation::compute_metrics(&result.log, &result.outcome, result.stop_events, &centerline)
        .map_err(|source| HarnessError::Metrics { id: id.clone(), source })?;
    let record = EpisodeRecord {
        id: id.clone(),
        experiment: plan.experiment.clone(),
        variant: plan.variant,
        seed: plan.seed,
        outcome: result.outcome,
        counts: result.counts,
        metrics,
    };

    let log_path = work.join("log.csv");
    let file = fs::File::create(&log_path).map_err(io_err(&log_path))?;
    evaluation::write_log_csv(std::io::BufWriter::new(file), &result.log)
        .map_err(|source| HarnessError::Metrics { id: id.clone(), source })?;
    let json = serde_json::to_string_pretty(&record).expect("record serializes");
    fs::write(work.join("metrics.json"), json + "\n").map_err(io_err(&work))?;

    if final_dir.exists() {
        fs::remove_dir_all(&final_dir).map_err(io_err(&final_dir))?;
    }
    fs::rename(&work, &final_dir).map_err(io_err(&final_dir))?;
    Ok(record)
}

/// Mean and spread per (experiment, variant), in spec order.
pub fn summarize(spec: &ExperimentSpec, records: &[EpisodeRecord]) -> Result<Vec<SummaryRow>, HarnessError> {
    let mut rows = Vec::new();
    for exp in &spec.experiments {
        for &variant in &exp.variants {
            let runs: Vec<EpisodeMetrics> = records
                .iter()
                .filter(|r| r.experiment == exp.name && r.variant == variant)
                .map(|r| r.metrics)
                .collect();
            rows.push(SummaryRow {
                world: exp.name.clone(),
                method: variant.to_string(),
                summary: evaluation::aggregate(&runs).map_err(HarnessError::Summary)?,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub records: Vec<EpisodeRecord>,
    pub summary: Vec<SummaryRow>,
}

impl RunReport {
    pub fn all_completed(&self) -> bool {
        self.records.iter().all(|r| r.outcome.is_completed())
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_completed() {
            0
        } else {
            1
        }
    }
}

/// Runs every episode of `spec` in parallel and writes the artifacts.
pub fn run_spec(
    spec: &ExperimentSpec,
    spec_text: &str,
    output_dir: &Path,
    debug_frames: bool,
) -> Result<RunReport, HarnessError> {
    let episodes_dir = output_dir.join("episodes");
    fs::create_dir_all(&episodes_dir).map_err(io_err(&episodes_dir))?;
    write_atomic(&output_dir.join("spec.toml"), spec_text.as_bytes())?;

    let plans = spec.plans();
    let outcomes: Vec<Result<EpisodeRecord, HarnessError>> = plans
        .par_iter()
        .map(|plan| run_plan(plan, &episodes_dir, debug_frames))
        .collect();
    let records = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;

    let summary = summarize(spec, &records)?;
    let mut csv = Vec::new();
    evaluation::write_summary_csv(&mut csv, &summary).map_err(HarnessError::Summary)?;
    write_atomic(&output_dir.join("summary.csv"), &csv)?;
    Ok(RunReport {
        output_dir: output_dir.to_path_buf(),
        records,
        summary,
    })
}

pub fn cmd_run(spec_path: &Path, debug_frames: bool) -> Result<RunReport, HarnessError> {
    let spec = load_spec(spec_path)?;
    let text = fs::read_to_string(spec_path).map_err(io_err(spec_path))?;
    let output_dir = resolve_output_dir(&spec.output_dir);
    run_spec(&spec, &text, &output_dir, debug_frames || spec.debug_frames)
}

/// One fixture: masks oldest first, plus the depth of the newest frame.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub masks: Vec<VegetationMask>,
    pub depth: DepthMap,
}

pub fn load_fixtures(dir: &Path) -> Result<Vec<Fixture>, HarnessError> {
    let entries = fs::read_dir(dir).map_err(|e| HarnessError::Fixture(format!("{}: {e}", dir.display())))?;
    let mut stems: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".depth.pgm")).map(str::to_string))
        .collect();
    stems.sort();
    if stems.is_empty() {
        return Err(HarnessError::Fixture(format!("no *.depth.pgm files in {}", dir.display())));
    }
    stems
        .into_iter()
        .map(|name| {
            let depth = pgm::read_depth(&dir.join(format!("{name}.depth.pgm")))?;
            let newest = dir.join(format!("{name}.mask.pgm"));
            if !newest.exists() {
                return Err(HarnessError::Fixture(format!("{} is missing", newest.display())));
            }
            let mut masks = vec![pgm::read_mask(&newest)?];
            for age in 1.. {
                let older = dir.join(format!("{name}.mask.{age}.pgm"));
                if !older.exists() {
                    break;
                }
                masks.push(pgm::read_mask(&older)?);
            }
            masks.reverse();
            for m in &masks {
                if m.dims() != depth.dims() {
                    return Err(HarnessError::Fixture(format!(
                        "{name}: mask is {:?} but depth is {:?}",
                        m.dims(),
                        depth.dims()
                    )));
                }
            }
            Ok(Fixture { name, masks, depth })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub fixtures: usize,
    pub checks: usize,
    pub mismatch: Option<(String, Mismatch)>,
}

/// Configurations each fixture is checked under: every variant at every
/// crop depth threshold.
pub fn oracle_configs(width: usize) -> Vec<PerceptionConfig> {
    let window = if width >= 15 { 15 } else { (width - 1) | 1 };
    let mut thresholds: Vec<f64> = Crop::ALL.iter().map(|c| c.depth_threshold()).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut out = Vec::new();
    for variant in Variant::ALL {
        for &depth_threshold in &thresholds {
            out.push(PerceptionConfig {
                depth_threshold,
                smoothing_window: window,
                history: 3,
                variant,
            });
        }
    }
    out
}

pub fn cmd_oracle(dir: &Path, tol: f64) -> Result<OracleReport, HarnessError> {
    let fixtures = load_fixtures(dir)?;
    let mut checks = 0;
    for f in &fixtures {
        for cfg in oracle_configs(f.depth.width()) {
            checks += 1;
            if let Err(m) = oracle::check_pipeline(&f.masks, &f.depth, &cfg, tol) {
                let label = format!("{} ({}, d_th {})", f.name, cfg.variant, cfg.depth_threshold);
                return Ok(OracleReport {
                    fixtures: fixtures.len(),
                    checks,
                    mismatch: Some((label, m)),
                });
            }
        }
    }
    Ok(OracleReport {
        fixtures: fixtures.len(),
        checks,
        mismatch: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageLatency {
    pub stage: &'static str,
    pub samples: usize,
    pub p50_ms: f64,
    pub p99_ms: f64,
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn latency(stage: &'static str, mut samples: Vec<f64>) -> StageLatency {
    samples.sort_by(f64::total_cmp);
    StageLatency {
        stage,
        samples: samples.len(),
        p50_ms: percentile(&samples, 50.0),
        p99_ms: percentile(&samples, 99.0),
    }
}

/// Times render, perceive (SegMinD, the heaviest variant) and control on
/// frames captured along a High Trees corridor. The first frame is warmup.
pub fn cmd_bench(frames: usize, seed: u64) -> Result<Vec<StageLatency>, HarnessError> {
    let crop = Crop::HighTreesField;
    let world = generate_world(&WorldConfig::for_crop(crop).with_seed(seed))?;
    let cam = CameraModel::default();
    let renderer = Renderer::new(cam);
    let cfg = PerceptionConfig {
        depth_threshold: crop.depth_threshold(),
        variant: Variant::SegMinD,
        ..Default::default()
    };
    let mut buffer = MaskBuffer::new(cfg.history).expect("history is positive");
    let mut controller = HeadingController::new(ControllerConfig::default()).expect("default config is valid");
    let (x0, y0, th0) = world.start();
    let track_length = world.config.track_length;

    let (mut render_ms, mut perceive_ms, mut control_ms) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..=frames {
        let s = track_length * k as f64 / (frames + 1) as f64;
        let pose = RobotPose::planar(x0 + s * th0.cos(), y0 + s * th0.sin(), th0);

        let t0 = Instant::now();
        let obs: FrameObservation = renderer.render(&world, &camera_pose(&pose, &cam), 0.0);
        let t1 = Instant::now();
        buffer.push(obs.mask).expect("constant frame size");
        let est = perceive(&buffer, &obs.depth, &cfg).expect("valid config");
        let t2 = Instant::now();
        let _ = controller.update(est.center());
        let t3 = Instant::now();

        if k > 0 {
            render_ms.push((t1 - t0).as_secs_f64() * 1e3);
            perceive_ms.push((t2 - t1).as_secs_f64() * 1e3);
            control_ms.push((t3 - t2).as_secs_f64() * 1e3);
        }
    }
    Ok(vec![
        latency("render", render_ms),
        latency("perceive", perceive_ms),
        latency("control", control_ms),
    ])
}

pub fn write_bench_csv(out: impl Write, rows: &[StageLatency]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stage", "samples", "p50_ms", "p99_ms"])?;
    for r in rows {
        w.write_record([
            r.stage.to_string(),
            r.samples.to_string(),
            format!("{:.4}", r.p50_ms),
            format!("{:.4}", r.p99_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_gen_world(crop: Crop, seed: u64, curvature: f64) -> Result<String, HarnessError> {
    let world = generate_world(&WorldConfig::for_crop(crop).with_seed(seed).with_curvature(curvature))?;
    Ok(serde_json::to_string_pretty(&world).expect("world serializes"))
}
