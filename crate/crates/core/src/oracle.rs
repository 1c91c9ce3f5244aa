//! Brute-force reference implementation of every perception stage.
//!
//! Works on nested `Vec<Vec<_>>` rows with plain loops and shares no code
//! with [`crate::perception`]. [`check_pipeline`] feeds both implementations
//! the same input at every stage and reports the first disagreement.

use std::fmt;

use crate::grid::{DepthMap, Grid, VegetationMask};
use crate::perception::{self, ColumnHistogram, MaskBuffer, PerceptionConfig, RowEstimate, Variant};

type Rows<T> = Vec<Vec<T>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Fuse,
    Gate,
    Weight,
    Histogram,
    Smooth,
    Argmin,
    SegZeros,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Fuse => "fuse",
            Stage::Gate => "gate",
            Stage::Weight => "weight",
            Stage::Histogram => "histogram",
            Stage::Smooth => "smooth",
            Stage::Argmin => "argmin",
            Stage::SegZeros => "segzeros",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub stage: Stage,
    pub detail: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.detail)
    }
}

fn rows_of<G: Grid>(g: &G) -> Rows<f64> {
    (0..g.height())
        .map(|i| (0..g.width()).map(|j| g.value(i, j)).collect())
        .collect()
}

pub fn fuse(frames: &[Rows<f64>]) -> Rows<f64> {
    let mut out = frames[0].clone();
    for frame in &frames[1..] {
        for i in 0..out.len() {
            for j in 0..out[i].len() {
                if frame[i][j] != 0.0 {
                    out[i][j] = 1.0;
                }
            }
        }
    }
    out
}

pub fn gate(mask: &Rows<f64>, depth: &Rows<f64>, d_th: f64) -> Rows<f64> {
    let mut out = mask.clone();
    for i in 0..out.len() {
        for j in 0..out[i].len() {
            if !(mask[i][j] != 0.0 && depth[i][j] <= d_th) {
                out[i][j] = 0.0;
            }
        }
    }
    out
}

pub fn weight(mask: &Rows<f64>, depth: &Rows<f64>, d_th: f64) -> Rows<f64> {
    let mut out = mask.clone();
    for i in 0..out.len() {
        for j in 0..out[i].len() {
            out[i][j] = if mask[i][j] == 0.0 || depth[i][j] >= d_th {
                0.0
            } else {
                1.0 - depth[i][j] / d_th
            };
        }
    }
    out
}

pub fn histogram(grid: &Rows<f64>) -> Vec<f64> {
    let width = grid[0].len();
    let mut out = Vec::with_capacity(width);
    for j in 0..width {
        let mut sum = 0.0;
        for row in grid {
            sum += row[j];
        }
        out.push(sum);
    }
    out
}

pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let half = (window / 2) as i64;
    let n = values.len() as i64;
    let mut out = Vec::with_capacity(values.len());
    for j in 0..n {
        let mut sum = 0.0;
        let mut count = 0.0;
        for k in (j - half)..=(j + half) {
            if k >= 0 && k < n {
                sum += values[k as usize];
                count += 1.0;
            }
        }
        out.push(sum / count);
    }
    out
}

pub fn argmin(values: &[f64]) -> f64 {
    let mut best = values[0];
    for &v in values {
        if v < best {
            best = v;
        }
    }
    let mut sum = 0.0;
    let mut count = 0.0;
    for (j, &v) in values.iter().enumerate() {
        if v == best {
            sum += j as f64;
            count += 1.0;
        }
    }
    sum / count
}

/// Enumerates every `(start, end)` pair and keeps the maximal zero runs.
pub fn segzeros(values: &[f64]) -> Option<f64> {
    let n = values.len();
    let mut runs = Vec::new();
    for a in 0..n {
        for b in a..n {
            let all_zero = values[a..=b].iter().all(|&v| v == 0.0);
            let closed_left = a == 0 || values[a - 1] != 0.0;
            let closed_right = b == n - 1 || values[b + 1] != 0.0;
            if all_zero && closed_left && closed_right {
                runs.push((a, b));
            }
        }
    }
    if runs.is_empty() {
        return None;
    }
    let mid = (n as f64 - 1.0) / 2.0;
    let mut best: Vec<f64> = Vec::new();
    let mut best_key = (0usize, f64::INFINITY);
    for &(a, b) in &runs {
        let width = b - a + 1;
        let center = (a + b) as f64 / 2.0;
        let dist = (center - mid).abs();
        if width > best_key.0 || (width == best_key.0 && dist < best_key.1) {
            best_key = (width, dist);
            best = vec![center];
        } else if width == best_key.0 && dist == best_key.1 {
            best.push(center);
        }
    }
    Some(best.iter().sum::<f64>() / best.len() as f64)
}

fn compare_vec(stage: Stage, lib: &[f64], oracle: &[f64], tol: f64) -> Result<(), Mismatch> {
    if lib.len() != oracle.len() {
        return Err(Mismatch {
            stage,
            detail: format!("length {} vs oracle {}", lib.len(), oracle.len()),
        });
    }
    for (k, (a, b)) in lib.iter().zip(oracle).enumerate() {
        if (a - b).abs() > tol {
            return Err(Mismatch {
                stage,
                detail: format!("index {k}: library {a} vs oracle {b}"),
            });
        }
    }
    Ok(())
}

fn compare_rows(stage: Stage, lib: &Rows<f64>, oracle: &Rows<f64>, tol: f64) -> Result<(), Mismatch> {
    for (i, (a, b)) in lib.iter().zip(oracle).enumerate() {
        compare_vec(stage, a, b, tol).map_err(|m| Mismatch {
            detail: format!("row {i}, {}", m.detail),
            ..m
        })?;
    }
    Ok(())
}

fn hist(values: &[f64], stage: Stage) -> Result<ColumnHistogram, Mismatch> {
    ColumnHistogram::new(values.to_vec()).ok_or_else(|| Mismatch {
        stage,
        detail: "histogram has invalid entries".into(),
    })
}

fn lib_err(stage: Stage, e: impl fmt::Display) -> Mismatch {
    Mismatch {
        stage,
        detail: format!("library error: {e}"),
    }
}

/// Compares library and oracle stage by stage on `frames` (oldest first)
/// and `depth`. Each stage receives the library's output of the previous
/// stage, so a disagreement is attributed to the stage that caused it.
pub fn check_pipeline(
    frames: &[VegetationMask],
    depth: &DepthMap,
    cfg: &PerceptionConfig,
    tol: f64,
) -> Result<(), Mismatch> {
    let mut buffer = MaskBuffer::new(frames.len().max(1)).map_err(|e| lib_err(Stage::Fuse, e))?;
    for f in frames {
        buffer.push(f.clone()).map_err(|e| lib_err(Stage::Fuse, e))?;
    }
    let depth_rows = rows_of(depth);
    let d_th = cfg.depth_threshold;

    let fused = perception::fuse_masks(&buffer).map_err(|e| lib_err(Stage::Fuse, e))?;
    let frame_rows: Vec<Rows<f64>> = frames.iter().map(rows_of).collect();
    compare_rows(Stage::Fuse, &rows_of(&fused), &fuse(&frame_rows), tol)?;

    let gated = perception::gate_by_depth(&fused, depth, d_th).map_err(|e| lib_err(Stage::Gate, e))?;
    let gated_rows = rows_of(&gated);
    compare_rows(Stage::Gate, &gated_rows, &gate(&rows_of(&fused), &depth_rows, d_th), tol)?;

    let lib_hist = match cfg.variant {
        Variant::SegMinD => {
            let weighted = perception::weight_by_inverse_depth(&gated, depth, d_th)
                .map_err(|e| lib_err(Stage::Weight, e))?;
            let weighted_rows = rows_of(&weighted);
            compare_rows(Stage::Weight, &weighted_rows, &weight(&gated_rows, &depth_rows, d_th), tol)?;
            let h = perception::column_histogram(&weighted);
            compare_vec(Stage::Histogram, h.values(), &histogram(&weighted_rows), tol)?;
            h
        }
        Variant::SegMin | Variant::SegZeros => {
            let h = perception::column_histogram(&gated);
            compare_vec(Stage::Histogram, h.values(), &histogram(&gated_rows), tol)?;
            h
        }
    };

    if cfg.variant == Variant::SegZeros {
        let lib = perception::segzeros_from_histogram(&lib_hist).center();
        let oracle = segzeros(lib_hist.values());
        return match (lib, oracle) {
            (Some(a), Some(b)) if (a - b).abs() <= tol => Ok(()),
            (None, None) => Ok(()),
            _ => Err(Mismatch {
                stage: Stage::SegZeros,
                detail: format!("library {lib:?} vs oracle {oracle:?}"),
            }),
        };
    }

    let smoothed = perception::smooth_histogram(&lib_hist, cfg.smoothing_window)
        .map_err(|e| lib_err(Stage::Smooth, e))?;
    compare_vec(
        Stage::Smooth,
        smoothed.values(),
        &smooth(lib_hist.values(), cfg.smoothing_window),
        tol,
    )?;

    let lib = perception::find_row_center(&smoothed);
    let oracle = argmin(hist(smoothed.values(), Stage::Argmin)?.values());
    compare_vec(Stage::Argmin, &[lib], &[oracle], tol)?;

    let end_to_end = perception::perceive(&buffer, depth, cfg).map_err(|e| lib_err(Stage::Argmin, e))?;
    if end_to_end != RowEstimate::Center(lib) {
        return Err(Mismatch {
            stage: Stage::Argmin,
            detail: format!("pipeline returned {end_to_end:?}, stages gave {lib}"),
        });
    }
    Ok(())
}
