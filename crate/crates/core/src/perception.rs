//! Row-center estimation from vegetation masks and depth.
//!
//! The pipeline fuses the last few masks with a logical OR, drops vegetation
//! beyond a depth threshold, optionally weights what remains by normalized
//! inverse depth, and sums each column into a histogram. SegMin and SegMinD
//! take the (tie-averaged) global minimum of the smoothed histogram as the
//! row center. SegZeros looks for the widest run of vegetation-free columns.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{ensure_same_dims, DepthMap, Grid, GridError, VegetationMask, WeightedMask};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("no frames")]
    NoFrames,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("depth threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("smoothing window must be odd and within 1..={width}, got {window}")]
    InvalidWindow { window: usize, width: usize },
    #[error("mask history must hold at least one frame")]
    InvalidHistory,
}

/// Row-center estimation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    SegMin,
    SegMinD,
    SegZeros,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::SegMin, Variant::SegMinD, Variant::SegZeros];

    /// Stable identifier used in file names and CSV output.
    pub fn slug(self) -> &'static str {
        match self {
            Variant::SegMin => "seg_min",
            Variant::SegMinD => "seg_min_d",
            Variant::SegZeros => "seg_zeros",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::SegMin => "SegMin",
            Variant::SegMinD => "SegMinD",
            Variant::SegZeros => "SegZeros",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerceptionConfig {
    /// Vegetation farther than this (meters) is discarded.
    pub depth_threshold: f64,
    /// Moving-average window over the column histogram, in pixels. Must be odd.
    pub smoothing_window: usize,
    /// Number of most recent masks OR-fused together.
    pub history: usize,
    pub variant: Variant,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            depth_threshold: 5.0,
            smoothing_window: 15,
            history: 3,
            variant: Variant::SegMin,
        }
    }
}

impl PerceptionConfig {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        check_threshold(self.depth_threshold)?;
        if self.smoothing_window == 0 || self.smoothing_window % 2 == 0 {
            return Err(PerceptionError::InvalidWindow {
                window: self.smoothing_window,
                width: usize::MAX,
            });
        }
        if self.history == 0 {
            return Err(PerceptionError::InvalidHistory);
        }
        Ok(())
    }
}

fn check_threshold(d_th: f64) -> Result<(), PerceptionError> {
    if d_th.is_finite() && d_th > 0.0 {
        Ok(())
    } else {
        Err(PerceptionError::InvalidThreshold(d_th))
    }
}

/// The most recent masks, newest last. Oldest entries are evicted at capacity.
#[derive(Debug, Clone)]
pub struct MaskBuffer {
    capacity: usize,
    entries: VecDeque<VegetationMask>,
}

impl MaskBuffer {
    pub fn new(capacity: usize) -> Result<Self, PerceptionError> {
        if capacity == 0 {
            return Err(PerceptionError::InvalidHistory);
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    /// Appends a mask, evicting the oldest when full. All masks must share dimensions.
    pub fn push(&mut self, mask: VegetationMask) -> Result<(), PerceptionError> {
        if let Some(first) = self.entries.front() {
            ensure_same_dims(first, &mask)?;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(mask);
        Ok(())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &VegetationMask> {
        self.entries.iter()
    }

    pub fn latest(&self) -> Option<&VegetationMask> {
        self.entries.back()
    }
}

/// Per-column vegetation totals.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnHistogram(Vec<f64>);

impl ColumnHistogram {
    /// Entries must be finite and non-negative.
    pub fn new(values: Vec<f64>) -> Option<Self> {
        if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return None;
        }
        Some(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Output of row-center search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowEstimate {
    /// Row center as a (possibly fractional) column index.
    Center(f64),
    /// No vegetation-free column exists (SegZeros only).
    NoGap,
}

impl RowEstimate {
    pub fn center(self) -> Option<f64> {
        match self {
            RowEstimate::Center(x) => Some(x),
            RowEstimate::NoGap => None,
        }
    }
}

/// Cell-wise OR over the buffered masks.
pub fn fuse_masks(buffer: &MaskBuffer) -> Result<VegetationMask, PerceptionError> {
    fuse_mask_iter(buffer.iter())
}

/// Cell-wise OR over any sequence of equally sized masks.
pub fn fuse_mask_iter<'a>(
    masks: impl IntoIterator<Item = &'a VegetationMask>,
) -> Result<VegetationMask, PerceptionError> {
    let mut iter = masks.into_iter();
    let mut fused = iter.next().ok_or(PerceptionError::NoFrames)?.clone();
    for mask in iter {
        ensure_same_dims(&fused, mask)?;
        for (acc, &c) in fused.cells_mut().iter_mut().zip(mask.cells()) {
            *acc |= c;
        }
    }
    Ok(fused)
}

/// Keeps vegetation pixels whose depth is at most `d_th`.
pub fn gate_by_depth(
    mask: &VegetationMask,
    depth: &DepthMap,
    d_th: f64,
) -> Result<VegetationMask, PerceptionError> {
    check_threshold(d_th)?;
    ensure_same_dims(mask, depth)?;
    let mut out = mask.clone();
    for (c, &d) in out.cells_mut().iter_mut().zip(depth.cells()) {
        *c = *c && d <= d_th;
    }
    Ok(out)
}

/// Scales each kept pixel by `1 - depth / d_th`, clamped to [0, 1].
pub fn weight_by_inverse_depth(
    mask: &VegetationMask,
    depth: &DepthMap,
    d_th: f64,
) -> Result<WeightedMask, PerceptionError> {
    check_threshold(d_th)?;
    ensure_same_dims(mask, depth)?;
    let cells = mask
        .cells()
        .iter()
        .zip(depth.cells())
        .map(|(&m, &d)| {
            if m {
                (1.0 - d / d_th).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(WeightedMask::from_cells(mask.width(), mask.height(), cells)?)
}

/// Sums each column of the grid.
pub fn column_histogram(grid: &impl Grid) -> ColumnHistogram {
    let (w, h) = grid.dims();
    let mut sums = vec![0.0; w];
    for i in 0..h {
        for (j, s) in sums.iter_mut().enumerate() {
            *s += grid.value(i, j);
        }
    }
    ColumnHistogram(sums)
}

/// Centered moving average over `window` entries.
///
/// Near the borders the window is truncated to valid indices and divided by
/// the number of entries it actually covers.
pub fn smooth_histogram(
    hist: &ColumnHistogram,
    window: usize,
) -> Result<ColumnHistogram, PerceptionError> {
    let values = hist.values();
    let w = values.len();
    if window == 0 || window % 2 == 0 || window > w {
        return Err(PerceptionError::InvalidWindow { window, width: w });
    }
    let half = window / 2;
    let smoothed = (0..w)
        .map(|j| {
            let span = &values[j.saturating_sub(half)..(j + half + 1).min(w)];
            let (lo, hi) = span
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            // Clamping only removes rounding; the exact mean lies in [lo, hi].
            (span.iter().sum::<f64>() / span.len() as f64).clamp(lo, hi)
        })
        .collect();
    Ok(ColumnHistogram(smoothed))
}

/// Index of the global minimum. When several columns share the minimum value,
/// returns the mean of their indices.
pub fn find_row_center(hist: &ColumnHistogram) -> f64 {
    let min = hist.values().iter().copied().fold(f64::INFINITY, f64::min);
    let (sum, count) = hist
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == min)
        .fold((0.0, 0usize), |(s, n), (j, _)| (s + j as f64, n + 1));
    sum / count as f64
}

/// Maximal runs of exactly-zero entries as inclusive `(start, end)` pairs.
pub fn zero_runs(values: &[f64]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (j, &v) in values.iter().enumerate() {
        match (v == 0.0, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                runs.push((s, j - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, values.len() - 1));
    }
    runs
}

/// SegZeros row search on a column histogram: center of the widest run of
/// zero columns, preferring the run closest to the frame center.
///
/// Two equally wide runs equidistant from the center are averaged, so the
/// result mirrors exactly under a horizontal flip.
pub fn segzeros_from_histogram(hist: &ColumnHistogram) -> RowEstimate {
    let runs = zero_runs(hist.values());
    let Some(widest) = runs.iter().map(|(s, e)| e - s + 1).max() else {
        return RowEstimate::NoGap;
    };
    let frame_center = (hist.len() as f64 - 1.0) / 2.0;
    let centers: Vec<f64> = runs
        .iter()
        .filter(|(s, e)| e - s + 1 == widest)
        .map(|(s, e)| (*s + *e) as f64 / 2.0)
        .collect();
    let nearest = centers
        .iter()
        .map(|c| (c - frame_center).abs())
        .fold(f64::INFINITY, f64::min);
    let tied: Vec<f64> = centers
        .into_iter()
        .filter(|c| (c - frame_center).abs() == nearest)
        .collect();
    RowEstimate::Center(tied.iter().sum::<f64>() / tied.len() as f64)
}

/// SegZeros on a depth-gated mask.
pub fn segzeros_center(mask: &VegetationMask) -> RowEstimate {
    segzeros_from_histogram(&column_histogram(mask))
}

/// Every intermediate product of one perception step.
#[derive(Debug, Clone)]
pub struct PerceptionTrace {
    pub fused: VegetationMask,
    pub gated: VegetationMask,
    /// Present for SegMinD only.
    pub weighted: Option<WeightedMask>,
    pub histogram: ColumnHistogram,
    /// Absent for SegZeros, which works on the raw histogram.
    pub smoothed: Option<ColumnHistogram>,
    pub estimate: RowEstimate,
}

/// Runs the full pipeline and keeps every stage.
pub fn perceive_traced(
    buffer: &MaskBuffer,
    depth: &DepthMap,
    cfg: &PerceptionConfig,
) -> Result<PerceptionTrace, PerceptionError> {
    let fused = fuse_masks(buffer)?;
    let gated = gate_by_depth(&fused, depth, cfg.depth_threshold)?;
    match cfg.variant {
        Variant::SegZeros => {
            let histogram = column_histogram(&gated);
            let estimate = segzeros_from_histogram(&histogram);
            Ok(PerceptionTrace {
                fused,
                gated,
                weighted: None,
                histogram,
                smoothed: None,
                estimate,
            })
        }
        Variant::SegMin | Variant::SegMinD => {
            let weighted = if cfg.variant == Variant::SegMinD {
                Some(weight_by_inverse_depth(&gated, depth, cfg.depth_threshold)?)
            } else {
                None
            };
            let histogram = match &weighted {
                Some(wm) => column_histogram(wm),
                None => column_histogram(&gated),
            };
            let smoothed = smooth_histogram(&histogram, cfg.smoothing_window)?;
            let estimate = RowEstimate::Center(find_row_center(&smoothed));
            Ok(PerceptionTrace {
                fused,
                gated,
                weighted,
                histogram,
                smoothed: Some(smoothed),
                estimate,
            })
        }
    }
}

/// Row center for the configured variant.
pub fn perceive(
    buffer: &MaskBuffer,
    depth: &DepthMap,
    cfg: &PerceptionConfig,
) -> Result<RowEstimate, PerceptionError> {
    perceive_traced(buffer, depth, cfg).map(|t| t.estimate)
}
