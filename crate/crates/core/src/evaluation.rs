//! Trajectory and command metrics, and their aggregation over repeated runs.
//!
//! Lateral error is the unsigned distance from each logged pose to the nearest
//! point of the reference centerline. The heading term is the mean absolute
//! difference between robot heading and the centerline tangent at that
//! nearest point.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::path::Polyline;
use crate::sim::episode::{LogRow, Outcome};
use crate::sim::track::wrap_angle;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("centerline is empty")]
    EmptyCenterline,
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("no runs to aggregate")]
    NoRuns,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Present only when the end line was crossed.
    pub clearance_time: Option<f64>,
    pub mae: f64,
    pub mse: f64,
    /// Mean absolute heading error against the centerline tangent, radians.
    pub cum_heading_avg: f64,
    pub v_avg: f64,
    pub omega_stddev: f64,
    pub stop_events: u64,
    pub samples: usize,
    pub completed: bool,
}

/// Distance of each point to the nearest point on `centerline`.
pub fn lateral_errors(points: &[[f64; 2]], centerline: &Polyline) -> Result<Vec<f64>, EvalError> {
    if centerline.is_empty() {
        return Err(EvalError::EmptyCenterline);
    }
    if points.is_empty() {
        return Err(EvalError::EmptyTrajectory);
    }
    Ok(points
        .iter()
        .map(|&p| centerline.project(p).expect("non-empty").distance)
        .collect())
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    values.sum::<f64>() / n as f64
}

/// Metrics for one episode. Incomplete episodes are scored over the
/// traversed portion and carry no clearance time.
pub fn compute_metrics(
    log: &[LogRow],
    outcome: &Outcome,
    stop_events: u64,
    centerline: &Polyline,
) -> Result<EpisodeMetrics, EvalError> {
    let points: Vec<[f64; 2]> = log.iter().map(|r| [r.x, r.y]).collect();
    let errors = lateral_errors(&points, centerline)?;
    let cum_heading_avg = mean(log.iter().map(|r| {
        let tangent = centerline.project([r.x, r.y]).expect("non-empty").tangent;
        wrap_angle(r.theta - tangent).abs()
    }));
    let v_avg = mean(log.iter().map(|r| r.v_bar));
    let omega_mean = mean(log.iter().map(|r| r.omega_bar));
    let omega_var = mean(log.iter().map(|r| (r.omega_bar - omega_mean).powi(2)));
    Ok(EpisodeMetrics {
        clearance_time: outcome.clearance_time(),
        mae: mean(errors.iter().copied()),
        mse: mean(errors.iter().map(|e| e * e)),
        cum_heading_avg,
        v_avg,
        omega_stddev: omega_var.sqrt(),
        stop_events,
        samples: log.len(),
        completed: outcome.is_completed(),
    })
}

/// Mean and sample standard deviation. `std` is 0 when `n == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std, n })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub completed: usize,
    /// Over completed runs only; `None` when none completed.
    pub clearance_time: Option<Stat>,
    pub mae: Stat,
    pub mse: Stat,
    pub cum_heading_avg: Stat,
    pub v_avg: Stat,
    pub omega_stddev: Stat,
    pub stop_events: Stat,
}

impl RunSummary {
    /// Fewer than two runs means the spread is undefined.
    pub fn single_run(&self) -> bool {
        self.runs == 1
    }
}

pub fn aggregate(runs: &[EpisodeMetrics]) -> Result<RunSummary, EvalError> {
    if runs.is_empty() {
        return Err(EvalError::NoRuns);
    }
    let stat = |f: fn(&EpisodeMetrics) -> f64| {
        Stat::of(&runs.iter().map(f).collect::<Vec<_>>()).expect("non-empty")
    };
    let clearances: Vec<f64> = runs.iter().filter_map(|m| m.clearance_time).collect();
    Ok(RunSummary {
        runs: runs.len(),
        completed: runs.iter().filter(|m| m.completed).count(),
        clearance_time: Stat::of(&clearances),
        mae: stat(|m| m.mae),
        mse: stat(|m| m.mse),
        cum_heading_avg: stat(|m| m.cum_heading_avg),
        v_avg: stat(|m| m.v_avg),
        omega_stddev: stat(|m| m.omega_stddev),
        stop_events: stat(|m| m.stop_events as f64),
    })
}

pub fn write_log_csv(writer: impl Write, log: &[LogRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(writer);
    for row in log {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_log_csv(reader: impl Read) -> Result<Vec<LogRow>, EvalError> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<Result<Vec<LogRow>, _>>()?)
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub world: String,
    pub method: String,
    pub summary: RunSummary,
}

const SUMMARY_HEADER: [&str; 18] = [
    "world",
    "method",
    "runs",
    "completed",
    "clearance_time_mean",
    "clearance_time_std",
    "mae_mean",
    "mae_std",
    "mse_mean",
    "mse_std",
    "cum_heading_avg_mean",
    "cum_heading_avg_std",
    "v_avg_mean",
    "v_avg_std",
    "omega_stddev_mean",
    "omega_stddev_std",
    "stop_events_mean",
    "stop_events_std",
];

/// Results table: one row per (world, method), mean and standard deviation
/// per metric, fixed six-decimal formatting.
pub fn write_summary_csv(writer: impl Write, rows: &[SummaryRow]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER)?;
    let f = |x: f64| format!("{x:.6}");
    for row in rows {
        let s = &row.summary;
        let (ct_mean, ct_std) = s
            .clearance_time
            .map_or((String::new(), String::new()), |c| (f(c.mean), f(c.std)));
        let mut record = vec![
            row.world.clone(),
            row.method.clone(),
            s.runs.to_string(),
            s.completed.to_string(),
            ct_mean,
            ct_std,
        ];
        for stat in [s.mae, s.mse, s.cum_heading_avg, s.v_avg, s.omega_stddev, s.stop_events] {
            record.push(f(stat.mean));
            record.push(f(stat.std));
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn straight(len: f64) -> Polyline {
        let n = (len / 0.1) as usize;
        Polyline::new((0..=n).map(|k| [k as f64 * 0.1, 0.0]).collect())
    }

    fn row(t: f64, x: f64, y: f64, theta: f64, v: f64, w: f64) -> LogRow {
        LogRow {
            t,
            x,
            y,
            theta,
            x_h: Some(112.0),
            d: Some(0.0),
            v_x: v,
            omega_z: w,
            v_bar: v,
            omega_bar: w,
        }
    }

    #[test]
    fn lateral_error_cases() {
        let line = straight(10.0);
        assert_eq!(
            lateral_errors(&[[1.0, 0.0], [2.5, 0.0]], &line).unwrap(),
            vec![0.0, 0.0]
        );
        let offset = lateral_errors(&[[1.0, 0.1], [7.3, -0.1]], &line).unwrap();
        assert!(offset.iter().all(|e| (e - 0.1).abs() < 1e-12));
        let single = lateral_errors(&[[0.0, 0.3]], &line).unwrap();
        assert!((single[0] - 0.3).abs() < 1e-15);
        assert!(matches!(
            lateral_errors(&[[0.0, 0.0]], &Polyline::new(vec![])),
            Err(EvalError::EmptyCenterline)
        ));
    }

    #[test]
    fn perfect_straight_run() {
        let line = straight(30.0);
        let log: Vec<LogRow> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.2;
                row(t, 0.5 * t, 0.0, 0.0, 0.5, 0.0)
            })
            .collect();
        let m = compute_metrics(
            &log,
            &Outcome::Completed {
                clearance_time: 40.0,
            },
            0,
            &line,
        )
        .unwrap();
        assert_eq!(m.clearance_time, Some(40.0));
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.cum_heading_avg, 0.0);
        assert_eq!(m.v_avg, 0.5);
        assert_eq!(m.omega_stddev, 0.0);
    }

    #[test]
    fn sinusoidal_mae() {
        // mean |0.1 sin u| over whole periods is 0.2 / pi
        let line = straight(40.0);
        let n = 20_000;
        let log: Vec<LogRow> = (0..n)
            .map(|k| {
                let u = 2.0 * PI * 4.0 * (k as f64 + 0.5) / n as f64;
                row(0.0, 5.0 + u, 0.1 * u.sin(), 0.0, 0.5, 0.3)
            })
            .collect();
        let m = compute_metrics(&log, &Outcome::TimedOut, 0, &line).unwrap();
        assert!((m.mae - 0.2 / PI).abs() < 1e-6, "{}", m.mae);
        assert!(m.mse >= m.mae * m.mae);
        assert!(m.omega_stddev < 1e-12);
        assert!(!m.completed && m.clearance_time.is_none());
    }

    #[test]
    fn aggregate_stats() {
        let base = EpisodeMetrics {
            clearance_time: Some(40.0),
            mae: 0.1,
            mse: 0.02,
            cum_heading_avg: 0.01,
            v_avg: 0.49,
            omega_stddev: 0.05,
            stop_events: 0,
            samples: 10,
            completed: true,
        };
        let same = aggregate(&[base, base, base]).unwrap();
        assert!(same.mae.std < 1e-12);
        let runs: Vec<EpisodeMetrics> = [40.0, 41.0, 42.0]
            .iter()
            .map(|&c| EpisodeMetrics {
                clearance_time: Some(c),
                ..base
            })
            .collect();
        let s = aggregate(&runs).unwrap();
        let ct = s.clearance_time.unwrap();
        assert!((ct.mean - 41.0).abs() < 1e-12 && (ct.std - 1.0).abs() < 1e-12);
        let one = aggregate(&[base]).unwrap();
        assert!(one.single_run() && one.mae.std == 0.0);
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn failed_runs_excluded_from_clearance() {
        let done = EpisodeMetrics {
            clearance_time: Some(41.0),
            mae: 0.1,
            mse: 0.02,
            cum_heading_avg: 0.0,
            v_avg: 0.5,
            omega_stddev: 0.0,
            stop_events: 0,
            samples: 3,
            completed: true,
        };
        let failed = EpisodeMetrics {
            clearance_time: None,
            completed: false,
            mae: 0.5,
            ..done
        };
        let s = aggregate(&[done, failed]).unwrap();
        assert_eq!(s.completed, 1);
        assert_eq!(s.clearance_time.unwrap().n, 1);
        assert!((s.mae.mean - 0.3).abs() < 1e-12);
    }

    #[test]
    fn log_csv_roundtrip_keeps_missing_centers() {
        let mut r = row(0.2, 1.0, 0.1, 0.01, 0.5, -0.02);
        r.x_h = None;
        r.d = None;
        let log = vec![row(0.0, 0.0, 0.0, 0.0, 0.5, 0.0), r];
        let mut buf = Vec::new();
        write_log_csv(&mut buf, &log).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x,y,theta,x_h,d,v_x,omega_z,v_bar,omega_bar\n"));
        assert_eq!(read_log_csv(buf.as_slice()).unwrap(), log);
    }
}
