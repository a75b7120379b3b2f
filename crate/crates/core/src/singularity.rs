//! Touchdown and lift-off bookkeeping for thin-film runs.
//!
//! A node is touching when its (post-cutoff) value is at most the
//! threshold. In 1D a maximal run of `k` touching nodes measures `(k−1)h`
//! for `k ≥ 2` and `h/2` for an isolated node; the reported length is the
//! longest run. In 2D the measure is the trapezoid area of touching nodes.

use std::io::Write;

use crate::error::{Error, Result};
use crate::mesh::{sig17, Field, Grid};
use crate::stepper::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TouchingSample {
    pub t: f64,
    pub length: f64,
    /// Number of maximal contiguous runs (1D) or touching nodes (2D).
    pub runs: usize,
    /// Node count of the longest run (1D) or of the whole set (2D).
    pub max_run_nodes: usize,
}

impl TouchingSample {
    /// The touching set is a single interval of at least two nodes.
    pub fn has_zero_interval(&self) -> bool {
        self.runs == 1 && self.max_run_nodes >= 2
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SingularityRecord {
    pub onset_time: Option<f64>,
    pub liftoff_time: Option<f64>,
    pub series: Vec<TouchingSample>,
    pub max_touching_length: f64,
}

impl SingularityRecord {
    pub fn any_zero_interval(&self) -> bool {
        self.series.iter().any(TouchingSample::has_zero_interval)
    }

    /// Header lines `onset=`, `liftoff=`, `max_length=`, then `t,touching_length`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map(sig17).unwrap_or_else(|| "none".into());
        writeln!(w, "onset={}", opt(self.onset_time))?;
        writeln!(w, "liftoff={}", opt(self.liftoff_time))?;
        writeln!(w, "max_length={}", sig17(self.max_touching_length))?;
        writeln!(w, "t,touching_length")?;
        for s in &self.series {
            writeln!(w, "{},{}", sig17(s.t), sig17(s.length))?;
        }
        Ok(())
    }
}

/// Incremental form of [`track_singularity`].
#[derive(Debug, Clone)]
pub struct SingularityTracker {
    grid: Grid,
    threshold: f64,
    record: SingularityRecord,
}

impl SingularityTracker {
    pub fn new(grid: Grid, threshold: f64) -> Result<Self> {
        if !(threshold >= 0.0) || !threshold.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "threshold must be >= 0, got {threshold}"
            )));
        }
        Ok(Self {
            grid,
            threshold,
            record: SingularityRecord::default(),
        })
    }

    pub fn push(&mut self, t: f64, field: &Field) -> Result<TouchingSample> {
        if field.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        field.check_finite()?;
        if let Some(prev) = self.record.series.last() {
            if !(t > prev.t) {
                return Err(Error::NonMonotoneTimes {
                    prev: prev.t,
                    next: t,
                });
            }
        }
        let sample = measure(&self.grid, field.values(), self.threshold, t);
        let r = &mut self.record;
        if sample.runs > 0 {
            if r.onset_time.is_none() {
                r.onset_time = Some(t);
            }
        } else if r.onset_time.is_some() && r.liftoff_time.is_none() {
            r.liftoff_time = Some(t);
        }
        r.max_touching_length = r.max_touching_length.max(sample.length);
        r.series.push(sample);
        Ok(sample)
    }

    pub fn record(&self) -> &SingularityRecord {
        &self.record
    }

    pub fn finish(self) -> SingularityRecord {
        self.record
    }
}

/// Record of a snapshot series of post-cutoff fields.
pub fn track_singularity(snapshots: &[Snapshot], threshold: f64) -> Result<SingularityRecord> {
    let Some(first) = snapshots.first() else {
        return Ok(SingularityRecord::default());
    };
    let mut tracker = SingularityTracker::new(first.post.grid(), threshold)?;
    for s in snapshots {
        tracker.push(s.t, &s.post)?;
    }
    Ok(tracker.finish())
}

fn measure(grid: &Grid, v: &[f64], threshold: f64, t: f64) -> TouchingSample {
    match grid {
        Grid::D1(g) => {
            let h = g.h();
            let mut runs = 0;
            let mut longest = 0;
            let mut current = 0;
            for &x in v {
                if x <= threshold {
                    current += 1;
                    if current == 1 {
                        runs += 1;
                    }
                    longest = longest.max(current);
                } else {
                    current = 0;
                }
            }
            let length = match longest {
                0 => 0.0,
                1 => 0.5 * h,
                k => (k - 1) as f64 * h,
            };
            TouchingSample {
                t,
                length,
                runs,
                max_run_nodes: longest,
            }
        }
        Grid::D2(_) => {
            let mut area = 0.0;
            let mut count = 0;
            for (k, &x) in v.iter().enumerate() {
                if x <= threshold {
                    area += grid.weight(k);
                    count += 1;
                }
            }
            TouchingSample {
                t,
                length: area,
                runs: count,
                max_run_nodes: count,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Grid1D;

    fn grid(n: usize, h: f64) -> Grid {
        Grid::D1(Grid1D::new(0.0, n as f64 * h, n).unwrap())
    }

    #[test]
    fn positive_series_has_no_onset() {
        let g = grid(4, 0.25);
        let mut t = SingularityTracker::new(g, 0.0).unwrap();
        for k in 0..5 {
            t.push(k as f64, &Field::from_fn(g, |x, _| 1.0 + x))
                .unwrap();
        }
        let r = t.finish();
        assert_eq!(
            (r.onset_time, r.liftoff_time, r.max_touching_length),
            (None, None, 0.0)
        );
    }

    #[test]
    fn run_lengths() {
        let g = grid(6, 0.002);
        let f = Field::from_values(g, vec![1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let s = measure(&g, f.values(), 0.0, 0.0);
        assert!((s.length - 0.004).abs() < 1e-15);
        assert_eq!((s.runs, s.max_run_nodes), (1, 3));
        let single = measure(&g, &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0], 0.0, 0.0);
        assert!((single.length - 0.001).abs() < 1e-15);
        assert!(!single.has_zero_interval());
        let two = measure(&g, &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], 0.0, 0.0);
        assert_eq!((two.runs, two.max_run_nodes), (2, 3));
        assert!(!two.has_zero_interval());
        assert!(s.has_zero_interval());
    }

    #[test]
    fn onset_and_liftoff() {
        let g = grid(4, 0.25);
        let mut t = SingularityTracker::new(g, 0.0).unwrap();
        let pos = Field::from_fn(g, |_, _| 1.0);
        let touch = Field::from_values(g, vec![1.0, 0.0, 0.0, 1.0, 1.0]).unwrap();
        t.push(0.0, &pos).unwrap();
        t.push(1.0, &touch).unwrap();
        t.push(2.0, &touch).unwrap();
        t.push(3.0, &pos).unwrap();
        t.push(4.0, &touch).unwrap();
        let r = t.finish();
        assert_eq!(r.onset_time, Some(1.0));
        assert_eq!(r.liftoff_time, Some(3.0));
        assert!((r.max_touching_length - 0.25).abs() < 1e-15);
        assert!(r.any_zero_interval());
    }

    #[test]
    fn non_monotone_times_rejected() {
        let g = grid(4, 0.25);
        let mut t = SingularityTracker::new(g, 0.0).unwrap();
        let f = Field::from_fn(g, |_, _| 1.0);
        t.push(1.0, &f).unwrap();
        assert!(matches!(
            t.push(1.0, &f),
            Err(Error::NonMonotoneTimes { .. })
        ));
    }

    #[test]
    fn csv_header() {
        let r = SingularityRecord {
            onset_time: Some(7.3e-4),
            liftoff_time: None,
            series: vec![],
            max_touching_length: 0.12,
        };
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(
            lines[0]
                .strip_prefix("onset=")
                .unwrap()
                .parse::<f64>()
                .unwrap(),
            7.3e-4
        );
        assert_eq!(lines[1], "liftoff=none");
        assert_eq!(lines[3], "t,touching_length");
    }
}
