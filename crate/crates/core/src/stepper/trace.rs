use std::io::Write;

use crate::error::Result;
use crate::mesh::{sig17, Field};

/// Statistics of one accepted step, taken before and after the cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub min_pre: f64,
    pub min_post: f64,
    pub mass_pre: f64,
    pub mass_post: f64,
    /// Largest relative stage residual of the step.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub pre: Field,
    pub post: Field,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
}

impl RunTrace {
    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    /// First step whose pre-cutoff minimum is `≤ 0`.
    pub fn first_nonpositive(&self) -> Option<&StepRecord> {
        self.records.iter().find(|r| r.min_pre <= 0.0)
    }

    pub fn record_at(&self, t: f64, dt: f64) -> Option<&StepRecord> {
        self.records.iter().find(|r| (r.t - t).abs() <= 0.5 * dt)
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    /// `step,t,min_pre,min_post,mass_pre,mass_post,residual`
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,t,min_pre,min_post,mass_pre,mass_post,residual")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.step,
                sig17(r.t),
                sig17(r.min_pre),
                sig17(r.min_post),
                sig17(r.mass_pre),
                sig17(r.mass_post),
                sig17(r.residual)
            )?;
        }
        Ok(())
    }
}
