//! Experiment drivers: convergence studies, regularization comparisons and
//! run output.

mod output;

pub use output::{write_field_series, write_metadata, MetadataWriter};

use std::io::Write;
use std::path::PathBuf;

use crate::cutoff::CutoffParams;
use crate::error::{Error, Result};
use crate::mesh::{l2_norm, max_undershoot, sig17, Field};
use crate::par::Execution;
use crate::problems::lubrication::{run_lubrication_with, LubricationOptions};
use crate::problems::{AnisotropicSpec, LubricationRun, LubricationSpec, MobilitySpec};
use crate::sparse::SolverConfig;
use crate::stepper::{run, Integrator, ProblemSpec, RunOutput, StepperConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutoffMode {
    Off,
    Nonneg,
    /// `δ = c·dt·h²` with `c` the rule coefficient.
    DeltaRule,
}

impl CutoffMode {
    pub fn tag(&self) -> &'static str {
        match self {
            CutoffMode::Off => "off",
            CutoffMode::Nonneg => "nonneg",
            CutoffMode::DeltaRule => "delta",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub tag: String,
    pub resolutions: Vec<usize>,
    pub dt: f64,
    pub t_end: f64,
    pub cutoff: CutoffMode,
    pub delta_coefficient: f64,
    pub epsilon: f64,
    /// Adds `b = [1000, 1000]ᵀ` to the anisotropic problem.
    pub convection: bool,
    pub integrator: Integrator,
    pub solver: SolverConfig,
    pub out_dir: Option<PathBuf>,
    pub snapshot_times: Vec<f64>,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            tag: "aniso-convergence".into(),
            resolutions: vec![10, 20, 40, 80],
            dt: 1e-2,
            t_end: 1.0,
            cutoff: CutoffMode::Nonneg,
            delta_coefficient: 1.0,
            epsilon: 0.0,
            convection: false,
            integrator: Integrator::Sdirk3,
            solver: SolverConfig::default(),
            out_dir: None,
            snapshot_times: Vec::new(),
            execution: Execution::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolutions.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one resolution is required".into(),
            ));
        }
        if self.resolutions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "resolutions must be strictly increasing".into(),
            ));
        }
        if !(self.delta_coefficient >= 0.0) || !self.delta_coefficient.is_finite() {
            return Err(Error::InvalidParameter(
                "delta coefficient must be >= 0".into(),
            ));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter("epsilon must be >= 0".into()));
        }
        self.stepper(1.0 / self.resolutions[0] as f64)?.validate()
    }

    /// Cutoff for mesh size `h`.
    pub fn cutoff_params(&self, h: f64) -> Result<Option<CutoffParams>> {
        Ok(match self.cutoff {
            CutoffMode::Off => None,
            CutoffMode::Nonneg => Some(CutoffParams::nonneg()),
            CutoffMode::DeltaRule => {
                Some(CutoffParams::new(self.delta_coefficient * self.dt * h * h)?)
            }
        })
    }

    pub fn stepper(&self, h: f64) -> Result<StepperConfig> {
        Ok(StepperConfig {
            t0: 0.0,
            t_end: self.t_end,
            dt: self.dt,
            cutoff: self.cutoff_params(h)?,
            integrator: self.integrator,
            solver: self.solver,
            snapshot_times: self.snapshot_times.clone(),
        })
    }

    pub fn anisotropic(&self, j: usize) -> Result<AnisotropicSpec> {
        if self.convection {
            AnisotropicSpec::convective(j)
        } else {
            AnisotropicSpec::new(j)
        }
    }

    pub fn metadata(&self) -> Vec<(String, String)> {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        vec![
            ("experiment".into(), self.tag.clone()),
            ("resolutions".into(), list(&self.resolutions)),
            ("dt".into(), sig17(self.dt)),
            ("t_end".into(), sig17(self.t_end)),
            ("cutoff".into(), self.cutoff.tag().into()),
            (
                "delta_rule".into(),
                format!("{}*dt*h^2", self.delta_coefficient),
            ),
            ("epsilon".into(), sig17(self.epsilon)),
            ("integrator".into(), self.integrator.tag()),
            (
                "cutoff_placement".into(),
                "between-steps;stages-unfloored".into(),
            ),
            (
                "solver".into(),
                format!("{:?}", self.solver.kind).to_lowercase(),
            ),
            ("solver_tol".into(), sig17(self.solver.tol)),
            (
                "solver_tol_scaled_by_norm_inf".into(),
                self.solver.scale_tol_by_norm.to_string(),
            ),
            (
                "execution".into(),
                format!("{:?}", self.execution).to_lowercase(),
            ),
            ("matrix_norm".into(), "max".into()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub j: usize,
    pub h: f64,
    pub dt: f64,
    /// `‖(Uᴺ)⁺ − uᴺ‖_{L²}` (or the δ-floored / uncut state, per mode).
    pub l2_error: f64,
    /// `−min Uᴺ` before the cutoff, floored at zero.
    pub max_undershoot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub l2_slope: f64,
    /// `None` when some resolution shows no undershoot.
    pub undershoot_slope: Option<f64>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParameter(
            "slope fit needs at least two paired points".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "slope fit needs positive finite data".into(),
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "slope fit needs distinct abscissae".into(),
        ));
    }
    Ok(sxy / sxx)
}

impl ConvergenceReport {
    pub fn from_rows(rows: Vec<ConvergenceRow>) -> Result<Self> {
        let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
        let e: Vec<f64> = rows.iter().map(|r| r.l2_error).collect();
        let u: Vec<f64> = rows.iter().map(|r| r.max_undershoot).collect();
        let l2_slope = loglog_slope(&h, &e)?;
        let undershoot_slope = if u.iter().all(|v| *v > 0.0) {
            Some(loglog_slope(&h, &u)?)
        } else {
            None
        };
        Ok(Self {
            rows,
            l2_slope,
            undershoot_slope,
        })
    }

    /// `J,h,dt,l2_error,max_undershoot` rows followed by `#`-prefixed slope lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "J,h,dt,l2_error,max_undershoot")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.j,
                sig17(r.h),
                sig17(r.dt),
                sig17(r.l2_error),
                sig17(r.max_undershoot)
            )?;
        }
        writeln!(w, "# l2_slope={}", sig17(self.l2_slope))?;
        let us = self
            .undershoot_slope
            .map(sig17)
            .unwrap_or_else(|| "none".into());
        writeln!(w, "# undershoot_slope={us}")?;
        Ok(())
    }
}

/// One anisotropic run at resolution `j` under the experiment settings.
pub fn anisotropic_run(cfg: &ExperimentConfig, j: usize) -> Result<(AnisotropicSpec, RunOutput)> {
    let spec = cfg.anisotropic(j)?;
    let out = run(&spec, &cfg.stepper(spec.grid.x_axis().h())?)?;
    Ok((spec, out))
}

fn convergence_row(cfg: &ExperimentConfig, j: usize) -> Result<ConvergenceRow> {
    let (spec, out) = anisotropic_run(cfg, j)?;
    let exact = spec.exact(cfg.t_end).ok_or(Error::InvalidParameter(
        "problem has no exact solution".into(),
    ))?;
    Ok(ConvergenceRow {
        j,
        h: spec.grid.x_axis().h(),
        dt: cfg.dt,
        l2_error: l2_norm(&out.state.sub(&exact)?)?,
        max_undershoot: max_undershoot(&out.pre_cutoff)?,
    })
}

/// Runs the anisotropic problem at every resolution and fits slopes against `h`.
pub fn convergence_study(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let results = cfg
        .execution
        .map(cfg.resolutions.clone(), |j| (j, convergence_row(cfg, j)));
    let mut rows = Vec::with_capacity(results.len());
    let mut failure = None;
    for (j, r) in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) if failure.is_none() => failure = Some((j, e)),
            Err(_) => {}
        }
    }
    if let Some((resolution, source)) = failure {
        return Err(Error::StudyFailed {
            resolution,
            source: Box::new(source),
            completed: rows,
        });
    }
    let report = ConvergenceReport::from_rows(rows)?;
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        report.write_csv(std::io::BufWriter::new(std::fs::File::create(
            dir.join("convergence.csv"),
        )?))?;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct RegularizationReport {
    pub epsilon: f64,
    pub reference: LubricationRun,
    pub regularized: LubricationRun,
    /// Pre-cutoff negativity onsets (regularized minus reference).
    pub onset_pre_difference: Option<f64>,
    /// Touching-set onsets.
    pub onset_difference: Option<f64>,
    pub liftoff_difference: Option<f64>,
    pub final_max_difference: f64,
}

fn diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

impl RegularizationReport {
    pub fn write_summary<W: Write>(&self, mut w: W) -> Result<()> {
        let opt = |v: Option<f64>| v.map(sig17).unwrap_or_else(|| "none".into());
        let (r, g) = (&self.reference, &self.regularized);
        writeln!(w, "quantity,reference,regularized,difference")?;
        writeln!(
            w,
            "onset_pre,{},{},{}",
            opt(r.onset_pre),
            opt(g.onset_pre),
            opt(self.onset_pre_difference)
        )?;
        writeln!(
            w,
            "onset_touching,{},{},{}",
            opt(r.singularity.onset_time),
            opt(g.singularity.onset_time),
            opt(self.onset_difference)
        )?;
        writeln!(
            w,
            "liftoff,{},{},{}",
            opt(r.singularity.liftoff_time),
            opt(g.singularity.liftoff_time),
            opt(self.liftoff_difference)
        )?;
        writeln!(
            w,
            "max_touching_length,{},{},{}",
            sig17(r.singularity.max_touching_length),
            sig17(g.singularity.max_touching_length),
            sig17(g.singularity.max_touching_length - r.singularity.max_touching_length)
        )?;
        writeln!(
            w,
            "final_max_difference,,,{}",
            sig17(self.final_max_difference)
        )?;
        Ok(())
    }
}

/// Runs `spec` unregularized and with `f^ε`, identical discretization.
pub fn regularization_comparison(
    spec: &LubricationSpec,
    cfg: &StepperConfig,
    epsilon: f64,
    opts: LubricationOptions,
    exec: Execution,
) -> Result<RegularizationReport> {
    let mut reference = spec.clone();
    reference.mobility = MobilitySpec::new(spec.mobility.exponent, 0.0)?;
    let mut regularized = spec.clone();
    regularized.mobility = MobilitySpec::new(spec.mobility.exponent, epsilon)?;
    let (a, b) = exec.join(
        || run_lubrication_with(&reference, cfg, opts),
        || run_lubrication_with(&regularized, cfg, opts),
    );
    let (a, b) = (a?, b?);
    let final_max_difference = b.output.state.max_abs_diff(&a.output.state)?;
    Ok(RegularizationReport {
        epsilon,
        onset_pre_difference: diff(b.onset_pre, a.onset_pre),
        onset_difference: diff(b.singularity.onset_time, a.singularity.onset_time),
        liftoff_difference: diff(b.singularity.liftoff_time, a.singularity.liftoff_time),
        final_max_difference,
        reference: a,
        regularized: b,
    })
}

/// Max nodal difference after interpolating `fine` to the nodes of `coarse` (1D).
pub fn max_difference_on_coarse_nodes(coarse: &Field, fine: &Field) -> Result<f64> {
    let g = coarse.grid();
    let mut m: f64 = 0.0;
    for (k, v) in coarse.values().iter().enumerate() {
        let (x, _) = g.coords(k);
        m = m.max((fine.interpolate_1d(x)? - v).abs());
    }
    Ok(m)
}
