//! Thin-film (lubrication) equation `u_t = −∇·(f(u) ∇Δu)` on `(−1,1)^d`
//! with no-flux walls, linearized by lagged diffusivity.
//!
//! The assembled operator is `A = −D_f·L` where `L` is the reflected
//! second-difference Laplacian and `D_f` the conservative face-flux
//! divergence weighted by arithmetic-mean face mobilities. Boundary rows
//! use half-cell control volumes, so `wᵀA = 0` for the trapezoid weights.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::cutoff::CutoffParams;
use crate::error::{Error, Result};
use crate::mesh::{Field, Grid, Grid1D, Grid2D};
use crate::singularity::{SingularityRecord, SingularityTracker};
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::stepper::{run_observed, ProblemSpec, RunOutput, StepperConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilitySpec {
    pub exponent: f64,
    pub epsilon: f64,
}

impl Default for MobilitySpec {
    fn default() -> Self {
        Self {
            exponent: 0.5,
            epsilon: 0.0,
        }
    }
}

impl MobilitySpec {
    pub fn new(exponent: f64, epsilon: f64) -> Result<Self> {
        let s = Self { exponent, epsilon };
        s.validate()?;
        Ok(s)
    }

    pub fn regularized(epsilon: f64) -> Result<Self> {
        Self::new(0.5, epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exponent >= 0.0 && self.exponent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mobility exponent must be >= 0, got {}",
                self.exponent
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

fn power(u: f64, n: f64) -> f64 {
    if n == 0.5 {
        u.sqrt()
    } else {
        u.powf(n)
    }
}

/// `uⁿ`, or `u⁴uⁿ / (ε uⁿ + u⁴)` when `ε > 0`; zero at `u = 0`.
pub fn mobility(u: f64, spec: &MobilitySpec) -> Result<f64> {
    mobility_at(u, spec, 0)
}

fn mobility_at(u: f64, spec: &MobilitySpec, index: usize) -> Result<f64> {
    if u.is_nan() {
        return Err(Error::NonFinite { index, value: u });
    }
    if u < 0.0 {
        return Err(Error::MobilityDomain { index, value: u });
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let f = power(u, spec.exponent);
    if spec.epsilon == 0.0 {
        return Ok(f);
    }
    let u4 = u * u * u * u;
    Ok(u4 * f / (spec.epsilon * f + u4))
}

/// Default datum `0.8 − cos(πx) + 0.25 cos(2πx)`.
pub fn default_initial_1d(x: f64) -> f64 {
    0.8 - (PI * x).cos() + 0.25 * (2.0 * PI * x).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// `∂u/∂n = ∂Δu/∂n = 0`, by ghost-node reflection.
    NoFlux,
}

pub type InitialDatum = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct LubricationSpec {
    grid: Grid,
    pub mobility: MobilitySpec,
    pub initial: InitialDatum,
    pub boundary: BoundaryMode,
}

impl fmt::Debug for LubricationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LubricationSpec")
            .field("grid", &self.grid)
            .field("mobility", &self.mobility)
            .field("boundary", &self.boundary)
            .finish_non_exhaustive()
    }
}

impl LubricationSpec {
    /// `(−1, 1)` with `n_cells` cells and the default datum.
    pub fn one_d(n_cells: usize, mobility: MobilitySpec) -> Result<Self> {
        mobility.validate()?;
        Ok(Self {
            grid: Grid::D1(Grid1D::new(-1.0, 1.0, n_cells)?),
            mobility,
            initial: Arc::new(|x, _| default_initial_1d(x)),
            boundary: BoundaryMode::NoFlux,
        })
    }

    /// `(−1, 1)²` with the tensor-product datum.
    pub fn two_d(n_cells: usize, mobility: MobilitySpec) -> Result<Self> {
        mobility.validate()?;
        Ok(Self {
            grid: Grid::D2(Grid2D::square(-1.0, 1.0, n_cells)?),
            mobility,
            initial: Arc::new(|x, y| default_initial_1d(x) * default_initial_1d(y)),
            boundary: BoundaryMode::NoFlux,
        })
    }

    pub fn with_initial(
        mut self,
        initial: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.initial = Arc::new(initial);
        self
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn assemble(&self, lagged: &Field) -> Result<SparseMatrix> {
        match self.grid {
            Grid::D1(_) => assemble_lubrication_1d(lagged, self),
            Grid::D2(_) => assemble_lubrication_2d(lagged, self),
        }
    }
}

fn nodal_mobility(lagged: &Field, spec: &MobilitySpec) -> Result<Vec<f64>> {
    lagged
        .values()
        .iter()
        .enumerate()
        .map(|(k, &u)| mobility_at(u, spec, k))
        .collect()
}

/// One face between nodes `p` and `q` with conductance `c`; `sp`, `sq` are
/// the inverse control-volume fractions (2 on a boundary node, else 1).
fn add_face(b: &mut TripletBuilder, p: usize, q: usize, c: f64, sp: f64, sq: f64) {
    b.add(p, q, c * sp);
    b.add(p, p, -c * sp);
    b.add(q, p, c * sq);
    b.add(q, q, -c * sq);
}

fn side(i: usize, n: usize) -> f64 {
    if i == 0 || i == n {
        2.0
    } else {
        1.0
    }
}

/// Face-flux divergence `∇·(c∇·)` with face conductance from `face(p, q)`.
fn flux_divergence(grid: &Grid, face: impl Fn(usize, usize) -> f64) -> SparseMatrix {
    match grid {
        Grid::D1(g) => {
            let n = g.n_cells();
            let ih2 = 1.0 / (g.h() * g.h());
            let mut b = TripletBuilder::with_capacity(g.n_nodes(), 4 * n);
            for i in 0..n {
                add_face(
                    &mut b,
                    i,
                    i + 1,
                    face(i, i + 1) * ih2,
                    side(i, n),
                    side(i + 1, n),
                );
            }
            b.build()
        }
        Grid::D2(g) => {
            let (nx, ny) = (g.x_axis().n_cells(), g.y_axis().n_cells());
            let ihx2 = 1.0 / (g.x_axis().h() * g.x_axis().h());
            let ihy2 = 1.0 / (g.y_axis().h() * g.y_axis().h());
            let mut b = TripletBuilder::with_capacity(g.n_nodes(), 10 * g.n_nodes());
            for j in 0..=ny {
                for i in 0..nx {
                    let (p, q) = (g.index(i, j), g.index(i + 1, j));
                    add_face(
                        &mut b,
                        p,
                        q,
                        face(p, q) * ihx2,
                        side(i, nx),
                        side(i + 1, nx),
                    );
                }
            }
            for j in 0..ny {
                for i in 0..=nx {
                    let (p, q) = (g.index(i, j), g.index(i, j + 1));
                    add_face(
                        &mut b,
                        p,
                        q,
                        face(p, q) * ihy2,
                        side(j, ny),
                        side(j + 1, ny),
                    );
                }
            }
            b.build()
        }
    }
}

/// Laplacian with reflection closure `∂u/∂n = 0`.
pub fn reflected_laplacian(grid: &Grid) -> SparseMatrix {
    flux_divergence(grid, |_, _| 1.0)
}

fn assemble(lagged: &Field, spec: &LubricationSpec) -> Result<SparseMatrix> {
    if lagged.grid() != spec.grid {
        return Err(Error::GridMismatch);
    }
    let fm = nodal_mobility(lagged, &spec.mobility)?;
    let df = flux_divergence(&spec.grid, |p, q| 0.5 * (fm[p] + fm[q]));
    let lap = reflected_laplacian(&spec.grid);
    Ok(df.matmul(&lap)?.scale(-1.0))
}

/// Lagged-diffusivity matrix of `u ↦ −(f(û) u_xxx)_x`; pentadiagonal.
pub fn assemble_lubrication_1d(lagged: &Field, spec: &LubricationSpec) -> Result<SparseMatrix> {
    if spec.dim() != 1 {
        return Err(Error::InvalidGrid(
            "expected a 1D lubrication problem".into(),
        ));
    }
    assemble(lagged, spec)
}

/// Lagged-diffusivity matrix of `u ↦ −∇·(f(û)∇Δu)`; 13-point interior stencil.
pub fn assemble_lubrication_2d(lagged: &Field, spec: &LubricationSpec) -> Result<SparseMatrix> {
    if spec.dim() != 2 {
        return Err(Error::InvalidGrid(
            "expected a 2D lubrication problem".into(),
        ));
    }
    assemble(lagged, spec)
}

impl ProblemSpec for LubricationSpec {
    fn grid(&self) -> Grid {
        self.grid
    }

    fn initial(&self) -> Field {
        Field::from_fn(self.grid, |x, y| (self.initial)(x, y))
    }

    fn operator(&self, lagged: &Field) -> Result<SparseMatrix> {
        self.assemble(lagged)
    }

    fn is_autonomous_linear(&self) -> bool {
        false
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("problem".into(), format!("lubrication-{}d", self.dim())),
            (
                "mobility_exponent".into(),
                self.mobility.exponent.to_string(),
            ),
            ("epsilon".into(), self.mobility.epsilon.to_string()),
            (
                "boundary".into(),
                "no-flux;ghost-reflection;half-cell-boundary-volumes".into(),
            ),
            ("face_mobility".into(), "arithmetic-mean".into()),
            (
                "linearization".into(),
                "lagged-diffusivity;stage-frozen".into(),
            ),
            ("flux".into(), "conservative;-D_f*L".into()),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LubricationOptions {
    /// Steps between touching-set samples.
    pub snapshot_every: usize,
    /// Nodes `≤ threshold` count as touching.
    pub threshold: f64,
}

impl Default for LubricationOptions {
    fn default() -> Self {
        Self {
            snapshot_every: 10,
            threshold: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LubricationRun {
    pub output: RunOutput,
    pub singularity: SingularityRecord,
    /// First step time with a nonpositive pre-cutoff minimum.
    pub onset_pre: Option<f64>,
}

pub fn run_lubrication(spec: &LubricationSpec, cfg: &StepperConfig) -> Result<LubricationRun> {
    run_lubrication_with(spec, cfg, LubricationOptions::default())
}

pub fn run_lubrication_with(
    spec: &LubricationSpec,
    cfg: &StepperConfig,
    opts: LubricationOptions,
) -> Result<LubricationRun> {
    spec.mobility.validate()?;
    if cfg.cutoff.is_none() && spec.mobility.epsilon == 0.0 {
        return Err(Error::InvalidParameter(
            "the unregularized lubrication problem requires the cutoff".into(),
        ));
    }
    if opts.snapshot_every == 0 {
        return Err(Error::InvalidParameter(
            "snapshot cadence must be >= 1".into(),
        ));
    }
    let mut tracker = SingularityTracker::new(spec.grid, opts.threshold)?;
    let cutoff_on = cfg.cutoff.is_some();
    tracker.push(cfg.t0, &post_cut_initial(spec, cfg.cutoff)?)?;
    let output = run_observed(spec, cfg, &mut |rec, _pre, post| {
        if cutoff_on {
            if let Some((index, &value)) = post.values().iter().enumerate().find(|(_, v)| **v < 0.0)
            {
                return Err(Error::NegativeValue { index, value });
            }
        }
        if rec.step % opts.snapshot_every == 0 {
            tracker.push(rec.t, post)?;
        }
        Ok(())
    })?;
    let onset_pre = output.trace.first_nonpositive().map(|r| r.t);
    Ok(LubricationRun {
        output,
        singularity: tracker.finish(),
        onset_pre,
    })
}

fn post_cut_initial(spec: &LubricationSpec, cutoff: Option<CutoffParams>) -> Result<Field> {
    let mut u = spec.initial();
    if let Some(c) = cutoff {
        crate::cutoff::floor_in_place(u.values_mut(), c.delta())?;
    }
    Ok(u)
}
