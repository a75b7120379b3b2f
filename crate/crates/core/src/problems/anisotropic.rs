//! Anisotropic diffusion (optionally with convection) on the unit square
//! with a manufactured tanh front.
//!
//! `u_t = ∇·(D∇u) − b·∇u + f`, exact solution
//! `u = ½ e^{−t} (tanh(−15(x − y)) + 1)`. The forcing is evaluated from
//! closed-form derivatives of that solution; Dirichlet data are its boundary
//! trace.

use crate::error::{Error, Result};
use crate::mesh::{Field, Grid, Grid2D};
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::stepper::ProblemSpec;

const FRONT_STEEPNESS: f64 = 15.0;

pub const DEFAULT_DIFFUSION: [[f64; 2]; 2] = [[500.5, 480.0], [480.0, 500.5]];
pub const DEFAULT_CONVECTION: [f64; 2] = [1000.0, 1000.0];

#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropicSpec {
    pub diffusion: [[f64; 2]; 2],
    pub convection: [f64; 2],
    pub grid: Grid2D,
}

impl AnisotropicSpec {
    /// Pure diffusion with the default tensor on a `J×J` grid of `[0,1]²`.
    pub fn new(j: usize) -> Result<Self> {
        Self::with_coefficients(j, DEFAULT_DIFFUSION, [0.0, 0.0])
    }

    /// Default tensor plus `b = [1000, 1000]ᵀ`.
    pub fn convective(j: usize) -> Result<Self> {
        Self::with_coefficients(j, DEFAULT_DIFFUSION, DEFAULT_CONVECTION)
    }

    pub fn with_coefficients(
        j: usize,
        diffusion: [[f64; 2]; 2],
        convection: [f64; 2],
    ) -> Result<Self> {
        let spec = Self {
            diffusion,
            convection,
            grid: Grid2D::square(0.0, 1.0, j)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Symmetric with positive trace and determinant. The zero tensor is
    /// accepted as the degenerate pure-convection case.
    pub fn validate(&self) -> Result<()> {
        let d = self.diffusion;
        if d[0][1] != d[1][0] {
            return Err(Error::InvalidParameter(
                "diffusion tensor must be symmetric".into(),
            ));
        }
        let zero = d.iter().flatten().all(|&v| v == 0.0);
        let tr = d[0][0] + d[1][1];
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        if !zero && !(tr > 0.0 && det > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "diffusion tensor must be positive definite (trace {tr}, det {det})"
            )));
        }
        if self.convection.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("convection must be finite".into()));
        }
        Ok(())
    }

    pub fn forcing(&self, t: f64, x: f64, y: f64) -> f64 {
        forcing(t, x, y, self)
    }
}

/// `½ e^{−t} (tanh(−15(x−y)) + 1)`.
pub fn exact_solution(t: f64, x: f64, y: f64) -> f64 {
    0.5 * (-t).exp() * ((-FRONT_STEEPNESS * (x - y)).tanh() + 1.0)
}

/// `f = u_t − ∇·(D∇u) + b·∇u` for the exact solution.
pub fn forcing(t: f64, x: f64, y: f64, spec: &AnisotropicSpec) -> f64 {
    let k = FRONT_STEEPNESS;
    let s = -k * (x - y);
    let th = s.tanh();
    let sech = 1.0 / s.cosh();
    let sech2 = sech * sech;
    let e = (-t).exp();
    let u = 0.5 * e * (th + 1.0);
    let ux = -0.5 * k * e * sech2;
    let uy = -ux;
    // d²/ds² of ½(tanh s + 1) is −sech² s · tanh s
    let second = -k * k * e * sech2 * th;
    let (uxx, uyy, uxy) = (second, second, -second);
    let d = spec.diffusion;
    let div = d[0][0] * uxx + (d[0][1] + d[1][0]) * uxy + d[1][1] * uyy;
    let adv = spec.convection[0] * ux + spec.convection[1] * uy;
    -u - div + adv
}

/// Nine-point central-difference operator for `∇·(D∇u) − b·∇u` with zero
/// rows on the boundary.
pub fn assemble(spec: &AnisotropicSpec) -> Result<SparseMatrix> {
    spec.validate()?;
    let g = &spec.grid;
    let (hx, hy) = (g.x_axis().h(), g.y_axis().h());
    let (nx, ny) = (g.nx(), g.ny());
    let d = spec.diffusion;
    let [bx, by] = spec.convection;
    let cxx = d[0][0] / (hx * hx);
    let cyy = d[1][1] / (hy * hy);
    let cxy = (d[0][1] + d[1][0]) / (4.0 * hx * hy);
    let cbx = bx / (2.0 * hx);
    let cby = by / (2.0 * hy);

    let mut b = TripletBuilder::with_capacity(g.n_nodes(), 9 * g.n_nodes());
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let k = g.index(i, j);
            b.add(k, k, -2.0 * cxx - 2.0 * cyy);
            b.add(k, g.index(i + 1, j), cxx - cbx);
            b.add(k, g.index(i - 1, j), cxx + cbx);
            b.add(k, g.index(i, j + 1), cyy - cby);
            b.add(k, g.index(i, j - 1), cyy + cby);
            b.add(k, g.index(i + 1, j + 1), cxy);
            b.add(k, g.index(i + 1, j - 1), -cxy);
            b.add(k, g.index(i - 1, j + 1), -cxy);
            b.add(k, g.index(i - 1, j - 1), cxy);
        }
    }
    Ok(b.build())
}

impl ProblemSpec for AnisotropicSpec {
    fn grid(&self) -> Grid {
        Grid::D2(self.grid)
    }

    fn initial(&self) -> Field {
        Field::from_fn(self.grid(), |x, y| exact_solution(0.0, x, y))
    }

    fn operator(&self, _lagged: &Field) -> Result<SparseMatrix> {
        assemble(self)
    }

    fn is_autonomous_linear(&self) -> bool {
        true
    }

    fn dirichlet_nodes(&self) -> Vec<usize> {
        Grid::D2(self.grid).boundary_nodes()
    }

    fn boundary_value(&self, t: f64, node: usize) -> f64 {
        let (x, y) = Grid::D2(self.grid).coords(node);
        exact_solution(t, x, y)
    }

    fn has_source(&self) -> bool {
        true
    }

    fn source(&self, t: f64, out: &mut [f64]) {
        let grid = Grid::D2(self.grid);
        for (k, v) in out.iter_mut().enumerate() {
            let (x, y) = grid.coords(k);
            *v = forcing(t, x, y, self);
        }
    }

    fn exact(&self, t: f64) -> Option<Field> {
        Some(Field::from_fn(self.grid(), |x, y| exact_solution(t, x, y)))
    }

    fn metadata(&self) -> Vec<(String, String)> {
        let d = self.diffusion;
        vec![
            ("problem".into(), "anisotropic-diffusion".into()),
            (
                "diffusion".into(),
                format!("[[{},{}],[{},{}]]", d[0][0], d[0][1], d[1][0], d[1][1]),
            ),
            (
                "convection".into(),
                format!("[{},{}]", self.convection[0], self.convection[1]),
            ),
            (
                "grid".into(),
                format!(
                    "{}x{}",
                    self.grid.x_axis().n_cells(),
                    self.grid.y_axis().n_cells()
                ),
            ),
            (
                "stencil".into(),
                "9-point-central;cross-term-4-corner;convection-central".into(),
            ),
            (
                "boundary".into(),
                "dirichlet-identity-rows;exact-trace-at-stage-times".into(),
            ),
            ("forcing".into(), "analytic".into()),
        ]
    }
}
