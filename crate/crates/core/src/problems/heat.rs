use std::f64::consts::PI;

use crate::error::Result;
use crate::mesh::{Field, Grid, Grid1D};
use crate::sparse::{SparseMatrix, TripletBuilder};
use crate::stepper::ProblemSpec;

/// `u_t = κ u_xx` on `(0, 1)` with homogeneous Dirichlet data and
/// `u(0, x) = sin(πx)`.
#[derive(Debug, Clone)]
pub struct HeatProblem1D {
    pub grid: Grid1D,
    pub kappa: f64,
}

impl HeatProblem1D {
    pub fn new(n_cells: usize) -> Result<Self> {
        Ok(Self {
            grid: Grid1D::new(0.0, 1.0, n_cells)?,
            kappa: 1.0,
        })
    }

    /// Eigenvalue of the discrete operator for the `sin(πx)` mode.
    pub fn discrete_eigenvalue(&self) -> f64 {
        let h = self.grid.h();
        -4.0 * self.kappa / (h * h) * (0.5 * PI * h).sin().powi(2)
    }

    /// Exact solution of the semi-discrete system (no time error).
    pub fn semi_discrete(&self, t: f64) -> Field {
        let decay = (self.discrete_eigenvalue() * t).exp();
        Field::from_fn(Grid::D1(self.grid), |x, _| decay * (PI * x).sin())
    }
}

impl ProblemSpec for HeatProblem1D {
    fn grid(&self) -> Grid {
        Grid::D1(self.grid)
    }

    fn initial(&self) -> Field {
        Field::from_fn(self.grid(), |x, _| (PI * x).sin())
    }

    fn operator(&self, _lagged: &Field) -> Result<SparseMatrix> {
        let n = self.grid.n_nodes();
        let c = self.kappa / (self.grid.h() * self.grid.h());
        let mut b = TripletBuilder::with_capacity(n, 3 * n);
        for i in 1..n - 1 {
            b.add(i, i - 1, c);
            b.add(i, i, -2.0 * c);
            b.add(i, i + 1, c);
        }
        Ok(b.build())
    }

    fn is_autonomous_linear(&self) -> bool {
        true
    }

    fn dirichlet_nodes(&self) -> Vec<usize> {
        vec![0, self.grid.n_cells()]
    }

    fn exact(&self, t: f64) -> Option<Field> {
        let decay = (-PI * PI * self.kappa * t).exp();
        Some(Field::from_fn(self.grid(), |x, _| decay * (PI * x).sin()))
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("problem".into(), "heat-1d".into()),
            ("boundary".into(), "dirichlet-identity-rows".into()),
        ]
    }
}
