//! Uniform Cartesian grids, nodal fields and the discrete measures used to
//! report errors.
//!
//! Node ordering in 2D is row-major with `x` running fastest:
//! node `(i, j)` has index `j * (nx_cells + 1) + i`.
//!
//! Norms and mass use tensor-product trapezoidal weights (`h/2` at the two
//! end nodes of each axis, `h` inside).

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::cutoff::check_finite;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    n_cells: usize,
}

impl Grid1D {
    pub fn new(a: f64, b: f64, n_cells: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::InvalidGrid(format!(
                "need finite a < b, got [{a}, {b}]"
            )));
        }
        if n_cells < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells, got {n_cells}"
            )));
        }
        Ok(Self { a, b, n_cells })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n_cells as f64
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn x(&self, j: usize) -> f64 {
        // last node is pinned to `b` exactly
        if j == self.n_cells {
            self.b
        } else {
            self.a + j as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|j| self.x(j)).collect()
    }

    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.n_cells {
            0.5 * self.h()
        } else {
            self.h()
        }
    }

    pub fn is_boundary(&self, j: usize) -> bool {
        j == 0 || j == self.n_cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    x: Grid1D,
    y: Grid1D,
}

impl Grid2D {
    pub fn new(x: Grid1D, y: Grid1D) -> Self {
        Self { x, y }
    }

    /// `[a, b]²` with `n_cells` cells per axis.
    pub fn square(a: f64, b: f64, n_cells: usize) -> Result<Self> {
        let axis = Grid1D::new(a, b, n_cells)?;
        Ok(Self { x: axis, y: axis })
    }

    pub fn x_axis(&self) -> &Grid1D {
        &self.x
    }

    pub fn y_axis(&self) -> &Grid1D {
        &self.y
    }

    pub fn nx(&self) -> usize {
        self.x.n_nodes()
    }

    pub fn ny(&self) -> usize {
        self.y.n_nodes()
    }

    pub fn n_nodes(&self) -> usize {
        self.nx() * self.ny()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx(), k / self.nx())
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = self.ij(k);
        self.x.is_boundary(i) || self.y.is_boundary(j)
    }

    pub fn area(&self) -> f64 {
        self.x.length() * self.y.length()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grid {
    D1(Grid1D),
    D2(Grid2D),
}

impl Grid {
    pub fn n_nodes(&self) -> usize {
        match self {
            Grid::D1(g) => g.n_nodes(),
            Grid::D2(g) => g.n_nodes(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Grid::D1(_) => 1,
            Grid::D2(_) => 2,
        }
    }

    /// Coordinates of node `k`; `y` is 0 in 1D.
    pub fn coords(&self, k: usize) -> (f64, f64) {
        match self {
            Grid::D1(g) => (g.x(k), 0.0),
            Grid::D2(g) => {
                let (i, j) = g.ij(k);
                (g.x.x(i), g.y.x(j))
            }
        }
    }

    pub fn weight(&self, k: usize) -> f64 {
        match self {
            Grid::D1(g) => g.weight(k),
            Grid::D2(g) => {
                let (i, j) = g.ij(k);
                g.x.weight(i) * g.y.weight(j)
            }
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|k| self.weight(k)).collect()
    }

    /// Measure of the domain, `|Ω|`.
    pub fn measure(&self) -> f64 {
        match self {
            Grid::D1(g) => g.length(),
            Grid::D2(g) => g.area(),
        }
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        match self {
            Grid::D1(g) => g.is_boundary(k),
            Grid::D2(g) => g.is_boundary(k),
        }
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&k| self.is_boundary(k))
            .collect()
    }

    /// Largest cell size over the axes.
    pub fn h_max(&self) -> f64 {
        match self {
            Grid::D1(g) => g.h(),
            Grid::D2(g) => g.x.h().max(g.y.h()),
        }
    }
}

/// Nodal values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_nodes(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: vec![0.0; grid.n_nodes()],
            grid,
        }
    }

    /// Samples `f(x, y)` at every node (`y = 0` in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.n_nodes())
            .map(|k| {
                let (x, y) = grid.coords(k);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        check_finite(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }

    pub fn scale(&self, c: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }

    /// Linear interpolation of a 1D field at `x`.
    pub fn interpolate_1d(&self, x: f64) -> Result<f64> {
        let Grid::D1(g) = self.grid else {
            return Err(Error::InvalidGrid("interpolate_1d needs a 1D field".into()));
        };
        if x < g.a() || x > g.b() {
            return Err(Error::InvalidParameter(format!("x = {x} outside the grid")));
        }
        let s = (x - g.a()) / g.h();
        let j = (s.floor() as usize).min(g.n_cells() - 1);
        let theta = s - j as f64;
        Ok((1.0 - theta) * self.values[j] + theta * self.values[j + 1])
    }

    /// Writes `x[,y],value` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut line = String::new();
        match self.grid {
            Grid::D1(_) => writeln!(w, "x,value")?,
            Grid::D2(_) => writeln!(w, "x,y,value")?,
        }
        for (k, v) in self.values.iter().enumerate() {
            line.clear();
            let (x, y) = self.grid.coords(k);
            match self.grid {
                Grid::D1(_) => write!(line, "{},{}", sig17(x), sig17(*v)).unwrap(),
                Grid::D2(_) => write!(line, "{},{},{}", sig17(x), sig17(y), sig17(*v)).unwrap(),
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads back a CSV written by [`Field::write_csv`] onto `grid`.
    pub fn read_csv<R: BufRead>(grid: Grid, r: R) -> Result<Field> {
        let mut values = Vec::with_capacity(grid.n_nodes());
        for line in r.lines().skip(1) {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let last = line.rsplit(',').next().unwrap_or("");
            let v: f64 = last
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad CSV value `{last}`")))?;
            values.push(v);
        }
        Field::from_values(grid, values)
    }
}

/// Formats with 17 significant digits.
pub fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Discrete `L²(Ω)` norm with trapezoidal weights.
pub fn l2_norm(e: &Field) -> Result<f64> {
    e.check_finite()?;
    let g = e.grid();
    let s: f64 = e
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| g.weight(k) * v * v)
        .sum();
    Ok(s.sqrt())
}

/// `max(0, −min f)`, which equals `‖f − f⁺‖_∞`.
pub fn max_undershoot(f: &Field) -> Result<f64> {
    f.check_finite()?;
    Ok((-f.min()).max(0.0))
}

/// Trapezoidal integral over the domain.
pub fn mass(f: &Field) -> Result<f64> {
    f.check_finite()?;
    let g = f.grid();
    Ok(f.values()
        .iter()
        .enumerate()
        .map(|(k, v)| g.weight(k) * v)
        .sum())
}

pub fn mean(f: &Field) -> Result<f64> {
    Ok(mass(f)? / f.grid().measure())
}

/// Third derivative of a 1D field.
///
/// Interior nodes use the centered five-point stencil; the two nodes next to
/// each end use second-order one-sided stencils.
pub fn third_derivative(f: &Field) -> Result<Field> {
    let Grid::D1(g) = f.grid() else {
        return Err(Error::InvalidGrid(
            "third derivative is defined for 1D fields".into(),
        ));
    };
    let n = g.n_cells();
    if n < 4 {
        return Err(Error::InvalidGrid(format!(
            "third derivative needs at least 4 cells, got {n}"
        )));
    }
    f.check_finite()?;
    let u = f.values();
    let c = 1.0 / (2.0 * g.h().powi(3));
    let mut d = vec![0.0; n + 1];
    for j in 2..=n - 2 {
        d[j] = c * (u[j + 2] - 2.0 * u[j + 1] + 2.0 * u[j - 1] - u[j - 2]);
    }
    d[0] = c * (-5.0 * u[0] + 18.0 * u[1] - 24.0 * u[2] + 14.0 * u[3] - 3.0 * u[4]);
    d[1] = c * (-3.0 * u[0] + 10.0 * u[1] - 12.0 * u[2] + 6.0 * u[3] - u[4]);
    d[n] =
        -c * (-5.0 * u[n] + 18.0 * u[n - 1] - 24.0 * u[n - 2] + 14.0 * u[n - 3] - 3.0 * u[n - 4]);
    d[n - 1] = -c * (-3.0 * u[n] + 10.0 * u[n - 1] - 12.0 * u[n - 2] + 6.0 * u[n - 3] - u[n - 4]);
    Field::from_values(f.grid(), d)
}
