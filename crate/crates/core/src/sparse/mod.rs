//! Sparse matrices and the linear solvers behind each implicit step.
//!
//! Narrow-band systems (1D fourth order, moderate 2D grids) go through a
//! banded LU with partial pivoting. Wide-band systems that are refactored
//! every step go through ILU(0)-preconditioned BiCGSTAB. Either way the
//! residual is recomputed from the original matrix before a solve is
//! reported successful.

mod banded;
mod csr;
mod krylov;

pub use banded::BandedLu;
pub use csr::{SparseMatrix, SparseOperator, TripletBuilder, PAR_MATVEC_MIN_NNZ};
pub use krylov::{bicgstab, Ilu0};

use crate::error::{Error, Result};
use crate::par::Execution;

/// Largest system for which explicit-inverse diagnostics are computed.
pub const DIAGNOSTIC_SIZE_CAP: usize = 2500;

/// Band-LU work estimate `n·kl·(2kl+ku)` above which `Auto` picks Krylov.
pub const AUTO_BANDED_WORK_LIMIT: f64 = 2.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Auto,
    Banded,
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    BandedLu,
    IluBicgstab,
}

impl SolveMethod {
    pub fn tag(self) -> &'static str {
        match self {
            SolveMethod::BandedLu => "banded-lu",
            SolveMethod::IluBicgstab => "ilu0-bicgstab",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    /// `‖A x − b‖_∞ / max(1, ‖b‖_∞)`
    pub residual_norm: f64,
    /// Krylov iterations, or refinement sweeps for a direct solve.
    pub iterations: usize,
    pub method: SolveMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Relative residual target.
    pub tol: f64,
    /// Multiply `tol` by `max(1, ‖A‖_∞)` so the target tracks the matrix scale.
    pub scale_tol_by_norm: bool,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Auto,
            tol: 1e-12,
            scale_tol_by_norm: true,
            max_iter: 2000,
        }
    }
}

impl SolverConfig {
    pub fn effective_tol(&self, a: &SparseMatrix) -> f64 {
        if self.scale_tol_by_norm {
            self.tol * a.operator_norm_inf().max(1.0)
        } else {
            self.tol
        }
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64], r: &mut [f64]) -> Result<f64> {
    a.matvec_into(x, r)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    Ok(norm_inf(r) / norm_inf(b).max(1.0))
}

#[derive(Debug, Clone)]
enum Backend {
    Banded(BandedLu),
    Krylov(Ilu0),
}

/// A factored system matrix, reusable across right-hand sides and threads.
#[derive(Debug, Clone)]
pub struct Factorization {
    matrix: SparseMatrix,
    backend: Backend,
    tol: f64,
    max_iter: usize,
}

impl Factorization {
    pub fn new(matrix: SparseMatrix, cfg: &SolverConfig) -> Result<Self> {
        if !(cfg.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "solver tolerance must be > 0, got {}",
                cfg.tol
            )));
        }
        let kind = match cfg.kind {
            SolverKind::Auto => {
                let (kl, ku) = matrix.bandwidth();
                let work = matrix.dim() as f64 * kl as f64 * (2 * kl + ku) as f64;
                if work <= AUTO_BANDED_WORK_LIMIT {
                    SolverKind::Banded
                } else {
                    SolverKind::Krylov
                }
            }
            k => k,
        };
        let backend = match kind {
            SolverKind::Krylov => Backend::Krylov(Ilu0::factor(&matrix)?),
            _ => Backend::Banded(BandedLu::factor(&matrix)?),
        };
        let tol = cfg.effective_tol(&matrix);
        Ok(Self {
            matrix,
            backend,
            tol,
            max_iter: cfg.max_iter,
        })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn method(&self) -> SolveMethod {
        match self.backend {
            Backend::Banded(_) => SolveMethod::BandedLu,
            Backend::Krylov(_) => SolveMethod::IluBicgstab,
        }
    }

    /// Solves `A x = b` starting from the guess in `x` (used by Krylov only).
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) -> Result<SolveReport> {
        let n = self.dim();
        if b.len() != n || x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if b.len() != n { b.len() } else { x.len() },
            });
        }
        match &self.backend {
            Backend::Banded(lu) => {
                x.copy_from_slice(b);
                lu.solve_in_place(x)?;
                let mut r = vec![0.0; n];
                let mut rel = relative_residual(&self.matrix, x, b, &mut r)?;
                let mut sweeps = 0;
                // iterative refinement if back-substitution left too much residual
                while !(rel <= self.tol) && sweeps < 3 {
                    if !rel.is_finite() {
                        break;
                    }
                    lu.solve_in_place(&mut r)?;
                    for (xi, di) in x.iter_mut().zip(&r) {
                        *xi += di;
                    }
                    rel = relative_residual(&self.matrix, x, b, &mut r)?;
                    sweeps += 1;
                }
                if !(rel <= self.tol) {
                    return Err(Error::NotConverged {
                        method: SolveMethod::BandedLu.tag(),
                        iterations: sweeps,
                        residual: rel,
                        tol: self.tol,
                    });
                }
                Ok(SolveReport {
                    residual_norm: rel,
                    iterations: 0,
                    method: SolveMethod::BandedLu,
                })
            }
            Backend::Krylov(ilu) => {
                let (iterations, rel) = bicgstab(&self.matrix, ilu, b, x, self.tol, self.max_iter)?;
                Ok(SolveReport {
                    residual_norm: rel,
                    iterations,
                    method: SolveMethod::IluBicgstab,
                })
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        let mut x = vec![0.0; self.dim()];
        let report = self.solve_into(b, &mut x)?;
        Ok((x, report))
    }
}

/// Solves `a·x = rhs` to `‖a·x − rhs‖_∞ / max(1, ‖rhs‖_∞) ≤ tol`.
pub fn solve(a: &SparseMatrix, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    let cfg = SolverConfig {
        tol,
        scale_tol_by_norm: false,
        ..SolverConfig::default()
    };
    Factorization::new(a.clone(), &cfg)?.solve(rhs)
}

/// `‖F⁻¹ M‖_∞` where `F` is factored, by solving against every column of `M`.
/// Pass `None` for `M = I`.
pub fn inverse_product_norm_inf(
    fact: &Factorization,
    m: Option<&SparseMatrix>,
    exec: Execution,
) -> Result<f64> {
    let n = fact.dim();
    if n > DIAGNOSTIC_SIZE_CAP {
        return Err(Error::SizeCapExceeded {
            n,
            cap: DIAGNOSTIC_SIZE_CAP,
        });
    }
    let columns = m.map(|m| m.transpose());
    let chunks: Vec<Vec<usize>> = (0..n)
        .collect::<Vec<_>>()
        .chunks(64)
        .map(|c| c.to_vec())
        .collect();
    let partial = exec.map(chunks, |cols| -> Result<Vec<f64>> {
        let mut row_sums = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for k in cols {
            rhs.iter_mut().for_each(|v| *v = 0.0);
            match &columns {
                Some(t) => {
                    for (i, v) in t.row(k) {
                        rhs[i] = v;
                    }
                }
                None => rhs[k] = 1.0,
            }
            let (x, _) = fact.solve(&rhs)?;
            for (s, xi) in row_sums.iter_mut().zip(&x) {
                *s += xi.abs();
            }
        }
        Ok(row_sums)
    });
    let mut total = vec![0.0; n];
    for p in partial {
        for (t, v) in total.iter_mut().zip(p?) {
            *t += v;
        }
    }
    Ok(total.into_iter().fold(0.0, f64::max))
}
