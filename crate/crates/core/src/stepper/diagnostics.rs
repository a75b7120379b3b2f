use crate::error::{Error, Result};
use crate::mesh::{Field, Grid};
use crate::par::Execution;
use crate::sparse::{
    inverse_product_norm_inf, Factorization, SolverConfig, SparseMatrix, SparseOperator,
    DIAGNOSTIC_SIZE_CAP,
};

use super::{Integrator, ProblemSpec, StageSystem};

/// Max-norm witnesses for the boundedness and stability conditions of a
/// scheme pair `(B₁, B₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeDiagnostics {
    pub dt: f64,
    /// `‖B₁⁻¹‖_∞`
    pub norm_b1_inv: f64,
    /// `‖B₁⁻¹ B₀‖_∞`
    pub norm_b1_inv_b0: f64,
    /// `max(0, (‖B₁⁻¹B₀‖_∞ − 1) / dt)`
    pub k: f64,
}

impl SchemeDiagnostics {
    /// `‖B₁⁻¹B₀‖_∞ ≤ 1 + K·dt` for the given `K`.
    pub fn satisfies_stability(&self, k: f64) -> bool {
        self.norm_b1_inv_b0 <= 1.0 + k * self.dt
    }
}

/// Explicit-inverse diagnostics; only for systems of at most
/// [`crate::sparse::DIAGNOSTIC_SIZE_CAP`] unknowns.
pub fn scheme_diagnostics(op: &SparseOperator, dt: f64) -> Result<SchemeDiagnostics> {
    let fact = Factorization::new(op.b1.clone(), &SolverConfig::default())?;
    let exec = Execution::default();
    let norm_b1_inv = inverse_product_norm_inf(&fact, None, exec)?;
    let norm_b1_inv_b0 = inverse_product_norm_inf(&fact, Some(&op.b0), exec)?;
    Ok(SchemeDiagnostics {
        dt,
        norm_b1_inv,
        norm_b1_inv_b0,
        k: ((norm_b1_inv_b0 - 1.0) / dt).max(0.0),
    })
}

/// Homogeneous version of a problem: no source, zero boundary data.
struct Homogeneous<'a, P: ?Sized>(&'a P);

impl<P: ProblemSpec + ?Sized> ProblemSpec for Homogeneous<'_, P> {
    fn grid(&self) -> Grid {
        self.0.grid()
    }
    fn initial(&self) -> Field {
        Field::zeros(self.0.grid())
    }
    fn operator(&self, lagged: &Field) -> Result<SparseMatrix> {
        self.0.operator(lagged)
    }
    fn is_autonomous_linear(&self) -> bool {
        self.0.is_autonomous_linear()
    }
    fn dirichlet_nodes(&self) -> Vec<usize> {
        self.0.dirichlet_nodes()
    }
}

/// Diagnostics of a diagonally implicit Runge–Kutta step written as a
/// scheme pair: `B₁ = Π (I − a_ii·dt·L)` over the implicit stages and
/// `B₁⁻¹B₀ = R(dt·L)`, the linear amplification operator with Dirichlet
/// rows and columns mapped to zero, boundary data being part of the
/// inhomogeneous term. For a θ tableau this is the θ-method pair restricted
/// to interior columns.
pub fn dirk_diagnostics<P: ProblemSpec + ?Sized>(
    problem: &P,
    lagged: &Field,
    dt: f64,
    integrator: Integrator,
) -> Result<SchemeDiagnostics> {
    let n = problem.grid().n_nodes();
    if n > DIAGNOSTIC_SIZE_CAP {
        return Err(Error::SizeCapExceeded {
            n,
            cap: DIAGNOSTIC_SIZE_CAP,
        });
    }
    let l = problem.operator(lagged)?;
    let sys = StageSystem::new(
        &l,
        &integrator.tableau()?,
        dt,
        problem.dirichlet_nodes(),
        &SolverConfig::default(),
    )?;
    let hom = Homogeneous(problem);
    let chunks: Vec<Vec<usize>> = (0..n)
        .collect::<Vec<_>>()
        .chunks(64)
        .map(<[usize]>::to_vec)
        .collect();
    let partial = Execution::default().map(chunks, |cols| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut inv = vec![0.0; n];
        let mut amp = vec![0.0; n];
        for k in cols {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            let (r, _) = sys.step(&hom, &e, 0.0)?;
            sys.solve_denominator(&mut e)?;
            for i in 0..n {
                inv[i] += e[i].abs();
                amp[i] += r[i].abs();
            }
        }
        Ok((inv, amp))
    });
    let mut inv = vec![0.0; n];
    let mut amp = vec![0.0; n];
    for p in partial {
        let (a, b) = p?;
        for i in 0..n {
            inv[i] += a[i];
            amp[i] += b[i];
        }
    }
    let norm_b1_inv = inv.into_iter().fold(0.0, f64::max);
    let norm_b1_inv_b0 = amp.into_iter().fold(0.0, f64::max);
    Ok(SchemeDiagnostics {
        dt,
        norm_b1_inv,
        norm_b1_inv_b0,
        k: ((norm_b1_inv_b0 - 1.0) / dt).max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{SparseMatrix, TripletBuilder};

    #[test]
    fn identity_pair() {
        let op = SparseOperator::new(
            SparseMatrix::identity(5),
            SparseMatrix::identity(5),
            vec![0.0; 5],
            true,
        )
        .unwrap();
        let d = scheme_diagnostics(&op, 0.1).unwrap();
        assert_eq!((d.norm_b1_inv, d.norm_b1_inv_b0, d.k), (1.0, 1.0, 0.0));
    }

    #[test]
    fn backward_euler_heat_is_contractive() {
        // Dirichlet heat equation on 30 cells, backward Euler
        let n = 31;
        let h = 1.0 / 30.0;
        let dt = 1e-3;
        let mut b1 = TripletBuilder::new(n);
        let mut b0 = TripletBuilder::new(n);
        for i in 0..n {
            if i == 0 || i == n - 1 {
                b1.add(i, i, 1.0);
                continue;
            }
            let c = dt / (h * h);
            b1.add(i, i, 1.0 + 2.0 * c);
            b1.add(i, i - 1, -c);
            b1.add(i, i + 1, -c);
            b0.add(i, i, 1.0);
        }
        let op = SparseOperator::new(b1.build(), b0.build(), vec![0.0; n], true).unwrap();
        let d = scheme_diagnostics(&op, dt).unwrap();
        assert!(d.norm_b1_inv_b0 <= 1.0 + 1e-14);
        assert!(d.norm_b1_inv <= 1.0 + 1e-14);
        assert_eq!(d.k, 0.0);
    }

    #[test]
    fn dirk_form_reduces_to_theta_pair() {
        use crate::problems::AnisotropicSpec;
        use crate::stepper::theta_operator;
        let spec = AnisotropicSpec::new(8).unwrap();
        let u = spec.initial();
        let n = u.len();
        let dirichlet = spec.dirichlet_nodes();
        let mut p = TripletBuilder::new(n);
        for i in (0..n).filter(|i| !dirichlet.contains(i)) {
            p.add(i, i, 1.0);
        }
        let interior = p.build();
        for theta in [0.5, 1.0] {
            let mut op = theta_operator(&spec, &u, 0.0, 1e-3, theta).unwrap();
            op.b0 = op.b0.matmul(&interior).unwrap();
            let pair = scheme_diagnostics(&op, 1e-3).unwrap();
            let dirk = dirk_diagnostics(&spec, &u, 1e-3, Integrator::Theta(theta)).unwrap();
            assert!((pair.norm_b1_inv - dirk.norm_b1_inv).abs() < 1e-10);
            assert!((pair.norm_b1_inv_b0 - dirk.norm_b1_inv_b0).abs() < 1e-10);
        }
    }

    #[test]
    fn crank_nicolson_heat_contractive_for_unit_mesh_ratio() {
        use crate::problems::HeatProblem1D;
        let p = HeatProblem1D::new(40).unwrap();
        let h2 = 1.0 / 1600.0;
        let mut ks = Vec::new();
        for r in [1.0, 0.5, 0.25] {
            let d = dirk_diagnostics(&p, &p.initial(), r * h2, Integrator::Theta(0.5)).unwrap();
            assert!(d.satisfies_stability(d.k));
            assert!(d.norm_b1_inv_b0 <= 1.0 + 1e-12);
            ks.push(d.k);
        }
        assert!(ks.iter().all(|&k| k == 0.0));
    }
}
