//! Butcher tableaux for the diagonally implicit integrators.

use crate::error::{Error, Result};

/// Diagonal coefficient of the three-stage L-stable SDIRK of order 3: the
/// root in (0, 1) of `γ³ − 3γ² + 3γ/2 − 1/6 = 0` that makes the scheme
/// L-stable.
pub const SDIRK3_GAMMA: f64 = 0.435_866_521_508_459;

#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    /// Lower-triangular stage matrix, diagonal included.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub order: u32,
}

impl ButcherTableau {
    /// Three-stage, stiffly accurate, L-stable SDIRK of classical order 3.
    pub fn sdirk3() -> Self {
        let g = SDIRK3_GAMMA;
        let c2 = 0.5 * (1.0 + g);
        let b1 = -(6.0 * g * g - 16.0 * g + 1.0) / 4.0;
        let b2 = (6.0 * g * g - 20.0 * g + 5.0) / 4.0;
        Self {
            a: vec![vec![g], vec![c2 - g, g], vec![b1, b2, g]],
            b: vec![b1, b2, g],
            c: vec![g, c2, 1.0],
            order: 3,
        }
    }

    /// θ-method written as a two-stage DIRK: first stage explicit, second
    /// stage carries θ on the diagonal.
    pub fn theta(theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in [0, 1], got {theta}"
            )));
        }
        Ok(Self {
            a: vec![vec![0.0], vec![1.0 - theta, theta]],
            b: vec![1.0 - theta, theta],
            c: vec![0.0, 1.0],
            order: if theta == 0.5 { 2 } else { 1 },
        })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.a[i][i]
    }

    /// All diagonal entries equal and positive.
    pub fn is_singly_diagonal(&self) -> bool {
        let g = self.diag(0);
        g > 0.0 && (0..self.stages()).all(|i| self.diag(i) == g)
    }

    /// Last stage row equals the weights, so the step value is the last stage.
    pub fn is_stiffly_accurate(&self) -> bool {
        let s = self.stages();
        (0..s).all(|j| (self.a[s - 1][j] - self.b[j]).abs() <= 1e-15)
    }

    /// Row sums match abscissae and weights sum to one.
    pub fn validate(&self) -> Result<()> {
        let s = self.stages();
        if self.a.len() != s || self.c.len() != s {
            return Err(Error::InvalidParameter(
                "tableau dimensions disagree".into(),
            ));
        }
        for (i, row) in self.a.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::InvalidParameter(format!(
                    "stage row {i} must have {} entries",
                    i + 1
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - self.c[i]).abs() > 1e-14 {
                return Err(Error::InvalidParameter(format!(
                    "row {i} sums to {sum}, c = {}",
                    self.c[i]
                )));
            }
        }
        let bsum: f64 = self.b.iter().sum();
        if (bsum - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidParameter(format!("weights sum to {bsum}")));
        }
        Ok(())
    }

    /// Residuals of the order conditions up to order three:
    /// `Σb − 1`, `Σbc − 1/2`, `Σbc² − 1/3`, `Σ b_i a_ij c_j − 1/6`.
    pub fn order_condition_residuals(&self) -> [f64; 4] {
        let s = self.stages();
        let b = &self.b;
        let c = &self.c;
        let r1: f64 = b.iter().sum::<f64>() - 1.0;
        let r2: f64 = (0..s).map(|i| b[i] * c[i]).sum::<f64>() - 0.5;
        let r3: f64 = (0..s).map(|i| b[i] * c[i] * c[i]).sum::<f64>() - 1.0 / 3.0;
        let r4: f64 = (0..s)
            .map(|i| b[i] * (0..=i).map(|j| self.a[i][j] * c[j]).sum::<f64>())
            .sum::<f64>()
            - 1.0 / 6.0;
        [r1, r2, r3, r4]
    }

    /// Linear stability function `R(z) = 1 + z bᵀ (I − zA)⁻¹ 1`.
    pub fn stability_function(&self, z: f64) -> f64 {
        let s = self.stages();
        let mut y = vec![0.0; s];
        for i in 0..s {
            let mut acc = 1.0;
            for j in 0..i {
                acc += z * self.a[i][j] * y[j];
            }
            y[i] = acc / (1.0 - z * self.a[i][i]);
        }
        1.0 + z * (0..s).map(|i| self.b[i] * y[i]).sum::<f64>()
    }
}
