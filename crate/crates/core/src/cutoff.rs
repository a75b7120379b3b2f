//! Cutoff projections of nodal fields.
//!
//! `f⁺ = max(f, 0)` and `f⁺_δ = max(f, δ)`, applied node by node. Both act on
//! the values only and leave the grid untouched. The comparison is exact: a
//! node equal to the floor keeps its own value.

use crate::error::{Error, Result};
use crate::mesh::Field;

/// Floor value for the δ-cutoff. `delta == 0` is the plain nonnegative part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffParams {
    delta: f64,
}

impl CutoffParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cutoff floor must be finite and >= 0, got {delta}"
            )));
        }
        Ok(Self { delta })
    }

    pub fn nonneg() -> Self {
        Self { delta: 0.0 }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Default for CutoffParams {
    fn default() -> Self {
        Self::nonneg()
    }
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// Floors every entry of `values` at `delta` in place.
pub fn floor_in_place(values: &mut [f64], delta: f64) -> Result<()> {
    check_finite(values)?;
    for v in values.iter_mut() {
        if *v < delta {
            *v = delta;
        }
    }
    Ok(())
}

/// Nonnegative part `f⁺`.
pub fn cutoff_nonneg(f: &Field) -> Result<Field> {
    cutoff_delta(f, CutoffParams::nonneg())
}

/// δ-cutoff `f⁺_δ`.
pub fn cutoff_delta(f: &Field, p: CutoffParams) -> Result<Field> {
    let mut out = f.clone();
    floor_in_place(out.values_mut(), p.delta)?;
    Ok(out)
}

/// Gaps of the two nodewise inequalities
/// `|f⁺ − u| ≤ |f − u|` and `|f⁺ − f| ≤ |u − f|` for a nonnegative `u`.
///
/// Returns `(max_j |f⁺−u| − |f−u|, max_j |f⁺−f| − |u−f|)`; both are `≤ 0`
/// whenever the hypothesis `u ≥ 0` holds.
pub fn lemma_gap(f: &Field, u: &Field) -> Result<(f64, f64)> {
    if f.grid() != u.grid() {
        return Err(Error::GridMismatch);
    }
    check_finite(f.values())?;
    check_finite(u.values())?;
    if let Some(index) = u.values().iter().position(|&v| v < 0.0) {
        return Err(Error::NegativeValue {
            index,
            value: u.values()[index],
        });
    }
    let mut gap_u = f64::NEG_INFINITY;
    let mut gap_f = f64::NEG_INFINITY;
    for (&fj, &uj) in f.values().iter().zip(u.values()) {
        let fp = fj.max(0.0);
        gap_u = gap_u.max((fp - uj).abs() - (fj - uj).abs());
        gap_f = gap_f.max((fp - fj).abs() - (uj - fj).abs());
    }
    Ok((gap_u, gap_f))
}

/// Outcome of checking every cutoff inequality at one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeInequalities {
    pub cut_closer_to_u: bool,
    pub cut_moves_less_than_u: bool,
    pub delta_within_delta_of_cut: bool,
    pub delta_error_bound: bool,
    pub nonexpansive: bool,
}

impl NodeInequalities {
    pub fn all(&self) -> bool {
        self.cut_closer_to_u
            && self.cut_moves_less_than_u
            && self.delta_within_delta_of_cut
            && self.delta_error_bound
            && self.nonexpansive
    }
}

/// Evaluates every scalar cutoff inequality for `(f, u, δ)` plus max-norm
/// nonexpansiveness against a second value `g`. Requires `u ≥ 0`, `δ ≥ 0`.
pub fn check_node(f: f64, g: f64, u: f64, delta: f64) -> NodeInequalities {
    let fp = f.max(0.0);
    let gp = g.max(0.0);
    let fd = f.max(delta);
    NodeInequalities {
        cut_closer_to_u: (fp - u).abs() <= (f - u).abs(),
        cut_moves_less_than_u: (fp - f).abs() <= (u - f).abs(),
        delta_within_delta_of_cut: (fd - fp).abs() <= delta,
        delta_error_bound: (fd - u).abs() <= (f - u).abs() + delta,
        nonexpansive: (fp - gp).abs() <= (f - g).abs(),
    }
}
