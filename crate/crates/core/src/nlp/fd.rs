//! Finite-difference derivatives of NLP instances. The solver consumes a
//! forward-difference constraint Jacobian and a central-difference
//! objective gradient (forward differences carry too much truncation
//! error to steer the tail of an optimization, and the 2n objective
//! evaluations are negligible next to the m·n Jacobian evaluations).
//! Serial central-difference variants serve as verification oracles.

use nalgebra::{DMatrix, DVector};

use super::{NlpError, NlpInstance};
use crate::exec::{map_indexed, ExecMode};

/// Forward-difference step for coordinate value `xi`.
fn forward_step(xi: f64) -> f64 {
    1e-7 * (1.0 + xi.abs())
}

/// Central-difference step for coordinate value `xi`.
fn central_step(xi: f64) -> f64 {
    1e-6 * (1.0 + xi.abs())
}

/// Forward-difference constraint Jacobian, `m × n`; columns are
/// independent and evaluated according to `mode`.
pub fn jacobian(
    instance: &NlpInstance,
    x: &DVector<f64>,
    mode: ExecMode,
) -> Result<DMatrix<f64>, NlpError> {
    let base = instance.eval_constraints(x)?;
    let m = base.len();
    let n = instance.n();
    let columns: Vec<Result<DVector<f64>, NlpError>> = map_indexed(mode, n, |i| {
        let h = forward_step(x[i]);
        let mut xp = x.clone();
        xp[i] += h;
        instance
            .eval_constraints(&xp)
            .map(|c| (c - &base) / h)
    });
    let mut out = DMatrix::zeros(m, n);
    for (i, column) in columns.into_iter().enumerate() {
        out.set_column(i, &column?);
    }
    Ok(out)
}

/// Forward-difference objective gradient.
pub fn gradient(
    instance: &NlpInstance,
    x: &DVector<f64>,
    mode: ExecMode,
) -> Result<DVector<f64>, NlpError> {
    let base = instance.eval_objective(x)?;
    let n = instance.n();
    let entries: Vec<Result<f64, NlpError>> = map_indexed(mode, n, |i| {
        let h = forward_step(x[i]);
        let mut xp = x.clone();
        xp[i] += h;
        instance.eval_objective(&xp).map(|f| (f - base) / h)
    });
    let mut out = DVector::zeros(n);
    for (i, entry) in entries.into_iter().enumerate() {
        out[i] = entry?;
    }
    Ok(out)
}

/// Central-difference objective gradient with concurrently evaluated
/// coordinates; this is the gradient the solver iterates on.
pub fn solver_gradient(
    instance: &NlpInstance,
    x: &DVector<f64>,
    mode: ExecMode,
) -> Result<DVector<f64>, NlpError> {
    let n = instance.n();
    let entries: Vec<Result<f64, NlpError>> = map_indexed(mode, n, |i| {
        let h = central_step(x[i]);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fp = instance.eval_objective(&xp)?;
        let fm = instance.eval_objective(&xm)?;
        Ok((fp - fm) / (2.0 * h))
    });
    let mut out = DVector::zeros(n);
    for (i, entry) in entries.into_iter().enumerate() {
        out[i] = entry?;
    }
    Ok(out)
}

/// Central-difference Jacobian (verification oracle, one order more
/// accurate than the solver's forward scheme).
pub fn central_jacobian(
    instance: &NlpInstance,
    x: &DVector<f64>,
) -> Result<DMatrix<f64>, NlpError> {
    let n = instance.n();
    let m = instance.m();
    let mut out = DMatrix::zeros(m, n);
    for i in 0..n {
        let h = central_step(x[i]);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let column = (instance.eval_constraints(&xp)? - instance.eval_constraints(&xm)?)
            / (2.0 * h);
        out.set_column(i, &column);
    }
    Ok(out)
}

/// Central-difference gradient (verification oracle).
pub fn central_gradient(
    instance: &NlpInstance,
    x: &DVector<f64>,
) -> Result<DVector<f64>, NlpError> {
    let n = instance.n();
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let h = central_step(x[i]);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        out[i] =
            (instance.eval_objective(&xp)? - instance.eval_objective(&xm)?) / (2.0 * h);
    }
    Ok(out)
}
