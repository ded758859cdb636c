//! Independent KKT verification: re-derives feasibility and stationarity
//! from central differences and freshly computed least-squares
//! multipliers, bypassing all solver bookkeeping.

use nalgebra::{DMatrix, DVector};

use super::{central_gradient, central_jacobian, NlpError, NlpInstance};

#[derive(Debug, Clone)]
pub struct KktCertificate {
    pub feasibility: f64,
    pub stationarity: f64,
    pub multipliers: DVector<f64>,
    pub feas_tol: f64,
    pub opt_tol: f64,
}

impl KktCertificate {
    pub fn passes(&self) -> bool {
        self.feasibility <= self.feas_tol && self.stationarity <= self.opt_tol
    }
}

/// Check first-order optimality of `x` against the given tolerances.
pub fn verify_kkt(
    instance: &NlpInstance,
    x: &DVector<f64>,
    feas_tol: f64,
    opt_tol: f64,
) -> Result<KktCertificate, NlpError> {
    let c = instance.eval_constraints(x)?;
    let g = central_gradient(instance, x)?;
    let j = central_jacobian(instance, x)?;
    let m = c.len();

    let eps = 1e-8;
    // An infinite bound is never active.
    let lower_active = |i: usize| {
        instance.lower()[i].is_finite()
            && x[i] - instance.lower()[i] <= eps * (1.0 + instance.lower()[i].abs())
    };
    let upper_active = |i: usize| {
        instance.upper()[i].is_finite()
            && instance.upper()[i] - x[i] <= eps * (1.0 + instance.upper()[i].abs())
    };
    let free: Vec<usize> = (0..x.len())
        .filter(|&i| !lower_active(i) && !upper_active(i))
        .collect();

    let multipliers = if free.is_empty() || m == 0 {
        DVector::zeros(m)
    } else {
        let jf = j.select_columns(free.iter());
        let gf = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
        let gram = &jf * jf.transpose() + DMatrix::identity(m, m) * 1e-12;
        let rhs = -(&jf * gf);
        gram.cholesky()
            .map(|chol| chol.solve(&rhs))
            .unwrap_or_else(|| DVector::zeros(m))
    };

    let r = &g + j.transpose() * &multipliers;
    let mut stationarity: f64 = 0.0;
    for i in 0..x.len() {
        let at_lower = lower_active(i);
        let at_upper = upper_active(i);
        let viol = if at_lower && at_upper {
            0.0
        } else if at_lower {
            (-r[i]).max(0.0)
        } else if at_upper {
            r[i].max(0.0)
        } else {
            r[i].abs()
        };
        stationarity = stationarity.max(viol);
    }

    let feasibility = c.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    Ok(KktCertificate {
        feasibility,
        stationarity,
        multipliers,
        feas_tol,
        opt_tol,
    })
}
