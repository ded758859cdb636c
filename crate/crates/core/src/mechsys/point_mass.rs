//! Unit point mass on a line: `L = ½ v²`, fully actuated. The geometric
//! test fixture — its optimal-control problems have closed forms.

use nalgebra::{DMatrix, DVector};

use super::{LagrangianModel, ModelError};

#[derive(Debug, Clone)]
pub struct PointMass {
    actuation: DMatrix<f64>,
}

/// Build the unit point mass.
pub fn make_point_mass() -> PointMass {
    PointMass {
        actuation: DMatrix::identity(1, 1),
    }
}

impl LagrangianModel for PointMass {
    fn name(&self) -> &str {
        "pointmass"
    }

    fn dim_q(&self) -> usize {
        1
    }

    fn dim_u(&self) -> usize {
        1
    }

    fn lagrangian(&self, _q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        0.5 * v[0] * v[0]
    }

    fn l_q(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(1)
    }

    fn l_v(&self, _q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        v.clone()
    }

    fn l_vv(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(1, 1)
    }

    fn l_qv(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }

    fn actuation(&self) -> &DMatrix<f64> {
        &self.actuation
    }

    fn rebuild(&self, params: &[f64]) -> Result<Box<dyn LagrangianModel>, ModelError> {
        if !params.is_empty() {
            return Err(ModelError::DesignParamMismatch {
                expected: 0,
                got: params.len(),
            });
        }
        Ok(Box::new(self.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_equals_velocity() {
        let model = make_point_mass();
        let q = DVector::from_vec(vec![0.3]);
        let v = DVector::from_vec(vec![2.0]);
        assert_eq!(model.l_v(&q, &v)[0], 2.0);
        assert_eq!(model.l_q(&q, &v)[0], 0.0);
    }
}
