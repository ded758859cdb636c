//! Lagrangian mechanical systems: the model interface, forward dynamics,
//! and the built-in pendulum-chain and point-mass models.

pub mod chain;
pub mod integrate;
pub mod point_mass;

pub use chain::{make_3crobot, make_acrobot, make_pendulum, ChainPendulum};
pub use integrate::{reference_simulate, simulate_generalized, TrajectorySamples};
pub use point_mass::{make_point_mass, PointMass};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Failure modes of model construction and evaluation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("link lengths must be positive (got {value})")]
    NonPositiveLength { value: f64 },
    #[error("mass matrix is singular at the queried state")]
    SingularMassMatrix,
    #[error("model has {expected} design parameters, got {got}")]
    DesignParamMismatch { expected: usize, got: usize },
    #[error("integrator step size collapsed at t = {t:.6e}")]
    StepSizeCollapse { t: f64 },
}

/// A free design parameter of a model (e.g. a link length), with bounds
/// used when the parameter becomes a decision variable.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignParam {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub default: f64,
}

/// A mechanical system described by a Lagrangian `L(q, v)` and a constant
/// actuation map `B` sending controls to generalized forces.
///
/// All evaluators are pure; models are immutable and safe to share across
/// threads.
pub trait LagrangianModel: Send + Sync {
    fn name(&self) -> &str;
    fn dim_q(&self) -> usize;
    fn dim_u(&self) -> usize;

    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64;
    /// `∂L/∂q` as a column vector.
    fn l_q(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;
    /// `∂L/∂v` (the momentum covector) as a column vector.
    fn l_v(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64>;
    /// Mass matrix `∂²L/∂v²`, symmetric positive-definite.
    fn l_vv(&self, q: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64>;
    /// Mixed partial `∂(L_v)/∂q`: rows index momentum components, columns
    /// index configuration components.
    fn l_qv(&self, q: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64>;

    /// Constant actuation map `B`, `dim_q × dim_u`.
    fn actuation(&self) -> &DMatrix<f64>;

    /// Free design parameters; empty for fixed-geometry models.
    fn design_params(&self) -> &[DesignParam] {
        &[]
    }

    /// Rebuild the model with the given design-parameter values.
    fn rebuild(&self, params: &[f64]) -> Result<Box<dyn LagrangianModel>, ModelError>;
}

/// `(L_vv)⁻¹ (L_q + B u − L_qv v)`: generalized accelerations under
/// control `u`.
pub fn forward_dynamics(
    model: &dyn LagrangianModel,
    q: &DVector<f64>,
    v: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>, ModelError> {
    let force = model.l_q(q, v) + model.actuation() * u - model.l_qv(q, v) * v;
    model
        .l_vv(q, v)
        .cholesky()
        .ok_or(ModelError::SingularMassMatrix)
        .map(|chol| chol.solve(&force))
}

/// Accelerations under an explicit generalized force (not routed through
/// the actuation map); used for initial-guess shaping.
pub fn forced_dynamics(
    model: &dyn LagrangianModel,
    q: &DVector<f64>,
    v: &DVector<f64>,
    force: &DVector<f64>,
) -> Result<DVector<f64>, ModelError> {
    let rhs = model.l_q(q, v) + force - model.l_qv(q, v) * v;
    model
        .l_vv(q, v)
        .cholesky()
        .ok_or(ModelError::SingularMassMatrix)
        .map(|chol| chol.solve(&rhs))
}

/// Total energy `E = p·v − L`.
pub fn energy(model: &dyn LagrangianModel, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
    model.l_v(q, v).dot(v) - model.lagrangian(q, v)
}
