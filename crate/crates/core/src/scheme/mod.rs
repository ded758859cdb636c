//! The three pseudo-spectral discretizations of forced Lagrangian
//! dynamics, as residual functions over grid-valued trajectories:
//!
//! * [`SchemeKind::Pmoc`] — the weak variational form. Per configuration
//!   channel the dynamics residual is
//!   `(t_f/2)·G·(L_q + Bu) + (DᵀG − E)·L_v` with
//!   `E = LfᵀLf − L0ᵀL0`; by the integration-by-parts identity
//!   `GD + DᵀG = E` this equals `−G` times the strong-form residual, so
//!   the schemes share roots and differ in conditioning.
//! * [`SchemeKind::DaeEl`] — strong Euler-Lagrange collocation,
//!   `(2/t_f)·D·L_v − L_q − Bu` at every node.
//! * [`SchemeKind::OdeEl`] — first-order form with an explicit velocity
//!   grid: `(2/t_f)·D·q = v` and `(2/t_f)·D·v = accel(q, v, u)`.
//!
//! All schemes share the affine map between the canonical interval
//! `[-1, 1]` and physical time `[0, t_f]`, boundary rows through the
//! endpoint evaluation forms, and the running-cost objective
//! `(t_f/2)·1ᵀG·l`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::mechsys::{forward_dynamics, LagrangianModel, ModelError};
use crate::polybasis::{BasisError, GridFunction, SpectralBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Pmoc,
    DaeEl,
    OdeEl,
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::Pmoc => "pmoc",
            SchemeKind::DaeEl => "dae-el",
            SchemeKind::OdeEl => "ode-el",
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SchemeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("boundary condition dimension {got} does not match dim_q {expected}")]
    BoundaryDimension { expected: usize, got: usize },
    #[error("decision vector has length {got}, layout requires {expected}")]
    DecisionDimension { expected: usize, got: usize },
    #[error("final time bounds must satisfy 0 < lower <= upper (got [{lower}, {upper}])")]
    InvalidTimeBounds { lower: f64, upper: f64 },
}

/// Final time: fixed, or a bounded decision variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeScaling {
    Fixed(f64),
    Free { lower: f64, upper: f64, initial: f64 },
}

impl TimeScaling {
    pub fn free(lower: f64, upper: f64) -> Self {
        TimeScaling::Free {
            lower,
            upper,
            initial: 0.5 * (lower + upper),
        }
    }

    pub fn is_free(&self) -> bool {
        matches!(self, TimeScaling::Free { .. })
    }

    /// Value used when building initial guesses.
    pub fn initial(&self) -> f64 {
        match *self {
            TimeScaling::Fixed(tf) => tf,
            TimeScaling::Free { initial, .. } => initial,
        }
    }

    fn validate(&self) -> Result<(), SchemeError> {
        let (lo, hi) = match *self {
            TimeScaling::Fixed(tf) => (tf, tf),
            TimeScaling::Free { lower, upper, .. } => (lower, upper),
        };
        if lo <= 0.0 || hi < lo {
            return Err(SchemeError::InvalidTimeBounds {
                lower: lo,
                upper: hi,
            });
        }
        Ok(())
    }
}

/// A single boundary target component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetValue {
    Free,
    /// Exact value: residual `x − target`.
    Value(f64),
    /// Angle matched modulo `2π`: residual `sin((x − target)/2)`, smooth
    /// and zero exactly on the equivalence class.
    Angle(f64),
}

impl TargetValue {
    fn residual(&self, x: f64) -> Option<f64> {
        match *self {
            TargetValue::Free => None,
            TargetValue::Value(target) => Some(x - target),
            TargetValue::Angle(target) => Some(((x - target) / 2.0).sin()),
        }
    }

    fn is_constrained(&self) -> bool {
        !matches!(self, TargetValue::Free)
    }
}

/// Initial state (always pinned exactly) and optional final targets.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    pub q_init: DVector<f64>,
    pub v_init: DVector<f64>,
    pub q_final: Vec<TargetValue>,
    pub v_final: Vec<TargetValue>,
}

impl BoundaryConditions {
    /// Pin the initial state; leave the final state free.
    pub fn from_rest_state(q_init: DVector<f64>, v_init: DVector<f64>) -> Self {
        let d = q_init.len();
        Self {
            q_init,
            v_init,
            q_final: vec![TargetValue::Free; d],
            v_final: vec![TargetValue::Free; d],
        }
    }

    pub fn with_q_final(mut self, targets: Vec<TargetValue>) -> Self {
        self.q_final = targets;
        self
    }

    pub fn with_v_final(mut self, targets: Vec<TargetValue>) -> Self {
        self.v_final = targets;
        self
    }

    fn validate(&self, dim_q: usize) -> Result<(), SchemeError> {
        for len in [
            self.q_init.len(),
            self.v_init.len(),
            self.q_final.len(),
            self.v_final.len(),
        ] {
            if len != dim_q {
                return Err(SchemeError::BoundaryDimension {
                    expected: dim_q,
                    got: len,
                });
            }
        }
        Ok(())
    }
}

/// Running cost integrand `l(q, v, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunningCost {
    /// `l = |u|²` — the minimum-effort objective.
    TorqueSquared,
}

impl RunningCost {
    fn evaluate(&self, u: &DVector<f64>) -> f64 {
        match self {
            RunningCost::TorqueSquared => u.norm_squared(),
        }
    }
}

/// Extra algebraic constraints among design parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamConstraint {
    /// `Σ_j p_j = value`.
    SumEquals(f64),
}

/// Decision-vector layout: ordered segments
/// `[q-grid, (v-grid), u-grid, (t_f), (design params)]`, each grid stored
/// channel-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub dim_q: usize,
    pub dim_u: usize,
    pub n: usize,
    pub has_v_grid: bool,
    pub free_tf: bool,
    pub n_params: usize,
}

impl Layout {
    pub fn q_index(&self, channel: usize, node: usize) -> usize {
        channel * self.n + node
    }

    pub fn v_index(&self, channel: usize, node: usize) -> usize {
        debug_assert!(self.has_v_grid);
        (self.dim_q + channel) * self.n + node
    }

    pub fn u_index(&self, channel: usize, node: usize) -> usize {
        let state_channels = if self.has_v_grid {
            2 * self.dim_q
        } else {
            self.dim_q
        };
        (state_channels + channel) * self.n + node
    }

    pub fn tf_index(&self) -> Option<usize> {
        self.free_tf.then(|| self.grid_len())
    }

    pub fn param_index(&self, j: usize) -> usize {
        debug_assert!(j < self.n_params);
        self.grid_len() + usize::from(self.free_tf) + j
    }

    fn grid_len(&self) -> usize {
        let state_channels = if self.has_v_grid {
            2 * self.dim_q
        } else {
            self.dim_q
        };
        (state_channels + self.dim_u) * self.n
    }

    /// Total decision dimension.
    pub fn n_decision(&self) -> usize {
        self.grid_len() + usize::from(self.free_tf) + self.n_params
    }
}

/// A trajectory unpacked from a decision vector.
#[derive(Debug, Clone)]
pub struct ExtractedTrajectory {
    pub t_f: f64,
    /// Configuration samples, `dim_q × N`.
    pub q: GridFunction,
    /// Velocity samples in physical time, `dim_q × N`.
    pub v: GridFunction,
    /// Control samples, `dim_u × N`.
    pub u: GridFunction,
    pub params: Vec<f64>,
}

/// One scheme discretizing one model on one basis: residual and objective
/// over the flat decision vector.
///
/// Immutable; evaluation is pure, so decision vectors may be evaluated
/// concurrently.
pub struct DiscretizedProblem {
    kind: SchemeKind,
    basis: Arc<SpectralBasis>,
    model: Arc<dyn LagrangianModel>,
    bc: BoundaryConditions,
    scaling: TimeScaling,
    cost: RunningCost,
    layout: Layout,
    param_constraints: Vec<ParamConstraint>,
    /// `DᵀG − E`, the momentum-side factor of the weak-form residual.
    weak_momentum_factor: DMatrix<f64>,
    /// `1ᵀG`: quadrature covector for the plain integral on `[-1,1]`.
    integral_row: DVector<f64>,
}

fn build(
    kind: SchemeKind,
    model: Arc<dyn LagrangianModel>,
    basis: Arc<SpectralBasis>,
    bc: BoundaryConditions,
    scaling: TimeScaling,
    cost: RunningCost,
) -> Result<DiscretizedProblem, SchemeError> {
    bc.validate(model.dim_q())?;
    scaling.validate()?;
    let layout = Layout {
        dim_q: model.dim_q(),
        dim_u: model.dim_u(),
        n: basis.len(),
        has_v_grid: kind == SchemeKind::OdeEl,
        free_tf: scaling.is_free(),
        n_params: 0,
    };
    let weak_momentum_factor = basis.diff().transpose() * basis.metric() - basis.boundary_bilinear();
    let integral_row = basis.metric().column_sum();
    Ok(DiscretizedProblem {
        kind,
        basis,
        model,
        bc,
        scaling,
        cost,
        layout,
        param_constraints: Vec::new(),
        weak_momentum_factor,
        integral_row,
    })
}

/// Weak variational discretization.
pub fn build_pmoc(
    model: Arc<dyn LagrangianModel>,
    basis: Arc<SpectralBasis>,
    bc: BoundaryConditions,
    scaling: TimeScaling,
    cost: RunningCost,
) -> Result<DiscretizedProblem, SchemeError> {
    build(SchemeKind::Pmoc, model, basis, bc, scaling, cost)
}

/// Strong Euler-Lagrange collocation.
pub fn build_dae_el(
    model: Arc<dyn LagrangianModel>,
    basis: Arc<SpectralBasis>,
    bc: BoundaryConditions,
    scaling: TimeScaling,
    cost: RunningCost,
) -> Result<DiscretizedProblem, SchemeError> {
    build(SchemeKind::DaeEl, model, basis, bc, scaling, cost)
}

/// First-order collocation with an explicit velocity grid.
pub fn build_ode_el(
    model: Arc<dyn LagrangianModel>,
    basis: Arc<SpectralBasis>,
    bc: BoundaryConditions,
    scaling: TimeScaling,
    cost: RunningCost,
) -> Result<DiscretizedProblem, SchemeError> {
    build(SchemeKind::OdeEl, model, basis, bc, scaling, cost)
}

impl DiscretizedProblem {
    /// Promote the model's design parameters to decision variables, with
    /// the given algebraic couplings among them.
    pub fn optimize_params(mut self, constraints: Vec<ParamConstraint>) -> Self {
        self.layout.n_params = self.model.design_params().len();
        self.param_constraints = constraints;
        self
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn model(&self) -> &dyn LagrangianModel {
        self.model.as_ref()
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn scaling(&self) -> &TimeScaling {
        &self.scaling
    }

    pub fn boundary_conditions(&self) -> &BoundaryConditions {
        &self.bc
    }

    pub fn param_constraints(&self) -> &[ParamConstraint] {
        &self.param_constraints
    }

    pub fn n_decision(&self) -> usize {
        self.layout.n_decision()
    }

    /// Total residual rows: dynamics (+ kinematics), boundary, couplings.
    pub fn n_residual(&self) -> usize {
        let n = self.layout.n;
        let d = self.layout.dim_q;
        let dynamics = if self.layout.has_v_grid { 2 * d * n } else { d * n };
        let finals = self.bc.q_final.iter().filter(|t| t.is_constrained()).count()
            + self.bc.v_final.iter().filter(|t| t.is_constrained()).count();
        dynamics + 2 * d + finals + self.param_constraints.len()
    }

    /// Lower/upper decision bounds: grids unbounded, `t_f` and design
    /// parameters boxed.
    pub fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let n = self.n_decision();
        let mut lower = DVector::from_element(n, f64::NEG_INFINITY);
        let mut upper = DVector::from_element(n, f64::INFINITY);
        if let Some(idx) = self.layout.tf_index() {
            if let TimeScaling::Free {
                lower: lo,
                upper: hi,
                ..
            } = self.scaling
            {
                lower[idx] = lo;
                upper[idx] = hi;
            }
        }
        for (j, param) in self.model.design_params().iter().enumerate().take(self.layout.n_params) {
            lower[self.layout.param_index(j)] = param.lower;
            upper[self.layout.param_index(j)] = param.upper;
        }
        (lower, upper)
    }

    /// Pack trajectory grids (and optional scalars) into a decision
    /// vector. `v` is required exactly when the scheme carries a velocity
    /// grid.
    pub fn pack(
        &self,
        q: &GridFunction,
        v: Option<&GridFunction>,
        u: &GridFunction,
        t_f: f64,
        params: &[f64],
    ) -> DVector<f64> {
        let lay = &self.layout;
        let mut x = DVector::zeros(self.n_decision());
        for c in 0..lay.dim_q {
            for k in 0..lay.n {
                x[lay.q_index(c, k)] = q.values()[(c, k)];
            }
        }
        if lay.has_v_grid {
            let v = v.expect("velocity grid required for this scheme");
            for c in 0..lay.dim_q {
                for k in 0..lay.n {
                    x[lay.v_index(c, k)] = v.values()[(c, k)];
                }
            }
        }
        for c in 0..lay.dim_u {
            for k in 0..lay.n {
                x[lay.u_index(c, k)] = u.values()[(c, k)];
            }
        }
        if let Some(idx) = lay.tf_index() {
            x[idx] = t_f;
        }
        for j in 0..lay.n_params {
            x[lay.param_index(j)] = params[j];
        }
        x
    }

    fn check_dimension(&self, x: &DVector<f64>) -> Result<(), SchemeError> {
        if x.len() != self.n_decision() {
            return Err(SchemeError::DecisionDimension {
                expected: self.n_decision(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn t_f_of(&self, x: &DVector<f64>) -> f64 {
        match self.layout.tf_index() {
            Some(idx) => x[idx],
            None => self.scaling.initial(),
        }
    }

    fn params_of(&self, x: &DVector<f64>) -> Vec<f64> {
        if self.layout.n_params > 0 {
            (0..self.layout.n_params)
                .map(|j| x[self.layout.param_index(j)])
                .collect()
        } else {
            self.model
                .design_params()
                .iter()
                .map(|p| p.default)
                .collect()
        }
    }

    /// Model with the decision vector's design parameters applied (the
    /// base model when geometry is fixed).
    fn model_at<'a>(
        &'a self,
        params: &[f64],
        slot: &'a mut Option<Box<dyn LagrangianModel>>,
    ) -> Result<&'a dyn LagrangianModel, SchemeError> {
        if self.layout.n_params == 0 {
            Ok(self.model.as_ref())
        } else {
            *slot = Some(self.model.rebuild(params)?);
            Ok(slot.as_deref().expect("just stored"))
        }
    }

    /// Unpack the decision vector into grid functions (velocities are the
    /// polynomial derivative of `q` for schemes without a velocity grid).
    pub fn extract(&self, x: &DVector<f64>) -> Result<ExtractedTrajectory, SchemeError> {
        self.check_dimension(x)?;
        let lay = &self.layout;
        let t_f = self.t_f_of(x);
        let mut q = GridFunction::zeros(lay.dim_q, lay.n);
        for c in 0..lay.dim_q {
            for k in 0..lay.n {
                q.values_mut()[(c, k)] = x[lay.q_index(c, k)];
            }
        }
        let v = if lay.has_v_grid {
            let mut v = GridFunction::zeros(lay.dim_q, lay.n);
            for c in 0..lay.dim_q {
                for k in 0..lay.n {
                    v.values_mut()[(c, k)] = x[lay.v_index(c, k)];
                }
            }
            v
        } else {
            let mut v = q.derivative(&self.basis);
            *v.values_mut() *= 2.0 / t_f;
            v
        };
        let mut u = GridFunction::zeros(lay.dim_u, lay.n);
        for c in 0..lay.dim_u {
            for k in 0..lay.n {
                u.values_mut()[(c, k)] = x[lay.u_index(c, k)];
            }
        }
        Ok(ExtractedTrajectory {
            t_f,
            q,
            v,
            u,
            params: self.params_of(x),
        })
    }

    /// Node-wise `L_q + Bu` (force) and `L_v` (momentum) matrices,
    /// `dim_q × N`.
    fn node_fields(
        &self,
        model: &dyn LagrangianModel,
        traj: &ExtractedTrajectory,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let lay = &self.layout;
        let b = model.actuation();
        let mut force = DMatrix::zeros(lay.dim_q, lay.n);
        let mut momentum = DMatrix::zeros(lay.dim_q, lay.n);
        for k in 0..lay.n {
            let qk = traj.q.values().column(k).into_owned();
            let vk = traj.v.values().column(k).into_owned();
            let uk = traj.u.values().column(k).into_owned();
            let f = model.l_q(&qk, &vk) + b * uk;
            let p = model.l_v(&qk, &vk);
            force.set_column(k, &f);
            momentum.set_column(k, &p);
        }
        (force, momentum)
    }

    /// Constraint residual vector at `x`.
    pub fn residual(&self, x: &DVector<f64>) -> Result<DVector<f64>, SchemeError> {
        self.check_dimension(x)?;
        let lay = &self.layout;
        let traj = self.extract(x)?;
        let t_f = traj.t_f;
        let params = self.params_of(x);
        let mut slot = None;
        let model = self.model_at(&params, &mut slot)?;

        let mut out = DVector::zeros(self.n_residual());
        let n = lay.n;
        let d = lay.dim_q;

        match self.kind {
            SchemeKind::Pmoc => {
                let (force, momentum) = self.node_fields(model, &traj);
                for c in 0..d {
                    let f_c = force.row(c).transpose();
                    let p_c = momentum.row(c).transpose();
                    let r = self.basis.metric() * f_c * (t_f / 2.0)
                        + &self.weak_momentum_factor * p_c;
                    for k in 0..n {
                        out[c * n + k] = r[k];
                    }
                }
            }
            SchemeKind::DaeEl => {
                let (force, momentum) = self.node_fields(model, &traj);
                for c in 0..d {
                    let f_c = force.row(c).transpose();
                    let p_c = momentum.row(c).transpose();
                    let r = self.basis.diff() * p_c * (2.0 / t_f) - f_c;
                    for k in 0..n {
                        out[c * n + k] = r[k];
                    }
                }
            }
            SchemeKind::OdeEl => {
                // Kinematic rows (2/t_f)·D·q − v, then dynamic rows
                // (2/t_f)·D·v − accel.
                let dq = traj.q.derivative(&self.basis);
                let dv = traj.v.derivative(&self.basis);
                let mut accel = DMatrix::zeros(d, n);
                for k in 0..n {
                    let qk = traj.q.values().column(k).into_owned();
                    let vk = traj.v.values().column(k).into_owned();
                    let uk = traj.u.values().column(k).into_owned();
                    accel.set_column(k, &forward_dynamics(model, &qk, &vk, &uk)?);
                }
                for c in 0..d {
                    for k in 0..n {
                        out[c * n + k] =
                            dq.values()[(c, k)] * (2.0 / t_f) - traj.v.values()[(c, k)];
                        out[(d + c) * n + k] =
                            dv.values()[(c, k)] * (2.0 / t_f) - accel[(c, k)];
                    }
                }
            }
        }

        // Boundary rows: initial position, initial velocity, then any
        // constrained final components.
        let mut row = if lay.has_v_grid { 2 * d * n } else { d * n };
        let l0 = self.basis.l0();
        let lf = self.basis.lf();
        for c in 0..d {
            let q_c = traj.q.values().row(c).transpose();
            out[row] = (l0 * &q_c)[0] - self.bc.q_init[c];
            row += 1;
        }
        for c in 0..d {
            let v_c = traj.v.values().row(c).transpose();
            out[row] = (l0 * &v_c)[0] - self.bc.v_init[c];
            row += 1;
        }
        for (c, target) in self.bc.q_final.iter().enumerate() {
            let q_c = traj.q.values().row(c).transpose();
            if let Some(r) = target.residual((lf * &q_c)[0]) {
                out[row] = r;
                row += 1;
            }
        }
        for (c, target) in self.bc.v_final.iter().enumerate() {
            let v_c = traj.v.values().row(c).transpose();
            if let Some(r) = target.residual((lf * &v_c)[0]) {
                out[row] = r;
                row += 1;
            }
        }
        for constraint in &self.param_constraints {
            match constraint {
                ParamConstraint::SumEquals(value) => {
                    out[row] = params.iter().sum::<f64>() - value;
                    row += 1;
                }
            }
        }
        debug_assert_eq!(row, self.n_residual());
        Ok(out)
    }

    /// Objective `(t_f/2)·1ᵀG·l` with `l_k = l(q_k, v_k, u_k)`.
    pub fn objective(&self, x: &DVector<f64>) -> Result<f64, SchemeError> {
        self.check_dimension(x)?;
        let traj = self.extract(x)?;
        let l = DVector::from_iterator(
            self.layout.n,
            (0..self.layout.n).map(|k| {
                self.cost
                    .evaluate(&traj.u.values().column(k).into_owned())
            }),
        );
        Ok(self.integral_row.dot(&l) * traj.t_f / 2.0)
    }

    /// The momentum polynomial: nodal `L_v(q_k, v_k)` as a grid function,
    /// interpolable anywhere on the canonical interval.
    pub fn momentum_polynomial(&self, x: &DVector<f64>) -> Result<GridFunction, SchemeError> {
        self.check_dimension(x)?;
        let traj = self.extract(x)?;
        let params = self.params_of(x);
        let mut slot = None;
        let model = self.model_at(&params, &mut slot)?;
        let mut p = GridFunction::zeros(self.layout.dim_q, self.layout.n);
        for k in 0..self.layout.n {
            let qk = traj.q.values().column(k).into_owned();
            let vk = traj.v.values().column(k).into_owned();
            p.values_mut().set_column(k, &model.l_v(&qk, &vk));
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests;
