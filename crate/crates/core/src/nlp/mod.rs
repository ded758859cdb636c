//! Dense equality-constrained nonlinear programming: problem assembly
//! from a discretized scheme, finite-difference derivatives, an embedded
//! SQP solver, multistart, independent KKT verification, and an offline
//! problem dump.

pub mod dump;
pub mod fd;
pub mod guess;
pub mod multistart;
pub mod sqp;
pub mod verify;

pub use dump::dump_instance;
pub use fd::{central_gradient, central_jacobian, gradient, jacobian, solver_gradient};
pub use guess::{assemble, InitialGuessSpec};
pub use multistart::{multistart, MultistartReport, StartSummary};
pub use sqp::{solve_sqp, SolveReport, SolveStatus, SqpOptions};
pub use verify::{verify_kkt, KktCertificate};

use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NlpError {
    #[error("evaluation failed: {message}")]
    Eval { message: String },
    #[error("initial-guess simulation failed: {message}")]
    GuessSimulation { message: String },
    #[error("decision vector has length {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
}

type Objective = dyn Fn(&DVector<f64>) -> Result<f64, NlpError> + Send + Sync;
type Constraints = dyn Fn(&DVector<f64>) -> Result<DVector<f64>, NlpError> + Send + Sync;

/// A dense equality-constrained NLP with simple variable bounds:
/// `min f(x)  s.t.  c(x) = 0,  lower ≤ x ≤ upper`.
///
/// Evaluators are pure and shared; concurrent evaluation at distinct
/// points is safe.
#[derive(Clone)]
pub struct NlpInstance {
    n: usize,
    m: usize,
    objective: Arc<Objective>,
    constraints: Arc<Constraints>,
    lower: DVector<f64>,
    upper: DVector<f64>,
    x0: DVector<f64>,
}

impl NlpInstance {
    /// Build an instance from closures; `x0` is clamped into the bounds.
    pub fn new(
        objective: Arc<Objective>,
        constraints: Arc<Constraints>,
        lower: DVector<f64>,
        upper: DVector<f64>,
        x0: DVector<f64>,
    ) -> Result<Self, NlpError> {
        let n = x0.len();
        if lower.len() != n || upper.len() != n {
            return Err(NlpError::Dimension {
                expected: n,
                got: lower.len().min(upper.len()),
            });
        }
        let mut x0 = x0;
        for i in 0..n {
            x0[i] = x0[i].clamp(lower[i], upper[i]);
        }
        let m = constraints(&x0)?.len();
        objective(&x0)?;
        Ok(Self {
            n,
            m,
            objective,
            constraints,
            lower,
            upper,
            x0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    /// Replace the initial point (clamped into bounds).
    pub fn with_x0(mut self, x0: DVector<f64>) -> Result<Self, NlpError> {
        if x0.len() != self.n {
            return Err(NlpError::Dimension {
                expected: self.n,
                got: x0.len(),
            });
        }
        let mut x0 = x0;
        for i in 0..self.n {
            x0[i] = x0[i].clamp(self.lower[i], self.upper[i]);
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn eval_objective(&self, x: &DVector<f64>) -> Result<f64, NlpError> {
        (self.objective)(x)
    }

    pub fn eval_constraints(&self, x: &DVector<f64>) -> Result<DVector<f64>, NlpError> {
        (self.constraints)(x)
    }
}

impl std::fmt::Debug for NlpInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NlpInstance")
            .field("n", &self.n)
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}
