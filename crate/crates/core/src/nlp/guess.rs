//! Initial-guess generation and NLP assembly from a discretized problem.

use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NlpError, NlpInstance};
use crate::mechsys::{reference_simulate, simulate_generalized};
use crate::polybasis::GridFunction;
use crate::scheme::DiscretizedProblem;

/// Strategy for producing the initial decision vector.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuessSpec {
    /// Swing excitation `u(t) = amplitude · sin(frequency · t + phase)`
    /// on every actuated channel, rolled out by forward simulation.
    SinusoidalTorque {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// Constant generalized torque on the first joint plus a proportional
    /// controller `−kp·q_i` holding the remaining joints near zero; the
    /// control guess is the actuated component of that force law.
    ConstantTorquePlusPd { torque: f64, kp: f64 },
    /// An explicit decision vector, used verbatim.
    Custom { x0: DVector<f64> },
}

impl InitialGuessSpec {
    /// Deterministic multistart variant: seed 0 is the unperturbed guess;
    /// other seeds jitter amplitudes, frequencies, and phases.
    pub fn perturbed(&self, seed: u64) -> Self {
        if seed == 0 {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            InitialGuessSpec::SinusoidalTorque {
                amplitude,
                frequency,
                phase,
            } => InitialGuessSpec::SinusoidalTorque {
                amplitude: amplitude * (1.0 + 0.5 * rng.gen_range(-1.0..1.0)),
                frequency: frequency * (1.0 + 0.5 * rng.gen_range(-1.0..1.0)),
                phase: phase + std::f64::consts::PI * rng.gen_range(-1.0..1.0),
            },
            InitialGuessSpec::ConstantTorquePlusPd { torque, kp } => {
                InitialGuessSpec::ConstantTorquePlusPd {
                    torque: torque * (1.0 + 0.6 * rng.gen_range(-1.0..1.0)),
                    kp: kp * (1.0 + 0.3 * rng.gen_range(-1.0..1.0)),
                }
            }
            InitialGuessSpec::Custom { x0 } => InitialGuessSpec::Custom { x0: x0.clone() },
        }
    }
}

/// Hermite blend pinning value and slope at the left endpoint while
/// leaving the right endpoint untouched: `phi1(-1) = 1`, `phi2'(-1) = 1`
/// (in canonical time), all other endpoint data zero.
fn left_value_blend(s: f64) -> f64 {
    let xi = (s + 1.0) / 2.0;
    (1.0 - xi) * (1.0 - xi) * (1.0 + 2.0 * xi)
}

fn left_slope_blend(s: f64) -> f64 {
    let xi = (s + 1.0) / 2.0;
    2.0 * xi * (1.0 - xi) * (1.0 - xi)
}

/// Nudge the sampled configuration grid so its interpolant meets the
/// initial position and velocity exactly (interior-node sampling alone
/// only meets them to interpolation error).
fn pin_initial_state(
    problem: &DiscretizedProblem,
    q: &mut GridFunction,
    t_f: f64,
) {
    let basis = problem.basis();
    let bc = problem.boundary_conditions();
    let n = basis.len();
    if n < 4 {
        // The cubic blends are not representable; leave the samples as
        // they are (only used by toy fixtures).
        return;
    }
    let l0 = basis.l0();
    let d = basis.diff();
    for c in 0..problem.layout().dim_q {
        let q_c = q.values().row(c).transpose();
        let value_defect = bc.q_init[c] - (l0 * &q_c)[0];
        // Slope in canonical time: dq/ds = (t_f/2)·v.
        let slope_defect = (t_f / 2.0) * bc.v_init[c] - (l0 * (d * &q_c))[0];
        for k in 0..n {
            let s = basis.nodes()[k];
            q.values_mut()[(c, k)] +=
                value_defect * left_value_blend(s) + slope_defect * left_slope_blend(s);
        }
    }
}

/// Roll out the guess strategy and flatten the problem into an
/// [`NlpInstance`] whose callbacks evaluate the scheme residual and
/// objective.
pub fn assemble(
    problem: &Arc<DiscretizedProblem>,
    guess: &InitialGuessSpec,
) -> Result<NlpInstance, NlpError> {
    let layout = problem.layout().clone();
    let t_f = problem.scaling().initial();
    let params: Vec<f64> = problem
        .model()
        .design_params()
        .iter()
        .map(|p| p.default)
        .collect();

    let x0 = match guess {
        InitialGuessSpec::Custom { x0 } => {
            if x0.len() != problem.n_decision() {
                return Err(NlpError::Dimension {
                    expected: problem.n_decision(),
                    got: x0.len(),
                });
            }
            x0.clone()
        }
        _ => {
            let basis = problem.basis();
            let bc = problem.boundary_conditions();
            let times: Vec<f64> = basis
                .nodes()
                .iter()
                .map(|s| (t_f / 2.0) * (s + 1.0))
                .collect();
            let model = problem.model();

            let (samples, u_of) = match guess {
                InitialGuessSpec::SinusoidalTorque {
                    amplitude,
                    frequency,
                    phase,
                } => {
                    let (a, w, p) = (*amplitude, *frequency, *phase);
                    let dim_u = layout.dim_u;
                    let samples = reference_simulate(
                        model,
                        &bc.q_init,
                        &bc.v_init,
                        move |t| DVector::from_element(dim_u, a * (w * t + p).sin()),
                        t_f,
                        &times,
                        1e-8,
                    )
                    .map_err(|e| NlpError::GuessSimulation {
                        message: e.to_string(),
                    })?;
                    let u_of = move |t: f64, _q: &DVector<f64>| {
                        DVector::from_element(dim_u, a * (w * t + p).sin())
                    };
                    (samples, Box::new(u_of) as Box<dyn Fn(f64, &DVector<f64>) -> DVector<f64>>)
                }
                InitialGuessSpec::ConstantTorquePlusPd { torque, kp } => {
                    let (tau, kp) = (*torque, *kp);
                    let dim_q = layout.dim_q;
                    let force_law = move |q: &DVector<f64>| {
                        DVector::from_fn(dim_q, |i, _| {
                            if i == 0 {
                                tau
                            } else {
                                -kp * q[i]
                            }
                        })
                    };
                    let samples = simulate_generalized(
                        model,
                        &bc.q_init,
                        &bc.v_init,
                        |_, q, _| force_law(q),
                        t_f,
                        &times,
                        1e-8,
                    )
                    .map_err(|e| NlpError::GuessSimulation {
                        message: e.to_string(),
                    })?;
                    let b_t = model.actuation().transpose();
                    let u_of =
                        move |_t: f64, q: &DVector<f64>| &b_t * force_law(q);
                    (samples, Box::new(u_of) as Box<dyn Fn(f64, &DVector<f64>) -> DVector<f64>>)
                }
                InitialGuessSpec::Custom { .. } => unreachable!(),
            };

            let n = basis.len();
            let mut q = GridFunction::zeros(layout.dim_q, n);
            let mut u = GridFunction::zeros(layout.dim_u, n);
            for k in 0..n {
                q.values_mut().set_column(k, &samples.q[k]);
                u.values_mut()
                    .set_column(k, &u_of(times[k], &samples.q[k]));
            }
            pin_initial_state(problem, &mut q, t_f);
            let v = layout.has_v_grid.then(|| {
                let mut v = q.derivative(basis);
                *v.values_mut() *= 2.0 / t_f;
                v
            });
            problem.pack(&q, v.as_ref(), &u, t_f, &params)
        }
    };

    let residual_problem = Arc::clone(problem);
    let objective_problem = Arc::clone(problem);
    let (lower, upper) = problem.bounds();
    NlpInstance::new(
        Arc::new(move |x: &DVector<f64>| {
            objective_problem.objective(x).map_err(|e| NlpError::Eval {
                message: e.to_string(),
            })
        }),
        Arc::new(move |x: &DVector<f64>| {
            residual_problem.residual(x).map_err(|e| NlpError::Eval {
                message: e.to_string(),
            })
        }),
        lower,
        upper,
        x0,
    )
}
