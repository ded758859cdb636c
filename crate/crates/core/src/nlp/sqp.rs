//! Dense SQP with damped BFGS, an ℓ1 merit line search, and
//! bound-respecting equality-QP subproblems.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use super::{fd, NlpError, NlpInstance};
use crate::exec::ExecMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Feasibility and stationarity tolerances both met.
    Optimal,
    /// Feasible but stalled above the stationarity tolerance.
    Feasible,
    /// Feasibility stalled above tolerance — no feasible point found.
    Infeasible,
    /// Iteration cap reached; best iterate returned.
    IterLimit,
    /// Linear algebra or evaluation failure the solver could not recover
    /// from; best iterate returned.
    NumericalFailure,
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Feasible => "feasible",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::IterLimit => "iter-limit",
            SolveStatus::NumericalFailure => "numerical-failure",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub major_iterations: usize,
    pub final_cost: f64,
    /// `max |c(x*)|`.
    pub feasibility: f64,
    /// Projected stationarity `‖∇f + Jᵀλ‖_∞` over inactive bounds.
    pub optimality: f64,
    pub x_star: DVector<f64>,
    pub wall_time: Duration,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SqpOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_major: usize,
    pub exec: ExecMode,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-6,
            opt_tol: 1e-5,
            max_major: 2000,
            exec: ExecMode::default(),
        }
    }
}

/// Feasibility-stall window: if the best feasibility improves by less than
/// a relative `STALL_REL` over `STALL_WINDOW` majors while still above
/// tolerance, the problem is declared infeasible.
const STALL_WINDOW: usize = 50;
const STALL_REL: f64 = 1e-8;
const MIN_ALPHA: f64 = 1e-10;
const ARMIJO: f64 = 0.1;
/// Fraction of the removed constraint violation the penalty must not pay
/// back in predicted objective increase (ℓ1 merit penalty update).
const MERIT_RHO: f64 = 0.5;
const BOUND_EPS: f64 = 1e-9;

struct Kkt {
    feasibility: f64,
    optimality: f64,
    /// Least-squares multiplier estimate at the iterate. Preferred over QP
    /// multipliers for the penalty target and quasi-Newton curvature: far
    /// from the solution QP multipliers are polluted by the Hessian model
    /// and can be wrong by many orders of magnitude.
    multipliers: DVector<f64>,
}

/// An infinite bound is never active.
fn bound_active(x: f64, bound: f64, toward_bound: f64) -> bool {
    bound.is_finite() && toward_bound * (bound - x) <= BOUND_EPS * (1.0 + bound.abs())
}

fn at_lower_bound(x: f64, lower: f64) -> bool {
    bound_active(x, lower, -1.0)
}

fn at_upper_bound(x: f64, upper: f64) -> bool {
    bound_active(x, upper, 1.0)
}

/// Projected stationarity: at an active lower bound only increasing moves
/// are admissible, so negative reduced gradient is the violation (and
/// symmetrically at upper bounds).
fn projected_stationarity(
    r: &DVector<f64>,
    x: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let at_lower = at_lower_bound(x[i], lower[i]);
        let at_upper = at_upper_bound(x[i], upper[i]);
        let viol = if at_lower && at_upper {
            0.0
        } else if at_lower {
            (-r[i]).max(0.0)
        } else if at_upper {
            r[i].max(0.0)
        } else {
            r[i].abs()
        };
        worst = worst.max(viol);
    }
    worst
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, e| acc.max(e.abs()))
}

/// Least-squares multipliers over columns whose bound is inactive:
/// minimize ‖g_F + J_Fᵀ λ‖₂.
fn least_squares_multipliers(
    g: &DVector<f64>,
    j: &DMatrix<f64>,
    x: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> DVector<f64> {
    let free: Vec<usize> = (0..x.len())
        .filter(|&i| !at_lower_bound(x[i], lower[i]) && !at_upper_bound(x[i], upper[i]))
        .collect();
    let m = j.nrows();
    if free.is_empty() || m == 0 {
        return DVector::zeros(m);
    }
    let jf = j.select_columns(free.iter());
    let gf = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
    let gram = &jf * jf.transpose() + DMatrix::identity(m, m) * 1e-12;
    let rhs = -(&jf * gf);
    gram
        .cholesky()
        .map(|chol| chol.solve(&rhs))
        .unwrap_or_else(|| DVector::zeros(m))
}

fn kkt_measures(
    c: &DVector<f64>,
    g: &DVector<f64>,
    j: &DMatrix<f64>,
    x: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Kkt {
    let feasibility = inf_norm(c);
    let multipliers = least_squares_multipliers(g, j, x, lower, upper);
    let r = g + j.transpose() * &multipliers;
    let optimality = projected_stationarity(&r, x, lower, upper);
    Kkt {
        feasibility,
        optimality,
        multipliers,
    }
}

/// Solve the equality-constrained QP
/// `min ½dᵀHd + gᵀd  s.t.  Jd + c = 0,  lower−x ≤ d ≤ upper−x`
/// by repeatedly solving the free-variable KKT system and pinning any
/// bound-violating coordinates to their clamp values (no release step:
/// the active set restarts fresh each major iteration).
fn solve_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    j: &DMatrix<f64>,
    c: &DVector<f64>,
    d_lower: &DVector<f64>,
    d_upper: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = g.len();
    let m = c.len();
    let mut pinned: Vec<Option<f64>> = vec![None; n];
    for _pass in 0..=n {
        let free: Vec<usize> = (0..n).filter(|&i| pinned[i].is_none()).collect();
        let nf = free.len();
        let d_pin = DVector::from_fn(n, |i, _| pinned[i].unwrap_or(0.0));

        let (d, lambda) = if nf == 0 {
            (d_pin.clone(), DVector::zeros(m))
        } else {
            let hf = h.select_columns(free.iter()).select_rows(free.iter());
            let jf = j.select_columns(free.iter());
            // Right-hand side folds the pinned coordinates in as constants.
            let g_eff = DVector::from_iterator(
                nf,
                free.iter().map(|&i| g[i] + (h.row(i) * &d_pin)[(0, 0)]),
            );
            let c_eff = c + j * &d_pin;

            let dim = nf + m;
            let mut kkt = DMatrix::zeros(dim, dim);
            kkt.view_mut((0, 0), (nf, nf)).copy_from(&hf);
            kkt.view_mut((0, nf), (nf, m)).copy_from(&jf.transpose());
            kkt.view_mut((nf, 0), (m, nf)).copy_from(&jf);
            let mut rhs = DVector::zeros(dim);
            for row in 0..nf {
                rhs[row] = -g_eff[row];
            }
            for r in 0..m {
                rhs[nf + r] = -c_eff[r];
            }

            let solution = solve_checked(&kkt, &rhs)?;
            let mut d = d_pin.clone();
            for (row, &i) in free.iter().enumerate() {
                d[i] = solution[row];
            }
            let lambda = DVector::from_iterator(m, (0..m).map(|r| solution[nf + r]));
            (d, lambda)
        };

        // Pin any coordinate whose step escapes its box.
        let mut newly_pinned = false;
        for i in 0..n {
            if pinned[i].is_none() {
                if d[i] < d_lower[i] - 1e-12 {
                    pinned[i] = Some(d_lower[i]);
                    newly_pinned = true;
                } else if d[i] > d_upper[i] + 1e-12 {
                    pinned[i] = Some(d_upper[i]);
                    newly_pinned = true;
                }
            }
        }
        if !newly_pinned {
            return Some((d, lambda));
        }
    }
    None
}

/// Second-order-correction trial point: minimum-norm Newton step on the
/// constraints, `x + d − Jᵀ(JJᵀ)⁻¹ c(x+d)`, projected into the bounds and
/// evaluated. Returns the point with its objective and constraint values.
fn corrected_trial(
    instance: &NlpInstance,
    x: &DVector<f64>,
    d: &DVector<f64>,
    j: &DMatrix<f64>,
    c_trial: &DVector<f64>,
) -> Option<(DVector<f64>, f64, DVector<f64>)> {
    let m = c_trial.len();
    if m == 0 {
        return None;
    }
    let mut jjt = j * j.transpose();
    let ridge = 1e-12 * (1.0 + jjt.diagonal().abs().max());
    for i in 0..m {
        jjt[(i, i)] += ridge;
    }
    let y = solve_checked(&jjt, c_trial)?;
    let correction = -(j.transpose() * y);
    let mut trial = x + d + correction;
    for i in 0..trial.len() {
        trial[i] = trial[i].clamp(instance.lower()[i], instance.upper()[i]);
    }
    let f = instance.eval_objective(&trial).ok()?;
    let c = instance.eval_constraints(&trial).ok()?;
    Some((trial, f, c))
}

/// LU solve with an explicit residual check so near-singular systems are
/// reported as failures instead of returning garbage.
fn solve_checked(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.clone().lu();
    let x = lu.solve(b)?;
    let residual = (a * &x - b).abs().max();
    let scale = 1.0 + b.abs().max() + x.abs().max() * a.abs().max();
    if residual.is_finite() && residual <= 1e-7 * scale {
        Some(x)
    } else {
        None
    }
}

struct Evaluated {
    f: f64,
    c: DVector<f64>,
    g: DVector<f64>,
    j: DMatrix<f64>,
}

fn evaluate(
    instance: &NlpInstance,
    x: &DVector<f64>,
    exec: ExecMode,
) -> Result<Evaluated, NlpError> {
    Ok(Evaluated {
        f: instance.eval_objective(x)?,
        c: instance.eval_constraints(x)?,
        g: fd::solver_gradient(instance, x, exec)?,
        j: fd::jacobian(instance, x, exec)?,
    })
}

/// Solve the instance from its stored initial point.
pub fn solve_sqp(instance: &NlpInstance, options: &SqpOptions) -> SolveReport {
    let start = Instant::now();
    let n = instance.n();
    let mut messages = Vec::new();

    let mut x = instance.x0().clone();
    let mut eval = match evaluate(instance, &x, options.exec) {
        Ok(e) => e,
        Err(err) => {
            return SolveReport {
                status: SolveStatus::NumericalFailure,
                major_iterations: 0,
                final_cost: f64::NAN,
                feasibility: f64::NAN,
                optimality: f64::NAN,
                x_star: x,
                wall_time: start.elapsed(),
                messages: vec![format!("initial evaluation failed: {err}")],
            }
        }
    };

    let mut hessian = DMatrix::<f64>::identity(n, n);
    // Rescale the quasi-Newton matrix to the measured Lagrangian curvature
    // at the first update after any identity (re)initialization.
    let mut hessian_unscaled = true;
    let mut mu: f64 = 1.0;
    let mut majors = 0;
    let mut stall_anchor = f64::INFINITY;
    let mut cost_anchor = f64::INFINITY;
    let mut stall_count = 0usize;
    let mut consecutive_ls_failures = 0usize;

    let finish = |status: SolveStatus,
                  majors: usize,
                  eval: &Evaluated,
                  kkt: &Kkt,
                  x: DVector<f64>,
                  messages: Vec<String>| SolveReport {
        status,
        major_iterations: majors,
        final_cost: eval.f,
        feasibility: kkt.feasibility,
        optimality: kkt.optimality,
        x_star: x,
        wall_time: start.elapsed(),
        messages,
    };

    loop {
        let kkt = kkt_measures(
            &eval.c,
            &eval.g,
            &eval.j,
            &x,
            instance.lower(),
            instance.upper(),
        );

        if kkt.feasibility <= options.feas_tol && kkt.optimality <= options.opt_tol {
            return finish(SolveStatus::Optimal, majors, &eval, &kkt, x, messages);
        }

        // Stall bookkeeping: infeasibility is declared only when neither
        // the best feasibility nor the best objective improves over a
        // sliding window. Feasibility alone may legitimately rise for many
        // majors while the iterate trades constraint violation for cost.
        if kkt.feasibility > options.feas_tol {
            let feas_improved = kkt.feasibility < stall_anchor * (1.0 - STALL_REL);
            let cost_improved = eval.f < cost_anchor - STALL_REL * (1.0 + cost_anchor.abs());
            if feas_improved {
                stall_anchor = kkt.feasibility;
            }
            if cost_improved {
                cost_anchor = eval.f;
            }
            if feas_improved || cost_improved {
                stall_count = 0;
            } else {
                stall_count += 1;
                if stall_count >= STALL_WINDOW {
                    messages.push(format!(
                        "no feasibility or cost progress above feasibility {:.3e} for {} majors",
                        kkt.feasibility, STALL_WINDOW
                    ));
                    return finish(SolveStatus::Infeasible, majors, &eval, &kkt, x, messages);
                }
            }
        } else {
            stall_anchor = kkt.feasibility;
            cost_anchor = eval.f;
            stall_count = 0;
        }

        if majors >= options.max_major {
            let status = if kkt.feasibility <= options.feas_tol {
                SolveStatus::Feasible
            } else {
                SolveStatus::IterLimit
            };
            return finish(status, majors, &eval, &kkt, x, messages);
        }
        majors += 1;

        // QP subproblem with Levenberg-style recovery on singularity.
        let d_lower = instance.lower() - &x;
        let d_upper = instance.upper() - &x;
        let mut qp = solve_qp(&hessian, &eval.g, &eval.j, &eval.c, &d_lower, &d_upper);
        if qp.is_none() {
            let mut tau = 1e-8;
            while qp.is_none() && tau <= 1e-2 {
                let regularized = &hessian + DMatrix::identity(n, n) * tau;
                qp = solve_qp(&regularized, &eval.g, &eval.j, &eval.c, &d_lower, &d_upper);
                tau *= 100.0;
            }
        }
        let Some((d, lambda)) = qp else {
            messages.push("QP subproblem singular beyond regularization".to_string());
            return finish(SolveStatus::NumericalFailure, majors, &eval, &kkt, x, messages);
        };

        let step_norm = d.abs().max();
        if step_norm <= 1e-12 * (1.0 + x.abs().max()) {
            let status = if kkt.feasibility <= options.feas_tol {
                SolveStatus::Feasible
            } else {
                SolveStatus::Infeasible
            };
            messages.push("search direction collapsed".to_string());
            return finish(status, majors, &eval, &kkt, x, messages);
        }

        // ℓ1 merit line search. The penalty is chosen so the QP step is a
        // guaranteed descent direction for the merit model: μ must cover
        // the predicted objective change relative to the violation the
        // step removes. Chasing multiplier estimates instead is fragile —
        // QP multipliers explode at bad iterates and least-squares ones
        // undershoot — so the penalty follows the step model in both
        // directions, decaying once far above what any recent step needs.
        // The penalty must be large enough that removing the current
        // violation is worth more than the objective increase the step's
        // quadratic model predicts; otherwise the step shows no merit
        // descent even when it is exactly the right move (near a solution
        // the restoration price is roughly lambda . c, which dwarfs a
        // violation already at round-off scale). Applying the model bound
        // at every iterate keeps the guarantee; the relief branch decays
        // an over-provisioned penalty so the violation term cannot drown
        // the small genuine objective decreases of the tail iterations.
        let c_l1: f64 = eval.c.iter().map(|v| v.abs()).sum();
        let dhd = d.dot(&(&hessian * &d));
        let gd = eval.g.dot(&d);
        let model = gd + 0.5 * dhd.max(0.0);
        let mu_needed = if c_l1 > f64::EPSILON {
            (model / ((1.0 - MERIT_RHO) * c_l1)).max(1.0)
        } else {
            1.0
        };
        if mu < mu_needed {
            mu = 1.1 * mu_needed;
        } else if mu_needed < 0.25 * mu {
            mu = (0.25 * mu).max(mu_needed);
        }
        let merit0 = eval.f + mu * c_l1;
        let descent = gd - mu * c_l1;
        // The objective-only branch below may only fire when the iterate is
        // already feasible to tolerance, so it can never trade away more
        // feasibility than the convergence test forgives.
        let in_band = kkt.feasibility <= options.feas_tol;

        let mut alpha = 1.0;
        let mut accepted = None;
        let mut band_accept = false;
        while alpha >= MIN_ALPHA {
            let trial = &x + &d * alpha;
            let trial_eval = instance
                .eval_objective(&trial)
                .and_then(|f| instance.eval_constraints(&trial).map(|c| (f, c)));
            if let Ok((f_t, c_t)) = trial_eval {
                let merit_t = f_t + mu * c_t.iter().map(|v| v.abs()).sum::<f64>();
                if std::env::var_os("PMOC_SQP_TRACE_LS").is_some() {
                    eprintln!(
                        "  ls alpha {alpha:.3e}: merit_t - merit0 = {:.6e} vs {:.6e} (f_t-f {:.3e}, c_t {:.3e})",
                        merit_t - merit0,
                        ARMIJO * alpha * descent.min(0.0),
                        f_t - eval.f,
                        c_t.iter().map(|v| v.abs()).sum::<f64>()
                    );
                }
                if merit_t.is_finite() && merit_t <= merit0 + ARMIJO * alpha * descent.min(0.0) {
                    accepted = Some((trial, f_t, c_t));
                    break;
                }
                // Near a solution the violation sits at round-off scale and
                // the penalty sized for it can reject steps whose genuine
                // objective decrease outweighs an irrelevant feasibility
                // drift. If current and trial points both sit inside the
                // feasibility tolerance, let the objective alone decide.
                if in_band
                    && gd < 0.0
                    && f_t.is_finite()
                    && inf_norm(&c_t) <= options.feas_tol
                    && f_t <= eval.f + ARMIJO * alpha * gd
                {
                    accepted = Some((trial, f_t, c_t));
                    band_accept = true;
                    break;
                }
                // Second-order correction: the full step often fails the
                // merit test only because the constraint violation grows
                // quadratically along d. Retry once with a least-squares
                // step that cancels the violation observed at the trial
                // point before conceding and shrinking α.
                if alpha == 1.0 {
                    if let Some((x_c, f_c, c_c)) =
                        corrected_trial(instance, &x, &d, &eval.j, &c_t)
                    {
                        let merit_c = f_c + mu * c_c.iter().map(|v| v.abs()).sum::<f64>();
                        if merit_c.is_finite()
                            && merit_c <= merit0 + ARMIJO * descent.min(0.0)
                        {
                            accepted = Some((x_c, f_c, c_c));
                            break;
                        }
                    }
                }
            }
            alpha *= 0.5;
        }
        if std::env::var_os("PMOC_SQP_TRACE").is_some() {
            eprintln!(
                "major {majors}: feas {:.3e} opt {:.3e} f {:.8e} mu {:.1e} |lam_qp| {:.1e} |lam_ls| {:.1e} |d| {:.2e} alpha {:.1e} accepted {}",
                kkt.feasibility,
                kkt.optimality,
                eval.f,
                mu,
                inf_norm(&lambda),
                inf_norm(&kkt.multipliers),
                d.abs().max(),
                alpha,
                accepted.is_some()
            );
        }

        match accepted {
            Some((x_new, f_new, c_new)) => {
                debug_assert!(
                    band_accept
                        || f_new + mu * c_new.iter().map(|v| v.abs()).sum::<f64>()
                            <= merit0 + 1e-10 * (1.0 + merit0.abs()),
                    "accepted step increased the merit function"
                );
                consecutive_ls_failures = 0;
                let g_new = match fd::solver_gradient(instance, &x_new, options.exec) {
                    Ok(g) => g,
                    Err(err) => {
                        messages.push(format!("gradient evaluation failed: {err}"));
                        return finish(
                            SolveStatus::NumericalFailure,
                            majors,
                            &eval,
                            &kkt,
                            x,
                            messages,
                        );
                    }
                };
                let j_new = match fd::jacobian(instance, &x_new, options.exec) {
                    Ok(j) => j,
                    Err(err) => {
                        messages.push(format!("jacobian evaluation failed: {err}"));
                        return finish(
                            SolveStatus::NumericalFailure,
                            majors,
                            &eval,
                            &kkt,
                            x,
                            messages,
                        );
                    }
                };

                // Damped BFGS on the Lagrangian gradient, differenced at a
                // fixed multiplier (the least-squares estimate at the new
                // point, which stays bounded where QP multipliers blow up).
                let s = &x_new - &x;
                let lambda_hat = least_squares_multipliers(
                    &g_new,
                    &j_new,
                    &x_new,
                    instance.lower(),
                    instance.upper(),
                );
                let grad_l_new = &g_new + j_new.transpose() * &lambda_hat;
                let grad_l_old = &eval.g + eval.j.transpose() * &lambda_hat;
                let mut y = grad_l_new - grad_l_old;
                if hessian_unscaled {
                    // An identity model wildly misjudges step lengths when
                    // the true curvature scale is far from one; adopt the
                    // scale observed along the first accepted step.
                    let s_y_raw = s.dot(&y);
                    if s_y_raw > 1e-14 {
                        let gamma = (y.dot(&y) / s_y_raw).clamp(1e-2, 1e6);
                        hessian *= gamma;
                        hessian_unscaled = false;
                    }
                }
                let hs = &hessian * &s;
                let s_hs = s.dot(&hs);
                let mut s_y = s.dot(&y);
                if s_hs > 1e-14 {
                    if s_y < 0.2 * s_hs {
                        let theta = 0.8 * s_hs / (s_hs - s_y);
                        y = y * theta + &hs * (1.0 - theta);
                        s_y = s.dot(&y);
                    }
                    if s_y > 1e-14 {
                        hessian -= (&hs * hs.transpose()) / s_hs;
                        hessian += (&y * y.transpose()) / s_y;
                    }
                }

                x = x_new;
                eval = Evaluated {
                    f: f_new,
                    c: c_new,
                    g: g_new,
                    j: j_new,
                };
            }
            None => {
                consecutive_ls_failures += 1;
                if consecutive_ls_failures == 1 {
                    // Curvature may be stale; restart the model.
                    hessian = DMatrix::identity(n, n);
                    hessian_unscaled = true;
                    messages.push(format!(
                        "line search failed at major {majors}; Hessian reset"
                    ));
                    continue;
                }
                let status = if kkt.feasibility <= options.feas_tol {
                    SolveStatus::Feasible
                } else {
                    SolveStatus::Infeasible
                };
                messages.push("line search failed twice in a row".to_string());
                return finish(status, majors, &eval, &kkt, x, messages);
            }
        }
    }
}
