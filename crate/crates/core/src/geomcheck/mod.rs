//! Geometric verification suite: discrete flow maps under fixed control,
//! symplectic-defect probes of the endpoint map, cyclic-momentum drift, and
//! residual convergence studies against a high-accuracy ODE oracle.

use std::io::{self, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::exec::{map_indexed, ExecMode};
use crate::mechsys::{simulate_generalized, LagrangianModel, ModelError};
use crate::polybasis::{BasisError, FamilyKind, GridFunction, SpectralBasis};
use crate::scheme::{
    build_dae_el, build_ode_el, build_pmoc, BoundaryConditions, DiscretizedProblem, RunningCost,
    SchemeError, SchemeKind, TimeScaling,
};


/// Failure modes of the verification suite.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeomError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("boundary-value root finding diverged (residual {residual:.3e})")]
    RootFindingDiverged { residual: f64 },
    #[error("boundary-value Jacobian is singular at the probed state")]
    SingularJacobian,
    #[error(
        "coordinate {index} is not cyclic and unactuated here \
         (generalized-force component reaches {magnitude:.3e})"
    )]
    NotCyclic { index: usize, magnitude: f64 },
}

/// Everything needed to evaluate the discrete flow map `(q0, p0) → (q_f,
/// p_f)` of the weak scheme under a fixed control grid: model, basis,
/// control, horizon, and probe settings.
pub struct FlowMapProbe {
    model: Arc<dyn LagrangianModel>,
    basis: Arc<SpectralBasis>,
    u: GridFunction,
    t_f: f64,
    solver_tol: f64,
    epsilon: f64,
    broken: bool,
    exec: ExecMode,
}

impl FlowMapProbe {
    pub fn new(
        model: Arc<dyn LagrangianModel>,
        basis: Arc<SpectralBasis>,
        u: GridFunction,
        t_f: f64,
    ) -> Self {
        FlowMapProbe {
            model,
            basis,
            u,
            t_f,
            solver_tol: 1e-10,
            epsilon: 1e-5,
            broken: false,
            exec: ExecMode::default(),
        }
    }

    /// Convenience constructor for the unforced flow (`u ≡ 0`).
    pub fn unforced(
        model: Arc<dyn LagrangianModel>,
        basis: Arc<SpectralBasis>,
        t_f: f64,
    ) -> Self {
        let u = GridFunction::zeros(model.dim_u(), basis.len());
        Self::new(model, basis, u, t_f)
    }

    /// Finite-difference step for the endpoint-map Jacobian (scaled by the
    /// magnitude of the perturbed component).
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_solver_tol(mut self, tol: f64) -> Self {
        self.solver_tol = tol;
        self
    }

    pub fn with_exec(mut self, exec: ExecMode) -> Self {
        self.exec = exec;
        self
    }

    /// Negative control: replace the differentiation matrix by its
    /// transpose throughout the discretization. Momenta are still read out
    /// through the true derivative — the physical momentum is `𝓛_v(q, q̇)`
    /// no matter what the scheme collocates — and in those coordinates the
    /// transposed scheme's endpoint map fails to preserve the canonical
    /// form, which is exactly what the probe must detect. (Reading momenta
    /// through the transposed operator as well would restore the
    /// summation-by-parts identity, `G·Dᵀ + D·G` being the same boundary
    /// form, and with it near-symplecticity.)
    pub fn with_broken_derivative(mut self) -> Self {
        self.broken = true;
        self
    }
}

/// Endpoint-map Jacobian together with its deviation from symplecticity.
#[derive(Debug, Clone)]
pub struct SymplecticDefect {
    /// `∂(q_f, p_f)/∂(q_0, p_0)`, `2d × 2d`, by central differences.
    pub jacobian: DMatrix<f64>,
    /// `‖JᵀΩJ − Ω‖_∞` against the canonical symplectic form.
    pub defect: f64,
}

const MAX_NEWTON_ITERS: usize = 80;
const FD_STEP: f64 = 1e-7;

/// The square boundary-value system behind the flow map: per channel,
/// `N − 2` weak rows against endpoint-vanishing test polynomials, one
/// initial-position row, and one initial-momentum row.
struct FlowSystem<'a> {
    probe: &'a FlowMapProbe,
    d: usize,
    n: usize,
    /// Orthonormal node samples of polynomials vanishing at both
    /// endpoints of the canonical interval (`N × (N−2)`).
    vanishing: DMatrix<f64>,
    /// Transposed weak momentum factor, applied from the right on
    /// row-major grids.
    factor_t: DMatrix<f64>,
    /// Differentiation used inside the scheme rows, transposed for
    /// row-major application.
    interior_deriv_t: DMatrix<f64>,
    /// Differentiation behind the momentum readout (initial-momentum row
    /// and the reported `p_f`), transposed for row-major application.
    readout_deriv_t: DMatrix<f64>,
    q0: DVector<f64>,
    p0: DVector<f64>,
}

impl<'a> FlowSystem<'a> {
    fn new(probe: &'a FlowMapProbe, q0: DVector<f64>, p0: DVector<f64>) -> Self {
        let blend = if probe.broken { 1.0 } else { 0.0 };
        Self::with_blend(probe, q0, p0, blend)
    }

    /// `blend = 0` is the true scheme; `blend = 1` replaces the
    /// differentiation matrix by its transpose throughout the
    /// discretization (velocities and weak conjugate factor alike), while
    /// the momentum readout keeps the physical derivative. Intermediate
    /// values only serve as continuation stepping stones toward the broken
    /// scheme's root.
    fn with_blend(probe: &'a FlowMapProbe, q0: DVector<f64>, p0: DVector<f64>, blend: f64) -> Self {
        let basis = probe.basis.as_ref();
        let n = basis.len();
        let diff = basis.diff();
        let interior = diff * (1.0 - blend) + diff.transpose() * blend;
        let factor = interior.transpose() * basis.metric() - basis.boundary_bilinear();
        FlowSystem {
            probe,
            d: probe.model.dim_q(),
            n,
            vanishing: vanishing_basis(basis.nodes()),
            factor_t: factor.transpose(),
            interior_deriv_t: interior.transpose(),
            readout_deriv_t: diff.transpose(),
            q0,
            p0,
        }
    }

    /// Nodal momentum grid under the readout derivative.
    fn momentum_grid(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        let model = self.probe.model.as_ref();
        let v = q * &self.readout_deriv_t * (2.0 / self.probe.t_f);
        let mut lam = DMatrix::zeros(self.d, self.n);
        for k in 0..self.n {
            let qk = q.column(k).into_owned();
            let vk = v.column(k).into_owned();
            lam.set_column(k, &model.l_v(&qk, &vk));
        }
        lam
    }

    fn residual(&self, q: &DMatrix<f64>) -> DVector<f64> {
        let probe = self.probe;
        let model = probe.model.as_ref();
        let basis = probe.basis.as_ref();
        let (d, n) = (self.d, self.n);
        let b = model.actuation();

        let v = q * &self.interior_deriv_t * (2.0 / probe.t_f);
        let mut force = DMatrix::zeros(d, n);
        let mut lam = DMatrix::zeros(d, n);
        for k in 0..n {
            let qk = q.column(k).into_owned();
            let vk = v.column(k).into_owned();
            let uk = probe.u.values().column(k).into_owned();
            force.set_column(k, &(model.l_q(&qk, &vk) + b * uk));
            lam.set_column(k, &model.l_v(&qk, &vk));
        }

        // Row-major weak rows: R_c = (t_f/2)·G·F_c + (DᵀG − E)·Λ_c.
        let weak_full = &force * basis.metric() * (probe.t_f / 2.0) + &lam * &self.factor_t;
        let weak = &weak_full * &self.vanishing;
        let q_start = q * basis.l0().transpose();
        let p_start = self.momentum_grid(q) * basis.l0().transpose();

        let interior = n - 2;
        let mut out = DVector::zeros(d * n);
        for c in 0..d {
            for j in 0..interior {
                out[c * interior + j] = weak[(c, j)];
            }
            out[d * interior + c] = q_start[(c, 0)] - self.q0[c];
            out[d * interior + d + c] = p_start[(c, 0)] - self.p0[c];
        }
        out
    }

    fn jacobian(&self, q: &DMatrix<f64>, r0: &DVector<f64>) -> DMatrix<f64> {
        let dn = self.d * self.n;
        let cols = map_indexed(self.probe.exec, dn, |j| {
            let (c, k) = (j / self.n, j % self.n);
            let h = FD_STEP * (1.0 + q[(c, k)].abs());
            let mut shifted = q.clone();
            shifted[(c, k)] += h;
            (self.residual(&shifted) - r0) / h
        });
        DMatrix::from_columns(&cols)
    }

    /// Damped Newton iteration on the square system from a warm start.
    /// After reaching tolerance, a couple of full polish steps push the
    /// residual to its floor so that endpoint noise stays far below any
    /// finite-difference probe built on top of the flow.
    fn solve(&self, warm: DMatrix<f64>) -> Result<DMatrix<f64>, GeomError> {
        let tol = self.probe.solver_tol;
        let mut q = warm;
        let mut r = self.residual(&q);
        let mut polished = 0;
        for _ in 0..MAX_NEWTON_ITERS {
            let norm = r.amax();
            let at_tol = norm <= tol;
            if at_tol && polished >= 2 {
                return Ok(q);
            }
            let lu = self.jacobian(&q, &r).lu();
            let delta = match lu.solve(&(-&r)) {
                Some(delta) => delta,
                None if at_tol => return Ok(q),
                None => return Err(GeomError::SingularJacobian),
            };
            let step = DMatrix::from_fn(self.d, self.n, |c, k| delta[c * self.n + k]);

            if at_tol {
                polished += 1;
                let trial = &q + &step;
                let r_trial = self.residual(&trial);
                if r_trial.amax() < norm {
                    q = trial;
                    r = r_trial;
                } else {
                    return Ok(q);
                }
                continue;
            }

            let mut alpha = 1.0;
            loop {
                let trial = &q + &step * alpha;
                let r_trial = self.residual(&trial);
                let trial_norm = r_trial.amax();
                if trial_norm <= tol || trial_norm < norm * (1.0 - 1e-4 * alpha) {
                    q = trial;
                    r = r_trial;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-6 {
                    return Err(GeomError::RootFindingDiverged { residual: norm });
                }
            }
        }
        let norm = r.amax();
        if norm <= tol {
            Ok(q)
        } else {
            Err(GeomError::RootFindingDiverged { residual: norm })
        }
    }

    /// Final configuration and momentum of a solved grid.
    fn endpoint(&self, q: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>) {
        let lf_t = self.probe.basis.lf().transpose();
        let q_f = q * &lf_t;
        let p_f = self.momentum_grid(q) * &lf_t;
        (q_f.column(0).into_owned(), p_f.column(0).into_owned())
    }
}

/// Node samples of an orthonormalized basis for polynomials vanishing at
/// both endpoints of `[-1, 1]`: QR of `(1 − t²)·T_j(t)`, `j < N − 2`.
fn vanishing_basis(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    if n <= 2 {
        return DMatrix::zeros(n, 0);
    }
    let mut samples = DMatrix::zeros(n, n - 2);
    for (k, &t) in nodes.iter().enumerate() {
        let window = 1.0 - t * t;
        let mut prev = 1.0;
        let mut cur = t;
        for j in 0..n - 2 {
            let value = match j {
                0 => 1.0,
                1 => t,
                _ => {
                    let next = 2.0 * t * cur - prev;
                    prev = cur;
                    cur = next;
                    cur
                }
            };
            samples[(k, j)] = window * value;
        }
    }
    samples.qr().q()
}

/// Velocity consistent with a given momentum at fixed configuration:
/// Newton on `v ↦ L_v(q, v) − p` (one step suffices when `L_v` is linear
/// in `v`).
fn velocity_from_momentum(
    model: &dyn LagrangianModel,
    q: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<DVector<f64>, GeomError> {
    let mut v = DVector::zeros(q.len());
    for _ in 0..8 {
        let gap = p - model.l_v(q, &v);
        if gap.amax() <= 1e-13 * (1.0 + p.amax()) {
            break;
        }
        let mass = model
            .l_vv(q, &v)
            .cholesky()
            .ok_or(ModelError::SingularMassMatrix)?;
        v += mass.solve(&gap);
    }
    Ok(v)
}

/// Initial grid for the boundary-value solve: the forward-simulated
/// trajectory under the probe's control, sampled at the node times, with a
/// straight-line fallback if the simulation itself fails.
fn warm_start(
    probe: &FlowMapProbe,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
) -> Result<DMatrix<f64>, GeomError> {
    let model = probe.model.as_ref();
    let v0 = velocity_from_momentum(model, q0, p0)?;
    let basis = probe.basis.as_ref();
    let t_f = probe.t_f;
    let times: Vec<f64> = basis.nodes().iter().map(|s| (s + 1.0) * t_f / 2.0).collect();
    let b = model.actuation();
    let force = |t: f64, _: &DVector<f64>, _: &DVector<f64>| {
        b * probe.u.interpolate(basis, 2.0 * t / t_f - 1.0)
    };
    match simulate_generalized(model, q0, &v0, force, t_f, &times, 1e-9) {
        Ok(samples) => Ok(DMatrix::from_fn(model.dim_q(), basis.len(), |c, k| {
            samples.q[k][c]
        })),
        Err(_) => Ok(DMatrix::from_fn(model.dim_q(), basis.len(), |c, k| {
            q0[c] + v0[c] * times[k]
        })),
    }
}

/// Solve the boundary-value system for the probe's scheme. The broken
/// variant has no root near the physical trajectory, so a failed direct
/// solve falls back to a continuation path from the true scheme, each step
/// warm-started at the previous root.
fn solve_flow(
    probe: &FlowMapProbe,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    warm: Option<DMatrix<f64>>,
) -> Result<DMatrix<f64>, GeomError> {
    let warm = match warm {
        Some(grid) => grid,
        None => warm_start(probe, q0, p0)?,
    };
    if !probe.broken {
        return FlowSystem::new(probe, q0.clone(), p0.clone()).solve(warm);
    }
    let broken = FlowSystem::with_blend(probe, q0.clone(), p0.clone(), 1.0);
    if let Ok(solution) = broken.solve(warm.clone()) {
        return Ok(solution);
    }
    let mut lambda: f64 = 0.0;
    let mut solution = FlowSystem::with_blend(probe, q0.clone(), p0.clone(), 0.0).solve(warm)?;
    let mut step: f64 = 0.25;
    while lambda < 1.0 {
        let target = (lambda + step).min(1.0);
        let system = FlowSystem::with_blend(probe, q0.clone(), p0.clone(), target);
        match system.solve(solution.clone()) {
            Ok(next) => {
                solution = next;
                lambda = target;
                step = (step * 2.0).min(0.25);
            }
            Err(err) => {
                step *= 0.5;
                if step < 1.0 / 256.0 {
                    return Err(err);
                }
            }
        }
    }
    Ok(solution)
}

/// The discrete flow map: solve the boundary-value system pinning the
/// initial configuration and the momentum polynomial's initial value, final
/// state free, and report the endpoint `(q_f, p_f)`.
pub fn discrete_flow(
    probe: &FlowMapProbe,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), GeomError> {
    let solution = solve_flow(probe, q0, p0, None)?;
    let system = FlowSystem::new(probe, q0.clone(), p0.clone());
    Ok(system.endpoint(&solution))
}

/// The solved configuration grid behind `discrete_flow`, for feeding the
/// trajectory into other diagnostics (momentum drift, residual norms).
pub fn flow_solution(
    probe: &FlowMapProbe,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
) -> Result<GridFunction, GeomError> {
    let solution = solve_flow(probe, q0, p0, None)?;
    Ok(GridFunction::new(solution))
}

fn canonical_form(d: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        omega[(i, d + i)] = -1.0;
        omega[(d + i, i)] = 1.0;
    }
    omega
}

/// Central-difference Jacobian of the endpoint map at `(q0, p0)` and its
/// deviation from the canonical symplectic form. Each of the `4d`
/// perturbed flows is an independent solve warm-started from the base
/// solution.
pub fn symplectic_defect(
    probe: &FlowMapProbe,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
) -> Result<SymplecticDefect, GeomError> {
    let d = probe.model.dim_q();
    let base = solve_flow(probe, q0, p0, None)?;

    let step = |i: usize| {
        let center = if i < d { q0[i] } else { p0[i - d] };
        probe.epsilon * (1.0 + center.abs())
    };
    let flows = map_indexed(probe.exec, 4 * d, |idx| -> Result<DVector<f64>, GeomError> {
        let (i, sign) = (idx / 2, if idx % 2 == 0 { 1.0 } else { -1.0 });
        let mut q0_shift = q0.clone();
        let mut p0_shift = p0.clone();
        if i < d {
            q0_shift[i] += sign * step(i);
        } else {
            p0_shift[i - d] += sign * step(i);
        }
        let solution = solve_flow(probe, &q0_shift, &p0_shift, Some(base.clone()))?;
        let system = FlowSystem::new(probe, q0_shift, p0_shift);
        let (q_f, p_f) = system.endpoint(&solution);
        let mut state = DVector::zeros(2 * d);
        state.rows_mut(0, d).copy_from(&q_f);
        state.rows_mut(d, d).copy_from(&p_f);
        Ok(state)
    });

    let mut jacobian = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..2 * d {
        let plus = flows[2 * i].clone()?;
        let minus = flows[2 * i + 1].clone()?;
        jacobian.set_column(i, &((plus - minus) / (2.0 * step(i))));
    }
    let omega = canonical_form(d);
    let defect = (jacobian.transpose() * &omega * &jacobian - &omega).amax();
    Ok(SymplecticDefect { jacobian, defect })
}

/// Peak-to-peak variation of one momentum component over a `4N`-interval
/// uniform refinement of the canonical interval. The component must be
/// cyclic and unactuated in the supplied solution: the matching
/// generalized-force component (`L_q + B u`) must vanish along the
/// trajectory, otherwise the drift number would be meaningless and an
/// error is returned.
pub fn momentum_drift(
    problem: &DiscretizedProblem,
    x: &DVector<f64>,
    cyclic_index: usize,
) -> Result<f64, GeomError> {
    let traj = problem.extract(x)?;
    let basis = problem.basis();
    let rebuilt;
    let model: &dyn LagrangianModel = if traj.params.is_empty() {
        problem.model()
    } else {
        rebuilt = problem.model().rebuild(&traj.params)?;
        rebuilt.as_ref()
    };
    if cyclic_index >= model.dim_q() {
        return Err(GeomError::NotCyclic {
            index: cyclic_index,
            magnitude: f64::INFINITY,
        });
    }

    let momentum = problem.momentum_polynomial(x)?;
    let samples = 4 * basis.len();
    let b = model.actuation();
    let mut worst_force: f64 = 0.0;
    let mut low = f64::INFINITY;
    let mut high = f64::NEG_INFINITY;
    for r in 0..=samples {
        let s = -1.0 + 2.0 * r as f64 / samples as f64;
        let q = traj.q.interpolate(basis, s);
        let v = traj.v.interpolate(basis, s);
        let u = traj.u.interpolate(basis, s);
        let force = model.l_q(&q, &v) + b * u;
        worst_force = worst_force.max(force[cyclic_index].abs());
        let p = momentum.interpolate(basis, s)[cyclic_index];
        low = low.min(p);
        high = high.max(p);
    }
    if worst_force > 1e-9 {
        return Err(GeomError::NotCyclic {
            index: cyclic_index,
            magnitude: worst_force,
        });
    }
    Ok(high - low)
}

/// A reference trajectory: initial state, horizon, and a fixed smooth
/// control law integrated to high accuracy by the adaptive oracle.
pub struct OracleFixture {
    pub q0: DVector<f64>,
    pub v0: DVector<f64>,
    pub t_f: f64,
    pub control: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
    /// Oracle integration tolerance.
    pub tol: f64,
}

/// One line of a convergence study: grid size and the scheme's residual at
/// the oracle-resampled trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub residual: f64,
}

/// Resample the oracle trajectory of `fixture` onto each grid size and
/// report the scheme's residual norm there. A spectrally convergent scheme
/// shows super-polynomial decay in `n` for smooth dynamics.
pub fn convergence_study(
    model: &Arc<dyn LagrangianModel>,
    kind: SchemeKind,
    family: FamilyKind,
    grid_sizes: &[usize],
    fixture: &OracleFixture,
) -> Result<Vec<ConvergenceRow>, GeomError> {
    let mut rows = Vec::with_capacity(grid_sizes.len());
    for &n in grid_sizes {
        let basis = Arc::new(SpectralBasis::new(family, n)?);
        let t_f = fixture.t_f;
        let times: Vec<f64> = basis.nodes().iter().map(|s| (s + 1.0) * t_f / 2.0).collect();
        let oracle = crate::mechsys::reference_simulate(
            model.as_ref(),
            &fixture.q0,
            &fixture.v0,
            |t| (fixture.control)(t),
            t_f,
            &times,
            fixture.tol,
        )?;
        let d = model.dim_q();
        let q = GridFunction::new(DMatrix::from_fn(d, n, |c, k| oracle.q[k][c]));
        let v = GridFunction::new(DMatrix::from_fn(d, n, |c, k| oracle.v[k][c]));
        let u = GridFunction::new(DMatrix::from_fn(model.dim_u(), n, |c, k| {
            (fixture.control)(times[k])[c]
        }));

        let bc = BoundaryConditions::from_rest_state(fixture.q0.clone(), fixture.v0.clone());
        let scaling = TimeScaling::Fixed(t_f);
        let problem = match kind {
            SchemeKind::Pmoc => build_pmoc(
                model.clone(),
                basis.clone(),
                bc,
                scaling,
                RunningCost::TorqueSquared,
            )?,
            SchemeKind::DaeEl => build_dae_el(
                model.clone(),
                basis.clone(),
                bc,
                scaling,
                RunningCost::TorqueSquared,
            )?,
            SchemeKind::OdeEl => build_ode_el(
                model.clone(),
                basis.clone(),
                bc,
                scaling,
                RunningCost::TorqueSquared,
            )?,
        };
        let v_grid = if problem.layout().has_v_grid {
            Some(&v)
        } else {
            None
        };
        let x = problem.pack(&q, v_grid, &u, t_f, &[]);
        let residual = problem.residual(&x)?.amax();
        rows.push(ConvergenceRow { n, residual });
    }
    Ok(rows)
}

/// One line of a combined verification table; absent measurements are
/// left empty in the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub n: usize,
    pub residual: f64,
    pub defect: Option<f64>,
    pub drift: Option<f64>,
}

/// Emit a study table as CSV with columns `N,residual,defect,drift`.
pub fn write_study_csv<W: Write>(rows: &[StudyRow], out: &mut W) -> io::Result<()> {
    writeln!(out, "N,residual,defect,drift")?;
    for row in rows {
        write!(out, "{},{}", row.n, row.residual)?;
        match row.defect {
            Some(value) => write!(out, ",{value}")?,
            None => write!(out, ",")?,
        }
        match row.drift {
            Some(value) => writeln!(out, ",{value}")?,
            None => writeln!(out, ",")?,
        }
    }
    Ok(())
}
