//! The operations behind the `pmoc` binary: solve one configuration into
//! a report, compare schemes on the same problem, export trajectories,
//! and run the geometric verification studies.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use thiserror::Error;

use pmoc_core::exec::{map_indexed, ExecMode};
use pmoc_core::geomcheck::{
    convergence_study, flow_solution, momentum_drift, symplectic_defect, write_study_csv,
    FlowMapProbe, OracleFixture, StudyRow,
};
use pmoc_core::mechsys::{
    make_3crobot, make_acrobot, make_pendulum, make_point_mass, LagrangianModel,
};
use pmoc_core::nlp::{assemble, multistart, InitialGuessSpec, SolveStatus, SqpOptions};
use pmoc_core::polybasis::{FamilyKind, GridFunction, SpectralBasis};
use pmoc_core::scheme::{
    build_dae_el, build_ode_el, build_pmoc, BoundaryConditions, DiscretizedProblem,
    ParamConstraint, RunningCost, SchemeKind, TargetValue, TimeScaling,
};

use crate::config::{
    BasisChoice, ConfigError, GuessStrategy, RunConfig, SchemeChoice, SystemChoice, SCHEME_ORDER,
};
use crate::report::{
    BenchmarkReport, DesignValue, ReferenceComparison, ReportError, RunRecord, StartDigest,
    TrajectorySample,
};

/// Rows in every dense trajectory resampling.
pub const TRAJECTORY_SAMPLES: usize = 512;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Usage(String),
    #[error("failed to build the problem: {0}")]
    Build(String),
    #[error("solver driver failed: {0}")]
    Solve(String),
    #[error("verification study failed: {0}")]
    Study(String),
    #[error("report status {0:?} has no usable trajectory; refusing to export")]
    NoTrajectory(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Process exit code for a failed operation: configuration and usage
/// problems are caller mistakes, a missing feasible trajectory mirrors an
/// infeasible run, everything else is a numerical failure.
pub fn exit_code_for(err: &CliError) -> i32 {
    match err {
        CliError::Config(_) | CliError::Usage(_) => 64,
        CliError::NoTrajectory(_) => 2,
        _ => 3,
    }
}

/// Process exit code for a completed run: feasible outcomes succeed,
/// infeasible ones exit 2, numerical breakdowns exit 3.
pub fn exit_code_for_status(status: &str) -> i32 {
    match status {
        "optimal" | "feasible" => 0,
        "infeasible" | "iter-limit" => 2,
        _ => 3,
    }
}

fn build_err(e: impl std::fmt::Display) -> CliError {
    CliError::Build(e.to_string())
}

fn solve_err(e: impl std::fmt::Display) -> CliError {
    CliError::Solve(e.to_string())
}

fn study_err(e: impl std::fmt::Display) -> CliError {
    CliError::Study(e.to_string())
}

/// Rest-to-rest boundary conditions for each benchmark problem: the point
/// mass translates one unit; the pendulum chains swing from hanging to
/// upright (first angle to π modulo 2π, the others aligned).
fn boundary_conditions(system: SystemChoice, d: usize) -> BoundaryConditions {
    let rest = BoundaryConditions::from_rest_state(DVector::zeros(d), DVector::zeros(d));
    match system {
        SystemChoice::Pointmass => rest
            .with_q_final(vec![TargetValue::Value(1.0)])
            .with_v_final(vec![TargetValue::Value(0.0)]),
        _ => {
            let mut q_targets = vec![TargetValue::Angle(std::f64::consts::PI)];
            q_targets.resize(d, TargetValue::Angle(0.0));
            rest.with_q_final(q_targets)
                .with_v_final(vec![TargetValue::Value(0.0); d])
        }
    }
}

/// Model, grid, boundary conditions, scheme, and optional design-length
/// coupling, assembled from a validated configuration.
pub fn build_problem(config: &RunConfig) -> Result<Arc<DiscretizedProblem>, CliError> {
    let model: Arc<dyn LagrangianModel> = match config.system {
        SystemChoice::Acrobot => Arc::new(make_acrobot()),
        SystemChoice::Threecrobot => Arc::new(make_3crobot(0.5, 0.5).map_err(build_err)?),
        SystemChoice::Pointmass => Arc::new(make_point_mass()),
        SystemChoice::Pendulum => Arc::new(make_pendulum()),
    };
    let basis =
        Arc::new(SpectralBasis::new(config.basis.family(), config.n).map_err(build_err)?);
    let bc = boundary_conditions(config.system, model.dim_q());
    let [lo, hi] = config.tf_bounds;
    let scaling = if lo == hi {
        TimeScaling::Fixed(lo)
    } else {
        TimeScaling::free(lo, hi)
    };
    let build = match config.scheme {
        SchemeChoice::Pmoc => build_pmoc,
        SchemeChoice::DaeEl => build_dae_el,
        SchemeChoice::OdeEl => build_ode_el,
    };
    let mut problem =
        build(model, basis, bc, scaling, RunningCost::TorqueSquared).map_err(build_err)?;
    if config.optimize_lengths {
        problem = problem.optimize_params(vec![ParamConstraint::SumEquals(1.0)]);
    }
    Ok(Arc::new(problem))
}

fn base_guess(config: &RunConfig) -> InitialGuessSpec {
    let g = &config.guess;
    match g.strategy {
        GuessStrategy::Sinusoid => InitialGuessSpec::SinusoidalTorque {
            amplitude: g.amplitude,
            frequency: g.frequency,
            phase: g.phase,
        },
        GuessStrategy::ConstantPd => InitialGuessSpec::ConstantTorquePlusPd {
            torque: g.torque,
            kp: g.kp,
        },
    }
}

/// Published figures for the same benchmark problems, echoed into reports
/// as context; never an assertion target.
fn reference_for(config: &RunConfig) -> Option<ReferenceComparison> {
    match (config.system, config.scheme) {
        (SystemChoice::Acrobot, SchemeChoice::Pmoc) => Some(ReferenceComparison {
            note: "published benchmark on this problem: cost 0.63 in 218 major iterations \
                   (different solver stack; informational only)"
                .into(),
            cost: Some(0.63),
            major_iterations: Some(218),
            params: None,
        }),
        (SystemChoice::Threecrobot, SchemeChoice::Pmoc) if config.optimize_lengths => {
            Some(ReferenceComparison {
                note: "published link-length optimum near (l2, l3) = (0.3, 0.7) \
                       (informational only)"
                    .into(),
                cost: None,
                major_iterations: None,
                params: Some(vec![0.3, 0.7]),
            })
        }
        _ => None,
    }
}

/// Interpolate the solved polynomials on `count` uniform physical times.
pub fn resample_trajectory(
    problem: &DiscretizedProblem,
    x: &DVector<f64>,
    count: usize,
) -> Result<Vec<TrajectorySample>, CliError> {
    let traj = problem.extract(x).map_err(solve_err)?;
    let p = problem.momentum_polynomial(x).map_err(solve_err)?;
    let basis = problem.basis();
    let mut samples = Vec::with_capacity(count);
    for k in 0..count {
        let frac = if count > 1 {
            k as f64 / (count as f64 - 1.0)
        } else {
            0.0
        };
        let s = 2.0 * frac - 1.0;
        samples.push(TrajectorySample {
            t: traj.t_f * frac,
            q: traj.q.interpolate(basis, s).as_slice().to_vec(),
            v: traj.v.interpolate(basis, s).as_slice().to_vec(),
            u: traj.u.interpolate(basis, s).as_slice().to_vec(),
            p: p.interpolate(basis, s).as_slice().to_vec(),
        });
    }
    Ok(samples)
}

struct Execution {
    status: &'static str,
    major_iterations: usize,
    cost: f64,
    feasibility: f64,
    t_f: f64,
    design_params: Vec<DesignValue>,
    starts: Vec<StartDigest>,
    trajectory: Vec<TrajectorySample>,
}

fn execute(config: &RunConfig) -> Result<Execution, CliError> {
    let problem = build_problem(config)?;
    let guess = base_guess(config);
    let options = SqpOptions {
        feas_tol: config.tolerances.feasibility,
        opt_tol: config.tolerances.optimality,
        max_major: config.tolerances.max_major,
        exec: ExecMode::default(),
    };
    let ms = multistart(
        |seed| assemble(&problem, &guess.perturbed(seed)),
        config.seeds,
        &options,
    )
    .map_err(solve_err)?;
    let best = &ms.best;
    let traj = problem.extract(&best.x_star).map_err(solve_err)?;
    let feasible = matches!(best.status, SolveStatus::Optimal | SolveStatus::Feasible);
    let trajectory = if feasible {
        resample_trajectory(&problem, &best.x_star, TRAJECTORY_SAMPLES)?
    } else {
        Vec::new()
    };
    let design_params = problem
        .model()
        .design_params()
        .iter()
        .zip(&traj.params)
        .map(|(param, &value)| DesignValue {
            name: param.name.clone(),
            value,
        })
        .collect();
    let starts = ms
        .starts
        .iter()
        .map(|s| StartDigest {
            seed: s.seed,
            status: s.status.label().into(),
            major_iterations: s.major_iterations,
            cost: s.cost,
            feasibility: s.feasibility,
        })
        .collect();
    Ok(Execution {
        status: best.status.label(),
        major_iterations: best.major_iterations,
        cost: best.final_cost,
        feasibility: best.feasibility,
        t_f: traj.t_f,
        design_params,
        starts,
        trajectory,
    })
}

/// Solve one configuration. Never panics on module errors: failures
/// before or during the solve land in the record as a structured status.
pub fn run(config: &RunConfig) -> BenchmarkReport {
    let digest = config.digest();
    let reference = reference_for(config);
    let started = Instant::now();
    match execute(config) {
        Ok(exec) => BenchmarkReport {
            config: config.clone(),
            record: RunRecord {
                digest,
                status: exec.status.into(),
                message: None,
                major_iterations: Some(exec.major_iterations),
                cost: Some(exec.cost),
                feasibility: Some(exec.feasibility),
                t_f: Some(exec.t_f),
                design_params: exec.design_params,
                wall_time_s: started.elapsed().as_secs_f64(),
                starts: exec.starts,
                reference,
            },
            trajectory: exec.trajectory,
        },
        Err(err) => BenchmarkReport {
            config: config.clone(),
            record: RunRecord {
                digest,
                status: "error".into(),
                message: Some(err.to_string()),
                major_iterations: None,
                cost: None,
                feasibility: None,
                t_f: None,
                design_params: Vec::new(),
                wall_time_s: started.elapsed().as_secs_f64(),
                starts: Vec::new(),
                reference,
            },
            trajectory: Vec::new(),
        },
    }
}

/// Artifact locations produced by [`write_report`].
#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub report: PathBuf,
    pub trajectory: Option<PathBuf>,
}

/// Write the report (and, when feasible, the trajectory CSV) into the
/// configured output directory.
pub fn write_report(report: &BenchmarkReport) -> Result<ReportPaths, CliError> {
    let dir = report.config.outputs.resolved_dir();
    std::fs::create_dir_all(&dir)?;
    let report_path = dir.join(&report.config.outputs.report);
    report.save(&report_path)?;
    let trajectory = if report.trajectory.is_empty() {
        None
    } else {
        let path = dir.join(&report.config.outputs.trajectory);
        export_trajectory(report, &path)?;
        Some(path)
    };
    Ok(ReportPaths {
        report: report_path,
        trajectory,
    })
}

/// Write the dense samples as CSV: header `t,q1..qd,v1..vd,u1..um,p1..pd`,
/// one row per sample, full float precision. Refuses reports without a
/// feasible trajectory.
pub fn export_trajectory(report: &BenchmarkReport, path: &Path) -> Result<(), CliError> {
    if !report.is_feasible() || report.trajectory.is_empty() {
        return Err(CliError::NoTrajectory(report.record.status.clone()));
    }
    let first = &report.trajectory[0];
    let mut out = String::from("t");
    for (label, len) in [
        ("q", first.q.len()),
        ("v", first.v.len()),
        ("u", first.u.len()),
        ("p", first.p.len()),
    ] {
        for i in 1..=len {
            out.push_str(&format!(",{label}{i}"));
        }
    }
    out.push('\n');
    for sample in &report.trajectory {
        out.push_str(&format!("{}", sample.t));
        for block in [&sample.q, &sample.v, &sample.u, &sample.p] {
            for value in block.iter() {
                out.push_str(&format!(",{value}"));
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// One line of the scheme-comparison table.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub scheme: SchemeChoice,
    pub status: String,
    pub major_iterations: Option<usize>,
    pub cost: Option<f64>,
    pub feasibility: Option<f64>,
    pub t_f: Option<f64>,
    pub wall_time_s: f64,
    /// Index into [`Comparison::reports`] (reports stay in input order).
    pub report_index: usize,
}

/// Table rows in declared scheme order plus the full per-run reports in
/// input order.
#[derive(Debug)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub reports: Vec<BenchmarkReport>,
}

/// Run the same problem under several schemes. Requires at least two
/// configurations that differ only in the scheme; failures of individual
/// runs are recorded inline, never raised.
pub fn compare(configs: &[RunConfig]) -> Result<Comparison, CliError> {
    if configs.len() < 2 {
        return Err(CliError::Usage(
            "compare needs at least two configurations".into(),
        ));
    }
    for (i, config) in configs.iter().enumerate() {
        config.validate()?;
        if configs[..i].iter().any(|c| c.scheme == config.scheme) {
            return Err(CliError::Usage(format!(
                "scheme {} appears twice",
                config.scheme
            )));
        }
    }
    let normalized: Vec<String> = configs
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.scheme = SchemeChoice::Pmoc;
            c.digest()
        })
        .collect();
    if normalized.windows(2).any(|w| w[0] != w[1]) {
        return Err(CliError::Usage(
            "compare configurations must differ only in the scheme".into(),
        ));
    }

    // Independent solves; assembly stays deterministic in config order.
    let reports: Vec<BenchmarkReport> =
        map_indexed(ExecMode::default(), configs.len(), |i| run(&configs[i]));

    let mut rows = Vec::new();
    for scheme in SCHEME_ORDER {
        if let Some(i) = configs.iter().position(|c| c.scheme == scheme) {
            let record = &reports[i].record;
            rows.push(CompareRow {
                scheme,
                status: record.status.clone(),
                major_iterations: record.major_iterations,
                cost: record.cost,
                feasibility: record.feasibility,
                t_f: record.t_f,
                wall_time_s: record.wall_time_s,
                report_index: i,
            });
        }
    }
    Ok(Comparison { rows, reports })
}

fn cell<T, F: FnOnce(T) -> String>(value: Option<T>, fmt: F) -> String {
    value.map(fmt).unwrap_or_else(|| "-".into())
}

/// Fixed-width comparison table with the feasibility column; one row per
/// scheme in declared order.
pub fn render_comparison(rows: &[CompareRow]) -> String {
    let mut out = format!(
        "{:<8} {:<18} {:>7} {:>12} {:>13} {:>9} {:>9}\n",
        "scheme", "status", "majors", "cost", "feasibility", "t_f", "time[s]"
    );
    out.push_str(&"-".repeat(82));
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{:<8} {:<18} {:>7} {:>12} {:>13} {:>9} {:>9.2}\n",
            row.scheme.as_str(),
            row.status,
            cell(row.major_iterations, |m| m.to_string()),
            cell(row.cost, |c| format!("{c:.4}")),
            cell(row.feasibility, |f| format!("{f:.3e}")),
            cell(row.t_f, |t| format!("{t:.4}")),
            row.wall_time_s,
        ));
    }
    out
}

/// Which verification study to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StudyChoice {
    /// Pendulum residual decay under grid refinement.
    Convergence,
    /// Flow-map symplectic defect, its quadratic probe-step scaling, and
    /// the broken-scheme negative control.
    Symplectic,
    /// Cyclic-momentum drift on the gravity-free acrobot.
    Momentum,
    /// All of the above.
    All,
}

/// Verification outcome: human-readable lines, table rows for the CSV,
/// and the overall verdict.
#[derive(Debug)]
pub struct VerifyReport {
    pub lines: Vec<String>,
    pub rows: Vec<StudyRow>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn csv(&self) -> String {
        let mut buffer = Vec::new();
        write_study_csv(&self.rows, &mut buffer).expect("writing to a Vec cannot fail");
        String::from_utf8(buffer).expect("CSV is UTF-8")
    }
}

fn verdict(name: &str, ok: bool, detail: &str) -> String {
    format!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" })
}

fn convergence_block(
    family: FamilyKind,
    lines: &mut Vec<String>,
    rows: &mut Vec<StudyRow>,
) -> Result<bool, CliError> {
    let model: Arc<dyn LagrangianModel> = Arc::new(make_pendulum());
    let fixture = OracleFixture {
        q0: DVector::from_element(1, 0.5),
        v0: DVector::zeros(1),
        t_f: 3.0,
        control: Arc::new(|t: f64| DVector::from_element(1, 0.3 * t.sin())),
        tol: 1e-12,
    };
    let table = convergence_study(&model, SchemeKind::Pmoc, family, &[8, 12, 16, 20, 24], &fixture)
        .map_err(study_err)?;
    for row in &table {
        lines.push(format!(
            "convergence  N={:<3} residual = {:.3e}",
            row.n, row.residual
        ));
        rows.push(StudyRow {
            n: row.n,
            residual: row.residual,
            defect: None,
            drift: None,
        });
    }
    let decaying = table.windows(2).all(|w| w[1].residual < w[0].residual);
    let last = table.last().expect("table is non-empty").residual;
    let ok = decaying && last < 1e-8;
    lines.push(verdict(
        "convergence",
        ok,
        &format!("residual decays monotonically to {last:.3e} at N=24 (target < 1e-8)"),
    ));
    Ok(ok)
}

/// Dynamics-residual norm of an unforced flow solution, for the study
/// table's residual column.
fn flow_dynamics_residual(
    model: &Arc<dyn LagrangianModel>,
    basis: &Arc<SpectralBasis>,
    t_f: f64,
    q0: &DVector<f64>,
    p0: &DVector<f64>,
    grid: &GridFunction,
) -> Result<f64, CliError> {
    let v0 = model
        .l_vv(q0, &DVector::zeros(model.dim_q()))
        .cholesky()
        .ok_or_else(|| CliError::Study("singular inertia at the initial state".into()))?
        .solve(p0);
    let problem = build_pmoc(
        model.clone(),
        basis.clone(),
        BoundaryConditions::from_rest_state(q0.clone(), v0),
        TimeScaling::Fixed(t_f),
        RunningCost::TorqueSquared,
    )
    .map_err(study_err)?;
    let u = GridFunction::zeros(model.dim_u(), basis.len());
    let x = problem.pack(grid, None, &u, t_f, &[]);
    let residual = problem.residual(&x).map_err(study_err)?;
    Ok(residual.rows(0, model.dim_q() * basis.len()).norm())
}

fn symplectic_block(lines: &mut Vec<String>, rows: &mut Vec<StudyRow>) -> Result<bool, CliError> {
    let model: Arc<dyn LagrangianModel> = Arc::new(make_pendulum());
    let basis = Arc::new(SpectralBasis::new(FamilyKind::Chebyshev, 16).map_err(study_err)?);
    let t_f = 3.0;
    let q0 = DVector::from_element(1, 0.4);
    let p0 = DVector::from_element(1, 0.3);

    let probe = FlowMapProbe::unforced(model.clone(), basis.clone(), t_f);
    let good = symplectic_defect(&probe, &q0, &p0).map_err(study_err)?;
    let coarse = symplectic_defect(
        &FlowMapProbe::unforced(model.clone(), basis.clone(), t_f).with_epsilon(2e-3),
        &q0,
        &p0,
    )
    .map_err(study_err)?;
    let fine = symplectic_defect(
        &FlowMapProbe::unforced(model.clone(), basis.clone(), t_f).with_epsilon(1e-3),
        &q0,
        &p0,
    )
    .map_err(study_err)?;
    let ratio = coarse.defect / fine.defect;

    let broken_state = (DVector::from_element(1, 0.3), DVector::from_element(1, 0.25));
    let broken = symplectic_defect(
        &FlowMapProbe::unforced(model.clone(), basis.clone(), t_f).with_broken_derivative(),
        &broken_state.0,
        &broken_state.1,
    )
    .map_err(study_err)?;

    let grid = flow_solution(&probe, &q0, &p0).map_err(study_err)?;
    let dynamics = flow_dynamics_residual(&model, &basis, t_f, &q0, &p0, &grid)?;
    rows.push(StudyRow {
        n: basis.len(),
        residual: dynamics,
        defect: Some(good.defect),
        drift: None,
    });

    let good_ok = good.defect < 1e-4;
    let scaling_ok = (2.5..6.5).contains(&ratio);
    let broken_ok = broken.defect > 1e-1;
    lines.push(format!(
        "symplectic   N=16  defect = {:.3e} (target < 1e-4)",
        good.defect
    ));
    lines.push(format!(
        "symplectic   probe-step halving shrinks the defect estimate {ratio:.2}x (quadratic target ~4)",
    ));
    lines.push(format!(
        "symplectic   transposed-derivative control: defect = {:.3e} (target > 1e-1)",
        broken.defect
    ));
    let ok = good_ok && scaling_ok && broken_ok;
    lines.push(verdict(
        "symplectic",
        ok,
        "flow map preserves the canonical form; the broken scheme does not",
    ));
    Ok(ok)
}

fn momentum_block(lines: &mut Vec<String>, rows: &mut Vec<StudyRow>) -> Result<bool, CliError> {
    let model: Arc<dyn LagrangianModel> = Arc::new(make_acrobot().with_gravity(0.0));
    let basis = Arc::new(SpectralBasis::new(FamilyKind::Chebyshev, 32).map_err(study_err)?);
    let t_f = 2.0;
    let q0 = DVector::from_vec(vec![0.4, -0.3]);
    let p0 = DVector::from_vec(vec![0.25, 0.1]);

    let probe = FlowMapProbe::unforced(model.clone(), basis.clone(), t_f);
    let grid = flow_solution(&probe, &q0, &p0).map_err(study_err)?;
    let v0 = model
        .l_vv(&q0, &DVector::zeros(2))
        .cholesky()
        .ok_or_else(|| CliError::Study("singular inertia at the initial state".into()))?
        .solve(&p0);
    let problem = build_pmoc(
        model.clone(),
        basis.clone(),
        BoundaryConditions::from_rest_state(q0.clone(), v0),
        TimeScaling::Fixed(t_f),
        RunningCost::TorqueSquared,
    )
    .map_err(study_err)?;
    let u = GridFunction::zeros(1, basis.len());
    let x = problem.pack(&grid, None, &u, t_f, &[]);
    let drift = momentum_drift(&problem, &x, 0).map_err(study_err)?;
    let dynamics = problem
        .residual(&x)
        .map_err(study_err)?
        .rows(0, 2 * basis.len())
        .norm();
    rows.push(StudyRow {
        n: basis.len(),
        residual: dynamics,
        defect: None,
        drift: Some(drift),
    });

    let ok = drift < 1e-8 && drift <= 10.0 * dynamics + 1e-12;
    lines.push(format!(
        "momentum     N=32  drift = {:.3e} on the 4N refinement (target < 1e-8, bound 10x residual = {:.3e})",
        drift, dynamics
    ));
    lines.push(verdict(
        "momentum",
        ok,
        "cyclic momentum is flat along the gravity-free flow",
    ));
    Ok(ok)
}

/// Run the requested verification studies. The convergence study honors
/// the basis choice; the symplectic and momentum certificates run on
/// their pinned fixtures.
pub fn verify(study: StudyChoice, basis: BasisChoice) -> Result<VerifyReport, CliError> {
    let mut lines = Vec::new();
    let mut rows = Vec::new();
    let mut passed = true;
    let family = basis.family();
    if matches!(study, StudyChoice::Convergence | StudyChoice::All) {
        passed &= convergence_block(family, &mut lines, &mut rows)?;
    }
    if matches!(study, StudyChoice::Symplectic | StudyChoice::All) {
        passed &= symplectic_block(&mut lines, &mut rows)?;
    }
    if matches!(study, StudyChoice::Momentum | StudyChoice::All) {
        passed &= momentum_block(&mut lines, &mut rows)?;
    }
    Ok(VerifyReport {
        lines,
        rows,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigOverrides;

    fn point_mass_config(n: usize) -> RunConfig {
        let mut config = RunConfig::default();
        config.system = SystemChoice::Pointmass;
        config.n = n;
        config.tf_bounds = [1.0, 1.0];
        // Tight stationarity so the resampled control matches the closed
        // form to well under 1e-5 even at the interval endpoints, where
        // interpolation amplifies iterate error; below ~2e-7 the
        // finite-difference gradient noise floor prevents convergence.
        config.tolerances.optimality = 1e-6;
        config
    }

    #[test]
    fn point_mass_run_matches_the_closed_form() {
        let config = point_mass_config(8);
        let report = run(&config);
        assert_eq!(report.record.status, "optimal", "{:?}", report.record);
        let cost = report.record.cost.unwrap();
        assert!((cost - 12.0).abs() < 1e-5, "cost = {cost}");
        assert!(report.record.feasibility.unwrap() <= 1e-6);
        assert_eq!(report.record.t_f, Some(1.0));
        assert_eq!(report.trajectory.len(), TRAJECTORY_SAMPLES);

        // Monotone uniform times covering [0, t_f].
        let times: Vec<f64> = report.trajectory.iter().map(|s| s.t).collect();
        assert_eq!(times[0], 0.0);
        assert!((times[TRAJECTORY_SAMPLES - 1] - 1.0).abs() < 1e-14);
        assert!(times.windows(2).all(|w| w[1] > w[0]));

        // Boundary conditions at the first row and the known control law.
        let first = &report.trajectory[0];
        assert!(first.q[0].abs() < 1e-6 && first.v[0].abs() < 1e-6);
        let worst = report
            .trajectory
            .iter()
            .map(|s| (s.u[0] - (6.0 - 12.0 * s.t)).abs())
            .fold(0.0_f64, f64::max);
        assert!(worst < 1e-5, "control deviates by {worst}");
    }

    #[test]
    fn reports_write_and_reload_through_the_filesystem() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = point_mass_config(6);
        config.outputs.dir = Some(dir.path().to_path_buf());
        let report = run(&config);
        let paths = write_report(&report).unwrap();
        let back = BenchmarkReport::load(&paths.report).unwrap();
        assert_eq!(back, report);

        let csv = std::fs::read_to_string(paths.trajectory.unwrap()).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,q1,v1,u1,p1"));
        assert_eq!(lines.count(), TRAJECTORY_SAMPLES);
    }

    #[test]
    fn export_refuses_reports_without_a_feasible_trajectory() {
        let config = point_mass_config(6);
        let mut report = run(&config);
        report.record.status = "infeasible".into();
        report.trajectory.clear();
        let err = export_trajectory(&report, Path::new("/tmp/unused.csv")).unwrap_err();
        assert!(matches!(err, CliError::NoTrajectory(_)));
        assert_eq!(exit_code_for(&err), 2);
    }

    #[test]
    fn failed_builds_become_structured_error_records() {
        let mut config = point_mass_config(6);
        config.tf_bounds = [5.0, 2.0]; // skips validate() on purpose
        let report = run(&config);
        assert_eq!(report.record.status, "error");
        assert!(report.record.message.as_ref().unwrap().len() > 0);
        assert!(report.trajectory.is_empty());
        assert!(report.record.cost.is_none());
        assert_eq!(exit_code_for_status(&report.record.status), 3);
    }

    #[test]
    fn compare_orders_rows_by_declared_scheme_order() {
        let overrides = ConfigOverrides {
            system: Some(SystemChoice::Pointmass),
            n: Some(6),
            tf_min: Some(1.0),
            tf_max: Some(1.0),
            scheme: vec![SchemeChoice::OdeEl, SchemeChoice::Pmoc],
            ..Default::default()
        };
        let configs = overrides.resolve_compare().unwrap();
        assert_eq!(configs[0].scheme, SchemeChoice::OdeEl); // input order kept
        let comparison = compare(&configs).unwrap();
        assert_eq!(comparison.rows.len(), 2);
        assert_eq!(comparison.rows[0].scheme, SchemeChoice::Pmoc);
        assert_eq!(comparison.rows[1].scheme, SchemeChoice::OdeEl);
        for row in &comparison.rows {
            assert!(!row.status.is_empty());
            assert!(row.cost.is_some());
        }
        let table = render_comparison(&comparison.rows);
        let pmoc_at = table.find("pmoc").unwrap();
        let ode_at = table.find("ode-el").unwrap();
        assert!(pmoc_at < ode_at, "{table}");
        assert!(table.lines().next().unwrap().contains("feasibility"));
    }

    #[test]
    fn compare_rejects_configs_differing_beyond_the_scheme() {
        let mut a = point_mass_config(6);
        a.scheme = SchemeChoice::Pmoc;
        let mut b = point_mass_config(8);
        b.scheme = SchemeChoice::OdeEl;
        let err = compare(&[a, b]).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        assert_eq!(exit_code_for(&err), 64);
    }

    #[test]
    fn verification_studies_pass_on_their_pinned_fixtures() {
        let outcome = verify(StudyChoice::All, BasisChoice::Chebyshev).unwrap();
        assert!(
            outcome.passed,
            "verification failed:\n{}",
            outcome.lines.join("\n")
        );
        assert!(outcome.lines.iter().any(|l| l.starts_with("PASS convergence")));
        assert!(outcome.lines.iter().any(|l| l.starts_with("PASS symplectic")));
        assert!(outcome.lines.iter().any(|l| l.starts_with("PASS momentum")));
        assert_eq!(outcome.rows.len(), 7); // 5 convergence + 1 + 1
        let csv = outcome.csv();
        assert!(csv.starts_with("N,residual,defect,drift\n"));
        assert_eq!(csv.lines().count(), 8);
    }

    #[test]
    fn legendre_convergence_study_also_decays() {
        let outcome = verify(StudyChoice::Convergence, BasisChoice::Legendre).unwrap();
        assert!(
            outcome.passed,
            "legendre convergence failed:\n{}",
            outcome.lines.join("\n")
        );
    }
}
