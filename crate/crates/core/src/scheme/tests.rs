use std::sync::Arc;

use approx::assert_abs_diff_eq;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};

use super::*;
use crate::mechsys::{make_acrobot, make_point_mass};
use crate::polybasis::{FamilyKind, GridFunction, SpectralBasis};

fn basis(n: usize) -> Arc<SpectralBasis> {
    Arc::new(SpectralBasis::new(FamilyKind::Chebyshev, n).unwrap())
}

fn rest_bc(d: usize) -> BoundaryConditions {
    BoundaryConditions::from_rest_state(DVector::zeros(d), DVector::zeros(d))
}

#[test]
fn free_particle_line_zeroes_pmoc_residual() {
    // q(t) = t on [0, 2] with u = 0 satisfies the free dynamics and the
    // boundary rows q(0) = 0, v(0) = 1.
    let basis = basis(6);
    let bc = BoundaryConditions::from_rest_state(
        DVector::from_vec(vec![0.0]),
        DVector::from_vec(vec![1.0]),
    );
    let problem = build_pmoc(
        Arc::new(make_point_mass()),
        basis.clone(),
        bc,
        TimeScaling::Fixed(2.0),
        RunningCost::TorqueSquared,
    )
    .unwrap();
    let q = GridFunction::sample(&basis, 1, |s| DVector::from_vec(vec![s + 1.0]));
    let u = GridFunction::zeros(1, 6);
    let x = problem.pack(&q, None, &u, 2.0, &[]);
    let r = problem.residual(&x).unwrap();
    assert!(r.abs().max() < 1e-12, "max residual {}", r.abs().max());
}

#[test]
fn equilibrium_hold_zeroes_all_schemes() {
    let basis = basis(8);
    let model: Arc<dyn crate::mechsys::LagrangianModel> = Arc::new(make_acrobot());
    for kind in [SchemeKind::Pmoc, SchemeKind::DaeEl, SchemeKind::OdeEl] {
        let build = match kind {
            SchemeKind::Pmoc => build_pmoc,
            SchemeKind::DaeEl => build_dae_el,
            SchemeKind::OdeEl => build_ode_el,
        };
        let problem = build(
            model.clone(),
            basis.clone(),
            rest_bc(2),
            TimeScaling::Fixed(3.0),
            RunningCost::TorqueSquared,
        )
        .unwrap();
        let q = GridFunction::zeros(2, 8);
        let v = GridFunction::zeros(2, 8);
        let u = GridFunction::zeros(1, 8);
        let x = problem.pack(&q, problem.layout().has_v_grid.then_some(&v), &u, 3.0, &[]);
        let r = problem.residual(&x).unwrap();
        assert!(
            r.abs().max() < 1e-12,
            "{} residual {}",
            kind.label(),
            r.abs().max()
        );
    }
}

#[test]
fn pmoc_is_metric_rescaled_strong_residual() {
    // The weak rows equal −(t_f/2)·G times the strong rows at ANY decision
    // vector, by the integration-by-parts identity; this pins both
    // implementations against each other away from solutions.
    let basis = basis(7);
    let model: Arc<dyn crate::mechsys::LagrangianModel> = Arc::new(make_acrobot());
    let t_f = 2.7;
    let pmoc = build_pmoc(
        model.clone(),
        basis.clone(),
        rest_bc(2),
        TimeScaling::Fixed(t_f),
        RunningCost::TorqueSquared,
    )
    .unwrap();
    let dae = build_dae_el(
        model,
        basis.clone(),
        rest_bc(2),
        TimeScaling::Fixed(t_f),
        RunningCost::TorqueSquared,
    )
    .unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let x = DVector::from_fn(pmoc.n_decision(), |_, _| rng.gen_range(-0.8..0.8));
    let rp = pmoc.residual(&x).unwrap();
    let rd = dae.residual(&x).unwrap();
    let n = 7;
    for c in 0..2 {
        let strong = DVector::from_iterator(n, (0..n).map(|k| rd[c * n + k]));
        let expected = basis.metric() * strong * (-t_f / 2.0);
        for k in 0..n {
            assert_abs_diff_eq!(rp[c * n + k], expected[k], epsilon = 1e-10);
        }
    }
}

#[test]
fn weak_rows_match_explicit_variations() {
    // Independent scalar-loop evaluation of the variational statement: for
    // each basis variation δq = ℓ_j e_c,
    //   ∫ δq·(L_q + Bu) dτ + ∫ δq̇·L_v dτ − [δq·L_v] at the endpoints
    // must reproduce row (c, j) of the assembled residual.
    let n = 6;
    let basis = basis(n);
    let model = make_acrobot();
    let t_f = 1.9;
    let problem = build_pmoc(
        Arc::new(make_acrobot()),
        basis.clone(),
        rest_bc(2),
        TimeScaling::Fixed(t_f),
        RunningCost::TorqueSquared,
    )
    .unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let x = DVector::from_fn(problem.n_decision(), |_, _| rng.gen_range(-0.7..0.7));
    let r = problem.residual(&x).unwrap();
    let traj = problem.extract(&x).unwrap();

    // Node fields computed independently.
    let mut force = vec![vec![0.0; n]; 2];
    let mut momentum = vec![vec![0.0; n]; 2];
    for k in 0..n {
        let qk = traj.q.values().column(k).into_owned();
        let vk = traj.v.values().column(k).into_owned();
        let uk = traj.u.values().column(k).into_owned();
        let f = model.l_q(&qk, &vk) + model.actuation() * uk;
        let p = model.l_v(&qk, &vk);
        for c in 0..2 {
            force[c][k] = f[c];
            momentum[c][k] = p[c];
        }
    }
    let g = basis.metric();
    let d_mat = basis.diff();
    let l0 = basis.l0();
    let lf = basis.lf();
    for c in 0..2 {
        // Endpoint momentum values of the interpolant.
        let p0: f64 = (0..n).map(|k| l0[k] * momentum[c][k]).sum();
        let pf: f64 = (0..n).map(|k| lf[k] * momentum[c][k]).sum();
        for j in 0..n {
            let mut force_term = 0.0;
            let mut deriv_term = 0.0;
            for k in 0..n {
                force_term += g[(j, k)] * force[c][k] * (t_f / 2.0);
                // samples of ℓ_j' are column j of D; ⟨ℓ_j', p⟩ via G.
                for i in 0..n {
                    deriv_term += d_mat[(i, j)] * g[(i, k)] * momentum[c][k];
                }
            }
            let expected = force_term + deriv_term - lf[j] * pf + l0[j] * p0;
            assert_abs_diff_eq!(r[c * n + j], expected, epsilon = 1e-9);
        }
    }
}

#[test]
fn ode_el_constant_velocity_zeroes_residual() {
    let basis = basis(5);
    let bc = BoundaryConditions::from_rest_state(
        DVector::from_vec(vec![0.5]),
        DVector::from_vec(vec![2.0]),
    );
    let problem = build_ode_el(
        Arc::new(make_point_mass()),
        basis.clone(),
        bc,
        TimeScaling::Fixed(1.0),
        RunningCost::TorqueSquared,
    )
    .unwrap();
    // q(τ) = 0.5 + 2τ, v ≡ 2, u ≡ 0 on t_f = 1 (canonical s: τ = (s+1)/2).
    let q = GridFunction::sample(&basis, 1, |s| DVector::from_vec(vec![0.5 + (s + 1.0)]));
    let v = GridFunction::sample(&basis, 1, |_| DVector::from_vec(vec![2.0]));
    let u = GridFunction::zeros(1, 5);
    let x = problem.pack(&q, Some(&v), &u, 1.0, &[]);
    let r = problem.residual(&x).unwrap();
    assert!(r.abs().max() < 1e-12);
}

#[test]
fn layout_arithmetic_matches_contract() {
    let basis = basis(8);
    let bc = BoundaryConditions::from_rest_state(DVector::zeros(1), DVector::zeros(1))
        .with_q_final(vec![TargetValue::Value(1.0)])
        .with_v_final(vec![TargetValue::Value(0.0)]);
    let fixed = build_pmoc(
        Arc::new(make_point_mass()),
        basis.clone(),
        bc.clone(),
        TimeScaling::Fixed(1.0),
        RunningCost::TorqueSquared,
    )
    .unwrap();
    assert_eq!(fixed.n_decision(), 16);
    assert_eq!(fixed.n_residual(), 8 + 4);
    let free = build_pmoc(
        Arc::new(make_point_mass()),
        basis,
        bc,
        TimeScaling::free(1.0, 10.0),
        RunningCost::TorqueSquared,
    )
    .unwrap();
    assert_eq!(free.n_decision(), 17);
    let (lo, hi) = free.bounds();
    let tf_idx = free.layout().tf_index().unwrap();
    assert_eq!(lo[tf_idx], 1.0);
    assert_eq!(hi[tf_idx], 10.0);
    assert_eq!(lo[0], f64::NEG_INFINITY);
    assert_eq!(hi[0], f64::INFINITY);
}

#[test]
fn objective_integrates_exactly() {
    let n = 10;
    let basis = basis(n);
    let problem = build_pmoc(
        Arc::new(make_point_mass()),
        basis.clone(),
        rest_bc(1),
        TimeScaling::Fixed(2.0),
        RunningCost::TorqueSquared,
    )
    .unwrap();
    let q = GridFunction::zeros(1, n);

    // u ≡ 0 → 0.
    let x = problem.pack(&q, None, &GridFunction::zeros(1, n), 2.0, &[]);
    assert_abs_diff_eq!(problem.objective(&x).unwrap(), 0.0, epsilon = 1e-15);

    // u ≡ 1, t_f = 2 → ∫ 1 dτ = 2.
    let ones = GridFunction::sample(&basis, 1, |_| DVector::from_vec(vec![1.0]));
    let x = problem.pack(&q, None, &ones, 2.0, &[]);
    assert_abs_diff_eq!(problem.objective(&x).unwrap(), 2.0, epsilon = 1e-12);

    // u = s on the canonical interval with t_f = 2 → ∫ s² ds = 2/3.
    let ramp = GridFunction::sample(&basis, 1, |s| DVector::from_vec(vec![s]));
    let x = problem.pack(&q, None, &ramp, 2.0, &[]);
    assert_abs_diff_eq!(problem.objective(&x).unwrap(), 2.0 / 3.0, epsilon = 1e-12);

    // Cubic control, analytic ∫u² on [-1,1] scaled to t_f = 3.
    let problem = build_pmoc(
        Arc::new(make_point_mass()),
        basis.clone(),
        rest_bc(1),
        TimeScaling::Fixed(3.0),
        RunningCost::TorqueSquared,
    )
    .unwrap();
    let (a, b, c3, d) = (0.3, -1.1, 0.7, 0.4);
    let cubic =
        GridFunction::sample(&basis, 1, |s| {
            DVector::from_vec(vec![a + b * s + c3 * s * s + d * s * s * s])
        });
    let x = problem.pack(&q, None, &cubic, 3.0, &[]);
    // ∫(a+bs+cs²+ds³)² ds over [-1,1]:
    let exact = 2.0 * (a * a + (b * b + 2.0 * a * c3) / 3.0 + (c3 * c3 + 2.0 * b * d) / 5.0
        + d * d / 7.0);
    assert_abs_diff_eq!(problem.objective(&x).unwrap(), 1.5 * exact, epsilon = 1e-10);
}

#[test]
fn angle_targets_accept_wrapped_coordinates() {
    let n = 6;
    let basis = basis(n);
    let bc = BoundaryConditions::from_rest_state(DVector::zeros(1), DVector::zeros(1))
        .with_q_final(vec![TargetValue::Angle(std::f64::consts::PI)]);
    let problem = build_pmoc(
        Arc::new(make_point_mass()),
        basis.clone(),
        bc,
        TimeScaling::Fixed(1.0),
        RunningCost::TorqueSquared,
    )
    .unwrap();
    // Interpolant ending at 3π: equivalent to π modulo 2π.
    let target = 3.0 * std::f64::consts::PI;
    let q = GridFunction::sample(&basis, 1, |s| DVector::from_vec(vec![target * (s + 1.0) / 2.0]));
    let u = GridFunction::zeros(1, n);
    let x = problem.pack(&q, None, &u, 1.0, &[]);
    let r = problem.residual(&x).unwrap();
    // Last row is the angle target.
    assert_abs_diff_eq!(r[r.len() - 1], 0.0, epsilon = 1e-10);
}

#[test]
fn momentum_polynomial_of_uniform_motion_is_constant() {
    let n = 5;
    let basis = basis(n);
    let problem = build_pmoc(
        Arc::new(make_point_mass()),
        basis.clone(),
        rest_bc(1),
        TimeScaling::Fixed(2.0),
        RunningCost::TorqueSquared,
    )
    .unwrap();
    let q = GridFunction::sample(&basis, 1, |s| DVector::from_vec(vec![2.0 * (s + 1.0)]));
    let u = GridFunction::zeros(1, n);
    let x = problem.pack(&q, None, &u, 2.0, &[]);
    let p = problem.momentum_polynomial(&x).unwrap();
    for k in 0..n {
        assert_abs_diff_eq!(p.values()[(0, k)], 2.0, epsilon = 1e-12);
    }
    let zero = problem.pack(&GridFunction::zeros(1, n), None, &u, 2.0, &[]);
    let p = problem.momentum_polynomial(&zero).unwrap();
    assert!(p.values().abs().max() < 1e-14);
}

#[test]
fn param_constraint_row_is_emitted() {
    let model = crate::mechsys::make_3crobot(0.5, 0.5).unwrap();
    let basis = basis(4);
    let problem = build_pmoc(
        Arc::new(model),
        basis.clone(),
        rest_bc(3),
        TimeScaling::Fixed(2.0),
        RunningCost::TorqueSquared,
    )
    .unwrap()
    .optimize_params(vec![ParamConstraint::SumEquals(1.0)]);
    assert_eq!(problem.layout().n_params, 2);
    let q = GridFunction::zeros(3, 4);
    let u = GridFunction::zeros(1, 4);
    let x = problem.pack(&q, None, &u, 2.0, &[0.3, 0.6]);
    let r = problem.residual(&x).unwrap();
    assert_abs_diff_eq!(r[r.len() - 1], -0.1, epsilon = 1e-14);
    let (lo, hi) = problem.bounds();
    let idx = problem.layout().param_index(0);
    assert_eq!(lo[idx], 0.05);
    assert_eq!(hi[idx], 0.95);
}

#[test]
fn invalid_inputs_are_rejected() {
    let b = basis(4);
    assert!(matches!(
        build_pmoc(
            Arc::new(make_point_mass()),
            b.clone(),
            rest_bc(2),
            TimeScaling::Fixed(1.0),
            RunningCost::TorqueSquared,
        ),
        Err(SchemeError::BoundaryDimension { .. })
    ));
    assert!(matches!(
        build_pmoc(
            Arc::new(make_point_mass()),
            b.clone(),
            rest_bc(1),
            TimeScaling::Fixed(-1.0),
            RunningCost::TorqueSquared,
        ),
        Err(SchemeError::InvalidTimeBounds { .. })
    ));
    let problem = build_pmoc(
        Arc::new(make_point_mass()),
        b,
        rest_bc(1),
        TimeScaling::Fixed(1.0),
        RunningCost::TorqueSquared,
    )
    .unwrap();
    assert!(matches!(
        problem.residual(&DVector::zeros(3)),
        Err(SchemeError::DecisionDimension { .. })
    ));
}
