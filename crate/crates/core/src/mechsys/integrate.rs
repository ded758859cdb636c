//! High-accuracy reference integration of the forward dynamics with an
//! adaptive Dormand–Prince 5(4) scheme. Used as an independent oracle for
//! verification and for shaping initial guesses — never inside the
//! optimizer.

use nalgebra::DVector;

use super::{forced_dynamics, LagrangianModel, ModelError};

/// States sampled at requested times along one integrated trajectory.
#[derive(Debug, Clone)]
pub struct TrajectorySamples {
    pub times: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
}

const MIN_STEP: f64 = 1e-13;
const SAFETY: f64 = 0.9;

/// Dormand–Prince 5(4) coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

/// Integrate under a generalized-force law `force(t, q, v)` (a full
/// `dim_q`-vector applied directly on the configuration directions, which
/// may include state feedback), sampling the state at `sample_times`
/// (ascending, within `[0, t_f]`).
pub fn simulate_generalized<F>(
    model: &dyn LagrangianModel,
    q0: &DVector<f64>,
    v0: &DVector<f64>,
    force: F,
    t_f: f64,
    sample_times: &[f64],
    tol: f64,
) -> Result<TrajectorySamples, ModelError>
where
    F: Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64>,
{
    let d = model.dim_q();
    let deriv = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>, ModelError> {
        let q = y.rows(0, d).into_owned();
        let v = y.rows(d, d).into_owned();
        let a = forced_dynamics(model, &q, &v, &force(t, &q, &v))?;
        let mut dy = DVector::zeros(2 * d);
        dy.rows_mut(0, d).copy_from(&v);
        dy.rows_mut(d, d).copy_from(&a);
        Ok(dy)
    };

    let mut y = DVector::zeros(2 * d);
    y.rows_mut(0, d).copy_from(q0);
    y.rows_mut(d, d).copy_from(v0);
    let mut t = 0.0;
    let mut h: f64 = (t_f / 100.0).min(0.1).max(1e-6);

    let mut out = TrajectorySamples {
        times: Vec::with_capacity(sample_times.len()),
        q: Vec::with_capacity(sample_times.len()),
        v: Vec::with_capacity(sample_times.len()),
    };
    let mut next_sample = 0;
    let record = |out: &mut TrajectorySamples, t: f64, y: &DVector<f64>| {
        out.times.push(t);
        out.q.push(y.rows(0, d).into_owned());
        out.v.push(y.rows(d, d).into_owned());
    };
    while next_sample < sample_times.len() && sample_times[next_sample] <= 0.0 {
        record(&mut out, sample_times[next_sample], &y);
        next_sample += 1;
    }

    let mut k: Vec<DVector<f64>> = vec![DVector::zeros(2 * d); 7];
    while t < t_f {
        // Land exactly on the next sample time and on t_f.
        let mut target = t_f;
        if next_sample < sample_times.len() {
            target = target.min(sample_times[next_sample]);
        }
        h = h.min(target - t).max(MIN_STEP);

        k[0] = deriv(t, &y)?;
        let mut failed_shrinks = 0;
        loop {
            for stage in 0..6 {
                let mut arg = y.clone();
                for (j, kj) in k.iter().enumerate().take(stage + 1) {
                    if A[stage][j] != 0.0 {
                        arg += kj * (h * A[stage][j]);
                    }
                }
                k[stage + 1] = deriv(t + C[stage] * h, &arg)?;
            }
            let mut y5 = y.clone();
            let mut y4 = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if B5[j] != 0.0 {
                    y5 += kj * (h * B5[j]);
                }
                if B4[j] != 0.0 {
                    y4 += kj * (h * B4[j]);
                }
            }
            let mut err: f64 = 0.0;
            for i in 0..2 * d {
                let scale = tol + tol * y[i].abs().max(y5[i].abs());
                let e = (y5[i] - y4[i]) / scale;
                err += e * e;
            }
            err = (err / (2 * d) as f64).sqrt();

            if err <= 1.0 || h <= MIN_STEP {
                t += h;
                y = y5;
                let factor = if err > 0.0 {
                    (SAFETY * err.powf(-0.2)).clamp(0.2, 5.0)
                } else {
                    5.0
                };
                h = (h * factor).min(t_f.max(1.0));
                break;
            }
            h = (h * (SAFETY * err.powf(-0.2)).clamp(0.2, 1.0)).max(MIN_STEP);
            failed_shrinks += 1;
            if failed_shrinks > 60 {
                return Err(ModelError::StepSizeCollapse { t });
            }
        }

        while next_sample < sample_times.len()
            && sample_times[next_sample] <= t + 1e-14 * t_f.max(1.0)
        {
            record(&mut out, sample_times[next_sample], &y);
            next_sample += 1;
        }
    }
    while next_sample < sample_times.len() {
        record(&mut out, sample_times[next_sample], &y);
        next_sample += 1;
    }
    Ok(out)
}

/// Integrate under a control signal routed through the actuation map,
/// i.e. generalized force `B u(t)`; tolerance defaults to `1e-10` when
/// `tol` is not finite.
pub fn reference_simulate<F>(
    model: &dyn LagrangianModel,
    q0: &DVector<f64>,
    v0: &DVector<f64>,
    control: F,
    t_f: f64,
    sample_times: &[f64],
    tol: f64,
) -> Result<TrajectorySamples, ModelError>
where
    F: Fn(f64) -> DVector<f64>,
{
    let tol = if tol.is_finite() && tol > 0.0 { tol } else { 1e-10 };
    let b = model.actuation().clone();
    simulate_generalized(
        model,
        q0,
        v0,
        |t, _, _| &b * control(t),
        t_f,
        sample_times,
        tol,
    )
}
