//! Planar pendulum chains: point mass at the distal end of each link, the
//! first angle measured absolutely from the downward vertical, subsequent
//! angles relative to the previous link.

use nalgebra::{DMatrix, DVector};

use super::{DesignParam, LagrangianModel, ModelError};

/// An `n`-link planar pendulum chain with torque actuators on a subset of
/// joints.
///
/// Non-dimensionalized: first link has unit mass and length and gravity is
/// `1.0`. Every link carries a unit point mass at its distal end.
#[derive(Debug, Clone)]
pub struct ChainPendulum {
    name: String,
    lengths: Vec<f64>,
    masses: Vec<f64>,
    gravity: f64,
    /// Suffix mass sums `μ_j = Σ_{i ≥ j} m_i`.
    suffix_mass: Vec<f64>,
    actuation: DMatrix<f64>,
    design_params: Vec<DesignParam>,
    /// Link index each design parameter controls.
    design_links: Vec<usize>,
}

impl ChainPendulum {
    /// Build a chain with the given link lengths, unit point masses, and
    /// torque actuators on the listed joints (0-based).
    pub fn new(
        name: &str,
        lengths: &[f64],
        actuated_joints: &[usize],
        gravity: f64,
    ) -> Result<Self, ModelError> {
        for &l in lengths {
            if l <= 0.0 {
                return Err(ModelError::NonPositiveLength { value: l });
            }
        }
        let n = lengths.len();
        let masses = vec![1.0; n];
        let mut actuation = DMatrix::zeros(n, actuated_joints.len());
        for (col, &joint) in actuated_joints.iter().enumerate() {
            actuation[(joint, col)] = 1.0;
        }
        let mut chain = Self {
            name: name.to_string(),
            lengths: lengths.to_vec(),
            masses,
            gravity,
            suffix_mass: Vec::new(),
            actuation,
            design_params: Vec::new(),
            design_links: Vec::new(),
        };
        chain.recompute_suffix_masses();
        Ok(chain)
    }

    fn recompute_suffix_masses(&mut self) {
        let n = self.lengths.len();
        let mut suffix = vec![0.0; n];
        let mut acc = 0.0;
        for j in (0..n).rev() {
            acc += self.masses[j];
            suffix[j] = acc;
        }
        self.suffix_mass = suffix;
    }

    /// Mark a link length as a free design parameter.
    fn expose_length(&mut self, link: usize, name: &str, lower: f64, upper: f64) {
        self.design_params.push(DesignParam {
            name: name.to_string(),
            lower,
            upper,
            default: self.lengths[link],
        });
        self.design_links.push(link);
    }

    /// Copy with gravity replaced; used for momentum-conservation studies
    /// where the first angle must become cyclic.
    pub fn with_gravity(&self, gravity: f64) -> Self {
        let mut out = self.clone();
        out.gravity = gravity;
        out
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    /// Absolute link angles `φ = S q` (cumulative sums of joint angles).
    fn absolute_angles(&self, q: &DVector<f64>) -> DVector<f64> {
        let mut phi = q.clone();
        for i in 1..phi.len() {
            phi[i] += phi[i - 1];
        }
        phi
    }

    /// Inertia in absolute-angle coordinates:
    /// `M_φ[j][k] = μ_max(j,k) l_j l_k cos(φ_j − φ_k)`.
    fn inertia_absolute(&self, phi: &DVector<f64>) -> DMatrix<f64> {
        let n = phi.len();
        DMatrix::from_fn(n, n, |j, k| {
            self.suffix_mass[j.max(k)] * self.lengths[j] * self.lengths[k]
                * (phi[j] - phi[k]).cos()
        })
    }

    /// `Sᵀ x`: suffix sums (adjoint of the cumulative-sum map).
    fn suffix_sum(x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        for i in (0..out.len().saturating_sub(1)).rev() {
            out[i] += out[i + 1];
        }
        out
    }
}

impl LagrangianModel for ChainPendulum {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim_q(&self) -> usize {
        self.lengths.len()
    }

    fn dim_u(&self) -> usize {
        self.actuation.ncols()
    }

    fn lagrangian(&self, q: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let phi = self.absolute_angles(q);
        let w = self.absolute_angles(v);
        let m_phi = self.inertia_absolute(&phi);
        let kinetic = 0.5 * (w.transpose() * &m_phi * &w)[(0, 0)];
        let potential: f64 = (0..phi.len())
            .map(|j| -self.gravity * self.suffix_mass[j] * self.lengths[j] * phi[j].cos())
            .sum();
        kinetic - potential
    }

    fn l_q(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = q.len();
        let phi = self.absolute_angles(q);
        let w = self.absolute_angles(v);
        // ∂L/∂φ_m = −l_m w_m Σ_k μ_max(m,k) l_k sin(φ_m − φ_k) w_k
        //           − g μ_m l_m sin(φ_m), then pull back through Sᵀ.
        let mut dl_dphi = DVector::zeros(n);
        for m in 0..n {
            let mut coupling = 0.0;
            for k in 0..n {
                coupling += self.suffix_mass[m.max(k)]
                    * self.lengths[k]
                    * (phi[m] - phi[k]).sin()
                    * w[k];
            }
            dl_dphi[m] = -self.lengths[m] * w[m] * coupling
                - self.gravity * self.suffix_mass[m] * self.lengths[m] * phi[m].sin();
        }
        Self::suffix_sum(&dl_dphi)
    }

    fn l_v(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let phi = self.absolute_angles(q);
        let w = self.absolute_angles(v);
        let momentum_abs = self.inertia_absolute(&phi) * w;
        Self::suffix_sum(&momentum_abs)
    }

    fn l_vv(&self, q: &DVector<f64>, _v: &DVector<f64>) -> DMatrix<f64> {
        let n = q.len();
        let phi = self.absolute_angles(q);
        let m_phi = self.inertia_absolute(&phi);
        // Sᵀ M_φ S without forming S: cumulative sums along both axes.
        let mut out = m_phi;
        for j in 0..n {
            for k in (0..n - 1).rev() {
                let add = out[(j, k + 1)];
                out[(j, k)] += add;
            }
        }
        for k in 0..n {
            for j in (0..n - 1).rev() {
                let add = out[(j + 1, k)];
                out[(j, k)] += add;
            }
        }
        out
    }

    fn l_qv(&self, q: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
        let n = q.len();
        let phi = self.absolute_angles(q);
        let w = self.absolute_angles(v);
        // N_φ[j][m] = ∂(M_φ w)_j / ∂φ_m, then Sᵀ N_φ S.
        let mut n_phi = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut diag = 0.0;
            for k in 0..n {
                diag += self.suffix_mass[j.max(k)]
                    * self.lengths[k]
                    * (phi[j] - phi[k]).sin()
                    * w[k];
            }
            for m in 0..n {
                let mut entry = self.suffix_mass[j.max(m)]
                    * self.lengths[j]
                    * self.lengths[m]
                    * (phi[j] - phi[m]).sin()
                    * w[m];
                if m == j {
                    entry -= self.lengths[j] * diag;
                }
                n_phi[(j, m)] = entry;
            }
        }
        for j in 0..n {
            for k in (0..n - 1).rev() {
                let add = n_phi[(j, k + 1)];
                n_phi[(j, k)] += add;
            }
        }
        for k in 0..n {
            for j in (0..n - 1).rev() {
                let add = n_phi[(j + 1, k)];
                n_phi[(j, k)] += add;
            }
        }
        n_phi
    }

    fn actuation(&self) -> &DMatrix<f64> {
        &self.actuation
    }

    fn design_params(&self) -> &[DesignParam] {
        &self.design_params
    }

    fn rebuild(&self, params: &[f64]) -> Result<Box<dyn LagrangianModel>, ModelError> {
        if params.len() != self.design_params.len() {
            return Err(ModelError::DesignParamMismatch {
                expected: self.design_params.len(),
                got: params.len(),
            });
        }
        let mut out = self.clone();
        for (value, &link) in params.iter().zip(&self.design_links) {
            if *value <= 0.0 {
                return Err(ModelError::NonPositiveLength { value: *value });
            }
            out.lengths[link] = *value;
        }
        Ok(Box::new(out))
    }
}

/// Single unit pendulum, fully actuated; the workhorse verification
/// fixture.
pub fn make_pendulum() -> ChainPendulum {
    ChainPendulum::new("pendulum", &[1.0], &[0], 1.0).expect("static geometry is valid")
}

/// Two-link chain with a torque actuator on the elbow only.
pub fn make_acrobot() -> ChainPendulum {
    ChainPendulum::new("acrobot", &[1.0, 1.0], &[1], 1.0).expect("static geometry is valid")
}

/// Three-link chain, links `1.0, l2, l3`, actuated at the joint farthest
/// from the ground; `l2` and `l3` are exposed as design parameters.
pub fn make_3crobot(l2: f64, l3: f64) -> Result<ChainPendulum, ModelError> {
    let mut chain = ChainPendulum::new("3crobot", &[1.0, l2, l3], &[2], 1.0)?;
    chain.expose_length(1, "l2", 0.05, 0.95);
    chain.expose_length(2, "l3", 0.05, 0.95);
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechsys::energy;
    use approx::assert_abs_diff_eq;

    #[test]
    fn acrobot_rest_lagrangian_is_minus_potential() {
        let model = make_acrobot();
        let zero = DVector::zeros(2);
        // Potential at the hanging rest state is −(μ_1 l_1 + μ_2 l_2) = −3.
        assert_abs_diff_eq!(model.lagrangian(&zero, &zero), 3.0, epsilon = 1e-14);
        assert!(model.l_v(&zero, &zero).abs().max() < 1e-14);
    }

    #[test]
    fn three_link_inertia_matches_hand_derivation() {
        // q = 0, unit masses, lengths (1, 0.5, 0.5): suffix masses (3,2,1)
        // give Sᵀ M_φ S computed by hand.
        let model = make_3crobot(0.5, 0.5).unwrap();
        let m = model.l_vv(&DVector::zeros(3), &DVector::zeros(3));
        let expected = [
            [7.25, 2.75, 1.0],
            [2.75, 1.25, 0.5],
            [1.0, 0.5, 0.25],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(m[(i, j)], expected[i][j], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn three_link_rest_is_equilibrium() {
        let model = make_3crobot(0.4, 0.6).unwrap();
        let lq = model.l_q(&DVector::zeros(3), &DVector::zeros(3));
        assert!(lq.abs().max() < 1e-14);
    }

    #[test]
    fn rejects_non_positive_lengths() {
        assert!(make_3crobot(0.0, 0.5).is_err());
        assert!(make_3crobot(0.5, -1.0).is_err());
    }

    #[test]
    fn rebuild_replaces_design_lengths() {
        let model = make_3crobot(0.5, 0.5).unwrap();
        let rebuilt = model.rebuild(&[0.3, 0.7]).unwrap();
        let q = DVector::from_vec(vec![0.2, -0.1, 0.4]);
        let v = DVector::from_vec(vec![0.1, 0.3, -0.2]);
        let direct = make_3crobot(0.3, 0.7).unwrap();
        assert_abs_diff_eq!(
            rebuilt.lagrangian(&q, &v),
            direct.lagrangian(&q, &v),
            epsilon = 1e-14
        );
        assert!(model.rebuild(&[0.3]).is_err());
    }

    #[test]
    fn gravity_free_chain_has_cyclic_first_angle() {
        // With gravity off, L depends only on relative angles, so shifting
        // the first coordinate leaves it unchanged and L_q[0] = 0.
        let model = make_acrobot().with_gravity(0.0);
        let q = DVector::from_vec(vec![0.9, -0.4]);
        let v = DVector::from_vec(vec![0.2, 1.1]);
        let mut shifted = q.clone();
        shifted[0] += 0.777;
        assert_abs_diff_eq!(
            model.lagrangian(&q, &v),
            model.lagrangian(&shifted, &v),
            epsilon = 1e-13
        );
        assert_abs_diff_eq!(model.l_q(&q, &v)[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn energy_is_kinetic_plus_potential() {
        let model = make_pendulum();
        let q = DVector::from_vec(vec![0.6]);
        let v = DVector::from_vec(vec![1.3]);
        // Single link: E = ½ v² − cos θ.
        assert_abs_diff_eq!(
            energy(&model, &q, &v),
            0.5 * 1.3 * 1.3 - 0.6_f64.cos(),
            epsilon = 1e-14
        );
    }
}
