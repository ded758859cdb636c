//! Pullback of the plain `L²([-1,1])` inner product onto an arbitrary
//! Gauss root grid.

use nalgebra::DMatrix;

use super::family::{build_family, FamilyKind, PolynomialFamily};
use super::quadrature::golub_welsch;
use super::BasisError;

/// Condition number above which a basis is rejected outright.
pub const CONDITION_ERROR: f64 = 1e12;
/// Condition number above which a warning is attached but work proceeds.
pub const CONDITION_WARN: f64 = 1e8;

/// Result of the metric pullback: the Gram matrix of the Lagrange cardinal
/// functions under `∫ p q dt`, plus conditioning diagnostics.
#[derive(Debug, Clone)]
pub struct PullbackMetric {
    /// Symmetric positive-definite `N×N` Gram matrix.
    pub g: DMatrix<f64>,
    /// Spectral condition number of `g`.
    pub condition_g: f64,
    /// 2-norm condition number of the grid-to-grid basis change `A`.
    pub condition_a: f64,
    /// Conditioning warnings (empty when both condition numbers are below
    /// the warning threshold).
    pub warnings: Vec<String>,
}

/// Build the `L²` metric on the host grid by changing basis through the
/// host family's orthogonal polynomials and evaluating the inner product
/// with an `N`-point Gauss–Legendre rule.
///
/// With `B^b_{im} = P_m(t^b_i)` on the host grid and `B^l` the same values
/// on the Legendre grid, the nodal map to the Legendre grid is
/// `A = B^l · diag(1/γ^b) · (B^b)ᵀ · diag(w^b)` and the metric is
/// `G = Aᵀ · diag(w^l) · A`. Both factors are quadrature-exact on
/// polynomials of degree `< N`, so `xᵀ G y = ∫ p q dt` exactly (up to
/// roundoff) for samples `x`, `y` of `p`, `q` in that space.
pub fn legendre_metric(
    family: &PolynomialFamily,
    nodes: &[f64],
    weights: &[f64],
) -> Result<PullbackMetric, BasisError> {
    let n = nodes.len();
    debug_assert_eq!(weights.len(), n);
    let legendre = build_family(FamilyKind::Legendre);
    let legendre_rule = golub_welsch(&legendre, n)?;

    let mut host_values = DMatrix::<f64>::zeros(n, n);
    for (i, &t) in nodes.iter().enumerate() {
        for (m, value) in family.evaluate_sequence(n, t).into_iter().enumerate() {
            host_values[(i, m)] = value;
        }
    }
    let mut legendre_values = DMatrix::<f64>::zeros(n, n);
    for (i, &t) in legendre_rule.nodes.iter().enumerate() {
        for (m, value) in family.evaluate_sequence(n, t).into_iter().enumerate() {
            legendre_values[(i, m)] = value;
        }
    }

    // Modal analysis on the host grid: coefficients c_m = ⟨f, P_m⟩_w / γ_m
    // by the host Gauss rule, exact for f of degree < N.
    let mut analysis = host_values.transpose();
    for m in 0..n {
        let scale = 1.0 / family.norm_constant(m);
        for i in 0..n {
            analysis[(m, i)] *= scale * weights[i];
        }
    }
    let a = &legendre_values * analysis;

    let mut g = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += legendre_rule.weights[k] * a[(k, i)] * a[(k, j)];
            }
            g[(i, j)] = acc;
        }
    }
    // Symmetrize away the last bits of roundoff; G is symmetric by
    // construction.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = avg;
            g[(j, i)] = avg;
        }
    }

    let condition_a = spectral_condition(&a).ok_or(BasisError::SingularBasis {
        condition: f64::INFINITY,
    })?;
    let condition_g = symmetric_condition(&g).ok_or(BasisError::SingularBasis {
        condition: f64::INFINITY,
    })?;
    let worst = condition_a.max(condition_g);
    if worst > CONDITION_ERROR {
        return Err(BasisError::SingularBasis { condition: worst });
    }
    let mut warnings = Vec::new();
    if condition_a > CONDITION_WARN {
        warnings.push(format!(
            "basis-change condition number {condition_a:.3e} exceeds {CONDITION_WARN:.0e}"
        ));
    }
    if condition_g > CONDITION_WARN {
        warnings.push(format!(
            "metric condition number {condition_g:.3e} exceeds {CONDITION_WARN:.0e}"
        ));
    }
    Ok(PullbackMetric {
        g,
        condition_g,
        condition_a,
        warnings,
    })
}

/// `G⁻¹ Dᵀ G`, the adjoint of `D` under the metric `G`, computed by a
/// Cholesky solve.
pub fn conjugate_diff(d: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>, BasisError> {
    let chol = g
        .clone()
        .cholesky()
        .ok_or(BasisError::SingularMetric)?;
    let rhs = d.transpose() * g;
    Ok(chol.solve(&rhs))
}

fn spectral_condition(m: &DMatrix<f64>) -> Option<f64> {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min <= 0.0 || !min.is_finite() {
        None
    } else {
        Some(max / min)
    }
}

fn symmetric_condition(g: &DMatrix<f64>) -> Option<f64> {
    let eigen = g.clone().symmetric_eigen();
    let max = eigen.eigenvalues.max();
    let min = eigen.eigenvalues.min();
    if min <= 0.0 || !min.is_finite() {
        None
    } else {
        Some(max / min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::family::{build_family, FamilyKind};
    use crate::polybasis::quadrature::golub_welsch;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn metric_for(kind: FamilyKind, n: usize) -> (Vec<f64>, PullbackMetric) {
        let family = build_family(kind);
        let rule = golub_welsch(&family, n).unwrap();
        let metric = legendre_metric(&family, &rule.nodes, &rule.weights).unwrap();
        (rule.nodes, metric)
    }

    #[test]
    fn single_node_metric_is_total_length() {
        let (_, metric) = metric_for(FamilyKind::Legendre, 1);
        assert_abs_diff_eq!(metric.g[(0, 0)], 2.0, epsilon = 1e-13);
    }

    #[test]
    fn legendre_metric_on_legendre_grid_is_diagonal_weights() {
        // On its own grid the Legendre pullback reduces to the quadrature
        // weights themselves.
        let family = build_family(FamilyKind::Legendre);
        let rule = golub_welsch(&family, 4).unwrap();
        let metric = legendre_metric(&family, &rule.nodes, &rule.weights).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { rule.weights[i] } else { 0.0 };
                assert_abs_diff_eq!(metric.g[(i, j)], expected, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn chebyshev_metric_integrates_t_squared() {
        let (nodes, metric) = metric_for(FamilyKind::Chebyshev, 3);
        let p = DVector::from_iterator(3, nodes.iter().copied());
        let quad = (p.transpose() * &metric.g * &p)[(0, 0)];
        assert_abs_diff_eq!(quad, 2.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn chebyshev_metric_matches_reference_quadrature() {
        // Random degree-7 polynomials on the N=8 Chebyshev grid against a
        // 64-point Gauss-Legendre reference for ∫pq dt.
        let n = 8;
        let (nodes, metric) = metric_for(FamilyKind::Chebyshev, n);
        let coeff_p: Vec<f64> = vec![0.3, -1.2, 0.7, 0.05, -0.4, 1.1, -0.9, 0.2];
        let coeff_q: Vec<f64> = vec![-0.8, 0.6, 1.3, -0.2, 0.9, -0.5, 0.1, 0.4];
        let eval = |c: &[f64], t: f64| c.iter().rev().fold(0.0, |acc, &ck| acc * t + ck);
        let p = DVector::from_iterator(n, nodes.iter().map(|&t| eval(&coeff_p, t)));
        let q = DVector::from_iterator(n, nodes.iter().map(|&t| eval(&coeff_q, t)));
        let quad = (p.transpose() * &metric.g * &q)[(0, 0)];

        let reference_rule = golub_welsch(&build_family(FamilyKind::Legendre), 64).unwrap();
        let reference: f64 = reference_rule
            .nodes
            .iter()
            .zip(&reference_rule.weights)
            .map(|(&t, &w)| w * eval(&coeff_p, t) * eval(&coeff_q, t))
            .sum();
        assert_abs_diff_eq!(quad, reference, epsilon = 1e-10);
    }

    #[test]
    fn metric_is_positive_definite_and_well_conditioned() {
        for kind in [FamilyKind::Chebyshev, FamilyKind::Legendre] {
            let (_, metric) = metric_for(kind, 16);
            assert!(metric.g.clone().cholesky().is_some());
            assert!(metric.condition_g < CONDITION_WARN);
            assert!(metric.condition_a < CONDITION_WARN);
            assert!(metric.warnings.is_empty());
        }
    }

    #[test]
    fn conjugate_diff_hand_oracle_on_two_nodes() {
        // On the 2-node Legendre grid G = I, so D† = Dᵀ with
        // D = [[-s, s], [-s, s]], s = √3/2.
        let family = build_family(FamilyKind::Legendre);
        let rule = golub_welsch(&family, 2).unwrap();
        let bary = crate::polybasis::grid::barycentric_weights(&rule.nodes);
        let d = crate::polybasis::grid::diff_matrix(&rule.nodes, &bary);
        let metric = legendre_metric(&family, &rule.nodes, &rule.weights).unwrap();
        let dagger = conjugate_diff(&d, &metric.g).unwrap();
        let s = 3.0_f64.sqrt() / 2.0;
        assert_abs_diff_eq!(dagger[(0, 0)], -s, epsilon = 1e-12);
        assert_abs_diff_eq!(dagger[(0, 1)], -s, epsilon = 1e-12);
        assert_abs_diff_eq!(dagger[(1, 0)], s, epsilon = 1e-12);
        assert_abs_diff_eq!(dagger[(1, 1)], s, epsilon = 1e-12);
    }

    #[test]
    fn conjugation_is_an_involution() {
        let family = build_family(FamilyKind::Chebyshev);
        let rule = golub_welsch(&family, 7).unwrap();
        let bary = crate::polybasis::grid::barycentric_weights(&rule.nodes);
        let d = crate::polybasis::grid::diff_matrix(&rule.nodes, &bary);
        let metric = legendre_metric(&family, &rule.nodes, &rule.weights).unwrap();
        let dagger = conjugate_diff(&d, &metric.g).unwrap();
        let back = conjugate_diff(&dagger, &metric.g).unwrap();
        assert!((&back - &d).abs().max() < 1e-9);
    }
}
