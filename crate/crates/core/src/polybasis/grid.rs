//! Barycentric Lagrange machinery on a fixed node set: differentiation
//! matrix, endpoint evaluation forms, and stable interpolation.

use nalgebra::{DMatrix, RowDVector};

/// Barycentric weights `λ_j = 1 / Π_{i≠j} (t_j - t_i)` for the node set.
pub fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut weights = vec![1.0; n];
    for j in 0..n {
        for i in 0..n {
            if i != j {
                weights[j] *= nodes[j] - nodes[i];
            }
        }
        weights[j] = 1.0 / weights[j];
    }
    weights
}

/// Spectral differentiation matrix `D` with `D_ij = (λ_j/λ_i)/(t_i - t_j)`
/// off the diagonal and `D_ii = -Σ_{j≠i} D_ij` (negative-sum trick), so `D`
/// annihilates constants to machine precision.
pub fn diff_matrix(nodes: &[f64], bary: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let mut d = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let entry = (bary[j] / bary[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = entry;
                row_sum += entry;
            }
        }
        d[(i, i)] = -row_sum;
    }
    d
}

/// Row vector of Lagrange cardinal values `ℓ_j(t)` at an arbitrary point,
/// via the barycentric second-form formula. Exact (a unit coordinate
/// vector) when `t` coincides with a node.
pub fn lagrange_values(nodes: &[f64], bary: &[f64], t: f64) -> RowDVector<f64> {
    let n = nodes.len();
    let mut row = RowDVector::<f64>::zeros(n);
    for j in 0..n {
        if t == nodes[j] {
            row[j] = 1.0;
            return row;
        }
    }
    let mut denom = 0.0;
    for j in 0..n {
        let term = bary[j] / (t - nodes[j]);
        row[j] = term;
        denom += term;
    }
    row / denom
}

/// Endpoint evaluation forms: row vectors interpolating to `t = -1` and
/// `t = +1`.
pub fn boundary_forms(nodes: &[f64], bary: &[f64]) -> (RowDVector<f64>, RowDVector<f64>) {
    (
        lagrange_values(nodes, bary, -1.0),
        lagrange_values(nodes, bary, 1.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn three_nodes() -> Vec<f64> {
        vec![-0.8, 0.1, 0.9]
    }

    #[test]
    fn differentiates_quadratics_exactly() {
        let nodes = three_nodes();
        let bary = barycentric_weights(&nodes);
        let d = diff_matrix(&nodes, &bary);
        // p(t) = 3t^2 - 2t + 1, p'(t) = 6t - 2.
        let p = nalgebra::DVector::from_iterator(
            3,
            nodes.iter().map(|t| 3.0 * t * t - 2.0 * t + 1.0),
        );
        let dp = &d * &p;
        for (k, t) in nodes.iter().enumerate() {
            assert_abs_diff_eq!(dp[k], 6.0 * t - 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn diff_matrix_annihilates_constants() {
        let nodes = three_nodes();
        let bary = barycentric_weights(&nodes);
        let d = diff_matrix(&nodes, &bary);
        for i in 0..3 {
            let row_sum: f64 = (0..3).map(|j| d[(i, j)]).sum();
            assert_abs_diff_eq!(row_sum, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials_and_nodes() {
        let nodes = three_nodes();
        let bary = barycentric_weights(&nodes);
        let values: Vec<f64> = nodes.iter().map(|t| 3.0 * t * t - 2.0 * t + 1.0).collect();
        // Off-node point: interpolant of a quadratic on 3 nodes is exact.
        let row = lagrange_values(&nodes, &bary, 0.37);
        let interp: f64 = row.iter().zip(&values).map(|(l, v)| l * v).sum();
        assert_abs_diff_eq!(interp, 3.0 * 0.37 * 0.37 - 2.0 * 0.37 + 1.0, epsilon = 1e-13);
        // On-node point: exact cardinal row.
        let row = lagrange_values(&nodes, &bary, nodes[1]);
        assert_eq!(row[0], 0.0);
        assert_eq!(row[1], 1.0);
        assert_eq!(row[2], 0.0);
    }

    #[test]
    fn boundary_forms_evaluate_endpoints() {
        let nodes = three_nodes();
        let bary = barycentric_weights(&nodes);
        let (l0, lf) = boundary_forms(&nodes, &bary);
        let values: Vec<f64> = nodes.iter().map(|t| t * t + t).collect();
        let at_left: f64 = l0.iter().zip(&values).map(|(l, v)| l * v).sum();
        let at_right: f64 = lf.iter().zip(&values).map(|(l, v)| l * v).sum();
        assert_abs_diff_eq!(at_left, 0.0, epsilon = 1e-13); // (-1)^2 + (-1)
        assert_abs_diff_eq!(at_right, 2.0, epsilon = 1e-13); // 1 + 1
    }
}
