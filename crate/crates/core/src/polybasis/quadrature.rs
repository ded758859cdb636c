//! Gauss quadrature rules from the symmetric Jacobi (Golub–Welsch)
//! eigenproblem.

use nalgebra::{DMatrix, SymmetricEigen};

use super::family::PolynomialFamily;
use super::BasisError;

/// Nodes and weights of an `n`-point Gauss rule, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Compute the `n`-point Gauss rule for `family` by diagonalizing the
/// symmetric Jacobi matrix. Weights are `mass * v_0^2` for the first
/// component `v_0` of each normalized eigenvector.
///
/// Gauss nodes of a symmetric weight come in `±` pairs; floating-point
/// eigensolving breaks the pairing in the last bits, so nodes are
/// re-symmetrized as `(t_k - t_{n+1-k})/2` (with paired weight averaging)
/// before returning. This keeps reversal symmetry exact downstream.
pub fn golub_welsch(family: &PolynomialFamily, n: usize) -> Result<QuadratureRule, BasisError> {
    if n == 0 {
        return Err(BasisError::InvalidOrder { nodes: n });
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let beta = family.jacobi_offdiagonal(k);
        jacobi[(k - 1, k)] = beta;
        jacobi[(k, k - 1)] = beta;
    }
    let eigen = SymmetricEigen::try_new(jacobi, 1e-14, 10_000)
        .ok_or(BasisError::EigenFailure { nodes: n })?;

    let mass = family.weight_mass();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eigen.eigenvectors[(0, j)];
            (eigen.eigenvalues[j], mass * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("eigenvalues are finite"));

    // Symmetrize node/weight pairs across the origin.
    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for k in 0..n / 2 {
        let mirror = n - 1 - k;
        let node = 0.5 * (nodes[k] - nodes[mirror]);
        nodes[k] = node;
        nodes[mirror] = -node;
        let weight = 0.5 * (weights[k] + weights[mirror]);
        weights[k] = weight;
        weights[mirror] = weight;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    Ok(QuadratureRule { nodes, weights })
}
