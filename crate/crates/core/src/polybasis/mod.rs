//! Orthogonal-polynomial infrastructure: families, Gauss quadrature,
//! barycentric interpolation and differentiation, and the pullback of the
//! plain `L²` inner product onto the collocation grid.
//!
//! Everything lives on the canonical interval `[-1, 1]`; physical time
//! enters only through the affine rescaling applied by the discretization
//! layer.

pub mod family;
pub mod grid;
pub mod metric;
pub mod quadrature;

pub use family::{build_family, FamilyKind, PolynomialFamily};
pub use metric::{conjugate_diff, legendre_metric, CONDITION_ERROR, CONDITION_WARN};
pub use quadrature::golub_welsch;

use nalgebra::{DMatrix, DVector, RowDVector};
use thiserror::Error;

/// Failure modes of basis construction.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum BasisError {
    #[error("grid must have at least one node (got {nodes})")]
    InvalidOrder { nodes: usize },
    #[error("symmetric eigensolver failed on the {nodes}-node Jacobi operator")]
    EigenFailure { nodes: usize },
    #[error("singular basis: condition number {condition:.3e} exceeds 1e12")]
    SingularBasis { condition: f64 },
    #[error("metric is not positive-definite")]
    SingularMetric,
    #[error("grid nodes must be distinct")]
    DuplicateNodes,
}

/// An orthogonal-polynomial collocation basis: the Gauss root grid of a
/// family, with quadrature weights, barycentric data, the differentiation
/// matrix, endpoint evaluation forms, and the `L²` metric pulled back from
/// an equal-order Gauss-Legendre grid.
///
/// Immutable after construction; shared freely across threads.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    family: PolynomialFamily,
    nodes: Vec<f64>,
    quad_weights: Vec<f64>,
    bary: Vec<f64>,
    diff: DMatrix<f64>,
    diff_conjugate: DMatrix<f64>,
    metric: DMatrix<f64>,
    l0: RowDVector<f64>,
    lf: RowDVector<f64>,
    boundary_bilinear: DMatrix<f64>,
    condition_g: f64,
    condition_a: f64,
    warnings: Vec<String>,
}

impl SpectralBasis {
    /// Build the `n`-node basis for `kind`.
    pub fn new(kind: FamilyKind, n: usize) -> Result<Self, BasisError> {
        let family = build_family(kind);
        let rule = golub_welsch(&family, n)?;
        for k in 1..n {
            if rule.nodes[k] <= rule.nodes[k - 1] {
                return Err(BasisError::DuplicateNodes);
            }
        }
        let bary = grid::barycentric_weights(&rule.nodes);
        let diff = grid::diff_matrix(&rule.nodes, &bary);
        let (l0, lf) = grid::boundary_forms(&rule.nodes, &bary);
        let pullback = legendre_metric(&family, &rule.nodes, &rule.weights)?;
        let diff_conjugate = conjugate_diff(&diff, &pullback.g)?;
        let boundary_bilinear = lf.transpose() * &lf - l0.transpose() * &l0;
        Ok(Self {
            family,
            nodes: rule.nodes,
            quad_weights: rule.weights,
            bary,
            diff,
            diff_conjugate,
            metric: pullback.g,
            l0,
            lf,
            boundary_bilinear,
            condition_g: pullback.condition_g,
            condition_a: pullback.condition_a,
            warnings: pullback.warnings,
        })
    }

    pub fn family(&self) -> &PolynomialFamily {
        &self.family
    }

    /// Number of grid nodes (polynomial space is `R[t]_N`, dimension `N`).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Gauss nodes, ascending in `(-1, 1)`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Gauss weights of the family's weighted quadrature rule.
    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Differentiation matrix `D`.
    pub fn diff(&self) -> &DMatrix<f64> {
        &self.diff
    }

    /// Metric-adjoint differentiation matrix `D† = G⁻¹ Dᵀ G`.
    pub fn diff_conjugate(&self) -> &DMatrix<f64> {
        &self.diff_conjugate
    }

    /// Pullback metric `G` of the plain `L²` inner product.
    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    /// Evaluation covector at `t = -1`.
    pub fn l0(&self) -> &RowDVector<f64> {
        &self.l0
    }

    /// Evaluation covector at `t = +1`.
    pub fn lf(&self) -> &RowDVector<f64> {
        &self.lf
    }

    /// Endpoint bilinear form `E = Lfᵀ Lf − L0ᵀ L0`; satisfies the exact
    /// integration-by-parts identity `G D + Dᵀ G = E` on `R[t]_N`.
    pub fn boundary_bilinear(&self) -> &DMatrix<f64> {
        &self.boundary_bilinear
    }

    /// Spectral condition number of the metric.
    pub fn condition_g(&self) -> f64 {
        self.condition_g
    }

    /// Condition number of the grid-to-grid basis change used to build the
    /// metric.
    pub fn condition_a(&self) -> f64 {
        self.condition_a
    }

    /// Conditioning warnings raised during construction, if any.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Lagrange cardinal values `ℓ_j(t)` as a row covector.
    pub fn cardinal_row(&self, t: f64) -> RowDVector<f64> {
        grid::lagrange_values(&self.nodes, &self.bary, t)
    }

    /// `∫_{-1}^{1} f dt` for the interpolant of the nodal samples `f`.
    pub fn integrate(&self, samples: &DVector<f64>) -> f64 {
        let ones = DVector::from_element(self.len(), 1.0);
        (ones.transpose() * &self.metric * samples)[(0, 0)]
    }
}

/// Nodal samples of a vector-valued polynomial of degree `< N`: one row per
/// channel, one column per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: DMatrix<f64>,
}

impl GridFunction {
    /// Wrap a `channels × N` sample matrix.
    pub fn new(values: DMatrix<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(channels: usize, n: usize) -> Self {
        Self {
            values: DMatrix::zeros(channels, n),
        }
    }

    /// Sample a closure `f(t) -> channel vector` on the basis grid.
    pub fn sample<F>(basis: &SpectralBasis, channels: usize, f: F) -> Self
    where
        F: Fn(f64) -> DVector<f64>,
    {
        let mut values = DMatrix::zeros(channels, basis.len());
        for (k, &t) in basis.nodes().iter().enumerate() {
            values.set_column(k, &f(t));
        }
        Self { values }
    }

    pub fn channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.values
    }

    /// Barycentric evaluation of all channels at `t`.
    pub fn interpolate(&self, basis: &SpectralBasis, t: f64) -> DVector<f64> {
        debug_assert_eq!(self.len(), basis.len());
        let row = basis.cardinal_row(t);
        let mut out = DVector::zeros(self.channels());
        for c in 0..self.channels() {
            let mut acc = 0.0;
            for k in 0..self.len() {
                acc += row[k] * self.values[(c, k)];
            }
            out[c] = acc;
        }
        out
    }

    /// Channel-wise grid derivative: samples of `d/dt` of each channel's
    /// interpolant.
    pub fn derivative(&self, basis: &SpectralBasis) -> GridFunction {
        GridFunction {
            values: &self.values * basis.diff().transpose(),
        }
    }
}
