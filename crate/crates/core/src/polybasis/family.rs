//! Orthogonal-polynomial families on `[-1, 1]` and their three-term
//! recurrences.

use std::f64::consts::PI;

/// Supported orthogonal-polynomial families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    /// Chebyshev polynomials of the first kind, weight `1/sqrt(1 - t^2)`.
    Chebyshev,
    /// Legendre polynomials, weight `1`.
    Legendre,
}

/// Coefficients of one step of the recurrence
/// `P_n = (a_n t + b_n) P_{n-1} - c_n P_{n-2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recurrence {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// An orthogonal-polynomial family together with its weight function,
/// normalization constants, and recurrence coefficients.
///
/// Polynomial values are always computed through the recurrence; both
/// supported families use the standard normalization `P_0 = 1`, `P_1 = t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolynomialFamily {
    kind: FamilyKind,
}

/// Construct the family descriptor for `kind`.
pub fn build_family(kind: FamilyKind) -> PolynomialFamily {
    PolynomialFamily { kind }
}

impl PolynomialFamily {
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    /// The weight function `w(t)` of the family's inner product.
    pub fn weight(&self, t: f64) -> f64 {
        match self.kind {
            FamilyKind::Chebyshev => 1.0 / (1.0 - t * t).sqrt(),
            FamilyKind::Legendre => 1.0,
        }
    }

    /// Total mass of the weight, `∫ w(t) dt` over `[-1, 1]`.
    pub fn weight_mass(&self) -> f64 {
        match self.kind {
            FamilyKind::Chebyshev => PI,
            FamilyKind::Legendre => 2.0,
        }
    }

    /// Norm-square `γ_i = ⟨P_i, P_i⟩_w` of the `i`-th polynomial.
    pub fn norm_constant(&self, i: usize) -> f64 {
        match self.kind {
            FamilyKind::Chebyshev => {
                if i == 0 {
                    PI
                } else {
                    PI / 2.0
                }
            }
            FamilyKind::Legendre => 2.0 / (2 * i + 1) as f64,
        }
    }

    /// Recurrence coefficients for the step producing `P_n`, `n >= 2`.
    pub fn recurrence(&self, n: usize) -> Recurrence {
        debug_assert!(n >= 2);
        match self.kind {
            FamilyKind::Chebyshev => Recurrence {
                a: 2.0,
                b: 0.0,
                c: 1.0,
            },
            FamilyKind::Legendre => {
                let nf = n as f64;
                Recurrence {
                    a: (2.0 * nf - 1.0) / nf,
                    b: 0.0,
                    c: (nf - 1.0) / nf,
                }
            }
        }
    }

    /// Evaluate `P_n(t)` by running the recurrence up from `P_0`, `P_1`.
    pub fn evaluate(&self, n: usize, t: f64) -> f64 {
        match n {
            0 => 1.0,
            1 => t,
            _ => {
                let mut prev = 1.0;
                let mut cur = t;
                for k in 2..=n {
                    let r = self.recurrence(k);
                    let next = (r.a * t + r.b) * cur - r.c * prev;
                    prev = cur;
                    cur = next;
                }
                cur
            }
        }
    }

    /// Values of `P_0(t), ..., P_{count-1}(t)` in one recurrence sweep.
    pub fn evaluate_sequence(&self, count: usize, t: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        if count >= 1 {
            out.push(1.0);
        }
        if count >= 2 {
            out.push(t);
        }
        for k in 2..count {
            let r = self.recurrence(k);
            out.push((r.a * t + r.b) * out[k - 1] - r.c * out[k - 2]);
        }
        out
    }

    /// Off-diagonal entry `J_{k-1,k}` of the symmetric Jacobi operator, in
    /// the monic normalization used for node/weight computation.
    pub(crate) fn jacobi_offdiagonal(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        match self.kind {
            FamilyKind::Chebyshev => {
                if k == 1 {
                    0.5_f64.sqrt()
                } else {
                    0.5
                }
            }
            FamilyKind::Legendre => {
                let kf = k as f64;
                kf / (4.0 * kf * kf - 1.0).sqrt()
            }
        }
    }
}
