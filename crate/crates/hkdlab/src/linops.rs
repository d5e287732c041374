//! Small dense linear algebra: state spaces, base norms, projector checks,
//! subspace bases and solves restricted to a subspace.
//!
//! Matrix storage and factorizations come from `nalgebra`; this module owns
//! the contracts (tolerances, projector defects, restricted-solve
//! certificates) that the rest of the crate relies on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Concrete operator representation used throughout the crate.
pub type OperatorMatrix = DMatrix<f64>;
/// State vectors of the underlying space.
pub type StateVector = DVector<f64>;

/// Default relative threshold for numerical rank decisions. Singular values
/// below `tol · σ_max` count as zero; the gallery projectors carry entries up
/// to `e^t`, so absolute thresholds would misrank.
pub const RANK_TOL: f64 = 1e-10;

/// Base norm of the state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseNorm {
    /// ℓ∞: `max_i |x_i|` (default; matches the 2-D examples).
    Max,
    /// ℓ2.
    Euclidean,
}

impl BaseNorm {
    pub fn vector(&self, x: &StateVector) -> f64 {
        match self {
            BaseNorm::Max => x.amax(),
            BaseNorm::Euclidean => x.norm(),
        }
    }
}

/// A finite-dimensional real state space with a fixed base norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct StateSpace {
    pub dim: usize,
    pub norm: BaseNorm,
}

impl StateSpace {
    pub fn new(dim: usize, norm: BaseNorm) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("state space dimension must be at least 1"));
        }
        Ok(StateSpace { dim, norm })
    }

    /// Dimension `dim` with the ℓ∞ base norm.
    pub fn max_norm(dim: usize) -> Result<Self> {
        StateSpace::new(dim, BaseNorm::Max)
    }

    pub fn norm_of(&self, x: &StateVector) -> f64 {
        self.norm.vector(x)
    }
}

/// Entrywise max-abs norm of a matrix; scale-free defect measure.
pub fn entrywise_max(m: &OperatorMatrix) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.amax()
    }
}

pub(crate) fn ensure_finite(m: &OperatorMatrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} has non-finite entries")))
    }
}

/// Matrix-vector product with a dimension check.
pub fn apply(a: &OperatorMatrix, x: &StateVector) -> Result<StateVector> {
    if a.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: x.len(),
        });
    }
    Ok(a * x)
}

/// Outcome of [`is_projector`].
#[derive(Debug, Clone, Copy)]
pub struct ProjectorCheck {
    pub pass: bool,
    /// `‖A² − A‖` in the entrywise max norm.
    pub defect: f64,
}

/// Checks idempotency `A² = A` up to `tol` in the entrywise max norm.
pub fn is_projector(a: &OperatorMatrix, tol: f64) -> ProjectorCheck {
    debug_assert!(a.is_square());
    let defect = entrywise_max(&(a * a - a));
    ProjectorCheck {
        pass: defect <= tol,
        defect,
    }
}

/// Complementary projector `Q = I − P`. Errors if `P` is not a projector at
/// `tol`.
pub fn complement(p: &OperatorMatrix, tol: f64) -> Result<OperatorMatrix> {
    let check = is_projector(p, tol);
    if !check.pass {
        return Err(Error::NotAProjector {
            defect: check.defect,
            tol,
        });
    }
    Ok(OperatorMatrix::identity(p.nrows(), p.ncols()) - p)
}

/// Orthonormal basis of `range(P)` with numerical rank decided at
/// `tol · σ_max`. Returns an `n × r` matrix whose columns span the range; the
/// zero matrix yields an `n × 0` result.
pub fn range_basis(p: &OperatorMatrix, tol: f64) -> Result<OperatorMatrix> {
    ensure_finite(p, "projector")?;
    let n = p.nrows();
    let svd = p.clone().svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let threshold = tol * max_sv;
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > threshold && s > 0.0)
        .count();
    let mut basis = OperatorMatrix::zeros(n, rank);
    for c in 0..rank {
        basis.set_column(c, &u.column(c));
    }
    Ok(basis)
}

/// Solves `A·w = y` for the unique `w` in `span(basis)`, assuming the
/// restriction of `A` to that span is an isomorphism onto its image.
///
/// The residual certificate `‖A·w − y‖∞ ≤ tol·(1 + ‖y‖∞)` is enforced; a
/// violation means `y` is not in the image of the restricted map.
pub fn solve_on_subspace(
    a: &OperatorMatrix,
    basis: &OperatorMatrix,
    y: &StateVector,
    tol: f64,
) -> Result<StateVector> {
    if a.ncols() != basis.nrows() || a.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: basis.nrows(),
        });
    }
    let y_norm = y.amax();
    if basis.ncols() == 0 {
        // Trivial subspace: only w = 0 is available.
        if y_norm <= tol * (1.0 + y_norm) {
            return Ok(StateVector::zeros(basis.nrows()));
        }
        return Err(Error::Residual { residual: y_norm });
    }
    let restricted = a * basis;
    let svd = restricted.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let min_sv = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if max_sv == 0.0 || min_sv <= tol * max_sv {
        return Err(Error::NotCompatible {
            t: f64::NAN,
            s: f64::NAN,
            detail: format!("restricted map singular: σ_min/σ_max = {:.3e}", min_sv / max_sv),
        });
    }
    let coeffs = svd
        .solve(y, 0.0)
        .map_err(|e| Error::domain(format!("least-squares solve failed: {e}")))?;
    let w = basis * coeffs;
    let residual = (a * &w - y).amax();
    if residual > tol.max(RANK_TOL) * (1.0 + y_norm) {
        return Err(Error::Residual { residual });
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn p2d(t: f64) -> OperatorMatrix {
        OperatorMatrix::from_row_slice(2, 2, &[1.0, -t.exp(), 0.0, 0.0])
    }

    #[test]
    fn apply_identity_and_zero() {
        let x = StateVector::from_vec(vec![3.0, -4.0]);
        let id = OperatorMatrix::identity(2, 2);
        assert_eq!(apply(&id, &x).unwrap(), x);
        let zero = OperatorMatrix::zeros(2, 2);
        assert_eq!(apply(&zero, &x).unwrap(), StateVector::zeros(2));
    }

    #[test]
    fn apply_example_projector() {
        // P(0)(x1, x2) = (x1 − x2, 0) sends (1, 1) to the origin.
        let x = StateVector::from_vec(vec![1.0, 1.0]);
        let y = apply(&p2d(0.0), &x).unwrap();
        assert_eq!(y, StateVector::zeros(2));
    }

    #[test]
    fn apply_checks_dimensions() {
        let a = OperatorMatrix::identity(2, 2);
        let x = StateVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            apply(&a, &x),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projector_checks() {
        let d = OperatorMatrix::from_diagonal(&StateVector::from_vec(vec![1.0, 0.0]));
        let check = is_projector(&d, 1e-12);
        assert!(check.pass);
        assert_eq!(check.defect, 0.0);

        // [[1, −e], [0, 0]] squares to itself exactly.
        let check = is_projector(&p2d(1.0), 1e-12);
        assert!(check.pass, "defect {}", check.defect);

        let shear = OperatorMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(!is_projector(&shear, 1e-12).pass);
    }

    #[test]
    fn complement_examples() {
        let d = OperatorMatrix::from_diagonal(&StateVector::from_vec(vec![1.0, 0.0]));
        let q = complement(&d, 1e-12).unwrap();
        assert_eq!(
            q,
            OperatorMatrix::from_diagonal(&StateVector::from_vec(vec![0.0, 1.0]))
        );

        // I − P(t) = [[0, e^t], [0, 1]].
        let q = complement(&p2d(1.0), 1e-12).unwrap();
        let expected = OperatorMatrix::from_row_slice(2, 2, &[0.0, E, 0.0, 1.0]);
        assert_relative_eq!(q, expected, max_relative = 1e-15);

        let id = OperatorMatrix::identity(3, 3);
        assert_eq!(complement(&id, 1e-12).unwrap(), OperatorMatrix::zeros(3, 3));

        let shear = OperatorMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(
            complement(&shear, 1e-12),
            Err(Error::NotAProjector { .. })
        ));
    }

    #[test]
    fn range_basis_examples() {
        let d = OperatorMatrix::from_diagonal(&StateVector::from_vec(vec![1.0, 0.0]));
        let b = range_basis(&d, RANK_TOL).unwrap();
        assert_eq!(b.ncols(), 1);
        assert_relative_eq!(b[(0, 0)].abs(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(b[(1, 0)], 0.0, epsilon = 1e-12);

        let zero = OperatorMatrix::zeros(2, 2);
        assert_eq!(range_basis(&zero, RANK_TOL).unwrap().ncols(), 0);

        // range Q(1) = span{(e, 1)}.
        let q = complement(&p2d(1.0), 1e-12).unwrap();
        let b = range_basis(&q, RANK_TOL).unwrap();
        assert_eq!(b.ncols(), 1);
        assert_relative_eq!(b[(0, 0)] / b[(1, 0)], E, max_relative = 1e-12);
    }

    #[test]
    fn rank_sum_spans_the_space() {
        for t in [0.0, 0.7, 3.0] {
            let p = p2d(t);
            let q = complement(&p, 1e-9).unwrap();
            let bp = range_basis(&p, RANK_TOL).unwrap();
            let bq = range_basis(&q, RANK_TOL).unwrap();
            assert_eq!(bp.ncols() + bq.ncols(), 2);
        }
    }

    #[test]
    fn double_complement_is_identity_map() {
        let p = p2d(2.0);
        let back = complement(&complement(&p, 1e-9).unwrap(), 1e-9).unwrap();
        assert_relative_eq!(back, p, max_relative = 1e-12);
    }

    #[test]
    fn solve_on_subspace_examples() {
        let id = OperatorMatrix::identity(2, 2);
        let basis = OperatorMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let y = StateVector::from_vec(vec![0.0, 5.0]);
        let w = solve_on_subspace(&id, &basis, &y, 1e-12).unwrap();
        assert_relative_eq!(w, y, max_relative = 1e-12);

        let a = OperatorMatrix::from_diagonal(&StateVector::from_vec(vec![2.0, 3.0]));
        let y = StateVector::from_vec(vec![0.0, 6.0]);
        let w = solve_on_subspace(&a, &basis, &y, 1e-12).unwrap();
        assert_relative_eq!(w, StateVector::from_vec(vec![0.0, 2.0]), max_relative = 1e-12);
    }

    #[test]
    fn solve_on_subspace_against_hand_solution() {
        // Repaired 2-D operator at (t, s) = (1, 0) with h = k = e^t:
        // U = a·P(0) + c·Q(1), a = e^{-1}/(2·ln(1+e)), c = e/(2·ln(1+e)).
        // The preimage of y = Q(1)(0,1) = (e, 1) in range Q(0) is (1/c)(1, 1).
        let l = (1.0 + E).ln();
        let a_coef = (-1.0f64).exp() / (2.0 * l);
        let c_coef = E / (2.0 * l);
        let p0 = p2d(0.0);
        let q1 = complement(&p2d(1.0), 1e-12).unwrap();
        let u = a_coef * &p0 + c_coef * &q1;
        let basis = range_basis(&complement(&p0, 1e-12).unwrap(), RANK_TOL).unwrap();
        let y = StateVector::from_vec(vec![E, 1.0]);
        let w = solve_on_subspace(&u, &basis, &y, 1e-12).unwrap();
        assert_relative_eq!(
            w,
            StateVector::from_vec(vec![1.0 / c_coef, 1.0 / c_coef]),
            max_relative = 1e-12
        );
        // Multiply-back certificate.
        assert!((u * w - &y).amax() <= 1e-12 * (1.0 + y.amax()));
    }

    #[test]
    fn solve_rejects_targets_outside_the_image() {
        let a = OperatorMatrix::from_diagonal(&StateVector::from_vec(vec![1.0, 1.0]));
        let basis = OperatorMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let y = StateVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            solve_on_subspace(&a, &basis, &y, 1e-12),
            Err(Error::Residual { .. })
        ));
    }

    #[test]
    fn solve_reports_singular_restriction() {
        let a = OperatorMatrix::from_diagonal(&StateVector::from_vec(vec![1.0, 0.0]));
        let basis = OperatorMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let y = StateVector::from_vec(vec![0.0, 0.5]);
        assert!(matches!(
            solve_on_subspace(&a, &basis, &y, 1e-10),
            Err(Error::NotCompatible { .. })
        ));
    }

    #[test]
    fn empty_basis_accepts_only_zero() {
        let a = OperatorMatrix::identity(2, 2);
        let basis = OperatorMatrix::zeros(2, 0);
        let zero = StateVector::zeros(2);
        assert_eq!(solve_on_subspace(&a, &basis, &zero, 1e-12).unwrap(), zero);
        let y = StateVector::from_vec(vec![1.0, 0.0]);
        assert!(solve_on_subspace(&a, &basis, &y, 1e-12).is_err());
    }
}
