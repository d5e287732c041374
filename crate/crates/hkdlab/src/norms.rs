//! Lyapunov-type norm families evaluated by grid suprema.
//!
//! Two families are built along trajectories of a system, indexed by a shared
//! supremum grid. For a vector `x` at grid time `t`, with `p = P(t)x` and
//! `q = Q(t)x`:
//!
//! * growth-type:     `max_{τ≥t} (h(t)/h(τ))·‖U(τ,t)p‖ + max_{τ≤t} (k(τ)/k(t))·‖V(t,τ)q‖`
//! * dichotomy-type:  `max_{τ≥t} (h(τ)/h(t))·‖U(τ,t)p‖ + max_{τ≤t} (k(t)/k(τ))·‖V(t,τ)q‖`
//!
//! The grid value is a certified lower bound of the continuous supremum; when
//! an envelope is available, `N(t)·(‖p‖ + ‖q‖)` certifies the upper side.
//! τ = t is always included, so every value dominates the base norm.
//!
//! A single grid shared by all `t` makes the gain-one dichotomy inequalities
//! hold *exactly* on the grid (each left-hand supremum ranges over a subset
//! of the right-hand terms), which is what the theorem checkers exploit.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rates::GrowthRate;
use crate::systems::GridSystem;
use crate::linops::StateVector;

/// Which of the two families a [`NormFamily`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Growth,
    Dichotomy,
}

impl NormKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "growth" => Ok(NormKind::Growth),
            "dichotomy" => Ok(NormKind::Dichotomy),
            _ => Err(Error::spec(s, "expected `growth` or `dichotomy`")),
        }
    }
}

/// A time-indexed norm family over a shared supremum grid.
///
/// Evaluation is pure given the write-once kernel-inverse cache inside the
/// [`GridSystem`]; families are cheap to clone and safe to share.
#[derive(Clone)]
pub struct NormFamily {
    kind: NormKind,
    gs: Arc<GridSystem>,
    h_vals: Arc<Vec<f64>>,
    k_vals: Arc<Vec<f64>>,
    h_label: String,
    k_label: String,
}

impl NormFamily {
    pub fn new(
        kind: NormKind,
        gs: Arc<GridSystem>,
        h: &GrowthRate,
        k: &GrowthRate,
    ) -> Result<Self> {
        let h_vals = rate_values(h, gs.grid())?;
        let k_vals = rate_values(k, gs.grid())?;
        Ok(NormFamily {
            kind,
            gs,
            h_vals: Arc::new(h_vals),
            k_vals: Arc::new(k_vals),
            h_label: h.label().to_string(),
            k_label: k.label().to_string(),
        })
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn grid_system(&self) -> &Arc<GridSystem> {
        &self.gs
    }

    pub fn h_label(&self) -> &str {
        &self.h_label
    }

    pub fn k_label(&self) -> &str {
        &self.k_label
    }

    /// Norm of `x` at grid time `t`. Off-grid times are a domain error; the
    /// families are never interpolated.
    pub fn eval(&self, t: f64, x: &StateVector) -> Result<f64> {
        let idx = self.gs.grid().index_of(t)?;
        self.eval_at(idx, x)
    }

    /// Norm of `x` at grid index `idx`.
    pub fn eval_at(&self, idx: usize, x: &StateVector) -> Result<f64> {
        Ok(self.p_term_at(idx, x)? + self.q_term_at(idx, x)?)
    }

    /// The forward supremum term over `U(τ,t)P(t)x`, `τ ≥ t`.
    pub fn p_term_at(&self, idx: usize, x: &StateVector) -> Result<f64> {
        let px = {
            let pq = self.gs.p(idx)?;
            &pq.0 * x
        };
        if self.gs.norm_of(&px) == 0.0 {
            return Ok(0.0);
        }
        let n = self.gs.grid().len();
        let h_t = self.h_vals[idx];
        let mut best = 0.0f64;
        for tau in idx..n {
            let u = self.gs.u(tau, idx)?;
            let value = self.gs.norm_of(&(&*u * &px));
            let ratio = match self.kind {
                NormKind::Growth => h_t / self.h_vals[tau],
                NormKind::Dichotomy => self.h_vals[tau] / h_t,
            };
            best = best.max(ratio * value);
        }
        Ok(best)
    }

    /// The backward supremum term over `V(t,τ)Q(t)x`, `τ ≤ t`.
    pub fn q_term_at(&self, idx: usize, x: &StateVector) -> Result<f64> {
        let qx = {
            let pq = self.gs.p(idx)?;
            &pq.1 * x
        };
        if self.gs.norm_of(&qx) == 0.0 {
            return Ok(0.0);
        }
        let k_t = self.k_vals[idx];
        let mut best = 0.0f64;
        for tau in 0..=idx {
            let v = self.gs.v(idx, tau)?;
            let value = self.gs.norm_of(&(&*v * &qx));
            let ratio = match self.kind {
                NormKind::Growth => self.k_vals[tau] / k_t,
                NormKind::Dichotomy => k_t / self.k_vals[tau],
            };
            best = best.max(ratio * value);
        }
        Ok(best)
    }
}

pub(crate) fn rate_values(rate: &GrowthRate, grid: &crate::grid::Grid) -> Result<Vec<f64>> {
    grid.points().iter().map(|&t| rate.eval(t)).collect()
}

/// Outcome of [`check_projected_identities`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProjectedIdentitiesCheck {
    pub pass: bool,
    /// Worst defect of `‖P(t)x‖_t` against the forward term alone.
    pub worst_p_defect: f64,
    /// Worst defect of `‖Q(t)x‖_t` against the backward term alone.
    pub worst_q_defect: f64,
    /// Worst defect of `‖x‖_t = ‖P(t)x‖_t + ‖Q(t)x‖_t`.
    pub worst_additivity: f64,
}

/// Verifies that projecting the argument isolates one supremum term, and that
/// the family is additive across the two complementary components.
pub fn check_projected_identities(
    family: &NormFamily,
    probes: &[StateVector],
    tol: f64,
) -> Result<ProjectedIdentitiesCheck> {
    let gs = family.grid_system();
    let n = gs.grid().len();
    let mut worst_p = 0.0f64;
    let mut worst_q = 0.0f64;
    let mut worst_add = 0.0f64;
    for idx in 0..n {
        let pq = gs.p(idx)?;
        for x in probes {
            let px = &pq.0 * x;
            let qx = &pq.1 * x;
            let p_term = family.p_term_at(idx, x)?;
            let q_term = family.q_term_at(idx, x)?;
            let norm_px = family.eval_at(idx, &px)?;
            let norm_qx = family.eval_at(idx, &qx)?;
            worst_p = worst_p.max((norm_px - p_term).abs() / (1.0 + p_term));
            worst_q = worst_q.max((norm_qx - q_term).abs() / (1.0 + q_term));
            let full = family.eval_at(idx, x)?;
            worst_add = worst_add.max((full - (norm_px + norm_qx)).abs() / (1.0 + full));
        }
    }
    Ok(ProjectedIdentitiesCheck {
        pass: worst_p <= tol && worst_q <= tol && worst_add <= tol,
        worst_p_defect: worst_p,
        worst_q_defect: worst_q,
        worst_additivity: worst_add,
    })
}

/// Outcome of [`check_compatibility_sandwich`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct SandwichCheck {
    pub pass: bool,
    /// Worst violation of the lower bound `‖x‖ ≤ ‖x‖_t` (positive = broken).
    pub worst_lower_margin: f64,
    /// Worst relative excess of `‖x‖_t` over `N(t)(‖P(t)x‖ + ‖Q(t)x‖)`.
    pub worst_upper_margin: f64,
    /// Worst relative excess of `‖P(t)x‖_t` over `N(t)‖P(t)x‖`.
    pub worst_p_margin: f64,
    /// Worst relative excess of `‖Q(t)x‖_t` over `N(t)‖Q(t)x‖`.
    pub worst_q_margin: f64,
}

/// Checks the compatibility sandwich
/// `‖x‖ ≤ ‖x‖_t ≤ N(t)(‖P(t)x‖ + ‖Q(t)x‖)` together with its projected
/// specializations, for a candidate bound `N(·)` sampled on the grid.
pub fn check_compatibility_sandwich(
    family: &NormFamily,
    bound: &[f64],
    probes: &[StateVector],
    tol: f64,
) -> Result<SandwichCheck> {
    let gs = family.grid_system();
    let n = gs.grid().len();
    if bound.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bound.len(),
        });
    }
    let mut worst_lower = f64::NEG_INFINITY;
    let mut worst_upper = f64::NEG_INFINITY;
    let mut worst_p = f64::NEG_INFINITY;
    let mut worst_q = f64::NEG_INFINITY;
    for idx in 0..n {
        let pq = gs.p(idx)?;
        for x in probes {
            let px = &pq.0 * x;
            let qx = &pq.1 * x;
            let split = gs.norm_of(&px) + gs.norm_of(&qx);
            let base = gs.norm_of(x);
            let value = family.eval_at(idx, x)?;
            worst_lower = worst_lower.max((base - value) / (1.0 + base));
            if split > 0.0 {
                worst_upper = worst_upper.max(value / (bound[idx] * split) - 1.0);
            }
            let p_base = gs.norm_of(&px);
            if p_base > 0.0 {
                let p_norm = family.p_term_at(idx, x)?;
                worst_p = worst_p.max(p_norm / (bound[idx] * p_base) - 1.0);
            }
            let q_base = gs.norm_of(&qx);
            if q_base > 0.0 {
                let q_norm = family.q_term_at(idx, x)?;
                worst_q = worst_q.max(q_norm / (bound[idx] * q_base) - 1.0);
            }
        }
    }
    let ok = |m: f64| m <= tol;
    Ok(SandwichCheck {
        pass: ok(worst_lower) && ok(worst_upper) && ok(worst_p) && ok(worst_q),
        worst_lower_margin: worst_lower,
        worst_upper_margin: worst_upper,
        worst_p_margin: worst_p,
        worst_q_margin: worst_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::rates::{log_poly, GrowthRate};
    use crate::systems::{example_gallery, probe_vectors, GalleryExample, DEFAULT_PROBE_SEED};
    use approx::assert_relative_eq;

    fn family(
        example: GalleryExample,
        kind: NormKind,
        h: &GrowthRate,
        k: &GrowthRate,
        points: usize,
    ) -> NormFamily {
        let sys = example_gallery(example, h, k, None).unwrap();
        let gs = Arc::new(GridSystem::new(
            Arc::new(sys),
            Grid::uniform(10.0, points).unwrap(),
        ));
        NormFamily::new(kind, gs, h, k).unwrap()
    }

    #[test]
    fn zero_vector_has_zero_norm() {
        let h = GrowthRate::exponential(1.0).unwrap();
        let f = family(GalleryExample::Dicho2dConstantP, NormKind::Dichotomy, &h, &h, 11);
        let zero = StateVector::zeros(2);
        assert_eq!(f.eval(0.0, &zero).unwrap(), 0.0);
    }

    #[test]
    fn growth_norm_value_on_growth_system() {
        // P-component probe at t = 0: every term collapses to 1/r(τ), so the
        // supremum is 1, attained at τ = 0.
        let h = GrowthRate::logpoly();
        let f = family(GalleryExample::GrowthNotDicho, NormKind::Growth, &h, &h, 101);
        let x = StateVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(f.eval(0.0, &x).unwrap(), 1.0);
    }

    #[test]
    fn dichotomy_norm_value_on_constant_p_system() {
        // Rate factors cancel against the coefficients: terms are 1/r(τ).
        let h = GrowthRate::exponential(1.0).unwrap();
        let f = family(GalleryExample::Dicho2dConstantP, NormKind::Dichotomy, &h, &h, 101);
        let x = StateVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(f.eval(0.0, &x).unwrap(), 1.0);
    }

    #[test]
    fn off_grid_time_is_domain_error() {
        let h = GrowthRate::exponential(1.0).unwrap();
        let f = family(GalleryExample::Dicho2dConstantP, NormKind::Dichotomy, &h, &h, 11);
        let x = StateVector::from_vec(vec![1.0, 0.0]);
        assert!(f.eval(0.55, &x).is_err());
    }

    #[test]
    fn complement_vector_at_time_zero_reduces_to_base_norm() {
        // Only the τ = 0 term exists in the backward supremum.
        let h = GrowthRate::exponential(1.0).unwrap();
        let f = family(GalleryExample::Dicho2dConstantP, NormKind::Dichotomy, &h, &h, 101);
        let x = StateVector::from_vec(vec![0.0, 2.5]);
        assert_relative_eq!(f.eval(0.0, &x).unwrap(), 2.5, max_relative = 1e-12);
    }

    #[test]
    fn tail_time_p_vector_reduces_to_base_norm() {
        // At the last grid point the forward supremum has a single term.
        let h = GrowthRate::exponential(1.0).unwrap();
        let f = family(GalleryExample::Dicho2dConstantP, NormKind::Dichotomy, &h, &h, 101);
        let x = StateVector::from_vec(vec![-3.0, 0.0]);
        assert_relative_eq!(f.eval(10.0, &x).unwrap(), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn dominates_base_norm_everywhere() {
        let h = GrowthRate::exponential(1.0).unwrap();
        let f = family(GalleryExample::Dicho2dRepaired, NormKind::Dichotomy, &h, &h, 21);
        let gs = f.grid_system().clone();
        let probes = probe_vectors(gs.space(), DEFAULT_PROBE_SEED);
        for idx in 0..gs.grid().len() {
            for x in &probes {
                let v = f.eval_at(idx, x).unwrap();
                assert!(v >= gs.norm_of(x) * (1.0 - 1e-13));
            }
        }
    }

    #[test]
    fn norm_axioms_hold_on_probes() {
        let h = GrowthRate::exponential(1.0).unwrap();
        for kind in [NormKind::Growth, NormKind::Dichotomy] {
            let f = family(GalleryExample::Dicho2dConstantP, kind, &h, &h, 21);
            let probes = probe_vectors(f.grid_system().space(), DEFAULT_PROBE_SEED);
            for idx in [0, 5, 20] {
                for x in &probes {
                    let nx = f.eval_at(idx, x).unwrap();
                    let scaled = f.eval_at(idx, &(x * -2.5)).unwrap();
                    assert_relative_eq!(scaled, 2.5 * nx, max_relative = 1e-12);
                }
                for x in &probes {
                    for y in &probes {
                        let nxy = f.eval_at(idx, &(x + y)).unwrap();
                        let nx = f.eval_at(idx, x).unwrap();
                        let ny = f.eval_at(idx, y).unwrap();
                        assert!(nxy <= nx + ny + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn projected_identities_pass_at_tight_tolerance() {
        let h = GrowthRate::exponential(1.0).unwrap();
        let f = family(GalleryExample::Dicho2dConstantP, NormKind::Dichotomy, &h, &h, 101);
        let probes = probe_vectors(f.grid_system().space(), DEFAULT_PROBE_SEED);
        let check = check_projected_identities(&f, &probes, 1e-12).unwrap();
        assert!(check.pass, "{check:?}");
    }

    #[test]
    fn projector_range_probe_has_no_backward_term() {
        let h = GrowthRate::exponential(1.0).unwrap();
        let f = family(GalleryExample::Dicho2dConstantP, NormKind::Growth, &h, &h, 21);
        let x = StateVector::from_vec(vec![4.0, 0.0]);
        assert_eq!(f.q_term_at(3, &x).unwrap(), 0.0);
    }

    #[test]
    fn sandwich_holds_with_reference_bound() {
        // Growth family on the growth system and dichotomy family on the
        // constant-projector system, both against N(t) = (t+1)·ln(t+e).
        let lp = GrowthRate::logpoly();
        let fg = family(GalleryExample::GrowthNotDicho, NormKind::Growth, &lp, &lp, 101);
        let grid_bound: Vec<f64> = fg
            .grid_system()
            .grid()
            .points()
            .iter()
            .map(|&t| log_poly(t))
            .collect();
        let probes = probe_vectors(fg.grid_system().space(), DEFAULT_PROBE_SEED);
        let check = check_compatibility_sandwich(&fg, &grid_bound, &probes, 1e-12).unwrap();
        assert!(check.pass, "{check:?}");

        let e1 = GrowthRate::exponential(1.0).unwrap();
        let fd = family(GalleryExample::Dicho2dConstantP, NormKind::Dichotomy, &e1, &e1, 101);
        let check = check_compatibility_sandwich(&fd, &grid_bound, &probes, 1e-12).unwrap();
        assert!(check.pass, "{check:?}");
    }

    #[test]
    fn sandwich_rejects_too_small_bound() {
        let e1 = GrowthRate::exponential(1.0).unwrap();
        let fd = family(GalleryExample::Dicho2dConstantP, NormKind::Dichotomy, &e1, &e1, 101);
        let ones = vec![1.0; 101];
        let probes = probe_vectors(fd.grid_system().space(), DEFAULT_PROBE_SEED);
        let check = check_compatibility_sandwich(&fd, &ones, &probes, 1e-12).unwrap();
        assert!(!check.pass);
        assert!(check.worst_q_margin > 1.0);
    }

    #[test]
    fn enlarging_the_grid_never_decreases_the_norm() {
        let h = GrowthRate::exponential(1.0).unwrap();
        let coarse = family(GalleryExample::Dicho2dRepaired, NormKind::Dichotomy, &h, &h, 51);
        let fine = family(GalleryExample::Dicho2dRepaired, NormKind::Dichotomy, &h, &h, 101);
        let probes = probe_vectors(coarse.grid_system().space(), DEFAULT_PROBE_SEED);
        for &t in coarse.grid_system().grid().points().iter().step_by(5) {
            for x in &probes {
                let lo = coarse.eval(t, x).unwrap();
                let hi = fine.eval(t, x).unwrap();
                assert!(
                    hi >= lo * (1.0 - 1e-12),
                    "norm decreased from {lo} to {hi} at t = {t}"
                );
            }
        }
    }

    #[test]
    fn shared_grid_exactness_for_the_forward_term() {
        // h(t)·|||U(t,s)P(s)x|||_t ≤ h(s)·|||P(s)x|||_s holds exactly on a
        // shared grid: the left supremum ranges over a subset of the right's
        // terms after composing the operators.
        let h = GrowthRate::exponential(1.0).unwrap();
        let f = family(GalleryExample::Dicho2dConstantP, NormKind::Dichotomy, &h, &h, 51);
        let gs = f.grid_system().clone();
        let probes = probe_vectors(gs.space(), DEFAULT_PROBE_SEED);
        let hv: Vec<f64> = gs
            .grid()
            .points()
            .iter()
            .map(|&t| h.eval(t).unwrap())
            .collect();
        for (i, j) in [(10, 0), (25, 10), (50, 49), (7, 7)] {
            let u = gs.u(i, j).unwrap();
            let pq = gs.p(j).unwrap();
            for x in &probes {
                let px = &pq.0 * x;
                let lhs = hv[i] * f.eval_at(i, &(&*u * &px)).unwrap();
                let rhs = hv[j] * f.eval_at(j, &px).unwrap();
                assert!(
                    lhs <= rhs * (1.0 + 1e-9),
                    "slack {} at ({i},{j})",
                    lhs / rhs - 1.0
                );
            }
        }
    }
}
