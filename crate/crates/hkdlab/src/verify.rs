//! Envelope estimation and the numerical test suites for the dichotomy /
//! growth characterizations.
//!
//! An *envelope* is the grid-certified minimal admissible gain function for
//! one of the defining inequalities. With `r₁(i,j,x)` the P-side ratio and
//! `r₂(i,j,x)` the Q-side ratio over grid pairs `t_i ≥ t_j` and probes:
//!
//! * dichotomy: `N1_req(s) = max h(t)·‖U(t,s)P(s)x‖ / (h(s)·‖P(s)x‖)` over
//!   `t ≥ s`, and `N2_req(t) = max k(t)·‖Q(s)x‖ / (k(s)·‖U(t,s)Q(s)x‖)` over
//!   `s ≤ t`;
//! * growth: the same scans with the rate ratios inverted.
//!
//! Envelope values are certified lower bounds of the true minimal gains:
//! maxima over a finite grid and probe set. Candidate gains are certified
//! admissible only on the grid. Raw values below 1 are clamped to 1 (gains
//! map into `[1, ∞)`), and running maxima provide the nondecreasing hulls.
//!
//! The theorem checkers turn the norm-family characterizations into on-grid
//! properties: gain-one inequalities for the dichotomy-type family (exact on
//! a shared grid) and fitted gains for the growth-type family, with horizon
//! stability separating genuine dichotomies from envelopes that merely look
//! finite at one horizon.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linops::StateVector;
use crate::norms::{rate_values, NormFamily, NormKind};
use crate::rates::GrowthRate;
use crate::systems::{check_invariance, GridSystem, DENOM_FLOOR};

/// Default tolerance for structural preconditions (invariance, composition).
pub const DEFAULT_STRUCT_TOL: f64 = 1e-9;
/// Default relative tolerance for envelope admissibility checks.
pub const DEFAULT_ENVELOPE_TOL: f64 = 1e-6;
/// Default relative band for the two-horizon uniformity / stability tests.
pub const DEFAULT_DELTA: f64 = 0.1;
/// Relative band within which two-horizon maxima count as constant.
const UNIFORM_BAND: f64 = 0.01;
/// Tolerance for the sufficiency directions of the theorem checkers.
pub const SUFFICIENCY_TOL: f64 = 1e-6;

/// Which definition an [`EnvelopeReport`] certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Dichotomy,
    Growth,
}

/// Argmax record for one envelope entry.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EnvelopeWitness {
    /// Partner time attaining the maximum (`t` for N1 entries, `s` for N2).
    pub partner: f64,
    pub probe: usize,
    /// Unclamped ratio value.
    pub raw: f64,
}

/// A probe whose ratio could not be formed because the mapped component
/// vanished while the source component did not; the envelope is infinite.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EnvelopeViolation {
    pub t: f64,
    pub s: f64,
    pub probe: usize,
    pub what: String,
}

/// Two-horizon classification verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UniformityVerdict {
    Uniform,
    Nonuniform,
    Inconclusive,
}

/// Grid tables of minimal admissible gains for one definition.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EnvelopeReport {
    pub kind: EnvelopeKind,
    pub system_label: String,
    pub h_label: String,
    pub k_label: String,
    pub grid_points: Vec<f64>,
    /// Minimal gain per start index `s` for the P-side inequality (clamped
    /// to `[1, ∞)`).
    pub n1_req: Vec<f64>,
    /// Minimal gain per end index `t` for the Q-side inequality.
    pub n2_req: Vec<f64>,
    /// Nondecreasing hull of `max(n1_req, n2_req)`.
    pub hull: Vec<f64>,
    pub n1_witness: Vec<Option<EnvelopeWitness>>,
    pub n2_witness: Vec<Option<EnvelopeWitness>>,
    /// Largest envelope value on the grid (`hull` endpoint).
    pub max_value: f64,
    pub violations: Vec<EnvelopeViolation>,
    /// Filled by the caller once a two-horizon comparison has run.
    pub uniformity: Option<UniformityVerdict>,
}

// ---------------------------------------------------------------------------
// Envelope scans
// ---------------------------------------------------------------------------

type Slot = (f64, (usize, usize));

const EMPTY_SLOT: Slot = (f64::NEG_INFINITY, (usize::MAX, usize::MAX));

fn merge_slot(a: Slot, b: Slot) -> Slot {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

#[derive(Clone)]
struct EnvelopeAcc {
    n1: Vec<Slot>,
    n2: Vec<Slot>,
    violations: Vec<(usize, usize, usize, String)>,
}

impl EnvelopeAcc {
    fn new(n: usize) -> Self {
        EnvelopeAcc {
            n1: vec![EMPTY_SLOT; n],
            n2: vec![EMPTY_SLOT; n],
            violations: Vec::new(),
        }
    }

    fn merge(mut self, other: EnvelopeAcc) -> Self {
        for (a, b) in self.n1.iter_mut().zip(other.n1) {
            *a = merge_slot(*a, b);
        }
        for (a, b) in self.n2.iter_mut().zip(other.n2) {
            *a = merge_slot(*a, b);
        }
        self.violations.extend(other.violations);
        self
    }
}

fn finish_slots(slots: Vec<Slot>, grid: &Grid) -> (Vec<f64>, Vec<Option<EnvelopeWitness>>) {
    let mut values = Vec::with_capacity(slots.len());
    let mut witnesses = Vec::with_capacity(slots.len());
    for (raw, (partner, probe)) in slots {
        values.push(raw.max(1.0));
        if partner == usize::MAX {
            witnesses.push(None);
        } else {
            witnesses.push(Some(EnvelopeWitness {
                partner: grid.at(partner),
                probe,
                raw,
            }));
        }
    }
    (values, witnesses)
}

fn running_hull(n1: &[f64], n2: &[f64]) -> Vec<f64> {
    let mut hull = Vec::with_capacity(n1.len());
    let mut acc = 1.0f64;
    for (a, b) in n1.iter().zip(n2) {
        acc = acc.max(a.max(*b));
        hull.push(acc);
    }
    hull
}

fn envelope_scan(
    gs: &GridSystem,
    kind: EnvelopeKind,
    h_vals: &[f64],
    k_vals: &[f64],
    probes: &[StateVector],
) -> Result<EnvelopeAcc> {
    let n = gs.grid().len();
    (0..n)
        .into_par_iter()
        .try_fold(
            || EnvelopeAcc::new(n),
            |mut acc, i| -> Result<EnvelopeAcc> {
                for j in 0..=i {
                    let u = gs.u(i, j)?;
                    let pq_j = gs.p(j)?;
                    for (pi, x) in probes.iter().enumerate() {
                        let px = &pq_j.0 * x;
                        let px_norm = gs.norm_of(&px);
                        if px_norm >= DENOM_FLOOR {
                            let mapped = gs.norm_of(&(&*u * &px));
                            let factor = match kind {
                                EnvelopeKind::Dichotomy => h_vals[i] / h_vals[j],
                                EnvelopeKind::Growth => h_vals[j] / h_vals[i],
                            };
                            let ratio = factor * mapped / px_norm;
                            acc.n1[j] = merge_slot(acc.n1[j], (ratio, (i, pi)));
                        }
                        let qx = &pq_j.1 * x;
                        let qx_norm = gs.norm_of(&qx);
                        if qx_norm >= DENOM_FLOOR {
                            let mapped = gs.norm_of(&(&*u * &qx));
                            let factor = match kind {
                                EnvelopeKind::Dichotomy => k_vals[i] / k_vals[j],
                                EnvelopeKind::Growth => k_vals[j] / k_vals[i],
                            };
                            if mapped < DENOM_FLOOR {
                                acc.n2[i] = merge_slot(acc.n2[i], (f64::INFINITY, (j, pi)));
                                acc.violations.push((
                                    i,
                                    j,
                                    pi,
                                    "complement component annihilated by U(t,s)".into(),
                                ));
                            } else {
                                let ratio = factor * qx_norm / mapped;
                                acc.n2[i] = merge_slot(acc.n2[i], (ratio, (j, pi)));
                            }
                        }
                    }
                }
                Ok(acc)
            },
        )
        .try_reduce(|| EnvelopeAcc::new(n), |a, b| Ok(a.merge(b)))
}

fn envelope_report(
    gs: &GridSystem,
    kind: EnvelopeKind,
    h: &GrowthRate,
    k: &GrowthRate,
    probes: &[StateVector],
    struct_tol: f64,
) -> Result<EnvelopeReport> {
    let invariance = check_invariance(gs, probes, struct_tol)?;
    if !invariance.pass {
        return Err(Error::Precondition(format!(
            "projector family is not invariant: relative defect {:.6e} at (t, s) = ({}, {})",
            invariance.worst.defect_rel, invariance.worst.t, invariance.worst.s
        )));
    }
    let grid = gs.grid();
    let h_vals = rate_values(h, grid)?;
    let k_vals = rate_values(k, grid)?;
    let acc = envelope_scan(gs, kind, &h_vals, &k_vals, probes)?;
    let (n1_req, n1_witness) = finish_slots(acc.n1, grid);
    let (n2_req, n2_witness) = finish_slots(acc.n2, grid);
    let hull = running_hull(&n1_req, &n2_req);
    let max_value = *hull.last().unwrap();
    let mut raw_violations = acc.violations;
    raw_violations.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    let violations = raw_violations
        .into_iter()
        .map(|(i, j, pi, what)| EnvelopeViolation {
            t: grid.at(i),
            s: grid.at(j),
            probe: pi,
            what,
        })
        .collect();
    Ok(EnvelopeReport {
        kind,
        system_label: gs.system().label().to_string(),
        h_label: h.label().to_string(),
        k_label: k.label().to_string(),
        grid_points: grid.points().to_vec(),
        n1_req,
        n2_req,
        hull,
        n1_witness,
        n2_witness,
        max_value,
        violations,
        uniformity: None,
    })
}

/// Minimal admissible dichotomy gains on the grid. The projector family must
/// be invariant (checked first; the literal gallery variant is rejected
/// here with a precondition error naming the worst pair).
pub fn dichotomy_envelope(
    gs: &GridSystem,
    h: &GrowthRate,
    k: &GrowthRate,
    probes: &[StateVector],
    struct_tol: f64,
) -> Result<EnvelopeReport> {
    envelope_report(gs, EnvelopeKind::Dichotomy, h, k, probes, struct_tol)
}

/// Minimal admissible growth gains on the grid (same scan with the rate
/// ratios inverted).
pub fn growth_envelope(
    gs: &GridSystem,
    h: &GrowthRate,
    k: &GrowthRate,
    probes: &[StateVector],
    struct_tol: f64,
) -> Result<EnvelopeReport> {
    envelope_report(gs, EnvelopeKind::Growth, h, k, probes, struct_tol)
}

/// Q-side envelopes of the kernel-inverse forms: minimal gains for
/// `k(t)·‖V(t,s)Q(t)x‖ ≤ N(t)·k(s)·‖Q(t)x‖` (dichotomy orientation) and
/// `k(s)·‖V(t,s)Q(t)x‖ ≤ M(t)·k(t)·‖Q(t)x‖` (growth orientation).
pub fn kernel_q_envelopes(
    gs: &GridSystem,
    k: &GrowthRate,
    probes: &[StateVector],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k_vals = rate_values(k, gs.grid())?;
    primed_q_envelopes(gs, &k_vals, probes)
}

fn primed_q_envelopes(
    gs: &GridSystem,
    k_vals: &[f64],
    probes: &[StateVector],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = gs.grid().len();
    let acc = (0..n)
        .into_par_iter()
        .try_fold(
            || EnvelopeAcc::new(n),
            |mut acc, i| -> Result<EnvelopeAcc> {
                let pq_i = gs.p(i)?;
                for j in 0..=i {
                    let v = gs.v(i, j)?;
                    for (pi, x) in probes.iter().enumerate() {
                        let qx = &pq_i.1 * x;
                        let qx_norm = gs.norm_of(&qx);
                        if qx_norm < DENOM_FLOOR {
                            continue;
                        }
                        let mapped = gs.norm_of(&(&*v * &qx));
                        let dicho = k_vals[i] / k_vals[j] * mapped / qx_norm;
                        acc.n1[i] = merge_slot(acc.n1[i], (dicho, (j, pi)));
                        let growth = k_vals[j] / k_vals[i] * mapped / qx_norm;
                        acc.n2[i] = merge_slot(acc.n2[i], (growth, (j, pi)));
                    }
                }
                Ok(acc)
            },
        )
        .try_reduce(|| EnvelopeAcc::new(n), |a, b| Ok(a.merge(b)))?;
    let grid = gs.grid();
    let (n2_primed, _) = finish_slots(acc.n1, grid);
    let (m2_primed, _) = finish_slots(acc.n2, grid);
    Ok((n2_primed, m2_primed))
}

/// Outcome of [`check_primed_forms`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct PrimedFormsCheck {
    pub pass: bool,
    /// Kernel-inverse dichotomy Q-envelope, indexed like `n2_req`.
    pub n2_primed: Vec<f64>,
    /// Kernel-inverse growth Q-envelope.
    pub m2_primed: Vec<f64>,
    /// Worst relative gap between the direct and kernel-inverse dichotomy
    /// Q-envelopes.
    pub worst_dichotomy_gap: f64,
    /// Likewise for the growth orientation.
    pub worst_growth_gap: f64,
    /// Worst defect of the pair-by-pair substitution identity that transfers
    /// one form's constraint into the other.
    pub worst_substitution_defect: f64,
}

/// Verifies that the direct Q-side inequalities and their kernel-inverse
/// forms admit exactly the same gains on the grid: the envelopes agree
/// pointwise, and substituting `U(t,s)Q(s)x` into the kernel-inverse ratio
/// reproduces the direct ratio pair by pair.
pub fn check_primed_forms(
    gs: &GridSystem,
    h: &GrowthRate,
    k: &GrowthRate,
    probes: &[StateVector],
    tol: f64,
) -> Result<PrimedFormsCheck> {
    let dicho = dichotomy_envelope(gs, h, k, probes, DEFAULT_STRUCT_TOL)?;
    let growth = growth_envelope(gs, h, k, probes, DEFAULT_STRUCT_TOL)?;
    let grid = gs.grid();
    let k_vals = rate_values(k, grid)?;
    let (n2_primed, m2_primed) = primed_q_envelopes(gs, &k_vals, probes)?;

    let gap = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.max(*y))
            .fold(0.0, f64::max)
    };
    let worst_dichotomy_gap = gap(&dicho.n2_req, &n2_primed);
    let worst_growth_gap = gap(&growth.n2_req, &m2_primed);

    // Substitution: with y = U(t,s)Q(s)x the kernel-inverse ratio at y equals
    // the direct ratio at x, in both orientations.
    let n = grid.len();
    let worst_substitution_defect = (0..n)
        .into_par_iter()
        .try_fold(
            || 0.0f64,
            |mut worst, i| -> Result<f64> {
                let pq_i = gs.p(i)?;
                for j in 0..=i {
                    let u = gs.u(i, j)?;
                    let v = gs.v(i, j)?;
                    let pq_j = gs.p(j)?;
                    for x in probes {
                        let qx = &pq_j.1 * x;
                        let qx_norm = gs.norm_of(&qx);
                        if qx_norm < DENOM_FLOOR {
                            continue;
                        }
                        let y = &*u * &qx;
                        let y_norm = gs.norm_of(&y);
                        if y_norm < DENOM_FLOOR {
                            continue;
                        }
                        let qy = &pq_i.1 * &y;
                        let mapped = gs.norm_of(&(&*v * &qy));
                        let direct = k_vals[i] / k_vals[j] * qx_norm / y_norm;
                        let primed = k_vals[i] / k_vals[j] * mapped / gs.norm_of(&qy);
                        worst = worst.max((direct - primed).abs() / (1.0 + direct));
                    }
                }
                Ok(worst)
            },
        )
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;

    Ok(PrimedFormsCheck {
        pass: worst_dichotomy_gap <= tol
            && worst_growth_gap <= tol
            && worst_substitution_defect <= tol,
        n2_primed,
        m2_primed,
        worst_dichotomy_gap,
        worst_growth_gap,
        worst_substitution_defect,
    })
}

// ---------------------------------------------------------------------------
// Uniformity classification
// ---------------------------------------------------------------------------

/// Outcome of [`classify_uniformity`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct UniformityReport {
    pub verdict: UniformityVerdict,
    pub max_small: f64,
    pub max_large: f64,
    /// `max_large / max_small`.
    pub ratio: f64,
    /// Worst growth of an envelope entry at a *fixed* grid index between the
    /// two horizons; > 1 + δ certifies that no gain function can be
    /// admissible in the limit (the P-side inequality binds at fixed `s`
    /// over an unbounded future).
    pub pointwise_ratio: f64,
    pub pointwise_growing: bool,
    pub delta: f64,
}

/// Two-horizon ratio test on a pair of nested envelope reports.
pub fn classify_uniformity(
    small: &EnvelopeReport,
    large: &EnvelopeReport,
    delta: f64,
) -> Result<UniformityReport> {
    if small.kind != large.kind
        || small.system_label != large.system_label
        || small.h_label != large.h_label
        || small.k_label != large.k_label
    {
        return Err(Error::domain(
            "uniformity classification needs two reports of the same system, rates and kind",
        ));
    }
    let nested = small.grid_points.len() <= large.grid_points.len()
        && small
            .grid_points
            .iter()
            .zip(&large.grid_points)
            .all(|(a, b)| a == b);
    if !nested {
        return Err(Error::domain(
            "uniformity classification needs nested grids",
        ));
    }
    let max_small = small.max_value;
    let max_large = large.max_value;
    let ratio = max_large / max_small;
    let mut pointwise_ratio = 1.0f64;
    for idx in 0..small.grid_points.len() {
        pointwise_ratio = pointwise_ratio
            .max(large.n1_req[idx] / small.n1_req[idx])
            .max(large.n2_req[idx] / small.n2_req[idx]);
    }
    let pointwise_growing = pointwise_ratio > 1.0 + delta;
    let verdict = if !max_small.is_finite() || !max_large.is_finite() {
        UniformityVerdict::Nonuniform
    } else if ratio > 1.0 + delta {
        UniformityVerdict::Nonuniform
    } else if ratio <= 1.0 + delta.min(UNIFORM_BAND) {
        UniformityVerdict::Uniform
    } else {
        UniformityVerdict::Inconclusive
    };
    Ok(UniformityReport {
        verdict,
        max_small,
        max_large,
        ratio,
        pointwise_ratio,
        pointwise_growing,
        delta,
    })
}

// ---------------------------------------------------------------------------
// Theorem checkers
// ---------------------------------------------------------------------------

/// Verdict of a theorem or corollary checker. Precondition failures are kept
/// distinct from inequality violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckVerdict {
    Pass,
    Fail,
    PreconditionFailed,
}

/// Result of the gain-one characterization check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Theorem1Check {
    pub verdict: CheckVerdict,
    pub precondition: Option<String>,
    /// Worst relative slack of `h(t)·⦀U(t,s)P(s)x⦀_t ≤ h(s)·⦀P(s)x⦀_s`.
    pub worst_slack_p: f64,
    /// Worst relative slack of `k(t)·⦀V(t,s)Q(t)x⦀_s ≤ k(s)·⦀Q(t)x⦀_t`.
    pub worst_slack_q: f64,
    /// Gain recovered from the norm family's compatibility bound.
    pub derived_bound: Vec<f64>,
    /// Worst relative deviation factor between the derived gain and the
    /// direct envelope, minus one.
    pub sufficiency_factor: f64,
    /// Worst slack of the derived gain substituted back into the
    /// kernel-inverse dichotomy inequalities.
    pub sufficiency_slack: f64,
}

fn theorem1_precondition_failed(msg: String) -> Theorem1Check {
    Theorem1Check {
        verdict: CheckVerdict::PreconditionFailed,
        precondition: Some(msg),
        worst_slack_p: f64::NAN,
        worst_slack_q: f64::NAN,
        derived_bound: Vec::new(),
        sufficiency_factor: f64::NAN,
        sufficiency_slack: f64::NAN,
    }
}

/// Checks the gain-one inequalities of the dichotomy-type norm family on all
/// grid pairs and probes (necessity direction, exact on a shared grid up to
/// `tol`), then re-derives an admissible gain from the family's
/// compatibility bound and confirms it against the direct envelopes
/// (sufficiency direction).
pub fn check_theorem1(
    gs: &Arc<GridSystem>,
    h: &GrowthRate,
    k: &GrowthRate,
    probes: &[StateVector],
    tol: f64,
) -> Result<Theorem1Check> {
    let envelope = match dichotomy_envelope(gs, h, k, probes, DEFAULT_STRUCT_TOL) {
        Ok(e) => e,
        Err(Error::Precondition(msg)) => return Ok(theorem1_precondition_failed(msg)),
        Err(e) => return Err(e),
    };
    if !envelope.max_value.is_finite() {
        return Ok(theorem1_precondition_failed(
            "dichotomy envelope is infinite on the grid".into(),
        ));
    }
    let grid = gs.grid();
    let n = grid.len();
    let h_vals = rate_values(h, grid)?;
    let k_vals = rate_values(k, grid)?;
    let family = NormFamily::new(NormKind::Dichotomy, gs.clone(), h, k)?;

    // Norm tables reused across the pair scan: ⦀P(j)x⦀_j and ⦀Q(i)x⦀_i.
    let mut norm_p = vec![vec![0.0f64; probes.len()]; n];
    let mut norm_q = vec![vec![0.0f64; probes.len()]; n];
    for idx in 0..n {
        let pq = gs.p(idx)?;
        for (pi, x) in probes.iter().enumerate() {
            norm_p[idx][pi] = family.eval_at(idx, &(&pq.0 * x))?;
            norm_q[idx][pi] = family.eval_at(idx, &(&pq.1 * x))?;
        }
    }

    let scan = (0..n)
        .into_par_iter()
        .try_fold(
            || (0.0f64, 0.0f64),
            |mut worst, i| -> Result<(f64, f64)> {
                let pq_i = gs.p(i)?;
                for j in 0..=i {
                    let u = gs.u(i, j)?;
                    let v = gs.v(i, j)?;
                    let pq_j = gs.p(j)?;
                    for (pi, x) in probes.iter().enumerate() {
                        let px = &pq_j.0 * x;
                        if gs.norm_of(&px) >= DENOM_FLOOR {
                            let lhs = h_vals[i] * family.eval_at(i, &(&*u * &px))?;
                            let rhs = h_vals[j] * norm_p[j][pi];
                            worst.0 = worst.0.max((lhs - rhs) / rhs);
                        }
                        let qx = &pq_i.1 * x;
                        if gs.norm_of(&qx) >= DENOM_FLOOR {
                            let lhs = k_vals[i] * family.eval_at(j, &(&*v * &qx))?;
                            let rhs = k_vals[j] * norm_q[i][pi];
                            worst.1 = worst.1.max((lhs - rhs) / rhs);
                        }
                    }
                }
                Ok(worst)
            },
        )
        .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))));
    let (worst_slack_p, worst_slack_q) = match scan {
        Ok(w) => w,
        Err(Error::NotCompatible { t, s, detail }) => {
            return Ok(theorem1_precondition_failed(format!(
                "kernel inverse unavailable at ({t}, {s}): {detail}"
            )))
        }
        Err(e) => return Err(e),
    };

    // Sufficiency: the compatibility bound of the family is itself a gain.
    let mut derived = vec![1.0f64; n];
    for idx in 0..n {
        let pq = gs.p(idx)?;
        for (pi, x) in probes.iter().enumerate() {
            let p_base = gs.norm_of(&(&pq.0 * x));
            if p_base >= DENOM_FLOOR {
                derived[idx] = derived[idx].max(norm_p[idx][pi] / p_base);
            }
            let q_base = gs.norm_of(&(&pq.1 * x));
            if q_base >= DENOM_FLOOR {
                derived[idx] = derived[idx].max(norm_q[idx][pi] / q_base);
            }
        }
    }
    let (n2_primed, _) = primed_q_envelopes(gs, &k_vals, probes)?;
    let mut sufficiency_factor = 0.0f64;
    for idx in 0..n {
        let direct = envelope.n1_req[idx].max(n2_primed[idx]);
        let factor = (derived[idx] / direct).max(direct / derived[idx]) - 1.0;
        sufficiency_factor = sufficiency_factor.max(factor);
    }

    // The derived gain must satisfy the kernel-inverse inequalities directly.
    let sufficiency_slack = {
        let derived = &derived;
        (0..n)
            .into_par_iter()
            .try_fold(
                || 0.0f64,
                |mut worst, i| -> Result<f64> {
                    let pq_i = gs.p(i)?;
                    for j in 0..=i {
                        let u = gs.u(i, j)?;
                        let v = gs.v(i, j)?;
                        let pq_j = gs.p(j)?;
                        for x in probes {
                            let px = &pq_j.0 * x;
                            let p_base = gs.norm_of(&px);
                            if p_base >= DENOM_FLOOR {
                                let lhs = h_vals[i] * gs.norm_of(&(&*u * &px));
                                let rhs = derived[j] * h_vals[j] * p_base;
                                worst = worst.max((lhs - rhs) / rhs);
                            }
                            let qx = &pq_i.1 * x;
                            let q_base = gs.norm_of(&qx);
                            if q_base >= DENOM_FLOOR {
                                let lhs = k_vals[i] * gs.norm_of(&(&*v * &qx));
                                let rhs = derived[i] * k_vals[j] * q_base;
                                worst = worst.max((lhs - rhs) / rhs);
                            }
                        }
                    }
                    Ok(worst)
                },
            )
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?
    };

    let pass = worst_slack_p <= tol
        && worst_slack_q <= tol
        && sufficiency_factor <= SUFFICIENCY_TOL
        && sufficiency_slack <= SUFFICIENCY_TOL;
    Ok(Theorem1Check {
        verdict: if pass {
            CheckVerdict::Pass
        } else {
            CheckVerdict::Fail
        },
        precondition: None,
        worst_slack_p,
        worst_slack_q,
        derived_bound: derived,
        sufficiency_factor,
        sufficiency_slack,
    })
}

/// Result of the fitted-gain characterization check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Theorem2Check {
    pub verdict: CheckVerdict,
    pub precondition: Option<String>,
    /// Minimal admissible gain per grid index for the growth-norm
    /// inequalities, clamped to `[1, ∞)`.
    pub fitted_n: Vec<f64>,
    /// Nondecreasing hull of `fitted_n`.
    pub fitted_hull: Vec<f64>,
    /// Nondecreasing hull of the growth gains (direct and kernel-inverse).
    pub growth_bound_hull: Vec<f64>,
    /// Worst pointwise growth of the P-side fitted gain against the
    /// half-horizon run.
    pub stability_ratio_p: f64,
    /// Likewise for the Q side.
    pub stability_ratio_q: f64,
    /// True when either side grows beyond `1 + δ`: the fitted gain depends
    /// on the horizon and the system is certified not dichotomic.
    pub growing: bool,
    /// Worst slack of the product gain `N(·)·M(·)` substituted into the
    /// direct dichotomy inequality, P side.
    pub product_slack_p: f64,
    /// Likewise for the Q side.
    pub product_slack_q: f64,
}

fn theorem2_precondition_failed(msg: String) -> Theorem2Check {
    Theorem2Check {
        verdict: CheckVerdict::PreconditionFailed,
        precondition: Some(msg),
        fitted_n: Vec::new(),
        fitted_hull: Vec::new(),
        growth_bound_hull: Vec::new(),
        stability_ratio_p: f64::NAN,
        stability_ratio_q: f64::NAN,
        growing: false,
        product_slack_p: f64::NAN,
        product_slack_q: f64::NAN,
    }
}

/// Fitted minimal gains for the growth-norm inequalities on one grid:
/// P side per start index, Q side per end index.
fn fitted_norm_gains(
    gs: &Arc<GridSystem>,
    h: &GrowthRate,
    k: &GrowthRate,
    probes: &[StateVector],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = gs.grid();
    let n = grid.len();
    let h_vals = rate_values(h, grid)?;
    let k_vals = rate_values(k, grid)?;
    let family = NormFamily::new(NormKind::Growth, gs.clone(), h, k)?;
    let mut norm_p = vec![vec![0.0f64; probes.len()]; n];
    let mut norm_q = vec![vec![0.0f64; probes.len()]; n];
    for idx in 0..n {
        let pq = gs.p(idx)?;
        for (pi, x) in probes.iter().enumerate() {
            norm_p[idx][pi] = family.eval_at(idx, &(&pq.0 * x))?;
            norm_q[idx][pi] = family.eval_at(idx, &(&pq.1 * x))?;
        }
    }
    let acc = (0..n)
        .into_par_iter()
        .try_fold(
            || EnvelopeAcc::new(n),
            |mut acc, i| -> Result<EnvelopeAcc> {
                let pq_i = gs.p(i)?;
                for j in 0..=i {
                    let u = gs.u(i, j)?;
                    let v = gs.v(i, j)?;
                    let pq_j = gs.p(j)?;
                    for (pi, x) in probes.iter().enumerate() {
                        let px = &pq_j.0 * x;
                        if gs.norm_of(&px) >= DENOM_FLOOR && norm_p[j][pi] >= DENOM_FLOOR {
                            let lhs = h_vals[i] * family.eval_at(i, &(&*u * &px))?;
                            let ratio = lhs / (h_vals[j] * norm_p[j][pi]);
                            acc.n1[j] = merge_slot(acc.n1[j], (ratio, (i, pi)));
                        }
                        let qx = &pq_i.1 * x;
                        if gs.norm_of(&qx) >= DENOM_FLOOR && norm_q[i][pi] >= DENOM_FLOOR {
                            let lhs = k_vals[i] * family.eval_at(j, &(&*v * &qx))?;
                            let ratio = lhs / (k_vals[j] * norm_q[i][pi]);
                            acc.n2[i] = merge_slot(acc.n2[i], (ratio, (j, pi)));
                        }
                    }
                }
                Ok(acc)
            },
        )
        .try_reduce(|| EnvelopeAcc::new(n), |a, b| Ok(a.merge(b)))?;
    let (fitted_p, _) = finish_slots(acc.n1, grid);
    let (fitted_q, _) = finish_slots(acc.n2, grid);
    Ok((fitted_p, fitted_q))
}

/// Checks the growth-norm characterization: builds the growth-type family,
/// fits the minimal gain for its inequalities, tests the gain's horizon
/// stability against the half-horizon run, and certifies the product gain
/// `N(·)·M(·)` for the direct dichotomy inequalities (the sufficiency
/// direction's constant).
pub fn check_theorem2(
    gs: &Arc<GridSystem>,
    h: &GrowthRate,
    k: &GrowthRate,
    probes: &[StateVector],
    tol: f64,
    stability_delta: f64,
) -> Result<Theorem2Check> {
    // Standing hypothesis: the pair has (h,k)-growth.
    let growth = match growth_envelope(gs, h, k, probes, DEFAULT_STRUCT_TOL) {
        Ok(e) => e,
        Err(Error::Precondition(msg)) => return Ok(theorem2_precondition_failed(msg)),
        Err(e) => return Err(e),
    };
    if !growth.max_value.is_finite() {
        return Ok(theorem2_precondition_failed(
            "growth envelope is infinite on the grid".into(),
        ));
    }
    let grid = gs.grid();
    let n = grid.len();
    let h_vals = rate_values(h, grid)?;
    let k_vals = rate_values(k, grid)?;
    let (_, m2_primed) = match primed_q_envelopes(gs, &k_vals, probes) {
        Ok(p) => p,
        Err(Error::NotCompatible { t, s, detail }) => {
            return Ok(theorem2_precondition_failed(format!(
                "kernel inverse unavailable at ({t}, {s}): {detail}"
            )))
        }
        Err(e) => return Err(e),
    };
    let m_combined: Vec<f64> = (0..n)
        .map(|i| growth.n1_req[i].max(growth.n2_req[i]).max(m2_primed[i]))
        .collect();
    let growth_bound_hull = running_hull(&m_combined, &m_combined);

    let (fitted_p, fitted_q) = match fitted_norm_gains(gs, h, k, probes) {
        Ok(f) => f,
        Err(Error::NotCompatible { t, s, detail }) => {
            return Ok(theorem2_precondition_failed(format!(
                "kernel inverse unavailable at ({t}, {s}): {detail}"
            )))
        }
        Err(e) => return Err(e),
    };
    let fitted_n: Vec<f64> = fitted_p
        .iter()
        .zip(&fitted_q)
        .map(|(a, b)| a.max(*b))
        .collect();
    let fitted_hull = running_hull(&fitted_n, &fitted_n);

    // Horizon stability: rerun the fit on the leading half of the grid.
    let half_grid = grid.half_prefix();
    let gs_half = Arc::new(GridSystem::new(gs.system_shared(), half_grid));
    let (half_p, half_q) = fitted_norm_gains(&gs_half, h, k, probes)?;
    let mut stability_ratio_p = 1.0f64;
    let mut stability_ratio_q = 1.0f64;
    for idx in 0..half_p.len() {
        stability_ratio_p = stability_ratio_p.max(fitted_p[idx] / half_p[idx]);
        stability_ratio_q = stability_ratio_q.max(fitted_q[idx] / half_q[idx]);
    }
    let growing = stability_ratio_p > 1.0 + stability_delta
        || stability_ratio_q > 1.0 + stability_delta;

    // Product gain N(t)·M(t) must be admissible for the direct inequalities.
    let product: Vec<f64> = fitted_hull
        .iter()
        .zip(&growth_bound_hull)
        .map(|(a, b)| a * b)
        .collect();
    let slacks = {
        let product = &product;
        (0..n)
            .into_par_iter()
            .try_fold(
                || (0.0f64, 0.0f64),
                |mut worst, i| -> Result<(f64, f64)> {
                    for j in 0..=i {
                        let u = gs.u(i, j)?;
                        let pq_j = gs.p(j)?;
                        for x in probes {
                            let px = &pq_j.0 * x;
                            let p_base = gs.norm_of(&px);
                            if p_base >= DENOM_FLOOR {
                                let lhs = h_vals[i] * gs.norm_of(&(&*u * &px));
                                let rhs = product[j] * h_vals[j] * p_base;
                                worst.0 = worst.0.max((lhs - rhs) / rhs);
                            }
                            let qx = &pq_j.1 * x;
                            let q_base = gs.norm_of(&qx);
                            if q_base >= DENOM_FLOOR {
                                let mapped = gs.norm_of(&(&*u * &qx));
                                if mapped >= DENOM_FLOOR {
                                    let lhs = k_vals[i] * q_base;
                                    let rhs = product[i] * k_vals[j] * mapped;
                                    worst.1 = worst.1.max((lhs - rhs) / rhs);
                                }
                            }
                        }
                    }
                    Ok(worst)
                },
            )
            .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))))?
    };

    let pass = !growing && slacks.0 <= tol && slacks.1 <= tol;
    Ok(Theorem2Check {
        verdict: if pass {
            CheckVerdict::Pass
        } else {
            CheckVerdict::Fail
        },
        precondition: None,
        fitted_n,
        fitted_hull,
        growth_bound_hull,
        stability_ratio_p,
        stability_ratio_q,
        growing,
        product_slack_p: slacks.0,
        product_slack_q: slacks.1,
    })
}

// ---------------------------------------------------------------------------
// Corollaries
// ---------------------------------------------------------------------------

/// Rate specialization for [`check_corollaries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorollaryFlavor {
    Exponential,
    Polynomial,
}

/// One inequality's verdict in the corollary notation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct InequalityResult {
    pub name: String,
    pub verdict: CheckVerdict,
    /// The figure that decided the verdict: a relative slack for on-grid
    /// inequalities, or `ratio − 1` for horizon-stability failures.
    pub slack: f64,
}

/// Outcome of [`check_corollaries`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct CorollaryCheck {
    pub flavor: CorollaryFlavor,
    pub alpha: f64,
    pub beta: f64,
    pub inequalities: Vec<InequalityResult>,
    /// Fitted gain hull from the growth-norm forms (empty when their
    /// precondition fails).
    pub fitted_n: Vec<f64>,
}

/// Specializes the rates to `e^{αt}/e^{βt}` or `(t+1)^α/(t+1)^β` and reports
/// the theorem checks in the corollary notation: the gain-one inequalities
/// (with pointwise horizon stability of the matching envelope side) and the
/// fitted-gain inequalities.
pub fn check_corollaries(
    gs: &Arc<GridSystem>,
    alpha: f64,
    beta: f64,
    flavor: CorollaryFlavor,
    probes: &[StateVector],
    tol: f64,
    stability_delta: f64,
) -> Result<CorollaryCheck> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(Error::domain(format!(
            "corollary rates need positive exponents, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let (h, k, names) = match flavor {
        CorollaryFlavor::Exponential => (
            GrowthRate::exponential(alpha)?,
            GrowthRate::exponential(beta)?,
            ["ed1", "ed2", "ed1'", "ed2'"],
        ),
        CorollaryFlavor::Polynomial => (
            GrowthRate::polynomial(alpha)?,
            GrowthRate::polynomial(beta)?,
            ["pd1", "pd2", "pd1'", "pd2'"],
        ),
    };

    let thm1 = check_theorem1(gs, &h, &k, probes, tol)?;
    let mut inequalities = Vec::with_capacity(4);
    if thm1.verdict == CheckVerdict::PreconditionFailed {
        for name in &names[..2] {
            inequalities.push(InequalityResult {
                name: (*name).into(),
                verdict: CheckVerdict::PreconditionFailed,
                slack: f64::NAN,
            });
        }
    } else {
        // Pointwise horizon stability of the direct envelopes: the gain-one
        // forms hold on any single grid, so instability is what falsifies
        // them.
        let envelope = dichotomy_envelope(gs, &h, &k, probes, DEFAULT_STRUCT_TOL)?;
        let half_grid = gs.grid().half_prefix();
        let gs_half = Arc::new(GridSystem::new(gs.system_shared(), half_grid));
        let envelope_half = dichotomy_envelope(&gs_half, &h, &k, probes, DEFAULT_STRUCT_TOL)?;
        let mut p_ratio = 1.0f64;
        for idx in 0..envelope_half.n1_req.len() {
            p_ratio = p_ratio.max(envelope.n1_req[idx] / envelope_half.n1_req[idx]);
        }
        let p_stable = p_ratio <= 1.0 + stability_delta;
        let q_finite = envelope.violations.is_empty();

        let p_pass = thm1.worst_slack_p <= tol && p_stable;
        inequalities.push(InequalityResult {
            name: names[0].into(),
            verdict: if p_pass {
                CheckVerdict::Pass
            } else {
                CheckVerdict::Fail
            },
            slack: if p_stable {
                thm1.worst_slack_p
            } else {
                p_ratio - 1.0
            },
        });
        let q_pass = thm1.worst_slack_q <= tol && q_finite;
        inequalities.push(InequalityResult {
            name: names[1].into(),
            verdict: if q_pass {
                CheckVerdict::Pass
            } else {
                CheckVerdict::Fail
            },
            slack: thm1.worst_slack_q,
        });
    }

    let thm2 = check_theorem2(gs, &h, &k, probes, SUFFICIENCY_TOL, stability_delta)?;
    if thm2.verdict == CheckVerdict::PreconditionFailed {
        for name in &names[2..] {
            inequalities.push(InequalityResult {
                name: (*name).into(),
                verdict: CheckVerdict::PreconditionFailed,
                slack: f64::NAN,
            });
        }
    } else {
        let p_stable = thm2.stability_ratio_p <= 1.0 + stability_delta;
        let p_pass = p_stable && thm2.product_slack_p <= SUFFICIENCY_TOL;
        inequalities.push(InequalityResult {
            name: names[2].into(),
            verdict: if p_pass {
                CheckVerdict::Pass
            } else {
                CheckVerdict::Fail
            },
            slack: if p_stable {
                thm2.product_slack_p
            } else {
                thm2.stability_ratio_p - 1.0
            },
        });
        let q_stable = thm2.stability_ratio_q <= 1.0 + stability_delta;
        let q_pass = q_stable && thm2.product_slack_q <= SUFFICIENCY_TOL;
        inequalities.push(InequalityResult {
            name: names[3].into(),
            verdict: if q_pass {
                CheckVerdict::Pass
            } else {
                CheckVerdict::Fail
            },
            slack: if q_stable {
                thm2.product_slack_q
            } else {
                thm2.stability_ratio_q - 1.0
            },
        });
    }

    Ok(CorollaryCheck {
        flavor,
        alpha,
        beta,
        inequalities,
        fitted_n: thm2.fitted_hull,
    })
}
