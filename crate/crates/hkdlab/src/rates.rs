//! Growth rates: nondecreasing maps `[0, ∞) → [1, ∞)` that diverge.
//!
//! Built-in kinds cover the exponential family `e^{αt}`, the polynomial
//! family `(t+1)^α` and the log-polynomial rate `(t+1)·ln(t+e)`, plus
//! tabulated rates with piecewise-linear interpolation. Monotonicity and the
//! `≥ 1` codomain are checked on grids; divergence is undecidable numerically
//! and is only reported as a heuristic flag.

use std::f64::consts::E;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// The log-polynomial reference rate `r(t) = (t+1)·ln(t+e)`.
///
/// This scalar function also appears as the shared damping coefficient of
/// every gallery system, so it is exposed as a free function.
pub fn log_poly(t: f64) -> f64 {
    (t + 1.0) * (t + E).ln()
}

/// Minimum end-to-start gap for the heuristic divergence flag.
const MIN_DIVERGENCE_GAP: f64 = 0.1;

/// Relative tolerance for equality-grade rate comparisons.
pub const RATE_EQ_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
enum RateKind {
    Exponential { alpha: f64 },
    Polynomial { alpha: f64 },
    LogPoly,
    Table { ts: Vec<f64>, values: Vec<f64> },
}

/// A pointwise-evaluable growth rate.
///
/// Immutable after construction; evaluation is pure.
#[derive(Debug, Clone)]
pub struct GrowthRate {
    kind: RateKind,
    label: String,
}

impl GrowthRate {
    /// `h(t) = e^{αt}`, `α > 0`.
    pub fn exponential(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!(
                "exponential rate needs alpha > 0, got {alpha}"
            )));
        }
        Ok(GrowthRate {
            kind: RateKind::Exponential { alpha },
            label: format!("exp:{alpha}"),
        })
    }

    /// `h(t) = (t+1)^α`, `α > 0`.
    pub fn polynomial(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::domain(format!(
                "polynomial rate needs alpha > 0, got {alpha}"
            )));
        }
        Ok(GrowthRate {
            kind: RateKind::Polynomial { alpha },
            label: format!("poly:{alpha}"),
        })
    }

    /// `h(t) = (t+1)·ln(t+e)`.
    pub fn logpoly() -> Self {
        GrowthRate {
            kind: RateKind::LogPoly,
            label: "logpoly".into(),
        }
    }

    /// Tabulated rate with monotone piecewise-linear interpolation between
    /// samples. Evaluation outside `[t_first, t_last]` is a domain error.
    pub fn from_table(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::domain("rate table needs at least two samples"));
        }
        let mut ts = Vec::with_capacity(samples.len());
        let mut values = Vec::with_capacity(samples.len());
        for (i, &(t, v)) in samples.iter().enumerate() {
            if !t.is_finite() || t < 0.0 || !v.is_finite() {
                return Err(Error::domain(format!(
                    "rate table sample {i} has non-finite or negative entries"
                )));
            }
            if i > 0 && ts[i - 1] >= t {
                return Err(Error::domain(format!(
                    "rate table times must be strictly increasing; violated at sample {i}"
                )));
            }
            ts.push(t);
            values.push(v);
        }
        Ok(GrowthRate {
            kind: RateKind::Table { ts, values },
            label: "table".into(),
        })
    }

    /// Loads a `table:` rate from a two-column CSV file (`t,value`, header
    /// row required).
    pub fn from_csv(path: &Path) -> Result<Self> {
        let spec = format!("table:{}", path.display());
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::spec(&spec, e.to_string()))?;
        let mut samples = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::spec(&spec, e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::spec(&spec, "expected exactly two columns: t,value"));
            }
            let t: f64 = record[0]
                .trim()
                .parse()
                .map_err(|_| Error::spec(&spec, format!("bad time `{}`", &record[0])))?;
            let v: f64 = record[1]
                .trim()
                .parse()
                .map_err(|_| Error::spec(&spec, format!("bad value `{}`", &record[1])))?;
            samples.push((t, v));
        }
        let mut rate = GrowthRate::from_table(samples)?;
        rate.label = spec;
        Ok(rate)
    }

    /// Parses a rate specifier: `exp:<alpha>`, `poly:<alpha>`, `logpoly` or
    /// `table:<path.csv>`.
    pub fn parse(spec: &str) -> Result<Self> {
        if spec == "logpoly" {
            return Ok(GrowthRate::logpoly());
        }
        if let Some(alpha) = spec.strip_prefix("exp:") {
            let alpha: f64 = alpha
                .parse()
                .map_err(|_| Error::spec(spec, "alpha is not a number"))?;
            return GrowthRate::exponential(alpha).map_err(|e| Error::spec(spec, e.to_string()));
        }
        if let Some(alpha) = spec.strip_prefix("poly:") {
            let alpha: f64 = alpha
                .parse()
                .map_err(|_| Error::spec(spec, "alpha is not a number"))?;
            return GrowthRate::polynomial(alpha).map_err(|e| Error::spec(spec, e.to_string()));
        }
        if let Some(path) = spec.strip_prefix("table:") {
            return GrowthRate::from_csv(Path::new(path));
        }
        Err(Error::spec(
            spec,
            "expected exp:<alpha>, poly:<alpha>, logpoly or table:<path.csv>",
        ))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Evaluates the rate at `t ≥ 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::domain(format!(
                "rates are defined on nonnegative time, got {t}"
            )));
        }
        match &self.kind {
            RateKind::Exponential { alpha } => Ok((alpha * t).exp()),
            RateKind::Polynomial { alpha } => Ok((t + 1.0).powf(*alpha)),
            RateKind::LogPoly => Ok(log_poly(t)),
            RateKind::Table { ts, values } => {
                let first = ts[0];
                let last = *ts.last().unwrap();
                if t < first || t > last {
                    return Err(Error::domain(format!(
                        "t = {t} outside tabulated range [{first}, {last}]"
                    )));
                }
                let idx = ts.partition_point(|&p| p < t);
                if idx < ts.len() && ts[idx] == t {
                    return Ok(values[idx]);
                }
                let (t0, t1) = (ts[idx - 1], ts[idx]);
                let (v0, v1) = (values[idx - 1], values[idx]);
                Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
            }
        }
    }
}

/// A codomain or monotonicity violation found on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RateViolation {
    pub t: f64,
    pub value: f64,
    pub reason: &'static str,
}

/// Outcome of [`check_growth_rate`].
#[derive(Debug, Clone)]
pub struct RateCheck {
    pub pass: bool,
    pub first_violation: Option<RateViolation>,
    /// `value(end) - value(start)`; divergence is heuristic, never a failure.
    pub divergence_gap: f64,
    pub diverging: bool,
}

/// Checks `value ≥ 1` and monotonicity on every grid point; reports the
/// end-to-start gap as a divergence heuristic.
pub fn check_growth_rate(rate: &GrowthRate, grid: &Grid) -> Result<RateCheck> {
    let mut first_violation = None;
    let mut prev: Option<f64> = None;
    let mut start = 0.0;
    let mut end = 0.0;
    for (i, &t) in grid.points().iter().enumerate() {
        let v = rate.eval(t)?;
        if i == 0 {
            start = v;
        }
        end = v;
        if first_violation.is_none() {
            if v < 1.0 {
                first_violation = Some(RateViolation {
                    t,
                    value: v,
                    reason: "value below 1",
                });
            } else if let Some(p) = prev {
                if v < p * (1.0 - RATE_EQ_TOL) {
                    first_violation = Some(RateViolation {
                        t,
                        value: v,
                        reason: "not nondecreasing",
                    });
                }
            }
        }
        prev = Some(v);
    }
    let gap = end - start;
    Ok(RateCheck {
        pass: first_violation.is_none(),
        first_violation,
        divergence_gap: gap,
        diverging: gap >= MIN_DIVERGENCE_GAP,
    })
}

/// Outcome of [`class_g_witness`].
#[derive(Debug, Clone)]
pub struct WitnessCheck {
    pub pass: bool,
    /// Minimum over the grid of `h(t)² / (r(t)·g(t))` with `r = log_poly`.
    pub worst_margin: f64,
    pub worst_t: f64,
}

/// Checks whether `g` witnesses membership of `h` in the class of rates with
/// `h(t)² / ((t+1)·ln(t+e)) ≥ g(t)` on the grid.
pub fn class_g_witness(h: &GrowthRate, g: &GrowthRate, grid: &Grid) -> Result<WitnessCheck> {
    let mut worst_margin = f64::INFINITY;
    let mut worst_t = grid.first();
    for &t in grid.points() {
        let hv = h.eval(t)?;
        let gv = g.eval(t)?;
        let margin = hv * hv / (log_poly(t) * gv);
        if margin < worst_margin {
            worst_margin = margin;
            worst_t = t;
        }
    }
    Ok(WitnessCheck {
        pass: worst_margin >= 1.0 - RATE_EQ_TOL,
        worst_margin,
        worst_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logpoly_at_zero_is_one() {
        let h = GrowthRate::logpoly();
        assert_relative_eq!(h.eval(0.0).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn exponential_at_zero_is_exactly_one() {
        let h = GrowthRate::exponential(1.0).unwrap();
        assert_eq!(h.eval(0.0).unwrap(), 1.0);
    }

    #[test]
    fn logpoly_at_two() {
        // Independent evaluation of (t+1)·ln(t+e) at t = 2.
        let expected = 3.0 * (2.0 + E).ln();
        let h = GrowthRate::logpoly();
        assert_relative_eq!(h.eval(2.0).unwrap(), expected, max_relative = 1e-12);
        assert_relative_eq!(h.eval(2.0).unwrap(), 4.6543, max_relative = 1e-4);
    }

    #[test]
    fn negative_time_is_domain_error() {
        let h = GrowthRate::logpoly();
        assert!(matches!(h.eval(-0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn eval_is_deterministic() {
        let h = GrowthRate::parse("exp:0.37").unwrap();
        let a = h.eval(3.21).unwrap();
        let b = h.eval(3.21).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn builtin_rates_pass_grid_check() {
        let grid = Grid::uniform(10.0, 101).unwrap();
        for spec in ["logpoly", "poly:2", "exp:1"] {
            let rate = GrowthRate::parse(spec).unwrap();
            let check = check_growth_rate(&rate, &grid).unwrap();
            assert!(check.pass, "{spec} should pass");
            assert!(check.diverging, "{spec} should flag divergence");
        }
    }

    #[test]
    fn table_below_one_fails_at_the_right_point() {
        let rate = GrowthRate::from_table(vec![(0.0, 1.0), (1.0, 0.5)]).unwrap();
        let grid = Grid::from_points(vec![0.0, 1.0]).unwrap();
        let check = check_growth_rate(&rate, &grid).unwrap();
        assert!(!check.pass);
        let v = check.first_violation.unwrap();
        assert_eq!(v.t, 1.0);
        assert_eq!(v.reason, "value below 1");
    }

    #[test]
    fn table_interpolates_and_rejects_extrapolation() {
        let rate = GrowthRate::from_table(vec![(0.0, 1.0), (2.0, 3.0)]).unwrap();
        assert_relative_eq!(rate.eval(1.0).unwrap(), 2.0, max_relative = 1e-15);
        assert!(rate.eval(3.0).is_err());
    }

    #[test]
    fn logpoly_witnesses_itself_with_margin_one() {
        // h² / (r·g) with h = g = r is exactly 1 at every grid point.
        let h = GrowthRate::logpoly();
        let grid = Grid::uniform(10.0, 101).unwrap();
        let check = class_g_witness(&h, &h, &grid).unwrap();
        assert!(check.pass);
        assert_eq!(check.worst_margin, 1.0);
    }

    #[test]
    fn linear_rate_fails_logpoly_witness() {
        // (t+1)²/r(t) = (t+1)/ln(t+e) grows slower than r(t); compare at t=10.
        let h = GrowthRate::polynomial(1.0).unwrap();
        let g = GrowthRate::logpoly();
        let lhs = 121.0 / log_poly(10.0);
        let rhs = log_poly(10.0);
        assert!(lhs < rhs);
        let grid = Grid::uniform(10.0, 101).unwrap();
        let check = class_g_witness(&h, &g, &grid).unwrap();
        assert!(!check.pass);
        assert!(check.worst_margin < 1.0);
    }

    #[test]
    fn exponential_witnesses_itself_on_coarse_grid() {
        // e^{2t}/(r(t)·e^t) = e^t/r(t) ≥ 1 holds at integer times on [0, 10]
        // (r overtakes e^t on a band inside (0, 1), so fine grids reject it).
        let h = GrowthRate::exponential(1.0).unwrap();
        let coarse = Grid::from_points((0..=10).map(f64::from).collect()).unwrap();
        let check = class_g_witness(&h, &h, &coarse).unwrap();
        assert!(check.pass, "worst margin {}", check.worst_margin);

        let fine = Grid::uniform(10.0, 101).unwrap();
        let check = class_g_witness(&h, &h, &fine).unwrap();
        assert!(!check.pass);
        assert!(check.worst_t > 0.0 && check.worst_t < 1.0);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(GrowthRate::parse("exp:-1").is_err());
        assert!(GrowthRate::parse("poly:abc").is_err());
        assert!(GrowthRate::parse("linear").is_err());
    }

    #[test]
    fn rates_are_monotone_and_bounded_below_on_grid_pairs() {
        let grid = Grid::uniform(10.0, 101).unwrap();
        for spec in ["logpoly", "poly:0.5", "exp:0.25"] {
            let rate = GrowthRate::parse(spec).unwrap();
            let mut prev = 0.0;
            for &t in grid.points() {
                let v = rate.eval(t).unwrap();
                assert!(v >= 1.0, "{spec} dipped below 1 at {t}");
                assert!(v >= prev, "{spec} decreased at {t}");
                prev = v;
            }
        }
    }
}
