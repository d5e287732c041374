//! Time grids over `[0, ∞)`.
//!
//! Every check in this crate quantifies over a finite, strictly increasing,
//! nonnegative grid. A single *shared* grid doubles as the supremum index set
//! of the Lyapunov-type norm families; several exactness properties depend on
//! all scans using one grid, so the type is deliberately rigid: no
//! interpolation, exact membership lookups only.

use crate::error::{Error, Result};

/// Relative tolerance for matching a query time against a grid point.
const MATCH_TOL: f64 = 1e-12;

/// A finite, strictly increasing, nonnegative time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    /// Builds a grid from explicit points (must be finite, nonnegative and
    /// strictly increasing; at least one point).
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Grid("grid must contain at least one point".into()));
        }
        for (idx, &p) in points.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Grid(format!(
                    "grid point {p} at index {idx} is not a finite nonnegative time"
                )));
            }
            if idx > 0 && points[idx - 1] >= p {
                return Err(Error::Grid(format!(
                    "grid must be strictly increasing; violated at index {idx}"
                )));
            }
        }
        Ok(Grid { points })
    }

    /// Uniform grid on `[0, t_max]` with `n` points. `n == 1` degenerates to
    /// the single point `0`.
    pub fn uniform(t_max: f64, n: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::Grid(format!("t_max must be positive, got {t_max}")));
        }
        if n == 0 {
            return Err(Error::Grid("grid must contain at least one point".into()));
        }
        if n == 1 {
            return Grid::from_points(vec![0.0]);
        }
        let last = (n - 1) as f64;
        let points = (0..n).map(|i| t_max * i as f64 / last).collect();
        Grid::from_points(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one point
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.points[idx]
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Exact membership lookup. Norm families refuse off-grid times rather
    /// than interpolating.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let idx = self
            .points
            .partition_point(|&p| p < t - MATCH_TOL * t.abs().max(1.0));
        if idx < self.points.len() {
            let p = self.points[idx];
            if (p - t).abs() <= MATCH_TOL * t.abs().max(1.0) {
                return Ok(idx);
            }
        }
        Err(Error::Domain(format!("time {t} is not a grid point")))
    }

    /// All index pairs `(i, j)` with `i >= j`, i.e. `(t, s) ∈ Δ` on the grid.
    pub fn pair_indices(&self) -> Vec<(usize, usize)> {
        let n = self.points.len();
        let mut pairs = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                pairs.push((i, j));
            }
        }
        pairs
    }

    /// True if `self` is the leading segment of `other` (pointwise bit-equal).
    pub fn is_prefix_of(&self, other: &Grid) -> bool {
        self.points.len() <= other.points.len()
            && self
                .points
                .iter()
                .zip(other.points.iter())
                .all(|(a, b)| a == b)
    }

    /// The leading half of the grid (indices `0..=len/2`), used for
    /// horizon-stability comparisons.
    pub fn half_prefix(&self) -> Grid {
        let keep = self.points.len() / 2 + 1;
        Grid {
            points: self.points[..keep].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_hits_round_times() {
        let g = Grid::uniform(10.0, 101).unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g.at(0), 0.0);
        assert_eq!(g.at(10), 1.0);
        assert_eq!(g.at(100), 10.0);
        assert_eq!(g.index_of(1.0).unwrap(), 10);
        assert!(g.index_of(1.05).is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::from_points(vec![]).is_err());
        assert!(Grid::from_points(vec![0.0, 0.0]).is_err());
        assert!(Grid::from_points(vec![-1.0, 0.0]).is_err());
        assert!(Grid::from_points(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn single_point_grid() {
        let g = Grid::uniform(10.0, 1).unwrap();
        assert_eq!(g.points(), &[0.0]);
        assert_eq!(g.pair_indices(), vec![(0, 0)]);
    }

    #[test]
    fn doubled_horizon_grid_nests() {
        let small = Grid::uniform(10.0, 101).unwrap();
        let large = Grid::uniform(20.0, 201).unwrap();
        assert!(small.is_prefix_of(&large));
        assert!(!large.is_prefix_of(&small));
    }

    #[test]
    fn half_prefix_is_prefix() {
        let g = Grid::uniform(20.0, 201).unwrap();
        let h = g.half_prefix();
        assert_eq!(h.len(), 101);
        assert_eq!(h.last(), 10.0);
        assert!(h.is_prefix_of(&g));
    }
}
