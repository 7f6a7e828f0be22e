//! Deterministic point sampling over coordinate boxes.

use crate::error::{Error, Result};
use crate::expr::StatePoint;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Grid,
    Random,
}

/// Where residual checks are evaluated.
///
/// `bounds` has one `[lo, hi]` pair per chart coordinate in the order
/// `q1..qn, v1..vn, z`; a single pair is broadcast to every coordinate.
/// Grid mode uses `m` nodes per axis, `m` the largest integer with
/// `m^(2n+1) <= count`. Extra `points` are appended verbatim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub mode: SampleMode,
    pub seed: u64,
    pub bounds: Vec<[f64; 2]>,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<f64>>,
}

/// Accepted points plus the number of candidates rejected on the way.
#[derive(Clone, Debug)]
pub struct Sample {
    pub points: Vec<StatePoint>,
    pub rejected: usize,
}

impl SamplePlan {
    pub fn random(bounds: Vec<[f64; 2]>, count: usize, seed: u64) -> Self {
        SamplePlan {
            mode: SampleMode::Random,
            seed,
            bounds,
            count,
            points: Vec::new(),
        }
    }

    /// Seeded random plan on the cube `[lo, hi]^(2n+1)`.
    pub fn cube(lo: f64, hi: f64, count: usize, seed: u64) -> Self {
        Self::random(vec![[lo, hi]], count, seed)
    }

    pub fn grid(bounds: Vec<[f64; 2]>, count: usize) -> Self {
        SamplePlan {
            mode: SampleMode::Grid,
            seed: 0,
            bounds,
            count,
            points: Vec::new(),
        }
    }

    /// Only the given points.
    pub fn explicit(points: Vec<Vec<f64>>) -> Self {
        SamplePlan {
            mode: SampleMode::Random,
            seed: 0,
            bounds: Vec::new(),
            count: 0,
            points,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let dim = 2 * n + 1;
        if self.count == 0 && self.points.is_empty() {
            return Err(Error::Precondition("sample plan has no points".into()));
        }
        if self.count > 0 {
            if self.bounds.len() != 1 && self.bounds.len() != dim {
                return Err(Error::Dimension(format!(
                    "sample plan needs 1 or {dim} bounds, got {}",
                    self.bounds.len()
                )));
            }
            for [lo, hi] in &self.bounds {
                if !lo.is_finite() || !hi.is_finite() || lo > hi {
                    return Err(Error::Precondition(format!("invalid bounds [{lo}, {hi}]")));
                }
            }
        }
        for p in &self.points {
            if p.len() != dim {
                return Err(Error::Dimension(format!(
                    "explicit point has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
        }
        Ok(())
    }

    fn bound(&self, axis: usize) -> [f64; 2] {
        if self.bounds.len() == 1 {
            self.bounds[0]
        } else {
            self.bounds[axis]
        }
    }

    fn grid_nodes(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut m = 1usize;
        while (m + 1).checked_pow(dim as u32).is_some_and(|t| t <= self.count) {
            m += 1;
        }
        let axis = |a: usize, k: usize| {
            let [lo, hi] = self.bound(a);
            if m == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * k as f64 / (m - 1) as f64
            }
        };
        let total = m.pow(dim as u32);
        (0..total)
            .map(|mut idx| {
                (0..dim)
                    .map(|a| {
                        let k = idx % m;
                        idx /= m;
                        axis(a, k)
                    })
                    .collect()
            })
            .collect()
    }

    /// All points, without filtering.
    pub fn points(&self, n: usize) -> Result<Vec<StatePoint>> {
        Ok(self.points_where(n, |_| true)?.points)
    }

    /// Points satisfying `accept`. Random mode draws replacements for
    /// rejected candidates, giving up after `10 * count` draws; grid and
    /// explicit points are dropped when rejected.
    pub fn points_where(&self, n: usize, accept: impl Fn(&StatePoint) -> bool) -> Result<Sample> {
        self.validate(n)?;
        let dim = 2 * n + 1;
        let mut out = Vec::new();
        let mut rejected = 0;
        let mut take = |coords: Vec<f64>, out: &mut Vec<StatePoint>| -> Result<bool> {
            let p = StatePoint::from_coords(n, coords)?;
            if accept(&p) {
                out.push(p);
                Ok(true)
            } else {
                rejected += 1;
                Ok(false)
            }
        };
        if self.count > 0 {
            match self.mode {
                SampleMode::Grid => {
                    for c in self.grid_nodes(dim) {
                        take(c, &mut out)?;
                    }
                }
                SampleMode::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                    let mut draws = 0;
                    let mut accepted = 0;
                    while accepted < self.count {
                        if draws >= 10 * self.count {
                            return Err(Error::Precondition(format!(
                                "only {accepted} of {} sample points accepted after {draws} draws",
                                self.count
                            )));
                        }
                        draws += 1;
                        let c = (0..dim)
                            .map(|a| {
                                let [lo, hi] = self.bound(a);
                                if lo == hi {
                                    lo
                                } else {
                                    rng.random_range(lo..hi)
                                }
                            })
                            .collect();
                        if take(c, &mut out)? {
                            accepted += 1;
                        }
                    }
                }
            }
        }
        for c in &self.points {
            take(c.clone(), &mut out)?;
        }
        if out.is_empty() {
            return Err(Error::Precondition("every sample point was rejected".into()));
        }
        Ok(Sample {
            points: out,
            rejected,
        })
    }
}

/// Maps `f` over `points` in parallel, keeping point order.
pub fn map_points<T: Send>(
    points: &[StatePoint],
    f: impl Fn(&StatePoint) -> T + Sync + Send,
) -> Vec<T> {
    points.par_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_points() {
        let plan = SamplePlan::cube(-1.0, 1.0, 50, 7);
        let a = plan.points(2).unwrap();
        let b = plan.points(2).unwrap();
        assert_eq!(a, b);
        let c = plan.clone().with_seed(8).points(2).unwrap();
        assert_ne!(a, c);
        assert!(a.iter().all(|p| p.coords().iter().all(|x| (-1.0..1.0).contains(x))));
    }

    #[test]
    fn grid_counts_and_corners() {
        let plan = SamplePlan::grid(vec![[0.0, 1.0], [-1.0, 1.0], [2.0, 2.0]], 30);
        let pts = plan.points(1).unwrap();
        // 3^3 = 27 <= 30 < 4^3
        assert_eq!(pts.len(), 27);
        assert_eq!(pts[0].coords(), &[0.0, -1.0, 2.0]);
        assert_eq!(pts[26].coords(), &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn rejection_resamples_and_caps() {
        let plan = SamplePlan::cube(-1.0, 1.0, 20, 3);
        let s = plan.points_where(1, |p| p.z() > 0.0).unwrap();
        assert_eq!(s.points.len(), 20);
        assert!(s.rejected > 0);
        assert!(s.points.iter().all(|p| p.z() > 0.0));
        assert!(plan.points_where(1, |_| false).is_err());
    }

    #[test]
    fn explicit_points_and_validation() {
        let plan = SamplePlan::explicit(vec![vec![1.0, 1.0, -1.0]]);
        assert_eq!(plan.points(1).unwrap()[0].z(), -1.0);
        assert!(plan.points(2).is_err());
        assert!(SamplePlan::cube(1.0, 0.0, 3, 0).points(1).is_err());
        assert!(SamplePlan::random(vec![[0.0, 1.0]; 2], 3, 0).points(1).is_err());
    }
}
