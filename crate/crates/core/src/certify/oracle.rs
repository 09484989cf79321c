//! Representations of the set `𝕏*` of best nonlinear parameters and the
//! Bregman distance `δ*_ψ` to it.

use super::synthetic::ReducedObjective;
use crate::error::{Error, Result};
use crate::optimizer::LIPSCHITZ_SAFETY;
use crate::updates::Geometry;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest grid the search oracle evaluates.
pub const GRID_POINT_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Analytic,
    GridSearch,
}

/// `𝕏*` as a finite sample or a sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimalSet {
    Points { points: Vec<Vec<f64>> },
    Sphere { center: Vec<f64>, radius: f64 },
}

/// `𝒦*` and `𝕏*` with their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimiserOracle {
    pub kind: OracleKind,
    /// Best value found (exact for analytic oracles).
    pub k_star: f64,
    /// A lower bound on the true `𝒦*`.
    pub k_star_lower: f64,
    pub set: OptimalSet,
    pub resolution: Option<f64>,
    /// Lipschitz constant of `∇𝒦̄` used for the slacks.
    pub l_bar: Option<f64>,
    /// Grid points where the system could not be solved.
    pub skipped: usize,
}

impl MinimiserOracle {
    pub fn analytic_points(k_star: f64, points: Vec<Vec<f64>>) -> Self {
        MinimiserOracle {
            kind: OracleKind::Analytic,
            k_star,
            k_star_lower: k_star,
            set: OptimalSet::Points { points },
            resolution: None,
            l_bar: None,
            skipped: 0,
        }
    }
}

/// `δ*_ψ(ξ) = min_{ξ* ∈ 𝕏*} D_ψ(ξ*; ξ)` and a minimiser `ξ*`.
///
/// Spheres are supported for the Euclidean geometry only.
pub fn delta_star(geometry: &Geometry, oracle: &MinimiserOracle, xi: &[f64]) -> Result<(f64, Vec<f64>)> {
    match &oracle.set {
        OptimalSet::Points { points } => {
            let mut best: Option<(f64, &Vec<f64>)> = None;
            for p in points {
                if p.len() != xi.len() {
                    return Err(Error::InvalidArgument("oracle point has the wrong dimension".into()));
                }
                let d = geometry.bregman_div(p, xi);
                if best.is_none_or(|(b, _)| d < b) {
                    best = Some((d, p));
                }
            }
            best.map(|(d, p)| (d, p.clone())).ok_or(Error::EmptyOracle)
        }
        OptimalSet::Sphere { center, radius } => {
            if !matches!(geometry, Geometry::Euclidean) {
                return Err(Error::Incompatible("sphere oracles need the Euclidean geometry".into()));
            }
            if center.len() != xi.len() {
                return Err(Error::InvalidArgument("sphere has the wrong dimension".into()));
            }
            let diff: Vec<f64> = xi.iter().zip(center).map(|(x, c)| x - c).collect();
            let r = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
            let star: Vec<f64> = if r > 0.0 {
                center.iter().zip(&diff).map(|(c, d)| c + radius * d / r).collect()
            } else {
                let mut s = center.clone();
                s[0] += radius;
                s
            };
            Ok((0.5 * (r - radius) * (r - radius), star))
        }
    }
}

/// Exhaustive search of `𝒦̄` over the feasible points of the grid
/// `lo + j·resolution` (aligned at `lo`, so halving the resolution refines
/// the grid).
///
/// With `L̄` the Lipschitz constant of `∇𝒦̄` (estimated from grid second
/// differences when `l_bar` is `None`) and `d = dim 𝕏`:
/// * `𝕏*` keeps the points within `½L̄·d·resolution²` of the grid minimum;
/// * `𝒦*` is bounded below by the grid minimum minus `½L̄·d·(resolution/2)²`.
///
/// Points where `A(ξ)` is not positive definite are skipped and counted.
pub fn minimiser_grid_oracle(
    objective: &ReducedObjective,
    resolution: f64,
    l_bar: Option<f64>,
) -> Result<MinimiserOracle> {
    let dom = objective.model().domain();
    let dim = dom.dim();
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::InvalidArgument(format!("resolution = {resolution}")));
    }
    if dim > 3 {
        return Err(Error::GridTooLarge {
            points: usize::MAX,
            limit: GRID_POINT_LIMIT,
        });
    }
    let counts: Vec<usize> = (0..dim)
        .map(|i| ((dom.hi()[i] - dom.lo()[i]) / resolution + 1e-9).floor() as usize + 1)
        .collect();
    let total = counts
        .iter()
        .try_fold(1usize, |acc, &c| acc.checked_mul(c))
        .unwrap_or(usize::MAX);
    if total > GRID_POINT_LIMIT {
        return Err(Error::GridTooLarge {
            points: total,
            limit: GRID_POINT_LIMIT,
        });
    }
    let point = |mut idx: usize| -> Vec<f64> {
        let mut p = vec![0.0; dim];
        for i in (0..dim).rev() {
            p[i] = dom.lo()[i] + (idx % counts[i]) as f64 * resolution;
            idx /= counts[i];
        }
        p
    };
    let values: Vec<Option<f64>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let p = point(idx);
            if !dom.contains(&p) {
                return None;
            }
            objective.value(&p).ok()
        })
        .collect();
    let feasible = values.iter().filter(|v| v.is_some()).count();
    let infeasible = (0..total).filter(|&i| !dom.contains(&point(i))).count();
    let skipped = total - feasible - infeasible;
    let k_star = values.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !k_star.is_finite() {
        return Err(Error::EmptyOracle);
    }

    let l_bar = match l_bar {
        Some(l) => l,
        None => {
            // Largest axis-wise second difference over the grid.
            let mut curv: f64 = 0.0;
            let mut stride = 1;
            for i in (0..dim).rev() {
                for idx in 0..total {
                    let j = (idx / stride) % counts[i];
                    if j == 0 || j + 1 == counts[i] {
                        continue;
                    }
                    if let (Some(a), Some(b), Some(c)) = (values[idx - stride], values[idx], values[idx + stride]) {
                        curv = curv.max((a - 2.0 * b + c).abs() / (resolution * resolution));
                    }
                }
                stride *= counts[i];
            }
            LIPSCHITZ_SAFETY * curv
        }
    };
    let d = dim as f64;
    let set_slack = 0.5 * l_bar * d * resolution * resolution;
    let lower_slack = 0.5 * l_bar * d * 0.25 * resolution * resolution;
    let points: Vec<Vec<f64>> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.filter(|v| *v <= k_star + set_slack).map(|_| point(i)))
        .collect();
    Ok(MinimiserOracle {
        kind: OracleKind::GridSearch,
        k_star,
        k_star_lower: k_star - lower_slack,
        set: OptimalSet::Points { points },
        resolution: Some(resolution),
        l_bar: Some(l_bar),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::synthetic::{circle_oracle, CircleModel, QuadraticModel};
    use crate::optimizer::tests::gaussian_fit;
    use nalgebra::DVector;

    #[test]
    fn circle_delta_star_examples() {
        let o = circle_oracle();
        let g = Geometry::Euclidean;
        let (d, s) = delta_star(&g, &o, &[2.0, 0.0]).unwrap();
        assert_eq!((d, s), (0.5, vec![1.0, 0.0]));
        let (d, s) = delta_star(&g, &o, &[0.5, 0.5]).unwrap();
        let h = 0.5f64.sqrt();
        assert!((s[0] - h).abs() < 1e-15 && (s[1] - h).abs() < 1e-15);
        assert!((d - 0.5 * (1.0 - h) * (1.0 - h)).abs() < 1e-15);
        assert!((d - 0.042893).abs() < 1e-6);
        let (d, _) = delta_star(&g, &o, &[0.6, 0.8]).unwrap();
        assert!(d < 1e-30);
        let diag = Geometry::DiagonalQuadratic { d: vec![1.0, 2.0] };
        assert!(delta_star(&diag, &o, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn point_oracle() {
        let o = MinimiserOracle::analytic_points(0.0, vec![vec![0.0], vec![1.0]]);
        let (d, s) = delta_star(&Geometry::Euclidean, &o, &[0.8]).unwrap();
        assert!((d - 0.02).abs() < 1e-15 && s == vec![1.0]);
        let empty = MinimiserOracle::analytic_points(0.0, vec![]);
        assert!(matches!(
            delta_star(&Geometry::Euclidean, &empty, &[0.0]),
            Err(Error::EmptyOracle)
        ));
    }

    #[test]
    fn grid_oracle_on_gaussian_fit() {
        let m = gaussian_fit();
        let obj = ReducedObjective::exact(&m);
        let o = minimiser_grid_oracle(&obj, 1e-3, None).unwrap();
        let OptimalSet::Points { points } = &o.set else {
            panic!()
        };
        assert!(points.iter().any(|p| (p[0] - 0.5).abs() < 1e-9));
        assert!(points.iter().all(|p| (p[0] - 0.5).abs() <= 1e-3 + 1e-9), "{points:?}");
        assert!(o.k_star_lower <= o.k_star);
        // Curvature at the minimum is √π/(2s) ≈ 8.86, doubled for safety.
        let l = o.l_bar.unwrap();
        assert!(l > 17.0 && l < 18.0, "{l}");
    }

    #[test]
    fn refining_never_raises_k_star() {
        let m = gaussian_fit();
        let obj = ReducedObjective::exact(&m);
        let coarse = minimiser_grid_oracle(&obj, 0.013, Some(20.0)).unwrap();
        let fine = minimiser_grid_oracle(&obj, 0.0065, Some(20.0)).unwrap();
        assert!(fine.k_star <= coarse.k_star);
        // The lower bound of the coarse grid is below the fine minimum.
        assert!(coarse.k_star_lower <= fine.k_star);
    }

    #[test]
    fn flat_objective_keeps_every_point() {
        let m = QuadraticModel::new(2);
        let obj = ReducedObjective::frozen(&m, DVector::zeros(1));
        let o = minimiser_grid_oracle(&obj, 0.5, None).unwrap();
        let OptimalSet::Points { points } = &o.set else {
            panic!()
        };
        assert_eq!(points.len(), 25);
        assert_eq!(o.k_star, 0.0);
    }

    #[test]
    fn oracle_points_are_near_validation_minimum() {
        let m = CircleModel::new();
        let obj = ReducedObjective::frozen(&m, DVector::from_element(1, 1.0));
        let o = minimiser_grid_oracle(&obj, 0.05, Some(CircleModel::L_BAR)).unwrap();
        let validation = minimiser_grid_oracle(&obj, 0.025, Some(CircleModel::L_BAR)).unwrap();
        let slack = 0.5 * CircleModel::L_BAR * 2.0 * 0.05 * 0.05;
        let OptimalSet::Points { points } = &o.set else {
            panic!()
        };
        for p in points {
            assert!(obj.value(p).unwrap() <= validation.k_star + slack);
        }
        assert!(o.k_star_lower <= 0.0);
    }

    #[test]
    fn guards() {
        let m = QuadraticModel::new(4);
        let obj = ReducedObjective::frozen(&m, DVector::zeros(1));
        assert!(matches!(
            minimiser_grid_oracle(&obj, 0.5, None),
            Err(Error::GridTooLarge { .. })
        ));
        let m = QuadraticModel::new(3);
        let obj = ReducedObjective::frozen(&m, DVector::zeros(1));
        assert!(matches!(
            minimiser_grid_oracle(&obj, 1e-3, None),
            Err(Error::GridTooLarge { .. })
        ));
        assert!(minimiser_grid_oracle(&obj, 0.0, None).is_err());
    }
}
