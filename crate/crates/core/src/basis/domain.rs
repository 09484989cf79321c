//! The admissible set of nonlinear parameters: a box intersected with
//! ordering chains that carry a minimum gap.

use super::isotonic::{bounded_isotonic, chain_feasible};
use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Relative slack used when testing membership, so that projected points
/// which round across a face by an ulp still count as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// `{ξ : lo ≤ ξ ≤ hi, ξ_{c_{k+1}} − ξ_{c_k} ≥ gap along every chain c}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
    chains: Vec<Vec<usize>>,
    gap: f64,
}

impl NonlinearDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, chains: Vec<Vec<usize>>, gap: f64) -> Result<Self> {
        let n = lo.len();
        if n == 0 {
            return Err(Error::InvalidDomain("dimension must be positive".into()));
        }
        if hi.len() != n {
            return Err(Error::InvalidDomain(format!(
                "lo has {n} entries but hi has {}",
                hi.len()
            )));
        }
        for i in 0..n {
            if !(lo[i].is_finite() && hi[i].is_finite() && lo[i] < hi[i]) {
                return Err(Error::InvalidDomain(format!(
                    "coordinate {i}: need finite lo < hi, got [{}, {}]",
                    lo[i], hi[i]
                )));
            }
        }
        if !(gap.is_finite() && gap >= 0.0) {
            return Err(Error::InvalidDomain(format!("gap must be ≥ 0, got {gap}")));
        }
        let mut seen = vec![false; n];
        for chain in &chains {
            for &i in chain {
                if i >= n {
                    return Err(Error::InvalidDomain(format!(
                        "chain index {i} out of range for dimension {n}"
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidDomain(format!(
                        "coordinate {i} appears in more than one chain position"
                    )));
                }
                seen[i] = true;
            }
        }
        let chains: Vec<Vec<usize>> = chains.into_iter().filter(|c| c.len() > 1).collect();
        let d = Self { lo, hi, chains, gap };
        for (ci, chain) in d.chains.iter().enumerate() {
            let (slo, shi) = d.shifted_bounds(chain);
            if !chain_feasible(&slo, &shi) {
                return Err(Error::InvalidDomain(format!(
                    "chain {ci} {chain:?} cannot fit gap {gap} inside its boxes"
                )));
            }
        }
        Ok(d)
    }

    /// A plain box without ordering constraints.
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::new(lo, hi, Vec::new(), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn chains(&self) -> &[Vec<usize>] {
        &self.chains
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Euclidean diameter of the bounding box.
    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    fn tol(&self, i: usize) -> f64 {
        FEASIBILITY_TOL * (1.0 + self.lo[i].abs().max(self.hi[i].abs()))
    }

    /// Human-readable list of violated constraints; empty iff `ξ` is admissible.
    pub fn violations(&self, xi: &[f64]) -> Vec<String> {
        let mut out = Vec::new();
        if xi.len() != self.dim() {
            out.push(format!("expected {} parameters, got {}", self.dim(), xi.len()));
            return out;
        }
        for (i, &x) in xi.iter().enumerate() {
            if !x.is_finite() {
                out.push(format!("xi[{i}] = {x} is not finite"));
            } else if x < self.lo[i] - self.tol(i) {
                out.push(format!("xi[{i}] = {x} < lower bound {}", self.lo[i]));
            } else if x > self.hi[i] + self.tol(i) {
                out.push(format!("xi[{i}] = {x} > upper bound {}", self.hi[i]));
            }
        }
        for chain in &self.chains {
            for pair in chain.windows(2) {
                let (i, j) = (pair[0], pair[1]);
                let tol = self.tol(i).max(self.tol(j));
                if xi[j] - xi[i] < self.gap - tol {
                    out.push(format!("xi[{j}] - xi[{i}] = {} < gap {}", xi[j] - xi[i], self.gap));
                }
            }
        }
        out
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        self.violations(xi).is_empty()
    }

    pub fn validate(&self, xi: &[f64]) -> Result<()> {
        let violations = self.violations(xi);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::DomainViolation { violations })
        }
    }

    /// Bounds of a chain after the substitution `z'_k = z_k − k·gap`.
    fn shifted_bounds(&self, chain: &[usize]) -> (Vec<f64>, Vec<f64>) {
        chain
            .iter()
            .enumerate()
            .map(|(k, &i)| {
                let s = k as f64 * self.gap;
                (self.lo[i] - s, self.hi[i] - s)
            })
            .unzip()
    }

    /// Projection of `y` onto the domain in the norm `Σ dᵢ zᵢ²`.
    ///
    /// Free coordinates are clamped; each chain is solved by bounded
    /// weighted isotonic regression in shifted variables.
    pub fn project_weighted(&self, y: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if y.len() != n || d.len() != n {
            return Err(Error::InvalidArgument(format!(
                "projection expects {n} entries, got {} and {}",
                y.len(),
                d.len()
            )));
        }
        let mut z: Vec<f64> = (0..n).map(|i| y[i].clamp(self.lo[i], self.hi[i])).collect();
        for chain in &self.chains {
            let (slo, shi) = self.shifted_bounds(chain);
            let sy: Vec<f64> = chain
                .iter()
                .enumerate()
                .map(|(k, &i)| y[i] - k as f64 * self.gap)
                .collect();
            let w: Vec<f64> = chain.iter().map(|&i| d[i]).collect();
            let sz =
                bounded_isotonic(&sy, &w, &slo, &shi).ok_or_else(|| Error::InvalidDomain("infeasible chain".into()))?;
            for (k, &i) in chain.iter().enumerate() {
                z[i] = (sz[k] + k as f64 * self.gap).clamp(self.lo[i], self.hi[i]);
            }
        }
        Ok(z)
    }

    /// Euclidean projection.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.project_weighted(y, &vec![1.0; self.dim()])
    }

    /// A feasible point: the projection of the box centre.
    pub fn center(&self) -> Vec<f64> {
        let mid: Vec<f64> = self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect();
        self.project(&mid).expect("validated domain is feasible")
    }

    /// Uniform draw in the box, chain coordinates sorted, then projected.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut y: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| rng.random_range(l..=h))
            .collect();
        for chain in &self.chains {
            let mut vals: Vec<f64> = chain.iter().map(|&i| y[i]).collect();
            vals.sort_by(f64::total_cmp);
            for (&i, v) in chain.iter().zip(vals) {
                y[i] = v;
            }
        }
        self.project(&y).expect("validated domain is feasible")
    }

    /// All box corners projected onto the domain (deduplicated, in
    /// lexicographic corner order). Empty above 12 dimensions.
    pub fn projected_corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        if n > 12 {
            return Vec::new();
        }
        let mut out: Vec<Vec<f64>> = Vec::new();
        for mask in 0..(1usize << n) {
            let corner: Vec<f64> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                .collect();
            let p = self.project(&corner).expect("validated domain is feasible");
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    /// Constraints active at `xi` (within `tol`): per-coordinate lower and
    /// upper activity, and for each chain link whether the gap is tight.
    pub fn active_set(&self, xi: &[f64], tol: f64) -> ActiveSet {
        let n = self.dim();
        let at_lo = (0..n).map(|i| xi[i] - self.lo[i] <= tol).collect();
        let at_hi = (0..n).map(|i| self.hi[i] - xi[i] <= tol).collect();
        let tight_links = self
            .chains
            .iter()
            .map(|c| c.windows(2).map(|p| xi[p[1]] - xi[p[0]] - self.gap <= tol).collect())
            .collect();
        ActiveSet {
            at_lo,
            at_hi,
            tight_links,
        }
    }

    /// Euclidean projection of `v` onto the tangent cone at a point with the
    /// given active set.
    pub fn project_tangent(&self, v: &[f64], active: &ActiveSet) -> Vec<f64> {
        let n = self.dim();
        let inf = f64::INFINITY;
        let bound = |i: usize| -> (f64, f64) {
            (
                if active.at_lo[i] { 0.0 } else { -inf },
                if active.at_hi[i] { 0.0 } else { inf },
            )
        };
        let mut out: Vec<f64> = (0..n)
            .map(|i| {
                let (l, h) = bound(i);
                v[i].clamp(l, h)
            })
            .collect();
        for (chain, tight) in self.chains.iter().zip(&active.tight_links) {
            // Split into runs connected by tight links; each run is an
            // isotonic cone intersected with sign constraints.
            let mut start = 0;
            for k in 0..chain.len() {
                let run_ends = k + 1 == chain.len() || !tight[k];
                if !run_ends {
                    continue;
                }
                let run = &chain[start..=k];
                if run.len() > 1 {
                    let y: Vec<f64> = run.iter().map(|&i| v[i]).collect();
                    let (lo, hi): (Vec<f64>, Vec<f64>) = run.iter().map(|&i| bound(i)).unzip();
                    let w = vec![1.0; run.len()];
                    // The cone always contains 0, so this never fails.
                    let z = bounded_isotonic(&y, &w, &lo, &hi).unwrap_or(vec![0.0; run.len()]);
                    for (&i, zi) in run.iter().zip(z) {
                        out[i] = zi;
                    }
                }
                start = k + 1;
            }
        }
        out
    }
}

/// Active constraints at a point of a [`NonlinearDomain`].
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    pub at_lo: Vec<bool>,
    pub at_hi: Vec<bool>,
    /// Per chain, per consecutive pair: gap attained.
    pub tight_links: Vec<Vec<bool>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ordered(gap: f64) -> NonlinearDomain {
        NonlinearDomain::new(vec![0.0; 3], vec![1.0; 3], vec![vec![0, 1, 2]], gap).unwrap()
    }

    #[test]
    fn rejects_malformed_specs() {
        assert!(NonlinearDomain::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(NonlinearDomain::new(vec![0.0; 2], vec![1.0; 2], vec![vec![0, 2]], 0.0).is_err());
        assert!(NonlinearDomain::new(vec![0.0; 2], vec![1.0; 2], vec![vec![0, 1], vec![1]], 0.0).is_err());
        // Three knots in [0,1] cannot be 0.6 apart.
        assert!(NonlinearDomain::new(vec![0.0; 3], vec![1.0; 3], vec![vec![0, 1, 2]], 0.6).is_err());
    }

    #[test]
    fn violations_name_the_constraint() {
        let d = ordered(0.1);
        let v = d.violations(&[0.5, 0.55, 1.2]);
        assert_eq!(v.len(), 2);
        assert!(v[0].contains("xi[2]"));
        assert!(v[1].contains("gap"));
        assert!(matches!(
            d.validate(&[0.5, 0.55, 1.2]),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn chain_projection_pools_violators() {
        let d = NonlinearDomain::new(vec![0.0; 2], vec![1.0; 2], vec![vec![0, 1]], 0.0).unwrap();
        assert_eq!(d.project(&[0.6, 0.4]).unwrap(), vec![0.5, 0.5]);
        let d = NonlinearDomain::new(vec![0.0; 2], vec![1.0; 2], vec![vec![0, 1]], 0.2).unwrap();
        let p = d.project(&[0.6, 0.4]).unwrap();
        assert!((p[0] - 0.4).abs() < 1e-15 && (p[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn center_and_samples_are_feasible() {
        let d = ordered(0.2);
        assert!(d.contains(&d.center()));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            assert!(d.contains(&d.sample(&mut rng)));
        }
        for c in d.projected_corners() {
            assert!(d.contains(&c));
        }
    }

    #[test]
    fn tangent_projection_respects_activity() {
        let d = NonlinearDomain::new(vec![0.0; 2], vec![1.0; 2], vec![vec![0, 1]], 0.0).unwrap();
        // At (0, 0.5) only the lower bound of coordinate 0 is active.
        let a = d.active_set(&[0.0, 0.5], 1e-12);
        assert_eq!(d.project_tangent(&[-1.0, 2.0], &a), vec![0.0, 2.0]);
        // At (0.5, 0.5) the link is tight: directions must keep order.
        let a = d.active_set(&[0.5, 0.5], 1e-12);
        assert_eq!(d.project_tangent(&[1.0, -1.0], &a), vec![0.0, 0.0]);
        assert_eq!(d.project_tangent(&[-1.0, 1.0], &a), vec![-1.0, 1.0]);
    }

    fn direct_membership(d: &NonlinearDomain, x: &[f64]) -> bool {
        (0..d.dim()).all(|i| x[i] >= d.lo()[i] && x[i] <= d.hi()[i])
            && d.chains()
                .iter()
                .all(|c| c.windows(2).all(|p| x[p[1]] - x[p[0]] >= d.gap()))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn validation_matches_direct_predicate(
            x in prop::collection::vec(-0.2f64..1.2, 3),
            gap in 0.0f64..0.3,
        ) {
            let d = NonlinearDomain::new(vec![0.0; 3], vec![1.0; 3], vec![vec![0, 2]], gap).unwrap();
            // Stay clear of the tolerance band around faces.
            let near_face = (0..3).any(|i| x[i].abs() < 1e-9 || (x[i] - 1.0).abs() < 1e-9)
                || (x[2] - x[0] - gap).abs() < 1e-9;
            prop_assume!(!near_face);
            prop_assert_eq!(d.contains(&x), direct_membership(&d, &x));
        }

        #[test]
        fn projection_is_feasible_and_idempotent(
            y in prop::collection::vec(-1.0f64..2.0, 3),
            w in prop::collection::vec(0.1f64..5.0, 3),
            gap in 0.0f64..0.4,
        ) {
            let d = ordered(gap);
            let p = d.project_weighted(&y, &w).unwrap();
            prop_assert!(d.contains(&p));
            let q = d.project_weighted(&p, &w).unwrap();
            for i in 0..3 {
                prop_assert!((p[i] - q[i]).abs() <= 1e-14);
            }
        }

        #[test]
        fn projection_beats_feasible_samples(
            y in prop::collection::vec(-1.0f64..2.0, 3),
            w in prop::collection::vec(0.1f64..5.0, 3),
            seed in any::<u64>(),
        ) {
            let d = ordered(0.1);
            let p = d.project_weighted(&y, &w).unwrap();
            let cost = |z: &[f64]| -> f64 { (0..3).map(|i| w[i] * (z[i] - y[i]).powi(2)).sum() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..200 {
                let z = d.sample(&mut rng);
                prop_assert!(cost(&z) >= cost(&p) - 1e-12);
            }
        }
    }
}
