//! Galerkin matrices `A(ξ)`, `ℓ(ξ)`, `G(ξ)` and their spectral checks.

use crate::basis::{BasisFamily, Realisation};
use crate::error::{Error, Result};
use crate::variational::{norm_u, Combination, PointValue, Problem, ProblemConstants, QuadratureRule};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

/// Relative asymmetry above which assembly is reported as inconsistent.
const SYMMETRY_TOL: f64 = 1e-12;

/// Stiffness, load and Gram data at one `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSystem {
    pub a: DMatrix<f64>,
    pub l: DVector<f64>,
    pub g: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `λ_min(G)`.
    pub omega: f64,
}

impl AssembledSystem {
    /// Builds the spectral data from given matrices (used for hand-made
    /// systems in tests and synthetic objectives).
    pub fn from_parts(a: DMatrix<f64>, l: DVector<f64>, g: DMatrix<f64>) -> Result<Self> {
        let a = symmetrised(a, "A")?;
        let g = symmetrised(g, "G")?;
        let (lambda_min, lambda_max) = extreme_eigenvalues(&a);
        let (omega, _) = extreme_eigenvalues(&g);
        Ok(Self {
            a,
            l,
            g,
            lambda_min,
            lambda_max,
            omega,
        })
    }

    pub fn n(&self) -> usize {
        self.l.len()
    }

    /// `𝒦(w, ξ) = ½wᵀAw − wᵀℓ`.
    pub fn energy(&self, w: &DVector<f64>) -> f64 {
        0.5 * w.dot(&(&self.a * w)) - w.dot(&self.l)
    }

    /// `∇_W 𝒦 = Aw − ℓ`.
    pub fn grad_w(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.a * w - &self.l
    }
}

fn symmetrised(m: DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (&m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { name, asymmetry: asym });
    }
    Ok((&m + m.transpose()) * 0.5)
}

fn extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Checks that the family can represent trial functions for the problem.
pub fn check_compatible(problem: &Problem, family: &BasisFamily) -> Result<()> {
    if problem.needs_derivatives() {
        if family.regularity() != crate::variational::Regularity::H1 {
            return Err(Error::Incompatible("forms with derivatives need an H1 basis".into()));
        }
        if !family.vanishes_on_boundary() {
            return Err(Error::Incompatible(
                "Dirichlet problems need basis functions vanishing on the boundary".into(),
            ));
        }
    }
    let (lo, hi) = family.omega();
    if lo != problem.lo() || hi != problem.hi() {
        return Err(Error::Incompatible(format!(
            "basis interval ({lo}, {hi}) differs from problem interval ({}, {})",
            problem.lo(),
            problem.hi()
        )));
    }
    Ok(())
}

/// The rule split at every breakpoint of the problem and of `φ(ξ)`.
pub fn rule_for(problem: &Problem, family: &BasisFamily, rule: &QuadratureRule, xi: &[f64]) -> QuadratureRule {
    let mut extra = problem.breakpoints().to_vec();
    extra.extend(family.breakpoints(xi));
    rule.refined(&extra)
}

struct Partial {
    a: Vec<f64>,
    l: Vec<f64>,
    g: Vec<f64>,
}

/// Assembles `A_ij = a(φ_j, φ_i)`, `ℓ_j = ℓ(φ_j)`, `G_ij = (φ_j, φ_i)_U`.
///
/// Panels are processed in parallel and summed in panel order, so the
/// result does not depend on the thread count.
pub fn assemble(problem: &Problem, rule: &QuadratureRule, family: &BasisFamily, xi: &[f64]) -> Result<AssembledSystem> {
    family.domain().validate(xi)?;
    check_compatible(problem, family)?;
    let rule = rule_for(problem, family, rule, xi);
    let n = family.n_linear();
    let order = rule.order();
    let nodes = rule.nodes();
    let weights = rule.weights();

    let partials: Vec<Result<Partial>> = (0..rule.panels())
        .into_par_iter()
        .map(|p| {
            let mut part = Partial {
                a: vec![0.0; n * n],
                l: vec![0.0; n],
                g: vec![0.0; n * n],
            };
            let mut phi = vec![PointValue::ZERO; n];
            for q in p * order..(p + 1) * order {
                let (x, wt) = (nodes[q], weights[q]);
                family.eval_into(xi, x, &mut phi);
                for i in 0..n {
                    let li = wt * problem.ell_density(x, phi[i]);
                    if !li.is_finite() {
                        return Err(Error::NonFiniteIntegrand { node: x, value: li });
                    }
                    part.l[i] += li;
                    for j in 0..n {
                        let aij = wt * problem.a_density(x, phi[j], phi[i]);
                        if !aij.is_finite() {
                            return Err(Error::NonFiniteIntegrand { node: x, value: aij });
                        }
                        part.a[i * n + j] += aij;
                        part.g[i * n + j] += wt * problem.u_density(phi[j], phi[i]);
                    }
                }
            }
            Ok(part)
        })
        .collect();

    let mut a = vec![0.0; n * n];
    let mut l = vec![0.0; n];
    let mut g = vec![0.0; n * n];
    for part in partials {
        let part = part?;
        a.iter_mut().zip(&part.a).for_each(|(s, v)| *s += v);
        l.iter_mut().zip(&part.l).for_each(|(s, v)| *s += v);
        g.iter_mut().zip(&part.g).for_each(|(s, v)| *s += v);
    }
    AssembledSystem::from_parts(
        DMatrix::from_row_slice(n, n, &a),
        DVector::from_vec(l),
        DMatrix::from_row_slice(n, n, &g),
    )
}

/// `(λ_max(A), ‖a‖·‖φ(ξ)‖²_{U,2})`; the first must not exceed the second.
pub fn check_lambda_max_bound(sys: &AssembledSystem, constants: &ProblemConstants, phi_norm: f64) -> (f64, f64) {
    (sys.lambda_max, constants.norm_a * phi_norm * phi_norm)
}

/// Outcome of the uniform Gram eigenvalue check.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpdCheck {
    pub pass: bool,
    pub omega: f64,
    /// `ω(ξ) − ω_min`.
    pub margin: f64,
}

/// Passes iff `ω(ξ) ≥ ω_min`.
pub fn check_assumption_spd(sys: &AssembledSystem, omega_min: f64) -> SpdCheck {
    let margin = sys.omega - omega_min;
    SpdCheck {
        pass: margin >= 0.0,
        omega: sys.omega,
        margin,
    }
}

/// Like [`check_assumption_spd`] but as an error for the solver path.
pub fn require_spd(sys: &AssembledSystem, omega_min: f64) -> Result<()> {
    let c = check_assumption_spd(sys, omega_min);
    if c.pass {
        Ok(())
    } else {
        Err(Error::AssumptionSpdFailed {
            omega: sys.omega,
            omega_min,
        })
    }
}

/// `((‖a‖/α)·M/ω_min, (‖a‖/α)·M²/ω_min)`: the condition-number bound with
/// the sup-norm of the basis unsquared and squared.
pub fn kappa_bound(constants: &ProblemConstants, m_phi: f64, omega_min: f64) -> (f64, f64) {
    let r = constants.norm_a / constants.alpha;
    (r * m_phi / omega_min, r * m_phi * m_phi / omega_min)
}

/// The larger of the two κ variants.
pub fn kappa_max(constants: &ProblemConstants, m_phi: f64, omega_min: f64) -> f64 {
    let (a, b) = kappa_bound(constants, m_phi, omega_min);
    a.max(b)
}

/// Diagnostics for the solvability of the Galerkin system without the
/// uniform Gram bound.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConsistencyReport {
    pub kernel_dim: usize,
    /// `‖P_ker ℓ‖₂`.
    pub load_kernel_residual: f64,
    /// `‖ℛ(w₁, ξ) − ℛ(w₂, ξ)‖_U` for two least-squares solutions.
    pub realisation_gap: f64,
}

/// Eigen-decomposes `A`, treats eigenvalues below `kernel_tol·λ_max` as
/// kernel, and compares the realisations of the pseudo-inverse solution and
/// that solution shifted along every kernel direction.
pub fn check_consistency(
    problem: &Problem,
    rule: &QuadratureRule,
    family: &BasisFamily,
    xi: &[f64],
    sys: &AssembledSystem,
    kernel_tol: f64,
) -> Result<ConsistencyReport> {
    let n = sys.n();
    let eig = SymmetricEigen::new(sys.a.clone());
    let lmax = eig.eigenvalues.amax();
    let cutoff = kernel_tol * lmax;
    let mut w1 = DVector::zeros(n);
    let mut kernel_sum = DVector::zeros(n);
    let mut proj_sq = 0.0;
    let mut kernel_dim = 0;
    for k in 0..n {
        let v = eig.eigenvectors.column(k);
        let c = v.dot(&sys.l);
        if eig.eigenvalues[k].abs() <= cutoff {
            kernel_dim += 1;
            proj_sq += c * c;
            kernel_sum += v;
        } else {
            w1 += v * (c / eig.eigenvalues[k]);
        }
    }
    let w2 = &w1 + &kernel_sum;
    let r1 = Realisation::new(family, xi, w1.as_slice())?;
    let r2 = Realisation::new(family, xi, w2.as_slice())?;
    let diff = Combination::difference(&r1, &r2);
    let gap = norm_u(problem, rule, &diff)?;
    Ok(ConsistencyReport {
        kernel_dim,
        load_kernel_residual: proj_sq.sqrt(),
        realisation_gap: gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{FamilyKind, NonlinearDomain, ParamGradMode};
    use crate::variational::{bilinear, inner_u, scalar_fn, FnField, ProblemForms};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> ProblemConstants {
        ProblemConstants::new(1.0, 1.0, 1.0).unwrap()
    }

    fn l2(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Problem {
        Problem::l2_approx(0.0, 1.0, FnField::l2(scalar_fn(f)), unit()).unwrap()
    }

    fn rule() -> QuadratureRule {
        QuadratureRule::uniform(0.0, 1.0, 8, 8).unwrap()
    }

    fn indicators() -> BasisFamily {
        BasisFamily::new(
            FamilyKind::IndicatorPair,
            NonlinearDomain::new(vec![0.0; 3], vec![1.0; 3], vec![vec![0, 1, 2]], 0.0).unwrap(),
            (0.0, 1.0),
            ParamGradMode::Analytic,
        )
        .unwrap()
    }

    fn gaussians(n: usize, s: f64) -> BasisFamily {
        BasisFamily::new(
            FamilyKind::GaussianBumps { widths: vec![s; n] },
            NonlinearDomain::boxed(vec![0.0; n], vec![1.0; n]).unwrap(),
            (0.0, 1.0),
            ParamGradMode::Analytic,
        )
        .unwrap()
    }

    fn dirichlet_hats(m: usize) -> BasisFamily {
        BasisFamily::new(
            FamilyKind::FreeKnotHats { dirichlet: true },
            NonlinearDomain::new(vec![0.05; m], vec![0.95; m], vec![(0..m).collect()], 0.02).unwrap(),
            (0.0, 1.0),
            ParamGradMode::Analytic,
        )
        .unwrap()
    }

    fn diffusion() -> Problem {
        Problem::new(
            0.0,
            1.0,
            ProblemForms::DiffusionReaction {
                diffusivity: scalar_fn(|x| 1.0 + x),
                reaction: scalar_fn(|_| 1.0),
                source: scalar_fn(|x| x.sin()),
                g_lo: 0.5,
                g_hi: -0.5,
            },
            unit(),
        )
        .unwrap()
    }

    #[test]
    fn indicator_pair_system() {
        let sys = assemble(&l2(|x| x), &rule(), &indicators(), &[0.0, 0.5, 1.0]).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5]));
        assert!((&sys.a - &want).amax() <= 1e-12);
        assert!((sys.l[0] - 0.125).abs() <= 1e-12 && (sys.l[1] - 0.375).abs() <= 1e-12);
        assert_eq!(sys.a, sys.g);
        let (lhs, rhs) = check_lambda_max_bound(&sys, &unit(), 1.0);
        assert!((lhs - 0.5).abs() < 1e-12 && rhs == 1.0);
        let spd = check_assumption_spd(&sys, 0.1);
        assert!(spd.pass && (spd.omega - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_basis_lambda_bound_is_tight() {
        let f = gaussians(1, 0.1);
        let p = l2(|_| 1.0);
        let sys = assemble(&p, &rule(), &f, &[0.4]).unwrap();
        let m = crate::basis::basis_norms(&f, &[0.4], &p, &rule()).unwrap();
        let (lhs, rhs) = check_lambda_max_bound(&sys, &unit(), m);
        assert!((lhs - rhs).abs() <= 1e-14 * rhs);
    }

    #[test]
    fn far_gaussians_have_near_diagonal_stiffness() {
        let f = gaussians(2, 0.03);
        let sys = assemble(&l2(|_| 1.0), &rule(), &f, &[0.2, 0.8]).unwrap();
        let dmax = sys.a[(0, 0)].max(sys.a[(1, 1)]);
        assert!((sys.lambda_max - dmax).abs() <= 1e-12 * dmax);
    }

    #[test]
    fn degenerate_systems_fail_spd() {
        let sys = assemble(&l2(|x| x), &rule(), &indicators(), &[0.5, 0.5, 1.0]).unwrap();
        assert!(!check_assumption_spd(&sys, 0.1).pass);
        assert!(sys.omega.abs() < 1e-15);
        let sys = assemble(&l2(|x| x), &rule(), &gaussians(2, 0.1), &[0.5, 0.5]).unwrap();
        assert!(!check_assumption_spd(&sys, 1e-8).pass);
    }

    #[test]
    fn kappa_variants() {
        let c = unit();
        assert_eq!(kappa_bound(&c, 1.0, 0.5), (2.0, 2.0));
        assert_eq!(kappa_bound(&c, 2.0, 0.5), (4.0, 8.0));
        assert!(kappa_bound(&c, 2.0, 1e300).1 < 1e-299);
    }

    #[test]
    fn consistency_on_rank_deficient_systems() {
        let p = l2(|x| x);
        let f = gaussians(2, 0.1);
        let full = assemble(&p, &rule(), &f, &[0.3, 0.7]).unwrap();
        let r = check_consistency(&p, &rule(), &f, &[0.3, 0.7], &full, 1e-10).unwrap();
        assert_eq!(r.kernel_dim, 0);
        assert_eq!(r.load_kernel_residual, 0.0);
        assert!(r.realisation_gap == 0.0);

        let dup = assemble(&p, &rule(), &f, &[0.5, 0.5]).unwrap();
        let r = check_consistency(&p, &rule(), &f, &[0.5, 0.5], &dup, 1e-10).unwrap();
        assert_eq!(r.kernel_dim, 1);
        assert!(r.load_kernel_residual <= 1e-10 && r.realisation_gap <= 1e-10, "{r:?}");

        let ind = indicators();
        let xi = [0.2, 0.2, 1.0];
        let sys = assemble(&p, &rule(), &ind, &xi).unwrap();
        let r = check_consistency(&p, &rule(), &ind, &xi, &sys, 1e-10).unwrap();
        assert_eq!(r.kernel_dim, 1);
        assert!(r.load_kernel_residual <= 1e-10 && r.realisation_gap <= 1e-10, "{r:?}");
    }

    #[test]
    fn incompatible_pairs_are_rejected() {
        let p = diffusion();
        assert!(matches!(
            assemble(&p, &rule(), &gaussians(1, 0.1), &[0.5]),
            Err(Error::Incompatible(_))
        ));
        assert!(matches!(
            assemble(&p, &rule(), &indicators(), &[0.0, 0.5, 1.0]),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn quadratic_and_gram_forms_match_realisations() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cases: Vec<(Problem, BasisFamily)> = vec![
            (l2(|x| x * x), gaussians(3, 0.15)),
            (diffusion(), dirichlet_hats(4)),
            (l2(|x| x), indicators()),
        ];
        for (p, f) in &cases {
            for _ in 0..50 {
                let xi = f.domain().sample(&mut rng);
                let sys = assemble(p, &rule(), f, &xi).unwrap();
                let w: Vec<f64> = (0..f.n_linear()).map(|_| rng.random_range(-2.0..2.0)).collect();
                let v: Vec<f64> = (0..f.n_linear()).map(|_| rng.random_range(-2.0..2.0)).collect();
                let wv = DVector::from_vec(w.clone());
                let vv = DVector::from_vec(v.clone());
                let rw = Realisation::new(f, &xi, &w).unwrap();
                let rv = Realisation::new(f, &xi, &v).unwrap();
                let quad = wv.dot(&(&sys.a * &wv));
                let direct = bilinear(p, &rule(), &rw, &rw).unwrap();
                assert!((quad - direct).abs() <= 1e-10 * (1.0 + quad.abs()));
                let gram = wv.dot(&(&sys.g * &vv));
                let direct = inner_u(p, &rule(), &rw, &rv).unwrap();
                assert!((gram - direct).abs() <= 1e-10 * (1.0 + gram.abs()));
                assert!(sys.lambda_min >= p.constants().alpha * sys.omega - 1e-10);
            }
        }
    }

    #[test]
    fn assembly_is_independent_of_thread_count() {
        let p = diffusion();
        let f = dirichlet_hats(5);
        let xi = [0.1, 0.3, 0.45, 0.6, 0.9];
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| assemble(&p, &rule(), &f, &xi).unwrap());
        let b = four.install(|| assemble(&p, &rule(), &f, &xi).unwrap());
        assert_eq!(a, b);
    }
}
