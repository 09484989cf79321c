//! Experiment configuration: the TOML schema and the objects built from it.

use crate::error::CliError;
use crate::expr::Expr;
use nonlinritz::basis::{BasisFamily, FamilyKind, NonlinearDomain, ParamGradMode};
use nonlinritz::certify::{
    circle_oracle, minimiser_grid_oracle, CircleModel, MinimiserOracle, OptimalSet, OracleKind, ReducedObjective,
    Tolerance,
};
use nonlinritz::optimizer::{RunConfig, StepSchedule, StoppingCriteria};
use nonlinritz::updates::{DiscreteEnergy, EnergyModel, Geometry, LinearRule};
use nonlinritz::variational::{scalar_fn, FnField, Problem, ProblemConstants, ProblemForms, QuadratureRule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub problem: ProblemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSpec>,
    pub constants: ConstantsSpec,
    #[serde(default = "euclidean")]
    pub geometry: Geometry,
    pub linear: LinearRule,
    pub schedule: StepSchedule,
    pub stopping: StoppingCriteria,
    pub start: StartSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    #[serde(default)]
    pub certify: CertifySpec,
}

fn euclidean() -> Geometry {
    Geometry::Euclidean
}

/// Coefficients are expressions in `x` (see [`crate::expr`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    L2Approx {
        lo: f64,
        hi: f64,
        target: String,
        #[serde(default)]
        breakpoints: Vec<f64>,
    },
    DiffusionReaction {
        lo: f64,
        hi: f64,
        diffusivity: String,
        reaction: String,
        source: String,
        g_lo: f64,
        g_hi: f64,
        #[serde(default)]
        breakpoints: Vec<f64>,
    },
    /// `f(x, y) = (x² + y² − 1)²` run with the frozen linear rule.
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    GaussianBumps {
        widths: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fd_step: Option<f64>,
    },
    FreeKnotHats {
        dirichlet: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fd_step: Option<f64>,
    },
    IndicatorPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub chains: Vec<Vec<usize>>,
    #[serde(default)]
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub panels: usize,
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    pub alpha: f64,
    pub norm_a: f64,
    pub norm_ell: f64,
    pub omega_min: f64,
    /// Radius of the basin in `δ*_ψ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Known optimal reduced energy; used as `𝒦*_lower` without an oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_star: Option<f64>,
    /// Known `sup ‖φ(ξ)‖_{U,2}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_phi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    pub xi0: Vec<f64>,
    /// Defaults to zeros (ones for the circle).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    Grid {
        resolution: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l_bar: Option<f64>,
    },
    Points {
        k_star: f64,
        points: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l_bar: Option<f64>,
    },
    Sphere {
        k_star: f64,
        center: Vec<f64>,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l_bar: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    #[serde(default)]
    pub tolerance: Tolerance,
    /// Hölder constant of `∇_𝕏𝒦(w, ·)` for the surrogate; defaults to the
    /// recorded `L` when `ν = 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_holder: Option<f64>,
    /// Samples for the `check` suite.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    20
}

impl Default for CertifySpec {
    fn default() -> Self {
        CertifySpec {
            tolerance: Tolerance::default(),
            l_holder: None,
            samples: default_samples(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self, CliError> {
        toml::from_str(src).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&src).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML, ignoring `out_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = None;
        let digest = Sha256::digest(c.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            linear: self.linear,
            geometry: self.geometry.clone(),
            schedule: self.schedule,
            stopping: self.stopping,
            omega_min: self.constants.omega_min,
            final_tol: 1e-13,
        }
    }
}

fn expr_fn(src: &str, what: &str) -> Result<(nonlinritz::variational::ScalarFn, Vec<f64>), CliError> {
    let e = Expr::parse(src).map_err(|e| CliError::Config(format!("{what}: {e} in '{src}'")))?;
    let breaks = e.breakpoints();
    Ok((scalar_fn(move |x| e.eval(x)), breaks))
}

/// The energy a configuration describes.
pub enum Model {
    Discrete(Box<DiscreteEnergy>),
    Circle(CircleModel),
}

impl Model {
    pub fn as_dyn(&self) -> &dyn EnergyModel {
        match self {
            Model::Discrete(m) => m.as_ref(),
            Model::Circle(m) => m,
        }
    }

    pub fn discrete(&self) -> Option<&DiscreteEnergy> {
        match self {
            Model::Discrete(m) => Some(m),
            Model::Circle(_) => None,
        }
    }
}

/// Everything built from a validated configuration.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: Model,
    pub w0: Vec<f64>,
}

impl Experiment {
    pub fn build(config: ExperimentConfig) -> Result<Self, CliError> {
        let cfg = &config;
        let constants = ProblemConstants::new(cfg.constants.alpha, cfg.constants.norm_a, cfg.constants.norm_ell)
            .map_err(CliError::config)?;
        let model = match &cfg.problem {
            ProblemSpec::Circle => {
                if cfg.family.is_some() || cfg.domain.is_some() || cfg.quadrature.is_some() {
                    return Err(CliError::Config(
                        "the circle problem takes no [family], [domain] or [quadrature]".into(),
                    ));
                }
                if cfg.linear != LinearRule::Frozen {
                    return Err(CliError::Config(
                        "the circle problem needs linear.kind = \"frozen\"".into(),
                    ));
                }
                Model::Circle(CircleModel::new())
            }
            spec => {
                let (lo, hi, problem) = match spec {
                    ProblemSpec::L2Approx {
                        lo,
                        hi,
                        target,
                        breakpoints,
                    } => {
                        let (f, mut b) = expr_fn(target, "problem.target")?;
                        b.extend(breakpoints);
                        let p = Problem::l2_approx(*lo, *hi, FnField::l2(f).with_breakpoints(b), constants)
                            .map_err(CliError::config)?;
                        (*lo, *hi, p)
                    }
                    ProblemSpec::DiffusionReaction {
                        lo,
                        hi,
                        diffusivity,
                        reaction,
                        source,
                        g_lo,
                        g_hi,
                        breakpoints,
                    } => {
                        let (k, b1) = expr_fn(diffusivity, "problem.diffusivity")?;
                        let (s, b2) = expr_fn(reaction, "problem.reaction")?;
                        let (f, b3) = expr_fn(source, "problem.source")?;
                        let forms = ProblemForms::DiffusionReaction {
                            diffusivity: k,
                            reaction: s,
                            source: f,
                            g_lo: *g_lo,
                            g_hi: *g_hi,
                        };
                        let mut b = breakpoints.clone();
                        b.extend(b1.into_iter().chain(b2).chain(b3));
                        let p = Problem::new(*lo, *hi, forms, constants)
                            .map_err(CliError::config)?
                            .with_breakpoints(&b);
                        (*lo, *hi, p)
                    }
                    ProblemSpec::Circle => unreachable!(),
                };
                let (Some(fs), Some(ds), Some(qs)) = (&cfg.family, &cfg.domain, &cfg.quadrature) else {
                    return Err(CliError::Config(
                        "[family], [domain] and [quadrature] are required for this problem".into(),
                    ));
                };
                let domain = NonlinearDomain::new(ds.lo.clone(), ds.hi.clone(), ds.chains.clone(), ds.gap)
                    .map_err(CliError::config)?;
                let (kind, fd) = match fs {
                    FamilySpec::GaussianBumps { widths, fd_step } => {
                        (FamilyKind::GaussianBumps { widths: widths.clone() }, *fd_step)
                    }
                    FamilySpec::FreeKnotHats { dirichlet, fd_step } => {
                        (FamilyKind::FreeKnotHats { dirichlet: *dirichlet }, *fd_step)
                    }
                    FamilySpec::IndicatorPair => (FamilyKind::IndicatorPair, None),
                };
                let mode = fd.map_or(ParamGradMode::Analytic, |h| ParamGradMode::FiniteDifference { h });
                let family = BasisFamily::new(kind, domain, (lo, hi), mode).map_err(CliError::config)?;
                let rule = QuadratureRule::uniform(lo, hi, qs.panels, qs.order).map_err(CliError::config)?;
                Model::Discrete(Box::new(
                    DiscreteEnergy::with_default_mode(problem, rule, family).map_err(CliError::config)?,
                ))
            }
        };
        let m = model.as_dyn();
        let dim = m.domain().dim();
        config.run_config().validate(dim).map_err(CliError::config)?;
        if cfg.start.xi0.len() != dim {
            return Err(CliError::Config(format!(
                "start.xi0 has {} entries, expected {dim}",
                cfg.start.xi0.len()
            )));
        }
        m.domain().validate(&cfg.start.xi0).map_err(CliError::config)?;
        let default_w = if matches!(model, Model::Circle(_)) { 1.0 } else { 0.0 };
        let w0 = cfg.start.w0.clone().unwrap_or_else(|| vec![default_w; m.n_linear()]);
        if w0.len() != m.n_linear() {
            return Err(CliError::Config(format!(
                "start.w0 has {} entries, expected {}",
                w0.len(),
                m.n_linear()
            )));
        }
        if let Some(OracleSpec::Sphere { .. }) = &cfg.oracle {
            if cfg.geometry != Geometry::Euclidean {
                return Err(CliError::Config("sphere oracles need the Euclidean geometry".into()));
            }
        }
        Ok(Experiment { config, model, w0 })
    }

    pub fn objective(&self) -> ReducedObjective<'_> {
        ReducedObjective::for_rule(
            self.model.as_dyn(),
            &self.config.linear,
            &nalgebra::DVector::from_column_slice(&self.w0),
        )
    }

    /// The configured oracle; the circle defaults to its analytic one.
    pub fn oracle(&self) -> Result<Option<MinimiserOracle>, CliError> {
        let analytic = |k_star: f64, set: OptimalSet, l_bar: Option<f64>| MinimiserOracle {
            kind: OracleKind::Analytic,
            k_star,
            k_star_lower: k_star,
            set,
            resolution: None,
            l_bar,
            skipped: 0,
        };
        Ok(match &self.config.oracle {
            None if matches!(self.model, Model::Circle(_)) => Some(circle_oracle()),
            None => None,
            Some(OracleSpec::Grid { resolution, l_bar }) => {
                Some(minimiser_grid_oracle(&self.objective(), *resolution, *l_bar).map_err(CliError::from_core)?)
            }
            Some(OracleSpec::Points { k_star, points, l_bar }) => {
                Some(analytic(*k_star, OptimalSet::Points { points: points.clone() }, *l_bar))
            }
            Some(OracleSpec::Sphere {
                k_star,
                center,
                radius,
                l_bar,
            }) => Some(analytic(
                *k_star,
                OptimalSet::Sphere {
                    center: center.clone(),
                    radius: *radius,
                },
                *l_bar,
            )),
        })
    }
}
