//! The four subcommands.

use crate::config::{Experiment, ExperimentConfig, OracleSpec};
use crate::error::CliError;
use crate::output::{read_json, read_trace, trace_rows, write_json, write_trace, Summary};
use nalgebra::DVector;
use nonlinritz::basis::NonlinearDomain;
use nonlinritz::certify::{
    best_linear_bounds_check, decrease_certificate, delta_star, energy_monotone_certificate, global_certificate,
    gradient_identity_check, local_rate_certificate, parameter_pairs, quasi_stationarity_level,
    regularity_constants_check, surrogate_from_record, CertificateEntry, CertificateReport, MinimiserOracle,
    RegularitySample, Status,
};
use nonlinritz::optimizer::{run, RunRecord};
use nonlinritz::updates::LinearRule;
use std::path::{Path, PathBuf};

/// Step of the finite differences in `check`.
pub const CHECK_FD_STEP: f64 = 1e-6;
/// Relative tolerance of the gradient identity in `check`.
pub const CHECK_GRAD_TOL: f64 = 1e-4;

/// Command-line inputs shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_epochs: Option<usize>,
}

/// The validated experiment and where its artifacts live.
pub struct Loaded {
    pub experiment: Experiment,
    pub out_dir: PathBuf,
    pub hash: String,
}

pub fn load(opts: &Options) -> Result<Loaded, CliError> {
    let mut config = ExperimentConfig::load(&opts.config)?;
    if let Some(s) = opts.seed {
        config.seed = s;
    }
    if let Some(n) = opts.max_epochs {
        config.stopping.max_epochs = n;
    }
    let out_dir = match (&opts.out_dir, &config.out_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => {
            // Relative to the config file.
            let base = opts.config.parent().unwrap_or(Path::new("."));
            base.join(d)
        }
        (None, None) => PathBuf::from("nonlinritz-out"),
    };
    let hash = config.hash();
    Ok(Loaded {
        experiment: Experiment::build(config)?,
        out_dir,
        hash,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(&dir.display().to_string(), e))
}

fn delta_stars(exp: &Experiment, oracle: &MinimiserOracle, record: &RunRecord) -> Result<Vec<f64>, CliError> {
    record
        .rows
        .iter()
        .map(|r| Ok(delta_star(&exp.config.geometry, oracle, &r.xi)?.0))
        .collect()
}

/// Holder constant and exponent for surrogate-type quantities.
fn holder_l(exp: &Experiment, record: &RunRecord) -> (Option<f64>, f64) {
    let (nu, _) = exp.config.schedule.holder();
    let l = exp.config.certify.l_holder.or_else(|| {
        if nu == 1.0 {
            record.rows.last().and_then(|r| r.lipschitz)
        } else {
            None
        }
    });
    (l, nu)
}

/// Runs the optimiser and writes `trace.csv`, `summary.json`,
/// `record.json` and, when an oracle is configured, `oracle.json`.
pub fn cmd_run(opts: &Options) -> Result<Summary, CliError> {
    let Loaded {
        experiment: exp,
        out_dir,
        hash,
    } = load(opts)?;
    let model = exp.model.as_dyn();
    let record = run(
        model,
        &exp.config.run_config(),
        &exp.config.start.xi0,
        &DVector::from_column_slice(&exp.w0),
    )?;
    let oracle = exp.oracle()?;
    let deltas = oracle.as_ref().map(|o| delta_stars(&exp, o, &record)).transpose()?;

    let last = record.rows.last().expect("a run has at least one row");
    let (l, nu) = holder_l(&exp, &record);
    let level = match (l, last.gamma, last.grad_map_norm) {
        (Some(l), Some(g), Some(c)) => {
            let c = c.max(last.grad_w_norm);
            Some(quasi_stationarity_level(l, nu, g, exp.config.geometry.mu(), c))
        }
        _ => None,
    };
    let summary = Summary {
        best_energy: record.final_energy,
        best_iter: record.best_iter,
        best_xi: record.final_xi.clone(),
        best_w: record.final_w.clone(),
        iterations: record.epochs(),
        termination: record.termination.as_str().into(),
        quasi_stationarity_level: level,
        oracle_k_star: oracle.as_ref().map(|o| o.k_star),
        config_hash: hash,
    };

    ensure_dir(&out_dir)?;
    write_trace(&out_dir.join("trace.csv"), &trace_rows(&record, deltas.as_deref()))?;
    write_json(&out_dir.join("summary.json"), &summary)?;
    write_json(&out_dir.join("record.json"), &record)?;
    if let Some(o) = &oracle {
        write_json(&out_dir.join("oracle.json"), o)?;
    }
    Ok(summary)
}

/// Loads the run artifacts, taking energies and decreases from the trace.
///
/// The achieved drop of row `k` is recomputed as
/// `𝒦(w_{k−1}, ξ_k) − K_k` with `K_k` from the trace, so an edited energy
/// column shows up in the decrease certificate.
fn load_record(exp: &Experiment, dir: &Path) -> Result<RunRecord, CliError> {
    let mut record: RunRecord = read_json(&dir.join("record.json"))?;
    let trace = read_trace(&dir.join("trace.csv"))?;
    if trace.len() != record.rows.len() || trace.iter().zip(&record.rows).any(|(t, r)| t.iter != r.iter) {
        return Err(CliError::Io(format!(
            "trace.csv has {} rows but record.json has {}",
            trace.len(),
            record.rows.len()
        )));
    }
    let model = exp.model.as_dyn();
    let mut w_prev = DVector::from_column_slice(&exp.w0);
    for (row, t) in record.rows.iter_mut().zip(&trace) {
        let pre = model.energy(&w_prev, &row.xi)?;
        row.energy = t.energy;
        row.reduced_energy = t.reduced_energy;
        row.decrease.achieved = pre - t.energy;
        row.decrease.guaranteed = t.decrease_rhs;
        w_prev = DVector::from_column_slice(&row.w);
    }
    Ok(record)
}

const FROZEN: &str = "frozen linear rule: w is never updated";

/// Every certificate that applies to the recorded run.
pub fn certify_record(exp: &Experiment, record: &RunRecord) -> Result<CertificateReport, CliError> {
    let cfg = &exp.config;
    let tol = cfg.certify.tolerance;
    let model = exp.model.as_dyn();
    let geom = &cfg.geometry;
    let mu = geom.mu();
    let (_, eps_holder) = cfg.schedule.holder();
    let oracle = exp.oracle()?;
    let mut report = CertificateReport::new();

    let norm_a = exp.model.discrete().map(|m| m.problem().constants().norm_a);
    let frozen = cfg.linear == LinearRule::Frozen;
    let mut decrease = decrease_certificate(record, norm_a, tol);
    let rate_anchor = "min_{k<n} ‖G_k‖² + ‖∇_W𝒦‖² ≤ 2(𝒦₀ − 𝒦* + nε)/S_n";
    let rate = match oracle.as_ref().map(|o| o.k_star_lower).or(cfg.constants.k_star) {
        _ if frozen => CertificateEntry::skipped("local_rate", rate_anchor, Status::NotAsserted, FROZEN),
        Some(k) => local_rate_certificate(record, mu, eps_holder, k, tol),
        None => CertificateEntry::skipped(
            "local_rate",
            rate_anchor,
            Status::NotAsserted,
            "no lower bound on the optimal energy",
        ),
    };
    if frozen {
        let anchor = decrease[0].anchor.clone();
        decrease[0] = CertificateEntry::skipped("energy_decrease", &anchor, Status::NotAsserted, FROZEN);
    }
    report.extend(decrease);
    report.push(energy_monotone_certificate(record, mu, eps_holder, tol));
    report.push(rate);

    let (l, nu) = holder_l(exp, record);
    match l {
        Some(l) => report.extend(surrogate_from_record(model, geom, record, &cfg.stopping, l, nu, tol)?),
        None => report.push(CertificateEntry::skipped(
            "surrogate_bound",
            "max(‖∇_W𝒦‖, ‖Π_T(−∇_𝕏𝒦)‖) ≤ L(γc)^ν + L_ψc",
            Status::NotAsserted,
            "no Hölder constant: set certify.l_holder",
        )),
    }

    let global_anchor = "δ* non-increasing and 𝒦̄(ξ_n) − 𝒦* ≤ δ*(ξ₀)/(nγ)";
    match oracle.as_ref().map(|o| (o, o.l_bar)) {
        Some((o, Some(l_bar))) => report.extend(global_certificate(
            &exp.objective(),
            geom,
            &cfg.linear,
            record,
            o,
            l_bar,
            cfg.constants.rho,
            tol,
        )?),
        Some((_, None)) => report.push(CertificateEntry::skipped(
            "global_rate",
            global_anchor,
            Status::NotAsserted,
            "oracle has no Lipschitz constant of the reduced gradient",
        )),
        None => report.push(CertificateEntry::skipped(
            "global_rate",
            global_anchor,
            Status::NotAsserted,
            "no minimiser oracle configured",
        )),
    }
    Ok(report)
}

fn finish(report: &CertificateReport, path: &Path) -> Result<(), CliError> {
    write_json(path, report)?;
    match report.failures().count() {
        0 => Ok(()),
        failed => Err(CliError::CertificateFailed {
            failed,
            report: Box::new(report.clone()),
        }),
    }
}

/// Certifies the artifacts of a previous `run` with the same config.
pub fn cmd_certify(opts: &Options) -> Result<CertificateReport, CliError> {
    let Loaded {
        experiment: exp,
        out_dir,
        hash,
    } = load(opts)?;
    let summary: Summary = read_json(&out_dir.join("summary.json"))?;
    if summary.config_hash != hash {
        return Err(CliError::Config(format!(
            "config hash {hash} does not match the run's {}; refusing to certify",
            summary.config_hash
        )));
    }
    let record = load_record(&exp, &out_dir)?;
    let report = certify_record(&exp, &record)?;
    finish(&report, &out_dir.join("report.json"))?;
    Ok(report)
}

/// Builds the configured oracle and writes `oracle.json`.
pub fn cmd_grid(opts: &Options) -> Result<MinimiserOracle, CliError> {
    let Loaded {
        experiment: exp,
        out_dir,
        ..
    } = load(opts)?;
    if !matches!(exp.config.oracle, Some(OracleSpec::Grid { .. }) | None) {
        return Err(CliError::Config("grid needs [oracle] kind = \"grid\"".into()));
    }
    let oracle = exp
        .oracle()?
        .ok_or_else(|| CliError::Config("grid needs an [oracle] table".into()))?;
    ensure_dir(&out_dir)?;
    write_json(&out_dir.join("oracle.json"), &oracle)?;
    Ok(oracle)
}

/// Seeded points of a domain shrunk by 0.1% of its diameter on every
/// constraint, so that difference stencils stay feasible.
pub fn interior_points(domain: &NonlinearDomain, n: usize, seed: u64) -> Result<Vec<Vec<f64>>, CliError> {
    let m = 1e-3 * domain.diameter();
    let lo = domain.lo().iter().map(|v| v + m).collect();
    let hi = domain.hi().iter().map(|v| v - m).collect();
    let inner = NonlinearDomain::new(lo, hi, domain.chains().to_vec(), domain.gap() + m)?;
    Ok(parameter_pairs(&inner, n, seed)?.into_iter().map(|p| p.0).collect())
}

/// The invariant suite: gradient identity, best-linear bounds and
/// regularity moduli at `certify.samples` seeded points. Writes
/// `check.json`.
pub fn cmd_check(opts: &Options) -> Result<CertificateReport, CliError> {
    let Loaded {
        experiment: exp,
        out_dir,
        ..
    } = load(opts)?;
    let cfg = &exp.config;
    let tol = cfg.certify.tolerance;
    let model = exp.model.as_dyn();
    let n = cfg.certify.samples;
    let pairs = parameter_pairs(model.domain(), n, cfg.seed)?;
    let points = interior_points(model.domain(), n, cfg.seed)?;
    let mut report = CertificateReport::new();
    report.push(gradient_identity_check(
        model,
        &points,
        CHECK_FD_STEP,
        CHECK_GRAD_TOL,
        1e-8,
    )?);
    if let Some(m) = exp.model.discrete() {
        let m_phi = cfg.constants.m_phi.unwrap_or(0.0);
        report.extend(best_linear_bounds_check(
            m,
            &pairs,
            m_phi,
            cfg.constants.omega_min,
            tol,
        )?);
        let samples = RegularitySample::draw(model.domain(), model.n_linear(), n, cfg.seed)?;
        report.extend(regularity_constants_check(m, &samples, tol)?);
    }
    ensure_dir(&out_dir)?;
    finish(&report, &out_dir.join("check.json"))?;
    Ok(report)
}
