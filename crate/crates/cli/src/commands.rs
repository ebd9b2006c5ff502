use nctransport::onevar::{oracle_comparison, solve_1d, OneVarSeries, OracleRow};
use nctransport::rmt::transport_compare;
use nctransport::semitrace::TraceCache;
use nctransport::solver::{check_conditions, solve_transport};
use nctransport::verify::{entropy_shift, lemma_suite, sd_report};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::CliError;

/// Everything a command produces. `passed` decides the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub report: Value,
    pub passed: bool,
    pub csv: Option<String>,
    /// Human-readable reason when `passed` is false.
    pub failure: Option<String>,
}

#[derive(Serialize)]
struct Certificate {
    certified: bool,
    conditions_passed: bool,
    override_conditions: bool,
}

/// Output paths are left out of the echoed config so that a rerun into a
/// different file gives the same bytes.
fn envelope(cfg: &RunConfig, command: Command, cert: Certificate, truncation_loss: f64, result: Value) -> Value {
    let mut echo = cfg.clone();
    echo.out = None;
    echo.onevar.csv = None;
    json!({
        "command": command.name(),
        "seed": cfg.seed,
        "config": echo,
        "certificate": cert,
        "truncation_loss": truncation_loss,
        "result": result,
    })
}

fn to_value<T: Serialize>(x: &T) -> Result<Value, CliError> {
    serde_json::to_value(x).map_err(|e| CliError::Config(format!("serializing report: {e}")))
}

pub fn cmd_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let w = cfg.potential()?;
    let report = check_conditions(&w, &cfg.solver())?;
    let failure = (!report.passed).then(|| format!("conditions fail: {}", report.violations.join("; ")));
    let cert = Certificate {
        certified: report.passed,
        conditions_passed: report.passed,
        override_conditions: cfg.override_conditions,
    };
    Ok(Outcome {
        passed: report.passed,
        report: envelope(cfg, Command::Check, cert, 0.0, to_value(&report)?),
        csv: None,
        failure,
    })
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let w = cfg.potential()?;
    let res = solve_transport(&w, &cfg.solver())?;
    let cert = Certificate {
        certified: res.certified,
        conditions_passed: res.conditions.passed,
        override_conditions: cfg.override_conditions,
    };
    Ok(Outcome {
        report: envelope(cfg, Command::Solve, cert, res.truncation_loss_total, to_value(&res)?),
        passed: true,
        csv: None,
        failure: None,
    })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let w = cfg.potential()?;
    let solver = cfg.solver();
    let res = solve_transport(&w, &solver)?;
    let cache = TraceCache::global();
    let v = &cfg.verify;
    let sd = sd_report(cache, &res.y, &w, v.test_degree, v.eval_dmax.unwrap_or(solver.dmax))?;
    let entropy = entropy_shift(cache, &res.g, &solver)?;
    let lemmas = lemma_suite(cfg.seed, v.lemma_n, v.lemma_degree, v.lemma_trials)?;
    let failure = (!lemmas.passed).then(|| {
        let names: Vec<&str> = lemmas.checks.iter().filter(|c| c.failures > 0).map(|c| c.name.as_str()).collect();
        format!("identity failures: {}", names.join(", "))
    });
    let cert = Certificate {
        certified: res.certified && lemmas.passed,
        conditions_passed: res.conditions.passed,
        override_conditions: cfg.override_conditions,
    };
    let result = json!({
        "transport": {
            "iterations": res.iterations,
            "certified": res.certified,
            "truncation_loss_total": res.truncation_loss_total,
            "norm_g_a": res.norm_g_a,
            "hessian_pnorm": res.hessian_pnorm,
        },
        "schwinger_dyson": to_value(&sd)?,
        "entropy_shift": to_value(&entropy)?,
        "lemma_suite": to_value(&lemmas)?,
    });
    let loss = res.truncation_loss_total + sd.truncation_loss + entropy.truncation_loss;
    Ok(Outcome {
        passed: lemmas.passed,
        report: envelope(cfg, Command::Verify, cert, loss, result),
        csv: None,
        failure,
    })
}

/// The potential must be one-variable; `onevar.betas` scale it.
pub fn cmd_onevar(cfg: &RunConfig) -> Result<Outcome, CliError> {
    if cfg.n != 1 {
        return Err(CliError::Config(format!("onevar needs n = 1, got {}", cfg.n)));
    }
    let solver = cfg.solver();
    let unit = OneVarSeries::from_ncpoly(&cfg.potential()?, solver.a);
    let o = &cfg.onevar;
    let rows = oracle_comparison(&unit, &o.betas, &solver, o.kmax, o.order)?;
    let mut per_beta = Vec::with_capacity(o.betas.len());
    let mut all_certified = true;
    let mut all_conditions = true;
    let mut loss: f64 = 0.0;
    for &beta in &o.betas {
        let w = OneVarSeries::new(unit.coeffs.iter().map(|c| c * beta).collect(), solver.a);
        let sol = solve_1d(&w, &solver)?;
        all_certified &= sol.certified;
        all_conditions &= sol.conditions.passed;
        loss = loss.max(sol.truncation_loss);
        let max_abs_diff = rows
            .iter()
            .filter(|r| r.beta == beta)
            .map(|r| r.abs_diff)
            .fold(0.0, f64::max);
        per_beta.push(json!({
            "beta": beta,
            "certified": sol.certified,
            "iterations": sol.iterations,
            "truncation_loss": sol.truncation_loss,
            "max_abs_diff": max_abs_diff,
            "transport": sol.transport.coeffs,
        }));
    }
    let cert = Certificate {
        certified: all_certified,
        conditions_passed: all_conditions,
        override_conditions: cfg.override_conditions,
    };
    Ok(Outcome {
        report: envelope(cfg, Command::Onevar, cert, loss, json!({ "betas": per_beta, "rows": to_value(&rows)? })),
        passed: true,
        csv: Some(rows_to_csv(&rows)?),
        failure: None,
    })
}

fn rows_to_csv(rows: &[OracleRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Config(format!("writing csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(format!("writing csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Config(e.to_string()))
}

pub fn cmd_rmt(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let w = cfg.potential()?;
    let r = &cfg.rmt;
    let report = transport_compare(&w, &cfg.solver(), r.size, r.draws, &cfg.chain(), r.chains)?;
    let cert = Certificate {
        certified: report.transport_certified,
        conditions_passed: report.transport_certified,
        override_conditions: cfg.override_conditions,
    };
    Ok(Outcome {
        report: envelope(cfg, Command::Rmt, cert, report.transport_truncation_loss, to_value(&report)?),
        passed: true,
        csv: None,
        failure: None,
    })
}

/// The exact identity suite on two generators, degree 4, 50 inputs each.
pub fn cmd_selftest(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let report = lemma_suite(cfg.seed, 2, 4, 50)?;
    let failure = (!report.passed).then(|| "exact identity suite failed".to_string());
    let cert = Certificate {
        certified: report.passed,
        conditions_passed: true,
        override_conditions: false,
    };
    Ok(Outcome {
        passed: report.passed,
        report: envelope(cfg, Command::Selftest, cert, 0.0, to_value(&report)?),
        csv: None,
        failure,
    })
}

pub fn run(cfg: &RunConfig, command: Command) -> Result<Outcome, CliError> {
    match command {
        Command::Check => cmd_check(cfg),
        Command::Solve => cmd_solve(cfg),
        Command::Verify => cmd_verify(cfg),
        Command::Onevar => cmd_onevar(cfg),
        Command::Rmt => cmd_rmt(cfg),
        Command::Selftest => cmd_selftest(cfg),
    }
}
