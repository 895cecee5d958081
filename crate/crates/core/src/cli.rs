//! Command dispatch shared by the binary and the Python bindings.

use std::fs;

use crate::did::{cic_counterfactual, rank_did_with_reference, rank_mdid};
use crate::error::{Error, Result};
use crate::io::{emit_plotdata, format_estimate, format_tables, load_csv, load_panel_csv, Command, RunConfig};
use crate::iv::{rank_2sls, rank_2sls_complier, DEFAULT_ZETA};
use crate::ols::{rank_ols_cov, rank_ols_general, rank_ols_nocov, rank_ols_refgroup, TransformKind, TreatmentTransform};
use crate::ranks::{ecdf, fan_park_bounds, jitter, rank_ate, ReferenceGroup, TiePolicy};
use crate::rdd::{rank_mrdd, rank_rdd, Bandwidth, RddConfig};
use crate::sample::{Estimate, PanelSample, Sample};
use crate::simlab::scenarios;

fn apply_ties(values: &mut Vec<f64>, policy: TiePolicy, salt: u64) -> Result<()> {
    if let TiePolicy::Jitter { seed, epsilon } = policy {
        *values = jitter(values, seed.wrapping_add(salt), epsilon)?;
    }
    Ok(())
}

fn input(config: &RunConfig) -> Result<&std::path::Path> {
    config
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("an input CSV is required".into()))
}

fn sample(config: &RunConfig, binary_w: bool) -> Result<Sample> {
    let mut s = load_csv(input(config)?, &config.columns, binary_w)?;
    apply_ties(&mut s.y, config.tie_policy, 0)?;
    Ok(s)
}

fn panel(config: &RunConfig) -> Result<PanelSample> {
    let mut columns = config.columns.clone();
    columns.y_pre.get_or_insert_with(|| "y_pre".into());
    let mut p = load_panel_csv(input(config)?, &columns)?;
    apply_ties(&mut p.y0, config.tie_policy, 1)?;
    apply_ties(&mut p.y1, config.tie_policy, 0)?;
    Ok(p)
}

fn fan_park(s: &Sample) -> Result<Estimate> {
    let (mut y1, mut y0) = (Vec::new(), Vec::new());
    for (&y, &w) in s.y.iter().zip(&s.w) {
        if w == 1.0 { y1.push(y) } else { y0.push(y) }
    }
    let (f1, f0) = (ecdf(&y1)?, ecdf(&y0)?);
    let b = fan_park_bounds(&f1, &f0);
    Ok(Estimate::new(rank_ate(&f1, &f0), "fan_park_bounds", "P(Y(1) >= Y(0)) - 1/2", s.n())
        .diag("lower", b.lower)
        .diag("upper", b.upper)
        .diag("n1", y1.len() as f64)
        .diag("n0", y0.len() as f64))
}

fn estimate(command: Command, config: &RunConfig) -> Result<Estimate> {
    let reference = config.reference;
    match command {
        Command::Ols => {
            let s = sample(config, true)?;
            if !config.columns.x.is_empty() {
                if reference != ReferenceGroup::All {
                    return Err(Error::Config("reference-group ranking takes no covariates".into()));
                }
                rank_ols_cov(&s, config.interact)
            } else if reference == ReferenceGroup::All {
                rank_ols_nocov(&s)
            } else {
                rank_ols_refgroup(&s, reference)
            }
        }
        Command::OlsGeneral => {
            let t = match &config.transform {
                Some(t) => t.clone(),
                None => TreatmentTransform::new(TransformKind::Identity, false)?,
            };
            rank_ols_general(&sample(config, false)?, &t)
        }
        Command::Tsls => {
            let mut config = config.clone();
            config.columns.z.get_or_insert_with(|| "z".into());
            let s = sample(&config, true)?;
            if config.complier {
                rank_2sls_complier(&s, config.zeta.unwrap_or(DEFAULT_ZETA))
            } else {
                rank_2sls(&s, reference)
            }
        }
        Command::Did => {
            let p = panel(config)?;
            if config.modified {
                rank_mdid(&p, &cic_counterfactual(&p)?)
            } else {
                rank_did_with_reference(&p, reference)
            }
        }
        Command::Rdd => {
            let mut config = config.clone();
            config.columns.run.get_or_insert_with(|| "run".into());
            let cutoff = config
                .cutoff
                .ok_or_else(|| Error::Config("rdd needs a cutoff".into()))?;
            let bandwidth = match (config.bandwidth, config.bandwidth_multiplier) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config("give a fixed bandwidth or a multiplier, not both".into()))
                }
                (Some(h), None) => Bandwidth::Fixed { h },
                (None, m) => Bandwidth::Rule { multiplier: m.unwrap_or(1.0) },
            };
            let rdd = RddConfig::new(cutoff)
                .with_bandwidth(bandwidth)
                .with_kernel(config.kernel.unwrap_or_default());
            let s = sample(&config, false)?;
            if config.modified {
                rank_mrdd(&s, &rdd)
            } else {
                rank_rdd(&s, &rdd, reference)
            }
        }
        Command::Bounds => fan_park(&sample(config, true)?),
        Command::Simulate => unreachable!("handled separately"),
    }
}

/// Runs the configured command and returns what belongs on standard
/// output. Files named by `out` and `plotdata` are written here; when `out`
/// is set the returned string is empty.
pub fn execute(config: &RunConfig) -> Result<String> {
    let command = config
        .command
        .ok_or_else(|| Error::Config("no command given".into()))?;
    let text = if command == Command::Simulate {
        let key = config
            .scenario
            .as_deref()
            .ok_or_else(|| Error::Config("simulate needs a scenario".into()))?;
        let scenario = scenarios::find(key)?;
        let tables = scenario.run(config.ns.as_deref(), config.reps, config.seed)?;
        if let Some(path) = &config.plotdata {
            let records: Vec<_> = tables.iter().flat_map(|t| t.records.iter().cloned()).collect();
            emit_plotdata(&records, path, config.format)?;
        }
        format_tables(&tables, config.format)?
    } else {
        let e = estimate(command, config)?;
        format_estimate(&e, config, config.format)?
    };
    match &config.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

/// One line per scenario: number, name and description.
pub fn list_scenarios() -> String {
    scenarios::registry()
        .iter()
        .map(|s| format!("{:>2}  {:<22} {}\n", s.index, s.name, s.description))
        .collect()
}

/// JSON object written to standard error on failure.
pub fn error_json(e: &Error) -> String {
    serde_json::json!({
        "error": {
            "code": e.code(),
            "message": e.to_string(),
            "exit_code": e.exit_code(),
        }
    })
    .to_string()
}
