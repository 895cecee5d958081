use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rankreg::cli::{error_json, execute, list_scenarios};
use rankreg::io::{Command, OutputFormat, RunConfig};
use rankreg::ols::{TransformKind, TreatmentTransform};
use rankreg::ranks::{ReferenceGroup, TiePolicy};
use rankreg::rdd::Kernel;
use rankreg::{Error, Result};

/// Rank regressions for treatment effects.
#[derive(Parser, Debug)]
#[command(name = "rankreg", version, about)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Rank-OLS on a binary treatment, optionally with covariates.
    Ols {
        #[command(flatten)]
        common: Common,
        /// Interact the treatment with demeaned covariates.
        #[arg(long)]
        interact: bool,
    },
    /// Rank-OLS on a transformed, possibly multi-valued treatment.
    OlsGeneral {
        #[command(flatten)]
        common: Common,
        /// identity, rank, dichotomize:<t> or step:<b1>,<b2>,...
        #[arg(long)]
        transform: Option<String>,
        /// Rescale the transform so the slope is a convex average.
        #[arg(long)]
        normalize: bool,
    },
    /// Rank-2SLS with a binary instrument.
    Tsls {
        #[command(flatten)]
        common: Common,
        /// Rank outcomes by the estimated complier CDFs.
        #[arg(long)]
        complier: bool,
        /// Mixing weight of the treated complier CDF.
        #[arg(long)]
        zeta: Option<f64>,
    },
    /// Two-period rank difference-in-differences.
    Did {
        #[command(flatten)]
        common: Common,
        /// Use the changes-in-changes counterfactual (rank-ATT).
        #[arg(long)]
        modified: bool,
    },
    /// Sharp regression-discontinuity rank estimator.
    Rdd {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        cutoff: Option<f64>,
        /// Fixed bandwidth.
        #[arg(long)]
        bandwidth: Option<f64>,
        /// Multiplier of the rule `sd(run) * n^(-1/5)`.
        #[arg(long)]
        bandwidth_multiplier: Option<f64>,
        /// triangular, epanechnikov or uniform.
        #[arg(long)]
        kernel: Option<String>,
        /// Use the kernel U-statistic (cutoff rank-ATE).
        #[arg(long)]
        modified: bool,
    },
    /// Bounds on P(Y(1) >= Y(0)) - 1/2 from the two outcome margins.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo convergence table for a named scenario.
    Simulate {
        /// Scenario name or number.
        #[arg(long)]
        scenario: Option<String>,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',')]
        ns: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-replication records here.
        #[arg(long)]
        plotdata: Option<PathBuf>,
        /// Print the available scenarios and exit.
        #[arg(long)]
        list: bool,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Input CSV with a header row.
    input: Option<PathBuf>,
    #[arg(long)]
    y: Option<String>,
    #[arg(long)]
    w: Option<String>,
    /// Covariate columns, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    x: Vec<String>,
    #[arg(long)]
    z: Option<String>,
    #[arg(long)]
    run: Option<String>,
    #[arg(long)]
    y_pre: Option<String>,
    /// Ranking reference: all, treated or control.
    #[arg(long = "ref")]
    reference: Option<String>,
    /// literal or jitter.
    #[arg(long)]
    tie_policy: Option<String>,
    /// Half-width of the jitter noise.
    #[arg(long, default_value_t = 1e-9)]
    jitter_eps: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// json or csv.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn apply_common(c: Common, cfg: &mut RunConfig) -> Result<()> {
    if c.input.is_some() {
        cfg.input = c.input;
    }
    let cols = &mut cfg.columns;
    if let Some(v) = c.y {
        cols.y = v;
    }
    if let Some(v) = c.w {
        cols.w = v;
    }
    if !c.x.is_empty() {
        cols.x = c.x;
    }
    cols.z = c.z.or(cols.z.take());
    cols.run = c.run.or(cols.run.take());
    cols.y_pre = c.y_pre.or(cols.y_pre.take());
    if let Some(r) = c.reference {
        cfg.reference = r.parse::<ReferenceGroup>()?;
    }
    if c.seed.is_some() {
        cfg.seed = c.seed;
    }
    match c.tie_policy.as_deref() {
        None => {}
        Some("literal") => cfg.tie_policy = TiePolicy::Literal,
        Some("jitter") => {
            cfg.tie_policy = TiePolicy::Jitter {
                seed: cfg.seed.unwrap_or(0),
                epsilon: c.jitter_eps,
            }
        }
        Some(other) => return Err(Error::Config(format!("unknown tie policy '{other}'"))),
    }
    apply_output(c.format, c.out, cfg)
}

fn apply_output(format: Option<String>, out: Option<PathBuf>, cfg: &mut RunConfig) -> Result<()> {
    if let Some(f) = format {
        cfg.format = f.parse::<OutputFormat>()?;
    }
    if out.is_some() {
        cfg.out = out;
    }
    Ok(())
}

fn build(cli: Cli) -> Result<Option<RunConfig>> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => RunConfig::default(),
    };
    let Some(cmd) = cli.command else {
        if cfg.command.is_none() {
            return Err(Error::Config("no command given (try --help)".into()));
        }
        return Ok(Some(cfg));
    };
    match cmd {
        Cmd::Ols { common, interact } => {
            cfg.command = Some(Command::Ols);
            cfg.interact |= interact;
            apply_common(common, &mut cfg)?;
        }
        Cmd::OlsGeneral { common, transform, normalize } => {
            cfg.command = Some(Command::OlsGeneral);
            if let Some(t) = transform {
                cfg.transform = Some(TreatmentTransform::parse(&t, normalize)?);
            } else if normalize {
                let mut t = cfg
                    .transform
                    .take()
                    .unwrap_or(TreatmentTransform::new(TransformKind::Identity, false)?);
                t.normalize = true;
                cfg.transform = Some(t);
            }
            apply_common(common, &mut cfg)?;
        }
        Cmd::Tsls { common, complier, zeta } => {
            cfg.command = Some(Command::Tsls);
            cfg.complier |= complier || zeta.is_some();
            cfg.zeta = zeta.or(cfg.zeta);
            apply_common(common, &mut cfg)?;
        }
        Cmd::Did { common, modified } => {
            cfg.command = Some(Command::Did);
            cfg.modified |= modified;
            apply_common(common, &mut cfg)?;
        }
        Cmd::Rdd { common, cutoff, bandwidth, bandwidth_multiplier, kernel, modified } => {
            cfg.command = Some(Command::Rdd);
            cfg.cutoff = cutoff.or(cfg.cutoff);
            cfg.bandwidth = bandwidth.or(cfg.bandwidth);
            cfg.bandwidth_multiplier = bandwidth_multiplier.or(cfg.bandwidth_multiplier);
            if let Some(k) = kernel {
                cfg.kernel = Some(k.parse::<Kernel>()?);
            }
            cfg.modified |= modified;
            apply_common(common, &mut cfg)?;
        }
        Cmd::Bounds { common } => {
            cfg.command = Some(Command::Bounds);
            apply_common(common, &mut cfg)?;
        }
        Cmd::Simulate { scenario, ns, reps, seed, format, out, plotdata, list } => {
            if list {
                print!("{}", list_scenarios());
                return Ok(None);
            }
            cfg.command = Some(Command::Simulate);
            cfg.scenario = scenario.or(cfg.scenario);
            cfg.ns = ns.or(cfg.ns);
            cfg.reps = reps.or(cfg.reps);
            cfg.seed = seed.or(cfg.seed);
            cfg.plotdata = plotdata.or(cfg.plotdata);
            apply_output(format, out, &mut cfg)?;
        }
    }
    Ok(Some(cfg))
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("{}", error_json(e));
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!(
                "{}",
                serde_json::json!({"error": {"code": "Usage", "message": msg.trim(), "exit_code": 2}})
            );
            return ExitCode::from(2);
        }
    };
    let cfg = match build(cli) {
        Ok(Some(cfg)) => cfg,
        Ok(None) => return ExitCode::SUCCESS,
        Err(e) => return fail(&e),
    };
    match execute(&cfg) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
