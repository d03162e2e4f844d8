//! Command-line driver: `pcflow verify|run|report`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage/config error,
//! 3 positivity breakdown (partial CSV still written).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flow::{self, FlowControls, FlowState, RunOutcome};
use crate::identity::{self, CaseId, SuiteConfig};
use crate::initial::{self, DataKind};
use crate::report;
use crate::snapshot;

#[derive(Parser)]
#[command(name = "pcflow", version, about = "Pluriclosed-flow laboratory on the flat complex torus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the identity verification suite and write a JSON report.
    Verify(VerifyArgs),
    /// Integrate the flow, writing diagnostics CSV and snapshots.
    Run(RunArgs),
    /// Compute estimate-monitor verdicts from a diagnostics CSV.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct CommonArgs {
    /// Config file (flat key = value lines with dotted sections).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Complex dimension n (1..=3).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Grid points per real axis (even, 4..=64).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Initial data kind: flat | kahler | rank_one | hs.
    #[arg(long)]
    pub data: Option<String>,
    /// Perturbation amplitude.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Seed for randomized choices.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Case name or "all".
    #[arg(long, default_value = "all")]
    pub case: String,
    /// Flow time of the snapshot triple for evolution cases.
    #[arg(long)]
    pub probe_time: Option<f64>,
    /// Central-difference step of the triple.
    #[arg(long)]
    pub probe_dt: Option<f64>,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Flow horizon.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Adaptive-step safety factor.
    #[arg(long)]
    pub safety: Option<f64>,
    /// Probe times (comma separated) at which snapshots are written.
    #[arg(long)]
    pub probe_times: Option<String>,
    /// Refresh stride for the derivative norms d1/d2.
    #[arg(long)]
    pub deriv_stride: Option<usize>,
    /// Resume from a snapshot file instead of constructing initial data.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Diagnostics CSV produced by `pcflow run`.
    #[arg(long)]
    pub csv: PathBuf,
    /// Bound for the smoothing-estimate monitors.
    #[arg(long)]
    pub bound: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(d) = common.dim {
        cfg.dim = d;
    }
    if let Some(g) = common.grid {
        cfg.grid = g;
    }
    if let Some(k) = &common.data {
        cfg.data_kind = k.clone();
    }
    if let Some(e) = common.epsilon {
        cfg.epsilon = e;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.display().to_string();
    }
    Ok(cfg)
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Exit code constants.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CASE_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BREAKDOWN: i32 = 3;

pub fn main_with(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Verify(args) => cmd_verify(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Report(args) => cmd_report(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Argument(_) | Error::DimConstraint { .. } => EXIT_USAGE,
                Error::Format(_) => EXIT_USAGE,
                _ => EXIT_USAGE,
            }
        }
    }
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let mut cfg = load_config(&args.common)?;
    if let Some(t) = args.probe_time {
        cfg.probe_time = t;
    }
    if let Some(dt) = args.probe_dt {
        cfg.probe_dt = dt;
    }
    cfg.validate()?;

    let kind = DataKind::parse(&cfg.data_kind)?;
    let cases: Vec<CaseId> = if args.case == "all" {
        CaseId::all()
            .into_iter()
            .filter(|c| {
                let case = c.case();
                // "all" selects the applicable cases: HS-only cases need phi,
                // the dimension-2 form needs n = 2
                let hs_ok = kind == DataKind::HermitianSymplectic
                    || case.requires != identity::Requires::HsFlowTriple;
                let dim_ok = case.dim_constraint.map_or(true, |d| d == cfg.dim);
                hs_ok && dim_ok
            })
            .collect()
    } else {
        let id = CaseId::parse(&args.case)?;
        let case = id.case();
        if let Some(required) = case.dim_constraint {
            if cfg.dim != required {
                return Err(Error::DimConstraint {
                    case: id.name().into(),
                    required,
                    got: cfg.dim,
                });
            }
        }
        if case.requires == identity::Requires::HsFlowTriple
            && kind != DataKind::HermitianSymplectic
        {
            return Err(Error::Config(format!(
                "case {} needs Hermitian-symplectic data (--data hs)",
                id.name()
            )));
        }
        vec![id]
    };

    let mut suite = SuiteConfig::new(cfg.dim, cfg.grid, cfg.data_spec()?);
    suite.probe_time = cfg.probe_time;
    suite.probe_dt = cfg.probe_dt;
    suite.safety = cfg.safety;
    suite.tolerance_overrides = cfg.tolerance_overrides.clone();

    let outcomes = identity::run_suite(&cases, &suite)?;
    let pass = outcomes.iter().all(|o| o.passed());
    for o in &outcomes {
        match &o.report {
            Some(r) => println!(
                "{:22} rel {:.3e} (tol {:.1e}) {}",
                r.case,
                r.rel_residual,
                r.tolerance,
                if r.pass { "pass" } else { "FAIL" }
            ),
            None => println!("{:22} ERROR {}", o.case, o.error.as_deref().unwrap_or("?")),
        }
    }

    let dir = ensure_out_dir(&cfg)?;
    let doc = report::VerifyReport {
        build: report::build_id(),
        config: &cfg,
        cases: outcomes,
        pass,
    };
    std::fs::write(dir.join("verify_report.json"), report::to_json_pretty(&doc)?)?;
    Ok(if pass { EXIT_OK } else { EXIT_CASE_FAILURE })
}

pub fn cmd_run(args: &RunArgs) -> Result<i32> {
    let mut cfg = load_config(&args.common)?;
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    if let Some(s) = args.safety {
        cfg.safety = s;
    }
    if let Some(k) = args.deriv_stride {
        cfg.deriv_stride = k;
    }
    if let Some(p) = &args.probe_times {
        cfg.probe_times = p
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config("probe_times: expected comma-separated reals".into()))?;
    }
    cfg.validate()?;
    let dir = ensure_out_dir(&cfg)?;

    let initial_state = match &args.resume {
        Some(path) => {
            let state = snapshot::read_snapshot(path)?;
            if state.metric.n() != cfg.dim || state.metric.chart().grid() != cfg.grid {
                return Err(Error::Config(format!(
                    "resume: snapshot is n={} N={}, config says n={} N={}",
                    state.metric.n(),
                    state.metric.chart().grid(),
                    cfg.dim,
                    cfg.grid
                )));
            }
            state
        }
        None => {
            let chart = crate::chart::TorusChart::new(cfg.dim, cfg.grid)?;
            let spec = cfg.data_spec()?;
            match DataKind::parse(&cfg.data_kind)? {
                DataKind::Flat => FlowState::new(initial::make_flat(&chart)?, None)?,
                DataKind::Kahler => {
                    FlowState::new(initial::make_kahler_perturbation(&chart, &spec)?, None)?
                }
                DataKind::PluriclosedRankOne => {
                    FlowState::new(initial::make_pluriclosed_rank_one(&chart, &spec)?, None)?
                }
                DataKind::HermitianSymplectic => {
                    FlowState::from_hs(initial::make_hermitian_symplectic(&chart, &spec)?)?
                }
            }
        }
    };

    let controls = FlowControls {
        safety: cfg.safety,
        deriv_stride: cfg.deriv_stride,
        probe_times: cfg.probe_times.clone(),
        ..Default::default()
    };
    let res = flow::run(initial_state, cfg.horizon, &controls)?;

    report::write_diagnostics_csv(&dir.join("diagnostics.csv"), &res.records)?;
    for probe in &res.probes {
        let name = format!("snapshot_t{:.6}.bin", probe.t);
        snapshot::write_snapshot(&dir.join(name), probe)?;
    }
    snapshot::write_snapshot(&dir.join("snapshot_final.bin"), &res.final_state)?;
    let doc = report::RunReport {
        build: report::build_id(),
        config: &cfg,
        outcome: res.outcome.clone(),
        records: res.records.len(),
        final_t: res.final_state.t,
    };
    std::fs::write(dir.join("run_report.json"), report::to_json_pretty(&doc)?)?;

    match res.outcome {
        RunOutcome::Completed => {
            println!(
                "completed: t = {:.6}, {} records",
                res.final_state.t,
                res.records.len()
            );
            Ok(EXIT_OK)
        }
        RunOutcome::BlowupSuspected => {
            println!(
                "blow-up suspected at t = {:.6} (curvature ceiling); partial results written",
                res.final_state.t
            );
            Ok(EXIT_OK)
        }
        RunOutcome::PositivityBreakdown { t, dt } => {
            eprintln!("positivity breakdown at t = {t:.6e} (dt = {dt:.3e}); partial CSV written");
            Ok(EXIT_BREAKDOWN)
        }
    }
}

pub fn cmd_report(args: &ReportArgs) -> Result<i32> {
    let records = report::read_diagnostics_csv(&args.csv)?;
    if records.is_empty() {
        return Err(Error::Format("CSV has no data rows".into()));
    }
    let bound = args.bound.unwrap_or(50.0);
    let monitors = flow::estimate_monitors(&records, bound)?;
    let doc = report::EstimateDoc {
        build: report::build_id(),
        source_csv: &args.csv.display().to_string(),
        monitor_bound: bound,
        k_ric_source: "max_curv_proxy",
        monitors,
    };
    let text = report::to_json_pretty(&doc)?;
    println!("{text}");
    if let Some(outdir) = &args.out {
        std::fs::create_dir_all(outdir)?;
        std::fs::write(outdir.join("estimate_report.json"), &text)?;
    }
    Ok(EXIT_OK)
}

/// Test-friendly entry point: parse argv-style tokens and run.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => main_with(cli),
        Err(e) => {
            // clap prints its own message; distinguish help/version from misuse
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

#[allow(unused)]
fn _path_check(_: &Path) {}
