//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bounds::{self, BoundFamily, BoundKind};
use crate::design;
use crate::engine::{self, Bits, GtMatrix, ResultsVector};
use crate::error::{Error, Result};
use crate::model::{self, NetworkConfig, SamplingPlan};
use crate::montecarlo::{MonteCarlo, DEFAULT_SEED};
use crate::plot::{line_chart, Series};

#[derive(Debug, Parser)]
#[command(
    name = "gtaccess",
    version,
    about = "Group-testing active device discovery for clustered sensor networks",
    after_help = "Monte-Carlo commands default to --seed 24301 (0x5EED); outputs never depend on wall-clock time or --workers."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derived optimal sampling probabilities as JSON.
    OptimalQ {
        #[arg(long)]
        config: PathBuf,
        /// Include the stationarity-constraint residual.
        #[arg(long)]
        report_residual: bool,
        /// Include expected transmissions per sensor over T probes.
        #[arg(long, value_name = "T")]
        probes: Option<u64>,
    },
    /// Evaluate an error bound, or invert it for the probe count.
    Bound {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_name = "derived|base:Q|Q1,Q2,..")]
        q: QSource,
        #[arg(long, value_enum)]
        kind: FamilyArg,
        #[arg(
            long,
            value_name = "T",
            conflicts_with = "epsilon",
            required_unless_present = "epsilon"
        )]
        probes: Option<u64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// COMP-decode a results vector against a dumped matrix.
    Decode {
        #[arg(long)]
        matrix: PathBuf,
        /// Probe outcomes as a string of 0/1 characters.
        #[arg(long)]
        y: String,
    },
    /// Draw a test matrix and write it in the text dump format.
    Matrix {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_name = "derived|base:Q|Q1,Q2,..")]
        q: QSource,
        #[arg(long, value_name = "T")]
        probes: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sparsity report `k_i / n_i^alpha` for a fixed-activity network.
    Regime {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Monte-Carlo success probability at one probe count.
    Simulate {
        #[command(flatten)]
        common: McArgs,
        #[arg(long, value_name = "derived|base:Q|Q1,Q2,..")]
        q: QSource,
        #[arg(long, value_name = "T")]
        probes: u64,
    },
    /// Success probability over a grid of probe counts (CSV).
    SweepProbes {
        #[command(flatten)]
        common: McArgs,
        #[arg(long, value_name = "derived|base:Q|Q1,Q2,..")]
        q: QSource,
        /// `start:stop:step` (inclusive) or a comma-separated list.
        #[arg(long)]
        t_grid: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Minimum probe count over a grid of base sampling probabilities (CSV).
    SweepQ {
        #[command(flatten)]
        common: McArgs,
        /// `start:stop:step` (inclusive) or a comma-separated list.
        #[arg(long)]
        q_grid: String,
        #[arg(long)]
        target: f64,
        #[arg(long, default_value_t = 4096)]
        t_cap: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render the sweep as an SVG line chart.
    #[arg(long, value_name = "SVG")]
    plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Union,
    Exp,
}

/// Where the sampling plan comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum QSource {
    Derived,
    Base(f64),
    Explicit(Vec<f64>),
}

impl std::str::FromStr for QSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "derived" {
            return Ok(QSource::Derived);
        }
        if let Some(base) = s.strip_prefix("base:") {
            return base
                .parse()
                .map(QSource::Base)
                .map_err(|e| format!("bad base q {base:?}: {e}"));
        }
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("bad q {v:?}: {e}"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(QSource::Explicit)
    }
}

impl QSource {
    fn plan(&self, cfg: &NetworkConfig) -> Result<SamplingPlan> {
        match self {
            QSource::Derived => design::optimal_q(cfg),
            QSource::Base(b) => SamplingPlan::base_scaled(cfg, *b),
            QSource::Explicit(q) => SamplingPlan::manual(cfg, q.clone()),
        }
    }
}

fn parse_list<T>(
    spec: &str,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<Vec<T>> {
    spec.split(',')
        .map(|v| parse(v.trim()).map_err(|msg| Error::BadGrid(format!("{spec:?}: {msg}"))))
        .collect()
}

/// Integer grid: `start:stop:step` (inclusive) or `a,b,c`.
pub fn parse_int_grid(spec: &str) -> Result<Vec<u64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = if parts.len() == 3 {
        let num = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| Error::BadGrid(format!("{spec:?}: {e}")))
        };
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step == 0 || stop < start {
            return Err(Error::BadGrid(format!(
                "{spec:?}: need step > 0 and stop >= start"
            )));
        }
        (start..=stop).step_by(step as usize).collect()
    } else {
        parse_list(spec, |v| v.parse::<u64>().map_err(|e| e.to_string()))?
    };
    crate::montecarlo::check_grid(&grid)?;
    Ok(grid)
}

/// Real grid: `start:stop:step` (inclusive, rounded to 12 decimals) or `a,b,c`.
pub fn parse_real_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = if parts.len() == 3 {
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::BadGrid(format!("{spec:?}: {e}")))
        };
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(Error::BadGrid(format!(
                "{spec:?}: need step > 0 and stop >= start"
            )));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        parse_list(spec, |v| v.parse::<f64>().map_err(|e| e.to_string()))?
    };
    crate::montecarlo::check_grid(&grid)?;
    Ok(grid)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn runner(common: &McArgs) -> Result<MonteCarlo> {
    let workers = common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    MonteCarlo::new(common.trials, common.seed)?.with_workers(workers)
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

/// Executes one parsed command and returns its standard-output text.
pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::OptimalQ {
            config,
            report_residual,
            probes,
        } => {
            let cfg = NetworkConfig::from_path(config)?;
            let plan = design::optimal_q(&cfg)?;
            let residual = if *report_residual {
                Some(design::constraint_residual(&plan, &cfg)?)
            } else {
                None
            };
            let energy = probes
                .map(|t| design::energy_report(&plan, t))
                .transpose()?;
            Ok(to_json(&json!({
                "q": plan.q(),
                "base_q": design::optimal_base_q(&cfg)?,
                "residual": residual,
                "warnings": plan.warnings(),
                "energy": energy,
            })))
        }
        Command::Bound {
            config,
            q,
            kind,
            probes,
            epsilon,
        } => {
            let cfg = NetworkConfig::from_path(config)?;
            let family = match kind {
                FamilyArg::Union => BoundFamily::Union,
                FamilyArg::Exp => BoundFamily::Exp,
            };
            let plan = match (family, q) {
                (BoundFamily::Exp, QSource::Derived) => design::optimal_base_scaled(&cfg)?,
                _ => q.plan(&cfg)?,
            };
            let kind = BoundKind::select(family, cfg.kind());
            let body = match (probes, epsilon) {
                (Some(t), _) => {
                    let b = bounds::evaluate(kind, &plan, &cfg, *t)?;
                    json!({ "kind": kind, "q": plan.q(), "probes": t, "value": b.value })
                }
                (None, Some(eps)) => {
                    let t = bounds::min_probes_from_bound(kind, &plan, &cfg, *eps)?;
                    json!({ "kind": kind, "q": plan.q(), "epsilon": eps, "min_T": t })
                }
                (None, None) => unreachable!("clap requires one of --probes/--epsilon"),
            };
            Ok(to_json(&body))
        }
        Command::Decode { matrix, y } => {
            let m = GtMatrix::from_text(&fs::read_to_string(matrix)?)?;
            let y = ResultsVector { y: Bits::parse(y)? };
            let d = engine::comp_decode(&m, &y)?;
            Ok(to_json(&serde_json::to_value(d)?))
        }
        Command::Matrix {
            config,
            q,
            probes,
            seed,
            out,
        } => {
            let cfg = NetworkConfig::from_path(config)?;
            let plan = q.plan(&cfg)?;
            let m = engine::generate_matrix(&cfg, &plan, *probes, *seed)?;
            match out {
                Some(path) => {
                    fs::write(path, m.to_text())?;
                    Ok(String::new())
                }
                None => Ok(m.to_text()),
            }
        }
        Command::Regime { config, alpha } => {
            let cfg = NetworkConfig::from_path(config)?;
            let report = model::sparsity_regime_check(&cfg, *alpha)?;
            Ok(to_json(&json!({ "alpha": alpha, "clusters": report })))
        }
        Command::Simulate { common, q, probes } => {
            let cfg = NetworkConfig::from_path(&common.config)?;
            let plan = q.plan(&cfg)?;
            let est = runner(common)?.estimate_success(&cfg, &plan, *probes)?;
            Ok(to_json(&json!({
                "q": plan.q(),
                "probes": probes,
                "seed": common.seed,
                "estimate": est,
            })))
        }
        Command::SweepProbes {
            common,
            q,
            t_grid,
            output,
        } => {
            let cfg = NetworkConfig::from_path(&common.config)?;
            let plan = q.plan(&cfg)?;
            let grid = parse_int_grid(t_grid)?;
            let sweep = runner(common)?.sweep_probes(&cfg, &plan, &grid)?;
            if let Some(svg) = &output.plot {
                let label = format!("q = {:?}", plan.q());
                let chart = line_chart(
                    "Success probability vs probes",
                    "probes T",
                    "P(success)",
                    &[Series {
                        label: &label,
                        points: sweep
                            .points
                            .iter()
                            .map(|p| (p.probes as f64, p.estimate.p_hat))
                            .collect(),
                    }],
                );
                fs::write(svg, chart)?;
            }
            let csv = sweep.to_csv();
            emit(output.out.as_deref(), &csv)?;
            Ok(String::new())
        }
        Command::SweepQ {
            common,
            q_grid,
            target,
            t_cap,
            output,
        } => {
            let cfg = NetworkConfig::from_path(&common.config)?;
            let grid = parse_real_grid(q_grid)?;
            let sweep = runner(common)?.sweep_q(&cfg, &grid, *target, *t_cap)?;
            if let Some(svg) = &output.plot {
                let label = format!("target {target}");
                let chart = line_chart(
                    "Probes needed vs base sampling probability",
                    "base q",
                    "min T",
                    &[Series {
                        label: &label,
                        points: sweep
                            .points
                            .iter()
                            .map(|p| (p.base_q, p.min_probes.map_or(f64::NAN, |t| t as f64)))
                            .collect(),
                    }],
                );
                fs::write(svg, chart)?;
            }
            if let (Some(i), Some(q_star)) = (sweep.nearest_optimal, sweep.optimal_base_q) {
                eprintln!(
                    "derived base q* = {q_star}; nearest grid point base_q = {}",
                    sweep.points[i].base_q
                );
            }
            emit(output.out.as_deref(), &sweep.to_csv())?;
            Ok(String::new())
        }
    }
}

/// Parses `argv` (including the program name), runs, and returns the exit
/// code: 0 on success, 1 on invalid input, 2 on runtime failure.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
