//! `xva`: single pricing runs, parameter sweeps, the canned funding tables
//! and figures, and grid-convergence studies.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use xva_core::convergence::{run_convergence, ConvergenceSpec, Mode};
use xva_core::output::RunLog;
use xva_core::sweep::{
    figure_specs, run_sweep, table1_spec, table2_spec, thread_cap_from_env, Axis, Outputs,
    SweepSpec, SweepTable,
};
use xva_core::{
    build_grid, solve_xva, validate_no_arbitrage, ClaimSpec, GridOptions, MarketConfig, Side,
    SolverConfig, XvaError,
};

#[derive(Parser)]
#[command(name = "xva", version, about = "Seller and buyer XVA under asymmetric rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price one claim and print the report as JSON.
    Price(PriceArgs),
    /// Sweep one or two parameters and write a CSV table.
    Sweep(SweepArgs),
    /// Funding-account positions over collateral level and borrowing rate.
    Table1(TableArgs),
    /// Funding-account positions over the borrowing rate.
    Table2(TableArgs),
    /// Plot-ready CSV for each panel of the comparative-statics figures.
    Figures(FiguresArgs),
    /// Grid-refinement study at t = 0.
    Convergence(ConvergenceArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON market configuration; the reference parameters when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one parameter, e.g. `--set alpha=0.5`. Repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClaimKind {
    Call,
    Put,
    Custom,
}

#[derive(Args)]
struct ClaimArgs {
    #[arg(long, value_enum, default_value = "call")]
    claim: ClaimKind,
    #[arg(long, default_value_t = 1.0)]
    strike: f64,
    #[arg(long, default_value_t = 1.0)]
    maturity: f64,
    /// Payoff knots for `--claim custom`, as `spot:value` pairs separated by
    /// commas, e.g. `0.5:0,1:0,1.5:0.5`.
    #[arg(long)]
    knots: Option<String>,
    /// Spot at which the report is evaluated.
    #[arg(long, default_value_t = 1.0)]
    spot: f64,
}

#[derive(Args)]
struct GridArgs {
    /// Spatial nodes (odd).
    #[arg(long)]
    nx: Option<usize>,
    /// Time steps.
    #[arg(long)]
    nt: Option<usize>,
    /// Domain half-width in units of sigma * sqrt(T).
    #[arg(long)]
    width: Option<f64>,
}

impl GridArgs {
    fn apply(&self, mut opts: GridOptions<f64>) -> GridOptions<f64> {
        if let Some(n) = self.nx {
            opts.n_x = n;
        }
        if let Some(n) = self.nt {
            opts.n_t = n;
        }
        if let Some(w) = self.width {
            opts.width_sigmas = w;
        }
        opts
    }
}

#[derive(Args)]
struct PriceArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    claim: ClaimArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Solve even if the no-arbitrage conditions fail.
    #[arg(long)]
    allow_arbitrage: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON-lines run log.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    claim: ClaimArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// First axis: `name=v1,v2,...` or `name=start:stop:step`.
    #[arg(long)]
    axis: String,
    /// Optional second axis, same syntax.
    #[arg(long)]
    axis2: Option<String>,
    /// Column groups among xva, band, strategies, funding.
    #[arg(long, default_value = "xva,band,strategies,funding")]
    outputs: String,
    /// Abort on the first failing point instead of recording it in the row.
    #[arg(long)]
    fail_fast: bool,
    #[arg(long)]
    allow_arbitrage: bool,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct FiguresArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Directory receiving one CSV per panel.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Linear,
    Seller,
    Buyer,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    claim: ClaimArgs,
    /// Coarsest lattice; each level doubles both resolutions.
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    #[arg(long, value_enum, default_value = "linear")]
    mode: ModeArg,
    #[arg(long)]
    allow_arbitrage: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
}

fn load_config(args: &ConfigArgs) -> Result<MarketConfig<f64>> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            MarketConfig::from_json(&text)
                .with_context(|| format!("invalid config {}", path.display()))?
        }
        None => MarketConfig::benchmark(),
    };
    for item in &args.overrides {
        let (name, value) = item
            .split_once('=')
            .with_context(|| format!("--set expects NAME=VALUE, got `{item}`"))?;
        let value: f64 = value
            .trim()
            .parse()
            .with_context(|| format!("--set {name}: `{value}` is not a number"))?;
        cfg.set(name.trim(), value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_knots(text: &str) -> Result<Vec<(f64, f64)>> {
    text.split(',')
        .map(|pair| {
            let (s, v) = pair
                .split_once(':')
                .with_context(|| format!("knot `{pair}` is not spot:value"))?;
            Ok((s.trim().parse()?, v.trim().parse()?))
        })
        .collect()
}

fn build_claim(args: &ClaimArgs) -> Result<ClaimSpec<f64>> {
    if args.knots.is_some() && !matches!(args.claim, ClaimKind::Custom) {
        bail!("--knots only applies to --claim custom");
    }
    Ok(match args.claim {
        ClaimKind::Call => ClaimSpec::call(args.strike, args.maturity)?,
        ClaimKind::Put => ClaimSpec::put(args.strike, args.maturity)?,
        ClaimKind::Custom => {
            let knots = args
                .knots
                .as_deref()
                .context("--claim custom requires --knots")?;
            ClaimSpec::custom(parse_knots(knots)?, args.strike, args.maturity)?
        }
    })
}

/// `name=v1,v2,...` or `name=start:stop:step` (stop included when hit).
fn parse_axis(text: &str) -> Result<Axis> {
    let (name, values) = text
        .split_once('=')
        .with_context(|| format!("axis `{text}` is not NAME=VALUES"))?;
    let values = values.trim();
    let parsed = if values.contains(':') {
        let parts: Vec<f64> = values
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("axis range `{values}`"))?;
        let [start, stop, step] = parts[..] else {
            bail!("axis range `{values}` is not start:stop:step");
        };
        if step.is_nan() || step <= 0.0 || stop < start {
            bail!("axis range `{values}` needs step > 0 and stop >= start");
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| start + step * i as f64).collect()
    } else {
        values
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("axis values `{values}`"))?
    };
    Ok(Axis {
        name: name.trim().to_string(),
        values: parsed,
    })
}

fn open_log(path: &Option<PathBuf>) -> Result<Option<RunLog<BufWriter<File>>>> {
    path.as_ref()
        .map(|p| {
            File::create(p)
                .map(|f| RunLog::new(BufWriter::new(f)))
                .with_context(|| format!("creating log {}", p.display()))
        })
        .transpose()
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn log_table(log: &mut Option<RunLog<BufWriter<File>>>, label: &str, table: &SweepTable) -> Result<()> {
    let Some(log) = log else { return Ok(()) };
    for row in &table.rows {
        match &row.result {
            Ok(p) => log.event(
                "point",
                &json!({
                    "sweep": label,
                    "coords": row.coords,
                    "max_iterations": p.max_picard_iterations,
                }),
            )?,
            Err(e) => log.event(
                "point",
                &json!({ "sweep": label, "coords": row.coords, "error": e }),
            )?,
        }
    }
    log.flush()?;
    Ok(())
}

fn warn_failures(table: &SweepTable) {
    for (coords, err) in table.failures() {
        eprintln!("warning: point {coords:?} failed: {err}");
    }
}

fn cmd_price(args: PriceArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let claim = build_claim(&args.claim)?;
    let solver = SolverConfig {
        allow_arbitrage: args.allow_arbitrage,
        ..SolverConfig::default()
    };
    let violations = validate_no_arbitrage(&cfg);
    if !violations.is_empty() {
        if !args.allow_arbitrage {
            return Err(XvaError::Arbitrage(violations))
                .context("rerun with --allow-arbitrage to solve anyway");
        }
        for v in &violations {
            eprintln!("warning: no-arbitrage condition violated: {v}");
        }
    }
    let grid = build_grid(&claim, &cfg, args.grid.apply(GridOptions::default()))?;
    let mut log = open_log(&args.log)?;
    if let Some(log) = log.as_mut() {
        log.event("config", &json!({ "market": cfg, "claim": claim, "grid": grid }))?;
    }
    let sol = solve_xva(&claim, &cfg, &grid, &solver, args.claim.spot)?;
    if let Some(log) = log.as_mut() {
        for (label, side) in [("seller", Side::Seller), ("buyer", Side::Buyer)] {
            let diags = &sol.solve(side).diagnostics;
            log.steps(label, diags)?;
            log.summary(label, diags)?;
        }
        log.event("report", &sol.report)?;
        log.flush()?;
    }
    let mut text = sol.report.to_json()?;
    text.push('\n');
    emit(&args.out, &text)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let mut spec = SweepSpec::new(cfg, parse_axis(&args.axis)?);
    spec.axis2 = args.axis2.as_deref().map(parse_axis).transpose()?;
    spec.claim = build_claim(&args.claim)?;
    spec.spot = args.claim.spot;
    spec.grid = args.grid.apply(spec.grid);
    spec.outputs = Outputs::parse(&args.outputs)?;
    spec.fail_fast = args.fail_fast;
    spec.solver.allow_arbitrage = args.allow_arbitrage;
    let table = run_sweep(&spec, thread_cap_from_env()?)?;
    let mut log = open_log(&args.log)?;
    log_table(&mut log, "sweep", &table)?;
    warn_failures(&table);
    emit(&args.out, &table.to_csv())
}

fn run_canned(mut spec: SweepSpec, label: &str, args: TableArgs) -> Result<()> {
    spec.grid = args.grid.apply(spec.grid);
    let table = run_sweep(&spec, thread_cap_from_env()?)?;
    let mut log = open_log(&args.log)?;
    log_table(&mut log, label, &table)?;
    warn_failures(&table);
    emit(&args.out, &table.to_csv())
}

fn cmd_figures(args: FiguresArgs) -> Result<()> {
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let threads = thread_cap_from_env()?;
    let mut log = open_log(&args.log)?;
    for mut fig in figure_specs() {
        fig.sweep.grid = args.grid.apply(fig.sweep.grid);
        let table = run_sweep(&fig.sweep, threads)?;
        log_table(&mut log, fig.name, &table)?;
        warn_failures(&table);
        for panel in &fig.panels {
            let path: PathBuf = Path::new(&args.out).join(&panel.file_name);
            fs::write(&path, table.columns_csv(&panel.columns))
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_convergence(args: ConvergenceArgs) -> Result<()> {
    let cfg = load_config(&args.config)?;
    let mode = match args.mode {
        ModeArg::Linear => Mode::Linear,
        ModeArg::Seller => Mode::Nonlinear(Side::Seller),
        ModeArg::Buyer => Mode::Nonlinear(Side::Buyer),
    };
    let mut spec = ConvergenceSpec::new(cfg, mode, args.levels);
    spec.claim = build_claim(&args.claim)?;
    spec.spot = args.claim.spot;
    spec.base = args.grid.apply(spec.base);
    spec.solver.allow_arbitrage = args.allow_arbitrage;
    let table = run_convergence(&spec)?;
    if let Some(mut log) = open_log(&args.log)? {
        log.event("convergence", &table)?;
        log.flush()?;
    }
    emit(&args.out, &table.to_csv())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Price(a) => cmd_price(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Table1(a) => run_canned(table1_spec(), "table1", a),
        Command::Table2(a) => run_canned(table2_spec(), "table2", a),
        Command::Figures(a) => cmd_figures(a),
        Command::Convergence(a) => cmd_convergence(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
