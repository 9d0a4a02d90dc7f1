//! Comparative-statics sweeps over one or two model parameters.
//!
//! Every sweep point is an independent solve. Points run on a rayon pool and
//! are gathered back in axis order, so output does not depend on scheduling.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::Side;
use crate::error::{Result, XvaError};
use crate::model::{ClaimSpec, MarketConfig, PARAMETER_NAMES};
use crate::pde::{build_grid, GridOptions, SolverConfig};
use crate::xva::solve_xva;

/// Environment variable capping the sweep worker count.
pub const THREADS_ENV: &str = "XVA_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    /// A [`MarketConfig`] parameter name, e.g. `alpha` or `r_f_minus`.
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: &str, values: &[f64]) -> Self {
        Self {
            name: name.to_string(),
            values: values.to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !PARAMETER_NAMES.contains(&self.name.as_str()) {
            return Err(XvaError::UnknownParameter(self.name.clone()));
        }
        if self.values.is_empty() {
            return Err(XvaError::InvalidParameter {
                field: self.name.clone(),
                reason: "sweep axis has no values".into(),
            });
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(XvaError::InvalidParameter {
                field: self.name.clone(),
                reason: format!("non-finite sweep value {v}"),
            });
        }
        Ok(())
    }
}

/// Column groups written by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outputs {
    pub xva: bool,
    pub band: bool,
    pub strategies: bool,
    pub funding: bool,
}

impl Outputs {
    pub const ALL: Self = Self {
        xva: true,
        band: true,
        strategies: true,
        funding: true,
    };

    /// Parses a comma-separated list such as `xva,funding`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut out = Self {
            xva: false,
            band: false,
            strategies: false,
            funding: false,
        };
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "xva" => out.xva = true,
                "band" => out.band = true,
                "strategies" => out.strategies = true,
                "funding" => out.funding = true,
                other => {
                    return Err(XvaError::InvalidParameter {
                        field: "outputs".into(),
                        reason: format!(
                            "unknown output `{other}` (expected xva, band, strategies, funding)"
                        ),
                    })
                }
            }
        }
        Ok(out)
    }

    pub fn columns(&self) -> Vec<Column> {
        let mut cols = vec![Column::VHat0];
        if self.xva {
            cols.extend([Column::XvaSell, Column::XvaBuy, Column::XvaSellRel, Column::XvaBuyRel]);
        }
        if self.band {
            cols.push(Column::BandWidth);
        }
        if self.strategies {
            cols.extend([Column::Xi0, Column::XiI0, Column::XiC0]);
        }
        if self.funding {
            cols.extend([Column::FundingSell, Column::FundingBuy]);
        }
        cols
    }
}

impl Default for Outputs {
    fn default() -> Self {
        Self::ALL
    }
}

/// A value column of the sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    VHat0,
    XvaSell,
    XvaBuy,
    XvaSellRel,
    XvaBuyRel,
    BandWidth,
    /// Seller-side stock position at `(0, spot)`.
    Xi0,
    XiI0,
    XiC0,
    FundingSell,
    FundingBuy,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::VHat0 => "v_hat_0",
            Column::XvaSell => "xva_sell",
            Column::XvaBuy => "xva_buy",
            Column::XvaSellRel => "xva_sell_rel",
            Column::XvaBuyRel => "xva_buy_rel",
            Column::BandWidth => "band_width",
            Column::Xi0 => "xi_0",
            Column::XiI0 => "xi_i_0",
            Column::XiC0 => "xi_c_0",
            Column::FundingSell => "funding_sell",
            Column::FundingBuy => "funding_buy",
        }
    }

    fn get(self, p: &PointResult) -> Option<f64> {
        match self {
            Column::VHat0 => Some(p.v_hat_0),
            Column::XvaSell => Some(p.xva_sell),
            Column::XvaBuy => Some(p.xva_buy),
            Column::XvaSellRel => p.xva_sell_rel,
            Column::XvaBuyRel => p.xva_buy_rel,
            Column::BandWidth => Some(p.band_width),
            Column::Xi0 => Some(p.xi_0),
            Column::XiI0 => Some(p.xi_i_0),
            Column::XiC0 => Some(p.xi_c_0),
            Column::FundingSell => Some(p.funding_sell),
            Column::FundingBuy => Some(p.funding_buy),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: MarketConfig<f64>,
    pub claim: ClaimSpec<f64>,
    pub grid: GridOptions<f64>,
    pub solver: SolverConfig<f64>,
    pub spot: f64,
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    pub outputs: Outputs,
    /// Abort on the first failing point instead of recording the error.
    pub fail_fast: bool,
}

impl SweepSpec {
    /// Sweep over `axis1` around the reference parameters, on the default
    /// lattice for an at-the-money one-year call.
    pub fn new(base: MarketConfig<f64>, axis1: Axis) -> Self {
        Self {
            base,
            claim: ClaimSpec::call(1.0, 1.0).expect("valid claim"),
            grid: GridOptions::default(),
            solver: SolverConfig::default(),
            spot: 1.0,
            axis1,
            axis2: None,
            outputs: Outputs::ALL,
            fail_fast: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        if let Some(a) = &self.axis2 {
            a.validate()?;
            if a.name == self.axis1.name {
                return Err(XvaError::InvalidParameter {
                    field: a.name.clone(),
                    reason: "both sweep axes name the same parameter".into(),
                });
            }
        }
        self.claim.validate()?;
        self.solver.validate()?;
        Ok(())
    }

    /// Axis coordinates of every point, first axis outermost.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        for &a in &self.axis1.values {
            match &self.axis2 {
                Some(ax) => pts.extend(ax.values.iter().map(|&b| vec![a, b])),
                None => pts.push(vec![a]),
            }
        }
        pts
    }

    fn axis_names(&self) -> Vec<String> {
        let mut names = vec![self.axis1.name.clone()];
        if let Some(a) = &self.axis2 {
            names.push(a.name.clone());
        }
        names
    }

    fn config_at(&self, coords: &[f64]) -> Result<MarketConfig<f64>> {
        let mut cfg = self.base;
        cfg.set(&self.axis1.name, coords[0])?;
        if let Some(a) = &self.axis2 {
            cfg.set(&a.name, coords[1])?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn run_point(&self, coords: &[f64]) -> Result<PointResult> {
        let cfg = self.config_at(coords)?;
        let grid = build_grid(&self.claim, &cfg, self.grid)?;
        let sol = solve_xva(&self.claim, &cfg, &grid, &self.solver, self.spot)?;
        let hedge = sol.hedge(Side::Seller, &cfg, 0.0, self.spot)?;
        let r = sol.report;
        Ok(PointResult {
            v_hat_0: r.v_hat_0,
            xva_sell: r.xva_sell,
            xva_buy: r.xva_buy,
            xva_sell_rel: r.xva_sell_rel,
            xva_buy_rel: r.xva_buy_rel,
            band_width: r.band_width,
            xi_0: hedge.xi,
            xi_i_0: hedge.xi_i,
            xi_c_0: hedge.xi_c,
            funding_sell: r.funding_sell_0,
            funding_buy: r.funding_buy_0,
            max_picard_iterations: sol.seller.max_iterations().max(sol.buyer.max_iterations()),
        })
    }
}

/// Quantities recorded at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointResult {
    pub v_hat_0: f64,
    pub xva_sell: f64,
    pub xva_buy: f64,
    pub xva_sell_rel: Option<f64>,
    pub xva_buy_rel: Option<f64>,
    pub band_width: f64,
    pub xi_0: f64,
    pub xi_i_0: f64,
    pub xi_c_0: f64,
    pub funding_sell: f64,
    pub funding_buy: f64,
    pub max_picard_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub coords: Vec<f64>,
    pub result: std::result::Result<PointResult, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub axes: Vec<String>,
    pub outputs: Outputs,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Row whose coordinates equal `coords` exactly.
    pub fn row(&self, coords: &[f64]) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.coords == coords)
    }

    /// CSV with the axis columns, the requested value columns and a trailing
    /// `error` column (empty on success).
    pub fn to_csv(&self) -> String {
        self.columns_csv(&self.outputs.columns())
    }

    /// CSV restricted to `columns`, in the given order.
    pub fn columns_csv(&self, columns: &[Column]) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self
            .axes
            .iter()
            .map(String::as_str)
            .chain(columns.iter().map(|c| c.name()))
            .chain(std::iter::once("error"))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut fields: Vec<String> = row.coords.iter().map(|v| v.to_string()).collect();
            match &row.result {
                Ok(p) => {
                    fields.extend(
                        columns
                            .iter()
                            .map(|c| c.get(p).map(|v| v.to_string()).unwrap_or_default()),
                    );
                    fields.push(String::new());
                }
                Err(e) => {
                    fields.extend(columns.iter().map(|_| String::new()));
                    fields.push(csv_quote(e));
                }
            }
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn failures(&self) -> impl Iterator<Item = (&[f64], &str)> {
        self.rows.iter().filter_map(|r| match &r.result {
            Err(e) => Some((r.coords.as_slice(), e.as_str())),
            Ok(_) => None,
        })
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Worker cap from [`THREADS_ENV`]; `None` when unset, empty or zero.
pub fn thread_cap_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(XvaError::InvalidParameter {
                field: THREADS_ENV.into(),
                reason: format!("expected a positive integer, got `{v}`"),
            }),
        },
        Err(_) => Ok(None),
    }
}

/// Runs every point of `spec` on at most `threads` workers (rayon's default
/// when `None`). Parameter names are checked before any solve.
pub fn run_sweep(spec: &SweepSpec, threads: Option<usize>) -> Result<SweepTable> {
    spec.validate()?;
    let points = spec.points();
    let solve_all = || -> Vec<SweepRow> {
        points
            .par_iter()
            .map(|coords| SweepRow {
                coords: coords.clone(),
                result: spec.run_point(coords).map_err(|e| e.to_string()),
            })
            .collect()
    };
    let rows = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| XvaError::InvalidParameter {
                field: THREADS_ENV.into(),
                reason: e.to_string(),
            })?
            .install(solve_all),
        None => solve_all(),
    };
    if spec.fail_fast {
        if let Some(row) = rows.iter().find(|r| r.result.is_err()) {
            return Err(XvaError::Unsupported(format!(
                "sweep point {:?} failed: {}",
                row.coords,
                row.result.as_ref().unwrap_err()
            )));
        }
    }
    Ok(SweepTable {
        axes: spec.axis_names(),
        outputs: spec.outputs,
        rows,
    })
}

/// Collateral levels and borrowing rates of the funding-account table.
pub const TABLE1_ALPHAS: [f64; 4] = [0.0, 0.25, 0.75, 1.0];
pub const TABLE1_FUNDING_RATES: [f64; 2] = [0.08, 0.2];
/// Borrowing rates of the second funding-account table.
pub const TABLE2_FUNDING_RATES: [f64; 4] = [0.08, 0.1, 0.15, 0.2];

/// Published funding-account positions `(alpha, r_f-, seller, buyer)`.
pub const TABLE1_PUBLISHED: [(f64, f64, f64, f64); 8] = [
    (0.0, 0.08, 0.0039, 0.0403),
    (0.0, 0.2, 0.0039, 0.0447),
    (0.25, 0.08, 0.0249, 0.0257),
    (0.25, 0.2, 0.0249, 0.0287),
    (0.75, 0.08, -0.0037, -0.0036),
    (0.75, 0.2, -0.0038, -0.0032),
    (1.0, 0.08, -0.0182, -0.018),
    (1.0, 0.2, -0.0193, -0.018),
];

/// Published funding-account positions `(r_f-, seller, buyer)` at
/// `alpha = 0.9`, `h_C^Q = 0.15`.
pub const TABLE2_PUBLISHED: [(f64, f64, f64); 4] = [
    (0.08, -0.0124, -0.0123),
    (0.1, -0.0125, -0.0122),
    (0.15, -0.0127, -0.0122),
    (0.2, -0.013, -0.0122),
];

/// Solver settings shared by the canned studies. Borrowing rates above the
/// bond carry bound (`r_f- = 0.2`) are part of the published grids, so the
/// no-arbitrage gate is lifted there.
fn study_solver() -> SolverConfig<f64> {
    SolverConfig {
        allow_arbitrage: true,
        ..SolverConfig::default()
    }
}

/// `alpha x r_f-` funding-account study.
pub fn table1_spec() -> SweepSpec {
    SweepSpec {
        axis2: Some(Axis::new("r_f_minus", &TABLE1_FUNDING_RATES)),
        solver: study_solver(),
        ..SweepSpec::new(MarketConfig::benchmark(), Axis::new("alpha", &TABLE1_ALPHAS))
    }
}

/// `r_f-` funding-account study at the reference collateral level.
pub fn table2_spec() -> SweepSpec {
    SweepSpec {
        solver: study_solver(),
        ..SweepSpec::new(
            MarketConfig::benchmark(),
            Axis::new("r_f_minus", &TABLE2_FUNDING_RATES),
        )
    }
}

fn alpha_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// One plot-ready CSV of a figure.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub file_name: String,
    pub columns: Vec<Column>,
}

/// A canned figure study: one sweep and the panels cut from it.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureSpec {
    pub name: &'static str,
    pub sweep: SweepSpec,
    pub panels: Vec<Panel>,
}

fn strategy_panels(prefix: &str, xva: Vec<Column>) -> Vec<Panel> {
    let panel = |suffix: &str, columns: Vec<Column>| Panel {
        file_name: format!("{prefix}_{suffix}.csv"),
        columns,
    };
    vec![
        panel("xva", xva),
        panel("xi", vec![Column::Xi0]),
        panel("xi_i", vec![Column::XiI0]),
        panel("xi_c", vec![Column::XiC0]),
    ]
}

/// The three comparative-statics figures: adjustments and seller
/// strategies against `alpha` for several `r_f-`, against `alpha` for
/// several `h_C^Q`, and against `h_C^Q` for several `alpha`.
pub fn figure_specs() -> Vec<FigureSpec> {
    let both = vec![Column::XvaSellRel, Column::XvaBuyRel, Column::BandWidth];
    let h_c: Vec<f64> = (0..=10).map(|i| 0.05 + 0.025 * i as f64).collect();
    vec![
        FigureSpec {
            name: "figure1",
            sweep: SweepSpec {
                axis2: Some(Axis::new("r_f_minus", &[0.08, 0.14, 0.2])),
                solver: study_solver(),
                ..SweepSpec::new(MarketConfig::benchmark(), Axis::new("alpha", &alpha_grid()))
            },
            panels: strategy_panels("figure1", both.clone()),
        },
        FigureSpec {
            name: "figure2",
            sweep: SweepSpec {
                axis2: Some(Axis::new("h_C_Q", &[0.1, 0.15, 0.25])),
                solver: study_solver(),
                ..SweepSpec::new(MarketConfig::benchmark(), Axis::new("alpha", &alpha_grid()))
            },
            panels: strategy_panels("figure2", both),
        },
        FigureSpec {
            name: "figure3",
            sweep: SweepSpec {
                axis2: Some(Axis::new("alpha", &[0.0, 0.5, 0.9, 1.0])),
                solver: study_solver(),
                ..SweepSpec::new(MarketConfig::benchmark(), Axis::new("h_C_Q", &h_c))
            },
            panels: strategy_panels("figure3", vec![Column::XvaSellRel]),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(spec: SweepSpec) -> SweepSpec {
        SweepSpec {
            grid: GridOptions {
                n_x: 101,
                n_t: 50,
                ..GridOptions::default()
            },
            ..spec
        }
    }

    #[test]
    fn unknown_axis_fails_before_solving() {
        let spec = SweepSpec::new(MarketConfig::benchmark(), Axis::new("gamma", &[1.0]));
        assert!(matches!(run_sweep(&spec, None), Err(XvaError::UnknownParameter(n)) if n == "gamma"));
        let empty = SweepSpec::new(MarketConfig::benchmark(), Axis::new("alpha", &[]));
        assert!(run_sweep(&empty, None).is_err());
    }

    #[test]
    fn points_are_axis_ordered() {
        let spec = table1_spec();
        let pts = spec.points();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0], vec![0.0, 0.08]);
        assert_eq!(pts[1], vec![0.0, 0.2]);
        assert_eq!(pts[7], vec![1.0, 0.2]);
        assert_eq!(table2_spec().points().len(), 4);
    }

    #[test]
    fn one_dimensional_sweep_and_columns() {
        let mut spec = small(SweepSpec::new(MarketConfig::benchmark(), Axis::new("alpha", &[0.5, 0.9])));
        spec.outputs = Outputs::parse("funding,band").unwrap();
        let table = run_sweep(&spec, Some(2)).unwrap();
        let csv = table.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "alpha,v_hat_0,band_width,funding_sell,funding_buy,error");
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().skip(1).all(|l| l.ends_with(',')));
    }

    #[test]
    fn failures_are_recorded_per_row() {
        // r_f- below r_f+ violates the rate conditions
        let spec = small(SweepSpec::new(MarketConfig::benchmark(), Axis::new("r_f_minus", &[0.01, 0.08])));
        let table = run_sweep(&spec, Some(1)).unwrap();
        assert_eq!(table.failures().count(), 1);
        assert!(table.rows[0].result.is_err());
        assert!(table.rows[1].result.is_ok());
        let strict = SweepSpec {
            fail_fast: true,
            ..spec
        };
        assert!(run_sweep(&strict, Some(1)).is_err());
    }

    #[test]
    fn parallel_equals_serial() {
        let spec = small(SweepSpec {
            axis2: Some(Axis::new("r_f_minus", &[0.08, 0.1])),
            ..SweepSpec::new(MarketConfig::benchmark(), Axis::new("alpha", &[0.0, 0.5, 1.0]))
        });
        let serial = run_sweep(&spec, Some(1)).unwrap().to_csv();
        let parallel = run_sweep(&spec, Some(4)).unwrap().to_csv();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn outputs_parsing() {
        assert_eq!(Outputs::parse("xva, band").unwrap().columns().len(), 6);
        assert!(Outputs::parse("greeks").is_err());
        assert_eq!(Outputs::ALL.columns().len(), 11);
    }

    #[test]
    fn figure_presets_cover_three_figures() {
        let figs = figure_specs();
        assert_eq!(figs.len(), 3);
        for f in &figs {
            assert!(f.sweep.validate().is_ok());
            assert_eq!(f.panels.len(), 4);
        }
    }
}
