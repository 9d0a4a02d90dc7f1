//! Grid-refinement studies at `(0, spot)`.
//!
//! Each level halves both `dx` and `dt` of the previous one on the same
//! domain. The linear mode measures the benchmark solve against the closed
//! form; the nonlinear mode has no exact value and estimates the order from
//! successive differences.

use serde::Serialize;

use crate::benchmark::{benchmark_surface, bs_closed_form};
use crate::driver::Side;
use crate::error::{Result, XvaError};
use crate::model::{ClaimSpec, MarketConfig};
use crate::pde::{build_grid, solve_semilinear, GridOptions, GridSpec, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Zero driver, killing at `r_D`: the benchmark problem.
    Linear,
    /// The full valuation problem for one side.
    Nonlinear(Side),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSpec {
    pub cfg: MarketConfig<f64>,
    pub claim: ClaimSpec<f64>,
    /// Coarsest lattice; finer levels double its intervals.
    pub base: GridOptions<f64>,
    pub levels: usize,
    pub solver: SolverConfig<f64>,
    pub spot: f64,
    pub mode: Mode,
}

impl ConvergenceSpec {
    pub fn new(cfg: MarketConfig<f64>, mode: Mode, levels: usize) -> Self {
        Self {
            cfg,
            claim: ClaimSpec::call(1.0, 1.0).expect("valid claim"),
            base: GridOptions {
                n_x: 201,
                n_t: 100,
                ..GridOptions::default()
            },
            levels,
            solver: SolverConfig::default(),
            spot: 1.0,
            mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelResult {
    pub level: usize,
    pub n_x: usize,
    pub n_t: usize,
    pub dx: f64,
    pub dt: f64,
    pub value: f64,
    /// Distance to the closed form (linear) or to the finest level
    /// (nonlinear; zero on the finest level itself).
    pub error: f64,
    /// Observed order from this level and the previous ones.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub mode: Mode,
    /// Closed-form value in the linear mode.
    pub reference: Option<f64>,
    pub rows: Vec<LevelResult>,
}

impl ConvergenceTable {
    pub fn final_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,n_x,n_t,dx,dt,value,error,order\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.level,
                r.n_x,
                r.n_t,
                r.dx,
                r.dt,
                r.value,
                r.error,
                r.order.map(|o| o.to_string()).unwrap_or_default()
            ));
        }
        out
    }
}

fn value_at(spec: &ConvergenceSpec, grid: &GridSpec<f64>) -> Result<f64> {
    let bench = benchmark_surface(grid, &spec.claim, &spec.cfg, &spec.solver)?;
    let x = spec.spot.ln();
    let surface = match spec.mode {
        Mode::Linear => bench.into_surface(),
        Mode::Nonlinear(side) => {
            solve_semilinear(&spec.claim, &spec.cfg, grid, &spec.solver, side, &bench)?.surface
        }
    };
    if !grid.contains(0.0, x) {
        return Err(XvaError::OutOfGrid { t: 0.0, s: spec.spot });
    }
    Ok(surface.sample_slice(0, x).value)
}

pub fn run_convergence(spec: &ConvergenceSpec) -> Result<ConvergenceTable> {
    if spec.levels < 3 {
        return Err(XvaError::InvalidParameter {
            field: "levels".into(),
            reason: format!("need at least 3 levels, got {}", spec.levels),
        });
    }
    let mut grid = build_grid(&spec.claim, &spec.cfg, spec.base)?;
    let mut grids = Vec::with_capacity(spec.levels);
    for _ in 0..spec.levels {
        grids.push(grid);
        grid = grid.refined();
    }
    let values = grids
        .iter()
        .map(|g| value_at(spec, g))
        .collect::<Result<Vec<_>>>()?;

    let reference = match spec.mode {
        Mode::Linear => Some(bs_closed_form(
            0.0,
            spec.spot,
            &spec.claim,
            spec.cfg.r_d,
            spec.cfg.sigma,
        )?),
        Mode::Nonlinear(_) => None,
    };
    let finest = *values.last().expect("levels >= 3");
    let errors: Vec<f64> = values
        .iter()
        .map(|v| (v - reference.unwrap_or(finest)).abs())
        .collect();

    let rows = grids
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let order = match spec.mode {
                Mode::Linear if k >= 1 => Some((errors[k - 1] / errors[k]).log2()),
                Mode::Nonlinear(_) if k >= 2 => {
                    let coarse = (values[k - 1] - values[k - 2]).abs();
                    let fine = (values[k] - values[k - 1]).abs();
                    Some((coarse / fine).log2())
                }
                _ => None,
            };
            LevelResult {
                level: k,
                n_x: g.n_x,
                n_t: g.n_t,
                dx: g.dx(),
                dt: g.dt(),
                value: values[k],
                error: errors[k],
                order,
            }
        })
        .collect();
    Ok(ConvergenceTable {
        mode: spec.mode,
        reference,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needs_three_levels() {
        let spec = ConvergenceSpec::new(MarketConfig::benchmark(), Mode::Linear, 1);
        assert!(run_convergence(&spec).is_err());
    }

    #[test]
    fn linear_mode_reports_second_order() {
        let spec = ConvergenceSpec::new(MarketConfig::benchmark(), Mode::Linear, 3);
        let table = run_convergence(&spec).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.rows[2].n_x, 801);
        let order = table.final_order().unwrap();
        assert!((order - 2.0).abs() < 0.5, "{order}");
        assert_eq!(table.to_csv().lines().count(), 4);
    }
}
