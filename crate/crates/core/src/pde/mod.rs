//! Log-spot lattice, surfaces and the theta-scheme solver.

mod grid;
mod stepper;
mod surface;
mod tridiag;

pub use grid::{build_grid, GridOptions, GridSpec};
pub use stepper::{SolverConfig, StepDiagnostic, StepKind, Stepper};
pub use surface::{Sample, Surface};
pub use tridiag::{FactoredTridiagonal, Tridiagonal};

use crate::benchmark::BenchmarkSurface;
use crate::driver::Side;
use crate::error::{Result, XvaError};
use crate::model::{validate_no_arbitrage, ClaimSpec, MarketConfig};
use crate::scalar::Scalar;

/// A solved surface with its per-step Picard record.
#[derive(Debug, Clone)]
pub struct Solve<T> {
    pub surface: Surface<T>,
    pub diagnostics: Vec<StepDiagnostic>,
}

impl<T> Solve<T> {
    pub fn max_iterations(&self) -> usize {
        self.diagnostics.iter().map(|d| d.iterations).max().unwrap_or(0)
    }
}

/// Terminal slice `Phi(e^x)` sampled at the nodes.
pub fn terminal_slice<T: Scalar>(grid: &GridSpec<T>, claim: &ClaimSpec<T>) -> Vec<T> {
    grid.xs().into_iter().map(|x| claim.payoff(x.exp())).collect()
}

/// Solves the seller's or buyer's valuation PDE backward from the payoff.
///
/// `benchmark` must live on `grid`. The no-arbitrage conditions are
/// enforced unless `solver.allow_arbitrage` is set.
pub fn solve_semilinear<T: Scalar>(
    claim: &ClaimSpec<T>,
    cfg: &MarketConfig<T>,
    grid: &GridSpec<T>,
    solver: &SolverConfig<T>,
    side: Side,
    benchmark: &BenchmarkSurface<T>,
) -> Result<Solve<T>> {
    cfg.validate()?;
    claim.validate()?;
    solver.validate()?;
    if !solver.allow_arbitrage {
        let violations = validate_no_arbitrage(cfg);
        if !violations.is_empty() {
            return Err(XvaError::Arbitrage(violations));
        }
    }
    if benchmark.surface().grid() != grid {
        return Err(XvaError::InvalidGrid(
            "benchmark surface lives on a different grid".into(),
        ));
    }
    let stepper = Stepper::semilinear(*grid, cfg, *solver, side)?;
    let marched = stepper.march(terminal_slice(grid, claim), Some(benchmark))?;
    Ok(Solve {
        surface: marched.surface,
        diagnostics: marched.diagnostics,
    })
}
