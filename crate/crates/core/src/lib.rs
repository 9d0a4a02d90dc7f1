//! Seller and buyer valuation adjustments for European claims under
//! asymmetric funding, repo and collateral rates with bilateral default.
//!
//! The pre-default value solves a semilinear parabolic PDE in log-spot,
//! discretized with a theta scheme (Crank-Nicolson by default) and resolved
//! per step by Picard iteration. Every numerical routine is generic over
//! [`Scalar`]; the `*64` and `*32` aliases below fix the precision.
//!
//! ```
//! use xva_core::{build_grid, compute_xva, ClaimSpec, GridOptions, MarketConfig64, SolverConfig};
//!
//! let cfg = MarketConfig64::benchmark();
//! let claim = ClaimSpec::call(1.0, 1.0).unwrap();
//! let opts = GridOptions { n_x: 201, n_t: 100, ..GridOptions::default() };
//! let grid = build_grid(&claim, &cfg, opts).unwrap();
//! let report = compute_xva(&claim, &cfg, &grid, &SolverConfig::default(), 1.0).unwrap();
//! assert!(report.band_width >= 0.0);
//! ```

pub mod benchmark;
pub mod convergence;
pub mod driver;
pub mod error;
pub mod model;
pub mod oracle;
pub mod output;
pub mod pde;
pub mod scalar;
pub mod sweep;
pub mod xva;

pub use benchmark::{
    benchmark_surface, bs_closed_form, bs_delta, closeout_c, closeout_i, collateral,
    BenchmarkSurface,
};
pub use driver::{driver, f_buyer, f_seller, DriverInputs, Side};
pub use error::{Result, XvaError};
pub use model::{
    intensity_p_to_q, intensity_q_to_p, validate_no_arbitrage, ClaimSpec, Condition, CreditP,
    MarketConfig, Payoff, Violation, PARAMETER_NAMES,
};
pub use oracle::{symmetric_case_residual, tree_bsde_price, TreeSpec};
pub use pde::{
    build_grid, solve_semilinear, GridOptions, GridSpec, Solve, SolverConfig, StepDiagnostic,
    Surface,
};
pub use scalar::Scalar;
pub use xva::{compute_xva, funding_account_0, hedge_at, solve_xva, HedgeSnapshot, XvaReport, XvaSolution};

pub type MarketConfig64 = MarketConfig<f64>;
pub type MarketConfig32 = MarketConfig<f32>;
pub type ClaimSpec64 = ClaimSpec<f64>;
pub type ClaimSpec32 = ClaimSpec<f32>;
pub type GridSpec64 = GridSpec<f64>;
pub type GridSpec32 = GridSpec<f32>;
pub type Surface64 = Surface<f64>;
pub type Surface32 = Surface<f32>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolverConfig32 = SolverConfig<f32>;
pub type XvaReport64 = XvaReport<f64>;
pub type XvaReport32 = XvaReport<f32>;
pub type HedgeSnapshot64 = HedgeSnapshot<f64>;
pub type HedgeSnapshot32 = HedgeSnapshot<f32>;
