//! Seller and buyer valuations, their adjustments over the benchmark price,
//! replication strategies and funding-account positions.

use serde::Serialize;

use crate::benchmark::{benchmark_surface, closeout_c, closeout_i, collateral, BenchmarkSurface};
use crate::driver::Side;
use crate::error::{Result, XvaError};
use crate::model::{ClaimSpec, MarketConfig};
use crate::pde::{solve_semilinear, GridSpec, Solve, SolverConfig, Surface};
use crate::scalar::Scalar;

/// Benchmark prices with magnitude at or below this have no relative XVA.
pub const RELATIVE_FLOOR: f64 = 1e-12;

/// Prices and adjustments at `t = 0` and the evaluation spot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XvaReport<T> {
    pub v_hat_0: T,
    pub v_plus_0: T,
    pub v_minus_0: T,
    pub xva_sell: T,
    pub xva_buy: T,
    pub xva_sell_rel: Option<T>,
    pub xva_buy_rel: Option<T>,
    pub band_width: T,
    pub funding_sell_0: T,
    pub funding_buy_0: T,
}

impl<T: Scalar> XvaReport<T> {
    pub fn new(v_hat_0: T, v_plus_0: T, v_minus_0: T, cfg: &MarketConfig<T>) -> Self {
        let xva_sell = v_plus_0 - v_hat_0;
        let xva_buy = v_minus_0 - v_hat_0;
        let relative = v_hat_0.abs() > T::lit(RELATIVE_FLOOR);
        Self {
            v_hat_0,
            v_plus_0,
            v_minus_0,
            xva_sell,
            xva_buy,
            xva_sell_rel: relative.then(|| xva_sell / v_hat_0),
            xva_buy_rel: relative.then(|| xva_buy / v_hat_0),
            band_width: xva_sell - xva_buy,
            funding_sell_0: funding_account_0(v_plus_0, v_hat_0, cfg),
            funding_buy_0: funding_account_0(v_minus_0, v_hat_0, cfg),
        }
    }

    /// Adjustment as a fraction of the benchmark price.
    pub fn relative(&self, side: Side) -> Result<T> {
        let rel = match side {
            Side::Seller => self.xva_sell_rel,
            Side::Buyer => self.xva_buy_rel,
        };
        rel.ok_or_else(|| {
            XvaError::Unsupported(format!(
                "relative XVA undefined for benchmark price {}",
                self.v_hat_0
            ))
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub const CSV_HEADER: &'static str = "v_hat_0,v_plus_0,v_minus_0,xva_sell,xva_buy,\
xva_sell_rel,xva_buy_rel,band_width,funding_sell_0,funding_buy_0";

    /// One CSV row matching [`Self::CSV_HEADER`]; undefined relative
    /// values are left empty.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<T>| v.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.v_hat_0,
            self.v_plus_0,
            self.v_minus_0,
            self.xva_sell,
            self.xva_buy,
            opt(self.xva_sell_rel),
            opt(self.xva_buy_rel),
            self.band_width,
            self.funding_sell_0,
            self.funding_buy_0
        )
    }
}

/// Replication strategy at one point of the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HedgeSnapshot<T> {
    /// Stock shares.
    pub xi: T,
    /// Shares of the trader's bond.
    pub xi_i: T,
    /// Shares of the counterparty's bond.
    pub xi_c: T,
    pub funding_value: T,
    pub z: T,
    pub z_i: T,
    pub z_c: T,
}

/// Strategy implied by the solved surface at `(t, s)`.
///
/// The bond prices on survival are `exp((r_D + h_j^Q) t)`, so the bond
/// positions are `(v - theta_j(v_hat)) exp((r_D + h_j^Q)(T - t))`.
pub fn hedge_at<T: Scalar>(
    surface: &Surface<T>,
    benchmark: &BenchmarkSurface<T>,
    cfg: &MarketConfig<T>,
    t: T,
    s: T,
) -> Result<HedgeSnapshot<T>> {
    if s.is_nan() || s <= T::zero() {
        return Err(XvaError::OutOfGrid {
            t: t.as_f64(),
            s: s.as_f64(),
        });
    }
    if benchmark.surface().grid() != surface.grid() {
        return Err(XvaError::InvalidGrid(
            "benchmark surface lives on a different grid".into(),
        ));
    }
    let x = s.ln();
    let w = surface.sample(t, x)?;
    let v_hat = benchmark.surface().sample(t, x)?.value;
    let theta_i = closeout_i(v_hat, cfg.alpha, cfg.loss_i);
    let theta_c = closeout_c(v_hat, cfg.alpha, cfg.loss_c);
    let z_i = theta_i - w.value;
    let z_c = theta_c - w.value;
    let tau = surface.grid().maturity - t;
    Ok(HedgeSnapshot {
        xi: w.dx / s,
        xi_i: -z_i * ((cfg.r_d + cfg.h_i_q) * tau).exp(),
        xi_c: -z_c * ((cfg.r_d + cfg.h_c_q) * tau).exp(),
        funding_value: w.value + z_i + z_c - collateral(v_hat, cfg.alpha),
        z: cfg.sigma * w.dx,
        z_i,
        z_c,
    })
}

/// Dollar position in the funding account at `t = 0`,
/// `theta_I(v_hat) + theta_C(v_hat) - v - alpha v_hat`, for either side's
/// solution `v`.
pub fn funding_account_0<T: Scalar>(v_bar_0: T, v_hat_0: T, cfg: &MarketConfig<T>) -> T {
    closeout_i(v_hat_0, cfg.alpha, cfg.loss_i) + closeout_c(v_hat_0, cfg.alpha, cfg.loss_c)
        - v_bar_0
        - collateral(v_hat_0, cfg.alpha)
}

/// Benchmark plus both semilinear solves on one lattice.
#[derive(Debug, Clone)]
pub struct XvaSolution<T> {
    pub benchmark: BenchmarkSurface<T>,
    pub seller: Solve<T>,
    pub buyer: Solve<T>,
    pub report: XvaReport<T>,
    pub spot: T,
}

impl<T: Scalar> XvaSolution<T> {
    pub fn solve(&self, side: Side) -> &Solve<T> {
        match side {
            Side::Seller => &self.seller,
            Side::Buyer => &self.buyer,
        }
    }

    pub fn hedge(&self, side: Side, cfg: &MarketConfig<T>, t: T, s: T) -> Result<HedgeSnapshot<T>> {
        hedge_at(&self.solve(side).surface, &self.benchmark, cfg, t, s)
    }
}

/// Runs the benchmark solve and the seller and buyer solves (the latter two
/// concurrently) and evaluates the report at `(0, spot)`.
pub fn solve_xva<T: Scalar>(
    claim: &ClaimSpec<T>,
    cfg: &MarketConfig<T>,
    grid: &GridSpec<T>,
    solver: &SolverConfig<T>,
    spot: T,
) -> Result<XvaSolution<T>> {
    let x0 = spot.ln();
    if spot.is_nan() || spot <= T::zero() || !grid.contains(T::zero(), x0) {
        return Err(XvaError::OutOfGrid {
            t: 0.0,
            s: spot.as_f64(),
        });
    }
    let benchmark = benchmark_surface(grid, claim, cfg, solver)?;
    let (seller, buyer) = rayon::join(
        || solve_semilinear(claim, cfg, grid, solver, Side::Seller, &benchmark),
        || solve_semilinear(claim, cfg, grid, solver, Side::Buyer, &benchmark),
    );
    let (seller, buyer) = (seller?, buyer?);
    let at = |s: &Surface<T>| s.sample_slice(0, x0).value;
    let report = XvaReport::new(
        at(benchmark.surface()),
        at(&seller.surface),
        at(&buyer.surface),
        cfg,
    );
    Ok(XvaSolution {
        benchmark,
        seller,
        buyer,
        report,
        spot,
    })
}

pub fn compute_xva<T: Scalar>(
    claim: &ClaimSpec<T>,
    cfg: &MarketConfig<T>,
    grid: &GridSpec<T>,
    solver: &SolverConfig<T>,
    spot: T,
) -> Result<XvaReport<T>> {
    Ok(solve_xva(claim, cfg, grid, solver, spot)?.report)
}
