//! Third-party valuation: the Black-Scholes price under `r_D`, closeout
//! values and collateral.

use crate::error::{Result, XvaError};
use crate::model::{ClaimSpec, MarketConfig, Payoff};
use crate::pde::{terminal_slice, GridSpec, SolverConfig, Stepper, Surface};
use crate::scalar::Scalar;

/// Closed-form Black-Scholes value at `(t, s)` with rate `r_d`.
///
/// `sigma = 0` gives the deterministic discounted intrinsic value.
pub fn bs_closed_form<T: Scalar>(t: T, s: T, claim: &ClaimSpec<T>, r_d: T, sigma: T) -> Result<T> {
    let call = match claim.payoff {
        Payoff::Call => true,
        Payoff::Put => false,
        Payoff::Custom { .. } => {
            return Err(XvaError::Unsupported(
                "closed form covers calls and puts only; use benchmark_surface".into(),
            ))
        }
    };
    let k = claim.strike;
    if !(t >= T::zero() && t <= claim.maturity) {
        return Err(XvaError::InvalidParameter {
            field: "t".into(),
            reason: format!("must lie in [0, {}], got {t}", claim.maturity),
        });
    }
    if !(s > T::zero() && s.is_finite()) {
        return Err(XvaError::InvalidParameter {
            field: "s".into(),
            reason: format!("must be > 0, got {s}"),
        });
    }
    if sigma.is_nan() || sigma < T::zero() {
        return Err(XvaError::InvalidParameter {
            field: "sigma".into(),
            reason: format!("must be >= 0, got {sigma}"),
        });
    }
    let tau = claim.maturity - t;
    if tau == T::zero() {
        return Ok(claim.payoff(s));
    }
    let df = (-r_d * tau).exp();
    if sigma == T::zero() {
        let fwd = s - k * df;
        return Ok(if call { fwd.pos() } else { (-fwd).pos() });
    }
    let vol = sigma * tau.sqrt();
    let d1 = ((s / k).ln() + (r_d + T::lit(0.5) * sigma * sigma) * tau) / vol;
    let d2 = d1 - vol;
    Ok(if call {
        s * d1.norm_cdf() - k * df * d2.norm_cdf()
    } else {
        k * df * (-d2).norm_cdf() - s * (-d1).norm_cdf()
    })
}

/// Black-Scholes delta `N(d1)` (call) or `N(d1) - 1` (put).
pub fn bs_delta<T: Scalar>(t: T, s: T, claim: &ClaimSpec<T>, r_d: T, sigma: T) -> Result<T> {
    let tau = claim.maturity - t;
    let d1 = ((s / claim.strike).ln() + (r_d + T::lit(0.5) * sigma * sigma) * tau) / (sigma * tau.sqrt());
    match claim.payoff {
        Payoff::Call => Ok(d1.norm_cdf()),
        Payoff::Put => Ok(d1.norm_cdf() - T::one()),
        Payoff::Custom { .. } => Err(XvaError::Unsupported("delta covers calls and puts only".into())),
    }
}

/// `theta_I(v) = v - L_I ((1 - alpha) v)^+`
pub fn closeout_i<T: Scalar>(v_hat: T, alpha: T, loss_i: T) -> T {
    v_hat - loss_i * ((T::one() - alpha) * v_hat).pos()
}

/// `theta_C(v) = v + L_C ((1 - alpha) v)^-`
pub fn closeout_c<T: Scalar>(v_hat: T, alpha: T, loss_c: T) -> T {
    v_hat + loss_c * ((T::one() - alpha) * v_hat).neg_part()
}

pub fn collateral<T: Scalar>(v_hat: T, alpha: T) -> T {
    alpha * v_hat
}

/// Benchmark price on the solver lattice.
///
/// `startup` holds the intermediate slice at `T - dt/2` produced by the
/// Rannacher startup; the nonlinear solve evaluates its closeout source
/// there so that both problems see the same discrete data.
#[derive(Debug, Clone)]
pub struct BenchmarkSurface<T> {
    surface: Surface<T>,
    startup: Option<Vec<T>>,
}

impl<T: Scalar> BenchmarkSurface<T> {
    pub fn surface(&self) -> &Surface<T> {
        &self.surface
    }

    pub fn into_surface(self) -> Surface<T> {
        self.surface
    }

    /// Slice at `T - dt/2`; the average of the last two slices when the
    /// solve ran without a startup phase.
    pub fn startup_slice(&self) -> Vec<T> {
        match &self.startup {
            Some(s) => s.clone(),
            None => {
                let g = self.surface.grid();
                let half = T::lit(0.5);
                self.surface
                    .slice(g.n_t)
                    .iter()
                    .zip(self.surface.slice(g.n_t - 1))
                    .map(|(a, b)| half * (*a + *b))
                    .collect()
            }
        }
    }
}

/// Solves `w_t + (r_D - sigma^2/2) w_x + sigma^2/2 w_xx - r_D w = 0` from
/// `w(T, x) = Phi(e^x)` with the same stepper and boundary policy as the
/// nonlinear solve.
pub fn benchmark_surface<T: Scalar>(
    grid: &GridSpec<T>,
    claim: &ClaimSpec<T>,
    cfg: &MarketConfig<T>,
    solver: &SolverConfig<T>,
) -> Result<BenchmarkSurface<T>> {
    claim.validate()?;
    cfg.validate()?;
    let stepper = Stepper::linear(*grid, cfg, *solver, cfg.r_d)?;
    let marched = stepper.march(terminal_slice(grid, claim), None)?;
    Ok(BenchmarkSurface {
        surface: marched.surface,
        startup: marched.startup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{build_grid, GridOptions};
    use proptest::prelude::*;

    fn call() -> ClaimSpec<f64> {
        ClaimSpec::call(1.0, 1.0).unwrap()
    }

    #[test]
    fn closed_form_reference_values() {
        let v = bs_closed_form(0.0, 1.0, &call(), 0.01, 0.2).unwrap();
        // d1 = 0.15, d2 = -0.05
        let oracle = 0.559_617_692_370_242_5 - (-0.01f64).exp() * 0.480_061_194_161_627_5;
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 0.084334).abs() < 1e-6, "{v}");
        assert_eq!(bs_closed_form(1.0, 1.3, &call(), 0.01, 0.2).unwrap(), 0.30000000000000004);
        let det = bs_closed_form(0.0, 1.0, &call(), 0.01, 0.0).unwrap();
        assert!((det - (1.0 - (-0.01f64).exp())).abs() < 1e-15);
        assert!((det - 0.00995).abs() < 1e-5);
        let tiny = bs_closed_form(0.0, 1.0, &call(), 0.01, 1e-9).unwrap();
        assert!((tiny - det).abs() < 1e-9);
    }

    #[test]
    fn put_call_parity() {
        let put = ClaimSpec::put(1.1, 0.7).unwrap();
        let c = ClaimSpec::call(1.1, 0.7).unwrap();
        for s in [0.6, 1.0, 1.7] {
            let lhs = bs_closed_form(0.2, s, &c, 0.03, 0.25).unwrap()
                - bs_closed_form(0.2, s, &put, 0.03, 0.25).unwrap();
            let rhs = s - 1.1 * (-0.03f64 * 0.5).exp();
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_rejects_custom() {
        let c = ClaimSpec::custom(vec![(0.0, 0.0), (1.0, 1.0)], 1.0, 1.0).unwrap();
        assert!(bs_closed_form(0.0, 1.0, &c, 0.01, 0.2).is_err());
        assert!(bs_closed_form(1.5, 1.0, &call(), 0.01, 0.2).is_err());
        assert!(bs_closed_form(0.0, 0.0, &call(), 0.01, 0.2).is_err());
    }

    #[test]
    fn closeout_examples() {
        assert!((closeout_i(0.0843f64, 0.9, 0.5) - 0.080085).abs() < 1e-15);
        assert_eq!(closeout_c(0.0843, 0.9, 0.5), 0.0843);
        assert!((closeout_c(-1.0f64, 0.9, 0.5) + 0.95).abs() < 1e-15);
        assert!((collateral(0.0843f64, 0.9) - 0.07587).abs() < 1e-15);
        assert_eq!(collateral(0.3, 0.0), 0.0);
        assert_eq!(collateral(0.3, 1.0), 0.3);
    }

    proptest! {
        #[test]
        fn closeouts_bracket_benchmark(v in -5.0..5.0f64, a in 0.0..=1.0f64, li in 0.0..=1.0f64, lc in 0.0..=1.0f64) {
            prop_assert!(closeout_i(v, a, li) <= v);
            prop_assert!(v <= closeout_c(v, a, lc));
            prop_assert_eq!(closeout_i(v, 1.0, li), v);
            prop_assert_eq!(closeout_c(v, 1.0, lc), v);
            prop_assert_eq!(closeout_i(v, a, 0.0), v);
            prop_assert_eq!(closeout_c(v, a, 0.0), v);
        }
    }

    fn grid(claim: &ClaimSpec<f64>) -> GridSpec<f64> {
        build_grid(claim, &MarketConfig::benchmark(), GridOptions::default()).unwrap()
    }

    #[test]
    fn surface_matches_closed_form() {
        let cfg = MarketConfig::benchmark();
        let claim = call();
        let g = grid(&claim);
        let b = benchmark_surface(&g, &claim, &cfg, &SolverConfig::default()).unwrap();
        let v = b.surface().value(0, 400);
        assert!((v - 0.0843).abs() < 5e-4, "{v}");
        let exact = bs_closed_form(0.0, 1.0, &claim, 0.01, 0.2).unwrap();
        assert!((v - exact).abs() < 1e-5, "{v} vs {exact}");
        // the linear extrapolation at the far out-of-the-money edge undershoots
        // a value of order 1e-12 by the same order
        let lowest = b.surface().values().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(lowest > -1e-10, "{lowest}");
        let terminal = b.surface().slice(g.n_t);
        for (m, x) in g.xs().iter().enumerate() {
            assert_eq!(terminal[m], (x.exp() - 1.0).max(0.0));
        }
    }

    #[test]
    fn zero_payoff_gives_zero_surface() {
        let claim = ClaimSpec::zero(1.0, 1.0).unwrap();
        let g = grid(&claim);
        let b = benchmark_surface(&g, &claim, &MarketConfig::benchmark(), &SolverConfig::default()).unwrap();
        assert!(b.surface().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stock_is_priced_exactly() {
        let claim = ClaimSpec::custom(vec![(0.0, 0.0), (1.0, 1.0)], 1.0, 1.0).unwrap();
        let g = grid(&claim);
        let b = benchmark_surface(&g, &claim, &MarketConfig::benchmark(), &SolverConfig::default()).unwrap();
        // the truncation error of e^x enters only through the boundary rows
        for n in [0, 200, 399] {
            assert!((b.surface().value(n, 400) - 1.0).abs() < 1e-10);
            for m in 300..=500 {
                let x: f64 = g.x(m);
                let rel = (b.surface().value(n, m) - x.exp()).abs() / x.exp();
                assert!(rel < 1e-7, "n={n} m={m} rel={rel}");
            }
        }
    }
}
