//! Independent cross-checks of the lattice solver: a recombining binomial
//! tree for the reduced pre-default BSDE and the symmetric-rate collapse.

use crate::benchmark::{benchmark_surface, closeout_c, closeout_i};
use crate::driver::{driver, DriverInputs, Side};
use crate::error::{Result, XvaError};
use crate::model::{ClaimSpec, MarketConfig};
use crate::pde::{solve_semilinear, GridSpec, SolverConfig};
use crate::scalar::Scalar;

/// Largest tree the oracle accepts.
pub const MAX_TREE_STEPS: usize = 2000;

const FIXED_POINT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpec<T> {
    pub n_steps: usize,
    pub claim: ClaimSpec<T>,
    pub cfg: MarketConfig<T>,
    /// Spot at the root.
    pub spot: T,
}

impl<T: Scalar> TreeSpec<T> {
    pub fn new(n_steps: usize, claim: ClaimSpec<T>, cfg: MarketConfig<T>) -> Self {
        Self {
            n_steps,
            claim,
            cfg,
            spot: T::one(),
        }
    }
}

/// Root value of the discrete BSDE on a binomial tree.
///
/// Log-spot moves by `(r_D - sigma^2/2) dt +- sigma sqrt(dt)` with
/// probability one half. The benchmark is the discounted expectation on the
/// same tree. Default enters only through the killing rate and the closeout
/// source, and each node solves
///
/// ```text
/// V = E[V'] + dt [f(V, z, theta_I - V, theta_C - V; v_hat) - (h_I + h_C) V + h_I theta_I + h_C theta_C]
/// ```
///
/// by fixed-point iteration, with `z = (V'_up - V'_down) / (2 sqrt(dt))`.
pub fn tree_bsde_price<T: Scalar>(spec: &TreeSpec<T>, side: Side) -> Result<T> {
    let TreeSpec {
        n_steps,
        claim,
        cfg,
        spot,
    } = spec;
    let n_steps = *n_steps;
    if n_steps == 0 || n_steps > MAX_TREE_STEPS {
        return Err(XvaError::InvalidParameter {
            field: "n_steps".into(),
            reason: format!("must lie in [1, {MAX_TREE_STEPS}], got {n_steps}"),
        });
    }
    cfg.validate()?;
    claim.validate()?;
    if spot.is_nan() || *spot <= T::zero() {
        return Err(XvaError::InvalidParameter {
            field: "spot".into(),
            reason: format!("must be > 0, got {spot}"),
        });
    }

    let dt = claim.maturity / T::from_usize(n_steps).unwrap();
    let sq = dt.sqrt();
    let half = T::lit(0.5);
    let step = cfg.sigma * sq;
    let drift = (cfg.r_d - half * cfg.sigma * cfg.sigma) * dt;
    let x0 = spot.ln();
    let node_x = |n: usize, j: usize| {
        let (n_, j_) = (T::from_usize(n).unwrap(), T::from_usize(j).unwrap());
        x0 + drift * n_ + step * (j_ + j_ - n_)
    };
    let disc = (-cfg.r_d * dt).exp();
    let kill = cfg.total_intensity();
    let tol = T::default_picard_tol();

    let terminal: Vec<T> = (0..=n_steps)
        .map(|j| claim.payoff(node_x(n_steps, j).exp()))
        .collect();
    let mut v_hat = terminal.clone();
    let mut v = terminal;

    for n in (0..n_steps).rev() {
        for j in 0..=n {
            let (up, down) = (v[j + 1], v[j]);
            let expected = half * (up + down);
            let z = (up - down) / (sq + sq);
            let b = disc * half * (v_hat[j + 1] + v_hat[j]);
            let theta_i = closeout_i(b, cfg.alpha, cfg.loss_i);
            let theta_c = closeout_c(b, cfg.alpha, cfg.loss_c);
            let source = cfg.h_i_q * theta_i + cfg.h_c_q * theta_c;
            let map = |x: T| {
                let inputs = DriverInputs::new(x, z, theta_i - x, theta_c - x, b);
                expected + dt * (driver(side, inputs, cfg) - kill * x + source)
            };
            let mut x = expected;
            let mut converged = false;
            for _ in 0..FIXED_POINT_MAX_ITER {
                let next = map(x);
                let delta = (next - x).abs();
                x = next;
                if delta < tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(XvaError::PicardDiverged {
                    step: n,
                    t: (dt * T::from_usize(n).unwrap()).as_f64(),
                    iterations: FIXED_POINT_MAX_ITER,
                    residual: (map(x) - x).abs().as_f64(),
                });
            }
            v[j] = x;
            v_hat[j] = b;
        }
        v.truncate(n + 1);
        v_hat.truncate(n + 1);
    }
    Ok(v[0])
}

/// Whether every account rate equals `r_D` and both loss rates vanish, in
/// which case both valuation problems reduce to the benchmark one.
pub fn is_symmetric<T: Scalar>(cfg: &MarketConfig<T>) -> bool {
    let r = cfg.r_d;
    [
        cfg.r_f_plus,
        cfg.r_f_minus,
        cfg.r_r_plus,
        cfg.r_r_minus,
        cfg.r_c_plus,
        cfg.r_c_minus,
    ]
    .iter()
    .all(|&x| x == r)
        && cfg.loss_i == T::zero()
        && cfg.loss_c == T::zero()
}

/// Largest lattice distance between either side's solution and the
/// benchmark surface under a symmetric configuration.
pub fn symmetric_case_residual<T: Scalar>(
    claim: &ClaimSpec<T>,
    cfg: &MarketConfig<T>,
    grid: &GridSpec<T>,
    solver: &SolverConfig<T>,
) -> Result<T> {
    if !is_symmetric(cfg) {
        return Err(XvaError::InvalidParameter {
            field: "cfg".into(),
            reason: "symmetric case needs every account rate equal to r_D and zero loss rates"
                .into(),
        });
    }
    let bench = benchmark_surface(grid, claim, cfg, solver)?;
    let mut worst = T::zero();
    for side in [Side::Seller, Side::Buyer] {
        let solved = solve_semilinear(claim, cfg, grid, solver, side, &bench)?;
        worst = worst.max(solved.surface.max_abs_diff(bench.surface()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::bs_closed_form;
    use crate::pde::{build_grid, GridOptions};

    #[test]
    fn zero_claim_on_a_single_step() {
        let spec = TreeSpec::new(1, ClaimSpec::zero(1.0, 1.0).unwrap(), MarketConfig::benchmark());
        assert_eq!(tree_bsde_price(&spec, Side::Seller).unwrap(), 0.0);
        assert_eq!(tree_bsde_price(&spec, Side::Buyer).unwrap(), 0.0);
    }

    #[test]
    fn symmetric_tree_converges_to_closed_form() {
        let cfg = MarketConfig::symmetric(0.2, 0.01, 0.2, 0.15, 0.9);
        let claim = ClaimSpec::<f64>::call(1.0, 1.0).unwrap();
        let spec = TreeSpec::new(500, claim.clone(), cfg);
        let exact = bs_closed_form(0.0, 1.0, &claim, 0.01, 0.2).unwrap();
        for side in [Side::Seller, Side::Buyer] {
            let v = tree_bsde_price(&spec, side).unwrap();
            assert!((v - exact).abs() < 2e-3, "{v} vs {exact}");
        }
    }

    #[test]
    fn tree_size_is_bounded() {
        let claim = ClaimSpec::call(1.0, 1.0).unwrap();
        let mut spec = TreeSpec::new(0, claim, MarketConfig::benchmark());
        assert!(tree_bsde_price(&spec, Side::Seller).is_err());
        spec.n_steps = MAX_TREE_STEPS + 1;
        assert!(tree_bsde_price(&spec, Side::Seller).is_err());
    }

    #[test]
    fn symmetric_residual_rejects_asymmetric_rates() {
        let claim = ClaimSpec::call(1.0, 1.0).unwrap();
        let cfg = MarketConfig::benchmark();
        let g = build_grid(&claim, &cfg, GridOptions::default()).unwrap();
        assert!(symmetric_case_residual(&claim, &cfg, &g, &SolverConfig::default()).is_err());
    }

    #[test]
    fn symmetric_residual_of_zero_claim_is_zero() {
        let claim = ClaimSpec::zero(1.0, 1.0).unwrap();
        let cfg = MarketConfig::symmetric(0.2, 0.01, 0.2, 0.15, 0.9);
        let g = build_grid(&claim, &cfg, GridOptions::default()).unwrap();
        let r = symmetric_case_residual(&claim, &cfg, &g, &SolverConfig::default()).unwrap();
        assert_eq!(r, 0.0);
    }
}
