//! Theta-scheme time stepping for
//!
//! ```text
//! w_t + (r_D - sigma^2/2) w_x + sigma^2/2 w_xx - kill * w + F(t, w) = 0
//! ```
//!
//! marched backward from the terminal slice. With `A = -(r_D - sigma^2/2) d_x
//! - sigma^2/2 d_xx + kill`, one step from `t_{n+1}` to `t_n` solves
//!
//! ```text
//! (I + theta dt A) w_n = (I - (1 - theta) dt A) w_{n+1}
//!                        + dt [theta F(t_n, w_n) + (1 - theta) F(t_{n+1}, w_{n+1})]
//! ```
//!
//! The implicit forcing is resolved by Picard iteration with `A` kept
//! implicit. Both boundary nodes carry `w_xx = 0`; those rows are eliminated
//! against the first and last interior rows, which keeps the system
//! tridiagonal on the interior.

use serde::{Deserialize, Serialize};

use crate::benchmark::{closeout_c, closeout_i, BenchmarkSurface};
use crate::driver::{driver, DriverInputs, Side};
use crate::error::{Result, XvaError};
use crate::model::MarketConfig;
use crate::pde::grid::GridSpec;
use crate::pde::surface::Surface;
use crate::pde::tridiag::{FactoredTridiagonal, Tridiagonal};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    /// Sup-norm Picard update below which a step counts as converged.
    pub picard_tol: T,
    pub picard_max_iter: usize,
    /// Implicitness weight: 0.5 is Crank-Nicolson, 1 is backward Euler.
    pub theta: T,
    /// Replace the first step by two backward-Euler half steps.
    pub rannacher: bool,
    /// Solve even if the no-arbitrage conditions fail.
    pub allow_arbitrage: bool,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            picard_tol: T::default_picard_tol(),
            picard_max_iter: 50,
            theta: T::lit(0.5),
            rannacher: true,
            allow_arbitrage: false,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol.is_finite() && self.picard_tol > T::zero()) {
            return Err(XvaError::InvalidSolver(format!(
                "picard_tol must be > 0, got {}",
                self.picard_tol
            )));
        }
        if self.picard_max_iter == 0 {
            return Err(XvaError::InvalidSolver("picard_max_iter must be >= 1".into()));
        }
        if !(self.theta >= T::zero() && self.theta <= T::one()) {
            return Err(XvaError::InvalidSolver(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Per-step record of the nonlinear solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostic {
    /// Index of the time slice being produced.
    pub step: usize,
    pub t: f64,
    pub iterations: usize,
    /// Sup-norm of the last Picard update.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// A full `dt` step with the configured theta.
    Full,
    /// A `dt / 2` backward-Euler step (Rannacher startup).
    Half,
}

#[derive(Debug, Clone)]
struct Plan<T> {
    theta: T,
    h: T,
    factor: FactoredTridiagonal<T>,
}

/// Benchmark values feeding the closeout source on one slice.
struct SliceSource<T> {
    v_hat: Vec<T>,
    theta_i: Vec<T>,
    theta_c: Vec<T>,
    jump: Vec<T>,
}

/// One backward step of the scheme, reusable across all steps of a solve.
#[derive(Debug, Clone)]
pub struct Stepper<'a, T> {
    grid: GridSpec<T>,
    cfg: &'a MarketConfig<T>,
    solver: SolverConfig<T>,
    forcing: Option<Side>,
    lower: T,
    diag: T,
    upper: T,
    full: Plan<T>,
    half: Plan<T>,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    /// Linear problem with killing rate `kill` and no forcing.
    pub fn linear(
        grid: GridSpec<T>,
        cfg: &'a MarketConfig<T>,
        solver: SolverConfig<T>,
        kill: T,
    ) -> Result<Self> {
        Self::new(grid, cfg, solver, kill, None)
    }

    /// The XVA problem for `side`: killing at `h_I^Q + h_C^Q`, forcing by
    /// the driver plus the closeout source `sum_j h_j^Q theta_j(v_hat)`.
    pub fn semilinear(
        grid: GridSpec<T>,
        cfg: &'a MarketConfig<T>,
        solver: SolverConfig<T>,
        side: Side,
    ) -> Result<Self> {
        Self::new(grid, cfg, solver, cfg.total_intensity(), Some(side))
    }

    fn new(
        grid: GridSpec<T>,
        cfg: &'a MarketConfig<T>,
        solver: SolverConfig<T>,
        kill: T,
        forcing: Option<Side>,
    ) -> Result<Self> {
        solver.validate()?;
        let dx = grid.dx();
        let half = T::lit(0.5);
        let var = cfg.sigma * cfg.sigma;
        let drift = cfg.r_d - half * var;
        let diffusion = half * var / (dx * dx);
        let advection = half * drift / dx;
        let lower = advection - diffusion;
        let diag = var / (dx * dx) + kill;
        let upper = -advection - diffusion;

        let dt = grid.dt();
        let coeffs = (lower, diag, upper);
        let full = Plan {
            theta: solver.theta,
            h: dt,
            factor: implicit_matrix(grid.n_x, coeffs, solver.theta, dt).factor()?,
        };
        let half = Plan {
            theta: T::one(),
            h: dt * half,
            factor: implicit_matrix(grid.n_x, coeffs, T::one(), dt * half).factor()?,
        };
        Ok(Self {
            grid,
            cfg,
            solver,
            forcing,
            lower,
            diag,
            upper,
            full,
            half,
        })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn forcing(&self) -> Option<Side> {
        self.forcing
    }

    fn apply_operator(&self, w: &[T], i: usize) -> T {
        self.lower * w[i - 1] + self.diag * w[i] + self.upper * w[i + 1]
    }

    fn slice_source(&self, v_hat: &[T]) -> SliceSource<T> {
        let cfg = self.cfg;
        let theta_i: Vec<T> = v_hat
            .iter()
            .map(|&v| closeout_i(v, cfg.alpha, cfg.loss_i))
            .collect();
        let theta_c: Vec<T> = v_hat
            .iter()
            .map(|&v| closeout_c(v, cfg.alpha, cfg.loss_c))
            .collect();
        let jump = theta_i
            .iter()
            .zip(&theta_c)
            .map(|(&a, &b)| cfg.h_i_q * a + cfg.h_c_q * b)
            .collect();
        SliceSource {
            v_hat: v_hat.to_vec(),
            theta_i,
            theta_c,
            jump,
        }
    }

    /// Adds `scale * F(w)` to the interior entries of `acc` (indexed from
    /// the first interior node).
    fn add_forcing(&self, side: Side, w: &[T], src: &SliceSource<T>, scale: T, acc: &mut [T]) {
        let inv_2dx = T::lit(0.5) / self.grid.dx();
        for i in 1..w.len() - 1 {
            let v = w[i];
            let inputs = DriverInputs {
                v,
                z: self.cfg.sigma * (w[i + 1] - w[i - 1]) * inv_2dx,
                z_i: src.theta_i[i] - v,
                z_c: src.theta_c[i] - v,
                v_hat: src.v_hat[i],
            };
            let f = driver(side, inputs, self.cfg) + src.jump[i];
            acc[i - 1] = acc[i - 1] + scale * f;
        }
    }

    fn with_boundaries(&self, interior: &[T]) -> Vec<T> {
        let k = interior.len();
        let mut w = Vec::with_capacity(k + 2);
        w.push(interior[0] + interior[0] - interior[1]);
        w.extend_from_slice(interior);
        w.push(interior[k - 1] + interior[k - 1] - interior[k - 2]);
        w
    }

    /// One backward step from `next` (the later slice). `bench` carries the
    /// benchmark slices at the target and at the later time; it is required
    /// when the stepper has forcing. `guess` seeds the Picard iteration
    /// (`next` when absent). `step` and `t` label diagnostics.
    #[allow(clippy::too_many_arguments)]
    pub fn cn_step(
        &self,
        next: &[T],
        kind: StepKind,
        bench: Option<(&[T], &[T])>,
        guess: Option<Vec<T>>,
        step: usize,
        t: T,
    ) -> Result<(Vec<T>, StepDiagnostic)> {
        let n = self.grid.n_x;
        if next.len() != n {
            return Err(XvaError::InvalidGrid("slice length does not match grid".into()));
        }
        let plan = match kind {
            StepKind::Full => &self.full,
            StepKind::Half => &self.half,
        };
        let (theta, h) = (plan.theta, plan.h);
        let explicit = (T::one() - theta) * h;

        let mut rhs: Vec<T> = (1..n - 1)
            .map(|i| next[i] - explicit * self.apply_operator(next, i))
            .collect();

        let forcing = match (self.forcing, bench) {
            (Some(side), Some((now, later))) => {
                if now.len() != n || later.len() != n {
                    return Err(XvaError::InvalidGrid(
                        "benchmark slice length does not match grid".into(),
                    ));
                }
                if explicit > T::zero() {
                    let src = self.slice_source(later);
                    self.add_forcing(side, next, &src, explicit, &mut rhs);
                }
                Some((side, self.slice_source(now)))
            }
            (Some(_), None) => {
                return Err(XvaError::Unsupported(
                    "semilinear step requires benchmark slices".into(),
                ))
            }
            (None, _) => None,
        };

        let implicit = theta * h;
        let (side, src) = match forcing {
            Some(pair) if implicit > T::zero() => pair,
            _ => {
                let mut x = rhs;
                plan.factor.solve_in_place(&mut x);
                let diag = StepDiagnostic {
                    step,
                    t: t.as_f64(),
                    iterations: 1,
                    residual: 0.0,
                };
                return Ok((self.with_boundaries(&x), diag));
            }
        };

        let mut current = match guess {
            Some(g) if g.len() == n => g,
            _ => next.to_vec(),
        };
        let mut residual = T::infinity();
        for iteration in 1..=self.solver.picard_max_iter {
            let mut x = rhs.clone();
            self.add_forcing(side, &current, &src, implicit, &mut x);
            plan.factor.solve_in_place(&mut x);
            let candidate = self.with_boundaries(&x);
            residual = candidate
                .iter()
                .zip(&current)
                .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
            current = candidate;
            if !residual.is_finite() {
                break;
            }
            if residual < self.solver.picard_tol {
                let diag = StepDiagnostic {
                    step,
                    t: t.as_f64(),
                    iterations: iteration,
                    residual: residual.as_f64(),
                };
                return Ok((current, diag));
            }
        }
        Err(XvaError::PicardDiverged {
            step,
            t: t.as_f64(),
            iterations: self.solver.picard_max_iter,
            residual: residual.as_f64(),
        })
    }

    /// Marches from `terminal` at `t = T` down to `t = 0`.
    pub(crate) fn march(
        &self,
        terminal: Vec<T>,
        bench: Option<&BenchmarkSurface<T>>,
    ) -> Result<Marched<T>> {
        let g = self.grid;
        let mut slices: Vec<Vec<T>> = vec![Vec::new(); g.n_t + 1];
        let mut diagnostics = Vec::with_capacity(g.n_t + 1);
        let mut startup = None;
        slices[g.n_t] = terminal;

        let bench_pair = |n: usize| bench.map(|b| (b.surface().slice(n), b.surface().slice(n + 1)));

        for n in (0..g.n_t).rev() {
            if n + 1 == g.n_t && self.solver.rannacher {
                let mid_t = g.maturity - g.dt() * T::lit(0.5);
                let mid_bench = bench.map(|b| b.startup_slice());
                let first = bench.map(|b| (&mid_bench.as_ref().unwrap()[..], b.surface().slice(g.n_t)));
                let (mid, d1) =
                    self.cn_step(&slices[g.n_t], StepKind::Half, first, None, n + 1, mid_t)?;
                let second = bench.map(|b| (b.surface().slice(n), &mid_bench.as_ref().unwrap()[..]));
                let (w, d2) = self.cn_step(&mid, StepKind::Half, second, None, n, g.t(n))?;
                diagnostics.push(d1);
                diagnostics.push(d2);
                startup = Some(mid);
                slices[n] = w;
            } else {
                // linear extrapolation in time once both later slices are
                // past the terminal kink
                let guess = (self.forcing.is_some() && n + 2 < g.n_t).then(|| {
                    slices[n + 1]
                        .iter()
                        .zip(&slices[n + 2])
                        .map(|(a, b)| *a + *a - *b)
                        .collect()
                });
                let (w, d) =
                    self.cn_step(&slices[n + 1], StepKind::Full, bench_pair(n), guess, n, g.t(n))?;
                diagnostics.push(d);
                slices[n] = w;
            }
        }

        Ok(Marched {
            surface: Surface::from_slices(g, slices)?,
            diagnostics,
            startup,
        })
    }
}

pub(crate) struct Marched<T> {
    pub surface: Surface<T>,
    pub diagnostics: Vec<StepDiagnostic>,
    pub startup: Option<Vec<T>>,
}

/// `I + theta h A` on the interior with the boundary rows eliminated.
fn implicit_matrix<T: Scalar>(n_x: usize, (lower, diag, upper): (T, T, T), theta: T, h: T) -> Tridiagonal<T> {
    let k = n_x - 2;
    let s = theta * h;
    let (lo, di, up) = (s * lower, T::one() + s * diag, s * upper);
    let mut m = Tridiagonal {
        lower: vec![lo; k],
        diag: vec![di; k],
        upper: vec![up; k],
    };
    // w_0 = 2 w_1 - w_2
    m.diag[0] = di + lo + lo;
    m.upper[0] = up - lo;
    // w_{N-1} = 2 w_{N-2} - w_{N-3}
    m.diag[k - 1] = m.diag[k - 1] + up + up;
    m.lower[k - 1] = lo - up;
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec<f64> {
        GridSpec::new(-1.2, 1.2, 801, 400, 1.0).unwrap()
    }

    #[test]
    fn constant_slice_decays_by_killing_factor() {
        let cfg = MarketConfig::benchmark();
        let solver = SolverConfig::default();
        let stepper = Stepper::linear(grid(), &cfg, solver, 0.35).unwrap();
        let ones = vec![1.0; 801];
        let (w, diag) = stepper.cn_step(&ones, StepKind::Full, None, None, 399, 0.9975).unwrap();
        let dt: f64 = 0.0025;
        let expected = (1.0 - 0.5 * dt * 0.35) / (1.0 + 0.5 * dt * 0.35);
        assert!((expected - 0.999125).abs() < 1e-6);
        for v in &w {
            assert!((v - expected).abs() < 1e-14, "{v}");
        }
        assert_eq!(diag.iterations, 1);
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let cfg = MarketConfig::benchmark();
        let stepper = Stepper::semilinear(grid(), &cfg, SolverConfig::default(), Side::Seller).unwrap();
        let zeros = vec![0.0; 801];
        let (w, d) = stepper
            .cn_step(&zeros, StepKind::Full, Some((&zeros, &zeros)), None, 10, 0.025)
            .unwrap();
        assert!(w.iter().all(|&v| v == 0.0));
        assert_eq!(d.iterations, 1);
    }

    #[test]
    fn boundary_second_differences_vanish() {
        let cfg = MarketConfig::benchmark();
        let stepper = Stepper::linear(grid(), &cfg, SolverConfig::default(), cfg.r_d).unwrap();
        let next: Vec<f64> = grid().xs().iter().map(|x| (x.exp() - 1.0).max(0.0)).collect();
        let (w, _) = stepper.cn_step(&next, StepKind::Full, None, None, 399, 0.9975).unwrap();
        let n = w.len();
        assert!((w[0] - 2.0 * w[1] + w[2]).abs() < 1e-14);
        assert!((w[n - 1] - 2.0 * w[n - 2] + w[n - 3]).abs() < 1e-14);
    }

    #[test]
    fn forced_non_convergence_reports_residual() {
        let mut cfg = MarketConfig::benchmark();
        cfg.r_f_plus = 2.0;
        cfg.r_f_minus = 3.0;
        cfg.r_r_minus = 2.5;
        let solver = SolverConfig {
            picard_max_iter: 1,
            ..SolverConfig::default()
        };
        let stepper = Stepper::semilinear(grid(), &cfg, solver, Side::Seller).unwrap();
        let next: Vec<f64> = grid().xs().iter().map(|x| (x.exp() - 1.0).max(0.0)).collect();
        let err = stepper
            .cn_step(&next, StepKind::Full, Some((&next, &next)), None, 7, 0.0175)
            .unwrap_err();
        match err {
            XvaError::PicardDiverged {
                step,
                iterations,
                residual,
                ..
            } => {
                assert_eq!(step, 7);
                assert_eq!(iterations, 1);
                assert!(residual > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn semilinear_step_needs_benchmark() {
        let cfg = MarketConfig::benchmark();
        let stepper = Stepper::semilinear(grid(), &cfg, SolverConfig::default(), Side::Buyer).unwrap();
        assert!(stepper
            .cn_step(&vec![0.0; 801], StepKind::Full, None, None, 0, 0.0)
            .is_err());
    }

    #[test]
    fn invalid_solver_settings() {
        let cfg = MarketConfig::benchmark();
        for solver in [
            SolverConfig {
                theta: 1.5,
                ..SolverConfig::default()
            },
            SolverConfig {
                picard_tol: 0.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                picard_max_iter: 0,
                ..SolverConfig::default()
            },
        ] {
            assert!(Stepper::linear(grid(), &cfg, solver, 0.0).is_err());
        }
    }
}
