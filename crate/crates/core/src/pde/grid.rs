use serde::{Deserialize, Serialize};

use crate::error::{Result, XvaError};
use crate::model::{ClaimSpec, MarketConfig};
use crate::scalar::Scalar;

/// Uniform lattice in time and log-spot, `x = ln S`.
///
/// `n_x` counts every spatial node including the two boundary nodes, so
/// `dx = (x_max - x_min) / (n_x - 1)`; slice `n` sits at `t = n * dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub x_min: T,
    pub x_max: T,
    pub n_x: usize,
    pub n_t: usize,
    pub maturity: T,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(x_min: T, x_max: T, n_x: usize, n_t: usize, maturity: T) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(XvaError::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        // the linearity boundary rows are eliminated against the first and
        // last interior rows, which must be distinct
        if n_x < 4 {
            return Err(XvaError::InvalidGrid(format!("n_x must be >= 4, got {n_x}")));
        }
        if n_t < 1 {
            return Err(XvaError::InvalidGrid("n_t must be >= 1".into()));
        }
        if !(maturity.is_finite() && maturity > T::zero()) {
            return Err(XvaError::InvalidGrid(format!(
                "maturity must be > 0, got {maturity}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_x,
            n_t,
            maturity,
        })
    }

    pub fn dx(&self) -> T {
        (self.x_max - self.x_min) / T::from_usize(self.n_x - 1).unwrap()
    }

    pub fn dt(&self) -> T {
        self.maturity / T::from_usize(self.n_t).unwrap()
    }

    pub fn x(&self, m: usize) -> T {
        self.x_min + self.dx() * T::from_usize(m).unwrap()
    }

    pub fn t(&self, n: usize) -> T {
        if n == self.n_t {
            self.maturity
        } else {
            self.dt() * T::from_usize(n).unwrap()
        }
    }

    pub fn xs(&self) -> Vec<T> {
        (0..self.n_x).map(|m| self.x(m)).collect()
    }

    /// Index of the node closest to `x`.
    pub fn nearest_node(&self, x: T) -> usize {
        let pos = ((x - self.x_min) / self.dx()).round();
        pos.max(T::zero())
            .to_usize()
            .unwrap_or(0)
            .min(self.n_x - 1)
    }

    pub fn contains(&self, t: T, x: T) -> bool {
        let eps = T::epsilon() * T::lit(64.0);
        let span = (self.x_max - self.x_min) * eps;
        t >= -self.maturity * eps
            && t <= self.maturity * (T::one() + eps)
            && x >= self.x_min - span
            && x <= self.x_max + span
    }

    /// Same lattice with both step sizes halved.
    pub fn refined(&self) -> Self {
        Self {
            n_x: 2 * (self.n_x - 1) + 1,
            n_t: 2 * self.n_t,
            ..*self
        }
    }
}

/// Domain and resolution choices for [`build_grid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions<T> {
    /// Half-width of the log-spot domain in units of `sigma * sqrt(T)`.
    pub width_sigmas: T,
    pub n_x: usize,
    pub n_t: usize,
}

impl<T: Scalar> Default for GridOptions<T> {
    fn default() -> Self {
        Self {
            width_sigmas: T::lit(6.0),
            n_x: 801,
            n_t: 400,
        }
    }
}

/// Lattice centred at `ln K` with half-width `width_sigmas * sigma * sqrt(T)`.
/// `n_x` must be odd so that `ln K` is a node.
pub fn build_grid<T: Scalar>(
    claim: &ClaimSpec<T>,
    cfg: &MarketConfig<T>,
    opts: GridOptions<T>,
) -> Result<GridSpec<T>> {
    claim.validate()?;
    if !(opts.width_sigmas.is_finite() && opts.width_sigmas > T::zero()) {
        return Err(XvaError::InvalidGrid(format!(
            "width_sigmas must be > 0, got {}",
            opts.width_sigmas
        )));
    }
    if opts.n_x < 5 || opts.n_x.is_multiple_of(2) {
        return Err(XvaError::InvalidGrid(format!(
            "n_x must be odd and >= 5 so the strike is a node, got {}",
            opts.n_x
        )));
    }
    let centre = claim.strike.ln();
    let half = opts.width_sigmas * cfg.sigma * claim.maturity.sqrt();
    GridSpec::new(centre - half, centre + half, opts.n_x, opts.n_t, claim.maturity)
}
