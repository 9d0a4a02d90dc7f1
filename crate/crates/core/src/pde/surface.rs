use std::io::Write;

use crate::error::{Result, XvaError};
use crate::pde::grid::GridSpec;
use crate::scalar::Scalar;

/// Values on a [`GridSpec`] lattice, one time slice per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

/// Value and log-spot derivative at a point of the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T> {
    pub value: T,
    pub dx: T,
}

impl<T: Scalar> Surface<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self {
            grid,
            values: vec![T::zero(); (grid.n_t + 1) * grid.n_x],
        }
    }

    /// Builds a surface from `n_t + 1` slices ordered by time index.
    pub fn from_slices(grid: GridSpec<T>, slices: Vec<Vec<T>>) -> Result<Self> {
        if slices.len() != grid.n_t + 1 || slices.iter().any(|s| s.len() != grid.n_x) {
            return Err(XvaError::InvalidGrid("slice shape does not match grid".into()));
        }
        let values = slices.into_iter().flatten().collect::<Vec<_>>();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(XvaError::InvalidGrid("surface contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn slice(&self, n: usize) -> &[T] {
        let nx = self.grid.n_x;
        &self.values[n * nx..(n + 1) * nx]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [T] {
        let nx = self.grid.n_x;
        &mut self.values[n * nx..(n + 1) * nx]
    }

    pub fn value(&self, n: usize, m: usize) -> T {
        self.values[n * self.grid.n_x + m]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max_abs_diff(&self, other: &Surface<T>) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    }

    /// Value and `d/dx` on slice `n` at log-spot `x`, from the parabola
    /// through the three nodes around `x`. On a node this is the central
    /// difference; at a boundary node it is the second-order one-sided one.
    pub fn sample_slice(&self, n: usize, x: T) -> Sample<T> {
        let g = &self.grid;
        let m = g.nearest_node(x).clamp(1, g.n_x - 2);
        let u = (x - g.x(m)) / g.dx();
        let w = self.slice(n);
        let half = T::lit(0.5);
        let slope = (w[m + 1] - w[m - 1]) * half;
        let curv = w[m + 1] - w[m] - w[m] + w[m - 1];
        Sample {
            value: w[m] + u * slope + u * u * curv * half,
            dx: (slope + u * curv) / g.dx(),
        }
    }

    /// Sample at an arbitrary `(t, x)`, linear in time between slices.
    pub fn sample(&self, t: T, x: T) -> Result<Sample<T>> {
        let g = &self.grid;
        if !g.contains(t, x) {
            return Err(XvaError::OutOfGrid {
                t: t.as_f64(),
                s: x.exp().as_f64(),
            });
        }
        let pos = (t / g.dt()).max(T::zero());
        let n = pos.floor().to_usize().unwrap_or(0).min(g.n_t);
        let frac = pos - T::from_usize(n).unwrap();
        let lo = self.sample_slice(n, x);
        if n == g.n_t || frac <= T::zero() {
            return Ok(lo);
        }
        let hi = self.sample_slice(n + 1, x);
        Ok(Sample {
            value: lo.value + frac * (hi.value - lo.value),
            dx: lo.dx + frac * (hi.dx - lo.dx),
        })
    }

    /// Writes `t,x,value` rows, time-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,x,value")?;
        for n in 0..=self.grid.n_t {
            let t = self.grid.t(n);
            for (m, v) in self.slice(n).iter().enumerate() {
                writeln!(out, "{},{},{}", t, self.grid.x(m), v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_surface() -> Surface<f64> {
        let g = GridSpec::new(-1.0, 1.0, 21, 4, 1.0).unwrap();
        let slices = (0..=4)
            .map(|n| {
                let t = g.t(n);
                g.xs().iter().map(|x| t + 2.0 * x + x * x).collect()
            })
            .collect();
        Surface::from_slices(g, slices).unwrap()
    }

    #[test]
    fn quadratics_are_sampled_exactly() {
        let s = quadratic_surface();
        for &(t, x) in &[(0.0, 0.0), (0.3, 0.137), (1.0, -1.0), (0.5, 1.0), (0.99, -0.77)] {
            let p = s.sample(t, x).unwrap();
            assert!((p.value - (t + 2.0 * x + x * x)).abs() < 1e-13, "{t} {x}");
            assert!((p.dx - (2.0 + 2.0 * x)).abs() < 1e-12, "{t} {x}");
        }
    }

    #[test]
    fn outside_points_are_rejected() {
        let s = quadratic_surface();
        assert!(matches!(s.sample(0.0, 1.5), Err(XvaError::OutOfGrid { .. })));
        assert!(matches!(s.sample(1.2, 0.0), Err(XvaError::OutOfGrid { .. })));
        assert!(matches!(s.sample(-0.1, 0.0), Err(XvaError::OutOfGrid { .. })));
    }

    #[test]
    fn csv_layout() {
        let g = GridSpec::new(0.0, 1.0, 4, 1, 1.0).unwrap();
        let s = Surface::zeros(g);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 4);
        assert_eq!(lines[0], "t,x,value");
        assert_eq!(lines[1], "0,0,0");
        assert_eq!(lines[8], "1,1,0");
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let g = GridSpec::new(0.0, 1.0, 4, 1, 1.0).unwrap();
        assert!(Surface::from_slices(g, vec![vec![0.0; 4]]).is_err());
        assert!(Surface::from_slices(g, vec![vec![0.0; 4], vec![f64::NAN; 4]]).is_err());
    }
}
