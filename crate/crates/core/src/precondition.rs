//! Fourier-diagonal Sobolev metric `μ + λ + ε λ²` on periodic grids, where
//! `λ` is the symbol of minus the five-point Laplacian. Used to precondition
//! gradient steps of the fourth-order energies, whose plain gradient flow
//! stiffens like `ε/h⁴`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::DomainGrid;
use crate::scalar::Scalar;

pub struct SobolevMetric {
    nx: usize,
    ny: usize,
    symbol: Vec<f64>,
    row: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    col: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
}

impl SobolevMetric {
    /// `μ = 1/L²` with `L` the longer side, so the metric is scale-aware on
    /// the lowest modes and never singular.
    pub fn new<T: Scalar>(grid: &DomainGrid<T>, eps: T) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let hx = grid.hx().as_f64();
        let hy = grid.hy().as_f64();
        let long = grid
            .lx()
            .as_f64()
            .max(if grid.is_circle() { 0.0 } else { grid.ly().as_f64() });
        let mu = 1.0 / (long * long);
        let eps = eps.as_f64();
        let sin2 = |k: usize, n: usize| (std::f64::consts::PI * k as f64 / n as f64).sin().powi(2);
        let mut symbol = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let ly = if ny > 1 { 4.0 * sin2(j, ny) / (hy * hy) } else { 0.0 };
            for i in 0..nx {
                let lambda = 4.0 * sin2(i, nx) / (hx * hx) + ly;
                symbol.push(mu + lambda + eps * lambda * lambda);
            }
        }
        let mut planner = FftPlanner::new();
        SobolevMetric {
            nx,
            ny,
            symbol,
            row: (planner.plan_fft_forward(nx), planner.plan_fft_inverse(nx)),
            col: (planner.plan_fft_forward(ny), planner.plan_fft_inverse(ny)),
        }
    }

    /// Applies the metric (`inverse = false`) or its inverse to each of the
    /// `m` interleaved components of `v`.
    pub fn apply<T: Scalar>(&self, v: &mut [T], m: usize, inverse: bool) {
        let (nx, ny) = (self.nx, self.ny);
        let mut buf = vec![Complex64::default(); nx * ny];
        let mut column = vec![Complex64::default(); ny];
        let norm = 1.0 / (nx * ny) as f64;
        for c in 0..m {
            for (b, x) in buf.iter_mut().zip(v.iter().skip(c).step_by(m)) {
                *b = Complex64::new(x.as_f64(), 0.0);
            }
            self.row.0.process(&mut buf);
            self.columns(&mut buf, &mut column, &self.col.0);
            for (b, s) in buf.iter_mut().zip(&self.symbol) {
                *b *= if inverse { norm / s } else { norm * s };
            }
            self.columns(&mut buf, &mut column, &self.col.1);
            self.row.1.process(&mut buf);
            for (x, b) in v.iter_mut().skip(c).step_by(m).zip(&buf) {
                *x = T::lit(b.re);
            }
        }
    }

    fn columns(&self, buf: &mut [Complex64], column: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        if self.ny == 1 {
            return;
        }
        for i in 0..self.nx {
            for (j, c) in column.iter_mut().enumerate() {
                *c = buf[j * self.nx + i];
            }
            fft.process(column);
            for (j, c) in column.iter().enumerate() {
                buf[j * self.nx + i] = *c;
            }
        }
    }
}
