//! Flat-torus grids, periodic finite-difference operators, quadrature and
//! polar sampling.
//!
//! Node `(i, j)` sits at `(i * hx, j * hy)` and has linear index `j * nx + i`
//! (row-major, x fastest). Per-node vector data of `m` components is stored
//! contiguously: component `c` of node `k` lives at `k * m + c`. Jacobians use
//! the layout `k * 2 * m + d * m + c` for direction `d` (0 = x, 1 = y).
//!
//! A circle domain is the degenerate grid `ny = 1`, `Ly = 1`: every
//! y-difference vanishes and the cell measure reduces to the line element.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }
}

/// Serialized for experiment records only; grids are built through the
/// validating constructors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainGrid<T> {
    nx: usize,
    ny: usize,
    lx: T,
    ly: T,
    hx: T,
    hy: T,
}

/// Minimum node count per side on a 2-D torus.
pub const MIN_NODES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct PolarSample<T> {
    pub value: Vec<T>,
    pub radial: Vec<T>,
    pub tangential: Vec<T>,
    pub r: T,
    pub theta: T,
}

impl<T: Scalar> PolarSample<T> {
    /// `|u_r|^2 + r^-2 |u_theta|^2`.
    pub fn gradient_norm_sq(&self) -> T {
        let rr = dot(&self.radial, &self.radial);
        let tt = dot(&self.tangential, &self.tangential);
        rr + tt / (self.r * self.r)
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (x, y) in a.iter().zip(b) {
        s += *x * *y;
    }
    s
}

impl<T: Scalar> DomainGrid<T> {
    /// Periodic grid on `[0, lx) x [0, ly)`.
    pub fn torus(nx: usize, ny: usize, lx: T, ly: T) -> Result<Self> {
        if nx < MIN_NODES || ny < MIN_NODES {
            return Err(Error::GridTooSmall { nx, ny });
        }
        if !(lx > T::zero() && ly > T::zero()) || !lx.is_finite() || !ly.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "side lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(DomainGrid {
            nx,
            ny,
            lx,
            ly,
            hx: lx / T::from_usize_lossy(nx),
            hy: ly / T::from_usize_lossy(ny),
        })
    }

    /// `n x n` grid on the unit torus.
    pub fn unit_torus(n: usize) -> Result<Self> {
        Self::torus(n, n, T::one(), T::one())
    }

    /// Periodic 1-D domain of the given length.
    pub fn circle(nx: usize, length: T) -> Result<Self> {
        if nx < MIN_NODES {
            return Err(Error::GridTooSmall { nx, ny: 1 });
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "circle length must be positive, got {length}"
            )));
        }
        Ok(DomainGrid {
            nx,
            ny: 1,
            lx: length,
            ly: T::one(),
            hx: length / T::from_usize_lossy(nx),
            hy: T::one(),
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> T {
        self.lx
    }
    pub fn ly(&self) -> T {
        self.ly
    }
    pub fn hx(&self) -> T {
        self.hx
    }
    pub fn hy(&self) -> T {
        self.hy
    }
    pub fn is_circle(&self) -> bool {
        self.ny == 1
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid spacing used for resolution floors.
    pub fn h(&self) -> T {
        if self.is_circle() {
            self.hx
        } else {
            self.hx.min(self.hy)
        }
    }

    /// Quadrature weight of one node.
    pub fn cell(&self) -> T {
        self.hx * self.hy
    }

    pub fn volume(&self) -> T {
        self.lx * self.ly
    }

    /// Largest admissible ball radius.
    pub fn max_radius(&self) -> T {
        if self.is_circle() {
            self.lx / T::lit(2.0)
        } else {
            self.lx.min(self.ly) / T::lit(2.0)
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn position(&self, k: usize) -> Point<T> {
        let i = k % self.nx;
        let j = k / self.nx;
        Point::new(T::from_usize_lossy(i) * self.hx, T::from_usize_lossy(j) * self.hy)
    }

    pub fn center(&self) -> Point<T> {
        Point::new(self.lx / T::lit(2.0), self.ly / T::lit(2.0))
    }

    /// Signed periodic offset wrapped into `[-L/2, L/2]`.
    #[inline]
    pub fn wrap(d: T, len: T) -> T {
        let mut d = d - (d / len).round() * len;
        let half = len / T::lit(2.0);
        if d > half {
            d -= len;
        } else if d < -half {
            d += len;
        }
        d
    }

    /// Periodic offset `q - p`.
    pub fn offset(&self, p: Point<T>, q: Point<T>) -> (T, T) {
        let dx = Self::wrap(q.x - p.x, self.lx);
        let dy = if self.is_circle() {
            T::zero()
        } else {
            Self::wrap(q.y - p.y, self.ly)
        };
        (dx, dy)
    }

    pub fn distance(&self, p: Point<T>, q: Point<T>) -> T {
        let (dx, dy) = self.offset(p, q);
        dx.hypot(dy)
    }

    fn check_len(&self, data: &[T], m: usize) -> Result<()> {
        let expected = self.len() * m;
        if data.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(())
    }

    /// Calls `f(k, [east, west, north, south])` for every node in index order.
    #[inline]
    fn for_each_stencil(&self, mut f: impl FnMut(usize, [usize; 4])) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            let row = j * nx;
            let north = if j + 1 == ny { 0 } else { row + nx };
            let south = if j == 0 { (ny - 1) * nx } else { row - nx };
            for i in 0..nx {
                let e = if i + 1 == nx { row } else { row + i + 1 };
                let w = if i == 0 { row + nx - 1 } else { row + i - 1 };
                f(row + i, [e, w, north + i, south + i]);
            }
        }
    }

    /// Second-order central differences `(d_x u, d_y u)` per node.
    pub fn jacobian(&self, u: &[T], m: usize) -> Vec<T> {
        assert_eq!(u.len(), self.len() * m, "field length does not match grid");
        let mut out = vec![T::zero(); self.len() * 2 * m];
        let ax = T::one() / (T::lit(2.0) * self.hx);
        let ay = T::one() / (T::lit(2.0) * self.hy);
        self.for_each_stencil(|k, [e, w, n, s]| {
            let base = k * 2 * m;
            for c in 0..m {
                out[base + c] = (u[e * m + c] - u[w * m + c]) * ax;
                out[base + m + c] = (u[n * m + c] - u[s * m + c]) * ay;
            }
        });
        out
    }

    /// Five-point periodic Laplacian.
    pub fn laplacian(&self, u: &[T], m: usize) -> Vec<T> {
        assert_eq!(u.len(), self.len() * m, "field length does not match grid");
        let mut out = vec![T::zero(); self.len() * m];
        let ix = T::one() / (self.hx * self.hx);
        let iy = T::one() / (self.hy * self.hy);
        self.for_each_stencil(|k, [e, w, n, s]| {
            for c in 0..m {
                let uc = u[k * m + c];
                let dx = (u[e * m + c] - uc) + (u[w * m + c] - uc);
                let dy = (u[n * m + c] - uc) + (u[s * m + c] - uc);
                out[k * m + c] = dx * ix + dy * iy;
            }
        });
        out
    }

    pub fn bilaplacian(&self, u: &[T], m: usize) -> Vec<T> {
        let lap = self.laplacian(u, m);
        self.laplacian(&lap, m)
    }

    /// `div(w grad u)` with face weights `(w_k + w_nb) / 2`.
    ///
    /// With `w = 1` this reproduces [`Self::laplacian`] bit for bit.
    pub fn weighted_divergence(&self, u: &[T], m: usize, weight: &[T]) -> Vec<T> {
        assert_eq!(u.len(), self.len() * m, "field length does not match grid");
        assert_eq!(weight.len(), self.len(), "weight length does not match grid");
        let mut out = vec![T::zero(); self.len() * m];
        let ix = T::one() / (self.hx * self.hx);
        let iy = T::one() / (self.hy * self.hy);
        let half = T::lit(0.5);
        self.for_each_stencil(|k, [e, w, n, s]| {
            let wk = weight[k];
            let we = half * (wk + weight[e]);
            let ww = half * (wk + weight[w]);
            let wn = half * (wk + weight[n]);
            let ws = half * (wk + weight[s]);
            for c in 0..m {
                let uc = u[k * m + c];
                let dx = we * (u[e * m + c] - uc) + ww * (u[w * m + c] - uc);
                let dy = wn * (u[n * m + c] - uc) + ws * (u[s * m + c] - uc);
                out[k * m + c] = dx * ix + dy * iy;
            }
        });
        out
    }

    /// Nodal Dirichlet energy density from face differences:
    /// `e_k = 1/2 sum_faces(k) |D u|^2`.
    ///
    /// Summed over nodes this is exactly `-<u, laplacian(u)>`, which makes the
    /// discrete first variations exact.
    pub fn energy_density(&self, u: &[T], m: usize) -> Vec<T> {
        assert_eq!(u.len(), self.len() * m, "field length does not match grid");
        let n = self.len();
        let ix = T::one() / (self.hx * self.hx);
        let iy = T::one() / (self.hy * self.hy);
        // squared forward differences on east and north faces
        let mut fx = vec![T::zero(); n];
        let mut fy = vec![T::zero(); n];
        self.for_each_stencil(|k, [e, _, nn, _]| {
            let mut sx = T::zero();
            let mut sy = T::zero();
            for c in 0..m {
                let dx = u[e * m + c] - u[k * m + c];
                let dy = u[nn * m + c] - u[k * m + c];
                sx += dx * dx;
                sy += dy * dy;
            }
            fx[k] = sx * ix;
            fy[k] = sy * iy;
        });
        let half = T::lit(0.5);
        let mut out = vec![T::zero(); n];
        self.for_each_stencil(|k, [_, w, _, s]| {
            out[k] = half * (fx[k] + fx[w]) + half * (fy[k] + fy[s]);
        });
        out
    }

    /// `sum_k f_k * cell`: the periodic trapezoid rule.
    pub fn integrate(&self, f: &[T]) -> T {
        assert_eq!(f.len(), self.len(), "scalar field length does not match grid");
        let mut s = T::zero();
        for v in f {
            s += *v;
        }
        s * self.cell()
    }

    /// Membership weight of a node at distance `d` in the ball of radius `r`:
    /// a linear ramp of width `h` centred on the boundary circle.
    #[inline]
    pub fn ball_weight(&self, d: T, r: T) -> T {
        let t = (r - d) / self.h() + T::lit(0.5);
        t.max(T::zero()).min(T::one())
    }

    fn check_radius(&self, r: T) -> Result<()> {
        let max = self.max_radius();
        if !(r > T::zero() && r <= max) {
            return Err(Error::RadiusOutOfRange {
                radius: r.as_f64(),
                min: 0.0,
                max: max.as_f64(),
            });
        }
        Ok(())
    }

    /// Sorted indices along one axis whose periodic offset from `c` can be
    /// within `reach`.
    fn window_axis(c: T, reach: T, h: T, n: usize) -> Vec<usize> {
        let span = (reach / h).ceil().to_usize().unwrap_or(n) + 2;
        if 2 * span + 1 >= n {
            return (0..n).collect();
        }
        let ic = (c / h).round().to_i64().unwrap_or(0);
        let nn = n as i64;
        let mut idx: Vec<usize> = (-(span as i64)..=span as i64)
            .map(|t| (ic + t).rem_euclid(nn) as usize)
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    /// Visits nodes with nonzero membership in `B_r(center)` in ascending
    /// index order, passing `(k, weight)`.
    pub fn for_each_in_ball(&self, center: Point<T>, r: T, mut f: impl FnMut(usize, T)) {
        let reach = r + self.h();
        let cols = Self::window_axis(center.x, reach, self.hx, self.nx);
        let rows = if self.is_circle() {
            vec![0]
        } else {
            Self::window_axis(center.y, reach, self.hy, self.ny)
        };
        for &j in &rows {
            for &i in &cols {
                let k = self.index(i, j);
                let d = self.distance(center, self.position(k));
                let w = self.ball_weight(d, r);
                if w > T::zero() {
                    f(k, w);
                }
            }
        }
    }

    /// `integral over B_r(center)` of a nodal scalar field, with weighted
    /// membership and periodic distance.
    pub fn ball_integral(&self, f: &[T], center: Point<T>, r: T) -> Result<T> {
        self.check_len(f, 1)?;
        self.check_radius(r)?;
        let mut s = T::zero();
        self.for_each_in_ball(center, r, |k, w| s += w * f[k]);
        Ok(s * self.cell())
    }

    /// Per-node membership weights of `B_r(center)`.
    pub fn ball_weights(&self, center: Point<T>, r: T) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        self.for_each_in_ball(center, r, |k, w| out[k] = w);
        out
    }

    /// Bilinear periodic interpolation of `m`-component nodal data, lower-left
    /// cell convention.
    pub fn interpolate(&self, data: &[T], m: usize, p: Point<T>, out: &mut [T]) {
        let fx = p.x / self.hx;
        let fy = p.y / self.hy;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let nx = self.nx as i64;
        let ny = self.ny as i64;
        let i0 = x0.to_i64().unwrap_or(0).rem_euclid(nx) as usize;
        let j0 = y0.to_i64().unwrap_or(0).rem_euclid(ny) as usize;
        let i1 = (i0 + 1) % self.nx;
        let j1 = (j0 + 1) % self.ny;
        let k00 = self.index(i0, j0);
        let k10 = self.index(i1, j0);
        let k01 = self.index(i0, j1);
        let k11 = self.index(i1, j1);
        let one = T::one();
        let w00 = (one - tx) * (one - ty);
        let w10 = tx * (one - ty);
        let w01 = (one - tx) * ty;
        let w11 = tx * ty;
        for c in 0..m {
            out[c] =
                w00 * data[k00 * m + c] + w10 * data[k10 * m + c] + w01 * data[k01 * m + c] + w11 * data[k11 * m + c];
        }
    }

    /// Smallest radius at which circle sampling is trusted.
    pub fn interpolation_floor(&self) -> T {
        T::lit(2.0) * self.h()
    }

    /// Number of angular samples on a circle of radius `r`.
    pub fn circle_samples(&self, r: T) -> usize {
        let n = (T::TAU() * r / self.h()).ceil().to_usize().unwrap_or(16);
        n.max(16)
    }

    /// Samples value, `u_r` and `u_theta` at `center + r (cos theta, sin theta)`
    /// from the field `u` and its central-difference Jacobian `jac`.
    pub fn polar_sample(
        &self,
        u: &[T],
        jac: &[T],
        m: usize,
        center: Point<T>,
        r: T,
        theta: T,
    ) -> Result<PolarSample<T>> {
        let floor = self.interpolation_floor();
        if r <= floor {
            return Err(Error::BelowInterpolationFloor {
                radius: r.as_f64(),
                floor: floor.as_f64(),
            });
        }
        let (s, c) = theta.sin_cos();
        let p = Point::new(center.x + r * c, center.y + r * s);
        let mut value = vec![T::zero(); m];
        let mut j = vec![T::zero(); 2 * m];
        self.interpolate(u, m, p, &mut value);
        self.interpolate(jac, 2 * m, p, &mut j);
        let mut radial = vec![T::zero(); m];
        let mut tangential = vec![T::zero(); m];
        for k in 0..m {
            radial[k] = j[k] * c + j[m + k] * s;
            tangential[k] = r * (-j[k] * s + j[m + k] * c);
        }
        Ok(PolarSample {
            value,
            radial,
            tangential,
            r,
            theta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scalar_field(g: &DomainGrid<f64>, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..g.len())
            .map(|k| {
                let p = g.position(k);
                f(p.x, p.y)
            })
            .collect()
    }

    #[test]
    fn grid_invariants() {
        assert!(DomainGrid::<f64>::unit_torus(15).is_err());
        let g = DomainGrid::<f64>::torus(32, 16, 2.0, 1.0).unwrap();
        assert_eq!(g.volume(), 2.0);
        assert_eq!(g.hx(), 1.0 / 16.0);
        let p = Point::new(0.1, 0.1);
        let q = Point::new(1.9, 0.95);
        assert!((g.distance(p, q) - g.distance(q, p)).abs() < 1e-15);
        let (dx, dy) = g.offset(p, q);
        assert!(dx.abs() <= 1.0 && dy.abs() <= 0.5);
        assert!((dx + 0.2).abs() < 1e-12 && (dy + 0.15).abs() < 1e-12);
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let g = DomainGrid::<f64>::unit_torus(16).unwrap();
        let u = vec![0.3; g.len() * 3];
        assert!(g.jacobian(&u, 3).iter().all(|v| *v == 0.0));
        assert!(g.laplacian(&u, 3).iter().all(|v| *v == 0.0));
        assert!(g.energy_density(&u, 3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn central_difference_is_second_order() {
        let err = |n: usize| {
            let g = DomainGrid::<f64>::unit_torus(n).unwrap();
            let u = scalar_field(&g, |x, _| (2.0 * PI * x).sin());
            let j = g.jacobian(&u, 1);
            (0..g.len())
                .map(|k| {
                    let x = g.position(k).x;
                    (j[2 * k] - 2.0 * PI * (2.0 * PI * x).cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(32), err(64));
        let ratio = e1 / e2;
        assert!(ratio > 3.9 && ratio < 4.1, "ratio {ratio}");
    }

    #[test]
    fn laplacian_and_bilaplacian_of_eigenfunction() {
        let g = DomainGrid::<f64>::unit_torus(128).unwrap();
        let u = scalar_field(&g, |x, _| (2.0 * PI * x).sin());
        let lap = g.laplacian(&u, 1);
        let bil = g.bilaplacian(&u, 1);
        let k2 = 4.0 * PI * PI;
        for k in 0..g.len() {
            assert!((lap[k] + k2 * u[k]).abs() < 1e-2 * k2);
            assert!((bil[k] - k2 * k2 * u[k]).abs() < 2e-2 * k2 * k2);
        }
    }

    #[test]
    fn integrate_exact_cases() {
        let g = DomainGrid::<f64>::torus(16, 20, 1.5, 2.0).unwrap();
        let ones = vec![1.0; g.len()];
        assert!((g.integrate(&ones) - 3.0).abs() < 1e-14);
        let g = DomainGrid::<f64>::unit_torus(16).unwrap();
        let f = scalar_field(&g, |x, _| (2.0 * PI * x).sin().powi(2));
        assert!((g.integrate(&f) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn weighted_divergence_with_unit_weight_is_laplacian() {
        let g = DomainGrid::<f64>::unit_torus(24).unwrap();
        let u = scalar_field(&g, |x, y| (2.0 * PI * x).sin() * (4.0 * PI * y).cos() + x);
        let w = vec![1.0; g.len()];
        assert_eq!(g.weighted_divergence(&u, 1, &w), g.laplacian(&u, 1));
    }

    #[test]
    fn energy_density_sums_to_minus_u_dot_laplacian() {
        let g = DomainGrid::<f64>::unit_torus(32).unwrap();
        let u = scalar_field(&g, |x, y| (2.0 * PI * x).sin() + (2.0 * PI * (x + 2.0 * y)).cos());
        let e = g.integrate(&g.energy_density(&u, 1));
        let lap = g.laplacian(&u, 1);
        let pairing: f64 = -u.iter().zip(&lap).map(|(a, b)| a * b).sum::<f64>() * g.cell();
        assert!((e - pairing).abs() < 1e-10 * e.abs());
    }

    #[test]
    fn ball_energy_radius_checks_and_monotonicity() {
        let g = DomainGrid::<f64>::unit_torus(32).unwrap();
        let f = scalar_field(&g, |x, y| 1.0 + (2.0 * PI * x).sin() * (2.0 * PI * y).sin());
        let c = Point::new(0.3, 0.7);
        assert!(g.ball_integral(&f, c, 0.0).is_err());
        assert!(g.ball_integral(&f, c, 0.51).is_err());
        let mut last = 0.0;
        for t in 1..=50 {
            let r = 0.01 * t as f64;
            let v = g.ball_integral(&f, c, r).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn circle_domain_degenerates() {
        let g = DomainGrid::<f64>::circle(64, 2.0 * PI).unwrap();
        assert!(g.is_circle());
        assert!((g.volume() - 2.0 * PI).abs() < 1e-15);
        let u = scalar_field(&g, |x, _| x.sin());
        let j = g.jacobian(&u, 1);
        for k in 0..g.len() {
            assert_eq!(j[2 * k + 1], 0.0);
        }
    }

    #[test]
    fn polar_sample_rejects_small_radius() {
        let g = DomainGrid::<f64>::unit_torus(32).unwrap();
        let u = vec![1.0; g.len()];
        let j = g.jacobian(&u, 1);
        let c = g.center();
        assert!(g.polar_sample(&u, &j, 1, c, g.h(), 0.0).is_err());
        let s = g.polar_sample(&u, &j, 1, c, 0.2, 0.3).unwrap();
        assert_eq!(s.radial[0], 0.0);
        assert_eq!(s.tangential[0], 0.0);
    }
}
