//! Polar quadrature around a point: circle balances, dyadic annulus profiles
//! and the Hopf-type inequalities for both regularizations.
//!
//! Circle integrals `∮ ... ds` are with respect to arc length and use
//! `grid.circle_samples(r)` equally spaced angles; radial integrals use
//! midpoints in `log r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::MapField;
use crate::grid::{dot, DomainGrid, Point, PolarSample};
use crate::scalar::Scalar;
use crate::table::{float, Table};

use super::stress::third_derivative_norm;

fn check_circle<T: Scalar>(grid: &DomainGrid<T>, r: T) -> Result<()> {
    let floor = grid.interpolation_floor();
    if !(r > floor) {
        return Err(Error::BelowInterpolationFloor {
            radius: r.as_f64(),
            floor: floor.as_f64(),
        });
    }
    if r > grid.max_radius() {
        return Err(Error::RadiusOutOfRange {
            radius: r.as_f64(),
            min: floor.as_f64(),
            max: grid.max_radius().as_f64(),
        });
    }
    Ok(())
}

/// `∮_{∂B_r(center)} f(sample) ds` for `K` integrands at once.
fn circle_integral<T: Scalar, const K: usize>(
    grid: &DomainGrid<T>,
    u: &[T],
    jac: &[T],
    m: usize,
    center: Point<T>,
    r: T,
    mut f: impl FnMut(&PolarSample<T>, Point<T>) -> [T; K],
) -> Result<[T; K]> {
    let n = grid.circle_samples(r);
    let dtheta = T::TAU() / T::from_usize_lossy(n);
    let mut acc = [T::zero(); K];
    for j in 0..n {
        let theta = (T::from_usize_lossy(j) + T::lit(0.5)) * dtheta;
        let s = grid.polar_sample(u, jac, m, center, r, theta)?;
        let (sn, cs) = theta.sin_cos();
        let p = Point::new(center.x + r * cs, center.y + r * sn);
        let v = f(&s, p);
        for q in 0..K {
            acc[q] += v[q];
        }
    }
    let ds = r * dtheta;
    Ok(acc.map(|a| a * ds))
}

fn interpolate_scalar<T: Scalar>(grid: &DomainGrid<T>, data: &[T], p: Point<T>) -> T {
    let mut out = [T::zero()];
    grid.interpolate(data, 1, p, &mut out);
    out[0]
}

/// Radial versus tangential energy on one circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleBalance<T> {
    pub r: T,
    /// `∮ |u_r|² ds`
    pub radial: T,
    /// `∮ r⁻² |u_θ|² ds`
    pub tangential: T,
}

impl<T: Scalar> CircleBalance<T> {
    /// `|radial - tangential| / (radial + tangential)`, zero on flat circles.
    pub fn imbalance(&self) -> T {
        let s = self.radial + self.tangential;
        if s > T::zero() {
            (self.radial - self.tangential).abs() / s
        } else {
            T::zero()
        }
    }
}

pub fn circle_balance<T: Scalar>(u: &MapField<T>, center: Point<T>, r: T) -> Result<CircleBalance<T>> {
    check_circle(u.grid(), r)?;
    circle_balance_with(u.grid(), u.values(), &u.jacobian(), u.m(), center, r)
}

fn circle_balance_with<T: Scalar>(
    grid: &DomainGrid<T>,
    u: &[T],
    jac: &[T],
    m: usize,
    center: Point<T>,
    r: T,
) -> Result<CircleBalance<T>> {
    let r2 = r * r;
    let [radial, tangential] = circle_integral(grid, u, jac, m, center, r, |s, _| {
        [dot(&s.radial, &s.radial), dot(&s.tangential, &s.tangential) / r2]
    })?;
    Ok(CircleBalance { r, radial, tangential })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRow<T> {
    pub inner: T,
    pub outer: T,
    pub total: T,
    /// `∫∫ r |u_r|² dr dθ`
    pub radial: T,
    /// `∫∫ r⁻¹ |u_θ|² dr dθ`
    pub tangential: T,
    /// Largest circle imbalance among the quadrature radii.
    pub hopf_imbalance: T,
}

/// Dyadic annuli `A(2^j r1, 2^(j+1) r1)` covering `[r1, r2]`; the last one is
/// cut at `r2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusProfile<T> {
    pub center: Point<T>,
    pub r1: T,
    pub r2: T,
    pub rows: Vec<AnnulusRow<T>>,
    pub neck_total: T,
    pub neck_radial: T,
    pub neck_tangential: T,
}

impl<T: Scalar> AnnulusProfile<T> {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["inner", "outer", "total", "radial", "tangential", "hopf_imbalance"]);
        for r in &self.rows {
            t.push(vec![
                float(r.inner),
                float(r.outer),
                float(r.total),
                float(r.radial),
                float(r.tangential),
                float(r.hopf_imbalance),
            ]);
        }
        t
    }
}

pub fn annulus_profile<T: Scalar>(
    u: &MapField<T>,
    center: Point<T>,
    r1: T,
    r2: T,
    radii_per_level: usize,
) -> Result<AnnulusProfile<T>> {
    let grid = u.grid();
    check_circle(grid, r1)?;
    if !(r2 > r1) || r2 > grid.max_radius() {
        return Err(Error::RadiusOutOfRange {
            radius: r2.as_f64(),
            min: r1.as_f64(),
            max: grid.max_radius().as_f64(),
        });
    }
    if radii_per_level < 8 {
        return Err(Error::InvalidParameter(
            "annulus profiles need >= 8 radii per level".into(),
        ));
    }
    let jac = u.jacobian();
    let two = T::lit(2.0);
    let mut rows = Vec::new();
    let mut inner = r1;
    while inner < r2 {
        let outer = (two * inner).min(r2);
        let levels = (outer / inner).log2();
        let n = (T::from_usize_lossy(radii_per_level) * levels)
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        let ds = (outer / inner).ln() / T::from_usize_lossy(n);
        let (mut radial, mut tangential, mut worst) = (T::zero(), T::zero(), T::zero());
        for q in 0..n {
            let r = inner * ((T::from_usize_lossy(q) + T::lit(0.5)) * ds).exp();
            let c = circle_balance_with(grid, u.values(), &jac, u.m(), center, r)?;
            // dr = r d(log r)
            radial += c.radial * r * ds;
            tangential += c.tangential * r * ds;
            worst = worst.max(c.imbalance());
        }
        rows.push(AnnulusRow {
            inner,
            outer,
            total: radial + tangential,
            radial,
            tangential,
            hopf_imbalance: worst,
        });
        inner = outer;
    }
    let neck_radial = rows.iter().fold(T::zero(), |s, r| s + r.radial);
    let neck_tangential = rows.iter().fold(T::zero(), |s, r| s + r.tangential);
    Ok(AnnulusProfile {
        center,
        r1,
        r2,
        rows,
        neck_total: neck_radial + neck_tangential,
        neck_radial,
        neck_tangential,
    })
}

/// Both sides of the α Hopf estimate on `∂B_r`, with the unspecified
/// constant set to 1:
/// `lhs = ∮ w |u_r|²`, `rhs_circle = ∮ (1 + r⁻²|u_θ|²) w`,
/// `rhs_ball = (α-1)/r ∫_{B_r} (1+|∇u|²)^α`, `w = (1+|∇u|²)^(α-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfBalance<T> {
    pub r: T,
    pub lhs: T,
    pub rhs_circle: T,
    pub rhs_ball: T,
}

impl<T: Scalar> HopfBalance<T> {
    /// Smallest constant making the inequality hold on this circle.
    pub fn fitted_constant(&self) -> T {
        self.lhs / (self.rhs_circle + self.rhs_ball)
    }
}

pub fn hopf_balance_alpha<T: Scalar>(u: &MapField<T>, center: Point<T>, r: T, alpha: T) -> Result<HopfBalance<T>> {
    let grid = u.grid();
    check_circle(grid, r)?;
    let jac = u.jacobian();
    let a1 = alpha - T::one();
    let r2 = r * r;
    let [lhs, rhs_circle] = circle_integral(grid, u.values(), &jac, u.m(), center, r, |s, _| {
        let w = (T::one() + s.gradient_norm_sq()).powf(a1);
        let tan = dot(&s.tangential, &s.tangential) / r2;
        [w * dot(&s.radial, &s.radial), (T::one() + tan) * w]
    })?;
    let dens: Vec<T> = u
        .energy_density()
        .into_iter()
        .map(|e| (T::one() + e).powf(alpha))
        .collect();
    let rhs_ball = a1 / r * grid.ball_integral(&dens, center, r)?;
    Ok(HopfBalance {
        r,
        lhs,
        rhs_circle,
        rhs_ball,
    })
}

/// Terms of the biharmonic Hopf estimate on `∂B_r`:
/// `lhs = ∮ |u_r|²`, `tangential = r⁻² ∮ |u_θ|²`,
/// `ball = ε/r ∫_{B_r} |Δu|²`, `circle = ε ∮ (|Δu|² + |∇u||∇³u|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiharmonicHopfBalance<T> {
    pub r: T,
    pub lhs: T,
    pub tangential: T,
    pub ball: T,
    pub circle: T,
}

impl<T: Scalar> BiharmonicHopfBalance<T> {
    /// Smallest `c` with `lhs <= tangential + c (ball + circle)`; zero when
    /// the tangential term alone suffices.
    pub fn fitted_constant(&self) -> T {
        let excess = self.lhs - self.tangential;
        if excess <= T::zero() {
            T::zero()
        } else {
            excess / (self.ball + self.circle)
        }
    }
}

pub fn hopf_balance_biharmonic<T: Scalar>(
    u: &MapField<T>,
    center: Point<T>,
    r: T,
    eps: T,
) -> Result<BiharmonicHopfBalance<T>> {
    let grid = u.grid();
    check_circle(grid, r)?;
    let m = u.m();
    let jac = u.jacobian();
    let lap = u.laplacian();
    let lap2: Vec<T> = lap.chunks(m).map(|l| dot(l, l)).collect();
    let d3 = third_derivative_norm(u);
    let r2 = r * r;
    let [lhs, tan, circ] = circle_integral(grid, u.values(), &jac, m, center, r, |s, p| {
        let grad = s.gradient_norm_sq().sqrt();
        let l2 = interpolate_scalar(grid, &lap2, p);
        let t3 = interpolate_scalar(grid, &d3, p);
        [
            dot(&s.radial, &s.radial),
            dot(&s.tangential, &s.tangential) / r2,
            l2 + grad * t3,
        ]
    })?;
    let ball = eps / r * grid.ball_integral(&lap2, center, r)?;
    Ok(BiharmonicHopfBalance {
        r,
        lhs,
        tangential: tan,
        ball,
        circle: eps * circ,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;
    use crate::target::TargetManifold;

    #[test]
    fn constant_map_balances() {
        let g = DomainGrid::<f64>::unit_torus(64).unwrap();
        let u = MapField::constant(g, TargetManifold::sphere(2).unwrap(), &[0.0, 1.0, 0.0]).unwrap();
        let c = Point::new(0.5, 0.5);
        let h = hopf_balance_alpha(&u, c, 0.1, 1.2).unwrap();
        assert_eq!(h.lhs, 0.0);
        assert!((h.rhs_circle - std::f64::consts::TAU * 0.1).abs() < 1e-14);
        let area = u.grid().ball_integral(&vec![1.0; 64 * 64], c, 0.1).unwrap();
        assert!((h.rhs_ball - 2.0 * area).abs() < 1e-14);
        let b = hopf_balance_biharmonic(&u, c, 0.1, 0.01).unwrap();
        assert_eq!((b.lhs, b.tangential, b.ball, b.circle), (0.0, 0.0, 0.0, 0.0));
        let p = annulus_profile(&u, c, 0.05, 0.2, 8).unwrap();
        assert_eq!(p.rows.len(), 2);
        assert!(p.rows.iter().all(|r| r.total == 0.0));
    }

    #[test]
    fn floor_and_range_errors() {
        let g = DomainGrid::<f64>::unit_torus(64).unwrap();
        let u = maps::planted_bubble(&g, Point::new(0.5, 0.5), 0.05).unwrap();
        let c = Point::new(0.5, 0.5);
        assert!(circle_balance(&u, c, 1.5 / 64.0).is_err());
        assert!(annulus_profile(&u, c, 0.01, 0.6, 8).is_err());
        assert!(annulus_profile(&u, c, 0.05, 0.2, 4).is_err());
    }

    #[test]
    fn profile_rows_are_dyadic_and_cover_the_range() {
        let g = DomainGrid::<f64>::unit_torus(64).unwrap();
        let u = maps::planted_bubble(&g, Point::new(0.5, 0.5), 0.05).unwrap();
        let p = annulus_profile(&u, Point::new(0.5, 0.5), 0.04, 0.25, 8).unwrap();
        assert_eq!(p.rows.first().unwrap().inner, 0.04);
        assert_eq!(p.rows.last().unwrap().outer, 0.25);
        for w in p.rows.windows(2) {
            assert_eq!(w[0].outer, w[1].inner);
        }
        for r in &p.rows {
            assert!((r.total - r.radial - r.tangential).abs() <= 1e-12 * r.total);
        }
    }
}
