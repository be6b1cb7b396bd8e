//! Closed-form test maps and initializers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::MapField;
use crate::grid::{DomainGrid, Point};
use crate::scalar::{smoothstep, Scalar};
use crate::target::TargetManifold;

/// Radii of the radial blend that glues a bubble to the south pole: the
/// profile is the pure stereographic bubble for `r <= pure`, the constant
/// south pole for `r >= constant`, and a quintic blend of the polar angle in
/// between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlendRadii<T> {
    pub pure: T,
    pub constant: T,
}

impl<T: Scalar> Default for BlendRadii<T> {
    fn default() -> Self {
        BlendRadii {
            pure: T::lit(0.25),
            constant: T::lit(0.45),
        }
    }
}

fn s2() -> TargetManifold {
    TargetManifold::sphere(2).expect("S^2")
}

/// `u(x, y) = (cos 2πx/Lx, sin 2πx/Lx, 0)`; harmonic onto a great circle.
pub fn great_circle_wrap<T: Scalar>(grid: &DomainGrid<T>) -> Result<MapField<T>> {
    let lx = grid.lx();
    MapField::from_fn(grid.clone(), s2(), |p| {
        let a = T::TAU() * p.x / lx;
        vec![a.cos(), a.sin(), T::zero()]
    })
}

/// Polar angle (measured from the north pole) of the degree-one bubble of
/// scale `rho`, glued to the south pole by `blend`.
pub fn bubble_polar_angle<T: Scalar>(r: T, rho: T, blend: BlendRadii<T>) -> T {
    let phi = T::lit(2.0) * (r / rho).atan();
    if r <= blend.pure {
        return phi;
    }
    let t = (r - blend.pure) / (blend.constant - blend.pure);
    phi + smoothstep(t) * (T::PI() - phi)
}

/// The planar bubble `x ↦ (2ρx, ρ² − |x|²) / (ρ² + |x|²)` evaluated at offset
/// `(dx, dy)`, optionally glued by `blend`.
pub fn bubble_value<T: Scalar>(dx: T, dy: T, rho: T, blend: Option<BlendRadii<T>>) -> [T; 3] {
    let r = dx.hypot(dy);
    match blend {
        None => {
            let d = rho * rho + r * r;
            let two = T::lit(2.0);
            [two * rho * dx / d, two * rho * dy / d, (rho * rho - r * r) / d]
        }
        Some(b) => {
            let phi = bubble_polar_angle(r, rho, b);
            let (s, c) = phi.sin_cos();
            if r > T::zero() {
                [s * dx / r, s * dy / r, c]
            } else {
                [T::zero(), T::zero(), c]
            }
        }
    }
}

/// `|∇ω_ρ|^2 = 8ρ² / (ρ² + r²)²` for the planar bubble.
pub fn bubble_energy_density<T: Scalar>(r: T, rho: T) -> T {
    let d = rho * rho + r * r;
    T::lit(8.0) * rho * rho / (d * d)
}

/// Dirichlet energy of the planar bubble inside `B_r`: `8π r² / (ρ² + r²)`.
pub fn bubble_ball_energy<T: Scalar>(r: T, rho: T) -> T {
    T::lit(8.0) * T::PI() * r * r / (rho * rho + r * r)
}

/// Degree-one bubbles planted at `centers` (each with its own scale), every
/// one glued to the south pole by `blend`. Supports must be disjoint.
pub fn planted_bubbles<T: Scalar>(
    grid: &DomainGrid<T>,
    bubbles: &[(Point<T>, T)],
    blend: BlendRadii<T>,
) -> Result<MapField<T>> {
    if !(blend.pure > T::zero() && blend.constant > blend.pure) {
        return Err(Error::InvalidParameter(
            "blend radii must satisfy 0 < pure < constant".into(),
        ));
    }
    for (a, (ca, ra)) in bubbles.iter().enumerate() {
        if !(*ra > T::zero()) {
            return Err(Error::InvalidParameter("bubble scale must be positive".into()));
        }
        for (cb, _) in &bubbles[a + 1..] {
            if grid.distance(*ca, *cb) < T::lit(2.0) * blend.constant {
                return Err(Error::InvalidParameter("bubble supports overlap".into()));
            }
        }
    }
    MapField::from_fn(grid.clone(), s2(), |p| {
        for (c, rho) in bubbles {
            let (dx, dy) = grid.offset(*c, p);
            if dx.hypot(dy) < blend.constant {
                return bubble_value(dx, dy, *rho, Some(blend)).to_vec();
            }
        }
        vec![T::zero(), T::zero(), -T::one()]
    })
}

/// One bubble of scale `rho` at `center` with the default blend.
pub fn planted_bubble<T: Scalar>(grid: &DomainGrid<T>, center: Point<T>, rho: T) -> Result<MapField<T>> {
    planted_bubbles(grid, &[(center, rho)], BlendRadii::default())
}

/// Degree-one initializer: bubble of scale `rho` at the domain center, glued
/// to the south pole between radii 0.25 and 0.45 (scaled with the shorter
/// side of the domain).
pub fn degree_one_initializer<T: Scalar>(grid: &DomainGrid<T>, rho: T) -> Result<MapField<T>> {
    let side = grid.lx().min(grid.ly());
    let blend = BlendRadii {
        pure: T::lit(0.25) * side,
        constant: T::lit(0.45) * side,
    };
    planted_bubbles(grid, &[(grid.center(), rho)], blend)
}

/// Smooth random map: normalized sum of a fixed offset and random low Fourier
/// modes (`|k| <= modes` per axis). The coefficients depend only on the
/// seed, so the same continuum map is sampled on every grid.
pub fn smooth_random_field<T: Scalar>(
    grid: &DomainGrid<T>,
    target: &TargetManifold,
    modes: usize,
    seed: u64,
) -> Result<MapField<T>> {
    let m = target.m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offset: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let on = offset.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
    for v in offset.iter_mut() {
        *v *= 2.0 * (m as f64).sqrt() / on;
    }
    let kmax = modes as i64;
    let ky_range = if grid.is_circle() { 0..=0 } else { -kmax..=kmax };
    let mut terms: Vec<(i64, i64, Vec<f64>, Vec<f64>)> = Vec::new();
    for kx in -kmax..=kmax {
        for ky in ky_range.clone() {
            if kx == 0 && ky == 0 {
                continue;
            }
            let a: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            terms.push((kx, ky, a, b));
        }
    }
    // per-component amplitude bound of 1, so |perturbation| <= sqrt(m) < |offset|
    let mut bound = vec![0.0f64; m];
    for (_, _, a, b) in &terms {
        for c in 0..m {
            bound[c] += a[c].abs() + b[c].abs();
        }
    }
    let (lx, ly) = (grid.lx().as_f64(), grid.ly().as_f64());
    MapField::from_fn(grid.clone(), *target, |p| {
        let (x, y) = (p.x.as_f64(), p.y.as_f64());
        let mut v = offset.clone();
        for (kx, ky, a, b) in &terms {
            let ph = std::f64::consts::TAU * (*kx as f64 * x / lx + *ky as f64 * y / ly);
            let (s, co) = ph.sin_cos();
            for c in 0..m {
                v[c] += (a[c] * co + b[c] * s) / bound[c].max(1e-12);
            }
        }
        v.into_iter().map(T::lit).collect()
    })
}

/// Latitude circle at polar angle `phi` on a circle domain:
/// `s ↦ (sin φ cos 2πs/L, sin φ sin 2πs/L, cos φ)`.
pub fn latitude_circle<T: Scalar>(grid: &DomainGrid<T>, phi: T) -> Result<MapField<T>> {
    if !grid.is_circle() {
        return Err(Error::InvalidParameter(
            "latitude circles live on circle domains".into(),
        ));
    }
    let len = grid.lx();
    let (sp, cp) = phi.sin_cos();
    MapField::from_fn(grid.clone(), s2(), |p| {
        let a = T::TAU() * p.x / len;
        vec![sp * a.cos(), sp * a.sin(), cp]
    })
}
