//! Stress-energy tensors and their discrete divergences.
//!
//! `S¹ = ½|∇u|² δ - <∂_a u, ∂_b u>` satisfies `∂_a S¹_ab = -<Δu, ∂_b u>`,
//! and with
//! `S² = ½|Δu|² δ + <∂_c u, ∂_c Δu> δ - <∂_a u, ∂_b Δu> - <∂_b u, ∂_a Δu>`
//! one has `∂_a (S¹ - ε S²)_ab = <∂_b u, (εΔ² - Δ) u>` for every smooth `u`.
//! The reference pairing also carries `-|∇u|² <u, ∂_b u>`, the second
//! fundamental form term, which vanishes in the continuum for sphere
//! targets but keeps the discrete comparison honest.

use serde::{Deserialize, Serialize};

use crate::field::MapField;
use crate::grid::{dot, DomainGrid};
use crate::scalar::Scalar;

/// Symmetric 2×2 tensor per node stored as `(xx, xy, yy)`, its divergence
/// and the reference vector the divergence should match.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorField<T> {
    pub components: Vec<T>,
    pub divergence: Vec<T>,
    pub reference: Vec<T>,
}

impl<T: Scalar> TensorField<T> {
    pub fn len(&self) -> usize {
        self.components.len() / 3
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// `(xx, xy, yy)` at node `k`.
    pub fn at(&self, k: usize) -> [T; 3] {
        [
            self.components[3 * k],
            self.components[3 * k + 1],
            self.components[3 * k + 2],
        ]
    }

    /// Frobenius norm per node.
    pub fn norms(&self) -> Vec<T> {
        self.components
            .chunks(3)
            .map(|s| (s[0] * s[0] + T::lit(2.0) * s[1] * s[1] + s[2] * s[2]).sqrt())
            .collect()
    }

    /// Sup over nodes of `|divergence - reference|`.
    pub fn defect_sup(&self) -> T {
        self.divergence
            .chunks(2)
            .zip(self.reference.chunks(2))
            .map(|(d, r)| (d[0] - r[0]).hypot(d[1] - r[1]))
            .fold(T::zero(), T::max)
    }

    /// Sup over nodes of `|reference|`, the natural scale for the defect.
    pub fn reference_sup(&self) -> T {
        self.reference
            .chunks(2)
            .map(|r| r[0].hypot(r[1]))
            .fold(T::zero(), T::max)
    }
}

pub fn stress_energy_1<T: Scalar>(u: &MapField<T>) -> TensorField<T> {
    stress_kernel(u, None)
}

/// `S¹ - ε S²` with its divergence and `<∂u, (εΔ² - Δ)u>` reference. With
/// `ε = 0` this is bit-identical to [`stress_energy_1`].
pub fn stress_energy_2<T: Scalar>(u: &MapField<T>, eps: T) -> TensorField<T> {
    if eps == T::zero() {
        stress_kernel(u, None)
    } else {
        stress_kernel(u, Some(eps))
    }
}

fn stress_kernel<T: Scalar>(u: &MapField<T>, eps: Option<T>) -> TensorField<T> {
    let grid = u.grid();
    let m = u.m();
    let n = grid.len();
    let vals = u.values();
    let jac = grid.jacobian(vals, m);
    let lap = grid.laplacian(vals, m);
    let fourth = eps.map(|_| (grid.jacobian(&lap, m), grid.laplacian(&lap, m)));
    let half = T::lit(0.5);
    let two = T::lit(2.0);

    let mut comps = vec![T::zero(); 3 * n];
    let mut reference = vec![T::zero(); 2 * n];
    for k in 0..n {
        let ux = &jac[k * 2 * m..k * 2 * m + m];
        let uy = &jac[k * 2 * m + m..(k + 1) * 2 * m];
        let (xx, yy, xy) = (dot(ux, ux), dot(uy, uy), dot(ux, uy));
        // S¹ in trace-free form
        let mut s11 = half * (yy - xx);
        let mut s12 = -xy;
        let mut s22 = -s11;
        let j2 = xx + yy;
        let uk = &vals[k * m..(k + 1) * m];
        let lk = &lap[k * m..(k + 1) * m];
        let mut rx = T::zero();
        let mut ry = T::zero();
        match (&fourth, eps) {
            (Some((gl, bil)), Some(e)) => {
                let lx = &gl[k * 2 * m..k * 2 * m + m];
                let ly = &gl[k * 2 * m + m..(k + 1) * 2 * m];
                let bk = &bil[k * m..(k + 1) * m];
                let iso = half * dot(lk, lk) + dot(ux, lx) + dot(uy, ly);
                let t11 = iso - two * dot(ux, lx);
                let t22 = iso - two * dot(uy, ly);
                let t12 = -dot(ux, ly) - dot(uy, lx);
                s11 -= e * t11;
                s12 -= e * t12;
                s22 -= e * t22;
                for c in 0..m {
                    let q = e * bk[c] - lk[c] - j2 * uk[c];
                    rx += ux[c] * q;
                    ry += uy[c] * q;
                }
            }
            _ => {
                for c in 0..m {
                    let q = -lk[c] - j2 * uk[c];
                    rx += ux[c] * q;
                    ry += uy[c] * q;
                }
            }
        }
        comps[3 * k] = s11;
        comps[3 * k + 1] = s12;
        comps[3 * k + 2] = s22;
        reference[2 * k] = rx;
        reference[2 * k + 1] = ry;
    }
    // d(S)/dx and d(S)/dy for each of the three components
    let ds = grid.jacobian(&comps, 3);
    let mut divergence = vec![T::zero(); 2 * n];
    for k in 0..n {
        let d = &ds[k * 6..(k + 1) * 6];
        let (dx, dy) = (&d[..3], &d[3..]);
        divergence[2 * k] = dx[0] + dy[1];
        divergence[2 * k + 1] = dx[1] + dy[2];
    }
    TensorField {
        components: comps,
        divergence,
        reference,
    }
}

/// `|∇³u|` per node, with `|∇³u|² = |u_xxx|² + 3|u_xxy|² + 3|u_xyy|² + |u_yyy|²`.
/// Derivatives are central differences of the compact second differences,
/// followed by one `[1 2 1] ⊗ [1 2 1] / 16` smoothing pass per component.
pub fn third_derivative_norm<T: Scalar>(u: &MapField<T>) -> Vec<T> {
    let grid = u.grid();
    let m = u.m();
    let vals = u.values();
    let uxx = second_difference(grid, vals, m, true);
    let uyy = second_difference(grid, vals, m, false);
    let jxx = grid.jacobian(&uxx, m);
    let jyy = grid.jacobian(&uyy, m);
    let n = grid.len();
    let mut parts = vec![T::zero(); 4 * m * n];
    for k in 0..n {
        for c in 0..m {
            parts[k * 4 * m + c] = jxx[k * 2 * m + c];
            parts[k * 4 * m + m + c] = jxx[k * 2 * m + m + c];
            parts[k * 4 * m + 2 * m + c] = jyy[k * 2 * m + c];
            parts[k * 4 * m + 3 * m + c] = jyy[k * 2 * m + m + c];
        }
    }
    let smooth = smooth_121(grid, &parts, 4 * m);
    let three = T::lit(3.0);
    smooth
        .chunks(4 * m)
        .map(|p| {
            let (a, b, c, d) = (&p[..m], &p[m..2 * m], &p[2 * m..3 * m], &p[3 * m..]);
            (dot(a, a) + three * dot(b, b) + three * dot(c, c) + dot(d, d)).sqrt()
        })
        .collect()
}

fn second_difference<T: Scalar>(grid: &DomainGrid<T>, u: &[T], m: usize, along_x: bool) -> Vec<T> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let inv = if along_x {
        T::one() / (grid.hx() * grid.hx())
    } else {
        T::one() / (grid.hy() * grid.hy())
    };
    let mut out = vec![T::zero(); u.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let (a, b) = if along_x {
                (j * nx + (i + 1) % nx, j * nx + (i + nx - 1) % nx)
            } else {
                (((j + 1) % ny) * nx + i, ((j + ny - 1) % ny) * nx + i)
            };
            for c in 0..m {
                let uc = u[k * m + c];
                out[k * m + c] = ((u[a * m + c] - uc) + (u[b * m + c] - uc)) * inv;
            }
        }
    }
    out
}

fn smooth_121<T: Scalar>(grid: &DomainGrid<T>, f: &[T], m: usize) -> Vec<T> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let two = T::lit(2.0);
    let quarter = T::lit(0.25);
    let mut tmp = vec![T::zero(); f.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let (e, w) = (j * nx + (i + 1) % nx, j * nx + (i + nx - 1) % nx);
            for c in 0..m {
                tmp[k * m + c] = (f[w * m + c] + two * f[k * m + c] + f[e * m + c]) * quarter;
            }
        }
    }
    if ny == 1 {
        return tmp;
    }
    let mut out = vec![T::zero(); f.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let (n, s) = (((j + 1) % ny) * nx + i, ((j + ny - 1) % ny) * nx + i);
            for c in 0..m {
                out[k * m + c] = (tmp[s * m + c] + two * tmp[k * m + c] + tmp[n * m + c]) * quarter;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;
    use crate::target::TargetManifold;

    fn s2() -> TargetManifold {
        TargetManifold::sphere(2).unwrap()
    }

    #[test]
    fn constant_map_is_stress_free() {
        let g = DomainGrid::<f64>::unit_torus(16).unwrap();
        let u = MapField::constant(g, s2(), &[0.0, 0.0, 1.0]).unwrap();
        for t in [stress_energy_1(&u), stress_energy_2(&u, 0.1)] {
            assert!(t.components.iter().all(|v| *v == 0.0));
            assert!(t.divergence.iter().all(|v| *v == 0.0));
            assert!(t.reference.iter().all(|v| *v == 0.0));
        }
        assert!(third_derivative_norm(&u).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn trace_of_s1_vanishes_exactly() {
        let g = DomainGrid::<f64>::unit_torus(32).unwrap();
        let u = maps::smooth_random_field(&g, &s2(), 3, 7).unwrap();
        let t = stress_energy_1(&u);
        for k in 0..t.len() {
            let [a, _, c] = t.at(k);
            assert_eq!(a + c, 0.0);
        }
    }

    #[test]
    fn eps_zero_reduces_bitwise() {
        let g = DomainGrid::<f64>::unit_torus(32).unwrap();
        let u = maps::smooth_random_field(&g, &s2(), 3, 8).unwrap();
        assert_eq!(stress_energy_2(&u, 0.0), stress_energy_1(&u));
    }

    #[test]
    fn third_derivatives_of_a_cubic_wave() {
        // u = (cos kx, sin kx, 0): |u_xxx| = k³
        let n = 128;
        let g = DomainGrid::<f64>::unit_torus(n).unwrap();
        let u = maps::great_circle_wrap(&g).unwrap();
        let k3 = std::f64::consts::TAU.powi(3);
        for v in third_derivative_norm(&u) {
            assert!((v / k3 - 1.0).abs() < 5e-3, "{v} vs {k3}");
        }
    }
}
