//! Embedded target manifolds. Only round spheres are provided; the
//! [`EmbeddedTarget`] trait is the seam for other targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::dot;
use crate::scalar::Scalar;

/// Operations a target `N ⊂ R^m` must supply.
pub trait EmbeddedTarget<T: Scalar> {
    /// Embedding dimension `m`.
    fn embedding_dim(&self) -> usize;

    /// Nearest-point projection onto `N`.
    fn project_point(&self, y: &[T], out: &mut [T]) -> Result<()>;

    /// Orthogonal projection of `v` onto `T_p N`.
    fn project_tangent(&self, p: &[T], v: &[T], out: &mut [T]);

    /// Second fundamental form `A(p)(X, Y)`, signed so that harmonic maps
    /// solve `Δu + A(u)(∇u, ∇u) = 0`.
    fn second_fundamental_form(&self, p: &[T], x: &[T], y: &[T], out: &mut [T]);

    /// Distance of `p` from `N` in the embedding norm.
    fn deviation(&self, p: &[T]) -> T;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Sphere,
}

/// Round unit sphere `S^n ⊂ R^{n+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetManifold {
    kind: TargetKind,
    dim: usize,
}

impl TargetManifold {
    pub fn sphere(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("sphere dimension must be at least 1".into()));
        }
        Ok(TargetManifold {
            kind: TargetKind::Sphere,
            dim: n,
        })
    }

    /// Intrinsic dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    /// Embedding dimension `m = n + 1`.
    pub fn m(&self) -> usize {
        self.dim + 1
    }
}

impl<T: Scalar> EmbeddedTarget<T> for TargetManifold {
    fn embedding_dim(&self) -> usize {
        self.m()
    }

    fn project_point(&self, y: &[T], out: &mut [T]) -> Result<()> {
        let norm = dot(y, y).sqrt();
        if !(norm > T::lit(1e-12)) {
            return Err(Error::DegenerateProjection(norm.as_f64()));
        }
        for (o, v) in out.iter_mut().zip(y) {
            *o = *v / norm;
        }
        Ok(())
    }

    fn project_tangent(&self, p: &[T], v: &[T], out: &mut [T]) {
        let s = dot(v, p);
        for c in 0..p.len() {
            out[c] = v[c] - s * p[c];
        }
    }

    fn second_fundamental_form(&self, p: &[T], x: &[T], y: &[T], out: &mut [T]) {
        let s = dot(x, y);
        for (o, pc) in out.iter_mut().zip(p) {
            *o = s * *pc;
        }
    }

    fn deviation(&self, p: &[T]) -> T {
        (dot(p, p).sqrt() - T::one()).abs()
    }
}

/// Renormalizes every node of an `m`-component field onto the sphere.
pub(crate) fn project_nodes<T: Scalar>(target: &TargetManifold, values: &mut [T]) -> Result<()> {
    let m = target.m();
    let mut buf = vec![T::zero(); m];
    for node in values.chunks_mut(m) {
        target.project_point(node, &mut buf)?;
        node.copy_from_slice(&buf);
    }
    Ok(())
}

/// Tangential projection of a nodal vector field, in place.
pub(crate) fn project_tangent_nodes<T: Scalar>(target: &TargetManifold, base: &[T], field: &mut [T]) {
    let m = target.m();
    let mut buf = vec![T::zero(); m];
    for (p, v) in base.chunks(m).zip(field.chunks_mut(m)) {
        target.project_tangent(p, v, &mut buf);
        v.copy_from_slice(&buf);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s2() -> TargetManifold {
        TargetManifold::sphere(2).unwrap()
    }

    #[test]
    fn rejects_zero_dimension() {
        assert!(TargetManifold::sphere(0).is_err());
        assert_eq!(s2().m(), 3);
    }

    #[test]
    fn project_point_examples() {
        let t = s2();
        let mut out = [0.0f64; 3];
        t.project_point(&[0.0, 0.0, 2.0], &mut out).unwrap();
        assert_eq!(out, [0.0, 0.0, 1.0]);
        t.project_point(&[1.0, 1.0, 1.0], &mut out).unwrap();
        for v in out {
            assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }
        assert!(t.project_point(&[0.0, 1e-13, 0.0], &mut out).is_err());
    }

    #[test]
    fn project_tangent_examples() {
        let t = s2();
        let p = [0.0f64, 0.0, 1.0];
        let mut out = [0.0; 3];
        t.project_tangent(&p, &[1.0, 0.0, 0.0], &mut out);
        assert_eq!(out, [1.0, 0.0, 0.0]);
        t.project_tangent(&p, &p, &mut out);
        assert_eq!(out, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn second_fundamental_form_examples() {
        let t = s2();
        let p = [0.0f64, 0.0, 1.0];
        let mut out = [0.0; 3];
        t.second_fundamental_form(&p, &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 0.0, 1.0]);
        t.second_fundamental_form(&p, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 0.0, 0.0]);
    }

    fn unit(v: [f64; 3]) -> Option<[f64; 3]> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        (n > 1e-3).then(|| [v[0] / n, v[1] / n, v[2] / n])
    }

    proptest! {
        #[test]
        fn projections_are_idempotent(y in prop::array::uniform3(-5.0f64..5.0),
                                      v in prop::array::uniform3(-5.0f64..5.0)) {
            let t = s2();
            prop_assume!(unit(y).is_some());
            let mut p = [0.0; 3];
            let mut pp = [0.0; 3];
            t.project_point(&y, &mut p).unwrap();
            t.project_point(&p, &mut pp).unwrap();
            for c in 0..3 { prop_assert!((p[c] - pp[c]).abs() < 1e-15); }

            let mut a = [0.0; 3];
            let mut b = [0.0; 3];
            t.project_tangent(&p, &v, &mut a);
            t.project_tangent(&p, &a, &mut b);
            for c in 0..3 { prop_assert!((a[c] - b[c]).abs() < 1e-14); }
            prop_assert!(dot(&a, &p).abs() < 1e-14);
        }

        #[test]
        fn second_fundamental_form_is_symmetric_bilinear_normal(
            y in prop::array::uniform3(-1.0f64..1.0),
            x0 in prop::array::uniform3(-1.0f64..1.0),
            y0 in prop::array::uniform3(-1.0f64..1.0),
            s in -2.0f64..2.0)
        {
            let t = s2();
            let p = match unit(y) { Some(p) => p, None => return Ok(()) };
            let mut x = [0.0; 3];
            let mut z = [0.0; 3];
            t.project_tangent(&p, &x0, &mut x);
            t.project_tangent(&p, &y0, &mut z);
            let mut axz = [0.0; 3];
            let mut azx = [0.0; 3];
            t.second_fundamental_form(&p, &x, &z, &mut axz);
            t.second_fundamental_form(&p, &z, &x, &mut azx);
            let sx = [s * x[0], s * x[1], s * x[2]];
            let mut scaled = [0.0; 3];
            t.second_fundamental_form(&p, &sx, &z, &mut scaled);
            let mut tang = [0.0; 3];
            t.project_tangent(&p, &axz, &mut tang);
            for c in 0..3 {
                prop_assert!((axz[c] - azx[c]).abs() < 1e-14);
                prop_assert!((scaled[c] - s * axz[c]).abs() < 1e-14);
                prop_assert!(tang[c].abs() < 1e-14);
            }
        }
    }
}
