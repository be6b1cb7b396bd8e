//! Dirichlet, α- and ε-energies, their first variations and the entropy
//! quantities.
//!
//! All energies are built on the nodal density `e_k` of
//! [`DomainGrid::energy_density`]. Since `e_k` is an average of squared face
//! differences, the exact discrete gradient of `sum_k (1 + e_k)^α` is a
//! divergence with face-averaged weights `(1 + e)^(α-1)`, and the exact
//! gradient of `sum_k e_k + ε |Δu|_k^2` uses the symmetric five-point
//! Laplacian. The routines below return those gradients up to a constant:
//!
//! * `dE_α[v] = -2α <alpha_gradient(u, α), v>` for tangent `v`,
//! * `dE_ε[v] = -2 <biharmonic_gradient(u, ε), v>`.
//!
//! Logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::MapField;
use crate::scalar::Scalar;
use crate::target::project_tangent_nodes;

/// Sacks–Uhlenbeck exponent, `α >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AlphaParam<T>(T);

impl<T: Scalar> AlphaParam<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if !(alpha >= T::one()) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be >= 1, got {alpha}")));
        }
        Ok(AlphaParam(alpha))
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// Biharmonic weight, `ε >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EpsParam<T>(T);

impl<T: Scalar> EpsParam<T> {
    pub fn new(eps: T) -> Result<Self> {
        if !(eps >= T::zero()) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {eps}")));
        }
        Ok(EpsParam(eps))
    }

    pub fn value(self) -> T {
        self.0
    }
}

pub(crate) struct Evaluation<T> {
    pub density: Vec<T>,
    aux: Vec<T>,
}

/// `total = volume + dirichlet + regularizer`; `volume` is zero for `E_ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown<T> {
    pub volume: T,
    pub dirichlet: T,
    pub regularizer: T,
    pub total: T,
    pub entropy: T,
}

/// Which regularization is being minimized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Functional<T> {
    Alpha(AlphaParam<T>),
    Biharmonic(EpsParam<T>),
}

impl<T: Scalar> Functional<T> {
    pub fn alpha(alpha: T) -> Result<Self> {
        AlphaParam::new(alpha).map(Functional::Alpha)
    }

    pub fn biharmonic(eps: T) -> Result<Self> {
        EpsParam::new(eps).map(Functional::Biharmonic)
    }

    /// α or ε.
    pub fn parameter(&self) -> T {
        match self {
            Functional::Alpha(a) => a.value(),
            Functional::Biharmonic(e) => e.value(),
        }
    }

    /// Nodal energy density; integrates to the energy.
    pub fn density(&self, u: &MapField<T>) -> Vec<T> {
        match self {
            Functional::Alpha(a) => alpha_density(u, *a),
            Functional::Biharmonic(e) => biharmonic_density(u, *e),
        }
    }

    pub fn energy(&self, u: &MapField<T>) -> T {
        u.grid().integrate(&self.density(u))
    }

    pub fn breakdown(&self, u: &MapField<T>) -> EnergyBreakdown<T> {
        match self {
            Functional::Alpha(a) => alpha_energy(u, *a),
            Functional::Biharmonic(e) => biharmonic_energy(u, *e),
        }
    }

    /// Tangential Euler–Lagrange expression.
    pub fn gradient(&self, u: &MapField<T>) -> Vec<T> {
        self.gradient_from(u, &self.evaluate(u))
    }

    /// Density together with the by-products the gradient reuses: the face
    /// weights `(1 + e)^(α-1) = (1 + e)^α / (1 + e)` or the Laplacian.
    pub(crate) fn evaluate(&self, u: &MapField<T>) -> Evaluation<T> {
        match self {
            Functional::Alpha(a) => {
                let a = a.value();
                let e = u.energy_density();
                let mut weight = Vec::with_capacity(e.len());
                let density = e
                    .into_iter()
                    .map(|x| {
                        let b = T::one() + x;
                        let d = b.powf(a);
                        weight.push(d / b);
                        d
                    })
                    .collect();
                Evaluation { density, aux: weight }
            }
            Functional::Biharmonic(eps) => {
                let (e, lap) = (u.energy_density(), u.laplacian());
                let eps = eps.value();
                let density = e
                    .iter()
                    .zip(lap.chunks(u.m()))
                    .map(|(&x, l)| x + eps * l.iter().fold(T::zero(), |s, v| s + *v * *v))
                    .collect();
                Evaluation { density, aux: lap }
            }
        }
    }

    pub(crate) fn gradient_from(&self, u: &MapField<T>, ev: &Evaluation<T>) -> Vec<T> {
        let grid = u.grid();
        let m = u.m();
        let mut g = match self {
            Functional::Alpha(_) => grid.weighted_divergence(u.values(), m, &ev.aux),
            Functional::Biharmonic(eps) => {
                let e = eps.value();
                let bil = grid.laplacian(&ev.aux, m);
                ev.aux.iter().zip(&bil).map(|(&l, &b)| l - e * b).collect()
            }
        };
        project_tangent_nodes(u.target(), u.values(), &mut g);
        g
    }

    /// `c` with `dE[v] = -c <gradient(u), v>_{L²}`.
    pub fn variation_scale(&self) -> T {
        match self {
            Functional::Alpha(a) => T::lit(2.0) * a.value(),
            Functional::Biharmonic(_) => T::lit(2.0),
        }
    }
}

/// `∫ |∇u|^2`.
pub fn dirichlet_energy<T: Scalar>(u: &MapField<T>) -> T {
    u.grid().integrate(&u.energy_density())
}

/// `(1 + e_k)^α` per node.
pub fn alpha_density<T: Scalar>(u: &MapField<T>, alpha: AlphaParam<T>) -> Vec<T> {
    let a = alpha.value();
    u.energy_density().into_iter().map(|e| (T::one() + e).powf(a)).collect()
}

pub fn alpha_energy<T: Scalar>(u: &MapField<T>, alpha: AlphaParam<T>) -> EnergyBreakdown<T> {
    let g = u.grid();
    let a = alpha.value();
    let e = u.energy_density();
    let one = T::one();
    let total: Vec<T> = e.iter().map(|&x| (one + x).powf(a)).collect();
    let excess: Vec<T> = e.iter().zip(&total).map(|(&x, &t)| t - one - x).collect();
    let entropy: Vec<T> = e.iter().zip(&total).map(|(&x, &t)| (one + x).ln() * t).collect();
    EnergyBreakdown {
        volume: g.volume(),
        dirichlet: g.integrate(&e),
        regularizer: g.integrate(&excess),
        total: g.integrate(&total),
        entropy: (a - one) * g.integrate(&entropy),
    }
}

/// `e_k + ε |Δu|_k^2` per node.
pub fn biharmonic_density<T: Scalar>(u: &MapField<T>, eps: EpsParam<T>) -> Vec<T> {
    let (e, lap2) = dirichlet_and_laplacian_sq(u);
    let eps = eps.value();
    e.iter().zip(&lap2).map(|(&a, &b)| a + eps * b).collect()
}

fn dirichlet_and_laplacian_sq<T: Scalar>(u: &MapField<T>) -> (Vec<T>, Vec<T>) {
    let m = u.m();
    let lap = u.laplacian();
    let lap2 = lap
        .chunks(m)
        .map(|l| l.iter().fold(T::zero(), |s, v| s + *v * *v))
        .collect();
    (u.energy_density(), lap2)
}

pub fn biharmonic_energy<T: Scalar>(u: &MapField<T>, eps: EpsParam<T>) -> EnergyBreakdown<T> {
    let g = u.grid();
    let (e, lap2) = dirichlet_and_laplacian_sq(u);
    let eps_v = eps.value();
    let total: Vec<T> = e.iter().zip(&lap2).map(|(&a, &b)| a + eps_v * b).collect();
    let bilap = g.integrate(&lap2);
    let entropy = if eps_v > T::zero() {
        eps_v * (T::one() / eps_v).ln() * bilap
    } else {
        T::zero()
    };
    EnergyBreakdown {
        volume: T::zero(),
        dirichlet: g.integrate(&e),
        regularizer: eps_v * bilap,
        total: g.integrate(&total),
        entropy,
    }
}

/// Tangential part of `div((1 + |∇u|^2)^(α-1) ∇u)`.
pub fn alpha_gradient<T: Scalar>(u: &MapField<T>, alpha: AlphaParam<T>) -> Vec<T> {
    Functional::Alpha(alpha).gradient(u)
}

/// Tangential part of `Δu - ε Δ²u`.
pub fn biharmonic_gradient<T: Scalar>(u: &MapField<T>, eps: EpsParam<T>) -> Vec<T> {
    Functional::Biharmonic(eps).gradient(u)
}

/// `(α - 1) ∫ log(1 + |∇u|^2) (1 + |∇u|^2)^α`.
pub fn entropy_alpha<T: Scalar>(u: &MapField<T>, alpha: AlphaParam<T>) -> T {
    (alpha.value() - T::one()) * alpha_energy_derivative(u, alpha)
}

/// `∂_α E_α(u) = ∫ log(1 + |∇u|^2) (1 + |∇u|^2)^α`.
pub fn alpha_energy_derivative<T: Scalar>(u: &MapField<T>, alpha: AlphaParam<T>) -> T {
    let a = alpha.value();
    let f: Vec<T> = u
        .energy_density()
        .into_iter()
        .map(|e| {
            let l = (T::one() + e).ln();
            l * (a * l).exp()
        })
        .collect();
    u.grid().integrate(&f)
}

/// `ε log(1/ε) ∫ |Δu|^2`, defined for `0 < ε < 1`.
pub fn entropy_eps<T: Scalar>(u: &MapField<T>, eps: EpsParam<T>) -> Result<T> {
    let e = eps.value();
    if !(e > T::zero() && e < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "entropy_eps needs 0 < epsilon < 1, got {e}"
        )));
    }
    let (_, lap2) = dirichlet_and_laplacian_sq(u);
    Ok(e * (T::one() / e).ln() * u.grid().integrate(&lap2))
}

/// Sup over nodes of the Euclidean norm of a nodal vector field.
pub fn sup_norm<T: Scalar>(field: &[T], m: usize) -> T {
    field
        .chunks(m)
        .map(|v| v.iter().fold(T::zero(), |s, x| s + *x * *x).sqrt())
        .fold(T::zero(), T::max)
}
