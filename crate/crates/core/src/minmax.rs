//! Families of maps, `β_α = inf sup E_α` estimates and the cutoff
//! pseudo-gradient deformation, with the geodesic sweepout as the worked
//! instance.
//!
//! The deformation certifies upper bounds and trends, not the true inf sup.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::MapField;
use crate::functionals::{alpha_energy_derivative, AlphaParam, Functional};
use crate::grid::{dot, DomainGrid};
use crate::maps;
use crate::scalar::{smoothstep, Scalar};
use crate::table::{float, Table};
use crate::target::{project_tangent_nodes, TargetManifold};

/// Ordered list of maps sharing one grid and target.
#[derive(Clone, Debug, PartialEq)]
pub struct PathFamily<T> {
    members: Vec<MapField<T>>,
}

impl<T: Scalar> PathFamily<T> {
    pub fn new(members: Vec<MapField<T>>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::InvalidParameter("empty family".into()));
        };
        for m in &members[1..] {
            if m.grid() != first.grid() || m.target() != first.target() {
                return Err(Error::InvalidParameter(
                    "family members must share grid and target".into(),
                ));
            }
        }
        Ok(PathFamily { members })
    }

    /// Latitude circles `φ_t = π t / count`, `t = 0..count`, on a circle
    /// domain: a sweepout of `S²` from the north pole, through the equator
    /// (when `count` is even) toward the south pole.
    pub fn latitude_sweepout(grid: &DomainGrid<T>, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidParameter("a sweepout needs at least two members".into()));
        }
        let members = (0..count)
            .map(|t| maps::latitude_circle(grid, T::PI() * T::from_usize_lossy(t) / T::from_usize_lossy(count)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }

    pub fn constant(grid: &DomainGrid<T>, target: TargetManifold, point: &[T], count: usize) -> Result<Self> {
        let u = MapField::constant(grid.clone(), target, point)?;
        Self::new(vec![u; count.max(1)])
    }

    /// Every member moved by a smooth random tangent field of sup-size about
    /// `amplitude` and projected back. The same seed gives the same family.
    pub fn perturbed(&self, amplitude: T, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(self.members.len());
        for u in &self.members {
            let member_seed: u64 = rng.gen();
            let noise = maps::smooth_random_field(u.grid(), u.target(), 2, member_seed)?;
            let mut v: Vec<T> = noise.values().to_vec();
            project_tangent_nodes(u.target(), u.values(), &mut v);
            let vals: Vec<T> = u.values().iter().zip(&v).map(|(a, b)| *a + amplitude * *b).collect();
            out.push(MapField::from_ambient(u.grid().clone(), *u.target(), vals)?);
        }
        Self::new(out)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[MapField<T>] {
        &self.members
    }

    pub fn grid(&self) -> &DomainGrid<T> {
        self.members[0].grid()
    }

    pub fn energies(&self, functional: &Functional<T>) -> Vec<T> {
        self.members.iter().map(|u| functional.energy(u)).collect()
    }
}

/// `(max_t E_α(u_t), argmax)`, ties going to the lowest index.
pub fn sup_energy<T: Scalar>(family: &PathFamily<T>, alpha: AlphaParam<T>) -> (T, usize) {
    argmax(&family.energies(&Functional::Alpha(alpha)))
}

fn argmax<T: Scalar>(v: &[T]) -> (T, usize) {
    let mut best = (v[0], 0);
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > best.0 {
            best = (*x, i);
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformConfig<T> {
    /// Explicit Euler step against the nodal gradient of the energy.
    pub step: T,
    /// Cutoff band as a fraction of `sup - min` over the family.
    pub band_fraction: T,
    pub max_sweeps: usize,
    /// Stop once a sweep lowers the sup by less than this.
    pub min_decrease: T,
    pub max_halvings: usize,
    /// Consecutive members further apart than this (sup over nodes of the
    /// ambient distance) get a projected midpoint inserted between them.
    pub max_gap: T,
    pub max_members: usize,
}

impl<T: Scalar> Default for DeformConfig<T> {
    fn default() -> Self {
        DeformConfig {
            step: T::lit(2e-3),
            band_fraction: T::lit(0.05),
            max_sweeps: 4000,
            min_decrease: T::lit(1e-10),
            max_halvings: 30,
            max_gap: T::lit(0.1),
            max_members: 1024,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformReport<T> {
    pub sweeps: usize,
    pub halvings: usize,
    pub members: usize,
    /// The last step was refused because keeping the family coherent would
    /// have needed more than `max_members` members.
    pub member_cap_reached: bool,
    /// Sup energy before the first sweep and after each accepted one.
    pub sup_history: Vec<T>,
}

/// Flows the members near the top level down the α-gradient. A member with
/// energy `E` moves with weight `ψ((E - (sup - band)) / band)` where `ψ` is
/// the quintic smoothstep, so members more than one band below the sup stay
/// put. Members move independently, so after each step gaps between
/// neighbours are refined with projected midpoints; without this a family
/// straddling a saddle tears apart and its sup drops below the min-max level.
/// A sweep that would raise the sup (midpoints included) is retried with half
/// the step.
pub fn pseudo_gradient_deform<T: Scalar>(
    family: &PathFamily<T>,
    alpha: AlphaParam<T>,
    cfg: &DeformConfig<T>,
) -> Result<(PathFamily<T>, DeformReport<T>)> {
    let f = Functional::Alpha(alpha);
    let scale = f.variation_scale() * family.grid().cell();
    let mut members = family.members.clone();
    let mut energies = family.energies(&f);
    let (mut sup, _) = argmax(&energies);
    let mut history = vec![sup];
    let mut step = cfg.step;
    let mut halvings = 0;
    let mut sweeps = 0;
    let mut capped = false;
    while sweeps < cfg.max_sweeps {
        let lo = energies.iter().fold(T::infinity(), |a, b| a.min(*b));
        let band = cfg.band_fraction * (sup - lo);
        if !(band > T::zero()) {
            break;
        }
        let weights: Vec<T> = energies
            .iter()
            .map(|e| smoothstep((*e - (sup - band)) / band))
            .collect();
        let grads: Vec<Option<Vec<T>>> = members
            .iter()
            .zip(&weights)
            .map(|(u, w)| (*w > T::zero()).then(|| f.gradient(u)))
            .collect();
        let (next, next_e, next_sup) = loop {
            let mut next = members.clone();
            let mut next_e = energies.clone();
            for (i, g) in grads.iter().enumerate() {
                let Some(g) = g else { continue };
                let u = &members[i];
                let tau = step * weights[i] * scale;
                let vals: Vec<T> = u.values().iter().zip(g).map(|(a, b)| *a + tau * *b).collect();
                next[i] = MapField::from_ambient(u.grid().clone(), *u.target(), vals)?;
                next_e[i] = f.energy(&next[i]);
            }
            if !refine(&mut next, &mut next_e, &f, cfg)? {
                break (Vec::new(), Vec::new(), sup);
            }
            let (s, _) = argmax(&next_e);
            if s.is_finite() && s <= sup {
                break (next, next_e, s);
            }
            halvings += 1;
            if halvings > cfg.max_halvings {
                return Err(Error::StepInstability { halvings });
            }
            step *= T::lit(0.5);
        };
        if next.is_empty() {
            capped = true;
            break;
        }
        sweeps += 1;
        let decrease = sup - next_sup;
        members = next;
        energies = next_e;
        sup = next_sup;
        history.push(sup);
        if decrease < cfg.min_decrease {
            break;
        }
    }
    let count = members.len();
    Ok((
        PathFamily { members },
        DeformReport {
            sweeps,
            halvings,
            members: count,
            member_cap_reached: capped,
            sup_history: history,
        },
    ))
}

/// Inserts midpoints until no two neighbours are more than `max_gap` apart.
/// Returns false if that would exceed `max_members`.
fn refine<T: Scalar>(
    members: &mut Vec<MapField<T>>,
    energies: &mut Vec<T>,
    f: &Functional<T>,
    cfg: &DeformConfig<T>,
) -> Result<bool> {
    let mut t = 0;
    while t + 1 < members.len() {
        if gap(&members[t], &members[t + 1]) <= cfg.max_gap {
            t += 1;
            continue;
        }
        if members.len() >= cfg.max_members {
            return Ok(false);
        }
        let (a, b) = (&members[t], &members[t + 1]);
        let half = T::lit(0.5);
        let vals: Vec<T> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (*x + *y) * half)
            .collect();
        let mid = MapField::from_ambient(a.grid().clone(), *a.target(), vals)?;
        energies.insert(t + 1, f.energy(&mid));
        members.insert(t + 1, mid);
    }
    Ok(true)
}

fn gap<T: Scalar>(a: &MapField<T>, b: &MapField<T>) -> T {
    let m = a.m();
    a.values()
        .chunks(m)
        .zip(b.values().chunks(m))
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(p, q)| (*p - *q) * (*p - *q))
                .fold(T::zero(), |s, v| s + v)
        })
        .fold(T::zero(), T::max)
        .sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxResult<T> {
    pub alpha: T,
    pub beta: T,
    /// Member attaining the sup in the best family.
    pub argmax: usize,
    pub restart: usize,
    pub sweeps: usize,
    pub sup_history: Vec<T>,
}

/// Best (lowest) post-deformation sup over `restarts` families drawn from
/// `generator(restart)`. Also returns the deformed families.
pub fn beta_estimate<T: Scalar>(
    generator: &dyn Fn(usize) -> Result<PathFamily<T>>,
    alpha: AlphaParam<T>,
    restarts: usize,
    cfg: &DeformConfig<T>,
) -> Result<(MinMaxResult<T>, Vec<PathFamily<T>>)> {
    let mut best: Option<MinMaxResult<T>> = None;
    let mut families = Vec::with_capacity(restarts);
    for r in 0..restarts.max(1) {
        let fam = generator(r)?;
        let (def, rep) = pseudo_gradient_deform(&fam, alpha, cfg)?;
        let (beta, arg) = sup_energy(&def, alpha);
        if best.as_ref().is_none_or(|b| beta < b.beta) {
            best = Some(MinMaxResult {
                alpha: alpha.value(),
                beta,
                argmax: arg,
                restart: r,
                sweeps: rep.sweeps,
                sup_history: rep.sup_history,
            });
        }
        families.push(def);
    }
    Ok((best.expect("at least one restart"), families))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaRow<T> {
    pub alpha: T,
    pub beta: T,
    pub dbeta_dalpha: T,
    /// `(α-1) log(1/(α-1)) dβ/dα`
    pub entropy_product: T,
    /// `∂_α E_α` at the member attaining `β_α`.
    pub energy_derivative: T,
    /// Whether `∂_α E_α <= dβ/dα + 3`; only meaningful at interior points.
    pub step_one_holds: bool,
    pub interior: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaTable<T> {
    pub rows: Vec<BetaRow<T>>,
    pub results: Vec<MinMaxResult<T>>,
}

impl<T: Scalar> BetaTable<T> {
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].beta >= w[0].beta)
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new([
            "alpha",
            "beta",
            "dbeta_dalpha",
            "entropy_product",
            "energy_derivative",
            "step_one_holds",
        ]);
        for r in &self.rows {
            t.push(vec![
                float(r.alpha),
                float(r.beta),
                float(r.dbeta_dalpha),
                float(r.entropy_product),
                float(r.energy_derivative),
                r.step_one_holds.to_string(),
            ]);
        }
        t
    }
}

/// β over an increasing α grid. Every deformed family (from every α and
/// restart) competes at every α, so `β_α = min_F sup_F E_α` and the table is
/// non-decreasing in α by construction.
pub fn beta_table<T: Scalar>(
    generator: &dyn Fn(usize) -> Result<PathFamily<T>>,
    alphas: &[T],
    restarts: usize,
    cfg: &DeformConfig<T>,
) -> Result<BetaTable<T>> {
    if alphas.len() < 4 {
        return Err(Error::TooFewGridPoints {
            need: 4,
            got: alphas.len(),
        });
    }
    if alphas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("alpha grid must be strictly increasing".into()));
    }
    let params = alphas.iter().map(|a| AlphaParam::new(*a)).collect::<Result<Vec<_>>>()?;
    let mut results = Vec::new();
    let mut pool: Vec<PathFamily<T>> = Vec::new();
    for a in &params {
        let (res, fams) = beta_estimate(generator, *a, restarts, cfg)?;
        results.push(res);
        pool.extend(fams);
    }
    let mut betas = Vec::new();
    let mut tops = Vec::new();
    for a in &params {
        let mut best: Option<(T, &MapField<T>)> = None;
        for fam in &pool {
            let (s, i) = sup_energy(fam, *a);
            if best.is_none_or(|(b, _)| s < b) {
                best = Some((s, &fam.members()[i]));
            }
        }
        let (b, u) = best.expect("non-empty pool");
        betas.push(b);
        tops.push(alpha_energy_derivative(u, *a));
    }
    let db = derivative(alphas, &betas);
    let n = alphas.len();
    let rows = (0..n)
        .map(|i| {
            let a1 = alphas[i] - T::one();
            let product = if a1 > T::zero() {
                a1 * (T::one() / a1).ln() * db[i]
            } else {
                T::zero()
            };
            BetaRow {
                alpha: alphas[i],
                beta: betas[i],
                dbeta_dalpha: db[i],
                entropy_product: product,
                energy_derivative: tops[i],
                step_one_holds: tops[i] <= db[i] + T::lit(3.0),
                interior: i > 0 && i + 1 < n,
            }
        })
        .collect();
    Ok(BetaTable { rows, results })
}

/// Three-point finite differences on a non-uniform grid, one-sided at the
/// ends.
fn derivative<T: Scalar>(x: &[T], y: &[T]) -> Vec<T> {
    let n = x.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (y[1] - y[0]) / (x[1] - x[0])
            } else if i + 1 == n {
                (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2])
            } else {
                let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
                let a = -h1 / (h0 * (h0 + h1));
                let c = h0 / (h1 * (h0 + h1));
                let b = (h1 - h0) / (h0 * h1);
                a * y[i - 1] + b * y[i] + c * y[i + 1]
            }
        })
        .collect()
}

/// Report of the Step-1 inequality and the entropy-product trend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport<T> {
    pub step_one_all_interior: bool,
    /// Largest `∂_α E_α - dβ/dα` over interior points.
    pub step_one_worst_gap: T,
    /// Entropy products strictly decrease as α decreases toward 1.
    pub product_decreasing: bool,
}

pub fn entropy_derivative_check<T: Scalar>(table: &BetaTable<T>) -> Result<EntropyReport<T>> {
    if table.rows.len() < 4 {
        return Err(Error::TooFewGridPoints {
            need: 4,
            got: table.rows.len(),
        });
    }
    let interior = table.rows.iter().filter(|r| r.interior);
    let worst = interior
        .clone()
        .map(|r| r.energy_derivative - r.dbeta_dalpha)
        .fold(T::neg_infinity(), T::max);
    Ok(EntropyReport {
        step_one_all_interior: interior.clone().all(|r| r.step_one_holds),
        step_one_worst_gap: worst,
        product_decreasing: table
            .rows
            .windows(2)
            .all(|w| w[0].entropy_product < w[1].entropy_product),
    })
}

/// Degree of the sweepout `(t, s) ↦ u_t(s)` as a map from a sphere: the
/// members form a cylinder, each end is capped by a fan to its normalized
/// centroid, and the signed solid angles of all triangles are summed.
pub fn sweepout_degree<T: Scalar>(family: &PathFamily<T>) -> Result<T> {
    let grid = family.grid();
    if !grid.is_circle() || family.members()[0].m() != 3 {
        return Err(Error::InvalidParameter(
            "sweepout degree needs circle maps into S^2".into(),
        ));
    }
    let n = grid.nx();
    let node = |t: usize, s: usize| -> [T; 3] {
        let v = family.members()[t].node(s % n);
        [v[0], v[1], v[2]]
    };
    let cap = |t: usize| -> [T; 3] {
        let mut c = [T::zero(); 3];
        for s in 0..n {
            let v = node(t, s);
            for q in 0..3 {
                c[q] += v[q];
            }
        }
        let norm = dot(&c, &c).sqrt();
        if norm > T::lit(1e-12) {
            c.map(|x| x / norm)
        } else {
            node(t, 0)
        }
    };
    let mut total = T::zero();
    let last = family.len() - 1;
    let (top, bottom) = (cap(0), cap(last));
    for s in 0..n {
        total += solid_angle(top, node(0, s + 1), node(0, s));
        total += solid_angle(bottom, node(last, s), node(last, s + 1));
        for t in 0..last {
            let (a, b, c, d) = (node(t, s), node(t, s + 1), node(t + 1, s + 1), node(t + 1, s));
            total += solid_angle(a, b, c);
            total += solid_angle(a, c, d);
        }
    }
    Ok(total / (T::lit(4.0) * T::PI()))
}

/// Signed solid angle of the spherical triangle `(a, b, c)` seen from the
/// origin.
fn solid_angle<T: Scalar>(a: [T; 3], b: [T; 3], c: [T; 3]) -> T {
    let cross = [
        b[1] * c[2] - b[2] * c[1],
        b[2] * c[0] - b[0] * c[2],
        b[0] * c[1] - b[1] * c[0],
    ];
    let num = dot(&a, &cross);
    let den = T::one() + dot(&a, &b) + dot(&b, &c) + dot(&c, &a);
    T::lit(2.0) * num.atan2(den)
}
