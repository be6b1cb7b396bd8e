//! Bubble analysis: concentration function, bubble detection and rescaling,
//! neck profiles, Hopf-type balances, stress-energy tensors and the energy
//! ledger.
//!
//! "Energy" without qualification is the Dirichlet energy `∫|∇u|²`, so a
//! degree-one bubble carries `8π`.

mod annulus;
mod ledger;
mod stress;

pub use annulus::{
    annulus_profile, circle_balance, hopf_balance_alpha, hopf_balance_biharmonic, AnnulusProfile, AnnulusRow,
    BiharmonicHopfBalance, CircleBalance, HopfBalance,
};
pub use ledger::{energy_ledger, EnergyLedger};
pub use stress::{stress_energy_1, stress_energy_2, third_derivative_norm, TensorField};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::MapField;
use crate::functionals::Functional;
use crate::grid::{DomainGrid, Point};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig<T> {
    /// Concentration threshold; the bubble radius is where the concentration
    /// function reaches `eps0 / 2`.
    pub eps0: T,
    /// Neck smallness threshold for dyadic annuli.
    pub delta: T,
    /// Inner blow-up factor: bubble windows are `B_{R r_k}`.
    pub big_r: T,
    /// Outer neck radius.
    pub r0: T,
    /// Nodes per side of rescaled windows.
    pub window_nodes: usize,
    /// Log-spaced quadrature radii per dyadic level in annulus profiles.
    pub radii_per_level: usize,
}

impl<T: Scalar> Default for AnalysisConfig<T> {
    fn default() -> Self {
        AnalysisConfig {
            eps0: T::one(),
            delta: T::lit(0.1),
            big_r: T::lit(4.0),
            r0: T::lit(0.25),
            window_nodes: 128,
            radii_per_level: 16,
        }
    }
}

impl<T: Scalar> AnalysisConfig<T> {
    pub fn validate(&self, grid: &DomainGrid<T>) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.eps0 > T::zero()) {
            return bad(format!("eps0 must be positive, got {}", self.eps0));
        }
        if !(self.delta > T::zero() && self.delta < self.eps0) {
            return bad(format!("delta must lie in (0, eps0), got {}", self.delta));
        }
        if !(self.big_r >= T::lit(2.0)) {
            return bad(format!("R must be at least 2, got {}", self.big_r));
        }
        let limit = concentration_limit(grid);
        if !(self.r0 > T::zero() && self.r0 <= limit) {
            return bad(format!("R0 must lie in (0, {limit}], got {}", self.r0));
        }
        if self.window_nodes < 16 || self.radii_per_level < 8 {
            return bad("window needs >= 16 nodes and profiles >= 8 radii per level".into());
        }
        Ok(())
    }
}

/// Largest admissible ball radius for concentration and neck analysis:
/// a quarter of the shorter period.
pub fn concentration_limit<T: Scalar>(grid: &DomainGrid<T>) -> T {
    if grid.is_circle() {
        grid.lx() / T::lit(4.0)
    } else {
        grid.lx().min(grid.ly()) / T::lit(4.0)
    }
}

/// `E(u, B_r(center))`.
pub fn ball_energy<T: Scalar>(u: &MapField<T>, center: Point<T>, r: T) -> Result<T> {
    u.grid().ball_integral(&u.energy_density(), center, r)
}

/// The ball weights of radius `r` around a node, as row runs: a contiguous
/// block of full-weight offsets plus the fractional ones at its ends.
struct BallStencil<T> {
    rows: Vec<StencilRow<T>>,
}

struct StencilRow<T> {
    dj: i64,
    full: Option<(i64, i64)>,
    partial: Vec<(i64, T)>,
}

impl<T: Scalar> BallStencil<T> {
    fn new(grid: &DomainGrid<T>, r: T) -> Self {
        let reach = r + grid.h();
        let ci = (reach / grid.hx()).ceil().to_i64().unwrap_or(0) + 1;
        let cj = if grid.is_circle() {
            0
        } else {
            (reach / grid.hy()).ceil().to_i64().unwrap_or(0) + 1
        };
        let mut rows = Vec::new();
        for dj in -cj..=cj {
            let dy = T::lit(dj as f64) * grid.hy();
            let mut full: Option<(i64, i64)> = None;
            let mut partial = Vec::new();
            for di in -ci..=ci {
                let dx = T::lit(di as f64) * grid.hx();
                let w = grid.ball_weight(dx.hypot(dy), r);
                if w == T::one() {
                    full = Some(match full {
                        None => (di, di),
                        Some((a, _)) => (a, di),
                    });
                } else if w > T::zero() {
                    partial.push((di, w));
                }
            }
            if full.is_some() || !partial.is_empty() {
                rows.push(StencilRow { dj, full, partial });
            }
        }
        BallStencil { rows }
    }
}

/// `(max_y E(u, B_r(y)), argmax)` over grid nodes `y`, ties going to the
/// lowest node index.
pub fn concentration_function<T: Scalar>(u: &MapField<T>, r: T) -> Result<(T, Point<T>)> {
    let (v, k) = concentration_of_density(u.grid(), &u.energy_density(), r)?;
    Ok((v, u.grid().position(k)))
}

fn concentration_of_density<T: Scalar>(grid: &DomainGrid<T>, e: &[T], r: T) -> Result<(T, usize)> {
    let limit = concentration_limit(grid);
    if !(r > T::zero() && r <= limit) {
        return Err(Error::RadiusOutOfRange {
            radius: r.as_f64(),
            min: 0.0,
            max: limit.as_f64(),
        });
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    // prefix sums over each row repeated three times, so any window
    // [i + a, i + b] with |a|, |b| < nx is a plain difference
    let stride = 3 * nx + 1;
    let mut prefix = vec![T::zero(); ny * stride];
    for j in 0..ny {
        let p = &mut prefix[j * stride..(j + 1) * stride];
        for t in 0..3 * nx {
            p[t + 1] = p[t] + e[j * nx + t % nx];
        }
    }
    let st = BallStencil::new(grid, r);
    let (nxi, nyi) = (nx as i64, ny as i64);
    let mut best = (T::neg_infinity(), 0usize);
    for j in 0..ny {
        for i in 0..nx {
            let mut s = T::zero();
            for row in &st.rows {
                let jj = (j as i64 + row.dj).rem_euclid(nyi) as usize;
                if let Some((a, b)) = row.full {
                    let p = &prefix[jj * stride..];
                    let lo = (i as i64 + a + nxi) as usize;
                    let hi = (i as i64 + b + nxi + 1) as usize;
                    s += p[hi] - p[lo];
                }
                for &(di, w) in &row.partial {
                    let ii = (i as i64 + di).rem_euclid(nxi) as usize;
                    s += w * e[jj * nx + ii];
                }
            }
            if s > best.0 {
                best = (s, j * nx + i);
            }
        }
    }
    Ok((best.0 * grid.cell(), best.1))
}

/// A detected concentration point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleRecord<T> {
    pub center: Point<T>,
    /// `r_k`: concentration at this radius equals `eps0 / 2`.
    pub radius: T,
    pub concentration: T,
    pub eps0: T,
    pub big_r: T,
    /// Dirichlet energy of `B_{R r_k}(center)`, the estimate of `E(ω)`.
    pub bubble_energy: T,
    /// `r_k^(1-α)`; equals 1 for non-α fields.
    pub exponent: T,
    /// `ε / r_k²` on biharmonic fields.
    pub eps_ratio: Option<T>,
    #[serde(skip)]
    pub rescaled: Option<MapField<T>>,
}

impl<T: Scalar> BubbleRecord<T> {
    /// Fills the exponent or ε ratio for the functional `u` is critical for.
    pub fn annotate(&mut self, functional: &Functional<T>) {
        match functional {
            Functional::Alpha(a) => {
                self.exponent = concentration_exponent(self.radius, a.value());
                self.eps_ratio = None;
            }
            Functional::Biharmonic(e) => {
                self.exponent = T::one();
                self.eps_ratio = Some(eps_ratio(e.value(), self.radius));
            }
        }
    }

    /// Attaches the rescaled window `v(x) = u(center + r_k x)` on `[-R, R]²`.
    pub fn attach_rescaled(&mut self, u: &MapField<T>, cfg: &AnalysisConfig<T>) -> Result<()> {
        self.rescaled = Some(rescale(
            u,
            self.center,
            self.radius,
            cfg.big_r,
            cfg.r0,
            cfg.window_nodes,
        )?);
        Ok(())
    }
}

/// `r^(1-α)`.
pub fn concentration_exponent<T: Scalar>(r: T, alpha: T) -> T {
    r.powf(T::one() - alpha)
}

/// `ε / r²`.
pub fn eps_ratio<T: Scalar>(eps: T, r: T) -> T {
    eps / (r * r)
}

/// Largest bubble of `u`, or `None` if nothing concentrates `eps0 / 2`
/// within `R0`.
pub fn detect_bubble<T: Scalar>(u: &MapField<T>, cfg: &AnalysisConfig<T>) -> Result<Option<BubbleRecord<T>>> {
    cfg.validate(u.grid())?;
    let e = u.energy_density();
    detect_in_density(u.grid(), &e, &e, cfg)
}

/// Greedy mask-and-repeat detection, largest concentration first. Each
/// found bubble has `B_{R0}` around it removed before the next search.
pub fn detect_bubbles<T: Scalar>(
    u: &MapField<T>,
    cfg: &AnalysisConfig<T>,
    max_count: usize,
) -> Result<Vec<BubbleRecord<T>>> {
    cfg.validate(u.grid())?;
    let grid = u.grid();
    let full = u.energy_density();
    let mut masked = full.clone();
    let mut out = Vec::new();
    while out.len() < max_count {
        let Some(b) = detect_in_density(grid, &masked, &full, cfg)? else {
            break;
        };
        grid.for_each_in_ball(b.center, cfg.r0, |k, w| masked[k] *= T::one() - w);
        out.push(b);
    }
    Ok(out)
}

fn detect_in_density<T: Scalar>(
    grid: &DomainGrid<T>,
    e: &[T],
    full: &[T],
    cfg: &AnalysisConfig<T>,
) -> Result<Option<BubbleRecord<T>>> {
    let target = cfg.eps0 / T::lit(2.0);
    let tol = T::lit(1e-6) * cfg.eps0;
    let (top, _) = concentration_of_density(grid, e, cfg.r0)?;
    if top < target {
        return Ok(None);
    }
    let (mut lo, mut hi) = (T::zero(), cfg.r0);
    let (mut r, mut value, mut k) = (cfg.r0, top, 0);
    for _ in 0..200 {
        let mid = T::lit(0.5) * (lo + hi);
        let (c, kc) = concentration_of_density(grid, e, mid)?;
        (r, value, k) = (mid, c, kc);
        if (c - target).abs() <= tol || hi - lo <= T::epsilon() * cfg.r0 {
            break;
        }
        if c < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let floor = T::lit(4.0) * grid.h();
    if r <= floor {
        return Err(Error::UnderResolvedBubble {
            radius: r.as_f64(),
            floor: floor.as_f64(),
        });
    }
    let center = grid.position(k);
    let window = (cfg.big_r * r).min(grid.max_radius());
    let bubble_energy = grid.ball_integral(full, center, window)?;
    Ok(Some(BubbleRecord {
        center,
        radius: r,
        concentration: value,
        eps0: cfg.eps0,
        big_r: cfg.big_r,
        bubble_energy,
        exponent: T::one(),
        eps_ratio: None,
        rescaled: None,
    }))
}

/// Blow-up `v(x) = u(center + r x)` sampled bilinearly on a fresh square
/// torus of `n²` nodes. The square `[-R, R]²` sits in the middle with four
/// spare nodes on every side, so stencils inside `B_R` never see the seam;
/// `x = 0` is the node at the grid center.
pub fn rescale<T: Scalar>(u: &MapField<T>, center: Point<T>, r: T, big_r: T, r0: T, n: usize) -> Result<MapField<T>> {
    if !(r > T::zero()) || !(big_r > T::zero()) {
        return Err(Error::InvalidParameter(
            "rescale needs positive radius and factor".into(),
        ));
    }
    if big_r * r > r0 {
        return Err(Error::WindowTooLarge {
            window: (big_r * r).as_f64(),
            limit: r0.as_f64(),
        });
    }
    if n < 16 {
        return Err(Error::GridTooSmall { nx: n, ny: n });
    }
    let side = T::lit(2.0) * big_r * T::from_usize_lossy(n) / T::from_usize_lossy(n - 8);
    let window = DomainGrid::torus(n, n, side, side)?;
    let mid = window.center();
    let src = u.grid();
    let m = u.m();
    MapField::from_fn(window, *u.target(), |p| {
        let q = Point::new(center.x + r * (p.x - mid.x), center.y + r * (p.y - mid.y));
        let mut out = vec![T::zero(); m];
        src.interpolate(u.values(), m, q, &mut out);
        out
    })
}

/// `|{x ∈ B_r(center) : |∇u|(x) >= sqrt(eps0) / (2 sqrt(π) r)}| / r²`,
/// counting nodes with their ball weights.
pub fn superlevel_ratio<T: Scalar>(u: &MapField<T>, center: Point<T>, r: T, eps0: T) -> Result<T> {
    let grid = u.grid();
    let e = u.energy_density();
    superlevel_ratio_of(grid, &e, center, r, eps0)
}

pub(crate) fn superlevel_ratio_of<T: Scalar>(
    grid: &DomainGrid<T>,
    grad_sq: &[T],
    center: Point<T>,
    r: T,
    eps0: T,
) -> Result<T> {
    if !(r > T::zero() && r <= grid.max_radius()) {
        return Err(Error::RadiusOutOfRange {
            radius: r.as_f64(),
            min: 0.0,
            max: grid.max_radius().as_f64(),
        });
    }
    let threshold = eps0 / (T::lit(4.0) * T::PI() * r * r);
    let mut area = T::zero();
    grid.for_each_in_ball(center, r, |k, w| {
        if grad_sq[k] >= threshold {
            area += w;
        }
    });
    Ok(area * grid.cell() / (r * r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps;
    use crate::target::TargetManifold;

    fn brute(u: &MapField<f64>, r: f64) -> (f64, usize) {
        let g = u.grid();
        let e = u.energy_density();
        let mut best = (f64::NEG_INFINITY, 0);
        for k in 0..g.len() {
            let v = g.ball_integral(&e, g.position(k), r).unwrap();
            if v > best.0 {
                best = (v, k);
            }
        }
        best
    }

    #[test]
    fn fast_concentration_matches_brute_force() {
        let g = DomainGrid::<f64>::unit_torus(32).unwrap();
        let u = maps::smooth_random_field(&g, &TargetManifold::sphere(2).unwrap(), 2, 1).unwrap();
        for r in [0.01, 0.05, 0.13, 0.25] {
            let (v, p) = concentration_function(&u, r).unwrap();
            let (bv, bk) = brute(&u, r);
            assert!((v - bv).abs() <= 1e-12 * bv, "r={r}: {v} vs {bv}");
            assert_eq!(p, g.position(bk));
        }
    }

    #[test]
    fn radius_bounds() {
        let g = DomainGrid::<f64>::unit_torus(32).unwrap();
        let u = MapField::constant(g, TargetManifold::sphere(2).unwrap(), &[0.0, 0.0, 1.0]).unwrap();
        assert!(concentration_function(&u, 0.0).is_err());
        assert!(concentration_function(&u, 0.26).is_err());
        let (v, p) = concentration_function(&u, 0.1).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(p, Point::new(0.0, 0.0));
    }

    #[test]
    fn exponent_examples() {
        assert_eq!(concentration_exponent(0.3, 1.0), 1.0);
        assert!((concentration_exponent(0.01f64, 1.01) - 1.047128548).abs() < 1e-8);
        assert!((eps_ratio(1e-4f64, 0.05) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let g = DomainGrid::<f64>::unit_torus(32).unwrap();
        let mut c = AnalysisConfig::default();
        assert!(c.validate(&g).is_ok());
        c.delta = 1.0;
        assert!(c.validate(&g).is_err());
        c = AnalysisConfig::default();
        c.big_r = 1.5;
        assert!(c.validate(&g).is_err());
        c = AnalysisConfig::default();
        c.r0 = 0.3;
        assert!(c.validate(&g).is_err());
    }
}
