//! Partition of the energy into bubble disks, neck annuli and body.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::MapField;
use crate::functionals::Functional;
use crate::grid::Point;
use crate::scalar::Scalar;

use super::{AnalysisConfig, BubbleRecord};

/// Energy split over bubble disks `B_{R r_k}`, necks `A(R r_k, R0)` and the
/// body `M \ ∪ B_{R0}`.
///
/// For α-energies the parts carry the excess density `(1+|∇u|²)^α - 1`, so
/// `total = body + volume + bubbles + neck` up to rounding; for the
/// biharmonic energy the density is `|∇u|² + ε|Δu|²` and `volume = 0`.
/// The `*_dirichlet` fields split `∫|∇u|²` the same way.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger<T> {
    pub functional: Functional<T>,
    pub total: T,
    pub body: T,
    pub volume: T,
    pub bubbles: T,
    pub neck: T,
    pub discrepancy: T,
    pub relative_discrepancy: T,
    pub total_dirichlet: T,
    pub body_dirichlet: T,
    pub bubbles_dirichlet: T,
    pub neck_dirichlet: T,
    /// Largest `E(u, B_{2r} \ B_r)` over dyadic `r` from `R r_k`, the last
    /// annulus cut at `R0`.
    pub neck_dyadic_max: T,
    pub delta: T,
    pub neck_below_delta: bool,
    pub eps0: T,
    pub big_r: T,
    pub r0: T,
    pub bubble_centers: Vec<Point<T>>,
    pub bubble_radii: Vec<T>,
    /// Set when two `B_{R0}` windows intersect; the union is used.
    pub merged_windows: bool,
}

pub fn energy_ledger<T: Scalar>(
    u: &MapField<T>,
    functional: &Functional<T>,
    bubbles: &[BubbleRecord<T>],
    cfg: &AnalysisConfig<T>,
) -> Result<EnergyLedger<T>> {
    cfg.validate(u.grid())?;
    let grid = u.grid();
    let n = grid.len();
    for b in bubbles {
        if cfg.big_r * b.radius > cfg.r0 {
            return Err(Error::WindowTooLarge {
                window: (cfg.big_r * b.radius).as_f64(),
                limit: cfg.r0.as_f64(),
            });
        }
    }
    let mut merged = false;
    for (i, a) in bubbles.iter().enumerate() {
        for b in &bubbles[i + 1..] {
            if grid.distance(a.center, b.center) < T::lit(2.0) * cfg.r0 {
                merged = true;
            }
        }
    }

    // inner (bubble) and outer (bubble + neck) membership, united by max
    let mut inner = vec![T::zero(); n];
    let mut outer = vec![T::zero(); n];
    for b in bubbles {
        grid.for_each_in_ball(b.center, cfg.big_r * b.radius, |k, w| inner[k] = inner[k].max(w));
        grid.for_each_in_ball(b.center, cfg.r0, |k, w| outer[k] = outer[k].max(w));
    }

    let e = u.energy_density();
    let full = functional.density(u);
    let (part, volume) = match functional {
        Functional::Alpha(_) => (full.iter().map(|d| *d - T::one()).collect::<Vec<_>>(), grid.volume()),
        Functional::Biharmonic(_) => (full.clone(), T::zero()),
    };
    let split = |f: &[T]| -> (T, T, T) {
        let (mut sb, mut sn, mut so) = (T::zero(), T::zero(), T::zero());
        for k in 0..n {
            sb += inner[k] * f[k];
            sn += (outer[k] - inner[k]) * f[k];
            so += (T::one() - outer[k]) * f[k];
        }
        let c = grid.cell();
        (sb * c, sn * c, so * c)
    };
    let (bub, neck, body) = split(&part);
    let (bub_d, neck_d, body_d) = split(&e);
    let total = grid.integrate(&full);
    let discrepancy = total - body - volume - bub - neck;

    // dyadic neck monitor; the α case uses the Dirichlet density
    let monitor = match functional {
        Functional::Alpha(_) => &e,
        Functional::Biharmonic(_) => &full,
    };
    let two = T::lit(2.0);
    let mut dyadic = T::zero();
    for b in bubbles {
        let mut r = cfg.big_r * b.radius;
        let mut inside = grid.ball_integral(monitor, b.center, r)?;
        while r < cfg.r0 {
            let outer = (two * r).min(cfg.r0);
            let next = grid.ball_integral(monitor, b.center, outer)?;
            dyadic = dyadic.max(next - inside);
            inside = next;
            r = outer;
        }
    }

    Ok(EnergyLedger {
        functional: *functional,
        total,
        body,
        volume,
        bubbles: bub,
        neck,
        discrepancy,
        relative_discrepancy: discrepancy.abs() / total.abs().max(T::min_positive_value()),
        total_dirichlet: grid.integrate(&e),
        body_dirichlet: body_d,
        bubbles_dirichlet: bub_d,
        neck_dirichlet: neck_d,
        neck_dyadic_max: dyadic,
        delta: cfg.delta,
        neck_below_delta: dyadic < cfg.delta,
        eps0: cfg.eps0,
        big_r: cfg.big_r,
        r0: cfg.r0,
        bubble_centers: bubbles.iter().map(|b| b.center).collect(),
        bubble_radii: bubbles.iter().map(|b| b.radius).collect(),
        merged_windows: merged,
    })
}
