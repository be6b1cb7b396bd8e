//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use bubblelab::{Field, Grid, Point};

/// Minimal periodic image of `d` on a circle of length `len`.
pub fn periodic(d: f64, len: f64) -> f64 {
    let mut d = d - (d / len).round() * len;
    if d > len / 2.0 {
        d -= len;
    } else if d < -len / 2.0 {
        d += len;
    }
    d
}

/// Plain row-major sum over every node with the linear-ramp ball weight.
pub fn brute_ball_sum(grid: &Grid, f: &[f64], c: Point<f64>, r: f64) -> f64 {
    let mut s = 0.0;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let k = j * grid.nx() + i;
            let dx = periodic(i as f64 * grid.hx() - c.x, grid.lx());
            let dy = if grid.is_circle() {
                0.0
            } else {
                periodic(j as f64 * grid.hy() - c.y, grid.ly())
            };
            let w = ((r - dx.hypot(dy)) / grid.h() + 0.5).clamp(0.0, 1.0);
            if w > 0.0 {
                s += w * f[k];
            }
        }
    }
    s * (grid.hx() * grid.hy())
}

/// Sequential sum in index order.
pub fn brute_integral(grid: &Grid, f: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in f {
        s += *v;
    }
    s * (grid.hx() * grid.hy())
}

/// `max_y` of the brute ball sum over every node `y`, lowest index on ties.
pub fn brute_concentration(grid: &Grid, e: &[f64], r: f64) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..grid.len() {
        let c = Point::new((k % grid.nx()) as f64 * grid.hx(), (k / grid.nx()) as f64 * grid.hy());
        let v = brute_ball_sum(grid, e, c, r);
        if v > best.0 {
            best = (v, k);
        }
    }
    best
}

/// Radius where the brute concentration reaches `level`: a scan in steps of
/// `h` to bracket it, then bisection.
pub fn radial_scan(grid: &Grid, e: &[f64], level: f64, r_max: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = grid.h();
    while brute_concentration(grid, e, hi).0 < level {
        lo = hi;
        hi += grid.h();
        assert!(hi <= r_max + grid.h(), "level never reached");
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if brute_concentration(grid, e, mid).0 < level {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Nodewise normalization of `u + t v`.
pub fn retract(u: &Field, v: &[f64], t: f64) -> Field {
    let m = u.m();
    let mut vals: Vec<f64> = u.values().iter().zip(v).map(|(a, b)| a + t * b).collect();
    for node in vals.chunks_mut(m) {
        let n = node.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in node.iter_mut() {
            *x /= n;
        }
    }
    Field::new(u.grid().clone(), *u.target(), vals).unwrap()
}

/// `v` minus its component along `u`, node by node (sphere targets).
pub fn tangent_part(u: &Field, v: &[f64]) -> Vec<f64> {
    let m = u.m();
    let mut out = v.to_vec();
    for (p, w) in u.values().chunks(m).zip(out.chunks_mut(m)) {
        let d: f64 = p.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        for (x, q) in w.iter_mut().zip(p) {
            *x -= d * q;
        }
    }
    out
}

/// Sup over nodes of the Euclidean norm of `m`-vectors.
pub fn sup_norm(v: &[f64], m: usize) -> f64 {
    v.chunks(m)
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}
