mod common;

use bubblelab::analysis::{ball_energy, concentration_function, detect_bubble, AnalysisConfig};
use bubblelab::maps;
use bubblelab::{Grid, Point, TargetManifold};
use common::*;

fn s2() -> TargetManifold {
    TargetManifold::sphere(2).unwrap()
}

#[test]
fn ball_energy_matches_brute_force_bitwise() {
    let g = Grid::unit_torus(64).unwrap();
    let u = maps::smooth_random_field(&g, &s2(), 3, 11).unwrap();
    let e = u.energy_density();
    let centers = [
        Point::new(0.5, 0.5),
        Point::new(0.013, 0.97),
        Point::new(0.3, 0.71),
        Point::new(0.99, 0.0),
    ];
    for c in centers {
        for r in [0.01, 0.05, 0.123, 0.25, 0.5] {
            assert_eq!(
                ball_energy(&u, c, r).unwrap(),
                brute_ball_sum(&g, &e, c, r),
                "c={c:?} r={r}"
            );
        }
    }
}

#[test]
fn ball_energy_on_rectangular_and_circle_grids() {
    let g = Grid::torus(48, 32, 1.5, 1.0).unwrap();
    let u = maps::smooth_random_field(&g, &s2(), 2, 4).unwrap();
    let e = u.energy_density();
    for r in [0.07, 0.3, 0.5] {
        let c = Point::new(1.4, 0.1);
        assert_eq!(ball_energy(&u, c, r).unwrap(), brute_ball_sum(&g, &e, c, r));
    }
    let g = Grid::circle(64, std::f64::consts::TAU).unwrap();
    let u = maps::latitude_circle(&g, 1.0).unwrap();
    let e = u.energy_density();
    let c = Point::new(0.2, 0.0);
    assert_eq!(ball_energy(&u, c, 1.0).unwrap(), brute_ball_sum(&g, &e, c, 1.0));
}

#[test]
fn integrate_matches_sequential_sum_bitwise() {
    for n in [16, 33, 64] {
        let g = Grid::torus(n, n + 3, 1.0, 0.7).unwrap();
        let u = maps::smooth_random_field(&g, &s2(), 3, n as u64).unwrap();
        let e = u.energy_density();
        assert_eq!(g.integrate(&e), brute_integral(&g, &e));
    }
}

#[test]
fn concentration_function_matches_brute_force() {
    let g = Grid::unit_torus(32).unwrap();
    let u = maps::planted_bubble(&g, Point::new(0.4, 0.6), 0.1).unwrap();
    let e = u.energy_density();
    for r in [0.05, 0.11, 0.2] {
        let (v, p) = concentration_function(&u, r).unwrap();
        let (bv, bk) = brute_concentration(&g, &e, r);
        assert!((v - bv).abs() <= 1e-12 * bv, "{v} vs {bv}");
        assert_eq!(p, g.position(bk));
    }
}

#[test]
fn detected_radius_matches_radial_scan() {
    let g = Grid::unit_torus(64).unwrap();
    let u = maps::planted_bubble(&g, g.center(), 0.1).unwrap();
    let cfg = AnalysisConfig {
        eps0: 16.0,
        big_r: 2.0,
        ..AnalysisConfig::default()
    };
    let b = detect_bubble(&u, &cfg).unwrap().unwrap();
    let e = u.energy_density();
    let r = radial_scan(&g, &e, cfg.eps0 / 2.0, cfg.r0);
    assert!((b.radius - r).abs() <= 1e-6 * cfg.eps0, "{} vs {r}", b.radius);
    let q = brute_concentration(&g, &e, b.radius).0;
    assert!((q - cfg.eps0 / 2.0).abs() <= 1e-6 * cfg.eps0);
}

#[test]
fn planted_bubble_quadrature_approaches_8pi() {
    // analytic bubble energy within B_s is 8π s²/(ρ² + s²)
    let rho = 0.03;
    let s = 0.2;
    let exact = maps::bubble_ball_energy(s, rho);
    assert!((exact - 8.0 * std::f64::consts::PI * s * s / (rho * rho + s * s)).abs() < 1e-12);
    let mut errs = Vec::new();
    for n in [128, 256, 512] {
        let g = Grid::unit_torus(n).unwrap();
        let u = maps::planted_bubble(&g, g.center(), rho).unwrap();
        errs.push((ball_energy(&u, g.center(), s).unwrap() - exact).abs() / exact);
    }
    assert!(errs[2] < 2e-3, "{errs:?}");
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}
