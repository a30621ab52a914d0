//! Cross-module invariants checked against independent oracles.

use std::f64::consts::PI;

use ecap_core::oscillation::{DEFAULT_N_BOUNDARY, DEFAULT_N_RADIAL};
use ecap_core::{
    criterion_scan, l_oscillation, make_swiss_cheese, with_threads, CenterSpec, CompactSetMask, Disc,
    EllipticOperator, GridFunction, GridSpec, ScanConfig, C64,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Laplacian, Bitsadze and three random elliptic operators.
fn five_operators() -> Vec<EllipticOperator> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut ops = vec![EllipticOperator::laplacian(), EllipticOperator::bitsadze()];
    while ops.len() < 5 {
        let mut z = |s: f64| c(rng.gen_range(-s..s), rng.gen_range(-s..s));
        if let Ok(op) = EllipticOperator::new(c(1.0, 0.0) + z(0.3), z(0.6), c(1.0, 0.0) + z(0.6)) {
            ops.push(op);
        }
    }
    ops
}

/// `𝓛φ` for `φ(x) = (1 − |x−b|²/R²)^6`.
fn l_of_bump(op: &EllipticOperator, x: C64, b: C64, r: f64) -> C64 {
    let d = x - b;
    let q = d.norm_sqr() / (r * r);
    if q >= 1.0 {
        return c(0.0, 0.0);
    }
    let g1 = -6.0 * (1.0 - q).powi(5);
    let g2 = 30.0 * (1.0 - q).powi(4);
    let hess = |i: f64, j: f64, same: bool| g2 * 4.0 * i * j / r.powi(4) + if same { g1 * 2.0 / (r * r) } else { 0.0 };
    op.c11 * hess(d.re, d.re, true) + op.c12 * (2.0 * hess(d.re, d.im, false)) + op.c22 * hess(d.im, d.im, true)
}

/// `⟨Φ, 𝓛φ⟩` in polar coordinates about the origin: trapezoid rule in the
/// angle and two-point Gauss–Legendre panels in `u`, `ρ = ρ_max u³`.
fn pairing(op: &EllipticOperator, b: C64, r: f64) -> C64 {
    let rho_max = b.norm() + r;
    let (n_u, n_theta) = (1200, 720);
    let g = 0.5 / 3f64.sqrt();
    let mut acc = c(0.0, 0.0);
    for k in 0..n_u {
        for t in [0.5 - g, 0.5 + g] {
            let u = (k as f64 + t) / n_u as f64;
            let rho = rho_max * u * u * u;
            let jac = rho * 3.0 * rho_max * u * u / n_u as f64 * 0.5;
            let mut ring = c(0.0, 0.0);
            for j in 0..n_theta {
                let x = C64::from_polar(rho, 2.0 * PI * j as f64 / n_theta as f64);
                let l = l_of_bump(op, x, b, r);
                if l != c(0.0, 0.0) {
                    ring += op.phi(x).unwrap() * l;
                }
            }
            acc += ring * (2.0 * PI / n_theta as f64) * jac;
        }
    }
    acc
}

#[test]
fn fundamental_solution_identity() {
    for op in five_operators() {
        for (b, r) in [(c(0.0, 0.0), 1.0), (c(0.2, -0.1), 0.5)] {
            let q = (b.norm() / r).powi(2);
            let want = (1.0 - q).powi(6);
            let got = pairing(&op, b, r);
            assert!((got - want).norm() <= 1e-6, "{:?}: {got} vs {want}", op.coefficients());
        }
    }
}

#[test]
fn kernel_growth_is_scale_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for op in five_operators() {
        let bound = op.kernel_bound();
        let mut per_annulus = Vec::new();
        for k in -10..10 {
            let mut best = 0.0f64;
            for _ in 0..500 {
                let z = C64::from_polar(2f64.powf(k as f64 + rng.gen::<f64>()), rng.gen_range(-PI..PI));
                let (k1, k2) = op.kernels(z).unwrap();
                best = best.max(k1.norm().max(k2.norm()) * z.norm());
            }
            per_annulus.push(best);
        }
        let hi = per_annulus.iter().copied().fold(0.0, f64::max);
        let lo = per_annulus.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(hi <= 1.01 * bound, "{hi} > {bound}");
        assert!(hi / lo <= 1.01, "{hi} / {lo}");
    }
}

/// Random polynomial of degree ≤ 4 annihilated by `op`.
fn l_polynomial<'a>(op: &'a EllipticOperator, rng: &mut ChaCha8Rng) -> impl Fn(C64) -> C64 + Sync + 'a {
    let mut coef = || c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let a: Vec<C64> = (0..5).map(|_| coef()).collect();
    let b: Vec<C64> = (0..5).map(|_| coef()).collect();
    move |z| {
        let w = op.coords(z);
        let mut s = c(0.0, 0.0);
        for m in 0..5 {
            s += if op.repeated {
                a[m] * w.z2.powu(m as u32) + b[m] * w.z1 * w.z2.powu(m as u32)
            } else {
                a[m] * w.z1.powu(m as u32) + b[m] * w.z2.powu(m as u32)
            };
        }
        s
    }
}

#[test]
fn oscillation_vanishes_on_l_analytic_polynomials() {
    let grid = GridSpec::square(-1.0, 1.0, 1.0 / 128.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for op in five_operators() {
        let p = l_polynomial(&op, &mut rng);
        let f = GridFunction::from_fn(grid, &p).with_fd_gradients();
        let (g1, g2) = f.gradients().unwrap();
        for _ in 0..100 {
            let center = c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let disc = Disc::new(center, rng.gen_range(0.05..0.4)).unwrap();
            let mut norm = 0.0f64;
            for iy in 0..grid.ny {
                for ix in 0..grid.nx {
                    if disc.contains(grid.point(ix, iy)) {
                        let k = grid.index(ix, iy);
                        let grad = (g1[k].norm_sqr() + g2[k].norm_sqr()).sqrt();
                        norm = norm.max(f.values[k].norm()).max(grad);
                    }
                }
            }
            let o = l_oscillation(&op, &f, &disc, DEFAULT_N_BOUNDARY, DEFAULT_N_RADIAL).unwrap();
            assert!(o.norm() <= 1e-6 * norm, "{o} vs {norm}");
        }
    }
}

fn sets(h: f64) -> Vec<CompactSetMask> {
    let outer = Disc::new(c(0.0, 0.0), 0.75).unwrap();
    vec![CompactSetMask::disc(&outer, h).unwrap(), make_swiss_cheese(9, &outer, 4, 0.2, h).unwrap()]
}

#[test]
fn scanner_verdicts_for_a_general_operator() {
    let op = EllipticOperator::new(c(1.0, 0.2), c(0.3, -0.1), c(1.5, 0.0)).unwrap();
    let h = 1.0 / 128.0;
    let grid = GridSpec::square(-1.25, 1.25, h).unwrap();
    let analytic = GridFunction::from_fn(grid, |z| {
        let w = op.coords(z);
        w.z1.exp() + w.z2 * w.z2 * w.z2
    });
    let singular = GridFunction::from_fn(grid, |z| c(z.norm_sqr(), 0.0));
    let radii = vec![0.25, 0.3125];
    for x in sets(h) {
        let rep = criterion_scan(&op, &analytic, &x, &ScanConfig::new(radii.clone(), CenterSpec::InSet { step: 0.25 })).unwrap();
        assert!(rep.records.iter().all(|r| r.vanishing && r.ratio_lower.finite() == Some(0.0)));
        let rep = criterion_scan(&op, &singular, &x, &ScanConfig::new(radii.clone(), CenterSpec::Deep { step: 0.125 })).unwrap();
        assert!(!rep.records.is_empty());
        assert!(rep.records.iter().all(|r| r.ratio_lower.is_infinite()));
    }
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let op = EllipticOperator::bitsadze();
    let h = 1.0 / 128.0;
    let grid = GridSpec::square(-1.5, 1.5, h).unwrap();
    let f = GridFunction::from_fn(grid, |z| c((3.0 * z.re).sin() * z.im, z.norm_sqr()));
    let x = &sets(h)[1];
    let mut cfg = ScanConfig::new(vec![0.25, 0.375], CenterSpec::InSet { step: 0.25 });
    cfg.k = 1.5;
    let one = with_threads(1, || criterion_scan(&op, &f, x, &cfg).unwrap().to_json_string().unwrap());
    let again = with_threads(1, || criterion_scan(&op, &f, x, &cfg).unwrap().to_json_string().unwrap());
    let three = with_threads(3, || criterion_scan(&op, &f, x, &cfg).unwrap().to_json_string().unwrap());
    assert_eq!(one, again);
    assert_eq!(one, three);
}
