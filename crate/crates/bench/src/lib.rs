//! Seeded fixtures shared by the benchmarks in `benches/`.

use ecap_core::{DiscreteMeasure, GridFunction, GridSpec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` points uniform in `[-1, 1]²` with weights uniform in `[0.1, 1)`.
pub fn random_cloud(n: usize, seed: u64) -> DiscreteMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let ws = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    DiscreteMeasure::new(pts, ws).expect("positive weights")
}

/// Smooth bump supported in the disc of radius `0.3`, on `[-½, ½]²` with spacing `h`.
pub fn bump_on_grid(h: f64) -> GridFunction {
    let grid = GridSpec::square(-0.5, 0.5, h).expect("valid grid");
    GridFunction::from_fn(grid, |z| {
        let s = 1.0 - z.norm_sqr() / 0.09;
        let b = if s > 0.0 { s.powi(4) } else { 0.0 };
        C64::new(b * (1.0 + z.re), b * z.im)
    })
}
