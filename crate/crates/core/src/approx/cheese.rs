//! Seeded Swiss-cheese sets: a closed disc minus disjoint open discs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mask::{disc_grid, CompactSetMask, Construction};
use crate::error::{Error, Result};
use crate::oscillation::Disc;
use crate::C64;

pub const MAX_PLACEMENT_RETRIES: usize = 10_000;
/// Minimum separation, in cells, between holes and from the outer rim.
pub const HOLE_GAP_CELLS: f64 = 4.0;

/// Places `n_holes` holes of radius `hole_scale·R·(1+u)/2`, `u` uniform in
/// `[0, 1)`, uniformly inside `outer`, redrawing any hole that comes within
/// [`HOLE_GAP_CELLS`] cells of the rim or of an earlier hole. The set is
/// rastered on [`disc_grid`] with spacing `spacing`.
pub fn make_swiss_cheese(seed: u64, outer: &Disc, n_holes: usize, hole_scale: f64, spacing: f64) -> Result<CompactSetMask> {
    if !(hole_scale > 0.0 && hole_scale < 1.0) {
        return Err(Error::InvalidParameter(format!("hole_scale {hole_scale} not in (0, 1)")));
    }
    let grid = disc_grid(outer, spacing)?;
    let big_r = outer.radius;
    if n_holes > 0 && hole_scale * big_r / 2.0 < 2.0 * spacing {
        return Err(Error::InvalidParameter("smallest possible hole spans fewer than 2 cells".into()));
    }
    let gap = HOLE_GAP_CELLS * spacing;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut holes: Vec<Disc> = Vec::with_capacity(n_holes);
    for _ in 0..n_holes {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_RETRIES {
            let r = hole_scale * big_r * (1.0 + rng.gen::<f64>()) / 2.0;
            let reach = big_r - r - gap;
            if reach <= 0.0 {
                continue;
            }
            let rho = reach * rng.gen::<f64>().sqrt();
            let theta = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            let center = outer.center + C64::from_polar(rho, theta);
            if holes.iter().all(|o| (o.center - center).norm() >= o.radius + r + gap) {
                holes.push(Disc { center, radius: r });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PlacementFailed(MAX_PLACEMENT_RETRIES));
        }
    }
    let r2 = big_r * big_r;
    let mask = CompactSetMask::from_fn(grid, |z| {
        (z - outer.center).norm_sqr() <= r2 && holes.iter().all(|o| (z - o.center).norm_sqr() >= o.radius * o.radius)
    })?;
    Ok(mask.with_construction(Construction { seed, outer: *outer, holes }))
}
