//! Capacity intervals of rasterized regions.
//!
//! The lower end is the curvature bound of an arclength measure on the
//! region's boundary curves; the upper end is the diameter of the union of
//! its cells. Both hold only up to the unspecified absolute constants
//! relating the curvature bound, the diameter and the capacity.

use std::collections::BTreeMap;

use super::mask::CompactSetMask;
use crate::menger::{capacity_lower_bound, DiscreteMeasure};
use crate::C64;

/// Arclength-uniform samples per boundary curve.
pub const POINTS_PER_CURVE: usize = 64;

type Node = (i64, i64);

/// Closed boundary polylines of the occupied cells, traced by marching
/// squares through the midpoints between occupied and empty samples.
/// Diagonally touching cells are treated as connected.
pub fn boundary_curves(region: &CompactSetMask) -> Vec<Vec<C64>> {
    let g = region.grid;
    let occ = |i: i64, j: i64| region.occupied(i, j);
    // Edge midpoints in doubled lattice coordinates.
    let mut adj: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
    let mut link = |a: Node, b: Node| {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    };
    for j in -1..g.ny as i64 {
        for i in -1..g.nx as i64 {
            let (bl, br, tr, tl) = (occ(i, j), occ(i + 1, j), occ(i + 1, j + 1), occ(i, j + 1));
            let bottom = (2 * i + 1, 2 * j);
            let right = (2 * i + 2, 2 * j + 1);
            let top = (2 * i + 1, 2 * j + 2);
            let left = (2 * i, 2 * j + 1);
            let mut cut = Vec::with_capacity(4);
            if bl != br {
                cut.push(bottom);
            }
            if br != tr {
                cut.push(right);
            }
            if tr != tl {
                cut.push(top);
            }
            if tl != bl {
                cut.push(left);
            }
            match cut.len() {
                2 => link(cut[0], cut[1]),
                4 if bl => {
                    link(bottom, right);
                    link(top, left);
                }
                4 => {
                    link(bottom, left);
                    link(top, right);
                }
                _ => {}
            }
        }
    }
    let to_point = |n: Node| g.origin + C64::new(n.0 as f64, n.1 as f64) * (g.spacing / 2.0);
    let mut curves = Vec::new();
    let mut visited: BTreeMap<Node, bool> = adj.keys().map(|&k| (k, false)).collect();
    for &start in adj.keys() {
        if visited[&start] {
            continue;
        }
        let mut loop_pts = vec![to_point(start)];
        visited.insert(start, true);
        let (mut prev, mut cur) = (start, adj[&start][0]);
        while cur != start {
            visited.insert(cur, true);
            loop_pts.push(to_point(cur));
            let nb = &adj[&cur];
            let next = if nb[0] == prev { nb[1] } else { nb[0] };
            prev = cur;
            cur = next;
        }
        curves.push(loop_pts);
    }
    curves
}

/// `n` points at arclength positions `(k + ½)L/n` on a closed polyline,
/// each carrying weight `L/n`.
fn resample(curve: &[C64], n: usize) -> (Vec<C64>, f64) {
    let m = curve.len();
    let seg: Vec<f64> = (0..m).map(|k| (curve[(k + 1) % m] - curve[k]).norm()).collect();
    let total: f64 = seg.iter().sum();
    let step = total / n as f64;
    let mut out = Vec::with_capacity(n);
    let (mut k, mut start) = (0, 0.0);
    for s in 0..n {
        let target = (s as f64 + 0.5) * step;
        while k + 1 < m && start + seg[k] < target {
            start += seg[k];
            k += 1;
        }
        let t = if seg[k] > 0.0 { ((target - start) / seg[k]).clamp(0.0, 1.0) } else { 0.0 };
        out.push(curve[k] + (curve[(k + 1) % m] - curve[k]) * t);
    }
    (out, step)
}

/// Arclength measure on the boundary curves, `points_per_curve` atoms per
/// curve; `None` for an empty region.
pub fn boundary_measure(region: &CompactSetMask, points_per_curve: usize) -> Option<DiscreteMeasure> {
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    for curve in boundary_curves(region) {
        let (p, w) = resample(&curve, points_per_curve.max(1));
        ws.extend(std::iter::repeat(w).take(p.len()));
        pts.extend(p);
    }
    if pts.is_empty() {
        return None;
    }
    DiscreteMeasure::new(pts, ws).ok()
}

/// Diameter of the union of occupied cells, from the convex hull of the
/// corners of its boundary cells.
pub fn raster_diameter(region: &CompactSetMask) -> f64 {
    let g = region.grid;
    let half = g.spacing / 2.0;
    let mut corners = Vec::new();
    for iy in 0..g.ny as i64 {
        for ix in 0..g.nx as i64 {
            let edge = region.occupied(ix, iy)
                && [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(dx, dy)| !region.occupied(ix + dx, iy + dy));
            if edge {
                let p = g.lattice_point(ix, iy);
                for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                    corners.push((p.re + sx * half, p.im + sy * half));
                }
            }
        }
    }
    let hull = convex_hull(corners);
    let mut d2 = 0.0f64;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            d2 = d2.max((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2));
        }
    }
    d2.sqrt()
}

/// Andrew's monotone chain; collinear points are dropped.
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite corners"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// `(lower, upper)` capacity interval of a rasterized region; `(0, 0)` when
/// it is empty. A lower end above the upper one is clamped with a warning.
pub fn capacity_interval(region: &CompactSetMask) -> (f64, f64) {
    let Some(mu) = boundary_measure(region, POINTS_PER_CURVE) else {
        return (0.0, 0.0);
    };
    let upper = raster_diameter(region);
    let lower = capacity_lower_bound(&mu).unwrap_or(0.0);
    if lower > upper {
        log::warn!("capacity lower bound {lower:.6e} exceeds diameter {upper:.6e}; clamped");
        return (upper, upper);
    }
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::mask::disc_grid;
    use crate::grid::GridSpec;
    use crate::oscillation::Disc;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn disc_mask(r: f64, h: f64) -> CompactSetMask {
        CompactSetMask::disc(&Disc::new(c(0.2, -0.3), r).unwrap(), h).unwrap()
    }

    #[test]
    fn single_cell() {
        let g = GridSpec::new(c(0.0, 0.0), 0.1, 5, 5).unwrap();
        let mut occ = vec![false; 25];
        occ[g.index(2, 2)] = true;
        let m = CompactSetMask::new(g, occ).unwrap();
        let curves = boundary_curves(&m);
        assert_eq!(curves.len(), 1);
        assert_eq!(curves[0].len(), 4);
        let (lo, up) = capacity_interval(&m);
        assert!((up - 0.1 * 2f64.sqrt()).abs() < 1e-12);
        assert!(lo > 0.0 && lo <= up);
    }

    #[test]
    fn empty_region() {
        let g = GridSpec::new(c(0.0, 0.0), 0.1, 5, 5).unwrap();
        assert_eq!(capacity_interval(&CompactSetMask::raw(g, vec![false; 25])), (0.0, 0.0));
    }

    #[test]
    fn disc_interval_brackets_radius() {
        // The arclength measure on a circle of radius r has A₀ = π and
        // c² = 8π³r, so the curvature bound is r; the diameter is 2r.
        for r in [0.25, 1.0] {
            let m = disc_mask(r, r / 64.0);
            let (lo, up) = capacity_interval(&m);
            assert!((lo - r).abs() < 0.05 * r, "{lo}");
            assert!((up - 2.0 * r).abs() < 0.05 * r, "{up}");
        }
    }

    #[test]
    fn boundary_curves_count_components() {
        let outer = Disc::new(c(0.0, 0.0), 1.0).unwrap();
        let grid = disc_grid(&outer, 1.0 / 32.0).unwrap();
        let m = CompactSetMask::from_fn(grid, |z| {
            z.norm() <= 1.0 && (z - c(0.4, 0.0)).norm() > 0.2 && (z + c(0.4, 0.0)).norm() > 0.2
        })
        .unwrap();
        let curves = boundary_curves(&m);
        assert_eq!(curves.len(), 3);
        let mu = boundary_measure(&m, 64).unwrap();
        assert_eq!(mu.len(), 192);
        let perimeter = 2.0 * std::f64::consts::PI * (1.0 + 0.2 + 0.2);
        assert!((mu.total() - perimeter).abs() < 0.1 * perimeter, "{}", mu.total());
    }

    #[test]
    fn resampling_is_arclength_uniform() {
        let square = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0)];
        let (pts, w) = resample(&square, 8);
        assert!((w - 0.5).abs() < 1e-15);
        assert!((pts[0] - c(0.25, 0.0)).norm() < 1e-15);
        assert!((pts[3] - c(1.0, 0.75)).norm() < 1e-15);
        assert!((pts[7] - c(0.0, 0.25)).norm() < 1e-15);
    }

    #[test]
    fn hull_diameter() {
        let pts = vec![(0.0, 0.0), (3.0, 0.0), (3.0, 4.0), (1.0, 1.0), (0.0, 4.0), (2.0, 2.0)];
        let hull = convex_hull(pts);
        assert_eq!(hull.len(), 4);
    }
}
