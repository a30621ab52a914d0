//! Mollifier `φ_δ` and the lattice δ-partition of unity `{φ_j}` with its
//! smoothed indices `ψ_j = φ_δ * φ_δ * φ_j`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec, Patch};
use crate::C64;

/// `φ₁(x) = (3/π)(1 − |x|²)²` on the unit disc; unit mass, even, C¹.
#[inline]
pub fn phi1(x: C64) -> f64 {
    let s = 1.0 - x.norm_sqr();
    if s > 0.0 {
        3.0 / PI * s * s
    } else {
        0.0
    }
}

/// Samples of `φ_δ(x) = φ₁(x/δ)/δ²` on the lattice `hℤ²` centered at the
/// origin, rescaled so that the discrete mass `Σ φ_δ h²` is exactly 1.
/// Returned as a patch with offsets `−M..=M`, `M = ⌈δ/h⌉`.
pub fn mollifier_patch(delta: f64, h: f64) -> Result<Patch> {
    if !(delta > 0.0 && delta.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("mollifier delta = {delta}, spacing = {h}")));
    }
    let m = (delta / h).ceil() as i64;
    let w = (2 * m + 1) as usize;
    let mut values = Vec::with_capacity(w * w);
    for j in -m..=m {
        for i in -m..=m {
            values.push(phi1(C64::new(i as f64 * h, j as f64 * h) / delta) / (delta * delta));
        }
    }
    let mass: f64 = crate::summation::compensated_sum(values.iter().map(|v| v * h * h));
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} below the grid spacing {h}")));
    }
    values.iter_mut().for_each(|v| *v /= mass);
    Ok(Patch { ix0: -m, iy0: -m, w, h: w, values })
}

/// `φ_δ` as a grid function on a stencil grid of the given spacing centered
/// at the origin.
pub fn mollifier(delta: f64, grid: &GridSpec) -> Result<GridFunction> {
    let h = grid.spacing;
    let p = mollifier_patch(delta, h)?;
    let origin = C64::new(p.ix0 as f64 * h, p.iy0 as f64 * h);
    let g = GridSpec::new(origin, h, p.w, p.h)?;
    GridFunction::new(g, p.values.into_iter().map(|v| C64::new(v, 0.0)).collect())
}

/// Unnormalized bump `(1 − |d|²/δ²)⁴` and its gradient. The partition
/// needs only C¹, but the smoothness of `φ_j` carries over to `ψ_j`
/// (the mollification is discrete), and C³ keeps grid quadratures of
/// `∇ψ_j` at high order.
#[inline]
fn bump(d: C64, delta: f64) -> (f64, C64) {
    let s = 1.0 - d.norm_sqr() / (delta * delta);
    if s > 0.0 {
        let s3 = s * s * s;
        (s3 * s, d * (-8.0 * s3 / (delta * delta)))
    } else {
        (0.0, C64::new(0.0, 0.0))
    }
}

/// `S(d) = Σ_e b(d − eδ)` over the lattice, with `d` relative to a lattice point.
#[inline]
fn shepard_sum(d: C64, delta: f64) -> (f64, C64) {
    let (mut s, mut g) = (0.0, C64::new(0.0, 0.0));
    for ey in -2..=2 {
        for ex in -2..=2 {
            let (b, db) = bump(d - C64::new(ex as f64 * delta, ey as f64 * delta), delta);
            s += b;
            g += db;
        }
    }
    (s, g)
}

/// `φ_j` at displacement `d = x − a_j`, with its gradient.
#[inline]
fn partition_bump(d: C64, delta: f64) -> (f64, C64) {
    let (b, db) = bump(d, delta);
    if b == 0.0 {
        return (0.0, C64::new(0.0, 0.0));
    }
    let (s, ds) = shepard_sum(d, delta);
    (b / s, (db * s - ds * b) / (s * s))
}

/// Samples of one cell relative to the lattice node `(bx, by)` nearest
/// below its center; shared by all cells with the same sub-cell offset.
#[derive(Debug)]
struct Template {
    phi: Patch,
    psi: Patch,
    psi_dx: Patch,
    psi_dy: Patch,
    max_grad: f64,
}

/// `ψ_j` with its Cartesian gradient, on the host lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedBump {
    pub center: C64,
    pub values: Patch,
    pub dx: Patch,
    pub dy: Patch,
}

#[derive(Debug, Clone)]
pub struct PartitionCell {
    pub index: (i64, i64),
    pub center: C64,
    base: (i64, i64),
    template: Arc<Template>,
}

impl PartitionCell {
    pub fn phi(&self) -> Patch {
        self.template.phi.translated(self.base.0, self.base.1)
    }

    pub fn psi(&self) -> Patch {
        self.template.psi.translated(self.base.0, self.base.1)
    }

    pub fn smoothed(&self) -> SmoothedBump {
        let (bx, by) = self.base;
        SmoothedBump {
            center: self.center,
            values: self.template.psi.translated(bx, by),
            dx: self.template.psi_dx.translated(bx, by),
            dy: self.template.psi_dy.translated(bx, by),
        }
    }
}

/// Lattice δ-partition of unity on a grid.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    pub delta: f64,
    pub grid: GridSpec,
    /// Covered rectangle `[lo, hi]`.
    pub bbox: (C64, C64),
    pub cells: Vec<PartitionCell>,
    lookup: HashMap<(i64, i64), usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionStats {
    pub cells: usize,
    pub templates: usize,
    /// `max ‖∇φ_j‖·δ` over all samples.
    pub gradient_constant: f64,
}

/// Builds the partition: centers `a_j = (j₁δ, j₂δ)` for every `j` whose disc
/// `B(a_j, δ)` meets `bbox`, Shepard-normalized bumps over the full lattice
/// (so `Σ φ_j ≡ 1` on `bbox`), and `ψ_j` by two discrete convolutions with
/// the mollifier.
pub fn build_partition(bbox: (C64, C64), delta: f64, grid: &GridSpec) -> Result<PartitionOfUnity> {
    let (lo, hi) = bbox;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta = {delta}")));
    }
    let side = (hi.re - lo.re).min(hi.im - lo.im);
    if !(side >= 4.0 * delta) {
        return Err(Error::BoxTooSmall { side, min: 4.0 * delta });
    }
    let h = grid.spacing;
    let moll = mollifier_patch(delta, h)?;
    let rho = self_convolve(&moll, h);
    let reach = (delta / h).ceil() as i64 + 1;
    let mut templates: HashMap<(i64, i64), Arc<Template>> = HashMap::new();
    let mut cells = Vec::new();
    let mut lookup = HashMap::new();
    let j1 = ((lo.re / delta).floor() as i64 - 1)..=((hi.re / delta).ceil() as i64 + 1);
    for j2 in ((lo.im / delta).floor() as i64 - 1)..=((hi.im / delta).ceil() as i64 + 1) {
        for j1 in j1.clone() {
            let a = C64::new(j1 as f64 * delta, j2 as f64 * delta);
            let gap = C64::new((lo.re - a.re).max(a.re - hi.re).max(0.0), (lo.im - a.im).max(a.im - hi.im).max(0.0));
            if gap.norm() >= delta {
                continue;
            }
            let (cx, cy) = grid.to_lattice(a);
            let (bx, by) = (cx.floor(), cy.floor());
            let frac = (cx - bx, cy - by);
            let key = ((frac.0 * 1048576.0).round() as i64, (frac.1 * 1048576.0).round() as i64);
            let template = templates
                .entry(key)
                .or_insert_with(|| Arc::new(make_template(frac, reach, delta, h, &rho)))
                .clone();
            lookup.insert((j1, j2), cells.len());
            cells.push(PartitionCell { index: (j1, j2), center: a, base: (bx as i64, by as i64), template });
        }
    }
    Ok(PartitionOfUnity { delta, grid: *grid, bbox, cells, lookup })
}

/// Discrete self-convolution of mollifier weights `φ_δ h²`; the result is a
/// weight patch (sums to 1) with offsets `−2M..=2M`.
fn self_convolve(p: &Patch, h: f64) -> Patch {
    let m = -p.ix0;
    let w = (4 * m + 1) as usize;
    let mut out = vec![0.0; w * w];
    let h2 = h * h;
    for j in 0..p.h {
        for i in 0..p.w {
            let a = p.values[j * p.w + i] * h2;
            if a == 0.0 {
                continue;
            }
            for l in 0..p.h {
                for k in 0..p.w {
                    out[(j + l) * w + i + k] += a * p.values[l * p.w + k] * h2;
                }
            }
        }
    }
    Patch { ix0: -2 * m, iy0: -2 * m, w, h: w, values: out }
}

fn make_template(frac: (f64, f64), reach: i64, delta: f64, h: f64, rho: &Patch) -> Template {
    // phi on offsets -reach..=reach+1 from the base node
    let w = (2 * reach + 2) as usize;
    let mut phi = vec![0.0; w * w];
    let mut grad = vec![C64::new(0.0, 0.0); w * w];
    let mut max_grad = 0.0f64;
    for j in 0..w {
        for i in 0..w {
            let d = C64::new((i as f64 - reach as f64 - frac.0) * h, (j as f64 - reach as f64 - frac.1) * h);
            let (v, g) = partition_bump(d, delta);
            phi[j * w + i] = v;
            grad[j * w + i] = g;
            max_grad = max_grad.max(g.norm());
        }
    }
    let phi = Patch { ix0: -reach, iy0: -reach, w, h: w, values: phi };
    let gx = Patch { values: grad.iter().map(|g| g.re).collect(), ..phi.clone() };
    let gy = Patch { values: grad.iter().map(|g| g.im).collect(), ..phi.clone() };
    Template {
        psi: convolve_patch(rho, &phi),
        psi_dx: convolve_patch(rho, &gx),
        psi_dy: convolve_patch(rho, &gy),
        phi,
        max_grad: max_grad * delta,
    }
}

/// `(k * p)(i) = Σ_k k(k)·p(i − k)` for a weight patch `k`.
fn convolve_patch(k: &Patch, p: &Patch) -> Patch {
    let w = k.w + p.w - 1;
    let hh = k.h + p.h - 1;
    let mut out = vec![0.0; w * hh];
    for j in 0..p.h {
        for i in 0..p.w {
            let a = p.values[j * p.w + i];
            if a == 0.0 {
                continue;
            }
            for l in 0..k.h {
                let row = &k.values[l * k.w..(l + 1) * k.w];
                let dst = &mut out[(j + l) * w + i..(j + l) * w + i + k.w];
                for (d, kv) in dst.iter_mut().zip(row) {
                    *d += a * kv;
                }
            }
        }
    }
    Patch { ix0: k.ix0 + p.ix0, iy0: k.iy0 + p.iy0, w, h: hh, values: out }
}

impl PartitionOfUnity {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, index: (i64, i64)) -> Option<&PartitionCell> {
        self.lookup.get(&index).map(|&k| &self.cells[k])
    }

    /// `φ_j(x)` evaluated from the closed form.
    pub fn phi_at(&self, index: (i64, i64), x: C64) -> f64 {
        let a = C64::new(index.0 as f64 * self.delta, index.1 as f64 * self.delta);
        partition_bump(x - a, self.delta).0
    }

    /// `Σ_j φ_j(x)` over the stored cells.
    pub fn sum_at(&self, x: C64) -> f64 {
        let (fx, fy) = ((x.re / self.delta).floor() as i64, (x.im / self.delta).floor() as i64);
        let mut s = 0.0;
        for j2 in fy - 1..=fy + 2 {
            for j1 in fx - 1..=fx + 2 {
                if self.lookup.contains_key(&(j1, j2)) {
                    s += self.phi_at((j1, j2), x);
                }
            }
        }
        s
    }

    /// `Σ_j ψ_j` on the host grid.
    pub fn psi_sum(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for cell in &self.cells {
            for (ix, iy, v) in cell.psi().iter_on(&self.grid) {
                out[self.grid.index(ix, iy)] += v;
            }
        }
        out
    }

    /// Whether `x` lies in the region where `Σ_j ψ_j = 1`, i.e. `bbox`
    /// shrunk by `2δ`.
    pub fn psi_covers(&self, x: C64) -> bool {
        let m = 2.0 * self.delta;
        let (lo, hi) = self.bbox;
        x.re >= lo.re + m && x.re <= hi.re - m && x.im >= lo.im + m && x.im <= hi.im - m
    }

    pub fn stats(&self) -> PartitionStats {
        let mut ptrs: Vec<*const Template> = self.cells.iter().map(|c| Arc::as_ptr(&c.template)).collect();
        ptrs.sort();
        ptrs.dedup();
        PartitionStats {
            cells: self.cells.len(),
            templates: ptrs.len(),
            gradient_constant: self.cells.iter().map(|c| c.template.max_grad).fold(0.0, f64::max),
        }
    }
}
