//! Uniform axis-aligned sampling grids and complex grid functions.
//!
//! Samples are stored row-major: index `iy * nx + ix` holds the value at
//! `origin + (ix * h, iy * h)`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: C64,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(origin: C64, spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing {spacing}")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter("empty grid".into()));
        }
        Ok(Self { origin, spacing, nx, ny })
    }

    /// Square grid covering `[lo, hi]²` (both ends sampled) at spacing `h`.
    pub fn square(lo: f64, hi: f64, h: f64) -> Result<Self> {
        let n = ((hi - lo) / h).round() as usize + 1;
        Self::new(C64::new(lo, lo), h, n, n)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn point(&self, ix: usize, iy: usize) -> C64 {
        self.origin + C64::new(ix as f64 * self.spacing, iy as f64 * self.spacing)
    }

    /// Position of the (possibly out-of-range) lattice index `(ix, iy)`.
    #[inline]
    pub fn lattice_point(&self, ix: i64, iy: i64) -> C64 {
        self.origin + C64::new(ix as f64 * self.spacing, iy as f64 * self.spacing)
    }

    /// Upper-right corner of the sampled rectangle.
    pub fn far_corner(&self) -> C64 {
        self.point(self.nx - 1, self.ny - 1)
    }

    /// Whether the closed disc lies inside the sampled rectangle, shrunk by
    /// `margin` grid cells on every side.
    pub fn contains_disc(&self, center: C64, radius: f64, margin: usize) -> bool {
        let m = margin as f64 * self.spacing;
        let lo = self.origin;
        let hi = self.far_corner();
        center.re - radius >= lo.re + m
            && center.re + radius <= hi.re - m
            && center.im - radius >= lo.im + m
            && center.im + radius <= hi.im - m
    }

    /// Fractional lattice coordinates of `z`.
    #[inline]
    pub fn to_lattice(&self, z: C64) -> (f64, f64) {
        let d = (z - self.origin) / self.spacing;
        (d.re, d.im)
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
            && (self.origin - other.origin).norm() <= 1e-12 * self.spacing.max(1.0)
    }
}

/// Complex samples of a function on a [`GridSpec`], with optional samples of
/// its Cartesian partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: GridSpec,
    pub values: Vec<C64>,
    pub grad1: Option<Vec<C64>>,
    pub grad2: Option<Vec<C64>>,
    /// Width (in samples) of the boundary ring whose values are not valid,
    /// e.g. after applying a finite-difference stencil.
    pub invalid_margin: usize,
}

impl GridFunction {
    pub fn new(grid: GridSpec, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values, grad1: None, grad2: None, invalid_margin: 0 })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.len()], grad1: None, grad2: None, invalid_margin: 0 }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(C64) -> C64 + Sync) -> Self {
        let values = sample(&grid, &f);
        Self { grid, values, grad1: None, grad2: None, invalid_margin: 0 }
    }

    /// Samples `f` together with its partials `∂f/∂x₁`, `∂f/∂x₂`.
    pub fn from_fn_with_grad(
        grid: GridSpec,
        f: impl Fn(C64) -> C64 + Sync,
        d1: impl Fn(C64) -> C64 + Sync,
        d2: impl Fn(C64) -> C64 + Sync,
    ) -> Self {
        Self {
            grid,
            values: sample(&grid, &f),
            grad1: Some(sample(&grid, &d1)),
            grad2: Some(sample(&grid, &d2)),
            invalid_margin: 0,
        }
    }

    pub fn with_gradients(mut self, g1: Vec<C64>, g2: Vec<C64>) -> Result<Self> {
        if g1.len() != self.values.len() || g2.len() != self.values.len() {
            return Err(Error::Format("gradient length mismatch".into()));
        }
        self.grad1 = Some(g1);
        self.grad2 = Some(g2);
        Ok(self)
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> C64 {
        self.values[self.grid.index(ix, iy)]
    }

    pub fn has_gradients(&self) -> bool {
        self.grad1.is_some() && self.grad2.is_some()
    }

    pub fn gradients(&self) -> Result<(&[C64], &[C64])> {
        match (&self.grad1, &self.grad2) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::MissingGradients),
        }
    }

    /// Fills the gradient fields by second-order central differences
    /// (one-sided on the frame).
    pub fn with_fd_gradients(mut self) -> Self {
        let (g1, g2) = fd_gradient(&self.grid, &self.values);
        self.grad1 = Some(g1);
        self.grad2 = Some(g2);
        self
    }

    /// Bilinear interpolation; `None` outside the sampled rectangle.
    pub fn interpolate(&self, z: C64) -> Option<C64> {
        bilinear(&self.grid, &self.values, z)
    }

    /// Cubic-convolution interpolation (Keys, `a = −½`), exact on quadratics;
    /// falls back to bilinear within one cell of the frame.
    pub fn interpolate_cubic(&self, z: C64) -> Option<C64> {
        cubic(&self.grid, &self.values, z)
    }

    /// Sup norm of the samples.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max(‖f‖, ‖∇f‖)` over the samples, using the stored gradients or
    /// finite differences when none are stored.
    pub fn c1_norm(&self) -> f64 {
        let grad = match (&self.grad1, &self.grad2) {
            (Some(a), Some(b)) => grad_sup(a, b),
            _ => {
                let (a, b) = fd_gradient(&self.grid, &self.values);
                grad_sup(&a, &b)
            }
        };
        self.sup_norm().max(grad)
    }

    pub fn add_assign(&mut self, other: &GridFunction) -> Result<()> {
        if !self.grid.same_shape(&other.grid) {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += *b;
        }
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: GridFunctionJson = serde_json::from_str(text)?;
        raw.try_into()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(&GridFunctionJson::from(self))?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

fn grad_sup(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.norm_sqr() + y.norm_sqr()).sqrt())
        .fold(0.0, f64::max)
}

fn sample(grid: &GridSpec, f: &(impl Fn(C64) -> C64 + Sync)) -> Vec<C64> {
    (0..grid.len())
        .into_par_iter()
        .map(|k| f(grid.point(k % grid.nx, k / grid.nx)))
        .collect()
}

pub(crate) fn bilinear(grid: &GridSpec, values: &[C64], z: C64) -> Option<C64> {
    let (fx, fy) = grid.to_lattice(z);
    let maxx = (grid.nx - 1) as f64;
    let maxy = (grid.ny - 1) as f64;
    let eps = 1e-9;
    if !(fx >= -eps && fy >= -eps && fx <= maxx + eps && fy <= maxy + eps) {
        return None;
    }
    let fx = fx.clamp(0.0, maxx);
    let fy = fy.clamp(0.0, maxy);
    let ix = (fx.floor() as usize).min(grid.nx.saturating_sub(2));
    let iy = (fy.floor() as usize).min(grid.ny.saturating_sub(2));
    let tx = fx - ix as f64;
    let ty = fy - iy as f64;
    let v = |i: usize, j: usize| values[grid.index(i, j)];
    if grid.nx < 2 || grid.ny < 2 {
        return Some(v(ix, iy));
    }
    Some(
        v(ix, iy) * ((1.0 - tx) * (1.0 - ty))
            + v(ix + 1, iy) * (tx * (1.0 - ty))
            + v(ix, iy + 1) * ((1.0 - tx) * ty)
            + v(ix + 1, iy + 1) * (tx * ty),
    )
}

#[inline]
fn keys_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

pub(crate) fn cubic(grid: &GridSpec, values: &[C64], z: C64) -> Option<C64> {
    let (fx, fy) = grid.to_lattice(z);
    let ix = fx.floor();
    let iy = fy.floor();
    if ix < 1.0 || iy < 1.0 || ix + 2.0 > (grid.nx - 1) as f64 || iy + 2.0 > (grid.ny - 1) as f64 {
        return bilinear(grid, values, z);
    }
    let wx = keys_weights(fx - ix);
    let wy = keys_weights(fy - iy);
    let (ix, iy) = (ix as usize - 1, iy as usize - 1);
    let mut acc = C64::new(0.0, 0.0);
    for (b, wyb) in wy.iter().enumerate() {
        let row = &values[grid.index(ix, iy + b)..grid.index(ix, iy + b) + 4];
        let r = row[0] * wx[0] + row[1] * wx[1] + row[2] * wx[2] + row[3] * wx[3];
        acc += r * *wyb;
    }
    Some(acc)
}

/// Central-difference gradient of sampled values (one-sided on the frame).
pub fn fd_gradient(grid: &GridSpec, values: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let (nx, ny, h) = (grid.nx, grid.ny, grid.spacing);
    let d = |span: f64, a: C64, b: C64| (b - a) / span;
    let mut g1 = vec![C64::new(0.0, 0.0); nx * ny];
    let mut g2 = vec![C64::new(0.0, 0.0); nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let k = iy * nx + ix;
            if nx > 1 {
                let (lo, hi) = (ix.saturating_sub(1), (ix + 1).min(nx - 1));
                g1[k] = d((hi - lo) as f64 * h, values[iy * nx + lo], values[iy * nx + hi]);
            }
            if ny > 1 {
                let (lo, hi) = (iy.saturating_sub(1), (iy + 1).min(ny - 1));
                g2[k] = d((hi - lo) as f64 * h, values[lo * nx + ix], values[hi * nx + ix]);
            }
        }
    }
    (g1, g2)
}

#[derive(Serialize, Deserialize)]
struct GridFunctionJson {
    origin: [f64; 2],
    spacing: f64,
    nx: usize,
    ny: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g1re: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g1im: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g2re: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g2im: Option<Vec<f64>>,
}

fn split(v: &[C64]) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|c| c.re).collect(), v.iter().map(|c| c.im).collect())
}

fn join(re: Vec<f64>, im: Vec<f64>, n: usize, what: &str) -> Result<Vec<C64>> {
    if re.len() != n || im.len() != n {
        return Err(Error::Format(format!(
            "{what}: expected {n} real and imaginary samples, got {} and {}",
            re.len(),
            im.len()
        )));
    }
    Ok(re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect())
}

impl From<&GridFunction> for GridFunctionJson {
    fn from(f: &GridFunction) -> Self {
        let (re, im) = split(&f.values);
        let (g1re, g1im) = f.grad1.as_deref().map(split).unzip();
        let (g2re, g2im) = f.grad2.as_deref().map(split).unzip();
        Self {
            origin: [f.grid.origin.re, f.grid.origin.im],
            spacing: f.grid.spacing,
            nx: f.grid.nx,
            ny: f.grid.ny,
            re,
            im,
            g1re,
            g1im,
            g2re,
            g2im,
        }
    }
}

impl TryFrom<GridFunctionJson> for GridFunction {
    type Error = Error;

    fn try_from(raw: GridFunctionJson) -> Result<Self> {
        let grid = GridSpec::new(C64::new(raw.origin[0], raw.origin[1]), raw.spacing, raw.nx, raw.ny)
            .map_err(|e| Error::Format(e.to_string()))?;
        let n = grid.len();
        let values = join(raw.re, raw.im, n, "values")?;
        let mut f = GridFunction::new(grid, values)?;
        match (raw.g1re, raw.g1im, raw.g2re, raw.g2im) {
            (Some(a), Some(b), Some(c), Some(d)) => {
                f.grad1 = Some(join(a, b, n, "g1")?);
                f.grad2 = Some(join(c, d, n, "g2")?);
            }
            (None, None, None, None) => {}
            _ => return Err(Error::Format("gradient fields must be given all four or none".into())),
        }
        Ok(f)
    }
}

/// A rectangular window of samples on a host grid, addressed by lattice
/// indices that may extend past the host's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub ix0: i64,
    pub iy0: i64,
    pub w: usize,
    pub h: usize,
    pub values: Vec<f64>,
}

impl Patch {
    #[inline]
    pub fn get(&self, ix: i64, iy: i64) -> f64 {
        let (dx, dy) = (ix - self.ix0, iy - self.iy0);
        if dx < 0 || dy < 0 || dx >= self.w as i64 || dy >= self.h as i64 {
            0.0
        } else {
            self.values[dy as usize * self.w + dx as usize]
        }
    }

    pub fn translated(&self, dx: i64, dy: i64) -> Patch {
        Patch { ix0: self.ix0 + dx, iy0: self.iy0 + dy, ..self.clone() }
    }

    /// Iterates over `(ix, iy, value)` for in-frame samples of the host grid.
    pub fn iter_on<'a>(&'a self, grid: &'a GridSpec) -> impl Iterator<Item = (usize, usize, f64)> + 'a {
        (0..self.h).flat_map(move |j| {
            (0..self.w).filter_map(move |i| {
                let ix = self.ix0 + i as i64;
                let iy = self.iy0 + j as i64;
                if ix < 0 || iy < 0 || ix >= grid.nx as i64 || iy >= grid.ny as i64 {
                    None
                } else {
                    Some((ix as usize, iy as usize, self.values[j * self.w + i]))
                }
            })
        })
    }

    /// Expands to a full grid function (zero outside the window).
    pub fn to_grid_function(&self, grid: GridSpec) -> GridFunction {
        let mut f = GridFunction::zeros(grid);
        for (ix, iy, v) in self.iter_on(&grid) {
            f.values[grid.index(ix, iy)] = C64::new(v, 0.0);
        }
        f
    }
}
