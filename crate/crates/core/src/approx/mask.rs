//! Rasterized compact sets.
//!
//! A sample at lattice index `(ix, iy)` stands for the square cell of side
//! `h` centered on it.

use std::collections::VecDeque;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmDecoder, PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::oscillation::Disc;
use crate::C64;

/// Empty cells required between the occupied cells and the raster frame.
pub const FRAME_MARGIN: usize = 2;

/// Disc list of a generated Swiss-cheese set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    pub seed: u64,
    pub outer: Disc,
    pub holes: Vec<Disc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompactSetMask {
    pub grid: GridSpec,
    occupancy: Vec<bool>,
    construction: Option<Construction>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    origin: [f64; 2],
    spacing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    construction: Option<Construction>,
}

const NEIGHBOURS_4: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

impl CompactSetMask {
    /// Validated set: at least one occupied cell, all of them at least
    /// [`FRAME_MARGIN`] cells inside the frame.
    pub fn new(grid: GridSpec, occupancy: Vec<bool>) -> Result<Self> {
        if occupancy.len() != grid.len() {
            return Err(Error::Format(format!("expected {} cells, got {}", grid.len(), occupancy.len())));
        }
        let mask = Self::raw(grid, occupancy);
        let Some((x0, x1, y0, y1)) = mask.occupied_bbox() else {
            return Err(Error::InvalidParameter("mask has no occupied cell".into()));
        };
        let m = FRAME_MARGIN;
        if x0 < m || y0 < m || x1 + m >= grid.nx || y1 + m >= grid.ny {
            return Err(Error::InvalidParameter(format!("occupied cells must stay {m} cells inside the frame")));
        }
        Ok(mask)
    }

    /// Unvalidated mask; derived sets (boundaries, disc regions) may be empty.
    pub(crate) fn raw(grid: GridSpec, occupancy: Vec<bool>) -> Self {
        Self { grid, occupancy, construction: None }
    }

    pub fn from_fn(grid: GridSpec, inside: impl Fn(C64) -> bool) -> Result<Self> {
        let occ = (0..grid.ny)
            .flat_map(|iy| (0..grid.nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| inside(grid.point(ix, iy)))
            .collect();
        Self::new(grid, occ)
    }

    /// Closed disc rastered on [`disc_grid`].
    pub fn disc(outer: &Disc, spacing: f64) -> Result<Self> {
        let grid = disc_grid(outer, spacing)?;
        let r2 = outer.radius * outer.radius;
        Self::from_fn(grid, |z| (z - outer.center).norm_sqr() <= r2)
    }

    pub fn with_construction(mut self, c: Construction) -> Self {
        self.construction = Some(c);
        self
    }

    pub fn construction(&self) -> Option<&Construction> {
        self.construction.as_ref()
    }

    pub fn occupancy(&self) -> &[bool] {
        &self.occupancy
    }

    pub fn count(&self) -> usize {
        self.occupancy.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.occupancy.iter().any(|&b| b)
    }

    /// Area of the occupied cells.
    pub fn area(&self) -> f64 {
        self.count() as f64 * self.grid.spacing * self.grid.spacing
    }

    /// Occupancy of a lattice index; `false` outside the frame.
    #[inline]
    pub fn occupied(&self, ix: i64, iy: i64) -> bool {
        ix >= 0
            && iy >= 0
            && (ix as usize) < self.grid.nx
            && (iy as usize) < self.grid.ny
            && self.occupancy[iy as usize * self.grid.nx + ix as usize]
    }

    /// Lattice index of the cell containing `z`.
    #[inline]
    pub fn cell_of(&self, z: C64) -> (i64, i64) {
        let (x, y) = self.grid.to_lattice(z);
        (x.round() as i64, y.round() as i64)
    }

    /// Whether `z` lies in an occupied cell.
    pub fn contains(&self, z: C64) -> bool {
        let (ix, iy) = self.cell_of(z);
        self.occupied(ix, iy)
    }

    /// `(x0, x1, y0, y1)` inclusive index range of the occupied cells.
    pub fn occupied_bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut b: Option<(usize, usize, usize, usize)> = None;
        for iy in 0..self.grid.ny {
            for ix in 0..self.grid.nx {
                if self.occupancy[iy * self.grid.nx + ix] {
                    b = Some(match b {
                        None => (ix, ix, iy, iy),
                        Some((x0, x1, y0, y1)) => (x0.min(ix), x1.max(ix), y0.min(iy), y1.max(iy)),
                    });
                }
            }
        }
        b
    }

    fn map_cells(&self, keep: impl Fn(i64, i64) -> bool) -> CompactSetMask {
        let g = self.grid;
        let occ = (0..g.ny as i64).flat_map(|iy| (0..g.nx as i64).map(move |ix| (ix, iy))).map(|(ix, iy)| keep(ix, iy)).collect();
        Self::raw(g, occ)
    }

    fn is_boundary_cell(&self, ix: i64, iy: i64) -> bool {
        self.occupied(ix, iy) && NEIGHBOURS_4.iter().any(|(dx, dy)| !self.occupied(ix + dx, iy + dy))
    }

    /// `X°`: erosion by the 4-neighbourhood.
    pub fn interior(&self) -> CompactSetMask {
        self.map_cells(|ix, iy| self.occupied(ix, iy) && !self.is_boundary_cell(ix, iy))
    }

    /// `∂X`: occupied cells with an empty 4-neighbour.
    pub fn boundary(&self) -> CompactSetMask {
        self.map_cells(|ix, iy| self.is_boundary_cell(ix, iy))
    }

    /// Cells of the complement 4-connected to the raster frame.
    pub fn outer_complement(&self) -> Vec<bool> {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let mut seen = vec![false; nx * ny];
        let mut queue = VecDeque::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let frame = ix == 0 || iy == 0 || ix + 1 == nx || iy + 1 == ny;
                let k = iy * nx + ix;
                if frame && !self.occupancy[k] && !seen[k] {
                    seen[k] = true;
                    queue.push_back((ix as i64, iy as i64));
                }
            }
        }
        while let Some((x, y)) = queue.pop_front() {
            for (dx, dy) in NEIGHBOURS_4 {
                let (a, b) = (x + dx, y + dy);
                if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                    continue;
                }
                let k = b as usize * nx + a as usize;
                if !self.occupancy[k] && !seen[k] {
                    seen[k] = true;
                    queue.push_back((a, b));
                }
            }
        }
        seen
    }

    /// `B \ X` on this mask's lattice, on a window padded by
    /// [`FRAME_MARGIN`] cells around the disc. Cells outside the frame of `X`
    /// count as not in `X`.
    pub fn region_in_disc(&self, b: &Disc) -> CompactSetMask {
        let h = self.grid.spacing;
        let (cx, cy) = self.grid.to_lattice(b.center);
        let rr = b.radius / h;
        let pad = FRAME_MARGIN as i64 + 1;
        let x0 = (cx - rr).floor() as i64 - pad;
        let x1 = (cx + rr).ceil() as i64 + pad;
        let y0 = (cy - rr).floor() as i64 - pad;
        let y1 = (cy + rr).ceil() as i64 + pad;
        let (nx, ny) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
        let grid = GridSpec { origin: self.grid.lattice_point(x0, y0), spacing: h, nx, ny };
        let r2 = b.radius * b.radius;
        let occ = (0..ny as i64)
            .flat_map(|j| (0..nx as i64).map(move |i| (i, j)))
            .map(|(i, j)| {
                let (ix, iy) = (x0 + i, y0 + j);
                (self.grid.lattice_point(ix, iy) - b.center).norm_sqr() < r2 && !self.occupied(ix, iy)
            })
            .collect();
        Self::raw(grid, occ)
    }

    /// Writes a binary PGM (occupied = 255, top row first) and the JSON
    /// sidecar `{"origin":[x,y],"spacing":h}` next to it (`.json` extension).
    /// `origin` is the center of the bottom-left cell.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let g = self.grid;
        let mut bytes = Vec::with_capacity(g.len());
        for iy in (0..g.ny).rev() {
            bytes.extend(self.occupancy[iy * g.nx..(iy + 1) * g.nx].iter().map(|&b| if b { 255u8 } else { 0 }));
        }
        let file = std::fs::File::create(path)?;
        PnmEncoder::new(BufWriter::new(file))
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(&bytes, g.nx as u32, g.ny as u32, ExtendedColorType::L8)
            .map_err(|e| Error::Io(e.to_string()))?;
        let side = Sidecar { origin: [g.origin.re, g.origin.im], spacing: g.spacing, construction: self.construction.clone() };
        std::fs::write(sidecar_path(path), serde_json::to_string(&side)?)?;
        Ok(())
    }

    /// Reads a PGM and its sidecar; samples at or above half the maximum
    /// gray level are occupied.
    pub fn read_pgm(path: &Path) -> Result<Self> {
        let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        let file = std::fs::File::open(path)?;
        let dec = PnmDecoder::new(BufReader::new(file)).map_err(|e| Error::Format(e.to_string()))?;
        let img = DynamicImage::from_decoder(dec).map_err(|e| Error::Format(e.to_string()))?.into_luma8();
        let (nx, ny) = (img.width() as usize, img.height() as usize);
        let grid = GridSpec::new(C64::new(side.origin[0], side.origin[1]), side.spacing, nx, ny)?;
        let raw = img.into_raw();
        let mut occ = vec![false; nx * ny];
        for (row, chunk) in raw.chunks(nx).enumerate() {
            let iy = ny - 1 - row;
            for (ix, &v) in chunk.iter().enumerate() {
                occ[iy * nx + ix] = v >= 128;
            }
        }
        let mut mask = Self::new(grid, occ)?;
        mask.construction = side.construction;
        Ok(mask)
    }
}

pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("json")
}

/// Square grid around `outer` with four empty cells beyond its rim.
pub fn disc_grid(outer: &Disc, spacing: f64) -> Result<GridSpec> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidParameter(format!("spacing {spacing}")));
    }
    let half = outer.radius + 4.0 * spacing;
    let n = (2.0 * half / spacing).ceil() as usize + 1;
    GridSpec::new(outer.center - C64::new(half, half), spacing, n, n)
}

/// `∂_i X`: boundary cells not 8-adjacent to the complement component that
/// reaches the raster frame.
pub fn inner_boundary(x: &CompactSetMask) -> CompactSetMask {
    let outer = x.outer_complement();
    let g = x.grid;
    let touches_outer = |ix: i64, iy: i64| {
        (-1..=1).any(|dy| {
            (-1..=1).any(|dx| {
                let (a, b) = (ix + dx, iy + dy);
                a >= 0 && b >= 0 && a < g.nx as i64 && b < g.ny as i64 && outer[b as usize * g.nx + a as usize]
            })
        })
    };
    x.map_cells(|ix, iy| x.is_boundary_cell(ix, iy) && !touches_outer(ix, iy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn annulus(r_in: f64, r_out: f64, h: f64) -> CompactSetMask {
        let outer = Disc::new(c(0.0, 0.0), r_out).unwrap();
        CompactSetMask::from_fn(disc_grid(&outer, h).unwrap(), |z| z.norm() <= r_out && z.norm() >= r_in).unwrap()
    }

    #[test]
    fn validation() {
        let g = GridSpec::new(c(0.0, 0.0), 1.0, 6, 6).unwrap();
        assert!(CompactSetMask::new(g, vec![false; 36]).is_err());
        let mut occ = vec![false; 36];
        occ[g.index(1, 3)] = true;
        assert!(CompactSetMask::new(g, occ.clone()).is_err());
        occ[g.index(1, 3)] = false;
        occ[g.index(2, 3)] = true;
        assert!(CompactSetMask::new(g, occ).is_ok());
        assert!(CompactSetMask::new(g, vec![true; 5]).is_err());
    }

    #[test]
    fn disc_has_empty_inner_boundary() {
        let m = CompactSetMask::disc(&Disc::new(c(0.3, -0.1), 1.0).unwrap(), 1.0 / 64.0).unwrap();
        assert!(inner_boundary(&m).is_empty());
        assert!(!m.boundary().is_empty());
        assert_eq!(m.interior().count() + m.boundary().count(), m.count());
        let area = m.area();
        assert!((area - std::f64::consts::PI).abs() < 0.02, "{area}");
    }

    #[test]
    fn annulus_inner_boundary_is_inner_circle() {
        let (r_in, h) = (0.4, 1.0 / 64.0);
        let m = annulus(r_in, 1.0, h);
        let ib = inner_boundary(&m);
        assert!(!ib.is_empty());
        let g = m.grid;
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let (i, j) = (ix as i64, iy as i64);
                let expect = m.occupied(i, j)
                    && NEIGHBOURS_4.iter().any(|(dx, dy)| g.lattice_point(i + dx, j + dy).norm() < r_in);
                assert_eq!(ib.occupied(i, j), expect, "{ix} {iy}");
            }
        }
    }

    #[test]
    fn region_in_disc_complements_the_set() {
        let m = CompactSetMask::disc(&Disc::new(c(0.0, 0.0), 0.5).unwrap(), 0.01).unwrap();
        assert!(m.region_in_disc(&Disc::new(c(0.1, 0.0), 0.2).unwrap()).is_empty());
        let r = m.region_in_disc(&Disc::new(c(0.5, 0.0), 0.1).unwrap());
        let half = std::f64::consts::PI * 0.01 / 2.0;
        assert!((r.area() - half).abs() < 0.1 * half, "{}", r.area());
        for iy in 0..r.grid.ny {
            for ix in 0..r.grid.nx {
                let p = r.grid.point(ix, iy);
                if r.occupied(ix as i64, iy as i64) {
                    assert!(!m.contains(p) && (p - c(0.5, 0.0)).norm() < 0.1 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn pgm_round_trip() {
        let dir = std::env::temp_dir().join(format!("ecap-mask-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ann.pgm");
        let m = annulus(0.3, 0.8, 0.05);
        m.write_pgm(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5"));
        let back = CompactSetMask::read_pgm(&path).unwrap();
        assert_eq!(back.grid.nx, m.grid.nx);
        assert!((back.grid.origin - m.grid.origin).norm() < 1e-15);
        assert_eq!(back.occupancy(), m.occupancy());
        let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("ann.json")).unwrap()).unwrap();
        assert_eq!(side["spacing"], 0.05);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn top_row_is_written_first() {
        let g = GridSpec::new(c(0.0, 0.0), 1.0, 5, 6).unwrap();
        let mut occ = vec![false; 30];
        occ[g.index(2, 3)] = true;
        let m = CompactSetMask::new(g, occ).unwrap();
        let dir = std::env::temp_dir().join(format!("ecap-mask-top-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dot.pgm");
        m.write_pgm(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let pixels = &bytes[bytes.len() - 30..];
        // row 3 from the bottom is row 2 from the top
        assert_eq!(pixels[2 * 5 + 2], 255);
        assert_eq!(pixels.iter().filter(|&&v| v == 255).count(), 1);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
