//! Rasters over rectangular windows of the complex plane.
//!
//! Pixels are addressed row-major with row 0 at the top (`im_max`). The
//! complex point of a pixel is its center.

use std::collections::VecDeque;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("degenerate window: re [{re_min}, {re_max}], im [{im_min}, {im_max}]")]
    Window {
        re_min: f64,
        re_max: f64,
        im_min: f64,
        im_max: f64,
    },
    #[error("grid must be at least 2x2, got {width}x{height}")]
    Size { width: usize, height: usize },
    #[error("raster shapes differ")]
    ShapeMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(
        re_min: f64,
        re_max: f64,
        im_min: f64,
        im_max: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GridError> {
        let grid = Self {
            re_min,
            re_max,
            im_min,
            im_max,
            width,
            height,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Square window `center ± half_width` at `n × n` pixels.
    pub fn square(center: Complex64, half_width: f64, n: usize) -> Result<Self, GridError> {
        Self::new(
            center.re - half_width,
            center.re + half_width,
            center.im - half_width,
            center.im + half_width,
            n,
            n,
        )
    }

    /// Same window with each pixel split into `factor × factor`. For odd
    /// factors every pixel center of `self` is also a pixel center here.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            width: self.width * factor,
            height: self.height * factor,
            ..*self
        }
    }

    /// Odd `f` such that `self == coarse.refined(f)`, if any.
    pub fn refinement_of(&self, coarse: &GridSpec) -> Option<usize> {
        let f = self.width / coarse.width.max(1);
        let window = (self.re_min, self.re_max, self.im_min, self.im_max)
            == (coarse.re_min, coarse.re_max, coarse.im_min, coarse.im_max);
        (f % 2 == 1 && window && *self == coarse.refined(f)).then_some(f)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.re_min < self.re_max && self.im_min < self.im_max) {
            return Err(GridError::Window {
                re_min: self.re_min,
                re_max: self.re_max,
                im_min: self.im_min,
                im_max: self.im_max,
            });
        }
        if self.width < 2 || self.height < 2 {
            return Err(GridError::Size {
                width: self.width,
                height: self.height,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        (self.re_max - self.re_min) / self.width as f64
    }

    pub fn dy(&self) -> f64 {
        (self.im_max - self.im_min) / self.height as f64
    }

    /// The larger pixel side, used when a single length scale is needed.
    pub fn pixel_size(&self) -> f64 {
        self.dx().max(self.dy())
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    #[inline]
    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    #[inline]
    pub fn pixel_center(&self, col: usize, row: usize) -> Complex64 {
        Complex64::new(
            self.re_min + (col as f64 + 0.5) * self.dx(),
            self.im_max - (row as f64 + 0.5) * self.dy(),
        )
    }

    #[inline]
    pub fn point(&self, index: usize) -> Complex64 {
        let (col, row) = self.col_row(index);
        self.pixel_center(col, row)
    }

    /// Pixel containing `z`, if inside the window.
    #[inline]
    pub fn locate(&self, z: Complex64) -> Option<(usize, usize)> {
        let fx = (z.re - self.re_min) / self.dx();
        let fy = (self.im_max - z.im) / self.dy();
        if fx >= 0.0 && fy >= 0.0 && fx < self.width as f64 && fy < self.height as f64 {
            Some((fx as usize, fy as usize))
        } else {
            None
        }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    /// A square sub-window with this grid's pixel pitch, centered on the pixel nearest `z`.
    pub fn patch(&self, z: Complex64, half_pixels: usize) -> Result<GridSpec, GridError> {
        let col = ((z.re - self.re_min) / self.dx()).floor();
        let row = ((self.im_max - z.im) / self.dy()).floor();
        let center = Complex64::new(
            self.re_min + (col + 0.5) * self.dx(),
            self.im_max - (row + 0.5) * self.dy(),
        );
        let n = 2 * half_pixels + 1;
        let hx = n as f64 * self.dx() / 2.0;
        let hy = n as f64 * self.dy() / 2.0;
        GridSpec::new(
            center.re - hx,
            center.re + hx,
            center.im - hy,
            center.im + hy,
            n,
            n,
        )
    }

    /// Parallel map over pixel centers, in index order.
    pub fn map_points<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, Complex64) -> T + Sync,
    {
        (0..self.len())
            .into_par_iter()
            .map(|k| f(k, self.point(k)))
            .collect()
    }
}

/// A boolean raster.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionMask {
    pub grid: GridSpec,
    pub bits: Vec<bool>,
}

const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];
const NEIGHBORS_4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

impl RegionMask {
    pub fn empty(grid: GridSpec) -> Self {
        Self {
            grid,
            bits: vec![false; grid.len()],
        }
    }

    /// Evaluates a predicate at every pixel center.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(Complex64) -> bool + Sync,
    {
        Self {
            grid,
            bits: grid.map_points(|_, z| f(z)),
        }
    }

    /// Marks the pixels hit by a point set.
    pub fn from_points(grid: GridSpec, points: &[Complex64]) -> Self {
        let mut mask = Self::empty(grid);
        for &z in points {
            if let Some((c, r)) = grid.locate(z) {
                mask.bits[grid.index(c, r)] = true;
            }
        }
        mask
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[self.grid.index(col, row)]
    }

    /// Lookup of the pixel containing `z`; `false` outside the window.
    #[inline]
    pub fn contains_point(&self, z: Complex64) -> bool {
        match self.grid.locate(z) {
            Some((c, r)) => self.get(c, r),
            None => false,
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    fn check_shape(&self, other: &RegionMask) -> Result<(), GridError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(GridError::ShapeMismatch)
        }
    }

    fn zip_with(
        &self,
        other: &RegionMask,
        f: impl Fn(bool, bool) -> bool,
    ) -> Result<RegionMask, GridError> {
        self.check_shape(other)?;
        Ok(RegionMask {
            grid: self.grid,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn and(&self, other: &RegionMask) -> Result<RegionMask, GridError> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &RegionMask) -> Result<RegionMask, GridError> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn and_not(&self, other: &RegionMask) -> Result<RegionMask, GridError> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn not(&self) -> RegionMask {
        RegionMask {
            grid: self.grid,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn intersection_count(&self, other: &RegionMask) -> Result<usize, GridError> {
        self.check_shape(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    /// True iff every pixel set here is also set in `other`.
    pub fn is_subset_of(&self, other: &RegionMask) -> Result<bool, GridError> {
        self.check_shape(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b))
    }

    fn neighbors<'a>(
        &self,
        index: usize,
        offsets: &'a [(isize, isize)],
    ) -> impl Iterator<Item = usize> + 'a {
        let (w, h) = (self.grid.width as isize, self.grid.height as isize);
        let (c, r) = self.grid.col_row(index);
        let (c, r) = (c as isize, r as isize);
        offsets.iter().filter_map(move |&(dc, dr)| {
            let (nc, nr) = (c + dc, r + dr);
            (nc >= 0 && nr >= 0 && nc < w && nr < h).then(|| (nr * w + nc) as usize)
        })
    }

    /// 3×3 dilation.
    pub fn dilate(&self) -> RegionMask {
        let bits = (0..self.bits.len())
            .into_par_iter()
            .map(|k| self.bits[k] || self.neighbors(k, &NEIGHBORS_8).any(|n| self.bits[n]))
            .collect();
        RegionMask {
            grid: self.grid,
            bits,
        }
    }

    /// 3×3 erosion; pixels outside the window count as unset.
    pub fn erode(&self) -> RegionMask {
        let (w, h) = (self.grid.width, self.grid.height);
        let bits = (0..self.bits.len())
            .into_par_iter()
            .map(|k| {
                let (c, r) = self.grid.col_row(k);
                self.bits[k]
                    && c > 0
                    && r > 0
                    && c + 1 < w
                    && r + 1 < h
                    && self.neighbors(k, &NEIGHBORS_8).all(|n| self.bits[n])
            })
            .collect();
        RegionMask {
            grid: self.grid,
            bits,
        }
    }

    pub fn dilate_n(&self, n: usize) -> RegionMask {
        (0..n).fold(self.clone(), |m, _| m.dilate())
    }

    /// Set pixels with at least one unset 4-neighbor (or on the window edge).
    pub fn inner_boundary(&self) -> RegionMask {
        let (w, h) = (self.grid.width, self.grid.height);
        let bits = (0..self.bits.len())
            .map(|k| {
                let (c, r) = self.grid.col_row(k);
                self.bits[k]
                    && (c == 0
                        || r == 0
                        || c + 1 == w
                        || r + 1 == h
                        || self.neighbors(k, &NEIGHBORS_4).any(|n| !self.bits[n]))
            })
            .collect();
        RegionMask {
            grid: self.grid,
            bits,
        }
    }

    /// Connected-component labels of the set pixels (8-connectivity).
    /// Returns `(labels, count)`; unset pixels carry label 0, components are 1-based.
    pub fn label_components(&self) -> (Vec<u32>, u32) {
        label(&self.bits, self, &NEIGHBORS_8)
    }

    pub fn is_connected(&self) -> bool {
        self.label_components().1 == 1
    }

    /// Component of unset pixels reachable from the window border (4-connectivity).
    pub fn unbounded_complement(&self) -> RegionMask {
        let (w, h) = (self.grid.width, self.grid.height);
        let mut seen = vec![false; self.bits.len()];
        let mut queue = VecDeque::new();
        for k in 0..self.bits.len() {
            let (c, r) = self.grid.col_row(k);
            if (c == 0 || r == 0 || c + 1 == w || r + 1 == h) && !self.bits[k] {
                seen[k] = true;
                queue.push_back(k);
            }
        }
        while let Some(k) = queue.pop_front() {
            for n in self.neighbors(k, &NEIGHBORS_4) {
                if !self.bits[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        RegionMask {
            grid: self.grid,
            bits: seen,
        }
    }

    /// Unset pixels not connected to the border: the bounded complementary components.
    pub fn bounded_complement(&self) -> RegionMask {
        let outside = self.unbounded_complement();
        RegionMask {
            grid: self.grid,
            bits: self
                .bits
                .iter()
                .zip(&outside.bits)
                .map(|(&s, &o)| !s && !o)
                .collect(),
        }
    }

    /// The component containing pixel `(col, row)`, empty if that pixel is unset.
    pub fn component_containing(&self, col: usize, row: usize) -> RegionMask {
        let (labels, _) = self.label_components();
        let target = labels[self.grid.index(col, row)];
        let bits = labels.iter().map(|&l| target != 0 && l == target).collect();
        RegionMask {
            grid: self.grid,
            bits,
        }
    }

    /// Chessboard distance from each set pixel to the nearest unset pixel or the
    /// window exterior; 0 on unset pixels.
    pub fn distance_to_complement(&self) -> Vec<u32> {
        let (w, h) = (self.grid.width, self.grid.height);
        let mut dist = vec![u32::MAX; self.bits.len()];
        let mut queue = VecDeque::new();
        for k in 0..self.bits.len() {
            let (c, r) = self.grid.col_row(k);
            if !self.bits[k] {
                dist[k] = 0;
                queue.push_back(k);
            } else if c == 0 || r == 0 || c + 1 == w || r + 1 == h {
                dist[k] = 1;
                queue.push_back(k);
            }
        }
        while let Some(k) = queue.pop_front() {
            for n in self.neighbors(k, &NEIGHBORS_8) {
                if dist[n] == u32::MAX {
                    dist[n] = dist[k] + 1;
                    queue.push_back(n);
                }
            }
        }
        dist
    }
}

fn label(bits: &[bool], mask: &RegionMask, offsets: &[(isize, isize)]) -> (Vec<u32>, u32) {
    let mut labels = vec![0u32; bits.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..bits.len() {
        if !bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(k) = stack.pop() {
            for n in mask.neighbors(k, offsets) {
                if bits[n] && labels[n] == 0 {
                    labels[n] = next;
                    stack.push(n);
                }
            }
        }
    }
    (labels, next)
}

/// Provenance carried by every rendered field.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub seed: u64,
    pub samples: u32,
    pub n_max: u32,
    pub system_hash: String,
}

/// A real-valued raster with a per-pixel undecided fraction.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub undecided: Vec<f64>,
    pub meta: FieldMeta,
}

impl ScalarField {
    /// Samples `f` at pixel centers; undecided channel is zero.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(Complex64) -> f64 + Sync,
    {
        Self {
            grid,
            values: grid.map_points(|_, z| f(z)),
            undecided: vec![0.0; grid.len()],
            meta: FieldMeta::default(),
        }
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self::from_fn(grid, |_| value)
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[self.grid.index(col, row)]
    }

    /// Value of the pixel containing `z`.
    pub fn nearest(&self, z: Complex64) -> Option<f64> {
        self.grid.locate(z).map(|(c, r)| self.get(c, r))
    }

    /// Bilinear interpolation between pixel centers; `None` outside the window.
    /// In the half-pixel rim the nearest edge values are used.
    #[inline]
    pub fn bilinear(&self, z: Complex64) -> Option<f64> {
        if !z.re.is_finite() || !z.im.is_finite() || !self.grid.contains(z) {
            return None;
        }
        let (w, h) = (self.grid.width, self.grid.height);
        let fx = ((z.re - self.grid.re_min) / self.grid.dx() - 0.5).clamp(0.0, (w - 1) as f64);
        let fy = ((self.grid.im_max - z.im) / self.grid.dy() - 0.5).clamp(0.0, (h - 1) as f64);
        let c0 = (fx.floor() as usize).min(w - 2);
        let r0 = (fy.floor() as usize).min(h - 2);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let v00 = self.get(c0, r0);
        let v10 = self.get(c0 + 1, r0);
        let v01 = self.get(c0, r0 + 1);
        let v11 = self.get(c0 + 1, r0 + 1);
        Some((1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11))
    }

    /// The four pixel indices whose centers surround `z` (as used by [`Self::bilinear`]).
    pub fn bilinear_cell(&self, z: Complex64) -> Option<[usize; 4]> {
        if !z.re.is_finite() || !z.im.is_finite() || !self.grid.contains(z) {
            return None;
        }
        let (w, h) = (self.grid.width, self.grid.height);
        let fx = ((z.re - self.grid.re_min) / self.grid.dx() - 0.5).clamp(0.0, (w - 1) as f64);
        let fy = ((self.grid.im_max - z.im) / self.grid.dy() - 0.5).clamp(0.0, (h - 1) as f64);
        let c0 = (fx.floor() as usize).min(w - 2);
        let r0 = (fy.floor() as usize).min(h - 2);
        let g = &self.grid;
        Some([
            g.index(c0, r0),
            g.index(c0 + 1, r0),
            g.index(c0, r0 + 1),
            g.index(c0 + 1, r0 + 1),
        ])
    }

    /// Largest absolute difference between 4-adjacent pixels.
    pub fn max_adjacent_jump(&self) -> f64 {
        let (w, h) = (self.grid.width, self.grid.height);
        let mut best = 0.0f64;
        for r in 0..h {
            for c in 0..w {
                let v = self.get(c, r);
                if c + 1 < w {
                    best = best.max((v - self.get(c + 1, r)).abs());
                }
                if r + 1 < h {
                    best = best.max((v - self.get(c, r + 1)).abs());
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> GridSpec {
        GridSpec::square(Complex64::new(0.0, 0.0), 1.0, n).unwrap()
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::new(1.0, 1.0, 0.0, 1.0, 4, 4).is_err());
        assert!(GridSpec::new(0.0, 1.0, 0.0, 1.0, 1, 4).is_err());
    }

    #[test]
    fn pixel_centers_round_trip() {
        let g = GridSpec::new(-2.0, 1.0, -1.0, 1.5, 30, 25).unwrap();
        for k in [0, 17, 29, 30, 400, g.len() - 1] {
            let z = g.point(k);
            let (c, r) = g.locate(z).unwrap();
            assert_eq!(g.index(c, r), k);
        }
        // row 0 is the top of the window
        assert!(g.point(0).im > g.point(g.len() - 1).im);
        assert!(g.locate(Complex64::new(5.0, 0.0)).is_none());
    }

    #[test]
    fn morphology() {
        let g = unit_grid(9);
        let mut m = RegionMask::empty(g);
        m.bits[g.index(4, 4)] = true;
        let d = m.dilate();
        assert_eq!(d.count(), 9);
        assert_eq!(d.erode(), m);
        assert_eq!(d.inner_boundary().count(), 8);
    }

    #[test]
    fn complement_components() {
        let g = unit_grid(64);
        let ring = RegionMask::from_fn(g, |z| (0.4..0.6).contains(&z.norm()));
        assert!(ring.is_connected());
        let inside = ring.bounded_complement();
        assert!(inside.contains_point(Complex64::new(0.0, 0.0)));
        assert!(!inside.contains_point(Complex64::new(0.9, 0.9)));
        assert!(ring
            .unbounded_complement()
            .contains_point(Complex64::new(0.9, 0.9)));
    }

    #[test]
    fn two_blobs_are_two_components() {
        let g = unit_grid(40);
        let m = RegionMask::from_fn(g, |z| (z - 0.5).norm() < 0.2 || (z + 0.5).norm() < 0.2);
        assert_eq!(m.label_components().1, 2);
        let (c, r) = g.locate(Complex64::new(0.5, 0.0)).unwrap();
        assert!(m.component_containing(c, r).count() < m.count());
    }

    #[test]
    fn distance_transform() {
        let g = unit_grid(11);
        let m = RegionMask::from_fn(g, |_| true);
        let d = m.distance_to_complement();
        assert_eq!(d[g.index(0, 0)], 1);
        assert_eq!(d[g.index(5, 5)], 6);
    }

    #[test]
    fn bilinear_reproduces_affine_fields() {
        let g = GridSpec::new(-1.0, 2.0, -1.0, 1.0, 31, 21).unwrap();
        let f = ScalarField::from_fn(g, |z| 2.0 * z.re - 0.5 * z.im + 1.0);
        for z in [
            Complex64::new(0.33, 0.1),
            Complex64::new(-0.7, -0.8),
            Complex64::new(1.9, 0.0),
        ] {
            let v = f.bilinear(z).unwrap();
            let exact = 2.0 * z.re - 0.5 * z.im + 1.0;
            if (z.re - g.re_min) > g.dx() / 2.0 && (g.re_max - z.re) > g.dx() / 2.0 {
                assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
            }
        }
        assert!(f.bilinear(Complex64::new(3.0, 0.0)).is_none());
    }
}
