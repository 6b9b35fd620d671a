//! Transverse sampling grids, object aperture masks A(rho_o) and the
//! Gaussian pump profile with its Fourier transform.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::path::Path;

/// Uniformly sampled transverse grid: a line (dim 1) or a square (dim 2).
///
/// Sample i along an axis sits at `center + (i - (count-1)/2) * pitch`,
/// exactly; 2-D samples are stored row-major with the y index major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGrid {
    pub dim: usize,
    pub pitch: f64,
    pub count: usize,
    pub center: [f64; 2],
}

impl SampledGrid {
    pub fn line(pitch: f64, count: usize, center: f64) -> Result<Self> {
        Self::validated(1, pitch, count, [center, 0.0])
    }

    pub fn square(pitch: f64, count: usize, center: [f64; 2]) -> Result<Self> {
        Self::validated(2, pitch, count, center)
    }

    fn validated(dim: usize, pitch: f64, count: usize, center: [f64; 2]) -> Result<Self> {
        if !(pitch > 0.0) || !pitch.is_finite() {
            return Err(Error::InvalidGrid(format!("pitch must be > 0, got {pitch}")));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!("count must be >= 2, got {count}")));
        }
        Ok(Self {
            dim,
            pitch,
            count,
            center,
        })
    }

    /// Coordinate of sample `i` along `axis`.
    #[inline]
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        self.center[axis] + (i as f64 - (self.count as f64 - 1.0) / 2.0) * self.pitch
    }

    /// Number of samples (count for a line, count^2 for a square).
    pub fn len(&self) -> usize {
        if self.dim == 1 {
            self.count
        } else {
            self.count * self.count
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical point of a linear sample index.
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.axis_coord(0, idx), 0.0]
        } else {
            let iy = idx / self.count;
            let ix = idx % self.count;
            [self.axis_coord(0, ix), self.axis_coord(1, iy)]
        }
    }

    /// Width covered by the sample cells along one axis.
    pub fn extent(&self) -> f64 {
        self.count as f64 * self.pitch
    }

    /// Quadrature weight of one cell (pitch^dim).
    pub fn cell_weight(&self) -> f64 {
        self.pitch.powi(self.dim as i32)
    }

    /// Largest |coordinate| reachable on any axis.
    pub fn max_abs_coord(&self) -> f64 {
        let half = (self.count as f64 - 1.0) / 2.0 * self.pitch;
        let mut worst: f64 = 0.0;
        for axis in 0..self.dim {
            worst = worst
                .max((self.center[axis] + half).abs())
                .max((self.center[axis] - half).abs());
        }
        worst
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.count).map(|i| self.axis_coord(axis, i)).collect()
    }
}

/// Axis-aligned open rectangle of a binary mask, physical coordinates.
/// Rasterization uses closed intervals, which keeps ties at rectangle
/// edges symmetric under reflection and leaves no cracks on shared edges;
/// integrators consume the continuum geometry, where edges have measure
/// zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    fn contains(&self, p: [f64; 2], dim: usize) -> bool {
        let in_x = self.x0 <= p[0] && p[0] <= self.x1;
        if dim == 1 {
            in_x
        } else {
            in_x && self.y0 <= p[1] && p[1] <= self.y1
        }
    }
}

/// Sampled complex transmission of the object plane.
///
/// Built-in masks are binary and also carry their exact decomposition into
/// disjoint rectangles, which lets integrators factorize the object
/// integral per axis. Custom masks loaded from file have samples only.
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureMask {
    pub grid: SampledGrid,
    pub values: Vec<Complex64>,
    /// Smallest transmitted length scale (the paper's d).
    pub smallest_feature: f64,
    pub rects: Option<Vec<Rect>>,
}

impl ApertureMask {
    /// Rasterize disjoint unit-transmission rectangles onto `grid`.
    pub fn from_rects(grid: SampledGrid, rects: Vec<Rect>, smallest_feature: f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|idx| {
                let p = grid.point(idx);
                if rects.iter().any(|r| r.contains(p, grid.dim)) {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let mask = Self {
            grid,
            values,
            smallest_feature,
            rects: Some(rects),
        };
        mask.check_invariants()?;
        Ok(mask)
    }

    /// Wrap raw sampled transmissions (custom masks). |values| <= 1 enforced.
    pub fn from_values(
        grid: SampledGrid,
        values: Vec<Complex64>,
        smallest_feature: f64,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "mask has {} values for a {}-sample grid",
                values.len(),
                grid.len()
            )));
        }
        let mask = Self {
            grid,
            values,
            smallest_feature,
            rects: None,
        };
        mask.check_invariants()?;
        Ok(mask)
    }

    fn check_invariants(&self) -> Result<()> {
        if self.values.iter().any(|v| v.norm() > 1.0 + 1e-12) {
            return Err(Error::Validation(
                "mask transmission exceeds unit modulus".into(),
            ));
        }
        if !(self.smallest_feature > 0.0) {
            return Err(Error::Validation(
                "mask smallest_feature must be positive".into(),
            ));
        }
        if self.smallest_feature > self.grid.extent() + 1e-12 {
            return Err(Error::Validation(
                "mask smallest_feature exceeds the grid extent".into(),
            ));
        }
        Ok(())
    }

    /// Transmission at an arbitrary point: exact rectangle lookup for the
    /// built-ins, nearest sample otherwise, zero outside the grid.
    pub fn transmission_at(&self, p: [f64; 2]) -> Complex64 {
        if let Some(rects) = &self.rects {
            if rects.iter().any(|r| r.contains(p, self.grid.dim)) {
                return Complex64::new(1.0, 0.0);
            }
            return Complex64::new(0.0, 0.0);
        }
        let g = &self.grid;
        let mut idx = [0usize; 2];
        for axis in 0..g.dim {
            let rel = (p[axis] - g.axis_coord(axis, 0)) / g.pitch;
            let i = rel.round();
            if i < -0.5 || i > g.count as f64 - 0.5 {
                return Complex64::new(0.0, 0.0);
            }
            idx[axis] = (i.max(0.0) as usize).min(g.count - 1);
        }
        let linear = if g.dim == 1 {
            idx[0]
        } else {
            idx[1] * g.count + idx[0]
        };
        self.values[linear]
    }

    /// Open samples as (linear index, point, transmission), skipping zeros.
    pub fn open_samples(&self) -> Vec<(usize, [f64; 2], Complex64)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm_sqr() > 0.0)
            .map(|(i, v)| (i, self.grid.point(i), *v))
            .collect()
    }

    /// Transmitted area (1-D: length) by cell counting.
    pub fn open_area(&self) -> f64 {
        let n = self.values.iter().filter(|v| v.norm_sqr() > 0.0).count();
        n as f64 * self.grid.cell_weight()
    }
}

fn require_resolved(feature: f64, grid: &SampledGrid) -> Result<()> {
    if feature < 2.0 * grid.pitch {
        return Err(Error::UnderresolvedMask {
            feature,
            pitch: grid.pitch,
        });
    }
    Ok(())
}

fn require_fits(needed_half: f64, grid: &SampledGrid) -> Result<()> {
    // Apertures are centered on the grid center; the cells must cover them.
    let cell_half = grid.extent() / 2.0;
    if needed_half > cell_half + 1e-12 {
        return Err(Error::GridTooSmall {
            needed: 2.0 * needed_half,
            extent: grid.extent(),
        });
    }
    Ok(())
}

/// Single slit of the given width, centered on the grid center.
pub fn make_slit(width: f64, grid: &SampledGrid) -> Result<ApertureMask> {
    require_resolved(width, grid)?;
    require_fits(width / 2.0, grid)?;
    let c = grid.center[0];
    let rect = Rect {
        x0: c - width / 2.0,
        x1: c + width / 2.0,
        y0: f64::NEG_INFINITY,
        y1: f64::INFINITY,
    };
    ApertureMask::from_rects(grid.clone(), vec![rect], width)
}

/// Two slits of equal width with the given center-to-center distance,
/// symmetric about the grid center. Touching slits are rejected.
pub fn make_double_slit(
    width: f64,
    center_to_center: f64,
    grid: &SampledGrid,
) -> Result<ApertureMask> {
    if center_to_center <= width {
        return Err(Error::Overlap {
            separation: center_to_center,
            width,
        });
    }
    require_resolved(width, grid)?;
    require_fits(center_to_center / 2.0 + width / 2.0, grid)?;
    let c = grid.center[0];
    let rects = [-1.0, 1.0]
        .iter()
        .map(|s| {
            let mid = c + s * center_to_center / 2.0;
            Rect {
                x0: mid - width / 2.0,
                x1: mid + width / 2.0,
                y0: f64::NEG_INFINITY,
                y1: f64::INFINITY,
            }
        })
        .collect();
    ApertureMask::from_rects(grid.clone(), rects, width)
}

/// Transparent letter E: three horizontal bars joined by one vertical bar,
/// bar thickness = stroke, overall height 5*stroke, width 3*stroke, opening
/// toward +x, centered on the grid center. Union area is 11*stroke^2.
pub fn make_letter_e(stroke: f64, grid: &SampledGrid) -> Result<ApertureMask> {
    if grid.dim != 2 {
        return Err(Error::InvalidGrid("letter E needs a 2-D grid".into()));
    }
    require_resolved(stroke, grid)?;
    require_fits(2.5 * stroke, grid)?;
    require_fits(1.5 * stroke, grid)?;
    let (cx, cy) = (grid.center[0], grid.center[1]);
    let d = stroke;
    let mut rects = vec![Rect {
        // vertical spine, full height
        x0: cx - 1.5 * d,
        x1: cx - 0.5 * d,
        y0: cy - 2.5 * d,
        y1: cy + 2.5 * d,
    }];
    for y_lo in [-2.5 * d, -0.5 * d, 1.5 * d] {
        rects.push(Rect {
            x0: cx - 0.5 * d,
            x1: cx + 1.5 * d,
            y0: cy + y_lo,
            y1: cy + y_lo + d,
        });
    }
    ApertureMask::from_rects(grid.clone(), rects, stroke)
}

/// Parse a custom mask from its plain-text form: first line
/// `rows cols pitch_mm`, then row-major whitespace-separated transmissions
/// in [0, 1]. One row gives a 1-D mask; otherwise rows must equal cols.
pub fn mask_from_text(text: &str) -> Result<ApertureMask> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty mask file".into(),
        })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 3 {
        return Err(Error::Parse {
            line: 1,
            message: "mask header must be `rows cols pitch_mm`".into(),
        });
    }
    let rows: usize = head[0].parse().map_err(|_| Error::Parse {
        line: 1,
        message: format!("bad rows `{}`", head[0]),
    })?;
    let cols: usize = head[1].parse().map_err(|_| Error::Parse {
        line: 1,
        message: format!("bad cols `{}`", head[1]),
    })?;
    let pitch: f64 = head[2].parse().map_err(|_| Error::Parse {
        line: 1,
        message: format!("bad pitch `{}`", head[2]),
    })?;
    let mut vals = Vec::with_capacity(rows * cols);
    for (lineno, line) in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("bad transmission `{tok}`"),
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "transmission {v} outside [0, 1] at line {}",
                    lineno + 1
                )));
            }
            vals.push(Complex64::new(v, 0.0));
        }
    }
    if vals.len() != rows * cols {
        return Err(Error::Validation(format!(
            "mask body has {} values, expected {rows} x {cols}",
            vals.len()
        )));
    }
    let grid = if rows == 1 {
        SampledGrid::line(pitch, cols, 0.0)?
    } else {
        if rows != cols {
            return Err(Error::Validation(format!(
                "2-D masks must be square, got {rows} x {cols}"
            )));
        }
        SampledGrid::square(pitch, cols, [0.0, 0.0])?
    };
    let feature = smallest_open_run(&vals, rows, cols) as f64 * pitch;
    ApertureMask::from_values(grid, vals, feature.max(pitch))
}

pub fn mask_from_file(path: &Path) -> Result<ApertureMask> {
    let text = std::fs::read_to_string(path)?;
    mask_from_text(&text)
}

/// Shortest contiguous run of open samples along any row or column; a
/// conservative estimate of the smallest feature of a custom mask.
fn smallest_open_run(vals: &[Complex64], rows: usize, cols: usize) -> usize {
    let open = |r: usize, c: usize| vals[r * cols + c].norm_sqr() > 0.25;
    let mut best = usize::MAX;
    let mut scan = |len: usize, at: &dyn Fn(usize) -> bool| {
        let mut run = 0usize;
        for i in 0..len {
            if at(i) {
                run += 1;
            } else if run > 0 {
                best = best.min(run);
                run = 0;
            }
        }
        if run > 0 {
            best = best.min(run);
        }
    };
    for r in 0..rows {
        scan(cols, &|c| open(r, c));
    }
    if rows > 1 {
        for c in 0..cols {
            scan(rows, &|r| open(r, c));
        }
    }
    if best == usize::MAX {
        1
    } else {
        best
    }
}

/// Gaussian pump beam: amplitude exp(-|rho|^2 / (2 sigma^2)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpProfile {
    pub sigma: f64,
}

impl PumpProfile {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Validation(format!(
                "pump sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    /// Transverse amplitude F(rho).
    pub fn amplitude(&self, rho: [f64; 2]) -> f64 {
        let r2 = rho[0] * rho[0] + rho[1] * rho[1];
        (-r2 / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// Fourier transform h_tr(kappa), normalized so h_tr(0) = 1; even in kappa.
    pub fn fourier(&self, kappa: [f64; 2]) -> f64 {
        let k2 = kappa[0] * kappa[0] + kappa[1] * kappa[1];
        (-self.sigma * self.sigma * k2 / 2.0).exp()
    }

    /// Effective pump diameter D'_s = 2 sqrt(2) sigma.
    pub fn effective_diameter(&self) -> f64 {
        2.0 * std::f64::consts::SQRT_2 * self.sigma
    }
}
