//! Resolution estimates and the depth-of-field comparison between a
//! standard plenoptic camera and CPI, plus 1-D profile metrics (FWHM,
//! peak locus) used by the sweep studies.
//!
//! The spot formulas implement the paper-style "~" relations as equalities
//! with the lambda/(2 pi) factor explicit; they are order-of-magnitude
//! estimates and are never used as oracles for wave-optics outputs beyond
//! factor-2 tolerances.

use crate::error::{Error, Result};
use crate::geometry::{self, OpticalSetup};
use crate::refocus::Image;
use crate::scene::PumpProfile;

/// Sensor-side pixel budget: common pixel size, N_a spatial and N_b
/// angular pixels per side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSpec {
    /// Pixel pitch delta, millimeters.
    pub pixel: f64,
    pub count_a: usize,
    pub count_b: usize,
}

impl SensorSpec {
    pub fn new(pixel: f64, count_a: usize, count_b: usize) -> Result<Self> {
        if !(pixel > 0.0) {
            return Err(Error::Validation(format!(
                "pixel size must be positive, got {pixel}"
            )));
        }
        if count_a < 1 || count_b < 1 {
            return Err(Error::Validation("pixel counts must be >= 1".into()));
        }
        Ok(Self {
            pixel,
            count_a,
            count_b,
        })
    }

    pub fn n_tot(&self) -> usize {
        self.count_a + self.count_b
    }
}

/// Everything the depth-of-field comparison produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofReport {
    /// Effective imaging-lens diameter D_s seen by arm a.
    pub effective_lens_diameter: f64,
    /// (Delta x / Delta u) for CPI, Eq.-(24) style.
    pub ratio_cpi: f64,
    /// (Delta x / Delta u) for the standard camera at `n_u_required`.
    pub ratio_std: f64,
    /// Angular pixels per side the standard camera needs for the same
    /// depth of field.
    pub n_u_required: usize,
    /// Spatial-resolution loss factor of that standard camera (= N_u).
    pub resolution_loss_factor: f64,
    /// Object-side ghost-image spot estimate.
    pub spot_object: f64,
    /// Source-image spot estimate on S_b.
    pub spot_source: f64,
}

/// Effective lens diameter D_s = D'_s (1 + z_a/z_b), with D'_s the pump's
/// effective diameter.
pub fn effective_lens_diameter(pump: &PumpProfile, z_a: f64, z_b: f64) -> f64 {
    pump.effective_diameter() * (1.0 + z_a / z_b)
}

/// CPI refocusing bound: (delta / D_s) N_b.
pub fn dof_ratio_cpi(sensor: &SensorSpec, d_s: f64) -> f64 {
    sensor.pixel / d_s * sensor.count_b as f64
}

/// Standard plenoptic camera bound: (delta / D_s) N_u^2.
pub fn dof_ratio_standard(pixel: f64, n_u: usize, d_s: f64) -> f64 {
    pixel / d_s * (n_u * n_u) as f64
}

/// Smallest N_u whose standard-camera bound reaches `target_ratio`.
pub fn required_nu_standard(target_ratio: f64, pixel: f64, d_s: f64) -> usize {
    let per_pixel = pixel / d_s;
    let mut n = (target_ratio / per_pixel).sqrt().floor().max(0.0) as usize;
    while (n * n) as f64 * per_pixel < target_ratio {
        n += 1;
    }
    while n > 1 && ((n - 1) * (n - 1)) as f64 * per_pixel >= target_ratio {
        n -= 1;
    }
    n.max(1)
}

/// Perfect-refocusing test |1 - 1/alpha| < dx/du.
pub fn refocusable(alpha: f64, dx: f64, du: f64) -> Result<bool> {
    if alpha == 0.0 {
        return Err(Error::AlphaZero);
    }
    Ok((1.0 - 1.0 / alpha).abs() < dx / du)
}

/// Ghost-image spot size on S_a: m (lambda/2pi) z_bF / pump_diameter.
pub fn spot_object(m: f64, z_bf: f64, lambda: f64, pump_diameter: f64) -> f64 {
    m * lambda / (2.0 * std::f64::consts::PI) * z_bf / pump_diameter
}

/// Source-image spot on S_b: M (lambda/2pi) z_b / d, with d the smallest
/// object feature.
pub fn spot_source(m_src: f64, z_b: f64, lambda: f64, d: f64) -> f64 {
    m_src * lambda / (2.0 * std::f64::consts::PI) * z_b / d
}

/// Assemble the full comparison for a setup, pump, sensor budget and
/// object feature size.
pub fn compare_report(
    setup: &OpticalSetup,
    pump: &PumpProfile,
    sensor: &SensorSpec,
    object_feature: f64,
) -> Result<DofReport> {
    if !(object_feature > 0.0) {
        return Err(Error::Validation(format!(
            "object feature must be positive, got {object_feature}"
        )));
    }
    let derived = geometry::DerivedGeometry::from_setup(setup)?;
    let d_s = effective_lens_diameter(pump, setup.z_a, setup.z_b);
    let ratio_cpi = dof_ratio_cpi(sensor, d_s);
    let n_u = required_nu_standard(ratio_cpi, sensor.pixel, d_s);
    Ok(DofReport {
        effective_lens_diameter: d_s,
        ratio_cpi,
        ratio_std: dof_ratio_standard(sensor.pixel, n_u, d_s),
        n_u_required: n_u,
        resolution_loss_factor: n_u as f64,
        spot_object: spot_object(derived.m, derived.z_bf, setup.lambda, pump.effective_diameter()),
        spot_source: spot_source(derived.m_src, setup.z_b, setup.lambda, object_feature),
    })
}

/// Full width at half maximum of a 1-D profile, by linear interpolation of
/// the half crossings around the global maximum. `None` when a crossing
/// lies outside the grid.
pub fn fwhm(image: &Image) -> Option<f64> {
    let g = &image.grid;
    if g.dim != 1 {
        return None;
    }
    let v = &image.values;
    let (imax, peak) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, p)| (i, *p))?;
    if !(peak > 0.0) {
        return None;
    }
    let half = peak / 2.0;
    let mut left = None;
    for i in (0..imax).rev() {
        if v[i] <= half {
            let t = (half - v[i]) / (v[i + 1] - v[i]);
            left = Some(g.axis_coord(0, i) + t * g.pitch);
            break;
        }
    }
    let mut right = None;
    for i in imax + 1..v.len() {
        if v[i] <= half {
            let t = (half - v[i - 1]) / (v[i] - v[i - 1]);
            right = Some(g.axis_coord(0, i - 1) + t * g.pitch);
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        _ => None,
    }
}

/// Peak locus of a 1-D profile: intensity-weighted centroid of the samples
/// at or above half maximum, restricted to the contiguous lobe around the
/// global maximum. Robust against plateau argmax jitter.
pub fn peak_locus(image: &Image) -> Option<f64> {
    let g = &image.grid;
    if g.dim != 1 {
        return None;
    }
    let v = &image.values;
    let (imax, peak) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, p)| (i, *p))?;
    if !(peak > 0.0) {
        return None;
    }
    let half = peak / 2.0;
    let mut lo = imax;
    while lo > 0 && v[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < v.len() && v[hi + 1] >= half {
        hi += 1;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in lo..=hi {
        num += v[i] * g.axis_coord(0, i);
        den += v[i];
    }
    Some(num / den)
}

/// Local maxima of a 1-D profile above `floor * peak`, as (coordinate of
/// the lobe's half-max centroid, lobe peak value), strongest first.
pub fn local_maxima(image: &Image, floor: f64) -> Vec<(f64, f64)> {
    let g = &image.grid;
    let v = &image.values;
    let peak = image.peak();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for i in 1..v.len().saturating_sub(1) {
        if v[i] >= v[i - 1] && v[i] > v[i + 1] && v[i] >= floor * peak {
            // Centroid of this lobe's half-max region.
            let half = v[i] / 2.0;
            let mut lo = i;
            while lo > 0 && v[lo - 1] >= half && v[lo - 1] <= v[lo] {
                lo -= 1;
            }
            let mut hi = i;
            while hi + 1 < v.len() && v[hi + 1] >= half && v[hi + 1] <= v[hi] {
                hi += 1;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for j in lo..=hi {
                num += v[j] * g.axis_coord(0, j);
                den += v[j];
            }
            out.push((num / den, v[i]));
        }
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}
