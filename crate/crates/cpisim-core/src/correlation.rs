//! The plenoptic correlation function Γ(rho_a, rho_b) and its special
//! cases: the coherent ghost image at focus, the incoherent (bucket) ghost
//! image, the geometric-optics limit, and the stationary-phase points.
//!
//! Three evaluation routes coexist:
//! - `amplitude_oracle`: nested direct quadrature over rho_o and rho_s.
//!   Slow, pump-agnostic, the ground truth for everything else.
//! - `amplitude_gaussian_fast`: the rho_s integral done in closed form per
//!   transverse axis (Gaussian pump only), quadrature over rho_o.
//! - `amplitude_box_analytic`: for binary rectangle masks, the rho_o
//!   integral is also closed-form per axis; no sampling limits at all.

use crate::error::{Error, Result};
use crate::geometry::{self, OpticalSetup};
use crate::kahan::{KahanComplex, KahanSum};
use crate::refocus::Image;
use crate::scene::{ApertureMask, PumpProfile, SampledGrid};
use crate::special::gaussian_box_integral;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Which route produced a two-photon amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudePath {
    OracleQuadrature,
    GaussianFast,
    Geometric,
}

/// Evaluation path selector for map/image builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPath {
    Oracle,
    Fast,
}

/// Inner bracket of the correlation function before squaring.
#[derive(Debug, Clone, Copy)]
pub struct TwoPhotonAmplitude {
    pub value: Complex64,
    pub provenance: AmplitudePath,
}

/// Coefficients of the out-of-focus phase
/// phi = beta |rho_s|^2/2 - gamma_a rho_s.rho_a - gamma_b (rho_s + rho_b/M).rho_o.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpec {
    pub beta: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
}

impl PhaseSpec {
    pub fn from_setup(setup: &OpticalSetup) -> Result<Self> {
        let zeta = geometry::zeta(setup.z_a, setup.z_a_img, setup.f)
            .finite()
            .ok_or(Error::InfiniteZeta)?;
        Ok(Self {
            beta: 1.0 / setup.z_b + (1.0 / setup.z_a) * (1.0 - zeta / setup.z_a),
            gamma_a: zeta / (setup.z_a * setup.z_a_img),
            gamma_b: 1.0 / setup.z_b,
        })
    }
}

/// The bracket of the out-of-focus phase, in millimeters (multiply by
/// Omega/c for radians).
pub fn phase_phi(
    rho_o: [f64; 2],
    rho_s: [f64; 2],
    rho_a: [f64; 2],
    rho_b: [f64; 2],
    spec: &PhaseSpec,
    m_src: f64,
) -> f64 {
    let s2 = rho_s[0] * rho_s[0] + rho_s[1] * rho_s[1];
    let sa = rho_s[0] * rho_a[0] + rho_s[1] * rho_a[1];
    let so = (rho_s[0] + rho_b[0] / m_src) * rho_o[0] + (rho_s[1] + rho_b[1] / m_src) * rho_o[1];
    spec.beta * s2 / 2.0 - spec.gamma_a * sa - spec.gamma_b * so
}

/// Sampling controls for the quadrature paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Half-width of the rho_s domain in units of the pump sigma.
    pub pump_half_width_sigmas: f64,
    /// Safety factor dividing the pi phase-increment limit.
    pub oversample: f64,
    /// Hard cap on source samples per axis before giving up.
    pub max_source_samples: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            pump_half_width_sigmas: 6.0,
            oversample: 2.0,
            max_source_samples: 400_000,
        }
    }
}

/// Pump model accepted by the oracle path. The fast paths require Gaussian.
pub enum PumpModel<'a> {
    Gaussian(&'a PumpProfile),
    /// Arbitrary transverse amplitude with an explicit domain half-width.
    Custom {
        amplitude: &'a (dyn Fn([f64; 2]) -> f64 + Sync),
        half_width: f64,
    },
}

/// Setup-derived constants shared by every evaluation route.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EvalContext {
    pub k: f64,
    pub z_b: f64,
    pub m_src: f64,
    pub beta: f64,
    pub gamma_a: f64,
    pub sigma: f64,
    /// w = k^2/(4q) with q = 1/(2 sigma^2) - i k beta/2; Re w is the PSF
    /// suppression, Im w the defocus chirp.
    pub w: Complex64,
    pub sqrt_pi_over_q: Complex64,
}

impl EvalContext {
    pub fn new(setup: &OpticalSetup, pump: &PumpProfile) -> Result<Self> {
        let spec = PhaseSpec::from_setup(setup)?;
        let k = setup.wavenumber();
        let q = Complex64::new(1.0 / (2.0 * pump.sigma * pump.sigma), -k * spec.beta / 2.0);
        Ok(Self {
            k,
            z_b: setup.z_b,
            m_src: geometry::source_magnification(setup),
            beta: spec.beta,
            gamma_a: spec.gamma_a,
            sigma: pump.sigma,
            w: k * k / (4.0 * q),
            sqrt_pi_over_q: (PI / q).sqrt(),
        })
    }

    /// Largest |d phase/d rho_o| of the fast-path object integrand for
    /// coordinates bounded by the given maxima.
    pub fn object_rate_fast(&self, max_abs_a: f64, max_abs_b: f64, max_abs_o: f64) -> f64 {
        let gamma_max = self.gamma_a.abs() * max_abs_a + max_abs_o / self.z_b;
        2.0 * self.w.im.abs() * gamma_max / self.z_b
            + self.k * max_abs_b / (self.m_src * self.z_b)
    }

    /// Largest |d phase/d rho_s| of the source integrand.
    pub fn source_rate(&self, source_half_width: f64, max_abs_a: f64, max_abs_o: f64) -> f64 {
        self.k
            * (self.beta.abs() * source_half_width
                + self.gamma_a.abs() * max_abs_a
                + max_abs_o / self.z_b)
    }
}

/// The pi rule: adjacent samples may not advance the integrand phase by pi
/// or more. Oversampling beyond this belongs to grid construction, not to
/// the check.
fn check_pitch(integral: &'static str, pitch: f64, rate: f64) -> Result<()> {
    let limit = PI / rate.max(1e-300);
    if pitch >= limit {
        return Err(Error::UndersampledQuadrature {
            integral,
            pitch,
            limit,
        });
    }
    Ok(())
}

fn max_abs_axes(p: [f64; 2]) -> f64 {
    p[0].abs().max(p[1].abs())
}

/// Build the rho_s quadrature grid for the oracle path.
fn source_grid(
    ctx: &EvalContext,
    quad: &QuadratureSpec,
    dim: usize,
    max_abs_a: f64,
    max_abs_o: f64,
) -> Result<SampledGrid> {
    let half = quad.pump_half_width_sigmas * ctx.sigma;
    let rate = ctx.source_rate(half, max_abs_a, max_abs_o);
    let pitch = (ctx.sigma / 8.0).min(PI / (rate * quad.oversample).max(1e-300));
    let mut count = (2.0 * half / pitch).ceil() as usize + 1;
    if count % 2 == 0 {
        count += 1; // odd grid keeps a sample at the origin
    }
    if count > quad.max_source_samples {
        return Err(Error::UndersampledQuadrature {
            integral: "source",
            pitch,
            limit: 2.0 * half / quad.max_source_samples as f64,
        });
    }
    if dim == 1 {
        SampledGrid::line(pitch, count, 0.0)
    } else {
        SampledGrid::square(pitch, count, [0.0, 0.0])
    }
}

fn oracle_impl(
    rho_a: [f64; 2],
    rho_b: [f64; 2],
    mask: &ApertureMask,
    pump_fn: &dyn Fn([f64; 2]) -> f64,
    src: &SampledGrid,
    spec: &PhaseSpec,
    m_src: f64,
    k: f64,
) -> Complex64 {
    let w_s = src.cell_weight();
    let w_o = mask.grid.cell_weight();
    let mut outer = KahanComplex::new();
    for (_, rho_o, a_val) in mask.open_samples() {
        let mut inner = KahanComplex::new();
        for idx in 0..src.len() {
            let rho_s = src.point(idx);
            let f = pump_fn(rho_s);
            if f == 0.0 {
                continue;
            }
            let phi = phase_phi(rho_o, rho_s, rho_a, rho_b, spec, m_src);
            inner.add(f * Complex64::from_polar(1.0, k * phi));
        }
        outer.add(a_val * inner.value() * w_s);
    }
    outer.value() * w_o
}

/// Ground-truth amplitude by nested direct quadrature (Eq.-(10) form).
pub fn amplitude_oracle(
    rho_a: [f64; 2],
    rho_b: [f64; 2],
    mask: &ApertureMask,
    pump: &PumpProfile,
    setup: &OpticalSetup,
    quad: &QuadratureSpec,
) -> Result<TwoPhotonAmplitude> {
    amplitude_oracle_with_model(rho_a, rho_b, mask, &PumpModel::Gaussian(pump), setup, quad)
}

/// Oracle amplitude for an arbitrary pump model (used by displaced-source
/// and point-pump studies).
pub fn amplitude_oracle_with_model(
    rho_a: [f64; 2],
    rho_b: [f64; 2],
    mask: &ApertureMask,
    pump: &PumpModel<'_>,
    setup: &OpticalSetup,
    quad: &QuadratureSpec,
) -> Result<TwoPhotonAmplitude> {
    let spec = PhaseSpec::from_setup(setup)?;
    let m_src = geometry::source_magnification(setup);
    let k = setup.wavenumber();
    let max_abs_a = max_abs_axes(rho_a);
    let max_abs_o = mask.grid.max_abs_coord();

    let (src, half): (SampledGrid, f64) = match pump {
        PumpModel::Gaussian(p) => {
            let ctx = EvalContext::new(setup, p)?;
            let g = source_grid(&ctx, quad, mask.grid.dim, max_abs_a, max_abs_o)?;
            let half = g.max_abs_coord() + g.pitch / 2.0;
            (g, half)
        }
        PumpModel::Custom { half_width, .. } => {
            // The caller owns the domain; sample it against the worst
            // explicit phase rate.
            let rate = k
                * (spec.beta.abs() * half_width
                    + spec.gamma_a.abs() * max_abs_a
                    + max_abs_o / setup.z_b);
            let pitch = PI / (rate * quad.oversample).max(1e-300);
            let mut count = (2.0 * half_width / pitch).ceil() as usize + 1;
            if count % 2 == 0 {
                count += 1;
            }
            if count > quad.max_source_samples {
                return Err(Error::UndersampledQuadrature {
                    integral: "source",
                    pitch,
                    limit: 2.0 * half_width / quad.max_source_samples as f64,
                });
            }
            let g = if mask.grid.dim == 1 {
                SampledGrid::line(pitch, count, 0.0)?
            } else {
                SampledGrid::square(pitch, count, [0.0, 0.0])?
            };
            (g, *half_width)
        }
    };

    // Object-integral sampling check at the worst rho_s in the domain.
    let rate_o = k * (half + max_abs_axes(rho_b) / m_src) / setup.z_b;
    check_pitch("object", mask.grid.pitch, rate_o)?;

    let gauss;
    let pump_fn: &dyn Fn([f64; 2]) -> f64 = match pump {
        PumpModel::Gaussian(p) => {
            gauss = **p;
            &move |r| gauss.amplitude(r)
        }
        PumpModel::Custom { amplitude, .. } => *amplitude,
    };
    let value = oracle_impl(rho_a, rho_b, mask, pump_fn, &src, &spec, m_src, k);
    Ok(TwoPhotonAmplitude {
        value,
        provenance: AmplitudePath::OracleQuadrature,
    })
}

/// Fast-path integrand factor for one object sample: the closed-form rho_s
/// integral times the explicit rho_o phase, all axes combined.
#[inline]
pub(crate) fn fast_sample_factor(
    ctx: &EvalContext,
    dim: usize,
    rho_a: [f64; 2],
    rho_b: [f64; 2],
    rho_o: [f64; 2],
) -> Complex64 {
    let mut exponent = Complex64::new(0.0, 0.0);
    let mut constant = Complex64::new(1.0, 0.0);
    for ax in 0..dim {
        let gamma = ctx.gamma_a * rho_a[ax] + rho_o[ax] / ctx.z_b;
        let kappa_b = ctx.k / ctx.z_b * (rho_b[ax] / ctx.m_src);
        exponent += -ctx.w * gamma * gamma - Complex64::new(0.0, kappa_b * rho_o[ax]);
        constant *= ctx.sqrt_pi_over_q;
    }
    constant * exponent.exp()
}

pub(crate) fn amplitude_fast_unchecked(
    ctx: &EvalContext,
    mask: &ApertureMask,
    rho_a: [f64; 2],
    rho_b: [f64; 2],
) -> Complex64 {
    let dim = mask.grid.dim;
    let w_o = mask.grid.cell_weight();
    let mut acc = KahanComplex::new();
    for (idx, v) in mask.values.iter().enumerate() {
        if v.norm_sqr() == 0.0 {
            continue;
        }
        let rho_o = mask.grid.point(idx);
        acc.add(v * fast_sample_factor(ctx, dim, rho_a, rho_b, rho_o));
    }
    acc.value() * w_o
}

/// Gaussian-pump amplitude: rho_s integrated analytically per axis, then
/// quadrature over the mask samples. Must agree with `amplitude_oracle`;
/// see the equivalence tests.
pub fn amplitude_gaussian_fast(
    rho_a: [f64; 2],
    rho_b: [f64; 2],
    mask: &ApertureMask,
    pump: &PumpProfile,
    setup: &OpticalSetup,
    _quad: &QuadratureSpec,
) -> Result<TwoPhotonAmplitude> {
    let ctx = EvalContext::new(setup, pump)?;
    let rate = ctx.object_rate_fast(
        max_abs_axes(rho_a),
        max_abs_axes(rho_b),
        mask.grid.max_abs_coord(),
    );
    check_pitch("object", mask.grid.pitch, rate)?;
    Ok(TwoPhotonAmplitude {
        value: amplitude_fast_unchecked(&ctx, mask, rho_a, rho_b),
        provenance: AmplitudePath::GaussianFast,
    })
}

/// Exact amplitude for binary rectangle masks: both the rho_s and the
/// rho_o integrals in closed form (per-axis complex-Gaussian integrals over
/// each rectangle). No sampling limits; the continuum value of Eq. (10).
pub fn amplitude_box_analytic(
    rho_a: [f64; 2],
    rho_b: [f64; 2],
    mask: &ApertureMask,
    pump: &PumpProfile,
    setup: &OpticalSetup,
) -> Result<TwoPhotonAmplitude> {
    let rects = mask
        .rects
        .as_ref()
        .ok_or_else(|| Error::Validation("box-analytic path needs a rectangle mask".into()))?;
    let ctx = EvalContext::new(setup, pump)?;
    let dim = mask.grid.dim;
    let mut acc = KahanComplex::new();
    for r in rects {
        let mut term = box_axis_factor(&ctx, r.x0, r.x1, rho_a[0], rho_b[0]);
        if dim == 2 {
            term *= box_axis_factor(&ctx, r.y0, r.y1, rho_a[1], rho_b[1]);
        }
        acc.add(term);
    }
    Ok(TwoPhotonAmplitude {
        value: acc.value(),
        provenance: AmplitudePath::GaussianFast,
    })
}

/// Closed-form per-axis factor of one rectangle: integral over [x0, x1] of
/// exp(-w (gamma_a rho_a + t/z_b)^2) exp(-i (k/z_b)(rho_b/M) t) dt, times
/// the per-axis rho_s Gaussian constant sqrt(pi/q).
pub(crate) fn box_axis_factor(
    ctx: &EvalContext,
    x0: f64,
    x1: f64,
    rho_a_ax: f64,
    rho_b_ax: f64,
) -> Complex64 {
    let gamma0 = ctx.gamma_a * rho_a_ax;
    let kappa_b = ctx.k / ctx.z_b * (rho_b_ax / ctx.m_src);
    let a = ctx.w / (ctx.z_b * ctx.z_b);
    let b = 2.0 * ctx.w * gamma0 / ctx.z_b + Complex64::new(0.0, kappa_b);
    let c = ctx.w * gamma0 * gamma0;
    ctx.sqrt_pi_over_q * gaussian_box_integral(a, b, c, x0, x1)
}

/// Sampled Γ over the product of the two sensor grids.
#[derive(Debug, Clone)]
pub struct CorrelationMap {
    pub grid_a: SampledGrid,
    pub grid_b: SampledGrid,
    /// Row-major with the rho_a index major: values[ia * len_b + jb].
    pub values: Vec<f64>,
    pub setup_snapshot: OpticalSetup,
}

impl CorrelationMap {
    pub fn at(&self, ia: usize, jb: usize) -> f64 {
        self.values[ia * self.grid_b.len() + jb]
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Γ(rho_a, rho_b) = |amplitude|^2 on the given grids, path oracle or fast.
pub fn gamma_map(
    mask: &ApertureMask,
    pump: &PumpProfile,
    setup: &OpticalSetup,
    grid_a: &SampledGrid,
    grid_b: &SampledGrid,
    path: EvalPath,
    quad: &QuadratureSpec,
) -> Result<CorrelationMap> {
    let max_abs_a = grid_a.max_abs_coord();
    let max_abs_b = grid_b.max_abs_coord();
    let max_abs_o = mask.grid.max_abs_coord();
    let ctx = EvalContext::new(setup, pump)?;
    // Worst-case sampling checks once, then evaluate without rechecking.
    match path {
        EvalPath::Fast => {
            let rate = ctx.object_rate_fast(max_abs_a, max_abs_b, max_abs_o);
            check_pitch("object", mask.grid.pitch, rate)?;
        }
        EvalPath::Oracle => {}
    }
    let quad_spec = *quad;
    let len_b = grid_b.len();
    let values: Result<Vec<Vec<f64>>> = (0..grid_a.len())
        .into_par_iter()
        .map(|ia| {
            let rho_a = grid_a.point(ia);
            let mut row = Vec::with_capacity(len_b);
            for jb in 0..len_b {
                let rho_b = grid_b.point(jb);
                let amp = match path {
                    EvalPath::Fast => amplitude_fast_unchecked(&ctx, mask, rho_a, rho_b),
                    EvalPath::Oracle => {
                        amplitude_oracle(rho_a, rho_b, mask, pump, setup, &quad_spec)?.value
                    }
                };
                row.push(amp.norm_sqr());
            }
            Ok(row)
        })
        .collect();
    Ok(CorrelationMap {
        grid_a: grid_a.clone(),
        grid_b: grid_b.clone(),
        values: values?.into_iter().flatten().collect(),
        setup_snapshot: *setup,
    })
}

/// Coherent ghost image at focus: the fixed-rho_b slice of Γ in its
/// Eq.-(13) form. Matches the fast path exactly when z_b = z_bF.
pub fn coherent_ghost_image(
    mask: &ApertureMask,
    pump: &PumpProfile,
    setup: &OpticalSetup,
    grid_a: &SampledGrid,
    rho_b: [f64; 2],
) -> Result<Image> {
    let derived = geometry::DerivedGeometry::from_setup(setup)?;
    if !derived.at_focus(setup.z_b) {
        return Err(Error::NotAtFocus {
            z_b: setup.z_b,
            z_bf: derived.z_bf,
        });
    }
    let k = setup.wavenumber();
    let z_bf = derived.z_bf;
    let (m, m_src) = (derived.m, derived.m_src);
    // Eq. (13) has no defocus chirp; only the explicit rho_b phase limits
    // the object sampling.
    let rate = k * max_abs_axes(rho_b) / (m_src * z_bf);
    check_pitch("object", mask.grid.pitch, rate)?;

    let dim = mask.grid.dim;
    let w_o = mask.grid.cell_weight();
    let gauss_norm = (pump.sigma * (2.0 * PI).sqrt()).powi(dim as i32);
    let values: Vec<f64> = (0..grid_a.len())
        .into_par_iter()
        .map(|ia| {
            let rho_a = grid_a.point(ia);
            let mut acc = KahanComplex::new();
            for (idx, v) in mask.values.iter().enumerate() {
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                let rho_o = mask.grid.point(idx);
                let kappa = [
                    k / z_bf * (rho_o[0] + rho_a[0] / m),
                    k / z_bf * (rho_o[1] + rho_a[1] / m),
                ];
                let phase =
                    -k / z_bf * (rho_b[0] / m_src * rho_o[0] + rho_b[1] / m_src * rho_o[1]);
                acc.add(v * pump.fourier(kappa) * Complex64::from_polar(1.0, phase));
            }
            (acc.value() * w_o * gauss_norm).norm_sqr()
        })
        .collect();
    Ok(Image::raw(
        grid_a.clone(),
        values,
        format!("coherent ghost image, rho_b = ({}, {}) mm", rho_b[0], rho_b[1]),
    ))
}

/// Bucket-style integration of a correlation map over the whole S_b grid.
/// Logs a truncated-envelope warning when the map boundary still carries
/// more than 1e-3 of the peak.
pub fn incoherent_ghost_image(map: &CorrelationMap) -> Result<Image> {
    let len_b = map.grid_b.len();
    let peak = map.peak();
    let boundary_max = boundary_values(&map.grid_b)
        .into_iter()
        .flat_map(|jb| (0..map.grid_a.len()).map(move |ia| (ia, jb)))
        .map(|(ia, jb)| map.at(ia, jb))
        .fold(0.0, f64::max);
    if peak > 0.0 && boundary_max > 1e-3 * peak {
        log::warn!(
            "truncated envelope: S_b boundary carries {:.2e} of the map peak",
            boundary_max / peak
        );
    }
    let w_b = map.grid_b.cell_weight();
    let values: Vec<f64> = (0..map.grid_a.len())
        .map(|ia| {
            let mut acc = KahanSum::new();
            for jb in 0..len_b {
                acc.add(map.at(ia, jb));
            }
            acc.value() * w_b
        })
        .collect();
    Ok(Image::raw(
        map.grid_a.clone(),
        values,
        "incoherent ghost image".into(),
    ))
}

fn boundary_values(grid: &SampledGrid) -> Vec<usize> {
    if grid.dim == 1 {
        vec![0, grid.count - 1]
    } else {
        let n = grid.count;
        let mut idx = Vec::with_capacity(4 * n);
        for i in 0..n {
            idx.push(i); // bottom row
            idx.push((n - 1) * n + i); // top row
            idx.push(i * n); // left column
            idx.push(i * n + n - 1); // right column
        }
        idx
    }
}

/// Geometric-optics limit of Γ: the tilted, rescaled image of the object
/// times the source profile.
pub fn geometric_gamma(
    mask: &ApertureMask,
    pump: &PumpProfile,
    setup: &OpticalSetup,
    rho_a: [f64; 2],
    rho_b: [f64; 2],
) -> Result<f64> {
    let arg = stationary_object_point(rho_a, rho_b, setup)?;
    let m_src = geometry::source_magnification(setup);
    let a = mask.transmission_at(arg).norm_sqr();
    let f = pump.amplitude([-rho_b[0] / m_src, -rho_b[1] / m_src]);
    Ok(a * f * f)
}

/// Object point dominating Γ(rho_a, rho_b) by stationarity of the phase in
/// rho_s: -(z_b/z_bF)(rho_a/m) - (rho_b/M)(1 - z_b/z_bF).
pub fn stationary_object_point(
    rho_a: [f64; 2],
    rho_b: [f64; 2],
    setup: &OpticalSetup,
) -> Result<[f64; 2]> {
    let derived = geometry::DerivedGeometry::from_setup(setup)?;
    let (z_bf, m, m_src) = (derived.z_bf, derived.m, derived.m_src);
    let ratio = setup.z_b / z_bf;
    let tilt = 1.0 - ratio;
    Ok([
        -ratio * rho_a[0] / m - rho_b[0] / m_src * tilt,
        -ratio * rho_a[1] / m - rho_b[1] / m_src * tilt,
    ])
}

/// Source point focused onto sensor pixel rho_b: rho_s = -rho_b / M.
pub fn stationary_source_point(rho_b: [f64; 2], m_src: f64) -> [f64; 2] {
    [-rho_b[0] / m_src, -rho_b[1] / m_src]
}
