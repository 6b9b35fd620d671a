//! Paraxial building blocks: the quadratic-phase kernel, free-space
//! Fresnel propagation by direct quadrature, thin-lens phase, and the
//! reduced single-arm propagators of the bench.

use crate::error::{Error, Result};
use crate::geometry::{zeta, OpticalSetup};
use crate::kahan::KahanComplex;
use crate::scene::SampledGrid;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Sampled complex field on a transverse grid.
#[derive(Debug, Clone)]
pub struct ComplexField {
    pub grid: SampledGrid,
    pub values: Vec<Complex64>,
    /// Omega/c = 2 pi / lambda, 1/mm.
    pub wavenumber: f64,
}

impl ComplexField {
    pub fn new(grid: SampledGrid, values: Vec<Complex64>, wavenumber: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "{} values on a {}-sample grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidField("non-finite sample".into()));
        }
        if !(wavenumber > 0.0) {
            return Err(Error::InvalidField(format!(
                "wavenumber must be positive, got {wavenumber}"
            )));
        }
        Ok(Self {
            grid,
            values,
            wavenumber,
        })
    }
}

/// G(x)_[y] = exp(i y |x|^2 / 2): unit-modulus quadratic phase.
#[inline]
pub fn quadratic_phase(x: [f64; 2], curvature: f64) -> Complex64 {
    let r2 = x[0] * x[0] + x[1] * x[1];
    Complex64::from_polar(1.0, 0.5 * curvature * r2)
}

fn fresnel_prefactor(k: f64, z: f64, dim: usize) -> Complex64 {
    // 2-D kernel: -i k e^{ikz} / (2 pi z); 1-D carries its square root.
    let c = Complex64::new(0.0, -k / (2.0 * PI * z));
    let phase = Complex64::from_polar(1.0, k * z);
    match dim {
        1 => c.sqrt() * phase,
        _ => c * phase,
    }
}

fn propagate_impl(
    field: &ComplexField,
    distance: f64,
    out_grid: &SampledGrid,
    conjugate_kernel: bool,
) -> Result<ComplexField> {
    if !(distance > 0.0) {
        return Err(Error::Validation(format!(
            "propagation distance must be positive, got {distance}"
        )));
    }
    let k = field.wavenumber;
    let g_in = &field.grid;
    // Adjacent input samples must advance the kernel phase by less than pi
    // at the worst separation seen by any output sample.
    let max_sep = g_in.max_abs_coord() + out_grid.max_abs_coord();
    let limit = PI * distance / (k * max_sep.max(1e-300));
    if g_in.pitch >= limit {
        return Err(Error::UndersampledQuadrature {
            integral: "fresnel kernel",
            pitch: g_in.pitch,
            limit,
        });
    }
    let pref = {
        let p = fresnel_prefactor(k, distance, g_in.dim);
        if conjugate_kernel {
            p.conj()
        } else {
            p
        }
    };
    let curvature = if conjugate_kernel {
        -k / distance
    } else {
        k / distance
    };
    let weight = g_in.cell_weight();
    let values: Vec<Complex64> = (0..out_grid.len())
        .into_par_iter()
        .map(|idx| {
            let p2 = out_grid.point(idx);
            let mut acc = KahanComplex::new();
            for (i, v) in field.values.iter().enumerate() {
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                let p1 = g_in.point(i);
                let d = [p2[0] - p1[0], p2[1] - p1[1]];
                acc.add(v * quadratic_phase(d, curvature));
            }
            acc.value() * pref * weight
        })
        .collect();
    ComplexField::new(out_grid.clone(), values, k)
}

/// Fresnel propagation over `distance` onto the caller-chosen output grid:
/// E2(p2) = sum over p1 of E1(p1) * kernel(p2 - p1, distance) * cell.
/// The full dimension-correct prefactor is included, so no global constant
/// is dropped here.
pub fn free_propagate(
    field: &ComplexField,
    distance: f64,
    out_grid: &SampledGrid,
) -> Result<ComplexField> {
    propagate_impl(field, distance, out_grid, false)
}

/// Inverse of `free_propagate` (conjugate kernel); used for round trips.
pub fn back_propagate(
    field: &ComplexField,
    distance: f64,
    out_grid: &SampledGrid,
) -> Result<ComplexField> {
    propagate_impl(field, distance, out_grid, true)
}

/// Thin lens of the given focal length: multiplies each sample by
/// G(rho)_[-k/focal]. `focal = +inf` is the no-lens identity.
pub fn lens_phase(field: &ComplexField, focal: f64) -> Result<ComplexField> {
    if focal == 0.0 {
        return Err(Error::ZeroFocal);
    }
    let k = field.wavenumber;
    let g = &field.grid;
    let values = field
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v * quadratic_phase(g.point(i), -k / focal))
        .collect();
    ComplexField::new(g.clone(), values, k)
}

/// Reduced arm-a propagator factor (the rho_s-dependent part only):
/// G(rho_s)_[(k/z_a)(1 - zeta/z_a)] * exp(-i k zeta/(z_a z_a') rho_s . rho_a).
/// The rho_a-only prefactor phase and constants are dropped; they cancel
/// inside |.|^2 of the correlation function.
pub fn green_a_reduced(
    rho_a: [f64; 2],
    rho_s: [f64; 2],
    setup: &OpticalSetup,
) -> Result<Complex64> {
    let z = zeta(setup.z_a, setup.z_a_img, setup.f)
        .finite()
        .ok_or(Error::InfiniteZeta)?;
    let k = setup.wavenumber();
    let curvature = (k / setup.z_a) * (1.0 - z / setup.z_a);
    let cross = -k * z / (setup.z_a * setup.z_a_img) * (rho_s[0] * rho_a[0] + rho_s[1] * rho_a[1]);
    Ok(quadratic_phase(rho_s, curvature) * Complex64::from_polar(1.0, cross))
}

/// Reduced arm-b propagator factor under the source-imaging condition:
/// G(rho_s)_[k/z_b] * exp(-i (k/z_b)(rho_s + rho_b/M) . rho_o).
pub fn green_b_reduced(
    rho_b: [f64; 2],
    rho_s: [f64; 2],
    rho_o: [f64; 2],
    setup: &OpticalSetup,
) -> Complex64 {
    let k = setup.wavenumber();
    let m = crate::geometry::source_magnification(setup);
    let dot = (rho_s[0] + rho_b[0] / m) * rho_o[0] + (rho_s[1] + rho_b[1] / m) * rho_o[1];
    quadratic_phase(rho_s, k / setup.z_b) * Complex64::from_polar(1.0, -k / setup.z_b * dot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn delta_field(grid: &SampledGrid, at: usize, k: f64) -> ComplexField {
        let mut v = vec![Complex64::new(0.0, 0.0); grid.len()];
        v[at] = Complex64::new(1.0, 0.0);
        ComplexField::new(grid.clone(), v, k).unwrap()
    }

    #[test]
    fn quadratic_phase_values() {
        assert_relative_eq!(quadratic_phase([0.0, 0.0], 123.0).re, 1.0);
        // |x|^2 y = 2 pi wraps to 1.
        let v = quadratic_phase([2.0, 0.0], PI);
        assert_relative_eq!(v.re, 1.0, epsilon = 1e-12);
        assert!(v.im.abs() < 1e-12);
        // x = 1 mm, y = pi mm^-2 -> exp(i pi/2) = i.
        let v = quadratic_phase([1.0, 0.0], PI);
        assert!((v - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn point_source_propagates_to_flat_modulus_kernel() {
        let k = 2.0 * PI / 0.05; // lambda = 50 um
        let g = SampledGrid::line(0.02, 257, 0.0).unwrap();
        let src = delta_field(&g, 128, k);
        let out = free_propagate(&src, 20.0, &g).unwrap();
        let mags: Vec<f64> = out.values.iter().map(|v| v.norm()).collect();
        let (lo, hi) = mags
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), m| {
                (a.min(*m), b.max(*m))
            });
        assert!(hi > 0.0 && (hi - lo) / hi < 1e-12);
    }

    #[test]
    fn gaussian_beam_matches_closed_form() {
        // 1-D Gaussian E = exp(-x^2/w0^2) propagated a distance z has the
        // closed form sqrt(pi/q) based profile; compare moduli at 1e-3.
        let lambda = 0.01; // 10 um
        let k = 2.0 * PI / lambda;
        let w0 = 0.3;
        let z = 20.0;
        let g_in = SampledGrid::line(0.005, 1201, 0.0).unwrap();
        let vals = (0..g_in.count)
            .map(|i| {
                let x = g_in.axis_coord(0, i);
                Complex64::new((-x * x / (w0 * w0)).exp(), 0.0)
            })
            .collect();
        let field = ComplexField::new(g_in.clone(), vals, k).unwrap();
        let g_out = SampledGrid::line(0.01, 301, 0.0).unwrap();
        let out = free_propagate(&field, z, &g_out).unwrap();

        // Oracle: E2(x) = pref * e^{ikx^2/2z} sqrt(pi/q) exp(-(kx/z)^2/(4q)),
        // q = 1/w0^2 - ik/(2z).
        let q = Complex64::new(1.0 / (w0 * w0), -k / (2.0 * z));
        let pref = fresnel_prefactor(k, z, 1);
        let analytic_waist = w0 * (1.0 + (2.0 * z / (k * w0 * w0)).powi(2)).sqrt();
        for i in 0..g_out.count {
            let x = g_out.axis_coord(0, i);
            let want = (pref * (PI / q).sqrt() * ((-(k * x / z).powi(2)) / (4.0 * q)).exp()).norm();
            let got = out.values[i].norm();
            assert!(
                (got - want).abs() <= 1e-3 * want.max(1e-6),
                "x = {x}: {got} vs {want}"
            );
        }
        // Peak modulus ratio encodes the analytic waist growth.
        let peak = out.values[150].norm();
        assert_relative_eq!(peak, (w0 / analytic_waist).sqrt(), max_relative = 2e-3);
    }

    #[test]
    fn round_trip_recovers_interior() {
        let lambda = 0.02;
        let k = 2.0 * PI / lambda;
        let w0 = 0.4;
        let g = SampledGrid::line(0.01, 801, 0.0).unwrap();
        let vals: Vec<Complex64> = (0..g.count)
            .map(|i| {
                let x = g.axis_coord(0, i);
                Complex64::new((-x * x / (w0 * w0)).exp(), 0.0)
            })
            .collect();
        let field = ComplexField::new(g.clone(), vals.clone(), k).unwrap();
        let fwd = free_propagate(&field, 15.0, &g).unwrap();
        let back = back_propagate(&fwd, 15.0, &g).unwrap();
        // Interior samples (avoid the outer eighth on each side).
        let n = g.count;
        for i in n / 8..(7 * n / 8) {
            let want = vals[i];
            let got = back.values[i];
            assert!(
                (got - want).norm() <= 1e-6 * want.norm().max(1e-3),
                "sample {i}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn lens_focuses_plane_wave() {
        let lambda = 0.01;
        let k = 2.0 * PI / lambda;
        let g = SampledGrid::line(0.01, 801, 0.0).unwrap();
        let vals = vec![Complex64::new(1.0, 0.0); g.len()];
        let field = ComplexField::new(g.clone(), vals, k).unwrap();
        let focal = 30.0;
        let after = lens_phase(&field, focal).unwrap();
        let out_grid = SampledGrid::line(0.01, 201, 0.0).unwrap();
        let focused = free_propagate(&after, focal, &out_grid).unwrap();
        let peak_idx = focused
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        let peak_x = out_grid.axis_coord(0, peak_idx);
        assert!(peak_x.abs() <= 2.0 * out_grid.pitch, "peak at {peak_x}");
        // Energy concentrated near the axis.
        let peak = focused.values[peak_idx].norm();
        let off = focused.values[peak_idx + 40].norm();
        assert!(off < 0.05 * peak);
    }

    #[test]
    fn lens_identity_cases() {
        let g = SampledGrid::line(0.01, 11, 0.0).unwrap();
        let vals = vec![Complex64::new(0.3, -0.1); g.len()];
        let f = ComplexField::new(g, vals, 100.0).unwrap();
        // Axial sample unchanged by any lens.
        let out = lens_phase(&f, 17.0).unwrap();
        assert_relative_eq!(out.values[5].re, 0.3);
        // Infinite focal length is the identity.
        let out = lens_phase(&f, f64::INFINITY).unwrap();
        for (a, b) in out.values.iter().zip(f.values.iter()) {
            assert_relative_eq!(a.re, b.re);
            assert_relative_eq!(a.im, b.im);
        }
        assert!(matches!(lens_phase(&f, 0.0), Err(Error::ZeroFocal)));
    }

    #[test]
    fn propagation_is_linear() {
        let k = 2.0 * PI / 0.05;
        let g = SampledGrid::line(0.02, 201, 0.0).unwrap();
        let e1 = delta_field(&g, 90, k);
        let e2 = delta_field(&g, 120, k);
        let combo_vals: Vec<Complex64> = e1
            .values
            .iter()
            .zip(e2.values.iter())
            .map(|(a, b)| 2.0 * a + Complex64::new(0.0, -0.5) * b)
            .collect();
        let combo = ComplexField::new(g.clone(), combo_vals, k).unwrap();
        let p1 = free_propagate(&e1, 12.0, &g).unwrap();
        let p2 = free_propagate(&e2, 12.0, &g).unwrap();
        let pc = free_propagate(&combo, 12.0, &g).unwrap();
        for i in 0..g.count {
            let want = 2.0 * p1.values[i] + Complex64::new(0.0, -0.5) * p2.values[i];
            assert!((pc.values[i] - want).norm() <= 1e-12 * want.norm().max(1e-12));
        }
    }

    #[test]
    fn undersampled_kernel_is_rejected() {
        let k = 2.0 * PI / 1e-3; // lambda = 1 um: far too fine for this grid
        let g = SampledGrid::line(0.05, 101, 0.0).unwrap();
        let f = delta_field(&g, 50, k);
        assert!(matches!(
            free_propagate(&f, 5.0, &g),
            Err(Error::UndersampledQuadrature { .. })
        ));
    }

    fn paper_setup_zb(z_b: f64) -> OpticalSetup {
        let z_bo = z_b / 4.0;
        let f_b = 1.0 / (1.0 / (z_bo + z_b) + 1.0 / z_b);
        OpticalSetup::new(10.0, 30.0, 12.0, z_b, z_bo, z_b, f_b, 1e-3, 0.6).unwrap()
    }

    #[test]
    fn green_a_reduced_values() {
        let s = paper_setup_zb(10.0);
        // rho_s = 0 is unity for any rho_a.
        let v = green_a_reduced([0.7, 0.0], [0.0, 0.0], &s).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        // Unit modulus everywhere.
        for (ra, rs) in [([0.3, 0.1], [0.2, -0.4]), ([1.5, 0.0], [0.05, 0.0])] {
            assert_relative_eq!(green_a_reduced(ra, rs, &s).unwrap().norm(), 1.0, epsilon = 1e-12);
        }
        // Plug-in phase, Section-3 numbers: rho_s = 0.1, rho_a = 0.3 (1-D).
        let k = s.wavenumber();
        let want = k * ((0.1f64.powi(2) / 2.0) * (1.0 / 10.0) * (1.0 - 2.0)
            - (20.0 / 300.0) * 0.1 * 0.3);
        let got = green_a_reduced([0.3, 0.0], [0.1, 0.0], &s).unwrap();
        assert!((got - Complex64::from_polar(1.0, want)).norm() < 1e-9);
    }

    #[test]
    fn green_b_reduced_values() {
        let s = paper_setup_zb(3.0);
        let v = green_b_reduced([0.4, 0.0], [0.0, 0.0], [0.0, 0.0], &s);
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        for (rb, rs, ro) in [
            ([0.4, 0.0], [0.1, 0.0], [0.2, 0.0]),
            ([-0.2, 0.3], [0.0, 0.1], [0.1, -0.1]),
        ] {
            assert_relative_eq!(green_b_reduced(rb, rs, ro, &s).norm(), 1.0, epsilon = 1e-12);
        }
        // Plug-in phase: (k)[0.1^2/(2*3) - (0.1 + 0.4/0.8)*0.2/3].
        let k = s.wavenumber();
        let want = k * (0.01 / 6.0 - (0.1 + 0.5) * 0.2 / 3.0);
        let got = green_b_reduced([0.4, 0.0], [0.1, 0.0], [0.2, 0.0], &s);
        assert!((got - Complex64::from_polar(1.0, want)).norm() < 1e-9);
    }

    /// The product green_a * green_b, integrated against the pump over
    /// rho_s, against an end-to-end unreduced chain. For a fixed object
    /// point the two-photon amplitude factorizes as
    /// [propagate F(rho_s)*green_b's rho_s-factors through arm a] times an
    /// arm-b kernel that no longer depends on rho_s, so one numerical chain
    /// per rho_o validates the whole reduced inner integrand of the
    /// correlation function. The dropped rho_a-only phase and constants make
    /// the comparison a modulus-ratio constancy check.
    #[test]
    fn reduced_product_matches_unreduced_chain() {
        let lambda = 0.05; // long wavelength keeps the chain well sampled
        for z_b in [10.0, 6.0] {
            let z_bo = z_b / 4.0;
            let f_b = 1.0 / (1.0 / (z_bo + z_b) + 1.0 / z_b);
            let s = OpticalSetup::new(10.0, 30.0, 12.0, z_b, z_bo, z_b, f_b, lambda, 0.6).unwrap();
            let k = s.wavenumber();
            let pump = crate::scene::PumpProfile::new(s.sigma).unwrap();

            let src_grid = SampledGrid::line(0.005, 1921, 0.0).unwrap(); // +-4.8 mm = 8 sigma
            let lens_grid = SampledGrid::line(0.005, 4801, 0.0).unwrap(); // +-12 mm
            let sens_grid = SampledGrid::line(0.05, 43, 0.0).unwrap();

            let mut ratios: Vec<f64> = Vec::new();
            for (rho_o, rho_b) in [(0.06, 0.3), (0.06, -0.5), (-0.1, 0.3)] {
                // Source field carrying the pump and green_b's rho_s factors.
                let vals: Vec<Complex64> = (0..src_grid.count)
                    .map(|i| {
                        let rs = [src_grid.axis_coord(0, i), 0.0];
                        pump.amplitude(rs)
                            * green_b_reduced([rho_b, 0.0], rs, [rho_o, 0.0], &s)
                    })
                    .collect();
                let f0 = ComplexField::new(src_grid.clone(), vals, k).unwrap();
                let at_lens = free_propagate(&f0, s.z_a, &lens_grid).unwrap();
                let after = lens_phase(&at_lens, s.f).unwrap();
                let chain = free_propagate(&after, s.z_a_img, &sens_grid).unwrap();

                // Reduced side: direct sum over the same source samples.
                let reduced: Vec<Complex64> = (0..sens_grid.count)
                    .map(|i| {
                        let ra = [sens_grid.axis_coord(0, i), 0.0];
                        let mut acc = KahanComplex::new();
                        for j in 0..src_grid.count {
                            let rs = [src_grid.axis_coord(0, j), 0.0];
                            acc.add(
                                pump.amplitude(rs)
                                    * green_a_reduced(ra, rs, &s).unwrap()
                                    * green_b_reduced([rho_b, 0.0], rs, [rho_o, 0.0], &s),
                            );
                        }
                        acc.value() * src_grid.cell_weight()
                    })
                    .collect();

                let peak = reduced.iter().map(|v| v.norm()).fold(0.0, f64::max);
                for i in 3..sens_grid.count - 3 {
                    if reduced[i].norm() >= 0.05 * peak {
                        ratios.push(chain.values[i].norm() / reduced[i].norm());
                    }
                }
            }
            assert!(ratios.len() > 20, "too few usable samples: {}", ratios.len());
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(
                (hi - lo) / hi < 2e-3,
                "z_b = {z_b}: modulus ratio varies {lo}..{hi}"
            );
        }
    }

    /// Arm-b imaging structure: two narrow object patches propagated
    /// object -> lens L_b -> sensor S_b. The ratio of the two sensor fields
    /// must carry the linear phase exp(-i k (rho_o1 - rho_o2) rho_b/(M z_b))
    /// of the reduced propagator - the one-to-one source-sensor mapping that
    /// all viewpoint physics rests on.
    #[test]
    fn green_b_imaging_coefficient_matches_chain() {
        let lambda = 0.05;
        let z_b = 10.0;
        let z_bo = z_b / 4.0;
        let f_b = 1.0 / (1.0 / (z_bo + z_b) + 1.0 / z_b);
        let s = OpticalSetup::new(10.0, 30.0, 12.0, z_b, z_bo, z_b, f_b, lambda, 0.6).unwrap();
        let k = s.wavenumber();
        let m_src = crate::geometry::source_magnification(&s);
        assert_relative_eq!(m_src, 0.8, max_relative = 1e-12);

        let obj_grid = SampledGrid::line(0.0025, 241, 0.0).unwrap();
        let lens_grid = SampledGrid::line(0.0025, 9601, 0.0).unwrap(); // +-12 mm
        let sens_grid = SampledGrid::line(0.05, 33, 0.0).unwrap();
        let w0 = 0.01; // patch width: wide enough to suppress lens-edge ringing

        let chain = |rho_o: f64| -> Vec<Complex64> {
            let vals: Vec<Complex64> = (0..obj_grid.count)
                .map(|i| {
                    let x = obj_grid.axis_coord(0, i);
                    Complex64::new((-((x - rho_o) / w0).powi(2)).exp(), 0.0)
                })
                .collect();
            let f0 = ComplexField::new(obj_grid.clone(), vals, k).unwrap();
            let at_lens = free_propagate(&f0, s.z_b_obj_lens, &lens_grid).unwrap();
            let after = lens_phase(&at_lens, s.f_b).unwrap();
            free_propagate(&after, s.z_b_lens_sens, &sens_grid)
                .unwrap()
                .values
        };

        let (o1, o2) = (0.1, -0.1);
        let e1 = chain(o1);
        let e2 = chain(o2);
        // Remove the predicted linear phase; the rest must be constant in
        // rho_b up to the slowly varying patch factor.
        let mut phases = Vec::new();
        for i in 4..sens_grid.count - 4 {
            let rb = sens_grid.axis_coord(0, i);
            let predicted = Complex64::from_polar(1.0, -k / (m_src * s.z_b) * (o1 - o2) * rb);
            let residual = e1[i] / e2[i] / predicted;
            phases.push(residual.arg());
        }
        let mean = phases.iter().sum::<f64>() / phases.len() as f64;
        for p in &phases {
            assert!(
                (p - mean).abs() < 0.02,
                "imaging phase residual drifts: {phases:?}"
            );
        }
    }
}
