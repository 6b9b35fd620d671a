//! Setup parameters of the two-arm CPI bench and all derived scalar
//! geometry: zeta, the two-photon focus plane, magnifications and the
//! misfocus ratio alpha.
//!
//! All lengths are millimeters; every quantity here is closed-form, with
//! no paraxial re-approximation beyond the model itself.

use crate::error::{Error, Result};

/// Relative tolerance for "is this configuration focused" checks and for
/// the source-imaging invariant.
pub const FOCUS_REL_TOL: f64 = 1e-9;

/// Geometric and optical parameters of the bench.
///
/// Arm a: source --(z_a)--> lens L_a (focal f) --(z_a_img)--> sensor S_a.
/// Arm b: source --(z_b)--> object --(z_b_obj_lens)--> lens L_b (focal f_b)
/// --(z_b_lens_sens)--> sensor S_b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalSetup {
    pub z_a: f64,
    pub z_a_img: f64,
    pub f: f64,
    pub z_b: f64,
    pub z_b_obj_lens: f64,
    pub z_b_lens_sens: f64,
    pub f_b: f64,
    /// Degenerate SPDC wavelength, millimeters.
    pub lambda: f64,
    /// Gaussian pump width parameter, millimeters.
    pub sigma: f64,
}

impl OpticalSetup {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        z_a: f64,
        z_a_img: f64,
        f: f64,
        z_b: f64,
        z_b_obj_lens: f64,
        z_b_lens_sens: f64,
        f_b: f64,
        lambda: f64,
        sigma: f64,
    ) -> Result<Self> {
        let setup = Self {
            z_a,
            z_a_img,
            f,
            z_b,
            z_b_obj_lens,
            z_b_lens_sens,
            f_b,
            lambda,
            sigma,
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("z_a", self.z_a),
            ("z_a_img", self.z_a_img),
            ("f", self.f),
            ("z_b", self.z_b),
            ("z_b_obj_lens", self.z_b_obj_lens),
            ("z_b_lens_sens", self.z_b_lens_sens),
            ("f_b", self.f_b),
            ("lambda", self.lambda),
            ("sigma", self.sigma),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        // Source-imaging condition of arm b.
        let lhs = 1.0 / (self.z_b_obj_lens + self.z_b_lens_sens) + 1.0 / self.z_b;
        let rhs = 1.0 / self.f_b;
        if (lhs - rhs).abs() > FOCUS_REL_TOL * rhs.abs() {
            return Err(Error::Validation(format!(
                "source-imaging condition violated: 1/(z_b' + z_b'') + 1/z_b = {lhs} but 1/F_b = {rhs}"
            )));
        }
        Ok(())
    }

    /// Omega/c = 2 pi / lambda, in 1/mm.
    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.lambda
    }
}

/// Outcome of the zeta composition: a finite length or the collimated flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Zeta {
    Finite(f64),
    Infinite,
}

impl Zeta {
    pub fn finite(self) -> Option<f64> {
        match self {
            Zeta::Finite(v) => Some(v),
            Zeta::Infinite => None,
        }
    }
}

/// zeta(z_a, z_a') = (1/z_a + 1/z_a' - 1/f)^(-1); infinite when the
/// parenthesis vanishes (collimated two-photon imaging).
pub fn zeta(z_a: f64, z_a_img: f64, f: f64) -> Zeta {
    let s = 1.0 / z_a + 1.0 / z_a_img - 1.0 / f;
    if s == 0.0 {
        Zeta::Infinite
    } else {
        Zeta::Finite(1.0 / s)
    }
}

/// Solve the two-photon thin lens 1/(z_a + z_bF) + 1/z_a' = 1/f for the
/// focused object distance z_bF.
pub fn solve_ghost_focus(z_a: f64, z_a_img: f64, f: f64) -> Result<f64> {
    let inv = 1.0 / f - 1.0 / z_a_img;
    if inv <= 0.0 {
        return Err(Error::NoFocus(format!(
            "1/f - 1/z_a_img = {inv} <= 0 (object plane at or beyond infinity)"
        )));
    }
    let z_bf = 1.0 / inv - z_a;
    if z_bf <= 0.0 {
        return Err(Error::NoFocus(format!(
            "solved z_bF = {z_bf} mm is behind the source"
        )));
    }
    Ok(z_bf)
}

/// Ghost-image magnification m = z_a' / (z_a + z_bF).
pub fn ghost_magnification(z_a: f64, z_a_img: f64, z_bf: f64) -> f64 {
    z_a_img / (z_a + z_bf)
}

/// Magnification of the source image on S_b: M = z_b'' / (z_b + z_b').
pub fn source_magnification(setup: &OpticalSetup) -> f64 {
    setup.z_b_lens_sens / (setup.z_b + setup.z_b_obj_lens)
}

/// Misfocus ratio alpha: the plane where the ghost image of the actual
/// object would focus, over the actual sensor distance. alpha = 1 at focus.
pub fn misfocus_alpha(setup: &OpticalSetup) -> Result<f64> {
    let inv = 1.0 / setup.f - 1.0 / (setup.z_a + setup.z_b);
    if inv <= 0.0 {
        return Err(Error::NoFocus(format!(
            "ghost image of the object at z_b = {} mm does not focus",
            setup.z_b
        )));
    }
    Ok(1.0 / (inv * setup.z_a_img))
}

/// Object distance that produces a given misfocus ratio alpha; used by the
/// depth-of-field sweeps.
pub fn z_b_for_alpha(z_a: f64, z_a_img: f64, f: f64, alpha: f64) -> Result<f64> {
    if alpha == 0.0 {
        return Err(Error::AlphaZero);
    }
    let inv = 1.0 / f - 1.0 / (alpha * z_a_img);
    if inv <= 0.0 {
        return Err(Error::NoFocus(format!(
            "alpha = {alpha} puts the conjugate plane at or beyond infinity"
        )));
    }
    let z_b = 1.0 / inv - z_a;
    if z_b <= 0.0 {
        return Err(Error::NoFocus(format!(
            "alpha = {alpha} requires z_b = {z_b} mm <= 0"
        )));
    }
    Ok(z_b)
}

/// All derived geometry of a setup in one place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedGeometry {
    pub zeta: Zeta,
    /// Object distance satisfying the two-photon thin lens.
    pub z_bf: f64,
    /// Ghost-image magnification at focus.
    pub m: f64,
    /// Source-image magnification on S_b.
    pub m_src: f64,
    /// Misfocus ratio of the actual z_b.
    pub alpha: f64,
}

impl DerivedGeometry {
    pub fn from_setup(setup: &OpticalSetup) -> Result<Self> {
        let z_bf = solve_ghost_focus(setup.z_a, setup.z_a_img, setup.f)?;
        Ok(Self {
            zeta: zeta(setup.z_a, setup.z_a_img, setup.f),
            z_bf,
            m: ghost_magnification(setup.z_a, setup.z_a_img, z_bf),
            m_src: source_magnification(setup),
            alpha: misfocus_alpha(setup)?,
        })
    }

    /// Whether the actual object plane is the two-photon focus plane.
    pub fn at_focus(&self, z_b: f64) -> bool {
        (z_b - self.z_bf).abs() <= FOCUS_REL_TOL * self.z_bf
    }
}
