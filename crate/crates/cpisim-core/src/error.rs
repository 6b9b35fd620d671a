//! Error type shared by every module of the simulator.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the simulation pipeline.
#[derive(Debug)]
pub enum Error {
    /// Thin-lens inversion has no positive, finite object-plane solution.
    NoFocus(String),
    /// The two-photon imaging is collimated: zeta diverges and the reduced
    /// arm-a propagator is undefined.
    InfiniteZeta,
    /// Mask feature smaller than twice the object-grid pitch.
    UnderresolvedMask { feature: f64, pitch: f64 },
    /// Double-slit bands intersect or touch.
    Overlap { separation: f64, width: f64 },
    /// Requested aperture does not fit inside the object grid.
    GridTooSmall { needed: f64, extent: f64 },
    /// Lens of zero focal length.
    ZeroFocal,
    /// A quadrature grid cannot resolve the integrand phase. `integral`
    /// names the offending integral ("source", "object" or "fresnel kernel").
    UndersampledQuadrature {
        integral: &'static str,
        pitch: f64,
        limit: f64,
    },
    /// The fast evaluation path supports only the Gaussian pump model.
    NonGaussianPump,
    /// Operation requires the two-photon focusing condition z_b = z_bF.
    NotAtFocus { z_b: f64, z_bf: f64 },
    /// Normalization reference vanishes.
    ZeroReference,
    /// Misfocus ratio alpha is zero.
    AlphaZero,
    /// Sampling grid with invalid pitch or count.
    InvalidGrid(String),
    /// Field values are not finite or do not match their grid.
    InvalidField(String),
    /// Scenario text could not be parsed.
    Parse { line: usize, message: String },
    /// Scenario parsed but violates a model invariant.
    Validation(String),
    Io(std::io::Error),
}

impl Error {
    /// Process exit status for the CLI: 2 for configuration problems,
    /// 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NoFocus(msg) => write!(f, "no ghost focus: {msg}"),
            Error::InfiniteZeta => write!(f, "zeta is infinite (collimated two-photon imaging)"),
            Error::UnderresolvedMask { feature, pitch } => write!(
                f,
                "mask feature {feature} mm underresolved at pitch {pitch} mm (need feature >= 2*pitch)"
            ),
            Error::Overlap { separation, width } => write!(
                f,
                "double-slit bands overlap: separation {separation} mm <= width {width} mm"
            ),
            Error::GridTooSmall { needed, extent } => write!(
                f,
                "grid extent {extent} mm too small for aperture extent {needed} mm"
            ),
            Error::ZeroFocal => write!(f, "zero focal length"),
            Error::UndersampledQuadrature {
                integral,
                pitch,
                limit,
            } => write!(
                f,
                "undersampled {integral} integral: pitch {pitch} mm exceeds phase limit {limit} mm"
            ),
            Error::NonGaussianPump => {
                write!(f, "fast path requires the Gaussian pump model")
            }
            Error::NotAtFocus { z_b, z_bf } => write!(
                f,
                "configuration not at two-photon focus: z_b = {z_b} mm, z_bF = {z_bf} mm"
            ),
            Error::ZeroReference => write!(f, "normalization reference is zero"),
            Error::AlphaZero => write!(f, "misfocus ratio alpha is zero"),
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::InvalidField(msg) => write!(f, "invalid field: {msg}"),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
