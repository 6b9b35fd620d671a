//! Scenario execution: grid construction, mode dispatch, artifact writing.

use crate::analysis;
use crate::correlation::{EvalContext, EvalPath, QuadratureSpec};
use crate::error::{Error, Result};
use crate::geometry::{self, OpticalSetup};
use crate::output::{write_image, write_profile};
use crate::refocus::{
    normalize, refocused_image, unrefocused_image, viewpoint_image, Image, Normalization,
};
use crate::scenario::{ObjectSpec, RunMode, Scenario};
use crate::scene::{
    make_double_slit, make_letter_e, make_slit, mask_from_file, ApertureMask, PumpProfile,
    SampledGrid,
};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// One file produced by a run.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub path: PathBuf,
    pub description: String,
}

/// Rebuild arm b for a new object distance, preserving the source-image
/// magnification M and the imaging invariant (the object slides along the
/// arm; lens and sensor follow proportionally).
pub fn retarget_z_b(setup: &OpticalSetup, z_b_new: f64) -> Result<OpticalSetup> {
    if !(z_b_new > 0.0) {
        return Err(Error::Validation(format!(
            "retargeted z_b must be positive, got {z_b_new}"
        )));
    }
    let ratio = setup.z_b_obj_lens / setup.z_b;
    let m_src = geometry::source_magnification(setup);
    let z_bo = z_b_new * ratio;
    let z_bs = m_src * (z_b_new + z_bo);
    let f_b = 1.0 / (1.0 / (z_bo + z_bs) + 1.0 / z_b_new);
    OpticalSetup::new(
        setup.z_a,
        setup.z_a_img,
        setup.f,
        z_b_new,
        z_bo,
        z_bs,
        f_b,
        setup.lambda,
        setup.sigma,
    )
}

/// Sensor grids for the scenario, sized by the object dimensionality.
fn sensor_grids(scenario: &Scenario, dim: usize) -> Result<(SampledGrid, SampledGrid)> {
    let s = &scenario.sensor;
    let make = |count: usize| -> Result<SampledGrid> {
        if dim == 1 {
            SampledGrid::line(s.pixel, count, 0.0)
        } else {
            SampledGrid::square(s.pixel, count, [0.0, 0.0])
        }
    };
    Ok((make(s.count_a)?, make(s.count_b)?))
}

/// Every setup a run will evaluate (sweep regenerates one per alpha).
fn setups_for_run(scenario: &Scenario) -> Result<Vec<OpticalSetup>> {
    match scenario.run.mode {
        RunMode::Sweep => scenario
            .run
            .alpha_list
            .iter()
            .map(|alpha| {
                let z_b = geometry::z_b_for_alpha(
                    scenario.setup.z_a,
                    scenario.setup.z_a_img,
                    scenario.setup.f,
                    *alpha,
                )?;
                retarget_z_b(&scenario.setup, z_b)
            })
            .collect(),
        RunMode::Refocus => {
            let derived = geometry::DerivedGeometry::from_setup(&scenario.setup)?;
            Ok(vec![
                scenario.setup,
                retarget_z_b(&scenario.setup, derived.z_bf)?,
            ])
        }
        _ => Ok(vec![scenario.setup]),
    }
}

/// Build the object mask. Built-ins sample at feature/4, tightened to the
/// pi limit of whichever per-sample evaluations the mode will perform.
fn build_mask(scenario: &Scenario, grid_a: &SampledGrid) -> Result<ApertureMask> {
    let (feature, half_extent, dim) = match &scenario.object {
        ObjectSpec::Slit { width } => (*width, width / 2.0, 1),
        ObjectSpec::DoubleSlit { width, separation } => {
            (*width, (separation + width) / 2.0, 1)
        }
        ObjectSpec::LetterE { stroke } => (*stroke, 2.5 * stroke, 2),
        ObjectSpec::File { path } => return mask_from_file(Path::new(path)),
    };
    let mut pitch = feature / 4.0;
    let pump = PumpProfile::new(scenario.setup.sigma)?;
    let quad = QuadratureSpec::default();

    // Worst-case per-sample phase rate across the setups this run touches.
    let mut worst_rate: f64 = 0.0;
    for setup in setups_for_run(scenario)? {
        let ctx = EvalContext::new(&setup, &pump)?;
        let max_o = half_extent + feature;
        let rate = match (scenario.run.mode, scenario.run.path) {
            // Image integration for rectangle masks is closed-form; only
            // viewpoint slices and sweep coherent profiles sample the mask.
            (RunMode::Viewpoint, EvalPath::Fast) => {
                let max_b = scenario
                    .run
                    .rho_b_mm
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()));
                ctx.object_rate_fast(grid_a.max_abs_coord(), max_b, max_o)
            }
            (RunMode::Sweep, EvalPath::Fast) => {
                ctx.object_rate_fast(grid_a.max_abs_coord(), 0.0, max_o)
            }
            (_, EvalPath::Fast) => 0.0,
            // The oracle integrand oscillates with the full pump domain.
            (_, EvalPath::Oracle) => {
                let half = quad.pump_half_width_sigmas * setup.sigma;
                let max_b = scenario.sensor.pixel * scenario.sensor.count_b as f64 / 2.0;
                setup.wavenumber() * (half + max_b / ctx.m_src) / setup.z_b
            }
        };
        worst_rate = worst_rate.max(rate);
    }
    if worst_rate > 0.0 {
        pitch = pitch.min(PI / worst_rate / 2.0);
    }

    let mut count = (2.0 * half_extent / pitch).ceil() as usize + 5;
    if count % 2 == 0 {
        count += 1;
    }
    let grid = if dim == 1 {
        SampledGrid::line(pitch, count, 0.0)?
    } else {
        SampledGrid::square(pitch, count, [0.0, 0.0])?
    };
    match &scenario.object {
        ObjectSpec::Slit { width } => make_slit(*width, &grid),
        ObjectSpec::DoubleSlit { width, separation } => {
            make_double_slit(*width, *separation, &grid)
        }
        ObjectSpec::LetterE { stroke } => make_letter_e(*stroke, &grid),
        ObjectSpec::File { .. } => unreachable!(),
    }
}

struct Writer<'a> {
    out_dir: &'a Path,
    prefix: &'a str,
    hash: String,
    artifacts: Vec<Artifact>,
}

impl<'a> Writer<'a> {
    fn emit(&mut self, image: Image, stem: &str, what: &str) -> Result<()> {
        let description = if image.label.is_empty() {
            what.to_string()
        } else {
            format!("{what}: {}", image.label)
        };
        if image.grid.dim == 2 {
            let path = self.out_dir.join(format!("{}_{stem}.pgm", self.prefix));
            let peak = normalize(image, Normalization::Peak)?;
            write_image(&peak, &path, &self.hash)?;
            self.artifacts.push(Artifact { path, description });
        } else {
            let path = self.out_dir.join(format!("{}_{stem}.csv", self.prefix));
            let peak = normalize(image.clone(), Normalization::Peak)?;
            write_profile(&peak, &path)?;
            self.artifacts.push(Artifact {
                path,
                description: description.clone(),
            });
            match normalize(image, Normalization::Center) {
                Ok(center) => {
                    let path = self
                        .out_dir
                        .join(format!("{}_{stem}_center.csv", self.prefix));
                    write_profile(&center, &path)?;
                    self.artifacts.push(Artifact {
                        path,
                        description: format!("{description} (center-normalized)"),
                    });
                }
                Err(Error::ZeroReference) => {
                    log::warn!("{stem}: center sample is zero, skipping center normalization");
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

/// Execute a scenario, writing all artifacts under `out_dir`.
pub fn run(scenario: &Scenario, out_dir: &Path) -> Result<Vec<Artifact>> {
    std::fs::create_dir_all(out_dir)?;
    let pump = PumpProfile::new(scenario.setup.sigma)?;
    let quad = QuadratureSpec::default();
    let mut writer = Writer {
        out_dir,
        prefix: &scenario.run.out_prefix,
        hash: scenario.hash(),
        artifacts: Vec::new(),
    };

    if scenario.run.mode == RunMode::Dof {
        let feature = match &scenario.object {
            ObjectSpec::File { path } => mask_from_file(Path::new(path))?.smallest_feature,
            other => other.feature().unwrap(),
        };
        let report = analysis::compare_report(&scenario.setup, &pump, &scenario.sensor, feature)?;
        let alpha = geometry::misfocus_alpha(&scenario.setup)?;
        let derived = geometry::DerivedGeometry::from_setup(&scenario.setup)?;
        let path = out_dir.join(format!("{}_dof.txt", scenario.run.out_prefix));
        std::fs::write(&path, dof_table(scenario, &report, alpha, derived.m, feature))?;
        writer.artifacts.push(Artifact {
            path,
            description: "depth-of-field comparison".into(),
        });
        return Ok(writer.artifacts);
    }

    let mask = build_mask(scenario, &sensor_grids(scenario, 1)?.0)?;
    let dim = mask.grid.dim;
    let (grid_a, grid_b) = sensor_grids(scenario, dim)?;
    let path = scenario.run.path;

    match scenario.run.mode {
        RunMode::Ghost => {
            let derived = geometry::DerivedGeometry::from_setup(&scenario.setup)?;
            if !derived.at_focus(scenario.setup.z_b) {
                return Err(Error::NotAtFocus {
                    z_b: scenario.setup.z_b,
                    z_bf: derived.z_bf,
                });
            }
            let img = unrefocused_image(
                &mask,
                &pump,
                &scenario.setup,
                &grid_a,
                &grid_b,
                path,
                &quad,
            )?;
            writer.emit(img, "ghost", "focused incoherent ghost image")?;
        }
        RunMode::Misfocus => {
            let img = unrefocused_image(
                &mask,
                &pump,
                &scenario.setup,
                &grid_a,
                &grid_b,
                path,
                &quad,
            )?;
            writer.emit(img, "misfocus", "misfocused ghost image")?;
        }
        RunMode::Refocus => {
            let derived = geometry::DerivedGeometry::from_setup(&scenario.setup)?;
            let focused_setup = retarget_z_b(&scenario.setup, derived.z_bf)?;
            let focused = unrefocused_image(
                &mask,
                &pump,
                &focused_setup,
                &grid_a,
                &grid_b,
                path,
                &quad,
            )?;
            writer.emit(focused, "focused", "focused reference")?;
            let misfocused = unrefocused_image(
                &mask,
                &pump,
                &scenario.setup,
                &grid_a,
                &grid_b,
                path,
                &quad,
            )?;
            writer.emit(misfocused, "misfocused", "misfocused ghost image")?;
            let refocused = refocused_image(
                &mask,
                &pump,
                &scenario.setup,
                &grid_a,
                &grid_b,
                path,
                &quad,
            )?;
            writer.emit(refocused, "refocused", "refocused ghost image")?;
        }
        RunMode::Viewpoint => {
            for rho in &scenario.run.rho_b_mm {
                let img = viewpoint_image(
                    &mask,
                    &pump,
                    &scenario.setup,
                    &grid_a,
                    [*rho, 0.0],
                    path,
                    &quad,
                )?;
                writer.emit(img, &format!("vp{rho}"), "viewpoint projection")?;
            }
        }
        RunMode::Sweep => {
            for alpha in &scenario.run.alpha_list {
                let z_b = geometry::z_b_for_alpha(
                    scenario.setup.z_a,
                    scenario.setup.z_a_img,
                    scenario.setup.f,
                    *alpha,
                )?;
                let setup = retarget_z_b(&scenario.setup, z_b)?;
                let coherent =
                    viewpoint_image(&mask, &pump, &setup, &grid_a, [0.0, 0.0], path, &quad)?;
                writer.emit(coherent, &format!("a{alpha}_coherent"), "coherent profile")?;
                let incoherent =
                    unrefocused_image(&mask, &pump, &setup, &grid_a, &grid_b, path, &quad)?;
                writer.emit(
                    incoherent,
                    &format!("a{alpha}_incoherent"),
                    "incoherent profile",
                )?;
            }
        }
        RunMode::Dof => unreachable!(),
    }
    Ok(writer.artifacts)
}

fn dof_table(
    scenario: &Scenario,
    report: &analysis::DofReport,
    alpha: f64,
    m: f64,
    feature: f64,
) -> String {
    let s = &scenario.sensor;
    let dx_single = report.n_u_required as f64 * s.pixel;
    let dx_double = 2.0 * dx_single;
    let du_cpi = 2.0 * report.effective_lens_diameter / s.count_b as f64;
    let pixel_refocusable =
        analysis::refocusable(alpha, 2.0 * s.pixel, du_cpi).unwrap_or(false);
    let feature_refocusable =
        analysis::refocusable(alpha, m * feature, du_cpi).unwrap_or(false);
    format!(
        "depth-of-field comparison: CPI vs standard plenoptic camera\n\
         pixel_mm = {pixel}\n\
         n_a = {na}\n\
         n_b = {nb}\n\
         n_tot = {ntot}\n\
         alpha = {alpha:.6}\n\
         effective_lens_diameter_mm = {dsl:.6}\n\
         dof_ratio_cpi = {cpi:.6}\n\
         dof_ratio_standard = {std:.6}\n\
         n_u_required = {nu}\n\
         resolution_loss_factor = {loss}\n\
         dx_standard_mm_delta_nu = {dx1:.6}\n\
         dx_standard_mm_2delta_nu = {dx2:.6}\n\
         spot_object_mm = {soa:.6}\n\
         spot_source_mm = {sob:.6}\n\
         refocusable_pixel_dx = {rp}\n\
         refocusable_feature_dx = {rf}\n",
        pixel = s.pixel,
        na = s.count_a,
        nb = s.count_b,
        ntot = s.n_tot(),
        alpha = alpha,
        dsl = report.effective_lens_diameter,
        cpi = report.ratio_cpi,
        std = report.ratio_std,
        nu = report.n_u_required,
        loss = report.resolution_loss_factor,
        dx1 = dx_single,
        dx2 = dx_double,
        soa = report.spot_object,
        sob = report.spot_source,
        rp = pixel_refocusable,
        rf = feature_refocusable,
    )
}
