//! Config-driven scenarios: strict key-value parsing, lossless canonical
//! serialization, content hashing, and the bundled reproduction presets.

use crate::analysis::SensorSpec;
use crate::correlation::EvalPath;
use crate::error::{Error, Result};
use crate::geometry::OpticalSetup;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

/// Object description of the `[object]` section.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectSpec {
    Slit { width: f64 },
    DoubleSlit { width: f64, separation: f64 },
    /// `width_mm` doubles as the stroke thickness.
    LetterE { stroke: f64 },
    File { path: String },
}

impl ObjectSpec {
    /// Smallest feature named by the spec itself (file masks defer to the
    /// loaded data).
    pub fn feature(&self) -> Option<f64> {
        match self {
            ObjectSpec::Slit { width } => Some(*width),
            ObjectSpec::DoubleSlit { width, .. } => Some(*width),
            ObjectSpec::LetterE { stroke } => Some(*stroke),
            ObjectSpec::File { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Ghost,
    Misfocus,
    Refocus,
    Viewpoint,
    Dof,
    Sweep,
}

impl RunMode {
    fn as_str(&self) -> &'static str {
        match self {
            RunMode::Ghost => "ghost",
            RunMode::Misfocus => "misfocus",
            RunMode::Refocus => "refocus",
            RunMode::Viewpoint => "viewpoint",
            RunMode::Dof => "dof",
            RunMode::Sweep => "sweep",
        }
    }
}

/// The `[run]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mode: RunMode,
    pub path: EvalPath,
    /// Viewpoint positions on S_b, millimeters.
    pub rho_b_mm: Vec<f64>,
    /// Misfocus ratios for sweep mode.
    pub alpha_list: Vec<f64>,
    pub out_prefix: String,
}

/// A fully validated, deterministic simulation description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub setup: OpticalSetup,
    pub object: ObjectSpec,
    pub sensor: SensorSpec,
    pub run: RunSpec,
}

struct Section {
    line: usize,
    keys: BTreeMap<String, (usize, String)>,
}

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or(Error::Parse {
                line: line_no,
                message: format!("unterminated section header `{line}`"),
            })?;
            if sections.contains_key(name) {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("duplicate section [{name}]"),
                });
            }
            sections.insert(
                name.to_string(),
                Section {
                    line: line_no,
                    keys: BTreeMap::new(),
                },
            );
            current = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let section = current.as_ref().ok_or(Error::Parse {
            line: line_no,
            message: "key outside any [section]".into(),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let entry = sections.get_mut(section).unwrap();
        if entry.keys.insert(key.clone(), (line_no, value)).is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate key `{key}` in [{section}]"),
            });
        }
    }
    Ok(sections)
}

struct SectionReader {
    name: &'static str,
    line: usize,
    keys: BTreeMap<String, (usize, String)>,
}

impl SectionReader {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.keys.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<(usize, String)> {
        self.take(key).ok_or(Error::Parse {
            line: self.line,
            message: format!("missing key `{key}` in [{}]", self.name),
        })
    }

    fn require_f64(&mut self, key: &str) -> Result<f64> {
        let (line, value) = self.require(key)?;
        value.parse().map_err(|_| Error::Parse {
            line,
            message: format!("`{key}` is not a number: `{value}`"),
        })
    }

    fn require_usize(&mut self, key: &str) -> Result<usize> {
        let (line, value) = self.require(key)?;
        value.parse().map_err(|_| Error::Parse {
            line,
            message: format!("`{key}` is not an integer: `{value}`"),
        })
    }

    fn take_f64_list(&mut self, key: &str) -> Result<Vec<f64>> {
        match self.take(key) {
            None => Ok(Vec::new()),
            Some((line, value)) => value
                .split(',')
                .map(|tok| {
                    tok.trim().parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("`{key}` has a bad number: `{tok}`"),
                    })
                })
                .collect(),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.keys.into_iter().next() {
            return Err(Error::Parse {
                line,
                message: format!("unknown key `{key}` in [{}]", self.name),
            });
        }
        Ok(())
    }
}

/// Parse and validate a scenario document. Unknown sections or keys are
/// rejected; every model invariant is checked here, at the boundary.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut sections = parse_sections(text)?;
    let mut reader = |name: &'static str| -> Result<SectionReader> {
        let s = sections.remove(name).ok_or(Error::Parse {
            line: 1,
            message: format!("missing [{name}] section"),
        })?;
        Ok(SectionReader {
            name,
            line: s.line,
            keys: s.keys,
        })
    };

    let mut setup = reader("setup")?;
    let z_a = setup.require_f64("za_mm")?;
    let z_a_img = setup.require_f64("zaimg_mm")?;
    let f = setup.require_f64("f_mm")?;
    let z_b = setup.require_f64("zb_mm")?;
    let z_bo = setup.require_f64("zbo_mm")?;
    let z_bs = setup.require_f64("zbs_mm")?;
    let f_b = setup.require_f64("Fb_mm")?;
    let lambda_um = setup.require_f64("lambda_um")?;
    let sigma = setup.require_f64("sigma_mm")?;
    setup.finish()?;
    let setup = OpticalSetup::new(
        z_a,
        z_a_img,
        f,
        z_b,
        z_bo,
        z_bs,
        f_b,
        lambda_um * 1e-3,
        sigma,
    )?;

    let mut object = reader("object")?;
    let (line, kind) = object.require("type")?;
    let object_spec = match kind.as_str() {
        "slit" => ObjectSpec::Slit {
            width: object.require_f64("width_mm")?,
        },
        "double_slit" => ObjectSpec::DoubleSlit {
            width: object.require_f64("width_mm")?,
            separation: object.require_f64("separation_mm")?,
        },
        "letter_e" => ObjectSpec::LetterE {
            stroke: object.require_f64("width_mm")?,
        },
        "file" => ObjectSpec::File {
            path: object.require("path")?.1,
        },
        other => {
            return Err(Error::Parse {
                line,
                message: format!("unknown object type `{other}`"),
            })
        }
    };
    object.finish()?;
    if let Some(d) = object_spec.feature() {
        if !(d > 0.0) {
            return Err(Error::Validation(format!(
                "object feature must be positive, got {d}"
            )));
        }
    }
    if let ObjectSpec::DoubleSlit { width, separation } = &object_spec {
        if separation <= width {
            return Err(Error::Validation(format!(
                "double slit separation {separation} mm must exceed width {width} mm"
            )));
        }
    }

    let mut sensor = reader("sensor")?;
    let pixel_um = sensor.require_f64("pixel_um")?;
    let na = sensor.require_usize("na")?;
    let nb = sensor.require_usize("nb")?;
    sensor.finish()?;
    let sensor = SensorSpec::new(pixel_um * 1e-3, na, nb)?;

    let mut run = reader("run")?;
    let (line, mode) = run.require("mode")?;
    let mode = match mode.as_str() {
        "ghost" => RunMode::Ghost,
        "misfocus" => RunMode::Misfocus,
        "refocus" => RunMode::Refocus,
        "viewpoint" => RunMode::Viewpoint,
        "dof" => RunMode::Dof,
        "sweep" => RunMode::Sweep,
        other => {
            return Err(Error::Parse {
                line,
                message: format!("unknown mode `{other}`"),
            })
        }
    };
    let path = match run.take("path") {
        None => EvalPath::Fast,
        Some((_, p)) if p == "fast" => EvalPath::Fast,
        Some((_, p)) if p == "oracle" => EvalPath::Oracle,
        Some((line, p)) => {
            return Err(Error::Parse {
                line,
                message: format!("unknown path `{p}` (use oracle|fast)"),
            })
        }
    };
    let rho_b_mm = run.take_f64_list("rho_b_mm")?;
    let alpha_list = run.take_f64_list("alpha_list")?;
    let out_prefix = run.require("out_prefix")?.1;
    run.finish()?;

    if let Some((name, section)) = sections.into_iter().next() {
        return Err(Error::Parse {
            line: section.line,
            message: format!("unknown section [{name}]"),
        });
    }

    if mode == RunMode::Viewpoint && rho_b_mm.is_empty() {
        return Err(Error::Validation(
            "viewpoint mode needs a rho_b_mm list".into(),
        ));
    }
    if mode == RunMode::Sweep && alpha_list.is_empty() {
        return Err(Error::Validation("sweep mode needs an alpha_list".into()));
    }
    if out_prefix.is_empty()
        || !out_prefix
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(Error::Validation(format!(
            "out_prefix `{out_prefix}` must be nonempty [A-Za-z0-9_-]"
        )));
    }

    Ok(Scenario {
        setup,
        object: object_spec,
        sensor,
        run: RunSpec {
            mode,
            path,
            rho_b_mm,
            alpha_list,
            out_prefix,
        },
    })
}

impl Scenario {
    /// Canonical text form: fixed section and key order, shortest
    /// round-trip float formatting. `parse_scenario(canonical(s)) == s`.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let s = &self.setup;
        out.push_str("[setup]\n");
        out.push_str(&format!("za_mm = {}\n", s.z_a));
        out.push_str(&format!("zaimg_mm = {}\n", s.z_a_img));
        out.push_str(&format!("f_mm = {}\n", s.f));
        out.push_str(&format!("zb_mm = {}\n", s.z_b));
        out.push_str(&format!("zbo_mm = {}\n", s.z_b_obj_lens));
        out.push_str(&format!("zbs_mm = {}\n", s.z_b_lens_sens));
        out.push_str(&format!("Fb_mm = {}\n", s.f_b));
        out.push_str(&format!("lambda_um = {}\n", s.lambda * 1e3));
        out.push_str(&format!("sigma_mm = {}\n", s.sigma));
        out.push_str("\n[object]\n");
        match &self.object {
            ObjectSpec::Slit { width } => {
                out.push_str("type = slit\n");
                out.push_str(&format!("width_mm = {width}\n"));
            }
            ObjectSpec::DoubleSlit { width, separation } => {
                out.push_str("type = double_slit\n");
                out.push_str(&format!("width_mm = {width}\n"));
                out.push_str(&format!("separation_mm = {separation}\n"));
            }
            ObjectSpec::LetterE { stroke } => {
                out.push_str("type = letter_e\n");
                out.push_str(&format!("width_mm = {stroke}\n"));
            }
            ObjectSpec::File { path } => {
                out.push_str("type = file\n");
                out.push_str(&format!("path = {path}\n"));
            }
        }
        out.push_str("\n[sensor]\n");
        out.push_str(&format!("pixel_um = {}\n", self.sensor.pixel * 1e3));
        out.push_str(&format!("na = {}\n", self.sensor.count_a));
        out.push_str(&format!("nb = {}\n", self.sensor.count_b));
        out.push_str("\n[run]\n");
        out.push_str(&format!("mode = {}\n", self.run.mode.as_str()));
        out.push_str(&format!(
            "path = {}\n",
            match self.run.path {
                EvalPath::Fast => "fast",
                EvalPath::Oracle => "oracle",
            }
        ));
        if !self.run.rho_b_mm.is_empty() {
            let list: Vec<String> = self.run.rho_b_mm.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("rho_b_mm = {}\n", list.join(",")));
        }
        if !self.run.alpha_list.is_empty() {
            let list: Vec<String> = self.run.alpha_list.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("alpha_list = {}\n", list.join(",")));
        }
        out.push_str(&format!("out_prefix = {}\n", self.run.out_prefix));
        out
    }

    /// Content digest of the canonical form, for output provenance.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Bundled scenario text by name ("fig3", "fig4.scn", ...).
    pub fn bundled(name: &str) -> Option<&'static str> {
        match name.trim_end_matches(".scn") {
            "fig3" => Some(include_str!("../scenarios/fig3.scn")),
            "fig4" => Some(include_str!("../scenarios/fig4.scn")),
            "fig5" => Some(include_str!("../scenarios/fig5.scn")),
            "dof" => Some(include_str!("../scenarios/dof.scn")),
            _ => None,
        }
    }
}
