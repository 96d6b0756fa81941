use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::stability::FitMethod;
use crate::units::{DEFAULT_FWHM_NM, DEFAULT_SPACING_NM, DEFAULT_TUNNEL_UEV, THERMAL_SCALE_UEV};
use crate::wannier::{InteractionKind, DEFAULT_QUAD_ORDER, DEFAULT_TILE_NM};

pub const EXPERIMENT_KINDS: [&str; 6] = [
    "screen",
    "params",
    "atom",
    "molecule",
    "occupation",
    "stability",
];

fn d_sites() -> usize {
    6
}
fn d_spacing() -> f64 {
    DEFAULT_SPACING_NM
}
fn d_fwhm() -> f64 {
    DEFAULT_FWHM_NM
}
fn d_t() -> f64 {
    DEFAULT_TUNNEL_UEV
}
fn d_tile() -> f64 {
    DEFAULT_TILE_NM
}
fn d_quad() -> usize {
    DEFAULT_QUAD_ORDER
}
fn d_half_extent() -> f64 {
    1500.0
}
fn d_rho_min() -> f64 {
    DEFAULT_SPACING_NM
}
fn d_rho_max() -> f64 {
    5.0 * DEFAULT_SPACING_NM
}
fn d_rho_steps() -> usize {
    17
}
fn d_levels() -> usize {
    3
}
fn d_models() -> Vec<InteractionKind> {
    vec![
        InteractionKind::Bare,
        InteractionKind::ImageCharge,
        InteractionKind::TiledGates,
    ]
}
fn d_ee_model() -> InteractionKind {
    InteractionKind::TiledGates
}
fn d_points() -> usize {
    301
}
fn d_weights() -> [f64; 2] {
    [1.0, 1.0]
}
fn d_kt() -> f64 {
    THERMAL_SCALE_UEV
}
fn d_method() -> FitMethod {
    FitMethod::Patch
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutPreset {
    #[default]
    PaperLike,
    FullPlane,
}

/// Potential curves V(ρ) for one source electron above the first dot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenConfig {
    /// Gate layout JSON; without it `preset` is built.
    #[serde(default)]
    pub layout: Option<PathBuf>,
    #[serde(default)]
    pub preset: LayoutPreset,
    #[serde(default = "d_sites")]
    pub sites: usize,
    #[serde(default = "d_spacing")]
    pub spacing_nm: f64,
    /// Half-width of the `full_plane` preset.
    #[serde(default = "d_half_extent")]
    pub half_extent_nm: f64,
    /// Override the layout's depth.
    #[serde(default)]
    pub depth_nm: Option<f64>,
    #[serde(default)]
    pub rel_permittivity: Option<f64>,
    #[serde(default = "d_tile")]
    pub tile_nm: f64,
    #[serde(default = "d_rho_min")]
    pub rho_min_nm: f64,
    #[serde(default = "d_rho_max")]
    pub rho_max_nm: f64,
    #[serde(default = "d_rho_steps")]
    pub rho_steps: usize,
}

/// Interaction matrices U_i, V_ij for each requested model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default)]
    pub layout: Option<PathBuf>,
    /// Dot-array JSON; without it a centred chain of `sites` dots is used.
    #[serde(default)]
    pub dots: Option<PathBuf>,
    #[serde(default = "d_sites")]
    pub sites: usize,
    #[serde(default = "d_spacing")]
    pub spacing_nm: f64,
    #[serde(default = "d_fwhm")]
    pub fwhm_nm: f64,
    #[serde(default)]
    pub depth_nm: Option<f64>,
    #[serde(default)]
    pub rel_permittivity: Option<f64>,
    #[serde(default = "d_models")]
    pub models: Vec<InteractionKind>,
    #[serde(default = "d_tile")]
    pub tile_nm: f64,
    #[serde(default = "d_quad")]
    pub quad_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub sites: usize,
    #[serde(default = "d_t", rename = "t_ueV")]
    pub t_uev: f64,
    #[serde(rename = "v0_min_ueV")]
    pub v0_min_uev: f64,
    #[serde(rename = "v0_max_ueV")]
    pub v0_max_uev: f64,
    pub v0_steps: usize,
    #[serde(default = "d_levels")]
    pub levels: usize,
    /// Nucleus position in site coordinates; default is mid-bond at the centre.
    #[serde(default)]
    pub nucleus_site: Option<f64>,
    #[serde(default)]
    pub softening_nm: f64,
    #[serde(default = "d_spacing")]
    pub spacing_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeConfig {
    pub sites: usize,
    #[serde(default = "d_t", rename = "t_ueV")]
    pub t_uev: f64,
    #[serde(rename = "v0_ueV")]
    pub v0_uev: f64,
    /// Internuclear distances in units of the dot spacing.
    pub r_min: f64,
    pub r_max: f64,
    pub r_steps: usize,
    #[serde(default = "d_ee_model")]
    pub ee_model: InteractionKind,
    #[serde(default = "d_fwhm")]
    pub fwhm_nm: f64,
    #[serde(default = "d_spacing")]
    pub spacing_nm: f64,
    #[serde(default = "d_tile")]
    pub tile_nm: f64,
    #[serde(default = "d_quad")]
    pub quad_order: usize,
    /// Writes the S_z = 0 Hamiltonian at `r_min` in coordinate text form.
    #[serde(default)]
    pub dump_hamiltonian: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationConfig {
    pub sites: usize,
    #[serde(default = "d_t", rename = "t_ueV")]
    pub t_uev: f64,
    #[serde(rename = "v0_ueV")]
    pub v0_uev: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub r_steps: usize,
    /// Linear offset per site about the array centre, µeV.
    #[serde(default, rename = "bias_slope_ueV")]
    pub bias_slope_uev: f64,
    #[serde(default = "d_ee_model")]
    pub ee_model: InteractionKind,
    #[serde(default = "d_fwhm")]
    pub fwhm_nm: f64,
    #[serde(default = "d_spacing")]
    pub spacing_nm: f64,
    #[serde(default = "d_tile")]
    pub tile_nm: f64,
    #[serde(default = "d_quad")]
    pub quad_order: usize,
}

/// Synthetic diagram in energy coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(rename = "v_ueV")]
    pub v_uev: f64,
    #[serde(default = "d_t", rename = "t_ueV")]
    pub t_uev: f64,
    #[serde(default, rename = "center_ueV")]
    pub center_uev: [f64; 2],
    #[serde(default = "d_points")]
    pub points: usize,
    /// Half-width of the square window; default spans both branches.
    #[serde(default, rename = "half_width_ueV")]
    pub half_width_uev: Option<f64>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "d_weights")]
    pub weights: [f64; 2],
    #[serde(default = "d_kt", rename = "broadening_ueV")]
    pub broadening_uev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Diagram CSV with columns deps_i_ueV, deps_j_ueV, signal.
    pub input: PathBuf,
    #[serde(default = "d_method")]
    pub method: FitMethod,
    #[serde(default, rename = "fixed_t_ueV")]
    pub fixed_t_uev: Option<f64>,
    #[serde(default = "d_kt", rename = "broadening_guess_ueV")]
    pub broadening_guess_uev: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Screen(ScreenConfig),
    Params(ParamsConfig),
    Atom(AtomConfig),
    Molecule(MoleculeConfig),
    Occupation(OccupationConfig),
    StabilitySimulate(SimulateConfig),
    StabilityFit(FitConfig),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Screen(_) => "screen",
            Experiment::Params(_) => "params",
            Experiment::Atom(_) => "atom",
            Experiment::Molecule(_) => "molecule",
            Experiment::Occupation(_) => "occupation",
            Experiment::StabilitySimulate(_) | Experiment::StabilityFit(_) => "stability",
        }
    }

    fn mode(&self) -> Option<&'static str> {
        match self {
            Experiment::StabilitySimulate(_) => Some("simulate"),
            Experiment::StabilityFit(_) => Some("fit"),
            _ => None,
        }
    }

    fn block(&self) -> Result<Value> {
        Ok(match self {
            Experiment::Screen(c) => serde_json::to_value(c)?,
            Experiment::Params(c) => serde_json::to_value(c)?,
            Experiment::Atom(c) => serde_json::to_value(c)?,
            Experiment::Molecule(c) => serde_json::to_value(c)?,
            Experiment::Occupation(c) => serde_json::to_value(c)?,
            Experiment::StabilitySimulate(c) => serde_json::to_value(c)?,
            Experiment::StabilityFit(c) => serde_json::to_value(c)?,
        })
    }
}

/// One run: a single experiment block plus the output path, noise seed and
/// worker count. The JSON form is flat, with `experiment` (and `mode` for
/// stability) selecting the block.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub experiment: Experiment,
}

fn take<T: DeserializeOwned>(map: &mut Map<String, Value>, key: &str) -> Result<Option<T>> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| Error::config(key, e.to_string())),
    }
}

/// Field named in a serde message such as "unknown field `x`, expected ...".
fn quoted_field(message: &str) -> Option<&str> {
    let rest = message.split_once('`')?.1;
    Some(rest.split_once('`')?.0)
}

fn block<T: DeserializeOwned>(map: Map<String, Value>) -> Result<T> {
    serde_path_to_error::deserialize(Value::Object(map)).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().to_string();
        let field = if path == "." {
            quoted_field(&message).unwrap_or("config").to_string()
        } else {
            path
        };
        Error::Config { field, message }
    })
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive, got {x}")))
    }
}

fn non_negative(field: &str, x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be non-negative, got {x}"),
        ))
    }
}

fn at_least(field: &str, n: usize, min: usize) -> Result<()> {
    if n >= min {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be at least {min}, got {n}"),
        ))
    }
}

fn existing(field: &str, path: &Option<PathBuf>) -> Result<()> {
    match path {
        Some(p) if !p.is_file() => Err(Error::config(
            field,
            format!("file {} does not exist", p.display()),
        )),
        _ => Ok(()),
    }
}

fn range(
    min_field: &str,
    min: f64,
    max_field: &str,
    max: f64,
    steps_field: &str,
    steps: usize,
) -> Result<()> {
    at_least(steps_field, steps, 1)?;
    if !min.is_finite() {
        return Err(Error::config(min_field, "must be finite"));
    }
    if !(max >= min) || !max.is_finite() {
        return Err(Error::config(
            max_field,
            format!("must be finite and >= {min_field}"),
        ));
    }
    if steps > 1 && max == min {
        return Err(Error::config(
            max_field,
            format!("must exceed {min_field} when {steps_field} > 1"),
        ));
    }
    Ok(())
}

/// `steps` evenly spaced values from `min` to `max` inclusive.
pub fn linear_grid(min: f64, max: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![min];
    }
    let h = (max - min) / (steps - 1) as f64;
    (0..steps)
        .map(|k| {
            if k + 1 == steps {
                max
            } else {
                min + h * k as f64
            }
        })
        .collect()
}

impl ScreenConfig {
    fn validate(&self) -> Result<()> {
        existing("layout", &self.layout)?;
        at_least("sites", self.sites, 1)?;
        positive("spacing_nm", self.spacing_nm)?;
        positive("half_extent_nm", self.half_extent_nm)?;
        if let Some(d) = self.depth_nm {
            positive("depth_nm", d)?;
        }
        if let Some(e) = self.rel_permittivity {
            if !(e >= 1.0) {
                return Err(Error::config(
                    "rel_permittivity",
                    format!("must be >= 1, got {e}"),
                ));
            }
        }
        positive("tile_nm", self.tile_nm)?;
        positive("rho_min_nm", self.rho_min_nm)?;
        range(
            "rho_min_nm",
            self.rho_min_nm,
            "rho_max_nm",
            self.rho_max_nm,
            "rho_steps",
            self.rho_steps,
        )
    }
}

impl ParamsConfig {
    fn validate(&self) -> Result<()> {
        existing("layout", &self.layout)?;
        existing("dots", &self.dots)?;
        at_least("sites", self.sites, 1)?;
        positive("spacing_nm", self.spacing_nm)?;
        positive("fwhm_nm", self.fwhm_nm)?;
        if let Some(d) = self.depth_nm {
            positive("depth_nm", d)?;
        }
        if let Some(e) = self.rel_permittivity {
            if !(e >= 1.0) {
                return Err(Error::config(
                    "rel_permittivity",
                    format!("must be >= 1, got {e}"),
                ));
            }
        }
        if self.models.is_empty() {
            return Err(Error::config("models", "must list at least one model"));
        }
        positive("tile_nm", self.tile_nm)?;
        at_least("quad_order", self.quad_order, 4)
    }
}

impl AtomConfig {
    fn validate(&self) -> Result<()> {
        at_least("sites", self.sites, 1)?;
        positive("t_ueV", self.t_uev)?;
        positive("v0_min_ueV", self.v0_min_uev)?;
        range(
            "v0_min_ueV",
            self.v0_min_uev,
            "v0_max_ueV",
            self.v0_max_uev,
            "v0_steps",
            self.v0_steps,
        )?;
        at_least("levels", self.levels, 1)?;
        if self.levels > self.sites {
            return Err(Error::config(
                "levels",
                format!("cannot exceed sites ({})", self.sites),
            ));
        }
        if let Some(s) = self.nucleus_site {
            if !s.is_finite() {
                return Err(Error::config("nucleus_site", "must be finite"));
            }
        }
        non_negative("softening_nm", self.softening_nm)?;
        positive("spacing_nm", self.spacing_nm)
    }
}

#[allow(clippy::too_many_arguments)]
fn molecule_fields(
    sites: usize,
    t: f64,
    v0: f64,
    r: (f64, f64, usize),
    fwhm: f64,
    spacing: f64,
    tile: f64,
    quad: usize,
) -> Result<()> {
    at_least("sites", sites, 2)?;
    positive("t_ueV", t)?;
    positive("v0_ueV", v0)?;
    positive("r_min", r.0)?;
    range("r_min", r.0, "r_max", r.1, "r_steps", r.2)?;
    positive("fwhm_nm", fwhm)?;
    positive("spacing_nm", spacing)?;
    positive("tile_nm", tile)?;
    at_least("quad_order", quad, 4)
}

impl MoleculeConfig {
    fn validate(&self) -> Result<()> {
        molecule_fields(
            self.sites,
            self.t_uev,
            self.v0_uev,
            (self.r_min, self.r_max, self.r_steps),
            self.fwhm_nm,
            self.spacing_nm,
            self.tile_nm,
            self.quad_order,
        )
    }
}

impl OccupationConfig {
    fn validate(&self) -> Result<()> {
        molecule_fields(
            self.sites,
            self.t_uev,
            self.v0_uev,
            (self.r_min, self.r_max, self.r_steps),
            self.fwhm_nm,
            self.spacing_nm,
            self.tile_nm,
            self.quad_order,
        )?;
        if !self.bias_slope_uev.is_finite() {
            return Err(Error::config("bias_slope_ueV", "must be finite"));
        }
        Ok(())
    }
}

impl SimulateConfig {
    fn validate(&self) -> Result<()> {
        positive("v_ueV", self.v_uev)?;
        non_negative("t_ueV", self.t_uev)?;
        if self.center_uev.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("center_ueV", "must be finite"));
        }
        at_least("points", self.points, 3)?;
        if let Some(h) = self.half_width_uev {
            positive("half_width_ueV", h)?;
        }
        non_negative("noise_sigma", self.noise_sigma)?;
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::config("weights", "must be finite"));
        }
        positive("broadening_ueV", self.broadening_uev)
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        existing("input", &Some(self.input.clone()))?;
        if let Some(t) = self.fixed_t_uev {
            non_negative("fixed_t_ueV", t)?;
        }
        positive("broadening_guess_ueV", self.broadening_guess_uev)
    }
}

impl ExperimentConfig {
    pub fn from_value(value: Value) -> Result<Self> {
        let Value::Object(mut map) = value else {
            return Err(Error::config("config", "expected a JSON object"));
        };
        let kinds = EXPERIMENT_KINDS.join(", ");
        let kind: String = take(&mut map, "experiment")?.ok_or_else(|| {
            Error::config("experiment", format!("missing; expected one of {kinds}"))
        })?;
        let out: PathBuf =
            take(&mut map, "out")?.ok_or_else(|| Error::config("out", "missing output path"))?;
        let seed = take(&mut map, "seed")?.unwrap_or(0);
        let threads: Option<usize> = take(&mut map, "threads")?;
        if threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }
        let experiment = match kind.as_str() {
            "screen" => Experiment::Screen(block(map)?),
            "params" => Experiment::Params(block(map)?),
            "atom" => Experiment::Atom(block(map)?),
            "molecule" => Experiment::Molecule(block(map)?),
            "occupation" => Experiment::Occupation(block(map)?),
            "stability" => {
                let mode: String = take(&mut map, "mode")?
                    .ok_or_else(|| Error::config("mode", "missing; expected simulate or fit"))?;
                match mode.as_str() {
                    "simulate" => Experiment::StabilitySimulate(block(map)?),
                    "fit" => Experiment::StabilityFit(block(map)?),
                    other => {
                        return Err(Error::config(
                            "mode",
                            format!("unknown mode `{other}`; expected simulate or fit"),
                        ))
                    }
                }
            }
            other => {
                return Err(Error::config(
                    "experiment",
                    format!("unknown experiment `{other}`; expected one of {kinds}"),
                ))
            }
        };
        let config = Self {
            out,
            seed,
            threads,
            experiment,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(s)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.out.as_os_str().is_empty() {
            return Err(Error::config("out", "must not be empty"));
        }
        match &self.experiment {
            Experiment::Screen(c) => c.validate(),
            Experiment::Params(c) => c.validate(),
            Experiment::Atom(c) => c.validate(),
            Experiment::Molecule(c) => c.validate(),
            Experiment::Occupation(c) => c.validate(),
            Experiment::StabilitySimulate(c) => c.validate(),
            Experiment::StabilityFit(c) => c.validate(),
        }
    }

    /// Flat JSON with every default filled in.
    pub fn to_value(&self) -> Result<Value> {
        let mut map = Map::new();
        map.insert("experiment".into(), self.experiment.kind().into());
        if let Some(mode) = self.experiment.mode() {
            map.insert("mode".into(), mode.into());
        }
        map.insert("out".into(), serde_json::to_value(&self.out)?);
        map.insert("seed".into(), self.seed.into());
        map.insert("threads".into(), serde_json::to_value(self.threads)?);
        if let Value::Object(fields) = self.experiment.block()? {
            map.extend(fields);
        }
        Ok(Value::Object(map))
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json_str(&std::fs::read_to_string(path)?)
}
