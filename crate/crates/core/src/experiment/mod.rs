//! Experiment configs, their execution, and the CSV/JSON artifacts they write.
//!
//! A run computes everything in memory, then writes each artifact through a
//! temporary file and a rename, and finally a `<out>.manifest.json` holding the
//! resolved config, the crate version and the wall time. CSV numbers use `sci`,
//! so identical inputs give byte-identical files.

mod config;
mod io;

pub use config::{
    linear_grid, load_config, AtomConfig, Experiment, ExperimentConfig, FitConfig, LayoutPreset,
    MoleculeConfig, OccupationConfig, ParamsConfig, ScreenConfig, SimulateConfig, EXPERIMENT_KINDS,
};
pub use io::{diagram_csv, read_diagram_csv, sci, ArtifactWriter, Table, DIAGRAM_HEADER};

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use crate::electrostatics::{
    coulomb_bare, dot_positions, screened_potential_image, tile_layout, GateLayout,
    PhysicalConstants, ScreeningOperator, TileSolverOptions,
};
use crate::error::{Error, Result};
use crate::hubbard::{build_hamiltonian, enumerate_sector};
use crate::qchem::{
    atom_spectrum, molecule_binding, molecule_params, occupation_maps, qc_scales, AtomOptions,
    EeSettings,
};
use crate::stability::{
    fit_diagram, simulate_diagram, AnticrossingModel, FitOptions, SensorModel, StabilityGrid,
};
use crate::wannier::{interaction_matrix, DotArray, InteractionKind, InteractionModel};

pub const ATOM_HEADER: [&str; 6] = ["v0_ueV", "eta", "ry_ueV", "level", "e_ueV", "eb_per_ry"];
pub const MOLECULE_HEADER: [&str; 5] = ["r_over_aqd", "e2_ueV", "e1_ueV", "vnn_ueV", "delta_ueV"];
pub const OCCUPATION_HEADER: [&str; 5] =
    ["r_over_aqd", "site", "n_ground", "n_excited", "n_absdiff"];
pub const SCREEN_HEADER: [&str; 4] = ["rho_nm", "v_bare_ueV", "v_image_ueV", "v_tiled_ueV"];
pub const PARAMS_HEADER: [&str; 5] = ["site_i", "site_j", "distance_nm", "v_ueV", "model"];

/// Paths written by a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub artifacts: Vec<PathBuf>,
    pub manifest: PathBuf,
}

struct Output {
    files: Vec<(PathBuf, Vec<u8>)>,
    /// Kind-specific numbers echoed in the manifest.
    header: Value,
}

/// `atom.csv` → `atom.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let start = Instant::now();
    let output = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(|| execute(config))?,
        None => execute(config)?,
    };
    let mut writer = ArtifactWriter::default();
    let mut listed = Vec::new();
    for (path, bytes) in &output.files {
        writer.write(path, bytes)?;
        listed.push(json!({ "path": path, "bytes": bytes.len() }));
    }
    let manifest = manifest_path(&config.out);
    let doc = json!({
        "tool": "dotsim",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": config.experiment.kind(),
        "config": config.to_value()?,
        "header": output.header,
        "artifacts": listed,
        "threads": config.threads.unwrap_or_else(rayon::current_num_threads),
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    writer.write(&manifest, &bytes)?;
    let mut artifacts = writer.commit();
    artifacts.pop();
    Ok(RunSummary {
        artifacts,
        manifest,
    })
}

fn execute(config: &ExperimentConfig) -> Result<Output> {
    let out = config.out.clone();
    match &config.experiment {
        Experiment::Screen(c) => screen(c, out),
        Experiment::Params(c) => params(c, out),
        Experiment::Atom(c) => atom(c, out),
        Experiment::Molecule(c) => molecule(c, out),
        Experiment::Occupation(c) => occupation(c, out),
        Experiment::StabilitySimulate(c) => simulate(c, config.seed, out),
        Experiment::StabilityFit(c) => fit(c, out),
    }
}

fn with_overrides(
    mut layout: GateLayout,
    depth: Option<f64>,
    permittivity: Option<f64>,
) -> Result<GateLayout> {
    if let Some(d) = depth {
        layout.depth_nm = d;
    }
    if let Some(e) = permittivity {
        layout.rel_permittivity = e;
    }
    layout.validate()?;
    Ok(layout)
}

fn screen(c: &ScreenConfig, out: PathBuf) -> Result<Output> {
    let layout = match &c.layout {
        Some(p) => GateLayout::from_path(p)?,
        None => match c.preset {
            LayoutPreset::PaperLike => GateLayout::paper_like(c.sites, c.spacing_nm)?,
            LayoutPreset::FullPlane => GateLayout::full_plane(c.half_extent_nm)?,
        },
    };
    let layout = with_overrides(layout, c.depth_nm, c.rel_permittivity)?;
    let consts = layout.constants()?;
    let tiles = tile_layout(&layout, c.tile_nm)?;
    let op = ScreeningOperator::new(&tiles, &consts, &TileSolverOptions::default())?;
    let x0 = dot_positions(c.sites, c.spacing_nm)[0];
    let source = consts.electron_at(x0, 0.0);
    let rhos = linear_grid(c.rho_min_nm, c.rho_max_nm, c.rho_steps);
    let targets: Vec<_> = rhos
        .iter()
        .map(|r| consts.electron_at(x0 + r, 0.0))
        .collect();
    let tiled = op.pair_potentials(source, &targets)?;
    let mut table = Table::new(&SCREEN_HEADER)?;
    for ((rho, target), vt) in rhos.iter().zip(&targets).zip(&tiled) {
        let bare = coulomb_bare(source, *target, &consts)?;
        let image = screened_potential_image(source, *target, &consts)?;
        table.row([sci(*rho), sci(bare), sci(image), sci(*vt)])?;
    }
    let header = json!({
        "source_nm": [x0, 0.0],
        "depth_nm": consts.depth_d,
        "rel_permittivity": consts.rel_permittivity,
        "tiles": tiles.count(),
    });
    Ok(Output {
        files: vec![(out, table.into_bytes()?)],
        header,
    })
}

fn params(c: &ParamsConfig, out: PathBuf) -> Result<Output> {
    let dots = match &c.dots {
        Some(p) => DotArray::from_json_str(&std::fs::read_to_string(p)?)?,
        None => DotArray::linear(c.sites, c.spacing_nm, c.fwhm_nm)?,
    };
    let layout = match &c.layout {
        Some(p) => GateLayout::from_path(p)?,
        None => GateLayout::paper_like(dots.len(), dots.spacing_nm)?,
    };
    let layout = with_overrides(layout, c.depth_nm, c.rel_permittivity)?;
    let consts: PhysicalConstants = layout.constants()?;
    let mut table = Table::new(&PARAMS_HEADER)?;
    let mut unconverged = serde_json::Map::new();
    for &kind in &c.models {
        let model = match kind {
            InteractionKind::Bare => InteractionModel::bare(consts),
            InteractionKind::ImageCharge => InteractionModel::image_charge(consts),
            InteractionKind::TiledGates => InteractionModel::tiled(layout.clone(), c.tile_nm)?,
        };
        let m = interaction_matrix(&dots, &model, c.quad_order)?;
        for i in 0..dots.len() {
            for j in i..dots.len() {
                table.row([
                    i.to_string(),
                    j.to_string(),
                    sci(dots.distance(i, j)),
                    sci(m.values[i][j]),
                    kind.label().to_string(),
                ])?;
            }
        }
        unconverged.insert(kind.label().into(), json!(m.unconverged));
    }
    Ok(Output {
        files: vec![(out, table.into_bytes()?)],
        header: json!({ "sites": dots.len(), "unconverged_pairs": unconverged }),
    })
}

fn atom(c: &AtomConfig, out: PathBuf) -> Result<Output> {
    let grid = linear_grid(c.v0_min_uev, c.v0_max_uev, c.v0_steps);
    let opts = AtomOptions {
        nucleus_site: c.nucleus_site,
        softening_nm: c.softening_nm,
        spacing_nm: c.spacing_nm,
    };
    let result = atom_spectrum(c.sites, c.t_uev, &grid, c.levels, &opts)?;
    let mut table = Table::new(&ATOM_HEADER)?;
    for p in &result.points {
        for (level, (e, eb)) in p.energies.iter().zip(&p.eb_per_ry).enumerate() {
            table.row([
                sci(p.v0),
                sci(p.scales.eta),
                sci(p.scales.rydberg_uev),
                level.to_string(),
                sci(*e),
                sci(*eb),
            ])?;
        }
    }
    let (first, last) = (
        &result.points[0].scales,
        &result.points[result.points.len() - 1].scales,
    );
    Ok(Output {
        files: vec![(out, table.into_bytes()?)],
        header: json!({ "t_ueV": c.t_uev, "sites": c.sites, "first": first, "last": last }),
    })
}

fn ee_settings(
    kind: InteractionKind,
    spacing: f64,
    fwhm: f64,
    tile: f64,
    quad: usize,
) -> EeSettings {
    EeSettings {
        kind,
        spacing_nm: spacing,
        fwhm_nm: fwhm,
        tile_nm: tile,
        quad_order: quad,
    }
}

fn molecule(c: &MoleculeConfig, out: PathBuf) -> Result<Output> {
    let scales = qc_scales(c.t_uev, c.v0_uev, c.spacing_nm)?;
    let ee = ee_settings(c.ee_model, c.spacing_nm, c.fwhm_nm, c.tile_nm, c.quad_order);
    let v = ee.matrix(c.sites)?;
    let grid = linear_grid(c.r_min, c.r_max, c.r_steps);
    let result = molecule_binding(c.sites, c.t_uev, c.v0_uev, &grid, &v, c.spacing_nm)?;
    let mut table = Table::new(&MOLECULE_HEADER)?;
    for p in &result.points {
        table.row([sci(p.r), sci(p.e2), sci(p.e1), sci(p.vnn), sci(p.delta)])?;
    }
    let mut files = vec![(out, table.into_bytes()?)];
    if let Some(path) = &c.dump_hamiltonian {
        let params = molecule_params(c.sites, c.t_uev, c.v0_uev, c.r_min, &v, None, c.spacing_nm)?;
        let h = build_hamiltonian(&params, &enumerate_sector(c.sites, 1, 1)?)?;
        let mut bytes = Vec::new();
        h.write_coordinate(&mut bytes)?;
        files.push((path.clone(), bytes));
    }
    let minimum = result.minimum().map(|k| &result.points[k]);
    Ok(Output {
        files,
        header: json!({
            "scales": scales,
            "interaction_profile_ueV": v[0],
            "minimum": minimum.map(|p| json!({ "r_over_aqd": p.r, "delta_ueV": p.delta, "gap_ueV": p.gap })),
        }),
    })
}

fn occupation(c: &OccupationConfig, out: PathBuf) -> Result<Output> {
    let scales = qc_scales(c.t_uev, c.v0_uev, c.spacing_nm)?;
    let ee = ee_settings(c.ee_model, c.spacing_nm, c.fwhm_nm, c.tile_nm, c.quad_order);
    let v = ee.matrix(c.sites)?;
    let grid = linear_grid(c.r_min, c.r_max, c.r_steps);
    let maps = occupation_maps(
        c.sites,
        c.t_uev,
        c.v0_uev,
        &grid,
        &v,
        c.bias_slope_uev,
        c.spacing_nm,
    )?;
    let mut table = Table::new(&OCCUPATION_HEADER)?;
    for m in &maps {
        for site in 0..c.sites {
            table.row([
                sci(m.r),
                site.to_string(),
                sci(m.ground[site]),
                sci(m.excited[site]),
                sci(m.absdiff[site]),
            ])?;
        }
    }
    let totals: Vec<f64> = maps.iter().map(|m| m.total_absdiff()).collect();
    Ok(Output {
        files: vec![(out, table.into_bytes()?)],
        header: json!({ "scales": scales, "summed_absdiff": totals }),
    })
}

fn simulate(c: &SimulateConfig, seed: u64, out: PathBuf) -> Result<Output> {
    let model =
        AnticrossingModel::new(c.v_uev, c.t_uev).with_center(c.center_uev[0], c.center_uev[1]);
    let grid = match c.half_width_uev {
        Some(h) => StabilityGrid::centered(&model, h, c.points)?,
        None => StabilityGrid::spanning(&model, c.points)?,
    };
    let sensor = SensorModel {
        weights: c.weights,
        broadening: c.broadening_uev,
    };
    let d = simulate_diagram(&model, &grid, &sensor, c.noise_sigma, seed)?;
    Ok(Output {
        files: vec![(out, diagram_csv(&d)?)],
        header: json!({ "model": model, "sensor": sensor, "points": c.points, "seed": seed }),
    })
}

fn fit(c: &FitConfig, out: PathBuf) -> Result<Output> {
    let d = read_diagram_csv(std::fs::File::open(&c.input)?)?;
    let opts = FitOptions {
        fixed_t: c.fixed_t_uev,
        method: c.method,
        broadening_guess: c.broadening_guess_uev,
        ..FitOptions::default()
    };
    let report = fit_diagram(&d, &opts)?;
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    let (ni, nj) = d.shape();
    Ok(Output {
        files: vec![(out, bytes)],
        header: json!({
            "input": c.input,
            "shape": [ni, nj],
            "v_ij_ueV": report.model.v_ij,
            "t_ij_ueV": report.model.t_ij,
            "residual_norm": report.residual_norm,
        }),
    })
}
