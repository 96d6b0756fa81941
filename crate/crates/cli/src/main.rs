use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dotsim::experiment::{run, ExperimentConfig};
use serde::Serialize;
use serde_json::{Map, Value};

const THREADS_ENV: &str = "DOTSIM_THREADS";

/// Screened interactions, Hubbard spectra, analog quantum chemistry and
/// charge-stability fits for quantum-dot arrays.
///
/// Every subcommand builds one flat JSON config: the file given with --config
/// (if any), overridden field by field by the flags on the command line.
#[derive(Parser)]
#[command(name = "dotsim", version)]
struct Cli {
    /// Flat JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; falls back to the config, then DOTSIM_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for synthetic noise.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Main artifact path; the manifest goes next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the --config file.
    Run,
    /// Bare, image-charge and tiled potential curves V(ρ).
    Screen(ScreenArgs),
    /// U_i and V_ij matrix elements of a dot array.
    Params(ParamsArgs),
    /// One-electron spectrum of the artificial atom over a V0 sweep.
    Atom(AtomArgs),
    /// Two-electron dissociation curve Δ(R).
    Molecule(MoleculeArgs),
    /// Ground and excited site occupations of the molecule.
    Occupation(OccupationArgs),
    /// Charge-stability diagrams.
    #[command(subcommand)]
    Stability(StabilityCommand),
}

#[derive(Subcommand)]
enum StabilityCommand {
    /// Simulate a diagram CSV.
    Simulate(SimulateArgs),
    /// Fit the anti-crossing model to a diagram CSV.
    Fit(FitArgs),
}

#[derive(Args, Serialize)]
struct ScreenArgs {
    /// Gate layout JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    layout: Option<PathBuf>,
    /// paper_like or full_plane.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sites: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    spacing_nm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tile_nm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_min_nm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_max_nm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_steps: Option<usize>,
}

#[derive(Args, Serialize)]
struct ParamsArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    layout: Option<PathBuf>,
    /// Dot-array JSON.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dots: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sites: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    fwhm_nm: Option<f64>,
    /// Comma-separated subset of bare, image, tiled.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    models: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tile_nm: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    quad_order: Option<usize>,
}

#[derive(Args, Serialize)]
struct AtomArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sites: Option<usize>,
    /// Tunnel coupling, µeV.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(rename = "t_ueV", skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(rename = "v0_min_ueV", skip_serializing_if = "Option::is_none")]
    v0_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(rename = "v0_max_ueV", skip_serializing_if = "Option::is_none")]
    v0_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    v0_steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    nucleus_site: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    softening_nm: Option<f64>,
}

#[derive(Args, Serialize)]
struct MoleculeArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sites: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(rename = "t_ueV", skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(rename = "v0_ueV", skip_serializing_if = "Option::is_none")]
    v0: Option<f64>,
    /// Smallest internuclear distance in dot spacings.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r_steps: Option<usize>,
    /// bare, image or tiled.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ee_model: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tile_nm: Option<f64>,
    /// Also write the S_z = 0 Hamiltonian at r_min to this file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dump_hamiltonian: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct OccupationArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sites: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(rename = "t_ueV", skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(rename = "v0_ueV", skip_serializing_if = "Option::is_none")]
    v0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r_steps: Option<usize>,
    /// Offset per site about the array centre, µeV.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(rename = "bias_slope_ueV", skip_serializing_if = "Option::is_none")]
    bias_slope: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    ee_model: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tile_nm: Option<f64>,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    /// Mutual charging energy V_ij, µeV.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(rename = "v_ueV", skip_serializing_if = "Option::is_none")]
    v: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(rename = "t_ueV", skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    /// Anti-crossing centre `i,j` in µeV.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(rename = "center_ueV", skip_serializing_if = "Option::is_none")]
    center: Option<Vec<f64>>,
    /// Points per axis.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
    #[arg(long)]
    #[serde(rename = "half_width_ueV", skip_serializing_if = "Option::is_none")]
    half_width: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_sigma: Option<f64>,
    /// Sensor weights `w_i,w_j`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    /// k_BT, µeV.
    #[arg(long)]
    #[serde(rename = "broadening_ueV", skip_serializing_if = "Option::is_none")]
    broadening: Option<f64>,
}

#[derive(Args, Serialize)]
struct FitArgs {
    /// Diagram CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    /// patch or edges.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    /// Hold t_ij fixed, µeV.
    #[arg(long)]
    #[serde(rename = "fixed_t_ueV", skip_serializing_if = "Option::is_none")]
    fixed_t: Option<f64>,
}

fn fields<T: Serialize>(args: &T) -> Result<Map<String, Value>, String> {
    match serde_json::to_value(args).map_err(|e| e.to_string())? {
        Value::Object(m) => Ok(m),
        _ => Ok(Map::new()),
    }
}

fn assemble(cli: &Cli) -> Result<Value, String> {
    let mut map = match &cli.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            match serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))? {
                Value::Object(m) => m,
                _ => return Err(format!("{}: expected a JSON object", path.display())),
            }
        }
        None => Map::new(),
    };
    let (kind, mode, overrides) = match &cli.command {
        Command::Run => {
            if cli.config.is_none() {
                return Err("`run` needs --config".into());
            }
            (None, None, Map::new())
        }
        Command::Screen(a) => (Some("screen"), None, fields(a)?),
        Command::Params(a) => (Some("params"), None, fields(a)?),
        Command::Atom(a) => (Some("atom"), None, fields(a)?),
        Command::Molecule(a) => (Some("molecule"), None, fields(a)?),
        Command::Occupation(a) => (Some("occupation"), None, fields(a)?),
        Command::Stability(StabilityCommand::Simulate(a)) => {
            (Some("stability"), Some("simulate"), fields(a)?)
        }
        Command::Stability(StabilityCommand::Fit(a)) => {
            (Some("stability"), Some("fit"), fields(a)?)
        }
    };
    for (key, value) in [("experiment", kind), ("mode", mode)] {
        let Some(value) = value else { continue };
        match map.get(key).and_then(Value::as_str) {
            Some(existing) if existing != value => {
                return Err(format!(
                    "config has {key} `{existing}` but the subcommand asks for `{value}`"
                ));
            }
            _ => {
                map.insert(key.into(), value.into());
            }
        }
    }
    map.extend(overrides);
    if let Some(out) = &cli.out {
        map.insert(
            "out".into(),
            Value::from(out.to_string_lossy().into_owned()),
        );
    }
    if let Some(seed) = cli.seed {
        map.insert("seed".into(), seed.into());
    }
    if let Some(threads) = cli.threads {
        map.insert("threads".into(), threads.into());
    } else if map.get("threads").is_none_or(Value::is_null) {
        if let Ok(text) = std::env::var(THREADS_ENV) {
            let n: usize = text
                .trim()
                .parse()
                .map_err(|_| format!("{THREADS_ENV}=`{text}` is not a thread count"))?;
            map.insert("threads".into(), n.into());
        }
    }
    Ok(Value::Object(map))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = assemble(&cli).and_then(|value| {
        let config = ExperimentConfig::from_value(value).map_err(|e| e.to_string())?;
        run(&config).map_err(|e| e.to_string())
    });
    match outcome {
        Ok(summary) => {
            for path in &summary.artifacts {
                println!("{}", path.display());
            }
            println!("{}", summary.manifest.display());
            ExitCode::SUCCESS
        }
        Err(message) => {
            eprintln!("dotsim: error: {message}");
            ExitCode::FAILURE
        }
    }
}
