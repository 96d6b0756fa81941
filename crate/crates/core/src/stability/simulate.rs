use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnticrossingModel, StabilityDiagram, StabilityGrid};
use crate::error::{Error, Result};

/// Charge sensor reading Σ_d weight_d·⟨n_d⟩ with thermal broadening k_BT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorModel {
    pub weights: [f64; 2],
    /// k_BT in µeV.
    pub broadening: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            weights: [1.0, 1.0],
            broadening: crate::units::THERMAL_SCALE_UEV,
        }
    }
}

/// Thermal ⟨n_i⟩, ⟨n_j⟩ of the two-dot model at offsets (δε_i, δε_j) from the
/// anti-crossing centre. States (0,0), bonding, antibonding and (1,1) with
/// H = −ε_i n_i − ε_j n_j − t(c†_i c_j + h.c.) + V n_i n_j and ε = δε + V/2.
pub fn thermal_occupations(di: f64, dj: f64, v: f64, t: f64, kt: f64) -> (f64, f64) {
    let ei = di + 0.5 * v;
    let ej = dj + 0.5 * v;
    let w = ei - ej;
    let r = (0.25 * w * w + t * t).sqrt();
    let mean = 0.5 * (ei + ej);
    let energies = [0.0, -mean - r, -mean + r, -(ei + ej) + v];
    // share of the single electron on dot i in the bonding state
    let bond_i = if r > 0.0 {
        0.5 * (1.0 + 0.5 * w / r)
    } else {
        0.5
    };
    let occ = [
        (0.0, 0.0),
        (bond_i, 1.0 - bond_i),
        (1.0 - bond_i, bond_i),
        (1.0, 1.0),
    ];
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut z, mut ni, mut nj) = (0.0, 0.0, 0.0);
    for (e, (a, b)) in energies.iter().zip(occ) {
        let p = (-(e - e0) / kt).exp();
        z += p;
        ni += p * a;
        nj += p * b;
    }
    (ni / z, nj / z)
}

/// `thermal_occupations` with its derivatives. Row d of the gradient holds
/// ∂⟨n_d⟩ with respect to (V, t, δε_i, δε_j, k_BT).
pub(crate) fn thermal_occupations_gradient(
    di: f64,
    dj: f64,
    v: f64,
    t: f64,
    kt: f64,
) -> ([f64; 2], [[f64; 5]; 2]) {
    let ei = di + 0.5 * v;
    let ej = dj + 0.5 * v;
    let w = ei - ej;
    let r = (0.25 * w * w + t * t).sqrt();
    let mean = 0.5 * (ei + ej);
    let energies = [0.0, -mean - r, -mean + r, -(ei + ej) + v];
    let (bond_i, q, dr_dw, dr_dt) = if r > 0.0 {
        (
            0.5 * (1.0 + 0.5 * w / r),
            0.25 / (r * r * r),
            0.25 * w / r,
            t / r,
        )
    } else {
        (0.5, 0.0, 0.0, 0.0)
    };
    // ∂E_s and ∂bond_i for θ = (V, t, δε_i, δε_j); k_BT handled separately
    let de: [[f64; 4]; 4] = [
        [0.0, -0.5, -0.5, 0.0],
        [0.0, -dr_dt, dr_dt, 0.0],
        [0.0, -0.5 - dr_dw, -0.5 + dr_dw, -1.0],
        [0.0, -0.5 + dr_dw, -0.5 - dr_dw, -1.0],
    ];
    let dbond = [0.0, -w * t * q, t * t * q, -t * t * q];
    let occ_i = [0.0, bond_i, 1.0 - bond_i, 1.0];
    let occ_j = [0.0, 1.0 - bond_i, bond_i, 1.0];
    let docc_i = [0.0, 1.0, -1.0, 0.0];

    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut p = energies.map(|e| (-(e - e0) / kt).exp());
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    let dot = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let n = [dot(&p, &occ_i), dot(&p, &occ_j)];

    let mut grad = [[0.0; 5]; 2];
    for (k, de_k) in de.iter().enumerate() {
        let mean_de = dot(&p, de_k);
        let dp: [f64; 4] = std::array::from_fn(|s| -p[s] * (de_k[s] - mean_de) / kt);
        let pd = dbond[k] * dot(&p, &docc_i);
        grad[0][k] = dot(&dp, &occ_i) + pd;
        grad[1][k] = dot(&dp, &occ_j) - pd;
    }
    let mean_e = dot(&p, &energies);
    let dp: [f64; 4] = std::array::from_fn(|s| p[s] * (energies[s] - mean_e) / (kt * kt));
    grad[0][4] = dot(&dp, &occ_i);
    grad[1][4] = dot(&dp, &occ_j);
    (n, grad)
}

pub(crate) fn sensor_signal(
    model: &AnticrossingModel,
    sensor: &SensorModel,
    x: f64,
    y: f64,
) -> f64 {
    let (ni, nj) = thermal_occupations(
        x - model.center[0],
        y - model.center[1],
        model.v_ij,
        model.t_ij,
        sensor.broadening,
    );
    sensor.weights[0] * ni + sensor.weights[1] * nj
}

/// Synthetic diagram; `noise_sigma` adds Gaussian noise in signal units,
/// drawn from a generator seeded with `seed`.
pub fn simulate_diagram(
    model: &AnticrossingModel,
    grid: &StabilityGrid,
    sensor: &SensorModel,
    noise_sigma: f64,
    seed: u64,
) -> Result<StabilityDiagram> {
    model.validate()?;
    if !(sensor.broadening > 0.0) {
        return Err(Error::InvalidInput(
            "sensor broadening must be positive".into(),
        ));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidInput(
            "noise sigma must be non-negative".into(),
        ));
    }
    let (xs, ys) = grid.energy_axes(model.lever_arms)?;
    let mut signal: Vec<f64> = ys
        .par_iter()
        .flat_map_iter(|&y| xs.iter().map(move |&x| sensor_signal(model, sensor, x, y)))
        .collect();
    if noise_sigma > 0.0 {
        let normal =
            Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in &mut signal {
            *s += normal.sample(&mut rng);
        }
    }
    StabilityDiagram::new(
        grid.clone(),
        model.lever_arms,
        signal,
        (noise_sigma > 0.0).then_some(noise_sigma),
    )
}
