//! Two-dot charge-stability diagrams: the anti-crossing boundary model,
//! synthetic sensor signals, edge extraction and parameter fits.
//!
//! With δε measured from the anti-crossing centre, the two boundaries are
//!
//! δε_i + δε_j = ±(V + √((δε_i − δε_j)² + 4t²))

mod edges;
mod fit;
mod lm;
mod simulate;

pub use edges::{detect_edges, EdgeOptions, EdgePoint, EdgeSet};
pub use fit::{fit_anticrossing, fit_diagram, FitMethod, FitOptions, FitReport};
pub use simulate::{simulate_diagram, thermal_occupations, SensorModel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnticrossingModel {
    pub v_ij: f64,
    pub t_ij: f64,
    /// Anti-crossing centre (ε_i,0, ε_j,0) in µeV.
    pub center: [f64; 2],
    /// µeV per mV for the i and j gate axes.
    pub lever_arms: [f64; 2],
}

impl AnticrossingModel {
    pub fn new(v_ij: f64, t_ij: f64) -> Self {
        Self {
            v_ij,
            t_ij,
            center: [0.0, 0.0],
            lever_arms: [1.0, 1.0],
        }
    }

    pub fn with_center(mut self, ci: f64, cj: f64) -> Self {
        self.center = [ci, cj];
        self
    }

    pub fn with_lever_arms(mut self, ai: f64, aj: f64) -> Self {
        self.lever_arms = [ai, aj];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_ij >= 0.0) || !(self.t_ij >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "V and t must be non-negative (got {}, {})",
                self.v_ij, self.t_ij
            )));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidInput("centre must be finite".into()));
        }
        if !self.lever_arms.iter().all(|&a| a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidInput("lever arms must be positive".into()));
        }
        Ok(())
    }

    /// Height of the `sign` branch, in δε_i + δε_j, at detuning w = δε_i − δε_j.
    pub fn branch_sum(&self, sign: f64, w: f64) -> f64 {
        sign * (self.v_ij + (w * w + 4.0 * self.t_ij * self.t_ij).sqrt())
    }

    /// Separation of the two branches along δε_i = δε_j, in δε_i + δε_j.
    pub fn diagonal_gap(&self) -> f64 {
        2.0 * (self.v_ij + 2.0 * self.t_ij)
    }
}

/// Absolute (ε_i, ε_j) points of the lower (−) and upper (+) branches at the
/// given detunings δε_i − δε_j.
pub fn boundary_curves(
    model: &AnticrossingModel,
    detunings: &[f64],
) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let branch = |sign: f64| {
        detunings
            .iter()
            .map(|&w| {
                let s = model.branch_sum(sign, w);
                [
                    model.center[0] + 0.5 * (s + w),
                    model.center[1] + 0.5 * (s - w),
                ]
            })
            .collect()
    };
    (branch(-1.0), branch(1.0))
}

pub fn volts_to_energy(values_mv: &[f64], lever_arm: f64) -> Result<Vec<f64>> {
    if !(lever_arm > 0.0) || !lever_arm.is_finite() {
        return Err(Error::InvalidInput(format!(
            "lever arm must be positive, got {lever_arm}"
        )));
    }
    Ok(values_mv.iter().map(|v| v * lever_arm).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisUnit {
    #[serde(rename = "ueV")]
    MicroElectronVolt,
    #[serde(rename = "mV")]
    Millivolt,
}

/// Rectangular grid of gate settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityGrid {
    pub axis_i: Vec<f64>,
    pub axis_j: Vec<f64>,
    pub unit: AxisUnit,
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "axis {name} needs at least 3 points"
        )));
    }
    if !axis.iter().all(|x| x.is_finite()) || axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(format!(
            "axis {name} must be finite and strictly ascending"
        )));
    }
    Ok(())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect()
}

impl StabilityGrid {
    pub fn new(axis_i: Vec<f64>, axis_j: Vec<f64>, unit: AxisUnit) -> Result<Self> {
        let g = Self {
            axis_i,
            axis_j,
            unit,
        };
        g.validate()?;
        Ok(g)
    }

    /// Square µeV grid of n×n points, ±half_width about the model centre.
    pub fn centered(model: &AnticrossingModel, half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidInput("half width must be positive".into()));
        }
        let [ci, cj] = model.center;
        Self::new(
            linspace(ci - half_width, ci + half_width, n),
            linspace(cj - half_width, cj + half_width, n),
            AxisUnit::MicroElectronVolt,
        )
    }

    /// A grid wide enough to show both branches and their asymptotes.
    pub fn spanning(model: &AnticrossingModel, n: usize) -> Result<Self> {
        let reach = model.v_ij + 2.0 * model.t_ij;
        Self::centered(model, 1.5 * reach + 60.0, n)
    }

    pub fn validate(&self) -> Result<()> {
        check_axis("i", &self.axis_i)?;
        check_axis("j", &self.axis_j)
    }

    /// Axes in µeV.
    pub fn energy_axes(&self, lever_arms: [f64; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
        match self.unit {
            AxisUnit::MicroElectronVolt => Ok((self.axis_i.clone(), self.axis_j.clone())),
            AxisUnit::Millivolt => Ok((
                volts_to_energy(&self.axis_i, lever_arms[0])?,
                volts_to_energy(&self.axis_j, lever_arms[1])?,
            )),
        }
    }
}

/// Sensor signal on a grid, stored row-major with the j axis as the row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityDiagram {
    pub grid: StabilityGrid,
    /// Lever arms that convert a mV grid to µeV; unused for µeV grids.
    pub lever_arms: [f64; 2],
    pub signal: Vec<f64>,
    pub noise_sigma: Option<f64>,
}

impl StabilityDiagram {
    pub fn new(
        grid: StabilityGrid,
        lever_arms: [f64; 2],
        signal: Vec<f64>,
        noise_sigma: Option<f64>,
    ) -> Result<Self> {
        grid.validate()?;
        if signal.len() != grid.axis_i.len() * grid.axis_j.len() {
            return Err(Error::InvalidInput(format!(
                "signal has {} values for a {}x{} grid",
                signal.len(),
                grid.axis_i.len(),
                grid.axis_j.len()
            )));
        }
        if !signal.iter().all(|s| s.is_finite()) {
            return Err(Error::InvalidInput("signal must be finite".into()));
        }
        if grid.unit == AxisUnit::Millivolt && !lever_arms.iter().all(|&a| a > 0.0) {
            return Err(Error::InvalidInput("lever arms must be positive".into()));
        }
        Ok(Self {
            grid,
            lever_arms,
            signal,
            noise_sigma,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.grid.axis_i.len(), self.grid.axis_j.len())
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.signal[j * self.grid.axis_i.len() + i]
    }

    /// Same diagram with µeV axes.
    pub fn to_energy(&self) -> Result<Self> {
        let (axis_i, axis_j) = self.grid.energy_axes(self.lever_arms)?;
        Ok(Self {
            grid: StabilityGrid {
                axis_i,
                axis_j,
                unit: AxisUnit::MicroElectronVolt,
            },
            lever_arms: self.lever_arms,
            signal: self.signal.clone(),
            noise_sigma: self.noise_sigma,
        })
    }

    /// Swaps the roles of the i and j axes.
    pub fn transposed(&self) -> Self {
        let (ni, nj) = self.shape();
        let mut signal = vec![0.0; ni * nj];
        for j in 0..nj {
            for i in 0..ni {
                signal[i * nj + j] = self.signal[j * ni + i];
            }
        }
        Self {
            grid: StabilityGrid {
                axis_i: self.grid.axis_j.clone(),
                axis_j: self.grid.axis_i.clone(),
                unit: self.grid.unit,
            },
            lever_arms: [self.lever_arms[1], self.lever_arms[0]],
            signal,
            noise_sigma: self.noise_sigma,
        }
    }
}
