use super::DotArray;
use crate::error::{Error, Result};
use crate::units::{GAAS_EFFECTIVE_MASS, HBAR2_OVER_2ME_UEV_NM2};

/// Confinement potential sampled on a uniform grid in the electron plane.
/// `values` is row-major: index `iy * nx + ix` holds V(x0 + ix·h, y0 + iy·h) in µeV.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl PotentialGrid {
    pub fn from_fn(
        x0: f64,
        y0: f64,
        h: f64,
        nx: usize,
        ny: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                values.push(f(x0 + ix as f64 * h, y0 + iy as f64 * h));
            }
        }
        Self {
            x0,
            y0,
            h,
            nx,
            ny,
            values,
        }
    }

    fn x(&self, ix: usize) -> f64 {
        self.x0 + ix as f64 * self.h
    }

    fn y(&self, iy: usize) -> f64 {
        self.y0 + iy as f64 * self.h
    }
}

/// Tunnel matrix element ∫ ψ_i [−ħ²∇²/2m* + V] ψ_j between Löwdin-orthogonalised
/// Gaussian orbitals, with the GaAs effective mass.
pub fn tunnel_element(i: usize, j: usize, dots: &DotArray, grid: &PotentialGrid) -> Result<f64> {
    tunnel_element_with_mass(i, j, dots, grid, GAAS_EFFECTIVE_MASS)
}

pub fn tunnel_element_with_mass(
    i: usize,
    j: usize,
    dots: &DotArray,
    grid: &PotentialGrid,
    effective_mass: f64,
) -> Result<f64> {
    let n = dots.len();
    if i >= n || j >= n || i.abs_diff(j) != 1 {
        return Err(Error::InvalidInput(format!(
            "tunnel elements need adjacent sites, got ({i}, {j})"
        )));
    }
    if grid.values.len() != grid.nx * grid.ny || grid.nx < 5 || grid.ny < 5 {
        return Err(Error::InvalidInput(
            "potential grid shape is inconsistent".into(),
        ));
    }
    if !(effective_mass > 0.0) {
        return Err(Error::InvalidInput(
            "effective mass must be positive".into(),
        ));
    }
    let h = grid.h;
    for k in [i, j] {
        if !(h > 0.0) || h > dots.fwhm(k) / 8.0 {
            return Err(Error::InvalidInput(format!(
                "grid spacing {h} nm exceeds fwhm/8 = {} nm",
                dots.fwhm(k) / 8.0
            )));
        }
        let s = dots.orbital_sigma(k);
        let [cx, cy] = dots.positions[k];
        let margin = 4.0 * s + 2.0 * h;
        let covered = cx - margin >= grid.x0
            && cx + margin <= grid.x(grid.nx - 1)
            && cy - margin >= grid.y0
            && cy + margin <= grid.y(grid.ny - 1);
        if !covered {
            return Err(Error::Domain(format!(
                "potential grid does not cover orbital {k} to 4 standard deviations"
            )));
        }
    }

    let orbital = |k: usize| -> Vec<f64> {
        let s = dots.orbital_sigma(k);
        let [cx, cy] = dots.positions[k];
        let mut phi = Vec::with_capacity(grid.nx * grid.ny);
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                let r2 = (grid.x(ix) - cx).powi(2) + (grid.y(iy) - cy).powi(2);
                phi.push((-r2 / (2.0 * s * s)).exp());
            }
        }
        let norm = (phi.iter().map(|v| v * v).sum::<f64>() * h * h).sqrt();
        phi.iter_mut().for_each(|v| *v /= norm);
        phi
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * h * h;

    let (phi_i, phi_j) = (orbital(i), orbital(j));
    let s = dot(&phi_i, &phi_j);
    if !(s.abs() < 1.0) {
        return Err(Error::Domain("orbitals are linearly dependent".into()));
    }
    // symmetric orthogonalisation S^{-1/2} for a 2×2 overlap matrix
    let a = 0.5 * (1.0 / (1.0 + s).sqrt() + 1.0 / (1.0 - s).sqrt());
    let b = 0.5 * (1.0 / (1.0 + s).sqrt() - 1.0 / (1.0 - s).sqrt());
    let psi_i: Vec<f64> = phi_i
        .iter()
        .zip(&phi_j)
        .map(|(p, q)| a * p + b * q)
        .collect();
    let psi_j: Vec<f64> = phi_i
        .iter()
        .zip(&phi_j)
        .map(|(p, q)| b * p + a * q)
        .collect();

    let kinetic = HBAR2_OVER_2ME_UEV_NM2 / effective_mass;
    let h_psi_j = apply_hamiltonian(&psi_j, grid, kinetic);
    let h_psi_i = apply_hamiltonian(&psi_i, grid, kinetic);
    Ok(0.5 * (dot(&psi_i, &h_psi_j) + dot(&psi_j, &h_psi_i)))
}

// −(ħ²/2m*)∇²ψ + Vψ with a fourth-order central difference Laplacian;
// the orbital is taken to vanish outside the grid.
fn apply_hamiltonian(psi: &[f64], grid: &PotentialGrid, kinetic: f64) -> Vec<f64> {
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    let at = |ix: isize, iy: isize| -> f64 {
        if ix < 0 || iy < 0 || ix >= nx || iy >= ny {
            0.0
        } else {
            psi[(iy * nx + ix) as usize]
        }
    };
    let c = kinetic / (12.0 * grid.h * grid.h);
    let mut out = vec![0.0; psi.len()];
    for iy in 0..ny {
        for ix in 0..nx {
            let center = at(ix, iy);
            let lap_x = -at(ix - 2, iy) + 16.0 * at(ix - 1, iy) - 30.0 * center
                + 16.0 * at(ix + 1, iy)
                - at(ix + 2, iy);
            let lap_y = -at(ix, iy - 2) + 16.0 * at(ix, iy - 1) - 30.0 * center
                + 16.0 * at(ix, iy + 1)
                - at(ix, iy + 2);
            let idx = (iy * nx + ix) as usize;
            out[idx] = -c * (lap_x + lap_y) + grid.values[idx] * center;
        }
    }
    out
}
