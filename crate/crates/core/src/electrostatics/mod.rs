//! Bare, image-charge and gate-tile screened two-electron potentials.

mod lattice;
mod layout;
mod solver;
mod tiles;

pub use layout::{dot_positions, GateLayout};
pub use solver::{
    screened_potential_tiled, solve_tile_charges, square_panel_potential, Boundary,
    ScreeningOperator, SolverKind, TileChargeSolution, TileKernel, TileSolverOptions,
};
pub use tiles::{tile_layout, Lattice, TileSet, MAX_DENSE_TILES, MAX_LATTICE_TILES};

use crate::error::{Error, Result};
use crate::units::{COULOMB_VACUUM_UEV_NM, DEFAULT_DEPTH_NM, GAAS_PERMITTIVITY};

/// A point in nm. The gate surface is the plane z = 0; electrons sit at z = −d.
pub type Point3 = [f64; 3];

pub(crate) fn distance(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn lateral_distance(a: &Point3, b: &Point3) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// k₀e² in µeV·nm, already divided by the relative permittivity.
    pub coulomb_scale: f64,
    pub rel_permittivity: f64,
    /// Depth of the electron plane below the surface, nm.
    pub depth_d: f64,
}

impl PhysicalConstants {
    pub fn new(rel_permittivity: f64, depth_d: f64) -> Result<Self> {
        if !(rel_permittivity >= 1.0) || !rel_permittivity.is_finite() {
            return Err(Error::InvalidInput(format!(
                "relative permittivity must be >= 1, got {rel_permittivity}"
            )));
        }
        if !(depth_d > 0.0) || !depth_d.is_finite() {
            return Err(Error::InvalidInput(format!(
                "depth must be positive, got {depth_d}"
            )));
        }
        Ok(Self {
            coulomb_scale: COULOMB_VACUUM_UEV_NM / rel_permittivity,
            rel_permittivity,
            depth_d,
        })
    }

    /// Point in the electron plane at lateral position (x, y).
    pub fn electron_at(&self, x: f64, y: f64) -> Point3 {
        [x, y, -self.depth_d]
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::new(GAAS_PERMITTIVITY, DEFAULT_DEPTH_NM).expect("default constants are valid")
    }
}

/// Unscreened Coulomb energy of two electrons.
pub fn coulomb_bare(r1: Point3, r2: Point3, consts: &PhysicalConstants) -> Result<f64> {
    let r = distance(&r1, &r2);
    if !(r > 0.0) {
        return Err(Error::Domain("coincident electron positions".into()));
    }
    Ok(consts.coulomb_scale / r)
}

/// Screening factor of a grounded metal plane covering the whole surface:
/// f = 1 − ρ/√(ρ² + 4d²), with ρ the lateral separation.
pub fn image_screening_factor(r1: Point3, r2: Point3, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("depth must be positive, got {d}")));
    }
    let tol = 1e-9 * d.max(1.0);
    if (r1[2] + d).abs() > tol || (r2[2] + d).abs() > tol {
        return Err(Error::Domain(format!(
            "electrons must sit at z = {}: got z1 = {}, z2 = {}",
            -d, r1[2], r2[2]
        )));
    }
    let rho = lateral_distance(&r1, &r2);
    Ok(1.0 - rho / (rho * rho + 4.0 * d * d).sqrt())
}

/// Coulomb energy screened by the image charges of a full metal plane.
pub fn screened_potential_image(r1: Point3, r2: Point3, consts: &PhysicalConstants) -> Result<f64> {
    let f = image_screening_factor(r1, r2, consts.depth_d)?;
    Ok(f * coulomb_bare(r1, r2, consts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bare_at_dot_spacing() {
        let c = PhysicalConstants::default();
        let v = coulomb_bare(c.electron_at(0.0, 0.0), c.electron_at(160.0, 0.0), &c).unwrap();
        assert_relative_eq!(v, 1.44e6 / 12.9 / 160.0, max_relative = 1e-14);
        assert!((v - 697.7).abs() < 0.05);
    }

    #[test]
    fn image_factor_values() {
        let c = PhysicalConstants::default();
        let f = |rho: f64| {
            image_screening_factor(c.electron_at(0.0, 0.0), c.electron_at(rho, 0.0), 90.0).unwrap()
        };
        assert_eq!(f(0.0), 1.0);
        assert_relative_eq!(f(180.0), 1.0 - 0.5f64.sqrt(), max_relative = 1e-14);
        // 1 − 160/√58000
        assert!((f(160.0) - 0.335_636).abs() < 1e-6);
        assert!((f(160.0) - 0.3358).abs() < 5e-4);
    }

    #[test]
    fn mismatched_depth_rejected() {
        let r = image_screening_factor([0.0, 0.0, -90.0], [10.0, 0.0, -80.0], 90.0);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn coincident_points_rejected() {
        let c = PhysicalConstants::default();
        let p = c.electron_at(3.0, 4.0);
        assert!(coulomb_bare(p, p, &c).is_err());
    }

    #[test]
    fn invalid_constants() {
        assert!(PhysicalConstants::new(0.5, 90.0).is_err());
        assert!(PhysicalConstants::new(12.9, 0.0).is_err());
    }
}
