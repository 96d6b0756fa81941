//! Unit conventions shared by every module: lengths in nm, energies in µeV,
//! charges in units of the elementary charge.

/// e²/(4πε₀) in µeV·nm.
pub const COULOMB_VACUUM_UEV_NM: f64 = 1.44e6;

/// Relative permittivity of GaAs.
pub const GAAS_PERMITTIVITY: f64 = 12.9;

/// Depth of the electron plane below the gate surface.
pub const DEFAULT_DEPTH_NM: f64 = 90.0;

/// Dot pitch of the linear array.
pub const DEFAULT_SPACING_NM: f64 = 160.0;

/// Full width at half maximum of the Gaussian Wannier orbitals.
pub const DEFAULT_FWHM_NM: f64 = 45.0;

/// Homogeneous nearest-neighbour tunnel coupling.
pub const DEFAULT_TUNNEL_UEV: f64 = 20.0;

/// Reservoir temperature expressed as an energy (≈100 mK).
pub const THERMAL_SCALE_UEV: f64 = 10.0;

/// ħ²/(2 m_e) in µeV·nm².
pub const HBAR2_OVER_2ME_UEV_NM2: f64 = 38_099.82;

/// Conduction-band effective mass of GaAs in units of m_e.
pub const GAAS_EFFECTIVE_MASS: f64 = 0.067;

/// Ratio between the FWHM of a Gaussian and its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;
