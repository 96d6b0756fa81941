//! Artificial hydrogen atoms and H₂-like molecules: nuclei enter the Hubbard
//! chain only through the on-site offsets ε_i = Σ_k V0·a_QD/|τ_i − R_k|.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hubbard::{
    solve_sector, solve_sector_exchange, two_electron_ground, HubbardParams, SpinExchange,
};
use crate::wannier::{toeplitz, translation_invariant_profile, DotArray, InteractionKind};

/// Closer than this fraction of a_QD a nucleus counts as sitting on a dot.
const ON_SITE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NucleusSpec {
    /// Lateral position in nm.
    pub position: [f64; 2],
    /// Strength in µeV at a distance of one dot spacing.
    pub v0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QcScales {
    pub eta: f64,
    pub bohr_nm: f64,
    pub rydberg_uev: f64,
}

pub fn qc_scales(t: f64, v0: f64, a_qd: f64) -> Result<QcScales> {
    if !(t > 0.0) || !(v0 > 0.0) || !(a_qd > 0.0) {
        return Err(Error::InvalidInput(format!(
            "t, V0 and a_QD must be positive (got {t}, {v0}, {a_qd})"
        )));
    }
    let eta = t / v0;
    Ok(QcScales {
        eta,
        bohr_nm: eta * a_qd,
        rydberg_uev: v0 * v0 / t,
    })
}

/// ε_i = Σ_k V0_k·a_QD/(|τ_i − R_k| + softening).
pub fn nuclear_offsets(
    dots: &DotArray,
    nuclei: &[NucleusSpec],
    softening: f64,
) -> Result<Vec<f64>> {
    if !(softening >= 0.0) {
        return Err(Error::InvalidInput(
            "softening length must be non-negative".into(),
        ));
    }
    let a = dots.spacing_nm;
    let mut eps = vec![0.0; dots.len()];
    for nuc in nuclei {
        if !(nuc.v0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "nucleus strength must be positive, got {}",
                nuc.v0
            )));
        }
        for (i, tau) in dots.positions.iter().enumerate() {
            let r = (tau[0] - nuc.position[0]).hypot(tau[1] - nuc.position[1]);
            if softening == 0.0 && r < ON_SITE_TOL * a {
                return Err(Error::Domain(format!(
                    "nucleus at ({}, {}) coincides with dot {i}; place it mid-bond or use a softening length",
                    nuc.position[0], nuc.position[1]
                )));
            }
            eps[i] += nuc.v0 * a / (r + softening);
        }
    }
    Ok(eps)
}

/// Linear bias Δε_i = (i − x_c)·slope with 1-based i; x_c defaults to (N+1)/2.
pub fn bias_offsets(n: usize, slope: f64, center: Option<f64>) -> Vec<f64> {
    let xc = center.unwrap_or((n as f64 + 1.0) / 2.0);
    (1..=n).map(|i| (i as f64 - xc) * slope).collect()
}

/// Lateral position of fractional site coordinate `p` (0 = first dot).
fn site_coordinate(dots: &DotArray, p: f64) -> [f64; 2] {
    let x0 = dots.positions[0][0];
    [x0 + p * dots.spacing_nm, dots.positions[0][1]]
}

fn is_on_site(p: f64) -> bool {
    (p - p.round()).abs() < ON_SITE_TOL
}

/// Default single-nucleus placement: the array centre for even N (a bond
/// midpoint), half a spacing right of the central dot for odd N.
pub fn centered_nucleus_site(n: usize) -> f64 {
    let c = (n as f64 - 1.0) / 2.0;
    if is_on_site(c) {
        c + 0.5
    } else {
        c
    }
}

/// Site coordinates of two nuclei separated by `r` spacings around the array
/// centre. When a nucleus would land on a dot, both are moved half a spacing
/// towards the first dot.
pub fn molecule_nucleus_sites(n: usize, r: f64) -> (f64, f64) {
    let c = (n as f64 - 1.0) / 2.0;
    let (a, b) = (c - r / 2.0, c + r / 2.0);
    if is_on_site(a) || is_on_site(b) {
        (a - 0.5, b - 0.5)
    } else {
        (a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AtomOptions {
    /// Site coordinate of the nucleus; None selects `centered_nucleus_site`.
    pub nucleus_site: Option<f64>,
    pub softening_nm: f64,
    pub spacing_nm: f64,
}

impl Default for AtomOptions {
    fn default() -> Self {
        Self {
            nucleus_site: None,
            softening_nm: 0.0,
            spacing_nm: crate::units::DEFAULT_SPACING_NM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomPoint {
    pub v0: f64,
    pub scales: QcScales,
    /// Lowest eigenenergies in µeV, ascending.
    pub energies: Vec<f64>,
    /// E_b/Ry with E_b = E + 2t.
    pub eb_per_ry: Vec<f64>,
}

impl AtomPoint {
    pub fn gap(&self) -> Option<f64> {
        (self.energies.len() > 1).then(|| self.energies[1] - self.energies[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomResult {
    pub n_sites: usize,
    pub t: f64,
    pub points: Vec<AtomPoint>,
}

fn chain(n: usize, spacing: f64) -> Result<DotArray> {
    DotArray::linear(n, spacing, crate::units::DEFAULT_FWHM_NM)
}

/// One-electron energies with a single nucleus, lowest `k`.
fn atom_energies(n: usize, t: f64, v0: f64, k: usize, opts: &AtomOptions) -> Result<Vec<f64>> {
    let dots = chain(n, opts.spacing_nm)?;
    let site = opts
        .nucleus_site
        .unwrap_or_else(|| centered_nucleus_site(n));
    let nucleus = NucleusSpec {
        position: site_coordinate(&dots, site),
        v0,
    };
    let eps = nuclear_offsets(&dots, &[nucleus], opts.softening_nm)?;
    let params = HubbardParams::homogeneous(n, t)?.with_offsets(eps)?;
    Ok(solve_sector(&params, 1, 0, k.min(n))?.energies)
}

pub fn atom_spectrum(
    n: usize,
    t: f64,
    v0_grid: &[f64],
    k: usize,
    opts: &AtomOptions,
) -> Result<AtomResult> {
    if k == 0 {
        return Err(Error::InvalidInput("need at least one level".into()));
    }
    let points = v0_grid
        .par_iter()
        .map(|&v0| {
            let scales = qc_scales(t, v0, opts.spacing_nm)?;
            let energies = atom_energies(n, t, v0, k, opts)?;
            let eb_per_ry = energies
                .iter()
                .map(|e| (e + 2.0 * t) / scales.rydberg_uev)
                .collect();
            Ok(AtomPoint {
                v0,
                scales,
                energies,
                eb_per_ry,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AtomResult {
        n_sites: n,
        t,
        points,
    })
}

/// Electron-electron interaction matrix for a uniform chain of `n` sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EeSettings {
    pub kind: InteractionKind,
    pub spacing_nm: f64,
    pub fwhm_nm: f64,
    pub tile_nm: f64,
    pub quad_order: usize,
}

impl Default for EeSettings {
    fn default() -> Self {
        Self {
            kind: InteractionKind::TiledGates,
            spacing_nm: crate::units::DEFAULT_SPACING_NM,
            fwhm_nm: crate::units::DEFAULT_FWHM_NM,
            tile_nm: crate::wannier::DEFAULT_TILE_NM,
            quad_order: crate::wannier::DEFAULT_QUAD_ORDER,
        }
    }
}

impl EeSettings {
    pub fn matrix(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        let profile = translation_invariant_profile(
            n,
            self.kind,
            self.spacing_nm,
            self.fwhm_nm,
            self.tile_nm,
            self.quad_order,
        )?;
        Ok(toeplitz(&profile))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoleculePoint {
    /// Internuclear distance in units of a_QD.
    pub r: f64,
    pub e2: f64,
    pub e1: f64,
    pub vnn: f64,
    pub delta: f64,
    /// Singlet-singlet excitation energy.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoleculeResult {
    pub n_sites: usize,
    pub t: f64,
    pub v0: f64,
    pub points: Vec<MoleculePoint>,
}

impl MoleculeResult {
    /// Index of the smallest Δ.
    pub fn minimum(&self) -> Option<usize> {
        (0..self.points.len())
            .min_by(|&a, &b| self.points[a].delta.total_cmp(&self.points[b].delta))
    }
}

/// Hubbard parameters of the two-nucleus molecule at separation `r` (a_QD
/// units), with optional extra offsets `bias`.
pub fn molecule_params(
    n: usize,
    t: f64,
    v0: f64,
    r: f64,
    interactions: &[Vec<f64>],
    bias: Option<&[f64]>,
    spacing: f64,
) -> Result<HubbardParams> {
    let dots = chain(n, spacing)?;
    let (a, b) = molecule_nucleus_sites(n, r);
    let nuclei = [
        NucleusSpec {
            position: site_coordinate(&dots, a),
            v0,
        },
        NucleusSpec {
            position: site_coordinate(&dots, b),
            v0,
        },
    ];
    let mut eps = nuclear_offsets(&dots, &nuclei, 0.0)?;
    if let Some(bias) = bias {
        eps.iter_mut().zip(bias).for_each(|(e, d)| *e += d);
    }
    HubbardParams::homogeneous(n, t)?
        .with_interactions(interactions)?
        .with_offsets(eps)
}

fn check_r_grid(r_grid: &[f64]) -> Result<()> {
    if r_grid.is_empty() || r_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidInput(
            "R grid must be non-empty and positive".into(),
        ));
    }
    if r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(
            "R grid must be strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Dissociation curve Δ(R) = E_2e(R) + V0/R − 2·E_1e. `interactions` is the
/// N×N matrix with U on the diagonal.
pub fn molecule_binding(
    n: usize,
    t: f64,
    v0: f64,
    r_grid: &[f64],
    interactions: &[Vec<f64>],
    spacing_nm: f64,
) -> Result<MoleculeResult> {
    check_r_grid(r_grid)?;
    qc_scales(t, v0, spacing_nm)?;
    let opts = AtomOptions {
        spacing_nm,
        ..AtomOptions::default()
    };
    let e1 = atom_energies(n, t, v0, 1, &opts)?[0];
    let points = r_grid
        .par_iter()
        .map(|&r| {
            let params = molecule_params(n, t, v0, r, interactions, None, spacing_nm)?;
            let (ground, _) = two_electron_ground(&params)?;
            let singlet = solve_sector_exchange(&params, 1, SpinExchange::Symmetric, 2)?;
            let vnn = v0 / r;
            let e2 = ground + vnn;
            Ok(MoleculePoint {
                r,
                e2,
                e1,
                vnn,
                delta: e2 - 2.0 * e1,
                gap: singlet.energies[1] - singlet.energies[0],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MoleculeResult {
        n_sites: n,
        t,
        v0,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationMap {
    pub r: f64,
    pub ground: Vec<f64>,
    pub excited: Vec<f64>,
    pub absdiff: Vec<f64>,
}

impl OccupationMap {
    pub fn total_absdiff(&self) -> f64 {
        self.absdiff.iter().sum()
    }
}

/// Ground and first-excited ⟨n_i⟩ of the two-electron molecule. Both are
/// taken from the singlet class: the S_z = 0 triplet lies almost on top of the
/// ground state at large R and carries the same charge density, so it is
/// invisible to a charge sensor.
pub fn occupation_maps(
    n: usize,
    t: f64,
    v0: f64,
    r_grid: &[f64],
    interactions: &[Vec<f64>],
    bias_slope: f64,
    spacing_nm: f64,
) -> Result<Vec<OccupationMap>> {
    check_r_grid(r_grid)?;
    let bias = bias_offsets(n, bias_slope, None);
    r_grid
        .par_iter()
        .map(|&r| {
            let params = molecule_params(n, t, v0, r, interactions, Some(&bias), spacing_nm)?;
            let s = solve_sector_exchange(&params, 1, SpinExchange::Symmetric, 2)?;
            let (ground, excited) = (s.occupations[0].clone(), s.occupations[1].clone());
            let absdiff = ground
                .iter()
                .zip(&excited)
                .map(|(a, b)| (a - b).abs())
                .collect();
            Ok(OccupationMap {
                r,
                ground,
                excited,
                absdiff,
            })
        })
        .collect()
}
