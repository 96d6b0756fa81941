//! Gaussian Wannier orbitals and the Hubbard matrix elements U_i, V_ij and t_ij.

mod tunnel;

pub use tunnel::{tunnel_element, tunnel_element_with_mass, PotentialGrid};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::electrostatics::{
    tile_layout, GateLayout, PhysicalConstants, Point3, ScreeningOperator, TileSolverOptions,
};
use crate::error::{Error, Result};
use crate::quadrature::gaussian_2d_rule;
use crate::special::gaussian_inverse_distance;
use crate::units::{DEFAULT_FWHM_NM, DEFAULT_SPACING_NM, FWHM_PER_SIGMA};

pub const DEFAULT_QUAD_ORDER: usize = 16;
pub const DEFAULT_TILE_NM: f64 = 20.0;

/// Relative change between quadrature orders q and 2q above which an element
/// is flagged as unconverged.
pub const QUAD_CONVERGENCE_TOL: f64 = 0.01;

/// Dot centres in the electron plane and the width of their orbitals.
///
/// Orbitals are φ(r) ∝ exp(−r²/(2s²)) with s = fwhm/(2√(2 ln 2)), so the charge
/// density |φ|² has per-axis standard deviation s/√2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DotArray {
    pub positions: Vec<[f64; 2]>,
    #[serde(default = "default_spacing")]
    pub spacing_nm: f64,
    #[serde(default = "default_fwhm")]
    pub fwhm_nm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fwhm_per_dot_nm: Option<Vec<f64>>,
}

fn default_spacing() -> f64 {
    DEFAULT_SPACING_NM
}

fn default_fwhm() -> f64 {
    DEFAULT_FWHM_NM
}

impl DotArray {
    pub fn new(positions: Vec<[f64; 2]>, spacing_nm: f64, fwhm_nm: f64) -> Result<Self> {
        let dots = Self {
            positions,
            spacing_nm,
            fwhm_nm,
            fwhm_per_dot_nm: None,
        };
        dots.validate()?;
        Ok(dots)
    }

    /// Uniform chain along x centred at the origin, matching `GateLayout::paper_like`.
    pub fn linear(n: usize, spacing_nm: f64, fwhm_nm: f64) -> Result<Self> {
        let xs = crate::electrostatics::dot_positions(n, spacing_nm);
        Self::new(
            xs.into_iter().map(|x| [x, 0.0]).collect(),
            spacing_nm,
            fwhm_nm,
        )
    }

    pub fn with_fwhm_per_dot(mut self, fwhm: Vec<f64>) -> Result<Self> {
        self.fwhm_per_dot_nm = Some(fwhm);
        self.validate()?;
        Ok(self)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let dots: Self = serde_json::from_str(s)?;
        dots.validate()?;
        Ok(dots)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::InvalidInput("dot array is empty".into()));
        }
        if self.positions.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(Error::InvalidInput(
                "dot positions must be strictly increasing along x".into(),
            ));
        }
        if !(self.spacing_nm > 0.0) {
            return Err(Error::InvalidInput("spacing must be positive".into()));
        }
        if !(self.fwhm_nm > 0.0) {
            return Err(Error::InvalidInput("fwhm must be positive".into()));
        }
        if let Some(per) = &self.fwhm_per_dot_nm {
            if per.len() != self.positions.len() || per.iter().any(|&f| !(f > 0.0)) {
                return Err(Error::InvalidInput(
                    "per-dot fwhm needs one positive value per dot".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn fwhm(&self, i: usize) -> f64 {
        self.fwhm_per_dot_nm.as_ref().map_or(self.fwhm_nm, |v| v[i])
    }

    /// Width parameter s of the orbital amplitude.
    pub fn orbital_sigma(&self, i: usize) -> f64 {
        self.fwhm(i) / FWHM_PER_SIGMA
    }

    /// Per-axis standard deviation of the charge density |φ_i|².
    pub fn density_sigma(&self, i: usize) -> f64 {
        self.orbital_sigma(i) / std::f64::consts::SQRT_2
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.positions[i], self.positions[j]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Bare,
    #[serde(alias = "image")]
    ImageCharge,
    #[serde(alias = "tiled")]
    TiledGates,
}

impl InteractionKind {
    pub fn label(self) -> &'static str {
        match self {
            InteractionKind::Bare => "bare",
            InteractionKind::ImageCharge => "image",
            InteractionKind::TiledGates => "tiled",
        }
    }
}

impl std::str::FromStr for InteractionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bare" => Ok(Self::Bare),
            "image" | "image_charge" => Ok(Self::ImageCharge),
            "tiled" | "tiled_gates" => Ok(Self::TiledGates),
            other => Err(Error::InvalidInput(format!(
                "unknown interaction model `{other}` (expected bare, image or tiled)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InteractionModel {
    pub kind: InteractionKind,
    pub layout: Option<GateLayout>,
    pub consts: PhysicalConstants,
    pub tile_size: f64,
    pub solver: TileSolverOptions,
}

impl InteractionModel {
    pub fn bare(consts: PhysicalConstants) -> Self {
        Self {
            kind: InteractionKind::Bare,
            layout: None,
            consts,
            tile_size: DEFAULT_TILE_NM,
            solver: TileSolverOptions::default(),
        }
    }

    pub fn image_charge(consts: PhysicalConstants) -> Self {
        Self {
            kind: InteractionKind::ImageCharge,
            ..Self::bare(consts)
        }
    }

    /// Tile-screened model; the constants are taken from the layout.
    pub fn tiled(layout: GateLayout, tile_size: f64) -> Result<Self> {
        let consts = layout.constants()?;
        Ok(Self {
            kind: InteractionKind::TiledGates,
            layout: Some(layout),
            consts,
            tile_size,
            solver: TileSolverOptions::default(),
        })
    }

    pub fn with_solver(mut self, solver: TileSolverOptions) -> Self {
        self.solver = solver;
        self
    }
}

/// One interaction matrix element and whether its screening correction is
/// stable under doubling the quadrature order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionElement {
    pub value: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    /// Symmetric; the diagonal holds U_i.
    pub values: Vec<Vec<f64>>,
    /// Pairs (i ≤ j) whose quadrature did not converge.
    pub unconverged: Vec<(usize, usize)>,
}

/// Charge-density quadrature of one dot together with its induced tile charges.
struct DotSource {
    points: Vec<(Point3, f64)>,
    induced: Option<Vec<f64>>,
}

/// Prepared evaluator: the tile system (if any) is factorised once and reused
/// for every element.
pub struct InteractionEngine {
    dots: DotArray,
    kind: InteractionKind,
    consts: PhysicalConstants,
    quad_order: usize,
    operator: Option<ScreeningOperator>,
}

impl InteractionEngine {
    pub fn new(dots: &DotArray, model: &InteractionModel, quad_order: usize) -> Result<Self> {
        dots.validate()?;
        if quad_order < 4 {
            return Err(Error::InvalidInput(format!(
                "quadrature order must be at least 4, got {quad_order}"
            )));
        }
        let operator = match model.kind {
            InteractionKind::TiledGates => {
                let layout = model.layout.as_ref().ok_or_else(|| {
                    Error::InvalidInput("the tiled-gates model requires a gate layout".into())
                })?;
                let tiles = tile_layout(layout, model.tile_size)?;
                Some(ScreeningOperator::new(
                    &tiles,
                    &model.consts,
                    &model.solver,
                )?)
            }
            _ => None,
        };
        Ok(Self {
            dots: dots.clone(),
            kind: model.kind,
            consts: model.consts,
            quad_order,
            operator,
        })
    }

    pub fn dots(&self) -> &DotArray {
        &self.dots
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.dots.len() {
            return Err(Error::InvalidInput(format!(
                "site {i} out of range for {} dots",
                self.dots.len()
            )));
        }
        Ok(())
    }

    fn source(&self, i: usize, order: usize, with_charges: bool) -> Result<DotSource> {
        let depth = self.consts.depth_d;
        let points = gaussian_2d_rule(self.dots.positions[i], self.dots.density_sigma(i), order)?
            .into_iter()
            .map(|(p, w)| ([p[0], p[1], -depth], w))
            .collect::<Vec<_>>();
        let induced = match &self.operator {
            Some(op) if with_charges => {
                Some(op.solve_rhs(&op.weighted_potential(&points))?.charges)
            }
            _ => None,
        };
        Ok(DotSource { points, induced })
    }

    /// Analytic Coulomb interaction of the two Gaussian densities.
    fn bare_part(&self, i: usize, j: usize) -> f64 {
        let sigma = self.dots.density_sigma(i).hypot(self.dots.density_sigma(j));
        self.consts.coulomb_scale * gaussian_inverse_distance(self.dots.distance(i, j), sigma)
    }

    /// Screening correction between the densities of two dots (≤ 0).
    fn correction(&self, a: &DotSource, b: &DotSource) -> f64 {
        match self.kind {
            InteractionKind::Bare => 0.0,
            InteractionKind::ImageCharge => {
                let k = self.consts.coulomb_scale;
                let four_d2 = 4.0 * self.consts.depth_d * self.consts.depth_d;
                -a.points
                    .par_iter()
                    .map(|(p, wp)| {
                        wp * b
                            .points
                            .iter()
                            .map(|(q, wq)| {
                                let r2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
                                wq * k / (r2 + four_d2).sqrt()
                            })
                            .sum::<f64>()
                    })
                    .sum::<f64>()
            }
            InteractionKind::TiledGates => {
                let op = self.operator.as_ref().expect("tiled model has an operator");
                let sol = crate::electrostatics::TileChargeSolution {
                    charges: a.induced.clone().expect("tiled sources carry charges"),
                    common_potential: 0.0,
                };
                op.induced_energy(&sol, &b.points)
            }
        }
    }

    fn combine(&self, i: usize, j: usize, lo: f64, hi: f64) -> InteractionElement {
        let value = self.bare_part(i, j) + lo;
        let refined = self.bare_part(i, j) + hi;
        InteractionElement {
            value,
            converged: (refined - value).abs() <= QUAD_CONVERGENCE_TOL * value.abs(),
        }
    }

    pub fn element(&self, i: usize, j: usize) -> Result<InteractionElement> {
        self.check_index(i)?;
        self.check_index(j)?;
        let q = self.quad_order;
        if self.kind == InteractionKind::Bare {
            return Ok(self.combine(i, j, 0.0, 0.0));
        }
        let (ai, bj) = (self.source(i, q, true)?, self.source(j, q, false)?);
        let (ai2, bj2) = (self.source(i, 2 * q, true)?, self.source(j, 2 * q, false)?);
        let lo = self.correction(&ai, &bj);
        let hi = self.correction(&ai2, &bj2);
        Ok(self.combine(i, j, lo, hi))
    }

    pub fn matrix(&self) -> Result<InteractionMatrix> {
        let n = self.dots.len();
        let q = self.quad_order;
        let mut values = vec![vec![0.0; n]; n];
        let mut unconverged = Vec::new();
        let sources: Vec<(DotSource, DotSource)> = if self.kind == InteractionKind::Bare {
            Vec::new()
        } else {
            (0..n)
                .map(|i| Ok((self.source(i, q, true)?, self.source(i, 2 * q, true)?)))
                .collect::<Result<_>>()?
        };
        for i in 0..n {
            for j in i..n {
                let el = if sources.is_empty() {
                    self.combine(i, j, 0.0, 0.0)
                } else {
                    let lo = self.correction(&sources[i].0, &sources[j].0);
                    let hi = self.correction(&sources[i].1, &sources[j].1);
                    self.combine(i, j, lo, hi)
                };
                values[i][j] = el.value;
                values[j][i] = el.value;
                if !el.converged {
                    unconverged.push((i, j));
                }
            }
        }
        Ok(InteractionMatrix {
            values,
            unconverged,
        })
    }

    /// V between dot `center` and each of `targets`, sharing one source solve.
    /// Used to build translation-invariant interaction profiles.
    pub fn row(&self, center: usize, targets: &[usize]) -> Result<Vec<f64>> {
        self.check_index(center)?;
        for &t in targets {
            self.check_index(t)?;
        }
        let src = self.source(center, self.quad_order, true)?;
        targets
            .iter()
            .map(|&j| {
                let corr = if self.kind == InteractionKind::Bare {
                    0.0
                } else {
                    self.correction(&src, &self.source(j, self.quad_order, false)?)
                };
                Ok(self.bare_part(center, j) + corr)
            })
            .collect()
    }
}

pub fn interaction_element(
    i: usize,
    j: usize,
    dots: &DotArray,
    model: &InteractionModel,
    quad_order: usize,
) -> Result<InteractionElement> {
    InteractionEngine::new(dots, model, quad_order)?.element(i, j)
}

pub fn interaction_matrix(
    dots: &DotArray,
    model: &InteractionModel,
    quad_order: usize,
) -> Result<InteractionMatrix> {
    InteractionEngine::new(dots, model, quad_order)?.matrix()
}

/// Interaction versus site distance k = 0..n−1 for a uniform array of `n`
/// sites. The values come from the central dot of a paper-like layout with
/// 2n−1 dots, so that every distance sees the same gate environment.
pub fn translation_invariant_profile(
    n: usize,
    kind: InteractionKind,
    spacing_nm: f64,
    fwhm_nm: f64,
    tile_size: f64,
    quad_order: usize,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "profile needs at least one site".into(),
        ));
    }
    let total = 2 * n - 1;
    let dots = DotArray::linear(total, spacing_nm, fwhm_nm)?;
    let model = match kind {
        InteractionKind::TiledGates => {
            InteractionModel::tiled(GateLayout::paper_like(total, spacing_nm)?, tile_size)?
        }
        InteractionKind::ImageCharge => {
            InteractionModel::image_charge(PhysicalConstants::default())
        }
        InteractionKind::Bare => InteractionModel::bare(PhysicalConstants::default()),
    };
    let engine = InteractionEngine::new(&dots, &model, quad_order)?;
    let center = n - 1;
    let targets: Vec<usize> = (center..total).collect();
    engine.row(center, &targets)
}

/// Symmetric Toeplitz matrix V_ij = profile[|i − j|].
pub fn toeplitz(profile: &[f64]) -> Vec<Vec<f64>> {
    let n = profile.len();
    (0..n)
        .map(|i| (0..n).map(|j| profile[i.abs_diff(j)]).collect())
        .collect()
}
