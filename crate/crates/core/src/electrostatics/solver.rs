use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::LatticeOperator;
use super::tiles::MAX_DENSE_TILES;
use super::{coulomb_bare, distance, PhysicalConstants, Point3, TileSet};
use crate::error::{Error, Result};

/// Electrical state of the gate metal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Gates held at a fixed potential by their voltage sources; induced charge
    /// flows in from the leads.
    Grounded,
    /// Isolated, charge-neutral metal (Σλ = 0) at an unknown common potential.
    Floating,
}

/// How tile j acts on the collocation point of tile i.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileKernel {
    /// Point charges, j ≠ i only (zero diagonal).
    PointCharge,
    /// Point charges off the diagonal; the diagonal is the potential at the
    /// center of a uniformly charged square, 4·ln(1+√2)/a.
    PointWithSelf,
    /// Every entry is the exact potential of a uniformly charged square tile
    /// at the other tile's center (constant-panel collocation).
    UniformPanel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Lattice solver for large grid tilings with a self-term, dense otherwise.
    Auto,
    /// LU factorisation with partial pivoting.
    Dense,
    /// FFT-accelerated conjugate gradients; needs grid tiles and a self-term.
    Lattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TileSolverOptions {
    pub boundary: Boundary,
    pub kernel: TileKernel,
    pub solver: SolverKind,
    /// Relative residual target of the iterative solver.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for TileSolverOptions {
    fn default() -> Self {
        Self {
            boundary: Boundary::Grounded,
            kernel: TileKernel::UniformPanel,
            solver: SolverKind::Auto,
            tolerance: 1e-12,
            max_iterations: 5000,
        }
    }
}

impl TileSolverOptions {
    /// Point tiles on isolated neutral metal, solved as one bordered dense system.
    pub fn neutral_point_tiles() -> Self {
        Self {
            boundary: Boundary::Floating,
            kernel: TileKernel::PointCharge,
            solver: SolverKind::Dense,
            ..Self::default()
        }
    }
}

/// Induced tile charges λ_i (units of e) and the common gate potential.
#[derive(Debug, Clone, PartialEq)]
pub struct TileChargeSolution {
    pub charges: Vec<f64>,
    pub common_potential: f64,
}

/// Dense auto-selection threshold: below this count the LU route is cheaper.
const AUTO_DENSE_LIMIT: usize = 1500;

const SQUARE_SELF_FACTOR: f64 = 3.525_494_348_078_172; // 4·ln(1 + √2)

/// ∫∫ dx dy / |(px, py) − (x, y)| over the square of side `a` centred at the
/// origin, for a point in the plane of the square.
pub fn square_panel_potential(px: f64, py: f64, a: f64) -> f64 {
    // antiderivative u·asinh(v/|u|) + v·asinh(u/|v|); the u·ln|u| pieces cancel
    fn g(u: f64, v: f64) -> f64 {
        let mut out = 0.0;
        if u != 0.0 {
            out += u * (v / u.abs()).asinh();
        }
        if v != 0.0 {
            out += v * (u / v.abs()).asinh();
        }
        out
    }
    let h = a / 2.0;
    g(px - h, py - h) - g(px - h, py + h) - g(px + h, py - h) + g(px + h, py + h)
}

enum Backend {
    Dense(faer::linalg::solvers::PartialPivLu<f64>),
    Lattice {
        op: LatticeOperator,
        // A⁻¹·1, needed to eliminate the common potential of floating metal
        unit_response: Option<Vec<f64>>,
    },
}

/// A factorised (or preconditioned) tile system that can be reused for many
/// electron configurations.
pub struct ScreeningOperator {
    tiles: TileSet,
    consts: PhysicalConstants,
    opts: TileSolverOptions,
    diagonal: Vec<f64>,
    backend: Backend,
}

impl std::fmt::Debug for ScreeningOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScreeningOperator")
            .field("tiles", &self.tiles.count())
            .field("opts", &self.opts)
            .finish()
    }
}

/// Potential at a collocation point displaced by `offset` from the center of
/// a unit-charge tile of side `side`.
fn tile_entry(kernel: TileKernel, k: f64, offset: [f64; 2], side: f64) -> f64 {
    let r = offset[0].hypot(offset[1]);
    match kernel {
        TileKernel::UniformPanel => {
            k * square_panel_potential(offset[0], offset[1], side) / (side * side)
        }
        TileKernel::PointCharge if r == 0.0 => 0.0,
        TileKernel::PointWithSelf if r == 0.0 => k * SQUARE_SELF_FACTOR / side,
        _ => k / r,
    }
}

fn check_distinct(tiles: &TileSet) -> Result<()> {
    let mut pts: Vec<(f64, f64)> = tiles.centers().iter().map(|c| (c[0], c[1])).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite centers"));
    if pts.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Singular("duplicate tile centers".into()));
    }
    Ok(())
}

impl ScreeningOperator {
    pub fn new(
        tiles: &TileSet,
        consts: &PhysicalConstants,
        opts: &TileSolverOptions,
    ) -> Result<Self> {
        let m = tiles.count();
        if m < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 tiles, got {m}"
            )));
        }
        check_distinct(tiles)?;
        let k = consts.coulomb_scale;
        let diagonal: Vec<f64> = match opts.kernel {
            TileKernel::PointCharge => vec![0.0; m],
            TileKernel::PointWithSelf | TileKernel::UniformPanel => tiles
                .areas()
                .iter()
                .map(|a| k * SQUARE_SELF_FACTOR / a.sqrt())
                .collect(),
        };
        let lattice_ok = tiles.lattice().is_some()
            && opts.kernel != TileKernel::PointCharge
            && tiles.uniform_side().is_some();
        let use_lattice = match opts.solver {
            SolverKind::Dense => false,
            SolverKind::Lattice => {
                if !lattice_ok {
                    return Err(Error::InvalidInput(
                        "lattice solver needs grid tiles of equal size and a kernel with a self-term"
                            .into(),
                    ));
                }
                true
            }
            SolverKind::Auto => lattice_ok && m > AUTO_DENSE_LIMIT,
        };
        let backend = if use_lattice {
            let lattice = tiles.lattice().expect("checked above");
            let kernel = opts.kernel;
            let pitch = lattice.pitch;
            let op = LatticeOperator::new(lattice, |p, q| {
                tile_entry(kernel, k, [p as f64 * pitch, q as f64 * pitch], pitch)
            });
            let unit_response = match opts.boundary {
                Boundary::Grounded => None,
                Boundary::Floating => {
                    Some(op.solve(&vec![1.0; m], opts.tolerance, opts.max_iterations)?)
                }
            };
            Backend::Lattice { op, unit_response }
        } else {
            if m > MAX_DENSE_TILES {
                return Err(Error::TooManyTiles {
                    count: m,
                    limit: MAX_DENSE_TILES,
                });
            }
            let n = match opts.boundary {
                Boundary::Grounded => m,
                Boundary::Floating => m + 1,
            };
            let centers = tiles.centers();
            let sides: Vec<f64> = tiles.areas().iter().map(|a| a.sqrt()).collect();
            let mut a = Mat::<f64>::zeros(n, n);
            for j in 0..m {
                for i in 0..m {
                    let offset = [centers[i][0] - centers[j][0], centers[i][1] - centers[j][1]];
                    a[(i, j)] = tile_entry(opts.kernel, k, offset, sides[j]);
                }
            }
            if n > m {
                for i in 0..m {
                    a[(i, m)] = -1.0;
                    a[(m, i)] = 1.0;
                }
            }
            let lu = a.partial_piv_lu();
            let u = lu.U();
            let umax = (0..n).map(|i| u[(i, i)].abs()).fold(0.0, f64::max);
            let umin = (0..n)
                .map(|i| u[(i, i)].abs())
                .fold(f64::INFINITY, f64::min);
            if !(umin > 1e-14 * umax) {
                return Err(Error::Singular(format!(
                    "tile system is numerically singular (pivot ratio {:.3e})",
                    umin / umax
                )));
            }
            Backend::Dense(lu)
        };
        Ok(Self {
            tiles: tiles.clone(),
            consts: *consts,
            opts: *opts,
            diagonal,
            backend,
        })
    }

    pub fn tiles(&self) -> &TileSet {
        &self.tiles
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.consts
    }

    pub fn options(&self) -> &TileSolverOptions {
        &self.opts
    }

    /// b_i = Σ_k w_k·k₀e²/|s_i − r_k| for electrons of weight w_k (w = 1 is one electron).
    pub fn weighted_potential(&self, electrons: &[(Point3, f64)]) -> Vec<f64> {
        let k = self.consts.coulomb_scale;
        self.tiles
            .centers()
            .par_iter()
            .map(|s| {
                electrons
                    .iter()
                    .map(|(r, w)| w * k / distance(s, r))
                    .sum::<f64>()
            })
            .collect()
    }

    pub fn electron_potential(&self, electrons: &[Point3]) -> Vec<f64> {
        let weighted: Vec<(Point3, f64)> = electrons.iter().map(|&r| (r, 1.0)).collect();
        self.weighted_potential(&weighted)
    }

    /// Solves A·λ − Ṽ = b (floating, with Σλ = 0) or A·λ = b (grounded, Ṽ = 0).
    pub fn solve_rhs(&self, b: &[f64]) -> Result<TileChargeSolution> {
        let m = self.tiles.count();
        if b.len() != m {
            return Err(Error::InvalidInput(format!(
                "right-hand side has length {}, expected {m}",
                b.len()
            )));
        }
        match &self.backend {
            Backend::Dense(lu) => {
                let n = match self.opts.boundary {
                    Boundary::Grounded => m,
                    Boundary::Floating => m + 1,
                };
                let rhs = Mat::<f64>::from_fn(n, 1, |i, _| if i < m { b[i] } else { 0.0 });
                let x = lu.solve(&rhs);
                let charges: Vec<f64> = (0..m).map(|i| x[(i, 0)]).collect();
                let common_potential = if n > m { x[(m, 0)] } else { 0.0 };
                if charges.iter().any(|v| !v.is_finite()) || !common_potential.is_finite() {
                    return Err(Error::Singular("non-finite tile charges".into()));
                }
                Ok(TileChargeSolution {
                    charges,
                    common_potential,
                })
            }
            Backend::Lattice { op, unit_response } => {
                let xb = op.solve(b, self.opts.tolerance, self.opts.max_iterations)?;
                match unit_response {
                    None => Ok(TileChargeSolution {
                        charges: xb,
                        common_potential: 0.0,
                    }),
                    Some(x1) => {
                        let v = -xb.iter().sum::<f64>() / x1.iter().sum::<f64>();
                        let charges = xb.iter().zip(x1).map(|(a, c)| a + v * c).collect();
                        Ok(TileChargeSolution {
                            charges,
                            common_potential: v,
                        })
                    }
                }
            }
        }
    }

    pub fn solve(&self, electrons: &[Point3]) -> Result<TileChargeSolution> {
        for r in electrons {
            if !(r[2] < 0.0) {
                return Err(Error::Domain(format!(
                    "electron at z = {} is not below the surface",
                    r[2]
                )));
            }
        }
        self.solve_rhs(&self.electron_potential(electrons))
    }

    /// A·x using the operator's own tile matrix.
    pub fn apply_matrix(&self, x: &[f64]) -> Vec<f64> {
        match &self.backend {
            Backend::Lattice { op, .. } => op.apply(x),
            Backend::Dense(_) => {
                let k = self.consts.coulomb_scale;
                let c = self.tiles.centers();
                let sides: Vec<f64> = self.tiles.areas().iter().map(|a| a.sqrt()).collect();
                (0..c.len())
                    .into_par_iter()
                    .map(|i| {
                        (0..c.len())
                            .map(|j| {
                                let offset = [c[i][0] - c[j][0], c[i][1] - c[j][1]];
                                x[j] * tile_entry(self.opts.kernel, k, offset, sides[j])
                            })
                            .sum::<f64>()
                    })
                    .collect()
            }
        }
    }

    /// max_i |(A·λ)_i − b_i − Ṽ|, the violation of the equipotential condition.
    pub fn equipotential_residual(&self, b: &[f64], sol: &TileChargeSolution) -> f64 {
        self.apply_matrix(&sol.charges)
            .iter()
            .zip(b)
            .map(|(a, bi)| (a - bi - sol.common_potential).abs())
            .fold(0.0, f64::max)
    }

    /// Largest entry of the tile matrix (used to scale residuals).
    pub fn matrix_scale(&self) -> f64 {
        let d = self.diagonal.iter().cloned().fold(0.0, f64::max);
        let c = self.tiles.centers();
        let nearest = match self.tiles.lattice() {
            Some(l) => l.pitch,
            None => {
                let mut best = f64::INFINITY;
                for i in 0..c.len() {
                    for j in (i + 1)..c.len() {
                        best = best.min(distance(&c[i], &c[j]));
                    }
                }
                best
            }
        };
        d.max(self.consts.coulomb_scale / nearest)
    }

    /// Energy of weighted electrons in the field of the tile charges:
    /// −Σ_k w_k Σ_i k₀e²·λ_i/|r_k − s_i|.
    pub fn induced_energy(&self, sol: &TileChargeSolution, electrons: &[(Point3, f64)]) -> f64 {
        let b = self.weighted_potential(electrons);
        -b.iter().zip(&sol.charges).map(|(x, l)| x * l).sum::<f64>()
    }

    /// Screened interaction of two electrons: the bare Coulomb term plus the
    /// energy of electron 2 in the charges induced by electron 1. The
    /// single-electron self-image energies are excluded, so the result vanishes
    /// at infinite separation.
    pub fn pair_potential(&self, r1: Point3, r2: Point3) -> Result<f64> {
        let bare = coulomb_bare(r1, r2, &self.consts)?;
        let sol = self.solve(&[r1])?;
        Ok(bare + self.induced_energy(&sol, &[(r2, 1.0)]))
    }

    /// Screened interaction for every target, reusing one solve for the source.
    pub fn pair_potentials(&self, source: Point3, targets: &[Point3]) -> Result<Vec<f64>> {
        let sol = self.solve(&[source])?;
        targets
            .iter()
            .map(|&r2| {
                let bare = coulomb_bare(source, r2, &self.consts)?;
                Ok(bare + self.induced_energy(&sol, &[(r2, 1.0)]))
            })
            .collect()
    }

    /// Total electrostatic energy of the pair, −½·Σ_k Σ_i k₀e²·λ_i/|r_k − s_i|
    /// plus the bare term, with λ induced by both electrons together. Contains
    /// the self-image energy of each electron.
    pub fn pair_energy_with_self_terms(&self, r1: Point3, r2: Point3) -> Result<f64> {
        let bare = coulomb_bare(r1, r2, &self.consts)?;
        let sol = self.solve(&[r1, r2])?;
        Ok(bare + 0.5 * self.induced_energy(&sol, &[(r1, 1.0), (r2, 1.0)]))
    }

    /// Self-image energy −½·Σ_i k₀e²·λ_i/|r − s_i| of a single electron.
    pub fn self_energy(&self, r: Point3) -> Result<f64> {
        let sol = self.solve(&[r])?;
        Ok(0.5 * self.induced_energy(&sol, &[(r, 1.0)]))
    }
}

/// One-shot solve for a set of electrons.
pub fn solve_tile_charges(
    tiles: &TileSet,
    electrons: &[Point3],
    consts: &PhysicalConstants,
    opts: &TileSolverOptions,
) -> Result<TileChargeSolution> {
    ScreeningOperator::new(tiles, consts, opts)?.solve(electrons)
}

/// One-shot screened pair interaction; see [`ScreeningOperator::pair_potential`].
pub fn screened_potential_tiled(
    tiles: &TileSet,
    r1: Point3,
    r2: Point3,
    consts: &PhysicalConstants,
    opts: &TileSolverOptions,
) -> Result<f64> {
    let d = consts.depth_d;
    for r in [r1, r2] {
        if (r[2] + d).abs() > 1e-9 * d {
            return Err(Error::Domain(format!(
                "electron at z = {} is not in the plane z = {}",
                r[2], -d
            )));
        }
    }
    ScreeningOperator::new(tiles, consts, opts)?.pair_potential(r1, r2)
}
