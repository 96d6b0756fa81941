//! Extended Fermi-Hubbard model on an open chain:
//!
//! H = Σ_i U_i n_i↑ n_i↓ + Σ_{i≠j} V_ij n_i n_j − Σ_i ε_i n_i − Σ_{⟨ij⟩σ} t_ij c†_iσ c_jσ
//!
//! The V sum runs over ordered pairs, so every unordered pair contributes
//! 2·V_ij to the diagonal. V_ij values from the `wannier` module are used
//! as they are.

mod basis;
mod eigen;
mod sparse;

pub use basis::{enumerate_sector, Occupation, SectorBasis, MAX_DIMENSION, MAX_SITES};
pub use eigen::{
    dense_eigenpairs, lanczos, lowest_eigenpairs, Eigenpairs, Method, DENSE_LIMIT, RESIDUAL_TOL,
};
pub use sparse::CsrMatrix;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HubbardParams {
    pub n_sites: usize,
    /// Nearest-neighbour couplings, t[i] between sites i and i+1.
    pub t: Vec<f64>,
    pub onsite_u: Vec<f64>,
    /// Symmetric; the diagonal is ignored (U is carried separately).
    pub v: Vec<Vec<f64>>,
    pub eps: Vec<f64>,
}

impl HubbardParams {
    pub fn new(t: Vec<f64>, onsite_u: Vec<f64>, v: Vec<Vec<f64>>, eps: Vec<f64>) -> Result<Self> {
        let p = Self {
            n_sites: eps.len(),
            t,
            onsite_u,
            v,
            eps,
        };
        p.validate()?;
        Ok(p)
    }

    /// Uniform tunnel coupling on every bond, no interactions, no offsets.
    pub fn homogeneous(n_sites: usize, t: f64) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidInput("chain needs at least one site".into()));
        }
        Self::new(
            vec![t; n_sites - 1],
            vec![0.0; n_sites],
            vec![vec![0.0; n_sites]; n_sites],
            vec![0.0; n_sites],
        )
    }

    /// Takes U from the diagonal and V from the off-diagonal of `matrix`.
    pub fn with_interactions(mut self, matrix: &[Vec<f64>]) -> Result<Self> {
        let n = self.n_sites;
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!(
                "interaction matrix must be {n}×{n}"
            )));
        }
        self.onsite_u = (0..n).map(|i| matrix[i][i]).collect();
        self.v = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { 0.0 } else { matrix[i][j] })
                    .collect()
            })
            .collect();
        self.validate()?;
        Ok(self)
    }

    pub fn with_offsets(mut self, eps: Vec<f64>) -> Result<Self> {
        self.eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites;
        if n == 0 {
            return Err(Error::InvalidInput("chain needs at least one site".into()));
        }
        if self.t.len() + 1 != n || self.onsite_u.len() != n || self.eps.len() != n {
            return Err(Error::InvalidInput(format!(
                "parameter lengths (t {}, U {}, eps {}) inconsistent with {n} sites",
                self.t.len(),
                self.onsite_u.len(),
                self.eps.len()
            )));
        }
        if self.v.len() != n || self.v.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!("V must be {n}×{n}")));
        }
        for i in 0..n {
            for j in 0..i {
                if self.v[i][j] != self.v[j][i] {
                    return Err(Error::InvalidInput(format!(
                        "V is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let all = self
            .t
            .iter()
            .chain(&self.onsite_u)
            .chain(&self.eps)
            .chain(self.v.iter().flatten());
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        Ok(())
    }

    fn diagonal(&self, up: &Occupation, down: &Occupation) -> f64 {
        let n = self.n_sites;
        let occ: Vec<f64> = (0..n)
            .map(|i| up.get(i) as u8 as f64 + down.get(i) as u8 as f64)
            .collect();
        let mut e = 0.0;
        for i in 0..n {
            if occ[i] == 0.0 {
                continue;
            }
            if up.get(i) && down.get(i) {
                e += self.onsite_u[i];
            }
            e -= self.eps[i] * occ[i];
            for j in 0..n {
                if j != i {
                    e += self.v[i][j] * occ[i] * occ[j];
                }
            }
        }
        e
    }
}

/// Applies c†_to c_from to one spin species; returns the new occupation and the
/// fermionic sign, or None if the move is blocked.
fn hop(occ: &Occupation, from: usize, to: usize) -> Option<(Occupation, f64)> {
    if !occ.get(from) || occ.get(to) {
        return None;
    }
    let sign = if occ.count_between(from, to).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    };
    let mut out = *occ;
    out.clear(from);
    out.set(to);
    Some((out, sign))
}

pub fn build_hamiltonian(params: &HubbardParams, basis: &SectorBasis) -> Result<CsrMatrix> {
    params.validate()?;
    if params.n_sites != basis.n_sites() {
        return Err(Error::InvalidInput(format!(
            "parameters have {} sites but the basis has {}",
            params.n_sites,
            basis.n_sites()
        )));
    }
    let n = params.n_sites;
    let rows: Vec<Vec<(usize, f64)>> = (0..basis.dimension())
        .into_par_iter()
        .map(|k| {
            let (up, down) = basis.state(k);
            let mut row = vec![(k, params.diagonal(&up, &down))];
            for b in 0..n.saturating_sub(1) {
                let t = params.t[b];
                if t == 0.0 {
                    continue;
                }
                for (from, to) in [(b, b + 1), (b + 1, b)] {
                    if let Some((u2, s)) = hop(&up, from, to) {
                        let idx = basis.index_of(&u2, &down).expect("hop stays in sector");
                        row.push((idx, -t * s));
                    }
                    if let Some((d2, s)) = hop(&down, from, to) {
                        let idx = basis.index_of(&up, &d2).expect("hop stays in sector");
                        row.push((idx, -t * s));
                    }
                }
            }
            row
        })
        .collect();
    Ok(CsrMatrix::from_rows(rows))
}

/// ⟨n_i⟩ = ⟨n_i↑ + n_i↓⟩ for a normalised state vector.
pub fn occupations(vector: &[f64], basis: &SectorBasis) -> Result<Vec<f64>> {
    if vector.len() != basis.dimension() {
        return Err(Error::InvalidInput(format!(
            "vector length {} does not match sector dimension {}",
            vector.len(),
            basis.dimension()
        )));
    }
    let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "state is not normalised (norm {norm})"
        )));
    }
    let mut n = vec![0.0; basis.n_sites()];
    for ((up, down), a) in basis.states().zip(vector) {
        let p = a * a;
        if p == 0.0 {
            continue;
        }
        for s in up.sites().chain(down.sites()) {
            n[s] += p;
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub n_up: usize,
    pub n_down: usize,
    /// Ascending.
    pub energies: Vec<f64>,
    /// ⟨n_i⟩ per eigenstate.
    pub occupations: Vec<Vec<f64>>,
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
}

impl SpectrumResult {
    pub fn sector_label(&self) -> String {
        format!("({},{})", self.n_up, self.n_down)
    }
}

pub fn diagonalize(h: &CsrMatrix, k: usize) -> Result<Eigenpairs> {
    lowest_eigenpairs(h, k, Method::Auto)
}

/// Lowest `k` (or fewer, if the sector is smaller) eigenpairs of one sector.
pub fn solve_sector(
    params: &HubbardParams,
    n_up: usize,
    n_down: usize,
    k: usize,
) -> Result<SpectrumResult> {
    let basis = enumerate_sector(params.n_sites, n_up, n_down)?;
    let h = build_hamiltonian(params, &basis)?;
    let pairs = diagonalize(&h, k.min(basis.dimension()))?;
    let occupations = pairs
        .vectors
        .iter()
        .map(|v| occupations(v, &basis))
        .collect::<Result<_>>()?;
    Ok(SpectrumResult {
        n_up,
        n_down,
        energies: pairs.values,
        occupations,
        vectors: pairs.vectors,
    })
}

/// Two-electron ground state over the (1,1) and (2,0) sectors. The S_z = 0
/// sector wins ties, since it contains every multiplet.
/// Symmetry class under relabelling ↑ ↔ ↓ in a sector with n_up = n_down.
/// For two electrons the symmetric class holds the singlets, the
/// antisymmetric one the S_z = 0 triplets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpinExchange {
    Symmetric,
    Antisymmetric,
}

fn check_balanced(basis: &SectorBasis) -> Result<()> {
    if basis.n_up() != basis.n_down() {
        return Err(Error::InvalidInput(format!(
            "spin exchange needs n_up = n_down, got ({},{})",
            basis.n_up(),
            basis.n_down()
        )));
    }
    Ok(())
}

fn exchanged_index(basis: &SectorBasis, k: usize) -> usize {
    let (up, down) = basis.state(k);
    basis
        .index_of(&down, &up)
        .expect("balanced sector is closed under spin relabelling")
}

/// ⟨ψ|P|ψ⟩ for the ↑ ↔ ↓ relabelling P; ±1 for states of definite class.
pub fn spin_exchange_expectation(vector: &[f64], basis: &SectorBasis) -> Result<f64> {
    check_balanced(basis)?;
    if vector.len() != basis.dimension() {
        return Err(Error::InvalidInput(
            "vector length does not match the basis".into(),
        ));
    }
    Ok((0..vector.len())
        .map(|k| vector[k] * vector[exchanged_index(basis, k)])
        .sum())
}

/// Lowest `k` states of one spin-exchange class. The other class is pushed
/// above the whole spectrum by a projector penalty.
pub fn solve_sector_exchange(
    params: &HubbardParams,
    n_per_spin: usize,
    class: SpinExchange,
    k: usize,
) -> Result<SpectrumResult> {
    let basis = enumerate_sector(params.n_sites, n_per_spin, n_per_spin)?;
    let h = build_hamiltonian(params, &basis)?;
    let penalty = 4.0 * h.norm_inf() + 1.0;
    // (1 ∓ P)/2 projects onto the class being removed.
    let sign = match class {
        SpinExchange::Symmetric => -1.0,
        SpinExchange::Antisymmetric => 1.0,
    };
    let rows = (0..basis.dimension())
        .map(|i| {
            let mut row: Vec<(usize, f64)> = h.row(i).collect();
            row.push((i, 0.5 * penalty));
            row.push((exchanged_index(&basis, i), sign * 0.5 * penalty));
            row
        })
        .collect();
    let shifted = CsrMatrix::from_rows(rows);
    let d = basis.dimension();
    let class_dim = match class {
        SpinExchange::Symmetric => (d + basis_fixed_points(&basis)) / 2,
        SpinExchange::Antisymmetric => (d - basis_fixed_points(&basis)) / 2,
    };
    if k > class_dim {
        return Err(Error::InvalidInput(format!(
            "requested {k} states but the {class:?} class has {class_dim}"
        )));
    }
    let pairs = diagonalize(&shifted, k)?;
    let occupations = pairs
        .vectors
        .iter()
        .map(|v| occupations(v, &basis))
        .collect::<Result<_>>()?;
    Ok(SpectrumResult {
        n_up: n_per_spin,
        n_down: n_per_spin,
        energies: pairs.values,
        occupations,
        vectors: pairs.vectors,
    })
}

fn basis_fixed_points(basis: &SectorBasis) -> usize {
    basis.states().filter(|(u, d)| u == d).count()
}

pub fn two_electron_ground(params: &HubbardParams) -> Result<(f64, SpectrumResult)> {
    let singlet = solve_sector(params, 1, 1, 1)?;
    let mut best = singlet.energies[0];
    if params.n_sites >= 2 {
        let triplet = solve_sector(params, 2, 0, 1)?;
        if triplet.energies[0] < best {
            best = triplet.energies[0];
            return Ok((best, triplet));
        }
    }
    Ok((best, singlet))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_single_electron() {
        let p = HubbardParams::homogeneous(2, 20.0).unwrap();
        let s = solve_sector(&p, 1, 0, 2).unwrap();
        assert!((s.energies[0] + 20.0).abs() < 1e-12);
        assert!((s.energies[1] - 20.0).abs() < 1e-12);
        for (a, b) in s.occupations[0].iter().zip([0.5, 0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ordered_pair_convention() {
        let mut p = HubbardParams::homogeneous(2, 0.0).unwrap();
        p.v = vec![vec![0.0, 3.0], vec![3.0, 0.0]];
        let s = solve_sector(&p, 2, 0, 1).unwrap();
        assert_eq!(s.energies[0], 6.0);
    }

    #[test]
    fn rejects_bad_params() {
        let mut p = HubbardParams::homogeneous(3, 1.0).unwrap();
        p.v[0][1] = 1.0;
        assert!(p.validate().is_err());
        assert!(
            HubbardParams::new(vec![1.0], vec![0.0; 3], vec![vec![0.0; 3]; 3], vec![0.0; 3])
                .is_err()
        );
        let basis = enumerate_sector(4, 1, 0).unwrap();
        let p3 = HubbardParams::homogeneous(3, 1.0).unwrap();
        assert!(build_hamiltonian(&p3, &basis).is_err());
    }

    #[test]
    fn occupations_of_basis_state_and_superposition() {
        let basis = enumerate_sector(3, 1, 0).unwrap();
        assert_eq!(
            occupations(&[1.0, 0.0, 0.0], &basis).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        let h = 0.5f64.sqrt();
        let n = occupations(&[h, h, 0.0], &basis).unwrap();
        assert!((n[0] - 0.5).abs() < 1e-15 && (n[1] - 0.5).abs() < 1e-15);
        assert!(occupations(&[1.0, 1.0, 0.0], &basis).is_err());
    }
}
