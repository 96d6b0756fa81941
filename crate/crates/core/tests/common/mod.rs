#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use dotsim::hubbard::{
    build_hamiltonian, dense_eigenpairs, enumerate_sector, lowest_eigenpairs, HubbardParams, Method,
};
use faer::Mat;

/// Full 4^N Fock-space Hamiltonian, built from explicit creation and
/// annihilation operators. Mode m = i for spin up, N + i for spin down;
/// Jordan-Wigner signs count occupied modes with smaller index.
pub struct Fock {
    pub n: usize,
    pub h: Vec<Vec<f64>>,
}

fn annihilate(state: u32, mode: usize) -> Option<(u32, f64)> {
    if state >> mode & 1 == 0 {
        return None;
    }
    let below = (state & ((1u32 << mode) - 1)).count_ones();
    Some((
        state & !(1 << mode),
        if below.is_multiple_of(2) { 1.0 } else { -1.0 },
    ))
}

fn create(state: u32, mode: usize) -> Option<(u32, f64)> {
    if state >> mode & 1 == 1 {
        return None;
    }
    let below = (state & ((1u32 << mode) - 1)).count_ones();
    Some((
        state | (1 << mode),
        if below.is_multiple_of(2) { 1.0 } else { -1.0 },
    ))
}

fn number(state: u32, mode: usize) -> f64 {
    (state >> mode & 1) as f64
}

impl Fock {
    pub fn new(p: &HubbardParams) -> Self {
        let n = p.n_sites;
        let dim = 1usize << (2 * n);
        let mut h = vec![vec![0.0; dim]; dim];
        for s in 0..dim as u32 {
            let occ = |i: usize| number(s, i) + number(s, n + i);
            let mut diag = 0.0;
            for i in 0..n {
                diag += p.onsite_u[i] * number(s, i) * number(s, n + i);
                diag -= p.eps[i] * occ(i);
                for j in 0..n {
                    if i != j {
                        diag += p.v[i][j] * occ(i) * occ(j);
                    }
                }
            }
            h[s as usize][s as usize] += diag;
            for b in 0..n - 1 {
                for spin in 0..2 {
                    let (a, c) = (spin * n + b, spin * n + b + 1);
                    for (to, from) in [(a, c), (c, a)] {
                        if let Some((s1, f1)) = annihilate(s, from) {
                            if let Some((s2, f2)) = create(s1, to) {
                                h[s2 as usize][s as usize] += -p.t[b] * f1 * f2;
                            }
                        }
                    }
                }
            }
        }
        Self { n, h }
    }

    /// Fock index of the sector state Π c†_{i↑} Π c†_{j↓} |0⟩ (ascending sites).
    pub fn index(&self, up: &[usize], down: &[usize]) -> usize {
        up.iter().map(|&i| 1 << i).sum::<usize>()
            + down.iter().map(|&i| 1 << (self.n + i)).sum::<usize>()
    }
}

/// Largest element and eigenvalue deviations of one sector from the Fock-space
/// oracle, and whether the oracle keeps the sector closed.
pub struct SectorDeviation {
    pub element: f64,
    pub eigenvalue: f64,
    pub closed: bool,
}

pub fn sector_deviation(p: &HubbardParams, n_up: usize, n_down: usize) -> SectorDeviation {
    let fock = Fock::new(p);
    let basis = enumerate_sector(p.n_sites, n_up, n_down).unwrap();
    let h = build_hamiltonian(p, &basis).unwrap();
    let idx: Vec<usize> = basis
        .states()
        .map(|(u, d)| {
            fock.index(
                &u.sites().collect::<Vec<_>>(),
                &d.sites().collect::<Vec<_>>(),
            )
        })
        .collect();
    // matrix elements, including fermionic signs
    let mut element = h.asymmetry();
    for (a, &fa) in idx.iter().enumerate() {
        for (b, &fb) in idx.iter().enumerate() {
            element = element.max((h.get(a, b) - fock.h[fa][fb]).abs());
        }
    }
    let inside: std::collections::HashSet<usize> = idx.iter().copied().collect();
    let closed = idx.iter().all(|&fa| {
        fock.h
            .iter()
            .enumerate()
            .all(|(g, row)| row[fa] == 0.0 || inside.contains(&g))
    });
    let dim = idx.len();
    let block = Mat::<f64>::from_fn(dim, dim, |a, b| fock.h[idx[a]][idx[b]]);
    let oracle = dense_eigenpairs(&block, dim).unwrap();
    let ours = lowest_eigenpairs(&h, dim, Method::Dense).unwrap();
    let eigenvalue = ours
        .values
        .iter()
        .zip(&oracle.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    SectorDeviation {
        element,
        eigenvalue,
        closed,
    }
}

pub fn random_params(n: usize, seed: &[f64]) -> HubbardParams {
    let mut k = 0;
    let mut next = || {
        k += 1;
        seed[k % seed.len()] * (1.0 + 0.37 * k as f64).sin()
    };
    let t = (0..n - 1).map(|_| 20.0 + 10.0 * next()).collect();
    let u = (0..n).map(|_| 500.0 + 100.0 * next()).collect();
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..i {
            let x = 30.0 + 20.0 * next();
            v[i][j] = x;
            v[j][i] = x;
        }
    }
    let eps = (0..n).map(|_| 50.0 * next()).collect();
    HubbardParams::new(t, u, v, eps).unwrap()
}
