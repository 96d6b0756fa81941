use dotsim::hubbard::{
    build_hamiltonian, enumerate_sector, lowest_eigenpairs, occupations, solve_sector,
    solve_sector_exchange, spin_exchange_expectation, HubbardParams, Method, SpinExchange,
};
use proptest::prelude::*;

mod common;

use common::{random_params, sector_deviation};

fn sector_check(p: &HubbardParams, n_up: usize, n_down: usize) {
    let d = sector_deviation(p, n_up, n_down);
    assert!(d.closed, "sector ({n_up}, {n_down}) leaks");
    assert!(d.element < 1e-12, "element deviation {}", d.element);
    assert!(
        d.eigenvalue < 1e-10,
        "eigenvalue deviation {}",
        d.eigenvalue
    );
}

#[test]
fn all_small_sectors_match_fock_space() {
    for n in 1..=4 {
        let p = random_params(n, &[0.3, -0.8, 0.55, 0.1, -0.45]);
        for n_up in 0..=n {
            for n_down in 0..=n {
                sector_check(&p, n_up, n_down);
            }
        }
    }
}

#[test]
fn two_site_analytic_spectrum() {
    let (t, u, v) = (20.0, 300.0, 45.0);
    let mut p = HubbardParams::homogeneous(2, t).unwrap();
    p.onsite_u = vec![u, u];
    p.v = vec![vec![0.0, v], vec![v, 0.0]];
    let s = solve_sector(&p, 1, 1, 4).unwrap();
    let mid = (u + 2.0 * v) / 2.0;
    let root = (((u - 2.0 * v) / 2.0).powi(2) + 4.0 * t * t).sqrt();
    let mut expect = vec![mid - root, 2.0 * v, u, mid + root];
    expect.sort_by(f64::total_cmp);
    for (a, b) in s.energies.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    // V = 0 reduces to the textbook ground energy U/2 − √((U/2)² + 4t²)
    p.v = vec![vec![0.0; 2]; 2];
    let g = solve_sector(&p, 1, 1, 1).unwrap().energies[0];
    assert!((g - (u / 2.0 - ((u / 2.0).powi(2) + 4.0 * t * t).sqrt())).abs() < 1e-12);
}

#[test]
fn dense_and_lanczos_agree_on_half_filled_six_sites() {
    let p = random_params(6, &[0.2, 0.9, -0.4, 0.7]);
    let basis = enumerate_sector(6, 3, 3).unwrap();
    assert_eq!(basis.dimension(), 400);
    let h = build_hamiltonian(&p, &basis).unwrap();
    let dense = lowest_eigenpairs(&h, 3, Method::Dense).unwrap();
    let krylov = lowest_eigenpairs(&h, 3, Method::Lanczos).unwrap();
    for i in 0..3 {
        assert!((dense.values[i] - krylov.values[i]).abs() < 1e-6);
    }
}

#[test]
fn lanczos_path_above_dense_limit() {
    let p = random_params(8, &[0.6, -0.1, 0.3]);
    let basis = enumerate_sector(8, 4, 4).unwrap();
    assert!(basis.dimension() >= dotsim::hubbard::DENSE_LIMIT);
    let h = build_hamiltonian(&p, &basis).unwrap();
    let pairs = lowest_eigenpairs(&h, 2, Method::Auto).unwrap();
    let norm: f64 = (0..h.dimension())
        .map(|i| h.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    for (e, v) in pairs.values.iter().zip(&pairs.vectors) {
        let hv = h.matvec(v);
        let r = hv
            .iter()
            .zip(v)
            .map(|(a, b)| (a - e * b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(r <= 1e-8 * norm);
    }
    assert!(pairs.values[0] <= pairs.values[1]);
}

fn mirrored(p: &HubbardParams) -> HubbardParams {
    let n = p.n_sites;
    let r = |i: usize| n - 1 - i;
    HubbardParams::new(
        p.t.iter().rev().copied().collect(),
        (0..n).map(|i| p.onsite_u[r(i)]).collect(),
        (0..n)
            .map(|i| (0..n).map(|j| p.v[r(i)][r(j)]).collect())
            .collect(),
        (0..n).map(|i| p.eps[r(i)]).collect(),
    )
    .unwrap()
}

#[test]
fn relabelling_sites_keeps_spectrum() {
    let p = random_params(5, &[0.15, -0.6, 0.8]);
    let q = mirrored(&p);
    for (nu, nd) in [(1, 0), (1, 1), (2, 1), (2, 2)] {
        let a = solve_sector(&p, nu, nd, 6).unwrap();
        let b = solve_sector(&q, nu, nd, 6).unwrap();
        for (x, y) in a.energies.iter().zip(&b.energies) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn mirror_symmetric_chain_has_symmetric_occupations() {
    let n = 5;
    let mut p = HubbardParams::homogeneous(n, 20.0).unwrap();
    p.onsite_u = vec![400.0; n];
    p.eps = vec![10.0, 30.0, 50.0, 30.0, 10.0];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p.v[i][j] = 80.0 / i.abs_diff(j) as f64;
            }
        }
    }
    let s = solve_sector(&p, 1, 1, 4).unwrap();
    for occ in &s.occupations {
        for i in 0..n {
            assert!((occ[i] - occ[n - 1 - i]).abs() < 1e-8);
        }
        assert!((occ.iter().sum::<f64>() - 2.0).abs() < 1e-8);
    }
}

#[test]
fn occupation_sums_match_particle_number() {
    let p = random_params(6, &[0.4, 0.1, -0.9]);
    for (nu, nd) in [(1, 0), (2, 1), (3, 3)] {
        let s = solve_sector(&p, nu, nd, 3).unwrap();
        for occ in &s.occupations {
            assert!((occ.iter().sum::<f64>() - (nu + nd) as f64).abs() < 1e-8);
            assert!(occ.iter().all(|&x| (-1e-12..=2.0 + 1e-12).contains(&x)));
        }
        assert!(s.energies.windows(2).all(|w| w[0] <= w[1]));
    }
    let basis = enumerate_sector(6, 2, 1).unwrap();
    assert!(occupations(&vec![0.1; basis.dimension()], &basis).is_err());
}

#[test]
fn spin_exchange_classes_split_the_balanced_sector() {
    let p = random_params(5, &[0.3, -0.8, 0.5, 0.9, -0.1]);
    for n in [1, 2] {
        let basis = enumerate_sector(5, n, n).unwrap();
        let full = solve_sector(&p, n, n, basis.dimension()).unwrap();
        let sym = solve_sector_exchange(&p, n, SpinExchange::Symmetric, 6).unwrap();
        let anti = solve_sector_exchange(&p, n, SpinExchange::Antisymmetric, 6).unwrap();
        let mut merged: Vec<f64> = sym.energies.iter().chain(&anti.energies).copied().collect();
        merged.sort_by(f64::total_cmp);
        // every class eigenvalue is a sector eigenvalue
        for e in &merged {
            assert!(full.energies.iter().any(|x| (x - e).abs() < 1e-8), "{e}");
        }
        for v in &sym.vectors {
            assert!((spin_exchange_expectation(v, &basis).unwrap() - 1.0).abs() < 1e-8);
        }
        for v in &anti.vectors {
            assert!((spin_exchange_expectation(v, &basis).unwrap() + 1.0).abs() < 1e-8);
        }
    }
    // two electrons: the ground state is a singlet
    let full = solve_sector(&p, 1, 1, 1).unwrap();
    let sym = solve_sector_exchange(&p, 1, SpinExchange::Symmetric, 1).unwrap();
    assert!((full.energies[0] - sym.energies[0]).abs() < 1e-9);
    // the (2,0) ground state is an S_z = 0 triplet partner
    let triplet = solve_sector(&p, 2, 0, 1).unwrap();
    let anti = solve_sector_exchange(&p, 1, SpinExchange::Antisymmetric, 1).unwrap();
    assert!((triplet.energies[0] - anti.energies[0]).abs() < 1e-9);
}

#[test]
fn spin_exchange_needs_balanced_sector() {
    let basis = enumerate_sector(3, 2, 1).unwrap();
    assert!(spin_exchange_expectation(&vec![0.0; basis.dimension()], &basis).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_instances_match_fock_space(
        n in 2usize..=4,
        seed in proptest::collection::vec(-1.0..1.0f64, 3..8),
        nu in 0usize..=4,
        nd in 0usize..=4,
    ) {
        prop_assume!(nu <= n && nd <= n);
        sector_check(&random_params(n, &seed), nu, nd);
    }

    #[test]
    fn hamiltonian_is_exactly_symmetric(
        n in 2usize..=7,
        seed in proptest::collection::vec(-1.0..1.0f64, 3..8),
    ) {
        let p = random_params(n, &seed);
        for (nu, nd) in [(1, 1), (2, 1), (2, 0)] {
            let b = enumerate_sector(n, nu, nd).unwrap();
            prop_assert_eq!(build_hamiltonian(&p, &b).unwrap().asymmetry(), 0.0);
        }
    }
}
