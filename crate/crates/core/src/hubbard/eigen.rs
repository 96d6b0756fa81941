//! Lowest eigenpairs of real symmetric matrices: dense decomposition for small
//! problems, thick-restart Lanczos with full reorthogonalisation otherwise.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Dimensions below this use the dense solver.
pub const DENSE_LIMIT: usize = 4000;

/// Required residual ‖Hv − Ev‖ relative to ‖H‖.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors, sign-fixed so that the first significant
    /// amplitude is positive.
    pub vectors: Vec<Vec<f64>>,
}

fn canonical_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * max) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn lowest_eigenpairs(h: &CsrMatrix, k: usize, method: Method) -> Result<Eigenpairs> {
    let n = h.dimension();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "requested {k} eigenpairs of a {n}-dimensional matrix"
        )));
    }
    let dense = match method {
        Method::Dense => true,
        Method::Lanczos => false,
        Method::Auto => n < DENSE_LIMIT,
    };
    // Krylov methods need room beyond the wanted pairs
    if dense || n <= k + 8 {
        dense_eigenpairs(&h.to_dense(), k)
    } else {
        lanczos(h, k, 500)
    }
}

pub fn dense_eigenpairs(m: &Mat<f64>, k: usize) -> Result<Eigenpairs> {
    let n = m.nrows();
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NoConvergence {
            solver: "dense symmetric eigensolver",
            iterations: 0,
            residual: f64::NAN,
        })?;
    let s = eig.S().column_vector();
    let u = eig.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        values.push(s[c]);
        let mut v: Vec<f64> = (0..n).map(|r| u[(r, c)]).collect();
        canonical_sign(&mut v);
        vectors.push(v);
    }
    Ok(Eigenpairs { values, vectors })
}

/// Thick-restart Lanczos. The basis is kept fully orthonormal and the
/// projected matrix is formed explicitly, so restarting simply keeps the best
/// Ritz vectors together with their images under H.
pub fn lanczos(h: &CsrMatrix, k: usize, max_restarts: usize) -> Result<Eigenpairs> {
    let n = h.dimension();
    let m = (2 * k + 30).min(n);
    let keep = (k + 10).min(m - 2);
    let h_norm = h.norm_inf().max(f64::MIN_POSITIVE);
    // ‖H‖₂ ≥ ‖H‖_∞/√n, so this guarantees the 2-norm criterion
    let tol = RESIDUAL_TOL * h_norm / (n as f64).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1a2c);
    let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let s = norm(&start);
    start.iter_mut().for_each(|x| *x /= s);

    let mut basis: Vec<Vec<f64>> = vec![start];
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut best_residual = f64::INFINITY;

    for restart in 0..=max_restarts {
        // expand to m vectors
        while basis.len() < m {
            let last = basis.len() - 1;
            if images.len() <= last {
                images.push(h.matvec(&basis[last]));
            }
            let mut w = images[last].clone();
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let mut beta = norm(&w);
            if beta < 1e-10 * h_norm {
                // invariant subspace: continue with a fresh random direction
                w = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
                for _ in 0..2 {
                    for v in &basis {
                        let c = dot(v, &w);
                        w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                    }
                }
                beta = norm(&w);
            }
            w.iter_mut().for_each(|x| *x /= beta);
            basis.push(w);
        }
        let last = basis.len() - 1;
        if images.len() <= last {
            images.push(h.matvec(&basis[last]));
        }

        // Rayleigh-Ritz on the full projected matrix
        let dim = basis.len();
        let t = Mat::<f64>::from_fn(dim, dim, |i, j| {
            0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]))
        });
        let ritz = dense_eigenpairs(&t, keep.max(k))?;
        let combine = |vs: &[Vec<f64>], y: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for (v, c) in vs.iter().zip(y) {
                out.iter_mut().zip(v).for_each(|(o, vi)| *o += c * vi);
            }
            out
        };
        let mut new_basis = Vec::with_capacity(ritz.values.len());
        let mut new_images = Vec::with_capacity(ritz.values.len());
        let mut residuals = Vec::with_capacity(ritz.values.len());
        for (theta, y) in ritz.values.iter().zip(&ritz.vectors) {
            let x = combine(&basis, y);
            let hx = combine(&images, y);
            let r: Vec<f64> = hx.iter().zip(&x).map(|(a, b)| a - theta * b).collect();
            residuals.push(r);
            new_basis.push(x);
            new_images.push(hx);
        }
        let worst = residuals
            .iter()
            .take(k)
            .map(|r| norm(r))
            .fold(0.0, f64::max);
        best_residual = best_residual.min(worst);
        if worst <= tol {
            let mut vectors: Vec<Vec<f64>> = new_basis.into_iter().take(k).collect();
            for v in &mut vectors {
                let s = norm(v);
                v.iter_mut().for_each(|x| *x /= s);
                canonical_sign(v);
            }
            return Ok(Eigenpairs {
                values: ritz.values[..k].to_vec(),
                vectors,
            });
        }
        // restart: keep Ritz vectors, continue from the first unconverged residual
        let pick = residuals
            .iter()
            .take(k)
            .position(|r| norm(r) > tol)
            .unwrap_or(0);
        let mut next = residuals[pick].clone();
        for _ in 0..2 {
            for v in &new_basis {
                let c = dot(v, &next);
                next.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let nn = norm(&next);
        if !(nn > 0.0) {
            return Err(Error::NoConvergence {
                solver: "Lanczos",
                iterations: restart,
                residual: best_residual / h_norm,
            });
        }
        next.iter_mut().for_each(|x| *x /= nn);
        basis = new_basis;
        images = new_images;
        basis.push(next);
    }
    Err(Error::NoConvergence {
        solver: "Lanczos",
        iterations: max_restarts,
        residual: best_residual / h_norm,
    })
}
