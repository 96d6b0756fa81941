//! Matrix-free application of the tile interaction matrix for tiles on a
//! regular grid. The Coulomb kernel depends only on the cell offset, so the
//! product is a masked block-Toeplitz convolution evaluated with FFTs on a
//! zero-padded grid.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::tiles::Lattice;
use crate::error::{Error, Result};

pub(crate) struct LatticeOperator {
    nx: usize,
    ny: usize,
    px: usize,
    py: usize,
    // kernel spectrum in transposed (x-major) layout, already divided by px·py
    kernel_hat: Vec<Complex64>,
    cells: Vec<(usize, usize)>,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

fn fft_friendly(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5] {
            while m.is_multiple_of(p) {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

fn transpose(src: &[Complex64], rows: usize, cols: usize, dst: &mut [Complex64]) {
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

impl LatticeOperator {
    /// `entry(p, q)` is the matrix element between tiles offset by (p, q) cells.
    pub fn new(lattice: &Lattice, entry: impl Fn(isize, isize) -> f64) -> Self {
        let (nx, ny) = (lattice.nx, lattice.ny);
        let px = fft_friendly(2 * nx - 1);
        let py = fft_friendly(2 * ny - 1);
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(px);
        let inv_x = planner.plan_fft_inverse(px);
        let fwd_y = planner.plan_fft_forward(py);
        let inv_y = planner.plan_fft_inverse(py);

        let mut kernel = vec![Complex64::new(0.0, 0.0); px * py];
        let (nxi, nyi) = (nx as isize, ny as isize);
        for q in (1 - nyi)..nyi {
            let row = q.rem_euclid(py as isize) as usize;
            for p in (1 - nxi)..nxi {
                let col = p.rem_euclid(px as isize) as usize;
                kernel[row * px + col] = Complex64::new(entry(p, q), 0.0);
            }
        }
        let mut op = Self {
            nx,
            ny,
            px,
            py,
            kernel_hat: Vec::new(),
            cells: lattice.cells.clone(),
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
        };
        op.kernel_hat = op.forward(kernel, py);
        let norm = 1.0 / (px * py) as f64;
        op.kernel_hat.iter_mut().for_each(|z| *z *= norm);
        op
    }

    // 2D forward transform of a row-major (py × px) buffer whose rows at and
    // beyond `filled_rows` are zero; the result is in x-major layout.
    fn forward(&self, mut data: Vec<Complex64>, filled_rows: usize) -> Vec<Complex64> {
        let (px, py) = (self.px, self.py);
        data[..filled_rows * px]
            .par_chunks_mut(px)
            .for_each(|row| self.fwd_x.process(row));
        let mut t = vec![Complex64::new(0.0, 0.0); px * py];
        transpose(&data, py, px, &mut t);
        t.par_chunks_mut(py).for_each(|col| self.fwd_y.process(col));
        t
    }

    /// y = A x for a vector indexed like the tiles.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (px, py) = (self.px, self.py);
        let mut grid = vec![Complex64::new(0.0, 0.0); px * py];
        for (&(ix, iy), &v) in self.cells.iter().zip(x) {
            grid[iy * px + ix] = Complex64::new(v, 0.0);
        }
        let mut t = self.forward(grid, self.ny);
        t.par_chunks_mut(py)
            .zip(self.kernel_hat.par_chunks(py))
            .for_each(|(col, k)| {
                col.iter_mut().zip(k).for_each(|(a, b)| *a *= b);
                self.inv_y.process(col);
            });
        let mut grid = vec![Complex64::new(0.0, 0.0); px * py];
        transpose(&t, px, py, &mut grid);
        grid[..self.ny * px]
            .par_chunks_mut(px)
            .for_each(|row| self.inv_x.process(row));
        debug_assert!(self
            .cells
            .iter()
            .all(|&(ix, iy)| ix < self.nx && iy < self.ny));
        self.cells
            .iter()
            .map(|&(ix, iy)| grid[iy * px + ix].re)
            .collect()
    }

    /// Conjugate gradients on the (symmetric positive definite) tile matrix.
    pub fn solve(&self, b: &[f64], tolerance: f64, max_iterations: usize) -> Result<Vec<f64>> {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let b_norm = dot(b, b).sqrt();
        let mut x = vec![0.0; b.len()];
        if b_norm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rs = dot(&r, &r);
        for _ in 0..max_iterations {
            if rs.sqrt() <= tolerance * b_norm {
                return Ok(x);
            }
            let ap = self.apply(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Singular(
                    "tile matrix is not positive definite; enable the tile self-interaction".into(),
                ));
            }
            let alpha = rs / pap;
            x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
            r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
            let rs_new = dot(&r, &r);
            let beta = rs_new / rs;
            p.iter_mut()
                .zip(&r)
                .for_each(|(pi, ri)| *pi = ri + beta * *pi);
            rs = rs_new;
        }
        if rs.sqrt() <= tolerance * b_norm {
            return Ok(x);
        }
        Err(Error::NoConvergence {
            solver: "tile conjugate gradient",
            iterations: max_iterations,
            residual: rs.sqrt() / b_norm,
        })
    }
}
