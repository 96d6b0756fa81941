//! Gauss–Hermite rules for ∫ e^{−x²} f(x) dx.

use crate::error::{Error, Result};

/// Nodes (ascending) and weights of the n-point Gauss–Hermite rule.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > 200 {
        return Err(Error::InvalidInput(format!(
            "Gauss-Hermite order must be in 1..=200, got {n}"
        )));
    }
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        // initial guesses for the largest roots, then extrapolation from the previous ones
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok((x, w))
}

/// Sample points and weights of an isotropic 2D Gaussian probability density
/// with per-axis standard deviation `sigma` centred at `center`. The weights sum
/// to one and integrate polynomials of degree < 2n in each axis exactly.
pub fn gaussian_2d_rule(
    center: [f64; 2],
    sigma: f64,
    order: usize,
) -> Result<Vec<([f64; 2], f64)>> {
    let (x, w) = gauss_hermite(order)?;
    let scale = std::f64::consts::SQRT_2 * sigma;
    let norm = 1.0 / std::f64::consts::PI;
    let mut pts = Vec::with_capacity(order * order);
    for (xa, wa) in x.iter().zip(&w) {
        for (xb, wb) in x.iter().zip(&w) {
            pts.push((
                [center[0] + scale * xa, center[1] + scale * xb],
                wa * wb * norm,
            ));
        }
    }
    Ok(pts)
}
