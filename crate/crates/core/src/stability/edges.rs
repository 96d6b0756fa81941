use serde::{Deserialize, Serialize};

use super::StabilityDiagram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeOptions {
    /// Gaussian pre-smoothing width in grid cells; 0 disables it.
    pub smoothing_cells: f64,
    /// Ridge points weaker than this fraction of the strongest gradient are dropped.
    pub threshold: f64,
}

impl Default for EdgeOptions {
    fn default() -> Self {
        Self {
            smoothing_cells: 3.0,
            threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgePoint {
    /// Position in µeV.
    pub x: f64,
    pub y: f64,
    /// Gradient magnitude at the ridge, signal units per µeV.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSet {
    pub points: Vec<EdgePoint>,
}

impl EdgeSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

/// Ridge points must exceed this multiple of the gradient noise level.
const NOISE_FACTOR: f64 = 4.0;

/// Robust white-noise estimate from second differences along rows, which
/// vanish for a signal that is smooth on the grid scale.
fn pixel_noise(field: &[f64], nx: usize, ny: usize) -> f64 {
    let mut d2: Vec<f64> = (0..ny)
        .flat_map(|j| (1..nx - 1).map(move |i| (j, i)))
        .map(|(j, i)| {
            (field[j * nx + i - 1] - 2.0 * field[j * nx + i] + field[j * nx + i + 1]).abs()
        })
        .collect();
    if d2.is_empty() {
        return 0.0;
    }
    d2.sort_by(f64::total_cmp);
    1.4826 * d2[d2.len() / 2] / 6f64.sqrt()
}

/// Standard deviation, per unit pixel noise and unit spacing, of the smoothed
/// central-difference gradient along one axis.
fn gradient_noise_gain(sigma: f64) -> (f64, f64) {
    let k = if sigma > 0.0 {
        gaussian_kernel(sigma)
    } else {
        vec![1.0]
    };
    let n = k.len() as isize;
    let at = |m: isize| if m >= 0 && m < n { k[m as usize] } else { 0.0 };
    let diff: f64 = (-1..=n)
        .map(|m| (0.5 * (at(m + 1) - at(m - 1))).powi(2))
        .sum();
    let flat: f64 = k.iter().map(|x| x * x).sum();
    let g = (diff * flat).sqrt();
    (g, g)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let half = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-half..=half)
        .map(|d| (-0.5 * (d as f64 / sigma).powi(2)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|x| *x /= s);
    k
}

fn reflect(k: isize, n: usize) -> usize {
    let n = n as isize;
    let mut k = k;
    while k < 0 || k >= n {
        k = if k < 0 { -k - 1 } else { 2 * n - k - 1 };
    }
    k as usize
}

/// Separable Gaussian blur of a row-major nx×ny field.
fn smooth(field: &[f64], nx: usize, ny: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return field.to_vec();
    }
    let kernel = gaussian_kernel(sigma);
    let half = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; field.len()];
    for j in 0..ny {
        for i in 0..nx {
            tmp[j * nx + i] = kernel
                .iter()
                .enumerate()
                .map(|(m, w)| w * field[j * nx + reflect(i as isize + m as isize - half, nx)])
                .sum();
        }
    }
    let mut out = vec![0.0; field.len()];
    for j in 0..ny {
        for i in 0..nx {
            out[j * nx + i] = kernel
                .iter()
                .enumerate()
                .map(|(m, w)| w * tmp[reflect(j as isize + m as isize - half, ny) * nx + i])
                .sum();
        }
    }
    out
}

fn derivative(axis: &[f64], values: impl Fn(usize) -> f64, k: usize) -> f64 {
    let n = axis.len();
    let (a, b) = if k == 0 {
        (0, 1)
    } else if k == n - 1 {
        (n - 2, n - 1)
    } else {
        (k - 1, k + 1)
    };
    (values(b) - values(a)) / (axis[b] - axis[a])
}

/// Sub-cell offset of the vertex of the parabola through three samples.
fn parabola_offset(a: f64, b: f64, c: f64) -> f64 {
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        0.0
    } else {
        (0.5 * (a - c) / den).clamp(-0.5, 0.5)
    }
}

fn interpolate(axis: &[f64], k: usize, offset: f64) -> f64 {
    if offset >= 0.0 {
        axis[k] + offset * (axis[k + 1] - axis[k])
    } else {
        axis[k] + offset * (axis[k] - axis[k - 1])
    }
}

/// Ridge points of the gradient magnitude. Each ridge is traced along rows
/// where the gradient points mostly along i, and along columns otherwise.
/// When noise hides every ridge, the smoothing is doubled a few times before
/// the diagram is reported as flat.
pub fn detect_edges(diagram: &StabilityDiagram, opts: &EdgeOptions) -> Result<EdgeSet> {
    if !(opts.smoothing_cells >= 0.0) || !(opts.threshold > 0.0 && opts.threshold < 1.0) {
        return Err(Error::InvalidInput(
            "smoothing must be non-negative and threshold in (0, 1)".into(),
        ));
    }
    let d = diagram.to_energy()?;
    let mut sigma = opts.smoothing_cells;
    for _ in 0..SMOOTHING_RETRIES {
        let edges = ridges(&d, sigma, opts.threshold);
        if edges.len() >= MIN_RIDGE_POINTS {
            return Ok(edges);
        }
        sigma = (2.0 * sigma).max(1.0);
    }
    Ok(EdgeSet { points: Vec::new() })
}

const SMOOTHING_RETRIES: usize = 4;
const MIN_RIDGE_POINTS: usize = 8;

fn ridges(d: &StabilityDiagram, smoothing: f64, threshold: f64) -> EdgeSet {
    let (nx, ny) = d.shape();
    let (xs, ys) = (&d.grid.axis_i, &d.grid.axis_j);
    let f = smooth(&d.signal, nx, ny, smoothing);
    let mut gx = vec![0.0; nx * ny];
    let mut gy = vec![0.0; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            gx[j * nx + i] = derivative(xs, |k| f[j * nx + k], i);
            gy[j * nx + i] = derivative(ys, |k| f[k * nx + i], j);
        }
    }
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let peak = mag.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return EdgeSet { points: Vec::new() };
    }
    let hx = (xs[nx - 1] - xs[0]) / (nx - 1) as f64;
    let hy = (ys[ny - 1] - ys[0]) / (ny - 1) as f64;
    let sigma = pixel_noise(&d.signal, nx, ny);
    let (kx, ky) = gradient_noise_gain(smoothing);
    let noise_floor = NOISE_FACTOR * sigma * (kx / hx).hypot(ky / hy);
    let floor = (threshold * peak).max(noise_floor);
    let mut points = Vec::new();
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let c = j * nx + i;
            let m = mag[c];
            if m < floor {
                continue;
            }
            let along_i = gx[c].abs() >= gy[c].abs();
            let (prev, next) = if along_i {
                (mag[c - 1], mag[c + 1])
            } else {
                (mag[c - nx], mag[c + nx])
            };
            if !(m >= prev && m > next) {
                continue;
            }
            let off = parabola_offset(prev, m, next);
            let (x, y) = if along_i {
                (interpolate(xs, i, off), ys[j])
            } else {
                (xs[i], interpolate(ys, j, off))
            };
            points.push(EdgePoint { x, y, weight: m });
        }
    }
    EdgeSet { points }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_normalised() {
        let k = gaussian_kernel(1.3);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert_eq!(k.len() % 2, 1);
    }

    #[test]
    fn parabola_vertex() {
        // samples of −(x − 0.3)² at −1, 0, 1
        let f = |x: f64| -(x - 0.3) * (x - 0.3);
        assert!((parabola_offset(f(-1.0), f(0.0), f(1.0)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn reflection() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(-7, 5), 3);
    }
}
