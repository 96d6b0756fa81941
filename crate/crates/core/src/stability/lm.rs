//! Levenberg-Marquardt with central-difference Jacobians, for fits with a
//! handful of parameters.

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct LmOptions {
    pub max_iterations: usize,
    /// Relative step size below which the iteration stops.
    pub tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-12,
        }
    }
}

const POLISH_STEPS: usize = 8;

pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    /// Σ r².
    pub cost: f64,
    pub jacobian: Mat<f64>,
    pub n_residuals: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl LmOutcome {
    /// σ²(JᵀJ)⁻¹ with σ² estimated from the residual sum of squares.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                solver: "levenberg-marquardt",
                iterations: self.iterations,
                residual: self.cost.sqrt(),
            })
        }
    }

    pub fn covariance(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.params.len();
        let dof = self.n_residuals.saturating_sub(n).max(1) as f64;
        let s2 = self.cost / dof;
        let jtj = self.jacobian.transpose() * &self.jacobian;
        let inv = inverse(&jtj)?;
        Ok((0..n)
            .map(|a| (0..n).map(|b| s2 * inv[(a, b)]).collect())
            .collect())
    }
}

fn inverse(m: &Mat<f64>) -> Result<Mat<f64>> {
    let n = m.nrows();
    let lu = m.partial_piv_lu();
    let inv = lu.solve(&Mat::<f64>::identity(n, n));
    if (0..n).any(|a| (0..n).any(|b| !inv[(a, b)].is_finite())) {
        return Err(Error::Fit(
            "normal matrix is singular; parameters are not identifiable".into(),
        ));
    }
    Ok(inv)
}

fn jacobian<F>(f: &F, p: &[f64], scales: &[f64], m: usize) -> Mat<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut jac = Mat::zeros(m, p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-6 * p[k].abs().max(scales[k]);
        q[k] = p[k] + h;
        let up = f(&q);
        q[k] = p[k] - h;
        let down = f(&q);
        q[k] = p[k];
        for r in 0..m {
            jac[(r, k)] = (up[r] - down[r]) / (2.0 * h);
        }
    }
    jac
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Minimises Σ f(p)² from `p0` with central-difference Jacobians. `scales`
/// are typical parameter magnitudes, used for step sizes near zero. Running
/// out of iterations is reported through `converged`, with the best point found.
pub(crate) fn minimize<F>(f: F, p0: &[f64], scales: &[f64], opts: LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = f(p0).len();
    minimize_with(&f, |p: &[f64]| jacobian(&f, p, scales, m), p0, scales, opts)
}

/// As `minimize`, with the Jacobian supplied by `jac`.
pub(crate) fn minimize_with<F, J>(
    f: F,
    jac_fn: J,
    p0: &[f64],
    scales: &[f64],
    opts: LmOptions,
) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> Mat<f64>,
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = f(&p);
    let m = r.len();
    if m < n {
        return Err(Error::Fit(format!(
            "{m} residuals cannot determine {n} parameters"
        )));
    }
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(Error::Fit("initial residuals are not finite".into()));
    }
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let mut jac = jac_fn(&p);
    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let mut grad = Mat::<f64>::zeros(n, 1);
        for k in 0..n {
            grad[(k, 0)] = -(0..m).map(|i| jac[(i, k)] * r[i]).sum::<f64>();
        }
        loop {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let step = a.partial_piv_lu().solve(&grad);
            let trial: Vec<f64> = (0..n).map(|k| p[k] + step[(k, 0)]).collect();
            let rt = f(&trial);
            let ct = sum_sq(&rt);
            if ct.is_finite() && ct < cost {
                let small =
                    (0..n).all(|k| step[(k, 0)].abs() <= opts.tolerance * (p[k].abs() + scales[k]));
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                jac = jac_fn(&p);
                if small {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e12 {
                // no downhill step left at machine precision
                converged = true;
                break 'outer;
            }
        }
    }
    if converged {
        // Near the minimum the cost no longer resolves parameter changes, so
        // finish with plain Gauss-Newton steps while they keep shrinking.
        let mut last = f64::INFINITY;
        for _ in 0..POLISH_STEPS {
            let jtj = jac.transpose() * &jac;
            let mut grad = Mat::<f64>::zeros(n, 1);
            for k in 0..n {
                grad[(k, 0)] = -(0..m).map(|i| jac[(i, k)] * r[i]).sum::<f64>();
            }
            let step = jtj.partial_piv_lu().solve(&grad);
            let size = (0..n)
                .map(|k| step[(k, 0)].abs() / (p[k].abs() + scales[k]))
                .fold(0.0, f64::max);
            if !size.is_finite() || size >= 0.5 * last || size > 1e-6 {
                break;
            }
            let trial: Vec<f64> = (0..n).map(|k| p[k] + step[(k, 0)]).collect();
            let rt = f(&trial);
            let ct = sum_sq(&rt);
            if !ct.is_finite() || ct > cost * (1.0 + 1e-12) {
                break;
            }
            p = trial;
            r = rt;
            cost = ct;
            jac = jac_fn(&p);
            last = size;
            if size < 1e-15 {
                break;
            }
        }
    }
    Ok(LmOutcome {
        params: p,
        cost,
        jacobian: jac,
        n_residuals: m,
        iterations,
        converged,
    })
}
