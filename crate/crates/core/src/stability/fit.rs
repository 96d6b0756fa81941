use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use super::edges::{detect_edges, EdgeOptions, EdgePoint};
use super::lm::{minimize, minimize_with, LmOptions};
use super::simulate::{sensor_signal, thermal_occupations_gradient, SensorModel};
use super::{AnticrossingModel, StabilityDiagram};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    /// Orthogonal-distance fit of the boundary curves to edge points.
    Edges,
    /// Edge fit refined by fitting the thermal sensor model to every pixel.
    Patch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Holds t_ij at this value instead of fitting it.
    pub fixed_t: Option<f64>,
    /// Soft-L1 scale in µeV for the edge fit.
    pub loss_scale: f64,
    pub edges: EdgeOptions,
    pub method: FitMethod,
    /// Starting k_BT for the patch fit, µeV.
    pub broadening_guess: f64,
    pub initial: Option<AnticrossingModel>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fixed_t: None,
            loss_scale: 5.0,
            edges: EdgeOptions::default(),
            method: FitMethod::Patch,
            broadening_guess: crate::units::THERMAL_SCALE_UEV,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: AnticrossingModel,
    pub method: FitMethod,
    pub parameter_names: Vec<String>,
    pub parameters: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub residual_norm: f64,
    pub n_points: usize,
    pub iterations: usize,
    /// Fitted sensor model (patch fits only).
    pub sensor: Option<SensorModel>,
    pub signal_offset: Option<f64>,
}

impl FitReport {
    pub fn standard_error(&self, name: &str) -> Option<f64> {
        let k = self.parameter_names.iter().position(|n| n == name)?;
        Some(self.covariance[k][k].max(0.0).sqrt())
    }
}

const BRANCHES: [(f64, &str); 2] = [(-1.0, "lower (−)"), (1.0, "upper (+)")];

/// Signed distance, in the (δε_i, δε_j) plane, from the point with
/// s = δε_i + δε_j, w = δε_i − δε_j to one branch.
fn branch_distance(s: f64, w: f64, v: f64, t: f64, sign: f64) -> f64 {
    let g = |x: f64| sign * (v + (x * x + 4.0 * t * t).sqrt());
    let f = |x: f64| (s - g(x)).powi(2) + (w - x).powi(2);
    let reach = (s - g(w)).abs();
    let mut best = w;
    let mut fbest = f(w);
    let try_at = |x: f64, best: &mut f64, fbest: &mut f64| {
        let fx = f(x);
        if fx < *fbest {
            *best = x;
            *fbest = fx;
        }
    };
    if reach > 0.0 {
        for k in 0..=16 {
            try_at(
                w - reach + 2.0 * reach * k as f64 / 16.0,
                &mut best,
                &mut fbest,
            );
        }
        if (w - 0.0).abs() <= reach {
            try_at(0.0, &mut best, &mut fbest);
        }
        // Newton on the stationarity condition
        let mut x = best;
        for _ in 0..40 {
            let q = (x * x + 4.0 * t * t).sqrt();
            if q < 1e-300 {
                break;
            }
            let gp = sign * x / q;
            let gpp = sign * 4.0 * t * t / (q * q * q);
            let h = (s - g(x)) * gp + (w - x);
            let hp = -gp * gp + (s - g(x)) * gpp - 1.0;
            if hp >= 0.0 {
                break;
            }
            let dx = -h / hp;
            x += dx;
            if dx.abs() <= 1e-14 * (1.0 + x.abs()) {
                break;
            }
        }
        try_at(x, &mut best, &mut fbest);
    }
    let side = if s - g(best) >= 0.0 { 1.0 } else { -1.0 };
    side * (0.5 * fbest).sqrt()
}

/// Distance to the nearer branch and which branch that is.
fn nearest_branch(x: f64, y: f64, m: &AnticrossingModel) -> (f64, usize) {
    let (di, dj) = (x - m.center[0], y - m.center[1]);
    let (s, w) = (di + dj, di - dj);
    let lo = branch_distance(s, w, m.v_ij, m.t_ij, -1.0);
    let hi = branch_distance(s, w, m.v_ij, m.t_ij, 1.0);
    if lo.abs() <= hi.abs() {
        (lo, 0)
    } else {
        (hi, 1)
    }
}

fn check_branches(points: &[EdgePoint], m: &AnticrossingModel) -> Result<()> {
    let mut counts = [0usize; 2];
    for p in points {
        counts[nearest_branch(p.x, p.y, m).1] += 1;
    }
    for (k, (_, name)) in BRANCHES.iter().enumerate() {
        if counts[k] < 3 {
            return Err(Error::Fit(format!(
                "no usable points on the {name} branch ({} of {})",
                counts[k],
                points.len()
            )));
        }
    }
    Ok(())
}

fn weighted_median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

fn initial_guess(points: &[EdgePoint], fixed_t: Option<f64>) -> Result<AnticrossingModel> {
    let wsum: f64 = points.iter().map(|p| p.weight).sum();
    let ci = points.iter().map(|p| p.weight * p.x).sum::<f64>() / wsum;
    let cj = points.iter().map(|p| p.weight * p.y).sum::<f64>() / wsum;
    let sw: Vec<(f64, f64)> = points
        .iter()
        .map(|p| ((p.x - ci) + (p.y - cj), (p.x - ci) - (p.y - cj)))
        .collect();
    for (sign, name) in BRANCHES {
        if sw.iter().filter(|(s, _)| s * sign > 0.0).count() < 3 {
            return Err(Error::Fit(format!("no usable points on the {name} branch")));
        }
    }
    let wmax = sw.iter().map(|(_, w)| w.abs()).fold(0.0, f64::max);
    let near = weighted_median(
        sw.iter()
            .filter(|(_, w)| w.abs() <= 0.15 * wmax)
            .map(|(s, _)| s.abs())
            .collect(),
    );
    let far = weighted_median(
        sw.iter()
            .filter(|(_, w)| w.abs() >= 0.6 * wmax)
            .map(|(s, w)| s.abs() - w.abs())
            .collect(),
    );
    let v = far.unwrap_or(0.0).max(0.0);
    let t = fixed_t.unwrap_or_else(|| near.map_or(1.0, |a| (0.5 * (a - v)).max(1.0)));
    Ok(AnticrossingModel::new(v, t).with_center(ci, cj))
}

fn unpack(p: &[f64], fixed_t: Option<f64>, lever_arms: [f64; 2]) -> AnticrossingModel {
    let (v, t, rest) = match fixed_t {
        Some(t) => (p[0], t, &p[1..]),
        None => (p[0], p[1], &p[2..]),
    };
    AnticrossingModel {
        v_ij: v,
        t_ij: t.abs(),
        center: [rest[0], rest[1]],
        lever_arms,
    }
}

fn pack(m: &AnticrossingModel, fixed_t: Option<f64>) -> Vec<f64> {
    match fixed_t {
        Some(_) => vec![m.v_ij, m.center[0], m.center[1]],
        None => vec![m.v_ij, m.t_ij, m.center[0], m.center[1]],
    }
}

fn model_names(fixed_t: Option<f64>) -> Vec<String> {
    let names: &[&str] = match fixed_t {
        Some(_) => &["v_ij", "center_i", "center_j"],
        None => &["v_ij", "t_ij", "center_i", "center_j"],
    };
    names.iter().map(|s| s.to_string()).collect()
}

/// Robust orthogonal-distance fit of the boundary curves to edge points in µeV.
pub fn fit_anticrossing(points: &[EdgePoint], opts: &FitOptions) -> Result<FitReport> {
    edge_fit(points, opts, true)
}

fn edge_fit(points: &[EdgePoint], opts: &FitOptions, strict: bool) -> Result<FitReport> {
    if points.is_empty() {
        return Err(Error::Fit("no edge points to fit".into()));
    }
    if !(opts.loss_scale > 0.0) {
        return Err(Error::InvalidInput("loss scale must be positive".into()));
    }
    if let Some(t) = opts.fixed_t {
        if !(t >= 0.0) {
            return Err(Error::InvalidInput("fixed t must be non-negative".into()));
        }
    }
    let start = match opts.initial {
        Some(m) => AnticrossingModel {
            t_ij: opts.fixed_t.unwrap_or(m.t_ij),
            ..m
        },
        None => initial_guess(points, opts.fixed_t)?,
    };
    if strict {
        check_branches(points, &start)?;
    }
    let lever = start.lever_arms;
    let mean_w = points.iter().map(|p| p.weight).sum::<f64>() / points.len() as f64;
    let base: Vec<f64> = points.iter().map(|p| p.weight / mean_w).collect();
    let mut robust = vec![1.0; points.len()];
    let mut p = pack(&start, opts.fixed_t);
    let scales = vec![10.0; p.len()];
    let mut outcome = None;
    for _ in 0..50 {
        let w: Vec<f64> = base
            .iter()
            .zip(&robust)
            .map(|(a, b)| (a * b).sqrt())
            .collect();
        let residuals = |q: &[f64]| {
            let m = unpack(q, opts.fixed_t, lever);
            points
                .iter()
                .zip(&w)
                .map(|(pt, wk)| wk * nearest_branch(pt.x, pt.y, &m).0)
                .collect()
        };
        let out = minimize(residuals, &p, &scales, LmOptions::default())?;
        let change = out
            .params
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs() / (b.abs() + 1.0))
            .fold(0.0, f64::max);
        p = out.params.clone();
        let m = unpack(&p, opts.fixed_t, lever);
        robust = points
            .iter()
            .map(|pt| {
                let z = (nearest_branch(pt.x, pt.y, &m).0 / opts.loss_scale).powi(2);
                1.0 / (1.0 + z).sqrt()
            })
            .collect();
        outcome = Some(out);
        if change < 1e-10 {
            break;
        }
    }
    let mut out = outcome.expect("at least one pass");
    if strict {
        out = out.require_converged()?;
    }
    let model = unpack(&out.params, opts.fixed_t, lever);
    if strict {
        check_branches(points, &model)?;
    }
    Ok(FitReport {
        model,
        method: FitMethod::Edges,
        parameter_names: model_names(opts.fixed_t),
        parameters: pack(&model, opts.fixed_t),
        covariance: out.covariance()?,
        residual_norm: out.cost.sqrt(),
        n_points: points.len(),
        iterations: out.iterations,
        sensor: None,
        signal_offset: None,
    })
}

/// Least-squares sensor weights and offset for fixed boundary parameters.
fn linear_sensor(d: &StabilityDiagram, m: &AnticrossingModel, kt: f64) -> Result<([f64; 2], f64)> {
    let unit = SensorModel {
        weights: [1.0, 0.0],
        broadening: kt,
    };
    let other = SensorModel {
        weights: [0.0, 1.0],
        broadening: kt,
    };
    let (xs, ys) = (&d.grid.axis_i, &d.grid.axis_j);
    let mut a = Mat::<f64>::zeros(3, 3);
    let mut b = Mat::<f64>::zeros(3, 1);
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let row = [
                sensor_signal(m, &unit, x, y),
                sensor_signal(m, &other, x, y),
                1.0,
            ];
            let z = d.at(i, j);
            for r in 0..3 {
                b[(r, 0)] += row[r] * z;
                for c in 0..3 {
                    a[(r, c)] += row[r] * row[c];
                }
            }
        }
    }
    let sol = a.partial_piv_lu().solve(&b);
    let out = [sol[(0, 0)], sol[(1, 0)], sol[(2, 0)]];
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Fit("sensor weights are not identifiable".into()));
    }
    Ok(([out[0], out[1]], out[2]))
}

fn patch_fit(
    d: &StabilityDiagram,
    start: &AnticrossingModel,
    opts: &FitOptions,
) -> Result<FitReport> {
    let kt0 = opts.broadening_guess;
    if !(kt0 > 0.0) {
        return Err(Error::InvalidInput(
            "broadening guess must be positive".into(),
        ));
    }
    let (weights, offset) = linear_sensor(d, start, kt0)?;
    let mut p = pack(start, opts.fixed_t);
    let n_model = p.len();
    p.extend([kt0, weights[0], weights[1], offset]);
    let lever = start.lever_arms;
    let (xs, ys) = (&d.grid.axis_i, &d.grid.axis_j);
    let residuals = |q: &[f64]| {
        let m = unpack(&q[..n_model], opts.fixed_t, lever);
        let sensor = SensorModel {
            weights: [q[n_model + 1], q[n_model + 2]],
            broadening: q[n_model].abs().max(1e-9),
        };
        let off = q[n_model + 3];
        let mut r = Vec::with_capacity(xs.len() * ys.len());
        for (j, &y) in ys.iter().enumerate() {
            for (i, &x) in xs.iter().enumerate() {
                r.push(off + sensor_signal(&m, &sensor, x, y) - d.at(i, j));
            }
        }
        r
    };
    let with_t = opts.fixed_t.is_none();
    let jacobian = |q: &[f64]| {
        let m = unpack(&q[..n_model], opts.fixed_t, lever);
        let t_sign = if with_t { q[1].signum() } else { 0.0 };
        let kt = q[n_model].abs().max(1e-9);
        let kt_sign = if q[n_model].abs() > 1e-9 {
            q[n_model].signum()
        } else {
            0.0
        };
        let (wi, wj) = (q[n_model + 1], q[n_model + 2]);
        let mut jac = Mat::zeros(xs.len() * ys.len(), q.len());
        let mut row = 0;
        for &y in ys.iter() {
            for &x in xs.iter() {
                let (n, g) = thermal_occupations_gradient(
                    x - m.center[0],
                    y - m.center[1],
                    m.v_ij,
                    m.t_ij,
                    kt,
                );
                let ds: [f64; 5] = std::array::from_fn(|k| wi * g[0][k] + wj * g[1][k]);
                let mut col = 0;
                jac[(row, col)] = ds[0];
                col += 1;
                if with_t {
                    jac[(row, col)] = ds[1] * t_sign;
                    col += 1;
                }
                jac[(row, col)] = -ds[2];
                jac[(row, col + 1)] = -ds[3];
                jac[(row, n_model)] = ds[4] * kt_sign;
                jac[(row, n_model + 1)] = n[0];
                jac[(row, n_model + 2)] = n[1];
                jac[(row, n_model + 3)] = 1.0;
                row += 1;
            }
        }
        jac
    };
    let mut scales = vec![10.0; n_model];
    scales.extend([5.0, 1.0, 1.0, 1.0]);
    let out = minimize_with(residuals, jacobian, &p, &scales, LmOptions::default())?
        .require_converged()?;
    let q = &out.params;
    let model = unpack(&q[..n_model], opts.fixed_t, lever);
    let mut names = model_names(opts.fixed_t);
    names.extend(["broadening", "weight_i", "weight_j", "offset"].map(String::from));
    let mut parameters = pack(&model, opts.fixed_t);
    parameters.extend([
        q[n_model].abs(),
        q[n_model + 1],
        q[n_model + 2],
        q[n_model + 3],
    ]);
    Ok(FitReport {
        model,
        method: FitMethod::Patch,
        parameter_names: names,
        parameters,
        covariance: out.covariance()?,
        residual_norm: out.cost.sqrt(),
        n_points: out.n_residuals,
        iterations: out.iterations,
        sensor: Some(SensorModel {
            weights: [q[n_model + 1], q[n_model + 2]],
            broadening: q[n_model].abs(),
        }),
        signal_offset: Some(q[n_model + 3]),
    })
}

/// Whether an edge-fit result lies inside the diagram it came from.
fn plausible(m: &AnticrossingModel, d: &StabilityDiagram) -> bool {
    let (xs, ys) = (&d.grid.axis_i, &d.grid.axis_j);
    let span = (xs[xs.len() - 1] - xs[0]).max(ys[ys.len() - 1] - ys[0]);
    let inside = |v: f64, axis: &[f64]| v >= axis[0] && v <= axis[axis.len() - 1];
    m.v_ij.is_finite()
        && m.v_ij < span
        && m.t_ij < span
        && inside(m.center[0], xs)
        && inside(m.center[1], ys)
}

/// Fits a diagram: edge extraction, boundary fit, then (by default) the
/// full-pixel patch refinement. Axes in mV are converted with the diagram's
/// lever arms first; the result is always in µeV.
pub fn fit_diagram(diagram: &StabilityDiagram, opts: &FitOptions) -> Result<FitReport> {
    let d = diagram.to_energy()?;
    let edges = detect_edges(&d, &opts.edges)?;
    if edges.is_empty() {
        return Err(Error::Fit("no edges found; the diagram is flat".into()));
    }
    if opts.method == FitMethod::Edges {
        let mut r = edge_fit(&edges.points, opts, true)?;
        r.model.lever_arms = diagram.lever_arms;
        return Ok(r);
    }
    // the edge fit only seeds the patch fit, so it need not converge fully
    let seed = edge_fit(&edges.points, opts, false)
        .ok()
        .map(|r| r.model)
        .filter(|m| plausible(m, &d));
    let starts = match (opts.initial, seed) {
        (Some(m), _) => vec![m],
        (None, Some(m)) => vec![m],
        (None, None) => coarse_starts(&d, opts.fixed_t),
    };
    let mut best: Option<FitReport> = None;
    let mut last_err = None;
    for mut start in starts {
        start.lever_arms = diagram.lever_arms;
        match patch_fit(&d, &start, opts) {
            Ok(r)
                if best
                    .as_ref()
                    .is_none_or(|b| r.residual_norm < b.residual_norm) =>
            {
                best = Some(r)
            }
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one start"))
}

/// Starting models spread over the diagram, for when edges cannot seed the fit.
fn coarse_starts(d: &StabilityDiagram, fixed_t: Option<f64>) -> Vec<AnticrossingModel> {
    let (xs, ys) = (&d.grid.axis_i, &d.grid.axis_j);
    let ci = 0.5 * (xs[0] + xs[xs.len() - 1]);
    let cj = 0.5 * (ys[0] + ys[ys.len() - 1]);
    let span = (xs[xs.len() - 1] - xs[0]).min(ys[ys.len() - 1] - ys[0]);
    let mut out = Vec::new();
    for fv in [0.05, 0.15, 0.3] {
        for ft in [0.02, 0.08] {
            let t = fixed_t.unwrap_or(ft * span);
            out.push(AnticrossingModel::new(fv * span, t).with_center(ci, cj));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_to_straight_branch() {
        // t = 0, V = 0: upper branch is s = |w|, i.e. the lines δε_j = 0 (w>0) and δε_i = 0 (w<0)
        let d = branch_distance(3.0 + 1.0, 3.0 - 1.0, 0.0, 0.0, 1.0);
        // point (3, 1): nearest is the line δε_j = 0 at distance 1
        assert!((d.abs() - 1.0).abs() < 1e-9, "{d}");
    }

    #[test]
    fn distance_to_hyperbola_is_orthogonal() {
        let (v, t) = (20.0, 15.0);
        // foot point on the upper branch and its unit normal in the δε plane
        let w0: f64 = 37.0;
        let q = (w0 * w0 + 4.0 * t * t).sqrt();
        let s0 = v + q;
        let (x0, y0) = (0.5 * (s0 + w0), 0.5 * (s0 - w0));
        let gp = w0 / q;
        // tangent direction d(x, y)/dw = ((g' + 1)/2, (g' − 1)/2)
        let (tx, ty) = (0.5 * (gp + 1.0), 0.5 * (gp - 1.0));
        let norm = tx.hypot(ty);
        let (nx, ny) = (-ty / norm, tx / norm);
        for h in [-4.0, 2.5, 6.0] {
            let (x, y) = (x0 + h * nx, y0 + h * ny);
            let d = branch_distance(x + y, x - y, v, t, 1.0);
            assert!((d.abs() - h.abs()).abs() < 1e-9, "{h}: {d}");
        }
    }
}
