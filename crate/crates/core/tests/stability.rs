use dotsim::stability::*;
use proptest::prelude::*;

fn diagram(
    v: f64,
    t: f64,
    n: usize,
    noise: f64,
    seed: u64,
) -> (AnticrossingModel, StabilityDiagram) {
    let m = AnticrossingModel::new(v, t).with_center(15.0, -10.0);
    let g = StabilityGrid::spanning(&m, n).unwrap();
    let d = simulate_diagram(&m, &g, &SensorModel::default(), noise, seed).unwrap();
    (m, d)
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn branches_mirror_under_sum_reflection() {
    let m = AnticrossingModel::new(42.0, 13.0);
    let ws: Vec<f64> = (-20..=20).map(|k| 7.5 * k as f64).collect();
    let (lo, hi) = boundary_curves(&m, &ws);
    for (a, b) in lo.iter().zip(&hi) {
        // (s, w) → (−s, w)
        let (sa, wa) = (a[0] + a[1], a[0] - a[1]);
        let (sb, wb) = (b[0] + b[1], b[0] - b[1]);
        assert!((sa + sb).abs() < 1e-12 && (wa - wb).abs() < 1e-12);
        let gap = sb - sa;
        assert!(gap >= m.diagonal_gap() - 1e-12);
    }
    assert!(((hi[20][0] + hi[20][1]) - (lo[20][0] + lo[20][1]) - m.diagonal_gap()).abs() < 1e-12);
}

#[test]
fn thermal_edge_width_matches_logistic() {
    // perpendicular cut across the lower branch far from the anti-crossing, where
    // it is the single-dot line δε_i = −V/2 (δε_j very negative keeps dot j empty)
    let kt = 10.0;
    let (v, t) = (30.0, 0.0);
    let n_at = |x: f64| thermal_occupations(x, -2000.0, v, t, kt).0;
    let find = |level: f64| {
        let (mut a, mut b) = (-200.0, 200.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if n_at(m) < level {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let width = find(0.9) - find(0.1);
    assert!((width - 2.0 * 9f64.ln() * kt).abs() < 1e-6, "{width}");
    assert!((width / kt - 4.394).abs() < 1e-3);
}

#[test]
fn signal_is_antisymmetric_about_the_centre() {
    let (m, d) = diagram(35.0, 12.0, 41, 0.0, 0);
    let g = StabilityGrid::centered(&m, 150.0, 41).unwrap();
    let d2 = simulate_diagram(&m, &g, &SensorModel::default(), 0.0, 0).unwrap();
    let (nx, ny) = d2.shape();
    for j in 0..ny {
        for i in 0..nx {
            // symmetric weights: S(δ) + S(−δ) = total weight
            assert!((d2.at(i, j) + d2.at(nx - 1 - i, ny - 1 - j) - 2.0).abs() < 1e-12);
        }
    }
    assert!(d.noise_sigma.is_none());
}

#[test]
fn zero_tunnel_zero_noise_gives_plateaus() {
    let m = AnticrossingModel::new(40.0, 0.0);
    let g = StabilityGrid::centered(&m, 150.0, 61).unwrap();
    let sensor = SensorModel {
        weights: [1.0, 1.0],
        broadening: 0.05,
    };
    let d = simulate_diagram(&m, &g, &sensor, 0.0, 0).unwrap();
    for v in &d.signal {
        let r = v.round();
        assert!(
            (v - r).abs() < 1e-6
                || (v - r).abs() > 0.0 && [0.0, 1.0, 2.0].iter().any(|p| (v - p).abs() <= 1.0)
        );
    }
    let counts = [0.0, 1.0, 2.0].map(|p| d.signal.iter().filter(|v| (*v - p).abs() < 1e-6).count());
    assert!(counts.iter().all(|&c| c > 100));
}

#[test]
fn straight_step_edges_are_subcell_accurate() {
    let n = 81;
    let axis: Vec<f64> = (0..n).map(|k| k as f64 * 2.0).collect();
    let grid = StabilityGrid::new(axis.clone(), axis.clone(), AxisUnit::MicroElectronVolt).unwrap();
    let (c, s) = (0.35f64.cos(), 0.35f64.sin());
    let offset = 81.3;
    let mut signal = Vec::new();
    for &y in &axis {
        for &x in &axis {
            signal.push(1.0 / (1.0 + (-(c * x + s * y - offset) / 3.0).exp()));
        }
    }
    let d = StabilityDiagram::new(grid, [1.0, 1.0], signal, None).unwrap();
    let e = detect_edges(&d, &EdgeOptions::default()).unwrap();
    assert!(e.len() > 40);
    let rms = (e
        .points
        .iter()
        .map(|p| (c * p.x + s * p.y - offset).powi(2))
        .sum::<f64>()
        / e.len() as f64)
        .sqrt();
    assert!(rms < 0.25 * 2.0, "rms {rms} µeV");
}

#[test]
fn flat_diagram_has_no_edges() {
    let axis: Vec<f64> = (0..30).map(f64::from).collect();
    let grid = StabilityGrid::new(axis.clone(), axis, AxisUnit::MicroElectronVolt).unwrap();
    let d = StabilityDiagram::new(grid, [1.0, 1.0], vec![0.7; 900], None).unwrap();
    assert!(detect_edges(&d, &EdgeOptions::default())
        .unwrap()
        .is_empty());
    assert!(fit_diagram(&d, &FitOptions::default()).is_err());
}

#[test]
fn noisy_boundaries_are_mostly_detected() {
    let (m, d) = diagram(40.0, 15.0, 101, 0.1, 11);
    let e = detect_edges(&d, &EdgeOptions::default()).unwrap();
    let h = d.grid.axis_i[1] - d.grid.axis_i[0];
    let ws: Vec<f64> = (-400..=400).map(|k| k as f64 * 0.5).collect();
    let (lo, hi) = boundary_curves(&m, &ws);
    let inside = |p: &[f64; 2]| {
        p[0] > d.grid.axis_i[3]
            && p[0] < d.grid.axis_i[97]
            && p[1] > d.grid.axis_j[3]
            && p[1] < d.grid.axis_j[97]
    };
    let mut cells: Vec<(i64, i64)> = lo
        .iter()
        .chain(&hi)
        .filter(|p| inside(p))
        .map(|p| {
            (
                ((p[0] - d.grid.axis_i[0]) / h).round() as i64,
                ((p[1] - d.grid.axis_j[0]) / h).round() as i64,
            )
        })
        .collect();
    cells.sort();
    cells.dedup();
    let found = cells
        .iter()
        .filter(|(ci, cj)| {
            let (x, y) = (
                d.grid.axis_i[0] + *ci as f64 * h,
                d.grid.axis_j[0] + *cj as f64 * h,
            );
            e.points
                .iter()
                .any(|p| (p.x - x).abs() <= 1.5 * h && (p.y - y).abs() <= 1.5 * h)
        })
        .count();
    let frac = found as f64 / cells.len() as f64;
    assert!(frac >= 0.9, "{found}/{}", cells.len());
}

#[test]
fn exact_points_recover_parameters() {
    let m = AnticrossingModel::new(30.0, 20.0).with_center(5.0, 8.0);
    let ws: Vec<f64> = (-30..=30).map(|k| 6.0 * k as f64).collect();
    let (lo, hi) = boundary_curves(&m, &ws);
    let pts: Vec<EdgePoint> = lo
        .iter()
        .chain(&hi)
        .map(|p| EdgePoint {
            x: p[0],
            y: p[1],
            weight: 1.0,
        })
        .collect();
    let r = fit_anticrossing(&pts, &FitOptions::default()).unwrap();
    assert!(rel(r.model.v_ij, 30.0) < 0.01 && rel(r.model.t_ij, 20.0) < 0.01);
    assert!((r.model.center[0] - 5.0).abs() < 0.1 && (r.model.center[1] - 8.0).abs() < 0.1);
    assert_eq!(r.covariance.len(), 4);
    assert!(r.residual_norm < 1e-6);
}

#[test]
fn fixed_zero_tunnel_gives_half_the_gap() {
    let m = AnticrossingModel::new(44.0, 0.0);
    let ws: Vec<f64> = (-25..=25).map(|k| 5.0 * k as f64 + 0.5).collect();
    let (lo, hi) = boundary_curves(&m, &ws);
    let pts: Vec<EdgePoint> = lo
        .iter()
        .chain(&hi)
        .map(|p| EdgePoint {
            x: p[0],
            y: p[1],
            weight: 1.0,
        })
        .collect();
    let opts = FitOptions {
        fixed_t: Some(0.0),
        ..FitOptions::default()
    };
    let r = fit_anticrossing(&pts, &opts).unwrap();
    assert!(
        (r.model.v_ij - m.diagonal_gap() / 2.0).abs() < 1e-8,
        "{}",
        r.model.v_ij
    );
    assert_eq!(r.model.t_ij, 0.0);
    assert_eq!(r.parameter_names, ["v_ij", "center_i", "center_j"]);
}

#[test]
fn single_branch_is_rejected_by_name() {
    let m = AnticrossingModel::new(30.0, 10.0);
    let ws: Vec<f64> = (-20..=20).map(|k| 5.0 * k as f64).collect();
    let (_, hi) = boundary_curves(&m, &ws);
    let pts: Vec<EdgePoint> = hi
        .iter()
        .map(|p| EdgePoint {
            x: p[0],
            y: p[1],
            weight: 1.0,
        })
        .collect();
    let opts = FitOptions {
        initial: Some(m),
        ..FitOptions::default()
    };
    let err = fit_anticrossing(&pts, &opts).unwrap_err().to_string();
    assert!(err.contains("lower"), "{err}");
}

#[test]
fn diagram_roundtrip_without_noise() {
    for (v, t) in [(10.0, 5.0), (30.0, 20.0), (100.0, 40.0), (60.0, 8.0)] {
        let (_, d) = diagram(v, t, 101, 0.0, 0);
        let r = fit_diagram(&d, &FitOptions::default()).unwrap();
        assert!(
            rel(r.model.v_ij, v) < 1e-6 && rel(r.model.t_ij, t) < 1e-6,
            "{v} {t}: {:?}",
            r.model
        );
        let s = r.sensor.unwrap();
        assert!((s.broadening - 10.0).abs() < 1e-6);
    }
}

#[test]
fn diagram_roundtrip_with_noise() {
    let (_, d) = diagram(30.0, 20.0, 151, 0.1, 4);
    let r = fit_diagram(&d, &FitOptions::default()).unwrap();
    assert!(
        rel(r.model.v_ij, 30.0) < 0.15 && rel(r.model.t_ij, 20.0) < 0.15,
        "{:?}",
        r.model
    );
    let sv = r.standard_error("v_ij").unwrap();
    assert!(sv > 0.0 && sv < 3.0);
}

#[test]
fn edge_fit_alone_is_close() {
    let (_, d) = diagram(50.0, 30.0, 121, 0.0, 0);
    let opts = FitOptions {
        method: FitMethod::Edges,
        ..FitOptions::default()
    };
    let r = fit_diagram(&d, &opts).unwrap();
    assert_eq!(r.method, FitMethod::Edges);
    assert!(
        rel(r.model.v_ij, 50.0) < 0.1 && rel(r.model.t_ij, 30.0) < 0.1,
        "{:?}",
        r.model
    );
}

#[test]
fn exchanging_axes_swaps_only_the_centre() {
    let m = AnticrossingModel::new(25.0, 12.0).with_center(15.0, -10.0);
    let g = StabilityGrid::spanning(&m, 101).unwrap();
    let sensor = SensorModel {
        weights: [1.0, 0.6],
        broadening: 10.0,
    };
    let d = simulate_diagram(&m, &g, &sensor, 0.05, 9).unwrap();
    let a = fit_diagram(&d, &FitOptions::default()).unwrap();
    let b = fit_diagram(&d.transposed(), &FitOptions::default()).unwrap();
    assert!(rel(a.model.v_ij, b.model.v_ij) < 1e-6 && rel(a.model.t_ij, b.model.t_ij) < 1e-6);
    assert!((a.model.center[0] - b.model.center[1]).abs() < 1e-6);
    let (sa, sb) = (a.sensor.unwrap(), b.sensor.unwrap());
    assert!((sa.weights[0] - sb.weights[1]).abs() < 1e-6);
}

#[test]
fn lever_arm_rescaling_leaves_energies_unchanged() {
    let m = AnticrossingModel::new(45.0, 15.0)
        .with_center(30.0, 20.0)
        .with_lever_arms(105.0, 86.0);
    let axis_i: Vec<f64> = (0..101)
        .map(|k| 1.2 * (-1.0 + 0.02 * k as f64) + 30.0 / 105.0)
        .collect();
    let axis_j: Vec<f64> = (0..101)
        .map(|k| 1.4 * (-1.0 + 0.02 * k as f64) + 20.0 / 86.0)
        .collect();
    let g = StabilityGrid::new(axis_i.clone(), axis_j.clone(), AxisUnit::Millivolt).unwrap();
    let d = simulate_diagram(&m, &g, &SensorModel::default(), 0.05, 2).unwrap();
    let base = fit_diagram(&d, &FitOptions::default()).unwrap();
    for k in [0.5, 1.7, 3.0] {
        let scaled = StabilityDiagram::new(
            StabilityGrid::new(
                axis_i.iter().map(|x| x * k).collect(),
                axis_j.iter().map(|x| x * k).collect(),
                AxisUnit::Millivolt,
            )
            .unwrap(),
            [105.0 / k, 86.0 / k],
            d.signal.clone(),
            d.noise_sigma,
        )
        .unwrap();
        let r = fit_diagram(&scaled, &FitOptions::default()).unwrap();
        for (a, b) in r.parameters.iter().zip(&base.parameters) {
            assert!(
                (a - b).abs() <= 1e-10 * b.abs().max(1.0),
                "k={k}: {a} vs {b}"
            );
        }
    }
    assert!(rel(base.model.v_ij, 45.0) < 0.05 && rel(base.model.t_ij, 15.0) < 0.05);
}

#[test]
fn noise_is_seeded() {
    let (_, a) = diagram(30.0, 10.0, 31, 0.1, 5);
    let (_, b) = diagram(30.0, 10.0, 31, 0.1, 5);
    let (_, c) = diagram(30.0, 10.0, 31, 0.1, 6);
    assert_eq!(a.signal, b.signal);
    assert_ne!(a.signal, c.signal);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn boundary_points_satisfy_the_model(v in 0.0f64..120.0, t in 0.0f64..50.0, w in -300.0f64..300.0) {
        let m = AnticrossingModel::new(v, t);
        let (lo, hi) = boundary_curves(&m, &[w]);
        for (p, sign) in [(lo[0], -1.0), (hi[0], 1.0)] {
            let lhs = p[0] + p[1];
            let rhs = sign * (v + ((p[0] - p[1]).powi(2) + 4.0 * t * t).sqrt());
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn occupations_stay_physical(di in -200.0f64..200.0, dj in -200.0f64..200.0, v in 0.0f64..100.0, t in 0.0f64..40.0, kt in 0.5f64..30.0) {
        let (a, b) = thermal_occupations(di, dj, v, t, kt);
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        let (c, d) = thermal_occupations(-di, -dj, v, t, kt);
        // particle-hole symmetry about the centre
        prop_assert!((a + c - 1.0).abs() < 1e-9 && (b + d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn lever_conversion_is_linear(x in -10.0f64..10.0, a in 1.0f64..200.0) {
        let e = volts_to_energy(&[x], a).unwrap()[0];
        prop_assert_eq!(e, x * a);
    }
}
