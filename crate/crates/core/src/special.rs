//! Special functions needed by the closed-form Gaussian integrals.

/// Exponentially scaled modified Bessel function e^{−u}·I₀(u) for u ≥ 0.
pub fn i0e(u: f64) -> f64 {
    let u = u.abs();
    if u <= 30.0 {
        let q = u * u / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        while term > 1e-17 * sum {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
        }
        sum * (-u).exp()
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            let kf = k as f64;
            term *= (2.0 * kf - 1.0).powi(2) / (kf * 8.0 * u);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum / (2.0 * std::f64::consts::PI * u).sqrt()
    }
}

/// ⟨1/|r|⟩ for a 2D Gaussian distributed vector r with per-axis standard
/// deviation `sigma` and mean of length `separation`.
pub fn gaussian_inverse_distance(separation: f64, sigma: f64) -> f64 {
    let u = separation * separation / (4.0 * sigma * sigma);
    (std::f64::consts::PI / 2.0).sqrt() / sigma * i0e(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i0e_reference_values() {
        // I0(1) = 1.2660658777520082, I0(10) = 2815.716628466254
        assert!((i0e(0.0) - 1.0).abs() < 1e-16);
        assert!((i0e(1.0) - 1.266_065_877_752_008_2 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((i0e(10.0) / (2_815.716_628_466_254 * (-10.0f64).exp()) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn branches_agree_at_switch() {
        let below = i0e(30.0);
        let above = i0e(30.0 + 1e-12);
        assert!((below / above - 1.0).abs() < 1e-13);
    }

    #[test]
    fn far_field_is_point_charge() {
        let v = gaussian_inverse_distance(1000.0, 5.0);
        assert!((v * 1000.0 - 1.0).abs() < 1e-4);
    }
}
