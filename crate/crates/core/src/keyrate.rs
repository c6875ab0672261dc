//! Spectral secret-key-rate accounting: differential entropy rate of a
//! stationary Gaussian process, the Itakura-Saito-style divergence rate
//! between two spectra, and the resulting key-rate report derived from the
//! residual estimation error.

use crate::error::{Error, Result};
use crate::spectral::SpectralDensity;

/// Divergence split of a key-rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateComponents {
    /// Divergence of the receiver spectrum from the sender reference.
    pub d_ab: f64,
    /// Divergence of the adversary spectrum from the receiver spectrum.
    pub d_be: f64,
    /// d_ab - d_be before clamping.
    pub raw: f64,
    /// max(0, raw).
    pub rate: f64,
}

/// Key-rate summary for one recombination width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateReport {
    pub m: usize,
    pub d_ab: f64,
    pub d_be: f64,
    pub rate_raw: f64,
    pub rate: f64,
    /// Differential entropy rate of the receiver-side carrier process.
    pub entropy_bob: f64,
    /// Standard error of the rate propagated from the error-variance spread.
    pub rate_std_err: f64,
}

/// Adjacent pair in a sweep where the rate dropped beyond tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateViolation {
    pub from_m: usize,
    pub to_m: usize,
    pub drop: f64,
    pub tolerance: f64,
}

/// Differential entropy rate ln(2 pi)/2 + 1/2 + (1/4 pi) int ln P(theta).
pub fn entropy_rate(spectrum: &SpectralDensity) -> Result<f64> {
    if spectrum.values.iter().any(|&p| p <= 0.0) {
        return Err(Error::Numerical(
            "entropy rate undefined: spectral density vanishes on the grid".into(),
        ));
    }
    let mean_log = spectrum.values.iter().map(|p| p.ln()).sum::<f64>()
        / spectrum.values.len() as f64;
    Ok(0.5 * (2.0 * std::f64::consts::PI).ln() + 0.5 + 0.5 * mean_log)
}

/// Divergence rate (1/4 pi) int (P1/P2 - ln(P1/P2) - 1) dtheta between two
/// spectra on a common grid. Nonnegative; zero only when the spectra agree.
pub fn spectral_divergence(p1: &SpectralDensity, p2: &SpectralDensity) -> Result<f64> {
    if p1.values.len() != p2.values.len() {
        return Err(Error::Parameter(format!(
            "spectra live on different grids ({} vs {} points)",
            p1.values.len(),
            p2.values.len()
        )));
    }
    let mut sum = 0.0;
    for (&a, &b) in p1.values.iter().zip(&p2.values) {
        if b <= 0.0 {
            return Err(Error::Numerical(
                "divergence undefined: reference spectrum vanishes on the grid".into(),
            ));
        }
        if a <= 0.0 {
            return Err(Error::Numerical(
                "divergence undefined: compared spectrum vanishes on the grid".into(),
            ));
        }
        let r = a / b;
        sum += r - r.ln() - 1.0;
    }
    Ok(0.5 * sum / p1.values.len() as f64)
}

/// Key-rate split from the three normalized spectra: sender reference,
/// receiver, and adversary.
pub fn secret_key_rate(
    bob: &SpectralDensity,
    alice: &SpectralDensity,
    eve: &SpectralDensity,
) -> Result<KeyRateComponents> {
    let d_ab = spectral_divergence(bob, alice)?;
    let d_be = spectral_divergence(eve, bob)?;
    let raw = d_ab - d_be;
    Ok(KeyRateComponents {
        d_ab,
        d_be,
        raw,
        rate: raw.max(0.0),
    })
}

/// Builds the three normalized spectra implied by a residual error variance
/// and evaluates the key-rate split.
///
/// The receiver's conditional noise is v = err * sigma^2 / (sigma^2 - err);
/// the signal-to-noise spectra are flat: sender 1, receiver 1 + sigma^2 / v,
/// adversary 1 + sigma^2 / (v + eve_excess).
pub fn components_from_error(
    sigma_sq: f64,
    mean_err: f64,
    eve_excess: f64,
    theta_points: usize,
) -> Result<(KeyRateComponents, f64)> {
    if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
        return Err(Error::Parameter(format!(
            "carrier variance must be positive, got {sigma_sq}"
        )));
    }
    if !(eve_excess.is_finite() && eve_excess >= 0.0) {
        return Err(Error::Parameter(format!(
            "adversary excess noise must be >= 0, got {eve_excess}"
        )));
    }
    if !mean_err.is_finite() || mean_err <= 0.0 || mean_err >= sigma_sq {
        return Err(Error::Numerical(format!(
            "residual error {mean_err} outside (0, {sigma_sq}): conditional noise undefined"
        )));
    }
    let v = mean_err * sigma_sq / (sigma_sq - mean_err);
    let alice = SpectralDensity::white(1.0, theta_points)?;
    let bob = SpectralDensity::white(1.0 + sigma_sq / v, theta_points)?;
    let eve = SpectralDensity::white(1.0 + sigma_sq / (v + eve_excess), theta_points)?;
    let components = secret_key_rate(&bob, &alice, &eve)?;
    let entropy_bob = entropy_rate(&SpectralDensity::white(sigma_sq + v, theta_points)?)?;
    Ok((components, entropy_bob))
}

/// Full per-m report, with the rate's standard error propagated from the
/// standard error of the mean residual by a centered difference.
pub fn keyrate_report(
    m: usize,
    sigma_sq: f64,
    mean_err: f64,
    err_std_err: f64,
    eve_excess: f64,
    theta_points: usize,
) -> Result<KeyRateReport> {
    let (components, entropy_bob) =
        components_from_error(sigma_sq, mean_err, eve_excess, theta_points)?;
    let rate_std_err = if err_std_err > 0.0 {
        let h = err_std_err.min(0.25 * (sigma_sq - mean_err)).min(0.5 * mean_err);
        let up = components_from_error(sigma_sq, mean_err + h, eve_excess, theta_points)?
            .0
            .raw;
        let down = components_from_error(sigma_sq, mean_err - h, eve_excess, theta_points)?
            .0
            .raw;
        ((up - down) / (2.0 * h)).abs() * err_std_err
    } else {
        0.0
    };
    Ok(KeyRateReport {
        m,
        d_ab: components.d_ab,
        d_be: components.d_be,
        rate_raw: components.raw,
        rate: components.rate,
        entropy_bob,
        rate_std_err,
    })
}

/// Flags adjacent sweep entries whose rate drops by more than three combined
/// standard errors.
pub fn flag_rate_violations(reports: &[KeyRateReport]) -> Vec<RateViolation> {
    reports
        .windows(2)
        .filter_map(|pair| {
            let (a, b) = (&pair[0], &pair[1]);
            let drop = a.rate - b.rate;
            let tolerance =
                3.0 * (a.rate_std_err * a.rate_std_err + b.rate_std_err * b.rate_std_err).sqrt();
            (drop > tolerance).then_some(RateViolation {
                from_m: a.m,
                to_m: b.m,
                drop,
                tolerance,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const GAUSS_ENTROPY_UNIT: f64 = 1.4189385332046727;

    #[test]
    fn unit_spectrum_entropy_matches_closed_form() {
        let p = SpectralDensity::white(1.0, 4096).unwrap();
        assert_abs_diff_eq!(entropy_rate(&p).unwrap(), GAUSS_ENTROPY_UNIT, epsilon = 1e-15);
    }

    #[test]
    fn constant_spectrum_entropy_matches_closed_form() {
        let p = SpectralDensity::white(225.0, 4096).unwrap();
        let expect = 0.5 * (std::f64::consts::TAU * std::f64::consts::E * 225.0).ln();
        assert_abs_diff_eq!(entropy_rate(&p).unwrap(), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(entropy_rate(&p).unwrap(), 4.126988734306882, epsilon = 1e-12);
    }

    #[test]
    fn moving_average_spectrum_has_unit_entropy() {
        // P(theta) = |1 + 0.5 e^{i theta}|^2 = 1.25 + cos(theta) has unit
        // geometric mean, so its entropy rate equals the unit-spectrum value.
        let p = SpectralDensity::from_fn(4096, |t| 1.25 + t.cos()).unwrap();
        assert_abs_diff_eq!(entropy_rate(&p).unwrap(), GAUSS_ENTROPY_UNIT, epsilon = 1e-9);
    }

    #[test]
    fn vanishing_spectrum_entropy_is_rejected() {
        // 1 + cos(theta) touches zero at theta = -pi, which sits on the grid.
        let p = SpectralDensity::from_fn(4096, |t| 1.0 + t.cos()).unwrap();
        assert!(entropy_rate(&p).is_err());
    }

    #[test]
    fn constant_divergence_matches_closed_form() {
        let p2 = SpectralDensity::white(2.0, 1024).unwrap();
        let p1 = SpectralDensity::white(1.0, 1024).unwrap();
        let d = spectral_divergence(&p2, &p1).unwrap();
        assert_abs_diff_eq!(d, 0.5 * (1.0 - std::f64::consts::LN_2), epsilon = 1e-15);
        assert_abs_diff_eq!(d, 0.15342640972002735, epsilon = 1e-15);
    }

    #[test]
    fn divergence_is_asymmetric() {
        let p2 = SpectralDensity::white(2.0, 512).unwrap();
        let p1 = SpectralDensity::white(1.0, 512).unwrap();
        let forward = spectral_divergence(&p2, &p1).unwrap();
        let backward = spectral_divergence(&p1, &p2).unwrap();
        assert!((forward - backward).abs() > 1e-3);
        assert_abs_diff_eq!(
            backward,
            0.5 * (0.5 + std::f64::consts::LN_2 - 1.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn divergence_is_scale_invariant_and_positive() {
        let a = SpectralDensity::from_fn(512, |t| 2.0 + t.cos()).unwrap();
        let b = SpectralDensity::from_fn(512, |t| 3.0 + (2.0 * t).sin().abs()).unwrap();
        let base = spectral_divergence(&a, &b).unwrap();
        assert!(base > 0.0);
        let a7 = SpectralDensity::from_fn(512, |t| 7.0 * (2.0 + t.cos())).unwrap();
        let b7 = SpectralDensity::from_fn(512, |t| 7.0 * (3.0 + (2.0 * t).sin().abs())).unwrap();
        let scaled = spectral_divergence(&a7, &b7).unwrap();
        assert_abs_diff_eq!(base, scaled, epsilon = 1e-12);
    }

    #[test]
    fn divergence_vanishes_only_on_equal_spectra() {
        let a = SpectralDensity::from_fn(256, |t| 2.0 + t.cos()).unwrap();
        assert_abs_diff_eq!(spectral_divergence(&a, &a).unwrap(), 0.0, epsilon = 1e-15);
        let b = SpectralDensity::from_fn(256, |t| 2.0 + 1.001 * t.cos()).unwrap();
        assert!(spectral_divergence(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn divergence_rejects_mismatched_or_degenerate_input() {
        let a = SpectralDensity::white(1.0, 128).unwrap();
        let b = SpectralDensity::white(1.0, 256).unwrap();
        assert!(spectral_divergence(&a, &b).is_err());
        let zeroed = SpectralDensity::from_fn(128, |t| 1.0 + t.cos()).unwrap();
        assert!(spectral_divergence(&a, &zeroed).is_err());
        assert!(spectral_divergence(&zeroed, &a).is_err());
    }

    #[test]
    fn dominant_adversary_clamps_the_rate() {
        let bob = SpectralDensity::white(225.0, 512).unwrap();
        let alice = SpectralDensity::white(241.0, 512).unwrap();
        let eve = SpectralDensity::white(290.0, 512).unwrap();
        let k = secret_key_rate(&bob, &alice, &eve).unwrap();
        assert!(k.d_ab > 0.0 && k.d_be > 0.0);
        assert!(k.raw < 0.0);
        assert_eq!(k.rate, 0.0);
    }

    #[test]
    fn weak_adversary_leaves_positive_rate() {
        let bob = SpectralDensity::white(95.0, 512).unwrap();
        let alice = SpectralDensity::white(1.0, 512).unwrap();
        let eve = SpectralDensity::white(90.0, 512).unwrap();
        let k = secret_key_rate(&bob, &alice, &eve).unwrap();
        assert!(k.raw > 0.0);
        assert_eq!(k.rate, k.raw);
        assert_abs_diff_eq!(k.raw, k.d_ab - k.d_be, epsilon = 1e-15);
    }

    /// Demo-profile conditional noise for a given recombination width.
    fn demo_w(m: f64) -> f64 {
        let omega = 225.0 / 64.0;
        omega * 16.0 / (omega + m)
    }

    /// err = sigma^2 w / (sigma^2 + w), the residual matching that noise.
    fn demo_err(m: f64) -> f64 {
        let w = demo_w(m);
        225.0 * w / (225.0 + w)
    }

    #[test]
    fn report_matches_direct_evaluation_on_demo_profile() {
        let err = demo_err(20.0);
        let report = keyrate_report(20, 225.0, err, 0.0, 16.0, 1024).unwrap();
        // the conditional noise recovers w exactly
        let w = demo_w(20.0);
        let p_bob = 1.0 + 225.0 / w;
        let p_eve = 1.0 + 225.0 / (w + 16.0);
        let d_ab = 0.5 * (p_bob - p_bob.ln() - 1.0);
        let r = p_eve / p_bob;
        let d_be = 0.5 * (r - r.ln() - 1.0);
        assert_abs_diff_eq!(report.d_ab, d_ab, epsilon = 1e-9);
        assert_abs_diff_eq!(report.d_be, d_be, epsilon = 1e-9);
        assert_abs_diff_eq!(report.rate, d_ab - d_be, epsilon = 1e-9);
        assert!(report.rate > 0.0);
        assert_eq!(report.rate_std_err, 0.0);
        let entropy_expect = 0.5 * (std::f64::consts::TAU * std::f64::consts::E * (225.0 + w)).ln();
        assert_abs_diff_eq!(report.entropy_bob, entropy_expect, epsilon = 1e-12);
    }

    #[test]
    fn rate_grows_and_entropy_falls_with_wider_recombination() {
        let narrow = keyrate_report(20, 225.0, demo_err(20.0), 0.0, 16.0, 1024).unwrap();
        let wide = keyrate_report(45, 225.0, demo_err(45.0), 0.0, 16.0, 1024).unwrap();
        assert!(wide.rate > narrow.rate, "{} vs {}", wide.rate, narrow.rate);
        assert!(wide.entropy_bob < narrow.entropy_bob);
        assert!(narrow.rate > 40.0 && narrow.rate < 50.0);
        assert!(wide.rate > 90.0 && wide.rate < 100.0);
    }

    #[test]
    fn rate_error_propagates_linearly_for_small_spread() {
        let err = demo_err(20.0);
        let a = keyrate_report(20, 225.0, err, 1e-4, 16.0, 512).unwrap();
        let b = keyrate_report(20, 225.0, err, 2e-4, 16.0, 512).unwrap();
        assert!(a.rate_std_err > 0.0);
        assert_abs_diff_eq!(b.rate_std_err / a.rate_std_err, 2.0, epsilon = 1e-3);
    }

    #[test]
    fn degenerate_residuals_are_rejected() {
        assert!(components_from_error(225.0, 0.0, 16.0, 256).is_err());
        assert!(components_from_error(225.0, 225.0, 16.0, 256).is_err());
        assert!(components_from_error(225.0, -1.0, 16.0, 256).is_err());
        assert!(components_from_error(0.0, 1.0, 16.0, 256).is_err());
    }

    proptest::proptest! {
        // The divergence rate is a pointwise mean of r - ln r - 1 >= 0, so
        // it must be nonnegative for every pair of positive spectra and
        // exactly zero against itself.
        #[test]
        fn divergence_nonnegative_for_arbitrary_spectra(
            a in proptest::collection::vec(0.01f64..50.0, 16..96),
            scale in 0.02f64..40.0,
        ) {
            let n = a.len();
            let pa = SpectralDensity::from_fn(n, |t| {
                let idx = ((t + std::f64::consts::PI) / std::f64::consts::TAU * n as f64)
                    as usize;
                a[idx.min(n - 1)]
            })
            .unwrap();
            let pb = SpectralDensity::from_fn(n, |t| {
                let idx = ((t + std::f64::consts::PI) / std::f64::consts::TAU * n as f64)
                    as usize;
                scale * a[n - 1 - idx.min(n - 1)]
            })
            .unwrap();
            proptest::prop_assert!(spectral_divergence(&pa, &pb).unwrap() >= 0.0);
            proptest::prop_assert!(spectral_divergence(&pb, &pa).unwrap() >= 0.0);
            proptest::prop_assert_eq!(spectral_divergence(&pa, &pa).unwrap(), 0.0);
        }
    }

    #[test]
    fn violation_scan_flags_only_significant_drops() {
        let mk = |m: usize, rate: f64, se: f64| KeyRateReport {
            m,
            d_ab: rate,
            d_be: 0.0,
            rate_raw: rate,
            rate,
            entropy_bob: 0.0,
            rate_std_err: se,
        };
        // small wiggle within tolerance, then a real drop
        let reports = vec![
            mk(20, 10.0, 0.1),
            mk(21, 9.9, 0.1),
            mk(22, 5.0, 0.1),
            mk(23, 5.5, 0.1),
        ];
        let flags = flag_rate_violations(&reports);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].from_m, 21);
        assert_eq!(flags[0].to_m, 22);
        assert!(flags[0].drop > flags[0].tolerance);
        assert!(flag_rate_violations(&reports[..2]).is_empty());
    }
}
