//! Unitary discrete Fourier transforms and the spectral-density /
//! autocorrelation duality used by the analytic covariance builders.
//!
//! Conventions: both transform directions carry 1/sqrt(n) so they are
//! unitary; spectra live on a uniform theta grid over [-pi, pi); the
//! autocorrelation of a real even spectrum is the cosine quadrature
//! A(g) = (1/2pi) integral P(theta) cos(g theta) dtheta.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};

// --- transforms ---------------------------------------------------------

/// Planned unitary transform pair for one size; reuse it in hot loops.
pub struct UnitaryFft {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
    n: usize,
}

impl UnitaryFft {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("transform size must be >= 1".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(UnitaryFft {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
            n,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    fn apply(&self, plan: &Arc<dyn Fft<f64>>, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.n {
            return Err(Error::Parameter(format!(
                "expected length {}, got {}",
                self.n,
                x.len()
            )));
        }
        let mut buf = x.to_vec();
        plan.process(&mut buf);
        for v in &mut buf {
            *v *= self.scale;
        }
        Ok(buf)
    }

    /// X_k = n^{-1/2} sum_j x_j exp(-2 pi i j k / n).
    pub fn dft(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.apply(&self.forward, x)
    }

    /// x_j = n^{-1/2} sum_k X_k exp(+2 pi i j k / n).
    pub fn idft(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.apply(&self.inverse, x)
    }
}

/// One-shot unitary DFT.
pub fn unitary_dft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    UnitaryFft::new(x.len())?.dft(x)
}

/// One-shot unitary inverse DFT.
pub fn unitary_idft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    UnitaryFft::new(x.len())?.idft(x)
}

// --- spectra and autocorrelations ---------------------------------------

/// Uniform grid over [-pi, pi) with `n` points.
pub fn theta_grid(n: usize) -> Vec<f64> {
    let step = std::f64::consts::TAU / n as f64;
    (0..n)
        .map(|k| -std::f64::consts::PI + k as f64 * step)
        .collect()
}

/// Real nonnegative spectral density tabulated on a theta grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    pub theta: Vec<f64>,
    pub values: Vec<f64>,
    /// Mean magnitude clamped away when a truncated expansion went
    /// negative; zero for spectra built directly from nonnegative data.
    pub clamped_mass: f64,
}

impl SpectralDensity {
    /// Tabulate `f` on a fresh grid.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter("spectral grid needs >= 2 points".into()));
        }
        let theta = theta_grid(n);
        let values = theta.iter().map(|&t| f(t)).collect::<Vec<_>>();
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Parameter(
                "spectral density must be finite and nonnegative".into(),
            ));
        }
        Ok(SpectralDensity {
            theta,
            values,
            clamped_mass: 0.0,
        })
    }

    /// Constant (white) spectrum at the given level.
    pub fn white(level: f64, n: usize) -> Result<Self> {
        Self::from_fn(n, |_| level)
    }

    /// (1/2pi) integral of the density: the lag-zero autocorrelation.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Autocorrelation sequence A(0), A(1), ..., even symmetric in the lag and
/// treated as zero beyond the stored support.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrSequence {
    pub values: Vec<f64>,
}

impl AutocorrSequence {
    pub fn new(values: Vec<f64>) -> Self {
        AutocorrSequence { values }
    }

    pub fn max_lag(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    /// Value at a (possibly fractional, possibly negative) lag: even
    /// symmetry, linear interpolation between stored lags, zero outside.
    pub fn value_at(&self, lag: f64) -> f64 {
        let g = lag.abs();
        let i0 = g.floor() as usize;
        let frac = g - g.floor();
        let a0 = self.values.get(i0).copied().unwrap_or(0.0);
        if frac == 0.0 {
            return a0;
        }
        let a1 = self.values.get(i0 + 1).copied().unwrap_or(0.0);
        a0 + frac * (a1 - a0)
    }
}

/// A(g) = (1/2pi) integral P(theta) cos(g theta) dtheta for g = 0..=max_lag,
/// by trapezoid quadrature on the periodic grid (which reduces to the grid
/// mean and is exact for band-limited integrands).
pub fn spectrum_to_autocorr(spectrum: &SpectralDensity, max_lag: usize) -> AutocorrSequence {
    let n = spectrum.values.len() as f64;
    let values = (0..=max_lag)
        .map(|g| {
            spectrum
                .theta
                .iter()
                .zip(&spectrum.values)
                .map(|(&t, &p)| p * (g as f64 * t).cos())
                .sum::<f64>()
                / n
        })
        .collect();
    AutocorrSequence::new(values)
}

/// P(theta) = A(0) + 2 sum_{g>=1} A(g) cos(g theta), truncated at the stored
/// support, clamped at zero; the clamped mean magnitude is recorded on the
/// returned density.
pub fn autocorr_to_spectrum(autocorr: &AutocorrSequence, theta_points: usize) -> Result<SpectralDensity> {
    if theta_points < 2 {
        return Err(Error::Parameter("spectral grid needs >= 2 points".into()));
    }
    if autocorr.values.is_empty() {
        return Err(Error::Parameter("autocorrelation must not be empty".into()));
    }
    let theta = theta_grid(theta_points);
    let mut clamped = 0.0;
    let values = theta
        .iter()
        .map(|&t| {
            let mut p = autocorr.values[0];
            for (g, &a) in autocorr.values.iter().enumerate().skip(1) {
                p += 2.0 * a * (g as f64 * t).cos();
            }
            if p < 0.0 {
                clamped += -p;
                0.0
            } else {
                p
            }
        })
        .collect::<Vec<_>>();
    Ok(SpectralDensity {
        theta,
        values,
        clamped_mass: clamped / theta_points as f64,
    })
}

/// Subcarrier-domain view of a carrier autocorrelation: A'(g) = A(omega g),
/// fractional lags linearly interpolated. Requires omega >= 1.
pub fn decimate_autocorr(autocorr: &AutocorrSequence, omega: f64) -> Result<AutocorrSequence> {
    if !omega.is_finite() || omega < 1.0 {
        return Err(Error::Parameter(format!(
            "decimation factor must be finite and >= 1, got {omega}"
        )));
    }
    let max = autocorr.max_lag() as f64;
    let out_len = (max / omega).floor() as usize + 1;
    Ok(AutocorrSequence::new(
        (0..out_len)
            .map(|g| autocorr.value_at(omega * g as f64))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn dft_of_unit_impulse_is_flat() {
        let x = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let y = unitary_dft(&x).unwrap();
        for v in y {
            assert_abs_diff_eq!(v.re, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn dft_of_constant_concentrates_at_dc() {
        let x = vec![c(1.0, 0.0); 4];
        let y = unitary_dft(&x).unwrap();
        assert_abs_diff_eq!(y[0].re, 2.0, epsilon = 1e-12);
        for v in &y[1..] {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn idft_inverts_dft_to_machine_precision() {
        let x: Vec<Complex64> = (0..33).map(|i| c(i as f64, -(i as f64) / 3.0)).collect();
        let y = unitary_idft(&unitary_dft(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(unitary_dft(&[]).is_err());
        assert!(UnitaryFft::new(0).is_err());
    }

    proptest! {
        // Unitarity: the transform preserves the l2 norm.
        #[test]
        fn parseval_holds_for_random_vectors(
            raw in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..96)
        ) {
            let x: Vec<Complex64> = raw.iter().map(|&(re, im)| c(re, im)).collect();
            let y = unitary_dft(&x).unwrap();
            let nx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let ny: f64 = y.iter().map(|v| v.norm_sqr()).sum();
            prop_assert!((nx - ny).abs() <= 1e-10 * nx.max(1.0));
        }
    }

    #[test]
    fn white_spectrum_autocorr_is_impulse() {
        let p = SpectralDensity::white(225.0, 256).unwrap();
        let a = spectrum_to_autocorr(&p, 5);
        assert_abs_diff_eq!(a.values[0], 225.0, epsilon = 1e-10);
        for g in 1..=5 {
            assert!(a.values[g].abs() < 1e-10, "lag {g}: {}", a.values[g]);
        }
    }

    #[test]
    fn raised_cosine_spectrum_has_half_weight_at_lag_one() {
        let p = SpectralDensity::from_fn(512, |t| 1.0 + t.cos()).unwrap();
        let a = spectrum_to_autocorr(&p, 3);
        assert_abs_diff_eq!(a.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.values[1], 0.5, epsilon = 1e-12);
        assert!(a.values[2].abs() < 1e-12);
        assert!(a.values[3].abs() < 1e-12);
    }

    #[test]
    fn autocorr_to_spectrum_round_trips() {
        let a = AutocorrSequence::new(vec![1.0, 0.5]);
        let p = autocorr_to_spectrum(&a, 128).unwrap();
        assert_eq!(p.clamped_mass, 0.0);
        let back = spectrum_to_autocorr(&p, 1);
        assert_abs_diff_eq!(back.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(back.values[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn clamp_mass_is_tiny_for_valid_autocorrelations() {
        // Poisson kernel: A(g) = r^g is a genuine autocorrelation.
        let r: f64 = 0.5;
        let a = AutocorrSequence::new((0..40).map(|g| r.powi(g)).collect());
        let p = autocorr_to_spectrum(&a, 512).unwrap();
        assert!(
            p.clamped_mass < 1e-6 * p.mean(),
            "clamped {} vs mean {}",
            p.clamped_mass,
            p.mean()
        );
    }

    #[test]
    fn clamp_mass_is_reported_for_invalid_expansions() {
        // A(1) > A(0)/2 forces negative lobes.
        let a = AutocorrSequence::new(vec![1.0, 0.9]);
        let p = autocorr_to_spectrum(&a, 512).unwrap();
        assert!(p.clamped_mass > 0.0);
        assert!(p.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn quadrature_error_shrinks_with_grid_refinement() {
        // Poisson kernel has the closed form A(g) = r^|g|; the trapezoid
        // error is the aliasing tail, which at least halves (here: far
        // more) when the grid doubles.
        let r: f64 = 0.6;
        let p = |t: f64| (1.0 - r * r) / (1.0 - 2.0 * r * t.cos() + r * r);
        let err = |n: usize| {
            let s = SpectralDensity::from_fn(n, p).unwrap();
            let a = spectrum_to_autocorr(&s, 4);
            (0..=4)
                .map(|g| (a.values[g] - r.powi(g as i32)).abs())
                .fold(0.0f64, f64::max)
        };
        let coarse = err(16);
        let fine = err(32);
        assert!(coarse > 0.0);
        assert!(fine <= coarse / 2.0, "coarse {coarse}, fine {fine}");
    }

    #[test]
    fn decimation_by_two_skips_odd_lags() {
        let a = AutocorrSequence::new(vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
        let d = decimate_autocorr(&a, 2.0).unwrap();
        assert_eq!(d.values, vec![1.0, 0.25, 0.0625]);
    }

    #[test]
    fn fractional_decimation_interpolates() {
        let a = AutocorrSequence::new(vec![1.0, 0.5, 0.25, 0.125]);
        let d = decimate_autocorr(&a, 1.5).unwrap();
        assert_abs_diff_eq!(d.values[0], 1.0, epsilon = 1e-15);
        // lag 1.5 sits halfway between 0.5 and 0.25
        assert_abs_diff_eq!(d.values[1], 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(d.values[2], 0.125, epsilon = 1e-15);
    }

    #[test]
    fn unit_decimation_is_identity() {
        let a = AutocorrSequence::new(vec![3.0, 2.0, 1.0]);
        let d = decimate_autocorr(&a, 1.0).unwrap();
        assert_eq!(d.values, a.values);
    }

    #[test]
    fn decimation_below_one_is_rejected() {
        let a = AutocorrSequence::new(vec![1.0]);
        assert!(decimate_autocorr(&a, 0.5).is_err());
        assert!(decimate_autocorr(&a, f64::NAN).is_err());
    }

    #[test]
    fn value_at_handles_symmetry_and_tail() {
        let a = AutocorrSequence::new(vec![1.0, 0.5]);
        assert_eq!(a.value_at(-1.0), 0.5);
        assert_eq!(a.value_at(0.5), 0.75);
        // halfway into the zero tail
        assert_eq!(a.value_at(1.5), 0.25);
        assert_eq!(a.value_at(7.0), 0.0);
    }
}
