//! Optimal least-squares recovery of the single-carrier quadratures from the
//! recombined subcarrier observations: covariance assembly (model-driven or
//! sample-driven), the deconvolution kernel linking the two lag scales, the
//! estimator solve, and the error-covariance diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spectral::{spectrum_to_autocorr, AutocorrSequence, SpectralDensity};

/// Relative residual allowed when verifying the estimator solve.
const SOLVE_RESIDUAL_TOL: f64 = 1e-8;
/// Taps smaller than this are trimmed from the deconvolution kernel tail.
const TAP_TRUNCATION: f64 = 1e-10;
/// Floor applied to the denominator spectrum before taking the ratio.
const RATIO_FLOOR: f64 = 1e-9;

/// Symmetric deconvolution kernel sampled at nonnegative integer lags;
/// `taps[g]` is the weight at lag +-g.
#[derive(Debug, Clone, PartialEq)]
pub struct DeconvKernel {
    pub taps: Vec<f64>,
}

impl DeconvKernel {
    /// Unit impulse: identity under lag-domain convolution.
    pub fn impulse() -> Self {
        Self { taps: vec![1.0] }
    }

    /// Kernel value at a signed integer lag (even extension, zero tail).
    pub fn at(&self, lag: i64) -> f64 {
        self.taps.get(lag.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    /// Largest lag carrying a stored tap.
    pub fn max_lag(&self) -> usize {
        self.taps.len().saturating_sub(1)
    }
}

/// Estimator matrix together with the covariances that produced it.
#[derive(Debug, Clone)]
pub struct EstimatorBundle {
    pub xi: DMatrix<f64>,
    pub cov_xx: DMatrix<f64>,
    pub cov_kk: DMatrix<f64>,
    pub cov_xk: DMatrix<f64>,
}

impl EstimatorBundle {
    /// Solves the estimator from a covariance triple and keeps the inputs.
    pub fn from_covariances(
        cov_xx: DMatrix<f64>,
        cov_kk: DMatrix<f64>,
        cov_xk: DMatrix<f64>,
    ) -> Result<Self> {
        let xi = solve_estimator(&cov_xk, &cov_kk)?;
        Ok(Self {
            xi,
            cov_xx,
            cov_kk,
            cov_xk,
        })
    }

    /// Applies the estimator to one observation vector.
    pub fn estimate(&self, kappa: &[f64]) -> Result<Vec<f64>> {
        estimate(&self.xi, kappa)
    }

    /// Error covariance of the estimate and its trace.
    pub fn error_covariance(&self) -> Result<(DMatrix<f64>, f64)> {
        error_covariance(&self.cov_xx, &self.cov_kk, &self.cov_xk)
    }
}

/// Toeplitz source covariance with entries A(|q - t|) from the spectrum.
pub fn build_cov_xx(spectrum: &SpectralDensity, d: usize) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::Parameter("covariance dimension must be >= 1".into()));
    }
    let auto = spectrum_to_autocorr(spectrum, d - 1);
    Ok(DMatrix::from_fn(d, d, |r, c| {
        auto.values[r.abs_diff(c)]
    }))
}

/// Toeplitz observation covariance: lag-g entries are the grid mean of
/// P(theta) * gbar(theta) * cos(g theta), plus noise_variance and the ridge
/// on the diagonal. `gbar` must be sampled on the spectrum's theta grid.
pub fn build_cov_kk(
    spectrum: &SpectralDensity,
    gbar: &[f64],
    noise_variance: f64,
    d: usize,
    reg: f64,
) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::Parameter("covariance dimension must be >= 1".into()));
    }
    if gbar.len() != spectrum.values.len() {
        return Err(Error::Parameter(format!(
            "gain profile has {} samples but the theta grid has {}",
            gbar.len(),
            spectrum.values.len()
        )));
    }
    if noise_variance < 0.0 || !noise_variance.is_finite() {
        return Err(Error::Parameter(format!(
            "noise variance must be finite and >= 0, got {noise_variance}"
        )));
    }
    if reg < 0.0 || !reg.is_finite() {
        return Err(Error::Parameter(format!(
            "ridge must be finite and >= 0, got {reg}"
        )));
    }
    let n = spectrum.values.len() as f64;
    let lag_value = |g: usize| -> f64 {
        spectrum
            .theta
            .iter()
            .zip(&spectrum.values)
            .zip(gbar)
            .map(|((&t, &p), &gv)| p * gv * (g as f64 * t).cos())
            .sum::<f64>()
            / n
    };
    let lags: Vec<f64> = (0..d).map(lag_value).collect();
    Ok(DMatrix::from_fn(d, d, |r, c| {
        let base = lags[r.abs_diff(c)];
        if r == c {
            base + noise_variance + reg
        } else {
            base
        }
    }))
}

/// Zero-phase deconvolution kernel from a spectral ratio: the taps are the
/// cosine-series coefficients of sqrt(numerator / max(denominator, floor)),
/// with the tail trimmed once the taps fall below the truncation threshold.
pub fn derive_tau(
    numerator: &SpectralDensity,
    denominator: &SpectralDensity,
    max_lag: usize,
) -> Result<DeconvKernel> {
    if numerator.values.len() != denominator.values.len() {
        return Err(Error::Parameter(format!(
            "spectra live on different grids ({} vs {} points)",
            numerator.values.len(),
            denominator.values.len()
        )));
    }
    let n = numerator.values.len() as f64;
    let root: Vec<f64> = numerator
        .values
        .iter()
        .zip(&denominator.values)
        .map(|(&p, &q)| (p / q.max(RATIO_FLOOR)).max(0.0).sqrt())
        .collect();
    let mut taps: Vec<f64> = (0..=max_lag)
        .map(|g| {
            numerator
                .theta
                .iter()
                .zip(&root)
                .map(|(&t, &r)| r * (g as f64 * t).cos())
                .sum::<f64>()
                / n
        })
        .collect();
    while taps.len() > 1 && taps.last().is_some_and(|t| t.abs() < TAP_TRUNCATION) {
        taps.pop();
    }
    Ok(DeconvKernel { taps })
}

/// Cross covariance between the carrier-scale source and the recombined
/// observations: entry (q, t) is sum_g tau(g) * target(q - omega*t - g),
/// with the target autocorrelation interpolated at fractional lags.
pub fn build_cov_xk(
    tau: &DeconvKernel,
    target: &AutocorrSequence,
    omega: f64,
    rows: usize,
    cols: usize,
) -> Result<DMatrix<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::Parameter("covariance dimensions must be >= 1".into()));
    }
    if !omega.is_finite() || omega < 1.0 {
        return Err(Error::Parameter(format!(
            "omega must be finite and >= 1, got {omega}"
        )));
    }
    let span = tau.max_lag() as i64;
    Ok(DMatrix::from_fn(rows, cols, |q, t| {
        let base = q as f64 - omega * t as f64;
        (-span..=span)
            .map(|g| tau.at(g) * target.value_at(base - g as f64))
            .sum()
    }))
}

/// Sample covariances with N-1 normalization from column-per-sample
/// matrices; the ridge (auto-scaled to 1e-9 * trace/d when `reg_eps` is
/// zero) is added to the observation block.
pub fn empirical_covariances_from_matrices(
    x: &DMatrix<f64>,
    k: &DMatrix<f64>,
    reg_eps: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = x.ncols();
    if n < 2 || k.ncols() != n {
        return Err(Error::Parameter(format!(
            "need >= 2 paired samples, got {} and {}",
            n,
            k.ncols()
        )));
    }
    if x.nrows() == 0 || k.nrows() == 0 {
        return Err(Error::Parameter("sample vectors must be nonempty".into()));
    }
    if reg_eps < 0.0 || !reg_eps.is_finite() {
        return Err(Error::Parameter(format!(
            "ridge must be finite and >= 0, got {reg_eps}"
        )));
    }
    let center = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let mut c = m.clone();
        for r in 0..c.nrows() {
            let mean = c.row(r).sum() / n as f64;
            c.row_mut(r).iter_mut().for_each(|v| *v -= mean);
        }
        c
    };
    let xc = center(x);
    let kc = center(k);
    let norm = 1.0 / (n as f64 - 1.0);
    let cov_xx = (&xc * xc.transpose()) * norm;
    let cov_xk = (&xc * kc.transpose()) * norm;
    let mut cov_kk = (&kc * kc.transpose()) * norm;
    let dk = k.nrows();
    let ridge = if reg_eps == 0.0 {
        1e-9 * cov_kk.trace() / dk as f64
    } else {
        reg_eps
    };
    for i in 0..dk {
        cov_kk[(i, i)] += ridge;
    }
    Ok((cov_xx, cov_kk, cov_xk))
}

/// Sample covariances from one vector per sample; see
/// [`empirical_covariances_from_matrices`] for the normalization and ridge.
pub fn empirical_covariances(
    x_samples: &[Vec<f64>],
    k_samples: &[Vec<f64>],
    reg_eps: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = x_samples.len();
    if n < 2 || k_samples.len() != n {
        return Err(Error::Parameter(format!(
            "need >= 2 paired samples, got {} and {}",
            n,
            k_samples.len()
        )));
    }
    let dx = x_samples[0].len();
    let dk = k_samples[0].len();
    if dx == 0 || dk == 0 {
        return Err(Error::Parameter("sample vectors must be nonempty".into()));
    }
    if x_samples.iter().any(|s| s.len() != dx) || k_samples.iter().any(|s| s.len() != dk) {
        return Err(Error::Parameter("ragged sample set".into()));
    }
    let x = DMatrix::from_fn(dx, n, |r, c| x_samples[c][r]);
    let k = DMatrix::from_fn(dk, n, |r, c| k_samples[c][r]);
    empirical_covariances_from_matrices(&x, &k, reg_eps)
}

/// Solves xi * cov_kk = cov_xk through the Cholesky factor of cov_kk and
/// verifies the relative residual; the observation covariance is never
/// inverted explicitly.
pub fn solve_estimator(cov_xk: &DMatrix<f64>, cov_kk: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov_kk.is_square() {
        return Err(Error::Parameter(
            "observation covariance must be square".into(),
        ));
    }
    if cov_xk.ncols() != cov_kk.nrows() {
        return Err(Error::Parameter(format!(
            "cross covariance is {}x{} but the observation covariance is {}x{}",
            cov_xk.nrows(),
            cov_xk.ncols(),
            cov_kk.nrows(),
            cov_kk.ncols()
        )));
    }
    let chol = cov_kk.clone().cholesky().ok_or_else(|| {
        let min_eig = SymmetricEigen::new(cov_kk.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        Error::Numerical(format!(
            "observation covariance is not positive definite (min eigenvalue {min_eig:.3e}); \
             raise the ridge"
        ))
    })?;
    // cov_kk is symmetric, so solving cov_kk * xi^T = cov_xk^T gives xi.
    let xi = chol.solve(&cov_xk.transpose()).transpose();
    let residual = (&xi * cov_kk - cov_xk).norm();
    let scale = cov_xk.norm().max(f64::MIN_POSITIVE);
    if residual / scale > SOLVE_RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "estimator solve residual {:.3e} exceeds {:.1e}",
            residual / scale,
            SOLVE_RESIDUAL_TOL
        )));
    }
    Ok(xi)
}

/// Applies the estimator matrix to one observation vector.
pub fn estimate(xi: &DMatrix<f64>, kappa: &[f64]) -> Result<Vec<f64>> {
    if kappa.len() != xi.ncols() {
        return Err(Error::Parameter(format!(
            "observation has length {} but the estimator expects {}",
            kappa.len(),
            xi.ncols()
        )));
    }
    Ok((0..xi.nrows())
        .map(|r| (0..xi.ncols()).map(|c| xi[(r, c)] * kappa[c]).sum())
        .collect())
}

/// Error covariance of the optimal estimate,
/// cov_xx - cov_xk * cov_kk^-1 * cov_xk^T, symmetrized, with its trace.
pub fn error_covariance(
    cov_xx: &DMatrix<f64>,
    cov_kk: &DMatrix<f64>,
    cov_xk: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    if cov_xx.nrows() != cov_xk.nrows() {
        return Err(Error::Parameter(format!(
            "source covariance is {}x{} but the cross covariance has {} rows",
            cov_xx.nrows(),
            cov_xx.ncols(),
            cov_xk.nrows()
        )));
    }
    let chol = cov_kk.clone().cholesky().ok_or_else(|| {
        Error::Numerical("observation covariance is not positive definite".into())
    })?;
    let solved = chol.solve(&cov_xk.transpose());
    let raw = cov_xx - cov_xk * solved;
    let sym = (&raw + raw.transpose()) * 0.5;
    let trace = sym.trace();
    Ok((sym, trace))
}
