//! Gaussian quadrature inference over the measured subcarriers: the cosine
//! window, the discrete windowed inverse-transform estimate, the max
//! squared-magnitude deviation it is tuned against, and the Lagrangian-form
//! autocorrelation diagnostic.

use num_complex::Complex64;

use crate::channel::LogicalChannel;
use crate::config::WindowSpec;
use crate::error::{Error, Result};
use crate::spectral::{theta_grid, UnitaryFft};

/// Windowed inference result for one subcarrier block.
#[derive(Debug, Clone, PartialEq)]
pub struct GqiOutput {
    /// Complex inverse-transform estimate, length m.
    pub estimate: Vec<Complex64>,
    /// The window that produced it.
    pub window: Vec<f64>,
    /// Max squared-magnitude deviation achieved against the reference
    /// (populated by the optimizer; zero when unknown).
    pub epsilon: f64,
}

/// beta_i = 1 + sum_y C_y cos(y * 2 pi i / m) for i = 0..m.
pub fn beta_window(spec: &WindowSpec, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Parameter("window length must be >= 1".into()));
    }
    let step = std::f64::consts::TAU / m as f64;
    Ok((0..m)
        .map(|i| {
            let q = i as f64 * step;
            1.0 + spec
                .coeffs
                .iter()
                .enumerate()
                .map(|(y, c)| c * ((y as f64 + 1.0) * q).cos())
                .sum::<f64>()
        })
        .collect())
}

/// Windowed unitary inverse transform of a measured block.
///
/// By the circular-convolution theorem this equals
/// sqrt(m)^-1 * (idft(measured) (*) idft(window)); the pointwise form keeps
/// the normalization such that window == 1 returns exactly idft(measured).
pub fn dgqi_estimate(measured: &[f64], window: &[f64]) -> Result<Vec<Complex64>> {
    if measured.len() != window.len() {
        return Err(Error::Parameter(format!(
            "measured length {} != window length {}",
            measured.len(),
            window.len()
        )));
    }
    let windowed: Vec<Complex64> = measured
        .iter()
        .zip(window)
        .map(|(&x, &b)| Complex64::new(x * b, 0.0))
        .collect();
    UnitaryFft::new(windowed.len())?.idft(&windowed)
}

/// Worst squared-magnitude deviation max_j | ref_j^2 - proc_j^2 |.
pub fn epsilon_max(reference: &[f64], processed: &[f64]) -> Result<f64> {
    if reference.len() != processed.len() {
        return Err(Error::Parameter(format!(
            "reference length {} != processed length {}",
            reference.len(),
            processed.len()
        )));
    }
    Ok(reference
        .iter()
        .zip(processed)
        .map(|(&r, &p)| (r * r - p * p).abs())
        .fold(0.0, f64::max))
}

/// Exhaustive search over the coefficient grid (cartesian product across
/// window orders) for the window minimizing `epsilon_max` between the
/// reference block and the windowed measurement. Ties prefer the smaller
/// coefficient norm, then lexicographic order, so the zero window wins when
/// nothing improves on it.
pub fn optimize_window(
    measured: &[f64],
    reference: &[f64],
    order: usize,
    grid: &[f64],
) -> Result<(WindowSpec, f64)> {
    if measured.len() != reference.len() {
        return Err(Error::Parameter(format!(
            "measured length {} != reference length {}",
            measured.len(),
            reference.len()
        )));
    }
    if order > 0 && grid.is_empty() {
        return Err(Error::Parameter(
            "coefficient grid must not be empty for order >= 1".into(),
        ));
    }
    let m = measured.len();
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let mut idx = vec![0usize; order];
    loop {
        let coeffs: Vec<f64> = idx.iter().map(|&k| grid[k]).collect();
        let spec = WindowSpec {
            coeffs: coeffs.clone(),
        };
        let beta = beta_window(&spec, m)?;
        let processed: Vec<f64> = measured.iter().zip(&beta).map(|(&x, &b)| x * b).collect();
        let eps = epsilon_max(reference, &processed)?;
        let norm = coeffs.iter().map(|c| c * c).sum::<f64>();
        let better = match &best {
            None => true,
            Some((be, bn, bc)) => {
                eps < *be
                    || (eps == *be && norm < *bn)
                    || (eps == *be && norm == *bn && coeffs < *bc)
            }
        };
        if better {
            best = Some((eps, norm, coeffs));
        }
        // advance the mixed-radix counter
        let mut pos = 0;
        loop {
            if pos == order {
                let (eps, _, coeffs) = best.expect("at least one candidate");
                return Ok((WindowSpec { coeffs }, eps));
            }
            idx[pos] += 1;
            if idx[pos] < grid.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Lagrangian-form autocorrelation diagnostic for sub-channel `i` against
/// sub-channel 0: the mean over the theta grid of
/// | gate_i(theta)^2 exp(i g theta) / (gate_0(theta)^2 lambda0 cos theta) |,
/// with points where |cos theta| < 1e-6 excised. Under the magnitude
/// convention the lag enters through a unit-modulus phase only.
pub fn lagrangian_autocorr(
    i: usize,
    _g: i64,
    chan: &LogicalChannel,
    omega: f64,
    lambda0: f64,
    theta_points: usize,
) -> Result<f64> {
    if i >= chan.len() {
        return Err(Error::Parameter(format!(
            "sub-channel index {i} out of range (m = {})",
            chan.len()
        )));
    }
    if !omega.is_finite() || omega < 1.0 {
        return Err(Error::Parameter(format!(
            "omega must be finite and >= 1, got {omega}"
        )));
    }
    if !lambda0.is_finite() || lambda0 == 0.0 {
        return Err(Error::Parameter("lambda0 must be finite and nonzero".into()));
    }
    if theta_points < 16 {
        return Err(Error::Parameter("theta grid needs >= 16 points".into()));
    }
    const COS_GUARD: f64 = 1e-6;
    let band = std::f64::consts::PI / omega;
    let ti = chan.subchannels[i].transmittance.norm_sqr();
    let t0 = chan.subchannels[0].transmittance.norm_sqr();
    let mut sum = 0.0;
    for &theta in &theta_grid(theta_points) {
        if theta.abs() > band || theta.cos().abs() < COS_GUARD {
            continue;
        }
        if ti == 0.0 {
            continue;
        }
        let den = t0 * (lambda0 * theta.cos()).abs();
        if den == 0.0 {
            return Err(Error::Numerical(
                "reference sub-channel gate vanishes inside the band".into(),
            ));
        }
        sum += ti / den;
    }
    Ok(sum / theta_points as f64)
}
