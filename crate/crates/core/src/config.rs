//! Run configuration: the flat key-value config format, defaults for the
//! demo profile and validation of the model invariants.

use num_complex::Complex64;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Upper bound for each transmittance quadrature component.
pub const TRANSMITTANCE_MAX: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Covariance construction mode for the estimator stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovMode {
    /// Sample covariances from the simulated trials (default).
    Empirical,
    /// Closed-form spectral construction, kept for cross-validation.
    Analytic,
}

impl FromStr for CovMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(CovMode::Empirical),
            "analytic" => Ok(CovMode::Analytic),
            other => Err(Error::Config(format!(
                "cov_mode must be 'empirical' or 'analytic', got '{other}'"
            ))),
        }
    }
}

impl fmt::Display for CovMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovMode::Empirical => write!(f, "empirical"),
            CovMode::Analytic => write!(f, "analytic"),
        }
    }
}

/// Cosine window for the discrete Gaussian quadrature inference block:
/// beta_i = 1 + sum_y coeffs[y-1] * cos(y * 2*pi*i / m).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowSpec {
    pub coeffs: Vec<f64>,
}

impl WindowSpec {
    /// Window order P (zero means the identity window beta == 1).
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Number of single carriers.
    pub d: usize,
    /// Subcarriers (sub-channels) per carrier.
    pub m: usize,
    /// Single-carrier modulation variance per quadrature.
    pub sigma_w0_sq: f64,
    /// Subcarrier modulation variance per quadrature.
    pub sigma_w_sq: f64,
    /// Sub-channel noise variance per quadrature.
    pub sigma_n_sq: f64,
    /// Sub-channel transmittances, length m.
    pub transmittances: Vec<Complex64>,
    /// RNG seed; trials derive independent sub-streams from it.
    pub seed: u64,
    /// Monte Carlo trials.
    pub trials: usize,
    /// Inference window.
    pub window: WindowSpec,
    /// Spectral quadrature grid size (even, >= 16).
    pub theta_points: usize,
    /// Ridge added to the observation covariance diagonal; 0 selects the
    /// automatic relative rule 1e-9 * trace / d.
    pub reg_eps: f64,
    /// Covariance construction mode.
    pub cov_mode: CovMode,
    /// Normalization constant of the Lagrangian autocorrelation diagnostic.
    pub lambda0: f64,
    /// White excess-noise floor granted to the eavesdropper's channel.
    pub eve_excess_noise: f64,
    /// Detection noise per quadrature added by heterodyne measurement.
    pub detection_variance: f64,
}

impl SimConfig {
    /// Demo profile: the numeric working point used throughout the test
    /// corpus (variances 225/64/16, unit-magnitude transmittance).
    pub fn demo() -> Self {
        let t = Complex64::new(TRANSMITTANCE_MAX, TRANSMITTANCE_MAX);
        SimConfig {
            d: 1000,
            m: 20,
            sigma_w0_sq: 225.0,
            sigma_w_sq: 64.0,
            sigma_n_sq: 16.0,
            transmittances: vec![t; 20],
            seed: 0x5eed_cafe,
            trials: 10_000,
            window: WindowSpec::default(),
            theta_points: 4096,
            reg_eps: 0.0,
            cov_mode: CovMode::Empirical,
            lambda0: 1.0,
            eve_excess_noise: 16.0,
            detection_variance: 0.0,
        }
    }

    /// Variance ratio between single-carrier and subcarrier modulation.
    pub fn omega(&self) -> f64 {
        self.sigma_w0_sq / self.sigma_w_sq
    }

    /// Check every model invariant; returns the config untouched on success.
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("d must be >= 1".into()));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be >= 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(self.sigma_w0_sq > 0.0) {
            return Err(Error::Config("sigma_w0_sq must be positive".into()));
        }
        if !(self.sigma_w_sq > 0.0) {
            return Err(Error::Config("sigma_w_sq must be positive".into()));
        }
        if !(self.sigma_w_sq < self.sigma_w0_sq) {
            return Err(Error::Config(format!(
                "sigma_w_sq ({}) must be strictly below sigma_w0_sq ({})",
                self.sigma_w_sq, self.sigma_w0_sq
            )));
        }
        if self.sigma_n_sq < 0.0 {
            return Err(Error::Config("sigma_n_sq must be >= 0".into()));
        }
        if self.transmittances.len() != self.m {
            return Err(Error::Config(format!(
                "expected {} transmittances, got {}",
                self.m,
                self.transmittances.len()
            )));
        }
        const SLACK: f64 = 1e-12;
        for (i, t) in self.transmittances.iter().enumerate() {
            let ok = |v: f64| (-SLACK..=TRANSMITTANCE_MAX + SLACK).contains(&v);
            if !ok(t.re) || !ok(t.im) {
                return Err(Error::Config(format!(
                    "transmittance {i} = {t} outside [0, 1/sqrt(2)] per quadrature"
                )));
            }
        }
        if self.theta_points < 16 || self.theta_points % 2 != 0 {
            return Err(Error::Config(format!(
                "theta_points must be even and >= 16, got {}",
                self.theta_points
            )));
        }
        if self.reg_eps < 0.0 {
            return Err(Error::Config("reg_eps must be >= 0".into()));
        }
        if self.eve_excess_noise < 0.0 {
            return Err(Error::Config("eve_excess_noise must be >= 0".into()));
        }
        if self.detection_variance < 0.0 {
            return Err(Error::Config("detection_variance must be >= 0".into()));
        }
        if !self.lambda0.is_finite() || self.lambda0 == 0.0 {
            return Err(Error::Config("lambda0 must be finite and nonzero".into()));
        }
        Ok(())
    }

    /// Parse the flat `key = value` format from a string. Unknown keys are
    /// rejected so config drift shows up as an error rather than silence.
    pub fn from_str(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::demo();
        // Keys that must appear; optional extras carry defaults.
        let required: &[&str] = &[
            "d",
            "m",
            "sigma_w0_sq",
            "sigma_w_sq",
            "sigma_n_sq",
            "transmittances",
            "seed",
            "trials",
            "window_coeffs",
            "theta_points",
            "reg_eps",
            "cov_mode",
            "lambda0",
        ];
        let optional: &[&str] = &["eve_excess_noise", "detection_variance"];
        let mut seen = BTreeSet::new();
        let mut eve_set = false;
        let mut raw_transmittances = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !required.contains(&key) && !optional.contains(&key) {
                return Err(Error::Config(format!("unknown key '{key}'")));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("duplicate key '{key}'")));
            }
            match key {
                "d" => cfg.d = parse_num(key, value)?,
                "m" => cfg.m = parse_num(key, value)?,
                "sigma_w0_sq" => cfg.sigma_w0_sq = parse_num(key, value)?,
                "sigma_w_sq" => cfg.sigma_w_sq = parse_num(key, value)?,
                "sigma_n_sq" => cfg.sigma_n_sq = parse_num(key, value)?,
                "transmittances" => raw_transmittances = Some(value.to_string()),
                "seed" => cfg.seed = parse_num(key, value)?,
                "trials" => cfg.trials = parse_num(key, value)?,
                "window_coeffs" => {
                    cfg.window = WindowSpec {
                        coeffs: parse_list(key, value)?,
                    }
                }
                "theta_points" => cfg.theta_points = parse_num(key, value)?,
                "reg_eps" => cfg.reg_eps = parse_num(key, value)?,
                "cov_mode" => cfg.cov_mode = value.parse()?,
                "lambda0" => cfg.lambda0 = parse_num(key, value)?,
                "eve_excess_noise" => {
                    cfg.eve_excess_noise = parse_num(key, value)?;
                    eve_set = true;
                }
                "detection_variance" => cfg.detection_variance = parse_num(key, value)?,
                _ => unreachable!(),
            }
        }

        for key in required {
            if !seen.contains(*key) {
                return Err(Error::Config(format!("missing required key '{key}'")));
            }
        }
        if !eve_set {
            cfg.eve_excess_noise = cfg.sigma_n_sq;
        }
        let raw = raw_transmittances.expect("transmittances checked above");
        cfg.transmittances = parse_transmittances(&raw, cfg.m)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and parse a config file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        SimConfig::from_str(&text)
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{value}'")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| parse_num(key, v.trim()))
        .collect()
}

/// Transmittances are written as `re,im` pairs separated by semicolons.
/// A single pair broadcasts to all m sub-channels.
fn parse_transmittances(value: &str, m: usize) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    for pair in value.split(';') {
        let pair = pair.trim();
        if pair.is_empty() {
            continue;
        }
        let (re, im) = pair.split_once(',').ok_or_else(|| {
            Error::Config(format!("transmittance '{pair}' must be 're,im'"))
        })?;
        out.push(Complex64::new(
            parse_num("transmittances", re.trim())?,
            parse_num("transmittances", im.trim())?,
        ));
    }
    match out.len() {
        0 => Err(Error::Config("transmittances must not be empty".into())),
        1 => Ok(vec![out[0]; m]),
        n if n == m => Ok(out),
        n => Err(Error::Config(format!(
            "expected 1 or {m} transmittance pairs, got {n}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_text() -> String {
        [
            "# demo profile",
            "d = 1000",
            "m = 20",
            "sigma_w0_sq = 225",
            "sigma_w_sq = 64",
            "sigma_n_sq = 16",
            "transmittances = 0.7071067811865476,0.7071067811865476",
            "seed = 7",
            "trials = 100",
            "window_coeffs =",
            "theta_points = 4096",
            "reg_eps = 0",
            "cov_mode = empirical",
            "lambda0 = 1",
        ]
        .join("\n")
    }

    #[test]
    fn parses_demo_profile() {
        let cfg = SimConfig::from_str(&demo_text()).unwrap();
        assert_eq!(cfg.d, 1000);
        assert_eq!(cfg.m, 20);
        assert_eq!(cfg.transmittances.len(), 20);
        assert_eq!(cfg.cov_mode, CovMode::Empirical);
        assert_eq!(cfg.window.order(), 0);
        // eve floor defaults to the channel noise when absent
        assert_eq!(cfg.eve_excess_noise, 16.0);
        assert!((cfg.omega() - 3.515625).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_key() {
        let text = format!("{}\nbogus = 3", demo_text());
        let err = SimConfig::from_str(&text).unwrap_err();
        assert!(matches!(err, Error::Config(ref s) if s.contains("bogus")));
    }

    #[test]
    fn rejects_missing_key() {
        let text = demo_text().replace("lambda0 = 1", "");
        let err = SimConfig::from_str(&text).unwrap_err();
        assert!(matches!(err, Error::Config(ref s) if s.contains("lambda0")));
    }

    #[test]
    fn rejects_subcarrier_variance_at_or_above_carrier_variance() {
        let mut cfg = SimConfig::demo();
        cfg.sigma_w_sq = cfg.sigma_w0_sq;
        assert!(cfg.validate().is_err());
        cfg.sigma_w_sq = cfg.sigma_w0_sq + 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_transmittance_outside_bounds() {
        let mut cfg = SimConfig::demo();
        cfg.transmittances[3] = Complex64::new(0.9, 0.0);
        assert!(cfg.validate().is_err());
        cfg.transmittances[3] = Complex64::new(-0.1, 0.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_odd_or_small_theta_grid() {
        let mut cfg = SimConfig::demo();
        cfg.theta_points = 4095;
        assert!(cfg.validate().is_err());
        cfg.theta_points = 8;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_zero_trials() {
        let mut cfg = SimConfig::demo();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn transmittance_list_must_match_m() {
        let text = demo_text().replace(
            "transmittances = 0.7071067811865476,0.7071067811865476",
            "transmittances = 0.5,0.5; 0.4,0.3",
        );
        assert!(SimConfig::from_str(&text).is_err());
    }

    #[test]
    fn explicit_window_and_duplicate_key() {
        let text = demo_text().replace("window_coeffs =", "window_coeffs = 0.5, -0.25");
        let cfg = SimConfig::from_str(&text).unwrap();
        assert_eq!(cfg.window.coeffs, vec![0.5, -0.25]);

        let dup = format!("{}\nseed = 8", demo_text());
        assert!(SimConfig::from_str(&dup).is_err());
    }
}
