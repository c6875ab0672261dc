//! Gaussian sub-channel model: additive complex noise behind a complex
//! transmittance, homodyne/heterodyne readout, and the band-limited gate
//! transfer used by the analytic covariance builders.

use num_complex::Complex64;

use crate::config::TRANSMITTANCE_MAX;
use crate::error::{Error, Result};
use crate::rng::CarrierRng;

/// One Gaussian sub-channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubChannel {
    pub transmittance: Complex64,
    pub noise_variance: f64,
}

impl SubChannel {
    pub fn new(transmittance: Complex64, noise_variance: f64) -> Result<Self> {
        let ch = SubChannel {
            transmittance,
            noise_variance,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        const SLACK: f64 = 1e-12;
        let ok = |v: f64| (-SLACK..=TRANSMITTANCE_MAX + SLACK).contains(&v);
        if !ok(self.transmittance.re) || !ok(self.transmittance.im) {
            return Err(Error::Parameter(format!(
                "transmittance {} outside [0, 1/sqrt(2)] per quadrature",
                self.transmittance
            )));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::Parameter(format!(
                "noise variance must be >= 0, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }
}

/// The m sub-channels granted to one user.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalChannel {
    pub subchannels: Vec<SubChannel>,
}

impl LogicalChannel {
    pub fn new(subchannels: Vec<SubChannel>) -> Result<Self> {
        if subchannels.is_empty() {
            return Err(Error::Parameter("logical channel needs >= 1 sub-channel".into()));
        }
        for ch in &subchannels {
            ch.validate()?;
        }
        Ok(LogicalChannel { subchannels })
    }

    /// Uniform channel: all m sub-channels share one transmittance/noise.
    pub fn uniform(m: usize, transmittance: Complex64, noise_variance: f64) -> Result<Self> {
        LogicalChannel::new(vec![SubChannel::new(transmittance, noise_variance)?; m])
    }

    pub fn len(&self) -> usize {
        self.subchannels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subchannels.is_empty()
    }
}

/// out_i = T_i * in_i + Delta_i with circular complex Gaussian noise of the
/// sub-channel's per-quadrature variance. Input length must equal m.
pub fn transmit(
    subcarriers: &[Complex64],
    chan: &LogicalChannel,
    rng: &mut CarrierRng,
) -> Result<Vec<Complex64>> {
    if subcarriers.len() != chan.len() {
        return Err(Error::Parameter(format!(
            "subcarrier count {} != sub-channel count {}",
            subcarriers.len(),
            chan.len()
        )));
    }
    Ok(subcarriers
        .iter()
        .zip(&chan.subchannels)
        .map(|(s, ch)| ch.transmittance * s + rng.complex_normal(ch.noise_variance))
        .collect())
}

/// Readout model applied to the noisy subcarriers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measurement {
    /// Keep the x quadrature only.
    HomodyneX,
    /// Keep both quadratures; `detection_variance` is added to each.
    Heterodyne { detection_variance: f64 },
}

/// Measurement result: real samples for homodyne, complex for heterodyne.
#[derive(Debug, Clone, PartialEq)]
pub enum Measured {
    X(Vec<f64>),
    Both(Vec<Complex64>),
}

pub fn measure(noisy: &[Complex64], mode: Measurement, rng: &mut CarrierRng) -> Result<Measured> {
    match mode {
        Measurement::HomodyneX => Ok(Measured::X(noisy.iter().map(|z| z.re).collect())),
        Measurement::Heterodyne { detection_variance } => {
            if !(detection_variance >= 0.0) {
                return Err(Error::Parameter(format!(
                    "detection variance must be >= 0, got {detection_variance}"
                )));
            }
            if detection_variance == 0.0 {
                return Ok(Measured::Both(noisy.to_vec()));
            }
            Ok(Measured::Both(
                noisy
                    .iter()
                    .map(|z| z + rng.complex_normal(detection_variance))
                    .collect(),
            ))
        }
    }
}

/// Band-limited transfer: T inside |theta| <= pi/omega (boundary included),
/// zero outside.
pub fn gate_transfer(theta: f64, transmittance: Complex64, omega: f64) -> Complex64 {
    if theta.abs() <= std::f64::consts::PI / omega {
        transmittance
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Squared gate magnitude G(theta) = gate(theta) * conj(gate(-theta)); for
/// the symmetric gate this is |T|^2 inside the band, zero outside.
pub fn g_function(theta: f64, transmittance: Complex64, omega: f64) -> f64 {
    let fwd = gate_transfer(theta, transmittance, omega);
    let rev = gate_transfer(-theta, transmittance, omega);
    (fwd * rev.conj()).re
}

/// Carrier-level aggregated coefficient: the mean of the sub-channel
/// transmittances (the flat unitary spreading weight applied to each).
pub fn aggregate_coefficient(chan: &LogicalChannel) -> Complex64 {
    let sum: Complex64 = chan.subchannels.iter().map(|c| c.transmittance).sum();
    sum / chan.len() as f64
}
