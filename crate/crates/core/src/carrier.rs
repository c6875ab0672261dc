//! Carrier-domain value containers.

use num_complex::Complex64;

/// Which side of the multicarrier transform a vector lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarrierDomain {
    /// Single-carrier (message) domain.
    Single,
    /// Subcarrier (transmission) domain.
    Sub,
}

/// A complex Gaussian quadrature vector tagged with its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierVector {
    pub domain: CarrierDomain,
    pub values: Vec<Complex64>,
}

impl CarrierVector {
    pub fn new(domain: CarrierDomain, values: Vec<Complex64>) -> Self {
        CarrierVector { domain, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// x-quadrature view.
    pub fn x(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    /// p-quadrature view.
    pub fn p(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.im).collect()
    }
}
