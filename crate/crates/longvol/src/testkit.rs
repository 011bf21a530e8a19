//! Shared fixtures for the unit tests: the two kernels nearly every module
//! exercises.

use crate::kernel::Kernel;
use crate::measures::{DensityFamily, SignedMeasure, Support};
use crate::moments::ModelConfig;

/// The measures behind the canonical power-law kernel: a single delay atom
/// at 0 balancing a power-law density, K(x) = (c/alpha)(1+x)^{-alpha}.
pub(crate) fn power_law_measures(c: f64, alpha: f64) -> (SignedMeasure, SignedMeasure) {
    let kappa = SignedMeasure::new(
        Support::NonnegativeHalfLine,
        vec![],
        DensityFamily::PowerLaw { c, alpha },
    )
    .unwrap();
    let lambda = SignedMeasure::point_mass(Support::DelayInterval(0.0), 0.0, c / alpha).unwrap();
    (lambda, kappa)
}

pub(crate) fn power_law_kernel(c: f64, alpha: f64) -> Kernel {
    let (lambda, kappa) = power_law_measures(c, alpha);
    Kernel::new(lambda, kappa).unwrap()
}

pub(crate) fn power_law_config(sigma: f64, beta: f64, c: f64, alpha: f64) -> ModelConfig {
    let (lambda, kappa) = power_law_measures(c, alpha);
    ModelConfig::new(sigma, beta, 0.0, lambda, kappa).unwrap()
}

/// Indicator of x <= 2: a single long-run atom at 2 against a delay atom at 0.
pub(crate) fn step_kernel() -> Kernel {
    let kappa = SignedMeasure::point_mass(Support::NonnegativeHalfLine, 2.0, 1.0).unwrap();
    let lambda = SignedMeasure::point_mass(Support::DelayInterval(0.0), 0.0, 1.0).unwrap();
    Kernel::new(lambda, kappa).unwrap()
}

pub(crate) fn step_config(sigma: f64, beta: f64) -> ModelConfig {
    ModelConfig::from_kernel(sigma, beta, 0.0, step_kernel()).unwrap()
}
