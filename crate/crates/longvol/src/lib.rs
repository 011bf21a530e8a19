//! Long-memory volatility model: memory kernels, Volterra moment equations,
//! autocovariance asymptotics, and path simulation.

mod error;
mod quad;
#[cfg(test)]
mod testkit;

pub mod autocov;
pub mod discrete;
pub mod kernel;
pub mod measures;
pub mod moments;
pub mod rng;
pub mod simulate;

pub use autocov::{
    asymptotic_gamma, c_factor, classify_memory, gamma, gamma_curve, verify_rate, AsymptoticGamma,
    AutocovCurve, MemoryClass, RateRegime, RateReport, RateRow,
};
pub use discrete::{
    discrete_memory, discrete_stationarity, k_seq, simulate_discrete, DiscreteEnsemble,
    DiscreteModel, NoiseKind, SeqFamily,
};
pub use error::{Error, Result};
pub use kernel::{ClosedForm, IntegralVerdict, Kernel, DEFAULT_STEP};
pub use moments::{
    covariance_surface, limit_second_moment, resolvent, solve_second_moment, stationarity_margin,
    ModelConfig, MomentSolution, NonStationaryReason, ResolventSolution, Stationarity,
};
pub use measures::{
    default_balance_tol, validate_balance, Atom, Balance, DensityFamily, FirstMomentClass,
    SignedMeasure, Support, TailDecl,
};
pub use simulate::{
    empirical_autocov, empirical_moments, returns_efficiency, simulate, EmpiricalAutocov,
    EmpiricalMoments, PathEnsemble, ReturnCorrelation, SimConfig,
};
