//! Limiting autocovariance of the volatility, the short/long memory
//! classification, and the regular-variation decay asymptotics.

use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{Error, Result};
use crate::kernel::{IntegralVerdict, DEFAULT_STEP};
use crate::measures::FirstMomentClass;
use crate::moments::{stationarity_margin, ModelConfig, Stationarity};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryClass {
    Short,
    Long,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateRegime {
    LongMemory,
    ShortMemory,
    Critical,
}

/// beta^2 sigma^2 / (1 - m): the prefactor turning kernel overlaps into
/// autocovariances. Defined only under a stationary verdict.
pub fn c_factor(cfg: &ModelConfig) -> Result<f64> {
    match stationarity_margin(cfg)? {
        Stationarity::Stationary { margin } => {
            Ok(cfg.beta() * cfg.beta() * cfg.sigma() * cfg.sigma() / (1.0 - margin))
        }
        verdict => Err(Error::NonStationary(format!(
            "the limiting autocovariance requires a stationary configuration, got {verdict:?}"
        ))),
    }
}

/// gamma(delta) = c_factor * overlap(delta): the stationary-limit
/// autocovariance of V at lag delta.
pub fn gamma(cfg: &ModelConfig, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("autocovariance lag must be >= 0, got {delta}")));
    }
    if cfg.beta() == 0.0 {
        // V is constant: no feedback, no covariance, any kernel
        return Ok(0.0);
    }
    let cf = c_factor(cfg)?;
    let kernel = cfg.kernel();
    Ok(cf * kernel.overlap(delta, kernel.default_horizon(), DEFAULT_STEP)?)
}

#[derive(Debug, Clone)]
pub struct AutocovCurve {
    deltas: Vec<f64>,
    values: Vec<f64>,
    c_factor: f64,
    memory_class: MemoryClass,
}

impl AutocovCurve {
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn c_factor(&self) -> f64 {
        self.c_factor
    }

    pub fn memory_class(&self) -> MemoryClass {
        self.memory_class
    }
}

pub fn gamma_curve(cfg: &ModelConfig, deltas: &[f64]) -> Result<AutocovCurve> {
    let memory_class = classify_memory(cfg)?;
    let cf = c_factor(cfg)?;
    let values = deltas.iter().map(|&d| gamma(cfg, d)).collect::<Result<Vec<_>>>()?;
    Ok(AutocovCurve { deltas: deltas.to_vec(), values, c_factor: cf, memory_class })
}

/// Short memory when the first moment of kappa is finite (gamma is then
/// integrable); long memory when it is infinite and kappa is sign-definite.
/// A sign-changing kappa with infinite first moment is genuinely open.
pub fn classify_memory(cfg: &ModelConfig) -> Result<MemoryClass> {
    let verdict = stationarity_margin(cfg)?;
    if !verdict.is_stationary() {
        return Err(Error::NonStationary(format!(
            "memory classification applies to stationary configurations only, got {verdict:?}"
        )));
    }
    let kappa = cfg.kernel().kappa();
    Ok(match kappa.first_moment_class()? {
        FirstMomentClass::Finite(_) => MemoryClass::Short,
        FirstMomentClass::Infinite => {
            if kappa.is_sign_definite() {
                MemoryClass::Long
            } else {
                MemoryClass::Undetermined
            }
        }
        FirstMomentClass::Undetermined => MemoryClass::Undetermined,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct AsymptoticGamma {
    pub value: f64,
    pub regime: RateRegime,
}

/// The decay asymptote of gamma at lag delta, by tail regime of the kappa
/// density kappa(ds) ~ s^{-1-alpha} L(s) ds with L(s) = c ln(e+s)^{-p}:
///
///   1/2 < alpha < 1:  c_factor * G(2a-1)G(1-a)/(G(a+1) a) * L(D)^2 D^{1-2a}
///   alpha > 1:        c_factor * (integral of K) * (1/a) * L(D) D^{-a}
///   alpha = 1/2:      c_factor * 4 * integral_D^inf L(s)^2/s ds, when that
///                     integral converges (p > 1/2)
///
/// alpha = 1 sits between the decay regimes and is unsupported.
pub fn asymptotic_gamma(cfg: &ModelConfig, delta: f64) -> Result<AsymptoticGamma> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("decay asymptote needs a lag > 0, got {delta}")));
    }
    let kernel = cfg.kernel();
    let Some((alpha, p, k_scale)) = kernel.tail_exponents() else {
        return Err(Error::TailUndetermined(
            "the decay asymptote requires a power-law tail index on the kappa density".into(),
        ));
    };
    // density scale: K(x) ~ k_scale x^{-alpha} ln^{-p} means L has scale
    // k_scale * alpha
    let c_l = k_scale * alpha;
    let slow = |q: f64| {
        if p == 0.0 {
            1.0
        } else {
            (std::f64::consts::E + delta).ln().powf(-q * p)
        }
    };
    let regime = if alpha < 0.5 {
        return Err(Error::NotSquareIntegrable(format!(
            "tail index {alpha} < 1/2: gamma does not exist"
        )));
    } else if alpha == 0.5 {
        if p > 0.5 {
            RateRegime::Critical
        } else {
            return Err(Error::NotSquareIntegrable(format!(
                "critical tail index with log exponent {p} <= 1/2: the squared slow factor is not integrable"
            )));
        }
    } else if alpha < 1.0 {
        RateRegime::LongMemory
    } else if alpha == 1.0 {
        return Err(Error::UnsupportedBoundary(
            "tail index 1 sits between the decay regimes; no rate is available".into(),
        ));
    } else {
        RateRegime::ShortMemory
    };
    let cf = c_factor(cfg)?;
    let value = match regime {
        RateRegime::LongMemory => {
            let rate_const = gamma_fn(2.0 * alpha - 1.0) * gamma_fn(1.0 - alpha)
                / (gamma_fn(alpha + 1.0) * alpha);
            cf * rate_const * c_l * c_l * slow(2.0) * delta.powf(1.0 - 2.0 * alpha)
        }
        RateRegime::ShortMemory => {
            let l1 = match kernel.l1_norm(kernel.default_horizon(), DEFAULT_STEP)? {
                IntegralVerdict::Finite(v) => v,
                other => {
                    return Err(Error::TailUndetermined(format!(
                        "integral of K undetermined for the short-memory rate: {other:?}"
                    )))
                }
            };
            cf * l1 * (1.0 / alpha) * c_l * slow(1.0) * delta.powf(-alpha)
        }
        RateRegime::Critical => cf * 4.0 * quad::slow_factor_sq_tail(c_l, p, delta),
    };
    Ok(AsymptoticGamma { value, regime })
}

#[derive(Debug, Clone, Copy)]
pub struct RateRow {
    pub delta: f64,
    pub gamma: f64,
    pub asymptote: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub regime: RateRegime,
    pub converging: bool,
}

/// gamma against its asymptote over an ascending lag grid. `converging` is
/// set when |ratio - 1| shrinks monotonically over the tail half of the
/// grid (degenerate 0/0 ratios count as exact).
pub fn verify_rate(cfg: &ModelConfig, deltas: &[f64]) -> Result<RateReport> {
    if deltas.is_empty() {
        return Err(Error::InvalidConfig("rate verification needs a nonempty lag grid".into()));
    }
    if deltas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("rate verification needs strictly ascending lags".into()));
    }
    let mut rows = Vec::with_capacity(deltas.len());
    let mut regime = None;
    for &delta in deltas {
        let g = gamma(cfg, delta)?;
        let a = asymptotic_gamma(cfg, delta)?;
        regime = Some(a.regime);
        let ratio = if g == 0.0 && a.value == 0.0 { 1.0 } else { g / a.value };
        rows.push(RateRow { delta, gamma: g, asymptote: a.value, ratio });
    }
    let tail = &rows[rows.len() / 2..];
    let converging =
        tail.windows(2).all(|w| (w[1].ratio - 1.0).abs() <= (w[0].ratio - 1.0).abs() + 1e-12);
    Ok(RateReport { rows, regime: regime.unwrap(), converging })
}
