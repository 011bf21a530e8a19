//! The second moment of V: its Volterra integral equation, the resolvent
//! representation, the stationarity margin, the closed-form stationary
//! limit, and the transient covariance surface.

use crate::error::{Error, Result};
use crate::kernel::{IntegralVerdict, Kernel, DEFAULT_STEP};
use crate::measures::SignedMeasure;

/// Margin slack below 1 required to declare stationarity.
pub const MARGIN_EPSILON: f64 = 1e-9;
/// Half-width of the band around 1 inside which a margin is flagged
/// near-critical: quadrature error there can flip the verdict.
pub const NEAR_CRITICAL_BAND: f64 = 1e-6;

/// Model parameters around a constructed kernel. sigma must be nonzero;
/// beta = 0 is accepted as the degenerate no-feedback mode.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    sigma: f64,
    beta: f64,
    mu: f64,
    kernel: Kernel,
}

impl ModelConfig {
    pub fn new(
        sigma: f64,
        beta: f64,
        mu: f64,
        lambda: SignedMeasure,
        kappa: SignedMeasure,
    ) -> Result<Self> {
        Self::from_kernel(sigma, beta, mu, Kernel::new(lambda, kappa)?)
    }

    pub fn from_kernel(sigma: f64, beta: f64, mu: f64, kernel: Kernel) -> Result<Self> {
        if !(sigma != 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be finite and nonzero, got {sigma}"
            )));
        }
        if !beta.is_finite() {
            return Err(Error::InvalidConfig(format!("beta must be finite, got {beta}")));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidConfig(format!("mu must be finite, got {mu}")));
        }
        Ok(Self { sigma, beta, mu, kernel })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn tau(&self) -> f64 {
        self.kernel.tau()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stationarity {
    Stationary { margin: f64 },
    NonStationary { reason: NonStationaryReason },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonStationaryReason {
    KernelNotL2,
    MarginAtLeastOne { margin: f64 },
    Undetermined,
}

impl Stationarity {
    pub fn is_stationary(&self) -> bool {
        matches!(self, Stationarity::Stationary { .. })
    }

    /// The margin m = beta^2 * ||K||_2^2, when it is a finite number.
    pub fn margin(&self) -> Option<f64> {
        match self {
            Stationarity::Stationary { margin } => Some(*margin),
            Stationarity::NonStationary {
                reason: NonStationaryReason::MarginAtLeastOne { margin },
            } => Some(*margin),
            Stationarity::NonStationary { .. } => None,
        }
    }

    /// Margin within NEAR_CRITICAL_BAND of the stability boundary, on
    /// either side; consumers should surface a warning.
    pub fn near_critical(&self) -> bool {
        self.margin().is_some_and(|m| (m - 1.0).abs() <= NEAR_CRITICAL_BAND)
    }
}

/// m = beta^2 * integral of K^2, and the verdict it implies.
pub fn stationarity_margin(cfg: &ModelConfig) -> Result<Stationarity> {
    if cfg.beta == 0.0 {
        return Ok(Stationarity::Stationary { margin: 0.0 });
    }
    let k = cfg.kernel();
    Ok(match k.l2_norm_sq(k.default_horizon(), DEFAULT_STEP)? {
        IntegralVerdict::Finite(l2) => margin_verdict(cfg.beta * cfg.beta * l2),
        IntegralVerdict::Divergent => {
            Stationarity::NonStationary { reason: NonStationaryReason::KernelNotL2 }
        }
        IntegralVerdict::Undetermined => {
            Stationarity::NonStationary { reason: NonStationaryReason::Undetermined }
        }
    })
}

/// The unit-margin threshold test, shared with the discrete analogue.
pub(crate) fn margin_verdict(margin: f64) -> Stationarity {
    if margin < 1.0 - MARGIN_EPSILON {
        Stationarity::Stationary { margin }
    } else {
        Stationarity::NonStationary { reason: NonStationaryReason::MarginAtLeastOne { margin } }
    }
}

/// sigma^2 / (1 - m), defined only under a stationary verdict.
pub fn limit_second_moment(cfg: &ModelConfig) -> Result<f64> {
    match stationarity_margin(cfg)? {
        Stationarity::Stationary { margin } => Ok(cfg.sigma * cfg.sigma / (1.0 - margin)),
        verdict => Err(Error::NonStationary(format!(
            "limit of the second moment requires a stationary configuration, got {verdict:?}"
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct MomentSolution {
    times: Vec<f64>,
    values: Vec<f64>,
    stationary: Stationarity,
    limit: Option<f64>,
}

impl MomentSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stationary(&self) -> Stationarity {
        self.stationary
    }

    pub fn limit(&self) -> Option<f64> {
        self.limit
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

/// Grid size for a horizon the step must divide.
pub(crate) fn uniform_steps(t_end: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && t_end > 0.0) {
        return Err(Error::Grid(format!(
            "need positive step and horizon, got h={h}, T={t_end}"
        )));
    }
    let n = (t_end / h).round();
    if n < 1.0 || (n * h - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::Grid(format!("step {h} does not divide horizon {t_end}")));
    }
    Ok(n as usize)
}

/// Forward substitution for f = source + beta^2 (K^2 * f) under the
/// trapezoid discretization. `k2[m-1]` holds K^2(mh); the lag-0 endpoint
/// carries K^2 extrapolated to lag h/2, the scheme's one heuristic, and its
/// half-weight is folded into the denominator.
fn volterra_forward(
    k2: &[f64],
    k2_half: f64,
    beta2: f64,
    h: f64,
    source: impl Fn(usize) -> f64,
) -> Result<Vec<f64>> {
    let n = k2.len();
    let denom = 1.0 - 0.5 * beta2 * h * k2_half;
    if denom <= 0.0 {
        return Err(Error::Grid(format!(
            "step {h} too coarse: the implicit endpoint weight reaches {:.3}",
            1.0 - denom
        )));
    }
    let mut f = vec![0.0; n + 1];
    f[0] = source(0);
    for i in 1..=n {
        let mut acc = 0.5 * k2[i - 1] * f[0];
        for j in 1..i {
            acc += k2[i - j - 1] * f[j];
        }
        f[i] = (source(i) + beta2 * h * acc) / denom;
    }
    Ok(f)
}

/// E[V^2] on the uniform grid 0, h, ..., T by forward substitution of the
/// trapezoid-discretized Volterra equation.
pub fn solve_second_moment(cfg: &ModelConfig, t_end: f64, h: f64) -> Result<MomentSolution> {
    let n = uniform_steps(t_end, h)?;
    let kernel = cfg.kernel();
    let k2: Vec<f64> = kernel.values_at_multiples(h, n)?.iter().map(|v| v * v).collect();
    let k_half = kernel.eval(0.5 * h)?;
    let sigma2 = cfg.sigma * cfg.sigma;
    let values = volterra_forward(&k2, k_half * k_half, cfg.beta * cfg.beta, h, |_| sigma2)?;
    let stationary = stationarity_margin(cfg)?;
    let limit = match stationary {
        Stationarity::Stationary { margin } => Some(sigma2 / (1.0 - margin)),
        _ => None,
    };
    let times = (0..=n).map(|i| i as f64 * h).collect();
    Ok(MomentSolution { times, values, stationary, limit })
}

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    times: Vec<f64>,
    values: Vec<f64>,
    h: f64,
}

impl ResolventSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid integral over the whole grid.
    pub fn integral(&self) -> f64 {
        self.cumulative().pop().unwrap_or(0.0)
    }

    /// Trapezoid partial integrals at every grid point.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * self.h * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }
}

/// The resolvent r = g + beta^2 (K^2 * r) with g = beta^2 K^2, on the same
/// grid and under the same discretization as the moment solver, so that
/// E[V^2] = sigma^2 (1 + cumulative integral of r) holds discretely. The
/// convolution vanishes at t = 0, so r(0) is exactly the source's right
/// limit beta^2 K(0+)^2, not the lag-h/2 heuristic.
pub fn resolvent(cfg: &ModelConfig, t_end: f64, h: f64) -> Result<ResolventSolution> {
    let n = uniform_steps(t_end, h)?;
    let kernel = cfg.kernel();
    let k2: Vec<f64> = kernel.values_at_multiples(h, n)?.iter().map(|v| v * v).collect();
    let k_half = kernel.eval(0.5 * h)?;
    let k2_zero = kernel.at_zero_plus()?.powi(2);
    let beta2 = cfg.beta * cfg.beta;
    let values = volterra_forward(&k2, k_half * k_half, beta2, h, |i| {
        beta2 * if i == 0 { k2_zero } else { k2[i - 1] }
    })?;
    let times = (0..=n).map(|i| i as f64 * h).collect();
    Ok(ResolventSolution { times, values, h })
}

/// Cov(V(t), V(t+delta)) over the transient: the weighted overlap of the
/// kernel with itself shifted by delta, against E[V^2] on [0, t].
pub fn covariance_surface(cfg: &ModelConfig, t: f64, delta: f64, h: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("covariance shift must be >= 0, got {delta}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let n = uniform_steps(t, h)?;
    let f = solve_second_moment(cfg, t, h)?;
    let f = f.values();
    let kernel = cfg.kernel();
    let kv = kernel.values_at_multiples(h, n)?;
    // j = 0 holds lag t; j = n holds lag 0, extrapolated to lag h/2
    let mut acc = 0.5 * kv[n - 1] * kernel.eval(n as f64 * h + delta)? * f[0];
    for j in 1..n {
        let m = n - j;
        acc += kv[m - 1] * kernel.eval(m as f64 * h + delta)? * f[j];
    }
    acc += 0.5 * kernel.eval(0.5 * h)? * kernel.eval(0.5 * h + delta)? * f[n];
    Ok(cfg.beta * cfg.beta * h * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::power_law_config;
    use approx::assert_relative_eq;

    #[test]
    fn margin_of_the_power_law_example() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        match stationarity_margin(&cfg).unwrap() {
            Stationarity::Stationary { margin } => {
                assert_relative_eq!(margin, 0.32, max_relative = 1e-12);
            }
            other => panic!("expected stationary, got {other:?}"),
        }
    }

    #[test]
    fn margin_divergent_kernel_reports_not_l2() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.4);
        assert_eq!(
            stationarity_margin(&cfg).unwrap(),
            Stationarity::NonStationary { reason: NonStationaryReason::KernelNotL2 }
        );
    }

    #[test]
    fn margin_degenerate_beta_is_stationary_at_zero() {
        let cfg = power_law_config(1.0, 0.0, 1.0, 0.4);
        assert_eq!(stationarity_margin(&cfg).unwrap(), Stationarity::Stationary { margin: 0.0 });
    }

    #[test]
    fn example_stability_condition_is_the_unit_margin() {
        // beta^2 < alpha^2 (2 alpha - 1) iff m < 1 for this family
        let alpha = 0.75f64;
        let threshold_sq = alpha * alpha * (2.0 * alpha - 1.0);
        for &beta in &[0.1, 0.3, 0.52, 0.54, 0.8] {
            let cfg = power_law_config(1.0, beta, 1.0, alpha);
            let verdict = stationarity_margin(&cfg).unwrap();
            assert_eq!(
                beta * beta < threshold_sq,
                verdict.is_stationary(),
                "beta={beta}: {verdict:?}"
            );
        }
    }

    #[test]
    fn near_critical_band_flags_both_sides_of_one() {
        let below = power_law_config(1.0, (0.28125f64 * (1.0 - 5e-7)).sqrt(), 1.0, 0.75);
        let v = stationarity_margin(&below).unwrap();
        assert!(v.is_stationary() && v.near_critical(), "{v:?}");

        let above = power_law_config(1.0, (0.28125f64 * (1.0 + 5e-7)).sqrt(), 1.0, 0.75);
        let v = stationarity_margin(&above).unwrap();
        assert!(!v.is_stationary() && v.near_critical(), "{v:?}");

        let comfortable = power_law_config(1.0, 0.3, 1.0, 0.75);
        assert!(!stationarity_margin(&comfortable).unwrap().near_critical());
    }

    #[test]
    fn limit_values_and_scaling() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        assert_relative_eq!(
            limit_second_moment(&cfg).unwrap(),
            1.4705882352941175,
            max_relative = 1e-12
        );
        let doubled = power_law_config(2.0, 0.3, 1.0, 0.75);
        assert_relative_eq!(
            limit_second_moment(&doubled).unwrap(),
            4.0 / 0.68,
            max_relative = 1e-12
        );
        let degenerate = power_law_config(1.5, 0.0, 1.0, 0.75);
        assert_relative_eq!(limit_second_moment(&degenerate).unwrap(), 2.25, max_relative = 1e-15);
    }

    #[test]
    fn limit_rejects_nonstationary_configs() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.4);
        assert!(matches!(limit_second_moment(&cfg), Err(Error::NonStationary(_))));
    }

    #[test]
    fn solve_without_feedback_is_flat() {
        let cfg = power_law_config(1.5, 0.0, 1.0, 0.75);
        let sol = solve_second_moment(&cfg, 10.0, 0.1).unwrap();
        assert_eq!(sol.values().len(), 101);
        for v in sol.values() {
            assert_eq!(*v, 2.25);
        }
        assert_eq!(sol.limit(), Some(2.25));
    }

    #[test]
    fn solve_matches_frozen_reference() {
        // independently computed with the same discretization at h=0.01
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let sol = solve_second_moment(&cfg, 50.0, 0.01).unwrap();
        assert_relative_eq!(sol.final_value(), 1.3759204349794834, max_relative = 1e-9);
        assert_eq!(sol.values()[0], 1.0);
    }

    #[test]
    fn solve_is_monotone_and_bounded_below_by_sigma_sq() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let sol = solve_second_moment(&cfg, 20.0, 0.05).unwrap();
        for w in sol.values().windows(2) {
            assert!(w[1] >= w[0]);
        }
        for v in sol.values() {
            assert!(*v >= 1.0);
        }
    }

    #[test]
    fn solve_approaches_the_limit_as_horizon_grows() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let limit = limit_second_moment(&cfg).unwrap();
        let gaps: Vec<f64> = [25.0, 50.0, 100.0]
            .iter()
            .map(|&t| (solve_second_moment(&cfg, t, 0.05).unwrap().final_value() - limit).abs())
            .collect();
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
    }

    #[test]
    fn solve_self_convergence_is_second_order() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let f = |h: f64| solve_second_moment(&cfg, 20.0, h).unwrap().final_value();
        let (c, m, f_) = (f(0.1), f(0.05), f(0.025));
        let ratio = (c - m).abs() / (m - f_).abs();
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn solve_rejects_nondividing_steps() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        assert!(matches!(solve_second_moment(&cfg, 10.0, 0.3), Err(Error::Grid(_))));
        assert!(matches!(solve_second_moment(&cfg, 0.0, 0.1), Err(Error::Grid(_))));
        assert!(matches!(solve_second_moment(&cfg, 10.0, -0.1), Err(Error::Grid(_))));
    }

    #[test]
    fn divergence_lower_bound_for_non_l2_kernels() {
        // f stays above sigma^2 (1 + beta^2 * discrete l2 mass) at every
        // horizon because f >= sigma^2 feeds back through the convolution
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.4);
        let (t, h) = (20.0, 0.01);
        let sol = solve_second_moment(&cfg, t, h).unwrap();
        assert!(!sol.stationary().is_stationary());
        assert_eq!(sol.limit(), None);
        let n = (t / h) as usize;
        let kernel = cfg.kernel();
        let k2: Vec<f64> = kernel.values_at_multiples(h, n).unwrap().iter().map(|v| v * v).collect();
        let k2_half = kernel.eval(0.5 * h).unwrap().powi(2);
        let mut quad = 0.5 * h * (k2_half + k2[n - 1]);
        for v in &k2[..n - 1] {
            quad += h * v;
        }
        let bound = 1.0 * (1.0 + 0.09 * quad);
        assert!(
            sol.final_value() >= bound * (1.0 - 1e-12),
            "{} < {bound}",
            sol.final_value()
        );
    }

    #[test]
    fn resolvent_vanishes_without_feedback() {
        let cfg = power_law_config(1.0, 0.0, 1.0, 0.75);
        let r = resolvent(&cfg, 10.0, 0.1).unwrap();
        assert!(r.values().iter().all(|v| *v == 0.0));
        assert_eq!(r.integral(), 0.0);
    }

    #[test]
    fn resolvent_is_nonnegative_and_matches_frozen_integral() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let r = resolvent(&cfg, 200.0, 0.05).unwrap();
        assert!(r.values().iter().all(|v| *v >= 0.0));
        assert_relative_eq!(r.integral(), 0.42207313676764335, max_relative = 1e-9);
    }

    #[test]
    fn resolvent_identity_reproduces_the_moment_solution() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let (t, h) = (50.0, 0.05);
        let sol = solve_second_moment(&cfg, t, h).unwrap();
        let cum = resolvent(&cfg, t, h).unwrap().cumulative();
        let max_gap = sol
            .values()
            .iter()
            .zip(&cum)
            .map(|(f, c)| (f - (1.0 + c)).abs())
            .fold(0.0f64, f64::max);
        // the identity is exact in the continuum; discretely the two
        // quadratures differ at O(h^2)
        assert!(max_gap < 5e-4, "max gap {max_gap}");
    }

    #[test]
    fn covariance_surface_trivial_cases() {
        let degenerate = power_law_config(1.0, 0.0, 1.0, 0.75);
        assert_eq!(covariance_surface(&degenerate, 10.0, 3.0, 0.1).unwrap(), 0.0);
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        assert_eq!(covariance_surface(&cfg, 0.0, 3.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn covariance_surface_matches_frozen_references() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let expected = [
            (0.0, 0.4145458276812241),
            (1.0, 0.33816132523564946),
            (5.0, 0.2298645631655625),
            (10.0, 0.17940475299203598),
        ];
        for (delta, want) in expected {
            let got = covariance_surface(&cfg, 150.0, delta, 0.05).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-8);
        }
    }
}
