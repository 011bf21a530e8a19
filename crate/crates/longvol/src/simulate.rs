//! Monte Carlo simulation of the coupled system (B, V, X, S) and the
//! cross-path estimators that check the moment theory and the
//! market-efficiency claim against samples.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::{self, ModelConfig};
use crate::rng;

#[derive(Debug, Clone)]
pub struct SimConfig {
    model: ModelConfig,
    t_end: f64,
    h: f64,
    paths: usize,
    seed: u64,
    s0: f64,
}

impl SimConfig {
    pub fn new(
        model: ModelConfig,
        t_end: f64,
        h: f64,
        paths: usize,
        seed: u64,
        s0: f64,
    ) -> Result<Self> {
        moments::uniform_steps(t_end, h)?;
        if paths < 1 {
            return Err(Error::InvalidConfig("need at least one path".into()));
        }
        if !s0.is_finite() || !(s0 > 0.0) {
            return Err(Error::InvalidConfig(format!("initial price must be positive, got {s0}")));
        }
        Ok(SimConfig { model, t_end, h, paths, seed, s0 })
    }

    pub fn model(&self) -> &ModelConfig {
        &self.model
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn steps(&self) -> usize {
        moments::uniform_steps(self.t_end, self.h).expect("validated at construction")
    }
}

/// A simulated ensemble on the grid 0, h, ..., T.
///
/// V and X are materialized per path. The Brownian increments are
/// regenerated from the counter RNG on demand and the price is integrated
/// from them, halving the memory of a large ensemble without changing any
/// value: the RNG is pure in (seed, path, step).
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    h: f64,
    seed: u64,
    mu: f64,
    s0: f64,
    steps: usize,
    v: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
}

impl PathEnsemble {
    pub fn paths(&self) -> usize {
        self.v.len()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| i as f64 * self.h).collect()
    }

    /// Volatility path: v(p)[i] = V(ih).
    pub fn v(&self, path: usize) -> &[f64] {
        &self.v[path]
    }

    /// De-trended cumulative return path: x(p)[i] = X(ih), x(p)[0] = 0.
    pub fn x(&self, path: usize) -> &[f64] {
        &self.x[path]
    }

    /// The Brownian increments that drove this path, regenerated.
    pub fn brownian_increments(&self, path: usize) -> Vec<f64> {
        let sqrt_h = self.h.sqrt();
        (0..self.steps)
            .map(|j| sqrt_h * rng::normal(self.seed, path as u64, j as u64))
            .collect()
    }

    /// Price path under the log-Euler update, strictly positive.
    pub fn price_path(&self, path: usize) -> Vec<f64> {
        let db = self.brownian_increments(path);
        let v = &self.v[path];
        let mut s = Vec::with_capacity(self.steps + 1);
        s.push(self.s0);
        for i in 0..self.steps {
            let log_step = (self.mu - 0.5 * v[i] * v[i]) * self.h + v[i] * db[i];
            s.push(s[i] * log_step.exp());
        }
        s
    }

    pub fn grid_index(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return Err(Error::Grid(format!("time {t} before the grid start")));
        }
        let i = (t / self.h).round();
        if (i * self.h - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::Grid(format!("time {t} is not on the step-{} grid", self.h)));
        }
        let i = i as usize;
        if i > self.steps {
            return Err(Error::Grid(format!("time {t} beyond the horizon")));
        }
        Ok(i)
    }
}

/// Euler scheme for the volatility equation with the kernel table shared
/// across paths:
///
///   V_i = sigma + beta * sum_{j<i} K((i-j)h) V_j dB_j,  X_i = sum_{j<i} V_j dB_j.
///
/// The convolution is accumulated in ascending j with each term associated
/// as K * (V_j * dB_j); the discrete module reproduces this order exactly,
/// which is what makes the cross-scheme comparison bit-stable.
pub fn simulate(sim: &SimConfig) -> Result<PathEnsemble> {
    let n = sim.steps();
    let kernel = sim.model.kernel();
    let kv = kernel.values_at_multiples(sim.h, n)?;
    let sigma = sim.model.sigma();
    let beta = sim.model.beta();
    let sqrt_h = sim.h.sqrt();
    let seed = sim.seed;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..sim.paths)
        .into_par_iter()
        .map(|p| simulate_path(&kv, sigma, beta, sqrt_h, n, seed, p as u64))
        .collect();
    let mut v = Vec::with_capacity(sim.paths);
    let mut x = Vec::with_capacity(sim.paths);
    for (pv, px) in pairs {
        v.push(pv);
        x.push(px);
    }
    Ok(PathEnsemble { h: sim.h, seed, mu: sim.model.mu(), s0: sim.s0, steps: n, v, x })
}

fn simulate_path(
    kv: &[f64],
    sigma: f64,
    beta: f64,
    sqrt_h: f64,
    n: usize,
    seed: u64,
    path: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n + 1];
    let mut x = vec![0.0; n + 1];
    let mut w = vec![0.0; n];
    let mut db = vec![0.0; n];
    for (j, slot) in db.iter_mut().enumerate() {
        *slot = sqrt_h * rng::normal(seed, path, j as u64);
    }
    v[0] = sigma;
    if beta == 0.0 {
        // no feedback: V stays at sigma and X is a scaled Brownian path
        for i in 1..=n {
            v[i] = sigma;
            x[i] = x[i - 1] + sigma * db[i - 1];
        }
        return (v, x);
    }
    for i in 1..=n {
        let j = i - 1;
        w[j] = v[j] * db[j];
        x[i] = x[j] + w[j];
        let mut acc = 0.0;
        for (m, &wm) in w[..i].iter().enumerate() {
            acc += kv[i - 1 - m] * wm;
        }
        v[i] = sigma + beta * acc;
    }
    (v, x)
}

#[derive(Debug, Clone, Copy)]
pub struct EmpiricalMoments {
    pub mean: f64,
    pub var: f64,
    pub se_mean: Option<f64>,
    pub se_var: Option<f64>,
}

/// Cross-path mean and variance of V(t). Standard errors need at least two
/// paths; the variance SE uses the fourth-moment estimator.
pub fn empirical_moments(e: &PathEnsemble, t: f64) -> Result<EmpiricalMoments> {
    let i = e.grid_index(t)?;
    let n = e.paths();
    let mean = (0..n).map(|p| e.v[p][i]).sum::<f64>() / n as f64;
    if n < 2 {
        return Ok(EmpiricalMoments { mean, var: 0.0, se_mean: None, se_var: None });
    }
    let nf = n as f64;
    let mut sum_sq = 0.0;
    let mut sum_q = 0.0;
    for p in 0..n {
        let d = e.v[p][i] - mean;
        sum_sq += d * d;
        sum_q += d * d * d * d;
    }
    let var = sum_sq / (nf - 1.0);
    let m4 = sum_q / nf;
    let se_mean = (var / nf).sqrt();
    let se_var = ((m4 - (nf - 3.0) / (nf - 1.0) * var * var) / nf).max(0.0).sqrt();
    Ok(EmpiricalMoments { mean, var, se_mean: Some(se_mean), se_var: Some(se_var) })
}

#[derive(Debug, Clone, Copy)]
pub struct EmpiricalAutocov {
    pub cov: f64,
    pub se: Option<f64>,
}

/// Cross-path sample covariance of (V(t), V(t + delta)); the SE is the
/// sample deviation of the centered products.
pub fn empirical_autocov(e: &PathEnsemble, t: f64, delta: f64) -> Result<EmpiricalAutocov> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("autocovariance lag must be >= 0, got {delta}")));
    }
    let i = e.grid_index(t)?;
    let j = e.grid_index(t + delta)?;
    let n = e.paths();
    if n < 2 {
        return Ok(EmpiricalAutocov { cov: 0.0, se: None });
    }
    let nf = n as f64;
    let mean_a = (0..n).map(|p| e.v[p][i]).sum::<f64>() / nf;
    let mean_b = (0..n).map(|p| e.v[p][j]).sum::<f64>() / nf;
    let q: Vec<f64> = (0..n).map(|p| (e.v[p][i] - mean_a) * (e.v[p][j] - mean_b)).collect();
    let cov = q.iter().sum::<f64>() / (nf - 1.0);
    let q_mean = q.iter().sum::<f64>() / nf;
    let q_var = q.iter().map(|&qq| (qq - q_mean) * (qq - q_mean)).sum::<f64>() / (nf - 1.0);
    Ok(EmpiricalAutocov { cov, se: Some((q_var / nf).sqrt()) })
}

#[derive(Debug, Clone, Copy)]
pub struct ReturnCorrelation {
    pub corr: f64,
    pub se: Option<f64>,
    pub degenerate: bool,
}

/// Sample correlation of the non-overlapping delta-returns of R = X + mu t
/// starting at t and t + Delta. Windows must satisfy Delta > delta >= 0;
/// delta = 0 (or a single path) is flagged degenerate with corr 0.
pub fn returns_efficiency(
    e: &PathEnsemble,
    delta: f64,
    big_delta: f64,
    t: f64,
) -> Result<ReturnCorrelation> {
    if !(delta >= 0.0 && big_delta > delta) {
        return Err(Error::Domain(format!(
            "return windows need Delta > delta >= 0, got delta={delta}, Delta={big_delta}"
        )));
    }
    let i0 = e.grid_index(t)?;
    let i1 = e.grid_index(t + delta)?;
    let i2 = e.grid_index(t + big_delta)?;
    let i3 = e.grid_index(t + delta + big_delta)?;
    let n = e.paths();
    let r = |p: usize, hi: usize, lo: usize, t_hi: f64, t_lo: f64| {
        (e.x[p][hi] + e.mu * t_hi) - (e.x[p][lo] + e.mu * t_lo)
    };
    let r1: Vec<f64> = (0..n).map(|p| r(p, i1, i0, t + delta, t)).collect();
    let r2: Vec<f64> =
        (0..n).map(|p| r(p, i3, i2, t + delta + big_delta, t + big_delta)).collect();
    if n < 2 {
        return Ok(ReturnCorrelation { corr: 0.0, se: None, degenerate: true });
    }
    let nf = n as f64;
    let m1 = r1.iter().sum::<f64>() / nf;
    let m2 = r2.iter().sum::<f64>() / nf;
    let mut c11 = 0.0;
    let mut c22 = 0.0;
    let mut c12 = 0.0;
    for p in 0..n {
        let d1 = r1[p] - m1;
        let d2 = r2[p] - m2;
        c11 += d1 * d1;
        c22 += d2 * d2;
        c12 += d1 * d2;
    }
    if c11 == 0.0 || c22 == 0.0 {
        return Ok(ReturnCorrelation { corr: 0.0, se: None, degenerate: true });
    }
    let corr = c12 / (c11.sqrt() * c22.sqrt());
    // SE for testing against the null of zero correlation
    Ok(ReturnCorrelation { corr, se: Some(1.0 / nf.sqrt()), degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{SignedMeasure, Support};
    use crate::moments::{covariance_surface, solve_second_moment};
    use crate::testkit::{power_law_config, power_law_measures};
    use approx::assert_relative_eq;

    fn delayed_atom_config(sigma: f64, beta: f64, rho: f64) -> ModelConfig {
        let kappa = SignedMeasure::point_mass(Support::NonnegativeHalfLine, rho, 1.0).unwrap();
        let lambda = SignedMeasure::point_mass(Support::DelayInterval(0.0), 0.0, 1.0).unwrap();
        ModelConfig::new(sigma, beta, 0.0, lambda, kappa).unwrap()
    }

    #[test]
    fn flat_volatility_without_feedback() {
        let (lambda, kappa) = power_law_measures(1.0, 0.75);
        let cfg = ModelConfig::new(1.5, 0.0, 0.05, lambda, kappa).unwrap();
        let sim = SimConfig::new(cfg, 2.0, 0.25, 3, 7, 2.0).unwrap();
        let e = simulate(&sim).unwrap();
        for p in 0..3 {
            for &v in e.v(p) {
                assert_eq!(v, 1.5);
            }
            let db = e.brownian_increments(p);
            let mut acc = 0.0;
            for (i, &d) in db.iter().enumerate() {
                acc += 1.5 * d;
                assert_eq!(e.x(p)[i + 1], acc);
            }
            // geometric Brownian motion in closed form, checked through logs
            let s = e.price_path(p);
            let mut log_s = 2.0f64.ln();
            for (i, &d) in db.iter().enumerate() {
                log_s += (0.05 - 0.5 * 1.5 * 1.5) * 0.25 + 1.5 * d;
                assert!(s[i + 1] > 0.0);
                assert_relative_eq!(s[i + 1].ln(), log_s, epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn three_step_hand_expansion() {
        // kappa = atom at h: K(h) = 1, K(mh) = 0 beyond, so each V_i sees
        // only the immediately preceding increment
        let h = 0.25;
        let cfg = delayed_atom_config(2.0, 0.5, h);
        let sim = SimConfig::new(cfg, 3.0 * h, h, 1, 11, 1.0).unwrap();
        let e = simulate(&sim).unwrap();
        let db = e.brownian_increments(0);
        let v = e.v(0);
        assert_eq!(v[0], 2.0);
        assert_eq!(v[1], 2.0 + 0.5 * (2.0 * db[0]));
        assert_eq!(v[2], 2.0 + 0.5 * (v[1] * db[1]));
        assert_eq!(v[3], 2.0 + 0.5 * (v[2] * db[2]));
        let x = e.x(0);
        assert_eq!(x[1], 2.0 * db[0]);
        assert_eq!(x[2], x[1] + v[1] * db[1]);
        assert_eq!(x[3], x[2] + v[2] * db[2]);
    }

    #[test]
    fn ensembles_are_deterministic_and_prefix_stable() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let small = SimConfig::new(cfg.clone(), 1.0, 0.125, 4, 99, 1.0).unwrap();
        let large = SimConfig::new(cfg.clone(), 1.0, 0.125, 8, 99, 1.0).unwrap();
        let a = simulate(&small).unwrap();
        let b = simulate(&large).unwrap();
        for p in 0..4 {
            assert_eq!(a.v(p), b.v(p));
            assert_eq!(a.x(p), b.x(p));
        }
        let again = simulate(&small).unwrap();
        let narrow = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| simulate(&small).unwrap());
        for p in 0..4 {
            assert_eq!(a.v(p), again.v(p));
            assert_eq!(a.v(p), narrow.v(p));
            assert_eq!(a.x(p), narrow.x(p));
        }
    }

    #[test]
    fn estimators_track_the_transient_theory() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let h = 0.05;
        let sim = SimConfig::new(cfg.clone(), 5.0, h, 4000, 1234, 1.0).unwrap();
        let e = simulate(&sim).unwrap();
        let sol = solve_second_moment(&cfg, 5.0, h).unwrap();

        for t in [1.0, 2.5, 5.0] {
            let m = empirical_moments(&e, t).unwrap();
            let se = m.se_mean.unwrap();
            assert!((m.mean - 1.0).abs() < 3.0 * se, "mean {} off sigma at t={t}", m.mean);
        }

        let m = empirical_moments(&e, 5.0).unwrap();
        let theory_var = sol.final_value() - 1.0;
        let tol = (0.05 * theory_var).max(3.0 * m.se_var.unwrap());
        assert!(
            (m.var - theory_var).abs() < tol,
            "var {} vs theory {theory_var}",
            m.var
        );

        // martingale property of X at the horizon
        let n = e.paths();
        let x_mean = (0..n).map(|p| e.x(p)[e.steps()]).sum::<f64>() / n as f64;
        let x_sq = (0..n).map(|p| e.x(p)[e.steps()].powi(2)).sum::<f64>() / n as f64;
        let x_se = ((x_sq - x_mean * x_mean) / n as f64).sqrt();
        assert!(x_mean.abs() < 3.0 * x_se, "mean X(T) = {x_mean}");

        // Ito isometry against the solved second moment
        let isometry: f64 = h * sol.values()[..e.steps()].iter().sum::<f64>();
        let x4 = (0..n).map(|p| e.x(p)[e.steps()].powi(4)).sum::<f64>() / n as f64;
        let se_sq = ((x4 - x_sq * x_sq) / n as f64).sqrt();
        let tol = (0.05 * isometry).max(3.0 * se_sq);
        assert!((x_sq - isometry).abs() < tol, "E X^2 {x_sq} vs {isometry}");

        // transient autocovariance against the covariance surface
        let surf = covariance_surface(&cfg, 3.0, 1.0, h).unwrap();
        let ac = empirical_autocov(&e, 3.0, 1.0).unwrap();
        let tol = (0.10 * surf).max(3.0 * ac.se.unwrap());
        assert!((ac.cov - surf).abs() < tol, "autocov {} vs surface {surf}", ac.cov);
    }

    #[test]
    fn autocov_at_lag_zero_is_the_variance() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let sim = SimConfig::new(cfg, 2.0, 0.125, 500, 5, 1.0).unwrap();
        let e = simulate(&sim).unwrap();
        let m = empirical_moments(&e, 2.0).unwrap();
        let ac = empirical_autocov(&e, 2.0, 0.0).unwrap();
        assert_eq!(ac.cov, m.var);
    }

    #[test]
    fn return_windows_are_uncorrelated() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let sim = SimConfig::new(cfg, 8.0, 0.25, 2000, 31, 1.0).unwrap();
        let e = simulate(&sim).unwrap();
        let r = returns_efficiency(&e, 1.0, 5.0, 1.0).unwrap();
        assert!(!r.degenerate);
        assert!(r.corr.abs() < 3.0 * r.se.unwrap(), "corr {}", r.corr);

        let degenerate = returns_efficiency(&e, 0.0, 5.0, 1.0).unwrap();
        assert!(degenerate.degenerate);
        assert_eq!(degenerate.corr, 0.0);

        assert!(returns_efficiency(&e, 2.0, 1.0, 1.0).is_err());
        assert!(returns_efficiency(&e, -1.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn single_path_estimates_are_flagged() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let sim = SimConfig::new(cfg, 1.0, 0.25, 1, 3, 1.0).unwrap();
        let e = simulate(&sim).unwrap();
        let m = empirical_moments(&e, 1.0).unwrap();
        assert!(m.se_mean.is_none() && m.se_var.is_none());
        assert_eq!(m.var, 0.0);
        assert!(empirical_autocov(&e, 0.5, 0.25).unwrap().se.is_none());
        let r = returns_efficiency(&e, 0.25, 0.5, 0.0).unwrap();
        assert!(r.degenerate && r.se.is_none());
    }

    #[test]
    fn config_and_grid_validation() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        assert!(SimConfig::new(cfg.clone(), 1.0, 0.3, 4, 1, 1.0).is_err());
        assert!(SimConfig::new(cfg.clone(), 1.0, 0.25, 0, 1, 1.0).is_err());
        assert!(SimConfig::new(cfg.clone(), 1.0, 0.25, 4, 1, 0.0).is_err());
        assert!(SimConfig::new(cfg.clone(), 1.0, 0.25, 4, 1, -2.0).is_err());
        let sim = SimConfig::new(cfg, 1.0, 0.25, 4, 1, 1.0).unwrap();
        let e = simulate(&sim).unwrap();
        assert!(empirical_moments(&e, 0.1).is_err());
        assert!(empirical_moments(&e, 1.25).is_err());
        assert!(empirical_moments(&e, -0.25).is_err());
    }
}
