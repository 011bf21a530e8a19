//! Discrete-time analogue of the volatility equation: the recursion
//! V_{n+1} = sigma + beta sum_j K_{n-j} V_j xi_j driven by i.i.d. noise,
//! its stationarity margin, memory class, and the exact bridge to the
//! continuous Euler scheme through kernel increments.

use rayon::prelude::*;

use crate::autocov::MemoryClass;
use crate::error::{Error, Result};
use crate::kernel::{IntegralVerdict, DEFAULT_STEP};
use crate::moments::{margin_verdict, ModelConfig, NonStationaryReason, Stationarity};
use crate::rng;

/// The coefficient sequence (a_n), which enters the recursion only through
/// its tails K_n = sum_{j>n} a_j.
#[derive(Debug, Clone)]
pub enum SeqFamily {
    /// a_n = c (n+1)^{-1-alpha}
    PowerLawSeq { c: f64, alpha: f64 },
    /// explicit nonnegative coefficients, zero beyond the list
    FiniteSeq(Vec<f64>),
    /// a_j = K(jh) - K((j+1)h) for a continuous model's kernel, so that
    /// K_n = K((n+1)h) exactly by telescoping
    FromKernel { model: ModelConfig, h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    StandardNormal,
    /// fair signs; keeps correctness tests in exact dyadic arithmetic
    Rademacher,
}

#[derive(Debug, Clone)]
pub struct DiscreteModel {
    sigma: f64,
    beta: f64,
    a_seq: SeqFamily,
    noise: NoiseKind,
}

impl DiscreteModel {
    pub fn new(sigma: f64, beta: f64, a_seq: SeqFamily, noise: NoiseKind) -> Result<Self> {
        if !sigma.is_finite() || sigma == 0.0 {
            return Err(Error::InvalidConfig(format!("sigma must be finite nonzero, got {sigma}")));
        }
        if !beta.is_finite() {
            return Err(Error::InvalidConfig(format!("beta must be finite, got {beta}")));
        }
        match &a_seq {
            SeqFamily::PowerLawSeq { c, alpha } => {
                if !(c.is_finite() && *c > 0.0 && alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "power-law sequence needs c > 0 and alpha > 0, got c={c}, alpha={alpha}"
                    )));
                }
            }
            SeqFamily::FiniteSeq(a) => {
                if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidConfig(
                        "finite sequence entries must be nonnegative".into(),
                    ));
                }
            }
            SeqFamily::FromKernel { model, h } => {
                if !(h.is_finite() && *h > 0.0) {
                    return Err(Error::InvalidConfig(format!("step must be positive, got {h}")));
                }
                // increments are nonnegative only for a non-increasing K;
                // probe across the kernel's structured range
                let kernel = model.kernel();
                let probe = ((kernel.structure_extent() / h).ceil() as usize + 16).min(100_000);
                let kv = kernel.values_at_multiples(*h, probe)?;
                let head_ok = kernel.at_zero_plus()? >= kv[0] - 1e-12;
                let body_ok = kv.windows(2).all(|w| w[1] <= w[0] + 1e-12);
                if !head_ok || !body_ok || *kv.last().unwrap() < -1e-12 {
                    return Err(Error::InvalidConfig(
                        "kernel increments must be nonnegative: K is not non-increasing".into(),
                    ));
                }
            }
        }
        Ok(DiscreteModel { sigma, beta, a_seq, noise })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn a_seq(&self) -> &SeqFamily {
        &self.a_seq
    }

    pub fn noise(&self) -> NoiseKind {
        self.noise
    }
}

/// Hurwitz zeta sum_{k>=0} (a+k)^{-s} for s > 1 by Euler-Maclaurin after
/// an explicit head; accurate to near machine precision for a >= 1.
fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    debug_assert!(s > 1.0 && a >= 1.0);
    let head = 64usize;
    let mut acc = 0.0;
    for k in 0..head {
        acc += (a + k as f64).powf(-s);
    }
    let x = a + head as f64;
    acc + x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s) + s * x.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * x.powf(-s - 3.0) / 720.0
}

/// K_n = sum_{j > n} a_j.
pub fn k_seq(m: &DiscreteModel, n: usize) -> Result<f64> {
    match &m.a_seq {
        SeqFamily::FiniteSeq(a) => Ok(a.iter().skip(n + 1).sum()),
        // sum_{j>n} c (j+1)^{-1-alpha} = c zeta(1+alpha, n+2)
        SeqFamily::PowerLawSeq { c, alpha } => Ok(c * hurwitz_zeta(1.0 + alpha, n as f64 + 2.0)),
        SeqFamily::FromKernel { model, h } => {
            let kv = model.kernel().values_at_multiples(*h, n + 1)?;
            Ok(kv[n])
        }
    }
}

/// sum_{n>=0} zeta(s, n+2)^2 for s = 1 + alpha, alpha > 1/2: explicit head,
/// then Euler-Maclaurin on the squared asymptotic expansion of zeta.
fn zeta_tail_sq_sum(alpha: f64) -> f64 {
    let s = 1.0 + alpha;
    let n_head = 2000usize;
    let mut acc = 0.0;
    for n in 0..n_head {
        let z = hurwitz_zeta(s, n as f64 + 2.0);
        acc += z * z;
    }
    // zeta(s, x) ~ A x^{1-s} + B x^{-s} + C x^{-s-1}
    let (a, b, c) = (1.0 / (s - 1.0), 0.5, s / 12.0);
    let terms = [
        (a * a, 2.0 - 2.0 * s),
        (2.0 * a * b, 1.0 - 2.0 * s),
        (b * b + 2.0 * a * c, -2.0 * s),
        (2.0 * b * c, -2.0 * s - 1.0),
        (c * c, -2.0 * s - 2.0),
    ];
    let x = n_head as f64 + 2.0;
    let mut tail = 0.0;
    for (coeff, q) in terms {
        let integral = coeff * x.powf(q + 1.0) / (-q - 1.0);
        let half = 0.5 * coeff * x.powf(q);
        let deriv = coeff * q * x.powf(q - 1.0) / 12.0;
        tail += integral + half - deriv;
    }
    acc + tail
}

/// beta^2 sum_{n>=0} K_n^2 against the unit threshold, with the same
/// verdict taxonomy as the continuous margin.
pub fn discrete_stationarity(m: &DiscreteModel) -> Result<Stationarity> {
    if m.beta == 0.0 {
        return Ok(Stationarity::Stationary { margin: 0.0 });
    }
    let sum_k2 = match &m.a_seq {
        SeqFamily::FiniteSeq(a) => {
            let mut acc = 0.0;
            for n in 0..a.len().saturating_sub(1) {
                let k: f64 = a.iter().skip(n + 1).sum();
                acc += k * k;
            }
            acc
        }
        SeqFamily::PowerLawSeq { c, alpha } => {
            // K_n ~ (c/alpha) n^{-alpha}: square-summable only past 1/2
            if *alpha <= 0.5 {
                return Ok(Stationarity::NonStationary {
                    reason: NonStationaryReason::KernelNotL2,
                });
            }
            c * c * zeta_tail_sq_sum(*alpha)
        }
        SeqFamily::FromKernel { model, h } => {
            let kernel = model.kernel();
            match kernel.l2_norm_sq(kernel.default_horizon(), DEFAULT_STEP)? {
                IntegralVerdict::Finite(_) => {}
                IntegralVerdict::Divergent => {
                    return Ok(Stationarity::NonStationary {
                        reason: NonStationaryReason::KernelNotL2,
                    })
                }
                IntegralVerdict::Undetermined => {
                    return Ok(Stationarity::NonStationary {
                        reason: NonStationaryReason::Undetermined,
                    })
                }
            }
            let span = kernel.default_horizon().max(kernel.structure_extent() + 1.0);
            let n_body = (span / h).ceil() as usize;
            let kv = kernel.values_at_multiples(*h, n_body)?;
            let body: f64 = kv.iter().map(|k| k * k).sum();
            // Euler-Maclaurin remainder: sum_{j>n} K(jh)^2 =
            // (1/h) int_{nh}^inf K^2 - K(nh)^2 / 2 - O(h K K')
            let x_cut = n_body as f64 * h;
            let last = *kv.last().unwrap();
            body + kernel.l2_tail_from(x_cut)? / h - 0.5 * last * last
        }
    };
    Ok(margin_verdict(m.beta * m.beta * sum_k2))
}

/// Memory class from the first-moment test sum_j j a_j = sum_n K_n.
pub fn discrete_memory(m: &DiscreteModel) -> Result<MemoryClass> {
    Ok(match &m.a_seq {
        SeqFamily::FiniteSeq(_) => MemoryClass::Short,
        // sum_j j (j+1)^{-1-alpha} diverges exactly when alpha <= 1
        SeqFamily::PowerLawSeq { alpha, .. } => {
            if *alpha <= 1.0 {
                MemoryClass::Long
            } else {
                MemoryClass::Short
            }
        }
        SeqFamily::FromKernel { model, .. } => {
            let kernel = model.kernel();
            match kernel.l1_norm(kernel.default_horizon(), DEFAULT_STEP)? {
                // sum_n K_n ~ (1/h) int K: finite tails are summable
                IntegralVerdict::Finite(_) => MemoryClass::Short,
                // increments were validated nonnegative, so divergence is
                // genuine long memory
                IntegralVerdict::Divergent => MemoryClass::Long,
                IntegralVerdict::Undetermined => MemoryClass::Undetermined,
            }
        }
    })
}

/// A simulated discrete ensemble: V_n and U_n for n = 1..=steps, X_n for
/// n = 0..=steps, with X_0 = 0 and V_1 = sigma.
#[derive(Debug, Clone)]
pub struct DiscreteEnsemble {
    steps: usize,
    seed: u64,
    noise: NoiseKind,
    v: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
}

impl DiscreteEnsemble {
    pub fn paths(&self) -> usize {
        self.v.len()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn v(&self, path: usize, n: usize) -> f64 {
        assert!((1..=self.steps).contains(&n), "V_n defined for 1 <= n <= steps");
        self.v[path][n - 1]
    }

    pub fn u(&self, path: usize, n: usize) -> f64 {
        assert!((1..=self.steps).contains(&n), "U_n defined for 1 <= n <= steps");
        self.u[path][n - 1]
    }

    pub fn x(&self, path: usize, n: usize) -> f64 {
        assert!(n <= self.steps, "X_n defined for 0 <= n <= steps");
        self.x[path][n]
    }

    /// The noise value xi_n that drove this path, regenerated.
    pub fn xi(&self, path: usize, n: usize) -> f64 {
        assert!((1..=self.steps).contains(&n), "xi_n defined for 1 <= n <= steps");
        noise_draw(self.noise, self.seed, path as u64, (n - 1) as u64)
    }
}

fn noise_draw(kind: NoiseKind, seed: u64, path: u64, idx: u64) -> f64 {
    match kind {
        NoiseKind::StandardNormal => rng::normal(seed, path, idx),
        NoiseKind::Rademacher => rng::rademacher(seed, path, idx),
    }
}

/// Run the recursion. The convolution is accumulated in ascending j with
/// terms associated as K * (V_j * xi_j), mirroring the continuous scheme;
/// with a FromKernel sequence on a matching grid the two V grids agree
/// bit for bit.
pub fn simulate_discrete(
    m: &DiscreteModel,
    steps: usize,
    paths: usize,
    seed: u64,
) -> Result<DiscreteEnsemble> {
    if steps < 1 || paths < 1 {
        return Err(Error::InvalidConfig(format!(
            "need at least one step and one path, got steps={steps}, paths={paths}"
        )));
    }
    let kd: Vec<f64> = match &m.a_seq {
        SeqFamily::FromKernel { model, h } => {
            if steps > 1 {
                model.kernel().values_at_multiples(*h, steps - 1)?
            } else {
                Vec::new()
            }
        }
        _ => (0..steps.saturating_sub(1)).map(|n| k_seq(m, n)).collect::<Result<_>>()?,
    };
    let (sigma, beta, noise) = (m.sigma, m.beta, m.noise);
    let triples: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..paths)
        .into_par_iter()
        .map(|p| discrete_path(&kd, sigma, beta, noise, steps, seed, p as u64))
        .collect();
    let mut v = Vec::with_capacity(paths);
    let mut u = Vec::with_capacity(paths);
    let mut x = Vec::with_capacity(paths);
    for (pv, pu, px) in triples {
        v.push(pv);
        u.push(pu);
        x.push(px);
    }
    Ok(DiscreteEnsemble { steps, seed, noise, v, u, x })
}

fn discrete_path(
    kd: &[f64],
    sigma: f64,
    beta: f64,
    noise: NoiseKind,
    steps: usize,
    seed: u64,
    path: u64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let xi: Vec<f64> = (0..steps).map(|i| noise_draw(noise, seed, path, i as u64)).collect();
    let mut v = vec![0.0; steps];
    let mut u = vec![0.0; steps];
    let mut x = vec![0.0; steps + 1];
    v[0] = sigma;
    u[0] = v[0] * xi[0];
    x[1] = x[0] + u[0];
    if beta == 0.0 {
        for n in 1..steps {
            v[n] = sigma;
            u[n] = sigma * xi[n];
            x[n + 1] = x[n] + u[n];
        }
        return (v, u, x);
    }
    for n in 1..steps {
        // v[j], u[j] hold V_{j+1}, U_{j+1}: compute V_{n+1} at slot n
        let mut acc = 0.0;
        for (j, &uj) in u[..n].iter().enumerate() {
            acc += kd[n - 1 - j] * uj;
        }
        v[n] = sigma + beta * acc;
        u[n] = v[n] * xi[n];
        x[n + 1] = x[n] + u[n];
    }
    (v, u, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate, SimConfig};
    use crate::testkit::power_law_config;
    use approx::assert_relative_eq;

    fn finite_model(sigma: f64, beta: f64, noise: NoiseKind) -> DiscreteModel {
        DiscreteModel::new(sigma, beta, SeqFamily::FiniteSeq(vec![1.0, 0.5]), noise).unwrap()
    }

    #[test]
    fn tail_sums_of_a_finite_sequence() {
        let m = finite_model(1.0, 0.5, NoiseKind::StandardNormal);
        assert_eq!(k_seq(&m, 0).unwrap(), 0.5);
        assert_eq!(k_seq(&m, 1).unwrap(), 0.0);
        assert_eq!(k_seq(&m, 7).unwrap(), 0.0);
        match discrete_stationarity(&m).unwrap() {
            Stationarity::Stationary { margin } => assert_relative_eq!(margin, 0.0625),
            v => panic!("unexpected verdict {v:?}"),
        }
    }

    #[test]
    fn tail_sums_of_the_power_law_sequence() {
        let m = DiscreteModel::new(
            1.0,
            0.3,
            SeqFamily::PowerLawSeq { c: 1.0, alpha: 1.5 },
            NoiseKind::StandardNormal,
        )
        .unwrap();
        // zeta(2.5, 2) and zeta(2.5, 7), frozen independently
        assert_relative_eq!(k_seq(&m, 0).unwrap(), 0.34148725725091718, max_relative = 1e-12);
        assert_relative_eq!(k_seq(&m, 5).unwrap(), 0.04008175793366070, max_relative = 1e-12);
    }

    #[test]
    fn kernel_increment_tails_telescope_to_the_kernel() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let h = 0.25;
        let m = DiscreteModel::new(
            1.0,
            0.3,
            SeqFamily::FromKernel { model: cfg.clone(), h },
            NoiseKind::StandardNormal,
        )
        .unwrap();
        for n in [0usize, 3, 10] {
            let want = cfg.kernel().eval((n as f64 + 1.0) * h).unwrap();
            assert_eq!(k_seq(&m, n).unwrap(), want);
        }
    }

    #[test]
    fn discrete_margin_of_the_power_law_family() {
        let m = DiscreteModel::new(
            1.0,
            0.3,
            SeqFamily::PowerLawSeq { c: 1.0, alpha: 0.75 },
            NoiseKind::StandardNormal,
        )
        .unwrap();
        match discrete_stationarity(&m).unwrap() {
            Stationarity::Stationary { margin } => {
                assert_relative_eq!(margin, 0.306851118986414, max_relative = 1e-9);
            }
            v => panic!("unexpected verdict {v:?}"),
        }

        let thin = DiscreteModel::new(
            1.0,
            0.3,
            SeqFamily::PowerLawSeq { c: 1.0, alpha: 0.4 },
            NoiseKind::StandardNormal,
        )
        .unwrap();
        assert!(matches!(
            discrete_stationarity(&thin).unwrap(),
            Stationarity::NonStationary { reason: NonStationaryReason::KernelNotL2 }
        ));

        let frozen = DiscreteModel::new(
            1.0,
            0.0,
            SeqFamily::PowerLawSeq { c: 1.0, alpha: 0.4 },
            NoiseKind::StandardNormal,
        )
        .unwrap();
        assert!(matches!(
            discrete_stationarity(&frozen).unwrap(),
            Stationarity::Stationary { margin } if margin == 0.0
        ));
    }

    #[test]
    fn kernel_increment_margin_tracks_the_continuous_margin() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let h = 0.01f64;
        let m = DiscreteModel::new(
            1.0,
            0.3 * h.sqrt(),
            SeqFamily::FromKernel { model: cfg, h },
            NoiseKind::StandardNormal,
        )
        .unwrap();
        match discrete_stationarity(&m).unwrap() {
            Stationarity::Stationary { margin } => {
                assert_relative_eq!(margin, 0.32, max_relative = 0.01);
            }
            v => panic!("unexpected verdict {v:?}"),
        }
    }

    #[test]
    fn memory_classes() {
        let power = |alpha: f64| {
            DiscreteModel::new(
                1.0,
                0.1,
                SeqFamily::PowerLawSeq { c: 1.0, alpha },
                NoiseKind::StandardNormal,
            )
            .unwrap()
        };
        assert_eq!(discrete_memory(&power(0.75)).unwrap(), MemoryClass::Long);
        assert_eq!(discrete_memory(&power(1.0)).unwrap(), MemoryClass::Long);
        assert_eq!(discrete_memory(&power(1.5)).unwrap(), MemoryClass::Short);
        assert_eq!(
            discrete_memory(&finite_model(1.0, 0.1, NoiseKind::Rademacher)).unwrap(),
            MemoryClass::Short
        );
        let from_kernel = DiscreteModel::new(
            1.0,
            0.03,
            SeqFamily::FromKernel { model: power_law_config(1.0, 0.3, 1.0, 0.75), h: 0.01 },
            NoiseKind::StandardNormal,
        )
        .unwrap();
        assert_eq!(discrete_memory(&from_kernel).unwrap(), MemoryClass::Long);
    }

    #[test]
    fn no_feedback_keeps_v_at_sigma() {
        let m = finite_model(1.5, 0.0, NoiseKind::StandardNormal);
        let e = simulate_discrete(&m, 6, 3, 17).unwrap();
        for p in 0..3 {
            let mut x = 0.0;
            for n in 1..=6 {
                assert_eq!(e.v(p, n), 1.5);
                assert_eq!(e.u(p, n), 1.5 * e.xi(p, n));
                x += e.u(p, n);
                assert_eq!(e.x(p, n), x);
            }
            assert_eq!(e.x(p, 0), 0.0);
        }
    }

    #[test]
    fn three_step_hand_expansion_in_exact_arithmetic() {
        // Rademacher noise keeps every quantity a dyadic rational, so the
        // hand expansion matches exactly:
        //   V_2 = sigma + beta K_0 U_1,  V_3 = sigma + beta K_0 U_2
        let m = finite_model(2.0, 0.5, NoiseKind::Rademacher);
        let e = simulate_discrete(&m, 3, 4, 23).unwrap();
        for p in 0..4 {
            let xi1 = e.xi(p, 1);
            let xi2 = e.xi(p, 2);
            assert!(xi1.abs() == 1.0 && xi2.abs() == 1.0);
            let v2 = 2.0 + 0.5 * (0.5 * (2.0 * xi1));
            assert_eq!(e.v(p, 2), v2);
            assert_eq!(e.v(p, 3), 2.0 + 0.5 * (0.5 * (v2 * xi2)));
            assert_eq!(e.x(p, 3), e.x(p, 2) + e.u(p, 3));
        }
    }

    #[test]
    fn from_kernel_reproduces_the_continuous_scheme_bit_for_bit() {
        let cfg = power_law_config(1.0, 0.3, 1.0, 0.75);
        let h = 1.0 / 16.0;
        let n = 32usize;
        let sim = SimConfig::new(cfg.clone(), n as f64 * h, h, 3, 42, 1.0).unwrap();
        let cont = simulate(&sim).unwrap();

        let sqrt_h = h.sqrt();
        let m = DiscreteModel::new(
            1.0,
            0.3 * sqrt_h,
            SeqFamily::FromKernel { model: cfg, h },
            NoiseKind::StandardNormal,
        )
        .unwrap();
        let disc = simulate_discrete(&m, n + 1, 3, 42).unwrap();

        for p in 0..3 {
            for i in 0..=n {
                if i >= 1 {
                    assert_eq!(disc.v(p, i), cont.v(p)[i - 1], "V mismatch at path {p}, n {i}");
                }
                assert_eq!(disc.x(p, i) * sqrt_h, cont.x(p)[i], "X mismatch at path {p}, n {i}");
            }
            assert_eq!(disc.v(p, n + 1), cont.v(p)[n]);
        }
    }

    #[test]
    fn ensembles_are_deterministic_and_prefix_stable() {
        let m = DiscreteModel::new(
            1.0,
            0.3,
            SeqFamily::PowerLawSeq { c: 0.5, alpha: 0.75 },
            NoiseKind::StandardNormal,
        )
        .unwrap();
        let a = simulate_discrete(&m, 12, 2, 9).unwrap();
        let b = simulate_discrete(&m, 12, 5, 9).unwrap();
        for p in 0..2 {
            for n in 1..=12 {
                assert_eq!(a.v(p, n), b.v(p, n));
                assert_eq!(a.u(p, n), b.u(p, n));
            }
        }
    }

    #[test]
    fn sample_statistics_match_the_noise_model() {
        let m = DiscreteModel::new(
            1.0,
            0.3,
            SeqFamily::PowerLawSeq { c: 0.5, alpha: 0.75 },
            NoiseKind::StandardNormal,
        )
        .unwrap();
        let paths = 3000;
        let e = simulate_discrete(&m, 12, paths, 2024).unwrap();
        let nf = paths as f64;

        // E V_n = sigma
        for n in [2usize, 6, 12] {
            let mean = (0..paths).map(|p| e.v(p, n)).sum::<f64>() / nf;
            let var =
                (0..paths).map(|p| (e.v(p, n) - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            let se = (var / nf).sqrt();
            assert!((mean - 1.0).abs() < 3.0 * se, "mean V_{n} = {mean}");
        }

        // U is uncorrelated across times
        let (a, b): (Vec<f64>, Vec<f64>) =
            (0..paths).map(|p| (e.u(p, 3), e.u(p, 8))).unzip();
        let ma = a.iter().sum::<f64>() / nf;
        let mb = b.iter().sum::<f64>() / nf;
        let mut caa = 0.0;
        let mut cbb = 0.0;
        let mut cab = 0.0;
        for p in 0..paths {
            caa += (a[p] - ma) * (a[p] - ma);
            cbb += (b[p] - mb) * (b[p] - mb);
            cab += (a[p] - ma) * (b[p] - mb);
        }
        let corr = cab / (caa.sqrt() * cbb.sqrt());
        assert!(corr.abs() < 3.0 / nf.sqrt(), "corr(U_3, U_8) = {corr}");

        // conditional-variance identity: U_{n+1}^2 regressed on V_{n+1}^2
        let xs: Vec<f64> = (0..paths).map(|p| e.v(p, 8).powi(2)).collect();
        let ys: Vec<f64> = (0..paths).map(|p| e.u(p, 8).powi(2)).collect();
        let mx = xs.iter().sum::<f64>() / nf;
        let my = ys.iter().sum::<f64>() / nf;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 =
            xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let resid_sq: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let fit = my + slope * (x - mx);
                (y - fit) * (y - fit)
            })
            .sum();
        let se_slope = (resid_sq / (nf - 2.0) / sxx).sqrt();
        assert!((slope - 1.0).abs() < 3.0 * se_slope, "slope {slope} +- {se_slope}");
    }

    #[test]
    fn construction_rejects_bad_sequences() {
        assert!(DiscreteModel::new(
            1.0,
            0.3,
            SeqFamily::FiniteSeq(vec![1.0, -0.5]),
            NoiseKind::StandardNormal
        )
        .is_err());
        assert!(DiscreteModel::new(
            1.0,
            0.3,
            SeqFamily::PowerLawSeq { c: -1.0, alpha: 0.75 },
            NoiseKind::StandardNormal
        )
        .is_err());
        assert!(DiscreteModel::new(
            0.0,
            0.3,
            SeqFamily::FiniteSeq(vec![1.0]),
            NoiseKind::StandardNormal
        )
        .is_err());
        let m = finite_model(1.0, 0.3, NoiseKind::StandardNormal);
        assert!(simulate_discrete(&m, 0, 4, 1).is_err());
        assert!(simulate_discrete(&m, 4, 0, 1).is_err());
    }

    #[test]
    fn construction_rejects_non_monotone_kernels() {
        use crate::measures::{Atom, DensityFamily, SignedMeasure, Support};
        let kappa = SignedMeasure::new(
            Support::NonnegativeHalfLine,
            vec![Atom { location: 2.0, weight: -0.1 }],
            DensityFamily::PowerLaw { c: 1.0, alpha: 0.75 },
        )
        .unwrap();
        let lambda =
            SignedMeasure::point_mass(Support::DelayInterval(0.0), 0.0, 4.0 / 3.0 - 0.1).unwrap();
        let cfg = ModelConfig::new(1.0, 0.2, 0.0, lambda, kappa).unwrap();
        let result = DiscreteModel::new(
            1.0,
            0.2,
            SeqFamily::FromKernel { model: cfg, h: 0.25 },
            NoiseKind::StandardNormal,
        );
        assert!(matches!(result, Err(Error::InvalidConfig(_))));
    }
}
