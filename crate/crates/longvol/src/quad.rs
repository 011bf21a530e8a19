//! Quadrature support: composite rules on breakpoint-aligned panels and
//! log-substituted integrals for power and power-log tails.
//!
//! Improper integrals are split into a finite body handled by a composite
//! rule and an analytic remainder beyond the cut. Power-log tails are swept
//! in u = ln(1+x) with the kernel stored in exponentially scaled form so the
//! critical tail index (where the raw factors under- and overflow while the
//! product stays O(1)) is computed stably.

/// Composite Simpson with at least two subintervals (count rounded up to even).
pub(crate) fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, subintervals: usize) -> f64 {
    let n = subintervals.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Three-point Simpson on a single panel.
fn simpson_panel<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

/// Panel layout for an integral over (0, horizon]: each span between
/// consecutive breakpoints is subdivided uniformly with steps no wider
/// than `step`, so no panel straddles a jump of the integrand.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub a: f64,
    pub b: f64,
    pub steps: usize,
}

pub(crate) fn segments(step: f64, horizon: f64, breakpoints: &[f64]) -> Vec<Segment> {
    let mut edges = vec![0.0];
    for &b in breakpoints {
        if b > 0.0 && b < horizon {
            edges.push(b);
        }
    }
    edges.push(horizon);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup();
    edges
        .windows(2)
        .filter(|w| w[1] - w[0] > 0.0)
        .map(|w| Segment {
            a: w[0],
            b: w[1],
            steps: (((w[1] - w[0]) / step).ceil() as usize).max(1),
        })
        .collect()
}

/// ∫_{t0}^∞ (t(t+Δ))^{-α} dt for 2α > 1, t0 > 0, Δ ≥ 0.
///
/// Substituting t = t0·e^y turns the tail into a smooth exponentially
/// decaying integrand; the cut is placed far enough past max(t0, Δ) that the
/// closed-form remainder (t_end + Δ/2)^{1-2α}/(2α-1) is exact to roundoff.
/// `refine` multiplies the subinterval density (1 = default accuracy).
pub(crate) fn power_product_tail(t0: f64, delta: f64, alpha: f64, refine: usize) -> f64 {
    debug_assert!(2.0 * alpha > 1.0 && t0 > 0.0 && delta >= 0.0);
    if delta == 0.0 {
        return t0.powf(1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0);
    }
    let y_max = 30.0 + (delta / t0).ln().max(0.0);
    let n = (y_max * 128.0).ceil() as usize * refine.max(1);
    let body = simpson(
        |y| {
            let t = t0 * y.exp();
            (t * (t + delta)).powf(-alpha) * t
        },
        0.0,
        y_max,
        n,
    );
    let t_end = t0 * y_max.exp();
    body + (t_end + 0.5 * delta).powf(1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0)
}

/// Power-log density c·(1+t)^{-1-α}·ln(e+t)^{-p} at t.
pub(crate) fn powerlog_density(c: f64, alpha: f64, p: f64, t: f64) -> f64 {
    c * (1.0 + t).powf(-1.0 - alpha) * (std::f64::consts::E + t).ln().powf(-p)
}

/// ∫_x^∞ c·(1+t)^{-1-α}·ln(e+t)^{-p} dt via u = ln(1+t).
///
/// In u the integrand is c·e^{-αu}·g(u) with g slowly varying; Simpson over
/// a range long enough that the first integration-by-parts remainder term at
/// the cut is negligible relative to the result.
pub(crate) fn powerlog_tail(c: f64, alpha: f64, p: f64, x: f64) -> f64 {
    debug_assert!(alpha > 0.0 && x >= 0.0);
    let u0 = (1.0 + x).ln();
    let range = 60.0 / alpha;
    let n = ((range * 200.0).ceil() as usize).clamp(1024, 400_000);
    let g = |u: f64| slow_log_factor(u, p);
    let body = simpson(
        |u| c * (alpha * (u0 - u)).exp() * g(u),
        u0,
        u0 + range,
        n,
    );
    let u1 = u0 + range;
    let rem = c * (-60.0f64).exp() * g(u1) / alpha;
    (body + rem) * (-alpha * u0).exp()
}

/// ln(e-1+e^u)^{-p}, the slowly varying factor of the power-log density in
/// u = ln(1+t) coordinates, stable for large u.
fn slow_log_factor(u: f64, p: f64) -> f64 {
    let v = if u > 40.0 {
        // ln(e-1+e^u) = u + ln(1 + (e-1)e^{-u})
        u + ((std::f64::consts::E - 1.0) * (-u).exp()).ln_1p()
    } else {
        (std::f64::consts::E - 1.0 + u.exp()).ln()
    };
    v.powf(-p)
}

/// ∫_0^∞ t·c·(1+t)^{-1-α}·ln(e+t)^{-p} dt for α > 1.
pub(crate) fn powerlog_first_moment(c: f64, alpha: f64, p: f64) -> f64 {
    debug_assert!(alpha > 1.0);
    // t·k(t) dt in u: c·(e^u - 1)·e^{-αu}·g(u) du = c·(e^{(1-α)u} - e^{-αu})·g(u) du
    let range = 80.0 / (alpha - 1.0).min(alpha);
    let n = ((range * 100.0).ceil() as usize).clamp(512, 400_000);
    let g = |u: f64| slow_log_factor(u, p);
    let body = simpson(
        |u| c * (((1.0 - alpha) * u).exp() - (-alpha * u).exp()) * g(u),
        0.0,
        range,
        n,
    );
    let rem = c * ((1.0 - alpha) * range).exp() * g(range) / (alpha - 1.0);
    body + rem
}

/// ∫_0^∞ t·c·(1+t)^{-2}·ln(e+t)^{-p} dt for p > 1, the borderline power
/// index where only the log factor decides integrability.
pub(crate) fn powerlog_first_moment_critical(c: f64, p: f64) -> f64 {
    debug_assert!(p > 1.0);
    // In u the integrand is c·(1 - e^{-u})·g(u), decaying like u^{-p}.
    let u1 = 4000.0;
    let n = 200_000;
    let body = simpson(
        |u| c * (1.0 - (-u).exp()) * slow_log_factor(u, p),
        0.0,
        u1,
        n,
    );
    body + c * slow_log_factor(u1, p) * u1 / (p - 1.0)
}

/// ∫_Δ^∞ c²·ln(e+s)^{-2p}·s^{-1} ds for p > 1/2 (the squared slowly varying
/// factor over s, appearing in the critical-decay asymptote).
pub(crate) fn slow_factor_sq_tail(c: f64, p: f64, delta: f64) -> f64 {
    debug_assert!(p > 0.5 && delta > 0.0);
    let u0 = delta.ln();
    let u1 = 4000.0f64.max(u0 + 100.0);
    let n = (((u1 - u0) * 50.0).ceil() as usize).clamp(512, 400_000);
    // ln(e + e^u) in stable form
    let g = |u: f64| {
        let v = if u > 40.0 {
            u + (std::f64::consts::E * (-u).exp()).ln_1p()
        } else {
            (std::f64::consts::E + u.exp()).ln()
        };
        v.powf(-2.0 * p)
    };
    let body = simpson(g, u0, u1, n);
    c * c * (body + u1.powf(1.0 - 2.0 * p) / (2.0 * p - 1.0))
}

/// Scaled tabulation of K(x) = ∫_x^∞ k for a power-log density, on a uniform
/// grid in u = ln(1+x) from ln(1+x0) outward. Stores s(u) = K·e^{αu}, the
/// slowly varying part, so products like K(u)K(v)e^u can be assembled in
/// exact exponent arithmetic at the critical index α = 1/2.
pub(crate) struct PowerLogTailGrid {
    c: f64,
    alpha: f64,
    p: f64,
    u0: f64,
    du: f64,
    scaled: Vec<f64>,
}

impl PowerLogTailGrid {
    pub fn build(c: f64, alpha: f64, p: f64, x0: f64) -> Self {
        let u0 = (1.0 + x0).ln();
        // Slowest decay rate among the weighted tail integrands drawn from
        // this grid; at the critical index the decay is only a power of u
        // and the grid must reach far out.
        let mut rate = 2.0 * alpha - 1.0;
        if alpha > 1.0 {
            rate = rate.min(alpha - 1.0);
        }
        let range = if rate <= 1e-3 {
            4000.0
        } else {
            (120.0 / rate).clamp(120.0, 4000.0)
        };
        let du = 0.01;
        let n = (range / du).ceil() as usize;
        let mut scaled = vec![0.0; n + 1];
        // Backward recursion K(u_i) = K(u_{i+1}) + ∫ panel k dx; in scaled
        // form s_i = s_{i+1}·e^{-α·du} + c·∫_0^{du} e^{-αt}·g(u_i + t) dt.
        let u_end = u0 + n as f64 * du;
        scaled[n] = powerlog_tail(c, alpha, p, u_end.exp() - 1.0) * (alpha * u_end).exp();
        if !scaled[n].is_finite() {
            // K underflowed at the far end; the asymptotic scaled value.
            scaled[n] = c / alpha * slow_log_factor(u_end, p);
        }
        let decay = (-alpha * du).exp();
        for i in (0..n).rev() {
            let ui = u0 + i as f64 * du;
            let panel = simpson_panel(|t| (-alpha * t).exp() * slow_log_factor(ui + t, p), 0.0, du);
            scaled[i] = scaled[i + 1] * decay + c * panel;
        }
        Self { c, alpha, p, u0, du, scaled }
    }

    fn u_end(&self) -> f64 {
        self.u0 + (self.scaled.len() - 1) as f64 * self.du
    }

    /// Scaled value s(u) = K(e^u - 1)·e^{αu}; beyond the grid the
    /// first-order asymptote applies.
    pub fn scaled_at(&self, u: f64) -> f64 {
        debug_assert!(u >= self.u0 - 1e-12);
        let t = (u - self.u0) / self.du;
        let i = t.floor() as usize;
        if i + 1 >= self.scaled.len() {
            return self.c / self.alpha * slow_log_factor(u, self.p);
        }
        let w = t - i as f64;
        self.scaled[i] * (1.0 - w) + self.scaled[i + 1] * w
    }

    /// K(x) for x ≥ x0.
    #[cfg(test)]
    pub fn eval(&self, x: f64) -> f64 {
        let u = (1.0 + x).ln();
        self.scaled_at(u.max(self.u0)) * (-self.alpha * u).exp()
    }

    /// ∫_{x0}^∞ K(x)² dx. Finite only when 2α > 1, or 2α = 1 with 2p > 1.
    pub fn l2_tail(&self) -> f64 {
        let a = self.alpha;
        let integrand = |i: usize| {
            let u = self.u0 + i as f64 * self.du;
            self.scaled[i] * self.scaled[i] * ((1.0 - 2.0 * a) * u).exp()
        };
        let mut acc = 0.5 * (integrand(0) + integrand(self.scaled.len() - 1));
        for i in 1..self.scaled.len() - 1 {
            acc += integrand(i);
        }
        let body = acc * self.du;
        let u1 = self.u_end();
        let w1 = integrand(self.scaled.len() - 1);
        let rem = if 2.0 * a - 1.0 > 1e-3 {
            w1 / (2.0 * a - 1.0)
        } else {
            // critical: integrand ~ (c/α)²·u^{-2p}
            w1 * u1 / (2.0 * self.p - 1.0)
        };
        body + rem
    }

    /// ∫_{x0}^∞ K(x) dx, for α > 1.
    pub fn l1_tail(&self) -> f64 {
        debug_assert!(self.alpha > 1.0);
        let a = self.alpha;
        let integrand = |i: usize| {
            let u = self.u0 + i as f64 * self.du;
            self.scaled[i] * ((1.0 - a) * u).exp()
        };
        let mut acc = 0.5 * (integrand(0) + integrand(self.scaled.len() - 1));
        for i in 1..self.scaled.len() - 1 {
            acc += integrand(i);
        }
        acc * self.du + integrand(self.scaled.len() - 1) / (a - 1.0)
    }

    /// ∫_{x0}^∞ K(s)·K(s+Δ) ds.
    pub fn overlap_tail(&self, delta: f64) -> f64 {
        let a = self.alpha;
        let term = |i: usize| {
            let u = self.u0 + i as f64 * self.du;
            // v = ln(1 + (e^u - 1) + Δ) = u + ln1p((Δ)·e^{-u}) up to the -1;
            // shift in u-coordinates of the second factor, exact for large u.
            let dv = (delta * (-u).exp()).ln_1p();
            let v = u + dv;
            // K(u)K(v)e^u = s(u)s(v)·e^{(1-2α)u - α·dv}
            self.scaled_at(u) * self.scaled_at(v) * ((1.0 - 2.0 * a) * u - a * dv).exp()
        };
        let n = self.scaled.len() - 1;
        let mut acc = 0.5 * (term(0) + term(n));
        for i in 1..n {
            acc += term(i);
        }
        let body = acc * self.du;
        let w1 = term(n);
        let rem = if 2.0 * a - 1.0 > 1e-3 {
            w1 / (2.0 * a - 1.0)
        } else {
            w1 * self.u_end() / (2.0 * self.p - 1.0)
        };
        body + rem
    }
}
