//! The memory kernel K built from the delay measure and the long-run
//! measure, with its integral functionals (L² and L¹ norms, overlap
//! integrals) and tail asymptotics.
//!
//! For x below the delay horizon tau,
//!   K(x) = -Σ_{u_j >= x} λ_j - ∫_x^tau ℓ(u) du + Σ_{ρ_j >= x} κ_j + ∫_x^∞ k(s) ds
//! (delay atoms and density in mirrored coordinates); at and beyond tau only
//! the long-run terms remain. K is piecewise smooth with jumps exactly at
//! atom locations, so every quadrature below aligns its panels to those
//! breakpoints and evaluates one-sided limits at panel edges.

use crate::error::{Error, Result};
use crate::measures::{DensityFamily, SignedMeasure, Support, TailDecl};
use crate::quad::{self, PowerLogTailGrid, Segment};

/// Exact antiderivative metadata, present when the measures reduce to the
/// canonical power-law shape: a single delay atom at 0 balancing a pure
/// power-law density, giving K(x) = (c/α)·(1+x)^{-α}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    PowerLaw { c: f64, alpha: f64 },
}

/// Outcome of an integral functional whose convergence is decided by tail
/// metadata, never by quadrature growth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegralVerdict {
    Finite(f64),
    Divergent,
    Undetermined,
}

impl IntegralVerdict {
    pub fn finite(self) -> Option<f64> {
        match self {
            IntegralVerdict::Finite(v) => Some(v),
            _ => None,
        }
    }
}

/// How K behaves beyond every atom, table sample, and the delay horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
enum TailModel {
    /// K(x) = coeff·(1+x)^{-alpha} exactly beyond the extent.
    Power { coeff: f64, alpha: f64 },
    /// K(x) = ∫_x^∞ c(1+s)^{-1-α}·ln(e+s)^{-p} ds beyond the extent.
    PowerLog { c: f64, alpha: f64, p: f64 },
    /// K(x) = (c/rate)·e^{-rate·x} beyond the extent.
    Exponential { c: f64, rate: f64 },
    /// K vanishes beyond the extent.
    Compact,
    Unknown,
}

pub const DEFAULT_STEP: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct Kernel {
    lambda: SignedMeasure,
    kappa: SignedMeasure,
    tau: f64,
    closed_form: Option<ClosedForm>,
    breakpoints: Vec<f64>,
}

impl Kernel {
    /// Construct the kernel, enforcing mass balance at the default tolerance
    /// for the measures' families.
    pub fn new(lambda: SignedMeasure, kappa: SignedMeasure) -> Result<Self> {
        let tol = crate::measures::default_balance_tol(&lambda, &kappa);
        Self::with_balance_tol(lambda, kappa, tol)
    }

    pub fn with_balance_tol(lambda: SignedMeasure, kappa: SignedMeasure, tol: f64) -> Result<Self> {
        match crate::measures::validate_balance(&lambda, &kappa, tol)? {
            crate::measures::Balance::Balanced => {}
            crate::measures::Balance::Unbalanced { discrepancy } => {
                return Err(Error::Unbalanced { discrepancy, tol });
            }
        }
        let tau = match lambda.support() {
            Support::DelayInterval(t) => t,
            Support::NonnegativeHalfLine => unreachable!("balance validation checked supports"),
        };
        let closed_form = match (lambda.atoms(), lambda.density(), kappa.atoms(), kappa.density()) {
            ([a], DensityFamily::Zero, [], DensityFamily::PowerLaw { c, alpha })
                if a.location == 0.0 =>
            {
                Some(ClosedForm::PowerLaw { c: *c, alpha: *alpha })
            }
            _ => None,
        };
        let mut breakpoints: Vec<f64> = kappa
            .atoms()
            .iter()
            .chain(lambda.atoms())
            .map(|a| a.location)
            .filter(|&l| l > 0.0)
            .collect();
        if tau > 0.0 {
            breakpoints.push(tau);
        }
        breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breakpoints.dedup();
        Ok(Self { lambda, kappa, tau, closed_form, breakpoints })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn closed_form(&self) -> Option<ClosedForm> {
        self.closed_form
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn lambda(&self) -> &SignedMeasure {
        &self.lambda
    }

    pub fn kappa(&self) -> &SignedMeasure {
        &self.kappa
    }

    /// Everything discrete or tabulated lies at or below this point; beyond
    /// it K is a pure density tail.
    pub(crate) fn structure_extent(&self) -> f64 {
        let last_atom = self.kappa.atoms().last().map_or(0.0, |a| a.location);
        let table_end = self.kappa.density().last_sample_location().unwrap_or(0.0);
        self.tau.max(last_atom).max(table_end)
    }

    /// Default quadrature horizon: past all structure with room for the
    /// tail correction to take over.
    pub fn default_horizon(&self) -> f64 {
        (50.0 * self.tau).max(self.structure_extent() + 100.0).max(100.0)
    }

    fn tail_model(&self) -> TailModel {
        match self.kappa.density() {
            DensityFamily::PowerLaw { c, alpha } => TailModel::Power { coeff: c / alpha, alpha: *alpha },
            DensityFamily::PowerLogLaw { c, alpha, p } => {
                TailModel::PowerLog { c: *c, alpha: *alpha, p: *p }
            }
            DensityFamily::Exponential { c, rate } => TailModel::Exponential { c: *c, rate: *rate },
            DensityFamily::Zero => TailModel::Compact,
            DensityFamily::Tabulated { grid, tail } => {
                let &(tn, kn) = grid.last().unwrap();
                match tail {
                    _ if kn.abs() <= 1e-12 => TailModel::Compact,
                    TailDecl::Index { alpha } => TailModel::Power {
                        coeff: kn * (1.0 + tn).powf(1.0 + alpha) / alpha,
                        alpha: *alpha,
                    },
                    TailDecl::Unknown => TailModel::Unknown,
                }
            }
        }
    }

    /// K(x) for x > 0, with the formula's closed conditions (atoms at
    /// exactly x are included), making K left-continuous at its jumps.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("kernel evaluated at x={x}; domain is x > 0")));
        }
        self.eval_with_atoms(x, true)
    }

    /// Right limit at 0: the natural display value, excluding any atoms
    /// sitting exactly at the origin.
    pub fn at_zero_plus(&self) -> Result<f64> {
        self.eval_with_atoms(0.0, false)
    }

    /// `include_at`: whether atoms exactly at x count (left limit / formula
    /// as written) or not (right limit).
    fn eval_with_atoms(&self, x: f64, include_at: bool) -> Result<f64> {
        let sum_from = |m: &SignedMeasure| -> f64 {
            m.atoms()
                .iter()
                .filter(|a| if include_at { a.location >= x } else { a.location > x })
                .map(|a| a.weight)
                .sum()
        };
        let mut v = sum_from(&self.kappa) + self.kappa.density().tail_integral(x, false)?;
        if x < self.tau {
            v -= sum_from(&self.lambda);
            v -= self.lambda.density().integral_between(x, self.tau);
        }
        Ok(v)
    }

    /// K at the nodes of breakpoint-aligned panels over (0, horizon], with
    /// one-sided values at panel edges: within a segment the left edge holds
    /// the right limit and the right edge the left limit, so trapezoid sums
    /// over these values see a smooth integrand on every panel.
    ///
    /// Computed by one backward sweep from the horizon: exact density
    /// increments per panel and exact atom jumps at segment boundaries. One
    /// unbounded tail integral is evaluated at the horizon; everything else
    /// is bounded-span arithmetic.
    pub(crate) fn panel_values(
        &self,
        step: f64,
        horizon: f64,
        extra_breaks: &[f64],
    ) -> Result<(Vec<Segment>, Vec<Vec<f64>>)> {
        if !(step > 0.0 && horizon > self.tau && horizon > 0.0) {
            return Err(Error::Grid(format!(
                "need step > 0 and horizon > tau, got step={step}, horizon={horizon}"
            )));
        }
        let mut breaks = self.breakpoints.clone();
        breaks.extend_from_slice(extra_breaks);
        breaks.retain(|&b| b > 0.0 && b < horizon);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        let segs = quad::segments(step, horizon, &breaks);
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(segs.len());
        // left-continuous value at the horizon seeds the sweep
        let mut right_value = self.eval(horizon)?;
        for seg in segs.iter().rev() {
            let h = (seg.b - seg.a) / seg.steps as f64;
            let mut v = vec![0.0; seg.steps + 1];
            v[seg.steps] = right_value;
            for i in (0..seg.steps).rev() {
                let a = seg.a + i as f64 * h;
                let b = seg.a + (i + 1) as f64 * h;
                let mut inc = self.kappa.density().integral_between(a, b);
                if seg.b <= self.tau {
                    inc -= self.lambda.density().integral_between(a, b);
                }
                v[i] = v[i + 1] + inc;
            }
            // crossing the boundary at seg.a: add atoms exactly there to
            // pass from the right limit to the left limit
            let at = seg.a;
            let atom_jump: f64 = self
                .kappa
                .atoms()
                .iter()
                .map(|a| if a.location == at { a.weight } else { 0.0 })
                .sum::<f64>()
                - if at < self.tau || (at == self.tau && at > 0.0) {
                    self.lambda
                        .atoms()
                        .iter()
                        .map(|a| if a.location == at { a.weight } else { 0.0 })
                        .sum::<f64>()
                } else {
                    0.0
                };
            right_value = v[0] + atom_jump;
            values.push(v);
        }
        values.reverse();
        Ok((segs, values))
    }

    /// ∫_x^∞ K² from the tail model, for the discrete margin's remainder.
    pub(crate) fn l2_tail_from(&self, x: f64) -> Result<f64> {
        self.tail_correction(x, 2, 0.0)
    }

    /// ∫_horizon^∞ K(x)^{power} dx from the tail model, for power in {1, 2};
    /// `delta` shifts the second factor for overlap tails (power 2 only).
    fn tail_correction(&self, horizon: f64, power: u32, delta: f64) -> Result<f64> {
        debug_assert!(horizon >= self.structure_extent());
        Ok(match self.tail_model() {
            TailModel::Compact => 0.0,
            TailModel::Power { coeff, alpha } => match (power, delta == 0.0) {
                (1, _) => coeff * (1.0 + horizon).powf(1.0 - alpha) / (alpha - 1.0),
                (2, true) => {
                    coeff * coeff * (1.0 + horizon).powf(1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0)
                }
                (2, false) => {
                    coeff * coeff * quad::power_product_tail(1.0 + horizon, delta, alpha, 1)
                }
                _ => unreachable!(),
            },
            TailModel::PowerLog { c, alpha, p } => {
                let grid = PowerLogTailGrid::build(c, alpha, p, horizon);
                match power {
                    1 => grid.l1_tail(),
                    2 if delta == 0.0 => grid.l2_tail(),
                    2 => grid.overlap_tail(delta),
                    _ => unreachable!(),
                }
            }
            TailModel::Exponential { c, rate } => {
                let k_h = c / rate * (-rate * horizon).exp();
                match power {
                    1 => k_h / rate,
                    2 => k_h * k_h * (-rate * delta).exp() / (2.0 * rate),
                    _ => unreachable!(),
                }
            }
            TailModel::Unknown => {
                return Err(Error::TailUndetermined(
                    "tail correction requires a declared tail index".into(),
                ))
            }
        })
    }

    /// Tail index of K itself (K ~ x^{-α_K}); None when unknown or when K
    /// has compact support / exponential tail (treated as +∞ decay).
    fn decay_class(&self) -> DecayClass {
        match self.tail_model() {
            TailModel::Compact | TailModel::Exponential { .. } => DecayClass::FasterThanAnyPower,
            TailModel::Power { alpha, .. } => DecayClass::Power { alpha, log_p: 0.0 },
            TailModel::PowerLog { alpha, p, .. } => DecayClass::Power { alpha, log_p: p },
            TailModel::Unknown => DecayClass::Unknown,
        }
    }

    /// ∫_0^∞ K², exact when the closed form is available, otherwise
    /// breakpoint-aligned trapezoid on (0, horizon] plus the analytic tail.
    pub fn l2_norm_sq(&self, horizon: f64, step: f64) -> Result<IntegralVerdict> {
        match self.square_integrability() {
            Some(true) => {}
            Some(false) => return Ok(IntegralVerdict::Divergent),
            None => return Ok(IntegralVerdict::Undetermined),
        }
        if let Some(ClosedForm::PowerLaw { c, alpha }) = self.closed_form {
            return Ok(IntegralVerdict::Finite(c * c / (alpha * alpha * (2.0 * alpha - 1.0))));
        }
        self.l2_norm_sq_numeric(horizon, step).map(IntegralVerdict::Finite)
    }

    /// The quadrature route unconditionally (no closed-form shortcut):
    /// trapezoid over one-sided panel values plus the analytic tail term.
    pub fn l2_norm_sq_numeric(&self, horizon: f64, step: f64) -> Result<f64> {
        if self.square_integrability() != Some(true) {
            return Err(Error::NotSquareIntegrable(
                "numeric L2 norm requires a square-integrable kernel".into(),
            ));
        }
        let horizon = self.checked_horizon(horizon)?;
        let (segs, values) = self.panel_values(step, horizon, &[])?;
        let mut acc = 0.0;
        for (seg, v) in segs.iter().zip(&values) {
            let h = (seg.b - seg.a) / seg.steps as f64;
            let mut s = 0.5 * (v[0] * v[0] + v[seg.steps] * v[seg.steps]);
            for x in &v[1..seg.steps] {
                s += x * x;
            }
            acc += s * h;
        }
        Ok(acc + self.tail_correction(horizon, 2, 0.0)?)
    }

    /// Whether K ∈ L²: decided from tail metadata.
    /// Some(true)/Some(false) when decidable, None when the tail is unknown.
    fn square_integrability(&self) -> Option<bool> {
        match self.decay_class() {
            DecayClass::FasterThanAnyPower => Some(true),
            DecayClass::Power { alpha, log_p } => {
                if alpha > 0.5 {
                    Some(true)
                } else if alpha < 0.5 {
                    Some(false)
                } else {
                    // K² ~ x^{-1}·ln^{-2p}: integrable iff 2p > 1
                    Some(log_p > 0.5)
                }
            }
            DecayClass::Unknown => None,
        }
    }

    fn integrability(&self) -> Option<bool> {
        match self.decay_class() {
            DecayClass::FasterThanAnyPower => Some(true),
            DecayClass::Power { alpha, log_p } => {
                if alpha > 1.0 {
                    Some(true)
                } else if alpha < 1.0 {
                    Some(false)
                } else {
                    Some(log_p > 1.0)
                }
            }
            DecayClass::Unknown => None,
        }
    }

    /// ∫_0^∞ |K|; the α > 1 analogue of the L² norm. For sign-definite
    /// kernels the trapezoid runs over K itself; sign changes inside panels
    /// are not split (the families in use are nonnegative).
    pub fn l1_norm(&self, horizon: f64, step: f64) -> Result<IntegralVerdict> {
        match self.integrability() {
            Some(true) => {}
            Some(false) => return Ok(IntegralVerdict::Divergent),
            None => return Ok(IntegralVerdict::Undetermined),
        }
        if let Some(ClosedForm::PowerLaw { c, alpha }) = self.closed_form {
            return Ok(IntegralVerdict::Finite(c / (alpha * (alpha - 1.0))));
        }
        let horizon = self.checked_horizon(horizon)?;
        let (segs, values) = self.panel_values(step, horizon, &[])?;
        let mut acc = 0.0;
        for (seg, v) in segs.iter().zip(&values) {
            let h = (seg.b - seg.a) / seg.steps as f64;
            let mut s = 0.5 * (v[0].abs() + v[seg.steps].abs());
            for x in &v[1..seg.steps] {
                s += x.abs();
            }
            acc += s * h;
        }
        Ok(IntegralVerdict::Finite(acc + self.tail_correction(horizon, 1, 0.0)?.abs()))
    }

    /// ∫_0^∞ K(s)·K(s+Δ) ds. At Δ = 0 this is the L² norm by definition and
    /// delegates to it exactly. Panels are aligned to the breakpoints of
    /// both factors (the base set and the set shifted left by Δ).
    pub fn overlap(&self, delta: f64, horizon: f64, step: f64) -> Result<f64> {
        if !(delta >= 0.0) {
            return Err(Error::Domain(format!("overlap shift must be >= 0, got {delta}")));
        }
        let l2 = self.l2_norm_sq(horizon, step)?;
        let Some(l2_value) = l2.finite() else {
            return Err(Error::NotSquareIntegrable(
                "overlap requires a square-integrable kernel".into(),
            ));
        };
        if delta == 0.0 {
            return Ok(l2_value);
        }
        let horizon = self.checked_horizon(horizon)?;
        // shifted factor jumps where s + Δ crosses a breakpoint
        let shifted: Vec<f64> = self
            .breakpoints
            .iter()
            .map(|b| b - delta)
            .filter(|&s| s > 0.0 && s < horizon)
            .collect();
        let (segs, base) = self.panel_values(step, horizon, &shifted)?;
        let shifted_vals = self.shifted_panel_values(&segs, delta)?;
        let mut acc = 0.0;
        for ((seg, v), w) in segs.iter().zip(&base).zip(&shifted_vals) {
            let h = (seg.b - seg.a) / seg.steps as f64;
            let mut s = 0.5 * (v[0] * w[0] + v[seg.steps] * w[seg.steps]);
            for i in 1..seg.steps {
                s += v[i] * w[i];
            }
            acc += s * h;
        }
        Ok(acc + self.tail_correction(horizon, 2, delta)?)
    }

    /// K(s+Δ) at the same panel nodes, by a backward sweep over the shifted
    /// nodes. One-sidedness carries over: a node at b - Δ takes the limit of
    /// K from the matching side of the breakpoint b.
    fn shifted_panel_values(&self, segs: &[Segment], delta: f64) -> Result<Vec<Vec<f64>>> {
        let horizon = segs.last().map_or(0.0, |s| s.b);
        let mut right_value = self.eval(horizon + delta)?;
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(segs.len());
        for seg in segs.iter().rev() {
            let h = (seg.b - seg.a) / seg.steps as f64;
            let mut v = vec![0.0; seg.steps + 1];
            v[seg.steps] = right_value;
            for i in (0..seg.steps).rev() {
                let a = seg.a + i as f64 * h + delta;
                let b = seg.a + (i + 1) as f64 * h + delta;
                let mut inc = self.kappa.density().integral_between(a, b);
                if b <= self.tau {
                    inc -= self.lambda.density().integral_between(a, b);
                }
                v[i] = v[i + 1] + inc;
            }
            let at = seg.a + delta;
            let atom_jump: f64 = self
                .kappa
                .atoms()
                .iter()
                .map(|a| if a.location == at { a.weight } else { 0.0 })
                .sum::<f64>()
                - self
                    .lambda
                    .atoms()
                    .iter()
                    .map(|a| if a.location == at && at <= self.tau && at > 0.0 { a.weight } else { 0.0 })
                    .sum::<f64>();
            right_value = v[0] + atom_jump;
            out.push(v);
        }
        out.reverse();
        Ok(out)
    }

    /// K at x = h, 2h, ..., nh (left-continuous point values, one backward
    /// sweep): the table shared by the moment solver and the simulator.
    pub fn values_at_multiples(&self, h: f64, n: usize) -> Result<Vec<f64>> {
        if !(h > 0.0) {
            return Err(Error::Grid(format!("step must be positive, got {h}")));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut v = vec![0.0; n];
        v[n - 1] = self.eval(n as f64 * h)?;
        for i in (0..n - 1).rev() {
            let a = (i + 1) as f64 * h;
            let b = (i + 2) as f64 * h;
            let mut inc = self.kappa.density().integral_between(a, b);
            // mirrored delay density contributes below tau only
            if a < self.tau {
                inc -= self.lambda.density().integral_between(a, b.min(self.tau));
            }
            // atoms in [a, b) move from excluded to included as x drops to a
            inc += self
                .kappa
                .atoms()
                .iter()
                .map(|t| if t.location >= a && t.location < b { t.weight } else { 0.0 })
                .sum::<f64>();
            // a λ atom stops counting once x reaches it, except that ALL
            // remaining λ terms vanish at once when x crosses tau
            if a < self.tau {
                inc -= self
                    .lambda
                    .atoms()
                    .iter()
                    .map(|t| {
                        if t.location >= a && (b >= self.tau || t.location < b) {
                            t.weight
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>();
            }
            v[i] = v[i + 1] + inc;
        }
        Ok(v)
    }

    fn checked_horizon(&self, horizon: f64) -> Result<f64> {
        let need = self.structure_extent();
        if horizon < need {
            return Err(Error::Grid(format!(
                "horizon {horizon} does not clear the kernel's structure (atoms/table/delay up to {need})"
            )));
        }
        Ok(horizon)
    }

    /// Tail decay metadata for the asymptotics layer: (alpha, log exponent,
    /// scale C) with K(x) ≈ C·x^{-alpha}·ln(x)^{-log_p}.
    pub(crate) fn tail_exponents(&self) -> Option<(f64, f64, f64)> {
        match self.tail_model() {
            TailModel::Power { coeff, alpha } => Some((alpha, 0.0, coeff)),
            TailModel::PowerLog { c, alpha, p } => Some((alpha, p, c / alpha)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum DecayClass {
    FasterThanAnyPower,
    Power { alpha: f64, log_p: f64 },
    Unknown,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit::{power_law_kernel, step_kernel};
    use approx::assert_relative_eq;

    #[test]
    fn power_law_eval_matches_closed_form() {
        let k = power_law_kernel(1.0, 0.75);
        assert!(matches!(k.closed_form(), Some(ClosedForm::PowerLaw { .. })));
        let v = k.eval(1.0).unwrap();
        assert_relative_eq!(v, (1.0 / 0.75) * 2.0f64.powf(-0.75), max_relative = 1e-14);
        // log-spaced grid agreement to 1e-10
        for i in 0..60 {
            let x = 10f64.powf(-3.0 + 7.0 * i as f64 / 59.0);
            let exact = (1.0 / 0.75) * (1.0 + x).powf(-0.75);
            assert_relative_eq!(k.eval(x).unwrap(), exact, max_relative = 1e-10);
        }
    }

    #[test]
    fn step_kernel_is_an_indicator() {
        let k = step_kernel();
        assert_eq!(k.eval(1.0).unwrap(), 1.0);
        assert_eq!(k.eval(2.0).unwrap(), 1.0); // closed condition includes the atom
        assert_eq!(k.eval(3.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_kernel_evaluates_to_zero() {
        let kappa = SignedMeasure::point_mass(Support::NonnegativeHalfLine, 0.0, 0.0).unwrap();
        let lambda = SignedMeasure::zero(Support::DelayInterval(0.0));
        let k = Kernel::new(lambda, kappa).unwrap();
        for x in [0.5, 1.0, 10.0] {
            assert_eq!(k.eval(x).unwrap(), 0.0);
        }
    }

    #[test]
    fn eval_rejects_nonpositive_points() {
        let k = power_law_kernel(1.0, 0.75);
        assert!(k.eval(0.0).is_err());
        assert!(k.eval(-1.0).is_err());
    }

    #[test]
    fn at_zero_plus_excludes_origin_atoms() {
        // the delay atom at 0 would force K(0) = 0 under balance; the right
        // limit keeps the example's 1/alpha instead
        let k = power_law_kernel(1.0, 0.75);
        assert_relative_eq!(k.at_zero_plus().unwrap(), 1.0 / 0.75, max_relative = 1e-14);
    }

    #[test]
    fn l2_norm_closed_form_and_numeric_routes() {
        let k = power_law_kernel(1.0, 0.75);
        let exact = 32.0 / 9.0;
        match k.l2_norm_sq(1e3, 0.01).unwrap() {
            IntegralVerdict::Finite(v) => assert_relative_eq!(v, exact, max_relative = 1e-12),
            other => panic!("expected finite, got {other:?}"),
        }
        let numeric = k.l2_norm_sq_numeric(1e3, 0.01).unwrap();
        assert_relative_eq!(numeric, exact, max_relative = 1e-3);
        // trapezoid error should be near its h²/12·|∫f''| estimate, well
        // inside 1e-3 but nowhere near closed-form exactness
        assert!((numeric - exact).abs() / exact > 1e-9);
    }

    #[test]
    fn l2_norm_divergent_below_half() {
        let k = power_law_kernel(1.0, 0.4);
        assert_eq!(k.l2_norm_sq(1e3, 0.01).unwrap(), IntegralVerdict::Divergent);
        assert!(k.l2_norm_sq_numeric(1e3, 0.01).is_err());
    }

    #[test]
    fn l2_norm_of_step_kernel_is_exact() {
        let k = step_kernel();
        match k.l2_norm_sq(110.0, 0.01).unwrap() {
            IntegralVerdict::Finite(v) => assert_relative_eq!(v, 2.0, max_relative = 1e-12),
            other => panic!("expected finite, got {other:?}"),
        }
    }

    #[test]
    fn l1_norm_thresholds_and_values() {
        let k = power_law_kernel(1.0, 1.5);
        match k.l1_norm(k.default_horizon(), 0.01).unwrap() {
            IntegralVerdict::Finite(v) => assert_relative_eq!(v, 4.0 / 3.0, max_relative = 1e-12),
            other => panic!("expected finite, got {other:?}"),
        }
        assert_eq!(
            power_law_kernel(1.0, 0.75).l1_norm(100.0, 0.01).unwrap(),
            IntegralVerdict::Divergent
        );
        let zero = Kernel::new(
            SignedMeasure::zero(Support::DelayInterval(0.0)),
            SignedMeasure::zero(Support::NonnegativeHalfLine),
        )
        .unwrap();
        assert_eq!(zero.l1_norm(100.0, 0.01).unwrap(), IntegralVerdict::Finite(0.0));
    }

    #[test]
    fn overlap_at_zero_equals_l2_value() {
        let k = power_law_kernel(1.0, 0.75);
        let l2 = k.l2_norm_sq(1e3, 0.01).unwrap().finite().unwrap();
        assert_eq!(k.overlap(0.0, 1e3, 0.01).unwrap(), l2);
    }

    #[test]
    fn overlap_of_step_kernel_shifted_by_one() {
        let k = step_kernel();
        let v = k.overlap(1.0, 110.0, 0.01).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn overlap_matches_independent_fine_quadrature() {
        // ∫_0^∞ (1/α²)((1+s)(1+s+Δ))^{-α} ds by direct fine-grid Simpson
        let alpha = 0.75f64;
        let delta = 10.0f64;
        let k = power_law_kernel(1.0, alpha);
        let body = quad::simpson(
            |s: f64| {
                ((1.0 + s) * (1.0 + s + delta)).powf(-alpha) / (alpha * alpha)
            },
            0.0,
            1e3,
            1_000_000,
        );
        let tail = quad::power_product_tail(1.0 + 1e3, delta, alpha, 2) / (alpha * alpha);
        let oracle = body + tail;
        let v = k.overlap(delta, 1e3, 0.01).unwrap();
        assert_relative_eq!(v, oracle, max_relative = 1e-3);
    }

    #[test]
    fn karamata_normalization_at_large_x() {
        for &alpha in &[0.6, 0.75, 0.9, 1.5] {
            let k = power_law_kernel(1.0, alpha);
            let x = 1e4f64;
            let ratio = k.eval(x).unwrap() * x.powf(alpha) * alpha / 1.0;
            assert!((ratio - 1.0).abs() < 0.01, "alpha={alpha}: ratio {ratio}");
        }
    }

    #[test]
    fn kernel_vanishes_at_infinity() {
        for &alpha in &[0.75, 1.5] {
            let k = power_law_kernel(1.0, alpha);
            assert!(k.eval(1e6).unwrap() < 1e-2);
        }
    }

    #[test]
    fn values_at_multiples_match_pointwise_eval() {
        let k = power_law_kernel(1.0, 0.75);
        let h = 0.05;
        let v = k.values_at_multiples(h, 400).unwrap();
        for (i, &vi) in v.iter().enumerate().step_by(37) {
            let x = (i + 1) as f64 * h;
            assert_relative_eq!(vi, k.eval(x).unwrap(), max_relative = 1e-12);
        }

        let s = step_kernel();
        let sv = s.values_at_multiples(0.5, 8).unwrap();
        assert_eq!(sv, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn delay_measure_with_density_enters_below_tau() {
        // λ: uniform density 1/2 on [-2, 0] (mirrored: table value 0.5 on
        // [0,2]), mass 1; κ: atom of mass 1 at 3.
        let lambda = SignedMeasure::new(
            Support::DelayInterval(2.0),
            vec![],
            DensityFamily::Tabulated {
                grid: vec![(0.0, 0.5), (2.0, 0.5)],
                tail: TailDecl::Unknown,
            },
        )
        .unwrap();
        let kappa = SignedMeasure::point_mass(Support::NonnegativeHalfLine, 3.0, 1.0).unwrap();
        let k = Kernel::new(lambda, kappa).unwrap();
        // x < tau: K(x) = -∫_x^2 0.5 du + 1 = 1 - (2-x)/2
        assert_relative_eq!(k.eval(1.0).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(k.eval(0.5).unwrap(), 0.25, max_relative = 1e-14);
        // tau <= x <= 3: only the atom
        assert_eq!(k.eval(2.5).unwrap(), 1.0);
        assert_eq!(k.eval(3.0).unwrap(), 1.0);
        assert_eq!(k.eval(3.5).unwrap(), 0.0);
        // quadrature integrates the piecewise shape exactly:
        // ∫_0^2 (x/2)² + ∫_2^3 1 = 2/3 + 1
        match k.l2_norm_sq(110.0, 0.01).unwrap() {
            IntegralVerdict::Finite(v) => {
                assert_relative_eq!(v, 2.0 / 3.0 + 1.0, max_relative = 1e-5)
            }
            other => panic!("expected finite, got {other:?}"),
        }
    }

    #[test]
    fn unbalanced_measures_are_rejected() {
        let kappa = SignedMeasure::new(
            Support::NonnegativeHalfLine,
            vec![],
            DensityFamily::PowerLaw { c: 1.0, alpha: 0.75 },
        )
        .unwrap();
        let lambda = SignedMeasure::point_mass(Support::DelayInterval(0.0), 0.0, 1.0).unwrap();
        match Kernel::new(lambda, kappa) {
            Err(Error::Unbalanced { discrepancy, .. }) => {
                assert_relative_eq!(discrepancy, -1.0 / 3.0, max_relative = 1e-12)
            }
            other => panic!("expected unbalanced rejection, got {other:?}"),
        }
    }

    #[test]
    fn tabulated_kappa_with_declared_tail_integrates() {
        // table equals 2(1+t)^{-2} on [0, 1], declared index 1 continues it:
        // K(x) = 2/(1+x), l2 = ∫ 4(1+x)^{-2} = 4
        let kappa = SignedMeasure::new(
            Support::NonnegativeHalfLine,
            vec![],
            DensityFamily::Tabulated {
                grid: vec![(0.0, 2.0), (0.5, 2.0 / 2.25), (1.0, 0.5)],
                tail: TailDecl::Index { alpha: 1.0 },
            },
        )
        .unwrap();
        let mass = kappa.total_mass().unwrap();
        let lambda = SignedMeasure::point_mass(Support::DelayInterval(0.0), 0.0, mass).unwrap();
        let k = Kernel::new(lambda, kappa).unwrap();
        // the table itself is piecewise linear, so compare against a dense
        // independent quadrature of the same K rather than the smooth formula
        let l2 = k.l2_norm_sq(200.0, 0.005).unwrap().finite().unwrap();
        let oracle = {
            // K table values by dense backward pointwise eval
            let n = 200_000;
            let h = 200.0 / n as f64;
            let v = k.values_at_multiples(h, n).unwrap();
            let mut acc = 0.5 * (k.at_zero_plus().unwrap().powi(2) + v[n - 1] * v[n - 1]) * h;
            for w in &v[..n - 1] {
                acc += w * w * h;
            }
            // tail: K(x) = coeff (1+x)^{-1} with coeff = k_n (1+t_n)²/α = 2
            acc + 4.0 / 201.0
        };
        assert_relative_eq!(l2, oracle, max_relative = 1e-4);
    }

    #[test]
    fn unknown_tail_blocks_unbounded_integrals() {
        let kappa = SignedMeasure::new(
            Support::NonnegativeHalfLine,
            vec![],
            DensityFamily::Tabulated {
                grid: vec![(0.0, 1.0), (1.0, 0.5)],
                tail: TailDecl::Unknown,
            },
        )
        .unwrap();
        let lambda = SignedMeasure::point_mass(Support::DelayInterval(0.0), 0.0, 1.0).unwrap();
        // balance itself cannot be verified -> tail-undetermined already
        assert!(matches!(Kernel::new(lambda, kappa), Err(Error::TailUndetermined(_))));
    }
}
