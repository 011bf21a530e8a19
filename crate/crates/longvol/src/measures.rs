//! Memory measures: finite signed measures made of point masses and a
//! density from a fixed family. Two of these (a delay measure on [-tau, 0]
//! and a long-run measure on [0, inf)) define the model's kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Point mass. For delay measures the location u >= 0 stands for mass at -u,
/// so both measures share one representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Tail behaviour declared for a tabulated density beyond its last sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailDecl {
    /// Beyond the last sample (t_n, k_n) the density continues as
    /// k_n * ((1+t)/(1+t_n))^{-1-alpha}.
    Index { alpha: f64 },
    Unknown,
}

/// Absolutely continuous part of a measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityFamily {
    /// k(t) = c * (1+t)^{-1-alpha}
    PowerLaw { c: f64, alpha: f64 },
    /// k(t) = c * (1+t)^{-1-alpha} * ln(e+t)^{-p}
    PowerLogLaw { c: f64, alpha: f64, p: f64 },
    /// k(t) = c * e^{-rate*t}
    Exponential { c: f64, rate: f64 },
    /// Piecewise-linear interpolation of (t, k(t)) samples; zero before the
    /// first sample, declared-tail extrapolation after the last.
    Tabulated { grid: Vec<(f64, f64)>, tail: TailDecl },
    Zero,
}

/// Where the measure lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    NonnegativeHalfLine,
    /// [-tau, 0], in mirrored coordinates u in [0, tau].
    DelayInterval(f64),
}

/// A finite signed measure: atoms plus a density. Immutable after
/// construction; all operations are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure {
    support: Support,
    atoms: Vec<Atom>,
    density: DensityFamily,
}

/// Verdict of the mass-balance check between the delay and long-run measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Balance {
    Balanced,
    Unbalanced { discrepancy: f64 },
}

/// Whether the first moment of |measure| is finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstMomentClass {
    Finite(f64),
    Infinite,
    Undetermined,
}

/// Below this absolute value, the last sample of an unknown-tail table is
/// treated as a genuine endpoint of compact support rather than a truncation.
const NEGLIGIBLE_DENSITY: f64 = 1e-12;

/// Default balance tolerance: quadrature error dominates for tabulated
/// densities, closed forms are exact to roundoff.
pub fn default_balance_tol(lambda: &SignedMeasure, kappa: &SignedMeasure) -> f64 {
    let tabulated = |m: &SignedMeasure| matches!(m.density, DensityFamily::Tabulated { .. });
    if tabulated(lambda) || tabulated(kappa) {
        1e-6
    } else {
        1e-9
    }
}

impl DensityFamily {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self {
            DensityFamily::PowerLaw { c, alpha } => {
                if !(*c > 0.0) || !(*alpha > 0.0) {
                    return bad(format!("power_law requires c > 0 and alpha > 0, got c={c}, alpha={alpha}"));
                }
            }
            DensityFamily::PowerLogLaw { c, alpha, p } => {
                if !(*c > 0.0) || !(*alpha > 0.0) || !p.is_finite() {
                    return bad(format!(
                        "power_log_law requires c > 0, alpha > 0, finite p, got c={c}, alpha={alpha}, p={p}"
                    ));
                }
            }
            DensityFamily::Exponential { c, rate } => {
                if !(*c > 0.0) || !(*rate > 0.0) {
                    return bad(format!("exponential requires c > 0 and rate > 0, got c={c}, rate={rate}"));
                }
            }
            DensityFamily::Tabulated { grid, tail } => {
                if grid.len() < 2 {
                    return bad("tabulated density needs at least two samples".into());
                }
                if grid[0].0 < 0.0 {
                    return bad(format!("tabulated grid starts at {} < 0", grid[0].0));
                }
                for w in grid.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return bad(format!("tabulated grid not strictly increasing at t={}", w[1].0));
                    }
                }
                if grid.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return bad("tabulated grid contains non-finite entries".into());
                }
                if let TailDecl::Index { alpha } = tail {
                    if !(*alpha > 0.0) {
                        return bad(format!("declared tail index must be positive, got {alpha}"));
                    }
                }
            }
            DensityFamily::Zero => {}
        }
        Ok(())
    }

    /// Pointwise value k(t), t >= 0. For tables this is the interpolant and
    /// the declared-tail extrapolation; unknown tails evaluate to 0 beyond
    /// the last sample (integral operations guard that case separately).
    pub(crate) fn eval(&self, t: f64) -> f64 {
        match self {
            DensityFamily::PowerLaw { c, alpha } => c * (1.0 + t).powf(-1.0 - alpha),
            DensityFamily::PowerLogLaw { c, alpha, p } => quad::powerlog_density(*c, *alpha, *p, t),
            DensityFamily::Exponential { c, rate } => c * (-rate * t).exp(),
            DensityFamily::Tabulated { grid, tail } => {
                let (t0, _) = grid[0];
                let &(tn, kn) = grid.last().unwrap();
                if t < t0 {
                    0.0
                } else if t <= tn {
                    let i = grid.partition_point(|&(x, _)| x <= t).min(grid.len() - 1);
                    let (ta, ka) = grid[i - 1];
                    let (tb, kb) = grid[i];
                    let w = (t - ta) / (tb - ta);
                    ka * (1.0 - w) + kb * w
                } else {
                    match tail {
                        TailDecl::Index { alpha } => {
                            kn * ((1.0 + t) / (1.0 + tn)).powf(-1.0 - alpha)
                        }
                        TailDecl::Unknown => 0.0,
                    }
                }
            }
            DensityFamily::Zero => 0.0,
        }
    }

    /// ∫_x^∞ k(s) ds on the half line; `absolute` integrates |k| instead.
    pub(crate) fn tail_integral(&self, x: f64, absolute: bool) -> Result<f64> {
        debug_assert!(x >= 0.0);
        match self {
            DensityFamily::PowerLaw { c, alpha } => Ok(c / alpha * (1.0 + x).powf(-alpha)),
            DensityFamily::PowerLogLaw { c, alpha, p } => Ok(quad::powerlog_tail(*c, *alpha, *p, x)),
            DensityFamily::Exponential { c, rate } => Ok(c / rate * (-rate * x).exp()),
            DensityFamily::Tabulated { grid, tail } => {
                let &(tn, kn) = grid.last().unwrap();
                let beyond = match tail {
                    TailDecl::Index { alpha } => {
                        let magnitude = kn.abs() * (1.0 + tn) / alpha
                            * ((1.0 + x.max(tn)) / (1.0 + tn)).powf(-alpha);
                        if absolute || kn >= 0.0 { magnitude } else { -magnitude }
                    }
                    TailDecl::Unknown if kn.abs() <= NEGLIGIBLE_DENSITY => 0.0,
                    TailDecl::Unknown => {
                        return Err(Error::TailUndetermined(format!(
                            "tabulated density ends at t={tn} with value {kn:e} and no declared tail index"
                        )));
                    }
                };
                Ok(table_integral(grid, x, f64::INFINITY, absolute) + beyond)
            }
            DensityFamily::Zero => Ok(0.0),
        }
    }

    /// ∫_a^b k(s) ds over a bounded span, exact for every family except
    /// PowerLogLaw (composite Simpson there). Unknown table tails integrate
    /// as zero beyond the last sample; unbounded-integral callers guard that
    /// case through `tail_integral`.
    pub(crate) fn integral_between(&self, a: f64, b: f64) -> f64 {
        debug_assert!(0.0 <= a && a <= b);
        match self {
            DensityFamily::PowerLaw { c, alpha } => {
                c / alpha * ((1.0 + a).powf(-alpha) - (1.0 + b).powf(-alpha))
            }
            DensityFamily::PowerLogLaw { .. } => {
                let n = (((b - a) * 400.0).ceil() as usize).clamp(4, 200_000);
                quad::simpson(|t| self.eval(t), a, b, n)
            }
            DensityFamily::Exponential { c, rate } => {
                c / rate * ((-rate * a).exp() - (-rate * b).exp())
            }
            DensityFamily::Tabulated { grid, tail } => {
                let &(tn, kn) = grid.last().unwrap();
                let mut acc = table_integral(grid, a, b, false);
                if b > tn {
                    if let TailDecl::Index { alpha } = tail {
                        let base = 1.0 + tn;
                        let lo = a.max(tn);
                        acc += kn * base / alpha
                            * (((1.0 + lo) / base).powf(-alpha) - ((1.0 + b) / base).powf(-alpha));
                    }
                }
                acc
            }
            DensityFamily::Zero => 0.0,
        }
    }

    /// ∫_0^b k(s) ds for compactly supported (delay) use; `absolute` for |k|.
    pub(crate) fn mass_up_to(&self, b: f64, absolute: bool) -> f64 {
        match self {
            DensityFamily::PowerLaw { c, alpha } => c / alpha * (1.0 - (1.0 + b).powf(-alpha)),
            DensityFamily::PowerLogLaw { c, alpha, p } => {
                quad::powerlog_tail(*c, *alpha, *p, 0.0) - quad::powerlog_tail(*c, *alpha, *p, b)
            }
            DensityFamily::Exponential { c, rate } => c / rate * (1.0 - (-rate * b).exp()),
            DensityFamily::Tabulated { grid, .. } => table_integral(grid, 0.0, b, absolute),
            DensityFamily::Zero => 0.0,
        }
    }

    pub(crate) fn last_sample_location(&self) -> Option<f64> {
        match self {
            DensityFamily::Tabulated { grid, .. } => Some(grid.last().unwrap().0),
            _ => None,
        }
    }
}

/// ∫ s·|k(s)| ds over the table's range, exact for the piecewise-linear
/// interpolant, splitting panels at sign crossings.
fn table_abs_first_moment(grid: &[(f64, f64)]) -> f64 {
    // ∫_lo^hi s·(v_lo + m·(s - lo)) ds with m the panel slope
    fn piece(lo: f64, hi: f64, vlo: f64, vhi: f64) -> f64 {
        let m = (vhi - vlo) / (hi - lo);
        let i2 = (hi * hi - lo * lo) / 2.0;
        let i3 = (hi * hi * hi - lo * lo * lo) / 3.0;
        vlo * i2 + m * (i3 - lo * i2)
    }
    let mut acc = 0.0;
    for w in grid.windows(2) {
        let (ta, ka) = w[0];
        let (tb, kb) = w[1];
        if ka * kb < 0.0 {
            let root = ta + ka * (tb - ta) / (ka - kb);
            acc += piece(ta, root, ka, 0.0).abs() + piece(root, tb, 0.0, kb).abs();
        } else {
            acc += piece(ta, tb, ka, kb).abs();
        }
    }
    acc
}

/// Integral of the piecewise-linear table over [a, b] ∩ [t_0, t_n]. With
/// `absolute` the integrand is |k|; on sign-changing panels the crossing is
/// handled exactly, so the result is exact for the interpolant.
fn table_integral(grid: &[(f64, f64)], a: f64, b: f64, absolute: bool) -> f64 {
    let mut acc = 0.0;
    for w in grid.windows(2) {
        let (ta, ka) = w[0];
        let (tb, kb) = w[1];
        let lo = ta.max(a);
        let hi = tb.min(b);
        if hi <= lo {
            continue;
        }
        let va = ka + (kb - ka) * (lo - ta) / (tb - ta);
        let vb = ka + (kb - ka) * (hi - ta) / (tb - ta);
        acc += if absolute && va * vb < 0.0 {
            // two triangles around the zero crossing
            (va * va + vb * vb) / (va.abs() + vb.abs()) * (hi - lo) / 2.0
        } else if absolute {
            0.5 * (va.abs() + vb.abs()) * (hi - lo)
        } else {
            0.5 * (va + vb) * (hi - lo)
        };
    }
    acc
}

impl SignedMeasure {
    pub fn new(support: Support, atoms: Vec<Atom>, density: DensityFamily) -> Result<Self> {
        density.validate()?;
        if let Support::DelayInterval(tau) = support {
            if !(tau >= 0.0) {
                return Err(Error::InvalidConfig(format!("delay horizon tau={tau} must be >= 0")));
            }
            if let Some(t_last) = density.last_sample_location() {
                if t_last > tau {
                    return Err(Error::InvalidConfig(format!(
                        "tabulated delay density extends to t={t_last}, beyond tau={tau}"
                    )));
                }
            }
        }
        let upper = match support {
            Support::NonnegativeHalfLine => f64::INFINITY,
            Support::DelayInterval(tau) => tau,
        };
        for w in atoms.windows(2) {
            if !(w[1].location > w[0].location) {
                return Err(Error::InvalidConfig(format!(
                    "atom locations must be strictly increasing, got {} then {}",
                    w[0].location, w[1].location
                )));
            }
        }
        for a in &atoms {
            if !(a.location >= 0.0 && a.location <= upper) || !a.weight.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "atom at {} (weight {}) outside the measure's support",
                    a.location, a.weight
                )));
            }
        }
        Ok(Self { support, atoms, density })
    }

    /// Measure with no atoms and no density.
    pub fn zero(support: Support) -> Self {
        Self { support, atoms: Vec::new(), density: DensityFamily::Zero }
    }

    /// Single point mass, the common shape for delay measures.
    pub fn point_mass(support: Support, location: f64, weight: f64) -> Result<Self> {
        Self::new(support, vec![Atom { location, weight }], DensityFamily::Zero)
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> &DensityFamily {
        &self.density
    }

    /// Σ_j weight_j + ∫ k over the support.
    pub fn total_mass(&self) -> Result<f64> {
        let atoms: f64 = self.atoms.iter().map(|a| a.weight).sum();
        let density = match self.support {
            Support::NonnegativeHalfLine => self.density.tail_integral(0.0, false)?,
            Support::DelayInterval(tau) => self.density.mass_up_to(tau, false),
        };
        Ok(atoms + density)
    }

    /// Σ_j |weight_j| + ∫ |k| over the support.
    pub fn total_variation(&self) -> Result<f64> {
        let atoms: f64 = self.atoms.iter().map(|a| a.weight.abs()).sum();
        let density = match self.support {
            Support::NonnegativeHalfLine => self.density.tail_integral(0.0, true)?,
            Support::DelayInterval(tau) => self.density.mass_up_to(tau, true),
        };
        Ok(atoms + density)
    }

    /// True when all atoms and the density carry one sign (or vanish).
    /// The density families are nonnegative by construction, so only atoms
    /// and sign-changing tables can break this.
    pub fn is_sign_definite(&self) -> bool {
        let mut has_pos = false;
        let mut has_neg = false;
        let mut note = |w: f64| {
            if w > 0.0 {
                has_pos = true;
            } else if w < 0.0 {
                has_neg = true;
            }
        };
        for a in &self.atoms {
            note(a.weight);
        }
        match &self.density {
            DensityFamily::Zero => {}
            DensityFamily::Tabulated { grid, .. } => {
                for &(_, v) in grid {
                    note(v);
                }
            }
            _ => note(1.0),
        }
        !(has_pos && has_neg)
    }

    /// Class of ∫ s |m|(ds) for a measure on the half line.
    pub fn first_moment_class(&self) -> Result<FirstMomentClass> {
        if !matches!(self.support, Support::NonnegativeHalfLine) {
            return Err(Error::Domain(
                "first moment classification applies to half-line measures".into(),
            ));
        }
        let atom_part: f64 = self.atoms.iter().map(|a| a.location * a.weight.abs()).sum();
        let density_part = match &self.density {
            DensityFamily::Zero => FirstMomentClass::Finite(0.0),
            DensityFamily::Exponential { c, rate } => FirstMomentClass::Finite(c / (rate * rate)),
            DensityFamily::PowerLaw { c, alpha } => {
                if *alpha > 1.0 {
                    FirstMomentClass::Finite(c / (alpha * (alpha - 1.0)))
                } else {
                    FirstMomentClass::Infinite
                }
            }
            DensityFamily::PowerLogLaw { c, alpha, p } => {
                if *alpha > 1.0 {
                    FirstMomentClass::Finite(quad::powerlog_first_moment(*c, *alpha, *p))
                } else if *alpha == 1.0 && *p > 1.0 {
                    FirstMomentClass::Finite(quad::powerlog_first_moment_critical(*c, *p))
                } else {
                    // alpha < 1, or alpha = 1 with p <= 1: s * k(s) has a
                    // non-integrable tail
                    FirstMomentClass::Infinite
                }
            }
            DensityFamily::Tabulated { grid, tail } => {
                let &(tn, kn) = grid.last().unwrap();
                let body = table_abs_first_moment(grid);
                match tail {
                    _ if kn.abs() <= NEGLIGIBLE_DENSITY => FirstMomentClass::Finite(body),
                    TailDecl::Index { alpha } if *alpha > 1.0 => {
                        // ∫_{t_n}^∞ s·|k_n|·((1+s)/(1+t_n))^{-1-α} ds, via y = 1+s:
                        // |k_n|·a^{1+α}·∫_a^∞ (y-1)·y^{-1-α} dy with a = 1+t_n
                        let a = 1.0 + tn;
                        let tail_moment = kn.abs()
                            * a.powf(1.0 + alpha)
                            * (a.powf(1.0 - alpha) / (alpha - 1.0) - a.powf(-alpha) / alpha);
                        FirstMomentClass::Finite(body + tail_moment)
                    }
                    TailDecl::Index { .. } => FirstMomentClass::Infinite,
                    TailDecl::Unknown => FirstMomentClass::Undetermined,
                }
            }
        };
        Ok(match density_part {
            FirstMomentClass::Finite(v) => FirstMomentClass::Finite(v + atom_part),
            other => other,
        })
    }
}

/// Compare the two measures' total masses; the model requires them equal.
pub fn validate_balance(
    lambda: &SignedMeasure,
    kappa: &SignedMeasure,
    tol: f64,
) -> Result<Balance> {
    if !matches!(lambda.support, Support::DelayInterval(_)) {
        return Err(Error::InvalidConfig("delay measure must live on [-tau, 0]".into()));
    }
    if !matches!(kappa.support, Support::NonnegativeHalfLine) {
        return Err(Error::InvalidConfig("long-run measure must live on [0, inf)".into()));
    }
    let d = lambda.total_mass()? - kappa.total_mass()?;
    if d.abs() <= tol {
        Ok(Balance::Balanced)
    } else {
        Ok(Balance::Unbalanced { discrepancy: d })
    }
}
