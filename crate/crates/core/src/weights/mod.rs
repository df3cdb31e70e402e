//! Weight functions on 1D domains and their admissibility checks.
//!
//! Weights are evaluated in log form at points given as `base + off`, where
//! `base` is usually a domain endpoint. This keeps distances to endpoints
//! exact, so integrals can be graded all the way into singular corners.

pub mod catalog;
mod domain;
mod profile;

use serde::{Deserialize, Serialize};

pub use domain::{ext_real, Domain1D};
pub use profile::Profile;

use crate::error::{param, Error, Result};
use crate::quad::{integrate, integrate_smooth, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pivot {
    Left,
    #[default]
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpArgument {
    #[default]
    Abs,
    Signed,
}

/// Closed-form weight families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    /// `|x - p|^beta` with `p` the origin or the left endpoint.
    Power {
        beta: f64,
        #[serde(default)]
        pivot: Pivot,
    },
    /// `x^base_exponent |log x|^exponent`.
    LogPower { exponent: f64, base_exponent: f64 },
    /// `exp(rate |x|)` or `exp(rate x)`.
    Exp {
        rate: f64,
        #[serde(default)]
        argument: ExpArgument,
    },
    /// `exp(-d x^2)`.
    Gaussian { d: f64 },
    /// `delta(x)^exponent`, `delta` the distance to the nearest finite endpoint.
    DistancePower { exponent: f64 },
    /// `psi(x)^(dimension - 1)`.
    ModelProfile { profile: Profile, dimension: u32 },
    /// `x^(exponent + dimension - 1)`: a radial power weight in polar form.
    RadialPower { exponent: f64, dimension: u32 },
    /// `factor * inner`.
    Scaled { factor: f64, inner: Box<Family> },
    /// Piecewise linear table; may vanish, so it is not positivity checked.
    Sampled { x: Vec<f64>, value: Vec<f64> },
}

/// A weight family bound to its domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    #[serde(flatten)]
    pub family: Family,
    pub domain: Domain1D,
}

/// Point `base + off`, with `ln |off|` carried separately so it survives
/// underflow of `off`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pt {
    pub base: f64,
    pub off: f64,
    pub ln_off: f64,
}

impl Pt {
    pub fn at(x: f64) -> Self {
        Pt {
            base: 0.0,
            off: x,
            ln_off: x.abs().ln(),
        }
    }

    /// Point at signed distance `sign * exp(ell)` from `base`.
    pub fn from_log(base: f64, sign: f64, ell: f64) -> Self {
        Pt {
            base,
            off: sign * ell.exp(),
            ln_off: ell,
        }
    }

    pub fn x(&self) -> f64 {
        self.base + self.off
    }

    fn ln_abs_x(&self) -> f64 {
        if self.base == 0.0 {
            return self.ln_off;
        }
        let q = self.off / self.base;
        if q > -0.5 {
            self.base.abs().ln() + q.ln_1p()
        } else {
            self.x().abs().ln()
        }
    }

    /// `ln |ln x|` for `x > 0`, accurate near `x = 1`.
    fn ln_abs_ln_x(&self) -> f64 {
        if self.base == 1.0 {
            let q = self.off;
            if q.abs() < 1e-6 {
                return self.ln_off + (-0.5 * q).ln_1p();
            }
            return q.ln_1p().abs().ln();
        }
        self.ln_abs_x().abs().ln()
    }

    fn dist_left(&self, a: f64) -> f64 {
        if self.base == a {
            self.off
        } else {
            self.x() - a
        }
    }

    fn dist_right(&self, b: f64) -> f64 {
        if self.base == b {
            -self.off
        } else {
            b - self.x()
        }
    }

    fn ln_dist_left(&self, a: f64) -> f64 {
        if self.base == a {
            self.ln_off
        } else {
            (self.x() - a).ln()
        }
    }

    fn ln_dist_right(&self, b: f64) -> f64 {
        if self.base == b {
            self.ln_off
        } else {
            (b - self.x()).ln()
        }
    }
}

impl Family {
    pub fn validate(&self, d: &Domain1D) -> Result<()> {
        d.validate()?;
        let positive_axis = d.left >= 0.0;
        match self {
            Family::Power { beta, pivot } => {
                if !beta.is_finite() {
                    return param("power exponent must be finite");
                }
                match pivot {
                    Pivot::Left if !d.left.is_finite() => {
                        param("left-pivot power needs a finite left endpoint")
                    }
                    Pivot::Origin if *beta != 0.0 && d.contains(0.0) => {
                        param("origin-pivot power is singular inside the domain")
                    }
                    _ => Ok(()),
                }
            }
            Family::LogPower {
                exponent,
                base_exponent,
            } => {
                if !exponent.is_finite() || !base_exponent.is_finite() {
                    return param("log-power exponents must be finite");
                }
                if !positive_axis || d.contains(1.0) {
                    return param("log-power weight needs a domain inside (0, 1) or (1, inf)");
                }
                Ok(())
            }
            Family::Exp { rate, .. } => {
                if rate.is_finite() {
                    Ok(())
                } else {
                    param("exponential rate must be finite")
                }
            }
            Family::Gaussian { d: dd } => {
                if dd.is_finite() && *dd > 0.0 {
                    Ok(())
                } else {
                    param("gaussian parameter d must be positive")
                }
            }
            Family::DistancePower { exponent } => {
                if !exponent.is_finite() {
                    return param("distance exponent must be finite");
                }
                if !d.left.is_finite() && !d.right.is_finite() {
                    return param("distance weight needs a finite endpoint");
                }
                Ok(())
            }
            Family::ModelProfile { profile, dimension } => {
                if *dimension < 2 {
                    return param("model profile dimension must be at least 2");
                }
                if !positive_axis || d.right > profile.r_max() {
                    return param("model profile domain must lie inside (0, r_max)");
                }
                profile.validate()
            }
            Family::RadialPower {
                exponent,
                dimension,
            } => {
                if !exponent.is_finite() || *dimension < 1 {
                    return param("radial power needs a finite exponent and dimension >= 1");
                }
                if !positive_axis {
                    return param("radial power domain must lie in (0, inf)");
                }
                Ok(())
            }
            Family::Scaled { factor, inner } => {
                if !(factor.is_finite() && *factor > 0.0) {
                    return param("scale factor must be positive");
                }
                inner.validate(d)
            }
            Family::Sampled { x, value } => {
                if x.len() < 2 || x.len() != value.len() {
                    return param("sampled weight needs matching tables of length >= 2");
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) {
                    return param("sampled abscissae must increase");
                }
                if value.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return param("sampled values must be finite and nonnegative");
                }
                Ok(())
            }
        }
    }

    /// Closed-form value at an interior point, where one is available.
    fn direct(&self, x: f64, d: &Domain1D) -> Option<f64> {
        Some(match self {
            Family::Power { beta, pivot } => match pivot {
                Pivot::Origin => x.abs().powf(*beta),
                Pivot::Left => (x - d.left).powf(*beta),
            },
            Family::Exp { rate, argument } => match argument {
                ExpArgument::Abs => (rate * x.abs()).exp(),
                ExpArgument::Signed => (rate * x).exp(),
            },
            Family::Gaussian { d: dd } => (-dd * x * x).exp(),
            Family::DistancePower { exponent } => (x - d.left).min(d.right - x).powf(*exponent),
            Family::RadialPower {
                exponent,
                dimension,
            } => x.powf(exponent + *dimension as f64 - 1.0),
            Family::Scaled { factor, inner } => factor * inner.direct(x, d)?,
            _ => return None,
        })
    }

    pub(crate) fn ln_eval(&self, p: Pt, d: &Domain1D) -> f64 {
        match self {
            Family::Power { beta, pivot } => {
                if *beta == 0.0 {
                    return 0.0;
                }
                match pivot {
                    Pivot::Origin => beta * p.ln_abs_x(),
                    Pivot::Left => beta * p.ln_dist_left(d.left),
                }
            }
            Family::LogPower {
                exponent,
                base_exponent,
            } => {
                let mut v = 0.0;
                if *base_exponent != 0.0 {
                    v += base_exponent * p.ln_abs_x();
                }
                if *exponent != 0.0 {
                    v += exponent * p.ln_abs_ln_x();
                }
                v
            }
            Family::Exp { rate, argument } => match argument {
                ExpArgument::Abs => rate * p.x().abs(),
                ExpArgument::Signed => rate * p.x(),
            },
            Family::Gaussian { d: dd } => {
                let x = p.x();
                -dd * x * x
            }
            Family::DistancePower { exponent } => {
                if *exponent == 0.0 {
                    return 0.0;
                }
                let dl = p.dist_left(d.left);
                let dr = p.dist_right(d.right);
                let ln_delta = if dl <= dr {
                    p.ln_dist_left(d.left)
                } else {
                    p.ln_dist_right(d.right)
                };
                exponent * ln_delta
            }
            Family::ModelProfile { profile, dimension } => {
                let r = p.x();
                let lp = if r > 0.0 {
                    profile.ln_psi(r).unwrap_or(f64::NAN)
                } else {
                    match profile {
                        Profile::Exp { .. } => 0.0,
                        _ => p.ln_off,
                    }
                };
                (*dimension as f64 - 1.0) * lp
            }
            Family::RadialPower {
                exponent,
                dimension,
            } => {
                let k = exponent + *dimension as f64 - 1.0;
                if k == 0.0 {
                    0.0
                } else {
                    k * p.ln_abs_x()
                }
            }
            Family::Scaled { factor, inner } => factor.ln() + inner.ln_eval(p, d),
            Family::Sampled { x, value } => {
                let t = p.x();
                let n = x.len();
                if !(t >= x[0] && t <= x[n - 1]) {
                    return f64::NAN;
                }
                let i = x.partition_point(|v| *v <= t).clamp(1, n - 1) - 1;
                let s = (t - x[i]) / (x[i + 1] - x[i]);
                let v = value[i] + s * (value[i + 1] - value[i]);
                v.ln()
            }
        }
    }
}

impl WeightSpec {
    pub fn new(family: Family, domain: Domain1D) -> Result<Self> {
        family.validate(&domain)?;
        Ok(WeightSpec { family, domain })
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate(&self.domain)
    }

    pub fn power(beta: f64, domain: Domain1D) -> Result<Self> {
        Self::new(
            Family::Power {
                beta,
                pivot: Pivot::Origin,
            },
            domain,
        )
    }

    pub fn constant(domain: Domain1D) -> Result<Self> {
        Self::power(0.0, domain)
    }

    pub fn exp(rate: f64, argument: ExpArgument, domain: Domain1D) -> Result<Self> {
        Self::new(Family::Exp { rate, argument }, domain)
    }

    pub fn distance(exponent: f64, domain: Domain1D) -> Result<Self> {
        Self::new(Family::DistancePower { exponent }, domain)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            Family::Scaled {
                factor,
                inner: Box::new(self.family.clone()),
            },
            self.domain.clone(),
        )
    }

    fn inside(&self, p: Pt) -> bool {
        let (a, b) = (self.domain.left, self.domain.right);
        let underflowed = p.off == 0.0 && p.ln_off > f64::NEG_INFINITY;
        let left_ok = if p.base == a {
            p.off > 0.0 || (underflowed && p.off.is_sign_positive())
        } else {
            p.x() > a
        };
        let right_ok = if p.base == b {
            p.off < 0.0 || (underflowed && p.off.is_sign_negative())
        } else {
            p.x() < b
        };
        left_ok && right_ok
    }

    /// `ln rho` at an offset point; no positivity check.
    pub(crate) fn ln_at(&self, p: Pt) -> Result<f64> {
        if !self.inside(p) {
            return Err(Error::Domain {
                x: p.x(),
                left: self.domain.left,
                right: self.domain.right,
            });
        }
        Ok(self.family.ln_eval(p, &self.domain))
    }

    /// `ln rho(x)`.
    pub fn ln_eval(&self, x: f64) -> Result<f64> {
        self.domain.check(x)?;
        let v = self.ln_at(Pt::at(x))?;
        if v.is_nan() || v == f64::INFINITY {
            return Err(Error::Evaluation { x, value: v });
        }
        Ok(v)
    }

    /// Weight value at an interior point.
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.domain.check(x)?;
        let v = match self.family.direct(x, &self.domain) {
            Some(v) => v,
            None => self.ln_eval(x)?.exp(),
        };
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { x, value: v })
        }
    }

    /// Whether the weight is singular or degenerate at the left/right
    /// endpoint, judged by its log-slope against the endpoint distance.
    pub fn singular_ends(&self) -> (bool, bool) {
        let d = &self.domain;
        let w = d.width().min(1.0);
        let test = |base: f64, sign: f64| -> bool {
            let (l1, l2) = ((1e-8 * w).ln(), (1e-6 * w).ln());
            let v1 = self.ln_at(Pt::from_log(base, sign, l1));
            let v2 = self.ln_at(Pt::from_log(base, sign, l2));
            match (v1, v2) {
                (Ok(v1), Ok(v2)) if v1.is_finite() && v2.is_finite() => {
                    ((v2 - v1) / (l2 - l1)).abs() > 0.05
                }
                _ => true,
            }
        };
        let left = d.left.is_finite() && test(d.left, 1.0);
        let right = d.right.is_finite() && test(d.right, -1.0);
        (left, right)
    }
}

fn exp_integrand(lnf: f64, ell: f64) -> f64 {
    let v = lnf + ell;
    if v == f64::NEG_INFINITY {
        0.0
    } else {
        v.exp()
    }
}

/// `ln` of the integrand as a function of an offset point.
pub(crate) type LnIntegrand<'a> = dyn Fn(Pt) -> Result<f64> + Sync + 'a;

/// Integral of `exp(lnf)` over `(base, base + delta)` (`sign > 0`) or
/// `(base - delta, base)` (`sign < 0`), in the variable `ell = ln|x - base|`.
/// Returns `+inf` when divergence is certified.
fn endpoint_zone(
    lnf: &LnIntegrand,
    base: f64,
    sign: f64,
    delta: f64,
    opts: &QuadOptions,
) -> Result<f64> {
    let top = delta.ln();
    let f = |ell: f64| match lnf(Pt::from_log(base, sign, ell)) {
        Ok(v) => exp_integrand(v, ell),
        Err(_) => f64::NAN,
    };
    match integrate(f, f64::NEG_INFINITY, top, opts) {
        Ok(r) if r.converged => Ok(r.value),
        Ok(_) | Err(Error::Evaluation { .. }) => certify(&f, top, -1.0, opts, 20),
        Err(e) => Err(e),
    }
}

/// Integral of `exp(lnf)` from `c` to `dir * inf`.
fn tail(lnf: &LnIntegrand, c: f64, dir: f64, opts: &QuadOptions) -> Result<f64> {
    let f = |x: f64| match lnf(Pt::at(x)) {
        Ok(v) => exp_integrand(v, 0.0),
        Err(_) => f64::NAN,
    };
    let r = if dir > 0.0 {
        integrate(f, c, f64::INFINITY, opts)
    } else {
        integrate(f, f64::NEG_INFINITY, c, opts)
    };
    match r {
        Ok(r) if r.converged => Ok(r.value),
        Ok(_) | Err(Error::Evaluation { .. }) => certify(&f, c, dir, opts, 1000),
        Err(e) => Err(e),
    }
}

/// Divergence certificate: integrates over `[c, c + dir 2^k]` for growing
/// `k`. The integral is declared infinite when it exceeds `1e12` times the
/// unit-range integral, when the integrand overflows, or when increments
/// stop decaying at the largest range.
fn certify<F: Fn(f64) -> f64>(
    f: &F,
    c: f64,
    dir: f64,
    opts: &QuadOptions,
    kmax: i32,
) -> Result<f64> {
    let piece = |lo: f64, hi: f64| -> Result<Option<f64>> {
        let (lo, hi) = if lo < hi { (lo, hi) } else { (hi, lo) };
        match integrate_smooth(f, lo, hi, opts) {
            Ok(r) => Ok(Some(r.value)),
            Err(Error::Evaluation { value, .. }) if value == f64::INFINITY => Ok(None),
            Err(Error::Evaluation { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let Some(i0) = piece(c, c + dir)? else {
        return Ok(f64::INFINITY);
    };
    let mut total = i0;
    let mut incs = vec![i0];
    let mut reach = 1.0f64;
    for _ in 1..=kmax {
        let next = reach * 2.0;
        let Some(inc) = piece(c + dir * reach, c + dir * next)? else {
            return Ok(f64::INFINITY);
        };
        total += inc;
        incs.push(inc);
        reach = next;
        if total > 1e12 * i0.max(f64::MIN_POSITIVE) {
            return Ok(f64::INFINITY);
        }
        if inc <= opts.rel_tol * 1e-2 * total {
            return Ok(total);
        }
    }
    let n = incs.len();
    let ratio = incs[n - 1] / incs[n - 2].max(f64::MIN_POSITIVE);
    if ratio >= 0.9 {
        Ok(f64::INFINITY)
    } else {
        Err(Error::Quadrature {
            best: total,
            abs_error: incs[n - 1] / (1.0 - ratio),
        })
    }
}

/// `\int_lo^hi exp(lnf)` over a subinterval of `d`, grading into finite
/// domain endpoints and certifying divergence. Returns `+inf` on divergence.
pub(crate) fn log_integral(
    lnf: &LnIntegrand,
    d: &Domain1D,
    lo: f64,
    hi: f64,
    opts: &QuadOptions,
) -> Result<f64> {
    if !(lo < hi) || lo < d.left || hi > d.right {
        return Err(Error::Parameter(format!(
            "integration range ({lo}, {hi}) not inside ({}, {})",
            d.left, d.right
        )));
    }
    let mut total = 0.0;
    let mut left_edge = lo;
    let mut right_edge = hi;
    let span = hi - lo;
    let at_left = lo == d.left && lo.is_finite();
    let at_right = hi == d.right && hi.is_finite();
    // one graded zone covers a short range hanging off a single endpoint
    let whole = span.is_finite() && at_left != at_right && span <= 1.0;
    let zone_width = if whole {
        span
    } else if span.is_finite() {
        (span / 4.0).min(1.0)
    } else {
        1.0
    };
    if at_left {
        total += endpoint_zone(lnf, lo, 1.0, zone_width, opts)?;
        left_edge = if whole { hi } else { lo + zone_width };
    }
    if at_right {
        total += endpoint_zone(lnf, hi, -1.0, zone_width, opts)?;
        right_edge = if whole { lo } else { hi - zone_width };
    }
    if total == f64::INFINITY {
        return Ok(total);
    }
    let smooth = |x: f64| match lnf(Pt::at(x)) {
        Ok(v) => exp_integrand(v, 0.0),
        Err(_) => f64::NAN,
    };
    let mid = match (left_edge.is_finite(), right_edge.is_finite()) {
        (true, true) => {
            if right_edge > left_edge {
                integrate_smooth(smooth, left_edge, right_edge, opts)?.into_value()?
            } else {
                0.0
            }
        }
        (true, false) => tail(lnf, left_edge, 1.0, opts)?,
        (false, true) => tail(lnf, right_edge, -1.0, opts)?,
        (false, false) => tail(lnf, 0.0, -1.0, opts)? + tail(lnf, 0.0, 1.0, opts)?,
    };
    Ok(total + mid)
}

/// `\int_lo^hi rho^p dx`; `+inf` when divergence is certified.
pub fn weight_integral(
    w: &WeightSpec,
    p: f64,
    lo: f64,
    hi: f64,
    opts: &QuadOptions,
) -> Result<f64> {
    let lnf = |pt: Pt| -> Result<f64> {
        let v = w.ln_at(pt)?;
        Ok(if p == 1.0 { v } else { p * v })
    };
    log_integral(&lnf, &w.domain, lo, hi, opts)
}

/// `nu(d) = \int_d rho`, or `+inf` with a divergence certificate.
pub fn measure_nu(w: &WeightSpec, d: &Domain1D, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return param("tolerance must be positive");
    }
    if !d.is_subset_of(&w.domain) {
        return Err(Error::Precondition(format!(
            "domain ({}, {}) not inside weight domain ({}, {})",
            d.left, d.right, w.domain.left, w.domain.right
        )));
    }
    weight_integral(w, 1.0, d.left, d.right, &QuadOptions::with_tol(tol))
}

/// Local `B_p` membership: `rho^(1/(1-p))` integrable on every probe.
pub fn check_bp(w: &WeightSpec, p: f64, probes: &[Domain1D]) -> Result<bool> {
    if !(p > 1.0) {
        return param("B_p check needs p > 1");
    }
    for probe in probes {
        if !(probe.left > w.domain.left && probe.right < w.domain.right) || !probe.is_bounded() {
            return Err(Error::Precondition(format!(
                "probe ({}, {}) not compactly inside the domain",
                probe.left, probe.right
            )));
        }
        match weight_integral(
            w,
            1.0 / (1.0 - p),
            probe.left,
            probe.right,
            &QuadOptions::default(),
        ) {
            Ok(v) if v.is_finite() => {}
            Ok(_) => return Ok(false),
            Err(Error::Evaluation { .. }) | Err(Error::Quadrature { .. }) => return Ok(false),
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// Cap above which ratio suprema count as unbounded in [`dominates`].
pub const DOMINATION_CAP: f64 = 1e12;

/// Smallest `(D_nu, D_mu)` over the sample with `rho_nu2 <= D_nu rho_nu1`
/// and `rho_mu1 <= D_mu rho_mu2`, or `None` if either exceeds the cap.
pub fn dominates(
    pair1: (&WeightSpec, &WeightSpec),
    pair2: (&WeightSpec, &WeightSpec),
    sample: &[f64],
) -> Result<Option<(f64, f64)>> {
    if sample.is_empty() {
        return param("domination sample is empty");
    }
    if pair1.0.domain != pair2.0.domain || pair1.1.domain != pair2.1.domain {
        return Err(Error::Precondition(
            "weight pairs live on different domains".into(),
        ));
    }
    let mut dn = 0.0f64;
    let mut dm = 0.0f64;
    for &x in sample {
        let rn = (pair2.0.ln_eval(x)? - pair1.0.ln_eval(x)?).exp();
        let rm = (pair1.1.ln_eval(x)? - pair2.1.ln_eval(x)?).exp();
        dn = dn.max(rn);
        dm = dm.max(rm);
    }
    if dn.is_finite() && dm.is_finite() && dn <= DOMINATION_CAP && dm <= DOMINATION_CAP {
        Ok(Some((dn, dm)))
    } else {
        Ok(None)
    }
}
