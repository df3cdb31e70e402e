//! Hardy-type functionals `B_L`, `B_R`, `K_L`, `K_R` from cumulative
//! integral tables on a log-scaled scan grid.
//!
//! All cumulative quantities are kept as logarithms so products of a huge
//! and a tiny factor stay representable.

use crate::error::{Error, Result};
use crate::quad::{integrate_smooth, sup_on_nodes, QuadOptions, ScanMap, SupResult};
use crate::weights::{weight_integral, Pt, WeightSpec};

/// Scan points per functional.
pub const SCAN_BUDGET: usize = 256;

type LnFn<'a> = Box<dyn Fn(f64) -> Result<f64> + Sync + 'a>;

fn ln1pexp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn lae(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a == f64::INFINITY || b == f64::INFINITY {
        return f64::INFINITY;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn ln_of(v: f64) -> f64 {
    if v == 0.0 {
        f64::NEG_INFINITY
    } else {
        v.ln()
    }
}

/// Point of the scan coordinate, with the offset taken from the nearer
/// finite end so it survives underflow.
fn scan_pt(map: &ScanMap, tau: f64) -> Pt {
    match *map {
        ScanMap::Finite { a, b } => {
            let lw = (b - a).ln();
            if tau <= 0.0 {
                Pt::from_log(a, 1.0, lw - ln1pexp(-tau))
            } else {
                Pt::from_log(b, -1.0, lw - ln1pexp(tau))
            }
        }
        ScanMap::Right { a } => Pt::from_log(a, 1.0, tau),
        ScanMap::Left { b } => Pt::from_log(b, -1.0, -tau),
        ScanMap::Line => Pt::at(tau.sinh()),
    }
}

/// `ln dx/dtau`.
fn ln_dx(map: &ScanMap, tau: f64) -> f64 {
    match *map {
        ScanMap::Finite { a, b } => (b - a).ln() - ln1pexp(-tau) - ln1pexp(tau),
        ScanMap::Right { .. } => tau,
        ScanMap::Left { .. } => -tau,
        ScanMap::Line => {
            let t = tau.abs();
            t + (-2.0 * t).exp().ln_1p() - std::f64::consts::LN_2
        }
    }
}

/// `ln \int_{t0}^{t1} exp(lnf)`.
fn ln_piece(
    lnf: &(dyn Fn(f64) -> Result<f64> + Sync),
    t0: f64,
    t1: f64,
    opts: &QuadOptions,
) -> Result<f64> {
    ln_piece_at(lnf, t0, t1, opts, 40)
}

// Log-spread across a piece beyond which only the dominant end is integrated.
const STEEP: f64 = 40.0;

fn ln_piece_at(
    lnf: &(dyn Fn(f64) -> Result<f64> + Sync),
    t0: f64,
    t1: f64,
    opts: &QuadOptions,
    depth: u32,
) -> Result<f64> {
    if !(t1 > t0) {
        return Ok(f64::NEG_INFINITY);
    }
    let tm = 0.5 * (t0 + t1);
    let ends = [lnf(t0)?, lnf(tm)?, lnf(t1)?];
    if ends.iter().any(|v| v.is_nan()) {
        return Err(Error::Evaluation {
            x: t0,
            value: f64::NAN,
        });
    }
    let shift = ends.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if shift == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let low = ends.iter().cloned().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (t0, t1);
    if shift - low > STEEP && depth > 0 {
        if ends[1] > ends[0] && ends[1] > ends[2] {
            return Ok(lae(
                ln_piece_at(lnf, t0, tm, opts, depth - 1)?,
                ln_piece_at(lnf, tm, t1, opts, depth - 1)?,
            ));
        }
        // shrink toward the dominant end while the far half is negligible
        let right = ends[2] >= ends[0];
        let end = if right { t1 } else { t0 };
        let mut w = t1 - t0;
        for _ in 0..200 {
            let probe = if right { end - 0.5 * w } else { end + 0.5 * w };
            if lnf(probe)? < shift - STEEP {
                w *= 0.5;
            } else {
                break;
            }
        }
        if right {
            lo = end - w;
        } else {
            hi = end + w;
        }
    }
    let f = |t: f64| match lnf(t) {
        Ok(v) => (v - shift).exp(),
        Err(_) => f64::NAN,
    };
    // samples are scaled to at most 1, so roundoff sets an absolute floor
    let o = QuadOptions {
        abs_tol: opts.abs_tol.max(1e-15 * (hi - lo)),
        ..*opts
    };
    let r = integrate_smooth(f, lo, hi, &o)?;
    // only the logarithm is needed; narrow end windows hit the resolution of tau
    let v = if !r.converged && r.abs_error_estimate <= 1e-4 * r.value.abs() {
        r.value
    } else {
        r.into_value()?
    };
    Ok(shift + ln_of(v))
}

/// Cumulative integrals of `exp(lnf)` over the scan grid, from the left
/// end (`left[i]`) and to the right end (`right[i]`), as logarithms.
struct Cum<'a> {
    lnf: LnFn<'a>,
    taus: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    opts: QuadOptions,
}

impl<'a> Cum<'a> {
    fn build(
        lnf: LnFn<'a>,
        taus: &[f64],
        head: f64,
        tail: f64,
        opts: &QuadOptions,
    ) -> Result<Self> {
        let n = taus.len();
        let mut inc = Vec::with_capacity(n - 1);
        for w in taus.windows(2) {
            inc.push(ln_piece(&*lnf, w[0], w[1], opts)?);
        }
        let mut left = vec![head; n];
        for i in 1..n {
            left[i] = lae(left[i - 1], inc[i - 1]);
        }
        let mut right = vec![tail; n];
        for i in (0..n - 1).rev() {
            right[i] = lae(right[i + 1], inc[i]);
        }
        Ok(Cum {
            lnf,
            taus: taus.to_vec(),
            left,
            right,
            opts: *opts,
        })
    }

    /// Index `j` with `taus[j] <= tau < taus[j + 1]`, or `Ok(j)` on a node.
    fn locate(&self, tau: f64) -> std::result::Result<usize, usize> {
        let t = &self.taus;
        let n = t.len();
        let step = (t[n - 1] - t[0]) / (n - 1) as f64;
        let j = (((tau - t[0]) / step).round() as isize).clamp(0, n as isize - 1) as usize;
        if (tau - t[j]).abs() <= 1e-12 * step {
            return Ok(j);
        }
        let k = (((tau - t[0]) / step).floor() as isize).clamp(0, n as isize - 2) as usize;
        Err(k)
    }

    fn left_at(&self, tau: f64) -> Result<f64> {
        match self.locate(tau) {
            Ok(j) => Ok(self.left[j]),
            Err(j) => Ok(lae(
                self.left[j],
                ln_piece(&*self.lnf, self.taus[j], tau, &self.opts)?,
            )),
        }
    }

    fn right_at(&self, tau: f64) -> Result<f64> {
        match self.locate(tau) {
            Ok(j) => Ok(self.right[j]),
            Err(j) => Ok(lae(
                self.right[j + 1],
                ln_piece(&*self.lnf, tau, self.taus[j + 1], &self.opts)?,
            )),
        }
    }
}

fn check_interval(nu: &WeightSpec, mu: &WeightSpec, a: f64, b: f64) -> Result<()> {
    if !(a < b) || a.is_nan() || b.is_nan() {
        return Err(Error::Parameter(format!("invalid interval ({a}, {b})")));
    }
    for w in [nu, mu] {
        if a < w.domain.left || b > w.domain.right {
            return Err(Error::Precondition(format!(
                "interval ({a}, {b}) not inside the weight domain ({}, {})",
                w.domain.left, w.domain.right
            )));
        }
    }
    Ok(())
}

// Largest change of a log-weight across the scan range.
const LN_SPAN: f64 = 700.0;

/// Scan nodes, trimmed at either end where a weight has moved more than
/// `LN_SPAN` in log from its value mid-range. The cut-off parts go into
/// the head and tail integrals.
fn scan_nodes(map: &ScanMap, nu: &WeightSpec, mu: &WeightSpec) -> Result<Vec<f64>> {
    let fine = map.nodes(4 * SCAN_BUDGET);
    let mid = fine
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap();
    let lns = |t: f64| -> Result<(f64, f64)> {
        let p = scan_pt(map, t);
        Ok((nu.ln_at(p)?, mu.ln_at(p)?))
    };
    let (rn, rm) = lns(fine[mid])?;
    let inside = |t: f64| -> Result<bool> {
        let (n, m) = lns(t)?;
        Ok((n - rn).abs() <= LN_SPAN && (m - rm).abs() <= LN_SPAN)
    };
    let mut lo = 0;
    while lo < mid && !inside(fine[lo])? {
        lo += 1;
    }
    let mut hi = fine.len() - 1;
    while hi > mid && !inside(fine[hi])? {
        hi -= 1;
    }
    let (t0, t1) = (fine[lo], fine[hi]);
    if !(t1 > t0) {
        return Ok(map.nodes(SCAN_BUDGET));
    }
    Ok((0..SCAN_BUDGET)
        .map(|i| t0 + (t1 - t0) * i as f64 / (SCAN_BUDGET - 1) as f64)
        .collect())
}

fn weight_cum<'a>(
    w: &'a WeightSpec,
    p: f64,
    map: ScanMap,
    taus: &[f64],
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<Cum<'a>> {
    let lnf: LnFn<'a> = Box::new(move |t: f64| Ok(p * w.ln_at(scan_pt(&map, t))? + ln_dx(&map, t)));
    let x0 = map.x(taus[0]);
    let x1 = map.x(*taus.last().unwrap());
    let head = ln_of(weight_integral(w, p, a, x0, opts)?);
    let tail = ln_of(weight_integral(w, p, x1, b, opts)?);
    Cum::build(lnf, taus, head, tail, opts)
}

/// Which Hardy functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `sup_x (\int_x^b nu)(\int_a^x 1/mu)`.
    Left,
    /// `sup_x (\int_a^x nu)(\int_x^b 1/mu)`.
    Right,
}

/// Supremum together with the scanned products.
#[derive(Debug, Clone)]
pub struct Scan {
    pub sup: SupResult,
    /// `(x, product)` at the scan nodes.
    pub profile: Vec<(f64, f64)>,
}

fn finish(
    map: &ScanMap,
    taus: &[f64],
    ln_prod: &(dyn Fn(f64) -> Result<f64> + Sync),
) -> Result<Scan> {
    let g = |t: f64| -> Result<f64> { ln_prod(t).map(f64::exp) };
    let sup = sup_on_nodes(g, map, taus)?;
    let profile = taus
        .iter()
        .map(|&t| Ok((map.x(t), ln_prod(t)?.exp())))
        .collect::<Result<Vec<_>>>()?;
    Ok(Scan { sup, profile })
}

fn product(u: f64, v: f64) -> f64 {
    if u == f64::INFINITY || v == f64::INFINITY {
        f64::INFINITY
    } else {
        u + v
    }
}

/// Scan of a Hardy functional on `(a, b)`.
pub fn hardy_scan(
    nu: &WeightSpec,
    mu: &WeightSpec,
    a: f64,
    b: f64,
    side: Side,
    opts: &QuadOptions,
) -> Result<Scan> {
    check_interval(nu, mu, a, b)?;
    let map = ScanMap::new(a, b);
    let taus = scan_nodes(&map, nu, mu)?;
    let n = weight_cum(nu, 1.0, map, &taus, a, b, opts)?;
    let m = weight_cum(mu, -1.0, map, &taus, a, b, opts)?;
    let ln_prod = |t: f64| -> Result<f64> {
        Ok(match side {
            Side::Left => product(n.right_at(t)?, m.left_at(t)?),
            Side::Right => product(n.left_at(t)?, m.right_at(t)?),
        })
    };
    finish(&map, &taus, &ln_prod)
}

fn default_opts() -> QuadOptions {
    QuadOptions::with_tol(1e-10)
}

/// `B_L(a, b)`; zero when `a == b`.
pub fn hardy_bl(nu: &WeightSpec, mu: &WeightSpec, a: f64, b: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    Ok(hardy_scan(nu, mu, a, b, Side::Left, &default_opts())?
        .sup
        .sup)
}

/// `B_R(a, b)`; zero when `a == b`.
pub fn hardy_br(nu: &WeightSpec, mu: &WeightSpec, a: f64, b: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    Ok(hardy_scan(nu, mu, a, b, Side::Right, &default_opts())?
        .sup
        .sup)
}

/// Tail of `\int exp(lnh)` beyond the scan range, from the exponential
/// trend in the scan coordinate of the last two nodes (a power law in the
/// distance to the end). Infinite when the trend does not decay.
fn extrapolate(l0: f64, l1: f64, dt: f64) -> f64 {
    if l0 == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if !l0.is_finite() || !l1.is_finite() {
        return f64::INFINITY;
    }
    // l0 at the end node, l1 one step inward
    let s = (l1 - l0) / dt;
    if s > 0.0 {
        l0 - s.ln()
    } else {
        f64::INFINITY
    }
}

/// Scan of a zero-mean functional on `(a, b)`; needs `nu(a, b) < inf`.
pub fn zero_mean_scan(
    nu: &WeightSpec,
    mu: &WeightSpec,
    a: f64,
    b: f64,
    side: Side,
    opts: &QuadOptions,
) -> Result<Scan> {
    check_interval(nu, mu, a, b)?;
    let total = weight_integral(nu, 1.0, a, b, opts)?;
    if !total.is_finite() {
        return Err(Error::Precondition(format!("nu({a}, {b}) is infinite")));
    }
    let map = ScanMap::new(a, b);
    let taus = scan_nodes(&map, nu, mu)?;
    let n = weight_cum(nu, 1.0, map, &taus, a, b, opts)?;
    let nr = &n;
    let lnh: LnFn = match side {
        Side::Left => Box::new(move |t: f64| {
            Ok(2.0 * nr.left_at(t)? - mu.ln_at(scan_pt(&map, t))? + ln_dx(&map, t))
        }),
        Side::Right => Box::new(move |t: f64| {
            Ok(2.0 * nr.right_at(t)? - mu.ln_at(scan_pt(&map, t))? + ln_dx(&map, t))
        }),
    };
    let k = taus.len();
    let dt = taus[1] - taus[0];
    let (head, tail) = match side {
        Side::Left => (
            extrapolate(lnh(taus[0])?, lnh(taus[1])?, dt),
            f64::NEG_INFINITY,
        ),
        Side::Right => (
            f64::NEG_INFINITY,
            extrapolate(lnh(taus[k - 1])?, lnh(taus[k - 2])?, dt),
        ),
    };
    let h = Cum::build(lnh, &taus, head, tail, opts)?;
    let ln_prod = |t: f64| -> Result<f64> {
        Ok(match side {
            Side::Left => product(n.right_at(t)?, h.left_at(t)?),
            Side::Right => product(n.left_at(t)?, h.right_at(t)?),
        })
    };
    finish(&map, &taus, &ln_prod)
}

/// `K_L(a, b)`.
pub fn zero_mean_kl(nu: &WeightSpec, mu: &WeightSpec, a: f64, b: f64) -> Result<f64> {
    Ok(zero_mean_scan(nu, mu, a, b, Side::Left, &default_opts())?
        .sup
        .sup)
}

/// `K_R(a, b)`.
pub fn zero_mean_kr(nu: &WeightSpec, mu: &WeightSpec, a: f64, b: f64) -> Result<f64> {
    Ok(zero_mean_scan(nu, mu, a, b, Side::Right, &default_opts())?
        .sup
        .sup)
}
