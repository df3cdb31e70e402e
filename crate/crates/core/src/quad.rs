//! Adaptive Gauss-Kronrod quadrature and supremum search on open intervals.
//!
//! Both entry points accept infinite endpoints. Integrals over unbounded
//! ranges are mapped to the unit interval with `x = c + s/(1-s)`; finite
//! endpoints get geometric panel grading so algebraic endpoint
//! singularities converge quickly.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Number of geometric grading levels placed toward each end of the
/// reference interval before adaptivity starts.
const GRADING_LEVELS: i32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-8,
            abs_tol: 0.0,
            max_panels: 10_000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(rel_tol: f64) -> Self {
        QuadOptions {
            rel_tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub subdivisions: usize,
    pub converged: bool,
}

impl QuadResult {
    /// Returns the value, or a quadrature error carrying the best estimate.
    pub fn into_value(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Quadrature {
                best: self.value,
                abs_error: self.abs_error_estimate,
            })
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
    resabs: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Panel> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let eval = |x: f64| -> Result<f64> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { x, value: v })
        }
    };
    let fc = eval(center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut resabs = fc.abs() * WGK[7];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok(Panel {
        lo,
        hi,
        value,
        err,
        resabs,
    })
}

/// Adaptive integration of `f` on the reference interval (0, 1) starting
/// from the given breakpoints.
fn adapt<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], opts: &QuadOptions) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        heap.push(gk15(f, w[0], w[1])?);
    }
    let mut panels = heap.len();
    loop {
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let err: f64 = heap.iter().map(|p| p.err).sum();
        let resabs: f64 = heap.iter().map(|p| p.resabs).sum();
        let target = (opts.rel_tol * value.abs())
            .max(opts.abs_tol)
            .max(100.0 * f64::EPSILON * resabs);
        if err <= target {
            return Ok(QuadResult {
                value,
                abs_error_estimate: err,
                subdivisions: panels,
                converged: true,
            });
        }
        let worst = heap.peek().copied();
        let stuck = match worst {
            Some(p) => {
                let mid = 0.5 * (p.lo + p.hi);
                !(mid > p.lo && mid < p.hi)
            }
            None => true,
        };
        if panels >= opts.max_panels || stuck {
            return Ok(QuadResult {
                value,
                abs_error_estimate: err,
                subdivisions: panels,
                converged: false,
            });
        }
        let p = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (p.lo + p.hi);
        heap.push(gk15(f, p.lo, mid)?);
        heap.push(gk15(f, mid, p.hi)?);
        panels += 1;
    }
}

fn graded_breaks(left: bool, right: bool) -> Vec<f64> {
    let mut pts = vec![0.0];
    if left {
        for k in (2..=GRADING_LEVELS).rev() {
            pts.push(0.5f64.powi(k));
        }
    }
    pts.push(0.5);
    if right {
        for k in 2..=GRADING_LEVELS {
            pts.push(1.0 - 0.5f64.powi(k));
        }
    }
    pts.push(1.0);
    pts
}

/// Integrates `f` over a finite interval on which it is smooth, starting
/// from four uniform panels instead of the graded partition.
pub fn integrate_smooth<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::Parameter(format!(
            "invalid finite interval ({a}, {b})"
        )));
    }
    let w = b - a;
    let g = |s: f64| w * f(a + w * s);
    adapt(&g, &[0.0, 0.25, 0.5, 0.75, 1.0], opts)
}

/// Integrates `f` over `(a, b)`; either endpoint may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult> {
    integrate_dyn(&f, a, b, opts)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if a.is_nan() || b.is_nan() || !(a < b) {
        return Err(Error::Parameter(format!("invalid interval ({a}, {b})")));
    }
    if !(opts.rel_tol > 0.0 || opts.abs_tol > 0.0) {
        return Err(Error::Parameter("tolerance must be positive".into()));
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => {
            let w = b - a;
            let g = |s: f64| {
                let x = if s <= 0.5 {
                    a + w * s
                } else {
                    b - w * (1.0 - s)
                };
                w * f(x)
            };
            adapt(&g, &graded_breaks(true, true), opts)
        }
        (true, false) => {
            let g = |s: f64| {
                let u = 1.0 - s;
                f(a + s / u) / (u * u)
            };
            adapt(&g, &graded_breaks(true, true), opts)
        }
        (false, true) => {
            let g = |s: f64| {
                let u = 1.0 - s;
                f(b - s / u) / (u * u)
            };
            adapt(&g, &graded_breaks(true, true), opts)
        }
        (false, false) => {
            let half = QuadOptions {
                abs_tol: opts.abs_tol * 0.5,
                ..*opts
            };
            let l = integrate_dyn(f, f64::NEG_INFINITY, 0.0, &half)?;
            let r = integrate_dyn(f, 0.0, f64::INFINITY, &half)?;
            let value = l.value + r.value;
            let err = l.abs_error_estimate + r.abs_error_estimate;
            Ok(QuadResult {
                value,
                abs_error_estimate: err,
                subdivisions: l.subdivisions + r.subdivisions,
                converged: l.converged && r.converged
                    || err <= opts.rel_tol * value.abs() + opts.abs_tol,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupResult {
    pub sup: f64,
    pub argmax: f64,
    pub bounded: bool,
}

/// Scan coordinate for `sup_search`: maps `tau` in `[lo, hi]` onto the
/// open interval, dense near finite endpoints.
#[derive(Debug, Clone, Copy)]
pub(crate) enum ScanMap {
    Finite { a: f64, b: f64 },
    Right { a: f64 },
    Left { b: f64 },
    Line,
}

impl ScanMap {
    pub(crate) fn new(a: f64, b: f64) -> Self {
        match (a.is_finite(), b.is_finite()) {
            (true, true) => ScanMap::Finite { a, b },
            (true, false) => ScanMap::Right { a },
            (false, true) => ScanMap::Left { b },
            (false, false) => ScanMap::Line,
        }
    }

    pub(crate) fn range(&self) -> (f64, f64) {
        match self {
            ScanMap::Finite { .. } => (-30.0, 30.0),
            ScanMap::Right { .. } => (1e-12f64.ln(), 1e6f64.ln()),
            ScanMap::Left { .. } => (-(1e6f64.ln()), -(1e-12f64.ln())),
            ScanMap::Line => (-15.0, 15.0),
        }
    }

    pub(crate) fn x(&self, tau: f64) -> f64 {
        match *self {
            ScanMap::Finite { a, b } => {
                let w = b - a;
                if tau <= 0.0 {
                    a + w / (1.0 + (-tau).exp())
                } else {
                    b - w / (1.0 + tau.exp())
                }
            }
            ScanMap::Right { a } => a + tau.exp(),
            ScanMap::Left { b } => b - (-tau).exp(),
            ScanMap::Line => tau.sinh(),
        }
    }

    /// Scan nodes for a budget of `n` points.
    pub(crate) fn nodes(&self, n: usize) -> Vec<f64> {
        let (t0, t1) = self.range();
        (0..n)
            .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Estimates `sup g` over the open interval `(a, b)`.
///
/// The scan uses `budget` points; the returned estimate is never below any
/// scanned value. `bounded` is false when the scan sees `+inf`, or when
/// values increase monotonically over the outermost decade toward an end by
/// a factor of at least 10.
pub fn sup_search<G: Fn(f64) -> Result<f64>>(
    g: G,
    a: f64,
    b: f64,
    budget: usize,
) -> Result<SupResult> {
    if !(a < b) {
        return Err(Error::Parameter(format!("invalid interval ({a}, {b})")));
    }
    let map = ScanMap::new(a, b);
    sup_in_tau(
        |t| {
            let x = map.x(t);
            if x > a && x < b {
                g(x)
            } else {
                Ok(f64::NAN)
            }
        },
        &map,
        budget,
    )
}

/// [`sup_search`] with `g` given in the scan coordinate of `map`; `g` is
/// called exactly at `map.nodes(budget)` during the scan.
pub(crate) fn sup_in_tau<G: Fn(f64) -> Result<f64>>(
    g: G,
    map: &ScanMap,
    budget: usize,
) -> Result<SupResult> {
    if budget < 64 {
        return Err(Error::Parameter(
            "sup_search budget must be at least 64".into(),
        ));
    }
    sup_on_nodes(g, map, &map.nodes(budget))
}

// Highest scanned local maxima refined by golden section.
const POLISHED_PEAKS: usize = 4;

/// [`sup_in_tau`] on explicit, uniformly spaced scan nodes.
pub(crate) fn sup_on_nodes<G: Fn(f64) -> Result<f64>>(
    g: G,
    map: &ScanMap,
    taus: &[f64],
) -> Result<SupResult> {
    let n = taus.len();
    if n < 64 {
        return Err(Error::Parameter(
            "sup_search budget must be at least 64".into(),
        ));
    }
    let (t0, t1) = (taus[0], taus[n - 1]);
    let mut vals = Vec::with_capacity(n);
    for &t in taus {
        vals.push(g(t)?);
    }
    if let Some(i) = vals.iter().position(|v| *v == f64::INFINITY) {
        return Ok(SupResult {
            sup: f64::INFINITY,
            argmax: map.x(taus[i]),
            bounded: false,
        });
    }

    let mut best = None::<usize>;
    for (i, v) in vals.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(j) if vals[j] >= *v => {}
            _ => best = Some(i),
        }
    }
    let Some(ib) = best else {
        return Err(Error::Evaluation {
            x: map.x(taus[n / 2]),
            value: f64::NAN,
        });
    };

    let decade = 10f64.ln();
    let step = (t1 - t0) / (n - 1) as f64;
    let k = ((decade / step).ceil() as usize).clamp(1, n - 1);
    let grows = |idx: &mut dyn Iterator<Item = usize>| -> bool {
        let ids: Vec<usize> = idx.collect();
        let vs: Vec<f64> = ids.iter().map(|&i| vals[i]).collect();
        if vs.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let monotone = vs.windows(2).all(|w| w[1] >= w[0]);
        let first = vs[0];
        let last = *vs.last().unwrap();
        let span = (taus[ids[ids.len() - 1]] - taus[ids[0]]).abs();
        // ratio normalized to one decade of scan coordinate
        let ratio = if first > 0.0 {
            (last / first).powf(decade / span)
        } else {
            f64::INFINITY
        };
        monotone && last > 0.0 && ratio >= 10.0 * (1.0 - 1e-6)
    };
    let right_grows = grows(&mut ((n - 1 - k)..n));
    let left_grows = grows(&mut (0..=k).rev());
    let unbounded = right_grows || left_grows;

    let mut sup = vals[ib];
    let mut arg = map.x(taus[ib]);
    if !unbounded {
        let finite = |i: usize| vals[i].is_finite();
        let mut peaks: Vec<usize> = (0..n)
            .filter(|&i| {
                finite(i)
                    && (i == 0 || !finite(i - 1) || vals[i - 1] <= vals[i])
                    && (i + 1 == n || !finite(i + 1) || vals[i + 1] <= vals[i])
            })
            .collect();
        peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
        peaks.truncate(POLISHED_PEAKS);
        for i in peaks {
            let lo = taus[i.saturating_sub(1)];
            let hi = taus[(i + 1).min(n - 1)];
            if let Some((tr, vr)) = golden_max(&g, lo, hi, 80)? {
                if vr > sup {
                    sup = vr;
                    arg = map.x(tr);
                }
            }
        }
    }
    Ok(SupResult {
        sup: if unbounded { f64::INFINITY } else { sup },
        argmax: arg,
        bounded: !unbounded,
    })
}

fn golden_max<G: Fn(f64) -> Result<f64>>(
    g: &G,
    mut lo: f64,
    mut hi: f64,
    iters: usize,
) -> Result<Option<(f64, f64)>> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let mut fc = g(c)?;
    let mut fd = g(d)?;
    let mut best: Option<(f64, f64)> = None;
    let record = |t: f64, v: f64, best: &mut Option<(f64, f64)>| {
        if v.is_finite() && best.is_none_or(|(_, bv)| v > bv) {
            *best = Some((t, v));
        }
    };
    record(c, fc, &mut best);
    record(d, fd, &mut best);
    for _ in 0..iters {
        if (hi - lo).abs() <= 1e-12 * (1.0 + lo.abs()) {
            break;
        }
        if fc.is_nan() || fd.is_nan() {
            break;
        }
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = g(c)?;
            record(c, fc, &mut best);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = g(d)?;
            record(d, fd, &mut best);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(f: impl Fn(f64) -> f64, a: f64, b: f64) -> QuadResult {
        integrate(f, a, b, &QuadOptions::default()).unwrap()
    }

    #[test]
    fn polynomial() {
        let r = q(|x| x * x, 0.0, 1.0);
        assert!(r.converged);
        assert!((r.value - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_tail() {
        let r = q(|x| (-x).exp(), 0.0, f64::INFINITY);
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn inverse_sqrt_endpoint() {
        let r = q(|x| x.powf(-0.5), 0.0, 1.0);
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-7);
    }

    #[test]
    fn whole_line_gaussian() {
        let r = q(|x| (-x * x).exp(), f64::NEG_INFINITY, f64::INFINITY);
        assert!(r.converged);
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn left_half_line() {
        let r = q(|x| x.exp(), f64::NEG_INFINITY, 0.0);
        assert!((r.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn odd_integrand_zero() {
        let r = q(|x| x, -1.0, 1.0);
        assert!(r.converged);
        assert!(r.value.abs() < 1e-14);
    }

    #[test]
    fn nan_is_evaluation_error() {
        let e = integrate(
            |x| if x > 0.5 { f64::NAN } else { 1.0 },
            0.0,
            1.0,
            &QuadOptions::default(),
        );
        assert!(matches!(e, Err(Error::Evaluation { .. })));
    }

    #[test]
    fn budget_exhaustion_reports_best() {
        let opts = QuadOptions {
            rel_tol: 1e-14,
            abs_tol: 0.0,
            max_panels: 30,
        };
        let r = integrate(|x| (1.0 / x).sin().abs() / x.sqrt(), 0.0, 1.0, &opts).unwrap();
        assert!(!r.converged);
        assert!(r.into_value().is_err());
    }

    #[test]
    fn parabola_sup() {
        let s = sup_search(|x| Ok(x * (1.0 - x)), 0.0, 1.0, 200).unwrap();
        assert!(s.bounded);
        assert!((s.sup - 0.25).abs() < 1e-12);
        assert!((s.argmax - 0.5).abs() < 1e-5);
    }

    #[test]
    fn constant_sup_bounded() {
        let s = sup_search(|_| Ok(0.25), 0.0, f64::INFINITY, 128).unwrap();
        assert!(s.bounded);
        assert_eq!(s.sup, 0.25);
    }

    #[test]
    fn identity_unbounded_on_half_line() {
        let s = sup_search(Ok, 0.0, f64::INFINITY, 128).unwrap();
        assert!(!s.bounded);
        assert!(s.sup.is_infinite());
    }

    #[test]
    fn saturating_growth_is_bounded() {
        let s = sup_search(|x| Ok(x / (1.0 + x)), 0.0, f64::INFINITY, 128).unwrap();
        assert!(s.bounded);
        assert!(s.sup <= 1.0 && s.sup > 0.999);
    }

    #[test]
    fn endpoint_blowup_unbounded() {
        let s = sup_search(|x| Ok(1.0 / x), 0.0, 1.0, 128).unwrap();
        assert!(!s.bounded);
    }

    #[test]
    fn small_budget_rejected() {
        assert!(sup_search(Ok, 0.0, 1.0, 10).is_err());
    }
}
