//! Weighted norms, energies, decay-rate fits and bound checkers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::solver::{Grid, Trajectory};

/// `x^p` extended oddly: `|x|^p sign(x)`.
pub fn signed_pow(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(p)
    }
}

/// `(sum m_i |u_i|^q)^(1/q)`, or the grid max for `q = inf`.
pub fn weighted_norm(u: &[f64], grid: &Grid, q: f64) -> f64 {
    if q.is_infinite() {
        return u.iter().fold(0.0, |a, v| a.max(v.abs()));
    }
    let s: f64 = u
        .iter()
        .zip(&grid.masses)
        .map(|(v, m)| m * v.abs().powf(q))
        .sum();
    s.powf(1.0 / q)
}

/// nu-weighted mean.
pub fn mean(u: &[f64], grid: &Grid) -> f64 {
    let mass: f64 = grid.masses.iter().sum();
    u.iter().zip(&grid.masses).map(|(v, m)| v * m).sum::<f64>() / mass
}

/// Norm of `u - c`.
pub fn deviation_norm(u: &[f64], grid: &Grid, c: f64, q: f64) -> f64 {
    let d: Vec<f64> = u.iter().map(|v| v - c).collect();
    weighted_norm(&d, grid, q)
}

/// `sum_faces g (w_right - w_left)^2` with ghost zero across Dirichlet faces.
fn face_energy(w: &[f64], grid: &Grid) -> f64 {
    let n = w.len();
    let mut e = 0.0;
    for (k, g) in grid.cond.iter().enumerate() {
        if *g == 0.0 {
            continue;
        }
        let l = if k == 0 { 0.0 } else { w[k - 1] };
        let r = if k == n { 0.0 } else { w[k] };
        e += g * (r - l) * (r - l);
    }
    e
}

/// Discrete `||(u^m)_x||^2_{2;mu}`.
pub fn energy(u: &[f64], grid: &Grid, m: f64) -> f64 {
    energy_q_state(u, grid, m, m)
}

/// Discrete `||(u^((m+q)/2))_x||^2_{2;mu}`.
pub fn energy_q_state(u: &[f64], grid: &Grid, m: f64, q: f64) -> f64 {
    let p = 0.5 * (m + q);
    let w: Vec<f64> = u.iter().map(|v| signed_pow(*v, p)).collect();
    face_energy(&w, grid)
}

/// Energy series at every stored time.
pub fn energy_q(traj: &Trajectory, q: f64) -> Vec<f64> {
    traj.states
        .iter()
        .map(|s| energy_q_state(&s.u, &traj.grid, traj.m, q))
        .collect()
}

/// Constant in front of the dissipated energy of `||u||_{q+1}^{q+1}`.
pub fn dissipation_constant(m: f64, q: f64) -> f64 {
    4.0 * q * (q + 1.0) * m / ((m + q) * (m + q))
}

/// Signed residual of
/// `c(m,q) int_0^t E_q + ||u(t)||_{q+1}^{q+1} - ||u0||_{q+1}^{q+1}`
/// at each stored time, trapezoidal in time.
pub fn energy_identity_check(traj: &Trajectory, q: f64) -> Result<Vec<f64>> {
    if !(q >= 0.0) {
        return param("energy identity needs q >= 0");
    }
    let c = dissipation_constant(traj.m, q);
    let e = energy_q(traj, q);
    let p = q + 1.0;
    let n0 = weighted_norm(&traj.states[0].u, &traj.grid, p).powf(p);
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for k in 1..traj.states.len() {
        let dt = traj.states[k].t - traj.states[k - 1].t;
        acc += 0.5 * dt * (e[k] + e[k - 1]);
        let nk = weighted_norm(&traj.states[k].u, &traj.grid, p).powf(p);
        out.push(c * acc + nk - n0);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Power exponent, or the decay rate for exponential fits.
    pub exponent: f64,
    pub constant: f64,
    pub window: (f64, f64),
    /// RMS of the residual in `ln y`.
    pub residual: f64,
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 8;

type Window = (f64, f64);

fn select(
    t: &[f64],
    y: &[f64],
    window: Option<(f64, f64)>,
) -> Result<(Vec<f64>, Vec<f64>, Window)> {
    if t.len() != y.len() {
        return Err(Error::Fit("series lengths differ".into()));
    }
    let (lo, hi) = match window {
        Some(w) => w,
        None => {
            let end = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (end / 100.0, end / 2.0)
        }
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&ti, &yi) in t.iter().zip(y) {
        if ti >= lo * (1.0 - 1e-12) && ti <= hi * (1.0 + 1e-12) {
            if !(yi > 0.0) || !yi.is_finite() {
                return Err(Error::Fit(format!("non-positive value {yi} at t = {ti}")));
            }
            xs.push(ti);
            ys.push(yi);
        }
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "{} samples in window [{lo}, {hi}], need {MIN_FIT_SAMPLES}",
            xs.len()
        )));
    }
    Ok((xs, ys, (lo, hi)))
}

/// Least squares line through `(x, z)`: `(slope, intercept, rms)`.
fn line_fit(x: &[f64], z: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let mz = z.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxz: f64 = x.iter().zip(z).map(|(a, b)| (a - mx) * (b - mz)).sum();
    let slope = sxz / sxx;
    let icpt = mz - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(z)
        .map(|(a, b)| (b - icpt - slope * a).powi(2))
        .sum();
    (slope, icpt, (ss / n).sqrt())
}

/// Fits `y = A t^p`; the window defaults to `[t_end/100, t_end/2]` and
/// must span a decade with at least 8 samples.
pub fn fit_power_decay(t: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<RateFit> {
    let (ts, ys, w) = select(t, y, window)?;
    let t_lo = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_hi = ts.iter().cloned().fold(0.0, f64::max);
    if !(t_lo > 0.0) || t_hi < 10.0 * t_lo * (1.0 - 1e-12) {
        return Err(Error::Fit(format!(
            "samples span [{t_lo}, {t_hi}], less than a decade"
        )));
    }
    let lx: Vec<f64> = ts.iter().map(|v| v.ln()).collect();
    let lz: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (p, c, r) = line_fit(&lx, &lz);
    Ok(RateFit {
        exponent: p,
        constant: c.exp(),
        window: w,
        residual: r,
        samples: ts.len(),
    })
}

/// Fits `y = A e^(-rate t)`; `exponent` holds the rate.
pub fn fit_exponential_decay(t: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<RateFit> {
    let (ts, ys, w) = select(t, y, window)?;
    let lz: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (p, c, r) = line_fit(&ts, &lz);
    Ok(RateFit {
        exponent: -p,
        constant: c.exp(),
        window: w,
        residual: r,
        samples: ts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundTag {
    /// `||u(t)||_rho <= K1 t^(-(rho-q0)/(rho(m-1))) ||u0||_q0^(q0/rho)`, Dirichlet.
    DirichletSmoothing,
    /// `||u(t)||_rho <= K2 t^(-1/(m-1))`, Dirichlet.
    DirichletAbsolute,
    /// Neumann smoothing with the factor `exp(H ||u0||_q0^(m-1) t)`.
    NeumannSmoothing,
    /// `K2 (t^(-(rho-q0)/(rho(m-1))) ||u0||_q0^(q0/rho) + ||u0||_q0)`.
    NeumannSmoothingSum,
    /// `||u(t)||_rho <= Q2 t^(-1/(m-1))` for zero-mean data.
    ZeroMeanAbsolute,
    /// Zero-mean smoothing without the exponential factor.
    ZeroMeanSmoothing,
    /// `||u - mean||_rho <= Q1 t^(-2(1-eps)/(rho(m-1))) ||u0||^(q0 eps/rho) e^(H1 ||u0||^(m-1))`, `t > 1`.
    IntermediateTime,
    /// `||u - mean||_rho <= Q t^(-1/(m-1))`.
    MeanConvergence,
    /// `||u - mean||_rho <= e^(-C |mean|^(m-1) t) ||u0 - mean||_rho`; fits the rate `C`.
    Exponential,
    /// `max_K |u - mean| <= G e^(-C |mean|^(m-1) t)` on an interior compact.
    LocalUniform,
}

impl BoundTag {
    pub const ALL: [BoundTag; 10] = [
        BoundTag::DirichletSmoothing,
        BoundTag::DirichletAbsolute,
        BoundTag::NeumannSmoothing,
        BoundTag::NeumannSmoothingSum,
        BoundTag::ZeroMeanAbsolute,
        BoundTag::ZeroMeanSmoothing,
        BoundTag::IntermediateTime,
        BoundTag::MeanConvergence,
        BoundTag::Exponential,
        BoundTag::LocalUniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundTag::DirichletSmoothing => "dirichlet_smoothing",
            BoundTag::DirichletAbsolute => "dirichlet_absolute",
            BoundTag::NeumannSmoothing => "neumann_smoothing",
            BoundTag::NeumannSmoothingSum => "neumann_smoothing_sum",
            BoundTag::ZeroMeanAbsolute => "zero_mean_absolute",
            BoundTag::ZeroMeanSmoothing => "zero_mean_smoothing",
            BoundTag::IntermediateTime => "intermediate_time",
            BoundTag::MeanConvergence => "mean_convergence",
            BoundTag::Exponential => "exponential",
            BoundTag::LocalUniform => "local_uniform",
        }
    }

    fn uses_deviation(self) -> bool {
        matches!(
            self,
            BoundTag::IntermediateTime
                | BoundTag::MeanConvergence
                | BoundTag::Exponential
                | BoundTag::LocalUniform
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub m: f64,
    pub q0: f64,
    pub rho: f64,
    /// Interpolation parameter of the intermediate-time bound.
    #[serde(default = "half")]
    pub epsilon: f64,
    /// `H` in the exponential factors; zero when absent.
    #[serde(default)]
    pub h: f64,
    /// Rate `C` for the local-uniform bound; fitted when absent.
    #[serde(default)]
    pub rate: Option<f64>,
    /// Interior compact for the local-uniform bound; the central 60% by
    /// nu-measure when absent.
    #[serde(default)]
    pub compact: Option<(f64, f64)>,
}

fn half() -> f64 {
    0.5
}

impl BoundParams {
    pub fn new(m: f64, q0: f64, rho: f64) -> Self {
        BoundParams {
            m,
            q0,
            rho,
            epsilon: 0.5,
            h: 0.0,
            rate: None,
            compact: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.m > 1.0) {
            return param("bound needs m > 1");
        }
        if !(self.q0 >= 1.0) || !(self.rho >= 1.0) {
            return param("bound needs q0, rho >= 1");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return param("bound epsilon must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Measured quantities a bound is fitted against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub times: Vec<f64>,
    /// Left side at each time.
    pub lhs: Vec<f64>,
    /// `||u0||_{q0;nu}`.
    pub u0_norm: f64,
    /// `||u0 - mean||_{rho;nu}`.
    pub u0_deviation: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: BoundTag,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    /// `ln(RHS/LHS)` with the fitted constant, at times where `LHS > 0`.
    pub margins: Vec<(f64, f64)>,
    /// `K`, `Q` or `G`; for [`BoundTag::Exponential`] the rate `C`.
    pub fitted_constant: f64,
    /// Rate used by [`BoundTag::LocalUniform`].
    pub rate: Option<f64>,
    /// `||u0 - mean||_inf / |mean|` for the exponential bounds.
    pub ratio_r: Option<f64>,
    pub holds: bool,
}

/// Interval holding the central `fraction` of the grid's nu-mass.
pub fn central_compact(grid: &Grid, fraction: f64) -> (f64, f64) {
    let total: f64 = grid.masses.iter().sum();
    let cut = 0.5 * (1.0 - fraction) * total;
    let locate = |target: f64| {
        let mut acc = 0.0;
        for (i, m) in grid.masses.iter().enumerate() {
            if acc + m >= target {
                let s = if *m > 0.0 { (target - acc) / m } else { 0.0 };
                return grid.faces[i] + s * (grid.faces[i + 1] - grid.faces[i]);
            }
            acc += m;
        }
        *grid.faces.last().unwrap()
    };
    (locate(cut), locate(total - cut))
}

/// Collects the left sides of `tag` from a trajectory.
pub fn bound_inputs(traj: &Trajectory, tag: BoundTag, params: &BoundParams) -> Result<BoundInputs> {
    params.validate()?;
    let g = &traj.grid;
    let u0 = &traj.states[0].u;
    let ubar = mean(u0, g);
    let compact = if tag == BoundTag::LocalUniform {
        Some(params.compact.unwrap_or_else(|| central_compact(g, 0.6)))
    } else {
        None
    };
    let mut times = Vec::new();
    let mut lhs = Vec::new();
    for s in traj.states.iter().filter(|s| s.t > 0.0) {
        if tag == BoundTag::IntermediateTime && s.t <= 1.0 {
            continue;
        }
        let v = if let Some((a, b)) = compact {
            s.u.iter()
                .zip(&g.centers)
                .filter(|(_, x)| **x >= a && **x <= b)
                .fold(0.0f64, |acc, (v, _)| acc.max((v - ubar).abs()))
        } else if tag.uses_deviation() {
            deviation_norm(&s.u, g, ubar, params.rho)
        } else {
            weighted_norm(&s.u, g, params.rho)
        };
        times.push(s.t);
        lhs.push(v);
    }
    if times.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "bound {} needs {MIN_FIT_SAMPLES} sampled times, got {}",
            tag.name(),
            times.len()
        )));
    }
    Ok(BoundInputs {
        times,
        lhs,
        u0_norm: weighted_norm(u0, g, params.q0),
        u0_deviation: deviation_norm(u0, g, ubar, params.rho),
        mean: ubar,
    })
}

/// Smallest constant making the bound's form dominate the inputs.
pub fn fit_bound(tag: BoundTag, params: &BoundParams, inputs: &BoundInputs) -> Result<BoundReport> {
    params.validate()?;
    let BoundParams { m, q0, rho, .. } = *params;
    let n0 = inputs.u0_norm;
    let smoothing = (rho - q0) / (rho * (m - 1.0));
    let absolute = 1.0 / (m - 1.0);
    let mabs = inputs.mean.abs();
    let ratio_r = if matches!(tag, BoundTag::Exponential | BoundTag::LocalUniform) && mabs > 0.0 {
        Some(inputs.u0_deviation / mabs)
    } else {
        None
    };

    if tag == BoundTag::Exponential {
        let scale = mabs.powf(m - 1.0);
        let y0 = inputs.u0_deviation;
        let mut c = f64::INFINITY;
        for (&t, &y) in inputs.times.iter().zip(&inputs.lhs) {
            if y > 0.0 && y0 > 0.0 && scale > 0.0 {
                c = c.min((y0 / y).ln() / (scale * t));
            }
        }
        if !c.is_finite() {
            c = 0.0;
        }
        let margins = inputs
            .times
            .iter()
            .zip(&inputs.lhs)
            .filter(|(_, y)| **y > 0.0)
            .map(|(&t, &y)| (t, (y0 * (-c * scale * t).exp() / y).ln()))
            .collect();
        return Ok(BoundReport {
            bound: tag,
            times: inputs.times.clone(),
            lhs: inputs.lhs.clone(),
            margins,
            fitted_constant: c,
            rate: None,
            ratio_r,
            holds: true,
        });
    }

    let mut rate = None;
    let form: Box<dyn Fn(f64) -> f64> = match tag {
        BoundTag::DirichletSmoothing | BoundTag::ZeroMeanSmoothing => {
            Box::new(move |t: f64| t.powf(-smoothing) * n0.powf(q0 / rho))
        }
        BoundTag::NeumannSmoothing => {
            let h = params.h;
            Box::new(move |t: f64| {
                t.powf(-smoothing) * n0.powf(q0 / rho) * (h * n0.powf(m - 1.0) * t).exp()
            })
        }
        BoundTag::NeumannSmoothingSum => {
            Box::new(move |t: f64| t.powf(-smoothing) * n0.powf(q0 / rho) + n0)
        }
        BoundTag::DirichletAbsolute | BoundTag::ZeroMeanAbsolute | BoundTag::MeanConvergence => {
            Box::new(move |t: f64| t.powf(-absolute))
        }
        BoundTag::IntermediateTime => {
            let e = params.epsilon;
            let h = params.h;
            Box::new(move |t: f64| {
                t.powf(-2.0 * (1.0 - e) / (rho * (m - 1.0)))
                    * n0.powf(q0 * e / rho)
                    * (h * n0.powf(m - 1.0)).exp()
            })
        }
        BoundTag::LocalUniform => {
            let c = match params.rate {
                Some(c) => c,
                None => {
                    let pos: Vec<(f64, f64)> = inputs
                        .times
                        .iter()
                        .zip(&inputs.lhs)
                        .filter(|(_, y)| **y > 0.0)
                        .map(|(t, y)| (*t, *y))
                        .collect();
                    if pos.len() >= MIN_FIT_SAMPLES && mabs > 0.0 {
                        let (t, y): (Vec<f64>, Vec<f64>) = pos.into_iter().unzip();
                        let w = (t[0], *t.last().unwrap());
                        fit_exponential_decay(&t, &y, Some(w))?.exponent / mabs.powf(m - 1.0)
                    } else {
                        0.0
                    }
                }
            };
            rate = Some(c);
            let s = mabs.powf(m - 1.0);
            Box::new(move |t: f64| (-c * s * t).exp())
        }
        BoundTag::Exponential => unreachable!(),
    };

    let mut k: f64 = 0.0;
    for (&t, &y) in inputs.times.iter().zip(&inputs.lhs) {
        if y > 0.0 {
            let f = form(t);
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::Numeric {
                    location: format!("t = {t}"),
                    message: format!("bound form of {} is {f}", tag.name()),
                });
            }
            k = k.max(y / f);
        }
    }
    let margins = inputs
        .times
        .iter()
        .zip(&inputs.lhs)
        .filter(|(_, y)| **y > 0.0)
        .map(|(&t, &y)| (t, (k * form(t) / y).ln()))
        .collect();
    Ok(BoundReport {
        bound: tag,
        times: inputs.times.clone(),
        lhs: inputs.lhs.clone(),
        margins,
        fitted_constant: k,
        rate,
        ratio_r,
        holds: true,
    })
}

pub fn check_bound(traj: &Trajectory, tag: BoundTag, params: &BoundParams) -> Result<BoundReport> {
    let inputs = bound_inputs(traj, tag, params)?;
    fit_bound(tag, params, &inputs)
}

/// Long-format `t,x,u` rows for every stored time.
pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> std::io::Result<()> {
    writeln!(w, "t,x,u")?;
    for s in &traj.states {
        for (x, u) in traj.grid.centers.iter().zip(&s.u) {
            writeln!(w, "{},{},{}", s.t, x, u)?;
        }
    }
    Ok(())
}

/// `t,norm1,norm2,normq,normInf,mean,energy` per stored time.
pub fn write_summary_csv<W: Write>(mut w: W, traj: &Trajectory, q: f64) -> std::io::Result<()> {
    writeln!(w, "t,norm1,norm2,normq,normInf,mean,energy")?;
    let g = &traj.grid;
    for s in &traj.states {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.t,
            weighted_norm(&s.u, g, 1.0),
            weighted_norm(&s.u, g, 2.0),
            weighted_norm(&s.u, g, q),
            weighted_norm(&s.u, g, f64::INFINITY),
            mean(&s.u, g),
            energy(&s.u, g, traj.m)
        )?;
    }
    Ok(())
}

/// `bound,fitted_constant,window_lo,window_hi,residual`; the residual is
/// the RMS of the log margins.
pub fn write_bound_csv<W: Write>(mut w: W, reports: &[BoundReport]) -> std::io::Result<()> {
    writeln!(w, "bound,fitted_constant,window_lo,window_hi,residual")?;
    for r in reports {
        let lo = r.margins.first().map_or(f64::NAN, |m| m.0);
        let hi = r.margins.last().map_or(f64::NAN, |m| m.0);
        let rms = if r.margins.is_empty() {
            f64::NAN
        } else {
            (r.margins.iter().map(|m| m.1 * m.1).sum::<f64>() / r.margins.len() as f64).sqrt()
        };
        writeln!(
            w,
            "{},{},{},{},{}",
            r.bound.name(),
            r.fitted_constant,
            lo,
            hi,
            rms
        )?;
    }
    Ok(())
}
