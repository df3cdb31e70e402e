//! Named reproductions: unbounded solutions on truncated domains, lack of
//! uniform convergence to the mean, sharp decay rates and exponential
//! convergence to the mean.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    central_compact, deviation_norm, fit_exponential_decay, fit_power_decay, mean, signed_pow,
    weighted_norm, write_summary_csv, write_trajectory_csv, RateFit,
};
use crate::error::{param, Error, Result};
use crate::solver::{
    solve_on_grid, BoundaryKind, Datum, FarPolicy, Grid, GridOptions, PmeProblem, Regularization,
    Sampling, TimeControls, Trajectory, Truncation,
};
use crate::weights::catalog::power_pair;
use crate::weights::{Domain1D, ExpArgument, WeightSpec};

/// Geometric ladder for the subsolution parameter `B`.
pub const B_LADDER: std::ops::RangeInclusive<i32> = -20..=20;

/// One pass/fail item of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity.
    pub value: f64,
    /// Limit it is compared against.
    pub limit: f64,
}

impl Check {
    fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            passed: value >= limit,
            value,
            limit,
        }
    }

    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            passed: value <= limit,
            value,
            limit,
        }
    }
}

/// A labelled solver run kept for export.
#[derive(Debug, Clone)]
pub struct Run {
    pub label: String,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, f64>,
    pub fits: BTreeMap<String, RateFit>,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip)]
    pub runs: Vec<Run>,
}

impl ScenarioResult {
    fn new(name: &str, params: &[(&str, f64)]) -> Self {
        ScenarioResult {
            name: name.into(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            metrics: BTreeMap::new(),
            fits: BTreeMap::new(),
            checks: Vec::new(),
            passed: false,
            runs: Vec::new(),
        }
    }

    fn metric(&mut self, k: impl Into<String>, v: f64) {
        self.metrics.insert(k.into(), v);
    }

    fn finish(mut self) -> Self {
        self.passed = self.checks.iter().all(|c| c.passed);
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Writes `verdict.json` and per-run `<label>_trajectory.csv` and
    /// `<label>_summary.csv` into `dir`; returns the written paths.
    pub fn write_outputs(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let p = dir.join("verdict.json");
        serde_json::to_writer_pretty(BufWriter::new(File::create(&p)?), self)?;
        out.push(p);
        for r in &self.runs {
            let p = dir.join(format!("{}_trajectory.csv", r.label));
            write_trajectory_csv(BufWriter::new(File::create(&p)?), &r.trajectory)?;
            out.push(p);
            let p = dir.join(format!("{}_summary.csv", r.label));
            write_summary_csv(BufWriter::new(File::create(&p)?), &r.trajectory, 4.0)?;
            out.push(p);
        }
        Ok(out)
    }
}

fn scenario_err<T>(name: &str, message: impl Into<String>) -> Result<T> {
    Err(Error::Scenario {
        name: name.into(),
        message: message.into(),
    })
}

fn linspace(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| t0 + (t1 - t0) * i as f64 / n as f64)
        .collect()
}

fn logspace(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let (a, b) = (t0.ln(), t1.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Cell-integrated residual `m_i v_t - (F_{i+1/2} - F_{i-1/2})` with the
/// scheme's face conductances and zero ghosts across Dirichlet faces.
pub fn cell_residuals(grid: &Grid, m: f64, v: &[f64], vt: &[f64]) -> Vec<f64> {
    let n = v.len();
    let phi: Vec<f64> = v.iter().map(|x| signed_pow(*x, m)).collect();
    let flux: Vec<f64> = (0..=n)
        .map(|k| {
            let l = if k == 0 { 0.0 } else { phi[k - 1] };
            let r = if k == n { 0.0 } else { phi[k] };
            grid.cond[k] * (r - l)
        })
        .collect();
    (0..n)
        .map(|i| grid.masses[i] * vt[i] - (flux[i + 1] - flux[i]))
        .collect()
}

fn solve_checked(
    name: &str,
    problem: &PmeProblem,
    grid: &Grid,
    u0: &[f64],
    times: &[f64],
) -> Result<Trajectory> {
    let (tr, err) = solve_on_grid(problem, grid, u0, times);
    match err {
        Some(e) => scenario_err(name, format!("solver failed: {e}")),
        None => Ok(tr),
    }
}

fn base_problem(
    m: f64,
    bc: BoundaryKind,
    nu: WeightSpec,
    mu: WeightSpec,
    datum: Datum,
) -> PmeProblem {
    let domain = nu.domain.clone();
    PmeProblem {
        m,
        bc,
        nu,
        mu,
        domain,
        truncation: None,
        datum,
        sampling: Sampling::Center,
        regularization: Regularization::default(),
        time: TimeControls::default(),
        grid: GridOptions::default(),
    }
}

/// Smallest value of `u` over all cells and stored times.
fn min_value(tr: &Trajectory) -> f64 {
    tr.states
        .iter()
        .flat_map(|s| s.u.iter())
        .fold(f64::INFINITY, |a, v| a.min(*v))
}

fn max_mean_drift(tr: &Trajectory) -> f64 {
    let m0 = mean(&tr.states[0].u, &tr.grid);
    tr.states
        .iter()
        .map(|s| (mean(&s.u, &tr.grid) - m0).abs() / m0.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Subsolution `profile(x) T_B(t)` with `T_B = (1 + (m-1) t / B)^(-1/(m-1))`.
struct DecayingProfile<'a> {
    m: f64,
    profile: &'a (dyn Fn(f64) -> f64 + Sync),
}

impl DecayingProfile<'_> {
    fn factor(&self, b: f64, t: f64) -> f64 {
        (1.0 + (self.m - 1.0) * t / b).powf(-1.0 / (self.m - 1.0))
    }

    fn values(&self, grid: &Grid, b: f64, t: f64) -> Vec<f64> {
        let f = self.factor(b, t);
        grid.centers
            .iter()
            .map(|x| (self.profile)(*x) * f)
            .collect()
    }

    /// Largest cell residual over `times`.
    fn residual(&self, grid: &Grid, b: f64, times: &[f64]) -> f64 {
        times
            .iter()
            .map(|&t| {
                let f = self.factor(b, t);
                let dfdt = -f.powf(self.m) / b;
                let v: Vec<f64> = grid
                    .centers
                    .iter()
                    .map(|x| (self.profile)(*x) * f)
                    .collect();
                let vt: Vec<f64> = grid
                    .centers
                    .iter()
                    .map(|x| (self.profile)(*x) * dfdt)
                    .collect();
                cell_residuals(grid, self.m, &v, &vt)
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `B` on the ladder whose residual stays below `tol`.
    fn fit(&self, grid: &Grid, times: &[f64], tol: f64) -> Option<(f64, f64)> {
        B_LADDER
            .rev()
            .map(|k| 2f64.powi(k))
            .map(|b| (b, self.residual(grid, b, times)))
            .find(|(_, r)| *r <= tol)
    }

    /// `min (u - v_B)` over cells and stored times.
    fn margin(&self, tr: &Trajectory, b: f64) -> f64 {
        tr.states
            .iter()
            .map(|s| {
                let v = self.values(&tr.grid, b, s.t);
                s.u.iter()
                    .zip(&v)
                    .map(|(u, v)| u - v)
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Residual tolerance for subsolution fitting, per cell.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Output times of the unbounded scenarios.
fn unbounded_times() -> Vec<f64> {
    linspace(0.0, 1.0, 20)
}

struct UnboundedRun {
    trajectory: Trajectory,
    b_hat: f64,
    residual: f64,
    margin: f64,
    tol: f64,
    max_at_end: f64,
}

fn unbounded_run(
    name: &str,
    problem: &PmeProblem,
    cells: usize,
    sub: &DecayingProfile,
) -> Result<UnboundedRun> {
    let grid = problem.build_grid(cells, problem.grid.gamma)?;
    let u0 = problem.initial_values(&grid)?;
    let times = unbounded_times();
    let mut check_times = vec![0.0];
    check_times.extend(&times);
    let Some((b_hat, residual)) = sub.fit(&grid, &check_times, RESIDUAL_TOL) else {
        return scenario_err(name, "no admissible B on the ladder; grid too coarse");
    };
    let trajectory = solve_checked(name, problem, &grid, &u0, &times)?;
    let margin = sub.margin(&trajectory, b_hat);
    // first order in the widest cell, relative to the datum's range
    let h = grid
        .faces
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let scale = u0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = h * scale / (grid.span().1 - grid.span().0);
    let max_at_end = weighted_norm(&trajectory.last().u, &grid, f64::INFINITY);
    Ok(UnboundedRun {
        trajectory,
        b_hat,
        residual,
        margin,
        tol,
        max_at_end,
    })
}

fn record_unbounded(res: &mut ScenarioResult, tag: &str, run: &UnboundedRun) {
    res.metric(format!("{tag}_b_hat"), run.b_hat);
    res.metric(format!("{tag}_residual"), run.residual);
    res.metric(format!("{tag}_margin"), run.margin);
    res.metric(format!("{tag}_max_t1"), run.max_at_end);
    res.checks.push(Check::at_least(
        &format!("{tag}_dominates_subsolution"),
        run.margin,
        -run.tol,
    ));
    res.checks.push(Check::at_least(
        &format!("{tag}_positivity"),
        min_value(&run.trajectory),
        -1e-12,
    ));
}

fn growth_check(
    res: &mut ScenarioResult,
    short: &UnboundedRun,
    long: &UnboundedRun,
    predicted: f64,
) {
    let ratio = long.max_at_end / short.max_at_end;
    res.metric("growth_ratio", ratio);
    res.metric("predicted_ratio", predicted);
    // excess growth over 1, against 80% of the predicted excess
    res.checks.push(Check::at_least(
        "max_grows_with_length",
        ratio - 1.0,
        0.8 * (predicted - 1.0),
    ));
}

/// `(e^-x, e^-x)` on `(0, inf)` with Dirichlet data at `0`, truncated at
/// `L` and `2L` with zero flux at the far end, datum `log(x + 1)`.
pub fn dirichlet_unbounded(m: f64, length: f64, cells: usize) -> Result<ScenarioResult> {
    const NAME: &str = "dirichlet_unbounded";
    if !(m > 1.0) {
        return param("m must exceed 1");
    }
    if !(length >= 20.0) {
        return param("truncation length must be at least 20");
    }
    let d = Domain1D::half_line(0.0);
    let w = WeightSpec::exp(-1.0, ExpArgument::Signed, d)?;
    let profile = |x: f64| x.ln_1p();
    let sub = DecayingProfile {
        m,
        profile: &profile,
    };
    let mut res = ScenarioResult::new(NAME, &[("m", m), ("L", length), ("cells", cells as f64)]);
    let runs = [(length, cells), (2.0 * length, 2 * cells)]
        .par_iter()
        .map(|&(l, n)| {
            let mut p = base_problem(
                m,
                BoundaryKind::Dirichlet,
                w.clone(),
                w.clone(),
                Datum::Log1p,
            );
            p.truncation = Some(Truncation {
                length: l,
                far: FarPolicy::ZeroFlux,
            });
            unbounded_run(NAME, &p, n, &sub)
        })
        .collect::<Result<Vec<_>>>()?;
    record_unbounded(&mut res, "L", &runs[0]);
    record_unbounded(&mut res, "2L", &runs[1]);
    growth_check(
        &mut res,
        &runs[0],
        &runs[1],
        (2.0 * length).ln_1p() / length.ln_1p(),
    );
    let mut it = runs.into_iter();
    res.runs.push(Run {
        label: "L".into(),
        trajectory: it.next().unwrap().trajectory,
    });
    res.runs.push(Run {
        label: "2L".into(),
        trajectory: it.next().unwrap().trajectory,
    });
    Ok(res.finish())
}

/// Relative tolerance for the far-boundary comparison on `|x| <= L/2`.
pub const FAR_POLICY_TOL: f64 = 1e-2;

/// `(e^-|x|, e^-|x|)` on the line truncated to `[-L, L]` and `[-2L, 2L]`,
/// datum `log(x^2 + 2)`. The `L` run is repeated with Dirichlet far ends.
pub fn neumann_unbounded(m: f64, length: f64, cells: usize) -> Result<ScenarioResult> {
    const NAME: &str = "neumann_unbounded";
    if !(m > 1.0) {
        return param("m must exceed 1");
    }
    if !(length >= 20.0) {
        return param("truncation length must be at least 20");
    }
    let w = WeightSpec::exp(-1.0, ExpArgument::Abs, Domain1D::real_line())?;
    let profile = |x: f64| (x * x + 2.0).ln();
    let sub = DecayingProfile {
        m,
        profile: &profile,
    };
    let mut res = ScenarioResult::new(NAME, &[("m", m), ("L", length), ("cells", cells as f64)]);
    let problem = |l: f64, far: FarPolicy| {
        let mut p = base_problem(
            m,
            BoundaryKind::Neumann,
            w.clone(),
            w.clone(),
            Datum::Logx2p2,
        );
        p.truncation = Some(Truncation { length: l, far });
        p
    };
    let (runs, dirichlet) = rayon::join(
        || {
            [(length, cells), (2.0 * length, 2 * cells)]
                .par_iter()
                .map(|&(l, n)| unbounded_run(NAME, &problem(l, FarPolicy::ZeroFlux), n, &sub))
                .collect::<Result<Vec<_>>>()
        },
        || -> Result<Trajectory> {
            let p = problem(length, FarPolicy::DirichletZero);
            let grid = p.build_grid(cells, p.grid.gamma)?;
            let u0 = p.initial_values(&grid)?;
            solve_checked(NAME, &p, &grid, &u0, &unbounded_times())
        },
    );
    let (runs, dirichlet) = (runs?, dirichlet?);
    record_unbounded(&mut res, "L", &runs[0]);
    record_unbounded(&mut res, "2L", &runs[1]);
    growth_check(
        &mut res,
        &runs[0],
        &runs[1],
        (4.0 * length * length + 2.0).ln() / (length * length + 2.0).ln(),
    );

    let base = &runs[0].trajectory;
    let asym = base
        .states
        .iter()
        .map(|s| {
            let n = s.u.len();
            let scale = s.u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            (0..n)
                .map(|i| (s.u[i] - s.u[n - 1 - i]).abs())
                .fold(0.0, f64::max)
                / scale
        })
        .fold(0.0, f64::max);
    res.metric("asymmetry", asym);
    res.checks.push(Check::at_most("symmetric", asym, 1e-8));

    // zero-flux and Dirichlet far ends on the central half of the span
    let mut far_diff = 0.0f64;
    for (a, b) in base.states.iter().zip(&dirichlet.states) {
        let mut scale = 0.0f64;
        let mut diff = 0.0f64;
        for (i, x) in base.grid.centers.iter().enumerate() {
            if x.abs() <= 0.5 * length {
                scale = scale.max(a.u[i].abs());
                diff = diff.max((a.u[i] - b.u[i]).abs());
            }
        }
        far_diff = far_diff.max(diff / scale);
    }
    res.metric("far_policy_difference", far_diff);
    res.checks.push(Check::at_most(
        "far_policies_agree",
        far_diff,
        FAR_POLICY_TOL,
    ));

    let mut it = runs.into_iter();
    res.runs.push(Run {
        label: "L".into(),
        trajectory: it.next().unwrap().trajectory,
    });
    res.runs.push(Run {
        label: "2L".into(),
        trajectory: it.next().unwrap().trajectory,
    });
    res.runs.push(Run {
        label: "L_dirichlet_far".into(),
        trajectory: dirichlet,
    });
    Ok(res.finish())
}

/// `C(m, beta) = m (beta + 2(m - 1))`, the shrinking rate of the support
/// gap for `m >= 2`; `m (beta + m - 1)` for the linear profile.
pub fn shrink_rate(m: f64, beta: f64) -> f64 {
    if m >= 2.0 {
        m * (beta + 2.0 * (m - 1.0))
    } else {
        m * (beta + m - 1.0)
    }
}

/// Supersolution with gap radius `r`: zero on `[0, r/2]`, linear up to 1
/// at `r` for `m >= 2`; `min(x/r, 1)` for `m < 2`.
pub fn gap_profile(m: f64, r: f64, x: f64) -> f64 {
    if m >= 2.0 {
        (2.0 * x / r - 1.0).clamp(0.0, 1.0)
    } else {
        (x / r).min(1.0)
    }
}

/// `d/dt` of [`gap_profile`] with `r' = -C r`.
fn gap_profile_dt(m: f64, c: f64, r: f64, x: f64) -> f64 {
    if m >= 2.0 {
        if x > 0.5 * r && x <= r {
            2.0 * c * x / r
        } else {
            0.0
        }
    } else if x <= r {
        c * x / r
    } else {
        0.0
    }
}

/// Cells required below `r(t)/2` at the last output time.
pub const GAP_CELLS: usize = 4;

/// `(x^(beta-2), x^beta)` on `(0, 1)`, Neumann, datum equal to the
/// supersolution at `t = 0` with `r(0) = r0`; runs until `r` has shrunk
/// by a factor 8.
pub fn nonuniform_convergence(m: f64, beta: f64, r0: f64, cells: usize) -> Result<ScenarioResult> {
    const NAME: &str = "nonuniform_convergence";
    if !(m > 1.0) {
        return param("m must exceed 1");
    }
    if !(beta > 1.0) {
        return param("beta must exceed 1");
    }
    if !(r0 > 0.0 && r0 < 1.0) {
        return param("r0 must lie in (0, 1)");
    }
    let unit = Domain1D::new(0.0, 1.0)?;
    let (nu, mu) = power_pair(beta, &unit)?;
    let c = shrink_rate(m, beta);
    let r = |t: f64| r0 * (-c * t).exp();
    let t_end = 8f64.ln() / c;
    let times = linspace(0.0, t_end, 40);

    let p = base_problem(
        m,
        BoundaryKind::Neumann,
        nu,
        mu,
        Datum::Constant { value: 0.0 },
    );
    let grid = p.build_grid(cells, p.grid.gamma)?;
    let below = grid.centers.iter().filter(|x| **x < 0.5 * r(t_end)).count();
    if below < GAP_CELLS {
        return scenario_err(
            NAME,
            format!(
                "only {below} cells below r(t)/2 = {} at t = {t_end}",
                0.5 * r(t_end)
            ),
        );
    }
    let u0: Vec<f64> = grid
        .centers
        .iter()
        .map(|x| gap_profile(m, r0, *x))
        .collect();
    let tr = solve_checked(NAME, &p, &grid, &u0, &times)?;
    let ubar = mean(&u0, &grid);

    let mut res = ScenarioResult::new(
        NAME,
        &[
            ("m", m),
            ("beta", beta),
            ("r0", r0),
            ("cells", cells as f64),
        ],
    );
    res.metric("C", c);
    res.metric("mean", ubar);
    res.metric("t_end", t_end);

    // first order in the cells straddling the kinks
    let h_gap = grid
        .faces
        .windows(2)
        .filter(|w| w[0] < r0)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let tol = h_gap / r(t_end);
    let mut over = f64::NEG_INFINITY;
    let mut inside_gap = 0.0f64;
    let mut super_res = f64::INFINITY;
    let mut devs = Vec::new();
    for s in &tr.states {
        let rt = r(s.t);
        let hat: Vec<f64> = grid
            .centers
            .iter()
            .map(|x| gap_profile(m, rt, *x))
            .collect();
        let hat_t: Vec<f64> = grid
            .centers
            .iter()
            .map(|x| gap_profile_dt(m, c, rt, *x))
            .collect();
        over = over.max(
            s.u.iter()
                .zip(&hat)
                .map(|(u, h)| u - h)
                .fold(f64::NEG_INFINITY, f64::max),
        );
        for (x, u) in grid.centers.iter().zip(&s.u) {
            if *x < 0.5 * rt {
                inside_gap = inside_gap.max(*u);
            }
        }
        let rr = cell_residuals(&grid, m, &hat, &hat_t);
        super_res = super_res.min(rr.into_iter().fold(f64::INFINITY, f64::min));
        devs.push(deviation_norm(&s.u, &grid, ubar, 2.0));
    }
    res.metric("max_excess_over_supersolution", over);
    res.metric("max_in_gap", inside_gap);
    res.metric("min_supersolution_residual", super_res);
    res.metric("h_gap", h_gap);
    res.checks
        .push(Check::at_most("below_supersolution", over, tol));
    res.checks
        .push(Check::at_least("supersolution_residual", super_res, -h_gap));
    if m >= 2.0 {
        res.checks
            .push(Check::at_most("vanishes_in_gap", inside_gap, tol));
    } else {
        let first = tr.states.iter().map(|s| s.u[0]).fold(0.0, f64::max);
        res.checks.push(Check::at_most(
            "vanishes_at_origin",
            first,
            grid.centers[0] / r(t_end) + tol,
        ));
    }
    res.checks
        .push(Check::at_least("positive_mean", ubar, f64::MIN_POSITIVE));

    // after an initial layer of a tenth of the run
    let start = tr
        .states
        .iter()
        .position(|s| s.t >= 0.1 * t_end)
        .unwrap_or(0);
    let worst_rise = devs[start..]
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    res.metric("deviation_first", devs[0]);
    res.metric("deviation_last", *devs.last().unwrap());
    res.checks
        .push(Check::at_most("deviation_decreases", worst_rise, 0.0));
    res.checks
        .push(Check::at_most("mean_conserved", max_mean_drift(&tr), 1e-8));
    res.checks
        .push(Check::at_least("positivity", min_value(&tr), -1e-12));
    res.runs.push(Run {
        label: "run".into(),
        trajectory: tr,
    });
    Ok(res.finish())
}

/// Final time of the sharp-rate runs.
pub const AR81_T_END: f64 = 1000.0;

/// Zero-mean Neumann `(1, 1)` on `(0, 1)` from `scale cos(pi x)`; fits the
/// decay exponents of the 2-norm and the max over the default window.
pub fn ar81_sharp_rate(m: f64, cells: usize, scale: f64) -> Result<ScenarioResult> {
    const NAME: &str = "ar81";
    if !(m > 1.0) {
        return param("m must exceed 1");
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return param("datum scale must be positive");
    }
    let unit = Domain1D::new(0.0, 1.0)?;
    let one = WeightSpec::constant(unit)?;
    let p = base_problem(
        m,
        BoundaryKind::Neumann,
        one.clone(),
        one,
        Datum::Cospi {
            offset: 0.0,
            amplitude: scale,
        },
    );
    let grid = p.build_grid(cells, p.grid.gamma)?;
    let u0 = p.initial_values(&grid)?;
    let times = logspace(1e-2, AR81_T_END, 121);
    let tr = solve_checked(NAME, &p, &grid, &u0, &times)?;

    let mut res = ScenarioResult::new(NAME, &[("m", m), ("cells", cells as f64), ("scale", scale)]);
    let expected = -1.0 / (m - 1.0);
    res.metric("expected_exponent", expected);
    let t = tr.times();
    for (label, q) in [("norm2", 2.0), ("normInf", f64::INFINITY)] {
        let y: Vec<f64> = tr
            .states
            .iter()
            .map(|s| weighted_norm(&s.u, &grid, q))
            .collect();
        let fit = match fit_power_decay(&t, &y, None) {
            Ok(f) => f,
            Err(e) => return scenario_err(NAME, format!("fit window unreachable: {e}")),
        };
        res.checks.push(Check::at_most(
            &format!("{label}_exponent"),
            ((fit.exponent - expected) / expected).abs(),
            0.1,
        ));
        res.metric(format!("{label}_exponent"), fit.exponent);
        res.fits.insert(label.into(), fit);
    }
    res.checks.push(Check::at_most(
        "mean_conserved",
        tr.states
            .iter()
            .map(|s| mean(&s.u, &grid).abs())
            .fold(0.0, f64::max),
        1e-8 * scale,
    ));
    res.runs.push(Run {
        label: "run".into(),
        trajectory: tr,
    });
    Ok(res.finish())
}

/// Final time for the mean `ubar0`; later runs with larger means stop
/// earlier by `(ubar / ubar0)^(m-1)`.
pub const MEAN_T_END: f64 = 2.0;

/// Exponential convergence to the mean on a finite-measure domain. The
/// datum is shifted by constants so its mean runs over `ubar0 {1, 2, 4}`.
pub fn neumann_mean_convergence(
    m: f64,
    nu: &WeightSpec,
    mu: &WeightSpec,
    datum: &Datum,
    cells: usize,
) -> Result<ScenarioResult> {
    const NAME: &str = "mean_convergence";
    if !(m > 1.0) {
        return param("m must exceed 1");
    }
    let mut p = base_problem(
        m,
        BoundaryKind::Neumann,
        nu.clone(),
        mu.clone(),
        datum.clone(),
    );
    if !p.domain.is_bounded() {
        p.truncation = Some(Truncation {
            length: 20.0,
            far: FarPolicy::ZeroFlux,
        });
    }
    let grid = p.build_grid(cells, p.grid.gamma)?;
    let base = p.initial_values(&grid)?;
    let ubar0 = mean(&base, &grid);
    if ubar0 == 0.0 {
        return scenario_err(NAME, "datum has zero mean");
    }
    let compact = central_compact(&grid, 0.6);
    let mut res = ScenarioResult::new(NAME, &[("m", m), ("cells", cells as f64), ("mean0", ubar0)]);
    res.metric("compact_lo", compact.0);
    res.metric("compact_hi", compact.1);

    let factors = [1.0, 2.0, 4.0];
    let runs = factors
        .par_iter()
        .map(|&k| {
            let target = k * ubar0;
            let u0: Vec<f64> = base.iter().map(|v| v + target - ubar0).collect();
            let t_end = MEAN_T_END / k.powf(m - 1.0);
            let times = linspace(0.0, t_end, 200);
            solve_checked(NAME, &p, &grid, &u0, &times).map(|tr| (target, tr))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rates = Vec::new();
    for (k, (target, tr)) in factors.iter().zip(runs) {
        let tag = format!("mean{k}");
        let ubar = mean(&tr.states[0].u, &grid);
        let dev2: Vec<f64> = tr
            .states
            .iter()
            .map(|s| deviation_norm(&s.u, &grid, ubar, 2.0))
            .collect();
        res.metric(format!("{tag}_value"), target);
        res.checks.push(Check::at_most(
            &format!("{tag}_mean_conserved"),
            max_mean_drift(&tr),
            1e-8,
        ));
        if dev2[0] == 0.0 {
            // steady state
            rates.push(f64::INFINITY);
        } else {
            let t = tr.times();
            let local: Vec<f64> = tr
                .states
                .iter()
                .map(|s| {
                    grid.centers
                        .iter()
                        .zip(&s.u)
                        .filter(|(x, _)| **x >= compact.0 && **x <= compact.1)
                        .map(|(_, u)| (u - ubar).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            let fit2 = fit_exponential_decay(&t, &dev2, None)?;
            let fit_local = fit_exponential_decay(&t, &local, None)?;
            res.checks.push(Check::at_least(
                &format!("{tag}_rate_positive"),
                fit2.exponent,
                f64::MIN_POSITIVE,
            ));
            res.checks.push(Check::at_most(
                &format!("{tag}_residual"),
                fit2.residual,
                0.05,
            ));
            res.checks.push(Check::at_least(
                &format!("{tag}_local_rate_positive"),
                fit_local.exponent,
                f64::MIN_POSITIVE,
            ));
            res.metric(format!("{tag}_rate"), fit2.exponent);
            res.metric(format!("{tag}_local_rate"), fit_local.exponent);
            rates.push(fit2.exponent);
            res.fits.insert(format!("{tag}_norm2"), fit2);
            res.fits.insert(format!("{tag}_local"), fit_local);
        }
        res.runs.push(Run {
            label: tag,
            trajectory: tr,
        });
    }
    let worst = rates
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    res.checks
        .push(Check::at_least("rate_nondecreasing", worst, 0.0));
    Ok(res.finish())
}

/// Scenario parameters with per-scenario defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Overrides {
    pub m: Option<f64>,
    pub beta: Option<f64>,
    #[serde(rename = "L")]
    pub length: Option<f64>,
    pub cells: Option<usize>,
    pub r0: Option<f64>,
    pub scale: Option<f64>,
}

/// Names accepted by [`run_named`].
pub const SCENARIOS: [&str; 5] = [
    "dirichlet_unbounded",
    "neumann_unbounded",
    "nonuniform_convergence",
    "ar81",
    "mean_convergence",
];

/// Runs a scenario by name with defaults filled in.
pub fn run_named(name: &str, o: &Overrides) -> Result<ScenarioResult> {
    let m = o.m.unwrap_or(2.0);
    match name {
        "dirichlet_unbounded" => {
            dirichlet_unbounded(m, o.length.unwrap_or(20.0), o.cells.unwrap_or(400))
        }
        "neumann_unbounded" => {
            neumann_unbounded(m, o.length.unwrap_or(20.0), o.cells.unwrap_or(400))
        }
        "nonuniform_convergence" => nonuniform_convergence(
            m,
            o.beta.unwrap_or(2.0),
            o.r0.unwrap_or(0.1),
            o.cells.unwrap_or(400),
        ),
        "ar81" => ar81_sharp_rate(m, o.cells.unwrap_or(200), o.scale.unwrap_or(1.0)),
        "mean_convergence" => {
            let unit = Domain1D::new(0.0, 1.0)?;
            let one = WeightSpec::constant(unit)?;
            let datum = Datum::Cospi {
                offset: 0.5,
                amplitude: 0.5 * o.scale.unwrap_or(1.0),
            };
            neumann_mean_convergence(m, &one, &one, &datum, o.cells.unwrap_or(200))
        }
        _ => Err(Error::Parameter(format!(
            "unknown scenario {name}; expected one of {}",
            SCENARIOS.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shrink_rate_values() {
        assert_eq!(shrink_rate(2.0, 2.0), 8.0);
        assert_eq!(shrink_rate(3.0, 2.0), 18.0);
        assert_eq!(shrink_rate(1.5, 2.0), 3.75);
    }

    #[test]
    fn gap_profile_pieces() {
        let r = 0.1;
        for x in [0.0, 0.01, 0.05] {
            assert_eq!(gap_profile(2.0, r, x), 0.0);
        }
        assert!((gap_profile(2.0, r, 0.075) - 0.5).abs() < 1e-15);
        assert_eq!(gap_profile(2.0, r, 0.1), 1.0);
        assert_eq!(gap_profile(2.0, r, 0.7), 1.0);
        assert!((gap_profile(1.5, r, 0.05) - 0.5).abs() < 1e-15);
        assert_eq!(gap_profile(1.5, r, 0.5), 1.0);
    }

    #[test]
    fn constant_has_zero_residual_with_zero_flux() {
        let d = Domain1D::new(0.0, 1.0).unwrap();
        let one = WeightSpec::constant(d).unwrap();
        let p = base_problem(
            2.0,
            BoundaryKind::Neumann,
            one.clone(),
            one,
            Datum::Constant { value: 1.0 },
        );
        let g = p.build_grid(20, 1.0).unwrap();
        let v = vec![0.3; g.len()];
        let r = cell_residuals(&g, 2.0, &v, &vec![0.0; g.len()]);
        assert!(r.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn dirichlet_faces_drain() {
        let d = Domain1D::new(0.0, 1.0).unwrap();
        let one = WeightSpec::constant(d).unwrap();
        let p = base_problem(
            2.0,
            BoundaryKind::Dirichlet,
            one.clone(),
            one,
            Datum::Constant { value: 1.0 },
        );
        let g = p.build_grid(20, 1.0).unwrap();
        let r = cell_residuals(&g, 2.0, &vec![1.0; g.len()], &vec![0.0; g.len()]);
        assert!(r[0] > 0.0 && r[g.len() - 1] > 0.0);
        assert!(r[5].abs() < 1e-15);
    }

    #[test]
    fn unknown_scenario_rejected() {
        assert!(run_named("nope", &Overrides::default()).is_err());
        assert!(dirichlet_unbounded(2.0, 10.0, 100).is_err());
        assert!(nonuniform_convergence(2.0, 0.5, 0.1, 100).is_err());
    }

    #[test]
    fn coarse_grid_reported() {
        let e = nonuniform_convergence(2.0, 2.0, 0.02, 16).unwrap_err();
        assert!(matches!(e, Error::Scenario { .. }));
    }

    #[test]
    fn sharp_rate_on_coarse_grid() {
        let r = ar81_sharp_rate(2.0, 48, 1.0).unwrap();
        assert!(r.passed, "{:?}", r.checks);
        assert_eq!(r.runs.len(), 1);
    }

    #[test]
    fn steady_datum_skips_fits() {
        let d = Domain1D::new(0.0, 1.0).unwrap();
        let one = WeightSpec::constant(d).unwrap();
        let r =
            neumann_mean_convergence(2.0, &one, &one, &Datum::Constant { value: 1.0 }, 16).unwrap();
        assert!(r.fits.is_empty());
        assert!(r.passed);
    }

    #[test]
    fn outputs_written() {
        let dir = std::env::temp_dir().join(format!("wpme-scenario-{}", std::process::id()));
        let r = ar81_sharp_rate(2.0, 24, 1.0).unwrap();
        let files = r.write_outputs(&dir).unwrap();
        assert_eq!(files.len(), 3);
        let v: serde_json::Value = serde_json::from_reader(File::open(&files[0]).unwrap()).unwrap();
        assert_eq!(v["name"], "ar81");
        let csv = std::fs::read_to_string(&files[2]).unwrap();
        assert!(csv.starts_with("t,norm1,norm2,normq,normInf,mean,energy\n"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
