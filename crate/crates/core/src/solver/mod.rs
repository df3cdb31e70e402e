//! Implicit finite-volume solver for `rho_nu u_t = (rho_mu (u^m)_x)_x`.

mod datum;
mod grid;
mod phi;
mod step;

use serde::{Deserialize, Serialize};

pub use datum::{barenblatt, Datum, Sampling};
pub use grid::{FaceKind, GradeEnds, Grid, MeshSpec, CONDUCTANCE_FLOOR};
pub use phi::{phi_eps, phi_eps_prime, Phi};
pub(crate) use step::thomas;
pub use step::{newton_solve, StepInfo};

use crate::error::{param, Error, Result};
use crate::weights::{Domain1D, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarPolicy {
    #[default]
    ZeroFlux,
    DirichletZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub length: f64,
    #[serde(default)]
    pub far: FarPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Regularization {
    /// `None` selects `1e-6 max(1, ||u0||_inf)`.
    pub epsilon: Option<f64>,
    /// Repeat the run with `eps / 4` and `eps / 16` and report differences.
    pub continuation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeControls {
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Cap `dt <= dt_max_rel * t`; zero disables it.
    pub dt_max_rel: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
    /// Disable step-size adaptation; `dt_init` is then used throughout.
    pub fixed: bool,
}

impl Default for TimeControls {
    fn default() -> Self {
        TimeControls {
            dt_init: 1e-4,
            dt_min: 1e-14,
            dt_max: f64::INFINITY,
            dt_max_rel: 0.1,
            newton_tol: 1e-10,
            max_newton: 40,
            max_halvings: 20,
            fixed: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridOptions {
    pub gamma: f64,
    pub ends: GradeEnds,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            gamma: 2.0,
            ends: GradeEnds::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmeProblem {
    pub m: f64,
    pub bc: BoundaryKind,
    pub nu: WeightSpec,
    pub mu: WeightSpec,
    pub domain: Domain1D,
    #[serde(default)]
    pub truncation: Option<Truncation>,
    pub datum: Datum,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub regularization: Regularization,
    #[serde(default)]
    pub time: TimeControls,
    #[serde(default)]
    pub grid: GridOptions,
}

/// Discrete state at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    pub newton_iters: usize,
    pub residual: f64,
    pub dt: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub epsilons: Vec<f64>,
    /// Max over output times of the nu-weighted L1 distance between runs
    /// with consecutive epsilons.
    pub differences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub m: f64,
    pub epsilon: f64,
    pub grid: Grid,
    pub states: Vec<State>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub continuation: Option<ContinuationReport>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &State {
        self.states
            .last()
            .expect("trajectory has the initial state")
    }
}

impl PmeProblem {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 1.0) || !self.m.is_finite() {
            return param("m must be > 1");
        }
        self.domain.validate()?;
        self.nu.validate()?;
        self.mu.validate()?;
        if !self.domain.is_subset_of(&self.nu.domain) || !self.domain.is_subset_of(&self.mu.domain)
        {
            return Err(Error::Precondition(
                "problem domain not inside the weight domains".into(),
            ));
        }
        if let Some(t) = &self.truncation {
            if !(t.length > 0.0 && t.length.is_finite()) {
                return param("truncation length must be positive");
            }
        } else if !self.domain.is_bounded() {
            return param("unbounded domain needs a truncation");
        }
        if let Some(e) = self.regularization.epsilon {
            if !(e >= 0.0) {
                return param("epsilon must be >= 0");
            }
        }
        let tc = &self.time;
        if !(tc.dt_init > 0.0 && tc.dt_min > 0.0 && tc.dt_max > 0.0 && tc.newton_tol > 0.0) {
            return param("time controls must be positive");
        }
        self.datum.validate()
    }

    /// Meshed interval after truncation.
    pub fn span(&self) -> (f64, f64) {
        let d = &self.domain;
        match self.truncation {
            None => (d.left, d.right),
            Some(t) => {
                let l = t.length;
                match (d.left.is_finite(), d.right.is_finite()) {
                    (true, true) => (d.left, d.right.min(d.left + l)),
                    (true, false) => (d.left, d.left + l),
                    (false, true) => (d.right - l, d.right),
                    (false, false) => (-l, l),
                }
            }
        }
    }

    fn face_kinds(&self) -> (FaceKind, FaceKind) {
        let (lo, hi) = self.span();
        let bc_face = match self.bc {
            BoundaryKind::Dirichlet => FaceKind::Dirichlet,
            BoundaryKind::Neumann => FaceKind::ZeroFlux,
        };
        let far_face = match self.truncation.map(|t| t.far).unwrap_or_default() {
            FarPolicy::ZeroFlux => FaceKind::ZeroFlux,
            FarPolicy::DirichletZero => FaceKind::Dirichlet,
        };
        let left = if lo == self.domain.left {
            bc_face
        } else {
            far_face
        };
        let right = if hi == self.domain.right {
            bc_face
        } else {
            far_face
        };
        (left, right)
    }

    pub fn build_grid(&self, cells: usize, gamma: f64) -> Result<Grid> {
        self.validate()?;
        let (left, right) = self.face_kinds();
        Grid::build(&MeshSpec {
            nu: &self.nu,
            mu: &self.mu,
            domain: &self.domain,
            span: self.span(),
            left,
            right,
            cells,
            gamma,
            ends: self.grid.ends,
        })
    }

    pub fn initial_values(&self, grid: &Grid) -> Result<Vec<f64>> {
        self.datum.sample(&grid.faces, &grid.centers, self.sampling)
    }

    pub fn epsilon_for(&self, u0: &[f64]) -> f64 {
        self.regularization
            .epsilon
            .unwrap_or_else(|| 1e-6 * u0.iter().fold(1.0f64, |a, v| a.max(v.abs())))
    }
}

/// Builds a grid with `problem.grid.gamma`.
pub fn build_grid(problem: &PmeProblem, cells: usize, gamma: f64) -> Result<Grid> {
    problem.build_grid(cells, gamma)
}

fn check_times(times: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &t in times {
        if !(t > prev) || !t.is_finite() {
            return param("output times must be positive and strictly increasing");
        }
        prev = t;
    }
    Ok(())
}

/// One implicit step of size `dt`, halving on Newton failure.
pub fn step(grid: &Grid, problem: &PmeProblem, state: &State, dt: f64) -> Result<State> {
    if !(dt > 0.0) {
        return param("dt must be positive");
    }
    let phi = Phi::new(problem.m, problem.epsilon_for(&state.u));
    let tc = &problem.time;
    let mut u = state.u.clone();
    let mut t = state.t;
    let target = state.t + dt;
    let mut h = dt;
    let mut history = Vec::new();
    let mut halvings = 0;
    let mut info = StepInfo::default();
    let mut steps = 0;
    while t < target {
        let hh = h.min(target - t);
        match newton_solve(grid, &phi, &u, hh, tc.newton_tol, tc.max_newton) {
            Ok((next, i)) => {
                u = next;
                t = if hh == target - t { target } else { t + hh };
                info = i;
                steps += 1;
            }
            Err(r) => {
                history.push(r);
                halvings += 1;
                if halvings > tc.max_halvings {
                    return Err(Error::Newton {
                        t: state.t,
                        halvings,
                        residuals: history,
                    });
                }
                h *= 0.5;
            }
        }
    }
    Ok(State {
        t: target,
        u,
        newton_iters: info.iterations,
        residual: info.residual,
        dt: h.min(dt),
        steps,
    })
}

/// Result of marching several data sets on one grid with a common step sequence.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub trajectories: Vec<Trajectory>,
    pub error: Option<Error>,
}

/// Marches every datum with the same sequence of time steps, so discrete
/// contraction and comparison apply pairwise.
pub fn solve_ensemble_on(
    grid: &Grid,
    m: f64,
    eps: f64,
    tc: &TimeControls,
    data: &[Vec<f64>],
    times: &[f64],
) -> Ensemble {
    let phi = Phi::new(m, eps);
    let mut trajs: Vec<Trajectory> = data
        .iter()
        .map(|u0| Trajectory {
            m,
            epsilon: eps,
            grid: grid.clone(),
            states: vec![State {
                t: 0.0,
                u: u0.clone(),
                newton_iters: 0,
                residual: 0.0,
                dt: 0.0,
                steps: 0,
            }],
            accepted_steps: 0,
            rejected_steps: 0,
            continuation: None,
        })
        .collect();
    if let Err(e) = check_times(times) {
        return Ensemble {
            trajectories: trajs,
            error: Some(e),
        };
    }
    if data
        .iter()
        .any(|u| u.len() != grid.len() || u.iter().any(|v| !v.is_finite()))
    {
        return Ensemble {
            trajectories: trajs,
            error: Some(Error::Parameter(
                "datum length or values invalid for the grid".into(),
            )),
        };
    }
    let mut current: Vec<Vec<f64>> = data.to_vec();
    let mut t = 0.0;
    let mut dt = tc.dt_init.min(tc.dt_max);
    let mut accepted = 0;
    let mut rejected = 0;
    let mut since_output = 0;
    let mut last_info = StepInfo::default();
    for &t_out in times {
        while t < t_out {
            let mut h = dt;
            if tc.dt_max_rel > 0.0 && t > 0.0 && !tc.fixed {
                h = h.min(tc.dt_max_rel * t).max(tc.dt_min);
            }
            h = h.min(tc.dt_max);
            let hits = t + h >= t_out * (1.0 - 1e-12);
            if hits {
                h = t_out - t;
            }
            let mut halvings = 0;
            let mut history = Vec::new();
            let outcome = loop {
                let res: std::result::Result<Vec<(Vec<f64>, StepInfo)>, f64> = current
                    .iter()
                    .map(|u| newton_solve(grid, &phi, u, h, tc.newton_tol, tc.max_newton))
                    .collect();
                match res {
                    Ok(v) => break Ok(v),
                    Err(r) => {
                        rejected += 1;
                        history.push(r);
                        halvings += 1;
                        if halvings > tc.max_halvings || h * 0.5 < tc.dt_min {
                            break Err(Error::Newton {
                                t,
                                halvings,
                                residuals: history,
                            });
                        }
                        h *= 0.5;
                    }
                }
            };
            let results = match outcome {
                Ok(r) => r,
                Err(e) => {
                    for tr in trajs.iter_mut() {
                        tr.accepted_steps = accepted;
                        tr.rejected_steps = rejected;
                    }
                    return Ensemble {
                        trajectories: trajs,
                        error: Some(e),
                    };
                }
            };
            let iters = results.iter().map(|r| r.1.iterations).max().unwrap_or(0);
            let landed = hits && halvings == 0;
            for (cur, (u, info)) in current.iter_mut().zip(results) {
                *cur = u;
                if info.iterations >= last_info.iterations {
                    last_info = info;
                }
            }
            t = if landed { t_out } else { t + h };
            accepted += 1;
            since_output += 1;
            if !tc.fixed {
                let base = if hits && halvings == 0 { dt } else { h };
                dt = if iters < 3 {
                    base * 1.5
                } else if iters > 6 {
                    base * 0.7
                } else {
                    base
                };
                dt = dt.clamp(tc.dt_min, tc.dt_max);
            }
        }
        for (tr, u) in trajs.iter_mut().zip(&current) {
            tr.states.push(State {
                t: t_out,
                u: u.clone(),
                newton_iters: last_info.iterations,
                residual: last_info.residual,
                dt,
                steps: since_output,
            });
        }
        since_output = 0;
        last_info = StepInfo::default();
    }
    for tr in trajs.iter_mut() {
        tr.accepted_steps = accepted;
        tr.rejected_steps = rejected;
    }
    Ensemble {
        trajectories: trajs,
        error: None,
    }
}

/// Solves on a prebuilt grid from given cell values, returning whatever was
/// computed before a failure.
pub fn solve_on_grid(
    problem: &PmeProblem,
    grid: &Grid,
    u0: &[f64],
    times: &[f64],
) -> (Trajectory, Option<Error>) {
    let eps = problem.epsilon_for(u0);
    let run = |e: f64| {
        let mut ens = solve_ensemble_on(grid, problem.m, e, &problem.time, &[u0.to_vec()], times);
        (ens.trajectories.remove(0), ens.error)
    };
    if !problem.regularization.continuation || eps == 0.0 {
        return run(eps);
    }
    let epsilons = vec![eps, eps / 4.0, eps / 16.0];
    let mut runs = Vec::new();
    for &e in &epsilons {
        let (tr, err) = run(e);
        if err.is_some() {
            return (tr, err);
        }
        runs.push(tr);
    }
    let differences = runs
        .windows(2)
        .map(|w| {
            w[0].states
                .iter()
                .zip(&w[1].states)
                .map(|(a, b)| {
                    a.u.iter()
                        .zip(&b.u)
                        .zip(&grid.masses)
                        .map(|((x, y), m)| m * (x - y).abs())
                        .sum::<f64>()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let mut last = runs.pop().unwrap();
    last.continuation = Some(ContinuationReport {
        epsilons,
        differences,
    });
    (last, None)
}

/// Like [`solve`], but returns the partial trajectory alongside any error.
pub fn solve_partial(
    problem: &PmeProblem,
    cells: usize,
    times: &[f64],
) -> Result<(Trajectory, Option<Error>)> {
    let grid = problem.build_grid(cells, problem.grid.gamma)?;
    let u0 = problem.initial_values(&grid)?;
    Ok(solve_on_grid(problem, &grid, &u0, times))
}

/// Marches to each output time; the trajectory starts with the state at 0.
pub fn solve(problem: &PmeProblem, cells: usize, times: &[f64]) -> Result<Trajectory> {
    let (tr, err) = solve_partial(problem, cells, times)?;
    match err {
        None => Ok(tr),
        Some(e) => Err(e),
    }
}

/// Several data on one grid with a common step sequence.
pub fn solve_ensemble(
    problem: &PmeProblem,
    grid: &Grid,
    data: &[Vec<f64>],
    times: &[f64],
) -> Result<Vec<Trajectory>> {
    let scale = data
        .iter()
        .flat_map(|u| u.iter())
        .fold(1.0f64, |a, v| a.max(v.abs()));
    let eps = problem.regularization.epsilon.unwrap_or(1e-6 * scale);
    let ens = solve_ensemble_on(grid, problem.m, eps, &problem.time, data, times);
    match ens.error {
        None => Ok(ens.trajectories),
        Some(e) => Err(e),
    }
}

/// `u~(x~, t) = V^(-2/(N(m-1))) u(V^(1/N) x~, t)` on the grid scaled by
/// `V^(-1/N)`, with cell masses scaled by `V^(-1/N)`.
pub fn scale_solution(traj: &Trajectory, v: f64, n: u32, m: f64) -> Result<Trajectory> {
    if !(v > 0.0 && v.is_finite()) || n == 0 {
        return param("scaling needs V > 0 and N >= 1");
    }
    let nf = n as f64;
    let len = v.powf(-1.0 / nf);
    let amp = v.powf(-2.0 / (nf * (m - 1.0)));
    let mut out = traj.clone();
    out.grid = traj.grid.rescaled(len, len);
    out.epsilon = traj.epsilon * amp;
    for s in out.states.iter_mut() {
        for x in s.u.iter_mut() {
            *x *= amp;
        }
        s.residual *= amp;
    }
    Ok(out)
}
