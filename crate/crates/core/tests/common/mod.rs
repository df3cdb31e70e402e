#![allow(dead_code)]

use wpme::solver::{
    BoundaryKind, Datum, Grid, GridOptions, PmeProblem, Regularization, Sampling, TimeControls,
    Trajectory,
};
use wpme::weights::{Domain1D, WeightSpec};

pub fn unit() -> Domain1D {
    Domain1D::new(0.0, 1.0).unwrap()
}

pub fn problem(m: f64, bc: BoundaryKind, nu: WeightSpec, mu: WeightSpec) -> PmeProblem {
    let domain = nu.domain.clone();
    PmeProblem {
        m,
        bc,
        nu,
        mu,
        domain,
        truncation: None,
        datum: Datum::Constant { value: 0.0 },
        sampling: Sampling::Center,
        regularization: Regularization::default(),
        time: TimeControls::default(),
        grid: GridOptions::default(),
    }
}

/// Constant weights on `(0, 1)`.
pub fn lebesgue(m: f64, bc: BoundaryKind) -> PmeProblem {
    let one = WeightSpec::constant(unit()).unwrap();
    problem(m, bc, one.clone(), one)
}

/// `(x^a, x^b)` on `(0, 1)`.
pub fn powers(m: f64, bc: BoundaryKind, a: f64, b: f64) -> PmeProblem {
    problem(
        m,
        bc,
        WeightSpec::power(a, unit()).unwrap(),
        WeightSpec::power(b, unit()).unwrap(),
    )
}

pub fn mass(g: &Grid, u: &[f64]) -> f64 {
    u.iter().zip(&g.masses).map(|(v, m)| v * m).sum()
}

pub fn l1_distance(g: &Grid, u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .zip(&g.masses)
        .map(|((a, b), m)| m * (a - b).abs())
        .sum()
}

pub fn sup(u: &[f64]) -> f64 {
    u.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Largest mass change between stored states, in units of the per-step
/// Newton bound `tol * max|u| * nu(grid)`, divided by the steps taken.
pub fn conservation_defect(tr: &Trajectory, newton_tol: f64) -> f64 {
    let total = tr.grid.total_mass();
    let scale = sup(&tr.states[0].u).max(1e-300);
    let mut worst = 0.0f64;
    for w in tr.states.windows(2) {
        let steps = w[1].steps.max(1) as f64;
        let drift = (mass(&tr.grid, &w[1].u) - mass(&tr.grid, &w[0].u)).abs();
        worst = worst.max(drift / (steps * newton_tol * scale * total));
    }
    worst
}

/// Largest positive part of `u - v` over all stored states.
pub fn order_violation(u: &Trajectory, v: &Trajectory) -> f64 {
    u.states
        .iter()
        .zip(&v.states)
        .flat_map(|(a, b)| a.u.iter().zip(&b.u).map(|(x, y)| x - y))
        .fold(0.0f64, f64::max)
}

/// Largest increase of the weighted L1 distance between consecutive states.
pub fn contraction_violation(u: &Trajectory, v: &Trajectory) -> f64 {
    let d: Vec<f64> = u
        .states
        .iter()
        .zip(&v.states)
        .map(|(a, b)| l1_distance(&u.grid, &a.u, &b.u))
        .collect();
    d.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max)
}

pub fn min_value(tr: &Trajectory) -> f64 {
    tr.states
        .iter()
        .flat_map(|s| s.u.iter().copied())
        .fold(f64::INFINITY, f64::min)
}
