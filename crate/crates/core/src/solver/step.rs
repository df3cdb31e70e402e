use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::phi::Phi;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `A x = d` for the tridiagonal `A` with sub-, main and
/// super-diagonals `a`, `b`, `c` (`a[0]`, `c[n-1]` unused).
pub(crate) fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], work: &mut Vec<f64>) {
    let n = b.len();
    work.clear();
    work.resize(n, 0.0);
    let mut beta = b[0];
    d[0] /= beta;
    for i in 1..n {
        work[i] = c[i - 1] / beta;
        beta = b[i] - a[i] * work[i];
        d[i] = (d[i] - a[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= work[i + 1] * d[i + 1];
    }
}

/// Residual `R_i = m_i (u_i - u_old_i) / dt - (flux_{i+1/2} - flux_{i-1/2})`
/// with `flux = g (Phi(u_right) - Phi(u_left))`, ghost value zero on
/// Dirichlet faces and zero flux elsewhere.
fn residual(grid: &Grid, phi_u: &[f64], u: &[f64], u_old: &[f64], dt: f64, out: &mut [f64]) {
    let n = u.len();
    let g = &grid.cond;
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { phi_u[i - 1] };
        let right = if i + 1 == n { 0.0 } else { phi_u[i + 1] };
        let flux_r = g[i + 1] * (right - phi_u[i]);
        let flux_l = g[i] * (phi_u[i] - left);
        out[i] = grid.masses[i] * (u[i] - u_old[i]) / dt - (flux_r - flux_l);
    }
}

fn scaled_norm(grid: &Grid, r: &[f64], dt: f64, scale: f64) -> f64 {
    r.iter()
        .zip(&grid.masses)
        .map(|(ri, mi)| (ri * dt / mi).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Damped Newton for one implicit Euler step. On failure returns the last
/// scaled residual.
pub fn newton_solve(
    grid: &Grid,
    phi: &Phi,
    u_old: &[f64],
    dt: f64,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<(Vec<f64>, StepInfo), f64> {
    let n = u_old.len();
    let g = &grid.cond;
    let scale = u_old.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut u = u_old.to_vec();
    let mut phi_u: Vec<f64> = u.iter().map(|&v| phi.value(v)).collect();
    let mut r = vec![0.0; n];
    residual(grid, &phi_u, &u, u_old, dt, &mut r);
    let mut norm = scaled_norm(grid, &r, dt, scale);
    if norm == 0.0 {
        return Ok((u, StepInfo::default()));
    }
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut delta = vec![0.0; n];
    let mut work = Vec::with_capacity(n);
    let mut trial = vec![0.0; n];
    let mut trial_phi = vec![0.0; n];
    let mut trial_r = vec![0.0; n];
    let mut polished = false;
    for it in 1..=max_iter {
        for i in 0..n {
            let d = phi.deriv(u[i]);
            b[i] = grid.masses[i] / dt + (g[i] + g[i + 1]) * d;
            if i > 0 {
                a[i] = -g[i] * phi.deriv(u[i - 1]);
            }
            if i + 1 < n {
                c[i] = -g[i + 1] * phi.deriv(u[i + 1]);
            }
            delta[i] = -r[i];
        }
        thomas(&a, &b, &c, &mut delta, &mut work);
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(norm);
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            for i in 0..n {
                trial[i] = u[i] + lambda * delta[i];
                trial_phi[i] = phi.value(trial[i]);
            }
            residual(grid, &trial_phi, &trial, u_old, dt, &mut trial_r);
            let tn = scaled_norm(grid, &trial_r, dt, scale);
            if tn.is_finite() && (tn < norm || (polished && tn <= norm)) {
                std::mem::swap(&mut u, &mut trial);
                std::mem::swap(&mut phi_u, &mut trial_phi);
                std::mem::swap(&mut r, &mut trial_r);
                norm = tn;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            if norm < tol {
                return Ok((
                    u,
                    StepInfo {
                        iterations: it,
                        residual: norm,
                    },
                ));
            }
            return Err(norm);
        }
        if norm < tol {
            if polished || norm < 1e-3 * tol {
                return Ok((
                    u,
                    StepInfo {
                        iterations: it,
                        residual: norm,
                    },
                ));
            }
            polished = true;
        }
    }
    Err(norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_tridiagonal() {
        let a = [0.0, -1.0, -1.0, -1.0];
        let b = [4.0, 4.0, 4.0, 4.0];
        let c = [-1.0, -1.0, -1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut d = [0.0; 4];
        for i in 0..4 {
            d[i] = b[i] * x[i];
            if i > 0 {
                d[i] += a[i] * x[i - 1];
            }
            if i < 3 {
                d[i] += c[i] * x[i + 1];
            }
        }
        let mut w = Vec::new();
        thomas(&a, &b, &c, &mut d, &mut w);
        for i in 0..4 {
            assert!((d[i] - x[i]).abs() < 1e-14);
        }
    }
}
