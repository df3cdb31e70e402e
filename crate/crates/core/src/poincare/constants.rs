//! Closed-form constants and the spectral-gap functional of radial models.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::quad::{integrate, sup_search, QuadOptions};
use crate::weights::Profile;

/// `2^(1 - a/2) nu^((1 - a)/2) M_P^a`.
pub fn m_pa_constant(a: f64, m_p: f64, nu_measure: f64) -> Result<f64> {
    if !(a > 0.0 && a <= 1.0) {
        return param("a must lie in (0, 1]");
    }
    if !(m_p > 0.0 && m_p.is_finite()) {
        return param("M_P must be positive");
    }
    if !(nu_measure > 0.0 && nu_measure.is_finite()) {
        return param("nu(Omega) must be positive and finite");
    }
    Ok(2f64.powf(1.0 - 0.5 * a) * nu_measure.powf(0.5 * (1.0 - a)) * m_p.powf(a))
}

/// `1 + (b/a)^(b/a) (1 - b/a)^(1 - b/a)` with `0^0 = 1`.
pub fn c_alpha_beta(alpha: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < alpha && alpha < 1.0) {
        return param("need 0 < beta < alpha < 1");
    }
    let r = beta / alpha;
    Ok(1.0 + r.powf(r) * (1.0 - r).powf(1.0 - r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub q: f64,
    pub bounded: bool,
    /// `(r_max, Q(r_max))` over the halving sequence ending at `r_max`.
    pub trace: Vec<(f64, f64)>,
}

fn gap_at(psi: &Profile, n: u32, r_max: f64, budget: usize) -> Result<f64> {
    let opts = QuadOptions::with_tol(1e-10);
    let e = n as f64 - 1.0;
    let inner = |xi: f64| -> Result<f64> {
        let a = integrate(
            |r| (e * psi.ln_psi(r).unwrap_or(f64::NAN)).exp(),
            0.0,
            xi,
            &opts,
        )?
        .into_value()?;
        let b = integrate(
            |r| (-e * psi.ln_psi(r).unwrap_or(f64::NAN)).exp(),
            xi,
            r_max,
            &opts,
        )?
        .into_value()?;
        Ok(a * b)
    };
    Ok(sup_search(inner, 0.0, r_max, budget)?.sup)
}

/// `Q = sup_{0 < xi < r <= r_max} (\int_0^xi psi^(N-1)) (\int_xi^r psi^(1-N))`.
///
/// The inner `r`-supremum sits at `r = r_max`. Bounded when `Q` grows by
/// less than 25% over the last doubling of `r_max`.
pub fn riemannian_gap(psi: &Profile, n: u32, r_max: f64, budget: usize) -> Result<GapReport> {
    psi.validate()?;
    if n < 2 {
        return param("dimension must be at least 2");
    }
    if !(r_max > 0.0 && r_max.is_finite() && r_max <= psi.r_max()) {
        return param("r_max must be positive, finite and inside the profile range");
    }
    let mut trace = Vec::new();
    for k in (0..4).rev() {
        let r = r_max / 2f64.powi(k);
        trace.push((r, gap_at(psi, n, r, budget)?));
    }
    let k = trace.len();
    let q = trace[k - 1].1;
    let bounded = q.is_finite() && q < 1.25 * trace[k - 2].1;
    Ok(GapReport { q, bounded, trace })
}
