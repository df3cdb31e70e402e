//! Validity and constants of weighted Poincare inequalities in 1D.

mod constants;
mod hardy;
mod spectral;

use serde::{Deserialize, Serialize};

pub use constants::{c_alpha_beta, m_pa_constant, riemannian_gap, GapReport};
pub use hardy::{
    hardy_bl, hardy_br, hardy_scan, zero_mean_kl, zero_mean_kr, zero_mean_scan, Scan, Side,
    SCAN_BUDGET,
};
pub use spectral::{
    discrete_constant, eigen_grid, grid_eigenvalue, weak_poincare_check, ConstantEstimate,
    SpectralOptions, TraceEntry, WeakReport, DIVERGENCE_GROWTH, DIVERGENCE_STEPS,
};

use crate::error::{Error, Result};
use crate::quad::QuadOptions;
use crate::weights::catalog::{CatalogEntry, InequalityKind};
use crate::weights::{ext_real, measure_nu, weight_integral, Domain1D, WeightSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

/// Split points tried for the Dirichlet criterion: both ends, then 33
/// interior points.
pub fn split_candidates(domain: &Domain1D) -> Vec<f64> {
    let (a, b) = (domain.left, domain.right);
    let mut out = vec![a, b];
    for i in 1..34 {
        let s = i as f64 / 34.0;
        let c = match (a.is_finite(), b.is_finite()) {
            (true, true) => a + (b - a) * s,
            (true, false) => a + (0.5 * std::f64::consts::PI * s).tan(),
            (false, true) => b - (0.5 * std::f64::consts::PI * (1.0 - s)).tan(),
            (false, false) => (std::f64::consts::PI * (s - 0.5)).tan(),
        };
        out.push(c);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    #[serde(with = "ext_real")]
    pub c: f64,
    #[serde(with = "ext_real::option", default)]
    pub b_left: Option<f64>,
    #[serde(with = "ext_real::option", default)]
    pub b_right: Option<f64>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletVerdict {
    pub verdict: Verdict,
    /// Split point found, if any.
    #[serde(with = "ext_real::option", default)]
    pub split: Option<f64>,
    pub records: Vec<SplitRecord>,
}

fn eval_side(f: impl FnOnce() -> Result<f64>) -> std::result::Result<f64, String> {
    f().map_err(|e| e.to_string())
}

/// Searches a split `c` with `B_L(a, c) < inf` and `B_R(c, b) < inf`.
pub fn dirichlet_poincare_verdict(
    nu: &WeightSpec,
    mu: &WeightSpec,
    domain: &Domain1D,
) -> Result<DirichletVerdict> {
    domain.validate()?;
    if !domain.is_subset_of(&nu.domain) || !domain.is_subset_of(&mu.domain) {
        return Err(Error::Precondition(
            "domain not inside the weight domains".into(),
        ));
    }
    let (a, b) = (domain.left, domain.right);
    let mut records = Vec::new();
    let mut inconclusive = false;
    for c in split_candidates(domain) {
        let bl = eval_side(|| hardy_bl(nu, mu, a, c));
        let mut rec = SplitRecord {
            c,
            b_left: bl.as_ref().ok().copied(),
            b_right: None,
            error: bl.as_ref().err().cloned(),
        };
        if matches!(bl, Ok(v) if v.is_finite()) {
            let br = eval_side(|| hardy_br(nu, mu, c, b));
            rec.b_right = br.as_ref().ok().copied();
            rec.error = br.as_ref().err().cloned();
        }
        inconclusive |= rec.error.is_some();
        let found = matches!((rec.b_left, rec.b_right), (Some(l), Some(r)) if l.is_finite() && r.is_finite());
        records.push(rec);
        if found {
            return Ok(DirichletVerdict {
                verdict: Verdict::Holds,
                split: Some(c),
                records,
            });
        }
    }
    Ok(DirichletVerdict {
        verdict: if inconclusive {
            Verdict::Inconclusive
        } else {
            Verdict::Fails
        },
        split: None,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroMeanVerdict {
    pub verdict: Verdict,
    #[serde(with = "ext_real::option", default)]
    pub k_left: Option<f64>,
    #[serde(with = "ext_real::option", default)]
    pub k_right: Option<f64>,
    pub note: Option<String>,
}

/// `K_L(a, b) + K_R(a, b) < inf`; when `nu(a, b)` is infinite the mean-free
/// form applies and the Hardy functionals at the infinite-mass ends decide.
pub fn zero_mean_poincare_verdict(
    nu: &WeightSpec,
    mu: &WeightSpec,
    domain: &Domain1D,
) -> Result<ZeroMeanVerdict> {
    domain.validate()?;
    let (a, b) = (domain.left, domain.right);
    let total = measure_nu(nu, domain, 1e-10)?;
    if !total.is_finite() {
        return infinite_mass_verdict(nu, mu, domain);
    }
    let kl = zero_mean_kl(nu, mu, a, b);
    let kr = zero_mean_kr(nu, mu, a, b);
    let note = match (&kl, &kr) {
        (Err(e), _) | (_, Err(e)) => Some(e.to_string()),
        _ => None,
    };
    let verdict = match (&kl, &kr) {
        (Ok(l), Ok(r)) if l.is_finite() && r.is_finite() => Verdict::Holds,
        (Ok(l), _) if !l.is_finite() => Verdict::Fails,
        (_, Ok(r)) if !r.is_finite() => Verdict::Fails,
        _ => Verdict::Inconclusive,
    };
    Ok(ZeroMeanVerdict {
        verdict,
        k_left: kl.ok(),
        k_right: kr.ok(),
        note,
    })
}

// With nu(Omega) infinite, L^2_nu functions vanish at the ends carrying
// infinite mass and no mean is subtracted.
fn infinite_mass_verdict(
    nu: &WeightSpec,
    mu: &WeightSpec,
    domain: &Domain1D,
) -> Result<ZeroMeanVerdict> {
    let (a, b) = (domain.left, domain.right);
    let c = split_candidates(domain)[2 + 16];
    let opts = QuadOptions::with_tol(1e-10);
    let left_inf = !weight_integral(nu, 1.0, a, c, &opts)?.is_finite();
    let right_inf = !weight_integral(nu, 1.0, c, b, &opts)?.is_finite();
    let (verdict, note) = match (left_inf, right_inf) {
        (true, true) => (
            dirichlet_poincare_verdict(nu, mu, domain)?.verdict,
            "both ends",
        ),
        (true, false) => (finite_verdict(hardy_bl(nu, mu, a, b)), "left end"),
        _ => (finite_verdict(hardy_br(nu, mu, a, b)), "right end"),
    };
    Ok(ZeroMeanVerdict {
        verdict,
        k_left: None,
        k_right: None,
        note: Some(format!("nu(Omega) is infinite, anchored at {note}")),
    })
}

fn finite_verdict(v: Result<f64>) -> Verdict {
    match v {
        Ok(x) if x.is_finite() => Verdict::Holds,
        Ok(_) => Verdict::Fails,
        Err(_) => Verdict::Inconclusive,
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Verdicts {
    pub dirichlet: Option<Verdict>,
    pub zero_mean: Option<Verdict>,
    pub weak: Option<Verdict>,
}

impl Verdicts {
    pub fn any_inconclusive(&self) -> bool {
        [self.dirichlet, self.zero_mean, self.weak].contains(&Some(Verdict::Inconclusive))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoincareReport {
    pub name: String,
    #[serde(with = "ext_real::option", default)]
    pub b_left: Option<f64>,
    #[serde(with = "ext_real::option", default)]
    pub b_right: Option<f64>,
    #[serde(with = "ext_real::option", default)]
    pub split_point: Option<f64>,
    #[serde(with = "ext_real::option", default)]
    pub k_left: Option<f64>,
    #[serde(with = "ext_real::option", default)]
    pub k_right: Option<f64>,
    pub c_p: Option<f64>,
    pub m_p: Option<f64>,
    pub w_p: Option<f64>,
    #[serde(with = "ext_real::option", default)]
    pub q: Option<f64>,
    pub verdicts: Verdicts,
    pub refinement_trace: Vec<TraceEntry>,
    /// Set when the discrete trace of a constant grows without saturating.
    pub diverging: Vec<InequalityKind>,
    pub split_records: Vec<SplitRecord>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditOptions {
    pub dirichlet: bool,
    pub zero_mean: bool,
    /// Compute discrete constants with these settings.
    pub spectral: Option<SpectralOptions>,
    /// Run the weak-inequality battery (needs the zero-mean constant).
    pub weak: bool,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            dirichlet: true,
            zero_mean: true,
            spectral: None,
            weak: false,
        }
    }
}

impl AuditOptions {
    /// Only the kind a catalog entry is listed for.
    pub fn for_kind(kind: InequalityKind) -> Self {
        AuditOptions {
            dirichlet: kind == InequalityKind::Dirichlet,
            zero_mean: kind == InequalityKind::ZeroMean,
            spectral: None,
            weak: false,
        }
    }
}

/// Integral criteria and, optionally, discrete constants for a weight pair.
pub fn audit(
    name: &str,
    nu: &WeightSpec,
    mu: &WeightSpec,
    domain: &Domain1D,
    opts: &AuditOptions,
) -> Result<PoincareReport> {
    let mut rep = PoincareReport {
        name: name.to_string(),
        ..Default::default()
    };
    if opts.dirichlet {
        let d = dirichlet_poincare_verdict(nu, mu, domain)?;
        rep.verdicts.dirichlet = Some(d.verdict);
        rep.split_point = d.split;
        if let Some(last) = d.records.last() {
            if d.split.is_some() {
                rep.b_left = last.b_left;
                rep.b_right = last.b_right;
            }
        }
        rep.split_records = d.records;
    }
    if opts.zero_mean {
        let z = zero_mean_poincare_verdict(nu, mu, domain)?;
        rep.verdicts.zero_mean = Some(z.verdict);
        rep.k_left = z.k_left;
        rep.k_right = z.k_right;
        rep.notes.extend(z.note);
    }
    if let Some(sp) = &opts.spectral {
        let kinds = [
            (opts.dirichlet, InequalityKind::Dirichlet),
            (
                opts.zero_mean && rep.verdicts.zero_mean != Some(Verdict::Fails),
                InequalityKind::ZeroMean,
            ),
        ];
        for (on, kind) in kinds {
            if !on {
                continue;
            }
            match discrete_constant(kind, nu, mu, domain, sp) {
                Ok(c) => {
                    match kind {
                        InequalityKind::Dirichlet => rep.c_p = Some(c.estimate),
                        InequalityKind::ZeroMean => rep.m_p = Some(c.estimate),
                    }
                    if c.diverging {
                        rep.diverging.push(kind);
                    }
                    rep.refinement_trace.extend(c.trace);
                }
                Err(e) => rep.notes.push(format!("{kind:?} constant: {e}")),
            }
        }
        if opts.weak && rep.m_p.is_some() {
            let l = sp.truncations.last().copied();
            let cells = *sp.cells.last().unwrap_or(&400);
            let trunc = if domain.is_bounded() { None } else { l };
            let g = eigen_grid(
                InequalityKind::ZeroMean,
                nu,
                mu,
                domain,
                cells,
                trunc,
                sp.gamma,
                sp.ends,
            )?;
            let w = weak_poincare_check(&g, 1.0, rep.m_p)?;
            rep.w_p = w.bound.map(|b| b.max(w.estimate));
            rep.verdicts.weak = Some(match w.bound {
                Some(b) if b.is_finite() => Verdict::Holds,
                _ => Verdict::Inconclusive,
            });
        }
    }
    Ok(rep)
}

/// Audit of a catalog entry for its listed kind.
pub fn audit_entry(
    entry: &CatalogEntry,
    spectral: Option<SpectralOptions>,
) -> Result<PoincareReport> {
    let mut opts = AuditOptions::for_kind(entry.kind);
    opts.spectral = spectral;
    audit(&entry.name, &entry.nu, &entry.mu, &entry.nu.domain, &opts)
}

/// Verdict of a report for one kind.
pub fn verdict_for(rep: &PoincareReport, kind: InequalityKind) -> Option<Verdict> {
    match kind {
        InequalityKind::Dirichlet => rep.verdicts.dirichlet,
        InequalityKind::ZeroMean => rep.verdicts.zero_mean,
    }
}
