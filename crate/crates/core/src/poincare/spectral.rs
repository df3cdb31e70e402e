//! Discrete Poincare constants from the generalized eigenproblem
//! `K v = lambda M v` on a finite-volume grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::solver::{thomas, FaceKind, GradeEnds, Grid, MeshSpec};
use crate::weights::catalog::InequalityKind;
use crate::weights::{measure_nu, Domain1D, WeightSpec};

/// Relative growth per step that counts toward divergence.
pub const DIVERGENCE_GROWTH: f64 = 1.25;
/// Consecutive growing steps needed to declare divergence.
pub const DIVERGENCE_STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub kind: InequalityKind,
    pub cells: usize,
    pub truncation: Option<f64>,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub kind: InequalityKind,
    /// Richardson extrapolation of the two finest grids at the largest
    /// truncation, assuming second order; the finest value otherwise.
    pub estimate: f64,
    pub finest: f64,
    pub trace: Vec<TraceEntry>,
    pub diverging: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralOptions {
    pub cells: Vec<usize>,
    /// Truncation lengths for unbounded domains; ignored otherwise.
    pub truncations: Vec<f64>,
    pub gamma: f64,
    pub ends: GradeEnds,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            cells: vec![125, 250, 500, 1000, 2000],
            truncations: vec![20.0, 40.0, 80.0],
            gamma: 2.0,
            ends: GradeEnds::Auto,
        }
    }
}

fn span(domain: &Domain1D, l: Option<f64>) -> (f64, f64) {
    match l {
        None => (domain.left, domain.right),
        Some(l) => match (domain.left.is_finite(), domain.right.is_finite()) {
            (true, true) => (domain.left, domain.right),
            (true, false) => (domain.left, domain.left + l),
            (false, true) => (domain.right - l, domain.right),
            (false, false) => (-l, l),
        },
    }
}

// Largest change of a log-weight across a truncated span.
const LN_SPAN: f64 = 700.0;

/// Pulls truncated ends in until both weights stay within `LN_SPAN` of
/// their value at the anchor, so cell masses do not underflow.
fn trimmed_span(
    nu: &WeightSpec,
    mu: &WeightSpec,
    domain: &Domain1D,
    l: Option<f64>,
) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = span(domain, l);
    if l.is_none() {
        return Ok((lo, hi));
    }
    let anchor = match (domain.left.is_finite(), domain.right.is_finite()) {
        (true, false) => domain.left + 1.0,
        (false, true) => domain.right - 1.0,
        _ => 0.0,
    };
    let (rn, rm) = (nu.ln_eval(anchor)?, mu.ln_eval(anchor)?);
    let inside = |x: f64| -> Result<bool> {
        Ok((nu.ln_eval(x)? - rn).abs() <= LN_SPAN && (mu.ln_eval(x)? - rm).abs() <= LN_SPAN)
    };
    if !domain.left.is_finite() {
        while lo < anchor - 1.0 && !inside(lo)? {
            lo = anchor + 0.95 * (lo - anchor);
        }
    }
    if !domain.right.is_finite() {
        while hi > anchor + 1.0 && !inside(hi)? {
            hi = anchor + 0.95 * (hi - anchor);
        }
    }
    Ok((lo, hi))
}

/// Grid for an eigenproblem: Dirichlet faces everywhere for the Dirichlet
/// kind, zero flux everywhere for the zero-mean kind.
#[allow(clippy::too_many_arguments)]
pub fn eigen_grid(
    kind: InequalityKind,
    nu: &WeightSpec,
    mu: &WeightSpec,
    domain: &Domain1D,
    cells: usize,
    truncation: Option<f64>,
    gamma: f64,
    ends: GradeEnds,
) -> Result<Grid> {
    let face = match kind {
        InequalityKind::Dirichlet => FaceKind::Dirichlet,
        InequalityKind::ZeroMean => FaceKind::ZeroFlux,
    };
    Grid::build(&MeshSpec {
        nu,
        mu,
        domain,
        span: trimmed_span(nu, mu, domain, truncation)?,
        left: face,
        right: face,
        cells,
        gamma,
        ends,
    })
}

struct Tridiag {
    diag: Vec<f64>,
    /// `off[i]` couples cells `i` and `i + 1`.
    off: Vec<f64>,
}

fn stiffness(grid: &Grid) -> Tridiag {
    let n = grid.len();
    let g = &grid.cond;
    let diag = (0..n).map(|i| g[i] + g[i + 1]).collect();
    let off = (0..n - 1).map(|i| -g[i + 1]).collect();
    Tridiag { diag, off }
}

/// Eigenvalues of `M^-1/2 K M^-1/2` below `sigma`.
fn sturm_count(k: &Tridiag, mass: &[f64], sigma: f64) -> usize {
    let n = mass.len();
    let mut count = 0;
    let mut d = 0.0;
    for i in 0..n {
        let a = k.diag[i] / mass[i] - sigma;
        d = if i == 0 {
            a
        } else {
            let b2 = (k.off[i - 1] / mass[i - 1]) * (k.off[i - 1] / mass[i]);
            a - b2 / d
        };
        if d == 0.0 {
            d = -f64::MIN_POSITIVE;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// `index`-th smallest eigenvalue by bisection on the Sturm count.
fn bisect(k: &Tridiag, mass: &[f64], index: usize) -> f64 {
    let n = mass.len();
    let mut hi: f64 = 0.0;
    for (i, m) in mass.iter().enumerate() {
        let mut r = k.diag[i].abs();
        if i > 0 {
            r += k.off[i - 1].abs();
        }
        if i + 1 < n {
            r += k.off[i].abs();
        }
        hi = hi.max(r / m);
    }
    let mut lo = 0.0;
    hi *= 1.0 + 1e-12;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(k, mass, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Shifted inverse iteration from the bisection estimate, deflating
/// constants in the `M` inner product when `deflate` is set. Returns the
/// Rayleigh quotient.
fn inverse_iteration(k: &Tridiag, mass: &[f64], shift: f64, deflate: bool) -> Result<f64> {
    let n = mass.len();
    let total: f64 = mass.iter().sum();
    let project = |v: &mut [f64]| {
        if deflate {
            let c = v.iter().zip(mass).map(|(x, m)| x * m).sum::<f64>() / total;
            for x in v.iter_mut() {
                *x -= c;
            }
        }
    };
    let rayleigh = |v: &[f64]| {
        let mut num = 0.0;
        for i in 0..n {
            let mut kv = k.diag[i] * v[i];
            if i > 0 {
                kv += k.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                kv += k.off[i] * v[i + 1];
            }
            num += v[i] * kv;
        }
        let den: f64 = v.iter().zip(mass).map(|(x, m)| m * x * x).sum();
        num / den
    };
    let mut a = vec![0.0; n];
    let mut c = vec![0.0; n];
    let b: Vec<f64> = (0..n).map(|i| k.diag[i] - shift * mass[i]).collect();
    a[1..].copy_from_slice(&k.off[..n - 1]);
    c[..n - 1].copy_from_slice(&k.off[..n - 1]);
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.1 * ((i * 7919 % 101) as f64 / 101.0))
        .collect();
    if deflate {
        for (i, x) in v.iter_mut().enumerate() {
            *x = (i as f64 + 0.5) / n as f64 - 0.5;
        }
    }
    project(&mut v);
    let mut work = Vec::new();
    let mut prev = f64::NAN;
    for _ in 0..200 {
        let mut rhs: Vec<f64> = v.iter().zip(mass).map(|(x, m)| x * m).collect();
        thomas(&a, &b, &c, &mut rhs, &mut work);
        project(&mut rhs);
        let norm = rhs
            .iter()
            .zip(mass)
            .map(|(x, m)| m * x * x)
            .sum::<f64>()
            .sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            break;
        }
        for (x, r) in v.iter_mut().zip(&rhs) {
            *x = r / norm;
        }
        let q = rayleigh(&v);
        if (q - prev).abs() <= 1e-13 * q.abs() {
            return Ok(q);
        }
        prev = q;
    }
    if prev.is_finite() {
        return Ok(prev);
    }
    Err(Error::Numeric {
        location: "inverse iteration".into(),
        message: format!("no convergence near shift {shift}"),
    })
}

/// Smallest relevant eigenvalue: the first for the Dirichlet kind, the
/// first nonzero for the zero-mean kind.
pub fn grid_eigenvalue(grid: &Grid, kind: InequalityKind) -> Result<f64> {
    let n = grid.len();
    if n < 2 {
        return param("eigenproblem needs at least two cells");
    }
    if let Some(i) = grid
        .masses
        .iter()
        .position(|m| !(*m > 0.0) || !m.is_finite())
    {
        return Err(Error::Numeric {
            location: format!("cell {i} at x = {}", grid.centers[i]),
            message: format!("cell mass {}", grid.masses[i]),
        });
    }
    let k = stiffness(grid);
    let (index, deflate) = match kind {
        InequalityKind::Dirichlet => (0, false),
        InequalityKind::ZeroMean => (1, true),
    };
    let lam = bisect(&k, &grid.masses, index);
    if !(lam > 0.0) {
        return Err(Error::Numeric {
            location: "eigenvalue".into(),
            message: format!("non-positive eigenvalue {lam}"),
        });
    }
    let refined = inverse_iteration(&k, &grid.masses, lam * (1.0 - 1e-9), deflate)?;
    // keep the refinement only when it lands on the bracketed eigenvalue
    if (refined - lam).abs() <= 1e-6 * lam {
        Ok(refined)
    } else {
        Ok(lam)
    }
}

fn grows(seq: &[f64]) -> bool {
    seq.len() > DIVERGENCE_STEPS && {
        let tail = &seq[seq.len() - DIVERGENCE_STEPS - 1..];
        tail.windows(2).all(|w| w[1] >= DIVERGENCE_GROWTH * w[0])
    }
}

/// `C_P` (Dirichlet) or `M_P` (zero mean) as `lambda^(-1/2)` over a
/// refinement and truncation study.
pub fn discrete_constant(
    kind: InequalityKind,
    nu: &WeightSpec,
    mu: &WeightSpec,
    domain: &Domain1D,
    opts: &SpectralOptions,
) -> Result<ConstantEstimate> {
    domain.validate()?;
    if opts.cells.is_empty() {
        return param("no grid sizes given");
    }
    if kind == InequalityKind::ZeroMean {
        let v = measure_nu(nu, domain, 1e-8)?;
        if !v.is_finite() {
            return Err(Error::Precondition(
                "zero-mean constant needs nu(Omega) < inf".into(),
            ));
        }
    }
    let truncs: Vec<Option<f64>> = if domain.is_bounded() {
        vec![None]
    } else {
        if opts.truncations.is_empty() {
            return param("unbounded domain needs truncation lengths");
        }
        opts.truncations.iter().map(|l| Some(*l)).collect()
    };
    let jobs: Vec<(Option<f64>, usize)> = truncs
        .iter()
        .flat_map(|l| opts.cells.iter().map(move |m| (*l, *m)))
        .collect();
    let trace = jobs
        .par_iter()
        .map(|&(l, cells)| {
            let g = eigen_grid(kind, nu, mu, domain, cells, l, opts.gamma, opts.ends)?;
            let lam = grid_eigenvalue(&g, kind)?;
            Ok(TraceEntry {
                kind,
                cells,
                truncation: l,
                estimate: lam.powf(-0.5),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let last_l = *truncs.last().unwrap();
    let by_cells: Vec<&TraceEntry> = trace.iter().filter(|e| e.truncation == last_l).collect();
    let finest = by_cells.last().unwrap().estimate;
    let estimate = if by_cells.len() >= 2 {
        let (c1, c2) = (by_cells[by_cells.len() - 2], by_cells[by_cells.len() - 1]);
        let r = c2.cells as f64 / c1.cells as f64;
        c2.estimate + (c2.estimate - c1.estimate) / (r * r - 1.0)
    } else {
        finest
    };
    let last_m = *opts.cells.last().unwrap();
    let cell_seq: Vec<f64> = by_cells.iter().map(|e| e.estimate).collect();
    let trunc_seq: Vec<f64> = trace
        .iter()
        .filter(|e| e.cells == last_m)
        .map(|e| e.estimate)
        .collect();
    let diverging = grows(&cell_seq) || grows(&trunc_seq);
    Ok(ConstantEstimate {
        kind,
        estimate,
        finest,
        trace,
        diverging,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakReport {
    /// Largest ratio over the trial battery.
    pub estimate: f64,
    /// `2 max(M_P, nu(Omega)^(-1/2))` when `M_P` is known.
    pub bound: Option<f64>,
    pub trials: usize,
    pub worst_trial: String,
}

/// Trial battery on the grid: constants, hats, truncated powers and
/// oscillations, in the normalized coordinate of the meshed span.
fn trials(grid: &Grid) -> Vec<(String, Vec<f64>)> {
    let (lo, hi) = grid.span();
    let s: Vec<f64> = grid.centers.iter().map(|x| (x - lo) / (hi - lo)).collect();
    let mut out = vec![("constant".to_string(), vec![1.0; s.len()])];
    for k in 1..=9 {
        let c = k as f64 / 10.0;
        for w in [0.02, 0.1, 0.3] {
            out.push((
                format!("hat c={c} w={w}"),
                s.iter()
                    .map(|x| (1.0 - (x - c).abs() / w).max(0.0))
                    .collect(),
            ));
        }
    }
    for p in [0.25, 0.5, 1.0, 2.0, 4.0] {
        out.push((
            format!("power s^{p}"),
            s.iter().map(|x| x.powf(p)).collect(),
        ));
        out.push((
            format!("power (1-s)^{p}"),
            s.iter().map(|x| (1.0 - x).powf(p)).collect(),
        ));
    }
    for k in 1..=8 {
        let kf = k as f64 * std::f64::consts::PI;
        out.push((
            format!("cos {k}"),
            s.iter().map(|x| (kf * x).cos()).collect(),
        ));
        out.push((
            format!("sin {k}"),
            s.iter().map(|x| (kf * x).sin()).collect(),
        ));
    }
    out
}

/// `max ||v||_{2;nu} / (||v'||_{2;mu} + ||v||_{r;nu})` over the battery on a
/// zero-flux grid; `r = 1` is the weak inequality.
pub fn weak_poincare_check(grid: &Grid, r: f64, m_p: Option<f64>) -> Result<WeakReport> {
    if !(r >= 1.0) {
        return param("lower norm exponent must be >= 1");
    }
    let nu_total = grid.total_mass();
    let mut best = 0.0f64;
    let mut worst = String::new();
    let battery = trials(grid);
    for (name, v) in &battery {
        let l2 = crate::diagnostics::weighted_norm(v, grid, 2.0);
        let lr = crate::diagnostics::weighted_norm(v, grid, r);
        let mut grad = 0.0;
        for i in 1..v.len() {
            grad += grid.cond[i] * (v[i] - v[i - 1]).powi(2);
        }
        let ratio = l2 / (grad.sqrt() + lr);
        if ratio > best {
            best = ratio;
            worst = name.clone();
        }
    }
    Ok(WeakReport {
        estimate: best,
        bound: m_p.map(|m| 2.0 * m.max(nu_total.powf(-0.5))),
        trials: battery.len(),
        worst_trial: worst,
    })
}
