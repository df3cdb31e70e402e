//! Named weight pairs with a known verdict for one inequality kind.

use serde::{Deserialize, Serialize};

use super::{Domain1D, ExpArgument, Family, WeightSpec};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityKind {
    /// `||v||_nu <= C_P ||v'||_mu` for zero-trace `v`.
    Dirichlet,
    /// `||v - mean v||_nu <= M_P ||v'||_mu`.
    ZeroMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Holds,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub kind: InequalityKind,
    pub expected: Expectation,
    pub nu: WeightSpec,
    pub mu: WeightSpec,
}

/// `(x^(beta-2), x^beta)`.
pub fn power_pair(beta: f64, d: &Domain1D) -> Result<(WeightSpec, WeightSpec)> {
    Ok((
        WeightSpec::power(beta - 2.0, d.clone())?,
        WeightSpec::power(beta, d.clone())?,
    ))
}

/// `(x^-1 |log x|^(beta-2), x |log x|^beta)`.
pub fn log_pair(beta: f64, d: &Domain1D) -> Result<(WeightSpec, WeightSpec)> {
    let nu = Family::LogPower {
        exponent: beta - 2.0,
        base_exponent: -1.0,
    };
    let mu = Family::LogPower {
        exponent: beta,
        base_exponent: 1.0,
    };
    Ok((
        WeightSpec::new(nu, d.clone())?,
        WeightSpec::new(mu, d.clone())?,
    ))
}

/// `(e^(alpha x), e^(alpha x))` or the `|x|` variant.
pub fn exp_pair(
    alpha: f64,
    argument: ExpArgument,
    d: &Domain1D,
) -> Result<(WeightSpec, WeightSpec)> {
    let w = WeightSpec::exp(alpha, argument, d.clone())?;
    Ok((w.clone(), w))
}

/// `(delta^(beta-2), delta^beta)`.
pub fn distance_pair(beta: f64, d: &Domain1D) -> Result<(WeightSpec, WeightSpec)> {
    Ok((
        WeightSpec::distance(beta - 2.0, d.clone())?,
        WeightSpec::distance(beta, d.clone())?,
    ))
}

/// Radial `(|x|^(beta-2), |x|^beta)` in dimension `n`, in polar form.
pub fn radial_pair(beta: f64, n: u32, d: &Domain1D) -> Result<(WeightSpec, WeightSpec)> {
    let nu = Family::RadialPower {
        exponent: beta - 2.0,
        dimension: n,
    };
    let mu = Family::RadialPower {
        exponent: beta,
        dimension: n,
    };
    Ok((
        WeightSpec::new(nu, d.clone())?,
        WeightSpec::new(mu, d.clone())?,
    ))
}

pub fn gaussian_pair(dd: f64) -> Result<(WeightSpec, WeightSpec)> {
    let w = WeightSpec::new(Family::Gaussian { d: dd }, Domain1D::real_line())?;
    Ok((w.clone(), w))
}

fn entry(
    name: String,
    kind: InequalityKind,
    expected: Expectation,
    pair: Result<(WeightSpec, WeightSpec)>,
) -> CatalogEntry {
    let (nu, mu) = pair.expect("catalog weights are valid by construction");
    CatalogEntry {
        name,
        kind,
        expected,
        nu,
        mu,
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// All catalog entries.
pub fn catalog() -> Vec<CatalogEntry> {
    use Expectation::*;
    use InequalityKind::*;
    let unit = Domain1D::named(0.0, 1.0, "unit").unwrap();
    let half = Domain1D::named(0.0, 0.5, "half").unwrap();
    let halfline = Domain1D::named(0.0, f64::INFINITY, "halfline").unwrap();
    let exterior = Domain1D::named(1.0, f64::INFINITY, "exterior").unwrap();
    let line = Domain1D::named(f64::NEG_INFINITY, f64::INFINITY, "line").unwrap();

    let mut out = Vec::new();
    for beta in [-1.0, 0.5, 3.0] {
        for d in [&halfline, &unit, &exterior] {
            out.push(entry(
                format!("power beta={} {} dirichlet", fmt(beta), d.name),
                Dirichlet,
                Holds,
                power_pair(beta, d),
            ));
        }
    }
    for beta in [0.0, 3.0] {
        out.push(entry(
            format!("logpower beta={} unit dirichlet", fmt(beta)),
            Dirichlet,
            Holds,
            log_pair(beta, &unit),
        ));
    }
    for alpha in [1.0, -1.0] {
        out.push(entry(
            format!("exp alpha={} line dirichlet", fmt(alpha)),
            Dirichlet,
            Holds,
            exp_pair(alpha, ExpArgument::Signed, &line),
        ));
    }
    for beta in [0.0, -1.0, 0.5] {
        out.push(entry(
            format!("distance beta={} unit dirichlet", fmt(beta)),
            Dirichlet,
            Holds,
            distance_pair(beta, &unit),
        ));
    }
    out.push(entry(
        "radial N=3 beta=-2 exterior dirichlet".into(),
        Dirichlet,
        Holds,
        radial_pair(-2.0, 3, &exterior),
    ));
    out.push(entry(
        "exp alpha=-1 exterior dirichlet".into(),
        Dirichlet,
        Holds,
        exp_pair(-1.0, ExpArgument::Abs, &exterior),
    ));

    out.push(entry(
        "power beta=3 unit zeromean".into(),
        ZeroMean,
        Holds,
        power_pair(3.0, &unit),
    ));
    out.push(entry(
        "power beta=0 exterior zeromean".into(),
        ZeroMean,
        Holds,
        power_pair(0.0, &exterior),
    ));
    for beta in [0.0, 3.0] {
        out.push(entry(
            format!("logpower beta={} half zeromean", fmt(beta)),
            ZeroMean,
            Holds,
            log_pair(beta, &half),
        ));
    }
    out.push(entry(
        "exp alpha=-1 line zeromean".into(),
        ZeroMean,
        Holds,
        exp_pair(-1.0, ExpArgument::Abs, &line),
    ));
    out.push(entry(
        "gaussian d=0.5 line zeromean".into(),
        ZeroMean,
        Holds,
        gaussian_pair(0.5),
    ));
    for beta in [2.0, 3.0] {
        out.push(entry(
            format!("distance beta={} unit zeromean", fmt(beta)),
            ZeroMean,
            Holds,
            distance_pair(beta, &unit),
        ));
    }

    out.push(entry(
        "lebesgue halfline dirichlet".into(),
        Dirichlet,
        Fails,
        Ok((
            WeightSpec::constant(halfline.clone()).unwrap(),
            WeightSpec::constant(halfline.clone()).unwrap(),
        )),
    ));
    out.push(entry(
        "distance beta=1.5 unit dirichlet".into(),
        Dirichlet,
        Fails,
        distance_pair(1.5, &unit),
    ));
    out
}

pub fn lookup(name: &str) -> Option<CatalogEntry> {
    catalog().into_iter().find(|e| e.name == name)
}
