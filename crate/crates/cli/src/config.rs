//! JSON experiment configs. Every struct rejects unknown keys.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::Value;
use wpme::diagnostics::{BoundParams, BoundTag};
use wpme::poincare::SpectralOptions;
use wpme::scenarios::Overrides;
use wpme::solver::PmeProblem;
use wpme::weights::catalog::InequalityKind;
use wpme::weights::{Domain1D, WeightSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Config {
    Audit(AuditConfig),
    Solve(SolveSpec),
    Scenario(ScenarioConfig),
    Sweep(SweepConfig),
    Fit(FitConfig),
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn command(&self) -> &'static str {
        match self {
            Config::Audit(_) => "audit",
            Config::Solve(_) => "solve",
            Config::Scenario(_) => "scenario",
            Config::Sweep(_) => "sweep",
            Config::Fit(_) => "fit",
        }
    }

    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            Config::Audit(c) => c.out.as_ref(),
            Config::Solve(c) => c.out.as_ref(),
            Config::Scenario(c) => c.out.as_ref(),
            Config::Sweep(c) => c.out.as_ref(),
            Config::Fit(c) => c.out.as_ref(),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Config::Audit(c) => c.seed,
            Config::Solve(c) => c.seed,
            Config::Scenario(c) => c.seed,
            Config::Sweep(c) => c.seed,
            Config::Fit(c) => c.seed,
        }
    }
}

/// Either a catalog entry by name or an explicit weight pair.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub entry: Option<String>,
    pub name: Option<String>,
    pub nu: Option<WeightSpec>,
    pub mu: Option<WeightSpec>,
    /// Defaults to the domain of `nu`.
    pub domain: Option<Domain1D>,
    /// Kinds to audit; both when absent.
    pub kinds: Option<Vec<InequalityKind>>,
    pub spectral: Option<SpectralOptions>,
    #[serde(default)]
    pub weak: bool,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundRequest {
    pub bound: BoundTag,
    pub params: BoundParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Times {
    List(Vec<f64>),
    Spaced(SpacedTimes),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacedTimes {
    pub spacing: Spacing,
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Times {
    pub fn values(&self) -> Result<Vec<f64>> {
        let t = match self {
            Times::List(v) => v.clone(),
            Times::Spaced(s) => {
                if s.count < 2 || !(s.start > 0.0) || !(s.end > s.start) {
                    bail!("times need count >= 2 and 0 < start < end");
                }
                let n = (s.count - 1) as f64;
                (0..s.count)
                    .map(|k| {
                        let f = k as f64 / n;
                        match s.spacing {
                            Spacing::Linear => s.start + (s.end - s.start) * f,
                            Spacing::Log => (s.start.ln() + (s.end.ln() - s.start.ln()) * f).exp(),
                        }
                    })
                    .collect()
            }
        };
        if t.is_empty() || t.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            bail!("output times must be positive and finite");
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            bail!("output times must increase");
        }
        Ok(t)
    }
}

fn four() -> f64 {
    4.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSpec {
    pub problem: PmeProblem,
    pub cells: usize,
    pub times: Times,
    /// Exponent of the `normq` summary column.
    #[serde(default = "four")]
    pub summary_q: f64,
    #[serde(default)]
    pub bounds: Vec<BoundRequest>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: Option<String>,
    #[serde(default)]
    pub overrides: Overrides,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the base solve spec, e.g. `problem.m`.
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// A solve spec without `out` or `seed`.
    pub base: Value,
    pub parameters: Vec<SweepAxis>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FitForm {
    Power,
    Exponential,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub series: Option<PathBuf>,
    pub form: Option<FitForm>,
    /// Column of the series CSV to fit; `norm2` when absent.
    pub column: Option<String>,
    pub window: Option<(f64, f64)>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Sets `path` (dot separated) inside `root`, creating objects on the way.
pub fn set_path(root: &mut Value, path: &str, v: Value) -> Result<()> {
    let mut cur = root;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("malformed parameter path {path:?}");
    }
    for (i, k) in keys.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .with_context(|| format!("parameter path {path:?}: {k:?} is not inside an object"))?;
        if i + 1 == keys.len() {
            obj.insert(k.to_string(), v);
            return Ok(());
        }
        cur = obj
            .entry(k.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!()
}
