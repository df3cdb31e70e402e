use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use wpme::diagnostics::{
    check_bound, fit_exponential_decay, fit_power_decay, mean, weighted_norm, write_bound_csv,
    write_summary_csv, write_trajectory_csv, BoundReport, RateFit,
};
use wpme::poincare::{audit, verdict_for, AuditOptions, PoincareReport, Verdict};
use wpme::scenarios::{run_named, Overrides};
use wpme::solver::{solve_partial, ContinuationReport, Trajectory};
use wpme::weights::catalog::{catalog, lookup, CatalogEntry, InequalityKind};

use crate::config::{set_path, AuditConfig, FitConfig, FitForm, SolveSpec, SweepConfig};
use crate::manifest::Manifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Computed,
    Inconclusive,
}

fn kind_name(k: InequalityKind) -> &'static str {
    match k {
        InequalityKind::Dirichlet => "dirichlet",
        InequalityKind::ZeroMean => "zero_mean",
    }
}

fn verdict_name(v: Option<Verdict>) -> &'static str {
    match v {
        Some(Verdict::Holds) => "holds",
        Some(Verdict::Fails) => "fails",
        Some(Verdict::Inconclusive) => "inconclusive",
        None => "not run",
    }
}

fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    s.trim_matches('_').to_string()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn audit_catalog_entry(e: &CatalogEntry, cfg: &AuditConfig) -> Result<PoincareReport> {
    let mut opts = AuditOptions::for_kind(e.kind);
    opts.spectral = cfg.spectral.clone();
    opts.weak = cfg.weak;
    Ok(audit(&e.name, &e.nu, &e.mu, &e.nu.domain, &opts)?)
}

pub fn run_audit(cfg: &AuditConfig, man: &mut Manifest) -> Result<Outcome> {
    if let Some(name) = &cfg.entry {
        if cfg.nu.is_some() || cfg.mu.is_some() || cfg.domain.is_some() || cfg.kinds.is_some() {
            bail!("audit: give either a catalog entry or an explicit pair, not both");
        }
        let e = lookup(name).ok_or_else(|| anyhow!("unknown catalog entry {name:?}"))?;
        let rep = audit_catalog_entry(&e, cfg)?;
        man.write_json("report.json", &rep)?;
        let v = verdict_for(&rep, e.kind);
        println!("{}: {} {}", e.name, kind_name(e.kind), verdict_name(v));
        return Ok(if v == Some(Verdict::Inconclusive) {
            Outcome::Inconclusive
        } else {
            Outcome::Computed
        });
    }
    let (nu, mu) = match (&cfg.nu, &cfg.mu) {
        (Some(nu), Some(mu)) => (nu, mu),
        _ => bail!("audit: config needs `entry`, or both `nu` and `mu`"),
    };
    let domain = cfg.domain.clone().unwrap_or_else(|| nu.domain.clone());
    let kinds = cfg
        .kinds
        .clone()
        .unwrap_or(vec![InequalityKind::Dirichlet, InequalityKind::ZeroMean]);
    let opts = AuditOptions {
        dirichlet: kinds.contains(&InequalityKind::Dirichlet),
        zero_mean: kinds.contains(&InequalityKind::ZeroMean),
        spectral: cfg.spectral.clone(),
        weak: cfg.weak,
    };
    let name = cfg.name.clone().unwrap_or_else(|| "custom".into());
    let rep = audit(&name, nu, mu, &domain, &opts)?;
    man.write_json("report.json", &rep)?;
    for k in kinds {
        println!(
            "{name}: {} {}",
            kind_name(k),
            verdict_name(verdict_for(&rep, k))
        );
    }
    Ok(if rep.verdicts.any_inconclusive() {
        Outcome::Inconclusive
    } else {
        Outcome::Computed
    })
}

/// Audits every catalog entry into `reports/` with a `catalog.csv` index.
pub fn run_audit_catalog(cfg: &AuditConfig, man: &mut Manifest) -> Result<Outcome> {
    let entries = catalog();
    let reports: Vec<Result<PoincareReport>> = entries
        .par_iter()
        .map(|e| audit_catalog_entry(e, cfg))
        .collect();
    let mut rows = Vec::new();
    let mut outcome = Outcome::Computed;
    for (e, rep) in entries.iter().zip(reports) {
        let rep = rep.with_context(|| format!("auditing {}", e.name))?;
        let file = format!("reports/{}.json", slug(&e.name));
        man.write_json(&file, &rep)?;
        let v = verdict_for(&rep, e.kind);
        if v == Some(Verdict::Inconclusive) {
            outcome = Outcome::Inconclusive;
        }
        let expected = match e.expected {
            wpme::weights::catalog::Expectation::Holds => Verdict::Holds,
            wpme::weights::catalog::Expectation::Fails => Verdict::Fails,
        };
        rows.push(format!(
            "{},{},{},{},{},{}",
            csv_field(&e.name),
            kind_name(e.kind),
            verdict_name(Some(expected)),
            verdict_name(v),
            v == Some(expected),
            file
        ));
    }
    man.write_with("catalog.csv", |w| {
        use std::io::Write;
        writeln!(w, "entry,kind,expected,verdict,agrees,report")?;
        for r in &rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    let agree = rows.iter().filter(|r| r.contains(",true,")).count();
    println!(
        "{agree} of {} catalog entries agree with their expected verdict",
        rows.len()
    );
    Ok(outcome)
}

#[derive(Debug, Clone, Serialize)]
struct RunInfo {
    m: f64,
    epsilon: f64,
    cells: usize,
    accepted_steps: usize,
    rejected_steps: usize,
    final_time: f64,
    continuation: Option<ContinuationReport>,
    error: Option<String>,
}

/// Final-time quantities reported by a sweep.
#[derive(Debug, Clone)]
pub struct RunSummary {
    final_time: f64,
    norm1: f64,
    norm2: f64,
    norm_inf: f64,
    mean: f64,
    accepted_steps: usize,
    bounds: Vec<BoundReport>,
}

impl RunSummary {
    fn of(traj: &Trajectory, bounds: Vec<BoundReport>) -> Self {
        let s = traj.last();
        let g = &traj.grid;
        RunSummary {
            final_time: s.t,
            norm1: weighted_norm(&s.u, g, 1.0),
            norm2: weighted_norm(&s.u, g, 2.0),
            norm_inf: weighted_norm(&s.u, g, f64::INFINITY),
            mean: mean(&s.u, g),
            accepted_steps: traj.accepted_steps,
            bounds,
        }
    }
}

/// Solves and writes `trajectory.csv`, `summary.csv`, `run.json` and any
/// requested bound reports; partial trajectories are written before a
/// solver error is returned.
pub fn solve_outputs(spec: &SolveSpec, man: &mut Manifest) -> Result<RunSummary> {
    let times = spec.times.values()?;
    let (traj, err) = solve_partial(&spec.problem, spec.cells, &times)?;
    man.write_with("trajectory.csv", |w| write_trajectory_csv(w, &traj))?;
    man.write_with("summary.csv", |w| {
        write_summary_csv(w, &traj, spec.summary_q)
    })?;
    let info = RunInfo {
        m: traj.m,
        epsilon: traj.epsilon,
        cells: traj.grid.len(),
        accepted_steps: traj.accepted_steps,
        rejected_steps: traj.rejected_steps,
        final_time: traj.last().t,
        continuation: traj.continuation.clone(),
        error: err.as_ref().map(|e| e.to_string()),
    };
    man.write_json("run.json", &info)?;
    if let Some(e) = err {
        return Err(anyhow!(e).context("solver stopped early"));
    }
    let mut reports = Vec::new();
    for b in &spec.bounds {
        let rep = check_bound(&traj, b.bound, &b.params)
            .with_context(|| format!("bound {}", b.bound.name()))?;
        man.write_json(&format!("bound_{}.json", b.bound.name()), &rep)?;
        reports.push(rep);
    }
    if !reports.is_empty() {
        man.write_with("bounds.csv", |w| write_bound_csv(w, &reports))?;
    }
    Ok(RunSummary::of(&traj, reports))
}

pub fn run_solve(spec: &SolveSpec, man: &mut Manifest) -> Result<Outcome> {
    let s = solve_outputs(spec, man)?;
    println!(
        "solved to t = {} in {} steps; final norm2 {:.6e}, mean {:.6e}",
        s.final_time, s.accepted_steps, s.norm2, s.mean
    );
    for b in &s.bounds {
        println!(
            "{}: constant {:.6e}, holds {}",
            b.bound.name(),
            b.fitted_constant,
            b.holds
        );
    }
    Ok(Outcome::Computed)
}

pub fn run_scenario(name: &str, o: &Overrides, man: &mut Manifest) -> Result<Outcome> {
    let res = run_named(name, o)?;
    for p in res.write_outputs(man.root())? {
        man.add(p);
    }
    for c in &res.checks {
        println!(
            "{name}: {} {} (value {:.6e}, limit {:.6e})",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.value,
            c.limit
        );
    }
    for (k, f) in &res.fits {
        println!(
            "{name}: fit {k} exponent {:.6} constant {:.6e}",
            f.exponent, f.constant
        );
    }
    println!("{name}: {}", if res.passed { "passed" } else { "failed" });
    Ok(Outcome::Computed)
}

fn cross_product(axes: &[Vec<Value>]) -> Vec<Vec<Value>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    out
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs the cross product of the parameter axes, one directory per run,
/// then writes `index.csv` in run order.
pub fn run_sweep(cfg: &SweepConfig, man: &mut Manifest) -> Result<Outcome> {
    if cfg.parameters.is_empty() {
        bail!("sweep: no parameters given");
    }
    if let Some(a) = cfg.parameters.iter().find(|a| a.values.is_empty()) {
        bail!("sweep: parameter {} has no values", a.path);
    }
    if let Some(obj) = cfg.base.as_object() {
        if obj.contains_key("out") || obj.contains_key("seed") {
            bail!("sweep: base spec may not set `out` or `seed`");
        }
    }
    let combos = cross_product(
        &cfg.parameters
            .iter()
            .map(|a| a.values.clone())
            .collect::<Vec<_>>(),
    );
    let width = combos.len().saturating_sub(1).to_string().len().max(3);
    let mut specs = Vec::with_capacity(combos.len());
    for (i, combo) in combos.iter().enumerate() {
        let mut v = cfg.base.clone();
        for (axis, val) in cfg.parameters.iter().zip(combo) {
            set_path(&mut v, &axis.path, val.clone())?;
        }
        let spec: SolveSpec =
            serde_json::from_value(v).with_context(|| format!("sweep run {i}"))?;
        spec.times
            .values()
            .with_context(|| format!("sweep run {i}"))?;
        specs.push(spec);
    }
    let root = man.root().to_path_buf();
    let results: Vec<(
        Vec<std::path::PathBuf>,
        std::result::Result<RunSummary, String>,
    )> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let dir = root.join(format!("run_{i:0width$}"));
            match Manifest::create(&dir, "solve", 0) {
                Ok(mut sub) => {
                    let r = solve_outputs(spec, &mut sub).map_err(|e| format!("{e:#}"));
                    (sub.files(), r)
                }
                Err(e) => (Vec::new(), Err(format!("{e:#}"))),
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut failed = 0;
    for (i, ((files, r), combo)) in results.into_iter().zip(&combos).enumerate() {
        for f in files {
            man.add(f);
        }
        let params: Vec<String> = combo.iter().map(|v| csv_field(&value_text(v))).collect();
        let tail = match r {
            Ok(s) => format!(
                "ok,{},{},{},{},{},{},",
                s.final_time, s.norm1, s.norm2, s.norm_inf, s.mean, s.accepted_steps
            ),
            Err(e) => {
                failed += 1;
                format!("failed,,,,,,,{}", csv_field(&e))
            }
        };
        rows.push(format!("{i},run_{i:0width$},{},{tail}", params.join(",")));
    }
    let header: Vec<String> = cfg.parameters.iter().map(|a| csv_field(&a.path)).collect();
    man.write_with("index.csv", |w| {
        use std::io::Write;
        writeln!(
            w,
            "run,dir,{},status,final_t,norm1,norm2,normInf,mean,steps,error",
            header.join(",")
        )?;
        for r in &rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    println!("{} runs, {failed} failed", rows.len());
    if failed > 0 {
        bail!("{failed} of {} sweep runs failed", rows.len());
    }
    Ok(Outcome::Computed)
}

/// Reads a numeric CSV with a header row; returns the `t` column and `column`.
pub fn read_series(path: &Path, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .context("empty series file")?
        .split(',')
        .map(str::trim)
        .collect();
    let find = |name: &str| {
        header.iter().position(|h| *h == name).ok_or_else(|| {
            anyhow!(
                "series has no column {name:?}; columns are {}",
                header.join(", ")
            )
        })
    };
    let (it, iy) = (find("t")?, find(column)?);
    let mut t = Vec::new();
    let mut y = Vec::new();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64> {
            let c = cells
                .get(i)
                .ok_or_else(|| anyhow!("row {} is short", n + 2))?;
            c.parse()
                .with_context(|| format!("row {}: {c:?} is not a number", n + 2))
        };
        t.push(get(it)?);
        y.push(get(iy)?);
    }
    Ok((t, y))
}

#[derive(Serialize)]
struct FitOutput<'a> {
    series: String,
    column: &'a str,
    form: &'a str,
    fit: RateFit,
}

pub fn run_fit(cfg: &FitConfig, man: &mut Manifest) -> Result<Outcome> {
    let series = cfg.series.as_ref().context("fit: no series file given")?;
    let form = cfg.form.context("fit: no form given")?;
    let column = cfg.column.as_deref().unwrap_or("norm2");
    let (t, y) = read_series(series, column)?;
    let fit = match form {
        FitForm::Power => fit_power_decay(&t, &y, cfg.window)?,
        FitForm::Exponential => fit_exponential_decay(&t, &y, cfg.window)?,
    };
    let form_name = match form {
        FitForm::Power => "power",
        FitForm::Exponential => "exponential",
    };
    println!(
        "{column}: {form_name} exponent {:.6} constant {:.6e} over [{}, {}] ({} samples, rms {:.2e})",
        fit.exponent, fit.constant, fit.window.0, fit.window.1, fit.samples, fit.residual
    );
    man.write_json(
        "fit.json",
        &FitOutput {
            series: series.to_string_lossy().into_owned(),
            column,
            form: form_name,
            fit,
        },
    )?;
    Ok(Outcome::Computed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn cross_product_order() {
        let c = cross_product(&[
            vec![json!(1), json!(2)],
            vec![json!("a"), json!("b"), json!("c")],
        ]);
        assert_eq!(c.len(), 6);
        assert_eq!(c[0], vec![json!(1), json!("a")]);
        assert_eq!(c[1], vec![json!(1), json!("b")]);
        assert_eq!(c[5], vec![json!(2), json!("c")]);
    }

    #[test]
    fn slugs_and_fields() {
        assert_eq!(
            slug("power beta=3 halfline dirichlet"),
            "power_beta_3_halfline_dirichlet"
        );
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
