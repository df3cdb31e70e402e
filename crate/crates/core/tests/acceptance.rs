//! Acceptance run: one line per criterion, nonzero exit on any failure.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use wpme::diagnostics::{
    bound_inputs, check_bound, fit_bound, fit_power_decay, mean, weighted_norm, BoundParams,
    BoundTag,
};
use wpme::poincare::{
    audit_entry, c_alpha_beta, discrete_constant, hardy_br, hardy_scan, verdict_for,
    SpectralOptions, Verdict,
};
use wpme::quad::QuadOptions;
use wpme::scenarios::{
    ar81_sharp_rate, cell_residuals, dirichlet_unbounded, neumann_unbounded,
    nonuniform_convergence, run_named, Overrides, ScenarioResult,
};
use wpme::solver::{
    barenblatt, scale_solution, solve, solve_ensemble, BoundaryKind, Datum, FarPolicy, PmeProblem,
    TimeControls, Truncation,
};
use wpme::weights::catalog::{
    catalog, gaussian_pair, lookup, power_pair, Expectation, InequalityKind,
};
use wpme::weights::{Domain1D, ExpArgument, WeightSpec};

type Outcome = Result<String, String>;

const SEED: u64 = 20_240_611;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (a.ln() + (b.ln() - a.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn sci(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.2e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn failed_checks(r: &ScenarioResult) -> String {
    let bad: Vec<String> = r
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} = {:.3e} (limit {:.3e})", c.name, c.value, c.limit))
        .collect();
    bad.join("; ")
}

fn hardy_constancy() -> Outcome {
    let mut worst_sup = 0.0f64;
    let mut worst_var = 0.0f64;
    for beta in [2.0, 3.0, 5.0] {
        let (nu, mu) = power_pair(beta, &Domain1D::half_line(0.0)).map_err(|e| e.to_string())?;
        let exact = 1.0 / ((beta - 1.0) * (beta - 1.0));
        let b = hardy_br(&nu, &mu, 0.0, f64::INFINITY).map_err(|e| e.to_string())?;
        worst_sup = worst_sup.max((b - exact).abs() / exact);
        let scan = hardy_scan(
            &nu,
            &mu,
            0.0,
            f64::INFINITY,
            wpme::poincare::Side::Right,
            &QuadOptions::with_tol(1e-10),
        )
        .map_err(|e| e.to_string())?;
        let (lo, hi) = scan
            .profile
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(l, h), (_, p)| {
                (l.min(*p), h.max(*p))
            });
        worst_var = worst_var.max((hi - lo) / exact);
    }
    check(
        worst_sup < 5e-3 && worst_var < 5e-3,
        format!("max rel error of B_R {worst_sup:.2e}, max product variation {worst_var:.2e}"),
    )
}

fn spectral_oracles() -> Outcome {
    let unit = Domain1D::new(0.0, 1.0).unwrap();
    let one = WeightSpec::constant(unit.clone()).unwrap();
    let mut notes = Vec::new();
    let mut ok = true;
    for kind in [InequalityKind::Dirichlet, InequalityKind::ZeroMean] {
        let opts = SpectralOptions {
            cells: vec![250, 500, 1000, 2000],
            ..Default::default()
        };
        let c = discrete_constant(kind, &one, &one, &unit, &opts).map_err(|e| e.to_string())?;
        let err: Vec<f64> = c
            .trace
            .iter()
            .map(|t| (t.estimate * PI - 1.0).abs())
            .collect();
        let orders: Vec<f64> = err.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let rel = *err.last().unwrap();
        ok &= rel < 1e-3 && orders.iter().all(|o| (o - 2.0).abs() < 0.2);
        notes.push(format!("{kind:?} M=2000 rel {rel:.1e} orders {orders:.2?}"));
    }
    let half = Domain1D::half_line(0.0);
    let e = WeightSpec::exp(-1.0, ExpArgument::Abs, half.clone()).unwrap();
    let opts = SpectralOptions {
        cells: vec![500, 1000, 2000, 4000],
        truncations: vec![20.0, 40.0, 80.0],
        ..Default::default()
    };
    let c = discrete_constant(InequalityKind::Dirichlet, &e, &e, &half, &opts)
        .map_err(|e| e.to_string())?;
    ok &= (c.estimate / 2.0 - 1.0).abs() < 0.02;
    notes.push(format!("exp C_P {:.5}", c.estimate));
    let (gn, gm) = gaussian_pair(0.5).unwrap();
    let c = discrete_constant(
        InequalityKind::ZeroMean,
        &gn,
        &gm,
        &gn.domain.clone(),
        &SpectralOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    ok &= (c.estimate - 1.0).abs() < 0.02;
    notes.push(format!("gaussian M_P {:.6}", c.estimate));
    check(ok, notes.join(", "))
}

fn catalog_sweep() -> Outcome {
    let mut bad = Vec::new();
    let mut holds = 0;
    for entry in catalog() {
        if entry.expected != Expectation::Holds {
            continue;
        }
        let rep = audit_entry(&entry, None).map_err(|e| e.to_string())?;
        match verdict_for(&rep, entry.kind) {
            Some(Verdict::Holds) => holds += 1,
            v => bad.push(format!("{}: {v:?}", entry.name)),
        }
    }
    let d = lookup("distance beta=1.5 unit dirichlet").unwrap();
    let est = discrete_constant(
        InequalityKind::Dirichlet,
        &d.nu,
        &d.mu,
        &d.nu.domain.clone(),
        &SpectralOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let trace: Vec<String> = est
        .trace
        .iter()
        .map(|t| format!("{:.1}", t.estimate))
        .collect();
    if !est.diverging {
        bad.push(format!(
            "distance beta=1.5 trace not diverging: {}",
            trace.join(" ")
        ));
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            format!(
                "{holds} pairs hold; distance beta=1.5 trace {}",
                trace.join(" -> ")
            )
        } else {
            bad.join("; ")
        },
    )
}

fn barenblatt_problem(cells: usize) -> PmeProblem {
    let d = Domain1D::new(-8.0, 8.0).unwrap();
    let one = WeightSpec::constant(d.clone()).unwrap();
    let mut p = problem(2.0, BoundaryKind::Dirichlet, one.clone(), one);
    p.datum = Datum::Barenblatt {
        t0: 1.0,
        m: 2.0,
        c: 1.0,
    };
    // time step tied to the mesh so both errors are first order
    p.time = TimeControls {
        dt_max: 0.5 / cells as f64,
        ..Default::default()
    };
    p
}

fn barenblatt_oracle() -> Outcome {
    // the closed form must solve the discrete problem better as the mesh refines
    let mut residuals = Vec::new();
    for cells in [200, 400, 800] {
        let g = barenblatt_problem(cells)
            .build_grid(cells, 2.0)
            .map_err(|e| e.to_string())?;
        let v: Vec<f64> = g
            .centers
            .iter()
            .map(|x| barenblatt(*x, 1.5, 2.0, 1.0))
            .collect();
        let dt = 1e-6;
        let vt: Vec<f64> = g
            .centers
            .iter()
            .map(|x| {
                (barenblatt(*x, 1.5 + dt, 2.0, 1.0) - barenblatt(*x, 1.5 - dt, 2.0, 1.0))
                    / (2.0 * dt)
            })
            .collect();
        residuals.push(
            cell_residuals(&g, 2.0, &v, &vt)
                .iter()
                .map(|r| r.abs())
                .sum::<f64>(),
        );
    }
    if residuals.windows(2).any(|w| w[1] >= w[0]) {
        return Err(format!(
            "profile residual does not decrease: {}",
            sci(&residuals)
        ));
    }
    let mut errors = Vec::new();
    for cells in [800, 1600] {
        let p = barenblatt_problem(cells);
        let tr = solve(&p, cells, &[1.0]).map_err(|e| e.to_string())?;
        let g = &tr.grid;
        let exact: Vec<f64> = g
            .centers
            .iter()
            .map(|x| barenblatt(*x, 2.0, 2.0, 1.0))
            .collect();
        let err = l1_distance(g, &tr.last().u, &exact) / mass(g, &exact);
        errors.push(err);
    }
    let ratio = errors[1] / errors[0];
    check(
        errors[0] < 0.02 && ratio <= 0.55,
        format!(
            "L1 rel error {:.2e} (M=800), {:.2e} (M=1600), ratio {ratio:.3}; profile residuals {}",
            errors[0],
            errors[1],
            sci(&residuals)
        ),
    )
}

fn random_problem(rng: &mut StdRng, bc: BoundaryKind) -> PmeProblem {
    let m = rng.gen_range(1.2..4.0);
    match rng.gen_range(0..3) {
        0 => lebesgue(m, bc),
        1 => powers(m, bc, rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.5)),
        _ => powers(m, bc, rng.gen_range(-0.8..0.0), rng.gen_range(0.0..1.0)),
    }
}

fn random_cells(rng: &mut StdRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..2.0)).collect()
}

const RUN_TIMES: [f64; 6] = [0.001, 0.005, 0.02, 0.05, 0.1, 0.3];

fn solver_suite() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut drift = 0.0f64;
    let mut grow = 0.0f64;
    let mut order = 0.0f64;
    let mut negative = 0.0f64;
    for _ in 0..50 {
        let p = random_problem(&mut rng, BoundaryKind::Neumann);
        let cells = rng.gen_range(24..80);
        let g = p.build_grid(cells, 2.0).map_err(|e| e.to_string())?;
        let u0 = random_cells(&mut rng, g.len());
        let tr = solve_ensemble(&p, &g, &[u0], &RUN_TIMES)
            .map_err(|e| e.to_string())?
            .remove(0);
        let m0 = mean(&tr.states[0].u, &g);
        for s in &tr.states {
            drift = drift.max((mean(&s.u, &g) - m0).abs() / m0.abs());
        }
        negative = negative.max(-min_value(&tr) / sup(&tr.states[0].u));
    }
    for pass in 0..2 {
        for _ in 0..50 {
            let bc = if rng.gen_bool(0.5) {
                BoundaryKind::Neumann
            } else {
                BoundaryKind::Dirichlet
            };
            let p = random_problem(&mut rng, bc);
            let cells = rng.gen_range(24..80);
            let g = p.build_grid(cells, 2.0).map_err(|e| e.to_string())?;
            let u0 = random_cells(&mut rng, g.len());
            let v0: Vec<f64> = if pass == 0 {
                random_cells(&mut rng, g.len())
            } else {
                u0.iter().map(|v| v + rng.gen_range(0.0..1.0)).collect()
            };
            let scale = sup(&u0).max(sup(&v0));
            let tr = solve_ensemble(&p, &g, &[u0, v0], &RUN_TIMES).map_err(|e| e.to_string())?;
            if pass == 0 {
                grow = grow.max(contraction_violation(&tr[0], &tr[1]) / (scale * g.total_mass()));
            } else {
                order = order.max(order_violation(&tr[0], &tr[1]) / scale);
            }
            for t in &tr {
                negative = negative.max(-min_value(t) / scale);
            }
        }
    }
    // rounding-level slack for the componentwise checks
    let tol = 1e-12;
    check(
        drift < 1e-8 && grow <= tol && order <= tol && negative <= tol,
        format!(
            "mean drift {drift:.1e}, L1 increase {grow:.1e}, order violation {order:.1e}, negativity {negative:.1e}"
        ),
    )
}

fn ar81_rate() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for m in [2.0, 3.0] {
        let base = ar81_sharp_rate(m, 200, 1.0).map_err(|e| e.to_string())?;
        let big = ar81_sharp_rate(m, 200, 10.0).map_err(|e| e.to_string())?;
        let (e1, e10) = (
            base.metrics["norm2_exponent"],
            big.metrics["norm2_exponent"],
        );
        let expected = -1.0 / (m - 1.0);
        let shift = (e10 - e1).abs() / e1.abs();
        ok &=
            base.passed && big.passed && ((e1 - expected) / expected).abs() <= 0.1 && shift < 0.05;
        notes.push(format!(
            "m={m}: exponent {e1:.4} (x10: {e10:.4}, shift {shift:.1e})"
        ));
        if !base.passed || !big.passed {
            notes.push(failed_checks(&base) + &failed_checks(&big));
        }
    }
    check(ok, notes.join(", "))
}

fn dirichlet_smoothing() -> Outcome {
    let half = Domain1D::half_line(0.0);
    let e = WeightSpec::exp(-1.0, ExpArgument::Abs, half).unwrap();
    let params = BoundParams::new(2.0, 1.0, 2.0);
    let times = logspace(1e-3, 10.0, 41);
    let mut ks = Vec::new();
    let mut slopes = Vec::new();
    for length in [20.0, 40.0] {
        for cells in [200, 400, 800] {
            let mut p = problem(2.0, BoundaryKind::Dirichlet, e.clone(), e.clone());
            p.truncation = Some(Truncation {
                length,
                far: FarPolicy::ZeroFlux,
            });
            p.datum = Datum::Log1p;
            let tr = solve(&p, cells, &times).map_err(|e| e.to_string())?;
            let rep = check_bound(&tr, BoundTag::DirichletSmoothing, &params)
                .map_err(|e| e.to_string())?;
            ks.push(rep.fitted_constant);
            let t = tr.times();
            let n2: Vec<f64> = tr
                .states
                .iter()
                .map(|s| weighted_norm(&s.u, &tr.grid, 2.0))
                .collect();
            let fit = fit_power_decay(&t, &n2, Some((1e-3, 1e-2))).map_err(|e| e.to_string())?;
            slopes.push(fit.exponent);
        }
    }
    let lo = ks.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ks.iter().cloned().fold(0.0, f64::max);
    let spread = hi / lo - 1.0;
    let min_slope = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    check(
        lo.is_finite() && hi.is_finite() && spread <= 0.2 && min_slope >= -0.5,
        format!(
            "K1 in [{lo:.4}, {hi:.4}] (spread {spread:.1e}), min short-time slope {min_slope:.3}"
        ),
    )
}

fn unbounded_counterexamples() -> Outcome {
    let d = dirichlet_unbounded(2.0, 20.0, 400).map_err(|e| e.to_string())?;
    let n = neumann_unbounded(2.0, 20.0, 400).map_err(|e| e.to_string())?;
    let detail = format!(
        "dirichlet ratio {:.4} (predicted {:.4}), neumann ratio {:.4} (predicted {:.4})",
        d.metrics["growth_ratio"],
        d.metrics["predicted_ratio"],
        n.metrics["growth_ratio"],
        n.metrics["predicted_ratio"]
    );
    if d.passed && n.passed {
        Ok(detail)
    } else {
        Err(format!(
            "{detail}; {} {}",
            failed_checks(&d),
            failed_checks(&n)
        ))
    }
}

fn mean_convergence() -> Outcome {
    let r = run_named("mean_convergence", &Overrides::default()).map_err(|e| e.to_string())?;
    let detail = format!(
        "rates {:.3} {:.3} {:.3} at means {:.2} {:.2} {:.2}",
        r.metrics["mean1_rate"],
        r.metrics["mean2_rate"],
        r.metrics["mean4_rate"],
        r.metrics["mean1_value"],
        r.metrics["mean2_value"],
        r.metrics["mean4_value"]
    );
    if r.passed {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failed_checks(&r)))
    }
}

fn nonuniform() -> Outcome {
    let r = nonuniform_convergence(2.0, 2.0, 0.1, 400).map_err(|e| e.to_string())?;
    let c = r.metrics["C"];
    let detail = format!(
        "C = {c}, max excess {:.1e}, max in gap {:.1e}, mean {:.4}",
        r.metrics["max_excess_over_supersolution"], r.metrics["max_in_gap"], r.metrics["mean"]
    );
    if r.passed && c == 8.0 {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failed_checks(&r)))
    }
}

fn c_alpha_beta_inequality() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 11);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let alpha: f64 = rng.gen_range(0.01..0.99);
        let beta: f64 = rng.gen_range(0.0..1.0) * alpha;
        let beta = beta.max(1e-3 * alpha);
        let c = c_alpha_beta(alpha, beta).map_err(|e| e.to_string())?;
        for _ in 0..100_000 {
            let x = 10f64.powf(rng.gen_range(-6.0..6.0));
            let y = 10f64.powf(rng.gen_range(-6.0..6.0));
            let a = x.powf(-alpha) * y.powf(1.0 - alpha);
            let b = x.powf(-beta) * y.powf(1.0 - beta);
            worst = worst.max((a + b + y) / (c * (a + y)) - 1.0);
        }
    }
    let half = c_alpha_beta(0.5, 0.25).map_err(|e| e.to_string())?;
    check(
        worst <= 1e-14 && half == 1.5,
        format!("max of lhs/rhs - 1 = {worst:.2e}, c(1/2, 1/4) = {half}"),
    )
}

fn scaling_law() -> Outcome {
    let m = 2.0;
    let v = 4.0;
    let mut p = powers(m, BoundaryKind::Neumann, 0.0, 1.0);
    p.datum = Datum::Bump {
        center: 0.4,
        width: 0.3,
        height: 1.0,
    };
    let tr = solve(&p, 200, &logspace(1e-3, 1.0, 31)).map_err(|e| e.to_string())?;
    let s = scale_solution(&tr, v, 1, m).map_err(|e| e.to_string())?;
    let mut worst_norm = 0.0f64;
    for q in [1.0, 2.0, 3.0, f64::INFINITY] {
        let law = v.powf(-2.0 / (m - 1.0) - 1.0 / q);
        for (a, b) in tr.states.iter().zip(&s.states) {
            let r = weighted_norm(&b.u, &s.grid, q) / weighted_norm(&a.u, &tr.grid, q);
            worst_norm = worst_norm.max((r / law - 1.0).abs());
        }
    }
    let params = BoundParams::new(m, 1.0, 2.0);
    let tag = BoundTag::NeumannSmoothingSum;
    let before = check_bound(&tr, tag, &params)
        .map_err(|e| e.to_string())?
        .fitted_constant;
    let mut inputs = bound_inputs(&s, tag, &params).map_err(|e| e.to_string())?;
    let law = |q: f64| v.powf(-2.0 / (m - 1.0) - 1.0 / q);
    for y in inputs.lhs.iter_mut() {
        *y /= law(params.rho);
    }
    inputs.u0_norm /= law(params.q0);
    let after = fit_bound(tag, &params, &inputs)
        .map_err(|e| e.to_string())?
        .fitted_constant;
    let rel = (after / before - 1.0).abs();
    check(
        worst_norm < 1e-13 && rel < 0.01,
        format!("norm law error {worst_norm:.1e}, K2 {before:.6} vs {after:.6} after scaling"),
    )
}

struct Criterion {
    title: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            title: "hardy functional constancy",
            limit: Duration::from_secs(5),
            run: hardy_constancy,
        },
        Criterion {
            title: "discrete spectral oracles",
            limit: Duration::from_secs(30),
            run: spectral_oracles,
        },
        Criterion {
            title: "catalog sweep",
            limit: Duration::from_secs(120),
            run: catalog_sweep,
        },
        Criterion {
            title: "barenblatt oracle",
            limit: Duration::from_secs(60),
            run: barenblatt_oracle,
        },
        Criterion {
            title: "conservation, contraction, comparison",
            limit: Duration::from_secs(180),
            run: solver_suite,
        },
        Criterion {
            title: "sharp zero-mean rate",
            limit: Duration::from_secs(60),
            run: ar81_rate,
        },
        Criterion {
            title: "dirichlet smoothing form",
            limit: Duration::from_secs(120),
            run: dirichlet_smoothing,
        },
        Criterion {
            title: "unboundedness counterexamples",
            limit: Duration::from_secs(120),
            run: unbounded_counterexamples,
        },
        Criterion {
            title: "exponential mean convergence",
            limit: Duration::from_secs(60),
            run: mean_convergence,
        },
        Criterion {
            title: "non-uniform convergence",
            limit: Duration::from_secs(60),
            run: nonuniform,
        },
        Criterion {
            title: "c(alpha, beta) inequality",
            limit: Duration::from_secs(5),
            run: c_alpha_beta_inequality,
        },
        Criterion {
            title: "scaling law",
            limit: Duration::from_secs(30),
            run: scaling_law,
        },
    ];
    let mut failures = 0;
    for (k, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !pass {
            failures += 1;
        }
        let timing = if in_time {
            format!("{:.2}s", elapsed.as_secs_f64())
        } else {
            format!(
                "{:.2}s > {}s limit",
                elapsed.as_secs_f64(),
                c.limit.as_secs()
            )
        };
        println!(
            "criterion {:>2} {} {} ({timing}): {detail}",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            c.title
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
