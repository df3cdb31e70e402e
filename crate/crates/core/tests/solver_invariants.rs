mod common;

use common::*;
use proptest::prelude::*;
use wpme::diagnostics::{energy, weighted_norm};
use wpme::solver::{solve, solve_ensemble, BoundaryKind, Datum, PmeProblem};

const CELLS: usize = 32;
const TIMES: [f64; 3] = [0.01, 0.05, 0.2];

fn pick(kind: usize, m: f64, bc: BoundaryKind) -> PmeProblem {
    match kind {
        0 => lebesgue(m, bc),
        1 => powers(m, bc, 0.5, 1.0),
        _ => powers(m, bc, -0.5, 0.5),
    }
}

fn bc_of(neumann: bool) -> BoundaryKind {
    if neumann {
        BoundaryKind::Neumann
    } else {
        BoundaryKind::Dirichlet
    }
}

fn cells() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..2.0, CELLS)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn neumann_mass_is_conserved(kind in 0usize..3, m in 1.2f64..4.0, u0 in cells()) {
        let p = pick(kind, m, BoundaryKind::Neumann);
        let g = p.build_grid(CELLS, p.grid.gamma).unwrap();
        let tr = solve_ensemble(&p, &g, &[u0], &TIMES).unwrap().remove(0);
        prop_assert!(conservation_defect(&tr, p.time.newton_tol) <= 10.0);
    }

    #[test]
    fn ordered_data_stay_ordered(
        kind in 0usize..3,
        m in 1.2f64..4.0,
        neumann in any::<bool>(),
        u0 in cells(),
        gap in cells(),
    ) {
        let p = pick(kind, m, bc_of(neumann));
        let g = p.build_grid(CELLS, p.grid.gamma).unwrap();
        let v0: Vec<f64> = u0.iter().zip(&gap).map(|(a, b)| a + b).collect();
        let tr = solve_ensemble(&p, &g, &[u0, v0], &TIMES).unwrap();
        let tol = 1e-9 * sup(&tr[1].states[0].u);
        prop_assert!(order_violation(&tr[0], &tr[1]) <= tol);
    }

    #[test]
    fn l1_distance_contracts(
        kind in 0usize..3,
        m in 1.2f64..4.0,
        neumann in any::<bool>(),
        u0 in cells(),
        v0 in cells(),
    ) {
        let p = pick(kind, m, bc_of(neumann));
        let g = p.build_grid(CELLS, p.grid.gamma).unwrap();
        let tr = solve_ensemble(&p, &g, &[u0, v0], &TIMES).unwrap();
        let tol = 1e-9 * g.total_mass() * sup(&tr[0].states[0].u).max(sup(&tr[1].states[0].u));
        prop_assert!(contraction_violation(&tr[0], &tr[1]) <= tol);
    }

    #[test]
    fn nonnegative_data_stay_nonnegative(
        kind in 0usize..3,
        m in 1.2f64..4.0,
        neumann in any::<bool>(),
        u0 in cells(),
    ) {
        let p = pick(kind, m, bc_of(neumann));
        let g = p.build_grid(CELLS, p.grid.gamma).unwrap();
        let tr = solve_ensemble(&p, &g, &[u0], &TIMES).unwrap().remove(0);
        prop_assert!(min_value(&tr) >= -1e-9 * sup(&tr.states[0].u));
    }

    #[test]
    fn norms_do_not_grow(
        kind in 0usize..3,
        m in 1.2f64..4.0,
        neumann in any::<bool>(),
        u0 in cells(),
    ) {
        let p = pick(kind, m, bc_of(neumann));
        let g = p.build_grid(CELLS, p.grid.gamma).unwrap();
        let tr = solve_ensemble(&p, &g, &[u0], &TIMES).unwrap().remove(0);
        for q in [1.0, 2.0, m + 1.0, f64::INFINITY] {
            let n: Vec<f64> = tr.states.iter().map(|s| weighted_norm(&s.u, &g, q)).collect();
            for w in n.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-9), "q = {}: {:?}", q, n);
            }
        }
    }

    #[test]
    fn energy_does_not_grow(kind in 0usize..3, m in 1.2f64..4.0, neumann in any::<bool>(), amp in 0.0f64..0.9) {
        let mut p = pick(kind, m, bc_of(neumann));
        p.datum = Datum::Cospi { offset: 1.0, amplitude: amp };
        p.regularization.epsilon = Some(0.0);
        let times: Vec<f64> = (1..=20).map(|k| 0.01 * k as f64).collect();
        let tr = solve(&p, CELLS, &times).unwrap();
        let e: Vec<f64> = tr.states.iter().map(|s| energy(&s.u, &tr.grid, m)).collect();
        for w in e.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-8) + 1e-12, "{:?}", e);
        }
    }
}

#[test]
fn constant_neumann_datum_is_steady() {
    let mut p = powers(3.0, BoundaryKind::Neumann, 0.5, 1.0);
    p.datum = Datum::Constant { value: 0.25 };
    let tr = solve(&p, CELLS, &TIMES).unwrap();
    assert!(tr.states.iter().all(|s| s.u.iter().all(|v| *v == 0.25)));
}
