use std::path::Path;

use num_traits::Zero;
use proptest::prelude::*;

use optcert_core::lp::{solve_lp, LinearProgram, LpResult};
use optcert_core::num::{dot, int, RVec, Rational};
use optcert_core::problem::parse_problem;
use optcert_core::report::{parse_mode, run_check, CheckKind};

#[test]
fn corpus_files_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|x| x != "json") {
            continue;
        }
        let first = parse_problem(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let text = first.to_json();
        let second = parse_problem(&text).unwrap();
        assert_eq!(first.program, second.program, "{}", path.display());
        assert_eq!(first.point, second.point);
        assert_eq!(first.setvalued, second.setvalued);
        assert_eq!(first.ekeland, second.ekeland);
        assert_eq!(text, second.to_json(), "canonical form is a fixpoint");
        for exp in &first.expect {
            let kind = CheckKind::parse(&exp.check).unwrap();
            let mode = exp.mode.as_deref().map(|m| parse_mode(m).unwrap());
            let render = |f| run_check(f, kind, mode).map(|r| r.to_json().to_string()).map_err(|e| e.to_string());
            assert_eq!(render(&first), render(&second), "{} {}", path.display(), exp.check);
        }
        seen += 1;
    }
    assert!(seen > 0);
}

fn small_int() -> impl Strategy<Value = i64> {
    -4i64..=4
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// `max <c, x>` over `A x <= b, 0 <= x <= 5`: the optimum dominates every
    /// lattice point of the box that is feasible.
    #[test]
    fn lp_optimum_dominates_feasible_lattice(
        a in prop::collection::vec(prop::collection::vec(small_int(), 2), 1..4),
        b in prop::collection::vec(0i64..=8, 4),
        c in prop::collection::vec(small_int(), 2),
    ) {
        let mut lp = LinearProgram::new(2);
        lp.all_nonneg();
        for (row, rhs) in a.iter().zip(&b) {
            lp.add_le(row.iter().map(|&v| int(v)).collect(), int(*rhs));
        }
        for k in 0..2 {
            let mut e = vec![Rational::zero(); 2];
            e[k] = int(1);
            lp.add_le(e, int(5));
        }
        let cv: RVec = c.iter().map(|&v| int(v)).collect();
        lp.maximize(cv.clone());
        let LpResult::Optimal { solution, value } = solve_lp(&lp).unwrap() else {
            panic!("origin is feasible and the box is bounded");
        };
        prop_assert!(lp.is_feasible(&solution));
        prop_assert_eq!(dot(&cv, &solution), value.clone());
        for x in 0..=5 {
            for y in 0..=5 {
                let p = vec![int(x), int(y)];
                if lp.is_feasible(&p) {
                    prop_assert!(dot(&cv, &p) <= value);
                }
            }
        }
    }

    /// Infeasible systems come with a verifiable Farkas certificate.
    #[test]
    fn infeasible_lp_has_certificate(
        a in prop::collection::vec(small_int(), 2),
        gap in 1i64..=5,
    ) {
        prop_assume!(a.iter().any(|&v| v != 0));
        let row: RVec = a.iter().map(|&v| int(v)).collect();
        let mut lp = LinearProgram::new(2);
        lp.add_le(row.clone(), int(0));
        lp.add_ge(row, int(gap));
        match solve_lp(&lp).unwrap() {
            LpResult::Infeasible { farkas } => prop_assert!(lp.verify_farkas(&farkas)),
            other => prop_assert!(false, "expected infeasible, got {:?}", other),
        }
    }
}
