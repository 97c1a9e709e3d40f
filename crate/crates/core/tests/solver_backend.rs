//! End-to-end checks of the external solver backend.
//!
//! These tests need an SMT solver; discovery follows CARDKIT_SOLVER, then
//! `z3` on PATH, then the bundled WASM wrapper (see README).

use cardkit::logic::{
    check_valid, Backend, Formula, Side, SolverCmd, SolverPool, Sort, StoreSchema, Term, Validity,
};

fn counter() -> StoreSchema {
    StoreSchema::new(vec![("val".into(), Sort::Int)]).unwrap()
}

fn pool() -> SolverPool {
    let root = std::path::PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."));
    let cmd = SolverCmd::discover(&[root]).expect(
        "no SMT solver found: set CARDKIT_SOLVER or run `npm install` in tools/z3-wasm",
    );
    SolverPool::new(cmd, 1)
}

#[test]
fn solver_round_trip() {
    let pool = pool();
    let backend = Backend::Solver(&pool);
    let schema = counter();

    assert_eq!(check_valid(&schema, &Formula::True, &backend), Validity::Valid);

    // LE is not valid on its own; the negation is satisfiable.
    let le = Formula::ge(
        Term::field(Side::Global, "val"),
        Term::field(Side::Replica, "val"),
    );
    match check_valid(&schema, &le, &backend) {
        Validity::Invalid(w) => {
            let g = w.get("val_g").and_then(|v| v.as_int()).unwrap();
            let r = w.get("val_r").and_then(|v| v.as_int()).unwrap();
            assert!(g < r, "witness must falsify LE: {w}");
        }
        other => panic!("expected Invalid, got {other:?}"),
    }

    // Quantified immediate-accord shape for Add against LE: valid.
    let ia = Formula::forall(
        "n",
        Sort::Int,
        Formula::implies(
            Formula::and(
                Formula::ge(Term::var("n", Sort::Int), Term::int(0)),
                le.clone(),
            ),
            Formula::ge(
                Term::add(Term::field(Side::Global, "val"), Term::var("n", Sort::Int)),
                Term::field(Side::Replica, "val"),
            ),
        ),
    );
    assert_eq!(check_valid(&schema, &ia, &backend), Validity::Valid);

    // Several queries through the same process, exercising (reset).
    for k in 0..5 {
        let f = Formula::implies(
            Formula::gt(Term::field(Side::Global, "val"), Term::int(k)),
            Formula::gt(Term::field(Side::Global, "val"), Term::int(k - 1)),
        );
        assert_eq!(check_valid(&schema, &f, &backend), Validity::Valid);
    }
}
