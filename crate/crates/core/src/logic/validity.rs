//! Validity checking behind two independent backends.

use super::enumerate::{enumerate_validity, EnumOutcome};
use super::{declarations_for, to_smtlib, EnumDomain, Formula, SolverPool, SolverVerdict, StoreSchema, Value};
use std::fmt;

/// A falsifying assignment: free store fields (as `field_g` / `field_r`),
/// free parameters, and any quantifier instantiations hit on the way down.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Witness {
    pub assignment: Vec<(String, Value)>,
}

impl Witness {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.assignment
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.assignment.is_empty() {
            return write!(f, "(no model available)");
        }
        for (i, (name, value)) in self.assignment.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}={value}")?;
        }
        Ok(())
    }
}

/// Outcome of a validity query. `Unknown` is conservative: downstream
/// consumers must treat it as "possibly conflicting".
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid(Witness),
    Unknown(String),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
    pub fn is_invalid(&self) -> bool {
        matches!(self, Validity::Invalid(_))
    }
}

/// Which decision procedure answers a query.
pub enum Backend<'a> {
    Solver(&'a SolverPool),
    Enumeration(EnumDomain),
}

/// Decide validity of a closed formula.
///
/// Solver backend: SMT on the negation (unsat means valid); any process
/// failure or timeout yields `Unknown`, never `Valid`. Enumeration backend:
/// exhaustive evaluation over the configured finite domain; `Invalid`
/// carries the falsifying assignment found first in spiral order.
pub fn check_valid(schema: &StoreSchema, f: &Formula, backend: &Backend) -> Validity {
    if let Err(e) = f.well_sorted(schema) {
        return Validity::Unknown(format!("ill-sorted formula: {e}"));
    }
    match backend {
        Backend::Solver(pool) => {
            let script = to_smtlib(schema, f);
            let syms = declarations_for(schema, f);
            match pool.check(&script, &syms) {
                Ok(SolverVerdict::Unsat) => Validity::Valid,
                Ok(SolverVerdict::Sat(model)) => Validity::Invalid(Witness {
                    assignment: model.unwrap_or_default(),
                }),
                Ok(SolverVerdict::Unknown(reason)) => Validity::Unknown(reason),
                Err(e) => Validity::Unknown(e.to_string()),
            }
        }
        Backend::Enumeration(dom) => match enumerate_validity(schema, f, dom) {
            Ok(EnumOutcome::Valid) => Validity::Valid,
            Ok(EnumOutcome::Invalid(assignment)) => Validity::Invalid(Witness { assignment }),
            Ok(EnumOutcome::TooLarge(n)) => {
                Validity::Unknown(format!("enumeration domain too large ({n} cases)"))
            }
            Ok(EnumOutcome::Error(e)) => Validity::Unknown(format!("evaluation error: {e}")),
            Err(e) => Validity::Unknown(format!("ill-sorted formula: {e}")),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{Side, Sort, Term};

    fn counter() -> StoreSchema {
        StoreSchema::new(vec![("val".into(), Sort::Int)]).unwrap()
    }

    fn enum_backend() -> Backend<'static> {
        Backend::Enumeration(EnumDomain::default())
    }

    #[test]
    fn top_is_valid() {
        assert_eq!(
            check_valid(&counter(), &Formula::True, &enum_backend()),
            Validity::Valid
        );
    }

    #[test]
    fn withdraw_vc_is_valid_by_enumeration() {
        // (n >= 0) && (x <= s) && (x >= n) && (s' = s - n)
        //   => (s >= 0 => s' >= 0) && (a = s - s')   with a := n
        let s = Term::field(Side::Global, "val");
        let s2 = Term::field(Side::Replica, "val");
        let n = Term::param("n", Sort::Int);
        let x = Term::param("x", Sort::Int);
        let ante = Formula::and_all([
            Formula::ge(n.clone(), Term::int(0)),
            Formula::le(x.clone(), s.clone()),
            Formula::ge(x.clone(), n.clone()),
            Formula::eq(s2.clone(), Term::sub(s.clone(), n.clone())),
        ]);
        let conseq = Formula::and(
            Formula::implies(
                Formula::ge(s.clone(), Term::int(0)),
                Formula::ge(s2.clone(), Term::int(0)),
            ),
            Formula::eq(n.clone(), Term::sub(s, s2)),
        );
        let vc = Formula::implies(ante, conseq);
        assert_eq!(check_valid(&counter(), &vc, &enum_backend()), Validity::Valid);
    }

    #[test]
    fn drifting_le_is_invalid_with_small_witness() {
        // forall n >= 0. (s_g >= s_r => s_g - n >= s_r) is falsified.
        let f = Formula::forall(
            "n",
            Sort::Int,
            Formula::implies(
                Formula::and(
                    Formula::ge(Term::var("n", Sort::Int), Term::int(0)),
                    Formula::ge(
                        Term::field(Side::Global, "val"),
                        Term::field(Side::Replica, "val"),
                    ),
                ),
                Formula::ge(
                    Term::sub(
                        Term::field(Side::Global, "val"),
                        Term::var("n", Sort::Int),
                    ),
                    Term::field(Side::Replica, "val"),
                ),
            ),
        );
        match check_valid(&counter(), &f, &enum_backend()) {
            Validity::Invalid(w) => {
                assert_eq!(w.get("val_g"), Some(&Value::Int(0)));
                assert_eq!(w.get("val_r"), Some(&Value::Int(0)));
                assert_eq!(w.get("n"), Some(&Value::Int(1)));
            }
            other => panic!("expected Invalid, got {other:?}"),
        }
    }
}
