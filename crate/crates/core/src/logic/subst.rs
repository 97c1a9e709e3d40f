//! Capture-avoiding substitution of free parameters by terms.

use super::{Formula, Sort, SortError, StoreSchema, Term};
use std::collections::BTreeMap;

/// Replace every free occurrence of the bound parameter names in `bindings`.
///
/// Bindings are checked against the parameter sorts they replace. A binder
/// whose name would capture a variable of a replacement term is renamed.
pub fn substitute(
    schema: &StoreSchema,
    f: &Formula,
    bindings: &BTreeMap<String, Term>,
) -> Result<Formula, SortError> {
    // Sort-check each replacement against the parameter occurrences it hits.
    for (name, sort) in f.free_params() {
        if let Some(repl) = bindings.get(&name) {
            let found = repl.sort(schema)?;
            if found != sort {
                return Err(SortError::ParamMismatch {
                    name,
                    expected: sort,
                    found,
                });
            }
        }
    }
    // Names a renamed binder must avoid: anything used in the formula or in
    // any replacement term.
    let mut avoid = f.used_names();
    for t in bindings.values() {
        let tf = Formula::eq(t.clone(), t.clone());
        avoid.extend(tf.used_names());
    }
    Ok(subst_formula(f, bindings, &mut avoid))
}

/// Term-level parameter substitution with the same sort checking.
pub fn substitute_term(
    schema: &StoreSchema,
    t: &Term,
    bindings: &BTreeMap<String, Term>,
) -> Result<Term, SortError> {
    // Reuse the formula path so checks and capture handling stay in one place.
    let wrapped = Formula::eq(t.clone(), t.clone());
    match substitute(schema, &wrapped, bindings)? {
        Formula::Cmp(_, out, _) => Ok(out),
        _ => unreachable!("substitution preserves the comparison shape"),
    }
}

fn fresh_name(base: &str, avoid: &mut std::collections::BTreeSet<String>) -> String {
    let mut candidate = format!("{base}'");
    while avoid.contains(&candidate) {
        candidate.push('\'');
    }
    avoid.insert(candidate.clone());
    candidate
}

fn subst_formula(
    f: &Formula,
    bindings: &BTreeMap<String, Term>,
    avoid: &mut std::collections::BTreeSet<String>,
) -> Formula {
    match f {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Cmp(op, a, b) => Formula::Cmp(
            *op,
            subst_term(a, bindings, avoid),
            subst_term(b, bindings, avoid),
        ),
        Formula::Not(a) => Formula::not(subst_formula(a, bindings, avoid)),
        Formula::And(a, b) => Formula::and(
            subst_formula(a, bindings, avoid),
            subst_formula(b, bindings, avoid),
        ),
        Formula::Or(a, b) => Formula::or(
            subst_formula(a, bindings, avoid),
            subst_formula(b, bindings, avoid),
        ),
        Formula::Implies(a, b) => Formula::implies(
            subst_formula(a, bindings, avoid),
            subst_formula(b, bindings, avoid),
        ),
        Formula::Forall(name, sort, body) => {
            // Replacement terms may mention `name` as a free Param or Var;
            // rename the binder before descending if so.
            let clash = bindings
                .values()
                .any(|t| Formula::eq(t.clone(), t.clone()).used_names().contains(name));
            if clash {
                let fresh = fresh_name(name, avoid);
                let renamed = rename_var(body, name, &fresh, sort);
                Formula::forall(fresh, sort.clone(), subst_formula(&renamed, bindings, avoid))
            } else {
                Formula::forall(
                    name.clone(),
                    sort.clone(),
                    subst_formula(body, bindings, avoid),
                )
            }
        }
    }
}

fn subst_term(
    t: &Term,
    bindings: &BTreeMap<String, Term>,
    avoid: &mut std::collections::BTreeSet<String>,
) -> Term {
    match t {
        Term::Param(name, _) => match bindings.get(name) {
            Some(repl) => repl.clone(),
            None => t.clone(),
        },
        Term::Int(_) | Term::Bool(_) | Term::Field(..) | Term::Var(..) => t.clone(),
        Term::Add(a, b) => Term::add(subst_term(a, bindings, avoid), subst_term(b, bindings, avoid)),
        Term::Sub(a, b) => Term::sub(subst_term(a, bindings, avoid), subst_term(b, bindings, avoid)),
        Term::Mul(c, a) => Term::mul(*c, subst_term(a, bindings, avoid)),
        Term::Select(a, i) => Term::select(
            subst_term(a, bindings, avoid),
            subst_term(i, bindings, avoid),
        ),
        Term::Store(a, i, v) => Term::store(
            subst_term(a, bindings, avoid),
            subst_term(i, bindings, avoid),
            subst_term(v, bindings, avoid),
        ),
        Term::Ite(c, a, b) => Term::ite(
            subst_formula(c, bindings, avoid),
            subst_term(a, bindings, avoid),
            subst_term(b, bindings, avoid),
        ),
    }
}

/// Rename a bound variable (and shadowing-respecting occurrences) in `body`.
fn rename_var(body: &Formula, from: &str, to: &str, sort: &Sort) -> Formula {
    match body {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Cmp(op, a, b) => Formula::Cmp(
            *op,
            rename_var_term(a, from, to, sort),
            rename_var_term(b, from, to, sort),
        ),
        Formula::Not(a) => Formula::not(rename_var(a, from, to, sort)),
        Formula::And(a, b) => {
            Formula::and(rename_var(a, from, to, sort), rename_var(b, from, to, sort))
        }
        Formula::Or(a, b) => {
            Formula::or(rename_var(a, from, to, sort), rename_var(b, from, to, sort))
        }
        Formula::Implies(a, b) => Formula::implies(
            rename_var(a, from, to, sort),
            rename_var(b, from, to, sort),
        ),
        Formula::Forall(n, s, inner) => {
            if n == from {
                // Inner binder shadows; stop renaming below it.
                Formula::Forall(n.clone(), s.clone(), inner.clone())
            } else {
                Formula::forall(n.clone(), s.clone(), rename_var(inner, from, to, sort))
            }
        }
    }
}

fn rename_var_term(t: &Term, from: &str, to: &str, sort: &Sort) -> Term {
    match t {
        Term::Var(name, s) if name == from && s == sort => Term::var(to, s.clone()),
        Term::Int(_) | Term::Bool(_) | Term::Field(..) | Term::Param(..) | Term::Var(..) => {
            t.clone()
        }
        Term::Add(a, b) => Term::add(
            rename_var_term(a, from, to, sort),
            rename_var_term(b, from, to, sort),
        ),
        Term::Sub(a, b) => Term::sub(
            rename_var_term(a, from, to, sort),
            rename_var_term(b, from, to, sort),
        ),
        Term::Mul(c, a) => Term::mul(*c, rename_var_term(a, from, to, sort)),
        Term::Select(a, i) => Term::select(
            rename_var_term(a, from, to, sort),
            rename_var_term(i, from, to, sort),
        ),
        Term::Store(a, i, v) => Term::store(
            rename_var_term(a, from, to, sort),
            rename_var_term(i, from, to, sort),
            rename_var_term(v, from, to, sort),
        ),
        Term::Ite(c, a, b) => Term::ite(
            rename_var(c, from, to, sort),
            rename_var_term(a, from, to, sort),
            rename_var_term(b, from, to, sort),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Side;

    fn schema() -> StoreSchema {
        StoreSchema::new(vec![("val".into(), Sort::Int)]).unwrap()
    }

    #[test]
    fn empty_substitution_is_identity() {
        let f = Formula::ge(
            Term::field(Side::Global, "val"),
            Term::field(Side::Replica, "val"),
        );
        let out = substitute(&schema(), &f, &BTreeMap::new()).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn literal_replacement() {
        let f = Formula::le(
            Term::field(Side::Replica, "val"),
            Term::param("n", Sort::Int),
        );
        let mut b = BTreeMap::new();
        b.insert("n".to_string(), Term::int(5));
        let out = substitute(&schema(), &f, &b).unwrap();
        assert_eq!(out.to_string(), "r.val <= 5");
    }

    #[test]
    fn sort_mismatch_names_parameter() {
        let f = Formula::le(Term::param("n", Sort::Int), Term::int(0));
        let mut b = BTreeMap::new();
        b.insert("n".to_string(), Term::boolean(true));
        let err = substitute(&schema(), &f, &b).unwrap_err();
        match err {
            SortError::ParamMismatch { name, .. } => assert_eq!(name, "n"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn binder_renamed_to_avoid_capture() {
        // forall n. m <= n, substituting m := n + 1 must not capture.
        let f = Formula::forall(
            "n",
            Sort::Int,
            Formula::le(Term::param("m", Sort::Int), Term::var("n", Sort::Int)),
        );
        let mut b = BTreeMap::new();
        b.insert(
            "m".to_string(),
            Term::add(Term::param("n", Sort::Int), Term::int(1)),
        );
        let out = substitute(&schema(), &f, &b).unwrap();
        assert_eq!(out.to_string(), "forall n': int. n + 1 <= n'");
    }
}
