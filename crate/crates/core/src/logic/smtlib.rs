//! Deterministic SMT-LIB2 rendering.
//!
//! The script declares two constants per store field (suffixed `_g` and
//! `_r`), one constant per free parameter, asserts the negation of the
//! formula, and ends with `(check-sat)`. Identical input yields byte
//! identical output.

use super::{Cmp, Formula, Side, Sort, StoreSchema, Term};
use std::fmt::Write;

fn smt_sort(sort: &Sort) -> String {
    match sort {
        Sort::Int => "Int".to_string(),
        Sort::Bool => "Bool".to_string(),
        Sort::Array(elem, _) => format!("(Array Int {})", smt_sort(elem)),
    }
}

/// Quote a symbol if it is not a plain SMT-LIB simple symbol.
fn smt_symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c))
        && !name.starts_with(|c: char| c.is_ascii_digit());
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn field_symbol(name: &str, side: Side) -> String {
    smt_symbol(&format!("{name}{}", side.suffix()))
}

fn smt_int(n: i64) -> String {
    if n < 0 {
        format!("(- {})", n.unsigned_abs())
    } else {
        n.to_string()
    }
}

fn smt_term(t: &Term, out: &mut String) {
    match t {
        Term::Int(n) => out.push_str(&smt_int(*n)),
        Term::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Term::Field(side, name) => out.push_str(&field_symbol(name, *side)),
        Term::Param(name, _) | Term::Var(name, _) => out.push_str(&smt_symbol(name)),
        Term::Add(a, b) => bin(out, "+", a, b),
        Term::Sub(a, b) => bin(out, "-", a, b),
        Term::Mul(c, a) => {
            out.push_str("(* ");
            out.push_str(&smt_int(*c));
            out.push(' ');
            smt_term(a, out);
            out.push(')');
        }
        Term::Select(a, i) => bin(out, "select", a, i),
        Term::Store(a, i, v) => {
            out.push_str("(store ");
            smt_term(a, out);
            out.push(' ');
            smt_term(i, out);
            out.push(' ');
            smt_term(v, out);
            out.push(')');
        }
        Term::Ite(c, a, b) => {
            out.push_str("(ite ");
            smt_formula(c, out);
            out.push(' ');
            smt_term(a, out);
            out.push(' ');
            smt_term(b, out);
            out.push(')');
        }
    }
}

fn bin(out: &mut String, op: &str, a: &Term, b: &Term) {
    out.push('(');
    out.push_str(op);
    out.push(' ');
    smt_term(a, out);
    out.push(' ');
    smt_term(b, out);
    out.push(')');
}

fn smt_formula(f: &Formula, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Cmp(op, a, b) => {
            let sym = match op {
                Cmp::Eq => "=",
                Cmp::Le => "<=",
                Cmp::Ge => ">=",
                Cmp::Lt => "<",
                Cmp::Gt => ">",
            };
            bin(out, sym, a, b);
        }
        Formula::Not(a) => {
            out.push_str("(not ");
            smt_formula(a, out);
            out.push(')');
        }
        Formula::And(a, b) => binf(out, "and", a, b),
        Formula::Or(a, b) => binf(out, "or", a, b),
        Formula::Implies(a, b) => binf(out, "=>", a, b),
        Formula::Forall(name, sort, body) => {
            let _ = write!(out, "(forall (({} {})) ", smt_symbol(name), smt_sort(sort));
            smt_formula(body, out);
            out.push(')');
        }
    }
}

fn binf(out: &mut String, op: &str, a: &Formula, b: &Formula) {
    out.push('(');
    out.push_str(op);
    out.push(' ');
    smt_formula(a, out);
    out.push(' ');
    smt_formula(b, out);
    out.push(')');
}

/// Render just the formula (no declarations) as an SMT-LIB expression.
pub fn formula_sexpr(f: &Formula) -> String {
    let mut out = String::new();
    smt_formula(f, &mut out);
    out
}

/// Declarations needed by `f`: every store field twice, then free params in
/// first-occurrence order. Returns (declaration lines, declared names in
/// order) where names are the raw SMT symbols.
pub fn declarations(schema: &StoreSchema, f: &Formula) -> (Vec<String>, Vec<(String, Sort)>) {
    let mut lines = Vec::new();
    let mut names = Vec::new();
    for (name, sort) in schema.fields() {
        for side in [Side::Global, Side::Replica] {
            let sym = field_symbol(name, side);
            lines.push(format!("(declare-const {} {})", sym, smt_sort(sort)));
            names.push((sym, sort.clone()));
        }
    }
    for (name, sort) in f.free_params() {
        let sym = smt_symbol(&name);
        lines.push(format!("(declare-const {} {})", sym, smt_sort(&sort)));
        names.push((sym, sort));
    }
    (lines, names)
}

/// Just the declared symbols, in declaration order.
pub fn declarations_for(schema: &StoreSchema, f: &Formula) -> Vec<(String, Sort)> {
    declarations(schema, f).1
}

/// The full validity script for `f`: unsat means the formula is valid.
pub fn to_smtlib(schema: &StoreSchema, f: &Formula) -> String {
    let mut out = String::new();
    out.push_str("(set-logic AUFLIA)\n");
    let (decls, _) = declarations(schema, f);
    for d in decls {
        out.push_str(&d);
        out.push('\n');
    }
    out.push_str("(assert (not ");
    smt_formula(f, &mut out);
    out.push_str("))\n(check-sat)\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::StoreSchema;

    fn counter() -> StoreSchema {
        StoreSchema::new(vec![("val".into(), Sort::Int)]).unwrap()
    }

    #[test]
    fn script_shape_for_top() {
        let s = to_smtlib(&counter(), &Formula::True);
        assert_eq!(
            s,
            "(set-logic AUFLIA)\n(declare-const val_g Int)\n(declare-const val_r Int)\n(assert (not true))\n(check-sat)\n"
        );
    }

    #[test]
    fn deterministic_output() {
        let f = Formula::ge(
            Term::field(Side::Global, "val"),
            Term::add(
                Term::field(Side::Replica, "val"),
                Term::param("n", Sort::Int),
            ),
        );
        assert_eq!(to_smtlib(&counter(), &f), to_smtlib(&counter(), &f));
        assert!(to_smtlib(&counter(), &f).contains("(declare-const n Int)"));
    }

    #[test]
    fn negative_literals_use_unary_minus() {
        let f = Formula::eq(Term::int(-5), Term::int(-5));
        assert!(to_smtlib(&counter(), &f).contains("(= (- 5) (- 5))"));
    }

    #[test]
    fn dotted_and_odd_params_are_legal_symbols() {
        // '.' and '?' are legal in SMT-LIB simple symbols; primes are not.
        let f = Formula::ge(Term::param("x.val", Sort::Int), Term::param("n'", Sort::Int));
        let s = to_smtlib(&counter(), &f);
        assert!(s.contains("(declare-const x.val Int)"), "{s}");
        assert!(s.contains("(declare-const |n'| Int)"), "{s}");
    }
}
