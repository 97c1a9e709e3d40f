//! Typed symbolic formulas over a pair of store states.
//!
//! Guards, weakest consistency preconditions, and verification conditions are
//! all [`Formula`]s whose atoms are comparisons of [`Term`]s. A term may read
//! a store field on either the global side or the replica side, reference a
//! free parameter, or reference a universally bound variable. The language is
//! linear integer arithmetic plus booleans and int arrays with select/store,
//! which keeps it closed under effect substitution.

mod enumerate;
mod eval;
mod smtlib;
mod solver;
mod subst;
mod validity;

pub use enumerate::EnumDomain;
pub use eval::{EvalError, Valuation};
pub use smtlib::{declarations_for, formula_sexpr, to_smtlib};
pub use solver::{SolverCmd, SolverError, SolverPool, SolverProc, SolverVerdict};
pub use subst::{substitute, substitute_term};
pub use validity::{check_valid, Backend, Validity, Witness};

use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Value sorts. Array indices are always integers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sort {
    Int,
    Bool,
    /// Fixed-length integer-indexed array. The length is used on the
    /// concrete side; the SMT side treats arrays as unbounded.
    Array(Box<Sort>, usize),
}

impl Sort {
    pub fn array_of_int(len: usize) -> Sort {
        Sort::Array(Box::new(Sort::Int), len)
    }

    /// Nesting depth: Int/Bool are 0, arrays add one per level.
    pub fn depth(&self) -> usize {
        match self {
            Sort::Int | Sort::Bool => 0,
            Sort::Array(elem, _) => 1 + elem.depth(),
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => write!(f, "int"),
            Sort::Bool => write!(f, "bool"),
            Sort::Array(elem, len) => write!(f, "array[{elem};{len}]"),
        }
    }
}

/// A concrete value: integer, boolean, or fixed-length integer array.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Arr(Vec<i64>),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Int(_) => Sort::Int,
            Value::Bool(_) => Sort::Bool,
            Value::Arr(v) => Sort::array_of_int(v.len()),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Arr(v) => {
                write!(f, "[")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// The store schema: an ordered list of named, sorted fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreSchema {
    fields: Vec<(String, Sort)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("schema has no fields")]
    Empty,
    #[error("duplicate field `{0}`")]
    DuplicateField(String),
    #[error("field `{0}`: array sorts deeper than 2 are not supported")]
    TooDeep(String),
    #[error("field `{0}`: only integer arrays are supported as store fields")]
    NonIntArray(String),
}

impl StoreSchema {
    pub fn new(fields: Vec<(String, Sort)>) -> Result<StoreSchema, SchemaError> {
        if fields.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut seen = std::collections::BTreeSet::new();
        for (name, sort) in &fields {
            if !seen.insert(name.clone()) {
                return Err(SchemaError::DuplicateField(name.clone()));
            }
            if sort.depth() > 2 {
                return Err(SchemaError::TooDeep(name.clone()));
            }
            if let Sort::Array(elem, _) = sort {
                if **elem != Sort::Int {
                    return Err(SchemaError::NonIntArray(name.clone()));
                }
            }
        }
        Ok(StoreSchema { fields })
    }

    pub fn fields(&self) -> &[(String, Sort)] {
        &self.fields
    }

    pub fn sort_of(&self, field: &str) -> Option<&Sort> {
        self.fields.iter().find(|(n, _)| n == field).map(|(_, s)| s)
    }

    pub fn has_field(&self, field: &str) -> bool {
        self.sort_of(field).is_some()
    }

    /// The single field of a one-field schema, if there is exactly one.
    pub fn sole_field(&self) -> Option<&str> {
        if self.fields.len() == 1 {
            Some(&self.fields[0].0)
        } else {
            None
        }
    }
}

/// Which of the two store states a field access reads.
///
/// Guards read `Global` as s_g and `Replica` as s_r. Event specifications
/// reuse the same pair with `Global` as the pre-store s and `Replica` as the
/// post-store s'.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Global,
    Replica,
}

impl Side {
    pub fn suffix(self) -> &'static str {
        match self {
            Side::Global => "_g",
            Side::Replica => "_r",
        }
    }
}

/// First-order terms. Multiplication is constant-by-term only, which keeps
/// every formula inside linear arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Int(i64),
    Bool(bool),
    /// Store-field access on one side of the state pair.
    Field(Side, String),
    /// Free parameter (effect parameters, operation arguments, the return
    /// symbol `a`, flattened query-binder fields).
    Param(String, Sort),
    /// Universally bound variable; bound by an enclosing [`Formula::Forall`].
    Var(String, Sort),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(i64, Box<Term>),
    Select(Box<Term>, Box<Term>),
    Store(Box<Term>, Box<Term>, Box<Term>),
    Ite(Box<Formula>, Box<Term>, Box<Term>),
}

impl Term {
    pub fn int(n: i64) -> Term {
        Term::Int(n)
    }
    pub fn boolean(b: bool) -> Term {
        Term::Bool(b)
    }
    pub fn field(side: Side, name: impl Into<String>) -> Term {
        Term::Field(side, name.into())
    }
    pub fn param(name: impl Into<String>, sort: Sort) -> Term {
        Term::Param(name.into(), sort)
    }
    pub fn var(name: impl Into<String>, sort: Sort) -> Term {
        Term::Var(name.into(), sort)
    }
    pub fn add(a: Term, b: Term) -> Term {
        Term::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: Term, b: Term) -> Term {
        Term::Sub(Box::new(a), Box::new(b))
    }
    pub fn mul(c: i64, t: Term) -> Term {
        Term::Mul(c, Box::new(t))
    }
    pub fn select(a: Term, i: Term) -> Term {
        Term::Select(Box::new(a), Box::new(i))
    }
    pub fn store(a: Term, i: Term, v: Term) -> Term {
        Term::Store(Box::new(a), Box::new(i), Box::new(v))
    }
    pub fn ite(c: Formula, a: Term, b: Term) -> Term {
        Term::Ite(Box::new(c), Box::new(a), Box::new(b))
    }

    pub fn from_value(v: &Value) -> Option<Term> {
        match v {
            Value::Int(n) => Some(Term::Int(*n)),
            Value::Bool(b) => Some(Term::Bool(*b)),
            Value::Arr(_) => None,
        }
    }
}

/// Comparison operators over terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cmp {
    Eq,
    Le,
    Ge,
    Lt,
    Gt,
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "==",
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Lt => "<",
            Cmp::Gt => ">",
        }
    }
}

/// Quantified boolean formulas over [`Term`]s. Quantifiers bind only
/// parameter-like variables ([`Term::Var`]), never store fields.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Cmp(Cmp, Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(String, Sort, Box<Formula>),
}

impl Formula {
    pub fn cmp(op: Cmp, a: Term, b: Term) -> Formula {
        Formula::Cmp(op, a, b)
    }
    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Cmp(Cmp::Eq, a, b)
    }
    pub fn le(a: Term, b: Term) -> Formula {
        Formula::Cmp(Cmp::Le, a, b)
    }
    pub fn ge(a: Term, b: Term) -> Formula {
        Formula::Cmp(Cmp::Ge, a, b)
    }
    pub fn lt(a: Term, b: Term) -> Formula {
        Formula::Cmp(Cmp::Lt, a, b)
    }
    pub fn gt(a: Term, b: Term) -> Formula {
        Formula::Cmp(Cmp::Gt, a, b)
    }
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }
    pub fn forall(name: impl Into<String>, sort: Sort, body: Formula) -> Formula {
        Formula::Forall(name.into(), sort, Box::new(body))
    }

    /// Left-associated conjunction with unit elimination and syntactic
    /// deduplication (first occurrence wins). `and_all([])` is `True`.
    pub fn and_all<I: IntoIterator<Item = Formula>>(parts: I) -> Formula {
        let mut seen: Vec<Formula> = Vec::new();
        for p in parts {
            for c in p.conjuncts() {
                if c == Formula::True || seen.contains(&c) {
                    continue;
                }
                seen.push(c);
            }
        }
        let mut it = seen.into_iter();
        match it.next() {
            None => Formula::True,
            Some(first) => it.fold(first, Formula::and),
        }
    }

    /// Flattened conjuncts of this formula (a non-conjunction is a singleton).
    pub fn conjuncts(&self) -> Vec<Formula> {
        match self {
            Formula::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            other => vec![other.clone()],
        }
    }

    /// All parameter names occurring free, with sorts, in first-occurrence
    /// order of a left-to-right traversal.
    pub fn free_params(&self) -> Vec<(String, Sort)> {
        let mut out = Vec::new();
        collect_params_formula(self, &mut out);
        out
    }

    /// Every (side, field) access occurring in the formula.
    pub fn field_accesses(&self) -> Vec<(Side, String)> {
        let mut out = Vec::new();
        collect_fields_formula(self, &mut out);
        out
    }

    /// Integer literals used in select/store index position. Enumeration
    /// backends vary array contents only at these "active" indices.
    pub fn index_literals(&self) -> Vec<i64> {
        let mut out = Vec::new();
        collect_indices_formula(self, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// All names used anywhere (params, vars, binders); used to pick fresh
    /// binder names.
    pub fn used_names(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        collect_names_formula(self, &mut out);
        out
    }
}

fn push_unique(out: &mut Vec<(String, Sort)>, name: &str, sort: &Sort) {
    if !out.iter().any(|(n, _)| n == name) {
        out.push((name.to_string(), sort.clone()));
    }
}

fn collect_params_term(t: &Term, out: &mut Vec<(String, Sort)>) {
    match t {
        Term::Param(name, sort) => push_unique(out, name, sort),
        Term::Int(_) | Term::Bool(_) | Term::Field(..) | Term::Var(..) => {}
        Term::Add(a, b) | Term::Sub(a, b) => {
            collect_params_term(a, out);
            collect_params_term(b, out);
        }
        Term::Mul(_, a) => collect_params_term(a, out),
        Term::Select(a, i) => {
            collect_params_term(a, out);
            collect_params_term(i, out);
        }
        Term::Store(a, i, v) => {
            collect_params_term(a, out);
            collect_params_term(i, out);
            collect_params_term(v, out);
        }
        Term::Ite(c, a, b) => {
            collect_params_formula(c, out);
            collect_params_term(a, out);
            collect_params_term(b, out);
        }
    }
}

fn collect_params_formula(f: &Formula, out: &mut Vec<(String, Sort)>) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Cmp(_, a, b) => {
            collect_params_term(a, out);
            collect_params_term(b, out);
        }
        Formula::Not(a) => collect_params_formula(a, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_params_formula(a, out);
            collect_params_formula(b, out);
        }
        Formula::Forall(_, _, body) => collect_params_formula(body, out),
    }
}

fn collect_fields_term(t: &Term, out: &mut Vec<(Side, String)>) {
    match t {
        Term::Field(side, name) => {
            if !out.iter().any(|(s, n)| s == side && n == name) {
                out.push((*side, name.clone()));
            }
        }
        Term::Int(_) | Term::Bool(_) | Term::Param(..) | Term::Var(..) => {}
        Term::Add(a, b) | Term::Sub(a, b) => {
            collect_fields_term(a, out);
            collect_fields_term(b, out);
        }
        Term::Mul(_, a) => collect_fields_term(a, out),
        Term::Select(a, i) => {
            collect_fields_term(a, out);
            collect_fields_term(i, out);
        }
        Term::Store(a, i, v) => {
            collect_fields_term(a, out);
            collect_fields_term(i, out);
            collect_fields_term(v, out);
        }
        Term::Ite(c, a, b) => {
            collect_fields_formula(c, out);
            collect_fields_term(a, out);
            collect_fields_term(b, out);
        }
    }
}

fn collect_fields_formula(f: &Formula, out: &mut Vec<(Side, String)>) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Cmp(_, a, b) => {
            collect_fields_term(a, out);
            collect_fields_term(b, out);
        }
        Formula::Not(a) => collect_fields_formula(a, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_fields_formula(a, out);
            collect_fields_formula(b, out);
        }
        Formula::Forall(_, _, body) => collect_fields_formula(body, out),
    }
}

fn collect_indices_term(t: &Term, out: &mut Vec<i64>) {
    match t {
        Term::Select(a, i) => {
            if let Term::Int(n) = **i {
                out.push(n);
            }
            collect_indices_term(a, out);
            collect_indices_term(i, out);
        }
        Term::Store(a, i, v) => {
            if let Term::Int(n) = **i {
                out.push(n);
            }
            collect_indices_term(a, out);
            collect_indices_term(i, out);
            collect_indices_term(v, out);
        }
        Term::Add(a, b) | Term::Sub(a, b) => {
            collect_indices_term(a, out);
            collect_indices_term(b, out);
        }
        Term::Mul(_, a) => collect_indices_term(a, out),
        Term::Ite(c, a, b) => {
            collect_indices_formula(c, out);
            collect_indices_term(a, out);
            collect_indices_term(b, out);
        }
        _ => {}
    }
}

fn collect_indices_formula(f: &Formula, out: &mut Vec<i64>) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Cmp(_, a, b) => {
            collect_indices_term(a, out);
            collect_indices_term(b, out);
        }
        Formula::Not(a) => collect_indices_formula(a, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_indices_formula(a, out);
            collect_indices_formula(b, out);
        }
        Formula::Forall(_, _, body) => collect_indices_formula(body, out),
    }
}

fn collect_names_term(t: &Term, out: &mut std::collections::BTreeSet<String>) {
    match t {
        Term::Param(n, _) | Term::Var(n, _) => {
            out.insert(n.clone());
        }
        Term::Int(_) | Term::Bool(_) | Term::Field(..) => {}
        Term::Add(a, b) | Term::Sub(a, b) => {
            collect_names_term(a, out);
            collect_names_term(b, out);
        }
        Term::Mul(_, a) => collect_names_term(a, out),
        Term::Select(a, i) => {
            collect_names_term(a, out);
            collect_names_term(i, out);
        }
        Term::Store(a, i, v) => {
            collect_names_term(a, out);
            collect_names_term(i, out);
            collect_names_term(v, out);
        }
        Term::Ite(c, a, b) => {
            collect_names_formula(c, out);
            collect_names_term(a, out);
            collect_names_term(b, out);
        }
    }
}

fn collect_names_formula(f: &Formula, out: &mut std::collections::BTreeSet<String>) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Cmp(_, a, b) => {
            collect_names_term(a, out);
            collect_names_term(b, out);
        }
        Formula::Not(a) => collect_names_formula(a, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_names_formula(a, out);
            collect_names_formula(b, out);
        }
        Formula::Forall(n, _, body) => {
            out.insert(n.clone());
            collect_names_formula(body, out);
        }
    }
}

/// Errors from the sorting judgment.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SortError {
    #[error("unknown store field `{0}`")]
    UnknownField(String),
    #[error("parameter `{name}` used at sort {found}, expected {expected}")]
    ParamMismatch {
        name: String,
        expected: Sort,
        found: Sort,
    },
    #[error("expected sort {expected}, found {found}")]
    Mismatch { expected: Sort, found: Sort },
    #[error("comparison `{0}` requires integer operands")]
    NonIntComparison(&'static str),
    #[error("select/store applied to non-array term")]
    NotAnArray,
    #[error("ill-sorted equality between {0} and {1}")]
    BadEquality(Sort, Sort),
    #[error("unbound variable `{0}`")]
    UnboundVar(String),
}

/// Sorting environment: schema plus the stack of quantifier-bound variables.
struct SortEnv<'a> {
    schema: &'a StoreSchema,
    bound: Vec<(String, Sort)>,
}

impl Term {
    /// The unique sort of this term under the given schema, or an error.
    pub fn sort(&self, schema: &StoreSchema) -> Result<Sort, SortError> {
        let mut env = SortEnv {
            schema,
            bound: Vec::new(),
        };
        sort_term(self, &mut env)
    }
}

impl Formula {
    /// Check the formula is well-sorted under the schema.
    pub fn well_sorted(&self, schema: &StoreSchema) -> Result<(), SortError> {
        let mut env = SortEnv {
            schema,
            bound: Vec::new(),
        };
        sort_formula(self, &mut env)
    }
}

fn sort_term(t: &Term, env: &mut SortEnv) -> Result<Sort, SortError> {
    match t {
        Term::Int(_) => Ok(Sort::Int),
        Term::Bool(_) => Ok(Sort::Bool),
        Term::Field(_, name) => env
            .schema
            .sort_of(name)
            .cloned()
            .ok_or_else(|| SortError::UnknownField(name.clone())),
        Term::Param(_, sort) => Ok(sort.clone()),
        Term::Var(name, sort) => {
            // A Var must be bound by an enclosing quantifier with the same sort.
            match env.bound.iter().rev().find(|(n, _)| n == name) {
                Some((_, s)) if s == sort => Ok(sort.clone()),
                Some((_, s)) => Err(SortError::ParamMismatch {
                    name: name.clone(),
                    expected: s.clone(),
                    found: sort.clone(),
                }),
                None => Err(SortError::UnboundVar(name.clone())),
            }
        }
        Term::Add(a, b) | Term::Sub(a, b) => {
            expect_sort(a, Sort::Int, env)?;
            expect_sort(b, Sort::Int, env)?;
            Ok(Sort::Int)
        }
        Term::Mul(_, a) => {
            expect_sort(a, Sort::Int, env)?;
            Ok(Sort::Int)
        }
        Term::Select(a, i) => {
            let arr = sort_term(a, env)?;
            expect_sort(i, Sort::Int, env)?;
            match arr {
                Sort::Array(elem, _) => Ok(*elem),
                _ => Err(SortError::NotAnArray),
            }
        }
        Term::Store(a, i, v) => {
            let arr = sort_term(a, env)?;
            expect_sort(i, Sort::Int, env)?;
            match arr {
                Sort::Array(ref elem, _) => {
                    let vs = sort_term(v, env)?;
                    if vs != **elem {
                        return Err(SortError::Mismatch {
                            expected: (**elem).clone(),
                            found: vs,
                        });
                    }
                    Ok(arr)
                }
                _ => Err(SortError::NotAnArray),
            }
        }
        Term::Ite(c, a, b) => {
            sort_formula(c, env)?;
            let sa = sort_term(a, env)?;
            let sb = sort_term(b, env)?;
            if sa != sb {
                return Err(SortError::Mismatch {
                    expected: sa,
                    found: sb,
                });
            }
            Ok(sa)
        }
    }
}

fn expect_sort(t: &Term, expected: Sort, env: &mut SortEnv) -> Result<(), SortError> {
    let found = sort_term(t, env)?;
    if found != expected {
        return Err(SortError::Mismatch { expected, found });
    }
    Ok(())
}

fn sort_formula(f: &Formula, env: &mut SortEnv) -> Result<(), SortError> {
    match f {
        Formula::True | Formula::False => Ok(()),
        Formula::Cmp(op, a, b) => {
            let sa = sort_term(a, env)?;
            let sb = sort_term(b, env)?;
            match op {
                Cmp::Eq => {
                    if sa != sb {
                        return Err(SortError::BadEquality(sa, sb));
                    }
                    Ok(())
                }
                _ => {
                    if sa != Sort::Int || sb != Sort::Int {
                        return Err(SortError::NonIntComparison(op.symbol()));
                    }
                    Ok(())
                }
            }
        }
        Formula::Not(a) => sort_formula(a, env),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            sort_formula(a, env)?;
            sort_formula(b, env)
        }
        Formula::Forall(name, sort, body) => {
            env.bound.push((name.clone(), sort.clone()));
            let r = sort_formula(body, env);
            env.bound.pop();
            r
        }
    }
}

// Display uses the card-file surface syntax: g.f / r.f for the two sides.

fn term_prec(t: &Term) -> u8 {
    match t {
        Term::Add(..) | Term::Sub(..) => 1,
        Term::Mul(..) => 2,
        _ => 3,
    }
}

fn fmt_term(t: &Term, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
    let prec = term_prec(t);
    let parens = prec < min_prec;
    if parens {
        write!(f, "(")?;
    }
    match t {
        Term::Int(n) => write!(f, "{n}")?,
        Term::Bool(b) => write!(f, "{b}")?,
        Term::Field(Side::Global, name) => write!(f, "g.{name}")?,
        Term::Field(Side::Replica, name) => write!(f, "r.{name}")?,
        Term::Param(name, _) | Term::Var(name, _) => write!(f, "{name}")?,
        Term::Add(a, b) => {
            fmt_term(a, f, 1)?;
            write!(f, " + ")?;
            fmt_term(b, f, 2)?;
        }
        Term::Sub(a, b) => {
            fmt_term(a, f, 1)?;
            write!(f, " - ")?;
            fmt_term(b, f, 2)?;
        }
        Term::Mul(c, a) => {
            write!(f, "{c} * ")?;
            fmt_term(a, f, 3)?;
        }
        Term::Select(a, i) => {
            fmt_term(a, f, 3)?;
            write!(f, "[")?;
            fmt_term(i, f, 0)?;
            write!(f, "]")?;
        }
        Term::Store(a, i, v) => {
            fmt_term(a, f, 3)?;
            write!(f, "[")?;
            fmt_term(i, f, 0)?;
            write!(f, " -> ")?;
            fmt_term(v, f, 0)?;
            write!(f, "]")?;
        }
        Term::Ite(c, a, b) => {
            write!(f, "ite({c}, ")?;
            fmt_term(a, f, 0)?;
            write!(f, ", ")?;
            fmt_term(b, f, 0)?;
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_term(self, f, 0)
    }
}

fn formula_prec(f: &Formula) -> u8 {
    match f {
        Formula::Forall(..) => 0,
        Formula::Implies(..) => 1,
        Formula::Or(..) => 2,
        Formula::And(..) => 3,
        _ => 4,
    }
}

fn fmt_formula(x: &Formula, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
    let prec = formula_prec(x);
    let parens = prec < min_prec;
    if parens {
        write!(f, "(")?;
    }
    match x {
        Formula::True => write!(f, "true")?,
        Formula::False => write!(f, "false")?,
        Formula::Cmp(op, a, b) => {
            fmt_term(a, f, 1)?;
            write!(f, " {} ", op.symbol())?;
            fmt_term(b, f, 1)?;
        }
        Formula::Not(a) => {
            write!(f, "!")?;
            fmt_formula(a, f, 4)?;
        }
        Formula::And(a, b) => {
            fmt_formula(a, f, 3)?;
            write!(f, " && ")?;
            fmt_formula(b, f, 4)?;
        }
        Formula::Or(a, b) => {
            fmt_formula(a, f, 2)?;
            write!(f, " || ")?;
            fmt_formula(b, f, 3)?;
        }
        Formula::Implies(a, b) => {
            fmt_formula(a, f, 2)?;
            write!(f, " => ")?;
            fmt_formula(b, f, 1)?;
        }
        Formula::Forall(name, sort, body) => {
            write!(f, "forall {name}: {sort}. ")?;
            fmt_formula(body, f, 1)?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_formula(self, f, 0)
    }
}

/// Simultaneously replace field accesses on `side` by the given update terms.
///
/// Update terms reference the *old* store through `Field(side, _)` accesses
/// after retagging: an update map is written against `Side::Global` as the
/// canonical old-store side and is retagged to whichever side it is applied
/// on. Replacement happens in a single pass, so updates never rewrite each
/// other (simultaneous substitution).
pub fn apply_updates(f: &Formula, updates: &BTreeMap<String, Term>, side: Side) -> Formula {
    map_formula_fields(f, &|s, name| {
        if s == side {
            match updates.get(name) {
                Some(u) => retag_term(u, side),
                None => Term::Field(s, name.to_string()),
            }
        } else {
            Term::Field(s, name.to_string())
        }
    })
}

/// Retag every field access in an update term to the given side.
pub fn retag_term(t: &Term, side: Side) -> Term {
    match t {
        Term::Field(_, name) => Term::Field(side, name.clone()),
        Term::Int(_) | Term::Bool(_) | Term::Param(..) | Term::Var(..) => t.clone(),
        Term::Add(a, b) => Term::add(retag_term(a, side), retag_term(b, side)),
        Term::Sub(a, b) => Term::sub(retag_term(a, side), retag_term(b, side)),
        Term::Mul(c, a) => Term::mul(*c, retag_term(a, side)),
        Term::Select(a, i) => Term::select(retag_term(a, side), retag_term(i, side)),
        Term::Store(a, i, v) => Term::store(
            retag_term(a, side),
            retag_term(i, side),
            retag_term(v, side),
        ),
        Term::Ite(c, a, b) => Term::ite(
            retag_formula_sides(c, side),
            retag_term(a, side),
            retag_term(b, side),
        ),
    }
}

fn retag_formula_sides(f: &Formula, side: Side) -> Formula {
    map_formula_fields(f, &|_, name| Term::Field(side, name.to_string()))
}

/// Rebuild a formula, replacing every field-access atom via `repl`. The
/// replacement term is inserted verbatim (its own contents are not visited).
pub fn map_formula_fields(f: &Formula, repl: &dyn Fn(Side, &str) -> Term) -> Formula {
    match f {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Cmp(op, a, b) => {
            Formula::Cmp(*op, map_term_fields(a, repl), map_term_fields(b, repl))
        }
        Formula::Not(a) => Formula::not(map_formula_fields(a, repl)),
        Formula::And(a, b) => Formula::and(map_formula_fields(a, repl), map_formula_fields(b, repl)),
        Formula::Or(a, b) => Formula::or(map_formula_fields(a, repl), map_formula_fields(b, repl)),
        Formula::Implies(a, b) => {
            Formula::implies(map_formula_fields(a, repl), map_formula_fields(b, repl))
        }
        Formula::Forall(n, s, body) => {
            Formula::forall(n.clone(), s.clone(), map_formula_fields(body, repl))
        }
    }
}

fn map_term_fields(t: &Term, repl: &dyn Fn(Side, &str) -> Term) -> Term {
    match t {
        Term::Field(side, name) => repl(*side, name),
        Term::Int(_) | Term::Bool(_) | Term::Param(..) | Term::Var(..) => t.clone(),
        Term::Add(a, b) => Term::add(map_term_fields(a, repl), map_term_fields(b, repl)),
        Term::Sub(a, b) => Term::sub(map_term_fields(a, repl), map_term_fields(b, repl)),
        Term::Mul(c, a) => Term::mul(*c, map_term_fields(a, repl)),
        Term::Select(a, i) => Term::select(map_term_fields(a, repl), map_term_fields(i, repl)),
        Term::Store(a, i, v) => Term::store(
            map_term_fields(a, repl),
            map_term_fields(i, repl),
            map_term_fields(v, repl),
        ),
        Term::Ite(c, a, b) => Term::ite(
            map_formula_fields(c, repl),
            map_term_fields(a, repl),
            map_term_fields(b, repl),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counter_schema() -> StoreSchema {
        StoreSchema::new(vec![("val".into(), Sort::Int)]).unwrap()
    }

    #[test]
    fn sorting_accepts_le_guard() {
        let le = Formula::ge(
            Term::field(Side::Global, "val"),
            Term::field(Side::Replica, "val"),
        );
        le.well_sorted(&counter_schema()).unwrap();
    }

    #[test]
    fn sorting_rejects_unknown_field() {
        let f = Formula::ge(Term::field(Side::Global, "nope"), Term::int(0));
        assert_eq!(
            f.well_sorted(&counter_schema()),
            Err(SortError::UnknownField("nope".into()))
        );
    }

    #[test]
    fn sorting_rejects_bool_compare() {
        let f = Formula::le(Term::boolean(true), Term::int(0));
        assert!(f.well_sorted(&counter_schema()).is_err());
    }

    #[test]
    fn and_all_drops_units_and_duplicates() {
        let le = Formula::ge(
            Term::field(Side::Global, "val"),
            Term::field(Side::Replica, "val"),
        );
        assert_eq!(Formula::and_all([]), Formula::True);
        assert_eq!(Formula::and_all([Formula::True, le.clone()]), le);
        assert_eq!(
            Formula::and_all([le.clone(), le.clone(), Formula::True]),
            le
        );
    }

    #[test]
    fn display_round_shapes() {
        let f = Formula::and(
            Formula::ge(Term::field(Side::Global, "val"), Term::int(0)),
            Formula::eq(Term::field(Side::Global, "val"), Term::int(90)),
        );
        assert_eq!(f.to_string(), "g.val >= 0 && g.val == 90");
        let t = Term::store(
            Term::field(Side::Global, "a"),
            Term::int(1),
            Term::add(
                Term::select(Term::field(Side::Global, "a"), Term::int(1)),
                Term::int(2),
            ),
        );
        assert_eq!(t.to_string(), "g.a[1 -> g.a[1] + 2]");
    }

    #[test]
    fn apply_updates_is_simultaneous() {
        // val := val + n on the global side of "g.val >= r.val".
        let le = Formula::ge(
            Term::field(Side::Global, "val"),
            Term::field(Side::Replica, "val"),
        );
        let mut upd = BTreeMap::new();
        upd.insert(
            "val".to_string(),
            Term::add(
                Term::field(Side::Global, "val"),
                Term::param("n", Sort::Int),
            ),
        );
        let out = apply_updates(&le, &upd, Side::Global);
        assert_eq!(out.to_string(), "g.val + n >= r.val");
        // Applying on both sides leaves the shifted comparison.
        let out2 = apply_updates(&out, &upd, Side::Replica);
        assert_eq!(out2.to_string(), "g.val + n >= r.val + n");
    }
}
