//! CARD definitions: a store schema, parametric effect classes with symbolic
//! denotations, and named consistency guards, plus concrete evaluation of
//! effects and guards on store values.

use crate::logic::{
    apply_updates, check_valid, map_formula_fields, substitute_term, Backend, EvalError, Formula,
    Side, Sort, SortError, StoreSchema, Term, Valuation, Validity, Value,
};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Name of the builtin identity effect class.
pub const NOOP: &str = "NoOp";
/// Name of the builtin trivial guard.
pub const TOP: &str = "TOP";
/// Name of the builtin identity-relation guard.
pub const EQ: &str = "EQ";

/// One parameter of an effect class, with a constraint over the class's
/// parameters only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectParam {
    pub name: String,
    pub sort: Sort,
    pub constraint: Formula,
}

/// A parametric effect class. `assignments` is total over the store fields;
/// fields without a declared update carry an identity assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectClass {
    pub name: String,
    pub params: Vec<EffectParam>,
    pub assignments: BTreeMap<String, Term>,
}

impl EffectClass {
    /// The per-field update terms with parameters replaced by `args`
    /// (literals for concrete application, free or bound variables for
    /// symbolic reasoning).
    pub fn updates_for(
        &self,
        schema: &StoreSchema,
        args: &[Term],
    ) -> Result<BTreeMap<String, Term>, CardError> {
        if args.len() != self.params.len() {
            return Err(CardError::Arity {
                effect: self.name.clone(),
                expected: self.params.len(),
                found: args.len(),
            });
        }
        let bindings: BTreeMap<String, Term> = self
            .params
            .iter()
            .zip(args)
            .map(|(p, a)| (p.name.clone(), a.clone()))
            .collect();
        let mut out = BTreeMap::new();
        for (field, term) in &self.assignments {
            out.insert(field.clone(), substitute_term(schema, term, &bindings)?);
        }
        Ok(out)
    }

    /// Conjunction of the parameter constraints with parameters replaced by
    /// `args`.
    pub fn constraints_for(
        &self,
        schema: &StoreSchema,
        args: &[Term],
    ) -> Result<Formula, CardError> {
        if args.len() != self.params.len() {
            return Err(CardError::Arity {
                effect: self.name.clone(),
                expected: self.params.len(),
                found: args.len(),
            });
        }
        let bindings: BTreeMap<String, Term> = self
            .params
            .iter()
            .zip(args)
            .map(|(p, a)| (p.name.clone(), a.clone()))
            .collect();
        let parts: Result<Vec<Formula>, SortError> = self
            .params
            .iter()
            .map(|p| crate::logic::substitute(schema, &p.constraint, &bindings))
            .collect();
        Ok(Formula::and_all(parts?))
    }

    /// True when every assignment is the identity.
    pub fn is_identity(&self) -> bool {
        self.assignments
            .iter()
            .all(|(field, term)| matches!(term, Term::Field(Side::Global, f) if f == field))
    }
}

/// A named consistency guard: a two-state predicate over (s_g, s_r).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardDef {
    pub name: String,
    pub body: Formula,
}

/// A concrete store value conforming to a schema.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StoreValue(pub BTreeMap<String, Value>);

impl StoreValue {
    pub fn new(fields: BTreeMap<String, Value>) -> StoreValue {
        StoreValue(fields)
    }

    pub fn get(&self, field: &str) -> Option<&Value> {
        self.0.get(field)
    }

    pub fn conforms(&self, schema: &StoreSchema) -> bool {
        schema.fields().len() == self.0.len()
            && schema
                .fields()
                .iter()
                .all(|(name, sort)| self.0.get(name).map(|v| &v.sort() == sort).unwrap_or(false))
    }

    /// Single-int-store convenience used all over the bank examples.
    pub fn int(field: &str, n: i64) -> StoreValue {
        let mut m = BTreeMap::new();
        m.insert(field.to_string(), Value::Int(n));
        StoreValue(m)
    }
}

impl fmt::Display for StoreValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (name, value)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{name}={value}")?;
        }
        write!(f, ")")
    }
}

/// A concrete effect: class name plus argument values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EffectInstance {
    pub class: String,
    pub args: Vec<Value>,
}

impl EffectInstance {
    pub fn new(class: impl Into<String>, args: Vec<Value>) -> EffectInstance {
        EffectInstance {
            class: class.into(),
            args,
        }
    }

    pub fn noop() -> EffectInstance {
        EffectInstance::new(NOOP, vec![])
    }
}

impl fmt::Display for EffectInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.class)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CardError {
    #[error("unknown effect class `{0}`")]
    UnknownEffect(String),
    #[error("unknown guard `{0}`")]
    UnknownGuard(String),
    #[error("effect `{effect}` expects {expected} argument(s), got {found}")]
    Arity {
        effect: String,
        expected: usize,
        found: usize,
    },
    #[error("argument {index} of `{effect}` has the wrong sort")]
    ArgSort { effect: String, index: usize },
    #[error("arguments of `{effect}` violate its parameter constraint")]
    ConstraintViolated { effect: String },
    #[error("store value does not conform to the schema of `{0}`")]
    BadStore(String),
    #[error("duplicate name `{0}` among effects/guards")]
    DuplicateName(String),
    #[error("assignment target `{0}` is not a store field")]
    BadAssignmentTarget(String),
    #[error(transparent)]
    Sort(#[from] SortError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A CARD: D = (name, schema, init, effects, guards). The builtin `NoOp`
/// effect and the `TOP`/`EQ` guards are always present after construction.
#[derive(Debug, Clone)]
pub struct Card {
    pub name: String,
    pub schema: StoreSchema,
    pub init: StoreValue,
    pub effects: Vec<EffectClass>,
    pub guards: Vec<GuardDef>,
}

/// The identity-relation body over a schema: every field equal across sides.
pub fn eq_guard_body(schema: &StoreSchema) -> Formula {
    Formula::and_all(schema.fields().iter().map(|(name, _)| {
        Formula::eq(
            Term::field(Side::Global, name.clone()),
            Term::field(Side::Replica, name.clone()),
        )
    }))
}

impl Card {
    pub fn new(
        name: impl Into<String>,
        schema: StoreSchema,
        init: StoreValue,
        mut effects: Vec<EffectClass>,
        mut guards: Vec<GuardDef>,
    ) -> Result<Card, CardError> {
        let name = name.into();
        if !effects.iter().any(|e| e.name == NOOP) {
            effects.insert(
                0,
                EffectClass {
                    name: NOOP.to_string(),
                    params: vec![],
                    assignments: BTreeMap::new(),
                },
            );
        }
        if !guards.iter().any(|g| g.name == TOP) {
            guards.insert(
                0,
                GuardDef {
                    name: TOP.to_string(),
                    body: Formula::True,
                },
            );
        }
        if !guards.iter().any(|g| g.name == EQ) {
            guards.insert(
                1,
                GuardDef {
                    name: EQ.to_string(),
                    body: eq_guard_body(&schema),
                },
            );
        }
        // Complete partial assignment maps with identities.
        for class in &mut effects {
            for (field, _) in schema.fields() {
                class
                    .assignments
                    .entry(field.clone())
                    .or_insert_with(|| Term::field(Side::Global, field.clone()));
            }
        }
        let card = Card {
            name,
            schema,
            init,
            effects,
            guards,
        };
        card.structural_check()?;
        Ok(card)
    }

    fn structural_check(&self) -> Result<(), CardError> {
        let mut names = std::collections::BTreeSet::new();
        for e in &self.effects {
            if !names.insert(e.name.clone()) {
                return Err(CardError::DuplicateName(e.name.clone()));
            }
        }
        for g in &self.guards {
            if !names.insert(g.name.clone()) {
                return Err(CardError::DuplicateName(g.name.clone()));
            }
        }
        if !self.init.conforms(&self.schema) {
            return Err(CardError::BadStore(self.name.clone()));
        }
        for e in &self.effects {
            for (field, term) in &e.assignments {
                let declared = self
                    .schema
                    .sort_of(field)
                    .ok_or_else(|| CardError::BadAssignmentTarget(field.clone()))?;
                let found = term.sort(&self.schema)?;
                if &found != declared {
                    return Err(CardError::Sort(SortError::Mismatch {
                        expected: declared.clone(),
                        found,
                    }));
                }
            }
            for p in &e.params {
                // Constraints range over the class's parameters only.
                if !p.constraint.field_accesses().is_empty() {
                    return Err(CardError::BadAssignmentTarget(format!(
                        "constraint of {}.{} mentions store fields",
                        e.name, p.name
                    )));
                }
                p.constraint.well_sorted(&self.schema)?;
            }
        }
        for g in &self.guards {
            g.body.well_sorted(&self.schema)?;
        }
        Ok(())
    }

    pub fn effect(&self, name: &str) -> Result<&EffectClass, CardError> {
        self.effects
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| CardError::UnknownEffect(name.to_string()))
    }

    pub fn guard(&self, name: &str) -> Result<&GuardDef, CardError> {
        self.guards
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| CardError::UnknownGuard(name.to_string()))
    }

    /// Build a checked effect instance: arity, argument sorts, constraints.
    pub fn instance(&self, class: &str, args: Vec<Value>) -> Result<EffectInstance, CardError> {
        let ec = self.effect(class)?;
        if args.len() != ec.params.len() {
            return Err(CardError::Arity {
                effect: class.to_string(),
                expected: ec.params.len(),
                found: args.len(),
            });
        }
        for (i, (p, a)) in ec.params.iter().zip(&args).enumerate() {
            if a.sort() != p.sort {
                return Err(CardError::ArgSort {
                    effect: class.to_string(),
                    index: i,
                });
            }
        }
        let mut v = Valuation::new();
        for (p, a) in ec.params.iter().zip(&args) {
            v.params.insert(p.name.clone(), a.clone());
        }
        for p in &ec.params {
            if !v.eval_formula(&p.constraint, &[])? {
                return Err(CardError::ConstraintViolated {
                    effect: class.to_string(),
                });
            }
        }
        Ok(EffectInstance {
            class: class.to_string(),
            args,
        })
    }
}

/// Apply an effect's denotation to a concrete store value.
///
/// Out-of-bounds array indices are reported as errors, never clamped; the
/// simulator aborts such a run as a modeling bug.
pub fn denote_effect(
    card: &Card,
    e: &EffectInstance,
    s: &StoreValue,
) -> Result<StoreValue, CardError> {
    let class = card.effect(&e.class)?;
    if e.args.len() != class.params.len() {
        return Err(CardError::Arity {
            effect: e.class.clone(),
            expected: class.params.len(),
            found: e.args.len(),
        });
    }
    if !s.conforms(&card.schema) {
        return Err(CardError::BadStore(card.name.clone()));
    }
    let mut v = Valuation::new();
    v.global = s.0.clone();
    for (p, a) in class.params.iter().zip(&e.args) {
        v.params.insert(p.name.clone(), a.clone());
    }
    let mut out = BTreeMap::new();
    for (field, term) in &class.assignments {
        out.insert(field.clone(), v.eval_term(term)?);
    }
    Ok(StoreValue(out))
}

/// Concrete truth value of `c(s_g, s_r)`.
pub fn guard_eval(
    card: &Card,
    guard: &GuardDef,
    s_g: &StoreValue,
    s_r: &StoreValue,
) -> Result<bool, CardError> {
    let mut v = Valuation::new();
    v.global = s_g.0.clone();
    v.replica = s_r.0.clone();
    Ok(v.eval_formula(&guard.body, &[])?)
}

/// Symbolic application of an effect to a formula: replaces the selected
/// side's field accesses by the effect's update expressions.
pub fn apply_effect(
    card: &Card,
    f: &Formula,
    class: &EffectClass,
    args: &[Term],
    sides: &[Side],
) -> Result<Formula, CardError> {
    let updates = class.updates_for(&card.schema, args)?;
    let mut out = f.clone();
    for side in sides {
        out = apply_updates(&out, &updates, *side);
    }
    Ok(out)
}

/// One validation finding from [`validate_card`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CardViolation {
    NotReflexive { guard: String, detail: String },
    UnsatisfiableConstraint { effect: String },
    Structural { detail: String },
}

impl fmt::Display for CardViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CardViolation::NotReflexive { guard, detail } => {
                write!(f, "guard `{guard}` is not reflexive: {detail}")
            }
            CardViolation::UnsatisfiableConstraint { effect } => {
                write!(
                    f,
                    "effect `{effect}` has an unsatisfiable parameter constraint"
                )
            }
            CardViolation::Structural { detail } => write!(f, "{detail}"),
        }
    }
}

/// Load-time validation: guard reflexivity, parameter-constraint
/// satisfiability, and init conformance. All violations are returned.
pub fn validate_card(card: &Card, backend: &Backend) -> Vec<CardViolation> {
    let mut out = Vec::new();
    if !card.init.conforms(&card.schema) {
        out.push(CardViolation::Structural {
            detail: format!(
                "init store does not conform to the schema of `{}`",
                card.name
            ),
        });
    }
    for g in &card.guards {
        // forall s. c(s, s): identify the two sides and ask for validity.
        let diag = map_formula_fields(&g.body, &|_, name| Term::field(Side::Global, name));
        match check_valid(&card.schema, &diag, backend) {
            Validity::Valid => {}
            Validity::Invalid(w) => out.push(CardViolation::NotReflexive {
                guard: g.name.clone(),
                detail: format!("counterexample {w}"),
            }),
            Validity::Unknown(reason) => out.push(CardViolation::NotReflexive {
                guard: g.name.clone(),
                detail: format!("undecided ({reason})"),
            }),
        }
    }
    for e in &card.effects {
        if e.params.is_empty() {
            continue;
        }
        let args: Vec<Term> = e
            .params
            .iter()
            .map(|p| Term::param(p.name.clone(), p.sort.clone()))
            .collect();
        let constraint = match e.constraints_for(&card.schema, &args) {
            Ok(c) => c,
            Err(err) => {
                out.push(CardViolation::Structural {
                    detail: format!("effect `{}`: {err}", e.name),
                });
                continue;
            }
        };
        // Satisfiable iff the negation is not valid.
        match check_valid(&card.schema, &Formula::not(constraint), backend) {
            Validity::Invalid(_) => {}
            Validity::Valid | Validity::Unknown(_) => {
                out.push(CardViolation::UnsatisfiableConstraint {
                    effect: e.name.clone(),
                })
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::testcards::counter_card;
    use crate::logic::EnumDomain;

    #[test]
    fn noop_and_builtin_guards_are_injected() {
        let card = counter_card();
        assert!(card.effect(NOOP).is_ok());
        assert!(card.guard(TOP).is_ok());
        assert!(card.guard(EQ).is_ok());
        assert_eq!(card.effects.len(), 4);
        assert_eq!(card.guards.len(), 4);
    }

    #[test]
    fn denote_add_then_sub() {
        let card = counter_card();
        let s0 = StoreValue::int("val", 0);
        let add = card.instance("Add", vec![Value::Int(100)]).unwrap();
        let s1 = denote_effect(&card, &add, &s0).unwrap();
        assert_eq!(s1, StoreValue::int("val", 100));
        let sub = card.instance("Sub", vec![Value::Int(10)]).unwrap();
        let s2 = denote_effect(&card, &sub, &s1).unwrap();
        assert_eq!(s2, StoreValue::int("val", 90));
        let noop = EffectInstance::noop();
        assert_eq!(denote_effect(&card, &noop, &s2).unwrap(), s2);
    }

    #[test]
    fn instance_rejects_constraint_violation() {
        let card = counter_card();
        assert!(matches!(
            card.instance("Add", vec![Value::Int(-1)]),
            Err(CardError::ConstraintViolated { .. })
        ));
    }

    #[test]
    fn guard_eval_matches_le_reading() {
        let card = counter_card();
        let le = card.guard("LE").unwrap();
        let g100 = StoreValue::int("val", 100);
        let g90 = StoreValue::int("val", 90);
        assert!(guard_eval(&card, le, &g100, &g100).unwrap());
        assert!(guard_eval(&card, le, &g100, &g90).unwrap());
        assert!(!guard_eval(&card, le, &g90, &g100).unwrap());
    }

    #[test]
    fn symbolic_add_on_global_side() {
        let card = counter_card();
        let le = card.guard("LE").unwrap().body.clone();
        let add = card.effect("Add").unwrap();
        let out = apply_effect(
            &card,
            &le,
            add,
            &[Term::param("n", Sort::Int)],
            &[Side::Global],
        )
        .unwrap();
        assert_eq!(out.to_string(), "g.val + n >= r.val");
    }

    #[test]
    fn validate_flags_irreflexive_guard_and_unsat_constraint() {
        let schema = StoreSchema::new(vec![("val".into(), Sort::Int)]).unwrap();
        let strict = GuardDef {
            name: "GT".into(),
            body: Formula::gt(
                Term::field(Side::Global, "val"),
                Term::field(Side::Replica, "val"),
            ),
        };
        let bad = EffectClass {
            name: "Bad".into(),
            params: vec![EffectParam {
                name: "n".into(),
                sort: Sort::Int,
                constraint: Formula::and(
                    Formula::ge(Term::param("n", Sort::Int), Term::int(0)),
                    Formula::le(Term::param("n", Sort::Int), Term::int(-1)),
                ),
            }],
            assignments: BTreeMap::new(),
        };
        let card = Card::new(
            "Broken",
            schema,
            StoreValue::int("val", 0),
            vec![bad],
            vec![strict],
        )
        .unwrap();
        let violations = validate_card(&card, &Backend::Enumeration(EnumDomain::default()));
        assert!(violations
            .iter()
            .any(|v| matches!(v, CardViolation::NotReflexive { guard, .. } if guard == "GT")));
        assert!(violations.iter().any(
            |v| matches!(v, CardViolation::UnsatisfiableConstraint { effect } if effect == "Bad")
        ));
        assert_eq!(
            validate_card(
                &counter_card(),
                &Backend::Enumeration(EnumDomain::default())
            ),
            vec![]
        );
    }
}
