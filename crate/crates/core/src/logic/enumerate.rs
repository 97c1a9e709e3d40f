//! Bounded-enumeration validity backend.
//!
//! Exhaustively evaluates a formula over a finite domain: integer fields and
//! free parameters range over `[int_lo, int_hi]`, universally quantified
//! variables over `[quant_lo, quant_hi]`, booleans over both values, and
//! array fields vary only at the indices that occur literally in the formula
//! (other cells stay zero). Domains are walked in spiral order (0, 1, -1,
//! 2, -2, ...) so reported witnesses have small magnitudes.

use super::{Formula, Side, Sort, SortError, StoreSchema, Term, Valuation, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumDomain {
    pub int_lo: i64,
    pub int_hi: i64,
    pub quant_lo: i64,
    pub quant_hi: i64,
    pub max_array_cells: usize,
    pub max_cases: u64,
}

impl Default for EnumDomain {
    fn default() -> EnumDomain {
        EnumDomain {
            int_lo: -8,
            int_hi: 8,
            quant_lo: 0,
            quant_hi: 4,
            max_array_cells: 3,
            max_cases: 40_000_000,
        }
    }
}

impl EnumDomain {
    /// A narrow domain suitable for inner loops (oracle carefulness checks).
    pub fn narrow() -> EnumDomain {
        EnumDomain {
            int_lo: -3,
            int_hi: 3,
            quant_lo: 0,
            quant_hi: 3,
            max_array_cells: 2,
            max_cases: 40_000_000,
        }
    }

    fn spiral(lo: i64, hi: i64) -> Vec<i64> {
        let mut out = Vec::with_capacity((hi - lo + 1).max(0) as usize);
        let max_mag = lo.abs().max(hi.abs());
        for m in 0..=max_mag {
            if m >= lo && m <= hi {
                out.push(m);
            }
            if m != 0 && -m >= lo && -m <= hi {
                out.push(-m);
            }
        }
        out
    }

    pub fn int_values(&self) -> Vec<Value> {
        Self::spiral(self.int_lo, self.int_hi)
            .into_iter()
            .map(Value::Int)
            .collect()
    }

    pub fn quant_values(&self) -> Vec<Value> {
        Self::spiral(self.quant_lo, self.quant_hi)
            .into_iter()
            .map(Value::Int)
            .collect()
    }
}

enum Slot {
    GlobalField(String, Sort),
    ReplicaField(String, Sort),
    Param(String, Sort),
}

/// Candidate values for one slot.
fn slot_values(sort: &Sort, dom: &EnumDomain, active: &[usize]) -> Vec<Value> {
    match sort {
        Sort::Int => dom.int_values(),
        Sort::Bool => vec![Value::Bool(false), Value::Bool(true)],
        Sort::Array(_, len) => {
            let ints: Vec<i64> = EnumDomain::spiral(dom.int_lo, dom.int_hi);
            let mut arrays = vec![vec![0i64; *len]];
            for &idx in active {
                let mut next = Vec::with_capacity(arrays.len() * ints.len());
                for arr in &arrays {
                    for &v in &ints {
                        let mut a = arr.clone();
                        a[idx] = v;
                        next.push(a);
                    }
                }
                arrays = next;
            }
            arrays.into_iter().map(Value::Arr).collect()
        }
    }
}

/// Result of exhaustive evaluation.
pub(super) enum EnumOutcome {
    Valid,
    Invalid(Vec<(String, Value)>),
    TooLarge(u64),
    Error(super::EvalError),
}

pub(super) fn enumerate_validity(
    schema: &StoreSchema,
    f: &Formula,
    dom: &EnumDomain,
) -> Result<EnumOutcome, SortError> {
    f.well_sorted(schema)?;

    let mut slots: Vec<Slot> = Vec::new();
    for (side, name) in f.field_accesses() {
        let sort = schema
            .sort_of(&name)
            .cloned()
            .ok_or_else(|| SortError::UnknownField(name.clone()))?;
        match side {
            Side::Global => slots.push(Slot::GlobalField(name, sort)),
            Side::Replica => slots.push(Slot::ReplicaField(name, sort)),
        }
    }
    for (name, sort) in f.free_params() {
        slots.push(Slot::Param(name, sort));
    }

    let active: Vec<usize> = {
        let mut idxs: Vec<usize> = f
            .index_literals()
            .into_iter()
            .filter(|&i| i >= 0)
            .map(|i| i as usize)
            .collect();
        idxs.truncate(dom.max_array_cells);
        idxs
    };

    let domains: Vec<Vec<Value>> = slots
        .iter()
        .map(|slot| {
            let sort = match slot {
                Slot::GlobalField(_, s) | Slot::ReplicaField(_, s) | Slot::Param(_, s) => s,
            };
            let in_range: Vec<usize> = match sort {
                Sort::Array(_, len) => active.iter().copied().filter(|i| i < len).collect(),
                _ => Vec::new(),
            };
            slot_values(sort, dom, &in_range)
        })
        .collect();

    let mut total: u64 = 1;
    for d in &domains {
        total = total.saturating_mul(d.len() as u64);
        if total > dom.max_cases {
            return Ok(EnumOutcome::TooLarge(total));
        }
    }

    let quant_domain = dom.quant_values();
    let mut counters = vec![0usize; slots.len()];
    loop {
        let mut v = Valuation::new();
        for (i, slot) in slots.iter().enumerate() {
            let val = domains[i][counters[i]].clone();
            match slot {
                Slot::GlobalField(name, _) => {
                    v.global.insert(name.clone(), val);
                }
                Slot::ReplicaField(name, _) => {
                    v.replica.insert(name.clone(), val);
                }
                Slot::Param(name, _) => {
                    v.params.insert(name.clone(), val);
                }
            }
        }
        let mut trace = Vec::new();
        match eval_trace(f, &v, &quant_domain, &mut trace) {
            Ok(true) => {}
            Ok(false) => {
                let mut witness = Vec::new();
                for (i, slot) in slots.iter().enumerate() {
                    let val = domains[i][counters[i]].clone();
                    let name = match slot {
                        Slot::GlobalField(name, _) => format!("{name}_g"),
                        Slot::ReplicaField(name, _) => format!("{name}_r"),
                        Slot::Param(name, _) => name.clone(),
                    };
                    witness.push((name, val));
                }
                witness.extend(trace);
                return Ok(EnumOutcome::Invalid(witness));
            }
            Err(e) => return Ok(EnumOutcome::Error(e)),
        }
        // odometer
        let mut i = 0;
        loop {
            if i == slots.len() {
                return Ok(EnumOutcome::Valid);
            }
            counters[i] += 1;
            if counters[i] < domains[i].len() {
                break;
            }
            counters[i] = 0;
            i += 1;
        }
        if slots.is_empty() {
            return Ok(EnumOutcome::Valid);
        }
    }
}

/// Evaluate, instantiating quantifiers by substitution and recording the
/// first falsifying instantiation along the failing path.
fn eval_trace(
    f: &Formula,
    v: &Valuation,
    quant_domain: &[Value],
    trace: &mut Vec<(String, Value)>,
) -> Result<bool, super::EvalError> {
    match f {
        Formula::Forall(name, sort, body) => {
            let domain: Vec<Value> = match sort {
                Sort::Int => quant_domain.to_vec(),
                Sort::Bool => vec![Value::Bool(false), Value::Bool(true)],
                other => return Err(super::EvalError::BadQuantifierSort(other.clone())),
            };
            for val in domain {
                let inst = instantiate_var(body, name, &val);
                let mut sub_trace = Vec::new();
                if !eval_trace(&inst, v, quant_domain, &mut sub_trace)? {
                    trace.push((name.clone(), val));
                    trace.extend(sub_trace);
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Formula::And(a, b) => {
            if !eval_trace(a, v, quant_domain, trace)? {
                return Ok(false);
            }
            eval_trace(b, v, quant_domain, trace)
        }
        Formula::Or(a, b) => {
            let mut ta = Vec::new();
            if eval_trace(a, v, quant_domain, &mut ta)? {
                return Ok(true);
            }
            if eval_trace(b, v, quant_domain, trace)? {
                return Ok(true);
            }
            Ok(false)
        }
        Formula::Implies(a, b) => {
            let mut ta = Vec::new();
            if !eval_trace(a, v, quant_domain, &mut ta)? {
                return Ok(true);
            }
            eval_trace(b, v, quant_domain, trace)
        }
        Formula::Not(a) => {
            let mut ta = Vec::new();
            Ok(!eval_trace(a, v, quant_domain, &mut ta)?)
        }
        leaf => v.eval_formula(leaf, quant_domain),
    }
}

/// Replace a bound variable with a literal, respecting inner shadowing.
fn instantiate_var(f: &Formula, name: &str, value: &Value) -> Formula {
    let lit = match value {
        Value::Int(n) => Term::Int(*n),
        Value::Bool(b) => Term::Bool(*b),
        Value::Arr(_) => return f.clone(), // never: quantifiers are scalar
    };
    inst_formula(f, name, &lit)
}

fn inst_formula(f: &Formula, name: &str, lit: &Term) -> Formula {
    match f {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Cmp(op, a, b) => {
            Formula::Cmp(*op, inst_term(a, name, lit), inst_term(b, name, lit))
        }
        Formula::Not(a) => Formula::not(inst_formula(a, name, lit)),
        Formula::And(a, b) => Formula::and(inst_formula(a, name, lit), inst_formula(b, name, lit)),
        Formula::Or(a, b) => Formula::or(inst_formula(a, name, lit), inst_formula(b, name, lit)),
        Formula::Implies(a, b) => {
            Formula::implies(inst_formula(a, name, lit), inst_formula(b, name, lit))
        }
        Formula::Forall(n, s, body) => {
            if n == name {
                Formula::Forall(n.clone(), s.clone(), body.clone())
            } else {
                Formula::forall(n.clone(), s.clone(), inst_formula(body, name, lit))
            }
        }
    }
}

fn inst_term(t: &Term, name: &str, lit: &Term) -> Term {
    match t {
        Term::Var(n, _) if n == name => lit.clone(),
        Term::Int(_) | Term::Bool(_) | Term::Field(..) | Term::Param(..) | Term::Var(..) => {
            t.clone()
        }
        Term::Add(a, b) => Term::add(inst_term(a, name, lit), inst_term(b, name, lit)),
        Term::Sub(a, b) => Term::sub(inst_term(a, name, lit), inst_term(b, name, lit)),
        Term::Mul(c, a) => Term::mul(*c, inst_term(a, name, lit)),
        Term::Select(a, i) => Term::select(inst_term(a, name, lit), inst_term(i, name, lit)),
        Term::Store(a, i, v) => Term::store(
            inst_term(a, name, lit),
            inst_term(i, name, lit),
            inst_term(v, name, lit),
        ),
        Term::Ite(c, a, b) => Term::ite(
            inst_formula(c, name, lit),
            inst_term(a, name, lit),
            inst_term(b, name, lit),
        ),
    }
}
