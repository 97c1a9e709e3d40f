//! Concrete evaluation of terms and formulas under a valuation.

use super::{Cmp, Formula, Sort, Term, Value};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("no value for field `{0}` on the {1} side")]
    MissingField(String, &'static str),
    #[error("no value for parameter `{0}`")]
    MissingParam(String),
    #[error("unbound variable `{0}` during evaluation")]
    UnboundVar(String),
    #[error("array index {index} out of bounds (length {len})")]
    IndexOutOfBounds { index: i64, len: usize },
    #[error("value of wrong sort where {0} was expected")]
    WrongSort(&'static str),
    #[error("universal quantifier over sort {0} cannot be enumerated")]
    BadQuantifierSort(Sort),
}

/// Concrete values for the two store sides and the free parameters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Valuation {
    pub global: BTreeMap<String, Value>,
    pub replica: BTreeMap<String, Value>,
    pub params: BTreeMap<String, Value>,
}

impl Valuation {
    pub fn new() -> Valuation {
        Valuation::default()
    }

    /// Values quantified variables range over when a formula with `Forall`
    /// nodes is evaluated concretely (effect-parameter domains).
    pub fn eval_formula(&self, f: &Formula, quant_domain: &[Value]) -> Result<bool, EvalError> {
        let mut bound = Vec::new();
        eval_formula(f, self, quant_domain, &mut bound)
    }

    pub fn eval_term(&self, t: &Term) -> Result<Value, EvalError> {
        let mut bound = Vec::new();
        // Quantifiers cannot occur inside terms except via Ite conditions,
        // which share the formula evaluator with an empty domain.
        eval_term(t, self, &[], &mut bound)
    }
}

fn eval_term(
    t: &Term,
    v: &Valuation,
    quant_domain: &[Value],
    bound: &mut Vec<(String, Value)>,
) -> Result<Value, EvalError> {
    match t {
        Term::Int(n) => Ok(Value::Int(*n)),
        Term::Bool(b) => Ok(Value::Bool(*b)),
        Term::Field(side, name) => {
            let (map, label) = match side {
                super::Side::Global => (&v.global, "global"),
                super::Side::Replica => (&v.replica, "replica"),
            };
            map.get(name)
                .cloned()
                .ok_or_else(|| EvalError::MissingField(name.clone(), label))
        }
        Term::Param(name, _) => v
            .params
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::MissingParam(name.clone())),
        Term::Var(name, _) => bound
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, val)| val.clone())
            .ok_or_else(|| EvalError::UnboundVar(name.clone())),
        Term::Add(a, b) => {
            let x = int_of(eval_term(a, v, quant_domain, bound)?)?;
            let y = int_of(eval_term(b, v, quant_domain, bound)?)?;
            Ok(Value::Int(x.wrapping_add(y)))
        }
        Term::Sub(a, b) => {
            let x = int_of(eval_term(a, v, quant_domain, bound)?)?;
            let y = int_of(eval_term(b, v, quant_domain, bound)?)?;
            Ok(Value::Int(x.wrapping_sub(y)))
        }
        Term::Mul(c, a) => {
            let x = int_of(eval_term(a, v, quant_domain, bound)?)?;
            Ok(Value::Int(c.wrapping_mul(x)))
        }
        Term::Select(a, i) => {
            let arr = arr_of(eval_term(a, v, quant_domain, bound)?)?;
            let idx = int_of(eval_term(i, v, quant_domain, bound)?)?;
            if idx < 0 || idx as usize >= arr.len() {
                return Err(EvalError::IndexOutOfBounds {
                    index: idx,
                    len: arr.len(),
                });
            }
            Ok(Value::Int(arr[idx as usize]))
        }
        Term::Store(a, i, val) => {
            let mut arr = arr_of(eval_term(a, v, quant_domain, bound)?)?;
            let idx = int_of(eval_term(i, v, quant_domain, bound)?)?;
            if idx < 0 || idx as usize >= arr.len() {
                return Err(EvalError::IndexOutOfBounds {
                    index: idx,
                    len: arr.len(),
                });
            }
            let x = int_of(eval_term(val, v, quant_domain, bound)?)?;
            arr[idx as usize] = x;
            Ok(Value::Arr(arr))
        }
        Term::Ite(c, a, b) => {
            if eval_formula(c, v, quant_domain, bound)? {
                eval_term(a, v, quant_domain, bound)
            } else {
                eval_term(b, v, quant_domain, bound)
            }
        }
    }
}

fn eval_formula(
    f: &Formula,
    v: &Valuation,
    quant_domain: &[Value],
    bound: &mut Vec<(String, Value)>,
) -> Result<bool, EvalError> {
    match f {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        Formula::Cmp(op, a, b) => {
            let x = eval_term(a, v, quant_domain, bound)?;
            let y = eval_term(b, v, quant_domain, bound)?;
            match op {
                Cmp::Eq => Ok(x == y),
                _ => {
                    let x = int_of(x)?;
                    let y = int_of(y)?;
                    Ok(match op {
                        Cmp::Le => x <= y,
                        Cmp::Ge => x >= y,
                        Cmp::Lt => x < y,
                        Cmp::Gt => x > y,
                        Cmp::Eq => unreachable!(),
                    })
                }
            }
        }
        Formula::Not(a) => Ok(!eval_formula(a, v, quant_domain, bound)?),
        Formula::And(a, b) => Ok(eval_formula(a, v, quant_domain, bound)?
            && eval_formula(b, v, quant_domain, bound)?),
        Formula::Or(a, b) => Ok(eval_formula(a, v, quant_domain, bound)?
            || eval_formula(b, v, quant_domain, bound)?),
        Formula::Implies(a, b) => Ok(!eval_formula(a, v, quant_domain, bound)?
            || eval_formula(b, v, quant_domain, bound)?),
        Formula::Forall(name, sort, body) => {
            let domain: Vec<Value> = match sort {
                Sort::Int => quant_domain.to_vec(),
                Sort::Bool => vec![Value::Bool(false), Value::Bool(true)],
                other => return Err(EvalError::BadQuantifierSort(other.clone())),
            };
            for val in domain {
                bound.push((name.clone(), val));
                let holds = eval_formula(body, v, quant_domain, bound)?;
                bound.pop();
                if !holds {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

fn int_of(v: Value) -> Result<i64, EvalError> {
    v.as_int().ok_or(EvalError::WrongSort("int"))
}

fn arr_of(v: Value) -> Result<Vec<i64>, EvalError> {
    match v {
        Value::Arr(a) => Ok(a),
        _ => Err(EvalError::WrongSort("array")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::Side;

    #[test]
    fn evaluates_guard_atoms() {
        let le = Formula::ge(
            Term::field(Side::Global, "val"),
            Term::field(Side::Replica, "val"),
        );
        let mut v = Valuation::new();
        v.global.insert("val".into(), Value::Int(100));
        v.replica.insert("val".into(), Value::Int(90));
        assert!(v.eval_formula(&le, &[]).unwrap());
        v.global.insert("val".into(), Value::Int(80));
        assert!(!v.eval_formula(&le, &[]).unwrap());
    }

    #[test]
    fn select_out_of_bounds_is_an_error() {
        let t = Term::select(Term::field(Side::Global, "a"), Term::int(12));
        let mut v = Valuation::new();
        v.global.insert("a".into(), Value::Arr(vec![0; 10]));
        assert_eq!(
            v.eval_term(&t),
            Err(EvalError::IndexOutOfBounds { index: 12, len: 10 })
        );
    }

    #[test]
    fn forall_ranges_over_domain() {
        // forall n. n >= 0 over domain [0,1,2] holds; over [-1,0] fails.
        let f = Formula::forall(
            "n",
            Sort::Int,
            Formula::ge(Term::var("n", Sort::Int), Term::int(0)),
        );
        let v = Valuation::new();
        let dom: Vec<Value> = [0, 1, 2].iter().map(|n| Value::Int(*n)).collect();
        assert!(v.eval_formula(&f, &dom).unwrap());
        let dom2: Vec<Value> = [-1, 0].iter().map(|n| Value::Int(*n)).collect();
        assert!(!v.eval_formula(&f, &dom2).unwrap());
    }
}
