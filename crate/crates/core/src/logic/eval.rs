use std::collections::{HashMap, VecDeque};

use super::{Assignment, Formula, LogicError, TruthValue, VarId};

pub const DEFAULT_MAX_VARIABLES: usize = 12;

/// How evaluation treats a variable absent from the assignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MissingVariable {
    #[default]
    Strict,
    /// Treat missing variables as `Maybe`.
    Lenient,
}

fn lookup(a: &Assignment, id: &VarId, missing: MissingVariable) -> Result<TruthValue, LogicError> {
    match (a.value(id), missing) {
        (Some(v), _) => Ok(v),
        (None, MissingVariable::Lenient) => Ok(TruthValue::Maybe),
        (None, MissingVariable::Strict) => Err(LogicError::UnknownVariable(id.clone())),
    }
}

/// Evaluates `f` under `a`; every variable must be assigned.
pub fn evaluate(f: &Formula, a: &Assignment) -> Result<TruthValue, LogicError> {
    evaluate_with(f, a, MissingVariable::Strict)
}

pub fn evaluate_with(
    f: &Formula,
    a: &Assignment,
    missing: MissingVariable,
) -> Result<TruthValue, LogicError> {
    Ok(match f {
        Formula::Var(id) => lookup(a, id, missing)?,
        Formula::Not(inner) => !evaluate_with(inner, a, missing)?,
        Formula::And(l, r) => evaluate_with(l, a, missing)?.and(evaluate_with(r, a, missing)?),
        Formula::Or(l, r) => evaluate_with(l, a, missing)?.or(evaluate_with(r, a, missing)?),
    })
}

/// Leaves plus operator nodes; parentheses are not symbols.
pub fn symbol_count(f: &Formula) -> usize {
    match f {
        Formula::Var(_) => 1,
        Formula::Not(inner) => 1 + symbol_count(inner),
        Formula::And(l, r) | Formula::Or(l, r) => 1 + symbol_count(l) + symbol_count(r),
    }
}

/// Three-valued equivalence by exhaustive enumeration of `3^n` assignments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Equivalence {
    pub max_variables: usize,
}

impl Default for Equivalence {
    fn default() -> Self {
        Equivalence {
            max_variables: DEFAULT_MAX_VARIABLES,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Load(usize),
    Not,
    And,
    Or,
}

fn compile(f: &Formula, index: &HashMap<&VarId, usize>, out: &mut Vec<Op>) {
    match f {
        Formula::Var(id) => out.push(Op::Load(index[id])),
        Formula::Not(inner) => {
            compile(inner, index, out);
            out.push(Op::Not);
        }
        Formula::And(l, r) => {
            compile(l, index, out);
            compile(r, index, out);
            out.push(Op::And);
        }
        Formula::Or(l, r) => {
            compile(l, index, out);
            compile(r, index, out);
            out.push(Op::Or);
        }
    }
}

fn run(program: &[Op], values: &[TruthValue], stack: &mut Vec<TruthValue>) -> TruthValue {
    stack.clear();
    for op in program {
        match *op {
            Op::Load(i) => stack.push(values[i]),
            Op::Not => {
                let v = stack.pop().expect("operand");
                stack.push(!v);
            }
            Op::And | Op::Or => {
                let r = stack.pop().expect("operand");
                let l = stack.pop().expect("operand");
                stack.push(if matches!(op, Op::And) { l.and(r) } else { l.or(r) });
            }
        }
    }
    stack.pop().expect("result")
}

impl Equivalence {
    pub fn check(&self, f1: &Formula, f2: &Formula) -> Result<bool, LogicError> {
        if f1 == f2 {
            return Ok(true);
        }
        let mut vars = f1.variables();
        vars.extend(f2.variables());
        vars.sort();
        vars.dedup();
        if vars.len() > self.max_variables {
            return Err(LogicError::TooManyVariables {
                count: vars.len(),
                cap: self.max_variables,
            });
        }
        let index: HashMap<&VarId, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let (mut p1, mut p2) = (Vec::new(), Vec::new());
        compile(f1, &index, &mut p1);
        compile(f2, &index, &mut p2);

        // Odometer over {F, m, T}^n.
        let mut digits = vec![0usize; vars.len()];
        let mut values = vec![TruthValue::False; vars.len()];
        let mut stack = Vec::new();
        loop {
            if run(&p1, &values, &mut stack) != run(&p2, &values, &mut stack) {
                return Ok(false);
            }
            let mut pos = 0;
            loop {
                if pos == digits.len() {
                    return Ok(true);
                }
                digits[pos] += 1;
                if digits[pos] < 3 {
                    values[pos] = TruthValue::ALL[digits[pos]];
                    break;
                }
                digits[pos] = 0;
                values[pos] = TruthValue::ALL[0];
                pos += 1;
            }
        }
    }
}

/// Whether `f1` and `f2` agree under every three-valued assignment of
/// their variables, with the default variable cap.
pub fn equivalent(f1: &Formula, f2: &Formula) -> Result<bool, LogicError> {
    Equivalence::default().check(f1, f2)
}

/// Picks the question to ask next for a formula that evaluates to `Maybe`.
///
/// Sub-formulas that do not evaluate to `Maybe` are pruned, then the
/// remaining tree is walked breadth-first (left to right within a level)
/// and the first variable reached is returned.
pub fn select_follow_up(f: &Formula, a: &Assignment) -> Result<VarId, LogicError> {
    select_follow_up_with(f, a, MissingVariable::Strict)
}

pub fn select_follow_up_with(
    f: &Formula,
    a: &Assignment,
    missing: MissingVariable,
) -> Result<VarId, LogicError> {
    let root = evaluate_with(f, a, missing)?;
    if root != TruthValue::Maybe {
        return Err(LogicError::NotMaybe(root));
    }
    let mut queue = VecDeque::from([f]);
    while let Some(node) = queue.pop_front() {
        match node {
            Formula::Var(id) => return Ok(id.clone()),
            Formula::Not(inner) => queue.push_back(inner),
            Formula::And(l, r) | Formula::Or(l, r) => {
                for child in [l, r] {
                    if evaluate_with(child, a, missing)? == TruthValue::Maybe {
                        queue.push_back(child);
                    }
                }
            }
        }
    }
    unreachable!("a Maybe node always has a Maybe descendant leaf")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse;
    use TruthValue::*;

    fn v(name: &str) -> Formula {
        Formula::var(name)
    }

    fn assign(pairs: &[(&str, TruthValue)]) -> Assignment {
        Assignment::from_values(pairs.iter().map(|(n, t)| (VarId::new(*n).unwrap(), *t)))
    }

    #[test]
    fn table_rows() {
        let a = assign(&[("A", True), ("B", Maybe)]);
        assert_eq!(evaluate(&v("A").and(v("B")), &a).unwrap(), Maybe);
        let a = assign(&[("A", False), ("B", Maybe)]);
        assert_eq!(evaluate(&v("A").or(v("B")), &a).unwrap(), Maybe);
        let a = assign(&[("A", Maybe)]);
        assert_eq!(evaluate(&v("A").negate(), &a).unwrap(), Maybe);
    }

    #[test]
    fn worked_example_evaluates_to_maybe() {
        let f = parse("Q0 and (Q1 or Q2)").unwrap();
        let a = assign(&[("Q0", True), ("Q1", Maybe), ("Q2", Maybe)]);
        assert_eq!(evaluate(&f, &a).unwrap(), Maybe);
    }

    #[test]
    fn missing_variables() {
        let f = v("Q0").or(v("Q1"));
        let a = assign(&[("Q0", False)]);
        assert_eq!(
            evaluate(&f, &a).unwrap_err(),
            LogicError::UnknownVariable(VarId::new("Q1").unwrap())
        );
        assert_eq!(evaluate_with(&f, &a, MissingVariable::Lenient).unwrap(), Maybe);
    }

    #[test]
    fn equivalence_examples() {
        let p = |s| parse(s).unwrap();
        assert!(equivalent(&p("not (A and B)"), &p("not A or not B")).unwrap());
        assert!(!equivalent(&p("not (A and B)"), &p("A and B")).unwrap());
        assert!(!equivalent(&p("A or not A"), &p("B or not B")).unwrap());
        assert!(equivalent(&p("A"), &p("A and A")).unwrap());
        // Absorption holds in K3 as well.
        assert!(equivalent(&p("A or A and B"), &p("A")).unwrap());
    }

    #[test]
    fn equivalence_cap() {
        let wide = Formula::conjunction((0..13).map(VarId::question)).unwrap();
        let err = equivalent(&wide, &v("Q0")).unwrap_err();
        assert_eq!(err, LogicError::TooManyVariables { count: 13, cap: 12 });
        let narrow = Equivalence { max_variables: 2 };
        assert!(narrow.check(&v("A").and(v("B")), &v("B").and(v("A"))).unwrap());
        assert!(narrow.check(&v("A").and(v("B")), &v("C")).is_err());
    }

    #[test]
    fn symbol_counts() {
        assert_eq!(symbol_count(&v("Q0")), 1);
        assert_eq!(symbol_count(&v("A").and(v("B")).negate()), 4);
        assert_eq!(symbol_count(&v("A").negate().or(v("B").negate())), 5);
    }

    #[test]
    fn follow_up_selection() {
        let f = parse("Q0 and (Q1 or Q2)").unwrap();
        let a = assign(&[("Q0", True), ("Q1", Maybe), ("Q2", Maybe)]);
        assert_eq!(select_follow_up(&f, &a).unwrap().as_str(), "Q1");

        let f = parse("Q0 or Q1").unwrap();
        let a = assign(&[("Q0", False), ("Q1", Maybe)]);
        assert_eq!(select_follow_up(&f, &a).unwrap().as_str(), "Q1");

        let f = parse("Q0 and Q1").unwrap();
        assert_eq!(select_follow_up(&f, &a).unwrap_err(), LogicError::NotMaybe(False));
    }

    #[test]
    fn follow_up_prefers_shallow_leaves() {
        // Q3 sits one level higher than Q1/Q2 and wins despite being rightmost.
        let f = parse("(Q0 and (Q1 or Q2)) or Q3").unwrap();
        let a = assign(&[("Q0", True), ("Q1", Maybe), ("Q2", Maybe), ("Q3", Maybe)]);
        assert_eq!(select_follow_up(&f, &a).unwrap().as_str(), "Q3");

        let f = parse("not (Q0 or Q1)").unwrap();
        let a = assign(&[("Q0", False), ("Q1", Maybe)]);
        assert_eq!(select_follow_up(&f, &a).unwrap().as_str(), "Q1");
    }
}
