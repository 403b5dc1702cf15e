use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Propositional formula over feature names.
///
/// Cross-tree constraints only use `Var`, `Not`, `And`, `Or` and `Implies`;
/// `Iff` and `Const` appear in the encoding produced by
/// [`FeatureModel::to_formula`](super::FeatureModel::to_formula).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Const(bool),
    Var(String),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn var(name: impl Into<String>) -> Self {
        Formula::Var(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    /// Conjunction; a singleton collapses to its operand and an empty list is `true`.
    pub fn and(mut items: Vec<Formula>) -> Self {
        match items.len() {
            0 => Formula::Const(true),
            1 => items.pop().unwrap(),
            _ => Formula::And(items),
        }
    }

    /// Disjunction; a singleton collapses to its operand and an empty list is `false`.
    pub fn or(mut items: Vec<Formula>) -> Self {
        match items.len() {
            0 => Formula::Const(false),
            1 => items.pop().unwrap(),
            _ => Formula::Or(items),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// At least one and at most one of `items` holds.
    pub fn exactly_one(items: &[Formula]) -> Self {
        let mut parts = vec![Formula::or(items.to_vec())];
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                parts.push(Formula::not(Formula::And(vec![a.clone(), b.clone()])));
            }
        }
        Formula::and(parts)
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Formula::Const(_) => {}
            Formula::Var(v) => {
                out.insert(v.as_str());
            }
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_vars(out)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Evaluate with a lookup; unknown variables are false.
    pub fn eval_with(&self, value: &dyn Fn(&str) -> bool) -> bool {
        match self {
            Formula::Const(b) => *b,
            Formula::Var(v) => value(v),
            Formula::Not(f) => !f.eval_with(value),
            Formula::And(fs) => fs.iter().all(|f| f.eval_with(value)),
            Formula::Or(fs) => fs.iter().any(|f| f.eval_with(value)),
            Formula::Implies(a, b) => !a.eval_with(value) || b.eval_with(value),
            Formula::Iff(a, b) => a.eval_with(value) == b.eval_with(value),
        }
    }

    pub fn eval(&self, assignment: &BTreeMap<String, bool>) -> bool {
        self.eval_with(&|v| assignment.get(v).copied().unwrap_or(false))
    }

    /// True when the formula only uses the operators allowed in cross-tree constraints.
    pub fn is_constraint_form(&self) -> bool {
        match self {
            Formula::Const(_) | Formula::Iff(..) => false,
            Formula::Var(_) => true,
            Formula::Not(f) => f.is_constraint_form(),
            Formula::And(fs) | Formula::Or(fs) => {
                fs.len() >= 2 && fs.iter().all(Formula::is_constraint_form)
            }
            Formula::Implies(a, b) => a.is_constraint_form() && b.is_constraint_form(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Const(_) | Formula::Var(_) | Formula::Not(_) => 4,
            Formula::And(_) => 3,
            Formula::Or(_) => 2,
            Formula::Implies(..) => 1,
            Formula::Iff(..) => 0,
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }

    pub(crate) fn compile(&self, index: &dyn Fn(&str) -> Option<u32>) -> Compiled {
        match self {
            Formula::Const(b) => Compiled::Const(*b),
            Formula::Var(v) => match index(v) {
                Some(bit) => Compiled::Var(1u64 << bit),
                None => Compiled::Const(false),
            },
            Formula::Not(x) => Compiled::Not(Box::new(x.compile(index))),
            Formula::And(xs) => Compiled::And(xs.iter().map(|x| x.compile(index)).collect()),
            Formula::Or(xs) => Compiled::Or(xs.iter().map(|x| x.compile(index)).collect()),
            Formula::Implies(a, b) => {
                Compiled::Implies(Box::new(a.compile(index)), Box::new(b.compile(index)))
            }
            Formula::Iff(a, b) => {
                Compiled::Iff(Box::new(a.compile(index)), Box::new(b.compile(index)))
            }
        }
    }
}

/// Prints in the constraint syntax of `featuremodel.afm`: `not`, `and`, `or`,
/// `implies` (tightest to loosest), with parentheses only where needed for
/// the tree to re-parse identically. `Iff` prints as `iff` and constants as
/// `true`/`false`; neither is accepted back by the constraint parser.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Const(b) => write!(f, "{b}"),
            Formula::Var(v) => f.write_str(v),
            Formula::Not(x) => {
                f.write_str("not ")?;
                x.fmt_operand(f, 4)
            }
            Formula::And(xs) | Formula::Or(xs) => {
                let (op, prec) = if matches!(self, Formula::And(_)) {
                    (" and ", 3)
                } else {
                    (" or ", 2)
                };
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(op)?;
                    }
                    // operands of the same operator are always parenthesised so that
                    // nesting is preserved through a re-parse
                    x.fmt_operand(f, prec + 1)?;
                }
                Ok(())
            }
            Formula::Implies(a, b) => {
                a.fmt_operand(f, 2)?;
                f.write_str(" implies ")?;
                b.fmt_operand(f, 1)
            }
            Formula::Iff(a, b) => {
                a.fmt_operand(f, 1)?;
                f.write_str(" iff ")?;
                b.fmt_operand(f, 1)
            }
        }
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        super::afm::parse_constraint(&text).map_err(serde::de::Error::custom)
    }
}

/// Formula with variables replaced by bit masks over a `u64` assignment.
#[derive(Clone, Debug)]
pub(crate) enum Compiled {
    Const(bool),
    Var(u64),
    Not(Box<Compiled>),
    And(Vec<Compiled>),
    Or(Vec<Compiled>),
    Implies(Box<Compiled>, Box<Compiled>),
    Iff(Box<Compiled>, Box<Compiled>),
}

impl Compiled {
    #[inline]
    pub(crate) fn eval(&self, mask: u64) -> bool {
        match self {
            Compiled::Const(b) => *b,
            Compiled::Var(bit) => mask & bit != 0,
            Compiled::Not(x) => !x.eval(mask),
            Compiled::And(xs) => xs.iter().all(|x| x.eval(mask)),
            Compiled::Or(xs) => xs.iter().any(|x| x.eval(mask)),
            Compiled::Implies(a, b) => !a.eval(mask) || b.eval(mask),
            Compiled::Iff(a, b) => a.eval(mask) == b.eval(mask),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Formula {
        Formula::var(s)
    }

    #[test]
    fn display_uses_minimal_parentheses() {
        let f = Formula::implies(Formula::And(vec![v("a"), Formula::not(v("b"))]), v("c"));
        assert_eq!(f.to_string(), "a and not b implies c");
        let g = Formula::not(Formula::Or(vec![v("a"), v("b")]));
        assert_eq!(g.to_string(), "not (a or b)");
        let h = Formula::implies(Formula::implies(v("a"), v("b")), v("c"));
        assert_eq!(h.to_string(), "(a implies b) implies c");
        let nested = Formula::And(vec![Formula::And(vec![v("a"), v("b")]), v("c")]);
        assert_eq!(nested.to_string(), "(a and b) and c");
    }

    #[test]
    fn exactly_one_truth_table() {
        let f = Formula::exactly_one(&[v("a"), v("b"), v("c")]);
        for mask in 0u32..8 {
            let m: BTreeMap<String, bool> = ["a", "b", "c"]
                .iter()
                .enumerate()
                .map(|(i, n)| (n.to_string(), mask & (1 << i) != 0))
                .collect();
            assert_eq!(f.eval(&m), mask.count_ones() == 1, "mask {mask}");
        }
    }

    #[test]
    fn compiled_matches_tree_eval() {
        let f = Formula::iff(v("a"), Formula::Or(vec![v("b"), Formula::not(v("c"))]));
        let names = ["a", "b", "c"];
        let c = f.compile(&|n| names.iter().position(|x| *x == n).map(|i| i as u32));
        for mask in 0u64..8 {
            let m: BTreeMap<String, bool> = names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.to_string(), mask & (1 << i) != 0))
                .collect();
            assert_eq!(c.eval(mask), f.eval(&m));
        }
    }
}
