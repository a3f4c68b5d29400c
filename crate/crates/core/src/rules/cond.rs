//! Boolean conditions over state attributes.

use std::cmp::Ordering;
use std::fmt;

use crate::usecase::{AttrValue, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Text(String),
    Number(f64),
    Bool(bool),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Text(s) => write_quoted(f, s),
            Literal::Number(n) => write!(f, "{n}"),
            Literal::Bool(b) => write!(f, "{b}"),
        }
    }
}

pub(crate) fn write_quoted(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
    Not(Box<Condition>),
    Has(String),
    Compare {
        attr: String,
        op: CmpOp,
        value: Literal,
    },
}

impl Condition {
    pub fn and(self, rhs: Condition) -> Condition {
        Condition::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Condition) -> Condition {
        Condition::Or(Box::new(self), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Condition {
        Condition::Not(Box::new(self))
    }

    pub fn has(attr: impl Into<String>) -> Condition {
        Condition::Has(attr.into())
    }

    pub fn cmp(attr: impl Into<String>, op: CmpOp, value: Literal) -> Condition {
        Condition::Compare {
            attr: attr.into(),
            op,
            value,
        }
    }

    /// Evaluates against a state. Missing attributes make `has` and every
    /// comparison false; so do comparisons between values of different types
    /// and ordering comparisons on booleans.
    pub fn eval(&self, state: &State) -> bool {
        match self {
            Condition::And(a, b) => a.eval(state) && b.eval(state),
            Condition::Or(a, b) => a.eval(state) || b.eval(state),
            Condition::Not(c) => !c.eval(state),
            Condition::Has(attr) => state.attributes.contains_key(attr),
            Condition::Compare { attr, op, value } => state
                .attributes
                .get(attr)
                .and_then(|actual| compare(actual, value, *op))
                .unwrap_or(false),
        }
    }

    /// Attribute names mentioned anywhere in the condition.
    pub fn attributes(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_attributes(&mut out);
        out
    }

    fn collect_attributes<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Condition::And(a, b) | Condition::Or(a, b) => {
                a.collect_attributes(out);
                b.collect_attributes(out);
            }
            Condition::Not(c) => c.collect_attributes(out),
            Condition::Has(attr) | Condition::Compare { attr, .. } => out.push(attr),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Condition::Or(..) => 1,
            Condition::And(..) => 2,
            Condition::Not(..) => 3,
            Condition::Has(..) | Condition::Compare { .. } => 4,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

fn compare(actual: &AttrValue, expected: &Literal, op: CmpOp) -> Option<bool> {
    let ord = match (actual, expected) {
        (AttrValue::Number(a), Literal::Number(b)) => a.partial_cmp(b)?,
        (AttrValue::Text(a), Literal::Text(b)) => a.as_str().cmp(b.as_str()),
        (AttrValue::Bool(a), Literal::Bool(b)) => match op {
            CmpOp::Eq | CmpOp::Ne => a.cmp(b),
            _ => return None,
        },
        _ => return None,
    };
    Some(op.holds(ord))
}

// Binary operators are left-associative, so a right operand of the same
// precedence needs parentheses to reparse to the same tree.
impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Or(a, b) => {
                a.fmt_child(f, 1)?;
                f.write_str(" or ")?;
                b.fmt_child(f, 2)
            }
            Condition::And(a, b) => {
                a.fmt_child(f, 2)?;
                f.write_str(" and ")?;
                b.fmt_child(f, 3)
            }
            Condition::Not(c) => {
                f.write_str("not ")?;
                c.fmt_child(f, 3)
            }
            Condition::Has(attr) => write!(f, "has({attr})"),
            Condition::Compare { attr, op, value } => write!(f, "{attr} {} {value}", op.as_str()),
        }
    }
}
