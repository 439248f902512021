//! Conditions (activation rules) and cross-parameter constraints.
//!
//! Both use a small textual grammar:
//!
//! ```text
//! condition  := clause ( "&&" clause )*
//! clause     := NAME ("==" | "!=") LITERAL
//! constraint := NAME OP ( NAME | LITERAL )
//! OP         := "==" | "!=" | "<=" | "<" | ">=" | ">"
//! ```
//!
//! Tokens are separated by whitespace. Literals are parsed with the kind of
//! the parameter on the left-hand side.

use std::cmp::Ordering;
use std::fmt;

use super::value::{ParamKind, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Le,
    Lt,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "==" => CmpOp::Eq,
            "!=" => CmpOp::Ne,
            "<=" => CmpOp::Le,
            "<" => CmpOp::Lt,
            ">=" => CmpOp::Ge,
            ">" => CmpOp::Gt,
            _ => return None,
        })
    }

    /// Applies the operator. Ordering operators on incomparable values are false.
    pub fn holds(self, lhs: &Value, rhs: &Value) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            _ => match lhs.partial_cmp_value(rhs) {
                None => false,
                Some(ord) => match self {
                    CmpOp::Le => ord != Ordering::Greater,
                    CmpOp::Lt => ord == Ordering::Less,
                    CmpOp::Ge => ord != Ordering::Less,
                    CmpOp::Gt => ord == Ordering::Greater,
                    CmpOp::Eq | CmpOp::Ne => unreachable!(),
                },
            },
        }
    }
}

/// One equality/inequality test against another parameter's value.
#[derive(Clone, Debug, PartialEq)]
pub struct Clause {
    pub param: String,
    pub op: CmpOp,
    pub value: Value,
}

impl Clause {
    /// A clause on an inactive parameter never holds.
    pub fn holds(&self, actual: &Value) -> bool {
        !actual.is_na() && self.op.holds(actual, &self.value)
    }
}

/// Conjunction of clauses; the parameter is active iff all hold.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub clauses: Vec<Clause>,
}

impl Condition {
    pub fn referenced(&self) -> impl Iterator<Item = &str> {
        self.clauses.iter().map(|c| c.param.as_str())
    }

    /// Parses a condition; `kind_of` resolves referenced parameter kinds.
    pub fn parse(text: &str, kind_of: impl Fn(&str) -> Option<ParamKind>) -> Result<Self, String> {
        let mut clauses = Vec::new();
        for part in text.split("&&") {
            let toks: Vec<&str> = part.split_whitespace().collect();
            let [name, op, lit] = toks[..] else {
                return Err(format!("malformed clause `{}`", part.trim()));
            };
            let op = CmpOp::parse(op).filter(|o| matches!(o, CmpOp::Eq | CmpOp::Ne)).ok_or_else(|| {
                format!("condition operator must be == or !=, got `{op}`")
            })?;
            let kind = kind_of(name).ok_or_else(|| format!("condition references unknown parameter `{name}`"))?;
            let value =
                Value::parse_as(lit, kind).ok_or_else(|| format!("literal `{lit}` is not a valid {} value", kind.as_str()))?;
            clauses.push(Clause { param: name.to_string(), op, value });
        }
        Ok(Condition { clauses })
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{} {} {}", c.param, c.op.symbol(), c.value)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    Param(String),
    Literal(Value),
}

/// Cross-parameter predicate such as `mu <= lambda`. Holds vacuously when
/// either side is inactive.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub lhs: String,
    pub op: CmpOp,
    pub rhs: Operand,
}

impl Constraint {
    pub fn referenced(&self) -> impl Iterator<Item = &str> {
        let rhs = match &self.rhs {
            Operand::Param(p) => Some(p.as_str()),
            Operand::Literal(_) => None,
        };
        std::iter::once(self.lhs.as_str()).chain(rhs)
    }

    pub fn holds(&self, lookup: impl Fn(&str) -> Option<Value>) -> bool {
        let Some(lhs) = lookup(&self.lhs) else { return true };
        let rhs = match &self.rhs {
            Operand::Param(p) => match lookup(p) {
                Some(v) => v,
                None => return true,
            },
            Operand::Literal(v) => v.clone(),
        };
        if lhs.is_na() || rhs.is_na() {
            return true;
        }
        self.op.holds(&lhs, &rhs)
    }

    pub fn parse(text: &str, kind_of: impl Fn(&str) -> Option<ParamKind>) -> Result<Self, String> {
        let toks: Vec<&str> = text.split_whitespace().collect();
        let [lhs, op, rhs] = toks[..] else {
            return Err(format!("malformed constraint `{}`", text.trim()));
        };
        let op = CmpOp::parse(op).ok_or_else(|| format!("unknown operator `{op}`"))?;
        let kind = kind_of(lhs).ok_or_else(|| format!("constraint references unknown parameter `{lhs}`"))?;
        let rhs = if kind_of(rhs).is_some() {
            Operand::Param(rhs.to_string())
        } else {
            Operand::Literal(
                Value::parse_as(rhs, kind).ok_or_else(|| format!("`{rhs}` is neither a parameter nor a valid literal"))?,
            )
        };
        Ok(Constraint { lhs: lhs.to_string(), op, rhs })
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} ", self.lhs, self.op.symbol())?;
        match &self.rhs {
            Operand::Param(p) => f.write_str(p),
            Operand::Literal(v) => write!(f, "{v}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(name: &str) -> Option<ParamKind> {
        match name {
            "mu" | "lambda" => Some(ParamKind::Integer),
            "ref" => Some(ParamKind::Categorical),
            _ => None,
        }
    }

    #[test]
    fn constraint_parse_and_display() {
        let c = Constraint::parse("mu <= lambda", kinds).unwrap();
        assert_eq!(c.rhs, Operand::Param("lambda".into()));
        assert_eq!(c.to_string(), "mu <= lambda");
        let lit = Constraint::parse("lambda > 4", kinds).unwrap();
        assert_eq!(lit.rhs, Operand::Literal(Value::Int(4)));
        let look = |n: &str| match n {
            "mu" => Some(Value::Int(100)),
            "lambda" => Some(Value::Int(5)),
            _ => None,
        };
        assert!(!c.holds(look));
        assert!(lit.holds(look));
    }

    #[test]
    fn condition_parse_roundtrip() {
        let c = Condition::parse("ref != none && mu == 4", kinds).unwrap();
        assert_eq!(c.clauses.len(), 2);
        assert_eq!(Condition::parse(&c.to_string(), kinds).unwrap(), c);
        assert!(Condition::parse("ref < none", kinds).is_err());
        assert!(Condition::parse("ghost == 1", kinds).is_err());
    }

    #[test]
    fn clause_on_inactive_parameter_fails() {
        let cl = Clause { param: "ref".into(), op: CmpOp::Ne, value: Value::cat("none") };
        assert!(!cl.holds(&Value::NotApplicable));
        assert!(cl.holds(&Value::cat("best")));
    }
}
