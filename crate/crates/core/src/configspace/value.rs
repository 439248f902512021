use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

/// Parameter kind. Categorical domains are encoded by alphabetical index,
/// numeric kinds pass through as numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Categorical,
    Integer,
    Ordinal,
}

impl ParamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamKind::Categorical => "categorical",
            ParamKind::Integer => "integer",
            ParamKind::Ordinal => "ordinal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "categorical" => Some(ParamKind::Categorical),
            "integer" => Some(ParamKind::Integer),
            "ordinal" | "ordinal-numeric" => Some(ParamKind::Ordinal),
            _ => None,
        }
    }

    pub fn is_numeric(self) -> bool {
        !matches!(self, ParamKind::Categorical)
    }
}

/// A single parameter value. `NotApplicable` marks an inactive conditional
/// parameter.
#[derive(Clone, Debug)]
pub enum Value {
    Cat(String),
    Int(i64),
    Num(f64),
    NotApplicable,
}

pub const NA_TOKEN: &str = "NA";

impl Value {
    pub fn cat(s: impl Into<String>) -> Self {
        Value::Cat(s.into())
    }

    pub fn is_na(&self) -> bool {
        matches!(self, Value::NotApplicable)
    }

    /// Numeric view of integer and ordinal values.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.as_str()? {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        }
    }

    /// Parses an untyped token (e.g. a CSV cell). Integers and floats are
    /// recognized by shape, anything else is categorical.
    pub fn parse_untyped(s: &str) -> Value {
        if s == NA_TOKEN {
            return Value::NotApplicable;
        }
        if let Ok(i) = s.parse::<i64>() {
            return Value::Int(i);
        }
        let looks_float = s.contains(['.', 'e', 'E']) || s.ends_with("inf") || s == "NaN";
        if looks_float {
            if let Ok(x) = s.parse::<f64>() {
                return Value::Num(x);
            }
        }
        Value::Cat(s.to_string())
    }

    /// Parses a token as a value of the given kind.
    pub fn parse_as(s: &str, kind: ParamKind) -> Option<Value> {
        if s == NA_TOKEN {
            return Some(Value::NotApplicable);
        }
        match kind {
            ParamKind::Categorical => Some(Value::Cat(s.to_string())),
            ParamKind::Integer => s.parse::<i64>().ok().map(Value::Int),
            ParamKind::Ordinal => s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Value::Num),
        }
    }

    /// Whether this value is of the given kind.
    pub fn fits_kind(&self, kind: ParamKind) -> bool {
        matches!(
            (self, kind),
            (Value::Cat(_), ParamKind::Categorical)
                | (Value::Int(_), ParamKind::Integer)
                | (Value::Num(_), ParamKind::Ordinal)
        )
    }

    /// Total order used for constraint comparisons: numeric values compare
    /// numerically, categorical values lexicographically.
    pub fn partial_cmp_value(&self, other: &Value) -> Option<Ordering> {
        match (self.as_f64(), other.as_f64()) {
            (Some(a), Some(b)) => a.partial_cmp(&b),
            _ => match (self, other) {
                (Value::Cat(a), Value::Cat(b)) => Some(a.cmp(b)),
                _ => None,
            },
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Cat(a), Value::Cat(b)) => a == b,
            (Value::NotApplicable, Value::NotApplicable) => true,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Num(a), Value::Num(b)) => a.to_bits() == b.to_bits(),
            (Value::Int(a), Value::Num(b)) | (Value::Num(b), Value::Int(a)) => *a as f64 == *b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Cat(s) => {
                0u8.hash(state);
                s.hash(state);
            }
            Value::NotApplicable => 1u8.hash(state),
            // Int and Num that compare equal must hash equal.
            Value::Int(i) => {
                2u8.hash(state);
                (*i as f64).to_bits().hash(state);
            }
            Value::Num(x) => {
                2u8.hash(state);
                x.to_bits().hash(state);
            }
        }
    }
}

/// Canonical text form: integers plainly, floats with a decimal point or
/// exponent (`0.75`, `1.0`, `1e-8`), categories verbatim, `NA` for inactive.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Cat(s) => f.write_str(s),
            Value::Int(i) => write!(f, "{i}"),
            Value::Num(x) => write!(f, "{x:?}"),
            Value::NotApplicable => f.write_str(NA_TOKEN),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untyped_parsing_roundtrips_canonical_text() {
        for v in [Value::Int(10), Value::Num(1.0), Value::Num(0.75), Value::Num(1e-8), Value::cat("exp"), Value::NotApplicable] {
            let s = v.to_string();
            assert_eq!(Value::parse_untyped(&s), v, "{s}");
            assert_eq!(Value::parse_untyped(&s).to_string(), s);
        }
        assert_eq!(Value::parse_untyped("true"), Value::cat("true"));
    }

    #[test]
    fn numeric_comparison_crosses_int_and_float() {
        assert_eq!(Value::Int(4).partial_cmp_value(&Value::Num(4.5)), Some(Ordering::Less));
        assert_eq!(Value::Int(2), Value::Num(2.0));
        assert_eq!(Value::cat("a").partial_cmp_value(&Value::Int(1)), None);
    }
}
