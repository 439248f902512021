//! Space files.
//!
//! ```toml
//! family = "modcma"
//! constraints = ["mu <= lambda"]
//!
//! [[param]]
//! name = "lambda"
//! kind = "integer"            # categorical | integer | ordinal
//! domain = [5, 8, 10]
//! default = 8
//! condition = "covariance == true"   # optional, `&&`-joined clauses
//! ```
//!
//! Categorical domains are lists of strings, integer domains lists of
//! integers and ordinal domains lists of numbers. [`ConfigurationSpace::to_toml_string`]
//! writes the same grammar back, so parse/write round-trips losslessly.

use std::fmt::Write as _;
use std::path::Path;

use super::{Condition, ConfigurationSpace, Constraint, ParamKind, ParameterSpec, Value};
use crate::error::{Error, Result};

fn toml_value(v: &Value) -> String {
    match v {
        Value::Cat(s) => toml::Value::String(s.clone()).to_string(),
        Value::Int(i) => i.to_string(),
        Value::Num(x) => format!("{x:?}"),
        Value::NotApplicable => "\"NA\"".into(),
    }
}

fn parse_value(v: &toml::Value, kind: ParamKind, ctx: &str) -> Result<Value> {
    let out = match (kind, v) {
        (ParamKind::Categorical, toml::Value::String(s)) => Some(Value::Cat(s.clone())),
        (ParamKind::Categorical, toml::Value::Boolean(b)) => Some(Value::Cat(b.to_string())),
        (ParamKind::Integer, toml::Value::Integer(i)) => Some(Value::Int(*i)),
        (ParamKind::Ordinal, toml::Value::Integer(i)) => Some(Value::Num(*i as f64)),
        (ParamKind::Ordinal, toml::Value::Float(x)) if x.is_finite() => Some(Value::Num(*x)),
        _ => None,
    };
    out.ok_or_else(|| Error::parse(ctx, format!("`{v}` is not a valid {} value", kind.as_str())))
}

impl ConfigurationSpace {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let ctx = "space file";
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::parse(ctx, e.to_string()))?;
        let family = table
            .get("family")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::parse(ctx, "missing string field `family`"))?
            .to_string();
        let empty = Vec::new();
        let raw_params = match table.get("param") {
            None => &empty,
            Some(v) => v.as_array().ok_or_else(|| Error::parse(ctx, "`param` must be an array of tables"))?,
        };

        // Kinds first: conditions and constraints parse literals by kind.
        let mut kinds = Vec::new();
        for (i, rp) in raw_params.iter().enumerate() {
            let t = rp.as_table().ok_or_else(|| Error::parse(ctx, format!("param #{i} is not a table")))?;
            let name = t
                .get("name")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::parse(ctx, format!("param #{i} lacks a `name`")))?;
            let kind_s = t.get("kind").and_then(|v| v.as_str()).unwrap_or("categorical");
            let kind = ParamKind::parse(kind_s)
                .ok_or_else(|| Error::parse(format!("{ctx}, param `{name}`"), format!("unknown kind `{kind_s}`")))?;
            kinds.push((name.to_string(), kind));
        }
        let kind_of = |n: &str| kinds.iter().find(|(k, _)| k == n).map(|(_, kind)| *kind);

        let mut params = Vec::new();
        for (rp, (name, kind)) in raw_params.iter().zip(&kinds) {
            let t = rp.as_table().expect("checked above");
            let pctx = format!("{ctx}, param `{name}`");
            for key in t.keys() {
                if !matches!(key.as_str(), "name" | "kind" | "domain" | "default" | "condition") {
                    return Err(Error::parse(&pctx, format!("unknown field `{key}`")));
                }
            }
            let domain = t
                .get("domain")
                .and_then(|v| v.as_array())
                .ok_or_else(|| Error::parse(&pctx, "missing array field `domain`"))?
                .iter()
                .map(|v| parse_value(v, *kind, &pctx))
                .collect::<Result<Vec<_>>>()?;
            let default = match t.get("default") {
                Some(v) => parse_value(v, *kind, &pctx)?,
                None => domain.first().cloned().ok_or_else(|| Error::parse(&pctx, "empty domain"))?,
            };
            let condition = match t.get("condition") {
                None => None,
                Some(v) => {
                    let s = v.as_str().ok_or_else(|| Error::parse(&pctx, "`condition` must be a string"))?;
                    Some(Condition::parse(s, kind_of).map_err(|m| Error::parse(&pctx, m))?)
                }
            };
            params.push(ParameterSpec { name: name.clone(), kind: *kind, domain, condition, default });
        }

        let mut constraints = Vec::new();
        if let Some(v) = table.get("constraints") {
            let arr = v.as_array().ok_or_else(|| Error::parse(ctx, "`constraints` must be an array of strings"))?;
            for c in arr {
                let s = c.as_str().ok_or_else(|| Error::parse(ctx, "constraint entries must be strings"))?;
                constraints.push(Constraint::parse(s, kind_of).map_err(|m| Error::parse(ctx, m))?);
            }
        }
        for key in table.keys() {
            if !matches!(key.as_str(), "family" | "param" | "constraints") {
                return Err(Error::parse(ctx, format!("unknown top-level field `{key}`")));
            }
        }
        ConfigurationSpace::new(family, params, constraints)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { context, message } => Error::Parse { context: format!("{}: {context}", path.display()), message },
            other => other,
        })
    }

    /// Resolves `builtin:<family>` (or a bare built-in family name) and file paths.
    pub fn load(spec: &str) -> Result<Self> {
        let name = spec.strip_prefix("builtin:").unwrap_or(spec);
        if let Some(space) = super::builtin_space(name) {
            if spec.starts_with("builtin:") || !Path::new(spec).exists() {
                return Ok(space);
            }
        }
        Self::from_file(spec)
    }

    pub fn to_toml_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "family = {}", toml::Value::String(self.family.clone()));
        let cons: Vec<String> = self.constraints.iter().map(|c| toml::Value::String(c.to_string()).to_string()).collect();
        let _ = writeln!(s, "constraints = [{}]", cons.join(", "));
        for p in &self.params {
            let _ = writeln!(s, "\n[[param]]");
            let _ = writeln!(s, "name = {}", toml::Value::String(p.name.clone()));
            let _ = writeln!(s, "kind = \"{}\"", p.kind.as_str());
            let dom: Vec<String> = p.domain.iter().map(toml_value).collect();
            let _ = writeln!(s, "domain = [{}]", dom.join(", "));
            let _ = writeln!(s, "default = {}", toml_value(&p.default));
            if let Some(c) = &p.condition {
                let _ = writeln!(s, "condition = {}", toml::Value::String(c.to_string()));
            }
        }
        s
    }
}
