//! Configuration spaces of modular algorithm families: parameter domains,
//! conditional activation, cross-parameter constraints, full-grid
//! enumeration, random designs and the numeric feature encoding.

mod expr;
mod file;
mod value;

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::Rng as _;
use sha2::{Digest, Sha256};

pub use expr::{Clause, CmpOp, Condition, Constraint, Operand};
pub use value::{ParamKind, Value, NA_TOKEN};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Consecutive rejections tolerated by [`ConfigurationSpace::sample_random`]
/// before giving up on drawing the next configuration.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSpec {
    pub name: String,
    pub kind: ParamKind,
    pub domain: Vec<Value>,
    pub condition: Option<Condition>,
    pub default: Value,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, kind: ParamKind, domain: Vec<Value>, default: Value) -> Self {
        ParameterSpec { name: name.into(), kind, domain, condition: None, default }
    }

    pub fn categorical(name: &str, options: &[&str], default: &str) -> Self {
        Self::new(name, ParamKind::Categorical, options.iter().map(|s| Value::cat(*s)).collect(), Value::cat(default))
    }

    pub fn integer(name: &str, options: &[i64], default: i64) -> Self {
        Self::new(name, ParamKind::Integer, options.iter().map(|&i| Value::Int(i)).collect(), Value::Int(default))
    }

    pub fn ordinal(name: &str, options: &[f64], default: f64) -> Self {
        Self::new(name, ParamKind::Ordinal, options.iter().map(|&x| Value::Num(x)).collect(), Value::Num(default))
    }

    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.condition = Some(condition);
        self
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.domain.iter().any(|d| d == v)
    }

    pub fn parse_value(&self, s: &str) -> Option<Value> {
        Value::parse_as(s, self.kind)
    }
}

/// Violated invariant of a configuration, naming the parameter or constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

/// A fully specified assignment of values to every parameter of a space.
/// Values are stored in the space's declared parameter order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub family: String,
    pub values: Vec<(String, Value)>,
}

impl Configuration {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    /// Canonical text form `family|name=value|...`, the basis of the id.
    pub fn canonical(&self) -> String {
        let mut s = self.family.clone();
        for (n, v) in &self.values {
            s.push('|');
            s.push_str(n);
            s.push('=');
            s.push_str(&v.to_string());
        }
        s
    }

    /// Stable content hash: first 16 hex digits of SHA-256 over the canonical form.
    pub fn id(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|(n, v)| format!("{n}={v}")).collect();
        write!(f, "{}[{}]", self.family, parts.join(", "))
    }
}

#[derive(Clone, Debug)]
pub struct ConfigurationSpace {
    family: String,
    params: Vec<ParameterSpec>,
    constraints: Vec<Constraint>,
    /// Parameter indices in dependency order (conditions point backwards).
    order: Vec<usize>,
    /// Per parameter, domain indices sorted alphabetically by text form.
    alpha_rank: Vec<Vec<usize>>,
}

impl PartialEq for ConfigurationSpace {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.params == other.params && self.constraints == other.constraints
    }
}

impl ConfigurationSpace {
    /// Builds and validates a space: unique names, non-empty duplicate-free
    /// domains, defaults inside domains, known references and an acyclic
    /// condition graph.
    pub fn new(family: impl Into<String>, params: Vec<ParameterSpec>, constraints: Vec<Constraint>) -> Result<Self> {
        let family = family.into();
        let bad = |m: String| Error::InvalidSpace(format!("{family}: {m}"));
        if family.trim().is_empty() {
            return Err(Error::InvalidSpace("family name is empty".into()));
        }
        let mut index = HashMap::new();
        for (i, p) in params.iter().enumerate() {
            if index.insert(p.name.as_str(), i).is_some() {
                return Err(bad(format!("duplicate parameter `{}`", p.name)));
            }
            if p.domain.is_empty() {
                return Err(bad(format!("parameter `{}` has an empty domain", p.name)));
            }
            let mut seen = HashSet::new();
            for v in &p.domain {
                if !v.fits_kind(p.kind) {
                    return Err(bad(format!("value `{v}` of `{}` is not {}", p.name, p.kind.as_str())));
                }
                if !seen.insert(v.clone()) {
                    return Err(bad(format!("parameter `{}` lists `{v}` twice", p.name)));
                }
            }
            if !p.contains(&p.default) {
                return Err(bad(format!("default `{}` of `{}` is not in its domain", p.default, p.name)));
            }
        }
        for p in &params {
            if let Some(c) = &p.condition {
                for r in c.referenced() {
                    if !index.contains_key(r) {
                        return Err(bad(format!("condition of `{}` references unknown `{r}`", p.name)));
                    }
                    if r == p.name {
                        return Err(bad(format!("condition of `{}` references itself", p.name)));
                    }
                }
            }
        }
        for c in &constraints {
            for r in c.referenced() {
                if !index.contains_key(r) {
                    return Err(bad(format!("constraint `{c}` references unknown `{r}`")));
                }
            }
        }
        let order = topo_order(&params, &index).ok_or_else(|| bad("condition graph is cyclic".into()))?;
        let alpha_rank = params
            .iter()
            .map(|p| {
                let mut idx: Vec<usize> = (0..p.domain.len()).collect();
                idx.sort_by(|&a, &b| alpha_cmp(&p.domain[a].to_string(), &p.domain[b].to_string()));
                let mut rank = vec![0; idx.len()];
                for (r, &i) in idx.iter().enumerate() {
                    rank[i] = r;
                }
                rank
            })
            .collect();
        Ok(ConfigurationSpace { family, params, constraints, order, alpha_rank })
    }

    pub fn family(&self) -> &str {
        &self.family
    }

    pub fn params(&self) -> &[ParameterSpec] {
        &self.params
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn param(&self, name: &str) -> Option<&ParameterSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    fn is_active(&self, p: &ParameterSpec, lookup: impl Fn(&str) -> Option<Value>) -> bool {
        match &p.condition {
            None => true,
            Some(c) => c.clauses.iter().all(|cl| lookup(&cl.param).is_some_and(|v| cl.holds(&v))),
        }
    }

    /// The configuration of all defaults (inactive parameters set to NA).
    pub fn default_configuration(&self) -> Configuration {
        let mut vals: Vec<Option<Value>> = vec![None; self.params.len()];
        for &i in &self.order {
            let p = &self.params[i];
            let active = self.is_active(p, |n| self.index_of(n).and_then(|j| vals[j].clone()));
            vals[i] = Some(if active { p.default.clone() } else { Value::NotApplicable });
        }
        self.assemble(vals.into_iter().map(|v| v.expect("assigned")).collect())
    }

    fn assemble(&self, values: Vec<Value>) -> Configuration {
        Configuration {
            family: self.family.clone(),
            values: self.params.iter().map(|p| p.name.clone()).zip(values).collect(),
        }
    }

    /// Builds a configuration from `(name, value)` pairs; missing parameters
    /// take their default or NA when inactive. The result is validated.
    pub fn configuration(&self, assignments: &[(&str, Value)]) -> Result<Configuration> {
        for (n, _) in assignments {
            if self.index_of(n).is_none() {
                return Err(Error::InvalidConfiguration(format!("unknown parameter `{n}` for {}", self.family)));
            }
        }
        let mut vals: Vec<Option<Value>> = vec![None; self.params.len()];
        for &i in &self.order {
            let p = &self.params[i];
            let active = self.is_active(p, |n| self.index_of(n).and_then(|j| vals[j].clone()));
            let given = assignments.iter().find(|(n, _)| *n == p.name).map(|(_, v)| v.clone());
            vals[i] = Some(match (active, given) {
                (true, Some(v)) => v,
                (true, None) => p.default.clone(),
                (false, _) => Value::NotApplicable,
            });
        }
        let config = self.assemble(vals.into_iter().map(|v| v.expect("assigned")).collect());
        let violations = self.validate(&config);
        if violations.is_empty() {
            Ok(config)
        } else {
            Err(Error::InvalidConfiguration(
                violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
            ))
        }
    }

    /// Checks every configuration invariant. Empty result means valid.
    pub fn validate(&self, config: &Configuration) -> Vec<Violation> {
        let mut out = Vec::new();
        if config.family != self.family {
            out.push(Violation {
                subject: "family".into(),
                message: format!("expected `{}`, found `{}`", self.family, config.family),
            });
        }
        for (n, _) in &config.values {
            if self.index_of(n).is_none() {
                out.push(Violation { subject: n.clone(), message: "unknown parameter".into() });
            }
        }
        let lookup = |n: &str| config.get(n).cloned();
        for p in &self.params {
            let Some(v) = config.get(&p.name) else {
                out.push(Violation { subject: p.name.clone(), message: "missing value".into() });
                continue;
            };
            let active = self.is_active(p, lookup);
            match (active, v.is_na()) {
                (true, true) => out.push(Violation { subject: p.name.clone(), message: "active but not-applicable".into() }),
                (false, false) => {
                    out.push(Violation { subject: p.name.clone(), message: format!("inactive but set to `{v}`") })
                }
                (true, false) if !p.contains(v) => {
                    out.push(Violation { subject: p.name.clone(), message: format!("value `{v}` not in domain") })
                }
                _ => {}
            }
        }
        for c in &self.constraints {
            if !c.holds(lookup) {
                out.push(Violation { subject: c.to_string(), message: "constraint violated".into() });
            }
        }
        out
    }

    /// Exhaustive grid: the product of active domains filtered by conditions
    /// and constraints, ordered lexicographically by declared parameter order
    /// then domain order (NA first).
    pub fn enumerate_grid(&self) -> Vec<Configuration> {
        let mut out = Vec::new();
        let mut vals: Vec<Option<Value>> = vec![None; self.params.len()];
        // Constraints are checked as soon as every referenced parameter is set.
        let pos_in_order: Vec<usize> = {
            let mut pos = vec![0; self.params.len()];
            for (k, &i) in self.order.iter().enumerate() {
                pos[i] = k;
            }
            pos
        };
        let mut ready: Vec<Vec<&Constraint>> = vec![Vec::new(); self.params.len().max(1)];
        for c in &self.constraints {
            let last = c.referenced().filter_map(|r| self.index_of(r)).map(|i| pos_in_order[i]).max().unwrap_or(0);
            ready[last].push(c);
        }
        self.grid_rec(0, &mut vals, &ready, &mut out);
        let mut keyed: Vec<(Vec<isize>, Configuration)> = out.into_iter().map(|c| (self.sort_key(&c), c)).collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.into_iter().map(|(_, c)| c).collect()
    }

    fn grid_rec(
        &self,
        k: usize,
        vals: &mut Vec<Option<Value>>,
        ready: &[Vec<&Constraint>],
        out: &mut Vec<Configuration>,
    ) {
        if k == self.order.len() {
            out.push(self.assemble(vals.iter().map(|v| v.clone().expect("assigned")).collect()));
            return;
        }
        let i = self.order[k];
        let p = &self.params[i];
        let active = self.is_active(p, |n| self.index_of(n).and_then(|j| vals[j].clone()));
        let choices: Vec<Value> = if active { p.domain.clone() } else { vec![Value::NotApplicable] };
        for v in choices {
            vals[i] = Some(v);
            let ok = ready[k].iter().all(|c| c.holds(|n| self.index_of(n).and_then(|j| vals[j].clone())));
            if ok {
                self.grid_rec(k + 1, vals, ready, out);
            }
        }
        vals[i] = None;
    }

    fn sort_key(&self, c: &Configuration) -> Vec<isize> {
        self.params
            .iter()
            .map(|p| match c.get(&p.name) {
                Some(v) if !v.is_na() => p.domain.iter().position(|d| d == v).map_or(isize::MAX, |i| i as isize),
                _ => -1,
            })
            .collect()
    }

    /// Grid cardinality.
    pub fn grid_size(&self) -> usize {
        self.enumerate_grid().len()
    }

    /// Random design of `n` distinct valid configurations by rejection
    /// sampling, deterministic given `seed`. Fails after
    /// [`MAX_CONSECUTIVE_REJECTIONS`] consecutive rejected draws.
    pub fn sample_random(&self, n: usize, seed: u64) -> Result<Vec<Configuration>> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample size must be at least 1".into()));
        }
        let mut rng = rng_from_seed(seed);
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(n);
        let mut rejections = 0;
        while out.len() < n {
            let mut vals: Vec<Option<Value>> = vec![None; self.params.len()];
            for &i in &self.order {
                let p = &self.params[i];
                let active = self.is_active(p, |nm| self.index_of(nm).and_then(|j| vals[j].clone()));
                vals[i] = Some(if active {
                    p.domain[rng.random_range(0..p.domain.len())].clone()
                } else {
                    Value::NotApplicable
                });
            }
            let config = self.assemble(vals.into_iter().map(|v| v.expect("assigned")).collect());
            let feasible = self.constraints.iter().all(|c| c.holds(|nm| config.get(nm).cloned()));
            if feasible && seen.insert(config.canonical()) {
                out.push(config);
                rejections = 0;
            } else {
                rejections += 1;
                if rejections >= MAX_CONSECUTIVE_REJECTIONS {
                    return Err(Error::Sampling(format!(
                        "{}: drew {} of {n} distinct feasible configurations before {MAX_CONSECUTIVE_REJECTIONS} consecutive rejections",
                        self.family,
                        out.len()
                    )));
                }
            }
        }
        Ok(out)
    }

    /// Numeric feature vector: one slot per parameter in declared order.
    /// Categorical values map to their index in the alphabetically sorted
    /// domain, numeric values pass through, not-applicable maps to -1.
    pub fn encode(&self, config: &Configuration) -> Result<Vec<f64>> {
        self.params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let v = config.get(&p.name).ok_or_else(|| {
                    Error::InvalidConfiguration(format!("missing value for `{}`", p.name))
                })?;
                if v.is_na() {
                    return Ok(-1.0);
                }
                let pos = p.domain.iter().position(|d| d == v).ok_or_else(|| {
                    Error::InvalidConfiguration(format!("value `{v}` of `{}` not in domain", p.name))
                })?;
                Ok(match p.kind {
                    ParamKind::Categorical => self.alpha_rank[i][pos] as f64,
                    _ => v.as_f64().expect("numeric kind"),
                })
            })
            .collect()
    }

    /// Inverse of [`encode`](Self::encode) by table lookup.
    pub fn decode(&self, features: &[f64]) -> Result<Configuration> {
        if features.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} features, got {}",
                self.params.len(),
                features.len()
            )));
        }
        let mut vals = Vec::with_capacity(self.params.len());
        for (i, (p, &x)) in self.params.iter().zip(features).enumerate() {
            if x == -1.0 && !(p.kind.is_numeric() && p.contains(&Value::Num(-1.0))) {
                vals.push(Value::NotApplicable);
                continue;
            }
            let pos = match p.kind {
                ParamKind::Categorical => self.alpha_rank[i].iter().position(|&r| r as f64 == x),
                _ => p.domain.iter().position(|d| d.as_f64() == Some(x)),
            };
            let pos = pos.ok_or_else(|| {
                Error::InvalidConfiguration(format!("encoded value {x} is not in the domain of `{}`", p.name))
            })?;
            vals.push(p.domain[pos].clone());
        }
        Ok(self.assemble(vals))
    }

    /// Decodes a configuration from its textual values (e.g. CSV cells).
    pub fn parse_configuration(&self, cells: &[(&str, &str)]) -> Result<Configuration> {
        let mut vals = Vec::with_capacity(self.params.len());
        for p in &self.params {
            let (_, s) = cells.iter().find(|(n, _)| *n == p.name).ok_or_else(|| {
                Error::InvalidConfiguration(format!("missing column for parameter `{}`", p.name))
            })?;
            let v = p.parse_value(s).ok_or_else(|| {
                Error::InvalidConfiguration(format!("`{s}` is not a valid {} value for `{}`", p.kind.as_str(), p.name))
            })?;
            vals.push(v);
        }
        let config = self.assemble(vals);
        let violations = self.validate(&config);
        if let Some(v) = violations.first() {
            return Err(Error::InvalidConfiguration(v.to_string()));
        }
        Ok(config)
    }
}

/// Case-insensitive alphabetical order with a byte-wise tie break.
fn alpha_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    a.to_lowercase().cmp(&b.to_lowercase()).then_with(|| a.cmp(b))
}

/// Kahn's algorithm over condition edges, preferring declared order.
fn topo_order(params: &[ParameterSpec], index: &HashMap<&str, usize>) -> Option<Vec<usize>> {
    let n = params.len();
    let mut deps: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for (i, p) in params.iter().enumerate() {
        if let Some(c) = &p.condition {
            for r in c.referenced() {
                deps[i].insert(index[r]);
            }
        }
    }
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n).find(|&i| !done[i] && deps[i].iter().all(|&d| done[d]))?;
        done[next] = true;
        order.push(next);
    }
    Some(order)
}

/// Built-in spaces shipped with the crate: `modcma`, `modde` and `random`.
pub fn builtin_space(family: &str) -> Option<ConfigurationSpace> {
    let text = match family {
        "modcma" => include_str!("../../spaces/modcma.toml"),
        "modde" => include_str!("../../spaces/modde.toml"),
        "random" => include_str!("../../spaces/random.toml"),
        _ => return None,
    };
    Some(ConfigurationSpace::from_toml_str(text).expect("built-in space parses"))
}

pub const BUILTIN_FAMILIES: [&str; 3] = ["modcma", "modde", "random"];
