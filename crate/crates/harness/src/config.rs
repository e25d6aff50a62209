//! Line-oriented `key = value` files with `[section]` headers.
//!
//! Keys under a header are addressed as `section.key`. Every schema key is
//! either required or carries a default, and the resolved config lists all
//! of them so a manifest records exactly what a run used.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    /// A float or `none`.
    OptFloat,
    Bool,
    Str,
    /// Comma-separated floats, possibly empty.
    Floats,
    Choice(&'static [&'static str]),
}

impl Kind {
    fn describe(self) -> String {
        match self {
            Kind::Int => "an integer".into(),
            Kind::Float => "a number".into(),
            Kind::OptFloat => "a number or none".into(),
            Kind::Bool => "true or false".into(),
            Kind::Str => "a string".into(),
            Kind::Floats => "a comma-separated list of numbers".into(),
            Kind::Choice(options) => format!("one of {}", options.join("|")),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    /// `None` marks the key as required.
    pub default: Option<&'static str>,
}

const fn req(name: &'static str, kind: Kind) -> KeySpec {
    KeySpec {
        name,
        kind,
        default: None,
    }
}

const fn opt(name: &'static str, kind: Kind, default: &'static str) -> KeySpec {
    KeySpec {
        name,
        kind,
        default: Some(default),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Schema {
    pub name: &'static str,
    pub keys: &'static [KeySpec],
}

impl Schema {
    fn key(&self, name: &str) -> Option<&KeySpec> {
        self.keys.iter().find(|k| k.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Floats(Vec<f64>),
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Line(usize),
    Flag,
    Default,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Entry {
    pub value: Value,
    pub source: Source,
}

/// A fully resolved configuration: every schema key with its value and
/// where it came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ResolvedConfig {
    pub entries: BTreeMap<String, Entry>,
}

fn parse_value(kind: Kind, raw: &str) -> Option<Value> {
    let raw = raw.trim();
    match kind {
        Kind::Int => raw.parse().ok().map(Value::Int),
        Kind::Float => raw.parse::<f64>().ok().filter(|v| v.is_finite()).map(Value::Float),
        Kind::OptFloat => {
            if raw == "none" {
                Some(Value::None)
            } else {
                raw.parse::<f64>().ok().filter(|v| v.is_finite()).map(Value::Float)
            }
        }
        Kind::Bool => match raw {
            "true" => Some(Value::Bool(true)),
            "false" => Some(Value::Bool(false)),
            _ => None,
        },
        Kind::Str => (!raw.is_empty()).then(|| Value::Str(raw.to_string())),
        Kind::Floats => {
            if raw.is_empty() {
                return Some(Value::Floats(Vec::new()));
            }
            raw.split(',')
                .map(|s| s.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect::<Option<Vec<_>>>()
                .map(Value::Floats)
        }
        Kind::Choice(options) => options.contains(&raw).then(|| Value::Str(raw.to_string())),
    }
}

fn mismatch(at: &str, key: &KeySpec, raw: &str) -> HarnessError {
    HarnessError::config(format!(
        "{at}: key '{}' expects {}, got '{}'",
        key.name,
        key.kind.describe(),
        raw.trim()
    ))
}

/// Parses `text` against `schema`, then applies `overrides` (command-line
/// flags, which win over file lines) and fills in defaults.
pub fn parse_config(text: &str, schema: &Schema, overrides: &[(&str, String)]) -> Result<ResolvedConfig> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut entries = BTreeMap::new();
    let mut section = String::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(HarnessError::config(format!("line {line_no}: unterminated section header")));
            };
            let name = name.trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(HarnessError::config(format!("line {line_no}: bad section name '{name}'")));
            }
            section = name.to_string();
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(HarnessError::config(format!("line {line_no}: expected 'key = value'")));
        };
        let k = k.trim();
        let full = if section.is_empty() {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        let Some(spec) = schema.key(&full) else {
            return Err(HarnessError::config(format!(
                "line {line_no}: unknown key '{full}' for {}",
                schema.name
            )));
        };
        if let Some(first) = seen.insert(full.clone(), line_no) {
            return Err(HarnessError::config(format!(
                "duplicate key '{full}' at lines {first} and {line_no}"
            )));
        }
        let value = parse_value(spec.kind, v).ok_or_else(|| mismatch(&format!("line {line_no}"), spec, v))?;
        entries.insert(
            full,
            Entry {
                value,
                source: Source::Line(line_no),
            },
        );
    }
    for (name, raw) in overrides {
        let Some(spec) = schema.key(name) else {
            return Err(HarnessError::config(format!("flag for unknown key '{name}' in {}", schema.name)));
        };
        let value = parse_value(spec.kind, raw).ok_or_else(|| mismatch("flag", spec, raw))?;
        entries.insert(
            name.to_string(),
            Entry {
                value,
                source: Source::Flag,
            },
        );
    }
    let mut missing = Vec::new();
    for spec in schema.keys {
        if entries.contains_key(spec.name) {
            continue;
        }
        match spec.default {
            Some(d) => {
                let value = parse_value(spec.kind, d).expect("schema defaults parse");
                entries.insert(
                    spec.name.to_string(),
                    Entry {
                        value,
                        source: Source::Default,
                    },
                );
            }
            None => missing.push(spec.name),
        }
    }
    if !missing.is_empty() {
        return Err(HarnessError::config(format!(
            "missing required keys for {}: {}",
            schema.name,
            missing.join(", ")
        )));
    }
    Ok(ResolvedConfig { entries })
}

impl ResolvedConfig {
    fn get(&self, key: &str) -> &Value {
        &self.entries.get(key).unwrap_or_else(|| panic!("key {key} not in schema")).value
    }

    pub fn f64(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            Value::Int(v) => *v as f64,
            other => panic!("{key} is not numeric: {other:?}"),
        }
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        match self.get(key) {
            Value::None => None,
            _ => Some(self.f64(key)),
        }
    }

    pub fn int(&self, key: &str) -> i64 {
        match self.get(key) {
            Value::Int(v) => *v,
            other => panic!("{key} is not an integer: {other:?}"),
        }
    }

    /// A nonnegative integer, rejected with a diagnostic otherwise.
    pub fn count(&self, key: &str) -> Result<usize> {
        usize::try_from(self.int(key)).map_err(|_| HarnessError::config(format!("key '{key}' must be nonnegative")))
    }

    pub fn bool(&self, key: &str) -> bool {
        match self.get(key) {
            Value::Bool(v) => *v,
            other => panic!("{key} is not a bool: {other:?}"),
        }
    }

    pub fn str(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Str(v) => v,
            other => panic!("{key} is not a string: {other:?}"),
        }
    }

    pub fn floats(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Value::Floats(v) => v,
            other => panic!("{key} is not a list: {other:?}"),
        }
    }

    /// Merges another config under `prefix.`.
    pub fn absorb(&mut self, prefix: &str, other: ResolvedConfig) {
        for (k, v) in other.entries {
            self.entries.insert(format!("{prefix}.{k}"), v);
        }
    }

    pub fn scoped(&self, prefix: &str) -> ResolvedConfig {
        let p = format!("{prefix}.");
        ResolvedConfig {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&p).map(|rest| (rest.to_string(), v.clone())))
                .collect(),
        }
    }
}

const RUN_CONSTRUCTION: &[&str] = &["rounded", "poissonized"];
const FAMILIES: &[&str] = &["constant", "affine_clamped", "tanh_features"];

pub const METRIC: Schema = Schema {
    name: "metric",
    keys: &[
        req("metric.a", Kind::Str),
        req("metric.b", Kind::Str),
        opt("metric.kind", Kind::Choice(&["rhoF", "w1", "sobolev"]), "rhoF"),
        opt("metric.lambda", Kind::Str, "auto"),
        opt("metric.quadrature", Kind::Choice(&["auto", "closed_form", "grid"]), "auto"),
        opt("metric.radius", Kind::Float, "50"),
        opt("metric.nodes", Kind::Int, "20001"),
        opt("metric.base", Kind::Floats, ""),
        opt("metric.constant", Kind::Bool, "false"),
    ],
};

pub const MODEL: Schema = Schema {
    name: "model",
    keys: &[
        req("dim", Kind::Int),
        opt("action_dim", Kind::Int, "1"),
        opt("gamma_bar", Kind::Float, "1"),
        opt("action_lo", Kind::Floats, "-1"),
        opt("action_hi", Kind::Floats, "1"),
        opt("drift.offset", Kind::Floats, "0"),
        opt("drift.slope", Kind::Float, "0"),
        opt("drift.mass", Kind::Float, "0"),
        opt("drift.mean", Kind::Float, "0"),
        opt("drift.control", Kind::Float, "0"),
        opt("drift.saturation", Kind::OptFloat, "none"),
        opt("diffusion.level", Kind::Float, "0"),
        opt("diffusion.mass_coupling", Kind::Float, "0"),
        opt("rate.family", Kind::Choice(&["constant", "logistic"]), "constant"),
        opt("rate.value", Kind::Float, "0"),
        opt("rate.slope", Kind::Float, "0"),
        opt("rate.mass", Kind::Float, "0"),
        opt("rate.control", Kind::Float, "0"),
        opt("offspring.pmf", Kind::Floats, "0, 1"),
        opt("offspring.alt", Kind::Floats, ""),
        opt("offspring.value", Kind::Float, "0"),
        opt("offspring.slope", Kind::Float, "0"),
    ],
};

pub const POLICY: Schema = Schema {
    name: "policy",
    keys: &[
        opt("family", Kind::Choice(FAMILIES), "constant"),
        opt("params", Kind::Floats, ""),
        opt("lo", Kind::Floats, ""),
        opt("hi", Kind::Floats, ""),
    ],
};

pub const COST: Schema = Schema {
    name: "cost",
    keys: &[
        opt("action", Kind::Float, "0"),
        opt("state", Kind::Float, "0"),
        opt("constant", Kind::Float, "0"),
        opt("terminal_state", Kind::Float, "0"),
        opt("terminal_constant", Kind::Float, "0"),
        opt("cap", Kind::Float, "10000"),
    ],
};

pub const SIMULATE_RUN: Schema = Schema {
    name: "simulate",
    keys: &[
        req("init", Kind::Str),
        opt("t0", Kind::Float, "0"),
        req("t_end", Kind::Float),
        opt("dt", Kind::Float, "0.01"),
        opt("replicas", Kind::Int, "1000"),
        opt("construction", Kind::Choice(RUN_CONSTRUCTION), "rounded"),
        opt("stride", Kind::Int, "0"),
    ],
};

pub const VALUE_RUN: Schema = Schema {
    name: "value",
    keys: &[
        req("init", Kind::Str),
        opt("t", Kind::Float, "0"),
        req("t_end", Kind::Float),
        opt("dt", Kind::Float, "0.01"),
        opt("replicas", Kind::Int, "1000"),
        opt("construction", Kind::Choice(RUN_CONSTRUCTION), "rounded"),
        opt("family", Kind::Choice(FAMILIES), "constant"),
        opt("restarts", Kind::Int, "3"),
        opt("iters", Kind::Int, "100"),
        opt("x_tol", Kind::Float, "1e-6"),
        opt("f_tol", Kind::Float, "1e-10"),
        opt("split_time", Kind::OptFloat, "none"),
        opt("tolerance", Kind::Float, "0"),
    ],
};
