//! Problem files: flat `key = value` lines with optional `[section]`
//! headers, `#` comments and expression-valued entries.
//!
//! ```text
//! kind = lagrangian
//! structure = frame
//! n = 2
//! m = 2
//! L = 0.5*(y1^2 + y2^2) - q1
//! q0 = 0, 1
//! y0 = 1, 0
//! t1 = 10
//! dt = 1e-3
//!
//! [frame]
//! field1 = 1, 0
//! field2 = q2, 1
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::expr::{parse_expr, Env, Expr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct SpecError {
    /// One-based; zero when the problem is not tied to a line.
    pub line: usize,
    /// One-based; zero when unknown.
    pub col: usize,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.col) {
            (0, _) => f.write_str(&self.message),
            (l, 0) => write!(f, "line {l}: {}", self.message),
            (l, c) => write!(f, "line {l}, column {c}: {}", self.message),
        }
    }
}

impl SpecError {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        SpecError {
            line,
            col,
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        SpecError::new(0, 0, message)
    }
}

/// A raw value with its location.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
    /// One-based column of the first character of `value`.
    pub col: usize,
}

impl Entry {
    pub fn error(&self, message: impl Into<String>) -> SpecError {
        SpecError::new(self.line, self.col, message)
    }

    pub fn expr(&self) -> Result<Expr, SpecError> {
        parse_expr(&self.value).map_err(|e| SpecError::new(self.line, self.col + e.pos, e.message))
    }

    /// Splits at top-level commas into located entries.
    pub fn items(&self) -> Vec<Entry> {
        let mut out = Vec::new();
        let mut depth = 0i32;
        let mut start = 0;
        let bytes = self.value.as_bytes();
        for (i, &b) in bytes.iter().enumerate() {
            match b {
                b'(' => depth += 1,
                b')' => depth -= 1,
                b',' if depth == 0 => {
                    out.push(self.slice(start, i));
                    start = i + 1;
                }
                _ => {}
            }
        }
        out.push(self.slice(start, bytes.len()));
        out
    }

    fn slice(&self, start: usize, end: usize) -> Entry {
        let raw = &self.value[start..end];
        let lead = raw.len() - raw.trim_start().len();
        Entry {
            value: raw.trim().to_string(),
            line: self.line,
            col: self.col + start + lead,
        }
    }

    /// A constant: a number or a variable-free expression such as `pi/2`.
    pub fn number(&self) -> Result<f64, SpecError> {
        let e = self.expr()?;
        if let Some(v) = e.vars().first() {
            return Err(self.error(format!("expected a constant, found variable {v}")));
        }
        let x = e.eval(&Env::default());
        if !x.is_finite() {
            return Err(self.error(format!("'{}' is not a finite number", self.value)));
        }
        Ok(x)
    }

    pub fn numbers(&self) -> Result<Vec<f64>, SpecError> {
        if self.value.is_empty() {
            return Ok(Vec::new());
        }
        self.items().iter().map(Entry::number).collect()
    }

    pub fn exprs(&self) -> Result<Vec<Expr>, SpecError> {
        self.items().iter().map(Entry::expr).collect()
    }

    pub fn integer(&self) -> Result<usize, SpecError> {
        self.value
            .parse()
            .map_err(|_| self.error(format!("expected a non-negative integer, found '{}'", self.value)))
    }
}

/// Parsed file: top-level entries and named sections, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpecDoc {
    pub top: BTreeMap<String, Entry>,
    pub sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

pub fn parse_doc(text: &str) -> Result<SpecDoc, SpecError> {
    let mut doc = SpecDoc::default();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = match raw.find('#') {
            Some(j) => &raw[..j],
            None => raw,
        };
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lead = content.len() - content.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(SpecError::new(line, lead + 1, "unterminated section header"));
            };
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(SpecError::new(line, lead + 2, format!("invalid section name '{name}'")));
            }
            if doc.sections.contains_key(name) {
                return Err(SpecError::new(line, lead + 2, format!("duplicate section [{name}]")));
            }
            doc.sections.insert(name.to_string(), BTreeMap::new());
            section = Some(name.to_string());
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(SpecError::new(line, lead + 1, "expected 'key = value'"));
        };
        let key = content[..eq].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(SpecError::new(line, lead + 1, format!("invalid key '{key}'")));
        }
        let after = &content[eq + 1..];
        let mut col = eq + 2 + (after.len() - after.trim_start().len());
        let mut value = after.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
            col += 1;
        }
        let entry = Entry {
            value: value.to_string(),
            line,
            col,
        };
        let table = match &section {
            Some(s) => doc.sections.get_mut(s).expect("section was inserted"),
            None => &mut doc.top,
        };
        if table.contains_key(key) {
            return Err(SpecError::new(line, lead + 1, format!("duplicate key '{key}'")));
        }
        table.insert(key.to_string(), entry);
    }
    Ok(doc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Lagrangian,
    Hamiltonian,
    Vakonomic,
    Pontryagin,
    DiscreteEl,
    DiscreteConstrained,
    DiscreteOcp,
    GroupoidDel,
    EulerPoincare,
    LiePoisson,
}

impl Kind {
    pub const ALL: [Kind; 10] = [
        Kind::Lagrangian,
        Kind::Hamiltonian,
        Kind::Vakonomic,
        Kind::Pontryagin,
        Kind::DiscreteEl,
        Kind::DiscreteConstrained,
        Kind::DiscreteOcp,
        Kind::GroupoidDel,
        Kind::EulerPoincare,
        Kind::LiePoisson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Lagrangian => "lagrangian",
            Kind::Hamiltonian => "hamiltonian",
            Kind::Vakonomic => "vakonomic",
            Kind::Pontryagin => "pontryagin",
            Kind::DiscreteEl => "discrete_el",
            Kind::DiscreteConstrained => "discrete_constrained",
            Kind::DiscreteOcp => "discrete_ocp",
            Kind::GroupoidDel => "groupoid_del",
            Kind::EulerPoincare => "euler_poincare",
            Kind::LiePoisson => "lie_poisson",
        }
    }

    pub fn is_discrete(self) -> bool {
        matches!(
            self,
            Kind::DiscreteEl | Kind::DiscreteConstrained | Kind::DiscreteOcp | Kind::GroupoidDel
        )
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Kind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Kind::ALL.iter().map(|k| k.name()).collect();
            format!("unknown kind '{s}' (expected one of {})", names.join(", "))
        })
    }
}

/// A problem file after the generic checks: known kind, dimensions and
/// step parameters. Kind-specific keys are read by the runner.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: Kind,
    pub doc: SpecDoc,
    pub t1: Option<f64>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
}

const GENERIC_KEYS: [&str; 5] = ["name", "description", "kind", "structure", "algebra"];

impl ProblemSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let doc = parse_doc(text)?;
        let kind_entry = doc
            .top
            .get("kind")
            .ok_or_else(|| SpecError::general("missing required key 'kind'"))?;
        let kind = kind_entry.value.parse().map_err(|e: String| kind_entry.error(e))?;
        let t1 = doc.top.get("t1").map(Entry::number).transpose()?;
        let dt = doc.top.get("dt").map(Entry::number).transpose()?;
        let steps = doc.top.get("steps").map(Entry::integer).transpose()?;
        let spec = ProblemSpec {
            kind,
            doc,
            t1,
            dt,
            steps,
        };
        if let Some(e) = spec.doc.top.get("dt") {
            if spec.dt.is_some_and(|h| h <= 0.0) {
                return Err(e.error("dt must be positive"));
            }
        }
        Ok(spec)
    }

    pub fn name(&self) -> Option<&str> {
        self.doc.top.get("name").map(|e| e.value.as_str())
    }

    pub fn description(&self) -> Option<&str> {
        self.doc.top.get("description").map(|e| e.value.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.doc.top.get(key)
    }

    pub fn require(&self, key: &str) -> Result<&Entry, SpecError> {
        self.get(key)
            .ok_or_else(|| SpecError::general(format!("{} problem needs key '{key}'", self.kind.name())))
    }

    pub fn dim(&self, key: &str) -> Result<usize, SpecError> {
        self.require(key)?.integer()
    }

    pub fn dim_or(&self, key: &str, default: usize) -> Result<usize, SpecError> {
        self.get(key).map_or(Ok(default), Entry::integer)
    }

    /// A vector of constants with exactly `len` entries.
    pub fn vector(&self, key: &str, len: usize) -> Result<Vec<f64>, SpecError> {
        let e = self.require(key)?;
        let v = e.numbers()?;
        if v.len() != len {
            return Err(e.error(format!("'{key}' needs {len} values, found {}", v.len())));
        }
        Ok(v)
    }

    pub fn vector_or_zero(&self, key: &str, len: usize) -> Result<Vec<f64>, SpecError> {
        if self.get(key).is_some() {
            self.vector(key, len)
        } else {
            Ok(vec![0.0; len])
        }
    }

    pub fn structure(&self) -> Option<&Entry> {
        self.get("structure")
    }

    pub fn section(&self, name: &str) -> Option<&BTreeMap<String, Entry>> {
        self.doc.sections.get(name)
    }

    /// Indexed keys `prefix1, prefix2, ...`, which must be contiguous.
    pub fn indexed(&self, prefix: &str) -> Result<Vec<&Entry>, SpecError> {
        indexed(&self.doc.top, prefix)
    }

    /// Rejects top-level keys that the runner for this kind does not read.
    pub fn check_keys(&self, allowed: &[&str], indexed_prefixes: &[&str]) -> Result<(), SpecError> {
        for (key, e) in &self.doc.top {
            let known = GENERIC_KEYS.contains(&key.as_str())
                || ["t1", "dt", "steps"].contains(&key.as_str())
                || allowed.contains(&key.as_str())
                || indexed_prefixes.iter().any(|p| {
                    key.strip_prefix(p)
                        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
                });
            if !known {
                return Err(SpecError::new(
                    e.line,
                    0,
                    format!("key '{key}' is not used by {} problems", self.kind.name()),
                ));
            }
        }
        Ok(())
    }
}

pub fn indexed<'a>(table: &'a BTreeMap<String, Entry>, prefix: &str) -> Result<Vec<&'a Entry>, SpecError> {
    let mut found: Vec<(usize, &Entry)> = Vec::new();
    for (key, e) in table {
        if let Some(rest) = key.strip_prefix(prefix) {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let i: usize = rest
                    .parse()
                    .map_err(|_| SpecError::new(e.line, 0, format!("bad index in '{key}'")))?;
                found.push((i, e));
            }
        }
    }
    found.sort_by_key(|(i, _)| *i);
    for (expected, (i, e)) in (1..).zip(&found) {
        if *i != expected {
            return Err(SpecError::new(
                e.line,
                0,
                format!("'{prefix}{i}' found but '{prefix}{expected}' is missing"),
            ));
        }
    }
    Ok(found.into_iter().map(|(_, e)| e).collect())
}
