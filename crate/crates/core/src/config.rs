//! Solver configuration files.
//!
//! A TOML document with one table per solver; keys are the parameter names
//! accepted by [`SolverParams::set_str`]:
//!
//! ```toml
//! [langevin]
//! sigma = 0.2
//!
//! [mf-ccvm]
//! lambda = 15
//! readout = "mean"
//! clip_mean = false
//! ```
//!
//! Missing keys keep their defaults. Overrides given later (for example on
//! the command line) take precedence over the file.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::solvers::{SolverKind, SolverParams};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverConfig {
    sections: BTreeMap<SolverKind, Vec<(String, String)>>,
}

fn value_text(kind: SolverKind, key: &str, value: &toml::Value) -> Result<String> {
    match value {
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        toml::Value::String(s) => Ok(s.clone()),
        other => Err(Error::invalid(format!(
            "[{kind}] {key}: expected a number, boolean or string, got {}",
            other.type_str()
        ))),
    }
}

impl SolverConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                line,
                message: e.message().to_string(),
            }
        })?;
        let mut sections = BTreeMap::new();
        for (name, body) in table {
            let kind: SolverKind = name.parse()?;
            let toml::Value::Table(body) = body else {
                return Err(Error::invalid(format!(
                    "`{name}` must be a table of parameters"
                )));
            };
            let defaults = SolverParams::defaults(kind);
            let mut entries = Vec::with_capacity(body.len());
            for (key, value) in body {
                let text = value_text(kind, &key, &value)?;
                // reject unknown keys and malformed values up front
                defaults.clone().set_str(&key, &text).map_err(|e| match e {
                    Error::InvalidArgument(m) => Error::invalid(format!("[{kind}] {m}")),
                    other => other,
                })?;
                entries.push((key, text));
            }
            if sections.insert(kind, entries).is_some() {
                return Err(Error::invalid(format!("solver {kind} configured twice")));
            }
        }
        Ok(Self { sections })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Overrides recorded for `kind`, in file order.
    pub fn entries(&self, kind: SolverKind) -> &[(String, String)] {
        self.sections.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Defaults for `kind` with this file's section applied, then `overrides`.
    pub fn params_for(
        &self,
        kind: SolverKind,
        overrides: &[(String, String)],
    ) -> Result<SolverParams> {
        let mut p = SolverParams::defaults(kind);
        for (key, value) in self.entries(kind).iter().chain(overrides) {
            p.set_str(key, value)?;
        }
        p.validate()?;
        Ok(p)
    }
}

/// Splits `key=value`.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("parameter override `{text}` is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}
