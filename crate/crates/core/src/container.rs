//! Versioned line-delimited text container for standardizers, clip
//! archives and checkpoints.
//!
//! ```text
//! ssp-<kind> 1
//! meta <key> <value...>
//! array <name> <d0> <d1> ...
//! <all values on one line, space separated>
//! ```
//!
//! Numbers use the shortest decimal form that parses back to the same
//! `f64`, so save/load is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{CoreError, Result};

pub const CONTAINER_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Container {
    pub kind: String,
    meta: Vec<(String, String)>,
    arrays: Vec<Array>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl Container {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            ..Self::default()
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        assert!(!key.contains(char::is_whitespace), "meta key {key:?} contains whitespace");
        assert!(!value.contains('\n'), "meta value contains a newline");
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require_meta(&self, key: &str) -> Result<&str> {
        self.meta(key)
            .ok_or_else(|| CoreError::Missing(format!("{} field '{key}'", self.kind)))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require_meta(key)?;
        raw.parse()
            .map_err(|_| CoreError::Config(format!("{} field '{key}' has invalid value {raw:?}", self.kind)))
    }

    pub fn push_array(&mut self, name: impl Into<String>, dims: Vec<usize>, data: Vec<f64>) {
        let name = name.into();
        assert_eq!(dims.iter().product::<usize>(), data.len(), "array {name} dims do not match data");
        self.arrays.push(Array { name, dims, data });
    }

    pub fn array(&self, name: &str) -> Result<&Array> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| CoreError::Missing(format!("{} array '{name}'", self.kind)))
    }

    pub fn arrays(&self) -> &[Array] {
        &self.arrays
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("ssp-{} {CONTAINER_VERSION}\n", self.kind);
        for (k, v) in &self.meta {
            let _ = writeln!(s, "meta {k} {v}");
        }
        for a in &self.arrays {
            s.push_str("array ");
            s.push_str(&a.name);
            for d in &a.dims {
                let _ = write!(s, " {d}");
            }
            s.push('\n');
            write_numbers(&mut s, &a.data);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "header", "empty file"))?;
        let mut parts = header.split_whitespace();
        let kind = parts
            .next()
            .and_then(|t| t.strip_prefix("ssp-"))
            .ok_or_else(|| parse_err(1, "header", "missing 'ssp-<kind>' tag"))?
            .to_string();
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err(1, "format_version", "missing or invalid"))?;
        if version != CONTAINER_VERSION {
            return Err(parse_err(1, "format_version", &format!("unsupported version {version}")));
        }
        let mut c = Container::new(kind);
        while let Some((i, line)) = lines.next() {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                c.meta.push((k.to_string(), v.to_string()));
            } else if let Some(rest) = line.strip_prefix("array ") {
                let mut toks = rest.split_whitespace();
                let name = toks
                    .next()
                    .ok_or_else(|| parse_err(lineno, "array", "missing name"))?
                    .to_string();
                let dims = toks
                    .map(|t| t.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| parse_err(lineno, &name, "invalid dimension"))?;
                let expected: usize = dims.iter().product();
                let (j, body) = lines
                    .next()
                    .ok_or_else(|| parse_err(lineno + 1, &name, "missing data line"))?;
                let data = parse_numbers(body, j + 1, &name, None)?;
                if data.len() != expected {
                    return Err(parse_err(
                        j + 1,
                        &name,
                        &format!("expected {expected} values, found {}", data.len()),
                    ));
                }
                c.arrays.push(Array { name, dims, data });
            } else {
                return Err(parse_err(lineno, "record", "expected 'meta' or 'array'"));
            }
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| CoreError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        Self::parse(&text)
    }

    /// Loads and checks the kind tag.
    pub fn load_kind(path: &Path, kind: &str) -> Result<Self> {
        let c = Self::load(path)?;
        if c.kind != kind {
            return Err(CoreError::Config(format!(
                "{} holds a '{}', expected a '{kind}'",
                path.display(),
                c.kind
            )));
        }
        Ok(c)
    }
}

pub(crate) fn write_numbers(s: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
}

pub(crate) fn parse_numbers(line: &str, lineno: usize, field: &str, frame: Option<usize>) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(CoreError::Parse {
                line: lineno,
                field: field.to_string(),
                frame,
                reason: format!("invalid number {t:?}"),
            }),
        })
        .collect()
}

fn parse_err(line: usize, field: &str, reason: &str) -> CoreError {
    CoreError::Parse {
        line,
        field: field.to_string(),
        frame: None,
        reason: reason.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut c = Container::new("test");
        c.set_meta("seed", 7);
        c.set_meta("note", "two words");
        let data = vec![0.1, -1e-300, 1.0 / 3.0, 123456789.125, 0.0, -0.0];
        c.push_array("x", vec![2, 3], data.clone());
        let back = Container::parse(&c.to_text()).unwrap();
        assert_eq!(back.meta("note"), Some("two words"));
        let a = back.array("x").unwrap();
        assert_eq!(a.dims, vec![2, 3]);
        for (p, q) in a.data.iter().zip(&data) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
    }

    #[test]
    fn errors_name_the_field() {
        let err = Container::parse("ssp-x 1\narray w 2\n1 nope\n").unwrap_err();
        assert!(err.to_string().contains('w'), "{err}");
        assert!(Container::parse("ssp-x 9\n").is_err());
        assert!(Container::parse("ssp-x 1\narray w 3\n1 2\n").is_err());
        assert!(Container::parse("ssp-x 1\narray w 1\n").is_err());
    }
}
