//! Sectioned key=value configuration with strict key accounting.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use ini::Ini;
use num_complex::Complex64;

use crate::error::CliError;

pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
    used: RefCell<BTreeSet<(String, String)>>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))?;
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(CliError::Config(format!("key `{k}` outside of any section")));
                }
                continue;
            };
            let section = sections.entry(name.trim().to_string()).or_default();
            for (k, v) in props.iter() {
                if section.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                    return Err(CliError::Config(format!("duplicate key `{name}.{k}`")));
                }
            }
        }
        Ok(Self { sections, used: RefCell::new(BTreeSet::new()) })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        let v = self.sections.get(section)?.get(key)?;
        self.used.borrow_mut().insert((section.into(), key.into()));
        Some(v.as_str())
    }

    pub fn opt<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, CliError> {
        self.get(section, key).map(|v| parse_value(section, key, v)).transpose()
    }

    pub fn req<T: FromStr>(&self, section: &str, key: &str) -> Result<T, CliError> {
        self.opt(section, key)?.ok_or_else(|| CliError::Config(format!("missing required key `{section}.{key}`")))
    }

    pub fn or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.opt(section, key)?.unwrap_or(default))
    }

    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>, CliError> {
        self.get(section, key).map(|v| split_list(v).map(|item| parse_value(section, key, item)).collect()).transpose()
    }

    pub fn complex_list(&self, section: &str, key: &str) -> Result<Option<Vec<Complex64>>, CliError> {
        self.get(section, key)
            .map(|v| split_list(v).map(|item| parse_complex(section, key, item)).collect())
            .transpose()
    }

    pub fn complex(&self, section: &str, key: &str, default: Complex64) -> Result<Complex64, CliError> {
        self.get(section, key).map_or(Ok(default), |v| parse_complex(section, key, v))
    }

    /// Every key present in the file must have been read.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        for (name, props) in &self.sections {
            for key in props.keys() {
                if !used.contains(&(name.clone(), key.clone())) {
                    return Err(CliError::Config(format!("unknown key `{name}.{key}`")));
                }
            }
        }
        Ok(())
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_value<T: FromStr>(section: &str, key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Config(format!("invalid value `{v}` for `{section}.{key}`")))
}

/// `a`, `a+bi`, `a-bi`, `bi`, `i`.
fn parse_complex(section: &str, key: &str, v: &str) -> Result<Complex64, CliError> {
    let bad = || CliError::Config(format!("invalid complex value `{v}` for `{section}.{key}`"));
    let s: String = v.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(body) = s.strip_suffix(['i', 'j']) else {
        return s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not an exponent sign or the leading sign
    let split = body
        .char_indices()
        .filter(|&(i, c)| (c == '+' || c == '-') && i > 0 && !matches!(body.as_bytes()[i - 1], b'e' | b'E'))
        .map(|(i, _)| i)
        .next_back();
    let imag = |t: &str| -> Result<f64, CliError> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse().map_err(|_| bad()),
        }
    };
    match split {
        Some(i) => Ok(Complex64::new(body[..i].parse().map_err(|_| bad())?, imag(&body[i..])?)),
        None => Ok(Complex64::new(0.0, imag(body)?)),
    }
}
