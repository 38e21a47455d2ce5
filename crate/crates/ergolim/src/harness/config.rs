//! Experiment configuration: a flat text format of `[section]` tables
//! holding `key = value` pairs, where a value is an integer, a
//! decimal, a quoted string, a boolean, or a bracketed array
//! `[a, b, c]`. Lines starting with `#` (and trailing `#` comments
//! outside quotes) are ignored.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line for parse errors; None for semantic errors.
    pub line: Option<usize>,
    /// Field path (`section.key`) for semantic errors.
    pub path: String,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config line {line}: {}", self.msg),
            None => write!(f, "config field `{}`: {}", self.path, self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

fn field_err(section: &str, key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError {
        line: None,
        path: format!("{section}.{key}"),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigValue {
    Int(i64),
    Float(f64),
    Str(String),
    Bool(bool),
    List(Vec<ConfigValue>),
}

impl fmt::Display for ConfigValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigValue::Int(v) => write!(f, "{v}"),
            ConfigValue::Float(v) => write!(f, "{v}"),
            ConfigValue::Str(s) => write!(f, "{s}"),
            ConfigValue::Bool(b) => write!(f, "{b}"),
            ConfigValue::List(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Parsed configuration: sections of key/value pairs in deterministic
/// (sorted) order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub sections: BTreeMap<String, BTreeMap<String, ConfigValue>>,
}

fn parse_scalar(token: &str, line: usize) -> Result<ConfigValue, ConfigError> {
    let t = token.trim();
    if t.is_empty() {
        return Err(ConfigError {
            line: Some(line),
            path: String::new(),
            msg: "empty value".into(),
        });
    }
    if let Some(stripped) = t.strip_prefix('"') {
        let Some(inner) = stripped.strip_suffix('"') else {
            return Err(ConfigError {
                line: Some(line),
                path: String::new(),
                msg: format!("unterminated string `{t}`"),
            });
        };
        return Ok(ConfigValue::Str(inner.to_string()));
    }
    match t {
        "true" => return Ok(ConfigValue::Bool(true)),
        "false" => return Ok(ConfigValue::Bool(false)),
        _ => {}
    }
    if !t.contains(['.', 'e', 'E']) {
        if let Ok(v) = t.parse::<i64>() {
            return Ok(ConfigValue::Int(v));
        }
    }
    if let Ok(v) = t.parse::<f64>() {
        return Ok(ConfigValue::Float(v));
    }
    Err(ConfigError {
        line: Some(line),
        path: String::new(),
        msg: format!("cannot parse value `{t}` (expected number, \"string\", bool, or [array])"),
    })
}

fn parse_value(token: &str, line: usize) -> Result<ConfigValue, ConfigError> {
    let t = token.trim();
    if let Some(stripped) = t.strip_prefix('[') {
        let Some(inner) = stripped.strip_suffix(']') else {
            return Err(ConfigError {
                line: Some(line),
                path: String::new(),
                msg: format!("unterminated array `{t}`"),
            });
        };
        let inner = inner.trim();
        if inner.is_empty() {
            return Ok(ConfigValue::List(Vec::new()));
        }
        let items = inner
            .split(',')
            .map(|part| parse_scalar(part, line))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(ConfigValue::List(items));
    }
    parse_scalar(t, line)
}

/// Strip a `#` comment that is not inside a quoted string.
fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut cfg = RawConfig::default();
        let mut current = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw_line).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(stripped) = line.strip_prefix('[') {
                let Some(name) = stripped.strip_suffix(']') else {
                    return Err(ConfigError {
                        line: Some(line_no),
                        path: String::new(),
                        msg: format!("malformed section header `{line}`"),
                    });
                };
                current = name.trim().to_string();
                cfg.sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line_no),
                    path: String::new(),
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            if current.is_empty() {
                return Err(ConfigError {
                    line: Some(line_no),
                    path: String::new(),
                    msg: "key outside any [section]".into(),
                });
            }
            let key = key.trim().to_string();
            let value = parse_value(value, line_no)?;
            cfg.sections.get_mut(&current).unwrap().insert(key, value);
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<RawConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            path: path.display().to_string(),
            msg: format!("cannot read config: {e}"),
        })?;
        RawConfig::parse(&text)
    }

    pub fn has(&self, section: &str, key: &str) -> bool {
        self.sections
            .get(section)
            .is_some_and(|s| s.contains_key(key))
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&ConfigValue> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    pub fn f64(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        match self.get(section, key) {
            Some(ConfigValue::Float(v)) => Ok(*v),
            Some(ConfigValue::Int(v)) => Ok(*v as f64),
            Some(other) => Err(field_err(
                section,
                key,
                format!("expected a number, got {other}"),
            )),
            None => Err(field_err(section, key, "missing required field")),
        }
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        if self.has(section, key) {
            self.f64(section, key)
        } else {
            Ok(default)
        }
    }

    pub fn u64(&self, section: &str, key: &str) -> Result<u64, ConfigError> {
        match self.get(section, key) {
            Some(ConfigValue::Int(v)) if *v >= 0 => Ok(*v as u64),
            Some(other) => Err(field_err(
                section,
                key,
                format!("expected a nonnegative integer, got {other}"),
            )),
            None => Err(field_err(section, key, "missing required field")),
        }
    }

    pub fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64, ConfigError> {
        if self.has(section, key) {
            self.u64(section, key)
        } else {
            Ok(default)
        }
    }

    pub fn str(&self, section: &str, key: &str) -> Result<String, ConfigError> {
        match self.get(section, key) {
            Some(ConfigValue::Str(s)) => Ok(s.clone()),
            Some(other) => Err(field_err(
                section,
                key,
                format!("expected a string, got {other}"),
            )),
            None => Err(field_err(section, key, "missing required field")),
        }
    }

    pub fn str_or(&self, section: &str, key: &str, default: &str) -> Result<String, ConfigError> {
        if self.has(section, key) {
            self.str(section, key)
        } else {
            Ok(default.to_string())
        }
    }

    pub fn f64_list(&self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self.get(section, key) {
            Some(ConfigValue::List(items)) => items
                .iter()
                .map(|item| match item {
                    ConfigValue::Float(v) => Ok(*v),
                    ConfigValue::Int(v) => Ok(*v as f64),
                    other => Err(field_err(
                        section,
                        key,
                        format!("expected numeric array entries, got {other}"),
                    )),
                })
                .collect(),
            Some(other) => Err(field_err(
                section,
                key,
                format!("expected an array, got {other}"),
            )),
            None => Err(field_err(section, key, "missing required field")),
        }
    }

    pub fn u64_list(&self, section: &str, key: &str) -> Result<Vec<u64>, ConfigError> {
        self.f64_list(section, key)?
            .into_iter()
            .map(|v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as u64)
                } else {
                    Err(field_err(
                        section,
                        key,
                        format!("expected integer entries, got {v}"),
                    ))
                }
            })
            .collect()
    }

    /// Deterministic string echo of every section, for report embedding.
    pub fn echo(&self) -> BTreeMap<String, BTreeMap<String, String>> {
        self.sections
            .iter()
            .map(|(name, table)| {
                (
                    name.clone(),
                    table
                        .iter()
                        .map(|(k, v)| (k.clone(), v.to_string()))
                        .collect(),
                )
            })
            .collect()
    }
}
