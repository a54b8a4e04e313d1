//! Flat `key = value` text with optional `[section]` headers.
//!
//! `#` and `;` start comments. Keys are unique within a section.

use crate::{Error, Result};
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            line: 0,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push(Entry {
            key: key.into(),
            value: value.to_string(),
            line: 0,
        });
    }

    pub fn entry(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    fn missing(&self, key: &str) -> Error {
        Error::Parse {
            line: self.line,
            message: format!("[{}] is missing required field `{key}`", self.name),
        }
    }

    /// Parse an optional field.
    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| Error::Parse {
                line: e.line,
                message: format!("[{}] field `{key}` has invalid value `{}`", self.name, e.value),
            }),
        }
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse_opt(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.entry(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|v| v.trim())
            .filter(|v| !v.is_empty())
            .map(|v| {
                v.parse::<T>().map_err(|_| Error::Parse {
                    line: e.line,
                    message: format!("[{}] field `{key}` has invalid list item `{v}`", self.name),
                })
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn section_mut(&mut self, name: &str) -> Option<&mut Section> {
        self.sections.iter_mut().find(|s| s.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Section> {
        self.section(name).ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("missing required section [{name}]"),
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, s) in self.sections.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            if !s.name.is_empty() {
                let _ = writeln!(out, "[{}]", s.name);
            }
            for e in &s.entries {
                let _ = writeln!(out, "{} = {}", e.key, e.value);
            }
        }
        out
    }
}

impl FromStr for Document {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        let mut current = Section::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                    line,
                    message: format!("unterminated section header `{content}`"),
                })?;
                let next = Section {
                    name: name.trim().to_string(),
                    line,
                    entries: Vec::new(),
                };
                let done = std::mem::replace(&mut current, next);
                if !done.name.is_empty() || !done.entries.is_empty() {
                    doc.sections.push(done);
                }
                if doc.sections.iter().any(|s| s.name == current.name) {
                    return Err(Error::Parse {
                        line,
                        message: format!("duplicate section [{}]", current.name),
                    });
                }
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "empty key".into(),
                });
            }
            if current.entry(key).is_some() {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            current.entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        if !current.name.is_empty() || !current.entries.is_empty() {
            doc.sections.push(current);
        }
        Ok(doc)
    }
}
