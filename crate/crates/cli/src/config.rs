//! Sectioned key-value configs.
//!
//! ```text
//! # comment
//! [run]
//! seed = 7
//!
//! [algebroid g]
//! kind = lie_algebra
//! preset = so3
//!
//! [task axioms]
//! kind = check
//! algebroid = g
//! ```
//!
//! Every section except `[run]` has a type and a name. Keys are unique within
//! a section. Values are raw strings; lists are comma separated and matrix
//! rows are separated by `;`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use algebroid::Expr;

use crate::error::{CliError, Result};

pub const SECTION_KINDS: [&str; 5] = ["chart", "algebroid", "fibration", "cube", "task"];

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct Section {
    pub kind: String,
    pub name: String,
    pub line: usize,
    pub entries: BTreeMap<String, Entry>,
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} `{}`", self.kind, self.name)
    }
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn invalid(&self, message: impl Into<String>) -> CliError {
        CliError::Invalid {
            entity: self.to_string(),
            message: message.into(),
        }
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| self.invalid(format!("missing key `{key}`")))
    }

    fn parse_with<T>(&self, key: &str, f: impl FnOnce(&str) -> Option<T>) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => f(v.trim())
                .map(Some)
                .ok_or_else(|| self.invalid(format!("bad value `{v}` for `{key}`"))),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, |v| v.parse().ok())
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.parse_with(key, |v| v.parse().ok())
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.parse_with(key, |v| match v {
            "true" | "yes" => Some(true),
            "false" | "no" => Some(false),
            _ => None,
        })
    }

    pub fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.parse_with(key, |v| {
            if v.is_empty() {
                return Some(vec![]);
            }
            v.split(',').map(|x| x.trim().parse().ok()).collect()
        })
    }

    pub fn names(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(split_list)
    }

    pub fn exprs(&self, key: &str) -> Result<Option<Vec<Expr>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => Ok(Some(self.expr_list(key, v)?)),
        }
    }

    pub fn expr(&self, key: &str) -> Result<Option<Expr>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => Expr::parse(v)
                .map(Some)
                .map_err(|e| self.expr_error(key, e)),
        }
    }

    /// Rows separated by `;`, entries by `,`.
    pub fn matrix(&self, key: &str) -> Result<Option<Vec<Vec<Expr>>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(';')
                .map(|row| self.expr_list(key, row))
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn expr_list(&self, key: &str, v: &str) -> Result<Vec<Expr>> {
        split_list(v)
            .iter()
            .map(|s| Expr::parse(s).map_err(|e| self.expr_error(key, e)))
            .collect()
    }

    fn expr_error(&self, key: &str, e: algebroid::ExprError) -> CliError {
        let line = self.entries.get(key).map_or(self.line, |e| e.line);
        CliError::Parse {
            line,
            message: format!("{self}, key `{key}`: {e}"),
        }
    }

    /// Keys of the form `prefix.i.j...` with 1-based integer indices,
    /// returned 0-based.
    pub fn indexed(&self, prefix: &str, arity: usize) -> Result<Vec<(Vec<usize>, &str)>> {
        let mut out = Vec::new();
        for (k, e) in &self.entries {
            let mut parts = k.split('.');
            if parts.next() != Some(prefix) {
                continue;
            }
            let idx: Option<Vec<usize>> = parts
                .map(|p| p.parse::<usize>().ok().filter(|&i| i >= 1).map(|i| i - 1))
                .collect();
            match idx {
                Some(idx) if idx.len() == arity => out.push((idx, e.value.as_str())),
                _ => {
                    return Err(self.invalid(format!(
                        "key `{k}` needs {arity} index(es) starting at 1"
                    )))
                }
            }
        }
        Ok(out)
    }
}

pub fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

#[derive(Debug, Clone)]
pub struct Config {
    pub path: PathBuf,
    pub text: String,
    pub run: BTreeMap<String, Entry>,
    pub sections: Vec<Section>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut cfg = Config::parse(&text)?;
        cfg.path = path.to_path_buf();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut run = BTreeMap::new();
        let mut sections: Vec<Section> = Vec::new();
        let mut in_run = false;
        let mut seen_header = false;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let inner = rest.strip_suffix(']').ok_or_else(|| CliError::Parse {
                    line,
                    message: "unterminated section header".into(),
                })?;
                let words: Vec<&str> = inner.split_whitespace().collect();
                seen_header = true;
                match words.as_slice() {
                    ["run"] => in_run = true,
                    [kind, name] if SECTION_KINDS.contains(kind) => {
                        if !valid_name(name) {
                            return Err(CliError::Parse {
                                line,
                                message: format!("invalid name `{name}`"),
                            });
                        }
                        if sections.iter().any(|s| s.kind == *kind && s.name == *name) {
                            return Err(CliError::Parse {
                                line,
                                message: format!("duplicate {kind} `{name}`"),
                            });
                        }
                        in_run = false;
                        sections.push(Section {
                            kind: kind.to_string(),
                            name: name.to_string(),
                            line,
                            entries: BTreeMap::new(),
                        });
                    }
                    _ => {
                        return Err(CliError::Parse {
                            line,
                            message: format!(
                                "expected `[run]` or `[<{}> <name>]`",
                                SECTION_KINDS.join("|")
                            ),
                        })
                    }
                }
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| CliError::Parse {
                line,
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Parse {
                    line,
                    message: "empty key".into(),
                });
            }
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            let table = if !seen_header || in_run {
                &mut run
            } else {
                &mut sections.last_mut().expect("header seen").entries
            };
            if table.insert(key.clone(), entry).is_some() {
                return Err(CliError::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Config {
            path: PathBuf::new(),
            text: text.to_string(),
            run,
            sections,
        })
    }

    pub fn find(&self, kind: &str, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == kind && s.name == name)
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.kind == kind)
    }

    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    /// Apply `key=value` overrides. Keys are `run.<key>` (or a bare
    /// `<key>` for the run section) or `<kind>.<name>.<key>`.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let bad = |m: &str| CliError::Override {
                spec: o.clone(),
                message: m.to_string(),
            };
            let (key, value) = o.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let entry = Entry {
                value: value.trim().to_string(),
                line: 0,
            };
            let key = key.trim();
            let parts: Vec<&str> = key.splitn(3, '.').collect();
            match parts.as_slice() {
                [k] => {
                    self.run.insert(k.to_string(), entry);
                }
                ["run", k] => {
                    self.run.insert(k.to_string(), entry);
                }
                [kind, name, k] if SECTION_KINDS.contains(kind) => {
                    let s = self
                        .sections
                        .iter_mut()
                        .find(|s| s.kind == *kind && s.name == *name)
                        .ok_or_else(|| bad(&format!("no {kind} named `{name}`")))?;
                    s.entries.insert(k.to_string(), entry);
                }
                _ => return Err(bad("key must be `run.<key>` or `<kind>.<name>.<key>`")),
            }
        }
        Ok(())
    }

    pub fn run_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.run.get(key) {
            None => Ok(default),
            Some(e) => e.value.parse().map_err(|_| CliError::Invalid {
                entity: "run".into(),
                message: format!("bad value `{}` for `{key}`", e.value),
            }),
        }
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}
