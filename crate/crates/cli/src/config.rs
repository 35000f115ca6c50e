//! Stage configuration files.
//!
//! ```text
//! # comment
//! seed = 7
//! [train]
//! arch = toy
//! steps = 500
//! [test]
//! model = constant:0
//! model = brightness:100
//! ```
//!
//! Keys before the first section apply to every stage. A key may repeat;
//! list-valued options collect all values, others take the last one.
//! Relative paths resolve against the file's directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, CliResult};

const GLOBAL_KEYS: &[&str] = &["seed", "out", "bounds"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    /// `(section, key, value)` in file order; the global section is "".
    entries: Vec<(String, String, String)>,
    dir: PathBuf,
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl ConfigFile {
    pub fn parse(text: &str, dir: impl Into<PathBuf>) -> CliResult<Self> {
        let mut section = String::new();
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {}: expected `key = value`, got {line:?}", i + 1)))?;
            if key.trim().is_empty() {
                return Err(CliError::usage(format!("config line {}: empty key", i + 1)));
            }
            entries.push((section.clone(), normalize_key(key), value.trim().to_string()));
        }
        Ok(Self { entries, dir: dir.into() })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().map(Path::to_path_buf).unwrap_or_default())
    }

    /// Rejects unknown keys in `section` and in the global part.
    pub fn check_keys(&self, section: &str, known: &[&str]) -> CliResult<()> {
        for (s, key, _) in &self.entries {
            let ok = if s.is_empty() {
                GLOBAL_KEYS.contains(&key.as_str())
            } else if s == section {
                known.contains(&key.as_str()) || GLOBAL_KEYS.contains(&key.as_str())
            } else {
                true
            };
            if !ok {
                let place = if s.is_empty() { "top level".to_string() } else { format!("section [{s}]") };
                return Err(CliError::usage(format!("unknown config key {key:?} at {place}")));
            }
        }
        Ok(())
    }

    /// Values of `key` in `section`, falling back to the global section.
    fn values(&self, section: &str, key: &str) -> Vec<&str> {
        let pick = |s: &str| -> Vec<&str> {
            self.entries
                .iter()
                .filter(|(es, k, _)| es == s && k == key)
                .map(|(_, _, v)| v.as_str())
                .collect()
        };
        let own = pick(section);
        if own.is_empty() {
            pick("")
        } else {
            own
        }
    }
}

/// Command-line flags layered over one section of an optional config file.
pub struct Settings<'a> {
    file: Option<&'a ConfigFile>,
    section: &'static str,
}

impl<'a> Settings<'a> {
    pub fn new(file: Option<&'a ConfigFile>, section: &'static str, known: &[&str]) -> CliResult<Self> {
        if let Some(f) = file {
            f.check_keys(section, known)?;
        }
        Ok(Self { file, section })
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.file.and_then(|f| f.values(self.section, key).last().copied())
    }

    /// The flag value if given, else the parsed config value.
    pub fn value<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::usage(format!("config key {key} = {v:?}: {e}"))))
            .transpose()
    }

    pub fn required<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.value(flag, key)?
            .ok_or_else(|| CliError::usage(format!("missing --{key} (flag or `{key}` in [{}])", self.section)))
    }

    pub fn or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.value(flag, key)?.unwrap_or(default))
    }

    pub fn flag(&self, flag: bool, key: &str) -> CliResult<bool> {
        if flag {
            return Ok(true);
        }
        self.or(None, key, false)
    }

    /// Paths from the config file are relative to its directory.
    pub fn path(&self, flag: Option<PathBuf>, key: &str) -> CliResult<Option<PathBuf>> {
        if flag.is_some() {
            return Ok(flag);
        }
        Ok(self.raw(key).map(|v| self.file.expect("value came from a file").dir.join(v)))
    }

    pub fn required_path(&self, flag: Option<PathBuf>, key: &str) -> CliResult<PathBuf> {
        self.path(flag, key)?
            .ok_or_else(|| CliError::usage(format!("missing --{key} (flag or `{key}` in [{}])", self.section)))
    }

    /// All values of a repeatable option; flags replace the file's list.
    pub fn list(&self, flags: Vec<String>, key: &str) -> Vec<String> {
        if !flags.is_empty() {
            return flags;
        }
        self.file
            .map(|f| f.values(self.section, key).into_iter().map(str::to_string).collect())
            .unwrap_or_default()
    }

    pub fn path_list(&self, flags: Vec<PathBuf>, key: &str) -> Vec<PathBuf> {
        if !flags.is_empty() {
            return flags;
        }
        self.file
            .map(|f| f.values(self.section, key).into_iter().map(|v| f.dir.join(v)).collect())
            .unwrap_or_default()
    }
}
