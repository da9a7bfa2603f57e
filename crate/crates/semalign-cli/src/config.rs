//! Flat key=value config files mirroring the CLI flags. Command-line values
//! take precedence over file values, which take precedence over defaults.

use crate::error::CliError;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Config {
                key: format!("line {}", lineno + 1),
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Resolves one setting from CLI, file, then default.
pub fn resolve<T>(cli: Option<T>, file: &FileConfig, key: &str, default: T) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    match cli {
        Some(v) => Ok(v),
        None => match file.raw(key) {
            Some(raw) => raw.parse().map_err(|e: T::Err| CliError::Config {
                key: key.to_string(),
                message: e.to_string(),
            }),
            None => Ok(default),
        },
    }
}

/// Resolves an optional setting (no default).
pub fn resolve_opt<T>(cli: Option<T>, file: &FileConfig, key: &str) -> Result<Option<T>, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    match cli {
        Some(v) => Ok(Some(v)),
        None => match file.raw(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e: T::Err| CliError::Config {
                    key: key.to_string(),
                    message: e.to_string(),
                }),
            None => Ok(None),
        },
    }
}

/// Parses a comma-separated list such as `1,2,5,10`.
pub fn parse_list<T>(raw: &str, key: &str) -> Result<Vec<T>, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    raw.split(',')
        .map(|part| {
            part.trim().parse().map_err(|e: T::Err| CliError::Config {
                key: key.to_string(),
                message: format!("bad list element {part:?}: {e}"),
            })
        })
        .collect()
}
