//! Flat `key=value` config files merged under command-line flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parsed config file. Blank lines and lines starting with `#` are ignored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i as u64 + 1, msg: format!("expected key=value, got `{line}`") })?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::at(path))?;
        Self::parse(&text)
    }

    /// Typed value of `key`, if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::Config(format!("config key `{key}`: {e}"))))
            .transpose()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

/// Flag value if given, else config value, else `default`.
pub fn pick<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => v,
        None => file.get(key)?.unwrap_or(default),
    })
}

/// Like [`pick`] without a default.
pub fn pick_opt<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => Some(v),
        None => file.get(key)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let f = ConfigFile::parse("# job\nn = 4\nmode=recoded\n\nb=4096\nB=65536\n").unwrap();
        assert_eq!(pick(Some(8usize), &f, "n", 1).unwrap(), 8);
        assert_eq!(pick(None, &f, "n", 1usize).unwrap(), 4);
        assert_eq!(pick(None, &f, "k", 1000usize).unwrap(), 1000);
        assert_eq!(pick_opt::<usize>(None, &f, "B").unwrap(), Some(65536));
        assert_eq!(pick_opt::<usize>(None, &f, "b").unwrap(), Some(4096));
        assert_eq!(f.get::<String>("mode").unwrap().as_deref(), Some("recoded"));
    }

    #[test]
    fn malformed_lines_are_reported() {
        assert!(matches!(ConfigFile::parse("n=1\noops\n"), Err(Error::Parse { line: 2, .. })));
        let f = ConfigFile::parse("n=lots").unwrap();
        assert!(matches!(f.get::<usize>("n"), Err(Error::Config(_))));
    }
}
