//! Flat key-value experiment configuration.
//!
//! The file format is one `key = value` pair per line, `#` comments, and
//! blank lines. Flags override file values, file values override defaults,
//! and the resolved merge is persisted next to the results so a run can be
//! reproduced from its own snapshot.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sem_core::{Error, Result};

/// Parsed contents of a config file. Keys are unordered; later duplicates
/// win, matching the override semantics of the merge.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        ConfigFile::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::format(format!("config line {}: expected key = value, got {raw:?}", lineno + 1))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }
}

/// Merges flag values over file values over defaults, recording every
/// resolved pair for the snapshot.
pub struct Resolver<'a> {
    file: &'a ConfigFile,
    resolved: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a ConfigFile) -> Self {
        Resolver { file, resolved: BTreeMap::new() }
    }

    fn parse_key<T>(key: &str, s: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        s.parse::<T>()
            .map_err(|e| Error::format(format!("config key {key}: cannot parse {s:?}: {e}")))
    }

    /// Flag wins over file value over default; the outcome lands in the
    /// snapshot.
    pub fn pick<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.raw(key) {
                Some(s) => Self::parse_key(key, s)?,
                None => default,
            },
        };
        self.resolved.insert(key.to_string(), format!("{value}"));
        Ok(value)
    }

    /// Like [`pick`](Self::pick) without a default: a key absent from both
    /// sources stays `None` and is omitted from the snapshot.
    pub fn pick_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.raw(key) {
                Some(s) => Some(Self::parse_key(key, s)?),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), format!("{v}"));
        }
        Ok(value)
    }

    /// Requires a value from flag or file; there is no sensible default.
    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        self.pick_opt(key, flag)?
            .ok_or_else(|| Error::param(format!("missing required key {key} (flag --{key} or config entry)")))
    }

    /// Records a value computed after resolution (for example a default
    /// read from a checkpoint) so the snapshot stays sufficient to re-run.
    pub fn record(&mut self, key: &str, value: impl fmt::Display) {
        self.resolved.insert(key.to_string(), format!("{value}"));
    }

    /// The resolved merge as a sorted `key = value` listing.
    pub fn snapshot(&self, header: &str) -> String {
        let mut out = format!("# {header}\n");
        for (k, v) in &self.resolved {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// Comma-separated list of floats, e.g. `0.01,0.1,1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            if part.is_empty() {
                return Err(format!("empty entry in list {s:?}"));
            }
            out.push(part.parse::<f64>().map_err(|e| format!("{part:?}: {e}"))?);
        }
        Ok(FloatList(out))
    }
}

impl fmt::Display for FloatList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| format!("{x}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Comma-separated list of positive integers, e.g. `64,32`.
#[derive(Clone, Debug, PartialEq)]
pub struct UintList(pub Vec<usize>);

impl FromStr for UintList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',') {
            let part = part.trim();
            if part.is_empty() {
                return Err(format!("empty entry in list {s:?}"));
            }
            out.push(part.parse::<usize>().map_err(|e| format!("{part:?}: {e}"))?);
        }
        Ok(UintList(out))
    }
}

impl fmt::Display for UintList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| format!("{x}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_blanks_and_pairs() {
        let cfg = ConfigFile::parse("# header\n\n a = 1 \nb=two\n").unwrap();
        assert_eq!(cfg.raw("a"), Some("1"));
        assert_eq!(cfg.raw("b"), Some("two"));
        assert_eq!(cfg.raw("c"), None);
    }

    #[test]
    fn rejects_lines_without_a_separator() {
        assert!(ConfigFile::parse("just words\n").is_err());
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let cfg = ConfigFile::parse("x = 2\n").unwrap();
        let mut r = Resolver::new(&cfg);
        assert_eq!(r.pick("x", Some(3u64), 1).unwrap(), 3);
        assert_eq!(r.pick("y", None::<u64>, 7).unwrap(), 7);
        let mut r2 = Resolver::new(&cfg);
        assert_eq!(r2.pick("x", None::<u64>, 1).unwrap(), 2);
    }

    #[test]
    fn snapshot_is_sorted_and_reparseable() {
        let cfg = ConfigFile::empty();
        let mut r = Resolver::new(&cfg);
        r.pick("zeta", None::<u64>, 9).unwrap();
        r.pick("alpha", None::<u64>, 1).unwrap();
        let snap = r.snapshot("sem test");
        assert!(snap.starts_with("# sem test\nalpha = 1\nzeta = 9\n"));
        let back = ConfigFile::parse(&snap).unwrap();
        assert_eq!(back.raw("zeta"), Some("9"));
    }

    #[test]
    fn lists_roundtrip_through_display() {
        let f: FloatList = "0.01, 0.1,1".parse().unwrap();
        assert_eq!(f.0, vec![0.01, 0.1, 1.0]);
        assert_eq!(format!("{f}"), "0.01,0.1,1");
        let u: UintList = "64,32".parse().unwrap();
        assert_eq!(format!("{u}"), "64,32");
        assert!("1,,2".parse::<FloatList>().is_err());
    }
}
