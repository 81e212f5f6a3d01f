//! Parameter resolution: command-line flag, then `key = value` config file,
//! then built-in default. Every resolved value is recorded for the output
//! header.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, (usize, String)>,
    used: BTreeSet<String>,
    resolved: Vec<(String, String)>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::parse(&text).map_err(|e| match e {
                    CliError::Usage(msg) => CliError::Usage(format!("{}: {msg}", p.display())),
                    other => other,
                })
            }
        }
    }

    /// Parses flat `key = value` text. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("line {}: expected 'key = value'", n + 1)))?;
            let key = key.trim().replace('_', "-");
            if key.is_empty() {
                return Err(CliError::Usage(format!("line {}: empty key", n + 1)));
            }
            if file.insert(key.clone(), (n + 1, value.trim().to_string())).is_some() {
                return Err(CliError::Usage(format!("line {}: duplicate key '{key}'", n + 1)));
            }
        }
        Ok(Self { file, ..Self::default() })
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        match self.file.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config line {line}: invalid value for '{key}': {e}"))),
        }
    }

    /// Resolves `key` and records it in the header.
    pub fn value<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let v = self.resolve(key, flag)?.unwrap_or(default);
        self.resolved.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    /// Like [`Settings::value`] with no default; absent values are recorded as `none`.
    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let v = self.resolve(key, flag)?;
        let shown = v.as_ref().map_or_else(|| "none".to_string(), T::to_string);
        self.resolved.push((key.to_string(), shown));
        Ok(v)
    }

    pub fn required<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let v =
            self.resolve(key, flag)?.ok_or_else(|| CliError::Usage(format!("missing required parameter '--{key}'")))?;
        self.resolved.push((key.to_string(), v.to_string()));
        Ok(v)
    }

    /// Output destinations are not echoed: they do not affect file contents.
    pub fn output(
        &mut self,
        key: &str,
        flag: Option<PathBuf>,
        dir: &Path,
        default_name: &str,
    ) -> Result<PathBuf, CliError> {
        let v: Option<String> = self.resolve(key, flag.map(|p| p.to_string_lossy().into_owned()))?;
        Ok(v.map(PathBuf::from).unwrap_or_else(|| dir.join(default_name)))
    }

    pub fn optional_output(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
        let v: Option<String> = self.resolve(key, flag.map(|p| p.to_string_lossy().into_owned()))?;
        Ok(v.map(PathBuf::from))
    }

    /// Records a value derived from other parameters.
    pub fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.push((key.to_string(), value.to_string()));
    }

    pub fn resolve<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let file = self.file_value(key)?;
        Ok(flag.or(file))
    }

    /// Rejects config-file keys that the command never asked for.
    pub fn finish(&self) -> Result<(), CliError> {
        match self.file.iter().find(|(k, _)| !self.used.contains(*k)) {
            Some((k, (line, _))) => Err(CliError::Usage(format!("config line {line}: unknown key '{k}'"))),
            None => Ok(()),
        }
    }

    /// `# key = value` lines for every resolved parameter, in resolution order.
    pub fn header(&self, command: &str) -> String {
        let mut out = format!("# rerope {command}\n");
        for (k, v) in &self.resolved {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let mut s = Settings::parse("theta = 500\n# comment\ndim=8\n").unwrap();
        assert_eq!(s.value("theta", Some(2.0), 1e4).unwrap(), 2.0);
        assert_eq!(s.value("dim", None, 32usize).unwrap(), 8);
        assert_eq!(s.value("positions", None, 50usize).unwrap(), 50);
        s.finish().unwrap();
        assert_eq!(s.header("heatmap"), "# rerope heatmap\n# theta = 2\n# dim = 8\n# positions = 50\n");
    }

    #[test]
    fn bad_files() {
        assert!(Settings::parse("novalue\n").is_err());
        assert!(Settings::parse("a = 1\na = 2\n").is_err());
        let mut s = Settings::parse("dim = x\n").unwrap();
        assert!(s.value("dim", None, 1usize).is_err());
        let s = Settings::parse("typo = 1\n").unwrap();
        assert!(matches!(s.finish(), Err(CliError::Usage(_))));
    }
}
