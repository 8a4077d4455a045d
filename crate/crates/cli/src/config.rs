//! `key = value` config files layered under command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Values read from a config file, consumed key by key. Keys are matched
/// with `-` and `_` treated alike.
#[derive(Debug, Default)]
pub struct Layer {
    source: String,
    values: BTreeMap<String, (usize, String)>,
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl Layer {
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("{source}:{}: expected `key = value`", i + 1)));
            };
            let key = normalize_key(key);
            if values.insert(key.clone(), (i + 1, value.trim().to_string())).is_some() {
                return Err(CliError::Usage(format!("{source}:{}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Self { source: source.to_string(), values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text, &p.display().to_string())
            }
        }
    }

    /// The flag value if given, else the file value for `key`.
    pub fn take<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let from_file = self.values.remove(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match from_file {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("{}:{line}: bad value for `{key}`: {e}", self.source))),
        }
    }

    pub fn take_or<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.take(key, flag)?.unwrap_or(default))
    }

    /// Fails if the file had keys nobody asked for.
    pub fn finish(self) -> Result<(), CliError> {
        if self.values.is_empty() {
            return Ok(());
        }
        let all: Vec<String> = self.values.iter().map(|(k, (line, _))| format!("`{k}` (line {line})")).collect();
        Err(CliError::Usage(format!("{}: unknown key(s): {}", self.source, all.join(", "))))
    }
}

/// Comma-separated list.
pub fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

/// `3-10` or `3,5,7`.
pub fn parse_densities(s: &str) -> Result<Vec<usize>, String> {
    let bad = || format!("bad density list {s:?}; expected e.g. 3-10 or 3,5,7");
    let out: Vec<usize> = if let Some((a, b)) = s.split_once('-') {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        split_list(s).iter().map(|v| v.parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let mut layer = Layer::parse("episodes = 7\nseed=3 # comment\n", "t").unwrap();
        assert_eq!(layer.take::<usize>("episodes", Some(2)).unwrap(), Some(2));
        assert_eq!(layer.take::<u64>("seed", None).unwrap(), Some(3));
        layer.finish().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut layer = Layer::parse("episodes = 7\nbogus = 1\n", "t").unwrap();
        layer.take::<usize>("episodes", None).unwrap();
        let err = layer.finish().unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn underscores_match_dashes() {
        let mut layer = Layer::parse("psv_distance = 0.5", "t").unwrap();
        assert_eq!(layer.take::<f64>("psv-distance", None).unwrap(), Some(0.5));
    }

    #[test]
    fn bad_lines() {
        assert!(Layer::parse("episodes 7", "t").is_err());
        assert!(Layer::parse("a=1\na=2", "t").is_err());
        let mut layer = Layer::parse("episodes = many", "t").unwrap();
        assert!(layer.take::<usize>("episodes", None).is_err());
    }

    #[test]
    fn densities() {
        assert_eq!(parse_densities("3-5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_densities("2, 4").unwrap(), vec![2, 4]);
        assert!(parse_densities("5-3").is_err());
        assert!(parse_densities("").is_err());
    }
}
