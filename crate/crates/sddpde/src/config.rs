//! Flat key/value experiment configuration.
//!
//! The format is line-oriented text: `key = value` entries with dotted
//! keys, optional `[section]` headers that prefix the keys below them, and
//! `#` comments. There is no nesting beyond the dotted names and no typed
//! schema; values are parsed on demand by the typed getters.
//!
//! ```text
//! [model.delay]
//! kind = threshold
//! c1 = 1.0
//! ```
//!
//! Parsing is strict: malformed lines, duplicate keys, oversized input and
//! (at extraction time) unknown keys are all rejected, since configs may
//! come from untrusted sources.

use std::collections::BTreeMap;
use thiserror::Error;

const MAX_LINES: usize = 10_000;
const MAX_TOKEN: usize = 4096;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config key {key}: {msg}")]
    Value { key: String, msg: String },
    #[error("unknown config keys: {0}")]
    UnknownKeys(String),
    #[error("environment override {var}: {msg}")]
    Env { var: String, msg: String },
}

/// Parsed key/value map with line provenance.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, (String, usize)>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key.len() <= MAX_TOKEN
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !key.starts_with('.')
        && !key.ends_with('.')
        && !key.contains("..")
}

impl ConfigMap {
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut prefix = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            if lineno > MAX_LINES {
                return Err(ConfigError::Parse {
                    line: lineno,
                    msg: "too many lines".into(),
                });
            }
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(stripped) = line.strip_prefix('[') {
                let section = stripped.strip_suffix(']').ok_or(ConfigError::Parse {
                    line: lineno,
                    msg: "unterminated section header".into(),
                })?;
                let section = section.trim();
                if !section.is_empty() && !valid_key(section) {
                    return Err(ConfigError::Parse {
                        line: lineno,
                        msg: format!("invalid section name {section:?}"),
                    });
                }
                prefix = section.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: lineno,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !valid_key(key) {
                return Err(ConfigError::Parse {
                    line: lineno,
                    msg: format!("invalid key {key:?}"),
                });
            }
            if value.len() > MAX_TOKEN {
                return Err(ConfigError::Parse {
                    line: lineno,
                    msg: "value too long".into(),
                });
            }
            let full = if prefix.is_empty() {
                key.to_string()
            } else {
                format!("{prefix}.{key}")
            };
            if entries.insert(full.clone(), (value.to_string(), lineno)).is_some() {
                return Err(ConfigError::Parse {
                    line: lineno,
                    msg: format!("duplicate key {full}"),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Applies `PREFIX_SOME_KEY=value` environment overrides. Variable
    /// names are matched case-insensitively against the known keys with
    /// dots flattened to underscores.
    pub fn apply_env_overrides<I>(
        &mut self,
        env_prefix: &str,
        known_keys: &[&str],
        vars: I,
    ) -> Result<(), ConfigError>
    where
        I: Iterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(env_prefix) else {
                continue;
            };
            let needle = rest.to_ascii_uppercase();
            let matched: Vec<&&str> = known_keys
                .iter()
                .filter(|k| k.replace('.', "_").to_ascii_uppercase() == needle)
                .collect();
            match matched.as_slice() {
                [key] => {
                    self.entries.insert(key.to_string(), (value.clone(), 0));
                }
                [] => {
                    return Err(ConfigError::Env {
                        var: name,
                        msg: "does not match any config key".into(),
                    });
                }
                _ => {
                    return Err(ConfigError::Env {
                        var: name,
                        msg: "ambiguous override".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), (value.to_string(), 0));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn take_raw(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(v, _)| v)
    }

    pub fn take_str(&mut self, key: &str, default: &str) -> String {
        self.take_raw(key).unwrap_or_else(|| default.to_string())
    }

    pub fn take_f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.take_raw(key) {
            None => Ok(default),
            Some(v) => {
                let parsed: f64 = v.parse().map_err(|_| ConfigError::Value {
                    key: key.into(),
                    msg: format!("expected a number, got {v:?}"),
                })?;
                if !parsed.is_finite() {
                    return Err(ConfigError::Value {
                        key: key.into(),
                        msg: "must be finite".into(),
                    });
                }
                Ok(parsed)
            }
        }
    }

    pub fn take_usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take_raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::Value {
                key: key.into(),
                msg: format!("expected a nonnegative integer, got {v:?}"),
            }),
        }
    }

    pub fn take_u64(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.take_raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::Value {
                key: key.into(),
                msg: format!("expected a nonnegative integer, got {v:?}"),
            }),
        }
    }

    pub fn take_bool(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.take_raw(key) {
            None => Ok(default),
            Some(v) => match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(ConfigError::Value {
                    key: key.into(),
                    msg: format!("expected a boolean, got {other:?}"),
                }),
            },
        }
    }

    pub fn take_f64_list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        match self.take_raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| ConfigError::Value {
                        key: key.into(),
                        msg: format!("expected comma-separated numbers, got {v:?}"),
                    })
                })
                .collect(),
        }
    }

    /// Fails if any key was never consumed; catches typos and stale keys.
    pub fn finish(self) -> Result<(), ConfigError> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let mut leftovers: Vec<String> = self
            .entries
            .iter()
            .map(|(k, (_, line))| format!("{k} (line {line})"))
            .collect();
        leftovers.sort();
        Err(ConfigError::UnknownKeys(leftovers.join(", ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_dotted_keys() {
        let text = "\
# comment
run.kind = solve

[model.delay]
kind = threshold
c1 = 1.5  # trailing comment
";
        let mut map = ConfigMap::parse_str(text).unwrap();
        assert_eq!(map.take_str("run.kind", ""), "solve");
        assert_eq!(map.take_str("model.delay.kind", ""), "threshold");
        assert_eq!(map.take_f64("model.delay.c1", 0.0).unwrap(), 1.5);
        map.finish().unwrap();
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(ConfigMap::parse_str("novalue\n").is_err());
        assert!(ConfigMap::parse_str("[unterminated\n").is_err());
        assert!(ConfigMap::parse_str("bad key = 1\n").is_err());
        assert!(ConfigMap::parse_str("a..b = 1\n").is_err());
        assert!(ConfigMap::parse_str("x = 1\nx = 2\n").is_err());
    }

    #[test]
    fn unknown_keys_are_reported() {
        let mut map = ConfigMap::parse_str("run.kind = solve\nrun.typo = 3\n").unwrap();
        let _ = map.take_str("run.kind", "");
        let err = map.finish().unwrap_err();
        assert!(err.to_string().contains("run.typo"));
    }

    #[test]
    fn env_overrides_match_flattened_keys() {
        let mut map = ConfigMap::parse_str("run.seed = 1\n").unwrap();
        let known = ["run.seed", "model.spectrum.n_modes"];
        map.apply_env_overrides(
            "SDDPDE_",
            &known,
            vec![
                ("SDDPDE_RUN_SEED".to_string(), "7".to_string()),
                ("SDDPDE_MODEL_SPECTRUM_N_MODES".to_string(), "4".to_string()),
                ("OTHER_VAR".to_string(), "ignored".to_string()),
            ]
            .into_iter(),
        )
        .unwrap();
        assert_eq!(map.take_u64("run.seed", 0).unwrap(), 7);
        assert_eq!(map.take_usize("model.spectrum.n_modes", 0).unwrap(), 4);

        let mut map = ConfigMap::parse_str("").unwrap();
        let err = map
            .apply_env_overrides(
                "SDDPDE_",
                &known,
                vec![("SDDPDE_NO_SUCH_KEY".to_string(), "1".to_string())].into_iter(),
            )
            .unwrap_err();
        assert!(err.to_string().contains("does not match"));
    }

    #[test]
    fn typed_getters_validate() {
        let mut map = ConfigMap::parse_str("a = nan\nb = x\nc = maybe\n").unwrap();
        assert!(map.take_f64("a", 0.0).is_err());
        assert!(map.take_usize("b", 0).is_err());
        assert!(map.take_bool("c", false).is_err());
        assert_eq!(map.take_f64("missing", 2.5).unwrap(), 2.5);
    }
}
