//! Flat `key = value` run configuration with dotted section prefixes.
//!
//! Lines starting with `#` are comments. Every key has a default; the
//! resolved configuration (defaults, then file, then overrides) is what a
//! run records beside its outputs.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::PipelineError;

/// Known keys with their defaults. An empty default means "unset".
pub const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("out", "runs/default"),
    ("data.corpus", ""),
    ("data.train", ""),
    ("data.dev", ""),
    ("data.test", ""),
    ("data.format", ""),
    ("data.dev_fraction", "0.1"),
    ("data.test_fraction", "0.2"),
    ("kg.dir", ""),
    ("kge.kind", "complex"),
    ("kge.dim", "200"),
    ("kge.epochs", "100"),
    ("kge.learning_rate", "0.1"),
    ("kge.optimizer", "adagrad"),
    ("kge.margin", "1.0"),
    ("kge.l2_lambda", "0.001"),
    ("kge.negatives", "10"),
    ("kge.batch_size", "512"),
    ("kge.strategy", "mixed"),
    ("kge.min_score", ""),
    ("kge.checkpoint", ""),
    ("encoder.mode", "builtin"),
    ("encoder.dim", "128"),
    ("encoder.vocab_size", "65536"),
    ("encoder.train", "true"),
    ("fusion.mode", "add"),
    ("fusion.dropout", "0.1"),
    ("fusion.learning_rate", "0.05"),
    ("fusion.max_epochs", "100"),
    ("fusion.patience", "5"),
    ("fusion.batch_size", "32"),
    ("fusion.class_weights", "false"),
    ("fusion.force_absent", "false"),
    ("fusion.dir", ""),
    ("holdout.fraction", "0.2"),
    ("synthetic.docs", "5000"),
    ("synthetic.labels", "6"),
    ("synthetic.entity_types", "4"),
    ("synthetic.entities_per_type", "25"),
    ("synthetic.pair_fraction", "0.5"),
    ("synthetic.noise", "0.0"),
    ("synthetic.filler_words", "300"),
    ("synthetic.min_filler", "6"),
    ("synthetic.max_filler", "14"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: DEFAULTS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut cfg = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            cfg.set(k.trim(), v.trim())
                .map_err(|e| PipelineError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(PipelineError::Config(format!("unknown config key `{key}`"))),
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), PipelineError> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| {
            PipelineError::Config(format!("override `{assignment}` is not key=value"))
        })?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("`{key}` is not a known config key"))
    }

    /// `None` for unset (empty) values.
    pub fn optional(&self, key: &str) -> Option<&str> {
        Some(self.raw(key)).filter(|v| !v.is_empty())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, PipelineError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| PipelineError::Config(format!("`{key}` = `{raw}`: {e}")))
    }

    pub fn get_optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, PipelineError>
    where
        T::Err: fmt::Display,
    {
        self.optional(key).map(|_| self.get(key)).transpose()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.optional(key).map(PathBuf::from)
    }

    pub fn seed(&self) -> Result<u64, PipelineError> {
        self.get("seed")
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out"))
    }

    /// Seed for one pipeline stage, derived from the top-level seed.
    pub fn stage_seed(&self, stage: &str) -> Result<u64, PipelineError> {
        Ok(derive_seed(self.seed()?, stage))
    }

    pub fn to_text(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// First eight bytes (little-endian) of SHA-256 over `seed ‖ stage`.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_resolve() {
        let cfg =
            RunConfig::parse("# run\nseed = 7\nkge.dim=16\n\nfusion.mode = concat\n").unwrap();
        assert_eq!(cfg.seed().unwrap(), 7);
        assert_eq!(cfg.get::<usize>("kge.dim").unwrap(), 16);
        assert_eq!(cfg.raw("fusion.mode"), "concat");
        assert_eq!(cfg.raw("kge.kind"), "complex");
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(
            RunConfig::parse("kge.dimm = 3"),
            Err(PipelineError::Config(_))
        ));
        assert!(matches!(
            RunConfig::parse("seed"),
            Err(PipelineError::Config(_))
        ));
        let cfg = RunConfig::parse("kge.dim = many").unwrap();
        assert!(matches!(
            cfg.get::<usize>("kge.dim"),
            Err(PipelineError::Config(_))
        ));
    }

    #[test]
    fn optional_values() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.get_optional::<f64>("kge.min_score").unwrap(), None);
        cfg.apply_override("kge.min_score=0.5").unwrap();
        assert_eq!(cfg.get_optional::<f64>("kge.min_score").unwrap(), Some(0.5));
    }

    #[test]
    fn stage_seeds_differ_and_repeat() {
        assert_eq!(derive_seed(1, "kge"), derive_seed(1, "kge"));
        assert_ne!(derive_seed(1, "kge"), derive_seed(1, "fusion"));
        assert_ne!(derive_seed(1, "kge"), derive_seed(2, "kge"));
    }
}
