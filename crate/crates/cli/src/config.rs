//! Flat key=value run configuration with layered overrides.
//!
//! Precedence, lowest to highest: built-in defaults, the `--config` file,
//! `ENDGEN_<KEY>` environment variables, command-line flags. Unknown keys are
//! rejected wherever they appear, and the fully merged configuration is
//! echoed line by line before a command runs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use endgen_core::model::Variant;

use crate::CliError;

/// Every recognized key with its default value and a one-line description.
pub const KNOWN_KEYS: &[(&str, &str, &str)] = &[
    ("annotations", "", "optional path to human score rows for eval"),
    ("batch_size", "8", "stories per optimizer step"),
    ("beam", "1", "beam width; 1 decodes greedily"),
    ("bleu", "corpus", "BLEU granularity: corpus or sentence"),
    ("clip_norm", "5.0", "global gradient-norm cap"),
    ("context_dim", "32", "fused context vector width"),
    ("corpus", "data/corpus.tsv", "training corpus, 5 sentences per line"),
    ("dev_fraction", "0.05", "held-out fraction for perplexity monitoring"),
    ("embeddings", "", "optional pretrained word-vector file for preprocess"),
    ("epochs", "10", "training epochs"),
    ("eval_corpus", "", "corpus for generate/eval/attn; empty reuses `corpus`"),
    ("eval_every", "1", "epochs between dev passes / checkpoint writes"),
    ("gru_hidden", "16", "per-direction width of the triple-memory encoder"),
    ("hidden_dim", "64", "LSTM hidden width"),
    ("layers", "2", "LSTM stack depth"),
    ("learning_rate", "0.001", "Adam step size"),
    ("max_len", "30", "generation length cap"),
    ("pos", "", "part-of-speech lexicon for triple ingestion"),
    ("relation_dim", "0", "relation vector width; 0 follows word_dim"),
    ("seed", "0", "master random seed"),
    ("triples", "", "raw knowledge-triple dump for preprocess"),
    ("variant", "ie", "model variant: ie, ie-ga, or ie-ca"),
    ("vocab_cap", "50000", "vocabulary size cap including specials"),
    ("word_dim", "32", "word vector width"),
    ("workdir", "work", "directory for every produced artifact"),
    ("workers", "1", "threads for evaluation passes"),
];

/// Environment variables in our prefix that are not run configuration.
const ENV_IGNORE: &[&str] = &["ENDGEN_REAL_CORPUS", "ENDGEN_REAL_TRIPLES", "ENDGEN_REAL_POS"];

#[derive(Debug, Clone)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    /// Keys set by file, environment, or flag — as opposed to defaults.
    explicit: BTreeSet<String>,
}

impl RunConfig {
    pub fn defaults() -> RunConfig {
        RunConfig {
            values: KNOWN_KEYS
                .iter()
                .map(|(k, d, _)| (k.to_string(), d.to_string()))
                .collect(),
            explicit: BTreeSet::new(),
        }
    }

    fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<(), CliError> {
        if !self.values.contains_key(key) {
            return Err(CliError::Usage(format!(
                "unknown configuration key `{key}` (from {origin}); known keys: {}",
                KNOWN_KEYS.iter().map(|(k, _, _)| *k).collect::<Vec<_>>().join(", ")
            )));
        }
        self.values.insert(key.to_string(), value.to_string());
        self.explicit.insert(key.to_string());
        Ok(())
    }

    /// Merge a `key=value` file: one pair per line, `#` comments allowed.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{}:{}: expected key=value, found {line:?}",
                    path.display(),
                    i + 1
                )));
            };
            self.set(key.trim(), value.trim(), &format!("{}", path.display()))?;
        }
        Ok(())
    }

    /// Merge `ENDGEN_<KEY>` environment variables. Unknown variables under
    /// the prefix are rejected, except the documented non-config ones.
    pub fn apply_env(&mut self) -> Result<(), CliError> {
        for (name, value) in std::env::vars() {
            let Some(rest) = name.strip_prefix("ENDGEN_") else {
                continue;
            };
            if ENV_IGNORE.contains(&name.as_str()) {
                continue;
            }
            self.set(&rest.to_lowercase(), &value, "environment")?;
        }
        Ok(())
    }

    /// Merge one command-line override.
    pub fn apply_flag(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
        self.explicit.insert(key.to_string());
    }

    /// Print the full merged configuration, one `config key=value` line per
    /// key, sorted.
    pub fn echo(&self) {
        for (k, v) in &self.values {
            println!("config {k}={v}");
        }
    }

    pub fn was_set(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    pub fn str_(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_default()
    }

    /// Empty string means "not provided".
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.str_(key);
        if v.is_empty() {
            None
        } else {
            Some(PathBuf::from(v))
        }
    }

    pub fn usize_(&self, key: &str) -> Result<usize, CliError> {
        self.str_(key).parse().map_err(|_| {
            CliError::Usage(format!("key `{key}` needs a non-negative integer, got {:?}", self.str_(key)))
        })
    }

    pub fn u64_(&self, key: &str) -> Result<u64, CliError> {
        self.str_(key).parse().map_err(|_| {
            CliError::Usage(format!("key `{key}` needs a non-negative integer, got {:?}", self.str_(key)))
        })
    }

    pub fn f64_(&self, key: &str) -> Result<f64, CliError> {
        self.str_(key).parse().map_err(|_| {
            CliError::Usage(format!("key `{key}` needs a number, got {:?}", self.str_(key)))
        })
    }

    pub fn variant(&self) -> Result<Variant, CliError> {
        Variant::parse(self.str_("variant")).ok_or_else(|| {
            CliError::Usage(format!(
                "key `variant` must be ie, ie-ga, or ie-ca, got {:?}",
                self.str_("variant")
            ))
        })
    }

    /// `relation_dim`, defaulting to `word_dim` when left at 0.
    pub fn relation_dim(&self) -> Result<usize, CliError> {
        let r = self.usize_("relation_dim")?;
        if r == 0 {
            self.usize_("word_dim")
        } else {
            Ok(r)
        }
    }
}
