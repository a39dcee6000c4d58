//! Run configuration: a line-based `key = value` file plus command-line
//! overrides. Relative paths in a file are resolved against the file's
//! directory; relative paths given on the command line against the working
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::failure::Failure;

pub const KEYS: &[&str] = &[
    // what to run
    "task",
    "preset",
    "mtl",
    // paths
    "data",
    "tweets",
    "lexicon",
    "resources",
    "vocab",
    "checkpoint",
    "normalizer",
    "log",
    "input",
    "output",
    // optimizer
    "learning_rate",
    "batch_size",
    "epochs",
    "lambda",
    "weight_decay",
    "beta1",
    "beta2",
    "eps",
    "seed",
    "eval_every",
    // encoder
    "d_model",
    "n_layers",
    "n_heads",
    "ffn",
    "max_len",
    "dropout",
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    base: PathBuf,
    origin: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, Entry>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &path.display().to_string(), &base)
    }

    pub fn parse(text: &str, name: &str, base: &Path) -> Result<Self, Failure> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let origin = format!("{name}:{}", i + 1);
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("{origin}: expected `key = value`, found `{line}`")))?;
            let k = k.trim();
            if cfg.entries.contains_key(k) {
                return Err(Failure::usage(format!("{origin}: `{k}` is set twice")));
            }
            cfg.insert(k, v.trim(), base, origin)?;
        }
        Ok(cfg)
    }

    fn insert(&mut self, key: &str, value: &str, base: &Path, origin: String) -> Result<(), Failure> {
        if !KEYS.contains(&key) {
            return Err(Failure::usage(format!("{origin}: unknown key `{key}`")));
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                base: base.to_path_buf(),
                origin,
            },
        );
        Ok(())
    }

    /// A command-line override; replaces any value from the file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Failure> {
        self.insert(key, value, Path::new(""), format!("--set {key}"))
    }

    /// Parses `key=value` (as given to `--set`).
    pub fn set_pair(&mut self, pair: &str) -> Result<(), Failure> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("--set expects key=value, found `{pair}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn require(&self, key: &str) -> Result<&str, Failure> {
        self.get(key)
            .ok_or_else(|| Failure::usage(format!("missing required setting `{key}`")))
    }

    pub fn num<T: FromStr>(&self, key: &str) -> Result<Option<T>, Failure> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| Failure::usage(format!("{}: `{key}` has bad value `{}`", e.origin, e.value))),
        }
    }

    pub fn flag(&self, key: &str) -> Result<Option<bool>, Failure> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => match e.value.as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                v => Err(Failure::usage(format!("{}: `{key}` must be true or false, found `{v}`", e.origin))),
            },
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.entries.get(key).map(|e| e.base.join(&e.value))
    }

    /// A path that must already exist.
    pub fn input_path(&self, key: &str) -> Result<Option<PathBuf>, Failure> {
        match self.path(key) {
            Some(p) if !p.exists() => Err(Failure::usage(format!("`{key}`: {} does not exist", p.display()))),
            p => Ok(p),
        }
    }

    pub fn require_input_path(&self, key: &str) -> Result<PathBuf, Failure> {
        self.require(key)?;
        Ok(self.input_path(key)?.expect("present"))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf, Failure> {
        self.require(key)?;
        Ok(self.path(key).expect("present"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let cfg = RunConfig::parse(
            "# comment\ntask = classify\n\ndata = train.tsv\nlearning_rate = 1e-3\n",
            "run.cfg",
            Path::new("exp"),
        )
        .unwrap();
        assert_eq!(cfg.get("task"), Some("classify"));
        assert_eq!(cfg.path("data"), Some(PathBuf::from("exp/train.tsv")));
        assert_eq!(cfg.num::<f64>("learning_rate").unwrap(), Some(1e-3));
        assert_eq!(cfg.num::<usize>("epochs").unwrap(), None);
    }

    #[test]
    fn rejects_bad_lines() {
        let p = Path::new("");
        assert!(RunConfig::parse("colour = red\n", "c", p).is_err());
        assert!(RunConfig::parse("task classify\n", "c", p).is_err());
        assert!(RunConfig::parse("task = a\ntask = b\n", "c", p).is_err());
        let cfg = RunConfig::parse("epochs = ten\n", "c", p).unwrap();
        assert!(cfg.num::<usize>("epochs").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::parse("seed = 1\ndata = a.tsv\n", "c", Path::new("dir")).unwrap();
        cfg.set_pair("seed=9").unwrap();
        cfg.set("data", "b.tsv").unwrap();
        assert_eq!(cfg.num::<u64>("seed").unwrap(), Some(9));
        assert_eq!(cfg.path("data"), Some(PathBuf::from("b.tsv")));
        assert!(cfg.set_pair("nope").is_err());
        assert!(cfg.set("bogus", "1").is_err());
    }
}
