//! Run configuration: a flat `key = value` file whose keys mirror the CLI
//! flags, overridden by flags given on the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hqcnn_core::hybrid::{HeadMode, ModelId};

use crate::error::{Error, Result};

/// Every key accepted in a configuration file.
pub const KEYS: &[&str] = &[
    "model",
    "data-root",
    "seed",
    "epochs",
    "lr",
    "batch",
    "head",
    "out",
    "manifest",
    "method",
    "weight-from",
    "checkpoint",
    "split",
    "magnification",
];

/// Merged settings. Later layers replace earlier values key by key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Settings> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Usage(format!(
                    "config line {}: expected key = value, got `{raw}`",
                    n + 1
                ))
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Usage(format!(
                    "config line {}: unknown key `{key}`",
                    n + 1
                )));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Settings { values })
    }

    pub fn load(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        Settings::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        debug_assert!(KEYS.contains(&key), "{key}");
        self.values.insert(key.to_string(), value.to_string());
    }

    /// Sets `key` when `value` is present.
    pub fn override_with<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| Error::Usage(format!("invalid value `{v}` for {key}: {e}")))
            })
            .transpose()
    }

    /// Whitespace-separated list value.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.raw(key)
            .map(|v| v.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelId,
    pub data_root: PathBuf,
    pub seed: u64,
    pub epochs: usize,
    pub lr: f32,
    pub batch: usize,
    pub head: HeadMode,
    pub out: PathBuf,
    pub manifest: Option<PathBuf>,
    pub magnification: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelId::M1,
            data_root: PathBuf::from("data"),
            seed: 0,
            epochs: 100,
            lr: 0.001,
            batch: 4,
            head: HeadMode::Analytic,
            out: PathBuf::from("runs"),
            manifest: None,
            magnification: 400,
        }
    }
}

impl TrainConfig {
    pub fn from_settings(s: &Settings) -> Result<TrainConfig> {
        let d = TrainConfig::default();
        let config = TrainConfig {
            model: s.get("model")?.unwrap_or(d.model),
            data_root: s.get("data-root")?.unwrap_or(d.data_root),
            seed: s.get("seed")?.unwrap_or(d.seed),
            epochs: s.get("epochs")?.unwrap_or(d.epochs),
            lr: s.get("lr")?.unwrap_or(d.lr),
            batch: s.get("batch")?.unwrap_or(d.batch),
            head: s.get("head")?.unwrap_or(d.head),
            out: s.get("out")?.unwrap_or(d.out),
            manifest: s.get("manifest")?,
            magnification: s.get("magnification")?.unwrap_or(d.magnification),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 {
            return Err(Error::Usage("epochs and batch must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Usage(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        if !crate::data::MAGNIFICATIONS.contains(&self.magnification) {
            return Err(Error::Usage(format!(
                "unknown magnification {}",
                self.magnification
            )));
        }
        Ok(())
    }

    /// Head mode with the sampling seed tied to the run seed.
    pub fn head_mode(&self) -> HeadMode {
        match self.head {
            HeadMode::Shots { shots, .. } => HeadMode::Shots {
                shots,
                seed: self.seed,
            },
            HeadMode::Analytic => HeadMode::Analytic,
        }
    }

    /// The effective configuration as `config.<key>` metadata entries.
    pub fn to_meta(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(format!("config.{k}"), v);
        };
        put("model", self.model.to_string());
        put("data-root", self.data_root.display().to_string());
        put("seed", self.seed.to_string());
        put("epochs", self.epochs.to_string());
        put("lr", self.lr.to_string());
        put("batch", self.batch.to_string());
        put("head", self.head.to_string());
        put("out", self.out.display().to_string());
        if let Some(p) = &self.manifest {
            put("manifest", p.display().to_string());
        }
        put("magnification", self.magnification.to_string());
        m
    }

    /// Directory holding this model's run artifacts.
    pub fn run_dir(&self) -> PathBuf {
        self.out.join(self.model.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut s =
            Settings::parse("# run\nmodel = m2\nepochs=7\nlr = 0.01\nhead = shots:100\n").unwrap();
        s.override_with("epochs", Some(3));
        let c = TrainConfig::from_settings(&s).unwrap();
        assert_eq!(c.model, ModelId::M2);
        assert_eq!(c.epochs, 3);
        assert_eq!(c.lr, 0.01);
        assert_eq!(
            c.head,
            HeadMode::Shots {
                shots: 100,
                seed: 0
            }
        );
        assert_eq!(c.batch, 4);
        assert_eq!(c.to_meta()["config.epochs"], "3");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Settings::parse("colour = red").is_err());
        assert!(Settings::parse("just words").is_err());
        let s = Settings::parse("epochs = many").unwrap();
        assert_eq!(TrainConfig::from_settings(&s).unwrap_err().exit_code(), 1);
        let s = Settings::parse("lr = -1").unwrap();
        assert!(TrainConfig::from_settings(&s).is_err());
    }
}
