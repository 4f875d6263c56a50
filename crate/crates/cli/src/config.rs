//! Flat `key = value` run configuration.
//!
//! Values are layered: built-in defaults, then a config file, then
//! command-line overrides. The resolved configuration is written next to
//! every run's artifacts in the same format.

use std::fmt;
use std::path::PathBuf;

use ddarts_core::metric::PlateauRule;
use ddarts_search::engine::SharePolicy;
use ddarts_search::{SearchConfig, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: Option<String>,
    pub out: PathBuf,
    pub search: SearchConfig,
    /// Starting genotype: a handcrafted name or a genotype document path.
    pub start: Option<String>,
    pub data: SyntheticSpec,
    /// Raster file to load instead of generating data.
    pub raster: Option<PathBuf>,
    pub opscore_runs: usize,
    pub opscore_epochs: usize,
    pub opscore_lr: f64,
    pub retrain_epochs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: None,
            out: PathBuf::from("runs"),
            search: SearchConfig::default(),
            start: None,
            data: SyntheticSpec::default(),
            raster: None,
            opscore_runs: 1,
            opscore_epochs: 3,
            opscore_lr: 0.05,
            retrain_epochs: 10,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| ConfigError(format!("{key} = {value:?}: {e}")))
}

fn share_name(share: Option<SharePolicy>) -> &'static str {
    match share {
        None => "auto",
        Some(SharePolicy::PerCell) => "per-cell",
        Some(SharePolicy::Single) => "single",
        Some(SharePolicy::Genotype) => "genotype",
    }
}

fn optional(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_owned())
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let s = &mut self.search;
        match key {
            "name" => self.name = optional(value),
            "out" => self.out = PathBuf::from(value),
            "start" => self.start = optional(value),
            "mode" => s.mode = parse(key, value)?,
            "epochs" => s.epochs = parse(key, value)?,
            "batch_size" => s.batch_size = parse(key, value)?,
            "seed" => s.seed = parse(key, value)?,
            "w01" => s.loss.w01 = parse(key, value)?,
            "wab" => s.loss.wab = parse(key, value)?,
            "parse_method" => s.parse_method = parse(key, value)?,
            "threshold" => s.threshold = parse(key, value)?,
            "channels" => s.channels = parse(key, value)?,
            "cells" => s.cells = parse(key, value)?,
            "steps" => s.steps = parse(key, value)?,
            "search_space" => s.search_space = parse(key, value)?,
            "weight_lr" => s.weight_lr = parse(key, value)?,
            "weight_lr_min" => s.weight_lr_min = parse(key, value)?,
            "momentum" => s.momentum = parse(key, value)?,
            "weight_decay" => s.weight_decay = parse(key, value)?,
            "grad_clip" => s.grad_clip = parse(key, value)?,
            "alpha_lr" => s.alpha_lr = parse(key, value)?,
            "alpha_beta1" => s.alpha_betas.0 = parse(key, value)?,
            "alpha_beta2" => s.alpha_betas.1 = parse(key, value)?,
            "alpha_weight_decay" => s.alpha_weight_decay = parse(key, value)?,
            "alpha_init_scale" => s.alpha_init_scale = parse(key, value)?,
            "pretrain_epochs" => s.pretrain_epochs = parse(key, value)?,
            "warm_logit" => s.warm_logit = parse(key, value)?,
            "plateau_window" => s.plateau.window = parse(key, value)?,
            "plateau_start" => s.plateau.start_epoch = parse(key, value)?,
            "plateau_tolerance" => s.plateau.tolerance = parse(key, value)?,
            "early_stop" => s.early_stop = parse(key, value)?,
            "share" => {
                s.share = match value {
                    "auto" => None,
                    other => Some(parse(key, other)?),
                }
            }
            "timing" => s.timing = parse(key, value)?,
            "data_count" => self.data.count = parse(key, value)?,
            "data_classes" => self.data.classes = parse(key, value)?,
            "data_channels" => self.data.channels = parse(key, value)?,
            "data_size" => self.data.size = parse(key, value)?,
            "data_noise" => self.data.noise = parse(key, value)?,
            "data_color_bias" => self.data.color_bias = parse(key, value)?,
            "data_seed" => self.data.seed = parse(key, value)?,
            "raster" => self.raster = optional(value).map(PathBuf::from),
            "opscore_runs" => self.opscore_runs = parse(key, value)?,
            "opscore_epochs" => self.opscore_epochs = parse(key, value)?,
            "opscore_lr" => self.opscore_lr = parse(key, value)?,
            "retrain_epochs" => self.retrain_epochs = parse(key, value)?,
            _ => return Err(ConfigError(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| ConfigError(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies a `key=value` override from the command line.
    pub fn apply_override(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (key, value) = pair.split_once('=').ok_or_else(|| ConfigError(format!("override {pair:?} is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.search;
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(ConfigError(what.to_owned())) };
        check(s.batch_size > 0, "batch_size must be positive")?;
        check(s.cells > 0, "cells must be positive")?;
        check(s.steps > 0, "steps must be positive")?;
        check(s.channels > 0, "channels must be positive")?;
        check(s.threshold > 0.0 && s.threshold < 1.0, "threshold must lie in (0, 1)")?;
        check(s.alpha_lr >= 0.0 && s.weight_lr >= 0.0, "learning rates must be non-negative")?;
        check(s.plateau.window > 0, "plateau_window must be positive")?;
        check(self.data.classes >= 2, "data_classes must be at least 2")?;
        check(self.data.count >= 2, "data_count must be at least 2")?;
        check(self.data.size > 0 && self.data.channels > 0, "data dimensions must be positive")?;
        check(self.opscore_runs > 0, "opscore_runs must be positive")?;
        Ok(())
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.search;
        let PlateauRule { window, start_epoch, tolerance } = s.plateau;
        let opt = |v: &Option<String>| v.clone().unwrap_or_default();
        vec![
            ("name", opt(&self.name)),
            ("out", self.out.display().to_string()),
            ("start", opt(&self.start)),
            ("mode", s.mode.to_string()),
            ("epochs", s.epochs.to_string()),
            ("batch_size", s.batch_size.to_string()),
            ("seed", s.seed.to_string()),
            ("w01", s.loss.w01.to_string()),
            ("wab", s.loss.wab.to_string()),
            ("parse_method", s.parse_method.name().to_owned()),
            ("threshold", s.threshold.to_string()),
            ("channels", s.channels.to_string()),
            ("cells", s.cells.to_string()),
            ("steps", s.steps.to_string()),
            ("search_space", s.search_space.tag().to_owned()),
            ("weight_lr", s.weight_lr.to_string()),
            ("weight_lr_min", s.weight_lr_min.to_string()),
            ("momentum", s.momentum.to_string()),
            ("weight_decay", s.weight_decay.to_string()),
            ("grad_clip", s.grad_clip.to_string()),
            ("alpha_lr", s.alpha_lr.to_string()),
            ("alpha_beta1", s.alpha_betas.0.to_string()),
            ("alpha_beta2", s.alpha_betas.1.to_string()),
            ("alpha_weight_decay", s.alpha_weight_decay.to_string()),
            ("alpha_init_scale", s.alpha_init_scale.to_string()),
            ("pretrain_epochs", s.pretrain_epochs.to_string()),
            ("warm_logit", s.warm_logit.to_string()),
            ("plateau_window", window.to_string()),
            ("plateau_start", start_epoch.to_string()),
            ("plateau_tolerance", tolerance.to_string()),
            ("early_stop", s.early_stop.to_string()),
            ("share", share_name(s.share).to_owned()),
            ("timing", s.timing.to_string()),
            ("data_count", self.data.count.to_string()),
            ("data_classes", self.data.classes.to_string()),
            ("data_channels", self.data.channels.to_string()),
            ("data_size", self.data.size.to_string()),
            ("data_noise", self.data.noise.to_string()),
            ("data_color_bias", self.data.color_bias.to_string()),
            ("data_seed", self.data.seed.to_string()),
            ("raster", self.raster.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
            ("opscore_runs", self.opscore_runs.to_string()),
            ("opscore_epochs", self.opscore_epochs.to_string()),
            ("opscore_lr", self.opscore_lr.to_string()),
            ("retrain_epochs", self.retrain_epochs.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
