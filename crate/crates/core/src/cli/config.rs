//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{AugmenterArch, ClassifierArch};
use crate::trainer::{CombinedLossParams, LossSchedule};

/// Where the images come from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum DatasetSource {
    /// Generated rectangles vs discs.
    Synthetic,
    /// `root/<class>/[<subject>__]<name>.(pgm|ppm|png)`
    Directory(PathBuf),
    Idx { images: PathBuf, labels: PathBuf },
}

impl DatasetSource {
    fn render(&self) -> String {
        match self {
            DatasetSource::Synthetic => "synthetic".into(),
            DatasetSource::Directory(p) => p.display().to_string(),
            DatasetSource::Idx { images, labels } => format!("idx:{}:{}", images.display(), labels.display()),
        }
    }

    fn parse(v: &str) -> Result<Self> {
        if v == "synthetic" {
            return Ok(DatasetSource::Synthetic);
        }
        if let Some(rest) = v.strip_prefix("idx:") {
            let (images, labels) = rest
                .split_once(':')
                .ok_or_else(|| Error::config("dataset", "idx form is `idx:<images>:<labels>`"))?;
            return Ok(DatasetSource::Idx {
                images: images.into(),
                labels: labels.into(),
            });
        }
        if v.is_empty() {
            return Err(Error::config("dataset", "empty value"));
        }
        Ok(DatasetSource::Directory(v.into()))
    }
}

/// Classifier variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NetB {
    B1,
    /// Accepted so every experiment row can be written down; training it is
    /// not supported.
    B2,
}

/// One experiment: data, networks, loss weights and optimizer settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub exp_id: u32,
    pub dataset: DatasetSource,
    /// 0 = baseline, 1 = one shared augmenter, >= 2 = one augmenter per class.
    pub num_net_a: usize,
    /// Number of same-class images packed into Network A's input (k).
    pub a_channels: usize,
    pub net_b: NetB,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_end: Option<f64>,
    pub beta_end: Option<f64>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub traditional_aug: bool,
    pub subject_exclusive: bool,
    pub image_height: usize,
    pub image_width: usize,
    pub grayscale: bool,
    pub a_filters: usize,
    pub b_conv1: usize,
    pub b_conv2: usize,
    pub b_dense: usize,
    pub dropout: f64,
    pub synthetic_train: usize,
    pub synthetic_val: usize,
    pub synthetic_test: usize,
    pub synthetic_noise: f64,
}

pub const DEFAULT_LR_SINGLE: f64 = 0.01;
pub const DEFAULT_LR_MULTI: f64 = 0.005;

impl Default for ExperimentConfig {
    fn default() -> Self {
        let a = AugmenterArch::default();
        let b = ClassifierArch::default();
        Self {
            exp_id: 0,
            dataset: DatasetSource::Synthetic,
            num_net_a: 1,
            a_channels: 2,
            net_b: NetB::B1,
            alpha: 0.3,
            beta: 0.7,
            alpha_end: None,
            beta_end: None,
            learning_rate: DEFAULT_LR_SINGLE,
            momentum: 0.9,
            epochs: 1000,
            batch_size: 32,
            seed: 0,
            traditional_aug: false,
            subject_exclusive: false,
            image_height: 32,
            image_width: 32,
            grayscale: false,
            a_filters: a.hidden_filters,
            b_conv1: b.conv1_filters,
            b_conv2: b.conv2_filters,
            b_dense: b.dense_units,
            dropout: b.dropout,
            synthetic_train: 600,
            synthetic_val: 170,
            synthetic_test: 86,
            synthetic_noise: 0.15,
        }
    }
}

const KEYS: [&str; 28] = [
    "exp_id",
    "dataset",
    "num_net_a",
    "a_channels",
    "net_b",
    "alpha",
    "beta",
    "alpha_end",
    "beta_end",
    "learning_rate",
    "momentum",
    "epochs",
    "batch_size",
    "seed",
    "traditional_aug",
    "subject_exclusive",
    "image_height",
    "image_width",
    "grayscale",
    "a_filters",
    "b_conv1",
    "b_conv2",
    "b_dense",
    "dropout",
    "synthetic_train",
    "synthetic_val",
    "synthetic_test",
    "synthetic_noise",
];

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{v}` as {}", std::any::type_name::<T>())))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{v}`"))),
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown or repeated
    /// keys are errors. The learning rate defaults to 0.005 with two or more
    /// augmenters and 0.01 otherwise.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", n + 1), format!("expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::config(k, format!("unknown key (line {})", n + 1)));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::config(k, format!("given twice (line {})", n + 1)));
            }
        }
        Self::from_entries(&entries)
    }

    pub fn from_entries(entries: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = Self::default();
        let mut lr_given = false;
        for (k, v) in entries {
            let v = v.as_str();
            match k.as_str() {
                "exp_id" => c.exp_id = value(k, v)?,
                "dataset" => c.dataset = DatasetSource::parse(v)?,
                "num_net_a" => c.num_net_a = value(k, v)?,
                "a_channels" => c.a_channels = value(k, v)?,
                "net_b" => {
                    c.net_b = match v.to_ascii_lowercase().as_str() {
                        "b1" => NetB::B1,
                        "b2" => NetB::B2,
                        _ => return Err(Error::config(k, format!("expected b1 or b2, got `{v}`"))),
                    }
                }
                "alpha" => c.alpha = value(k, v)?,
                "beta" => c.beta = value(k, v)?,
                "alpha_end" => c.alpha_end = Some(value(k, v)?),
                "beta_end" => c.beta_end = Some(value(k, v)?),
                "learning_rate" => {
                    c.learning_rate = value(k, v)?;
                    lr_given = true;
                }
                "momentum" => c.momentum = value(k, v)?,
                "epochs" => c.epochs = value(k, v)?,
                "batch_size" => c.batch_size = value(k, v)?,
                "seed" => c.seed = value(k, v)?,
                "traditional_aug" => c.traditional_aug = boolean(k, v)?,
                "subject_exclusive" => c.subject_exclusive = boolean(k, v)?,
                "image_height" => c.image_height = value(k, v)?,
                "image_width" => c.image_width = value(k, v)?,
                "grayscale" => c.grayscale = boolean(k, v)?,
                "a_filters" => c.a_filters = value(k, v)?,
                "b_conv1" => c.b_conv1 = value(k, v)?,
                "b_conv2" => c.b_conv2 = value(k, v)?,
                "b_dense" => c.b_dense = value(k, v)?,
                "dropout" => c.dropout = value(k, v)?,
                "synthetic_train" => c.synthetic_train = value(k, v)?,
                "synthetic_val" => c.synthetic_val = value(k, v)?,
                "synthetic_test" => c.synthetic_test = value(k, v)?,
                "synthetic_noise" => c.synthetic_noise = value(k, v)?,
                other => return Err(Error::config(other, "unknown key")),
            }
        }
        if !lr_given {
            c.learning_rate = Self::default_learning_rate(c.num_net_a);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn default_learning_rate(num_net_a: usize) -> f64 {
        if num_net_a >= 2 {
            DEFAULT_LR_MULTI
        } else {
            DEFAULT_LR_SINGLE
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Every key, in a fixed order; parsing the result gives back `self`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        put("exp_id", self.exp_id.to_string());
        put("dataset", self.dataset.render());
        put("num_net_a", self.num_net_a.to_string());
        put("a_channels", self.a_channels.to_string());
        put("net_b", if self.net_b == NetB::B1 { "b1" } else { "b2" }.into());
        put("alpha", self.alpha.to_string());
        put("beta", self.beta.to_string());
        if let Some(v) = self.alpha_end {
            put("alpha_end", v.to_string());
        }
        if let Some(v) = self.beta_end {
            put("beta_end", v.to_string());
        }
        put("learning_rate", self.learning_rate.to_string());
        put("momentum", self.momentum.to_string());
        put("epochs", self.epochs.to_string());
        put("batch_size", self.batch_size.to_string());
        put("seed", self.seed.to_string());
        put("traditional_aug", self.traditional_aug.to_string());
        put("subject_exclusive", self.subject_exclusive.to_string());
        put("image_height", self.image_height.to_string());
        put("image_width", self.image_width.to_string());
        put("grayscale", self.grayscale.to_string());
        put("a_filters", self.a_filters.to_string());
        put("b_conv1", self.b_conv1.to_string());
        put("b_conv2", self.b_conv2.to_string());
        put("b_dense", self.b_dense.to_string());
        put("dropout", self.dropout.to_string());
        put("synthetic_train", self.synthetic_train.to_string());
        put("synthetic_val", self.synthetic_val.to_string());
        put("synthetic_test", self.synthetic_test.to_string());
        put("synthetic_noise", self.synthetic_noise.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_net_a >= 1 {
            if self.a_channels == 0 {
                return Err(Error::config("a_channels", "must be at least 1 with smart augmentation"));
            }
            self.loss_params()
                .validate()
                .map_err(|e| Error::config("alpha/beta", e.to_string()))?;
            if self.alpha_end.is_some() != self.beta_end.is_some() {
                return Err(Error::config("alpha_end/beta_end", "give both or neither"));
            }
            if let (Some(a), Some(b)) = (self.alpha_end, self.beta_end) {
                CombinedLossParams { alpha: a, beta: b }
                    .validate()
                    .map_err(|e| Error::config("alpha_end/beta_end", e.to_string()))?;
            }
            if self.batch_size < 2 {
                return Err(Error::config("batch_size", "must be at least 2 with smart augmentation"));
            }
            if self.a_filters == 0 {
                return Err(Error::config("a_filters", "must be positive"));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum", "must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.image_height == 0 || self.image_width == 0 {
            return Err(Error::config("image_height/image_width", "must be positive"));
        }
        if self.b_conv1 == 0 || self.b_conv2 == 0 || self.b_dense == 0 {
            return Err(Error::config("b_conv1/b_conv2/b_dense", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config("dropout", "must lie in [0, 1)"));
        }
        if self.dataset == DatasetSource::Synthetic {
            if self.num_net_a >= 2 && self.num_net_a != 2 {
                return Err(Error::config("num_net_a", "synthetic data has 2 classes; per-class mode needs exactly 2"));
            }
            if self.synthetic_train < 2 || self.synthetic_val == 0 || self.synthetic_test == 0 {
                return Err(Error::config("synthetic_train/val/test", "need >= 2 training and >= 1 val/test samples"));
            }
            if !(self.synthetic_noise.is_finite() && self.synthetic_noise >= 0.0) {
                return Err(Error::config("synthetic_noise", "must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn loss_params(&self) -> CombinedLossParams {
        CombinedLossParams {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn loss_schedule(&self) -> LossSchedule {
        LossSchedule {
            start: self.loss_params(),
            end: match (self.alpha_end, self.beta_end) {
                (Some(alpha), Some(beta)) => Some(CombinedLossParams { alpha, beta }),
                _ => None,
            },
        }
    }

    pub fn augmenter_arch(&self) -> AugmenterArch {
        AugmenterArch {
            hidden_filters: self.a_filters,
        }
    }

    pub fn classifier_arch(&self) -> ClassifierArch {
        ClassifierArch {
            conv1_filters: self.b_conv1,
            conv2_filters: self.b_conv2,
            dense_units: self.b_dense,
            dropout: self.dropout,
        }
    }

    pub fn smart(&self) -> bool {
        self.num_net_a >= 1
    }
}
