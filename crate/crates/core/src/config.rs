//! Experiment configuration and its flat `key = value` file form.
//!
//! Keys are dotted paths into [`ExperimentConfig`] (`style.train.epochs`);
//! values are JSON scalars or arrays. Lines starting with `#` are comments.
//! A file only needs the keys it changes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::controller::ControllerConfig;
use crate::error::{Error, Result};
use crate::features::{AutoencoderConfig, Channel};
use crate::imitation::train::ImitationTrainConfig;
use crate::imitation::ImitationDims;
use crate::scene::CorpusSpec;
use crate::segmenter::SegmenterConfig;
use crate::style_net::{StyleDims, StyleTrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoencoderStage {
    pub fg: AutoencoderConfig,
    pub bg: AutoencoderConfig,
    /// Training snippets taken per video (evenly spaced); 0 keeps all.
    pub snippets_per_video: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleStage {
    pub dims: StyleDims,
    pub train: StyleTrainConfig,
    /// Add horizontally flipped copies of the training videos.
    pub flip: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImitationStage {
    pub dims: ImitationDims,
    pub train: ImitationTrainConfig,
    pub flip: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Number of two-style concatenations for the segmentation benchmark.
    pub mixtures: usize,
    /// Duration range of each part of a concatenation, seconds.
    pub mixture_part: (f64, f64),
    pub mixture_seed: u64,
    /// Largest boundary error counted as correct, seconds.
    pub boundary_tolerance: f64,
    /// Demos per style for the closed-loop benchmark.
    pub demos_per_style: usize,
    pub recapture_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mixtures: 100,
            mixture_part: (8.0, 15.0),
            mixture_seed: 4040,
            boundary_tolerance: 1.0,
            demos_per_style: 5,
            recapture_seed: 5050,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: CorpusSpec,
    pub autoencoder: AutoencoderStage,
    pub style: StyleStage,
    pub imitation: ImitationStage,
    pub segmenter: SegmenterConfig,
    pub controller: ControllerConfig,
    pub eval: EvalConfig,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusSpec::default(),
            autoencoder: AutoencoderStage {
                fg: AutoencoderConfig::for_channel(Channel::Fg),
                bg: AutoencoderConfig::for_channel(Channel::Bg),
                snippets_per_video: 0,
            },
            style: StyleStage {
                dims: StyleDims::default(),
                train: StyleTrainConfig::default(),
                flip: true,
            },
            imitation: ImitationStage {
                dims: ImitationDims::default(),
                train: ImitationTrainConfig::default(),
                flip: true,
            },
            segmenter: SegmenterConfig::default(),
            controller: ControllerConfig::default(),
            eval: EvalConfig::default(),
            output: PathBuf::from("runs/default"),
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        _ => out.push((prefix.to_string(), v.clone())),
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("key {key:?} descends into a value")))?;
        if i + 1 == parts.len() {
            match obj.get_mut(*p) {
                Some(slot) if !slot.is_object() => *slot = value,
                Some(_) => return Err(Error::Config(format!("key {key:?} names a section, not a value"))),
                None => return Err(Error::Config(format!("unknown key {key:?}"))),
            }
            return Ok(());
        }
        cur = obj
            .get_mut(*p)
            .ok_or_else(|| Error::Config(format!("unknown key {key:?}")))?;
    }
    Ok(())
}

impl ExperimentConfig {
    /// Every key with its value, in file order.
    pub fn to_text(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        let mut items = Vec::new();
        flatten("", &v, &mut items);
        let mut s = String::from("# imfilm experiment config\n");
        let mut section = String::new();
        for (k, x) in items {
            let head = k.split('.').next().unwrap_or_default().to_string();
            if head != section {
                s.push_str(&format!("\n# {head}\n"));
                section = head;
            }
            s.push_str(&format!("{k} = {x}\n"));
        }
        s
    }

    /// Applies `key = value` lines on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut root = serde_json::to_value(Self::default()).expect("config serializes");
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
            set_path(&mut root, k, value).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        let cfg: Self = serde_json::from_value(root).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let mut text = self.to_text();
        text.push_str(assignment);
        text.push('\n');
        *self = Self::from_text(&text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(0.0..=1.0).contains(&self.segmenter.threshold) {
            return bad("segmenter.threshold must lie in [0, 1]");
        }
        if self.style.train.batch == 0 || self.imitation.train.batch == 0 {
            return bad("batch sizes must be positive");
        }
        if self.eval.mixture_part.0 > self.eval.mixture_part.1 || self.eval.mixture_part.0 < 2.0 {
            return bad("eval.mixture_part must be an increasing range starting at 2 s or more");
        }
        if self.controller.max_speed <= 0.0 {
            return bad("controller.max_speed must be positive");
        }
        if !(self.controller.reframe_gain >= 0.0 && self.controller.reframe_gain.is_finite()) {
            return bad("controller.reframe_gain must be finite and non-negative");
        }
        Ok(())
    }

    /// Digest of the experiment settings. The output location is not part of
    /// the experiment and is left out.
    pub fn digest(&self) -> String {
        let settings = Self {
            output: PathBuf::new(),
            ..self.clone()
        };
        crate::manifest::hex_digest(settings.to_text().as_bytes())
    }
}

/// Flattened view, for reports.
pub fn flat_map(cfg: &ExperimentConfig) -> Map<String, Value> {
    let v = serde_json::to_value(cfg).expect("config serializes");
    let mut items = Vec::new();
    flatten("", &v, &mut items);
    items.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::default();
        c.style.train.lr = 0.0013;
        c.eval.mixture_part = (9.0, 14.5);
        c.corpus.train = [1, 2, 3, 4, 5];
        let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(
            ExperimentConfig::from_text("style.train.epoch = 3"),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::from_text("style = 3").is_err());
    }

    #[test]
    fn override_applies() {
        let mut c = ExperimentConfig::default();
        c.set("imitation.train.lambda = 0.5").unwrap();
        assert_eq!(c.imitation.train.lambda, 0.5);
        assert_eq!(c.segmenter.threshold, 0.6);
    }
}
