//! Run directory layout, configuration resolution and manifests.
//!
//! ```text
//! <out>/config.txt           effective configuration of the last command
//! <out>/data/                corpus (dataset format)
//! <out>/models/*.cmn         parameter files
//! <out>/logs/*.csv           per-epoch training logs
//! <out>/reports/             evaluation tables, raw predictions, report.json
//! <out>/segments/<id>/       segmentation of a single video
//! <out>/imitate/<id>/        closed-loop runs
//! <out>/manifests/<cmd>.json one manifest per command
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use imfilm::config::{flat_map, ExperimentConfig};
use imfilm::features::{Autoencoder, Encoders};
use imfilm::imitation::ImitationNet;
use imfilm::manifest::Manifest;
use imfilm::scene::{read_video, Dataset};
use imfilm::style_net::{StyleNet, Variant};
use imfilm::Error;

use crate::error::{CliError, CliResult};

pub const CONFIG_FILE: &str = "config.txt";

/// Base configuration: `--config` if given, else the run directory's stored
/// config, else the defaults. `--set` assignments apply on top and `--out`
/// wins over everything.
pub fn resolve_config(config: Option<&Path>, sets: &[String], out: Option<&Path>) -> CliResult<ExperimentConfig> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let root = out.map_or_else(|| ExperimentConfig::default().output, Path::to_path_buf);
            let stored = root.join(CONFIG_FILE);
            let mut c = if stored.is_file() {
                ExperimentConfig::load(&stored)?
            } else {
                ExperimentConfig::default()
            };
            c.output = root;
            c
        }
    };
    for s in sets {
        if !s.contains('=') {
            return Err(CliError::Argument(format!("--set expects key=value, got {s:?}")));
        }
        cfg.set(s)?;
    }
    if let Some(o) = out {
        cfg.output = o.to_path_buf();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One command's view of the run directory. Every file written through it is
/// listed in the command's manifest.
pub struct Run {
    pub cfg: ExperimentConfig,
    pub root: PathBuf,
    written: BTreeSet<String>,
}

impl Run {
    pub fn new(cfg: ExperimentConfig) -> Self {
        let root = cfg.output.clone();
        Self {
            cfg,
            root,
            written: BTreeSet::new(),
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn ensure_dir(&self, rel: &str) -> CliResult<PathBuf> {
        let p = self.path(rel);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> CliResult<()> {
        let p = self.path(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&p, contents).map_err(|e| Error::io(&p, e))?;
        self.written.insert(rel.to_string());
        Ok(())
    }

    /// Marks a file written by library code.
    pub fn record(&mut self, rel: &str) {
        self.written.insert(rel.to_string());
    }

    /// Marks every file below `rel`.
    pub fn record_tree(&mut self, rel: &str) -> CliResult<()> {
        let dir = self.path(rel);
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let child = format!("{rel}/{name}");
            if entry.path().is_dir() {
                self.record_tree(&child)?;
            } else {
                self.record(&child);
            }
        }
        Ok(())
    }

    /// Stores the effective config and the manifest for `command`.
    pub fn finish(mut self, command: &str) -> CliResult<PathBuf> {
        self.write(CONFIG_FILE, self.cfg.to_text())?;
        let seeds = flat_map(&self.cfg)
            .into_iter()
            .filter(|(k, _)| k.ends_with("seed"))
            .filter_map(|(k, v)| v.as_u64().map(|s| (k, s)))
            .collect();
        let mut m = Manifest::new(command, self.cfg.digest(), seeds);
        for rel in &self.written {
            m.add(&self.root, rel)?;
        }
        let dir = self.ensure_dir("manifests")?;
        let path = dir.join(format!("{command}.json"));
        m.save(&path)?;
        Ok(path)
    }

    fn require(&self, rel: &str, stage: &'static str, command: &'static str) -> CliResult<PathBuf> {
        let p = self.path(rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError::Dependency {
                stage,
                command,
                path: p,
            })
        }
    }

    pub fn require_data(&self) -> CliResult<PathBuf> {
        self.require("data/manifest.txt", "data", "gen-data")
            .map(|_| self.path("data"))
    }

    pub fn dataset(&self) -> CliResult<Dataset> {
        Ok(Dataset::load(&self.require_data()?)?)
    }

    pub fn encoders(&self) -> CliResult<Encoders> {
        let fg = self.require("models/fg.cmn", "autoencoder", "train autoencoder")?;
        let bg = self.require("models/bg.cmn", "autoencoder", "train autoencoder")?;
        Ok(Encoders::new(Autoencoder::load(&fg)?, Autoencoder::load(&bg)?)?)
    }

    pub fn style_net(&self, v: Variant) -> CliResult<StyleNet> {
        let p = self.require(&style_model(v), "style", "train style")?;
        Ok(StyleNet::load(&p)?)
    }

    pub fn imitation_net(&self, baseline: bool) -> CliResult<ImitationNet> {
        let p = if baseline {
            self.require(BASELINE_MODEL, "baseline", "train baseline")?
        } else {
            self.require(IMITATION_MODEL, "imitation", "train imitation")?
        };
        Ok(ImitationNet::load(&p)?)
    }

    /// A video given as a directory in dataset format or as a corpus id.
    pub fn video(&self, target: &str) -> CliResult<imfilm::scene::VideoRecord> {
        let p = Path::new(target);
        if p.join("meta.json").is_file() {
            return Ok(read_video(p)?);
        }
        let dir = self.require_data()?.join(target);
        if dir.join("meta.json").is_file() {
            Ok(read_video(&dir)?)
        } else {
            Err(CliError::Argument(format!(
                "no video {target:?}: expected a corpus id, a mix-NNN mixture or a video directory"
            )))
        }
    }
}

pub const IMITATION_MODEL: &str = "models/imitation.cmn";
pub const BASELINE_MODEL: &str = "models/baseline.cmn";

pub fn style_model(v: Variant) -> String {
    format!("models/style-{v}.cmn")
}

/// True when `dir` exists and has at least one entry.
pub fn non_empty(dir: &Path) -> bool {
    fs::read_dir(dir).is_ok_and(|mut d| d.next().is_some())
}
