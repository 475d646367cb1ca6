//! Snippet windows and their LSTM-autoencoder embeddings.
//!
//! Each channel (foreground, background) has its own autoencoder. The encoder
//! reads `N` normalized frames and its final hidden state is the embedding.
//! The decoder starts from the encoder's final state, receives the embedding
//! at every step and reconstructs the input in reverse order.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::scene::background::BG_DIM;
use crate::scene::FrameFeature;
use crate::training::{ensure_finite, minibatches, EpochLog};
use imfilm_nn::{container, seeded_rng, Adamax, AdamaxConfig, Dense, LstmLayer, ParamSet};

pub const SNIPPET_LEN: usize = 8;
pub const SNIPPET_STRIDE: usize = 4;
pub const FG_DIM: usize = 6;
pub const FG_EMBED: usize = 32;
pub const BG_EMBED: usize = 64;
const FORMAT_VERSION: &str = "imfilm-autoencoder-1";

/// Start indices of the sliding windows over a sequence of `len` frames.
pub fn window_starts(len: usize, n: usize, stride: usize) -> Result<Vec<usize>> {
    if len < n {
        return Err(Error::TooShort { len, min: n });
    }
    Ok((0..=(len - n)).step_by(stride).collect())
}

/// Window of `n` consecutive frames from one video.
#[derive(Debug, Clone, PartialEq)]
pub struct Snippet<'a> {
    pub video: &'a str,
    pub start: usize,
    pub frames: &'a [FrameFeature],
}

pub fn window<'a>(video: &'a str, seq: &'a [FrameFeature], n: usize, stride: usize) -> Result<Vec<Snippet<'a>>> {
    Ok(window_starts(seq.len(), n, stride)?
        .into_iter()
        .map(|start| Snippet {
            video,
            start,
            frames: &seq[start..start + n],
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Fg,
    Bg,
}

impl Channel {
    pub fn input_dim(self) -> usize {
        match self {
            Channel::Fg => FG_DIM,
            Channel::Bg => BG_DIM,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Fg => "fg",
            Channel::Bg => "bg",
        }
    }

    /// Raw network input for one frame. The foreground box is followed by the
    /// sine and cosine of the body orientation; an absent subject encodes as
    /// all zeros.
    pub fn encode(self, f: &FrameFeature) -> Vec<f64> {
        match self {
            Channel::Fg => {
                let g = &f.fg;
                if g.is_visible() {
                    vec![g.cx, g.cy, g.w, g.h, g.orientation.sin(), g.orientation.cos()]
                } else {
                    vec![0.0; FG_DIM]
                }
            }
            Channel::Bg => f.bg.values.clone(),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-dimension standardization fitted on training frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0usize;
        for r in rows {
            for j in 0..dim {
                sum[j] += r[j];
                sq[j] += r[j] * r[j];
            }
            n += 1;
        }
        if n == 0 {
            return Self::identity(dim);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (q / n as f64 - m * m).max(0.0).sqrt().max(1e-3))
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub embed_dim: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl AutoencoderConfig {
    pub fn for_channel(channel: Channel) -> Self {
        Self {
            embed_dim: match channel {
                Channel::Fg => FG_EMBED,
                Channel::Bg => BG_EMBED,
            },
            epochs: 30,
            batch: 16,
            lr: 0.001,
            seed: 11,
        }
    }
}

/// Trained snippet autoencoder for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub channel: Channel,
    pub params: ParamSet,
    pub norm: Normalizer,
    pub embed_dim: usize,
}

struct Layers {
    enc: LstmLayer,
    dec: LstmLayer,
    out: Dense,
}

fn layers(input: usize, embed: usize) -> Layers {
    Layers {
        enc: LstmLayer::new("enc", input, embed),
        dec: LstmLayer::new("dec", embed, embed),
        out: Dense::new("out", embed, input),
    }
}

impl Autoencoder {
    pub fn new(channel: Channel, embed_dim: usize, norm: Normalizer, seed: u64) -> Result<Self> {
        let l = layers(channel.input_dim(), embed_dim);
        let mut rng = seeded_rng(seed);
        let mut params = ParamSet::new();
        l.enc.init(&mut params, &mut rng)?;
        l.dec.init(&mut params, &mut rng)?;
        l.out.init(&mut params, &mut rng)?;
        Ok(Self {
            channel,
            params,
            norm,
            embed_dim,
        })
    }

    fn layers(&self) -> Layers {
        layers(self.channel.input_dim(), self.embed_dim)
    }

    /// Normalized network input for a snippet.
    pub fn prepare(&self, frames: &[FrameFeature]) -> Vec<Vec<f64>> {
        frames
            .iter()
            .map(|f| self.norm.apply(&self.channel.encode(f)))
            .collect()
    }

    /// Final encoder hidden state.
    pub fn embed_prepared(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let caches = self.layers().enc.forward_seq(&self.params, xs)?;
        Ok(caches
            .last()
            .map(|c| c.h.clone())
            .unwrap_or_else(|| vec![0.0; self.embed_dim]))
    }

    pub fn embed(&self, frames: &[FrameFeature]) -> Result<Vec<f64>> {
        self.embed_prepared(&self.prepare(frames))
    }

    /// Reconstruction loss of one prepared snippet with parameters `p`,
    /// optionally accumulating its gradient into `grads`.
    fn loss_with(&self, p: &ParamSet, xs: &[Vec<f64>], grads: Option<&mut ParamSet>) -> Result<f64> {
        let l = self.layers();
        let n = xs.len();
        let d = self.channel.input_dim();
        let enc = l.enc.forward_seq(p, xs)?;
        let last = enc.last().expect("snippet is nonempty");
        let emb = last.h.clone();
        let dec_in = vec![emb.clone(); n];
        let dec = l.dec.forward_seq_from(p, &dec_in, &last.h, &last.c)?;
        let mut loss = 0.0;
        let scale = 1.0 / (n * d) as f64;
        let mut dys = Vec::with_capacity(n);
        for (t, c) in dec.iter().enumerate() {
            let y = l.out.forward(p, &c.h)?;
            let target = &xs[n - 1 - t];
            let dy: Vec<f64> = y.iter().zip(target).map(|(a, b)| a - b).collect();
            loss += dy.iter().map(|v| v * v).sum::<f64>() * scale;
            dys.push(dy.iter().map(|v| 2.0 * v * scale).collect::<Vec<_>>());
        }
        let Some(grads) = grads else {
            return Ok(loss);
        };
        let mut dh_dec = Vec::with_capacity(n);
        for (c, dy) in dec.iter().zip(&dys) {
            dh_dec.push(l.out.backward(p, &c.h, dy, grads)?);
        }
        let (dxs, dh0, dc0) = l.dec.backward_seq(p, &dec, &dh_dec, None, grads)?;
        let mut dh_last = dh0;
        for dx in &dxs {
            for (a, b) in dh_last.iter_mut().zip(dx) {
                *a += b;
            }
        }
        let mut dh_enc = vec![Vec::new(); n];
        dh_enc[n - 1] = dh_last;
        l.enc.backward_seq(p, &enc, &dh_enc, Some(&dc0), grads)?;
        Ok(loss)
    }

    /// Mean reconstruction MSE over prepared snippets.
    pub fn reconstruction_mse(&self, data: &[Vec<Vec<f64>>]) -> Result<f64> {
        let mut s = 0.0;
        for xs in data {
            s += self.loss_with(&self.params, xs, None)?;
        }
        Ok(s / data.len().max(1) as f64)
    }

    /// Loss and gradient for one prepared snippet (used by gradient checks).
    pub fn loss_and_grad(&self, p: &ParamSet, xs: &[Vec<f64>]) -> Result<(f64, ParamSet)> {
        let mut g = p.zeros_like();
        let loss = self.loss_with(p, xs, Some(&mut g))?;
        Ok((loss, g))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut meta = Map::new();
        meta.insert("format".into(), json!(FORMAT_VERSION));
        meta.insert("channel".into(), json!(self.channel.name()));
        meta.insert("embed_dim".into(), json!(self.embed_dim));
        meta.insert("input_dim".into(), json!(self.channel.input_dim()));
        meta.insert(
            "normalizer".into(),
            serde_json::to_value(&self.norm).map_err(|e| Error::format(path, e.to_string()))?,
        );
        container::save(path, &self.params, meta)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (params, side) = container::load(path)?;
        let channel = match side.meta_str("channel") {
            Some("fg") => Channel::Fg,
            Some("bg") => Channel::Bg,
            other => return Err(Error::format(path, format!("bad channel tag {other:?}"))),
        };
        let embed_dim = side
            .meta
            .get("embed_dim")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::format(path, "missing embed_dim"))? as usize;
        let norm: Normalizer = side
            .meta
            .get("normalizer")
            .cloned()
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| Error::format(path, e.to_string()))?
            .ok_or_else(|| Error::format(path, "missing normalizer"))?;
        let ae = Self {
            channel,
            params,
            norm,
            embed_dim,
        };
        let l = ae.layers();
        l.enc.check(&ae.params)?;
        l.dec.check(&ae.params)?;
        l.out.check(&ae.params)?;
        Ok(ae)
    }
}

/// Trains an autoencoder on the snippets of one channel. The normalizer is
/// fitted on the frames of those snippets.
pub fn train_autoencoder(
    channel: Channel,
    snippets: &[Vec<FrameFeature>],
    cfg: &AutoencoderConfig,
) -> Result<(Autoencoder, Vec<EpochLog>)> {
    if snippets.is_empty() {
        return Err(Error::Argument(format!("no {channel} snippets to train on")));
    }
    let raw: Vec<Vec<Vec<f64>>> = snippets
        .iter()
        .map(|s| s.iter().map(|f| channel.encode(f)).collect())
        .collect();
    let norm = Normalizer::fit(raw.iter().flatten().map(Vec::as_slice), channel.input_dim());
    let mut ae = Autoencoder::new(channel, cfg.embed_dim, norm, cfg.seed)?;
    let data: Vec<Vec<Vec<f64>>> = raw
        .iter()
        .map(|s| s.iter().map(|x| ae.norm.apply(x)).collect())
        .collect();
    let mut opt = Adamax::new(
        &ae.params,
        AdamaxConfig {
            lr: cfg.lr,
            ..AdamaxConfig::default()
        },
    );
    let mut rng = seeded_rng(cfg.seed ^ 0xA5A5);
    let mut log = Vec::with_capacity(cfg.epochs + 1);
    log.push(EpochLog {
        epoch: 0,
        loss: ae.reconstruction_mse(&data)?,
        val: None,
    });
    for epoch in 1..=cfg.epochs {
        let mut total = 0.0;
        for batch in minibatches(data.len(), cfg.batch, &mut rng) {
            let mut g = ae.params.zeros_like();
            for &i in &batch {
                total += ae.loss_with(&ae.params, &data[i], Some(&mut g))?;
            }
            g.scale(1.0 / batch.len() as f64);
            ensure_finite(epoch, total, &g)?;
            opt.update(&mut ae.params, &g)?;
        }
        log.push(EpochLog {
            epoch,
            loss: total / data.len() as f64,
            val: None,
        });
    }
    Ok((ae, log))
}

/// Embedding of one snippet: foreground and background parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnippetEmbedding {
    pub fg: Vec<f64>,
    pub bg: Vec<f64>,
}

impl SnippetEmbedding {
    pub fn concat(&self) -> Vec<f64> {
        let mut v = self.fg.clone();
        v.extend_from_slice(&self.bg);
        v
    }

    pub fn dim(&self) -> usize {
        self.fg.len() + self.bg.len()
    }
}

/// The frozen pair of encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoders {
    pub fg: Autoencoder,
    pub bg: Autoencoder,
}

impl Encoders {
    pub fn new(fg: Autoencoder, bg: Autoencoder) -> Result<Self> {
        if fg.channel != Channel::Fg || bg.channel != Channel::Bg {
            return Err(Error::Config(format!(
                "encoder channels are ({}, {}), expected (fg, bg)",
                fg.channel, bg.channel
            )));
        }
        Ok(Self { fg, bg })
    }

    pub fn fg_dim(&self) -> usize {
        self.fg.embed_dim
    }

    pub fn bg_dim(&self) -> usize {
        self.bg.embed_dim
    }

    pub fn embed_snippet(&self, frames: &[FrameFeature]) -> Result<SnippetEmbedding> {
        Ok(SnippetEmbedding {
            fg: self.fg.embed(frames)?,
            bg: self.bg.embed(frames)?,
        })
    }

    /// Embeddings of every window of a video, in order.
    pub fn embed_video(&self, seq: &[FrameFeature]) -> Result<Vec<SnippetEmbedding>> {
        window_starts(seq.len(), SNIPPET_LEN, SNIPPET_STRIDE)?
            .into_iter()
            .map(|s| self.embed_snippet(&seq[s..s + SNIPPET_LEN]))
            .collect()
    }
}

/// Checks the channel pairing and embeds one snippet.
pub fn embed_snippet(sn: &Snippet<'_>, fg: &Autoencoder, bg: &Autoencoder) -> Result<SnippetEmbedding> {
    if fg.channel != Channel::Fg || bg.channel != Channel::Bg {
        return Err(Error::Config(format!(
            "encoder channels are ({}, {}), expected (fg, bg)",
            fg.channel, bg.channel
        )));
    }
    Ok(SnippetEmbedding {
        fg: fg.embed(sn.frames)?,
        bg: bg.embed(sn.frames)?,
    })
}
