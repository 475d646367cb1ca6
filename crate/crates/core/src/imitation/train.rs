//! Pair sampling, training and evaluation of the imitation network.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dtw::{dtw_align, WarpingPath};
use super::{ImitationDims, ImitationNet, PairSample};
use crate::action::Action;
use crate::error::{Error, Result};
use crate::features::{SnippetEmbedding, SNIPPET_LEN};
use crate::style::StyleLabel;
use crate::training::{ensure_finite, EpochLog};
use imfilm_nn::{seeded_rng, Adamax, AdamaxConfig};

/// A video reduced to what the imitation stage needs.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedVideo {
    pub id: String,
    pub style: StyleLabel,
    pub snippets: Vec<SnippetEmbedding>,
    pub starts: Vec<usize>,
    pub actions: Vec<Action>,
    /// Camera yaw per frame.
    pub yaw: Vec<f64>,
    /// Style feature of the whole video.
    pub v: Vec<f64>,
}

impl EmbeddedVideo {
    /// Index of the last frame of snippet `t`.
    pub fn last_frame(&self, t: usize) -> usize {
        self.starts[t] + SNIPPET_LEN - 1
    }

    /// Snippets whose last frame has both a previous and a next action.
    pub fn labelled(&self) -> Vec<usize> {
        (0..self.snippets.len())
            .filter(|&t| {
                let k = self.last_frame(t);
                k >= 1 && k < self.actions.len()
            })
            .collect()
    }

    /// `(current action, next action)` at snippet `t`, with directions in the
    /// heading frame of the snippet's last camera.
    pub fn action_pair(&self, t: usize) -> ([f64; 7], [f64; 7]) {
        let k = self.last_frame(t);
        let yaw = self.yaw[k];
        (
            self.actions[k - 1].rotated_z(-yaw).to_vec(),
            self.actions[k].rotated_z(-yaw).to_vec(),
        )
    }

    pub fn embedding_rows(&self) -> Vec<Vec<f64>> {
        self.snippets.iter().map(SnippetEmbedding::concat).collect()
    }
}

/// Indices of a content snippet and its matched style snippet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairDraw {
    pub content: usize,
    pub t: usize,
    pub style_video: usize,
    pub t_style: usize,
}

/// Warping paths between videos, computed on first use.
#[derive(Debug, Default)]
pub struct DtwCache {
    paths: HashMap<(usize, usize), WarpingPath>,
}

impl DtwCache {
    pub fn path(&mut self, corpus: &[EmbeddedVideo], a: usize, b: usize) -> Result<&WarpingPath> {
        Ok(match self.paths.entry((a, b)) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(dtw_align(&corpus[a].embedding_rows(), &corpus[b].embedding_rows())?),
        })
    }
}

/// Matched snippet of `style_video` for content snippet `t`, restricted to
/// labelled snippets.
pub fn matched_index(
    corpus: &[EmbeddedVideo],
    cache: &mut DtwCache,
    content: usize,
    style_video: usize,
    t: usize,
) -> Result<usize> {
    let path = cache.path(corpus, content, style_video)?;
    let j = path
        .match_for(t)
        .ok_or_else(|| Error::Sampling(format!("snippet {t} is not on the warping path")))?;
    let valid = corpus[style_video].labelled();
    let last = *valid
        .last()
        .ok_or_else(|| Error::Sampling(format!("video {} has no labelled snippet", corpus[style_video].id)))?;
    Ok(j.clamp(valid[0], last))
}

/// Draws a content video, a different style video of the same style, a
/// content snippet, and its DTW match.
pub fn sample_training_pair<R: Rng>(
    corpus: &[EmbeddedVideo],
    style: StyleLabel,
    cache: &mut DtwCache,
    rng: &mut R,
) -> Result<PairDraw> {
    let members: Vec<usize> = (0..corpus.len())
        .filter(|&i| corpus[i].style == style && !corpus[i].labelled().is_empty())
        .collect();
    if members.len() < 2 {
        return Err(Error::Sampling(format!(
            "style {style} needs at least two videos, found {}",
            members.len()
        )));
    }
    let content = members[rng.random_range(0..members.len())];
    let mut style_video = members[rng.random_range(0..members.len() - 1)];
    if style_video == content {
        style_video = members[members.len() - 1];
    }
    let valid = corpus[content].labelled();
    let t = valid[rng.random_range(0..valid.len())];
    let t_style = matched_index(corpus, cache, content, style_video, t)?;
    Ok(PairDraw {
        content,
        t,
        style_video,
        t_style,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImitationTrainConfig {
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub batch: usize,
    pub lr: f64,
    pub lambda: f64,
    /// Train with both loss terms; `false` gives the content-only baseline.
    pub dual: bool,
    /// Replace the style feature by zeros (ablation).
    pub zero_style: bool,
    /// Standard deviation of the perturbation applied to the current-action
    /// input: heading rotation of the direction and rate offsets in radians
    /// (per second), and log-scale. 0 feeds the recorded action.
    pub input_noise: f64,
    pub seed: u64,
}

impl Default for ImitationTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            samples_per_epoch: 2000,
            batch: 16,
            lr: 0.001,
            lambda: 0.7,
            dual: true,
            zero_style: false,
            input_noise: 0.0,
            seed: 31,
        }
    }
}

fn perturb(a: [f64; 7], sigma: f64, rng: &mut impl Rng) -> [f64; 7] {
    if sigma == 0.0 {
        return a;
    }
    let mut z = || -> f64 { StandardNormal.sample(rng) };
    let mut x = Action::from_slice(&a).rotated_z(sigma * z());
    for w in x.omega.iter_mut() {
        *w += sigma * z();
    }
    x.scale = (x.scale * (sigma * z()).exp()).clamp(0.0, 1.0);
    x.to_vec()
}

fn build_sample(corpus: &[EmbeddedVideo], d: &PairDraw, cfg: &ImitationTrainConfig, rng: &mut impl Rng) -> PairSample {
    let c = &corpus[d.content];
    let s = &corpus[d.style_video];
    let (action, label) = c.action_pair(d.t);
    let action = perturb(action, cfg.input_noise, rng);
    let style = cfg.dual.then(|| {
        let (a, y) = s.action_pair(d.t_style);
        (perturb(a, cfg.input_noise, rng), y)
    });
    let v = if cfg.zero_style {
        vec![0.0; s.v.len()]
    } else {
        s.v.clone()
    };
    PairSample {
        v,
        obs: c.snippets[d.t].concat(),
        action,
        label,
        style,
    }
}

/// Trains the imitation network on pairs drawn from `corpus`. Styles are
/// drawn uniformly among those with at least two videos.
pub fn train_imitation_net(
    corpus: &[EmbeddedVideo],
    dims: ImitationDims,
    cfg: &ImitationTrainConfig,
) -> Result<(ImitationNet, Vec<EpochLog>)> {
    let styles: Vec<StyleLabel> = StyleLabel::ALL
        .into_iter()
        .filter(|s| {
            corpus
                .iter()
                .filter(|v| v.style == *s && !v.labelled().is_empty())
                .count()
                >= 2
        })
        .collect();
    if styles.is_empty() {
        return Err(Error::Sampling("no style has two training videos".into()));
    }
    let mut net = ImitationNet::new(dims, cfg.seed)?;
    let mut opt = Adamax::new(
        &net.params,
        AdamaxConfig {
            lr: cfg.lr,
            ..AdamaxConfig::default()
        },
    );
    let mut rng = seeded_rng(cfg.seed ^ 0x1317);
    let mut cache = DtwCache::default();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut total = 0.0;
        let mut done = 0;
        while done < cfg.samples_per_epoch {
            let n = cfg.batch.min(cfg.samples_per_epoch - done);
            let mut g = net.params.zeros_like();
            for _ in 0..n {
                let style = styles[rng.random_range(0..styles.len())];
                let d = sample_training_pair(corpus, style, &mut cache, &mut rng)?;
                let s = build_sample(corpus, &d, cfg, &mut rng);
                total += net.loss_with(&net.params, &s, cfg.lambda, Some(&mut g))?;
            }
            g.scale(1.0 / n as f64);
            ensure_finite(epoch, total, &g)?;
            opt.update(&mut net.params, &g)?;
            done += n;
        }
        log.push(EpochLog {
            epoch,
            loss: total / cfg.samples_per_epoch as f64,
            val: None,
        });
    }
    Ok((net, log))
}

/// Mean squared errors of one style: angular velocity (squared vector
/// error), direction (squared angle) and scale.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MseRow {
    pub omega: f64,
    pub dir: f64,
    pub scale: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseTable {
    /// Indexed by `StyleLabel::index()`.
    pub rows: [MseRow; 5],
}

impl MseTable {
    pub fn row(&self, s: StyleLabel) -> &MseRow {
        &self.rows[s.index()]
    }

    pub fn mean(&self) -> MseRow {
        let present: Vec<&MseRow> = self.rows.iter().filter(|r| r.count > 0).collect();
        let k = present.len().max(1) as f64;
        MseRow {
            omega: present.iter().map(|r| r.omega).sum::<f64>() / k,
            dir: present.iter().map(|r| r.dir).sum::<f64>() / k,
            scale: present.iter().map(|r| r.scale).sum::<f64>() / k,
            count: present.iter().map(|r| r.count).sum(),
        }
    }
}

/// Angle between two unit vectors.
pub fn direction_error(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0).acos()
}

/// One logged prediction of the evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPrediction {
    pub video: String,
    pub demo: String,
    pub snippet: usize,
    pub style: StyleLabel,
    pub predicted: Action,
    pub truth: Action,
}

/// Demo used for content video `i`: the next video of the same style in
/// corpus order (wrapping), or the video itself when it is alone.
pub fn demo_for(corpus: &[EmbeddedVideo], i: usize) -> usize {
    let n = corpus.len();
    (1..n)
        .map(|k| (i + k) % n)
        .find(|&j| corpus[j].style == corpus[i].style)
        .unwrap_or(i)
}

/// Predicts every labelled snippet of every video from ground-truth current
/// actions, conditioning on the style feature of another video of the same
/// style.
pub fn evaluate_imitation(
    net: &ImitationNet,
    corpus: &[EmbeddedVideo],
    zero_style: bool,
) -> Result<(MseTable, Vec<EvalPrediction>)> {
    let mut sums = [MseRow::default(); 5];
    let mut preds = Vec::new();
    for (i, video) in corpus.iter().enumerate() {
        let demo = &corpus[demo_for(corpus, i)];
        let v = if zero_style {
            vec![0.0; demo.v.len()]
        } else {
            demo.v.clone()
        };
        for t in video.labelled() {
            let (a, y) = video.action_pair(t);
            let cur = Action::from_slice(&a);
            let truth = Action::from_slice(&y);
            let p = net.predict(&v, &video.snippets[t].concat(), &cur)?;
            let r = &mut sums[video.style.index()];
            r.omega += (0..3).map(|k| (p.omega[k] - truth.omega[k]).powi(2)).sum::<f64>();
            r.dir += direction_error(&p.dir, &truth.dir).powi(2);
            r.scale += (p.scale - truth.scale).powi(2);
            r.count += 1;
            preds.push(EvalPrediction {
                video: video.id.clone(),
                demo: demo.id.clone(),
                snippet: t,
                style: video.style,
                predicted: p,
                truth,
            });
        }
    }
    for r in sums.iter_mut() {
        if r.count > 0 {
            let n = r.count as f64;
            r.omega /= n;
            r.dir /= n;
            r.scale /= n;
        }
    }
    Ok((MseTable { rows: sums }, preds))
}

/// Per-style table with one `omega,v,s` column group per named model, rows
/// in the conventional table order.
pub fn mse_csv(tables: &[(&str, &MseTable)]) -> String {
    let mut s = String::from("style");
    for (name, _) in tables {
        s.push_str(&format!(",{name}_omega,{name}_v,{name}_s"));
    }
    s.push('\n');
    for style in StyleLabel::TABLE_ORDER {
        s.push_str(style.name());
        for (_, t) in tables {
            let r = t.row(style);
            s.push_str(&format!(",{:.6},{:.6},{:.6}", r.omega, r.dir, r.scale));
        }
        s.push('\n');
    }
    s
}

pub fn mse_text(tables: &[(&str, &MseTable)]) -> String {
    let mut s = format!("{:<12}", "style");
    for (name, _) in tables {
        s.push_str(&format!(" | {:^26}", name));
    }
    s.push('\n');
    s.push_str(&format!("{:<12}", ""));
    for _ in tables {
        s.push_str(&format!(" | {:>8} {:>8} {:>8}", "omega", "v", "s"));
    }
    s.push('\n');
    for style in StyleLabel::TABLE_ORDER {
        s.push_str(&format!("{:<12}", style.name()));
        for (_, t) in tables {
            let r = t.row(style);
            s.push_str(&format!(" | {:>8.4} {:>8.4} {:>8.4}", r.omega, r.dir, r.scale));
        }
        s.push('\n');
    }
    s
}

pub fn predictions_csv(preds: &[EvalPrediction]) -> String {
    let mut s =
        String::from("video,demo,snippet,style,p_wr,p_wy,p_wp,p_dx,p_dy,p_dz,p_s,t_wr,t_wy,t_wp,t_dx,t_dy,t_dz,t_s\n");
    for p in preds {
        s.push_str(&format!("{},{},{},{}", p.video, p.demo, p.snippet, p.style));
        for v in p.predicted.to_vec().iter().chain(p.truth.to_vec().iter()) {
            s.push_str(&format!(",{v:.9}"));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn video(id: &str, style: StyleLabel, vals: &[f64]) -> EmbeddedVideo {
        let n = vals.len();
        EmbeddedVideo {
            id: id.into(),
            style,
            snippets: vals
                .iter()
                .map(|x| SnippetEmbedding {
                    fg: vec![*x],
                    bg: vec![0.0],
                })
                .collect(),
            starts: (0..n).map(|t| 4 * t).collect(),
            actions: vec![
                Action {
                    omega: [0.0; 3],
                    dir: [1.0, 0.0, 0.0],
                    scale: 0.3
                };
                4 * n + 8
            ],
            yaw: vec![0.0; 4 * n + 9],
            v: vec![0.0; 2],
        }
    }

    #[test]
    fn self_match_is_identity() {
        let c = vec![video("a", StyleLabel::Follow, &[0.1, 0.5, 0.2, 0.9, 0.4])];
        let mut cache = DtwCache::default();
        for t in c[0].labelled() {
            assert_eq!(matched_index(&c, &mut cache, 0, 0, t).unwrap(), t);
        }
    }

    #[test]
    fn sampling_needs_two_videos() {
        let c = vec![
            video("a", StyleLabel::Follow, &[0.1, 0.5]),
            video("b", StyleLabel::Orbiting, &[0.1, 0.5]),
        ];
        let mut rng = seeded_rng(1);
        let err = sample_training_pair(&c, StyleLabel::Follow, &mut DtwCache::default(), &mut rng);
        assert!(matches!(err, Err(Error::Sampling(_))));
    }

    #[test]
    fn sampling_is_seeded_and_same_style() {
        let c = vec![
            video("a", StyleLabel::Follow, &[0.1, 0.5, 0.7]),
            video("b", StyleLabel::Follow, &[0.2, 0.4, 0.6, 0.8]),
            video("c", StyleLabel::Orbiting, &[0.1, 0.5]),
            video("d", StyleLabel::Follow, &[0.0, 0.9]),
        ];
        let draw = |seed| {
            let mut rng = seeded_rng(seed);
            let mut cache = DtwCache::default();
            (0..20)
                .map(|_| sample_training_pair(&c, StyleLabel::Follow, &mut cache, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        let a = draw(5);
        assert_eq!(a, draw(5));
        for d in &a {
            assert_ne!(d.content, d.style_video);
            assert_eq!(c[d.style_video].style, StyleLabel::Follow);
        }
    }

    #[test]
    fn direction_error_units() {
        assert_eq!(direction_error(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]), 0.0);
        let e = direction_error(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert!((e - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
