//! Splitting a multi-style video into single-style segments by watching the
//! classifier's probability curve over a growing prefix.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{window_starts, Encoders, SnippetEmbedding, SNIPPET_LEN, SNIPPET_STRIDE};
use crate::scene::{FrameFeature, DT};
use crate::style::StyleLabel;
use crate::style_net::{argmax, StyleNet};

pub const DEFAULT_THRESHOLD: f64 = 0.6;
pub const MIN_SEGMENT: f64 = 2.0;

/// How the cut threshold is compared against the major-style probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutRule {
    /// Cut when `p_major < threshold * peak(p_major)`.
    Relative,
    /// Cut when `p_major < threshold` after it has reached the threshold.
    Absolute,
}

impl CutRule {
    pub fn name(self) -> &'static str {
        match self {
            Self::Relative => "relative",
            Self::Absolute => "absolute",
        }
    }
}

impl fmt::Display for CutRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CutRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(Self::Relative),
            "absolute" => Ok(Self::Absolute),
            _ => Err(Error::Argument(format!("unknown cut rule {s:?}"))),
        }
    }
}

/// Where a detected style change is placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutPlacement {
    /// Start of the snippet at which the major-style probability peaked,
    /// i.e. where its decline began.
    Peak,
    /// Start of the snippet at which the decay condition first held.
    Crossing,
}

impl CutPlacement {
    pub fn name(self) -> &'static str {
        match self {
            Self::Peak => "peak",
            Self::Crossing => "crossing",
        }
    }
}

impl fmt::Display for CutPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CutPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "peak" => Ok(Self::Peak),
            "crossing" => Ok(Self::Crossing),
            _ => Err(Error::Argument(format!("unknown cut placement {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmenterConfig {
    pub threshold: f64,
    pub rule: CutRule,
    pub placement: CutPlacement,
    pub min_segment: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            rule: CutRule::Relative,
            placement: CutPlacement::Peak,
            min_segment: MIN_SEGMENT,
        }
    }
}

/// One point of a probability curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Time of the last frame of the snippet.
    pub t: f64,
    pub snippet: usize,
    /// Index of the first snippet of the current prefix.
    pub reset: usize,
    pub probs: [f64; 5],
}

pub type ProbCurve = Vec<CurvePoint>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub label: StyleLabel,
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentList {
    pub segments: Vec<Segment>,
    pub duration: f64,
}

impl SegmentList {
    pub fn labels(&self) -> Vec<StyleLabel> {
        self.segments.iter().map(|s| s.label).collect()
    }

    /// Interior cut times.
    pub fn boundaries(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }

    /// Checks coverage of `[0, duration]` without gaps or overlaps.
    pub fn validate(&self) -> Result<()> {
        let mut t = 0.0;
        for s in &self.segments {
            if s.start != t || s.end <= s.start {
                return Err(Error::Numeric(format!(
                    "segment [{}, {}] does not continue at {t}",
                    s.start, s.end
                )));
            }
            t = s.end;
        }
        if self.segments.is_empty() || t != self.duration {
            return Err(Error::Numeric(format!(
                "segments end at {t}, video at {}",
                self.duration
            )));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("start,end,label,peak\n");
        for g in &self.segments {
            s.push_str(&format!("{:.2},{:.2},{},{:.6}\n", g.start, g.end, g.label, g.peak));
        }
        s
    }
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut s = String::from("t,snippet,reset");
    for l in StyleLabel::ALL {
        s.push_str(&format!(",{l}"));
    }
    s.push('\n');
    for p in curve {
        s.push_str(&format!("{:.2},{},{}", p.t, p.snippet, p.reset));
        for v in p.probs {
            s.push_str(&format!(",{v:.6}"));
        }
        s.push('\n');
    }
    s
}

fn label_at(i: usize) -> Result<StyleLabel> {
    StyleLabel::from_index(i).ok_or_else(|| Error::Config(format!("no style with index {i}")))
}

fn probs5(p: &[f64]) -> Result<[f64; 5]> {
    p.try_into()
        .map_err(|_| Error::Config(format!("style network has {} classes, expected 5", p.len())))
}

/// Embeds a feature stream and returns the snippet starts with it.
pub fn embed_stream(features: &[FrameFeature], enc: &Encoders) -> Result<(Vec<usize>, Vec<SnippetEmbedding>)> {
    if features.len() < SNIPPET_LEN {
        return Err(Error::TooShort {
            len: features.len(),
            min: SNIPPET_LEN,
        });
    }
    let starts = window_starts(features.len(), SNIPPET_LEN, SNIPPET_STRIDE)?;
    Ok((starts, enc.embed_video(features)?))
}

/// Probability curve without resets: every prefix starting at the first
/// snippet.
pub fn prob_curve(features: &[FrameFeature], net: &StyleNet, enc: &Encoders) -> Result<ProbCurve> {
    let (starts, seq) = embed_stream(features, enc)?;
    curve_from(net, &seq, &starts, 0)
}

fn curve_from(net: &StyleNet, seq: &[SnippetEmbedding], starts: &[usize], from: usize) -> Result<ProbCurve> {
    net.prefix_probs(&seq[from..])?
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let t = from + k;
            Ok(CurvePoint {
                t: (starts[t] + SNIPPET_LEN - 1) as f64 * DT,
                snippet: t,
                reset: from,
                probs: probs5(&p)?,
            })
        })
        .collect()
}

/// Segments an embedded stream. Returns the segments and the probability
/// curve actually followed (with its resets).
pub fn segment_embedded(
    net: &StyleNet,
    seq: &[SnippetEmbedding],
    starts: &[usize],
    frames: usize,
    cfg: &SegmenterConfig,
) -> Result<(SegmentList, ProbCurve)> {
    if seq.is_empty() || seq.len() != starts.len() {
        return Err(Error::Argument("segmentation needs a nonempty embedded stream".into()));
    }
    let duration = (frames - 1) as f64 * DT;
    let mut segments = Vec::new();
    let mut followed = Vec::new();
    let mut seg_start = 0.0;
    let mut from = 0;
    'outer: loop {
        let curve = curve_from(net, seq, starts, from)?;
        let mut peaks = [0.0f64; 5];
        let mut peak_at = [from; 5];
        for (k, pt) in curve.iter().enumerate() {
            for (c, p) in pt.probs.iter().enumerate() {
                if *p > peaks[c] {
                    peaks[c] = *p;
                    peak_at[c] = pt.snippet;
                }
            }
            let major = argmax(&peaks);
            let p = pt.probs[major];
            let cut = match cfg.rule {
                CutRule::Relative => p < cfg.threshold * peaks[major],
                CutRule::Absolute => peaks[major] >= cfg.threshold && p < cfg.threshold,
            };
            let at = match cfg.placement {
                CutPlacement::Peak => peak_at[major],
                CutPlacement::Crossing => pt.snippet,
            };
            let tau = starts[at] as f64 * DT;
            if k > 0 && cut && tau - seg_start >= cfg.min_segment && duration - tau >= cfg.min_segment {
                followed.extend_from_slice(&curve[..=k]);
                segments.push(Segment {
                    start: seg_start,
                    end: tau,
                    label: label_at(major)?,
                    peak: peaks[major],
                });
                seg_start = tau;
                from = at;
                continue 'outer;
            }
        }
        let major = argmax(&peaks);
        segments.push(Segment {
            start: seg_start,
            end: duration,
            label: label_at(major)?,
            peak: peaks[major],
        });
        followed.extend(curve);
        break;
    }
    let list = SegmentList { segments, duration };
    list.validate()?;
    Ok((list, followed))
}

/// Segments a raw feature stream.
pub fn segment(
    features: &[FrameFeature],
    net: &StyleNet,
    enc: &Encoders,
    cfg: &SegmenterConfig,
) -> Result<(SegmentList, ProbCurve)> {
    let (starts, seq) = embed_stream(features, enc)?;
    segment_embedded(net, &seq, &starts, features.len(), cfg)
}
