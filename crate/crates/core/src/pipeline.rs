//! Stage wiring shared by the command-line tool and the benchmarks: corpus
//! embedding, training of every stage, and the evaluation protocols.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::controller::{closed_loop_run, ControllerConfig, Demo, PlannedSegment, Recapture, Scene};
use crate::error::{Error, Result};
use crate::features::{train_autoencoder, window_starts, Channel, Encoders, SNIPPET_LEN, SNIPPET_STRIDE};
use crate::imitation::train::{evaluate_imitation, train_imitation_net, EmbeddedVideo, ImitationTrainConfig, MseTable};
use crate::imitation::ImitationNet;
use crate::scene::{
    check_contract, ContractReport, ContractTolerance, FrameFeature, SamplerRanges, ShotScript, Split, VideoRecord,
};
use crate::segmenter::{ProbCurve, SegmentList, SegmenterConfig};
use crate::style::StyleLabel;
use crate::style_net::{evaluate, train_style_net, Confusion, LabelledSeq, StyleNet, Variant};
use crate::training::EpochLog;
use imfilm_nn::seeded_rng;

/// Evenly spaced training snippets from each video.
pub fn autoencoder_snippets(videos: &[&VideoRecord], per_video: usize) -> Result<Vec<Vec<FrameFeature>>> {
    let mut out = Vec::new();
    for v in videos {
        let starts = window_starts(v.features.len(), SNIPPET_LEN, SNIPPET_STRIDE)?;
        let pick: Vec<usize> = if per_video == 0 || per_video >= starts.len() {
            starts
        } else if per_video == 1 {
            vec![starts[starts.len() / 2]]
        } else {
            (0..per_video)
                .map(|i| starts[(i * (starts.len() - 1) + (per_video - 1) / 2) / (per_video - 1)])
                .collect()
        };
        out.extend(pick.into_iter().map(|s| v.features[s..s + SNIPPET_LEN].to_vec()));
    }
    Ok(out)
}

pub struct EncoderLogs {
    pub fg: Vec<EpochLog>,
    pub bg: Vec<EpochLog>,
}

/// Trains both snippet autoencoders on the training videos.
pub fn train_encoders(cfg: &ExperimentConfig, train: &[&VideoRecord]) -> Result<(Encoders, EncoderLogs)> {
    let snippets = autoencoder_snippets(train, cfg.autoencoder.snippets_per_video)?;
    let (fg, fg_log) = train_autoencoder(Channel::Fg, &snippets, &cfg.autoencoder.fg)?;
    let (bg, bg_log) = train_autoencoder(Channel::Bg, &snippets, &cfg.autoencoder.bg)?;
    Ok((Encoders::new(fg, bg)?, EncoderLogs { fg: fg_log, bg: bg_log }))
}

/// Embeds a video; the style feature is left empty.
pub fn embed_record(enc: &Encoders, v: &VideoRecord) -> Result<EmbeddedVideo> {
    Ok(EmbeddedVideo {
        id: v.meta.id.clone(),
        style: v.meta.style,
        snippets: enc.embed_video(&v.features)?,
        starts: window_starts(v.features.len(), SNIPPET_LEN, SNIPPET_STRIDE)?,
        actions: v.actions.clone(),
        yaw: v.frames.iter().map(|f| f.camera.orientation.yaw).collect(),
        v: Vec::new(),
    })
}

/// Embeds videos, optionally followed by their mirrored copies.
pub fn embed_records(enc: &Encoders, videos: &[&VideoRecord], flip: bool) -> Result<Vec<EmbeddedVideo>> {
    let mut out = Vec::with_capacity(videos.len() * if flip { 2 } else { 1 });
    for v in videos {
        out.push(embed_record(enc, v)?);
    }
    if flip {
        for v in videos {
            let mut e = embed_record(enc, &v.flipped())?;
            e.id.push_str("-flip");
            out.push(e);
        }
    }
    Ok(out)
}

pub fn labelled(videos: &[EmbeddedVideo]) -> Vec<LabelledSeq> {
    videos
        .iter()
        .map(|v| LabelledSeq {
            id: v.id.clone(),
            seq: v.snippets.clone(),
            label: v.style,
        })
        .collect()
}

pub fn attach_style_features(net: &StyleNet, videos: &mut [EmbeddedVideo]) -> Result<()> {
    for v in videos.iter_mut() {
        v.v = net.forward(&v.snippets)?.v;
    }
    Ok(())
}

/// Embedded corpus split for the later stages.
pub struct EmbeddedCorpus {
    /// Training videos followed by their mirrored copies when flipping is on.
    pub train: Vec<EmbeddedVideo>,
    pub val: Vec<EmbeddedVideo>,
    pub test: Vec<EmbeddedVideo>,
}

pub fn embed_corpus(
    enc: &Encoders,
    train: &[&VideoRecord],
    val: &[&VideoRecord],
    test: &[&VideoRecord],
    flip: bool,
) -> Result<EmbeddedCorpus> {
    Ok(EmbeddedCorpus {
        train: embed_records(enc, train, flip)?,
        val: embed_records(enc, val, false)?,
        test: embed_records(enc, test, false)?,
    })
}

#[derive(Debug, Clone)]
pub struct StyleResult {
    pub net: StyleNet,
    pub log: Vec<EpochLog>,
    pub confusion: Confusion,
}

pub fn train_style_variant(cfg: &ExperimentConfig, variant: Variant, corpus: &EmbeddedCorpus) -> Result<StyleResult> {
    let train = labelled(&corpus.train);
    let val = labelled(&corpus.val);
    let (net, log) = train_style_net(variant, cfg.style.dims, &train, &val, &cfg.style.train)?;
    let (confusion, _) = evaluate(&net, &labelled(&corpus.test))?;
    Ok(StyleResult { net, log, confusion })
}

#[derive(Debug, Clone)]
pub struct ImitationResult {
    pub net: ImitationNet,
    pub log: Vec<EpochLog>,
    pub table: MseTable,
}

/// Trains on the training split (with style features attached) and scores
/// on the test split.
pub fn train_imitation(
    cfg: &ExperimentConfig,
    train_cfg: &ImitationTrainConfig,
    train: &[EmbeddedVideo],
    test: &[EmbeddedVideo],
) -> Result<ImitationResult> {
    let (net, log) = train_imitation_net(train, cfg.imitation.dims, train_cfg)?;
    let (table, _) = evaluate_imitation(&net, test, train_cfg.zero_style)?;
    Ok(ImitationResult { net, log, table })
}

/// A concatenation of two single-style clips with a known seam.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub video: VideoRecord,
    pub labels: Vec<StyleLabel>,
    /// Seam times, seconds.
    pub boundaries: Vec<f64>,
}

fn clip(cfg: &ExperimentConfig, id: String, style: StyleLabel, duration: f64, seed: u64) -> Result<VideoRecord> {
    let ranges = SamplerRanges {
        duration: (duration, duration),
        ..cfg.corpus.ranges
    };
    let mut rng = seeded_rng(seed);
    let script = ShotScript::sample(style, &ranges, seed, &mut rng);
    VideoRecord::synthesize(id, Split::Test, script, &cfg.corpus.intrinsics, &cfg.corpus.noise)
}

/// Concatenates fresh clips of the given styles and durations.
pub fn make_mixture(cfg: &ExperimentConfig, id: &str, parts: &[(StyleLabel, f64)], seed: u64) -> Result<Mixture> {
    let mut clips = Vec::with_capacity(parts.len());
    for (i, (style, d)) in parts.iter().enumerate() {
        clips.push(clip(
            cfg,
            format!("{id}-{i}"),
            *style,
            *d,
            seed.wrapping_mul(31).wrapping_add(i as u64),
        )?);
    }
    let mut boundaries = Vec::new();
    let mut frames = 0;
    for c in &clips[..clips.len() - 1] {
        frames += c.frames.len();
        boundaries.push(frames as f64 * crate::scene::DT);
    }
    Ok(Mixture {
        video: VideoRecord::concat(id.to_string(), &clips)?,
        labels: parts.iter().map(|p| p.0).collect(),
        boundaries,
    })
}

/// The benchmark set of two-style concatenations: distinct style pairs drawn
/// uniformly, part durations uniform in the configured range.
pub fn mixture_set(cfg: &ExperimentConfig) -> Result<Vec<Mixture>> {
    use rand::Rng;
    let mut rng = seeded_rng(cfg.eval.mixture_seed);
    let (lo, hi) = cfg.eval.mixture_part;
    (0..cfg.eval.mixtures)
        .map(|i| {
            let a = rng.random_range(0..5);
            let b = (a + rng.random_range(1..5)) % 5;
            let da = rng.random_range(lo..=hi);
            let db = rng.random_range(lo..=hi);
            let seed: u64 = rng.random();
            make_mixture(
                cfg,
                &format!("mix-{i:03}"),
                &[(StyleLabel::ALL[a], da), (StyleLabel::ALL[b], db)],
                seed,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationOutcome {
    pub id: String,
    pub truth: Vec<StyleLabel>,
    pub true_boundaries: Vec<f64>,
    pub found: Vec<StyleLabel>,
    pub found_boundaries: Vec<f64>,
    /// Largest boundary error; infinite when the segment count differs.
    pub boundary_error: f64,
    pub correct: bool,
}

pub fn segment_video(
    net: &StyleNet,
    enc: &Encoders,
    features: &[FrameFeature],
    cfg: &SegmenterConfig,
) -> Result<(SegmentList, ProbCurve)> {
    crate::segmenter::segment(features, net, enc, cfg)
}

pub fn score_segmentation(m: &Mixture, found: &SegmentList, tolerance: f64) -> SegmentationOutcome {
    let fb = found.boundaries();
    let boundary_error = if fb.len() == m.boundaries.len() {
        fb.iter()
            .zip(&m.boundaries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    let labels = found.labels();
    SegmentationOutcome {
        id: m.video.meta.id.clone(),
        truth: m.labels.clone(),
        true_boundaries: m.boundaries.clone(),
        correct: labels == m.labels && boundary_error <= tolerance,
        found: labels,
        found_boundaries: fb,
        boundary_error,
    }
}

pub fn segmentation_benchmark(
    net: &StyleNet,
    enc: &Encoders,
    mixtures: &[Mixture],
    cfg: &ExperimentConfig,
) -> Result<Vec<SegmentationOutcome>> {
    mixtures
        .iter()
        .map(|m| {
            let (segs, _) = segment_video(net, enc, &m.video.features, &cfg.segmenter)?;
            Ok(score_segmentation(m, &segs, cfg.eval.boundary_tolerance))
        })
        .collect()
}

pub fn segmentation_csv(out: &[SegmentationOutcome]) -> String {
    let join = |v: &[StyleLabel]| v.iter().map(|l| l.name()).collect::<Vec<_>>().join("|");
    let times = |v: &[f64]| v.iter().map(|t| format!("{t:.2}")).collect::<Vec<_>>().join("|");
    let mut s = String::from("id,truth,true_boundaries,found,found_boundaries,boundary_error,correct\n");
    for o in out {
        s.push_str(&format!(
            "{},{},{},{},{},{:.3},{}\n",
            o.id,
            join(&o.truth),
            times(&o.true_boundaries),
            join(&o.found),
            times(&o.found_boundaries),
            o.boundary_error,
            o.correct
        ));
    }
    s
}

/// Segments a demo and turns each segment into a style feature.
pub fn plan_imitation(
    net: &StyleNet,
    enc: &Encoders,
    demo: &[FrameFeature],
    cfg: &SegmenterConfig,
) -> Result<(SegmentList, Vec<PlannedSegment>)> {
    let (segs, _) = segment_video(net, enc, demo, cfg)?;
    let snippets = enc.embed_video(demo)?;
    let starts = window_starts(demo.len(), SNIPPET_LEN, SNIPPET_STRIDE)?;
    let frame_of = |t: f64| (t / crate::scene::DT).round() as usize;
    let mut plan = Vec::with_capacity(segs.segments.len());
    for s in &segs.segments {
        let (a, b) = (frame_of(s.start), frame_of(s.end) + 1);
        let idx: Vec<usize> = (0..starts.len())
            .filter(|&i| starts[i] >= a && starts[i] + SNIPPET_LEN <= b)
            .collect();
        // Segments shorter than a snippet borrow the nearest one.
        let seq = if idx.is_empty() {
            let near = starts.iter().position(|&st| st >= a).unwrap_or(starts.len() - 1);
            vec![snippets[near].clone()]
        } else {
            idx.iter().map(|&i| snippets[i].clone()).collect()
        };
        plan.push(PlannedSegment {
            label: s.label,
            first_frame: a,
            end_frame: b.min(demo.len()),
            v: net.forward(&seq)?.v,
        });
    }
    Ok((segs, plan))
}

/// Trained components needed for filming.
pub struct Models<'a> {
    pub encoders: &'a Encoders,
    pub style: &'a StyleNet,
    pub imitation: &'a ImitationNet,
}

#[derive(Debug, Clone)]
pub struct RecaptureOutcome {
    pub demo: String,
    pub style: StyleLabel,
    pub plan: SegmentList,
    pub recapture: Option<Recapture>,
    /// Style-net label of the whole recapture.
    pub predicted: Option<StyleLabel>,
    /// Segmentation of the recapture, for plans with several segments.
    pub resegmented: Option<SegmentList>,
    /// One report per planned segment.
    pub contracts: Vec<ContractReport>,
    /// Abort diagnostic when the run did not complete.
    pub error: Option<String>,
}

impl RecaptureOutcome {
    /// Single-style plans: the recapture is classified as the demo's style.
    /// Longer plans: the recapture re-segments into the planned labels.
    pub fn recovered(&self) -> bool {
        match &self.resegmented {
            Some(r) => r.labels() == self.plan.labels(),
            None => self.predicted == Some(self.style),
        }
    }

    pub fn contract_passed(&self) -> bool {
        !self.contracts.is_empty() && self.contracts.iter().all(ContractReport::passed)
    }
}

/// Fresh scene of the demo's style and duration for a recapture. The subject
/// follows a new path; the drone starts with the demo's opening framing.
pub fn recapture_scene(cfg: &ExperimentConfig, demo: &VideoRecord, seed: u64) -> Result<Scene> {
    let ranges = SamplerRanges {
        duration: (demo.meta.duration, demo.meta.duration),
        ..cfg.corpus.ranges
    };
    let mut rng = seeded_rng(seed);
    let script = ShotScript::sample(demo.meta.style, &ranges, seed, &mut rng);
    let first = demo.frames.first().ok_or(Error::TooShort { len: 0, min: 1 })?;
    Ok(Scene::from_script(&script, &cfg.corpus.intrinsics, &cfg.corpus.noise)?
        .framed_like(&first.camera, &first.subject))
}

/// Segments the demo, films a new scene, and classifies the result.
pub fn imitate(
    models: &Models<'_>,
    demo: &VideoRecord,
    scene: &Scene,
    seg: &SegmenterConfig,
    ctl: &ControllerConfig,
) -> Result<RecaptureOutcome> {
    let (segs, plan) = plan_imitation(models.style, models.encoders, &demo.features, seg)?;
    let mut out = RecaptureOutcome {
        demo: demo.meta.id.clone(),
        style: demo.meta.style,
        plan: segs,
        recapture: None,
        predicted: None,
        resegmented: None,
        contracts: Vec::new(),
        error: None,
    };
    let rec = closed_loop_run(
        &Demo::from_video(demo),
        &plan,
        scene,
        models.encoders,
        models.imitation,
        ctl,
    )?;
    match &rec.aborted {
        None => {
            let seq = models.encoders.embed_video(&rec.features)?;
            out.predicted = Some(models.style.forward(&seq)?.predicted());
            if plan.len() > 1 {
                out.resegmented = Some(segment_video(models.style, models.encoders, &rec.features, seg)?.0);
            }
            let tol = ContractTolerance::recapture();
            out.contracts = plan
                .iter()
                .map(|p| {
                    let end = p.end_frame.min(rec.frames.len());
                    check_contract(p.label, &rec.frames[p.first_frame.min(end)..end], &tol)
                })
                .collect();
        }
        Some(l) => out.error = Some(Error::from(*l).to_string()),
    }
    out.recapture = Some(rec);
    Ok(out)
}

/// The recapture in dataset form, so it can be stored and fed back into the
/// style and segmentation tools.
pub fn recapture_record(demo: &VideoRecord, scene: &Scene, rec: &Recapture) -> VideoRecord {
    let k = scene.k;
    let actions = crate::scene::render::action_labels(&rec.frames, &k);
    VideoRecord {
        meta: crate::scene::VideoMeta {
            id: format!("{}-recapture", demo.meta.id),
            style: demo.meta.style,
            split: Split::Test,
            seed: scene.seed,
            duration: rec.frames.last().map_or(0.0, |f| f.t),
            intrinsics: k,
            subject_height: scene.subject.height,
            script: None,
        },
        frames: rec.frames.clone(),
        features: rec.features.clone(),
        actions,
    }
}

/// Closed-loop recovery on the first `demos_per_style` test videos of each
/// style, each filmed in a fresh scene of the same style.
pub fn recapture_benchmark(
    models: &Models<'_>,
    test: &[&VideoRecord],
    cfg: &ExperimentConfig,
) -> Result<Vec<RecaptureOutcome>> {
    let mut out = Vec::new();
    for style in StyleLabel::ALL {
        let demos: Vec<&&VideoRecord> = test
            .iter()
            .filter(|v| v.meta.style == style)
            .take(cfg.eval.demos_per_style)
            .collect();
        for (i, demo) in demos.into_iter().enumerate() {
            let seed = cfg.eval.recapture_seed ^ ((style.index() as u64) << 32 | i as u64);
            let scene = recapture_scene(cfg, demo, seed)?;
            out.push(imitate(models, demo, &scene, &cfg.segmenter, &cfg.controller)?);
        }
    }
    Ok(out)
}

/// Per-style recovery accuracy and contract pass rate.
pub fn recovery_table(outcomes: &[RecaptureOutcome]) -> Vec<(StyleLabel, usize, f64, f64)> {
    StyleLabel::TABLE_ORDER
        .iter()
        .map(|&s| {
            let rows: Vec<&RecaptureOutcome> = outcomes.iter().filter(|o| o.style == s).collect();
            let n = rows.len();
            let k = n.max(1) as f64;
            let acc = rows.iter().filter(|o| o.recovered()).count() as f64 / k;
            let con = rows.iter().filter(|o| o.contract_passed()).count() as f64 / k;
            (s, n, acc, con)
        })
        .collect()
}

pub fn recovery_csv(outcomes: &[RecaptureOutcome]) -> String {
    let mut s = String::from("demo,style,plan,predicted,recovered,contract,detail\n");
    for o in outcomes {
        let plan = o.plan.labels().iter().map(|l| l.name()).collect::<Vec<_>>().join("|");
        let detail = match &o.error {
            Some(e) => e.clone(),
            None => o
                .contracts
                .iter()
                .flat_map(|c| c.violations.iter().cloned())
                .collect::<Vec<_>>()
                .join("; "),
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},\"{}\"\n",
            o.demo,
            o.style,
            plan,
            o.predicted.map_or("-".to_string(), |p| p.to_string()),
            o.recovered(),
            o.contract_passed(),
            detail.replace('"', "'")
        ));
    }
    s
}
