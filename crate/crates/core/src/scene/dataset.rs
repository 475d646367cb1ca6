//! On-disk corpus.
//!
//! Layout:
//!
//! ```text
//! <root>/manifest.txt            # "# imfilm dataset v1" then "id style split seed duration"
//! <root>/<id>/meta.json          # VideoMeta
//! <root>/<id>/frames.cmt         # t, camera pose, subject pose, subject height
//! <root>/<id>/features.cmt       # fg (5), bg (128), mask_lo, mask_hi
//! <root>/<id>/actions.cmt        # omega (3), dir (3), scale
//! ```
//!
//! Tables use the `CMT1` format: magic `CMT1`, `u32` column count, `u64` row
//! count, then per column a `u16` name length and UTF-8 name, then the cells as
//! little-endian `f64` in row-major order. The 64-bit validity mask is split
//! into two 32-bit halves stored exactly as floats.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::background::{BgFeature, BG_DIM, GRID};
use super::render::{render_video, FrameFeature, NoiseLevels};
use super::script::{SamplerRanges, ShotScript};
use super::{generate_style_trajectory, FrameSample};
use crate::action::Action;
use crate::error::{Error, Result};
use crate::geometry::{FgFeature, Intrinsics, Orientation, Pose6D};
use crate::style::StyleLabel;

pub const MANIFEST_HEADER: &str = "# imfilm dataset v1";
const TABLE_MAGIC: &[u8; 4] = b"CMT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown split `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub id: String,
    pub style: StyleLabel,
    pub split: Split,
    pub seed: u64,
    pub duration: f64,
    pub intrinsics: Intrinsics,
    pub subject_height: f64,
    pub script: Option<ShotScript>,
}

/// One video: ground truth, observations and action labels. `actions[k]`
/// describes the transition from frame `k` to `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub meta: VideoMeta,
    pub frames: Vec<FrameSample>,
    pub features: Vec<FrameFeature>,
    pub actions: Vec<Action>,
}

impl VideoRecord {
    /// Synthesizes a video from its script.
    pub fn synthesize(
        id: String,
        split: Split,
        script: ShotScript,
        k: &Intrinsics,
        noise: &NoiseLevels,
    ) -> Result<Self> {
        let frames = generate_style_trajectory(&script)?;
        let (features, actions) = render_video(&frames, k, noise, script.seed)?;
        Ok(Self {
            meta: VideoMeta {
                id,
                style: script.style,
                split,
                seed: script.seed,
                duration: script.duration,
                intrinsics: *k,
                subject_height: script.subject.height,
                script: Some(script),
            },
            frames,
            features,
            actions,
        })
    }

    /// Horizontal-flip augmentation: features and labels mirrored; the style
    /// label is unchanged.
    pub fn flipped(&self) -> Self {
        Self {
            meta: VideoMeta {
                id: format!("{}-flip", self.meta.id),
                script: self.meta.script.as_ref().map(ShotScript::mirrored),
                ..self.meta.clone()
            },
            frames: self
                .frames
                .iter()
                .map(|f| FrameSample {
                    camera: f.camera.mirrored(),
                    subject: f.subject.mirrored(),
                    ..*f
                })
                .collect(),
            features: self.features.iter().map(FrameFeature::flipped).collect(),
            actions: self.actions.iter().map(Action::mirrored).collect(),
        }
    }

    /// Concatenates videos in time, renumbering timestamps. Used to build
    /// multi-style demonstrations.
    pub fn concat(id: String, parts: &[VideoRecord]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("nothing to concatenate".into()))?;
        let mut out = VideoRecord {
            meta: VideoMeta {
                id,
                script: None,
                duration: 0.0,
                ..first.meta.clone()
            },
            frames: Vec::new(),
            features: Vec::new(),
            actions: Vec::new(),
        };
        for p in parts {
            let offset = out.frames.len() as f64 * super::DT;
            if !out.frames.is_empty() {
                // The seam transition has no physical meaning; repeat the
                // part's first action so every frame but the last has a label.
                out.actions.push(p.actions[0]);
            }
            out.frames
                .extend(p.frames.iter().map(|f| FrameSample { t: f.t + offset, ..*f }));
            let mut feats = p.features.clone();
            if !out.features.is_empty() {
                // Motion across the seam is undefined; mark it unobserved.
                feats[0].bg = BgFeature::zeros();
            }
            out.features.extend(feats);
            out.actions.extend_from_slice(&p.actions);
        }
        out.meta.duration = (out.frames.len() - 1) as f64 * super::DT;
        Ok(out)
    }
}

/// Per-split, per-style video counts and generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    /// Counts indexed by `StyleLabel::index()`.
    pub train: [usize; 5],
    pub val: [usize; 5],
    pub test: [usize; 5],
    pub ranges: SamplerRanges,
    pub noise: NoiseLevels,
    pub intrinsics: Intrinsics,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            train: [28, 14, 20, 18, 17],
            val: [2, 2, 2, 2, 2],
            test: [14, 7, 10, 10, 8],
            ranges: SamplerRanges::default(),
            noise: NoiseLevels::default(),
            intrinsics: Intrinsics::default(),
            seed: 2020,
        }
    }
}

impl CorpusSpec {
    pub fn empty() -> Self {
        Self {
            train: [0; 5],
            val: [0; 5],
            test: [0; 5],
            ..Self::default()
        }
    }

    pub fn counts(&self, split: Split) -> &[usize; 5] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn total(&self) -> usize {
        Split::ALL.iter().map(|s| self.counts(*s).iter().sum::<usize>()).sum()
    }

    /// Keeps only the listed styles.
    pub fn restrict(&mut self, styles: &[StyleLabel]) {
        for s in StyleLabel::ALL {
            if !styles.contains(&s) {
                self.train[s.index()] = 0;
                self.val[s.index()] = 0;
                self.test[s.index()] = 0;
            }
        }
    }

    /// Seed of the `index`-th video of `style` in `split`. The split occupies
    /// the top bits, so seeds never collide across splits.
    pub fn video_seed(&self, split: Split, style: StyleLabel, index: usize) -> u64 {
        let split_code = split as u64 + 1;
        let base = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) & 0x0000_FFFF_FFFF_0000;
        (split_code << 56) | ((style.index() as u64) << 48) | base | (index as u64 & 0xFFFF)
    }

    /// Every video this spec describes, in manifest order.
    pub fn scripts(&self) -> Vec<(String, Split, ShotScript)> {
        let mut out = Vec::new();
        for split in Split::ALL {
            for style in StyleLabel::ALL {
                for i in 0..self.counts(split)[style.index()] {
                    let seed = self.video_seed(split, style, i);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let script = ShotScript::sample(style, &self.ranges, seed, &mut rng);
                    out.push((format!("{split}-{style}-{i:03}"), split, script));
                }
            }
        }
        out
    }
}

/// A loaded corpus.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub videos: Vec<VideoRecord>,
}

impl Dataset {
    pub fn generate(spec: &CorpusSpec) -> Result<Self> {
        let videos = spec
            .scripts()
            .into_iter()
            .map(|(id, split, script)| VideoRecord::synthesize(id, split, script, &spec.intrinsics, &spec.noise))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { videos })
    }

    pub fn split(&self, split: Split) -> Vec<&VideoRecord> {
        self.videos.iter().filter(|v| v.meta.split == split).collect()
    }

    pub fn count(&self, split: Split, style: StyleLabel) -> usize {
        self.videos
            .iter()
            .filter(|v| v.meta.split == split && v.meta.style == style)
            .count()
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let mut manifest = String::from(MANIFEST_HEADER);
        manifest.push('\n');
        for v in &self.videos {
            write_video(&root.join(&v.meta.id), v)?;
            manifest.push_str(&format!(
                "{} {} {} {} {}\n",
                v.meta.id, v.meta.style, v.meta.split, v.meta.seed, v.meta.duration
            ));
        }
        write_file(&root.join("manifest.txt"), manifest.as_bytes())
    }

    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join("manifest.txt");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err(Error::format(&path, "missing manifest header"));
        }
        let mut videos = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let id = line
                .split_whitespace()
                .next()
                .ok_or_else(|| Error::format(&path, "empty manifest line"))?;
            videos.push(read_video(&root.join(id))?);
        }
        Ok(Self { videos })
    }
}

/// Generates the corpus described by `spec` and writes it under `root`.
pub fn make_dataset(spec: &CorpusSpec, root: &Path) -> Result<Dataset> {
    let ds = Dataset::generate(spec)?;
    let mut seeds: Vec<u64> = ds.videos.iter().map(|v| v.meta.seed).collect();
    seeds.sort_unstable();
    if seeds.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("video seeds collide".into()));
    }
    ds.save(root)?;
    Ok(ds)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Encodes a `CMT1` table.
pub fn encode_table(columns: &[String], rows: &[Vec<f64>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + rows.len() * columns.len() * 8);
    out.extend_from_slice(TABLE_MAGIC);
    out.extend_from_slice(&(columns.len() as u32).to_le_bytes());
    out.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    for c in columns {
        out.extend_from_slice(&(c.len() as u16).to_le_bytes());
        out.extend_from_slice(c.as_bytes());
    }
    for r in rows {
        debug_assert_eq!(r.len(), columns.len());
        for v in r {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Decodes a `CMT1` table into column names and rows.
pub fn decode_table(path: &Path, bytes: &[u8]) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let bad = |d: &str| Error::format(path, d.to_string());
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        let s = bytes.get(*pos..*pos + n).ok_or_else(|| bad("truncated table"))?;
        *pos += n;
        Ok(s)
    };
    let mut pos = 0;
    if take(&mut pos, 4)? != TABLE_MAGIC {
        return Err(bad("bad table magic"));
    }
    let ncol = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let nrow = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
    let mut columns = Vec::with_capacity(ncol);
    for _ in 0..ncol {
        let len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(take(&mut pos, len)?).map_err(|_| bad("column name is not UTF-8"))?;
        columns.push(name.to_string());
    }
    let mut rows = Vec::with_capacity(nrow);
    for _ in 0..nrow {
        let mut r = Vec::with_capacity(ncol);
        for _ in 0..ncol {
            r.push(f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
        }
        rows.push(r);
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes after table"));
    }
    Ok((columns, rows))
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn frame_columns() -> Vec<String> {
    names(&[
        "t",
        "cam_x",
        "cam_y",
        "cam_z",
        "cam_roll",
        "cam_yaw",
        "cam_pitch",
        "subj_x",
        "subj_y",
        "subj_z",
        "subj_roll",
        "subj_yaw",
        "subj_pitch",
        "subject_height",
    ])
}

fn feature_columns() -> Vec<String> {
    let mut c = names(&["fg_cx", "fg_cy", "fg_w", "fg_h", "fg_orientation"]);
    for r in 0..GRID {
        for k in 0..GRID {
            c.push(format!("bg_{r}{k}_dx"));
            c.push(format!("bg_{r}{k}_dy"));
        }
    }
    c.push("mask_lo".into());
    c.push("mask_hi".into());
    c
}

fn action_columns() -> Vec<String> {
    names(&[
        "omega_roll",
        "omega_yaw",
        "omega_pitch",
        "dir_x",
        "dir_y",
        "dir_z",
        "scale",
    ])
}

fn pose_row(p: &Pose6D) -> [f64; 6] {
    let o = p.orientation.as_array();
    [p.position[0], p.position[1], p.position[2], o[0], o[1], o[2]]
}

fn pose_from(r: &[f64]) -> Pose6D {
    Pose6D {
        position: [r[0], r[1], r[2]],
        orientation: Orientation {
            roll: r[3],
            yaw: r[4],
            pitch: r[5],
        },
    }
}

pub fn frames_table(frames: &[FrameSample]) -> (Vec<String>, Vec<Vec<f64>>) {
    let rows = frames
        .iter()
        .map(|f| {
            let mut r = vec![f.t];
            r.extend(pose_row(&f.camera));
            r.extend(pose_row(&f.subject));
            r.push(f.subject_height);
            r
        })
        .collect();
    (frame_columns(), rows)
}

pub fn features_table(features: &[FrameFeature]) -> (Vec<String>, Vec<Vec<f64>>) {
    let rows = features
        .iter()
        .map(|f| {
            let mut r = f.fg.as_array().to_vec();
            r.extend_from_slice(&f.bg.values);
            r.push((f.bg.mask & 0xFFFF_FFFF) as f64);
            r.push((f.bg.mask >> 32) as f64);
            r
        })
        .collect();
    (feature_columns(), rows)
}

pub fn actions_table(actions: &[Action]) -> (Vec<String>, Vec<Vec<f64>>) {
    (action_columns(), actions.iter().map(|a| a.to_vec().to_vec()).collect())
}

fn write_video(dir: &Path, v: &VideoRecord) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = serde_json::to_vec_pretty(&v.meta).map_err(|e| Error::format(dir.join("meta.json"), e.to_string()))?;
    write_file(&dir.join("meta.json"), &meta)?;
    let (c, r) = frames_table(&v.frames);
    write_file(&dir.join("frames.cmt"), &encode_table(&c, &r))?;
    let (c, r) = features_table(&v.features);
    write_file(&dir.join("features.cmt"), &encode_table(&c, &r))?;
    let (c, r) = actions_table(&v.actions);
    write_file(&dir.join("actions.cmt"), &encode_table(&c, &r))
}

fn read_table(path: PathBuf, expect: &[String]) -> Result<Vec<Vec<f64>>> {
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let (cols, rows) = decode_table(&path, &bytes)?;
    if cols != expect {
        return Err(Error::format(&path, "unexpected columns"));
    }
    Ok(rows)
}

/// Reads one video directory.
pub fn read_video(dir: &Path) -> Result<VideoRecord> {
    let mpath = dir.join("meta.json");
    let text = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let meta: VideoMeta = serde_json::from_slice(&text).map_err(|e| Error::format(&mpath, e.to_string()))?;
    let frames = read_table(dir.join("frames.cmt"), &frame_columns())?
        .iter()
        .map(|r| FrameSample {
            t: r[0],
            camera: pose_from(&r[1..7]),
            subject: pose_from(&r[7..13]),
            subject_height: r[13],
        })
        .collect();
    let features = read_table(dir.join("features.cmt"), &feature_columns())?
        .iter()
        .map(|r| FrameFeature {
            fg: FgFeature::from_array([r[0], r[1], r[2], r[3], r[4]]),
            bg: BgFeature {
                values: r[5..5 + BG_DIM].to_vec(),
                mask: (r[5 + BG_DIM] as u64) | ((r[6 + BG_DIM] as u64) << 32),
            },
        })
        .collect();
    let actions = read_table(dir.join("actions.cmt"), &action_columns())?
        .iter()
        .map(|r| Action::from_slice(r))
        .collect();
    Ok(VideoRecord {
        meta,
        frames,
        features,
        actions,
    })
}

/// Writes a single video (for example a recaptured run) in the dataset format.
pub fn save_video(dir: &Path, v: &VideoRecord) -> Result<()> {
    write_video(dir, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_split_matches_corpus_counts() {
        let spec = CorpusSpec::default();
        let by_table = |c: &[usize; 5]| StyleLabel::TABLE_ORDER.map(|s| c[s.index()]);
        assert_eq!(by_table(&spec.train), [14, 28, 18, 20, 17]);
        assert_eq!(by_table(&spec.test), [7, 14, 10, 10, 8]);
        assert_eq!(spec.train.iter().sum::<usize>(), 97);
        assert_eq!(spec.test.iter().sum::<usize>(), 49);
    }

    #[test]
    fn seeds_disjoint_across_splits() {
        let spec = CorpusSpec::default();
        let mut seen = std::collections::HashSet::new();
        for (_, _, s) in spec.scripts() {
            assert!(seen.insert(s.seed));
        }
    }

    #[test]
    fn table_round_trip() {
        let cols = names(&["a", "b"]);
        let rows = vec![vec![1.0, f64::MIN_POSITIVE], vec![-0.0, 1e300]];
        let bytes = encode_table(&cols, &rows);
        let (c, r) = decode_table(Path::new("x"), &bytes).unwrap();
        assert_eq!(c, cols);
        assert_eq!(r.len(), 2);
        assert!(r
            .iter()
            .flatten()
            .zip(rows.iter().flatten())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(decode_table(Path::new("x"), &bytes[..bytes.len() - 1]).is_err());
    }
}
