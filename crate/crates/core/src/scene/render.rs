//! Observations and action labels for a generated trajectory.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::background::{render_motion_field, BgFeature, PointCloud};
use super::{stream_rng, FrameSample, DT, STREAM_BACKGROUND, STREAM_NOISE};
use crate::action::Action;
use crate::error::{Error, Result};
use crate::geometry::{
    project_foreground, scale_at_depth, subject_center, wrap_angle, Camera, FgFeature, Intrinsics, Pose6D, MIN_DEPTH,
};

/// Per-frame observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeature {
    pub fg: FgFeature,
    pub bg: BgFeature,
}

impl FrameFeature {
    pub fn flipped(&self) -> Self {
        Self {
            fg: self.fg.flipped(),
            bg: self.bg.flipped(),
        }
    }
}

/// Standard deviations of the measurement noise added to rendered features,
/// standing in for detector and tracker error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevels {
    /// Box centre, in normalized image units.
    pub fg_position: f64,
    /// Relative error of box width and height.
    pub fg_scale: f64,
    /// Body orientation, radians.
    pub fg_orientation: f64,
    /// Per-cell motion, normalized image units.
    pub bg: f64,
}

impl NoiseLevels {
    pub const NONE: NoiseLevels = NoiseLevels {
        fg_position: 0.0,
        fg_scale: 0.0,
        fg_orientation: 0.0,
        bg: 0.0,
    };

    pub fn is_none(&self) -> bool {
        *self == Self::NONE
    }
}

impl Default for NoiseLevels {
    fn default() -> Self {
        Self {
            fg_position: 0.002,
            fg_scale: 0.01,
            fg_orientation: 0.05,
            bg: 0.001,
        }
    }
}

/// Normalized on-screen subject height the camera at `frame` would see,
/// ignoring clipping and visibility; 0 when the subject is behind it.
pub fn geometric_scale(frame: &FrameSample, k: &Intrinsics) -> f64 {
    let cam = Camera::new(frame.camera, *k);
    let depth = cam.to_body(&subject_center(&frame.subject, frame.subject_height)).x;
    if depth <= MIN_DEPTH {
        0.0
    } else {
        scale_at_depth(k, frame.subject_height, depth).clamp(0.0, 1.0)
    }
}

/// Ground-truth action for every transition `k -> k + 1`.
pub fn action_labels(frames: &[FrameSample], k: &Intrinsics) -> Vec<Action> {
    frames
        .windows(2)
        .map(|w| Action::between(&w[0].camera, &w[1].camera, DT, geometric_scale(&w[1], k)))
        .collect()
}

fn gauss(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("noise level is finite and nonnegative")
}

/// Observed features for each frame. Frame 0 has no predecessor and gets an
/// all-masked zero motion field. Invisible subjects yield
/// [`FgFeature::ABSENT`].
pub fn render_features(
    frames: &[FrameSample],
    k: &Intrinsics,
    cloud: &PointCloud,
    noise: &NoiseLevels,
    seed: u64,
) -> Result<Vec<FrameFeature>> {
    let mut rng = noise_rng(seed);
    let mut out = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        let prev = if i == 0 { None } else { Some(&frames[i - 1].camera) };
        out.push(observe_frame(prev, f, k, cloud, noise, &mut rng)?);
    }
    Ok(out)
}

/// Generator for observation noise; `render_features` draws from it frame
/// by frame through [`observe_frame`].
pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, STREAM_NOISE)
}

/// Features of one frame given the previous camera pose.
pub fn observe_frame<R: Rng>(
    prev: Option<&Pose6D>,
    f: &FrameSample,
    k: &Intrinsics,
    cloud: &PointCloud,
    noise: &NoiseLevels,
    rng: &mut R,
) -> Result<FrameFeature> {
    let mut fg = match project_foreground(&f.camera, k, &f.subject, f.subject_height) {
        Ok(fg) => fg,
        Err(Error::Behind { .. } | Error::OffScreen) => FgFeature::ABSENT,
        Err(e) => return Err(e),
    };
    let mut bg = match prev {
        None => BgFeature::zeros(),
        Some(p) => render_motion_field(p, &f.camera, k, cloud)?,
    };
    if !noise.is_none() {
        if fg.is_visible() {
            let pos = gauss(noise.fg_position);
            let sc = gauss(noise.fg_scale);
            fg.cx += pos.sample(rng);
            fg.cy += pos.sample(rng);
            let m = 1.0 + sc.sample(rng);
            fg.w *= m;
            fg.h = (fg.h * m).min(1.0);
            fg.orientation = wrap_angle(fg.orientation + gauss(noise.fg_orientation).sample(rng));
        }
        let g = gauss(noise.bg);
        for (c, v) in bg.values.iter_mut().enumerate() {
            if bg.mask >> (c / 2) & 1 == 1 {
                *v += g.sample(rng);
            }
        }
    }
    Ok(FrameFeature { fg, bg })
}

/// Features and labels for a trajectory, with a background scattered from the
/// video seed.
pub fn render_video(
    frames: &[FrameSample],
    k: &Intrinsics,
    noise: &NoiseLevels,
    seed: u64,
) -> Result<(Vec<FrameFeature>, Vec<Action>)> {
    let cloud = background_for(frames, seed);
    let feats = render_features(frames, k, &cloud, noise, seed)?;
    Ok((feats, action_labels(frames, k)))
}

pub fn background_for(frames: &[FrameSample], seed: u64) -> PointCloud {
    let cams: Vec<_> = frames.iter().map(|f| f.camera.pos()).collect();
    PointCloud::scatter(&cams, &mut stream_rng(seed, STREAM_BACKGROUND))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_style_trajectory, SamplerRanges, ShotScript};
    use crate::style::StyleLabel;
    use imfilm_nn::seeded_rng;

    #[test]
    fn labels_are_self_consistent() {
        let k = Intrinsics::default();
        for (i, style) in StyleLabel::ALL.into_iter().enumerate() {
            let mut rng = seeded_rng(i as u64);
            let s = ShotScript::sample(style, &SamplerRanges::default(), 40 + i as u64, &mut rng);
            let frames = generate_style_trajectory(&s).unwrap();
            let acts = action_labels(&frames, &k);
            assert_eq!(acts.len(), frames.len() - 1);
            for (a, w) in acts.iter().zip(frames.windows(2)) {
                assert!(a.is_valid());
                let o = a.integrate(&w[0].camera.orientation, DT);
                let d = o.delta(&w[1].camera.orientation);
                assert!(d.iter().all(|v| v.abs() <= 1e-6), "{style}: {d:?}");
                let step = w[1].camera.pos() - w[0].camera.pos();
                assert!((a.dir_vec() - step / step.norm()).amax() <= 1e-9);
            }
        }
    }

    #[test]
    fn subject_mostly_visible() {
        let k = Intrinsics::default();
        let mut rng = seeded_rng(77);
        for i in 0..40 {
            let style = StyleLabel::ALL[i % 5];
            let s = ShotScript::sample(style, &SamplerRanges::default(), i as u64, &mut rng);
            let frames = generate_style_trajectory(&s).unwrap();
            let cloud = background_for(&frames, s.seed);
            let feats = render_features(&frames, &k, &cloud, &NoiseLevels::NONE, s.seed).unwrap();
            let vis = feats.iter().filter(|f| f.fg.is_visible()).count();
            assert!(vis as f64 >= 0.9 * feats.len() as f64, "{style}: {vis}/{}", feats.len());
            let covered = feats[1..].iter().filter(|f| f.bg.valid_count() >= 32).count();
            assert_eq!(covered, feats.len() - 1, "{style}: background coverage");
        }
    }

    #[test]
    fn mirrored_script_renders_flipped_features() {
        let k = Intrinsics::default();
        for (i, style) in StyleLabel::ALL.into_iter().enumerate() {
            let mut rng = seeded_rng(100 + i as u64);
            let mut s = ShotScript::sample(style, &SamplerRanges::default(), 7, &mut rng);
            s.jitter = crate::scene::AimJitter::NONE;
            let a = generate_style_trajectory(&s).unwrap();
            let b = generate_style_trajectory(&s.mirrored()).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x.camera.mirrored().pos() - y.camera.pos()).amax() < 1e-9);
            }
            let cloud = background_for(&a, 3);
            let mirrored = PointCloud {
                points: cloud
                    .points
                    .iter()
                    .map(|p| crate::geometry::Vec3::new(p.x, -p.y, p.z))
                    .collect(),
            };
            let fa = render_features(&a, &k, &cloud, &NoiseLevels::NONE, 3).unwrap();
            let fb = render_features(&b, &k, &mirrored, &NoiseLevels::NONE, 3).unwrap();
            for (x, y) in fa.iter().zip(&fb) {
                let fx = x.flipped();
                let d: f64 = fx
                    .fg
                    .as_array()
                    .iter()
                    .zip(y.fg.as_array())
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0, f64::max);
                assert!(d < 1e-9, "{style}: fg {d}");
                let (vx, vy) = (&fx.bg.values, &y.bg.values);
                let worst = vx.iter().zip(vy).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                assert!(worst < 1e-9, "{style}: bg {worst}");
            }
            let la = action_labels(&a, &k);
            let lb = action_labels(&b, &k);
            for (x, y) in la.iter().zip(&lb) {
                let m = x.mirrored().to_vec();
                assert!(m.iter().zip(y.to_vec()).all(|(p, q)| (p - q).abs() < 1e-9));
            }
        }
    }
}
