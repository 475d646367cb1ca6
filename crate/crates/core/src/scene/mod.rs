//! Synthetic cinematography world.
//!
//! A [`ShotScript`] describes one shot; [`generate_style_trajectory`] turns it
//! into camera and subject poses sampled at 4 fps, and [`render`] produces the
//! foreground/background observations and action labels a real pipeline would
//! extract from video.

pub mod background;
pub mod contract;
pub mod dataset;
pub mod render;
pub mod script;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{aim_at, subject_center, Orientation, Pose6D, Vec3};

pub use background::{render_motion_field, BgFeature, PointCloud, GRID};
pub use contract::{check_contract, ContractReport, ContractTolerance};
pub use dataset::{make_dataset, read_video, save_video, CorpusSpec, Dataset, Split, VideoMeta, VideoRecord};
pub use render::{noise_rng, observe_frame, render_features, render_video, FrameFeature, NoiseLevels};
pub use script::{AimJitter, SamplerRanges, ShotScript, StyleParams, SubjectMotion, DT, FPS};

/// Camera and subject state at one 4 fps sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameSample {
    pub t: f64,
    pub camera: Pose6D,
    pub subject: Pose6D,
    pub subject_height: f64,
}

/// Stream ids for the per-video random generators.
pub(crate) const STREAM_JITTER: u64 = 1;
pub(crate) const STREAM_BACKGROUND: u64 = 2;
pub(crate) const STREAM_NOISE: u64 = 3;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn jitter_series(script: &ShotScript, n: usize) -> Vec<[f64; 2]> {
    let j = script.jitter;
    if j.std == 0.0 {
        return vec![[0.0; 2]; n];
    }
    let mut rng = stream_rng(script.seed, STREAM_JITTER);
    let innov = (1.0 - j.rho * j.rho).sqrt() * j.std;
    let bound = j.bound();
    let mut e = [0.0f64; 2];
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        for v in e.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = if k == 0 { j.std * z } else { j.rho * *v + innov * z };
            *v = v.clamp(-bound, bound);
        }
        out.push(e);
    }
    out
}

fn horizontal(angle: f64, len: f64) -> Vec3 {
    Vec3::new(len * angle.cos(), len * angle.sin(), 0.0)
}

/// Camera position relative to the subject's ground position for the straight
/// pass styles.
fn pass_offset(altitude: f64, lateral: f64, speed: f64, pass_time: f64, track: f64, t: f64) -> Vec3 {
    // Positive lateral puts the subject on the camera's right.
    let normal = horizontal(track + std::f64::consts::FRAC_PI_2, 1.0);
    horizontal(track, speed * (t - pass_time)) + normal * lateral + Vec3::new(0.0, 0.0, altitude)
}

/// Samples the shot at `t = k * DT`, `k = 0..=floor(duration * 4)`.
pub fn generate_style_trajectory(script: &ShotScript) -> Result<Vec<FrameSample>> {
    script.validate()?;
    let n = script.frame_count();
    let jitter = jitter_series(script, n);
    let h = script.subject.height;
    let mut out = Vec::with_capacity(n);
    for (k, e) in jitter.iter().enumerate() {
        let t = k as f64 * DT;
        let (g, heading) = script.subject.state_at(t);
        let subject = Pose6D::new(Vec3::new(g[0], g[1], 0.0), Orientation::new(0.0, heading, 0.0));
        let s = subject.pos();
        let (cam_pos, fixed) = match script.params {
            StyleParams::FlyThrough {
                altitude,
                lateral,
                relative_speed,
                pass_time,
                track,
                pitch,
            } => (
                s + pass_offset(altitude, lateral, relative_speed, pass_time, track, t),
                Some(Orientation::new(0.0, track, pitch)),
            ),
            StyleParams::FlyBy {
                altitude,
                lateral,
                relative_speed,
                pass_time,
                track,
            } => (
                s + pass_offset(altitude, lateral, relative_speed, pass_time, track, t),
                None,
            ),
            StyleParams::Follow {
                distance,
                altitude,
                bearing,
            } => {
                let rh = (distance * distance - altitude * altitude).sqrt();
                (s + horizontal(bearing, rh) + Vec3::new(0.0, 0.0, altitude), None)
            }
            StyleParams::Orbiting {
                distance,
                altitude,
                rate,
                start_bearing,
            } => {
                let rh = (distance * distance - altitude * altitude).sqrt();
                let bearing = start_bearing + rate * t;
                (s + horizontal(bearing, rh) + Vec3::new(0.0, 0.0, altitude), None)
            }
            StyleParams::SuperDolly {
                distance,
                altitude,
                lateral_angle,
            } => {
                let rh = (distance * distance - altitude * altitude).sqrt();
                (
                    s + horizontal(heading + lateral_angle, rh) + Vec3::new(0.0, 0.0, altitude),
                    None,
                )
            }
        };
        let orientation = fixed.unwrap_or_else(|| {
            let aim = aim_at(&cam_pos, &subject_center(&subject, h));
            Orientation::new(0.0, aim.yaw + e[0], aim.pitch + e[1])
        });
        out.push(FrameSample {
            t,
            camera: Pose6D::new(cam_pos, orientation),
            subject,
            subject_height: h,
        });
    }
    Ok(out)
}
