//! Shot descriptions and their randomization.
//!
//! Documented parameter ranges (validated by [`ShotScript::validate`]):
//!
//! | parameter                         | range          |
//! |-----------------------------------|----------------|
//! | duration                          | 5 – 50 s       |
//! | camera altitude                   | 2 – 10 m       |
//! | follow / orbit / dolly distance   | 4 – 15 m       |
//! | subject speed                     | 0 – 8 m/s      |
//! | relative camera speed (fly-*)     | 1 – 8 m/s      |
//! | fly-through lateral miss          | 0 – 3 m        |
//! | fly-by lateral offset             | 4 – 15 m       |
//! | orbit bearing rate                | 0.05 – 1.5 rad/s |
//!
//! The sampler draws from narrower sub-ranges chosen so the subject stays on
//! screen for at least 90% of the frames.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::style::StyleLabel;

pub const FPS: f64 = 4.0;
pub const DT: f64 = 1.0 / FPS;
pub const DEFAULT_SUBJECT_HEIGHT: f64 = 1.7;

/// Piecewise-linear ground path walked at constant speed. Past the last
/// waypoint the subject keeps going along the final segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMotion {
    pub waypoints: Vec<[f64; 2]>,
    pub speed: f64,
    pub height: f64,
    /// Facing direction when the path is degenerate or the speed is zero.
    pub idle_yaw: f64,
}

impl SubjectMotion {
    pub fn stationary(at: [f64; 2], yaw: f64, height: f64) -> Self {
        Self {
            waypoints: vec![at],
            speed: 0.0,
            height,
            idle_yaw: yaw,
        }
    }

    pub fn straight(start: [f64; 2], heading: f64, speed: f64, height: f64) -> Self {
        Self {
            waypoints: vec![start, [start[0] + heading.cos(), start[1] + heading.sin()]],
            speed,
            height,
            idle_yaw: heading,
        }
    }

    /// Ground position and heading at time `t`.
    pub fn state_at(&self, t: f64) -> ([f64; 2], f64) {
        let w = &self.waypoints;
        if w.len() < 2 || self.speed == 0.0 {
            return (w[0], self.idle_yaw);
        }
        let mut remaining = self.speed * t;
        for (i, seg) in w.windows(2).enumerate() {
            let (dx, dy) = (seg[1][0] - seg[0][0], seg[1][1] - seg[0][1]);
            let len = (dx * dx + dy * dy).sqrt();
            let last = i + 2 == w.len();
            if remaining <= len || last {
                let f = remaining / len;
                return ([seg[0][0] + f * dx, seg[0][1] + f * dy], dy.atan2(dx));
            }
            remaining -= len;
        }
        unreachable!("loop returns on the last segment")
    }

    /// Ground velocity at time `t`.
    pub fn velocity_at(&self, t: f64) -> [f64; 2] {
        let (_, heading) = self.state_at(t);
        if self.waypoints.len() < 2 || self.speed == 0.0 {
            [0.0, 0.0]
        } else {
            [self.speed * heading.cos(), self.speed * heading.sin()]
        }
    }

    /// True when the path has a single segment (constant velocity).
    pub fn is_straight(&self) -> bool {
        self.waypoints.len() <= 2
    }

    pub fn mirrored(&self) -> Self {
        Self {
            waypoints: self.waypoints.iter().map(|p| [p[0], -p[1]]).collect(),
            speed: self.speed,
            height: self.height,
            idle_yaw: -self.idle_yaw,
        }
    }
}

/// Style-specific geometry. Angles in radians, distances in metres, times in
/// seconds from the start of the shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StyleParams {
    /// Straight pass with a fixed orientation along the direction of travel
    /// relative to the subject.
    FlyThrough {
        altitude: f64,
        lateral: f64,
        relative_speed: f64,
        /// Time of closest approach.
        pass_time: f64,
        /// Heading of travel relative to the subject.
        track: f64,
        pitch: f64,
    },
    /// Straight pass with the camera re-aimed at the subject every frame.
    FlyBy {
        altitude: f64,
        /// Signed horizontal miss distance (positive: subject on the right).
        lateral: f64,
        relative_speed: f64,
        pass_time: f64,
        track: f64,
    },
    /// Constant world-frame displacement from the subject.
    Follow {
        distance: f64,
        altitude: f64,
        /// Bearing of the camera as seen from the subject.
        bearing: f64,
    },
    /// Constant distance, bearing advancing at `rate`.
    Orbiting {
        distance: f64,
        altitude: f64,
        rate: f64,
        start_bearing: f64,
    },
    /// Camera ahead of the subject, facing back at it.
    SuperDolly {
        distance: f64,
        altitude: f64,
        /// Offset of the camera bearing from the subject heading.
        lateral_angle: f64,
    },
}

impl StyleParams {
    pub fn style(&self) -> StyleLabel {
        match self {
            StyleParams::FlyThrough { .. } => StyleLabel::FlyThrough,
            StyleParams::FlyBy { .. } => StyleLabel::FlyBy,
            StyleParams::Follow { .. } => StyleLabel::Follow,
            StyleParams::Orbiting { .. } => StyleLabel::Orbiting,
            StyleParams::SuperDolly { .. } => StyleLabel::SuperDolly,
        }
    }

    pub fn mirrored(&self) -> Self {
        match *self {
            StyleParams::FlyThrough {
                altitude,
                lateral,
                relative_speed,
                pass_time,
                track,
                pitch,
            } => StyleParams::FlyThrough {
                altitude,
                lateral: -lateral,
                relative_speed,
                pass_time,
                track: -track,
                pitch,
            },
            StyleParams::FlyBy {
                altitude,
                lateral,
                relative_speed,
                pass_time,
                track,
            } => StyleParams::FlyBy {
                altitude,
                lateral: -lateral,
                relative_speed,
                pass_time,
                track: -track,
            },
            StyleParams::Follow {
                distance,
                altitude,
                bearing,
            } => StyleParams::Follow {
                distance,
                altitude,
                bearing: -bearing,
            },
            StyleParams::Orbiting {
                distance,
                altitude,
                rate,
                start_bearing,
            } => StyleParams::Orbiting {
                distance,
                altitude,
                rate: -rate,
                start_bearing: -start_bearing,
            },
            StyleParams::SuperDolly {
                distance,
                altitude,
                lateral_angle,
            } => StyleParams::SuperDolly {
                distance,
                altitude,
                lateral_angle: -lateral_angle,
            },
        }
    }
}

/// Slowly varying aiming error of a human operator: an AR(1) process per
/// axis (yaw, pitch), clamped to three standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AimJitter {
    pub std: f64,
    pub rho: f64,
}

impl AimJitter {
    pub const NONE: AimJitter = AimJitter { std: 0.0, rho: 0.0 };

    pub fn bound(&self) -> f64 {
        3.0 * self.std
    }
}

impl Default for AimJitter {
    fn default() -> Self {
        Self { std: 0.02, rho: 0.75 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotScript {
    pub style: StyleLabel,
    pub duration: f64,
    pub params: StyleParams,
    pub subject: SubjectMotion,
    pub jitter: AimJitter,
    pub seed: u64,
}

/// Ranges used by [`ShotScript::sample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerRanges {
    pub duration: (f64, f64),
    pub jitter: AimJitter,
}

impl Default for SamplerRanges {
    fn default() -> Self {
        Self {
            duration: (10.0, 30.0),
            jitter: AimJitter::default(),
        }
    }
}

fn in_range(name: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if v.is_finite() && v >= lo - 1e-12 && v <= hi + 1e-12 {
        Ok(())
    } else {
        Err(Error::Generator(format!("{name} = {v} outside [{lo}, {hi}]")))
    }
}

fn turning_path<R: Rng>(rng: &mut R, heading: f64, max_turn: f64, total: f64) -> Vec<[f64; 2]> {
    let mut pts = vec![[0.0, 0.0]];
    let mut h = heading;
    let mut covered = 0.0;
    while covered < total {
        let len = rng.random_range(20.0..40.0);
        let last = *pts.last().unwrap();
        pts.push([last[0] + len * h.cos(), last[1] + len * h.sin()]);
        covered += len;
        h += rng.random_range(-max_turn..=max_turn);
    }
    pts
}

impl ShotScript {
    pub fn frame_count(&self) -> usize {
        (self.duration * FPS + 1e-9).floor() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        in_range("duration", self.duration, 5.0, 50.0)?;
        if self.params.style() != self.style {
            return Err(Error::Generator(format!(
                "parameters describe {} but the script is labelled {}",
                self.params.style(),
                self.style
            )));
        }
        in_range("subject speed", self.subject.speed, 0.0, 8.0)?;
        in_range("subject height", self.subject.height, 0.5, 2.5)?;
        if self.subject.waypoints.is_empty() {
            return Err(Error::Generator("subject path has no waypoints".into()));
        }
        in_range("jitter std", self.jitter.std, 0.0, 0.1)?;
        in_range("jitter rho", self.jitter.rho, 0.0, 0.999)?;
        match self.params {
            StyleParams::FlyThrough {
                altitude,
                lateral,
                relative_speed,
                pass_time,
                pitch,
                ..
            } => {
                in_range("altitude", altitude, 2.0, 10.0)?;
                in_range("lateral miss", lateral.abs(), 0.0, 3.0)?;
                in_range("relative speed", relative_speed, 1.0, 8.0)?;
                in_range("pass time", pass_time, 0.0, self.duration * 1.2)?;
                in_range("pitch", pitch, -0.8, 0.2)?;
                if !self.subject.is_straight() {
                    return Err(Error::Generator("fly-through needs a straight subject path".into()));
                }
            }
            StyleParams::FlyBy {
                altitude,
                lateral,
                relative_speed,
                pass_time,
                ..
            } => {
                in_range("altitude", altitude, 2.0, 10.0)?;
                in_range("lateral offset", lateral.abs(), 4.0, 15.0)?;
                in_range("relative speed", relative_speed, 1.0, 8.0)?;
                in_range("pass time", pass_time, 0.0, self.duration)?;
                if !self.subject.is_straight() {
                    return Err(Error::Generator("fly-by needs a straight subject path".into()));
                }
            }
            StyleParams::Follow { distance, altitude, .. } => {
                in_range("distance", distance, 4.0, 15.0)?;
                in_range("altitude", altitude, 2.0, 10.0f64.min(distance - 0.5))?;
            }
            StyleParams::Orbiting {
                distance,
                altitude,
                rate,
                ..
            } => {
                in_range("distance", distance, 4.0, 15.0)?;
                in_range("altitude", altitude, 2.0, 10.0f64.min(distance - 0.5))?;
                in_range("orbit rate", rate.abs(), 0.05, 1.5)?;
            }
            StyleParams::SuperDolly {
                distance,
                altitude,
                lateral_angle,
            } => {
                in_range("distance", distance, 4.0, 15.0)?;
                in_range("altitude", altitude, 2.0, 10.0f64.min(distance - 0.5))?;
                in_range("lateral angle", lateral_angle.abs(), 0.0, 0.6)?;
                if !self.subject.is_straight() {
                    return Err(Error::Generator("super-dolly needs a straight subject path".into()));
                }
            }
        }
        Ok(())
    }

    /// Draws a random shot of the given style.
    pub fn sample<R: Rng>(style: StyleLabel, ranges: &SamplerRanges, seed: u64, rng: &mut R) -> Self {
        let duration = rng.random_range(ranges.duration.0..=ranges.duration.1);
        let h = DEFAULT_SUBJECT_HEIGHT;
        let heading = rng.random_range(-PI..PI);
        let (params, subject) = match style {
            StyleLabel::FlyThrough => {
                let altitude = rng.random_range(2.0..3.0);
                let lateral = rng.random_range(-1.5..1.5);
                let pass_time = duration - rng.random_range(0.0..0.75);
                let relative_speed = rng.random_range(3.0..7.0);
                let start_dist = relative_speed * pass_time;
                // Tilted a little below the initial line of sight so the
                // subject stays in frame until shortly before the pass.
                let pitch = -((altitude - 0.5 * h) / start_dist).atan() - rng.random_range(0.1..0.22);
                let track = rng.random_range(-PI..PI);
                let speed = if rng.random_bool(0.3) {
                    0.0
                } else {
                    rng.random_range(0.3..1.5)
                };
                (
                    StyleParams::FlyThrough {
                        altitude,
                        lateral,
                        relative_speed,
                        pass_time,
                        track,
                        pitch,
                    },
                    SubjectMotion::straight([0.0, 0.0], heading, speed, h),
                )
            }
            StyleLabel::FlyBy => {
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let speed = if rng.random_bool(0.3) {
                    0.0
                } else {
                    rng.random_range(0.3..1.0)
                };
                (
                    StyleParams::FlyBy {
                        altitude: rng.random_range(2.0..8.0),
                        lateral: side * rng.random_range(5.0..12.0),
                        relative_speed: rng.random_range(2.0..5.0),
                        pass_time: rng.random_range(0.35..0.65) * duration,
                        track: rng.random_range(-PI..PI),
                    },
                    SubjectMotion::straight([0.0, 0.0], heading, speed, h),
                )
            }
            StyleLabel::Follow => {
                let distance: f64 = rng.random_range(5.0..14.0);
                let altitude = rng.random_range(2.0..(0.8 * distance).min(8.0));
                let speed = rng.random_range(1.5..6.0);
                let total = speed * duration + 10.0;
                (
                    StyleParams::Follow {
                        distance,
                        altitude,
                        bearing: heading + PI + rng.random_range(-0.9..0.9),
                    },
                    SubjectMotion {
                        waypoints: turning_path(rng, heading, 0.5, total),
                        speed,
                        height: h,
                        idle_yaw: heading,
                    },
                )
            }
            StyleLabel::Orbiting => {
                let distance: f64 = rng.random_range(5.0..14.0);
                let altitude: f64 = rng.random_range(2.0..(0.7 * distance).min(8.0));
                let radius_h = (distance * distance - altitude * altitude).sqrt();
                let tangential = rng.random_range(1.5..6.0);
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let rate = sign * (tangential / radius_h).clamp(0.05, 1.5);
                let speed = if rng.random_bool(0.4) {
                    0.0
                } else {
                    rng.random_range(0.3..1.5)
                };
                let total = speed * duration + 10.0;
                (
                    StyleParams::Orbiting {
                        distance,
                        altitude,
                        rate,
                        start_bearing: rng.random_range(-PI..PI),
                    },
                    SubjectMotion {
                        waypoints: turning_path(rng, heading, 0.6, total),
                        speed,
                        height: h,
                        idle_yaw: heading,
                    },
                )
            }
            StyleLabel::SuperDolly => {
                let distance: f64 = rng.random_range(5.0..14.0);
                (
                    StyleParams::SuperDolly {
                        distance,
                        altitude: rng.random_range(2.0..(0.8 * distance).min(8.0)),
                        lateral_angle: rng.random_range(-0.35..0.35),
                    },
                    SubjectMotion::straight([0.0, 0.0], heading, rng.random_range(1.5..6.0), h),
                )
            }
        };
        let jitter = if style.is_aimed() {
            ranges.jitter
        } else {
            AimJitter::NONE
        };
        ShotScript {
            style,
            duration,
            params,
            subject,
            jitter,
            seed,
        }
    }

    pub fn mirrored(&self) -> Self {
        Self {
            params: self.params.mirrored(),
            subject: self.subject.mirrored(),
            ..self.clone()
        }
    }
}
