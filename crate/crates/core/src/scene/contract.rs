//! Geometric predicates that define each basic style.
//!
//! The same checks run on generated trajectories (tight tolerances) and on
//! closed-loop recaptures (loose tolerances).

use serde::{Deserialize, Serialize};

use super::FrameSample;
use crate::geometry::{subject_center, wrap_angle, Vec3};
use crate::style::StyleLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractTolerance {
    /// Largest per-frame orientation change of a fly-through, radians.
    pub rotation: f64,
    /// Largest deviation from the best straight line, relative to path length.
    pub straightness: f64,
    /// Largest closest-approach distance of a fly-through, metres.
    pub near_miss: f64,
    /// Largest angle between the optical axis and the subject, radians.
    pub aim: f64,
    /// Fraction of frames allowed to violate the aim bound.
    pub aim_outliers: f64,
    /// Follow: RMS displacement deviation over mean distance. Orbit: distance
    /// standard deviation over mean distance.
    pub relative_spread: f64,
    /// Fraction of bearing steps that may go against the orbit direction, and
    /// of frames where a super-dolly camera may fall behind the subject.
    pub reversals: f64,
}

impl ContractTolerance {
    pub fn generator() -> Self {
        Self {
            rotation: 0.0,
            straightness: 1e-9,
            near_miss: 6.0,
            aim: 0.2,
            aim_outliers: 0.0,
            relative_spread: 1e-9,
            reversals: 0.0,
        }
    }

    pub fn recapture() -> Self {
        Self {
            rotation: 0.05,
            straightness: 0.1,
            near_miss: 10.0,
            aim: 0.45,
            aim_outliers: 0.1,
            relative_spread: 0.1,
            reversals: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractReport {
    pub style: StyleLabel,
    pub violations: Vec<String>,
}

impl ContractReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn straightness(points: &[Vec3]) -> f64 {
    let (a, b) = (points[0], points[points.len() - 1]);
    let len = (b - a).norm();
    if len < 1e-9 {
        return 0.0;
    }
    let u = (b - a) / len;
    let worst = points
        .iter()
        .map(|p| {
            let d = p - a;
            (d - u * d.dot(&u)).norm()
        })
        .fold(0.0, f64::max);
    worst / len
}

fn aim_errors(frames: &[FrameSample]) -> Vec<f64> {
    frames
        .iter()
        .map(|f| {
            let to = subject_center(&f.subject, f.subject_height) - f.camera.pos();
            let fwd = f.camera.orientation.forward();
            (fwd.dot(&to) / to.norm()).clamp(-1.0, 1.0).acos()
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Checks `frames` against the contract of `style`.
pub fn check_contract(style: StyleLabel, frames: &[FrameSample], tol: &ContractTolerance) -> ContractReport {
    let mut violations = Vec::new();
    if frames.len() < 2 {
        violations.push("fewer than two frames".to_string());
        return ContractReport { style, violations };
    }
    let cams: Vec<Vec3> = frames.iter().map(|f| f.camera.pos()).collect();
    let rel: Vec<Vec3> = frames.iter().map(|f| f.camera.pos() - f.subject.pos()).collect();

    let check_aim = |violations: &mut Vec<String>| {
        let errs = aim_errors(frames);
        let bad = errs.iter().filter(|e| **e > tol.aim).count();
        if bad as f64 > tol.aim_outliers * frames.len() as f64 {
            let worst = errs.iter().cloned().fold(0.0, f64::max);
            violations.push(format!(
                "camera not aimed at subject on {bad}/{} frames (worst {worst:.3} rad)",
                frames.len()
            ));
        }
    };
    let check_straight = |violations: &mut Vec<String>| {
        let s = straightness(&cams);
        if s > tol.straightness {
            violations.push(format!("path not straight (relative deviation {s:.3e})"));
        }
    };

    match style {
        StyleLabel::FlyThrough => {
            let rot = frames
                .windows(2)
                .flat_map(|w| w[1].camera.orientation.delta(&w[0].camera.orientation))
                .map(f64::abs)
                .fold(0.0, f64::max);
            if rot > tol.rotation {
                violations.push(format!("camera rotates ({rot:.3e} rad per frame)"));
            }
            check_straight(&mut violations);
            let miss = frames
                .iter()
                .map(|f| (f.camera.pos() - subject_center(&f.subject, f.subject_height)).norm())
                .fold(f64::INFINITY, f64::min);
            if miss > tol.near_miss {
                violations.push(format!("closest approach {miss:.2} m"));
            }
        }
        StyleLabel::FlyBy => {
            check_straight(&mut violations);
            check_aim(&mut violations);
        }
        StyleLabel::Follow => {
            let n = rel.len() as f64;
            let m = rel.iter().sum::<Vec3>() / n;
            let rms = (rel.iter().map(|d| (d - m).norm_squared()).sum::<f64>() / n).sqrt();
            let dist = mean(&rel.iter().map(|d| d.norm()).collect::<Vec<_>>());
            if rms > tol.relative_spread * dist {
                violations.push(format!(
                    "displacement varies (rms {rms:.3e} m, mean distance {dist:.2} m)"
                ));
            }
            check_aim(&mut violations);
        }
        StyleLabel::Orbiting => {
            let d: Vec<f64> = rel.iter().map(|r| r.norm()).collect();
            let m = mean(&d);
            let sd = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
            if sd > tol.relative_spread * m {
                violations.push(format!("distance varies (std {sd:.3e} m, mean {m:.2} m)"));
            }
            let steps: Vec<f64> = rel
                .windows(2)
                .map(|w| wrap_angle(w[1].y.atan2(w[1].x) - w[0].y.atan2(w[0].x)))
                .collect();
            let net: f64 = steps.iter().sum();
            let against = steps.iter().filter(|s| **s * net <= 0.0).count();
            if against as f64 > tol.reversals * steps.len() as f64 {
                violations.push(format!(
                    "bearing not monotone ({against}/{} steps reversed)",
                    steps.len()
                ));
            }
            check_aim(&mut violations);
        }
        StyleLabel::SuperDolly => {
            let behind = frames
                .iter()
                .zip(&rel)
                .filter(|(f, r)| {
                    let h = f.subject.orientation.yaw;
                    r.x * h.cos() + r.y * h.sin() <= 0.0
                })
                .count();
            let backward = frames
                .windows(2)
                .filter(|w| {
                    let h = w[0].subject.orientation.yaw;
                    let v = w[1].camera.pos() - w[0].camera.pos();
                    v.x * h.cos() + v.y * h.sin() <= 0.0
                })
                .count();
            if behind as f64 > tol.reversals * frames.len() as f64 {
                violations.push(format!("camera not ahead of subject on {behind} frames"));
            }
            if backward as f64 > tol.reversals * (frames.len() - 1) as f64 {
                violations.push(format!("camera not retreating on {backward} steps"));
            }
            check_aim(&mut violations);
        }
    }
    ContractReport { style, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{generate_style_trajectory, SamplerRanges, ShotScript};
    use imfilm_nn::seeded_rng;

    #[test]
    fn generated_shots_pass_their_contract() {
        let mut rng = seeded_rng(21);
        for i in 0..100 {
            let style = StyleLabel::ALL[i % 5];
            let s = ShotScript::sample(style, &SamplerRanges::default(), i as u64, &mut rng);
            let f = generate_style_trajectory(&s).unwrap();
            let r = check_contract(style, &f, &ContractTolerance::generator());
            assert!(r.passed(), "{style}: {:?}", r.violations);
        }
    }

    #[test]
    fn styles_fail_each_others_contracts() {
        let mut rng = seeded_rng(22);
        let orbit = ShotScript::sample(StyleLabel::Orbiting, &SamplerRanges::default(), 1, &mut rng);
        let f = generate_style_trajectory(&orbit).unwrap();
        for other in [StyleLabel::Follow, StyleLabel::FlyThrough, StyleLabel::FlyBy] {
            assert!(
                !check_contract(other, &f, &ContractTolerance::recapture()).passed(),
                "{other}"
            );
        }
    }
}
