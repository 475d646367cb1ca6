//! Poses, the pinhole camera, and the subject's on-screen footprint.
//!
//! World frame: `x`, `y` horizontal, `z` up. A camera's body frame is
//! forward/left/up; orientation is applied as roll about forward, then pitch
//! (positive tilts the optical axis up), then yaw about world `z`. Image
//! coordinates have `u` to the right and `v` down.
//!
//! The subject is a vertical segment of known height standing on its pose
//! position. Its box is the projection of a camera-facing billboard centred at
//! mid-height: box height is `focal * height / depth` pixels, with `depth`
//! measured along the optical axis, and box width is a fixed fraction of that.
//! This makes box-to-position localization an exact inverse.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Box width over box height for the subject body model.
pub const BODY_ASPECT: f64 = 0.35;
/// Points closer than this along the optical axis are not projected.
pub const MIN_DEPTH: f64 = 0.05;

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    pub roll: f64,
    pub yaw: f64,
    pub pitch: f64,
}

impl Orientation {
    pub fn new(roll: f64, yaw: f64, pitch: f64) -> Self {
        Self {
            roll: wrap_angle(roll),
            yaw: wrap_angle(yaw),
            pitch: wrap_angle(pitch),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.roll, self.yaw, self.pitch]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Componentwise wrapped difference `self - other`.
    pub fn delta(&self, other: &Orientation) -> [f64; 3] {
        [
            wrap_angle(self.roll - other.roll),
            wrap_angle(self.yaw - other.yaw),
            wrap_angle(self.pitch - other.pitch),
        ]
    }

    /// Body-to-world rotation.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (sr, cr) = self.roll.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
        // Rotation about the body y (left) axis by -pitch.
        let ry = Matrix3::new(cp, 0.0, -sp, 0.0, 1.0, 0.0, sp, 0.0, cp);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
        rz * ry * rx
    }

    /// Unit optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        Vec3::new(cy * cp, sy * cp, sp)
    }

    /// Orientation looking along `dir` with zero roll.
    pub fn looking_along(dir: &Vec3) -> Self {
        let yaw = dir.y.atan2(dir.x);
        let pitch = dir.z.atan2((dir.x * dir.x + dir.y * dir.y).sqrt());
        Self::new(0.0, yaw, pitch)
    }
}

/// World-frame position and orientation of the camera or the subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose6D {
    pub position: [f64; 3],
    pub orientation: Orientation,
}

impl Pose6D {
    pub fn new(position: Vec3, orientation: Orientation) -> Self {
        Self {
            position: [position.x, position.y, position.z],
            orientation,
        }
    }

    pub fn pos(&self) -> Vec3 {
        Vec3::new(self.position[0], self.position[1], self.position[2])
    }

    /// Mirror through the world `x-z` plane (`y -> -y`), the world-side
    /// counterpart of flipping the image horizontally.
    pub fn mirrored(&self) -> Self {
        let o = self.orientation;
        Self {
            position: [self.position[0], -self.position[1], self.position[2]],
            orientation: Orientation::new(-o.roll, -o.yaw, o.pitch),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite()) && self.orientation.as_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub focal: f64,
    pub width: f64,
    pub height: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self {
            focal: 600.0,
            width: 640.0,
            height: 480.0,
            cx: 320.0,
            cy: 240.0,
        }
    }
}

impl Intrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.focal > 0.0
            && self.width > 0.0
            && self.height > 0.0
            && (0.0..self.width).contains(&self.cx)
            && (0.0..self.height).contains(&self.cy);
        if ok {
            Ok(())
        } else {
            Err(Error::Argument(format!("invalid intrinsics {self:?}")))
        }
    }

    pub fn in_image(&self, u: f64, v: f64) -> bool {
        (0.0..self.width).contains(&u) && (0.0..self.height).contains(&v)
    }
}

/// A camera: pose plus intrinsics, with the world-to-body rotation cached.
#[derive(Debug, Clone)]
pub struct Camera {
    pub pose: Pose6D,
    pub k: Intrinsics,
    center: Vec3,
    world_to_body: Matrix3<f64>,
}

impl Camera {
    pub fn new(pose: Pose6D, k: Intrinsics) -> Self {
        Self {
            pose,
            k,
            center: pose.pos(),
            world_to_body: pose.orientation.rotation().transpose(),
        }
    }

    /// Body-frame coordinates (forward, left, up) of a world point.
    pub fn to_body(&self, p: &Vec3) -> Vec3 {
        self.world_to_body * (p - self.center)
    }

    /// Pixel coordinates and depth of a world point, `None` when it is closer
    /// than [`MIN_DEPTH`] along the optical axis.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        let b = self.to_body(p);
        if b.x < MIN_DEPTH {
            return None;
        }
        Some((
            self.k.cx - self.k.focal * b.y / b.x,
            self.k.cy - self.k.focal * b.z / b.x,
            b.x,
        ))
    }

    /// World-frame ray direction (not normalized, unit forward component)
    /// through pixel `(u, v)`.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        let b = Vec3::new(1.0, -(u - self.k.cx) / self.k.focal, -(v - self.k.cy) / self.k.focal);
        self.world_to_body.transpose() * b
    }
}

/// On-screen subject observation: normalized box and relative body yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FgFeature {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    /// Subject yaw relative to the camera yaw, wrapped.
    pub orientation: f64,
}

impl FgFeature {
    /// Sentinel for frames where the subject is not visible.
    pub const ABSENT: FgFeature = FgFeature {
        cx: 0.0,
        cy: 0.0,
        w: 0.0,
        h: 0.0,
        orientation: 0.0,
    };

    pub fn is_visible(&self) -> bool {
        self.h > 0.0
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.cx, self.cy, self.w, self.h, self.orientation]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            cx: a[0],
            cy: a[1],
            w: a[2],
            h: a[3],
            orientation: a[4],
        }
    }

    /// Horizontal image flip about the principal point.
    pub fn flipped(&self) -> Self {
        if !self.is_visible() {
            return *self;
        }
        Self {
            cx: 1.0 - self.cx,
            orientation: wrap_angle(-self.orientation),
            ..*self
        }
    }
}

/// Mid-height point of the subject.
pub fn subject_center(subject: &Pose6D, height: f64) -> Vec3 {
    subject.pos() + Vec3::new(0.0, 0.0, 0.5 * height)
}

/// Normalized on-screen subject height at a given optical-axis depth.
pub fn scale_at_depth(k: &Intrinsics, height: f64, depth: f64) -> f64 {
    k.focal * height / (depth * k.height)
}

/// Projects the subject into the camera.
///
/// Errors when the subject centre is behind the camera or the whole box lies
/// outside the image. The reported box height saturates at 1.
pub fn project_foreground(cam: &Pose6D, k: &Intrinsics, subject: &Pose6D, subject_height: f64) -> Result<FgFeature> {
    if subject_height <= 0.0 {
        return Err(Error::Argument("subject height must be positive".into()));
    }
    let camera = Camera::new(*cam, *k);
    let b = camera.to_body(&subject_center(subject, subject_height));
    if b.x < MIN_DEPTH {
        return Err(Error::Behind { depth: b.x });
    }
    let u = k.cx - k.focal * b.y / b.x;
    let v = k.cy - k.focal * b.z / b.x;
    let h_px = k.focal * subject_height / b.x;
    let w_px = BODY_ASPECT * h_px;
    let outside = u + 0.5 * w_px < 0.0 || u - 0.5 * w_px > k.width || v + 0.5 * h_px < 0.0 || v - 0.5 * h_px > k.height;
    if outside {
        return Err(Error::OffScreen);
    }
    Ok(FgFeature {
        cx: u / k.width,
        cy: v / k.height,
        w: (w_px / k.width).min(BODY_ASPECT * k.height / k.width),
        h: (h_px / k.height).min(1.0),
        orientation: wrap_angle(subject.orientation.yaw - cam.orientation.yaw),
    })
}

/// Camera orientation aiming the optical axis at `target` from `from`.
pub fn aim_at(from: &Vec3, target: &Vec3) -> Orientation {
    Orientation::looking_along(&(target - from))
}

/// Zero-roll orientation at `from` that puts `target` at the normalized image
/// point `(cx, cy)`.
pub fn aim_with_framing(from: &Vec3, target: &Vec3, k: &Intrinsics, cx: f64, cy: f64) -> Orientation {
    let r = Vec3::new(k.focal, -(cx * k.width - k.cx), -(cy * k.height - k.cy)).normalize();
    let d = (target - from).normalize();
    // Pitch first: the vertical component is unchanged by the yaw rotation.
    let (a, b) = (r.x, r.z);
    let m = a.hypot(b);
    let pitch = (d.z / m).clamp(-1.0, 1.0).asin() - b.atan2(a);
    let (sp, cp) = pitch.sin_cos();
    let h = (cp * r.x - sp * r.z, r.y);
    let yaw = d.y.atan2(d.x) - h.1.atan2(h.0);
    Orientation::new(0.0, wrap_angle(yaw), pitch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(p: [f64; 3], roll: f64, yaw: f64, pitch: f64) -> Pose6D {
        Pose6D::new(Vec3::from(p), Orientation::new(roll, yaw, pitch))
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!(wrap_angle(1e-3) == 1e-3);
    }

    #[test]
    fn framing_aim_places_target() {
        let k = Intrinsics::default();
        let subject = Pose6D::new(Vec3::new(3.0, -2.0, 0.0), Orientation::new(0.0, 0.4, 0.0));
        let target = subject_center(&subject, 1.7);
        for (from, cx, cy) in [
            (Vec3::new(-8.0, 1.0, 6.0), 0.5, 0.5),
            (Vec3::new(-8.0, 1.0, 6.0), 0.2, 0.7),
            (Vec3::new(10.0, 9.0, 2.0), 0.85, 0.3),
            (Vec3::new(2.0, -12.0, 15.0), 0.6, 0.1),
        ] {
            let o = aim_with_framing(&from, &target, &k, cx, cy);
            let f = project_foreground(&Pose6D::new(from, o), &k, &subject, 1.7).unwrap();
            assert!(
                (f.cx - cx).abs() < 1e-9 && (f.cy - cy).abs() < 1e-9,
                "{cx} {cy} -> {} {}",
                f.cx,
                f.cy
            );
        }
    }

    #[test]
    fn forward_matches_rotation_first_column() {
        let o = Orientation::new(0.3, 1.1, -0.4);
        let r = o.rotation();
        let f = o.forward();
        for i in 0..3 {
            assert!((r[(i, 0)] - f[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn centered_subject_box_height() {
        // Camera at mid-height of the subject, 10 m away, looking straight at it.
        let cam = pose([0.0, 0.0, 0.85], 0.0, 0.0, 0.0);
        let subj = pose([10.0, 0.0, 0.0], 0.0, PI, 0.0);
        let fg = project_foreground(&cam, &Intrinsics::default(), &subj, 1.7).unwrap();
        assert!((fg.h - 0.2125).abs() < 1e-12);
        assert!((fg.cx - 0.5).abs() < 1e-12 && (fg.cy - 0.5).abs() < 1e-12);
        assert!((fg.orientation - PI).abs() < 1e-12);

        let near = pose([5.0, 0.0, 0.0], 0.0, PI, 0.0);
        let fg2 = project_foreground(&cam, &Intrinsics::default(), &near, 1.7).unwrap();
        assert!((fg2.h - 2.0 * fg.h).abs() < 1e-12);
    }

    #[test]
    fn behind_and_offscreen() {
        let cam = pose([0.0, 0.0, 1.0], 0.0, 0.0, 0.0);
        let behind = pose([-5.0, 0.0, 0.0], 0.0, 0.0, 0.0);
        assert!(matches!(
            project_foreground(&cam, &Intrinsics::default(), &behind, 1.7),
            Err(Error::Behind { .. })
        ));
        let side = pose([5.0, 30.0, 0.0], 0.0, 0.0, 0.0);
        assert!(matches!(
            project_foreground(&cam, &Intrinsics::default(), &side, 1.7),
            Err(Error::OffScreen)
        ));
    }

    #[test]
    fn mirrored_pose_flips_the_image() {
        let k = Intrinsics::default();
        let cam = pose([1.0, 2.0, 4.0], 0.05, 0.4, -0.2);
        let subj = pose([9.0, 5.0, 0.0], 0.0, 2.0, 0.0);
        let fg = project_foreground(&cam, &k, &subj, 1.7).unwrap();
        let fm = project_foreground(&cam.mirrored(), &k, &subj.mirrored(), 1.7).unwrap();
        let ff = fg.flipped();
        for (a, b) in fm.as_array().iter().zip(ff.as_array()) {
            assert!((a - b).abs() < 1e-12, "{fm:?} vs {ff:?}");
        }
    }

    #[test]
    fn ray_through_projection_hits_point() {
        let cam = Camera::new(pose([1.0, -2.0, 3.0], 0.1, -0.7, -0.3), Intrinsics::default());
        let p = Vec3::new(8.0, -9.0, 0.5);
        let (u, v, d) = cam.project(&p).unwrap();
        let q = cam.pose.pos() + cam.ray(u, v) * d;
        assert!((q - p).norm() < 1e-12);
    }
}
