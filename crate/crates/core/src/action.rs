//! Camera control variables.

use serde::{Deserialize, Serialize};

use crate::geometry::{Orientation, Pose6D, Vec3};

/// Euclidean norm below which a direction is treated as undefined.
pub const DIR_EPS: f64 = 1e-8;

/// Camera motion over one time step: Euler-angle rates, unit direction of
/// travel in the world frame, and the normalized subject height to hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    /// Rates of (roll, yaw, pitch) in rad/s.
    pub omega: [f64; 3],
    pub dir: [f64; 3],
    pub scale: f64,
}

impl Action {
    pub const DIM: usize = 7;

    pub fn to_vec(&self) -> [f64; 7] {
        [
            self.omega[0],
            self.omega[1],
            self.omega[2],
            self.dir[0],
            self.dir[1],
            self.dir[2],
            self.scale,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            omega: [v[0], v[1], v[2]],
            dir: [v[3], v[4], v[5]],
            scale: v[6],
        }
    }

    pub fn dir_vec(&self) -> Vec3 {
        Vec3::from(self.dir)
    }

    pub fn is_valid(&self) -> bool {
        let n = self.dir_vec().norm();
        self.omega.iter().all(|v| v.is_finite()) && (n - 1.0).abs() <= 1e-9 && (0.0..=1.0).contains(&self.scale)
    }

    /// Counterpart under the world mirror `y -> -y`.
    pub fn mirrored(&self) -> Self {
        Self {
            omega: [-self.omega[0], -self.omega[1], self.omega[2]],
            dir: [self.dir[0], -self.dir[1], self.dir[2]],
            scale: self.scale,
        }
    }

    /// Action that moves `from` to `to` over `dt`, holding `scale` on arrival.
    ///
    /// When the camera does not move, the direction falls back to `from`'s
    /// optical axis.
    pub fn between(from: &Pose6D, to: &Pose6D, dt: f64, scale: f64) -> Self {
        let d = to.orientation.delta(&from.orientation);
        let step = to.pos() - from.pos();
        let n = step.norm();
        let dir = if n > 1e-12 {
            step / n
        } else {
            from.orientation.forward()
        };
        Self {
            omega: [d[0] / dt, d[1] / dt, d[2] / dt],
            dir: [dir.x, dir.y, dir.z],
            scale: scale.clamp(0.0, 1.0),
        }
    }

    /// Same action with `dir` rotated about the vertical axis by `angle`.
    pub fn rotated_z(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let d = self.dir;
        Self {
            dir: [c * d[0] - s * d[1], s * d[0] + c * d[1], d[2]],
            ..*self
        }
    }

    /// Orientation after applying this action's rates for `dt`.
    pub fn integrate(&self, from: &Orientation, dt: f64) -> Orientation {
        Orientation::new(
            from.roll + self.omega[0] * dt,
            from.yaw + self.omega[1] * dt,
            from.pitch + self.omega[2] * dt,
        )
    }
}
