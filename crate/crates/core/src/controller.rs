//! Turning predicted actions into camera waypoints, and the simulated
//! closed filming loop.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::features::{Encoders, SNIPPET_LEN};
use crate::geometry::{
    aim_at, aim_with_framing, project_foreground, scale_at_depth, subject_center, Camera, FgFeature, Intrinsics,
    Orientation, Pose6D, Vec3, MIN_DEPTH,
};
use crate::imitation::ImitationNet;
use crate::scene::{
    generate_style_trajectory, noise_rng, observe_frame, FrameFeature, FrameSample, NoiseLevels, PointCloud,
    ShotScript, SubjectMotion, VideoRecord, DT,
};
use crate::style::StyleLabel;

type Mat6 = SMatrix<f64, 6, 6>;
type Vec6 = SVector<f64, 6>;
type Mat36 = SMatrix<f64, 3, 6>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroneState {
    pub pose: Pose6D,
    pub t: f64,
}

/// Recovers the subject's mid-height point from its box and known height.
pub fn localize_subject(fg: &FgFeature, drone: &Pose6D, k: &Intrinsics, subject_height: f64) -> Result<Vec3> {
    if subject_height <= 0.0 {
        return Err(Error::Argument("subject height must be positive".into()));
    }
    if fg.h <= 1e-4 {
        return Err(Error::TooSmall(fg.h));
    }
    let depth = k.focal * subject_height / (fg.h * k.height);
    let cam = Camera::new(*drone, *k);
    Ok(drone.pos() + cam.ray(fg.cx * k.width, fg.cy * k.height) * depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanConfig {
    /// Standard deviation of the white acceleration, m/s^2.
    pub process_accel: f64,
    /// Standard deviation of a position measurement, m.
    pub measurement: f64,
    /// Prior standard deviation of the velocity at track start, m/s.
    pub initial_velocity: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            process_accel: 0.5,
            measurement: 0.1,
            initial_velocity: 4.0,
        }
    }
}

/// Constant-velocity track: position then velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectTrack {
    pub x: Vec6,
    pub p: Mat6,
}

fn transition(dt: f64) -> Mat6 {
    let mut f = Mat6::identity();
    for i in 0..3 {
        f[(i, i + 3)] = dt;
    }
    f
}

fn process_noise(dt: f64, q: f64) -> Mat6 {
    let q2 = q * q;
    let mut m = Mat6::zeros();
    for i in 0..3 {
        m[(i, i)] = q2 * dt.powi(4) / 4.0;
        m[(i, i + 3)] = q2 * dt.powi(3) / 2.0;
        m[(i + 3, i)] = q2 * dt.powi(3) / 2.0;
        m[(i + 3, i + 3)] = q2 * dt * dt;
    }
    m
}

fn observation() -> Mat36 {
    let mut h = Mat36::zeros();
    for i in 0..3 {
        h[(i, i)] = 1.0;
    }
    h
}

impl SubjectTrack {
    pub fn start(z: &Vec3, cfg: &KalmanConfig) -> Self {
        let mut x = Vec6::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(z);
        let mut p = Mat6::zeros();
        for i in 0..3 {
            p[(i, i)] = cfg.measurement * cfg.measurement;
            p[(i + 3, i + 3)] = cfg.initial_velocity * cfg.initial_velocity;
        }
        Self { x, p }
    }

    pub fn position(&self) -> Vec3 {
        self.x.fixed_rows::<3>(0).into()
    }

    pub fn velocity(&self) -> Vec3 {
        self.x.fixed_rows::<3>(3).into()
    }

    /// Position expected `dt` ahead.
    pub fn ahead(&self, dt: f64) -> Vec3 {
        self.position() + self.velocity() * dt
    }

    /// Time update only, for frames without a measurement.
    pub fn predict(&self, dt: f64, cfg: &KalmanConfig) -> Result<Self> {
        check_dt(dt)?;
        let f = transition(dt);
        Ok(Self {
            x: f * self.x,
            p: f * self.p * f.transpose() + process_noise(dt, cfg.process_accel),
        })
    }

    fn update(&self, z: &Vec3, cfg: &KalmanConfig) -> Result<Self> {
        let h = observation();
        let r = SMatrix::<f64, 3, 3>::identity() * (cfg.measurement * cfg.measurement);
        let s = h * self.p * h.transpose() + r;
        let s_inv = s
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular innovation covariance".into()))?;
        let gain = self.p * h.transpose() * s_inv;
        let x = self.x + gain * (z - h * self.x);
        // Joseph form keeps the covariance symmetric in floating point.
        let ikh = Mat6::identity() - gain * h;
        let p = ikh * self.p * ikh.transpose() + gain * r * gain.transpose();
        Ok(Self { x, p })
    }

    /// Checks symmetry and positive semidefiniteness, symmetrizing once
    /// before giving up.
    pub fn checked(mut self) -> Result<Self> {
        if !self.x.iter().chain(self.p.iter()).all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite track state".into()));
        }
        self.p = 0.5 * (self.p + self.p.transpose());
        let jitter = Mat6::identity() * (1e-12 * self.p.trace().abs().max(1.0));
        if (self.p + jitter).cholesky().is_none() {
            return Err(Error::Numeric("track covariance is not positive semidefinite".into()));
        }
        Ok(self)
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("time step must be positive, got {dt}")))
    }
}

/// One predict/update cycle. Returns the posterior track and its position
/// prediction `dt` ahead.
pub fn kalman_step(track: &SubjectTrack, z: &Vec3, dt: f64, cfg: &KalmanConfig) -> Result<(SubjectTrack, Vec3)> {
    let post = track.predict(dt, cfg)?.update(z, cfg)?.checked()?;
    Ok((post, post.ahead(dt)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub max_speed: f64,
    pub dt: f64,
    pub bisection_steps: usize,
    pub kalman: KalmanConfig,
    /// Longest tolerated run of frames without the subject, seconds.
    pub lost_timeout: f64,
    /// Fraction of the aim error at the predicted subject folded into the
    /// commanded yaw and pitch rates each step; 0 flies the rates as given.
    pub reframe_gain: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            max_speed: 10.0,
            dt: DT,
            bisection_steps: 30,
            kalman: KalmanConfig::default(),
            lost_timeout: 2.0,
            reframe_gain: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub pose: Pose6D,
    /// Distance moved along the commanded direction.
    pub step: f64,
    /// Scale the subject would have at the waypoint.
    pub scale: f64,
}

/// Next camera pose for an action: orientation integrated from the rates,
/// position searched along the commanded direction so the predicted subject
/// appears at the commanded scale.
pub fn next_waypoint(
    drone: &DroneState,
    a: &Action,
    subject: &Vec3,
    k: &Intrinsics,
    subject_height: f64,
    cfg: &ControllerConfig,
) -> Result<Waypoint> {
    check_dt(cfg.dt)?;
    if !a.is_valid() {
        return Err(Error::Argument(format!("invalid action {a:?}")));
    }
    let orientation = a.integrate(&drone.pose.orientation, cfg.dt);
    let fwd = orientation.forward();
    let p0 = drone.pose.pos();
    let dir = a.dir_vec();
    let depth = |s: f64| fwd.dot(&(subject - p0 - dir * s));
    let scale = |s: f64| {
        let d = depth(s);
        if d <= MIN_DEPTH {
            f64::INFINITY
        } else {
            scale_at_depth(k, subject_height, d)
        }
    };
    let max_step = cfg.max_speed * cfg.dt;
    if depth(0.0) <= MIN_DEPTH && depth(max_step) <= MIN_DEPTH {
        return Err(Error::Infeasible);
    }
    let err = |s: f64| scale(s) - a.scale;
    let (e0, e1) = (err(0.0), err(max_step));
    let step = if e0 == 0.0 {
        0.0
    } else if e0.signum() != e1.signum() {
        let (mut lo, mut hi) = (0.0, max_step);
        for _ in 0..cfg.bisection_steps {
            let mid = 0.5 * (lo + hi);
            if err(mid).signum() == e0.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    } else if e1.abs() < e0.abs() {
        max_step
    } else {
        0.0
    };
    Ok(Waypoint {
        pose: Pose6D::new(p0 + dir * step, orientation),
        step,
        scale: scale(step),
    })
}

/// A simulated world for a recapture: subject motion, background and the
/// drone's starting pose.
#[derive(Debug, Clone)]
pub struct Scene {
    pub subject: SubjectMotion,
    pub start: Pose6D,
    pub cloud: PointCloud,
    pub k: Intrinsics,
    pub noise: NoiseLevels,
    pub seed: u64,
}

impl Scene {
    /// Uses the script's subject and first camera pose. The background is
    /// scattered around the scripted camera path and the subject path.
    pub fn from_script(script: &ShotScript, k: &Intrinsics, noise: &NoiseLevels) -> Result<Self> {
        let frames = generate_style_trajectory(script)?;
        let mut anchors: Vec<Vec3> = frames.iter().map(|f| f.camera.pos()).collect();
        anchors.extend(frames.iter().map(|f| f.subject.pos()));
        let mut rng = crate::scene::stream_rng(script.seed, crate::scene::STREAM_BACKGROUND);
        Ok(Self {
            subject: script.subject.clone(),
            start: frames[0].camera,
            cloud: PointCloud::scatter(&anchors, &mut rng),
            k: *k,
            noise: *noise,
            seed: script.seed,
        })
    }

    /// Moves the start so that the camera stands to the subject as `camera`
    /// stood to `subject`, measured in the subject's heading frame.
    pub fn framed_like(mut self, camera: &Pose6D, subject: &Pose6D) -> Self {
        let s0 = self.subject_pose(0.0);
        let turn = s0.orientation.yaw - subject.orientation.yaw;
        let rel = camera.pos() - subject.pos();
        let (sn, cs) = turn.sin_cos();
        let offset = Vec3::new(cs * rel.x - sn * rel.y, sn * rel.x + cs * rel.y, rel.z);
        let o = camera.orientation;
        self.start = Pose6D::new(s0.pos() + offset, Orientation::new(o.roll, o.yaw + turn, o.pitch));
        self
    }

    pub fn subject_pose(&self, t: f64) -> Pose6D {
        let (g, yaw) = self.subject.state_at(t);
        Pose6D::new(Vec3::new(g[0], g[1], 0.0), Orientation::new(0.0, yaw, 0.0))
    }

    fn frame(&self, t: f64, camera: Pose6D) -> FrameSample {
        FrameSample {
            t,
            camera,
            subject: self.subject_pose(t),
            subject_height: self.subject.height,
        }
    }
}

/// What the loop needs from a demonstration: its observations, its action
/// labels and the camera yaw of each frame (to re-express the opening
/// actions in the new scene).
#[derive(Debug, Clone, PartialEq)]
pub struct Demo {
    pub features: Vec<FrameFeature>,
    pub actions: Vec<Action>,
    pub camera_yaw: Vec<f64>,
}

impl Demo {
    pub fn from_video(v: &VideoRecord) -> Self {
        Self {
            features: v.features.clone(),
            actions: v.actions.clone(),
            camera_yaw: v.frames.iter().map(|f| f.camera.orientation.yaw).collect(),
        }
    }

    pub fn frames(&self) -> usize {
        self.features.len()
    }
}

/// Span of demo frames imitated with one style feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedSegment {
    pub label: StyleLabel,
    pub first_frame: usize,
    pub end_frame: usize,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Bootstrap,
    Policy,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: f64,
    pub drone: Pose6D,
    pub subject: Pose6D,
    pub action: Action,
    pub waypoint: Pose6D,
    pub phase: Phase,
    pub visible: bool,
}

#[derive(Debug, Clone)]
pub struct Recapture {
    pub frames: Vec<FrameSample>,
    pub features: Vec<FrameFeature>,
    pub log: Vec<StepLog>,
    /// Set when the subject was lost for too long; the logs stop there.
    pub aborted: Option<LostSubject>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LostSubject {
    pub time: f64,
    pub lost_for: f64,
}

impl From<LostSubject> for Error {
    fn from(l: LostSubject) -> Self {
        Error::SubjectLost {
            time: l.time,
            lost_for: l.lost_for,
        }
    }
}

impl Recapture {
    pub fn completed(&self) -> bool {
        self.aborted.is_none()
    }
}

/// Adds to the yaw and pitch rates of `a` the share `gain` of the aim error
/// that integrating `a` from `pose` would leave. The aim puts `target` where
/// `framing` has the subject on screen, or at the image center without one.
pub fn reframe(
    pose: &Pose6D,
    a: &Action,
    target: &Vec3,
    framing: &FgFeature,
    k: &Intrinsics,
    gain: f64,
    dt: f64,
) -> Action {
    if gain == 0.0 {
        return *a;
    }
    let want = if framing.is_visible() {
        aim_with_framing(&pose.pos(), target, k, framing.cx, framing.cy)
    } else {
        aim_at(&pose.pos(), target)
    };
    let err = want.delta(&a.integrate(&pose.orientation, dt));
    let mut out = *a;
    out.omega[1] += gain * err[1] / dt;
    out.omega[2] += gain * err[2] / dt;
    out
}

/// Flies the scene for as many frames as the demo has, or until the subject
/// has been out of view for longer than the configured timeout.
///
/// The first `SNIPPET_LEN - 1` transitions replay the demo's opening rates and
/// directions (rotated by the yaw offset between the two cameras) while
/// holding the observed scale; after that every action comes from the
/// imitation network, which sees and predicts directions relative to the
/// current camera heading. Each waypoint is reached exactly.
pub fn closed_loop_run(
    demo: &Demo,
    plan: &[PlannedSegment],
    scene: &Scene,
    enc: &Encoders,
    net: &ImitationNet,
    cfg: &ControllerConfig,
) -> Result<Recapture> {
    let n = demo.frames();
    if n < SNIPPET_LEN + 1 || demo.actions.len() + 1 != n || demo.camera_yaw.len() != n {
        return Err(Error::TooShort {
            len: n,
            min: SNIPPET_LEN + 1,
        });
    }
    if plan.is_empty() {
        return Err(Error::Argument("empty imitation plan".into()));
    }
    let h = scene.subject.height;
    let mut rng = noise_rng(scene.seed);
    let mut frames = vec![scene.frame(0.0, scene.start)];
    let mut features = vec![observe_frame(
        None,
        &frames[0],
        &scene.k,
        &scene.cloud,
        &scene.noise,
        &mut rng,
    )?];
    let first = features[0].fg;
    if !first.is_visible() {
        return Err(Error::SubjectLost {
            time: 0.0,
            lost_for: 0.0,
        });
    }
    let mut track = SubjectTrack::start(&localize_subject(&first, &scene.start, &scene.k, h)?, &cfg.kalman);
    let mut target = track.ahead(cfg.dt);
    let mut lost_for = 0.0;
    let mut log = Vec::with_capacity(n - 1);
    let mut last: Option<Action> = None;
    for kf in 0..n - 1 {
        let now = &frames[kf];
        let drone = DroneState {
            pose: now.camera,
            t: now.t,
        };
        let yaw = drone.pose.orientation.yaw;
        let (phase, command) = if kf + 1 < SNIPPET_LEN {
            let mut a = demo.actions[kf].rotated_z(yaw - demo.camera_yaw[kf]);
            a.scale = hold_scale(&features[kf].fg, last.as_ref());
            (Phase::Bootstrap, a)
        } else {
            let seg = plan
                .iter()
                .find(|s| (s.first_frame..s.end_frame).contains(&(kf + 1)))
                .unwrap_or(&plan[plan.len() - 1]);
            let current = executed(&frames[kf - 1], now, &features[kf].fg, last.as_ref(), cfg.dt);
            let obs = enc.embed_snippet(&features[kf + 1 - SNIPPET_LEN..=kf])?.concat();
            let a = net.predict(&seg.v, &obs, &current.rotated_z(-yaw))?;
            (Phase::Policy, a.rotated_z(yaw))
        };
        let command = reframe(
            &drone.pose,
            &command,
            &target,
            &demo.features[kf + 1].fg,
            &scene.k,
            cfg.reframe_gain,
            cfg.dt,
        );
        let (phase, waypoint) = match next_waypoint(&drone, &command, &target, &scene.k, h, cfg) {
            Ok(w) => (phase, w.pose),
            Err(Error::Infeasible) => (Phase::Hold, drone.pose),
            Err(e) => return Err(e),
        };
        last = Some(command);
        let next = scene.frame(now.t + cfg.dt, waypoint);
        let feat = observe_frame(Some(&now.camera), &next, &scene.k, &scene.cloud, &scene.noise, &mut rng)?;
        let visible = feat.fg.is_visible();
        if visible {
            lost_for = 0.0;
            let z = localize_subject(&feat.fg, &next.camera, &scene.k, h)?;
            let (t2, ahead) = kalman_step(&track, &z, cfg.dt, &cfg.kalman)?;
            track = t2;
            target = ahead;
        } else {
            lost_for += cfg.dt;
            track = track.predict(cfg.dt, &cfg.kalman)?.checked()?;
            target = track.ahead(cfg.dt);
        }
        log.push(StepLog {
            t: now.t,
            drone: now.camera,
            subject: now.subject,
            action: command,
            waypoint,
            phase,
            visible,
        });
        let t_next = next.t;
        frames.push(next);
        features.push(feat);
        if lost_for > cfg.lost_timeout {
            return Ok(Recapture {
                frames,
                features,
                log,
                aborted: Some(LostSubject { time: t_next, lost_for }),
            });
        }
    }
    Ok(Recapture {
        frames,
        features,
        log,
        aborted: None,
    })
}

fn hold_scale(fg: &FgFeature, commanded: Option<&Action>) -> f64 {
    if fg.is_visible() {
        fg.h
    } else {
        commanded.map_or(0.0, |a| a.scale)
    }
}

/// The action the drone just carried out, with the scale it observes (or the
/// commanded one when the subject is not visible).
fn executed(prev: &FrameSample, now: &FrameSample, fg: &FgFeature, commanded: Option<&Action>, dt: f64) -> Action {
    let mut a = Action::between(&prev.camera, &now.camera, dt, hold_scale(fg, commanded));
    if (now.camera.pos() - prev.camera.pos()).norm() <= 1e-12 {
        if let Some(c) = commanded {
            a.dir = c.dir;
        }
    }
    a
}

pub fn trajectory_csv(log: &[StepLog]) -> String {
    let mut s = String::from(
        "t,phase,visible,drone_x,drone_y,drone_z,drone_roll,drone_yaw,drone_pitch,subject_x,subject_y,subject_yaw,\
         w_roll,w_yaw,w_pitch,dir_x,dir_y,dir_z,scale,wp_x,wp_y,wp_z,wp_roll,wp_yaw,wp_pitch\n",
    );
    for l in log {
        let o = l.drone.orientation;
        let w = l.waypoint.orientation;
        let a = &l.action;
        s.push_str(&format!(
            "{:.2},{:?},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            l.t,
            l.phase,
            l.visible,
            l.drone.position[0],
            l.drone.position[1],
            l.drone.position[2],
            o.roll,
            o.yaw,
            o.pitch,
            l.subject.position[0],
            l.subject.position[1],
            l.subject.orientation.yaw,
            a.omega[0],
            a.omega[1],
            a.omega[2],
            a.dir[0],
            a.dir[1],
            a.dir[2],
            a.scale,
            l.waypoint.position[0],
            l.waypoint.position[1],
            l.waypoint.position[2],
            w.roll,
            w.yaw,
            w.pitch,
        ));
    }
    s
}

/// Ground-truth scale the drone at `pose` would observe, for tests and
/// reports.
pub fn observed_scale(pose: &Pose6D, subject: &Pose6D, k: &Intrinsics, height: f64) -> Option<f64> {
    let d = Camera::new(*pose, *k).to_body(&subject_center(subject, height)).x;
    (d > MIN_DEPTH).then(|| scale_at_depth(k, height, d))
}

/// Whether the subject projects into the image from `pose`.
pub fn subject_visible(pose: &Pose6D, subject: &Pose6D, k: &Intrinsics, height: f64) -> bool {
    project_foreground(pose, k, subject, height).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn centred_box_gives_ten_metres() {
        let k = Intrinsics::default();
        let pose = Pose6D::new(Vec3::zeros(), Orientation::new(0.0, 0.0, 0.0));
        let fg = FgFeature {
            cx: 0.5,
            cy: 0.5,
            w: 0.1,
            h: 0.2125,
            orientation: 0.0,
        };
        let p = localize_subject(&fg, &pose, &k, 1.7).unwrap();
        assert_abs_diff_eq!(p.x, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-12);
        assert!(matches!(
            localize_subject(&FgFeature { h: 1e-5, ..fg }, &pose, &k, 1.7),
            Err(Error::TooSmall(_))
        ));
    }

    #[test]
    fn stationary_track_converges() {
        let cfg = KalmanConfig::default();
        let z = Vec3::new(3.0, -2.0, 0.85);
        let mut tr = SubjectTrack::start(&z, &cfg);
        let mut ahead = z;
        for _ in 0..20 {
            (tr, ahead) = kalman_step(&tr, &z, 0.25, &cfg).unwrap();
        }
        assert!((ahead - z).norm() < 1e-6);
    }

    #[test]
    fn yaw_rate_integrates_exactly() {
        let k = Intrinsics::default();
        let drone = DroneState {
            pose: Pose6D::new(Vec3::new(0.0, 0.0, 1.0), Orientation::new(0.0, 0.3, 0.0)),
            t: 0.0,
        };
        let subject = Vec3::new(10.0, 3.0, 0.85);
        let a = Action {
            omega: [0.0, 0.2, 0.0],
            dir: [1.0, 0.0, 0.0],
            scale: 0.2,
        };
        let w = next_waypoint(&drone, &a, &subject, &k, 1.7, &ControllerConfig::default()).unwrap();
        assert_abs_diff_eq!(w.pose.orientation.yaw - 0.3, 0.05, epsilon = 1e-15);
    }
}
