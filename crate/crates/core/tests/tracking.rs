//! Subject tracking and waypoint search.

use imfilm::controller::{kalman_step, next_waypoint, ControllerConfig, DroneState, KalmanConfig, SubjectTrack};
use imfilm::geometry::{scale_at_depth, Intrinsics, Orientation, Pose6D, Vec3};
use imfilm::Action;
use imfilm_nn::seeded_rng;
use rand::Rng;
use rand_distr::{Distribution, Normal};

const DT: f64 = 0.25;

#[test]
fn constant_velocity_prediction_converges() {
    let cfg = KalmanConfig::default();
    let start = Vec3::new(3.0, -1.0, 0.9);
    let vel = Vec3::new(2.0_f64.sqrt(), 2.0_f64.sqrt(), 0.0);
    assert!((vel.norm() - 2.0).abs() < 1e-12);
    let truth = |k: usize| start + vel * (k as f64 * DT);
    let mut track = SubjectTrack::start(&truth(0), &cfg);
    let mut err = f64::INFINITY;
    for k in 1..=80 {
        let (post, ahead) = kalman_step(&track, &truth(k), DT, &cfg).unwrap();
        err = (ahead - truth(k + 1)).norm();
        track = post;
    }
    assert!(err < 1e-3, "prediction error {err:e} m");
    assert!((track.velocity() - vel).norm() < 1e-3);
}

#[test]
fn covariance_stays_symmetric_psd() {
    let cfg = KalmanConfig::default();
    let mut rng = seeded_rng(77);
    let noise = Normal::new(0.0, cfg.measurement).unwrap();
    let mut pos = Vec3::zeros();
    let mut vel = Vec3::new(1.0, 0.0, 0.0);
    let mut track = SubjectTrack::start(&pos, &cfg);
    for step in 0..1000 {
        vel += Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 0.0);
        pos += vel * DT;
        let z = pos + Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
        // Every fourth frame has no measurement.
        track = if step % 4 == 3 {
            track.predict(DT, &cfg).unwrap()
        } else {
            kalman_step(&track, &z, DT, &cfg).unwrap().0
        };
        let p = track.p;
        assert!((p - p.transpose()).abs().max() <= 1e-9 * p.abs().max().max(1.0));
        let min_eig = p.symmetric_eigenvalues().min();
        assert!(min_eig >= -1e-9, "step {step}: eigenvalue {min_eig:e}");
    }
}

fn forward_action(scale: f64) -> Action {
    Action {
        omega: [0.0; 3],
        dir: [1.0, 0.0, 0.0],
        scale,
    }
}

#[test]
fn doubling_scale_halves_distance() {
    let k = Intrinsics::default();
    let cfg = ControllerConfig {
        max_speed: 100.0,
        ..ControllerConfig::default()
    };
    let drone = DroneState {
        pose: Pose6D::new(Vec3::zeros(), Orientation::new(0.0, 0.0, 0.0)),
        t: 0.0,
    };
    let subject = Vec3::new(20.0, 0.0, 0.0);
    let s1 = scale_at_depth(&k, 1.8, 12.0);
    let w1 = next_waypoint(&drone, &forward_action(s1), &subject, &k, 1.8, &cfg).unwrap();
    let w2 = next_waypoint(&drone, &forward_action(2.0 * s1), &subject, &k, 1.8, &cfg).unwrap();
    let d1 = (subject - w1.pose.pos()).norm();
    let d2 = (subject - w2.pose.pos()).norm();
    assert!((d2 / d1 - 0.5).abs() <= 0.005, "d1 {d1} d2 {d2}");
    assert!((w1.scale - s1).abs() < 1e-6);
}

#[test]
fn unreachable_scale_stops_at_speed_limit() {
    let k = Intrinsics::default();
    let cfg = ControllerConfig::default();
    let drone = DroneState {
        pose: Pose6D::new(Vec3::zeros(), Orientation::new(0.0, 0.0, 0.0)),
        t: 0.0,
    };
    let subject = Vec3::new(40.0, 0.0, 0.0);
    let w = next_waypoint(&drone, &forward_action(0.5), &subject, &k, 1.8, &cfg).unwrap();
    assert!((w.step - cfg.max_speed * cfg.dt).abs() < 1e-12);
}
