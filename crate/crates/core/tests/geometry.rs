//! Projection and localization are inverse operations on noiseless boxes.

use std::f64::consts::PI;

use imfilm::controller::localize_subject;
use imfilm::geometry::{project_foreground, subject_center, Camera, Intrinsics, Orientation, Pose6D, Vec3};
use imfilm_nn::seeded_rng;
use rand::Rng;

#[test]
fn localize_inverts_projection() {
    let k = Intrinsics::default();
    let mut rng = seeded_rng(1000);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let cam = Pose6D::new(
            Vec3::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(1.0..40.0),
            ),
            Orientation::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-PI..PI),
                rng.random_range(-0.8..0.8),
            ),
        );
        let height = rng.random_range(1.4..2.0);
        // Depth keeps the whole box inside the image height.
        let depth = rng.random_range(3.0..60.0);
        let u = rng.random_range(0.1..0.9) * k.width;
        let v = rng.random_range(0.1..0.9) * k.height;
        let center = cam.pos() + Camera::new(cam, k).ray(u, v) * depth;
        let subject = Pose6D::new(
            center - Vec3::new(0.0, 0.0, 0.5 * height),
            Orientation::new(0.0, rng.random_range(-PI..PI), 0.0),
        );
        assert!((subject_center(&subject, height) - center).norm() < 1e-9);
        let fg = project_foreground(&cam, &k, &subject, height).unwrap();
        assert!((fg.cx * k.width - u).abs() < 1e-6 && (fg.cy * k.height - v).abs() < 1e-6);
        let found = localize_subject(&fg, &cam, &k, height).unwrap();
        worst = worst.max((found - center).norm());
    }
    assert!(worst <= 1e-6, "worst error {worst:e} m");
}

#[test]
fn tiny_box_is_rejected() {
    let k = Intrinsics::default();
    let cam = Pose6D::new(Vec3::zeros(), Orientation::new(0.0, 0.0, 0.0));
    let subject = Pose6D::new(Vec3::new(1e7, 0.0, -0.9), Orientation::new(0.0, 0.0, 0.0));
    let fg = project_foreground(&cam, &k, &subject, 1.8).unwrap();
    assert!(matches!(
        localize_subject(&fg, &cam, &k, 1.8),
        Err(imfilm::Error::TooSmall(_))
    ));
}
