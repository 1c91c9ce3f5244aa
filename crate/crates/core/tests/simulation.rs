use segmin::perception::perceive;
use segmin::sim::{
    camera_pose, generate_world, render, run_episode, CameraModel, Crop, EpisodeSettings, MaskNoise, RobotPose,
    WorldConfig,
};
use segmin::{ControllerConfig, Grid, MaskBuffer, PerceptionConfig, RowEstimate, Variant};

fn short_world(crop: Crop, curvature: f64) -> segmin::sim::World {
    let cfg = WorldConfig {
        track_length: 2.0,
        ..WorldConfig::for_crop(crop).with_seed(11).with_curvature(curvature)
    };
    generate_world(&cfg).unwrap()
}

fn noisy(seed: u64) -> EpisodeSettings {
    EpisodeSettings {
        depth_noise_sigma: 0.01,
        mask_noise: MaskNoise {
            false_positive_rate: 0.002,
            false_negative_rate: 0.01,
        },
        seed,
        ..Default::default()
    }
}

fn perception(crop: Crop, variant: Variant) -> PerceptionConfig {
    PerceptionConfig {
        depth_threshold: crop.depth_threshold(),
        variant,
        ..Default::default()
    }
}

#[test]
fn episodes_replay_exactly() {
    let world = short_world(Crop::PearField, 0.02);
    let p = perception(Crop::PearField, Variant::SegMinD);
    let a = run_episode(&world, &p, &ControllerConfig::default(), &noisy(5)).unwrap();
    let b = run_episode(&world, &p, &ControllerConfig::default(), &noisy(5)).unwrap();
    assert_eq!(a, b);
    assert!(a.outcome.is_completed(), "{:?}", a.outcome);

    let c = run_episode(&world, &p, &ControllerConfig::default(), &noisy(6)).unwrap();
    assert_ne!(a.log, c.log);
}

#[test]
fn completed_runs_respect_the_speed_limit() {
    for crop in [Crop::CommonVineyard, Crop::HighTreesField] {
        let world = short_world(crop, 0.0);
        let r = run_episode(
            &world,
            &perception(crop, Variant::SegMin),
            &ControllerConfig::default(),
            &EpisodeSettings::default(),
        )
        .unwrap();
        let t = r.outcome.clearance_time().expect("straight short run completes");
        assert!(t >= 2.0 / 0.5, "{crop}: {t}");
        assert!(r.log.iter().all(|row| row.v_bar <= 0.5 && row.omega_bar.abs() <= 1.0));
    }
}

#[test]
fn mirrored_world_renders_mirrored_frames() {
    for (crop, curvature) in [(Crop::CommonVineyard, 0.05), (Crop::HighTreesField, 0.0), (Crop::PergolaVineyard, 0.0)] {
        let world = short_world(crop, curvature);
        let mirror = world.mirrored();
        let cam = CameraModel::default();
        let (x, y, th) = world.start();
        let pose = RobotPose::planar(x + 0.3, y + 0.1, th + 0.05);
        let mirrored_pose = RobotPose::planar(pose.x, -pose.y, -pose.theta);

        let a = render(&world, &camera_pose(&pose, &cam), &cam);
        let b = render(&mirror, &camera_pose(&mirrored_pose, &cam), &cam);
        let flipped = a.mask.flip_horizontal();
        let differing = flipped.cells().iter().zip(b.mask.cells()).filter(|(p, q)| p != q).count();
        assert!(
            differing * 1000 <= flipped.cells().len(),
            "{crop}: {differing} of {} pixels differ",
            flipped.cells().len()
        );

        let cfg = perception(crop, Variant::SegMin);
        let estimate = |obs: &segmin::sim::FrameObservation| {
            let mut buf = MaskBuffer::new(1).unwrap();
            buf.push(obs.mask.clone()).unwrap();
            perceive(&buf, &obs.depth, &cfg).unwrap()
        };
        match (estimate(&a), estimate(&b)) {
            (RowEstimate::Center(p), RowEstimate::Center(q)) => {
                let reflected = a.mask.width() as f64 - 1.0 - p;
                assert!((reflected - q).abs() <= 1.0, "{crop}: {p} reflects to {reflected}, got {q}");
            }
            other => panic!("{crop}: {other:?}"),
        }
    }
}
