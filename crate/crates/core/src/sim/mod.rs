//! Procedural crop-row simulator: worlds, kinematics, camera and episode loop.

pub mod camera;
pub mod episode;
pub mod kinematics;
pub mod mask_source;
pub mod render;
pub mod shapes;
pub mod terrain;
pub mod track;
pub mod world;

pub use camera::{camera_pose, CameraModel, CameraPose};
pub use episode::{
    run_episode, run_episode_observed, EpisodeError, EpisodeObserver, EpisodeResult,
    EpisodeSettings, LogRow, Outcome, Rates, StageCounts,
};
pub use kinematics::{step_kinematics, RobotPose};
pub use mask_source::{MaskNoise, MaskSource, NoisyMask, OracleMask};
pub use render::{render, FrameObservation, Renderer};
pub use world::{generate_world, ground_truth_centerline, Crop, World, WorldConfig};
