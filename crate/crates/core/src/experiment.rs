//! Experiment specification files and their expansion into episodes.
//!
//! ```toml
//! schema_version = 1
//! output_dir = "results"
//!
//! [episode.mask_noise]          # optional, applies to every experiment
//! false_positive_rate = 0.001
//!
//! [[experiment]]
//! name = "curved_vineyard"
//! crop = "common_vineyard"
//! curvature = 0.05              # optional, 1/m
//! variants = ["seg_min", "seg_zeros"]
//! seeds = [1, 2, 3]
//!
//! [experiment.world]            # optional overrides of the crop geometry
//! track_length = 20.0
//! ```
//!
//! Optional per-experiment tables: `world`, `perception`, `controller`,
//! `episode`. Unknown keys anywhere are rejected.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::controller::ControllerConfig;
use crate::perception::{PerceptionConfig, Variant};
use crate::seed::derive_seed;
use crate::sim::camera::CameraModel;
use crate::sim::episode::{EpisodeSettings, Rates};
use crate::sim::mask_source::MaskNoise;
use crate::sim::world::{Crop, WorldConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Invalid spec, with the 1-based line it refers to when known.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for SpecError {}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldOverrides {
    pub row_distance: Option<f64>,
    pub plant_distance: Option<f64>,
    pub plant_height: Option<f64>,
    pub track_length: Option<f64>,
    pub terrain_roughness: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionOverrides {
    pub depth_threshold: Option<f64>,
    pub smoothing_window: Option<usize>,
    pub history: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeOverrides {
    pub max_duration_s: Option<f64>,
    pub depth_noise_sigma: Option<f64>,
    pub mask_noise: Option<MaskNoise>,
    pub camera: Option<CameraModel>,
    pub rates: Option<Rates>,
}

impl EpisodeOverrides {
    /// Field-wise: values in `self` win over `base`.
    fn or(&self, base: &EpisodeOverrides) -> EpisodeOverrides {
        EpisodeOverrides {
            max_duration_s: self.max_duration_s.or(base.max_duration_s),
            depth_noise_sigma: self.depth_noise_sigma.or(base.depth_noise_sigma),
            mask_noise: self.mask_noise.or(base.mask_noise),
            camera: self.camera.or(base.camera),
            rates: self.rates.or(base.rates),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    name: Spanned<String>,
    crop: Crop,
    #[serde(default)]
    curvature: f64,
    variants: Spanned<Vec<Variant>>,
    seeds: Spanned<Vec<u64>>,
    #[serde(default)]
    world: WorldOverrides,
    #[serde(default)]
    perception: PerceptionOverrides,
    controller: Option<ControllerConfig>,
    #[serde(default)]
    episode: EpisodeOverrides,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    schema_version: Spanned<u32>,
    output_dir: PathBuf,
    #[serde(default)]
    debug_frames: bool,
    #[serde(default)]
    episode: EpisodeOverrides,
    #[serde(default)]
    experiment: Vec<RawExperiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub name: String,
    pub crop: Crop,
    pub curvature: f64,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub world: WorldOverrides,
    pub perception: PerceptionOverrides,
    pub controller: ControllerConfig,
    pub episode: EpisodeOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    pub output_dir: PathBuf,
    pub debug_frames: bool,
    pub experiments: Vec<Experiment>,
}

/// Everything needed to run one episode, fully resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodePlan {
    pub experiment: String,
    pub variant: Variant,
    pub seed: u64,
    pub world: WorldConfig,
    pub perception: PerceptionConfig,
    pub controller: ControllerConfig,
    pub episode: EpisodeSettings,
}

impl EpisodePlan {
    /// Directory name, unique within a spec.
    pub fn id(&self) -> String {
        format!("{}__{}__seed{}", self.experiment, self.variant.slug(), self.seed)
    }
}

fn spanned_err(text: &str, span: Range<usize>, message: impl Into<String>) -> SpecError {
    SpecError {
        line: Some(line_of(text, span.start)),
        message: message.into(),
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| SpecError {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        if *raw.schema_version.get_ref() != SCHEMA_VERSION {
            return Err(spanned_err(
                text,
                raw.schema_version.span(),
                format!(
                    "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                    raw.schema_version.get_ref()
                ),
            ));
        }
        if raw.experiment.is_empty() {
            return Err(SpecError {
                line: None,
                message: "spec defines no [[experiment]]".into(),
            });
        }
        let mut names: Vec<&str> = Vec::new();
        let mut experiments = Vec::with_capacity(raw.experiment.len());
        for exp in &raw.experiment {
            let name = exp.name.get_ref();
            if !valid_name(name) {
                return Err(spanned_err(
                    text,
                    exp.name.span(),
                    format!("experiment name {name:?} may only use letters, digits, '_' and '-'"),
                ));
            }
            if names.contains(&name.as_str()) {
                return Err(spanned_err(text, exp.name.span(), format!("duplicate experiment name {name:?}")));
            }
            names.push(name);
            let variants = exp.variants.get_ref();
            if variants.is_empty() {
                return Err(spanned_err(text, exp.variants.span(), "variant list is empty"));
            }
            if let Some(v) = variants.iter().enumerate().find_map(|(k, v)| variants[..k].contains(v).then_some(v)) {
                return Err(spanned_err(text, exp.variants.span(), format!("variant {} listed twice", v.slug())));
            }
            let seeds = exp.seeds.get_ref();
            if seeds.is_empty() {
                return Err(spanned_err(text, exp.seeds.span(), "seed list is empty"));
            }
            if let Some(s) = seeds.iter().enumerate().find_map(|(k, s)| seeds[..k].contains(s).then_some(s)) {
                return Err(spanned_err(text, exp.seeds.span(), format!("seed {s} listed twice")));
            }
            let experiment = Experiment {
                name: name.clone(),
                crop: exp.crop,
                curvature: exp.curvature,
                variants: variants.clone(),
                seeds: seeds.clone(),
                world: exp.world.clone(),
                perception: exp.perception.clone(),
                controller: exp.controller.unwrap_or_default(),
                episode: exp.episode.or(&raw.episode),
            };
            // Surface semantic problems (bad geometry, rates...) before any episode runs.
            for plan in experiment.plans() {
                plan.validate()
                    .map_err(|message| spanned_err(text, exp.name.span(), format!("experiment {name:?}: {message}")))?;
            }
            experiments.push(experiment);
        }
        Ok(ExperimentSpec {
            schema_version: SCHEMA_VERSION,
            output_dir: raw.output_dir,
            debug_frames: raw.debug_frames,
            experiments,
        })
    }

    /// Every episode in spec order: experiments, then variants, then seeds.
    pub fn plans(&self) -> Vec<EpisodePlan> {
        self.experiments.iter().flat_map(Experiment::plans).collect()
    }
}

impl Experiment {
    pub fn world_config(&self, seed: u64) -> WorldConfig {
        let base = WorldConfig::for_crop(self.crop);
        let w = &self.world;
        WorldConfig {
            row_distance: w.row_distance.unwrap_or(base.row_distance),
            plant_distance: w.plant_distance.unwrap_or(base.plant_distance),
            plant_height: w.plant_height.unwrap_or(base.plant_height),
            track_length: w.track_length.unwrap_or(base.track_length),
            terrain_roughness: w.terrain_roughness.unwrap_or(base.terrain_roughness),
            curvature: self.curvature,
            // Shared by all variants so they drive through the same field.
            jitter_seed: derive_seed(seed, &["world", &self.name]),
            crop: self.crop,
        }
    }

    pub fn plans(&self) -> Vec<EpisodePlan> {
        let mut out = Vec::new();
        for &variant in &self.variants {
            for &seed in &self.seeds {
                let p = &self.perception;
                let base = PerceptionConfig::default();
                let e = &self.episode;
                let defaults = EpisodeSettings::default();
                out.push(EpisodePlan {
                    experiment: self.name.clone(),
                    variant,
                    seed,
                    world: self.world_config(seed),
                    perception: PerceptionConfig {
                        depth_threshold: p.depth_threshold.unwrap_or(self.crop.depth_threshold()),
                        smoothing_window: p.smoothing_window.unwrap_or(base.smoothing_window),
                        history: p.history.unwrap_or(base.history),
                        variant,
                    },
                    controller: self.controller,
                    episode: EpisodeSettings {
                        rates: e.rates.unwrap_or(defaults.rates),
                        max_duration_s: e.max_duration_s.unwrap_or(defaults.max_duration_s),
                        depth_noise_sigma: e.depth_noise_sigma.unwrap_or(defaults.depth_noise_sigma),
                        mask_noise: e.mask_noise.unwrap_or(defaults.mask_noise),
                        camera: e.camera.unwrap_or(defaults.camera),
                        seed: derive_seed(seed, &["episode", &self.name, variant.slug()]),
                    },
                });
            }
        }
        out
    }
}

impl EpisodePlan {
    pub fn validate(&self) -> Result<(), String> {
        self.world.validate().map_err(|e| e.to_string())?;
        self.perception.validate().map_err(|e| e.to_string())?;
        self.controller.validate().map_err(|e| e.to_string())?;
        let s = &self.episode;
        s.rates.validate().map_err(|e| e.to_string())?;
        s.camera.validate()?;
        s.mask_noise.validate()?;
        if !(s.max_duration_s.is_finite() && s.max_duration_s >= 0.0) {
            return Err(format!("max_duration_s must be non-negative, got {}", s.max_duration_s));
        }
        if !(s.depth_noise_sigma.is_finite() && s.depth_noise_sigma >= 0.0) {
            return Err(format!("depth_noise_sigma must be non-negative, got {}", s.depth_noise_sigma));
        }
        if s.camera.width != self.controller.frame_width {
            return Err(format!(
                "camera width {} differs from controller frame_width {}",
                s.camera.width, self.controller.frame_width
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan is representable in TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        toml::from_str(text).map_err(|e| SpecError {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"schema_version = 1
output_dir = "out"

[[experiment]]
name = "v"
crop = "common_vineyard"
variants = ["seg_min", "seg_min_d"]
seeds = [1, 2, 3]
"#;

    #[test]
    fn minimal_spec_expands() {
        let spec = ExperimentSpec::parse(MINIMAL).unwrap();
        let plans = spec.plans();
        assert_eq!(plans.len(), 6);
        assert_eq!(plans[0].id(), "v__seg_min__seed1");
        assert_eq!(plans[0].perception.depth_threshold, 5.0);
        // same field for both variants, different noise streams
        assert_eq!(plans[0].world, plans[3].world);
        assert_ne!(plans[0].episode.seed, plans[3].episode.seed);
        assert_ne!(plans[0].world.jitter_seed, plans[1].world.jitter_seed);
    }

    #[test]
    fn empty_variants_reported_with_line() {
        let text = MINIMAL.replace(r#"["seg_min", "seg_min_d"]"#, "[]");
        let err = ExperimentSpec::parse(&text).unwrap_err();
        assert_eq!(err.line, Some(7));
        assert!(err.message.contains("variant list is empty"));
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let text = MINIMAL.replace("seeds = [1, 2, 3]", "seeds = [1, 2, 3]\nspeed = 2");
        let err = ExperimentSpec::parse(&text).unwrap_err();
        assert_eq!(err.line, Some(9));
        assert!(err.message.contains("speed"), "{err}");
    }

    #[test]
    fn duplicate_seeds_and_bad_version() {
        let err = ExperimentSpec::parse(&MINIMAL.replace("[1, 2, 3]", "[1, 1]")).unwrap_err();
        assert!(err.message.contains("seed 1 listed twice"));
        let err = ExperimentSpec::parse(&MINIMAL.replace("schema_version = 1", "schema_version = 7")).unwrap_err();
        assert_eq!(err.line, Some(1));
    }

    #[test]
    fn semantic_validation_points_at_experiment() {
        let text = format!("{MINIMAL}\n[experiment.perception]\nsmoothing_window = 4\n");
        let err = ExperimentSpec::parse(&text).unwrap_err();
        assert_eq!(err.line, Some(5));
    }

    #[test]
    fn global_episode_table_is_inherited() {
        let text = MINIMAL.replace(
            "[[experiment]]",
            "[episode]\nmax_duration_s = 9.0\n\n[[experiment]]",
        );
        let text = format!("{text}\n[experiment.episode]\ndepth_noise_sigma = 0.01\n");
        let plan = &ExperimentSpec::parse(&text).unwrap().plans()[0];
        assert_eq!(plan.episode.max_duration_s, 9.0);
        assert_eq!(plan.episode.depth_noise_sigma, 0.01);
    }

    #[test]
    fn plan_round_trips_through_toml() {
        let plan = ExperimentSpec::parse(MINIMAL).unwrap().plans().remove(0);
        assert_eq!(EpisodePlan::from_toml(&plan.to_toml()).unwrap(), plan);
    }
}
