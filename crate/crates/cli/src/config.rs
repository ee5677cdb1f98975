//! JSON run configuration. Unknown keys are rejected; every field has a
//! default, so `{}` is a valid config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use latdyn::dynamics::{ForceGains, HeadInit, ModelShape, Variant};
use latdyn::latent_space::{DEFAULT_EPSILON, DEFAULT_LATENT_DIM};
use latdyn::pose_features::{JointGroupMap, POSE_DIM};
use latdyn::training::{CurriculumSchedule, ForcedVelocity, TrainConfig};

use crate::error::CliError;

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "LATDYN_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub init: HeadInit,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { hidden_width: 256, hidden_layers: 4, init: HeadInit::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub forced_velocity: ForcedVelocity,
    pub horizon_start: usize,
    pub horizon_end: usize,
    pub tf_start: f64,
    pub tf_end: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        let s = CurriculumSchedule::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
            forced_velocity: t.forced_velocity,
            horizon_start: s.horizon_start,
            horizon_end: s.horizon_end,
            tf_start: s.tf_start,
            tf_end: s.tf_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    /// Clips used for training.
    pub clips: usize,
    /// Further clips kept for evaluation.
    pub held_out: usize,
    pub frames: usize,
    pub quiescent_tail: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub noise: Option<f64>,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        SyntheticSection { clips: 20, held_out: 5, frames: 500, quiescent_tail: 0, rho_min: 0.85, rho_max: 0.97, noise: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Directory holding `dataset.json` and its clip files.
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub loss_csv: Option<PathBuf>,
    /// JSON group map; the SMPL 24-joint map when absent.
    pub group_map: Option<PathBuf>,
    /// Latent-space model to embed in trained checkpoints.
    pub latent_space: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub latent_dim: usize,
    pub epsilon: f64,
    pub variant: Variant,
    pub gains: ForceGains,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub synthetic: SyntheticSection,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            latent_dim: DEFAULT_LATENT_DIM,
            epsilon: DEFAULT_EPSILON,
            variant: Variant::Full,
            gains: ForceGains::default(),
            model: ModelConfig::default(),
            train: TrainSection::default(),
            synthetic: SyntheticSection::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// Reads `path` (or defaults when `None`), then applies `LATDYN_SEED`.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::from_json(&text).map_err(|e| match e {
                    CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
                    other => other,
                })?
            }
            None => RunConfig::default(),
        };
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.seed = seed
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_ENV}={seed:?} is not an unsigned integer")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.latent_dim == 0 {
            return Err(CliError::Config("latent_dim must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        self.gains.validate()?;
        self.model.init.validate()?;
        self.shape().validate()?;
        self.train_config().validate()?;
        self.schedule().validate()?;
        let s = &self.synthetic;
        if s.clips == 0 || s.frames < 3 || s.quiescent_tail >= s.frames {
            return Err(CliError::Config(format!(
                "synthetic data needs clips ≥ 1, frames ≥ 3 and a tail shorter than the clip (got {}, {}, {})",
                s.clips, s.frames, s.quiescent_tail
            )));
        }
        Ok(())
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape {
            latent_dim: self.latent_dim,
            pose_dim: POSE_DIM,
            hidden_width: self.model.hidden_width,
            hidden_layers: self.model.hidden_layers,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            lr: self.train.lr,
            seed: self.seed,
            forced_velocity: self.train.forced_velocity,
        }
    }

    pub fn schedule(&self) -> CurriculumSchedule {
        CurriculumSchedule {
            horizon_start: self.train.horizon_start,
            horizon_end: self.train.horizon_end,
            tf_start: self.train.tf_start,
            tf_end: self.train.tf_end,
            total_epochs: self.train.epochs,
        }
    }

    pub fn group_map(&self) -> Result<JointGroupMap, CliError> {
        match &self.paths.group_map {
            Some(p) => load_group_map(p),
            None => Ok(JointGroupMap::smpl24()),
        }
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, name: &str) -> Result<&'a Path, CliError> {
        path.as_deref().ok_or_else(|| CliError::Config(format!("paths.{name} is not set")))
    }
}

pub fn load_group_map(path: &Path) -> Result<JointGroupMap, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: invalid group map: {e}", path.display())))
}
