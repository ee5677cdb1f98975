//! `.ldck` checkpoints and `.ldls` latent-space files, both stored as
//! containers: JSON metadata followed by named `f64` arrays.

use std::path::Path;

use serde::{Deserialize, Serialize};

use latdyn::dynamics::{DynamicsModel, ForceGains, ForceModel, HeadInit, ModelShape, Variant};
use latdyn::latent_space::LatentSpaceModel;
use latdyn::linalg::Matrix;
use latdyn::neural::Adam;
use latdyn::training::{CurriculumSchedule, EpochRecord, TrainConfig, Trainer};

use crate::error::CliError;
use crate::format::{decode_container, encode_container, read_file, write_file, ArrayCursor, NamedArray};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LDCK";
pub const LATENT_SPACE_MAGIC: &[u8; 4] = b"LDLS";

const HISTORY_COLS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointMeta {
    shape: ModelShape,
    variant: Variant,
    gains: ForceGains,
    init: HeadInit,
    train: TrainConfig,
    schedule: CurriculumSchedule,
    adam_step: u64,
    epochs_done: usize,
    latent_space: Option<LatentSpaceMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatentSpaceMeta {
    latent_dim: usize,
    feature_dim: usize,
    epsilon: f64,
}

/// Everything `train --resume` needs, plus what inference reads.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub trainer: Trainer,
    /// Rollout defaults.
    pub gains: ForceGains,
    pub init: HeadInit,
    pub latent_space: Option<LatentSpaceModel>,
}

impl Checkpoint {
    pub fn model(&self) -> &DynamicsModel {
        &self.trainer.model
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let t = &self.trainer;
        let model = &t.model;
        let meta = CheckpointMeta {
            shape: model.shape(),
            variant: model.variant(),
            gains: self.gains,
            init: self.init,
            train: t.config,
            schedule: t.schedule,
            adam_step: t.adam.step_count(),
            epochs_done: t.epochs_done(),
            latent_space: self.latent_space.as_ref().map(latent_space_meta),
        };
        let mut arrays = vec![NamedArray::vector("z_ref", model.z_ref())];
        let tensors = |prefix: &str, ms: &[Matrix]| -> Vec<NamedArray> {
            ms.iter()
                .enumerate()
                .map(|(i, m)| NamedArray::new(format!("{prefix}.{i}"), m.rows(), m.cols(), m.data().to_vec()))
                .collect()
        };
        arrays.extend(tensors("param", model.params().tensors()));
        arrays.extend(tensors("adam.m", t.adam.first_moments()));
        arrays.extend(tensors("adam.v", t.adam.second_moments()));
        let history: Vec<f64> = t
            .history
            .iter()
            .flat_map(|r| [r.epoch as f64, r.horizon as f64, r.p_tf, r.loss])
            .collect();
        arrays.push(NamedArray::new("history", t.history.len(), HISTORY_COLS, history));
        if let Some(ls) = &self.latent_space {
            arrays.extend(latent_space_arrays(ls));
        }
        encode_container(CHECKPOINT_MAGIC, &meta, &arrays)
    }

    pub fn from_bytes(bytes: &[u8], what: &str) -> Result<Self, CliError> {
        let (meta, arrays): (CheckpointMeta, _) = decode_container(bytes, CHECKPOINT_MAGIC, what)?;
        let fmt = |e: latdyn::Error| CliError::Format(format!("{what}: {e}"));
        let shape = meta.shape;
        let mut cur = ArrayCursor::new(arrays, what);
        let z_ref = cur.next("z_ref", 1, shape.latent_dim)?;
        let mut model = DynamicsModel::zeroed(shape, meta.variant, z_ref).map_err(fmt)?;
        let shapes: Vec<(usize, usize)> = model.params().tensors().iter().map(|m| (m.rows(), m.cols())).collect();
        for (i, (m, &(r, c))) in model.params_mut().tensors_mut().iter_mut().zip(&shapes).enumerate() {
            m.data_mut().copy_from_slice(&cur.next(&format!("param.{i}"), r, c)?);
        }
        let mut moments = |prefix: &str| -> Result<Vec<Matrix>, CliError> {
            shapes
                .iter()
                .enumerate()
                .map(|(i, &(r, c))| Matrix::from_vec(r, c, cur.next(&format!("{prefix}.{i}"), r, c)?).map_err(fmt))
                .collect()
        };
        let first = moments("adam.m")?;
        let second = moments("adam.v")?;
        let adam = Adam::from_state(meta.train.lr, meta.adam_step, first, second).map_err(fmt)?;
        let (rows, data) = cur.next_rows("history", HISTORY_COLS)?;
        if rows != meta.epochs_done {
            return Err(CliError::Format(format!(
                "{what}: history has {rows} rows but {} epochs are recorded",
                meta.epochs_done
            )));
        }
        let history = data
            .chunks_exact(HISTORY_COLS)
            .map(|r| EpochRecord { epoch: r[0] as usize, horizon: r[1] as usize, p_tf: r[2], loss: r[3] })
            .collect();
        let latent_space = match &meta.latent_space {
            Some(ls) => Some(read_latent_space_arrays(&mut cur, ls, what)?),
            None => None,
        };
        cur.finish()?;
        let mut trainer = Trainer::resume(model, adam, meta.train, history).map_err(fmt)?;
        trainer.schedule = meta.schedule;
        Ok(Checkpoint { trainer, gains: meta.gains, init: meta.init, latent_space })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_bytes(&read_file(path)?, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        write_file(path, &self.to_bytes()?)
    }
}

fn latent_space_arrays(ls: &LatentSpaceModel) -> Vec<NamedArray> {
    let p = &ls.projection;
    vec![
        NamedArray::new("ls.projection", p.rows(), p.cols(), p.data().to_vec()),
        NamedArray::vector("ls.feature_mean", &ls.feature_mean),
        NamedArray::vector("ls.latent_mean", &ls.latent_mean),
        NamedArray::vector("ls.latent_std", &ls.latent_std),
        NamedArray::vector("ls.z_ref", &ls.z_ref),
    ]
}

fn read_latent_space_arrays(cur: &mut ArrayCursor, meta: &LatentSpaceMeta, what: &str) -> Result<LatentSpaceModel, CliError> {
    let (dz, d) = (meta.latent_dim, meta.feature_dim);
    let projection = Matrix::from_vec(dz, d, cur.next("ls.projection", dz, d)?)
        .map_err(|e| CliError::Format(format!("{what}: {e}")))?;
    Ok(LatentSpaceModel {
        projection,
        feature_mean: cur.next("ls.feature_mean", 1, d)?,
        latent_mean: cur.next("ls.latent_mean", 1, dz)?,
        latent_std: cur.next("ls.latent_std", 1, dz)?,
        epsilon: meta.epsilon,
        z_ref: cur.next("ls.z_ref", 1, dz)?,
    })
}

fn latent_space_meta(ls: &LatentSpaceModel) -> LatentSpaceMeta {
    LatentSpaceMeta { latent_dim: ls.latent_dim(), feature_dim: ls.feature_dim(), epsilon: ls.epsilon }
}

/// Serialized latent-space model.
pub fn latent_space_to_bytes(ls: &LatentSpaceModel) -> Result<Vec<u8>, CliError> {
    encode_container(LATENT_SPACE_MAGIC, &latent_space_meta(ls), &latent_space_arrays(ls))
}

pub fn latent_space_from_bytes(bytes: &[u8], what: &str) -> Result<LatentSpaceModel, CliError> {
    let (meta, arrays): (LatentSpaceMeta, _) = decode_container(bytes, LATENT_SPACE_MAGIC, what)?;
    let mut cur = ArrayCursor::new(arrays, what);
    let ls = read_latent_space_arrays(&mut cur, &meta, what)?;
    cur.finish()?;
    Ok(ls)
}

pub fn read_latent_space(path: &Path) -> Result<LatentSpaceModel, CliError> {
    latent_space_from_bytes(&read_file(path)?, &path.display().to_string())
}

pub fn write_latent_space(path: &Path, ls: &LatentSpaceModel) -> Result<(), CliError> {
    write_file(path, &latent_space_to_bytes(ls)?)
}
