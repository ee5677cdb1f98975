//! On-disk dataset: a `dataset.json` index next to per-clip files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use latdyn::pose_features::PoseDescriptor;
use latdyn::training::TrainingClip;

use crate::error::CliError;
use crate::format::{read_featmat, FORMAT_VERSION};

pub const INDEX_FILE: &str = "dataset.json";
pub const SYSTEM_FILE: &str = "system.json";

/// File names of one clip, relative to the dataset directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipFiles {
    pub motion: String,
    pub descriptors: String,
    pub latents: String,
}

impl ClipFiles {
    pub fn named(stem: &str) -> Self {
        ClipFiles {
            motion: format!("{stem}.quatseq"),
            descriptors: format!("{stem}.desc.featmat"),
            latents: format!("{stem}.latent.featmat"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetIndex {
    pub format_version: u32,
    pub latent_dim: usize,
    pub pose_dim: usize,
    pub z_ref: Vec<f64>,
    pub train: Vec<ClipFiles>,
    pub held_out: Vec<ClipFiles>,
}

/// Which clips of a dataset to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    HeldOut,
}

pub struct Dataset {
    pub dir: PathBuf,
    pub index: DatasetIndex,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(INDEX_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let index: DatasetIndex = serde_json::from_str(&text)
            .map_err(|e| CliError::Format(format!("{}: invalid dataset index: {e}", path.display())))?;
        if index.format_version != FORMAT_VERSION {
            return Err(CliError::Format(format!(
                "{}: unsupported format version {}, expected {FORMAT_VERSION}",
                path.display(),
                index.format_version
            )));
        }
        if index.z_ref.len() != index.latent_dim {
            return Err(CliError::Format(format!(
                "{}: z_ref has {} entries, latent_dim is {}",
                path.display(),
                index.z_ref.len(),
                index.latent_dim
            )));
        }
        Ok(Dataset { dir: dir.to_path_buf(), index })
    }

    pub fn files(&self, split: Split) -> &[ClipFiles] {
        match split {
            Split::Train => &self.index.train,
            Split::HeldOut => &self.index.held_out,
        }
    }

    pub fn load_clip(&self, files: &ClipFiles) -> Result<TrainingClip, CliError> {
        let dpath = self.dir.join(&files.descriptors);
        let zpath = self.dir.join(&files.latents);
        let desc = read_featmat(&dpath)?;
        desc.expect_cols(self.index.pose_dim, "descriptor width").map_err(|e| e.in_file(&dpath))?;
        let z = read_featmat(&zpath)?;
        z.expect_cols(self.index.latent_dim, "latent width").map_err(|e| e.in_file(&zpath))?;
        if z.rows != desc.rows {
            return Err(CliError::Format(format!(
                "{}: {} latent frames but {} descriptor frames",
                zpath.display(),
                z.rows,
                desc.rows
            )));
        }
        let descriptors = desc.to_rows().into_iter().map(PoseDescriptor).collect();
        TrainingClip::new(z.to_rows(), descriptors).map_err(|e| CliError::Format(format!("{}: {e}", zpath.display())))
    }

    pub fn load(&self, split: Split) -> Result<Vec<TrainingClip>, CliError> {
        self.files(split).iter().map(|f| self.load_clip(f)).collect()
    }
}
