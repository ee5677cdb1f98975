//! The subcommands, callable as library functions.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use latdyn::dynamics::{rollout, DynamicsModel, ForceGains, ForceModel, LatentState, Variant};
use latdyn::latent_space::LatentSpaceModel;
use latdyn::oracle::{SyntheticConfig, SyntheticDataset};
use latdyn::pose_features::{pose_descriptors, JointGroupMap, PoseDescriptor, POSE_DIM};
use latdyn::so3::{Rotation, RotationSequence};
use latdyn::training::{free_rollout_mse, teacher_forced_mse, TrainingClip, Trainer};

use crate::checkpoint::{read_latent_space, write_latent_space, Checkpoint};
use crate::config::RunConfig;
use crate::dataset::{ClipFiles, Dataset, DatasetIndex, Split, INDEX_FILE, SYSTEM_FILE};
use crate::error::CliError;
use crate::format::{
    decode_quatseq, read_featmat, read_file, write_featmat, write_file, write_quatseq, FeatureMatrix, FORMAT_VERSION,
    QUATSEQ_MAGIC,
};

/// Horizons reported by `eval`.
pub const EVAL_HORIZONS: [usize; 3] = [10, 50, 200];

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Format(e.to_string()))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

#[derive(Serialize)]
struct SystemManifest<'a> {
    seed: u64,
    latent_dim: usize,
    pose_dim: usize,
    kappa: &'a [f64],
    damping: &'a [f64],
    mass: &'a [f64],
    coupling: Vec<Vec<f64>>,
    z_ref: &'a [f64],
    spectral_radii: Vec<f64>,
}

/// Oracle-generated clips, the system manifest and `dataset.json` under `out`.
pub fn gen_synthetic(cfg: &RunConfig, out: &Path) -> Result<DatasetIndex, CliError> {
    let s = &cfg.synthetic;
    let sc = SyntheticConfig {
        seed: cfg.seed,
        clips: s.clips + s.held_out,
        frames: s.frames,
        quiescent_tail: s.quiescent_tail,
        latent_dim: cfg.latent_dim,
        rho_min: s.rho_min,
        rho_max: s.rho_max,
        noise: s.noise,
    };
    let ds = SyntheticDataset::generate(&sc)?;
    let mut files = Vec::with_capacity(sc.clips);
    for (i, (motion, clip)) in ds.motions.iter().zip(&ds.clips).enumerate() {
        let f = ClipFiles::named(&format!("clip_{i:03}"));
        write_quatseq(&out.join(&f.motion), motion)?;
        let desc: Vec<Vec<f64>> = clip.descriptors().iter().map(|d| d.0.clone()).collect();
        write_featmat(&out.join(&f.descriptors), &FeatureMatrix::from_rows(&desc)?)?;
        write_featmat(&out.join(&f.latents), &FeatureMatrix::from_rows(clip.targets())?)?;
        files.push(f);
    }
    let sys = &ds.system;
    write_json(
        &out.join(SYSTEM_FILE),
        &SystemManifest {
            seed: cfg.seed,
            latent_dim: cfg.latent_dim,
            pose_dim: POSE_DIM,
            kappa: sys.kappa(),
            damping: sys.damping(),
            mass: sys.mass(),
            coupling: (0..sys.coupling().rows()).map(|r| sys.coupling().row(r).to_vec()).collect(),
            z_ref: sys.z_ref(),
            spectral_radii: sys.spectral_radii(),
        },
    )?;
    let held_out = files.split_off(s.clips);
    let index = DatasetIndex {
        format_version: FORMAT_VERSION,
        latent_dim: cfg.latent_dim,
        pose_dim: POSE_DIM,
        z_ref: sys.z_ref().to_vec(),
        train: files,
        held_out,
    };
    write_json(&out.join(INDEX_FILE), &index)?;
    Ok(index)
}

/// Descriptors of every frame, referenced to the first frame.
pub fn motion_descriptors(seq: &RotationSequence, map: &JointGroupMap) -> Result<Vec<PoseDescriptor>, CliError> {
    if seq.frames() == 0 {
        return Err(CliError::Format("motion has no frames".into()));
    }
    let reference: Vec<Rotation> = seq.frame(0).to_vec();
    Ok(pose_descriptors(seq, map, &reference)?)
}

pub fn extract_features(motion: &Path, map: &JointGroupMap, out: &Path) -> Result<FeatureMatrix, CliError> {
    let seq = crate::format::read_quatseq(motion)?;
    let desc = motion_descriptors(&seq, map).map_err(|e| e.in_file(motion))?;
    let rows: Vec<Vec<f64>> = desc.into_iter().map(|d| d.0).collect();
    let m = FeatureMatrix::from_rows(&rows)?;
    write_featmat(out, &m)?;
    Ok(m)
}

/// Fits on the rows of all `features` files (in order) and optionally
/// writes their encodings to `latents_out`.
pub fn fit_latent_space(
    features: &[PathBuf],
    latent_dim: usize,
    epsilon: f64,
    rest_index: usize,
    out: &Path,
    latents_out: Option<&Path>,
) -> Result<LatentSpaceModel, CliError> {
    if features.is_empty() {
        return Err(CliError::Config("no feature files given".into()));
    }
    let mut rows = Vec::new();
    let mut width = None;
    for p in features {
        let m = read_featmat(p)?;
        if let Some(w) = width {
            m.expect_cols(w, "feature width").map_err(|e| e.in_file(p))?;
        }
        width = Some(m.cols);
        rows.extend(m.to_rows());
    }
    let ls = LatentSpaceModel::fit(&rows, latent_dim, epsilon, rest_index)?;
    write_latent_space(out, &ls)?;
    if let Some(path) = latents_out {
        let z = rows.iter().map(|f| ls.encode(f)).collect::<Result<Vec<_>, _>>()?;
        write_featmat(path, &FeatureMatrix::from_rows(&z)?)?;
    }
    Ok(ls)
}

/// Outcome of `train`.
#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
    pub epochs_done: usize,
    pub final_loss: Option<f64>,
}

fn check_resumable(cfg: &RunConfig, ckpt: &Checkpoint, latent_dim: usize) -> Result<(), CliError> {
    let t = &ckpt.trainer;
    let mut shape = cfg.shape();
    shape.latent_dim = latent_dim;
    let mismatch = |what: &str| CliError::Config(format!("checkpoint {what} differs from the run config"));
    if t.model.shape() != shape {
        return Err(mismatch("model shape"));
    }
    if t.model.variant() != cfg.variant {
        return Err(mismatch("variant"));
    }
    if t.config != cfg.train_config() {
        return Err(mismatch("training config"));
    }
    if t.schedule != cfg.schedule() {
        return Err(mismatch("schedule"));
    }
    Ok(())
}

pub fn loss_csv(trainer: &Trainer) -> String {
    let mut s = String::from("epoch,horizon,p_tf,loss\n");
    for r in &trainer.history {
        let _ = writeln!(s, "{},{},{},{}", r.epoch, r.horizon, r.p_tf, r.loss);
    }
    s
}

/// Trains on the dataset's training split, optionally continuing from
/// `resume`, and stops after `stop_after` total epochs if given.
pub fn train(cfg: &RunConfig, resume: Option<&Path>, stop_after: Option<usize>) -> Result<TrainOutcome, CliError> {
    let dataset = Dataset::open(cfg.require(&cfg.paths.dataset, "dataset")?)?;
    let ckpt_path = cfg.require(&cfg.paths.checkpoint, "checkpoint")?.to_path_buf();
    let csv_path = cfg.paths.loss_csv.clone().unwrap_or_else(|| ckpt_path.with_extension("csv"));
    let clips = dataset.load(Split::Train)?;
    let latent_dim = dataset.index.latent_dim;
    if latent_dim != cfg.latent_dim {
        return Err(CliError::Config(format!(
            "config latent_dim {} but the dataset has {latent_dim}",
            cfg.latent_dim
        )));
    }

    let mut ckpt = match resume {
        Some(path) => {
            let c = Checkpoint::load(path)?;
            check_resumable(cfg, &c, latent_dim)?;
            c
        }
        None => {
            let model =
                DynamicsModel::initialized(cfg.shape(), cfg.variant, dataset.index.z_ref.clone(), cfg.seed, &cfg.model.init)?;
            let latent_space = cfg.paths.latent_space.as_deref().map(read_latent_space).transpose()?;
            let mut trainer = Trainer::new(model, cfg.train_config())?;
            trainer.schedule = cfg.schedule();
            Checkpoint {
                trainer,
                gains: cfg.gains,
                init: cfg.model.init,
                latent_space,
            }
        }
    };
    let until = stop_after.unwrap_or(cfg.train.epochs);
    let result = ckpt.trainer.run_until(&clips, until);
    // Keep the last good state even when an epoch diverged.
    ckpt.save(&ckpt_path)?;
    write_file(&csv_path, loss_csv(&ckpt.trainer).as_bytes())?;
    result?;
    Ok(TrainOutcome {
        checkpoint: ckpt_path,
        loss_csv: csv_path,
        epochs_done: ckpt.trainer.epochs_done(),
        final_loss: ckpt.trainer.history.last().map(|r| r.loss),
    })
}

/// Descriptors from either a motion (`.quatseq`) or a descriptor `.featmat`.
pub fn load_driving_signal(path: &Path, map: &JointGroupMap) -> Result<Vec<PoseDescriptor>, CliError> {
    let bytes = read_file(path)?;
    if bytes.starts_with(QUATSEQ_MAGIC) {
        let seq = decode_quatseq(&bytes).map_err(|e| e.in_file(path))?;
        motion_descriptors(&seq, map).map_err(|e| e.in_file(path))
    } else {
        let m = FeatureMatrix::from_bytes(&bytes).map_err(|e| e.in_file(path))?;
        Ok(m.to_rows().into_iter().map(PoseDescriptor).collect())
    }
}

/// `--init-latent` file: one row sets `z₀` (at rest), a second row sets `v₀`.
pub fn load_init_state(path: &Path, latent_dim: usize) -> Result<LatentState, CliError> {
    let m = read_featmat(path)?;
    m.expect_cols(latent_dim, "initial latent width").map_err(|e| e.in_file(path))?;
    let rows = m.to_rows();
    match rows.len() {
        1 => Ok(LatentState::at_rest(rows[0].clone())),
        2 => Ok(LatentState::new(rows[0].clone(), rows[1].clone())?),
        n => Err(CliError::Format(format!("{}: initial latent needs 1 or 2 rows, found {n}", path.display()))),
    }
}

/// Rows are `[z_t; v_t]` after each driving frame.
pub fn trajectory_matrix(states: &[LatentState]) -> Result<FeatureMatrix, CliError> {
    let rows: Vec<Vec<f64>> = states.iter().map(|s| [s.z.as_slice(), s.v.as_slice()].concat()).collect();
    FeatureMatrix::from_rows(&rows)
}

#[derive(Debug, Clone, Default)]
pub struct RolloutOptions {
    pub pose_gain: Option<f64>,
    pub damp_gain: Option<f64>,
    pub spring_gain: Option<f64>,
    pub init_latent: Option<PathBuf>,
    pub variant: Option<Variant>,
}

impl RolloutOptions {
    /// Flags over the checkpoint's stored gains.
    pub fn gains(&self, base: ForceGains) -> ForceGains {
        ForceGains {
            pose: self.pose_gain.unwrap_or(base.pose),
            damp: self.damp_gain.unwrap_or(base.damp),
            spring: self.spring_gain.unwrap_or(base.spring),
        }
    }
}

pub fn rollout_cmd(
    checkpoint: &Path,
    motion: &Path,
    map: &JointGroupMap,
    opts: &RolloutOptions,
    out: &Path,
) -> Result<FeatureMatrix, CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let mut model = ckpt.trainer.model;
    if let Some(v) = opts.variant {
        model.set_variant(v);
    }
    let descriptors = load_driving_signal(motion, map)?;
    let init = match &opts.init_latent {
        Some(p) => load_init_state(p, model.latent_dim())?,
        None => LatentState::at_rest(model.z_ref().to_vec()),
    };
    let states = rollout(&model, &descriptors, &init, &opts.gains(ckpt.gains))?;
    let m = trajectory_matrix(&states)?;
    write_featmat(out, &m)?;
    Ok(m)
}

/// Terminal distance to rest after the driving motion stops.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestReturn {
    pub clips: usize,
    /// Mean `‖z − z_ref‖` at the first frame of the quiescent tail.
    pub at_cessation: f64,
    /// Mean `‖z − z_ref‖` at the last frame.
    pub terminal: f64,
    /// Mean per-clip `terminal / at_cessation`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonMse {
    pub horizon: usize,
    /// `None` when no clip is long enough.
    pub mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub clips: usize,
    /// Mean per-dimension variance of the targets.
    pub target_variance: f64,
    pub teacher_forced_mse: f64,
    pub free_rollout_mse: Vec<HorizonMse>,
    pub rest_return: Option<RestReturn>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub steps: usize,
    pub seconds: f64,
    pub ms_per_step: f64,
}

/// `metrics` is deterministic; `timing` is wall-clock and kept apart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub metrics: Metrics,
    pub timing: Timing,
}

/// First frame from which every descriptor is zero, if that leaves at
/// least one moving frame before it.
pub fn quiescence_start(descriptors: &[PoseDescriptor]) -> Option<usize> {
    let moving = descriptors.iter().rposition(|d| d.0.iter().any(|&x| x != 0.0))?;
    (moving + 1 < descriptors.len()).then_some(moving + 1)
}

/// Free rollout of a whole clip from the state at frame 1; entry `k` is
/// frame `k + 2`.
pub fn clip_rollout<M: ForceModel>(model: &M, clip: &TrainingClip, gains: &ForceGains) -> Result<Vec<LatentState>, CliError> {
    if clip.len() < 3 {
        return Err(CliError::Format(format!("clip of {} frames is too short to roll out", clip.len())));
    }
    let init = LatentState::new(clip.targets()[1].clone(), clip.target_velocity(1, model.dt()))?;
    Ok(rollout(model, &clip.descriptors()[2..], &init, gains)?)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Rest return of one clip as `(at cessation, terminal)`, if it has a
/// quiescent tail starting at frame 2 or later.
pub fn rest_return_of(states: &[LatentState], clip: &TrainingClip, z_ref: &[f64]) -> Option<(f64, f64)> {
    let c = quiescence_start(clip.descriptors())?;
    if c < 2 {
        return None;
    }
    let at = distance(&states[c - 2].z, z_ref);
    let end = distance(&states.last()?.z, z_ref);
    Some((at, end))
}

fn target_variance(clips: &[TrainingClip]) -> f64 {
    let d = clips[0].latent_dim();
    let n = clips.iter().map(TrainingClip::len).sum::<usize>() as f64;
    let mut mean = vec![0.0; d];
    for z in clips.iter().flat_map(|c| c.targets()) {
        mean.iter_mut().zip(z).for_each(|(m, x)| *m += x / n);
    }
    let mut var = 0.0;
    for z in clips.iter().flat_map(|c| c.targets()) {
        var += z.iter().zip(&mean).map(|(x, m)| (x - m) * (x - m)).sum::<f64>();
    }
    var / (n * d as f64)
}

/// Mean free-rollout MSE over non-overlapping windows starting at frame 1.
pub fn mean_free_mse<M: ForceModel>(model: &M, clips: &[TrainingClip], horizon: usize) -> Result<Option<f64>, CliError> {
    let (mut sum, mut count) = (0.0, 0usize);
    for clip in clips {
        let mut start = 1;
        while start + horizon < clip.len() {
            sum += free_rollout_mse(model, clip, start, horizon)?;
            count += 1;
            start += horizon;
        }
    }
    Ok((count > 0).then(|| sum / count as f64))
}

pub fn evaluate<M: ForceModel>(model: &M, clips: &[TrainingClip], gains: &ForceGains) -> Result<EvalReport, CliError> {
    if clips.is_empty() {
        return Err(CliError::Config("no clips to evaluate".into()));
    }
    let mut tf = 0.0;
    for c in clips {
        tf += teacher_forced_mse(model, c)?;
    }
    let free = EVAL_HORIZONS
        .iter()
        .map(|&h| Ok(HorizonMse { horizon: h, mse: mean_free_mse(model, clips, h)? }))
        .collect::<Result<Vec<_>, CliError>>()?;

    let (mut steps, mut seconds) = (0usize, 0.0);
    let mut rest = Vec::new();
    for c in clips {
        let t0 = Instant::now();
        let states = clip_rollout(model, c, gains)?;
        seconds += t0.elapsed().as_secs_f64();
        steps += states.len();
        rest.extend(rest_return_of(&states, c, model.z_ref()));
    }
    let rest_return = (!rest.is_empty()).then(|| {
        let n = rest.len() as f64;
        RestReturn {
            clips: rest.len(),
            at_cessation: rest.iter().map(|r| r.0).sum::<f64>() / n,
            terminal: rest.iter().map(|r| r.1).sum::<f64>() / n,
            ratio: rest.iter().map(|r| if r.0 > 0.0 { r.1 / r.0 } else { 0.0 }).sum::<f64>() / n,
        }
    });
    Ok(EvalReport {
        metrics: Metrics {
            clips: clips.len(),
            target_variance: target_variance(clips),
            teacher_forced_mse: tf / clips.len() as f64,
            free_rollout_mse: free,
            rest_return,
        },
        timing: Timing { steps, seconds, ms_per_step: if steps > 0 { 1e3 * seconds / steps as f64 } else { 0.0 } },
    })
}

pub fn eval_cmd(checkpoint: &Path, dataset: &Path, split: Split, out: Option<&Path>) -> Result<EvalReport, CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let ds = Dataset::open(dataset)?;
    let clips = ds.load(split)?;
    let report = evaluate(ckpt.model(), &clips, &ckpt.gains)?;
    if let Some(p) = out {
        write_json(p, &report)?;
    }
    Ok(report)
}
