//! Curriculum teacher-forced training of a [`DynamicsModel`].
//!
//! One epoch is one batch: `batch_size` windows are sampled, their rollout
//! losses are differentiated through time, and Adam takes a single step on
//! the batch-mean gradient.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{model_step_graph, DynamicsModel, ForceGains, ForceModel};
use crate::error::{Error, Result};
use crate::neural::{Adam, Eager, Gradients, Graph, Tape};
use crate::pose_features::PoseDescriptor;

/// Windows per parallel work unit. Gradients are summed sequentially
/// within a chunk and chunk sums are added in order, so results do not
/// depend on the thread count.
const GRADIENT_CHUNK: usize = 8;

/// Target latents with their frame-aligned driving descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingClip {
    targets: Vec<Vec<f64>>,
    descriptors: Vec<PoseDescriptor>,
}

impl TrainingClip {
    pub fn new(targets: Vec<Vec<f64>>, descriptors: Vec<PoseDescriptor>) -> Result<Self> {
        if targets.len() != descriptors.len() {
            return Err(Error::Dimension(format!(
                "clip has {} targets but {} descriptors",
                targets.len(),
                descriptors.len()
            )));
        }
        if targets.len() < 2 {
            return Err(Error::InvalidInput(format!("clip needs at least 2 frames, got {}", targets.len())));
        }
        let d = targets[0].len();
        let p = descriptors[0].0.len();
        if d == 0 || p == 0 {
            return Err(Error::Dimension("clip has zero-width latents or descriptors".into()));
        }
        for (t, (z, f)) in targets.iter().zip(&descriptors).enumerate() {
            if z.len() != d || f.0.len() != p {
                return Err(Error::Dimension(format!("frame {t} has latent width {} and descriptor width {}", z.len(), f.0.len())));
            }
            if !z.iter().chain(&f.0).all(|x| x.is_finite()) {
                return Err(Error::InvalidInput(format!("frame {t} contains a non-finite value")));
            }
        }
        Ok(TrainingClip { targets, descriptors })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn latent_dim(&self) -> usize {
        self.targets[0].len()
    }

    pub fn pose_dim(&self) -> usize {
        self.descriptors[0].0.len()
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn descriptors(&self) -> &[PoseDescriptor] {
        &self.descriptors
    }

    /// `(z*ₜ − z*ₜ₋₁) / dt` for `t ≥ 1`.
    pub fn target_velocity(&self, t: usize, dt: f64) -> Vec<f64> {
        self.targets[t].iter().zip(&self.targets[t - 1]).map(|(a, b)| (a - b) / dt).collect()
    }
}

/// `horizon` predicted steps after the state at frame `start`.
///
/// The initial state is `(z*_start, z*_start − z*_{start−1})`, so
/// `start ≥ 1`; step `k` predicts frame `start + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub horizon: usize,
}

impl Window {
    pub fn check(&self, clip_len: usize) -> Result<()> {
        if self.start == 0 || self.horizon == 0 || self.start + self.horizon >= clip_len {
            return Err(Error::InvalidInput(format!(
                "window starting at {} with horizon {} does not fit a {clip_len}-frame clip",
                self.start, self.horizon
            )));
        }
        Ok(())
    }
}

/// Linear curriculum over the horizon and teacher-forcing probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumSchedule {
    pub horizon_start: usize,
    pub horizon_end: usize,
    pub tf_start: f64,
    pub tf_end: f64,
    pub total_epochs: usize,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        CurriculumSchedule { horizon_start: 4, horizon_end: 50, tf_start: 0.9, tf_end: 0.02, total_epochs: 1500 }
    }
}

impl CurriculumSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_start == 0 || self.horizon_end < self.horizon_start {
            return Err(Error::Config(format!(
                "horizon must start at 1 or more and not shrink ({} -> {})",
                self.horizon_start, self.horizon_end
            )));
        }
        let prob = 0.0..=1.0;
        if !prob.contains(&self.tf_start) || !prob.contains(&self.tf_end) || self.tf_end > self.tf_start {
            return Err(Error::Config(format!(
                "teacher forcing must be a probability that does not grow ({} -> {})",
                self.tf_start, self.tf_end
            )));
        }
        Ok(())
    }

    /// `(horizon, p_tf)` at `epoch`: both interpolate linearly with
    /// `epoch / (total_epochs − 1)`, the horizon rounded down.
    pub fn schedule_at(&self, epoch: usize) -> Result<(usize, f64)> {
        if epoch >= self.total_epochs {
            return Err(Error::Config(format!("epoch {epoch} outside schedule of {} epochs", self.total_epochs)));
        }
        if self.total_epochs == 1 {
            return Ok((self.horizon_start, self.tf_start));
        }
        let frac = epoch as f64 / (self.total_epochs - 1) as f64;
        let span = (self.horizon_end - self.horizon_start) as f64;
        let horizon = self.horizon_start + (span * frac).floor() as usize;
        let p_tf = self.tf_start * (1.0 - frac) + self.tf_end * frac;
        Ok((horizon, p_tf))
    }
}

/// State a forced step resets the velocity to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcedVelocity {
    /// `(z*ₜ − z*ₜ₋₁) / Δt`.
    #[default]
    Target,
    /// Keep the velocity the model propagated.
    Propagated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub forced_velocity: ForcedVelocity,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 1500, batch_size: 256, lr: 5e-5, seed: 0, forced_velocity: ForcedVelocity::Target }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "epochs, batch_size and lr must be positive (got {}, {}, {})",
                self.epochs, self.batch_size, self.lr
            )));
        }
        Ok(())
    }

    /// The schedule spanning this config's epochs.
    pub fn schedule(&self) -> CurriculumSchedule {
        CurriculumSchedule { total_epochs: self.epochs, ..CurriculumSchedule::default() }
    }
}

/// `mean((a − b)²)` over all entries.
pub fn mse(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Dimension(format!("{} predictions for {} targets", pred.len(), target.len())));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, t) in pred.iter().zip(target) {
        if p.len() != t.len() {
            return Err(Error::Dimension(format!("prediction width {} vs target width {}", p.len(), t.len())));
        }
        sum += p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        n += p.len();
    }
    Ok(sum / n as f64)
}

/// Per-step teacher-forcing decisions for a window.
pub fn draw_forcing(rng: &mut impl Rng, horizon: usize, p_tf: f64) -> Vec<bool> {
    (0..horizon).map(|_| rng.random::<f64>() < p_tf).collect()
}

/// Window loss on a graph. After step `k` is measured, the propagated state
/// is replaced by the target when `forcing[k]` is set.
pub fn window_loss_graph<M: ForceModel, G: Graph>(
    model: &M,
    g: &mut G,
    clip: &TrainingClip,
    window: Window,
    forcing: &[bool],
    forced_velocity: ForcedVelocity,
) -> Result<G::Var> {
    window.check(clip.len())?;
    if forcing.len() != window.horizon {
        return Err(Error::Dimension(format!("{} forcing flags for horizon {}", forcing.len(), window.horizon)));
    }
    if clip.latent_dim() != model.latent_dim() || clip.pose_dim() != model.pose_dim() {
        return Err(Error::Dimension(format!(
            "clip widths ({}, {}) do not match model ({}, {})",
            clip.latent_dim(),
            clip.pose_dim(),
            model.latent_dim(),
            model.pose_dim()
        )));
    }
    let dt = model.dt();
    let gains = ForceGains::default();
    let z_ref = g.constant(model.z_ref().to_vec());
    let s = window.start;
    let mut z = g.constant(clip.targets[s].clone());
    let mut v = g.constant(clip.target_velocity(s, dt));
    let mut total: Option<G::Var> = None;
    for (k, &forced) in forcing.iter().enumerate() {
        let t = s + 1 + k;
        let (zn, vn) = model_step_graph(model, g, clip.descriptors[t].as_slice(), &z, &v, &gains, &z_ref)?;
        let target = g.constant(clip.targets[t].clone());
        let diff = g.sub(&zn, &target)?;
        let sq = g.mul(&diff, &diff)?;
        let step_sum = g.sum(&sq);
        total = Some(match total {
            None => step_sum,
            Some(acc) => g.add(&acc, &step_sum)?,
        });
        if forced {
            z = target;
            v = match forced_velocity {
                ForcedVelocity::Target => g.constant(clip.target_velocity(t, dt)),
                ForcedVelocity::Propagated => vn,
            };
        } else {
            z = zn;
            v = vn;
        }
    }
    let total = total.expect("horizon is positive");
    Ok(g.scale(&total, 1.0 / (window.horizon * model.latent_dim()) as f64))
}

/// Mean squared error over the window's steps and latent dimensions, with
/// per-step teacher forcing of probability `p_tf`.
pub fn rollout_loss<M: ForceModel>(
    model: &M,
    clip: &TrainingClip,
    window: Window,
    p_tf: f64,
    rng: &mut impl Rng,
    forced_velocity: ForcedVelocity,
) -> Result<f64> {
    let forcing = draw_forcing(rng, window.horizon, p_tf);
    let mut g = Eager::new(model.params());
    let loss = window_loss_graph(model, &mut g, clip, window, &forcing, forced_velocity)?;
    Ok(loss[0])
}

/// Loss and parameter gradients of one window.
pub fn window_gradients<M: ForceModel>(
    model: &M,
    clip: &TrainingClip,
    window: Window,
    forcing: &[bool],
    forced_velocity: ForcedVelocity,
) -> Result<(f64, Gradients)> {
    let mut tape = Tape::new(model.params());
    let loss = window_loss_graph(model, &mut tape, clip, window, forcing, forced_velocity)?;
    let value = tape.value(&loss)[0];
    Ok((value, tape.backward(loss)?))
}

/// Teacher-forced one-step MSE over every predictable frame of the clip.
pub fn teacher_forced_mse<M: ForceModel>(model: &M, clip: &TrainingClip) -> Result<f64> {
    let window = Window { start: 1, horizon: clip.len() - 2 };
    let mut g = Eager::new(model.params());
    let forcing = vec![true; window.horizon];
    Ok(window_loss_graph(model, &mut g, clip, window, &forcing, ForcedVelocity::Target)?[0])
}

/// Free-running MSE of `horizon` steps after the state at `start`.
pub fn free_rollout_mse<M: ForceModel>(model: &M, clip: &TrainingClip, start: usize, horizon: usize) -> Result<f64> {
    let window = Window { start, horizon };
    let mut g = Eager::new(model.params());
    let forcing = vec![false; horizon];
    Ok(window_loss_graph(model, &mut g, clip, window, &forcing, ForcedVelocity::Target)?[0])
}

/// One row of the loss history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub horizon: usize,
    pub p_tf: f64,
    pub loss: f64,
}

/// Every `(clip, start)` pair that fits `horizon`.
pub fn valid_windows(clips: &[TrainingClip], horizon: usize) -> Vec<(usize, Window)> {
    clips
        .iter()
        .enumerate()
        .flat_map(|(c, clip)| {
            let last = clip.len().saturating_sub(horizon + 1);
            (1..=last).map(move |start| (c, Window { start, horizon }))
        })
        .collect()
}

/// Random stream for `epoch`; independent of how many epochs ran before.
/// Stream 0 is left to model initialization.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

/// Uniform draw of `batch` windows, without replacement while the pool
/// allows it.
pub fn sample_windows(rng: &mut impl Rng, pool: &[(usize, Window)], batch: usize) -> Vec<(usize, Window)> {
    let mut out = Vec::with_capacity(batch);
    while out.len() < batch {
        let take = (batch - out.len()).min(pool.len());
        out.extend(index::sample(rng, pool.len(), take).into_iter().map(|i| pool[i]));
    }
    out
}

/// Model, optimizer and history; everything needed to continue a run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: DynamicsModel,
    pub adam: Adam,
    pub config: TrainConfig,
    pub schedule: CurriculumSchedule,
    pub history: Vec<EpochRecord>,
}

impl Trainer {
    pub fn new(model: DynamicsModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let adam = Adam::new(model.params(), config.lr);
        Ok(Trainer { model, adam, schedule: config.schedule(), config, history: Vec::new() })
    }

    /// Resumes from saved optimizer state and history.
    pub fn resume(model: DynamicsModel, adam: Adam, config: TrainConfig, history: Vec<EpochRecord>) -> Result<Self> {
        config.validate()?;
        if history.len() > config.epochs {
            return Err(Error::Config(format!(
                "history has {} epochs but the run is configured for {}",
                history.len(),
                config.epochs
            )));
        }
        if adam.step_count() != history.len() as u64 {
            return Err(Error::Config(format!(
                "optimizer took {} steps but history records {} epochs",
                adam.step_count(),
                history.len()
            )));
        }
        Ok(Trainer { model, adam, schedule: config.schedule(), config, history })
    }

    pub fn epochs_done(&self) -> usize {
        self.history.len()
    }

    pub fn is_finished(&self) -> bool {
        self.epochs_done() >= self.config.epochs
    }

    /// Runs the next epoch and returns its record.
    pub fn run_epoch(&mut self, clips: &[TrainingClip]) -> Result<EpochRecord> {
        let epoch = self.epochs_done();
        let (horizon, p_tf) = self.schedule.schedule_at(epoch)?;
        let pool = valid_windows(clips, horizon);
        if pool.is_empty() {
            return Err(Error::Config(format!("no clip is long enough for a horizon-{horizon} window")));
        }
        let mut rng = epoch_rng(self.config.seed, epoch);
        let batch: Vec<(usize, Window, Vec<bool>)> = sample_windows(&mut rng, &pool, self.config.batch_size)
            .into_iter()
            .map(|(c, w)| (c, w, draw_forcing(&mut rng, w.horizon, p_tf)))
            .collect();

        let model = &self.model;
        let fv = self.config.forced_velocity;
        let partials: Vec<(f64, Gradients)> = batch
            .par_chunks(GRADIENT_CHUNK)
            .map(|chunk| -> Result<(f64, Gradients)> {
                let mut loss = 0.0;
                let mut acc = Gradients::empty(model.params().len());
                for (c, w, forcing) in chunk {
                    let (l, g) = window_gradients(model, &clips[*c], *w, forcing, fv)?;
                    loss += l;
                    acc.accumulate(&g)?;
                }
                Ok((loss, acc))
            })
            .collect::<Result<_>>()?;

        let mut loss = 0.0;
        let mut grads = Gradients::empty(model.params().len());
        for (l, g) in &partials {
            loss += l;
            grads.accumulate(g)?;
        }
        let n = batch.len() as f64;
        loss /= n;
        grads.scale(1.0 / n);
        if !loss.is_finite() || !grads.max_abs().is_finite() {
            return Err(Error::Divergence { step: epoch, reason: format!("training loss became non-finite at epoch {epoch}") });
        }
        self.adam.step(self.model.params_mut(), &grads)?;
        let record = EpochRecord { epoch, horizon, p_tf, loss };
        self.history.push(record);
        Ok(record)
    }

    /// Trains until `until` epochs are done (capped at the configured total).
    pub fn run_until(&mut self, clips: &[TrainingClip], until: usize) -> Result<()> {
        let until = until.min(self.config.epochs);
        while self.epochs_done() < until {
            self.run_epoch(clips)?;
        }
        Ok(())
    }
}

/// Trains a fresh optimizer for `config.epochs` epochs.
pub fn train(model: DynamicsModel, clips: &[TrainingClip], config: TrainConfig) -> Result<(DynamicsModel, Vec<EpochRecord>)> {
    if clips.is_empty() {
        return Err(Error::Config("training needs at least one clip".into()));
    }
    let mut trainer = Trainer::new(model, config)?;
    trainer.run_until(clips, config.epochs)?;
    Ok((trainer.model, trainer.history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step, HeadInit, ModelShape, Variant};
    use crate::oracle::{gen_pose_signal, motion_descriptors, simulate, SyntheticSystem};
    use crate::pose_features::{state_feature, POSE_DIM};

    fn tiny_model(seed: u64) -> DynamicsModel {
        let shape = ModelShape { latent_dim: 3, pose_dim: POSE_DIM, hidden_width: 8, hidden_layers: 2 };
        DynamicsModel::initialized(shape, Variant::Full, vec![0.1, -0.2, 0.0], seed, &HeadInit::default()).unwrap()
    }

    fn oracle_clip(seed: u64, frames: usize) -> TrainingClip {
        let mut sys = SyntheticSystem::random(seed, 3, POSE_DIM, 0.85, 0.97).unwrap();
        sys = sys.with_coupling_scaled(&[3.0; 3]).unwrap();
        simulate(&sys, &motion_descriptors(&gen_pose_signal(seed, frames, 10.min(frames / 2)).unwrap()).unwrap(), None).unwrap()
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let s = CurriculumSchedule::default();
        assert_eq!(s.schedule_at(0).unwrap(), (4, 0.9));
        assert_eq!(s.schedule_at(1499).unwrap(), (50, 0.02));
        let (h, p) = s.schedule_at(750).unwrap();
        assert_eq!(h, 27);
        assert!((p - 0.46).abs() < 1e-3);
        assert!(s.schedule_at(1500).is_err());
        let one = CurriculumSchedule { total_epochs: 1, ..s };
        assert_eq!(one.schedule_at(0).unwrap(), (4, 0.9));
    }

    #[test]
    fn schedule_is_monotone() {
        for total in [2, 7, 300, 1500] {
            let s = CurriculumSchedule { total_epochs: total, ..Default::default() };
            let mut prev = s.schedule_at(0).unwrap();
            for e in 1..total {
                let cur = s.schedule_at(e).unwrap();
                assert!(cur.0 >= prev.0 && cur.1 <= prev.1);
                prev = cur;
            }
            assert_eq!(prev, (50, 0.02));
        }
    }

    #[test]
    fn mse_arithmetic() {
        assert_eq!(mse(&[vec![1.0], vec![2.0]], &[vec![0.0], vec![0.0]]).unwrap(), 2.5);
        assert!(mse(&[vec![1.0]], &[vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn clip_validation() {
        let d = PoseDescriptor(vec![0.0; 2]);
        assert!(TrainingClip::new(vec![vec![0.0]], vec![d.clone()]).is_err());
        assert!(TrainingClip::new(vec![vec![0.0]; 3], vec![d.clone(); 2]).is_err());
        assert!(TrainingClip::new(vec![vec![0.0], vec![f64::NAN]], vec![d.clone(); 2]).is_err());
        assert!(TrainingClip::new(vec![vec![0.0], vec![0.0, 1.0]], vec![d.clone(); 2]).is_err());
        assert!(TrainingClip::new(vec![vec![0.0]; 2], vec![d; 2]).is_ok());
    }

    #[test]
    fn window_bounds() {
        let clip = oracle_clip(1, 20);
        let model = tiny_model(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let fv = ForcedVelocity::Target;
        assert!(rollout_loss(&model, &clip, Window { start: 0, horizon: 2 }, 0.5, &mut rng, fv).is_err());
        assert!(rollout_loss(&model, &clip, Window { start: 18, horizon: 2 }, 0.5, &mut rng, fv).is_err());
        assert!(rollout_loss(&model, &clip, Window { start: 17, horizon: 2 }, 0.5, &mut rng, fv).is_ok());
        assert_eq!(valid_windows(std::slice::from_ref(&clip), 2).len(), 17);
        assert!(valid_windows(std::slice::from_ref(&clip), 19).is_empty());
    }

    #[test]
    fn exact_model_has_zero_loss() {
        let mut sys = SyntheticSystem::random(2, 3, POSE_DIM, 0.85, 0.97).unwrap();
        sys = sys.with_coupling_scaled(&[2.0; 3]).unwrap();
        let descs = motion_descriptors(&gen_pose_signal(3, 60, 5).unwrap()).unwrap();
        // Start the clip from an exact state so finite differences are the true velocity.
        let clip = simulate(&sys, &descs, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [0.0, 0.5, 1.0] {
            let loss = rollout_loss(&sys, &clip, Window { start: 5, horizon: 30 }, p, &mut rng, ForcedVelocity::Target).unwrap();
            assert!(loss < 1e-24, "{loss}");
        }
        assert!(teacher_forced_mse(&sys, &clip).unwrap() < 1e-24);
    }

    #[test]
    fn full_forcing_is_one_step_regression() {
        let clip = oracle_clip(4, 40);
        let model = tiny_model(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let window = Window { start: 3, horizon: 10 };
        let loss = rollout_loss(&model, &clip, window, 1.0, &mut rng, ForcedVelocity::Target).unwrap();
        let mut preds = Vec::new();
        for t in 4..14 {
            let z = clip.targets()[t - 1].clone();
            let v = clip.target_velocity(t - 1, 1.0);
            let sf = state_feature(&z, &v).unwrap();
            let f = model.predict_forces(&clip.descriptors()[t], &sf).unwrap();
            let s = step(&crate::dynamics::LatentState { z, v }, &f, &ForceGains::default(), model.z_ref(), 1.0).unwrap();
            preds.push(s.z);
        }
        let direct = mse(&preds, &clip.targets()[4..14]).unwrap();
        assert!((loss - direct).abs() < 1e-12);
    }

    #[test]
    fn forcing_does_not_change_the_measured_step() {
        let clip = oracle_clip(5, 30);
        let model = tiny_model(5);
        let w = Window { start: 2, horizon: 1 };
        let store = model.params().clone();
        let mut g = Eager::new(&store);
        let a = window_loss_graph(&model, &mut g, &clip, w, &[true], ForcedVelocity::Target).unwrap();
        let b = window_loss_graph(&model, &mut g, &clip, w, &[false], ForcedVelocity::Target).unwrap();
        assert_eq!(a, b);
        // Longer windows: the first step is measured identically either way.
        let w = Window { start: 2, horizon: 4 };
        let fv = ForcedVelocity::Propagated;
        let x = window_loss_graph(&model, &mut g, &clip, w, &[true, false, false, false], fv).unwrap()[0];
        let y = window_loss_graph(&model, &mut g, &clip, w, &[false; 4], fv).unwrap()[0];
        assert_ne!(x, y);
        assert!(x >= 0.0 && y >= 0.0);
    }

    #[test]
    fn zero_epochs_rejected_and_training_is_deterministic() {
        let clips = vec![oracle_clip(6, 60), oracle_clip(7, 60)];
        let cfg = TrainConfig { epochs: 4, batch_size: 5, lr: 1e-3, seed: 9, ..Default::default() };
        let (a, ha) = train(tiny_model(1), &clips, cfg).unwrap();
        let (b, hb) = train(tiny_model(1), &clips, cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        assert_eq!(ha.len(), 4);
        assert_ne!(a, tiny_model(1));
        assert!(Trainer::new(tiny_model(1), TrainConfig { epochs: 0, ..cfg }).is_err());
        let mut t = Trainer::new(tiny_model(1), cfg).unwrap();
        t.run_until(&clips, 0).unwrap();
        assert_eq!(t.model, tiny_model(1));
    }

    #[test]
    fn resuming_matches_uninterrupted_run() {
        let clips = vec![oracle_clip(8, 60)];
        let cfg = TrainConfig { epochs: 6, batch_size: 4, lr: 1e-3, seed: 3, ..Default::default() };
        let mut full = Trainer::new(tiny_model(2), cfg).unwrap();
        full.run_until(&clips, 6).unwrap();

        let mut first = Trainer::new(tiny_model(2), cfg).unwrap();
        first.run_until(&clips, 2).unwrap();
        let mut second = Trainer::resume(first.model.clone(), first.adam.clone(), cfg, first.history.clone()).unwrap();
        second.run_until(&clips, 6).unwrap();
        assert_eq!(second.model, full.model);
        assert_eq!(second.history, full.history);
    }

    #[test]
    fn training_reduces_loss() {
        let clips = vec![oracle_clip(10, 80), oracle_clip(11, 80)];
        let cfg = TrainConfig { epochs: 60, batch_size: 16, lr: 3e-3, seed: 1, ..Default::default() };
        let before: f64 = clips.iter().map(|c| teacher_forced_mse(&tiny_model(3), c).unwrap()).sum();
        let (model, _) = train(tiny_model(3), &clips, cfg).unwrap();
        let after: f64 = clips.iter().map(|c| teacher_forced_mse(&model, c).unwrap()).sum();
        assert!(after < 0.5 * before, "{before} -> {after}");
    }

    #[test]
    fn too_short_clips_are_a_config_error() {
        let clips = vec![oracle_clip(12, 6)];
        let cfg = TrainConfig { epochs: 2, batch_size: 2, ..Default::default() };
        assert!(matches!(train(tiny_model(1), &clips, cfg), Err(Error::Config(_))));
    }

    #[test]
    fn sampling_without_replacement_when_possible() {
        let pool: Vec<(usize, Window)> = (1..=10).map(|s| (0, Window { start: s, horizon: 1 })).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut got = sample_windows(&mut rng, &pool, 10);
        got.sort_by_key(|(_, w)| w.start);
        assert_eq!(got, pool);
        assert_eq!(sample_windows(&mut rng, &pool, 25).len(), 25);
    }
}
