//! Synthetic ground truth: a constant-coefficient spring-damper system
//! driven by generated joint motion, plus closed-form references for its
//! linear recurrence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{rollout, ForceGains, ForceModel, Forces, LatentState, Variant};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neural::{Graph, ParamStore};
use crate::pose_features::{pose_descriptors, JointGroupMap, PoseDescriptor, POSE_DIM};
use crate::so3::{exp_map, AxisAngle, Rotation, RotationSequence};
use crate::training::TrainingClip;

/// Joints in generated motion (SMPL body layout).
pub const SYNTHETIC_JOINTS: usize = 24;

/// A 2×2 matrix acting on `(z − z_ref, v)`.
pub type Transition = [[f64; 2]; 2];

/// One-step map of a single latent dimension with `g = 0`.
pub fn transition_matrix(kappa: f64, damping: f64, mass: f64, dt: f64) -> Result<Transition> {
    if !(mass > 0.0) {
        return Err(Error::InvalidInput(format!("mass must be positive, got {mass}")));
    }
    let k = kappa / mass;
    let c = damping / mass;
    let keep = 1.0 - dt * c;
    Ok([[1.0 - dt * dt * k, dt * keep], [-dt * k, keep]])
}

/// Largest eigenvalue modulus, from the trace and determinant.
pub fn spectral_radius(m: &Transition) -> f64 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = 0.25 * tr * tr - det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        (0.5 * tr + r).abs().max((0.5 * tr - r).abs())
    } else {
        // Complex pair: |λ|² = det.
        det.sqrt()
    }
}

fn mat_mul(a: &Transition, b: &Transition) -> Transition {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `mᵏ` by repeated squaring.
pub fn matrix_power(m: &Transition, mut k: u64) -> Transition {
    let mut out = [[1.0, 0.0], [0.0, 1.0]];
    let mut base = *m;
    while k > 0 {
        if k & 1 == 1 {
            out = mat_mul(&out, &base);
        }
        base = mat_mul(&base, &base);
        k >>= 1;
    }
    out
}

/// `(d, v)` after `k` unforced steps from `(d0, v0)`, for `k = 1..=steps`.
pub fn power_trajectory(m: &Transition, d0: f64, v0: f64, steps: usize) -> Vec<(f64, f64)> {
    (1..=steps as u64)
        .map(|k| {
            let p = matrix_power(m, k);
            (p[0][0] * d0 + p[0][1] * v0, p[1][0] * d0 + p[1][1] * v0)
        })
        .collect()
}

/// Known linear system. Per dimension the coefficients are constant; the
/// driving force is `W_pose · f_pose`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSystem {
    kappa: Vec<f64>,
    damping: Vec<f64>,
    mass: Vec<f64>,
    coupling: Matrix,
    z_ref: Vec<f64>,
    empty: ParamStore,
}

impl SyntheticSystem {
    pub fn new(kappa: Vec<f64>, damping: Vec<f64>, mass: Vec<f64>, coupling: Matrix, z_ref: Vec<f64>) -> Result<Self> {
        let n = z_ref.len();
        if n == 0 || kappa.len() != n || damping.len() != n || mass.len() != n || coupling.rows() != n {
            return Err(Error::Dimension(format!(
                "system coefficients must all have the latent dimension {n} (kappa {}, damping {}, mass {}, coupling rows {})",
                kappa.len(),
                damping.len(),
                mass.len(),
                coupling.rows()
            )));
        }
        for i in 0..n {
            if !(kappa[i] > 0.0 && damping[i] > 0.0 && mass[i] > 0.0) {
                return Err(Error::InvalidInput(format!("coefficients of dimension {i} must be positive")));
            }
            let rho = spectral_radius(&transition_matrix(kappa[i], damping[i], mass[i], 1.0)?);
            if rho >= 1.0 {
                return Err(Error::InvalidInput(format!("dimension {i} is not stable (spectral radius {rho})")));
            }
        }
        Ok(SyntheticSystem { kappa, damping, mass, coupling, z_ref, empty: ParamStore::new() })
    }

    /// Random stable system whose per-dimension spectral radii lie in
    /// `[rho_lo, rho_hi]`, with oscillatory (complex) eigenvalues.
    pub fn random(seed: u64, latent_dim: usize, pose_dim: usize, rho_lo: f64, rho_hi: f64) -> Result<Self> {
        if !(0.0 < rho_lo && rho_lo <= rho_hi && rho_hi < 1.0) {
            return Err(Error::Config(format!("spectral radius range [{rho_lo}, {rho_hi}] must lie inside (0, 1)")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut kappa, mut damping, mut mass) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..latent_dim {
            let rho: f64 = rng.random_range(rho_lo..=rho_hi);
            let m: f64 = rng.random_range(0.5..2.0);
            // det M = 1 − c/m = ρ² for a complex pair, which needs κ/m > (1 − ρ)².
            let c_over_m = 1.0 - rho * rho;
            let floor = (1.0 - rho) * (1.0 - rho);
            let k_over_m: f64 = rng.random_range(floor.max(0.05)..(floor.max(0.05) + 0.25));
            kappa.push(k_over_m * m);
            damping.push(c_over_m * m);
            mass.push(m);
        }
        let normal = Normal::new(0.0, 1.0 / (pose_dim as f64).sqrt()).expect("valid std");
        let coupling = Matrix::from_vec(latent_dim, pose_dim, (0..latent_dim * pose_dim).map(|_| normal.sample(&mut rng)).collect())?;
        let z_ref = (0..latent_dim).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        Self::new(kappa, damping, mass, coupling, z_ref)
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn damping(&self) -> &[f64] {
        &self.damping
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn coupling(&self) -> &Matrix {
        &self.coupling
    }

    pub fn transition(&self, dim: usize) -> Transition {
        transition_matrix(self.kappa[dim], self.damping[dim], self.mass[dim], 1.0).expect("mass checked positive")
    }

    /// Per-dimension spectral radii.
    pub fn spectral_radii(&self) -> Vec<f64> {
        (0..self.latent_dim()).map(|i| spectral_radius(&self.transition(i))).collect()
    }

    /// Same system with row `i` of the coupling multiplied by `scale[i]`.
    pub fn with_coupling_scaled(&self, scale: &[f64]) -> Result<Self> {
        if scale.len() != self.latent_dim() {
            return Err(Error::Dimension(format!("{} row scales for {} rows", scale.len(), self.latent_dim())));
        }
        let mut coupling = self.coupling.clone();
        for (i, s) in scale.iter().enumerate() {
            coupling.row_mut(i).iter_mut().for_each(|w| *w *= s);
        }
        Self::new(self.kappa.clone(), self.damping.clone(), self.mass.clone(), coupling, self.z_ref.clone())
    }
}

impl ForceModel for SyntheticSystem {
    fn latent_dim(&self) -> usize {
        self.z_ref.len()
    }

    fn pose_dim(&self) -> usize {
        self.coupling.cols()
    }

    fn z_ref(&self) -> &[f64] {
        &self.z_ref
    }

    fn dt(&self) -> f64 {
        1.0
    }

    fn variant(&self) -> Variant {
        Variant::Full
    }

    fn params(&self) -> &ParamStore {
        &self.empty
    }

    fn forces<G: Graph>(&self, g: &mut G, input: &G::Var) -> Result<Forces<G::Var>> {
        let pose = &g.value(input)[..self.pose_dim()];
        let drive = self.coupling.matvec(pose)?;
        Ok(Forces {
            g: g.constant(drive),
            kappa: Some(g.constant(self.kappa.clone())),
            damping: Some(g.constant(self.damping.clone())),
            mass: Some(g.constant(self.mass.clone())),
        })
    }
}

/// Optional i.i.d. Gaussian noise on generated targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationNoise {
    pub sigma: f64,
    pub seed: u64,
}

/// Runs the system from `(z_ref, 0)` over `descriptors`.
pub fn simulate(sys: &SyntheticSystem, descriptors: &[PoseDescriptor], noise: Option<ObservationNoise>) -> Result<TrainingClip> {
    let init = LatentState::at_rest(sys.z_ref.clone());
    let traj = rollout(sys, descriptors, &init, &ForceGains::default())?;
    let mut targets: Vec<Vec<f64>> = traj.into_iter().map(|s| s.z).collect();
    if let Some(n) = noise {
        if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
            return Err(Error::Config(format!("noise sigma must be finite and non-negative, got {}", n.sigma)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
        for z in targets.iter_mut().flatten() {
            *z += n.sigma * rng.sample::<f64, _>(StandardNormal);
        }
    }
    TrainingClip::new(targets, descriptors.to_vec())
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Generated joint motion: each joint is a fixed base pose composed with a
/// sum of sinusoidal axis-angle curves. The curves fade in from the base
/// pose at frame 0 and fade out to it at frame `frames − quiescent_tail`,
/// after which the sequence is exactly the base pose.
pub fn gen_pose_signal(seed: u64, frames: usize, quiescent_tail: usize) -> Result<RotationSequence> {
    if quiescent_tail >= frames {
        return Err(Error::InvalidInput(format!("quiescent tail {quiescent_tail} must be shorter than {frames} frames")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let moving = frames - quiescent_tail;
    let ramp = (moving / 4).min(60) as f64;

    struct Component {
        axis: [f64; 3],
        amplitude: f64,
        period: f64,
        phase: f64,
    }
    let unit = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        loop {
            let a: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
            let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            if n > 1e-6 {
                return [a[0] / n, a[1] / n, a[2] / n];
            }
        }
    };

    let mut bases = Vec::with_capacity(SYNTHETIC_JOINTS);
    let mut curves = Vec::with_capacity(SYNTHETIC_JOINTS);
    for _ in 0..SYNTHETIC_JOINTS {
        let axis = unit(&mut rng);
        let angle: f64 = rng.random_range(0.0..0.5);
        bases.push(exp_map(AxisAngle(axis).scale(angle)));
        let count = rng.random_range(2..=4usize);
        let comps: Vec<Component> = (0..count)
            .map(|_| Component {
                axis: unit(&mut rng),
                amplitude: rng.random_range(0.05..=1.0) / count as f64,
                period: rng.random_range(20.0..=200.0),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        curves.push(comps);
    }

    let mut data = Vec::with_capacity(frames * SYNTHETIC_JOINTS);
    for t in 0..frames {
        let tf = t as f64;
        let envelope = if t >= moving || ramp == 0.0 {
            0.0
        } else {
            smoothstep(tf / ramp) * smoothstep((moving as f64 - tf) / ramp)
        };
        for (base, comps) in bases.iter().zip(&curves) {
            if envelope == 0.0 {
                data.push(*base);
                continue;
            }
            let mut v = AxisAngle::ZERO;
            for c in comps {
                let s = c.amplitude * (std::f64::consts::TAU * tf / c.period + c.phase).sin();
                v = v + AxisAngle(c.axis).scale(s);
            }
            data.push(*base * exp_map(v.scale(envelope)));
        }
    }
    RotationSequence::new(frames, SYNTHETIC_JOINTS, data)
}

/// Settings for a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub clips: usize,
    pub frames: usize,
    pub quiescent_tail: usize,
    pub latent_dim: usize,
    pub rho_min: f64,
    pub rho_max: f64,
    pub noise: Option<f64>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 0,
            clips: 25,
            frames: 500,
            quiescent_tail: 0,
            latent_dim: 8,
            rho_min: 0.85,
            rho_max: 0.97,
            noise: None,
        }
    }
}

/// Clips generated by one system, with the motion that drove them.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub config: SyntheticConfig,
    pub system: SyntheticSystem,
    pub motions: Vec<RotationSequence>,
    pub clips: Vec<TrainingClip>,
}

/// Seed of clip `i`'s motion; distinct from the system seed stream.
pub fn clip_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1 + i as u64)
}

/// Descriptors of generated motion, referenced to its first frame.
pub fn motion_descriptors(seq: &RotationSequence) -> Result<Vec<PoseDescriptor>> {
    let reference: Vec<Rotation> = seq.frame(0).to_vec();
    pose_descriptors(seq, &JointGroupMap::smpl24(), &reference)
}

impl SyntheticDataset {
    /// Draws a system, generates the motion, then rescales the coupling so
    /// every latent dimension has unit standard deviation about `z_ref`
    /// across the dataset.
    pub fn generate(config: &SyntheticConfig) -> Result<Self> {
        if config.clips == 0 || config.latent_dim == 0 || config.frames < 2 {
            return Err(Error::Config("synthetic dataset needs clips ≥ 1, latent_dim ≥ 1 and frames ≥ 2".into()));
        }
        let raw = SyntheticSystem::random(config.seed, config.latent_dim, POSE_DIM, config.rho_min, config.rho_max)?;
        let motions = (0..config.clips)
            .map(|i| gen_pose_signal(clip_seed(config.seed, i), config.frames, config.quiescent_tail))
            .collect::<Result<Vec<_>>>()?;
        let descriptors = motions.iter().map(motion_descriptors).collect::<Result<Vec<_>>>()?;

        let mut sq = vec![0.0; config.latent_dim];
        let mut count = 0usize;
        for d in &descriptors {
            let clip = simulate(&raw, d, None)?;
            for z in clip.targets() {
                for (i, (zi, ri)) in z.iter().zip(&raw.z_ref).enumerate() {
                    sq[i] += (zi - ri) * (zi - ri);
                }
                count += 1;
            }
        }
        let scale: Vec<f64> = sq
            .iter()
            .map(|s| {
                let std = (s / count as f64).sqrt();
                if std > 0.0 { 1.0 / std } else { 1.0 }
            })
            .collect();
        let system = raw.with_coupling_scaled(&scale)?;

        let clips = descriptors
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let noise = config.noise.map(|sigma| ObservationNoise { sigma, seed: clip_seed(config.seed ^ 0xA5A5, i) });
                simulate(&system, d, noise)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SyntheticDataset { config: config.clone(), system, motions, clips })
    }
}
