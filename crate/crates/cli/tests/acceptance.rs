//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fail.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use latdyn::dynamics::{
    rollout, step, step_forces, DynamicsModel, ForceGains, ForceModel, ForceParams, HeadInit, LatentState, ModelShape,
    Variant,
};
use latdyn::latent_space::LatentSpaceModel;
use latdyn::linalg::Matrix;
use latdyn::neural::Eager;
use latdyn::oracle::{
    gen_pose_signal, matrix_power, motion_descriptors, simulate, spectral_radius, transition_matrix, SyntheticConfig,
    SyntheticDataset,
};
use latdyn::pose_features::{pose_descriptors, state_feature, JointGroupMap, PoseDescriptor, POSE_DIM};
use latdyn::so3::{exp_map, AxisAngle, Rotation, RotationSequence};
use latdyn::training::{
    window_gradients, window_loss_graph, ForcedVelocity, TrainConfig, Trainer, TrainingClip, Window,
};
use latdyn_cli::checkpoint::{latent_space_from_bytes, latent_space_to_bytes, Checkpoint};
use latdyn_cli::commands::{clip_rollout, evaluate, gen_synthetic, rest_return_of, train};
use latdyn_cli::config::RunConfig;
use latdyn_cli::format::{decode_quatseq, encode_quatseq, FeatureMatrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_rotation(rng: &mut ChaCha8Rng, scale: f64) -> Rotation {
    exp_map(AxisAngle::new(scale * gauss(rng), scale * gauss(rng), scale * gauss(rng)))
}

// ---------------------------------------------------------------- 1

/// Five-point central difference of the window loss in one parameter.
fn numeric_partial(model: &mut DynamicsModel, tensor: usize, index: usize, h: f64, loss: &dyn Fn(&DynamicsModel) -> f64) -> f64 {
    let orig = model.params().tensors()[tensor].data()[index];
    let mut at = |offset: f64| {
        model.params_mut().tensors_mut()[tensor].data_mut()[index] = orig + offset;
        loss(model)
    };
    let (p1, m1, p2, m2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
    model.params_mut().tensors_mut()[tensor].data_mut()[index] = orig;
    (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
}

/// Gradients below this magnitude are compared absolutely: the difference
/// quotient of a loss of size O(1) cannot resolve them relatively.
const GRADIENT_FLOOR: f64 = 1e-6;

fn gradient_fidelity() -> Outcome {
    let ds = SyntheticDataset::generate(&SyntheticConfig { seed: 21, clips: 1, frames: 40, latent_dim: 4, ..SyntheticConfig::default() })
        .unwrap();
    let clip = &ds.clips[0];
    let shape = ModelShape { latent_dim: 4, pose_dim: POSE_DIM, hidden_width: 8, hidden_layers: 4 };
    let mut model = DynamicsModel::new(shape, Variant::Full, ds.system.z_ref().to_vec(), 5).unwrap();
    let window = Window { start: 12, horizon: 5 };
    // Mixed forcing exercises both the forced and the propagated paths.
    let forcing = vec![false, true, false, false, true];
    assert_eq!(forcing.len(), window.horizon);
    let loss = |m: &DynamicsModel| {
        let mut g = Eager::new(m.params());
        window_loss_graph(m, &mut g, clip, window, &forcing, ForcedVelocity::Target).unwrap()[0]
    };
    let (_, grads) = window_gradients(&model, clip, window, &forcing, ForcedVelocity::Target).unwrap();

    let mut worst: f64 = 0.0;
    let mut count = 0;
    let shapes: Vec<usize> = model.params().tensors().iter().map(|m| m.data().len()).collect();
    for (t, &len) in shapes.iter().enumerate() {
        let analytic = grads.get(latdyn::neural::ParamId(t)).unwrap().data().to_vec();
        for (i, &a) in analytic.iter().enumerate() {
            let n = numeric_partial(&mut model, t, i, 1e-3, &loss);
            let err = (a - n).abs() / a.abs().max(n.abs()).max(GRADIENT_FLOOR);
            worst = worst.max(err);
            count += 1;
        }
        let _ = len;
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e} over {count} parameters (floor {GRADIENT_FLOOR:e})"))
}

// ---------------------------------------------------------------- 2, 3

struct Trained {
    dataset: SyntheticDataset,
    full: DynamicsModel,
    full_seconds: f64,
}

const RECOVERY_SEED: u64 = 1;
const TRAIN_CLIPS: usize = 20;

fn scaled_model(variant: Variant, z_ref: Vec<f64>) -> DynamicsModel {
    let shape = ModelShape { latent_dim: 8, pose_dim: POSE_DIM, hidden_width: 64, hidden_layers: 4 };
    DynamicsModel::initialized(shape, variant, z_ref, 3, &HeadInit::default()).unwrap()
}

fn scaled_train(variant: Variant, ds: &SyntheticDataset) -> latdyn::Result<DynamicsModel> {
    let config = TrainConfig { epochs: 300, batch_size: 64, lr: 5e-5, seed: 3, ..TrainConfig::default() };
    let mut trainer = Trainer::new(scaled_model(variant, ds.system.z_ref().to_vec()), config)?;
    trainer.run_until(&ds.clips[..TRAIN_CLIPS], config.epochs)?;
    Ok(trainer.model)
}

fn train_full() -> Trained {
    let dataset = SyntheticDataset::generate(&SyntheticConfig {
        seed: RECOVERY_SEED,
        clips: TRAIN_CLIPS + 5,
        frames: 500,
        latent_dim: 8,
        rho_min: 0.85,
        rho_max: 0.97,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let t0 = Instant::now();
    let full = scaled_train(Variant::Full, &dataset).expect("full model trains");
    Trained { dataset, full, full_seconds: t0.elapsed().as_secs_f64() }
}

fn oracle_recovery(tr: &Trained) -> Outcome {
    let held_out = &tr.dataset.clips[TRAIN_CLIPS..];
    let report = evaluate(&tr.full, held_out, &ForceGains::default()).unwrap();
    let m = &report.metrics;
    let tf = m.teacher_forced_mse / m.target_variance;
    let free50 = m.free_rollout_mse.iter().find(|h| h.horizon == 50).and_then(|h| h.mse).unwrap() / m.target_variance;
    let pass = tf < 1e-3 && free50 < 0.05 && tr.full_seconds < 600.0;
    outcome(
        pass,
        format!(
            "teacher-forced MSE {tf:.3e}×var (< 1e-3), 50-step free MSE {free50:.3e}×var (< 5e-2), training {:.0}s (< 600s)",
            tr.full_seconds
        ),
    )
}

fn rest_return(tr: &Trained) -> Outcome {
    let system = &tr.dataset.system;
    let clips: Vec<TrainingClip> = (0..5)
        .map(|i| {
            let motion = gen_pose_signal(9000 + i, 800, 300).unwrap();
            simulate(system, &motion_descriptors(&motion).unwrap(), None).unwrap()
        })
        .collect();
    let no_spring = match scaled_train(Variant::AccelNoSpring, &tr.dataset) {
        Ok(m) => m,
        Err(e) => return outcome(false, format!("variant without spring failed to train: {e}")),
    };
    let gains = ForceGains::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for clip in &clips {
        let full = clip_rollout(&tr.full, clip, &gains).and_then(|s| {
            rest_return_of(&s, clip, tr.full.z_ref()).ok_or_else(|| latdyn_cli::CliError::Format("no quiescent tail".into()))
        });
        let bare = clip_rollout(&no_spring, clip, &gains).and_then(|s| {
            rest_return_of(&s, clip, no_spring.z_ref()).ok_or_else(|| latdyn_cli::CliError::Format("no quiescent tail".into()))
        });
        match (full, bare) {
            (Ok((at, end)), Ok((_, bare_end))) => {
                let ok = end < 0.1 * at && end < bare_end;
                pass &= ok;
                parts.push(format!("{end:.3}/{at:.3} vs {bare_end:.3}"));
            }
            // A diverging no-spring rollout never returns to rest, which is
            // the behavior under test.
            (Ok((at, end)), Err(_)) => {
                pass &= end < 0.1 * at;
                parts.push(format!("{end:.3}/{at:.3} vs diverged"));
            }
            (Err(e), _) => {
                pass = false;
                parts.push(format!("full model: {e}"));
            }
        }
    }
    outcome(pass, format!("per clip, full model ‖z − z_ref‖ terminal/at cessation vs no-spring terminal (need ratio < 0.1 and smaller): [{}]", parts.join(", ")))
}

// ---------------------------------------------------------------- 4

/// The update written out without gains.
fn ungained_step(z: &[f64], v: &[f64], f: &ForceParams, z_ref: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut zn = Vec::with_capacity(z.len());
    let mut vn = Vec::with_capacity(z.len());
    for i in 0..z.len() {
        let net = (f.g[i] - f.damping[i] * v[i]) - f.kappa[i] * (z[i] - z_ref[i]);
        let a = net / f.mass[i];
        let v1 = v[i] + a;
        vn.push(v1);
        zn.push(z[i] + v1);
    }
    (zn, vn)
}

fn gain_identity() -> Outcome {
    let shape = ModelShape { latent_dim: 6, pose_dim: POSE_DIM, hidden_width: 16, hidden_layers: 2 };
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let z_ref: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let model = DynamicsModel::initialized(shape, Variant::Full, z_ref.clone(), 8, &HeadInit::default()).unwrap();
    let motion = gen_pose_signal(17, 120, 20).unwrap();
    let desc = motion_descriptors(&motion).unwrap();
    let init = LatentState::new(z_ref.iter().map(|x| x + 0.3).collect(), vec![0.05; 6]).unwrap();

    let gained = rollout(&model, &desc, &init, &ForceGains { pose: 1.0, damp: 1.0, spring: 1.0 }).unwrap();
    let (mut z, mut v) = (init.z.clone(), init.v.clone());
    let mut identical = true;
    for (d, s) in desc.iter().zip(&gained) {
        let f = model.predict_forces(d, &state_feature(&z, &v).unwrap()).unwrap();
        (z, v) = ungained_step(&z, &v, &f, &z_ref);
        identical &= z.iter().zip(&s.z).chain(v.iter().zip(&s.v)).all(|(a, b)| a.to_bits() == b.to_bits());
    }

    let mut linear = true;
    for _ in 0..200 {
        let n = 5;
        let mut r = |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(lo..hi)).collect() };
        let f = ForceParams { g: r(-1.0, 1.0), kappa: r(0.0, 2.0), damping: r(0.0, 2.0), mass: r(0.1, 3.0) };
        let state = LatentState::new(r(-3.0, 3.0), r(-1.0, 1.0)).unwrap();
        let zr = r(-1.0, 1.0);
        let unit = step_forces(&state, &f, &ForceGains::default(), &zr).unwrap();
        let (ad, as_) = (rng.random_range(0.0..4.0), rng.random_range(0.0..4.0));
        let scaled = step_forces(&state, &f, &ForceGains { pose: 1.0, damp: ad, spring: as_ }, &zr).unwrap();
        linear &= scaled[1].iter().zip(&unit[1]).all(|(s, u)| *s == ad * u);
        linear &= scaled[2].iter().zip(&unit[2]).all(|(s, u)| *s == as_ * u);
    }
    outcome(
        identical && linear,
        format!("unit gains bit-identical over {} steps: {identical}; damping/spring exactly linear in 200 draws: {linear}", desc.len()),
    )
}

// ---------------------------------------------------------------- 5

/// `(d, v) ↦` one semi-implicit step with `dt = 1`, written as a matrix.
fn hand_transition(kappa: f64, damping: f64, mass: f64) -> [[f64; 2]; 2] {
    let (k, c) = (kappa / mass, damping / mass);
    [[1.0 - k, 1.0 - c], [-k, 1.0 - c]]
}

fn frozen_rollout(kappa: f64, damping: f64, mass: f64, d0: f64, v0: f64, steps: usize) -> Vec<(f64, f64)> {
    let f = ForceParams { g: vec![0.0], kappa: vec![kappa], damping: vec![damping], mass: vec![mass] };
    let z_ref = [0.75];
    let mut s = LatentState::new(vec![z_ref[0] + d0], vec![v0]).unwrap();
    (0..steps)
        .map(|_| {
            s = step(&s, &f, &ForceGains::default(), &z_ref, 1.0).unwrap();
            (s.z[0] - z_ref[0], s.v[0])
        })
        .collect()
}

fn recurrence_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut mismatched = 0;
    let mut stable = 0;
    let mut classified = 0;
    let mut mixed = 0;
    while stable < 64 || mixed < 64 {
        let mass = rng.random_range(0.5..2.0);
        let kappa = mass * rng.random_range(0.0..4.5);
        let damping = mass * rng.random_range(-0.3..2.5);
        let t = transition_matrix(kappa, damping, mass, 1.0).unwrap();
        let hand = hand_transition(kappa, damping, mass);
        let rho = spectral_radius(&t);
        let (d0, v0) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let traj = frozen_rollout(kappa, damping, mass, d0, v0, 1000);
        let decays = {
            let (d, v) = traj[999];
            d.hypot(v) < d0.hypot(v0)
        };
        if rho < 1.0 && stable < 64 {
            stable += 1;
            for (k, &(d, v)) in traj.iter().enumerate() {
                let p = matrix_power(&t, k as u64 + 1);
                let (od, ov) = (p[0][0] * d0 + p[0][1] * v0, p[1][0] * d0 + p[1][1] * v0);
                worst = worst.max((d - od).abs()).max((v - ov).abs());
            }
            let entries = t.iter().flatten().zip(hand.iter().flatten());
            if entries.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > 1e-14 {
                mismatched += 1;
            }
            classified += usize::from(decays == (rho < 1.0));
        } else if (rho - 1.0).abs() > 0.02 && mixed < 64 {
            // Away from the boundary the 1000-step outcome is unambiguous.
            mixed += 1;
            classified += usize::from(decays == (rho < 1.0));
        }
    }
    let pass = worst < 1e-12 && classified == 128 && mismatched == 0;
    outcome(
        pass,
        format!(
            "max |rollout − Aᵏx₀| {worst:.2e} over 64×1000 steps; classification {classified}/128 (64 stable + 64 mixed); transition mismatches {mismatched}"
        ),
    )
}

// ---------------------------------------------------------------- 6

fn descriptor_contract() -> Outcome {
    let map = JointGroupMap::smpl24();
    let width_ok = map.descriptor_len() == 96 && map.groups.len() == 14 && map.pairs.len() == 6;

    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let pose: Vec<Rotation> = (0..24).map(|_| random_rotation(&mut rng, 1.0)).collect();
    let reference = pose.clone();
    let still = RotationSequence::new(12, 24, pose.iter().cycle().take(12 * 24).copied().collect()).unwrap();
    let zero = pose_descriptors(&still, &map, &reference).unwrap();
    let static_ok = zero.iter().all(|d| d.0.len() == 96 && d.0.iter().all(|&x| x == 0.0));

    let motion = gen_pose_signal(71, 60, 0).unwrap();
    let reference = motion.frame(0).to_vec();
    let base = pose_descriptors(&motion, &map, &reference).unwrap();
    let width_ok = width_ok && base.iter().all(|d| d.0.len() == 96);
    let mut perm_ok = true;
    for _ in 0..20 {
        let mut shuffled = map.clone();
        for g in &mut shuffled.groups {
            // Fisher-Yates with the suite RNG.
            for i in (1..g.joints.len()).rev() {
                let j = rng.random_range(0..=i);
                g.joints.swap(i, j);
            }
        }
        let got = pose_descriptors(&motion, &shuffled, &reference).unwrap();
        perm_ok &= bitwise_equal(&got, &base);
    }
    outcome(width_ok && static_ok && perm_ok, format!("width 96: {width_ok}; static → all zero: {static_ok}; 20 within-group shuffles bit-exact: {perm_ok}"))
}

fn bitwise_equal(a: &[PoseDescriptor], b: &[PoseDescriptor]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.0.iter().zip(&y.0).all(|(p, q)| p.to_bits() == q.to_bits()))
}

// ---------------------------------------------------------------- 7

fn latent_space_contract() -> Outcome {
    let (n, d, dz, eps) = (600, 48, 12, 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    // Correlated features with a wide range of scales, one direction nearly flat.
    let mixing = Matrix::from_vec(d, d, (0..d * d).map(|_| gauss(&mut rng)).collect()).unwrap();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let latent: Vec<f64> =
                (0..d).map(|k| gauss(&mut rng) * 10f64.powf(1.0 - 4.0 * k as f64 / d as f64)).collect();
            let mut f = mixing.matvec(&latent).unwrap();
            f.iter_mut().for_each(|x| *x += 3.0);
            f
        })
        .collect();
    let ls = LatentSpaceModel::fit(&rows, dz, eps, 0).unwrap();
    let w = &ls.projection;
    let wwt = w.matmul(&w.transpose()).unwrap();
    let ortho = wwt.max_abs_diff(&Matrix::identity(dz));

    let z: Vec<Vec<f64>> = rows.iter().map(|f| ls.encode(f).unwrap()).collect();
    let (mut worst_mean, mut worst_std): (f64, f64) = (0.0, 0.0);
    for k in 0..dz {
        // σ of the raw projection, recomputed here from W and the data.
        let raw: Vec<f64> = rows
            .iter()
            .map(|f| (0..d).map(|j| w.get(k, j) * (f[j] - ls.feature_mean[j])).sum::<f64>())
            .collect();
        let mu = raw.iter().sum::<f64>() / n as f64;
        let sigma = (raw.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n as f64).sqrt();
        let col: Vec<f64> = z.iter().map(|r| r[k]).collect();
        let m = col.iter().sum::<f64>() / n as f64;
        let s = (col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64).sqrt();
        worst_mean = worst_mean.max(m.abs());
        worst_std = worst_std.max((s - sigma / (sigma + eps)).abs());
    }
    let pass = ortho < 1e-8 && worst_mean < 1e-10 && worst_std < 1e-6;
    outcome(pass, format!("‖WWᵀ − I‖max {ortho:.2e}; max |mean| {worst_mean:.2e}; max |std − σ/(σ+ε)| {worst_std:.2e}"))
}

// ---------------------------------------------------------------- 8

const REFERENCE_MS_PER_STEP: f64 = 2.1;

fn throughput() -> Outcome {
    let model = DynamicsModel::new(ModelShape::default(), Variant::Full, vec![0.0; 128], 8).unwrap();
    let motion = gen_pose_signal(81, 400, 0).unwrap();
    let desc = motion_descriptors(&motion).unwrap();
    let init = LatentState::at_rest(vec![0.0; 128]);
    // Warm-up, then a timed pass; the rollout itself is single-threaded.
    rollout(&model, &desc[..20], &init, &ForceGains::default()).unwrap();
    let t0 = Instant::now();
    let out = rollout(&model, &desc, &init, &ForceGains::default()).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    let rate = out.len() as f64 / secs;
    outcome(
        rate >= 200.0,
        format!("{rate:.0} steps/s ({:.3} ms/step; reference figure {REFERENCE_MS_PER_STEP} ms/step), need ≥ 200", 1e3 / rate),
    )
}

// ---------------------------------------------------------------- 9

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let d = dir.path();
    let mut cfg = RunConfig::from_json(
        r#"{"seed": 9, "latent_dim": 4,
            "model": {"hidden_width": 16, "hidden_layers": 2},
            "train": {"epochs": 12, "batch_size": 16},
            "synthetic": {"clips": 4, "held_out": 1, "frames": 150}}"#,
    )
    .unwrap();
    cfg.paths.dataset = Some(d.join("data"));
    gen_synthetic(&cfg, &d.join("data")).unwrap();
    let mut run = |name: &str| {
        cfg.paths.checkpoint = Some(d.join(name));
        train(&cfg, None, None).unwrap();
        std::fs::read(d.join(name)).unwrap()
    };
    let a = run("a.ldck");
    let b = run("b.ldck");
    let train_ok = a == b;

    let ck = Checkpoint::from_bytes(&a, "a.ldck").unwrap();
    let ck_ok = ck.to_bytes().unwrap() == a;

    let motion = gen_pose_signal(91, 30, 5).unwrap();
    let q = encode_quatseq(&motion);
    let q_ok = encode_quatseq(&decode_quatseq(&q).unwrap()) == q;

    let rows: Vec<Vec<f64>> = motion_descriptors(&motion).unwrap().into_iter().map(|p| p.0).collect();
    let fm = FeatureMatrix::from_rows(&rows).unwrap().to_bytes();
    let fm_ok = FeatureMatrix::from_bytes(&fm).unwrap().to_bytes() == fm;

    let ls = LatentSpaceModel::fit(&rows, 5, 1e-8, 0).unwrap();
    let lb = latent_space_to_bytes(&ls).unwrap();
    let ls_ok = latent_space_to_bytes(&latent_space_from_bytes(&lb, "ls").unwrap()).unwrap() == lb;

    outcome(
        train_ok && ck_ok && q_ok && fm_ok && ls_ok,
        format!("two trainings identical: {train_ok}; save→load→save identical for checkpoint {ck_ok}, motion {q_ok}, features {fm_ok}, latent space {ls_ok}"),
    )
}

// ----------------------------------------------------------------

fn report(id: usize, name: &str, start: Instant, o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id} ({name}): {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful for this suite.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut results = Vec::new();
    let mut check = |id: usize, name: &str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        report(id, name, t, &o);
        results.push((id, o.pass));
    };
    check(1, "gradient fidelity", &gradient_fidelity);
    check(4, "gain identity", &gain_identity);
    check(5, "recurrence oracle", &recurrence_oracle);
    check(6, "descriptor contract", &descriptor_contract);
    check(7, "latent-space contract", &latent_space_contract);
    check(8, "throughput", &throughput);
    check(9, "determinism", &determinism);

    let trained = train_full();
    check(2, "oracle recovery", &|| oracle_recovery(&trained));
    check(3, "rest-state return", &|| rest_return(&trained));

    results.sort();
    let failed: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
