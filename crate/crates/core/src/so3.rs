//! Rotations as unit quaternions and the discrete rotational-kinematics chain.
//!
//! Every kinematic quantity here is measured in frames: a sequence with
//! `frame_interval = 1` yields angular velocities in radians per frame.
//! The first entries of the finite-difference fields (`t = 0` for ω,
//! `t ≤ 1` effectively for α, and so on) are defined as zero so every field
//! has the same length as the sequence it came from.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Below this angle the log/exp maps switch to their Taylor expansions.
const SMALL_ANGLE: f64 = 1e-4;
/// Above `π - NEAR_PI` the log map reads the axis off the rotation matrix.
const NEAR_PI: f64 = 1e-4;

/// Axis-angle vector in radians: direction is the axis, length the angle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisAngle(pub [f64; 3]);

impl AxisAngle {
    pub const ZERO: AxisAngle = AxisAngle([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        AxisAngle([x, y, z])
    }

    pub fn norm(&self) -> f64 {
        let [x, y, z] = self.0;
        (x * x + y * y + z * z).sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        let [x, y, z] = self.0;
        AxisAngle([x * s, y * s, z * s])
    }
}

impl Add for AxisAngle {
    type Output = AxisAngle;
    fn add(self, rhs: AxisAngle) -> AxisAngle {
        AxisAngle([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1], self.0[2] + rhs.0[2]])
    }
}

impl Sub for AxisAngle {
    type Output = AxisAngle;
    fn sub(self, rhs: AxisAngle) -> AxisAngle {
        AxisAngle([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1], self.0[2] - rhs.0[2]])
    }
}

impl Neg for AxisAngle {
    type Output = AxisAngle;
    fn neg(self) -> AxisAngle {
        AxisAngle([-self.0[0], -self.0[1], -self.0[2]])
    }
}

/// A rotation stored as a unit quaternion `(w, x, y, z)`.
///
/// Constructors and products renormalize, so the norm stays within
/// rounding of one. `q` and `-q` describe the same rotation; use
/// [`Rotation::canonical`] to pick the representative with `w ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for Rotation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Builds a rotation from raw quaternion components, normalizing them.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::InvalidInput(format!(
                "quaternion ({w}, {x}, {y}, {z}) cannot be normalized"
            )));
        }
        Ok(Rotation { w: w / n, x: x / n, y: y / n, z: z / n })
    }

    /// Like [`Rotation::from_quaternion`], but components already within
    /// `1e-9` of unit norm are kept bit-for-bit, so stored sequences
    /// round-trip exactly.
    pub fn from_stored(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if (n - 1.0).abs() <= 1e-9 {
            Ok(Rotation { w, x, y, z })
        } else {
            Self::from_quaternion(w, x, y, z)
        }
    }

    /// Components as `[w, x, y, z]`.
    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn inverse(self) -> Self {
        Rotation { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Representative with `w ≥ 0`; when `w == 0` the first nonzero
    /// vector component is made positive.
    pub fn canonical(self) -> Self {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else {
            [self.x, self.y, self.z]
                .into_iter()
                .find(|c| *c != 0.0)
                .is_some_and(|c| c < 0.0)
        };
        if flip {
            Rotation { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
        } else {
            self
        }
    }

    fn normalized(self) -> Self {
        let n = self.norm();
        Rotation { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    /// Rotation matrix, row-major.
    pub fn to_matrix(self) -> [[f64; 3]; 3] {
        let Rotation { w, x, y, z } = self;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    /// Rotates a 3-vector.
    pub fn rotate(self, v: [f64; 3]) -> [f64; 3] {
        let m = self.to_matrix();
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    /// Hamilton product; `a * b` applies `b` first, then `a`.
    fn mul(self, b: Rotation) -> Rotation {
        let a = self;
        Rotation {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            // Paired so that q⁻¹ q has an exactly zero vector part.
            x: (a.w * b.x + a.x * b.w) + (a.y * b.z - a.z * b.y),
            y: (a.w * b.y + a.y * b.w) + (a.z * b.x - a.x * b.z),
            z: (a.w * b.z + a.z * b.w) + (a.x * b.y - a.y * b.x),
        }
        .normalized()
    }
}

/// Rotation by `‖v‖` radians about `v / ‖v‖`.
pub fn exp_map(v: AxisAngle) -> Rotation {
    let theta = v.norm();
    let half = 0.5 * theta;
    let (w, k) = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 8.0, 0.5 - t2 / 48.0)
    } else {
        (half.cos(), half.sin() / theta)
    };
    let [x, y, z] = v.0;
    Rotation { w, x: k * x, y: k * y, z: k * z }.normalized()
}

/// Axis-angle vector of `r` with angle in `[0, π]`.
pub fn log_map(r: Rotation) -> AxisAngle {
    let q = r.canonical();
    let s = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
    let theta = 2.0 * s.atan2(q.w);

    if theta < SMALL_ANGLE {
        // θ/s = (2/w)(1 - (s/w)²/3 + ...)
        let r2 = (s / q.w) * (s / q.w);
        let k = 2.0 / q.w * (1.0 - r2 / 3.0);
        return AxisAngle([k * q.x, k * q.y, k * q.z]);
    }

    if theta > std::f64::consts::PI - NEAR_PI {
        // Symmetric part is cosθ·I + (1 - cosθ)·uuᵀ; the largest diagonal
        // entry gives the best-conditioned column of uuᵀ.
        let m = q.to_matrix();
        let cos_t = theta.cos();
        let denom = 1.0 - cos_t;
        let sym = |i: usize, j: usize| 0.5 * (m[i][j] + m[j][i]);
        let k = (0..3)
            .max_by(|&a, &b| m[a][a].total_cmp(&m[b][b]))
            .unwrap_or(0);
        let uk = ((sym(k, k) - cos_t) / denom).max(0.0).sqrt();
        let mut u = [0.0; 3];
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = if i == k { uk } else { sym(i, k) / (denom * uk) };
        }
        let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        // Orient the axis along the quaternion's vector part.
        let sign = if u[0] * q.x + u[1] * q.y + u[2] * q.z < 0.0 { -1.0 } else { 1.0 };
        let k = sign * theta / n;
        return AxisAngle([k * u[0], k * u[1], k * u[2]]);
    }

    let k = theta / s;
    AxisAngle([k * q.x, k * q.y, k * q.z])
}

/// `a⁻¹ ∘ b`, canonicalized.
pub fn relative_rotation(a: Rotation, b: Rotation) -> Rotation {
    (a.inverse() * b).canonical()
}

/// Per-joint orientations over time, stored frame-major (`T × J`).
#[derive(Debug, Clone, PartialEq)]
pub struct RotationSequence {
    frames: usize,
    joints: usize,
    data: Vec<Rotation>,
    frame_interval: f64,
}

impl RotationSequence {
    pub fn new(frames: usize, joints: usize, data: Vec<Rotation>) -> Result<Self> {
        Self::with_interval(frames, joints, data, 1.0)
    }

    pub fn with_interval(
        frames: usize,
        joints: usize,
        data: Vec<Rotation>,
        frame_interval: f64,
    ) -> Result<Self> {
        if frames == 0 || joints == 0 {
            return Err(Error::InvalidInput(format!(
                "rotation sequence needs at least one frame and one joint, got {frames}x{joints}"
            )));
        }
        if data.len() != frames * joints {
            return Err(Error::Dimension(format!(
                "rotation sequence {frames}x{joints} expects {} entries, got {}",
                frames * joints,
                data.len()
            )));
        }
        if !(frame_interval.is_finite() && frame_interval > 0.0) {
            return Err(Error::InvalidInput(format!(
                "frame interval must be positive, got {frame_interval}"
            )));
        }
        Ok(RotationSequence { frames, joints, data, frame_interval })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn frame_interval(&self) -> f64 {
        self.frame_interval
    }

    pub fn get(&self, t: usize, j: usize) -> Rotation {
        self.data[t * self.joints + j]
    }

    pub fn frame(&self, t: usize) -> &[Rotation] {
        &self.data[t * self.joints..(t + 1) * self.joints]
    }

    pub fn data(&self) -> &[Rotation] {
        &self.data
    }
}

/// A `T × J` field of axis-angle vectors, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicField {
    frames: usize,
    joints: usize,
    data: Vec<AxisAngle>,
}

impl KinematicField {
    fn zeros(frames: usize, joints: usize) -> Self {
        KinematicField { frames, joints, data: vec![AxisAngle::ZERO; frames * joints] }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn get(&self, t: usize, j: usize) -> AxisAngle {
        self.data[t * self.joints + j]
    }

    pub fn frame(&self, t: usize) -> &[AxisAngle] {
        &self.data[t * self.joints..(t + 1) * self.joints]
    }

    fn set(&mut self, t: usize, j: usize, v: AxisAngle) {
        self.data[t * self.joints + j] = v;
    }
}

/// `ξ_t = log(R_refᵀ R_t)` per joint.
pub fn pose_to_reference(seq: &RotationSequence, reference: &[Rotation]) -> Result<KinematicField> {
    if reference.len() != seq.joints {
        return Err(Error::Dimension(format!(
            "reference pose has {} joints, sequence has {}",
            reference.len(),
            seq.joints
        )));
    }
    let mut out = KinematicField::zeros(seq.frames, seq.joints);
    for t in 0..seq.frames {
        for (j, r) in reference.iter().enumerate() {
            out.set(t, j, log_map(relative_rotation(*r, seq.get(t, j))));
        }
    }
    Ok(out)
}

/// `ω_t = log(R_{t-1}ᵀ R_t) / Δt`, zero at `t = 0`.
pub fn angular_velocity(seq: &RotationSequence) -> KinematicField {
    let dt = seq.frame_interval;
    let mut out = KinematicField::zeros(seq.frames, seq.joints);
    for t in 1..seq.frames {
        for j in 0..seq.joints {
            let w = log_map(relative_rotation(seq.get(t - 1, j), seq.get(t, j)));
            out.set(t, j, AxisAngle([w.0[0] / dt, w.0[1] / dt, w.0[2] / dt]));
        }
    }
    out
}

fn backward_difference(field: &KinematicField, dt: f64) -> KinematicField {
    let mut out = KinematicField::zeros(field.frames, field.joints);
    for t in 1..field.frames {
        for j in 0..field.joints {
            let d = field.get(t, j) - field.get(t - 1, j);
            out.set(t, j, AxisAngle([d.0[0] / dt, d.0[1] / dt, d.0[2] / dt]));
        }
    }
    out
}

/// `α_t = (ω_t − ω_{t−1}) / Δt`, zero at `t = 0`.
pub fn angular_acceleration(omega: &KinematicField, dt: f64) -> KinematicField {
    backward_difference(omega, dt)
}

/// `η_t = (α_t − α_{t−1}) / Δt`, zero at `t = 0`.
pub fn angular_jerk(alpha: &KinematicField, dt: f64) -> KinematicField {
    backward_difference(alpha, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn z_rot(theta: f64) -> Rotation {
        exp_map(AxisAngle::new(0.0, 0.0, theta))
    }

    fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Rotation {
        let axis = loop {
            let a: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            if n > 0.1 && n <= 1.0 {
                break [a[0] / n, a[1] / n, a[2] / n];
            }
        };
        let angle = rng.random_range(0.0..max_angle);
        exp_map(AxisAngle(axis).scale(angle))
    }

    fn close(a: AxisAngle, b: AxisAngle, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(exp_map(AxisAngle::ZERO), Rotation::IDENTITY);
    }

    #[test]
    fn exp_of_quarter_turn_about_z() {
        let q = exp_map(AxisAngle::new(0.0, 0.0, FRAC_PI_2)).to_array();
        let expected = [FRAC_PI_4.cos(), 0.0, 0.0, FRAC_PI_4.sin()];
        for (a, b) in q.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn log_of_identity_and_quarter_turn() {
        assert_eq!(log_map(Rotation::IDENTITY), AxisAngle::ZERO);
        assert!(close(log_map(z_rot(FRAC_PI_2)), AxisAngle::new(0.0, 0.0, FRAC_PI_2), 1e-14));
    }

    #[test]
    fn log_near_pi_uses_stable_branch() {
        let angle = PI - 1e-6;
        let r = Rotation::from_quaternion((angle / 2.0).cos(), (angle / 2.0).sin(), 0.0, 0.0).unwrap();
        let v = log_map(r);
        assert!(close(v, AxisAngle::new(angle, 0.0, 0.0), 1e-6), "{v:?}");
        // Inverse negates the axis, not just the sign convention.
        let vi = log_map(r.inverse());
        assert!(close(vi, AxisAngle::new(-angle, 0.0, 0.0), 1e-6), "{vi:?}");
    }

    #[test]
    fn log_exp_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let r = random_rotation(&mut rng, PI - 0.01);
            let back = exp_map(log_map(r));
            let d = relative_rotation(r, back);
            assert!(log_map(d).norm() < 1e-10);
            let (a, b) = (r.canonical().to_array(), back.canonical().to_array());
            for k in 0..4 {
                assert!((a[k] - b[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn log_exp_round_trip_small_and_branch_edges() {
        for angle in [0.0, 1e-9, 5e-5, 1e-4, 2e-4, 1.0, PI - 2e-4, PI - 1e-4, PI - 5e-5] {
            let v = AxisAngle::new(0.3, -0.5, 0.8).scale(angle / AxisAngle::new(0.3, -0.5, 0.8).norm());
            let back = log_map(exp_map(v));
            assert!(close(back, v, 1e-10), "angle {angle}: {back:?} vs {v:?}");
        }
    }

    #[test]
    fn log_of_inverse_negates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let r = random_rotation(&mut rng, PI - 0.01);
            assert!(close(log_map(r.inverse()), -log_map(r), 1e-12));
        }
    }

    #[test]
    fn product_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut acc = Rotation::IDENTITY;
        for _ in 0..1000 {
            acc = acc * random_rotation(&mut rng, PI);
            assert!((acc.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn canonical_fixes_sign() {
        let q = Rotation::from_quaternion(-0.5, 0.5, -0.5, 0.5).unwrap().canonical();
        assert!(q.to_array()[0] > 0.0);
        let q = Rotation::from_quaternion(0.0, 0.0, -1.0, 0.0).unwrap().canonical();
        assert_eq!(q.to_array(), [0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_quaternion_rejected() {
        assert!(Rotation::from_quaternion(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn relative_rotation_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let r = random_rotation(&mut rng, PI);
            let rel = relative_rotation(r, r).to_array();
            assert!((rel[0] - 1.0).abs() < 1e-12);
            assert!(rel[1..].iter().all(|c| c.abs() < 1e-12));
            let id = relative_rotation(Rotation::IDENTITY, r);
            assert!(log_map(relative_rotation(id, r)).norm() < 1e-12);
        }
        let rel = relative_rotation(z_rot(FRAC_PI_4), z_rot(FRAC_PI_2));
        assert!(close(log_map(rel), AxisAngle::new(0.0, 0.0, FRAC_PI_4), 1e-14));
    }

    fn sequence(frames: &[Vec<Rotation>], dt: f64) -> RotationSequence {
        let joints = frames[0].len();
        let data = frames.iter().flatten().copied().collect();
        RotationSequence::with_interval(frames.len(), joints, data, dt).unwrap()
    }

    #[test]
    fn pose_to_reference_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let reference: Vec<Rotation> = (0..3).map(|_| random_rotation(&mut rng, PI)).collect();
        let seq = sequence(&vec![reference.clone(); 4], 1.0);
        let xi = pose_to_reference(&seq, &reference).unwrap();
        assert!(xi.data.iter().all(|v| *v == AxisAngle::ZERO));

        let theta = 0.7;
        let seq = sequence(&[vec![z_rot(theta)]], 1.0);
        let xi = pose_to_reference(&seq, &[Rotation::IDENTITY]).unwrap();
        assert!(close(xi.get(0, 0), AxisAngle::new(0.0, 0.0, theta), 1e-14));

        assert!(matches!(
            pose_to_reference(&seq, &[Rotation::IDENTITY, Rotation::IDENTITY]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn pose_to_reference_world_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let world = random_rotation(&mut rng, PI);
        let frames: Vec<Vec<Rotation>> =
            (0..5).map(|_| (0..3).map(|_| random_rotation(&mut rng, 2.5)).collect()).collect();
        let reference: Vec<Rotation> = (0..3).map(|_| random_rotation(&mut rng, 2.5)).collect();
        let xi = pose_to_reference(&sequence(&frames, 1.0), &reference).unwrap();

        let moved: Vec<Vec<Rotation>> =
            frames.iter().map(|f| f.iter().map(|r| world * *r).collect()).collect();
        let moved_ref: Vec<Rotation> = reference.iter().map(|r| world * *r).collect();
        let xi2 = pose_to_reference(&sequence(&moved, 1.0), &moved_ref).unwrap();
        for (a, b) in xi.data.iter().zip(&xi2.data) {
            assert!(close(*a, *b, 1e-10));
        }
    }

    #[test]
    fn angular_velocity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let r = random_rotation(&mut rng, PI);
        let constant = sequence(&vec![vec![r, r]; 6], 1.0);
        let w = angular_velocity(&constant);
        assert!(w.data.iter().all(|v| *v == AxisAngle::ZERO));
        let a = angular_acceleration(&w, 1.0);
        let e = angular_jerk(&a, 1.0);
        assert!(a.data.iter().chain(&e.data).all(|v| *v == AxisAngle::ZERO));

        let delta = 0.05;
        let spin: Vec<Vec<Rotation>> =
            (0..8).map(|t| vec![exp_map(AxisAngle::new(delta * t as f64, 0.0, 0.0))]).collect();
        let w = angular_velocity(&sequence(&spin, 1.0));
        assert_eq!(w.get(0, 0), AxisAngle::ZERO);
        for t in 1..8 {
            assert!(close(w.get(t, 0), AxisAngle::new(delta, 0.0, 0.0), 1e-14));
        }
    }

    #[test]
    fn reversing_sequence_negates_velocity() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let frames: Vec<Vec<Rotation>> =
            (0..10).map(|_| (0..2).map(|_| random_rotation(&mut rng, 1.2)).collect()).collect();
        let mut rev = frames.clone();
        rev.reverse();
        let w = angular_velocity(&sequence(&frames, 1.0));
        let wr = angular_velocity(&sequence(&rev, 1.0));
        let n = frames.len();
        for t in 1..n {
            for j in 0..2 {
                // forward step t-1 → t is reverse step (n-t-1) → (n-t)
                assert!(close(w.get(t, j), -wr.get(n - t, j), 1e-12));
            }
        }
    }

    #[test]
    fn doubling_interval_halves_velocity_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let frames: Vec<Vec<Rotation>> =
            (0..10).map(|_| (0..2).map(|_| random_rotation(&mut rng, 1.2)).collect()).collect();
        let w1 = angular_velocity(&sequence(&frames, 1.0));
        let w2 = angular_velocity(&sequence(&frames, 2.0));
        for (a, b) in w1.data.iter().zip(&w2.data) {
            assert_eq!(a.scale(0.5), *b);
            assert_eq!(a.norm() * 0.5, b.norm());
        }
    }

    #[test]
    fn finite_differences_of_linear_velocity() {
        let slope = AxisAngle::new(0.01, -0.02, 0.005);
        let mut omega = KinematicField::zeros(6, 1);
        for t in 1..6 {
            omega.set(t, 0, slope.scale(t as f64));
        }
        let alpha = angular_acceleration(&omega, 1.0);
        for t in 1..6 {
            assert!(close(alpha.get(t, 0), slope, 1e-15));
        }
        let mut constant_alpha = KinematicField::zeros(5, 1);
        for t in 0..5 {
            constant_alpha.set(t, 0, slope);
        }
        let eta = angular_jerk(&constant_alpha, 1.0);
        assert!(eta.data.iter().all(|v| *v == AxisAngle::ZERO));
    }

    #[test]
    fn sequence_validation() {
        assert!(RotationSequence::new(0, 1, vec![]).is_err());
        assert!(RotationSequence::new(1, 2, vec![Rotation::IDENTITY]).is_err());
        assert!(RotationSequence::with_interval(1, 1, vec![Rotation::IDENTITY], 0.0).is_err());
    }
}
