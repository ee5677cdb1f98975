//! Grouped rotational-kinematics descriptor and the previous-state feature.
//!
//! Descriptor layout (fixed, checkpoints depend on it): for every group in
//! map order the six scalars
//! `[E‖ξ‖, E‖ω‖, E‖α‖, E‖η‖, ‖Eξ‖, ‖Eω‖]`, then for every bilateral pair
//! `[E‖ω‖_L − E‖ω‖_R, E‖α‖_L − E‖α‖_R]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{
    angular_acceleration, angular_jerk, angular_velocity, pose_to_reference, AxisAngle,
    KinematicField, Rotation, RotationSequence,
};

pub const GROUP_COUNT: usize = 14;
pub const PAIR_COUNT: usize = 6;
pub const STATS_PER_GROUP: usize = 6;
pub const STATS_PER_PAIR: usize = 2;
/// `6·14 + 2·6`.
pub const POSE_DIM: usize = STATS_PER_GROUP * GROUP_COUNT + STATS_PER_PAIR * PAIR_COUNT;

/// Canonical group order.
pub const GROUP_NAMES: [&str; GROUP_COUNT] = [
    "left_upper_leg",
    "right_upper_leg",
    "left_lower_leg",
    "right_lower_leg",
    "left_foot",
    "right_foot",
    "left_upper_arm",
    "right_upper_arm",
    "left_lower_arm",
    "right_lower_arm",
    "left_wrist",
    "right_wrist",
    "core",
    "head",
];

/// Canonical pair order, leg to wrist.
pub const PAIR_NAMES: [(&str, &str); PAIR_COUNT] = [
    ("left_upper_leg", "right_upper_leg"),
    ("left_lower_leg", "right_lower_leg"),
    ("left_foot", "right_foot"),
    ("left_upper_arm", "right_upper_arm"),
    ("left_lower_arm", "right_lower_arm"),
    ("left_wrist", "right_wrist"),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointGroup {
    pub name: String,
    pub joints: Vec<usize>,
}

/// Assignment of skeleton joints to the 14 anatomical groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointGroupMap {
    pub groups: Vec<JointGroup>,
    pub pairs: Vec<(String, String)>,
}

impl JointGroupMap {
    /// Default map for a 24-joint SMPL-style body skeleton.
    ///
    /// Joint order: pelvis, L hip, R hip, spine1, L knee, R knee, spine2,
    /// L ankle, R ankle, spine3, L foot, R foot, neck, L collar, R collar,
    /// head, L shoulder, R shoulder, L elbow, R elbow, L wrist, R wrist,
    /// L hand, R hand.
    pub fn smpl24() -> Self {
        let members: [&[usize]; GROUP_COUNT] = [
            &[1],
            &[2],
            &[4],
            &[5],
            &[7, 10],
            &[8, 11],
            &[13, 16],
            &[14, 17],
            &[18],
            &[19],
            &[20, 22],
            &[21, 23],
            &[0, 3, 6, 9],
            &[12, 15],
        ];
        JointGroupMap {
            groups: GROUP_NAMES
                .iter()
                .zip(members)
                .map(|(name, joints)| JointGroup { name: name.to_string(), joints: joints.to_vec() })
                .collect(),
            pairs: PAIR_NAMES.iter().map(|(l, r)| (l.to_string(), r.to_string())).collect(),
        }
    }

    /// Checks group/pair counts, pair references and joint indices against
    /// a skeleton of `joints` joints.
    pub fn validate(&self, joints: usize) -> Result<()> {
        if self.groups.len() != GROUP_COUNT {
            return Err(Error::Config(format!(
                "group map must have {GROUP_COUNT} groups, found {}",
                self.groups.len()
            )));
        }
        if self.pairs.len() != PAIR_COUNT {
            return Err(Error::Config(format!(
                "group map must have {PAIR_COUNT} bilateral pairs, found {}",
                self.pairs.len()
            )));
        }
        for g in &self.groups {
            if g.joints.is_empty() {
                return Err(Error::Config(format!("group '{}' is empty", g.name)));
            }
            if let Some(&j) = g.joints.iter().find(|&&j| j >= joints) {
                return Err(Error::Config(format!(
                    "group '{}' references joint {j}, skeleton has {joints}",
                    g.name
                )));
            }
        }
        for (i, g) in self.groups.iter().enumerate() {
            if self.groups[..i].iter().any(|h| h.name == g.name) {
                return Err(Error::Config(format!("duplicate group name '{}'", g.name)));
            }
        }
        self.pair_indices().map(|_| ())
    }

    /// Group indices `(left, right)` for each pair.
    pub fn pair_indices(&self) -> Result<Vec<(usize, usize)>> {
        let find = |name: &str| {
            self.groups
                .iter()
                .position(|g| g.name == name)
                .ok_or_else(|| Error::Config(format!("pair references unknown group '{name}'")))
        };
        self.pairs.iter().map(|(l, r)| Ok((find(l)?, find(r)?))).collect()
    }

    pub fn descriptor_len(&self) -> usize {
        STATS_PER_GROUP * self.groups.len() + STATS_PER_PAIR * self.pairs.len()
    }

    /// Largest joint index referenced, plus one.
    pub fn min_joints(&self) -> usize {
        self.groups.iter().flat_map(|g| g.joints.iter()).max().map_or(0, |m| m + 1)
    }
}

/// The fixed-layout pose descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseDescriptor(pub Vec<f64>);

impl PoseDescriptor {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Sum of scalars in a canonical (sorted) order so the result does not
/// depend on the order the joints were listed in.
fn order_free_mean(mut values: Vec<f64>) -> f64 {
    let n = values.len() as f64;
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / n
}

fn order_free_vector_mean(mut values: Vec<AxisAngle>) -> AxisAngle {
    let n = values.len() as f64;
    values.sort_by(|a, b| {
        a.0[0]
            .total_cmp(&b.0[0])
            .then(a.0[1].total_cmp(&b.0[1]))
            .then(a.0[2].total_cmp(&b.0[2]))
    });
    let sum = values.into_iter().fold(AxisAngle::ZERO, |acc, v| acc + v);
    AxisAngle([sum.0[0] / n, sum.0[1] / n, sum.0[2] / n])
}

/// The six per-group scalars at one frame:
/// `[E‖ξ‖, E‖ω‖, E‖α‖, E‖η‖, ‖Eξ‖, ‖Eω‖]` with `E` the mean over `group`.
pub fn group_stats(
    xi: &[AxisAngle],
    omega: &[AxisAngle],
    alpha: &[AxisAngle],
    eta: &[AxisAngle],
    group: &[usize],
) -> Result<[f64; STATS_PER_GROUP]> {
    if group.is_empty() {
        return Err(Error::Config("joint group is empty".into()));
    }
    let limit = xi.len().min(omega.len()).min(alpha.len()).min(eta.len());
    if let Some(&j) = group.iter().find(|&&j| j >= limit) {
        return Err(Error::Config(format!("joint index {j} out of range for {limit} joints")));
    }
    let mean_norm = |field: &[AxisAngle]| order_free_mean(group.iter().map(|&j| field[j].norm()).collect());
    let norm_mean = |field: &[AxisAngle]| order_free_vector_mean(group.iter().map(|&j| field[j]).collect()).norm();
    Ok([
        mean_norm(xi),
        mean_norm(omega),
        mean_norm(alpha),
        mean_norm(eta),
        norm_mean(xi),
        norm_mean(omega),
    ])
}

/// `[E‖ω‖_L − E‖ω‖_R, E‖α‖_L − E‖α‖_R]`.
pub fn symmetry_features(left: &[f64; STATS_PER_GROUP], right: &[f64; STATS_PER_GROUP]) -> [f64; 2] {
    [left[1] - right[1], left[2] - right[2]]
}

/// The four kinematic fields a descriptor is built from.
#[derive(Debug, Clone)]
pub struct KinematicFields {
    pub xi: KinematicField,
    pub omega: KinematicField,
    pub alpha: KinematicField,
    pub eta: KinematicField,
}

impl KinematicFields {
    pub fn compute(seq: &RotationSequence, reference: &[Rotation]) -> Result<Self> {
        let dt = seq.frame_interval();
        let xi = pose_to_reference(seq, reference)?;
        let omega = angular_velocity(seq);
        let alpha = angular_acceleration(&omega, dt);
        let eta = angular_jerk(&alpha, dt);
        Ok(KinematicFields { xi, omega, alpha, eta })
    }

    /// Descriptor at frame `t`.
    pub fn descriptor(&self, t: usize, map: &JointGroupMap) -> Result<PoseDescriptor> {
        if t >= self.xi.frames() {
            return Err(Error::InvalidInput(format!(
                "frame {t} out of range for {} frames",
                self.xi.frames()
            )));
        }
        let (xi, omega, alpha, eta) =
            (self.xi.frame(t), self.omega.frame(t), self.alpha.frame(t), self.eta.frame(t));
        let stats = map
            .groups
            .iter()
            .map(|g| group_stats(xi, omega, alpha, eta, &g.joints))
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(map.descriptor_len());
        for s in &stats {
            values.extend_from_slice(s);
        }
        for (l, r) in map.pair_indices()? {
            values.extend_from_slice(&symmetry_features(&stats[l], &stats[r]));
        }
        Ok(PoseDescriptor(values))
    }
}

/// Descriptor of `seq` at frame `t`. The jerk chain reaches back to
/// frame `t − 3`; earlier entries are zero by construction.
pub fn pose_descriptor(
    seq: &RotationSequence,
    t: usize,
    map: &JointGroupMap,
    reference: &[Rotation],
) -> Result<PoseDescriptor> {
    map.validate(seq.joints())?;
    if t >= seq.frames() {
        return Err(Error::InvalidInput(format!("frame {t} out of range for {} frames", seq.frames())));
    }
    // Only the last four frames matter; slice them out to keep this O(1) in T.
    let start = t.saturating_sub(3);
    let window = RotationSequence::with_interval(
        t - start + 1,
        seq.joints(),
        seq.data()[start * seq.joints()..(t + 1) * seq.joints()].to_vec(),
        seq.frame_interval(),
    )?;
    KinematicFields::compute(&window, reference)?.descriptor(t - start, map)
}

/// Descriptors for every frame of `seq`.
pub fn pose_descriptors(
    seq: &RotationSequence,
    map: &JointGroupMap,
    reference: &[Rotation],
) -> Result<Vec<PoseDescriptor>> {
    map.validate(seq.joints())?;
    let fields = KinematicFields::compute(seq, reference)?;
    (0..seq.frames()).map(|t| fields.descriptor(t, map)).collect()
}

/// `[z; v; ‖v‖₂]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFeature(pub Vec<f64>);

pub fn state_feature(z: &[f64], v: &[f64]) -> Result<StateFeature> {
    if z.len() != v.len() {
        return Err(Error::Dimension(format!(
            "state feature needs equal z/v lengths, got {} and {}",
            z.len(),
            v.len()
        )));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut values = Vec::with_capacity(2 * z.len() + 1);
    values.extend_from_slice(z);
    values.extend_from_slice(v);
    values.push(norm);
    Ok(StateFeature(values))
}
