//! Spring-damper latent dynamics.
//!
//! Per dimension, with `d = z − z_ref`:
//!
//! ```text
//! a  = (α_pose·g − α_damp·(c ⊙ v) − α_spring·(κ ⊙ d)) ⊘ m
//! v' = v + Δt·a
//! z' = z + Δt·v'
//! ```
//!
//! Velocity is updated first and the position uses the new velocity
//! (semi-implicit Euler). The force coefficients come from a
//! [`ForceModel`]: four neural heads for [`DynamicsModel`], or fixed values
//! for the synthetic oracle.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{DenseNet, Eager, Graph, Head, ParamStore};
use crate::pose_features::{state_feature, PoseDescriptor, StateFeature, POSE_DIM};

/// Rollouts abort once any latent coordinate exceeds this magnitude.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Which update rule the model integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Spring-damper acceleration model.
    #[default]
    Full,
    /// `z'` is the `g` head output; `v' = z' − z`.
    DirectLatent,
    /// `v'` is the `g` head output; `z' = z + Δt·v'`.
    Velocity,
    /// `a = α_pose·g ⊘ m`, no spring or damping term.
    AccelNoSpring,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::DirectLatent, Variant::Velocity, Variant::AccelNoSpring];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::DirectLatent => "direct_latent",
            Variant::Velocity => "velocity",
            Variant::AccelNoSpring => "accel_no_spring",
        }
    }

    fn uses_spring_damper(self) -> bool {
        self == Variant::Full
    }

    fn uses_mass(self) -> bool {
        matches!(self, Variant::Full | Variant::AccelNoSpring)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown dynamics variant '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub z: Vec<f64>,
    pub v: Vec<f64>,
}

impl LatentState {
    pub fn new(z: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if z.len() != v.len() {
            return Err(Error::Dimension(format!("latent state z has {} entries, v has {}", z.len(), v.len())));
        }
        Ok(LatentState { z, v })
    }

    /// `(z, 0)`.
    pub fn at_rest(z: Vec<f64>) -> Self {
        let v = vec![0.0; z.len()];
        LatentState { z, v }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn feature(&self) -> StateFeature {
        state_feature(&self.z, &self.v).expect("z and v have equal length")
    }
}

/// Per-dimension force coefficients for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceParams {
    pub g: Vec<f64>,
    pub kappa: Vec<f64>,
    pub damping: Vec<f64>,
    pub mass: Vec<f64>,
}

/// Scalar multipliers on the three force components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForceGains {
    pub pose: f64,
    pub damp: f64,
    pub spring: f64,
}

impl Default for ForceGains {
    fn default() -> Self {
        ForceGains { pose: 1.0, damp: 1.0, spring: 1.0 }
    }
}

impl ForceGains {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("pose", self.pose), ("damp", self.damp), ("spring", self.spring)] {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::Config(format!("{name} gain must be a finite non-negative number, got {g}")));
            }
        }
        Ok(())
    }
}

/// Force coefficients as graph values. Heads a variant does not use are
/// left out.
#[derive(Debug, Clone)]
pub struct Forces<V> {
    pub g: V,
    pub kappa: Option<V>,
    pub damping: Option<V>,
    pub mass: Option<V>,
}

/// Anything that maps `[f_pose; f_state]` to force coefficients.
pub trait ForceModel {
    fn latent_dim(&self) -> usize;
    fn pose_dim(&self) -> usize;
    fn z_ref(&self) -> &[f64];
    fn dt(&self) -> f64;
    fn variant(&self) -> Variant;
    fn params(&self) -> &ParamStore;

    /// Coefficients for `input = [f_pose; z; v; ‖v‖]`.
    fn forces<G: Graph>(&self, g: &mut G, input: &G::Var) -> Result<Forces<G::Var>>;
}

fn need<V: Clone>(v: &Option<V>, what: &str) -> Result<V> {
    v.clone().ok_or_else(|| Error::Config(format!("force model did not provide {what}")))
}

/// The three force vectors `(α_pose·g, α_damp·(c⊙v), α_spring·(κ⊙(z − z_ref)))`.
pub fn force_components<G: Graph>(
    g: &mut G,
    z: &G::Var,
    v: &G::Var,
    forces: &Forces<G::Var>,
    gains: &ForceGains,
    z_ref: &G::Var,
) -> Result<(G::Var, G::Var, G::Var)> {
    let pose = g.scale(&forces.g, gains.pose);
    let cv = g.mul(&need(&forces.damping, "damping")?, v)?;
    let damp = g.scale(&cv, gains.damp);
    let disp = g.sub(z, z_ref)?;
    let kd = g.mul(&need(&forces.kappa, "stiffness")?, &disp)?;
    let spring = g.scale(&kd, gains.spring);
    Ok((pose, damp, spring))
}

/// One update of `variant` on graph values; returns `(z', v')`.
#[allow(clippy::too_many_arguments)]
pub fn step_graph<G: Graph>(
    g: &mut G,
    variant: Variant,
    z: &G::Var,
    v: &G::Var,
    forces: &Forces<G::Var>,
    gains: &ForceGains,
    z_ref: &G::Var,
    dt: f64,
) -> Result<(G::Var, G::Var)> {
    match variant {
        Variant::Full => {
            let (pose, damp, spring) = force_components(g, z, v, forces, gains, z_ref)?;
            let net = g.sub(&pose, &damp)?;
            let net = g.sub(&net, &spring)?;
            let a = g.div(&net, &need(&forces.mass, "mass")?)?;
            let dv = g.scale(&a, dt);
            let v_next = g.add(v, &dv)?;
            let dz = g.scale(&v_next, dt);
            let z_next = g.add(z, &dz)?;
            Ok((z_next, v_next))
        }
        Variant::DirectLatent => {
            let z_next = forces.g.clone();
            let v_next = g.sub(&z_next, z)?;
            Ok((z_next, v_next))
        }
        Variant::Velocity => {
            let v_next = forces.g.clone();
            let dz = g.scale(&v_next, dt);
            let z_next = g.add(z, &dz)?;
            Ok((z_next, v_next))
        }
        Variant::AccelNoSpring => {
            let pose = g.scale(&forces.g, gains.pose);
            let a = g.div(&pose, &need(&forces.mass, "mass")?)?;
            let dv = g.scale(&a, dt);
            let v_next = g.add(v, &dv)?;
            let dz = g.scale(&v_next, dt);
            let z_next = g.add(z, &dz)?;
            Ok((z_next, v_next))
        }
    }
}

fn check_lengths(state: &LatentState, forces: &ForceParams, z_ref: &[f64]) -> Result<()> {
    let n = state.dim();
    let lens = [state.v.len(), forces.g.len(), forces.kappa.len(), forces.damping.len(), forces.mass.len(), z_ref.len()];
    if lens.iter().any(|&l| l != n) {
        return Err(Error::Dimension(format!("step inputs have inconsistent lengths (z: {n}, others: {lens:?})")));
    }
    Ok(())
}

fn eager_forces(forces: &ForceParams) -> Forces<Vec<f64>> {
    Forces {
        g: forces.g.clone(),
        kappa: Some(forces.kappa.clone()),
        damping: Some(forces.damping.clone()),
        mass: Some(forces.mass.clone()),
    }
}

/// One full spring-damper update.
pub fn step(state: &LatentState, forces: &ForceParams, gains: &ForceGains, z_ref: &[f64], dt: f64) -> Result<LatentState> {
    step_variant(Variant::Full, state, forces, gains, z_ref, dt)
}

/// One update of the chosen variant. Variants without a spring/damper
/// ignore `kappa` and `damping`; direct and velocity prediction also ignore
/// `mass` and the gains.
pub fn step_variant(
    variant: Variant,
    state: &LatentState,
    forces: &ForceParams,
    gains: &ForceGains,
    z_ref: &[f64],
    dt: f64,
) -> Result<LatentState> {
    check_lengths(state, forces, z_ref)?;
    let store = ParamStore::new();
    let mut g = Eager::new(&store);
    let (z, v) = step_graph(&mut g, variant, &state.z, &state.v, &eager_forces(forces), gains, &z_ref.to_vec(), dt)?;
    Ok(LatentState { z, v })
}

/// The separate force vectors `step` combines, for inspection.
pub fn step_forces(state: &LatentState, forces: &ForceParams, gains: &ForceGains, z_ref: &[f64]) -> Result<[Vec<f64>; 3]> {
    check_lengths(state, forces, z_ref)?;
    let store = ParamStore::new();
    let mut g = Eager::new(&store);
    let (p, d, s) = force_components(&mut g, &state.z, &state.v, &eager_forces(forces), gains, &z_ref.to_vec())?;
    Ok([p, d, s])
}

/// Builds the head input `[f_pose; z; v; ‖v‖]` on a graph.
pub fn head_input<G: Graph>(g: &mut G, pose: &[f64], z: &G::Var, v: &G::Var) -> G::Var {
    let p = g.constant(pose.to_vec());
    let n = g.norm(v);
    g.concat(&[p, z.clone(), v.clone(), n])
}

/// One step of `model` on a graph: predict forces from `(pose, z, v)` and
/// integrate.
pub fn model_step_graph<M: ForceModel, G: Graph>(
    model: &M,
    g: &mut G,
    pose: &[f64],
    z: &G::Var,
    v: &G::Var,
    gains: &ForceGains,
    z_ref: &G::Var,
) -> Result<(G::Var, G::Var)> {
    if pose.len() != model.pose_dim() {
        return Err(Error::Dimension(format!(
            "pose descriptor has width {}, model expects {}",
            pose.len(),
            model.pose_dim()
        )));
    }
    let input = head_input(g, pose, z, v);
    let forces = model.forces(g, &input)?;
    step_graph(g, model.variant(), z, v, &forces, gains, z_ref, model.dt())
}

fn check_finite(step: usize, z: &[f64], v: &[f64]) -> Result<()> {
    if let Some(bad) = z.iter().chain(v).find(|x| !x.is_finite()) {
        return Err(Error::Divergence { step, reason: format!("non-finite state value {bad}") });
    }
    let zmax = z.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if zmax > DIVERGENCE_LIMIT {
        return Err(Error::Divergence { step, reason: format!("|z|∞ = {zmax:e} exceeds {DIVERGENCE_LIMIT:e}") });
    }
    Ok(())
}

/// Autoregressive rollout: state `t` is one step from state `t − 1`
/// (state `−1` is `init`) driven by `descriptors[t]`.
pub fn rollout<M: ForceModel>(
    model: &M,
    descriptors: &[PoseDescriptor],
    init: &LatentState,
    gains: &ForceGains,
) -> Result<Vec<LatentState>> {
    if descriptors.is_empty() {
        return Err(Error::InvalidInput("rollout needs at least one pose descriptor".into()));
    }
    if init.dim() != model.latent_dim() || init.v.len() != init.dim() {
        return Err(Error::Dimension(format!(
            "initial state has dimension {}, model latent dimension is {}",
            init.dim(),
            model.latent_dim()
        )));
    }
    gains.validate()?;
    let mut g = Eager::new(model.params());
    let z_ref = model.z_ref().to_vec();
    let mut out = Vec::with_capacity(descriptors.len());
    let (mut z, mut v) = (init.z.clone(), init.v.clone());
    for (t, d) in descriptors.iter().enumerate() {
        let (zn, vn) = model_step_graph(model, &mut g, d.as_slice(), &z, &v, gains, &z_ref)?;
        check_finite(t, &zn, &vn)?;
        out.push(LatentState { z: zn.clone(), v: vn.clone() });
        z = zn;
        v = vn;
    }
    Ok(out)
}

/// Shape of the four force heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelShape {
    pub latent_dim: usize,
    pub pose_dim: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape { latent_dim: 128, pose_dim: POSE_DIM, hidden_width: 256, hidden_layers: 4 }
    }
}

impl ModelShape {
    /// `d_p + 2·d_z + 1`.
    pub fn input_dim(&self) -> usize {
        self.pose_dim + 2 * self.latent_dim + 1
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_dim()];
        w.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        w.push(self.latent_dim);
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.pose_dim == 0 || self.hidden_width == 0 {
            return Err(Error::Config(format!("model shape has a zero dimension: {self:?}")));
        }
        Ok(())
    }
}

/// Output-layer initialization of the force heads.
///
/// Plain Kaiming output layers give forces of order one with masses that
/// can be close to zero, so `g/m` is large and early rollouts blow up. The
/// defaults shrink the output weights and start the coefficient heads at a
/// lightly damped, stable spring: `κ/m = c/m ≈ 0.15`, `g ≈ 0`.
/// `output_scale = 1` with zero biases is the plain scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadInit {
    pub output_scale: f64,
    pub stiffness_bias: f64,
    pub damping_bias: f64,
    pub mass_bias: f64,
}

impl Default for HeadInit {
    fn default() -> Self {
        HeadInit { output_scale: 0.01, stiffness_bias: -2.2, damping_bias: -2.2, mass_bias: 0.0 }
    }
}

impl HeadInit {
    /// Kaiming output layers with zero biases.
    pub const PLAIN: HeadInit = HeadInit { output_scale: 1.0, stiffness_bias: 0.0, damping_bias: 0.0, mass_bias: 0.0 };

    pub fn validate(&self) -> Result<()> {
        let all = [self.output_scale, self.stiffness_bias, self.damping_bias, self.mass_bias];
        if all.iter().any(|x| !x.is_finite()) || self.output_scale < 0.0 {
            return Err(Error::Config(format!("invalid head initialization {self:?}")));
        }
        Ok(())
    }
}

/// The four heads, in `g, κ, c, m` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceHeads {
    pub g: DenseNet,
    pub kappa: DenseNet,
    pub damping: DenseNet,
    pub mass: DenseNet,
}

impl ForceHeads {
    pub fn as_array(&self) -> [&DenseNet; 4] {
        [&self.g, &self.kappa, &self.damping, &self.mass]
    }
}

/// Neural force model: linear `g` head, softplus `κ, c, m` heads.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    shape: ModelShape,
    params: ParamStore,
    heads: ForceHeads,
    z_ref: Vec<f64>,
    dt: f64,
    variant: Variant,
}

impl DynamicsModel {
    /// Kaiming-initialized heads drawn from one seeded stream in `g, κ, c, m`
    /// order.
    pub fn new(shape: ModelShape, variant: Variant, z_ref: Vec<f64>, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let widths = shape.widths();
        let g = DenseNet::init(&mut params, &widths, Head::Linear, &mut rng)?;
        let kappa = DenseNet::init(&mut params, &widths, Head::Softplus, &mut rng)?;
        let damping = DenseNet::init(&mut params, &widths, Head::Softplus, &mut rng)?;
        let mass = DenseNet::init(&mut params, &widths, Head::Softplus, &mut rng)?;
        Self::from_parts(shape, params, ForceHeads { g, kappa, damping, mass }, z_ref, variant)
    }

    /// All head weights and biases zero: `g = 0`, `κ = c = m = ln 2`.
    pub fn zeroed(shape: ModelShape, variant: Variant, z_ref: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        let mut params = ParamStore::new();
        let widths = shape.widths();
        let g = DenseNet::zeroed(&mut params, &widths, Head::Linear)?;
        let kappa = DenseNet::zeroed(&mut params, &widths, Head::Softplus)?;
        let damping = DenseNet::zeroed(&mut params, &widths, Head::Softplus)?;
        let mass = DenseNet::zeroed(&mut params, &widths, Head::Softplus)?;
        Self::from_parts(shape, params, ForceHeads { g, kappa, damping, mass }, z_ref, variant)
    }

    pub fn from_parts(
        shape: ModelShape,
        params: ParamStore,
        heads: ForceHeads,
        z_ref: Vec<f64>,
        variant: Variant,
    ) -> Result<Self> {
        shape.validate()?;
        if z_ref.len() != shape.latent_dim {
            return Err(Error::Dimension(format!(
                "z_ref has {} entries, latent dimension is {}",
                z_ref.len(),
                shape.latent_dim
            )));
        }
        for (name, head, want) in [
            ("g", &heads.g, Head::Linear),
            ("kappa", &heads.kappa, Head::Softplus),
            ("damping", &heads.damping, Head::Softplus),
            ("mass", &heads.mass, Head::Softplus),
        ] {
            if head.input_dim() != shape.input_dim() || head.output_dim() != shape.latent_dim {
                return Err(Error::Dimension(format!(
                    "{name} head maps {} -> {}, expected {} -> {}",
                    head.input_dim(),
                    head.output_dim(),
                    shape.input_dim(),
                    shape.latent_dim
                )));
            }
            if head.head() != want {
                return Err(Error::Config(format!("{name} head must be {want:?}")));
            }
        }
        Ok(DynamicsModel { shape, params, heads, z_ref, dt: 1.0, variant })
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn heads(&self) -> &ForceHeads {
        &self.heads
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn set_variant(&mut self, variant: Variant) {
        self.variant = variant;
    }

    pub fn set_z_ref(&mut self, z_ref: Vec<f64>) -> Result<()> {
        if z_ref.len() != self.shape.latent_dim {
            return Err(Error::Dimension(format!("z_ref must have {} entries", self.shape.latent_dim)));
        }
        self.z_ref = z_ref;
        Ok(())
    }

    /// Kaiming weights, then `init` applied to each head's output layer.
    pub fn initialized(shape: ModelShape, variant: Variant, z_ref: Vec<f64>, seed: u64, init: &HeadInit) -> Result<Self> {
        init.validate()?;
        let mut model = Self::new(shape, variant, z_ref, seed)?;
        let heads = [
            (model.heads.g.clone(), 0.0),
            (model.heads.kappa.clone(), init.stiffness_bias),
            (model.heads.damping.clone(), init.damping_bias),
            (model.heads.mass.clone(), init.mass_bias),
        ];
        for (head, bias) in heads {
            let last = head.layers().last().expect("heads have layers");
            model.params.get_mut(last.weight).data_mut().iter_mut().for_each(|w| *w *= init.output_scale);
            model.params.get_mut(last.bias).data_mut().iter_mut().for_each(|b| *b = bias);
        }
        Ok(model)
    }

    /// Evaluates all four heads.
    pub fn predict_forces(&self, pose: &PoseDescriptor, state: &StateFeature) -> Result<ForceParams> {
        let want = 2 * self.shape.latent_dim + 1;
        if pose.0.len() != self.shape.pose_dim || state.0.len() != want {
            return Err(Error::Dimension(format!(
                "features have widths {} + {}, model expects {} + {want}",
                pose.0.len(),
                state.0.len(),
                self.shape.pose_dim
            )));
        }
        let input = [pose.0.as_slice(), state.0.as_slice()].concat();
        let p = &self.params;
        Ok(ForceParams {
            g: self.heads.g.forward(p, &input)?,
            kappa: self.heads.kappa.forward(p, &input)?,
            damping: self.heads.damping.forward(p, &input)?,
            mass: self.heads.mass.forward(p, &input)?,
        })
    }
}

impl ForceModel for DynamicsModel {
    fn latent_dim(&self) -> usize {
        self.shape.latent_dim
    }

    fn pose_dim(&self) -> usize {
        self.shape.pose_dim
    }

    fn z_ref(&self) -> &[f64] {
        &self.z_ref
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn variant(&self) -> Variant {
        self.variant
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn forces<G: Graph>(&self, g: &mut G, input: &G::Var) -> Result<Forces<G::Var>> {
        let variant = self.variant;
        let gv = self.heads.g.forward_graph(g, input)?;
        let kappa = if variant.uses_spring_damper() { Some(self.heads.kappa.forward_graph(g, input)?) } else { None };
        let damping =
            if variant.uses_spring_damper() { Some(self.heads.damping.forward_graph(g, input)?) } else { None };
        let mass = if variant.uses_mass() { Some(self.heads.mass.forward_graph(g, input)?) } else { None };
        Ok(Forces { g: gv, kappa, damping, mass })
    }
}
