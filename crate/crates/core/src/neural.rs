//! Dense networks, a reverse-mode tape over vector-valued primitives, and Adam.
//!
//! Model code is written once against the [`Graph`] trait. [`Eager`]
//! evaluates it directly on `Vec<f64>`; [`Tape`] records the same
//! arithmetic so it can be differentiated. Both run identical floating-point
//! operations in identical order, so inference and training forward passes
//! agree bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Matrix};

const GELU_K: f64 = 0.797_884_560_802_865_4; // √(2/π)
const GELU_C: f64 = 0.044_715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh())
}

pub fn gelu_derivative(x: f64) -> f64 {
    let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

/// `ln(1 + eˣ)` without overflow for large `|x|`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid, the derivative of [`softplus`].
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Owns every trainable tensor; networks refer into it by [`ParamId`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    tensors: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, tensor: Matrix) -> ParamId {
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Matrix] {
        &mut self.tensors
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data().len()).sum()
    }
}

/// Vector-valued operations a model is written against.
pub trait Graph {
    type Var: Clone;

    fn params(&self) -> &ParamStore;
    fn value<'a>(&'a self, v: &'a Self::Var) -> &'a [f64];

    /// A value that gradients do not flow into.
    fn constant(&mut self, values: Vec<f64>) -> Self::Var;
    /// A whole parameter tensor, flattened row-major.
    fn param(&mut self, id: ParamId) -> Self::Var;
    /// `W x + b`.
    fn affine(&mut self, weight: ParamId, bias: ParamId, x: &Self::Var) -> Result<Self::Var>;
    fn gelu(&mut self, x: &Self::Var) -> Self::Var;
    fn softplus(&mut self, x: &Self::Var) -> Self::Var;
    fn add(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var>;
    fn sub(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var>;
    fn mul(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var>;
    fn div(&mut self, a: &Self::Var, b: &Self::Var) -> Result<Self::Var>;
    fn scale(&mut self, x: &Self::Var, s: f64) -> Self::Var;
    fn concat(&mut self, parts: &[Self::Var]) -> Self::Var;
    /// Euclidean norm as a length-1 vector.
    fn norm(&mut self, x: &Self::Var) -> Self::Var;
    /// Sum of entries as a length-1 vector.
    fn sum(&mut self, x: &Self::Var) -> Self::Var;
}

fn same_len(op: &str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("{op} of vectors with lengths {} and {}", a.len(), b.len())));
    }
    Ok(())
}

fn affine_forward(w: &Matrix, b: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != w.cols() || b.data().len() != w.rows() {
        return Err(Error::Dimension(format!(
            "affine layer {}x{} (bias {}) applied to input of length {}",
            w.rows(),
            w.cols(),
            b.data().len(),
            x.len()
        )));
    }
    Ok(w.data().chunks_exact(w.cols()).zip(b.data()).map(|(row, bi)| dot(row, x) + bi).collect())
}

fn zip_with(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

/// Direct evaluation without recording anything.
pub struct Eager<'p> {
    params: &'p ParamStore,
}

impl<'p> Eager<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Eager { params }
    }
}

impl Graph for Eager<'_> {
    type Var = Vec<f64>;

    fn params(&self) -> &ParamStore {
        self.params
    }

    fn value<'a>(&'a self, v: &'a Vec<f64>) -> &'a [f64] {
        v
    }

    fn constant(&mut self, values: Vec<f64>) -> Vec<f64> {
        values
    }

    fn param(&mut self, id: ParamId) -> Vec<f64> {
        self.params.get(id).data().to_vec()
    }

    fn affine(&mut self, weight: ParamId, bias: ParamId, x: &Vec<f64>) -> Result<Vec<f64>> {
        affine_forward(self.params.get(weight), self.params.get(bias), x)
    }

    fn gelu(&mut self, x: &Vec<f64>) -> Vec<f64> {
        x.iter().map(|&v| gelu(v)).collect()
    }

    fn softplus(&mut self, x: &Vec<f64>) -> Vec<f64> {
        x.iter().map(|&v| softplus(v)).collect()
    }

    fn add(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        same_len("add", a, b)?;
        Ok(zip_with(a, b, |x, y| x + y))
    }

    fn sub(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        same_len("sub", a, b)?;
        Ok(zip_with(a, b, |x, y| x - y))
    }

    fn mul(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        same_len("mul", a, b)?;
        Ok(zip_with(a, b, |x, y| x * y))
    }

    fn div(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Result<Vec<f64>> {
        same_len("div", a, b)?;
        Ok(zip_with(a, b, |x, y| x / y))
    }

    fn scale(&mut self, x: &Vec<f64>, s: f64) -> Vec<f64> {
        x.iter().map(|v| s * v).collect()
    }

    fn concat(&mut self, parts: &[Vec<f64>]) -> Vec<f64> {
        parts.concat()
    }

    fn norm(&mut self, x: &Vec<f64>) -> Vec<f64> {
        vec![x.iter().map(|v| v * v).sum::<f64>().sqrt()]
    }

    fn sum(&mut self, x: &Vec<f64>) -> Vec<f64> {
        vec![x.iter().sum()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    Affine { weight: ParamId, bias: ParamId, x: NodeId },
    Gelu(NodeId),
    Softplus(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, f64),
    Concat(Vec<NodeId>),
    Norm(NodeId),
    Sum(NodeId),
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Records a computation for reverse-mode differentiation.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape { params, nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn val(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    /// Adjoint sweep from a scalar `loss` back to every recorded parameter.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Dimension(format!(
                "backward needs a scalar loss, got length {}",
                self.nodes[loss.0].value.len()
            )));
        }
        let mut grads = Gradients::empty(self.params.len());
        for node in &self.nodes[..=loss.0] {
            match node.op {
                Op::Param(id) => grads.ensure(id, self.params.get(id)),
                Op::Affine { weight, bias, .. } => {
                    grads.ensure(weight, self.params.get(weight));
                    grads.ensure(bias, self.params.get(bias));
                }
                _ => {}
            }
        }

        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);

        fn acc(adj: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
            adj[id.0].get_or_insert_with(|| vec![0.0; len])
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let buf = grads.slot(*id);
                    for (b, gi) in buf.data_mut().iter_mut().zip(&g) {
                        *b += gi;
                    }
                }
                Op::Affine { weight, bias, x } => {
                    let w = self.params.get(*weight);
                    let xv = self.val(*x);
                    {
                        let gw = grads.slot(*weight);
                        for (r, gi) in g.iter().enumerate() {
                            if *gi != 0.0 {
                                axpy(*gi, xv, gw.row_mut(r));
                            }
                        }
                    }
                    {
                        let gb = grads.slot(*bias);
                        for (b, gi) in gb.data_mut().iter_mut().zip(&g) {
                            *b += gi;
                        }
                    }
                    if !matches!(self.nodes[x.0].op, Op::Constant) {
                        let gx = acc(&mut adj, *x, xv.len());
                        for (r, gi) in g.iter().enumerate() {
                            if *gi != 0.0 {
                                axpy(*gi, w.row(r), gx);
                            }
                        }
                    }
                }
                Op::Gelu(x) => {
                    let xv = self.val(*x);
                    let gx = acc(&mut adj, *x, xv.len());
                    for ((o, gi), xi) in gx.iter_mut().zip(&g).zip(xv) {
                        *o += gi * gelu_derivative(*xi);
                    }
                }
                Op::Softplus(x) => {
                    let xv = self.val(*x);
                    let gx = acc(&mut adj, *x, xv.len());
                    for ((o, gi), xi) in gx.iter_mut().zip(&g).zip(xv) {
                        *o += gi * sigmoid(*xi);
                    }
                }
                Op::Add(a, b) => {
                    for id in [*a, *b] {
                        let ga = acc(&mut adj, id, g.len());
                        for (o, gi) in ga.iter_mut().zip(&g) {
                            *o += gi;
                        }
                    }
                }
                Op::Sub(a, b) => {
                    let ga = acc(&mut adj, *a, g.len());
                    for (o, gi) in ga.iter_mut().zip(&g) {
                        *o += gi;
                    }
                    let gb = acc(&mut adj, *b, g.len());
                    for (o, gi) in gb.iter_mut().zip(&g) {
                        *o -= gi;
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.val(*a).to_vec(), self.val(*b));
                    let ga = acc(&mut adj, *a, g.len());
                    for ((o, gi), bi) in ga.iter_mut().zip(&g).zip(bv) {
                        *o += gi * bi;
                    }
                    let gb = acc(&mut adj, *b, g.len());
                    for ((o, gi), ai) in gb.iter_mut().zip(&g).zip(&av) {
                        *o += gi * ai;
                    }
                }
                Op::Div(a, b) => {
                    let (av, bv) = (self.val(*a), self.val(*b));
                    let da: Vec<f64> = g.iter().zip(bv).map(|(gi, bi)| gi / bi).collect();
                    let db: Vec<f64> =
                        g.iter().zip(av).zip(bv).map(|((gi, ai), bi)| -gi * ai / (bi * bi)).collect();
                    for (o, d) in acc(&mut adj, *a, g.len()).iter_mut().zip(&da) {
                        *o += d;
                    }
                    for (o, d) in acc(&mut adj, *b, g.len()).iter_mut().zip(&db) {
                        *o += d;
                    }
                }
                Op::Scale(x, s) => {
                    let gx = acc(&mut adj, *x, g.len());
                    for (o, gi) in gx.iter_mut().zip(&g) {
                        *o += s * gi;
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.val(*p).len();
                        let gp = acc(&mut adj, *p, n);
                        for (o, gi) in gp.iter_mut().zip(&g[offset..offset + n]) {
                            *o += gi;
                        }
                        offset += n;
                    }
                }
                Op::Norm(x) => {
                    let xv = self.val(*x);
                    let n = node.value[0];
                    let gx = acc(&mut adj, *x, xv.len());
                    // Subgradient zero at the origin.
                    if n > 0.0 {
                        for (o, xi) in gx.iter_mut().zip(xv) {
                            *o += g[0] * xi / n;
                        }
                    }
                }
                Op::Sum(x) => {
                    let len = self.val(*x).len();
                    let gx = acc(&mut adj, *x, len);
                    for o in gx.iter_mut() {
                        *o += g[0];
                    }
                }
            }
        }
        Ok(grads)
    }
}

impl Graph for Tape<'_> {
    type Var = NodeId;

    fn params(&self) -> &ParamStore {
        self.params
    }

    fn value<'a>(&'a self, v: &'a NodeId) -> &'a [f64] {
        &self.nodes[v.0].value
    }

    fn constant(&mut self, values: Vec<f64>) -> NodeId {
        self.push(values, Op::Constant)
    }

    fn param(&mut self, id: ParamId) -> NodeId {
        let v = self.params.get(id).data().to_vec();
        self.push(v, Op::Param(id))
    }

    fn affine(&mut self, weight: ParamId, bias: ParamId, x: &NodeId) -> Result<NodeId> {
        let v = affine_forward(self.params.get(weight), self.params.get(bias), self.val(*x))?;
        Ok(self.push(v, Op::Affine { weight, bias, x: *x }))
    }

    fn gelu(&mut self, x: &NodeId) -> NodeId {
        let v = self.val(*x).iter().map(|&v| gelu(v)).collect();
        self.push(v, Op::Gelu(*x))
    }

    fn softplus(&mut self, x: &NodeId) -> NodeId {
        let v = self.val(*x).iter().map(|&v| softplus(v)).collect();
        self.push(v, Op::Softplus(*x))
    }

    fn add(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        same_len("add", self.val(*a), self.val(*b))?;
        let v = zip_with(self.val(*a), self.val(*b), |x, y| x + y);
        Ok(self.push(v, Op::Add(*a, *b)))
    }

    fn sub(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        same_len("sub", self.val(*a), self.val(*b))?;
        let v = zip_with(self.val(*a), self.val(*b), |x, y| x - y);
        Ok(self.push(v, Op::Sub(*a, *b)))
    }

    fn mul(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        same_len("mul", self.val(*a), self.val(*b))?;
        let v = zip_with(self.val(*a), self.val(*b), |x, y| x * y);
        Ok(self.push(v, Op::Mul(*a, *b)))
    }

    fn div(&mut self, a: &NodeId, b: &NodeId) -> Result<NodeId> {
        same_len("div", self.val(*a), self.val(*b))?;
        let v = zip_with(self.val(*a), self.val(*b), |x, y| x / y);
        Ok(self.push(v, Op::Div(*a, *b)))
    }

    fn scale(&mut self, x: &NodeId, s: f64) -> NodeId {
        let v = self.val(*x).iter().map(|v| s * v).collect();
        self.push(v, Op::Scale(*x, s))
    }

    fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let v = parts.iter().flat_map(|p| self.val(*p).iter().copied()).collect();
        self.push(v, Op::Concat(parts.to_vec()))
    }

    fn norm(&mut self, x: &NodeId) -> NodeId {
        let v = vec![self.val(*x).iter().map(|v| v * v).sum::<f64>().sqrt()];
        self.push(v, Op::Norm(*x))
    }

    fn sum(&mut self, x: &NodeId) -> NodeId {
        let v = vec![self.val(*x).iter().sum()];
        self.push(v, Op::Sum(*x))
    }
}

/// Per-parameter gradient buffers; only parameters recorded on a tape have one.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    buffers: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn empty(param_count: usize) -> Self {
        Gradients { buffers: vec![None; param_count] }
    }

    fn ensure(&mut self, id: ParamId, like: &Matrix) {
        if self.buffers[id.0].is_none() {
            self.buffers[id.0] = Some(Matrix::zeros(like.rows(), like.cols()));
        }
    }

    fn slot(&mut self, id: ParamId) -> &mut Matrix {
        self.buffers[id.0].as_mut().expect("gradient buffer allocated before the sweep")
    }

    /// Gradient for `id`, or an error if `id` never appeared on the tape.
    pub fn get(&self, id: ParamId) -> Result<&Matrix> {
        self.buffers.get(id.0).and_then(Option::as_ref).ok_or(Error::ParamNotOnTape(id.0))
    }

    pub fn len(&self) -> usize {
        self.buffers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffers.is_empty()
    }

    /// `self += other`, allocating buffers that only `other` has.
    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        if self.buffers.len() != other.buffers.len() {
            return Err(Error::Dimension(format!(
                "gradient sets cover {} and {} parameters",
                self.buffers.len(),
                other.buffers.len()
            )));
        }
        for (mine, theirs) in self.buffers.iter_mut().zip(&other.buffers) {
            if let Some(t) = theirs {
                match mine {
                    Some(m) => m.data_mut().iter_mut().zip(t.data()).for_each(|(a, b)| *a += b),
                    None => *mine = Some(t.clone()),
                }
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for buf in self.buffers.iter_mut().flatten() {
            buf.data_mut().iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.buffers.iter().flatten().flat_map(|b| b.data().iter()).fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Linear,
    Softplus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// Fully connected network: GELU after every hidden layer, then the head.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<DenseLayer>,
    widths: Vec<usize>,
    head: Head,
}

impl DenseNet {
    fn validate_widths(widths: &[usize]) -> Result<()> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!("invalid network widths {widths:?}")));
        }
        Ok(())
    }

    /// Kaiming-uniform weights (`U(−√(6/fan_in), √(6/fan_in))`), zero biases.
    pub fn init(store: &mut ParamStore, widths: &[usize], head: Head, rng: &mut impl Rng) -> Result<Self> {
        Self::validate_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
                DenseLayer {
                    weight: store.add(Matrix::from_vec(fan_out, fan_in, data).expect("sized")),
                    bias: store.add(Matrix::zeros(fan_out, 1)),
                }
            })
            .collect();
        Ok(DenseNet { layers, widths: widths.to_vec(), head })
    }

    /// [`DenseNet::init`] from a seed.
    pub fn seeded(store: &mut ParamStore, widths: &[usize], head: Head, seed: u64) -> Result<Self> {
        Self::init(store, widths, head, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// All weights and biases zero.
    pub fn zeroed(store: &mut ParamStore, widths: &[usize], head: Head) -> Result<Self> {
        Self::validate_widths(widths)?;
        let layers = widths
            .windows(2)
            .map(|w| DenseLayer {
                weight: store.add(Matrix::zeros(w[1], w[0])),
                bias: store.add(Matrix::zeros(w[1], 1)),
            })
            .collect();
        Ok(DenseNet { layers, widths: widths.to_vec(), head })
    }

    /// Rebuilds a network over tensors already in `store`.
    pub fn from_parts(store: &ParamStore, layers: Vec<DenseLayer>, head: Head) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        let mut widths = vec![store.get(layers[0].weight).cols()];
        for (i, l) in layers.iter().enumerate() {
            let (w, b) = (store.get(l.weight), store.get(l.bias));
            if w.cols() != *widths.last().expect("nonempty") || b.rows() != w.rows() || b.cols() != 1 {
                return Err(Error::Dimension(format!(
                    "layer {i}: weight {}x{}, bias {}x{} do not chain from width {}",
                    w.rows(),
                    w.cols(),
                    b.rows(),
                    b.cols(),
                    widths.last().expect("nonempty")
                )));
            }
            widths.push(w.rows());
        }
        Ok(DenseNet { layers, widths, head })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn forward_graph<G: Graph>(&self, g: &mut G, x: &G::Var) -> Result<G::Var> {
        if g.value(x).len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "network expects input width {}, got {}",
                self.input_dim(),
                g.value(x).len()
            )));
        }
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = g.affine(layer.weight, layer.bias, &h)?;
            if i < last {
                h = g.gelu(&h);
            }
        }
        Ok(match self.head {
            Head::Linear => h,
            Head::Softplus => g.softplus(&h),
        })
    }

    pub fn forward(&self, params: &ParamStore, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = Eager::new(params);
        self.forward_graph(&mut g, &x.to_vec())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &ParamStore, lr: f64) -> Self {
        let zeros = || params.tensors().iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, first: zeros(), second: zeros() }
    }

    /// Restores a saved optimizer state.
    pub fn from_state(lr: f64, step: u64, first: Vec<Matrix>, second: Vec<Matrix>) -> Result<Self> {
        if first.len() != second.len() {
            return Err(Error::Dimension("Adam moment lists differ in length".into()));
        }
        Ok(Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step, first, second })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Matrix] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Matrix] {
        &self.second
    }

    /// One update. Parameters without a gradient buffer are treated as
    /// having zero gradient.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Dimension(format!(
                "optimizer tracks {} tensors, store has {}, gradients cover {}",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, p) in params.tensors().iter().enumerate() {
            if p.rows() != self.first[i].rows() || p.cols() != self.first[i].cols() {
                return Err(Error::Dimension(format!("parameter {i} changed shape under the optimizer")));
            }
            if let Ok(g) = grads.get(ParamId(i)) {
                if g.rows() != p.rows() || g.cols() != p.cols() {
                    return Err(Error::Dimension(format!("gradient {i} does not match its parameter")));
                }
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, p) in params.tensors_mut().iter_mut().enumerate() {
            let g = grads.get(ParamId(i)).ok().map(Matrix::data);
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            for (k, theta) in p.data_mut().iter_mut().enumerate() {
                let gk = g.map_or(0.0, |g| g[k]);
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                *theta -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
