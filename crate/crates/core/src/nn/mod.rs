//! Toy dual-task network with hand-written reverse-mode gradients.
//!
//! * encoder: shared per-point MLP `3 -> 64 -> 128 -> m` and a max pool,
//! * mesh processor: per-cell MLP `7 -> 32 -> 32 -> 3` whose outputs form the
//!   point set the encoder sees for the mesh branch,
//! * implicit decoder: `(m + 3) -> 128 -> 64 -> 1` per query,
//! * physics decoder: `(m + 7) -> 128 -> 128 -> 128 -> 64 -> 3n`.
//!
//! All parameters live in one flat vector; layers are views into it.

mod checkpoint;
mod gradcheck;
mod probe;
mod train;

pub use checkpoint::{checkpoint_bytes, load_checkpoint, network_from_bytes, save_checkpoint, CHECKPOINT_MAGIC};
pub use gradcheck::{check_gradients, loss_and_gradient, GradCheckEntry};
pub use probe::{embed, linear_probe, probe_classify, stratified_split, ProbeResult};
pub use train::{
    adam_step, cosine_lr, evaluate, pretrain, LossWeights, TrainConfig, TrainOutcome, TrainSample, TrainState,
};

use ndarray::{linalg::general_mat_mul, s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::continuum::{nodal_equilibrium_residual, physics_loss_gradient};
use crate::error::{Error, Result};
use crate::fem::{DisplacementField, MaterialForceSpec};
use crate::geometry::{TetMesh, Vec3};
use crate::losses::{data_fidelity_loss_with, physics_informed_loss};

/// Number of per-cell input features of the mesh processor.
pub const CELL_FEATURES: usize = 7;
/// Length of the deformation parameter vector.
pub const DEFORMATION_PARAMS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    LeakyRelu(f64),
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) if x < 0.0 => s * x,
            _ => x,
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(s) if x < 0.0 => s,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    /// Latent width m.
    pub latent: usize,
    /// Points per cloud n, which fixes the physics decoder output.
    pub n_points: usize,
    pub encoder_hidden: Vec<usize>,
    pub mesh_hidden: Vec<usize>,
    pub implicit_hidden: Vec<usize>,
    pub phys_hidden: Vec<usize>,
    /// Give the mesh branch its own encoder weights.
    pub separate_encoders: bool,
    pub leaky_slope: f64,
    /// Replace every hidden activation by the identity.
    pub linear: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            latent: 128,
            n_points: 512,
            encoder_hidden: vec![64, 128],
            mesh_hidden: vec![32, 32],
            implicit_hidden: vec![128, 64],
            phys_hidden: vec![128, 128, 128, 64],
            separate_encoders: false,
            leaky_slope: 0.01,
            linear: false,
        }
    }
}

impl NetConfig {
    pub fn activation(&self) -> Activation {
        if self.linear {
            Activation::Identity
        } else {
            Activation::LeakyRelu(self.leaky_slope)
        }
    }
}

/// One dense layer: `y = W x + b` with `W` stored row-major `outputs x inputs`
/// at `offset`, followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub inputs: usize,
    pub outputs: usize,
    pub offset: usize,
}

impl Layer {
    pub fn len(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight<'a>(&self, p: &'a [f64]) -> ArrayView2<'a, f64> {
        let n = self.inputs * self.outputs;
        ArrayView2::from_shape((self.outputs, self.inputs), &p[self.offset..self.offset + n]).expect("layer shape")
    }

    pub fn bias<'a>(&self, p: &'a [f64]) -> ArrayView1<'a, f64> {
        let w = self.offset + self.inputs * self.outputs;
        ArrayView1::from(&p[w..w + self.outputs])
    }

    fn grads_mut<'a>(&self, g: &'a mut [f64]) -> (ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>) {
        let n = self.inputs * self.outputs;
        let (w, b) = g[self.offset..self.offset + self.len()].split_at_mut(n);
        (
            ArrayViewMut2::from_shape((self.outputs, self.inputs), w).expect("layer shape"),
            ArrayViewMut1::from(b),
        )
    }
}

/// Stack of dense layers; hidden layers use the activation, the last is
/// linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Values recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    fn build(name: &str, widths: &[usize], offset: &mut usize) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let l = Layer {
                    name: format!("{name}.{i}"),
                    inputs: w[0],
                    outputs: w[1],
                    offset: *offset,
                };
                *offset += l.len();
                l
            })
            .collect();
        Self { layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().expect("non-empty mlp").outputs
    }

    /// Applies the stack to every row of `x`.
    pub fn forward(&self, p: &[f64], x: Array2<f64>, act: Activation) -> (Array2<f64>, MlpTrace) {
        let last = self.layers.len() - 1;
        let mut trace = MlpTrace {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut x = x;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weight(p).t());
            z += &layer.bias(p);
            trace.inputs.push(x);
            x = if i < last { z.mapv(|v| act.apply(v)) } else { z.clone() };
            trace.pre.push(z);
        }
        (x, trace)
    }

    /// Accumulates parameter gradients into `g` and returns the gradient
    /// with respect to the input when `input_grad` is set.
    pub fn backward(
        &self,
        p: &[f64],
        trace: &MlpTrace,
        dout: Array2<f64>,
        g: &mut [f64],
        act: Activation,
        input_grad: bool,
    ) -> Option<Array2<f64>> {
        let last = self.layers.len() - 1;
        let mut d = dout;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if i < last {
                d.zip_mut_with(&trace.pre[i], |dv, &z| *dv *= act.derivative(z));
            }
            let (mut gw, mut gb) = layer.grads_mut(g);
            general_mat_mul(1.0, &d.t(), &trace.inputs[i], 1.0, &mut gw);
            gb += &d.sum_axis(Axis(0));
            if i > 0 || input_grad {
                d = d.dot(&layer.weight(p));
            }
        }
        input_grad.then_some(d)
    }
}

/// Max pool over rows, remembering the first row attaining each maximum.
fn max_pool(x: &Array2<f64>) -> (Array1<f64>, Vec<usize>) {
    let mut best = x.row(0).to_owned();
    let mut arg = vec![0; x.ncols()];
    for (r, row) in x.outer_iter().enumerate().skip(1) {
        for (j, &v) in row.iter().enumerate() {
            if v > best[j] {
                best[j] = v;
                arg[j] = r;
            }
        }
    }
    (best, arg)
}

fn unpool(d: &Array1<f64>, arg: &[usize], rows: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rows, d.len()));
    for (j, &r) in arg.iter().enumerate() {
        out[(r, j)] = d[j];
    }
    out
}

pub fn points_to_array(points: &[Vec3]) -> Array2<f64> {
    Array2::from_shape_fn((points.len(), 3), |(i, j)| points[i][j])
}

/// Per-cell features: centroid, volume, mean edge length, lambda, mu.
pub fn cell_features(mesh: &TetMesh, mat: &MaterialForceSpec) -> Result<Array2<f64>> {
    if mesh.num_cells() == 0 {
        return Err(Error::InvalidMesh("mesh processor needs at least one cell".into()));
    }
    let mut f = Array2::zeros((mesh.num_cells(), CELL_FEATURES));
    for ci in 0..mesh.num_cells() {
        let x = mesh.cell_points(ci);
        let c = (x[0] + x[1] + x[2] + x[3]) / 4.0;
        let mut edges = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                edges += (x[a] - x[b]).norm();
            }
        }
        let row = [c.x, c.y, c.z, mesh.cell_volume(ci), edges / 6.0, mat.lambda, mat.mu];
        f.row_mut(ci).assign(&ArrayView1::from(&row));
    }
    Ok(f)
}

/// Encoder pass over a point set, with what its backward pass needs.
pub struct EncoderPass {
    pub latent: Array1<f64>,
    trace: MlpTrace,
    argmax: Vec<usize>,
    rows: usize,
}

/// Predictions and losses of one sample, with the recorded forward pass.
pub struct SampleForward {
    pub l_imp: f64,
    pub l_df: f64,
    pub l_pi: f64,
    pub u_hat: DisplacementField,
    cloud: EncoderPass,
    implicit_trace: MlpTrace,
    implicit_dout: Array2<f64>,
    mesh_trace: MlpTrace,
    mesh_enc: EncoderPass,
    phys_trace: MlpTrace,
    phys_dout_df: Array2<f64>,
    phys_dout_pi: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetConfig,
    pub params: Vec<f64>,
    pub encoder: Mlp,
    pub mesh_encoder: Option<Mlp>,
    pub mesh_processor: Mlp,
    pub implicit: Mlp,
    pub phys: Mlp,
}

impl Network {
    fn layout(config: &NetConfig) -> Result<(Mlp, Option<Mlp>, Mlp, Mlp, Mlp, usize)> {
        if config.latent == 0 || config.n_points == 0 {
            return Err(Error::InvalidArgument("latent width and point count must be positive".into()));
        }
        let m = config.latent;
        let chain = |first: usize, hidden: &[usize], last: usize| {
            let mut v = vec![first];
            v.extend_from_slice(hidden);
            v.push(last);
            v
        };
        let mut off = 0;
        let encoder = Mlp::build("encoder", &chain(3, &config.encoder_hidden, m), &mut off);
        let mesh_encoder = config
            .separate_encoders
            .then(|| Mlp::build("mesh_encoder", &chain(3, &config.encoder_hidden, m), &mut off));
        let mesh_processor = Mlp::build("mesh", &chain(CELL_FEATURES, &config.mesh_hidden, 3), &mut off);
        let implicit = Mlp::build("implicit", &chain(m + 3, &config.implicit_hidden, 1), &mut off);
        let phys = Mlp::build(
            "phys",
            &chain(m + DEFORMATION_PARAMS, &config.phys_hidden, 3 * config.n_points),
            &mut off,
        );
        Ok((encoder, mesh_encoder, mesh_processor, implicit, phys, off))
    }

    /// He-style initialization for layers followed by the activation,
    /// variance `1 / inputs` for output layers; zero biases.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        let (encoder, mesh_encoder, mesh_processor, implicit, phys, total) = Self::layout(&config)?;
        let mut net = Self {
            config,
            params: vec![0.0; total],
            encoder,
            mesh_encoder,
            mesh_processor,
            implicit,
            phys,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mlps: Vec<Mlp> = net.mlps().into_iter().cloned().collect();
        for mlp in &mlps {
            let last = mlp.layers.len() - 1;
            for (i, l) in mlp.layers.iter().enumerate() {
                let gain = if i < last { 2.0 } else { 1.0 };
                let normal = Normal::new(0.0, (gain / l.inputs as f64).sqrt()).expect("valid std");
                for w in &mut net.params[l.offset..l.offset + l.inputs * l.outputs] {
                    *w = normal.sample(&mut rng);
                }
            }
        }
        Ok(net)
    }

    pub fn from_params(config: NetConfig, params: Vec<f64>) -> Result<Self> {
        let (encoder, mesh_encoder, mesh_processor, implicit, phys, total) = Self::layout(&config)?;
        if params.len() != total {
            return Err(Error::SizeMismatch(format!("{} parameters for a network of {total}", params.len())));
        }
        Ok(Self {
            config,
            params,
            encoder,
            mesh_encoder,
            mesh_processor,
            implicit,
            phys,
        })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// All MLPs in parameter order.
    pub fn mlps(&self) -> Vec<&Mlp> {
        let mut v = vec![&self.encoder];
        v.extend(self.mesh_encoder.as_ref());
        v.extend([&self.mesh_processor, &self.implicit, &self.phys]);
        v
    }

    pub fn layers(&self) -> Vec<&Layer> {
        self.mlps().into_iter().flat_map(|m| m.layers.iter()).collect()
    }

    fn act(&self) -> Activation {
        self.config.activation()
    }

    fn mesh_branch_encoder(&self) -> &Mlp {
        self.mesh_encoder.as_ref().unwrap_or(&self.encoder)
    }

    fn encode_with(&self, mlp: &Mlp, x: Array2<f64>) -> Result<EncoderPass> {
        if x.nrows() == 0 {
            return Err(Error::InvalidArgument("cannot encode an empty point set".into()));
        }
        let rows = x.nrows();
        let (out, trace) = mlp.forward(&self.params, x, self.act());
        let (latent, argmax) = max_pool(&out);
        Ok(EncoderPass {
            latent,
            trace,
            argmax,
            rows,
        })
    }

    /// Point-set encoder: shared MLP then coordinatewise max.
    pub fn encoder_forward(&self, points: &[Vec3]) -> Result<Array1<f64>> {
        Ok(self.encode_with(&self.encoder, points_to_array(points))?.latent)
    }

    /// Per-cell embedding of a mesh, the point set fed to the encoder.
    pub fn mesh_processor_forward(&self, mesh: &TetMesh, mat: &MaterialForceSpec) -> Result<Array2<f64>> {
        let f = cell_features(mesh, mat)?;
        Ok(self.mesh_processor.forward(&self.params, f, self.act()).0)
    }

    /// Latent of the mesh branch.
    pub fn mesh_latent(&self, mesh: &TetMesh, mat: &MaterialForceSpec) -> Result<Array1<f64>> {
        let pseudo = self.mesh_processor_forward(mesh, mat)?;
        Ok(self.encode_with(self.mesh_branch_encoder(), pseudo)?.latent)
    }

    fn check_latent(&self, latent: &Array1<f64>) -> Result<()> {
        if latent.len() != self.config.latent {
            return Err(Error::SizeMismatch(format!(
                "latent of width {} for a network of width {}",
                latent.len(),
                self.config.latent
            )));
        }
        Ok(())
    }

    fn implicit_input(&self, latent: &Array1<f64>, queries: &[Vec3]) -> Array2<f64> {
        let m = self.config.latent;
        let mut x = Array2::zeros((queries.len(), m + 3));
        for (k, q) in queries.iter().enumerate() {
            x.slice_mut(s![k, ..m]).assign(latent);
            for d in 0..3 {
                x[(k, m + d)] = q[d];
            }
        }
        x
    }

    /// Predicted distance at each query.
    pub fn implicit_decoder_forward(&self, latent: &Array1<f64>, queries: &[Vec3]) -> Result<Vec<f64>> {
        self.check_latent(latent)?;
        let x = self.implicit_input(latent, queries);
        Ok(self.implicit.forward(&self.params, x, self.act()).0.column(0).to_vec())
    }

    /// Gradient of the predicted distance with respect to the query.
    pub fn implicit_query_gradient(&self, latent: &Array1<f64>, q: &Vec3) -> Result<Vec3> {
        self.check_latent(latent)?;
        let x = self.implicit_input(latent, std::slice::from_ref(q));
        let (_, trace) = self.implicit.forward(&self.params, x, self.act());
        let mut scratch = vec![0.0; self.params.len()];
        let dx = self
            .implicit
            .backward(&self.params, &trace, Array2::ones((1, 1)), &mut scratch, self.act(), true)
            .expect("input gradient requested");
        let m = self.config.latent;
        Ok(Vec3::new(dx[(0, m)], dx[(0, m + 1)], dx[(0, m + 2)]))
    }

    fn phys_input(&self, latent: &Array1<f64>, d: &[f64; DEFORMATION_PARAMS]) -> Array2<f64> {
        let m = self.config.latent;
        let mut x = Array2::zeros((1, m + DEFORMATION_PARAMS));
        x.slice_mut(s![0, ..m]).assign(latent);
        for (k, v) in d.iter().enumerate() {
            x[(0, m + k)] = *v;
        }
        x
    }

    /// Displacement prediction for all n cloud points, `n x 3`.
    pub fn phys_decoder_forward(&self, latent: &Array1<f64>, d: &[f64; DEFORMATION_PARAMS]) -> Result<Vec<Vec3>> {
        self.check_latent(latent)?;
        let (out, _) = self.phys.forward(&self.params, self.phys_input(latent, d), self.act());
        Ok(out.row(0).as_slice().expect("contiguous").chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
    }

    /// Restricts an `n x 3` prediction to the mesh vertices.
    pub fn gather_vertices(&self, per_point: &[Vec3], mesh: &TetMesh) -> Result<DisplacementField> {
        if per_point.len() != self.config.n_points {
            return Err(Error::SizeMismatch(format!(
                "{} predicted points, network emits {}",
                per_point.len(),
                self.config.n_points
            )));
        }
        let mut values = Vec::with_capacity(mesh.num_vertices());
        for &src in &mesh.retained_map {
            values.push(*per_point.get(src).ok_or_else(|| {
                Error::SizeMismatch(format!("mesh vertex maps to point {src}, network emits {}", self.config.n_points))
            })?);
        }
        Ok(DisplacementField { values })
    }

    /// Forward pass of one sample recording everything backward needs.
    /// `queries` selects a subset of the sample's queries.
    pub fn forward_sample(&self, s: &TrainSample, queries: Option<&[usize]>) -> Result<SampleForward> {
        let act = self.act();
        let n = self.config.n_points;
        if s.points.nrows() != n {
            return Err(Error::SizeMismatch(format!("sample has {} points, network expects {n}", s.points.nrows())));
        }
        let cloud = self.encode_with(&self.encoder, s.points.clone())?;

        let (qs, gt): (Vec<Vec3>, Vec<f64>) = match queries {
            Some(idx) => idx.iter().map(|&i| (s.queries[i], s.distances[i])).unzip(),
            None => (s.queries.clone(), s.distances.clone()),
        };
        if qs.is_empty() {
            return Err(Error::InvalidArgument("sample without queries".into()));
        }
        let (pred, implicit_trace) = self.implicit.forward(&self.params, self.implicit_input(&cloud.latent, &qs), act);
        let k = qs.len() as f64;
        let mut l_imp = 0.0;
        let mut implicit_dout = Array2::zeros((qs.len(), 1));
        for (i, (&p, &g)) in pred.column(0).iter().zip(&gt).enumerate() {
            let e = p.abs() - g;
            l_imp += e.abs();
            implicit_dout[(i, 0)] = sign(p) * sign(e) / k;
        }
        l_imp /= k;

        let (pseudo, mesh_trace) = self.mesh_processor.forward(&self.params, s.cell_features.clone(), act);
        let mesh_enc = self.encode_with(self.mesh_branch_encoder(), pseudo)?;
        let (out, phys_trace) = self
            .phys
            .forward(&self.params, self.phys_input(&mesh_enc.latent, &s.mat.deformation_params()), act);
        let per_point: Vec<Vec3> = out
            .row(0)
            .as_slice()
            .expect("contiguous")
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0], c[1], c[2]))
            .collect();
        let u_hat = self.gather_vertices(&per_point, &s.mesh)?;

        let l_df = data_fidelity_loss_with(&u_hat, &s.u, &s.mesh, s.fidelity)?;
        let residual = nodal_equilibrium_residual(&s.mesh, &u_hat, &s.mat)?;
        let l_pi = physics_informed_loss(&residual)?;
        for (name, v) in [("L_imp", l_imp), ("L_df", l_df), ("L_pi", l_pi)] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name} of sample '{}'", s.id)));
            }
        }

        let mut phys_dout_df = Array2::zeros((1, 3 * n));
        for (v, &src) in s.mesh.retained_map.iter().enumerate() {
            let diff = u_hat.values[v] - s.u.values[v];
            let norm = diff.norm();
            if norm > 0.0 {
                let g = diff * (s.fidelity_weights[v] / norm);
                for d in 0..3 {
                    phys_dout_df[(0, 3 * src + d)] += g[d];
                }
            }
        }
        let gpi = physics_loss_gradient(&s.mesh, &residual, &s.mat)?;
        let mut phys_dout_pi = Array2::zeros((1, 3 * n));
        for (v, &src) in s.mesh.retained_map.iter().enumerate() {
            for d in 0..3 {
                phys_dout_pi[(0, 3 * src + d)] += gpi.values[v][d];
            }
        }

        Ok(SampleForward {
            l_imp,
            l_df,
            l_pi,
            u_hat,
            cloud,
            implicit_trace,
            implicit_dout,
            mesh_trace,
            mesh_enc,
            phys_trace,
            phys_dout_df,
            phys_dout_pi,
        })
    }

    /// Adds `scale * d(w_imp L_imp + a L_df + b L_pi)/d(params)` into `g`.
    pub fn backward_sample(&self, fwd: &SampleForward, w: &LossWeights, scale: f64, g: &mut [f64]) {
        let act = self.act();
        let m = self.config.latent;
        if w.w_imp != 0.0 {
            let dout = &fwd.implicit_dout * (scale * w.w_imp);
            let dx = self
                .implicit
                .backward(&self.params, &fwd.implicit_trace, dout, g, act, true)
                .expect("input gradient requested");
            let dlatent = dx.slice(s![.., ..m]).sum_axis(Axis(0));
            let dpool = unpool(&dlatent, &fwd.cloud.argmax, fwd.cloud.rows);
            self.encoder.backward(&self.params, &fwd.cloud.trace, dpool, g, act, false);
        }
        if w.a != 0.0 || w.b != 0.0 {
            let dout = &fwd.phys_dout_df * (scale * w.a) + &fwd.phys_dout_pi * (scale * w.b);
            let dx = self
                .phys
                .backward(&self.params, &fwd.phys_trace, dout, g, act, true)
                .expect("input gradient requested");
            let dlatent = dx.slice(s![0, ..m]).to_owned();
            let dpool = unpool(&dlatent, &fwd.mesh_enc.argmax, fwd.mesh_enc.rows);
            let dpseudo = self
                .mesh_branch_encoder()
                .backward(&self.params, &fwd.mesh_enc.trace, dpool, g, act, true)
                .expect("input gradient requested");
            self.mesh_processor.backward(&self.params, &fwd.mesh_trace, dpseudo, g, act, false);
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
