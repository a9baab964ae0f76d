use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{cell_features, points_to_array, NetConfig, Network};
use crate::error::{Error, Result};
use crate::fem::{DisplacementField, MaterialForceSpec};
use crate::geometry::{TetMesh, Vec3};
use crate::losses::{config_hash, fidelity_weights, total_loss_weighted, FidelityMode, LossCounts, LossReport};
use crate::udf::QuerySet;

/// One pretraining example with its precomputed mesh-side inputs.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub id: String,
    pub label: Option<String>,
    /// Normalized cloud, `n x 3`.
    pub points: Array2<f64>,
    pub mesh: TetMesh,
    pub mat: MaterialForceSpec,
    pub u: DisplacementField,
    pub queries: Vec<Vec3>,
    pub distances: Vec<f64>,
    pub cell_features: Array2<f64>,
    pub fidelity: FidelityMode,
    pub fidelity_weights: Vec<f64>,
}

impl TrainSample {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        label: Option<String>,
        points: &[Vec3],
        mesh: TetMesh,
        mat: MaterialForceSpec,
        u: DisplacementField,
        queries: &QuerySet,
        fidelity: FidelityMode,
    ) -> Result<Self> {
        mesh.validate()?;
        mat.validate(mesh.num_vertices())?;
        if u.len() != mesh.num_vertices() {
            return Err(Error::SizeMismatch(format!(
                "displacement of {} vertices on a mesh of {}",
                u.len(),
                mesh.num_vertices()
            )));
        }
        if let Some(&bad) = mesh.retained_map.iter().find(|&&i| i >= points.len()) {
            return Err(Error::SizeMismatch(format!("mesh vertex maps to point {bad} of {}", points.len())));
        }
        Ok(Self {
            id: id.into(),
            label,
            points: points_to_array(points),
            cell_features: cell_features(&mesh, &mat)?,
            fidelity_weights: fidelity_weights(&mesh, fidelity),
            fidelity,
            mesh,
            mat,
            u,
            queries: queries.queries.clone(),
            distances: queries.distances.clone(),
        })
    }
}

/// Loss weights of `L_all = w_imp L_imp + a L_df + b L_pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_imp: f64,
    pub a: f64,
    pub b: f64,
}

impl LossWeights {
    pub fn combined(a: f64, b: f64) -> Self {
        Self { w_imp: 1.0, a, b }
    }

    pub fn implicit_only() -> Self {
        Self { w_imp: 1.0, a: 0.0, b: 0.0 }
    }

    pub fn physics_only(a: f64, b: f64) -> Self {
        Self { w_imp: 0.0, a, b }
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::combined(crate::losses::DEFAULT_A, crate::losses::DEFAULT_B)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub net: NetConfig,
    /// 50 at toy scale; full-scale pretraining would use 200.
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub weights: LossWeights,
    /// Random subset of queries per sample and step; all when unset.
    pub queries_per_step: Option<usize>,
    pub fidelity: FidelityMode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            net: NetConfig::default(),
            epochs: 50,
            batch_size: 4,
            lr: 1e-3,
            weight_decay: 1e-4,
            weights: LossWeights::default(),
            queries_per_step: None,
            fidelity: FidelityMode::PerCell,
            seed: 0,
        }
    }
}

/// Adam moment estimates and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl TrainState {
    pub fn new(num_params: usize, seed: u64) -> Self {
        Self {
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
            seed,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with decoupled weight decay.
pub fn adam_step(params: &mut [f64], state: &mut TrainState, grads: &[f64], lr: f64, weight_decay: f64) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != grads.len() {
        return Err(Error::SizeMismatch(format!(
            "{} parameters, {} gradients, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient of parameter {i}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        params[i] -= lr * (mhat / (vhat.sqrt() + state.eps) + weight_decay * params[i]);
    }
    Ok(())
}

/// Cosine annealing from `lr0` at step 0 to zero at `total_steps`.
pub fn cosine_lr(step: usize, total_steps: usize, lr0: f64) -> f64 {
    if step > total_steps {
        eprintln!("warning: schedule step {step} beyond {total_steps}; learning rate clamped to 0");
        return 0.0;
    }
    if total_steps == 0 {
        return lr0;
    }
    lr0 * 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total_steps as f64).cos())
}

/// Mean losses of a network over samples, using every query.
pub fn evaluate(net: &Network, samples: &[TrainSample], weights: &LossWeights) -> Result<LossReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples to evaluate".into()));
    }
    let mut sums = [0.0; 3];
    for s in samples {
        let f = net.forward_sample(s, None)?;
        sums[0] += f.l_imp;
        sums[1] += f.l_df;
        sums[2] += f.l_pi;
    }
    let n = samples.len() as f64;
    Ok(total_loss_weighted(weights.w_imp, sums[0] / n, sums[1] / n, sums[2] / n, weights.a, weights.b)?
        .with_counts(counts(samples)))
}

fn counts(samples: &[TrainSample]) -> LossCounts {
    LossCounts {
        samples: samples.len(),
        queries: samples.iter().map(|s| s.queries.len()).sum(),
        cells: samples.iter().map(|s| s.mesh.num_cells()).sum(),
        free_vertices: samples
            .iter()
            .map(|s| s.mesh.num_vertices() - s.mat.force.fixed_vertices.len())
            .sum(),
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    /// One report per epoch: mean per-sample losses seen during the epoch.
    pub log: Vec<LossReport>,
    pub state: TrainState,
}

/// Dual-task pretraining with Adam and a per-step cosine schedule.
pub fn pretrain(samples: &[TrainSample], config: &TrainConfig) -> Result<TrainOutcome> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    let mut net = Network::new(config.net.clone(), config.seed)?;
    let mut state = TrainState::new(net.num_params(), config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let steps_per_epoch = samples.len().div_ceil(config.batch_size);
    let total_steps = config.epochs * steps_per_epoch;
    let hash = config_hash(config);
    let w = config.weights;
    let mut log = Vec::with_capacity(config.epochs);
    let mut grads = vec![0.0; net.num_params()];
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0; 3];
        for batch in order.chunks(config.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let s = &samples[i];
                let subset = config.queries_per_step.filter(|&q| q < s.queries.len()).map(|q| {
                    let mut idx = rand::seq::index::sample(&mut rng, s.queries.len(), q).into_vec();
                    idx.sort_unstable();
                    idx
                });
                let fwd = net.forward_sample(s, subset.as_deref())?;
                sums[0] += fwd.l_imp;
                sums[1] += fwd.l_df;
                sums[2] += fwd.l_pi;
                net.backward_sample(&fwd, &w, scale, &mut grads);
            }
            let lr = cosine_lr(state.step as usize, total_steps, config.lr);
            adam_step(&mut net.params, &mut state, &grads, lr, config.weight_decay)?;
        }
        let n = samples.len() as f64;
        let mut report = total_loss_weighted(w.w_imp, sums[0] / n, sums[1] / n, sums[2] / n, w.a, w.b)?
            .with_counts(counts(samples))
            .with_hash(hash.clone());
        report.epoch = Some(epoch + 1);
        log.push(report);
    }
    Ok(TrainOutcome {
        network: net,
        log,
        state,
    })
}
