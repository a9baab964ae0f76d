//! Central finite-difference check of the analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LossWeights, Network, TrainSample};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub layer: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradCheckEntry {
    /// `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub fn relative_error(&self, floor: f64) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs()).max(floor);
        (self.analytic - self.numeric).abs() / scale
    }
}

/// Mean weighted loss over `samples` and its analytic gradient.
pub fn loss_and_gradient(net: &Network, samples: &[TrainSample], w: &LossWeights) -> Result<(f64, Vec<f64>)> {
    let mut g = vec![0.0; net.num_params()];
    let mut loss = 0.0;
    let scale = 1.0 / samples.len() as f64;
    for s in samples {
        let f = net.forward_sample(s, None)?;
        loss += scale * (w.w_imp * f.l_imp + w.a * f.l_df + w.b * f.l_pi);
        net.backward_sample(&f, w, scale, &mut g);
    }
    Ok((loss, g))
}

/// Compares up to `per_layer` randomly chosen parameters of every layer.
pub fn check_gradients(
    net: &Network,
    samples: &[TrainSample],
    w: &LossWeights,
    per_layer: usize,
    step: f64,
    seed: u64,
) -> Result<Vec<GradCheckEntry>> {
    let (_, g) = loss_and_gradient(net, samples, w)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = net.clone();
    let mut out = Vec::new();
    for layer in net.layers() {
        let k = per_layer.min(layer.len());
        for local in sample(&mut rng, layer.len(), k).into_vec() {
            let i = layer.offset + local;
            let p0 = net.params[i];
            probe.params[i] = p0 + step;
            let up = loss_value(&probe, samples, w)?;
            probe.params[i] = p0 - step;
            let down = loss_value(&probe, samples, w)?;
            probe.params[i] = p0;
            out.push(GradCheckEntry {
                layer: layer.name.clone(),
                index: i,
                analytic: g[i],
                numeric: (up - down) / (2.0 * step),
            });
        }
    }
    Ok(out)
}

fn loss_value(net: &Network, samples: &[TrainSample], w: &LossWeights) -> Result<f64> {
    let mut loss = 0.0;
    for s in samples {
        let f = net.forward_sample(s, None)?;
        loss += (w.w_imp * f.l_imp + w.a * f.l_df + w.b * f.l_pi) / samples.len() as f64;
    }
    Ok(loss)
}
