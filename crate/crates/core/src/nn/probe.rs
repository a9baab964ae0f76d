//! Linear probe: multinomial logistic regression on frozen latents.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

const PROBE_ITERATIONS: usize = 500;
const PROBE_LR: f64 = 0.5;
const PROBE_L2: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub accuracy: f64,
    pub train_count: usize,
    pub test_count: usize,
    pub classes: Vec<String>,
}

/// Frozen encoder latents of each cloud.
pub fn embed(net: &Network, clouds: &[Vec<Vec3>]) -> Result<Vec<Vec<f64>>> {
    clouds.iter().map(|c| Ok(net.encoder_forward(c)?.to_vec())).collect()
}

/// Per-class shuffle; the first half (rounded up) of each class trains.
pub fn stratified_split(labels: &[usize], seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for idx in by_class.values_mut() {
        idx.shuffle(&mut rng);
        let k = idx.len().div_ceil(2);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Trains softmax regression on standardized `features[train]` by full-batch
/// gradient descent and returns the accuracy on `features[test]`.
pub fn linear_probe(
    features: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    train: &[usize],
    test: &[usize],
) -> Result<f64> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument("probe needs non-empty train and test sets".into()));
    }
    let d = features[0].len();
    let mut mean = vec![0.0; d];
    for &i in train {
        for (m, x) in mean.iter_mut().zip(&features[i]) {
            *m += x / train.len() as f64;
        }
    }
    let mut std = vec![0.0; d];
    for &i in train {
        for j in 0..d {
            std[j] += (features[i][j] - mean[j]).powi(2) / train.len() as f64;
        }
    }
    let std: Vec<f64> = std.iter().map(|v| if *v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
    let x = |i: usize| -> Vec<f64> { (0..d).map(|j| (features[i][j] - mean[j]) / std[j]).collect() };
    let xs_train: Vec<Vec<f64>> = train.iter().map(|&i| x(i)).collect();

    let mut w = vec![vec![0.0; d]; n_classes];
    let mut b = vec![0.0; n_classes];
    let logits = |w: &[Vec<f64>], b: &[f64], xi: &[f64]| -> Vec<f64> {
        (0..n_classes).map(|c| b[c] + w[c].iter().zip(xi).map(|(a, x)| a * x).sum::<f64>()).collect()
    };
    let nt = train.len() as f64;
    for _ in 0..PROBE_ITERATIONS {
        let mut gw = vec![vec![0.0; d]; n_classes];
        let mut gb = vec![0.0; n_classes];
        for (xi, &i) in xs_train.iter().zip(train) {
            let z = logits(&w, &b, xi);
            let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
            let s: f64 = e.iter().sum();
            for c in 0..n_classes {
                let delta = e[c] / s - if c == labels[i] { 1.0 } else { 0.0 };
                gb[c] += delta / nt;
                for j in 0..d {
                    gw[c][j] += delta * xi[j] / nt;
                }
            }
        }
        for c in 0..n_classes {
            b[c] -= PROBE_LR * gb[c];
            for j in 0..d {
                w[c][j] -= PROBE_LR * (gw[c][j] + PROBE_L2 * w[c][j]);
            }
        }
    }
    let correct = test
        .iter()
        .filter(|&&i| {
            let z = logits(&w, &b, &x(i));
            let pred = (0..n_classes).max_by(|&p, &q| z[p].total_cmp(&z[q]).then(q.cmp(&p))).unwrap();
            pred == labels[i]
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}

/// Held-out accuracy of a linear probe on the encoder's latents.
pub fn probe_classify(net: &Network, clouds: &[(Vec<Vec3>, String)], seed: u64) -> Result<ProbeResult> {
    let classes: Vec<String> = clouds
        .iter()
        .map(|(_, l)| l.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "probe needs at least 2 classes, found {}",
            classes.len()
        )));
    }
    let labels: Vec<usize> = clouds
        .iter()
        .map(|(_, l)| classes.binary_search(l).expect("label listed"))
        .collect();
    let pts: Vec<Vec<Vec3>> = clouds.iter().map(|(p, _)| p.clone()).collect();
    let features = embed(net, &pts)?;
    let (train, test) = stratified_split(&labels, seed);
    let accuracy = linear_probe(&features, &labels, classes.len(), &train, &test)?;
    Ok(ProbeResult {
        accuracy,
        train_count: train.len(),
        test_count: test.len(),
        classes,
    })
}
