//! Query sampling and unsigned-distance targets for the implicit task.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};
use crate::spatial::{brute_nearest2, KdTree};

pub const DEFAULT_QUERIES: usize = 1024;
pub const DEFAULT_NEAR_FRACTION: f64 = 0.5;
pub const DEFAULT_SIGMA: f64 = 0.05;

/// Query positions in `[-1, 1]^3` with their distance to the cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    pub queries: Vec<Vec3>,
    pub distances: Vec<f64>,
    pub seed: u64,
    pub strategy: String,
}

/// Mixes `ceil(near_fraction * k)` noisy copies of cloud points with uniform
/// samples from the cube. Coordinates are clamped to `[-1, 1]`.
pub fn sample_queries(pc: &PointCloud, k: usize, near_fraction: f64, sigma: f64, seed: u64) -> Result<Vec<Vec3>> {
    if k == 0 {
        return Err(Error::InvalidArgument("query count must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&near_fraction) {
        return Err(Error::InvalidArgument(format!("near fraction {near_fraction} outside [0, 1]")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    let near = ((near_fraction * k as f64).ceil() as usize).min(k);
    if near > 0 && pc.is_empty() {
        return Err(Error::InvalidArgument("near-surface queries need a non-empty cloud".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::with_capacity(k);
    for _ in 0..near {
        let p = pc.points[rng.gen_range(0..pc.len())];
        let q = if sigma > 0.0 {
            p + Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)) * sigma
        } else {
            p
        };
        out.push(q.map(|c| c.clamp(-1.0, 1.0)));
    }
    for _ in near..k {
        out.push(Vec3::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)));
    }
    Ok(out)
}

/// Distance from each query to its nearest cloud point via a kd-tree.
pub fn udf_ground_truth(pc: &PointCloud, queries: &[Vec3]) -> Result<Vec<f64>> {
    if pc.is_empty() {
        return Err(Error::InvalidArgument("distance to an empty cloud".into()));
    }
    let tree = KdTree::new(&pc.points);
    Ok(queries
        .iter()
        .map(|q| tree.nearest2(q).expect("non-empty tree").1.sqrt())
        .collect())
}

/// The same distances by exhaustive scan.
pub fn udf_brute_force(pc: &PointCloud, queries: &[Vec3]) -> Result<Vec<f64>> {
    if pc.is_empty() {
        return Err(Error::InvalidArgument("distance to an empty cloud".into()));
    }
    Ok(queries
        .iter()
        .map(|q| brute_nearest2(&pc.points, q, None).expect("non-empty cloud").1.sqrt())
        .collect())
}

pub const QUERY_MAGIC: &[u8; 6] = b"EPQRY1";

impl QuerySet {
    pub fn build(pc: &PointCloud, k: usize, near_fraction: f64, sigma: f64, seed: u64) -> Result<Self> {
        let queries = sample_queries(pc, k, near_fraction, sigma, seed)?;
        let distances = udf_ground_truth(pc, &queries)?;
        Ok(Self {
            queries,
            distances,
            seed,
            strategy: format!("mixture near={near_fraction} sigma={sigma}"),
        })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// `EPQRY1`, u64 K, u64 seed, u32 tag length, tag bytes, then K records
    /// of `(x, y, z, delta)`; all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(26 + self.strategy.len() + 32 * self.len());
        out.extend_from_slice(QUERY_MAGIC);
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.strategy.len() as u32).to_le_bytes());
        out.extend_from_slice(self.strategy.as_bytes());
        for (q, d) in self.queries.iter().zip(&self.distances) {
            for c in [q.x, q.y, q.z, *d] {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let take = |at: usize, n: usize| -> std::result::Result<&[u8], String> {
            bytes.get(at..at + n).ok_or_else(|| "truncated query set".to_string())
        };
        if take(0, 6)? != QUERY_MAGIC {
            return Err("missing EPQRY1 header".into());
        }
        let k = u64::from_le_bytes(take(6, 8)?.try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(take(14, 8)?.try_into().unwrap());
        let tag_len = u32::from_le_bytes(take(22, 4)?.try_into().unwrap()) as usize;
        let strategy = String::from_utf8(take(26, tag_len)?.to_vec()).map_err(|_| "strategy tag is not UTF-8")?;
        let body = &bytes[26 + tag_len..];
        if body.len() != 32 * k {
            return Err(format!("expected {} record bytes for {k} queries, found {}", 32 * k, body.len()));
        }
        let mut queries = Vec::with_capacity(k);
        let mut distances = Vec::with_capacity(k);
        for rec in body.chunks_exact(32) {
            let v: Vec<f64> = rec.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            queries.push(Vec3::new(v[0], v[1], v[2]));
            distances.push(v[3]);
        }
        Ok(Self {
            queries,
            distances,
            seed,
            strategy,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|m| Error::format(path, m))
    }
}
