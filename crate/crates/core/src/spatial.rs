//! Static 3-d tree for nearest-neighbour queries.
//!
//! Distances are computed with [`dist2`], the same expression a brute-force
//! scan uses, so the returned minimum is bit-identical to the scan's.

use crate::geometry::Vec3;

#[inline]
pub fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// Brute-force nearest squared distance, skipping index `skip` if given.
pub fn brute_nearest2(points: &[Vec3], q: &Vec3, skip: Option<usize>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let d = dist2(p, q);
        if best.map_or(true, |(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    // Point indices laid out as an implicit balanced tree: the node of range
    // [lo, hi) is at (lo + hi) / 2.
    order: Vec<usize>,
    axis: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axis = vec![0u8; points.len()];
        build(points, &mut order, &mut axis, 0);
        Self {
            points: points.to_vec(),
            order,
            axis,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Index and squared distance of the closest point.
    pub fn nearest2(&self, q: &Vec3) -> Option<(usize, f64)> {
        self.nearest2_skip(q, None)
    }

    /// Like [`nearest2`](Self::nearest2) but ignores point `skip`.
    pub fn nearest2_skip(&self, q: &Vec3, skip: Option<usize>) -> Option<(usize, f64)> {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, self.order.len(), q, skip, &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    pub fn nearest_distance(&self, q: &Vec3) -> Option<f64> {
        self.nearest2(q).map(|(_, d)| d.sqrt())
    }

    fn search(&self, lo: usize, hi: usize, q: &Vec3, skip: Option<usize>, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let pi = self.order[mid];
        let p = &self.points[pi];
        if Some(pi) != skip {
            let d = dist2(p, q);
            if d < best.1 || (d == best.1 && pi < best.0) {
                *best = (pi, d);
            }
        }
        let a = self.axis[mid] as usize;
        let diff = q[a] - p[a];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, skip, best);
        if diff * diff <= best.1 {
            self.search(far.0, far.1, q, skip, best);
        }
    }
}

fn build(points: &[Vec3], order: &mut [usize], axis: &mut [u8], depth: usize) {
    if order.len() <= 1 {
        if let Some(a) = axis.first_mut() {
            *a = (depth % 3) as u8;
        }
        return;
    }
    // Split on the axis of largest spread.
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &i in order.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let a = (hi - lo).imax();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&i, &j| {
        points[i][a].total_cmp(&points[j][a]).then(i.cmp(&j))
    });
    axis[mid] = a as u8;
    let (left, rest) = order.split_at_mut(mid);
    let (la, ra) = axis.split_at_mut(mid);
    build(points, left, la, depth + 1);
    build(points, &mut rest[1..], &mut ra[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force_with_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts: Vec<Vec3> = (0..300)
            .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        pts.extend_from_slice(&pts[..20].to_vec());
        let tree = KdTree::new(&pts);
        for _ in 0..500 {
            let q = Vec3::new(rng.gen_range(-0.5..1.5), rng.gen(), rng.gen());
            let (_, a) = tree.nearest2(&q).unwrap();
            let (_, b) = brute_nearest2(&pts, &q, None).unwrap();
            assert_eq!(a, b);
        }
        for i in 0..pts.len() {
            let (_, a) = tree.nearest2_skip(&pts[i], Some(i)).unwrap();
            let (_, b) = brute_nearest2(&pts, &pts[i], Some(i)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn empty_tree() {
        let tree = KdTree::new(&[]);
        assert!(tree.nearest2(&Vec3::zeros()).is_none());
    }
}
