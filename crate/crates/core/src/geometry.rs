//! Point clouds, tetrahedral meshes and the normalization into unit space.
//!
//! Clouds are normalized so that their centroid sits at the origin and the
//! farthest point lies on the unit sphere. Query points for the distance task
//! are then drawn from the cube `[-1, 1]^3`.

use std::collections::HashSet;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// A raw or normalized point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub label: Option<String>,
    pub source_id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self {
            points,
            label: None,
            source_id: String::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        centroid(&self.points)
    }

    pub fn check_finite(&self) -> Result<()> {
        if let Some(i) = self.points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite(format!("point {i} of cloud '{}'", self.source_id)));
        }
        Ok(())
    }
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    if points.is_empty() {
        return Vec3::zeros();
    }
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    sum / points.len() as f64
}

/// Similarity map `p -> (p + translation) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub translation: Vec3,
    pub scale: f64,
}

impl Transform {
    pub fn identity() -> Self {
        Self {
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p + self.translation) * self.scale
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        p / self.scale - self.translation
    }

    pub fn compose_after(&self, first: &Transform) -> Transform {
        // (((p + t1) s1) + t2) s2 = (p + t1 + t2 / s1) s1 s2
        Transform {
            translation: first.translation + self.translation / first.scale,
            scale: first.scale * self.scale,
        }
    }
}

/// Centers the cloud at the origin and scales it so the farthest point has
/// radius one. Returns the normalized cloud and the map that produced it.
pub fn normalize_unit_sphere(pc: &PointCloud) -> Result<(PointCloud, Transform)> {
    if pc.is_empty() {
        return Err(Error::DegenerateCloud(0));
    }
    pc.check_finite()?;
    let c = pc.centroid();
    let radius = pc
        .points
        .iter()
        .map(|p| (p - c).norm())
        .fold(0.0_f64, f64::max);
    if radius <= f64::MIN_POSITIVE {
        return Err(Error::ZeroExtent);
    }
    let transform = Transform {
        translation: -c,
        scale: 1.0 / radius,
    };
    let points = pc.points.iter().map(|p| transform.apply(p)).collect();
    Ok((
        PointCloud {
            points,
            label: pc.label.clone(),
            source_id: pc.source_id.clone(),
        },
        transform,
    ))
}

/// Signed volume `det([b - a, c - a, d - a]) / 6`.
pub fn signed_volume(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

/// Tetrahedral mesh with a map from each mesh vertex back to the index of the
/// cloud point it came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TetMesh {
    pub vertices: Vec<Vec3>,
    pub cells: Vec<[usize; 4]>,
    pub retained_map: Vec<usize>,
}

impl TetMesh {
    /// Builds a mesh whose vertices are the given cloud points in order.
    pub fn from_points(vertices: Vec<Vec3>, cells: Vec<[usize; 4]>) -> Self {
        let retained_map = (0..vertices.len()).collect();
        Self {
            vertices,
            cells,
            retained_map,
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_points(&self, cell: usize) -> [Vec3; 4] {
        let c = self.cells[cell];
        [
            self.vertices[c[0]],
            self.vertices[c[1]],
            self.vertices[c[2]],
            self.vertices[c[3]],
        ]
    }

    pub fn cell_volume(&self, cell: usize) -> f64 {
        let [a, b, c, d] = self.cell_points(cell);
        signed_volume(&a, &b, &c, &d)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.cells.len()).map(|i| self.cell_volume(i)).sum()
    }

    /// Checks index ranges, orientation, duplicate cells and orphan vertices.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if self.retained_map.len() != nv {
            return Err(Error::InvalidMesh(format!(
                "retained_map has {} entries for {nv} vertices",
                self.retained_map.len()
            )));
        }
        let mut used = vec![false; nv];
        let mut seen = HashSet::with_capacity(self.cells.len());
        for (ci, cell) in self.cells.iter().enumerate() {
            for &v in cell {
                if v >= nv {
                    return Err(Error::InvalidMesh(format!(
                        "cell {ci} references vertex {v} (only {nv} vertices)"
                    )));
                }
                used[v] = true;
            }
            let mut key = *cell;
            key.sort_unstable();
            if key.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidMesh(format!("cell {ci} repeats a vertex")));
            }
            if !seen.insert(key) {
                return Err(Error::InvalidMesh(format!("cell {ci} is a duplicate")));
            }
            let vol = self.cell_volume(ci);
            if !(vol > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "cell {ci} has non-positive volume {vol:e}"
                )));
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not used by any cell")));
        }
        Ok(())
    }

    /// Keeps only the listed cells and drops vertices no longer referenced,
    /// composing the retained map.
    pub fn subset_cells(&self, keep: &[usize]) -> TetMesh {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut retained_map = Vec::new();
        let mut cells = Vec::with_capacity(keep.len());
        for &ci in keep {
            let mut cell = self.cells[ci];
            for v in cell.iter_mut() {
                if remap[*v] == usize::MAX {
                    remap[*v] = vertices.len();
                    vertices.push(self.vertices[*v]);
                    retained_map.push(self.retained_map[*v]);
                }
                *v = remap[*v];
            }
            cells.push(cell);
        }
        // Renumber so vertex order follows the original order.
        let mut order: Vec<usize> = (0..vertices.len()).collect();
        order.sort_by_key(|&i| retained_map[i]);
        let mut inv = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        let vertices = order.iter().map(|&i| vertices[i]).collect();
        let retained_map = order.iter().map(|&i| retained_map[i]).collect();
        for cell in cells.iter_mut() {
            for v in cell.iter_mut() {
                *v = inv[*v];
            }
        }
        TetMesh {
            vertices,
            cells,
            retained_map,
        }
    }

    /// Vertex-to-cell incidence lists.
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.vertices.len()];
        for (ci, cell) in self.cells.iter().enumerate() {
            for &v in cell {
                inc[v].push(ci);
            }
        }
        inc
    }

    /// The face-connected component with the most cells (first on ties).
    pub fn largest_face_component(&self) -> TetMesh {
        let comps = self.face_components();
        match comps.iter().enumerate().max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0))) {
            Some((_, c)) if c.len() < self.cells.len() => {
                let mut keep = c.clone();
                keep.sort_unstable();
                self.subset_cells(&keep)
            }
            _ => self.clone(),
        }
    }

    /// Groups cells into components connected through shared triangular faces.
    pub fn face_components(&self) -> Vec<Vec<usize>> {
        use std::collections::HashMap;
        let mut faces: HashMap<[usize; 3], Vec<usize>> = HashMap::new();
        for (ci, cell) in self.cells.iter().enumerate() {
            for skip in 0..4 {
                let mut f = [0; 3];
                let mut k = 0;
                for (j, &v) in cell.iter().enumerate() {
                    if j != skip {
                        f[k] = v;
                        k += 1;
                    }
                }
                f.sort_unstable();
                faces.entry(f).or_default().push(ci);
            }
        }
        let mut parent: Vec<usize> = (0..self.cells.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for owners in faces.values() {
            for w in owners.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for ci in 0..self.cells.len() {
            let r = find(&mut parent, ci);
            groups.entry(r).or_default().push(ci);
        }
        groups.into_values().collect()
    }
}
