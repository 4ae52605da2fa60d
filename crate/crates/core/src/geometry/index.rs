use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{squared_distance, PointCloud};
use crate::error::{Error, Result};

/// Below this many points the index answers queries by linear scan.
pub const BRUTE_FORCE_THRESHOLD: usize = 512;

const LEAF_SIZE: usize = 8;
const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMode {
    /// k-d partition with exact pruning.
    Accelerated,
    /// Linear scan; the correctness reference for `Accelerated`.
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

/// Exact proximity queries over a fixed point set.
///
/// Both query modes compute distances with the same arithmetic and break
/// ties by the smaller point id, so their answers are identical bit for bit.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    coords: Vec<f64>,
    dim: usize,
    mode: QueryMode,
    tree: Option<KdTree>,
}

/// Builds an index over `cloud` in the default mode for its size.
pub fn build_index(cloud: &PointCloud) -> Result<SpatialIndex> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(SpatialIndex::new(
        cloud.coords().to_vec(),
        cloud.ambient_dim(),
    ))
}

impl SpatialIndex {
    /// Indexes a row-major buffer of `dim`-tuples. Duplicate points are
    /// tolerated here (lean midpoints may coincide).
    pub fn new(coords: Vec<f64>, dim: usize) -> Self {
        let len = coords.len().checked_div(dim).unwrap_or(0);
        let mode = if len < BRUTE_FORCE_THRESHOLD {
            QueryMode::BruteForce
        } else {
            QueryMode::Accelerated
        };
        Self::with_mode(coords, dim, mode)
    }

    pub fn with_mode(coords: Vec<f64>, dim: usize, mode: QueryMode) -> Self {
        assert!(dim > 0, "index dimension must be positive");
        assert_eq!(coords.len() % dim, 0, "coordinate buffer is ragged");
        let tree = match mode {
            QueryMode::Accelerated if !coords.is_empty() => Some(KdTree::build(&coords, dim)),
            _ => None,
        };
        SpatialIndex {
            coords,
            dim,
            mode,
            tree,
        }
    }

    pub fn mode(&self) -> QueryMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    /// Closest indexed point to `x`, skipping `exclude`. Ties go to the
    /// smaller id.
    pub fn nearest(&self, x: &[f64], exclude: Option<usize>) -> Result<Neighbor> {
        self.check_dim(x)?;
        let mut best = Candidate {
            d2: f64::INFINITY,
            id: usize::MAX,
        };
        match &self.tree {
            Some(tree) => tree.nearest(self, 0, x, exclude, &mut best),
            None => {
                for id in 0..self.len() {
                    if Some(id) == exclude {
                        continue;
                    }
                    let c = Candidate {
                        d2: squared_distance(self.point(id), x),
                        id,
                    };
                    if c < best {
                        best = c;
                    }
                }
            }
        }
        if best.id == usize::MAX {
            return Err(Error::EmptyCloud);
        }
        Ok(Neighbor {
            id: best.id,
            distance: best.d2.sqrt(),
        })
    }

    /// The `k` closest points to `x` ordered by (distance, id).
    pub fn k_nearest(&self, x: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<Neighbor>> {
        self.check_dim(x)?;
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut found: Vec<Candidate> = match &self.tree {
            Some(tree) => {
                let mut heap = BinaryHeap::with_capacity(k + 1);
                tree.k_nearest(self, 0, x, k, exclude, &mut heap);
                heap.into_vec()
            }
            None => (0..self.len())
                .filter(|&id| Some(id) != exclude)
                .map(|id| Candidate {
                    d2: squared_distance(self.point(id), x),
                    id,
                })
                .collect(),
        };
        found.sort_unstable();
        found.truncate(k);
        Ok(found
            .into_iter()
            .map(|c| Neighbor {
                id: c.id,
                distance: c.d2.sqrt(),
            })
            .collect())
    }

    /// True iff no point outside `exclude` lies in the closed ball
    /// `B(center, radius)`.
    pub fn ball_is_empty(&self, center: &[f64], radius: f64, exclude: &[usize]) -> bool {
        debug_assert_eq!(center.len(), self.dim);
        let r2 = radius * radius;
        match &self.tree {
            Some(tree) => !tree.any_within(self, 0, center, r2, exclude),
            None => !(0..self.len())
                .any(|id| !exclude.contains(&id) && squared_distance(self.point(id), center) <= r2),
        }
    }

    /// Ids of all points in the closed ball `B(center, radius)`, ascending.
    pub fn within_radius(&self, center: &[f64], radius: f64) -> Vec<usize> {
        debug_assert_eq!(center.len(), self.dim);
        let r2 = radius * radius;
        let mut out = Vec::new();
        match &self.tree {
            Some(tree) => tree.collect_within(self, 0, center, r2, &mut out),
            None => out.extend(
                (0..self.len()).filter(|&id| squared_distance(self.point(id), center) <= r2),
            ),
        }
        out.sort_unstable();
        out
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    d2: f64,
    id: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2.total_cmp(&other.d2).then(self.id.cmp(&other.id))
    }
}

#[derive(Debug, Clone)]
struct KdNode {
    start: u32,
    end: u32,
    left: u32,
    right: u32,
}

#[derive(Debug, Clone)]
struct KdTree {
    perm: Vec<u32>,
    nodes: Vec<KdNode>,
    /// Per node: `dim` lower bounds followed by `dim` upper bounds.
    bounds: Vec<f64>,
    dim: usize,
}

impl KdTree {
    fn build(coords: &[f64], dim: usize) -> Self {
        let n = coords.len() / dim;
        let mut tree = KdTree {
            perm: (0..n as u32).collect(),
            nodes: Vec::new(),
            bounds: Vec::new(),
            dim,
        };
        tree.build_node(coords, 0, n);
        tree
    }

    fn build_node(&mut self, coords: &[f64], start: usize, end: usize) -> u32 {
        let dim = self.dim;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &id in &self.perm[start..end] {
            let p = &coords[id as usize * dim..(id as usize + 1) * dim];
            for d in 0..dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let node_id = self.nodes.len() as u32;
        self.nodes.push(KdNode {
            start: start as u32,
            end: end as u32,
            left: NO_CHILD,
            right: NO_CHILD,
        });
        self.bounds.extend_from_slice(&lo);
        self.bounds.extend_from_slice(&hi);

        let (split_dim, extent) =
            (0..dim)
                .map(|d| (d, hi[d] - lo[d]))
                .fold((0, f64::NEG_INFINITY), |acc, cur| {
                    if cur.1 > acc.1 {
                        cur
                    } else {
                        acc
                    }
                });
        if end - start <= LEAF_SIZE || extent <= 0.0 {
            return node_id;
        }
        let mid = start + (end - start) / 2;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            let ca = coords[a as usize * dim + split_dim];
            let cb = coords[b as usize * dim + split_dim];
            ca.total_cmp(&cb).then(a.cmp(&b))
        });
        let left = self.build_node(coords, start, mid);
        let right = self.build_node(coords, mid, end);
        let node = &mut self.nodes[node_id as usize];
        node.left = left;
        node.right = right;
        node_id
    }

    /// Squared distance from `x` to the node's bounding box. Each term is
    /// computed from box faces that are actual point coordinates, so it never
    /// exceeds the true squared distance to any point in the box, even in
    /// floating point.
    #[inline]
    fn box_d2(&self, node: u32, x: &[f64]) -> f64 {
        let base = node as usize * 2 * self.dim;
        let lo = &self.bounds[base..base + self.dim];
        let hi = &self.bounds[base + self.dim..base + 2 * self.dim];
        let mut acc = 0.0;
        for d in 0..self.dim {
            let t = if x[d] < lo[d] {
                lo[d] - x[d]
            } else if x[d] > hi[d] {
                x[d] - hi[d]
            } else {
                0.0
            };
            acc += t * t;
        }
        acc
    }

    fn ordered_children(&self, node: &KdNode, x: &[f64]) -> [(u32, f64); 2] {
        let dl = self.box_d2(node.left, x);
        let dr = self.box_d2(node.right, x);
        if dr < dl {
            [(node.right, dr), (node.left, dl)]
        } else {
            [(node.left, dl), (node.right, dr)]
        }
    }

    fn nearest(
        &self,
        index: &SpatialIndex,
        node_id: u32,
        x: &[f64],
        exclude: Option<usize>,
        best: &mut Candidate,
    ) {
        let node = &self.nodes[node_id as usize];
        if node.left == NO_CHILD {
            for &id in &self.perm[node.start as usize..node.end as usize] {
                let id = id as usize;
                if Some(id) == exclude {
                    continue;
                }
                let c = Candidate {
                    d2: squared_distance(index.point(id), x),
                    id,
                };
                if c < *best {
                    *best = c;
                }
            }
            return;
        }
        for (child, d2) in self.ordered_children(node, x) {
            if d2 <= best.d2 {
                self.nearest(index, child, x, exclude, best);
            }
        }
    }

    fn k_nearest(
        &self,
        index: &SpatialIndex,
        node_id: u32,
        x: &[f64],
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        let node = &self.nodes[node_id as usize];
        if node.left == NO_CHILD {
            for &id in &self.perm[node.start as usize..node.end as usize] {
                let id = id as usize;
                if Some(id) == exclude {
                    continue;
                }
                let c = Candidate {
                    d2: squared_distance(index.point(id), x),
                    id,
                };
                if heap.len() < k {
                    heap.push(c);
                } else if c < *heap.peek().expect("heap is full") {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        for (child, d2) in self.ordered_children(node, x) {
            let bound = if heap.len() < k {
                f64::INFINITY
            } else {
                heap.peek().expect("heap is full").d2
            };
            if d2 <= bound {
                self.k_nearest(index, child, x, k, exclude, heap);
            }
        }
    }

    fn any_within(
        &self,
        index: &SpatialIndex,
        node_id: u32,
        c: &[f64],
        r2: f64,
        exclude: &[usize],
    ) -> bool {
        if self.box_d2(node_id, c) > r2 {
            return false;
        }
        let node = &self.nodes[node_id as usize];
        if node.left == NO_CHILD {
            return self.perm[node.start as usize..node.end as usize]
                .iter()
                .any(|&id| {
                    let id = id as usize;
                    !exclude.contains(&id) && squared_distance(index.point(id), c) <= r2
                });
        }
        self.any_within(index, node.left, c, r2, exclude)
            || self.any_within(index, node.right, c, r2, exclude)
    }

    fn collect_within(
        &self,
        index: &SpatialIndex,
        node_id: u32,
        c: &[f64],
        r2: f64,
        out: &mut Vec<usize>,
    ) {
        if self.box_d2(node_id, c) > r2 {
            return;
        }
        let node = &self.nodes[node_id as usize];
        if node.left == NO_CHILD {
            out.extend(
                self.perm[node.start as usize..node.end as usize]
                    .iter()
                    .map(|&id| id as usize)
                    .filter(|&id| squared_distance(index.point(id), c) <= r2),
            );
            return;
        }
        self.collect_within(index, node.left, c, r2, out);
        self.collect_within(index, node.right, c, r2, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rows: &[[f64; 2]]) -> PointCloud {
        PointCloud::from_rows(rows, 1).unwrap()
    }

    fn random_coords(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f64> {
        (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn nearest_examples() {
        let idx = build_index(&cloud(&[[0.0, 0.0], [3.0, 0.0]])).unwrap();
        assert_eq!(
            idx.nearest(&[1.0, 0.0], None).unwrap(),
            Neighbor {
                id: 0,
                distance: 1.0
            }
        );
        assert_eq!(
            idx.nearest(&[0.0, 0.0], Some(0)).unwrap(),
            Neighbor {
                id: 1,
                distance: 3.0
            }
        );
    }

    #[test]
    fn nearest_with_everything_excluded() {
        let idx = build_index(&cloud(&[[0.0, 0.0]])).unwrap();
        assert_eq!(idx.nearest(&[1.0, 0.0], Some(0)), Err(Error::EmptyCloud));
    }

    #[test]
    fn ties_go_to_smaller_id() {
        let coords = vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0];
        for mode in [QueryMode::BruteForce, QueryMode::Accelerated] {
            let idx = SpatialIndex::with_mode(coords.clone(), 2, mode);
            assert_eq!(idx.nearest(&[0.0, 0.0], None).unwrap().id, 0);
            let ids: Vec<_> = idx
                .k_nearest(&[0.0, 0.0], 3, None)
                .unwrap()
                .iter()
                .map(|n| n.id)
                .collect();
            assert_eq!(ids, vec![0, 1, 2]);
        }
    }

    #[test]
    fn closed_ball_convention() {
        let idx = build_index(&cloud(&[[1.0, 0.0]])).unwrap();
        assert!(idx.ball_is_empty(&[0.0, 0.0], 0.5, &[]));
        assert!(!idx.ball_is_empty(&[0.0, 0.0], 1.0, &[]));
        assert!(idx.ball_is_empty(&[0.0, 0.0], 1.0, &[0]));
    }

    #[test]
    fn modes_agree_on_random_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..40 {
            let dim = 1 + trial % 4;
            let n = 50 + trial * 13;
            let coords = random_coords(&mut rng, n, dim);
            let brute = SpatialIndex::with_mode(coords.clone(), dim, QueryMode::BruteForce);
            let fast = SpatialIndex::with_mode(coords, dim, QueryMode::Accelerated);
            for _ in 0..25 {
                let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.2..1.2)).collect();
                let exclude = Some(rng.gen_range(0..n));
                assert_eq!(brute.nearest(&q, exclude), fast.nearest(&q, exclude));
                let k = rng.gen_range(1..20);
                assert_eq!(brute.k_nearest(&q, k, None), fast.k_nearest(&q, k, None));
                let r = rng.gen_range(0.0..0.5);
                assert_eq!(brute.within_radius(&q, r), fast.within_radius(&q, r));
                assert_eq!(
                    brute.ball_is_empty(&q, r, &[]),
                    fast.ball_is_empty(&q, r, &[])
                );
            }
        }
    }

    #[test]
    fn handles_repeated_points() {
        let coords = vec![0.5; 2 * 40];
        let idx = SpatialIndex::with_mode(coords, 2, QueryMode::Accelerated);
        assert_eq!(idx.nearest(&[0.0, 0.0], None).unwrap().id, 0);
        assert_eq!(idx.within_radius(&[0.5, 0.5], 0.0).len(), 40);
    }
}
