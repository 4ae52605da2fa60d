//! Slow, independent reference implementations used by the self-test and
//! the test suites: a plain Vietoris-Rips builder, Z/2 linear algebra on
//! dense bit vectors, and small geometric helpers.

use crate::complex::FilteredCliqueComplex;
use crate::error::Result;
use crate::geometry::{distance, squared_distance, PointCloud};
use crate::homology::BoundaryMatrix;

/// Vietoris-Rips complex: every vertex set of pairwise distance at most
/// `radius`, up to dimension `max_dim`. Filtration is the longest edge.
pub fn rips_complex(
    cloud: &PointCloud,
    radius: f64,
    max_dim: usize,
) -> Result<FilteredCliqueComplex> {
    let n = cloud.len();
    let dist = |a: usize, b: usize| distance(cloud.point(a), cloud.point(b));
    let adjacent =
        |a: usize, b: usize| squared_distance(cloud.point(a), cloud.point(b)) <= radius * radius;

    let mut out: Vec<(Vec<u32>, f64)> = (0..n).map(|v| (vec![v as u32], 0.0)).collect();
    let mut layer: Vec<(Vec<usize>, f64)> = (0..n).map(|v| (vec![v], 0.0)).collect();
    for _ in 0..max_dim {
        let mut next = Vec::new();
        for (simplex, f) in &layer {
            let last = *simplex.last().unwrap();
            for w in last + 1..n {
                if simplex.iter().all(|&v| adjacent(v, w)) {
                    let g = simplex.iter().map(|&v| dist(v, w)).fold(*f, f64::max);
                    let mut s = simplex.clone();
                    s.push(w);
                    next.push((s, g));
                }
            }
        }
        out.extend(
            next.iter()
                .map(|(s, f)| (s.iter().map(|&v| v as u32).collect(), *f)),
        );
        layer = next;
    }
    FilteredCliqueComplex::from_simplices(out, radius, radius)
}

/// A dense Z/2 vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitVec {
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn add(&mut self, other: &BitVec) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    fn highest(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + 63 - w.leading_zeros() as usize)
    }
}

/// Rank over Z/2.
pub fn rank(vectors: &[BitVec]) -> usize {
    let mut basis: Vec<(usize, BitVec)> = Vec::new();
    for v in vectors {
        let mut v = v.clone();
        loop {
            match v.highest() {
                None => break,
                Some(h) => match basis.iter().find(|(p, _)| *p == h) {
                    Some((_, b)) => v.add(b),
                    None => {
                        basis.push((h, v));
                        break;
                    }
                },
            }
        }
    }
    basis.len()
}

/// A basis of the kernel of the linear map sending standard basis vector
/// `j` of the domain to `images[j]`.
pub fn kernel(images: &[BitVec], domain_len: usize) -> Vec<BitVec> {
    // Row-reduce the images while recording the combination that built each.
    let mut reduced: Vec<(usize, BitVec, BitVec)> = Vec::new();
    let mut out = Vec::new();
    for (j, img) in images.iter().enumerate() {
        let mut v = img.clone();
        let mut combo = BitVec::zeros(domain_len);
        combo.flip(j);
        loop {
            match v.highest() {
                None => {
                    out.push(combo);
                    break;
                }
                Some(h) => match reduced.iter().find(|(p, _, _)| *p == h) {
                    Some((_, b, c)) => {
                        v.add(b);
                        combo.add(c);
                    }
                    None => {
                        reduced.push((h, v, combo));
                        break;
                    }
                },
            }
        }
    }
    out
}

/// Rank of `H_dim(K_lo) -> H_dim(K_hi)` by linear algebra:
/// `dim Z(K_lo) - dim(Z(K_lo) ∩ B(K_hi))`, with the intersection dimension
/// from `dim Z + dim B - dim(Z + B)`.
pub fn image_rank_oracle(complex: &FilteredCliqueComplex, lo: f64, hi: f64, dim: usize) -> usize {
    let simplices = complex.simplices();
    let cells: Vec<&[u32]> = simplices
        .iter()
        .filter(|s| s.dim() == dim && s.filtration <= hi)
        .map(|s| s.vertices.as_slice())
        .collect();
    let index_of = |v: &[u32]| cells.iter().position(|c| *c == v);
    let boundary_of = |vertices: &[u32], target: &dyn Fn(&[u32]) -> Option<usize>, len: usize| {
        let mut b = BitVec::zeros(len);
        if vertices.len() > 1 {
            for skip in 0..vertices.len() {
                let face: Vec<u32> = vertices
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                if let Some(i) = target(&face) {
                    b.flip(i);
                }
            }
        }
        b
    };

    // Cycles of K_lo, as vectors over the dim-cells of K_hi.
    let lo_cells: Vec<usize> = (0..cells.len())
        .filter(|&i| {
            simplices
                .iter()
                .any(|s| s.vertices.as_slice() == cells[i] && s.filtration <= lo)
        })
        .collect();
    let faces: Vec<&[u32]> = simplices
        .iter()
        .filter(|s| dim > 0 && s.dim() == dim - 1)
        .map(|s| s.vertices.as_slice())
        .collect();
    let face_index = |v: &[u32]| faces.iter().position(|c| *c == v);
    let images: Vec<BitVec> = lo_cells
        .iter()
        .map(|&i| boundary_of(cells[i], &face_index, faces.len()))
        .collect();
    let cycles: Vec<BitVec> = kernel(&images, lo_cells.len())
        .into_iter()
        .map(|combo| {
            let mut v = BitVec::zeros(cells.len());
            for (k, &i) in lo_cells.iter().enumerate() {
                if combo.get(k) {
                    v.flip(i);
                }
            }
            v
        })
        .collect();

    let boundaries: Vec<BitVec> = simplices
        .iter()
        .filter(|s| s.dim() == dim + 1 && s.filtration <= hi)
        .map(|s| boundary_of(&s.vertices, &index_of, cells.len()))
        .collect();

    let z = cycles.len();
    let b = rank(&boundaries);
    let mut sum = cycles;
    sum.extend(boundaries);
    let z_plus_b = rank(&sum);
    let intersection = z + b - z_plus_b;
    z - intersection
}

/// True when the boundary of every boundary vanishes.
pub fn boundary_squared_is_zero(matrix: &BoundaryMatrix) -> bool {
    let n = matrix.columns.len();
    matrix.columns.iter().all(|col| {
        let mut acc = BitVec::zeros(n);
        for &face in col {
            for &ff in &matrix.columns[face] {
                acc.flip(ff);
            }
        }
        acc.is_zero()
    })
}

/// Alternating count of simplices present at `level`.
pub fn euler_characteristic(complex: &FilteredCliqueComplex, level: f64) -> i64 {
    complex
        .at_level(level)
        .map(|s| if s.dim() % 2 == 0 { 1 } else { -1 })
        .sum()
}

/// Length of the longest edge of a Euclidean minimum spanning tree: the
/// smallest radius at which the Rips graph is connected. Prim, O(n^2).
pub fn longest_mst_edge(cloud: &PointCloud) -> f64 {
    let n = cloud.len();
    if n < 2 {
        return 0.0;
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut current = 0;
    in_tree[0] = true;
    let mut longest = 0.0f64;
    for _ in 1..n {
        let p = cloud.point(current);
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let d = squared_distance(p, cloud.point(v));
            if d < best[v] {
                best[v] = d;
            }
            if best[v] < next_d {
                next_d = best[v];
                next = v;
            }
        }
        in_tree[next] = true;
        longest = longest.max(next_d);
        current = next;
    }
    longest.sqrt()
}

/// Greedy net in id order: a point is kept unless a kept point lies within
/// `radius`.
pub fn greedy_net(cloud: &PointCloud, radius: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for p in 0..cloud.len() {
        let x = cloud.point(p);
        if kept
            .iter()
            .all(|&q| squared_distance(x, cloud.point(q)) > radius * radius)
        {
            kept.push(p);
        }
    }
    kept
}
