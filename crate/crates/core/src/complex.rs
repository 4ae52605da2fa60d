//! Adaptive Rips-like flag complexes.
//!
//! An edge `pq` enters at scale `d(p,q) / (lnfs(p) + lnfs(q))`; higher
//! simplices enter when their last edge does. Scales are dimensionless, so
//! the same levels work for any sampling density or unit of length.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{squared_distance, PointCloud, SpatialIndex};

/// Default cap on stored simplices.
pub const DEFAULT_SIMPLEX_CAP: usize = 50_000_000;

/// `d(p,q) / (lnfs(p) + lnfs(q))`.
pub fn edge_scale(cloud: &PointCloud, lnfs: &[f64], p: usize, q: usize) -> Result<f64> {
    for id in [p, q] {
        match lnfs.get(id) {
            None => return Err(Error::MissingLnfs(id)),
            Some(&v) if !(v > 0.0) => return Err(Error::ZeroLnfs(id)),
            _ => {}
        }
    }
    let d = squared_distance(cloud.point(p), cloud.point(q)).sqrt();
    Ok(d / (lnfs[p] + lnfs[q]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    /// Strictly increasing vertex ids.
    pub vertices: Vec<u32>,
    pub filtration: f64,
}

impl Simplex {
    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }
}

/// A filtered simplicial complex with two marked levels.
///
/// Simplices are sorted by (filtration, dimension, vertex ids), which puts
/// every face before its cofaces.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredCliqueComplex {
    simplices: Vec<Simplex>,
    num_vertices: usize,
    alpha_lo: f64,
    alpha_hi: f64,
    /// Highest dimension whose homology the stored simplices determine.
    exact_through: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexParams {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub max_dim: usize,
    pub simplex_cap: usize,
}

impl ComplexParams {
    pub fn two_level(alpha_lo: f64, alpha_hi: f64, max_dim: usize) -> Self {
        ComplexParams {
            alpha_lo,
            alpha_hi,
            max_dim,
            simplex_cap: DEFAULT_SIMPLEX_CAP,
        }
    }

    /// A single level `alpha`, used when only one complex is needed.
    pub fn single_level(alpha: f64, max_dim: usize) -> Self {
        Self::two_level(alpha, alpha, max_dim)
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha_lo > 0.0 && self.alpha_lo.is_finite()) {
            return Err(Error::OutOfRange {
                name: "alpha_lo",
                value: self.alpha_lo,
                range: "(0, inf)",
            });
        }
        if !(self.alpha_hi >= self.alpha_lo && self.alpha_hi.is_finite()) {
            return Err(Error::OutOfRange {
                name: "alpha_hi",
                value: self.alpha_hi,
                range: "[alpha_lo, inf)",
            });
        }
        if self.max_dim == 0 {
            return Err(Error::OutOfRange {
                name: "max_dim",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        Ok(())
    }
}

fn sort_simplices(simplices: &mut [Simplex]) {
    simplices.par_sort_unstable_by(|a, b| {
        a.filtration
            .total_cmp(&b.filtration)
            .then(a.vertices.len().cmp(&b.vertices.len()))
            .then_with(|| a.vertices.cmp(&b.vertices))
    });
}

/// Builds the flag complex of all edges with scale at most `alpha_hi`,
/// expanded to `max_dim`.
pub fn build_two_scale_complex(
    cloud: &PointCloud,
    lnfs: &[f64],
    params: ComplexParams,
) -> Result<FilteredCliqueComplex> {
    params.validate()?;
    let n = cloud.len();
    if lnfs.len() < n {
        return Err(Error::MissingLnfs(lnfs.len()));
    }
    if let Some(id) = lnfs[..n].iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::ZeroLnfs(id));
    }
    let adjacency = upper_adjacency(cloud, &lnfs[..n], params.alpha_hi);

    let stored = AtomicUsize::new(0);
    let per_vertex: Vec<(usize, Vec<Simplex>)> = (0..n)
        .into_par_iter()
        .map(|v| {
            let mut out = Vec::new();
            let mut clique = vec![v as u32];
            out.push(Simplex {
                vertices: clique.clone(),
                filtration: 0.0,
            });
            let mut count = 1;
            expand(
                &adjacency,
                &mut clique,
                0.0,
                &adjacency[v],
                params.max_dim,
                &mut |s| {
                    count += 1;
                    out.push(s);
                },
            );
            let total = stored.fetch_add(count, Ordering::Relaxed) + count;
            if total > params.simplex_cap {
                out = Vec::new();
            }
            (count, out)
        })
        .collect();

    let count: usize = per_vertex.iter().map(|(c, _)| c).sum();
    if count > params.simplex_cap {
        return Err(Error::ComplexTooLarge {
            count,
            cap: params.simplex_cap,
        });
    }
    let mut simplices: Vec<Simplex> = per_vertex.into_iter().flat_map(|(_, s)| s).collect();
    sort_simplices(&mut simplices);
    Ok(FilteredCliqueComplex {
        simplices,
        num_vertices: n,
        alpha_lo: params.alpha_lo,
        alpha_hi: params.alpha_hi,
        exact_through: params.max_dim - 1,
    })
}

/// For each vertex, the higher-numbered neighbours with edge scale at most
/// `alpha_hi`, sorted by id.
fn upper_adjacency(cloud: &PointCloud, lnfs: &[f64], alpha_hi: f64) -> Vec<Vec<(u32, f64)>> {
    let n = cloud.len();
    let index = SpatialIndex::new(cloud.coords().to_vec(), cloud.ambient_dim());
    let max_lnfs = lnfs.iter().copied().fold(0.0, f64::max);
    (0..n)
        .into_par_iter()
        .map(|p| {
            let reach = alpha_hi * (lnfs[p] + max_lnfs);
            index
                .within_radius(cloud.point(p), reach)
                .into_iter()
                .filter(|&q| q > p)
                .filter_map(|q| {
                    let d = squared_distance(cloud.point(p), cloud.point(q)).sqrt();
                    let scale = d / (lnfs[p] + lnfs[q]);
                    (scale <= alpha_hi).then_some((q as u32, scale))
                })
                .collect()
        })
        .collect()
}

/// Emits every clique extending `clique` by vertices from `candidates`.
/// Each candidate carries the largest edge scale from it to the clique.
fn expand<F: FnMut(Simplex)>(
    adjacency: &[Vec<(u32, f64)>],
    clique: &mut Vec<u32>,
    filtration: f64,
    candidates: &[(u32, f64)],
    max_dim: usize,
    emit: &mut F,
) {
    for (i, &(v, w)) in candidates.iter().enumerate() {
        let f = filtration.max(w);
        clique.push(v);
        emit(Simplex {
            vertices: clique.clone(),
            filtration: f,
        });
        if clique.len() <= max_dim {
            let next = intersect(&candidates[i + 1..], &adjacency[v as usize]);
            if !next.is_empty() {
                expand(adjacency, clique, f, &next, max_dim, emit);
            }
        }
        clique.pop();
    }
}

fn intersect(candidates: &[(u32, f64)], neighbours: &[(u32, f64)]) -> Vec<(u32, f64)> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < candidates.len() && j < neighbours.len() {
        let (a, wa) = candidates[i];
        let (b, wb) = neighbours[j];
        match a.cmp(&b) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((a, wa.max(wb)));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

impl FilteredCliqueComplex {
    /// Wraps an explicit list of simplices. The list must be closed under
    /// faces with face filtrations no larger than their cofaces'; homology is
    /// then exact in every dimension.
    pub fn from_simplices(
        simplices: Vec<(Vec<u32>, f64)>,
        alpha_lo: f64,
        alpha_hi: f64,
    ) -> Result<Self> {
        use std::collections::HashMap;
        let mut list: Vec<Simplex> = simplices
            .into_iter()
            .map(|(mut vertices, filtration)| {
                vertices.sort_unstable();
                Simplex {
                    vertices,
                    filtration,
                }
            })
            .collect();
        for s in &list {
            if s.vertices.is_empty() || s.vertices.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput(format!(
                    "{:?} is not a simplex",
                    s.vertices
                )));
            }
        }
        sort_simplices(&mut list);
        let lookup: HashMap<&[u32], f64> = list
            .iter()
            .map(|s| (s.vertices.as_slice(), s.filtration))
            .collect();
        if lookup.len() != list.len() {
            return Err(Error::InvalidInput("repeated simplex".into()));
        }
        for s in &list {
            if s.vertices.len() < 2 {
                continue;
            }
            for skip in 0..s.vertices.len() {
                let face: Vec<u32> = face_without(&s.vertices, skip);
                match lookup.get(face.as_slice()) {
                    Some(&f) if f <= s.filtration => {}
                    Some(_) => {
                        return Err(Error::InvalidInput(format!(
                            "face {face:?} enters after {:?}",
                            s.vertices
                        )))
                    }
                    None => {
                        return Err(Error::MissingFace {
                            simplex: s.vertices.clone(),
                        })
                    }
                }
            }
        }
        let num_vertices = list
            .iter()
            .flat_map(|s| s.vertices.iter())
            .map(|&v| v as usize + 1)
            .max()
            .unwrap_or(0);
        Ok(FilteredCliqueComplex {
            simplices: list,
            num_vertices,
            alpha_lo,
            alpha_hi,
            exact_through: usize::MAX,
        })
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn alpha_lo(&self) -> f64 {
        self.alpha_lo
    }

    pub fn alpha_hi(&self) -> f64 {
        self.alpha_hi
    }

    /// Homology is determined by the stored simplices in dimensions up to and
    /// including this one.
    pub fn exact_through(&self) -> usize {
        self.exact_through
    }

    pub fn max_simplex_dim(&self) -> usize {
        self.simplices.iter().map(Simplex::dim).max().unwrap_or(0)
    }

    /// Simplices present at `level`, in filtration order.
    pub fn at_level(&self, level: f64) -> impl Iterator<Item = &Simplex> + '_ {
        self.simplices.iter().filter(move |s| s.filtration <= level)
    }

    /// Number of simplices of each dimension present at `level`.
    pub fn counts_at(&self, level: f64) -> Vec<usize> {
        let mut counts = vec![0; self.max_simplex_dim() + 1];
        for s in self.at_level(level) {
            counts[s.dim()] += 1;
        }
        counts
    }

    /// One simplex per line: dimension, vertex ids, filtration value.
    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for s in &self.simplices {
            write!(out, "{}", s.dim())?;
            for v in &s.vertices {
                write!(out, " {v}")?;
            }
            writeln!(out, " {:.17e}", s.filtration)?;
        }
        Ok(())
    }
}

pub(crate) fn face_without(vertices: &[u32], skip: usize) -> Vec<u32> {
    vertices
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, &v)| v)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn equilateral() -> PointCloud {
        let h = 3f64.sqrt() / 2.0;
        PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.5, h]], 1).unwrap()
    }

    #[test]
    fn edge_scale_examples() {
        let c = PointCloud::from_rows(&[[0.0, 0.0], [0.1, 0.0]], 1).unwrap();
        let lnfs = [0.2, 0.3];
        assert_abs_diff_eq!(edge_scale(&c, &lnfs, 0, 1).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(edge_scale(&c, &lnfs, 0, 1), edge_scale(&c, &lnfs, 1, 0));
        assert_eq!(edge_scale(&c, &lnfs, 0, 0).unwrap(), 0.0);
        assert_eq!(edge_scale(&c, &[0.0, 1.0], 0, 1), Err(Error::ZeroLnfs(0)));
    }

    #[test]
    fn triangle_enters_with_its_edges() {
        // All edge scales equal 1 / (2 * 2.5) = 0.2.
        let c = equilateral();
        let k =
            build_two_scale_complex(&c, &[2.5; 3], ComplexParams::two_level(0.3, 0.6, 2)).unwrap();
        assert_eq!(k.len(), 7);
        let tri = k.simplices().last().unwrap();
        assert_eq!(tri.vertices, vec![0, 1, 2]);
        assert_abs_diff_eq!(tri.filtration, 0.2, epsilon = 1e-15);
        assert_eq!(k.counts_at(0.3), vec![3, 3, 1]);
    }

    #[test]
    fn triangle_waits_for_its_longest_edge() {
        // Edge scales 0.2, 0.2, 0.5: place the vertices so that the third
        // edge is 2.5 times longer than the other two.
        let c = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [-0.5, 0.0]], 1).unwrap();
        let lnfs = [2.5, 2.5, 0.5];
        // d(0,1)=1 -> 0.2, d(0,2)=0.5 -> 0.5/3, d(1,2)=1.5 -> 0.5.
        let k = build_two_scale_complex(&c, &lnfs, ComplexParams::two_level(0.3, 0.6, 2)).unwrap();
        let tri = k.simplices().iter().find(|s| s.dim() == 2).unwrap();
        assert_abs_diff_eq!(tri.filtration, 0.5, epsilon = 1e-15);
        assert_eq!(k.counts_at(0.3), vec![3, 2, 0]);
        assert_eq!(k.counts_at(0.6), vec![3, 3, 1]);
    }

    #[test]
    fn max_dim_one_has_no_triangles() {
        let k = build_two_scale_complex(
            &equilateral(),
            &[2.5; 3],
            ComplexParams::two_level(0.3, 0.6, 1),
        )
        .unwrap();
        assert_eq!(k.max_simplex_dim(), 1);
        assert_eq!(k.exact_through(), 0);
    }

    #[test]
    fn cap_is_enforced() {
        let mut params = ComplexParams::two_level(0.3, 0.6, 2);
        params.simplex_cap = 5;
        assert_eq!(
            build_two_scale_complex(&equilateral(), &[2.5; 3], params),
            Err(Error::ComplexTooLarge { count: 7, cap: 5 })
        );
    }

    #[test]
    fn faces_precede_cofaces() {
        let rows: Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.37;
                [t.cos() * (1.0 + 0.1 * (3.0 * t).sin()), t.sin()]
            })
            .collect();
        let c = PointCloud::from_rows(&rows, 1).unwrap();
        let lnfs: Vec<f64> = (0..c.len()).map(|i| 0.2 + 0.01 * (i % 7) as f64).collect();
        let k = build_two_scale_complex(&c, &lnfs, ComplexParams::two_level(0.5, 1.5, 3)).unwrap();
        let position: std::collections::HashMap<&[u32], usize> = k
            .simplices()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.vertices.as_slice(), i))
            .collect();
        for (i, s) in k.simplices().iter().enumerate() {
            if s.dim() == 0 {
                assert_eq!(s.filtration, 0.0);
                continue;
            }
            for skip in 0..s.vertices.len() {
                let face = face_without(&s.vertices, skip);
                let j = position[face.as_slice()];
                assert!(j < i);
                assert!(k.simplices()[j].filtration <= s.filtration);
            }
            assert!(s.filtration <= 1.5);
        }
    }

    #[test]
    fn explicit_complex_validation() {
        let missing = FilteredCliqueComplex::from_simplices(
            vec![(vec![0], 0.0), (vec![1], 0.0), (vec![0, 1, 2], 0.0)],
            0.0,
            0.0,
        );
        assert!(matches!(missing, Err(Error::MissingFace { .. })));
        let late_face = FilteredCliqueComplex::from_simplices(
            vec![(vec![0], 0.0), (vec![1], 0.5), (vec![0, 1], 0.2)],
            0.0,
            0.0,
        );
        assert!(matches!(late_face, Err(Error::InvalidInput(_))));
    }
}
