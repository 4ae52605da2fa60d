//! Ambient-space primitives: point storage, exact proximity queries and
//! angles between vectors and linear subspaces.

mod index;
mod subspace;

use std::collections::HashSet;

pub use index::{build_index, Neighbor, QueryMode, SpatialIndex, BRUTE_FORCE_THRESHOLD};
pub(crate) use subspace::angle_unchecked as subspace_angle_unchecked;
pub use subspace::{principal_angle, vector_subspace_angle, SubspaceBasis};

use crate::error::{Error, Result};

/// A finite sample of a manifold of known intrinsic dimension, stored as a
/// flat row-major coordinate buffer.
///
/// Points are deduplicated on construction: coincident samples make the
/// empty-ball predicate ill-defined.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    ambient_dim: usize,
    intrinsic_dim: usize,
    duplicates_removed: usize,
}

impl PointCloud {
    /// Builds a cloud from individual rows, dropping exact duplicates.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], intrinsic_dim: usize) -> Result<Self> {
        let ambient_dim = match rows.first() {
            Some(r) => r.as_ref().len(),
            None => {
                return Err(Error::EmptyCloud);
            }
        };
        let mut coords = Vec::with_capacity(rows.len() * ambient_dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(coords, ambient_dim, intrinsic_dim)
    }

    /// Builds a cloud from a row-major buffer of `ambient_dim`-tuples.
    pub fn from_flat(coords: Vec<f64>, ambient_dim: usize, intrinsic_dim: usize) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::InvalidInput(
                "ambient dimension must be positive".into(),
            ));
        }
        if !coords.len().is_multiple_of(ambient_dim) {
            return Err(Error::DimensionMismatch {
                expected: ambient_dim,
                found: coords.len() % ambient_dim,
            });
        }
        if intrinsic_dim == 0 || intrinsic_dim > ambient_dim {
            return Err(Error::OutOfRange {
                name: "intrinsic dimension",
                value: intrinsic_dim as f64,
                range: "[1, ambient dimension]",
            });
        }
        if intrinsic_dim == ambient_dim {
            log::warn!(
                "intrinsic dimension equals ambient dimension ({ambient_dim}); normal spaces are trivial"
            );
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate in point {}",
                pos / ambient_dim
            )));
        }

        let mut seen = HashSet::with_capacity(coords.len() / ambient_dim);
        let mut kept = Vec::with_capacity(coords.len());
        let mut duplicates_removed = 0;
        for row in coords.chunks_exact(ambient_dim) {
            // -0.0 and 0.0 are the same location.
            let key: Vec<u64> = row.iter().map(|&c| (c + 0.0).to_bits()).collect();
            if seen.insert(key) {
                kept.extend_from_slice(row);
            } else {
                duplicates_removed += 1;
            }
        }
        if duplicates_removed > 0 {
            log::warn!("removed {duplicates_removed} duplicate point(s) at ingestion");
        }
        Ok(PointCloud {
            coords: kept,
            ambient_dim,
            intrinsic_dim,
            duplicates_removed,
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.ambient_dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    /// Number of exact duplicates dropped when the cloud was built.
    pub fn duplicates_removed(&self) -> usize {
        self.duplicates_removed
    }

    #[inline]
    pub fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.ambient_dim..(id + 1) * self.ambient_dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.ambient_dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Restriction of the cloud to the given ids, in the given order.
    pub fn subset(&self, ids: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(ids.len() * self.ambient_dim);
        for &id in ids {
            coords.extend_from_slice(self.point(id));
        }
        PointCloud {
            coords,
            ambient_dim: self.ambient_dim,
            intrinsic_dim: self.intrinsic_dim,
            duplicates_removed: 0,
        }
    }

    /// Applies `f` to every point. The result is re-validated and
    /// deduplicated.
    pub fn map_points<F>(&self, mut f: F) -> Result<PointCloud>
    where
        F: FnMut(&[f64]) -> Vec<f64>,
    {
        let mut coords = Vec::with_capacity(self.coords.len());
        let mut out_dim = None;
        for p in self.points() {
            let q = f(p);
            match out_dim {
                None => out_dim = Some(q.len()),
                Some(d) if d != q.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: q.len(),
                    })
                }
                _ => {}
            }
            coords.extend(q);
        }
        PointCloud::from_flat(
            coords,
            out_dim.unwrap_or(self.ambient_dim),
            self.intrinsic_dim,
        )
    }

    /// Uniformly scales every coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<PointCloud> {
        self.map_points(|p| p.iter().map(|c| c * factor).collect())
    }

    /// Largest distance between two points of an axis-aligned bounding box
    /// of the cloud.
    pub fn bounding_box_diagonal(&self) -> f64 {
        let k = self.ambient_dim;
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        for p in self.points() {
            for d in 0..k {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        if self.is_empty() {
            return 0.0;
        }
        distance(&lo, &hi)
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

pub fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_distinct_points() {
        let cloud = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 1).unwrap();
        assert_eq!(cloud.len(), 3);
        assert_eq!(cloud.duplicates_removed(), 0);
        assert_eq!(build_index(&cloud).unwrap().len(), 3);
    }

    #[test]
    fn duplicates_are_dropped() {
        let cloud = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 2.0], [0.0, -0.0]], 1).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.duplicates_removed(), 1);
        assert_eq!(cloud.point(1), &[1.0, 2.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![vec![0.0, 0.0], vec![1.0]];
        assert!(matches!(
            PointCloud::from_rows(&rows, 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn intrinsic_dimension_bounds() {
        assert!(PointCloud::from_rows(&[[0.0, 0.0]], 0).is_err());
        assert!(PointCloud::from_rows(&[[0.0, 0.0]], 3).is_err());
        // s == k is allowed with a warning.
        assert!(PointCloud::from_rows(&[[0.0, 0.0]], 2).is_ok());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(PointCloud::from_rows(&[[0.0, f64::NAN]], 1).is_err());
    }

    #[test]
    fn empty_cloud_has_no_index() {
        let cloud = PointCloud::from_flat(vec![], 2, 1).unwrap();
        assert!(cloud.is_empty());
        assert_eq!(build_index(&cloud).unwrap_err(), Error::EmptyCloud);
    }
}
