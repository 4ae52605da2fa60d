use nalgebra::DMatrix;

use super::{dot, norm};
use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-10;

/// An orthonormal basis of a linear subspace of R^k, stored column by
/// column.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    ambient_dim: usize,
    vectors: Vec<f64>,
}

impl SubspaceBasis {
    /// The zero subspace of R^k.
    pub fn zero(ambient_dim: usize) -> Self {
        SubspaceBasis {
            ambient_dim,
            vectors: Vec::new(),
        }
    }

    /// Accepts vectors that are already orthonormal (to 1e-9).
    pub fn from_orthonormal(ambient_dim: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        let mut flat = Vec::with_capacity(vectors.len() * ambient_dim);
        for v in vectors {
            if v.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: v.len(),
                });
            }
            flat.extend_from_slice(v);
        }
        let basis = SubspaceBasis {
            ambient_dim,
            vectors: flat,
        };
        for i in 0..basis.dim() {
            for j in 0..basis.dim() {
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot(basis.vector(i), basis.vector(j)) - want).abs() > ORTHONORMAL_TOL {
                    return Err(Error::InvalidInput(format!(
                        "basis vectors {i} and {j} are not orthonormal"
                    )));
                }
            }
        }
        Ok(basis)
    }

    /// Orthonormalizes `vectors` by Gram-Schmidt with one round of
    /// re-orthogonalization. Fails if they are (numerically) dependent.
    pub fn orthonormalize(ambient_dim: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        let mut basis = SubspaceBasis::zero(ambient_dim);
        for v in vectors {
            if v.len() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    expected: ambient_dim,
                    found: v.len(),
                });
            }
            let scale = norm(v);
            let residual = basis.residual(v);
            let r = norm(&residual);
            if scale == 0.0 || r <= RANK_TOL * scale {
                return Err(Error::Degenerate {
                    wanted: vectors.len(),
                });
            }
            basis.vectors.extend(residual.iter().map(|x| x / r));
        }
        Ok(basis)
    }

    /// Orthonormal basis of the orthogonal complement in R^k.
    pub fn orthogonal_complement(&self) -> SubspaceBasis {
        let k = self.ambient_dim;
        let mut out = SubspaceBasis::zero(k);
        let mut current = self.clone();
        for _ in self.dim()..k {
            // Pick the coordinate axis that is least represented so far.
            let (residual, r) = (0..k)
                .map(|axis| {
                    let mut e = vec![0.0; k];
                    e[axis] = 1.0;
                    let res = current.residual(&e);
                    let r = norm(&res);
                    (res, r)
                })
                .fold((Vec::new(), f64::NEG_INFINITY), |acc, cur| {
                    if cur.1 > acc.1 {
                        cur
                    } else {
                        acc
                    }
                });
            let unit: Vec<f64> = residual.iter().map(|x| x / r).collect();
            current.vectors.extend_from_slice(&unit);
            out.vectors.extend_from_slice(&unit);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.vectors.len() / self.ambient_dim.max(1)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    #[inline]
    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.vectors.chunks_exact(self.ambient_dim.max(1))
    }

    /// Flat column-major coordinates of the basis vectors.
    pub fn as_flat(&self) -> &[f64] {
        &self.vectors
    }

    /// `v` minus its orthogonal projection onto the subspace, computed with
    /// two Gram-Schmidt sweeps.
    pub fn residual(&self, v: &[f64]) -> Vec<f64> {
        let mut r = v.to_vec();
        for _ in 0..2 {
            for e in self.vectors() {
                let c = dot(&r, e);
                for (ri, ei) in r.iter_mut().zip(e) {
                    *ri -= c * ei;
                }
            }
        }
        r
    }

    fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.ambient_dim, self.dim(), &self.vectors)
    }
}

/// Angle in `[0, pi/2]` between the line spanned by `u` and the subspace.
///
/// Equals `acos(|proj(u/|u|)|)`; evaluated as `atan2(|perp|, |proj|)` for
/// accuracy near both ends of the range. The zero subspace is at `pi/2`
/// from every vector.
pub fn vector_subspace_angle(u: &[f64], basis: &SubspaceBasis) -> Result<f64> {
    if u.len() != basis.ambient_dim {
        return Err(Error::DimensionMismatch {
            expected: basis.ambient_dim,
            found: u.len(),
        });
    }
    let mut u2 = 0.0;
    for x in u {
        u2 += x * x;
    }
    if u2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(angle_unchecked(u, basis))
}

#[inline]
pub(crate) fn angle_unchecked(u: &[f64], basis: &SubspaceBasis) -> f64 {
    let k = basis.ambient_dim;
    let m = basis.dim();
    let mut coeffs = [0.0f64; 8];
    let mut heap_coeffs;
    let c: &mut [f64] = if m <= coeffs.len() {
        &mut coeffs[..m]
    } else {
        heap_coeffs = vec![0.0; m];
        &mut heap_coeffs
    };
    let mut proj2 = 0.0;
    for (b, cb) in c.iter_mut().enumerate() {
        *cb = dot(u, basis.vector(b));
        proj2 += *cb * *cb;
    }
    let mut perp2 = 0.0;
    for j in 0..k {
        let mut r = u[j];
        for (b, cb) in c.iter().enumerate() {
            r -= cb * basis.vectors[b * k + j];
        }
        perp2 += r * r;
    }
    perp2.sqrt().atan2(proj2.sqrt())
}

/// Largest principal angle between two subspaces of equal dimension.
///
/// The cosine is the smallest singular value of `A^T B` and the sine the
/// largest singular value of `B - A A^T B`; combining both keeps small
/// angles accurate.
pub fn principal_angle(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    if a.ambient_dim != b.ambient_dim {
        return Err(Error::DimensionMismatch {
            expected: a.ambient_dim,
            found: b.ambient_dim,
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.dim() == 0 {
        return Ok(0.0);
    }
    let ma = a.to_matrix();
    let mb = b.to_matrix();
    let cross = ma.transpose() * &mb;
    let cos = cross
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .clamp(0.0, 1.0);
    let resid = &mb - &ma * &cross;
    let sin = resid
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0);
    Ok(sin.atan2(cos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn line(v: &[f64]) -> SubspaceBasis {
        SubspaceBasis::orthonormalize(v.len(), &[v.to_vec()]).unwrap()
    }

    #[test]
    fn vector_angle_examples() {
        let x = line(&[1.0, 0.0]);
        assert_abs_diff_eq!(vector_subspace_angle(&[1.0, 0.0], &x).unwrap(), 0.0);
        assert_abs_diff_eq!(
            vector_subspace_angle(&[1.0, 1.0], &x).unwrap(),
            FRAC_PI_4,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(vector_subspace_angle(&[0.0, 1.0], &x).unwrap(), FRAC_PI_2);
        assert_eq!(
            vector_subspace_angle(&[0.0, 0.0], &x),
            Err(Error::ZeroVector)
        );
    }

    #[test]
    fn zero_subspace_is_perpendicular() {
        let z = SubspaceBasis::zero(3);
        assert_eq!(
            vector_subspace_angle(&[1.0, 2.0, 3.0], &z).unwrap(),
            FRAC_PI_2
        );
    }

    #[test]
    fn principal_angle_examples() {
        let a = line(&[1.0, 0.0, 0.0]);
        let b = line(&[0.0, 1.0, 0.0]);
        assert_eq!(principal_angle(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(principal_angle(&a, &b).unwrap(), FRAC_PI_2, epsilon = 1e-15);

        let theta: f64 = 0.3;
        let l0 = line(&[1.0, 0.0]);
        let l1 = line(&[theta.cos(), theta.sin()]);
        assert_abs_diff_eq!(principal_angle(&l0, &l1).unwrap(), 0.3, epsilon = 1e-14);
    }

    #[test]
    fn principal_angle_is_largest_for_planes() {
        // xy-plane against the plane rotated about x by 0.4: angles {0, 0.4}.
        let xy =
            SubspaceBasis::orthonormalize(3, &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let t: f64 = 0.4;
        let tilted =
            SubspaceBasis::orthonormalize(3, &[vec![1.0, 0.0, 0.0], vec![0.0, t.cos(), t.sin()]])
                .unwrap();
        assert_abs_diff_eq!(principal_angle(&xy, &tilted).unwrap(), 0.4, epsilon = 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let a = line(&[1.0, 0.0]);
        let b = line(&[1.0, 0.0, 0.0]);
        assert!(matches!(
            principal_angle(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_vectors_rejected() {
        let err = SubspaceBasis::orthonormalize(2, &[vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert_eq!(err, Err(Error::Degenerate { wanted: 2 }));
    }

    #[test]
    fn complement_is_orthogonal_and_complete() {
        let b = SubspaceBasis::orthonormalize(4, &[vec![1.0, 2.0, 0.5, -1.0]]).unwrap();
        let c = b.orthogonal_complement();
        assert_eq!(c.dim(), 3);
        for u in b.vectors() {
            for v in c.vectors() {
                assert_abs_diff_eq!(dot(u, v), 0.0, epsilon = 1e-12);
            }
        }
        let all: Vec<Vec<f64>> = b
            .vectors()
            .chain(c.vectors())
            .map(<[f64]>::to_vec)
            .collect();
        assert!(SubspaceBasis::from_orthonormal(4, &all).is_ok());
    }
}
