//! Per-sample tangent and normal spaces from greedily grown fat simplices.
//!
//! Starting from a sample `p` and its nearest neighbour, each further vertex
//! is the closest sample whose displacement from `p` makes an angle of at
//! least `pi/2 - pi/5` with the span of the edges chosen so far. After `s`
//! edges (the intrinsic dimension) the edge span estimates the tangent
//! space and its complement the normal space.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{vector_subspace_angle, Neighbor, PointCloud, SpatialIndex, SubspaceBasis};

/// Half-width of the admissible angle window; new vertices must make an
/// angle in `[pi/2 - TANGENT_WINDOW, pi/2]` with the current span.
pub const TANGENT_WINDOW: f64 = PI / 5.0;

/// Relative gap below which two candidate distances count as equal.
pub const TIE_TOLERANCE: f64 = 1e-9;

const FIRST_BATCH: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct TangentEstimate {
    pub point: usize,
    pub tangent: SubspaceBasis,
    pub normal: SubspaceBasis,
    /// `p` followed by the `s` chosen vertices, in the order they were picked.
    pub witnesses: Vec<usize>,
}

pub fn estimate_tangent_basis(
    cloud: &PointCloud,
    index: &SpatialIndex,
    p: usize,
) -> Result<TangentEstimate> {
    let s = cloud.intrinsic_dim();
    let k = cloud.ambient_dim();
    let insufficient = |found| Error::InsufficientCandidates {
        point: p,
        found,
        wanted: s,
    };
    if cloud.len() < s + 1 {
        return Err(insufficient(0));
    }
    let origin = cloud.point(p);
    let min_angle = FRAC_PI_2 - TANGENT_WINDOW;

    let mut witnesses = vec![p];
    let mut edges: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut span = SubspaceBasis::zero(k);

    // Candidates are consumed in (distance, id) order, with near-equal
    // distances tied so that the choice does not depend on rounding.
    let mut batch = FIRST_BATCH.min(cloud.len() - 1);
    let mut cursor = 0;
    let mut candidates = tied_by_id(index.k_nearest(origin, batch, Some(p))?);

    while edges.len() < s {
        let mut chosen = None;
        loop {
            while cursor < candidates.len() {
                let q = candidates[cursor].id;
                cursor += 1;
                if witnesses.contains(&q) {
                    continue;
                }
                let u: Vec<f64> = cloud
                    .point(q)
                    .iter()
                    .zip(origin)
                    .map(|(a, b)| a - b)
                    .collect();
                // The first edge is the nearest neighbour, unconditionally.
                if edges.is_empty() || vector_subspace_angle(&u, &span)? >= min_angle {
                    chosen = Some((q, u));
                    break;
                }
            }
            if chosen.is_some() || candidates.len() >= cloud.len() - 1 {
                break;
            }
            // Tie runs may straddle the old tail, so rescan from the start;
            // rejected candidates stay rejected while the span is unchanged.
            batch = (batch * 4).min(cloud.len() - 1);
            candidates = tied_by_id(index.k_nearest(origin, batch, Some(p))?);
            cursor = 0;
        }
        let (q, u) = chosen.ok_or_else(|| insufficient(edges.len()))?;
        witnesses.push(q);
        edges.push(u);
        span =
            SubspaceBasis::orthonormalize(k, &edges).map_err(|_| insufficient(edges.len() - 1))?;
        // Later picks restart from the nearest candidates.
        cursor = 0;
    }

    let normal = span.orthogonal_complement();
    Ok(TangentEstimate {
        point: p,
        tangent: span,
        normal,
        witnesses,
    })
}

/// Reorders runs of distances equal to within `TIE_TOLERANCE` (relative) by id.
fn tied_by_id(mut found: Vec<Neighbor>) -> Vec<Neighbor> {
    let mut start = 0;
    while start < found.len() {
        let limit = found[start].distance * (1.0 + TIE_TOLERANCE);
        let end = start
            + found[start..]
                .iter()
                .take_while(|n| n.distance <= limit)
                .count();
        found[start..end].sort_by_key(|n| n.id);
        start = end;
    }
    found
}

/// Estimates every sample's tangent space. The result is indexed by point id.
///
/// When several points fail, the error reports the smallest offending id.
pub fn estimate_all_normals(
    cloud: &PointCloud,
    index: &SpatialIndex,
) -> Result<Vec<TangentEstimate>> {
    let results: Vec<Result<TangentEstimate>> = (0..cloud.len())
        .into_par_iter()
        .map(|p| estimate_tangent_basis(cloud, index, p))
        .collect();
    results.into_iter().collect()
}

/// One line per point: the id followed by the `(k - s) * k` normal basis
/// coordinates.
pub fn write_normals<W: std::io::Write>(
    out: &mut W,
    estimates: &[TangentEstimate],
) -> std::io::Result<()> {
    for est in estimates {
        write!(out, "{}", est.point)?;
        for c in est.normal.as_flat() {
            write!(out, " {c:.17e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
