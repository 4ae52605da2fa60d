//! Greedy decimation by lean feature size.
//!
//! Points are extracted in decreasing order of lnfs; each extracted point
//! `q` is kept and removes every still-queued point within `rho * lnfs(q)`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{squared_distance, PointCloud, SpatialIndex};

/// Coverage factor checked at sample points: every input point should lie
/// within `COVERAGE_FACTOR * rho * lnfs(q)` of a retained `q`.
pub const COVERAGE_FACTOR: f64 = 6.0 / 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSample {
    /// Retained ids in extraction order.
    pub retained: Vec<usize>,
    /// lnfs of every input point, indexed by id.
    pub lnfs: Vec<f64>,
    /// For every input id: the retained point that removed it, or itself if
    /// retained.
    pub retainer: Vec<usize>,
    pub rho: f64,
}

impl SparseSample {
    /// The retainer of a deleted point; `None` for retained points.
    pub fn deleted_by(&self, id: usize) -> Option<usize> {
        let r = self.retainer[id];
        (r != id).then_some(r)
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }

    /// lnfs values of the retained points, in extraction order.
    pub fn retained_lnfs(&self) -> Vec<f64> {
        self.retained.iter().map(|&id| self.lnfs[id]).collect()
    }

    /// One retained point per line: coordinates followed by its lnfs.
    pub fn write_text<W: Write>(&self, cloud: &PointCloud, out: &mut W) -> std::io::Result<()> {
        for &id in &self.retained {
            for c in cloud.point(id) {
                write!(out, "{c:.17e} ")?;
            }
            writeln!(out, "{:.17e}", self.lnfs[id])?;
        }
        Ok(())
    }

    /// Deletion audit: `deleted_id retainer_id distance` per deleted point.
    pub fn write_audit<W: Write>(&self, cloud: &PointCloud, out: &mut W) -> std::io::Result<()> {
        for id in 0..self.retainer.len() {
            if let Some(r) = self.deleted_by(id) {
                let d = squared_distance(cloud.point(id), cloud.point(r)).sqrt();
                writeln!(out, "{id} {r} {d:.17e}")?;
            }
        }
        Ok(())
    }
}

#[inline]
fn within(a: &[f64], b: &[f64], radius: f64) -> bool {
    squared_distance(a, b) <= radius * radius
}

fn check_lnfs(cloud: &PointCloud, lnfs: &[f64]) -> Result<()> {
    if lnfs.len() < cloud.len() {
        return Err(Error::MissingLnfs(lnfs.len()));
    }
    if let Some(id) = lnfs[..cloud.len()]
        .iter()
        .position(|v| !(v.is_finite() && *v >= 0.0))
    {
        return Err(Error::MissingLnfs(id));
    }
    Ok(())
}

/// Extraction order: lnfs descending, then id ascending.
fn extraction_order(lnfs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lnfs.len()).collect();
    order.sort_by(|&a, &b| lnfs[b].total_cmp(&lnfs[a]).then(a.cmp(&b)));
    order
}

pub fn lean_sparsify(cloud: &PointCloud, lnfs: &[f64], rho: f64) -> Result<SparseSample> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::OutOfRange {
            name: "rho",
            value: rho,
            range: "(0, inf)",
        });
    }
    check_lnfs(cloud, lnfs)?;
    let n = cloud.len();
    let lnfs = lnfs[..n].to_vec();
    let index = SpatialIndex::new(cloud.coords().to_vec(), cloud.ambient_dim());

    const QUEUED: usize = usize::MAX;
    let mut retainer = vec![QUEUED; n];
    let mut retained = Vec::new();
    for q in extraction_order(&lnfs) {
        if retainer[q] != QUEUED {
            continue;
        }
        retainer[q] = q;
        retained.push(q);
        for p in index.within_radius(cloud.point(q), rho * lnfs[q]) {
            if retainer[p] == QUEUED {
                retainer[p] = q;
            }
        }
    }
    Ok(SparseSample {
        retained,
        lnfs,
        retainer,
        rho,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityReport {
    pub rho: f64,
    pub coverage_factor: f64,
    /// Pairs `(q, q')` of retained points, `q` extracted first, with
    /// `d(q, q') <= rho * lnfs(q)`.
    pub sparsity_violations: Vec<(usize, usize)>,
    /// Input points farther than `coverage_factor * rho * lnfs(q)` from every
    /// retained `q`.
    pub coverage_violations: Vec<usize>,
    /// Largest `d(p, retainer(p)) / (rho * lnfs(retainer(p)))` over inputs.
    pub max_coverage_ratio: f64,
    /// The density bound over the whole manifold uses 4/3 rather than 6/5;
    /// only sample points are checked here.
    pub note: String,
}

impl UniformityReport {
    pub fn passed(&self) -> bool {
        self.sparsity_violations.is_empty() && self.coverage_violations.is_empty()
    }
}

pub fn verify_uniformity(
    sample: &SparseSample,
    cloud: &PointCloud,
    lnfs: &[f64],
) -> Result<UniformityReport> {
    check_lnfs(cloud, lnfs)?;
    let rho = sample.rho;
    let kept = cloud.subset(&sample.retained);
    let kept_index = SpatialIndex::new(kept.coords().to_vec(), kept.ambient_dim());

    // Position i in `retained` is also the id inside `kept`.
    let sparsity_violations: Vec<(usize, usize)> = (0..sample.retained.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let q = sample.retained[i];
            kept_index
                .within_radius(cloud.point(q), rho * lnfs[q])
                .into_iter()
                .filter(move |&j| j > i)
                .map(move |j| (q, sample.retained[j]))
        })
        .collect();

    let per_point: Vec<(f64, bool)> = (0..cloud.len())
        .into_par_iter()
        .map(|p| {
            let r = sample.retainer[p];
            let scale = rho * lnfs[r];
            let ratio = if scale > 0.0 {
                squared_distance(cloud.point(p), cloud.point(r)).sqrt() / scale
            } else {
                0.0
            };
            let covered = within(cloud.point(p), cloud.point(r), COVERAGE_FACTOR * scale)
                || sample.retained.iter().any(|&q| {
                    within(
                        cloud.point(p),
                        cloud.point(q),
                        COVERAGE_FACTOR * rho * lnfs[q],
                    )
                });
            (ratio, covered)
        })
        .collect();

    Ok(UniformityReport {
        rho,
        coverage_factor: COVERAGE_FACTOR,
        sparsity_violations,
        coverage_violations: per_point
            .iter()
            .enumerate()
            .filter(|(_, (_, ok))| !ok)
            .map(|(p, _)| p)
            .collect(),
        max_coverage_ratio: per_point.iter().map(|(r, _)| *r).fold(0.0, f64::max),
        note: "coverage checked at input samples with factor 6/5; the 4/3 density bound over the continuum is not checked".into(),
    })
}
