//! Beta-good pairs, the lean set and the lean feature size.
//!
//! A pair of samples is beta-good when the chord between them is within
//! `pi/2 - beta` of both estimated normal spaces and the closed ball at the
//! chord midpoint with radius `c_beta * |pq|` holds no other sample. The
//! lean set collects the midpoints of all beta-good pairs; the distance to
//! it is the lean feature size (lnfs).

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{distance, squared_distance, PointCloud, SpatialIndex};
use crate::tangent::TangentEstimate;

/// Relative slack on the closed angle condition and on pair-length ties, so
/// that lattice-exact configurations do not depend on rounding.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// `tan(beta / 2) / 3`, the empty-ball radius factor for angle `beta`.
pub fn c_beta(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok((beta / 2.0).tan() / 3.0)
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < FRAC_PI_2) {
        return Err(Error::OutOfRange {
            name: "beta",
            value: beta,
            range: "(0, pi/2)",
        });
    }
    Ok(())
}

/// Angle and radius thresholds for the beta-good test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeanParams {
    pub beta: f64,
    pub c_beta: f64,
}

impl LeanParams {
    /// `c_beta` derived from `beta`.
    pub fn from_beta(beta: f64) -> Result<Self> {
        Ok(LeanParams {
            beta,
            c_beta: c_beta(beta)?,
        })
    }

    /// Explicit `c_beta`, as used by the practical pipeline mode.
    pub fn with_c_beta(beta: f64, c_beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if !(c_beta > 0.0 && c_beta.is_finite()) {
            return Err(Error::OutOfRange {
                name: "c_beta",
                value: c_beta,
                range: "(0, inf)",
            });
        }
        Ok(LeanParams { beta, c_beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeanPoint<'a> {
    pub midpoint: &'a [f64],
    pub pair: (usize, usize),
    pub pair_distance: f64,
}

/// Midpoints of beta-good pairs, ordered lexicographically by pair ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LeanSet {
    params: LeanParams,
    ambient_dim: usize,
    midpoints: Vec<f64>,
    pairs: Vec<(usize, usize)>,
    pair_distances: Vec<f64>,
    reduced: bool,
}

impl LeanSet {
    /// An empty lean set with the given thresholds.
    pub fn empty(params: LeanParams, ambient_dim: usize) -> Self {
        LeanSet {
            params,
            ambient_dim,
            midpoints: Vec::new(),
            pairs: Vec::new(),
            pair_distances: Vec::new(),
            reduced: false,
        }
    }

    /// Appends the midpoint of `(p, q)`; ids are stored as `(min, max)`.
    pub fn push_pair(&mut self, cloud: &PointCloud, p: usize, q: usize) {
        let (a, b) = if p < q { (p, q) } else { (q, p) };
        let (pa, pb) = (cloud.point(a), cloud.point(b));
        self.midpoints
            .extend(pa.iter().zip(pb).map(|(x, y)| 0.5 * (x + y)));
        self.pairs.push((a, b));
        self.pair_distances.push(distance(pa, pb));
    }

    pub fn params(&self) -> LeanParams {
        self.params
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn c_beta(&self) -> f64 {
        self.params.c_beta
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, i: usize) -> LeanPoint<'_> {
        LeanPoint {
            midpoint: &self.midpoints[i * self.ambient_dim..(i + 1) * self.ambient_dim],
            pair: self.pairs[i],
            pair_distance: self.pair_distances[i],
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = LeanPoint<'_>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn midpoint_coords(&self) -> &[f64] {
        &self.midpoints
    }

    /// Keeps the entries whose position satisfies `keep`, preserving order.
    pub fn retain_indices<F: Fn(usize) -> bool>(&self, keep: F) -> LeanSet {
        let mut out = LeanSet {
            reduced: self.reduced,
            ..LeanSet::empty(self.params, self.ambient_dim)
        };
        for i in (0..self.len()).filter(|&i| keep(i)) {
            let lp = self.get(i);
            out.midpoints.extend_from_slice(lp.midpoint);
            out.pairs.push(lp.pair);
            out.pair_distances.push(lp.pair_distance);
        }
        out
    }

    /// Drops every midpoint whose pair is closer than `min_pair_distance`.
    pub fn without_short_pairs(&self, min_pair_distance: f64) -> LeanSet {
        self.retain_indices(|i| self.pair_distances[i] >= min_pair_distance)
    }

    /// One midpoint per line: coordinates, both pair ids, pair distance.
    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for lp in self.iter() {
            for c in lp.midpoint {
                write!(out, "{c:.17e} ")?;
            }
            writeln!(out, "{} {} {:.17e}", lp.pair.0, lp.pair.1, lp.pair_distance)?;
        }
        Ok(())
    }
}

fn normal_of(normals: &[TangentEstimate], id: usize) -> Result<&TangentEstimate> {
    match normals.get(id) {
        Some(est) if est.point == id => Ok(est),
        _ => Err(Error::MissingNormal(id)),
    }
}

/// The beta-good test for one pair.
///
/// `p` and `q` are excluded from the empty-ball test: for `c_beta < 1/2`
/// they lie strictly outside the ball anyway, and at `c_beta = 1/2` they sit
/// on its boundary.
pub fn is_beta_good(
    cloud: &PointCloud,
    normals: &[TangentEstimate],
    index: &SpatialIndex,
    p: usize,
    q: usize,
    params: LeanParams,
) -> Result<bool> {
    if p == q {
        return Err(Error::InvalidInput(
            "a pair needs two distinct points".into(),
        ));
    }
    let np = normal_of(normals, p)?;
    let nq = normal_of(normals, q)?;
    let mut scratch = PairScratch::new(cloud.ambient_dim());
    Ok(scratch.test(cloud, np, nq, index, p, q, params))
}

struct PairScratch {
    chord: Vec<f64>,
    mid: Vec<f64>,
}

impl PairScratch {
    fn new(dim: usize) -> Self {
        PairScratch {
            chord: vec![0.0; dim],
            mid: vec![0.0; dim],
        }
    }

    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn test(
        &mut self,
        cloud: &PointCloud,
        np: &TangentEstimate,
        nq: &TangentEstimate,
        index: &SpatialIndex,
        p: usize,
        q: usize,
        params: LeanParams,
    ) -> bool {
        let (a, b) = (cloud.point(p), cloud.point(q));
        for ((c, x), y) in self.chord.iter_mut().zip(b).zip(a) {
            *c = x - y;
        }
        let max_angle = (FRAC_PI_2 - params.beta) * (1.0 + TIE_TOLERANCE);
        // The angle to a subspace ignores the sign of the chord.
        if crate::geometry::subspace_angle_unchecked(&self.chord, &np.normal) > max_angle
            || crate::geometry::subspace_angle_unchecked(&self.chord, &nq.normal) > max_angle
        {
            return false;
        }
        for ((m, x), y) in self.mid.iter_mut().zip(a).zip(b) {
            *m = 0.5 * (x + y);
        }
        let radius = params.c_beta * squared_distance(a, b).sqrt();
        index.ball_is_empty(&self.mid, radius, &[p, q])
    }
}

/// The beta-good pairs of a cloud, stored as partner lists: `partners[p]`
/// holds every `q > p` with `(p, q)` beta-good, ascending.
///
/// This is the compact form of the lean set; midpoints are materialized on
/// demand.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodPairs {
    params: LeanParams,
    partners: Vec<Vec<u32>>,
}

impl GoodPairs {
    pub fn params(&self) -> LeanParams {
        self.params
    }

    /// Number of beta-good pairs, i.e. the size of the full lean set.
    pub fn len(&self) -> usize {
        self.partners.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.partners.iter().all(Vec::is_empty)
    }

    /// All pairs `(p, q)`, `p < q`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.partners
            .iter()
            .enumerate()
            .flat_map(|(p, qs)| qs.iter().map(move |&q| (p, q as usize)))
    }

    /// Drops every pair closer than `min_pair_distance`.
    pub fn without_short_pairs(&self, cloud: &PointCloud, min_pair_distance: f64) -> GoodPairs {
        let partners = self
            .partners
            .iter()
            .enumerate()
            .map(|(p, qs)| {
                qs.iter()
                    .copied()
                    .filter(|&q| {
                        distance(cloud.point(p), cloud.point(q as usize)) >= min_pair_distance
                    })
                    .collect()
            })
            .collect();
        GoodPairs {
            params: self.params,
            partners,
        }
    }

    /// The full lean set.
    pub fn lean_set(&self, cloud: &PointCloud) -> LeanSet {
        let mut lean = LeanSet::empty(self.params, cloud.ambient_dim());
        lean.midpoints.reserve(self.len() * cloud.ambient_dim());
        for (p, q) in self.pairs() {
            lean.push_pair(cloud, p, q);
        }
        lean
    }

    /// The reduced lean set, without materializing the full one. Gives the
    /// same result as `reduce_lean_set(&self.lean_set(cloud), n)`.
    pub fn reduced_lean_set(&self, cloud: &PointCloud) -> LeanSet {
        let n = cloud.len();
        // Best pair per point by distance, ties to the lexicographically first.
        let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; n];
        let better = |cand: (f64, usize, usize), cur: Option<(f64, usize, usize)>| match cur {
            None => true,
            // Pairs arrive in lexicographic order, so a tie keeps the earlier.
            Some(c) => cand.0 < c.0 * (1.0 - TIE_TOLERANCE),
        };
        for (p, q) in self.pairs() {
            let cand = (distance(cloud.point(p), cloud.point(q)), p, q);
            for end in [p, q] {
                if better(cand, best[end]) {
                    best[end] = Some(cand);
                }
            }
        }
        let mut chosen: Vec<(usize, usize)> =
            best.into_iter().flatten().map(|(_, p, q)| (p, q)).collect();
        chosen.sort_unstable();
        chosen.dedup();
        let mut lean = LeanSet::empty(self.params, cloud.ambient_dim());
        for (p, q) in chosen {
            lean.push_pair(cloud, p, q);
        }
        lean.reduced = true;
        lean
    }
}

/// Tests every unordered pair. The cheap angle condition is checked before
/// the ball query.
pub fn scan_good_pairs(
    cloud: &PointCloud,
    normals: &[TangentEstimate],
    index: &SpatialIndex,
    params: LeanParams,
) -> Result<GoodPairs> {
    let n = cloud.len();
    for id in 0..n {
        normal_of(normals, id)?;
    }
    let partners: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map_init(
            || PairScratch::new(cloud.ambient_dim()),
            |scratch, p| {
                (p + 1..n)
                    .filter(|&q| scratch.test(cloud, &normals[p], &normals[q], index, p, q, params))
                    .map(|q| q as u32)
                    .collect()
            },
        )
        .collect();
    Ok(GoodPairs { params, partners })
}

/// Midpoints of all beta-good pairs, in lexicographic pair order.
pub fn build_lean_set(
    cloud: &PointCloud,
    normals: &[TangentEstimate],
    index: &SpatialIndex,
    params: LeanParams,
) -> Result<LeanSet> {
    Ok(scan_good_pairs(cloud, normals, index, params)?.lean_set(cloud))
}

/// Keeps, for every sample taking part in some beta-good pair, only the
/// midpoint of its shortest such pair (lengths within `TIE_TOLERANCE` tie, and
/// ties go to the earlier entry).
pub fn reduce_lean_set(lean: &LeanSet, num_points: usize) -> LeanSet {
    let mut best: Vec<Option<usize>> = vec![None; num_points];
    for (i, lp) in lean.iter().enumerate() {
        for end in [lp.pair.0, lp.pair.1] {
            if end >= num_points {
                continue;
            }
            match best[end] {
                Some(j) if lp.pair_distance >= lean.pair_distances[j] * (1.0 - TIE_TOLERANCE) => {}
                _ => best[end] = Some(i),
            }
        }
    }
    let mut keep = vec![false; lean.len()];
    for i in best.into_iter().flatten() {
        keep[i] = true;
    }
    let mut out = lean.retain_indices(|i| keep[i]);
    out.reduced = true;
    out
}

/// Distance from `x` to the nearest lean midpoint, by linear scan.
pub fn lean_feature_size(lean: &LeanSet, x: &[f64]) -> Result<f64> {
    if lean.is_empty() {
        return Err(Error::EmptyLeanSet);
    }
    if x.len() != lean.ambient_dim {
        return Err(Error::DimensionMismatch {
            expected: lean.ambient_dim,
            found: x.len(),
        });
    }
    Ok(lean
        .midpoints
        .chunks_exact(lean.ambient_dim)
        .map(|m| squared_distance(m, x))
        .fold(f64::INFINITY, f64::min)
        .sqrt())
}

/// Spatial index over lean midpoints for repeated lnfs queries.
#[derive(Debug, Clone)]
pub struct LeanIndex {
    index: SpatialIndex,
}

impl LeanIndex {
    pub fn new(lean: &LeanSet) -> Result<Self> {
        if lean.is_empty() {
            return Err(Error::EmptyLeanSet);
        }
        Ok(LeanIndex {
            index: SpatialIndex::new(lean.midpoints.clone(), lean.ambient_dim),
        })
    }

    pub fn lnfs(&self, x: &[f64]) -> f64 {
        self.index
            .nearest(x, None)
            .expect("lean index is non-empty and dimension-checked")
            .distance
    }

    /// Lean feature size of every point of `cloud`, indexed by id.
    pub fn lnfs_all(&self, cloud: &PointCloud) -> Vec<f64> {
        (0..cloud.len())
            .into_par_iter()
            .map(|i| self.lnfs(cloud.point(i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_index, SubspaceBasis};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn circle(n: usize) -> PointCloud {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        PointCloud::from_rows(&rows, 1).unwrap()
    }

    fn radial_normals(cloud: &PointCloud) -> Vec<TangentEstimate> {
        cloud
            .points()
            .enumerate()
            .map(|(i, p)| {
                let normal = SubspaceBasis::orthonormalize(2, &[p.to_vec()]).unwrap();
                TangentEstimate {
                    point: i,
                    tangent: normal.orthogonal_complement(),
                    normal,
                    witnesses: vec![i],
                }
            })
            .collect()
    }

    fn theory() -> LeanParams {
        LeanParams::from_beta(PI / 5.0).unwrap()
    }

    #[test]
    fn c_beta_values() {
        assert_abs_diff_eq!(c_beta(PI / 5.0).unwrap(), (PI / 10.0).tan() / 3.0);
        assert_abs_diff_eq!(c_beta(PI / 5.0).unwrap(), 0.1083, epsilon = 5e-5);
        assert_abs_diff_eq!(c_beta(PI / 3.0).unwrap(), 0.19245, epsilon = 5e-6);
        assert!(c_beta(1e-9).unwrap() < 1e-9);
        assert!(matches!(c_beta(0.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(c_beta(FRAC_PI_2), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn beta_good_on_the_unit_circle() {
        // Sample every degree; ids are degrees.
        let c = circle(360);
        let normals = radial_normals(&c);
        let idx = build_index(&c).unwrap();
        let good = |p, q| is_beta_good(&c, &normals, &idx, p, q, theory()).unwrap();
        assert!(good(0, 180));
        assert!(good(0, 144));
        assert!(!good(0, 30));
        assert_eq!(good(0, 144), good(144, 0));
    }

    #[test]
    fn missing_normal_is_reported() {
        let c = circle(8);
        let mut normals = radial_normals(&c);
        normals.truncate(5);
        let idx = build_index(&c).unwrap();
        assert_eq!(
            is_beta_good(&c, &normals, &idx, 0, 6, theory()),
            Err(Error::MissingNormal(6))
        );
        assert_eq!(
            build_lean_set(&c, &normals, &idx, theory()),
            Err(Error::MissingNormal(5))
        );
    }

    #[test]
    fn two_antipodal_points() {
        let c = PointCloud::from_rows(&[[1.0, 0.0], [-1.0, 0.0]], 1).unwrap();
        let idx = build_index(&c).unwrap();
        let lean = build_lean_set(&c, &radial_normals(&c), &idx, theory()).unwrap();
        assert_eq!(lean.len(), 1);
        assert_eq!(lean.get(0).midpoint, &[0.0, 0.0]);
        assert_eq!(lean.get(0).pair, (0, 1));
        assert_eq!(lean.get(0).pair_distance, 2.0);
    }

    #[test]
    fn circle_lean_points_are_deep() {
        let c = circle(360);
        let idx = build_index(&c).unwrap();
        let lean = build_lean_set(&c, &radial_normals(&c), &idx, theory()).unwrap();
        assert!(!lean.is_empty());
        let limit = (PI / 5.0).cos();
        for lp in lean.iter() {
            assert!(crate::geometry::norm(lp.midpoint) <= limit + 1e-12);
        }
        let pairs: Vec<_> = lean.iter().map(|lp| lp.pair).collect();
        let mut sorted = pairs.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(pairs, sorted);
    }

    #[test]
    fn flat_patch_has_no_lean_points() {
        let mut rows = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                rows.push(vec![i as f64, j as f64, 0.0]);
            }
        }
        let c = PointCloud::from_rows(&rows, 2).unwrap();
        let z = SubspaceBasis::orthonormalize(3, &[vec![0.0, 0.0, 1.0]]).unwrap();
        let normals: Vec<_> = (0..c.len())
            .map(|i| TangentEstimate {
                point: i,
                tangent: z.orthogonal_complement(),
                normal: z.clone(),
                witnesses: vec![i],
            })
            .collect();
        let idx = build_index(&c).unwrap();
        assert!(build_lean_set(&c, &normals, &idx, theory())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn reduction_keeps_the_shortest_pair() {
        // Point 0 pairs with 1, 2, 3 at distances 2.0, 1.5, 3.0.
        let c =
            PointCloud::from_rows(&[[0.0, 0.0], [2.0, 0.0], [0.0, 1.5], [-3.0, 0.0]], 1).unwrap();
        let mut lean = LeanSet::empty(theory(), 2);
        lean.push_pair(&c, 0, 1);
        lean.push_pair(&c, 0, 2);
        lean.push_pair(&c, 0, 3);
        let reduced = reduce_lean_set(&lean, c.len());
        assert!(reduced.is_reduced());
        // Points 1 and 3 only have one pair each, so those survive too.
        let pairs: Vec<_> = reduced.iter().map(|lp| lp.pair).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (0, 3)]);

        // With 1 and 3 also paired more closely elsewhere, only (0,2) stays
        // on account of point 0.
        let c = PointCloud::from_rows(
            &[
                [0.0, 0.0],
                [2.0, 0.0],
                [0.0, 1.5],
                [-3.0, 0.0],
                [2.0, 0.1],
                [-3.0, 0.1],
            ],
            1,
        )
        .unwrap();
        let mut lean = LeanSet::empty(theory(), 2);
        for (p, q) in [(0, 1), (0, 2), (0, 3), (1, 4), (3, 5)] {
            lean.push_pair(&c, p, q);
        }
        let reduced = reduce_lean_set(&lean, c.len());
        let pairs: Vec<_> = reduced.iter().map(|lp| lp.pair).collect();
        assert_eq!(pairs, vec![(0, 2), (1, 4), (3, 5)]);
    }

    #[test]
    fn compact_and_materialized_reductions_agree() {
        let c = circle(97);
        let idx = build_index(&c).unwrap();
        let pairs = scan_good_pairs(&c, &radial_normals(&c), &idx, theory()).unwrap();
        let full = pairs.lean_set(&c);
        assert_eq!(full.len(), pairs.len());
        assert_eq!(pairs.reduced_lean_set(&c), reduce_lean_set(&full, c.len()));
        let filtered = pairs.without_short_pairs(&c, 1.5);
        assert_eq!(filtered.lean_set(&c), full.without_short_pairs(1.5));
    }

    #[test]
    fn reduction_of_empty_set() {
        let lean = LeanSet::empty(theory(), 2);
        assert!(reduce_lean_set(&lean, 10).is_empty());
    }

    #[test]
    fn lnfs_of_single_midpoint() {
        let c = PointCloud::from_rows(&[[1.0, 0.0], [-1.0, 0.0]], 1).unwrap();
        let mut lean = LeanSet::empty(theory(), 2);
        lean.push_pair(&c, 0, 1);
        assert_eq!(lean_feature_size(&lean, &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(LeanIndex::new(&lean).unwrap().lnfs(&[1.0, 0.0]), 1.0);
        assert_eq!(
            lean_feature_size(&LeanSet::empty(theory(), 2), &[0.0, 0.0]),
            Err(Error::EmptyLeanSet)
        );
        assert!(matches!(
            LeanIndex::new(&LeanSet::empty(theory(), 2)),
            Err(Error::EmptyLeanSet)
        ));
    }

    #[test]
    fn short_pairs_are_filtered() {
        let c = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]], 1).unwrap();
        let mut lean = LeanSet::empty(theory(), 2);
        lean.push_pair(&c, 0, 1);
        lean.push_pair(&c, 0, 2);
        assert_eq!(lean.without_short_pairs(0.0), lean);
        assert_eq!(lean.without_short_pairs(2.0).len(), 1);
        assert!(lean.without_short_pairs(5.5).is_empty());
    }
}
