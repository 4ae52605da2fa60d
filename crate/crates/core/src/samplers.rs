//! Analytic test manifolds with known Betti numbers and feature-size
//! oracles, plus the normal-displacement noise model.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{distance, squared_distance, PointCloud, SpatialIndex, SubspaceBasis};
use crate::tangent::TangentEstimate;

/// Largest density ratio a sampler will produce.
pub const MAX_EPS: f64 = 0.25;

/// Oversampling factor of the covering check.
pub const COVER_RESOLUTION: usize = 10;

/// How far the per-point lfs values can be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LfsKind {
    Exact,
    LowerBound,
    /// Numerically estimated; only used as a sampling scale.
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampleSize {
    Count(usize),
    /// Target density: every manifold point within `eps * lfs` of a sample.
    Eps(f64),
}

#[derive(Debug, Clone)]
pub struct ManifoldSample {
    pub name: &'static str,
    pub cloud: PointCloud,
    /// Analytic tangent space per point.
    pub tangents: Vec<SubspaceBasis>,
    /// Unit normal per point (flat), the displacement direction of the noise
    /// model.
    pub noise_directions: Vec<f64>,
    pub lfs: Vec<f64>,
    pub lfs_kind: LfsKind,
    pub betti: Vec<usize>,
    /// Measured covering ratio: max over a 10x denser sample of
    /// `d(x, P) / lfs(x)`.
    pub eps: f64,
}

impl ManifoldSample {
    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn noise_direction(&self, id: usize) -> &[f64] {
        let k = self.cloud.ambient_dim();
        &self.noise_directions[id * k..(id + 1) * k]
    }

    /// The analytic tangent and normal spaces in the form produced by the
    /// estimator.
    pub fn analytic_estimates(&self) -> Vec<TangentEstimate> {
        self.tangents
            .iter()
            .enumerate()
            .map(|(id, t)| TangentEstimate {
                point: id,
                tangent: t.clone(),
                normal: t.orthogonal_complement(),
                witnesses: vec![id],
            })
            .collect()
    }

    /// Sidecar: one line per point with the unit normal and the lfs value.
    pub fn write_sidecar<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for id in 0..self.len() {
            for c in self.noise_direction(id) {
                write!(out, "{c:.17e} ")?;
            }
            writeln!(out, "{:.17e}", self.lfs[id])?;
        }
        Ok(())
    }

    /// Scales the sample and every length-valued oracle by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<ManifoldSample> {
        let cloud = self.cloud.scaled(factor)?;
        Ok(ManifoldSample {
            cloud,
            lfs: self.lfs.iter().map(|l| l * factor.abs()).collect(),
            ..self.clone()
        })
    }
}

/// Raw generator output before the density check.
struct Draft {
    coords: Vec<f64>,
    tangents: Vec<Vec<Vec<f64>>>,
    normals: Vec<f64>,
    lfs: Vec<f64>,
}

impl Draft {
    fn with_capacity(n: usize, k: usize) -> Self {
        Draft {
            coords: Vec::with_capacity(n * k),
            tangents: Vec::with_capacity(n),
            normals: Vec::with_capacity(n * k),
            lfs: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, p: &[f64], tangent: Vec<Vec<f64>>, normal: &[f64], lfs: f64) {
        self.coords.extend_from_slice(p);
        self.tangents.push(tangent);
        self.normals.extend_from_slice(normal);
        self.lfs.push(lfs);
    }

    fn into_sample(
        self,
        name: &'static str,
        k: usize,
        s: usize,
        lfs_kind: LfsKind,
        betti: Vec<usize>,
        dense: &Draft,
    ) -> Result<ManifoldSample> {
        let n = self.lfs.len();
        let cloud = PointCloud::from_flat(self.coords, k, s)?;
        if cloud.len() != n {
            return Err(Error::InvalidInput(format!(
                "{name} sampler produced coincident points"
            )));
        }
        let tangents = self
            .tangents
            .iter()
            .map(|t| SubspaceBasis::orthonormalize(k, t))
            .collect::<Result<Vec<_>>>()?;
        let eps = covering_ratio(&cloud, &dense.coords, &dense.lfs);
        Ok(ManifoldSample {
            name,
            cloud,
            tangents,
            noise_directions: self.normals,
            lfs: self.lfs,
            lfs_kind,
            betti,
            eps,
        })
    }
}

/// Max over the dense points `x` of `d(x, P) / lfs(x)`.
pub fn covering_ratio(cloud: &PointCloud, dense_coords: &[f64], dense_lfs: &[f64]) -> f64 {
    let k = cloud.ambient_dim();
    let index = SpatialIndex::new(cloud.coords().to_vec(), k);
    dense_coords
        .par_chunks_exact(k)
        .zip(dense_lfs.par_iter())
        .map(|(x, l)| {
            let d = index
                .nearest(x, None)
                .map(|nb| nb.distance)
                .unwrap_or(f64::INFINITY);
            d / l
        })
        .reduce(|| 0.0, f64::max)
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::OutOfRange {
            name,
            value,
            range: "(0, inf)",
        });
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= MAX_EPS) {
        return Err(Error::OutOfRange {
            name: "eps",
            value: eps,
            range: "(0, 0.25]",
        });
    }
    Ok(())
}

/// Rejects a finished sample whose density is worse than `MAX_EPS`, or worse
/// than the requested `eps`.
fn check_density(
    sample: ManifoldSample,
    requested_eps: Option<f64>,
    dim: usize,
) -> Result<ManifoldSample> {
    let limit = requested_eps.unwrap_or(MAX_EPS);
    // Small slack for the discretized covering check.
    if sample.eps > limit * (1.0 + 1e-9) {
        let n = sample.len();
        let factor = (sample.eps / limit).powi(dim as i32);
        return Err(Error::UnderSampled {
            requested: n,
            required: (n as f64 * factor).ceil() as usize,
        });
    }
    Ok(sample)
}

// ---------------------------------------------------------------- circle

fn circle_draft(radius: f64, n: usize) -> Draft {
    let mut d = Draft::with_capacity(n, 2);
    for i in 0..n {
        let t = TAU * i as f64 / n as f64;
        let (s, c) = t.sin_cos();
        d.push(
            &[radius * c, radius * s],
            vec![vec![-s, c]],
            &[c, s],
            radius,
        );
    }
    d
}

/// Smallest `n` whose uniform sample is `eps`-dense: `2 sin(pi / 2n) <= eps`.
pub fn circle_count_for_eps(eps: f64) -> usize {
    (PI / (2.0 * (eps / 2.0).asin())).ceil() as usize
}

/// Uniform sample of the circle of radius `radius` about the origin, phase 0.
/// lfs is the radius, exactly.
pub fn sample_circle(radius: f64, size: SampleSize) -> Result<ManifoldSample> {
    check_positive("radius", radius)?;
    let (n, requested) = match size {
        SampleSize::Count(n) => (n, None),
        SampleSize::Eps(e) => {
            check_eps(e)?;
            (circle_count_for_eps(e), Some(e))
        }
    };
    let floor = circle_count_for_eps(MAX_EPS);
    if n < floor {
        return Err(Error::UnderSampled {
            requested: n,
            required: floor,
        });
    }
    let dense = circle_draft(radius, n * COVER_RESOLUTION);
    let sample =
        circle_draft(radius, n).into_sample("circle", 2, 1, LfsKind::Exact, vec![1, 1], &dense)?;
    check_density(sample, requested, 1)
}

// ---------------------------------------------------------------- sphere

fn sphere_draft(radius: f64, n: usize) -> Draft {
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut d = Draft::with_capacity(n, 3);
    for i in 0..n {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let rho = (1.0 - z * z).sqrt();
        let (s, c) = (golden * i as f64).sin_cos();
        let u = [rho * c, rho * s, z];
        let e_phi = vec![-s, c, 0.0];
        let e_theta = vec![z * c, z * s, -rho];
        d.push(
            &[radius * u[0], radius * u[1], radius * u[2]],
            vec![e_phi, e_theta],
            &u,
            radius,
        );
    }
    d
}

/// Fibonacci-lattice sample of the sphere of radius `radius` about the
/// origin. lfs is the radius, exactly.
pub fn sample_sphere(radius: f64, size: SampleSize) -> Result<ManifoldSample> {
    check_positive("radius", radius)?;
    let build = |n: usize| {
        let dense = sphere_draft(radius, n * COVER_RESOLUTION);
        sphere_draft(radius, n).into_sample("sphere", 3, 2, LfsKind::Exact, vec![1, 0, 1], &dense)
    };
    match size {
        SampleSize::Count(n) => {
            if n < 4 {
                return Err(Error::UnderSampled {
                    requested: n,
                    required: 4,
                });
            }
            check_density(build(n)?, None, 2)
        }
        SampleSize::Eps(e) => {
            check_eps(e)?;
            grow_until_dense(e, (2.0 / e).powi(2).ceil() as usize, build)
        }
    }
}

fn grow_until_dense<F>(eps: f64, mut n: usize, build: F) -> Result<ManifoldSample>
where
    F: Fn(usize) -> Result<ManifoldSample>,
{
    loop {
        let sample = build(n)?;
        if sample.eps <= eps {
            return Ok(sample);
        }
        n = (n as f64 * 1.1).ceil() as usize;
    }
}

// ---------------------------------------------------------------- torus

fn torus_point(big_r: f64, r: f64, u: f64, v: f64) -> ([f64; 3], Vec<Vec<f64>>, [f64; 3]) {
    let (su, cu) = u.sin_cos();
    let (sv, cv) = v.sin_cos();
    let w = big_r + r * cv;
    (
        [w * cu, w * su, r * sv],
        vec![vec![-su, cu, 0.0], vec![-sv * cu, -sv * su, cv]],
        [cv * cu, cv * su, sv],
    )
}

/// Ring sizes: an even number of rings, ring `j` and ring `j + rings/2`
/// (opposite each other across the tube) of equal size, summing to `n`.
fn torus_rings(big_r: f64, r: f64, n: usize) -> Vec<usize> {
    let half = ((n as f64 * r / big_r).sqrt() / 2.0).round().max(2.0) as usize;
    let rings = 2 * half;
    let mut counts = vec![n / rings; rings];
    let mut extra = n % rings;
    let mut j = 0;
    while extra > 0 {
        counts[j % rings] += 1;
        extra -= 1;
        // Fill ring pairs together so opposite rings stay aligned.
        j = if j < half { j + half } else { j - half + 1 };
    }
    counts
}

fn torus_draft(big_r: f64, r: f64, n: usize) -> Draft {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let counts = torus_rings(big_r, r, n);
    let rings = counts.len();
    let half = rings / 2;
    let mut d = Draft::with_capacity(n, 3);
    for (j, &m) in counts.iter().enumerate() {
        let v = TAU * j as f64 / rings as f64;
        // Opposite rings share a phase, so each of their points has an
        // antipode across the tube on the same meridian.
        let offset = ((j % half) as f64 * golden).fract();
        for i in 0..m {
            let u = TAU * (i as f64 + offset) / m as f64;
            let (p, t, nrm) = torus_point(big_r, r, u, v);
            let lfs = r.min((p[0] * p[0] + p[1] * p[1]).sqrt());
            d.push(&p, t, &nrm, lfs);
        }
    }
    d
}

/// Sample of the torus of revolution about the z axis: rings of constant
/// tube angle with golden-ratio phase offsets. lfs is the lower bound
/// `min(r, distance to the axis)`.
pub fn sample_torus(big_r: f64, r: f64, size: SampleSize) -> Result<ManifoldSample> {
    check_positive("R", big_r)?;
    check_positive("r", r)?;
    if r >= big_r {
        return Err(Error::OutOfRange {
            name: "r",
            value: r,
            range: "(0, R)",
        });
    }
    let build = |n: usize| {
        let dense = torus_draft(big_r, r, n * COVER_RESOLUTION);
        torus_draft(big_r, r, n).into_sample(
            "torus",
            3,
            2,
            LfsKind::LowerBound,
            vec![1, 2, 1],
            &dense,
        )
    };
    match size {
        SampleSize::Count(n) => {
            if n < 16 {
                return Err(Error::UnderSampled {
                    requested: n,
                    required: 16,
                });
            }
            check_density(build(n)?, None, 2)
        }
        SampleSize::Eps(e) => {
            check_eps(e)?;
            let area = 4.0 * PI * PI * big_r * r;
            grow_until_dense(e, (area / (e * r).powi(2)).ceil() as usize, build)
        }
    }
}

/// `(sqrt(x^2 + y^2) - R)^2 + z^2 - r^2`.
pub fn torus_residual(big_r: f64, r: f64, p: &[f64]) -> f64 {
    let w = (p[0] * p[0] + p[1] * p[1]).sqrt() - big_r;
    w * w + p[2] * p[2] - r * r
}

// ---------------------------------------------------------------- helix loop

/// Toroidal helix: a closed curve winding `turns` times around a tube of
/// radius `tube` about the circle of radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelixLoop {
    pub radius: f64,
    pub tube: f64,
    pub turns: u32,
}

impl Default for HelixLoop {
    fn default() -> Self {
        HelixLoop {
            radius: 1.0,
            tube: 0.14,
            turns: 22,
        }
    }
}

impl HelixLoop {
    pub fn point(&self, t: f64) -> [f64; 3] {
        let m = self.turns as f64;
        let (st, ct) = t.sin_cos();
        let (sm, cm) = (m * t).sin_cos();
        let w = self.radius + self.tube * cm;
        [w * ct, w * st, self.tube * sm]
    }

    pub fn velocity(&self, t: f64) -> [f64; 3] {
        let m = self.turns as f64;
        let (st, ct) = t.sin_cos();
        let (sm, cm) = (m * t).sin_cos();
        let w = self.radius + self.tube * cm;
        let dw = -self.tube * m * sm;
        [dw * ct - w * st, dw * st + w * ct, self.tube * m * cm]
    }

    /// Unit vector from the tube's core circle to the curve.
    pub fn tube_normal(&self, t: f64) -> [f64; 3] {
        let m = self.turns as f64;
        let (st, ct) = t.sin_cos();
        let (sm, cm) = (m * t).sin_cos();
        [cm * ct, cm * st, sm]
    }

    /// Radius of curvature, by finite differences of the velocity.
    fn curvature_radius(&self, t: f64) -> f64 {
        let h = 1e-5;
        let v = self.velocity(t);
        let (a, b) = (self.velocity(t + h), self.velocity(t - h));
        let acc: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect();
        let speed2 = v.iter().map(|x| x * x).sum::<f64>();
        let cross = [
            v[1] * acc[2] - v[2] * acc[1],
            v[2] * acc[0] - v[0] * acc[2],
            v[0] * acc[1] - v[1] * acc[0],
        ];
        let c = cross.iter().map(|x| x * x).sum::<f64>().sqrt();
        speed2.powf(1.5) / c
    }

    /// Parameters of `n` points equally spaced in arc length, starting at 0.
    fn arc_length_parameters(&self, n: usize) -> Vec<f64> {
        let fine = (64 * n).max(4096);
        let dt = TAU / fine as f64;
        let mut cum = Vec::with_capacity(fine + 1);
        cum.push(0.0);
        let mut prev = self.point(0.0);
        for i in 1..=fine {
            let p = self.point(dt * i as f64);
            let last = *cum.last().unwrap();
            cum.push(last + distance(&prev, &p));
            prev = p;
        }
        let total = cum[fine];
        let mut out = Vec::with_capacity(n);
        let mut seg = 0;
        for i in 0..n {
            let target = total * i as f64 / n as f64;
            while cum[seg + 1] < target {
                seg += 1;
            }
            let frac = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
            out.push(dt * (seg as f64 + frac));
        }
        out
    }

    fn draft(&self, n: usize) -> Draft {
        let ts = self.arc_length_parameters(n);
        // Distance between neighbouring windings bounds the reach from above;
        // half of it, capped by the curvature radius, is the scale used.
        let pitch = TAU * (self.radius - self.tube) / self.turns as f64;
        let mut d = Draft::with_capacity(n, 3);
        for &t in &ts {
            let v = self.velocity(t);
            let nrm = self.tube_normal(t);
            let lfs = self.curvature_radius(t).min(0.5 * pitch).min(self.tube);
            d.push(&self.point(t), vec![v.to_vec()], &nrm, lfs);
        }
        d
    }
}

/// Arc-length uniform sample of a toroidal helix. lfs is an estimate.
pub fn sample_helix_loop(shape: HelixLoop, n: usize) -> Result<ManifoldSample> {
    check_positive("radius", shape.radius)?;
    check_positive("tube", shape.tube)?;
    if shape.tube >= shape.radius || shape.turns == 0 {
        return Err(Error::InvalidInput(
            "helix needs 0 < tube < radius and at least one turn".into(),
        ));
    }
    if n < 16 {
        return Err(Error::UnderSampled {
            requested: n,
            required: 16,
        });
    }
    let dense = shape.draft(n * COVER_RESOLUTION);
    let sample =
        shape
            .draft(n)
            .into_sample("helix", 3, 1, LfsKind::Estimate, vec![1, 1], &dense)?;
    check_density(sample, None, 1)
}

// ---------------------------------------------------------------- neck curve

#[derive(Debug, Clone, Copy, PartialEq)]
enum Piece {
    Segment {
        from: [f64; 2],
        to: [f64; 2],
        scale: f64,
    },
    Arc {
        center: [f64; 2],
        radius: f64,
        start: f64,
        sweep: f64,
        scale: f64,
    },
}

impl Piece {
    fn length(&self) -> f64 {
        match *self {
            Piece::Segment { from, to, .. } => distance(&from, &to),
            Piece::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Point and unit tangent at arc length `s` from the start.
    fn at(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        match *self {
            Piece::Segment { from, to, .. } => {
                let len = self.length();
                let u = [(to[0] - from[0]) / len, (to[1] - from[1]) / len];
                ([from[0] + s * u[0], from[1] + s * u[1]], u)
            }
            Piece::Arc {
                center,
                radius,
                start,
                sweep,
                ..
            } => {
                let a = start + sweep.signum() * s / radius;
                let (sa, ca) = a.sin_cos();
                let sign = sweep.signum();
                (
                    [center[0] + radius * ca, center[1] + radius * sa],
                    [-sign * sa, sign * ca],
                )
            }
        }
    }

    fn distance_to(&self, x: &[f64; 2]) -> f64 {
        match *self {
            Piece::Segment { from, to, .. } => {
                let d = [to[0] - from[0], to[1] - from[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let t =
                    (((x[0] - from[0]) * d[0] + (x[1] - from[1]) * d[1]) / len2).clamp(0.0, 1.0);
                distance(x, &[from[0] + t * d[0], from[1] + t * d[1]])
            }
            Piece::Arc {
                center,
                radius,
                start,
                sweep,
                ..
            } => {
                let rel = [x[0] - center[0], x[1] - center[1]];
                let ang = rel[1].atan2(rel[0]);
                // Angle of x measured from the start, in the sweep direction.
                let along = ((ang - start) * sweep.signum()).rem_euclid(TAU);
                if along <= sweep.abs() {
                    (distance(&rel, &[0.0, 0.0]) - radius).abs()
                } else {
                    let (a, _) = self.at(0.0);
                    let (b, _) = self.at(self.length());
                    distance(x, &a).min(distance(x, &b))
                }
            }
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            Piece::Segment { scale, .. } | Piece::Arc { scale, .. } => scale,
        }
    }
}

/// A dumbbell-like closed planar curve: a small lobe and a large lobe joined
/// by a straight channel whose walls are `width` apart, with round fillets
/// at the four junctions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeckCurve {
    pub width: f64,
    pub small_radius: f64,
    pub large_radius: f64,
    pub fillet: f64,
    pub channel: f64,
}

impl NeckCurve {
    /// Proportions used by the test suite: lobes of 10 and 240 neck widths,
    /// fillets of one width and a channel of two widths.
    pub fn with_width(width: f64) -> Self {
        NeckCurve {
            width,
            small_radius: 10.0 * width,
            large_radius: 240.0 * width,
            fillet: width,
            channel: 2.0 * width,
        }
    }

    fn pieces(&self) -> Vec<Piece> {
        let h = self.width / 2.0;
        let f = self.fillet;
        let (r1, r2) = (self.small_radius, self.large_radius);
        let dx1 = ((r1 + f).powi(2) - (h + f).powi(2)).sqrt();
        let dx2 = ((r2 + f).powi(2) - (h + f).powi(2)).sqrt();
        let c1 = [-dx1, 0.0];
        let c2 = [self.channel + dx2, 0.0];
        // Fillet centers, top and bottom, left and right.
        let fl = |sy: f64| [0.0, sy * (h + f)];
        let fr = |sy: f64| [self.channel, sy * (h + f)];
        // Angle of the lobe tangent point seen from the lobe center, and of
        // the same point seen from the fillet center.
        let a1 = (h + f).atan2(dx1);
        let a2 = (h + f).atan2(-dx2);
        let wall = h;
        vec![
            // Top wall, left to right.
            Piece::Segment {
                from: [0.0, h],
                to: [self.channel, h],
                scale: wall,
            },
            // Top right fillet: from straight below its center towards the
            // large lobe.
            Piece::Arc {
                center: fr(1.0),
                radius: f,
                start: -PI / 2.0,
                sweep: (-(h + f)).atan2(dx2) + PI / 2.0,
                scale: f,
            },
            // Large lobe, clockwise through its far side.
            Piece::Arc {
                center: c2,
                radius: r2,
                start: a2,
                sweep: -2.0 * a2,
                scale: r2,
            },
            Piece::Arc {
                center: fr(-1.0),
                radius: f,
                start: (h + f).atan2(dx2),
                sweep: PI / 2.0 - (h + f).atan2(dx2),
                scale: f,
            },
            // Bottom wall, right to left.
            Piece::Segment {
                from: [self.channel, -h],
                to: [0.0, -h],
                scale: wall,
            },
            Piece::Arc {
                center: fl(-1.0),
                radius: f,
                start: PI / 2.0,
                sweep: (h + f).atan2(-dx1) - PI / 2.0,
                scale: f,
            },
            // Small lobe, clockwise through its far side.
            Piece::Arc {
                center: c1,
                radius: r1,
                start: -a1,
                sweep: -(TAU - 2.0 * a1),
                scale: r1,
            },
            Piece::Arc {
                center: fl(1.0),
                radius: f,
                start: (-(h + f)).atan2(-dx1),
                sweep: -PI / 2.0 - (-(h + f)).atan2(-dx1),
                scale: f,
            },
        ]
    }

    /// Sampling scale: `min over pieces of (piece scale + distance)`, a
    /// 1-Lipschitz function that equals the wall half-width on the channel
    /// and the curvature radius elsewhere.
    pub fn scale_at(&self, x: &[f64; 2]) -> f64 {
        scale_at(&self.pieces(), x)
    }

    pub fn length(&self) -> f64 {
        self.pieces().iter().map(Piece::length).sum()
    }
}

fn scale_at(pieces: &[Piece], x: &[f64; 2]) -> f64 {
    pieces
        .iter()
        .map(|p| p.scale() + p.distance_to(x))
        .fold(f64::INFINITY, f64::min)
}

fn neck_draft(pieces: &[Piece], eps: f64) -> Draft {
    let mut d = Draft::with_capacity(1024, 2);
    let mut carry = 0.0;
    for piece in pieces {
        let len = piece.length();
        let mut s = carry;
        while s < len {
            let (p, t) = piece.at(s);
            let scale = scale_at(pieces, &p);
            d.push(&p, vec![t.to_vec()], &[t[1], -t[0]], scale);
            s += eps * scale;
        }
        carry = s - len;
    }
    d
}

/// Arc-length sample of the neck curve with step `eps * scale(x)`.
/// The scale serves as the lfs estimate.
pub fn sample_neck_curve(shape: NeckCurve, eps: f64) -> Result<ManifoldSample> {
    check_positive("neck width", shape.width)?;
    check_positive("fillet", shape.fillet)?;
    check_positive("channel", shape.channel)?;
    check_eps(eps)?;
    if !(shape.small_radius > shape.width && shape.large_radius > shape.width) {
        return Err(Error::InvalidInput(
            "lobes must be wider than the neck".into(),
        ));
    }
    let pieces = shape.pieces();
    let dense = neck_draft(&pieces, eps / COVER_RESOLUTION as f64);
    let sample = neck_draft(&pieces, eps).into_sample(
        "neck",
        2,
        1,
        LfsKind::Estimate,
        vec![1, 1],
        &dense,
    )?;
    check_density(sample, Some(eps), 1)
}

// ---------------------------------------------------------------- noise

/// Largest pairwise distance, computed exactly.
pub fn diameter(cloud: &PointCloud) -> f64 {
    (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            (i + 1..cloud.len())
                .map(|j| squared_distance(p, cloud.point(j)))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// Displaces each point by `u * diameter` along its unit direction, with
/// `u` uniform in `[-scale, scale]` from a ChaCha8 stream seeded by `seed`.
pub fn add_normal_noise(
    cloud: &PointCloud,
    directions: &[f64],
    scale: f64,
    seed: u64,
) -> Result<PointCloud> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::OutOfRange {
            name: "noise scale",
            value: scale,
            range: "[0, inf)",
        });
    }
    let k = cloud.ambient_dim();
    if directions.len() != cloud.coords().len() {
        return Err(Error::DimensionMismatch {
            expected: cloud.coords().len(),
            found: directions.len(),
        });
    }
    if scale == 0.0 {
        return Ok(cloud.clone());
    }
    let amplitude = scale * diameter(cloud);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = cloud.coords().to_vec();
    for (p, dir) in coords.chunks_exact_mut(k).zip(directions.chunks_exact(k)) {
        let u: f64 = rng.gen_range(-1.0..=1.0);
        for (x, n) in p.iter_mut().zip(dir) {
            *x += u * amplitude * n;
        }
    }
    PointCloud::from_flat(coords, k, cloud.intrinsic_dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::norm;

    #[test]
    fn circle_points_on_unit_circle() {
        let s = sample_circle(1.0, SampleSize::Count(360)).unwrap();
        assert_eq!(s.len(), 360);
        for p in s.cloud.points() {
            assert!((norm(p) - 1.0).abs() <= 1e-12);
        }
        assert!((s.eps - 2.0 * (PI / 720.0).sin()).abs() < 1e-12);
        assert_eq!(s.betti, vec![1, 1]);
    }

    #[test]
    fn circle_from_eps() {
        let s = sample_circle(2.0, SampleSize::Eps(0.01)).unwrap();
        assert!(s.eps <= 0.01);
        assert_eq!(s.len(), circle_count_for_eps(0.01));
        assert!(matches!(
            sample_circle(1.0, SampleSize::Count(5)),
            Err(Error::UnderSampled { .. })
        ));
    }

    #[test]
    fn sphere_on_surface_and_dense() {
        let s = sample_sphere(1.5, SampleSize::Count(2000)).unwrap();
        for p in s.cloud.points() {
            assert!((norm(p) - 1.5).abs() <= 1e-12);
        }
        assert!(s.eps < 0.1, "eps {}", s.eps);
        let e = sample_sphere(1.0, SampleSize::Eps(0.08)).unwrap();
        assert!(e.eps <= 0.08);
    }

    #[test]
    fn torus_residual_is_tiny() {
        let s = sample_torus(2.0, 0.8, SampleSize::Count(5000)).unwrap();
        assert_eq!(s.len(), 5000);
        for p in s.cloud.points() {
            assert!(torus_residual(2.0, 0.8, p).abs() < 1e-10);
        }
        assert_eq!(s.lfs_kind, LfsKind::LowerBound);
        assert!(s.lfs.iter().all(|&l| l > 0.0 && l <= 0.8));
    }

    #[test]
    fn analytic_frames_are_orthogonal() {
        let s = sample_torus(2.0, 0.8, SampleSize::Count(1000)).unwrap();
        for (id, est) in s.analytic_estimates().iter().enumerate() {
            assert_eq!(est.normal.dim(), 1);
            let n = s.noise_direction(id);
            for t in est.tangent.vectors() {
                assert!(crate::geometry::dot(t, n).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn helix_is_closed_and_evenly_spaced() {
        let shape = HelixLoop::default();
        let s = sample_helix_loop(shape, 1000).unwrap();
        let gaps: Vec<f64> = (0..s.len())
            .map(|i| distance(s.cloud.point(i), s.cloud.point((i + 1) % s.len())))
            .collect();
        let (lo, hi) = gaps
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &g| (a.min(g), b.max(g)));
        assert!(hi / lo < 1.01, "gaps {lo} .. {hi}");
        assert!(s.eps < 0.5);
    }

    #[test]
    fn neck_curve_is_closed_and_continuous() {
        let shape = NeckCurve::with_width(0.05);
        let pieces = shape.pieces();
        for w in 0..pieces.len() {
            let a = &pieces[w];
            let b = &pieces[(w + 1) % pieces.len()];
            let (end, t_end) = a.at(a.length());
            let (start, t_start) = b.at(0.0);
            assert!(distance(&end, &start) < 1e-9, "gap after piece {w}");
            assert!(distance(&t_end, &t_start) < 1e-9, "kink after piece {w}");
        }
    }

    #[test]
    fn neck_spacing_respects_scale() {
        let shape = NeckCurve::with_width(0.05);
        let s = sample_neck_curve(shape, 0.05).unwrap();
        assert!(s.eps <= 0.05);
        let n = s.len();
        for i in 0..n {
            let gap = distance(s.cloud.point(i), s.cloud.point((i + 1) % n));
            assert!(gap <= 0.05 * s.lfs[i] * (1.0 + 1e-9), "gap {gap} at {i}");
        }
        // Near the neck the scale is the half-width.
        let near: Vec<f64> = (0..n)
            .filter(|&i| s.cloud.point(i)[0] > 0.0 && s.cloud.point(i)[0] < shape.channel)
            .map(|i| s.lfs[i])
            .collect();
        assert!(!near.is_empty());
        assert!(near.iter().all(|&l| (l - 0.025).abs() < 1e-12));
    }

    #[test]
    fn noise_model() {
        let s = sample_sphere(0.5, SampleSize::Count(500)).unwrap();
        let same = add_normal_noise(&s.cloud, &s.noise_directions, 0.0, 1).unwrap();
        assert_eq!(same, s.cloud);

        let noisy = add_normal_noise(&s.cloud, &s.noise_directions, 0.005, 7).unwrap();
        let diam = diameter(&s.cloud);
        assert!(diam <= 1.0);
        for (a, b) in s.cloud.points().zip(noisy.points()) {
            assert!(distance(a, b) <= 0.005 * diam * (1.0 + 1e-12));
        }
        let again = add_normal_noise(&s.cloud, &s.noise_directions, 0.005, 7).unwrap();
        assert_eq!(
            again
                .coords()
                .iter()
                .map(|c| c.to_bits())
                .collect::<Vec<_>>(),
            noisy
                .coords()
                .iter()
                .map(|c| c.to_bits())
                .collect::<Vec<_>>()
        );
        let other = add_normal_noise(&s.cloud, &s.noise_directions, 0.005, 8).unwrap();
        assert_ne!(other, noisy);
    }
}
