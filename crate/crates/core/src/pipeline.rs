//! End-to-end homology inference: normals, lean set, lean feature size,
//! decimation, adaptive complex and homology.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::complex::{build_two_scale_complex, ComplexParams, DEFAULT_SIMPLEX_CAP};
use crate::error::Error;
use crate::geometry::{build_index, PointCloud, SpatialIndex};
use crate::homology::{betti_numbers, persistent_image_rank};
use crate::lean::{scan_good_pairs, LeanIndex, LeanParams, LeanSet};
use crate::sparsify::{
    lean_sparsify, verify_uniformity, SparseSample, UniformityReport, COVERAGE_FACTOR,
};
use crate::tangent::{estimate_all_normals, TangentEstimate};

/// The angle that fixes every other constant in theory mode.
pub const THEORY_BETA: f64 = PI / 5.0;

/// `(1/26) * cos(2 beta) / (1 + cos(2 beta))`.
pub fn theory_rho(beta: f64) -> f64 {
    let c = (2.0 * beta).cos();
    c / (1.0 + c) / 26.0
}

pub const PRACTICAL_C_BETA: f64 = 0.5;
pub const PRACTICAL_RHO: f64 = 0.5;
pub const PRACTICAL_R: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Constants derived from `beta = pi/5`; image rank between two levels.
    Theory,
    /// Relaxed constants; Betti numbers of a single complex.
    Practical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Override {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub beta: f64,
    pub c_beta: f64,
    pub rho: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    /// Highest homology dimension reported; defaults to the intrinsic
    /// dimension.
    pub top_dim: Option<usize>,
    /// Noise filter: lean points from pairs closer than this are ignored.
    pub min_pair_distance: Option<f64>,
    /// Measure lnfs against the reduced lean set (the default) instead of
    /// the full one.
    pub reduced_lean_set: bool,
    pub simplex_cap: usize,
    /// Echoed for reproducibility; the pipeline itself draws no random
    /// numbers.
    pub seed: u64,
    /// Every value changed from the mode's defaults.
    pub overrides: Vec<Override>,
}

impl PipelineConfig {
    pub fn theory() -> Self {
        let rho = theory_rho(THEORY_BETA);
        PipelineConfig {
            mode: Mode::Theory,
            beta: THEORY_BETA,
            c_beta: (THEORY_BETA / 2.0).tan() / 3.0,
            rho,
            alpha_lo: 2.0 * rho,
            alpha_hi: 12.0 * rho,
            top_dim: None,
            min_pair_distance: None,
            reduced_lean_set: true,
            simplex_cap: DEFAULT_SIMPLEX_CAP,
            seed: 0,
            overrides: Vec::new(),
        }
    }

    pub fn practical() -> Self {
        PipelineConfig {
            mode: Mode::Practical,
            beta: THEORY_BETA,
            c_beta: PRACTICAL_C_BETA,
            rho: PRACTICAL_RHO,
            alpha_lo: PRACTICAL_R,
            alpha_hi: PRACTICAL_R,
            ..Self::theory()
        }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Theory => Self::theory(),
            Mode::Practical => Self::practical(),
        }
    }

    /// `delta = 6 rho / 5`, the density the decimated sample achieves.
    pub fn delta(&self) -> f64 {
        COVERAGE_FACTOR * self.rho
    }

    fn set(&mut self, name: &'static str, value: f64) -> Result<(), PipelineError> {
        if self.mode == Mode::Theory {
            return Err(PipelineError::config(format!(
                "{name} is derived from beta = pi/5 in theory mode and cannot be overridden"
            )));
        }
        if !(value > 0.0 && value.is_finite()) {
            return Err(PipelineError::config(format!(
                "{name} must be positive, got {value}"
            )));
        }
        self.overrides.retain(|o| o.name != name);
        self.overrides.push(Override { name, value });
        Ok(())
    }

    /// Level of the single complex in practical mode.
    pub fn with_r(mut self, r: f64) -> Result<Self, PipelineError> {
        self.set("r", r)?;
        self.alpha_lo = r;
        self.alpha_hi = r;
        Ok(self)
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self, PipelineError> {
        self.set("rho", rho)?;
        self.rho = rho;
        Ok(self)
    }

    pub fn with_c_beta(mut self, c_beta: f64) -> Result<Self, PipelineError> {
        self.set("c_beta", c_beta)?;
        self.c_beta = c_beta;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self, PipelineError> {
        if !(beta < PI / 2.0) {
            return Err(PipelineError::config(format!(
                "beta must lie in (0, pi/2), got {beta}"
            )));
        }
        self.set("beta", beta)?;
        self.beta = beta;
        Ok(self)
    }

    pub fn with_top_dim(mut self, top_dim: usize) -> Self {
        self.top_dim = Some(top_dim);
        self
    }

    pub fn with_min_pair_distance(mut self, threshold: f64) -> Result<Self, PipelineError> {
        if !(threshold >= 0.0 && threshold.is_finite()) {
            return Err(PipelineError::config(format!(
                "minimum pair distance must be non-negative, got {threshold}"
            )));
        }
        self.min_pair_distance = Some(threshold);
        Ok(self)
    }

    pub fn with_reduced_lean_set(mut self, reduced: bool) -> Self {
        self.reduced_lean_set = reduced;
        self
    }

    pub fn with_simplex_cap(mut self, cap: usize) -> Self {
        self.simplex_cap = cap;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn lean_params(&self) -> Result<LeanParams, PipelineError> {
        LeanParams::with_c_beta(self.beta, self.c_beta)
            .map_err(|e| PipelineError::new(Stage::Config, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Input,
    Normals,
    LeanSet,
    Lnfs,
    Sparsify,
    Complex,
    Homology,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "configuration",
            Stage::Input => "input",
            Stage::Normals => "normal estimation",
            Stage::LeanSet => "lean set",
            Stage::Lnfs => "lean feature size",
            Stage::Sparsify => "sparsification",
            Stage::Complex => "complex construction",
            Stage::Homology => "homology",
        };
        f.write_str(name)
    }
}

/// A library error tagged with the stage it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineError {
    pub stage: Stage,
    pub error: Error,
}

impl PipelineError {
    pub fn new(stage: Stage, error: Error) -> Self {
        PipelineError { stage, error }
    }

    fn config(message: String) -> Self {
        Self::new(Stage::Config, Error::InvalidInput(message))
    }

    /// What the user can change to get past the failure.
    pub fn hint(&self) -> &'static str {
        match (&self.error, self.stage) {
            (Error::EmptyLeanSet, _) => {
                "no beta-good pairs were found; the data may be flat or open (no medial axis to detect), \
                 too sparse, or the noise filter threshold may be too large"
            }
            (Error::ComplexTooLarge { .. }, _) => {
                "the adaptive complex exceeds the simplex cap; lower the maximum homology dimension or raise the cap"
            }
            (Error::InsufficientCandidates { .. }, _) => {
                "a sample has too few well-spread neighbours to span a tangent space; check the intrinsic \
                 dimension and remove isolated points"
            }
            (Error::Parse { .. } | Error::Io(_), _) => "check the path and the point file format",
            (_, Stage::Config) => "theory mode accepts no constants; use practical mode to change them",
            (Error::UnderSampled { .. }, _) => "increase the number of samples",
            _ => "check the input cloud and intrinsic dimension",
        }
    }

    /// Process exit code for this class of failure.
    pub fn exit_code(&self) -> i32 {
        match (&self.error, self.stage) {
            (Error::Parse { .. } | Error::Io(_), _) => 3,
            (Error::EmptyLeanSet, _) => 4,
            (Error::ComplexTooLarge { .. }, _) => 5,
            (Error::InsufficientCandidates { .. }, _) => 6,
            (_, Stage::Config) => 7,
            _ => 8,
        }
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for PipelineError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalStats {
    pub estimated: usize,
    /// Distance from a sample to its farthest chosen witness, relative to
    /// its nearest-neighbour distance: median and maximum.
    pub median_witness_spread: f64,
    pub max_witness_spread: f64,
}

impl NormalStats {
    fn of(cloud: &PointCloud, estimates: &[TangentEstimate]) -> Self {
        let mut spreads: Vec<f64> = estimates
            .iter()
            .map(|e| {
                let p = cloud.point(e.point);
                let ds: Vec<f64> = e.witnesses[1..]
                    .iter()
                    .map(|&w| crate::geometry::distance(p, cloud.point(w)))
                    .collect();
                let nearest = ds.first().copied().unwrap_or(0.0);
                let far = ds.iter().copied().fold(0.0, f64::max);
                if nearest > 0.0 {
                    far / nearest
                } else {
                    1.0
                }
            })
            .collect();
        spreads.sort_by(f64::total_cmp);
        NormalStats {
            estimated: estimates.len(),
            median_witness_spread: spreads.get(spreads.len() / 2).copied().unwrap_or(0.0),
            max_witness_spread: spreads.last().copied().unwrap_or(0.0),
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timings {
    pub normals: f64,
    pub lean_set: f64,
    pub lnfs: f64,
    pub sparsify: f64,
    pub complex: f64,
    pub homology: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceReport {
    pub input_size: usize,
    pub duplicates_removed: usize,
    pub ambient_dim: usize,
    pub intrinsic_dim: usize,
    pub normals: NormalStats,
    /// `|L_beta|` before the noise filter.
    pub lean_set_size: usize,
    /// `|L_beta|` after the noise filter.
    pub filtered_lean_set_size: usize,
    pub reduced_lean_set_size: usize,
    pub sparse_size: usize,
    pub complex_size: usize,
    pub delta: f64,
    /// Rank of `H_i(R^lo) -> H_i(R^hi)` for `i = 0..=top_dim`; the Betti
    /// numbers of `R^r` in practical mode.
    pub betti: Vec<usize>,
    pub betti_lo: Vec<usize>,
    pub betti_hi: Vec<usize>,
    pub uniformity: UniformityReport,
    pub timings: Timings,
    pub config: PipelineConfig,
}

impl InferenceReport {
    /// The report with timings zeroed; equal across repeated runs.
    pub fn without_timings(&self) -> InferenceReport {
        InferenceReport {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

/// Intermediate results kept for export and inspection.
#[derive(Debug, Clone)]
pub struct PipelineArtifacts {
    pub normals: Vec<TangentEstimate>,
    pub lean: LeanSet,
    pub lnfs: Vec<f64>,
    pub sparse: SparseSample,
    pub complex: Option<crate::complex::FilteredCliqueComplex>,
    pub barcode: Option<crate::homology::Barcode>,
}

/// Outcome of the stages up to decimation.
struct Decimation {
    normals: Vec<TangentEstimate>,
    normal_stats: NormalStats,
    lean_set_size: usize,
    filtered_lean_set_size: usize,
    reduced_lean_set_size: usize,
    lean: LeanSet,
    lnfs: Vec<f64>,
    sparse: SparseSample,
    uniformity: UniformityReport,
}

fn decimate(
    cloud: &PointCloud,
    config: &PipelineConfig,
    timings: &mut Timings,
) -> Result<Decimation, PipelineError> {
    let params = config.lean_params()?;
    if !(config.rho > 0.0) {
        return Err(PipelineError::config(format!(
            "rho must be positive, got {}",
            config.rho
        )));
    }
    let index: SpatialIndex = build_index(cloud).at(Stage::Input)?;

    let t = Instant::now();
    let normals = estimate_all_normals(cloud, &index).at(Stage::Normals)?;
    let normal_stats = NormalStats::of(cloud, &normals);
    timings.normals = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let pairs = scan_good_pairs(cloud, &normals, &index, params).at(Stage::LeanSet)?;
    let lean_set_size = pairs.len();
    let pairs = match config.min_pair_distance {
        Some(threshold) => pairs.without_short_pairs(cloud, threshold),
        None => pairs,
    };
    let filtered_lean_set_size = pairs.len();
    let reduced = pairs.reduced_lean_set(cloud);
    let reduced_lean_set_size = reduced.len();
    let lean = if config.reduced_lean_set {
        reduced
    } else {
        pairs.lean_set(cloud)
    };
    drop(pairs);
    timings.lean_set = t.elapsed().as_secs_f64();
    log::info!("lean set: {lean_set_size} pairs, {reduced_lean_set_size} reduced");

    let t = Instant::now();
    let lnfs = LeanIndex::new(&lean).at(Stage::LeanSet)?.lnfs_all(cloud);
    if let Some(id) = lnfs.iter().position(|&l| l <= 0.0) {
        return Err(PipelineError::new(Stage::Lnfs, Error::ZeroLnfs(id)));
    }
    timings.lnfs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let sparse = lean_sparsify(cloud, &lnfs, config.rho).at(Stage::Sparsify)?;
    let uniformity = verify_uniformity(&sparse, cloud, &lnfs).at(Stage::Sparsify)?;
    timings.sparsify = t.elapsed().as_secs_f64();
    log::info!("sparsified {} -> {}", cloud.len(), sparse.len());

    Ok(Decimation {
        normals,
        normal_stats,
        lean_set_size,
        filtered_lean_set_size,
        reduced_lean_set_size,
        lean,
        lnfs,
        sparse,
        uniformity,
    })
}

fn check_input(cloud: &PointCloud) -> Result<(), PipelineError> {
    if cloud.is_empty() {
        return Err(PipelineError::new(Stage::Input, Error::EmptyCloud));
    }
    Ok(())
}

/// Runs the stages through decimation only.
pub fn sparsify_only(
    cloud: &PointCloud,
    config: &PipelineConfig,
) -> Result<(SparseSample, UniformityReport, LeanSet), PipelineError> {
    check_input(cloud)?;
    let mut timings = Timings::default();
    let d = decimate(cloud, config, &mut timings)?;
    Ok((d.sparse, d.uniformity, d.lean))
}

/// The full inference.
pub fn lean_topo(
    cloud: &PointCloud,
    config: &PipelineConfig,
) -> Result<InferenceReport, PipelineError> {
    lean_topo_with_artifacts(cloud, config).map(|(report, _)| report)
}

pub fn lean_topo_with_artifacts(
    cloud: &PointCloud,
    config: &PipelineConfig,
) -> Result<(InferenceReport, PipelineArtifacts), PipelineError> {
    check_input(cloud)?;
    let start = Instant::now();
    let mut timings = Timings::default();
    let top_dim = config.top_dim.unwrap_or(cloud.intrinsic_dim());
    let d = decimate(cloud, config, &mut timings)?;

    let t = Instant::now();
    let kept = cloud.subset(&d.sparse.retained);
    let kept_lnfs = d.sparse.retained_lnfs();
    let params = ComplexParams {
        simplex_cap: config.simplex_cap,
        ..ComplexParams::two_level(config.alpha_lo, config.alpha_hi, top_dim + 1)
    };
    let complex = build_two_scale_complex(&kept, &kept_lnfs, params).at(Stage::Complex)?;
    timings.complex = t.elapsed().as_secs_f64();
    log::info!("complex: {} simplices", complex.len());

    let t = Instant::now();
    let (betti, betti_lo, betti_hi, barcode) = match config.mode {
        Mode::Theory => {
            let r = persistent_image_rank(&complex, top_dim).at(Stage::Homology)?;
            (r.image_ranks, r.betti_lo, r.betti_hi, r.barcode)
        }
        Mode::Practical => {
            let b = betti_numbers(&complex, config.alpha_lo, top_dim).at(Stage::Homology)?;
            let bars = crate::homology::barcode(&complex).at(Stage::Homology)?;
            (b.clone(), b.clone(), b, bars)
        }
    };
    timings.homology = t.elapsed().as_secs_f64();
    timings.total = start.elapsed().as_secs_f64();

    let report = InferenceReport {
        input_size: cloud.len(),
        duplicates_removed: cloud.duplicates_removed(),
        ambient_dim: cloud.ambient_dim(),
        intrinsic_dim: cloud.intrinsic_dim(),
        normals: d.normal_stats,
        lean_set_size: d.lean_set_size,
        filtered_lean_set_size: d.filtered_lean_set_size,
        reduced_lean_set_size: d.reduced_lean_set_size,
        sparse_size: d.sparse.len(),
        complex_size: complex.len(),
        delta: config.delta(),
        betti,
        betti_lo,
        betti_hi,
        uniformity: d.uniformity,
        timings,
        config: PipelineConfig {
            top_dim: Some(top_dim),
            ..config.clone()
        },
    };
    let artifacts = PipelineArtifacts {
        normals: d.normals,
        lean: d.lean,
        lnfs: d.lnfs,
        sparse: d.sparse,
        complex: Some(complex),
        barcode: Some(barcode),
    };
    Ok((report, artifacts))
}

/// Drops lean points whose pair is closer than `min_pair_distance`.
pub fn noise_filter(lean: &LeanSet, min_pair_distance: f64) -> crate::Result<LeanSet> {
    if !(min_pair_distance >= 0.0) {
        return Err(Error::OutOfRange {
            name: "min_pair_distance",
            value: min_pair_distance,
            range: "[0, inf)",
        });
    }
    Ok(lean.without_short_pairs(min_pair_distance))
}

/// `d(x, P) / (d(x, P) + d(x, L))`: 0 on samples, 1 on lean points.
pub fn h_scaled_diagnostic(
    x: &[f64],
    samples: &SpatialIndex,
    lean: &LeanIndex,
) -> crate::Result<f64> {
    let dp = samples.nearest(x, None)?.distance;
    let dl = lean.lnfs(x);
    if dp + dl == 0.0 {
        return Ok(0.0);
    }
    Ok(dp / (dp + dl))
}
