//! Quick built-in checks against the reference implementations in
//! [`crate::oracle`], run by `leantopo selftest`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complex::{build_two_scale_complex, ComplexParams, FilteredCliqueComplex};
use crate::geometry::{PointCloud, QueryMode, SpatialIndex};
use crate::homology::{betti_numbers, boundary_matrix, persistent_image_rank};
use crate::oracle::{
    boundary_squared_is_zero, euler_characteristic, image_rank_oracle, rips_complex,
};
use crate::pipeline::{lean_topo, theory_rho, PipelineConfig, THEORY_BETA};
use crate::samplers::{sample_circle, SampleSize};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointCloud {
    let coords = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    PointCloud::from_flat(coords, dim, 1).expect("random points are distinct")
}

fn index_modes(rng: &mut ChaCha8Rng) -> Check {
    let cloud = random_cloud(rng, 2000, 3);
    let fast = SpatialIndex::with_mode(cloud.coords().to_vec(), 3, QueryMode::Accelerated);
    let slow = SpatialIndex::with_mode(cloud.coords().to_vec(), 3, QueryMode::BruteForce);
    let mut differing = 0;
    for _ in 0..200 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.2..1.2)).collect();
        let r = rng.gen_range(0.0..0.3);
        if fast.k_nearest(&x, 8, None).ok() != slow.k_nearest(&x, 8, None).ok()
            || fast.ball_is_empty(&x, r, &[]) != slow.ball_is_empty(&x, r, &[])
        {
            differing += 1;
        }
    }
    check(
        "index modes agree",
        differing == 0,
        format!("{differing} of 200 queries differ"),
    )
}

fn persistence(rng: &mut ChaCha8Rng) -> Check {
    let mut bad = 0;
    for _ in 0..20 {
        let n = rng.gen_range(4..=10);
        let cloud = random_cloud(rng, n, 2);
        let hi = rng.gen_range(0.5..1.5);
        let lo = hi * rng.gen_range(0.3..1.0);
        let rips = rips_complex(&cloud, hi, 3).expect("small complex");
        let list = rips
            .simplices()
            .iter()
            .map(|s| (s.vertices.clone(), s.filtration))
            .collect();
        let k = FilteredCliqueComplex::from_simplices(list, lo, hi).expect("closed under faces");
        let ranks = persistent_image_rank(&k, 2)
            .expect("exact complex")
            .image_ranks;
        let oracle_ok = ranks
            .iter()
            .enumerate()
            .all(|(d, &r)| r == image_rank_oracle(&k, lo, hi, d));
        let betti = betti_numbers(&k, hi, 3).expect("exact complex");
        let chi: i64 = betti
            .iter()
            .enumerate()
            .map(|(d, &b)| if d % 2 == 0 { b as i64 } else { -(b as i64) })
            .sum();
        let dd_ok = boundary_squared_is_zero(&boundary_matrix(&k).expect("exact complex"));
        if !(oracle_ok && dd_ok && chi == euler_characteristic(&k, hi)) {
            bad += 1;
        }
    }
    check(
        "persistence matches oracle",
        bad == 0,
        format!("{bad} of 20 complexes disagree"),
    )
}

fn rips_degeneration(rng: &mut ChaCha8Rng) -> Check {
    let mut bad = 0;
    for _ in 0..10 {
        let cloud = random_cloud(rng, 25, 2);
        let c = rng.gen_range(0.2..1.0);
        let alpha = rng.gen_range(0.1..0.4) / c;
        let adaptive = build_two_scale_complex(
            &cloud,
            &vec![c; cloud.len()],
            ComplexParams::single_level(alpha, 3),
        )
        .expect("small complex");
        let rips = rips_complex(&cloud, 2.0 * alpha * c, 3).expect("small complex");
        let a: BTreeSet<&[u32]> = adaptive
            .at_level(alpha)
            .map(|s| s.vertices.as_slice())
            .collect();
        let b: BTreeSet<&[u32]> = rips
            .simplices()
            .iter()
            .map(|s| s.vertices.as_slice())
            .collect();
        if a != b {
            bad += 1;
        }
    }
    check(
        "constant lnfs gives Rips",
        bad == 0,
        format!("{bad} of 10 clouds differ"),
    )
}

fn constants() -> Check {
    let rho = theory_rho(THEORY_BETA);
    let config = PipelineConfig::theory();
    let ok = (rho - 0.0090795).abs() < 1e-7
        && config.alpha_lo == 2.0 * rho
        && config.alpha_hi == 12.0 * rho
        && (config.delta() - 1.2 * rho).abs() < 1e-15;
    check("theory constants", ok, format!("rho {rho:.7}"))
}

fn circle() -> Check {
    let outcome = sample_circle(1.0, SampleSize::Count(1200))
        .map_err(|e| e.to_string())
        .and_then(|s| lean_topo(&s.cloud, &PipelineConfig::theory()).map_err(|e| e.to_string()));
    match outcome {
        Ok(r) => check(
            "circle inference",
            r.betti == [1, 1],
            format!("betti {:?}", r.betti),
        ),
        Err(e) => check("circle inference", false, e),
    }
}

/// Runs every check with a fixed seed.
pub fn run() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    vec![
        constants(),
        index_modes(&mut rng),
        persistence(&mut rng),
        rips_degeneration(&mut rng),
        circle(),
    ]
}
