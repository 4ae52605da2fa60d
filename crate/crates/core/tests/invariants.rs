//! Property tests over random inputs.

use leantopo::complex::{build_two_scale_complex, ComplexParams, FilteredCliqueComplex};
use leantopo::geometry::{build_index, distance, PointCloud};
use leantopo::homology::{boundary_matrix, persistent_image_rank};
use leantopo::lean::{LeanIndex, LeanParams, LeanSet};
use leantopo::oracle::{boundary_squared_is_zero, image_rank_oracle, rips_complex};
use leantopo::pipeline::noise_filter;
use leantopo::samplers::{add_normal_noise, sample_circle, SampleSize};
use leantopo::sparsify::{lean_sparsify, verify_uniformity};
use proptest::prelude::*;

fn cloud(dim: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(-5.0f64..5.0, dim * 4..dim * 60).prop_map(move |mut v| {
        v.truncate(v.len() / dim * dim);
        PointCloud::from_flat(v, dim, 1).unwrap()
    })
}

fn lean_from(cloud: &PointCloud, pairs: &[(usize, usize)]) -> LeanSet {
    let mut lean = LeanSet::empty(
        LeanParams::from_beta(std::f64::consts::PI / 5.0).unwrap(),
        cloud.ambient_dim(),
    );
    for &(p, q) in pairs {
        lean.push_pair(cloud, p, q);
    }
    lean
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lnfs_is_one_lipschitz(c in cloud(2), pairs in prop::collection::vec((0usize..4, 0usize..4), 1..6)) {
        let pairs: Vec<(usize, usize)> = pairs.into_iter().filter(|(a, b)| a < b).collect();
        prop_assume!(!pairs.is_empty());
        let index = LeanIndex::new(&lean_from(&c, &pairs)).unwrap();
        let l = index.lnfs_all(&c);
        for a in 0..c.len() {
            for b in 0..c.len() {
                prop_assert!(l[a] <= l[b] + distance(c.point(a), c.point(b)) + 1e-12);
            }
        }
    }

    #[test]
    fn noise_filter_is_monotone(c in cloud(2), t1 in 0.0f64..5.0, t2 in 0.0f64..5.0) {
        let n = c.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|p| (p + 1..n).map(move |q| (p, q))).take(200).collect();
        let lean = lean_from(&c, &pairs);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = noise_filter(&lean, lo).unwrap();
        let b = noise_filter(&lean, hi).unwrap();
        prop_assert!(b.len() <= a.len());
        prop_assert!(b.iter().all(|lp| lp.pair_distance >= hi));
    }

    #[test]
    fn sparsification_is_uniform(c in cloud(3), rho in 0.05f64..1.0, scale in 0.1f64..3.0) {
        let lnfs: Vec<f64> = c.points().map(|p| scale * (1.0 + p[0].abs())).collect();
        let sparse = lean_sparsify(&c, &lnfs, rho).unwrap();
        prop_assert!(verify_uniformity(&sparse, &c, &lnfs).unwrap().passed());
        for &q in &sparse.retained {
            prop_assert_eq!(sparse.retainer[q], q);
        }
    }

    #[test]
    fn constant_lnfs_gives_rips(c in cloud(2), alpha in 0.05f64..0.6, k in 0.2f64..2.0) {
        let adaptive = build_two_scale_complex(&c, &vec![k; c.len()], ComplexParams::single_level(alpha, 2)).unwrap();
        let rips = rips_complex(&c, 2.0 * alpha * k, 2).unwrap();
        let a: Vec<&[u32]> = { let mut v: Vec<_> = adaptive.at_level(alpha).map(|s| s.vertices.as_slice()).collect(); v.sort(); v };
        let b: Vec<&[u32]> = { let mut v: Vec<_> = rips.simplices().iter().map(|s| s.vertices.as_slice()).collect(); v.sort(); v };
        prop_assert_eq!(a, b);
    }

    #[test]
    fn image_rank_matches_oracle(c in cloud(2), lo in 0.5f64..2.0, extra in 0.0f64..2.0) {
        let c = c.subset(&(0..c.len().min(14)).collect::<Vec<_>>());
        let full = rips_complex(&c, lo + extra, 3).unwrap();
        let list: Vec<(Vec<u32>, f64)> = full.simplices().iter().map(|s| (s.vertices.clone(), s.filtration)).collect();
        let k = FilteredCliqueComplex::from_simplices(list, lo, lo + extra).unwrap();
        prop_assert!(boundary_squared_is_zero(&boundary_matrix(&k).unwrap()));
        let ranks = persistent_image_rank(&k, 2).unwrap().image_ranks;
        for (d, r) in ranks.iter().enumerate() {
            prop_assert_eq!(*r, image_rank_oracle(&k, lo, lo + extra, d));
        }
    }
}

#[test]
fn noise_is_seeded() {
    let s = sample_circle(1.0, SampleSize::Count(200)).unwrap();
    let a = add_normal_noise(&s.cloud, &s.noise_directions, 0.01, 5).unwrap();
    let b = add_normal_noise(&s.cloud, &s.noise_directions, 0.01, 5).unwrap();
    let c = add_normal_noise(&s.cloud, &s.noise_directions, 0.01, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(
        add_normal_noise(&s.cloud, &s.noise_directions, 0.0, 5).unwrap(),
        s.cloud
    );
    // Displacement is along the normal and bounded by the scale.
    let bound = 0.01 * 2.0;
    for (p, q) in s.cloud.points().zip(a.points()) {
        assert!(distance(p, q) <= bound + 1e-12);
    }
    assert!(build_index(&a).is_ok());
}
