//! Randomized property suites for the kernel and descriptor layers: 1000
//! cases per property.

use proptest::prelude::*;

use kernelboost_core::boosting::{update_weights, SampleWeights};
use kernelboost_core::descriptors::{phog, raw_distance, Channel, DescriptorVector, DistanceKind};
use kernelboost_core::imagecore::GrayImage;
use kernelboost_core::kernels::{build_kernel_matrix, psd_repair, BaseKernel};

fn vectors_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=6, 3usize..=8).prop_flat_map(|(n, dim)| {
        proptest::collection::vec(
            proptest::collection::vec(0.0f64..1.0, dim..=dim),
            n..=n,
        )
    })
}

fn as_descriptors(vals: &[Vec<f64>]) -> Vec<DescriptorVector> {
    vals.iter()
        .map(|v| DescriptorVector {
            channel: Channel::TinyImage,
            values: v.clone(),
        })
        .collect()
}

fn kind_strategy() -> impl Strategy<Value = DistanceKind> {
    prop_oneof![Just(DistanceKind::L2), Just(DistanceKind::Chi2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn kernel_matrix_is_symmetric(
        vals in vectors_strategy(),
        kind in kind_strategy(),
        gamma in 0.1f64..10.0,
    ) {
        let vecs = as_descriptors(&vals);
        let bk = BaseKernel::new("k", Channel::TinyImage, kind, gamma).unwrap();
        let m = build_kernel_matrix(&vecs, &bk).unwrap();
        for i in 0..m.n() {
            for j in 0..i {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
    }

    #[test]
    fn kernel_diagonal_is_one_plus_jitter(
        vals in vectors_strategy(),
        kind in kind_strategy(),
        gamma in 0.1f64..10.0,
    ) {
        let vecs = as_descriptors(&vals);
        let bk = BaseKernel::new("k", Channel::TinyImage, kind, gamma).unwrap();
        let m = build_kernel_matrix(&vecs, &bk).unwrap();
        for i in 0..m.n() {
            prop_assert_eq!(m.get(i, i), 1.0 + m.jitter());
        }
    }

    #[test]
    fn psd_repair_is_idempotent(
        vals in vectors_strategy(),
        kind in kind_strategy(),
        gamma in 0.1f64..10.0,
    ) {
        let vecs = as_descriptors(&vals);
        let bk = BaseKernel::new("k", Channel::TinyImage, kind, gamma).unwrap();
        let m = build_kernel_matrix(&vecs, &bk).unwrap();
        // A repaired matrix passes the factorization as-is: no new jitter,
        // entries unchanged.
        let (again, jitter) = psd_repair(m.n(), m.entries()).unwrap();
        prop_assert_eq!(jitter, 0.0);
        prop_assert_eq!(again.as_slice(), m.entries());
    }

    #[test]
    fn chi2_identity_symmetry_nonnegativity(
        a in proptest::collection::vec(0.0f64..1.0, 1..16),
        b in proptest::collection::vec(0.0f64..1.0, 1..16),
    ) {
        let n = a.len().min(b.len());
        let (a, b) = (&a[..n], &b[..n]);
        prop_assert_eq!(raw_distance(a, a, DistanceKind::Chi2), 0.0);
        prop_assert_eq!(
            raw_distance(a, b, DistanceKind::Chi2),
            raw_distance(b, a, DistanceKind::Chi2)
        );
        prop_assert!(raw_distance(a, b, DistanceKind::Chi2) >= 0.0);
    }

    #[test]
    fn phog_length_formula(
        w in 16usize..48,
        h in 16usize..48,
        levels in 0usize..=3,
        bins in 2usize..=12,
        signed in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mut rng = kernelboost_core::rng::Lcg::new(seed);
        let pixels: Vec<f64> = (0..w * h).map(|_| rng.next_f64()).collect();
        let img = GrayImage::new(w, h, pixels).unwrap();
        let d = phog(&img, levels, bins, signed).unwrap();
        let cells: usize = (0..=levels).map(|l| 4usize.pow(l as u32)).sum();
        prop_assert_eq!(d.values.len(), bins * cells);
    }

    #[test]
    fn boosting_weights_sum_to_one_after_update(
        n in 1usize..50,
        picks in proptest::collection::vec(any::<proptest::sample::Index>(), 0..20),
        alpha in -5.0f64..5.0,
    ) {
        let weights = SampleWeights::uniform(n);
        let mut misclassified: Vec<usize> = picks.iter().map(|p| p.index(n)).collect();
        misclassified.sort();
        misclassified.dedup();
        let updated = update_weights(&weights, &misclassified, alpha).unwrap();
        prop_assert!((updated.sum() - 1.0).abs() < 1e-12);
    }
}
