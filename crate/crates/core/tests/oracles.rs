use haarmoments::exact::rat;
use haarmoments::freegroup::{
    ball_norm_estimate, ball_spectrum, rho_k_enumerated, rho_k_weights, MatrixPencil, ReducedWord,
};
use haarmoments::haarmodel::{build_instance, restricted_norm, restricted_norm_power, ModelConfig};
use haarmoments::linalg::{c, ginibre, CMatrix, PowerIterationOptions};
use haarmoments::linearization::norm_from_shifts;
use haarmoments::symcore::CycleType;
use haarmoments::weingarten::wg_exact;
use proptest::prelude::*;

#[test]
fn wg_k3_closed_forms() {
    for n in 3..=9i64 {
        let t = wg_exact(3, n as usize).unwrap();
        let den = n * (n * n - 1) * (n * n - 4);
        assert_eq!(
            *t.value_of_type(&CycleType(vec![1, 1, 1])),
            rat(n * n - 2, den)
        );
        assert_eq!(*t.value_of_type(&CycleType(vec![2, 1])), rat(-n, den));
        assert_eq!(*t.value_of_type(&CycleType(vec![3])), rat(2, den));
    }
}

#[test]
fn ball_estimates_grow_with_radius() {
    let mut rng = haarmoments::rng::stream(8);
    let p = MatrixPencil::random_self_adjoint(2, 2, &mut rng);
    let mut last = 0.0;
    for r in [1, 2, 4, 8, 16] {
        let v = ball_norm_estimate(&p, r);
        assert!(v >= last - 1e-10, "radius {r}: {v} < {last}");
        last = v;
    }
    // Dense spectrum of the small ball agrees with the recursive estimate.
    let s = ball_spectrum(&p, 3).unwrap();
    assert!((s.norm() - ball_norm_estimate(&p, 3)).abs() < 1e-8);
}

#[test]
fn ball_estimate_on_integers_matches_chebyshev() {
    // The radius-R ball of Z is a path on 2R+1 vertices: norm 2cos(π/(2R+2)).
    let p = MatrixPencil::uniform_scalar(1, 0.0, 1.0).unwrap();
    for r in [1, 3, 10, 40] {
        let want = 2.0 * (std::f64::consts::PI / (2 * r + 2) as f64).cos();
        assert!((ball_norm_estimate(&p, r) - want).abs() < 1e-10);
    }
}

#[test]
fn restricted_norm_dense_and_power_agree() {
    let p = MatrixPencil::uniform_scalar(2, 0.0, 1.0).unwrap();
    let cfg = ModelConfig::new(12, 0, 1, p, 4).unwrap();
    let inst = build_instance(&cfg).unwrap();
    let dense = restricted_norm(&inst).unwrap();
    let power = restricted_norm_power(&inst, &PowerIterationOptions::default()).unwrap();
    assert!((dense - power).abs() < 1e-6 * dense, "{dense} vs {power}");
}

fn weights_from(seed: u64, d: usize, r: usize) -> Vec<CMatrix> {
    let mut rng = haarmoments::rng::stream(seed);
    (0..2 * d)
        .map(|_| ginibre(r, r, &mut rng) * c(0.5, 0.0))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn word_group_laws(d in 1usize..4, a in proptest::collection::vec(0usize..8, 0..7),
                       b in proptest::collection::vec(0usize..8, 0..7),
                       e in proptest::collection::vec(0usize..8, 0..7)) {
        let w = |v: &Vec<usize>| {
            let letters: Vec<usize> = v.iter().map(|x| x % (2 * d)).collect();
            ReducedWord::reduce(d, &letters).unwrap()
        };
        let (x, y, z) = (w(&a), w(&b), w(&e));
        prop_assert_eq!(x.mul(&y).mul(&z), x.mul(&y.mul(&z)));
        prop_assert!(x.mul(&x.inverse()).is_empty());
        prop_assert_eq!(x.mul(&y).inverse(), y.inverse().mul(&x.inverse()));
    }

    #[test]
    fn rho_k_dp_matches_enumeration(seed in 0u64..1000, d in 1usize..3, r in 1usize..3, k in 1usize..6) {
        let w = weights_from(seed, d, r);
        let dp = rho_k_weights(&w, k).unwrap();
        let en = rho_k_enumerated(&w, k).unwrap();
        prop_assert!((dp - en).abs() <= 1e-10 * (1.0 + en), "{} vs {}", dp, en);
    }

    #[test]
    fn shifts_recover_spectral_norms(eigs in proptest::collection::vec(-5.0f64..5.0, 1..8), x0 in 6.0f64..40.0) {
        let norm_at = |x: f64| eigs.iter().map(|l| (x + l).abs()).fold(0.0, f64::max);
        let want = eigs.iter().map(|l| l.abs()).fold(0.0, f64::max);
        let got = norm_from_shifts(&[(x0, norm_at(x0)), (-x0, norm_at(-x0))]).unwrap();
        prop_assert!((got - want).abs() < 1e-9 * (1.0 + x0));
    }
}
