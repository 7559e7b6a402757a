use std::f64::consts::PI;

use hyperlat::lattice::{ball_volume, LatticeSpec};
use hyperlat::Lattice;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn skewed() -> Lattice {
    Lattice::new(2, &[vec![1.0, 0.37], vec![0.0, 1.9]]).unwrap()
}

// Σ_x f(x) = Σ_k f̂(2πk) for f(x) = exp(-|x|²/2s), f̂(ω) = (2πs)^{d/2} exp(-s|ω|²/2)
fn poisson_pairing(lattice: &Lattice, s: f64) -> (f64, f64) {
    let d = lattice.dim();
    let origin = vec![0.0; d];
    let direct: f64 = lattice.points_in_ball(&origin, 40.0).unwrap().iter().map(|x| (-norm2(x) / (2.0 * s)).exp()).sum();
    let dual = lattice.dual();
    let pref = (2.0 * PI * s).powf(d as f64 / 2.0);
    let summed: f64 = dual
        .points_in_ball(&origin, 40.0)
        .unwrap()
        .iter()
        .map(|k| pref * (-s * 4.0 * PI * PI * norm2(k) / 2.0).exp())
        .sum();
    (direct, summed)
}

#[test]
fn poisson_summation_on_gaussians() {
    for lattice in [Lattice::integer(1), Lattice::integer(2), Lattice::triangular(), skewed(), Lattice::integer(3)] {
        for s in [0.5, 1.0, 2.0] {
            let (a, b) = poisson_pairing(&lattice, s);
            assert!((a - b).abs() <= 1e-8 * a.max(1.0), "d={} s={s}: {a} vs {b}", lattice.dim());
        }
    }
}

#[test]
fn named_and_explicit_specs() {
    let z2: LatticeSpec = serde_json::from_str("\"Z2\"").unwrap();
    assert_eq!(z2.build().unwrap(), Lattice::integer(2));
    let tri: LatticeSpec = serde_json::from_str("\"triangular\"").unwrap();
    assert!((tri.build().unwrap().covolume() - 1.0).abs() < 1e-12);
    let diag: LatticeSpec = serde_json::from_str(r#"{"dim":2,"basis":[[2,0],[0,0.5]]}"#).unwrap();
    let diag = diag.build().unwrap();
    let dual = diag.dual();
    assert!((dual.basis()[(0, 0)] - 0.5).abs() < 1e-12 && (dual.basis()[(1, 1)] - 2.0).abs() < 1e-12);
    for bad in ["\"Z0\"", "\"Q2\"", r#"{"dim":2,"basis":[[1,2],[2,4]]}"#] {
        let spec: LatticeSpec = serde_json::from_str(bad).unwrap();
        assert!(spec.build().is_err(), "{bad} should be rejected");
    }
}

#[test]
fn gauss_residual_examples() {
    let r = Lattice::integer(2).gauss_residual(&[0.0, 0.0], 1.0).unwrap();
    assert_eq!(r.count, 5);
    assert!((r.residual - (5.0 - PI)).abs() < 1e-12);
    let r = Lattice::integer(3).gauss_residual(&[0.0; 3], 1.0).unwrap();
    assert_eq!(r.count, 7);
    assert!((r.residual - (7.0 - 4.0 * PI / 3.0)).abs() < 1e-12);
    assert!(Lattice::integer(2).gauss_residual(&[0.0, 0.0], 0.5).is_err());

    // cells of diameter c meeting B_100 lie in B_{100+c} and cover B_{100-c}
    let c = 2f64.sqrt();
    let n = Lattice::integer(2).count_in_ball(&[0.0, 0.0], 100.0).unwrap() as f64;
    assert!(n <= PI * (100.0 + c).powi(2) && n >= PI * (100.0 - c).powi(2));
    assert!((n - PI * 1e4).abs() <= 2.0 * 100.0 * PI * c);
}

#[test]
fn landau_exponent_in_three_dimensions() {
    let z3 = Lattice::integer(3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = |r: f64| {
        (0..100)
            .map(|_| {
                let c: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                z3.gauss_residual(&c, r).unwrap().residual.abs()
            })
            .fold(0.0, f64::max)
            / r.powf(1.5)
    };
    let (w15, w30) = (worst(15.0), worst(30.0));
    // the trivial cell-cover bound would allow ~4π·√3·R² / R^1.5 ≈ 120 at R = 30
    assert!(w30 < 1.0, "max |residual| / R^1.5 = {w30}");
    assert!(w30 < 1.5 * w15 + 0.05, "ratio grows: {w15} -> {w30}");
}

#[test]
fn annulus_examples() {
    let z2 = Lattice::integer(2);
    assert_eq!(z2.count_annulus(10.0, 0.0).unwrap(), 12);
    assert_eq!(z2.count_annulus(5.0, 0.0).unwrap(), 12);
    assert_eq!(z2.count_annulus(1.0, 0.0).unwrap(), 4);
    assert!(z2.count_annulus(1.0, 2.0).is_err());
    let mut worst: f64 = 0.0;
    for r in (100..=1000).step_by(50) {
        let r = r as f64;
        let n = z2.count_annulus(r, r.powf(-0.1)).unwrap() as f64;
        worst = worst.max(n / r);
    }
    // the cells of band points tile a band of width 2(τ + c), area ≈ 4πR(τ + c)
    assert!(worst <= 4.0 * PI * (100f64.powf(-0.1) + 2f64.sqrt()), "{worst}");
}

fn lattice_strategy() -> impl Strategy<Value = Lattice> {
    prop_oneof![
        Just(Lattice::integer(2)),
        Just(Lattice::triangular()),
        Just(skewed()),
        Just(Lattice::integer(3)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_are_invariant_under_lattice_translation(
        lattice in lattice_strategy(),
        shift in proptest::collection::vec(-20i64..20, 3),
        center in proptest::collection::vec(-1.0f64..1.0, 3),
        r in 0.0f64..8.0,
    ) {
        let d = lattice.dim();
        let center = &center[..d];
        let v = lattice.point(&shift[..d]);
        let moved: Vec<f64> = center.iter().zip(&v).map(|(a, b)| a + b).collect();
        // radii on a lattice-point sphere are fragile under rounding; stay off them
        let near = lattice.points_in_ball(center, r + 1e-9).unwrap().len() != lattice.points_in_ball(center, (r - 1e-9).max(0.0)).unwrap().len();
        prop_assume!(!near);
        prop_assert_eq!(lattice.count_in_ball(center, r).unwrap(), lattice.count_in_ball(&moved, r).unwrap());
    }

    #[test]
    fn counts_are_invariant_under_reflection(
        lattice in lattice_strategy(),
        center in proptest::collection::vec(-3.0f64..3.0, 3),
        r in 0.0f64..8.0,
    ) {
        let d = lattice.dim();
        let center = &center[..d];
        let flipped: Vec<f64> = center.iter().map(|v| -v).collect();
        prop_assert_eq!(lattice.count_in_ball(center, r).unwrap(), lattice.count_in_ball(&flipped, r).unwrap());
    }

    #[test]
    fn counts_grow_with_radius(lattice in lattice_strategy(), r1 in 0.0f64..6.0, dr in 0.0f64..3.0) {
        let origin = vec![0.0; lattice.dim()];
        prop_assert!(lattice.count_in_ball(&origin, r1).unwrap() <= lattice.count_in_ball(&origin, r1 + dr).unwrap());
    }

    #[test]
    fn counts_stay_within_the_cell_cover(lattice in lattice_strategy(), r in 1.0f64..30.0) {
        let d = lattice.dim();
        let c = lattice.cell_diameter();
        let n = lattice.count_in_ball(&vec![0.0; d], r).unwrap() as f64;
        prop_assert!(n <= ball_volume(d, r + c));
        prop_assert!(n >= ball_volume(d, (r - c).max(0.0)));
    }
}
