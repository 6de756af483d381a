use hyperwalk::group::{Group, GroupSpec};
use hyperwalk::walk::*;
use proptest::prelude::*;

fn srw(spec: GroupSpec) -> (Group, FiniteMeasure) {
    let g = Group::new(spec).unwrap();
    let mu = make_measure(&MeasureSpec::simple(&g), &g).unwrap();
    (g, mu)
}

fn binomial_return(n: u64) -> f64 {
    // C(2n, n) / 4^n as a running product
    (1..=n).fold(1.0, |acc, k| acc * (n + k) as f64 / (4.0 * k as f64))
}

/// Brute-force p_n(e,e) by enumerating all |support|^n step sequences.
fn enumerate_returns(g: &Group, mu: &FiniteMeasure, n: u32) -> f64 {
    let k = mu.atoms().len();
    let mut total = 0.0;
    for code in 0..k.pow(n) {
        let mut c = code;
        let mut x = g.identity();
        let mut w = 1.0;
        for _ in 0..n {
            let (s, p) = &mu.atoms()[c % k];
            c /= k;
            x = g.mul(&x, s).unwrap();
            w *= p;
        }
        if x.is_identity() {
            total += w;
        }
    }
    total
}

#[test]
fn first_step_from_delta() {
    let (g, mu) = srw(GroupSpec::free(2));
    let d = convolve(&SparseDistribution::delta(&g), &mu, &g, 0.0, DEFAULT_SUPPORT_CAP).unwrap();
    assert_eq!(d.len(), 4);
    assert!(d.iter().all(|(_, p)| *p == 0.25));
    assert_eq!(d.pruned_mass(), 0.0);
}

#[test]
fn exact_convolution_conserves_mass() {
    let (g, mu) = srw(GroupSpec::free(2));
    let powers = convolution_powers(&mu, &g, 8, 0.0, DEFAULT_SUPPORT_CAP).unwrap();
    for d in &powers {
        assert!((d.total_mass() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn pruned_mass_bounds_the_error() {
    let (g, mu) = srw(GroupSpec::free(2));
    let exact = return_sequence(&mu, &g, 10, 0.0).unwrap();
    let pruned = return_sequence(&mu, &g, 10, 1e-5).unwrap();
    let powers = convolution_powers(&mu, &g, 10, 1e-5, DEFAULT_SUPPORT_CAP).unwrap();
    for w in powers.windows(2) {
        assert!(w[1].pruned_mass() >= w[0].pruned_mass());
        assert!((w[1].total_mass() + w[1].pruned_mass() - 1.0).abs() < 1e-9);
    }
    for n in 0..=10 {
        assert!(pruned.values[n] <= exact.values[n] + 1e-15);
        assert!(pruned.values[n] + pruned.errors[n] >= exact.values[n] - 1e-15);
    }
}

#[test]
fn lattice_returns_match_binomial() {
    let (g, mu) = srw(GroupSpec::lattice(1));
    let s = return_sequence(&mu, &g, 40, 0.0).unwrap();
    for n in 0..=20u64 {
        assert!((s.values[2 * n as usize] - binomial_return(n)).abs() < 1e-14);
    }
    assert!((s.values[4] - 6.0 / 16.0).abs() < 1e-15);
    assert!(s.values.iter().skip(1).step_by(2).all(|&v| v == 0.0));
}

#[test]
fn free_returns_match_path_enumeration() {
    let (g, mu) = srw(GroupSpec::free(2));
    let s = return_sequence(&mu, &g, 8, 0.0).unwrap();
    assert!((s.values[2] - 0.25).abs() < 1e-15);
    for n in [2u32, 4, 6] {
        assert!((s.values[n as usize] - enumerate_returns(&g, &mu, n)).abs() < 1e-14);
    }
    assert!((s.values[4] - 7.0 / 64.0).abs() < 1e-15);
    assert!(s.values.iter().skip(1).step_by(2).all(|&v| v == 0.0));
}

#[test]
fn aperiodic_odd_returns_match_enumeration() {
    let g = Group::new(GroupSpec::free(2)).unwrap();
    let mu = make_measure(&MeasureSpec::lazy(&g, 0.25), &g).unwrap();
    let s = return_sequence(&mu, &g, 5, 0.0).unwrap();
    for n in 1..=5u32 {
        assert!((s.values[n as usize] - enumerate_returns(&g, &mu, n)).abs() < 1e-14);
    }
}

#[test]
fn non_symmetric_returns_match_enumeration() {
    let g = Group::new(GroupSpec::free(2)).unwrap();
    let mu = make_measure(&MeasureSpec::biased_free(0.1), &g).unwrap();
    let s = return_sequence(&mu, &g, 6, 0.0).unwrap();
    for n in [2u32, 4, 6] {
        assert!((s.values[n as usize] - enumerate_returns(&g, &mu, n)).abs() < 1e-14);
    }
}

#[test]
fn spectral_radius_of_line_and_tree() {
    let (g, mu) = srw(GroupSpec::lattice(1));
    let s = return_sequence(&mu, &g, 60, 0.0).unwrap();
    let (rho, _) = spectral_radius_estimate(&s).unwrap();
    assert!((rho - 1.0).abs() < 1e-3, "{rho}");

    let (g, mu) = srw(GroupSpec::free(2));
    let s = return_sequence(&mu, &g, 24, 0.0).unwrap();
    let (rho, diag) = spectral_radius_estimate(&s).unwrap();
    assert!((rho - 3f64.sqrt() / 2.0).abs() < 1e-3, "{rho} {diag:?}");
}

#[test]
fn spectral_radius_needs_data() {
    let (g, mu) = srw(GroupSpec::free(2));
    let s = return_sequence(&mu, &g, 10, 0.0).unwrap();
    assert!(spectral_radius_estimate(&s).is_err());
}

#[test]
fn symmetric_distribution_is_inversion_invariant() {
    let (g, mu) = srw(GroupSpec::free_product(&[2, 3]));
    let d = convolution_powers(&mu, &g, 7, 0.0, DEFAULT_SUPPORT_CAP).unwrap();
    for (x, p) in d[7].iter() {
        // equal up to summation order
        assert!((*p - d[7].get(&g.inv(x))).abs() <= 1e-12 * p);
    }
}

#[test]
fn sample_path_is_deterministic() {
    let (g, mu) = srw(GroupSpec::free(2));
    let a = sample_path(&mu, &g, 50, 42);
    let b = sample_path(&mu, &g, 50, 42);
    assert_eq!(a, b);
    assert!(a[0].is_identity());
    let one = sample_path(&mu, &g, 1, 9);
    assert!(mu.weight(&one[1]) > 0.0);
}

#[test]
fn step_histogram_matches_measure() {
    let g = Group::new(GroupSpec::free(2)).unwrap();
    let mu = make_measure(&MeasureSpec::biased_free(0.1), &g).unwrap();
    let n = 100_000;
    let ends = sample_endpoints(&mu, &g, 1, n, 3);
    for (s, p) in mu.atoms() {
        let count = ends.iter().filter(|x| *x == s).count() as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((count - n as f64 * p).abs() < 3.0 * sigma, "{count} vs {}", n as f64 * p);
    }
}

#[test]
fn escape_rate_on_line_is_zero_ish() {
    let (g, mu) = srw(GroupSpec::lattice(1));
    let est = escape_rate(&mu, &g, 400, 500, 11).unwrap();
    assert!(est.mean.abs() < 0.06, "{est:?}");
}

#[test]
fn cache_round_trip() {
    let (g, mu) = srw(GroupSpec::free(2));
    let dir = tempfile::tempdir().unwrap();
    let cache = DistributionCache::new(dir.path());
    let d = convolution_powers(&mu, &g, 5, 1e-4, DEFAULT_SUPPORT_CAP).unwrap().pop().unwrap();
    cache.store(&g, mu.hash(), 1e-4, &d).unwrap();
    let back = cache.load(&g, mu.hash(), 5, 1e-4).unwrap().unwrap();
    assert_eq!(back.sorted(), d.sorted());
    assert_eq!(back.pruned_mass(), d.pruned_mass());
    assert!(cache.load(&g, mu.hash(), 6, 1e-4).unwrap().is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_is_idempotent(w in proptest::collection::vec(0u8..4, 0..=12)) {
        let g = Group::new(GroupSpec::free(2)).unwrap();
        let x = g.normalize(&w).unwrap();
        prop_assert_eq!(g.normalize(x.letters()).unwrap(), x);
    }

    #[test]
    fn group_axioms_on_samples(
        a in proptest::collection::vec(0u8..5, 0..=8),
        b in proptest::collection::vec(0u8..5, 0..=8),
        c in proptest::collection::vec(0u8..5, 0..=8),
    ) {
        let g = Group::new(GroupSpec::free_product(&[2, 3, 4])).unwrap();
        let (x, y, z) = (g.normalize(&a).unwrap(), g.normalize(&b).unwrap(), g.normalize(&c).unwrap());
        let xy_z = g.mul(&g.mul(&x, &y).unwrap(), &z).unwrap();
        let x_yz = g.mul(&x, &g.mul(&y, &z).unwrap()).unwrap();
        prop_assert_eq!(xy_z, x_yz);
        prop_assert_eq!(g.inv(&g.inv(&x)), x.clone());
        prop_assert!(g.mul(&g.inv(&x), &x).unwrap().is_identity());
        prop_assert!(g.mul(&x, &y).unwrap().len() <= x.len() + y.len());
    }

    #[test]
    fn surface_group_axioms(
        a in proptest::collection::vec(0u8..8, 0..=6),
        b in proptest::collection::vec(0u8..8, 0..=6),
    ) {
        let g = Group::new(GroupSpec::surface(2)).unwrap();
        let (x, y) = (g.normalize(&a).unwrap(), g.normalize(&b).unwrap());
        prop_assert_eq!(g.normalize(x.letters()).unwrap(), x.clone());
        prop_assert!(g.mul(&g.inv(&x), &x).unwrap().is_identity());
        prop_assert!(g.mul(&x, &y).unwrap().len() <= x.len() + y.len());
    }

    #[test]
    fn mass_conservation_under_pruning(eps_exp in 3i32..9) {
        let g = Group::new(GroupSpec::free(2)).unwrap();
        let mu = make_measure(&MeasureSpec::biased_free(0.1), &g).unwrap();
        let d = convolution_powers(&mu, &g, 7, 10f64.powi(-eps_exp), DEFAULT_SUPPORT_CAP).unwrap();
        for x in &d {
            prop_assert!((x.total_mass() + x.pruned_mass() - 1.0).abs() < 1e-12);
        }
    }
}

mod measure {
    use hyperwalk::group::{Group, GroupSpec};
    use hyperwalk::walk::*;

    #[test]
    fn srw_flags() {
        let g = Group::new(GroupSpec::free(2)).unwrap();
        let mu = make_measure(&MeasureSpec::simple(&g), &g).unwrap();
        assert!(mu.is_symmetric() && mu.is_admissible());
        assert_eq!(mu.parity(), Parity::Period2);
        let lazy = make_measure(&MeasureSpec::lazy(&g, 0.5), &g).unwrap();
        assert_eq!(lazy.parity(), Parity::Aperiodic);
    }

    #[test]
    fn biased_measure_is_admissible_not_symmetric() {
        let g = Group::new(GroupSpec::free(2)).unwrap();
        let mu = make_measure(&MeasureSpec::biased_free(0.05), &g).unwrap();
        assert!(mu.is_admissible());
        assert!(!mu.is_symmetric());
    }

    #[test]
    fn odd_factor_breaks_period_two() {
        let g = Group::new(GroupSpec::free_product(&[3, 3])).unwrap();
        let mu = make_measure(&MeasureSpec::simple(&g), &g).unwrap();
        assert_eq!(mu.parity(), Parity::Aperiodic);
    }

    #[test]
    fn non_generating_support() {
        let g = Group::new(GroupSpec::free(2)).unwrap();
        let mu = make_measure(&MeasureSpec::new(vec![("a".into(), 0.5), ("b".into(), 0.5)]), &g).unwrap();
        assert!(!mu.is_admissible());
    }

    #[test]
    fn bad_weights() {
        let g = Group::new(GroupSpec::free(2)).unwrap();
        assert!(make_measure(&MeasureSpec::new(vec![]), &g).is_err());
        assert!(make_measure(&MeasureSpec::new(vec![("a".into(), -1.0)]), &g).is_err());
        let mut spec = MeasureSpec::new(vec![("a".into(), 0.3), ("A".into(), 0.3)]);
        let mu = make_measure(&spec, &g).unwrap();
        assert!((mu.weight(&g.element("a").unwrap()) - 0.5).abs() < 1e-15);
        spec.strict = true;
        assert!(make_measure(&spec, &g).is_err());
    }
}
