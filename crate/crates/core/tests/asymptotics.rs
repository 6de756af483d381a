use hyperwalk::asymptotics::*;
use hyperwalk::group::{Group, GroupSpec};
use hyperwalk::tree_exact::*;
use hyperwalk::walk::*;
use proptest::prelude::*;

fn free_two() -> (BranchSystem, f64) {
    let g = Group::new(GroupSpec::free(2)).unwrap();
    let mu = make_measure(&MeasureSpec::simple(&g), &g).unwrap();
    let sys = BranchSystem::build(&mu, &g).unwrap();
    let big_r = radius_r(&sys).unwrap().r;
    (sys, big_r)
}

fn binomial_series(n_max: usize) -> Vec<f64> {
    // SRW on Z: p_{2k} = C(2k, k)/4^k, odd terms zero
    let mut p = vec![0.0; n_max + 1];
    let mut c = 1.0;
    for k in 0..=n_max / 2 {
        if k > 0 {
            c *= (2 * k - 1) as f64 / (2 * k) as f64;
        }
        p[2 * k] = c;
    }
    p
}

#[test]
fn llt_exponent_on_free_two() {
    let (sys, _) = free_two();
    let c = series_coefficients(&sys, 2000, Precision::DoubleDouble).unwrap();
    let mut opts = LltOptions::new(200, 2000, Some(ParitySelect::Even));
    opts.plateau_range = Some((500, 2000));
    let rep = llt_fit(&c.scaled, Parity::Period2, &opts).unwrap();
    assert!((rep.fit.exponent + 1.5).abs() < 0.03, "{}", rep.fit.exponent);
    assert!(rep.plateau_variation < 0.03, "{}", rep.plateau_variation);
}

#[test]
fn llt_requires_parity_on_periodic_walks() {
    let p = binomial_series(100);
    let opts = LltOptions::new(10, 100, None);
    assert!(matches!(llt_fit(&p, Parity::Period2, &opts), Err(hyperwalk::Error::Precondition(_))));
}

#[test]
fn llt_distinguishes_lattice_exponents() {
    let p = binomial_series(2000);
    let opts = LltOptions::new(200, 2000, Some(ParitySelect::Even));
    let z = llt_fit(&p, Parity::Period2, &opts).unwrap();
    assert!((z.fit.exponent + 0.5).abs() < 0.03, "{}", z.fit.exponent);
    // Z² product walk: p_{2k} is the square of the one-dimensional value
    let p2: Vec<f64> = p.iter().map(|v| v * v).collect();
    let z2 = llt_fit(&p2, Parity::Period2, &opts).unwrap();
    assert!((z2.fit.exponent + 1.0).abs() < 0.05, "{}", z2.fit.exponent);
}

#[test]
fn cesaro_on_free_two_and_lattice_control() {
    let (sys, _) = free_two();
    let c = series_coefficients(&sys, 4000, Precision::DoubleDouble).unwrap();
    let rep = cesaro_check(&c.scaled, &[1000, 2000, 4000], 0.5).unwrap();
    assert!(rep.nondecreasing);
    let (a, b) = (rep.points[1].2, rep.points[2].2);
    assert!((b / a - 1.0).abs() < 0.05);
    assert!(!rep.mismatch);
    let z = cesaro_check(&binomial_series(4000), &[1000, 2000, 4000], 0.5).unwrap();
    assert!((z.growth_exponent - 1.5).abs() < 0.05);
    assert!(z.mismatch);
}

#[test]
fn renewal_on_free_two() {
    let (sys, big_r) = free_two();
    let c = series_coefficients(&sys, 2000, Precision::DoubleDouble).unwrap();
    let g_r = green_ee(&sys, big_r).unwrap();
    let zeros = vec![0.0; c.scaled.len()];
    let rep = renewal_first_return(&c.scaled, &zeros, big_r, Some(g_r), (500, 2000), 2).unwrap();
    assert!(rep.series.stopped_at.is_none());
    assert!((rep.target.unwrap() - 1.0 / 9.0).abs() < 1e-7);
    assert!(rep.max_deviation.unwrap() < 0.05, "{:?}", rep.max_deviation);
    assert!(rep.series.total <= 1.0 + 1e-9);
    assert!(rep.series.scaled.iter().all(|&f| f >= 0.0));
}

#[test]
fn renewal_base_cases() {
    let p = [1.0, 0.3, 0.25, 0.2];
    let rep = renewal_first_return(&p, &[0.0; 4], 1.0, None, (1, 3), 1).unwrap();
    let f = &rep.series.scaled;
    assert_eq!(f[1], 0.3);
    assert!((f[2] - (0.25 - 0.09)).abs() < 1e-16);
}

#[test]
fn eta_scaling_on_free_two() {
    let (sys, big_r) = free_two();
    let points: Vec<(f64, f64)> = (6..=14)
        .map(|j| {
            let r = big_r * (1.0 - 2f64.powi(-j));
            (r, eta_exact(&sys, r).unwrap())
        })
        .collect();
    let s = EtaSamples { big_r, points, amenable: false };
    let rep = eta_scaling_fit(&s).unwrap();
    // oracle: mpmath evaluation of η = G + rG' from the closed-form F(r)
    assert!((rep.plateau_ratio - 1.611_122_391_67).abs() < 1e-8, "{}", rep.plateau_ratio);
    assert!((rep.fit.exponent + 0.5).abs() < 0.03, "{}", rep.fit.exponent);
    let s = EtaSamples { amenable: true, ..s };
    assert!(eta_scaling_fit(&s).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn renewal_inverse_is_exact(
        tail in prop::collection::vec(1e-3f64..1.0, 200),
        theta in 0.05f64..0.5,
    ) {
        // Σ_{n≥1} p_n < 1 keeps 1/P analytic on the closed unit disk
        let mut p = vec![1.0];
        p.extend(tail.iter().enumerate().map(|(i, u)| u * theta.powi(i as i32 + 1)));
        let rep = renewal_first_return(&p, &vec![0.0; p.len()], 1.0, None, (1, 200), 1).unwrap();
        prop_assert!(rep.series.stopped_at.is_none());
        prop_assert!(rep.reconstruction_error < 1e-12);
        let rec = reconstruct(&rep.series.scaled, 3);
        prop_assert!((rec[3] - p[3]).abs() <= 1e-15);
    }
}

mod moments {
    use hyperwalk::asymptotics::*;
    use hyperwalk::green::{GreenOracle, TreeGreen};
    use hyperwalk::group::{Group, GroupSpec};
    use hyperwalk::tree_exact::*;
    use hyperwalk::walk::*;

    fn srw(spec: GroupSpec) -> (Group, FiniteMeasure) {
        let g = Group::new(spec).unwrap();
        let mu = make_measure(&MeasureSpec::simple(&g), &g).unwrap();
        (g, mu)
    }

    /// F_r(e,a) on SRW(free(2)) and its r-derivative from the quadratic.
    fn free_two_f(r: f64) -> (f64, f64) {
        let f = (1.0 - (1.0 - 0.75 * r * r).sqrt()) / (1.5 * r);
        (f, (0.25 + 0.75 * f * f) / (1.0 - 1.5 * r * f))
    }

    #[test]
    fn crude_ratio_two_ways() {
        let (g, mu) = srw(GroupSpec::free(2));
        let t = TreeGreen::new(&mu, &g).unwrap();
        let tree = crude_ratio(&MomentSource::Tree(t.system()), 1.0).unwrap();
        let c = series_coefficients(t.system(), 400, Precision::DoubleDouble).unwrap();
        let p = c.values();
        let series = crude_ratio(&MomentSource::Series { p: &p, rho_upper: 0.8661 }, 1.0).unwrap();
        assert!(tree.ratio.lo <= series.ratio.hi && series.ratio.lo <= tree.ratio.hi, "{tree:?} {series:?}");
        assert!(series.moments.eta.contains(3.75));
        // pairs inside the ball of radius 3 give a lower bound
        let direct = triple_sum_direct(&t, 1.0, 3).unwrap();
        assert!(direct > 0.5 * tree.moments.triple.lo && direct <= tree.moments.triple.hi);
        let zero = crude_ratio(&MomentSource::Tree(t.system()), 0.0).unwrap();
        assert!((zero.ratio.mid() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn triple_ratio_settles_near_the_radius() {
        let (g, mu) = srw(GroupSpec::free(2));
        let t = TreeGreen::new(&mu, &g).unwrap();
        let big_r = t.radius();
        let grid: Vec<f64> = (4..=14).map(|j| big_r * (1.0 - 2f64.powi(-j))).collect();
        let rep = triple_sum_ratio(&MomentSource::Tree(t.system()), &grid, 5).unwrap();
        assert!(rep.points.iter().all(|p| p.1 > 0.0));
        // oracle: mpmath evaluation of T/η³ from the closed-form F(r)
        assert!((rep.variation - 0.369_730_383_70).abs() < 1e-8, "{}", rep.variation);
        assert!((rep.points[10].1 - 0.015_559_297_119_6).abs() < 1e-11);
        assert!(rep.points.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn phi_matches_closed_form_and_is_bounded() {
        let (g, mu) = srw(GroupSpec::free(2));
        let t = TreeGreen::new(&mu, &g).unwrap();
        let r = 0.9 * t.radius();
        let (f, fd) = free_two_f(r);
        let dlog_g = (f + r * fd) / (1.0 - r * f);
        let xs = hyperwalk::green::sample_triples(&g, 8, 50, 3)
            .into_iter()
            .map(|s| s.0)
            .collect::<Vec<_>>();
        for x in &xs {
            let oracle = 1.0 + r * (dlog_g + x.len() as f64 * fd / f);
            let v = phi_r(&t, x, r, 1e-4).unwrap();
            assert!((v - oracle).abs() < 1e-6 * oracle, "{v} vs {oracle}");
        }
        let eta = eta_exact(t.system(), r).unwrap();
        let rep = phi_bound_check(&t, eta, &xs, r, 1e-4).unwrap();
        assert_eq!(rep.samples.len(), 50);
        assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);
    }

    #[test]
    fn nu_functionals_on_free_two() {
        let (g, mu) = srw(GroupSpec::free(2));
        let t = TreeGreen::new(&mu, &g).unwrap();
        let one = nu_functional(&t, &NuFunction::One, 1.0, 10).unwrap();
        assert!((one.value - 1.0).abs() < 1e-14);
        // the four first letters share the mass off e: (η − G²)/(4η)
        let a = g.element("a").unwrap();
        let v = nu_functional(&t, &NuFunction::Prefix(a.clone()), 1.0, 10).unwrap();
        let oracle = (3.75 - 2.25) / (4.0 * 3.75);
        assert!((v.value - oracle).abs() < 1e-5, "{}", v.value);
        assert!(v.bounds.unwrap().contains(oracle));
        let big_r = t.radius();
        let grid: Vec<f64> = (3..=7).map(|j| big_r * (1.0 - 2f64.powi(-j))).collect();
        let probe = nu_convergence_probe(&t, &NuFunction::MartinRatio(a), &grid, 9).unwrap();
        assert!(probe.differences_decreasing, "{:?}", probe.differences);
    }
}
