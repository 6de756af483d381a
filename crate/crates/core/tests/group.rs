use hyperwalk::group::*;
use hyperwalk::Error;

fn f2() -> Group {
    Group::new(GroupSpec::free(2)).unwrap()
}

#[test]
fn free_reduction() {
    let g = f2();
    let x = g.element("aAb").unwrap();
    assert_eq!(g.format(&x), "b");
    assert_eq!(g.format(&g.element("a^-1").unwrap()), "A");
}

#[test]
fn free_mul_and_inverse() {
    let g = f2();
    let x = g.element("ab").unwrap();
    let y = g.element("Ba").unwrap();
    assert_eq!(g.format(&g.mul(&x, &y).unwrap()), "aa");
    assert_eq!(g.format(&g.inv(&x)), "BA");
    assert!(g.mul(&g.inv(&x), &x).unwrap().is_identity());
}

#[test]
fn lattice_metric() {
    let g = Group::new(GroupSpec::lattice(2)).unwrap();
    let x = g.element("a").unwrap();
    let y = g.element("b").unwrap();
    assert_eq!(g.mul(&x, &y).unwrap().len(), 2);
    let z = g.element("bAbaa").unwrap();
    assert_eq!(g.format(&z), "abb");
    assert_eq!(g.coords(&z).unwrap(), vec![1, 2]);
}

#[test]
fn sphere_counts() {
    let g = f2();
    assert_eq!(g.sphere(1).unwrap().len(), 4);
    assert_eq!(g.sphere(5).unwrap().len(), 324);
    let z2 = Group::new(GroupSpec::lattice(2)).unwrap();
    // brute force over the box
    for n in 0..6i64 {
        let mut count = 0;
        for x in -n..=n {
            for y in -n..=n {
                if x.abs() + y.abs() == n {
                    count += 1;
                }
            }
        }
        assert_eq!(z2.sphere(n as usize).unwrap().len(), count);
    }
}

#[test]
fn free_product_normal_form() {
    let g = Group::new(GroupSpec::free_product(&[2, 3, 4])).unwrap();
    // a has order 2, b order 3, c order 4
    assert!(g.element("aa").unwrap().is_identity());
    assert_eq!(g.format(&g.element("bb").unwrap()), "B");
    assert_eq!(g.format(&g.element("CCC").unwrap()), "c");
    assert_eq!(g.format(&g.element("cc").unwrap()), "cc");
    assert_eq!(g.format(&g.element("CC").unwrap()), "cc");
    assert_eq!(g.sphere(1).unwrap().len(), 5);
}

#[test]
fn mixed_groups_rejected() {
    let g = f2();
    let h = Group::new(GroupSpec::free(3)).unwrap();
    let x = g.element("a").unwrap();
    let y = h.element("a").unwrap();
    assert!(matches!(g.mul(&x, &y), Err(Error::Incompatible)));
}

#[test]
fn unknown_letter() {
    let g = f2();
    assert!(matches!(g.element("az"), Err(Error::Alphabet(_))));
}

#[test]
fn surface_relator_is_trivial() {
    let g = Group::new(GroupSpec::surface(2)).unwrap();
    assert!(g.element("abABcdCD").unwrap().is_identity());
    assert!(g.element("bABcdCDa").unwrap().is_identity());
    assert_eq!(g.element("abABc").unwrap().len(), 3);
}

#[test]
fn syllables_of_free_product() {
    let g = Group::new(GroupSpec::free_product(&[2, 5])).unwrap();
    let x = g.element("aBBa").unwrap();
    assert_eq!(g.syllables(&x), vec![(0, 1), (1, 3), (0, 1)]);
}

proptest::proptest! {
    #[test]
    fn letter_steps_match_normalization(
        word in proptest::collection::vec(0u8..6, 0..40),
        extra in 0u8..6,
    ) {
        for spec in [GroupSpec::lattice(3), GroupSpec::free(3), GroupSpec::free_product(&[2, 3, 4])] {
            let g = Group::new(spec).unwrap();
            let n = g.alphabet().len() as Letter;
            let letters: Vec<Letter> = word.iter().map(|&l| l % n).collect();
            let x = g.normalize(&letters).unwrap();
            let mut longer = x.letters().to_vec();
            longer.push(extra % n);
            proptest::prop_assert_eq!(g.mul_letter(&x, extra % n), g.normalize(&longer).unwrap());
        }
    }
}

mod geometry {
    use hyperwalk::group::*;

    #[test]
    fn tree_points_have_zero_error() {
        let g = Group::new(GroupSpec::free(2)).unwrap();
        let pts: Vec<_> = ["abA", "bb", "aBa", "Ab"].iter().map(|w| g.element(w).unwrap()).collect();
        let r = four_point_delta(&g, &pts).unwrap();
        assert_eq!(r.delta, 0.0);
        assert!(r.additive_error.abs() < 1e-12);
    }

    #[test]
    fn three_points_embed() {
        let g = Group::new(GroupSpec::lattice(2)).unwrap();
        let pts: Vec<_> = ["", "aaabb", "BBBa"].iter().map(|w| g.element(w).unwrap()).collect();
        let r = four_point_delta(&g, &pts).unwrap();
        assert!(r.additive_error.abs() < 1e-12);
    }

    #[test]
    fn gromov_product_on_tree() {
        let g = Group::new(GroupSpec::free(2)).unwrap();
        let e = g.identity();
        let x = g.element("aab").unwrap();
        let y = g.element("aaB").unwrap();
        assert_eq!(gromov_product(&g, &x, &y, &e), 2.0);
    }

    #[test]
    fn free_group_extension_constant_is_small() {
        let g = Group::new(GroupSpec::free(2)).unwrap();
        let c = extension_constant(&g, 12, 200, 7, 3).unwrap();
        assert!(c <= 1);
    }
}

mod dehn {
    use hyperwalk::group::{Group, GroupSpec};

    #[test]
    fn piece_bound_rejects_bad_presentation() {
        // relators sharing long pieces
        let spec = GroupSpec::DehnPresentation {
            generators: vec!["a".into(), "b".into()],
            relators: vec!["aaab".into(), "aaaB".into()],
        };
        assert!(Group::new(spec).is_err());
    }

    #[test]
    fn non_cyclically_reduced_rejected() {
        let spec = GroupSpec::DehnPresentation {
            generators: vec!["a".into(), "b".into()],
            relators: vec!["abA".into()],
        };
        assert!(Group::new(spec).is_err());
    }

    #[test]
    fn genus_two_word_problem() {
        let g = Group::new(GroupSpec::surface(2)).unwrap();
        let rel = g.parse_word("abABcdCD").unwrap();
        assert!(g.words_equal(&rel, &[]));
        // half-relator swap gives an equal word of the same length
        let u = g.parse_word("abAB").unwrap();
        let v = g.parse_word("dcDC").unwrap();
        assert!(g.words_equal(&u, &v));
        assert_eq!(g.normalize(&u).unwrap(), g.normalize(&v).unwrap());
    }

    #[test]
    fn genus_two_geodesic_lengths_small_radius() {
        let g = Group::new(GroupSpec::surface(2)).unwrap();
        let report = g.validate_dehn(3).unwrap();
        assert_eq!(report.bfs_sphere_sizes[..3], [1, 8, 56]);
        assert!(report.pass, "{report:?}");
    }
}

mod automaton {
    use hyperwalk::group::*;

    #[test]
    fn free_two_automaton_shape() {
        let g = Group::new(GroupSpec::free(2)).unwrap();
        let aut = GeodesicAutomaton::build(&g, &BuildParams::default()).unwrap();
        assert_eq!(aut.num_states(), 5);
        for s in 1..5 {
            assert_eq!(aut.out_edges(s).len(), 3);
        }
        let counts = aut.path_counts(10);
        for (n, c) in counts.iter().enumerate() {
            let expected = if n == 0 { 1 } else { 4 * 3u128.pow(n as u32 - 1) };
            assert_eq!(*c, expected);
        }
    }

    #[test]
    fn z2_cube_free_product_automaton() {
        let g = Group::new(GroupSpec::free_product(&[2, 2, 2])).unwrap();
        let aut = GeodesicAutomaton::build(&g, &BuildParams::default()).unwrap();
        assert_eq!(aut.num_states(), 4);
        for s in 1..4 {
            assert_eq!(aut.out_edges(s).len(), 2);
        }
        // compare with brute-force enumeration of alternating words
        let counts = aut.path_counts(10);
        for n in 0..=10usize {
            let brute = g.sphere(n).unwrap().len() as u128;
            assert_eq!(counts[n], brute);
        }
    }

    #[test]
    fn mixed_order_free_product_validates() {
        let g = Group::new(GroupSpec::free_product(&[2, 3, 4])).unwrap();
        let params = BuildParams {
            verify_radius: 7,
            ..Default::default()
        };
        assert!(GeodesicAutomaton::build(&g, &params).is_ok());
    }

    #[test]
    fn lattice_automaton_validates() {
        let g = Group::new(GroupSpec::lattice(2)).unwrap();
        assert!(GeodesicAutomaton::build(&g, &BuildParams::default()).is_ok());
    }

    #[test]
    fn deleted_edge_is_reported() {
        let g = Group::new(GroupSpec::free(2)).unwrap();
        let aut = GeodesicAutomaton::build(&g, &BuildParams::default()).unwrap();
        let broken = aut.without_edge(5);
        let report = broken.validate(&g, 3).unwrap();
        assert!(!report.pass);
        assert!(report.counterexamples.iter().any(|c| c.starts_with("missing element")));
    }

    #[test]
    fn text_round_trip() {
        let g = Group::new(GroupSpec::free(2)).unwrap();
        let aut = GeodesicAutomaton::build(&g, &BuildParams::default()).unwrap();
        let text = aut.to_text(&g);
        let back = GeodesicAutomaton::from_text(&text, &g).unwrap();
        assert_eq!(back.edges(), aut.edges());
        assert_eq!(back.start(), aut.start());
        assert!(GeodesicAutomaton::from_text("states 2\n", &g).is_err());
    }
}
