use proptest::prelude::*;
use ratiolimit::ratio::{closed_form_h_free_isotropic, ratio_metric, BoundTable, FreeClosedForm};
use ratiolimit::walk::{build_powers, Engine, PowerOptions, ScaledMeasure};
use ratiolimit::{GroupDescriptor, GroupElement};

fn groups() -> Vec<GroupDescriptor> {
    vec![
        GroupDescriptor::lattice(2),
        GroupDescriptor::free(3),
        GroupDescriptor::lamplighter(1),
        GroupDescriptor::product(GroupDescriptor::free(2), GroupDescriptor::lattice(1)),
    ]
}

fn word(g: &GroupDescriptor, picks: &[usize]) -> GroupElement {
    let gens = g.generators();
    picks
        .iter()
        .fold(g.identity(), |acc, &i| g.multiply(&acc, &gens[i % gens.len()]).unwrap())
}

fn picks() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..64, 0..6)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_axioms(gi in 0usize..4, a in picks(), b in picks(), c in picks()) {
        let g = &groups()[gi];
        let (x, y, z) = (word(g, &a), word(g, &b), word(g, &c));
        let e = g.identity();
        let xy_z = g.multiply(&g.multiply(&x, &y).unwrap(), &z).unwrap();
        let x_yz = g.multiply(&x, &g.multiply(&y, &z).unwrap()).unwrap();
        prop_assert_eq!(xy_z, x_yz);
        prop_assert_eq!(g.multiply(&x, &e).unwrap(), x.clone());
        prop_assert_eq!(g.multiply(&e, &x).unwrap(), x.clone());
        prop_assert!(g.is_identity(&g.multiply(&x, &g.inverse(&x).unwrap()).unwrap()));
        prop_assert_eq!(g.left_quotient(&x, &g.multiply(&x, &y).unwrap()).unwrap(), y);
    }

    #[test]
    fn text_round_trip(gi in 0usize..4, a in picks()) {
        let g = &groups()[gi];
        let x = word(g, &a);
        prop_assert_eq!(g.parse_element(&g.format(&x)).unwrap(), x);
    }

    #[test]
    fn word_length_is_a_norm(gi in 0usize..4, a in picks(), b in picks()) {
        let g = &groups()[gi];
        let (x, y) = (word(g, &a), word(g, &b));
        let (lx, ly) = (g.word_length(&x).unwrap(), g.word_length(&y).unwrap());
        prop_assert!(lx <= a.len());
        prop_assert_eq!(lx, g.word_length(&g.inverse(&x).unwrap()).unwrap());
        prop_assert!(g.word_length(&g.multiply(&x, &y).unwrap()).unwrap() <= lx + ly);
        prop_assert_eq!(lx == 0, g.is_identity(&x));
    }

    #[test]
    fn mass_is_conserved(gi in 0usize..2, raw in prop::collection::vec(0.01f64..1.0, 5), n in 1usize..7) {
        let g = [GroupDescriptor::lattice(1), GroupDescriptor::free(2)][gi].clone();
        let mut support = vec![g.identity()];
        support.extend(g.generators());
        let total: f64 = raw[..support.len()].iter().sum();
        let mu = ScaledMeasure::from_weights(&g, support.into_iter().zip(raw.iter().map(|w| w / total))).unwrap();
        let t = build_powers(&mu, n, PowerOptions::default()).unwrap();
        let sum: f64 = g.ball(n).unwrap().elements().iter().map(|y| t.mass(n, y).unwrap()).sum();
        prop_assert!(close(sum, 1.0, 1e-12), "sum {}", sum);
        prop_assert!(t.log_total(n).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn chapman_kolmogorov(hold in 0.05f64..0.9, n in 1usize..5, m in 1usize..5, b in picks()) {
        let g = GroupDescriptor::free(2);
        let t = build_powers(&ScaledMeasure::simple(&g, hold).unwrap(), n + m, PowerOptions::default()).unwrap();
        let y = word(&g, &b);
        let sum: f64 = g
            .ball(n)
            .unwrap()
            .elements()
            .iter()
            .map(|h| t.mass(n, h).unwrap() * t.mass(m, &g.left_quotient(h, &y).unwrap()).unwrap())
            .sum();
        let direct = t.mass(n + m, &y).unwrap();
        prop_assert!(close(sum, direct, 1e-12) || (sum == 0.0 && direct == 0.0), "{} vs {}", sum, direct);
    }

    #[test]
    fn radial_matches_generic(hold in 0.01f64..0.95, m in 0usize..=8, b in picks()) {
        let g = GroupDescriptor::free(2);
        let mu = ScaledMeasure::simple(&g, hold).unwrap();
        let radial = build_powers(&mu, 8, PowerOptions::default()).unwrap();
        prop_assert_eq!(radial.engine(), Engine::Radial);
        let generic = build_powers(&mu, 8, PowerOptions { engine: Some(Engine::Generic), ..Default::default() }).unwrap();
        let y = word(&g, &b);
        prop_assert!((radial.mass(m, &y).unwrap() - generic.mass(m, &y).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn closed_form_metric_axioms(rank in 2usize..4, a in picks(), b in picks(), c in picks()) {
        let g = GroupDescriptor::free(rank);
        let kernel = FreeClosedForm { rank };
        let prefix = g.ball(2).unwrap();
        let bounds = BoundTable::unit(prefix.elements());
        let (x, y, z) = (word(&g, &a), word(&g, &b), word(&g, &c));
        let d = |p: &GroupElement, q: &GroupElement| ratio_metric(&kernel, &prefix, &bounds, p, q).unwrap().value;
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() <= 1e-12);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
    }

    #[test]
    fn closed_form_is_positive_and_normalised(rank in 2usize..5, a in picks()) {
        let g = GroupDescriptor::free(rank);
        let y = word(&g, &a);
        prop_assert!((closed_form_h_free_isotropic(rank, &g.identity(), &y).unwrap() - 1.0).abs() <= 1e-12);
        prop_assert!(closed_form_h_free_isotropic(rank, &y, &g.identity()).unwrap() > 0.0);
    }
}
