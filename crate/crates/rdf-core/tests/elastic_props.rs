mod common;

use common::*;
use num_traits::Zero;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rdf_core::ast::{rat, Rat};
use rdf_core::elastic::*;
use rdf_core::select::{select_interval_points, SelectError};

const GRID: usize = 1000;

fn grid() -> impl Iterator<Item = f64> {
    (0..=GRID).map(|k| k as f64 / GRID as f64)
}

fn kind_strategy() -> impl Strategy<Value = ElasticKind> {
    prop_oneof![
        Just(ElasticKind::Null),
        Just(ElasticKind::Single),
        Just(ElasticKind::Double),
        Just(ElasticKind::Special)
    ]
}

proptest! {
    #[test]
    fn endpoint_laws(seed in any::<u64>(), kind in kind_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, t1, t2) = constructible(&mut rng, kind);
        let spec = make_defined(&a, &t1, &t2).unwrap();
        prop_assert_eq!(spec.kind, kind);
        prop_assert_eq!(eval_elastic(&spec, 0.0).unwrap(), 0.0);
        prop_assert_eq!(eval_elastic(&spec, 1.0).unwrap(), 0.0);
        prop_assert!((eval_elastic_deriv(&spec, 0.0).unwrap() - f64_of(&t1)).abs() < 1e-12);
        prop_assert!((eval_elastic_deriv(&spec, 1.0).unwrap() - f64_of(&t2)).abs() < 1e-12);
        let bound = f64_of(&a).abs() + 1e-12;
        for x in grid() {
            prop_assert!(eval_elastic(&spec, x).unwrap().abs() <= bound);
        }
        prop_assert!(spec.stitch_residual() < 1e-12);
    }

    #[test]
    fn single_sign_law(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, t1, t2) = constructible(&mut rng, ElasticKind::Single);
        let spec = make_defined(&a, &t1, &t2).unwrap();
        let c = spec.compile();
        let h = 1e-4;
        let want = -f64_of(&t1).signum();
        let noise = 1e-6 * (f64_of(&t1).abs() + f64_of(&t2).abs());
        for k in 1..GRID {
            let x = k as f64 / GRID as f64;
            let dd = (c.value(x + h) - 2.0 * c.value(x) + c.value(x - h)) / (h * h);
            prop_assert!(dd * want > -noise, "x = {x}: second difference {dd} for θ1 = {t1}");
        }
    }

    #[test]
    fn slopes_stay_between_end_and_middle_slopes(seed in any::<u64>(), kind in kind_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, t1, t2) = constructible(&mut rng, kind);
        let spec = make_defined(&a, &t1, &t2).unwrap();
        let mut ks = vec![f64_of(&t1), f64_of(&t2)];
        ks.extend(spec.middle_slope.as_ref().map(f64_of));
        let lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let c = spec.compile();
        for x in grid() {
            let d = c.deriv(x);
            prop_assert!(lo - 1e-9 <= d && d <= hi + 1e-9, "x = {x}: {d} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn larger_alpha_gives_larger_magnitude(seed in any::<u64>(), kind in kind_strategy(), u in 1..64i64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, t1, t2) = constructible(&mut rng, kind);
        let b = &a * rat(u, 64);
        let (f, g) = (make_defined(&a, &t1, &t2).unwrap(), make_defined(&b, &t1, &t2).unwrap());
        let (f, g) = (f.compile(), g.compile());
        for x in grid() {
            prop_assert!(f.value(x).abs() >= g.value(x).abs() - 1e-12);
        }
    }

    #[test]
    fn construction_is_deterministic(seed in any::<u64>(), kind in kind_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, t1, t2) = constructible(&mut rng, kind);
        let f = make_defined(&a, &t1, &t2).unwrap();
        let g = make_defined(&a.clone(), &t1.clone(), &t2.clone()).unwrap();
        prop_assert_eq!(&f, &g);
        for x in grid() {
            prop_assert_eq!(eval_elastic(&f, x).unwrap(), eval_elastic(&g, x).unwrap());
        }
    }

    #[test]
    fn existence_matches_reference(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let (a, t1, t2) = boundary_triple(&mut rng);
            let got = make_defined(&a, &t1, &t2).ok().map(|s| s.kind);
            prop_assert_eq!(got, existence_condition(&a, &t1, &t2), "[{}, {}, {}]", a, t1, t2);
        }
    }

    #[test]
    fn selection_is_monotone_and_member(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = valid_poset(&mut rng);
        let phi = select_interval_points(&p.intervals, &p.le).unwrap();
        for (k, x) in phi.iter().enumerate() {
            prop_assert!(p.intervals[k].contains(x), "φ{} = {} not in {}", k, x, p.intervals[k]);
        }
        for &(j, i) in &p.le {
            prop_assert!(phi[j] <= phi[i]);
        }
    }

    #[test]
    fn selection_rejects_reversed_intervals(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = violating_poset(&mut rng);
        let r = select_interval_points(&p.intervals, &p.le);
        prop_assert!(matches!(r, Err(SelectError::IncompatibleOrder(_))));
    }
}

#[test]
fn alpha_zero_with_slopes_has_no_function() {
    let z = Rat::zero();
    for (t1, t2) in [(rat(1, 1), rat(-1, 1)), (rat(1, 1), rat(1, 1)), (z.clone(), rat(1, 1))] {
        assert!(make_defined(&z, &t1, &t2).is_err());
        assert_eq!(existence_condition(&z, &t1, &t2), None);
    }
}
