//! Random generators and reference checkers shared by the property tests and
//! the acceptance runner.
#![allow(dead_code)]

use num_traits::{Signed, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use rdf_core::ast::{rat, Rat};
use rdf_core::elastic::ElasticKind;
use rdf_core::select::{Bound, Interval};

pub const KINDS: [ElasticKind; 4] = [ElasticKind::Null, ElasticKind::Single, ElasticKind::Double, ElasticKind::Special];

/// A rational in `[1/100, 10]` with small denominator.
pub fn magnitude(rng: &mut dyn rand::RngCore) -> Rat {
    rat(rng.gen_range(1..=1000), rng.gen_range(1..=100)).min(rat(10, 1))
}

fn sign(rng: &mut impl Rng) -> i64 {
    if rng.gen_bool(0.5) {
        1
    } else {
        -1
    }
}

/// `(α, θ1, θ2)` for which a defined function of the given kind exists,
/// with slopes in `[1/100, 10]` and any admissible `|α|`.
pub fn constructible(rng: &mut impl Rng, kind: ElasticKind) -> (Rat, Rat, Rat) {
    constructible_with(rng, kind, magnitude, 1)
}

/// Slopes in `[1/4, 4]` and `|α|` at least a quarter of its upper bound, so
/// that third derivatives stay small enough for central differences.
pub fn constructible_moderate(rng: &mut impl Rng, kind: ElasticKind) -> (Rat, Rat, Rat) {
    constructible_with(rng, kind, |rng| rat(rng.gen_range(16..=256), 64), 16)
}

fn constructible_with(
    rng: &mut impl Rng,
    kind: ElasticKind,
    mag: fn(&mut dyn rand::RngCore) -> Rat,
    u_min: i64,
) -> (Rat, Rat, Rat) {
    let s = rat(sign(rng), 1);
    let u = rat(rng.gen_range(u_min..=64), 64);
    let z = Rat::zero();
    match kind {
        ElasticKind::Null => (z.clone(), z.clone(), z),
        ElasticKind::Single | ElasticKind::Double => {
            let t1 = &s * mag(rng);
            let t2 = if kind == ElasticKind::Single { -&s * mag(rng) } else { &s * mag(rng) };
            let a = &s * &u * t1.abs().min(t2.abs()) / rat(4, 1);
            (a, t1, t2)
        }
        ElasticKind::Special => {
            let t = &s * mag(rng);
            let a = &s * &u * t.abs() / rat(4, 1);
            if rng.gen_bool(0.5) {
                (a, z, t)
            } else {
                (a, t, z)
            }
        }
    }
}

/// Small values with many ties and boundary cases, for the existence check.
pub fn boundary_triple(rng: &mut impl Rng) -> (Rat, Rat, Rat) {
    let mut pick = || {
        if rng.gen_bool(0.25) {
            Rat::zero()
        } else {
            rat(rng.gen_range(-8..=8), *[1, 2, 4].choose(rng).unwrap())
        }
    };
    (pick(), pick(), pick())
}

fn sgn(q: &Rat) -> i32 {
    if q.is_positive() {
        1
    } else if q.is_negative() {
        -1
    } else {
        0
    }
}

/// Case-by-case existence conditions for defined functions, written out
/// independently of the constructor.
pub fn existence_condition(alpha: &Rat, theta1: &Rat, theta2: &Rat) -> Option<ElasticKind> {
    let zero = Rat::zero();
    let abs4 = (alpha * rat(4, 1)).abs();
    let bounded = |limit: Rat| alpha != &zero && abs4 <= limit;
    if theta1 == &zero && theta2 == &zero {
        return (alpha == &zero).then_some(ElasticKind::Null);
    }
    if theta1 != &zero && theta2 != &zero {
        let limit = theta1.abs().min(theta2.abs());
        let ok = bounded(limit) && sgn(alpha) == sgn(theta1);
        let kind = if (theta1 * theta2).is_negative() { ElasticKind::Single } else { ElasticKind::Double };
        return ok.then_some(kind);
    }
    let sum = theta1 + theta2;
    (bounded(sum.abs()) && sgn(alpha) == sgn(&sum)).then_some(ElasticKind::Special)
}

pub fn f64_of(q: &Rat) -> f64 {
    q.to_f64().unwrap()
}

/// A poset instance: intervals, `le` pairs `(j, i)` meaning `x_j ≤ x_i`, and
/// a hidden monotone assignment that proves the precondition.
pub struct PosetInstance {
    pub intervals: Vec<Interval>,
    pub le: Vec<(usize, usize)>,
}

fn interval_around(rng: &mut impl Rng, v: &Rat) -> Interval {
    let w1 = rat(rng.gen_range(0..=8), 4);
    let w2 = rat(rng.gen_range(0..=8), 4);
    let lo_open = !w1.is_zero() && rng.gen_bool(0.5);
    let hi_open = !w2.is_zero() && rng.gen_bool(0.5);
    let lo = v - w1;
    let hi = v + w2;
    Interval::new(
        if lo_open { Bound::open(lo) } else { Bound::closed(lo) },
        if hi_open { Bound::open(hi) } else { Bound::closed(hi) },
    )
}

/// Intervals around a nondecreasing hidden assignment, with random order
/// edges consistent with it (including cycles between equal values).
pub fn valid_poset(rng: &mut impl Rng) -> PosetInstance {
    let n = rng.gen_range(1..=8);
    let mut vals: Vec<Rat> = (0..n).map(|_| rat(rng.gen_range(-6..=6), 2)).collect();
    vals.sort();
    let intervals = vals.iter().map(|v| interval_around(rng, v)).collect();
    let mut le = Vec::new();
    for i in 0..n {
        for j in 0..i {
            if rng.gen_bool(0.35) {
                le.push((j, i));
            }
            if vals[i] == vals[j] && rng.gen_bool(0.3) {
                le.push((i, j));
            }
        }
    }
    le.shuffle(rng);
    PosetInstance { intervals, le }
}

/// A valid instance with one edge `x_j ≤ x_i` whose intervals lie strictly
/// the wrong way round.
pub fn violating_poset(rng: &mut impl Rng) -> PosetInstance {
    let mut p = valid_poset(rng);
    let n = p.intervals.len();
    let n = if n < 2 {
        p.intervals.push(interval_around(rng, &rat(0, 1)));
        2
    } else {
        n
    };
    let i = rng.gen_range(1..n);
    let j = rng.gen_range(0..i);
    let top = p.intervals[i].hi.value.clone() + rat(rng.gen_range(1..=4), 2);
    p.intervals[j] = Interval::new(Bound::closed(top.clone()), Bound::closed(top + rat(1, 1)));
    p.le.push((j, i));
    p
}
