//! Choosing one point in each of a family of partially ordered intervals so
//! that the choice is monotone in the order.

use num_traits::Zero;

use crate::ast::{rat, Rat};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bound {
    pub value: Rat,
    pub open: bool,
}

impl Bound {
    pub fn closed(value: Rat) -> Self {
        Bound { value, open: false }
    }
    pub fn open(value: Rat) -> Self {
        Bound { value, open: true }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Bound,
    pub hi: Bound,
}

impl Interval {
    pub fn new(lo: Bound, hi: Bound) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: &Rat) -> bool {
        let above = if self.lo.open { x > &self.lo.value } else { x >= &self.lo.value };
        let below = if self.hi.open { x < &self.hi.value } else { x <= &self.hi.value };
        above && below
    }

    pub fn is_empty(&self) -> bool {
        self.lo.value > self.hi.value || (self.lo.value == self.hi.value && (self.lo.open || self.hi.open))
    }

    fn intersect(&self, other: &Interval) -> Interval {
        let lo = match self.lo.value.cmp(&other.lo.value) {
            std::cmp::Ordering::Greater => self.lo.clone(),
            std::cmp::Ordering::Less => other.lo.clone(),
            std::cmp::Ordering::Equal => Bound { value: self.lo.value.clone(), open: self.lo.open || other.lo.open },
        };
        let hi = match self.hi.value.cmp(&other.hi.value) {
            std::cmp::Ordering::Less => self.hi.clone(),
            std::cmp::Ordering::Greater => other.hi.clone(),
            std::cmp::Ordering::Equal => Bound { value: self.hi.value.clone(), open: self.hi.open || other.hi.open },
        };
        Interval { lo, hi }
    }

    /// Some `x` in `self` and `y` in `upper` with `x <= y`.
    pub fn compatible_below(&self, upper: &Interval) -> bool {
        !self.is_empty()
            && !upper.is_empty()
            && (self.lo.value < upper.hi.value || (self.lo.value == upper.hi.value && !self.lo.open && !upper.hi.open))
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo.open { "]" } else { "[" },
            self.lo.value,
            self.hi.value,
            if self.hi.open { "[" } else { "]" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectError {
    #[error("incompatible order: {0}")]
    IncompatibleOrder(String),
}

fn incompatible<T>(msg: String) -> Result<T, SelectError> {
    Err(SelectError::IncompatibleOrder(msg))
}

/// Picks `φ_k ∈ I_k` for every interval with `I_j ≤ I_i ⇒ φ_j ≤ φ_i`, where
/// `le` lists pairs `(j, i)` meaning `I_j ≤ I_i` (closed transitively).
///
/// Intervals are visited smallest first and each gets
/// `φ_k = (max{α_k, φ̄_k} + min{β_k, β̄_k}) / 2`, with `φ̄_k` the largest point
/// already chosen below `k` and `β̄_k` the smallest upper end strictly above.
pub fn select_interval_points(intervals: &[Interval], le: &[(usize, usize)]) -> Result<Vec<Rat>, SelectError> {
    let n = intervals.len();
    for (k, i) in intervals.iter().enumerate() {
        if i.is_empty() {
            return incompatible(format!("interval {k} = {i} is empty"));
        }
    }
    let mut reach = vec![vec![false; n]; n];
    for (k, row) in reach.iter_mut().enumerate() {
        row[k] = true;
    }
    for &(j, i) in le {
        if j >= n || i >= n {
            return incompatible(format!("relation ({j}, {i}) refers to a missing interval"));
        }
        reach[j][i] = true;
    }
    for m in 0..n {
        for a in 0..n {
            if reach[a][m] {
                for b in 0..n {
                    if reach[m][b] {
                        reach[a][b] = true;
                    }
                }
            }
        }
    }
    for j in 0..n {
        for i in 0..n {
            if j != i && reach[j][i] && !intervals[j].compatible_below(&intervals[i]) {
                return incompatible(format!("{} <= {} has no ordered pair of members", intervals[j], intervals[i]));
            }
        }
    }

    // mutually related intervals share one point
    let mut class = vec![usize::MAX; n];
    let mut reps: Vec<usize> = Vec::new();
    for k in 0..n {
        if class[k] == usize::MAX {
            let c = reps.len();
            reps.push(k);
            for m in k..n {
                if reach[k][m] && reach[m][k] {
                    class[m] = c;
                }
            }
        }
    }
    let classes = reps.len();
    let mut merged: Vec<Interval> = reps.iter().map(|&k| intervals[k].clone()).collect();
    for k in 0..n {
        merged[class[k]] = merged[class[k]].intersect(&intervals[k]);
    }
    for (c, i) in merged.iter().enumerate() {
        if i.is_empty() {
            return incompatible(format!("intervals equated with {} have empty intersection", intervals[reps[c]]));
        }
    }
    let below = |a: usize, b: usize| a != b && reach[reps[a]][reps[b]];

    let mut phi: Vec<Option<Rat>> = vec![None; classes];
    for _ in 0..classes {
        let k = (0..classes)
            .find(|&k| phi[k].is_none() && (0..classes).all(|j| !below(j, k) || phi[j].is_some()))
            .expect("strict order on classes is acyclic");
        let mut lo = merged[k].lo.value.clone();
        for j in (0..classes).filter(|&j| below(j, k)) {
            let p = phi[j].as_ref().unwrap();
            if p > &lo {
                lo = p.clone();
            }
        }
        let mut hi = merged[k].hi.value.clone();
        for i in (0..classes).filter(|&i| below(k, i)) {
            if merged[i].hi.value < hi {
                hi = merged[i].hi.value.clone();
            }
        }
        phi[k] = Some((lo + hi) * rat(1, 2));
    }

    let out: Vec<Rat> = (0..n).map(|k| phi[class[k]].clone().unwrap_or_else(Rat::zero)).collect();
    for k in 0..n {
        if !intervals[k].contains(&out[k]) {
            return incompatible(format!("no monotone choice places a point of {}", intervals[k]));
        }
        for i in 0..n {
            if reach[k][i] && out[k] > out[i] {
                return incompatible(format!("{} <= {} cannot be respected", intervals[k], intervals[i]));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(a: i64, b: i64) -> Interval {
        Interval::new(Bound::open(rat(a, 1)), Bound::open(rat(b, 1)))
    }

    #[test]
    fn single_interval_midpoint() {
        assert_eq!(select_interval_points(&[open(0, 2)], &[]).unwrap(), vec![rat(1, 1)]);
    }

    #[test]
    fn two_overlapping() {
        assert_eq!(select_interval_points(&[open(0, 2), open(1, 3)], &[(0, 1)]).unwrap(), vec![rat(1, 1), rat(2, 1)]);
    }

    #[test]
    fn identical_chain() {
        let p = select_interval_points(&[open(0, 1), open(0, 1)], &[(0, 1)]).unwrap();
        assert!(p[0] <= p[1] && open(0, 1).contains(&p[0]) && open(0, 1).contains(&p[1]));
    }

    #[test]
    fn cycle_shares_point() {
        let p = select_interval_points(&[open(0, 2), open(1, 3)], &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(p[0], p[1]);
        assert!(select_interval_points(&[open(0, 1), open(1, 3)], &[(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn violations() {
        assert!(select_interval_points(&[open(2, 3), open(0, 1)], &[(0, 1)]).is_err());
        let touching = [
            Interval::new(Bound::closed(rat(1, 1)), Bound::closed(rat(2, 1))),
            Interval::new(Bound::closed(rat(0, 1)), Bound::open(rat(1, 1))),
        ];
        assert!(select_interval_points(&touching, &[(0, 1)]).is_err());
        assert!(select_interval_points(&[open(1, 1)], &[]).is_err());
    }

    #[test]
    fn closed_touching_is_fine() {
        let iv = [
            Interval::new(Bound::closed(rat(1, 1)), Bound::closed(rat(2, 1))),
            Interval::new(Bound::closed(rat(0, 1)), Bound::closed(rat(1, 1))),
        ];
        assert_eq!(select_interval_points(&iv, &[(0, 1)]).unwrap(), vec![rat(1, 1), rat(1, 1)]);
    }
}
