//! Explicit witnesses for satisfiable branches.
//!
//! A numeric model of a branch fixes, for every function variable, its value
//! and slope at each point of the domain chain. The witness interpolates
//! these data by a linear part plus an elastic perturbation on every gap and
//! by exponential tails outside the chain, and every literal of the branch is
//! then checked against it on a grid.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::ast::{rat, rat_str, Cmp, Rat};
use crate::elastic::{make_defined, CompiledElastic, ElasticError, ElasticKind, ElasticSpec};
use crate::elim::{eliminate, flat_to_tarski, Branch, Elimination, VarTable};
use crate::normal::{End, FlatLit, FnPred, Ival, Opnd};
use crate::select::{select_interval_points, Bound, Interval, SelectError};
use crate::tarski::{eval_tarski, eval_tarski_margin, EvalError, NumericModel};

/// Absolute tolerance of the grid checks.
pub const TOLERANCE: f64 = 1e-9;
/// Largest C¹ stitching residual accepted by [`Report::all_pass`].
pub const STITCH_TOLERANCE: f64 = 1e-6;
/// Distances of the tail probes from the outermost breakpoints.
pub const TAIL_PROBES: [f64; 3] = [1.0, 10.0, 40.0];
/// Number of halvings tried by [`search_alpha`].
pub const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, thiserror::Error)]
pub enum WitnessError {
    #[error("elastic part does not exist on segment {segment} of {function}: {source}")]
    ExistenceViolation { function: String, segment: usize, source: ElasticError },
    #[error("unbounded tails: {0}")]
    IncompatibleOrder(#[from] SelectError),
    #[error("model evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("no passing witness after {iterations} values of alpha (last {alpha})")]
    AlphaSearchExhausted { alpha: Rat, iterations: usize, report: Box<Report> },
}

/// Data of the rebuilt tail on an unbounded side where some `f > g` holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnboundedTail {
    /// Asymptotic slope chosen for the function.
    #[serde(with = "rat_str")]
    pub phi: Rat,
    /// Value and slope at the outermost chain point.
    #[serde(with = "rat_str")]
    pub y_tilde: Rat,
    #[serde(with = "rat_str")]
    pub t_tilde: Rat,
    /// Extra breakpoint one unit beyond the chain, with its value and slope.
    #[serde(with = "rat_str")]
    pub eta_inf: Rat,
    #[serde(with = "rat_str")]
    pub y_hat: Rat,
    #[serde(with = "rat_str")]
    pub t_hat: Rat,
}

/// Breakpoint data of one function, independent of alpha.
#[derive(Clone, Debug, PartialEq)]
pub struct Knots {
    pub eta: Vec<Rat>,
    pub y: Vec<Rat>,
    pub t: Vec<Rat>,
    pub gamma_left: Rat,
    pub gamma_right: Rat,
    pub left_ext: Option<UnboundedTail>,
    pub right_ext: Option<UnboundedTail>,
}

impl Knots {
    fn offset(&self) -> usize {
        usize::from(self.left_ext.is_some())
    }

    /// `θ_i(u) = Δ_i·u − (y_{i+1} − y_i)`.
    fn theta(&self, i: usize, u: &Rat) -> Rat {
        (&self.eta[i + 1] - &self.eta[i]) * u - (&self.y[i + 1] - &self.y[i])
    }

    /// Knot indices covered by an interval, tails included on infinite ends.
    fn range(&self, tab: &VarTable, ival: &Ival) -> (usize, usize) {
        let lo = match &ival.lo {
            End::NegInf => 0,
            e => tab.ind(e) - 1 + self.offset(),
        };
        let hi = match &ival.hi {
            End::PosInf => self.eta.len() - 1,
            e => tab.ind(e) - 1 + self.offset(),
        };
        (lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    #[serde(with = "rat_str")]
    pub at: Rat,
    #[serde(with = "rat_str")]
    pub value: Rat,
    #[serde(with = "rat_str")]
    pub slope: Rat,
    /// Asymptotic slope.
    #[serde(with = "rat_str")]
    pub gamma: Rat,
    pub unbounded: Option<UnboundedTail>,
}

#[derive(Clone, Debug)]
struct Compiled {
    eta: Vec<f64>,
    y: Vec<f64>,
    t: Vec<f64>,
    dy: Vec<f64>,
    delta: Vec<f64>,
    segs: Vec<CompiledElastic>,
    gamma_left: f64,
    gamma_right: f64,
}

/// A C¹ function on the reals: linear-plus-elastic between breakpoints,
/// exponential tails outside.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessFunction {
    pub name: String,
    #[serde(with = "rat_str")]
    pub alpha: Rat,
    #[serde(with = "rat_str::vec")]
    pub breakpoints: Vec<Rat>,
    #[serde(with = "rat_str::vec")]
    pub values: Vec<Rat>,
    #[serde(with = "rat_str::vec")]
    pub slopes: Vec<Rat>,
    pub segments: Vec<ElasticSpec>,
    pub left_tail: Tail,
    pub right_tail: Tail,
    #[serde(skip)]
    cache: std::sync::OnceLock<Compiled>,
}

fn fl(q: &Rat) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

impl WitnessFunction {
    fn compiled(&self) -> &Compiled {
        self.cache.get_or_init(|| {
            let eta: Vec<f64> = self.breakpoints.iter().map(fl).collect();
            let y: Vec<f64> = self.values.iter().map(fl).collect();
            Compiled {
                dy: self.values.windows(2).map(|w| fl(&(&w[1] - &w[0]))).collect(),
                delta: self.breakpoints.windows(2).map(|w| fl(&(&w[1] - &w[0]))).collect(),
                t: self.slopes.iter().map(fl).collect(),
                segs: self.segments.iter().map(ElasticSpec::compile).collect(),
                gamma_left: fl(&self.left_tail.gamma),
                gamma_right: fl(&self.right_tail.gamma),
                eta,
                y,
            }
        })
    }

    fn knots(&self) -> Knots {
        Knots {
            eta: self.breakpoints.clone(),
            y: self.values.clone(),
            t: self.slopes.clone(),
            gamma_left: self.left_tail.gamma.clone(),
            gamma_right: self.right_tail.gamma.clone(),
            left_ext: self.left_tail.unbounded.clone(),
            right_ext: self.right_tail.unbounded.clone(),
        }
    }

    fn segment_at(&self, i: usize, p: f64) -> (f64, f64) {
        let c = self.compiled();
        let seg = &c.segs[i];
        (c.y[i] + c.dy[i] * p + seg.value(p), (c.dy[i] + seg.deriv(p)) / c.delta[i])
    }

    fn left_tail_at(&self, eta: f64) -> (f64, f64) {
        let c = self.compiled();
        let (y, t, g) = (c.y[0], c.t[0], c.gamma_left);
        let x = eta - c.eta[0];
        (y - (g - t) * x.exp_m1() + g * x, g - (g - t) * x.exp())
    }

    fn right_tail_at(&self, eta: f64) -> (f64, f64) {
        let c = self.compiled();
        let n = c.eta.len() - 1;
        let (y, t, g) = (c.y[n], c.t[n], c.gamma_right);
        let x = c.eta[n] - eta;
        (y - (t - g) * x.exp_m1() - g * x, g + (t - g) * x.exp())
    }

    /// Value and derivative at `eta`; exact knot data at breakpoints.
    pub fn eval_both(&self, eta: f64) -> (f64, f64) {
        let c = self.compiled();
        let n = c.eta.len();
        let k = c.eta.partition_point(|&e| e < eta);
        if k < n && c.eta[k] == eta {
            return (c.y[k], c.t[k]);
        }
        if k == 0 {
            self.left_tail_at(eta)
        } else if k == n {
            self.right_tail_at(eta)
        } else {
            let i = k - 1;
            self.segment_at(i, (eta - c.eta[i]) / c.delta[i])
        }
    }

    /// Largest gap between one-sided closed-form limits at a breakpoint and
    /// the knot data, including the joins inside elastic parts.
    pub fn stitch_residual(&self) -> f64 {
        let c = self.compiled();
        let n = c.eta.len();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let left = if k == 0 { self.left_tail_at(c.eta[0]) } else { self.segment_at(k - 1, 1.0) };
            let right = if k + 1 == n { self.right_tail_at(c.eta[k]) } else { self.segment_at(k, 0.0) };
            for (v, d) in [left, right] {
                worst = worst.max((v - c.y[k]).abs()).max((d - c.t[k]).abs());
            }
        }
        for (i, s) in self.segments.iter().enumerate() {
            worst = worst.max(s.stitch_residual() * (1.0 / c.delta[i]).max(1.0));
        }
        worst
    }
}

pub fn eval_witness(w: &WitnessFunction, eta: f64) -> f64 {
    w.eval_both(eta).0
}

pub fn eval_witness_deriv(w: &WitnessFunction, eta: f64) -> f64 {
    w.eval_both(eta).1
}

pub type Witnesses = BTreeMap<String, WitnessFunction>;

fn value(m: &NumericModel, v: &str) -> Rat {
    m.get(v).cloned().unwrap_or_else(Rat::zero)
}

fn opnd(m: &NumericModel, o: &Opnd) -> Rat {
    match o {
        Opnd::Var(v) => value(m, v),
        Opnd::Zero => Rat::zero(),
        Opnd::One => rat(1, 1),
    }
}

fn table(branch: &Branch) -> VarTable {
    branch
        .table
        .clone()
        .unwrap_or_else(|| VarTable { chain: branch.chain.clone(), functions: branch.functions() })
}

/// Function literals `(f, pred, ival)` of a branch.
fn preds(branch: &Branch) -> impl Iterator<Item = (&String, &FnPred, &Ival)> {
    branch.lits.iter().filter_map(|l| match l {
        FlatLit::Pred { f, pred, ival, pos: true } => Some((f, pred, ival)),
        _ => None,
    })
}

/// Closed-or-open bound chosen as the tightest of a set of candidates.
fn tightest(cands: Vec<(Rat, bool)>, default: Rat, lower: bool) -> Bound {
    let mut best = Bound::closed(default);
    let mut first = true;
    for (v, open) in cands {
        let better = if lower { v > best.value } else { v < best.value };
        if first || better {
            best = Bound { value: v, open };
            first = false;
        } else if v == best.value {
            best.open |= open;
        }
    }
    best
}

/// Rebuilds the tails on one side for the functions tied by `k` edges.
fn unbounded_side(
    knots: &mut BTreeMap<String, Knots>,
    elim: &Elimination,
    model: &NumericModel,
    right: bool,
) -> Result<(), WitnessError> {
    let edges: Vec<(String, String)> =
        elim.k_edges.iter().filter(|e| e.2 == right).map(|(f, g, _)| (f.clone(), g.clone())).collect();
    if edges.is_empty() {
        return Ok(());
    }
    let fam: Vec<String> = edges.iter().flat_map(|(f, g)| [f.clone(), g.clone()]).collect::<BTreeSet<_>>().into_iter().collect();
    let pos = |f: &str| fam.iter().position(|g| g == f).unwrap();
    // the left side is handled in reflected coordinates η ↦ −η
    let refl = |q: Rat| if right { q } else { -q };
    let mut bounds: Vec<Vec<(Cmp, Rat)>> = vec![Vec::new(); fam.len()];
    for b in elim.gamma_bounds.iter().filter(|b| b.right == right) {
        if let Some(k) = fam.iter().position(|g| *g == b.f) {
            let rel = if right { b.rel } else { b.rel.flip() };
            bounds[k].push((rel, refl(b.rhs.eval(model)?)));
        }
    }
    let all: Vec<&Rat> = bounds.iter().flatten().map(|(_, v)| v).collect();
    let lo_all = all.iter().min().map(|q| (*q).clone()).unwrap_or_else(Rat::zero);
    let hi_all = all.iter().max().map(|q| (*q).clone()).unwrap_or_else(Rat::zero);
    let one = rat(1, 1);
    let intervals: Vec<Interval> = bounds
        .iter()
        .map(|bs| {
            let lower = bs.iter().filter(|(c, _)| matches!(c, Cmp::Eq | Cmp::Ge | Cmp::Gt)).map(|(c, v)| (v.clone(), *c == Cmp::Gt));
            let upper = bs.iter().filter(|(c, _)| matches!(c, Cmp::Eq | Cmp::Le | Cmp::Lt)).map(|(c, v)| (v.clone(), *c == Cmp::Lt));
            Interval::new(tightest(lower.collect(), &lo_all - &one, true), tightest(upper.collect(), &hi_all + &one, false))
        })
        .collect();
    let le: Vec<(usize, usize)> = edges.iter().map(|(f, g)| (pos(g), pos(f))).collect();
    let phi = select_interval_points(&intervals, &le)?;

    let outer = |k: &Knots| if right { k.eta.len() - 1 } else { 0 };
    let ytil: Vec<Rat> = fam.iter().map(|f| knots[f].y[outer(&knots[f])].clone()).collect();
    let ttil: Vec<Rat> = fam.iter().map(|f| refl(knots[f].t[outer(&knots[f])].clone())).collect();
    let four = rat(4, 1);
    let two = rat(2, 1);
    for (k, f) in fam.iter().enumerate() {
        let below: Vec<&Rat> = edges.iter().filter(|(a, _)| a == f).map(|(_, g)| &ytil[pos(g)]).collect();
        let above: Vec<&Rat> = edges.iter().filter(|(_, b)| b == f).map(|(h, _)| &ytil[pos(h)]).collect();
        let y_inf = below.into_iter().max().cloned().unwrap_or_else(|| &ytil[k] - &one);
        let y_sup = above.into_iter().min().cloned().unwrap_or_else(|| &ytil[k] + &one);
        let (p, y, t) = (&phi[k], &ytil[k], &ttil[k]);
        let (y_hat, t_hat) = if p < t {
            let d = ((&y_sup - y) / &four).min((t - p) / &two);
            (y + p + &d, p + d / &two)
        } else if p > t {
            let d = ((y - &y_inf) / &four).min((p - t) / &two);
            (y + p - &d, p - d / &two)
        } else {
            (y + p, p.clone())
        };
        let kn = knots.get_mut(f).unwrap();
        let o = outer(kn);
        let eta_inf = if right { &kn.eta[o] + &one } else { &kn.eta[o] - &one };
        let rec = UnboundedTail {
            phi: refl(p.clone()),
            y_tilde: y.clone(),
            t_tilde: refl(t.clone()),
            eta_inf: eta_inf.clone(),
            y_hat: y_hat.clone(),
            t_hat: refl(t_hat.clone()),
        };
        if right {
            kn.eta.push(eta_inf);
            kn.y.push(y_hat);
            kn.t.push(t_hat);
            kn.gamma_right = p.clone();
            kn.right_ext = Some(rec);
        } else {
            kn.eta.insert(0, eta_inf);
            kn.y.insert(0, y_hat);
            kn.t.insert(0, -t_hat);
            kn.gamma_left = -p.clone();
            kn.left_ext = Some(rec);
        }
    }
    Ok(())
}

/// Copies a rebuilt tail across `f = g` literals reaching the same infinity.
fn share_tails(knots: &mut BTreeMap<String, Knots>, branch: &Branch) {
    let eqs: Vec<(String, String, bool, bool)> = preds(branch)
        .filter_map(|(f, p, ival)| match p {
            FnPred::Eq(g) => Some((f.clone(), g.clone(), ival.lo == End::NegInf, ival.hi == End::PosInf)),
            _ => None,
        })
        .collect();
    loop {
        let mut changed = false;
        for (f, g, left, right) in &eqs {
            for (a, b) in [(f, g), (g, f)] {
                if *right && knots[a].right_ext.is_some() && knots[b].right_ext.is_none() {
                    let src = knots[a].clone();
                    let dst = knots.get_mut(b).unwrap();
                    let n = src.eta.len() - 1;
                    dst.eta.push(src.eta[n].clone());
                    dst.y.push(src.y[n].clone());
                    dst.t.push(src.t[n].clone());
                    dst.gamma_right = src.gamma_right;
                    dst.right_ext = src.right_ext;
                    changed = true;
                }
                if *left && knots[a].left_ext.is_some() && knots[b].left_ext.is_none() {
                    let src = knots[a].clone();
                    let dst = knots.get_mut(b).unwrap();
                    dst.eta.insert(0, src.eta[0].clone());
                    dst.y.insert(0, src.y[0].clone());
                    dst.t.insert(0, src.t[0].clone());
                    dst.gamma_left = src.gamma_left;
                    dst.left_ext = src.left_ext;
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// Breakpoint data of every function of a branch, tails rebuilt where
/// `f > g` holds on an unbounded interval.
pub fn skeleton(branch: &Branch, model: &NumericModel) -> Result<BTreeMap<String, Knots>, WitnessError> {
    let tab = table(branch);
    let elim = eliminate(branch);
    let mut knots = BTreeMap::new();
    for f in &tab.functions {
        let r = tab.r();
        let eta: Vec<Rat> = tab.chain.iter().map(|v| value(model, v)).collect();
        let y: Vec<Rat> = (1..=r).map(|j| value(model, &tab.y(f, j))).collect();
        let t: Vec<Rat> = (1..=r).map(|j| value(model, &tab.t(f, j))).collect();
        let gamma_left = model.get(&tab.gamma0(f)).cloned().unwrap_or_else(|| t[0].clone());
        let gamma_right = model.get(&tab.gammar(f)).cloned().unwrap_or_else(|| t[r - 1].clone());
        knots.insert(f.clone(), Knots { eta, y, t, gamma_left, gamma_right, left_ext: None, right_ext: None });
    }
    let mut filled = model.clone();
    for e in &elim.gamma_bounds {
        for v in e.rhs.free_vars() {
            if filled.get(&v).is_none() {
                let q = gamma_default(&knots, &tab, &v).unwrap_or_else(Rat::zero);
                filled.set(&v, q);
            }
        }
    }
    unbounded_side(&mut knots, &elim, &filled, true)?;
    unbounded_side(&mut knots, &elim, &filled, false)?;
    share_tails(&mut knots, branch);
    Ok(knots)
}

/// Value a missing tail-slope variable stands for: the outermost slope.
fn gamma_default(knots: &BTreeMap<String, Knots>, tab: &VarTable, v: &str) -> Option<Rat> {
    knots.iter().find_map(|(f, k)| {
        if v == tab.gamma0(f) {
            Some(k.gamma_left.clone())
        } else if v == tab.gammar(f) {
            Some(k.gamma_right.clone())
        } else {
            None
        }
    })
}

/// Magnitudes bounding the elastic amplitude.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaBound {
    #[serde(with = "rat_str::vec")]
    pub a1: Vec<Rat>,
    #[serde(with = "rat_str::vec")]
    pub a2: Vec<Rat>,
    #[serde(with = "rat_str::vec")]
    pub a3: Vec<Rat>,
    #[serde(with = "rat_str::vec")]
    pub a4: Vec<Rat>,
    /// Nonzero magnitudes of the four sets, sorted and deduplicated.
    #[serde(with = "rat_str::vec")]
    pub a: Vec<Rat>,
    #[serde(with = "rat_str")]
    pub m: Rat,
}

impl AlphaBound {
    fn from_sets(a1: Vec<Rat>, a2: Vec<Rat>, a3: Vec<Rat>, a4: Vec<Rat>) -> AlphaBound {
        let a: BTreeSet<Rat> =
            a1.iter().chain(&a2).chain(&a3).chain(&a4).filter(|q| !q.is_zero()).map(|q| q.abs()).collect();
        let m = a.iter().next().map(|q| q / rat(2, 1)).unwrap_or_else(Rat::zero);
        AlphaBound { a1, a2, a3, a4, a: a.into_iter().collect(), m }
    }

    /// `I = {0}` when no magnitude constrains alpha.
    pub fn is_trivial(&self) -> bool {
        self.a.is_empty()
    }

    /// Supremum of `I = ]0, m/8[`.
    pub fn sup(&self) -> Rat {
        &self.m / rat(8, 1)
    }

    pub fn contains(&self, alpha: &Rat) -> bool {
        if self.is_trivial() {
            alpha.is_zero()
        } else {
            alpha.is_positive() && alpha < &self.sup()
        }
    }
}

/// Knot index pairs shared by `f` and `g` over an interval.
fn aligned(kf: &Knots, kg: &Knots, tab: &VarTable, ival: &Ival) -> Vec<(usize, usize)> {
    let (i1, i2) = (tab.ind(&ival.lo), tab.ind(&ival.hi));
    let mut out: Vec<(usize, usize)> = (i1..=i2).map(|j| (j - 1 + kf.offset(), j - 1 + kg.offset())).collect();
    if ival.lo == End::NegInf && kf.left_ext.is_some() && kg.left_ext.is_some() {
        out.insert(0, (0, 0));
    }
    if ival.hi == End::PosInf && kf.right_ext.is_some() && kg.right_ext.is_some() {
        out.push((kf.eta.len() - 1, kg.eta.len() - 1));
    }
    out
}

fn alpha_bound_from(branch: &Branch, knots: &BTreeMap<String, Knots>, model: &NumericModel) -> AlphaBound {
    let tab = table(branch);
    let mut a1 = Vec::new();
    for k in knots.values() {
        for i in 0..k.eta.len().saturating_sub(1) {
            a1.push(k.theta(i, &k.t[i]));
            a1.push(k.theta(i, &k.t[i + 1]));
        }
    }
    let (mut a2, mut a3, mut a4) = (Vec::new(), Vec::new(), Vec::new());
    for (f, pred, ival) in preds(branch) {
        let kf = &knots[f];
        match pred {
            FnPred::Gt(g) => {
                let kg = &knots[g];
                for (i, j) in aligned(kf, kg, &tab, ival) {
                    a2.push((&kf.y[i] - &kg.y[j]) / rat(2, 1));
                }
            }
            FnPred::Deriv(_, y) => {
                let y = opnd(model, y);
                let (lo, hi) = kf.range(&tab, ival);
                for i in lo..hi {
                    a3.push(kf.theta(i, &y));
                }
            }
            FnPred::StrictUp | FnPred::StrictDown => {
                let (lo, hi) = kf.range(&tab, ival);
                for i in lo..hi {
                    a4.push(kf.theta(i, &Rat::zero()));
                }
            }
            _ => {}
        }
    }
    AlphaBound::from_sets(a1, a2, a3, a4)
}

/// Admissible elastic amplitudes for a branch under a model.
pub fn alpha_bound(branch: &Branch, model: &NumericModel) -> Result<AlphaBound, WitnessError> {
    Ok(alpha_bound_from(branch, &skeleton(branch, model)?, model))
}

/// Signed amplitude for a segment with end slopes `θ1`, `θ2`.
fn signed_alpha(alpha: &Rat, t1: &Rat, t2: &Rat) -> Rat {
    let s = match (t1.is_zero(), t2.is_zero()) {
        (true, true) => return Rat::zero(),
        (false, false) => t1.signum(),
        _ => (t1 + t2).signum(),
    };
    alpha * s
}

fn assemble(name: &str, k: &Knots, alpha: &Rat) -> Result<WitnessFunction, WitnessError> {
    let mut segments = Vec::new();
    for i in 0..k.eta.len() - 1 {
        let (t1, t2) = (k.theta(i, &k.t[i]), k.theta(i, &k.t[i + 1]));
        let a = signed_alpha(alpha, &t1, &t2);
        let spec = make_defined(&a, &t1, &t2)
            .map_err(|source| WitnessError::ExistenceViolation { function: name.into(), segment: i, source })?;
        segments.push(spec);
    }
    let n = k.eta.len() - 1;
    Ok(WitnessFunction {
        name: name.into(),
        alpha: alpha.clone(),
        breakpoints: k.eta.clone(),
        values: k.y.clone(),
        slopes: k.t.clone(),
        segments,
        left_tail: Tail {
            at: k.eta[0].clone(),
            value: k.y[0].clone(),
            slope: k.t[0].clone(),
            gamma: k.gamma_left.clone(),
            unbounded: k.left_ext.clone(),
        },
        right_tail: Tail {
            at: k.eta[n].clone(),
            value: k.y[n].clone(),
            slope: k.t[n].clone(),
            gamma: k.gamma_right.clone(),
            unbounded: k.right_ext.clone(),
        },
        cache: Default::default(),
    })
}

fn build_from(knots: &BTreeMap<String, Knots>, alpha: &Rat) -> Result<Witnesses, WitnessError> {
    knots.iter().map(|(f, k)| Ok((f.clone(), assemble(f, k, alpha)?))).collect()
}

/// Witness functions for every function variable of a branch.
pub fn build_witness(branch: &Branch, model: &NumericModel, alpha: &Rat) -> Result<Witnesses, WitnessError> {
    build_from(&skeleton(branch, model)?, alpha)
}

/// Outcome of checking one literal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiteralCheck {
    pub literal: String,
    pub pass: bool,
    /// Smallest slack seen; negative when violated.
    pub worst_margin: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<LiteralCheck>,
    pub stitch_residual: f64,
    /// The model was rationalized from decimals.
    pub approximate: bool,
    pub grid_n: usize,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.stitch_residual < STITCH_TOLERANCE
    }

    pub fn failures(&self) -> impl Iterator<Item = &LiteralCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

struct Margin {
    worst: f64,
    notes: Vec<String>,
    ok: bool,
}

impl Margin {
    fn new() -> Self {
        Margin { worst: f64::INFINITY, notes: Vec::new(), ok: true }
    }
    /// `x > 0` when strict, `x ≥ −tol·scale` otherwise.
    fn require(&mut self, x: f64, strict: bool, scale: f64, what: &str, at: f64) {
        self.worst = self.worst.min(x);
        let good = if strict { x > 0.0 } else { x >= -TOLERANCE * (1.0 + scale) };
        if !good && self.ok {
            self.notes.push(format!("{what} fails at {at}: {x:e}"));
        }
        self.ok &= good;
    }
    fn fail(&mut self, note: String) {
        self.ok = false;
        self.notes.push(note);
    }
    fn into_check(self, literal: String) -> LiteralCheck {
        LiteralCheck {
            literal,
            pass: self.ok,
            worst_margin: if self.worst.is_finite() { self.worst } else { 0.0 },
            note: self.notes.join("; "),
        }
    }
}

/// Sample points of a literal's interval: a uniform grid on every gap
/// between breakpoints plus probes into unbounded tails. Open finite ends
/// are excluded.
fn sample_points(ws: &[&WitnessFunction], lo: Option<f64>, hi: Option<f64>, lo_closed: bool, hi_closed: bool, grid_n: usize) -> Vec<f64> {
    let mut bps: Vec<f64> = ws.iter().flat_map(|w| w.compiled().eta.iter().copied()).collect();
    bps.extend(lo);
    bps.extend(hi);
    bps.retain(|&x| lo.map_or(true, |a| x >= a) && hi.map_or(true, |b| x <= b));
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let mut pts = Vec::new();
    if let (None, Some(&first)) = (lo, bps.first()) {
        pts.extend(TAIL_PROBES.iter().rev().map(|d| first - d));
    }
    for w in bps.windows(2) {
        for k in 0..grid_n {
            pts.push(w[0] + (w[1] - w[0]) * k as f64 / grid_n as f64);
        }
    }
    pts.extend(bps.last());
    if let (None, Some(&last)) = (hi, bps.last()) {
        pts.extend(TAIL_PROBES.iter().map(|d| last + d));
    }
    pts.retain(|&x| (lo_closed || lo != Some(x)) && (hi_closed || hi != Some(x)));
    pts
}

fn check_pred(
    f: &str,
    pred: &FnPred,
    ival: &Ival,
    ws: &Witnesses,
    knots: &BTreeMap<String, Knots>,
    tab: &VarTable,
    model: &NumericModel,
    grid_n: usize,
) -> Margin {
    let mut m = Margin::new();
    let end = |e: &End| e.as_var().map(|v| fl(&value(model, v)));
    let (lo, hi) = (end(&ival.lo), end(&ival.hi));
    if let (Some(a), Some(b)) = (lo, hi) {
        let (qa, qb) = (value(model, ival.lo.as_var().unwrap()), value(model, ival.hi.as_var().unwrap()));
        if qa > qb || (qa == qb && !(ival.lo_closed && ival.hi_closed)) {
            m.notes.push(format!("empty interval [{a}, {b}]"));
            return m;
        }
    }
    let wf = &ws[f];
    let other = match pred {
        FnPred::Eq(g) | FnPred::Gt(g) => Some(&ws[g]),
        _ => None,
    };
    let mut group = vec![wf];
    group.extend(other);
    let pts = sample_points(&group, lo, hi, ival.lo_closed, ival.hi_closed, grid_n);
    let fv: Vec<(f64, f64)> = pts.iter().map(|&x| wf.eval_both(x)).collect();
    let kf = &knots[f];
    let (k_lo, k_hi) = kf.range(tab, ival);
    match pred {
        FnPred::Eq(g) => {
            let wg = &ws[g];
            for (&x, &(v, d)) in pts.iter().zip(&fv) {
                let (u, e) = wg.eval_both(x);
                m.require(-(v - u).abs(), false, v.abs(), "value equality", x);
                m.require(-(d - e).abs(), false, d.abs(), "slope equality", x);
            }
        }
        FnPred::Gt(g) => {
            let wg = &ws[g];
            for (&x, &(v, _)) in pts.iter().zip(&fv) {
                m.require(v - wg.eval_both(x).0, true, 0.0, "f > g", x);
            }
        }
        FnPred::Deriv(c, y) => {
            let y = fl(&opnd(model, y));
            for (&x, &(_, d)) in pts.iter().zip(&fv) {
                let s = d.abs() + y.abs();
                match c {
                    Cmp::Gt => m.require(d - y, true, s, "D > bound", x),
                    Cmp::Ge => m.require(d - y, false, s, "D >= bound", x),
                    Cmp::Lt => m.require(y - d, true, s, "D < bound", x),
                    Cmp::Le => m.require(y - d, false, s, "D <= bound", x),
                    Cmp::Eq => m.require(-(d - y).abs(), false, s, "D = bound", x),
                    Cmp::Ne => m.require((d - y).abs(), true, s, "D != bound", x),
                }
            }
        }
        FnPred::StrictUp | FnPred::StrictDown => {
            let sg = if matches!(pred, FnPred::StrictUp) { 1.0 } else { -1.0 };
            for (&x, &(_, d)) in pts.iter().zip(&fv) {
                m.require(sg * d, false, d.abs(), "monotone slope", x);
            }
            for (w, p) in fv.windows(2).zip(pts.windows(2)) {
                m.require(sg * (w[1].0 - w[0].0), false, w[0].0.abs(), "monotone values", p[0]);
            }
            for i in k_lo..k_hi {
                let inc = &kf.y[i + 1] - &kf.y[i];
                if (sg > 0.0 && !inc.is_positive()) || (sg < 0.0 && !inc.is_negative()) {
                    m.fail(format!("breakpoint values {} -> {} not strictly monotone", kf.y[i], kf.y[i + 1]));
                }
            }
        }
        FnPred::Convex | FnPred::StrictConvex | FnPred::Concave | FnPred::StrictConcave => {
            let sg = if matches!(pred, FnPred::Convex | FnPred::StrictConvex) { 1.0 } else { -1.0 };
            for (w, p) in fv.windows(2).zip(pts.windows(2)) {
                m.require(sg * (w[1].1 - w[0].1), false, w[0].1.abs(), "slope monotonicity", p[0]);
                let mid = wf.eval_both((p[0] + p[1]) / 2.0).0;
                let chord = (w[0].0 + w[1].0) / 2.0;
                m.require(sg * (chord - mid), false, chord.abs(), "midpoint inequality", p[0]);
            }
            if matches!(pred, FnPred::StrictConvex | FnPred::StrictConcave) {
                strict_certificate(&mut m, wf, kf, k_lo, k_hi, ival, sg);
            }
        }
    }
    m
}

/// Strict curvature from the exact segment data: every elastic part is a
/// single-defined function of the right curvature, and every tail in range
/// bends the same way.
fn strict_certificate(m: &mut Margin, w: &WitnessFunction, k: &Knots, lo: usize, hi: usize, ival: &Ival, sg: f64) {
    let want = if sg > 0.0 { |q: &Rat| q.is_negative() } else { |q: &Rat| q.is_positive() };
    for (i, s) in w.segments.iter().enumerate().take(hi).skip(lo) {
        if s.kind != ElasticKind::Single || !want(&s.theta1) {
            m.fail(format!("segment {i} is not strictly curved (kind {:?}, θ1 = {})", s.kind, s.theta1));
        }
    }
    let bends = |slope: &Rat, gamma: &Rat| if sg > 0.0 { slope < gamma } else { slope > gamma };
    if ival.hi == End::PosInf && !bends(&k.t[k.t.len() - 1], &k.gamma_right) {
        m.fail("right tail is not strictly curved".into());
    }
    if ival.lo == End::NegInf && !bends(&k.gamma_left, &k.t[0]) {
        m.fail("left tail is not strictly curved".into());
    }
}

/// Checks every literal of a branch against the witnesses.
pub fn verify_witness(branch: &Branch, ws: &Witnesses, model: &NumericModel, grid_n: usize) -> Report {
    let tab = table(branch);
    let knots: BTreeMap<String, Knots> = ws.iter().map(|(f, w)| (f.clone(), w.knots())).collect();
    let mut checks = Vec::new();
    for lit in &branch.lits {
        let label = lit.to_string();
        let m = match lit {
            FlatLit::Pred { f, pred, ival, pos: true } => check_pred(f, pred, ival, ws, &knots, &tab, model, grid_n),
            FlatLit::Pred { pos: false, .. } => {
                let mut m = Margin::new();
                m.fail("negated function literal left in branch".into());
                m
            }
            FlatLit::App { z, f, x } | FlatLit::DApp { z, f, x } => {
                let mut m = Margin::new();
                let at = fl(&value(model, x));
                let (v, d) = ws[f].eval_both(at);
                let got = if matches!(lit, FlatLit::App { .. }) { v } else { d };
                let want = fl(&value(model, z));
                m.require(-(got - want).abs(), false, want.abs(), "application", at);
                m
            }
            _ => {
                let mut m = Margin::new();
                let t = flat_to_tarski(lit).expect("arithmetic literal");
                let ok = if model.exact {
                    eval_tarski(&t, model)
                } else {
                    eval_tarski_margin(&t, model, &crate::check::approximate_margin())
                };
                match ok {
                    Ok(true) => m.worst = 0.0,
                    Ok(false) => m.fail("false under the model".into()),
                    Err(e) => m.fail(e.to_string()),
                }
                m
            }
        };
        checks.push(m.into_check(label));
    }
    let stitch_residual = ws.values().map(WitnessFunction::stitch_residual).fold(0.0, f64::max);
    Report { checks, stitch_residual, approximate: !model.exact, grid_n }
}

#[derive(Clone, Debug)]
pub struct AlphaSearch {
    pub alpha: Rat,
    pub witnesses: Witnesses,
    pub report: Report,
    /// Values of alpha tried, the passing one included.
    pub iterations: usize,
    pub bound: AlphaBound,
}

/// Halves alpha from `sup(I)/2` until the witnesses pass every check.
pub fn search_alpha(branch: &Branch, model: &NumericModel, grid_n: usize) -> Result<AlphaSearch, WitnessError> {
    let knots = skeleton(branch, model)?;
    let bound = alpha_bound_from(branch, &knots, model);
    let mut alpha = if bound.is_trivial() { Rat::zero() } else { bound.sup() / rat(2, 1) };
    let tries = if bound.is_trivial() { 1 } else { MAX_HALVINGS };
    let mut last = None;
    for i in 1..=tries {
        let witnesses = build_from(&knots, &alpha)?;
        let report = verify_witness(branch, &witnesses, model, grid_n);
        if report.all_pass() {
            return Ok(AlphaSearch { alpha, witnesses, report, iterations: i, bound });
        }
        last = Some(report);
        if i < tries {
            alpha /= rat(2, 1);
        }
    }
    Err(WitnessError::AlphaSearchExhausted { alpha, iterations: tries, report: Box::new(last.unwrap()) })
}
