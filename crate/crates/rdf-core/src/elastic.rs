//! Elastic perturbations: single-, double- and special-defined functions on
//! `[0,1]` with prescribed end slopes.

use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::ast::{rat, rat_str, Rat};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElasticKind {
    Null,
    Single,
    Double,
    Special,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ElasticError {
    #[error("no defined function exists: {0}")]
    NoExistence(String),
    #[error("argument {0} outside [0,1]")]
    DomainError(f64),
}

/// `offset + Elastic[alpha,(d1,d2)](scale·x + shift)` on `[x0, x1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    #[serde(with = "rat_str")]
    pub x0: Rat,
    #[serde(with = "rat_str")]
    pub x1: Rat,
    #[serde(with = "rat_str")]
    pub scale: Rat,
    #[serde(with = "rat_str")]
    pub shift: Rat,
    #[serde(with = "rat_str")]
    pub alpha: Rat,
    #[serde(with = "rat_str")]
    pub d1: Rat,
    #[serde(with = "rat_str")]
    pub d2: Rat,
    #[serde(with = "rat_str")]
    pub offset: Rat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticSpec {
    pub kind: ElasticKind,
    #[serde(with = "rat_str")]
    pub alpha: Rat,
    #[serde(with = "rat_str")]
    pub theta1: Rat,
    #[serde(with = "rat_str")]
    pub theta2: Rat,
    /// Slope at `x = 1/2` for double and special functions.
    #[serde(with = "rat_str::option")]
    pub middle_slope: Option<Rat>,
    pub pieces: Vec<Piece>,
}

fn sgn(q: &Rat) -> i8 {
    if q.is_positive() {
        1
    } else if q.is_negative() {
        -1
    } else {
        0
    }
}

/// `(d1, d2)` of the single-[α,θ1,θ2]-defined function, or `None` for the
/// null function.
pub fn single_params(alpha: &Rat, theta1: &Rat, theta2: &Rat) -> Result<Option<(Rat, Rat)>, ElasticError> {
    if alpha.is_zero() && theta1.is_zero() && theta2.is_zero() {
        return Ok(None);
    }
    let no = |why: String| Err(ElasticError::NoExistence(format!("single-[{alpha},{theta1},{theta2}]: {why}")));
    if sgn(theta1) * sgn(theta2) >= 0 {
        return no("end slopes must have opposite signs".into());
    }
    let four_a = (alpha * rat(4, 1)).abs();
    if four_a.is_zero() || four_a > theta1.abs().min(theta2.abs()) {
        return no("need 0 < |4α| <= min(|θ1|, |θ2|)".into());
    }
    if sgn(alpha) != sgn(theta1) {
        return no("sign of α must match θ1".into());
    }
    let two_a = alpha * rat(2, 1);
    Ok(Some((theta1 / &two_a - rat(2, 1), -theta2 / &two_a - rat(2, 1))))
}

fn single_piece(alpha: &Rat, theta1: &Rat, theta2: &Rat, x0: Rat, x1: Rat, scale: Rat, shift: Rat, offset: Rat) -> Result<Piece, ElasticError> {
    let (d1, d2) = single_params(alpha, theta1, theta2)?.unwrap_or((Rat::zero(), Rat::zero()));
    Ok(Piece { x0, x1, scale, shift, alpha: alpha.clone(), d1, d2, offset })
}

fn null_piece(x0: Rat, x1: Rat) -> Piece {
    let z = Rat::zero();
    Piece { x0, x1, scale: rat(1, 1), shift: z.clone(), alpha: z.clone(), d1: z.clone(), d2: z.clone(), offset: z }
}

/// Pieces of the double-[α,θ1,θ2]-defined function evaluated at `x` (no
/// rescaling), restricted to `[lo, hi]`.
fn double_pieces(alpha: &Rat, theta1: &Rat, theta2: &Rat, lo: Rat, hi: Rat, offset: Rat) -> Result<Vec<Piece>, ElasticError> {
    let theta = -alpha * rat(4, 1);
    let half = rat(1, 2);
    let h = |q: &Rat| q * &half;
    let mut out = Vec::new();
    if lo < half {
        out.push(single_piece(&h(alpha), &h(theta1), &h(&theta), lo.clone(), half.clone().min(hi.clone()), rat(2, 1), Rat::zero(), offset.clone())?);
    }
    if hi > half {
        out.push(single_piece(&-h(alpha), &h(&theta), &h(theta2), half.clone().max(lo), hi, rat(2, 1), rat(-1, 1), offset)?);
    }
    Ok(out)
}

/// The [α,θ1,θ2]-defined function, its kind chosen by the signs of θ1, θ2.
pub fn make_defined(alpha: &Rat, theta1: &Rat, theta2: &Rat) -> Result<ElasticSpec, ElasticError> {
    let (s1, s2) = (sgn(theta1), sgn(theta2));
    let spec = |kind, middle_slope, pieces| ElasticSpec {
        kind,
        alpha: alpha.clone(),
        theta1: theta1.clone(),
        theta2: theta2.clone(),
        middle_slope,
        pieces,
    };
    let (zero, one) = (Rat::zero(), rat(1, 1));
    if s1 == 0 && s2 == 0 {
        if !alpha.is_zero() {
            return Err(ElasticError::NoExistence(format!("[{alpha},0,0]: null end slopes need α = 0")));
        }
        return Ok(spec(ElasticKind::Null, None, vec![null_piece(zero, one)]));
    }
    let four_a = (alpha * rat(4, 1)).abs();
    if s1 * s2 < 0 {
        let p = single_piece(alpha, theta1, theta2, zero.clone(), one.clone(), one, zero.clone(), zero)?;
        return Ok(spec(ElasticKind::Single, None, vec![p]));
    }
    if s1 * s2 > 0 {
        if four_a.is_zero() || four_a > theta1.abs().min(theta2.abs()) || sgn(alpha) != s1 {
            return Err(ElasticError::NoExistence(format!(
                "double-[{alpha},{theta1},{theta2}]: need 0 < |4α| <= min(|θ1|,|θ2|) and sgn α = sgn θ1"
            )));
        }
        let pieces = double_pieces(alpha, theta1, theta2, zero, one, Rat::zero())?;
        return Ok(spec(ElasticKind::Double, Some(-alpha * rat(4, 1)), pieces));
    }
    // exactly one end slope is zero
    let sum = theta1 + theta2;
    if four_a.is_zero() || four_a > sum.abs() || sgn(alpha) != sgn(&sum) {
        return Err(ElasticError::NoExistence(format!(
            "special-[{alpha},{theta1},{theta2}]: need 0 < |4α| <= |θ1+θ2| and sgn α = sgn(θ1+θ2)"
        )));
    }
    let (q1, q3) = (rat(1, 4), rat(3, 4));
    let half_a = alpha * rat(1, 2);
    let quarter_a = alpha * rat(1, 4);
    let mut pieces = Vec::new();
    if s1 == 0 {
        // flat start, double bump in the middle, single half-arch back to 0
        pieces.push(null_piece(zero, q1.clone()));
        pieces.extend(double_pieces(&half_a, theta2, theta2, q1, q3.clone(), -quarter_a)?);
        let t = theta2 * rat(1, 2);
        pieces.push(single_piece(&-&half_a, &-&t, &t, q3, one, rat(2, 1), rat(-1, 1), Rat::zero())?);
    } else {
        let t = theta1 * rat(1, 2);
        pieces.push(single_piece(&half_a, &t, &-&t, zero, q1.clone(), rat(2, 1), Rat::zero(), Rat::zero())?);
        pieces.extend(double_pieces(&half_a, theta1, theta1, q1, q3.clone(), quarter_a)?);
        pieces.push(null_piece(q3, one));
    }
    Ok(spec(ElasticKind::Special, Some(-alpha * rat(2, 1)), pieces))
}

fn f(q: &Rat) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// `Elastic[α,(d1,d2)](u)` in closed form.
pub fn elastic_value(alpha: f64, d1: f64, d2: f64, u: f64) -> f64 {
    let w = 2.0 * u - 1.0;
    if u <= 0.5 {
        alpha * (1.0 - w * w * (-2.0 * d1 * u).exp())
    } else {
        alpha * (1.0 - w * w * (-2.0 * d2 * (1.0 - u)).exp())
    }
}

/// Derivative of [`elastic_value`] in `u`.
pub fn elastic_deriv(alpha: f64, d1: f64, d2: f64, u: f64) -> f64 {
    let w = 2.0 * u - 1.0;
    if u <= 0.5 {
        2.0 * alpha * w * (d1 * w - 2.0) * (-2.0 * d1 * u).exp()
    } else {
        -2.0 * alpha * w * (d2 * w + 2.0) * (-2.0 * d2 * (1.0 - u)).exp()
    }
}

impl Piece {
    fn arg(&self, x: f64) -> f64 {
        (f(&self.scale) * x + f(&self.shift)).clamp(0.0, 1.0)
    }
    pub fn value(&self, x: f64) -> f64 {
        f(&self.offset) + elastic_value(f(&self.alpha), f(&self.d1), f(&self.d2), self.arg(x))
    }
    pub fn deriv(&self, x: f64) -> f64 {
        f(&self.scale) * elastic_deriv(f(&self.alpha), f(&self.d1), f(&self.d2), self.arg(x))
    }
}

impl ElasticSpec {
    fn piece(&self, x: f64) -> Result<&Piece, ElasticError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(ElasticError::DomainError(x));
        }
        Ok(self.pieces.iter().find(|p| x <= f(&p.x1)).unwrap_or_else(|| self.pieces.last().unwrap()))
    }

    /// Interior knots where pieces meet.
    pub fn knots(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| f(&p.x0)).collect()
    }

    /// Largest mismatch of value or slope between adjacent pieces at a knot.
    pub fn stitch_residual(&self) -> f64 {
        self.pieces
            .windows(2)
            .map(|w| {
                let x = f(&w[0].x1);
                (w[0].value(x) - w[1].value(x)).abs().max((w[0].deriv(x) - w[1].deriv(x)).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// An [`ElasticSpec`] with its parameters converted to `f64` once.
#[derive(Clone, Debug)]
pub struct CompiledElastic {
    pieces: Vec<[f64; 7]>,
}

impl CompiledElastic {
    fn piece(&self, x: f64) -> &[f64; 7] {
        self.pieces.iter().find(|p| x <= p[0]).unwrap_or_else(|| self.pieces.last().unwrap())
    }

    /// Value at `x`, clamped to `[0,1]`.
    pub fn value(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let [_, a, b, alpha, d1, d2, offset] = *self.piece(x);
        offset + elastic_value(alpha, d1, d2, (a * x + b).clamp(0.0, 1.0))
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let [_, a, b, alpha, d1, d2, _] = *self.piece(x);
        a * elastic_deriv(alpha, d1, d2, (a * x + b).clamp(0.0, 1.0))
    }
}

impl ElasticSpec {
    pub fn compile(&self) -> CompiledElastic {
        CompiledElastic {
            pieces: self
                .pieces
                .iter()
                .map(|p| [f(&p.x1), f(&p.scale), f(&p.shift), f(&p.alpha), f(&p.d1), f(&p.d2), f(&p.offset)])
                .collect(),
        }
    }
}

pub fn eval_elastic(spec: &ElasticSpec, x: f64) -> Result<f64, ElasticError> {
    Ok(spec.piece(x)?.value(x))
}

pub fn eval_elastic_deriv(spec: &ElasticSpec, x: f64) -> Result<f64, ElasticError> {
    Ok(spec.piece(x)?.deriv(x))
}
