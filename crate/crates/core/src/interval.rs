//! Extended-integer intervals and the symbolic lowering of a comparison
//! into necessary conditions on one of its variables.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::ir::{ArithExpr, BinOp, Builtin, CmpOp, Compare, Constant};

/// An integer or one of the two infinities. Variant order gives the total
/// order `NegInf < Fin(_) < PosInf`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtInt {
    NegInf,
    Fin(i64),
    PosInf,
}

impl ExtInt {
    pub fn finite(self) -> Option<i64> {
        match self {
            ExtInt::Fin(v) => Some(v),
            _ => None,
        }
    }

    fn neg(self) -> Wide {
        match self {
            ExtInt::NegInf => Wide::PosInf,
            ExtInt::PosInf => Wide::NegInf,
            ExtInt::Fin(v) => Wide::Fin(-(v as i128)),
        }
    }

    fn wide(self) -> Wide {
        match self {
            ExtInt::NegInf => Wide::NegInf,
            ExtInt::PosInf => Wide::PosInf,
            ExtInt::Fin(v) => Wide::Fin(v as i128),
        }
    }
}

impl fmt::Display for ExtInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtInt::NegInf => f.write_str("-inf"),
            ExtInt::PosInf => f.write_str("+inf"),
            ExtInt::Fin(v) => write!(f, "{v}"),
        }
    }
}

/// Endpoint arithmetic carried out in i128 so that finite results are exact
/// before saturation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Wide {
    NegInf,
    Fin(i128),
    PosInf,
}

impl Wide {
    fn add(self, o: Wide) -> Wide {
        match (self, o) {
            (Wide::Fin(a), Wide::Fin(b)) => Wide::Fin(a + b),
            (Wide::NegInf, Wide::PosInf) | (Wide::PosInf, Wide::NegInf) => {
                unreachable!("lower endpoints are never +inf and upper never -inf")
            }
            (Wide::Fin(_), inf) | (inf, _) => inf,
        }
    }

    fn mul(self, o: Wide) -> Wide {
        let sign = |w: Wide| match w {
            Wide::NegInf => -1,
            Wide::PosInf => 1,
            Wide::Fin(v) => v.signum() as i32,
        };
        match (self, o) {
            (Wide::Fin(a), Wide::Fin(b)) => Wide::Fin(a * b),
            _ => match sign(self) * sign(o) {
                0 => Wide::Fin(0),
                s if s > 0 => Wide::PosInf,
                _ => Wide::NegInf,
            },
        }
    }

    /// Saturates a lower endpoint: values above i64 clamp down (still a
    /// valid lower bound), values below become -inf.
    fn to_lo(self, widened: &mut bool) -> ExtInt {
        match self {
            Wide::Fin(v) if v > i64::MAX as i128 => {
                *widened = true;
                ExtInt::Fin(i64::MAX)
            }
            Wide::Fin(v) if v < i64::MIN as i128 => {
                *widened = true;
                ExtInt::NegInf
            }
            Wide::Fin(v) => ExtInt::Fin(v as i64),
            Wide::NegInf => ExtInt::NegInf,
            Wide::PosInf => unreachable!("lower endpoint +inf"),
        }
    }

    fn to_hi(self, widened: &mut bool) -> ExtInt {
        match self {
            Wide::Fin(v) if v < i64::MIN as i128 => {
                *widened = true;
                ExtInt::Fin(i64::MIN)
            }
            Wide::Fin(v) if v > i64::MAX as i128 => {
                *widened = true;
                ExtInt::PosInf
            }
            Wide::Fin(v) => ExtInt::Fin(v as i64),
            Wide::PosInf => ExtInt::PosInf,
            Wide::NegInf => unreachable!("upper endpoint -inf"),
        }
    }
}

/// Closed interval; `lo` is never `+inf` and `hi` never `-inf` unless the
/// interval is `EMPTY`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: ExtInt,
    pub hi: ExtInt,
}

impl Interval {
    pub const EMPTY: Interval = Interval {
        lo: ExtInt::PosInf,
        hi: ExtInt::NegInf,
    };
    pub const TOP: Interval = Interval {
        lo: ExtInt::NegInf,
        hi: ExtInt::PosInf,
    };

    /// `[lo, hi]`, or `EMPTY` when `lo > hi`.
    pub fn new(lo: ExtInt, hi: ExtInt) -> Interval {
        if lo > hi || lo == ExtInt::PosInf || hi == ExtInt::NegInf {
            Interval::EMPTY
        } else {
            Interval { lo, hi }
        }
    }

    pub fn finite(lo: i64, hi: i64) -> Interval {
        Interval::new(ExtInt::Fin(lo), ExtInt::Fin(hi))
    }

    pub fn point(v: i64) -> Interval {
        Interval::finite(v, v)
    }

    pub fn at_least(lo: i64) -> Interval {
        Interval::new(ExtInt::Fin(lo), ExtInt::PosInf)
    }

    pub fn at_most(hi: i64) -> Interval {
        Interval::new(ExtInt::NegInf, ExtInt::Fin(hi))
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= ExtInt::Fin(v) && ExtInt::Fin(v) <= self.hi
    }

    pub fn intersect(&self, o: &Interval) -> Interval {
        Interval::new(self.lo.max(o.lo), self.hi.min(o.hi))
    }

    pub fn hull(&self, o: &Interval) -> Interval {
        if self.is_empty() {
            return *o;
        }
        if o.is_empty() {
            return *self;
        }
        Interval {
            lo: self.lo.min(o.lo),
            hi: self.hi.max(o.hi),
        }
    }

    fn from_wide(lo: Wide, hi: Wide, widened: &mut bool) -> Interval {
        Interval {
            lo: lo.to_lo(widened),
            hi: hi.to_hi(widened),
        }
    }

    pub fn add_w(&self, o: &Interval, widened: &mut bool) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        Interval::from_wide(
            self.lo.wide().add(o.lo.wide()),
            self.hi.wide().add(o.hi.wide()),
            widened,
        )
    }

    pub fn sub_w(&self, o: &Interval, widened: &mut bool) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        Interval::from_wide(
            self.lo.wide().add(o.hi.neg()),
            self.hi.wide().add(o.lo.neg()),
            widened,
        )
    }

    pub fn mul_w(&self, o: &Interval, widened: &mut bool) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        let c = [
            self.lo.wide().mul(o.lo.wide()),
            self.lo.wide().mul(o.hi.wide()),
            self.hi.wide().mul(o.lo.wide()),
            self.hi.wide().mul(o.hi.wide()),
        ];
        let lo = *c.iter().min().unwrap();
        let hi = *c.iter().max().unwrap();
        Interval::from_wide(lo, hi, widened)
    }

    pub fn min(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        Interval {
            lo: self.lo.min(o.lo),
            hi: self.hi.min(o.hi),
        }
    }

    pub fn max(&self, o: &Interval) -> Interval {
        if self.is_empty() || o.is_empty() {
            return Interval::EMPTY;
        }
        Interval {
            lo: self.lo.max(o.lo),
            hi: self.hi.max(o.hi),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("EMPTY");
        }
        let open_l = if self.lo == ExtInt::NegInf { "(" } else { "[" };
        let open_r = if self.hi == ExtInt::PosInf { ")" } else { "]" };
        write!(f, "{open_l}{},{}{open_r}", self.lo, self.hi)
    }
}

pub fn interval_add(a: Interval, b: Interval) -> Interval {
    a.add_w(&b, &mut false)
}

pub fn interval_sub(a: Interval, b: Interval) -> Interval {
    a.sub_w(&b, &mut false)
}

pub fn interval_mul(a: Interval, b: Interval) -> Interval {
    a.mul_w(&b, &mut false)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalEval {
    pub value: Interval,
    /// Some endpoint left the i64 range and was widened.
    pub widened: bool,
    /// Variables or lookups missing from the environment (taken as TOP).
    pub unknown: Vec<String>,
}

/// Sound enclosure of `expr`. Variables are looked up by name, lookups by
/// their printed form (`ub_e[]`).
pub fn eval_interval(expr: &ArithExpr, env: &BTreeMap<String, Interval>) -> IntervalEval {
    let mut out = IntervalEval {
        value: Interval::TOP,
        widened: false,
        unknown: Vec::new(),
    };
    out.value = eval_rec(expr, env, &mut out.widened, &mut out.unknown);
    out
}

fn eval_rec(
    e: &ArithExpr,
    env: &BTreeMap<String, Interval>,
    widened: &mut bool,
    unknown: &mut Vec<String>,
) -> Interval {
    let mut get = |key: String| match env.get(&key) {
        Some(i) => *i,
        None => {
            if !unknown.contains(&key) {
                unknown.push(key);
            }
            Interval::TOP
        }
    };
    match e {
        ArithExpr::Const(Constant::Int(v)) => Interval::point(*v),
        ArithExpr::Const(_) => Interval::TOP,
        ArithExpr::Var(v) => get(v.clone()),
        ArithExpr::Lookup(..) => get(e.to_string()),
        ArithExpr::Bin(op, l, r) => {
            let a = eval_rec(l, env, widened, unknown);
            let b = eval_rec(r, env, widened, unknown);
            match op {
                BinOp::Add => a.add_w(&b, widened),
                BinOp::Sub => a.sub_w(&b, widened),
                BinOp::Mul => a.mul_w(&b, widened),
            }
        }
        ArithExpr::Builtin(f, l, r) => {
            let a = eval_rec(l, env, widened, unknown);
            let b = eval_rec(r, env, widened, unknown);
            match f {
                Builtin::Min => a.min(&b),
                Builtin::Max => a.max(&b),
            }
        }
    }
}

/// Point value of a ground expression; `leaf` resolves variables and
/// lookups (by printed form). `None` on a missing leaf or overflow.
pub fn eval_point(
    expr: &ArithExpr,
    leaf: &mut impl FnMut(&ArithExpr) -> Option<i64>,
) -> Option<i64> {
    match expr {
        ArithExpr::Const(c) => c.as_int(),
        ArithExpr::Var(_) | ArithExpr::Lookup(..) => leaf(expr),
        ArithExpr::Bin(op, l, r) => {
            let (a, b) = (eval_point(l, leaf)?, eval_point(r, leaf)?);
            match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
            }
        }
        ArithExpr::Builtin(f, l, r) => {
            let (a, b) = (eval_point(l, leaf)?, eval_point(r, leaf)?);
            Some(match f {
                Builtin::Min => a.min(b),
                Builtin::Max => a.max(b),
            })
        }
    }
}

/// Symbolic enclosure of an expression: `None` stands for the matching
/// infinity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundExprPair {
    pub lo: Option<ArithExpr>,
    pub hi: Option<ArithExpr>,
}

impl BoundExprPair {
    pub fn new(lo: Option<ArithExpr>, hi: Option<ArithExpr>) -> Self {
        BoundExprPair { lo, hi }
    }

    pub fn point(e: ArithExpr) -> Self {
        BoundExprPair {
            lo: Some(e.clone()),
            hi: Some(e),
        }
    }

    pub fn unbounded() -> Self {
        BoundExprPair { lo: None, hi: None }
    }

    /// Bounds given by the lookups `lb[]` and `ub[]`.
    pub fn named(lb: &str, ub: &str) -> Self {
        BoundExprPair {
            lo: Some(ArithExpr::singleton(lb)),
            hi: Some(ArithExpr::singleton(ub)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("UnboundedOther: no bounds known for `{0}`")]
pub struct UnboundedOther(pub String);

/// Inputs shared by the symbolic bound builders.
pub struct BoundEnv<'a> {
    /// Variable kept symbolic as a point, if any.
    pub target: Option<&'a str>,
    pub bounds: &'a BTreeMap<String, BoundExprPair>,
    /// Variables statically known to be nonnegative.
    pub nonneg: &'a BTreeMap<String, bool>,
    /// Use the simplified form for products of nonnegative factors.
    pub monotone: bool,
}

struct Sym {
    lo: Option<ArithExpr>,
    hi: Option<ArithExpr>,
    point: bool,
    nonneg: bool,
}

impl Sym {
    fn point(e: ArithExpr, nonneg: bool) -> Sym {
        Sym {
            lo: Some(e.clone()),
            hi: Some(e),
            point: true,
            nonneg,
        }
    }
}

fn both(
    a: &Option<ArithExpr>,
    b: &Option<ArithExpr>,
    f: fn(ArithExpr, ArithExpr) -> ArithExpr,
) -> Option<ArithExpr> {
    Some(f(a.clone()?, b.clone()?))
}

/// `f` of the present arguments; `None` only if both are absent.
fn either(
    a: &Option<ArithExpr>,
    b: &Option<ArithExpr>,
    f: fn(ArithExpr, ArithExpr) -> ArithExpr,
) -> Option<ArithExpr> {
    match (a, b) {
        (Some(a), Some(b)) => Some(f(a.clone(), b.clone())),
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (None, None) => None,
    }
}

fn fold(
    items: Vec<Option<ArithExpr>>,
    f: fn(ArithExpr, ArithExpr) -> ArithExpr,
) -> Option<ArithExpr> {
    let mut it = items.into_iter();
    let first = it.next()??;
    it.try_fold(first, |acc, x| Some(f(acc, x?)))
}

fn sym(e: &ArithExpr, env: &BoundEnv<'_>) -> Result<Sym, UnboundedOther> {
    if e.is_ground() {
        let nonneg = e.as_int().is_some_and(|v| v >= 0);
        return Ok(Sym::point(e.clone(), nonneg));
    }
    Ok(match e {
        ArithExpr::Var(v) => {
            let nonneg = env.nonneg.get(v).copied().unwrap_or(false);
            if Some(v.as_str()) == env.target {
                Sym::point(e.clone(), nonneg)
            } else {
                let b = env.bounds.get(v).ok_or_else(|| UnboundedOther(v.clone()))?;
                let point = b.lo.is_some() && b.lo == b.hi;
                Sym {
                    lo: b.lo.clone(),
                    hi: b.hi.clone(),
                    point,
                    nonneg,
                }
            }
        }
        ArithExpr::Const(_) => unreachable!("constants are ground"),
        ArithExpr::Lookup(_, keys) => {
            for k in keys {
                sym(k, env)?;
            }
            Sym {
                lo: None,
                hi: None,
                point: false,
                nonneg: false,
            }
        }
        ArithExpr::Bin(op, l, r) => {
            let (a, b) = (sym(l, env)?, sym(r, env)?);
            if a.point && b.point {
                let (x, y) = (a.lo.unwrap(), b.lo.unwrap());
                let nonneg = match op {
                    BinOp::Add | BinOp::Mul => a.nonneg && b.nonneg,
                    BinOp::Sub => false,
                };
                return Ok(Sym::point(ArithExpr::bin(*op, x, y), nonneg));
            }
            match op {
                BinOp::Add => Sym {
                    lo: both(&a.lo, &b.lo, ArithExpr::add),
                    hi: both(&a.hi, &b.hi, ArithExpr::add),
                    point: false,
                    nonneg: a.nonneg && b.nonneg,
                },
                BinOp::Sub => Sym {
                    lo: both(&a.lo, &b.hi, ArithExpr::sub),
                    hi: both(&a.hi, &b.lo, ArithExpr::sub),
                    point: false,
                    nonneg: false,
                },
                BinOp::Mul => mul(a, b, env.monotone),
            }
        }
        ArithExpr::Builtin(f, l, r) => {
            let (a, b) = (sym(l, env)?, sym(r, env)?);
            match f {
                Builtin::Min => {
                    if a.point && b.point {
                        return Ok(Sym::point(
                            ArithExpr::min(a.lo.unwrap(), b.lo.unwrap()),
                            a.nonneg && b.nonneg,
                        ));
                    }
                    Sym {
                        lo: both(&a.lo, &b.lo, ArithExpr::min),
                        hi: either(&a.hi, &b.hi, ArithExpr::min),
                        point: false,
                        nonneg: a.nonneg && b.nonneg,
                    }
                }
                Builtin::Max => {
                    if a.point && b.point {
                        return Ok(Sym::point(
                            ArithExpr::max(a.lo.unwrap(), b.lo.unwrap()),
                            a.nonneg || b.nonneg,
                        ));
                    }
                    Sym {
                        lo: either(&a.lo, &b.lo, ArithExpr::max),
                        hi: both(&a.hi, &b.hi, ArithExpr::max),
                        point: false,
                        nonneg: a.nonneg || b.nonneg,
                    }
                }
            }
        }
    })
}

fn mul(a: Sym, b: Sym, monotone: bool) -> Sym {
    let nonneg = a.nonneg && b.nonneg;
    if monotone && nonneg {
        return Sym {
            lo: both(&a.lo, &b.lo, ArithExpr::mul),
            hi: both(&a.hi, &b.hi, ArithExpr::mul),
            point: false,
            nonneg,
        };
    }
    let p = |x: &Option<ArithExpr>, y: &Option<ArithExpr>| both(x, y, ArithExpr::mul);
    let cands: Vec<Option<ArithExpr>> = if a.point {
        alloc::vec![p(&a.lo, &b.lo), p(&a.lo, &b.hi)]
    } else if b.point {
        alloc::vec![p(&a.lo, &b.lo), p(&a.hi, &b.lo)]
    } else {
        alloc::vec![
            p(&a.lo, &b.lo),
            p(&a.lo, &b.hi),
            p(&a.hi, &b.lo),
            p(&a.hi, &b.hi)
        ]
    };
    let (lo, hi) = if cands.len() == 4 {
        let [c0, c1, c2, c3]: [Option<ArithExpr>; 4] = cands.try_into().unwrap();
        let pair = |x: &Option<ArithExpr>, y: &Option<ArithExpr>, f| both(x, y, f);
        (
            pair(
                &pair(&c0, &c1, ArithExpr::min),
                &pair(&c2, &c3, ArithExpr::min),
                ArithExpr::min,
            ),
            pair(
                &pair(&c0, &c1, ArithExpr::max),
                &pair(&c2, &c3, ArithExpr::max),
                ArithExpr::max,
            ),
        )
    } else {
        (
            fold(cands.clone(), ArithExpr::min),
            fold(cands, ArithExpr::max),
        )
    };
    Sym {
        lo,
        hi,
        point: false,
        nonneg,
    }
}

/// Symbolic lower/upper expressions for `e`; the target stays a point and
/// every other variable is replaced by its bounds.
pub fn symbolic_bounds(e: &ArithExpr, env: &BoundEnv<'_>) -> Result<BoundExprPair, UnboundedOther> {
    let s = sym(e, env)?;
    Ok(BoundExprPair { lo: s.lo, hi: s.hi })
}

/// Necessary conditions on `target` implied by `cmp` when every other
/// variable lies within its bounds. Conditions with an infinite side are
/// trivially true and omitted.
pub fn lower_constraint(
    cmp: &Compare,
    target: &str,
    bounds: &BTreeMap<String, BoundExprPair>,
    nonneg: &BTreeMap<String, bool>,
) -> Result<Vec<Compare>, UnboundedOther> {
    lower_constraint_with(
        cmp,
        &BoundEnv {
            target: Some(target),
            bounds,
            nonneg,
            monotone: true,
        },
    )
}

pub fn lower_constraint_with(
    cmp: &Compare,
    env: &BoundEnv<'_>,
) -> Result<Vec<Compare>, UnboundedOther> {
    // Every other variable must have bounds even if it ends up unused.
    for v in cmp.vars() {
        if Some(v) != env.target && !env.bounds.contains_key(v) {
            return Err(UnboundedOther(v.to_string()));
        }
    }
    let (l, r) = (&cmp.lhs, &cmp.rhs);
    // (small side, strict, big side)
    let parts: Vec<(&ArithExpr, bool, &ArithExpr)> = match cmp.op {
        CmpOp::Eq => alloc::vec![(l, false, r), (r, false, l)],
        CmpOp::Le => alloc::vec![(l, false, r)],
        CmpOp::Lt => alloc::vec![(l, true, r)],
        CmpOp::Ge => alloc::vec![(r, false, l)],
        CmpOp::Gt => alloc::vec![(r, true, l)],
        CmpOp::Ne => Vec::new(),
    };
    let mut out = Vec::new();
    for (small, strict, big) in parts {
        let lo = symbolic_bounds(small, env)?.lo;
        let hi = symbolic_bounds(big, env)?.hi;
        let (Some(lo), Some(hi)) = (lo, hi) else {
            continue;
        };
        let op = if strict { CmpOp::Lt } else { CmpOp::Le };
        if let (Some(a), Some(b)) = (lo.as_int(), hi.as_int()) {
            if op.holds(&a, &b) {
                continue;
            }
        }
        out.push(Compare::new(lo, op, hi));
    }
    Ok(out)
}

/// Values of `var` allowed by comparing it with a constant.
pub fn constant_bound(cmp: &Compare, var: &str) -> Option<Interval> {
    let (op, k) = match (&cmp.lhs, &cmp.rhs) {
        (ArithExpr::Var(v), rhs) if v == var => (cmp.op, rhs.as_int()?),
        (lhs, ArithExpr::Var(v)) if v == var => (crate::schema::flip(cmp.op), lhs.as_int()?),
        _ => return None,
    };
    Some(match op {
        CmpOp::Le => Interval::at_most(k),
        CmpOp::Lt => Interval::at_most(k.checked_sub(1)?),
        CmpOp::Ge => Interval::at_least(k),
        CmpOp::Gt => Interval::at_least(k.checked_add(1)?),
        CmpOp::Eq => Interval::point(k),
        CmpOp::Ne => return None,
    })
}
