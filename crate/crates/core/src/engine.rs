//! Stratified semi-naive bottom-up evaluation with min/max aggregates,
//! functional predicates and integer arithmetic.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::hash::BuildHasher;
use core::ops::Range;

use hashbrown::{HashMap, HashTable};
use rustc_hash::FxBuildHasher;
use thiserror::Error;

use crate::analysis::{plan_program, safety_order, safety_order_agg, StratumPlan};
use crate::ir::*;
use crate::schema::Schema;
use crate::validate::validate;

type FxMap<K, V> = HashMap<K, V, FxBuildHasher>;

/// A stored constant. Strings and entity types are interned per database.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Str(u32),
    Entity(u32, u32),
}

pub type Tuple = Box<[Value]>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Limit {
    Iterations,
    Tuples,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("Overflow: integer overflow in clause {clause}")]
    Overflow { clause: usize },
    #[error("FunctionalDependencyError: {pred}[{keys}] has two values")]
    FunctionalDependency { pred: String, keys: String },
    #[error("LimitExceeded({0:?})")]
    LimitExceeded(Limit),
    #[error("UnknownPredicate({0})")]
    UnknownPredicate(String),
    #[error("ArityMismatch({pred}: expected {expected}, found {found})")]
    ArityMismatch {
        pred: String,
        expected: usize,
        found: usize,
    },
    #[error("program cannot be evaluated: {0}")]
    Program(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Per stratum.
    pub max_iterations: u64,
    /// Over all relations.
    pub max_tuples: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_iterations: 1_000_000,
            max_tuples: 100_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EvalOptions {
    pub limits: Limits,
    /// Monotonic nanoseconds, for per-stratum timing.
    pub clock: Option<fn() -> u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RuleStats {
    /// Candidate tuples tried against body atoms.
    pub instantiations: u64,
    pub derived: u64,
    pub duplicates: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StratumStats {
    pub preds: Vec<String>,
    pub iterations: u64,
    pub nanos: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EvalStats {
    /// Keyed by clause index.
    pub rules: BTreeMap<usize, RuleStats>,
    pub strata: Vec<StratumStats>,
}

impl EvalStats {
    pub fn instantiations(&self) -> u64 {
        self.rules.values().map(|r| r.instantiations).sum()
    }

    pub fn derived(&self) -> u64 {
        self.rules.values().map(|r| r.derived).sum()
    }

    pub fn duplicates(&self) -> u64 {
        self.rules.values().map(|r| r.duplicates).sum()
    }
}

fn hash_values(v: &[Value]) -> u64 {
    FxBuildHasher.hash_one(v)
}

#[derive(Clone, Debug)]
struct Index {
    cols: Vec<usize>,
    map: FxMap<Tuple, Vec<u32>>,
}

impl Index {
    fn add(&mut self, t: &[Value], idx: u32) {
        let key: Tuple = self.cols.iter().map(|&c| t[c]).collect();
        self.map.entry(key).or_default().push(idx);
    }
}

/// Deduplicated tuple store in insertion order.
#[derive(Clone, Debug)]
pub struct Relation {
    arity: usize,
    key_arity: Option<usize>,
    tuples: Vec<Tuple>,
    set: HashTable<u32>,
    fd: HashTable<u32>,
    indexes: Vec<Index>,
}

impl Relation {
    pub fn new(arity: usize, key_arity: Option<usize>) -> Self {
        Relation {
            arity,
            key_arity,
            tuples: Vec::new(),
            set: HashTable::new(),
            fd: HashTable::new(),
            indexes: Vec::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn key_arity(&self) -> Option<usize> {
        self.key_arity
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn contains(&self, t: &[Value]) -> bool {
        let tuples = &self.tuples;
        self.set
            .find(hash_values(t), |&i| &*tuples[i as usize] == t)
            .is_some()
    }

    /// Value stored under `keys` for a functional relation.
    pub fn get(&self, keys: &[Value]) -> Option<Value> {
        let k = self.key_arity?;
        let tuples = &self.tuples;
        self.fd
            .find(hash_values(keys), |&i| &tuples[i as usize][..k] == keys)
            .map(|&i| tuples[i as usize][k])
    }

    /// `Ok(false)` for a duplicate; `Err(())` if a functional key already
    /// maps to another value.
    pub fn insert(&mut self, t: Tuple) -> Result<bool, ()> {
        debug_assert_eq!(t.len(), self.arity);
        if self.contains(&t) {
            return Ok(false);
        }
        if let Some(k) = self.key_arity {
            if self.get(&t[..k]).is_some() {
                return Err(());
            }
        }
        let idx = self.tuples.len() as u32;
        let tuples = &self.tuples;
        self.set
            .insert_unique(hash_values(&t), idx, |&i| hash_values(&tuples[i as usize]));
        if let Some(k) = self.key_arity {
            self.fd.insert_unique(hash_values(&t[..k]), idx, |&i| {
                hash_values(&tuples[i as usize][..k])
            });
        }
        for ix in &mut self.indexes {
            ix.add(&t, idx);
        }
        self.tuples.push(t);
        Ok(true)
    }

    fn set_key_arity(&mut self, key_arity: Option<usize>) -> Result<(), Tuple> {
        if self.key_arity == key_arity {
            return Ok(());
        }
        self.key_arity = key_arity;
        self.fd = HashTable::new();
        if let Some(k) = key_arity {
            for (i, t) in self.tuples.iter().enumerate() {
                let tuples = &self.tuples;
                let h = hash_values(&t[..k]);
                if self
                    .fd
                    .find(h, |&j| tuples[j as usize][..k] == t[..k])
                    .is_some()
                {
                    return Err(t.clone());
                }
                self.fd
                    .insert_unique(h, i as u32, |&j| hash_values(&tuples[j as usize][..k]));
            }
        }
        Ok(())
    }

    fn index_on(&mut self, cols: &[usize]) -> usize {
        if let Some(i) = self.indexes.iter().position(|ix| ix.cols == cols) {
            return i;
        }
        let mut ix = Index {
            cols: cols.to_vec(),
            map: FxMap::default(),
        };
        for (i, t) in self.tuples.iter().enumerate() {
            ix.add(t, i as u32);
        }
        self.indexes.push(ix);
        self.indexes.len() - 1
    }

    fn probe(&self, index: usize, key: &[Value]) -> &[u32] {
        self.indexes[index].map.get(key).map_or(&[], Vec::as_slice)
    }
}

#[derive(Clone, Debug, Default)]
struct Interner {
    names: Vec<String>,
    ids: FxMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&i) = self.ids.get(s) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(s.to_string());
        self.ids.insert(s.to_string(), i);
        i
    }

    fn resolve(&self, i: u32) -> &str {
        &self.names[i as usize]
    }
}

/// Relations keyed by predicate name, plus interned strings and entity
/// labels.
#[derive(Clone, Debug, Default)]
pub struct Database {
    strings: Interner,
    rels: Vec<Relation>,
    ids: BTreeMap<String, usize>,
    labels: FxMap<(u32, u32), String>,
    entities: FxMap<(u32, String), u32>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates (or checks) the relation for `pred`.
    pub fn declare(
        &mut self,
        pred: &str,
        arity: usize,
        key_arity: Option<usize>,
    ) -> Result<(), EvalError> {
        let id = self.rel_id(pred, arity)?;
        self.rels[id]
            .set_key_arity(key_arity)
            .map_err(|t| EvalError::FunctionalDependency {
                pred: pred.to_string(),
                keys: self.render_values(&t[..key_arity.unwrap_or(0)]),
            })
    }

    fn rel_id(&mut self, pred: &str, arity: usize) -> Result<usize, EvalError> {
        if let Some(&id) = self.ids.get(pred) {
            let expected = self.rels[id].arity;
            if expected != arity {
                return Err(EvalError::ArityMismatch {
                    pred: pred.to_string(),
                    expected,
                    found: arity,
                });
            }
            return Ok(id);
        }
        self.rels.push(Relation::new(arity, None));
        self.ids.insert(pred.to_string(), self.rels.len() - 1);
        Ok(self.rels.len() - 1)
    }

    pub fn insert(&mut self, pred: &str, tuple: &[Constant]) -> Result<bool, EvalError> {
        let t: Tuple = tuple.iter().map(|c| self.value(c)).collect();
        let id = self.rel_id(pred, t.len())?;
        self.insert_values(id, t)
    }

    fn insert_values(&mut self, id: usize, t: Tuple) -> Result<bool, EvalError> {
        let k = self.rels[id].key_arity.unwrap_or(0);
        match self.rels[id].insert(t.clone()) {
            Ok(new) => Ok(new),
            Err(()) => Err(EvalError::FunctionalDependency {
                pred: self.pred_name(id).to_string(),
                keys: self.render_values(&t[..k]),
            }),
        }
    }

    fn pred_name(&self, id: usize) -> &str {
        self.ids
            .iter()
            .find(|(_, &i)| i == id)
            .map_or("?", |(n, _)| n.as_str())
    }

    /// The entity of type `ty` labelled `label`, created (and added to the
    /// entity predicate) on first use.
    pub fn entity(&mut self, ty: &str, label: &str) -> Constant {
        let t = self.strings.intern(ty);
        let id = match self.entities.get(&(t, label.to_string())) {
            Some(&id) => id,
            None => {
                let id = self.entities.keys().filter(|(tt, _)| *tt == t).count() as u32;
                self.entities.insert((t, label.to_string()), id);
                self.labels.insert((t, id), label.to_string());
                let rel = self.rel_id(ty, 1).expect("entity predicates are unary");
                let _ = self.rels[rel].insert(Box::new([Value::Entity(t, id)]));
                id
            }
        };
        Constant::Entity(EntityId {
            ty: ty.to_string(),
            id,
        })
    }

    pub fn label(&self, e: &EntityId) -> Option<&str> {
        let t = *self.strings.ids.get(e.ty.as_str())?;
        self.labels.get(&(t, e.id)).map(String::as_str)
    }

    pub fn relation(&self, pred: &str) -> Option<&Relation> {
        self.ids.get(pred).map(|&i| &self.rels[i])
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.ids.keys().map(String::as_str)
    }

    pub fn len(&self, pred: &str) -> usize {
        self.relation(pred).map_or(0, Relation::len)
    }

    pub fn total_tuples(&self) -> usize {
        self.rels.iter().map(Relation::len).sum()
    }

    pub fn value(&mut self, c: &Constant) -> Value {
        match c {
            Constant::Int(v) => Value::Int(*v),
            Constant::Str(s) => Value::Str(self.strings.intern(s)),
            Constant::Entity(e) => Value::Entity(self.strings.intern(&e.ty), e.id),
        }
    }

    pub fn constant(&self, v: Value) -> Constant {
        match v {
            Value::Int(i) => Constant::Int(i),
            Value::Str(s) => Constant::Str(self.strings.resolve(s).to_string()),
            Value::Entity(t, id) => Constant::Entity(EntityId {
                ty: self.strings.resolve(t).to_string(),
                id,
            }),
        }
    }

    /// Plain text of a constant: strings unquoted, entities by label.
    pub fn render(&self, c: &Constant) -> String {
        match c {
            Constant::Int(v) => v.to_string(),
            Constant::Str(s) => s.clone(),
            Constant::Entity(e) => self
                .label(e)
                .map_or_else(|| format!("#{}:{}", e.ty, e.id), str::to_string),
        }
    }

    fn render_values(&self, vs: &[Value]) -> String {
        vs.iter()
            .map(|v| self.render(&self.constant(*v)))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Value of `pred[keys]` if present.
    pub fn lookup(&self, pred: &str, keys: &[Constant]) -> Option<Constant> {
        let rel = self.relation(pred)?;
        let mut ks = Vec::with_capacity(keys.len());
        for k in keys {
            ks.push(match k {
                Constant::Int(v) => Value::Int(*v),
                Constant::Str(s) => Value::Str(*self.strings.ids.get(s.as_str())?),
                Constant::Entity(e) => Value::Entity(*self.strings.ids.get(e.ty.as_str())?, e.id),
            });
        }
        rel.get(&ks).map(|v| self.constant(v))
    }
}

/// Tuples of `pred` in lexicographic order.
pub fn query(db: &Database, pred: &str) -> Result<Vec<Vec<Constant>>, EvalError> {
    let rel = db
        .relation(pred)
        .ok_or_else(|| EvalError::UnknownPredicate(pred.to_string()))?;
    let mut out: Vec<Vec<Constant>> = rel
        .tuples
        .iter()
        .map(|t| t.iter().map(|v| db.constant(*v)).collect())
        .collect();
    out.sort();
    Ok(out)
}

#[derive(Clone, Debug)]
enum Slot {
    Const(Value),
    Check(usize),
    Bind(usize),
    Any,
}

#[derive(Clone, Debug)]
enum Expr {
    Const(Value),
    Reg(usize),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Builtin(Builtin, Box<Expr>, Box<Expr>),
    Lookup(usize, Vec<Expr>),
}

#[derive(Clone, Debug)]
enum Step {
    Scan {
        rel: usize,
        slots: Vec<Slot>,
        key: Vec<usize>,
        index: usize,
    },
    Test(Expr, CmpOp, Expr),
    Assign(usize, Expr),
}

#[derive(Clone, Debug)]
struct Compiled {
    clause: usize,
    steps: Vec<Step>,
    nregs: usize,
    heads: Vec<(usize, Vec<Slot>)>,
}

impl Compiled {
    fn scans(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.steps.iter().enumerate().filter_map(|(i, s)| match s {
            Step::Scan { rel, .. } => Some((i, *rel)),
            _ => None,
        })
    }
}

struct Compiler<'a> {
    db: &'a mut Database,
    schema: &'a Schema,
    regs: BTreeMap<String, usize>,
}

impl Compiler<'_> {
    fn rel(&mut self, pred: &str, arity: usize) -> Result<usize, EvalError> {
        let key_arity = self.schema.get(pred).and_then(|s| s.key_arity);
        if !self.db.ids.contains_key(pred) {
            self.db.declare(pred, arity, key_arity)?;
        }
        self.db.rel_id(pred, arity)
    }

    fn reg(&mut self, v: &str) -> usize {
        let n = self.regs.len();
        *self.regs.entry(v.to_string()).or_insert(n)
    }

    fn expr(&mut self, e: &ArithExpr) -> Result<Expr, EvalError> {
        Ok(match e {
            ArithExpr::Const(c) => Expr::Const(self.db.value(c)),
            ArithExpr::Var(v) => Expr::Reg(self.reg(v)),
            ArithExpr::Bin(op, l, r) => {
                Expr::Bin(*op, Box::new(self.expr(l)?), Box::new(self.expr(r)?))
            }
            ArithExpr::Builtin(f, l, r) => {
                Expr::Builtin(*f, Box::new(self.expr(l)?), Box::new(self.expr(r)?))
            }
            ArithExpr::Lookup(p, keys) => {
                let rel = self.rel(p, keys.len() + 1)?;
                Expr::Lookup(
                    rel,
                    keys.iter()
                        .map(|k| self.expr(k))
                        .collect::<Result<_, _>>()?,
                )
            }
        })
    }

    fn body(&mut self, body: &[Literal]) -> Result<Vec<Step>, EvalError> {
        let mut bound: BTreeSet<String> = BTreeSet::new();
        let mut steps = Vec::new();
        for l in body {
            match l {
                Literal::Atom(_) | Literal::RefMode(_) | Literal::Func(_) => {
                    let terms = l.terms();
                    let rel = self.rel(l.pred().unwrap(), terms.len())?;
                    let mut slots = Vec::with_capacity(terms.len());
                    let mut key = Vec::new();
                    let mut here: BTreeSet<&str> = BTreeSet::new();
                    for (col, t) in terms.iter().enumerate() {
                        let slot = match t {
                            Term::Const(c) => {
                                key.push(col);
                                Slot::Const(self.db.value(c))
                            }
                            Term::Var(v) if is_wildcard(v) => Slot::Any,
                            Term::Var(v) if bound.contains(v.as_str()) => {
                                key.push(col);
                                Slot::Check(self.reg(v))
                            }
                            Term::Var(v) if here.contains(v.as_str()) => Slot::Check(self.reg(v)),
                            Term::Var(v) => {
                                here.insert(v);
                                Slot::Bind(self.reg(v))
                            }
                        };
                        slots.push(slot);
                    }
                    bound.extend(here.into_iter().map(String::from));
                    let index = if key.is_empty() {
                        0
                    } else {
                        self.db.rels[rel].index_on(&key)
                    };
                    steps.push(Step::Scan {
                        rel,
                        slots,
                        key,
                        index,
                    });
                }
                Literal::Compare(c) => {
                    let unbound = |e: &ArithExpr| {
                        e.as_var().filter(|v| !bound.contains(*v)).map(String::from)
                    };
                    let assign = match (c.op, unbound(&c.lhs), unbound(&c.rhs)) {
                        (CmpOp::Eq, Some(v), _) => Some((v, &c.rhs)),
                        (CmpOp::Eq, None, Some(v)) => Some((v, &c.lhs)),
                        _ => None,
                    };
                    match assign {
                        Some((v, e)) => {
                            let e = self.expr(e)?;
                            let r = self.reg(&v);
                            bound.insert(v);
                            steps.push(Step::Assign(r, e));
                        }
                        None => {
                            let (l, r) = (self.expr(&c.lhs)?, self.expr(&c.rhs)?);
                            steps.push(Step::Test(l, c.op, r));
                        }
                    }
                }
                _ => {
                    return Err(EvalError::Program(
                        "negation and disjunction are not supported".into(),
                    ))
                }
            }
        }
        Ok(steps)
    }

    fn head_slots(&mut self, terms: &[&Term]) -> Vec<Slot> {
        terms
            .iter()
            .map(|t| match t {
                Term::Const(c) => Slot::Const(self.db.value(c)),
                Term::Var(v) => Slot::Check(self.reg(v)),
            })
            .collect()
    }

    fn rule(&mut self, clause: usize, rule: &Rule) -> Result<Compiled, EvalError> {
        self.regs.clear();
        let ordered = safety_order(rule).map_err(|e| {
            EvalError::Program(format!("clause {clause}: unbound variable {}", e.var))
        })?;
        let steps = self.body(&ordered.body)?;
        let mut heads = Vec::new();
        for h in &rule.head {
            let terms = h.terms();
            let rel = self.rel(h.pred(), terms.len())?;
            heads.push((rel, self.head_slots(&terms)));
        }
        Ok(Compiled {
            clause,
            steps,
            nregs: self.regs.len(),
            heads,
        })
    }

    /// Body plus a pseudo-head `(keys.., value)` read by the grouping.
    fn agg(&mut self, clause: usize, agg: &AggRule) -> Result<Compiled, EvalError> {
        self.regs.clear();
        let ordered = safety_order_agg(agg).map_err(|e| {
            EvalError::Program(format!("clause {clause}: unbound variable {}", e.var))
        })?;
        let steps = self.body(&ordered.body)?;
        let mut terms: Vec<&Term> = agg.head.keys.iter().collect();
        let value = Term::var(agg.value_var.clone());
        terms.push(&value);
        let slots = self.head_slots(&terms);
        let rel = self.rel(&agg.head.pred, agg.head.keys.len() + 1)?;
        Ok(Compiled {
            clause,
            steps,
            nregs: self.regs.len(),
            heads: alloc::vec![(rel, slots)],
        })
    }
}

struct Run<'a> {
    db: &'a Database,
    c: &'a Compiled,
    ranges: &'a [Range<u32>],
    regs: Vec<Value>,
    key: Vec<Value>,
    out: Vec<(usize, Tuple)>,
    instantiations: u64,
}

impl Run<'_> {
    fn eval(&self, e: &Expr) -> Result<Option<Value>, EvalError> {
        let int = |v: Value| match v {
            Value::Int(i) => Some(i),
            _ => None,
        };
        Ok(match e {
            Expr::Const(v) => Some(*v),
            Expr::Reg(r) => Some(self.regs[*r]),
            Expr::Bin(op, l, r) => {
                let (Some(l), Some(r)) = (self.eval(l)?, self.eval(r)?) else {
                    return Ok(None);
                };
                let (Some(a), Some(b)) = (int(l), int(r)) else {
                    return Ok(None);
                };
                let v = match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                };
                Some(Value::Int(v.ok_or(EvalError::Overflow {
                    clause: self.c.clause,
                })?))
            }
            Expr::Builtin(f, l, r) => {
                let (Some(l), Some(r)) = (self.eval(l)?, self.eval(r)?) else {
                    return Ok(None);
                };
                Some(match f {
                    Builtin::Min => l.min(r),
                    Builtin::Max => l.max(r),
                })
            }
            Expr::Lookup(rel, keys) => {
                let mut ks = Vec::with_capacity(keys.len());
                for k in keys {
                    let Some(v) = self.eval(k)? else {
                        return Ok(None);
                    };
                    ks.push(v);
                }
                self.db.rels[*rel].get(&ks)
            }
        })
    }

    fn unify(&mut self, slots: &[Slot], t: &[Value]) -> bool {
        for (s, v) in slots.iter().zip(t) {
            match s {
                Slot::Const(c) if c != v => return false,
                Slot::Check(r) if self.regs[*r] != *v => return false,
                Slot::Bind(r) => self.regs[*r] = *v,
                _ => {}
            }
        }
        true
    }

    fn go(&mut self, i: usize) -> Result<(), EvalError> {
        let c = self.c;
        let db = self.db;
        let Some(step) = c.steps.get(i) else {
            for (rel, slots) in &c.heads {
                let t: Tuple = slots
                    .iter()
                    .map(|s| match s {
                        Slot::Const(v) => *v,
                        Slot::Check(r) | Slot::Bind(r) => self.regs[*r],
                        Slot::Any => unreachable!("heads have no wildcards"),
                    })
                    .collect();
                self.out.push((*rel, t));
            }
            return Ok(());
        };
        match step {
            Step::Scan {
                rel,
                slots,
                key,
                index,
            } => {
                let r = &db.rels[*rel];
                let range = self.ranges[i].clone();
                if key.is_empty() {
                    for idx in range {
                        self.instantiations += 1;
                        if self.unify(slots, &r.tuples[idx as usize]) {
                            self.go(i + 1)?;
                        }
                    }
                } else {
                    self.key.clear();
                    for &col in key {
                        let v = match &slots[col] {
                            Slot::Const(v) => *v,
                            Slot::Check(reg) => self.regs[*reg],
                            _ => unreachable!("key columns are bound"),
                        };
                        self.key.push(v);
                    }
                    let list = r.probe(*index, &self.key);
                    let start = list.partition_point(|&x| x < range.start);
                    for &idx in &list[start..] {
                        if idx >= range.end {
                            break;
                        }
                        self.instantiations += 1;
                        if self.unify(slots, &r.tuples[idx as usize]) {
                            self.go(i + 1)?;
                        }
                    }
                }
            }
            Step::Test(l, op, r) => {
                if let (Some(a), Some(b)) = (self.eval(l)?, self.eval(r)?) {
                    if op.holds(&a, &b) {
                        self.go(i + 1)?;
                    }
                }
            }
            Step::Assign(reg, e) => {
                if let Some(v) = self.eval(e)? {
                    self.regs[*reg] = v;
                    self.go(i + 1)?;
                }
            }
        }
        Ok(())
    }
}

fn run(
    db: &Database,
    c: &Compiled,
    ranges: &[Range<u32>],
) -> Result<(Vec<(usize, Tuple)>, u64), EvalError> {
    let mut r = Run {
        db,
        c,
        ranges,
        regs: alloc::vec![Value::Int(0); c.nregs],
        key: Vec::new(),
        out: Vec::new(),
        instantiations: 0,
    };
    r.go(0)?;
    Ok((r.out, r.instantiations))
}

fn full_ranges(db: &Database, c: &Compiled) -> Vec<Range<u32>> {
    c.steps
        .iter()
        .map(|s| match s {
            Step::Scan { rel, .. } => 0..db.rels[*rel].len() as u32,
            _ => 0..0,
        })
        .collect()
}

fn group(method: AggMethod, rows: Vec<(usize, Tuple)>) -> Vec<Tuple> {
    let mut groups: BTreeMap<Tuple, Value> = BTreeMap::new();
    for (_, t) in rows {
        let (k, v) = t.split_at(t.len() - 1);
        let v = v[0];
        groups
            .entry(k.into())
            .and_modify(|cur| {
                *cur = match method {
                    AggMethod::Min => (*cur).min(v),
                    AggMethod::Max => (*cur).max(v),
                }
            })
            .or_insert(v);
    }
    groups
        .into_iter()
        .map(|(k, v)| k.iter().copied().chain(core::iter::once(v)).collect())
        .collect()
}

/// Groups body solutions by the head keys and keeps the min or max value
/// per group; no solutions give an empty relation.
pub fn eval_aggregate(agg: &AggRule, db: &mut Database) -> Result<Relation, EvalError> {
    let schema = Schema::default();
    let compiled = Compiler {
        db,
        schema: &schema,
        regs: BTreeMap::new(),
    }
    .agg(usize::MAX, agg)?;
    let ranges = full_ranges(db, &compiled);
    let (rows, _) = run(db, &compiled, &ranges)?;
    let mut rel = Relation::new(agg.head.keys.len() + 1, Some(agg.head.keys.len()));
    for t in group(agg.method, rows) {
        let _ = rel.insert(t);
    }
    Ok(rel)
}

struct Evaluator<'a> {
    db: Database,
    stats: EvalStats,
    opts: &'a EvalOptions,
}

impl Evaluator<'_> {
    fn now(&self) -> u64 {
        self.opts.clock.map_or(0, |f| f())
    }

    fn absorb(
        &mut self,
        clause: usize,
        out: Vec<(usize, Tuple)>,
        inst: u64,
    ) -> Result<u64, EvalError> {
        let mut new = 0;
        let mut dups = 0;
        for (rel, t) in out {
            if self.db.insert_values(rel, t)? {
                new += 1;
            } else {
                dups += 1;
            }
        }
        let s = self.stats.rules.entry(clause).or_default();
        s.instantiations += inst;
        s.derived += new;
        s.duplicates += dups;
        if self.db.total_tuples() as u64 > self.opts.limits.max_tuples {
            return Err(EvalError::LimitExceeded(Limit::Tuples));
        }
        Ok(new)
    }

    fn aggregate(&mut self, c: &Compiled, method: AggMethod) -> Result<(), EvalError> {
        let ranges = full_ranges(&self.db, c);
        let (rows, inst) = run(&self.db, c, &ranges)?;
        let rel = c.heads[0].0;
        let out = group(method, rows).into_iter().map(|t| (rel, t)).collect();
        self.absorb(c.clause, out, inst)?;
        Ok(())
    }

    /// One pass of every rule over full relations; returns new tuple count.
    fn naive_pass(&mut self, rules: &[Compiled]) -> Result<u64, EvalError> {
        let mut batch = Vec::new();
        for c in rules {
            let ranges = full_ranges(&self.db, c);
            let (out, inst) = run(&self.db, c, &ranges)?;
            batch.push((c.clause, out, inst));
        }
        let mut new = 0;
        for (clause, out, inst) in batch {
            new += self.absorb(clause, out, inst)?;
        }
        Ok(new)
    }

    fn semi_naive(
        &mut self,
        rules: &[Compiled],
        preds: &BTreeSet<usize>,
        st: &mut StratumStats,
    ) -> Result<(), EvalError> {
        let lens = |db: &Database| -> BTreeMap<usize, u32> {
            preds
                .iter()
                .map(|&p| (p, db.rels[p].len() as u32))
                .collect()
        };
        let before = lens(&self.db);
        self.naive_pass(rules)?;
        st.iterations += 1;
        let mut delta_start = before;
        let mut delta_end = lens(&self.db);
        while delta_start != delta_end {
            st.iterations += 1;
            if st.iterations > self.opts.limits.max_iterations {
                return Err(EvalError::LimitExceeded(Limit::Iterations));
            }
            let mut batch = Vec::new();
            for c in rules {
                let rec: Vec<(usize, usize)> =
                    c.scans().filter(|(_, r)| preds.contains(r)).collect();
                for (k, &(_, rel)) in rec.iter().enumerate() {
                    if delta_start[&rel] == delta_end[&rel] {
                        continue;
                    }
                    let mut ranges = full_ranges(&self.db, c);
                    for (j, &(p, r)) in rec.iter().enumerate() {
                        ranges[p] = match j.cmp(&k) {
                            core::cmp::Ordering::Less => 0..delta_start[&r],
                            core::cmp::Ordering::Equal => delta_start[&r]..delta_end[&r],
                            core::cmp::Ordering::Greater => 0..delta_end[&r],
                        };
                    }
                    let (out, inst) = run(&self.db, c, &ranges)?;
                    batch.push((c.clause, out, inst));
                }
            }
            for (clause, out, inst) in batch {
                self.absorb(clause, out, inst)?;
            }
            delta_start = delta_end;
            delta_end = lens(&self.db);
        }
        Ok(())
    }
}

fn prepare(program: &Program, edb: &mut Database) -> Result<(Schema, StratumPlan), EvalError> {
    let diags = validate(program);
    if let Some(d) = diags.first() {
        return Err(EvalError::Program(d.to_string()));
    }
    let (_, plan) = plan_program(program).map_err(|e| EvalError::Program(e.to_string()))?;
    let (schema, _) = Schema::build(program);
    for (pred, sig) in &schema.sigs {
        edb.declare(pred, sig.arity(), sig.key_arity)?;
    }
    Ok((schema, plan))
}

fn evaluate_impl(
    program: &Program,
    mut edb: Database,
    opts: &EvalOptions,
    naive: bool,
) -> Result<(Database, EvalStats), EvalError> {
    let (schema, plan) = prepare(program, &mut edb)?;
    let mut ev = Evaluator {
        db: edb,
        stats: EvalStats::default(),
        opts,
    };
    for stratum in &plan.strata {
        let mut st = StratumStats {
            preds: stratum.preds.clone(),
            ..Default::default()
        };
        let t0 = ev.now();
        for &idx in &stratum.agg_rules {
            let Clause::Agg(a) = &program.clauses[idx] else {
                continue;
            };
            let c = Compiler {
                db: &mut ev.db,
                schema: &schema,
                regs: BTreeMap::new(),
            }
            .agg(idx, a)?;
            ev.aggregate(&c, a.method)?;
        }
        let mut rules = Vec::new();
        for &idx in &stratum.rules {
            let Clause::Rule(r) = &program.clauses[idx] else {
                continue;
            };
            rules.push(
                Compiler {
                    db: &mut ev.db,
                    schema: &schema,
                    regs: BTreeMap::new(),
                }
                .rule(idx, r)?,
            );
        }
        if naive {
            loop {
                st.iterations += 1;
                if st.iterations > opts.limits.max_iterations {
                    return Err(EvalError::LimitExceeded(Limit::Iterations));
                }
                if ev.naive_pass(&rules)? == 0 {
                    break;
                }
            }
        } else if stratum.recursive {
            let preds: BTreeSet<usize> = stratum
                .preds
                .iter()
                .filter_map(|p| ev.db.ids.get(p).copied())
                .collect();
            ev.semi_naive(&rules, &preds, &mut st)?;
        } else if !rules.is_empty() {
            ev.naive_pass(&rules)?;
            st.iterations = 1;
        }
        st.nanos = ev.now().saturating_sub(t0);
        ev.stats.strata.push(st);
    }
    Ok((ev.db, ev.stats))
}

/// Stratified semi-naive fixpoint of `program` over `edb`.
pub fn evaluate(
    program: &Program,
    edb: Database,
    limits: Limits,
) -> Result<(Database, EvalStats), EvalError> {
    evaluate_with(
        program,
        edb,
        &EvalOptions {
            limits,
            clock: None,
        },
    )
}

pub fn evaluate_with(
    program: &Program,
    edb: Database,
    opts: &EvalOptions,
) -> Result<(Database, EvalStats), EvalError> {
    evaluate_impl(program, edb, opts, false)
}

/// Reference evaluator: every rule of a stratum re-run on full relations
/// until nothing changes.
pub fn evaluate_naive(
    program: &Program,
    edb: Database,
    limits: Limits,
) -> Result<(Database, EvalStats), EvalError> {
    evaluate_impl(
        program,
        edb,
        &EvalOptions {
            limits,
            clock: None,
        },
        true,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use alloc::vec;

    fn s(x: &str) -> Constant {
        Constant::Str(x.into())
    }

    fn int(v: i64) -> Constant {
        Constant::Int(v)
    }

    #[test]
    fn copy_rule() {
        let p = parse_program(
            "e(x,y) -> string(x), string(y).\nf(x,y) -> string(x), string(y).\nf(x,y) <- e(x,y).",
        )
        .unwrap();
        let mut db = Database::new();
        db.insert("e", &[s("a"), s("b")]).unwrap();
        let (db, _) = evaluate(&p, db, Limits::default()).unwrap();
        assert_eq!(query(&db, "f").unwrap(), vec![vec![s("a"), s("b")]]);
    }

    #[test]
    fn transitive_closure_matches_naive() {
        let p = parse_program(
            "e(x,y) -> string(x), string(y).\nt(x,y) -> string(x), string(y).\nt(x,y) <- e(x,y).\nt(x,z) <- t(x,y), e(y,z).",
        )
        .unwrap();
        let mut db = Database::new();
        db.insert("e", &[s("a"), s("b")]).unwrap();
        db.insert("e", &[s("b"), s("c")]).unwrap();
        let (semi, _) = evaluate(&p, db.clone(), Limits::default()).unwrap();
        let (naive, _) = evaluate_naive(&p, db, Limits::default()).unwrap();
        let want = vec![
            vec![s("a"), s("b")],
            vec![s("a"), s("c")],
            vec![s("b"), s("c")],
        ];
        assert_eq!(query(&semi, "t").unwrap(), want);
        assert_eq!(query(&naive, "t").unwrap(), want);
    }

    #[test]
    fn flights_distance_cap() {
        let p = parse_program(
            "e(x,y,d) -> string(x), string(y), int[64](d).\nf(x,y,d) -> string(x), string(y), int[64](d).\n\
             f(x,y,d) <- e(x,y,d), d >= 0.\n\
             f(x,y,d) <- e(x,z,d1), d1 >= 0, f(z,y,d2), d2 >= 0, d = d1 + d2, d <= 10000.",
        )
        .unwrap();
        let mut db = Database::new();
        db.insert("e", &[s("Sydney"), s("A"), int(6000)]).unwrap();
        db.insert("e", &[s("A"), s("B"), int(5000)]).unwrap();
        let (db, _) = evaluate(&p, db, Limits::default()).unwrap();
        let f = query(&db, "f").unwrap();
        assert!(f.contains(&vec![s("Sydney"), s("A"), int(6000)]));
        assert!(f.contains(&vec![s("A"), s("B"), int(5000)]));
        assert!(!f.contains(&vec![s("Sydney"), s("B"), int(11000)]));
    }

    #[test]
    fn aggregates() {
        let p = parse_program("r(k,v) -> string(k), int[64](v).\nm[k]=n -> string(k), int[64](n).\nm[k]=n <- agg<<n=max(v)>> r(k,v).")
            .unwrap();
        let mut db = Database::new();
        for (k, v) in [("a", 1), ("a", 3), ("b", 2)] {
            db.insert("r", &[s(k), int(v)]).unwrap();
        }
        let (out, _) = evaluate(&p, db.clone(), Limits::default()).unwrap();
        assert_eq!(
            query(&out, "m").unwrap(),
            vec![vec![s("a"), int(3)], vec![s("b"), int(2)]]
        );

        let Clause::Agg(a) = &p.clauses[2] else {
            panic!()
        };
        let rel = eval_aggregate(a, &mut db).unwrap();
        assert_eq!(rel.len(), 2);
        let mut empty = Database::new();
        empty.declare("r", 2, None).unwrap();
        assert!(eval_aggregate(a, &mut empty).unwrap().is_empty());
    }

    #[test]
    fn digits_bounds_and_puzzle() {
        let p = parse_program(
            "digit(_) ->.\ndigit(d), val(d:v) -> uint[8](v), v<=9.\n\
             lb[]=n -> uint[8](n).\nlb[]=n <- agg<<n=min(v)>> digit(d), val(d:v).\n\
             ub[]=n -> uint[8](n).\nub[]=n <- agg<<n=max(v)>> digit(d), val(d:v).\n\
             solution(i,a,m,s) -> digit(i), digit(a), digit(m), digit(s).\n\
             solution(i,a,m,s) <- digit(i), val(i:vi), digit(a), val(a:va), digit(m), val(m:vm), digit(s), val(s:vs),\n\
             vi != 0, vs != 0, vi != va, vi != vm, vi != vs, va != vm, va != vs, vm != vs,\n\
             vi*(10*va+vm) = 100*vs+10*va+vm.",
        )
        .unwrap();
        let mut db = Database::new();
        for d in 0..10 {
            let e = db.entity("digit", &d.to_string());
            db.insert("val", &[e, int(d)]).unwrap();
        }
        let (db, _) = evaluate(&p, db, Limits::default()).unwrap();
        assert_eq!(db.lookup("lb", &[]), Some(int(0)));
        assert_eq!(db.lookup("ub", &[]), Some(int(9)));
        let mut oracle = Vec::new();
        for i in 1..10i64 {
            for a in 0..10 {
                for m in 0..10 {
                    for s in 1..10 {
                        let ds = [i, a, m, s];
                        let distinct = (0..4).all(|x| (0..x).all(|y| ds[x] != ds[y]));
                        if distinct && i * (10 * a + m) == 100 * s + 10 * a + m {
                            oracle.push(ds.iter().map(|d| d.to_string()).collect::<Vec<_>>());
                        }
                    }
                }
            }
        }
        let mut got: Vec<Vec<String>> = query(&db, "solution")
            .unwrap()
            .iter()
            .map(|t| t.iter().map(|c| db.render(c)).collect())
            .collect();
        got.sort();
        oracle.sort();
        assert_eq!(got, oracle);
        assert!(!got.is_empty());
    }

    #[test]
    fn errors() {
        let db = Database::new();
        assert_eq!(
            query(&db, "nope"),
            Err(EvalError::UnknownPredicate("nope".into()))
        );
        let p = parse_program("f[k]=v -> int[64](k), int[64](v).\ng(k,v) -> int[64](k), int[64](v).\nf[k]=v <- g(k,v).").unwrap();
        let mut db = Database::new();
        db.insert("g", &[int(1), int(2)]).unwrap();
        db.insert("g", &[int(1), int(3)]).unwrap();
        assert!(matches!(
            evaluate(&p, db, Limits::default()),
            Err(EvalError::FunctionalDependency { .. })
        ));

        let p = parse_program("n(x) -> int[64](x).\nn(0).\nn(y) <- n(x), y = x + 1.").unwrap();
        let limits = Limits {
            max_iterations: 1_000_000,
            max_tuples: 50,
        };
        assert_eq!(
            evaluate(&p, Database::new(), limits).unwrap_err(),
            EvalError::LimitExceeded(Limit::Tuples)
        );
        let limits = Limits {
            max_iterations: 10,
            max_tuples: 1000,
        };
        assert_eq!(
            evaluate(&p, Database::new(), limits).unwrap_err(),
            EvalError::LimitExceeded(Limit::Iterations)
        );

        let p = parse_program("n(x) -> int[64](x).\nn(9223372036854775807).\nm(x) -> int[64](x).\nm(y) <- n(x), y = x + 1.").unwrap();
        assert!(matches!(
            evaluate(&p, Database::new(), Limits::default()),
            Err(EvalError::Overflow { .. })
        ));
    }
}
