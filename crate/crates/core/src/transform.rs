//! The filter-predicates transformation: generator atoms constrained by
//! arithmetic comparisons are replaced by filter predicates that discard
//! values which cannot satisfy the comparisons given the bounds of the other
//! variables. Bounds are shared aggregate predicates; bounds of recursive
//! predicates are approximated rule by rule.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::analysis::{
    build_dep_graph, find_all_chains, find_generator_chains, plan_program, DepGraph,
    GeneratorChain, StratificationError, StratumPlan,
};
use crate::interval::{
    constant_bound, lower_constraint_with, symbolic_bounds, BoundEnv, BoundExprPair, ExtInt,
    Interval,
};
use crate::ir::*;
use crate::schema::{ColumnType, Schema};
use crate::validate::{validate, Diagnostic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundKind {
    Lb,
    Ub,
}

impl BoundKind {
    pub fn prefix(self) -> &'static str {
        match self {
            BoundKind::Lb => "lb",
            BoundKind::Ub => "ub",
        }
    }

    pub fn method(self) -> AggMethod {
        match self {
            BoundKind::Lb => AggMethod::Min,
            BoundKind::Ub => AggMethod::Max,
        }
    }

    fn combine(self, a: ArithExpr, b: ArithExpr) -> ArithExpr {
        match self {
            BoundKind::Lb => ArithExpr::min(a, b),
            BoundKind::Ub => ArithExpr::max(a, b),
        }
    }
}

/// Name of a bound predicate together with what it bounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundName {
    pub name: String,
    /// Generator predicate the bound is taken over.
    pub base: String,
    /// Bounded column of the terminal predicate.
    pub column: usize,
    pub kind: BoundKind,
}

impl fmt::Display for BoundName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[]", self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoundStatus {
    Exact(AggRule),
    /// The bound is the min (lb) or max (ub) of these rule contributions.
    Approximated(Vec<ArithExpr>),
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundApprox {
    pub pred: String,
    pub column: usize,
    pub kind: BoundKind,
    pub status: BoundStatus,
}

pub type BoundMap = BTreeMap<(String, usize, BoundKind), BoundApprox>;

/// One emitted filter predicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterSpec {
    /// Clause index of the rewritten rule.
    pub rule: usize,
    pub name: String,
    pub generator: Atom,
    pub chains: Vec<GeneratorChain>,
    pub conditions: Vec<Compare>,
    /// The defining rule of the filter predicate.
    pub clause: Rule,
    /// Another rule already defines an identical filter.
    pub shared: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("invalid program: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Stratification(#[from] StratificationError),
    #[error("transformed program is malformed: {0}")]
    Internal(String),
}

/// Result of the transformation with the bookkeeping the CLI reports.
#[derive(Clone, Debug)]
pub struct Transformed {
    pub program: Program,
    pub filters: Vec<FilterSpec>,
    /// Emitted bound predicates in emission order.
    pub bounds: Vec<BoundName>,
    /// `(clause, variable)` pairs with a chain but no usable condition.
    pub untransformed: Vec<(usize, String)>,
}

pub fn transform_program(program: &Program) -> Result<Program, TransformError> {
    transform(program).map(|t| t.program)
}

pub fn transform(program: &Program) -> Result<Transformed, TransformError> {
    let diags = validate(program);
    if !diags.is_empty() {
        return Err(TransformError::Invalid(diags));
    }
    let (graph, plan) = plan_program(program)?;
    let (schema, _) = Schema::build(program);
    let mut planner = Planner::new(program, &schema, &plan, &graph);

    let mut out = program.clone();
    let mut filters: Vec<FilterSpec> = Vec::new();
    let mut untransformed = Vec::new();
    for (idx, rule) in program.rules() {
        let (rewritten, specs, skipped) = planner.make_filters(idx, rule, &filters);
        if !specs.is_empty() {
            out.clauses[idx] = Clause::Rule(rewritten);
        }
        untransformed.extend(skipped.into_iter().map(|v| (idx, v)));
        filters.extend(specs);
    }

    let emitted = planner.emit(&filters);
    let mut bound_types = Vec::new();
    for f in filters.iter().filter(|f| !f.shared) {
        out.push(Clause::Decl(filter_declaration(f, &schema)));
        out.push(Clause::Rule(f.clause.clone()));
    }
    let mut bounds = Vec::new();
    for e in emitted {
        bound_types.push((e.name.name.clone(), e.ty.clone()));
        out.clauses.extend(e.clauses);
        bounds.push(e.name);
    }
    let _ = bound_types;

    let diags = validate(&out);
    if !diags.is_empty() {
        return Err(TransformError::Internal(
            diags
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }
    plan_program(&out).map_err(|e| TransformError::Internal(e.to_string()))?;
    Ok(Transformed {
        program: out,
        filters,
        bounds,
        untransformed,
    })
}

/// Bounds for every numeric column: exact aggregates outside recursion,
/// rule-wise approximations inside.
pub fn plan_bounds(program: &Program, plan: &StratumPlan) -> BoundMap {
    let graph = build_dep_graph(program);
    let (schema, _) = Schema::build(program);
    let mut planner = Planner::new(program, &schema, plan, &graph);
    let mut out = BoundMap::new();
    for (pred, sig) in &schema.sigs {
        for (col, c) in sig.columns.iter().enumerate() {
            if !c.ty.is_numeric() {
                continue;
            }
            for kind in [BoundKind::Lb, BoundKind::Ub] {
                let status = if plan.is_recursive(pred) {
                    let (lo, hi) = planner.approx_contribs(pred, col);
                    match if kind == BoundKind::Lb { lo } else { hi } {
                        Some(cs) => BoundStatus::Approximated(cs),
                        None => BoundStatus::Unbounded,
                    }
                } else {
                    let i = planner.exact_direct(pred, col, kind);
                    BoundStatus::Exact(planner.exact[i].agg_rule())
                };
                out.insert(
                    (pred.clone(), col, kind),
                    BoundApprox {
                        pred: pred.clone(),
                        column: col,
                        kind,
                        status,
                    },
                );
            }
        }
    }
    out
}

/// Declarations for filter predicates and bound predicates.
pub fn derive_declarations(
    specs: &[FilterSpec],
    bounds: &[(String, ColumnType)],
    program: &Program,
) -> Vec<Declaration> {
    let (schema, _) = Schema::build(program);
    let mut out: Vec<Declaration> = specs
        .iter()
        .filter(|f| !f.shared)
        .map(|f| filter_declaration(f, &schema))
        .collect();
    out.extend(bounds.iter().map(|(name, ty)| bound_declaration(name, ty)));
    out
}

fn filter_declaration(f: &FilterSpec, schema: &Schema) -> Declaration {
    let args = &f.clause.head[0].terms();
    let distinct: BTreeSet<&str> = args.iter().filter_map(|t| t.as_var()).collect();
    let names: Vec<String> = if distinct.len() == args.len() {
        args.iter()
            .map(|t| t.as_var().unwrap().to_string())
            .collect()
    } else {
        (1..=args.len()).map(|i| format!("x{i}")).collect()
    };
    let sig = schema
        .get(&f.generator.pred)
        .expect("generator is declared");
    let lhs = Literal::Atom(Atom::new(
        f.name.clone(),
        names.iter().map(Term::var).collect(),
    ));
    let rhs = names
        .iter()
        .zip(&sig.columns)
        .map(|(n, c)| Literal::Atom(Atom::new(c.ty.to_string(), alloc::vec![Term::var(n)])))
        .collect();
    Declaration::new(alloc::vec![lhs], rhs)
}

fn bound_declaration(name: &str, ty: &ColumnType) -> Declaration {
    Declaration::new(
        alloc::vec![Literal::Func(FuncAtom::new(
            name,
            Vec::new(),
            Term::var("n")
        ))],
        alloc::vec![Literal::Atom(Atom::new(
            ty.to_string(),
            alloc::vec![Term::var("n")]
        ))],
    )
}

/// An exact bound: `name[]=n <- agg<<n=method(v)>> body.`
#[derive(Clone, Debug)]
struct ExactDef {
    name: String,
    kind: BoundKind,
    body: Vec<Literal>,
    ty: ColumnType,
    gen: String,
    column: usize,
    /// Body is a single atom over the bounded predicate.
    direct: bool,
}

impl ExactDef {
    fn agg_rule(&self) -> AggRule {
        let mut a = AggRule {
            head: FuncAtom::new(self.name.clone(), Vec::new(), Term::var("n")),
            method: self.kind.method(),
            value_var: "v".into(),
            body: self.body.clone(),
            span: Span::default(),
        };
        a.canonicalize_wildcards();
        a
    }
}

enum Source {
    Exact {
        body: Vec<Literal>,
        gen: String,
        terminal: String,
        column: usize,
        direct: bool,
    },
    Approx(String, usize),
    Point(ArithExpr),
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Consumer {
    Rule(usize),
    /// Referenced from another bound's definition.
    Nested,
}

struct Emitted {
    name: BoundName,
    ty: ColumnType,
    clauses: Vec<Clause>,
}

/// Candidate lower and upper approximations of a column.
type ApproxSides = (Option<Vec<ArithExpr>>, Option<Vec<ArithExpr>>);

struct Planner<'a> {
    program: &'a Program,
    schema: &'a Schema,
    plan: &'a StratumPlan,
    graph: &'a DepGraph,
    taken: BTreeSet<String>,
    exact: Vec<ExactDef>,
    exact_index: BTreeMap<(Vec<Literal>, BoundKind), usize>,
    direct_names: BTreeMap<(String, usize, BoundKind), String>,
    approx: BTreeMap<(String, usize), Option<ApproxSides>>,
    approx_names: BTreeMap<String, (String, usize, BoundKind)>,
    consumers: BTreeMap<String, BTreeSet<Consumer>>,
    nonempty: BTreeMap<String, BTreeSet<String>>,
}

fn fresh_name(base: &str, taken: &mut BTreeSet<String>) -> String {
    let mut name = base.to_string();
    let mut n = 2;
    while taken.contains(&name) {
        name = format!("{base}_{n}");
        n += 1;
    }
    taken.insert(name.clone());
    name
}

/// Constant folding of integer subexpressions.
pub fn fold_constants(e: &ArithExpr) -> ArithExpr {
    match e {
        ArithExpr::Bin(op, l, r) => {
            let (l, r) = (fold_constants(l), fold_constants(r));
            if let (Some(a), Some(b)) = (l.as_int(), r.as_int()) {
                let v = match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                };
                if let Some(v) = v {
                    return ArithExpr::int(v);
                }
            }
            ArithExpr::bin(*op, l, r)
        }
        ArithExpr::Builtin(f, l, r) => {
            let (l, r) = (fold_constants(l), fold_constants(r));
            if l == r {
                return l;
            }
            if let (Some(a), Some(b)) = (l.as_int(), r.as_int()) {
                return ArithExpr::int(match f {
                    Builtin::Min => a.min(b),
                    Builtin::Max => a.max(b),
                });
            }
            ArithExpr::Builtin(*f, alloc::boxed::Box::new(l), alloc::boxed::Box::new(r))
        }
        ArithExpr::Lookup(p, keys) => {
            ArithExpr::Lookup(p.clone(), keys.iter().map(fold_constants).collect())
        }
        other => other.clone(),
    }
}

fn body_preds(body: &[Literal]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for l in body {
        match l {
            Literal::Compare(c) => {
                let mut v = Vec::new();
                c.lhs.lookups(&mut v);
                c.rhs.lookups(&mut v);
                out.extend(v.into_iter().map(String::from));
            }
            _ => {
                if let Some(p) = l.pred() {
                    out.insert(p.to_string());
                }
            }
        }
    }
    out
}

/// For each predicate `h`, the predicates certainly nonempty whenever `h`
/// is (greatest fixpoint).
fn nonempty_implications(
    program: &Program,
    graph: &DepGraph,
) -> BTreeMap<String, BTreeSet<String>> {
    let universe: BTreeSet<String> = graph.nodes.clone();
    let mut ne: BTreeMap<String, BTreeSet<String>> = universe
        .iter()
        .map(|p| {
            let init = if graph.defining.contains_key(p) {
                universe.clone()
            } else {
                BTreeSet::from([p.clone()])
            };
            (p.clone(), init)
        })
        .collect();
    let bodies: BTreeMap<&String, Vec<BTreeSet<String>>> = graph
        .defining
        .iter()
        .map(|(p, idxs)| {
            let bs = idxs
                .iter()
                .map(|&i| match &program.clauses[i] {
                    Clause::Rule(r) => body_preds(&r.body),
                    Clause::Agg(a) => body_preds(&a.body),
                    Clause::Decl(_) => BTreeSet::new(),
                })
                .collect();
            (p, bs)
        })
        .collect();
    loop {
        let mut changed = false;
        for (p, bs) in &bodies {
            let mut acc: Option<BTreeSet<String>> = None;
            for b in bs {
                let g = guaranteed_with(&ne, b);
                acc = Some(match acc {
                    None => g,
                    Some(a) => a.intersection(&g).cloned().collect(),
                });
            }
            let mut new = acc.unwrap_or_default();
            new.insert((*p).clone());
            if ne[*p] != new {
                ne.insert((*p).clone(), new);
                changed = true;
            }
        }
        if !changed {
            return ne;
        }
    }
}

fn guaranteed_with(
    ne: &BTreeMap<String, BTreeSet<String>>,
    preds: &BTreeSet<String>,
) -> BTreeSet<String> {
    let mut out = preds.clone();
    for p in preds {
        if let Some(s) = ne.get(p) {
            out.extend(s.iter().cloned());
        }
    }
    out
}

/// Variables defined by `v = expr` where nothing else binds `v`, with
/// the definitions substituted into one another; plus the indices of those
/// assignment literals.
fn assignments(rule: &Rule) -> (BTreeMap<String, ArithExpr>, BTreeSet<usize>) {
    let bound: BTreeSet<&str> = rule
        .body
        .iter()
        .filter(|l| l.is_positive_atom())
        .flat_map(|l| l.terms().into_iter().filter_map(Term::as_var))
        .collect();
    let mut defs: BTreeMap<String, ArithExpr> = BTreeMap::new();
    let mut idxs = BTreeSet::new();
    for (i, l) in rule.body.iter().enumerate() {
        let Literal::Compare(c) = l else { continue };
        if c.op != CmpOp::Eq {
            continue;
        }
        let pick = match (&c.lhs, &c.rhs) {
            (ArithExpr::Var(v), e)
                if !bound.contains(v.as_str()) && !defs.contains_key(v) && !e.mentions(v) =>
            {
                Some((v, e))
            }
            (e, ArithExpr::Var(v))
                if !bound.contains(v.as_str()) && !defs.contains_key(v) && !e.mentions(v) =>
            {
                Some((v, e))
            }
            _ => None,
        };
        if let Some((v, e)) = pick {
            defs.insert(v.clone(), e.clone());
            idxs.insert(i);
        }
    }
    for _ in 0..defs.len() {
        let snapshot = defs.clone();
        for e in defs.values_mut() {
            for (v, d) in &snapshot {
                e.replace(&ArithExpr::var(v.clone()), d);
            }
        }
    }
    (defs, idxs)
}

fn substitute(e: &ArithExpr, defs: &BTreeMap<String, ArithExpr>) -> ArithExpr {
    let mut e = e.clone();
    for (v, d) in defs {
        e.replace(&ArithExpr::var(v.clone()), d);
    }
    e
}

/// `v`'s bounds intersected with constant comparisons on `v` in `body`.
fn tighten(pair: BoundExprPair, var: &str, body: &[Literal]) -> BoundExprPair {
    let mut iv = Interval::TOP;
    for l in body {
        if let Literal::Compare(c) = l {
            if let Some(b) = constant_bound(c, var) {
                iv = iv.intersect(&b);
            }
        }
    }
    if iv.is_empty() {
        return pair;
    }
    let lo = match (pair.lo, iv.lo) {
        (Some(e), ExtInt::Fin(k)) => Some(fold_constants(&ArithExpr::max(e, ArithExpr::int(k)))),
        (None, ExtInt::Fin(k)) => Some(ArithExpr::int(k)),
        (lo, _) => lo,
    };
    let hi = match (pair.hi, iv.hi) {
        (Some(e), ExtInt::Fin(k)) => Some(fold_constants(&ArithExpr::min(e, ArithExpr::int(k)))),
        (None, ExtInt::Fin(k)) => Some(ArithExpr::int(k)),
        (hi, _) => hi,
    };
    BoundExprPair { lo, hi }
}

fn collect_lookups(e: &ArithExpr, out: &mut Vec<ArithExpr>) {
    match e {
        ArithExpr::Lookup(..) if e.is_ground() => {
            if !out.contains(e) {
                out.push(e.clone());
            }
        }
        ArithExpr::Bin(_, l, r) | ArithExpr::Builtin(_, l, r) => {
            collect_lookups(l, out);
            collect_lookups(r, out);
        }
        _ => {}
    }
}

fn lookup_names(e: &ArithExpr) -> Vec<String> {
    let mut v = Vec::new();
    e.lookups(&mut v);
    v.into_iter().map(String::from).collect()
}

/// Renames every variable by order of first appearance, for structural
/// comparison of filters.
fn canonical(rule: &Rule) -> Rule {
    let mut r = rule.clone();
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    let mut rename = |v: &str| -> Option<String> {
        let n = map.len();
        Some(
            map.entry(v.to_string())
                .or_insert_with(|| format!("v{n}"))
                .clone(),
        )
    };
    for h in &mut r.head {
        let mut l = h.as_literal();
        l.rename_vars(&mut rename);
        if let Literal::Atom(mut a) = l {
            a.pred = String::new();
            *h = HeadAtom::Rel(a);
        }
    }
    for l in &mut r.body {
        l.rename_vars(&mut rename);
    }
    r
}

impl<'a> Planner<'a> {
    fn new(
        program: &'a Program,
        schema: &'a Schema,
        plan: &'a StratumPlan,
        graph: &'a DepGraph,
    ) -> Self {
        Planner {
            program,
            schema,
            plan,
            graph,
            taken: program.predicates(),
            exact: Vec::new(),
            exact_index: BTreeMap::new(),
            direct_names: BTreeMap::new(),
            approx: BTreeMap::new(),
            approx_names: BTreeMap::new(),
            consumers: BTreeMap::new(),
            nonempty: nonempty_implications(program, graph),
        }
    }

    fn numeric_columns(&self, pred: &str) -> usize {
        self.schema.get(pred).map_or(0, |s| {
            s.columns.iter().filter(|c| c.ty.is_numeric()).count()
        })
    }

    fn column_type(&self, pred: &str, col: usize) -> ColumnType {
        self.schema
            .column(pred, col)
            .map_or(ColumnType::INT64, |c| c.ty.clone())
    }

    fn is_edb(&self, pred: &str) -> bool {
        !self.graph.defining.contains_key(pred)
    }

    /// Name shared by the exact and approximated bound of a column.
    fn direct_name(&mut self, pred: &str, col: usize, kind: BoundKind) -> String {
        if let Some(n) = self.direct_names.get(&(pred.to_string(), col, kind)) {
            return n.clone();
        }
        let base = if self.numeric_columns(pred) > 1 {
            format!("{}_{pred}_c{col}", kind.prefix())
        } else {
            format!("{}_{pred}", kind.prefix())
        };
        let name = fresh_name(&base, &mut self.taken);
        self.direct_names
            .insert((pred.to_string(), col, kind), name.clone());
        name
    }

    /// Single-literal body `pred(_,..,v,..)` in the predicate's own syntax.
    fn direct_body(&self, pred: &str, col: usize) -> Vec<Literal> {
        let sig = self.schema.get(pred);
        let arity = sig.map_or(col + 1, |s| s.arity());
        let terms: Vec<Term> = (0..arity)
            .map(|i| {
                if i == col {
                    Term::var("v")
                } else {
                    Term::var(format!("_{i}"))
                }
            })
            .collect();
        let lit = match sig {
            Some(s) if s.refmode => Literal::RefMode(RefModeAtom {
                pred: pred.into(),
                key: terms[0].clone(),
                value: terms[1].clone(),
            }),
            Some(s) if s.is_functional() => {
                let k = s.key_arity.unwrap();
                Literal::Func(FuncAtom::new(pred, terms[..k].to_vec(), terms[k].clone()))
            }
            _ => Literal::Atom(Atom::new(pred, terms)),
        };
        alloc::vec![lit]
    }

    fn exact_direct(&mut self, pred: &str, col: usize, kind: BoundKind) -> usize {
        let body = self.direct_body(pred, col);
        if let Some(&i) = self.exact_index.get(&(body.clone(), kind)) {
            return i;
        }
        let name = self.direct_name(pred, col, kind);
        let def = ExactDef {
            name,
            kind,
            body: body.clone(),
            ty: self.column_type(pred, col),
            gen: pred.into(),
            column: col,
            direct: true,
        };
        self.exact.push(def);
        self.exact_index.insert((body, kind), self.exact.len() - 1);
        self.exact.len() - 1
    }

    fn exact_chain(
        &mut self,
        body: &[Literal],
        gen: &str,
        terminal: &str,
        col: usize,
        kind: BoundKind,
    ) -> usize {
        if let Some(&i) = self.exact_index.get(&(body.to_vec(), kind)) {
            return i;
        }
        let base = format!("{}_{gen}", kind.prefix());
        let clash = self.numeric_columns(gen) > 0 || self.taken.contains(&base);
        let name = if clash {
            fresh_name(
                &format!("{}_{gen}_{terminal}", kind.prefix()),
                &mut self.taken,
            )
        } else {
            fresh_name(&base, &mut self.taken)
        };
        self.exact.push(ExactDef {
            name,
            kind,
            body: body.to_vec(),
            ty: self.column_type(terminal, col),
            gen: gen.into(),
            column: col,
            direct: false,
        });
        self.exact_index
            .insert((body.to_vec(), kind), self.exact.len() - 1);
        self.exact.len() - 1
    }

    /// Generator plus links with the value renamed `v`, key variables
    /// renamed `k1..`, and everything else a wildcard.
    fn chain_body(chain: &GeneratorChain) -> Vec<Literal> {
        let mut keys: BTreeSet<&str> = BTreeSet::new();
        for (_, l) in &chain.chain {
            let t = l.terms();
            keys.extend(t[..t.len() - 1].iter().filter_map(|t| t.as_var()));
        }
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        map.insert(chain.value_var.clone(), "v".into());
        let mut wild = 0usize;
        let mut next_key = 1usize;
        let mut gen = chain.generator.clone();
        for t in &mut gen.args {
            let keep =
                matches!(t, Term::Var(v) if keys.contains(v.as_str()) || *v == chain.value_var);
            if !keep {
                *t = Term::var(format!("_{wild}"));
                wild += 1;
            }
        }
        let mut body = alloc::vec![Literal::Atom(gen)];
        body.extend(chain.chain.iter().map(|(_, l)| l.clone()));
        for l in &mut body {
            l.rename_vars(&mut |v: &str| {
                if is_wildcard(v) {
                    return None;
                }
                let n = map.len();
                Some(
                    map.entry(v.to_string())
                        .or_insert_with(|| {
                            let _ = n;
                            let s = format!("k{next_key}");
                            next_key += 1;
                            s
                        })
                        .clone(),
                )
            });
        }
        body
    }

    fn recursive(&self, pred: &str) -> bool {
        self.plan.is_recursive(pred)
    }

    /// Where the bounds of a chain's value come from. `scc`: predicates
    /// whose bounds are being approximated (treated as unbounded).
    fn chain_source(&self, chain: &GeneratorChain, scc: Option<&BTreeSet<String>>) -> Source {
        let preds: Vec<&str> = core::iter::once(chain.generator.pred.as_str())
            .chain(chain.chain.iter().filter_map(|(_, l)| l.pred()))
            .collect();
        let terminal = chain.terminal_pred().to_string();
        if preds.iter().all(|p| !self.recursive(p)) {
            let direct = chain.chain.is_empty();
            let body = Self::chain_body(chain);
            return Source::Exact {
                body,
                gen: chain.generator.pred.clone(),
                terminal,
                column: chain.bound_column,
                direct,
            };
        }
        if !self.recursive(&terminal) {
            let body = self.direct_body(&terminal, chain.bound_column);
            return Source::Exact {
                body,
                gen: terminal.clone(),
                terminal,
                column: chain.bound_column,
                direct: true,
            };
        }
        if scc.is_some_and(|s| s.contains(&terminal)) {
            return Source::Unbounded;
        }
        Source::Approx(terminal, chain.bound_column)
    }

    /// Statically nonnegative values: declared nonnegative columns of
    /// predicates given only by facts (loaded facts are type-checked).
    fn source_nonneg(&self, src: &Source, chain_terminal: Option<(&str, usize)>) -> bool {
        match src {
            Source::Exact { .. } | Source::Point(_) => chain_terminal.is_some_and(|(p, c)| {
                self.is_edb(p) && self.schema.column(p, c).is_some_and(|c| c.nonneg())
            }),
            _ => false,
        }
    }

    fn source_pair(&mut self, src: &Source) -> BoundExprPair {
        match src {
            Source::Exact {
                body,
                gen,
                terminal,
                column,
                direct,
            } => {
                let mut names = [String::new(), String::new()];
                for (i, kind) in [BoundKind::Lb, BoundKind::Ub].into_iter().enumerate() {
                    let idx = if *direct {
                        self.exact_direct(gen, *column, kind)
                    } else {
                        self.exact_chain(body, gen, terminal, *column, kind)
                    };
                    names[i] = self.exact[idx].name.clone();
                }
                BoundExprPair::named(&names[0], &names[1])
            }
            Source::Approx(pred, col) => self.approx_pair(pred, *col),
            Source::Point(e) => BoundExprPair::point(e.clone()),
            Source::Unbounded => BoundExprPair::unbounded(),
        }
    }

    fn approx_pair(&mut self, pred: &str, col: usize) -> BoundExprPair {
        let (lo, hi) = self.approx_contribs(pred, col);
        let mut side = |cs: Option<Vec<ArithExpr>>, kind: BoundKind| -> Option<ArithExpr> {
            let cs = cs?;
            if cs.iter().all(|c| c.as_int().is_some()) {
                let it = cs.iter().filter_map(ArithExpr::as_int);
                return Some(ArithExpr::int(match kind {
                    BoundKind::Lb => it.min()?,
                    BoundKind::Ub => it.max()?,
                }));
            }
            let name = self.direct_name(pred, col, kind);
            self.approx_names
                .insert(name.clone(), (pred.to_string(), col, kind));
            Some(ArithExpr::singleton(name))
        };
        BoundExprPair {
            lo: side(lo, BoundKind::Lb),
            hi: side(hi, BoundKind::Ub),
        }
    }

    /// Per-rule contributions to the bounds of a recursive predicate's
    /// column; `None` on a side means some rule leaves it unbounded.
    fn approx_contribs(
        &mut self,
        pred: &str,
        col: usize,
    ) -> (Option<Vec<ArithExpr>>, Option<Vec<ArithExpr>>) {
        let key = (pred.to_string(), col);
        match self.approx.get(&key) {
            Some(Some(done)) => return done.clone(),
            Some(None) => return (None, None),
            None => {}
        }
        self.approx.insert(key.clone(), None);
        let scc: BTreeSet<String> = self
            .plan
            .stratum_of(pred)
            .map(|s| self.plan.strata[s].preds.iter().cloned().collect())
            .unwrap_or_default();
        let mut los: Option<Vec<ArithExpr>> = Some(Vec::new());
        let mut his: Option<Vec<ArithExpr>> = Some(Vec::new());
        let defining = self.graph.defining.get(pred).cloned().unwrap_or_default();
        for idx in defining {
            let Clause::Rule(rule) = &self.program.clauses[idx] else {
                los = None;
                his = None;
                continue;
            };
            for h in rule.head.iter().filter(|h| h.pred() == pred) {
                let pair = match h.terms().get(col) {
                    Some(Term::Const(Constant::Int(k))) => BoundExprPair::point(ArithExpr::int(*k)),
                    Some(Term::Var(u)) => self.var_pair_in_scc(rule, u, &scc, 0),
                    _ => BoundExprPair::unbounded(),
                };
                let push = |acc: &mut Option<Vec<ArithExpr>>, e: Option<ArithExpr>| match (
                    acc.as_mut(),
                    e,
                ) {
                    (Some(v), Some(e)) => {
                        let e = fold_constants(&e);
                        if !v.contains(&e) {
                            v.push(e);
                        }
                    }
                    _ => *acc = None,
                };
                push(&mut los, pair.lo);
                push(&mut his, pair.hi);
            }
        }
        let done = (los, his);
        self.approx.insert(key, Some(done.clone()));
        done
    }

    fn var_pair_in_scc(
        &mut self,
        rule: &Rule,
        var: &str,
        scc: &BTreeSet<String>,
        depth: usize,
    ) -> BoundExprPair {
        let chains = find_all_chains(rule, self.schema);
        let (defs, _) = assignments(rule);
        let pair = if let Some(ch) = chains
            .iter()
            .find(|c| c.value_var == var && !scc.contains(&c.generator.pred))
        {
            let src = self.chain_source(ch, Some(scc));
            self.source_pair(&src)
        } else if chains.iter().any(|c| c.value_var == var) {
            BoundExprPair::unbounded()
        } else if let (Some(e), true) = (defs.get(var), depth < 8) {
            let mut bounds = BTreeMap::new();
            for w in e.vars() {
                let p = self.var_pair_in_scc(rule, w, scc, depth + 1);
                bounds.insert(w.to_string(), p);
            }
            let nonneg = BTreeMap::new();
            let env = BoundEnv {
                target: None,
                bounds: &bounds,
                nonneg: &nonneg,
                monotone: false,
            };
            symbolic_bounds(e, &env).unwrap_or_else(|_| BoundExprPair::unbounded())
        } else if let Some(e) = point_lookup(rule, var) {
            BoundExprPair::point(e)
        } else {
            BoundExprPair::unbounded()
        };
        tighten(pair, var, &rule.body)
    }

    /// Bounds of a variable in a rule being filtered, with its
    /// nonnegativity.
    fn var_pair(
        &mut self,
        chains: &[GeneratorChain],
        rule: &Rule,
        var: &str,
    ) -> Option<(BoundExprPair, bool)> {
        if let Some(ch) = chains.iter().find(|c| c.value_var == var) {
            let src = self.chain_source(ch, None);
            let nn = self.source_nonneg(&src, Some((ch.terminal_pred(), ch.bound_column)));
            return Some((self.source_pair(&src), nn));
        }
        let e = point_lookup(rule, var)?;
        let ArithExpr::Lookup(p, keys) = &e else {
            unreachable!()
        };
        let nn = self.source_nonneg(&Source::Point(e.clone()), Some((p, keys.len())));
        Some((BoundExprPair::point(e), nn))
    }

    /// Filters for one rule, reusing identical filters emitted earlier.
    fn make_filters(
        &mut self,
        idx: usize,
        rule: &Rule,
        existing: &[FilterSpec],
    ) -> (Rule, Vec<FilterSpec>, Vec<String>) {
        let chains = find_generator_chains(rule, self.schema);
        let mut rewritten = rule.clone();
        let mut specs: Vec<FilterSpec> = Vec::new();
        let mut skipped = Vec::new();
        if chains.is_empty() {
            return (rewritten, specs, skipped);
        }
        let (defs, assign_idx) = assignments(rule);
        let compares: Vec<Compare> = rule
            .body
            .iter()
            .enumerate()
            .filter_map(|(i, l)| match l {
                Literal::Compare(c) if c.op != CmpOp::Ne && !assign_idx.contains(&i) => Some(
                    Compare::new(substitute(&c.lhs, &defs), c.op, substitute(&c.rhs, &defs)),
                ),
                _ => None,
            })
            .collect();

        let mut by_gen: BTreeMap<usize, Vec<GeneratorChain>> = BTreeMap::new();
        for ch in &chains {
            by_gen
                .entry(ch.generator_index)
                .or_default()
                .push(ch.clone());
        }
        for (gi, gchains) in by_gen {
            let targets: Vec<&str> = gchains.iter().map(|c| c.value_var.as_str()).collect();
            let mut bounds: BTreeMap<String, BoundExprPair> = BTreeMap::new();
            let mut nonneg: BTreeMap<String, bool> = BTreeMap::new();
            let mut conds: Vec<Compare> = Vec::new();
            for c in &compares {
                let vars = c.vars();
                let Some(target) = targets.iter().find(|t| vars.contains(*t)) else {
                    continue;
                };
                for w in &vars {
                    if bounds.contains_key(*w) {
                        continue;
                    }
                    if targets.contains(w) {
                        let ch = gchains.iter().find(|c| c.value_var == *w).unwrap();
                        let src = Source::Point(ArithExpr::var(*w));
                        let nn =
                            self.source_nonneg(&src, Some((ch.terminal_pred(), ch.bound_column)));
                        bounds.insert(w.to_string(), BoundExprPair::point(ArithExpr::var(*w)));
                        nonneg.insert(w.to_string(), nn);
                    } else if let Some((p, nn)) = self.var_pair(&chains, rule, w) {
                        bounds.insert(w.to_string(), p);
                        nonneg.insert(w.to_string(), nn);
                    }
                }
                let env = BoundEnv {
                    target: Some(target),
                    bounds: &bounds,
                    nonneg: &nonneg,
                    monotone: true,
                };
                let Ok(lowered) = lower_constraint_with(c, &env) else {
                    continue;
                };
                for k in lowered {
                    let k = Compare::new(fold_constants(&k.lhs), k.op, fold_constants(&k.rhs));
                    if !targets.iter().any(|t| k.mentions(t)) {
                        continue;
                    }
                    if let (Some(a), Some(b)) = (k.lhs.as_int(), k.rhs.as_int()) {
                        if k.op.holds(&a, &b) {
                            continue;
                        }
                    }
                    if !conds.contains(&k) {
                        conds.push(k);
                    }
                }
            }
            if conds.is_empty() {
                skipped.extend(targets.iter().map(|t| t.to_string()));
                continue;
            }
            let spec = self.build_filter(idx, rule, gi, gchains, conds, existing, &specs);
            rewritten.body[gi] =
                Literal::Atom(Atom::new(spec.name.clone(), spec.generator.args.clone()));
            specs.push(spec);
        }
        (rewritten, specs, skipped)
    }

    #[allow(clippy::too_many_arguments)]
    fn build_filter(
        &mut self,
        idx: usize,
        rule: &Rule,
        gi: usize,
        gchains: Vec<GeneratorChain>,
        conds: Vec<Compare>,
        existing: &[FilterSpec],
        current: &[FilterSpec],
    ) -> FilterSpec {
        let gen = gchains[0].generator.clone();
        let mut used: BTreeSet<String> = rule.vars().into_iter().map(String::from).collect();
        let mut fresh_var = |base: &str| -> String {
            let mut n = 1;
            loop {
                let v = format!("{base}{n}");
                if used.insert(v.clone()) {
                    return v;
                }
                n += 1;
            }
        };
        let mut head_gen = gen.clone();
        for t in &mut head_gen.args {
            if let Term::Var(v) = t {
                if is_wildcard(v) {
                    *t = Term::var(fresh_var("x"));
                }
            }
        }
        let mut links: Vec<(usize, Literal)> = gchains
            .iter()
            .flat_map(|c| c.chain.iter().cloned())
            .collect();
        links.sort_by_key(|(i, _)| *i);
        links.dedup_by_key(|(i, _)| *i);

        // Ground lookups become functional atoms binding `t_k`.
        let mut lookups = Vec::new();
        for c in &conds {
            collect_lookups(&c.lhs, &mut lookups);
            collect_lookups(&c.rhs, &mut lookups);
        }
        let mut conds = conds;
        let mut body = alloc::vec![Literal::Atom(head_gen.clone())];
        body.extend(links.into_iter().map(|(_, l)| l));
        for lk in &lookups {
            let t = fresh_var("t_");
            let ArithExpr::Lookup(p, keys) = lk else {
                unreachable!()
            };
            let keys: Vec<Term> = keys
                .iter()
                .map(|k| match k {
                    ArithExpr::Const(c) => Term::Const(c.clone()),
                    other => Term::var(other.to_string()),
                })
                .collect();
            body.push(Literal::Func(FuncAtom::new(
                p.clone(),
                keys,
                Term::var(t.clone()),
            )));
            for c in &mut conds {
                c.lhs.replace(lk, &ArithExpr::var(t.clone()));
                c.rhs.replace(lk, &ArithExpr::var(t.clone()));
            }
        }
        body.extend(conds.iter().cloned().map(Literal::Compare));
        let mut clause = Rule::new(
            alloc::vec![HeadAtom::Rel(Atom::new(
                String::new(),
                head_gen.args.clone()
            ))],
            body,
        );

        let key = canonical(&clause);
        let mut shared = false;
        let name = match existing
            .iter()
            .chain(current)
            .find(|f| canonical(&f.clause) == key)
        {
            Some(f) => {
                shared = true;
                f.name.clone()
            }
            None => {
                let mut gvars: Vec<&str> = Vec::new();
                for c in &gchains {
                    if let Some(v) = c.generator_var() {
                        if !gvars.contains(&v) {
                            gvars.push(v);
                        }
                    }
                }
                let base = format!("{}_filtered_{}", gen.pred, gvars.join("_"));
                if self.taken.contains(&base) {
                    fresh_name(&format!("{base}_{idx}"), &mut self.taken)
                } else {
                    fresh_name(&base, &mut self.taken)
                }
            }
        };
        if let HeadAtom::Rel(a) = &mut clause.head[0] {
            a.pred = name.clone();
        }
        for lk in &lookups {
            if let ArithExpr::Lookup(p, _) = lk {
                if self.approx_names.contains_key(p) {
                    self.consumers
                        .entry(p.clone())
                        .or_default()
                        .insert(Consumer::Rule(idx));
                }
            }
        }
        let _ = gi;
        FilterSpec {
            rule: idx,
            name,
            generator: gen,
            chains: gchains,
            conditions: conds,
            clause,
            shared,
        }
    }

    /// Defining clauses of every bound predicate the filters read, in
    /// order of first use.
    fn emit(&mut self, filters: &[FilterSpec]) -> Vec<Emitted> {
        let exact_by_name: BTreeMap<String, usize> = self
            .exact
            .iter()
            .enumerate()
            .map(|(i, d)| (d.name.clone(), i))
            .collect();
        let mut order: Vec<String> = Vec::new();
        let mut queue: Vec<String> = Vec::new();
        for f in filters.iter().filter(|f| !f.shared) {
            for l in &f.clause.body {
                if let Some(p) = l.pred() {
                    if exact_by_name.contains_key(p) || self.approx_names.contains_key(p) {
                        queue.push(p.to_string());
                    }
                }
            }
        }
        let mut contribs: BTreeMap<String, Vec<ArithExpr>> = BTreeMap::new();
        let mut i = 0;
        while i < queue.len() {
            let name = queue[i].clone();
            i += 1;
            if order.contains(&name) {
                continue;
            }
            order.push(name.clone());
            if let Some((pred, col, kind)) = self.approx_names.get(&name).cloned() {
                let (lo, hi) = self.approx_contribs(&pred, col);
                let cs =
                    if kind == BoundKind::Lb { lo } else { hi }.expect("named bounds are finite");
                for c in &cs {
                    for n in lookup_names(c) {
                        if self.approx_names.contains_key(&n) {
                            self.consumers
                                .entry(n.clone())
                                .or_default()
                                .insert(Consumer::Nested);
                        }
                        if self.approx_names.contains_key(&n) || exact_by_name.contains_key(&n) {
                            queue.push(n);
                        }
                    }
                }
                contribs.insert(name, cs);
            }
        }
        let mut out = Vec::new();
        for name in order {
            if let Some(&i) = exact_by_name.get(&name) {
                let d = self.exact[i].clone();
                out.push(Emitted {
                    name: BoundName {
                        name: d.name.clone(),
                        base: d.gen.clone(),
                        column: d.column,
                        kind: d.kind,
                    },
                    ty: d.ty.clone(),
                    clauses: alloc::vec![
                        Clause::Decl(bound_declaration(&d.name, &d.ty)),
                        Clause::Agg(d.agg_rule())
                    ],
                });
                continue;
            }
            let (pred, col, kind) = self.approx_names[&name].clone();
            let cs = &contribs[&name];
            let mut clauses =
                alloc::vec![Clause::Decl(bound_declaration(&name, &ColumnType::INT64))];
            let head = FuncAtom::new(name.clone(), Vec::new(), Term::var("n"));
            if self.max_form_is_safe(&name, cs, &exact_by_name) {
                let mut it = cs.iter().cloned();
                let first = it.next().expect("at least one contribution");
                let e = it.fold(first, |acc, c| kind.combine(acc, c));
                clauses.push(Clause::Rule(Rule::new(
                    alloc::vec![HeadAtom::Func(head)],
                    alloc::vec![Literal::Compare(Compare::new(
                        ArithExpr::var("n"),
                        CmpOp::Eq,
                        e
                    ))],
                )));
            } else {
                let cand = fresh_name(&format!("{name}_cand"), &mut self.taken);
                clauses.push(Clause::Decl(Declaration::new(
                    alloc::vec![Literal::Atom(Atom::new(
                        cand.clone(),
                        alloc::vec![Term::var("n")]
                    ))],
                    alloc::vec![Literal::Atom(Atom::new(
                        "int[64]",
                        alloc::vec![Term::var("n")]
                    ))],
                )));
                for c in cs {
                    clauses.push(Clause::Rule(Rule::new(
                        alloc::vec![HeadAtom::Rel(Atom::new(
                            cand.clone(),
                            alloc::vec![Term::var("n")]
                        ))],
                        alloc::vec![Literal::Compare(Compare::new(
                            ArithExpr::var("n"),
                            CmpOp::Eq,
                            c.clone()
                        ))],
                    )));
                }
                clauses.push(Clause::Agg(AggRule {
                    head,
                    method: kind.method(),
                    value_var: "v".into(),
                    body: alloc::vec![Literal::Atom(Atom::new(cand, alloc::vec![Term::var("v")]))],
                    span: Span::default(),
                }));
            }
            out.push(Emitted {
                name: BoundName {
                    name: name.clone(),
                    base: pred,
                    column: col,
                    kind,
                },
                ty: ColumnType::INT64,
                clauses,
            });
        }
        out
    }

    /// `n = max(a[],b[])` is undefined as soon as one operand is; that only
    /// matters if a consumer rule can fire while some operand's generator
    /// is empty.
    fn max_form_is_safe(
        &self,
        name: &str,
        cs: &[ArithExpr],
        exact_by_name: &BTreeMap<String, usize>,
    ) -> bool {
        let consumers = self.consumers.get(name).cloned().unwrap_or_default();
        if consumers.is_empty() || consumers.contains(&Consumer::Nested) {
            return false;
        }
        let mut gens = Vec::new();
        for c in cs {
            match c {
                ArithExpr::Const(_) => {}
                ArithExpr::Lookup(p, keys) if keys.is_empty() => match exact_by_name.get(p) {
                    Some(&i) if self.exact[i].direct => gens.push(self.exact[i].gen.clone()),
                    _ => return false,
                },
                _ => return false,
            }
        }
        consumers.iter().all(|c| {
            let Consumer::Rule(idx) = c else { return false };
            let Clause::Rule(r) = &self.program.clauses[*idx] else {
                return false;
            };
            let g = guaranteed_with(&self.nonempty, &body_preds(&r.body));
            gens.iter().all(|p| g.contains(p))
        })
    }
}

/// `pred[c..]=var` with constant keys binds `var` to a single value.
fn point_lookup(rule: &Rule, var: &str) -> Option<ArithExpr> {
    rule.body.iter().find_map(|l| match l {
        Literal::Func(f)
            if f.value.as_var() == Some(var)
                && f.keys.iter().all(|k| matches!(k, Term::Const(_))) =>
        {
            Some(ArithExpr::Lookup(
                f.pred.clone(),
                f.keys.iter().map(Term::to_expr).collect(),
            ))
        }
        _ => None,
    })
}
