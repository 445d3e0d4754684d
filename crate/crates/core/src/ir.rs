//! Intermediate representation for programs in the dialect.
//!
//! Everything downstream of the parser (validation, analysis, the filter
//! transformation and the engine) works on these types. Equality is
//! structural; source spans never participate in it.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Byte range plus 1-based line/column of a clause in its source text.
#[derive(Clone, Copy, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub column: u32,
}

impl Span {
    pub fn new(start: usize, end: usize, line: u32, column: u32) -> Self {
        debug_assert!(start <= end);
        Span {
            start,
            end,
            line,
            column,
        }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl fmt::Debug for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

/// Opaque entity identifier. Two entities are equal iff their ids and
/// entity types are equal; the `Ord` impl exists only for deterministic
/// output and carries no meaning.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId {
    pub ty: String,
    pub id: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Int(i64),
    Str(String),
    Entity(EntityId),
}

impl Constant {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Constant::Int(v) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(v) => write!(f, "{v}"),
            Constant::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Constant::Entity(e) => write!(f, "#{}:{}", e.ty, e.id),
        }
    }
}

/// Names produced for `_` by the parser look like `_0`, `_1`, ...; user
/// identifiers can never start with an underscore.
pub fn is_wildcard(name: &str) -> bool {
    name.len() > 1 && name.starts_with('_') && name[1..].bytes().all(|b| b.is_ascii_digit())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(Constant),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn int(v: i64) -> Self {
        Term::Const(Constant::Int(v))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn to_expr(&self) -> ArithExpr {
        match self {
            Term::Var(v) => ArithExpr::Var(v.clone()),
            Term::Const(c) => ArithExpr::Const(c.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Builtin {
    Min,
    Max,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Min => "min",
            Builtin::Max => "max",
        }
    }
}

/// Arithmetic expression. There is deliberately no division.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArithExpr {
    /// Integer constants in arithmetic; string constants may only appear as
    /// a bare side of `=` / `!=`.
    Const(Constant),
    Var(String),
    Bin(BinOp, Box<ArithExpr>, Box<ArithExpr>),
    Builtin(Builtin, Box<ArithExpr>, Box<ArithExpr>),
    /// `p[k1,...,kn]`; an empty key list reads a singleton `p[]`.
    Lookup(String, Vec<ArithExpr>),
}

impl ArithExpr {
    pub fn int(v: i64) -> Self {
        ArithExpr::Const(Constant::Int(v))
    }

    pub fn var(name: impl Into<String>) -> Self {
        ArithExpr::Var(name.into())
    }

    pub fn singleton(pred: impl Into<String>) -> Self {
        ArithExpr::Lookup(pred.into(), Vec::new())
    }

    pub fn bin(op: BinOp, l: ArithExpr, r: ArithExpr) -> Self {
        ArithExpr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn add(l: ArithExpr, r: ArithExpr) -> Self {
        Self::bin(BinOp::Add, l, r)
    }

    pub fn sub(l: ArithExpr, r: ArithExpr) -> Self {
        Self::bin(BinOp::Sub, l, r)
    }

    pub fn mul(l: ArithExpr, r: ArithExpr) -> Self {
        Self::bin(BinOp::Mul, l, r)
    }

    pub fn min(l: ArithExpr, r: ArithExpr) -> Self {
        ArithExpr::Builtin(Builtin::Min, Box::new(l), Box::new(r))
    }

    pub fn max(l: ArithExpr, r: ArithExpr) -> Self {
        ArithExpr::Builtin(Builtin::Max, Box::new(l), Box::new(r))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            ArithExpr::Const(Constant::Int(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            ArithExpr::Var(v) => Some(v),
            _ => None,
        }
    }

    /// Variables in evaluation order, including those inside lookup keys.
    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ArithExpr::Const(_) => {}
            ArithExpr::Var(v) => out.push(v),
            ArithExpr::Bin(_, l, r) | ArithExpr::Builtin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            ArithExpr::Lookup(_, keys) => keys.iter().for_each(|k| k.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> BTreeSet<&str> {
        let mut v = Vec::new();
        self.collect_vars(&mut v);
        v.into_iter().collect()
    }

    pub fn mentions(&self, var: &str) -> bool {
        match self {
            ArithExpr::Const(_) => false,
            ArithExpr::Var(v) => v == var,
            ArithExpr::Bin(_, l, r) | ArithExpr::Builtin(_, l, r) => {
                l.mentions(var) || r.mentions(var)
            }
            ArithExpr::Lookup(_, keys) => keys.iter().any(|k| k.mentions(var)),
        }
    }

    /// Predicates read through `p[...]` lookups.
    pub fn lookups<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ArithExpr::Const(_) | ArithExpr::Var(_) => {}
            ArithExpr::Bin(_, l, r) | ArithExpr::Builtin(_, l, r) => {
                l.lookups(out);
                r.lookups(out);
            }
            ArithExpr::Lookup(p, keys) => {
                out.push(p);
                keys.iter().for_each(|k| k.lookups(out));
            }
        }
    }

    pub fn is_ground(&self) -> bool {
        let mut v = Vec::new();
        self.collect_vars(&mut v);
        v.is_empty()
    }

    pub fn rename_vars(&mut self, f: &mut impl FnMut(&str) -> Option<String>) {
        match self {
            ArithExpr::Const(_) => {}
            ArithExpr::Var(v) => {
                if let Some(n) = f(v) {
                    *v = n;
                }
            }
            ArithExpr::Bin(_, l, r) | ArithExpr::Builtin(_, l, r) => {
                l.rename_vars(f);
                r.rename_vars(f);
            }
            ArithExpr::Lookup(_, keys) => keys.iter_mut().for_each(|k| k.rename_vars(f)),
        }
    }

    /// Replaces every occurrence of an expression structurally equal to
    /// `from` with `to`.
    pub fn replace(&mut self, from: &ArithExpr, to: &ArithExpr) {
        if self == from {
            *self = to.clone();
            return;
        }
        match self {
            ArithExpr::Const(_) | ArithExpr::Var(_) => {}
            ArithExpr::Bin(_, l, r) | ArithExpr::Builtin(_, l, r) => {
                l.replace(from, to);
                r.replace(from, to);
            }
            ArithExpr::Lookup(_, keys) => keys.iter_mut().for_each(|k| k.replace(from, to)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        matches!(self, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge)
    }

    pub fn holds<T: Ord>(self, l: &T, r: &T) -> bool {
        match self {
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Gt => l > r,
            CmpOp::Ge => l >= r,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            pred: pred.into(),
            args,
        }
    }
}

/// `pred(key:value)`: a one-to-one functional predicate attaching a
/// primitive value to an entity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RefModeAtom {
    pub pred: String,
    pub key: Term,
    pub value: Term,
}

/// `pred[k1,...,kn]=value`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncAtom {
    pub pred: String,
    pub keys: Vec<Term>,
    pub value: Term,
}

impl FuncAtom {
    pub fn new(pred: impl Into<String>, keys: Vec<Term>, value: Term) -> Self {
        FuncAtom {
            pred: pred.into(),
            keys,
            value,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Compare {
    pub op: CmpOp,
    pub lhs: ArithExpr,
    pub rhs: ArithExpr,
}

impl Compare {
    pub fn new(lhs: ArithExpr, op: CmpOp, rhs: ArithExpr) -> Self {
        Compare { op, lhs, rhs }
    }

    pub fn mentions(&self, var: &str) -> bool {
        self.lhs.mentions(var) || self.rhs.mentions(var)
    }

    pub fn vars(&self) -> BTreeSet<&str> {
        let mut v = self.lhs.vars();
        v.extend(self.rhs.vars());
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Atom(Atom),
    RefMode(RefModeAtom),
    Func(FuncAtom),
    Compare(Compare),
    /// Parsed so that validation can reject it with a precise diagnostic.
    Negated(Box<Literal>),
    /// Top-level `;` in a body; likewise rejected by validation.
    Disjunction(Vec<Vec<Literal>>),
}

impl Literal {
    /// Predicate name of a positive relational/functional literal.
    pub fn pred(&self) -> Option<&str> {
        match self {
            Literal::Atom(a) => Some(&a.pred),
            Literal::RefMode(a) => Some(&a.pred),
            Literal::Func(a) => Some(&a.pred),
            _ => None,
        }
    }

    /// Positional terms of a positive atom: keys first, value last for the
    /// functional forms.
    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Literal::Atom(a) => a.args.iter().collect(),
            Literal::RefMode(a) => alloc::vec![&a.key, &a.value],
            Literal::Func(a) => a.keys.iter().chain(core::iter::once(&a.value)).collect(),
            _ => Vec::new(),
        }
    }

    pub fn is_positive_atom(&self) -> bool {
        matches!(
            self,
            Literal::Atom(_) | Literal::RefMode(_) | Literal::Func(_)
        )
    }

    pub fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Literal::Atom(_) | Literal::RefMode(_) | Literal::Func(_) => {
                out.extend(self.terms().into_iter().filter_map(Term::as_var))
            }
            Literal::Compare(c) => {
                c.lhs.collect_vars(out);
                c.rhs.collect_vars(out);
            }
            Literal::Negated(l) => l.collect_vars(out),
            Literal::Disjunction(ds) => {
                for d in ds {
                    d.iter().for_each(|l| l.collect_vars(out));
                }
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<&str> {
        let mut v = Vec::new();
        self.collect_vars(&mut v);
        v.into_iter().collect()
    }

    pub fn rename_vars(&mut self, f: &mut impl FnMut(&str) -> Option<String>) {
        fn term(t: &mut Term, f: &mut impl FnMut(&str) -> Option<String>) {
            if let Term::Var(v) = t {
                if let Some(n) = f(v) {
                    *v = n;
                }
            }
        }
        match self {
            Literal::Atom(a) => a.args.iter_mut().for_each(|t| term(t, f)),
            Literal::RefMode(a) => {
                term(&mut a.key, f);
                term(&mut a.value, f);
            }
            Literal::Func(a) => {
                a.keys.iter_mut().for_each(|t| term(t, f));
                term(&mut a.value, f);
            }
            Literal::Compare(c) => {
                c.lhs.rename_vars(f);
                c.rhs.rename_vars(f);
            }
            Literal::Negated(l) => l.rename_vars(f),
            Literal::Disjunction(ds) => {
                for d in ds {
                    d.iter_mut().for_each(|l| l.rename_vars(f));
                }
            }
        }
    }
}

/// Head of a derivation rule or fact.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeadAtom {
    Rel(Atom),
    Func(FuncAtom),
}

impl HeadAtom {
    pub fn pred(&self) -> &str {
        match self {
            HeadAtom::Rel(a) => &a.pred,
            HeadAtom::Func(a) => &a.pred,
        }
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            HeadAtom::Rel(a) => a.args.iter().collect(),
            HeadAtom::Func(a) => a.keys.iter().chain(core::iter::once(&a.value)).collect(),
        }
    }

    pub fn as_literal(&self) -> Literal {
        match self {
            HeadAtom::Rel(a) => Literal::Atom(a.clone()),
            HeadAtom::Func(a) => Literal::Func(a.clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    Derivation,
    Fact,
}

/// `head <- body.` or, with an empty body, a fact `head.`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub head: Vec<HeadAtom>,
    pub body: Vec<Literal>,
    pub span: Span,
}

impl Rule {
    pub fn new(head: Vec<HeadAtom>, body: Vec<Literal>) -> Self {
        Rule {
            head,
            body,
            span: Span::default(),
        }
    }

    pub fn kind(&self) -> RuleKind {
        if self.body.is_empty() {
            RuleKind::Fact
        } else {
            RuleKind::Derivation
        }
    }

    pub fn vars(&self) -> BTreeSet<&str> {
        let mut out = Vec::new();
        for h in &self.head {
            out.extend(h.terms().into_iter().filter_map(Term::as_var));
        }
        for l in &self.body {
            l.collect_vars(&mut out);
        }
        out.into_iter().collect()
    }

    /// Renumbers parser-generated wildcard variables in textual order so
    /// that structurally equal rules print and re-parse identically.
    pub fn canonicalize_wildcards(&mut self) {
        let mut next = 0usize;
        let mut rename = |v: &str| -> Option<String> {
            if is_wildcard(v) {
                let n = alloc::format!("_{next}");
                next += 1;
                Some(n)
            } else {
                None
            }
        };
        for h in &mut self.head {
            let mut l = h.as_literal();
            l.rename_vars(&mut rename);
            *h = match l {
                Literal::Atom(a) => HeadAtom::Rel(a),
                Literal::Func(a) => HeadAtom::Func(a),
                _ => unreachable!(),
            };
        }
        for l in &mut self.body {
            l.rename_vars(&mut rename);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggMethod {
    Min,
    Max,
}

impl AggMethod {
    pub fn name(self) -> &'static str {
        match self {
            AggMethod::Min => "min",
            AggMethod::Max => "max",
        }
    }
}

/// `result[k..]=n <- agg<<n=method(v)>> body.`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggRule {
    pub head: FuncAtom,
    pub method: AggMethod,
    /// The aggregated body variable (`v`).
    pub value_var: String,
    pub body: Vec<Literal>,
    pub span: Span,
}

impl AggRule {
    /// Name of the head value variable (`n`).
    pub fn result_var(&self) -> Option<&str> {
        self.head.value.as_var()
    }

    pub fn canonicalize_wildcards(&mut self) {
        let mut next = 0usize;
        let mut rename = |v: &str| -> Option<String> {
            if is_wildcard(v) {
                let n = alloc::format!("_{next}");
                next += 1;
                Some(n)
            } else {
                None
            }
        };
        let mut head = Literal::Func(self.head.clone());
        head.rename_vars(&mut rename);
        if let Literal::Func(f) = head {
            self.head = f;
        }
        for l in &mut self.body {
            l.rename_vars(&mut rename);
        }
    }
}

/// `lhs -> rhs.`: a type declaration or integrity constraint. These are
/// checked statically, never derived.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Declaration {
    pub lhs: Vec<Literal>,
    pub rhs: Vec<Literal>,
    pub span: Span,
}

impl Declaration {
    pub fn new(lhs: Vec<Literal>, rhs: Vec<Literal>) -> Self {
        Declaration {
            lhs,
            rhs,
            span: Span::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Clause {
    Decl(Declaration),
    Rule(Rule),
    Agg(AggRule),
}

impl Clause {
    pub fn span(&self) -> Span {
        match self {
            Clause::Decl(d) => d.span,
            Clause::Rule(r) => r.span,
            Clause::Agg(a) => a.span,
        }
    }
}

/// A program is its clauses in source order; the category views below are
/// what most passes iterate.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub clauses: Vec<Clause>,
}

impl Program {
    pub fn new() -> Self {
        Program::default()
    }

    pub fn push(&mut self, clause: Clause) {
        self.clauses.push(clause);
    }

    pub fn declarations(&self) -> impl Iterator<Item = (usize, &Declaration)> {
        self.clauses
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match c {
                Clause::Decl(d) => Some((i, d)),
                _ => None,
            })
    }

    /// Derivation rules (non-empty body).
    pub fn rules(&self) -> impl Iterator<Item = (usize, &Rule)> {
        self.clauses
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match c {
                Clause::Rule(r) if r.kind() == RuleKind::Derivation => Some((i, r)),
                _ => None,
            })
    }

    pub fn facts(&self) -> impl Iterator<Item = (usize, &Rule)> {
        self.clauses
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match c {
                Clause::Rule(r) if r.kind() == RuleKind::Fact => Some((i, r)),
                _ => None,
            })
    }

    pub fn agg_rules(&self) -> impl Iterator<Item = (usize, &AggRule)> {
        self.clauses
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match c {
                Clause::Agg(a) => Some((i, a)),
                _ => None,
            })
    }

    /// Every predicate name appearing in a head, body, or declaration
    /// subject, excluding built-in type predicates.
    pub fn predicates(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn lits(ls: &[Literal], out: &mut BTreeSet<String>) {
            for l in ls {
                match l {
                    Literal::Compare(c) => {
                        let mut v = Vec::new();
                        c.lhs.lookups(&mut v);
                        c.rhs.lookups(&mut v);
                        out.extend(v.into_iter().map(String::from));
                    }
                    Literal::Negated(inner) => lits(core::slice::from_ref(inner), out),
                    Literal::Disjunction(ds) => ds.iter().for_each(|d| lits(d, out)),
                    _ => {
                        if let Some(p) = l.pred() {
                            if !crate::schema::is_builtin_type(p) {
                                out.insert(String::from(p));
                            }
                        }
                    }
                }
            }
        }
        for c in &self.clauses {
            match c {
                Clause::Decl(d) => lits(&d.lhs, &mut out),
                Clause::Rule(r) => {
                    out.extend(r.head.iter().map(|h| String::from(h.pred())));
                    lits(&r.body, &mut out);
                }
                Clause::Agg(a) => {
                    out.insert(a.head.pred.clone());
                    lits(&a.body, &mut out);
                }
            }
        }
        out
    }
}
