//! Static checks over a parsed program.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::ir::{ArithExpr, Clause, CmpOp, Constant, HeadAtom, Literal, Program, Span, Term};
use crate::schema::{is_builtin_type, ColumnType, Schema};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    /// Index of the offending clause in `Program::clauses`.
    pub clause: usize,
    pub span: Span,
    pub kind: DiagnosticKind,
}

impl Diagnostic {
    pub fn new(clause: usize, span: Span, kind: DiagnosticKind) -> Self {
        Diagnostic { clause, span, kind }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiagnosticKind {
    UndeclaredPredicate(String),
    ArityMismatch {
        pred: String,
        expected: usize,
        found: usize,
    },
    NotFunctional(String),
    EntityInArithmetic(String),
    StringInArithmetic(String),
    UnboundDeclarationVariable(String),
    NotSupported(&'static str),
    MissingColumnType(String),
    UnresolvedType(String),
    ConflictingDeclaration(String),
    AggValueUnbound(String),
    AggKeyUnbound(String),
    NonNumericAggregate(String),
    NonGroundFact(String),
    TypeMismatch {
        pred: String,
        column: usize,
    },
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use DiagnosticKind::*;
        match self {
            UndeclaredPredicate(p) => write!(f, "UndeclaredPredicate({p})"),
            ArityMismatch {
                pred,
                expected,
                found,
            } => {
                write!(
                    f,
                    "ArityMismatch({pred}: expected {expected}, found {found})"
                )
            }
            NotFunctional(p) => write!(f, "NotFunctional({p})"),
            EntityInArithmetic(v) => write!(f, "EntityInArithmetic({v})"),
            StringInArithmetic(v) => write!(f, "StringInArithmetic({v})"),
            UnboundDeclarationVariable(v) => write!(f, "UnboundDeclarationVariable({v})"),
            NotSupported(what) => write!(f, "NotSupported({what})"),
            MissingColumnType(p) => write!(f, "MissingColumnType({p})"),
            UnresolvedType(p) => write!(f, "UnresolvedType({p})"),
            ConflictingDeclaration(p) => write!(f, "ConflictingDeclaration({p})"),
            AggValueUnbound(v) => write!(f, "AggValueUnbound({v})"),
            AggKeyUnbound(v) => write!(f, "AggKeyUnbound({v})"),
            NonNumericAggregate(v) => write!(f, "NonNumericAggregate({v})"),
            NonGroundFact(p) => write!(f, "NonGroundFact({p})"),
            TypeMismatch { pred, column } => write!(f, "TypeMismatch({pred}, column {column})"),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "clause {} (line {}:{}): {}",
            self.clause, self.span.line, self.span.column, self.kind
        )
    }
}

/// Runs every static check; never stops at the first problem.
pub fn validate(program: &Program) -> Vec<Diagnostic> {
    let (schema, mut diags) = Schema::build(program);
    for (idx, clause) in program.clauses.iter().enumerate() {
        let mut cx = Checker {
            schema: &schema,
            idx,
            span: clause.span(),
            diags: &mut diags,
        };
        match clause {
            Clause::Decl(d) => {
                let lhs_vars: BTreeSet<&str> = d.lhs.iter().flat_map(|l| l.vars()).collect();
                for l in &d.lhs {
                    cx.literal_shape(l, false);
                }
                for l in &d.rhs {
                    for v in l.vars() {
                        if !lhs_vars.contains(v) {
                            cx.push(DiagnosticKind::UnboundDeclarationVariable(v.into()));
                        }
                    }
                    match l {
                        Literal::Atom(a) if is_builtin_type(&a.pred) => {}
                        _ => cx.literal_shape(l, false),
                    }
                }
            }
            Clause::Rule(r) => {
                for h in &r.head {
                    cx.literal_shape(&h.as_literal(), true);
                }
                for l in &r.body {
                    cx.literal_shape(l, false);
                }
                if r.body.is_empty() {
                    for h in &r.head {
                        cx.fact(h);
                    }
                } else {
                    cx.arithmetic(&r.body);
                }
            }
            Clause::Agg(a) => {
                cx.literal_shape(&Literal::Func(a.head.clone()), true);
                for l in &a.body {
                    cx.literal_shape(l, false);
                }
                cx.arithmetic(&a.body);
                let body_vars: BTreeSet<&str> = a.body.iter().flat_map(|l| l.vars()).collect();
                if !body_vars.contains(a.value_var.as_str()) {
                    cx.push(DiagnosticKind::AggValueUnbound(a.value_var.clone()));
                }
                for k in a.head.keys.iter().filter_map(Term::as_var) {
                    if !body_vars.contains(k) {
                        cx.push(DiagnosticKind::AggKeyUnbound(k.into()));
                    }
                }
                let types = var_types(&schema, &a.body);
                if let Some(t) = types.get(a.value_var.as_str()) {
                    if !t.is_numeric() {
                        cx.push(DiagnosticKind::NonNumericAggregate(a.value_var.clone()));
                    }
                }
            }
        }
    }
    diags
}

struct Checker<'a> {
    schema: &'a Schema,
    idx: usize,
    span: Span,
    diags: &'a mut Vec<Diagnostic>,
}

impl Checker<'_> {
    fn push(&mut self, kind: DiagnosticKind) {
        let d = Diagnostic::new(self.idx, self.span, kind);
        if !self.diags.contains(&d) {
            self.diags.push(d);
        }
    }

    fn pred_arity(&mut self, pred: &str, found: usize, functional_keys: Option<usize>) {
        let Some(sig) = self.schema.get(pred) else {
            self.push(DiagnosticKind::UndeclaredPredicate(pred.into()));
            return;
        };
        if sig.arity() != found {
            self.push(DiagnosticKind::ArityMismatch {
                pred: pred.into(),
                expected: sig.arity(),
                found,
            });
        } else if let Some(k) = functional_keys {
            if sig.key_arity != Some(k) {
                self.push(DiagnosticKind::NotFunctional(pred.into()));
            }
        }
    }

    fn literal_shape(&mut self, l: &Literal, head: bool) {
        match l {
            Literal::Atom(a) => {
                if is_builtin_type(&a.pred) {
                    self.push(DiagnosticKind::NotSupported(
                        "type predicate outside a declaration",
                    ));
                } else {
                    self.pred_arity(&a.pred, a.args.len(), None);
                }
            }
            Literal::RefMode(r) => {
                if head {
                    self.push(DiagnosticKind::NotSupported(
                        "reference-mode atom in a rule head",
                    ));
                }
                self.pred_arity(&r.pred, 2, Some(1));
            }
            Literal::Func(f) => self.pred_arity(&f.pred, f.keys.len() + 1, Some(f.keys.len())),
            Literal::Compare(c) => {
                self.expr_lookups(&c.lhs);
                self.expr_lookups(&c.rhs);
            }
            Literal::Negated(_) => self.push(DiagnosticKind::NotSupported("negation")),
            Literal::Disjunction(_) => self.push(DiagnosticKind::NotSupported("disjunction")),
        }
    }

    fn expr_lookups(&mut self, e: &ArithExpr) {
        match e {
            ArithExpr::Const(_) | ArithExpr::Var(_) => {}
            ArithExpr::Bin(_, l, r) | ArithExpr::Builtin(_, l, r) => {
                self.expr_lookups(l);
                self.expr_lookups(r);
            }
            ArithExpr::Lookup(p, keys) => {
                self.pred_arity(p, keys.len() + 1, Some(keys.len()));
                keys.iter().for_each(|k| self.expr_lookups(k));
            }
        }
    }

    fn fact(&mut self, h: &HeadAtom) {
        let Some(sig) = self.schema.get(h.pred()) else {
            return;
        };
        for (col, t) in h.terms().into_iter().enumerate() {
            match t {
                Term::Var(_) => {
                    self.push(DiagnosticKind::NonGroundFact(h.pred().into()));
                    return;
                }
                Term::Const(c) => {
                    let ok = match (sig.columns.get(col).map(|c| &c.ty), c) {
                        (Some(ColumnType::Int { unsigned, .. }), Constant::Int(v)) => {
                            !unsigned || *v >= 0
                        }
                        (Some(ColumnType::Str), Constant::Str(_)) => true,
                        (None, _) => true,
                        _ => false,
                    };
                    if !ok {
                        self.push(DiagnosticKind::TypeMismatch {
                            pred: h.pred().into(),
                            column: col,
                        });
                    }
                }
            }
        }
    }

    /// Entity and string variables may be compared for (in)equality but
    /// never ordered or computed with.
    fn arithmetic(&mut self, body: &[Literal]) {
        let types = var_types(self.schema, body);
        for l in body {
            let Literal::Compare(c) = l else { continue };
            let bare = |e: &ArithExpr| matches!(e, ArithExpr::Var(_) | ArithExpr::Const(_));
            let mut arith_vars = Vec::new();
            for side in [&c.lhs, &c.rhs] {
                if c.op.is_ordering() || !bare(side) {
                    arithmetic_positions(side, &mut arith_vars);
                }
            }
            if matches!(c.op, CmpOp::Eq | CmpOp::Ne) && !(bare(&c.lhs) && bare(&c.rhs)) {
                // `x = y + 1`: a bare side equated with arithmetic is arithmetic too.
                for side in [&c.lhs, &c.rhs] {
                    if let ArithExpr::Var(v) = side {
                        arith_vars.push(v);
                    }
                }
            }
            for v in arith_vars {
                match types.get(v) {
                    Some(ColumnType::Entity(_)) => {
                        self.push(DiagnosticKind::EntityInArithmetic(v.into()))
                    }
                    Some(ColumnType::Str) => {
                        self.push(DiagnosticKind::StringInArithmetic(v.into()))
                    }
                    _ => {}
                }
            }
        }
    }
}

fn arithmetic_positions<'a>(e: &'a ArithExpr, out: &mut Vec<&'a str>) {
    match e {
        ArithExpr::Const(_) | ArithExpr::Lookup(..) => {}
        ArithExpr::Var(v) => out.push(v),
        ArithExpr::Bin(_, l, r) | ArithExpr::Builtin(_, l, r) => {
            arithmetic_positions(l, out);
            arithmetic_positions(r, out);
        }
    }
}

/// Column types of variables bound by positive atoms in a body.
pub(crate) fn var_types<'a>(schema: &Schema, body: &'a [Literal]) -> BTreeMap<&'a str, ColumnType> {
    let mut out = BTreeMap::new();
    for l in body {
        let Some(pred) = l.pred() else { continue };
        let Some(sig) = schema.get(pred) else {
            continue;
        };
        for (t, col) in l.terms().into_iter().zip(&sig.columns) {
            if let Term::Var(v) = t {
                out.entry(v.as_str()).or_insert_with(|| col.ty.clone());
            }
        }
    }
    out
}
