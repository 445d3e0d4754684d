//! Predicate signatures derived from the declarations of a program.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::ir::{CmpOp, Declaration, Literal, Program, Term};
use crate::validate::{Diagnostic, DiagnosticKind};

/// Built-in primitive type predicates usable on the right of `->`.
pub fn is_builtin_type(pred: &str) -> bool {
    parse_builtin_type(pred).is_some()
}

fn parse_builtin_type(pred: &str) -> Option<ColumnType> {
    if pred == "string" {
        return Some(ColumnType::Str);
    }
    let (unsigned, rest) = if let Some(r) = pred.strip_prefix("uint[") {
        (true, r)
    } else {
        (false, pred.strip_prefix("int[")?)
    };
    let bits: u8 = rest.strip_suffix(']')?.parse().ok()?;
    matches!(bits, 8 | 16 | 32 | 64).then_some(ColumnType::Int { unsigned, bits })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColumnType {
    Int { unsigned: bool, bits: u8 },
    Str,
    Entity(String),
}

impl ColumnType {
    pub const INT64: ColumnType = ColumnType::Int {
        unsigned: false,
        bits: 64,
    };

    pub fn is_numeric(&self) -> bool {
        matches!(self, ColumnType::Int { .. })
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnType::Int {
                unsigned: true,
                bits,
            } => write!(f, "uint[{bits}]"),
            ColumnType::Int {
                unsigned: false,
                bits,
            } => write!(f, "int[{bits}]"),
            ColumnType::Str => f.write_str("string"),
            ColumnType::Entity(e) => f.write_str(e),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub ty: ColumnType,
    /// Constant lower/upper bounds stated in the declaration, e.g. `v<=9`.
    pub min: Option<i64>,
    pub max: Option<i64>,
}

impl Column {
    pub fn new(ty: ColumnType) -> Self {
        Column {
            ty,
            min: None,
            max: None,
        }
    }

    pub fn nonneg(&self) -> bool {
        matches!(self.ty, ColumnType::Int { unsigned: true, .. })
            || self.min.is_some_and(|m| m >= 0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub columns: Vec<Column>,
    /// `Some(k)`: functional, the first `k` columns determine the last.
    pub key_arity: Option<usize>,
    pub refmode: bool,
    pub entity: bool,
}

impl Signature {
    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn is_functional(&self) -> bool {
        self.key_arity.is_some()
    }
}

/// Signatures for every declared predicate.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schema {
    pub sigs: BTreeMap<String, Signature>,
    /// Entity predicate -> its reference-mode predicate.
    pub refmodes: BTreeMap<String, String>,
}

enum TypeRef {
    Known(ColumnType),
    Named(String),
}

struct PendingDecl {
    pred: String,
    clause: usize,
    columns: Vec<(Option<TypeRef>, Option<i64>, Option<i64>)>,
    key_arity: Option<usize>,
    refmode: bool,
    entity: bool,
}

impl Schema {
    pub fn get(&self, pred: &str) -> Option<&Signature> {
        self.sigs.get(pred)
    }

    pub fn column(&self, pred: &str, col: usize) -> Option<&Column> {
        self.sigs.get(pred).and_then(|s| s.columns.get(col))
    }

    /// Builds the schema, reporting malformed or conflicting declarations.
    pub fn build(program: &Program) -> (Schema, Vec<Diagnostic>) {
        let mut diags = Vec::new();
        let mut pending: Vec<PendingDecl> = Vec::new();
        for (idx, decl) in program.declarations() {
            if let Some(p) = subject(idx, decl, &mut diags) {
                pending.push(p);
            }
        }

        let mut schema = Schema::default();
        // Entities first so named types can be resolved against them.
        for p in pending.iter().filter(|p| p.entity) {
            schema.sigs.insert(
                p.pred.clone(),
                Signature {
                    columns: alloc::vec![Column::new(ColumnType::Entity(p.pred.clone()))],
                    key_arity: None,
                    refmode: false,
                    entity: true,
                },
            );
        }
        // Named types may refer to non-entity unary predicates declared
        // later; resolve in rounds.
        let mut remaining: Vec<PendingDecl> = pending.into_iter().filter(|p| !p.entity).collect();
        loop {
            let before = remaining.len();
            let mut next = Vec::new();
            for p in remaining {
                match resolve(&schema, &p) {
                    Some(columns) => {
                        let sig = Signature {
                            columns,
                            key_arity: p.key_arity,
                            refmode: p.refmode,
                            entity: false,
                        };
                        match schema.sigs.get(&p.pred) {
                            Some(existing) if *existing != sig => diags.push(Diagnostic::new(
                                p.clause,
                                program.clauses[p.clause].span(),
                                DiagnosticKind::ConflictingDeclaration(p.pred.clone()),
                            )),
                            Some(_) => {}
                            None => {
                                schema.sigs.insert(p.pred.clone(), sig);
                            }
                        }
                    }
                    None => next.push(p),
                }
            }
            remaining = next;
            if remaining.is_empty() || remaining.len() == before {
                break;
            }
        }
        for p in remaining {
            diags.push(Diagnostic::new(
                p.clause,
                program.clauses[p.clause].span(),
                DiagnosticKind::UnresolvedType(p.pred.clone()),
            ));
        }
        for (pred, sig) in &schema.sigs {
            if sig.refmode {
                if let Some(Column {
                    ty: ColumnType::Entity(e),
                    ..
                }) = sig.columns.first()
                {
                    schema.refmodes.insert(e.clone(), pred.clone());
                }
            }
        }
        (schema, diags)
    }
}

fn resolve(schema: &Schema, p: &PendingDecl) -> Option<Vec<Column>> {
    p.columns
        .iter()
        .map(|(t, min, max)| {
            let ty = match t.as_ref()? {
                TypeRef::Known(t) => t.clone(),
                TypeRef::Named(n) => {
                    let sig = schema.sigs.get(n)?;
                    if sig.entity {
                        ColumnType::Entity(n.clone())
                    } else if sig.arity() == 1 {
                        sig.columns[0].ty.clone()
                    } else {
                        return None;
                    }
                }
            };
            Some(Column {
                ty,
                min: *min,
                max: *max,
            })
        })
        .collect()
}

fn subject(idx: usize, decl: &Declaration, diags: &mut Vec<Diagnostic>) -> Option<PendingDecl> {
    let refmodes: Vec<_> = decl
        .lhs
        .iter()
        .filter_map(|l| match l {
            Literal::RefMode(r) => Some(r),
            _ => None,
        })
        .collect();

    // Types stated on the right: `string(t)`, `int[64](w)`, `digit(i)`.
    let type_of = |var: &str| -> Option<TypeRef> {
        decl.rhs.iter().find_map(|l| match l {
            Literal::Atom(a) if a.args.len() == 1 && a.args[0].as_var() == Some(var) => {
                Some(match parse_builtin_type(&a.pred) {
                    Some(t) => TypeRef::Known(t),
                    None => TypeRef::Named(a.pred.clone()),
                })
            }
            _ => None,
        })
    };
    let bounds_of = |var: &str| -> (Option<i64>, Option<i64>) {
        let mut lo: Option<i64> = None;
        let mut hi: Option<i64> = None;
        for l in &decl.rhs {
            let Literal::Compare(c) = l else { continue };
            let (op, k) = match (
                c.lhs.as_var(),
                c.rhs.as_int(),
                c.rhs.as_var(),
                c.lhs.as_int(),
            ) {
                (Some(v), Some(k), _, _) if v == var => (c.op, k),
                (_, _, Some(v), Some(k)) if v == var => (flip(c.op), k),
                _ => continue,
            };
            match op {
                CmpOp::Ge => lo = Some(lo.map_or(k, |x| x.max(k))),
                CmpOp::Gt => {
                    lo = Some(lo.map_or(k.saturating_add(1), |x| x.max(k.saturating_add(1))))
                }
                CmpOp::Le => hi = Some(hi.map_or(k, |x| x.min(k))),
                CmpOp::Lt => {
                    hi = Some(hi.map_or(k.saturating_sub(1), |x| x.min(k.saturating_sub(1))))
                }
                CmpOp::Eq => {
                    lo = Some(lo.map_or(k, |x| x.max(k)));
                    hi = Some(hi.map_or(k, |x| x.min(k)));
                }
                CmpOp::Ne => {}
            }
        }
        (lo, hi)
    };
    let column_for = |t: &Term| match t {
        Term::Var(v) => {
            let (lo, hi) = bounds_of(v);
            (type_of(v), lo, hi)
        }
        Term::Const(_) => (None, None, None),
    };

    if let [r] = refmodes.as_slice() {
        // `digit(d), val(d:v) -> uint[8](v)`: the key's type comes from the
        // unary atom over the key variable on the left.
        let key_ty = r.key.as_var().and_then(|k| {
            decl.lhs.iter().find_map(|l| match l {
                Literal::Atom(a) if a.args.len() == 1 && a.args[0].as_var() == Some(k) => {
                    Some(TypeRef::Named(a.pred.clone()))
                }
                _ => None,
            })
        });
        let key_ty = key_ty.or_else(|| r.key.as_var().and_then(type_of));
        let (vt, lo, hi) = column_for(&r.value);
        return Some(PendingDecl {
            pred: r.pred.clone(),
            clause: idx,
            columns: alloc::vec![(key_ty, None, None), (vt, lo, hi)],
            key_arity: Some(1),
            refmode: true,
            entity: false,
        });
    }
    if !refmodes.is_empty() {
        return None;
    }
    match decl.lhs.as_slice() {
        [Literal::Atom(a)] if a.args.len() == 1 && decl.rhs.is_empty() => Some(PendingDecl {
            pred: a.pred.clone(),
            clause: idx,
            columns: Vec::new(),
            key_arity: None,
            refmode: false,
            entity: true,
        }),
        [Literal::Atom(a)] => {
            let columns: Vec<_> = a.args.iter().map(column_for).collect();
            if columns.iter().any(|c| c.0.is_none()) {
                diags.push(Diagnostic::new(
                    idx,
                    decl.span,
                    DiagnosticKind::MissingColumnType(a.pred.clone()),
                ));
                return None;
            }
            Some(PendingDecl {
                pred: a.pred.clone(),
                clause: idx,
                columns,
                key_arity: None,
                refmode: false,
                entity: false,
            })
        }
        [Literal::Func(f)] => {
            let columns: Vec<_> = f
                .keys
                .iter()
                .chain(core::iter::once(&f.value))
                .map(column_for)
                .collect();
            if columns.iter().any(|c| c.0.is_none()) {
                diags.push(Diagnostic::new(
                    idx,
                    decl.span,
                    DiagnosticKind::MissingColumnType(f.pred.clone()),
                ));
                return None;
            }
            Some(PendingDecl {
                pred: f.pred.clone(),
                clause: idx,
                columns,
                key_arity: Some(f.keys.len()),
                refmode: false,
                entity: false,
            })
        }
        // Multi-atom left sides are integrity constraints, not types.
        _ => None,
    }
}

pub(crate) fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Ge => CmpOp::Le,
        o => o,
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols: Vec<String> = self.columns.iter().map(|c| c.ty.to_string()).collect();
        write!(f, "({})", cols.join(", "))
    }
}
