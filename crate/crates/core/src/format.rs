//! Pretty-printer producing concrete syntax that re-parses to an equal
//! program.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use crate::ir::*;

/// Renders a whole program, one clause per line (long bodies wrap).
pub fn format_program(program: &Program) -> String {
    let mut out = String::new();
    for c in &program.clauses {
        let _ = writeln!(out, "{}", ClauseDisplay(c));
    }
    out
}

pub fn format_clause(clause: &Clause) -> String {
    alloc::format!("{}", ClauseDisplay(clause))
}

struct ClauseDisplay<'a>(&'a Clause);

impl fmt::Display for ClauseDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Clause::Decl(d) => {
                write_list(f, &d.lhs, ", ")?;
                if d.rhs.is_empty() {
                    f.write_str(" ->.")
                } else {
                    f.write_str(" -> ")?;
                    write_list(f, &d.rhs, ", ")?;
                    f.write_str(".")
                }
            }
            Clause::Rule(r) => {
                for (i, h) in r.head.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", h.as_literal())?;
                }
                if r.body.is_empty() {
                    return f.write_str(".");
                }
                f.write_str(" <-")?;
                write_body(f, &r.body)?;
                f.write_str(".")
            }
            Clause::Agg(a) => {
                write!(
                    f,
                    "{} <- agg<<{}={}({})>>",
                    Literal::Func(a.head.clone()),
                    a.result_var().unwrap_or("_"),
                    a.method.name(),
                    a.value_var
                )?;
                write_body(f, &a.body)?;
                f.write_str(".")
            }
        }
    }
}

fn write_body(f: &mut fmt::Formatter<'_>, body: &[Literal]) -> fmt::Result {
    if body.len() <= 3 {
        f.write_str(" ")?;
        write_list(f, body, ", ")
    } else {
        f.write_str("\n   ")?;
        write_list(f, body, ",\n   ")
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, lits: &[Literal], sep: &str) -> fmt::Result {
    for (i, l) in lits.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{l}")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) if is_wildcard(v) => f.write_str("_"),
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

fn write_terms(f: &mut fmt::Formatter<'_>, terms: &[Term]) -> fmt::Result {
    for (i, t) in terms.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{t}")?;
    }
    Ok(())
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Atom(a) => {
                write!(f, "{}(", a.pred)?;
                write_terms(f, &a.args)?;
                f.write_str(")")
            }
            Literal::RefMode(r) => write!(f, "{}({}:{})", r.pred, r.key, r.value),
            Literal::Func(a) => {
                write!(f, "{}[", a.pred)?;
                write_terms(f, &a.keys)?;
                write!(f, "]={}", a.value)
            }
            Literal::Compare(c) => write!(f, "{} {} {}", c.lhs, c.op.symbol(), c.rhs),
            Literal::Negated(l) => write!(f, "!{l}"),
            Literal::Disjunction(alts) => {
                for (i, alt) in alts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ; ")?;
                    }
                    write_list(f, alt, ", ")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Compare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

fn precedence(e: &ArithExpr) -> u8 {
    match e {
        ArithExpr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        ArithExpr::Bin(BinOp::Mul, ..) => 2,
        _ => 3,
    }
}

impl fmt::Display for ArithExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArithExpr::Const(c) => write!(f, "{c}"),
            ArithExpr::Var(v) => f.write_str(v),
            ArithExpr::Bin(op, l, r) => {
                let p = precedence(self);
                // Left-associative: the right operand needs parentheses at
                // equal precedence to keep the tree shape.
                if precedence(l) < p {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                match op {
                    BinOp::Mul => f.write_str("*")?,
                    op => write!(f, " {} ", op.symbol())?,
                }
                if precedence(r) <= p {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
            ArithExpr::Builtin(b, l, r) => write!(f, "{}({l},{r})", b.name()),
            ArithExpr::Lookup(p, keys) => {
                write!(f, "{p}[")?;
                let keys: Vec<String> = keys.iter().map(|k| alloc::format!("{k}")).collect();
                f.write_str(&keys.join(","))?;
                f.write_str("]")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    #[test]
    fn empty_program_prints_nothing() {
        assert_eq!(format_program(&Program::new()), "");
    }

    #[test]
    fn refmode_and_aggregate_syntax() {
        let p = parse_program(
            "digit(d), val(d:v) -> uint[8](v), v<=9.\nub_e[]=n <- agg<<n=max(v)>> e(_,v).",
        )
        .unwrap();
        let text = format_program(&p);
        assert!(text.contains("val(d:v)"), "{text}");
        assert!(text.contains("agg<<n=max(v)>>"), "{text}");
        assert!(text.contains("e(_,v)"), "{text}");
        assert_eq!(parse_program(&text).unwrap(), p);
    }

    #[test]
    fn parentheses_preserve_tree_shape() {
        for src in [
            "p(x) <- q(x), x = a - (b - c).",
            "p(x) <- q(x), x = (a + b)*c.",
            "p(x) <- q(x), x = a*(b*c).",
        ] {
            let p = parse_program(src).unwrap();
            assert_eq!(parse_program(&format_program(&p)).unwrap(), p, "{src}");
        }
    }
}
