//! Recursive-descent parser for the concrete `.dl` syntax.
//!
//! ```text
//! program := clause*
//! clause  := literals ( "<-" [agg] body | "->" [literals] )? "."
//! agg     := "agg" "<<" var "=" ("min"|"max") "(" var ")" ">>"
//! body    := literals (";" literals)*
//! ```
//! `*` binds tighter than `+`/`-`; all binary operators are
//! left-associative. `//` starts a comment.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::ir::*;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub span: Span,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: expected {}, found {}",
            self.span.line,
            self.span.column,
            self.expected.join(" or "),
            self.found
        )
    }
}

impl core::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(i128),
    Str(String),
    Wild,
    LArrow,
    RArrow,
    Dot,
    Comma,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Colon,
    AggOpen,
    AggClose,
    Bang,
    Semi,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "identifier `{s}`"),
            Tok::Int(v) => return write!(f, "integer `{v}`"),
            Tok::Str(s) => return write!(f, "string {s:?}"),
            Tok::Wild => "`_`",
            Tok::LArrow => "`<-`",
            Tok::RArrow => "`->`",
            Tok::Dot => "`.`",
            Tok::Comma => "`,`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrack => "`[`",
            Tok::RBrack => "`]`",
            Tok::Eq => "`=`",
            Tok::Ne => "`!=`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Gt => "`>`",
            Tok::Ge => "`>=`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::Colon => "`:`",
            Tok::AggOpen => "`<<`",
            Tok::AggClose => "`>>`",
            Tok::Bang => "`!`",
            Tok::Semi => "`;`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1u32, 0usize);
    let err =
        |start: usize, line: u32, line_start: usize, found: String, expected: &str| ParseError {
            span: Span::new(start, start, line, (start - line_start) as u32 + 1),
            expected: alloc::vec![expected.to_string()],
            found,
        };
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let two = |a: u8, b: u8| c == a && bytes.get(i + 1) == Some(&b);
        let (tok, len) = if two(b'<', b'-') {
            (Tok::LArrow, 2)
        } else if two(b'-', b'>') {
            (Tok::RArrow, 2)
        } else if two(b'<', b'<') {
            (Tok::AggOpen, 2)
        } else if two(b'>', b'>') {
            (Tok::AggClose, 2)
        } else if two(b'<', b'=') {
            (Tok::Le, 2)
        } else if two(b'>', b'=') {
            (Tok::Ge, 2)
        } else if two(b'!', b'=') {
            (Tok::Ne, 2)
        } else {
            match c {
                b'.' => (Tok::Dot, 1),
                b',' => (Tok::Comma, 1),
                b'(' => (Tok::LParen, 1),
                b')' => (Tok::RParen, 1),
                b'[' => (Tok::LBrack, 1),
                b']' => (Tok::RBrack, 1),
                b'=' => (Tok::Eq, 1),
                b'<' => (Tok::Lt, 1),
                b'>' => (Tok::Gt, 1),
                b'+' => (Tok::Plus, 1),
                b'-' => (Tok::Minus, 1),
                b'*' => (Tok::Star, 1),
                b':' => (Tok::Colon, 1),
                b'!' => (Tok::Bang, 1),
                b';' => (Tok::Semi, 1),
                b'"' => {
                    let mut s = String::new();
                    let mut j = i + 1;
                    let mut chars = text[j..].char_indices();
                    loop {
                        match chars.next() {
                            None => {
                                return Err(err(
                                    start,
                                    line,
                                    line_start,
                                    "end of input".into(),
                                    "closing `\"`",
                                ))
                            }
                            Some((k, '"')) => {
                                j += k + 1;
                                break;
                            }
                            Some((_, '\\')) => match chars.next() {
                                Some((_, 'n')) => s.push('\n'),
                                Some((_, '"')) => s.push('"'),
                                Some((_, '\\')) => s.push('\\'),
                                _ => {
                                    return Err(err(
                                        start,
                                        line,
                                        line_start,
                                        "bad escape".into(),
                                        "`\\\"`, `\\\\` or `\\n`",
                                    ))
                                }
                            },
                            Some((_, '\n')) => {
                                return Err(err(
                                    start,
                                    line,
                                    line_start,
                                    "newline".into(),
                                    "closing `\"`",
                                ))
                            }
                            Some((_, ch)) => s.push(ch),
                        }
                    }
                    (Tok::Str(s), j - i)
                }
                b'0'..=b'9' => {
                    let mut j = i;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    let v: i128 = text[i..j].parse().map_err(|_| {
                        err(
                            start,
                            line,
                            line_start,
                            text[i..j].into(),
                            "integer literal in range",
                        )
                    })?;
                    if v > i64::MAX as i128 + 1 {
                        return Err(err(
                            start,
                            line,
                            line_start,
                            text[i..j].into(),
                            "64-bit integer",
                        ));
                    }
                    (Tok::Int(v), j - i)
                }
                b'_' if !bytes
                    .get(i + 1)
                    .is_some_and(|b| b.is_ascii_alphanumeric() || *b == b'_') =>
                {
                    (Tok::Wild, 1)
                }
                c if c.is_ascii_alphabetic() => {
                    let mut j = i;
                    while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                    {
                        j += 1;
                    }
                    (Tok::Ident(text[i..j].into()), j - i)
                }
                _ => {
                    let ch = text[i..].chars().next().unwrap_or('?');
                    return Err(err(start, line, line_start, format!("`{ch}`"), "a token"));
                }
            }
        };
        out.push((
            tok,
            Span::new(start, start + len, line, (start - line_start) as u32 + 1),
        ));
        i += len;
    }
    let end = Span::new(
        text.len(),
        text.len(),
        line,
        (text.len() - line_start) as u32 + 1,
    );
    out.push((Tok::Eof, end));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    wildcards: usize,
}

type PResult<T> = Result<T, ParseError>;

/// Parses a whole program. The first error aborts.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        wildcards: 0,
    };
    let mut program = Program::new();
    while *p.peek() != Tok::Eof {
        program.push(p.clause()?);
    }
    Ok(program)
}

/// Parses a single body literal such as `w - wp <= 100`.
pub fn parse_literal(text: &str) -> Result<Literal, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        wildcards: 0,
    };
    let l = p.literal()?;
    p.expect(Tok::Eof)?;
    Ok(l)
}

/// Parses an arithmetic expression such as `100*s + 10*a + m`.
pub fn parse_expr(text: &str) -> Result<ArithExpr, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        wildcards: 0,
    };
    let e = p.expr()?;
    p.expect(Tok::Eof)?;
    Ok(e)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        Err(ParseError {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        })
    }

    fn eat(&mut self, t: Tok) -> bool {
        if *self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> PResult<()> {
        if self.eat(t.clone()) {
            Ok(())
        } else {
            self.error(&[&t.to_string()])
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn fresh_wildcard(&mut self) -> String {
        let n = format!("_{}", self.wildcards);
        self.wildcards += 1;
        n
    }

    fn clause(&mut self) -> PResult<Clause> {
        self.wildcards = 0;
        let start = self.span();
        let head = self.literal_list()?;
        let clause = match self.peek() {
            Tok::LArrow => {
                self.bump();
                if matches!(self.peek(), Tok::Ident(s) if s == "agg")
                    && *self.peek_at(1) == Tok::AggOpen
                {
                    self.agg_rule(head, start)?
                } else {
                    let body = self.body()?;
                    Clause::Rule(Rule {
                        head: self.rule_head(head, start)?,
                        body,
                        span: start,
                    })
                }
            }
            Tok::RArrow => {
                self.bump();
                let rhs = if *self.peek() == Tok::Dot {
                    Vec::new()
                } else {
                    self.literal_list()?
                };
                Clause::Decl(Declaration {
                    lhs: head,
                    rhs,
                    span: start,
                })
            }
            Tok::Dot => Clause::Rule(Rule {
                head: self.rule_head(head, start)?,
                body: Vec::new(),
                span: start,
            }),
            _ => return self.error(&["`<-`", "`->`", "`.`"]),
        };
        let end = self.span();
        self.expect(Tok::Dot)?;
        let mut clause = clause;
        let span = Span::new(start.start, end.end, start.line, start.column);
        match &mut clause {
            Clause::Decl(d) => d.span = span,
            Clause::Rule(r) => r.span = span,
            Clause::Agg(a) => a.span = span,
        }
        Ok(clause)
    }

    fn rule_head(&self, lits: Vec<Literal>, at: Span) -> PResult<Vec<HeadAtom>> {
        lits.into_iter()
            .map(|l| match l {
                Literal::Atom(a) => Ok(HeadAtom::Rel(a)),
                Literal::Func(f) => Ok(HeadAtom::Func(f)),
                other => Err(ParseError {
                    span: at,
                    expected: alloc::vec!["atom or functional atom in rule head".into()],
                    found: format!("{other:?}"),
                }),
            })
            .collect()
    }

    fn agg_rule(&mut self, head: Vec<Literal>, start: Span) -> PResult<Clause> {
        let at = self.span();
        self.bump(); // agg
        self.expect(Tok::AggOpen)?;
        let result = self.ident()?;
        self.expect(Tok::Eq)?;
        let method = match self.ident()?.as_str() {
            "min" => AggMethod::Min,
            "max" => AggMethod::Max,
            _ => {
                self.pos -= 1;
                return self.error(&["`min`", "`max`"]);
            }
        };
        self.expect(Tok::LParen)?;
        let value_var = self.ident()?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::AggClose)?;
        let body = self.literal_list()?;
        let head = match <[Literal; 1]>::try_from(head) {
            Ok([Literal::Func(f)]) if f.value.as_var() == Some(result.as_str()) => f,
            _ => {
                return Err(ParseError {
                    span: at,
                    expected: alloc::vec![format!("single functional head `p[..]={result}`")],
                    found: "other head".into(),
                })
            }
        };
        Ok(Clause::Agg(AggRule {
            head,
            method,
            value_var,
            body,
            span: start,
        }))
    }

    fn body(&mut self) -> PResult<Vec<Literal>> {
        let first = self.literal_list()?;
        if *self.peek() != Tok::Semi {
            return Ok(first);
        }
        let mut alts = alloc::vec![first];
        while self.eat(Tok::Semi) {
            alts.push(self.literal_list()?);
        }
        Ok(alloc::vec![Literal::Disjunction(alts)])
    }

    fn literal_list(&mut self) -> PResult<Vec<Literal>> {
        let mut out = alloc::vec![self.literal()?];
        while self.eat(Tok::Comma) {
            out.push(self.literal()?);
        }
        Ok(out)
    }

    fn literal(&mut self) -> PResult<Literal> {
        if self.eat(Tok::Bang) {
            return Ok(Literal::Negated(Box::new(self.literal()?)));
        }
        if let Tok::Ident(name) = self.peek().clone() {
            match self.peek_at(1) {
                Tok::LParen if name != "min" && name != "max" => {
                    self.bump();
                    return self.atom(name);
                }
                Tok::LBrack
                    if (name == "int" || name == "uint")
                        && matches!(self.peek_at(2), Tok::Int(_)) =>
                {
                    self.bump();
                    self.bump();
                    let Tok::Int(bits) = self.bump() else {
                        unreachable!()
                    };
                    self.expect(Tok::RBrack)?;
                    self.expect(Tok::LParen)?;
                    let arg = self.term()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Literal::Atom(Atom::new(
                        format!("{name}[{bits}]"),
                        alloc::vec![arg],
                    )));
                }
                Tok::LBrack => {
                    let save = (self.pos, self.wildcards);
                    if let Ok(f) = self.func_atom(name) {
                        if matches!(
                            self.peek(),
                            Tok::Comma
                                | Tok::Dot
                                | Tok::Semi
                                | Tok::LArrow
                                | Tok::RArrow
                                | Tok::Eof
                        ) {
                            return Ok(Literal::Func(f));
                        }
                    }
                    (self.pos, self.wildcards) = save;
                }
                _ => {}
            }
        }
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return self.error(&["comparison operator"]),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Literal::Compare(Compare { op, lhs, rhs }))
    }

    fn atom(&mut self, pred: String) -> PResult<Literal> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            args.push(self.term()?);
            if self.eat(Tok::Colon) {
                let value = self.term()?;
                self.expect(Tok::RParen)?;
                let key = args.pop().unwrap();
                return Ok(Literal::RefMode(RefModeAtom { pred, key, value }));
            }
            while self.eat(Tok::Comma) {
                args.push(self.term()?);
            }
        }
        self.expect(Tok::RParen)?;
        Ok(Literal::Atom(Atom { pred, args }))
    }

    fn func_atom(&mut self, pred: String) -> PResult<FuncAtom> {
        self.bump(); // name
        self.expect(Tok::LBrack)?;
        let mut keys = Vec::new();
        if *self.peek() != Tok::RBrack {
            keys.push(self.term()?);
            while self.eat(Tok::Comma) {
                keys.push(self.term()?);
            }
        }
        self.expect(Tok::RBrack)?;
        self.expect(Tok::Eq)?;
        let value = self.term()?;
        Ok(FuncAtom { pred, keys, value })
    }

    fn term(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(Term::Var(s))
            }
            Tok::Wild => {
                self.bump();
                Ok(Term::Var(self.fresh_wildcard()))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Term::Const(Constant::Str(s)))
            }
            Tok::Int(_) | Tok::Minus => Ok(Term::Const(Constant::Int(self.int_literal()?))),
            _ => self.error(&["variable", "`_`", "integer", "string"]),
        }
    }

    fn int_literal(&mut self) -> PResult<i64> {
        let neg = self.eat(Tok::Minus);
        match self.peek().clone() {
            Tok::Int(v) => {
                let v = if neg { -v } else { v };
                match i64::try_from(v) {
                    Ok(v) => {
                        self.bump();
                        Ok(v)
                    }
                    Err(_) => self.error(&["64-bit integer"]),
                }
            }
            _ => self.error(&["integer"]),
        }
    }

    fn expr(&mut self) -> PResult<ArithExpr> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = ArithExpr::bin(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> PResult<ArithExpr> {
        let mut lhs = self.factor()?;
        while self.eat(Tok::Star) {
            let rhs = self.factor()?;
            lhs = ArithExpr::mul(lhs, rhs);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> PResult<ArithExpr> {
        match self.peek().clone() {
            Tok::Int(_) => Ok(ArithExpr::int(self.int_literal()?)),
            Tok::Minus => {
                if matches!(self.peek_at(1), Tok::Int(_)) {
                    Ok(ArithExpr::int(self.int_literal()?))
                } else {
                    self.bump();
                    let inner = self.factor()?;
                    Ok(ArithExpr::sub(ArithExpr::int(0), inner))
                }
            }
            Tok::Str(s) => {
                self.bump();
                Ok(ArithExpr::Const(Constant::Str(s)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match self.peek() {
                    Tok::LParen if name == "min" || name == "max" => {
                        self.bump();
                        let a = self.expr()?;
                        self.expect(Tok::Comma)?;
                        let b = self.expr()?;
                        self.expect(Tok::RParen)?;
                        Ok(if name == "min" {
                            ArithExpr::min(a, b)
                        } else {
                            ArithExpr::max(a, b)
                        })
                    }
                    Tok::LBrack => {
                        self.bump();
                        let mut keys = Vec::new();
                        if *self.peek() != Tok::RBrack {
                            keys.push(self.expr()?);
                            while self.eat(Tok::Comma) {
                                keys.push(self.expr()?);
                            }
                        }
                        self.expect(Tok::RBrack)?;
                        Ok(ArithExpr::Lookup(name, keys))
                    }
                    _ => Ok(ArithExpr::Var(name)),
                }
            }
            _ => self.error(&["expression"]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_recursive_rule_shape() {
        let p =
            parse_program("e(t,w) <- s(t,w), e(tp,wp), w - wp <= 100, w + wp >= 19500.").unwrap();
        let (_, r) = p.rules().next().unwrap();
        let atoms = r
            .body
            .iter()
            .filter(|l| matches!(l, Literal::Atom(_)))
            .count();
        let cmps = r
            .body
            .iter()
            .filter(|l| matches!(l, Literal::Compare(_)))
            .count();
        assert_eq!((atoms, cmps), (2, 2));
        assert_eq!(
            r.body[2],
            Literal::Compare(Compare::new(
                ArithExpr::sub(ArithExpr::var("w"), ArithExpr::var("wp")),
                CmpOp::Le,
                ArithExpr::int(100)
            ))
        );
    }

    #[test]
    fn singleton_aggregate() {
        let p = parse_program("lb_digit[]=n <- agg<<n=min(v)>> digit(d), val(d:v).").unwrap();
        let (_, a) = p.agg_rules().next().unwrap();
        assert_eq!(a.method, AggMethod::Min);
        assert!(a.head.keys.is_empty());
        assert_eq!(a.value_var, "v");
        assert_eq!(a.result_var(), Some("n"));
        assert!(matches!(&a.body[1], Literal::RefMode(r) if r.pred == "val"));
    }

    #[test]
    fn empty_text_is_empty_program() {
        assert_eq!(parse_program("").unwrap(), Program::new());
        assert_eq!(
            parse_program("  // nothing here\n").unwrap(),
            Program::new()
        );
    }

    #[test]
    fn declarations_and_types() {
        let p = parse_program("digit(_) ->.\ndigit(d), val(d:v) -> uint[8](v), v<=9.").unwrap();
        let decls: Vec<_> = p.declarations().collect();
        assert_eq!(decls.len(), 2);
        assert!(decls[0].1.rhs.is_empty());
        assert_eq!(
            decls[0].1.lhs,
            alloc::vec![Literal::Atom(Atom::new(
                "digit",
                alloc::vec![Term::var("_0")]
            ))]
        );
        assert!(matches!(&decls[1].1.rhs[0], Literal::Atom(a) if a.pred == "uint[8]"));
    }

    #[test]
    fn multiplication_binds_tighter() {
        let e = parse_expr("vi*(10*va+vm)").unwrap();
        let expected = ArithExpr::mul(
            ArithExpr::var("vi"),
            ArithExpr::add(
                ArithExpr::mul(ArithExpr::int(10), ArithExpr::var("va")),
                ArithExpr::var("vm"),
            ),
        );
        assert_eq!(e, expected);
        let e = parse_expr("a - b - c").unwrap();
        assert_eq!(
            e,
            ArithExpr::sub(
                ArithExpr::sub(ArithExpr::var("a"), ArithExpr::var("b")),
                ArithExpr::var("c")
            )
        );
    }

    #[test]
    fn func_atom_versus_lookup_comparison() {
        assert!(matches!(
            parse_literal("lb_digit[]=t_1").unwrap(),
            Literal::Func(_)
        ));
        assert!(matches!(
            parse_literal("ub_e[] + 1 = t").unwrap(),
            Literal::Compare(_)
        ));
        assert!(matches!(
            parse_literal("w-ub_e[] <= 100").unwrap(),
            Literal::Compare(_)
        ));
    }

    #[test]
    fn negation_and_disjunction_parse() {
        let p = parse_program("p(x) <- !q(x), r(x).\np(x) <- q(x) ; r(x).").unwrap();
        let rules: Vec<_> = p.rules().collect();
        assert!(matches!(rules[0].1.body[0], Literal::Negated(_)));
        assert!(matches!(&rules[1].1.body[0], Literal::Disjunction(d) if d.len() == 2));
    }

    #[test]
    fn errors_carry_position_and_expectation() {
        let e = parse_program("p(x) <- q(x)\nr(y).").unwrap_err();
        assert_eq!(e.span.line, 2);
        assert!(e.expected.iter().any(|s| s.contains('.')), "{e}");
        let e = parse_program("p(x) <- x <").unwrap_err();
        assert_eq!(e.found, "end of input");
        assert!(parse_program("p(99999999999999999999).").is_err());
    }

    #[test]
    fn wildcards_are_fresh_per_clause() {
        let p = parse_program("ub_e[]=n <- agg<<n=max(v)>> e(_,v), f(_,_).").unwrap();
        let (_, a) = p.agg_rules().next().unwrap();
        let vars: Vec<_> = a.body.iter().flat_map(|l| l.vars()).collect();
        assert!(vars.contains(&"_0") && vars.contains(&"_1") && vars.contains(&"_2"));
    }

    #[test]
    fn negative_literals() {
        assert_eq!(parse_expr("-5").unwrap(), ArithExpr::int(-5));
        assert_eq!(
            parse_expr("x - -5").unwrap(),
            ArithExpr::sub(ArithExpr::var("x"), ArithExpr::int(-5))
        );
        assert_eq!(
            parse_expr("-x").unwrap(),
            ArithExpr::sub(ArithExpr::int(0), ArithExpr::var("x"))
        );
        assert_eq!(
            parse_expr("-9223372036854775808").unwrap(),
            ArithExpr::int(i64::MIN)
        );
    }
}
