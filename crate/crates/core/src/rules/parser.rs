use super::ast::{ArithOp, Atom, CmpOp, Expr, Fact, Literal, Real, Rule, RuleProgram, Term, Value};
use super::RuleError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Quoted(String),
    Int(i64),
    Real(f64),
    LParen,
    RParen,
    Comma,
    Dot,
    Neck,
    Not,
    Is,
    Cmp(CmpOp),
    Arith(ArithOp),
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, RuleError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, message: String| RuleError::Syntax { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            *i += n;
            col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let peek = chars.get(i + 1).copied();
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(1, &mut i);
            }
            let word: String = chars[start..i].iter().collect();
            let tok = if word == "is" {
                Tok::Is
            } else if c.is_ascii_uppercase() || c == '_' {
                Tok::Var(word)
            } else {
                Tok::Ident(word)
            };
            out.push(Spanned { tok, line: tl, col: tc });
            continue;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(1, &mut i);
            }
            let mut real = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                real = true;
                advance(1, &mut i);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(1, &mut i);
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    real = true;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let n = j - i;
                    advance(n, &mut i);
                }
            }
            let s: String = chars[start..i].iter().collect();
            let tok = if real {
                Tok::Real(s.parse().map_err(|_| err(tl, tc, format!("bad number {s}")))?)
            } else {
                Tok::Int(s.parse().map_err(|_| err(tl, tc, format!("integer out of range {s}")))?)
            };
            out.push(Spanned { tok, line: tl, col: tc });
            continue;
        } else if c == '\'' {
            let mut s = String::new();
            advance(1, &mut i);
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(tl, tc, "unterminated quoted atom".into())),
                    Some('\\') => {
                        let Some(&n) = chars.get(i + 1) else {
                            return Err(err(tl, tc, "unterminated quoted atom".into()));
                        };
                        s.push(n);
                        advance(2, &mut i);
                    }
                    Some('\'') => {
                        advance(1, &mut i);
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(1, &mut i);
                    }
                }
            }
            out.push(Spanned { tok: Tok::Quoted(s), line: tl, col: tc });
            continue;
        } else {
            match (c, peek) {
                (':', Some('-')) => (Tok::Neck, 2),
                ('\\', Some('+')) => (Tok::Not, 2),
                ('\\', Some('=')) => (Tok::Cmp(CmpOp::Ne), 2),
                ('>', Some('=')) => (Tok::Cmp(CmpOp::Ge), 2),
                ('=', Some('<')) => (Tok::Cmp(CmpOp::Le), 2),
                ('<', _) => (Tok::Cmp(CmpOp::Lt), 1),
                ('>', _) => (Tok::Cmp(CmpOp::Gt), 1),
                ('=', _) => (Tok::Cmp(CmpOp::Eq), 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                (',', _) => (Tok::Comma, 1),
                ('.', _) => (Tok::Dot, 1),
                ('+', _) => (Tok::Arith(ArithOp::Add), 1),
                ('-', _) => (Tok::Arith(ArithOp::Sub), 1),
                ('*', _) => (Tok::Arith(ArithOp::Mul), 1),
                ('/', _) => (Tok::Arith(ArithOp::Div), 1),
                _ => return Err(err(tl, tc, format!("unexpected character '{c}'"))),
            }
        };
        let (tok, n) = tok;
        advance(n, &mut i);
        out.push(Spanned { tok, line: tl, col: tc });
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, RuleError> {
        let t = self.peek();
        Err(RuleError::Syntax { line: t.line, col: t.col, message: message.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), RuleError> {
        if self.peek().tok == tok {
            self.next();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(&self.peek().tok)))
        }
    }

    fn atom(&mut self) -> Result<Atom, RuleError> {
        let pred = match &self.peek().tok {
            Tok::Ident(s) => s.clone(),
            other => return self.error(format!("expected predicate name, found {}", describe(other))),
        };
        self.next();
        let mut args = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.next();
            loop {
                args.push(self.term()?);
                match self.peek().tok {
                    Tok::Comma => {
                        self.next();
                    }
                    Tok::RParen => {
                        self.next();
                        break;
                    }
                    _ => return self.error(format!("expected ',' or ')', found {}", describe(&self.peek().tok))),
                }
            }
        }
        Ok(Atom { pred, args })
    }

    fn term(&mut self) -> Result<Term, RuleError> {
        let t = self.next();
        Ok(match t.tok {
            Tok::Var(v) if v == "_" => Term::Wildcard,
            Tok::Var(v) => Term::Var(v),
            Tok::Ident(s) | Tok::Quoted(s) => Term::Const(Value::Sym(s)),
            Tok::Int(i) => Term::Const(Value::Int(i)),
            Tok::Real(r) => Term::Const(Value::Real(Real::new(r).expect("lexer never yields NaN"))),
            Tok::Arith(ArithOp::Sub) => match self.next().tok {
                Tok::Int(i) => Term::Const(Value::Int(-i)),
                Tok::Real(r) => Term::Const(Value::Real(Real::new(-r).expect("finite"))),
                _ => {
                    self.pos -= 1;
                    return self.error("expected a number after '-'");
                }
            },
            other => {
                self.pos -= 1;
                return self.error(format!("expected a term, found {}", describe(&other)));
            }
        })
    }

    fn expr(&mut self) -> Result<Expr, RuleError> {
        let mut lhs = self.product()?;
        while let Tok::Arith(op @ (ArithOp::Add | ArithOp::Sub)) = self.peek().tok {
            self.next();
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, RuleError> {
        let mut lhs = self.primary()?;
        while let Tok::Arith(op @ (ArithOp::Mul | ArithOp::Div)) = self.peek().tok {
            self.next();
            let rhs = self.primary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Expr, RuleError> {
        if self.peek().tok == Tok::LParen {
            self.next();
            let e = self.expr()?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(e);
        }
        Ok(Expr::Term(self.term()?))
    }

    fn literal(&mut self) -> Result<Literal, RuleError> {
        if self.peek().tok == Tok::Not {
            self.next();
            return Ok(Literal::Neg(self.atom()?));
        }
        // Predicate call: an identifier not followed by a comparison.
        if let Tok::Ident(_) = self.peek().tok {
            let after = &self.toks[self.pos + 1].tok;
            if !matches!(after, Tok::Cmp(_) | Tok::Arith(_)) {
                return Ok(Literal::Pos(self.atom()?));
            }
        }
        if let (Tok::Var(v), Tok::Is) = (&self.peek().tok, &self.toks[self.pos + 1].tok) {
            let v = v.clone();
            if v == "_" {
                return self.error("'_' cannot be bound by 'is'");
            }
            self.next();
            self.next();
            return Ok(Literal::Is(v, self.expr()?));
        }
        let lhs = self.expr()?;
        let op = match self.peek().tok {
            Tok::Cmp(op) => op,
            _ => return self.error(format!("expected a comparison, found {}", describe(&self.peek().tok))),
        };
        self.next();
        let rhs = self.expr()?;
        Ok(Literal::Cmp(op, lhs, rhs))
    }

    fn clause(&mut self, program: &mut RuleProgram) -> Result<(), RuleError> {
        let (line, col) = (self.peek().line, self.peek().col);
        let head = self.atom()?;
        match self.peek().tok {
            Tok::Dot => {
                self.next();
                let mut args = Vec::with_capacity(head.args.len());
                for a in &head.args {
                    match a {
                        Term::Const(v) => args.push(v.clone()),
                        _ => {
                            return Err(RuleError::Syntax {
                                line,
                                col,
                                message: format!("fact {head} must be ground"),
                            })
                        }
                    }
                }
                program.facts.push(Fact { pred: head.pred, args });
                Ok(())
            }
            Tok::Neck => {
                self.next();
                let mut body = vec![self.literal()?];
                loop {
                    match self.peek().tok {
                        Tok::Comma => {
                            self.next();
                            body.push(self.literal()?);
                        }
                        Tok::Dot => {
                            self.next();
                            break;
                        }
                        _ => return self.error(format!("expected ',' or '.', found {}", describe(&self.peek().tok))),
                    }
                }
                let rule = Rule { head, body, line };
                check_range_restriction(&rule, col)?;
                program.rules.push(rule);
                Ok(())
            }
            _ => self.error(format!("expected '.' or ':-', found {}", describe(&self.peek().tok))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Var(s) => format!("variable {s}"),
        Tok::Quoted(s) => format!("'{s}'"),
        Tok::Int(i) => format!("{i}"),
        Tok::Real(r) => format!("{r}"),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Comma => "','".into(),
        Tok::Dot => "'.'".into(),
        Tok::Neck => "':-'".into(),
        Tok::Not => "'\\+'".into(),
        Tok::Is => "'is'".into(),
        Tok::Cmp(op) => format!("'{}'", op.symbol()),
        Tok::Arith(_) => "an arithmetic operator".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Every variable in a negated literal, comparison, `is` expression or the
/// head must be bound by an earlier positive literal or `is`.
fn check_range_restriction(rule: &Rule, col: usize) -> Result<(), RuleError> {
    let mut bound: Vec<String> = Vec::new();
    let fail = |var: &str, context: String| RuleError::RangeRestriction {
        line: rule.line,
        col,
        var: var.to_string(),
        context,
    };
    for lit in &rule.body {
        match lit {
            Literal::Pos(a) => {
                for t in &a.args {
                    if let Term::Var(v) = t {
                        bound.push(v.clone());
                    }
                }
            }
            Literal::Neg(a) => {
                for t in &a.args {
                    if let Term::Var(v) = t {
                        if !bound.contains(v) {
                            return Err(fail(v, format!("\\+ {a}")));
                        }
                    }
                }
            }
            Literal::Cmp(_, l, r) => {
                let mut vs = Vec::new();
                l.vars(&mut vs);
                r.vars(&mut vs);
                if let Some(v) = vs.iter().find(|v| !bound.contains(v)) {
                    return Err(fail(v, lit.to_string()));
                }
                if contains_wildcard(l) || contains_wildcard(r) {
                    return Err(fail("_", lit.to_string()));
                }
            }
            Literal::Is(v, e) => {
                let mut vs = Vec::new();
                e.vars(&mut vs);
                if let Some(u) = vs.iter().find(|u| !bound.contains(u)) {
                    return Err(fail(u, lit.to_string()));
                }
                if contains_wildcard(e) {
                    return Err(fail("_", lit.to_string()));
                }
                bound.push(v.clone());
            }
        }
    }
    for t in &rule.head.args {
        match t {
            Term::Var(v) if !bound.contains(v) => return Err(fail(v, format!("head {}", rule.head))),
            Term::Wildcard => return Err(fail("_", format!("head {}", rule.head))),
            _ => {}
        }
    }
    Ok(())
}

fn contains_wildcard(e: &Expr) -> bool {
    match e {
        Expr::Term(t) => matches!(t, Term::Wildcard),
        Expr::Bin(_, a, b) => contains_wildcard(a) || contains_wildcard(b),
    }
}

/// Parses rule text: facts `p(a, 1).`, rules `h(X) :- b(X, Y), \+ c(Y), X >= 3.`,
/// and `%` line comments.
pub fn parse_rules(text: &str) -> Result<RuleProgram, RuleError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let mut program = RuleProgram::default();
    while p.peek().tok != Tok::Eof {
        p.clause(&mut program)?;
    }
    Ok(program)
}
