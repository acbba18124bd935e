//! Reader for the accepted Prolog subset: facts, rules, conjunction, cut,
//! integer arithmetic, comparisons, lists and `:- initialization(G).`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Atom(String),
    Int(i64),
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn atom(name: &str) -> Term {
        Term::Atom(name.to_owned())
    }

    pub fn nil() -> Term {
        Term::Atom("[]".to_owned())
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::Compound(".".to_owned(), vec![head, tail])
    }

    pub fn list(items: Vec<Term>, tail: Term) -> Term {
        items.into_iter().rev().fold(tail, |acc, t| Term::cons(t, acc))
    }

    /// Name and arity when the term is callable.
    pub fn indicator(&self) -> Option<(&str, usize)> {
        match self {
            Term::Atom(a) => Some((a, 0)),
            Term::Compound(f, args) => Some((f, args.len())),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(_, args) => args,
            _ => &[],
        }
    }

    pub fn visit_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Term::Var(v) => out.push(v),
            Term::Compound(_, args) => args.iter().for_each(|a| a.visit_vars(out)),
            _ => {}
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Atom(a) => f.write_str(a),
            Term::Int(i) => write!(f, "{i}"),
            Term::Compound(name, args) if name == "." && args.len() == 2 => {
                f.write_str("[")?;
                write!(f, "{}", args[0])?;
                let mut tail = &args[1];
                loop {
                    match tail {
                        Term::Compound(n, a) if n == "." && a.len() == 2 => {
                            write!(f, ",{}", a[0])?;
                            tail = &a[1];
                        }
                        Term::Atom(n) if n == "[]" => break,
                        other => {
                            write!(f, "|{other}")?;
                            break;
                        }
                    }
                }
                f.write_str("]")
            }
            Term::Compound(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceClause {
    pub head: Term,
    pub body: Vec<Term>,
}

impl SourceClause {
    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceProgram {
    pub clauses: Vec<SourceClause>,
    /// Goal named by `:- initialization(Goal).`
    pub initialization: Option<Term>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown operator `{op}` at {line}:{col}")]
    UnknownOperator { line: usize, col: usize, op: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Var(String),
    Int(i64),
    /// `(` immediately following an atom: functional notation.
    OpenCall,
    Open,
    Close,
    OpenList,
    CloseList,
    Bar,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    /// Atom was written quoted, so it never acts as an operator.
    quoted: bool,
}

const SYMBOL_CHARS: &str = "+-*/\\^<>=~:.?@#&$";

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            col: 1,
            _src: src,
        }
    }

    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn skip_layout(&mut self) -> Result<(), ParseError> {
        loop {
            match self.peek(0) {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('%') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some('/') if self.peek(1) == Some('*') => {
                    self.bump();
                    self.bump();
                    loop {
                        match self.bump() {
                            Some('*') if self.peek(0) == Some('/') => {
                                self.bump();
                                break;
                            }
                            Some(_) => {}
                            None => return Err(self.err("unterminated block comment")),
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn tokens(mut self) -> Result<Vec<Token>, ParseError> {
        let mut out = Vec::new();
        let mut anon = 0usize;
        loop {
            let had_layout = {
                let before = self.pos;
                self.skip_layout()?;
                self.pos != before
            };
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek(0) else { break };
            let mut quoted = false;
            let tok = if c.is_ascii_digit() {
                let mut s = String::new();
                while let Some(d) = self.peek(0).filter(|d| d.is_ascii_digit() || *d == '_') {
                    self.bump();
                    if d != '_' {
                        s.push(d);
                    }
                }
                Tok::Int(s.parse().map_err(|_| self.err(format!("integer out of range: {s}")))?)
            } else if c == '_' || c.is_uppercase() {
                let mut s = String::new();
                while let Some(d) = self.peek(0).filter(|d| d.is_alphanumeric() || *d == '_') {
                    self.bump();
                    s.push(d);
                }
                if s == "_" {
                    anon += 1;
                    s = format!("_#{anon}");
                }
                Tok::Var(s)
            } else if c.is_alphabetic() {
                let mut s = String::new();
                while let Some(d) = self.peek(0).filter(|d| d.is_alphanumeric() || *d == '_') {
                    self.bump();
                    s.push(d);
                }
                Tok::Atom(s)
            } else if c == '\'' {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some('\'') if self.peek(0) == Some('\'') => {
                            self.bump();
                            s.push('\'');
                        }
                        Some('\'') => break,
                        Some(ch) => s.push(ch),
                        None => return Err(self.err("unterminated quoted atom")),
                    }
                }
                quoted = true;
                Tok::Atom(s)
            } else if c == '.' && self.peek(1).is_none_or(|n| n.is_whitespace() || n == '%') {
                self.bump();
                Tok::End
            } else if SYMBOL_CHARS.contains(c) {
                let mut s = String::new();
                while let Some(d) = self.peek(0).filter(|d| SYMBOL_CHARS.contains(*d)) {
                    // a trailing '.' before layout ends the clause
                    if d == '.' && !s.is_empty() && self.peek(1).is_none_or(|n| n.is_whitespace() || n == '%') {
                        break;
                    }
                    self.bump();
                    s.push(d);
                }
                Tok::Atom(s)
            } else {
                self.bump();
                match c {
                    '(' => {
                        let after_atom = matches!(out.last(), Some(Token { tok: Tok::Atom(_), .. }));
                        if after_atom && !had_layout {
                            Tok::OpenCall
                        } else {
                            Tok::Open
                        }
                    }
                    ')' => Tok::Close,
                    '[' => {
                        if self.peek(0) == Some(']') {
                            self.bump();
                            Tok::Atom("[]".into())
                        } else {
                            Tok::OpenList
                        }
                    }
                    ']' => Tok::CloseList,
                    '|' => Tok::Bar,
                    ',' => Tok::Comma,
                    '!' => Tok::Atom("!".into()),
                    ';' => Tok::Atom(";".into()),
                    other => {
                        return Err(ParseError::Syntax {
                            line,
                            col,
                            msg: format!("unexpected character `{other}`"),
                        })
                    }
                }
            };
            out.push(Token { tok, line, col, quoted });
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Assoc {
    Xfx,
    Xfy,
    Yfx,
}

fn infix_op(name: &str) -> Option<(u32, Assoc)> {
    Some(match name {
        ":-" => (1200, Assoc::Xfx),
        "," => (1000, Assoc::Xfy),
        "=" | "\\=" | "is" | "<" | ">" | "=<" | ">=" | "=:=" | "=\\=" | "==" | "\\==" => (700, Assoc::Xfx),
        "+" | "-" => (500, Assoc::Yfx),
        "*" | "//" | "/" | "mod" | "rem" => (400, Assoc::Yfx),
        _ => return None,
    })
}

fn prefix_op(name: &str) -> Option<(u32, u32)> {
    // (operator priority, max argument priority)
    match name {
        ":-" => Some((1200, 1199)),
        "-" | "+" => Some((200, 200)),
        _ => None,
    }
}

fn is_symbolic(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| SYMBOL_CHARS.contains(c) || c == ';')
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        let t = self.toks.get(self.pos).cloned().ok_or_else(|| ParseError::Syntax {
            line: self.eof.0,
            col: self.eof.1,
            msg: "unexpected end of input".into(),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn err_at(t: &Token, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let t = self.next()?;
        if t.tok == want {
            Ok(())
        } else {
            Err(Self::err_at(&t, format!("expected {what}")))
        }
    }

    fn starts_term(t: &Token) -> bool {
        match &t.tok {
            Tok::Atom(a) => t.quoted || infix_op(a).is_none() || prefix_op(a).is_some(),
            Tok::Var(_) | Tok::Int(_) | Tok::Open | Tok::OpenList => true,
            _ => false,
        }
    }

    fn parse(&mut self, max: u32) -> Result<Term, ParseError> {
        let (mut left, mut left_prec) = self.primary(max)?;
        while let Some(t) = self.peek() {
            let name = match &t.tok {
                Tok::Comma => ",".to_owned(),
                Tok::Atom(a) if !t.quoted => a.clone(),
                Tok::Atom(_) | Tok::Var(_) | Tok::Int(_) | Tok::Open | Tok::OpenList | Tok::OpenCall => {
                    return Err(match &t.tok {
                        Tok::Atom(a) => ParseError::UnknownOperator {
                            line: t.line,
                            col: t.col,
                            op: a.clone(),
                        },
                        _ => Self::err_at(t, "operator expected"),
                    })
                }
                _ => break,
            };
            let Some((prec, assoc)) = infix_op(&name) else {
                return Err(ParseError::UnknownOperator {
                    line: t.line,
                    col: t.col,
                    op: name,
                });
            };
            let (lmax, rmax) = match assoc {
                Assoc::Xfx => (prec - 1, prec - 1),
                Assoc::Xfy => (prec - 1, prec),
                Assoc::Yfx => (prec, prec - 1),
            };
            if prec > max || left_prec > lmax {
                break;
            }
            self.pos += 1;
            let right = self.parse(rmax)?;
            left = Term::Compound(name, vec![left, right]);
            left_prec = prec;
        }
        Ok(left)
    }

    fn primary(&mut self, max: u32) -> Result<(Term, u32), ParseError> {
        let t = self.next()?;
        match t.tok.clone() {
            Tok::Int(i) => Ok((Term::Int(i), 0)),
            Tok::Var(v) => Ok((Term::Var(v), 0)),
            Tok::Open | Tok::OpenCall => {
                let inner = self.parse(1200)?;
                self.expect(Tok::Close, "`)`")?;
                Ok((inner, 0))
            }
            Tok::OpenList => {
                let mut items = vec![self.parse(999)?];
                loop {
                    let t = self.next()?;
                    match t.tok {
                        Tok::Comma => items.push(self.parse(999)?),
                        Tok::Bar => {
                            let tail = self.parse(999)?;
                            self.expect(Tok::CloseList, "`]`")?;
                            return Ok((Term::list(items, tail), 0));
                        }
                        Tok::CloseList => return Ok((Term::list(items, Term::nil()), 0)),
                        _ => return Err(Self::err_at(&t, "expected `,`, `|` or `]` in list")),
                    }
                }
            }
            Tok::Atom(name) => {
                if matches!(self.peek().map(|t| &t.tok), Some(Tok::OpenCall)) {
                    self.pos += 1;
                    let mut args = vec![self.parse(999)?];
                    loop {
                        let t = self.next()?;
                        match t.tok {
                            Tok::Comma => args.push(self.parse(999)?),
                            Tok::Close => break,
                            _ => return Err(Self::err_at(&t, "expected `,` or `)` in arguments")),
                        }
                    }
                    return Ok((Term::Compound(name, args), 0));
                }
                if !t.quoted {
                    if let Some((prec, arg_max)) = prefix_op(&name) {
                        if name == "-" {
                            if let Some(Token { tok: Tok::Int(i), .. }) = self.peek() {
                                let i = *i;
                                self.pos += 1;
                                return Ok((Term::Int(-i), 0));
                            }
                        }
                        if self.peek().is_some_and(Self::starts_term) && prec <= max {
                            let arg = self.parse(arg_max)?;
                            return Ok((Term::Compound(name, vec![arg]), prec));
                        }
                    }
                    if is_symbolic(&name) && infix_op(&name).is_none() && prefix_op(&name).is_none() {
                        return Err(ParseError::UnknownOperator {
                            line: t.line,
                            col: t.col,
                            op: name,
                        });
                    }
                }
                Ok((Term::Atom(name), 0))
            }
            _ => Err(Self::err_at(&t, "term expected")),
        }
    }
}

fn flatten_conj(t: Term, out: &mut Vec<Term>) {
    match t {
        Term::Compound(op, mut args) if op == "," && args.len() == 2 => {
            let r = args.pop().unwrap();
            let l = args.pop().unwrap();
            flatten_conj(l, out);
            flatten_conj(r, out);
        }
        other => out.push(other),
    }
}

/// Parses a single term such as a query goal (no terminating `.` required).
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let eof = toks.last().map_or((1, 1), |t| (t.line, t.col));
    let mut p = Parser { toks, pos: 0, eof };
    let t = p.parse(1200)?;
    match p.peek() {
        None => Ok(t),
        Some(Token { tok: Tok::End, .. }) if p.pos + 1 == p.toks.len() => Ok(t),
        Some(tok) => Err(Parser::err_at(tok, "unexpected trailing input")),
    }
}

/// Splits a goal into its conjuncts.
pub fn conjuncts(goal: Term) -> Vec<Term> {
    let mut out = Vec::new();
    flatten_conj(goal, &mut out);
    out
}

pub fn parse_program(text: &str) -> Result<SourceProgram, ParseError> {
    let toks = Lexer::new(text).tokens()?;
    let eof = toks.last().map_or((1, 1), |t| (t.line, t.col));
    let mut p = Parser { toks, pos: 0, eof };
    let mut program = SourceProgram::default();
    while p.peek().is_some() {
        let start = p.peek().cloned().unwrap();
        let t = p.parse(1200)?;
        let end = p.next()?;
        if end.tok != Tok::End {
            return Err(Parser::err_at(&end, "expected `.` at end of clause"));
        }
        match t {
            Term::Compound(op, mut args) if op == ":-" && args.len() == 1 => {
                match args.pop().unwrap() {
                    Term::Compound(d, mut a) if d == "initialization" && a.len() == 1 => {
                        program.initialization = Some(a.pop().unwrap());
                    }
                    other => {
                        return Err(Parser::err_at(&start, format!("unsupported directive `{other}`")));
                    }
                }
            }
            Term::Compound(op, mut args) if op == ":-" && args.len() == 2 => {
                let body = args.pop().unwrap();
                let head = args.pop().unwrap();
                check_head(&head, &start)?;
                program.clauses.push(SourceClause {
                    head,
                    body: conjuncts(body),
                });
            }
            head => {
                check_head(&head, &start)?;
                program.clauses.push(SourceClause { head, body: vec![] });
            }
        }
    }
    Ok(program)
}

fn check_head(head: &Term, at: &Token) -> Result<(), ParseError> {
    match head {
        Term::Atom(_) | Term::Compound(..) => Ok(()),
        other => Err(Parser::err_at(at, format!("clause head `{other}` is not callable"))),
    }
}
