//! Lexer and recursive-descent parser for source programs, types, and
//! policies.
//!
//! Expression grammar (highest binding last):
//!
//! ```text
//! expr   := seq
//! seq    := assign (';' seq)?
//! assign := app (':=' assign)?
//! app    := prefix prefix*
//! prefix := 'fst' prefix | 'snd' prefix | '!' prefix
//!         | 'inl' ('[' type ']')? prefix | 'inr' ('[' type ']')? prefix
//!         | atom
//! atom   := ident | number | '()' | 'true' | 'false' | '#' number
//!         | '(' expr ')' | '(' expr ',' expr ')'
//!         | 'fun' ('[' lockset ';' policy ']')? ident (':' type)? '.' expr
//!         | 'let' ident '=' expr 'in' expr
//!         | 'if' expr 'then' expr 'else' expr
//!         | 'case' expr 'of' 'inl' ident '=>' expr '|' 'inr' ident '=>' expr
//!         | 'new' '(' expr ':' type ')'
//!         | 'open' ident 'in' expr | 'close' ident 'in' expr
//!         | 'when' ident 'then' expr 'else' expr
//!
//! type   := base '@' policy
//! base   := 'unit' | 'nat' | 'ref' '(' type ')'
//!         | '(' type ('+'|'*') type ')'
//!         | '(' '[' lockset ';' policy ']' type '->' type ')'
//! policy := 'bot' | 'top' | '{' clause (';' clause)* '}' | '{' '}'
//! clause := lockset '=>' ident
//! lockset:= '{' (ident (',' ident)*)? '}'
//! ```
//!
//! `true`/`false` are sugar for injections into `(unit@bot + unit@bot)`,
//! `let` for an applied lambda, `if` for a `case`. `#n` locations are only
//! accepted when runtime forms are explicitly allowed (state files).

use std::fmt;

use thiserror::Error;

use crate::policy::{Actor, Clause, Lock, LockSet, Policy, SecurityConfig};
use crate::syntax::ast::{AnnType, BaseType, Expr, LamAnn, LocId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: unexpected character '{ch}'")]
    UnexpectedChar { line: usize, col: usize, ch: char },
    #[error("{line}:{col}: unexpected {found}, expected {expected}")]
    Unexpected {
        line: usize,
        col: usize,
        found: String,
        expected: String,
    },
    #[error("{line}:{col}: unexpected end of input, expected {expected}")]
    UnexpectedEof { line: usize, col: usize, expected: String },
    #[error("{line}:{col}: unknown lock '{name}'")]
    UnknownLock { line: usize, col: usize, name: String },
    #[error("{line}:{col}: unknown actor '{name}'")]
    UnknownActor { line: usize, col: usize, name: String },
    #[error("{line}:{col}: runtime-only form '{form}' not allowed in source programs")]
    RuntimeForm { line: usize, col: usize, form: String },
    #[error("{line}:{col}: numeric literal out of range")]
    NumberRange { line: usize, col: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(u64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    At,
    FatArrow,
    Arrow,
    Assign,
    Bang,
    Eq,
    Star,
    Plus,
    Pipe,
    Hash,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Number(n) => write!(f, "'{n}'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::LBrace => write!(f, "'{{'"),
            Tok::RBrace => write!(f, "'}}'"),
            Tok::LBracket => write!(f, "'['"),
            Tok::RBracket => write!(f, "']'"),
            Tok::Comma => write!(f, "','"),
            Tok::Semi => write!(f, "';'"),
            Tok::Colon => write!(f, "':'"),
            Tok::Dot => write!(f, "'.'"),
            Tok::At => write!(f, "'@'"),
            Tok::FatArrow => write!(f, "'=>'"),
            Tok::Arrow => write!(f, "'->'"),
            Tok::Assign => write!(f, "':='"),
            Tok::Bang => write!(f, "'!'"),
            Tok::Eq => write!(f, "'='"),
            Tok::Star => write!(f, "'*'"),
            Tok::Plus => write!(f, "'+'"),
            Tok::Pipe => write!(f, "'|'"),
            Tok::Hash => write!(f, "'#'"),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = src.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let bump = |chars: &mut std::iter::Peekable<std::str::Chars>,
                        line: &mut usize,
                        col: &mut usize| {
            let c = chars.next().unwrap();
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars, &mut line, &mut col);
            continue;
        }
        if c == '-' {
            // '--' starts a line comment, '->' is the arrow token
            bump(&mut chars, &mut line, &mut col);
            match chars.peek() {
                Some('-') => {
                    while let Some(&c2) = chars.peek() {
                        if c2 == '\n' {
                            break;
                        }
                        bump(&mut chars, &mut line, &mut col);
                    }
                }
                Some('>') => {
                    bump(&mut chars, &mut line, &mut col);
                    toks.push(Spanned { tok: Tok::Arrow, line: tl, col: tc });
                }
                _ => return Err(ParseError::UnexpectedChar { line: tl, col: tc, ch: '-' }),
            }
            continue;
        }
        if c.is_ascii_digit() {
            let mut n: u64 = 0;
            while let Some(&d) = chars.peek() {
                if let Some(v) = d.to_digit(10) {
                    n = n
                        .checked_mul(10)
                        .and_then(|n| n.checked_add(v as u64))
                        .ok_or(ParseError::NumberRange { line: tl, col: tc })?;
                    bump(&mut chars, &mut line, &mut col);
                } else {
                    break;
                }
            }
            toks.push(Spanned { tok: Tok::Number(n), line: tl, col: tc });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&d) = chars.peek() {
                if d.is_alphanumeric() || d == '_' || d == '\'' {
                    s.push(bump(&mut chars, &mut line, &mut col));
                } else {
                    break;
                }
            }
            toks.push(Spanned { tok: Tok::Ident(s), line: tl, col: tc });
            continue;
        }
        bump(&mut chars, &mut line, &mut col);
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '.' => Tok::Dot,
            '@' => Tok::At,
            '!' => Tok::Bang,
            '*' => Tok::Star,
            '+' => Tok::Plus,
            '|' => Tok::Pipe,
            '#' => Tok::Hash,
            ':' => {
                if chars.peek() == Some(&'=') {
                    bump(&mut chars, &mut line, &mut col);
                    Tok::Assign
                } else {
                    Tok::Colon
                }
            }
            '=' => {
                if chars.peek() == Some(&'>') {
                    bump(&mut chars, &mut line, &mut col);
                    Tok::FatArrow
                } else {
                    Tok::Eq
                }
            }
            other => return Err(ParseError::UnexpectedChar { line: tl, col: tc, ch: other }),
        };
        toks.push(Spanned { tok, line: tl, col: tc });
    }
    Ok(toks)
}

const KEYWORDS: &[&str] = &[
    "fun", "let", "in", "if", "then", "else", "case", "of", "inl", "inr", "fst", "snd", "new",
    "open", "close", "when", "unit", "nat", "ref", "bot", "top", "true", "false",
];

pub struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    cfg: &'a SecurityConfig,
    allow_runtime_forms: bool,
    last_line: usize,
    last_col: usize,
}

impl<'a> Parser<'a> {
    pub fn new(src: &str, cfg: &'a SecurityConfig) -> Result<Self, ParseError> {
        let toks = lex(src)?;
        let (last_line, last_col) = toks
            .last()
            .map(|t| (t.line, t.col + 1))
            .unwrap_or((1, 1));
        Ok(Parser { toks, pos: 0, cfg, allow_runtime_forms: false, last_line, last_col })
    }

    /// Also accepts `#n` location literals; used for state files.
    pub fn with_runtime_forms(mut self) -> Self {
        self.allow_runtime_forms = true;
        self
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|s| (s.line, s.col))
            .unwrap_or((self.last_line, self.last_col))
    }

    fn next(&mut self, expected: &str) -> Result<Spanned, ParseError> {
        let s = self.toks.get(self.pos).cloned().ok_or(ParseError::UnexpectedEof {
            line: self.last_line,
            col: self.last_col,
            expected: expected.to_string(),
        })?;
        self.pos += 1;
        Ok(s)
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        let s = self.next(&tok.to_string())?;
        if s.tok == tok {
            Ok(())
        } else {
            Err(ParseError::Unexpected {
                line: s.line,
                col: s.col,
                found: s.tok.to_string(),
                expected: tok.to_string(),
            })
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, usize, usize), ParseError> {
        let s = self.next(what)?;
        match s.tok {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => Ok((name, s.line, s.col)),
            other => Err(ParseError::Unexpected {
                line: s.line,
                col: s.col,
                found: other.to_string(),
                expected: what.to_string(),
            }),
        }
    }

    fn lock(&mut self) -> Result<Lock, ParseError> {
        let (name, line, col) = self.expect_ident("a lock name")?;
        if !self.cfg.locks.contains(&Lock::new(&name)) {
            return Err(ParseError::UnknownLock { line, col, name });
        }
        Ok(Lock::new(name))
    }

    fn actor(&mut self) -> Result<Actor, ParseError> {
        let (name, line, col) = self.expect_ident("an actor name")?;
        if !self.cfg.actors.contains(&Actor::new(&name)) {
            return Err(ParseError::UnknownActor { line, col, name });
        }
        Ok(Actor::new(name))
    }

    /// `{ σ1, σ2, ... }`
    pub fn lockset(&mut self) -> Result<LockSet, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut out = LockSet::new();
        if self.eat(&Tok::RBrace) {
            return Ok(out);
        }
        loop {
            out.insert(self.lock()?);
            if self.eat(&Tok::Comma) {
                continue;
            }
            self.expect(Tok::RBrace)?;
            return Ok(out);
        }
    }

    /// `bot`, `top`, or a clause list in braces.
    pub fn policy(&mut self) -> Result<Policy, ParseError> {
        if self.eat_keyword("bot") {
            return Ok(self.cfg.bottom());
        }
        if self.eat_keyword("top") {
            return Ok(Policy::top());
        }
        self.expect(Tok::LBrace)?;
        let mut clauses = Vec::new();
        if self.eat(&Tok::RBrace) {
            return Ok(Policy::top());
        }
        loop {
            let guard = self.lockset()?;
            self.expect(Tok::FatArrow)?;
            let actor = self.actor()?;
            clauses.push(Clause { guard, actor });
            if self.eat(&Tok::Semi) {
                continue;
            }
            self.expect(Tok::RBrace)?;
            return Ok(Policy::new(clauses));
        }
    }

    pub fn ann_type(&mut self) -> Result<AnnType, ParseError> {
        let base = self.base_type()?;
        self.expect(Tok::At)?;
        let label = self.policy()?;
        Ok(AnnType::new(base, label))
    }

    fn base_type(&mut self) -> Result<BaseType, ParseError> {
        if self.eat_keyword("unit") {
            return Ok(BaseType::Unit);
        }
        if self.eat_keyword("nat") {
            return Ok(BaseType::Nat);
        }
        if self.eat_keyword("ref") {
            self.expect(Tok::LParen)?;
            let inner = self.ann_type()?;
            self.expect(Tok::RParen)?;
            return Ok(BaseType::Ref(Box::new(inner)));
        }
        let (line, col) = self.here();
        if self.eat(&Tok::LParen) {
            if self.peek() == Some(&Tok::LBracket) {
                let (locks, pc) = self.arrow_header()?;
                let from = self.ann_type()?;
                self.expect(Tok::Arrow)?;
                let to = self.ann_type()?;
                self.expect(Tok::RParen)?;
                return Ok(BaseType::Arrow {
                    locks,
                    pc,
                    from: Box::new(from),
                    to: Box::new(to),
                });
            }
            let left = self.ann_type()?;
            let s = self.next("'+' or '*'")?;
            let ctor = match s.tok {
                Tok::Plus => BaseType::Sum as fn(_, _) -> _,
                Tok::Star => BaseType::Prod as fn(_, _) -> _,
                other => {
                    return Err(ParseError::Unexpected {
                        line: s.line,
                        col: s.col,
                        found: other.to_string(),
                        expected: "'+' or '*'".to_string(),
                    })
                }
            };
            let right = self.ann_type()?;
            self.expect(Tok::RParen)?;
            return Ok(ctor(Box::new(left), Box::new(right)));
        }
        let found = match self.peek() {
            Some(t) => t.to_string(),
            None => "end of input".to_string(),
        };
        Err(ParseError::Unexpected { line, col, found, expected: "a type".to_string() })
    }

    /// `[ lockset ; policy ]`
    fn arrow_header(&mut self) -> Result<(LockSet, Policy), ParseError> {
        self.expect(Tok::LBracket)?;
        let locks = self.lockset()?;
        self.expect(Tok::Semi)?;
        let pc = self.policy()?;
        self.expect(Tok::RBracket)?;
        Ok((locks, pc))
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let first = self.assign_expr()?;
        if self.eat(&Tok::Semi) {
            let rest = self.expr()?;
            Ok(Expr::seq(first, rest))
        } else {
            Ok(first)
        }
    }

    fn assign_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.app_expr()?;
        if self.eat(&Tok::Assign) {
            let rhs = self.assign_expr()?;
            Ok(Expr::assign(lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn app_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.prefix_expr()?;
        while self.starts_prefix() {
            let arg = self.prefix_expr()?;
            e = Expr::app(e, arg);
        }
        Ok(e)
    }

    fn starts_prefix(&self) -> bool {
        match self.peek() {
            Some(Tok::LParen) | Some(Tok::Number(_)) | Some(Tok::Bang) => true,
            Some(Tok::Hash) => self.allow_runtime_forms,
            Some(Tok::Ident(s)) => !matches!(
                s.as_str(),
                "in" | "then" | "else" | "of" | "ref" | "unit" | "nat" | "top" | "bot"
            ),
            _ => false,
        }
    }

    fn prefix_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat_keyword("fst") {
            return Ok(Expr::Fst(Box::new(self.prefix_expr()?)));
        }
        if self.eat_keyword("snd") {
            return Ok(Expr::Snd(Box::new(self.prefix_expr()?)));
        }
        if self.eat(&Tok::Bang) {
            return Ok(Expr::Deref(Box::new(self.prefix_expr()?)));
        }
        if self.eat_keyword("inl") {
            let ann = self.injection_ann()?;
            return Ok(Expr::Inl(Box::new(self.prefix_expr()?), ann));
        }
        if self.eat_keyword("inr") {
            let ann = self.injection_ann()?;
            return Ok(Expr::Inr(Box::new(self.prefix_expr()?), ann));
        }
        self.atom()
    }

    fn injection_ann(&mut self) -> Result<Option<Box<AnnType>>, ParseError> {
        if self.eat(&Tok::LBracket) {
            let t = self.ann_type()?;
            self.expect(Tok::RBracket)?;
            Ok(Some(Box::new(t)))
        } else {
            Ok(None)
        }
    }

    fn bool_side_type(&self) -> AnnType {
        AnnType::unit(self.cfg.bottom())
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        if self.eat_keyword("true") {
            return Ok(Expr::Inl(
                Box::new(Expr::Unit),
                Some(Box::new(self.bool_side_type())),
            ));
        }
        if self.eat_keyword("false") {
            return Ok(Expr::Inr(
                Box::new(Expr::Unit),
                Some(Box::new(self.bool_side_type())),
            ));
        }
        if self.eat_keyword("fun") {
            let header = if self.peek() == Some(&Tok::LBracket) {
                Some(self.arrow_header()?)
            } else {
                None
            };
            let (param, _, _) = self.expect_ident("a parameter name")?;
            let arg_ty = if self.eat(&Tok::Colon) {
                Some(self.ann_type()?)
            } else {
                None
            };
            self.expect(Tok::Dot)?;
            let body = self.expr()?;
            let ann = arg_ty.map(|arg_ty| {
                let (locks, pc) = header
                    .clone()
                    .unwrap_or_else(|| (LockSet::new(), self.cfg.bottom()));
                Box::new(LamAnn { locks, pc, arg_ty })
            });
            return Ok(Expr::Lam { param, ann, body: Box::new(body) });
        }
        if self.eat_keyword("let") {
            let (x, _, _) = self.expect_ident("a variable name")?;
            self.expect(Tok::Eq)?;
            let e1 = self.expr()?;
            if !self.eat_keyword("in") {
                let (line, col) = self.here();
                return Err(ParseError::Unexpected {
                    line,
                    col,
                    found: self.peek().map(|t| t.to_string()).unwrap_or_else(|| "end of input".into()),
                    expected: "'in'".to_string(),
                });
            }
            let e2 = self.expr()?;
            return Ok(Expr::let_in(x, e1, e2));
        }
        if self.eat_keyword("if") {
            let c = self.expr()?;
            self.keyword("then")?;
            let t = self.expr()?;
            self.keyword("else")?;
            let f = self.expr()?;
            return Ok(Expr::Case {
                scrut: Box::new(c),
                left_var: "_if".to_string(),
                left: Box::new(t),
                right_var: "_if".to_string(),
                right: Box::new(f),
            });
        }
        if self.eat_keyword("case") {
            let scrut = self.expr()?;
            self.keyword("of")?;
            self.keyword("inl")?;
            let (lx, _, _) = self.expect_ident("a variable name")?;
            self.expect(Tok::FatArrow)?;
            let left = self.expr()?;
            self.expect(Tok::Pipe)?;
            self.keyword("inr")?;
            let (rx, _, _) = self.expect_ident("a variable name")?;
            self.expect(Tok::FatArrow)?;
            let right = self.expr()?;
            return Ok(Expr::Case {
                scrut: Box::new(scrut),
                left_var: lx,
                left: Box::new(left),
                right_var: rx,
                right: Box::new(right),
            });
        }
        if self.eat_keyword("new") {
            self.expect(Tok::LParen)?;
            let e = self.expr()?;
            self.expect(Tok::Colon)?;
            let t = self.ann_type()?;
            self.expect(Tok::RParen)?;
            return Ok(Expr::New(Box::new(e), Box::new(t)));
        }
        if self.eat_keyword("open") {
            let l = self.lock()?;
            self.keyword("in")?;
            let e = self.expr()?;
            return Ok(Expr::Open(l, Box::new(e)));
        }
        if self.eat_keyword("close") {
            let l = self.lock()?;
            self.keyword("in")?;
            let e = self.expr()?;
            return Ok(Expr::Close(l, Box::new(e)));
        }
        if self.eat_keyword("when") {
            let l = self.lock()?;
            self.keyword("then")?;
            let t = self.expr()?;
            self.keyword("else")?;
            let f = self.expr()?;
            return Ok(Expr::When(l, Box::new(t), Box::new(f)));
        }
        if self.peek() == Some(&Tok::Hash) {
            let (line, col) = self.here();
            if !self.allow_runtime_forms {
                return Err(ParseError::RuntimeForm {
                    line,
                    col,
                    form: "location literal".to_string(),
                });
            }
            self.pos += 1;
            let s = self.next("a location number")?;
            if let Tok::Number(n) = s.tok {
                return Ok(Expr::Loc(LocId(n)));
            }
            return Err(ParseError::Unexpected {
                line: s.line,
                col: s.col,
                found: s.tok.to_string(),
                expected: "a location number".to_string(),
            });
        }
        let s = self.next("an expression")?;
        match s.tok {
            Tok::Number(n) => Ok(Expr::Nat(n)),
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => Ok(Expr::Var(name)),
            Tok::LParen => {
                if self.eat(&Tok::RParen) {
                    return Ok(Expr::Unit);
                }
                let e = self.expr()?;
                if self.eat(&Tok::Comma) {
                    let e2 = self.expr()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Expr::Pair(Box::new(e), Box::new(e2)));
                }
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => Err(ParseError::Unexpected {
                line: s.line,
                col: s.col,
                found: other.to_string(),
                expected: "an expression".to_string(),
            }),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            let (line, col) = self.here();
            Err(ParseError::Unexpected {
                line,
                col,
                found: self
                    .peek()
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "end of input".into()),
                expected: format!("'{kw}'"),
            })
        }
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        if let Some(s) = self.toks.get(self.pos) {
            Err(ParseError::Unexpected {
                line: s.line,
                col: s.col,
                found: s.tok.to_string(),
                expected: "end of input".to_string(),
            })
        } else {
            Ok(())
        }
    }
}

/// Parses a complete source program (runtime forms rejected).
pub fn parse_expr(src: &str, cfg: &SecurityConfig) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src, cfg)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a complete expression, allowing `#n` location literals.
pub fn parse_runtime_expr(src: &str, cfg: &SecurityConfig) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src, cfg)?.with_runtime_forms();
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// Parses a complete annotated type.
pub fn parse_type(src: &str, cfg: &SecurityConfig) -> Result<AnnType, ParseError> {
    let mut p = Parser::new(src, cfg)?;
    let t = p.ann_type()?;
    p.finish()?;
    Ok(t)
}

/// Parses a complete policy.
pub fn parse_policy(src: &str, cfg: &SecurityConfig) -> Result<Policy, ParseError> {
    let mut p = Parser::new(src, cfg)?;
    let t = p.policy()?;
    p.finish()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::lockset;

    fn cfg() -> SecurityConfig {
        SecurityConfig::from_names(&["Alice", "Bob", "Pub"], &["Published", "Paid"])
    }

    #[test]
    fn parse_policies() {
        let c = cfg();
        assert_eq!(parse_policy("bot", &c).unwrap(), c.bottom());
        assert_eq!(parse_policy("top", &c).unwrap(), Policy::top());
        assert_eq!(parse_policy("{}", &c).unwrap(), Policy::top());
        let p = parse_policy("{ {Published} => Pub ; {} => Alice }", &c).unwrap();
        assert_eq!(p.clauses().count(), 2);
        assert!(matches!(
            parse_policy("{ {} => Carol }", &c),
            Err(ParseError::UnknownActor { .. })
        ));
    }

    #[test]
    fn parse_types() {
        let c = cfg();
        let t = parse_type("ref(nat@{ {Published} => Pub })@bot", &c).unwrap();
        assert!(matches!(t.base, BaseType::Ref(_)));
        let t = parse_type("([{Published}; bot] nat@bot -> unit@bot)@bot", &c).unwrap();
        match &t.base {
            BaseType::Arrow { locks, .. } => assert_eq!(*locks, lockset(&["Published"])),
            other => panic!("expected arrow, got {other:?}"),
        }
        let t = parse_type("(unit@bot + (nat@bot * nat@bot)@top)@bot", &c).unwrap();
        assert!(matches!(t.base, BaseType::Sum(_, _)));
    }

    #[test]
    fn parse_expressions() {
        let c = cfg();
        let e = parse_expr("fun x : nat@bot . x", &c).unwrap();
        assert!(matches!(e, Expr::Lam { ann: Some(_), .. }));
        let e = parse_expr("let r = new(0 : nat@bot) in r := 5; !r", &c).unwrap();
        assert!(matches!(e, Expr::App(_, _)));
        let e = parse_expr("open Published in close Published in ()", &c).unwrap();
        assert!(matches!(e, Expr::Open(_, _)));
        let e = parse_expr("when Published then 1 else 0", &c).unwrap();
        assert!(matches!(e, Expr::When(_, _, _)));
        let e = parse_expr("case inl[unit@bot] 3 of inl x => x | inr y => 0", &c).unwrap();
        assert!(matches!(e, Expr::Case { .. }));
        assert!(matches!(
            parse_expr("#0 := 5", &c),
            Err(ParseError::RuntimeForm { .. })
        ));
        assert!(parse_runtime_expr("#0 := 5", &c).is_ok());
        assert!(matches!(
            parse_expr("open Nope in ()", &c),
            Err(ParseError::UnknownLock { .. })
        ));
    }

    #[test]
    fn application_is_left_associative() {
        let c = cfg();
        let e = parse_expr("f x y", &c).unwrap();
        assert_eq!(
            e,
            Expr::app(Expr::app(Expr::var("f"), Expr::var("x")), Expr::var("y"))
        );
    }

    #[test]
    fn comments_and_positions() {
        let c = cfg();
        assert!(parse_expr("-- a program\n5", &c).is_ok());
        match parse_expr("\n  )", &c) {
            Err(ParseError::Unexpected { line, col, .. }) => {
                assert_eq!((line, col), (2, 3));
            }
            other => panic!("expected error, got {other:?}"),
        }
    }
}
