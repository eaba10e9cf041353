//! Lexer and recursive-descent parser for `.ba` models.
//!
//! ```text
//! model      := groupdecl* namedecl* "system" process
//! groupdecl  := "group" GID [ "{" [ "stay" ":" gidlist ";" ] [ "cross" ":" gidlist ";" ] "}" ]
//! gidlist    := [ GID ("," GID)* ]
//! namedecl   := "name" NID ":" typeexpr
//! typeexpr   := "amb" "(" GID ")"
//!             | "cap" "(" label "," "{" gidlist "}" "," "{" gidlist "}" ")"
//!             | "ch" "(" argtype ")"
//! argtype    := "group" GID | typeexpr
//! process    := proc_sum ("|" proc_sum)*
//! proc_sum   := unary ("+" unary)*
//! unary      := "0" | "!" unary | NID "[" [process] "]" | prefix ["." unary]
//!             | "(" "new" NID ":" typeexpr ")" process | "(" process ")"
//! prefix     := capop NID | dir NID ("!"|"?") "{" NID "}"
//! ```
//!
//! `#` starts a line comment. Identifiers match `[A-Za-z][A-Za-z0-9_+'-]*`, so a
//! choice operator must be separated from a preceding identifier by whitespace.
//! A restriction's scope extends as far right as possible.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::syntax::{
    ArgType, CapOp, CapType, Direction, GroupDecl, GroupName, GroupSet, GroupTable, Label, Name,
    NameKind, Prefix, Process, SumFlavor, UNIV,
};
use crate::typing::TypeEnv;

/// A parsed model: the group universe, Γ, and the system process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub groups: GroupTable,
    pub env: TypeEnv,
    pub system: Process,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    Lexical,
    Syntactic,
    MixedSum,
    Undeclared,
    Duplicate,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::Lexical => "lexical error",
            ParseErrorKind::Syntactic => "syntax error",
            ParseErrorKind::MixedSum => "mixed choice",
            ParseErrorKind::Undeclared => "undeclared",
            ParseErrorKind::Duplicate => "duplicate declaration",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{line}:{column}: {kind}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

fn error(pos: Pos, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
    ParseError {
        line: pos.line,
        column: pos.column,
        message: message.into(),
        kind,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Zero,
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Dot,
    Bar,
    Plus,
    Bang,
    Query,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Zero => f.write_str("`0`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrack => f.write_str("`[`"),
            Tok::RBrack => f.write_str("`]`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Bar => f.write_str("`|`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Query => f.write_str("`?`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic()
}

fn ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '+' | '\'' | '-')
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut toks = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, column };
        let advance = |c: char, line: &mut usize, column: &mut usize| {
            if c == '\n' {
                *line += 1;
                *column = 1;
            } else {
                *column += 1;
            }
        };
        if c.is_whitespace() {
            chars.next();
            advance(c, &mut line, &mut column);
            continue;
        }
        if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
                advance(c, &mut line, &mut column);
            }
            continue;
        }
        if ident_start(c) {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if !ident_continue(c) {
                    break;
                }
                s.push(c);
                chars.next();
                advance(c, &mut line, &mut column);
            }
            toks.push((Tok::Ident(s), pos));
            continue;
        }
        let tok = match c {
            '0' => Tok::Zero,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBrack,
            ']' => Tok::RBrack,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            '.' => Tok::Dot,
            '|' => Tok::Bar,
            '+' => Tok::Plus,
            '!' => Tok::Bang,
            '?' => Tok::Query,
            other => {
                return Err(error(
                    pos,
                    ParseErrorKind::Lexical,
                    format!("unexpected character {other:?}"),
                ))
            }
        };
        chars.next();
        advance(c, &mut line, &mut column);
        if tok == Tok::Zero {
            if let Some(&n) = chars.peek() {
                if ident_continue(n) {
                    return Err(error(
                        pos,
                        ParseErrorKind::Lexical,
                        "identifiers must start with a letter",
                    ));
                }
            }
        }
        toks.push((tok, pos));
    }
    toks.push((Tok::Eof, Pos { line, column }));
    Ok(toks)
}

const KEYWORDS: &[&str] = &[
    "group", "stay", "cross", "name", "system", "amb", "cap", "ch", "new", "enter", "accept",
    "exit", "expel", "merge+", "merge-", "local", "s2s", "p2c", "c2p", "ea", "ee", "mm", UNIV,
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn cap_op(s: &str) -> Option<CapOp> {
    Some(match s {
        "enter" => CapOp::Enter,
        "accept" => CapOp::Accept,
        "exit" => CapOp::Exit,
        "expel" => CapOp::Expel,
        "merge+" => CapOp::MergePlus,
        "merge-" => CapOp::MergeMinus,
        _ => return None,
    })
}

fn direction(s: &str) -> Option<Direction> {
    Some(match s {
        "local" => Direction::Local,
        "s2s" => Direction::S2s,
        "p2c" => Direction::P2c,
        "c2p" => Direction::C2p,
        _ => return None,
    })
}

const MAX_NESTING: usize = 256;

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
    groups: GroupTable,
    env: TypeEnv,
    scope: Vec<(String, ArgType)>,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

pub fn parse_model(source: &str) -> Result<Model, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        i: 0,
        groups: GroupTable::new(),
        env: TypeEnv::new(),
        scope: Vec::new(),
        depth: 0,
    };
    p.model()
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let j = (self.i + k).min(self.toks.len() - 1);
        &self.toks[j].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn unexpected<T>(&self, expected: &str) -> PResult<T> {
        Err(error(
            self.pos(),
            ParseErrorKind::Syntactic,
            format!("expected {expected}, found {}", self.peek()),
        ))
    }

    fn expect(&mut self, tok: Tok) -> PResult<Pos> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            self.unexpected(&tok.to_string())
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Pos> {
        if self.at_keyword(kw) {
            Ok(self.bump().1)
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let pos = self.bump().1;
                Ok((s, pos))
            }
            _ => self.unexpected(what),
        }
    }

    /// A name identifier at a binding or declaration site.
    fn binder_ident(&mut self) -> PResult<(String, Pos)> {
        let (s, pos) = self.ident("a name")?;
        if is_keyword(&s) {
            return Err(error(
                pos,
                ParseErrorKind::Syntactic,
                format!("`{s}` is a keyword"),
            ));
        }
        if self.groups.get(&GroupName::new(s.clone())).is_some() {
            return Err(error(
                pos,
                ParseErrorKind::Duplicate,
                format!("`{s}` is already a group name"),
            ));
        }
        Ok((s, pos))
    }

    fn model(&mut self) -> PResult<Model> {
        let mut refs = Vec::new();
        while self.at_keyword("group") {
            self.group_decl(&mut refs)?;
        }
        for (g, pos) in refs {
            if !self.groups.is_known(&g) {
                return Err(error(
                    pos,
                    ParseErrorKind::Undeclared,
                    format!("unknown group `{g}`"),
                ));
            }
        }
        while self.at_keyword("name") {
            self.bump();
            let (text, pos) = self.binder_ident()?;
            self.expect(Tok::Colon)?;
            let ty = self.type_expr()?;
            let name = Name::new(text.clone(), NameKind::of(&ty));
            if self.env.extend(&name, ty).is_err() {
                return Err(error(
                    pos,
                    ParseErrorKind::Duplicate,
                    format!("name `{text}` declared twice"),
                ));
            }
        }
        self.expect_keyword("system")?;
        let system = self.process()?;
        if *self.peek() != Tok::Eof {
            return self.unexpected("end of input");
        }
        Ok(Model {
            groups: std::mem::take(&mut self.groups),
            env: std::mem::take(&mut self.env),
            system,
        })
    }

    fn group_decl(&mut self, refs: &mut Vec<(GroupName, Pos)>) -> PResult<()> {
        self.expect_keyword("group")?;
        let (text, pos) = self.ident("a group name")?;
        if text == UNIV {
            return Err(error(
                pos,
                ParseErrorKind::Duplicate,
                "`Univ` is predeclared",
            ));
        }
        if is_keyword(&text) {
            return Err(error(
                pos,
                ParseErrorKind::Syntactic,
                format!("`{text}` is a keyword"),
            ));
        }
        let name = GroupName::new(text.clone());
        if self.groups.get(&name).is_some() {
            return Err(error(
                pos,
                ParseErrorKind::Duplicate,
                format!("group `{text}` declared twice"),
            ));
        }
        let mut stay = None;
        let mut cross = None;
        if *self.peek() == Tok::LBrace {
            self.bump();
            if self.at_keyword("stay") {
                self.bump();
                self.expect(Tok::Colon)?;
                stay = Some(self.gid_list(refs)?);
                self.expect(Tok::Semi)?;
            }
            if self.at_keyword("cross") {
                self.bump();
                self.expect(Tok::Colon)?;
                cross = Some(self.gid_list(refs)?);
                self.expect(Tok::Semi)?;
            }
            self.expect(Tok::RBrace)?;
        }
        let stay = stay.unwrap_or_else(|| [GroupName::univ()].into());
        let cross = cross.unwrap_or_else(|| stay.clone());
        self.groups.insert(GroupDecl { name, stay, cross });
        Ok(())
    }

    fn gid_list(&mut self, refs: &mut Vec<(GroupName, Pos)>) -> PResult<GroupSet> {
        let mut out = GroupSet::new();
        if matches!(self.peek(), Tok::Semi | Tok::RBrace) {
            return Ok(out);
        }
        loop {
            let (text, pos) = self.ident("a group name")?;
            let g = GroupName::new(text);
            refs.push((g.clone(), pos));
            out.insert(g);
            if *self.peek() != Tok::Comma {
                return Ok(out);
            }
            self.bump();
        }
    }

    /// A group list whose members must already be declared.
    fn known_gid_list(&mut self) -> PResult<GroupSet> {
        let mut refs = Vec::new();
        let set = self.gid_list(&mut refs)?;
        for (g, pos) in refs {
            self.check_group(&g, pos)?;
        }
        Ok(set)
    }

    fn check_group(&self, g: &GroupName, pos: Pos) -> PResult<()> {
        if self.groups.is_known(g) {
            Ok(())
        } else {
            Err(error(
                pos,
                ParseErrorKind::Undeclared,
                format!("unknown group `{g}`"),
            ))
        }
    }

    fn known_gid(&mut self) -> PResult<GroupName> {
        let (text, pos) = self.ident("a group name")?;
        let g = GroupName::new(text);
        self.check_group(&g, pos)?;
        Ok(g)
    }

    fn type_expr(&mut self) -> PResult<ArgType> {
        let (kw, _) = self.ident("a type (`amb`, `cap` or `ch`)")?;
        match kw.as_str() {
            "amb" => {
                self.expect(Tok::LParen)?;
                let g = self.known_gid()?;
                self.expect(Tok::RParen)?;
                Ok(ArgType::Group(g))
            }
            "cap" => {
                self.expect(Tok::LParen)?;
                let (l, lpos) = self.ident("a label")?;
                let label = match l.as_str() {
                    "ea" => Label::Ea,
                    "ee" => Label::Ee,
                    "mm" => Label::Mm,
                    _ => {
                        return Err(error(
                            lpos,
                            ParseErrorKind::Syntactic,
                            "expected a label (`ea`, `ee` or `mm`)",
                        ))
                    }
                };
                self.expect(Tok::Comma)?;
                self.expect(Tok::LBrace)?;
                let movers = self.known_gid_list()?;
                self.expect(Tok::RBrace)?;
                self.expect(Tok::Comma)?;
                self.expect(Tok::LBrace)?;
                let hosts = self.known_gid_list()?;
                self.expect(Tok::RBrace)?;
                self.expect(Tok::RParen)?;
                Ok(ArgType::Cap(CapType {
                    movers,
                    hosts,
                    label,
                }))
            }
            "ch" => {
                self.expect(Tok::LParen)?;
                let inner = if self.at_keyword("group") {
                    self.bump();
                    ArgType::Group(self.known_gid()?)
                } else {
                    self.type_expr()?
                };
                self.expect(Tok::RParen)?;
                Ok(ArgType::chan(inner))
            }
            _ => {
                self.i -= 1;
                self.unexpected("a type (`amb`, `cap` or `ch`)")
            }
        }
    }

    fn lookup(&self, text: &str) -> Option<&ArgType> {
        self.scope
            .iter()
            .rev()
            .find(|(t, _)| t == text)
            .map(|(_, ty)| ty)
            .or_else(|| self.env.get_text(text))
    }

    /// A name occurrence, resolved against the enclosing binders and Γ.
    fn occurrence(&mut self) -> PResult<(Name, Option<ArgType>)> {
        let (text, pos) = self.ident("a name")?;
        if is_keyword(&text) {
            return Err(error(
                pos,
                ParseErrorKind::Syntactic,
                format!("`{text}` is a keyword"),
            ));
        }
        match self.lookup(&text) {
            Some(ty) => {
                let ty = ty.clone();
                Ok((Name::new(text, NameKind::of(&ty)), Some(ty)))
            }
            None => Err(error(
                pos,
                ParseErrorKind::Undeclared,
                format!("undeclared name `{text}`"),
            )),
        }
    }

    fn enter_nesting(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(error(
                self.pos(),
                ParseErrorKind::Syntactic,
                "nesting too deep",
            ));
        }
        Ok(())
    }

    fn process(&mut self) -> PResult<Process> {
        self.enter_nesting()?;
        let mut items = vec![self.sum()?];
        while *self.peek() == Tok::Bar {
            self.bump();
            items.push(self.sum()?);
        }
        self.depth -= 1;
        Ok(Process::par(items))
    }

    fn sum(&mut self) -> PResult<Process> {
        let first_pos = self.pos();
        let first = self.unary()?;
        if *self.peek() != Tok::Plus {
            return Ok(first);
        }
        let mut operands = vec![(first_pos, first)];
        while *self.peek() == Tok::Plus {
            self.bump();
            let pos = self.pos();
            operands.push((pos, self.unary()?));
        }
        let mut flavor: Option<SumFlavor> = None;
        let mut branches = Vec::new();
        for (pos, operand) in operands {
            if operand.is_zero() {
                continue;
            }
            let Process::Sum {
                flavor: f,
                branches: bs,
            } = operand
            else {
                return Err(error(
                    pos,
                    ParseErrorKind::Syntactic,
                    "every branch of a choice must start with a prefix",
                ));
            };
            match flavor {
                None => flavor = Some(f),
                Some(expected) if expected != f => {
                    return Err(error(
                        pos,
                        ParseErrorKind::MixedSum,
                        "a choice cannot mix capability and communication prefixes",
                    ))
                }
                _ => {}
            }
            branches.extend(bs);
        }
        Ok(match flavor {
            Some(flavor) => Process::Sum { flavor, branches },
            None => Process::Zero,
        })
    }

    fn unary(&mut self) -> PResult<Process> {
        self.enter_nesting()?;
        let r = self.unary_inner();
        self.depth -= 1;
        r
    }

    fn unary_inner(&mut self) -> PResult<Process> {
        match self.peek().clone() {
            Tok::Zero => {
                self.bump();
                Ok(Process::Zero)
            }
            Tok::Bang => {
                self.bump();
                Ok(Process::repl(self.unary()?))
            }
            Tok::LParen => {
                if matches!(self.peek_at(1), Tok::Ident(s) if s == "new") {
                    self.bump();
                    self.bump();
                    let (text, _) = self.binder_ident()?;
                    self.expect(Tok::Colon)?;
                    let ty = self.type_expr()?;
                    self.expect(Tok::RParen)?;
                    let name = Name::new(text.clone(), NameKind::of(&ty));
                    self.scope.push((text, ty.clone()));
                    let body = self.process();
                    self.scope.pop();
                    Ok(Process::restrict(name, ty, body?))
                } else {
                    self.bump();
                    let p = self.process()?;
                    self.expect(Tok::RParen)?;
                    Ok(p)
                }
            }
            Tok::Ident(s) => {
                if let Some(op) = cap_op(&s) {
                    self.bump();
                    let (name, _) = self.occurrence()?;
                    let cont = self.continuation()?;
                    Ok(Process::prefixed(Prefix::Cap { op, name }, cont))
                } else if let Some(dir) = direction(&s) {
                    self.bump();
                    self.communication(dir)
                } else if is_keyword(&s) {
                    self.unexpected("a process")
                } else {
                    let (name, _) = self.occurrence()?;
                    self.expect(Tok::LBrack)?;
                    let body = if *self.peek() == Tok::RBrack {
                        Process::Zero
                    } else {
                        self.process()?
                    };
                    self.expect(Tok::RBrack)?;
                    Ok(Process::ambient(name, body))
                }
            }
            _ => self.unexpected("a process"),
        }
    }

    fn continuation(&mut self) -> PResult<Process> {
        if *self.peek() == Tok::Dot {
            self.bump();
            self.unary()
        } else {
            Ok(Process::Zero)
        }
    }

    fn communication(&mut self, dir: Direction) -> PResult<Process> {
        let (channel, channel_ty) = self.occurrence()?;
        match self.peek() {
            Tok::Bang => {
                self.bump();
                self.expect(Tok::LBrace)?;
                let (payload, _) = self.occurrence()?;
                self.expect(Tok::RBrace)?;
                let cont = self.continuation()?;
                Ok(Process::prefixed(
                    Prefix::Output {
                        dir,
                        channel,
                        payload,
                    },
                    cont,
                ))
            }
            Tok::Query => {
                self.bump();
                self.expect(Tok::LBrace)?;
                let (text, _) = self.binder_ident()?;
                self.expect(Tok::RBrace)?;
                // a non-channel subject is left for the type checker to report
                let payload_ty = match channel_ty {
                    Some(ArgType::Chan(t)) => *t,
                    _ => ArgType::Group(GroupName::univ()),
                };
                let binder = Name::new(text.clone(), NameKind::of(&payload_ty));
                self.scope.push((text, payload_ty));
                let cont = self.continuation();
                self.scope.pop();
                Ok(Process::prefixed(
                    Prefix::Input {
                        dir,
                        channel,
                        binder,
                    },
                    cont?,
                ))
            }
            _ => self.unexpected("`!` or `?`"),
        }
    }
}
