//! Temporal-epistemic formulas: AST, text parser and printer.
//!
//! Grammar (lowest precedence first, `->` associates to the right):
//!
//! ```text
//! imp   := or ("->" imp)?
//! or    := and ("|" and)*
//! and   := unary ("&" unary)*
//! unary := "!" unary | "K[i]" unary | "B[i]" unary | "H[i]" unary
//!        | "EB" unary | "EH" unary | "EdB" unary | "EdH" unary | "CdH" unary
//!        | "Y" unary | "<>" unary | "[]" unary | atom | "(" imp ")"
//! atom  := "true" | "false" | "correct(i)" | "occ(i,START)" | "occ(i,FIRE)"
//!        | "occ(START)" | "occ(FIRE)" | "start" | "start(i)" | "fire" | "fire(i)"
//! ```

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::model::AgentId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Event {
    Start,
    Fire,
}

impl Event {
    fn keyword(self) -> &'static str {
        match self {
            Event::Start => "START",
            Event::Fire => "FIRE",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Atom {
    Correct(AgentId),
    /// An accurate (genuine) record of the event is in the agent's history.
    Occurred(AgentId, Event),
    OccurredAny(Event),
    /// `occ(i,START) & correct(i)`: true from the step the START is recorded
    Start(AgentId),
    StartAny,
    /// `occ(i,FIRE) & correct(i)`
    Fire(AgentId),
    FireAny,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    K(AgentId, Box<Formula>),
    Y(Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
    B(AgentId, Box<Formula>),
    H(AgentId, Box<Formula>),
    MutualB(Box<Formula>),
    MutualH(Box<Formula>),
    EventualMutualB(Box<Formula>),
    EventualMutualH(Box<Formula>),
    EventualCommonHope(Box<Formula>),
}

pub fn atom(a: Atom) -> Formula {
    Formula::Atom(a)
}

pub fn correct(i: AgentId) -> Formula {
    Formula::Atom(Atom::Correct(i))
}

pub fn occurred(i: AgentId, e: Event) -> Formula {
    Formula::Atom(Atom::Occurred(i, e))
}

pub fn start() -> Formula {
    Formula::Atom(Atom::StartAny)
}

pub fn start_of(i: AgentId) -> Formula {
    Formula::Atom(Atom::Start(i))
}

pub fn fire() -> Formula {
    Formula::Atom(Atom::FireAny)
}

pub fn fire_of(i: AgentId) -> Formula {
    Formula::Atom(Atom::Fire(i))
}

pub fn not(a: Formula) -> Formula {
    Formula::Not(Box::new(a))
}

pub fn and(a: Formula, b: Formula) -> Formula {
    Formula::And(Box::new(a), Box::new(b))
}

pub fn or(a: Formula, b: Formula) -> Formula {
    Formula::Or(Box::new(a), Box::new(b))
}

pub fn implies(a: Formula, b: Formula) -> Formula {
    Formula::Implies(Box::new(a), Box::new(b))
}

pub fn iff(a: Formula, b: Formula) -> Formula {
    and(implies(a.clone(), b.clone()), implies(b, a))
}

pub fn k(i: AgentId, a: Formula) -> Formula {
    Formula::K(i, Box::new(a))
}

pub fn b(i: AgentId, a: Formula) -> Formula {
    Formula::B(i, Box::new(a))
}

pub fn h(i: AgentId, a: Formula) -> Formula {
    Formula::H(i, Box::new(a))
}

pub fn y(a: Formula) -> Formula {
    Formula::Y(Box::new(a))
}

pub fn eventually(a: Formula) -> Formula {
    Formula::Eventually(Box::new(a))
}

pub fn always(a: Formula) -> Formula {
    Formula::Always(Box::new(a))
}

pub fn mutual_b(a: Formula) -> Formula {
    Formula::MutualB(Box::new(a))
}

pub fn mutual_h(a: Formula) -> Formula {
    Formula::MutualH(Box::new(a))
}

pub fn eventual_mutual_b(a: Formula) -> Formula {
    Formula::EventualMutualB(Box::new(a))
}

pub fn eventual_mutual_h(a: Formula) -> Formula {
    Formula::EventualMutualH(Box::new(a))
}

pub fn eventual_common_hope(a: Formula) -> Formula {
    Formula::EventualCommonHope(Box::new(a))
}

/// Conjunction of all items; `true` when empty.
pub fn all<I: IntoIterator<Item = Formula>>(items: I) -> Formula {
    items.into_iter().reduce(and).unwrap_or(Formula::True)
}

/// Disjunction of all items; `false` when empty.
pub fn any<I: IntoIterator<Item = Formula>>(items: I) -> Formula {
    items.into_iter().reduce(or).unwrap_or(Formula::False)
}

impl Formula {
    /// Largest agent index mentioned, if any.
    pub fn max_agent(&self) -> Option<AgentId> {
        let own = match self {
            Formula::Atom(Atom::Correct(i) | Atom::Occurred(i, _) | Atom::Start(i) | Atom::Fire(i))
            | Formula::K(i, _)
            | Formula::B(i, _)
            | Formula::H(i, _) => Some(*i),
            _ => None,
        };
        self.children().iter().filter_map(|c| c.max_agent()).chain(own).max()
    }

    pub fn children(&self) -> Vec<&Formula> {
        use Formula::*;
        match self {
            True | False | Atom(_) => Vec::new(),
            And(a, b) | Or(a, b) | Implies(a, b) => alloc::vec![a.as_ref(), b.as_ref()],
            Not(a) | K(_, a) | Y(a) | Eventually(a) | Always(a) | B(_, a) | H(_, a) | MutualB(a)
            | MutualH(a) | EventualMutualB(a) | EventualMutualH(a) | EventualCommonHope(a) => {
                alloc::vec![a.as_ref()]
            }
        }
    }

    /// Rewrites derived atoms and the B/H/E abbreviations into
    /// `correct`, `occ`, boolean connectives, `K`, `Y`, `<>` and `[]`.
    /// `CdH` is kept, its argument is desugared.
    pub fn desugar(&self, n: usize) -> Formula {
        use Formula as X;
        let agents = || (0..n).map(AgentId::from);
        match self {
            X::True | X::False => self.clone(),
            X::Atom(a) => match *a {
                Atom::Correct(_) | Atom::Occurred(..) => self.clone(),
                Atom::OccurredAny(e) => any(agents().map(|i| occurred(i, e))),
                Atom::Start(i) => and(occurred(i, Event::Start), correct(i)),
                Atom::StartAny => any(agents().map(|i| X::Atom(Atom::Start(i)).desugar(n))),
                Atom::Fire(i) => and(occurred(i, Event::Fire), correct(i)),
                Atom::FireAny => any(agents().map(|i| X::Atom(Atom::Fire(i)).desugar(n))),
            },
            X::Not(a) => not(a.desugar(n)),
            X::And(a, c) => and(a.desugar(n), c.desugar(n)),
            X::Or(a, c) => or(a.desugar(n), c.desugar(n)),
            X::Implies(a, c) => implies(a.desugar(n), c.desugar(n)),
            X::K(i, a) => k(*i, a.desugar(n)),
            X::Y(a) => y(a.desugar(n)),
            X::Eventually(a) => eventually(a.desugar(n)),
            X::Always(a) => always(a.desugar(n)),
            X::B(i, a) => k(*i, implies(correct(*i), a.desugar(n))),
            X::H(i, a) => implies(correct(*i), b(*i, (**a).clone()).desugar(n)),
            X::MutualB(a) => all(agents().map(|j| b(j, (**a).clone()).desugar(n))),
            X::MutualH(a) => all(agents().map(|j| h(j, (**a).clone()).desugar(n))),
            X::EventualMutualB(a) => {
                all(agents().map(|j| eventually(b(j, (**a).clone())).desugar(n)))
            }
            X::EventualMutualH(a) => {
                all(agents().map(|j| eventually(h(j, (**a).clone())).desugar(n)))
            }
            X::EventualCommonHope(a) => eventual_common_hope(a.desugar(n)),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Correct(i) => write!(f, "correct({i})"),
            Atom::Occurred(i, e) => write!(f, "occ({i},{})", e.keyword()),
            Atom::OccurredAny(e) => write!(f, "occ({})", e.keyword()),
            Atom::Start(i) => write!(f, "start({i})"),
            Atom::StartAny => f.write_str("start"),
            Atom::Fire(i) => write!(f, "fire({i})"),
            Atom::FireAny => f.write_str("fire"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula as X;
        let unary = |f: &mut fmt::Formatter<'_>, op: &str, a: &Formula| {
            let inner = a.to_string();
            let sep = if op == "!" || inner.starts_with('(') { "" } else { " " };
            write!(f, "{op}{sep}{inner}")
        };
        match self {
            X::True => f.write_str("true"),
            X::False => f.write_str("false"),
            X::Atom(a) => write!(f, "{a}"),
            X::And(a, b) => write!(f, "({a} & {b})"),
            X::Or(a, b) => write!(f, "({a} | {b})"),
            X::Implies(a, b) => write!(f, "({a} -> {b})"),
            X::Not(a) => unary(f, "!", a),
            X::K(i, a) => unary(f, &format!("K[{i}]"), a),
            X::B(i, a) => unary(f, &format!("B[{i}]"), a),
            X::H(i, a) => unary(f, &format!("H[{i}]"), a),
            X::Y(a) => unary(f, "Y", a),
            X::Eventually(a) => unary(f, "<>", a),
            X::Always(a) => unary(f, "[]", a),
            X::MutualB(a) => unary(f, "EB", a),
            X::MutualH(a) => unary(f, "EH", a),
            X::EventualMutualB(a) => unary(f, "EdB", a),
            X::EventualMutualH(a) => unary(f, "EdH", a),
            X::EventualCommonHope(a) => unary(f, "CdH", a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u16),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Arrow,
    Amp,
    Pipe,
    Bang,
    Diamond,
    Box,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |position, message: &str| ParseError { position, message: message.to_string() };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'&' => Tok::Amp,
            b'|' => Tok::Pipe,
            b'!' => Tok::Bang,
            b']' => Tok::RBracket,
            b'[' if bytes.get(i + 1) == Some(&b']') => {
                i += 1;
                Tok::Box
            }
            b'[' => Tok::LBracket,
            b'<' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Diamond
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Arrow
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n = src[start..i]
                    .parse::<u16>()
                    .map_err(|_| err(start, "agent index out of range"))?;
                out.push((start, Tok::Num(n)));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
                continue;
            }
            _ => return Err(err(start, "unexpected character")),
        };
        i += 1;
        out.push((start, tok));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn fail<T>(&self, message: &str) -> Result<T, ParseError> {
        Err(ParseError { position: self.offset(), message: message.to_string() })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.fail(&format!("expected {what}"))
        }
    }

    fn agent(&mut self) -> Result<AgentId, ParseError> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(AgentId(n))
            }
            _ => self.fail("expected agent index"),
        }
    }

    fn bracketed_agent(&mut self) -> Result<AgentId, ParseError> {
        self.expect(Tok::LBracket, "'['")?;
        let i = self.agent()?;
        self.expect(Tok::RBracket, "']'")?;
        Ok(i)
    }

    fn event(&mut self) -> Result<Event, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == "START" => {
                self.pos += 1;
                Ok(Event::Start)
            }
            Some(Tok::Ident(s)) if s == "FIRE" => {
                self.pos += 1;
                Ok(Event::Fire)
            }
            _ => self.fail("expected START or FIRE"),
        }
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Arrow) {
            Ok(implies(lhs, self.implication()?))
        } else {
            Ok(lhs)
        }
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Tok::Pipe) {
            lhs = or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.eat(&Tok::Amp) {
            lhs = and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.fail("unexpected end of input");
        };
        match tok {
            Tok::Bang => {
                self.pos += 1;
                Ok(not(self.unary()?))
            }
            Tok::Diamond => {
                self.pos += 1;
                Ok(eventually(self.unary()?))
            }
            Tok::Box => {
                self.pos += 1;
                Ok(always(self.unary()?))
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.implication()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let at = self.offset();
                self.pos += 1;
                self.keyword(&name, at)
            }
            _ => self.fail("expected a formula"),
        }
    }

    fn keyword(&mut self, name: &str, at: usize) -> Result<Formula, ParseError> {
        let optional_agent = |p: &mut Parser| -> Result<Option<AgentId>, ParseError> {
            if p.eat(&Tok::LParen) {
                let i = p.agent()?;
                p.expect(Tok::RParen, "')'")?;
                Ok(Some(i))
            } else {
                Ok(None)
            }
        };
        Ok(match name {
            "true" => Formula::True,
            "false" => Formula::False,
            "K" => {
                let i = self.bracketed_agent()?;
                k(i, self.unary()?)
            }
            "B" => {
                let i = self.bracketed_agent()?;
                b(i, self.unary()?)
            }
            "H" => {
                let i = self.bracketed_agent()?;
                h(i, self.unary()?)
            }
            "EB" => mutual_b(self.unary()?),
            "EH" => mutual_h(self.unary()?),
            "EdB" => eventual_mutual_b(self.unary()?),
            "EdH" => eventual_mutual_h(self.unary()?),
            "CdH" => eventual_common_hope(self.unary()?),
            "Y" => y(self.unary()?),
            "correct" => {
                self.expect(Tok::LParen, "'('")?;
                let i = self.agent()?;
                self.expect(Tok::RParen, "')'")?;
                correct(i)
            }
            "occ" => {
                self.expect(Tok::LParen, "'('")?;
                let f = if let Some(Tok::Num(_)) = self.peek() {
                    let i = self.agent()?;
                    self.expect(Tok::Comma, "','")?;
                    occurred(i, self.event()?)
                } else {
                    atom(Atom::OccurredAny(self.event()?))
                };
                self.expect(Tok::RParen, "')'")?;
                f
            }
            "start" => optional_agent(self)?.map_or(start(), start_of),
            "fire" => optional_agent(self)?.map_or(fire(), fire_of),
            _ => {
                return Err(ParseError {
                    position: at,
                    message: format!("unknown keyword '{name}'"),
                })
            }
        })
    }
}

impl core::str::FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Formula, ParseError> {
        parse(s)
    }
}

pub fn parse(src: &str) -> Result<Formula, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0, end: src.len() };
    let f = p.implication()?;
    if p.pos != p.toks.len() {
        return p.fail("trailing input");
    }
    Ok(f)
}
