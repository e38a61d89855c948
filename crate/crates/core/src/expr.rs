//! Abstract-index tensor expressions.
//!
//! A monomial is an exact rational coefficient times a product of at most two
//! derivative-curvature factors; repeated index labels denote contraction
//! (Einstein convention). Labels are opaque: nothing here depends on the
//! dimension, which only enters through the numeric oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::ratio::{q_display, q_int, q_parse, Q};

/// Opaque index label. `Named` labels come from parsed text or callers;
/// `Anon` labels are generated internally (canonical dummy renaming, pair
/// contraction) and can never collide with named ones.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Named(Arc<str>),
    Anon(u64),
}

impl Label {
    pub fn named(name: &str) -> Self {
        Label::Named(Arc::from(name))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Named(s) => write!(f, "{s}"),
            Label::Anon(k) => write!(f, "#{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Riem,
    Ric,
    Scal,
}

impl Kind {
    pub fn body_arity(self) -> usize {
        match self {
            Kind::Riem => 4,
            Kind::Ric => 2,
            Kind::Scal => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Riem => "Riem",
            Kind::Ric => "Ric",
            Kind::Scal => "Scal",
        }
    }
}

/// One derivative-curvature symbol: `deriv` are the covariant-derivative
/// slots (outermost first), `body` the tensor slots of the head.
///
/// Derivative slots are treated as totally symmetric except when `pinned` is
/// set: then the slot at that depth does not commute with deeper slots. This
/// is only used for the top-order regime where one distinguished derivative
/// index has to be transported by explicit curvature corrections.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Factor {
    pub kind: Kind,
    pub deriv: Vec<Label>,
    pub body: Vec<Label>,
    pub pinned: Option<usize>,
}

impl Factor {
    pub fn new(kind: Kind, deriv: Vec<Label>, body: Vec<Label>) -> Self {
        assert_eq!(body.len(), kind.body_arity(), "body arity mismatch for {}", kind.name());
        Factor { kind, deriv, body, pinned: None }
    }

    pub fn order(&self) -> usize {
        self.deriv.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.deriv.iter().chain(self.body.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Monomial {
    pub coeff: Q,
    pub factors: Vec<Factor>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("label `{0}` occurs {1} times in one monomial; only 1 (free) or 2 (contracted) allowed")]
    Occurrence(String, usize),
    #[error("{head} takes {want} body slots, got {got}")]
    BodyArity { head: String, want: usize, got: usize },
    #[error("monomials of an expression have differing free-label sets")]
    FreeMismatch,
    #[error("label `{0}` is not free in the expression")]
    NotFree(String),
}

impl Monomial {
    pub fn new(coeff: Q, factors: Vec<Factor>) -> Result<Self, ExprError> {
        let m = Monomial { coeff, factors };
        m.validate()?;
        Ok(m)
    }

    /// Index-occurrence invariant: every label appears once or twice.
    pub fn validate(&self) -> Result<(), ExprError> {
        for (label, count) in self.label_counts() {
            if count > 2 {
                return Err(ExprError::Occurrence(label.to_string(), count));
            }
        }
        Ok(())
    }

    pub fn label_counts(&self) -> BTreeMap<&Label, usize> {
        let mut counts = BTreeMap::new();
        for f in &self.factors {
            for l in f.labels() {
                *counts.entry(l).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn free_labels(&self) -> Vec<Label> {
        self.label_counts()
            .into_iter()
            .filter(|(_, c)| *c == 1)
            .map(|(l, _)| l.clone())
            .collect()
    }

    /// Applies a label substitution to every slot.
    pub fn rename(&self, map: &BTreeMap<Label, Label>) -> Monomial {
        let sub = |l: &Label| map.get(l).cloned().unwrap_or_else(|| l.clone());
        Monomial {
            coeff: self.coeff.clone(),
            factors: self
                .factors
                .iter()
                .map(|f| Factor {
                    kind: f.kind,
                    deriv: f.deriv.iter().map(sub).collect(),
                    body: f.body.iter().map(sub).collect(),
                    pinned: f.pinned,
                })
                .collect(),
        }
    }

    pub fn scaled(&self, c: &Q) -> Monomial {
        Monomial { coeff: &self.coeff * c, factors: self.factors.clone() }
    }

    /// Largest `Anon` id in use, for generating fresh labels.
    pub fn max_anon(&self) -> u64 {
        self.factors
            .iter()
            .flat_map(|f| f.labels())
            .filter_map(|l| match l {
                Label::Anon(k) => Some(*k + 1),
                Label::Named(_) => None,
            })
            .max()
            .unwrap_or(0)
    }
}

/// A finite sum of monomials. The shared-free-label invariant is checked by
/// [`Expression::new`]; internal transformation passes that preserve it use
/// `from_monomials_unchecked`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Expression {
    pub monomials: Vec<Monomial>,
}

impl Expression {
    pub fn new(monomials: Vec<Monomial>) -> Result<Self, ExprError> {
        for m in &monomials {
            m.validate()?;
        }
        let mut frees: Option<Vec<Label>> = None;
        for m in &monomials {
            let f = m.free_labels();
            match &frees {
                None => frees = Some(f),
                Some(prev) if *prev == f => {}
                Some(_) => return Err(ExprError::FreeMismatch),
            }
        }
        Ok(Expression { monomials })
    }

    pub fn from_monomials_unchecked(monomials: Vec<Monomial>) -> Self {
        Expression { monomials }
    }

    pub fn zero() -> Self {
        Expression { monomials: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn free_labels(&self) -> Vec<Label> {
        self.monomials.first().map(|m| m.free_labels()).unwrap_or_default()
    }

    pub fn add(&self, other: &Expression) -> Expression {
        let mut monomials = self.monomials.clone();
        monomials.extend(other.monomials.iter().cloned());
        Expression { monomials }
    }

    pub fn scaled(&self, c: &Q) -> Expression {
        if c.is_zero() {
            return Expression::zero();
        }
        Expression { monomials: self.monomials.iter().map(|m| m.scaled(c)).collect() }
    }

    pub fn max_anon(&self) -> u64 {
        self.monomials.iter().map(|m| m.max_anon()).max().unwrap_or(0)
    }
}

// ---------------------------------------------------------------------------
// Parser
//
//   expr    := term (('+'|'-') term)*
//   term    := [rational '*'] factor ('*' factor)*
//   factor  := deriv* head '[' labels ']'
//   deriv   := 'D[' label ']'
//   head    := 'Riem' | 'Ric' | 'Scal'
//   rational:= integer ['/' positive-integer]
// ---------------------------------------------------------------------------

struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser { text, pos: 0 }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text.as_bytes()[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.as_bytes().get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> Result<(), ExprError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{}`", b as char))
        }
    }

    fn ident(&mut self) -> Result<&'a str, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_') {
            self.pos += 1;
        }
        if self.pos == start {
            self.err("expected identifier")
        } else {
            Ok(&self.text[start..self.pos])
        }
    }

    fn number(&mut self) -> Result<Q, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'/') {
            self.pos += 1;
        }
        match q_parse(&self.text[start..self.pos]) {
            Some(q) => Ok(q),
            None => {
                self.pos = start;
                self.err("expected rational")
            }
        }
    }

    fn label_list(&mut self) -> Result<Vec<Label>, ExprError> {
        self.eat(b'[')?;
        let mut labels = Vec::new();
        if self.peek() != Some(b']') {
            loop {
                labels.push(Label::named(self.ident()?));
                match self.peek() {
                    Some(b',') => {
                        self.pos += 1;
                    }
                    _ => break,
                }
            }
        }
        self.eat(b']')?;
        Ok(labels)
    }

    fn factor(&mut self) -> Result<Factor, ExprError> {
        let mut deriv = Vec::new();
        loop {
            self.skip_ws();
            let name = self.ident()?;
            if name == "D" {
                let mut labels = self.label_list()?;
                if labels.len() != 1 {
                    return self.err("D[] takes exactly one label");
                }
                deriv.push(labels.pop().unwrap());
                continue;
            }
            let kind = match name {
                "Riem" => Kind::Riem,
                "Ric" => Kind::Ric,
                "Scal" => Kind::Scal,
                other => return self.err(format!("unknown head `{other}`")),
            };
            let body = self.label_list()?;
            if body.len() != kind.body_arity() {
                return Err(ExprError::BodyArity {
                    head: kind.name().to_string(),
                    want: kind.body_arity(),
                    got: body.len(),
                });
            }
            return Ok(Factor { kind, deriv, body, pinned: None });
        }
    }

    fn term(&mut self, sign: i64) -> Result<Monomial, ExprError> {
        self.skip_ws();
        let mut coeff = q_int(sign);
        if matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
            coeff = coeff * self.number()?;
            self.eat(b'*')?;
        }
        let mut factors = vec![self.factor()?];
        while self.peek() == Some(b'*') {
            self.pos += 1;
            factors.push(self.factor()?);
        }
        Monomial::new(coeff, factors)
    }

    fn expression(&mut self) -> Result<Expression, ExprError> {
        self.skip_ws();
        if self.peek() == Some(b'0') {
            self.pos += 1;
            self.skip_ws();
            if self.pos == self.text.len() {
                return Ok(Expression::zero());
            }
            return self.err("unexpected input after `0`");
        }
        let mut monomials = Vec::new();
        let mut sign = 1;
        if self.peek() == Some(b'-') {
            self.pos += 1;
            sign = -1;
        } else if self.peek() == Some(b'+') {
            self.pos += 1;
        }
        monomials.push(self.term(sign)?);
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    monomials.push(self.term(1)?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    monomials.push(self.term(-1)?);
                }
                None => break,
                Some(c) => return self.err(format!("unexpected `{}`", c as char)),
            }
        }
        Expression::new(monomials)
    }
}

pub fn parse(text: &str) -> Result<Expression, ExprError> {
    Parser::new(text).expression()
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

fn label_names(e: &Expression) -> BTreeMap<Label, String> {
    let mut taken: std::collections::BTreeSet<String> = e
        .monomials
        .iter()
        .flat_map(|m| m.factors.iter())
        .flat_map(|f| f.labels())
        .filter_map(|l| match l {
            Label::Named(s) => Some(s.to_string()),
            Label::Anon(_) => None,
        })
        .collect();
    let mut map = BTreeMap::new();
    let mut next = 0u64;
    for m in &e.monomials {
        for f in &m.factors {
            for l in f.labels() {
                if let Label::Anon(_) = l {
                    if !map.contains_key(l) {
                        let name = loop {
                            let candidate = format!("x{next}");
                            next += 1;
                            if taken.insert(candidate.clone()) {
                                break candidate;
                            }
                        };
                        map.insert(l.clone(), name);
                    }
                }
            }
        }
    }
    map
}

/// Prints an expression in the grammar accepted by [`parse`].
pub fn print(e: &Expression) -> String {
    if e.is_zero() {
        return "0".to_string();
    }
    let names = label_names(e);
    let show = |l: &Label| match l {
        Label::Named(s) => s.to_string(),
        Label::Anon(_) => names[l].clone(),
    };
    let mut out = String::new();
    for (i, m) in e.monomials.iter().enumerate() {
        let neg = m.coeff.is_negative();
        if i == 0 {
            if neg {
                out.push_str("- ");
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let mag = m.coeff.abs();
        let mut parts = Vec::new();
        if !mag.is_one() {
            parts.push(q_display(&mag));
        }
        for f in &m.factors {
            let mut s = String::new();
            for d in &f.deriv {
                s.push_str(&format!("D[{}] ", show(d)));
            }
            s.push_str(f.kind.name());
            s.push('[');
            s.push_str(&f.body.iter().map(&show).collect::<Vec<_>>().join(","));
            s.push(']');
            parts.push(s);
        }
        out.push_str(&parts.join(" * "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::q_ratio;

    #[test]
    fn parse_contracted_product() {
        let e = parse("D[c] Riem[i,a,b,j] * D[c] Riem[i,b,a,j]").unwrap();
        assert_eq!(e.monomials.len(), 1);
        let m = &e.monomials[0];
        assert_eq!(m.coeff, q_int(1));
        assert_eq!(m.factors.len(), 2);
        assert!(m.free_labels().is_empty());
        // one contracted derivative pair and four contracted body pairs
        let pairs = m.label_counts().values().filter(|&&c| c == 2).count();
        assert_eq!(pairs, 5);
    }

    #[test]
    fn parse_scalar_coefficient() {
        let e = parse("3/2 * Scal[]").unwrap();
        assert_eq!(e.monomials[0].coeff, q_ratio(3, 2));
        assert_eq!(e.monomials[0].factors[0].kind, Kind::Scal);
    }

    #[test]
    fn parse_body_trace_accepted() {
        let e = parse("Riem[a,a,b,j]").unwrap();
        assert_eq!(e.monomials[0].free_labels().len(), 2);
    }

    #[test]
    fn parse_errors() {
        match parse("Riem[a,b]") {
            Err(ExprError::BodyArity { want: 4, got: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse("Ric[a,a] * Ric[a,b]") {
            Err(ExprError::Occurrence(l, 3)) => assert_eq!(l, "a"),
            other => panic!("unexpected {other:?}"),
        }
        match parse("Riem[a,b,c,") {
            Err(ExprError::Syntax { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse("Foo[a]") {
            Err(ExprError::Syntax { pos, .. }) => assert!(pos >= 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn print_forms() {
        assert_eq!(print(&Expression::zero()), "0");
        let e = parse("- Ric[a,b] + 3/2 * Ric[a,b] * Scal[]").unwrap();
        assert_eq!(print(&e), "- Ric[a,b] + 3/2 * Ric[a,b] * Scal[]");
        assert_eq!(parse(&print(&e)).unwrap(), e);
    }

    #[test]
    fn free_label_mismatch_rejected() {
        let a = parse("Ric[a,b]").unwrap().monomials;
        let b = parse("Ric[a,c]").unwrap().monomials;
        let all: Vec<_> = a.into_iter().chain(b).collect();
        assert_eq!(Expression::new(all), Err(ExprError::FreeMismatch));
    }
}
