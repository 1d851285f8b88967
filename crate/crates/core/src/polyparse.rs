//! Text format for polynomials.
//!
//! ```text
//! poly   := ['+'|'-'] term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := ['+'|'-'] number | '(' number ',' number ')' | var ['^' int | '^*']
//! var    := 'z' int | 'w' int
//! ```
//!
//! `z_i` are letters of the first tuple and `w_j` of the second; `^*`
//! marks an adjoint. In Hermitian polynomials each term must read
//! `z.. w.. w^*.. z^*..` in that order.

use crate::bipoly::{BiPolynomial, HermitianBiPolynomial};
use crate::error::{Error, Result};
use crate::scalar::{cx, C};
use crate::variety::NcPolynomial;
use crate::words::Word;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Var {
    Z,
    W,
}

#[derive(Clone, Debug)]
struct Factor {
    var: Var,
    letter: usize,
    adjoint: bool,
}

#[derive(Clone, Debug)]
struct Term {
    coeff: C<f64>,
    factors: Vec<Factor>,
    column: usize,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { line: 1, column: self.pos + 1, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
            self.pos += 1;
        }
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let exp_sign = matches!(c, b'+' | b'-') && matches!(self.src[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let v: f64 = text.parse().map_err(|_| {
            let mut e = self.err(format!("expected a number, found '{text}'"));
            if let Error::Parse { column, .. } = &mut e {
                *column = start + 1;
            }
            e
        })?;
        if !v.is_finite() {
            return Err(self.err("coefficients must be finite"));
        }
        Ok(v)
    }

    fn integer(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .expect("ascii")
            .parse()
            .map_err(|_| self.err("integer out of range"))
    }
}

fn parse_terms(text: &str) -> Result<Vec<Term>> {
    let mut lx = Lexer { src: text.as_bytes(), pos: 0 };
    let mut terms = Vec::new();
    if lx.peek().is_none() {
        return Err(lx.err("empty polynomial"));
    }
    let mut sign = 1.0;
    if lx.eat(b'-') {
        sign = -1.0;
    } else {
        lx.eat(b'+');
    }
    loop {
        let column = lx.pos + 1;
        let mut coeff = cx(sign);
        let mut factors = Vec::new();
        loop {
            match lx.peek() {
                Some(b'(') => {
                    lx.pos += 1;
                    let re = lx.number()?;
                    if !lx.eat(b',') {
                        return Err(lx.err("expected ',' in complex coefficient"));
                    }
                    let im = lx.number()?;
                    if !lx.eat(b')') {
                        return Err(lx.err("expected ')'"));
                    }
                    coeff *= C::new(re, im);
                }
                Some(c) if c.is_ascii_digit() || matches!(c, b'.' | b'+' | b'-') => coeff *= cx(lx.number()?),
                Some(c @ (b'z' | b'w')) => {
                    lx.pos += 1;
                    let var = if c == b'z' { Var::Z } else { Var::W };
                    let letter = lx.integer()?;
                    if letter == 0 {
                        return Err(lx.err("letters are numbered from 1"));
                    }
                    let mut power = 1;
                    let mut adjoint = false;
                    if lx.eat(b'^') {
                        if lx.eat(b'*') {
                            adjoint = true;
                        } else {
                            power = lx.integer()?;
                        }
                    }
                    for _ in 0..power {
                        factors.push(Factor { var, letter, adjoint });
                    }
                }
                Some(other) => return Err(lx.err(format!("unexpected '{}'", other as char))),
                None => return Err(lx.err("unexpected end of input")),
            }
            if !lx.eat(b'*') {
                break;
            }
        }
        terms.push(Term { coeff, factors, column });
        match lx.peek() {
            None => break,
            Some(b'+') => {
                lx.pos += 1;
                sign = 1.0;
            }
            Some(b'-') => {
                lx.pos += 1;
                sign = -1.0;
            }
            Some(other) => return Err(lx.err(format!("unexpected '{}'", other as char))),
        }
    }
    Ok(terms)
}

fn term_err(t: &Term, message: &str) -> Error {
    Error::Parse { line: 1, column: t.column, message: message.into() }
}

fn max_letter(terms: &[Term], var: Var) -> usize {
    terms.iter().flat_map(|t| &t.factors).filter(|f| f.var == var).map(|f| f.letter).max().unwrap_or(1)
}

/// Parses a polynomial in commuting `z` and `w` letters. Alphabet sizes are
/// the largest letters used (at least one).
pub fn parse_bipoly(text: &str) -> Result<BiPolynomial<f64>> {
    let terms = parse_terms(text)?;
    let mut out = Vec::new();
    for t in &terms {
        if t.factors.iter().any(|f| f.adjoint) {
            return Err(term_err(t, "adjoints are only allowed in Hermitian polynomials"));
        }
        let z: Vec<usize> = t.factors.iter().filter(|f| f.var == Var::Z).map(|f| f.letter).collect();
        let w: Vec<usize> = t.factors.iter().filter(|f| f.var == Var::W).map(|f| f.letter).collect();
        out.push((Word::from_letters(&z), Word::from_letters(&w), t.coeff));
    }
    BiPolynomial::new(max_letter(&terms, Var::Z), max_letter(&terms, Var::W), out)
}

/// Parses `Σ c z_α w_β (w_σ)* (z_γ)*` written as `z.. w.. w^*.. z^*..`.
pub fn parse_hermitian(text: &str) -> Result<HermitianBiPolynomial<f64>> {
    let terms = parse_terms(text)?;
    let mut out = Vec::new();
    for t in &terms {
        let mut parts: [Vec<usize>; 4] = Default::default();
        let mut phase = 0;
        for f in &t.factors {
            let p = match (f.var, f.adjoint) {
                (Var::Z, false) => 0,
                (Var::W, false) => 1,
                (Var::W, true) => 2,
                (Var::Z, true) => 3,
            };
            if p < phase {
                return Err(term_err(t, "factors must appear as z.. w.. w^*.. z^*.."));
            }
            phase = p;
            parts[p].push(f.letter);
        }
        // (Z'_σ)* = Z'^*_{σ_k} ⋯ Z'^*_{σ_1}, so adjoint factors read right to left
        parts[2].reverse();
        parts[3].reverse();
        let words = [
            Word::from_letters(&parts[0]),
            Word::from_letters(&parts[1]),
            Word::from_letters(&parts[2]),
            Word::from_letters(&parts[3]),
        ];
        out.push((words, t.coeff));
    }
    HermitianBiPolynomial::new(max_letter(&terms, Var::Z), max_letter(&terms, Var::W), out)
}

/// Parses a noncommutative polynomial in `z` letters over `n` letters.
pub fn parse_ncpoly(text: &str, n: usize) -> Result<NcPolynomial<f64>> {
    let terms = parse_terms(text)?;
    let mut out = Vec::new();
    for t in &terms {
        if t.factors.iter().any(|f| f.var == Var::W || f.adjoint) {
            return Err(term_err(t, "generators use z letters only"));
        }
        if t.factors.iter().any(|f| f.letter > n) {
            return Err(term_err(t, "letter exceeds the number of indeterminates"));
        }
        out.push((Word::from_letters(&t.factors.iter().map(|f| f.letter).collect::<Vec<_>>()), t.coeff));
    }
    NcPolynomial::new(n, out)
}
