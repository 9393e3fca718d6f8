//! Recursive-descent parser for the expression grammar.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/" | "/\") unary)*
//! unary   := "-" unary | power
//! power   := primary ("^" exponent)?
//! primary := number | "i" | ident | "sqrt" "(" sum ")" | "(" sum ")"
//! ```
//!
//! Exponents are constant rational expressions; `^` is right-associative.
//! The same parser drives scalar expressions and differential forms
//! through the [`Algebra`] trait.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::coeff::Coeff;
use super::scalar::{Exponent, ScalarExpr};
use super::variable::VariableTable;
use super::ExprError;

/// Target of a parse: how literals, identifiers and operators combine.
pub trait Algebra {
    type Value;
    fn constant(&self, c: Coeff) -> Self::Value;
    fn ident(&self, name: &str, offset: usize) -> Result<Self::Value, ExprError>;
    fn add(&self, a: Self::Value, b: Self::Value, offset: usize) -> Result<Self::Value, ExprError>;
    fn neg(&self, a: Self::Value) -> Self::Value;
    fn mul(&self, a: Self::Value, b: Self::Value, offset: usize) -> Result<Self::Value, ExprError>;
    fn div(&self, a: Self::Value, b: Self::Value, offset: usize) -> Result<Self::Value, ExprError>;
    fn pow(&self, a: Self::Value, e: Exponent, offset: usize) -> Result<Self::Value, ExprError>;
    fn wedge(&self, _a: Self::Value, _b: Self::Value, offset: usize) -> Result<Self::Value, ExprError> {
        Err(ExprError::Syntax {
            offset,
            message: "wedge product is not allowed here".into(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Wedge,
    Caret,
    LParen,
    RParen,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'/' if bytes.get(i + 1) == Some(&b'\\') => {
                i += 1;
                Tok::Wedge
            }
            b'/' => Tok::Slash,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let int_part = &text[start..i];
                let mut frac_part = "";
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let fs = i;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                    frac_part = &text[fs..i];
                }
                if int_part.is_empty() && frac_part.is_empty() {
                    return Err(ExprError::Syntax {
                        offset: start,
                        message: "malformed number".into(),
                    });
                }
                let digits = format!("{int_part}{frac_part}");
                let numer: BigInt = digits.parse().expect("digits only");
                let denom = num_traits::pow(BigInt::from(10), frac_part.len());
                out.push((Tok::Num(BigRational::new(numer, denom)), start));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{}`", text[start..].chars().next().unwrap()),
                })
            }
        };
        i += 1;
        out.push((tok, start));
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a, A: Algebra> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    alg: &'a A,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(n) => format!("number {n}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::End => "end of input".into(),
        other => format!(
            "`{}`",
            match other {
                Tok::Plus => "+",
                Tok::Minus => "-",
                Tok::Star => "*",
                Tok::Slash => "/",
                Tok::Wedge => "/\\",
                Tok::Caret => "^",
                Tok::LParen => "(",
                Tok::RParen => ")",
                _ => unreachable!(),
            }
        ),
    }
}

impl<A: Algebra> Parser<'_, A> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: String) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.offset(),
            message,
        })
    }

    fn expect(&mut self, t: Tok) -> Result<(), ExprError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {}, found {}", describe(&t), describe(self.peek())))
        }
    }

    fn sum(&mut self) -> Result<A::Value, ExprError> {
        let mut acc = self.product()?;
        loop {
            let at = self.offset();
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.product()?;
                    acc = self.alg.add(acc, rhs, at)?;
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.product()?;
                    acc = self.alg.add(acc, self.alg.neg(rhs), at)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<A::Value, ExprError> {
        let mut acc = self.unary()?;
        loop {
            let at = self.offset();
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = self.alg.mul(acc, rhs, at)?;
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = self.alg.div(acc, rhs, at)?;
                }
                Tok::Wedge => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = self.alg.wedge(acc, rhs, at)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<A::Value, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let v = self.unary()?;
            return Ok(self.alg.neg(v));
        }
        self.power()
    }

    fn power(&mut self) -> Result<A::Value, ExprError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            let at = self.offset();
            self.bump();
            let e = self.exponent()?;
            return self.alg.pow(base, e, at);
        }
        Ok(base)
    }

    /// A constant rational exponent, itself allowing `-` and nested `^`.
    fn exponent(&mut self) -> Result<Exponent, ExprError> {
        let at = self.offset();
        let mut sub = Parser {
            toks: std::mem::take(&mut self.toks),
            pos: self.pos,
            alg: &ConstAlgebra,
        };
        let value = sub.unary();
        self.toks = sub.toks;
        self.pos = sub.pos;
        let value = value?;
        to_exponent(&value).ok_or(ExprError::Syntax {
            offset: at,
            message: "exponent must be a real rational constant".into(),
        })
    }

    fn primary(&mut self) -> Result<A::Value, ExprError> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Num(n) => Ok(self.alg.constant(Coeff::real(n))),
            Tok::Ident(name) if name == "i" => Ok(self.alg.constant(Coeff::i())),
            Tok::Ident(name) if name == "sqrt" => {
                self.expect(Tok::LParen)?;
                let inner = self.sum()?;
                self.expect(Tok::RParen)?;
                self.alg.pow(inner, Exponent::new(1, 2), at)
            }
            Tok::Ident(name) => self.alg.ident(&name, at),
            Tok::LParen => {
                let inner = self.sum()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            other => {
                self.pos -= usize::from(other != Tok::End);
                Err(ExprError::Syntax {
                    offset: at,
                    message: format!("expected an operand, found {}", describe(&other)),
                })
            }
        }
    }
}

fn to_exponent(c: &Coeff) -> Option<Exponent> {
    if !c.im.is_zero() {
        return None;
    }
    Some(Exponent::new(c.re.numer().to_i64()?, c.re.denom().to_i64()?))
}

/// Exact constants, used for exponents.
struct ConstAlgebra;

fn const_err(offset: usize, what: &str) -> ExprError {
    ExprError::Syntax {
        offset,
        message: what.into(),
    }
}

impl Algebra for ConstAlgebra {
    type Value = Coeff;
    fn constant(&self, c: Coeff) -> Coeff {
        c
    }
    fn ident(&self, name: &str, offset: usize) -> Result<Coeff, ExprError> {
        Err(const_err(offset, &format!("exponent must be constant, found `{name}`")))
    }
    fn add(&self, a: Coeff, b: Coeff, _: usize) -> Result<Coeff, ExprError> {
        Ok(&a + &b)
    }
    fn neg(&self, a: Coeff) -> Coeff {
        -&a
    }
    fn mul(&self, a: Coeff, b: Coeff, _: usize) -> Result<Coeff, ExprError> {
        Ok(&a * &b)
    }
    fn div(&self, a: Coeff, b: Coeff, offset: usize) -> Result<Coeff, ExprError> {
        a.div(&b)
            .ok_or_else(|| const_err(offset, "division by zero in exponent"))
    }
    fn pow(&self, a: Coeff, e: Exponent, offset: usize) -> Result<Coeff, ExprError> {
        if !e.is_integer() {
            return Err(const_err(offset, "fractional power inside an exponent"));
        }
        a.pow_int(e.to_integer())
            .ok_or_else(|| const_err(offset, "division by zero in exponent"))
    }
}

/// Scalar expressions over a variable table.
pub struct ScalarAlgebra<'a>(pub &'a VariableTable);

impl Algebra for ScalarAlgebra<'_> {
    type Value = ScalarExpr;
    fn constant(&self, c: Coeff) -> ScalarExpr {
        ScalarExpr::constant(c)
    }
    fn ident(&self, name: &str, _: usize) -> Result<ScalarExpr, ExprError> {
        self.0
            .get(name)
            .map(ScalarExpr::var)
            .ok_or_else(|| ExprError::Undeclared(name.to_string()))
    }
    fn add(&self, a: ScalarExpr, b: ScalarExpr, _: usize) -> Result<ScalarExpr, ExprError> {
        Ok(a + b)
    }
    fn neg(&self, a: ScalarExpr) -> ScalarExpr {
        -a
    }
    fn mul(&self, a: ScalarExpr, b: ScalarExpr, _: usize) -> Result<ScalarExpr, ExprError> {
        Ok(a * b)
    }
    fn div(&self, a: ScalarExpr, b: ScalarExpr, _: usize) -> Result<ScalarExpr, ExprError> {
        if b.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        Ok(a / b)
    }
    fn pow(&self, a: ScalarExpr, e: Exponent, _: usize) -> Result<ScalarExpr, ExprError> {
        if a.is_zero() && e < Exponent::zero() {
            return Err(ExprError::DivisionByZero);
        }
        Ok(a.pow(e))
    }
}

/// Parses `text` with an arbitrary algebra.
pub fn parse_with<A: Algebra>(text: &str, alg: &A) -> Result<A::Value, ExprError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, alg };
    let v = p.sum()?;
    if *p.peek() != Tok::End {
        return p.error(format!("unexpected {}", describe(p.peek())));
    }
    Ok(v)
}

/// Parses a scalar expression; every identifier must be declared in `table`.
pub fn parse(text: &str, table: &VariableTable) -> Result<ScalarExpr, ExprError> {
    parse_with(text, &ScalarAlgebra(table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Variable;

    fn table() -> VariableTable {
        let mut t = VariableTable::new();
        t.declare(Variable::real("t1")).unwrap();
        t.declare(Variable::real("t2")).unwrap();
        t
    }

    #[test]
    fn quotient_simplifies() {
        let t = table();
        assert_eq!(parse("t2*(t1/t2)^2", &t).unwrap(), parse("t1^2/t2", &t).unwrap());
    }

    #[test]
    fn trailing_operator_offset() {
        let err = parse("t1 +", &table()).unwrap_err();
        assert_eq!(
            err,
            ExprError::Syntax {
                offset: 4,
                message: "expected an operand, found end of input".into()
            }
        );
    }

    #[test]
    fn undeclared_identifier() {
        assert_eq!(
            parse("t3*t1", &table()).unwrap_err(),
            ExprError::Undeclared("t3".into())
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let t = table();
        assert_eq!(parse("-t1^2", &t).unwrap(), -(parse("t1*t1", &t).unwrap()));
        assert_eq!(parse("2^3^2", &t).unwrap(), ScalarExpr::int(512));
        assert_eq!(parse("t1^-2", &t).unwrap(), parse("1/(t1*t1)", &t).unwrap());
        assert_eq!(parse("0.25", &t).unwrap(), ScalarExpr::ratio(1, 4));
        assert_eq!(parse("sqrt(4)", &t).unwrap(), ScalarExpr::int(2));
    }

    #[test]
    fn reference_form_reparses() {
        let t = table();
        let e = parse("((1-12*t1*t2)^(3/2)+18*t1*t2-1)/(108*t2^2) + i*t1/3", &t).unwrap();
        assert_eq!(parse(&e.to_string(), &t).unwrap(), e);
    }
}
