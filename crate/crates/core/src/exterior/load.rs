//! Declarative chart files and the form expression grammar.
//!
//! A chart file is a list of lines (`#` starts a comment):
//!
//! ```text
//! chart NAME
//! var NAME real|imaginary|positive|unit
//! var NAME complex PARTNER
//! placeholder NAME...
//! gen NAME real|imag|aux
//! gen NAME pair PARTNER
//! d GEN = FORM
//! dvar VAR = FORM
//! ```
//!
//! Forms use the scalar grammar with `/\` for the wedge product; `*`
//! multiplies a form by a scalar. Rules of paired generators and paired
//! variables that are left out are obtained by conjugating the partner's.

use std::collections::BTreeMap;

use crate::expr::{parse_with, Algebra, Coeff, Exponent, ExprError, ScalarExpr, Variable};

use super::{Chart, ChartBuilder, FormError, FormExpr};

/// Forms over a chart as a parse target.
pub struct FormAlgebra<'a>(pub &'a Chart);

fn syntax(offset: usize, message: &str) -> ExprError {
    ExprError::Syntax {
        offset,
        message: message.to_string(),
    }
}

fn as_scalar(f: &FormExpr) -> Option<ScalarExpr> {
    if f.is_zero() {
        return Some(ScalarExpr::zero());
    }
    if f.degree() != 0 {
        return None;
    }
    f.terms().next().map(|(_, c)| c.clone())
}

impl Algebra for FormAlgebra<'_> {
    type Value = FormExpr;
    fn constant(&self, c: Coeff) -> FormExpr {
        FormExpr::scalar(self.0, ScalarExpr::constant(c))
    }
    fn ident(&self, name: &str, _: usize) -> Result<FormExpr, ExprError> {
        if let Ok(g) = self.0.gen(name) {
            return Ok(g);
        }
        match self.0.var(name) {
            Ok(v) => Ok(FormExpr::scalar(self.0, v)),
            Err(_) => Err(ExprError::Undeclared(name.to_string())),
        }
    }
    fn add(&self, a: FormExpr, b: FormExpr, offset: usize) -> Result<FormExpr, ExprError> {
        a.try_add(&b).map_err(|e| syntax(offset, &e.to_string()))
    }
    fn neg(&self, a: FormExpr) -> FormExpr {
        -a
    }
    fn mul(&self, a: FormExpr, b: FormExpr, offset: usize) -> Result<FormExpr, ExprError> {
        if let Some(s) = as_scalar(&a) {
            return Ok(b.scale(&s));
        }
        if let Some(s) = as_scalar(&b) {
            return Ok(a.scale(&s));
        }
        Err(syntax(offset, "use /\\ to multiply two forms of positive degree"))
    }
    fn div(&self, a: FormExpr, b: FormExpr, offset: usize) -> Result<FormExpr, ExprError> {
        let s = as_scalar(&b).ok_or_else(|| syntax(offset, "cannot divide by a form"))?;
        if s.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        Ok(a.scale(&s.recip()))
    }
    fn pow(&self, a: FormExpr, e: Exponent, offset: usize) -> Result<FormExpr, ExprError> {
        let s = as_scalar(&a).ok_or_else(|| syntax(offset, "cannot raise a form to a power"))?;
        Ok(FormExpr::scalar(self.0, s.pow(e)))
    }
    fn wedge(&self, a: FormExpr, b: FormExpr, offset: usize) -> Result<FormExpr, ExprError> {
        a.wedge(&b).map_err(|e| syntax(offset, &e.to_string()))
    }
}

/// Parses a form over `chart`.
pub fn parse_form(text: &str, chart: &Chart) -> Result<FormExpr, FormError> {
    Ok(parse_with(text, &FormAlgebra(chart))?)
}

/// Builds a chart (with rules) from its text description.
pub fn load_chart(text: &str) -> Result<Chart, FormError> {
    load(text, true)
}

/// Like [`load_chart`] but skips the d∘d = 0 check.
pub fn load_chart_unchecked(text: &str) -> Result<Chart, FormError> {
    load(text, false)
}

fn load(text: &str, check: bool) -> Result<Chart, FormError> {
    let mut builder = ChartBuilder::new("chart");
    let mut rules: Vec<(usize, bool, String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| FormError::Load { line: line_no, message };
        let words: Vec<&str> = line.split_whitespace().collect();
        match words[0] {
            "chart" if words.len() == 2 => builder = builder.rename(words[1]),
            "var" => {
                builder = match words[1..] {
                    [name, "real"] => builder.var(Variable::real(name)),
                    [name, "imaginary"] => builder.var(Variable::imaginary(name)),
                    [name, "positive"] => builder.var(Variable::positive(name)),
                    [name, "unit"] => builder.var(Variable::unit(name)),
                    [name, "complex", partner] => builder.pair_var(name, partner),
                    _ => return Err(err(format!("bad variable declaration `{line}`"))),
                }
                .map_err(|e| err(e.to_string()))?
            }
            "placeholder" => {
                for name in &words[1..] {
                    builder = builder.placeholder(name);
                }
            }
            "gen" => {
                builder = match words[1..] {
                    [name, "real"] => builder.real_gen(name),
                    [name, "imag"] => builder.imag_gen(name),
                    [name, "aux"] => builder.aux_gen(name),
                    [name, "pair", partner] => builder.pair_gen(name, partner),
                    _ => return Err(err(format!("bad generator declaration `{line}`"))),
                }
            }
            "d" | "dvar" => {
                let (lhs, rhs) = line[words[0].len()..]
                    .split_once('=')
                    .ok_or_else(|| err("expected `=`".into()))?;
                rules.push((
                    line_no,
                    words[0] == "dvar",
                    lhs.trim().to_string(),
                    rhs.trim().to_string(),
                ));
            }
            other => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    let chart = builder.finish()?;
    let mut gen_rules = BTreeMap::new();
    let mut var_rules = BTreeMap::new();
    for (line, is_var, lhs, rhs) in rules {
        let form = parse_form(&rhs, &chart).map_err(|e| FormError::Load {
            line,
            message: e.to_string(),
        })?;
        let target = if is_var { &mut var_rules } else { &mut gen_rules };
        if target.insert(lhs.clone(), form).is_some() {
            return Err(FormError::Load {
                line,
                message: format!("second rule for `{lhs}`"),
            });
        }
    }
    if check {
        chart.install_rules(gen_rules, var_rules)?;
    } else {
        chart.install_rules_unchecked(gen_rules, var_rules)?;
    }
    Ok(chart)
}
