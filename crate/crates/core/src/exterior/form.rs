use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, BitXor, Mul, Neg, Sub};

use crate::expr::{sum_all, ScalarExpr};

use super::chart::{Chart, Conj};
use super::FormError;

/// Strictly increasing generator indices.
pub type Word = Vec<u16>;

/// An element of the exterior algebra over a chart, homogeneous of one
/// degree, stored as `Σ coeff · g_{i1}∧…∧g_{ik}` with `i1 < … < ik`.
#[derive(Clone)]
pub struct FormExpr {
    chart: Chart,
    degree: usize,
    terms: BTreeMap<Word, ScalarExpr>,
}

impl PartialEq for FormExpr {
    fn eq(&self, other: &Self) -> bool {
        self.chart == other.chart && self.terms == other.terms && (self.degree == other.degree || self.terms.is_empty())
    }
}

/// Sign of the permutation sorting `w`, or `None` if it repeats an index.
pub(crate) fn sort_word(w: &mut [u16]) -> Option<i32> {
    let mut sign = 1;
    for i in 1..w.len() {
        let mut j = i;
        while j > 0 && w[j - 1] > w[j] {
            w.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if w.windows(2).any(|p| p[0] == p[1]) {
        None
    } else {
        Some(sign)
    }
}

/// Concatenation `a∧b` of sorted words, returned sorted with its sign.
fn merge_words(a: &[u16], b: &[u16]) -> Option<(Word, i32)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut sign = 1;
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j] < a[i] {
            if (a.len() - i) % 2 == 1 {
                sign = -sign;
            }
            out.push(b[j]);
            j += 1;
        } else {
            return None;
        }
    }
    Some((out, sign))
}

fn add_term(terms: &mut BTreeMap<Word, ScalarExpr>, w: Word, c: ScalarExpr) {
    if c.is_zero() {
        return;
    }
    match terms.get_mut(&w) {
        Some(existing) => {
            let s = &*existing + &c;
            if s.is_zero() {
                terms.remove(&w);
            } else {
                *existing = s;
            }
        }
        None => {
            terms.insert(w, c);
        }
    }
}

impl FormExpr {
    pub fn zero(chart: &Chart, degree: usize) -> Self {
        FormExpr {
            chart: chart.clone(),
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar(chart: &Chart, s: ScalarExpr) -> Self {
        let mut f = FormExpr::zero(chart, 0);
        add_term(&mut f.terms, Vec::new(), s);
        f
    }

    pub(crate) fn generator(chart: &Chart, index: usize) -> Self {
        let mut f = FormExpr::zero(chart, 1);
        f.terms.insert(vec![index as u16], ScalarExpr::one());
        f
    }

    pub(crate) fn from_terms(chart: &Chart, degree: usize, terms: BTreeMap<Word, ScalarExpr>) -> Self {
        FormExpr {
            chart: chart.clone(),
            degree,
            terms,
        }
    }

    pub(crate) fn into_terms(self) -> BTreeMap<Word, ScalarExpr> {
        self.terms
    }

    /// Builds a form from generator-name words in any order; reordering
    /// signs are applied.
    pub fn from_named_terms(chart: &Chart, degree: usize, terms: &[(&[&str], ScalarExpr)]) -> Result<Self, FormError> {
        let mut f = FormExpr::zero(chart, degree);
        for (names, c) in terms {
            let (w, sign) = chart_word(chart, names)?;
            if names.len() != degree {
                return Err(FormError::Degree {
                    expected: degree,
                    found: names.len(),
                });
            }
            let Some(sign) = sign else { continue };
            let c = if sign < 0 { -c } else { c.clone() };
            add_term(&mut f.terms, w, c);
        }
        Ok(f)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Every coefficient passes the exact zero decision.
    pub fn is_zero_exact(&self) -> bool {
        self.terms.values().all(ScalarExpr::is_zero_exact)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &ScalarExpr)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    fn check_same(&self, other: &FormExpr) -> Result<(), FormError> {
        if self.chart != other.chart {
            return Err(FormError::ChartMismatch);
        }
        Ok(())
    }

    pub fn try_add(&self, other: &FormExpr) -> Result<FormExpr, FormError> {
        self.check_same(other)?;
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(other.clone());
        }
        if self.degree != other.degree {
            return Err(FormError::Degree {
                expected: self.degree,
                found: other.degree,
            });
        }
        let mut terms = self.terms.clone();
        for (w, c) in &other.terms {
            add_term(&mut terms, w.clone(), c.clone());
        }
        Ok(FormExpr::from_terms(&self.chart, self.degree, terms))
    }

    pub fn scale(&self, s: &ScalarExpr) -> FormExpr {
        if s.is_zero() {
            return FormExpr::zero(&self.chart, self.degree);
        }
        let mut terms = BTreeMap::new();
        for (w, c) in &self.terms {
            add_term(&mut terms, w.clone(), c * s);
        }
        FormExpr::from_terms(&self.chart, self.degree, terms)
    }

    pub fn wedge(&self, other: &FormExpr) -> Result<FormExpr, FormError> {
        self.check_same(other)?;
        let mut acc: BTreeMap<Word, Vec<ScalarExpr>> = BTreeMap::new();
        for (wa, ca) in &self.terms {
            for (wb, cb) in &other.terms {
                if let Some((w, sign)) = merge_words(wa, wb) {
                    let c = ca * cb;
                    acc.entry(w).or_default().push(if sign < 0 { -c } else { c });
                }
            }
        }
        let mut terms = BTreeMap::new();
        for (w, cs) in acc {
            add_term(&mut terms, w, sum_all(cs));
        }
        Ok(FormExpr::from_terms(&self.chart, self.degree + other.degree, terms))
    }

    /// Exterior derivative from the chart's rules (graded Leibniz rule).
    pub fn d(&self) -> Result<FormExpr, FormError> {
        let rules = self
            .chart
            .rules()
            .ok_or_else(|| FormError::MissingRule(format!("chart {} has no rules", self.chart.name())))?;
        let gens = self.chart.generators();
        let mut acc: BTreeMap<Word, Vec<ScalarExpr>> = BTreeMap::new();
        let mut push = |w: Word, c: ScalarExpr, sign: i32| {
            if !c.is_zero() {
                acc.entry(w).or_default().push(if sign < 0 { -c } else { c });
            }
        };
        for (word, coeff) in &self.terms {
            for v in coeff.variables() {
                let rule = rules
                    .vars
                    .get(v.as_ref())
                    .ok_or_else(|| FormError::MissingRule(format!("variable {v}")))?;
                let dc = coeff.differentiate(v);
                if dc.is_zero() {
                    continue;
                }
                for (rw, rc) in rule {
                    if let Some((w, sign)) = merge_words(rw, word) {
                        push(w, &dc * rc, sign);
                    }
                }
            }
            for (pos, &g) in word.iter().enumerate() {
                let rule = rules.gens[g as usize]
                    .as_ref()
                    .ok_or_else(|| FormError::MissingRule(format!("generator {}", gens[g as usize].name)))?;
                let before = &word[..pos];
                let after = &word[pos + 1..];
                let outer = if pos % 2 == 1 { -1 } else { 1 };
                for (rw, rc) in rule {
                    let Some((w1, s1)) = merge_words(before, rw) else {
                        continue;
                    };
                    let Some((w2, s2)) = merge_words(&w1, after) else {
                        continue;
                    };
                    push(w2, coeff * rc, outer * s1 * s2);
                }
            }
        }
        let mut terms = BTreeMap::new();
        for (w, cs) in acc {
            add_term(&mut terms, w, sum_all(cs));
        }
        Ok(FormExpr::from_terms(&self.chart, self.degree + 1, terms))
    }

    /// Coefficient of the named word, read with the sign that makes
    /// `coefficient(x·a∧b, [a, b]) = x` regardless of chart order.
    pub fn coefficient(&self, word: &[&str]) -> Result<ScalarExpr, FormError> {
        if word.len() != self.degree {
            return Err(FormError::MalformedWord(format!(
                "word of length {} for a form of degree {}",
                word.len(),
                self.degree
            )));
        }
        for name in word {
            if let Some(i) = self.chart.generator_index(name) {
                if matches!(self.chart.generators()[i].conj, Conj::Auxiliary) {
                    return Err(FormError::Auxiliary(name.to_string()));
                }
            }
        }
        let (w, sign) = chart_word(&self.chart, word)?;
        let sign = sign.ok_or_else(|| FormError::MalformedWord(format!("repeated generator in {word:?}")))?;
        let c = self.terms.get(&w).cloned().unwrap_or_else(ScalarExpr::zero);
        Ok(if sign < 0 { -c } else { c })
    }

    /// Drops every term containing one of the named generators.
    pub fn reduce_mod(&self, ideal: &[&str]) -> Result<FormExpr, FormError> {
        let mut idx = Vec::new();
        for name in ideal {
            idx.push(
                self.chart
                    .generator_index(name)
                    .ok_or_else(|| FormError::UnknownGenerator(name.to_string()))? as u16,
            );
        }
        let terms = self
            .terms
            .iter()
            .filter(|(w, _)| !w.iter().any(|g| idx.contains(g)))
            .map(|(w, c)| (w.clone(), c.clone()))
            .collect();
        Ok(FormExpr::from_terms(&self.chart, self.degree, terms))
    }

    /// Generator-wise conjugation with conjugated coefficients.
    pub fn conjugate_form(&self) -> Result<FormExpr, FormError> {
        let gens = self.chart.generators();
        let mut terms = BTreeMap::new();
        for (w, c) in &self.terms {
            let mut sign = 1;
            let mut img = Vec::with_capacity(w.len());
            for &g in w {
                match gens[g as usize].conj {
                    Conj::SelfConj(s) => {
                        sign *= s as i32;
                        img.push(g);
                    }
                    Conj::Pair(j) => img.push(j as u16),
                    Conj::Auxiliary => return Err(FormError::Auxiliary(gens[g as usize].name.clone())),
                }
            }
            let s = sort_word(&mut img).expect("conjugation is a bijection on generators");
            let cc = c.conjugate();
            add_term(&mut terms, img, if sign * s < 0 { -cc } else { cc });
        }
        Ok(FormExpr::from_terms(&self.chart, self.degree, terms))
    }

    /// Applies `f` to every coefficient.
    pub fn map_coeffs(&self, f: impl Fn(&ScalarExpr) -> ScalarExpr) -> FormExpr {
        let mut terms = BTreeMap::new();
        for (w, c) in &self.terms {
            add_term(&mut terms, w.clone(), f(c));
        }
        FormExpr::from_terms(&self.chart, self.degree, terms)
    }

    /// Substitutes scalars in every coefficient (reality tags enforced).
    pub fn substitute(&self, bindings: &BTreeMap<String, ScalarExpr>) -> Result<FormExpr, FormError> {
        let mut terms = BTreeMap::new();
        for (w, c) in &self.terms {
            add_term(&mut terms, w.clone(), c.substitute(bindings)?);
        }
        Ok(FormExpr::from_terms(&self.chart, self.degree, terms))
    }

    /// Substitutes scalars without reality checks.
    pub fn substitute_unchecked(&self, bindings: &BTreeMap<String, ScalarExpr>) -> FormExpr {
        self.map_coeffs(|c| c.substitute_unchecked(bindings))
    }

    /// Rewrites into `target` by sending each generator to a 1-form of
    /// `target`; coefficients go through `scalars` when given.
    pub fn rewrite_basis(
        &self,
        target: &Chart,
        sub: &HashMap<String, FormExpr>,
        scalars: Option<&BTreeMap<String, ScalarExpr>>,
    ) -> Result<FormExpr, FormError> {
        let gens = self.chart.generators();
        let mut images: HashMap<u16, FormExpr> = HashMap::new();
        let mut acc: BTreeMap<Word, Vec<ScalarExpr>> = BTreeMap::new();
        for (w, c) in &self.terms {
            let mut prod = FormExpr::scalar(target, ScalarExpr::one());
            for &g in w {
                if let std::collections::hash_map::Entry::Vacant(e) = images.entry(g) {
                    let name = &gens[g as usize].name;
                    let img = sub.get(name).ok_or_else(|| FormError::Incomplete(name.clone()))?;
                    if img.chart != *target {
                        return Err(FormError::ChartMismatch);
                    }
                    if img.degree != 1 && !img.is_zero() {
                        return Err(FormError::Degree {
                            expected: 1,
                            found: img.degree,
                        });
                    }
                    e.insert(img.clone());
                }
                prod = prod.wedge(&images[&g])?;
            }
            let c = match scalars {
                Some(b) => c.substitute_unchecked(b),
                None => c.clone(),
            };
            for (pw, pc) in prod.terms {
                acc.entry(pw).or_default().push(&pc * &c);
            }
        }
        let mut terms = BTreeMap::new();
        for (w, cs) in acc {
            add_term(&mut terms, w, sum_all(cs));
        }
        Ok(FormExpr::from_terms(target, self.degree, terms))
    }

    /// Names of the generators in a word.
    pub fn word_names(&self, w: &Word) -> Vec<String> {
        let gens = self.chart.generators();
        w.iter().map(|&g| gens[g as usize].name.clone()).collect()
    }
}

/// Maps names to a sorted word plus the sorting sign (`None` if repeated).
fn chart_word(chart: &Chart, names: &[&str]) -> Result<(Word, Option<i32>), FormError> {
    let mut w = Vec::with_capacity(names.len());
    for name in names {
        let i = chart
            .generator_index(name)
            .ok_or_else(|| FormError::UnknownGenerator(name.to_string()))?;
        w.push(i as u16);
    }
    let sign = sort_word(&mut w);
    Ok((w, sign))
}

impl fmt::Display for FormExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (w, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if w.is_empty() {
                write!(f, "({c})")?;
            } else {
                write!(f, "({c})*{}", self.word_names(w).join("/\\"))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for FormExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FormExpr[deg {}]({self})", self.degree)
    }
}

impl Add for &FormExpr {
    type Output = FormExpr;
    fn add(self, rhs: &FormExpr) -> FormExpr {
        self.try_add(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}
impl Add for FormExpr {
    type Output = FormExpr;
    fn add(self, rhs: FormExpr) -> FormExpr {
        &self + &rhs
    }
}
impl Sub for &FormExpr {
    type Output = FormExpr;
    fn sub(self, rhs: &FormExpr) -> FormExpr {
        self + &(-rhs)
    }
}
impl Sub for FormExpr {
    type Output = FormExpr;
    fn sub(self, rhs: FormExpr) -> FormExpr {
        &self - &rhs
    }
}
impl Neg for &FormExpr {
    type Output = FormExpr;
    fn neg(self) -> FormExpr {
        self.map_coeffs(|c| -c)
    }
}
impl Neg for FormExpr {
    type Output = FormExpr;
    fn neg(self) -> FormExpr {
        -&self
    }
}
impl Mul<&ScalarExpr> for &FormExpr {
    type Output = FormExpr;
    fn mul(self, rhs: &ScalarExpr) -> FormExpr {
        self.scale(rhs)
    }
}
impl Mul<&FormExpr> for &ScalarExpr {
    type Output = FormExpr;
    fn mul(self, rhs: &FormExpr) -> FormExpr {
        rhs.scale(self)
    }
}
impl Mul<FormExpr> for ScalarExpr {
    type Output = FormExpr;
    fn mul(self, rhs: FormExpr) -> FormExpr {
        rhs.scale(&self)
    }
}
/// `a ^ b` is the wedge product; panics on chart mismatch.
impl BitXor for &FormExpr {
    type Output = FormExpr;
    fn bitxor(self, rhs: &FormExpr) -> FormExpr {
        self.wedge(rhs).unwrap_or_else(|e| panic!("{e}"))
    }
}
impl BitXor for FormExpr {
    type Output = FormExpr;
    fn bitxor(self, rhs: FormExpr) -> FormExpr {
        &self ^ &rhs
    }
}
