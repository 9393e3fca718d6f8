//! Canonical scalar expressions.
//!
//! Every [`ScalarExpr`] is kept as a sum of monomials with exact
//! Gaussian-rational coefficients. A monomial is a product of atoms raised
//! to rational exponents; an atom is either a declared variable or an opaque
//! base `P` (a non-monomial sum, or a constant that has no exact root).
//! Bases carry the single rewrite `P^(n + f) = P^n · P^f` for integer
//! `n >= 1`, which expands `P^n` back into the sum. Constant roots are split
//! into prime factors so that e.g. `sqrt(2)·sqrt(1/2)` collapses to `1`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};

use super::coeff::Coeff;
use super::variable::{Reality, Variable};
use super::ExprError;

pub type Exponent = Rational64;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Var(Variable),
    Base(ScalarExpr),
}

/// Product of atoms with non-zero exponents, sorted by atom.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<(Atom, Exponent)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(Atom, Exponent)] {
        &self.0
    }

    fn exponent_of(&self, atom: &Atom) -> Option<Exponent> {
        self.0.binary_search_by(|(a, _)| a.cmp(atom)).ok().map(|i| self.0[i].1)
    }
}

struct Node {
    terms: BTreeMap<Monomial, Coeff>,
    vars: BTreeSet<Arc<str>>,
}

/// An immutable scalar expression in canonical form.
#[derive(Clone)]
pub struct ScalarExpr(Arc<Node>);

impl PartialEq for ScalarExpr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.terms == other.0.terms
    }
}
impl Eq for ScalarExpr {}

impl PartialOrd for ScalarExpr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ScalarExpr {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.0.terms.cmp(&other.0.terms)
    }
}
impl Hash for ScalarExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.terms.hash(state)
    }
}

impl fmt::Debug for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarExpr({self})")
    }
}

/// Expansions requested while multiplying monomials: `base^n` factors.
type Expansions = Vec<(ScalarExpr, i64)>;

/// Multiplies two monomials, splitting off integer powers >= 1 of bases.
fn mul_mono(a: &Monomial, b: &Monomial) -> (Monomial, Expansions) {
    let mut out: Vec<(Atom, Exponent)> = Vec::with_capacity(a.0.len() + b.0.len());
    let (mut i, mut j) = (0, 0);
    while i < a.0.len() || j < b.0.len() {
        let ord = match (a.0.get(i), b.0.get(j)) {
            (Some(x), Some(y)) => x.0.cmp(&y.0),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => unreachable!(),
        };
        match ord {
            Ordering::Less => {
                out.push(a.0[i].clone());
                i += 1;
            }
            Ordering::Greater => {
                out.push(b.0[j].clone());
                j += 1;
            }
            Ordering::Equal => {
                let e = a.0[i].1 + b.0[j].1;
                if !e.is_zero() {
                    out.push((a.0[i].0.clone(), e));
                }
                i += 1;
                j += 1;
            }
        }
    }
    reduce_factors(out)
}

fn reduce_factors(factors: Vec<(Atom, Exponent)>) -> (Monomial, Expansions) {
    let mut expansions = Vec::new();
    let mut kept = Vec::with_capacity(factors.len());
    for (atom, e) in factors {
        match &atom {
            Atom::Base(p) if e >= Exponent::one() => {
                let n = e.floor();
                let rem = e - n;
                expansions.push((p.clone(), n.to_integer()));
                if !rem.is_zero() {
                    kept.push((atom, rem));
                }
            }
            _ => kept.push((atom, e)),
        }
    }
    (Monomial(kept), expansions)
}

fn add_into(acc: &mut BTreeMap<Monomial, Coeff>, m: Monomial, c: Coeff) {
    if c.is_zero() {
        return;
    }
    match acc.get_mut(&m) {
        Some(existing) => {
            *existing = &*existing + &c;
            if existing.is_zero() {
                acc.remove(&m);
            }
        }
        None => {
            acc.insert(m, c);
        }
    }
}

fn atom_vars(atom: &Atom, out: &mut BTreeSet<Arc<str>>) {
    match atom {
        Atom::Var(v) => {
            out.insert(v.name.clone());
        }
        Atom::Base(p) => out.extend(p.0.vars.iter().cloned()),
    }
}

/// Splits a positive integer into prime powers (trial division).
fn factor_u64(mut n: u64) -> Vec<(u64, i64)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n.is_multiple_of(p) {
            let mut k = 0;
            while n.is_multiple_of(p) {
                n /= p;
                k += 1;
            }
            out.push((p, k));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

impl ScalarExpr {
    fn from_terms(mut terms: BTreeMap<Monomial, Coeff>) -> ScalarExpr {
        terms.retain(|_, c| !c.is_zero());
        if terms.len() >= 2 {
            while Self::collapse_group(&mut terms) {}
        }
        Self::raw(terms)
    }

    fn raw(terms: BTreeMap<Monomial, Coeff>) -> ScalarExpr {
        let mut vars = BTreeSet::new();
        for m in terms.keys() {
            for (a, _) in &m.0 {
                atom_vars(a, &mut vars);
            }
        }
        ScalarExpr(Arc::new(Node { terms, vars }))
    }

    /// Finds terms `Σ cᵢ·mᵢ·Q^e` sharing one negative exponent `e` of a
    /// base `Q` whose coefficient sum is a monomial multiple `k·G·Q`, and
    /// replaces them by the single term `k·G·Q^(e + 1)`. Returns whether it
    /// did.
    fn collapse_group(terms: &mut BTreeMap<Monomial, Coeff>) -> bool {
        let mut levels: BTreeMap<(&Atom, Exponent), Vec<&Monomial>> = BTreeMap::new();
        for m in terms.keys() {
            for (a, e) in &m.0 {
                if matches!(a, Atom::Base(_)) && *e < Exponent::zero() {
                    levels.entry((a, *e)).or_default().push(m);
                }
            }
        }
        let mut found: Option<(Vec<Monomial>, ScalarExpr)> = None;
        for ((atom, e), members) in levels {
            let Atom::Base(q) = atom else { unreachable!() };
            if members.len() < q.0.terms.len() {
                continue;
            }
            let mut r = BTreeMap::new();
            for m in &members {
                let d = divide_mono(m, &Monomial(vec![(atom.clone(), e)])).expect("exponent present");
                r.insert(d, terms[*m].clone());
            }
            if r.len() != q.0.terms.len() {
                continue;
            }
            let Some(factor) = monomial_multiple(&r, &q.0.terms) else {
                continue;
            };
            let raised = e + Exponent::one();
            let shift = if raised.is_zero() {
                vec![]
            } else {
                vec![(atom.clone(), raised)]
            };
            let replacement = factor.mul_raw(&Monomial(shift));
            found = Some((members.into_iter().cloned().collect(), replacement));
            break;
        }
        match found {
            Some((remove, replacement)) => {
                for m in &remove {
                    terms.remove(m);
                }
                for (m, c) in &replacement.0.terms {
                    add_into(terms, m.clone(), c.clone());
                }
                true
            }
            None => false,
        }
    }

    fn common_factor_of(terms: &BTreeMap<Monomial, Coeff>) -> Monomial {
        let mut iter = terms.keys();
        let Some(first) = iter.next() else {
            return Monomial::one();
        };
        let mut common: Vec<(Atom, Exponent)> = first.0.clone();
        for m in iter {
            common.retain_mut(|(atom, e)| match m.exponent_of(atom) {
                Some(k) => {
                    if k < *e {
                        *e = k;
                    }
                    true
                }
                None => false,
            });
            if common.is_empty() {
                break;
            }
        }
        Monomial(common)
    }

    pub fn zero() -> Self {
        ScalarExpr::from_terms(BTreeMap::new())
    }

    pub fn one() -> Self {
        ScalarExpr::constant(Coeff::one())
    }

    pub fn constant(c: Coeff) -> Self {
        let mut t = BTreeMap::new();
        t.insert(Monomial::one(), c);
        ScalarExpr::from_terms(t)
    }

    pub fn int(n: i64) -> Self {
        ScalarExpr::constant(Coeff::from_int(n))
    }

    pub fn ratio(p: i64, q: i64) -> Self {
        ScalarExpr::constant(Coeff::from_ratio(p, q))
    }

    pub fn i() -> Self {
        ScalarExpr::constant(Coeff::i())
    }

    pub fn var(v: &Variable) -> Self {
        Self::atom_pow(Atom::Var(v.clone()), Exponent::one())
    }

    fn atom_pow(atom: Atom, e: Exponent) -> Self {
        if e.is_zero() {
            return ScalarExpr::one();
        }
        let (m, exp) = reduce_factors(vec![(atom, e)]);
        let mut t = BTreeMap::new();
        t.insert(m, Coeff::one());
        let mut out = ScalarExpr::from_terms(t);
        for (base, n) in exp {
            out = &out * &base.pow_int(n);
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Coeff)> {
        self.0.terms.iter()
    }

    /// Identity of the shared node, used for evaluation caches.
    pub(crate) fn node_id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn num_terms(&self) -> usize {
        self.0.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    /// The constant value, if the expression has no atoms.
    pub fn as_constant(&self) -> Option<Coeff> {
        match self.0.terms.len() {
            0 => Some(Coeff::zero()),
            1 => {
                let (m, c) = self.0.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    /// Names of all variables occurring anywhere, including inside bases.
    pub fn variables(&self) -> &BTreeSet<Arc<str>> {
        &self.0.vars
    }

    pub fn contains_var(&self, name: &str) -> bool {
        self.0.vars.contains(name)
    }

    /// Every declared variable object occurring in the expression.
    pub fn variable_objects(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        self.collect_var_objects(&mut out);
        out
    }

    fn collect_var_objects(&self, out: &mut BTreeSet<Variable>) {
        for m in self.0.terms.keys() {
            for (a, _) in &m.0 {
                match a {
                    Atom::Var(v) => {
                        out.insert(v.clone());
                    }
                    Atom::Base(p) => p.collect_var_objects(out),
                }
            }
        }
    }

    pub fn scale(&self, c: &Coeff) -> ScalarExpr {
        if c.is_zero() {
            return ScalarExpr::zero();
        }
        if c.is_one() {
            return self.clone();
        }
        let terms = self.0.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect();
        ScalarExpr::from_terms(terms)
    }

    fn add_impl(&self, other: &ScalarExpr, sign: bool) -> ScalarExpr {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return if sign { other.clone() } else { other.neg_impl() };
        }
        let mut acc = self.0.terms.clone();
        for (m, c) in &other.0.terms {
            let c = if sign { c.clone() } else { -c };
            add_into(&mut acc, m.clone(), c);
        }
        ScalarExpr::from_terms(acc)
    }

    fn neg_impl(&self) -> ScalarExpr {
        let terms = self.0.terms.iter().map(|(m, c)| (m.clone(), -c)).collect();
        ScalarExpr::from_terms(terms)
    }

    fn mul_impl(&self, other: &ScalarExpr) -> ScalarExpr {
        if self.is_zero() || other.is_zero() {
            return ScalarExpr::zero();
        }
        if let Some(c) = self.as_constant() {
            return other.scale(&c);
        }
        if let Some(c) = other.as_constant() {
            return self.scale(&c);
        }
        let mut acc: BTreeMap<Monomial, Coeff> = BTreeMap::new();
        let mut deferred: Vec<ScalarExpr> = Vec::new();
        for (m1, c1) in &self.0.terms {
            for (m2, c2) in &other.0.terms {
                let c = c1 * c2;
                let (m, exp) = mul_mono(m1, m2);
                if exp.is_empty() {
                    add_into(&mut acc, m, c);
                } else {
                    let mut t = BTreeMap::new();
                    t.insert(m, c);
                    let mut piece = ScalarExpr::from_terms(t);
                    for (base, n) in exp {
                        piece = piece.mul_impl(&base.pow_int(n));
                    }
                    deferred.push(piece);
                }
            }
        }
        for piece in deferred {
            for (m, c) in &piece.0.terms {
                add_into(&mut acc, m.clone(), c.clone());
            }
        }
        ScalarExpr::from_terms(acc)
    }

    /// Non-negative integer powers by repeated squaring; negative powers
    /// go through [`ScalarExpr::pow`].
    pub fn pow_int(&self, n: i64) -> ScalarExpr {
        if n < 0 {
            return self.pow(Exponent::from_integer(n));
        }
        let mut acc = ScalarExpr::one();
        let mut base = self.clone();
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_impl(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_impl(&base);
            }
        }
        acc
    }

    /// Rational power. Powers of single monomials distribute over their
    /// factors (bases are assumed to lie on the principal branch).
    pub fn pow(&self, r: Exponent) -> ScalarExpr {
        if r.is_zero() {
            return ScalarExpr::one();
        }
        if self.is_zero() {
            return if r > Exponent::zero() {
                ScalarExpr::zero()
            } else {
                ScalarExpr::atom_pow(Atom::Base(self.clone()), r)
            };
        }
        if r.is_integer() && r > Exponent::zero() {
            return self.pow_int(r.to_integer());
        }
        if self.0.terms.len() == 1 {
            let (m, c) = self.0.terms.iter().next().unwrap();
            let factors: Vec<(Atom, Exponent)> = m.0.iter().map(|(a, e)| (a.clone(), *e * r)).collect();
            let (mono, exp) = reduce_factors(factors);
            let mut t = BTreeMap::new();
            t.insert(mono, Coeff::one());
            let mut out = ScalarExpr::from_terms(t);
            for (base, n) in exp {
                out = out.mul_impl(&base.pow_int(n));
            }
            return out.mul_impl(&coeff_pow(c, r));
        }
        // Pull out the common monomial factor, then normalise the leading
        // coefficient so equal sums share one base atom.
        let mut common = Self::common_factor_of(&self.0.terms);
        if self.0.terms.keys().any(|m| divide_mono(m, &common).is_none()) {
            common.0.retain(|(a, _)| matches!(a, Atom::Var(_)));
        }
        if !common.is_one() {
            let mut rest = BTreeMap::new();
            for (m, c) in &self.0.terms {
                let q = divide_mono(m, &common).expect("variable factors divide every term");
                rest.insert(q, c.clone());
            }
            let rest = ScalarExpr::from_terms(rest);
            let mut g = BTreeMap::new();
            g.insert(common, Coeff::one());
            let g = ScalarExpr::from_terms(g);
            return g.pow(r).mul_impl(&rest.pow(r));
        }
        let lead = self.0.terms.values().next().unwrap().clone();
        let factor = if r.is_integer() || lead.is_positive_real() {
            lead
        } else if lead.is_negative_real() {
            -&lead
        } else {
            Coeff::one()
        };
        let inv = factor.inv().expect("non-zero leading coefficient");
        let monic = self.scale(&inv);
        coeff_pow(&factor, r).mul_impl(&ScalarExpr::atom_pow(Atom::Base(monic), r))
    }

    pub fn recip(&self) -> ScalarExpr {
        self.pow(Exponent::from_integer(-1))
    }

    pub fn sqrt(&self) -> ScalarExpr {
        self.pow(Exponent::new(1, 2))
    }

    /// Partial derivative with respect to the named variable; conjugate
    /// partners are treated as independent (Wirtinger convention).
    pub fn differentiate(&self, var: &str) -> ScalarExpr {
        let mut cache = HashMap::new();
        self.diff_cached(var, &mut cache)
    }

    fn diff_cached(&self, var: &str, cache: &mut HashMap<ScalarExpr, ScalarExpr>) -> ScalarExpr {
        if !self.contains_var(var) {
            return ScalarExpr::zero();
        }
        let mut acc: Vec<ScalarExpr> = Vec::new();
        for (m, c) in &self.0.terms {
            for (idx, (atom, e)) in m.0.iter().enumerate() {
                let inner = match atom {
                    Atom::Var(v) => {
                        if v.name.as_ref() == var {
                            ScalarExpr::one()
                        } else {
                            continue;
                        }
                    }
                    Atom::Base(p) => {
                        if !p.contains_var(var) {
                            continue;
                        }
                        if let Some(d) = cache.get(p) {
                            d.clone()
                        } else {
                            let d = p.diff_cached(var, cache);
                            cache.insert(p.clone(), d.clone());
                            d
                        }
                    }
                };
                let mut factors = m.0.clone();
                factors[idx].1 -= Exponent::one();
                factors.retain(|(_, k)| !k.is_zero());
                let (mono, exp) = reduce_factors(factors);
                let k = Coeff::new(
                    BigRational::new(BigInt::from(*e.numer()), BigInt::from(*e.denom())),
                    BigRational::zero(),
                );
                let mut t = BTreeMap::new();
                t.insert(mono, c * &k);
                let mut piece = ScalarExpr::from_terms(t);
                for (base, n) in exp {
                    piece = piece.mul_impl(&base.pow_int(n));
                }
                acc.push(piece.mul_impl(&inner));
            }
        }
        sum_all(acc)
    }

    /// Complex conjugation driven by each variable's reality tag.
    pub fn conjugate(&self) -> ScalarExpr {
        let mut cache = HashMap::new();
        self.conj_cached(&mut cache)
    }

    fn conj_cached(&self, cache: &mut HashMap<ScalarExpr, ScalarExpr>) -> ScalarExpr {
        if let Some(hit) = cache.get(self) {
            return hit.clone();
        }
        let mut pieces = Vec::with_capacity(self.0.terms.len());
        for (m, c) in &self.0.terms {
            let mut piece = ScalarExpr::constant(c.conj());
            for (atom, e) in &m.0 {
                let conj_atom = match atom {
                    Atom::Var(v) => match &v.reality {
                        Reality::Real | Reality::PositiveReal => ScalarExpr::var(v),
                        Reality::Imaginary => ScalarExpr::var(v).neg_impl(),
                        Reality::UnitModulus => ScalarExpr::var(v).recip(),
                        Reality::ComplexPaired(partner) => {
                            ScalarExpr::var(&Variable::new(partner, Reality::ComplexPaired(v.name.clone())))
                        }
                    },
                    Atom::Base(p) => p.conj_cached(cache),
                };
                piece = piece.mul_impl(&conj_atom.pow(*e));
            }
            pieces.push(piece);
        }
        let out = sum_all(pieces);
        cache.insert(self.clone(), out.clone());
        out
    }

    /// Simultaneous substitution of variables by expressions. Reality tags
    /// are enforced: a real variable needs a self-conjugate replacement, a
    /// paired variable and its partner must receive conjugate values.
    pub fn substitute(&self, bindings: &BTreeMap<String, ScalarExpr>) -> Result<ScalarExpr, ExprError> {
        check_bindings(self, bindings)?;
        Ok(self.substitute_unchecked(bindings))
    }

    /// Substitution without reality checks.
    pub fn substitute_unchecked(&self, bindings: &BTreeMap<String, ScalarExpr>) -> ScalarExpr {
        let mut cache = HashMap::new();
        self.subst_cached(bindings, &mut cache)
    }

    fn subst_cached(
        &self,
        bindings: &BTreeMap<String, ScalarExpr>,
        cache: &mut HashMap<ScalarExpr, ScalarExpr>,
    ) -> ScalarExpr {
        if !bindings.keys().any(|k| self.contains_var(k)) {
            return self.clone();
        }
        if let Some(hit) = cache.get(self) {
            return hit.clone();
        }
        let mut pieces = Vec::with_capacity(self.0.terms.len());
        for (m, c) in &self.0.terms {
            let mut piece = ScalarExpr::constant(c.clone());
            let mut untouched: Vec<(Atom, Exponent)> = Vec::new();
            for (atom, e) in &m.0 {
                match atom {
                    Atom::Var(v) => match bindings.get(v.name.as_ref()) {
                        Some(val) => piece = piece.mul_impl(&val.pow(*e)),
                        None => untouched.push((atom.clone(), *e)),
                    },
                    Atom::Base(p) => {
                        if bindings.keys().any(|k| p.contains_var(k)) {
                            let q = p.subst_cached(bindings, cache);
                            piece = piece.mul_impl(&q.pow(*e));
                        } else {
                            untouched.push((atom.clone(), *e));
                        }
                    }
                }
            }
            let mut t = BTreeMap::new();
            t.insert(Monomial(untouched), Coeff::one());
            piece = piece.mul_impl(&ScalarExpr::from_terms(t));
            pieces.push(piece);
        }
        let out = sum_all(pieces);
        cache.insert(self.clone(), out.clone());
        out
    }

    /// Product of a single monomial with a term map, without collapsing.
    fn mul_raw_terms(&self, b: &BTreeMap<Monomial, Coeff>) -> BTreeMap<Monomial, Coeff> {
        let (m0, c0) = self.0.terms.iter().next().expect("single term");
        let mut out = BTreeMap::new();
        for (m, c) in b {
            let (mono, exp) = mul_mono(m0, m);
            if !exp.is_empty() {
                return BTreeMap::new();
            }
            add_into(&mut out, mono, c0 * c);
        }
        out
    }

    /// Multiplies by a monomial whose base exponents are merged before any
    /// expansion, so `P^(-3/2)·P^2` becomes `P^(1/2)`.
    fn mul_raw(&self, by: &Monomial) -> ScalarExpr {
        let mut pieces = Vec::with_capacity(self.0.terms.len());
        for (m, c) in &self.0.terms {
            let (mono, exp) = mul_mono(m, by);
            let mut t = BTreeMap::new();
            t.insert(mono, c.clone());
            let mut piece = ScalarExpr::from_terms(t);
            for (base, n) in exp {
                piece = piece.mul_impl(&base.pow_int(n));
            }
            pieces.push(piece);
        }
        sum_all(pieces)
    }

    /// Exact zero decision for expressions whose bases are zero-free:
    /// multiplies through by the most negative base powers until no
    /// negative base exponents remain, then tests structurally. A `false`
    /// result is not a proof of non-vanishing.
    pub fn is_zero_exact(&self) -> bool {
        let mut e = self.clone();
        for _ in 0..12 {
            if e.is_zero() {
                return true;
            }
            let mut worst: BTreeMap<Atom, Exponent> = BTreeMap::new();
            for m in e.0.terms.keys() {
                for (a, k) in &m.0 {
                    if matches!(a, Atom::Base(_)) && *k < Exponent::zero() {
                        let w = worst.entry(a.clone()).or_insert(*k);
                        if *k < *w {
                            *w = *k;
                        }
                    }
                }
            }
            if worst.is_empty() {
                return false;
            }
            let mut factors: Vec<(Atom, Exponent)> = worst.into_iter().map(|(a, k)| (a, -k.floor())).collect();
            factors.sort_by(|x, y| x.0.cmp(&y.0));
            e = e.mul_raw(&Monomial(factors));
        }
        e.is_zero()
    }
}

fn check_bindings(e: &ScalarExpr, bindings: &BTreeMap<String, ScalarExpr>) -> Result<(), ExprError> {
    for v in e.variable_objects() {
        let Some(val) = bindings.get(v.name.as_ref()) else {
            continue;
        };
        let ok = match &v.reality {
            Reality::Real | Reality::PositiveReal => (&val.conjugate() - val).is_zero_exact(),
            Reality::Imaginary => (&val.conjugate() + val).is_zero_exact(),
            Reality::UnitModulus => (&(&val.conjugate() * val) - &ScalarExpr::one()).is_zero_exact(),
            Reality::ComplexPaired(partner) => match bindings.get(partner.as_ref()) {
                Some(pv) => (&val.conjugate() - pv).is_zero_exact(),
                None => {
                    return Err(ExprError::Reality(format!(
                        "substituting `{}` requires a binding for its partner `{}`",
                        v.name, partner
                    )))
                }
            },
        };
        if !ok {
            return Err(ExprError::Reality(format!(
                "replacement for `{}` violates its reality tag",
                v.name
            )));
        }
    }
    Ok(())
}

fn divide_mono(m: &Monomial, by: &Monomial) -> Option<Monomial> {
    let mut out = m.0.clone();
    for (atom, e) in &by.0 {
        let idx = out.binary_search_by(|(a, _)| a.cmp(atom)).ok()?;
        out[idx].1 -= *e;
    }
    out.retain(|(_, e)| !e.is_zero());
    if out
        .iter()
        .any(|(a, e)| matches!(a, Atom::Base(_)) && *e >= Exponent::one())
    {
        return None;
    }
    Some(Monomial(out))
}

/// A single term `k·G` with `a = k·G·b`, if one exists. `G` may only
/// contain variables.
fn monomial_multiple(a: &BTreeMap<Monomial, Coeff>, b: &BTreeMap<Monomial, Coeff>) -> Option<ScalarExpr> {
    let (ma, ca) = a.iter().next()?;
    for (mb, cb) in b {
        let mut g: BTreeMap<Atom, Exponent> = ma.0.iter().cloned().collect();
        for (atom, e) in &mb.0 {
            *g.entry(atom.clone()).or_insert_with(Exponent::zero) -= *e;
        }
        g.retain(|_, e| !e.is_zero());
        if g.keys().any(|atom| matches!(atom, Atom::Base(_))) {
            continue;
        }
        let k = ca.div(cb)?;
        let mut t = BTreeMap::new();
        t.insert(Monomial(g.into_iter().collect()), k);
        let cand = ScalarExpr::raw(t);
        let prod = cand.mul_raw_terms(b);
        if prod == *a {
            return Some(cand);
        }
    }
    None
}

fn bigint_to_u64(n: &BigInt) -> Option<u64> {
    n.to_u64()
}

/// `c^r` for an exact constant.
fn coeff_pow(c: &Coeff, r: Exponent) -> ScalarExpr {
    if r.is_integer() {
        return match c.pow_int(r.to_integer()) {
            Some(v) => ScalarExpr::constant(v),
            None => ScalarExpr::atom_pow(Atom::Base(ScalarExpr::zero()), r),
        };
    }
    if c.is_one() {
        return ScalarExpr::one();
    }
    if c.is_negative_real() {
        let minus_one = ScalarExpr::int(-1);
        return coeff_pow(&-c, r).mul_impl(&ScalarExpr::atom_pow(Atom::Base(minus_one), r));
    }
    if !c.is_positive_real() {
        return ScalarExpr::atom_pow(Atom::Base(ScalarExpr::constant(c.clone())), r);
    }
    let (Some(num), Some(den)) = (bigint_to_u64(c.re.numer()), bigint_to_u64(c.re.denom())) else {
        return ScalarExpr::atom_pow(Atom::Base(ScalarExpr::constant(c.clone())), r);
    };
    let mut primes: BTreeMap<u64, i64> = BTreeMap::new();
    for (p, k) in factor_u64(num) {
        *primes.entry(p).or_default() += k;
    }
    for (p, k) in factor_u64(den) {
        *primes.entry(p).or_default() -= k;
    }
    let mut out = ScalarExpr::one();
    let mut rational = Coeff::one();
    for (p, k) in primes {
        let e = r * Exponent::from_integer(k);
        let whole = e.floor();
        let frac = e - whole;
        let pc = Coeff::from_int(p as i64);
        rational = &rational * &pc.pow_int(whole.to_integer()).expect("prime is non-zero");
        if !frac.is_zero() {
            out = out.mul_impl(&ScalarExpr::atom_pow(Atom::Base(ScalarExpr::constant(pc)), frac));
        }
    }
    out.scale(&rational)
}

/// Sums a batch of expressions with a single accumulator.
pub fn sum_all<I: IntoIterator<Item = ScalarExpr>>(items: I) -> ScalarExpr {
    let mut acc: BTreeMap<Monomial, Coeff> = BTreeMap::new();
    for e in items {
        for (m, c) in &e.0.terms {
            add_into(&mut acc, m.clone(), c.clone());
        }
    }
    ScalarExpr::from_terms(acc)
}

macro_rules! binop {
    ($tr:ident, $method:ident, $body:expr) => {
        impl $tr<&ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                let f: fn(&ScalarExpr, &ScalarExpr) -> ScalarExpr = $body;
                f(self, rhs)
            }
        }
        impl $tr<ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&ScalarExpr> for ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: &ScalarExpr) -> ScalarExpr {
                (&self).$method(rhs)
            }
        }
        impl $tr<ScalarExpr> for &ScalarExpr {
            type Output = ScalarExpr;
            fn $method(self, rhs: ScalarExpr) -> ScalarExpr {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| a.add_impl(b, true));
binop!(Sub, sub, |a, b| a.add_impl(b, false));
binop!(Mul, mul, |a, b| a.mul_impl(b));

impl std::ops::Div<&ScalarExpr> for &ScalarExpr {
    type Output = ScalarExpr;
    fn div(self, rhs: &ScalarExpr) -> ScalarExpr {
        self.mul_impl(&rhs.recip())
    }
}
impl std::ops::Div<ScalarExpr> for ScalarExpr {
    type Output = ScalarExpr;
    fn div(self, rhs: ScalarExpr) -> ScalarExpr {
        self.mul_impl(&rhs.recip())
    }
}

impl Neg for &ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        self.neg_impl()
    }
}
impl Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        self.neg_impl()
    }
}

fn fmt_exponent(e: Exponent, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if e.is_integer() && e > Exponent::zero() {
        write!(f, "^{}", e.to_integer())
    } else if e.is_integer() {
        write!(f, "^({})", e.to_integer())
    } else {
        write!(f, "^({}/{})", e.numer(), e.denom())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Var(v) => f.write_str(&v.name),
            Atom::Base(p) => write!(f, "({p})"),
        }
    }
}

impl fmt::Display for ScalarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (idx, (m, c)) in self.0.terms.iter().enumerate() {
            if idx > 0 {
                f.write_str(" + ")?;
            }
            if m.is_one() {
                write!(f, "{c}")?;
                continue;
            }
            if *c == -&Coeff::one() {
                f.write_str("-")?;
            } else if !c.is_one() {
                write!(f, "{c}*")?;
            }
            for (j, (a, e)) in m.0.iter().enumerate() {
                if j > 0 {
                    f.write_str("*")?;
                }
                write!(f, "{a}")?;
                if *e != Exponent::one() {
                    fmt_exponent(*e, f)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t1() -> ScalarExpr {
        ScalarExpr::var(&Variable::real("t1"))
    }
    fn t2() -> ScalarExpr {
        ScalarExpr::var(&Variable::real("t2"))
    }

    #[test]
    fn binomial_square_cancels() {
        let s = &t1() + &t2();
        let e = &(&(&s * &s) - &(&t1() * &t1())) - &(&ScalarExpr::int(2) * &(&t1() * &t2()));
        let e = &e - &(&t2() * &t2());
        assert!(e.is_zero());
    }

    #[test]
    fn radical_rewrite() {
        let base = &ScalarExpr::one() - &t1();
        let w = base.sqrt();
        assert_eq!(&w * &w, base);
    }

    #[test]
    fn unit_modulus_product() {
        let a = Variable::unit("a");
        let e = &ScalarExpr::var(&a) * &ScalarExpr::var(&a).conjugate();
        assert!(e.is_one());
    }

    #[test]
    fn constant_roots_split_into_primes() {
        let two = ScalarExpr::int(2).sqrt();
        let half = ScalarExpr::ratio(1, 2).sqrt();
        assert!((&two * &half).is_one());
        assert_eq!(
            ScalarExpr::int(12).sqrt(),
            &ScalarExpr::int(2) * &ScalarExpr::int(3).sqrt()
        );
    }

    #[test]
    fn sum_times_reciprocal_collapses() {
        let s = &(&t1() * &t2()) - &t2().recip();
        assert!((&s * &s.recip()).is_one());
        let x = &(&s * &t1()) * &s.recip();
        assert_eq!(x, t1());
    }

    #[test]
    fn exact_zero_clears_denominators() {
        let b = &ScalarExpr::one() - &(&ScalarExpr::int(12) * &(&t1() * &t2()));
        let lhs = &b.pow(Exponent::new(-3, 2)) * &b;
        let rhs = b.pow(Exponent::new(-1, 2));
        assert!((&lhs - &rhs).is_zero_exact());
    }

    #[test]
    fn derivative_of_quotient() {
        let e = &(&t1() * &t1()) / &t2();
        let d = e.differentiate("t1");
        assert_eq!(d, &(&ScalarExpr::int(2) * &t1()) / &t2());
    }

    #[test]
    fn chain_rule_through_radical() {
        let base = &ScalarExpr::one() - &(&ScalarExpr::int(12) * &(&t1() * &t2()));
        let d = base.sqrt().differentiate("t1");
        let expected = &(&ScalarExpr::int(-6) * &t2()) * &base.pow(Exponent::new(-1, 2));
        assert_eq!(d, expected);
    }
}
