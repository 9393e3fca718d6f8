use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use crate::expr::{Reality, Variable, VariableTable};

use super::form::{FormExpr, Word};
use super::FormError;

/// How a generator behaves under conjugation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Conj {
    /// `conj(g) = sign·g`; sign −1 means the form is iℝ-valued.
    SelfConj(i8),
    /// `conj(g)` is the generator with this index.
    Pair(usize),
    /// Inert covector with no conjugate and no exterior-derivative rule.
    Auxiliary,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub name: String,
    pub conj: Conj,
}

#[derive(Debug, Default)]
pub(crate) struct Rules {
    pub(crate) gens: Vec<Option<BTreeMap<Word, crate::expr::ScalarExpr>>>,
    pub(crate) vars: BTreeMap<String, BTreeMap<Word, crate::expr::ScalarExpr>>,
}

pub(crate) struct ChartData {
    pub(crate) id: u64,
    pub(crate) name: String,
    pub(crate) vars: VariableTable,
    pub(crate) gens: Vec<Generator>,
    pub(crate) index: HashMap<String, usize>,
    pub(crate) placeholders: BTreeSet<String>,
    pub(crate) rules: OnceLock<Rules>,
}

/// A finite coframe context: variables, ordered 1-form generators and
/// their exterior-derivative rules. Cloning is cheap; identity is by
/// construction, not by content.
#[derive(Clone)]
pub struct Chart(pub(crate) Arc<ChartData>);

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

impl PartialEq for Chart {
    fn eq(&self, other: &Self) -> bool {
        self.0.id == other.0.id
    }
}
impl Eq for Chart {}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Chart({}#{})", self.0.name, self.0.id)
    }
}

/// Declares variables and generators; rules are installed afterwards
/// because they are themselves forms over the chart.
#[derive(Default)]
pub struct ChartBuilder {
    name: String,
    vars: VariableTable,
    gens: Vec<(String, GenKind)>,
    placeholders: BTreeSet<String>,
}

enum GenKind {
    SelfConj(i8),
    Pair(String),
    Auxiliary,
}

impl ChartBuilder {
    pub fn new(name: &str) -> Self {
        ChartBuilder {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn rename(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn var(mut self, v: Variable) -> Result<Self, FormError> {
        self.vars.declare(v)?;
        Ok(self)
    }

    pub fn pair_var(mut self, name: &str, partner: &str) -> Result<Self, FormError> {
        self.vars.declare_pair(name, partner)?;
        Ok(self)
    }

    /// Marks variables whose presence in a rule exempts that rule from the
    /// d∘d = 0 check (curvature coefficients).
    pub fn placeholder(mut self, name: &str) -> Self {
        self.placeholders.insert(name.to_string());
        self
    }

    pub fn real_gen(mut self, name: &str) -> Self {
        self.gens.push((name.to_string(), GenKind::SelfConj(1)));
        self
    }

    pub fn imag_gen(mut self, name: &str) -> Self {
        self.gens.push((name.to_string(), GenKind::SelfConj(-1)));
        self
    }

    pub fn pair_gen(mut self, name: &str, partner: &str) -> Self {
        self.gens.push((name.to_string(), GenKind::Pair(partner.to_string())));
        self.gens.push((partner.to_string(), GenKind::Pair(name.to_string())));
        self
    }

    pub fn aux_gen(mut self, name: &str) -> Self {
        self.gens.push((name.to_string(), GenKind::Auxiliary));
        self
    }

    pub fn finish(self) -> Result<Chart, FormError> {
        let mut index = HashMap::new();
        for (i, (name, _)) in self.gens.iter().enumerate() {
            if self.vars.contains(name) || index.insert(name.clone(), i).is_some() {
                return Err(FormError::Duplicate(name.clone()));
            }
        }
        if self.gens.len() > u16::MAX as usize {
            return Err(FormError::Duplicate("too many generators".into()));
        }
        let mut gens = Vec::with_capacity(self.gens.len());
        for (name, kind) in &self.gens {
            let conj = match kind {
                GenKind::SelfConj(s) => Conj::SelfConj(*s),
                GenKind::Auxiliary => Conj::Auxiliary,
                GenKind::Pair(p) => Conj::Pair(*index.get(p).ok_or_else(|| FormError::UnknownGenerator(p.clone()))?),
            };
            gens.push(Generator {
                name: name.clone(),
                conj,
            });
        }
        for p in &self.placeholders {
            if !self.vars.contains(p) {
                return Err(FormError::Expr(crate::expr::ExprError::Undeclared(p.clone())));
            }
        }
        Ok(Chart(Arc::new(ChartData {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            name: self.name,
            vars: self.vars,
            gens,
            index,
            placeholders: self.placeholders,
            rules: OnceLock::new(),
        })))
    }
}

impl Chart {
    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn variables(&self) -> &VariableTable {
        &self.0.vars
    }

    pub fn generators(&self) -> &[Generator] {
        &self.0.gens
    }

    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.0.index.get(name).copied()
    }

    pub fn placeholders(&self) -> &BTreeSet<String> {
        &self.0.placeholders
    }

    /// The 1-form of a named generator.
    pub fn gen(&self, name: &str) -> Result<FormExpr, FormError> {
        let i = self
            .generator_index(name)
            .ok_or_else(|| FormError::UnknownGenerator(name.to_string()))?;
        Ok(FormExpr::generator(self, i))
    }

    /// Like [`Chart::gen`] for names known to exist.
    pub fn g(&self, name: &str) -> FormExpr {
        self.gen(name).unwrap_or_else(|e| panic!("{e}"))
    }

    /// Scalar expression for a declared variable.
    pub fn var(&self, name: &str) -> Result<crate::expr::ScalarExpr, FormError> {
        self.0
            .vars
            .get(name)
            .map(crate::expr::ScalarExpr::var)
            .ok_or_else(|| FormError::Expr(crate::expr::ExprError::Undeclared(name.to_string())))
    }

    /// Like [`Chart::var`] for names known to exist.
    pub fn v(&self, name: &str) -> crate::expr::ScalarExpr {
        self.var(name).unwrap_or_else(|e| panic!("{e}"))
    }

    pub(crate) fn rules(&self) -> Option<&Rules> {
        self.0.rules.get()
    }

    pub fn has_rules(&self) -> bool {
        self.0.rules.get().is_some()
    }

    /// Installs exterior-derivative rules for generators and variables.
    /// Missing rules of paired generators (and paired variables) are filled
    /// in by conjugating the partner's rule. Afterwards every rule free of
    /// placeholders and auxiliary covectors is checked for d∘d = 0.
    pub fn install_rules(
        &self,
        gen_rules: BTreeMap<String, FormExpr>,
        var_rules: BTreeMap<String, FormExpr>,
    ) -> Result<(), FormError> {
        self.install(gen_rules, var_rules, true)
    }

    /// Installs rules without the d∘d = 0 check (for deliberately broken
    /// charts in mutation tests).
    pub fn install_rules_unchecked(
        &self,
        gen_rules: BTreeMap<String, FormExpr>,
        var_rules: BTreeMap<String, FormExpr>,
    ) -> Result<(), FormError> {
        self.install(gen_rules, var_rules, false)
    }

    fn install(
        &self,
        gen_rules: BTreeMap<String, FormExpr>,
        var_rules: BTreeMap<String, FormExpr>,
        check: bool,
    ) -> Result<(), FormError> {
        let n = self.0.gens.len();
        let mut gens: Vec<Option<FormExpr>> = vec![None; n];
        for (name, rule) in gen_rules {
            let i = self
                .generator_index(&name)
                .ok_or_else(|| FormError::UnknownGenerator(name.clone()))?;
            if matches!(self.0.gens[i].conj, Conj::Auxiliary) {
                return Err(FormError::Auxiliary(name));
            }
            self.expect_form(&rule, 2)?;
            gens[i] = Some(rule);
        }
        for i in 0..n {
            if gens[i].is_none() {
                if let Conj::Pair(j) = self.0.gens[i].conj {
                    if let Some(r) = &gens[j] {
                        gens[i] = Some(r.conjugate_form()?);
                    }
                }
            }
        }
        let mut vars: BTreeMap<String, FormExpr> = BTreeMap::new();
        for (name, rule) in var_rules {
            if !self.0.vars.contains(&name) {
                return Err(FormError::Expr(crate::expr::ExprError::Undeclared(name)));
            }
            self.expect_form(&rule, 1)?;
            vars.insert(name, rule);
        }
        for v in self.0.vars.iter() {
            if vars.contains_key(v.name.as_ref()) {
                continue;
            }
            if let Reality::ComplexPaired(partner) = &v.reality {
                if let Some(r) = vars.get(partner.as_ref()) {
                    let c = r.conjugate_form()?;
                    vars.insert(v.name.to_string(), c);
                }
            }
        }
        let rules = Rules {
            gens: gens.into_iter().map(|r| r.map(|f| f.into_terms())).collect(),
            vars: vars.into_iter().map(|(k, f)| (k, f.into_terms())).collect(),
        };
        self.0
            .rules
            .set(rules)
            .map_err(|_| FormError::Duplicate(format!("rules of chart {}", self.0.name)))?;
        if !check {
            return Ok(());
        }
        for (name, residual) in self.d_squared_residuals()? {
            if !residual.is_zero_exact() {
                return Err(FormError::DSquared(name));
            }
        }
        Ok(())
    }

    fn expect_form(&self, f: &FormExpr, degree: usize) -> Result<(), FormError> {
        if f.chart() != self {
            return Err(FormError::ChartMismatch);
        }
        if f.degree() != degree && !f.is_zero() {
            return Err(FormError::Degree {
                expected: degree,
                found: f.degree(),
            });
        }
        Ok(())
    }

    /// The stored rule `d g` of a generator.
    pub fn d_rule(&self, name: &str) -> Result<FormExpr, FormError> {
        let i = self
            .generator_index(name)
            .ok_or_else(|| FormError::UnknownGenerator(name.to_string()))?;
        self.rules()
            .and_then(|r| r.gens[i].clone())
            .map(|t| FormExpr::from_terms(self, 2, t))
            .ok_or_else(|| FormError::MissingRule(name.to_string()))
    }

    fn form_is_clean(&self, f: &FormExpr) -> bool {
        f.terms().all(|(w, c)| {
            w.iter()
                .all(|&g| !matches!(self.0.gens[g as usize].conj, Conj::Auxiliary))
                && c.variables().iter().all(|v| !self.0.placeholders.contains(v.as_ref()))
        })
    }

    /// Whether a generator's rule is free of placeholders and auxiliary
    /// covectors, and so are the rules of every generator it mentions.
    /// Only such generators are subject to d∘d = 0.
    pub fn rule_is_placeholder_free(&self, name: &str) -> bool {
        let Ok(rule) = self.d_rule(name) else { return false };
        if !self.form_is_clean(&rule) {
            return false;
        }
        let clean = rule.terms().all(|(w, _)| {
            w.iter().all(|&g| {
                self.d_rule(&self.0.gens[g as usize].name)
                    .map(|r| self.form_is_clean(&r))
                    .unwrap_or(false)
            })
        });
        clean
    }

    /// `d(d g)` for every placeholder-free generator rule and `d(d v)` for
    /// every variable whose rule only involves such generators.
    pub fn d_squared_residuals(&self) -> Result<Vec<(String, FormExpr)>, FormError> {
        let mut out = Vec::new();
        for g in &self.0.gens {
            if self.rule_is_placeholder_free(&g.name) {
                let dd = self.d_rule(&g.name)?.d()?;
                out.push((g.name.clone(), dd));
            }
        }
        if let Some(rules) = self.rules() {
            for (name, terms) in &rules.vars {
                if self.0.placeholders.contains(name) {
                    continue;
                }
                let f = FormExpr::from_terms(self, 1, terms.clone());
                let clean = self.form_is_clean(&f)
                    && f.terms().all(|(w, _)| {
                        w.iter()
                            .all(|&g| self.rule_is_placeholder_free(&self.0.gens[g as usize].name))
                    });
                if clean {
                    out.push((name.clone(), f.d()?));
                }
            }
        }
        Ok(out)
    }
}
