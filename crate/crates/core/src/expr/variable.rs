use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ExprError;

/// How a variable behaves under complex conjugation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reality {
    Real,
    Imaginary,
    UnitModulus,
    PositiveReal,
    /// Complex variable whose conjugate is the named partner.
    ComplexPaired(Arc<str>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable {
    pub name: Arc<str>,
    pub reality: Reality,
}

impl Variable {
    pub fn new(name: &str, reality: Reality) -> Self {
        Variable {
            name: Arc::from(name),
            reality,
        }
    }

    pub fn real(name: &str) -> Self {
        Variable::new(name, Reality::Real)
    }

    pub fn imaginary(name: &str) -> Self {
        Variable::new(name, Reality::Imaginary)
    }

    pub fn positive(name: &str) -> Self {
        Variable::new(name, Reality::PositiveReal)
    }

    pub fn unit(name: &str) -> Self {
        Variable::new(name, Reality::UnitModulus)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// The set of declared variables; names are unique and paired
/// variables always come with their partner.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VariableTable {
    vars: BTreeMap<Arc<str>, Variable>,
}

impl VariableTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, var: Variable) -> Result<Variable, ExprError> {
        if let Reality::ComplexPaired(_) = var.reality {
            return Err(ExprError::Reality(format!(
                "complex variable `{}` must be declared with declare_pair",
                var.name
            )));
        }
        self.insert(var)
    }

    /// Declares `name` and its conjugate `partner` together.
    pub fn declare_pair(&mut self, name: &str, partner: &str) -> Result<(Variable, Variable), ExprError> {
        if name == partner {
            return Err(ExprError::Reality(format!("`{name}` cannot be its own partner")));
        }
        let v = Variable::new(name, Reality::ComplexPaired(Arc::from(partner)));
        let w = Variable::new(partner, Reality::ComplexPaired(Arc::from(name)));
        let v = self.insert(v)?;
        let w = self.insert(w)?;
        Ok((v, w))
    }

    fn insert(&mut self, var: Variable) -> Result<Variable, ExprError> {
        if var.name.as_ref() == "i" || var.name.as_ref() == "sqrt" {
            return Err(ExprError::Reality(format!("`{}` is reserved", var.name)));
        }
        if self.vars.contains_key(&var.name) {
            return Err(ExprError::Duplicate(var.name.to_string()));
        }
        self.vars.insert(var.name.clone(), var.clone());
        Ok(var)
    }

    pub fn get(&self, name: &str) -> Option<&Variable> {
        self.vars.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Variable> {
        self.vars.values()
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Merges another table; identical redeclarations are allowed.
    pub fn extend(&mut self, other: &VariableTable) -> Result<(), ExprError> {
        for v in other.iter() {
            match self.vars.get(&v.name) {
                Some(existing) if existing == v => {}
                Some(_) => return Err(ExprError::Duplicate(v.name.to_string())),
                None => {
                    self.vars.insert(v.name.clone(), v.clone());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_reference_each_other() {
        let mut t = VariableTable::new();
        let (b, bb) = t.declare_pair("b", "bb").unwrap();
        assert_eq!(b.reality, Reality::ComplexPaired(Arc::from("bb")));
        assert_eq!(bb.reality, Reality::ComplexPaired(Arc::from("b")));
    }

    #[test]
    fn duplicates_rejected() {
        let mut t = VariableTable::new();
        t.declare(Variable::real("x")).unwrap();
        assert!(matches!(t.declare(Variable::real("x")), Err(ExprError::Duplicate(_))));
        assert!(t.declare(Variable::real("i")).is_err());
    }
}
