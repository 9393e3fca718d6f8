//! Numeric evaluation and randomized identity testing.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;

use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scalar::{Atom, Exponent, ScalarExpr};
use super::variable::{Reality, Variable};
use super::ExprError;

const REALITY_TOL: f64 = 1e-12;

/// A numeric point: values for variables, checked against reality tags.
#[derive(Clone, Debug, Default)]
pub struct Point {
    values: BTreeMap<String, Complex64>,
    tags: BTreeMap<String, Reality>,
}

fn near_real(z: Complex64) -> bool {
    z.im.abs() <= REALITY_TOL * z.norm().max(1.0)
}

impl Point {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `var`, rejecting values that contradict its reality tag.
    pub fn bind(&mut self, var: &Variable, value: Complex64) -> Result<(), ExprError> {
        let ok = match &var.reality {
            Reality::Real => near_real(value),
            Reality::PositiveReal => near_real(value) && value.re > 0.0,
            Reality::Imaginary => value.re.abs() <= REALITY_TOL * value.norm().max(1.0),
            Reality::UnitModulus => (value.norm() - 1.0).abs() <= 1e-10,
            Reality::ComplexPaired(partner) => match self.values.get(partner.as_ref()) {
                Some(p) => (p.conj() - value).norm() <= 1e-10 * value.norm().max(1.0),
                None => true,
            },
        };
        if !ok {
            return Err(ExprError::Reality(format!(
                "value {value} is incompatible with the tag of `{}`",
                var.name
            )));
        }
        self.values.insert(var.name.to_string(), value);
        self.tags.insert(var.name.to_string(), var.reality.clone());
        Ok(())
    }

    /// Binds a paired variable and its partner at once.
    pub fn bind_pair(&mut self, var: &Variable, value: Complex64) -> Result<(), ExprError> {
        let Reality::ComplexPaired(partner) = &var.reality else {
            return self.bind(var, value);
        };
        self.bind(var, value)?;
        let w = Variable::new(partner, Reality::ComplexPaired(var.name.clone()));
        self.bind(&w, value.conj())
    }

    pub fn get(&self, name: &str) -> Option<Complex64> {
        self.values.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Complex64)> {
        self.values.iter()
    }
}

struct Evaluator<'a> {
    point: &'a Point,
    cache: HashMap<usize, Complex64>,
}

fn real_power(base: Complex64, e: Exponent, what: &dyn Fn() -> String) -> Result<Complex64, ExprError> {
    if e.is_integer() {
        let n = e.to_integer();
        if n < 0 && base.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        return Ok(base.powi(n as i32));
    }
    if !near_real(base) || base.re <= 0.0 {
        return Err(ExprError::Domain(format!(
            "fractional power of non-positive base {} ({base})",
            what()
        )));
    }
    Ok(Complex64::new(base.re.powf(*e.numer() as f64 / *e.denom() as f64), 0.0))
}

impl Evaluator<'_> {
    fn eval(&mut self, e: &ScalarExpr) -> Result<(Complex64, f64), ExprError> {
        let mut total = Complex64::zero();
        let mut scale = 0.0;
        for (m, c) in e.terms() {
            let mut term = c.to_complex();
            for (atom, k) in m.factors() {
                let v = match atom {
                    Atom::Var(v) => {
                        let x = self
                            .point
                            .get(&v.name)
                            .ok_or_else(|| ExprError::Unbound(v.name.to_string()))?;
                        real_power(x, *k, &|| v.name.to_string())?
                    }
                    Atom::Base(p) => {
                        let x = match self.cache.get(&p.node_id()) {
                            Some(x) => *x,
                            None => {
                                let (x, _) = self.eval(p)?;
                                self.cache.insert(p.node_id(), x);
                                x
                            }
                        };
                        real_power(x, *k, &|| format!("({p})"))?
                    }
                };
                term *= v;
            }
            scale += term.norm();
            total += term;
        }
        Ok((total, scale))
    }
}

impl ScalarExpr {
    /// Evaluates in double precision on the principal branch.
    pub fn evaluate(&self, point: &Point) -> Result<Complex64, ExprError> {
        self.evaluate_with_scale(point).map(|(v, _)| v)
    }

    /// Value together with the sum of the absolute values of its terms,
    /// which serves as the magnitude scale for relative zero tests.
    pub fn evaluate_with_scale(&self, point: &Point) -> Result<(Complex64, f64), ExprError> {
        let mut ev = Evaluator {
            point,
            cache: HashMap::new(),
        };
        ev.eval(self)
    }
}

/// Per-variable sampling intervals.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub intervals: BTreeMap<String, (f64, f64)>,
}

impl DomainBox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.intervals.insert(name.to_string(), (lo, hi));
        self
    }

    /// Parses `name=lo:hi,name=lo:hi`.
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        let mut out = DomainBox::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || ExprError::Domain(format!("malformed box entry `{part}`"));
            let (name, range) = part.split_once('=').ok_or_else(bad)?;
            let (lo, hi) = range.split_once(':').ok_or_else(bad)?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            if lo >= hi || !lo.is_finite() || !hi.is_finite() {
                return Err(ExprError::Domain(format!("empty interval for `{}`", name.trim())));
            }
            out.intervals.insert(name.trim().to_string(), (lo, hi));
        }
        Ok(out)
    }

    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        self.intervals.get(name).copied()
    }

    /// Draws a point for the given variables. Imaginary variables take the
    /// value `i·x`; unit-modulus variables `e^{iθ}` (θ from the interval or
    /// the full circle); a paired variable takes real and imaginary parts
    /// from its interval (or its partner's) and the partner gets the conjugate.
    pub fn sample<'a, I>(&self, vars: I, rng: &mut ChaCha8Rng) -> Result<Point, ExprError>
    where
        I: IntoIterator<Item = &'a Variable>,
    {
        let mut point = Point::new();
        for v in vars {
            if point.get(&v.name).is_some() {
                continue;
            }
            let interval = || {
                self.get(&v.name)
                    .ok_or_else(|| ExprError::Domain(format!("no sampling interval for `{}`", v.name)))
            };
            match &v.reality {
                Reality::Real | Reality::PositiveReal => {
                    let (lo, hi) = interval()?;
                    point.bind(v, Complex64::new(rng.gen_range(lo..hi), 0.0))?;
                }
                Reality::Imaginary => {
                    let (lo, hi) = interval()?;
                    point.bind(v, Complex64::new(0.0, rng.gen_range(lo..hi)))?;
                }
                Reality::UnitModulus => {
                    let (lo, hi) = self.get(&v.name).unwrap_or((0.0, TAU));
                    point.bind(v, Complex64::from_polar(1.0, rng.gen_range(lo..hi)))?;
                }
                Reality::ComplexPaired(partner) => {
                    let (lo, hi) = self
                        .get(&v.name)
                        .or_else(|| self.get(partner))
                        .ok_or_else(|| ExprError::Domain(format!("no sampling interval for `{}`", v.name)))?;
                    let z = Complex64::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi));
                    point.bind_pair(v, z)?;
                }
            }
        }
        Ok(point)
    }
}

/// Parameters of a randomized zero test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroTest {
    pub domain: DomainBox,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
}

impl ZeroTest {
    pub fn new(domain: DomainBox) -> Self {
        ZeroTest {
            domain,
            trials: 16,
            seed: 0,
            tol: 1e-9,
        }
    }

    pub fn trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// The sample points this test would use for `e`, one per trial.
    pub fn points(&self, e: &ScalarExpr) -> Result<Vec<Point>, ExprError> {
        let vars = e.variable_objects();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.trials)
            .map(|_| self.domain.sample(vars.iter(), &mut rng))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroVerdict {
    Zero,
    NonZero,
    Inconclusive,
}

/// Randomized zero test: `Zero` iff |e| < tol·(1 + scale) at every sample
/// that evaluates; samples hitting singularities are skipped, and if all of
/// them do the verdict is `Inconclusive`. Structurally zero expressions
/// short-circuit.
pub fn is_identically_zero(e: &ScalarExpr, test: &ZeroTest) -> Result<ZeroVerdict, ExprError> {
    if e.is_zero() {
        return Ok(ZeroVerdict::Zero);
    }
    let mut evaluated = 0usize;
    for point in test.points(e)? {
        match e.evaluate_with_scale(&point) {
            Ok((v, scale)) => {
                evaluated += 1;
                // a NaN sample counts as non-zero
                if v.norm().is_nan() || v.norm() >= test.tol * (1.0 + scale) {
                    return Ok(ZeroVerdict::NonZero);
                }
            }
            Err(ExprError::Domain(_)) | Err(ExprError::DivisionByZero) => {}
            Err(other) => return Err(other),
        }
    }
    Ok(if evaluated == 0 {
        ZeroVerdict::Inconclusive
    } else {
        ZeroVerdict::Zero
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reality_checked_on_bind() {
        let mut p = Point::new();
        assert!(p.bind(&Variable::real("x"), Complex64::new(1.0, 1.0)).is_err());
        assert!(p.bind(&Variable::positive("u"), Complex64::new(-1.0, 0.0)).is_err());
        assert!(p.bind(&Variable::imaginary("l"), Complex64::new(0.0, 2.0)).is_ok());
    }

    #[test]
    fn box_parsing() {
        let b = DomainBox::parse("t1=0.02:0.08, t2=0.1:1").unwrap();
        assert_eq!(b.get("t2"), Some((0.1, 1.0)));
        assert!(DomainBox::parse("t1=1:0").is_err());
        assert!(DomainBox::parse("t1").is_err());
    }
}
