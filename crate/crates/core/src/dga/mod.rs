//! Abstract coframe on the second prolongation bundle: generators ω, ω¹,
//! θ², φ¹, φ², ψ whose differentials are the model structure equations
//! plus curvature 2-forms Θ², Φ¹, Φ², Ψ. On this chart the gauge-shift
//! formulas, the equivariance of the curvature under H² and the
//! computations behind the Cartan-connection criterion are verified exactly.

mod checks;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::expr::{ScalarExpr, Variable};
use crate::exterior::{Chart, ChartBuilder, FormError, FormExpr};

pub use checks::{
    necessity_phi1_coefficient, verify_cartan_criterion, verify_equivariance, verify_gauge_shifts, verify_suite,
    GaugeStep, Suite, GAUGE_ORDER, LEADING_TERMS, NECESSITY_PHI1,
};

/// Generators in chart order.
pub const GENERATORS: [&str; 10] = [
    "omega", "omega1", "omega1b", "theta2", "theta2b", "phi1", "phi1b", "phi2", "phi2b", "psi",
];

/// Gauge functions of the normalization: c, f, r complex, g, s real.
pub const GAUGE: [&str; 5] = ["c", "f", "g", "r", "s"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Curvatures are generic 2-forms with one symbol per word, subject
    /// only to the reality conditions Re Φ² = 0 and Re Ψ = 0.
    Opaque,
    /// All curvatures zero: the structure equations of the homogeneous model.
    Flat,
    Expanded(Expansion),
}

/// Options of the expanded curvature expansions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Expansion {
    /// Keep the coefficients fixed by the normalization (Θ²₂₁̄, Θ²₁₁̄,
    /// Φ²₁₁̄, Φ¹₁₁̄ = Θ²₁₀ − conj Φ²₁₀, Ψ₁₁̄ = Re Φ¹₁₀) as free symbols
    /// instead of imposing their vanishing.
    pub free_normalizations: bool,
    /// Coefficient symbols set to zero.
    pub vanishing: BTreeSet<String>,
}

impl Expansion {
    pub fn normalized() -> Self {
        Self::default()
    }

    pub fn free() -> Self {
        Expansion {
            free_normalizations: true,
            ..Self::default()
        }
    }

    pub fn vanishing<'a>(mut self, names: impl IntoIterator<Item = &'a str>) -> Self {
        self.vanishing.extend(names.into_iter().map(String::from));
        self
    }
}

/// Paired coefficient symbols of the expanded mode; the partner carries a
/// trailing `c`.
const EXPANDED_PAIRS: [&str; 16] = [
    "Th2_21", "Th2_20", "Th2_10", "Th2_b10", "Ph2_20", "Ph2_10", "Ph1_20", "Ph1_b20", "Ph1_10", "Ph1_b10", "P1", "P2",
    "P3", "Q1", "Ps_20", "Ps_10",
];

/// The chart with rules, a rule-free copy with the same generators and
/// variables for reading coefficients in a transformed basis, and the
/// curvature forms.
#[derive(Clone, Debug)]
pub struct AbstractP2 {
    pub chart: Chart,
    pub target: Chart,
    pub mode: Mode,
    /// Θ², Φ¹, Φ², Ψ on `chart`.
    pub curvature: [FormExpr; 4],
}

enum Sym {
    Pair(String),
    Real(String),
    Imag(String),
}

fn symbols(mode: &Mode) -> Vec<Sym> {
    let mut out = vec![Sym::Pair("B".into()), Sym::Imag("Lam".into()), Sym::Pair("A".into())];
    for x in GAUGE {
        out.push(if matches!(x, "g" | "s") {
            Sym::Real(x.into())
        } else {
            Sym::Pair(x.into())
        });
        for k in 0..GENERATORS.len() {
            out.push(Sym::Pair(format!("{x}_d{k}")));
        }
    }
    match mode {
        Mode::Flat => {}
        Mode::Opaque => {
            for k in ["KT", "KF1", "KF2", "KPs"] {
                for i in 0..GENERATORS.len() {
                    for j in i + 1..GENERATORS.len() {
                        out.push(Sym::Pair(format!("{k}_{i}_{j}")));
                    }
                }
            }
        }
        Mode::Expanded(e) => {
            for name in EXPANDED_PAIRS {
                if e.vanishing.contains(name) {
                    continue;
                }
                match name {
                    "Ph2_10" if !e.free_normalizations => {}
                    "Ph1_10" if !e.free_normalizations => out.push(Sym::Imag(name.into())),
                    _ => out.push(Sym::Pair(name.into())),
                }
            }
            if !e.vanishing.contains("Q3") {
                out.push(Sym::Imag("Q3".into()));
            }
            if e.free_normalizations {
                out.push(Sym::Pair("Th2_2b1".into()));
                out.push(Sym::Pair("Th2_11".into()));
                out.push(Sym::Real("Ph2_11".into()));
            }
        }
    }
    out
}

fn builder(name: &str, syms: &[Sym]) -> Result<ChartBuilder, FormError> {
    let mut b = ChartBuilder::new(name);
    for s in syms {
        b = match s {
            Sym::Pair(n) => {
                let partner = if is_constant(n) {
                    format!("{n}b")
                } else {
                    format!("{n}c")
                };
                let b = b.pair_var(n, &partner)?;
                if is_constant(n) {
                    b
                } else {
                    b.placeholder(n).placeholder(&partner)
                }
            }
            Sym::Real(n) => b.var(Variable::real(n))?.placeholder(n),
            Sym::Imag(n) => {
                let b = b.var(Variable::imaginary(n))?;
                if is_constant(n) {
                    b
                } else {
                    b.placeholder(n)
                }
            }
        };
    }
    Ok(b.imag_gen("omega")
        .pair_gen("omega1", "omega1b")
        .pair_gen("theta2", "theta2b")
        .pair_gen("phi1", "phi1b")
        .pair_gen("phi2", "phi2b")
        .imag_gen("psi"))
}

/// B, Λ and A parametrize a fixed group element and have zero differential.
fn is_constant(name: &str) -> bool {
    matches!(name, "B" | "Lam" | "A")
}

struct Ctx<'a> {
    chart: &'a Chart,
    vanishing: &'a BTreeSet<String>,
}

impl Ctx<'_> {
    fn g(&self, name: &str) -> FormExpr {
        self.chart.g(name)
    }

    fn s(&self, name: &str) -> ScalarExpr {
        if self.vanishing.contains(name) {
            ScalarExpr::zero()
        } else {
            self.chart.v(name)
        }
    }
}

fn half() -> ScalarExpr {
    ScalarExpr::ratio(1, 2)
}

fn generic_two_form(chart: &Chart, key: &str) -> FormExpr {
    let mut acc = FormExpr::zero(chart, 2);
    for (i, a) in GENERATORS.iter().enumerate() {
        for (j, b) in GENERATORS.iter().enumerate().skip(i + 1) {
            let w = &chart.g(a) ^ &chart.g(b);
            acc = &acc + &(&chart.v(&format!("{key}_{i}_{j}")) * &w);
        }
    }
    acc
}

fn opaque_curvature(chart: &Chart) -> Result<[FormExpr; 4], FormError> {
    let theta = generic_two_form(chart, "KT");
    let phi1 = generic_two_form(chart, "KF1");
    let x = generic_two_form(chart, "KF2");
    let phi2 = &x - &x.conjugate_form()?;
    let y = generic_two_form(chart, "KPs");
    let psi = &y - &y.conjugate_form()?;
    Ok([theta, phi1, phi2, psi])
}

fn expanded_curvature(cx: &Ctx, e: &Expansion) -> Result<[FormExpr; 4], FormError> {
    let g = |n: &str| cx.g(n);
    let s = |n: &str| cx.s(n);
    let sc = |n: &str| cx.s(n).conjugate();
    let (om, om1, om1b, t2, t2b) = (g("omega"), g("omega1"), g("omega1b"), g("theta2"), g("theta2b"));
    let (p1, p1b, ps) = (g("phi1"), g("phi1b"), g("psi"));

    // Φ²₁₀; under the normalization Φ¹₁₁̄ = 0 its conjugate equals Θ²₁₀.
    let ph2_10 = if e.free_normalizations {
        s("Ph2_10")
    } else {
        sc("Th2_10")
    };

    let mut theta = &(&s("Th2_21") * &(&t2 ^ &om1)) + &(&s("Th2_20") * &(&t2 ^ &om));
    theta = &theta + &(&s("Th2_10") * &(&om1 ^ &om));
    theta = &theta + &(&s("Th2_b10") * &(&om1b ^ &om));

    let h = half();
    let mut phi2_0 = &(&(&h * &s("Th2_21")) * &p1) + &(&(&h * &sc("Th2_21")) * &p1b);
    phi2_0 = &phi2_0 + &(&s("Ph2_20") * &t2);
    phi2_0 = &phi2_0 + &(&sc("Ph2_20") * &t2b);
    phi2_0 = &phi2_0 + &(&ph2_10 * &om1);
    phi2_0 = &phi2_0 + &(&ph2_10.conjugate() * &om1b);

    let mut phi2 = &(&s("Th2_21") * &(&t2 ^ &om1b)) + &(&sc("Th2_21") * &(&om1 ^ &t2b));
    phi2 = &phi2 + &(&phi2_0 ^ &om);

    let mut phi1_0 = &(&s("P1") * &p1) + &(&s("P2") * &p1b);
    phi1_0 = &phi1_0 + &(&s("P3") * &ps);
    phi1_0 = &phi1_0 + &(&s("Ph1_20") * &t2);
    phi1_0 = &phi1_0 + &(&s("Ph1_b20") * &t2b);
    phi1_0 = &phi1_0 + &(&s("Ph1_10") * &om1);
    phi1_0 = &phi1_0 + &(&s("Ph1_b10") * &om1b);

    let mut phi1 = &s("Th2_20") * &(&t2 ^ &om1b);
    phi1 = &phi1 + &(&(&phi2_0 - &(&s("Th2_10") * &om1b)) ^ &om1);
    phi1 = &phi1 + &(&phi1_0 ^ &om);

    let mut x = &(&s("Q1") * &p1) + &(&(&h * &s("Q3")) * &ps);
    x = &x + &(&s("Ps_20") * &t2);
    x = &x + &(&s("Ps_10") * &om1);
    let psi_0 = &x + &x.conjugate_form()?;
    let mut psi = &(-&(&h * &phi1_0.conjugate_form()?)) ^ &om1;
    psi = &psi + &(&(&h * &phi1_0) ^ &om1b);
    psi = &psi + &(&psi_0 ^ &om);

    if e.free_normalizations {
        theta = &theta + &(&s("Th2_2b1") * &(&t2 ^ &om1b));
        theta = &theta + &(&s("Th2_11") * &(&om1 ^ &om1b));
        phi2 = &phi2 + &(&s("Ph2_11") * &(&om1 ^ &om1b));
    }
    Ok([theta, phi1, phi2, psi])
}

fn structure_rules(cx: &Ctx, curvature: &[FormExpr; 4]) -> BTreeMap<String, FormExpr> {
    let g = |n: &str| cx.g(n);
    let (om, om1, om1b, t2, t2b) = (g("omega"), g("omega1"), g("omega1b"), g("theta2"), g("theta2b"));
    let (p1, p1b, p2, p2b, ps) = (g("phi1"), g("phi1b"), g("phi2"), g("phi2b"), g("psi"));
    let phi = &p2 + &p2b;
    let [k_theta, k_phi1, k_phi2, k_psi] = curvature;
    let mut rules = BTreeMap::new();
    rules.insert("omega".into(), &(-&(&om1 ^ &om1b)) - &(&om ^ &phi));
    rules.insert("omega1".into(), &(&(&t2 ^ &om1b) - &(&om1 ^ &p2)) - &(&om ^ &p1));
    rules.insert("theta2".into(), &(k_theta - &(&t2 ^ &(&p2 - &p2b))) + &(&om1 ^ &p1));
    rules.insert(
        "phi1".into(),
        &(&(k_phi1 - &(&t2 ^ &p1b)) + &(&om1 ^ &ps)) + &(&p1 ^ &p2b),
    );
    rules.insert(
        "phi2".into(),
        &(&(k_phi2 + &(&t2 ^ &t2b)) + &(&om1 ^ &p1b)) + &(&om ^ &ps),
    );
    rules.insert("psi".into(), &(k_psi - &(&p1 ^ &p1b)) - &(&phi ^ &ps));
    rules
}

fn variable_rules(chart: &Chart) -> Result<BTreeMap<String, FormExpr>, FormError> {
    let mut rules = BTreeMap::new();
    for name in ["B", "Lam", "A"] {
        rules.insert(name.to_string(), FormExpr::zero(chart, 1));
    }
    for x in GAUGE {
        let mut acc = FormExpr::zero(chart, 1);
        for (k, gen) in GENERATORS.iter().enumerate() {
            acc = &acc + &(&chart.v(&format!("{x}_d{k}")) * &chart.g(gen));
        }
        if matches!(x, "g" | "s") {
            acc = &acc + &acc.conjugate_form()?;
        }
        rules.insert(x.to_string(), acc);
    }
    Ok(rules)
}

/// Builds the abstract chart. Flat mode has placeholder-free rules, so the
/// checked installation certifies d∘d = 0 on every generator.
pub fn build_chart(mode: Mode) -> Result<AbstractP2, FormError> {
    let syms = symbols(&mode);
    let chart = builder("P2", &syms)?.finish()?;
    let target = builder("P2-target", &syms)?.finish()?;
    let none = BTreeSet::new();
    let curvature = match &mode {
        Mode::Flat => std::array::from_fn(|_| FormExpr::zero(&chart, 2)),
        Mode::Opaque => opaque_curvature(&chart)?,
        Mode::Expanded(e) => expanded_curvature(
            &Ctx {
                chart: &chart,
                vanishing: &e.vanishing,
            },
            e,
        )?,
    };
    let cx = Ctx {
        chart: &chart,
        vanishing: &none,
    };
    let rules = structure_rules(&cx, &curvature);
    chart.install_rules(rules, variable_rules(&chart)?)?;
    Ok(AbstractP2 {
        chart,
        target,
        mode,
        curvature,
    })
}

/// The six basic 1-forms (ω, ω¹, θ², φ¹, φ², ψ) and their derived 2-forms.
#[derive(Clone, Debug)]
pub struct Coframe {
    pub omega: FormExpr,
    pub omega1: FormExpr,
    pub theta2: FormExpr,
    pub phi1: FormExpr,
    pub phi2: FormExpr,
    pub psi: FormExpr,
}

impl Coframe {
    pub fn from_array([omega, omega1, theta2, phi1, phi2, psi]: [FormExpr; 6]) -> Self {
        Coframe {
            omega,
            omega1,
            theta2,
            phi1,
            phi2,
            psi,
        }
    }

    pub fn standard(chart: &Chart) -> Self {
        Coframe::from_array(["omega", "omega1", "theta2", "phi1", "phi2", "psi"].map(|n| chart.g(n)))
    }

    /// Θ², Φ¹, Φ², Ψ computed from their defining formulas.
    pub fn curvature(&self) -> Result<[FormExpr; 4], FormError> {
        let Coframe {
            omega,
            omega1,
            theta2,
            phi1,
            phi2,
            psi,
        } = self;
        let (t2b, p1b, p2b) = (theta2.conjugate_form()?, phi1.conjugate_form()?, phi2.conjugate_form()?);
        let theta = &(&theta2.d()? + &(theta2 ^ &(phi2 - &p2b))) - &(omega1 ^ phi1);
        let k_phi1 = &(&(&phi1.d()? + &(theta2 ^ &p1b)) - &(omega1 ^ psi)) - &(phi1 ^ &p2b);
        let k_phi2 = &(&(&phi2.d()? - &(theta2 ^ &t2b)) - &(omega1 ^ &p1b)) - &(omega ^ psi);
        let k_psi = &(&psi.d()? + &(phi1 ^ &p1b)) + &(&(phi2 + &p2b) ^ psi);
        Ok([theta, k_phi1, k_phi2, k_psi])
    }

    /// Expresses each member in the basis of `target` through `sub`.
    pub fn rewrite(&self, target: &Chart, sub: &HashMap<String, FormExpr>) -> Result<Coframe, FormError> {
        let f = |x: &FormExpr| x.rewrite_basis(target, sub, None);
        Ok(Coframe {
            omega: f(&self.omega)?,
            omega1: f(&self.omega1)?,
            theta2: f(&self.theta2)?,
            phi1: f(&self.phi1)?,
            phi2: f(&self.phi2)?,
            psi: f(&self.psi)?,
        })
    }

    /// Substitution sending every generator (and its conjugate) to the
    /// corresponding member of this coframe.
    pub fn as_substitution(&self) -> Result<HashMap<String, FormExpr>, FormError> {
        let mut sub = HashMap::new();
        for (name, f) in [
            ("omega", &self.omega),
            ("omega1", &self.omega1),
            ("theta2", &self.theta2),
            ("phi1", &self.phi1),
            ("phi2", &self.phi2),
            ("psi", &self.psi),
        ] {
            if !matches!(name, "omega" | "psi") {
                sub.insert(format!("{name}b"), f.conjugate_form()?);
            }
            sub.insert(name.to_string(), f.clone());
        }
        Ok(sub)
    }
}
