use std::collections::BTreeMap;

use crc_core::expr::{parse, Point, ScalarExpr, Variable, VariableTable};
use crc_core::exterior::{Chart, ChartBuilder, FormExpr};
use num_complex::Complex64;
use proptest::prelude::*;

fn real_table() -> VariableTable {
    let mut t = VariableTable::new();
    t.declare(Variable::real("x")).unwrap();
    t.declare(Variable::real("y")).unwrap();
    t
}

fn complex_table() -> VariableTable {
    let mut t = VariableTable::new();
    t.declare(Variable::real("x")).unwrap();
    t.declare_pair("z", "zb").unwrap();
    t.declare(Variable::imaginary("m")).unwrap();
    t.declare(Variable::unit("a")).unwrap();
    t.declare(Variable::positive("p")).unwrap();
    t
}

/// Real expression text, kept away from singularities: every division
/// and fractional power acts on `1 + e²` or `2 + e²`.
fn expr_text(leaves: &'static [&'static str], depth: u32) -> impl Strategy<Value = String> {
    let leaf = prop::sample::select(leaves).prop_map(str::to_string);
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) - ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            inner.clone().prop_map(|a| format!("({a})^2")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("1/(2 + ({a})^2)")),
            inner.prop_map(|a| format!("(1 + ({a})^2)^(-3/4)")),
        ]
    })
}

/// Complex expression text. Complex subterms are only added, multiplied
/// and squared; singular operations are confined to the leaves.
fn complex_text(leaves: &'static [&'static str], depth: u32) -> impl Strategy<Value = String> {
    let leaf = prop::sample::select(leaves).prop_map(str::to_string);
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) - ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            inner.prop_map(|a| format!("({a})^2")),
        ]
    })
}

const REAL_LEAVES: &[&str] = &["x", "y", "2", "1/3", "x*y", "-x"];
const COMPLEX_LEAVES: &[&str] = &[
    "x",
    "z",
    "zb",
    "m",
    "a",
    "1/a",
    "p^(-1/2)",
    "sqrt(1 + x^2)",
    "i",
    "3/2",
    "i*z",
    "a*zb",
    "m/(2 + x^2)",
];

fn real_point(x: f64, y: f64) -> Point {
    let mut p = Point::new();
    p.bind(&Variable::real("x"), x.into()).unwrap();
    p.bind(&Variable::real("y"), y.into()).unwrap();
    p
}

fn complex_point(t: &VariableTable, x: f64, z: Complex64, m: f64, arg: f64, p: f64) -> Point {
    let mut pt = Point::new();
    pt.bind(t.get("x").unwrap(), x.into()).unwrap();
    pt.bind_pair(t.get("z").unwrap(), z).unwrap();
    pt.bind(t.get("m").unwrap(), Complex64::new(0.0, m)).unwrap();
    pt.bind(t.get("a").unwrap(), Complex64::from_polar(1.0, arg)).unwrap();
    pt.bind(t.get("p").unwrap(), p.into()).unwrap();
    pt
}

/// Fourth-order central difference in `x`.
fn finite_difference(e: &ScalarExpr, x: f64, y: f64) -> f64 {
    let h = 1e-3;
    let f = |s: f64| e.evaluate(&real_point(x + s * h, y)).unwrap().re;
    (8.0 * (f(1.0) - f(-1.0)) - (f(2.0) - f(-2.0))) / (12.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivative_matches_finite_difference(
        text in expr_text(REAL_LEAVES, 3),
        x in 0.2f64..1.0,
        y in 0.2f64..1.0,
    ) {
        let e = parse(&text, &real_table()).unwrap();
        let symbolic = e.differentiate("x").evaluate(&real_point(x, y)).unwrap();
        prop_assert!(symbolic.im.abs() < 1e-9);
        let fd = finite_difference(&e, x, y);
        let err = (fd - symbolic.re).abs() / symbolic.re.abs().max(1.0);
        prop_assert!(err < 1e-5, "{text}: fd {fd} vs {}", symbolic.re);
    }

    #[test]
    fn conjugation_is_an_involution(
        text in complex_text(COMPLEX_LEAVES, 3),
        x in -1.0f64..1.0,
        zr in -1.0f64..1.0,
        zi in -1.0f64..1.0,
        m in -1.0f64..1.0,
        arg in 0.0f64..std::f64::consts::TAU,
        p in 0.5f64..2.0,
    ) {
        let t = complex_table();
        let e = parse(&text, &t).unwrap();
        let cc = e.conjugate().conjugate();
        prop_assert!((&cc - &e).is_zero_exact(), "{text}: {cc}");
        let pt = complex_point(&t, x, Complex64::new(zr, zi), m, arg, p);
        let v = e.evaluate(&pt).unwrap();
        let w = e.conjugate().evaluate(&pt).unwrap();
        prop_assert!((w - v.conj()).norm() <= 1e-9 * v.norm().max(1.0), "{text}: {v} vs {w}");
    }

    #[test]
    fn printing_round_trips(text in complex_text(COMPLEX_LEAVES, 3)) {
        let t = complex_table();
        let e = parse(&text, &t).unwrap();
        let again = parse(&e.to_string(), &t).unwrap();
        prop_assert!((&again - &e).is_zero_exact(), "{text} printed as {e}");
    }
}

/// Coordinates x, y and z with exact differentials, plus a generator `w`
/// with `dw = dx∧dy`.
fn coordinate_chart() -> Chart {
    let chart = ChartBuilder::new("props")
        .var(Variable::real("x"))
        .unwrap()
        .var(Variable::real("y"))
        .unwrap()
        .pair_var("z", "zb")
        .unwrap()
        .real_gen("dx")
        .real_gen("dy")
        .pair_gen("dz", "dzb")
        .real_gen("w")
        .finish()
        .unwrap();
    let mut gens = BTreeMap::new();
    for g in ["dx", "dy", "dz"] {
        gens.insert(g.to_string(), FormExpr::zero(&chart, 2));
    }
    gens.insert("w".to_string(), &chart.g("dx") ^ &chart.g("dy"));
    let mut vars = BTreeMap::new();
    vars.insert("x".to_string(), chart.g("dx"));
    vars.insert("y".to_string(), chart.g("dy"));
    vars.insert("z".to_string(), chart.g("dz"));
    chart.install_rules(gens, vars).unwrap();
    chart
}

const FORM_LEAVES: &[&str] = &[
    "x",
    "y",
    "z",
    "zb",
    "i",
    "2",
    "x*z",
    "sqrt(1 + y^2)",
    "1/(2 + x^2)",
    "(1 + x^2*y^2)^(-3/4)",
];
const ONE_FORMS: [&str; 5] = ["dx", "dy", "dz", "dzb", "w"];

fn one_form(chart: &Chart, coeffs: &[String]) -> FormExpr {
    let t = chart.variables();
    let mut f = FormExpr::zero(chart, 1);
    for (g, c) in ONE_FORMS.iter().zip(coeffs) {
        f = &f + &(&parse(c, t).unwrap() * &chart.g(g));
    }
    f
}

fn coefficients() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(complex_text(FORM_LEAVES, 2), ONE_FORMS.len())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn d_squared_vanishes(f0 in complex_text(FORM_LEAVES, 3), c in coefficients()) {
        let chart = coordinate_chart();
        let scalar = FormExpr::scalar(&chart, parse(&f0, chart.variables()).unwrap());
        prop_assert!(scalar.d().unwrap().d().unwrap().is_zero_exact());
        let f1 = one_form(&chart, &c);
        prop_assert!(f1.d().unwrap().d().unwrap().is_zero_exact());
    }

    #[test]
    fn leibniz_rule(f0 in complex_text(FORM_LEAVES, 2), a in coefficients(), b in coefficients()) {
        let chart = coordinate_chart();
        let g = FormExpr::scalar(&chart, parse(&f0, chart.variables()).unwrap());
        let (alpha, beta) = (one_form(&chart, &a), one_form(&chart, &b));
        let lhs = (&alpha ^ &beta).d().unwrap();
        let rhs = &(&alpha.d().unwrap() ^ &beta) - &(&alpha ^ &beta.d().unwrap());
        prop_assert!((&lhs - &rhs).is_zero_exact());
        let lhs = (&g ^ &alpha).d().unwrap();
        let rhs = &(&g.d().unwrap() ^ &alpha) + &(&g ^ &alpha.d().unwrap());
        prop_assert!((&lhs - &rhs).is_zero_exact());
    }
}

#[test]
fn reports_are_deterministic_under_a_fixed_seed() {
    use crc_core::dga::{verify_suite, Suite};
    use crc_core::expr::DomainBox;
    use crc_core::tube::{analyze, Sampling};

    let json = |r: &crc_core::report::Report| serde_json::to_string(&r.without_timing()).unwrap();
    assert_eq!(json(&verify_suite(Suite::Cartan)), json(&verify_suite(Suite::Cartan)));
    let run = || {
        let domain = DomainBox::parse("t1=0.1:1,t2=0.5:2").unwrap();
        let a = analyze(
            "t1^2/t2",
            domain,
            Sampling {
                seed: 11,
                ..Sampling::default()
            },
        )
        .unwrap();
        serde_json::to_string(&a.without_timing()).unwrap()
    };
    assert_eq!(run(), run());
}
