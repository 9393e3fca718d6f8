use std::collections::{BTreeMap, HashMap};

use serde_json::json;

use super::{build_chart, AbstractP2, Coframe, Expansion, Mode};
use crate::expr::{parse, ScalarExpr};
use crate::exterior::{Chart, FormError, FormExpr};
use crate::model::{table_forms, H1_CHECKS, H2_HATS};
use crate::report::{Check, Report, Status};

type Res<T> = Result<T, FormError>;

/// Leading curvature coefficients, together with the coefficients that
/// vanish with them.
pub const LEADING_TERMS: [&str; 9] = ["Th2_21", "Th2_20", "Ph1_20", "Ph2_20", "P1", "P2", "P3", "Q1", "Q3"];

/// The normalization fixes c, f, g, r, s one after another; each shift is
/// read with the earlier functions already zero.
/// (label, curvature index, word, functions already fixed, expected shift)
pub type GaugeStep = (
    &'static str,
    usize,
    [&'static str; 2],
    &'static [&'static str],
    &'static str,
);

pub const GAUGE_ORDER: [GaugeStep; 5] = [
    ("theta2_2_1b", 0, ["theta2", "omega1b"], &[], "-3*c"),
    ("theta2_1_1b", 0, ["omega1", "omega1b"], &["c"], "2*f"),
    ("phi2_1_1b", 2, ["omega1", "omega1b"], &["c", "f"], "2*g"),
    ("phi1_1_1b", 1, ["omega1", "omega1b"], &["c", "f", "g"], "3*r/2"),
    ("psi_1_1b", 3, ["omega1", "omega1b"], &["c", "f", "g", "r"], "s"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Shifts,
    Equivariance,
    Cartan,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "shifts" => Ok(Suite::Shifts),
            "equivariance" => Ok(Suite::Equivariance),
            "cartan" => Ok(Suite::Cartan),
            other => Err(format!(
                "unknown suite `{other}` (expected shifts, equivariance or cartan)"
            )),
        }
    }
}

pub fn verify_suite(suite: Suite) -> Report {
    match suite {
        Suite::Shifts => verify_gauge_shifts(),
        Suite::Equivariance => verify_equivariance(),
        Suite::Cartan => verify_cartan_criterion(),
    }
}

fn scalar(chart: &Chart, text: &str) -> Res<ScalarExpr> {
    Ok(parse(text, chart.variables())?)
}

fn form_check(name: &str, residual: &FormExpr) -> Check {
    let ok = residual.is_zero_exact();
    Check::new(
        name,
        Status::from_bool(ok),
        json!({ "residual": if ok { "0".to_string() } else { residual.to_string() } }),
    )
}

fn scalar_check(name: &str, got: &ScalarExpr, want: &ScalarExpr) -> Check {
    let diff = got - want;
    let ok = diff.is_zero_exact();
    Check::new(
        name,
        Status::from_bool(ok),
        json!({
            "computed": got.to_string(),
            "expected": want.to_string(),
            "difference": if ok { "0".to_string() } else { diff.to_string() },
        }),
    )
}

fn failure(report: &mut Report, name: &str, e: FormError) {
    report.push(Check::new(name, Status::Fail, json!({ "error": e.to_string() })));
}

fn gauge(chart: &Chart, name: &str, fixed: &[&str]) -> ScalarExpr {
    if fixed.contains(&name) {
        ScalarExpr::zero()
    } else {
        chart.v(name)
    }
}

/// The gauge-transformed coframe θ̃², φ̃¹, φ̃², ψ̃ written on `chart`.
fn tilde_coframe(chart: &Chart, fixed: &[&str]) -> Coframe {
    let p = |n: &str| gauge(chart, n, fixed);
    let (c, f, g, r, s) = (p("c"), p("f"), p("g"), p("r"), p("s"));
    let (om, om1, om1b) = (chart.g("omega"), chart.g("omega1"), chart.g("omega1b"));
    let h = ScalarExpr::ratio(1, 2);
    let theta2 = &(&chart.g("theta2") - &(&c * &om1)) - &(&f * &om);
    let phi2 = &(&(&chart.g("phi2") + &(&c.conjugate() * &om1)) - &(&c * &om1b)) - &(&g * &om);
    let phi1 = &(&(&chart.g("phi1") - &(&g * &om1)) - &(&f * &om1b)) - &(&r * &om);
    let psi = &(&(&chart.g("psi") + &(&(&h * &r.conjugate()) * &om1)) - &(&(&h * &r) * &om1b)) - &(&s * &om);
    Coframe {
        omega: om,
        omega1: om1,
        theta2,
        phi1,
        phi2,
        psi,
    }
}

/// The gauge transformation as given: the original coframe in terms of the
/// transformed one, on `target`.
fn gauge_substitution(target: &Chart, fixed: &[&str]) -> Res<HashMap<String, FormExpr>> {
    let p = |n: &str| gauge(target, n, fixed);
    let (c, f, g, r, s) = (p("c"), p("f"), p("g"), p("r"), p("s"));
    let (om, om1, om1b) = (target.g("omega"), target.g("omega1"), target.g("omega1b"));
    let h = ScalarExpr::ratio(1, 2);
    let theta2 = &(&target.g("theta2") + &(&c * &om1)) + &(&f * &om);
    let phi2 = &(&(&target.g("phi2") - &(&c.conjugate() * &om1)) + &(&c * &om1b)) + &(&g * &om);
    let phi1 = &(&(&target.g("phi1") + &(&g * &om1)) + &(&f * &om1b)) + &(&r * &om);
    let psi = &(&(&target.g("psi") - &(&(&h * &r.conjugate()) * &om1)) + &(&(&h * &r) * &om1b)) + &(&s * &om);
    Coframe {
        omega: om,
        omega1: om1,
        theta2,
        phi1,
        phi2,
        psi,
    }
    .as_substitution()
}

/// Gauge shifts of the five normalized curvature coefficients.
pub fn verify_gauge_shifts() -> Report {
    let mut report = Report::new("dga-shifts", json!({ "mode": "expanded, normalizations free" }));
    if let Err(e) = run_shifts(&mut report) {
        failure(&mut report, "shifts", e);
    }
    report
}

fn run_shifts(report: &mut Report) -> Res<()> {
    let p2 = build_chart(Mode::Expanded(Expansion::free()))?;
    for (label, k, word, fixed, shift) in GAUGE_ORDER {
        let before = p2.curvature[k].coefficient(&word)?;
        let tilde = tilde_coframe(&p2.chart, fixed).curvature()?;
        let sub = gauge_substitution(&p2.target, fixed)?;
        let after = tilde[k].rewrite_basis(&p2.target, &sub, None)?.coefficient(&word)?;
        let want = &before + &scalar(&p2.chart, shift)?;
        let mut check = scalar_check(label, &after, &want);
        check.details["already_fixed"] = json!(fixed);
        check.details["shift"] = json!(shift);
        report.push(check);
    }
    Ok(())
}

/// The H²-transformed coframe (B, Λ constant) on the chart.
fn hat_coframe(chart: &Chart) -> Res<Coframe> {
    Ok(Coframe::from_array(table_forms(chart, &H2_HATS)?))
}

/// The original coframe in terms of the H²-transformed one, on `target`:
/// the same table at (−B, −Λ).
fn hat_substitution(target: &Chart) -> Res<HashMap<String, FormExpr>> {
    let mut flip = BTreeMap::new();
    for v in ["B", "Bb", "Lam"] {
        flip.insert(v.to_string(), -&target.v(v));
    }
    let forms = table_forms(target, &H2_HATS)?.map(|f| f.substitute_unchecked(&flip));
    Coframe::from_array(forms).as_substitution()
}

/// `Ad(h₂)` acts on the curvature as it does on the coframe.
pub fn verify_equivariance() -> Report {
    let mut report = Report::new("dga-equivariance", json!({ "mode": "opaque" }));
    if let Err(e) = run_equivariance(&mut report) {
        failure(&mut report, "equivariance", e);
    }
    report
}

/// Right-hand sides Θ², Φ¹ + BΘ² − B̄Φ², Φ², Ψ + (B²/2)Θ² − (B̄²/2)Θ²̄ + BΦ¹ − B̄Φ¹̄ − |B|²Φ².
fn equivariant_images(chart: &Chart, k: &[FormExpr; 4]) -> Res<[FormExpr; 4]> {
    let b = chart.v("B");
    let bb = b.conjugate();
    let h = ScalarExpr::ratio(1, 2);
    let [theta, phi1, phi2, psi] = k;
    let phi1_hat = &(phi1 + &(&b * theta)) - &(&bb * phi2);
    let mut psi_hat = psi + &(&(&h * &(&b * &b)) * theta);
    psi_hat = &psi_hat - &(&(&h * &(&bb * &bb)) * &theta.conjugate_form()?);
    psi_hat = &psi_hat + &(&b * phi1);
    psi_hat = &psi_hat - &(&bb * &phi1.conjugate_form()?);
    psi_hat = &psi_hat - &(&(&b * &bb) * phi2);
    Ok([theta.clone(), phi1_hat, phi2.clone(), psi_hat])
}

const CURVATURE_NAMES: [&str; 4] = ["theta2", "phi1", "phi2", "psi"];

fn run_equivariance(report: &mut Report) -> Res<()> {
    let p2 = build_chart(Mode::Opaque)?;
    let k = Coframe::standard(&p2.chart).curvature()?;
    for (name, (got, want)) in CURVATURE_NAMES.iter().zip(k.iter().zip(&p2.curvature)) {
        report.push(form_check(&format!("definition_{name}"), &(got - want)));
    }
    let hat = hat_coframe(&p2.chart)?.curvature()?;
    let want = equivariant_images(&p2.chart, &k)?;
    for (name, (got, want)) in CURVATURE_NAMES.iter().zip(hat.iter().zip(&want)) {
        report.push(form_check(&format!("hat_{name}"), &(got - want)));
    }
    // conjugate identity, computed independently from the conjugate coframe
    let hc = hat_coframe(&p2.chart)?;
    let (t2, p1, p1b, p2b, psi, om1b) = (
        hc.theta2.conjugate_form()?,
        hc.phi1.conjugate_form()?,
        hc.phi1.clone(),
        hc.phi2.clone(),
        hc.psi.conjugate_form()?,
        hc.omega1.conjugate_form()?,
    );
    let phi1b_hat = &(&(&p1.d()? + &(&t2 ^ &p1b)) - &(&om1b ^ &psi)) - &(&p1 ^ &p2b);
    report.push(form_check(
        "hat_phi1_conjugate",
        &(&phi1b_hat - &want[1].conjugate_form()?),
    ));
    Ok(())
}

/// Reads `word` of a curvature form in the H²-transformed basis.
fn hat_coefficient(p2: &AbstractP2, k: &FormExpr, word: &[&str]) -> Res<ScalarExpr> {
    k.rewrite_basis(&p2.target, &hat_substitution(&p2.target)?, None)?
        .coefficient(word)
}

fn terms(chart: &Chart, list: &[(&str, &str, &str)]) -> Res<FormExpr> {
    let mut acc = FormExpr::zero(chart, 2);
    for (coeff, a, b) in list {
        acc = &acc + &(&scalar(chart, coeff)? * &(&chart.g(a) ^ &chart.g(b)));
    }
    Ok(acc)
}

/// The transformed expansions with all leading terms zero, in the original
/// basis. Under the normalization Φ²₁₀ is conj Θ²₁₀ and Φ¹₁₀ is imaginary.
/// The first term of Φ̂¹ multiplies θ²̄∧ω.
const SUFFICIENCY: [&[(&str, &str, &str)]; 4] = [
    &[("Th2_10", "omega1", "omega"), ("Th2_b10", "omega1b", "omega")],
    &[
        ("Ph1_b20", "theta2b", "omega"),
        ("Ph1_10 + B*Th2_10 - Bb*Th2_10c", "omega1", "omega"),
        ("Ph1_b10 + B*Th2_b10 - Bb*Th2_10", "omega1b", "omega"),
    ],
    &[("Th2_10c", "omega1", "omega"), ("Th2_10", "omega1b", "omega")],
    &[
        ("-Ph1_b20c/2", "theta2", "omega1"),
        ("Ph1_b20/2", "theta2b", "omega1b"),
        ("Ps_20 + Bb*Ph1_b20c", "theta2", "omega"),
        ("Ps_20c + B*Ph1_b20", "theta2b", "omega"),
        (
            "Ps_10 + B^2/2*Th2_10 + Bb^2/2*Th2_b10c + B*Ph1_10 + Bb*Ph1_b10c - B*Bb*Th2_10c",
            "omega1",
            "omega",
        ),
        (
            "Ps_10c + Bb^2/2*Th2_10c + B^2/2*Th2_b10 - Bb*Ph1_10 + B*Ph1_b10 - B*Bb*Th2_10",
            "omega1b",
            "omega",
        ),
    ],
];

/// Normalization conditions on the transformed coframe, read in its own basis.
const NORMALIZED_WORDS: [(&str, usize, [&str; 2]); 5] = [
    ("theta2_2_1b", 0, ["theta2", "omega1b"]),
    ("theta2_1_1b", 0, ["omega1", "omega1b"]),
    ("phi1_1_1b", 1, ["omega1", "omega1b"]),
    ("phi2_1_1b", 2, ["omega1", "omega1b"]),
    ("psi_1_1b", 3, ["omega1", "omega1b"]),
];

/// Sufficiency and necessity computations of the Cartan-connection criterion.
pub fn verify_cartan_criterion() -> Report {
    let mut report = Report::new("dga-cartan", json!({ "mode": "expanded, normalized" }));
    for (name, step) in [
        ("sufficiency", run_sufficiency as fn(&mut Report) -> Res<()>),
        ("h1_scaling", run_h1_scaling),
        ("necessity", run_necessity),
    ] {
        if let Err(e) = step(&mut report) {
            failure(&mut report, name, e);
        }
    }
    report
}

fn run_sufficiency(report: &mut Report) -> Res<()> {
    let p2 = build_chart(Mode::Expanded(Expansion::normalized().vanishing(LEADING_TERMS)))?;
    let hat = hat_coframe(&p2.chart)?.curvature()?;
    for (i, name) in CURVATURE_NAMES.iter().enumerate() {
        let want = terms(&p2.chart, SUFFICIENCY[i])?;
        report.push(form_check(&format!("sufficiency_hat_{name}"), &(&hat[i] - &want)));
    }
    for (label, k, word) in NORMALIZED_WORDS {
        let got = hat_coefficient(&p2, &hat[k], &word)?;
        report.push(scalar_check(
            &format!("sufficiency_normalized_{label}"),
            &got,
            &ScalarExpr::zero(),
        ));
    }
    Ok(())
}

fn run_h1_scaling(report: &mut Report) -> Res<()> {
    let p2 = build_chart(Mode::Opaque)?;
    let k = Coframe::standard(&p2.chart).curvature()?;
    let check = Coframe::from_array(table_forms(&p2.chart, &H1_CHECKS)?).curvature()?;
    let factors = ["A/Ab", "1/Ab", "1", "1/(A*Ab)"];
    for (i, name) in CURVATURE_NAMES.iter().enumerate() {
        let want = &scalar(&p2.chart, factors[i])? * &k[i];
        report.push(form_check(&format!("h1_scaling_{name}"), &(&check[i] - &want)));
    }
    Ok(())
}

/// Φ̂¹₁₁̄ in terms of the un-hatted curvature of the normalized coframe.
/// The Λ term enters through ½Θ²̄₂̄₁̄ φ¹̄∧ω¹ with φ¹̄ = φ̂¹̄ − (Λ + |B|²/2)ω̂¹̄ + …
pub const NECESSITY_PHI1: &str = "Bb*Th2_20 - B*Ph2_20c - 3*Bb^2/4*Th2_21 + (Lam - 3*B*Bb/2)*Th2_21c/2";

/// The computed Φ̂¹₁₁̄ of the normalized coframe, and `formula` parsed on
/// the same chart (symbols B, Bb, Lam, Th2_21, Th2_21c, Th2_20, Ph2_20c, …).
pub fn necessity_phi1_coefficient(formula: &str) -> Result<(ScalarExpr, ScalarExpr), FormError> {
    let p2 = build_chart(Mode::Expanded(Expansion::normalized()))?;
    let hat = hat_coframe(&p2.chart)?.curvature()?;
    let got = hat_coefficient(&p2, &hat[1], &["omega1", "omega1b"])?;
    Ok((got, scalar(&p2.chart, formula)?))
}

fn run_necessity(report: &mut Report) -> Res<()> {
    let (got, want) = necessity_phi1_coefficient(NECESSITY_PHI1)?;
    report.push(scalar_check("necessity_hat_phi1_1_1b", &got, &want));

    let p2 = build_chart(Mode::Expanded(
        Expansion::normalized().vanishing(["Th2_21", "Th2_20", "Ph2_20", "P1", "P2", "P3"]),
    ))?;
    let hat = hat_coframe(&p2.chart)?.curvature()?;
    let got = hat_coefficient(&p2, &hat[3], &["omega1", "omega1b"])?;
    let want = scalar(&p2.chart, "Bb/2*Ph1_20 + B/2*Ph1_20c")?;
    report.push(scalar_check("necessity_hat_psi_1_1b", &got, &want));
    Ok(())
}
