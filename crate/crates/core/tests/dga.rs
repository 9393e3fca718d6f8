use crc_core::dga::*;
use crc_core::report::{Report, Status};

fn failures(r: &Report) -> Vec<String> {
    r.checks
        .iter()
        .filter(|c| c.status != Status::Pass)
        .map(|c| format!("{}: {}", c.name, c.details))
        .collect()
}

#[test]
fn gauge_shifts() {
    let r = verify_gauge_shifts();
    assert_eq!(r.checks.len(), 5);
    assert!(r.passed(), "{:#?}", failures(&r));
}

#[test]
fn equivariance() {
    let r = verify_equivariance();
    assert!(r.passed(), "{:#?}", failures(&r));
}

#[test]
fn cartan_criterion() {
    let r = verify_cartan_criterion();
    assert!(r.passed(), "{:#?}", failures(&r));
}

use std::collections::BTreeMap;

use crc_core::expr::{parse, ScalarExpr};
use crc_core::exterior::FormExpr;
use crc_core::model::{table_forms, H2_HATS};

fn hat_coefficient_of(p2: &AbstractP2, k: usize, word: &[&str]) -> ScalarExpr {
    let hat = Coframe::from_array(table_forms(&p2.chart, &H2_HATS).unwrap())
        .curvature()
        .unwrap();
    let mut flip = BTreeMap::new();
    for v in ["B", "Bb", "Lam"] {
        flip.insert(v.to_string(), -&p2.target.v(v));
    }
    let back = table_forms(&p2.target, &H2_HATS)
        .unwrap()
        .map(|f| f.substitute_unchecked(&flip));
    let sub = Coframe::from_array(back).as_substitution().unwrap();
    hat[k]
        .rewrite_basis(&p2.target, &sub, None)
        .unwrap()
        .coefficient(word)
        .unwrap()
}

fn zero_at_identity() -> BTreeMap<String, ScalarExpr> {
    ["B", "Bb", "Lam"]
        .iter()
        .map(|v| (v.to_string(), ScalarExpr::zero()))
        .collect()
}

#[test]
fn suite_names_parse() {
    assert_eq!("shifts".parse::<Suite>().unwrap(), Suite::Shifts);
    assert_eq!("cartan".parse::<Suite>().unwrap(), Suite::Cartan);
    assert!("bogus".parse::<Suite>().is_err());
    assert!(verify_suite(Suite::Equivariance).passed());
}

#[test]
fn flat_chart_has_zero_curvature() {
    let p2 = build_chart(Mode::Flat).unwrap();
    for k in Coframe::standard(&p2.chart).curvature().unwrap() {
        assert!(k.is_zero_exact());
    }
    assert!(p2.curvature.iter().all(FormExpr::is_zero_exact));
}

#[test]
fn curvature_definitions_reproduce_expansions() {
    for mode in [
        Mode::Opaque,
        Mode::Expanded(Expansion::normalized()),
        Mode::Expanded(Expansion::free()),
    ] {
        let p2 = build_chart(mode).unwrap();
        let k = Coframe::standard(&p2.chart).curvature().unwrap();
        for (got, want) in k.iter().zip(&p2.curvature) {
            assert!((got - want).is_zero_exact());
        }
        // φ² + φ²̄ and ψ are real up to i, so Φ² and Ψ are imaginary
        for i in [2, 3] {
            assert!((&p2.curvature[i] + &p2.curvature[i].conjugate_form().unwrap()).is_zero_exact());
        }
    }
}

#[test]
fn identity_element_leaves_coframe_fixed() {
    let p2 = build_chart(Mode::Opaque).unwrap();
    let zero = zero_at_identity();
    let hats = table_forms(&p2.chart, &H2_HATS).unwrap();
    let std = Coframe::standard(&p2.chart);
    let plain = [&std.omega, &std.omega1, &std.theta2, &std.phi1, &std.phi2, &std.psi];
    for (h, s) in hats.iter().zip(plain) {
        assert!((&h.substitute_unchecked(&zero) - s).is_zero_exact());
    }
}

#[test]
fn nonzero_leading_term_breaks_normalization() {
    // with only the free functions zero, Θ²₂₁ survives in Φ̂¹₁₁̄ with a Λ-dependent factor
    let p2 = build_chart(Mode::Expanded(Expansion::normalized())).unwrap();
    let got = hat_coefficient_of(&p2, 1, &["omega1", "omega1b"]);
    assert!(!got.is_zero_exact());
    let lam_part = parse("Lam*Th2_21c/2", p2.chart.variables()).unwrap();
    let rest = parse(
        "Bb*Th2_20 - B*Ph2_20c - 3*Bb^2/4*Th2_21 - 3*B*Bb*Th2_21c/4",
        p2.chart.variables(),
    )
    .unwrap();
    assert!((&(&got - &lam_part) - &rest).is_zero_exact());

    // all leading terms zero: every normalized hat coefficient vanishes
    let p2 = build_chart(Mode::Expanded(Expansion::normalized().vanishing(LEADING_TERMS))).unwrap();
    for (k, word) in [
        (0, ["theta2", "omega1b"]),
        (0, ["omega1", "omega1b"]),
        (1, ["omega1", "omega1b"]),
        (2, ["omega1", "omega1b"]),
        (3, ["omega1", "omega1b"]),
    ] {
        assert!(hat_coefficient_of(&p2, k, &word).is_zero_exact(), "{k} {word:?}");
    }
}

#[test]
fn gauge_order_shifts_are_as_reference() {
    let shifts: Vec<&str> = GAUGE_ORDER.iter().map(|g| g.4).collect();
    assert_eq!(shifts, ["-3*c", "2*f", "2*g", "3*r/2", "s"]);
    let r = verify_gauge_shifts();
    for c in &r.checks {
        assert_eq!(c.details["difference"], "0");
    }
}
