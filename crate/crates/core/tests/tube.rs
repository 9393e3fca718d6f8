use std::collections::BTreeMap;

use crc_core::expr::{is_identically_zero, parse, DomainBox, ScalarExpr, ZeroTest, ZeroVerdict};
use crc_core::report::Status;
use crc_core::tube::*;

fn example() -> TubeModel {
    tube_from_rho(EXAMPLE_RHO, DomainBox::parse(EXAMPLE_BOX).unwrap(), Sampling::default()).unwrap()
}

fn t(text: &str) -> ScalarExpr {
    parse(text, &base_variables()).unwrap()
}

fn unit_box() -> DomainBox {
    DomainBox::parse("t1=0.5:1,t2=0.5:1").unwrap()
}

fn fiber_box(model: &TubeModel) -> DomainBox {
    let mut b = model.domain.clone();
    b = b.with("u", 0.5, 2.0).with("b", -0.5, 0.5).with("lam", -1.0, 1.0);
    b
}

#[test]
fn bundled_example_pipeline() {
    let cf = build_coframe(&example()).unwrap();
    let names: Vec<&str> = cf.checks.iter().map(|c| c.name.as_str()).collect();
    assert!(names.contains(&"d_omega") && names.contains(&"d_omega1_mod_omega"));
    for c in &cf.checks {
        assert_eq!(c.status, Status::Pass, "{}", c.name);
        assert_eq!(c.details["method"], "exact", "{}", c.name);
    }
    let v = curvature_coefficients(&cf).unwrap();
    for c in &v.checks {
        assert_eq!(c.status, Status::Pass, "{} {}", c.name, c.details);
    }
    assert_eq!(v.is_final_zero, ZeroVerdict::NonZero);
    assert!(v.cartan_obstruction);
    assert_eq!(v.flatness, Flatness::NotFlat);
    assert!((&v.c - &(&ScalarExpr::ratio(1, 3) * &v.theta2_2bar1)).is_zero_exact());
}

#[test]
fn bundled_example_closed_forms() {
    let a = bundled_example(Sampling::default()).unwrap();
    let failing: Vec<_> = a
        .report
        .checks
        .iter()
        .filter(|c| c.status != Status::Pass)
        .map(|c| &c.name)
        .collect();
    assert!(failing.is_empty(), "{failing:?}");
    let close = a.report.check("final_matches_closed_form").unwrap();
    assert_eq!(close.details["points"], 32);
    assert!(close.details["max_relative_error"].as_f64().unwrap() < 1e-8);
    assert_eq!(a.verdict.as_ref().unwrap()["flatness"], "not_flat");
}

#[test]
fn final_coefficient_agrees_with_closed_form_exactly_at_generic_point() {
    let v = curvature_coefficients(&build_coframe(&example()).unwrap()).unwrap();
    let want = t(EXAMPLE_FINAL);
    let test = ZeroTest::new(DomainBox::parse(EXAMPLE_BOX).unwrap())
        .trials(32)
        .seed(99)
        .tol(1e-9);
    assert_eq!(
        is_identically_zero(&(&v.theta2_21_final - &want), &test).unwrap(),
        ZeroVerdict::Zero
    );
    // the opposite sign is rejected
    assert_eq!(
        is_identically_zero(&(&v.theta2_21_final + &want), &test).unwrap(),
        ZeroVerdict::NonZero
    );
}

#[test]
fn section_values_of_intermediate_coefficients() {
    let m = example();
    let v = curvature_coefficients(&build_coframe(&m).unwrap()).unwrap();
    let g0: BTreeMap<String, ScalarExpr> = GAMMA0
        .iter()
        .map(|(n, x)| (n.to_string(), ScalarExpr::int(*x)))
        .collect();
    let on_section = v.theta2_2bar1.substitute_unchecked(&g0);
    let k = &m.s1 * &(&m.r11.sqrt() * &m.s).recip();
    let l = &m.r111 * &m.r11.pow(crc_core::expr::Exponent::new(3, 2)).recip();
    assert!((&on_section - &(&l - &k)).is_zero_exact());
    assert!((&v.theta2_21_gamma0 + &(&k + &l)).is_zero_exact());
}

#[test]
fn reference_formula_mutations_are_detected() {
    let m = example();
    let cf = build_coframe(&m).unwrap();
    let v = curvature_coefficients(&cf).unwrap();
    let f = &cf.frame;
    let (a, u, bb) = (f.v("a"), f.v("u"), f.v("bb"));
    let s1_term = &(&a * &m.s1) * &(&(&u * &m.r11).sqrt() * &m.s).recip();
    let r_term = &(&a * &m.r111) * &(&u.sqrt() * &m.r11.pow(crc_core::expr::Exponent::new(3, 2))).recip();
    let test = ZeroTest::new(fiber_box(&m)).trials(16).seed(3);
    let expected = &(&(&ScalarExpr::int(3) * &bb) - &s1_term) + &r_term;
    assert_eq!(
        is_identically_zero(&(&v.theta2_2bar1 - &expected), &test).unwrap(),
        ZeroVerdict::Zero
    );
    for wrong in [
        &(&(&ScalarExpr::int(2) * &bb) - &s1_term) + &r_term,
        &(&(&ScalarExpr::int(3) * &bb) + &s1_term) + &r_term,
        &(&(&ScalarExpr::int(3) * &bb) - &s1_term) - &r_term,
    ] {
        assert_eq!(
            is_identically_zero(&(&v.theta2_2bar1 - &wrong), &test).unwrap(),
            ZeroVerdict::NonZero
        );
    }
}

#[test]
fn conjugate_curvature_is_consistent() {
    let m = example();
    let cf = build_coframe(&m).unwrap();
    let f = &cf.frame;
    let g = |n: &str| f.g(n);
    let curvature = |theta2: &crc_core::exterior::FormExpr, [t, p2, p2b, w1, p1]: [&str; 5]| {
        let d = theta2.d().unwrap().rewrite_basis(f, &cf.images, None).unwrap();
        &(&d + &(&g(t) ^ &(&g(p2) - &g(p2b)))) - &(&g(w1) ^ &g(p1))
    };
    let theta = curvature(&cf.theta2, ["theta2", "phi2", "phi2b", "omega1", "phi1"]);
    let theta_bar = curvature(
        &cf.theta2.conjugate_form().unwrap(),
        ["theta2b", "phi2b", "phi2", "omega1b", "phi1b"],
    );
    let diff = &theta.conjugate_form().unwrap() - &theta_bar;
    let test = ZeroTest::new(fiber_box(&m)).trials(8).seed(5);
    for (_, c) in diff.terms() {
        assert_eq!(is_identically_zero(c, &test).unwrap(), ZeroVerdict::Zero);
    }
}

#[test]
fn degenerate_rho_is_rejected_for_vanishing_s() {
    let err = tube_from_rho(
        "t1^2/2",
        DomainBox::parse("t1=0.1:1,t2=0.1:1").unwrap(),
        Sampling::default(),
    )
    .unwrap_err();
    assert_eq!(err.to_string(), "2-nondegeneracy: S ≡ 0");
    let m = TubeModel::new(t("t1^2/2"), unit_box(), Sampling::default());
    let h = m.hypotheses().unwrap();
    assert!(h.ma.holds && h.positivity.holds && !h.twonondeg.holds);
}

#[test]
fn cone_rho_is_accepted() {
    let m = tube_from_rho("t1^2/t2", unit_box(), Sampling::default()).unwrap();
    // by hand: ρ₁₁ = 2/t₂, ρ₁₂ = −2t₁/t₂², ρ₂₂ = 2t₁²/t₂³, ρ₁₂/ρ₁₁ = −t₁/t₂
    assert!((&m.r11 - &t("2/t2")).is_zero_exact());
    assert!((&m.r12 - &t("-2*t1/t2^2")).is_zero_exact());
    assert!((&m.r22 - &t("2*t1^2/t2^3")).is_zero_exact());
    assert!((&m.s - &t("-1/t2")).is_zero_exact());
    assert!(m.ma_residual().is_zero_exact());
}

#[test]
fn non_monge_ampere_and_non_convex_inputs_are_rejected() {
    let err = tube_from_rho("t1^2 + t2^2", unit_box(), Sampling::default()).unwrap_err();
    assert!(
        matches!(
            err,
            TubeError::Hypothesis {
                hypothesis: Hypothesis::MongeAmpere,
                ..
            }
        ),
        "{err}"
    );
    let err = tube_from_rho("-t1^2/t2", unit_box(), Sampling::default()).unwrap_err();
    assert!(
        matches!(
            err,
            TubeError::Hypothesis {
                hypothesis: Hypothesis::Positivity,
                ..
            }
        ),
        "{err}"
    );
    assert!(matches!(
        tube_from_rho("t1 +", unit_box(), Sampling::default()),
        Err(TubeError::Expr(_))
    ));
}

#[test]
fn profile_solutions() {
    assert!((&ma_profile_solution("s^2").unwrap() - &t("t1^2/t2")).is_zero_exact());
    let quartic = ma_profile_solution("s^4").unwrap();
    assert!((&quartic - &t("t1^4/t2^3")).is_zero_exact());
    // brute force: ρ₁₁ = 12t₁²/t₂³, ρ₁₂ = −12t₁³/t₂⁴, ρ₂₂ = 12t₁⁴/t₂⁵
    let brute = &(&t("12*t1^2/t2^3") * &t("12*t1^4/t2^5")) - &t("144*t1^6/t2^8");
    assert!(brute.is_zero_exact());
    let linear = ma_profile_solution("s").unwrap();
    let err = tube_from_rho(&linear.to_string(), unit_box(), Sampling::default()).unwrap_err();
    assert!(
        matches!(
            err,
            TubeError::Hypothesis {
                hypothesis: Hypothesis::Positivity,
                ..
            }
        ),
        "{err}"
    );
    assert!(ma_profile_solution("s +").is_err());
}

#[test]
fn profile_family_passes_coframe_checks_and_normalizes_to_zero() {
    // ρ = t₁²/t₂ is the tube over the light cone; its first normalized
    // coefficient vanishes
    for g in ["s^2", "s^4", "s^3 + s^2"] {
        let a = profile(g, unit_box(), Sampling::default()).unwrap();
        let failing: Vec<_> = a
            .report
            .checks
            .iter()
            .filter(|c| c.status == Status::Fail)
            .map(|c| (&c.name, &c.details))
            .collect();
        assert!(failing.is_empty(), "{g}: {failing:?}");
        assert!(a.levi.iter().all(|p| p.rank == 1));
        let m = TubeModel::new(ma_profile_solution(g).unwrap(), unit_box(), Sampling::default());
        let test = ZeroTest::new(unit_box()).trials(16).seed(1);
        assert_eq!(
            is_identically_zero(&(&m.s - &t("-1/t2")), &test).unwrap(),
            ZeroVerdict::Zero,
            "{g}"
        );
    }
    let cone = profile("s^2", unit_box(), Sampling::default()).unwrap();
    assert_eq!(cone.verdict.as_ref().unwrap()["flatness"], "necessary_condition_passed");
}

#[test]
fn levi_rank() {
    let m = example();
    let r = levi_rank_numeric(&m, &[(0.05, 0.05)], LEVI_TOL).unwrap();
    assert_eq!(r[0].rank, 1);
    // independent: the Hessian has zero determinant and positive trace
    let (a, b, c) = (r[0].eigenvalues[0], r[0].eigenvalues[1], 0.0);
    assert!(a > 0.0 && b.abs() < 1e-10 * a && c == 0.0);
    let pts = sample_box(&m, 16).unwrap();
    assert!(levi_rank_numeric(&m, &pts, LEVI_TOL)
        .unwrap()
        .iter()
        .all(|p| p.rank == 1));

    let flat = TubeModel::new(t("t1^2/2"), unit_box(), Sampling::default());
    let r = levi_rank_numeric(&flat, &[(0.7, 0.7)], LEVI_TOL).unwrap();
    assert_eq!(r[0].eigenvalues, [1.0, 0.0]);
    let round = TubeModel::new(t("t1^2 + t2^2"), unit_box(), Sampling::default());
    assert_eq!(levi_rank_numeric(&round, &[(0.7, 0.7)], LEVI_TOL).unwrap()[0].rank, 2);
    assert!(matches!(
        levi_rank_numeric(&m, &[(0.5, 0.05)], LEVI_TOL),
        Err(TubeError::OutsideBox(..))
    ));
}

#[test]
fn flatness_probe_branches() {
    let mut v = curvature_coefficients(&build_coframe(&example()).unwrap()).unwrap();
    let r = flatness_probe(&v);
    assert!(r.checks[0].details["message"].as_str().unwrap().starts_with("not flat"));
    v.flatness = Flatness::NecessaryConditionPassed;
    v.is_final_zero = ZeroVerdict::Zero;
    v.cartan_obstruction = false;
    let r = flatness_probe(&v);
    assert!(r.checks[0].details["message"]
        .as_str()
        .unwrap()
        .contains("NOT concluded"));
    assert_eq!(r.overall, Status::Pass);
    v.flatness = Flatness::Inconclusive;
    v.is_final_zero = ZeroVerdict::Inconclusive;
    let r = flatness_probe(&v);
    assert_eq!(r.overall, Status::Inconclusive);
    assert_eq!(r.checks[0].details["cartan_obstruction"], false);
}

#[test]
fn analyze_reports_failed_hypothesis() {
    let a = analyze(
        "t1^2/2",
        DomainBox::parse("t1=0.1:1,t2=0.1:1").unwrap(),
        Sampling::default(),
    )
    .unwrap();
    assert_eq!(a.report.overall, Status::Fail);
    assert_eq!(a.verdict.as_ref().unwrap()["reason"], "2-nondegeneracy: S ≡ 0");
    assert!(a.coefficients.is_none());
}

#[test]
fn reports_are_deterministic() {
    let one = serde_json::to_string(&bundled_example(Sampling::default()).unwrap().without_timing()).unwrap();
    let two = serde_json::to_string(&bundled_example(Sampling::default()).unwrap().without_timing()).unwrap();
    assert_eq!(one, two);
    let other = serde_json::to_string(
        &bundled_example(Sampling {
            seed: 4,
            ..Sampling::default()
        })
        .unwrap()
        .without_timing(),
    )
    .unwrap();
    assert_ne!(one, other);
}
