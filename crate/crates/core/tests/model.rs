use crc_core::expr::{ScalarExpr, Variable};
use crc_core::exterior::{load_chart_unchecked, parse_form};
use crc_core::model::*;
use crc_core::report::Status;
use num_complex::Complex64;

fn var(v: Variable) -> ScalarExpr {
    ScalarExpr::var(&v)
}

fn pair(name: &str, partner: &str) -> ScalarExpr {
    ScalarExpr::var(&Variable::new(
        name,
        crc_core::expr::Reality::ComplexPaired(partner.into()),
    ))
}

#[test]
fn constant_matrices() {
    let (s, t, j) = bilinear_matrices();
    let id = Matrix5::identity();
    assert!(s.sub(&s.transpose()).is_zero_exact());
    assert!(s.mul(&s).sub(&id).is_zero_exact());
    assert!(t.mul(&t).sub(&id).is_zero_exact());
    assert_eq!(t.entry(1, 4), &ScalarExpr::one());
    assert_eq!(t.entry(2, 5), &ScalarExpr::one());
    assert_eq!(t.entry(3, 3), &ScalarExpr::one());
    assert_eq!(j.entry(4, 4), &ScalarExpr::int(-1));
    assert_eq!(j.determinant(), ScalarExpr::one());
}

#[test]
fn algebra_conditions_and_bracket_closure() {
    let (s, t, _) = bilinear_matrices();
    let make = |k: &str| {
        algebra_element(
            &pair(&format!("a{k}"), &format!("ab{k}")),
            &pair(&format!("b{k}"), &format!("bb{k}")),
            &pair(&format!("g{k}"), &format!("gb{k}")),
            &pair(&format!("s{k}"), &format!("sb{k}")),
            &var(Variable::imaginary(&format!("d{k}"))),
            &var(Variable::imaginary(&format!("r{k}"))),
        )
        .unwrap()
    };
    let x = make("1");
    assert!(x.transpose().mul(&s).add(&s.mul(&x)).is_zero_exact());
    assert!(x.transpose().mul(&t).add(&t.mul(&x.conjugate())).is_zero_exact());
    let y = make("2");
    let bracket = x.mul(&y).sub(&y.mul(&x));
    let p = algebra_parameters(&bracket).expect("bracket stays in the algebra");
    assert!((&p[0] - bracket.entry(1, 1)).is_zero_exact());

    let zero = ScalarExpr::zero();
    let z = algebra_element(&zero, &zero, &zero, &zero, &zero, &zero).unwrap();
    assert!(z.is_zero_exact());
    let real = var(Variable::real("x"));
    assert!(algebra_element(&zero, &zero, &zero, &zero, &real, &zero).is_err());
}

#[test]
fn subgroups() {
    let a = pair("A", "Ab");
    let b = pair("B", "Bb");
    let lam = var(Variable::imaginary("Lam"));
    let h1 = subgroup_h1(&a).unwrap();
    let h2 = subgroup_h2(&b, &lam).unwrap();
    assert!(is_group_element(&h1));
    assert!(is_group_element(&h2));
    assert!(subgroup_h1(&ScalarExpr::zero()).is_err());
    assert!(subgroup_h1(&ScalarExpr::one())
        .unwrap()
        .sub(&Matrix5::identity())
        .is_zero_exact());
    let zero = ScalarExpr::zero();
    assert!(subgroup_h2(&zero, &zero)
        .unwrap()
        .sub(&Matrix5::identity())
        .is_zero_exact());

    // H²(B,Λ)·H²(B′,Λ′) = H²(B+B′, Λ+Λ′+(BB̄′−B̄B′)/2), from the (4,1) entry
    let b2 = pair("C", "Cb");
    let lam2 = var(Variable::imaginary("Mu"));
    let prod = h2.mul(&subgroup_h2(&b2, &lam2).unwrap());
    let corr = &(&(&b * &b2.conjugate()) - &(&b.conjugate() * &b2)) * &ScalarExpr::ratio(1, 2);
    let want = subgroup_h2(&(&b + &b2), &(&(&lam + &lam2) + &corr)).unwrap();
    assert!(prod.sub(&want).is_zero_exact());
}

#[test]
fn maurer_cartan_layout() {
    let chart = model_chart();
    let mc = maurer_cartan(chart).unwrap();
    assert!(mc.entry(1, 5).is_zero());
    assert!(mc.entry(2, 4).is_zero());
    assert_eq!(mc.entry(1, 1), &chart.g("phi2"));
    assert_eq!(mc.entry(4, 1), &chart.g("psi"));
    assert_eq!(mc.entry(1, 1).conjugate_form().unwrap(), *mc.entry(2, 2));
    let trace = (1..=5).fold(parse_form("0*theta", chart).unwrap(), |acc, i| &acc + mc.entry(i, i));
    assert!(trace.is_zero());
    assert_eq!(
        chart.d_rule("theta").unwrap(),
        parse_form("-theta1/\\theta1b - theta/\\(phi2 + phi2b)", chart).unwrap()
    );
}

#[test]
fn structure_equations_hold_exactly() {
    let r = verify_structure_equations();
    assert_eq!(r.checks.len(), 25);
    assert!(
        r.passed(),
        "{:#?}",
        r.checks.iter().filter(|c| c.status != Status::Pass).collect::<Vec<_>>()
    );
}

#[test]
fn perturbed_rule_is_detected() {
    let text = MODEL_CHART.replace(
        "d theta = -theta1/\\theta1b - theta/\\(phi2 + phi2b)",
        "d theta = -theta1/\\theta1b - theta/\\(phi2 + phi2b) + theta/\\phi2",
    );
    assert_ne!(text, MODEL_CHART);
    let chart = load_chart_unchecked(&text).unwrap();
    let r = verify_structure_equations_on(&chart);
    let failing: Vec<&str> = r
        .checks
        .iter()
        .filter(|c| c.status == Status::Fail)
        .map(|c| c.name.as_str())
        .collect();
    // dθ sits at (1,4); its negative −θ at (2,5).
    assert_eq!(failing, ["mc_entry_1_4", "mc_entry_2_5"]);
}

#[test]
fn adjoint_transforms_match_tables() {
    let r = verify_adjoint_transforms();
    assert!(
        r.passed(),
        "{:#?}",
        r.checks.iter().filter(|c| c.status != Status::Pass).collect::<Vec<_>>()
    );
    let psi = r.check("h2_psi").unwrap();
    assert!(psi.details["computed"].as_str().unwrap().contains("Lam^2"));
}

#[test]
fn every_table_mutation_is_detected() {
    for (k, (_, terms)) in H2_HATS.iter().enumerate() {
        for drop in 0..terms.len() {
            let kept: Vec<(&'static str, &'static str)> = terms
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop)
                .map(|(_, t)| *t)
                .collect();
            let leaked: &'static [(&str, &str)] = Box::leak(kept.into_boxed_slice());
            let mut table = H2_HATS;
            table[k].1 = leaked;
            assert!(!verify_adjoint_transforms_with(&table, &H1_CHECKS).passed());

            let flipped: Vec<(&'static str, &'static str)> = terms
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    if i == drop {
                        (&*Box::leak(format!("-({})", t.0).into_boxed_str()), t.1)
                    } else {
                        *t
                    }
                })
                .collect();
            table[k].1 = Box::leak(flipped.into_boxed_slice());
            assert!(!verify_adjoint_transforms_with(&table, &H1_CHECKS).passed());
        }
    }
    let mut table = H1_CHECKS;
    table[3].1 = &[("1/A", "phi1")];
    assert!(!verify_adjoint_transforms_with(&H2_HATS, &table).passed());
}

#[test]
fn numeric_adjoint_agrees() {
    let c = numeric_adjoint_check(20, 7, 1e-12);
    assert_eq!(c.status, Status::Pass, "{}", c.details);
}

#[test]
fn boundary_orbits() {
    let i = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let q_plus = [i, one, zero, one, i];
    let q_minus = [-i, one, zero, one, -i];
    assert!(gamma_membership(q_plus, Side::Plus).unwrap());
    assert!(gamma_membership(q_minus, Side::Minus).unwrap());
    assert!(!gamma_membership(q_minus, Side::Plus).unwrap());
    assert!(!gamma_membership([one, zero, zero, zero, zero], Side::Plus).unwrap());
    // projective: any complex multiple stays on the orbit
    let w = Complex64::new(0.3, -1.7);
    assert!(gamma_membership(q_plus.map(|z| z * w), Side::Plus).unwrap());
    assert!(gamma_membership([zero; 5], Side::Plus).is_err());
}
