use std::sync::OnceLock;

use nalgebra::SMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{mc_components, mc_pattern, subgroup_h1, subgroup_h2, FormMatrix, Matrix5};
use crate::expr::{Point, Variable};
use crate::exterior::{parse_form, Chart, ChartBuilder, FormError, FormExpr};
use crate::report::{Check, Report, Status};

/// For each component (ω, ω¹, θ², φ¹, φ², ψ) the list of
/// (coefficient, generator) terms of its transformed value.
pub type HatTable = [(&'static str, &'static [(&'static str, &'static str)]); 6];

const COMPONENTS: [&str; 6] = ["omega", "omega1", "theta2", "phi1", "phi2", "psi"];

/// Components of `h₂·ω·h₂⁻¹` for `h₂ = H²(B, Λ)`.
pub const H2_HATS: HatTable = [
    ("omega", &[("1", "omega")]),
    ("omega1", &[("1", "omega1"), ("Bb", "omega")]),
    ("theta2", &[("1", "theta2"), ("-Bb", "omega1"), ("-Bb^2/2", "omega")]),
    (
        "phi1",
        &[
            ("1", "phi1"),
            ("-(Lam + B*Bb/2)", "omega1"),
            ("-Bb^2/2", "omega1b"),
            ("B", "theta2"),
            ("-Lam*Bb", "omega"),
            ("Bb", "phi2b"),
        ],
    ),
    ("phi2", &[("1", "phi2"), ("-B", "omega1"), ("-(Lam + B*Bb/2)", "omega")]),
    (
        "psi",
        &[
            ("1", "psi"),
            ("-Lam*B", "omega1"),
            ("-Lam*Bb", "omega1b"),
            ("B^2/2", "theta2"),
            ("-Bb^2/2", "theta2b"),
            ("-Lam^2", "omega"),
            ("B", "phi1"),
            ("-Bb", "phi1b"),
            ("Lam - B*Bb/2", "phi2"),
            ("Lam + B*Bb/2", "phi2b"),
        ],
    ),
];

/// Components of `h₁·ω·h₁⁻¹` for `h₁ = H¹(A)`.
pub const H1_CHECKS: HatTable = [
    ("omega", &[("A*Ab", "omega")]),
    ("omega1", &[("A", "omega1")]),
    ("theta2", &[("A/Ab", "theta2")]),
    ("phi1", &[("1/Ab", "phi1")]),
    ("phi2", &[("1", "phi2")]),
    ("psi", &[("1/(A*Ab)", "psi")]),
];

/// Chart of a generic Maurer–Cartan-shaped coframe together with the
/// subgroup parameters B ↔ Bb, Λ ∈ iℝ and A ↔ Ab.
pub fn frame_chart() -> &'static Chart {
    static CHART: OnceLock<Chart> = OnceLock::new();
    CHART.get_or_init(|| {
        ChartBuilder::new("frame")
            .pair_var("B", "Bb")
            .and_then(|b| b.var(Variable::imaginary("Lam")))
            .and_then(|b| b.pair_var("A", "Ab"))
            .expect("distinct variable names")
            .imag_gen("omega")
            .pair_gen("omega1", "omega1b")
            .pair_gen("theta2", "theta2b")
            .pair_gen("phi1", "phi1b")
            .pair_gen("phi2", "phi2b")
            .imag_gen("psi")
            .finish()
            .expect("distinct generator names")
    })
}

/// Sums `coefficient * generator` over each entry of `table` on `chart`.
pub fn table_forms(chart: &Chart, table: &HatTable) -> Result<[FormExpr; 6], FormError> {
    let mut out = Vec::with_capacity(6);
    for (_, terms) in table {
        let mut acc = FormExpr::zero(chart, 1);
        for (coeff, gen) in terms.iter() {
            acc = &acc + &parse_form(&format!("({coeff})*{gen}"), chart)?;
        }
        out.push(acc);
    }
    Ok(out.try_into().expect("six components"))
}

/// The forms described by `table` on the frame chart.
pub fn expected_forms(table: &HatTable) -> Result<[FormExpr; 6], FormError> {
    table_forms(frame_chart(), table)
}

fn frame_mc(chart: &Chart) -> Result<FormMatrix, FormError> {
    let parts: Vec<FormExpr> = COMPONENTS.iter().map(|n| chart.gen(n)).collect::<Result<_, _>>()?;
    mc_pattern(&parts.try_into().expect("six components"))
}

fn compare(report: &mut Report, prefix: &str, ad: &FormMatrix, expected: &[FormExpr; 6]) -> Result<(), FormError> {
    let rebuilt = mc_pattern(&mc_components(ad))?;
    let pattern_ok = (0..5).all(|i| (0..5).all(|j| (&ad.0[i][j] - &rebuilt.0[i][j]).is_zero_exact()));
    report.push(Check::new(
        format!("{prefix}_pattern"),
        Status::from_bool(pattern_ok),
        json!({ "description": "transformed matrix keeps the Maurer-Cartan layout" }),
    ));
    for ((name, got), want) in COMPONENTS.iter().zip(mc_components(ad)).zip(expected) {
        let diff = &got - want;
        let ok = diff.is_zero_exact();
        report.push(Check::new(
            format!("{prefix}_{name}"),
            Status::from_bool(ok),
            json!({
                "computed": got.to_string(),
                "expected": want.to_string(),
                "difference": if ok { "0".to_string() } else { diff.to_string() },
            }),
        ));
    }
    Ok(())
}

/// Exact check of `h·ω·h⁻¹` against the reference transformation tables.
pub fn verify_adjoint_transforms() -> Report {
    verify_adjoint_transforms_with(&H2_HATS, &H1_CHECKS)
}

/// As [`verify_adjoint_transforms`] with caller-supplied tables.
pub fn verify_adjoint_transforms_with(h2_table: &HatTable, h1_table: &HatTable) -> Report {
    let mut report = Report::new("model-adjoint", json!({ "convention": "h * omega * h^-1" }));
    if let Err(e) = run_adjoint(&mut report, h2_table, h1_table) {
        report.push(Check::new("adjoint", Status::Fail, json!({ "error": e.to_string() })));
    }
    report
}

fn run_adjoint(report: &mut Report, h2_table: &HatTable, h1_table: &HatTable) -> Result<(), super::ModelError> {
    let chart = frame_chart();
    let (b, lam, a) = (chart.var("B")?, chart.var("Lam")?, chart.var("A")?);
    let omega = frame_mc(chart)?;

    let h2 = subgroup_h2(&b, &lam)?;
    let h2inv = subgroup_h2(&-&b, &-&lam)?;
    let h1 = subgroup_h1(&a)?;
    let h1inv = subgroup_h1(&a.recip())?;
    for (name, h, hinv) in [("h2_inverse", &h2, &h2inv), ("h1_inverse", &h1, &h1inv)] {
        let ok = h.mul(hinv).sub(&Matrix5::identity()).is_zero_exact();
        report.push(Check::new(name, Status::from_bool(ok), json!({})));
    }

    let ad2 = omega.left_mul(&h2).right_mul(&h2inv);
    compare(report, "h2", &ad2, &expected_forms(h2_table)?)?;
    let ad1 = omega.left_mul(&h1).right_mul(&h1inv);
    compare(report, "h1", &ad1, &expected_forms(h1_table)?)?;
    Ok(())
}

type C5 = SMatrix<Complex64, 5, 5>;

fn numeric(m: &Matrix5, p: &Point) -> Result<C5, crate::expr::ExprError> {
    let mut out = C5::zeros();
    for i in 0..5 {
        for j in 0..5 {
            out[(i, j)] = m.0[i][j].evaluate(p)?;
        }
    }
    Ok(out)
}

/// Coefficient matrix of generator `g` in a form matrix, evaluated at `p`.
fn slice(m: &FormMatrix, g: &str, p: &Point) -> Result<C5, super::ModelError> {
    let mut out = C5::zeros();
    for i in 0..5 {
        for j in 0..5 {
            out[(i, j)] = m.0[i][j].coefficient(&[g])?.evaluate(p)?;
        }
    }
    Ok(out)
}

/// Floating-point `h·M·h⁻¹` (inverse by LU) against the symbolic tables,
/// generator by generator, at random parameter values.
pub fn numeric_adjoint_check(trials: usize, seed: u64, tol: f64) -> Check {
    Check::timed("adjoint_numeric", || match numeric_adjoint(trials, seed) {
        Ok(err) => (
            Status::from_bool(err <= tol),
            json!({ "trials": trials, "seed": seed, "max_error": err, "tolerance": tol }),
        ),
        Err(e) => (Status::Fail, json!({ "error": e.to_string() })),
    })
}

fn numeric_adjoint(trials: usize, seed: u64) -> Result<f64, super::ModelError> {
    let chart = frame_chart();
    let vars = chart.variables();
    let (b, lam, a) = (chart.var("B")?, chart.var("Lam")?, chart.var("A")?);
    let omega = frame_mc(chart)?;
    let e2 = mc_pattern(&expected_forms(&H2_HATS)?)?;
    let e1 = mc_pattern(&expected_forms(&H1_CHECKS)?)?;
    let h2 = subgroup_h2(&b, &lam)?;
    let h1 = subgroup_h1(&a)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut p = Point::new();
        let bv = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let av = Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..std::f64::consts::TAU));
        p.bind_pair(vars.get("B").expect("declared"), bv)?;
        p.bind_pair(vars.get("A").expect("declared"), av)?;
        p.bind(
            vars.get("Lam").expect("declared"),
            Complex64::new(0.0, rng.gen_range(-2.0..2.0)),
        )?;
        for (h, expected) in [(&h2, &e2), (&h1, &e1)] {
            let hn = numeric(h, &p)?;
            let hinv = hn.try_inverse().expect("subgroup elements are invertible");
            for g in chart.generators() {
                let m = slice(&omega, &g.name, &p)?;
                let want = slice(expected, &g.name, &p)?;
                let got = hn * m * hinv;
                worst = worst.max((got - want).iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
    }
    Ok(worst)
}
