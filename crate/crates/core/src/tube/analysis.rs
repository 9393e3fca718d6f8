use serde::Serialize;
use serde_json::{json, Value};

use super::{
    base_variables, build_coframe, curvature_coefficients, flatness_probe, levi_rank_numeric, ma_profile_solution,
    sample_box, tube_from_rho, CurvatureVerdict, Hypotheses, LeviPoint, Sampling, TubeError, TubeModel, EXAMPLE_BOX,
    EXAMPLE_FINAL, EXAMPLE_RHO,
};
use crate::expr::{parse, DomainBox, Point, ScalarExpr};
use crate::report::{Check, Report, Status};

/// Relative threshold for the numeric Levi rank.
pub const LEVI_TOL: f64 = 1e-10;

/// Points used for the Levi table and for sampled coefficient values.
pub const REPORT_POINTS: usize = 16;

/// Everything `tube analyze` reports.
#[derive(Clone, Debug, Serialize)]
pub struct TubeAnalysis {
    #[serde(flatten)]
    pub report: Report,
    pub hypotheses: Option<Hypotheses>,
    pub levi: Vec<LeviPoint>,
    pub coefficients: Option<Value>,
    pub verdict: Option<Value>,
}

impl TubeAnalysis {
    pub fn without_timing(&self) -> TubeAnalysis {
        TubeAnalysis {
            report: self.report.without_timing(),
            ..self.clone()
        }
    }
}

fn sampled(e: &ScalarExpr, points: &[(f64, f64)]) -> Vec<Value> {
    let vars = base_variables();
    points
        .iter()
        .map(|&(t1, t2)| {
            let mut p = Point::new();
            let value = p
                .bind(vars.get("t1").expect("declared"), t1.into())
                .and_then(|_| p.bind(vars.get("t2").expect("declared"), t2.into()))
                .and_then(|_| e.evaluate(&p));
            match value {
                Ok(z) if z.im.abs() <= 1e-12 * z.norm().max(1.0) => json!({ "t1": t1, "t2": t2, "value": z.re }),
                Ok(z) => json!({ "t1": t1, "t2": t2, "value": [z.re, z.im] }),
                Err(e) => json!({ "t1": t1, "t2": t2, "error": e.to_string() }),
            }
        })
        .collect()
}

fn coefficient_block(v: &CurvatureVerdict, points: &[(f64, f64)]) -> Value {
    let status = |name: &str| v.checks.iter().find(|c| c.name == name).map(|c| c.status);
    json!({
        "theta2_2bar1": {
            "expression": v.theta2_2bar1.to_string(),
            "matches_reference": status("theta2_2bar1_matches_reference"),
        },
        "c": v.c.to_string(),
        "theta2_21": {
            "expression": v.theta2_21_gamma0.to_string(),
            "matches_reference": status("theta2_21_matches_reference"),
            "samples": sampled(&v.theta2_21_gamma0, points),
        },
        "theta2_21_final": {
            "expression": v.theta2_21_final.to_string(),
            "matches_reference": status("final_matches_reference_formula"),
            "samples": sampled(&v.theta2_21_final, points),
        },
    })
}

fn hypothesis_checks(report: &mut Report, h: &Hypotheses) {
    for (name, c) in [
        ("ma", &h.ma),
        ("positivity", &h.positivity),
        ("twonondeg", &h.twonondeg),
    ] {
        report.push(Check::new(
            format!("hypothesis_{name}"),
            Status::from_bool(c.holds),
            json!({ "method": c.method, "detail": c.detail }),
        ));
    }
}

fn levi_check(levi: &[LeviPoint]) -> Check {
    let ok = !levi.is_empty() && levi.iter().all(|p| p.rank == 1);
    let worst = levi
        .iter()
        .map(|p| p.eigenvalues[1].abs() / (p.eigenvalues[0].abs() + p.eigenvalues[1].abs()))
        .fold(0.0, f64::max);
    Check::new(
        "levi_rank_one",
        Status::from_bool(ok),
        json!({ "points": levi.len(), "max_relative_small_eigenvalue": worst, "tolerance": LEVI_TOL }),
    )
}

/// Runs the whole pipeline on a model whose hypotheses have been checked.
fn run_pipeline(analysis: &mut TubeAnalysis, model: &TubeModel) -> Result<(), TubeError> {
    let points = sample_box(model, REPORT_POINTS)?;
    analysis.levi = levi_rank_numeric(model, &points, LEVI_TOL)?;
    analysis.report.push(levi_check(&analysis.levi));
    let cf = build_coframe(model)?;
    for c in &cf.checks {
        analysis.report.push(c.clone());
    }
    let v = curvature_coefficients(&cf)?;
    for c in &v.checks {
        analysis.report.push(c.clone());
    }
    let probe = flatness_probe(&v);
    analysis.coefficients = Some(coefficient_block(&v, &points));
    analysis.verdict = Some(probe.checks[0].details.clone());
    analysis.report.extend(probe);
    Ok(())
}

fn fresh(suite: &str, config: Value) -> TubeAnalysis {
    TubeAnalysis {
        report: Report::new(suite, config),
        hypotheses: None,
        levi: Vec::new(),
        coefficients: None,
        verdict: None,
    }
}

fn fail(analysis: &mut TubeAnalysis, name: &str, e: &TubeError) {
    analysis
        .report
        .push(Check::new(name, Status::Fail, json!({ "reason": e.to_string() })));
    analysis.verdict = Some(json!({ "reason": e.to_string() }));
}

/// Screens the hypotheses, then runs the pipeline. Parse errors are
/// returned; every other failure is recorded in the report.
pub fn analyze(text: &str, domain: DomainBox, sampling: Sampling) -> Result<TubeAnalysis, TubeError> {
    let rho = parse(text, &base_variables())?;
    let config = json!({ "rho": text, "box": domain.intervals, "sampling": sampling });
    let mut analysis = fresh("tube-analyze", config);
    let model = TubeModel::new(rho, domain.clone(), sampling.clone());
    let h = model.hypotheses()?;
    hypothesis_checks(&mut analysis.report, &h);
    analysis.hypotheses = Some(h);
    match tube_from_rho(text, domain, sampling) {
        Ok(model) => {
            if let Err(e) = run_pipeline(&mut analysis, &model) {
                fail(&mut analysis, "pipeline", &e);
            }
        }
        Err(e) => fail(&mut analysis, "hypotheses", &e),
    }
    Ok(analysis)
}

/// The pipeline on the example solution, plus the closed forms of ρ₁₁,
/// S and the final coefficient.
pub fn bundled_example(sampling: Sampling) -> Result<TubeAnalysis, TubeError> {
    let domain = DomainBox::parse(EXAMPLE_BOX)?;
    let mut analysis = analyze(EXAMPLE_RHO, domain.clone(), sampling.clone())?;
    analysis.report.suite = "tube-example".into();
    let model = TubeModel::new(parse(EXAMPLE_RHO, &base_variables())?, domain, sampling);
    let vars = base_variables();
    let closed = |text: &str| parse(text, &vars);
    for (name, got, want) in [
        ("rho11_closed_form", model.r11.clone(), closed("(1 - 12*t1*t2)^(-1/2)")?),
        (
            "s_closed_form",
            model.s.clone(),
            closed("(1 - sqrt(1 - 12*t1*t2))/(t2*sqrt(1 - 12*t1*t2))")?,
        ),
    ] {
        let (v, method) = model.zero_verdict(&(&got - &want))?;
        analysis
            .report
            .push(Check::new(name, verdict_status(v), json!({ "method": method })));
    }
    let cf = build_coframe(&model)?;
    let v = curvature_coefficients(&cf)?;
    analysis
        .report
        .push(closed_form_check(&model, &v.theta2_21_final, &closed(EXAMPLE_FINAL)?)?);
    Ok(analysis)
}

fn verdict_status(v: crate::expr::ZeroVerdict) -> Status {
    match v {
        crate::expr::ZeroVerdict::Zero => Status::Pass,
        crate::expr::ZeroVerdict::NonZero => Status::Fail,
        crate::expr::ZeroVerdict::Inconclusive => Status::Inconclusive,
    }
}

/// Relative agreement at the model's seeded sample points.
pub fn closed_form_check(model: &TubeModel, got: &ScalarExpr, want: &ScalarExpr) -> Result<Check, TubeError> {
    let mut worst: f64 = 0.0;
    let mut evaluated = 0;
    for p in model.sample_points(model.sampling.trials)? {
        let (g, w) = (got.evaluate(&p)?, want.evaluate(&p)?);
        worst = worst.max((g - w).norm() / w.norm().max(f64::MIN_POSITIVE));
        evaluated += 1;
    }
    Ok(Check::new(
        "final_matches_closed_form",
        Status::from_bool(evaluated > 0 && worst <= model.sampling.tol),
        json!({
            "closed_form": EXAMPLE_FINAL,
            "points": evaluated,
            "max_relative_error": worst,
            "tolerance": model.sampling.tol,
        }),
    ))
}

/// Pipeline on `ρ = t₂·g(t₁/t₂)`.
pub fn profile(g_text: &str, domain: DomainBox, sampling: Sampling) -> Result<TubeAnalysis, TubeError> {
    let rho = ma_profile_solution(g_text)?;
    let mut analysis = analyze(&rho.to_string(), domain, sampling)?;
    analysis.report.suite = "tube-profile".into();
    analysis.report.config["g"] = json!(g_text);
    Ok(analysis)
}
