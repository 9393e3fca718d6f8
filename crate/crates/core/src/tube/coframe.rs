use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use serde_json::json;

use super::{TubeError, TubeModel};
use crate::expr::{is_identically_zero, DomainBox, Exponent, ScalarExpr, Variable, ZeroTest, ZeroVerdict};
use crate::exterior::{Chart, ChartBuilder, FormError, FormExpr};
use crate::report::{Check, Report, Status};

/// Fiber coordinates of the section γ₀.
pub const GAMMA0: [(&str, i64); 5] = [("u", 1), ("a", 1), ("b", 0), ("bb", 0), ("lam", 0)];

const SIGMA: [&str; 2] = ["sig", "sigb"];

fn declare(b: ChartBuilder) -> Result<ChartBuilder, FormError> {
    b.var(Variable::real("t1"))?
        .var(Variable::real("t2"))?
        .var(Variable::positive("u"))?
        .var(Variable::unit("a"))?
        .pair_var("b", "bb")?
        .var(Variable::imaginary("lam"))
}

/// The coframe of P² over a tube together with the charts it lives on.
///
/// `coords` has the coordinate covectors μ, dz₁, dz₂ (and conjugates),
/// du, dα (with a = e^{iα}), db, db̄ and the inert dλ; every exterior
/// derivative is taken there. `frame` has ω, ω¹, θ², φ¹, φ² (and
/// conjugates) plus the inert dλ, σ, σ̄; `images` sends each coordinate
/// covector to the frame.
#[derive(Clone, Debug)]
pub struct TubeCoframe {
    pub model: TubeModel,
    pub coords: Chart,
    pub frame: Chart,
    pub omega: FormExpr,
    pub omega1: FormExpr,
    pub theta2: FormExpr,
    pub phi2: FormExpr,
    pub images: HashMap<String, FormExpr>,
    pub checks: Vec<Check>,
}

pub(crate) struct Fiber {
    pub u: ScalarExpr,
    pub a: ScalarExpr,
    pub b: ScalarExpr,
    pub bb: ScalarExpr,
    pub lam: ScalarExpr,
}

impl Fiber {
    fn of(chart: &Chart) -> Self {
        Fiber {
            u: chart.v("u"),
            a: chart.v("a"),
            b: chart.v("b"),
            bb: chart.v("bb"),
            lam: chart.v("lam"),
        }
    }
}

fn half() -> ScalarExpr {
    ScalarExpr::ratio(1, 2)
}

fn r32() -> Exponent {
    Exponent::new(3, 2)
}

/// `ρ₁₁₁/√(u ρ₁₁³)`.
fn r_term(m: &TubeModel, u: &ScalarExpr) -> ScalarExpr {
    &m.r111 * &(&u.sqrt() * &m.r11.pow(r32())).recip()
}

/// The reference coefficient of θ²∧ω¹̄ with general fiber coordinates,
/// `−aS₁/(√(uρ₁₁)S) + 3b̄ + aρ₁₁₁/√(uρ₁₁³)`.
pub(crate) fn reference_theta2_2bar1(m: &TubeModel, f: &Fiber) -> ScalarExpr {
    let first = &(&f.a * &m.s1) * &(&(&f.u * &m.r11).sqrt() * &m.s).recip();
    &(&(&ScalarExpr::int(3) * &f.bb) - &first) + &(&f.a * &r_term(m, &f.u))
}

/// The reference coefficient of θ²∧ω¹ on γ₀, `−S₁/(√ρ₁₁ S) − ρ₁₁₁/√ρ₁₁³`.
pub(crate) fn reference_theta2_21(m: &TubeModel) -> ScalarExpr {
    let one = ScalarExpr::one();
    -&(&(&m.s1 * &(&m.r11.sqrt() * &m.s).recip()) + &r_term(m, &one))
}

/// The reference final coefficient on γ₀ in terms of ρ:
/// `(1/3S)[(ρ₁₂/ρ₁₁)K₁ − K₂] − (1/3S)[(ρ₁₂/ρ₁₁)L₁ − L₂] − 11S₁/(6√ρ₁₁S) − ρ₁₁₁/(6√ρ₁₁³)`
/// with `K = S₁/(√ρ₁₁S)` and `L = ρ₁₁₁/√ρ₁₁³`.
pub(crate) fn reference_final(m: &TubeModel) -> ScalarExpr {
    let k = &m.s1 * &(&m.r11.sqrt() * &m.s).recip();
    let l = &m.r111 * &m.r11.pow(r32()).recip();
    let q = &m.r12 * &m.r11.recip();
    let bracket = |x: &ScalarExpr| &(&q * &x.differentiate("t1")) - &x.differentiate("t2");
    let third_s = (&ScalarExpr::int(3) * &m.s).recip();
    let mut out = &third_s * &(&bracket(&k) - &bracket(&l));
    out = &out - &(&ScalarExpr::ratio(11, 6) * &k);
    &out - &(&ScalarExpr::ratio(1, 6) * &l)
}

/// Sampling box for t₁, t₂ and the fiber coordinates.
pub(crate) fn fiber_box(model: &TubeModel) -> DomainBox {
    let mut b = model.domain.clone();
    for (name, lo, hi) in [("u", 0.5, 2.0), ("b", -0.5, 0.5), ("lam", -1.0, 1.0)] {
        b.intervals.entry(name.to_string()).or_insert((lo, hi));
    }
    b
}

fn zero_verdict(model: &TubeModel, e: &ScalarExpr, fiber: bool) -> Result<(ZeroVerdict, &'static str), TubeError> {
    if e.is_zero_exact() {
        return Ok((ZeroVerdict::Zero, "exact"));
    }
    let domain = if fiber { fiber_box(model) } else { model.domain.clone() };
    let test = ZeroTest::new(domain)
        .trials(model.sampling.trials)
        .seed(model.sampling.seed)
        .tol(model.sampling.tol);
    Ok((is_identically_zero(e, &test)?, "sampled"))
}

/// Every term of a form vanishes: exactly, or failing that at the sample points.
fn form_verdict(model: &TubeModel, f: &FormExpr) -> Result<(ZeroVerdict, &'static str), TubeError> {
    if f.is_zero_exact() {
        return Ok((ZeroVerdict::Zero, "exact"));
    }
    let mut verdict = ZeroVerdict::Zero;
    for (_, c) in f.terms() {
        match zero_verdict(model, c, true)?.0 {
            ZeroVerdict::NonZero => return Ok((ZeroVerdict::NonZero, "sampled")),
            ZeroVerdict::Inconclusive => verdict = ZeroVerdict::Inconclusive,
            ZeroVerdict::Zero => {}
        }
    }
    Ok((verdict, "sampled"))
}

fn status(v: ZeroVerdict) -> Status {
    match v {
        ZeroVerdict::Zero => Status::Pass,
        ZeroVerdict::NonZero => Status::Fail,
        ZeroVerdict::Inconclusive => Status::Inconclusive,
    }
}

fn identity_check(model: &TubeModel, name: &str, residual: &FormExpr) -> Result<Check, TubeError> {
    let (v, method) = form_verdict(model, residual)?;
    Ok(Check::new(name, status(v), json!({ "method": method })))
}

fn coords_chart(m: &TubeModel) -> Result<Chart, FormError> {
    let chart = declare(ChartBuilder::new("tube-coordinates"))?
        .imag_gen("mu")
        .pair_gen("dz1", "dz1b")
        .pair_gen("dz2", "dz2b")
        .real_gen("du")
        .real_gen("al")
        .pair_gen("db", "dbb")
        .aux_gen("dlam")
        .finish()?;
    let dt1 = &chart.g("dz1") + &chart.g("dz1b");
    let dt2 = &chart.g("dz2") + &chart.g("dz2b");
    let drho = |x: &ScalarExpr, y: &ScalarExpr| &(x * &dt1) + &(y * &dt2);
    let dmu = &(&drho(&m.r11, &m.r12) ^ &chart.g("dz1")) + &(&drho(&m.r12, &m.r22) ^ &chart.g("dz2"));
    let zero = FormExpr::zero(&chart, 2);
    let mut gens = BTreeMap::new();
    gens.insert("mu".to_string(), dmu);
    for g in ["dz1", "dz2", "du", "al", "db"] {
        gens.insert(g.to_string(), zero.clone());
    }
    let mut vars = BTreeMap::new();
    vars.insert("t1".to_string(), dt1.clone());
    vars.insert("t2".to_string(), dt2.clone());
    vars.insert("u".to_string(), chart.g("du"));
    vars.insert("a".to_string(), &(&ScalarExpr::i() * &chart.v("a")) * &chart.g("al"));
    vars.insert("b".to_string(), chart.g("db"));
    vars.insert("lam".to_string(), chart.g("dlam"));
    chart.install_rules(gens, vars)?;
    Ok(chart)
}

fn frame_chart() -> Result<Chart, FormError> {
    declare(ChartBuilder::new("tube-frame"))?
        .imag_gen("omega")
        .pair_gen("omega1", "omega1b")
        .pair_gen("theta2", "theta2b")
        .pair_gen("phi1", "phi1b")
        .pair_gen("phi2", "phi2b")
        .aux_gen("dlam")
        .aux_gen("sig")
        .aux_gen("sigb")
        .finish()
}

/// `da/a` in the frame: `−ā²θ²/2 + a²θ²̄/2 + (3b/2 + āR/2)ω¹ − (3b̄/2 + aR/2)ω¹̄ + (φ² − φ²̄)/2`.
fn da_over_a(m: &TubeModel, f: &Chart, x: &Fiber) -> FormExpr {
    let h = half();
    let r = r_term(m, &x.u);
    let (a2, ab2) = (x.a.pow_int(2), x.a.pow_int(-2));
    let mut out = -&(&(&h * &ab2) * &f.g("theta2"));
    out = &out + &(&(&h * &a2) * &f.g("theta2b"));
    let c1 = &h * &(&(&ScalarExpr::int(3) * &x.b) + &(&x.a.recip() * &r));
    let c1b = &h * &(&(&ScalarExpr::int(3) * &x.bb) + &(&x.a * &r));
    out = &out + &(&c1 * &f.g("omega1"));
    out = &out - &(&c1b * &f.g("omega1b"));
    &out + &(&h * &(&f.g("phi2") - &f.g("phi2b")))
}

/// Images of the coordinate covectors in the frame.
fn images(m: &TubeModel, coords: &Chart, f: &Chart) -> Result<HashMap<String, FormExpr>, FormError> {
    let x = Fiber::of(f);
    let mut out = HashMap::new();
    let omega = f.g("omega");
    out.insert("mu".to_string(), &x.u.recip() * &omega);
    let dz2 = &(-&(&x.a.pow_int(-2) * &m.s.recip())) * &f.g("theta2");
    let nu = &x.a.recip() * &(&f.g("omega1") - &(&x.bb * &omega));
    let eta1 = &(&m.r11 * &x.u.recip()).sqrt() * &nu;
    let dz1 = &m.r11.recip() * &(&eta1 - &(&m.r12 * &dz2));
    out.insert("dz1b".to_string(), dz1.conjugate_form()?);
    out.insert("dz2b".to_string(), dz2.conjugate_form()?);
    out.insert("dz1".to_string(), dz1);
    out.insert("dz2".to_string(), dz2);
    let du_over_u = &(&(&(&x.b * &f.g("omega1")) + &(&x.bb * &f.g("omega1b"))) - &(&x.lam * &omega))
        + &(&f.g("phi2") + &f.g("phi2b"));
    out.insert("du".to_string(), &x.u * &du_over_u);
    out.insert("al".to_string(), &(-&ScalarExpr::i()) * &da_over_a(m, f, &x));
    let h = half();
    let db = &(&(&(&h * &x.lam) * &f.g("omega1b")) - &f.g("sigb")) + &f.g("phi1b");
    let dbb = &(&(-&(&(&h * &x.lam) * &f.g("omega1"))) - &f.g("sig")) + &f.g("phi1");
    out.insert("db".to_string(), db);
    out.insert("dbb".to_string(), dbb);
    out.insert("dlam".to_string(), f.g("dlam"));
    for g in coords.generators() {
        if !out.contains_key(&g.name) {
            return Err(FormError::Incomplete(g.name.clone()));
        }
    }
    Ok(out)
}

/// Builds μ, η¹, η², ν and the coframe ω = uμ, ω¹ = aν + b̄ω, θ² = −a²Sη²,
/// φ² on the coordinate chart, then checks that the substitution chain
/// sends them to the frame generators and that dω and dω¹ have the
/// structure of the model.
pub fn build_coframe(model: &TubeModel) -> Result<TubeCoframe, TubeError> {
    let coords = coords_chart(model)?;
    let frame = frame_chart()?;
    let images = images(model, &coords, &frame)?;
    let x = Fiber::of(&coords);
    let h = half();

    let mu = coords.g("mu");
    let eta1 = &(&model.r11 * &coords.g("dz1")) + &(&model.r12 * &coords.g("dz2"));
    let eta2 = coords.g("dz2");
    let nu = &(&x.u * &model.r11.recip()).sqrt() * &eta1;
    let omega = &x.u * &mu;
    let omega1 = &(&x.a * &nu) + &(&x.bb * &omega);
    let theta2 = &(-&(&x.a.pow_int(2) * &model.s)) * &eta2;
    let omega1b = omega1.conjugate_form()?;
    let theta2b = theta2.conjugate_form()?;
    let r = r_term(model, &x.u);
    let mut phi2 = &(&ScalarExpr::i() * &coords.g("al")) + &(&(&h * &x.u.recip()) * &coords.g("du"));
    phi2 = &phi2 + &(&(&h * &x.a.pow_int(-2)) * &theta2);
    phi2 = &phi2 - &(&(&h * &x.a.pow_int(2)) * &theta2b);
    phi2 = &phi2 - &(&(&(&ScalarExpr::int(2) * &x.b) + &(&(&h * &x.a.recip()) * &r)) * &omega1);
    phi2 = &phi2 + &(&(&x.bb + &(&(&h * &x.a) * &r)) * &omega1b);
    phi2 = &phi2 + &(&(&h * &x.lam) * &omega);

    let to_frame = |f: &FormExpr| f.rewrite_basis(&frame, &images, None);
    let g = |n: &str| frame.g(n);
    let mut checks = Vec::new();
    for (name, form, gen) in [
        ("omega", &omega, "omega"),
        ("omega1", &omega1, "omega1"),
        ("theta2", &theta2, "theta2"),
        ("phi2", &phi2, "phi2"),
    ] {
        checks.push(identity_check(
            model,
            &format!("image_{name}"),
            &(&to_frame(form)? - &g(gen)),
        )?);
    }

    let phi = &g("phi2") + &g("phi2b");
    let d_omega = &(&(-&(&g("omega1") ^ &g("omega1b"))) - &(&g("omega") ^ &phi)) - &to_frame(&omega.d()?)?;
    checks.push(identity_check(model, "d_omega", &d_omega)?);

    // dω¹ = θ²∧ω¹̄ − ω¹∧φ² − ω∧φ¹ up to ω∧(terms vanishing for b = 0)
    let want = &(&(&g("theta2") ^ &g("omega1b")) - &(&g("omega1") ^ &g("phi2"))) - &(&g("omega") ^ &g("phi1"));
    let residual = &to_frame(&omega1.d()?)? - &want;
    checks.push(identity_check(
        model,
        "d_omega1_mod_omega",
        &residual.reduce_mod(&["omega"])?,
    )?);
    let mut at_b0 = BTreeMap::new();
    at_b0.insert("b".to_string(), ScalarExpr::zero());
    at_b0.insert("bb".to_string(), ScalarExpr::zero());
    let sigma_part = residual.reduce_mod(&SIGMA)?.substitute_unchecked(&at_b0);
    checks.push(identity_check(model, "d_omega1_sigma_vanishes_at_b0", &sigma_part)?);

    checks.push(differentials_at_gamma0(model, &frame, &images)?);

    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| c.status == Status::Fail)
        .map(|c| c.name.as_str())
        .collect();
    if !failed.is_empty() {
        return Err(TubeError::Invariant(failed.join(", ")));
    }
    Ok(TubeCoframe {
        model: model.clone(),
        coords,
        frame,
        omega,
        omega1,
        theta2,
        phi2,
        images,
        checks,
    })
}

pub(crate) fn gamma0() -> BTreeMap<String, ScalarExpr> {
    GAMMA0
        .iter()
        .map(|(n, v)| (n.to_string(), ScalarExpr::int(*v)))
        .collect()
}

/// On γ₀: du = φ² + φ²̄, da = −θ²/2 + θ²̄/2 + (ρ₁₁₁/2√ρ₁₁³)(ω¹ − ω¹̄) + (φ² − φ²̄)/2, db = φ¹̄.
fn differentials_at_gamma0(m: &TubeModel, f: &Chart, images: &HashMap<String, FormExpr>) -> Result<Check, TubeError> {
    let g0 = gamma0();
    let at = |n: &str| images[n].substitute_unchecked(&g0).reduce_mod(&SIGMA);
    let h = half();
    let q = &h * &r_term(m, &ScalarExpr::one());
    let du = &f.g("phi2") + &f.g("phi2b");
    let mut da = &(&h * &(&f.g("theta2b") - &f.g("theta2"))) + &(&q * &(&f.g("omega1") - &f.g("omega1b")));
    da = &da + &(&h * &(&f.g("phi2") - &f.g("phi2b")));
    let al = &(-&ScalarExpr::i()) * &da;
    let parts = [
        ("du", &at("du")? - &du),
        ("da", &at("al")? - &al),
        ("db", &at("db")? - &f.g("phi1b")),
    ];
    let mut worst = ZeroVerdict::Zero;
    let mut methods = Vec::new();
    for (_, p) in &parts {
        let (v, method) = form_verdict(m, p)?;
        methods.push(method);
        worst = match (worst, v) {
            (ZeroVerdict::NonZero, _) | (_, ZeroVerdict::NonZero) => ZeroVerdict::NonZero,
            (ZeroVerdict::Inconclusive, _) | (_, ZeroVerdict::Inconclusive) => ZeroVerdict::Inconclusive,
            _ => ZeroVerdict::Zero,
        };
    }
    Ok(Check::new(
        "differentials_at_gamma0",
        status(worst),
        json!({ "method": if methods.iter().all(|m| *m == "exact") { "exact" } else { "sampled" } }),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flatness {
    NotFlat,
    NecessaryConditionPassed,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct CurvatureVerdict {
    /// Coefficient of θ²∧ω¹̄ with general fiber coordinates.
    pub theta2_2bar1: ScalarExpr,
    pub c: ScalarExpr,
    pub theta2_21_gamma0: ScalarExpr,
    pub theta2_21_final: ScalarExpr,
    pub is_final_zero: ZeroVerdict,
    pub final_method: &'static str,
    pub cartan_obstruction: bool,
    pub flatness: Flatness,
    pub checks: Vec<Check>,
}

/// Fails if an auxiliary covector other than in a word with ω survives.
fn guard_auxiliary(f: &FormExpr, aux: &[&str]) -> Result<(), TubeError> {
    for (w, _) in f.terms() {
        let names = f.word_names(w);
        if names.iter().any(|n| aux.contains(&n.as_str())) && !names.iter().any(|n| n == "omega") {
            return Err(TubeError::Auxiliary(names.join("^")));
        }
    }
    Ok(())
}

fn compare_check(
    m: &TubeModel,
    name: &str,
    got: &ScalarExpr,
    want: &ScalarExpr,
    fiber: bool,
) -> Result<Check, TubeError> {
    let (v, method) = zero_verdict(m, &(got - want), fiber)?;
    Ok(Check::new(name, status(v), json!({ "method": method })))
}

/// Θ² = dθ² + θ²∧(φ² − φ²̄) − ω¹∧φ¹, its coefficients Θ²₂₁̄ and (on γ₀)
/// Θ²₂₁, and the normalized Θ̃²₂₁ on γ₀ after θ̃² = θ² − cω¹ with
/// c = Θ²₂₁̄/3.
pub fn curvature_coefficients(cf: &TubeCoframe) -> Result<CurvatureVerdict, TubeError> {
    let m = &cf.model;
    let f = &cf.frame;
    let g = |n: &str| f.g(n);
    let d_theta = cf.theta2.d()?.rewrite_basis(f, &cf.images, None)?;
    let theta = &(&d_theta + &(&g("theta2") ^ &(&g("phi2") - &g("phi2b")))) - &(&g("omega1") ^ &g("phi1"));
    guard_auxiliary(&theta, &["dlam", "sig", "sigb"])?;

    let theta2_2bar1 = theta.coefficient(&["theta2", "omega1b"])?;
    let c = &ScalarExpr::ratio(1, 3) * &theta2_2bar1;
    let g0 = gamma0();
    let theta0 = theta.substitute_unchecked(&g0).reduce_mod(&SIGMA)?;
    let theta2_21_gamma0 = theta0.coefficient(&["theta2", "omega1"])?;

    let dc = FormExpr::scalar(&cf.coords, c.clone())
        .d()?
        .rewrite_basis(f, &cf.images, None)?;
    let dc0 = dc.substitute_unchecked(&g0).reduce_mod(&SIGMA)?;
    guard_auxiliary(&dc0, &["dlam"])?;
    let c0 = c.substitute_unchecked(&g0);
    let t2w1 = &g("theta2") ^ &g("omega1");
    let t2w1b = &g("theta2") ^ &g("omega1b");
    let mut tilde = &theta0 - &(&dc0 ^ &g("omega1"));
    tilde = &tilde + &(&(&ScalarExpr::int(2) * &c0.conjugate()) * &t2w1);
    tilde = &tilde - &(&(&ScalarExpr::int(3) * &c0) * &t2w1b);
    let theta2_21_final = tilde.coefficient(&["theta2", "omega1"])?;

    let x = Fiber::of(f);
    let mut checks = vec![
        compare_check(
            m,
            "theta2_2bar1_matches_reference",
            &theta2_2bar1,
            &reference_theta2_2bar1(m, &x),
            true,
        )?,
        compare_check(
            m,
            "theta2_21_matches_reference",
            &theta2_21_gamma0,
            &reference_theta2_21(m),
            false,
        )?,
        compare_check(
            m,
            "final_matches_reference_formula",
            &theta2_21_final,
            &reference_final(m),
            false,
        )?,
    ];
    let normalized = tilde.coefficient(&["theta2", "omega1b"])?;
    checks.push(compare_check(
        m,
        "normalized_theta2_2bar1_vanishes",
        &normalized,
        &ScalarExpr::zero(),
        false,
    )?);

    let (is_final_zero, final_method) = zero_verdict(m, &theta2_21_final, false)?;
    let cartan_obstruction = is_final_zero == ZeroVerdict::NonZero;
    let flatness = match is_final_zero {
        ZeroVerdict::NonZero => Flatness::NotFlat,
        ZeroVerdict::Zero => Flatness::NecessaryConditionPassed,
        ZeroVerdict::Inconclusive => Flatness::Inconclusive,
    };
    Ok(CurvatureVerdict {
        theta2_2bar1,
        c,
        theta2_21_gamma0,
        theta2_21_final,
        is_final_zero,
        final_method,
        cartan_obstruction,
        flatness,
        checks,
    })
}

/// What the final coefficient says about flatness.
pub fn flatness_probe(v: &CurvatureVerdict) -> Report {
    let mut report = Report::new("tube-flatness", json!({}));
    let (status, message) = match v.flatness {
        Flatness::NotFlat => (
            Status::Pass,
            "not flat; not locally CR-equivalent to the model; the parallelism is not a Cartan connection",
        ),
        Flatness::NecessaryConditionPassed => (Status::Pass, "necessary condition passed; flatness NOT concluded"),
        Flatness::Inconclusive => (Status::Inconclusive, "zero test inconclusive; nonzero not claimed"),
    };
    report.push(Check::new(
        "flatness",
        status,
        json!({
            "flatness": v.flatness,
            "cartan_obstruction": v.cartan_obstruction,
            "is_final_zero": v.is_final_zero,
            "message": message,
        }),
    ));
    report
}
