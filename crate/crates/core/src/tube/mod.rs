//! Tube hypersurfaces `z₃ + z̄₃ = ρ(z₁ + z̄₁, z₂ + z̄₂)`: hypothesis
//! screening, the coframe on P² and the first normalized curvature
//! coefficient along the section γ₀ (u = 1, a = 1, b = 0, λ = 0).

mod analysis;
mod coframe;

use std::collections::BTreeMap;

use nalgebra::{Matrix2, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::expr::{
    is_identically_zero, parse, DomainBox, ExprError, Point, ScalarExpr, Variable, VariableTable, ZeroTest, ZeroVerdict,
};
use crate::exterior::FormError;

pub use analysis::{analyze, bundled_example, closed_form_check, profile, TubeAnalysis, LEVI_TOL, REPORT_POINTS};
pub use coframe::{
    build_coframe, curvature_coefficients, flatness_probe, CurvatureVerdict, Flatness, TubeCoframe, GAMMA0,
};

/// The example solution `((1−12t₁t₂)^{3/2} + 18t₁t₂ − 1)/(108t₂²)`.
pub const EXAMPLE_RHO: &str = "((1 - 12*t1*t2)^(3/2) + 18*t1*t2 - 1)/(108*t2^2)";

/// Its final coefficient `Θ̃²₂₁` on γ₀.
pub const EXAMPLE_FINAL: &str = "-12*t2/((1 - 12*t1*t2)^(3/4)*(1 - sqrt(1 - 12*t1*t2)))";

/// Default sampling box for the example, inside `1 − 12t₁t₂ > 0`, `t₂ ≠ 0`.
pub const EXAMPLE_BOX: &str = "t1=0.02:0.08,t2=0.02:0.08";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    MongeAmpere,
    Positivity,
    TwoNondegeneracy,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Hypothesis::MongeAmpere => "Monge-Ampere",
            Hypothesis::Positivity => "positivity",
            Hypothesis::TwoNondegeneracy => "2-nondegeneracy",
        })
    }
}

#[derive(Debug, Clone, Error)]
pub enum TubeError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("{hypothesis}: {reason}")]
    Hypothesis { hypothesis: Hypothesis, reason: String },
    #[error("point ({0}, {1}) lies outside the domain box")]
    OutsideBox(f64, f64),
    #[error("coframe identity failed: {0}")]
    Invariant(String),
    #[error("auxiliary covector in extracted coefficient: {0}")]
    Auxiliary(String),
}

/// Sampling parameters shared by the numeric checks of the pipeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sampling {
    pub seed: u64,
    pub trials: usize,
    pub tol: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            seed: 0,
            trials: 32,
            tol: 1e-8,
        }
    }
}

/// Outcome of one hypothesis, with the method that decided it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub holds: bool,
    pub method: &'static str,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hypotheses {
    pub ma: HypothesisCheck,
    pub positivity: HypothesisCheck,
    pub twonondeg: HypothesisCheck,
}

/// A defining function together with the derivatives the pipeline uses.
#[derive(Clone, Debug)]
pub struct TubeModel {
    pub rho: ScalarExpr,
    pub vars: VariableTable,
    pub r1: ScalarExpr,
    pub r2: ScalarExpr,
    pub r11: ScalarExpr,
    pub r12: ScalarExpr,
    pub r22: ScalarExpr,
    pub r111: ScalarExpr,
    pub r112: ScalarExpr,
    /// `S = (ρ₁₂/ρ₁₁)₁`.
    pub s: ScalarExpr,
    pub s1: ScalarExpr,
    pub s2: ScalarExpr,
    pub domain: DomainBox,
    pub sampling: Sampling,
}

/// Real variables t₁, t₂.
pub fn base_variables() -> VariableTable {
    let mut t = VariableTable::new();
    t.declare(Variable::real("t1")).expect("fresh table");
    t.declare(Variable::real("t2")).expect("fresh table");
    t
}

pub fn example_rho() -> ScalarExpr {
    parse(EXAMPLE_RHO, &base_variables()).expect("constant expression parses")
}

impl TubeModel {
    /// Differentiates without checking any hypothesis.
    pub fn new(rho: ScalarExpr, domain: DomainBox, sampling: Sampling) -> Self {
        let d = |e: &ScalarExpr, v: &str| e.differentiate(v);
        let r1 = d(&rho, "t1");
        let r2 = d(&rho, "t2");
        let r11 = d(&r1, "t1");
        let r12 = d(&r1, "t2");
        let r22 = d(&r2, "t2");
        let r111 = d(&r11, "t1");
        let r112 = d(&r11, "t2");
        let s = d(&(&r12 * &r11.recip()), "t1");
        let s1 = d(&s, "t1");
        let s2 = d(&s, "t2");
        TubeModel {
            rho,
            vars: base_variables(),
            r1,
            r2,
            r11,
            r12,
            r22,
            r111,
            r112,
            s,
            s1,
            s2,
            domain,
            sampling,
        }
    }

    pub fn ma_residual(&self) -> ScalarExpr {
        &(&self.r11 * &self.r22) - &(&self.r12 * &self.r12)
    }

    pub(crate) fn zero_test(&self) -> ZeroTest {
        ZeroTest::new(self.domain.clone())
            .trials(self.sampling.trials)
            .seed(self.sampling.seed)
            .tol(self.sampling.tol)
    }

    /// Exact test first, then the seeded numeric test on the box.
    pub fn zero_verdict(&self, e: &ScalarExpr) -> Result<(ZeroVerdict, &'static str), ExprError> {
        if e.is_zero_exact() {
            return Ok((ZeroVerdict::Zero, "exact"));
        }
        Ok((is_identically_zero(e, &self.zero_test())?, "sampled"))
    }

    /// Sample points of the box (seeded).
    pub fn sample_points(&self, n: usize) -> Result<Vec<Point>, ExprError> {
        let probe = &self.vars.get("t1").map(ScalarExpr::var).expect("declared")
            * &self.vars.get("t2").map(ScalarExpr::var).expect("declared");
        ZeroTest::new(self.domain.clone())
            .trials(n)
            .seed(self.sampling.seed)
            .points(&probe)
    }

    /// Checks the Monge–Ampère equation, `ρ₁₁ > 0` and `S ≢ 0`.
    pub fn hypotheses(&self) -> Result<Hypotheses, ExprError> {
        let (ma, ma_method) = self.zero_verdict(&self.ma_residual())?;
        let ma = HypothesisCheck {
            holds: ma == ZeroVerdict::Zero,
            method: ma_method,
            detail: match ma {
                ZeroVerdict::Zero => "rho11*rho22 - rho12^2 = 0".into(),
                ZeroVerdict::NonZero => "rho11*rho22 - rho12^2 does not vanish".into(),
                ZeroVerdict::Inconclusive => "no sample point evaluated".into(),
            },
        };

        let mut worst: Option<f64> = None;
        let mut bad = None;
        for p in self.sample_points(self.sampling.trials)? {
            match self.r11.evaluate(&p) {
                Ok(v) if v.im.abs() <= 1e-12 * v.norm().max(1.0) => {
                    worst = Some(worst.map_or(v.re, |w| w.min(v.re)));
                    if v.re <= 0.0 && bad.is_none() {
                        bad = Some(format!(
                            "rho11 = {} at t1 = {}, t2 = {}",
                            v.re,
                            p.get("t1").unwrap_or_default().re,
                            p.get("t2").unwrap_or_default().re
                        ));
                    }
                }
                Ok(_) => bad = bad.or(Some("rho11 is not real on the box".into())),
                Err(e) => bad = bad.or(Some(format!("rho11 cannot be evaluated: {e}"))),
            }
        }
        let positivity = HypothesisCheck {
            holds: bad.is_none() && worst.is_some(),
            method: "sampled",
            detail: bad.unwrap_or_else(|| format!("min rho11 = {}", worst.unwrap_or(f64::NAN))),
        };

        let (s, s_method) = self.zero_verdict(&self.s)?;
        let twonondeg = HypothesisCheck {
            holds: s == ZeroVerdict::NonZero,
            method: s_method,
            detail: match s {
                ZeroVerdict::Zero => "S ≡ 0".into(),
                ZeroVerdict::NonZero => "S ≢ 0".into(),
                ZeroVerdict::Inconclusive => "S could not be evaluated".into(),
            },
        };
        Ok(Hypotheses {
            ma,
            positivity,
            twonondeg,
        })
    }
}

/// Parses ρ over t₁, t₂ and checks the three hypotheses, naming the first
/// one that fails.
pub fn tube_from_rho(text: &str, domain: DomainBox, sampling: Sampling) -> Result<TubeModel, TubeError> {
    let rho = parse(text, &base_variables())?;
    let model = TubeModel::new(rho, domain, sampling);
    let h = model.hypotheses()?;
    for (hyp, check) in [
        (Hypothesis::MongeAmpere, &h.ma),
        (Hypothesis::Positivity, &h.positivity),
        (Hypothesis::TwoNondegeneracy, &h.twonondeg),
    ] {
        if !check.holds {
            return Err(TubeError::Hypothesis {
                hypothesis: hyp,
                reason: check.detail.clone(),
            });
        }
    }
    Ok(model)
}

/// `ρ = t₂·g(t₁/t₂)`, a solution of the homogeneous Monge–Ampère equation
/// for any `g`. The residual is verified before returning.
pub fn ma_profile_solution(g_text: &str) -> Result<ScalarExpr, TubeError> {
    let mut one = VariableTable::new();
    one.declare(Variable::real("s"))?;
    let g = parse(g_text, &one)?;
    let vars = base_variables();
    let t1 = ScalarExpr::var(vars.get("t1").expect("declared"));
    let t2 = ScalarExpr::var(vars.get("t2").expect("declared"));
    let mut sub = BTreeMap::new();
    sub.insert("s".to_string(), &t1 * &t2.recip());
    let rho = &t2 * &g.substitute(&sub)?;
    let model = TubeModel::new(
        rho,
        DomainBox::new().with("t1", 0.5, 1.0).with("t2", 0.5, 1.0),
        Sampling::default(),
    );
    match model.zero_verdict(&model.ma_residual())? {
        (ZeroVerdict::Zero, _) => Ok(model.rho),
        (v, _) => Err(TubeError::Invariant(format!(
            "profile solution has Monge-Ampere verdict {v:?}"
        ))),
    }
}

/// Eigenvalues and numeric rank of the Levi matrix `[[ρ₁₁, ρ₁₂], [ρ₁₂, ρ₂₂]]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeviPoint {
    pub t1: f64,
    pub t2: f64,
    /// Sorted by decreasing absolute value.
    pub eigenvalues: [f64; 2],
    pub rank: usize,
}

/// Rank counts eigenvalues with `|λ| > tol·(|λ₁| + |λ₂|)`.
pub fn levi_rank_numeric(model: &TubeModel, points: &[(f64, f64)], tol: f64) -> Result<Vec<LeviPoint>, TubeError> {
    let mut out = Vec::with_capacity(points.len());
    for &(t1, t2) in points {
        let inside = |name: &str, x: f64| model.domain.get(name).is_none_or(|(lo, hi)| lo <= x && x <= hi);
        if !inside("t1", t1) || !inside("t2", t2) {
            return Err(TubeError::OutsideBox(t1, t2));
        }
        let mut p = Point::new();
        p.bind(model.vars.get("t1").expect("declared"), t1.into())?;
        p.bind(model.vars.get("t2").expect("declared"), t2.into())?;
        let e = |x: &ScalarExpr| x.evaluate(&p).map(|z| z.re);
        let (a, b, c) = (e(&model.r11)?, e(&model.r12)?, e(&model.r22)?);
        let eig = SymmetricEigen::new(Matrix2::new(a, b, b, c)).eigenvalues;
        let mut ev = [eig[0], eig[1]];
        ev.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
        let scale = ev[0].abs() + ev[1].abs();
        let rank = ev.iter().filter(|x| x.abs() > tol * scale).count();
        out.push(LeviPoint {
            t1,
            t2,
            eigenvalues: ev,
            rank,
        });
    }
    Ok(out)
}

/// `n` seeded points of the model's box as `(t₁, t₂)` pairs.
pub fn sample_box(model: &TubeModel, n: usize) -> Result<Vec<(f64, f64)>, TubeError> {
    Ok(model
        .sample_points(n)?
        .iter()
        .map(|p| (p.get("t1").unwrap_or_default().re, p.get("t2").unwrap_or_default().re))
        .collect())
}
