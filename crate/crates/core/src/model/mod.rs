//! The homogeneous model: the group of 5×5 matrices preserving the forms
//! `S` and `T`, its Lie algebra so(3,2), the isotropy subgroups H¹ and H²,
//! the Maurer–Cartan coframe and the adjoint action on it.
//!
//! Matrix entries are addressed 1-based. The Maurer–Cartan matrix has the
//! layout
//!
//! ```text
//! φ²   θ²   θ¹   θ    0
//! θ²̄   φ²̄   θ¹̄   0   −θ
//! φ¹̄   φ¹   0   −θ¹̄  −θ¹
//! ψ    0   −φ¹  −φ²̄  −θ²
//! 0   −ψ   −φ¹̄  −θ²̄  −φ²
//! ```

mod adjoint;
mod matrix;

use std::sync::OnceLock;

use num_complex::Complex64;
use serde_json::json;

use crate::expr::{ExprError, ScalarExpr};
use crate::exterior::{load_chart, Chart, FormError, FormExpr};
use crate::report::{Check, Report, Status};

pub use adjoint::{
    expected_forms, frame_chart, numeric_adjoint_check, table_forms, verify_adjoint_transforms,
    verify_adjoint_transforms_with, HatTable, H1_CHECKS, H2_HATS,
};
pub use matrix::{FormMatrix, Matrix5};

/// Declarative source of the model chart.
pub const MODEL_CHART: &str = include_str!("../../charts/model.chart");

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("subgroup parameter A must be nonzero")]
    ZeroParameter,
    #[error("the zero vector is not a point of projective space")]
    ZeroVector,
}

/// The model chart with the Maurer–Cartan structure equations installed.
pub fn model_chart() -> &'static Chart {
    static CHART: OnceLock<Chart> = OnceLock::new();
    CHART.get_or_init(|| load_chart(MODEL_CHART).expect("model chart is well formed"))
}

/// The constant matrices `S`, `T` of the bilinear and Hermitian forms, and
/// `J = diag(1,1,1,−1,−1)`.
pub fn bilinear_matrices() -> (Matrix5, Matrix5, Matrix5) {
    let s = Matrix5::from_fn(|i, j| ScalarExpr::int((i + j == 4) as i64));
    let t = Matrix5::from_ints([
        [0, 0, 0, 1, 0],
        [0, 0, 0, 0, 1],
        [0, 0, 1, 0, 0],
        [1, 0, 0, 0, 0],
        [0, 1, 0, 0, 0],
    ]);
    let j = Matrix5::from_fn(|a, b| match (a == b, a < 3) {
        (true, true) => ScalarExpr::one(),
        (true, false) => ScalarExpr::int(-1),
        _ => ScalarExpr::zero(),
    });
    (s, t, j)
}

fn require_imaginary(name: &str, e: &ScalarExpr) -> Result<(), ExprError> {
    if (e + &e.conjugate()).is_zero_exact() {
        Ok(())
    } else {
        Err(ExprError::Reality(format!("`{name}` = {e} is not purely imaginary")))
    }
}

/// The element of so(3,2) with parameters α, β, γ, σ ∈ ℂ and δ, ρ ∈ iℝ.
pub fn algebra_element(
    alpha: &ScalarExpr,
    beta: &ScalarExpr,
    gamma: &ScalarExpr,
    sigma: &ScalarExpr,
    delta: &ScalarExpr,
    rho: &ScalarExpr,
) -> Result<Matrix5, ExprError> {
    require_imaginary("delta", delta)?;
    require_imaginary("rho", rho)?;
    let z = ScalarExpr::zero;
    let c = |e: &ScalarExpr| e.conjugate();
    Ok(Matrix5([
        [alpha.clone(), beta.clone(), gamma.clone(), delta.clone(), z()],
        [c(beta), c(alpha), c(gamma), z(), -delta],
        [sigma.clone(), c(sigma), z(), -c(gamma), -gamma],
        [rho.clone(), z(), -c(sigma), -c(alpha), -beta],
        [z(), -rho, -sigma, -c(beta), -alpha],
    ]))
}

/// Reads (α, β, γ, σ, δ, ρ) off `x` if it has the so(3,2) pattern exactly.
pub fn algebra_parameters(x: &Matrix5) -> Option<[ScalarExpr; 6]> {
    let p = [
        x.entry(1, 1).clone(),
        x.entry(1, 2).clone(),
        x.entry(1, 3).clone(),
        x.entry(3, 1).clone(),
        x.entry(1, 4).clone(),
        x.entry(4, 1).clone(),
    ];
    let rebuilt = algebra_element(&p[0], &p[1], &p[2], &p[3], &p[4], &p[5]).ok()?;
    rebuilt.sub(x).is_zero_exact().then_some(p)
}

/// `A` of H¹: diag(A, Ā, 1, Ā⁻¹, A⁻¹).
pub fn subgroup_h1(a: &ScalarExpr) -> Result<Matrix5, ModelError> {
    if a.is_zero_exact() {
        return Err(ModelError::ZeroParameter);
    }
    let ab = a.conjugate();
    let diag = [a.clone(), ab.clone(), ScalarExpr::one(), ab.recip(), a.recip()];
    Ok(Matrix5::from_fn(|i, j| {
        if i == j {
            diag[i].clone()
        } else {
            ScalarExpr::zero()
        }
    }))
}

/// `(B, Λ)` of H², Λ ∈ iℝ.
pub fn subgroup_h2(b: &ScalarExpr, lam: &ScalarExpr) -> Result<Matrix5, ModelError> {
    require_imaginary("Lambda", lam)?;
    let bb = b.conjugate();
    let half = ScalarExpr::ratio(1, 2);
    let nb = &(b * &bb) * &half;
    let z = ScalarExpr::zero;
    let one = ScalarExpr::one;
    Ok(Matrix5([
        [one(), z(), z(), z(), z()],
        [z(), one(), z(), z(), z()],
        [b.clone(), bb.clone(), one(), z(), z()],
        [lam - &nb, -(&(&bb * &bb) * &half), -&bb, one(), z()],
        [-(&(b * b) * &half), -lam - nb, -b, z(), one()],
    ]))
}

/// Checks `CᵗSC = S`, `CᵗTC̄ = T` and `det C = 1` exactly.
pub fn is_group_element(c: &Matrix5) -> bool {
    let (s, t, _) = bilinear_matrices();
    c.transpose().mul(&s).mul(c).sub(&s).is_zero_exact()
        && c.transpose().mul(&t).mul(&c.conjugate()).sub(&t).is_zero_exact()
        && (c.determinant() - ScalarExpr::one()).is_zero_exact()
}

/// Places six 1-forms (θ, θ¹, θ², φ¹, φ², ψ) into the Maurer–Cartan layout.
pub fn mc_pattern(parts: &[FormExpr; 6]) -> Result<FormMatrix, FormError> {
    let [t, t1, t2, p1, p2, ps] = parts;
    let chart = t.chart();
    let z = FormExpr::zero(chart, 1);
    let (t1b, t2b, p1b, p2b) = (
        t1.conjugate_form()?,
        t2.conjugate_form()?,
        p1.conjugate_form()?,
        p2.conjugate_form()?,
    );
    let rows = [
        [p2.clone(), t2.clone(), t1.clone(), t.clone(), z.clone()],
        [t2b.clone(), p2b.clone(), t1b.clone(), z.clone(), -t],
        [p1b.clone(), p1.clone(), z.clone(), -&t1b, -t1],
        [ps.clone(), z.clone(), -p1, -&p2b, -t2],
        [z, -ps, -&p1b, -&t2b, -p2],
    ];
    Ok(FormMatrix(rows))
}

/// Reads (θ, θ¹, θ², φ¹, φ², ψ) from the Maurer–Cartan layout.
pub fn mc_components(m: &FormMatrix) -> [FormExpr; 6] {
    [
        m.entry(1, 4).clone(),
        m.entry(1, 3).clone(),
        m.entry(1, 2).clone(),
        m.entry(3, 2).clone(),
        m.entry(1, 1).clone(),
        m.entry(4, 1).clone(),
    ]
}

/// The Maurer–Cartan matrix of a chart whose generators are named
/// theta, theta1, theta2, phi1, phi2, psi (with `b`-suffixed conjugates).
pub fn maurer_cartan(chart: &Chart) -> Result<FormMatrix, FormError> {
    let names = ["theta", "theta1", "theta2", "phi1", "phi2", "psi"];
    let parts: Vec<FormExpr> = names.iter().map(|n| chart.gen(n)).collect::<Result<_, _>>()?;
    mc_pattern(&parts.try_into().expect("six components"))
}

/// `dω − ω∧ω` entrywise on the model chart; every entry must vanish.
pub fn verify_structure_equations() -> Report {
    verify_structure_equations_on(model_chart())
}

/// As [`verify_structure_equations`], on any chart carrying the model
/// generators (used to rerun the check against altered rules).
pub fn verify_structure_equations_on(chart: &Chart) -> Report {
    let mut report = Report::new("model", json!({ "chart": chart.name() }));
    let residual = maurer_cartan(chart).and_then(|mc| Ok(mc.d()?.sub(&mc.wedge(&mc))));
    let residual = match residual {
        Ok(r) => r,
        Err(e) => {
            report.push(Check::new(
                "structure_equations",
                Status::Fail,
                json!({ "error": e.to_string() }),
            ));
            return report;
        }
    };
    for i in 1..=5 {
        for j in 1..=5 {
            let r = residual.entry(i, j);
            let zero = r.is_zero_exact();
            report.push(Check::new(
                format!("mc_entry_{i}_{j}"),
                Status::from_bool(zero),
                json!({ "residual": if zero { "0".to_string() } else { r.to_string() } }),
            ));
        }
    }
    report
}

/// Which boundary orbit `gamma_membership` tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Whether `z` lies on the real hypersurface orbit Γ± of the boundary of Ω±
/// in the `J` realization (tolerance 1e-10 after normalizing |z| = 1).
pub fn gamma_membership(z: [Complex64; 5], side: Side) -> Result<bool, ModelError> {
    let norm = z.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(ModelError::ZeroVector);
    }
    let z: Vec<Complex64> = z.iter().map(|w| w / norm).collect();
    let sign = [1.0, 1.0, 1.0, -1.0, -1.0];
    let form = |a: &dyn Fn(Complex64) -> f64, b: &dyn Fn(Complex64) -> f64| -> f64 {
        (0..5).map(|k| sign[k] * a(z[k]) * b(z[k])).sum()
    };
    let re = |w: Complex64| w.re;
    let im = |w: Complex64| w.im;
    let tol = 1e-10;
    let on_quadric = form(&re, &re).abs() < tol && form(&im, &im).abs() < tol && form(&re, &im).abs() < tol;
    let orient = z[3].re * z[4].im - z[4].re * z[3].im;
    Ok(on_quadric
        && match side {
            Side::Plus => orient > tol,
            Side::Minus => orient < -tol,
        })
}
