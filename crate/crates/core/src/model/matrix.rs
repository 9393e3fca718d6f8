use std::fmt;

use crate::expr::{sum_all, ScalarExpr};
use crate::exterior::{Chart, FormExpr};

/// A 5×5 matrix of scalar expressions (0-based storage, 1-based accessors).
#[derive(Clone, PartialEq)]
pub struct Matrix5(pub [[ScalarExpr; 5]; 5]);

impl Matrix5 {
    pub fn from_fn(f: impl Fn(usize, usize) -> ScalarExpr) -> Self {
        Matrix5(std::array::from_fn(|i| std::array::from_fn(|j| f(i, j))))
    }

    pub fn from_ints(rows: [[i64; 5]; 5]) -> Self {
        Matrix5::from_fn(|i, j| ScalarExpr::int(rows[i][j]))
    }

    pub fn zero() -> Self {
        Matrix5::from_fn(|_, _| ScalarExpr::zero())
    }

    pub fn identity() -> Self {
        Matrix5::from_fn(|i, j| if i == j { ScalarExpr::one() } else { ScalarExpr::zero() })
    }

    /// Entry in 1-based indexing.
    pub fn entry(&self, row: usize, col: usize) -> &ScalarExpr {
        &self.0[row - 1][col - 1]
    }

    pub fn transpose(&self) -> Self {
        Matrix5::from_fn(|i, j| self.0[j][i].clone())
    }

    pub fn conjugate(&self) -> Self {
        Matrix5::from_fn(|i, j| self.0[i][j].conjugate())
    }

    pub fn mul(&self, other: &Matrix5) -> Self {
        Matrix5::from_fn(|i, j| sum_all((0..5).map(|k| &self.0[i][k] * &other.0[k][j])))
    }

    pub fn add(&self, other: &Matrix5) -> Self {
        Matrix5::from_fn(|i, j| &self.0[i][j] + &other.0[i][j])
    }

    pub fn sub(&self, other: &Matrix5) -> Self {
        Matrix5::from_fn(|i, j| &self.0[i][j] - &other.0[i][j])
    }

    pub fn is_zero_exact(&self) -> bool {
        self.0.iter().flatten().all(ScalarExpr::is_zero_exact)
    }

    /// Leibniz expansion over permutations, skipping zero entries.
    pub fn determinant(&self) -> ScalarExpr {
        fn rec(m: &Matrix5, row: usize, used: &mut [bool; 5], sign: i64, acc: ScalarExpr, out: &mut Vec<ScalarExpr>) {
            if row == 5 {
                out.push(if sign < 0 { -acc } else { acc });
                return;
            }
            let mut inversions_before = 0;
            for col in 0..5 {
                if used[col] {
                    continue;
                }
                // Sign flips by the number of unused columns to the left.
                let s = if inversions_before % 2 == 0 { sign } else { -sign };
                inversions_before += 1;
                let e = &m.0[row][col];
                if e.is_zero() {
                    continue;
                }
                used[col] = true;
                rec(m, row + 1, used, s, &acc * e, out);
                used[col] = false;
            }
        }
        let mut out = Vec::new();
        rec(self, 0, &mut [false; 5], 1, ScalarExpr::one(), &mut out);
        sum_all(out)
    }
}

impl fmt::Debug for Matrix5 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.0 {
            let cells: Vec<String> = row.iter().map(|e| e.to_string()).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// A 5×5 matrix of differential forms over one chart.
#[derive(Clone, PartialEq)]
pub struct FormMatrix(pub [[FormExpr; 5]; 5]);

impl FormMatrix {
    pub fn from_fn(f: impl Fn(usize, usize) -> FormExpr) -> Self {
        FormMatrix(std::array::from_fn(|i| std::array::from_fn(|j| f(i, j))))
    }

    pub fn chart(&self) -> &Chart {
        self.0[0][0].chart()
    }

    /// Entry in 1-based indexing.
    pub fn entry(&self, row: usize, col: usize) -> &FormExpr {
        &self.0[row - 1][col - 1]
    }

    pub fn d(&self) -> Result<Self, crate::exterior::FormError> {
        let mut rows: Vec<FormExpr> = Vec::with_capacity(25);
        for row in &self.0 {
            for e in row {
                rows.push(e.d()?);
            }
        }
        Ok(FormMatrix::from_fn(|i, j| rows[5 * i + j].clone()))
    }

    /// Matrix product with entries multiplied by the wedge product.
    pub fn wedge(&self, other: &FormMatrix) -> Self {
        FormMatrix::from_fn(|i, j| {
            let deg = self.0[i][0].degree() + other.0[0][j].degree();
            (0..5).fold(FormExpr::zero(self.chart(), deg), |acc, k| {
                &acc + &(&self.0[i][k] ^ &other.0[k][j])
            })
        })
    }

    /// `m · self` for a scalar matrix `m`.
    pub fn left_mul(&self, m: &Matrix5) -> Self {
        FormMatrix::from_fn(|i, j| {
            (0..5).fold(FormExpr::zero(self.chart(), self.0[0][j].degree()), |acc, k| {
                &acc + &self.0[k][j].scale(&m.0[i][k])
            })
        })
    }

    /// `self · m` for a scalar matrix `m`.
    pub fn right_mul(&self, m: &Matrix5) -> Self {
        FormMatrix::from_fn(|i, j| {
            (0..5).fold(FormExpr::zero(self.chart(), self.0[i][0].degree()), |acc, k| {
                &acc + &self.0[i][k].scale(&m.0[k][j])
            })
        })
    }

    pub fn sub(&self, other: &FormMatrix) -> Self {
        FormMatrix::from_fn(|i, j| &self.0[i][j] - &other.0[i][j])
    }
}
