//! Dense complex linear-algebra helpers shared by the pipeline.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

pub const J: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius_real(m: &RMatrix) -> f64 {
    m.iter().map(|z| z * z).sum::<f64>().sqrt()
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

pub fn real_part(m: &CMatrix) -> RMatrix {
    m.map(|z| z.re)
}

pub fn imag_part(m: &CMatrix) -> RMatrix {
    m.map(|z| z.im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Plain transpose (no conjugation).
pub fn transpose(m: &CMatrix) -> CMatrix {
    m.transpose()
}

/// Ratio of extreme singular values; infinite when the matrix is rank deficient.
pub fn condition_number(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Row and column scale factors that bring every row and column of `a` to
/// unit max-norm (zero rows or columns keep scale 1).
fn equilibrate(a: &CMatrix) -> (RVector, RVector) {
    let n = a.nrows();
    let mut r = RVector::from_element(n, 1.0);
    for i in 0..n {
        let m = a.row(i).iter().fold(0.0f64, |m, x| m.max(x.norm()));
        if m > 0.0 {
            r[i] = 1.0 / m;
        }
    }
    let mut c = RVector::from_element(a.ncols(), 1.0);
    for j in 0..a.ncols() {
        let m = (0..n).fold(0.0f64, |m, i| m.max(r[i] * a[(i, j)].norm()));
        if m > 0.0 {
            c[j] = 1.0 / m;
        }
    }
    (r, c)
}

/// Solves `a x = b` by LU on the equilibrated system; reports a condition
/// estimate (of the equilibrated matrix) when the system is singular or too
/// ill-conditioned to trust.
pub fn lu_solve(a: &CMatrix, b: &CMatrix, context: &str) -> Result<CMatrix> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "{context}: system {}x{} with right-hand side {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(b.clone());
    }
    let (r, c) = equilibrate(a);
    let scaled = CMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * (r[i] * c[j]));
    let cond = condition_number(&scaled);
    if !cond.is_finite() || cond > 1e14 {
        return Err(Error::Solver {
            context: context.to_string(),
            condition: cond,
        });
    }
    let rhs = CMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * r[i]);
    let y = scaled.lu().solve(&rhs).ok_or_else(|| Error::Solver {
        context: context.to_string(),
        condition: cond,
    })?;
    Ok(CMatrix::from_fn(y.nrows(), y.ncols(), |i, j| y[(i, j)] * c[i]))
}

pub fn lu_solve_vec(a: &CMatrix, b: &CVector, context: &str) -> Result<CVector> {
    let bm = CMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = lu_solve(a, &bm, context)?;
    Ok(x.column(0).into_owned())
}

pub fn diag(values: &CVector) -> CMatrix {
    CMatrix::from_diagonal(values)
}

/// Relative error ‖a − b‖ / ‖b‖ (absolute when ‖b‖ = 0).
pub fn relative_error(a: &CVector, b: &CVector) -> f64 {
    let num = (a - b).norm();
    let den = b.norm();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Spectral radius via the complex Schur form.
pub fn spectral_radius(m: &CMatrix) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    match m.clone().try_schur(1e-14, 10_000) {
        Some(s) => s
            .eigenvalues()
            .map(|ev| ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .unwrap_or(f64::NAN),
        None => f64::NAN,
    }
}

/// Block-diagonal stacking of rectangular blocks.
pub fn block_diag(blocks: &[&CMatrix]) -> CMatrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r0, mut c0) = (0, 0);
    for b in blocks {
        out.view_mut((r0, c0), (b.nrows(), b.ncols())).copy_from(*b);
        r0 += b.nrows();
        c0 += b.ncols();
    }
    out
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    let mut y = x % (2.0 * PI);
    if y <= -PI {
        y += 2.0 * PI;
    } else if y > PI {
        y -= 2.0 * PI;
    }
    y
}
