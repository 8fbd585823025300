//! Small dense matrices (at most 8x8) with a pivoted-elimination
//! determinant and an SVD-based numerical kernel.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::Tolerances;

pub const MAX_DIM: usize = 8;

/// Scalar types a [`SmallMatrix`] can hold: `f64` and `Complex64`.
pub trait Entry: ComplexField<RealField = f64> + Copy + fmt::Debug {}

impl Entry for f64 {}
impl Entry for Complex64 {}

#[derive(Clone, PartialEq)]
pub struct SmallMatrix<T: Entry> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Entry> fmt::Debug for SmallMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SmallMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl<T: Entry> SmallMatrix<T> {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > MAX_DIM || cols > MAX_DIM {
            return Err(Error::contract(format!(
                "matrix shape {rows}x{cols} outside 1..={MAX_DIM}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::contract("ragged rows"));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::from_row_major(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::from_row_major(rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self[(r, c)]);
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        self.transpose().map(|v| v.conjugate())
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.modulus_squared()).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::contract(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::contract(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols)?;
        for r in 0..self.rows {
            for c in 0..other.cols {
                out[(r, c)] = (0..self.cols).fold(T::zero(), |acc, k| acc + self[(r, k)] * other[(k, c)]);
            }
        }
        Ok(out)
    }

    fn to_nalgebra(&self) -> DMatrix<T> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl<T: Entry> Index<(usize, usize)> for SmallMatrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T: Entry> IndexMut<(usize, usize)> for SmallMatrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

fn zip_same_shape<T: Entry>(a: &SmallMatrix<T>, b: &SmallMatrix<T>, f: impl Fn(T, T) -> T) -> SmallMatrix<T> {
    assert_eq!((a.rows, a.cols), (b.rows, b.cols), "shape mismatch");
    SmallMatrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
    }
}

impl<T: Entry> Add for &SmallMatrix<T> {
    type Output = SmallMatrix<T>;
    fn add(self, rhs: Self) -> SmallMatrix<T> {
        zip_same_shape(self, rhs, |x, y| x + y)
    }
}

impl<T: Entry> Sub for &SmallMatrix<T> {
    type Output = SmallMatrix<T>;
    fn sub(self, rhs: Self) -> SmallMatrix<T> {
        zip_same_shape(self, rhs, |x, y| x - y)
    }
}

impl<T: Entry> Mul for &SmallMatrix<T> {
    type Output = SmallMatrix<T>;
    fn mul(self, rhs: Self) -> SmallMatrix<T> {
        self.matmul(rhs).expect("inner dimensions must agree")
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant<T: Entry>(m: &SmallMatrix<T>) -> Result<T> {
    if !m.is_square() {
        return Err(Error::contract(format!(
            "determinant of a non-square {}x{} matrix",
            m.rows, m.cols
        )));
    }
    let n = m.rows;
    let mut a = m.data.clone();
    let mut det = T::one();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[p * n + col].modulus().total_cmp(&a[q * n + col].modulus()))
            .expect("non-empty range");
        if a[pivot * n + col].modulus() == 0.0 {
            return Ok(T::zero());
        }
        if pivot != col {
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for r in col + 1..n {
            let factor = a[r * n + col] / p;
            if factor.modulus() == 0.0 {
                continue;
            }
            for c in col..n {
                let v = a[col * n + c];
                a[r * n + c] -= factor * v;
            }
        }
    }
    Ok(det)
}

/// Orthonormal basis of the numerical kernel of `m`.
///
/// A right singular direction belongs to the kernel when its singular value
/// is below `tol.abs_tol` times the largest singular value; a zero matrix has
/// the whole space as kernel. Wide matrices are padded with zero rows so
/// that every direction is resolved by the decomposition.
pub fn null_space<T: Entry>(m: &SmallMatrix<T>, tol: &Tolerances) -> Vec<Vec<T>> {
    let n = m.cols;
    let mut a = m.to_nalgebra();
    if m.rows < n {
        a = a.resize_vertically(n, T::zero());
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let threshold = tol.abs_tol * sigma_max;
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|&(_, &s)| sigma_max == 0.0 || s < threshold)
        .map(|(idx, _)| (0..n).map(|c| v_t[(idx, c)].conjugate()).collect())
        .collect()
}

/// Singular values of `m`, descending.
pub fn singular_values<T: Entry>(m: &SmallMatrix<T>) -> Vec<f64> {
    let mut s: Vec<f64> = m.to_nalgebra().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Euclidean norm of a vector of entries.
pub fn vec_norm<T: Entry>(v: &[T]) -> f64 {
    v.iter().map(|x| x.modulus_squared()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: &[&[f64]]) -> SmallMatrix<f64> {
        SmallMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn identity_determinant_is_one() {
        assert_eq!(determinant(&SmallMatrix::<f64>::identity(4).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn repeated_row_determinant_is_zero() {
        let m = real(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[1.0, 2.0, 3.0]]);
        assert!(determinant(&m).unwrap().abs() < 1e-14);
    }

    #[test]
    fn swap_flips_sign() {
        let m = real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(determinant(&m).unwrap(), -1.0);
    }

    #[test]
    fn non_square_determinant_is_contract_violation() {
        let m = SmallMatrix::<f64>::zeros(2, 3).unwrap();
        assert!(matches!(determinant(&m), Err(Error::Contract(_))));
    }

    #[test]
    fn oversized_shapes_rejected() {
        assert!(SmallMatrix::<f64>::zeros(9, 2).is_err());
        assert!(SmallMatrix::<f64>::from_row_major(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn identity_has_empty_kernel() {
        let tol = Tolerances::default();
        assert!(null_space(&SmallMatrix::<f64>::identity(5).unwrap(), &tol).is_empty());
    }

    #[test]
    fn zero_matrix_kernel_is_everything() {
        let tol = Tolerances::default();
        let k = null_space(&SmallMatrix::<f64>::zeros(6, 6).unwrap(), &tol);
        assert_eq!(k.len(), 6);
    }

    #[test]
    fn wide_matrix_kernel_has_expected_dimension() {
        let tol = Tolerances::default();
        let m = real(&[&[1.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, -1.0]]);
        let k = null_space(&m, &tol);
        assert_eq!(k.len(), 2);
        for v in &k {
            let r = m.mul_vec(v).unwrap();
            assert!(vec_norm(&r) < 1e-12);
        }
    }

    #[test]
    fn complex_kernel() {
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        // rank one: second row is i times the first
        let m = SmallMatrix::from_rows(&[[one, i], [i, -one]]).unwrap();
        let k = null_space(&m, &Tolerances::default());
        assert_eq!(k.len(), 1);
        let r = m.mul_vec(&k[0]).unwrap();
        assert!(vec_norm(&r) < 1e-12);
    }
}
