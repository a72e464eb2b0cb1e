//! Dense vectors and row-major matrices.
//!
//! Construction rejects empty shapes and non-finite entries. Arithmetic does
//! not re-check; call [`Vector::check_finite`] / [`Matrix::check_finite`]
//! when a result needs validating. All reductions accumulate in index order
//! (row-major for matrices) so results are bit-stable within one build.

use std::fmt;
use std::ops::Index;

use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, PartialEq)]
pub struct Vector<T> {
    data: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    pub fn new(data: Vec<T>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("vector"));
        }
        first_non_finite(&data).map_or(Ok(()), |index| Err(Error::NonFinite { index }))?;
        Ok(Self { data })
    }

    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| T::cast(x)).collect())
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "vector length must be positive");
        Self {
            data: vec![T::zero(); len],
        }
    }

    pub fn filled(len: usize, value: T) -> Self {
        assert!(len > 0, "vector length must be positive");
        Self {
            data: vec![value; len],
        }
    }

    /// Standard basis vector `e_index` of length `len`.
    pub fn basis(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.data[index] = T::one();
        v
    }

    /// Builds without validating finiteness; used on arithmetic results.
    pub(crate) fn from_vec_unchecked(data: Vec<T>) -> Self {
        debug_assert!(!data.is_empty());
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|x| x.as_f64()).collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        first_non_finite(&self.data).map_or(Ok(()), |index| Err(Error::NonFinite { index }))
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        if self.len() != other.len() {
            return Err(shape_err("dot", self.len(), other.len()));
        }
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm_squared(&self) -> T {
        dot(&self.data, &self.data)
    }

    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x)
    }

    pub fn mean(&self) -> T {
        self.sum() / T::cast(self.len() as f64)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(shape_err("add", self.len(), other.len()));
        }
        Ok(Self::from_vec_unchecked(
            self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        ))
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self::from_vec_unchecked(self.data.iter().map(|&a| a * factor).collect())
    }

    /// Appends a trailing `1`, turning `x` into `(x, 1)`.
    pub fn augmented(&self) -> Self {
        let mut data = Vec::with_capacity(self.len() + 1);
        data.extend_from_slice(&self.data);
        data.push(T::one());
        Self::from_vec_unchecked(data)
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T: fmt::Debug> fmt::Debug for Vector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.data).finish()
    }
}

#[derive(Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    /// Row-major constructor.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("matrix"));
        }
        if rows * cols != data.len() {
            return Err(shape_err(
                "matrix construction",
                format!("{rows}x{cols}"),
                format!("{} elements", data.len()),
            ));
        }
        first_non_finite(&data).map_or(Ok(()), |index| Err(Error::NonFinite { index }))?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Self::new(
            rows.len(),
            cols,
            rows.iter().flatten().map(|&x| T::cast(x)).collect(),
        )
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix shape must be positive");
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [T] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<T> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        first_non_finite(&self.data).map_or(Ok(()), |index| Err(Error::NonFinite { index }))
    }

    pub fn frobenius_norm(&self) -> T {
        frobenius_norm(self)
    }

    pub fn transpose_matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.rows {
            return Err(shape_err(
                "transpose matvec",
                format!("{}x{} transposed", self.rows, self.cols),
                format!("vector of length {}", v.len()),
            ));
        }
        let mut out = vec![T::zero(); self.cols];
        for (r, &vr) in v.iter().enumerate() {
            if vr == T::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(r)) {
                *o += w * vr;
            }
        }
        Ok(out)
    }
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        f.debug_list()
            .entries(self.data.chunks(self.cols))
            .finish()
    }
}

/// Matrix-vector product `m · v`.
pub fn matvec<T: Scalar>(m: &Matrix<T>, v: &Vector<T>) -> Result<Vector<T>> {
    if m.cols != v.len() {
        return Err(shape_err(
            "matvec",
            format!("matrix {}x{}", m.rows, m.cols),
            format!("vector of length {}", v.len()),
        ));
    }
    Ok(Vector::from_vec_unchecked(
        (0..m.rows).map(|r| dot(m.row(r), v.as_slice())).collect(),
    ))
}

/// Square root of the sum of squared entries, accumulated row-major.
pub fn frobenius_norm<T: Scalar>(m: &Matrix<T>) -> T {
    sum_squares(&m.data).sqrt()
}

/// Sequential left-to-right sum of squares.
pub(crate) fn sum_squares<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

/// Inner product with a fixed four-lane order: term `j` goes to lane
/// `j % 4`, lanes are combined as `(l0 + l1) + (l2 + l3)`.
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut l = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        l[0] += x[0] * y[0];
        l[1] += x[1] * y[1];
        l[2] += x[2] * y[2];
        l[3] += x[3] * y[3];
    }
    for (k, (&x, &y)) in ca.remainder().iter().zip(cb.remainder()).enumerate() {
        l[k] += x * y;
    }
    (l[0] + l[1]) + (l[2] + l[3])
}

/// [`dot`] restricted to the listed indices, where `b` is zero elsewhere.
/// Lanes are keyed on the original index, so the result equals the dense
/// one up to the sign of zero.
pub(crate) fn dot_sparse<T: Scalar>(a: &[T], b: &[T], support: &[usize]) -> T {
    let mut l = [T::zero(); 4];
    for &j in support {
        l[j % 4] += a[j] * b[j];
    }
    (l[0] + l[1]) + (l[2] + l[3])
}

fn first_non_finite<T: Scalar>(data: &[T]) -> Option<usize> {
    data.iter().position(|x| !x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> Vector<f64> {
        Vector::from_f64(x).unwrap()
    }

    #[test]
    fn matvec_examples() {
        let id = Matrix::<f64>::identity(2);
        assert_eq!(matvec(&id, &v(&[3.0, 4.0])).unwrap(), v(&[3.0, 4.0]));
        let z = Matrix::<f64>::zeros(2, 2);
        assert_eq!(matvec(&z, &v(&[3.0, 4.0])).unwrap().as_slice(), &[0.0, 0.0]);
        let m = Matrix::<f64>::from_rows(&[vec![1.0, -1.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(matvec(&m, &v(&[1.0, 1.0])).unwrap().as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn matvec_shape_error_names_both_shapes() {
        let m = Matrix::<f64>::zeros(2, 3);
        let err = matvec(&m, &v(&[1.0, 2.0])).unwrap_err().to_string();
        assert!(err.contains("2x3") && err.contains("length 2"), "{err}");
    }

    #[test]
    fn frobenius_examples() {
        assert!((Matrix::<f64>::identity(2).frobenius_norm() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(Matrix::<f64>::zeros(3, 2).frobenius_norm(), 0.0);
        let m = Matrix::<f64>::from_rows(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.frobenius_norm(), 5.0);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(Vector::<f64>::new(vec![]), Err(Error::Empty(_))));
        assert!(matches!(
            Vector::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(matches!(
            Matrix::new(1, 2, vec![f64::INFINITY, 0.0]),
            Err(Error::NonFinite { index: 0 })
        ));
        assert!(Matrix::<f64>::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn arithmetic_results_can_be_checked() {
        let big = v(&[f64::MAX]);
        let overflow = big.add(&big).unwrap();
        assert!(overflow.check_finite().is_err());
    }

    #[test]
    fn works_in_f32() {
        let m = Matrix::<f32>::from_rows(&[vec![1.0, -1.0], vec![2.0, 0.0]]).unwrap();
        let x = Vector::<f32>::from_f64(&[1.0, 1.0]).unwrap();
        assert_eq!(matvec(&m, &x).unwrap().as_slice(), &[0.0f32, 2.0]);
    }

    fn shape_and_data() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
            (
                Just(r),
                Just(c),
                prop::collection::vec(-10.0..10.0f64, r * c),
                prop::collection::vec(-10.0..10.0f64, c),
                prop::collection::vec(-10.0..10.0f64, c),
            )
        })
    }

    proptest! {
        #[test]
        fn matvec_distributes_over_addition((r, c, m, a, b) in shape_and_data()) {
            let m = Matrix::new(r, c, m).unwrap();
            let (a, b) = (v(&a), v(&b));
            let lhs = matvec(&m, &a.add(&b).unwrap()).unwrap();
            let rhs = matvec(&m, &a).unwrap().add(&matvec(&m, &b).unwrap()).unwrap();
            let scale: f64 = m.as_slice().iter().map(|x| x.abs()).sum::<f64>()
                * (a.norm_inf() + b.norm_inf()) + 1.0;
            for (x, y) in lhs.as_slice().iter().zip(rhs.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn frobenius_squared_is_sum_of_row_norms((r, c, m, _a, _b) in shape_and_data()) {
            let m = Matrix::new(r, c, m).unwrap();
            let mut acc = 0.0f64;
            for row in 0..r {
                for &x in m.row(row) {
                    acc += x * x;
                }
            }
            prop_assert_eq!(m.frobenius_norm(), acc.sqrt());
        }
    }
}
