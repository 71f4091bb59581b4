//! Finite-dimensional Hilbert-space arithmetic for `H = R^n` and the product
//! space `X = H^m`, plus a small dense linear solver.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Feasibility / membership tolerance.
    pub feas: f64,
    /// Relative residual accepted from a dense linear solve.
    pub lin: f64,
    /// Iterative-solver stopping tolerance.
    pub solver: f64,
    /// Relative tolerance of the recession-cone test in support evaluations.
    pub cone: f64,
    /// Largest condition estimate a dense system may have.
    pub max_condition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas: 1e-9,
            lin: 1e-10,
            solver: 1e-8,
            cone: 1e-10,
            max_condition: 1e12,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}

/// A point of `H = R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_len(self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A point `x = (x_1, ..., x_m)` of `X = H^m`.
///
/// Blocks are stored contiguously; the block view is the public contract.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductVector {
    m: usize,
    n: usize,
    data: Vec<f64>,
}

impl ProductVector {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            data: vec![0.0; m * n],
        }
    }

    pub fn from_flat(m: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        check_len(m * n, data.len())?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { m, n, data })
    }

    pub fn from_blocks<B: AsRef<[f64]>>(blocks: &[B]) -> Result<Self> {
        let m = blocks.len();
        let n = blocks.first().map_or(0, |b| b.as_ref().len());
        let mut data = Vec::with_capacity(m * n);
        for b in blocks {
            check_len(n, b.as_ref().len())?;
            data.extend_from_slice(b.as_ref());
        }
        Self::from_flat(m, n, data)
    }

    /// Same block value repeated `m` times (a point of the diagonal).
    pub fn constant(m: usize, block: &[f64]) -> Self {
        let n = block.len();
        let mut data = Vec::with_capacity(m * n);
        for _ in 0..m {
            data.extend_from_slice(block);
        }
        Self { m, n, data }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on n = 0, which shape validation rules out elsewhere
        self.data.chunks_exact(self.n.max(1)).take(self.m)
    }

    pub fn to_blocks(&self) -> Vec<Vec<f64>> {
        self.blocks().map(<[f64]>::to_vec).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &ProductVector) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: self.shape(),
                found: other.shape(),
            })
        }
    }

    /// Sum of all blocks, a point of `H`.
    pub fn block_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for b in self.blocks() {
            for (acc, x) in s.iter_mut().zip(b) {
                *acc += x;
            }
        }
        s
    }

    pub fn inner(&self, other: &ProductVector) -> Result<f64> {
        self.same_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn dist(&self, other: &ProductVector) -> Result<f64> {
        self.same_shape(other)?;
        Ok(dist(&self.data, &other.data))
    }

    pub fn scale(&self, s: f64) -> ProductVector {
        self.map(|x| x * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ProductVector {
        ProductVector {
            m: self.m,
            n: self.n,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `a*self + b*other`, shapes must match.
    pub fn lincomb(&self, a: f64, other: &ProductVector, b: f64) -> Result<ProductVector> {
        self.same_shape(other)?;
        Ok(ProductVector {
            m: self.m,
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }
}

impl Index<(usize, usize)> for ProductVector {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for ProductVector {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

// Arithmetic on references panics on shape mismatch; use `lincomb` for a
// fallible version.
impl Add for &ProductVector {
    type Output = ProductVector;
    fn add(self, rhs: &ProductVector) -> ProductVector {
        self.lincomb(1.0, rhs, 1.0).expect("shape mismatch in add")
    }
}

impl Sub for &ProductVector {
    type Output = ProductVector;
    fn sub(self, rhs: &ProductVector) -> ProductVector {
        self.lincomb(1.0, rhs, -1.0).expect("shape mismatch in sub")
    }
}

impl Mul<f64> for &ProductVector {
    type Output = ProductVector;
    fn mul(self, s: f64) -> ProductVector {
        self.scale(s)
    }
}

impl Neg for &ProductVector {
    type Output = ProductVector;
    fn neg(self) -> ProductVector {
        self.scale(-1.0)
    }
}

impl fmt::Display for ProductVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, b) in self.blocks().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if self.n == 1 {
                write!(f, "{}", b[0])?;
            } else {
                write!(f, "{b:?}")?;
            }
        }
        write!(f, ")")
    }
}

impl Serialize for ProductVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_blocks().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProductVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let blocks = Vec::<Vec<f64>>::deserialize(d)?;
        ProductVector::from_blocks(&blocks).map_err(serde::de::Error::custom)
    }
}

/// `⟨u, v⟩` on `X`.
pub fn inner_product(u: &ProductVector, v: &ProductVector) -> Result<f64> {
    u.inner(v)
}

pub fn norm(u: &ProductVector) -> f64 {
    u.norm()
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(
                "matrix must have positive size".into(),
            ));
        }
        check_len(rows * cols, entries.len())?;
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len(cols, r.len())?;
            entries.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, entries)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            entries,
        }
    }

    /// Builds the matrix whose `j`-th column is `f(e_j)`.
    pub fn from_linear_map(n: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut entries = vec![0.0; n * n];
        let mut unit = vec![0.0; n];
        for j in 0..n {
            unit[j] = 1.0;
            let col = f(&unit);
            debug_assert_eq!(col.len(), n);
            for (i, c) in col.into_iter().enumerate() {
                entries[i * n + j] = c;
            }
            unit[j] = 0.0;
        }
        Self {
            rows: n,
            cols: n,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|x| x * s).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        Ok(self
            .entries
            .chunks_exact(self.cols)
            .map(|row| dot(row, x))
            .collect())
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.entries)
    }

    /// LU-factorizes a square matrix after checking its 2-norm condition number.
    pub fn factorize(&self, tol: &Tolerances) -> Result<LuSolver> {
        if self.rows != self.cols {
            return Err(Error::InvalidMatrix(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let mat = self.to_nalgebra();
        let sv = mat.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        };
        if condition.is_nan() || condition > tol.max_condition {
            return Err(Error::IllConditioned { condition });
        }
        Ok(LuSolver {
            original: self.clone(),
            lu: mat.lu(),
            condition,
            lin_tol: tol.lin,
        })
    }
}

/// A factorized square system, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct LuSolver {
    original: DenseMatrix,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
    lin_tol: f64,
}

impl LuSolver {
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn dim(&self) -> usize {
        self.original.rows
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), b.len())?;
        let rhs = nalgebra::DVector::from_column_slice(b);
        let mut x = self.lu.solve(&rhs).ok_or(Error::IllConditioned {
            condition: f64::INFINITY,
        })?;
        // one step of iterative refinement
        let r = rhs - self.original.to_nalgebra() * &x;
        if let Some(dx) = self.lu.solve(&r) {
            x += dx;
        }
        let x: Vec<f64> = x.iter().copied().collect();
        let res = dist(&self.original.matvec(&x)?, b);
        if res > self.lin_tol * (1.0 + norm2(b)) {
            return Err(Error::LinearResidual {
                residual: res,
                condition: self.condition,
            });
        }
        Ok(x)
    }
}

/// Solves `M x = b` for square, well-conditioned `M`.
pub fn solve_dense(m: &DenseMatrix, b: &Vector) -> Result<Vector> {
    solve_dense_with(m, b, &Tolerances::default())
}

pub fn solve_dense_with(m: &DenseMatrix, b: &Vector, tol: &Tolerances) -> Result<Vector> {
    let solver = m.factorize(tol)?;
    solver.solve(b.as_slice()).map(Vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pv(blocks: &[&[f64]]) -> ProductVector {
        ProductVector::from_blocks(blocks).unwrap()
    }

    #[test]
    fn inner_product_examples() {
        let u = pv(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(inner_product(&u, &u).unwrap(), 30.0);
        let a = pv(&[&[1.0], &[0.0]]);
        let b = pv(&[&[0.0], &[1.0]]);
        assert_eq!(inner_product(&a, &b).unwrap(), 0.0);
        assert_eq!(inner_product(&u, &ProductVector::zeros(2, 2)).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_rejects_shape_mismatch() {
        let u = ProductVector::zeros(2, 2);
        let v = ProductVector::zeros(4, 1);
        assert!(matches!(inner_product(&u, &v), Err(Error::Shape { .. })));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&pv(&[&[3.0], &[4.0]])), 5.0);
        assert_eq!(norm(&ProductVector::zeros(3, 2)), 0.0);
        assert_eq!(norm(&pv(&[&[1.0, 1.0], &[1.0, 1.0]])), 2.0);
    }

    #[test]
    fn solve_dense_examples() {
        let x = solve_dense(&DenseMatrix::identity(3), &vec![1.0, 2.0, 3.0].into()).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0, 3.0]);

        let m = DenseMatrix::identity(2).scaled(2.0);
        let x = solve_dense(&m, &vec![4.0, 6.0].into()).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-14);

        let m = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let x = solve_dense(&m, &vec![3.0, 1.0].into()).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn solve_dense_rejects_singular() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        match solve_dense(&m, &vec![1.0, 1.0].into()) {
            Err(Error::IllConditioned { condition }) => assert!(condition > 1e12),
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
    }

    #[test]
    fn solve_dense_rejects_non_square() {
        let m = DenseMatrix::new(2, 3, vec![1.0; 6]).unwrap();
        assert!(solve_dense(&m, &vec![1.0, 1.0].into()).is_err());
    }

    #[test]
    fn from_linear_map_columns() {
        let m = DenseMatrix::from_linear_map(2, |x| vec![x[1], 2.0 * x[0]]);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn product_vector_rejects_non_finite() {
        assert!(matches!(
            ProductVector::from_flat(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn product_vector_json_is_block_list() {
        let u = pv(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0]]");
        let back: ProductVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, u);
    }
}
