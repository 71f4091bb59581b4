//! The cyclic shift `R` on `X = H^m` and the operators built from it:
//! `S = R - I`, the average `A = (1/m) Σ_{i=1}^{m} R^i`,
//! `Q = (1/m) Σ_{i=1}^{m-1} i R^i`, and the projection onto
//! `Y = {y : Ay = 0}`.
//!
//! All of them are block-index manipulations; nothing is materialized.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{check_len, dot, DenseMatrix, ProductVector};

/// Shape of the product space `H^m` with `H = R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CycleOps {
    m: usize,
    n: usize,
}

impl CycleOps {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidParameter(format!(
                "the number of sets m must be at least 2, got {m}"
            )));
        }
        if n < 1 {
            return Err(Error::InvalidParameter(
                "the ambient dimension n must be at least 1".into(),
            ));
        }
        Ok(Self { m, n })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn zeros(&self) -> ProductVector {
        ProductVector::zeros(self.m, self.n)
    }

    pub fn check(&self, x: &ProductVector) -> Result<()> {
        if x.shape() == (self.m, self.n) {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: (self.m, self.n),
                found: x.shape(),
            })
        }
    }

    /// `R^k x`: block `j` of the result is block `j - k (mod m)` of `x`.
    pub fn apply_r_pow(&self, x: &ProductVector, k: usize) -> Result<ProductVector> {
        self.check(x)?;
        let m = self.m;
        let k = k % m;
        let mut out = self.zeros();
        for j in 0..m {
            out.block_mut(j).copy_from_slice(x.block((j + m - k) % m));
        }
        Ok(out)
    }

    /// `R(x_1, ..., x_m) = (x_m, x_1, ..., x_{m-1})`.
    pub fn apply_r(&self, x: &ProductVector) -> Result<ProductVector> {
        self.apply_r_pow(x, 1)
    }

    /// `S x = R x - x = (x_m - x_1, x_1 - x_2, ..., x_{m-1} - x_m)`.
    pub fn apply_s(&self, x: &ProductVector) -> Result<ProductVector> {
        self.check(x)?;
        let m = self.m;
        let mut out = self.zeros();
        for j in 0..m {
            let prev = x.block((j + m - 1) % m);
            let cur = x.block(j);
            for ((o, p), c) in out.block_mut(j).iter_mut().zip(prev).zip(cur) {
                *o = p - c;
            }
        }
        Ok(out)
    }

    /// Every block of `A x` is the mean of the blocks of `x`.
    pub fn apply_a(&self, x: &ProductVector) -> Result<ProductVector> {
        self.check(x)?;
        let mean: Vec<f64> = x
            .block_sum()
            .into_iter()
            .map(|s| s / self.m as f64)
            .collect();
        Ok(ProductVector::constant(self.m, &mean))
    }

    /// `Q x = (1/m) Σ_{i=1}^{m-1} i R^i x`.
    ///
    /// Defined on all of `X`; `SQy = y` and `⟨Qy, y⟩ = -½‖y‖²` hold for
    /// `y ∈ Y` only.
    pub fn apply_q(&self, x: &ProductVector) -> Result<ProductVector> {
        self.check(x)?;
        let m = self.m;
        let mut out = self.zeros();
        for j in 0..m {
            let dst = out.block_mut(j);
            for i in 1..m {
                let w = i as f64 / m as f64;
                for (o, s) in dst.iter_mut().zip(x.block((j + m - i) % m)) {
                    *o += w * s;
                }
            }
        }
        Ok(out)
    }

    /// `x - A x`, the orthogonal projection onto `Y`.
    pub fn project_y(&self, x: &ProductVector) -> Result<ProductVector> {
        let ax = self.apply_a(x)?;
        x.lincomb(1.0, &ax, -1.0)
    }

    /// `R` as an `(mn)×(mn)` matrix acting on flat storage.
    pub fn shift_matrix(&self) -> DenseMatrix {
        let (m, n) = (self.m, self.n);
        DenseMatrix::from_linear_map(m * n, |col| {
            let x = ProductVector::from_flat(m, n, col.to_vec()).expect("unit vector");
            self.apply_r(&x).expect("shape").into_flat()
        })
    }
}

/// `‖Sx‖² + 2⟨Sx, x⟩` with `S = M - I`, which equals `‖Mx‖² - ‖x‖²`.
///
/// Nonpositive for every `x` iff `M` is nonexpansive, identically zero iff
/// `M` is an isometry.
pub fn isometry_defect(mat: &DenseMatrix, x: &[f64]) -> Result<f64> {
    if mat.rows() != mat.cols() {
        return Err(Error::InvalidMatrix(format!(
            "expected a square matrix, got {}x{}",
            mat.rows(),
            mat.cols()
        )));
    }
    check_len(mat.cols(), x.len())?;
    let mx = mat.matvec(x)?;
    let sx: Vec<f64> = mx.iter().zip(x).map(|(a, b)| a - b).collect();
    Ok(dot(&sx, &sx) + 2.0 * dot(&sx, x))
}

/// Largest violation observed for one algebraic identity.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityViolation {
    pub name: &'static str,
    pub max_violation: f64,
}

/// Names of the identities checked by [`identity_suite`], in report order.
pub const IDENTITY_NAMES: &[&str] = &[
    "R^m x = x",
    "|Rx| = |x|",
    "A(Sx) = 0",
    "ARx = RAx = Ax",
    "AR^k = R^kA = A",
    "S(Qy) = y",
    "Q(Sy) = y",
    "A(Qy) = 0",
    "SQx = QSx = x - Ax",
    "AQx = QAx = (m-1)/2 Ax",
    "A(Ax) = Ax",
    "S(Ax) = A(Sx) = 0",
    "|Sx|^2 = -2<Sx,x>",
    "<Qy,y> = -1/2 |y|^2",
    "<Ax,z> = <x,Az>",
    "isometry defect of R = 0",
];

fn max_abs_diff(a: &ProductVector, b: &ProductVector) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn max_abs(a: &ProductVector) -> f64 {
    a.as_slice().iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Evaluates every operator identity on `trials` seeded standard-normal
/// vectors and returns the maximal absolute violation of each.
pub fn identity_suite(
    m: usize,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<IdentityViolation>> {
    let ops = CycleOps::new(m, n)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = vec![0.0_f64; IDENTITY_NAMES.len()];
    let shift = ops.shift_matrix();
    let random = |rng: &mut ChaCha8Rng| {
        let data = (0..m * n).map(|_| StandardNormal.sample(rng)).collect();
        ProductVector::from_flat(m, n, data).expect("finite normals")
    };

    for _ in 0..trials {
        let x = random(&mut rng);
        let z = random(&mut rng);
        let y = ops.project_y(&random(&mut rng))?;

        let r = ops.apply_r(&x)?;
        let s = ops.apply_s(&x)?;
        let a = ops.apply_a(&x)?;
        let q = ops.apply_q(&x)?;

        let mut v = [0.0_f64; 16];
        v[0] = max_abs_diff(&ops.apply_r_pow(&x, m)?, &x);
        let mut rm = x.clone();
        for _ in 0..m {
            rm = ops.apply_r(&rm)?;
        }
        v[0] = v[0].max(max_abs_diff(&rm, &x));
        v[1] = (r.norm() - x.norm()).abs();
        v[2] = max_abs(&ops.apply_a(&s)?);
        v[3] = max_abs_diff(&ops.apply_a(&r)?, &a).max(max_abs_diff(&ops.apply_r(&a)?, &a));
        for k in 1..=m {
            let rk = ops.apply_r_pow(&x, k)?;
            v[4] = v[4]
                .max(max_abs_diff(&ops.apply_a(&rk)?, &a))
                .max(max_abs_diff(&ops.apply_r_pow(&a, k)?, &a));
        }
        let qy = ops.apply_q(&y)?;
        v[5] = max_abs_diff(&ops.apply_s(&qy)?, &y);
        v[6] = max_abs_diff(&ops.apply_q(&ops.apply_s(&y)?)?, &y);
        v[7] = max_abs(&ops.apply_a(&qy)?);
        let x_minus_ax = x.lincomb(1.0, &a, -1.0)?;
        v[8] = max_abs_diff(&ops.apply_s(&q)?, &x_minus_ax)
            .max(max_abs_diff(&ops.apply_q(&s)?, &x_minus_ax));
        let half = a.scale((m as f64 - 1.0) / 2.0);
        v[9] = max_abs_diff(&ops.apply_a(&q)?, &half).max(max_abs_diff(&ops.apply_q(&a)?, &half));
        v[10] = max_abs_diff(&ops.apply_a(&a)?, &a);
        v[11] = max_abs(&ops.apply_s(&a)?).max(max_abs(&ops.apply_a(&s)?));
        v[12] = (s.norm_sq() + 2.0 * s.inner(&x)?).abs();
        v[13] = (qy.inner(&y)? + 0.5 * y.norm_sq()).abs();
        v[14] = (a.inner(&z)? - x.inner(&ops.apply_a(&z)?)?).abs();
        v[15] = isometry_defect(&shift, x.as_slice())?.abs();

        for (w, vi) in worst.iter_mut().zip(v) {
            *w = w.max(vi);
        }
    }
    Ok(IDENTITY_NAMES
        .iter()
        .zip(worst)
        .map(|(&name, max_violation)| IdentityViolation {
            name,
            max_violation,
        })
        .collect())
}
