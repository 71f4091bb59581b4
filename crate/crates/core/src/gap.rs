//! Cycles and the gap displacement.
//!
//! Two independent routes:
//!
//! * [`km_fixed_point`] iterates the averaged map `x ← (1-α)x + α P_C(Rx)`
//!   whose fixed points are exactly the cycles.
//! * [`DrGapSolver`] solves `0 ∈ ∂σ_C(d) + N_Y(d) + M d` with
//!   `M = P_Y (-Q) P_Y` by Douglas–Rachford splitting. Its zero `d` is the
//!   unique element of `D` satisfying `Qd ∈ ∂σ_C(d)` on `Y`; every cycle
//!   `z` has `Sz = d`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DenseMatrix, LuSolver, ProductVector, Tolerances};
use crate::operators::CycleOps;
use crate::sets::{ConvexSet, ExtendedReal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Relaxation of the averaged fixed-point iteration, in `(0, 1)`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Douglas–Rachford step size, `> 0`.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_eps_solver")]
    pub eps_solver: f64,
}

fn default_alpha() -> f64 {
    0.5
}
fn default_lambda() -> f64 {
    1.0
}
fn default_max_iters() -> usize {
    100_000
}
fn default_eps_solver() -> f64 {
    Tolerances::default().solver
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            lambda: default_lambda(),
            max_iters: default_max_iters(),
            eps_solver: default_eps_solver(),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.eps_solver.is_nan() || self.eps_solver <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "eps_solver must be positive, got {}",
                self.eps_solver
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleResult {
    pub z: ProductVector,
    /// `‖z - P_C R z‖`
    pub fixed_point_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapResult {
    /// Gap displacement.
    pub d: ProductVector,
    /// `e = Qd`, so that `Se = d`.
    pub e: ProductVector,
    /// Gap vector `v = -R^{m-1} d`.
    pub v: ProductVector,
    /// `‖Ad‖`
    pub y_residual: f64,
    /// `max(0, σ_C(d) + ½‖d‖²)`; `inf` when `σ_C(d) = +∞`.
    pub d_residual: f64,
    /// `‖J_A(2u - x) - u‖` at the last iterate.
    pub splitting_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn check_set(ops: &CycleOps, set: &ConvexSet) -> Result<()> {
    let flat = ops.m() * ops.n();
    if set.dim() != flat {
        return Err(Error::Dimension {
            expected: flat,
            found: set.dim(),
        });
    }
    Ok(())
}

/// `P_C(R x)`; its fixed points are the cycles.
pub fn cycle_map(ops: &CycleOps, set: &ConvexSet, x: &ProductVector) -> Result<ProductVector> {
    set.project_product(&ops.apply_r(x)?)
}

/// `‖z - P_C R z‖`.
pub fn fixed_point_residual(ops: &CycleOps, set: &ConvexSet, z: &ProductVector) -> Result<f64> {
    z.dist(&cycle_map(ops, set, z)?)
}

/// Averaged fixed-point iteration on `P_C ∘ R`.
///
/// Stops once `‖x - P_C R x‖ ≤ eps` and returns `z = P_C R x`, which lies in
/// `C` and has residual at most that of `x` by nonexpansiveness.
pub fn km_fixed_point(
    ops: &CycleOps,
    set: &ConvexSet,
    x0: &ProductVector,
    alpha: f64,
    max_iters: usize,
    eps: f64,
) -> Result<CycleResult> {
    ops.check(x0)?;
    check_set(ops, set)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "relaxation must lie in (0, 1), got {alpha}"
        )));
    }
    let mut x = x0.clone();
    let mut residual = f64::INFINITY;
    for it in 0..=max_iters {
        let tx = cycle_map(ops, set, &x)?;
        residual = x.dist(&tx)?;
        if residual <= eps {
            let z_res = fixed_point_residual(ops, set, &tx)?;
            return Ok(CycleResult {
                z: tx,
                fixed_point_residual: z_res,
                iterations: it,
                converged: z_res <= eps,
            });
        }
        if it == max_iters {
            break;
        }
        x = x.lincomb(1.0 - alpha, &tx, alpha)?;
    }
    log::warn!("fixed-point iteration stopped after {max_iters} iterations, residual {residual:e}");
    Ok(CycleResult {
        z: x,
        fixed_point_residual: residual,
        iterations: max_iters,
        converged: false,
    })
}

/// `v = -R^{m-1} d`.
pub fn gap_vector(ops: &CycleOps, d: &ProductVector) -> Result<ProductVector> {
    Ok(-&ops.apply_r_pow(d, ops.m() - 1)?)
}

/// Resolvent of `λ ∂σ_C` via the Moreau identity: `x - λ P_C(x/λ)`.
///
/// Evaluated as `λ (y - P_C y)` with `y = x/λ`, which is exactly zero when
/// `y ∈ C`; the naive form leaves rounding noise that unbounded sets
/// see as a direction with infinite support.
pub fn prox_support(set: &ConvexSet, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let scaled: Vec<f64> = x.iter().map(|v| v / lambda).collect();
    let p = set.project(&scaled)?;
    Ok(scaled
        .iter()
        .zip(p)
        .map(|(yi, pi)| lambda * (yi - pi))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DMembership {
    pub sigma: ExtendedReal,
    pub value: ExtendedReal,
    pub in_d: bool,
}

/// Evaluates `σ_C(y) + ½‖y‖²` and membership of `y` in
/// `D = {y ∈ Y : σ_C(y) + ½‖y‖² ≤ 0}`, both up to `tol`.
pub fn membership_d(
    ops: &CycleOps,
    set: &ConvexSet,
    y: &ProductVector,
    tol: f64,
    cone_tol: f64,
) -> Result<DMembership> {
    let sigma = set.support_with(y.as_slice(), cone_tol)?;
    let value = sigma + 0.5 * y.norm_sq();
    let in_y = ops.apply_a(y)?.norm() <= tol;
    Ok(DMembership {
        sigma,
        value,
        in_d: in_y && value.le(tol),
    })
}

/// `f(b, d) = σ_C(d) + ½‖d‖² + ⟨b, Qd⟩ - σ_C(b)`.
///
/// Concave in `b`, convex in `d`. Returns `-inf` when `σ_C(b) = +∞` and
/// `+inf` when only `σ_C(d)` is infinite.
pub fn saddle_function(
    ops: &CycleOps,
    set: &ConvexSet,
    b: &ProductVector,
    d: &ProductVector,
    cone_tol: f64,
) -> Result<f64> {
    let sb = set.support_with(b.as_slice(), cone_tol)?;
    let sd = set.support_with(d.as_slice(), cone_tol)?;
    let rest = 0.5 * d.norm_sq() + b.inner(&ops.apply_q(d)?)?;
    Ok(match (sd, sb) {
        (_, ExtendedReal::PosInf) => f64::NEG_INFINITY,
        (ExtendedReal::PosInf, _) => f64::INFINITY,
        (ExtendedReal::Finite(sd), ExtendedReal::Finite(sb)) => sd + rest - sb,
    })
}

/// `½‖b‖² + ⟨b, Qb⟩`, which is `f(b, b)` with the support terms cancelled;
/// zero for every `b ∈ Y`.
pub fn diagonal_value(ops: &CycleOps, b: &ProductVector) -> Result<f64> {
    Ok(0.5 * b.norm_sq() + b.inner(&ops.apply_q(b)?)?)
}

/// `max_x σ_C(Se) + ⟨Sx - Se, e⟩ - σ_C(Sx)` over the probes, skipping
/// probes with `σ_C(Sx) = +∞`. A certified pair gives a value `≤ 0`.
pub fn saddle_residual(
    ops: &CycleOps,
    set: &ConvexSet,
    d: &ProductVector,
    e: &ProductVector,
    probes: &[ProductVector],
    tol: &Tolerances,
) -> Result<f64> {
    let se = ops.apply_s(e)?;
    let mismatch = se.dist(d)?;
    if mismatch > tol.solver {
        return Err(Error::Precondition(format!(
            "‖Se - d‖ = {mismatch:e} exceeds {:e}",
            tol.solver
        )));
    }
    let Some(sigma_se) = set.support_with(se.as_slice(), tol.cone)?.finite() else {
        return Ok(f64::INFINITY);
    };
    let mut worst = f64::NEG_INFINITY;
    for x in probes {
        let sx = ops.apply_s(x)?;
        let Some(sigma_sx) = set.support_with(sx.as_slice(), tol.cone)?.finite() else {
            continue;
        };
        let val = sigma_se + (&sx - &se).inner(e)? - sigma_sx;
        worst = worst.max(val);
    }
    Ok(worst)
}

/// The splitting residual must fall this factor below `eps_solver` before
/// the iteration stops; the error in `d` is of the order of the residual.
pub const SPLITTING_TIGHTENING: f64 = 1e-3;

/// Douglas–Rachford solver for the gap displacement of one scenario.
///
/// The linear resolvent `(I + λM)^{-1} P_Y` is factorized once.
#[derive(Debug, Clone)]
pub struct DrGapSolver<'a> {
    ops: CycleOps,
    set: &'a ConvexSet,
    lambda: f64,
    max_iters: usize,
    eps: f64,
    tol: Tolerances,
    linear: LuSolver,
}

impl<'a> DrGapSolver<'a> {
    pub fn new(
        ops: CycleOps,
        set: &'a ConvexSet,
        settings: &SolverSettings,
        tol: &Tolerances,
    ) -> Result<Self> {
        check_set(&ops, set)?;
        settings.validate()?;
        let (m, n) = (ops.m(), ops.n());
        let lambda = settings.lambda;
        let mat = DenseMatrix::from_linear_map(m * n, |col| {
            let x = ProductVector::from_flat(m, n, col.to_vec()).expect("unit vector");
            let y = ops.project_y(&x).expect("shape");
            let neg_q = -&ops.apply_q(&y).expect("shape");
            let mx = ops.project_y(&neg_q).expect("shape");
            x.lincomb(1.0, &mx, lambda).expect("shape").into_flat()
        });
        let linear = mat.factorize(tol)?;
        Ok(Self {
            ops,
            set,
            lambda,
            max_iters: settings.max_iters,
            eps: settings.eps_solver,
            tol: *tol,
            linear,
        })
    }

    pub fn condition(&self) -> f64 {
        self.linear.condition()
    }

    /// Resolvent of `λ(N_Y + M)`.
    fn linear_resolvent(&self, x: &ProductVector) -> Result<ProductVector> {
        let rhs = self.ops.project_y(x)?;
        let sol = self.linear.solve(rhs.as_slice())?;
        // the solution lies in Y up to rounding; remove the residue
        self.ops
            .project_y(&ProductVector::from_flat(self.ops.m(), self.ops.n(), sol)?)
    }

    fn support_resolvent(&self, x: &ProductVector) -> Result<ProductVector> {
        let p = prox_support(self.set, x.as_slice(), self.lambda)?;
        ProductVector::from_flat(self.ops.m(), self.ops.n(), p)
    }

    pub fn solve(&self, start: &ProductVector) -> Result<GapResult> {
        self.ops.check(start)?;
        let mut x = start.clone();
        let mut residual = f64::INFINITY;
        let mut iterations = self.max_iters;
        let mut converged = false;
        for it in 0..self.max_iters {
            let u = self.linear_resolvent(&x)?;
            let reflected = u.lincomb(2.0, &x, -1.0)?;
            let w = self.support_resolvent(&reflected)?;
            residual = w.dist(&u)?;
            x = &x + &(&w - &u);
            if residual <= self.eps * SPLITTING_TIGHTENING {
                iterations = it + 1;
                converged = true;
                break;
            }
        }
        if !converged {
            log::warn!(
                "splitting solver stopped after {} iterations, residual {residual:e}",
                self.max_iters
            );
        }
        let d = self.linear_resolvent(&x)?;
        self.finish(d, residual, iterations, converged)
    }

    fn finish(
        &self,
        d: ProductVector,
        splitting_residual: f64,
        iterations: usize,
        converged: bool,
    ) -> Result<GapResult> {
        let ops = &self.ops;
        let e = ops.apply_q(&d)?;
        let v = gap_vector(ops, &d)?;
        let y_residual = ops.apply_a(&d)?.norm();
        let value = membership_d(ops, self.set, &d, self.tol.feas, self.tol.cone)?.value;
        let d_residual = value.to_f64().max(0.0);
        let converged = converged && y_residual <= self.eps && d_residual <= self.eps;
        Ok(GapResult {
            d,
            e,
            v,
            y_residual,
            d_residual,
            splitting_residual,
            iterations,
            converged,
        })
    }
}

/// One-shot Douglas–Rachford solve from `start`.
pub fn dr_gap_solve(
    ops: &CycleOps,
    set: &ConvexSet,
    settings: &SolverSettings,
    start: &ProductVector,
) -> Result<GapResult> {
    DrGapSolver::new(*ops, set, settings, &Tolerances::default())?.solve(start)
}
