//! Numerical checks of the cycle characterizations.
//!
//! Every check returns a [`CheckRecord`]: it passes iff its measured
//! violation is within its tolerance, and carries witnesses when it fails.
//! Set-equality checks are sampling-based; they are sound on the sampled
//! points and make no completeness claim.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gap::{
    cycle_map, diagonal_value, fixed_point_residual, saddle_function, saddle_residual, CycleResult,
    GapResult,
};
use crate::hilbert::{norm2, ProductVector, Tolerances};
use crate::operators::CycleOps;
use crate::sets::{ConvexSet, DEFAULT_SAMPLE_RADIUS};

/// At most this many witnesses are kept per check.
const MAX_WITNESSES: usize = 5;
/// Grids with more points than this are coarsened.
const MAX_GRID_POINTS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckTolerances {
    /// Cycle membership and difference-form tolerance.
    pub cycle: f64,
    /// Agreement between independently computed displacements.
    pub agreement: f64,
    /// Classification threshold for the three fixed-point conditions.
    pub classify: f64,
    /// Set-equality membership band (`ε_solver + ε_feas`).
    pub geometry: f64,
    /// Bound on `sup_b f(b, d)` and on the saddle residual.
    pub saddle: f64,
    /// Exact algebraic identities (`f(b, b) = 0`, `Σ v_i = 0`, ...).
    pub identity: f64,
    /// `‖d‖ ≤ 2‖c₀‖`, `‖Ad‖` and `σ_C(d) + ½‖d‖²`.
    pub dbound: f64,
    /// Relative cone tolerance for support evaluations at computed points.
    pub cone: f64,
}

impl Default for CheckTolerances {
    fn default() -> Self {
        let t = Tolerances::default();
        Self {
            cycle: 1e-7,
            agreement: 1e-6,
            classify: 1e-6,
            geometry: t.solver + t.feas,
            saddle: 1e-6,
            identity: 1e-10,
            dbound: 1e-8,
            cone: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    /// Sample count for `c₀` draws and fixed-point-condition probes.
    pub samples: usize,
    /// Random candidates for the reverse set inclusion.
    pub geometry_samples: usize,
    /// Draws of `b` for the saddle check.
    pub b_samples: usize,
    /// Grid spacing per coordinate for the reverse inclusion when `n ≤ 2`.
    pub grid_step: f64,
    /// Radius around the projection of the origin used for unbounded sets.
    pub sample_radius: f64,
    pub seed: u64,
    pub tolerances: CheckTolerances,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            samples: 100,
            geometry_samples: 1000,
            b_samples: 1000,
            grid_step: 0.05,
            sample_radius: DEFAULT_SAMPLE_RADIUS,
            seed: 0,
            tolerances: CheckTolerances::default(),
        }
    }
}

impl VerifySettings {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.geometry_samples == 0 || self.b_samples == 0 {
            return Err(Error::InvalidParameter(
                "sample counts must be positive".into(),
            ));
        }
        if self.grid_step.is_nan() || self.grid_step <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "grid_step must be positive, got {}",
                self.grid_step
            )));
        }
        if self.sample_radius.is_nan() || self.sample_radius <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sample_radius must be positive, got {}",
                self.sample_radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub label: String,
    pub point: Vec<Vec<f64>>,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub max_violation: f64,
    pub tolerance: f64,
    /// Number of points or pairs evaluated.
    pub evaluated: usize,
    pub witnesses: Vec<Witness>,
    pub notes: Vec<String>,
}

/// Accumulates violations and failing witnesses for one check.
struct Recorder {
    name: String,
    tolerance: f64,
    max_violation: f64,
    evaluated: usize,
    failed: bool,
    witnesses: Vec<Witness>,
    notes: Vec<String>,
}

impl Recorder {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            tolerance,
            max_violation: 0.0,
            evaluated: 0,
            failed: false,
            witnesses: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Records one measured violation against the check tolerance.
    fn observe(&mut self, label: impl FnOnce() -> String, point: &ProductVector, violation: f64) {
        self.evaluated += 1;
        let v = if violation.is_nan() {
            f64::INFINITY
        } else {
            violation
        };
        self.max_violation = self.max_violation.max(v);
        if v > self.tolerance {
            self.push_witness(label(), point, v);
        }
    }

    /// A failure without a meaningful magnitude, e.g. a solver run that
    /// did not converge.
    fn fail(&mut self, label: String, point: &ProductVector) {
        self.evaluated += 1;
        self.max_violation = f64::INFINITY;
        self.push_witness(label, point, f64::INFINITY);
    }

    fn push_witness(&mut self, label: String, point: &ProductVector, violation: f64) {
        self.failed = true;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(Witness {
                label,
                point: point.to_blocks(),
                violation: violation.min(f64::MAX),
            });
        }
    }

    fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    fn finish(self) -> CheckRecord {
        // JSON has no infinity; clamp for the report
        let max_violation = if self.max_violation.is_finite() {
            self.max_violation
        } else {
            f64::MAX
        };
        CheckRecord {
            passed: !self.failed,
            name: self.name,
            max_violation,
            tolerance: self.tolerance,
            evaluated: self.evaluated,
            witnesses: self.witnesses,
            notes: self.notes,
        }
    }
}

fn factors<'a>(ops: &CycleOps, set: &'a ConvexSet) -> Result<&'a [ConvexSet]> {
    match set.factors() {
        Some(f) if f.len() == ops.m() && f.iter().all(|c| c.dim() == ops.n()) => Ok(f),
        _ => Err(Error::Precondition(format!(
            "expected a product of {} sets in R^{}",
            ops.m(),
            ops.n()
        ))),
    }
}

fn random_product(rng: &mut ChaCha8Rng, m: usize, n: usize, scale: f64) -> ProductVector {
    let data = (0..m * n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    ProductVector::from_flat(m, n, data).expect("finite")
}

fn sample_product(
    set: &ConvexSet,
    ops: &CycleOps,
    k: usize,
    seed: u64,
    radius: f64,
) -> Vec<ProductVector> {
    set.sample_points_within(k, seed, radius)
        .into_iter()
        .map(|p| ProductVector::from_flat(ops.m(), ops.n(), p).expect("sample shape"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleCheck {
    pub is_cycle: bool,
    /// Difference-form residual: membership distances and
    /// `‖z_i - z_{i+1} - d_{i+1}‖`, maximized.
    pub residual: f64,
    /// `‖z - P_C R z‖`
    pub fixed_point_residual: f64,
}

/// Tests `z` against the difference characterization of cycles
/// (`z_i ∈ C_i`, `z_i - z_{i+1} = d_{i+1}`) and cross-checks it with the
/// fixed-point form. The two must agree up to `10·tol`.
pub fn check_cycle(
    ops: &CycleOps,
    set: &ConvexSet,
    z: &ProductVector,
    d: &ProductVector,
    tol: f64,
) -> Result<CycleCheck> {
    ops.check(z)?;
    ops.check(d)?;
    let blocks = factors(ops, set)?;
    let mut residual: f64 = 0.0;
    for (i, c) in blocks.iter().enumerate() {
        residual = residual.max(c.distance(z.block(i))?);
    }
    for i in 0..ops.m() - 1 {
        let gap: f64 = z
            .block(i)
            .iter()
            .zip(z.block(i + 1))
            .zip(d.block(i + 1))
            .map(|((a, b), di)| (a - b - di).powi(2))
            .sum::<f64>()
            .sqrt();
        residual = residual.max(gap);
    }
    let fp = fixed_point_residual(ops, set, z)?;
    let is_cycle = residual <= tol;
    let fp_cycle = fp <= tol;
    if (is_cycle && fp > 10.0 * tol) || (fp_cycle && residual > 10.0 * tol) {
        return Err(Error::Inconsistent(format!(
            "difference-form residual {residual:e} and fixed-point residual {fp:e} disagree at {z}"
        )));
    }
    Ok(CycleCheck {
        is_cycle,
        residual,
        fixed_point_residual: fp,
    })
}

/// Cycle characterizations for every computed cycle, plus agreement of the
/// two solvers and of the splitting runs among themselves.
///
/// Returns three records: `cycle` (difference and fixed-point forms and
/// `z_{i+1} = z_i + v_i`), `cycle/agreement` and `cycle/gap_sum`.
pub fn cycle_check(
    ops: &CycleOps,
    set: &ConvexSet,
    cycles: &[CycleResult],
    gaps: &[GapResult],
    tol: &CheckTolerances,
) -> Result<Vec<CheckRecord>> {
    let Some(gap) = gaps.first() else {
        return Err(Error::Precondition("no displacement computed".into()));
    };
    let (d, v) = (&gap.d, &gap.v);
    let mut rec = Recorder::new("cycle", tol.cycle);
    let mut agreement = Recorder::new("cycle/agreement", tol.agreement);
    let mut gap_sum = Recorder::new("cycle/gap_sum", tol.identity);

    gap_sum.observe(|| "sum of v blocks".into(), v, norm2(&v.block_sum()));

    for (k, g) in gaps.iter().enumerate() {
        if !g.converged {
            agreement.fail(format!("splitting run {k} did not converge"), &g.d);
            continue;
        }
        let gap = g.d.dist(d)?;
        agreement.observe(
            || format!("splitting run {k} disagrees with run 0"),
            &g.d,
            gap,
        );
    }

    let mut verified = 0;
    for (k, c) in cycles.iter().enumerate() {
        if !c.converged {
            rec.fail(format!("fixed-point run {k} did not converge"), &c.z);
            continue;
        }
        let z = &c.z;
        match check_cycle(ops, set, z, d, tol.cycle) {
            Ok(cc) => {
                rec.observe(
                    || format!("start {k}: not a cycle in difference form"),
                    z,
                    cc.residual,
                );
                rec.observe(
                    || format!("start {k}: fixed-point residual"),
                    z,
                    cc.fixed_point_residual,
                );
                if cc.is_cycle {
                    verified += 1;
                }
            }
            Err(Error::Inconsistent(msg)) => rec.fail(msg, z),
            Err(e) => return Err(e),
        }
        // z_{i+1} = z_i + v_i
        let mut step: f64 = 0.0;
        for i in 0..ops.m() - 1 {
            let diff: Vec<f64> = z
                .block(i + 1)
                .iter()
                .zip(z.block(i))
                .zip(v.block(i))
                .map(|((b, a), vi)| b - a - vi)
                .collect();
            step = step.max(norm2(&diff));
        }
        rec.observe(|| format!("start {k}: z_(i+1) != z_i + v_i"), z, step);
        let sz = ops.apply_s(z)?;
        agreement.observe(|| format!("start {k}: Sz differs from d"), z, sz.dist(d)?);
    }
    rec.note(format!(
        "{verified} of {} fixed-point runs verified as cycles",
        cycles.len()
    ));
    agreement.note(format!(
        "{} splitting runs and {} fixed-point runs compared",
        gaps.len(),
        cycles.len()
    ));
    Ok(vec![rec.finish(), agreement.finish(), gap_sum.finish()])
}

/// The three fixed-point conditions for one probe `z ∈ C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    /// `‖z - P_C R z‖ ≤ tol`
    pub fixed_point: bool,
    /// `σ_C(Sz) + ½‖Sz‖² ≤ tol`
    pub in_s_inverse_d_set: bool,
    /// `‖Sz - d‖ ≤ tol`
    pub displacement: bool,
}

impl Classification {
    pub fn agrees(&self) -> bool {
        self.fixed_point == self.in_s_inverse_d_set && self.fixed_point == self.displacement
    }
}

/// Classifies `z` by the three equivalent conditions; also returns the
/// largest residual and the defect of `⟨Sz, z⟩ = -½‖Sz‖²`.
pub fn classify(
    ops: &CycleOps,
    set: &ConvexSet,
    d: &ProductVector,
    z: &ProductVector,
    tol: f64,
    cone_tol: f64,
) -> Result<(Classification, f64, f64)> {
    let fp = fixed_point_residual(ops, set, z)?;
    let sz = ops.apply_s(z)?;
    let value = set.support_with(sz.as_slice(), cone_tol)? + 0.5 * sz.norm_sq();
    let disp = sz.dist(d)?;
    let class = Classification {
        fixed_point: fp <= tol,
        in_s_inverse_d_set: value.le(tol),
        displacement: disp <= tol,
    };
    let worst = fp.max(value.to_f64().max(0.0)).max(disp);
    let defect = (sz.inner(z)? + 0.5 * sz.norm_sq()).abs();
    Ok((class, worst, defect))
}

/// Probe points in `C`: the computed cycles, perturbed cycles mapped back
/// into `C`, and generic points of `C`.
pub fn pthm_probes(
    ops: &CycleOps,
    set: &ConvexSet,
    cycles: &[CycleResult],
    count: usize,
    seed: u64,
    radius: f64,
) -> Result<Vec<ProductVector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let good: Vec<&ProductVector> = cycles
        .iter()
        .filter(|c| c.converged)
        .map(|c| &c.z)
        .collect();
    let mut probes: Vec<ProductVector> = good.iter().map(|&z| z.clone()).collect();
    let generic = sample_product(set, ops, count, seed ^ 0x9e37_79b9_7f4a_7c15, radius);
    let mut k = 0;
    while probes.len() < count {
        if !good.is_empty() && probes.len().is_multiple_of(2) {
            let z = good[rng.random_range(0..good.len())];
            let delta = 10f64.powf(rng.random_range(-2.0..0.0));
            let g = random_product(&mut rng, ops.m(), ops.n(), 1.0);
            let g = g.scale(delta / g.norm().max(1e-300));
            probes.push(set.project_product(&(z + &g))?);
        } else {
            probes.push(generic[k % generic.len()].clone());
            k += 1;
        }
    }
    probes.truncate(count.max(good.len()));
    Ok(probes)
}

/// The three fixed-point conditions must classify every probe identically.
///
/// Returns `pthm` (a disagreement counts with the largest of the three
/// residuals, which then necessarily exceeds `tol`) and `pthm/identity`
/// for `⟨Sz, z⟩ = -½‖Sz‖²`, measured relative to `1 + ‖z‖²`.
pub fn check_pthm_equivalence(
    ops: &CycleOps,
    set: &ConvexSet,
    d: &ProductVector,
    points: &[ProductVector],
    tol: f64,
    cone_tol: f64,
    identity_tol: f64,
) -> Result<Vec<CheckRecord>> {
    let mut rec = Recorder::new("pthm", tol);
    let mut identity = Recorder::new("pthm/identity", identity_tol);
    let mut cycles = 0;
    for (k, z) in points.iter().enumerate() {
        let outside = set.distance(z.as_slice())?;
        if outside > Tolerances::default().feas {
            return Err(Error::Precondition(format!(
                "probe {k} lies at distance {outside:e} from C"
            )));
        }
        let (class, worst, defect) = classify(ops, set, d, z, tol, cone_tol)?;
        identity.observe(
            || format!("probe {k}: <Sz,z> != -|Sz|^2/2"),
            z,
            defect / (1.0 + z.norm_sq()),
        );
        let label = || {
            format!(
                "probe {k}: fixed point {}, S^-1 D {}, S^-1 d {}",
                class.fixed_point, class.in_s_inverse_d_set, class.displacement
            )
        };
        if class.agrees() {
            cycles += usize::from(class.fixed_point);
            rec.observe(label, z, 0.0);
        } else {
            rec.observe(label, z, worst);
        }
    }
    rec.note(format!(
        "{cycles} of {} probes classified as cycles by all three conditions",
        points.len()
    ));
    Ok(vec![rec.finish(), identity.finish()])
}

/// Offsets `s_k = Σ_{i=k}^{m-1} v_i` (0-based `k`, with `s_{m-1} = 0`), so
/// that the right-hand side is `∩_k (C_k + s_k)`.
pub fn translate_offsets(v: &ProductVector) -> Vec<Vec<f64>> {
    let (m, n) = v.shape();
    let mut offsets = vec![vec![0.0; n]; m];
    for k in (0..m - 1).rev() {
        offsets[k] = offsets[k + 1]
            .iter()
            .zip(v.block(k))
            .map(|(a, b)| a + b)
            .collect();
    }
    offsets
}

fn grid_candidates(set: &ConvexSet, step: f64, radius: f64) -> Result<Vec<Vec<f64>>> {
    let n = set.dim();
    let (lo, hi) = match set.bounds() {
        Some(b) => b,
        None => {
            let anchor = set.project(&vec![0.0; n])?;
            (
                anchor.iter().map(|a| a - radius).collect(),
                anchor.iter().map(|a| a + radius).collect(),
            )
        }
    };
    let mut step = step;
    let count = |step: f64| -> usize {
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| ((h - l) / step).floor() as usize + 1)
            .product()
    };
    while count(step) > MAX_GRID_POINTS {
        step *= 2.0;
    }
    let axes: Vec<Vec<f64>> = lo
        .iter()
        .zip(&hi)
        .map(|(l, h)| {
            let k = ((h - l) / step).floor() as usize;
            (0..=k).map(|i| l + i as f64 * step).collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    out.iter().map(|p| set.project(p)).collect()
}

/// Both inclusions of `{z_m : z a cycle} = ∩_k (C_k + Σ_{i=k}^{m-1} v_i)`.
///
/// Forward: every computed cycle's last block lies in every translate.
/// Reverse: candidates `ζ ∈ C_m` lying in all translates yield
/// `w_k = ζ - Σ_{i=k}^{m-1} v_i`, which must satisfy `Sw = d` and be a cycle.
pub fn verify_geometry(
    ops: &CycleOps,
    set: &ConvexSet,
    gap: &GapResult,
    cycles: &[CycleResult],
    settings: &VerifySettings,
) -> Result<CheckRecord> {
    if !gap.converged {
        return Err(Error::Precondition(
            "displacement solver did not converge".into(),
        ));
    }
    let blocks = factors(ops, set)?;
    let tol = settings.tolerances.geometry;
    let (m, n) = (ops.m(), ops.n());
    let offsets = translate_offsets(&gap.v);
    let translates: Vec<ConvexSet> = blocks
        .iter()
        .zip(&offsets)
        .map(|(c, s)| ConvexSet::translate(c.clone(), s.clone()))
        .collect::<Result<_>>()?;
    let rhs_violation = |zeta: &[f64]| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for t in &translates {
            worst = worst.max(t.distance(zeta)?);
        }
        Ok(worst)
    };

    let mut rec = Recorder::new("geometry", tol);

    // forward inclusion
    for (k, c) in cycles.iter().enumerate().filter(|(_, c)| c.converged) {
        let zm = c.z.block(m - 1);
        let viol = rhs_violation(zm)?;
        rec.observe(
            || format!("start {k}: z_m outside the right-hand side"),
            &c.z,
            viol,
        );
    }

    // reverse inclusion
    let last = &blocks[m - 1];
    let mut candidates: Vec<Vec<f64>> = cycles
        .iter()
        .filter(|c| c.converged)
        .map(|c| c.z.block(m - 1).to_vec())
        .collect();
    if n <= 2 {
        candidates.extend(grid_candidates(
            last,
            settings.grid_step,
            settings.sample_radius,
        )?);
    }
    candidates.extend(last.sample_points_within(
        settings.geometry_samples,
        settings.seed,
        settings.sample_radius,
    ));

    let mut accepted = 0usize;
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for zeta in &candidates {
        if rhs_violation(zeta)? > tol {
            continue;
        }
        accepted += 1;
        for j in 0..n {
            lo[j] = lo[j].min(zeta[j]);
            hi[j] = hi[j].max(zeta[j]);
        }
        let mut w = ProductVector::zeros(m, n);
        for k in 0..m {
            for j in 0..n {
                w[(k, j)] = zeta[j] - offsets[k][j];
            }
        }
        let sw = ops.apply_s(&w)?.dist(&gap.d)?;
        let fp = w.dist(&cycle_map(ops, set, &w)?)?;
        rec.observe(|| "constructed w has Sw != d".into(), &w, sw);
        rec.observe(|| "constructed w is not a cycle".into(), &w, fp);
    }
    rec.note(format!(
        "reverse inclusion: {accepted} of {} candidates in the right-hand side",
        candidates.len()
    ));
    if accepted > 0 {
        rec.note(format!("accepted candidates span [{lo:?}, {hi:?}]"));
    } else {
        rec.note("no candidate landed in the right-hand side; reverse inclusion is vacuous");
    }
    Ok(rec.finish())
}

/// Draws points of `D` by scaling random directions of `Y`, plus the
/// segment `[0, d]`. Returns the samples and whether any came from the
/// random directions.
pub fn sample_d(
    ops: &CycleOps,
    set: &ConvexSet,
    d: &ProductVector,
    count: usize,
    seed: u64,
    cone_tol: f64,
) -> Result<(Vec<ProductVector>, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![ops.zeros(), d.clone()];
    let mut found = false;
    let scale = d.norm().max(1.0);
    let mut attempts = 0;
    while out.len() < count && attempts < 4 * count {
        attempts += 1;
        let y = ops.project_y(&random_product(&mut rng, ops.m(), ops.n(), scale))?;
        let ny = y.norm_sq();
        if ny == 0.0 {
            continue;
        }
        let Some(sigma) = set.support_with(y.as_slice(), cone_tol)?.finite() else {
            continue;
        };
        if sigma >= 0.0 {
            continue;
        }
        // t·σ(y) + ½t²‖y‖² ≤ 0 for t ∈ [0, -2σ(y)/‖y‖²]
        let t_max = -2.0 * sigma / ny;
        let t = t_max * rng.random_range(0.0..1.0);
        out.push(y.scale(t));
        found = true;
    }
    let mut k = 1;
    while out.len() < count {
        let theta = k as f64 / (count - out.len() + k) as f64;
        out.push(d.scale(theta.min(1.0)));
        k += 1;
    }
    Ok((out, found))
}

/// Diagonal identity `f(b, b) = 0` and the certificate
/// `sup_{b ∈ D} f(b, d) ≤ 0` at the computed `d`, plus the saddle residual
/// over sampled points of `C`, the origin and the computed cycles.
///
/// Returns `saddle` and `saddle/diagonal`.
pub fn saddle_check(
    ops: &CycleOps,
    set: &ConvexSet,
    gap: &GapResult,
    cycles: &[CycleResult],
    settings: &VerifySettings,
) -> Result<Vec<CheckRecord>> {
    if !gap.converged {
        return Err(Error::Precondition(
            "displacement solver did not converge".into(),
        ));
    }
    let tol = &settings.tolerances;
    let mut rec = Recorder::new("saddle", tol.saddle);
    let mut diagonal = Recorder::new("saddle/diagonal", tol.identity);
    let d = &gap.d;

    let (bs, found) = sample_d(ops, set, d, settings.b_samples, settings.seed, tol.cone)?;
    if !found {
        rec.note("degenerate: random directions produced no points of D; using the segment [0, d]");
    }
    let mut sup = f64::NEG_INFINITY;
    for b in &bs {
        let diag = saddle_function(ops, set, b, b, tol.cone)?;
        diagonal.observe(|| "f(b,b) != 0".into(), b, diag.abs());
        let f = saddle_function(ops, set, b, d, tol.cone)?;
        sup = sup.max(f);
        rec.observe(|| "f(b,d) > 0".into(), b, f.max(0.0));
    }
    // the diagonal identity holds on all of Y, independent of D
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(1));
    for _ in 0..settings.b_samples {
        let y = ops.project_y(&random_product(&mut rng, ops.m(), ops.n(), 1.0))?;
        let diag = diagonal_value(ops, &y)?;
        diagonal.observe(|| "1/2|y|^2 + <y,Qy> != 0".into(), &y, diag.abs());
    }

    let mut probes = sample_product(
        set,
        ops,
        settings.samples,
        settings.seed,
        settings.sample_radius,
    );
    probes.push(ops.zeros());
    probes.extend(cycles.iter().filter(|c| c.converged).map(|c| c.z.clone()));
    let solver_tol = Tolerances {
        solver: Tolerances::default().solver.max(tol.cycle),
        cone: tol.cone,
        ..Tolerances::default()
    };
    let res = saddle_residual(ops, set, d, &gap.e, &probes, &solver_tol)?;
    rec.observe(|| "saddle residual over probes".into(), d, res.max(0.0));
    rec.note(format!(
        "{} samples of D, sup f(b,d) = {sup:e}; saddle residual over {} probes = {res:e}",
        bs.len(),
        probes.len()
    ));
    Ok(vec![rec.finish(), diagonal.finish()])
}

/// `‖d‖ ≤ 2‖c₀‖` for sampled `c₀ ∈ C`, together with `d ∈ D`.
pub fn d_bound_check(
    ops: &CycleOps,
    set: &ConvexSet,
    gap: &GapResult,
    settings: &VerifySettings,
) -> Result<CheckRecord> {
    if !gap.converged {
        return Err(Error::Precondition(
            "displacement solver did not converge".into(),
        ));
    }
    let tol = settings.tolerances.dbound;
    let mut rec = Recorder::new("dbound", tol);
    let d = &gap.d;
    let dn = d.norm();

    let ay = ops.apply_a(d)?.norm();
    rec.observe(|| "Ad != 0".into(), d, ay);
    let value = set.support_with(d.as_slice(), settings.tolerances.cone)? + 0.5 * d.norm_sq();
    rec.observe(
        || "sigma_C(d) + |d|^2/2 > 0".into(),
        d,
        value.to_f64().max(0.0),
    );

    let samples = sample_product(
        set,
        ops,
        settings.samples,
        settings.seed,
        settings.sample_radius,
    );
    let mut tightest = f64::INFINITY;
    for c0 in &samples {
        let bound = 2.0 * c0.norm();
        tightest = tightest.min(bound);
        rec.observe(|| "|d| > 2|c0|".into(), c0, (dn - bound).max(0.0));
    }
    rec.note(format!(
        "|d| = {dn:e}, smallest sampled 2|c0| = {tightest:e}"
    ));
    Ok(rec.finish())
}

/// A failed precondition as a failing record.
pub fn precondition_failure(name: &str, tolerance: f64, err: &Error) -> CheckRecord {
    CheckRecord {
        name: name.to_string(),
        passed: false,
        max_violation: f64::MAX,
        tolerance,
        evaluated: 0,
        witnesses: vec![Witness {
            label: err.to_string(),
            point: Vec::new(),
            violation: f64::MAX,
        }],
        notes: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::{dr_gap_solve, km_fixed_point, SolverSettings};

    fn line(xs: &[f64]) -> ProductVector {
        ProductVector::from_flat(xs.len(), 1, xs.to_vec()).unwrap()
    }

    fn intervals(bounds: &[(f64, f64)]) -> ConvexSet {
        ConvexSet::product(
            bounds
                .iter()
                .map(|&(lo, hi)| ConvexSet::interval(lo, hi).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn singletons(points: &[f64]) -> ConvexSet {
        ConvexSet::product(
            points
                .iter()
                .map(|&p| ConvexSet::singleton(vec![p]).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn solve(ops: &CycleOps, c: &ConvexSet) -> (GapResult, Vec<CycleResult>) {
        let g = dr_gap_solve(ops, c, &SolverSettings::default(), &ops.zeros()).unwrap();
        let k = km_fixed_point(ops, c, &ops.zeros(), 0.5, 100_000, 1e-8).unwrap();
        (g, vec![k])
    }

    #[test]
    fn check_cycle_examples() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0)]);
        let d = line(&[2.0, -2.0]);
        let r = check_cycle(&ops, &c, &line(&[1.0, 3.0]), &d, 1e-9).unwrap();
        assert!(r.is_cycle);
        assert_eq!(r.residual, 0.0);

        let r = check_cycle(&ops, &c, &line(&[0.0, 3.0]), &d, 1e-9).unwrap();
        assert!(!r.is_cycle);
        assert_eq!(r.residual, 1.0);
        assert_eq!(r.fixed_point_residual, 1.0);

        let ops3 = CycleOps::new(3, 1).unwrap();
        let c3 = singletons(&[0.0, 10.0, -2.0]);
        let r = check_cycle(
            &ops3,
            &c3,
            &line(&[0.0, 10.0, -2.0]),
            &line(&[-2.0, -10.0, 12.0]),
            1e-9,
        )
        .unwrap();
        assert!(r.is_cycle);
    }

    #[test]
    fn check_cycle_flags_wrong_displacement() {
        // the true cycle with a wrong d: the two forms disagree
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0)]);
        let err = check_cycle(&ops, &c, &line(&[1.0, 3.0]), &line(&[1.0, -1.0]), 1e-9);
        assert!(matches!(err, Err(Error::Inconsistent(_))));
    }

    #[test]
    fn pthm_classifies_cycle_and_generic_points() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0)]);
        let d = line(&[2.0, -2.0]);
        let (class, _, _) = classify(&ops, &c, &d, &line(&[1.0, 3.0]), 1e-6, 1e-8).unwrap();
        assert!(class.agrees() && class.fixed_point);
        let (class, _, _) = classify(&ops, &c, &d, &line(&[0.2, 4.1]), 1e-6, 1e-8).unwrap();
        assert!(class.agrees() && !class.fixed_point);

        let rec = check_pthm_equivalence(
            &ops,
            &c,
            &d,
            &[line(&[1.0, 3.0]), line(&[0.2, 4.1]), line(&[-1.0, 5.0])],
            1e-6,
            1e-8,
            1e-10,
        )
        .unwrap();
        assert!(
            rec.iter().all(|r| r.passed && r.witnesses.is_empty()),
            "{rec:?}"
        );
    }

    #[test]
    fn pthm_intersecting_common_point() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(0.0, 1.0), (0.0, 1.0)]);
        let (class, _, _) =
            classify(&ops, &c, &ops.zeros(), &line(&[0.3, 0.3]), 1e-6, 1e-8).unwrap();
        assert!(class.fixed_point && class.in_s_inverse_d_set && class.displacement);
    }

    #[test]
    fn pthm_detects_wrong_displacement() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0)]);
        let rec = check_pthm_equivalence(
            &ops,
            &c,
            &line(&[2.5, -2.5]),
            &[line(&[1.0, 3.0])],
            1e-6,
            1e-8,
            1e-10,
        )
        .unwrap();
        assert!(!rec[0].passed);
        assert_eq!(rec[0].witnesses.len(), 1);
        assert!(rec[0].max_violation > rec[0].tolerance);
        assert!(rec[1].passed);
    }

    #[test]
    fn pthm_rejects_probes_outside_c() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0)]);
        let err = check_pthm_equivalence(
            &ops,
            &c,
            &line(&[2.0, -2.0]),
            &[line(&[2.0, 3.0])],
            1e-6,
            1e-8,
            1e-10,
        );
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn translate_offsets_are_suffix_sums() {
        let v = line(&[10.0, -12.0, 2.0]);
        assert_eq!(
            translate_offsets(&v),
            vec![vec![-2.0], vec![-12.0], vec![0.0]]
        );
    }

    #[test]
    fn geometry_two_intervals() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0)]);
        let (g, k) = solve(&ops, &c);
        let rec = verify_geometry(&ops, &c, &g, &k, &VerifySettings::default()).unwrap();
        assert!(rec.passed, "{rec:?}");
        assert!(rec.max_violation <= 1e-8);
        assert!(rec.notes[1].contains("[[3.0], [3.0]]"), "{:?}", rec.notes);
    }

    #[test]
    fn geometry_three_singletons() {
        let ops = CycleOps::new(3, 1).unwrap();
        let c = singletons(&[0.0, 10.0, -2.0]);
        let (g, k) = solve(&ops, &c);
        let rec = verify_geometry(&ops, &c, &g, &k, &VerifySettings::default()).unwrap();
        assert!(rec.passed, "{rec:?}");
    }

    #[test]
    fn geometry_intersecting_intervals_accepts_whole_interval() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(0.0, 1.0), (0.0, 1.0)]);
        let (g, k) = solve(&ops, &c);
        let rec = verify_geometry(&ops, &c, &g, &k, &VerifySettings::default()).unwrap();
        assert!(rec.passed, "{rec:?}");
        assert!(rec.notes[1].contains("[[0.0], [1.0]]"), "{:?}", rec.notes);
    }

    #[test]
    fn geometry_rejects_wrong_gap_vector() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0)]);
        let (mut g, k) = solve(&ops, &c);
        g.v = line(&[1.5, -1.5]);
        let rec = verify_geometry(&ops, &c, &g, &k, &VerifySettings::default()).unwrap();
        assert!(!rec.passed);
        assert!(!rec.witnesses.is_empty());
    }

    #[test]
    fn geometry_requires_convergence() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0)]);
        let (mut g, k) = solve(&ops, &c);
        g.converged = false;
        assert!(matches!(
            verify_geometry(&ops, &c, &g, &k, &VerifySettings::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn saddle_check_two_intervals() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0)]);
        let (g, k) = solve(&ops, &c);
        let settings = VerifySettings {
            b_samples: 100,
            ..VerifySettings::default()
        };
        let rec = saddle_check(&ops, &c, &g, &k, &settings).unwrap();
        assert_eq!(rec.len(), 2);
        assert!(rec.iter().all(|r| r.passed), "{rec:?}");
        assert!(rec[0].max_violation <= 1e-8);
        assert!(rec[0].notes.iter().all(|n| !n.contains("degenerate")));
    }

    #[test]
    fn saddle_function_at_zero_and_diagonal() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0)]);
        let d = line(&[2.0, -2.0]);
        // f(0, d) = σ(d) + ½‖d‖² = -4 + 4
        assert_eq!(
            saddle_function(&ops, &c, &ops.zeros(), &d, 1e-8).unwrap(),
            0.0
        );
        assert_eq!(saddle_function(&ops, &c, &d, &d, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn sample_d_points_lie_in_d() {
        let ops = CycleOps::new(3, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0), (0.0, 2.0)]);
        let (g, _) = solve(&ops, &c);
        let (bs, found) = sample_d(&ops, &c, &g.d, 200, 3, 1e-8).unwrap();
        assert!(found);
        assert_eq!(bs.len(), 200);
        for b in &bs {
            let m = crate::gap::membership_d(&ops, &c, b, 1e-8, 1e-8).unwrap();
            assert!(m.in_d, "{b} value {}", m.value);
        }
    }

    #[test]
    fn d_bound_examples() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0)]);
        let (g, _) = solve(&ops, &c);
        let rec = d_bound_check(&ops, &c, &g, &VerifySettings::default()).unwrap();
        assert!(rec.passed, "{rec:?}");

        let ops3 = CycleOps::new(3, 1).unwrap();
        let c3 = singletons(&[0.0, 10.0, -2.0]);
        let (g3, _) = solve(&ops3, &c3);
        // 2‖(0,10,-2)‖ ≈ 20.4 ≥ ‖d‖ = √248 ≈ 15.75
        assert!((g3.d.norm() - 248f64.sqrt()).abs() < 1e-9);
        let rec = d_bound_check(&ops3, &c3, &g3, &VerifySettings::default()).unwrap();
        assert!(rec.passed, "{rec:?}");
    }

    #[test]
    fn d_bound_zero_displacement_passes() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(0.0, 1.0), (0.0, 1.0)]);
        let (g, _) = solve(&ops, &c);
        assert!(g.d.norm() < 1e-12);
        let rec = d_bound_check(&ops, &c, &g, &VerifySettings::default()).unwrap();
        assert!(rec.passed);
    }

    #[test]
    fn cycle_check_reports_solver_agreement() {
        let ops = CycleOps::new(2, 1).unwrap();
        let c = intervals(&[(-1.0, 1.0), (3.0, 5.0)]);
        let (g, k) = solve(&ops, &c);
        let rec = cycle_check(
            &ops,
            &c,
            &k,
            std::slice::from_ref(&g),
            &CheckTolerances::default(),
        )
        .unwrap();
        assert!(rec.iter().all(|r| r.passed), "{rec:?}");

        let mut off = g.clone();
        off.d = line(&[2.01, -2.01]);
        let rec = cycle_check(&ops, &c, &k, &[g, off], &CheckTolerances::default()).unwrap();
        assert!(rec[0].passed);
        assert!(!rec[1].passed);
        assert_eq!(rec[1].witnesses.len(), 1);
    }
}
