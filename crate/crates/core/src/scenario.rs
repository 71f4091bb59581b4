//! Scenario files, orchestration and reports.
//!
//! A scenario is a JSON document:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "two_intervals",
//!   "m": 2,
//!   "n": 1,
//!   "sets": [
//!     {"kind": "box", "lower": [-1.0], "upper": [1.0]},
//!     {"kind": "box", "lower": [3.0], "upper": [5.0]}
//!   ],
//!   "solver": {"alpha": 0.5, "lambda": 1.0, "max_iters": 100000, "eps_solver": 1e-8},
//!   "verify": {"samples": 100, "grid_step": 0.05, "seed": 7},
//!   "starts": [[[0.0], [0.0]]]
//! }
//! ```
//!
//! `solver`, `verify` and `starts` are optional. Without `starts`, the
//! fixed-point iteration runs from the origin and four seeded random points.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gap::{
    km_fixed_point, saddle_residual, CycleResult, DrGapSolver, GapResult, SolverSettings,
};
use crate::hilbert::{ProductVector, Tolerances};
use crate::operators::CycleOps;
use crate::sets::ConvexSet;
use crate::verify::{
    check_pthm_equivalence, cycle_check, d_bound_check, precondition_failure, pthm_probes,
    saddle_check, verify_geometry, CheckRecord, VerifySettings,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Default number of random fixed-point starts besides the origin.
const RANDOM_STARTS: usize = 4;
/// Splitting runs; the first starts at the origin.
const DR_STARTS: usize = 3;
/// Standard deviation of random starting points.
const START_SCALE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub sets: Vec<ConvexSet>,
    pub solver: SolverSettings,
    pub verify: VerifySettings,
    pub starts: Vec<ProductVector>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema_version: u32,
    name: String,
    m: usize,
    n: usize,
    sets: Vec<serde_json::Value>,
    #[serde(default)]
    solver: SolverSettings,
    #[serde(default)]
    verify: VerifySettings,
    #[serde(default)]
    starts: Option<Vec<Vec<Vec<f64>>>>,
}

impl Scenario {
    /// Parses and validates a scenario. Errors are [`Error::Config`] with a
    /// line/column or field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawScenario = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version: unsupported version {} (expected {SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        if raw.m < 2 {
            return Err(Error::Config(format!(
                "m: a cycle needs at least two sets, m >= 2 (got {})",
                raw.m
            )));
        }
        if raw.n == 0 {
            return Err(Error::Config("n: dimension must be at least 1".into()));
        }
        if raw.sets.len() != raw.m {
            return Err(Error::Config(format!(
                "sets: expected m = {} descriptors, found {}",
                raw.m,
                raw.sets.len()
            )));
        }
        let mut sets = Vec::with_capacity(raw.m);
        for (i, value) in raw.sets.into_iter().enumerate() {
            let set: ConvexSet = serde_json::from_value(value)
                .map_err(|e| Error::Config(format!("sets[{i}]: {e}")))?;
            if set.dim() != raw.n {
                return Err(Error::Config(format!(
                    "sets[{i}]: dimension {} does not match n = {}",
                    set.dim(),
                    raw.n
                )));
            }
            sets.push(set);
        }
        raw.solver
            .validate()
            .map_err(|e| Error::Config(format!("solver: {e}")))?;
        raw.verify
            .validate()
            .map_err(|e| Error::Config(format!("verify: {e}")))?;

        let starts = match raw.starts {
            Some(list) => {
                if list.is_empty() {
                    return Err(Error::Config("starts: must not be empty".into()));
                }
                list.iter()
                    .enumerate()
                    .map(|(k, blocks)| {
                        let p = ProductVector::from_blocks(blocks)
                            .map_err(|e| Error::Config(format!("starts[{k}]: {e}")))?;
                        if p.shape() != (raw.m, raw.n) {
                            return Err(Error::Config(format!(
                                "starts[{k}]: shape {:?} does not match (m, n) = ({}, {})",
                                p.shape(),
                                raw.m,
                                raw.n
                            )));
                        }
                        Ok(p)
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            None => default_starts(raw.m, raw.n, RANDOM_STARTS, raw.verify.seed),
        };
        Ok(Self {
            name: raw.name,
            m: raw.m,
            n: raw.n,
            sets,
            solver: raw.solver,
            verify: raw.verify,
            starts,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn ops(&self) -> CycleOps {
        CycleOps::new(self.m, self.n).expect("validated shape")
    }

    /// The product set `C_1 × ... × C_m`.
    pub fn product_set(&self) -> ConvexSet {
        ConvexSet::product(self.sets.clone()).expect("validated sets")
    }
}

/// The origin followed by `k` Gaussian points drawn from `seed`.
pub fn default_starts(m: usize, n: usize, k: usize, seed: u64) -> Vec<ProductVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![ProductVector::zeros(m, n)];
    for _ in 0..k {
        let data = (0..m * n)
            .map(|_| START_SCALE * rng.sample::<f64, _>(StandardNormal))
            .collect();
        starts.push(ProductVector::from_flat(m, n, data).expect("finite"));
    }
    starts
}

/// Verifier check families selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckGroup {
    Cycle,
    Pthm,
    Geometry,
    Saddle,
    Dbound,
}

impl CheckGroup {
    pub const ALL: [CheckGroup; 5] = [
        CheckGroup::Cycle,
        CheckGroup::Pthm,
        CheckGroup::Geometry,
        CheckGroup::Saddle,
        CheckGroup::Dbound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckGroup::Cycle => "cycle",
            CheckGroup::Pthm => "pthm",
            CheckGroup::Geometry => "geometry",
            CheckGroup::Saddle => "saddle",
            CheckGroup::Dbound => "dbound",
        }
    }

    /// Parses a list of names; `all` selects every group.
    pub fn parse_list<S: AsRef<str>>(names: &[S]) -> Result<Vec<CheckGroup>> {
        let mut out = Vec::new();
        for name in names {
            match name.as_ref() {
                "all" => out.extend(Self::ALL),
                other => out.push(other.parse()?),
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl FromStr for CheckGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown check {s:?}; expected one of cycle, pthm, geometry, saddle, dbound, all"
                ))
            })
    }
}

impl fmt::Display for CheckGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Residuals of the computed displacement, gathered in one place.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    /// `‖Ad‖`
    pub y_residual: f64,
    /// `max(0, σ_C(d) + ½‖d‖²)`
    pub d_residual: f64,
    /// Saddle residual over sampled points of `C`, the origin and the cycles.
    pub saddle_residual: Option<f64>,
    /// Largest `‖z - P_C R z‖` over converged fixed-point runs.
    pub fixed_point_residual: Option<f64>,
    /// Condition number of the linear resolvent.
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    /// Seconds since the Unix epoch; excluded from determinism.
    pub generated_at: u64,
    pub scenario: String,
    pub m: usize,
    pub n: usize,
    pub solver: SolverSettings,
    pub verify: VerifySettings,
    pub d: ProductVector,
    pub v: ProductVector,
    pub residuals: Residuals,
    pub cycles: Vec<CycleResult>,
    pub gap_runs: Vec<GapResult>,
    pub checks: Vec<CheckRecord>,
    pub passed: bool,
    /// Wall time per phase in seconds; excluded from determinism.
    pub timing: BTreeMap<String, f64>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// True iff every check passed and every solver run converged.
    pub fn all_converged(&self) -> bool {
        self.cycles.iter().all(|c| c.converged) && self.gap_runs.iter().all(|g| g.converged)
    }
}

fn run_checks(
    group: CheckGroup,
    ops: &CycleOps,
    set: &ConvexSet,
    cycles: &[CycleResult],
    gaps: &[GapResult],
    vs: &VerifySettings,
) -> Result<Vec<CheckRecord>> {
    let gap = &gaps[0];
    let tol = &vs.tolerances;
    let failed = |tolerance: f64, e: Error| -> Result<Vec<CheckRecord>> {
        match e {
            Error::Precondition(_) => Ok(vec![precondition_failure(group.name(), tolerance, &e)]),
            other => Err(other),
        }
    };
    let out = match group {
        CheckGroup::Cycle => cycle_check(ops, set, cycles, gaps, tol),
        CheckGroup::Pthm => {
            let probes = pthm_probes(ops, set, cycles, vs.samples, vs.seed, vs.sample_radius)?;
            check_pthm_equivalence(
                ops,
                set,
                &gap.d,
                &probes,
                tol.classify,
                tol.cone,
                tol.identity,
            )
        }
        CheckGroup::Geometry => verify_geometry(ops, set, gap, cycles, vs).map(|r| vec![r]),
        CheckGroup::Saddle => saddle_check(ops, set, gap, cycles, vs),
        CheckGroup::Dbound => d_bound_check(ops, set, gap, vs).map(|r| vec![r]),
    };
    let tolerance = match group {
        CheckGroup::Cycle => tol.cycle,
        CheckGroup::Pthm => tol.classify,
        CheckGroup::Geometry => tol.geometry,
        CheckGroup::Saddle => tol.saddle,
        CheckGroup::Dbound => tol.dbound,
    };
    out.or_else(|e| failed(tolerance, e))
}

/// Runs the fixed-point iteration from every start, the splitting solver
/// from three starts, then the selected checks, in that order.
pub fn run(scenario: &Scenario, groups: &[CheckGroup]) -> Result<Report> {
    let ops = scenario.ops();
    let set = scenario.product_set();
    let s = &scenario.solver;
    let vs = &scenario.verify;
    let mut timing = BTreeMap::new();

    info!(
        "scenario {}: m = {}, n = {}",
        scenario.name, scenario.m, scenario.n
    );
    let t = Instant::now();
    let mut cycles = Vec::with_capacity(scenario.starts.len());
    for (k, x0) in scenario.starts.iter().enumerate() {
        let c = km_fixed_point(&ops, &set, x0, s.alpha, s.max_iters, s.eps_solver)?;
        debug!(
            "fixed-point start {k}: {} iterations, residual {:e}",
            c.iterations, c.fixed_point_residual
        );
        if !c.converged {
            warn!("fixed-point start {k} did not converge");
        }
        cycles.push(c);
    }
    timing.insert("fixed_point".to_string(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let solver = DrGapSolver::new(ops, &set, s, &Tolerances::default())?;
    let dr_starts = default_starts(
        scenario.m,
        scenario.n,
        DR_STARTS - 1,
        vs.seed.wrapping_add(17),
    );
    let mut gaps = Vec::with_capacity(DR_STARTS);
    for (k, x0) in dr_starts.iter().enumerate() {
        let g = solver.solve(x0)?;
        debug!(
            "splitting start {k}: {} iterations, residual {:e}",
            g.iterations, g.splitting_residual
        );
        if !g.converged {
            warn!("splitting start {k} did not converge");
        }
        gaps.push(g);
    }
    timing.insert("splitting".to_string(), t.elapsed().as_secs_f64());
    let gap = &gaps[0];
    info!("d = {}, v = {}", gap.d, gap.v);

    let converged: Vec<&CycleResult> = cycles.iter().filter(|c| c.converged).collect();
    let fixed_point_residual = converged
        .iter()
        .map(|c| c.fixed_point_residual)
        .reduce(f64::max);
    let mut probes: Vec<ProductVector> = set
        .sample_points_within(vs.samples, vs.seed, vs.sample_radius)
        .into_iter()
        .map(|p| ProductVector::from_flat(scenario.m, scenario.n, p).expect("shape"))
        .collect();
    probes.push(ops.zeros());
    probes.extend(converged.iter().map(|c| c.z.clone()));
    let residual_tol = Tolerances {
        solver: vs.tolerances.cycle,
        cone: vs.tolerances.cone,
        ..Tolerances::default()
    };
    let saddle = saddle_residual(&ops, &set, &gap.d, &gap.e, &probes, &residual_tol).ok();
    let residuals = Residuals {
        y_residual: gap.y_residual,
        d_residual: gap.d_residual.min(f64::MAX),
        saddle_residual: saddle.map(|r| r.min(f64::MAX)),
        fixed_point_residual,
        condition: solver.condition(),
    };

    let mut checks = Vec::new();
    for &group in groups {
        let t = Instant::now();
        let records = run_checks(group, &ops, &set, &cycles, &gaps, vs)?;
        for r in &records {
            info!(
                "check {}: {} (max violation {:e}, tolerance {:e})",
                r.name,
                if r.passed { "pass" } else { "FAIL" },
                r.max_violation,
                r.tolerance
            );
        }
        checks.extend(records);
        timing.insert(format!("check.{group}"), t.elapsed().as_secs_f64());
    }

    let mut report = Report {
        schema_version: SCHEMA_VERSION,
        generated_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        scenario: scenario.name.clone(),
        m: scenario.m,
        n: scenario.n,
        solver: *s,
        verify: *vs,
        d: gap.d.clone(),
        v: gap.v.clone(),
        residuals,
        cycles,
        gap_runs: gaps,
        checks,
        passed: false,
        timing,
    };
    report.passed = report.all_converged() && report.checks.iter().all(|c| c.passed);
    Ok(report)
}
