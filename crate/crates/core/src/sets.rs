//! Closed convex sets with closed-form projection, support function,
//! support point and membership.
//!
//! Every operation works on flat coordinate slices. A product set reads its
//! argument as consecutive blocks, one per factor, so a [`ProductVector`]'s
//! flat storage can be passed directly.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{check_len, dist, dot, norm2, ProductVector, Tolerances};

/// Default radius used when sampling unbounded sets.
pub const DEFAULT_SAMPLE_RADIUS: f64 = 10.0;

/// A real number or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInf,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::PosInf => None,
        }
    }

    /// `+∞` maps to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    /// `self ≤ x`; always false for `+∞`.
    pub fn le(self, x: f64) -> bool {
        matches!(self, ExtendedReal::Finite(v) if v <= x)
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::PosInf,
        }
    }
}

impl Add<f64> for ExtendedReal {
    type Output = ExtendedReal;
    fn add(self, rhs: f64) -> ExtendedReal {
        self + ExtendedReal::Finite(rhs)
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.partial_cmp(b),
            (ExtendedReal::Finite(_), ExtendedReal::PosInf) => Some(Ordering::Less),
            (ExtendedReal::PosInf, ExtendedReal::Finite(_)) => Some(Ordering::Greater),
            (ExtendedReal::PosInf, ExtendedReal::PosInf) => Some(Ordering::Equal),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::PosInf => write!(f, "+inf"),
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(x) => s.serialize_f64(*x),
            ExtendedReal::PosInf => s.serialize_str("+inf"),
        }
    }
}

/// A nonempty closed convex subset of `R^n` (or of a product of such spaces).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetSpec", into = "SetSpec")]
pub enum ConvexSet {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `{x : ⟨normal, x⟩ ≤ offset}`
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
        normal_sq: f64,
    },
    /// `{x : ⟨normal, x⟩ = offset}`
    Hyperplane {
        normal: Vec<f64>,
        offset: f64,
        normal_sq: f64,
    },
    /// `origin + span(basis)`; `basis` rows are orthonormal and `origin` is
    /// the minimum-norm point of the set.
    Affine {
        origin: Vec<f64>,
        basis: Vec<Vec<f64>>,
    },
    Singleton {
        point: Vec<f64>,
    },
    /// The standard probability simplex of `R^dim`.
    Simplex {
        dim: usize,
    },
    Translate {
        inner: Box<ConvexSet>,
        shift: Vec<f64>,
    },
    Product {
        blocks: Vec<ConvexSet>,
    },
}

fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

fn require_finite(what: &str, xs: &[f64]) -> Result<()> {
    if all_finite(xs) {
        Ok(())
    } else {
        Err(Error::InvalidSet(format!("{what} has a non-finite entry")))
    }
}

fn require_dim(what: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        Err(Error::InvalidSet(format!("{what} must have dimension ≥ 1")))
    } else {
        Ok(())
    }
}

impl ConvexSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        require_dim("ball center", &center)?;
        require_finite("ball center", &center)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        require_dim("box lower", &lower)?;
        check_len(lower.len(), upper.len())?;
        require_finite("box lower", &lower)?;
        require_finite("box upper", &upper)?;
        if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
            return Err(Error::InvalidSet(format!(
                "box lower[{i}] = {} exceeds upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    /// Closed interval `[lo, hi]` of `R^1`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo], vec![hi])
    }

    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let normal_sq = Self::check_normal("halfspace", &normal, offset)?;
        Ok(ConvexSet::Halfspace {
            normal,
            offset,
            normal_sq,
        })
    }

    pub fn hyperplane(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let normal_sq = Self::check_normal("hyperplane", &normal, offset)?;
        Ok(ConvexSet::Hyperplane {
            normal,
            offset,
            normal_sq,
        })
    }

    fn check_normal(kind: &str, normal: &[f64], offset: f64) -> Result<f64> {
        require_dim(&format!("{kind} normal"), normal)?;
        require_finite(&format!("{kind} normal"), normal)?;
        if !offset.is_finite() {
            return Err(Error::InvalidSet(format!("{kind} offset must be finite")));
        }
        let nsq = dot(normal, normal);
        if nsq == 0.0 {
            return Err(Error::InvalidSet(format!("{kind} normal must be nonzero")));
        }
        Ok(nsq)
    }

    /// `point + span(directions)`. Directions are orthonormalized here;
    /// linearly dependent ones are dropped.
    pub fn affine(point: Vec<f64>, directions: Vec<Vec<f64>>) -> Result<Self> {
        require_dim("affine point", &point)?;
        require_finite("affine point", &point)?;
        let n = point.len();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for (k, dir) in directions.iter().enumerate() {
            check_len(n, dir.len())?;
            require_finite(&format!("affine basis[{k}]"), dir)?;
            let scale = norm2(dir);
            let mut w = dir.clone();
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&w, q);
                    w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
                }
            }
            let nw = norm2(&w);
            if scale > 0.0 && nw > 1e-12 * scale {
                w.iter_mut().for_each(|x| *x /= nw);
                basis.push(w);
            }
        }
        let mut origin = point;
        for q in &basis {
            let c = dot(&origin, q);
            origin.iter_mut().zip(q).for_each(|(o, qi)| *o -= c * qi);
        }
        Ok(ConvexSet::Affine { origin, basis })
    }

    pub fn singleton(point: Vec<f64>) -> Result<Self> {
        require_dim("singleton point", &point)?;
        require_finite("singleton point", &point)?;
        Ok(ConvexSet::Singleton { point })
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSet("simplex dimension must be ≥ 1".into()));
        }
        Ok(ConvexSet::Simplex { dim })
    }

    pub fn translate(inner: ConvexSet, shift: Vec<f64>) -> Result<Self> {
        check_len(inner.dim(), shift.len())?;
        require_finite("translate shift", &shift)?;
        Ok(ConvexSet::Translate {
            inner: Box::new(inner),
            shift,
        })
    }

    pub fn product(blocks: Vec<ConvexSet>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::InvalidSet("product needs at least one block".into()));
        };
        let n = first.dim();
        for (i, b) in blocks.iter().enumerate() {
            if b.dim() != n {
                return Err(Error::InvalidSet(format!(
                    "product block {i} has dimension {}, expected {n}",
                    b.dim()
                )));
            }
        }
        Ok(ConvexSet::Product { blocks })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ConvexSet::Ball { .. } => "ball",
            ConvexSet::Box { .. } => "box",
            ConvexSet::Halfspace { .. } => "halfspace",
            ConvexSet::Hyperplane { .. } => "hyperplane",
            ConvexSet::Affine { .. } => "affine",
            ConvexSet::Singleton { .. } => "singleton",
            ConvexSet::Simplex { .. } => "simplex",
            ConvexSet::Translate { .. } => "translate",
            ConvexSet::Product { .. } => "product",
        }
    }

    /// Total ambient dimension of the flat coordinate vector.
    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::Halfspace { normal, .. } | ConvexSet::Hyperplane { normal, .. } => {
                normal.len()
            }
            ConvexSet::Affine { origin, .. } => origin.len(),
            ConvexSet::Singleton { point } => point.len(),
            ConvexSet::Simplex { dim } => *dim,
            ConvexSet::Translate { shift, .. } => shift.len(),
            ConvexSet::Product { blocks } => blocks.iter().map(ConvexSet::dim).sum(),
        }
    }

    /// Factors of a product set, or `None` for any other kind.
    pub fn factors(&self) -> Option<&[ConvexSet]> {
        match self {
            ConvexSet::Product { blocks } => Some(blocks),
            _ => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            ConvexSet::Ball { .. }
            | ConvexSet::Box { .. }
            | ConvexSet::Singleton { .. }
            | ConvexSet::Simplex { .. } => true,
            ConvexSet::Halfspace { .. } | ConvexSet::Hyperplane { .. } => false,
            ConvexSet::Affine { basis, .. } => basis.is_empty(),
            ConvexSet::Translate { inner, .. } => inner.is_bounded(),
            ConvexSet::Product { blocks } => blocks.iter().all(ConvexSet::is_bounded),
        }
    }

    /// Coordinatewise bounding box, when the set is bounded.
    pub fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ConvexSet::Ball { center, radius } => Some((
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            )),
            ConvexSet::Box { lower, upper } => Some((lower.clone(), upper.clone())),
            ConvexSet::Singleton { point } => Some((point.clone(), point.clone())),
            ConvexSet::Simplex { dim } => Some((vec![0.0; *dim], vec![1.0; *dim])),
            ConvexSet::Affine { origin, basis } if basis.is_empty() => {
                Some((origin.clone(), origin.clone()))
            }
            ConvexSet::Translate { inner, shift } => inner.bounds().map(|(lo, hi)| {
                (
                    lo.iter().zip(shift).map(|(a, s)| a + s).collect(),
                    hi.iter().zip(shift).map(|(a, s)| a + s).collect(),
                )
            }),
            ConvexSet::Product { blocks } => {
                let mut lo = Vec::new();
                let mut hi = Vec::new();
                for b in blocks {
                    let (l, h) = b.bounds()?;
                    lo.extend(l);
                    hi.extend(h);
                }
                Some((lo, hi))
            }
            _ => None,
        }
    }

    /// Nearest point of the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        Ok(self.project_unchecked(x))
    }

    fn project_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConvexSet::Ball { center, radius } => {
                let r = dist(x, center);
                if r <= *radius {
                    x.to_vec()
                } else {
                    let s = radius / r;
                    center
                        .iter()
                        .zip(x)
                        .map(|(c, xi)| c + s * (xi - c))
                        .collect()
                }
            }
            ConvexSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(xi, (lo, hi))| xi.clamp(*lo, *hi))
                .collect(),
            ConvexSet::Halfspace {
                normal,
                offset,
                normal_sq,
            } => {
                let excess = dot(normal, x) - offset;
                if excess <= 0.0 {
                    x.to_vec()
                } else {
                    let s = excess / normal_sq;
                    x.iter().zip(normal).map(|(xi, a)| xi - s * a).collect()
                }
            }
            ConvexSet::Hyperplane {
                normal,
                offset,
                normal_sq,
            } => {
                let s = (dot(normal, x) - offset) / normal_sq;
                x.iter().zip(normal).map(|(xi, a)| xi - s * a).collect()
            }
            ConvexSet::Affine { origin, basis } => {
                let rel: Vec<f64> = x.iter().zip(origin).map(|(xi, o)| xi - o).collect();
                let mut out = origin.clone();
                for q in basis {
                    let c = dot(&rel, q);
                    out.iter_mut().zip(q).for_each(|(o, qi)| *o += c * qi);
                }
                out
            }
            ConvexSet::Singleton { point } => point.clone(),
            ConvexSet::Simplex { .. } => project_simplex(x),
            ConvexSet::Translate { inner, shift } => {
                let rel: Vec<f64> = x.iter().zip(shift).map(|(xi, s)| xi - s).collect();
                let mut p = inner.project_unchecked(&rel);
                p.iter_mut().zip(shift).for_each(|(pi, s)| *pi += s);
                p
            }
            ConvexSet::Product { blocks } => {
                let mut out = Vec::with_capacity(x.len());
                let mut at = 0;
                for b in blocks {
                    let d = b.dim();
                    out.extend(b.project_unchecked(&x[at..at + d]));
                    at += d;
                }
                out
            }
        }
    }

    /// Projects a product vector; the set must be a product over its blocks
    /// (or any set of matching flat dimension).
    pub fn project_product(&self, x: &ProductVector) -> Result<ProductVector> {
        let p = self.project(x.as_slice())?;
        ProductVector::from_flat(x.m(), x.n(), p)
    }

    /// Support function `sup_{c ∈ C} ⟨c, t⟩` with the default cone tolerance.
    pub fn support(&self, t: &[f64]) -> Result<ExtendedReal> {
        self.support_with(t, Tolerances::default().cone)
    }

    /// Support function where the recession-cone test of unbounded kinds
    /// accepts `t` within relative distance `cone_tol` of the dual cone.
    pub fn support_with(&self, t: &[f64], cone_tol: f64) -> Result<ExtendedReal> {
        check_len(self.dim(), t.len())?;
        Ok(self.support_unchecked(t, cone_tol))
    }

    fn support_unchecked(&self, t: &[f64], cone_tol: f64) -> ExtendedReal {
        use ExtendedReal::{Finite, PosInf};
        match self {
            ConvexSet::Ball { center, radius } => Finite(dot(center, t) + radius * norm2(t)),
            ConvexSet::Box { lower, upper } => Finite(
                t.iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(ti, (lo, hi))| (lo * ti).max(hi * ti))
                    .sum(),
            ),
            ConvexSet::Halfspace {
                normal,
                offset,
                normal_sq,
            } => match normal_multiple(normal, *normal_sq, t, cone_tol) {
                Some(lambda) if lambda * normal_sq.sqrt() >= -cone_tol * norm2(t) => {
                    Finite(lambda.max(0.0) * offset)
                }
                _ => PosInf,
            },
            ConvexSet::Hyperplane {
                normal,
                offset,
                normal_sq,
            } => match normal_multiple(normal, *normal_sq, t, cone_tol) {
                Some(lambda) => Finite(lambda * offset),
                None => PosInf,
            },
            ConvexSet::Affine { origin, basis } => {
                let along: f64 = basis.iter().map(|q| dot(q, t).powi(2)).sum::<f64>().sqrt();
                if along <= cone_tol * norm2(t) {
                    Finite(dot(origin, t))
                } else {
                    PosInf
                }
            }
            ConvexSet::Singleton { point } => Finite(dot(point, t)),
            ConvexSet::Simplex { .. } => {
                Finite(t.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            }
            ConvexSet::Translate { inner, shift } => {
                inner.support_unchecked(t, cone_tol) + dot(shift, t)
            }
            ConvexSet::Product { blocks } => {
                let mut total = Finite(0.0);
                let mut at = 0;
                for b in blocks {
                    let d = b.dim();
                    total = total + b.support_unchecked(&t[at..at + d], cone_tol);
                    at += d;
                }
                total
            }
        }
    }

    /// A maximizer of `⟨·, t⟩` over the set, when the supremum is finite.
    pub fn support_point(&self, t: &[f64]) -> Result<Option<Vec<f64>>> {
        self.support_point_with(t, Tolerances::default().cone)
    }

    pub fn support_point_with(&self, t: &[f64], cone_tol: f64) -> Result<Option<Vec<f64>>> {
        check_len(self.dim(), t.len())?;
        Ok(self.support_point_unchecked(t, cone_tol))
    }

    fn support_point_unchecked(&self, t: &[f64], cone_tol: f64) -> Option<Vec<f64>> {
        match self {
            ConvexSet::Ball { center, radius } => {
                let nt = norm2(t);
                if nt == 0.0 {
                    return Some(center.clone());
                }
                Some(
                    center
                        .iter()
                        .zip(t)
                        .map(|(c, ti)| c + radius * ti / nt)
                        .collect(),
                )
            }
            ConvexSet::Box { lower, upper } => Some(
                t.iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(ti, (lo, hi))| if *ti > 0.0 { *hi } else { *lo })
                    .collect(),
            ),
            ConvexSet::Halfspace {
                normal,
                offset,
                normal_sq,
            } => {
                if !self.support_unchecked(t, cone_tol).is_finite() {
                    return None;
                }
                let lambda = dot(normal, t) / normal_sq;
                if lambda > 0.0 {
                    Some(normal.iter().map(|a| offset * a / normal_sq).collect())
                } else {
                    Some(self.project_unchecked(&vec![0.0; t.len()]))
                }
            }
            ConvexSet::Hyperplane {
                normal,
                offset,
                normal_sq,
            } => self
                .support_unchecked(t, cone_tol)
                .is_finite()
                .then(|| normal.iter().map(|a| offset * a / normal_sq).collect()),
            ConvexSet::Affine { origin, .. } => self
                .support_unchecked(t, cone_tol)
                .is_finite()
                .then(|| origin.clone()),
            ConvexSet::Singleton { point } => Some(point.clone()),
            ConvexSet::Simplex { dim } => {
                // first index attaining the maximum
                let mut best = 0;
                for i in 1..*dim {
                    if t[i] > t[best] {
                        best = i;
                    }
                }
                let mut e = vec![0.0; *dim];
                e[best] = 1.0;
                Some(e)
            }
            ConvexSet::Translate { inner, shift } => {
                let mut p = inner.support_point_unchecked(t, cone_tol)?;
                p.iter_mut().zip(shift).for_each(|(pi, s)| *pi += s);
                Some(p)
            }
            ConvexSet::Product { blocks } => {
                let mut out = Vec::with_capacity(t.len());
                let mut at = 0;
                for b in blocks {
                    let d = b.dim();
                    out.extend(b.support_point_unchecked(&t[at..at + d], cone_tol)?);
                    at += d;
                }
                Some(out)
            }
        }
    }

    /// Distance from `x` to the set.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        let p = self.project(x)?;
        Ok(dist(x, &p))
    }

    /// `dist(x, C) ≤ tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        if tol < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "membership tolerance must be nonnegative, got {tol}"
            )));
        }
        Ok(self.distance(x)? <= tol)
    }

    /// `k` deterministic points of the set.
    pub fn sample_points(&self, k: usize, seed: u64) -> Vec<Vec<f64>> {
        self.sample_points_within(k, seed, DEFAULT_SAMPLE_RADIUS)
    }

    /// As [`sample_points`](Self::sample_points); unbounded kinds are sampled
    /// within `radius` of the projection of the origin.
    pub fn sample_points_within(&self, k: usize, seed: u64, radius: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k).map(|_| self.sample_one(&mut rng, radius)).collect()
    }

    pub(crate) fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R, radius: f64) -> Vec<f64> {
        match self {
            ConvexSet::Ball { center, radius: r } => {
                let dir = random_direction(rng, center.len());
                let scale = if rng.random_bool(0.25) {
                    *r
                } else {
                    r * rng.random::<f64>().powf(1.0 / center.len() as f64)
                };
                center
                    .iter()
                    .zip(&dir)
                    .map(|(c, u)| c + scale * u)
                    .collect()
            }
            ConvexSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| match rng.random_range(0..8) {
                    0 => *lo,
                    1 => *hi,
                    _ => lo + (hi - lo) * rng.random::<f64>(),
                })
                .collect(),
            ConvexSet::Singleton { point } => point.clone(),
            ConvexSet::Simplex { dim } => {
                if rng.random_bool(0.2) {
                    let mut e = vec![0.0; *dim];
                    e[rng.random_range(0..*dim)] = 1.0;
                    e
                } else {
                    let w: Vec<f64> = (0..*dim)
                        .map(|_| -(1.0 - rng.random::<f64>()).ln())
                        .collect();
                    let s: f64 = w.iter().sum();
                    w.into_iter().map(|x| x / s).collect()
                }
            }
            ConvexSet::Halfspace { .. }
            | ConvexSet::Hyperplane { .. }
            | ConvexSet::Affine { .. } => {
                let n = self.dim();
                let anchor = self.project_unchecked(&vec![0.0; n]);
                let dir = random_direction(rng, n);
                let scale = radius * rng.random::<f64>().powf(1.0 / n as f64);
                let y: Vec<f64> = anchor
                    .iter()
                    .zip(&dir)
                    .map(|(a, u)| a + scale * u)
                    .collect();
                self.project_unchecked(&y)
            }
            ConvexSet::Translate { inner, shift } => {
                let mut p = inner.sample_one(rng, radius);
                p.iter_mut().zip(shift).for_each(|(pi, s)| *pi += s);
                p
            }
            ConvexSet::Product { blocks } => blocks
                .iter()
                .flat_map(|b| b.sample_one(rng, radius))
                .collect(),
        }
    }
}

/// `Some(λ)` when `t` lies within relative distance `cone_tol` of the line
/// spanned by `normal`, where `λ·normal` is the nearest point of that line.
fn normal_multiple(normal: &[f64], normal_sq: f64, t: &[f64], cone_tol: f64) -> Option<f64> {
    let lambda = dot(normal, t) / normal_sq;
    let resid = t
        .iter()
        .zip(normal)
        .map(|(ti, a)| (ti - lambda * a).powi(2))
        .sum::<f64>()
        .sqrt();
    (resid <= cone_tol * norm2(t)).then_some(lambda)
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let nrm = norm2(&g);
        if nrm > 1e-12 {
            return g.into_iter().map(|x| x / nrm).collect();
        }
    }
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}` by sorting.
fn project_simplex(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    // descending by value, ties by coordinate index
    order.sort_by(|&i, &j| x[j].total_cmp(&x[i]).then(i.cmp(&j)));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cumsum += x[i];
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if x[i] - candidate > 0.0 {
            theta = candidate;
        }
    }
    x.iter().map(|xi| (xi - theta).max(0.0)).collect()
}

/// Serialized form of a [`ConvexSet`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
    Hyperplane {
        normal: Vec<f64>,
        offset: f64,
    },
    Affine {
        point: Vec<f64>,
        #[serde(default)]
        basis: Vec<Vec<f64>>,
    },
    Singleton {
        point: Vec<f64>,
    },
    Simplex {
        dim: usize,
    },
    Translate {
        inner: Box<SetSpec>,
        shift: Vec<f64>,
    },
    Product {
        blocks: Vec<SetSpec>,
    },
}

impl TryFrom<SetSpec> for ConvexSet {
    type Error = Error;

    fn try_from(spec: SetSpec) -> Result<Self> {
        match spec {
            SetSpec::Ball { center, radius } => ConvexSet::ball(center, radius),
            SetSpec::Box { lower, upper } => ConvexSet::boxed(lower, upper),
            SetSpec::Halfspace { normal, offset } => ConvexSet::halfspace(normal, offset),
            SetSpec::Hyperplane { normal, offset } => ConvexSet::hyperplane(normal, offset),
            SetSpec::Affine { point, basis } => ConvexSet::affine(point, basis),
            SetSpec::Singleton { point } => ConvexSet::singleton(point),
            SetSpec::Simplex { dim } => ConvexSet::simplex(dim),
            SetSpec::Translate { inner, shift } => {
                ConvexSet::translate(ConvexSet::try_from(*inner)?, shift)
            }
            SetSpec::Product { blocks } => ConvexSet::product(
                blocks
                    .into_iter()
                    .map(ConvexSet::try_from)
                    .collect::<Result<_>>()?,
            ),
        }
    }
}

impl From<ConvexSet> for SetSpec {
    fn from(set: ConvexSet) -> Self {
        match set {
            ConvexSet::Ball { center, radius } => SetSpec::Ball { center, radius },
            ConvexSet::Box { lower, upper } => SetSpec::Box { lower, upper },
            ConvexSet::Halfspace { normal, offset, .. } => SetSpec::Halfspace { normal, offset },
            ConvexSet::Hyperplane { normal, offset, .. } => SetSpec::Hyperplane { normal, offset },
            ConvexSet::Affine { origin, basis } => SetSpec::Affine {
                point: origin,
                basis,
            },
            ConvexSet::Singleton { point } => SetSpec::Singleton { point },
            ConvexSet::Simplex { dim } => SetSpec::Simplex { dim },
            ConvexSet::Translate { inner, shift } => SetSpec::Translate {
                inner: Box::new((*inner).into()),
                shift,
            },
            ConvexSet::Product { blocks } => SetSpec::Product {
                blocks: blocks.into_iter().map(Into::into).collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_disc() -> ConvexSet {
        ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap()
    }

    fn unit_square() -> ConvexSet {
        ConvexSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    fn two_intervals() -> ConvexSet {
        ConvexSet::product(vec![
            ConvexSet::interval(-1.0, 1.0).unwrap(),
            ConvexSet::interval(3.0, 5.0).unwrap(),
        ])
        .unwrap()
    }

    fn close(a: &[f64], b: &[f64], eps: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert_abs_diff_eq!(x, y, epsilon = eps);
        }
    }

    #[test]
    fn project_examples() {
        close(
            &unit_disc().project(&[3.0, 4.0]).unwrap(),
            &[0.6, 0.8],
            1e-15,
        );
        assert_eq!(unit_square().project(&[2.0, -1.0]).unwrap(), vec![1.0, 0.0]);
        let h = ConvexSet::halfspace(vec![0.0, 1.0], 0.0).unwrap();
        assert_eq!(h.project(&[1.0, 2.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(
            two_intervals().project(&[7.0, 0.0]).unwrap(),
            vec![1.0, 3.0]
        );
    }

    #[test]
    fn project_rejects_shape_mismatch() {
        assert!(matches!(
            unit_disc().project(&[1.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn support_examples() {
        assert_eq!(
            unit_disc().support(&[3.0, 4.0]).unwrap(),
            ExtendedReal::Finite(5.0)
        );
        let h = ConvexSet::halfspace(vec![0.0, 1.0], 2.0).unwrap();
        assert_eq!(h.support(&[1.0, 0.0]).unwrap(), ExtendedReal::PosInf);
        assert_eq!(
            unit_square().support(&[1.0, -2.0]).unwrap(),
            ExtendedReal::Finite(1.0)
        );
        assert_eq!(
            two_intervals().support(&[2.0, -2.0]).unwrap(),
            ExtendedReal::Finite(-4.0)
        );
    }

    #[test]
    fn halfspace_support_along_normal() {
        let h = ConvexSet::halfspace(vec![0.0, 2.0], 4.0).unwrap();
        // set is {y ≤ 2}; σ((0,3)) = 6
        assert_eq!(h.support(&[0.0, 3.0]).unwrap(), ExtendedReal::Finite(6.0));
        assert_eq!(h.support(&[0.0, -3.0]).unwrap(), ExtendedReal::PosInf);
        assert_eq!(h.support(&[0.0, 0.0]).unwrap(), ExtendedReal::Finite(0.0));
        // just off the ray: rejected by the default cone tolerance,
        // accepted by a looser one
        let t = [1e-8, 3.0];
        assert_eq!(h.support(&t).unwrap(), ExtendedReal::PosInf);
        assert!(h.support_with(&t, 1e-6).unwrap().is_finite());
    }

    #[test]
    fn hyperplane_support_both_directions() {
        let p = ConvexSet::hyperplane(vec![1.0, 1.0], 2.0).unwrap();
        assert_eq!(p.support(&[2.0, 2.0]).unwrap(), ExtendedReal::Finite(4.0));
        assert_eq!(
            p.support(&[-1.0, -1.0]).unwrap(),
            ExtendedReal::Finite(-2.0)
        );
        assert_eq!(p.support(&[1.0, 0.0]).unwrap(), ExtendedReal::PosInf);
    }

    #[test]
    fn affine_set_is_orthonormalized() {
        // the line y = 2 in R^2, given by a non-unit direction
        let a = ConvexSet::affine(vec![5.0, 2.0], vec![vec![3.0, 0.0], vec![-6.0, 0.0]]).unwrap();
        let ConvexSet::Affine { origin, basis } = &a else {
            unreachable!()
        };
        assert_eq!(basis.len(), 1);
        close(origin, &[0.0, 2.0], 1e-15);
        close(&a.project(&[7.0, -1.0]).unwrap(), &[7.0, 2.0], 1e-14);
        assert_eq!(a.support(&[0.0, 3.0]).unwrap(), ExtendedReal::Finite(6.0));
        assert_eq!(a.support(&[1.0, 3.0]).unwrap(), ExtendedReal::PosInf);
    }

    #[test]
    fn support_point_examples() {
        close(
            &unit_disc().support_point(&[0.0, 2.0]).unwrap().unwrap(),
            &[0.0, 1.0],
            1e-15,
        );
        let h = ConvexSet::halfspace(vec![0.0, 1.0], 2.0).unwrap();
        assert_eq!(h.support_point(&[1.0, 0.0]).unwrap(), None);
        assert_eq!(
            unit_square().support_point(&[1.0, -2.0]).unwrap(),
            Some(vec![1.0, 0.0])
        );
    }

    #[test]
    fn contains_examples() {
        assert!(unit_disc().contains(&[1.0, 0.0], 0.0).unwrap());
        assert!(!unit_square().contains(&[1.000001, 0.0], 1e-9).unwrap());
        let t = ConvexSet::translate(ConvexSet::interval(-1.0, 1.0).unwrap(), vec![2.0]).unwrap();
        assert!(t.contains(&[3.0], 0.0).unwrap());
        assert!(!t.contains(&[0.5], 0.1).unwrap());
        assert!(unit_disc().contains(&[0.0, 0.0], -1.0).is_err());
    }

    #[test]
    fn sample_points_examples() {
        let p = ConvexSet::singleton(vec![1.5, -2.0]).unwrap();
        assert_eq!(p.sample_points(3, 1), vec![vec![1.5, -2.0]; 3]);

        let iv = ConvexSet::interval(0.0, 1.0).unwrap();
        let pts = iv.sample_points(2, 7);
        assert_eq!(pts.len(), 2);
        assert!(pts.iter().all(|x| (0.0..=1.0).contains(&x[0])));
        assert_eq!(pts, iv.sample_points(2, 7));

        let pts = unit_disc().sample_points(5, 3);
        assert_eq!(pts.len(), 5);
        assert!(pts.iter().all(|x| norm2(x) <= 1.0 + 1e-15));
    }

    #[test]
    fn unbounded_samples_stay_near_anchor() {
        let h = ConvexSet::halfspace(vec![1.0, 1.0], -4.0).unwrap();
        let anchor = h.project(&[0.0, 0.0]).unwrap();
        for x in h.sample_points_within(50, 11, 2.0) {
            assert!(h.contains(&x, 1e-9).unwrap());
            assert!(dist(&x, &anchor) <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn simplex_projection_cases() {
        let s = ConvexSet::simplex(3).unwrap();
        close(
            &s.project(&[0.2, 0.3, 0.5]).unwrap(),
            &[0.2, 0.3, 0.5],
            1e-15,
        );
        close(
            &s.project(&[2.0, 0.0, 0.0]).unwrap(),
            &[1.0, 0.0, 0.0],
            1e-15,
        );
        close(
            &s.project(&[1.0, 1.0, 1.0]).unwrap(),
            &[1.0 / 3.0; 3],
            1e-15,
        );
        close(
            &s.project(&[0.0, 0.0, 0.0]).unwrap(),
            &[1.0 / 3.0; 3],
            1e-15,
        );
        assert_eq!(
            s.support(&[1.0, 3.0, 3.0]).unwrap(),
            ExtendedReal::Finite(3.0)
        );
        // ties resolve to the first index
        assert_eq!(
            s.support_point(&[1.0, 3.0, 3.0]).unwrap(),
            Some(vec![0.0, 1.0, 0.0])
        );
        assert!(ConvexSet::simplex(0).is_err());
    }

    #[test]
    fn constructors_enforce_nonempty() {
        assert!(ConvexSet::ball(vec![0.0], 0.0).is_err());
        assert!(ConvexSet::ball(vec![0.0], -1.0).is_err());
        assert!(ConvexSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(ConvexSet::halfspace(vec![0.0, 0.0], 1.0).is_err());
        assert!(ConvexSet::product(vec![]).is_err());
        assert!(
            ConvexSet::product(vec![ConvexSet::interval(0.0, 1.0).unwrap(), unit_disc()]).is_err()
        );
    }

    #[test]
    fn extended_real_arithmetic() {
        use ExtendedReal::*;
        assert_eq!(Finite(1.0) + Finite(2.0), Finite(3.0));
        assert_eq!(Finite(1.0) + PosInf, PosInf);
        assert!(Finite(1e300) < PosInf);
        assert!(!PosInf.le(f64::MAX));
        assert!(Finite(-1.0).le(0.0));
    }

    #[test]
    fn spec_round_trip_through_json() {
        let json =
            r#"{"kind":"translate","inner":{"kind":"box","lower":[-1],"upper":[1]},"shift":[2]}"#;
        let set: ConvexSet = serde_json::from_str(json).unwrap();
        assert!(set.contains(&[3.0], 0.0).unwrap());
        let back = serde_json::to_string(&set).unwrap();
        let again: ConvexSet = serde_json::from_str(&back).unwrap();
        assert_eq!(set, again);

        let bad = r#"{"kind":"box","lower":[2],"upper":[1]}"#;
        let err = serde_json::from_str::<ConvexSet>(bad).unwrap_err();
        assert!(err.to_string().contains("lower[0]"));
    }
}
