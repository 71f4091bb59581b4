//! Random sets and independent oracles shared by the integration tests.
#![allow(dead_code)]

use cyclegap::ConvexSet;
use rand::Rng;
use rand_distr::StandardNormal;

pub const KINDS: [&str; 9] = [
    "ball",
    "box",
    "halfspace",
    "hyperplane",
    "affine",
    "singleton",
    "simplex",
    "translate",
    "product",
];

pub fn gaussian<R: Rng>(n: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn nonzero<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v = gaussian(n, 1.0, rng);
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-4 {
            return v;
        }
    }
}

fn random_box<R: Rng>(n: usize, rng: &mut R) -> ConvexSet {
    let lo = gaussian(n, 3.0, rng);
    let hi = lo.iter().map(|l| l + rng.random_range(0.0..4.0)).collect();
    ConvexSet::boxed(lo, hi).unwrap()
}

/// A random nonempty set of the given kind in `R^n`.
pub fn random_set<R: Rng>(kind: &str, n: usize, rng: &mut R) -> ConvexSet {
    match kind {
        "ball" => ConvexSet::ball(gaussian(n, 3.0, rng), rng.random_range(0.1..4.0)).unwrap(),
        "box" => random_box(n, rng),
        "halfspace" => ConvexSet::halfspace(nonzero(n, rng), rng.random_range(-5.0..5.0)).unwrap(),
        "hyperplane" => {
            ConvexSet::hyperplane(nonzero(n, rng), rng.random_range(-5.0..5.0)).unwrap()
        }
        "affine" => {
            let k = rng.random_range(0..n);
            let dirs = (0..k).map(|_| nonzero(n, rng)).collect();
            ConvexSet::affine(gaussian(n, 3.0, rng), dirs).unwrap()
        }
        "singleton" => ConvexSet::singleton(gaussian(n, 3.0, rng)).unwrap(),
        "simplex" => ConvexSet::simplex(n).unwrap(),
        "translate" => ConvexSet::translate(random_box(n, rng), gaussian(n, 3.0, rng)).unwrap(),
        "product" => {
            // factors share a dimension: two halves when n is even, else n lines
            let (k, d) = if n.is_multiple_of(2) {
                (2, n / 2)
            } else {
                (n, 1)
            };
            let blocks = (0..k)
                .map(|_| random_set(KINDS[rng.random_range(0..7)], d, rng))
                .collect();
            ConvexSet::product(blocks).unwrap()
        }
        other => panic!("unknown kind {other}"),
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Projection onto the probability simplex by bisection on the threshold
/// `τ` solving `Σ max(x_i - τ, 0) = 1`.
pub fn simplex_oracle(x: &[f64]) -> Vec<f64> {
    let mass = |tau: f64| x.iter().map(|xi| (xi - tau).max(0.0)).sum::<f64>();
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (max - 1.0, max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    x.iter().map(|xi| (xi - tau).max(0.0)).collect()
}

/// Violations of idempotence, nonexpansiveness and the variational
/// inequality `⟨x - Px, c - Px⟩ ≤ 0` at `x`, `y` and the points `cs` of the set.
pub fn projection_violations(set: &ConvexSet, x: &[f64], y: &[f64], cs: &[Vec<f64>]) -> [f64; 3] {
    let px = set.project(x).unwrap();
    let py = set.project(y).unwrap();
    let idem = dist(&set.project(&px).unwrap(), &px);
    let nonexp = (dist(&px, &py) - dist(x, y)).max(0.0);
    let r: Vec<f64> = x.iter().zip(&px).map(|(a, b)| a - b).collect();
    let vi = cs
        .iter()
        .map(|c| {
            let w: Vec<f64> = c.iter().zip(&px).map(|(a, b)| a - b).collect();
            dot(&r, &w).max(0.0)
        })
        .fold(0.0, f64::max);
    [idem, nonexp, vi]
}
