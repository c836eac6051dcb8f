//! Seeded k-means: k-means++ seeding, Lloyd iterations, then Hartigan
//! single-point transfers to leave Lloyd fixed points that are not optimal.
//!
//! Ties are broken toward the lowest index everywhere so results depend only
//! on `(points, k, seed)`. An empty cluster is re-seeded at the point lying
//! farthest from its current center. Several seeded restarts are run and the
//! lowest-inertia result is kept.

use rand::Rng;

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::numcore::squared_distance;
use crate::{seeding, Vector};

pub const DEFAULT_RESTARTS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct KmeansResult {
    pub centers: Vec<Vector>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    pub iterations: usize,
    /// Cluster count actually used (`k` clamped to the number of points).
    pub k: usize,
    /// Inertia after each assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

/// Index of the nearest center and the squared distance to it.
pub fn nearest_center(point: &[f64], centers: &[Vector]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn assign(points: &[Vector], centers: &[Vector]) -> (Vec<usize>, Vec<f64>) {
    points.iter().map(|p| nearest_center(p, centers)).unzip()
}

fn plus_plus_init<R: Rng + ?Sized>(points: &[Vector], k: usize, rng: &mut R) -> Vec<Vector> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 && target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            // every point coincides with a center already
            rng.random_range(0..points.len())
        };
        centers.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, centers.last().unwrap()));
        }
    }
    centers
}

fn lloyd<R: Rng + ?Sized>(points: &[Vector], k: usize, max_iter: usize, tol: f64, rng: &mut R) -> KmeansResult {
    let dim = points[0].len();
    let mut centers = plus_plus_init(points, k, rng);
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let (assignments, d2) = assign(points, &centers);
        history.push(d2.iter().sum());

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut next: Vec<Vector> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centers)
            .map(|((s, &n), old)| {
                if n == 0 {
                    old.clone()
                } else {
                    s.into_iter().map(|v| v / n as f64).collect()
                }
            })
            .collect();
        let mut taken = vec![false; points.len()];
        for c in 0..k {
            if counts[c] == 0 {
                // farthest point from its own center, lowest index on ties
                let mut far = (usize::MAX, -1.0);
                for (i, d) in d2.iter().enumerate() {
                    if !taken[i] && *d > far.1 {
                        far = (i, *d);
                    }
                }
                if far.0 != usize::MAX {
                    taken[far.0] = true;
                    next[c] = points[far.0].clone();
                }
            }
        }
        let shift = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = next;
        if shift < tol {
            break;
        }
    }
    let (mut assignments, _) = assign(points, &centers);
    centers = means(points, &assignments, &centers);
    // Hartigan transfers, then a nearest-center pass, until neither moves a point
    while hartigan(points, &mut assignments, &mut centers) {
        centers = means(points, &assignments, &centers);
        let (next, _) = assign(points, &centers);
        if next == assignments {
            break;
        }
        assignments = next;
        centers = means(points, &assignments, &centers);
    }
    let (assignments, d2) = assign(points, &centers);
    let inertia = d2.iter().sum();
    history.push(inertia);
    KmeansResult {
        centers,
        assignments,
        inertia,
        iterations,
        k,
        inertia_history: history,
    }
}

/// Cluster means; a cluster left without members keeps its old center.
fn means(points: &[Vector], assignments: &[usize], old: &[Vector]) -> Vec<Vector> {
    let mut sums = vec![vec![0.0; points[0].len()]; old.len()];
    let mut counts = vec![0usize; old.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(&counts)
        .zip(old)
        .map(|((s, &n), c)| if n == 0 { c.clone() } else { s.into_iter().map(|v| v / n as f64).collect() })
        .collect()
}

/// Single-point transfers that lower the inertia once both means are
/// updated. Lloyd fixed points can still admit such moves. Returns whether
/// any point moved.
fn hartigan(points: &[Vector], assignments: &mut [usize], centers: &mut [Vector]) -> bool {
    let k = centers.len();
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let from = assignments[i];
            let n_from = counts[from] as f64;
            if counts[from] < 2 {
                continue;
            }
            let removal = n_from / (n_from - 1.0) * squared_distance(p, &centers[from]);
            let mut best = (from, 0.0);
            for to in (0..k).filter(|&c| c != from) {
                let n_to = counts[to] as f64;
                let delta = n_to / (n_to + 1.0) * squared_distance(p, &centers[to]) - removal;
                // relative slack keeps float noise from cycling
                if delta < best.1 - 1e-12 * (1.0 + removal) {
                    best = (to, delta);
                }
            }
            let to = best.0;
            if to == from {
                continue;
            }
            let (nf, nt) = (n_from, counts[to] as f64);
            for d in 0..p.len() {
                centers[from][d] = (centers[from][d] * nf - p[d]) / (nf - 1.0);
                centers[to][d] = (centers[to][d] * nt + p[d]) / (nt + 1.0);
            }
            counts[from] -= 1;
            counts[to] += 1;
            assignments[i] = to;
            moved = true;
            moved_any = true;
        }
        if !moved {
            return moved_any;
        }
    }
}

/// k-means with [`DEFAULT_RESTARTS`] seeded restarts.
pub fn kmeans(points: &[Vector], k: usize, seed: u64, max_iter: usize, tol: f64) -> Result<KmeansResult> {
    kmeans_with_restarts(points, k, seed, max_iter, tol, DEFAULT_RESTARTS)
}

pub fn kmeans_with_restarts(
    points: &[Vector],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
    restarts: usize,
) -> Result<KmeansResult> {
    if points.is_empty() {
        return Err(Error::Empty("k-means input"));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let dim = points[0].len();
    for p in points {
        ensure_dim("k-means point", dim, p.len())?;
        ensure_finite("k-means point", p)?;
    }
    let k = k.min(points.len());
    let mut best: Option<KmeansResult> = None;
    for r in 0..restarts.max(1) {
        let mut rng = seeding::rng(seeding::mix(seed, r as u64));
        let result = lloyd(points, k, max_iter.max(1), tol, &mut rng);
        if best.as_ref().is_none_or(|b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}
