//! Location clustering of the active executers: Lloyd's k-means over exact
//! rational coordinates with uniformly random initial centroids.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exact::{self, Rational};
use crate::model::AgentId;

/// Default cap on assignment passes.
pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point2D {
    #[serde(with = "exact::serde_rational")]
    pub x: Rational,
    #[serde(with = "exact::serde_rational")]
    pub y: Rational,
}

impl Point2D {
    pub fn new(x: Rational, y: Rational) -> Self {
        Point2D { x, y }
    }

    pub fn from_ints(x: i64, y: i64) -> Self {
        Point2D::new(Rational::from_integer(x as i128), Rational::from_integer(y as i128))
    }

    /// Squared Euclidean distance. Argmin over it equals argmin over the
    /// true distance and stays rational.
    pub fn dist2(&self, other: &Point2D) -> Rational {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClusterSet {
    /// `clusters[j]` lists the executers assigned to centroid `j`. May be empty.
    pub clusters: Vec<Vec<AgentId>>,
    pub centroids: Vec<Point2D>,
    /// Assignment passes that changed the partition.
    pub iterations: usize,
    /// False when `max_iters` cut the loop short.
    pub converged: bool,
}

impl ClusterSet {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn empty() -> Self {
        ClusterSet { clusters: Vec::new(), centroids: Vec::new(), iterations: 0, converged: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClusteringError {
    #[error("cannot pick {k} initial centroids from {distinct} distinct points")]
    TooFewDistinctPoints { k: usize, distinct: usize },
}

/// One assignment pass, kept for inspecting convergence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pass {
    pub labels: Vec<usize>,
    pub centroids: Vec<Point2D>,
    /// Sum of squared distances to the assigned centroid.
    pub objective: Rational,
}

fn distinct_points(points: &[Point2D]) -> Vec<Point2D> {
    let mut seen = std::collections::HashSet::new();
    points.iter().copied().filter(|p| seen.insert(*p)).collect()
}

/// Samples `k` centroids uniformly without replacement from the distinct
/// points (first-occurrence order, partial Fisher-Yates).
pub fn kmeans_init<R: Rng + ?Sized>(
    points: &[Point2D],
    k: usize,
    rng: &mut R,
) -> Result<Vec<Point2D>, ClusteringError> {
    let mut pool = distinct_points(points);
    if k > pool.len() {
        return Err(ClusteringError::TooFewDistinctPoints { k, distinct: pool.len() });
    }
    for i in 0..k {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    Ok(pool)
}

/// Index of the nearest centroid; the lowest index wins ties.
fn nearest(point: &Point2D, centroids: &[Point2D]) -> (usize, Rational) {
    let mut best = (0, point.dist2(&centroids[0]));
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = point.dist2(c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn labels_for(executers: &[(AgentId, Point2D)], centroids: &[Point2D]) -> (Vec<usize>, Rational) {
    let mut objective = Rational::from_integer(0);
    let labels = executers
        .iter()
        .map(|(_, p)| {
            let (j, d) = nearest(p, centroids);
            objective += d;
            j
        })
        .collect();
    (labels, objective)
}

fn group(executers: &[(AgentId, Point2D)], labels: &[usize], k: usize) -> Vec<Vec<AgentId>> {
    let mut clusters = vec![Vec::new(); k];
    for ((id, _), &j) in executers.iter().zip(labels) {
        clusters[j].push(*id);
    }
    clusters
}

/// Assigns every executer to its nearest centroid.
///
/// # Panics
/// If `centroids` is empty.
pub fn assign_points(executers: &[(AgentId, Point2D)], centroids: &[Point2D]) -> ClusterSet {
    assert!(!centroids.is_empty(), "assign_points needs at least one centroid");
    let (labels, _) = labels_for(executers, centroids);
    ClusterSet {
        clusters: group(executers, &labels, centroids.len()),
        centroids: centroids.to_vec(),
        iterations: 0,
        converged: false,
    }
}

/// Coordinate-wise mean of each cluster. An empty cluster keeps the
/// centroid it had in `cluster_set`.
pub fn recompute_centroids(
    cluster_set: &ClusterSet,
    positions: &HashMap<AgentId, Point2D>,
) -> Vec<Point2D> {
    cluster_set
        .clusters
        .iter()
        .zip(&cluster_set.centroids)
        .map(|(members, previous)| {
            if members.is_empty() {
                return *previous;
            }
            let n = Rational::from_integer(members.len() as i128);
            let (sx, sy) = members.iter().fold(
                (Rational::from_integer(0), Rational::from_integer(0)),
                |(sx, sy), id| {
                    let p = positions[id];
                    (sx + p.x, sy + p.y)
                },
            );
            Point2D::new(sx / n, sy / n)
        })
        .collect()
}

fn means(executers: &[(AgentId, Point2D)], labels: &[usize], previous: &[Point2D]) -> Vec<Point2D> {
    let zero = Rational::from_integer(0);
    let mut sums = vec![(zero, zero, 0i128); previous.len()];
    for ((_, p), &j) in executers.iter().zip(labels) {
        sums[j].0 += p.x;
        sums[j].1 += p.y;
        sums[j].2 += 1;
    }
    sums.iter()
        .zip(previous)
        .map(|(&(sx, sy, n), prev)| {
            if n == 0 {
                *prev
            } else {
                let n = Rational::from_integer(n);
                Point2D::new(sx / n, sy / n)
            }
        })
        .collect()
}

/// Runs k-means to a fixpoint of the partition (or `max_iters` passes).
/// `k` is clamped to the number of distinct locations.
pub fn cluster_formation<R: Rng + ?Sized>(
    executers: &[(AgentId, Point2D)],
    k: usize,
    rng: &mut R,
    max_iters: usize,
) -> ClusterSet {
    cluster_formation_traced(executers, k, rng, max_iters).0
}

/// [`cluster_formation`] plus the sequence of assignment passes.
pub fn cluster_formation_traced<R: Rng + ?Sized>(
    executers: &[(AgentId, Point2D)],
    k: usize,
    rng: &mut R,
    max_iters: usize,
) -> (ClusterSet, Vec<Pass>) {
    if executers.is_empty() {
        return (ClusterSet::empty(), Vec::new());
    }
    let points: Vec<Point2D> = executers.iter().map(|(_, p)| *p).collect();
    let k = k.clamp(1, distinct_points(&points).len());
    let max_iters = max_iters.max(1);
    let mut centroids = kmeans_init(&points, k, rng).expect("k clamped to distinct points");

    let mut trace: Vec<Pass> = Vec::new();
    let mut converged = false;
    while trace.len() < max_iters {
        let (labels, objective) = labels_for(executers, &centroids);
        let unchanged = trace.last().is_some_and(|prev| prev.labels == labels);
        trace.push(Pass { labels, centroids: centroids.clone(), objective });
        if unchanged {
            converged = true;
            break;
        }
        let last = trace.last().expect("just pushed");
        centroids = means(executers, &last.labels, &centroids);
    }

    let last = trace.last().expect("at least one pass");
    let iterations = if converged { trace.len() - 1 } else { trace.len() };
    let set = ClusterSet {
        clusters: group(executers, &last.labels, k),
        centroids,
        iterations,
        converged,
    };
    (set, trace)
}
