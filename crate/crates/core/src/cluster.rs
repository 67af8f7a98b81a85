//! K-means over face embeddings, used to bootstrap a labeled gallery: the
//! members of each cluster are listed nearest-first so a person can label
//! whole clusters at once.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams {
            k,
            seed,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMember {
    pub index: usize,
    /// Euclidean distance to the cluster centroid.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterReport {
    /// Cluster of each input vector.
    pub assignments: Vec<usize>,
    /// Members of each cluster, nearest to the centroid first.
    pub clusters: Vec<Vec<ClusterMember>>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squares after every assignment step.
    pub sse_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// One line of the cluster report file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterRecord<'a> {
    pub cluster_id: usize,
    pub sample_id: &'a str,
    pub distance: f64,
}

impl ClusterReport {
    pub fn sse(&self) -> f64 {
        self.clusters
            .iter()
            .flatten()
            .map(|m| m.distance * m.distance)
            .sum()
    }

    /// Report lines in cluster order, `sample_ids[i]` naming input vector `i`.
    pub fn records<'a>(&self, sample_ids: &[&'a str]) -> Vec<ClusterRecord<'a>> {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(cluster_id, members)| {
                members.iter().map(move |m| ClusterRecord {
                    cluster_id,
                    sample_id: sample_ids[m.index],
                    distance: m.distance,
                })
            })
            .collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid per point (ties to the lowest centroid index) and its squared distance.
fn assign(points: &[&[f64]], centroids: &[Vec<f64>]) -> Vec<(usize, f64)> {
    points
        .par_iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let d = sq_dist(p, centroid);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect()
}

fn update(points: &[&[f64]], assignments: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &c) in points.iter().zip(assignments) {
        counts[c] += 1;
        sums[c].iter_mut().zip(p.iter()).for_each(|(s, x)| *s += x);
    }
    for ((centroid, sum), count) in centroids.iter_mut().zip(sums).zip(counts) {
        // An emptied cluster keeps its previous centroid.
        if count > 0 {
            *centroid = sum.into_iter().map(|s| s / count as f64).collect();
        }
    }
}

/// Seed centroids: one point drawn from the seeded generator, then repeatedly
/// the point farthest from every centroid chosen so far.
fn seed_centroids(points: &[&[f64]], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..points.len());
    let mut centroids = vec![points[first].to_vec()];
    let mut nearest: Vec<f64> = points.iter().map(|p| sq_dist(p, points[first])).collect();
    while centroids.len() < k {
        let mut far = (0, f64::NEG_INFINITY);
        for (i, &d) in nearest.iter().enumerate() {
            if d > far.1 {
                far = (i, d);
            }
        }
        let chosen = points[far.0];
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, chosen));
        }
        centroids.push(chosen.to_vec());
    }
    centroids
}

/// Lloyd's k-means. Deterministic for a fixed seed.
pub fn cluster_face_features(vectors: &[&[f64]], params: &KMeansParams) -> Result<ClusterReport> {
    let n = vectors.len();
    if params.k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if params.k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {} exceeds the number of vectors ({n})",
            params.k
        )));
    }
    let dim = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }

    let mut centroids = seed_centroids(vectors, params.k, params.seed);
    let first = assign(vectors, &centroids);
    let mut sse_history = vec![first.iter().map(|a| a.1).sum()];
    let mut assignments: Vec<usize> = first.into_iter().map(|a| a.0).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        iterations += 1;
        update(vectors, &assignments, &mut centroids);
        let next = assign(vectors, &centroids);
        sse_history.push(next.iter().map(|a| a.1).sum());
        let next: Vec<usize> = next.into_iter().map(|a| a.0).collect();
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }
    if !converged {
        update(vectors, &assignments, &mut centroids);
    }

    let mut clusters: Vec<Vec<ClusterMember>> = vec![Vec::new(); params.k];
    for (index, (&c, p)) in assignments.iter().zip(vectors).enumerate() {
        clusters[c].push(ClusterMember {
            index,
            distance: sq_dist(p, &centroids[c]).sqrt(),
        });
    }
    for members in &mut clusters {
        members.sort_by(|a, b| {
            a.distance
                .total_cmp(&b.distance)
                .then(a.index.cmp(&b.index))
        });
    }
    Ok(ClusterReport {
        assignments,
        clusters,
        centroids,
        sse_history,
        iterations,
        converged,
    })
}
