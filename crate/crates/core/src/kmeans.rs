//! Lloyd's K-means on 2D points with farthest-point seeding.

use rand::Rng;

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Cluster of each input point.
    pub labels: Vec<usize>,
    /// `None` marks a cluster with no members.
    pub centroids: Vec<Option<[f64; 2]>>,
}

impl ClusterAssignment {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels.iter().enumerate().filter(move |(_, &c)| c == cluster).map(|(i, _)| i)
    }

    /// Within-cluster sum of squared distances to the centroids.
    pub fn inertia(&self, points: &[[f64; 2]]) -> f64 {
        points
            .iter()
            .zip(&self.labels)
            .map(|(p, &c)| self.centroids[c].map_or(0.0, |m| dist2(p, &m)))
            .sum()
    }
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: &[f64; 2], centroids: &[Option<[f64; 2]>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, m) in centroids.iter().enumerate() {
        if let Some(m) = m {
            let d = dist2(p, m);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
    }
    best
}

/// Cluster `points` into `k` groups.
///
/// The first seed is a uniformly random point; each further seed is the point
/// farthest from the seeds chosen so far (lowest index on ties). With fewer
/// points than clusters every point gets its own cluster and the remaining
/// centroids are `None`.
pub fn kmeans<R: Rng + ?Sized>(points: &[[f64; 2]], k: usize, rng: &mut R) -> ClusterAssignment {
    assert!(k >= 1, "kmeans needs at least one cluster");
    if points.is_empty() {
        return ClusterAssignment { labels: Vec::new(), centroids: vec![None; k] };
    }
    if points.len() <= k {
        let mut centroids: Vec<Option<[f64; 2]>> = points.iter().map(|&p| Some(p)).collect();
        centroids.resize(k, None);
        return ClusterAssignment { labels: (0..points.len()).collect(), centroids };
    }

    let mut seeds = vec![rng.random_range(0..points.len())];
    let mut min_d: Vec<f64> = points.iter().map(|p| dist2(p, &points[seeds[0]])).collect();
    while seeds.len() < k {
        let mut far = 0;
        for (i, &d) in min_d.iter().enumerate() {
            if d > min_d[far] {
                far = i;
            }
        }
        seeds.push(far);
        for (i, p) in points.iter().enumerate() {
            min_d[i] = min_d[i].min(dist2(p, &points[far]));
        }
    }
    let mut centroids: Vec<Option<[f64; 2]>> = seeds.iter().map(|&i| Some(points[i])).collect();
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();

    for _ in 0..MAX_ITERATIONS {
        centroids = recompute(points, &labels, k);
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    centroids = recompute(points, &labels, k);
    ClusterAssignment { labels, centroids }
}

fn recompute(points: &[[f64; 2]], labels: &[usize], k: usize) -> Vec<Option<[f64; 2]>> {
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];
    for (p, &c) in points.iter().zip(labels) {
        sums[c][0] += p[0];
        sums[c][1] += p[1];
        counts[c] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &n)| (n > 0).then(|| [s[0] / n as f64, s[1] / n as f64]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{Purpose, SeedStream};

    fn rng() -> rand_chacha::ChaCha8Rng {
        SeedStream::new(3).rng(0, 0, Purpose::KMeans)
    }

    #[test]
    fn two_separable_points() {
        let pts = [[0.0, 0.0], [10.0, 10.0]];
        let a = kmeans(&pts, 2, &mut rng());
        assert_ne!(a.labels[0], a.labels[1]);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(a.centroids[a.labels[i]], Some(*p));
        }
    }

    #[test]
    fn single_cluster_is_mean() {
        let pts = [[0.0, 0.0], [4.0, 2.0], [2.0, 7.0]];
        let a = kmeans(&pts, 1, &mut rng());
        let c = a.centroids[0].unwrap();
        assert!((c[0] - 2.0).abs() < 1e-12 && (c[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn fewer_points_than_clusters() {
        let a = kmeans(&[[1.0, 1.0]], 3, &mut rng());
        assert_eq!(a.labels, vec![0]);
        assert_eq!(a.centroids, vec![Some([1.0, 1.0]), None, None]);
        let empty = kmeans(&[], 2, &mut rng());
        assert!(empty.labels.is_empty());
        assert_eq!(empty.centroids, vec![None, None]);
    }

    #[test]
    fn deterministic_per_seed() {
        let pts: Vec<[f64; 2]> = (0..30).map(|i| [(i * 37 % 101) as f64, (i * 53 % 97) as f64]).collect();
        assert_eq!(kmeans(&pts, 3, &mut rng()), kmeans(&pts, 3, &mut rng()));
    }

    #[test]
    fn beats_random_assignments() {
        let mut r = SeedStream::new(9).rng(0, 0, Purpose::Custom(1));
        let pts: Vec<[f64; 2]> = (0..20).map(|_| [r.random_range(0.0..200.0), r.random_range(0.0..200.0)]).collect();
        let fitted = kmeans(&pts, 2, &mut rng()).inertia(&pts);
        for _ in 0..50 {
            let labels: Vec<usize> = (0..pts.len()).map(|_| r.random_range(0..2)).collect();
            let random = ClusterAssignment { centroids: recompute(&pts, &labels, 2), labels };
            assert!(fitted <= random.inertia(&pts) + 1e-9);
        }
    }
}
