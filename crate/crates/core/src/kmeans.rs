//! Lloyd's k-means with k-means++ seeding, used to initialise labels.

use rand::Rng;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Scales every coordinate to zero mean and unit variance; constant
/// coordinates are only centred.
pub fn standardize(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if points.is_empty() {
        return Vec::new();
    }
    let d = points[0].len();
    let n = points.len() as f64;
    let mut out = points.to_vec();
    for c in 0..d {
        let mean = points.iter().map(|p| p[c]).sum::<f64>() / n;
        let sd = (points.iter().map(|p| (p[c] - mean).powi(2)).sum::<f64>() / n).sqrt();
        for p in &mut out {
            p[c] -= mean;
            if sd > 1e-12 * (1.0 + mean.abs()) {
                p[c] /= sd;
            }
        }
    }
    out
}

/// Assignment of each point to one of `k` clusters, minimising within-cluster
/// squared distance from a k-means++ start. Empty clusters are refilled with
/// the point farthest from its centre.
pub fn kmeans<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, max_iters: usize, rng: &mut R) -> Vec<usize> {
    let n = points.len();
    if n == 0 || k <= 1 {
        return vec![0; n];
    }
    let mut centres: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    while centres.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centres.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, di) in d.iter().enumerate() {
                if u < *di {
                    pick = i;
                    break;
                }
                u -= di;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centres.push(points[next].clone());
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = (0..k)
                .min_by(|&a, &b| dist2(p, &centres[a]).total_cmp(&dist2(p, &centres[b])))
                .unwrap_or(0);
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| {
                        dist2(&points[a], &centres[labels[a]]).total_cmp(&dist2(&points[b], &centres[labels[b]]))
                    });
                if let Some(i) = far {
                    counts[labels[i]] -= 1;
                    labels[i] = c;
                    counts[c] = 1;
                    changed = true;
                }
            }
        }
        for (c, centre) in centres.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for (d, v) in centre.iter_mut().enumerate() {
                *v = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    labels
}

/// Within-cluster sum of squared distances to the cluster means.
pub fn inertia(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let d = points.first().map(Vec::len).unwrap_or(0);
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| {
            p.iter()
                .zip(&sums[l])
                .map(|(v, s)| (v - s / counts[l] as f64).powi(2))
                .sum::<f64>()
        })
        .sum()
}

/// Lowest-inertia clustering over `restarts` k-means runs.
pub fn kmeans_best<R: Rng + ?Sized>(points: &[Vec<f64>], k: usize, restarts: usize, rng: &mut R) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..restarts.max(1) {
        let labels = kmeans(points, k, 100, rng);
        let score = inertia(points, &labels, k);
        if best.as_ref().is_none_or(|(b, _)| score < *b - 1e-12) {
            best = Some((score, labels));
        }
    }
    best.map(|(_, l)| l).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    #[test]
    fn separates_obvious_clusters() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(vec![i as f64 * 0.01, 0.0]);
            pts.push(vec![10.0 + i as f64 * 0.01, 5.0]);
        }
        let mut rng = substream(4, Stream::Init, 0);
        let labels = kmeans(&pts, 2, 50, &mut rng);
        for i in 0..10 {
            assert_eq!(labels[2 * i], labels[0]);
            assert_eq!(labels[2 * i + 1], labels[1]);
        }
        assert_ne!(labels[0], labels[1]);
    }

    #[test]
    fn every_cluster_is_used() {
        let pts: Vec<Vec<f64>> = (0..6).map(|_| vec![1.0]).collect();
        let mut rng = substream(5, Stream::Init, 0);
        let labels = kmeans(&pts, 3, 10, &mut rng);
        for c in 0..3 {
            assert!(labels.contains(&c));
        }
    }
}
