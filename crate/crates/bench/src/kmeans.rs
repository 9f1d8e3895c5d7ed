//! Kernel k-means on a precomputed Gram matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qgrf_core::dense::DenseMatrix;

use crate::BenchError;

pub const RESTARTS: usize = 5;

/// Squared feature-space distances from every point to every cluster mean.
fn distances(k: &DenseMatrix, assign: &[usize], n_clusters: usize) -> Vec<Vec<f64>> {
    let n = k.n();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    for (i, &c) in assign.iter().enumerate() {
        members[c].push(i);
    }
    let within: Vec<f64> = members
        .iter()
        .map(|m| {
            if m.is_empty() {
                return 0.0;
            }
            let s: f64 = m.iter().flat_map(|&a| m.iter().map(move |&b| (a, b))).map(|(a, b)| k[(a, b)]).sum();
            s / (m.len() * m.len()) as f64
        })
        .collect();
    (0..n)
        .map(|i| {
            (0..n_clusters)
                .map(|c| {
                    let m = &members[c];
                    if m.is_empty() {
                        return f64::INFINITY;
                    }
                    let cross: f64 = m.iter().map(|&j| k[(i, j)]).sum::<f64>() / m.len() as f64;
                    k[(i, i)] - 2.0 * cross + within[c]
                })
                .collect()
        })
        .collect()
}

fn one_run(k: &DenseMatrix, n_clusters: usize, rng: &mut ChaCha8Rng, max_iters: usize) -> (Vec<usize>, f64) {
    let n = k.n();
    let mut assign: Vec<usize> = (0..n).map(|_| rng.random_range(0..n_clusters)).collect();
    for _ in 0..max_iters {
        reseed_empty(k, &mut assign, n_clusters);
        let d = distances(k, &assign, n_clusters);
        let next: Vec<usize> = d
            .iter()
            .zip(&assign)
            .map(|(row, &cur)| {
                let mut best = cur;
                for (c, &v) in row.iter().enumerate() {
                    if v < row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    reseed_empty(k, &mut assign, n_clusters);
    let d = distances(k, &assign, n_clusters);
    let objective = assign.iter().enumerate().map(|(i, &c)| d[i][c]).sum();
    (assign, objective)
}

/// Moves the point farthest from its own cluster mean into each empty cluster.
fn reseed_empty(k: &DenseMatrix, assign: &mut [usize], n_clusters: usize) {
    loop {
        let mut sizes = vec![0usize; n_clusters];
        assign.iter().for_each(|&c| sizes[c] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let d = distances(k, assign, n_clusters);
        let far = (0..assign.len())
            .filter(|&i| sizes[assign[i]] > 1)
            .max_by(|&a, &b| d[a][assign[a]].total_cmp(&d[b][assign[b]]).then(b.cmp(&a)))
            .expect("more points than clusters");
        assign[far] = empty;
    }
}

/// Best of [`RESTARTS`] random-assignment runs by total within-cluster distance.
pub fn kernelized_kmeans(kernel: &DenseMatrix, n_clusters: usize, seed: u64, max_iters: usize) -> Result<Vec<usize>, BenchError> {
    if n_clusters < 2 {
        return Err(BenchError::Config("need at least two clusters".into()));
    }
    if n_clusters > kernel.n() {
        return Err(BenchError::Config(format!("{n_clusters} clusters for {} points", kernel.n())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..RESTARTS {
        let run = one_run(kernel, n_clusters, &mut rng, max_iters);
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    Ok(best.unwrap().0)
}

/// Fraction of node pairs whose same-cluster relation differs between the two labellings.
pub fn clustering_error(pred: &[usize], reference: &[usize]) -> Result<f64, BenchError> {
    if pred.len() != reference.len() {
        return Err(BenchError::Config(format!("label lengths {} and {} differ", pred.len(), reference.len())));
    }
    let n = pred.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut wrong = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            if (pred[i] == pred[j]) != (reference[i] == reference[j]) {
                wrong += 1;
            }
        }
    }
    Ok(wrong as f64 / (n * (n - 1) / 2) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_examples() {
        assert_eq!(clustering_error(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(clustering_error(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!((clustering_error(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        assert!(clustering_error(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn two_cliques_separate_perfectly() {
        let n = 10;
        let k = DenseMatrix::from_fn(n, |i, j| if (i < 5) == (j < 5) { 1.0 } else { 0.0 });
        let truth: Vec<usize> = (0..n).map(|i| usize::from(i >= 5)).collect();
        for seed in 0..5 {
            let a = kernelized_kmeans(&k, 2, seed, 100).unwrap();
            assert_eq!(clustering_error(&a, &truth).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_bad_cluster_counts() {
        let k = DenseMatrix::identity(3);
        assert!(kernelized_kmeans(&k, 4, 0, 10).is_err());
        assert!(kernelized_kmeans(&k, 1, 0, 10).is_err());
        let a = kernelized_kmeans(&k, 3, 0, 10).unwrap();
        let mut s = a.clone();
        s.sort();
        assert_eq!(s, vec![0, 1, 2]);
    }
}
