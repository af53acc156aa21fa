//! Brute-force k-nearest-neighbor classification.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnMetric {
    Euclidean,
    Cosine,
}

fn distance(a: ArrayView1<f64>, b: ArrayView1<f64>, metric: KnnMetric) -> f64 {
    match metric {
        KnnMetric::Euclidean => a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        KnnMetric::Cosine => {
            let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - dot / (na * nb)
            }
        }
    }
}

/// Majority vote among the k nearest training points. Neighbor order and
/// vote ties both break toward the smallest class index, which makes
/// predictions invariant to permutations of the training set.
pub fn knn_predict(
    train: ArrayView2<f64>,
    labels: &[usize],
    query: ArrayView1<f64>,
    k: usize,
    metric: KnnMetric,
) -> Result<usize> {
    let n = train.nrows();
    if n == 0 {
        return Err(Error::InvalidParameter("empty k-NN training set".into()));
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{n} training rows vs {} labels",
            labels.len()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must be in [1, {n}]"
        )));
    }

    let mut scored: Vec<(f64, usize)> = train
        .outer_iter()
        .zip(labels)
        .map(|(row, &label)| (distance(row, query, metric), label))
        .collect();
    scored.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });

    let mut votes: Vec<(usize, usize)> = Vec::new(); // (class, count)
    for &(_, label) in scored.iter().take(k) {
        match votes.iter_mut().find(|(c, _)| *c == label) {
            Some((_, count)) => *count += 1,
            None => votes.push((label, 1)),
        }
    }
    votes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(votes[0].0)
}

/// k-NN over a batch of queries.
pub fn knn_predict_batch(
    train: ArrayView2<f64>,
    labels: &[usize],
    queries: ArrayView2<f64>,
    k: usize,
    metric: KnnMetric,
) -> Result<Vec<usize>> {
    queries
        .outer_iter()
        .map(|q| knn_predict(train, labels, q, k, metric))
        .collect()
}
